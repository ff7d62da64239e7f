//! The random street system: generation, the street/crossing graph,
//! shortest routes and calibration.

mod calibration;
mod graph;
mod routing;
mod system;
mod tessellation;

pub use calibration::{
    closed_form_parameter, crosses_left_right, crossing_probabilities, crossing_probability,
    estimate_length_intensity, normalize_intensity, normalize_intensity_with, Calibration,
    CalibrationOptions,
};
pub use graph::{build_graph, CrossingId, Street, StreetGraph, StreetId, StreetPoint};
pub use routing::{crossing_distances, shortest_path, Leg, Route, ShortestPaths, TIE_TOLERANCE};
pub use system::{GeneratorTag, Segment, SegmentSystem, SystemMeta};
pub use tessellation::{
    default_buffer, generate_manhattan, generate_pdt, generate_pdt_buffered, generate_pvt,
    generate_pvt_buffered, pdt_from_seeds, poisson_points, pvt_from_seeds, StreetModel,
};
