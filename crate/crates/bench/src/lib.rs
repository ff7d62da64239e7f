//! Shared fixtures for the benchmarks.

use chase_escape::config::Scenario;
use chase_escape::experiment::{realize, Realization};
use chase_escape::street::GeneratorTag;

/// Default scenario on a window of the given side with the given device
/// and knight intensities.
pub fn scenario(side: f64, lambda: f64, lambda_w: f64) -> Scenario {
    let mut s = Scenario::new(GeneratorTag::Pvt, lambda).expect("valid intensity");
    s.streets.window_side = side;
    s.devices.lambda_w = lambda_w;
    s.resolve().expect("valid scenario")
}

/// First replica of `scenario` that could be rooted.
pub fn realization(scenario: &Scenario) -> Realization {
    (0..)
        .find_map(|i| realize(scenario, i).expect("realization"))
        .expect("some replica roots")
}
