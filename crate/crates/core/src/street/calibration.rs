//! Intensity normalization and the finite-window crossing diagnostic.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::graph::build_graph;
use super::system::GeneratorTag;
use super::tessellation::StreetModel;
use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::rng::SimRng;
use crate::stats::Proportion;
use crate::union_find::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Side of each estimation window.
    pub window_side: f64,
    /// Windows averaged per evaluation.
    pub replicas: usize,
    /// Accepted relative deviation of the estimate from the target.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            window_side: 50.0,
            replicas: 50,
            rel_tol: 0.005,
            max_iter: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Seed intensity for tessellations, spacing for Manhattan grids.
    pub parameter: f64,
    /// Estimated length per unit area at `parameter`.
    pub estimate: f64,
    pub iterations: usize,
}

/// Mean street length per unit area over `seeds.len()` windows, one per
/// seed.
pub fn estimate_length_intensity(
    model: &StreetModel,
    window_side: f64,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    let window = Window::centered(window_side);
    let mut total = 0.0;
    for &s in seeds {
        let mut rng = SimRng::seed_from_u64(s);
        total += model.generate(window, 0.0, &mut rng)?.length_in(&window);
    }
    Ok(total / (seeds.len() as f64 * window.area()))
}

/// Closed-form seed intensity (or spacing) with `target` street length per
/// unit area: `2 sqrt(γ)` for Voronoi, `32 sqrt(γ) / (3π)` for Delaunay and
/// `2 / spacing` for the grid.
pub fn closed_form_parameter(tag: GeneratorTag, target: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::invalid(
            "target",
            format!("must be positive, got {target}"),
        ));
    }
    match tag {
        GeneratorTag::Pvt => Ok((target / 2.0).powi(2)),
        GeneratorTag::Pdt => Ok((3.0 * std::f64::consts::PI * target / 32.0).powi(2)),
        GeneratorTag::Manhattan => Ok(2.0 / target),
        GeneratorTag::Fixture => Err(Error::invalid(
            "generator",
            "fixtures have no scale parameter",
        )),
    }
}

/// Seed intensity (or grid spacing) giving `target` street length per unit
/// area.
pub fn normalize_intensity<R: Rng + ?Sized>(
    tag: GeneratorTag,
    target: f64,
    rng: &mut R,
) -> Result<f64> {
    normalize_intensity_with(tag, target, &CalibrationOptions::default(), rng).map(|c| c.parameter)
}

/// Tessellations are calibrated by bisection on `log γ`, every evaluation
/// reusing the same window seeds. Manhattan grids use the closed form
/// spacing `2 / target`.
pub fn normalize_intensity_with<R: Rng + ?Sized>(
    tag: GeneratorTag,
    target: f64,
    opts: &CalibrationOptions,
    rng: &mut R,
) -> Result<Calibration> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::invalid(
            "target",
            format!("must be positive, got {target}"),
        ));
    }
    let model = |gamma: f64| match tag {
        GeneratorTag::Pvt => Ok(StreetModel::Pvt { gamma }),
        GeneratorTag::Pdt => Ok(StreetModel::Pdt { gamma }),
        other => Err(Error::invalid(
            "generator",
            format!("{other} has no seed intensity"),
        )),
    };
    match tag {
        GeneratorTag::Manhattan => {
            return Ok(Calibration {
                parameter: 2.0 / target,
                estimate: target,
                iterations: 0,
            })
        }
        GeneratorTag::Fixture => {
            return Err(Error::invalid("generator", "fixtures cannot be calibrated"));
        }
        _ => {}
    }
    let seeds: Vec<u64> = (0..opts.replicas).map(|_| rng.random()).collect();
    let eval = |gamma: f64| estimate_length_intensity(&model(gamma)?, opts.window_side, &seeds);

    // Initial bracket from the square-root scaling of length with γ.
    let at_one = eval(1.0)?;
    let guess = (target / at_one).powi(2);
    let (mut lo, mut hi) = (guess / 4.0, guess * 4.0);
    let mut iterations = 1;
    while eval(lo)? > target {
        lo /= 4.0;
        iterations += 1;
        if iterations > opts.max_iter {
            return Err(Error::NonConvergence { lo, hi });
        }
    }
    while eval(hi)? < target {
        hi *= 4.0;
        iterations += 1;
        if iterations > opts.max_iter {
            return Err(Error::NonConvergence { lo, hi });
        }
    }
    while iterations < opts.max_iter {
        let mid = (lo * hi).sqrt();
        let value = eval(mid)?;
        iterations += 1;
        if (value - target).abs() <= opts.rel_tol * target {
            return Ok(Calibration {
                parameter: mid,
                estimate: value,
                iterations,
            });
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence { lo, hi })
}

/// Whether some connected component of the streets touches both the left
/// and the right edge of `window`.
pub fn crosses_left_right(g: &super::graph::StreetGraph, window: &Window) -> bool {
    let tol = 1e-9 * window.side.max(1.0);
    let n = g.crossings().len();
    let mut uf = UnionFind::new(n);
    for s in g.streets() {
        uf.union(s.from.index(), s.to.index());
    }
    let touches = |p: Point, x: f64| (p.x - x).abs() <= tol;
    let mut left = vec![false; n];
    for (i, &p) in g.crossings().iter().enumerate() {
        if touches(p, window.min.x) {
            left[uf.find(i)] = true;
        }
    }
    g.crossings()
        .iter()
        .enumerate()
        .any(|(i, &p)| touches(p, window.max().x) && left[uf.find(i)])
}

/// Fraction of windows of side `side` in which the streets of length at
/// least `a` cross from left to right, for each `a`. The same realizations
/// are used for every threshold.
pub fn crossing_probabilities<R: Rng + ?Sized>(
    model: &StreetModel,
    thresholds: &[f64],
    side: f64,
    replicas: usize,
    rng: &mut R,
) -> Result<Vec<Proportion>> {
    if replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    if let Some(&a) = thresholds.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::invalid(
            "a",
            format!("must be non-negative, got {a}"),
        ));
    }
    let window = Window::centered(side);
    let mut hits = vec![0u64; thresholds.len()];
    for _ in 0..replicas {
        let graph = build_graph(&model.generate(window, 0.0, rng)?);
        for (k, &a) in thresholds.iter().enumerate() {
            if crosses_left_right(&graph.thin_by_length(a), &window) {
                hits[k] += 1;
            }
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| Proportion::new(h, replicas as u64))
        .collect())
}

pub fn crossing_probability<R: Rng + ?Sized>(
    model: &StreetModel,
    a: f64,
    side: f64,
    replicas: usize,
    rng: &mut R,
) -> Result<Proportion> {
    Ok(crossing_probabilities(model, &[a], side, replicas, rng)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{ReplicaSeed, Substream};

    #[test]
    fn manhattan_closed_form() {
        let mut rng = ReplicaSeed::new(0, 0, 0).stream(Substream::Streets);
        let c = normalize_intensity(GeneratorTag::Manhattan, 1.0, &mut rng).unwrap();
        assert_eq!(c, 2.0);
        assert_eq!(
            normalize_intensity(GeneratorTag::Manhattan, 4.0, &mut rng).unwrap(),
            0.5
        );
    }

    #[test]
    fn zero_target_is_rejected() {
        let mut rng = ReplicaSeed::new(0, 0, 0).stream(Substream::Streets);
        assert!(matches!(
            normalize_intensity(GeneratorTag::Pvt, 0.0, &mut rng),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn small_pvt_calibration_lands_near_quarter() {
        let mut rng = ReplicaSeed::new(3, 0, 0).stream(Substream::Streets);
        let opts = CalibrationOptions {
            window_side: 30.0,
            replicas: 10,
            rel_tol: 0.005,
            max_iter: 60,
        };
        let c = normalize_intensity_with(GeneratorTag::Pvt, 1.0, &opts, &mut rng).unwrap();
        assert!((c.parameter - 0.25).abs() < 0.03, "{c:?}");
    }

    #[test]
    fn crossing_extremes() {
        let mut rng = ReplicaSeed::new(5, 0, 0).stream(Substream::Streets);
        let model = StreetModel::Pvt { gamma: 0.25 };
        let p = crossing_probabilities(&model, &[0.0, f64::INFINITY], 20.0, 5, &mut rng).unwrap();
        assert_eq!(p[0].successes, 5);
        assert_eq!(p[1].successes, 0);
    }
}
