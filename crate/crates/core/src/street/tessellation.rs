//! Street system generators: Poisson-Voronoi and Poisson-Delaunay
//! tessellations and the deterministic Manhattan grid.
//!
//! Tessellations are built from seeds in the window inflated by a buffer
//! and then clipped back to the window, so that what remains inside is a
//! faithful sample of the stationary tessellation.

use delaunator::{next_halfedge, prev_halfedge, triangulate, EMPTY};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::system::{GeneratorTag, Segment, SegmentSystem, SystemMeta};
use crate::error::{Error, Result};
use crate::geometry::{Point, Window, TOLERANCE};

/// Buffer width used around the window: three typical seed spacings, or
/// twice the kernel reach if that is larger.
pub fn default_buffer(gamma: f64, kernel_reach: f64) -> f64 {
    (3.0 / gamma.sqrt()).max(2.0 * kernel_reach)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(
            "gamma",
            format!("must be positive, got {gamma}"),
        ));
    }
    Ok(())
}

fn check_window(window: &Window) -> Result<()> {
    if !(window.side > 0.0) {
        return Err(Error::invalid("window", "side must be positive"));
    }
    Ok(())
}

/// Uniform Poisson sample of intensity `gamma` in `region`. Empty samples
/// are redrawn.
pub fn poisson_points<R: Rng + ?Sized>(
    gamma: f64,
    region: &Window,
    rng: &mut R,
) -> Result<Vec<Point>> {
    check_gamma(gamma)?;
    let mean = gamma * region.area();
    let poisson = Poisson::new(mean).map_err(|e| Error::invalid("gamma", e.to_string()))?;
    loop {
        let n = poisson.sample(rng) as usize;
        if n == 0 {
            log::debug!(
                "empty Poisson sample (probability {:.3e}); redrawing",
                (-mean).exp()
            );
            continue;
        }
        return Ok((0..n)
            .map(|_| {
                Point::new(
                    region.min.x + rng.random::<f64>() * region.side,
                    region.min.y + rng.random::<f64>() * region.side,
                )
            })
            .collect());
    }
}

pub fn generate_pvt<R: Rng + ?Sized>(
    gamma: f64,
    window: Window,
    rng: &mut R,
) -> Result<SegmentSystem> {
    generate_pvt_buffered(gamma, window, default_buffer(gamma, 0.0), rng)
}

pub fn generate_pvt_buffered<R: Rng + ?Sized>(
    gamma: f64,
    window: Window,
    buffer: f64,
    rng: &mut R,
) -> Result<SegmentSystem> {
    check_window(&window)?;
    let seeds = poisson_points(gamma, &window.inflate(buffer), rng)?;
    let segments = voronoi_edges(&seeds, &window, &window.inflate(buffer));
    SegmentSystem::new(
        segments,
        window,
        SystemMeta {
            generator: GeneratorTag::Pvt,
            intensity: gamma,
            seed: None,
            buffer,
        },
    )
}

/// Voronoi edges of the given seeds clipped to `window`.
pub fn pvt_from_seeds(seeds: &[Point], window: Window) -> Result<SegmentSystem> {
    check_window(&window)?;
    let segments = voronoi_edges(seeds, &window, &window);
    SegmentSystem::fixture(segments, window)
}

pub fn generate_pdt<R: Rng + ?Sized>(
    gamma: f64,
    window: Window,
    rng: &mut R,
) -> Result<SegmentSystem> {
    generate_pdt_buffered(gamma, window, default_buffer(gamma, 0.0), rng)
}

pub fn generate_pdt_buffered<R: Rng + ?Sized>(
    gamma: f64,
    window: Window,
    buffer: f64,
    rng: &mut R,
) -> Result<SegmentSystem> {
    check_window(&window)?;
    let seeds = poisson_points(gamma, &window.inflate(buffer), rng)?;
    let segments = delaunay_edges(&seeds, &window)?;
    SegmentSystem::new(
        segments,
        window,
        SystemMeta {
            generator: GeneratorTag::Pdt,
            intensity: gamma,
            seed: None,
            buffer,
        },
    )
}

/// Delaunay edges of the given seeds clipped to `window`. Three or more
/// seeds that are all collinear are rejected as degenerate.
pub fn pdt_from_seeds(seeds: &[Point], window: Window) -> Result<SegmentSystem> {
    check_window(&window)?;
    let segments = delaunay_edges(seeds, &window)?;
    SegmentSystem::fixture(segments, window)
}

/// Axis-aligned grid anchored at the window's lower-left corner, boundary
/// lines included.
pub fn generate_manhattan(spacing: f64, window: Window) -> Result<SegmentSystem> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid(
            "spacing",
            format!("must be positive, got {spacing}"),
        ));
    }
    check_window(&window)?;
    let max = window.max();
    let lines = (window.side / spacing + 1e-9).floor() as usize;
    let mut segments = Vec::with_capacity(2 * (lines + 1));
    for k in 0..=lines {
        let x = (window.min.x + k as f64 * spacing).min(max.x);
        segments.push(Segment::new(
            Point::new(x, window.min.y),
            Point::new(x, max.y),
        ));
    }
    for k in 0..=lines {
        let y = (window.min.y + k as f64 * spacing).min(max.y);
        segments.push(Segment::new(
            Point::new(window.min.x, y),
            Point::new(max.x, y),
        ));
    }
    SegmentSystem::new(
        segments,
        window,
        SystemMeta {
            generator: GeneratorTag::Manhattan,
            intensity: spacing,
            seed: None,
            buffer: 0.0,
        },
    )
}

/// A street generator together with its scale parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StreetModel {
    Pvt { gamma: f64 },
    Pdt { gamma: f64 },
    Manhattan { spacing: f64 },
}

impl StreetModel {
    pub fn tag(&self) -> GeneratorTag {
        match self {
            StreetModel::Pvt { .. } => GeneratorTag::Pvt,
            StreetModel::Pdt { .. } => GeneratorTag::Pdt,
            StreetModel::Manhattan { .. } => GeneratorTag::Manhattan,
        }
    }

    /// Generate on `window` with the default buffer for a kernel of the
    /// given reach.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        window: Window,
        kernel_reach: f64,
        rng: &mut R,
    ) -> Result<SegmentSystem> {
        match *self {
            StreetModel::Pvt { gamma } => {
                check_gamma(gamma)?;
                generate_pvt_buffered(gamma, window, default_buffer(gamma, kernel_reach), rng)
            }
            StreetModel::Pdt { gamma } => {
                check_gamma(gamma)?;
                generate_pdt_buffered(gamma, window, default_buffer(gamma, kernel_reach), rng)
            }
            StreetModel::Manhattan { spacing } => generate_manhattan(spacing, window),
        }
    }

    /// Generate with an explicit buffer; ignored by the grid.
    pub fn generate_with_buffer<R: Rng + ?Sized>(
        &self,
        window: Window,
        buffer: f64,
        rng: &mut R,
    ) -> Result<SegmentSystem> {
        if !(buffer >= 0.0) || !buffer.is_finite() {
            return Err(Error::invalid(
                "buffer",
                format!("must be non-negative, got {buffer}"),
            ));
        }
        match *self {
            StreetModel::Pvt { gamma } => {
                check_gamma(gamma)?;
                generate_pvt_buffered(gamma, window, buffer, rng)
            }
            StreetModel::Pdt { gamma } => {
                check_gamma(gamma)?;
                generate_pdt_buffered(gamma, window, buffer, rng)
            }
            StreetModel::Manhattan { spacing } => generate_manhattan(spacing, window),
        }
    }
}

fn to_delaunator(points: &[Point]) -> Vec<delaunator::Point> {
    points
        .iter()
        .map(|p| delaunator::Point { x: p.x, y: p.y })
        .collect()
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let b = b - a;
    let c = c - a;
    let d = 2.0 * b.cross(c);
    let bl = b.dot(b);
    let cl = c.dot(c);
    a + Point::new((c.y * bl - b.y * cl) / d, (b.x * cl - c.x * bl) / d)
}

fn push_clipped(out: &mut Vec<Segment>, window: &Window, a: Point, b: Point) {
    if let Some((p, q)) = window.clip_segment(a, b) {
        if p.distance(q) > TOLERANCE {
            out.push(Segment::new(p, q));
        }
    }
}

fn voronoi_edges(seeds: &[Point], window: &Window, extent: &Window) -> Vec<Segment> {
    let mut out = Vec::new();
    if seeds.len() < 2 {
        return out;
    }
    // Long enough that every ray leaves the window before it ends.
    let far = |from: Point| 4.0 * extent.side + from.distance(extent.center());
    let tri = triangulate(&to_delaunator(seeds));
    if tri.triangles.is_empty() {
        // All seeds collinear: parallel bisector lines.
        let dir = seeds[1] - seeds[0];
        let mut order: Vec<usize> = (0..seeds.len()).collect();
        order.sort_by(|&i, &j| {
            (seeds[i] - seeds[0])
                .dot(dir)
                .total_cmp(&(seeds[j] - seeds[0]).dot(dir))
        });
        for w in order.windows(2) {
            let (p, q) = (seeds[w[0]], seeds[w[1]]);
            if p.distance(q) <= TOLERANCE {
                continue;
            }
            let mid = p.lerp(q, 0.5);
            let d = q - p;
            let n = Point::new(-d.y, d.x) * (1.0 / d.norm());
            let len = far(mid);
            push_clipped(&mut out, window, mid - n * len, mid + n * len);
        }
        return out;
    }
    let centers: Vec<Point> = tri
        .triangles
        .chunks_exact(3)
        .map(|t| circumcenter(seeds[t[0]], seeds[t[1]], seeds[t[2]]))
        .collect();
    for e in 0..tri.halfedges.len() {
        let twin = tri.halfedges[e];
        let c = centers[e / 3];
        if twin != EMPTY {
            if e < twin {
                push_clipped(&mut out, window, c, centers[twin / 3]);
            }
            continue;
        }
        // Hull edge: the bisector ray leaves the triangle away from its
        // third vertex.
        let p = seeds[tri.triangles[e]];
        let q = seeds[tri.triangles[next_halfedge(e)]];
        let r = seeds[tri.triangles[prev_halfedge(e)]];
        let d = q - p;
        let mut n = Point::new(-d.y, d.x) * (1.0 / d.norm());
        if n.dot(r - p) > 0.0 {
            n = -n;
        }
        push_clipped(&mut out, window, c, c + n * far(c));
    }
    out
}

fn delaunay_edges(seeds: &[Point], window: &Window) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    match seeds.len() {
        0 | 1 => return Ok(out),
        2 => {
            push_clipped(&mut out, window, seeds[0], seeds[1]);
            return Ok(out);
        }
        _ => {}
    }
    let tri = triangulate(&to_delaunator(seeds));
    if tri.triangles.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} Delaunay seeds are collinear",
            seeds.len()
        )));
    }
    for e in 0..tri.halfedges.len() {
        let twin = tri.halfedges[e];
        if twin == EMPTY || e < twin {
            let p = seeds[tri.triangles[e]];
            let q = seeds[tri.triangles[next_halfedge(e)]];
            push_clipped(&mut out, window, p, q);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{ReplicaSeed, Substream};

    #[test]
    fn single_seed_has_no_edges() {
        let sys = pvt_from_seeds(&[Point::new(0.5, 0.5)], Window::centered(4.0)).unwrap();
        assert!(sys.segments().is_empty());
    }

    #[test]
    fn two_seeds_give_their_bisector() {
        let sys = pvt_from_seeds(
            &[Point::new(-1.0, 0.0), Point::new(1.0, 0.0)],
            Window::centered(4.0),
        )
        .unwrap();
        assert_eq!(sys.segments().len(), 1);
        let s = sys.segments()[0];
        assert!(s.a.x.abs() < 1e-12 && s.b.x.abs() < 1e-12);
        assert!((s.length() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn three_seeds_pvt_has_three_rays() {
        let sys = pvt_from_seeds(
            &[
                Point::new(-1.0, -1.0),
                Point::new(1.0, -1.0),
                Point::new(0.0, 1.0),
            ],
            Window::centered(10.0),
        )
        .unwrap();
        assert_eq!(sys.segments().len(), 3);
        // All three meet at the circumcenter.
        let cc = circumcenter(
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(0.0, 1.0),
        );
        for s in sys.segments() {
            assert!(s.a.distance(cc) < 1e-12 || s.b.distance(cc) < 1e-12);
        }
    }

    #[test]
    fn triangle_pdt() {
        let sys = pdt_from_seeds(
            &[
                Point::new(-1.0, -1.0),
                Point::new(1.0, -1.0),
                Point::new(0.0, 1.0),
            ],
            Window::centered(4.0),
        )
        .unwrap();
        assert_eq!(sys.segments().len(), 3);
    }

    #[test]
    fn collinear_pdt_is_degenerate() {
        let err = pdt_from_seeds(
            &[
                Point::new(-1.0, 0.0),
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
            ],
            Window::centered(4.0),
        );
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn manhattan_lengths() {
        let sys = generate_manhattan(1.0, Window::new(Point::ORIGIN, 2.0)).unwrap();
        assert_eq!(sys.segments().len(), 6);
        assert!((sys.total_length() - 12.0).abs() < 1e-12);
        let sparse = generate_manhattan(5.0, Window::new(Point::ORIGIN, 2.0)).unwrap();
        assert_eq!(sparse.segments().len(), 2);
        assert!((sparse.total_length() - 4.0).abs() < 1e-12);
        assert!(generate_manhattan(0.0, Window::centered(1.0)).is_err());
    }

    #[test]
    fn random_output_respects_invariants() {
        let mut rng = ReplicaSeed::new(1, 0, 0).stream(Substream::Streets);
        let w = Window::centered(20.0);
        for sys in [
            generate_pvt(0.25, w, &mut rng).unwrap(),
            generate_pdt(0.1, w, &mut rng).unwrap(),
        ] {
            assert!(!sys.segments().is_empty());
            for s in sys.segments() {
                assert!(s.length() > 0.0);
                assert!(w.contains(s.a, 1e-9) && w.contains(s.b, 1e-9));
            }
        }
        assert!(generate_pvt(0.0, w, &mut rng).is_err());
        assert!(generate_pdt(-1.0, w, &mut rng).is_err());
    }
}
