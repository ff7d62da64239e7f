use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersect_segments, BoxGrid, Point, SegmentIntersection, Window, TOLERANCE};

/// How a segment system was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorTag {
    Pvt,
    Pdt,
    Manhattan,
    Fixture,
}

impl fmt::Display for GeneratorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorTag::Pvt => "pvt",
            GeneratorTag::Pdt => "pdt",
            GeneratorTag::Manhattan => "manhattan",
            GeneratorTag::Fixture => "fixture",
        })
    }
}

impl FromStr for GeneratorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pvt" => Ok(GeneratorTag::Pvt),
            "pdt" => Ok(GeneratorTag::Pdt),
            "manhattan" => Ok(GeneratorTag::Manhattan),
            "fixture" => Ok(GeneratorTag::Fixture),
            other => Err(Error::Parse(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub(crate) fn bbox(&self) -> (Point, Point) {
        (
            Point::new(self.a.x.min(self.b.x), self.a.y.min(self.b.y)),
            Point::new(self.a.x.max(self.b.x), self.a.y.max(self.b.y)),
        )
    }
}

/// Provenance recorded alongside a realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemMeta {
    pub generator: GeneratorTag,
    /// Seed intensity for tessellations, grid spacing for Manhattan.
    pub intensity: f64,
    pub seed: Option<u64>,
    /// Width of the discarded generation margin around the window.
    pub buffer: f64,
}

impl SystemMeta {
    pub fn fixture() -> Self {
        SystemMeta {
            generator: GeneratorTag::Fixture,
            intensity: 0.0,
            seed: None,
            buffer: 0.0,
        }
    }
}

/// A finite realization of the planar segment process inside a window.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSystem {
    segments: Vec<Segment>,
    window: Window,
    meta: SystemMeta,
}

impl SegmentSystem {
    /// Validates positivity of lengths, containment in the buffered window
    /// and absence of collinear overlaps.
    pub fn new(segments: Vec<Segment>, window: Window, meta: SystemMeta) -> Result<Self> {
        if !(window.side > 0.0) {
            return Err(Error::invalid("window", "side must be positive"));
        }
        let outer = window.inflate(meta.buffer);
        let tol = TOLERANCE * window.side.max(1.0);
        for (i, s) in segments.iter().enumerate() {
            if !(s.length() > TOLERANCE) {
                return Err(Error::Degenerate(format!("segment {i} has zero length")));
            }
            if !outer.contains(s.a, tol) || !outer.contains(s.b, tol) {
                return Err(Error::Degenerate(format!("segment {i} leaves the window")));
            }
        }
        if let Some((i, j)) = find_overlap(&segments) {
            return Err(Error::Degenerate(format!(
                "segments {i} and {j} overlap along a sub-segment"
            )));
        }
        Ok(SegmentSystem {
            segments,
            window,
            meta,
        })
    }

    /// Hand-built system for tests and examples.
    pub fn fixture(segments: Vec<Segment>, window: Window) -> Result<Self> {
        Self::new(segments, window, SystemMeta::fixture())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn meta(&self) -> &SystemMeta {
        &self.meta
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Total length inside `w`.
    pub fn length_in(&self, w: &Window) -> f64 {
        self.segments
            .iter()
            .filter_map(|s| w.clip_segment(s.a, s.b))
            .map(|(a, b)| a.distance(b))
            .sum()
    }

    /// Line-oriented text: one header line, then `x1 y1 x2 y2` per segment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# window_min_x={:.16e} window_min_y={:.16e} window_side={:.16e} generator={} gamma={:.16e} seed={} buffer={:.16e}",
            self.window.min.x,
            self.window.min.y,
            self.window.side,
            self.meta.generator,
            self.meta.intensity,
            self.meta.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            self.meta.buffer,
        );
        for s in &self.segments {
            let _ = writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e}",
                s.a.x, s.a.y, s.b.x, s.b.y
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty segment file".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing header line".into()))?;
        let mut min_x = None;
        let mut min_y = None;
        let mut side = None;
        let mut meta = SystemMeta::fixture();
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field `{field}`")))?;
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{key}: {e}")))
            };
            match key {
                "window_min_x" => min_x = Some(num()?),
                "window_min_y" => min_y = Some(num()?),
                "window_side" => side = Some(num()?),
                "generator" => meta.generator = value.parse()?,
                "gamma" => meta.intensity = num()?,
                "buffer" => meta.buffer = num()?,
                "seed" => {
                    meta.seed = match value {
                        "none" => None,
                        v => Some(v.parse().map_err(|e| Error::Parse(format!("seed: {e}")))?),
                    }
                }
                other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
            }
        }
        let (Some(x), Some(y), Some(side)) = (min_x, min_y, side) else {
            return Err(Error::Parse("header lacks the window".into()));
        };
        let mut segments = Vec::new();
        for (n, line) in lines.filter(|l| !l.starts_with('#')).enumerate() {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("segment line {}: {e}", n + 1)))?;
            if v.len() != 4 {
                return Err(Error::Parse(format!(
                    "segment line {} has {} fields",
                    n + 1,
                    v.len()
                )));
            }
            segments.push(Segment::new(Point::new(v[0], v[1]), Point::new(v[2], v[3])));
        }
        SegmentSystem::new(segments, Window::new(Point::new(x, y), side), meta)
    }
}

fn mean_length(segments: &[Segment]) -> f64 {
    if segments.is_empty() {
        return 1.0;
    }
    segments.iter().map(Segment::length).sum::<f64>() / segments.len() as f64
}

pub(crate) fn segment_grid(segments: &[Segment]) -> BoxGrid {
    let boxes: Vec<_> = segments.iter().map(Segment::bbox).collect();
    BoxGrid::new(&boxes, mean_length(segments))
}

fn find_overlap(segments: &[Segment]) -> Option<(usize, usize)> {
    let grid = segment_grid(segments);
    grid.candidate_pairs().into_iter().find_map(|(i, j)| {
        let (s, t) = (&segments[i as usize], &segments[j as usize]);
        (intersect_segments(s.a, s.b, t.a, t.b) == SegmentIntersection::Overlap)
            .then_some((i as usize, j as usize))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Segment {
        Segment::new(Point::new(x1, y1), Point::new(x2, y2))
    }

    #[test]
    fn rejects_zero_length_and_overlap() {
        let w = Window::centered(10.0);
        assert!(SegmentSystem::fixture(vec![seg(0.0, 0.0, 0.0, 0.0)], w).is_err());
        assert!(
            SegmentSystem::fixture(vec![seg(0.0, 0.0, 2.0, 0.0), seg(1.0, 0.0, 3.0, 0.0)], w)
                .is_err()
        );
        assert!(SegmentSystem::fixture(vec![seg(0.0, 0.0, 20.0, 0.0)], w).is_err());
        assert!(
            SegmentSystem::fixture(vec![seg(0.0, 0.0, 2.0, 0.0), seg(2.0, 0.0, 3.0, 0.0)], w)
                .is_ok()
        );
    }

    #[test]
    fn text_round_trip_is_exact() {
        let w = Window::centered(10.0);
        let sys = SegmentSystem::new(
            vec![
                seg(0.1, 0.2, 1.0 / 3.0, 2.0_f64.sqrt()),
                seg(-4.0, -4.0, 4.0, 4.5),
            ],
            w,
            SystemMeta {
                generator: GeneratorTag::Pvt,
                intensity: 0.25,
                seed: Some(42),
                buffer: 6.0,
            },
        )
        .unwrap();
        let back = SegmentSystem::from_text(&sys.to_text()).unwrap();
        assert_eq!(sys, back);
    }
}
