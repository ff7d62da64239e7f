//! SVG snapshots of street systems, devices and epidemic states.

use std::fmt::Write as _;

use crate::config::VERSION;
use crate::epidemic::{DeviceState, EpidemicTrace, Positions};
use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::points::{DeviceId, PointConfig, Role};
use crate::street::StreetGraph;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;
const LEGEND: f64 = 110.0;

const STREET: &str = "#c0392b";
const SUSCEPTIBLE: &str = "#1f5fbf";
const INFECTED: &str = "#e01010";
const KNIGHT: &str = "#1e8e3e";

fn class(state: DeviceState) -> &'static str {
    match state {
        DeviceState::Susceptible => "susceptible",
        DeviceState::Infected => "infected",
        DeviceState::Patched => "patched",
        DeviceState::Knight => "knight",
    }
}

fn style(state: DeviceState) -> (&'static str, &'static str) {
    match state {
        DeviceState::Susceptible => (SUSCEPTIBLE, SUSCEPTIBLE),
        DeviceState::Infected => (INFECTED, "#000000"),
        DeviceState::Patched => (KNIGHT, INFECTED),
        DeviceState::Knight => (KNIGHT, KNIGHT),
    }
}

/// Largest 1, 2 or 5 times a power of ten not above `x`.
fn nice_length(x: f64) -> f64 {
    let p = 10f64.powf(x.log10().floor());
    [5.0, 2.0, 1.0]
        .into_iter()
        .map(|m| m * p)
        .find(|&v| v <= x)
        .unwrap_or(p)
}

struct Canvas {
    window: Window,
    scale: f64,
}

impl Canvas {
    fn map(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.window.min.x) * self.scale,
            MARGIN + (self.window.max().y - p.y) * self.scale,
        )
    }
}

/// Draw `devices` (id, position, state) on the streets of `g`.
pub fn svg(g: &StreetGraph, devices: &[(DeviceId, Point, DeviceState)], caption: &str) -> String {
    let window = g.window();
    let canvas = Canvas {
        window,
        scale: SIZE / window.side,
    };
    let width = SIZE + 2.0 * MARGIN;
    let height = SIZE + 2.0 * MARGIN + LEGEND;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    )
    .unwrap();
    writeln!(out, "<!-- chase-escape {VERSION} {caption} -->").unwrap();
    writeln!(
        out,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>"
    )
    .unwrap();
    writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"#999999\"/>"
    )
    .unwrap();
    writeln!(
        out,
        "<g class=\"streets\" stroke=\"{STREET}\" stroke-width=\"1.5\">"
    )
    .unwrap();
    for s in g.streets() {
        let (x0, y0) = canvas.map(s.start);
        let (x1, y1) = canvas.map(s.end);
        writeln!(
            out,
            "<line x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x1:.3}\" y2=\"{y1:.3}\"/>"
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "<g class=\"devices\">").unwrap();
    let radius = (0.15 * canvas.scale).clamp(2.0, 6.0);
    for &(id, p, state) in devices {
        let (x, y) = canvas.map(p);
        let (fill, stroke) = style(state);
        writeln!(
            out,
            "<circle class=\"{}\" data-id=\"{id}\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{radius:.2}\" fill=\"{fill}\" stroke=\"{stroke}\"/>",
            class(state)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    let top = SIZE + 2.0 * MARGIN + 10.0;
    writeln!(
        out,
        "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"14\">"
    )
    .unwrap();
    writeln!(
        out,
        "<line x1=\"{MARGIN}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{STREET}\" stroke-width=\"2\"/>",
        top + 8.0,
        MARGIN + 24.0,
        top + 8.0
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\">street</text>",
        MARGIN + 32.0,
        top + 13.0
    )
    .unwrap();
    let entries = [
        (DeviceState::Susceptible, "susceptible"),
        (DeviceState::Infected, "infected"),
        (DeviceState::Knight, "white knight"),
        (DeviceState::Patched, "patched"),
    ];
    for (k, (state, label)) in entries.into_iter().enumerate() {
        let x = MARGIN + 130.0 * (k + 1) as f64;
        let (fill, stroke) = style(state);
        writeln!(
            out,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"6\" fill=\"{fill}\" stroke=\"{stroke}\"/>",
            x + 6.0,
            top + 8.0
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{label}</text>",
            x + 18.0,
            top + 13.0
        )
        .unwrap();
    }
    let bar = nice_length(window.side / 5.0);
    let y = top + 50.0;
    writeln!(
        out,
        "<line class=\"scale-bar\" x1=\"{MARGIN}\" y1=\"{y:.1}\" x2=\"{:.3}\" y2=\"{y:.1}\" stroke=\"#000000\" stroke-width=\"3\"/>",
        MARGIN + bar * canvas.scale
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"{:.1}\">{bar}</text>",
        y + 20.0
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\">{caption}</text>",
        MARGIN + 200.0,
        y + 20.0
    )
    .unwrap();
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    out
}

/// Initial configuration: the root (if any) is drawn infected.
pub fn render_points(g: &StreetGraph, config: &PointConfig, caption: &str) -> String {
    let devices: Vec<_> = config
        .devices
        .iter()
        .map(|d| {
            let state = match d.role {
                Role::Knight => DeviceState::Knight,
                Role::Susceptible if config.root == Some(d.id) => DeviceState::Infected,
                Role::Susceptible => DeviceState::Susceptible,
            };
            (d.id, g.position(d.position), state)
        })
        .collect();
    svg(g, &devices, caption)
}

/// States of the trace at time `t` with positions at `t`.
pub fn render_trace(
    g: &StreetGraph,
    trace: &EpidemicTrace,
    positions: &dyn Positions,
    t: f64,
    t_sim: f64,
    caption: &str,
) -> Result<String> {
    if !(0.0..=t_sim).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: t_sim });
    }
    let devices: Vec<_> = (0..trace.len() as DeviceId)
        .map(|i| (i, positions.position(i, t), trace.state_at(i, t)))
        .collect();
    Ok(svg(g, &devices, &format!("{caption} t={t}")))
}
