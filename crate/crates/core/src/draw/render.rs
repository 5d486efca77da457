use serde::{Deserialize, Serialize};

use super::program::{Motor, Program};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurtleState {
    pub x: f64,
    pub y: f64,
    /// Radians, counterclockwise from +x.
    pub heading: f64,
}

impl TurtleState {
    pub const START: TurtleState = TurtleState { x: 0.0, y: 0.0, heading: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line { from: (f64, f64), to: (f64, f64) },
    /// Counterclockwise for positive `sweep` (radians) starting at
    /// `start_angle` as seen from `center`.
    Arc { center: (f64, f64), radius: f64, start_angle: f64, sweep: f64 },
}

impl Segment {
    pub fn start(&self) -> (f64, f64) {
        match *self {
            Segment::Line { from, .. } => from,
            Segment::Arc { center, radius, start_angle, .. } => {
                (center.0 + radius * start_angle.cos(), center.1 + radius * start_angle.sin())
            }
        }
    }

    pub fn end(&self) -> (f64, f64) {
        match *self {
            Segment::Line { to, .. } => to,
            Segment::Arc { center, radius, start_angle, sweep } => {
                let a = start_angle + sweep;
                (center.0 + radius * a.cos(), center.1 + radius * a.sin())
            }
        }
    }

    /// Polyline approximation with chord angle at most `max_step` radians.
    fn points(&self, max_step: f64) -> Vec<(f64, f64)> {
        match *self {
            Segment::Line { from, to } => vec![from, to],
            Segment::Arc { center, radius, start_angle, sweep } => {
                let n = ((sweep.abs() / max_step).ceil() as usize).max(1);
                (0..=n)
                    .map(|k| {
                        let a = start_angle + sweep * k as f64 / n as f64;
                        (center.0 + radius * a.cos(), center.1 + radius * a.sin())
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrokePath {
    pub segments: Vec<Segment>,
}

impl StrokePath {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

fn run(program: &Program, state: &mut TurtleState, out: &mut Vec<Segment>) {
    match program {
        Program::Motor(Motor::Line { length }) => {
            let from = (state.x, state.y);
            state.x += length * state.heading.cos();
            state.y += length * state.heading.sin();
            out.push(Segment::Line { from, to: (state.x, state.y) });
        }
        Program::Motor(Motor::Arc { radius, sweep }) => {
            // Turns left: the center sits to the turtle's left.
            let sweep = sweep.to_radians();
            let h = state.heading;
            let center = (state.x - radius * h.sin(), state.y + radius * h.cos());
            let start_angle = h - std::f64::consts::FRAC_PI_2;
            let seg = Segment::Arc { center, radius: *radius, start_angle, sweep };
            (state.x, state.y) = seg.end();
            state.heading += sweep;
            out.push(seg);
        }
        Program::Motor(Motor::Turn { angle }) => state.heading += angle.to_radians(),
        Program::Concat(a, b) => {
            run(a, state, out);
            run(b, state, out);
        }
        Program::Repeat(n, body) => {
            for _ in 0..*n {
                run(body, state, out);
            }
        }
    }
}

/// Runs the program from `start` and returns the path and the final state.
pub fn interpret_from(program: &Program, start: TurtleState) -> (StrokePath, TurtleState) {
    let mut state = start;
    let mut segments = Vec::new();
    run(program, &mut state, &mut segments);
    (StrokePath { segments }, state)
}

pub fn interpret(program: &Program) -> StrokePath {
    interpret_from(program, TurtleState::START).0
}

/// Scales and centers the path to fill the image minus a 10% margin on each
/// side, preserving aspect ratio, and draws 1-pixel hard strokes.
pub fn rasterize_path(path: &StrokePath, size: usize) -> Raster {
    let mut raster = Raster::zeros(size);
    if path.is_empty() {
        return raster;
    }
    let polylines: Vec<Vec<(f64, f64)>> = path.segments.iter().map(|s| s.points(0.01)).collect();
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in polylines.iter().flatten() {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    let extent = (hi.0 - lo.0).max(hi.1 - lo.1);
    let s = size as f64;
    let scale = if extent > 0.0 { 0.8 * s / extent } else { 1.0 };
    let (cx, cy) = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let to_px = |p: (f64, f64)| (s / 2.0 + (p.0 - cx) * scale, s / 2.0 - (p.1 - cy) * scale);
    for line in &polylines {
        for w in line.windows(2) {
            let (a, b) = (to_px(w[0]), to_px(w[1]));
            raster.draw_segment(a.0, a.1, b.0, b.1);
        }
    }
    raster
}

pub fn mean_grey(raster: &Raster) -> f64 {
    raster.mean()
}
