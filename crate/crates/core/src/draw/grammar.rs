use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::program::{Motor, Program, MAX_REPEAT, MIN_REPEAT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Greek,
    Celtic,
}

impl Style {
    pub const ALL: [Style; 2] = [Style::Greek, Style::Celtic];

    pub fn label(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Style::Greek => "greek",
            Style::Celtic => "celtic",
        }
    }
}

/// Relative weight of each node kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionWeights {
    pub line: f64,
    pub arc: f64,
    pub turn: f64,
    pub concat: f64,
    pub repeat: f64,
}

/// Weighted discrete parameter choices as `(value, weight)` pairs.
pub type Choices = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grammar {
    pub production_weights: ProductionWeights,
    pub line_lengths: Choices,
    pub arc_radii: Choices,
    /// Degrees.
    pub arc_sweeps: Choices,
    /// Degrees.
    pub turn_angles: Choices,
    /// Weights for counts 2..=9, in order.
    pub repeat_counts: Vec<f64>,
    pub depth_cap: usize,
}

fn uniform(values: &[f64]) -> Choices {
    values.iter().map(|v| (*v, 1.0)).collect()
}

fn check_weights(field: &'static str, w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(field, "weights must be finite and nonnegative"));
    }
    if !w.iter().any(|v| *v > 0.0) {
        return Err(Error::invalid(field, "at least one weight must be positive"));
    }
    Ok(())
}

impl Grammar {
    /// Both styles use the same primitives and parameter sets; only the
    /// weights differ.
    pub fn builtin(style: Style) -> Grammar {
        match style {
            Style::Greek => Grammar {
                production_weights: ProductionWeights { line: 0.25, arc: 0.0, turn: 0.2, concat: 0.35, repeat: 0.2 },
                line_lengths: uniform(&[0.5, 1.0, 2.0]),
                arc_radii: uniform(&[0.5, 1.0, 2.0]),
                arc_sweeps: uniform(&[90.0, 180.0, 270.0, 360.0]),
                turn_angles: vec![(45.0, 0.0), (-45.0, 0.0), (90.0, 1.0), (-90.0, 1.0), (135.0, 0.0), (-135.0, 0.0)],
                repeat_counts: vec![1.0; (MAX_REPEAT - MIN_REPEAT + 1) as usize],
                depth_cap: 6,
            },
            Style::Celtic => Grammar {
                production_weights: ProductionWeights { line: 0.02, arc: 0.62, turn: 0.01, concat: 0.25, repeat: 0.1 },
                line_lengths: uniform(&[0.5, 1.0, 2.0]),
                arc_radii: uniform(&[0.5, 1.0, 2.0]),
                arc_sweeps: uniform(&[90.0, 180.0, 270.0, 360.0]),
                turn_angles: uniform(&[45.0, -45.0, 90.0, -90.0, 135.0, -135.0]),
                repeat_counts: vec![1.0; (MAX_REPEAT - MIN_REPEAT + 1) as usize],
                depth_cap: 6,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.production_weights;
        check_weights("production_weights", &[w.line, w.arc, w.turn, w.concat, w.repeat])?;
        check_weights("production_weights (motor)", &[w.line, w.arc, w.turn])?;
        for (field, c) in [
            ("line_lengths", &self.line_lengths),
            ("arc_radii", &self.arc_radii),
            ("arc_sweeps", &self.arc_sweeps),
            ("turn_angles", &self.turn_angles),
        ] {
            if c.iter().any(|(v, _)| !v.is_finite()) {
                return Err(Error::invalid(field, "values must be finite"));
            }
            check_weights(field, &c.iter().map(|(_, w)| *w).collect::<Vec<_>>())?;
        }
        if self.line_lengths.iter().chain(&self.arc_radii).any(|(v, w)| *w > 0.0 && *v <= 0.0) {
            return Err(Error::invalid("line_lengths", "lengths and radii must be positive"));
        }
        if self.repeat_counts.len() != (MAX_REPEAT - MIN_REPEAT + 1) as usize {
            return Err(Error::invalid("repeat_counts", "need one weight per count 2..=9"));
        }
        check_weights("repeat_counts", &self.repeat_counts)?;
        if self.depth_cap == 0 {
            return Err(Error::invalid("depth_cap", "must be at least 1"));
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<GrammarSampler> {
        self.validate()?;
        let w = &self.production_weights;
        let pick = |c: &Choices| -> (Vec<f64>, WeightedIndex<f64>) {
            (c.iter().map(|x| x.0).collect(), WeightedIndex::new(c.iter().map(|x| x.1)).expect("validated"))
        };
        Ok(GrammarSampler {
            any: WeightedIndex::new([w.line, w.arc, w.turn, w.concat, w.repeat]).expect("validated"),
            motor: WeightedIndex::new([w.line, w.arc, w.turn]).expect("validated"),
            lengths: pick(&self.line_lengths),
            radii: pick(&self.arc_radii),
            sweeps: pick(&self.arc_sweeps),
            turns: pick(&self.turn_angles),
            repeats: WeightedIndex::new(&self.repeat_counts).expect("validated"),
            depth_cap: self.depth_cap,
        })
    }
}

/// Precomputed sampling tables for one grammar.
#[derive(Debug, Clone)]
pub struct GrammarSampler {
    any: WeightedIndex<f64>,
    motor: WeightedIndex<f64>,
    lengths: (Vec<f64>, WeightedIndex<f64>),
    radii: (Vec<f64>, WeightedIndex<f64>),
    sweeps: (Vec<f64>, WeightedIndex<f64>),
    turns: (Vec<f64>, WeightedIndex<f64>),
    repeats: WeightedIndex<f64>,
    depth_cap: usize,
}

impl GrammarSampler {
    /// Top-down sampling; at the depth cap only motor primitives are allowed.
    /// Children are drawn left to right after the node's own parameters.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Program {
        self.node(rng, 1)
    }

    fn node<R: Rng + ?Sized>(&self, rng: &mut R, depth: usize) -> Program {
        let kind = if depth >= self.depth_cap { self.motor.sample(rng) } else { self.any.sample(rng) };
        let draw = |(vals, idx): &(Vec<f64>, WeightedIndex<f64>), rng: &mut R| vals[idx.sample(rng)];
        match kind {
            0 => Program::Motor(Motor::Line { length: draw(&self.lengths, rng) }),
            1 => {
                let radius = draw(&self.radii, rng);
                Program::Motor(Motor::Arc { radius, sweep: draw(&self.sweeps, rng) })
            }
            2 => Program::Motor(Motor::Turn { angle: draw(&self.turns, rng) }),
            3 => {
                let a = self.node(rng, depth + 1);
                Program::concat(a, self.node(rng, depth + 1))
            }
            _ => {
                let n = MIN_REPEAT + self.repeats.sample(rng) as u32;
                Program::Repeat(n, Box::new(self.node(rng, depth + 1)))
            }
        }
    }
}

pub fn sample_program<R: Rng + ?Sized>(grammar: &Grammar, rng: &mut R) -> Result<Program> {
    Ok(grammar.sampler()?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn builtins_validate_and_share_inventory() {
        let g = Grammar::builtin(Style::Greek);
        let c = Grammar::builtin(Style::Celtic);
        g.validate().unwrap();
        c.validate().unwrap();
        let values = |ch: &Choices| ch.iter().map(|x| x.0).collect::<Vec<_>>();
        assert_eq!(values(&g.line_lengths), values(&c.line_lengths));
        assert_eq!(values(&g.arc_sweeps), values(&c.arc_sweeps));
        let mut gt = values(&g.turn_angles);
        let mut ct = values(&c.turn_angles);
        gt.sort_by(f64::total_cmp);
        ct.sort_by(f64::total_cmp);
        assert_eq!(gt, ct);
    }

    #[test]
    fn depth_cap_one_gives_a_primitive() {
        let mut g = Grammar::builtin(Style::Celtic);
        g.depth_cap = 1;
        let s = g.sampler().unwrap();
        let mut rng = seeded(3);
        for _ in 0..200 {
            assert!(matches!(s.sample(&mut rng), Program::Motor(_)));
        }
    }

    #[test]
    fn depth_never_exceeds_cap() {
        let s = Grammar::builtin(Style::Greek).sampler().unwrap();
        let mut rng = seeded(4);
        for _ in 0..1000 {
            assert!(s.sample(&mut rng).depth() <= 6);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let mut g = Grammar::builtin(Style::Greek);
        g.production_weights.line = 0.0;
        g.production_weights.turn = 0.0;
        assert!(g.validate().is_err());
        let mut g = Grammar::builtin(Style::Greek);
        g.repeat_counts.pop();
        assert!(g.validate().is_err());
        let mut g = Grammar::builtin(Style::Greek);
        g.line_lengths = vec![(1.0, -1.0)];
        assert!(g.validate().is_err());
    }
}
