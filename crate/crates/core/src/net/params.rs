use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spec::{NetSpec, ParamBlock};
use crate::error::{check_dims, Result};

/// Flat parameter (or gradient) storage with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<ParamBlock>,
}

impl ParamVector {
    pub fn zeros(spec: &NetSpec) -> Self {
        Self { values: vec![0.0; spec.param_count()], layout: spec.layout() }
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], layout: self.layout.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.iter().find(|b| b.name == name).map(|b| &self.values[b.range()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.iter().find(|b| b.name == name)?.range();
        Some(&mut self.values[range])
    }

    pub fn add_assign(&mut self, other: &ParamVector) -> Result<()> {
        check_dims(self.len(), other.len())?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cheap content hash used to tie forward caches to the parameters that
    /// produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.values.len() as u64;
        for v in &self.values {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// He-uniform weights (`U(-√(6/fan_in), √(6/fan_in))`), zero biases.
pub fn init<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<ParamVector> {
    spec.validate()?;
    let mut p = ParamVector::zeros(spec);
    for b in p.layout.clone() {
        if b.name.ends_with(".bias") {
            continue;
        }
        let fan_in: usize = b.shape[1..].iter().product();
        let limit = (6.0 / fan_in as f64).sqrt();
        for v in &mut p.values[b.range()] {
            *v = rng.random_range(-limit..limit);
        }
    }
    Ok(p)
}
