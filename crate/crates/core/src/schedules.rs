//! Harmonic gain and spread sequences.
//!
//! Both sequences are indexed from 1. The step size `s_i = s1 / i` satisfies the
//! classic Robbins-Monro conditions (divergent sum, convergent sum of squares),
//! and the spread `c_i = c0 / i` is the standard deviation of the Gaussian
//! centred on the Robbins-Monro proposal.

use crate::error::{domain, Result};

/// Gain sequence `s_i = s1 / i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    s1: f64,
}

impl StepSchedule {
    pub fn new(s1: f64) -> Result<Self> {
        if !(s1.is_finite() && s1 > 0.0) {
            return domain(format!("initial gain must be positive and finite, got {s1}"));
        }
        Ok(Self { s1 })
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn step_size(&self, i: u64) -> Result<f64> {
        if i == 0 {
            return domain("step index is 1-based; got 0");
        }
        Ok(self.s1 / i as f64)
    }
}

/// Spread sequence `c_i = c0 / i` of the Robbins-Monro distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadSchedule {
    c0: f64,
}

impl SpreadSchedule {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 > 0.0) {
            return domain(format!("initial spread must be positive and finite, got {c0}"));
        }
        Ok(Self { c0 })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn spread(&self, i: u64) -> Result<f64> {
        if i == 0 {
            return domain("spread index is 1-based; got 0");
        }
        Ok(self.c0 / i as f64)
    }
}
