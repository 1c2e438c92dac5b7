//! μ-propagation: each projection column becomes one complex sample
//! `s(t) = Σ_x p(x, t) e^{jμx}`, turning object position into phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projection::ProjectionSignal;

#[derive(Debug, Error, PartialEq)]
pub enum MuError {
    #[error("mu = {0} outside (0, π]")]
    OutOfRange(f64),
}

/// Spatial frequency of the propagation, radians per pixel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Mu(f64);

impl Mu {
    pub fn new(mu: f64) -> Result<Self, MuError> {
        if mu > 0.0 && mu <= PI {
            Ok(Self(mu))
        } else {
            Err(MuError::OutOfRange(mu))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The default sweep grid, 0.10 to 0.30 in steps of 0.05.
    pub fn default_sweep() -> Vec<Mu> {
        [0.10, 0.15, 0.20, 0.25, 0.30].into_iter().map(Mu).collect()
    }
}

impl TryFrom<f64> for Mu {
    type Error = MuError;
    fn try_from(v: f64) -> Result<Self, MuError> {
        Mu::new(v)
    }
}

impl From<Mu> for f64 {
    fn from(m: Mu) -> f64 {
        m.0
    }
}

/// Complex samples on the grid `[0, n_total)`, defined only at `available`.
/// Unavailable positions hold zero, so `values()` is the zero-filled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    values: Vec<Complex64>,
    available: Vec<usize>,
    present: Vec<bool>,
}

impl ComplexSignal {
    pub fn fully_available(values: Vec<Complex64>) -> Self {
        let n = values.len();
        Self {
            values,
            available: (0..n).collect(),
            present: vec![true; n],
        }
    }

    /// Keeps `values` only at `available`; everything else is zeroed.
    pub fn with_mask(mut values: Vec<Complex64>, available: &[usize]) -> Self {
        let n = values.len();
        let mut present = vec![false; n];
        for &t in available {
            present[t] = true;
        }
        for (v, &p) in values.iter_mut().zip(&present) {
            if !p {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        Self {
            values,
            available: (0..n).filter(|&t| present[t]).collect(),
            present,
        }
    }

    pub fn n_total(&self) -> usize {
        self.values.len()
    }

    pub fn available(&self) -> &[usize] {
        &self.available
    }

    pub fn is_available(&self, t: usize) -> bool {
        self.present.get(t).copied().unwrap_or(false)
    }

    pub fn get(&self, t: usize) -> Option<Complex64> {
        self.is_available(t).then(|| self.values[t])
    }

    /// Full-grid values with zeros where samples are missing.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn conj(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.conj()).collect(),
            available: self.available.clone(),
            present: self.present.clone(),
        }
    }
}

/// `Σ_x column[x] e^{jμx}` for one projection column.
pub fn propagate_column(column: &[f64], mu: Mu) -> Complex64 {
    // rounding error of the recurrence grows by ~1e-16 per pixel
    let step = Complex64::from_polar(1.0, mu.0);
    let mut phasor = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &v in column {
        if v != 0.0 {
            acc += phasor * v;
        }
        phasor *= step;
    }
    acc
}

pub fn propagate(proj: &ProjectionSignal, mu: Mu) -> ComplexSignal {
    let mut values = vec![Complex64::new(0.0, 0.0); proj.n_total()];
    for (&t, col) in proj.pair_times().iter().zip(proj.columns()) {
        values[t] = propagate_column(col, mu);
    }
    ComplexSignal::with_mask(values, proj.pair_times())
}
