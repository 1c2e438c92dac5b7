//! Sparse recovery of short-time spectra from windows with missing samples.
//!
//! For a window centred at `t`, the available lags give measurements
//! `m_r = w(τ_r) s(t + τ_r)`. The full windowed segment `d` relates to its
//! DFT `F` (no scaling) through the inverse DFT, so
//! `m = Θ F` with `Θ(r, k) = e^{j2πk·slot(τ_r)/np} / np`, the rows of the
//! inverse DFT picked out by the available lags. `F` is then recovered as a
//! sparse vector, either by ℓ1 minimisation or greedily.

use std::f64::consts::PI;

use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::propagation::ComplexSignal;
use crate::tfa::{fft_to_signed, TfMap, TfaError, WindowSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no measurements in window")]
    NoMeasurements,
    #[error("measurement vector has {got} entries, model has {want} rows")]
    DimensionMismatch { got: usize, want: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        best: Box<SparseSolution>,
        residual: f64,
        iterations: usize,
    },
    #[error("singular system in least-squares step")]
    Singular,
    #[error("two measurements share DFT slot {0}")]
    RepeatedSlot(usize),
}

/// Samples of one window that were actually observed, already weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub center: usize,
    /// Lags `τ` in `[-np/2, np/2 - 1]`, ascending.
    pub local_indices: Vec<isize>,
    pub values: Vec<Complex64>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn form_measurements(signal: &ComplexSignal, window: &WindowSpec, center: usize) -> MeasurementSet {
    let mut local_indices = Vec::new();
    let mut values = Vec::new();
    for tau in window.lags() {
        let t = center as isize + tau;
        if t < 0 {
            continue;
        }
        if let Some(v) = signal.get(t as usize) {
            local_indices.push(tau);
            values.push(v * window.weight(tau));
        }
    }
    MeasurementSet {
        center,
        local_indices,
        values,
    }
}

/// `Θ = Φ Ψ`: row selection applied to the inverse DFT.
#[derive(Debug, Clone)]
pub struct SensingModel {
    np: usize,
    slots: Vec<usize>,
    theta: DMatrix<Complex64>,
}

impl SensingModel {
    pub fn np(&self) -> usize {
        self.np
    }

    pub fn rows(&self) -> usize {
        self.slots.len()
    }

    /// DFT slot (`τ mod np`) of each measurement row.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn theta(&self) -> &DMatrix<Complex64> {
        &self.theta
    }

    /// `Φ`: one 1 per row, in the column of that row's slot.
    pub fn selection(&self) -> DMatrix<f64> {
        let mut phi = DMatrix::zeros(self.rows(), self.np);
        for (r, &s) in self.slots.iter().enumerate() {
            phi[(r, s)] = 1.0;
        }
        phi
    }

    /// `Ψ`: inverse DFT synthesis, `Ψ(n, k) = e^{j2πkn/np} / np`.
    pub fn basis(&self) -> DMatrix<Complex64> {
        inverse_dft_rows(&(0..self.np).collect::<Vec<_>>(), self.np)
    }

    pub fn apply(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        (&self.theta * DVector::from_column_slice(coeffs))
            .iter()
            .copied()
            .collect()
    }

    pub fn residual_norm(&self, coeffs: &[Complex64], m: &[Complex64]) -> f64 {
        self.apply(coeffs)
            .iter()
            .zip(m)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn inverse_dft_rows(slots: &[usize], np: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / np as f64;
    DMatrix::from_fn(slots.len(), np, |r, k| {
        // reduce the product first so the angle stays small
        let p = (k * slots[r]) % np;
        Complex64::from_polar(scale, 2.0 * PI * p as f64 / np as f64)
    })
}

pub fn build_model(ms: &MeasurementSet, np: usize) -> Result<SensingModel, SolveError> {
    if ms.is_empty() {
        return Err(SolveError::NoMeasurements);
    }
    let slots: Vec<usize> = ms
        .local_indices
        .iter()
        .map(|&tau| tau.rem_euclid(np as isize) as usize)
        .collect();
    let mut seen = vec![false; np];
    for &s in &slots {
        if std::mem::replace(&mut seen[s], true) {
            return Err(SolveError::RepeatedSlot(s));
        }
    }
    Ok(SensingModel {
        np,
        theta: inverse_dft_rows(&slots, np),
        slots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BasisPursuit,
    Omp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Residual bound relative to `‖m‖₂`.
    pub residual_tol: f64,
    /// OMP atom budget.
    pub max_sparsity: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Omp,
            residual_tol: 1e-6,
            max_sparsity: 4,
            max_iterations: 500,
        }
    }
}

impl SolverConfig {
    pub fn basis_pursuit() -> Self {
        Self {
            algorithm: Algorithm::BasisPursuit,
            ..Self::default()
        }
    }

    pub fn omp(max_sparsity: usize) -> Self {
        Self {
            algorithm: Algorithm::Omp,
            max_sparsity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.residual_tol > 0.0 && self.residual_tol.is_finite()) {
            return Err(SolveError::InvalidConfig("residual_tol must be positive".into()));
        }
        if self.max_sparsity == 0 {
            return Err(SolveError::InvalidConfig(
                "max_sparsity must be at least 1".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Recovered spectrum in FFT order (`k ∈ [0, np)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub coeffs: Vec<Complex64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual bound met. OMP may stop on its atom budget first.
    pub converged: bool,
    /// OMP residual after each atom (empty for basis pursuit).
    pub residual_history: Vec<f64>,
}

impl SparseSolution {
    pub fn support(&self, rel_threshold: f64) -> Vec<usize> {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| peak > 0.0 && c.norm() > rel_threshold * peak)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn scatter(np: usize, support: &[usize], values: impl IntoIterator<Item = Complex64>) -> Vec<Complex64> {
    let mut coeffs = vec![ZERO; np];
    for (&k, v) in support.iter().zip(values) {
        coeffs[k] = v;
    }
    coeffs
}

/// Least squares on a subset of columns of `theta`.
fn lstsq(
    theta: &DMatrix<Complex64>,
    cols: &[usize],
    m: &DVector<Complex64>,
) -> Result<DVector<Complex64>, SolveError> {
    let a = theta.select_columns(cols);
    a.svd(true, true)
        .solve(m, 1e-12)
        .map_err(|_| SolveError::Singular)
}

/// Solves `min ‖F‖₁` subject to `‖ΘF − m‖₂ ≤ tol·‖m‖₂` (basis pursuit) or
/// the greedy OMP approximation of it.
pub fn solve_sparse(
    model: &SensingModel,
    m: &[Complex64],
    cfg: &SolverConfig,
) -> Result<SparseSolution, SolveError> {
    cfg.validate()?;
    if model.rows() == 0 {
        return Err(SolveError::NoMeasurements);
    }
    if m.len() != model.rows() {
        return Err(SolveError::DimensionMismatch {
            got: m.len(),
            want: model.rows(),
        });
    }
    let np = model.np;
    let m_norm = norm2(m);
    if m_norm == 0.0 {
        return Ok(SparseSolution {
            coeffs: vec![ZERO; np],
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
            residual_history: Vec::new(),
        });
    }
    let tol = cfg.residual_tol * m_norm;

    let mut sol = if model.rows() == np {
        // square and invertible: the constraint pins F down completely
        exact_inverse(model, m)
    } else {
        match cfg.algorithm {
            Algorithm::Omp => omp(model, m, cfg, tol)?,
            Algorithm::BasisPursuit => smoothed_l1_basis_pursuit(model, m, cfg, tol)?,
        }
    };

    sol.residual_norm = model.residual_norm(&sol.coeffs, m);
    let feasible = sol.residual_norm <= tol;
    match cfg.algorithm {
        Algorithm::Omp => {
            sol.converged = feasible;
            Ok(sol)
        }
        Algorithm::BasisPursuit if feasible && sol.converged => Ok(sol),
        Algorithm::BasisPursuit => {
            let residual = sol.residual_norm;
            let iterations = sol.iterations;
            Err(SolveError::NotConverged {
                best: Box::new(sol),
                residual,
                iterations,
            })
        }
    }
}

fn exact_inverse(model: &SensingModel, m: &[Complex64]) -> SparseSolution {
    let np = model.np;
    let mut d = vec![ZERO; np];
    for (&s, &v) in model.slots.iter().zip(m) {
        d[s] = v;
    }
    FftPlanner::<f64>::new().plan_fft_forward(np).process(&mut d);
    SparseSolution {
        coeffs: d,
        residual_norm: 0.0,
        iterations: 1,
        converged: true,
        residual_history: Vec::new(),
    }
}

fn omp(
    model: &SensingModel,
    m: &[Complex64],
    cfg: &SolverConfig,
    tol: f64,
) -> Result<SparseSolution, SolveError> {
    let theta = &model.theta;
    let np = model.np;
    let mv = DVector::from_column_slice(m);
    let budget = cfg.max_sparsity.min(model.rows()).min(cfg.max_iterations);

    let mut active: Vec<usize> = Vec::new();
    let mut coef = DVector::<Complex64>::zeros(0);
    let mut residual = mv.clone();
    let mut history = vec![residual.norm()];

    while active.len() < budget && residual.norm() > tol {
        let corr = theta.ad_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in corr.iter().enumerate() {
            if active.contains(&k) {
                continue;
            }
            let v = c.norm();
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        let Some((k, v)) = best else { break };
        if v <= 1e-14 * history[0] {
            break;
        }
        active.push(k);
        coef = lstsq(theta, &active, &mv)?;
        residual = &mv - theta.select_columns(&active) * &coef;
        history.push(residual.norm());
    }

    let mut coeffs = vec![ZERO; np];
    for (&k, &c) in active.iter().zip(coef.iter()) {
        coeffs[k] = c;
    }
    Ok(SparseSolution {
        coeffs,
        residual_norm: *history.last().unwrap(),
        iterations: active.len(),
        converged: false,
        residual_history: history,
    })
}

/// Basis pursuit by path-following on the smoothed objective
/// `Σ_k sqrt(|F_k|² + ε²)`.
///
/// The rows of `Θ` are distinct rows of the inverse DFT, so `ΘF = m` says
/// exactly that the window segment `d = IDFT(F)` equals `m` at the observed
/// slots. The feasible set is therefore `F = DFT(d)` with the unobserved
/// samples of `d` free, and the problem becomes unconstrained in those
/// samples. Each ε level is minimised by damped Newton (the reduced Hessian
/// is positive definite), warm-started from the previous level, with ε
/// shrinking from the scale of the zero-filled solution down to `1e-12` of
/// it. A support with no more entries than measurements is then refitted
/// exactly by least squares.
fn smoothed_l1_basis_pursuit(
    model: &SensingModel,
    m: &[Complex64],
    cfg: &SolverConfig,
    tol: f64,
) -> Result<SparseSolution, SolveError> {
    let np = model.np;
    let rows = model.rows();
    let mut observed = vec![false; np];
    let mut d = vec![ZERO; np];
    for (&s, &v) in model.slots.iter().zip(m) {
        observed[s] = true;
        d[s] = v;
    }
    FftPlanner::<f64>::new().plan_fft_forward(np).process(&mut d);
    let f0 = DVector::from_iterator(2 * np, d.iter().map(|c| c.re).chain(d.iter().map(|c| c.im)));
    let free: Vec<usize> = (0..np).filter(|&s| !observed[s]).collect();

    // real coordinates: F = f0 + Z y, y = [Re d_free; Im d_free]
    let q = free.len();
    let mut z = DMatrix::<f64>::zeros(2 * np, 2 * q);
    for (j, &s) in free.iter().enumerate() {
        for k in 0..np {
            let (sin, cos) = (-2.0 * PI * ((k * s) % np) as f64 / np as f64).sin_cos();
            z[(k, j)] = cos;
            z[(np + k, j)] = sin;
            z[(k, q + j)] = -sin;
            z[(np + k, q + j)] = cos;
        }
    }
    let zt = z.transpose();
    let scale = d.iter().map(|c| c.norm()).fold(0.0, f64::max);

    let mut y = DVector::zeros(2 * q);
    let mut iterations = 0;
    let mut converged = false;
    let mut eps = scale;
    'levels: loop {
        loop {
            if iterations >= cfg.max_iterations {
                break 'levels;
            }
            iterations += 1;
            match newton_step(&f0, &z, &zt, &mut y, np, eps)? {
                Some(decrement) if decrement > NEWTON_TOL * scale => {}
                _ => break,
            }
        }
        if eps <= EPS_FLOOR * scale {
            converged = true;
            break;
        }
        eps = (eps * 0.01).max(EPS_FLOOR * scale);
    }
    debug!("basis pursuit: {iterations} newton steps, converged={converged}");

    let x = &f0 + &z * &y;
    let coeffs: Vec<Complex64> = (0..np).map(|k| Complex64::new(x[k], x[np + k])).collect();
    let mut sol = SparseSolution {
        residual_norm: model.residual_norm(&coeffs, m),
        coeffs,
        iterations,
        converged,
        residual_history: Vec::new(),
    };

    let support = sol.support(1e-8);
    if !support.is_empty() && support.len() <= rows {
        let mv = DVector::from_column_slice(m);
        if let Ok(c) = lstsq(&model.theta, &support, &mv) {
            let coeffs = scatter(np, &support, c.iter().copied());
            let polished = SparseSolution {
                residual_norm: model.residual_norm(&coeffs, m),
                coeffs,
                ..sol.clone()
            };
            if polished.residual_norm <= tol && polished.l1_norm() <= sol.l1_norm() * (1.0 + 1e-9) {
                sol = polished;
            }
        }
    }
    Ok(sol)
}

/// Smallest smoothing level, relative to the solution scale.
const EPS_FLOOR: f64 = 1e-12;
/// Newton decrement (relative) at which a smoothing level counts as solved.
const NEWTON_TOL: f64 = 1e-13;

/// One damped Newton step on `Σ_k sqrt(|F_k|² + ε²)` with `F = f0 + Z y`,
/// stored as `[Re F; Im F]`; `zt` is `Zᵀ`. Returns the Newton decrement before the step,
/// or `None` once the step is negligible.
fn newton_step(
    f0: &DVector<f64>,
    z: &DMatrix<f64>,
    zt: &DMatrix<f64>,
    y: &mut DVector<f64>,
    np: usize,
    eps: f64,
) -> Result<Option<f64>, SolveError> {
    let eps2 = eps * eps;
    let objective = |y: &DVector<f64>| {
        let x = f0 + z * y;
        (0..np)
            .map(|k| (x[k] * x[k] + x[np + k] * x[np + k] + eps2).sqrt())
            .sum::<f64>()
    };

    let x = f0 + z * &*y;
    let mut grad_x = DVector::zeros(2 * np);
    // H Z, with H block diagonal in (Re F_k, Im F_k)
    let mut hz = DMatrix::<f64>::zeros(2 * np, z.ncols());
    for k in 0..np {
        let (u, v) = (x[k], x[np + k]);
        let s2 = u * u + v * v + eps2;
        let s = s2.sqrt();
        let s3 = s2 * s;
        grad_x[k] = u / s;
        grad_x[np + k] = v / s;
        let (huu, hvv, huv) = ((s2 - u * u) / s3, (s2 - v * v) / s3, -u * v / s3);
        for j in 0..z.ncols() {
            let (zu, zv) = (z[(k, j)], z[(np + k, j)]);
            hz[(k, j)] = huu * zu + huv * zv;
            hz[(np + k, j)] = huv * zu + hvv * zv;
        }
    }
    let grad = zt * grad_x;
    let hess = zt * hz;
    let dy = match hess.cholesky() {
        Some(ch) => -ch.solve(&grad),
        None => return Err(SolveError::Singular),
    };

    let decrement = -grad.dot(&dy);
    if !decrement.is_finite() {
        return Err(SolveError::Singular);
    }
    let f_start = objective(y);
    let mut t = 1.0;
    while objective(&(&*y + &dy * t)) > f_start - 0.25 * t * decrement.max(0.0) && t > 1e-10 {
        t *= 0.5;
    }
    let step_norm = t * dy.norm();
    *y += dy * t;
    Ok((step_norm > 1e-15 * (y.norm() + f0.norm())).then_some(decrement.abs()))
}

/// Reconstructed short-time spectrum plus bookkeeping.
#[derive(Debug, Clone)]
pub struct CsStft {
    pub map: TfMap<Complex64>,
    /// Windows whose solve failed (recorded as gaps).
    pub failures: usize,
    /// Windows with fewer than `np/4` samples (recorded as gaps).
    pub sparse_windows: usize,
}

/// Minimum samples per window for a reconstruction to be attempted.
pub fn min_measurements(np: usize) -> usize {
    np / 4
}

enum Column {
    Spectrum(Vec<Complex64>),
    TooFew,
    Failed,
}

fn reconstruct_column(
    signal: &ComplexSignal,
    window: &WindowSpec,
    cfg: &SolverConfig,
    center: usize,
) -> Column {
    let ms = form_measurements(signal, window, center);
    if ms.is_empty() || ms.len() < min_measurements(window.np) {
        return Column::TooFew;
    }
    let solved = build_model(&ms, window.np).and_then(|model| solve_sparse(&model, &ms.values, cfg));
    match solved {
        Ok(sol) => {
            let mut row = vec![ZERO; window.np];
            fft_to_signed(&sol.coeffs, &mut row);
            Column::Spectrum(row)
        }
        Err(e) => {
            debug!("window at {center}: {e}");
            Column::Failed
        }
    }
}

/// STFT whose every column is recovered from the window's available samples.
pub fn cs_stft(
    signal: &ComplexSignal,
    window: &WindowSpec,
    cfg: &SolverConfig,
    centers: &[usize],
) -> Result<CsStft, TfaError> {
    window.validate()?;
    let n = signal.n_total();
    if let Some(&c) = centers.iter().find(|&&c| c >= n) {
        return Err(TfaError::CenterOutOfRange {
            center: c,
            n_total: n,
        });
    }

    #[cfg(feature = "parallel")]
    let columns: Vec<Column> = centers
        .par_iter()
        .map(|&c| reconstruct_column(signal, window, cfg, c))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<Column> = centers
        .iter()
        .map(|&c| reconstruct_column(signal, window, cfg, c))
        .collect();

    let mut map = TfMap::zeros(window.np, centers.to_vec());
    let (mut failures, mut sparse_windows) = (0, 0);
    for (i, col) in columns.into_iter().enumerate() {
        match col {
            Column::Spectrum(row) => map.row_mut(i).copy_from_slice(&row),
            Column::TooFew => {
                sparse_windows += 1;
                map.set_gap(i, true);
            }
            Column::Failed => {
                failures += 1;
                map.set_gap(i, true);
            }
        }
    }
    if failures > 0 {
        log::warn!("{failures} of {} windows failed to reconstruct", centers.len());
    }
    Ok(CsStft {
        map,
        failures,
        sparse_windows,
    })
}
