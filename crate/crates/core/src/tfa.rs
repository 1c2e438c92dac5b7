//! Short-time Fourier transform, spectrogram, S-method and ridge-based
//! instantaneous frequency extraction.
//!
//! Maps are stored time-major with `np` signed bins per row, bin index `j`
//! standing for frequency `k = j - np/2`, i.e. `ω_k = 2πk/np` rad/sample.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::{ComplexSignal, Mu};
use crate::track::VelocityTrack;

#[derive(Debug, Error, PartialEq)]
pub enum TfaError {
    #[error("window length {0} must be even and at least 4")]
    BadWindowLength(usize),
    #[error("window center {center} outside grid of {n_total}")]
    CenterOutOfRange { center: usize, n_total: usize },
    #[error("S-method half-width L={l} exceeds np/4 = {max}")]
    BadHalfWidth { l: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hanning,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default)]
    pub kind: WindowKind,
    pub np: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            kind: WindowKind::Hanning,
            np: 64,
        }
    }
}

impl WindowSpec {
    pub fn new(kind: WindowKind, np: usize) -> Result<Self, TfaError> {
        let w = Self { kind, np };
        w.validate()?;
        Ok(w)
    }

    pub fn hanning(np: usize) -> Result<Self, TfaError> {
        Self::new(WindowKind::Hanning, np)
    }

    pub fn rectangular(np: usize) -> Result<Self, TfaError> {
        Self::new(WindowKind::Rectangular, np)
    }

    pub fn validate(&self) -> Result<(), TfaError> {
        if self.np < 4 || !self.np.is_multiple_of(2) {
            return Err(TfaError::BadWindowLength(self.np));
        }
        Ok(())
    }

    pub fn half(&self) -> usize {
        self.np / 2
    }

    /// Lag offsets `τ ∈ [-np/2, np/2 - 1]`.
    pub fn lags(&self) -> impl Iterator<Item = isize> {
        let h = self.half() as isize;
        -h..h
    }

    /// Weight at lag `τ`.
    pub fn weight(&self, tau: isize) -> f64 {
        match self.kind {
            WindowKind::Rectangular => 1.0,
            WindowKind::Hanning => {
                let n = (tau + self.half() as isize) as f64;
                0.5 * (1.0 - (2.0 * PI * n / (self.np as f64 - 1.0)).cos())
            }
        }
    }

    /// Weights in lag order, `weights()[i]` belongs to `τ = i - np/2`.
    pub fn weights(&self) -> Vec<f64> {
        self.lags().map(|t| self.weight(t)).collect()
    }

    /// DFT slot of lag `τ` (`τ mod np`).
    pub fn slot(&self, tau: isize) -> usize {
        tau.rem_euclid(self.np as isize) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SMethodParams {
    pub l: usize,
}

impl Default for SMethodParams {
    fn default() -> Self {
        Self { l: 3 }
    }
}

impl SMethodParams {
    pub fn validate(&self, np: usize) -> Result<(), TfaError> {
        if self.l > np / 4 {
            return Err(TfaError::BadHalfWidth {
                l: self.l,
                max: np / 4,
            });
        }
        Ok(())
    }
}

/// Time-frequency map. Rows flagged in `gap` carry no usable spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMap<T> {
    np: usize,
    times: Vec<usize>,
    data: Vec<T>,
    gap: Vec<bool>,
}

impl<T: Copy + Default> TfMap<T> {
    pub fn zeros(np: usize, times: Vec<usize>) -> Self {
        let n = times.len();
        Self {
            np,
            data: vec![T::default(); n * np],
            gap: vec![false; n],
            times,
        }
    }

    pub fn from_rows(np: usize, times: Vec<usize>, data: Vec<T>, gap: Vec<bool>) -> Self {
        assert_eq!(data.len(), times.len() * np);
        assert_eq!(gap.len(), times.len());
        Self { np, times, data, gap }
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn gaps(&self) -> &[bool] {
        &self.gap
    }

    pub fn is_gap(&self, row: usize) -> bool {
        self.gap[row]
    }

    pub fn set_gap(&mut self, row: usize, gap: bool) {
        self.gap[row] = gap;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.np..(i + 1) * self.np]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.np..(i + 1) * self.np]
    }

    /// Signed frequency bin of column `j`.
    pub fn bin(&self, j: usize) -> isize {
        j as isize - (self.np / 2) as isize
    }

    /// Value at row `i`, signed bin `k`.
    pub fn at(&self, i: usize, k: isize) -> T {
        self.row(i)[(k + (self.np / 2) as isize) as usize]
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> TfMap<U> {
        TfMap {
            np: self.np,
            times: self.times.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            gap: self.gap.clone(),
        }
    }
}

impl TfMap<f64> {
    /// CSV matrix, rows = time, columns = signed bins. Gap rows are empty.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let bins: Vec<String> = (0..self.np).map(|j| self.bin(j).to_string()).collect();
        writeln!(w, "t,{}", bins.join(","))?;
        for i in 0..self.n_times() {
            write!(w, "{}", self.times[i])?;
            for &v in self.row(i) {
                if self.gap[i] {
                    write!(w, ",")?;
                } else {
                    write!(w, ",{v:e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Places FFT output (`k` in `[0, np)`) into signed-bin order.
pub(crate) fn fft_to_signed(spectrum: &[Complex64], out: &mut [Complex64]) {
    let np = spectrum.len();
    let h = np / 2;
    for (j, o) in out.iter_mut().enumerate() {
        *o = spectrum[(j + h) % np];
    }
}

/// Windowed sliding DFT of the zero-filled signal. Samples beyond the grid
/// edges are treated as zero.
pub fn stft(
    signal: &ComplexSignal,
    window: &WindowSpec,
    centers: &[usize],
) -> Result<TfMap<Complex64>, TfaError> {
    window.validate()?;
    let n = signal.n_total();
    if let Some(&c) = centers.iter().find(|&&c| c >= n) {
        return Err(TfaError::CenterOutOfRange {
            center: c,
            n_total: n,
        });
    }
    let np = window.np;
    let weights = window.weights();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(np);
    let values = signal.values();

    let mut map = TfMap::zeros(np, centers.to_vec());
    let mut buf = vec![Complex64::new(0.0, 0.0); np];
    for (i, &c) in centers.iter().enumerate() {
        buf.fill(Complex64::new(0.0, 0.0));
        for (tau, &w) in window.lags().zip(&weights) {
            let t = c as isize + tau;
            if t >= 0 && (t as usize) < n {
                buf[window.slot(tau)] = values[t as usize] * w;
            }
        }
        fft.process(&mut buf);
        fft_to_signed(&buf, map.row_mut(i));
    }
    Ok(map)
}

/// Entrywise squared magnitude.
pub fn spectrogram(stft_map: &TfMap<Complex64>) -> TfMap<f64> {
    stft_map.map(|v| v.norm_sqr())
}

/// `SM(t,k) = Σ_{i=-L}^{L} STFT(t,k+i) STFT*(t,k-i)` with Θ of one bin and
/// bins past the band edges taken as zero. The `±i` terms are conjugate
/// pairs, so the sum is real.
pub fn s_method(stft_map: &TfMap<Complex64>, params: &SMethodParams) -> Result<TfMap<f64>, TfaError> {
    let np = stft_map.np();
    params.validate(np)?;
    let l = params.l;
    let mut out = TfMap::<f64>::zeros(np, stft_map.times().to_vec());
    for i in 0..stft_map.n_times() {
        out.set_gap(i, stft_map.is_gap(i));
        let row = stft_map.row(i);
        let dst = out.row_mut(i);
        for j in 0..np {
            let mut acc = row[j].norm_sqr();
            for d in 1..=l {
                if j + d < np && j >= d {
                    acc += 2.0 * (row[j + d] * row[j - d].conj()).re;
                }
            }
            dst[j] = acc;
        }
    }
    Ok(out)
}

/// Bin of the largest value in `row`. Ties go to the smallest `|k|`, then
/// to the negative bin. `None` for an all-zero (or non-finite) row.
pub fn ridge_bin(row: &[f64]) -> Option<isize> {
    let np = row.len();
    let h = (np / 2) as isize;
    let mut best: Option<(isize, f64)> = None;
    let mut consider = |k: isize| {
        let v = row[(k + h) as usize];
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    };
    consider(0);
    for a in 1..=h {
        consider(-a);
        if a < h {
            consider(a);
        }
    }
    let all_zero = row.iter().all(|&v| v == 0.0);
    if all_zero {
        return None;
    }
    best.map(|(k, _)| k)
}

/// Velocity (pixels/frame) of signed bin `k`: `2πk / (np·μ)`.
pub fn bin_to_velocity(k: isize, np: usize, mu: Mu) -> f64 {
    2.0 * PI * k as f64 / (np as f64 * mu.get())
}

/// Width of one frequency bin in pixels/frame.
pub fn bin_width(np: usize, mu: Mu) -> f64 {
    bin_to_velocity(1, np, mu)
}

/// Reads the instantaneous-frequency ridge off a real map and converts it
/// to velocity. Gap rows and all-zero rows become gaps in the track.
pub fn extract_if(map: &TfMap<f64>, mu: Mu) -> VelocityTrack {
    let velocity = (0..map.n_times())
        .map(|i| {
            if map.is_gap(i) {
                return None;
            }
            ridge_bin(map.row(i)).map(|k| bin_to_velocity(k, map.np(), mu))
        })
        .collect();
    VelocityTrack::new(map.times().to_vec(), velocity, mu.get())
}

/// Row peak of `map` over the energy `Σ_k |STFT(t,k)|²` of the matching
/// row of `stft_map`. Comparing distributions built from the same STFT
/// puts them on a common scale. `None` for gaps and zero-energy rows.
pub fn ridge_concentration(map: &TfMap<f64>, stft_map: &TfMap<Complex64>) -> Vec<Option<f64>> {
    assert_eq!(map.times(), stft_map.times(), "maps on different grids");
    (0..map.n_times())
        .map(|i| {
            if map.is_gap(i) || stft_map.is_gap(i) {
                return None;
            }
            let energy: f64 = stft_map.row(i).iter().map(|v| v.norm_sqr()).sum();
            let peak = map.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (energy > 0.0).then(|| peak / energy)
        })
        .collect()
}
