//! Browser bindings for the velocity estimator.
//!
//! Every exported function takes and returns JSON strings so the page needs no
//! generated TypeScript types. The same functions are plain Rust underneath
//! and are tested natively.

use csvel::ingest::{GroundTruth, MaskSpec, SyntheticSceneSpec, VelocityProfile};
use csvel::pipeline::{run_pipeline, MuSetting, PipelineConfig, PipelineOutput};
use csvel::propagation::Mu;
use csvel::recon::{Algorithm, SolverConfig};
use csvel::tfa::{bin_to_velocity, SMethodParams, WindowSpec};
use csvel::track::Method;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const MARGIN: f64 = 8.0;
const OBJECT: (usize, usize) = (12, 10);
const HEIGHT: usize = 32;

/// Knobs exposed on the page. Missing fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub n_frames: usize,
    pub vx_start: f64,
    pub vx_end: f64,
    pub keep_ratio: f64,
    pub seed: u64,
    pub np: usize,
    pub mu: f64,
    pub sm_l: usize,
    pub noise_sigma: f64,
    pub solver: Algorithm,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            n_frames: 121,
            vx_start: 1.0,
            vx_end: 4.0,
            keep_ratio: 0.545,
            seed: 0,
            np: 64,
            mu: 0.25,
            sm_l: 3,
            noise_sigma: 0.0,
            solver: Algorithm::Omp,
        }
    }
}

impl DemoParams {
    fn profile(&self) -> VelocityProfile {
        if self.vx_start == self.vx_end {
            VelocityProfile::Constant { vx: self.vx_start }
        } else {
            VelocityProfile::LinearAccel {
                vx_start: self.vx_start,
                vx_end: self.vx_end,
            }
        }
    }

    /// A scene just wide enough for the whole trajectory.
    pub fn scene(&self) -> SyntheticSceneSpec {
        let profile = self.profile();
        let n = self.n_frames;
        let (lo, hi) = (0..n)
            .map(|t| profile.displacement(t, n))
            .fold((0.0f64, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let x0 = (MARGIN - lo.floor()).max(0.0) as usize;
        let width = x0 + hi.ceil().max(0.0) as usize + OBJECT.0 + MARGIN as usize;
        SyntheticSceneSpec {
            width,
            height: HEIGHT,
            n_frames: n,
            object_size: OBJECT,
            initial_position: (x0, (HEIGHT - OBJECT.1) / 2),
            velocity_profile: profile,
            object_intensity: 0.8,
            background_intensity: 0.2,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    fn config(&self, mus: Vec<f64>, methods: Vec<Method>) -> Result<PipelineConfig, String> {
        if !(self.vx_start.is_finite() && self.vx_end.is_finite())
            || self.vx_start.abs().max(self.vx_end.abs()) > 20.0
        {
            return Err("velocities must lie in [-20, 20]".into());
        }
        if self.n_frames > 1024 {
            return Err("at most 1024 frames".into());
        }
        let mut cfg = PipelineConfig::synthetic(self.scene());
        cfg.mask = if self.keep_ratio >= 1.0 {
            MaskSpec::Full
        } else {
            MaskSpec::Random {
                keep_ratio: self.keep_ratio,
                seed: self.seed,
            }
        };
        cfg.window = WindowSpec::hanning(self.np).map_err(|e| e.to_string())?;
        let mus = mus
            .into_iter()
            .map(|m| Mu::new(m).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        cfg.mu = MuSetting::Sweep(mus);
        cfg.sm = SMethodParams { l: self.sm_l };
        cfg.solver = match self.solver {
            Algorithm::Omp => SolverConfig::default(),
            Algorithm::BasisPursuit => SolverConfig::basis_pursuit(),
        };
        cfg.methods = methods;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn run(&self, mus: Vec<f64>, methods: Vec<Method>) -> Result<PipelineOutput, String> {
        run_pipeline(&self.config(mus, methods)?).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct TrackOut {
    pub method: Method,
    pub mu: f64,
    pub velocity: Vec<Option<f64>>,
    pub rmse: Option<f64>,
    pub gap_fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct TrackReport {
    pub n_frames: usize,
    pub available: Vec<usize>,
    pub truth: Vec<f64>,
    pub tracks: Vec<TrackOut>,
    pub solver_failures: usize,
}

/// Rows are frames, columns are bins from `-np/2` to `np/2 - 1`. Each row is
/// scaled to a peak of 1; gap rows are null.
#[derive(Debug, Serialize)]
pub struct MapReport {
    pub method: Method,
    pub mu: f64,
    pub np: usize,
    pub times: Vec<usize>,
    pub velocity_axis: Vec<f64>,
    pub rows: Vec<Option<Vec<f32>>>,
    pub ridge: Vec<Option<f64>>,
    pub truth: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub mu: f64,
    pub total_variation: f64,
    pub gap_fraction: f64,
    pub rmse: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub method: Method,
    pub points: Vec<SweepPoint>,
    pub selected_mu: Option<f64>,
}

fn rmse(velocity: &[Option<f64>], truth: &GroundTruth) -> Option<f64> {
    let (sum, n) = velocity
        .iter()
        .zip(&truth.velocity)
        .filter_map(|(v, t)| v.map(|v| (v - t).powi(2)))
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn truth_of(out: &PipelineOutput) -> &GroundTruth {
    out.truth.as_ref().expect("synthetic input carries ground truth")
}

/// Tracks of all three methods at one μ.
pub fn simulate(params: &DemoParams) -> Result<TrackReport, String> {
    let out = params.run(vec![params.mu], Method::ALL.to_vec())?;
    let truth = truth_of(&out);
    let tracks = out
        .tracks
        .iter()
        .map(|t| TrackOut {
            method: t.method.expect("pipeline tags tracks"),
            mu: t.mu,
            velocity: t.velocity.clone(),
            rmse: rmse(&t.velocity, truth),
            gap_fraction: t.gap_fraction(),
        })
        .collect();
    Ok(TrackReport {
        n_frames: params.n_frames,
        available: out.available.clone(),
        truth: truth.velocity.clone(),
        tracks,
        solver_failures: out.solver_failures,
    })
}

/// The time-frequency map one method produces at the configured μ.
pub fn tf_map(params: &DemoParams, method: Method) -> Result<MapReport, String> {
    let out = params.run(vec![params.mu], vec![method])?;
    let map = out.map(method, params.mu).expect("requested map is present");
    let mu = Mu::new(params.mu).map_err(|e| e.to_string())?;
    let np = map.np();
    let half = (np / 2) as isize;
    let bins = -half..half;
    let rows = (0..map.n_times())
        .map(|i| {
            if map.is_gap(i) {
                return None;
            }
            let row: Vec<f64> = bins.clone().map(|k| map.at(i, k)).collect();
            let peak = row.iter().cloned().fold(0.0, f64::max);
            let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
            Some(row.iter().map(|v| (v * scale) as f32).collect())
        })
        .collect();
    Ok(MapReport {
        method,
        mu: params.mu,
        np,
        times: map.times().to_vec(),
        velocity_axis: bins.map(|k| bin_to_velocity(k, np, mu)).collect(),
        rows,
        ridge: out.tracks[0].velocity.clone(),
        truth: truth_of(&out).velocity.clone(),
    })
}

/// Smoothness and error of each μ, plus the μ the pipeline would pick.
pub fn mu_sweep(params: &DemoParams, mus: &[f64], method: Method) -> Result<SweepReport, String> {
    if mus.is_empty() {
        return Err("no μ values given".into());
    }
    let out = params.run(mus.to_vec(), vec![method])?;
    let truth = truth_of(&out);
    let points = out
        .tracks
        .iter()
        .map(|t| SweepPoint {
            mu: t.mu,
            total_variation: t.smoothness(),
            gap_fraction: t.gap_fraction(),
            rmse: rmse(&t.velocity, truth),
        })
        .collect();
    Ok(SweepReport {
        method,
        points,
        selected_mu: out.selected.first().and_then(|(_, mu)| *mu),
    })
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn simulate_json(params: &str) -> Result<String, String> {
    to_json(&simulate(&parse(params)?)?)
}

pub fn tf_map_json(params: &str, method: &str) -> Result<String, String> {
    let method: Method = method.parse()?;
    to_json(&tf_map(&parse(params)?, method)?)
}

pub fn mu_sweep_json(params: &str, mus: &str, method: &str) -> Result<String, String> {
    let method: Method = method.parse()?;
    let mus: Vec<f64> = parse(mus)?;
    to_json(&mu_sweep(&parse(params)?, &mus, method)?)
}

#[wasm_bindgen(js_name = defaultParams)]
pub fn default_params() -> String {
    serde_json::to_string(&DemoParams::default()).expect("plain struct serializes")
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(params: &str) -> Result<String, JsError> {
    simulate_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tfMap)]
pub fn tf_map_js(params: &str, method: &str) -> Result<String, JsError> {
    tf_map_json(params, method).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = muSweep)]
pub fn mu_sweep_js(params: &str, mus: &str, method: &str) -> Result<String, JsError> {
    mu_sweep_json(params, mus, method).map_err(|e| JsError::new(&e))
}
