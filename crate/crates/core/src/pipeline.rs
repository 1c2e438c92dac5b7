//! End-to-end run: ingest, project, propagate per μ, build the requested
//! time-frequency maps, read the ridges and pick the smoothest μ.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    apply_mask, generate_synthetic, load_sequence, FrameSequence, GroundTruth, IngestError, MaskSpec,
    SyntheticSceneSpec,
};
use crate::output;
use crate::projection::{project_with, ProjectionError, ProjectionOptions, ProjectionSignal};
use crate::propagation::{propagate, Mu};
use crate::recon::{cs_stft, SolverConfig};
use crate::tfa::{extract_if, s_method, spectrogram, stft, SMethodParams, TfMap, TfaError, WindowSpec};
use crate::track::{Method, VelocityTrack};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Failure of a pipeline stage. The display string starts with the stage.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("ingest: empty sequence")]
    EmptySequence,
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("projection: {0}")]
    Projection(#[from] ProjectionError),
    #[error("time-frequency: {0}")]
    Tfa(#[from] TfaError),
    #[error("output: {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("no tracks to select from")]
    Empty,
    #[error("tracks carry different method tags")]
    MixedMethods,
    #[error("no admissible μ: every track is more than half gaps")]
    NoAdmissibleMu,
}

/// A synthetic scene either inline or in its own JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSource {
    Path(PathBuf),
    Inline(SyntheticSceneSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    FramesDir(PathBuf),
    Synthetic(SceneSource),
}

/// One μ or a list to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSetting {
    Single(Mu),
    Sweep(Vec<Mu>),
}

impl Default for MuSetting {
    fn default() -> Self {
        MuSetting::Sweep(Mu::default_sweep())
    }
}

impl MuSetting {
    pub fn values(&self) -> Vec<Mu> {
        match self {
            MuSetting::Single(m) => vec![*m],
            MuSetting::Sweep(v) => v.clone(),
        }
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSource,
    #[serde(default)]
    pub mask: MaskSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub mu: MuSetting,
    #[serde(default)]
    pub sm: SMethodParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Divide each frame difference by the number of frames it spans.
    #[serde(default)]
    pub normalize_gaps: bool,
    #[serde(default)]
    pub output_csv: Option<PathBuf>,
    #[serde(default)]
    pub output_plot: Option<PathBuf>,
    /// Physical units per pixel/frame, applied to emitted velocities only.
    #[serde(default = "default_scale")]
    pub velocity_scale: f64,
    /// Where to write intermediate projection and map CSVs, if anywhere.
    #[serde(default)]
    pub dump_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// Config with defaults everywhere except the input.
    pub fn new(input: InputSource) -> Self {
        Self {
            input,
            mask: MaskSpec::Full,
            window: WindowSpec::default(),
            mu: MuSetting::default(),
            sm: SMethodParams::default(),
            solver: SolverConfig::default(),
            methods: default_methods(),
            normalize_gaps: false,
            output_csv: None,
            output_plot: None,
            velocity_scale: 1.0,
            dump_dir: None,
        }
    }

    pub fn synthetic(spec: SyntheticSceneSpec) -> Self {
        Self::new(InputSource::Synthetic(SceneSource::Inline(spec)))
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.input {
            InputSource::FramesDir(p) | InputSource::Synthetic(SceneSource::Path(p)) => fix(p),
            InputSource::Synthetic(SceneSource::Inline(_)) => {}
        }
        if let MaskSpec::File(p) = &mut self.mask {
            fix(p);
        }
        for p in [&mut self.output_csv, &mut self.output_plot, &mut self.dump_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn mus(&self) -> Vec<Mu> {
        self.mu.values()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.methods.is_empty() {
            return bad("at least one method must be selected".into());
        }
        if self.mus().is_empty() {
            return bad("mu sweep is empty".into());
        }
        self.window.validate().or_else(|e| bad(e.to_string()))?;
        self.sm.validate(self.window.np).or_else(|e| bad(e.to_string()))?;
        self.solver.validate().or_else(|e| bad(e.to_string()))?;
        if !(self.velocity_scale > 0.0 && self.velocity_scale.is_finite()) {
            return bad("velocity_scale must be positive".into());
        }
        if let MaskSpec::Random { keep_ratio, .. } = self.mask {
            if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
                return bad(format!("keep_ratio {keep_ratio} outside (0, 1]"));
            }
        }
        Ok(())
    }

    fn needs_cs(&self) -> bool {
        self.methods.iter().any(|m| *m != Method::InitialSm)
    }
}

/// Real-valued map behind one track.
#[derive(Debug, Clone)]
pub struct MethodMap {
    pub method: Method,
    pub mu: f64,
    pub map: TfMap<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Method-major in config order, then μ in sweep order.
    pub tracks: Vec<VelocityTrack>,
    pub maps: Vec<MethodMap>,
    /// Reconstructed STFT per μ (empty when no CS method was requested).
    pub cs_stfts: Vec<(f64, TfMap<Complex64>)>,
    /// Smoothest admissible μ per method, `None` if every track was
    /// disqualified.
    pub selected: Vec<(Method, Option<f64>)>,
    pub projection: ProjectionSignal,
    pub available: Vec<usize>,
    pub truth: Option<GroundTruth>,
    /// Reconstructions that failed, summed over μ.
    pub solver_failures: usize,
}

impl PipelineOutput {
    pub fn track(&self, method: Method, mu: f64) -> Option<&VelocityTrack> {
        self.tracks
            .iter()
            .find(|t| t.method == Some(method) && t.mu == mu)
    }

    pub fn map(&self, method: Method, mu: f64) -> Option<&TfMap<f64>> {
        self.maps
            .iter()
            .find(|m| m.method == method && m.mu == mu)
            .map(|m| &m.map)
    }

    pub fn cs_stft(&self, mu: f64) -> Option<&TfMap<Complex64>> {
        self.cs_stfts.iter().find(|(m, _)| *m == mu).map(|(_, s)| s)
    }

    pub fn selected_track(&self, method: Method) -> Option<&VelocityTrack> {
        let mu = self.selected.iter().find(|(m, _)| *m == method)?.1?;
        self.track(method, mu)
    }
}

/// Loads or generates the frames named by `cfg.input` and applies the mask.
pub fn load_input(cfg: &PipelineConfig) -> Result<(FrameSequence, Option<GroundTruth>), PipelineError> {
    match &cfg.input {
        InputSource::FramesDir(dir) => {
            let seq = load_sequence(dir, &cfg.mask).map_err(|e| match e {
                IngestError::NoFrames(_) => PipelineError::EmptySequence,
                e => e.into(),
            })?;
            Ok((seq, None))
        }
        InputSource::Synthetic(src) => {
            let spec = match src {
                SceneSource::Path(p) => SyntheticSceneSpec::from_json_file(p)?,
                SceneSource::Inline(s) => s.clone(),
            };
            if spec.n_frames == 0 {
                return Err(PipelineError::EmptySequence);
            }
            let (full, truth) = generate_synthetic(&spec)?;
            let mask = cfg.mask.resolve(full.n_total())?;
            Ok((apply_mask(&full, &mask)?, Some(truth)))
        }
    }
}

struct MuJob {
    tracks: Vec<VelocityTrack>,
    maps: Vec<MethodMap>,
    cs_stft: Option<TfMap<Complex64>>,
    failures: usize,
}

fn run_mu(proj: &ProjectionSignal, cfg: &PipelineConfig, mu: Mu) -> Result<MuJob, PipelineError> {
    let signal = propagate(proj, mu);
    let centers: Vec<usize> = (0..signal.n_total()).collect();
    let cs = if cfg.needs_cs() {
        Some(cs_stft(&signal, &cfg.window, &cfg.solver, &centers)?)
    } else {
        None
    };
    let mut job = MuJob {
        tracks: Vec::new(),
        maps: Vec::new(),
        failures: cs.as_ref().map_or(0, |c| c.failures),
        cs_stft: None,
    };
    for &method in &cfg.methods {
        let map = match method {
            Method::InitialSm => s_method(&stft(&signal, &cfg.window, &centers)?, &cfg.sm)?,
            Method::CsSpec => spectrogram(&cs.as_ref().expect("cs map built").map),
            Method::CsSm => s_method(&cs.as_ref().expect("cs map built").map, &cfg.sm)?,
        };
        job.tracks.push(extract_if(&map, mu).with_method(method));
        job.maps.push(MethodMap {
            method,
            mu: mu.get(),
            map,
        });
    }
    job.cs_stft = cs.map(|c| c.map);
    Ok(job)
}

/// Runs every (method, μ) combination on an already loaded sequence.
pub fn analyze(seq: &FrameSequence, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    if seq.n_total() == 0 || seq.len_available() == 0 {
        return Err(PipelineError::EmptySequence);
    }
    let proj = project_with(
        seq,
        ProjectionOptions {
            normalize_gaps: cfg.normalize_gaps,
        },
    )?;
    let mus = cfg.mus();

    #[cfg(feature = "parallel")]
    let jobs: Vec<Result<MuJob, PipelineError>> = mus.par_iter().map(|&mu| run_mu(&proj, cfg, mu)).collect();
    #[cfg(not(feature = "parallel"))]
    let jobs: Vec<Result<MuJob, PipelineError>> = mus.iter().map(|&mu| run_mu(&proj, cfg, mu)).collect();

    let mut per_mu = Vec::with_capacity(jobs.len());
    for job in jobs {
        per_mu.push(job?);
    }
    let solver_failures = per_mu.iter().map(|j| j.failures).sum();
    let cs_stfts = mus
        .iter()
        .zip(&mut per_mu)
        .filter_map(|(mu, j)| j.cs_stft.take().map(|m| (mu.get(), m)))
        .collect();

    let mut tracks = Vec::new();
    let mut maps = Vec::new();
    let mut selected = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let group: Vec<VelocityTrack> = per_mu.iter().map(|j| j.tracks[mi].clone()).collect();
        let pick = match select_mu(&group) {
            Ok(t) => Some(t.mu),
            Err(e) => {
                log::warn!("{method}: {e}");
                None
            }
        };
        selected.push((method, pick));
        tracks.extend(group);
        maps.extend(per_mu.iter().map(|j| j.maps[mi].clone()));
    }

    Ok(PipelineOutput {
        tracks,
        maps,
        cs_stfts,
        selected,
        projection: proj,
        available: seq.available().to_vec(),
        truth: None,
        solver_failures,
    })
}

/// Loads the input and analyzes it. Nothing is written to disk.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let (seq, truth) = load_input(cfg)?;
    let mut out = analyze(&seq, cfg)?;
    out.truth = truth;
    Ok(out)
}

/// Smoothest track by total variation. Tracks that are more than half
/// gaps are skipped; ties go to the smaller μ.
pub fn select_mu(tracks: &[VelocityTrack]) -> Result<&VelocityTrack, SelectError> {
    let first = tracks.first().ok_or(SelectError::Empty)?;
    if tracks.iter().any(|t| t.method != first.method) {
        return Err(SelectError::MixedMethods);
    }
    tracks
        .iter()
        .filter(|t| t.gap_fraction() <= 0.5)
        .min_by(|a, b| {
            a.smoothness()
                .total_cmp(&b.smoothness())
                .then(a.mu.total_cmp(&b.mu))
        })
        .ok_or(SelectError::NoAdmissibleMu)
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| PipelineError::Output {
            path: path.to_path_buf(),
            source,
        })
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|source| PipelineError::Output {
            path: path.to_path_buf(),
            source,
        })
}

pub fn emit_csv(tracks: &[VelocityTrack], scale: f64, path: &Path) -> Result<(), PipelineError> {
    write_file(path, |w| output::write_csv(tracks, scale, w))
}

pub fn emit_plot(
    tracks: &[VelocityTrack],
    truth: Option<&GroundTruth>,
    scale: f64,
    path: &Path,
) -> Result<(), PipelineError> {
    write_file(path, |w| output::write_svg(tracks, truth, scale, w))
}

/// Writes the projection and every map as CSV under `dir`.
pub fn dump_intermediates(out: &PipelineOutput, dir: &Path) -> Result<(), PipelineError> {
    write_file(&dir.join("projection.csv"), |w| out.projection.write_csv(w))?;
    for m in &out.maps {
        let name = format!("{}_mu{}.csv", m.method, m.mu);
        write_file(&dir.join(name), |w| m.map.write_csv(w))?;
    }
    Ok(())
}

/// Writes whatever outputs `cfg` names. With no CSV path the CSV goes to
/// `stdout`.
pub fn write_outputs(
    out: &PipelineOutput,
    cfg: &PipelineConfig,
    stdout: impl Write,
) -> Result<(), PipelineError> {
    let scale = cfg.velocity_scale;
    match &cfg.output_csv {
        Some(p) => emit_csv(&out.tracks, scale, p)?,
        None => output::write_csv(&out.tracks, scale, stdout).map_err(|source| PipelineError::Output {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    if let Some(p) = &cfg.output_plot {
        emit_plot(&out.tracks, out.truth.as_ref(), scale, p)?;
    }
    if let Some(d) = &cfg.dump_dir {
        dump_intermediates(out, d)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(mu: f64, v: &[Option<f64>]) -> VelocityTrack {
        VelocityTrack::new((0..v.len()).collect(), v.to_vec(), mu).with_method(Method::CsSm)
    }

    #[test]
    fn single_candidate() {
        let t = track(0.2, &[Some(1.0), Some(4.0)]);
        assert_eq!(select_mu(std::slice::from_ref(&t)).unwrap(), &t);
    }

    #[test]
    fn constant_beats_wiggly_and_ties_go_low() {
        let flat = track(0.25, &[Some(2.0); 4]);
        let wiggly = track(0.10, &[Some(2.0), Some(2.1), Some(2.0), Some(2.0)]);
        let flat_low = track(0.15, &[Some(3.0); 4]);
        let all = [wiggly, flat.clone(), flat_low.clone()];
        assert_eq!(select_mu(&all).unwrap().mu, 0.15);
        assert_eq!(select_mu(&all[..2]).unwrap().mu, 0.25);
    }

    #[test]
    fn gappy_tracks_are_disqualified() {
        let gappy = track(0.1, &[Some(1.0), None, None, Some(1.0)]);
        assert_eq!(select_mu(std::slice::from_ref(&gappy)).unwrap().mu, 0.1);
        let worse = track(0.1, &[Some(1.0), None, None, None]);
        let ok = track(0.3, &[Some(1.0), Some(3.0), Some(1.0), Some(3.0)]);
        assert_eq!(select_mu(&[worse.clone(), ok]).unwrap().mu, 0.3);
        assert_eq!(select_mu(&[worse]), Err(SelectError::NoAdmissibleMu));
        assert_eq!(select_mu(&[]), Err(SelectError::Empty));
    }

    #[test]
    fn mixed_methods_rejected() {
        let a = track(0.1, &[Some(1.0)]);
        let b = a.clone().with_method(Method::CsSpec);
        assert_eq!(select_mu(&[a, b]), Err(SelectError::MixedMethods));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = PipelineConfig::from_json_str(r#"{"input": {"frames_dir": "frames"}}"#).unwrap();
        assert_eq!(cfg.window, WindowSpec::default());
        assert_eq!(cfg.mus().len(), 5);
        assert_eq!(cfg.methods, Method::ALL.to_vec());
        assert_eq!(cfg.velocity_scale, 1.0);
        cfg.validate().unwrap();

        let single = PipelineConfig::from_json_str(r#"{"input": {"frames_dir": "f"}, "mu": 0.25}"#).unwrap();
        assert_eq!(single.mus(), vec![Mu::new(0.25).unwrap()]);

        for bad in [
            r#"{"input": {"frames_dir": "f"}, "mu": 4.0}"#,
            r#"{"input": {"frames_dir": "f"}, "bogus": 1}"#,
            r#"{"input": {"frames_dir": "f"}, "methods": ["fancy"]}"#,
        ] {
            assert!(PipelineConfig::from_json_str(bad).is_err(), "{bad}");
        }
        for bad in [
            r#"{"input": {"frames_dir": "f"}, "methods": []}"#,
            r#"{"input": {"frames_dir": "f"}, "window": {"np": 63}}"#,
            r#"{"input": {"frames_dir": "f"}, "sm": {"l": 17}}"#,
            r#"{"input": {"frames_dir": "f"}, "mu": []}"#,
        ] {
            let cfg = PipelineConfig::from_json_str(bad).unwrap();
            assert!(cfg.validate().is_err(), "{bad}");
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = PipelineConfig::from_json_str(
            r#"{"input": {"synthetic": "scene.json"}, "output_csv": "out/v.csv", "output_plot": "/abs/p.svg"}"#,
        )
        .unwrap();
        cfg.rebase(Path::new("/data/run"));
        assert_eq!(
            cfg.input,
            InputSource::Synthetic(SceneSource::Path("/data/run/scene.json".into()))
        );
        assert_eq!(cfg.output_csv.as_deref(), Some(Path::new("/data/run/out/v.csv")));
        assert_eq!(cfg.output_plot.as_deref(), Some(Path::new("/abs/p.svg")));
    }
}
