//! Frame sequences, availability masks, disk loading and the synthetic
//! moving-rectangle generator.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("frame directory {0} does not exist")]
    MissingDirectory(PathBuf),
    #[error("no image files found in {0}")]
    NoFrames(PathBuf),
    #[error("file name {0} carries no frame number")]
    UnnumberedFile(PathBuf),
    #[error("frame number {0} appears more than once")]
    DuplicateFrameNumber(u64),
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    InconsistentDimensions {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("mask index {index} out of range for {n_total} frames")]
    MaskOutOfRange { index: usize, n_total: usize },
    #[error("mask indices must be strictly increasing")]
    MaskUnsorted,
    #[error("mask covers {mask} frames but sequence has {seq}")]
    MaskLengthMismatch { mask: usize, seq: usize },
    #[error("mask keeps frame {0} which is not available in the sequence")]
    MaskNotSubset(usize),
    #[error("keep ratio {0} outside (0, 1]")]
    BadKeepRatio(f64),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("object leaves the frame at t={frame} (x={x}, allowed 0..={max_x})")]
    ObjectOutOfFrame { frame: usize, x: i64, max_x: i64 },
    #[error("invalid mask file line {line}: {text:?}")]
    BadMaskLine { line: usize, text: String },
    #[error("image decode failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Grayscale luminance image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "frame buffer size mismatch");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Frames on a grid of `n_total` instants, of which only `available` are present.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    n_total: usize,
    available: Vec<usize>,
    frames: Vec<Frame>,
    width: usize,
    height: usize,
}

impl FrameSequence {
    pub fn new(n_total: usize, available: Vec<usize>, frames: Vec<Frame>) -> Result<Self, IngestError> {
        check_indices(&available, n_total)?;
        if frames.len() != available.len() {
            return Err(IngestError::MaskLengthMismatch {
                mask: available.len(),
                seq: frames.len(),
            });
        }
        let (width, height) = frames.first().map(|f| (f.width, f.height)).unwrap_or((0, 0));
        for (i, f) in frames.iter().enumerate() {
            if f.width != width || f.height != height {
                return Err(IngestError::InconsistentDimensions {
                    index: available[i],
                    got_w: f.width,
                    got_h: f.height,
                    want_w: width,
                    want_h: height,
                });
            }
        }
        Ok(Self {
            n_total,
            available,
            frames,
            width,
            height,
        })
    }

    /// Every grid instant present.
    pub fn complete(frames: Vec<Frame>) -> Result<Self, IngestError> {
        let n = frames.len();
        Self::new(n, (0..n).collect(), frames)
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn available(&self) -> &[usize] {
        &self.available
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len_available(&self) -> usize {
        self.available.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Frame at grid index `t`, if it is available.
    pub fn frame_at(&self, t: usize) -> Option<&Frame> {
        self.available.binary_search(&t).ok().map(|i| &self.frames[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Frame)> {
        self.available.iter().copied().zip(self.frames.iter())
    }
}

fn check_indices(indices: &[usize], n_total: usize) -> Result<(), IngestError> {
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IngestError::MaskUnsorted);
    }
    if let Some(&last) = indices.last() {
        if last >= n_total {
            return Err(IngestError::MaskOutOfRange { index: last, n_total });
        }
    }
    Ok(())
}

/// Which grid frames survive acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityMask {
    n_total: usize,
    kept: Vec<usize>,
    keep_ratio: f64,
    seed: Option<u64>,
}

impl AvailabilityMask {
    pub fn full(n_total: usize) -> Self {
        Self {
            n_total,
            kept: (0..n_total).collect(),
            keep_ratio: 1.0,
            seed: None,
        }
    }

    /// Uniform random selection without replacement of
    /// `round(keep_ratio * n_total)` frames.
    pub fn random(n_total: usize, keep_ratio: f64, seed: u64) -> Result<Self, IngestError> {
        if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
            return Err(IngestError::BadKeepRatio(keep_ratio));
        }
        let count = ((keep_ratio * n_total as f64).round() as usize).min(n_total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kept = index::sample(&mut rng, n_total, count).into_vec();
        kept.sort_unstable();
        Ok(Self {
            n_total,
            kept,
            keep_ratio,
            seed: Some(seed),
        })
    }

    pub fn from_indices(n_total: usize, mut kept: Vec<usize>) -> Result<Self, IngestError> {
        kept.sort_unstable();
        if kept.windows(2).any(|w| w[0] == w[1]) {
            return Err(IngestError::MaskUnsorted);
        }
        check_indices(&kept, n_total)?;
        let keep_ratio = if n_total == 0 {
            0.0
        } else {
            kept.len() as f64 / n_total as f64
        };
        Ok(Self {
            n_total,
            kept,
            keep_ratio,
            seed: None,
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn keep_ratio(&self) -> f64 {
        self.keep_ratio
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Plain text, one kept index per line, ascending.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for k in &self.kept {
            writeln!(w, "{k}")?;
        }
        Ok(())
    }
}

/// Reads a mask file. Blank lines and `#` comments are skipped; indices
/// must be strictly ascending.
pub fn read_mask_indices(path: &Path) -> Result<Vec<usize>, IngestError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let v: usize = text.parse().map_err(|_| IngestError::BadMaskLine {
            line: i + 1,
            text: text.to_string(),
        })?;
        if out.last().is_some_and(|&prev| prev >= v) {
            return Err(IngestError::MaskUnsorted);
        }
        out.push(v);
    }
    Ok(out)
}

/// How to pick frames when the total count is only known after listing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSpec {
    #[default]
    Full,
    Random {
        keep_ratio: f64,
        seed: u64,
    },
    Indices(Vec<usize>),
    File(PathBuf),
}

impl MaskSpec {
    pub fn resolve(&self, n_total: usize) -> Result<AvailabilityMask, IngestError> {
        match self {
            MaskSpec::Full => Ok(AvailabilityMask::full(n_total)),
            MaskSpec::Random { keep_ratio, seed } => AvailabilityMask::random(n_total, *keep_ratio, *seed),
            MaskSpec::Indices(idx) => AvailabilityMask::from_indices(n_total, idx.clone()),
            MaskSpec::File(path) => AvailabilityMask::from_indices(n_total, read_mask_indices(path)?),
        }
    }
}

/// Restricts `seq` to the frames listed in `mask`.
pub fn apply_mask(seq: &FrameSequence, mask: &AvailabilityMask) -> Result<FrameSequence, IngestError> {
    if mask.n_total != seq.n_total {
        return Err(IngestError::MaskLengthMismatch {
            mask: mask.n_total,
            seq: seq.n_total,
        });
    }
    let mut frames = Vec::with_capacity(mask.kept.len());
    for &t in &mask.kept {
        let f = seq.frame_at(t).ok_or(IngestError::MaskNotSubset(t))?;
        frames.push(f.clone());
    }
    FrameSequence::new(seq.n_total, mask.kept.clone(), frames)
}

fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

fn is_frame_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "pgm")
    )
}

/// Lists PNG/PGM files in `dir`, sorted by the trailing number in their stem.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if !dir.is_dir() {
        return Err(IngestError::MissingDirectory(dir.to_path_buf()));
    }
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() || !is_frame_file(&path) {
            continue;
        }
        let n = frame_number(&path).ok_or_else(|| IngestError::UnnumberedFile(path.clone()))?;
        numbered.push((n, path));
    }
    if numbered.is_empty() {
        return Err(IngestError::NoFrames(dir.to_path_buf()));
    }
    numbered.sort();
    if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IngestError::DuplicateFrameNumber(w[0].0));
    }
    Ok(numbered.into_iter().map(|(_, p)| p).collect())
}

const REC601: [f64; 3] = [0.299, 0.587, 0.114];

/// Converts a decoded image to luminance in `[0, 1]`.
pub fn to_luminance(img: &image::DynamicImage) -> Frame {
    use image::DynamicImage;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let rgb = img.to_rgb8();
            rgb.pixels()
                .map(|p| {
                    (REC601[0] * p[0] as f64 + REC601[1] * p[1] as f64 + REC601[2] * p[2] as f64) / 255.0
                })
                .collect()
        }
        _ => {
            let rgb = img.to_rgb32f();
            rgb.pixels()
                .map(|p| {
                    (REC601[0] * p[0] as f64 + REC601[1] * p[1] as f64 + REC601[2] * p[2] as f64)
                        .clamp(0.0, 1.0)
                })
                .collect()
        }
    };
    Frame::new(w, h, data)
}

fn decode(path: &Path) -> Result<Frame, IngestError> {
    let img = image::open(path).map_err(|source| IngestError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(to_luminance(&img))
}

/// Loads the numerically sorted frames of `dir`, keeping only those selected
/// by `mask`. Dimensions of every file are checked, masked-out ones included.
pub fn load_sequence(dir: &Path, mask: &MaskSpec) -> Result<FrameSequence, IngestError> {
    let files = list_frame_files(dir)?;
    let n_total = files.len();
    let mask = mask.resolve(n_total)?;

    let mut dims = None;
    for (i, path) in files.iter().enumerate() {
        let (w, h) = image::image_dimensions(path).map_err(|source| IngestError::Image {
            path: path.clone(),
            source,
        })?;
        let (w, h) = (w as usize, h as usize);
        match dims {
            None => dims = Some((w, h)),
            Some((ww, hh)) if ww != w || hh != h => {
                return Err(IngestError::InconsistentDimensions {
                    index: i,
                    got_w: w,
                    got_h: h,
                    want_w: ww,
                    want_h: hh,
                })
            }
            _ => {}
        }
    }

    #[cfg(feature = "parallel")]
    let frames: Result<Vec<Frame>, IngestError> =
        mask.kept().par_iter().map(|&t| decode(&files[t])).collect();
    #[cfg(not(feature = "parallel"))]
    let frames: Result<Vec<Frame>, IngestError> = mask.kept().iter().map(|&t| decode(&files[t])).collect();

    FrameSequence::new(n_total, mask.kept().to_vec(), frames?)
}

/// Writes a frame as an 8-bit binary PGM.
pub fn write_pgm(frame: &Frame, mut w: impl Write) -> std::io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", frame.width, frame.height)?;
    let bytes: Vec<u8> = frame
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VelocityProfile {
    Constant { vx: f64 },
    LinearAccel { vx_start: f64, vx_end: f64 },
}

impl VelocityProfile {
    /// Velocity at frame `t` of an `n`-frame sequence.
    pub fn velocity(&self, t: usize, n: usize) -> f64 {
        match *self {
            VelocityProfile::Constant { vx } => vx,
            VelocityProfile::LinearAccel { vx_start, vx_end } => {
                if n < 2 {
                    vx_start
                } else {
                    vx_start + (vx_end - vx_start) * t as f64 / (n - 1) as f64
                }
            }
        }
    }

    /// Displacement accumulated from frame 0 to frame `t`.
    pub fn displacement(&self, t: usize, n: usize) -> f64 {
        let t = t as f64;
        match *self {
            VelocityProfile::Constant { vx } => vx * t,
            VelocityProfile::LinearAccel { vx_start, vx_end } => {
                if n < 2 {
                    vx_start * t
                } else {
                    vx_start * t + (vx_end - vx_start) * t * t / (2.0 * (n - 1) as f64)
                }
            }
        }
    }
}

/// Parameters of a synthetic scene: one rectangle moving horizontally over a
/// uniform background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub object_size: (usize, usize),
    pub initial_position: (usize, usize),
    pub velocity_profile: VelocityProfile,
    pub object_intensity: f64,
    pub background_intensity: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSceneSpec {
    pub fn from_json_file(path: &Path) -> Result<Self, IngestError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Rounded horizontal object position at every frame.
    pub fn positions(&self) -> Vec<i64> {
        (0..self.n_frames)
            .map(|t| {
                (self.initial_position.0 as f64 + self.velocity_profile.displacement(t, self.n_frames))
                    .round() as i64
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidScene(m.to_string()));
        if self.width == 0 || self.height == 0 || self.n_frames == 0 {
            return bad("width, height and n_frames must be positive");
        }
        let (ow, oh) = self.object_size;
        if ow == 0 || oh == 0 || ow > self.width || oh > self.height {
            return bad("object size must be positive and fit in the frame");
        }
        if self.initial_position.1 + oh > self.height {
            return bad("object extends past the bottom edge");
        }
        for v in [self.object_intensity, self.background_intensity] {
            if !(0.0..=1.0).contains(&v) {
                return bad("intensities must lie in [0, 1]");
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        let max_x = (self.width - ow) as i64;
        for (t, x) in self.positions().into_iter().enumerate() {
            if x < 0 || x > max_x {
                return Err(IngestError::ObjectOutOfFrame { frame: t, x, max_x });
            }
        }
        Ok(())
    }
}

/// True per-frame velocity (pixels/frame) before position rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub velocity: Vec<f64>,
    pub position: Vec<i64>,
}

/// Renders `spec` into a fully available sequence plus its ground truth.
pub fn generate_synthetic(spec: &SyntheticSceneSpec) -> Result<(FrameSequence, GroundTruth), IngestError> {
    spec.validate()?;
    let positions = spec.positions();
    let (ow, oh) = spec.object_size;
    let y0 = spec.initial_position.1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("sigma validated"))
    } else {
        None
    };

    let mut frames = Vec::with_capacity(spec.n_frames);
    for &x in &positions {
        let mut frame = Frame::filled(spec.width, spec.height, spec.background_intensity);
        let x = x as usize;
        for y in y0..y0 + oh {
            for xx in x..x + ow {
                frame.set(xx, y, spec.object_intensity);
            }
        }
        if let Some(dist) = &noise {
            for v in frame.data.iter_mut() {
                *v = (*v + dist.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        frames.push(frame);
    }
    let truth = GroundTruth {
        velocity: (0..spec.n_frames)
            .map(|t| spec.velocity_profile.velocity(t, spec.n_frames))
            .collect(),
        position: positions,
    };
    Ok((FrameSequence::complete(frames)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(profile: VelocityProfile, n: usize, width: usize) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            width,
            height: 64,
            n_frames: n,
            object_size: (16, 16),
            initial_position: (8, 24),
            velocity_profile: profile,
            object_intensity: 0.8,
            background_intensity: 0.2,
            noise_sigma: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn constant_profile_truth() {
        let (seq, truth) =
            generate_synthetic(&scene(VelocityProfile::Constant { vx: 3.0 }, 128, 512)).unwrap();
        assert_eq!(seq.n_total(), 128);
        assert_eq!(seq.len_available(), 128);
        assert!(truth.velocity.iter().all(|&v| v == 3.0));
        assert_eq!(truth.position[10], 8 + 30);
    }

    #[test]
    fn linear_accel_truth() {
        let spec = scene(
            VelocityProfile::LinearAccel {
                vx_start: 1.0,
                vx_end: 5.0,
            },
            100,
            512,
        );
        let (_, truth) = generate_synthetic(&spec).unwrap();
        for (t, v) in truth.velocity.iter().enumerate() {
            assert!((v - (1.0 + 4.0 * t as f64 / 99.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn static_object_frames_identical() {
        let (seq, _) = generate_synthetic(&scene(VelocityProfile::Constant { vx: 0.0 }, 10, 64)).unwrap();
        let first = &seq.frames()[0];
        assert!(seq.frames().iter().all(|f| f == first));
    }

    #[test]
    fn object_leaving_frame_rejected() {
        let err = generate_synthetic(&scene(VelocityProfile::Constant { vx: 3.0 }, 128, 128)).unwrap_err();
        assert!(matches!(err, IngestError::ObjectOutOfFrame { .. }), "{err}");
        let err = generate_synthetic(&scene(VelocityProfile::Constant { vx: -1.0 }, 20, 128)).unwrap_err();
        assert!(
            matches!(err, IngestError::ObjectOutOfFrame { frame: 9, .. }),
            "{err}"
        );
    }

    #[test]
    fn noise_is_clipped_and_deterministic() {
        let mut spec = scene(VelocityProfile::Constant { vx: 1.0 }, 8, 64);
        spec.noise_sigma = 0.5;
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a
            .frames()
            .iter()
            .flat_map(|f| f.data())
            .all(|v| (0.0..=1.0).contains(v)));
        spec.seed = 2;
        let (c, _) = generate_synthetic(&spec).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mask_counts_match_sparse_regimes() {
        assert_eq!(AvailabilityMask::random(121, 0.545, 3).unwrap().kept().len(), 66);
        assert_eq!(
            AvailabilityMask::random(130, 0.53846, 7).unwrap().kept().len(),
            70
        );
        let m = AvailabilityMask::random(121, 0.545, 11).unwrap();
        assert_eq!(m, AvailabilityMask::random(121, 0.545, 11).unwrap());
        assert!(m.kept().windows(2).all(|w| w[0] < w[1]));
        assert!(AvailabilityMask::random(10, 0.0, 1).is_err());
        assert!(AvailabilityMask::random(10, 1.5, 1).is_err());
    }

    #[test]
    fn apply_mask_paths() {
        let (seq, _) = generate_synthetic(&scene(VelocityProfile::Constant { vx: 3.0 }, 121, 512)).unwrap();
        let m = AvailabilityMask::random(121, 0.545, 5).unwrap();
        let sub = apply_mask(&seq, &m).unwrap();
        assert_eq!(sub.n_total(), 121);
        assert_eq!(sub.len_available(), 66);
        for (t, f) in sub.iter() {
            assert_eq!(f, seq.frame_at(t).unwrap());
        }
        let same = apply_mask(&seq, &AvailabilityMask::full(121)).unwrap();
        assert_eq!(same, seq);

        // a kept frame that the subsequence no longer has
        let missing = (0..121).find(|t| !m.kept().contains(t)).unwrap();
        let bad = AvailabilityMask::from_indices(121, vec![missing]).unwrap();
        assert!(matches!(
            apply_mask(&sub, &bad),
            Err(IngestError::MaskNotSubset(t)) if t == missing
        ));
        assert!(apply_mask(&seq, &AvailabilityMask::full(120)).is_err());
    }

    #[test]
    fn sequence_invariants_enforced() {
        let f = Frame::filled(4, 4, 0.0);
        assert!(FrameSequence::new(3, vec![1, 0], vec![f.clone(), f.clone()]).is_err());
        assert!(FrameSequence::new(2, vec![0, 2], vec![f.clone(), f.clone()]).is_err());
        assert!(FrameSequence::new(3, vec![0, 1], vec![f.clone(), Frame::filled(4, 5, 0.0)]).is_err());
        assert!(FrameSequence::new(3, vec![0, 2], vec![f.clone(), f]).is_ok());
    }

    #[test]
    fn frame_numbers_from_names() {
        assert_eq!(frame_number(Path::new("frame_0012.png")), Some(12));
        assert_eq!(frame_number(Path::new("7.pgm")), Some(7));
        assert_eq!(frame_number(Path::new("cover.png")), None);
    }

    #[test]
    fn rec601_conversion() {
        let img = image::RgbImage::from_pixel(2, 1, image::Rgb([255, 0, 0]));
        let f = to_luminance(&image::DynamicImage::ImageRgb8(img));
        assert!((f.get(0, 0) - 0.299).abs() < 1e-12);
        let g = image::GrayImage::from_pixel(1, 1, image::Luma([51]));
        assert_eq!(to_luminance(&image::DynamicImage::ImageLuma8(g)).get(0, 0), 0.2);
    }
}
