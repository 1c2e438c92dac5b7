use serde::{Deserialize, Serialize};

/// Which distribution a track was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Zero-filled STFT followed by the S-method.
    InitialSm,
    /// Reconstructed STFT, spectrogram.
    CsSpec,
    /// Reconstructed STFT, S-method.
    CsSm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::InitialSm, Method::CsSpec, Method::CsSm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::InitialSm => "initial_sm",
            Method::CsSpec => "cs_spec",
            Method::CsSm => "cs_sm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected initial_sm, cs_spec or cs_sm)"))
    }
}

/// Per-frame velocity in pixels/frame; `None` marks a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityTrack {
    pub frames: Vec<usize>,
    pub velocity: Vec<Option<f64>>,
    pub mu: f64,
    pub method: Option<Method>,
}

impl VelocityTrack {
    pub fn new(frames: Vec<usize>, velocity: Vec<Option<f64>>, mu: f64) -> Self {
        assert_eq!(frames.len(), velocity.len());
        assert!(frames.windows(2).all(|w| w[0] < w[1]), "frames must increase");
        Self {
            frames,
            velocity,
            mu,
            method: None,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = Some(method);
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.velocity.iter().filter(|v| v.is_none()).count()
    }

    pub fn gap_fraction(&self) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        self.gap_count() as f64 / self.len() as f64
    }

    /// Total variation over consecutive defined entries; gaps are skipped.
    pub fn smoothness(&self) -> f64 {
        let defined: Vec<f64> = self.velocity.iter().flatten().copied().collect();
        defined.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            velocity: self.velocity.iter().map(|v| v.map(|x| x * c)).collect(),
            ..self.clone()
        }
    }

    pub fn get(&self, frame: usize) -> Option<f64> {
        self.frames
            .binary_search(&frame)
            .ok()
            .and_then(|i| self.velocity[i])
    }
}
