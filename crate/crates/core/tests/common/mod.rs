#![allow(dead_code)]

use csvel::ingest::{GroundTruth, SyntheticSceneSpec, VelocityProfile};
use csvel::propagation::Mu;
use csvel::tfa::bin_width;
use csvel::track::VelocityTrack;

pub const NP: usize = 64;
pub const N_FRAMES: usize = 128;

/// 512×64, 128 frames, a 16×16 block starting at x=40.
pub fn scene(profile: VelocityProfile) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        width: 512,
        height: 64,
        n_frames: N_FRAMES,
        object_size: (16, 16),
        initial_position: (40, 24),
        velocity_profile: profile,
        object_intensity: 0.8,
        background_intensity: 0.2,
        noise_sigma: 0.0,
        seed: 0,
    }
}

pub fn constant_scene() -> SyntheticSceneSpec {
    scene(VelocityProfile::Constant { vx: 3.0 })
}

pub fn accelerating_scene() -> SyntheticSceneSpec {
    scene(VelocityProfile::LinearAccel {
        vx_start: 1.0,
        vx_end: 5.0,
    })
}

/// Centers whose window lies fully inside the record.
pub fn interior() -> std::ops::Range<usize> {
    NP / 2..N_FRAMES - NP / 2
}

/// Share of interior frames estimated within one bin of the truth. Gaps
/// count as misses.
pub fn within_one_bin(track: &VelocityTrack, truth: &GroundTruth) -> f64 {
    let bw = bin_width(NP, Mu::new(track.mu).unwrap());
    let hits = interior()
        .filter(|&f| track.get(f).is_some_and(|v| (v - truth.velocity[f]).abs() <= bw))
        .count();
    hits as f64 / interior().len() as f64
}

/// Largest interior error over defined entries.
pub fn max_abs_error(track: &VelocityTrack, truth: &GroundTruth) -> f64 {
    interior()
        .filter_map(|f| track.get(f).map(|v| (v - truth.velocity[f]).abs()))
        .fold(0.0, f64::max)
}
