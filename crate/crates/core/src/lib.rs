//! Velocity estimation for a moving object from an incomplete set of video
//! frames.
//!
//! The chain is: difference consecutive available frames and sum columns
//! ([`projection`]), fold each profile into one complex sample with a spatial
//! phasor ([`propagation`]), recover every short-time spectrum from the
//! window's surviving samples by sparse reconstruction ([`recon`]), and read
//! the velocity off the S-method ridge ([`tfa`]). [`pipeline`] ties the
//! stages together.

pub mod ingest;
pub mod output;
pub mod pipeline;
pub mod projection;
pub mod propagation;
pub mod recon;
pub mod tfa;
pub mod track;

pub use num_complex::Complex64;
