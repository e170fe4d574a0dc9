//! Voice conversion toolkit.
//!
//! Spectral conversion runs either through a feed-forward network on the
//! full-resolution log spectral envelope (optionally initialised by
//! autoencoder pretraining) or through a joint-density Gaussian mixture on a
//! truncated cosine transform of the envelope. Prosody is converted per
//! voiced segment (F0 and intensity trajectories) and per phone (duration
//! ratios).
//!
//! Module map:
//! - [`featio`]: feature containers, binary track files, WAV and label ingestion
//! - [`analysis`]: envelope/F0/intensity extraction, deltas, resynthesis
//! - [`align`]: DTW and phone-constrained two-stage alignment
//! - [`gmm`]: joint-density GMM training and MMSE conversion
//! - [`net`]: feed-forward networks, backprop, pretraining
//! - [`prosody`]: segment-level F0/intensity and phone-duration modelling
//! - [`metrics`]: LSD ratio and F0 RMSE
//! - [`pipeline`]: experiment configuration and the command drivers

pub mod align;
pub mod analysis;
pub mod error;
pub mod featio;
pub mod gmm;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod prosody;

pub use error::{Error, Result};
pub use featio::{Audio, FeatureTrack, PhoneSegment, PhoneSegmentList, UtterancePair};
