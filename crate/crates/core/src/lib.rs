//! Harmonic-location gating and spectral masking for speech enhancement.
//!
//! The crate covers the signal-processing half of a harmonic gated
//! compensation enhancer: STFT analysis, pitch-candidate integration over a
//! high-resolution cosine harmonic matrix, voiced-region and energy gating,
//! the three mask-application operators, and loudness-compressed metrics.
//! Learned mask estimators are out of scope; [`masking::MaskProvider`]
//! implementations (oracle, constant, file) stand in for them.

pub mod config;
pub mod error;
pub mod gating;
pub mod harmonic;
pub mod io;
pub mod masking;
pub mod metrics;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{AnalysisConfig, AudioBuffer, ComplexSpectrogram, MagPhase};
