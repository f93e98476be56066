//! Camera identification from sensor pattern noise.
//!
//! The pipeline: denoise each image with a wavelet Wiener filter to get a noise residual,
//! combine residuals into a per-camera fingerprint, then score a questioned image against a
//! fingerprint with the signed peak-to-correlation-energy ratio (PCE). The [`sim`] module
//! renders synthetic cameras with a known pattern, and [`eval`] runs multi-trial experiments.

pub mod dataset;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod exposure;
mod fft;
pub mod fingerprint;
pub mod image;
pub mod matching;
pub mod sim;
pub mod wavelet;

pub use dataset::{load_manifest, partition_trial, ImageSource, Manifest, ManifestRow, PartitionSizes, TrialPartition};
pub use denoise::{denoise, residual, DenoiseConfig};
pub use error::{Error, Result};
pub use eval::{
    balanced_error_rates, fleiss_kappa, mixing_sensitivity, run_experiment, threshold_sweep, zero_fpr_threshold,
    ErrorRates, EvalConfig, ExperimentKind, ExperimentReport, ScoreMatrix,
};
pub use exposure::{classify_exposure_offset, exposure_value_rel};
pub use fingerprint::{estimate_camera_fingerprint, nua_suppress, CameraFingerprint, NuaConfig, SaturationRule};
pub use image::{ExposureType, Image, ImageMeta, NoiseResidual};
pub use matching::{cross_correlation_plane, match_image, signed_pce, MatchConfig, PceResult, PeakSearch};
pub use sim::{render_corpus, CorpusConfig, SyntheticCamera, SyntheticCorpus};
