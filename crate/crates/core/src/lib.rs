//! Inference-time horizon extension for chunk-wise autoregressive denoisers.
//!
//! * [`rope`]: temporal rotary tables under vanilla, position-interpolation
//!   and frequency-aware NTK-by-parts modulation.
//! * [`noise`]: antiphase AR(1) chunk noise with closed-form covariance and
//!   energy.
//! * [`spectral`]: AR(1) power spectra, Parseval quadrature and periodograms.
//! * [`cache`]: sink-pinned rolling context window.
//! * [`toymodel`]: single-head toy denoiser wiring the three together.
//! * [`metrics`]: motion and drift proxies on generated sequences.

pub mod cache;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod report;
pub mod rng;
pub mod rope;
pub mod spectral;
pub mod toymodel;

pub use cache::{FrameEntry, KvWindow};
pub use error::{FlexError, Result};
pub use metrics::{adjacent_diff_energy, drift_proxy, MetricReport};
pub use noise::{
    analytic_covariance, analytic_energy, empirical_covariance, empirical_energy, sample_chunk,
    sample_series, AnsParams, ChunkStats, NoiseChunk,
};
pub use rng::RngStream;
pub use rope::{
    apply_rotary, exposure_table, gate, modulated_frequencies, phase_step_report,
    plane_frequencies, position_map, relative_logit, ModulationMode, PlaneTable, RopeSpec,
    RotaryTable,
};
pub use spectral::{
    analytic_psd, highpass_response, parseval_energy, periodogram, psd_endpoints, PsdCurve,
};
pub use toymodel::{
    denoise_step, generate, init_weights, linear_mixer, pushforward_diff_energy, DenoiseSchedule,
    GenerationTrace, PipelineConfig, RopeConfig, ToyWeights,
};
