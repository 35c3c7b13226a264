//! Run configuration file.
//!
//! A TOML document with one section per concern. Every key has a default,
//! so an empty file is a valid configuration; `flex --print-default-config`
//! prints the full default document.

use std::fs;
use std::path::Path;

use flex_core::noise::AnsParams;
use flex_core::rope::{ModulationMode, RopeSpec};
use flex_core::toymodel::{DenoiseSchedule, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlexConfig {
    pub rope: RopeSpec,
    pub noise: NoiseSection,
    pub window: WindowSection,
    pub pipeline: PipelineSection,
    pub schedule: DenoiseSchedule,
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub rho: f64,
    /// Chunk length in latent frames; also the pipeline chunk size.
    pub chunk_len: usize,
    pub dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub size: usize,
    pub sink: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub target_len: usize,
    pub modes: Vec<ModulationMode>,
    pub model_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub seed: u64,
    pub chunks: usize,
    pub batch_size: usize,
    /// Correlations for the energy, marginal and monotonicity checks.
    pub rho_grid: Vec<f64>,
    pub energy_chunk_len: usize,
    pub energy_dim: usize,
    pub cov_rhos: Vec<f64>,
    pub cov_chunk_len: usize,
    pub cov_dim: usize,
    pub psd_rhos: Vec<f64>,
    pub psd_len: usize,
    pub psd_dim: usize,
    pub segment_len: usize,
    pub parseval_rhos: Vec<f64>,
    pub quadrature_points: usize,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub energy_rel: f64,
    pub monotone_rel: f64,
    pub cov_abs: f64,
    pub mean_abs: f64,
    pub var_abs: f64,
    pub psd_rel_l2: f64,
    pub endpoint_abs: f64,
    pub parseval_abs: f64,
    pub parseval_tie_rel: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            rho: -1.0,
            chunk_len: 3,
            dim: 16,
            seed: 0,
        }
    }
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { size: 9, sink: 3 }
    }
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            target_len: 84,
            modes: ModulationMode::ALL.to_vec(),
            model_seed: 0,
        }
    }
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            seed: 20_260_101,
            chunks: 20_000,
            batch_size: 500,
            rho_grid: vec![-1.0, -0.8, -0.5, 0.0, 0.5, 1.0],
            energy_chunk_len: 8,
            energy_dim: 64,
            cov_rhos: vec![-0.8, 0.0, 0.8],
            cov_chunk_len: 4,
            cov_dim: 64,
            psd_rhos: vec![-0.8, -0.5, 0.5],
            psd_len: 65_536,
            psd_dim: 4,
            segment_len: 256,
            parseval_rhos: vec![-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9],
            quadrature_points: 1024,
            tolerances: Tolerances::default(),
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            energy_rel: 0.02,
            monotone_rel: 0.02,
            cov_abs: 0.03,
            mean_abs: 0.05,
            var_abs: 0.05,
            psd_rel_l2: 0.05,
            endpoint_abs: 1e-12,
            parseval_abs: 1e-9,
            parseval_tie_rel: 1e-9,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<ModulationMode>,
    pub rho: Option<f64>,
    pub target_len: Option<usize>,
}

impl FlexConfig {
    /// Reads a TOML config, or the `config` object of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|ext| ext == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let config = manifest.get("config").ok_or_else(|| {
                CliError::Config(format!("{}: manifest has no config", path.display()))
            })?;
            return serde_json::from_value(config.clone())
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
        }
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.noise.seed = seed;
            self.verify.seed = seed;
        }
        if let Some(mode) = o.mode {
            self.pipeline.modes = vec![mode];
        }
        if let Some(rho) = o.rho {
            self.noise.rho = rho;
            self.verify.rho_grid = vec![rho];
            self.verify.cov_rhos = vec![rho];
            self.verify.psd_rhos = if rho.abs() < 1.0 {
                vec![rho]
            } else {
                Vec::new()
            };
            self.verify.parseval_rhos = self.verify.psd_rhos.clone();
        }
        if let Some(l) = o.target_len {
            self.pipeline.target_len = l;
        }
    }

    pub fn ans(&self) -> AnsParams {
        AnsParams {
            rho: self.noise.rho,
            f: self.noise.chunk_len,
            d: self.noise.dim,
            seed: self.noise.seed,
        }
    }

    pub fn pipeline(&self, mode: ModulationMode) -> PipelineConfig {
        PipelineConfig {
            rope: self.rope,
            mode,
            ans: self.ans(),
            window_w: self.window.size,
            chunk_f: self.noise.chunk_len,
            sink_n: self.window.sink,
            target_len: self.pipeline.target_len,
            schedule: self.schedule,
            model_seed: self.pipeline.model_seed,
        }
    }

    pub fn validate_rope(&self) -> Result<(), CliError> {
        self.rope.validate()?;
        if self.pipeline.target_len < 1 {
            return Err(CliError::Config("pipeline.target_len must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate_pipeline(&self) -> Result<(), CliError> {
        if self.pipeline.modes.is_empty() {
            return Err(CliError::Config("pipeline.modes is empty".into()));
        }
        for &mode in &self.pipeline.modes {
            self.pipeline(mode).validate()?;
        }
        Ok(())
    }

    pub fn validate_verify(&self) -> Result<(), CliError> {
        let v = &self.verify;
        self.ans().validate()?;
        let all_rhos = v.rho_grid.iter().chain(&v.cov_rhos);
        for &rho in all_rhos {
            if rho.is_nan() || rho.abs() > 1.0 {
                return Err(CliError::Config(format!(
                    "parameter error: rho must lie in [-1, 1], got {rho}"
                )));
            }
        }
        for &rho in v.psd_rhos.iter().chain(&v.parseval_rhos) {
            if rho.is_nan() || rho.abs() >= 1.0 {
                return Err(CliError::Config(format!(
                    "parameter error: spectral checks need |rho| < 1, got {rho}"
                )));
            }
        }
        if v.chunks < flex_core::noise::MIN_COVARIANCE_CHUNKS || v.batch_size == 0 {
            return Err(CliError::Config(format!(
                "verify.chunks must be >= {} and batch_size > 0",
                flex_core::noise::MIN_COVARIANCE_CHUNKS
            )));
        }
        if v.energy_chunk_len < 1
            || v.cov_chunk_len < 1
            || v.energy_dim < 1
            || v.cov_dim < 1
            || v.psd_dim < 1
        {
            return Err(CliError::Config(
                "verify chunk lengths and dimensions must be >= 1".into(),
            ));
        }
        Ok(())
    }
}
