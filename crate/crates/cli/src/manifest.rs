//! Output directory bookkeeping and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use flex_core::rng::{NORMAL_METHOD, RNG_ALGORITHM};
use serde::Serialize;

use crate::config::FlexConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Single writer for one command's outputs.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub noise_seed: u64,
    pub model_seed: u64,
    pub verify_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildInfo {
    pub package: &'static str,
    pub version: &'static str,
    pub profile: &'static str,
    pub target_arch: &'static str,
    pub target_os: &'static str,
    pub rng_algorithm: &'static str,
    pub normal_method: &'static str,
}

impl BuildInfo {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            profile: if cfg!(debug_assertions) {
                "debug"
            } else {
                "release"
            },
            target_arch: std::env::consts::ARCH,
            target_os: std::env::consts::OS,
            rng_algorithm: RNG_ALGORITHM,
            normal_method: NORMAL_METHOD,
        }
    }
}

/// Everything needed to rerun a command; pass it back with `--config manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub seeds: Seeds,
    pub build: BuildInfo,
    pub config: FlexConfig,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &FlexConfig, outputs: &[String]) -> Self {
        Self {
            command: command.to_string(),
            tool_version: format!("flex {}", env!("CARGO_PKG_VERSION")),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seeds: Seeds {
                noise_seed: config.noise.seed,
                model_seed: config.pipeline.model_seed,
                verify_seed: config.verify.seed,
            },
            build: BuildInfo::current(),
            config: config.clone(),
            outputs: outputs.to_vec(),
        }
    }

    /// Writes the manifest last so it can list every other output.
    pub fn write(self, out: &mut OutputDir) -> Result<(), CliError> {
        let mut manifest = self;
        manifest.outputs.push(MANIFEST_FILE.to_string());
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        out.write(MANIFEST_FILE, &json)
    }
}
