//! The three analysis commands. Each writes its outputs and a manifest
//! into the output directory.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use flex_core::noise::{
    analytic_covariance, analytic_energy, monte_carlo_stats, sample_chunk, AnsParams,
};
use flex_core::report;
use flex_core::rng::{RngStream, GENERATION_STREAM, SERIES_STREAM_BASE};
use flex_core::spectral::{self, analytic_curve, frequency_grid, periodogram, relative_l2_error};
use flex_core::toymodel::{generate, GenerationTrace};
use flex_core::ModulationMode;

use crate::config::FlexConfig;
use crate::error::CliError;
use crate::manifest::{OutputDir, RunManifest};

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            pass: measured <= threshold,
        }
    }

    fn equal(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold: expected,
            pass: measured == expected,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: measured {} (threshold {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

fn rho_tag(rho: f64) -> String {
    format!("rho_{rho}")
}

/// Plane table per mode plus a side-by-side phase-step comparison.
pub fn rope_analyze(cfg: &FlexConfig, out: &Path) -> Result<Vec<String>, CliError> {
    cfg.validate_rope()?;
    let modes = if cfg.pipeline.modes.is_empty() {
        ModulationMode::ALL.to_vec()
    } else {
        cfg.pipeline.modes.clone()
    };
    let l = cfg.pipeline.target_len;
    let mut dir = OutputDir::create(out)?;
    for mode in modes {
        dir.write(
            &format!("rope_{mode}.csv"),
            &report::plane_table_csv(&cfg.rope, mode, l)?,
        )?;
    }
    dir.write(
        "phase_comparison.csv",
        &report::phase_comparison_csv(&cfg.rope, l)?,
    )?;
    let files = dir.files().to_vec();
    RunManifest::new("rope-analyze", cfg, &files).write(&mut dir)?;
    Ok(dir.files().to_vec())
}

/// Monte-Carlo and quadrature verification of the noise closed forms.
///
/// Every output is written before the pass/fail verdict is returned.
pub fn noise_verify(cfg: &FlexConfig, out: &Path) -> Result<Vec<CheckResult>, CliError> {
    cfg.validate_verify()?;
    let v = &cfg.verify;
    let tol = &v.tolerances;
    let mut dir = OutputDir::create(out)?;
    let mut checks = Vec::new();

    // chunk dump from the generation stream of the [noise] section
    let ans = cfg.ans();
    let mut rng = RngStream::new(ans.seed, GENERATION_STREAM);
    let mut dump = String::from("chunk,u");
    for j in 0..ans.d {
        let _ = write!(dump, ",dim{j}");
    }
    dump.push('\n');
    for c in 0..4 {
        let chunk = sample_chunk(&ans, &mut rng)?;
        for (u, row) in chunk.frames.rows().into_iter().enumerate() {
            let _ = write!(dump, "{c},{u}");
            for x in row {
                let _ = write!(dump, ",{x}");
            }
            dump.push('\n');
        }
    }
    dir.write("noise_chunks.csv", &dump)?;

    // energy law, marginals, monotonicity
    let mut grid = v.rho_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut energies = Vec::with_capacity(grid.len());
    for &rho in &grid {
        let params = AnsParams {
            rho,
            f: v.energy_chunk_len,
            d: v.energy_dim,
            seed: v.seed,
        };
        let stats = monte_carlo_stats(&params, v.chunks, v.batch_size)?;
        let empirical = stats.mean_energy()?;
        let analytic = analytic_energy(&params)?;
        energies.push(empirical);
        checks.push(CheckResult::at_most(
            format!("energy_rel_err {}", rho_tag(rho)),
            (empirical - analytic).abs() / analytic.max(1.0),
            tol.energy_rel,
        ));
        let m = stats.marginals()?;
        let worst_mean = m.mean.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let worst_var = m
            .variance
            .iter()
            .fold(0.0f64, |a, x| a.max((x - 1.0).abs()));
        checks.push(CheckResult::at_most(
            format!("marginal_mean_abs {}", rho_tag(rho)),
            worst_mean,
            tol.mean_abs,
        ));
        checks.push(CheckResult::at_most(
            format!("marginal_var_dev {}", rho_tag(rho)),
            worst_var,
            tol.var_abs,
        ));
    }
    if energies.len() > 1 {
        let worst_rise = energies
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].max(1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckResult::at_most(
            "energy_monotone_max_rise",
            worst_rise,
            tol.monotone_rel,
        ));
    }

    // Toeplitz covariance
    for &rho in &v.cov_rhos {
        let params = AnsParams {
            rho,
            f: v.cov_chunk_len,
            d: v.cov_dim,
            seed: v.seed,
        };
        let empirical = monte_carlo_stats(&params, v.chunks, v.batch_size)?.covariance()?;
        let analytic = analytic_covariance(&params)?;
        let err = empirical
            .iter()
            .zip(analytic.iter())
            .fold(0.0f64, |a, (e, t)| a.max((e - t).abs()));
        checks.push(CheckResult::at_most(
            format!("toeplitz_max_abs_err {}", rho_tag(rho)),
            err,
            tol.cov_abs,
        ));
        dir.write(
            &format!("covariance_{}.csv", rho_tag(rho)),
            &report::covariance_csv(&empirical, &analytic),
        )?;
    }

    // spectra
    for (i, &rho) in v.psd_rhos.iter().enumerate() {
        let mut rng = RngStream::new(v.seed, SERIES_STREAM_BASE + i as u64);
        let series = flex_core::sample_series(rho, v.psd_len, v.psd_dim, &mut rng)?;
        let empirical = periodogram(&series, v.segment_len)?;
        let analytic = analytic_curve(rho, &empirical.omegas)?;
        checks.push(CheckResult::at_most(
            format!("psd_rel_l2 {}", rho_tag(rho)),
            relative_l2_error(&empirical.values, &analytic.values)?,
            tol.psd_rel_l2,
        ));
        let (s0, spi) = spectral::psd_endpoints(rho)?;
        let endpoint_err = (s0 - spectral::analytic_psd(rho, 0.0)?)
            .abs()
            .max((spi - spectral::analytic_psd(rho, PI)?).abs())
            .max((s0 * spi - 1.0).abs());
        checks.push(CheckResult::at_most(
            format!("psd_endpoints {}", rho_tag(rho)),
            endpoint_err,
            tol.endpoint_abs,
        ));
        if rho < 0.0 {
            let grid = frequency_grid(v.quadrature_points);
            let density = spectral::motion_energy_density(rho, &grid)?;
            let argmax = density
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| grid[k])
                .unwrap_or(0.0);
            checks.push(CheckResult::equal(
                format!("highpass_argmax {}", rho_tag(rho)),
                argmax,
                PI,
            ));
        }
        dir.write(
            &format!("psd_{}.csv", rho_tag(rho)),
            &report::psd_csv(&analytic, &empirical),
        )?;
    }

    // Parseval
    for &rho in &v.parseval_rhos {
        let per_dim = spectral::parseval_energy(rho, v.quadrature_points)?;
        checks.push(CheckResult::at_most(
            format!("parseval_abs_err {}", rho_tag(rho)),
            (per_dim - 2.0 * (1.0 - rho)).abs(),
            tol.parseval_abs,
        ));
        let params = AnsParams {
            rho,
            f: v.energy_chunk_len,
            d: v.energy_dim,
            seed: v.seed,
        };
        let closed = analytic_energy(&params)?;
        let tied = per_dim * (v.energy_dim * (v.energy_chunk_len - 1)) as f64;
        let rel = if closed == 0.0 {
            tied.abs()
        } else {
            (tied - closed).abs() / closed
        };
        checks.push(CheckResult::at_most(
            format!("parseval_tie_rel_err {}", rho_tag(rho)),
            rel,
            tol.parseval_tie_rel,
        ));
        checks.push(CheckResult::at_most(
            format!("mean_power_abs_err {}", rho_tag(rho)),
            (spectral::mean_power(rho, v.quadrature_points)? - 1.0).abs(),
            tol.parseval_abs,
        ));
    }

    let mut table = String::from("check,measured,threshold,pass\n");
    for c in &checks {
        let _ = writeln!(
            table,
            "{},{},{},{}",
            c.name, c.measured, c.threshold, c.pass
        );
    }
    dir.write("noise_checks.csv", &table)?;
    let files = dir.files().to_vec();
    RunManifest::new("noise-verify", cfg, &files).write(&mut dir)?;
    Ok(checks)
}

/// Traces of the toy pipeline for every configured mode on identical seeds.
pub fn simulate(
    cfg: &FlexConfig,
    out: &Path,
) -> Result<Vec<(ModulationMode, GenerationTrace)>, CliError> {
    cfg.validate_pipeline()?;
    let mut dir = OutputDir::create(out)?;
    let mut traces = Vec::new();
    for &mode in &cfg.pipeline.modes {
        let trace = generate(&cfg.pipeline(mode))?;
        let prefix = format!("trace_{mode}");
        dir.write(
            &format!("{prefix}_frames.csv"),
            &report::frames_csv(trace.frames.view()),
        )?;
        dir.write(
            &format!("{prefix}_metrics.csv"),
            &report::metrics_csv(trace.metrics.iter().map(|(k, v)| (k.as_str(), *v))),
        )?;
        dir.write(
            &format!("{prefix}_drift.csv"),
            &report::drift_csv(&trace.drift_curve),
        )?;
        dir.write(
            &format!("{prefix}_contexts.txt"),
            &report::context_trace(&trace.per_step_contexts),
        )?;
        traces.push((mode, trace));
    }

    let keys: BTreeSet<&str> = traces
        .iter()
        .flat_map(|(_, t)| t.metrics.keys().map(String::as_str))
        .collect();
    let mut cmp = String::from("metric");
    for (mode, _) in &traces {
        let _ = write!(cmp, ",{mode}");
    }
    cmp.push('\n');
    for key in keys {
        cmp.push_str(key);
        for (_, t) in &traces {
            match t.metrics.get(key) {
                Some(v) => {
                    let _ = write!(cmp, ",{v}");
                }
                None => cmp.push(','),
            }
        }
        cmp.push('\n');
    }
    dir.write("comparison_metrics.csv", &cmp)?;
    dir.write(
        "comparison.csv",
        &report::phase_comparison_csv(&cfg.rope, cfg.pipeline.target_len)?,
    )?;
    let files = dir.files().to_vec();
    RunManifest::new("simulate", cfg, &files).write(&mut dir)?;
    Ok(traces)
}
