//! Plain-text CSV renderings of the tables produced by each module.
//!
//! Floats use Rust's shortest round-trip formatting, so identical inputs
//! always render to identical bytes.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};

use crate::cache::format_trace_line;
use crate::error::Result;
use crate::rope::{phase_step_report, ModulationMode, PlaneTable, RopeSpec};
use crate::spectral::PsdCurve;

pub const PLANE_TABLE_HEADER: &str = "m,theta,lambda,exposure_r,gate_g,theta_mod,phase_step";

/// Plane table with the phase step of `mode` in the last column.
pub fn plane_table_csv(spec: &RopeSpec, mode: ModulationMode, target_len: usize) -> Result<String> {
    let table = PlaneTable::new(spec, target_len)?;
    let steps = phase_step_report(spec, mode, target_len)?;
    let mut out = String::from(PLANE_TABLE_HEADER);
    out.push('\n');
    for (p, step) in table.planes.iter().zip(steps) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.m, p.theta, p.lambda, p.exposure_r, p.gate_g, p.theta_mod, step
        );
    }
    Ok(out)
}

/// Per-plane phase steps of every mode side by side.
pub fn phase_comparison_csv(spec: &RopeSpec, target_len: usize) -> Result<String> {
    let table = PlaneTable::new(spec, target_len)?;
    let per_mode: Vec<Vec<f64>> = ModulationMode::ALL
        .iter()
        .map(|&m| phase_step_report(spec, m, target_len))
        .collect::<Result<_>>()?;
    let mut out = String::from(
        "m,theta,exposure_r,gate_g,phase_step_vanilla,phase_step_pi,phase_step_flex,pi_shrink\n",
    );
    for p in &table.planes {
        let (v, pi, fl) = (per_mode[0][p.m], per_mode[1][p.m], per_mode[2][p.m]);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.m,
            p.theta,
            p.exposure_r,
            p.gate_g,
            v,
            pi,
            fl,
            v / pi
        );
    }
    Ok(out)
}

pub fn covariance_csv(empirical: &Array2<f64>, analytic: &Array2<f64>) -> String {
    let mut out = String::from("u,v,empirical,analytic\n");
    for ((u, v), e) in empirical.indexed_iter() {
        let _ = writeln!(out, "{u},{v},{e},{}", analytic[[u, v]]);
    }
    out
}

pub fn psd_csv(analytic: &PsdCurve, empirical: &PsdCurve) -> String {
    let mut out = String::from("omega,analytic,empirical\n");
    for ((w, a), e) in analytic
        .omegas
        .iter()
        .zip(&analytic.values)
        .zip(&empirical.values)
    {
        let _ = writeln!(out, "{w},{a},{e}");
    }
    out
}

/// `n,dim0..dimK` with one row per frame.
pub fn frames_csv<T: std::fmt::Display>(frames: ArrayView2<'_, T>) -> String {
    let mut out = String::from("n");
    for j in 0..frames.ncols() {
        let _ = write!(out, ",dim{j}");
    }
    out.push('\n');
    for (n, row) in frames.rows().into_iter().enumerate() {
        let _ = write!(out, "{n}");
        for x in row {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// `chunk_index,similarity`; undefined entries are left empty.
pub fn drift_csv(curve: &[Option<f64>]) -> String {
    let mut out = String::from("chunk_index,similarity\n");
    for (i, v) in curve.iter().enumerate() {
        match v {
            Some(x) => {
                let _ = writeln!(out, "{i},{x}");
            }
            None => {
                let _ = writeln!(out, "{i},");
            }
        }
    }
    out
}

pub fn context_trace(contexts: &[Vec<usize>]) -> String {
    let mut out = String::from("step,context_indices\n");
    for (step, ctx) in contexts.iter().enumerate() {
        out.push_str(&format_trace_line(step, ctx));
        out.push('\n');
    }
    out
}
