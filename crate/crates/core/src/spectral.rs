//! Analytic and empirical power spectra of AR(1) noise.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{FlexError, Result};

pub const DEFAULT_QUADRATURE_POINTS: usize = 1024;
pub const MIN_QUADRATURE_POINTS: usize = 64;
pub const MIN_SEGMENT_LEN: usize = 16;

/// Sampled spectrum on `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCurve {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
}

fn check_open_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(FlexError::Parameter(format!(
            "rho must lie in (-1, 1), got {rho}"
        )));
    }
    if rho.abs() == 1.0 {
        let pole = if rho > 0.0 { "omega = 0" } else { "omega = pi" };
        return Err(FlexError::Domain(format!(
            "AR(1) spectrum has a pole at {pole} for rho = {rho}"
        )));
    }
    Ok(())
}

/// `(1 - rho^2) / (1 + rho^2 - 2 rho cos(omega))`. Even in `omega`.
pub fn analytic_psd(rho: f64, omega: f64) -> Result<f64> {
    check_open_rho(rho)?;
    Ok(psd_unchecked(rho, omega))
}

fn psd_unchecked(rho: f64, omega: f64) -> f64 {
    (1.0 - rho * rho) / (1.0 + rho * rho - 2.0 * rho * omega.cos())
}

/// `(S(0), S(pi)) = ((1 + rho)/(1 - rho), (1 - rho)/(1 + rho))`.
pub fn psd_endpoints(rho: f64) -> Result<(f64, f64)> {
    check_open_rho(rho)?;
    Ok(((1.0 + rho) / (1.0 - rho), (1.0 - rho) / (1.0 + rho)))
}

/// Squared gain `2 (1 - cos omega)` of the first difference filter.
pub fn highpass_response(omega: f64) -> f64 {
    2.0 * (1.0 - omega.cos())
}

/// Trapezoid mean of a `2pi`-periodic integrand over `[-pi, pi]`.
fn periodic_mean(points: usize, integrand: impl Fn(f64) -> f64) -> f64 {
    let h = TAU / points as f64;
    let total: f64 = (0..points).map(|k| integrand(-PI + k as f64 * h)).sum();
    total / points as f64
}

fn check_points(points: usize) -> Result<()> {
    if points < MIN_QUADRATURE_POINTS {
        return Err(FlexError::Usage(format!(
            "quadrature needs >= {MIN_QUADRATURE_POINTS} points, got {points}"
        )));
    }
    Ok(())
}

/// `(1/2pi) * integral of |H|^2 S_rho` over `[-pi, pi]`: expected squared
/// first difference per coordinate. Closed form `2 (1 - rho)`.
pub fn parseval_energy(rho: f64, quadrature_points: usize) -> Result<f64> {
    check_open_rho(rho)?;
    check_points(quadrature_points)?;
    Ok(periodic_mean(quadrature_points, |w| {
        highpass_response(w) * psd_unchecked(rho, w)
    }))
}

/// `(1/2pi) * integral of S_rho`: the marginal variance, 1 for every rho.
pub fn mean_power(rho: f64, quadrature_points: usize) -> Result<f64> {
    check_open_rho(rho)?;
    check_points(quadrature_points)?;
    Ok(periodic_mean(quadrature_points, |w| psd_unchecked(rho, w)))
}

/// `points` evenly spaced frequencies from 0 to pi inclusive.
pub fn frequency_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| PI * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub fn analytic_curve(rho: f64, omegas: &[f64]) -> Result<PsdCurve> {
    check_open_rho(rho)?;
    Ok(PsdCurve {
        omegas: omegas.to_vec(),
        values: omegas.iter().map(|&w| psd_unchecked(rho, w)).collect(),
    })
}

/// Filtered spectrum `|H|^2 S_rho` on `omegas`.
pub fn motion_energy_density(rho: f64, omegas: &[f64]) -> Result<Vec<f64>> {
    check_open_rho(rho)?;
    Ok(omegas
        .iter()
        .map(|&w| highpass_response(w) * psd_unchecked(rho, w))
        .collect())
}

/// Averaged rectangular-window periodogram.
///
/// `series` is `length x d`; each column is cut into `length / segment_len`
/// non-overlapping segments (any remainder is dropped) and
/// `|X_k|^2 / segment_len` is averaged over segments and columns for the
/// bins `k = 0..=segment_len/2`, i.e. `omega_k = 2 pi k / segment_len`.
/// Unit-variance white noise has expectation 1 in every bin.
pub fn periodogram(series: &Array2<f64>, segment_len: usize) -> Result<PsdCurve> {
    if segment_len < MIN_SEGMENT_LEN || !segment_len.is_power_of_two() {
        return Err(FlexError::Usage(format!(
            "segment length must be a power of two >= {MIN_SEGMENT_LEN}, got {segment_len}"
        )));
    }
    let (length, d) = series.dim();
    if length < segment_len {
        return Err(FlexError::Usage(format!(
            "series of length {length} is shorter than one segment ({segment_len})"
        )));
    }
    if d == 0 {
        return Err(FlexError::Usage("series has no coordinates".into()));
    }
    let segments = length / segment_len;
    let bins = segment_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut acc = vec![0.0; bins];
    for column in series.columns() {
        for s in 0..segments {
            for (slot, &x) in buf
                .iter_mut()
                .zip(column.iter().skip(s * segment_len).take(segment_len))
            {
                *slot = Complex::new(x, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, x) in acc.iter_mut().zip(&buf) {
                *a += x.norm_sqr();
            }
        }
    }
    let norm = (segments * d * segment_len) as f64;
    Ok(PsdCurve {
        omegas: (0..bins)
            .map(|k| TAU * k as f64 / segment_len as f64)
            .collect(),
        values: acc.into_iter().map(|a| a / norm).collect(),
    })
}

/// `||estimate - reference|| / ||reference||` over matching bins.
pub fn relative_l2_error(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() || reference.is_empty() {
        return Err(crate::error::shape_err(
            format!("{} bins", reference.len()),
            estimate.len(),
        ));
    }
    let num: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    Ok((num / den).sqrt())
}
