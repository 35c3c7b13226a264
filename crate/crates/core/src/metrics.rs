//! Desk-scale temporal-quality proxies computed on generated frame sequences.
//!
//! These are stand-ins, not perceptual scores: `adjacent_diff_energy` tracks
//! motion magnitude and `drift_proxy` tracks how far later chunks wander
//! from the opening chunk.

use ndarray::{Array1, ArrayView2};

use crate::error::{FlexError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub adjacent_energy: f64,
    /// Cosine similarity of each chunk mean to the first chunk mean;
    /// `None` where either mean has zero norm.
    pub drift_curve: Vec<Option<f64>>,
    /// Mean of the defined drift entries.
    pub mean_drift: Option<f64>,
}

impl MetricReport {
    pub fn compute<T: Copy + Into<f64>>(
        frames: ArrayView2<'_, T>,
        chunk_len: usize,
    ) -> Result<Self> {
        let drift_curve = drift_proxy(frames, chunk_len)?;
        let defined: Vec<f64> = drift_curve.iter().flatten().copied().collect();
        let mean_drift =
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Ok(Self {
            adjacent_energy: adjacent_diff_energy(frames),
            drift_curve,
            mean_drift,
        })
    }
}

/// `sum_u ||x_u - x_{u-1}||^2` over consecutive rows.
pub fn adjacent_diff_energy<T: Copy + Into<f64>>(frames: ArrayView2<'_, T>) -> f64 {
    let rows = frames.nrows();
    (1..rows)
        .map(|u| {
            frames
                .row(u)
                .iter()
                .zip(frames.row(u - 1).iter())
                .map(|(&a, &b)| {
                    let diff = a.into() - b.into();
                    diff * diff
                })
                .sum::<f64>()
        })
        .sum()
}

fn block_means<T: Copy + Into<f64>>(frames: ArrayView2<'_, T>, block: usize) -> Vec<Array1<f64>> {
    let d = frames.ncols();
    frames
        .axis_chunks_iter(ndarray::Axis(0), block)
        .map(|rows| {
            let mut mean = Array1::<f64>::zeros(d);
            for row in rows.rows() {
                for (m, &x) in mean.iter_mut().zip(row.iter()) {
                    *m += x.into();
                }
            }
            mean / rows.nrows() as f64
        })
        .collect()
}

fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> Option<f64> {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Per-chunk cosine similarity of the chunk mean against the first chunk mean.
///
/// Rows are grouped into consecutive blocks of `ref_chunk_len`; a trailing
/// partial block is averaged over the rows it has.
pub fn drift_proxy<T: Copy + Into<f64>>(
    frames: ArrayView2<'_, T>,
    ref_chunk_len: usize,
) -> Result<Vec<Option<f64>>> {
    if ref_chunk_len < 1 {
        return Err(FlexError::Usage(
            "reference chunk length must be >= 1".into(),
        ));
    }
    if frames.nrows() < ref_chunk_len {
        return Err(FlexError::Usage(format!(
            "need at least {ref_chunk_len} frames, got {}",
            frames.nrows()
        )));
    }
    let means = block_means(frames, ref_chunk_len);
    let reference = &means[0];
    Ok(means.iter().map(|m| cosine(reference, m)).collect())
}
