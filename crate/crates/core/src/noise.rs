//! Antiphase noise sampling: AR(1)-correlated Gaussian chunk initialization.
//!
//! Within a chunk of `f` latent frames the first frame is standard normal
//! and every later frame follows
//!
//! ```text
//! z_u = rho * z_{u-1} + sqrt(1 - rho^2) * eps_u,    eps_u ~ N(0, I)
//! ```
//!
//! so each frame stays marginally `N(0, I)` while `Cov(z_u, z_v) = rho^|u-v| I`.
//! Consecutive chunks draw fresh innovations from the same stream and are
//! independent of each other.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, FlexError, Result};
use crate::rng::{RngStream, MONTE_CARLO_STREAM_BASE};

/// Minimum number of chunks accepted by [`empirical_covariance`].
pub const MIN_COVARIANCE_CHUNKS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsParams {
    /// Correlation between adjacent frames, in `[-1, 1]`.
    pub rho: f64,
    /// Chunk length in latent frames.
    pub f: usize,
    /// Latent dimension per frame.
    pub d: usize,
    pub seed: u64,
}

impl Default for AnsParams {
    fn default() -> Self {
        Self {
            rho: -1.0,
            f: 3,
            d: 16,
            seed: 0,
        }
    }
}

impl AnsParams {
    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if self.f < 1 {
            return Err(FlexError::Parameter("chunk length f must be >= 1".into()));
        }
        if self.d < 1 {
            return Err(FlexError::Parameter(
                "latent dimension d must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(FlexError::Parameter(format!(
            "rho must lie in [-1, 1], got {rho}"
        )));
    }
    Ok(())
}

/// One chunk of initial noise; row `u` is frame `z_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChunk {
    pub frames: Array2<f64>,
}

impl NoiseChunk {
    pub fn f(&self) -> usize {
        self.frames.nrows()
    }

    pub fn d(&self) -> usize {
        self.frames.ncols()
    }
}

fn ar1_fill(rho: f64, rows: usize, d: usize, rng: &mut RngStream) -> Array2<f64> {
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    let mut out = Array2::<f64>::zeros((rows, d));
    {
        let slice = out.as_slice_mut().expect("standard layout");
        rng.fill_standard_normal(&mut slice[..d]);
        for u in 1..rows {
            let (prev, cur) = slice[(u - 1) * d..(u + 1) * d].split_at_mut(d);
            for (z, &p) in cur.iter_mut().zip(prev.iter()) {
                let eps = rng.standard_normal();
                *z = rho * p + innovation * eps;
            }
        }
    }
    out
}

/// Draws one chunk from the AR(1) recursion.
pub fn sample_chunk(params: &AnsParams, rng: &mut RngStream) -> Result<NoiseChunk> {
    params.validate()?;
    Ok(NoiseChunk {
        frames: ar1_fill(params.rho, params.f, params.d, rng),
    })
}

/// Long AR(1) run under the same recursion, for spectral estimation.
pub fn sample_series(
    rho: f64,
    length: usize,
    d: usize,
    rng: &mut RngStream,
) -> Result<Array2<f64>> {
    check_rho(rho)?;
    if length < 2 {
        return Err(FlexError::Usage(format!(
            "series length must be >= 2, got {length}"
        )));
    }
    if d < 1 {
        return Err(FlexError::Parameter(
            "latent dimension d must be >= 1".into(),
        ));
    }
    Ok(ar1_fill(rho, length, d, rng))
}

/// `rho^|u-v|` for `u, v < f`.
pub fn analytic_covariance(params: &AnsParams) -> Result<Array2<f64>> {
    params.validate()?;
    Ok(Array2::from_shape_fn((params.f, params.f), |(u, v)| {
        params.rho.powi(u.abs_diff(v) as i32)
    }))
}

/// Expected adjacent-difference energy `2 (f-1)(1-rho) d`.
pub fn analytic_energy(params: &AnsParams) -> Result<f64> {
    params.validate()?;
    Ok(2.0 * (params.f - 1) as f64 * (1.0 - params.rho) * params.d as f64)
}

/// Sum of squared differences between consecutive rows.
pub fn chunk_diff_energy(frames: ArrayView2<'_, f64>) -> f64 {
    frames
        .rows()
        .into_iter()
        .zip(frames.rows().into_iter().skip(1))
        .map(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| (y - x) * (y - x))
                .sum::<f64>()
        })
        .sum()
}

/// Streaming moments of a set of equally shaped chunks.
///
/// Accumulates everything the Monte-Carlo checks need so batches can be
/// sampled, reduced and discarded without holding every chunk in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStats {
    f: usize,
    d: usize,
    count: usize,
    energy_sum: f64,
    /// `sum over chunks and coordinates of z_u[j] * z_v[j]`, f x f.
    cross: Array2<f64>,
    /// per (row, coordinate) sums and squared sums, f x d.
    sum: Array2<f64>,
    sum_sq: Array2<f64>,
}

/// Per-row, per-coordinate sample mean and (population) variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub mean: Array2<f64>,
    pub variance: Array2<f64>,
}

impl ChunkStats {
    pub fn new(f: usize, d: usize) -> Self {
        Self {
            f,
            d,
            count: 0,
            energy_sum: 0.0,
            cross: Array2::zeros((f, f)),
            sum: Array2::zeros((f, d)),
            sum_sq: Array2::zeros((f, d)),
        }
    }

    pub fn from_chunks(chunks: &[NoiseChunk]) -> Result<Self> {
        let first = chunks
            .first()
            .ok_or_else(|| FlexError::Usage("at least one chunk is required".into()))?;
        let mut stats = Self::new(first.f(), first.d());
        for c in chunks {
            stats.push(c)?;
        }
        Ok(stats)
    }

    pub fn push(&mut self, chunk: &NoiseChunk) -> Result<()> {
        if chunk.frames.dim() != (self.f, self.d) {
            return Err(shape_err(
                format!("{}x{} chunk", self.f, self.d),
                format!("{}x{}", chunk.f(), chunk.d()),
            ));
        }
        let z = &chunk.frames;
        self.count += 1;
        self.energy_sum += chunk_diff_energy(z.view());
        for u in 0..self.f {
            for v in u..self.f {
                let dot: f64 = z.row(u).dot(&z.row(v));
                self.cross[[u, v]] += dot;
                if u != v {
                    self.cross[[v, u]] += dot;
                }
            }
        }
        self.sum += z;
        self.sum_sq.zip_mut_with(z, |acc, &x| *acc += x * x);
        Ok(())
    }

    pub fn merge(&mut self, other: &ChunkStats) -> Result<()> {
        if (other.f, other.d) != (self.f, self.d) {
            return Err(shape_err(
                format!("{}x{} stats", self.f, self.d),
                format!("{}x{}", other.f, other.d),
            ));
        }
        self.count += other.count;
        self.energy_sum += other.energy_sum;
        self.cross += &other.cross;
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean_energy(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(FlexError::Usage("no chunks accumulated".into()));
        }
        Ok(self.energy_sum / self.count as f64)
    }

    pub fn covariance(&self) -> Result<Array2<f64>> {
        if self.count < MIN_COVARIANCE_CHUNKS {
            return Err(FlexError::Usage(format!(
                "empirical covariance needs >= {MIN_COVARIANCE_CHUNKS} chunks, got {}",
                self.count
            )));
        }
        Ok(&self.cross / (self.count * self.d) as f64)
    }

    pub fn marginals(&self) -> Result<Marginals> {
        if self.count == 0 {
            return Err(FlexError::Usage("no chunks accumulated".into()));
        }
        let n = self.count as f64;
        let mean = &self.sum / n;
        let variance = Array2::from_shape_fn((self.f, self.d), |(u, j)| {
            self.sum_sq[[u, j]] / n - mean[[u, j]] * mean[[u, j]]
        });
        Ok(Marginals { mean, variance })
    }
}

/// Mean over chunks of the adjacent-difference energy.
pub fn empirical_energy(chunks: &[NoiseChunk]) -> Result<f64> {
    ChunkStats::from_chunks(chunks)?.mean_energy()
}

/// Average over chunks and coordinates of `z_u[j] * z_v[j]`.
pub fn empirical_covariance(chunks: &[NoiseChunk]) -> Result<Array2<f64>> {
    if chunks.len() < MIN_COVARIANCE_CHUNKS {
        return Err(FlexError::Usage(format!(
            "empirical covariance needs >= {MIN_COVARIANCE_CHUNKS} chunks, got {}",
            chunks.len()
        )));
    }
    ChunkStats::from_chunks(chunks)?.covariance()
}

/// Samples `chunks` chunks in parallel batches and reduces their moments.
///
/// Batch `b` draws from stream `MONTE_CARLO_STREAM_BASE + b` of
/// `params.seed`, and batches are merged in index order, so the result is
/// independent of thread scheduling.
pub fn monte_carlo_stats(
    params: &AnsParams,
    chunks: usize,
    batch_size: usize,
) -> Result<ChunkStats> {
    params.validate()?;
    if chunks == 0 || batch_size == 0 {
        return Err(FlexError::Usage(
            "chunk and batch counts must be positive".into(),
        ));
    }
    let batches = chunks.div_ceil(batch_size);
    let partials: Vec<ChunkStats> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(params.seed, MONTE_CARLO_STREAM_BASE + b as u64);
            let n = batch_size.min(chunks - b * batch_size);
            let mut stats = ChunkStats::new(params.f, params.d);
            for _ in 0..n {
                let chunk = NoiseChunk {
                    frames: ar1_fill(params.rho, params.f, params.d, &mut rng),
                };
                stats.push(&chunk).expect("shape fixed by params");
            }
            stats
        })
        .collect();
    let mut total = ChunkStats::new(params.f, params.d);
    for p in &partials {
        total.merge(p)?;
    }
    Ok(total)
}
