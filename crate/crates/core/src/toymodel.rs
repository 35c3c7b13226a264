//! Deterministic toy chunk-wise autoregressive denoiser.
//!
//! A single-layer, single-head attention block stands in for the denoising
//! network. Each chunk starts from antiphase noise, is relaxed for a fixed
//! number of steps against the current window context, and is then pushed
//! into the window. Rotary positions are global frame indices.
//!
//! The linear mixer path (`linear_mixer` / `pushforward_diff_energy`) is a
//! linear surrogate whose output covariance is known exactly.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::cache::{FrameEntry, KvWindow};
use crate::error::{shape_err, FlexError, Result};
use crate::metrics::MetricReport;
use crate::noise::{analytic_covariance, check_rho, chunk_diff_energy, sample_chunk, AnsParams};
use crate::rng::{RngStream, GENERATION_STREAM, WEIGHTS_STREAM};
use crate::rope::{ModulationMode, RopeSpec, RotaryTable};

/// Query, key and value projections, each `d x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyWeights {
    pub wq: Array2<f32>,
    pub wk: Array2<f32>,
    pub wv: Array2<f32>,
    pub seed: u64,
}

impl ToyWeights {
    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }
}

/// Gaussian entries scaled by `1/sqrt(d)`, drawn from the weights stream of `seed`.
pub fn init_weights(seed: u64, d: usize) -> Result<ToyWeights> {
    if d < 1 {
        return Err(FlexError::Config("model dimension must be >= 1".into()));
    }
    let mut rng = RngStream::new(seed, WEIGHTS_STREAM);
    let scale = 1.0 / (d as f64).sqrt();
    let mut draw =
        || Array2::from_shape_simple_fn((d, d), || (rng.standard_normal() * scale) as f32);
    let wq = draw();
    let wk = draw();
    let wv = draw();
    Ok(ToyWeights { wq, wk, wv, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseSchedule {
    pub steps: usize,
    pub step_gain: f32,
}

impl Default for DenoiseSchedule {
    fn default() -> Self {
        Self {
            steps: 4,
            step_gain: 0.5,
        }
    }
}

impl DenoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(FlexError::Config("schedule needs at least one step".into()));
        }
        if !(self.step_gain > 0.0 && self.step_gain <= 1.0) {
            return Err(FlexError::Config(format!(
                "step_gain must lie in (0, 1], got {}",
                self.step_gain
            )));
        }
        Ok(())
    }
}

/// Rotary setup shared by every denoise step of a run.
#[derive(Debug, Clone)]
pub struct RopeConfig {
    pub spec: RopeSpec,
    pub mode: ModulationMode,
    pub target_len: usize,
    table: RotaryTable,
}

impl RopeConfig {
    pub fn new(spec: RopeSpec, mode: ModulationMode, target_len: usize) -> Result<Self> {
        let table = RotaryTable::new(&spec, mode, target_len)?;
        Ok(Self {
            spec,
            mode,
            target_len,
            table,
        })
    }

    pub fn table(&self) -> &RotaryTable {
        &self.table
    }
}

fn project(w: &Array2<f32>, x: ndarray::ArrayView1<'_, f32>) -> Array1<f32> {
    w.dot(&x)
}

fn check_width(what: &str, got: usize, d: usize) -> Result<()> {
    if got != d {
        return Err(shape_err(format!("{what} of width {d}"), got));
    }
    Ok(())
}

/// One relaxation step of the chunk toward its attention output.
///
/// Row `u` of `chunk` sits at global index `chunk_start + u`. Queries come
/// from the chunk; keys and values from the context followed by chunk rows
/// `0..=u`. Returns `chunk + step_gain * (attention - chunk)`.
pub fn denoise_step(
    chunk: ArrayView2<'_, f32>,
    chunk_start: usize,
    context: &[FrameEntry],
    weights: &ToyWeights,
    rope: &RopeConfig,
    step_gain: f32,
) -> Result<Array2<f32>> {
    let d = weights.dim();
    check_width("chunk", chunk.ncols(), d)?;
    check_width("rotary embedding", rope.table.dim(), d)?;
    for entry in context {
        check_width("context payload", entry.payload.len(), d)?;
        if entry.global_index >= chunk_start {
            return Err(FlexError::Sequencing {
                expected: chunk_start,
                got: entry.global_index,
            });
        }
    }
    let table = &rope.table;
    let scale = 1.0 / (d as f32).sqrt();
    let rotated_key = |x: ndarray::ArrayView1<'_, f32>, pos: usize| -> Result<Array1<f32>> {
        let mut k = project(&weights.wk, x);
        table.rotate_in_place_f32(k.as_slice_mut().expect("contiguous"), pos as f64)?;
        Ok(k)
    };

    let mut keys = Vec::with_capacity(context.len() + chunk.nrows());
    let mut values = Vec::with_capacity(context.len() + chunk.nrows());
    for entry in context {
        let x = ndarray::ArrayView1::from(entry.payload.as_slice());
        keys.push(rotated_key(x, entry.global_index)?);
        values.push(project(&weights.wv, x));
    }
    for (u, x) in chunk.axis_iter(Axis(0)).enumerate() {
        keys.push(rotated_key(x, chunk_start + u)?);
        values.push(project(&weights.wv, x));
    }

    let mut out = chunk.to_owned();
    let mut logits = Vec::with_capacity(keys.len());
    for (u, x) in chunk.axis_iter(Axis(0)).enumerate() {
        let mut q = project(&weights.wq, x);
        table.rotate_in_place_f32(
            q.as_slice_mut().expect("contiguous"),
            (chunk_start + u) as f64,
        )?;
        let visible = context.len() + u + 1;
        logits.clear();
        logits.extend(keys[..visible].iter().map(|k| q.dot(k) * scale));
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut total = 0.0f32;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        let mut attended = Array1::<f32>::zeros(d);
        for (p, v) in logits.iter().zip(&values[..visible]) {
            attended.scaled_add(*p / total, v);
        }
        let mut row = out.row_mut(u);
        row.zip_mut_with(&attended, |o, &a| *o += step_gain * (a - *o));
    }
    Ok(out)
}

/// End-to-end settings for one toy generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub rope: RopeSpec,
    pub mode: ModulationMode,
    pub ans: AnsParams,
    pub window_w: usize,
    pub chunk_f: usize,
    pub sink_n: usize,
    pub target_len: usize,
    pub schedule: DenoiseSchedule,
    pub model_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rope: RopeSpec::default(),
            mode: ModulationMode::FlexNtkByParts,
            ans: AnsParams::default(),
            window_w: 9,
            chunk_f: 3,
            sink_n: 3,
            target_len: 84,
            schedule: DenoiseSchedule::default(),
            model_seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Gate thresholds and correlation used when grafting onto a model that
    /// was itself tuned on long rollouts.
    pub fn longlive_preset() -> Self {
        Self {
            rope: RopeSpec {
                alpha: 1.0,
                beta: 15.0,
                ..RopeSpec::default()
            },
            ans: AnsParams {
                rho: -1.0,
                ..AnsParams::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rope.validate()?;
        self.ans.validate()?;
        self.schedule.validate()?;
        if self.chunk_f != self.ans.f {
            return Err(FlexError::Config(format!(
                "chunk_f ({}) must equal the noise chunk length ({})",
                self.chunk_f, self.ans.f
            )));
        }
        if self.rope.d_f != self.ans.d {
            return Err(FlexError::Config(format!(
                "rotary dimension ({}) must equal the latent dimension ({})",
                self.rope.d_f, self.ans.d
            )));
        }
        if self.target_len == 0 || !self.target_len.is_multiple_of(self.chunk_f) {
            return Err(FlexError::Config(format!(
                "target length {} must be a positive multiple of the chunk size {}",
                self.target_len, self.chunk_f
            )));
        }
        KvWindow::new(self.window_w, self.chunk_f, self.sink_n)?;
        Ok(())
    }
}

/// Recorded output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    /// `target_len x d`, row `n` is global frame `n`.
    pub frames: Array2<f32>,
    /// Context indices each chunk was denoised against, one entry per chunk.
    pub per_step_contexts: Vec<Vec<usize>>,
    pub drift_curve: Vec<Option<f64>>,
    pub metrics: BTreeMap<String, f64>,
}

/// Runs the chunk-wise loop: sample noise, relax against the window, push.
pub fn generate(config: &PipelineConfig) -> Result<GenerationTrace> {
    config.validate()?;
    let d = config.ans.d;
    let f = config.chunk_f;
    let weights = init_weights(config.model_seed, d)?;
    let rope = RopeConfig::new(config.rope, config.mode, config.target_len)?;
    let mut window = KvWindow::new(config.window_w, f, config.sink_n)?;
    let mut rng = RngStream::new(config.ans.seed, GENERATION_STREAM);

    let chunks = config.target_len / f;
    let mut frames = Array2::<f32>::zeros((config.target_len, d));
    let mut contexts = Vec::with_capacity(chunks);
    let mut noise_energy = 0.0;
    let mut chunk_energy = 0.0;

    for i in 0..chunks {
        let start = i * f;
        let noise = sample_chunk(&config.ans, &mut rng)?;
        noise_energy += chunk_diff_energy(noise.frames.view());
        let mut chunk = noise.frames.mapv(|x| x as f32);
        let context = window.context();
        contexts.push(context.iter().map(|e| e.global_index).collect());
        for _ in 0..config.schedule.steps {
            chunk = denoise_step(
                chunk.view(),
                start,
                &context,
                &weights,
                &rope,
                config.schedule.step_gain,
            )?;
        }
        chunk_energy += crate::metrics::adjacent_diff_energy(chunk.view());
        frames
            .slice_mut(ndarray::s![start..start + f, ..])
            .assign(&chunk);
        window.push_chunk(
            chunk
                .axis_iter(Axis(0))
                .enumerate()
                .map(|(u, row)| FrameEntry::new(start + u, row.to_vec()))
                .collect(),
        )?;
    }

    let report = MetricReport::compute(frames.view(), f)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("adjacent_energy".to_string(), report.adjacent_energy);
    metrics.insert(
        "mean_chunk_energy".to_string(),
        chunk_energy / chunks as f64,
    );
    metrics.insert(
        "init_noise_energy".to_string(),
        noise_energy / chunks as f64,
    );
    metrics.insert("scale_s".to_string(), rope.table().scale());
    if let Some(mean) = report.mean_drift {
        metrics.insert("mean_drift".to_string(), mean);
    }
    if let Some(Some(last)) = report.drift_curve.last() {
        metrics.insert("final_drift".to_string(), *last);
    }
    Ok(GenerationTrace {
        frames,
        per_step_contexts: contexts,
        drift_curve: report.drift_curve,
        metrics,
    })
}

/// `mix . chunk` for an `f x f` mixing matrix.
pub fn linear_mixer(chunk: ArrayView2<'_, f64>, mix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if mix.ncols() != chunk.nrows() {
        return Err(shape_err(
            format!("mixer with {} columns", chunk.nrows()),
            format!("{}x{}", mix.nrows(), mix.ncols()),
        ));
    }
    Ok(mix.dot(&chunk))
}

/// Exact expected adjacent-difference energy of `mix . Z` for ANS noise `Z`:
/// `Tr(D M Sigma(rho) (D M)^T) * d`, with `D` the first-difference operator.
pub fn pushforward_diff_energy(mix: ArrayView2<'_, f64>, rho: f64, d: usize) -> Result<f64> {
    check_rho(rho)?;
    let f = mix.ncols();
    if mix.nrows() != f || f == 0 {
        return Err(shape_err("square mixer", format!("{}x{}", mix.nrows(), f)));
    }
    let sigma = analytic_covariance(&AnsParams {
        rho,
        f,
        d: d.max(1),
        seed: 0,
    })?;
    let rows = mix.nrows();
    let dm = Array2::from_shape_fn((rows.saturating_sub(1), f), |(u, j)| {
        mix[[u + 1, j]] - mix[[u, j]]
    });
    let dms = dm.dot(&sigma);
    let trace: f64 = dms.iter().zip(dm.iter()).map(|(a, b)| a * b).sum();
    Ok(trace * d as f64)
}
