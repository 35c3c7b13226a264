//! Property and Monte-Carlo checks across the public API.

use std::collections::BTreeSet;

use flex_core::cache::{FrameEntry, KvWindow};
use flex_core::noise::{monte_carlo_stats, AnsParams};
use flex_core::rng::RngStream;
use flex_core::rope::{self, ModulationMode, RopeSpec, RotaryTable};
use flex_core::toymodel::{
    denoise_step, generate, init_weights, linear_mixer, pushforward_diff_energy, PipelineConfig,
    RopeConfig,
};
use flex_core::{adjacent_diff_energy, drift_proxy, sample_chunk, spectral};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

fn spec_strategy() -> impl Strategy<Value = RopeSpec> {
    (
        1usize..=32,
        2.0f64..1e5,
        1usize..64,
        0.0f64..2.0,
        0.01f64..10.0,
    )
        .prop_map(|(planes, base, l_train, alpha, width)| RopeSpec {
            d_f: 2 * planes,
            base,
            l_train,
            alpha,
            beta: alpha + width,
        })
}

/// Context a window should expose after frames `0..generated`, recomputed
/// from the full history.
fn brute_force_context(w: usize, f: usize, n: usize, generated: usize) -> Vec<usize> {
    let sink: Vec<usize> = (0..generated.min(n)).collect();
    let budget = w - f - sink.len();
    let others: Vec<usize> = (n.min(generated)..generated).collect();
    let rolling = &others[others.len().saturating_sub(budget)..];
    sink.into_iter().chain(rolling.iter().copied()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_failure_persistence(FileFailurePersistence::WithSource("regressions")))]

    #[test]
    fn frequency_ladder_is_monotone(spec in spec_strategy()) {
        let thetas = rope::plane_frequencies(&spec).unwrap();
        prop_assert_eq!(thetas[0], 1.0);
        prop_assert!(thetas.windows(2).all(|w| w[1] < w[0]));
        let exp = rope::exposure_table(&spec).unwrap();
        prop_assert!(exp.windows(2).all(|w| w[1].lambda > w[0].lambda));
    }

    #[test]
    fn modulation_is_identity_within_horizon(spec in spec_strategy(), frac in 0.0f64..=1.0) {
        let l = ((spec.l_train as f64 * frac).round() as usize).max(1);
        let (s, modulated) = rope::modulated_frequencies(&spec, l).unwrap();
        prop_assert_eq!(s, 1.0);
        let base = rope::plane_frequencies(&spec).unwrap();
        for (a, b) in modulated.iter().zip(&base) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn modulation_sandwich(spec in spec_strategy(), factor in 1usize..40) {
        let l = spec.l_train * factor;
        let (s, modulated) = rope::modulated_frequencies(&spec, l).unwrap();
        let base = rope::plane_frequencies(&spec).unwrap();
        for (h, t) in modulated.iter().zip(&base) {
            prop_assert!(*h <= *t && *h >= t / s, "{} not in [{}, {}]", h, t / s, t);
        }
    }

    #[test]
    fn gate_is_continuous(alpha in 0.0f64..3.0, width in 1e-3f64..5.0, r in 0.0f64..10.0) {
        let beta = alpha + width;
        let g = rope::gate(r, alpha, beta).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        let eps = 1e-9;
        let step = (rope::gate(r + eps, alpha, beta).unwrap() - g).abs();
        prop_assert!(step <= eps / width + 1e-12);
        prop_assert_eq!(rope::gate(alpha, alpha, beta).unwrap(), 0.0);
        prop_assert_eq!(rope::gate(beta, alpha, beta).unwrap(), 1.0);
    }

    #[test]
    fn rotation_preserves_pair_norms(
        v in proptest::collection::vec(-10.0f64..10.0, 16),
        n in 0u64..10_000,
        l in 1usize..500,
        mode_idx in 0usize..3,
    ) {
        let spec = RopeSpec::default();
        let mode = ModulationMode::ALL[mode_idx];
        let r = rope::apply_rotary(&v, &spec, mode, n, l).unwrap();
        for (a, b) in v.chunks(2).zip(r.chunks(2)) {
            let na = a[0].hypot(a[1]);
            let nb = b[0].hypot(b[1]);
            prop_assert!((na - nb).abs() <= 1e-12 * na.max(1e-300), "{na} vs {nb}");
        }
    }

    #[test]
    fn logits_depend_only_on_offset(
        q in proptest::collection::vec(-1.0f64..1.0, 16),
        k in proptest::collection::vec(-1.0f64..1.0, 16),
        nq in 0u64..500, nk in 0u64..500, shift in 0u64..5000,
        mode_idx in 0usize..3,
    ) {
        let spec = RopeSpec::default();
        let table = RotaryTable::new(&spec, ModulationMode::ALL[mode_idx], 126).unwrap();
        let a = rope::table_logit(&table, &q, &k, nq as f64, nk as f64).unwrap();
        let b = rope::table_logit(&table, &q, &k, (nq + shift) as f64, (nk + shift) as f64).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn window_matches_brute_force(f in 1usize..6, extra in 0usize..10, n_frac in 0.0f64..=1.0, chunks in 1usize..40) {
        let n = ((extra as f64) * n_frac).floor() as usize;
        let w = f + extra;
        let mut win = KvWindow::new(w, f, n).unwrap();
        let mut sink_seen = BTreeSet::new();
        for c in 0..chunks {
            let frames = (c * f..(c + 1) * f).map(|i| FrameEntry::new(i, vec![])).collect();
            win.push_chunk(frames).unwrap();
            let ctx = win.context_indices();
            prop_assert_eq!(&ctx, &brute_force_context(w, f, n, (c + 1) * f));
            prop_assert!(ctx.len() <= w - f);
            prop_assert!(ctx.windows(2).all(|p| p[0] < p[1]));
            sink_seen.extend(ctx.iter().copied().filter(|&i| i < n));
            for &s in &sink_seen {
                prop_assert!(ctx.contains(&s));
            }
        }
    }

    #[test]
    fn drift_is_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
        let mut rng = RngStream::new(seed, 0);
        let frames = Array2::from_shape_simple_fn((12, 5), || rng.standard_normal());
        let scaled = frames.mapv(|x| x * c);
        let a = drift_proxy(frames.view(), 3).unwrap();
        let b = drift_proxy(scaled.view(), 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_is_zero_iff_rows_repeat(seed in 0u64..1000, rows in 1usize..8) {
        let mut rng = RngStream::new(seed, 0);
        let row: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
        let mut frames = Array2::from_shape_fn((rows, 4), |(_, j)| row[j]);
        prop_assert_eq!(adjacent_diff_energy(frames.view()), 0.0);
        if rows > 1 {
            frames[[rows - 1, 0]] += 0.5;
            prop_assert!(adjacent_diff_energy(frames.view()) > 0.0);
        }
    }
}

#[test]
fn analytic_energy_strictly_decreasing() {
    let grid: Vec<f64> = (-10..=10).map(|i| i as f64 / 10.0).collect();
    let e: Vec<f64> = grid
        .iter()
        .map(|&rho| {
            flex_core::analytic_energy(&AnsParams {
                rho,
                f: 8,
                d: 64,
                seed: 0,
            })
            .unwrap()
        })
        .collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn marginals_are_standard_for_every_rho() {
    // 20000 draws: std of a mean is 0.007 and of a variance 0.010, so the
    // +-0.05 and [0.95, 1.05] bands sit beyond 5 sigma.
    for rho in [-1.0, -0.8, -0.5, 0.0, 0.5, 1.0] {
        let params = AnsParams {
            rho,
            f: 4,
            d: 16,
            seed: 77,
        };
        let m = monte_carlo_stats(&params, 20_000, 1000)
            .unwrap()
            .marginals()
            .unwrap();
        assert!(m.mean.iter().all(|x| x.abs() <= 0.05), "rho={rho}");
        assert!(
            m.variance.iter().all(|v| (0.95..=1.05).contains(v)),
            "rho={rho}"
        );
    }
}

#[test]
fn empirical_energy_non_increasing_in_rho() {
    let grid = [-1.0, -0.8, -0.5, 0.0, 0.5, 1.0];
    let e: Vec<f64> = grid
        .iter()
        .map(|&rho| {
            let p = AnsParams {
                rho,
                f: 8,
                d: 16,
                seed: 5,
            };
            monte_carlo_stats(&p, 5000, 1000)
                .unwrap()
                .mean_energy()
                .unwrap()
        })
        .collect();
    for w in e.windows(2) {
        assert!(w[1] <= w[0] * 1.02, "{e:?}");
    }
}

#[test]
fn parseval_ties_to_energy_law() {
    for rho in [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9] {
        let (f, d) = (8usize, 64usize);
        let per_dim = spectral::parseval_energy(rho, 1024).unwrap();
        let closed = flex_core::analytic_energy(&AnsParams { rho, f, d, seed: 0 }).unwrap();
        let tied = per_dim * d as f64 * (f - 1) as f64;
        assert!((tied - closed).abs() <= 1e-9 * closed, "rho={rho}");
    }
}

#[test]
fn model_is_shift_invariant() {
    let d = 16;
    let weights = init_weights(9, d).unwrap();
    let mut rng = RngStream::new(4, 0);
    let chunk = Array2::from_shape_simple_fn((3, d), || rng.standard_normal() as f32);
    let ctx_payloads: Vec<Vec<f32>> = (0..6)
        .map(|_| (0..d).map(|_| rng.standard_normal() as f32).collect())
        .collect();
    let indices = [0usize, 1, 2, 9, 10, 11];
    for mode in ModulationMode::ALL {
        let rope = RopeConfig::new(RopeSpec::default(), mode, 84).unwrap();
        let run = |offset: usize| {
            let ctx: Vec<FrameEntry> = indices
                .iter()
                .zip(&ctx_payloads)
                .map(|(&i, p)| FrameEntry::new(i + offset, p.clone()))
                .collect();
            denoise_step(chunk.view(), 12 + offset, &ctx, &weights, &rope, 0.5).unwrap()
        };
        let base = run(0);
        for offset in [1, 7, 50, 300] {
            let shifted = run(offset);
            let worst = base
                .iter()
                .zip(shifted.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(worst <= 1e-4, "{mode} offset {offset}: {worst}");
        }
    }
}

#[test]
fn pipeline_keeps_sink_frames() {
    let cfg = PipelineConfig::default();
    let trace = generate(&cfg).unwrap();
    assert_eq!(trace.frames.nrows(), 84);
    let capacity = cfg.window_w - cfg.chunk_f;
    let mut overflowed = false;
    for (i, ctx) in trace.per_step_contexts.iter().enumerate() {
        assert!(ctx.len() <= capacity);
        if i * cfg.chunk_f > capacity {
            overflowed = true;
            assert_eq!(&ctx[..3], &[0, 1, 2], "chunk {i}: {ctx:?}");
        }
    }
    assert!(overflowed);
}

#[test]
fn mixer_energy_matches_pushforward() {
    let (f, d) = (4usize, 8usize);
    let mut mix_rng = RngStream::new(31, 0);
    let mix = Array2::from_shape_simple_fn((f, f), || mix_rng.standard_normal());
    for rho in [-0.8, 0.0, 0.8] {
        let params = AnsParams { rho, f, d, seed: 3 };
        let mut rng = RngStream::new(3, 0);
        let mut total = 0.0;
        let samples = 20_000;
        for _ in 0..samples {
            let z = sample_chunk(&params, &mut rng).unwrap();
            total +=
                adjacent_diff_energy(linear_mixer(z.frames.view(), mix.view()).unwrap().view());
        }
        let empirical = total / samples as f64;
        let exact = pushforward_diff_energy(mix.view(), rho, d).unwrap();
        assert!(
            (empirical - exact).abs() / exact <= 0.03,
            "rho={rho}: {empirical} vs {exact}"
        );
    }
}

#[test]
fn near_identity_mixers_lose_energy_as_rho_grows() {
    // Energy is a polynomial in rho with coefficients from (DM)^T DM; for
    // unconstrained Gaussian mixes it is not monotone. Mixes close to the
    // identity inherit the strictly decreasing identity slope; at 0.125
    // perturbation scale counterexamples already appear (seed 17 here).
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let f = 4;
    for seed in 0..200 {
        let mut rng = RngStream::new(seed, 0);
        let mix = Array2::<f64>::eye(f)
            + Array2::from_shape_simple_fn((f, f), || 0.05 * rng.standard_normal());
        let e: Vec<f64> = grid
            .iter()
            .map(|&r| pushforward_diff_energy(mix.view(), r, 8).unwrap())
            .collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {e:?}");
    }
}

#[test]
fn gaussian_mixers_can_break_monotonicity() {
    // seed 2 of this family rises from rho=-1 to rho=0
    let mut rng = RngStream::new(2, 0);
    let mix = Array2::from_shape_simple_fn((4, 4), || rng.standard_normal());
    let lo = pushforward_diff_energy(mix.view(), -1.0, 8).unwrap();
    let mid = pushforward_diff_energy(mix.view(), 0.0, 8).unwrap();
    assert!(mid > lo);
}

#[test]
fn drift_of_random_walk_trends_down() {
    // average over 100 walks; similarity to the opening chunk should decay
    let chunks = 10;
    let mut curve = vec![0.0; chunks];
    for seed in 0..100 {
        let mut rng = RngStream::new(seed, 0);
        let mut frames = Array2::<f64>::zeros((chunks * 3, 8));
        for u in 1..chunks * 3 {
            for j in 0..8 {
                frames[[u, j]] = frames[[u - 1, j]] + rng.standard_normal();
            }
        }
        for j in 0..8 {
            frames[[0, j]] = rng.standard_normal();
        }
        for (acc, v) in curve.iter_mut().zip(drift_proxy(frames.view(), 3).unwrap()) {
            *acc += v.unwrap() / 100.0;
        }
    }
    assert!((curve[0] - 1.0).abs() < 1e-12);
    assert!(curve[chunks - 1] < curve[1], "{curve:?}");
    let late: f64 = curve[chunks / 2..].iter().sum::<f64>() / (chunks - chunks / 2) as f64;
    let early: f64 = curve[1..chunks / 2].iter().sum::<f64>() / (chunks / 2 - 1) as f64;
    assert!(late < early, "{curve:?}");
}

#[test]
fn toy_dynamics_trend() {
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut means = Vec::new();
    for &rho in &grid {
        let mut total = 0.0;
        for seed in 0..20u64 {
            let mut cfg = PipelineConfig::default();
            cfg.ans.rho = rho;
            cfg.ans.seed = seed;
            total += generate(&cfg).unwrap().metrics["adjacent_energy"];
        }
        means.push(total / 20.0);
    }
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
    assert!(means[4] < means[0]);
}
