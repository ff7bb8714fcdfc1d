use branchpde::engine::{
    estimate, estimate_gradient_all, grow_tree, EstimateOptions, EstimatorResult, TreeBudget,
    Welford,
};
use branchpde::model::{builtin_model, ModelParams, ModelSpec, PdeModel};
use branchpde::sampling::{GammaLifetime, RngStream, Subordinator};
use branchpde::specfun::lower_reg_gamma;

fn spec_model(json: &str) -> PdeModel {
    let spec: ModelSpec = serde_json::from_str(json).unwrap();
    PdeModel::from_spec(&spec, 1.0).unwrap()
}

/// φ(x) = x₁ clipped to [−10, 10], no forcing, c ≡ 0.
fn pure_heat(m: usize) -> PdeModel {
    let l = if m == 0 { "[1]" } else { "[1, 0]" };
    spec_model(&format!(
        r#"{{ "d": 1, "m": {m}, "alpha": 1.5,
             "terms": [{{"l": {l}, "coeff": "0", "sup": 0}}],
             "terminal": {{"phi": "x1 - pospart(x1 - 10) + pospart(-x1 - 10)", "sup": 10, "lipschitz": 1}} }}"#
    ))
}

fn strip_time(mut r: EstimatorResult) -> EstimatorResult {
    r.elapsed = 0.0;
    r
}

#[test]
fn linear_model_matches_feynman_kac() {
    let m = builtin_model("linear-test", &ModelParams::default()).unwrap();
    let r = estimate(&m, 0.5, &[0.0], 0, 1.0, &EstimateOptions::new(100_000, 42)).unwrap();
    let exact = 0.5f64.exp();
    assert!((exact - 1.648_721_270_700_128).abs() < 1e-15);
    assert!(r.z_score(exact) < 3.0, "{r:?}");
}

#[test]
fn pure_heat_derivative_is_one() {
    let m = pure_heat(0);
    let r = estimate(&m, 0.75, &[0.0], 1, 1.0, &EstimateOptions::new(200_000, 5)).unwrap();
    assert!(r.z_score(1.0) < 3.0, "{r:?}");
    let m1 = pure_heat(1);
    let g =
        estimate_gradient_all(&m1, 0.75, &[0.0], 1.0, &EstimateOptions::new(200_000, 6)).unwrap();
    assert_eq!(g.len(), 1);
    assert!(g[0].z_score(1.0) < 3.0, "{:?}", g[0]);
}

#[test]
fn integration_by_parts_weight_has_mean_zero() {
    let sub = Subordinator::new(1.5, 1.0).unwrap();
    let mut rng = RngStream::new(8, 8);
    let mut acc = Welford::new();
    let mut dx = [0.0; 2];
    let mut hits = 0;
    for _ in 0..1_000_000 {
        let ds = sub.increment_into(0.3, &mut rng, &mut dx, &mut hits);
        acc.push(dx[1] / ds);
    }
    assert!(
        acc.mean().abs() < 4.0 * acc.stderr(),
        "{} {}",
        acc.mean(),
        acc.stderr()
    );

    // fixed clock increment
    let ds: f64 = 0.05;
    let mut acc = Welford::new();
    let mut rng = RngStream::new(8, 9);
    for _ in 0..1_000_000 {
        let n: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        acc.push(ds.sqrt() * n / ds);
    }
    assert!(acc.mean().abs() < 4.0 * acc.stderr());
}

#[test]
fn stderr_scales_like_inverse_square_root() {
    let m = builtin_model("linear-test", &ModelParams::default()).unwrap();
    let ns = [1_000u64, 10_000, 100_000];
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let r = estimate(&m, 0.5, &[0.0], 0, 1.0, &EstimateOptions::new(n, 9)).unwrap();
            ((n as f64).ln(), r.stderr.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let m = builtin_model(
        "gradd",
        &ModelParams {
            d: 2,
            k: 2,
            ..ModelParams::default()
        },
    )
    .unwrap();
    let base = EstimateOptions::new(5_000, 123);
    let runs: Vec<_> = [1usize, 4, 8]
        .iter()
        .map(|&w| strip_time(estimate(&m, 0.5, &[0.3, -0.2], 1, 1.0, &base.workers(w)).unwrap()))
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(runs[0].mean.to_bits(), runs[2].mean.to_bits());
}

/// E[particles] for remaining time s solves N(s) = 1 + E|l| ∫₀ˢ ρ(r) N(s − r) dr,
/// discretised with exact cell weights F(r_{j+1}) − F(r_j).
fn expected_tree_size(delta: f64, mean_offspring: f64, s: f64, cells: usize) -> f64 {
    let h = s / cells as f64;
    let cdf: Vec<f64> = (0..=cells)
        .map(|j| lower_reg_gamma(delta, j as f64 * h).unwrap())
        .collect();
    let w: Vec<f64> = (0..cells).map(|j| cdf[j + 1] - cdf[j]).collect();
    let mut n = vec![1.0f64; cells + 1];
    for i in 1..=cells {
        let mut rhs = 1.0 + mean_offspring * w[0] * 0.5 * n[i - 1];
        for j in 1..i {
            rhs += mean_offspring * w[j] * 0.5 * (n[i - j] + n[i - j - 1]);
        }
        n[i] = rhs / (1.0 - mean_offspring * w[0] * 0.5);
    }
    n[cells]
}

#[test]
fn mean_tree_size_matches_renewal_equation() {
    let m = builtin_model(
        "nld",
        &ModelParams {
            k: 1,
            ..ModelParams::default()
        },
    )
    .unwrap();
    let coarse = expected_tree_size(0.5, 5.0 / 3.0, 0.1, 1000);
    let fine = expected_tree_size(0.5, 5.0 / 3.0, 0.1, 4000);
    assert!((coarse - fine).abs() < 1e-4, "{coarse} {fine}");
    let mut acc = Welford::new();
    for j in 0..200_000 {
        let mut rng = RngStream::new(31, j);
        let o = grow_tree(&m, 0.9, &[0.0], 0, 1.0, &mut rng, &TreeBudget::default()).unwrap();
        acc.push(o.particles_total as f64);
    }
    assert!(
        (acc.mean() - fine).abs() < 3.0 * acc.stderr(),
        "{} vs {fine} ({})",
        acc.mean(),
        acc.stderr()
    );

    // single-particle trees occur with probability F̄(0.1) + F(0.1)/3 (the l = (0) branch)
    let g = GammaLifetime::new(0.5).unwrap();
    let p1 = g.survival(0.1).unwrap() + (1.0 - g.survival(0.1).unwrap()) / 3.0;
    let mut ones = Welford::new();
    for j in 0..200_000 {
        let mut rng = RngStream::new(32, j);
        let o = grow_tree(&m, 0.9, &[0.0], 0, 1.0, &mut rng, &TreeBudget::default()).unwrap();
        ones.push(if o.particles_total == 1 { 1.0 } else { 0.0 });
    }
    assert!((ones.mean() - p1).abs() < 3.0 * ones.stderr());
}

#[test]
fn nld_at_the_figure_point() {
    let m = builtin_model(
        "nld",
        &ModelParams {
            k: 1,
            ..ModelParams::default()
        },
    )
    .unwrap();
    let opts = EstimateOptions::new(1_000_000, 2024);
    let r = estimate(&m, 0.9, &[0.0], 0, 1.0, &opts).unwrap();
    assert!(((-0.9f64).exp() - 0.406_569_66).abs() < 1e-8);
    assert!(r.z_score((-0.9f64).exp()) < 3.0, "{r:?}");
    let outside = estimate(&m, 0.9, &[1.2], 0, 1.0, &opts).unwrap();
    assert!(outside.z_score(0.0) < 3.0, "{outside:?}");
}

fn gradd() -> PdeModel {
    builtin_model(
        "gradd",
        &ModelParams {
            d: 2,
            k: 2,
            ..ModelParams::default()
        },
    )
    .unwrap()
}

#[test]
fn gradient_vanishes_at_the_centre() {
    let g = estimate_gradient_all(
        &gradd(),
        0.9,
        &[0.0, 0.0],
        1.0,
        &EstimateOptions::new(200_000, 77),
    )
    .unwrap();
    assert_eq!(g.len(), 2);
    for r in &g {
        assert!(r.z_score(0.0) < 3.0, "{r:?}");
    }
    assert_ne!(g[0].mean, g[1].mean);
}

#[test]
fn derivative_marks_agree_with_finite_differences() {
    let m = gradd();
    let h = 0.05;
    let n = 400_000;
    let mut rng = RngStream::new(99, 0);
    for p in 0..5u64 {
        // interior points with ‖x‖ ≤ 0.7
        let (r, a) = (
            0.7 * rng.open01().sqrt(),
            std::f64::consts::TAU * rng.open01(),
        );
        let x = [r * a.cos(), r * a.sin()];
        let seed = 1000 * (p + 1);
        let d1 = estimate(&m, 0.9, &x, 1, 1.0, &EstimateOptions::new(n, seed)).unwrap();
        let up = estimate(
            &m,
            0.9,
            &[x[0] + h, x[1]],
            0,
            1.0,
            &EstimateOptions::new(n, seed + 1),
        )
        .unwrap();
        let dn = estimate(
            &m,
            0.9,
            &[x[0] - h, x[1]],
            0,
            1.0,
            &EstimateOptions::new(n, seed + 2),
        )
        .unwrap();
        let fd = (up.mean - dn.mean) / (2.0 * h);
        let se =
            (d1.stderr.powi(2) + (up.stderr.powi(2) + dn.stderr.powi(2)) / (4.0 * h * h)).sqrt();
        assert!(
            (d1.mean - fd).abs() < 3.0 * se,
            "x={x:?}: {} vs {fd} (se {se})",
            d1.mean
        );
        // and against the exact gradient of e^{−t}(1 − ‖x‖²)^{2.75}
        let exact = -(-0.9f64).exp() * 5.5 * x[0] * (1.0 - r * r).powf(1.75);
        assert!(d1.z_score(exact) < 3.5, "x={x:?}: {} vs {exact}", d1.mean);
    }
}
