mod common;

use common::{grid, weighted_normal_equations};
use proptest::prelude::*;
use spatial_gof::goftest::{
    asymptotic_constants, bootstrap_p_value, bootstrap_test, compute_tn, significance_trace, AsymptoticInputs,
    DesignDensity, QuadratureGrid, StatisticOperator, TestConfig, TraceEntry, WeightFunction,
};
use spatial_gof::trend::ols_fit;
use spatial_gof::{BandwidthMatrix, KernelFamily, KernelSpec, SpatialDataset, TrendModel, VariogramFamily};

fn triweight_1d(u: f64) -> f64 {
    if u.abs() < 1.0 {
        35.0 / 32.0 * (1.0 - u * u).powi(3)
    } else {
        0.0
    }
}

/// Local linear intercept at `x` by an explicit weighted normal-equations
/// solve with the multiplicative triweight kernel.
fn local_linear_oracle(pts: &[[f64; 2]], z: &[f64], h: f64, x: [f64; 2]) -> f64 {
    let shifted: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] - x[0], p[1] - x[1]]).collect();
    let w: Vec<f64> = shifted.iter().map(|p| triweight_1d(p[0] / h) * triweight_1d(p[1] / h)).collect();
    weighted_normal_equations(&shifted, z, &w)[0]
}

fn points(data: &SpatialDataset) -> Vec<[f64; 2]> {
    data.locations().chunks(2).map(|p| [p[0], p[1]]).collect()
}

fn linear_fitted(data: &SpatialDataset) -> Vec<f64> {
    ols_fit(&TrendModel::linear(2), data).unwrap().fitted(data.locations())
}

fn small_config(b: usize) -> TestConfig {
    TestConfig {
        replicates: b,
        ..TestConfig::default()
    }
}

fn noisy_field(side: usize, seed: u64) -> SpatialDataset {
    let noise = spatial_gof::rng::standard_normals(&mut spatial_gof::rng::rng_from_seed(seed), side * side);
    let mut i = 0;
    grid(side, |x, y| {
        i += 1;
        2.0 + x + y + 0.3 * noise[i - 1]
    })
}

#[test]
fn statistic_matches_refined_riemann_oracle() {
    let data = grid(7, |x, y| (2.0 * x).sin() + y * y);
    let fitted = linear_fitted(&data);
    let k = KernelSpec::new(KernelFamily::MultiplicativeTriweight, 2).unwrap();
    let h = 0.6;
    let hm = BandwidthMatrix::scalar(h, 2).unwrap();
    let q = QuadratureGrid::bounding(2, data.locations(), 30).unwrap();
    let t = compute_tn(&data, &fitted, &k, &hm, &WeightFunction::ConstantOne, &q).unwrap();

    let pts = points(&data);
    let m = 60;
    let cell = 1.0 / m as f64;
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            let x = [(i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell];
            let d = local_linear_oracle(&pts, data.responses(), h, x) - local_linear_oracle(&pts, &fitted, h, x);
            sum += d * d * cell * cell;
        }
    }
    let oracle = data.len() as f64 * h * sum;
    assert!(((t - oracle) / oracle).abs() < 0.01, "{t} vs {oracle}");
}

#[test]
fn doubling_quadrature_resolution_changes_little() {
    let k = KernelSpec::new(KernelFamily::MultiplicativeTriweight, 2).unwrap();
    for f in [
        (|x: f64, y: f64| (3.0 * x).sin() * y) as fn(f64, f64) -> f64,
        |x, y| x * x * x + (2.0 * y).cos(),
        |x, y| (x - 0.5).powi(2) + (y - 0.3).powi(2),
    ] {
        let data = grid(12, f);
        let fitted = linear_fitted(&data);
        for h in [0.4, 0.8] {
            let h = BandwidthMatrix::scalar(h, 2).unwrap();
            let t = |ppa| {
                let q = QuadratureGrid::bounding(2, data.locations(), ppa).unwrap();
                compute_tn(&data, &fitted, &k, &h, &WeightFunction::ConstantOne, &q).unwrap()
            };
            let (coarse, fine) = (t(30), t(60));
            assert!(((coarse - fine) / fine).abs() < 0.01, "{coarse} vs {fine}");
        }
    }
}

#[test]
fn perfect_fit_gives_zero_statistic_and_unit_p_value() {
    let data = grid(10, |x, y| 2.0 + x - 3.0 * y);
    let k = KernelSpec::new(KernelFamily::MultiplicativeTriweight, 2).unwrap();
    let q = QuadratureGrid::bounding(2, data.locations(), 30).unwrap();
    for h in [0.5, 0.8, 1.0] {
        let h = BandwidthMatrix::scalar(h, 2).unwrap();
        let report = bootstrap_test(
            &data,
            &TrendModel::linear(2),
            VariogramFamily::Exponential,
            &k,
            &h,
            &WeightFunction::ConstantOne,
            &q,
            &small_config(99),
            11,
        )
        .unwrap();
        assert_eq!(report.t_n, 0.0);
        assert_eq!(report.p_value, 1.0);
    }
}

#[test]
fn perfect_fit_trace_is_one_everywhere() {
    let data = grid(10, |x, y| 1.0 - x + 0.5 * y);
    let k = KernelSpec::new(KernelFamily::Gaussian, 2).unwrap();
    let q = QuadratureGrid::bounding(2, data.locations(), 20).unwrap();
    let hs: Vec<BandwidthMatrix> = [0.3, 0.5, 0.7].iter().map(|&h| BandwidthMatrix::scalar(h, 2).unwrap()).collect();
    let entries = significance_trace(
        &data,
        &TrendModel::linear(2),
        VariogramFamily::Spherical,
        &k,
        &hs,
        &WeightFunction::ConstantOne,
        &q,
        &small_config(49),
        3,
    )
    .unwrap();
    assert!(entries.iter().all(|e| e.p_value == Some(1.0)));
}

#[test]
fn singleton_trace_equals_single_test() {
    let data = noisy_field(10, 8);
    let k = KernelSpec::new(KernelFamily::MultiplicativeTriweight, 2).unwrap();
    let q = QuadratureGrid::bounding(2, data.locations(), 20).unwrap();
    let h = BandwidthMatrix::scalar(0.7, 2).unwrap();
    let w = WeightFunction::ConstantOne;
    let model = TrendModel::linear(2);
    let cfg = small_config(59);
    let seed = 1234;
    let trace = significance_trace(&data, &model, VariogramFamily::Exponential, &k, std::slice::from_ref(&h), &w, &q, &cfg, seed).unwrap();
    let single = bootstrap_test(
        &data,
        &model,
        VariogramFamily::Exponential,
        &k,
        &h,
        &w,
        &q,
        &cfg,
        TraceEntry::seed_for(seed, 0),
    )
    .unwrap();
    assert_eq!(trace.len(), 1);
    assert_eq!(trace[0].t_n, Some(single.t_n));
    assert_eq!(trace[0].p_value, Some(single.p_value));
}

#[test]
fn bootstrap_is_deterministic_and_p_value_bounded() {
    let data = noisy_field(10, 21);
    let k = KernelSpec::new(KernelFamily::MultiplicativeTriweight, 2).unwrap();
    let q = QuadratureGrid::bounding(2, data.locations(), 20).unwrap();
    let h = BandwidthMatrix::scalar(0.8, 2).unwrap();
    let run = |seed| {
        bootstrap_test(
            &data,
            &TrendModel::linear(2),
            VariogramFamily::Exponential,
            &k,
            &h,
            &WeightFunction::ConstantOne,
            &q,
            &small_config(39),
            seed,
        )
        .unwrap()
    };
    let (a, b) = (run(5), run(5));
    assert_eq!(a, b);
    for seed in [1, 2, 3] {
        let r = run(seed);
        assert!(r.p_value >= 1.0 / 40.0 && r.p_value <= 1.0);
        assert_eq!(r.bootstrap_stats.len(), 39);
        assert_eq!(r.p_value, bootstrap_p_value(r.t_n, &r.bootstrap_stats));
    }
}

#[test]
fn fixed_design_constants_equal_unit_density_constants() {
    let k = KernelSpec::new(KernelFamily::Gaussian, 2).unwrap();
    let h = BandwidthMatrix::scalar(0.6, 2).unwrap();
    let q = QuadratureGrid::midpoint(vec![(0.0, 1.0), (0.0, 1.0)], 30).unwrap();
    let inputs = |density| AsymptoticInputs {
        sigma2: 0.4,
        rho_c: 0.7,
        density,
        g_dev: None,
    };
    let fixed = asymptotic_constants(&inputs(DesignDensity::Fixed), &k, &h, &WeightFunction::ConstantOne, &q).unwrap();
    let unit = asymptotic_constants(
        &inputs(DesignDensity::Known(std::sync::Arc::new(|_: &[f64]| 1.0))),
        &k,
        &h,
        &WeightFunction::ConstantOne,
        &q,
    )
    .unwrap();
    assert!((fixed.b0 - unit.b0).abs() < 1e-12 && (fixed.v - unit.v).abs() < 1e-12);
    assert_eq!(fixed.b1, 0.0);
}

fn dataset_and_fit() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-3.0..3.0f64, 64), prop::collection::vec(-3.0..3.0f64, 64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistic_is_nonnegative_and_matches_operator((z, fitted) in dataset_and_fit(), h in 0.3..1.2f64) {
        let data = grid(8, |_, _| 0.0).with_responses(z).unwrap();
        let k = KernelSpec::new(KernelFamily::MultiplicativeTriweight, 2).unwrap();
        let h = BandwidthMatrix::scalar(h, 2).unwrap();
        let q = QuadratureGrid::bounding(2, data.locations(), 12).unwrap();
        let w = WeightFunction::ConstantOne;
        let t = compute_tn(&data, &fitted, &k, &h, &w, &q).unwrap();
        prop_assert!(t >= 0.0);
        let delta: Vec<f64> = data.responses().iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let op = StatisticOperator::new(&data, &k, &h, &w, &q).unwrap().value(&delta).unwrap();
        prop_assert!((t - op).abs() <= 1e-10 * t.max(1e-300));
        let same = compute_tn(&data, data.responses(), &k, &h, &w, &q).unwrap();
        prop_assert_eq!(same, 0.0);
    }

    #[test]
    fn p_value_ignores_replicate_order(stats in prop::collection::vec(0.0..10.0f64, 19..200), t in 0.0..10.0f64, rot in 0usize..200) {
        let p = bootstrap_p_value(t, &stats);
        let mut shuffled = stats.clone();
        shuffled.rotate_left(rot % stats.len());
        shuffled.reverse();
        prop_assert_eq!(p, bootstrap_p_value(t, &shuffled));
        prop_assert!(p >= 1.0 / (stats.len() + 1) as f64 && p <= 1.0);
    }
}
