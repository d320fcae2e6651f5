//! Bootstrap draws and percentile intervals.

use proptest::prelude::*;
use wildqr::bootstrap::{empirical_quantile, wild_residuals, BootstrapMethod};
use wildqr::montecarlo::PaperDesign;
use wildqr::rng::{stream, Stream};
use wildqr::tuning::{bic_select, LambdaGrid};
use wildqr::{
    bootstrap_adaptive, bootstrap_lasso, bootstrap_unpenalized, percentile_ci, BootstrapDraws, Dataset,
    QuantileLevel, ThresholdSequence, ThresholdSource, WeightLaw, WeightSampler,
};

fn q(t: f64) -> QuantileLevel {
    QuantileLevel::new(t).unwrap()
}

/// Sampler that always returns zero: every pseudo response equals the fitted values.
struct Zero;

impl WeightSampler for Zero {
    fn draw(&self, _: &mut Stream) -> f64 {
        0.0
    }
}

fn small_data(seed: u64) -> Dataset {
    let (d, _) = PaperDesign::new(60, q(0.5)).unwrap().generate(seed).unwrap();
    d.select_columns(&[0, 3, 7, 9]).unwrap()
}

fn draws_from(center: f64, devs: &[f64], n: usize) -> BootstrapDraws {
    BootstrapDraws {
        center: vec![center],
        estimate: vec![center],
        draws: devs.iter().map(|d| vec![center + d / (n as f64).sqrt()]).collect(),
        n,
        method: BootstrapMethod::Unpenalized,
        requested: devs.len(),
        failures: 0,
    }
}

#[test]
fn wild_residual_examples() {
    assert_eq!(wild_residuals(&[-2.0, 3.0], &[-1.0, 1.0]).unwrap(), vec![-2.0, 3.0]);
    assert_eq!(wild_residuals(&[-2.0, 3.0], &[1.0, -1.0]).unwrap(), vec![2.0, -3.0]);
    assert_eq!(wild_residuals(&[0.0, 0.0], &[-7.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    assert!(wild_residuals(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn zero_weights_reproduce_the_center() {
    let data = small_data(1);
    let d = bootstrap_unpenalized(&data, q(0.5), &Zero, 100, 4).unwrap();
    assert_eq!(d.failures, 0);
    for row in &d.draws {
        for (a, b) in row.iter().zip(&d.center) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
    let ci = percentile_ci(&d, 0.05).unwrap();
    for (c, b) in ci.iter().zip(&d.center) {
        assert!((c.lower - b).abs() < 1e-6 && (c.upper - b).abs() < 1e-6);
    }
}

#[test]
fn intercept_only_draws_are_pseudo_sample_quantiles() {
    let y: Vec<f64> = (0..41).map(|i| ((i * 37) % 41) as f64 * 0.25 - 3.0).collect();
    let data = Dataset::intercept_only(y).unwrap();
    let tau = 0.3;
    let law = WeightLaw::two_point(tau).unwrap();
    let seed = 11;
    let d = bootstrap_unpenalized(&data, q(tau), &law, 100, seed).unwrap();
    let abs_res: Vec<f64> = data.residuals(&d.center).iter().map(|e| e.abs()).collect();
    for (b, row) in d.draws.iter().enumerate() {
        let r = law.sample(data.n(), &mut stream(seed, b as u64));
        let pseudo: Vec<f64> = r.iter().zip(&abs_res).map(|(w, e)| d.center[0] + w * e).collect();
        let est = row[0];
        let below = pseudo.iter().filter(|&&v| v < est - 1e-9).count() as f64 / pseudo.len() as f64;
        let at_most = pseudo.iter().filter(|&&v| v <= est + 1e-9).count() as f64 / pseudo.len() as f64;
        assert!(below <= tau && tau <= at_most, "replicate {b}: {below} {at_most}");
    }
}

#[test]
fn order_statistic_fixture() {
    // n = 4 so sqrt(n) = 2; deviations -2, -1, 1, 2 scaled, alpha 0.5.
    // q(0.25) is the 1st smallest (-2), q(0.75) the 3rd smallest (1).
    let d = draws_from(0.0, &[1.0, -2.0, 2.0, -1.0], 4);
    let ci = percentile_ci(&d, 0.5).unwrap();
    assert_eq!((ci[0].lower, ci[0].upper), (-0.5, 1.0));
    assert_eq!(ci[0].level, 0.5);
}

#[test]
fn lasso_threshold_above_every_slope() {
    let data = small_data(2);
    let a_n = ThresholdSequence::fixed(1e6).unwrap();
    let d = bootstrap_lasso(&data, q(0.5), 2.0, &a_n, ThresholdSource::Ordinary, &WeightLaw::two_point(0.5).unwrap(), 100, 3)
        .unwrap();
    assert!(d.center[1..].iter().all(|&b| b == 0.0));
    assert_ne!(d.center[0], 0.0);
    let first = &d.draws[0];
    assert!(d.draws.iter().any(|r| r != first));
    assert_eq!(d.method, BootstrapMethod::ModifiedL1);
}

#[test]
fn draws_do_not_depend_on_thread_count() {
    let data = small_data(3);
    let law = WeightLaw::two_point(0.5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_adaptive(&data, q(0.5), 1.0, 1.0, &law, 120, 9).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    let c = bootstrap_adaptive(&data, q(0.5), 1.0, 1.0, &law, 120, 10).unwrap();
    assert_ne!(a.draws, c.draws);
}

#[test]
fn too_few_replicates() {
    let data = small_data(4);
    let law = WeightLaw::two_point(0.5).unwrap();
    assert!(bootstrap_unpenalized(&data, q(0.5), &law, 99, 0).is_err());
}

#[test]
fn adaptive_draws_mostly_drop_a_zero_slope() {
    // Share of draws with the X2 slope exactly zero, simulation design n = 100.
    let design = PaperDesign::new(100, q(0.5)).unwrap();
    let law = WeightLaw::two_point(0.5).unwrap();
    let grid = LambdaGrid::default_for(100, 10).unwrap();
    let mut shares = Vec::new();
    for seed in 0..5 {
        let (data, _) = design.generate(seed).unwrap();
        let (lambda, _) = bic_select(&data, q(0.5), 1.0, &grid).unwrap();
        let d = bootstrap_adaptive(&data, q(0.5), lambda, 1.0, &law, 400, seed).unwrap();
        shares.push(d.draws.iter().filter(|r| r[2] == 0.0).count() as f64 / d.draws.len() as f64);
    }
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    assert!(mean >= 0.8, "{shares:?}");
}

fn devs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 100..160)
}

proptest! {
    #[test]
    fn interval_is_reflected_percentile(d in devs(), center in -3.0f64..3.0, alpha in 0.01f64..0.5) {
        let draws = draws_from(center, &d, 25);
        let ci = percentile_ci(&draws, alpha).unwrap();
        let mut col: Vec<f64> = draws.draws.iter().map(|r| r[0]).collect();
        col.sort_by(f64::total_cmp);
        let lo = 2.0 * center - empirical_quantile(&col, 1.0 - alpha / 2.0);
        let hi = 2.0 * center - empirical_quantile(&col, alpha / 2.0);
        prop_assert!((ci[0].lower - lo).abs() < 1e-9 && (ci[0].upper - hi).abs() < 1e-9);
        prop_assert!(ci[0].lower <= ci[0].upper);
    }

    #[test]
    fn wider_level_nests(d in devs(), center in -3.0f64..3.0) {
        let draws = draws_from(center, &d, 50);
        let c95 = &percentile_ci(&draws, 0.05).unwrap()[0];
        let c99 = &percentile_ci(&draws, 0.01).unwrap()[0];
        prop_assert!(c99.lower <= c95.lower && c95.upper <= c99.upper);
    }

    #[test]
    fn pseudo_residual_signs(e in prop::collection::vec(-4.0f64..4.0, 1..30), seed in any::<u64>()) {
        let law = WeightLaw::two_point(0.3).unwrap();
        let r = law.sample(e.len(), &mut stream(seed, 0));
        let out = wild_residuals(&e, &r).unwrap();
        for ((o, w), res) in out.iter().zip(&r).zip(&e) {
            if *res != 0.0 {
                prop_assert_eq!(o.signum(), w.signum());
            }
        }
    }
}
