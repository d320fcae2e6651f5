//! Penalty-level and threshold selection on simulated data.

use wildqr::montecarlo::PaperDesign;
use wildqr::tuning::{cv_select, default_a_n_candidates, LambdaGrid};
use wildqr::{adaptive_weights, bic_select, fit, fit_adaptive, select_a_n, PenaltySpec, QuantileLevel, WeightLaw};

fn q(t: f64) -> QuantileLevel {
    QuantileLevel::new(t).unwrap()
}

#[test]
fn bic_keeps_a_dominant_slope_and_drops_noise() {
    let mut location = vec![0.0; 10];
    location[8] = 2.0;
    let design = PaperDesign::custom(100, q(0.5), location, 1.0).unwrap();
    let grid = LambdaGrid::log_spaced(0.01, 100.0, 30).unwrap();
    let reps = 40;
    let mut good = 0;
    for seed in 0..reps {
        let (data, _) = design.generate(seed).unwrap();
        let (lambda, table) = bic_select(&data, q(0.5), 1.0, &grid).unwrap();
        assert!(table.iter().filter(|r| r.converged).all(|r| r.bic.is_finite()));
        assert!(grid.values().contains(&lambda));
        let pilot = fit(&data, q(0.5), &PenaltySpec::None).unwrap();
        let w = adaptive_weights(&pilot.beta, 1.0).unwrap();
        let f = fit_adaptive(&data, q(0.5), lambda, &w).unwrap();
        if f.beta[9] != 0.0 && f.beta[2] == 0.0 {
            good += 1;
        }
    }
    assert!(good as f64 >= 0.9 * reps as f64, "{good}/{reps}");
}

#[test]
fn cv_lasso_over_selects_on_the_simulation_design() {
    let design = PaperDesign::new(100, q(0.5)).unwrap();
    let grid = LambdaGrid::default_for(100, 10).unwrap();
    let reps = 20;
    let mut fp = 0usize;
    for seed in 0..reps {
        let (data, _) = design.generate(seed).unwrap();
        let (lambda, _) = cv_select(&data, q(0.5), &grid, 5, seed).unwrap();
        let (again, _) = cv_select(&data, q(0.5), &grid, 5, seed).unwrap();
        assert_eq!(lambda, again);
        let f = fit(&data, q(0.5), &PenaltySpec::Lasso { lambda }).unwrap();
        fp += design.zero_slopes().iter().filter(|&&j| f.beta[j] != 0.0).count();
    }
    let mean = fp as f64 / reps as f64;
    assert!((1.5..=5.0).contains(&mean), "mean FP {mean}");
}

#[test]
fn threshold_choice_is_a_candidate() {
    let design = PaperDesign::new(100, q(0.5)).unwrap();
    let law = WeightLaw::two_point(0.5).unwrap();
    let candidates = default_a_n_candidates(100);
    for seed in 0..3 {
        let (data, _) = design.generate(seed).unwrap();
        let (a, table) = select_a_n(&data, q(0.5), 1.0, &candidates, &law, 100, seed).unwrap();
        assert!(candidates.contains(&a));
        assert_eq!(table.len(), candidates.len());
        assert!(table.iter().all(|(_, m)| m.is_finite() && *m >= 0.0));
        let (only, _) = select_a_n(&data, q(0.5), 1.0, &[0.3], &law, 100, seed).unwrap();
        assert_eq!(only, 0.3);
    }
}
