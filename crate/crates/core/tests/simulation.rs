//! Simulation design and coverage study.

use wildqr::montecarlo::{oracle_cov_for, run_study, Method, PaperDesign, StudyConfig};
use wildqr::QuantileLevel;

fn q(t: f64) -> QuantileLevel {
    QuantileLevel::new(t).unwrap()
}

#[test]
fn generator_quantile_level() {
    for tau in [0.3, 0.5, 0.7] {
        let design = PaperDesign::new(100_000, q(tau)).unwrap();
        let (data, beta) = design.generate(5).unwrap();
        let below = data.residuals(&beta).iter().filter(|&&e| e < 0.0).count() as f64 / data.n() as f64;
        assert!((below - tau).abs() < 0.005, "tau {tau}: {below}");
    }
}

#[test]
fn x1_is_active_off_the_median() {
    let d = PaperDesign::new(100, q(0.7)).unwrap();
    assert!((d.true_beta[1] - 0.5244).abs() < 1e-4);
    assert_eq!(PaperDesign::new(100, q(0.5)).unwrap().true_beta[1], 0.0);
}

#[test]
fn oracle_density_term_at_the_median() {
    let d = PaperDesign::new(100, q(0.5)).unwrap();
    assert!((d.density_at_zero(0.5) - 0.398_942_28 / 0.5).abs() < 1e-7);
    let d = PaperDesign::custom(100, q(0.5), vec![0.0; 10], 1.0).unwrap();
    let cov = oracle_cov_for(&d, &[0, 2], 20_000, 1).unwrap();
    for j in 0..2 {
        assert!(cov.sandwich[j][j] > 0.0);
        assert!(cov.d0[j][j] > 0.0 && cov.d1[j][j] > 0.0);
    }
}

fn smoke_config(seed: u64) -> StudyConfig {
    let design = PaperDesign::new(60, q(0.5)).unwrap();
    let methods = vec![Method::NewAl { gamma: 1.0 }, Method::FullWb];
    StudyConfig::new(design, methods, 50, 100, seed).unwrap()
}

#[test]
fn smoke_study_is_reproducible_and_bounded() {
    let cfg = smoke_config(8);
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    assert_eq!(a, b);
    for m in &a.methods {
        assert_eq!(m.completed + m.failures, 50);
        for c in m.coefficients.iter().chain(std::iter::once(&m.zeros)) {
            if let Some(cov) = c.coverage {
                assert!((0.0..=1.0).contains(&cov));
            }
        }
        assert!(m.tp <= 4.0 && m.fp <= 6.0);
    }
    let al = &a.methods[0];
    let full = &a.methods[1];
    assert!(al.zeros.mean_length.unwrap() < full.zeros.mean_length.unwrap());
    assert!(run_study(&StudyConfig { reps: 49, ..cfg }).is_err());
}
