use criterion::{criterion_group, criterion_main, Criterion};
use wildqr::montecarlo::PaperDesign;
use wildqr::{bootstrap_adaptive, bootstrap_lasso, bootstrap_unpenalized, QuantileLevel, ThresholdSequence, ThresholdSource, WeightLaw};

fn bootstrap(c: &mut Criterion) {
    let tau = QuantileLevel::new(0.5).unwrap();
    let (data, _) = PaperDesign::new(100, tau).unwrap().generate(1).unwrap();
    let law = WeightLaw::two_point(0.5).unwrap();
    let a_n = ThresholdSequence::rate_n13(100).unwrap();
    let mut group = c.benchmark_group("bootstrap_n100_b100");
    group.sample_size(10);
    group.bench_function("unpenalized", |b| b.iter(|| bootstrap_unpenalized(&data, tau, &law, 100, 7).unwrap()));
    group.bench_function("adaptive", |b| b.iter(|| bootstrap_adaptive(&data, tau, 1.0, 1.0, &law, 100, 7).unwrap()));
    group.bench_function("lasso", |b| {
        b.iter(|| bootstrap_lasso(&data, tau, 2.0, &a_n, ThresholdSource::Ordinary, &law, 100, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bootstrap);
criterion_main!(benches);
