use bamcbr_core::cbr::{adapt, retrieve, CaseBase, CaseBaseKind, CbrConfig, CbrEngine};
use bamcbr_core::sim::Mode;
use bamcbr_core::{run_scenario, snapshot_measurements, BamModel, MetricCounters, ScenarioConfig};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn retrieval(c: &mut Criterion) {
    let engine = CbrEngine::new(CbrConfig::default(), 0);
    let link = bamcbr_bench::reference_link(BamModel::Mam);
    let describe = |i: usize| {
        let mut counters = MetricCounters::new(3, 0);
        counters.elapsed = 600.0;
        for (c, bc) in [400.0, 350.0, 250.0].iter().enumerate() {
            counters.class_integral[c] = ((i * (c + 3)) % 100) as f64 / 100.0 * bc * 600.0;
        }
        let m = snapshot_measurements(&link, &counters);
        (engine.describe(&m, Some("probe".into())), m)
    };
    let mut base = CaseBase::new(CaseBaseKind::Positive);
    for i in 0..500 {
        let (p, m) = describe(i);
        base.insert(adapt(BamModel::ALL[i % 3].into(), &p, Some(&m), i as f64));
    }
    let (problem, _) = describe(12_345);
    let cfg = &engine.config().similarity;
    c.bench_function("retrieve_top3_of_500", |b| b.iter(|| retrieve(black_box(&problem), &base, cfg, 3).len()));
}

fn full_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("reference_24h");
    group.sample_size(10);
    for mode in [Mode::Static { model: BamModel::Atcs }, Mode::Cognitive { initial_model: BamModel::Mam }] {
        let cfg = ScenarioConfig::reference(7, mode);
        group.bench_function(cfg.mode.label(), |b| b.iter(|| run_scenario(black_box(&cfg)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, retrieval, full_runs);
criterion_main!(benches);
