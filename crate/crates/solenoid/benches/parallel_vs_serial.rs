//! Rayon pool vs sequential fallback on the two heavy batch workloads:
//! exact correlation entries and Monte Carlo correlation chunks. Both modes
//! produce bit-identical numbers (reductions happen after the ordered
//! collect), so this measures scheduling overhead against core count.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use solenoid::ap::ap_complex;
use solenoid::correlation::{correlation_sequence, mc_correlation, suspended_mean};
use solenoid::cylinder::CylinderFunction;
use solenoid::measure::InvariantMeasure;
use solenoid::parallel::ExecMode;
use solenoid::substitution::parse;
use solenoid::suspension::{suspend, SuspendedFunction};

fn workload() -> (solenoid::ap::APComplex, SuspendedFunction) {
    let rule = parse("a -> abbb\nb -> a").unwrap();
    let cx = ap_complex(&rule, 4).unwrap();
    let measure = InvariantMeasure::exact(&rule, 8).unwrap();
    let words = solenoid::language::legal_words(&rule, 3).unwrap();
    let values: std::collections::BTreeMap<Vec<usize>, f64> = words
        .iter()
        .map(|w| (w.clone(), if w[2] == 1 { 1.0 } else { 0.0 }))
        .collect();
    let h0 = CylinderFunction::from_values(2, &words, values).unwrap();
    let f0 = suspend(&h0, 0.15, &measure, &cx.lengths).unwrap();
    let mean = suspended_mean(&cx, &f0).unwrap();
    let unit = suspend(
        &CylinderFunction::constant(&rule, 1.0).unwrap(),
        0.15,
        &measure,
        &cx.lengths,
    )
    .unwrap();
    let unit_mean = suspended_mean(&cx, &unit).unwrap();
    let h = h0
        .sub(
            &CylinderFunction::constant(&rule, mean / unit_mean)
                .unwrap()
                .at_level(&measure, h0.level())
                .unwrap(),
        )
        .unwrap();
    let f = suspend(&h, 0.15, &measure, &cx.lengths).unwrap();
    (cx, f)
}

fn bench_correlations(c: &mut Criterion) {
    let (cx, f) = workload();
    let mut group = c.benchmark_group("correlation_sequence");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{mode:?}")),
            &mode,
            |b, &mode| {
                b.iter(|| correlation_sequence(&cx, &f, &f, 9, 12, mode).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let (cx, f) = workload();
    let mut group = c.benchmark_group("mc_correlation");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{mode:?}")),
            &mode,
            |b, &mode| {
                b.iter(|| mc_correlation(&cx, &f, &f, 3, 200_000, 42, mode).unwrap());
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_correlations, bench_monte_carlo);
criterion_main!(benches);
