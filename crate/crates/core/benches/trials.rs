use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use imgconn::harness::{run_trials, Parallelism, TrialSpec};
use imgconn::lab::ProceduralFamily;
use imgconn::testers::{TesterConfig, Variant};
use imgconn::DyadicEps;

fn trials(c: &mut Criterion) {
    let eps = DyadicEps::from_inverse(16).unwrap();
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for family in [ProceduralFamily::Comb, ProceduralFamily::Dots] {
        let img = family.instance(513, 1);
        for variant in [Variant::Adaptive, Variant::Nonadaptive] {
            for parallelism in [Parallelism::Parallel, Parallelism::Sequential] {
                let mut spec = TrialSpec::new(TesterConfig::new(eps, variant, 7), 32);
                spec.parallelism = parallelism;
                let id = BenchmarkId::new(format!("{family}/{variant:?}"), format!("{parallelism:?}"));
                group.bench_function(id, |b| b.iter(|| run_trials(&img, &spec).unwrap()));
            }
        }
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
