use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dualsls_bench::decaying_taps;
use dualsls_core::sls::hinf_norm_bound;
use dualsls_core::SolverSettings;

fn bench_hinf(c: &mut Criterion) {
    let mut group = c.benchmark_group("hinf_norm_bound");
    group.sample_size(10);
    for f in [4, 8, 12] {
        let taps = decaying_taps(2, 4, f);
        group.bench_with_input(BenchmarkId::from_parameter(f), &taps, |b, taps| {
            b.iter(|| hinf_norm_bound(black_box(taps), &SolverSettings::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_hinf);
criterion_main!(benches);
