use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use zdiv_core::search::{scan_support, ScanOptions};
use zdiv_core::selftest::run_selftest;
use zdiv_core::{AlgebraElement, FieldSpec, GroupSpec};

fn scan(c: &mut Criterion) {
    let group: GroupSpec = "free:2".parse().unwrap();
    let a = AlgebraElement::parse(&group, FieldSpec::Rationals, "1 + a + b")
        .unwrap()
        .as_support_triple()
        .unwrap();
    let mut g = c.benchmark_group("scan-free2-n4");
    g.sample_size(10);
    for workers in [1usize, 2, 4, 8] {
        let opts = ScanOptions { workers, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(workers), &opts, |b, opts| {
            b.iter(|| scan_support(&a, 4, opts).unwrap())
        });
    }
    g.finish();
}

fn selftest(c: &mut Criterion) {
    let mut g = c.benchmark_group("selftest");
    g.sample_size(10);
    for workers in [1usize, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| run_selftest(0, w))
        });
    }
    g.finish();
}

criterion_group!(benches, scan, selftest);
criterion_main!(benches);
