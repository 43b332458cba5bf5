use criterion::{criterion_group, criterion_main, Criterion};
use gcx_bench::shapes_fixture;
use gcx_core::gnn::forward;

fn bench(c: &mut Criterion) {
    let (d, m) = shapes_fixture(5);
    c.bench_function("forward_ba_shapes", |b| b.iter(|| forward(&m, &d).unwrap()));
}

criterion_group!(benches, bench);
criterion_main!(benches);
