use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gcnpipe_bench::{features, reduced_pair, redundant_graph};
use gcnpipe_core::engine::{aggregate_reduced, Direction};

fn aggregation(c: &mut Criterion) {
    let g = redundant_graph(1);
    let (plain, reduced) = reduced_pair(&g, 5);
    let mut group = c.benchmark_group("aggregate");
    for f in [16usize, 64, 256] {
        let x = features(g.num_nodes(), f);
        group.bench_with_input(BenchmarkId::new("direct", f), &x, |b, x| {
            b.iter(|| aggregate_reduced(&plain, x, Direction::Forward).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("reduced", f), &x, |b, x| {
            b.iter(|| aggregate_reduced(&reduced, x, Direction::Forward).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, aggregation);
criterion_main!(benches);
