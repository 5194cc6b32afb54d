use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gcnpipe_bench::{graph, redundant_graph};
use gcnpipe_core::redundancy::{build_aggregation_graph, greedy_matching};
use gcnpipe_core::{reduce, ReduceConfig};

fn reduction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduction");
    for n in [500usize, 2000] {
        let g = graph(n, 15.0);
        group.bench_with_input(BenchmarkId::new("aggregation-graph", n), &g, |b, g| {
            b.iter(|| build_aggregation_graph(g, Some(100)))
        });
        let ga = build_aggregation_graph(&g, Some(100));
        group.bench_with_input(BenchmarkId::new("matching", n), &ga, |b, ga| b.iter(|| greedy_matching(ga, 2)));
    }
    let g = redundant_graph(3);
    group.bench_function("reduce-5-rounds", |b| b.iter(|| reduce(&g, &ReduceConfig::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, reduction);
criterion_main!(benches);
