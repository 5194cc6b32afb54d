use criterion::{criterion_group, criterion_main, Criterion};
use gcnpipe_core::perf::{solve_arch_params, HardwareConfig, WorkloadProfile};
use gcnpipe_core::sim::{simulate_minibatch, SimOptions};

fn simulator(c: &mut Criterion) {
    let hw = HardwareConfig::u200();
    let w = WorkloadProfile {
        v_s: 2750,
        d_bar: 15.0,
        f: 256,
        l: 2,
        gamma_read: 0.7,
        gamma_add: 0.7,
        matching_total: 1375,
    };
    let arch = solve_arch_params(&hw, &w).unwrap();
    c.bench_function("simulate-u200-minibatch", |b| {
        b.iter(|| simulate_minibatch(&w, arch, &hw, &SimOptions::default()).unwrap())
    });
    c.bench_function("solve-arch", |b| b.iter(|| solve_arch_params(&hw, &w).unwrap()));
}

criterion_group!(benches, simulator);
criterion_main!(benches);
