use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cvpriv_core::measurement::{simulate_protocol, ProtocolConfig, Sampler};

fn protocol(c: &mut Criterion) {
    let mut g = c.benchmark_group("protocol");
    g.sample_size(10);
    for (name, sampler) in [("shots", Sampler::Shots), ("wishart", Sampler::Wishart)] {
        let mut cfg = ProtocolConfig::new(1.0, 0.9, [0.01, 0.03], 10_000, 3);
        cfg.repetitions = 50;
        cfg.sampler = sampler;
        g.bench_function(name, |b| b.iter(|| simulate_protocol(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, protocol);
criterion_main!(benches);
