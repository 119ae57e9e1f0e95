use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cvpriv_bench::{lossy_pair, tree};
use cvpriv_core::fisher::{qfim_phase_family, qfim_pure_phase, DerivativeMethod};
use cvpriv_core::fock::{apply_loss_fock, qfim_fock_mixed, tmss_fock};
use cvpriv_core::network::tree_covariance_closed_form;
use cvpriv_core::privacy::{analyze, average_direction, KernelTol};
use cvpriv_core::TreeSpec;

fn tree_construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("tree_state");
    for depth in [2u32, 4, 6] {
        g.bench_with_input(BenchmarkId::new("gates", depth), &depth, |b, &d| b.iter(|| tree(black_box(d), 1.0)));
        let spec = TreeSpec::new(depth, 1.0).unwrap();
        g.bench_with_input(BenchmarkId::new("closed_form", depth), &spec, |b, s| {
            b.iter(|| tree_covariance_closed_form(black_box(s)))
        });
    }
    g.finish();
}

fn qfim_routes(c: &mut Criterion) {
    let mut g = c.benchmark_group("qfim");
    for depth in [2u32, 4, 6] {
        let probe = tree(depth, 1.0);
        g.bench_with_input(BenchmarkId::new("pure_tree", depth), &probe, |b, p| {
            b.iter(|| qfim_pure_phase(black_box(p)).unwrap())
        });
    }
    let lossy = lossy_pair(1.0, 0.7);
    g.bench_function("moment_analytic_lossy_pair", |b| {
        b.iter(|| qfim_phase_family(black_box(&lossy), &[0.0, 0.0], DerivativeMethod::Analytic).unwrap())
    });
    g.bench_function("moment_finite_difference_lossy_pair", |b| {
        b.iter(|| {
            qfim_phase_family(black_box(&lossy), &[0.0, 0.0], DerivativeMethod::FiniteDifference { step: 1e-5 })
                .unwrap()
        })
    });
    let q = qfim_pure_phase(&tree(5, 1.0)).unwrap();
    let v = average_direction(q.dim());
    g.bench_function("privacy_report_32_modes", |b| {
        b.iter(|| analyze(black_box(&q), &v, KernelTol::default()).unwrap())
    });
    g.finish();
}

fn fock_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("fock");
    g.sample_size(10);
    for n_max in [10usize, 20] {
        let state = apply_loss_fock(&tmss_fock(0.5, n_max).unwrap(), &[0.7, 0.7]).unwrap();
        g.bench_with_input(BenchmarkId::new("mixed_qfim", n_max), &state, |b, s| {
            b.iter(|| qfim_fock_mixed(black_box(s)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, tree_construction, qfim_routes, fock_oracle);
criterion_main!(benches);
