use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qpc_bench::{amo_energy, golden, two_mode};
use qpc_core::arithmetic::continued_fraction;
use qpc_core::cocycle::{dual_cocycle, lyapunov_spectrum, rotation_number, schrodinger_cocycle};
use qpc_core::localization::eigenpair_near;
use qpc_core::operators::{avg_log_det, det_p, spectrum_sample, Side};
use qpc_core::reducibility::{almost_reduce, ReduceParams};
use qpc_core::wedge::{wedge_minor_q, WedgeMinorRequest};
use qpc_core::{Complex64, Frequency, TrigPolynomial};
use std::hint::black_box;

fn arithmetic(c: &mut Criterion) {
    let f = Frequency::golden();
    c.bench_function("continued_fraction/depth40", |b| b.iter(|| continued_fraction(black_box(&f), 40).unwrap()));
}

fn cocycles(c: &mut Criterion) {
    let alpha = golden();
    let amo = TrigPolynomial::amo(0.5);
    let mut g = c.benchmark_group("lyapunov");
    g.sample_size(10);
    let s = schrodinger_cocycle(&amo, 0.3, alpha);
    g.bench_function("schrodinger/1e4x16", |b| b.iter(|| lyapunov_spectrum(&s, 0.0, 10_000, 16, 0).unwrap()));
    let d = dual_cocycle(&two_mode(), 0.3, alpha).unwrap();
    g.bench_function("dual_d2/1e4x16", |b| b.iter(|| lyapunov_spectrum(&d, 0.05, 10_000, 16, 0).unwrap()));
    g.finish();
    c.bench_function("rotation_number/1e5", |b| b.iter(|| rotation_number(&s, 100_000, 0.0).unwrap()));
}

fn determinants(c: &mut Criterion) {
    let alpha = golden();
    let v = two_mode();
    let mut g = c.benchmark_group("det_p");
    for n in [100usize, 1000, 10_000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| det_p(&v, alpha, Complex64::new(0.17, 0.02), 0.3, n))
        });
    }
    g.finish();
    let mut g = c.benchmark_group("sections");
    g.sample_size(10);
    g.bench_function("avg_log_det/n200_grid128", |b| b.iter(|| avg_log_det(&v, alpha, 0.3, 200, 0.02, 128).unwrap()));
    g.bench_function("spectrum_sample/dual_2000x8", |b| {
        b.iter(|| spectrum_sample(&TrigPolynomial::amo(0.5), alpha, 2000, 8, Side::Dual, true).unwrap())
    });
    let req = WedgeMinorRequest { rows: vec![-1, 0], cols: vec![-2, 1], k: 50 };
    g.bench_function("wedge_minor_q/k50", |b| b.iter(|| wedge_minor_q(&v, alpha, Complex64::new(0.2, 0.0), 0.4, &req).unwrap()));
    g.finish();
}

fn pipelines(c: &mut Criterion) {
    let alpha = golden();
    let amo = TrigPolynomial::amo(0.5);
    let e = amo_energy();
    let mut g = c.benchmark_group("pipelines");
    g.sample_size(10);
    g.bench_function("eigenpair_near/4000", |b| b.iter(|| eigenpair_near(&amo, alpha, 0.3, e, 4000).unwrap()));
    let cf = continued_fraction(&Frequency::golden(), 20).unwrap();
    let p = ReduceParams { r_list: vec![0.055], scales: vec![89], h: Some(0.11), phase: Some(0.3), ..Default::default() };
    g.bench_function("almost_reduce/N89", |b| b.iter(|| almost_reduce(&amo, alpha, &cf, e, &p).unwrap()));
    g.finish();
}

criterion_group!(benches, arithmetic, cocycles, determinants, pipelines);
criterion_main!(benches);
