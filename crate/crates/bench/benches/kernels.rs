//! Criterion benchmarks for the numerical kernels the sweeps spend their
//! time in: special functions, closed-form scattering values, oscillatory
//! window integrals, radial extraction, and the Dyson iterates.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use genscatter_core::coulomb::{self, CoulombParams};
use genscatter_core::diracq::{self, Momentum3};
use genscatter_core::oscillate::{s1_truncated, TestFunction};
use genscatter_core::quad::{self, QuadOptions};
use genscatter_core::radial::{self, PotentialSpec};
use genscatter_core::renorm::{dyson_coefficients, MatrixInteraction};
use genscatter_core::specfun;

fn bench_specfun(c: &mut Criterion) {
    c.bench_function("log_gamma", |b| {
        let z = Complex64::new(3.0, -1.5);
        b.iter(|| specfun::log_gamma(black_box(z)).unwrap())
    });
    c.bench_function("legendre_q_ell5", |b| {
        b.iter(|| specfun::legendre_q(black_box(5), black_box(1.7)).unwrap())
    });
}

fn bench_coulomb(c: &mut Criterion) {
    let params = CoulombParams::new(1.0, 2.0, 3).unwrap();
    c.bench_function("s_dyn", |b| b.iter(|| coulomb::s_dyn(black_box(&params)).unwrap()));
    c.bench_function("kernel_r", |b| {
        b.iter(|| coulomb::kernel_r(black_box(2.0), black_box(0.8), &params).unwrap())
    });
}

fn bench_quad(c: &mut Criterion) {
    c.bench_function("integrate_oscillatory", |b| {
        let opts = QuadOptions::default();
        b.iter(|| {
            quad::integrate(|x| (20.0 * x).sin() * (-x).exp(), 0.0, 10.0, opts).unwrap()
        })
    });
}

fn bench_oscillate(c: &mut Criterion) {
    let params = CoulombParams::new(1.0, 1.0, 0).unwrap();
    let f = TestFunction::default_bump();
    c.bench_function("s1_truncated_t100", |b| {
        b.iter(|| s1_truncated(1.0, black_box(&params), 100.0, -100.0, &f).unwrap())
    });
}

fn bench_radial(c: &mut Criterion) {
    let pot = PotentialSpec::coulomb_schrodinger(1.0, 1.0).unwrap();
    c.bench_function("extract_s_schrodinger_r200", |b| {
        b.iter(|| radial::extract_s_schrodinger(1, 1.0, black_box(&pot), 200.0).unwrap())
    });
}

fn bench_diracq(c: &mut Criterion) {
    let q = Momentum3::new(1.0, 2.0, 3.0).unwrap();
    c.bench_function("eigensystem", |b| b.iter(|| diracq::eigensystem(black_box(q), 1.0).unwrap()));
    let dec = diracq::eigensystem(q, 1.0).unwrap();
    c.bench_function("spectral_phase_check", |b| {
        b.iter(|| {
            let s = diracq::spectral_phase(black_box(&dec), 0.7, -0.4);
            diracq::check_structure(&s, q, 1.0).unwrap()
        })
    });
}

fn bench_renorm(c: &mut Criterion) {
    let v = MatrixInteraction::scalar(0.7);
    c.bench_function("dyson_coefficients_order6", |b| {
        b.iter(|| dyson_coefficients(black_box(&v), 0.0, 2.0, 6).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_specfun,
    bench_coulomb,
    bench_quad,
    bench_oscillate,
    bench_radial,
    bench_diracq,
    bench_renorm
);
criterion_main!(kernels);
