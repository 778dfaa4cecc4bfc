//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 7/15-point Gauss-Kronrod pair drives a globally adaptive scheme: the
//! panel with the largest error estimate is bisected until the requested
//! tolerance is met or the panel budget is exhausted. Values may be real or
//! complex; the integrand is sampled at most `2 * max_panels * 15` times.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kronrod abscissae on [0, 1] half-interval (even symmetry).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights, matching the odd-index Kronrod abscissae.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Scalar types the integrator can accumulate.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, factor: f64) -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    fn norm(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1.0e-12,
            rel_tol: 1.0e-10,
            max_panels: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tols(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_budget(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub abs_error: f64,
    pub panels: usize,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

/// One Gauss-Kronrod 7/15 evaluation on [a, b].
fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut resk = fc.scale(WGK[7]);
    let mut resg = fc.scale(WG[3]);
    let mut resabs = fc.norm() * WGK[7];

    let mut samples = [T::zero(); 15];
    samples[7] = fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let flo = f(center - dx);
        let fhi = f(center + dx);
        samples[j] = flo;
        samples[14 - j] = fhi;
        let sum = flo.add(fhi);
        resk = resk.add(sum.scale(WGK[j]));
        resabs += WGK[j] * (flo.norm() + fhi.norm());
        if j % 2 == 1 {
            resg = resg.add(sum.scale(WG[j / 2]));
        }
    }

    let mean = resk.scale(0.5);
    let mut resasc = WGK[7] * samples[7].add(mean.scale(-1.0)).norm();
    for j in 0..7 {
        resasc += WGK[j]
            * (samples[j].add(mean.scale(-1.0)).norm()
                + samples[14 - j].add(mean.scale(-1.0)).norm());
    }
    resasc *= half.abs();
    resabs *= half.abs();

    let value = resk.scale(half);
    let raw = resk.add(resg.scale(-1.0)).norm() * half.abs();

    // QUADPACK-style rescaling of the raw Gauss/Kronrod discrepancy.
    let mut err = raw;
    if resasc != 0.0 && raw != 0.0 {
        err = resasc * (200.0 * raw / resasc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * resabs;
    if round > err {
        err = round;
    }
    (value, err)
}

/// Integrate `f` over [a, b]. Handles a > b by sign flip.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<Quadrature<T>> {
    integrate_segments(f, &[a, b], opts)
}

/// Integrate over the chain of segments given by consecutive `nodes`.
///
/// The panel budget and error target are global across all segments, so a
/// caller can pre-split at known awkward points without tolerance juggling.
pub fn integrate_segments<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    nodes: &[f64],
    opts: QuadOptions,
) -> Result<Quadrature<T>> {
    if nodes.len() < 2 {
        return Err(Error::Precondition(
            "quadrature needs at least one segment".into(),
        ));
    }
    for w in nodes.windows(2) {
        if !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::Domain("non-finite quadrature endpoint".into()));
        }
    }

    let mut heap: Vec<Panel<T>> = Vec::new();
    let mut total = T::zero();
    let mut total_err = 0.0;
    for w in nodes.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        total = total.add(v);
        total_err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    if heap.is_empty() {
        return Ok(Quadrature {
            value: T::zero(),
            abs_error: 0.0,
            panels: 0,
        });
    }

    let target = |value: T| opts.abs_tol.max(opts.rel_tol * value.norm());

    while total_err > target(total) {
        if heap.len() >= opts.max_panels {
            return Err(Error::QuadratureFailure(format!(
                "panel budget {} exhausted with error {:.3e} (target {:.3e})",
                opts.max_panels,
                total_err,
                target(total)
            )));
        }
        // Largest-error panel first.
        let mut worst = 0;
        for (i, p) in heap.iter().enumerate() {
            if p.error > heap[worst].error {
                worst = i;
            }
        }
        let Panel { a, b, value, error } = heap.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval at floating point resolution; accept as converged.
            heap.push(Panel {
                a,
                b,
                value,
                error: 0.0,
            });
            total_err = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let (v1, e1) = gk15(&f, a, mid);
        let (v2, e2) = gk15(&f, mid, b);
        total = total.add(v1).add(v2).add(value.scale(-1.0));
        total_err += e1 + e2 - error;
        heap.push(Panel {
            a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b,
            value: v2,
            error: e2,
        });
        if heap.len() % 64 == 0 {
            // Refresh accumulated sums to stop drift from incremental updates.
            total = heap
                .iter()
                .fold(T::zero(), |acc, p| acc.add(p.value));
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }

    Ok(Quadrature {
        value: total,
        abs_error: total_err,
        panels: heap.len(),
    })
}
