//! Adaptive Runge-Kutta integration for small complex systems.
//!
//! Dormand-Prince 5(4) with a PI step-size controller, written against fixed
//! size state arrays so the radial solvers pay no allocation cost per step.
//! Accuracy is driven by a mixed absolute/relative tolerance; the controller
//! refuses to shrink the step below a few ulps of the current abscissa and
//! reports a `StepControlFailure` instead of silently stalling.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_step: None, max_steps: 2_000_000 }
    }
}

impl OdeOptions {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }
}

// Dormand-Prince 5(4) tableau. The last row of A doubles as the fifth-order
// weights (FSAL); E holds b5 - b4 for the embedded error estimate.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn axpy<const N: usize>(
    y: &[Complex64; N],
    h: f64,
    coeffs: &[f64],
    ks: &[[Complex64; N]],
) -> [Complex64; N] {
    let mut out = *y;
    for (c, k) in coeffs.iter().zip(ks) {
        if *c == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate y' = f(t, y) from t0 to t1 and return y(t1).
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[Complex64; N]) -> [Complex64; N],
    t0: f64,
    t1: f64,
    y0: [Complex64; N],
    opts: &OdeOptions,
) -> Result<[Complex64; N]> {
    integrate_observed(f, t0, t1, y0, opts, |_, _| {})
}

/// As `integrate`, invoking `observer(t, &y)` at every accepted step
/// (including the initial and final points).
pub fn integrate_observed<const N: usize>(
    f: impl Fn(f64, &[Complex64; N]) -> [Complex64; N],
    t0: f64,
    t1: f64,
    y0: [Complex64; N],
    opts: &OdeOptions,
    mut observer: impl FnMut(f64, &[Complex64; N]),
) -> Result<[Complex64; N]> {
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::Precondition(format!("ode limits must be finite: {t0}, {t1}")));
    }
    observer(t0, &y0);
    if t0 == t1 {
        return Ok(y0);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let hmax = opts.max_step.unwrap_or(span).min(span);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, dir, hmax, opts);
    let mut err_prev: f64 = 1.0;
    let mut nsteps = 0usize;

    while (t1 - t) * dir > 0.0 {
        nsteps += 1;
        if nsteps > opts.max_steps {
            return Err(Error::StepControlFailure(format!(
                "step budget {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        let remaining = (t1 - t).abs();
        h = h.min(hmax).min(remaining);
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepControlFailure(format!(
                "step size underflow at t = {t} (h = {h})"
            )));
        }
        let hd = h * dir;

        let k2 = f(t + C[0] * hd, &axpy(&y, hd, &A2, std::slice::from_ref(&k1)));
        let k3 = f(t + C[1] * hd, &axpy(&y, hd, &A3, &[k1, k2]));
        let k4 = f(t + C[2] * hd, &axpy(&y, hd, &A4, &[k1, k2, k3]));
        let k5 = f(t + C[3] * hd, &axpy(&y, hd, &A5, &[k1, k2, k3, k4]));
        let k6 = f(t + C[4] * hd, &axpy(&y, hd, &A6, &[k1, k2, k3, k4, k5]));
        let y_new = axpy(&y, hd, &A7, &[k1, k2, k3, k4, k5, k6]);
        let k7 = f(t + hd, &y_new);

        let ks = [k1, k2, k3, k4, k5, k6, k7];
        let mut err_sq = 0.0;
        for i in 0..N {
            let mut e = Complex64::new(0.0, 0.0);
            for (c, k) in E.iter().zip(&ks) {
                e += c * k[i];
            }
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            let r = (h * e.norm()) / sc;
            err_sq += r * r;
        }
        let err = (err_sq / N as f64).sqrt().max(1e-30);

        if err <= 1.0 {
            t += hd;
            y = y_new;
            k1 = k7;
            observer(t, &y);
            // PI controller (Hairer II.4): beta = 0.04, alpha = 1/5 - 0.75 beta.
            let fac = 0.9 * err.powf(-0.17) * err_prev.powf(0.04);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(y)
}

fn initial_step<const N: usize>(
    f: &impl Fn(f64, &[Complex64; N]) -> [Complex64; N],
    t0: f64,
    y0: &[Complex64; N],
    k1: &[Complex64; N],
    dir: f64,
    hmax: f64,
    opts: &OdeOptions,
) -> f64 {
    let sc =
        |i: usize, y: &[Complex64; N]| opts.atol + opts.rtol * y[i].norm();
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..N {
        d0 += (y0[i].norm() / sc(i, y0)).powi(2);
        d1 += (k1[i].norm() / sc(i, y0)).powi(2);
    }
    d0 = (d0 / N as f64).sqrt();
    d1 = (d1 / N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(hmax);

    let y1 = {
        let mut y = *y0;
        for i in 0..N {
            y[i] += h0 * dir * k1[i];
        }
        y
    };
    let k2 = f(t0 + h0 * dir, &y1);
    let mut d2 = 0.0f64;
    for i in 0..N {
        d2 += ((k2[i] - k1[i]).norm() / sc(i, y0)).powi(2);
    }
    d2 = (d2 / N as f64).sqrt() / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(hmax)
}
