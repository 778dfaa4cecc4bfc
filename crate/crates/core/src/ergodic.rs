//! Dynamical deviation factors and the ergodic equalities tying them to the
//! stationary factors of the radial module, plus the finite-time surrogate
//! for the admissibility conditions of a deviation factor.
//!
//! The stationary factor V0 lives on the radial half-line while the
//! dynamical factor W0 lives in time; the ergodic equalities state that along
//! the free trajectory r = t·k (resp. r = t·s) they agree up to a constant
//! unitary. The checks here recompute the time-side factor by direct
//! quadrature of the potential, independently of the antiderivative rule the
//! radial module uses, so the equality is verified across two genuinely
//! different code paths.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::radial::{self, PotentialSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Surrogate time at which t -> infinity limits are evaluated.
pub const ADMISSIBILITY_T: f64 = 1e6;

fn tight() -> QuadOptions {
    QuadOptions::with_tols(1e-14, 1e-13)
}

/// Unit-modulus dynamical deviation factor (t, momentum) -> phase.
///
/// Commutation with other deviation factors holds structurally: the type
/// admits only scalar phase functions per momentum point, and scalar
/// multiplication operators commute.
#[derive(Clone)]
pub struct DynamicalDeviation {
    eval: Arc<dyn Fn(f64, f64) -> Result<Complex64> + Send + Sync>,
    pub description: String,
}

impl fmt::Debug for DynamicalDeviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DynamicalDeviation({})", self.description)
    }
}

impl DynamicalDeviation {
    pub fn eval(&self, t: f64, momentum: f64) -> Result<Complex64> {
        (self.eval)(t, momentum)
    }

    /// Coulomb factor W~_+(t,k) = |t|^{-iz/k}.
    pub fn coulomb(z: f64) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Precondition(format!("coupling must be > 0, got {z}")));
        }
        Ok(Self {
            description: format!("|t|^(-i z/k), z = {z}"),
            eval: Arc::new(move |t, k| {
                if t == 0.0 || !t.is_finite() {
                    return Err(Error::Domain(format!("|t|^(-iz/k) undefined at t = {t}")));
                }
                Ok((-I * (z / k) * t.abs().ln()).exp())
            }),
        })
    }

    /// W0 of the radial Schrödinger problem along r = t·k.
    pub fn schrodinger(pot: PotentialSpec) -> Self {
        Self {
            description: "W0(t,k) = exp((i/2k) int_a^{tk} phi)".into(),
            eval: Arc::new(move |t, k| w0_schrodinger(t, k, &pot)),
        }
    }

    /// W0 of the Dirac-type problem in momentum representation.
    pub fn dirac(b_fn: PotentialSpec, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Precondition(format!("mass must be > 0, got {m}")));
        }
        Ok(Self {
            description: "W0(t,p) = exp(i sgn(t) int_1^{|t|} b(r s) dr)".into(),
            eval: Arc::new(move |t, p| w0_dirac(t, p, m, &b_fn)),
        })
    }

    pub fn constant() -> Self {
        Self {
            description: "1".into(),
            eval: Arc::new(|_, _| Ok(Complex64::new(1.0, 0.0))),
        }
    }
}

/// The admissible deviation families shipped with the crate, used by the
/// admissibility sweep.
pub fn builtin_families() -> Vec<DynamicalDeviation> {
    let inv_sq = PotentialSpec::smooth(
        1.0,
        |r| 0.7 / ((1.0 + r) * (1.0 + r)),
        |a, r| 0.7 * (1.0 / (1.0 + a) - 1.0 / (1.0 + r)),
        |r| -1.4 / ((1.0 + r) * (1.0 + r) * (1.0 + r)),
    )
    .unwrap();
    let b_slow = PotentialSpec::smooth(
        1.0,
        |r| 0.3 / (1.0 + r),
        |a, r| 0.3 * ((1.0 + r) / (1.0 + a)).ln(),
        |r| -0.3 / ((1.0 + r) * (1.0 + r)),
    )
    .unwrap();
    let b_fast = PotentialSpec::smooth(
        1.0,
        |r| 1.0 / ((1.0 + r) * (1.0 + r)),
        |a, r| 1.0 / (1.0 + a) - 1.0 / (1.0 + r),
        |r| -2.0 / ((1.0 + r) * (1.0 + r) * (1.0 + r)),
    )
    .unwrap();
    vec![
        DynamicalDeviation::constant(),
        DynamicalDeviation::coulomb(0.5).unwrap(),
        DynamicalDeviation::coulomb(1.0).unwrap(),
        DynamicalDeviation::schrodinger(PotentialSpec::coulomb_schrodinger(1.0, 1.0).unwrap()),
        DynamicalDeviation::schrodinger(inv_sq),
        DynamicalDeviation::dirac(b_fast, 1.0).unwrap(),
        DynamicalDeviation::dirac(b_slow, 1.0).unwrap(),
    ]
}

/// Dynamical deviation factor of the radial Schrödinger problem,
/// W0(t,k) = exp((i/2k) int_a^{tk} phi), with the radial integral evaluated
/// by quadrature of the potential values.
pub fn w0_schrodinger(t: f64, k: f64, pot: &PotentialSpec) -> Result<Complex64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Precondition(format!("wavenumber must be > 0, got {k}")));
    }
    let r = t * k;
    if r < pot.a() {
        return Err(Error::Domain(format!(
            "W0 requires t k >= a, got t k = {r}, a = {}",
            pot.a()
        )));
    }
    let integral = quad::integrate(|u| pot.eval(u), pot.a(), r, tight())?.value;
    Ok((I / (2.0 * k) * integral).exp())
}

/// Max over the grid of |V0(t k, k) - W0(t, k)|: the ergodic equality,
/// stationary side from the radial module's antiderivative rule and the
/// dynamical side from direct quadrature.
pub fn check_ergodic_schrodinger(pot: &PotentialSpec, k: f64, t_grid: &[f64]) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::Precondition("empty time grid".into()));
    }
    let mut worst = 0.0f64;
    for &t in t_grid {
        let stationary = radial::deviation_schrodinger(t * k, k, pot)?;
        let dynamical = w0_schrodinger(t, k, pot)?;
        worst = worst.max((stationary - dynamical).norm());
    }
    Ok(worst)
}

/// Dynamical deviation factor of the Dirac-type problem in momentum
/// representation: exp(i sgn(t) int_1^{|t|} b(r s) dr), s = p/sqrt(p^2+m^2).
pub fn w0_dirac(t: f64, p: f64, m: f64, b_fn: &PotentialSpec) -> Result<Complex64> {
    if !(p > 0.0) || !(m > 0.0) || !p.is_finite() || !m.is_finite() {
        return Err(Error::Precondition(format!("need p > 0 and m > 0, got p = {p}, m = {m}")));
    }
    if t.abs() < 1.0 {
        return Err(Error::Domain(format!("W0 requires |t| >= 1, got t = {t}")));
    }
    let s = p / (p * p + m * m).sqrt();
    let integral = quad::integrate(|r| b_fn.eval(r * s), 1.0, t.abs(), tight())?.value;
    Ok((I * t.signum() * integral).exp())
}

#[derive(Debug, Clone, Copy)]
pub struct DiracErgodicReport {
    /// max over the grid of |ratio(t) - ratio(t0)|
    pub constancy: f64,
    /// max over the grid of ||ratio(t)| - 1|
    pub modulus_defect: f64,
    /// the constant unitary C(p) = ratio(t0)
    pub c_of_p: Complex64,
}

/// Ratio V0(t s, lambda)/W0(t, p) over the grid, where lambda = sqrt(p^2+m^2)
/// (so eta = p and lambda/eta = 1/s), with V0 from the closed antiderivative
/// rule of the potential. The ratio is a t-independent unitary C(p).
///
/// V0 here carries the fixed lower limit 1 of the Dirac-type deviation
/// factor, so b_fn must have reference point a = 1; t s may lie below 1 (the
/// integral just runs backwards), which is why this does not reuse the radial
/// module's r >= a entry point.
pub fn check_ergodic_dirac(
    b_fn: &PotentialSpec,
    p: f64,
    m: f64,
    t_grid: &[f64],
) -> Result<DiracErgodicReport> {
    if b_fn.a() != 1.0 {
        return Err(Error::Precondition(format!(
            "Dirac-type deviation factor fixes the reference point a = 1, got {}",
            b_fn.a()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Precondition("empty time grid".into()));
    }
    if !(p > 0.0) || !(m > 0.0) {
        return Err(Error::Precondition(format!("need p > 0 and m > 0, got p = {p}, m = {m}")));
    }
    let s = p / (p * p + m * m).sqrt();
    let ratio = |t: f64| -> Result<Complex64> {
        if t < 1.0 {
            return Err(Error::Precondition(format!("time grid must satisfy t >= 1, got {t}")));
        }
        let v0 = (I / s * b_fn.antideriv(t * s)).exp();
        Ok(v0 / w0_dirac(t, p, m, b_fn)?)
    };
    let c_of_p = ratio(t_grid[0])?;
    let mut constancy = 0.0f64;
    let mut modulus_defect = 0.0f64;
    for &t in t_grid {
        let r = ratio(t)?;
        constancy = constancy.max((r - c_of_p).norm());
        modulus_defect = modulus_defect.max((r.norm() - 1.0).abs());
    }
    Ok(DiracErgodicReport { constancy, modulus_defect, c_of_p })
}

/// Finite-time surrogate for condition (1.2): sup over the momentum grid of
/// |w(t + tau, k)/w(t, k) - 1| at t = 1e6.
pub fn check_admissibility(w: &DynamicalDeviation, k_grid: &[f64], tau: f64) -> Result<f64> {
    if k_grid.is_empty() {
        return Err(Error::Precondition("empty momentum grid".into()));
    }
    if !tau.is_finite() {
        return Err(Error::Precondition(format!("tau must be finite, got {tau}")));
    }
    let t = ADMISSIBILITY_T;
    let mut worst = 0.0f64;
    for &k in k_grid {
        let num = w.eval(t + tau, k)?;
        let den = w.eval(t, k)?;
        worst = worst.max((num / den - Complex64::new(1.0, 0.0)).norm());
    }
    Ok(worst)
}
