//! Closed-form Coulomb scattering functions.
//!
//! For the Coulomb potential 2z/r at energy k^2 and angular momentum ell, the
//! dynamical and stationary scattering functions are
//!
//!   S_dyn(k) = (2k)^(4iz/k) Gamma(ell + 1 - iz/k) / Gamma(ell + 1 + iz/k),
//!   S_st(k)  =              Gamma(ell + 1 - iz/k) / Gamma(ell + 1 + iz/k),
//!
//! so the two differ exactly by the phase factor (2k)^(4iz/k). The associated
//! dynamical deviation factors are the pure phases |t|^(-+ iz/k), and the
//! stationary first-order kernel is a Legendre Q function of
//! (k^2 + p^2)/(2pk). All Gamma ratios are evaluated as exp of a log-gamma
//! difference, which keeps the results on the unit circle to within a few
//! ulps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{digamma, legendre_q, log_gamma};

/// Parameters of the Coulomb problem: coupling z > 0, wavenumber k > 0, and
/// angular momentum ell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoulombParams {
    pub z: f64,
    pub k: f64,
    pub ell: u32,
}

impl CoulombParams {
    pub fn new(z: f64, k: f64, ell: u32) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Precondition(format!("coulomb z must be > 0, got {z}")));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Precondition(format!("coulomb k must be > 0, got {k}")));
        }
        Ok(Self { z, k, ell })
    }
}

/// A scattering function value. These are unimodular by construction; the
/// residual |(|value|) - 1| is exposed for diagnostics rather than enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringValue {
    value: Complex64,
}

impl ScatteringValue {
    pub fn new(value: Complex64) -> Self {
        Self { value }
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn arg(&self) -> f64 {
        self.value.arg()
    }

    pub fn unitarity_defect(&self) -> f64 {
        (self.value.norm() - 1.0).abs()
    }
}

/// Which of the two deviation branches |t|^(-iz/k) (plus) or |t|^(+iz/k)
/// (minus) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationBranch {
    Plus,
    Minus,
}

fn gamma_ratio(ell: u32, zeta: f64) -> Result<Complex64> {
    // Gamma(ell+1 - i zeta) / Gamma(ell+1 + i zeta) via log-gamma difference.
    let upper = log_gamma(Complex64::new((ell + 1) as f64, -zeta))?;
    let lower = log_gamma(Complex64::new((ell + 1) as f64, zeta))?;
    Ok((upper - lower).exp())
}

/// Dynamical Coulomb scattering function.
pub fn s_dyn(params: &CoulombParams) -> Result<ScatteringValue> {
    let zeta = params.z / params.k;
    let phase = Complex64::new(0.0, 4.0 * zeta * (2.0 * params.k).ln()).exp();
    Ok(ScatteringValue::new(phase * gamma_ratio(params.ell, zeta)?))
}

/// Stationary Coulomb scattering function.
pub fn s_st(params: &CoulombParams) -> Result<ScatteringValue> {
    let zeta = params.z / params.k;
    Ok(ScatteringValue::new(gamma_ratio(params.ell, zeta)?))
}

/// Dynamical deviation factor |t|^(-+ iz/k) for the Coulomb problem.
///
/// Defined for every t != 0; at |t| = 1 both branches equal 1.
pub fn coulomb_deviation(t: f64, params: &CoulombParams, branch: DeviationBranch) -> Result<Complex64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!(
            "coulomb deviation factor undefined at t = {t}"
        )));
    }
    let sign = match branch {
        DeviationBranch::Plus => -1.0,
        DeviationBranch::Minus => 1.0,
    };
    Ok(Complex64::new(0.0, sign * params.z / params.k * t.abs().ln()).exp())
}

/// Stationary first-order kernel R_ell(k, p) = -(2z/pi) Q_ell((k^2+p^2)/(2pk)).
///
/// Logarithmically singular on the diagonal p = k, which is rejected.
pub fn kernel_r(k: f64, p: f64, params: &CoulombParams) -> Result<f64> {
    if !(k > 0.0) || !(p > 0.0) {
        return Err(Error::Precondition(format!(
            "kernel_r requires k, p > 0, got k = {k}, p = {p}"
        )));
    }
    let x = (k * k + p * p) / (2.0 * p * k);
    if !(x > 1.0) {
        return Err(Error::Domain(format!(
            "kernel_r singular on the diagonal p = k (k = {k}, p = {p})"
        )));
    }
    Ok(-(2.0 * params.z / std::f64::consts::PI) * legendre_q(params.ell, x)?)
}

/// First-order expansion coefficient of the dynamical scattering function in
/// the coupling: -(2i/k) (psi(ell + 1) - 2 ln 2k).
///
/// The value is the z-derivative of log S_dyn at z = 0, i.e. the coupling has
/// been factored out; multiply by z to recover the physical first-order term.
pub fn s1_coefficient(k: f64, ell: u32) -> Result<Complex64> {
    if !(k > 0.0) {
        return Err(Error::Precondition(format!(
            "s1_coefficient requires k > 0, got {k}"
        )));
    }
    let psi = digamma(Complex64::new((ell + 1) as f64, 0.0))?.re;
    Ok(Complex64::new(0.0, -(2.0 / k) * (psi - 2.0 * (2.0 * k).ln())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn unit_modulus_across_parameter_grid() {
        for ell in 0..=5u32 {
            for iz in 1..=5 {
                for ik in 0..40 {
                    let k = 0.1 * 1.2f64.powi(ik);
                    let params = CoulombParams::new(iz as f64, k, ell).unwrap();
                    let d = s_dyn(&params).unwrap();
                    let s = s_st(&params).unwrap();
                    assert!(d.unitarity_defect() < 1e-12, "s_dyn at ell={ell} z={iz} k={k}");
                    assert!(s.unitarity_defect() < 1e-12, "s_st at ell={ell} z={iz} k={k}");
                }
            }
        }
    }

    #[test]
    fn dynamical_to_stationary_ratio_is_pure_log_phase() {
        for &(z, k, ell) in &[(1.0, 0.5, 0u32), (2.0, 1.0, 3), (0.3, 7.0, 5)] {
            let params = CoulombParams::new(z, k, ell).unwrap();
            let ratio = s_dyn(&params).unwrap().value() / s_st(&params).unwrap().value();
            let expected = Complex64::new(0.0, 4.0 * z / k * (2.0 * k).ln()).exp();
            assert!((ratio - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn stationary_phase_at_unit_coupling_ratio() {
        // z/k = 1, ell = 0: S_st = exp(-2i arg Gamma(1 + i)).
        let params = CoulombParams::new(2.0, 2.0, 0).unwrap();
        let arg_gamma = log_gamma(Complex64::new(1.0, 1.0)).unwrap().im;
        let expected = Complex64::new(0.0, -2.0 * arg_gamma).exp();
        assert!((s_st(&params).unwrap().value() - expected).norm() < 1e-13);
    }

    #[test]
    fn stationary_value_is_ratio_of_conjugate_gammas() {
        let params = CoulombParams::new(1.5, 3.0, 2).unwrap();
        let zeta = params.z / params.k;
        let num = log_gamma(Complex64::new(3.0, -zeta)).unwrap().exp();
        let den = log_gamma(Complex64::new(3.0, zeta)).unwrap().exp();
        let direct = num / den;
        assert!((s_st(&params).unwrap().value() - direct).norm() < 1e-13);
    }

    #[test]
    fn deviation_branches_are_conjugate_phases() {
        let params = CoulombParams::new(1.0, 2.0, 0).unwrap();
        for &t in &[1.0, 10.0, 1e4, -3.0, 0.2] {
            let plus = coulomb_deviation(t, &params, DeviationBranch::Plus).unwrap();
            let minus = coulomb_deviation(t, &params, DeviationBranch::Minus).unwrap();
            assert!((plus - minus.conj()).norm() < 1e-15);
            assert_relative_eq!(plus.norm(), 1.0, epsilon = 1e-15);
            let expected = Complex64::new(0.0, -(1.0 / 2.0) * t.abs().ln()).exp();
            assert!((plus - expected).norm() < 1e-14);
        }
        assert!((coulomb_deviation(1.0, &params, DeviationBranch::Plus).unwrap()
            - Complex64::new(1.0, 0.0))
        .norm()
            < 1e-15);
        assert!(coulomb_deviation(0.0, &params, DeviationBranch::Plus).is_err());
    }

    #[test]
    fn kernel_matches_legendre_q_scaling() {
        let params = CoulombParams::new(2.0, 1.0, 1).unwrap();
        let k = 1.0;
        let p = 2.0;
        let x = (k * k + p * p) / (2.0 * p * k);
        let expected = -(2.0 * 2.0 / PI) * legendre_q(1, x).unwrap();
        assert_relative_eq!(kernel_r(k, p, &params).unwrap(), expected, max_relative = 1e-12);
        assert!(kernel_r(1.0, 1.0, &params).is_err());
    }

    #[test]
    fn kernel_symmetric_in_k_p() {
        let params = CoulombParams::new(1.0, 1.0, 3).unwrap();
        let a = kernel_r(0.7, 1.9, &params).unwrap();
        let b = kernel_r(1.9, 0.7, &params).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn s1_coefficient_reference_value() {
        // k = 1, ell = 0: -(2i)(psi(1) - 2 ln 2) = -2i(-gamma - 2 ln 2)... i.e.
        // purely imaginary with Im = 2(gamma + 2 ln 2).
        let c = s1_coefficient(1.0, 0).unwrap();
        assert!(c.re.abs() < 1e-15);
        let gamma = -digamma(Complex64::new(1.0, 0.0)).unwrap().re;
        assert_relative_eq!(c.im, 2.0 * (gamma + 2.0 * 2.0f64.ln()), max_relative = 1e-13);
    }

    #[test]
    fn s1_coefficient_is_coupling_derivative_of_log_s_dyn() {
        // Numerical d/dz log S_dyn at z -> 0 against the closed form.
        for &(k, ell) in &[(1.0, 0u32), (0.5, 2), (3.0, 1)] {
            let h = 1e-6;
            let sp = s_dyn(&CoulombParams::new(h, k, ell).unwrap()).unwrap().value();
            let sm = s_dyn(&CoulombParams::new(2.0 * h, k, ell).unwrap()).unwrap().value();
            // Richardson on log S(z): (2 log S(h) - log S(2h)/... ) simple:
            // log S is analytic and odd-free near 0; first difference suffices.
            let d1 = sp.ln() / h;
            let d2 = sm.ln() / (2.0 * h);
            let extrap = 2.0 * d1 - d2;
            let expected = s1_coefficient(k, ell).unwrap();
            assert!(
                (extrap - expected).norm() < 1e-7 * (1.0 + expected.norm()),
                "k = {k}, ell = {ell}: {extrap} vs {expected}"
            );
        }
    }
}
