//! One handler per subcommand. Each resolves its parameters (flag > config
//! file > default), dispatches grid points to the ambient worker pool, and
//! returns a sorted table plus any fitted summary values for the header.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::Args;
use num_complex::Complex64;
use rayon::prelude::*;

use genscatter_core::cmatrix::CMatrix;
use genscatter_core::coulomb::{self, CoulombParams};
use genscatter_core::diracq::{self, Momentum3};
use genscatter_core::ergodic;
use genscatter_core::oscillate::{
    fit_log_growth, regularize_by_deviation, s1_truncated, s2_example, TestFunction,
};
use genscatter_core::quad::QuadOptions;
use genscatter_core::radial::{self, PotentialSpec};
use genscatter_core::renorm::{
    dyson_coefficients, fit_divergence_profile, read_profile_samples, regularized_coefficient,
    MatrixInteraction,
};
use genscatter_core::{ode::OdeOptions, Error};

use crate::config::{CliError, GridSpec, ParamValue, Resolver, ScaleList};
use crate::output::{Field, Table};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Output destination and serialization format, shared by every subcommand.
#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Output format: csv or json.
    #[arg(long, value_name = "FMT")]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Result of a subcommand run, ready for the writer.
pub struct CommandResult {
    pub name: &'static str,
    pub table: Table,
    pub extra_meta: Vec<(String, String)>,
}

fn fetch<T: ParamValue>(
    r: &mut Resolver,
    key: &str,
    flag: Option<&str>,
    default: Option<T>,
) -> Result<T, CliError> {
    let flag = Resolver::flag_text::<T>(key, flag)?;
    r.param(key, flag, default)
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn quad_meta() -> Vec<(String, String)> {
    let q = QuadOptions::default();
    vec![
        ("tolerance.quad_abs".to_string(), format!("{:e}", q.abs_tol)),
        ("tolerance.quad_rel".to_string(), format!("{:e}", q.rel_tol)),
    ]
}

fn ode_meta() -> Vec<(String, String)> {
    let o = OdeOptions::default();
    vec![
        ("tolerance.ode_rtol".to_string(), format!("{:e}", o.rtol)),
        ("tolerance.ode_atol".to_string(), format!("{:e}", o.atol)),
    ]
}

fn closed_form_meta() -> Vec<(String, String)> {
    vec![("tolerance.evaluation".to_string(), "closed-form".to_string())]
}

/// Smooth short-range tail c/(1+r)^2 with its closed antiderivative.
fn inverse_square(c: f64, a: f64) -> Result<PotentialSpec, Error> {
    PotentialSpec::smooth(
        a,
        move |r| c / ((1.0 + r) * (1.0 + r)),
        move |a, r| c * (1.0 / (1.0 + a) - 1.0 / (1.0 + r)),
        move |r| -2.0 * c / ((1.0 + r) * (1.0 + r) * (1.0 + r)),
    )
}

// ---------------------------------------------------------------- coulomb-table

/// Closed-form Coulomb scattering functions over a momentum grid.
#[derive(Debug, Args)]
pub struct CoulombTableArgs {
    /// Coulomb coupling z > 0.
    #[arg(long, allow_negative_numbers = true)]
    z: Option<f64>,

    /// Largest angular momentum.
    #[arg(long)]
    lmax: Option<u32>,

    /// Momentum grid min:max:count:{linear,log}.
    #[arg(long, value_name = "GRID")]
    k_grid: Option<String>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn coulomb_table(args: &CoulombTableArgs, r: &mut Resolver) -> Result<CommandResult, CliError> {
    const OP: &str = "coulomb-table";
    let z = r.param("z", args.z, Some(1.0))?;
    let lmax = r.param("lmax", args.lmax, Some(5))?;
    let grid: GridSpec = fetch(
        r,
        "k-grid",
        args.k_grid.as_deref(),
        Some(GridSpec::parse_param("0.1:10:100:log").unwrap()),
    )?;

    let jobs: Vec<(f64, u32)> =
        grid.points().into_iter().flat_map(|k| (0..=lmax).map(move |ell| (k, ell))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, ell)| -> Result<Vec<Field>, CliError> {
            let params = CoulombParams::new(z, k, ell).map_err(CliError::compute(OP))?;
            let s_dyn = coulomb::s_dyn(&params).map_err(CliError::compute(OP))?;
            let s_st = coulomb::s_st(&params).map_err(CliError::compute(OP))?;
            Ok(vec![
                Field::Num(k),
                Field::Int(ell as i64),
                Field::Num(s_dyn.value().re),
                Field::Num(s_dyn.value().im),
                Field::Num(s_st.value().re),
                Field::Num(s_st.value().im),
                Field::Num(s_dyn.unitarity_defect().max(s_st.unitarity_defect())),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table =
        Table::new(&["k", "ell", "re_s_dyn", "im_s_dyn", "re_s_st", "im_s_st", "abs_err_unitarity"]);
    for row in rows {
        table.push(row);
    }
    table.sort();
    Ok(CommandResult { name: OP, table, extra_meta: closed_form_meta() })
}

// --------------------------------------------------------------- radial-extract

/// Scattering functions extracted from the radial Schrodinger equation.
#[derive(Debug, Args)]
pub struct RadialExtractArgs {
    /// Potential family: coulomb, inverse-square, or zero.
    #[arg(long)]
    potential: Option<String>,

    /// Coupling strength of the potential family.
    #[arg(long, allow_negative_numbers = true)]
    strength: Option<f64>,

    /// Reference point a of the deviation-factor antiderivative.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,

    /// Largest angular momentum.
    #[arg(long)]
    lmax: Option<u32>,

    /// Momentum grid min:max:count:{linear,log}.
    #[arg(long, value_name = "GRID")]
    k_grid: Option<String>,

    /// Matching radius R.
    #[arg(long, allow_negative_numbers = true)]
    big_r: Option<f64>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn radial_extract(
    args: &RadialExtractArgs,
    r: &mut Resolver,
) -> Result<CommandResult, CliError> {
    const OP: &str = "radial-extract";
    let kind: String = fetch(r, "potential", args.potential.as_deref(), Some("coulomb".into()))?;
    let strength = r.param("strength", args.strength, Some(1.0))?;
    let a = r.param("a", args.a, Some(1.0))?;
    let lmax = r.param("lmax", args.lmax, Some(3))?;
    let grid: GridSpec = fetch(
        r,
        "k-grid",
        args.k_grid.as_deref(),
        Some(GridSpec::parse_param("0.5:2:4:linear").unwrap()),
    )?;
    let big_r = r.param("big-r", args.big_r, Some(2000.0))?;

    let pot = match kind.as_str() {
        "coulomb" => {
            PotentialSpec::coulomb_schrodinger(strength, a).map_err(CliError::compute(OP))?
        }
        "inverse-square" => inverse_square(strength, a).map_err(CliError::compute(OP))?,
        "zero" => PotentialSpec::zero(),
        other => {
            return Err(CliError::Config(format!(
                "potential `{other}` must be one of coulomb, inverse-square, zero"
            )))
        }
    };

    let jobs: Vec<(f64, u32)> =
        grid.points().into_iter().flat_map(|k| (0..=lmax).map(move |ell| (k, ell))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, ell)| -> Result<Vec<Field>, CliError> {
            let s = radial::extract_s_schrodinger(ell, k, &pot, big_r)
                .map_err(CliError::compute(OP))?;
            Ok(vec![
                Field::Num(k),
                Field::Int(ell as i64),
                Field::Num(s.value().re),
                Field::Num(s.value().im),
                Field::Num(s.unitarity_defect()),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["k", "ell", "re_s", "im_s", "unitarity_defect"]);
    for row in rows {
        table.push(row);
    }
    table.sort();
    Ok(CommandResult { name: OP, table, extra_meta: ode_meta() })
}

// ---------------------------------------------------------------- dirac-extract

/// Scattering functions of the radial Dirac or Dirac-type system.
#[derive(Debug, Args)]
pub struct DiracExtractArgs {
    /// System: radial (Coulomb-type potential) or type (first-order system
    /// with a smooth b-coefficient).
    #[arg(long)]
    system: Option<String>,

    /// Spectral grid in lambda, min:max:count:{linear,log}; |lambda| > m.
    #[arg(long, value_name = "GRID")]
    lambda_grid: Option<String>,

    /// Mass m > 0.
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,

    /// Dirac quantum number k (radial system).
    #[arg(long, allow_negative_numbers = true)]
    kq: Option<f64>,

    /// Coupling strength (radial: Coulomb A; type: inverse-square tail).
    #[arg(long, allow_negative_numbers = true)]
    strength: Option<f64>,

    /// Matching radius R.
    #[arg(long, allow_negative_numbers = true)]
    big_r: Option<f64>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn dirac_extract(args: &DiracExtractArgs, r: &mut Resolver) -> Result<CommandResult, CliError> {
    const OP: &str = "dirac-extract";
    let system: String = fetch(r, "system", args.system.as_deref(), Some("radial".into()))?;
    let grid: GridSpec = fetch(
        r,
        "lambda-grid",
        args.lambda_grid.as_deref(),
        Some(GridSpec::parse_param("1.5:3:4:linear").unwrap()),
    )?;
    let m = r.param("m", args.m, Some(1.0))?;
    let strength = r.param("strength", args.strength, Some(0.5))?;
    let big_r = r.param("big-r", args.big_r, Some(1000.0))?;

    enum System {
        Radial { kq: f64, pot: PotentialSpec },
        DiracType { a_fn: PotentialSpec, b_fn: PotentialSpec },
    }
    let system = match system.as_str() {
        "radial" => {
            let kq = r.param("kq", args.kq, Some(1.0))?;
            let pot = PotentialSpec::coulomb_dirac(strength, 1.0).map_err(CliError::compute(OP))?;
            System::Radial { kq, pot }
        }
        "type" => System::DiracType {
            a_fn: PotentialSpec::zero(),
            b_fn: inverse_square(strength, 1.0).map_err(CliError::compute(OP))?,
        },
        other => {
            return Err(CliError::Config(format!("system `{other}` must be radial or type")))
        }
    };

    let lambdas = grid.points();
    let rows = lambdas
        .par_iter()
        .map(|&lambda| -> Result<Vec<Field>, CliError> {
            let s = match &system {
                System::Radial { kq, pot } => {
                    radial::extract_s_dirac(*kq, lambda, m, pot, big_r)
                }
                System::DiracType { a_fn, b_fn } => {
                    radial::extract_s_dirac_type(a_fn, b_fn, lambda, m, big_r)
                }
            }
            .map_err(CliError::compute(OP))?;
            Ok(vec![
                Field::Num(lambda),
                Field::Num(s.s11.value().re),
                Field::Num(s.s11.value().im),
                Field::Num(s.s22.value().re),
                Field::Num(s.s22.value().im),
                Field::Num(s.s11.unitarity_defect().max(s.s22.unitarity_defect())),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table =
        Table::new(&["lambda", "re_s11", "im_s11", "re_s22", "im_s22", "unitarity_defect"]);
    for row in rows {
        table.push(row);
    }
    table.sort();
    Ok(CommandResult { name: OP, table, extra_meta: ode_meta() })
}

// ---------------------------------------------------------------- ergodic-check

/// Stationary/dynamical deviation-factor consistency over a time grid.
#[derive(Debug, Args)]
pub struct ErgodicCheckArgs {
    /// Deviation family: coulomb, inverse-square, or dirac.
    #[arg(long)]
    family: Option<String>,

    /// Coulomb coupling z > 0 (family coulomb).
    #[arg(long, allow_negative_numbers = true)]
    z: Option<f64>,

    /// Tail strength (families inverse-square and dirac).
    #[arg(long, allow_negative_numbers = true)]
    strength: Option<f64>,

    /// Momentum k (Schrodinger families).
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,

    /// Momentum p (family dirac).
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,

    /// Mass m (family dirac).
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,

    /// Time grid min:max:count:{linear,log}.
    #[arg(long, value_name = "GRID")]
    t_grid: Option<String>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn ergodic_check(args: &ErgodicCheckArgs, r: &mut Resolver) -> Result<CommandResult, CliError> {
    const OP: &str = "ergodic-check";
    let family: String = fetch(r, "family", args.family.as_deref(), Some("coulomb".into()))?;
    let grid: GridSpec = fetch(
        r,
        "t-grid",
        args.t_grid.as_deref(),
        Some(GridSpec::parse_param("1:1e4:50:log").unwrap()),
    )?;
    let t_grid = grid.points();

    let (mut table, row) = match family.as_str() {
        "coulomb" | "inverse-square" => {
            let k = r.param("k", args.k, Some(2.0))?;
            let pot = if family == "coulomb" {
                let z = r.param("z", args.z, Some(1.0))?;
                PotentialSpec::coulomb_schrodinger(z, 1.0).map_err(CliError::compute(OP))?
            } else {
                let strength = r.param("strength", args.strength, Some(0.7))?;
                inverse_square(strength, 1.0).map_err(CliError::compute(OP))?
            };
            let dev = ergodic::check_ergodic_schrodinger(&pot, k, &t_grid)
                .map_err(CliError::compute(OP))?;
            (
                Table::new(&["family", "k", "max_deviation"]),
                vec![Field::Text(family.clone()), Field::Num(k), Field::Num(dev)],
            )
        }
        "dirac" => {
            let strength = r.param("strength", args.strength, Some(0.7))?;
            let p = r.param("p", args.p, Some(1.0))?;
            let m = r.param("m", args.m, Some(1.0))?;
            let b_fn = inverse_square(strength, 1.0).map_err(CliError::compute(OP))?;
            let report = ergodic::check_ergodic_dirac(&b_fn, p, m, &t_grid)
                .map_err(CliError::compute(OP))?;
            (
                Table::new(&["family", "p", "m", "constancy", "modulus_defect", "re_c", "im_c"]),
                vec![
                    Field::Text(family.clone()),
                    Field::Num(p),
                    Field::Num(m),
                    Field::Num(report.constancy),
                    Field::Num(report.modulus_defect),
                    Field::Num(report.c_of_p.re),
                    Field::Num(report.c_of_p.im),
                ],
            )
        }
        other => {
            return Err(CliError::Config(format!(
                "family `{other}` must be one of coulomb, inverse-square, dirac"
            )))
        }
    };
    table.push(row);
    Ok(CommandResult { name: OP, table, extra_meta: quad_meta() })
}

// -------------------------------------------------------------- dirac-structure

/// Block-structure check of a unitary against the momentum-space Dirac
/// spectral projectors.
#[derive(Debug, Args)]
pub struct DiracStructureArgs {
    /// Momentum components.
    #[arg(long, allow_negative_numbers = true)]
    q1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q3: Option<f64>,

    /// Mass m > 0.
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,

    /// Test matrix: phase (spectral function of H) or random (generic
    /// unitary).
    #[arg(long)]
    mode: Option<String>,

    /// Spectral phases for mode = phase.
    #[arg(long, allow_negative_numbers = true)]
    theta_neg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta_pos: Option<f64>,

    /// Seed for mode = random.
    #[arg(long)]
    seed: Option<u64>,

    /// Matrix dimension: 4 or 8 (doubled form).
    #[arg(long)]
    dim: Option<usize>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn dirac_structure(
    args: &DiracStructureArgs,
    r: &mut Resolver,
) -> Result<CommandResult, CliError> {
    const OP: &str = "dirac-structure";
    let q1 = r.param("q1", args.q1, Some(1.0))?;
    let q2 = r.param("q2", args.q2, Some(2.0))?;
    let q3 = r.param("q3", args.q3, Some(3.0))?;
    let m = r.param("m", args.m, Some(1.0))?;
    let mode: String = fetch(r, "mode", args.mode.as_deref(), Some("phase".into()))?;
    let dim = r.param("dim", args.dim, Some(4))?;
    if dim != 4 && dim != 8 {
        return Err(CliError::Config(format!("dim must be 4 or 8, got {dim}")));
    }

    let q = Momentum3::new(q1, q2, q3).map_err(CliError::compute(OP))?;
    let dec = if dim == 4 {
        diracq::eigensystem(q, m).map_err(CliError::compute(OP))?
    } else {
        diracq::big_eigensystem(q, m).map_err(CliError::compute(OP))?
    };
    let s = match mode.as_str() {
        "phase" => {
            let theta_neg = r.param("theta-neg", args.theta_neg, Some(0.7))?;
            let theta_pos = r.param("theta-pos", args.theta_pos, Some(-0.4))?;
            diracq::spectral_phase(&dec, theta_neg, theta_pos)
        }
        "random" => {
            let seed = r.param("seed", args.seed, Some(0))?;
            diracq::random_unitary(dim, seed)
        }
        other => return Err(CliError::Config(format!("mode `{other}` must be phase or random"))),
    };
    let (offblock, block_defect) = diracq::check_structure(&s, q, m).map_err(CliError::compute(OP))?;

    let mut table = Table::new(&["mode", "dim", "offblock_norm", "block_defect"]);
    table.push(vec![
        Field::Text(mode),
        Field::Int(dim as i64),
        Field::Num(offblock),
        Field::Num(block_defect),
    ]);
    let mut extra = closed_form_meta();
    extra.push(("spectrum.eigenvalue_neg".to_string(), sci(dec.eigenvalue_neg)));
    extra.push(("spectrum.eigenvalue_pos".to_string(), sci(dec.eigenvalue_pos)));
    Ok(CommandResult { name: OP, table, extra_meta: extra })
}

// -------------------------------------------------------------- divergence-demo

/// Raw vs regularized first-order coefficient over a window sweep, with the
/// fitted log-slopes in the header.
#[derive(Debug, Args)]
pub struct DivergenceDemoArgs {
    /// Momentum k inside the test-function support.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,

    /// Coulomb coupling z > 0.
    #[arg(long, allow_negative_numbers = true)]
    z: Option<f64>,

    /// Angular momentum.
    #[arg(long)]
    ell: Option<u32>,

    /// Window scales T (t = T, tau = -T), comma-separated.
    #[arg(long, value_name = "LIST")]
    scales: Option<String>,

    /// Coupling of the model value exp(coupling * coefficient).
    #[arg(long, allow_negative_numbers = true)]
    coupling: Option<f64>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn divergence_demo(
    args: &DivergenceDemoArgs,
    r: &mut Resolver,
) -> Result<CommandResult, CliError> {
    const OP: &str = "divergence-demo";
    let k = r.param("k", args.k, Some(1.0))?;
    let z = r.param("z", args.z, Some(1.0))?;
    let ell = r.param("ell", args.ell, Some(0))?;
    let scales: ScaleList = fetch(
        r,
        "scales",
        args.scales.as_deref(),
        Some(ScaleList(vec![1e2, 1e3, 1e4])),
    )?;
    let coupling = r.param("coupling", args.coupling, Some(0.1))?;
    if !(coupling > 0.0) || !coupling.is_finite() {
        return Err(CliError::Config(format!("coupling must be > 0, got {coupling}")));
    }

    let f = TestFunction::default_bump();
    let fk = f.eval(k);
    if !(fk > 0.0) {
        let (c1, c2) = f.support;
        return Err(CliError::Compute {
            op: OP,
            source: Error::Precondition(format!(
                "momentum k = {k} lies outside the open test-function support ({c1}, {c2})"
            )),
        });
    }
    let params = CoulombParams::new(z, k, ell).map_err(CliError::compute(OP))?;
    let phi = 1.0 / k;

    let per_scale = scales
        .0
        .par_iter()
        .map(|&big_t| -> Result<(f64, Complex64, Complex64), CliError> {
            let coeff = s1_truncated(k, &params, big_t, -big_t, &f)
                .map_err(CliError::compute(OP))?
                / fk;
            // Dress the model value exp(coupling * coefficient) with the
            // power-factor sandwich at phi = 1/k; the log recovers the
            // regularized coefficient exactly.
            let raw_value = (coupling * coeff).exp();
            let reg = regularize_by_deviation(
                move |_, _| raw_value,
                move |t: f64| (I * coupling * phi * t.ln()).exp(),
                move |tau: f64| (-I * coupling * phi * tau.abs().ln()).exp(),
            );
            let reg_coeff = reg(big_t, -big_t).ln() / coupling;
            Ok((big_t, coeff, reg_coeff))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["scale", "raw_re", "raw_im", "reg_re", "reg_im"]);
    let mut raw_samples = Vec::new();
    let mut reg_samples = Vec::new();
    for &(big_t, coeff, reg_coeff) in &per_scale {
        raw_samples.push((big_t * big_t, coeff.im));
        reg_samples.push((big_t * big_t, reg_coeff.im));
        table.push(vec![
            Field::Num(big_t),
            Field::Num(coeff.re),
            Field::Num(coeff.im),
            Field::Num(reg_coeff.re),
            Field::Num(reg_coeff.im),
        ]);
    }
    table.sort();

    let mut extra = quad_meta();
    if per_scale.len() >= 3 {
        let raw_fit = fit_log_growth(&raw_samples).map_err(CliError::compute(OP))?;
        let reg_fit = fit_log_growth(&reg_samples).map_err(CliError::compute(OP))?;
        extra.push(("fit.raw_slope".to_string(), sci(raw_fit.slope)));
        extra.push(("fit.reg_slope".to_string(), sci(reg_fit.slope)));
        extra.push(("fit.target_slope".to_string(), sci(phi)));
    }
    Ok(CommandResult { name: OP, table, extra_meta: extra })
}

// -------------------------------------------------------------------- example82

/// Second-order coefficient of the rank-one example over a window sweep.
#[derive(Debug, Args)]
pub struct Example82Args {
    /// Spectral point q inside the test-function support.
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,

    /// Constant value of the symbol p.
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,

    /// Interaction strength epsilon.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,

    /// Window scales T (t = T, tau = -T), comma-separated.
    #[arg(long, value_name = "LIST")]
    scales: Option<String>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn example82(args: &Example82Args, r: &mut Resolver) -> Result<CommandResult, CliError> {
    const OP: &str = "example82";
    let q = r.param("q", args.q, Some(1.0))?;
    let p = r.param("p", args.p, Some(1.0))?;
    let eps = r.param("eps", args.eps, Some(1.0))?;
    let scales: ScaleList = fetch(
        r,
        "scales",
        args.scales.as_deref(),
        Some(ScaleList(vec![1e2, 1e3, 1e4])),
    )?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CliError::Config(format!("eps must be > 0, got {eps}")));
    }

    let f = TestFunction::default_bump();
    let fq = f.eval(q);
    if !(fq > 0.0) {
        let (c1, c2) = f.support;
        return Err(CliError::Compute {
            op: OP,
            source: Error::Precondition(format!(
                "spectral point q = {q} lies outside the open test-function support ({c1}, {c2})"
            )),
        });
    }

    let per_scale = scales
        .0
        .par_iter()
        .map(|&big_t| -> Result<(f64, Complex64), CliError> {
            let v = s2_example(q, big_t, -big_t, |_| p, eps).map_err(CliError::compute(OP))?;
            Ok((big_t, v / (eps * eps * fq)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["scale", "coeff_re", "coeff_im"]);
    let mut samples = Vec::new();
    for &(big_t, coeff) in &per_scale {
        samples.push((big_t * big_t, coeff.im));
        table.push(vec![Field::Num(big_t), Field::Num(coeff.re), Field::Num(coeff.im)]);
    }
    table.sort();

    let mut extra = quad_meta();
    if per_scale.len() >= 3 {
        let fit = fit_log_growth(&samples).map_err(CliError::compute(OP))?;
        extra.push(("fit.slope".to_string(), sci(fit.slope)));
        extra.push(("fit.target_slope".to_string(), sci(-PI * p * p / (2.0 * q))));
    }
    Ok(CommandResult { name: OP, table, extra_meta: extra })
}

// ------------------------------------------------------------------- renorm-fit

/// Fit a divergence profile to cutoff samples and regularize them.
#[derive(Debug, Args)]
pub struct RenormFitArgs {
    /// CSV of samples: columns l, re, im (header optional, `#` comments).
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn renorm_fit(args: &RenormFitArgs, r: &mut Resolver) -> Result<CommandResult, CliError> {
    const OP: &str = "renorm-fit";
    let input: String =
        fetch(r, "input", args.input.as_deref().and_then(|p| p.to_str()), None)?;
    let file = std::fs::File::open(&input)
        .map_err(|e| CliError::Config(format!("cannot read samples file {input}: {e}")))?;
    let samples =
        read_profile_samples(std::io::BufReader::new(file)).map_err(CliError::compute(OP))?;

    let fit = fit_divergence_profile(&samples).map_err(CliError::compute(OP))?;
    let mut table = Table::new(&["l", "raw_re", "raw_im", "reg_re", "reg_im"]);
    for &(l, a2) in &samples {
        let reg = regularized_coefficient(a2, &fit.profile, l).map_err(CliError::compute(OP))?;
        table.push(vec![
            Field::Num(l),
            Field::Num(a2.re),
            Field::Num(a2.im),
            Field::Num(reg.re),
            Field::Num(reg.im),
        ]);
    }
    table.sort();

    let extra = vec![
        ("fit.phi".to_string(), sci(fit.profile.phi)),
        ("fit.psi".to_string(), sci(fit.profile.psi)),
        ("fit.nu".to_string(), sci(fit.profile.nu)),
        ("fit.mu".to_string(), sci(fit.profile.mu)),
        ("fit.residual".to_string(), sci(fit.residual)),
        ("tolerance.evaluation".to_string(), "direct least-squares".to_string()),
    ];
    Ok(CommandResult { name: OP, table, extra_meta: extra })
}

// ------------------------------------------------------------------------ dyson

/// Expansion coefficients of the time-ordered interaction series.
#[derive(Debug, Args)]
pub struct DysonArgs {
    /// Interaction: pauli (2x2, non-commuting) or scalar.
    #[arg(long)]
    interaction: Option<String>,

    /// Scalar interaction value (interaction = scalar).
    #[arg(long, allow_negative_numbers = true)]
    v: Option<f64>,

    /// Window start.
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,

    /// Window end.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,

    /// Truncation order (at most 12).
    #[arg(long)]
    order: Option<usize>,

    /// Strengths epsilon at which to report partial-sum unitarity defects.
    #[arg(long, value_name = "LIST")]
    eps_list: Option<String>,

    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn dyson(args: &DysonArgs, r: &mut Resolver) -> Result<CommandResult, CliError> {
    const OP: &str = "dyson";
    let interaction: String =
        fetch(r, "interaction", args.interaction.as_deref(), Some("pauli".into()))?;
    let t0 = r.param("t0", args.t0, Some(0.0))?;
    let t = r.param("t", args.t, Some(2.0))?;
    let order = r.param("order", args.order, Some(8))?;
    let eps_list: ScaleList = fetch(
        r,
        "eps-list",
        args.eps_list.as_deref(),
        Some(ScaleList(vec![0.2, 0.1, 0.05])),
    )?;

    let v = match interaction.as_str() {
        "pauli" => MatrixInteraction::new(2, |t| {
            CMatrix::from_rows(&[
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -t)],
                vec![Complex64::new(0.0, t), Complex64::new(-1.0, 0.0)],
            ])
            .expect("2x2")
        })
        .expect("dimension 2"),
        "scalar" => {
            let value = r.param("v", args.v, Some(0.7))?;
            MatrixInteraction::scalar(value)
        }
        other => {
            return Err(CliError::Config(format!(
                "interaction `{other}` must be pauli or scalar"
            )))
        }
    };

    let coeffs = dyson_coefficients(&v, t0, t, order).map_err(CliError::compute(OP))?;
    let dim = v.dimension();
    let mut table = Table::new(&["order", "row", "col", "re", "im"]);
    for (k, c) in coeffs.iter().enumerate() {
        for i in 0..dim {
            for j in 0..dim {
                table.push(vec![
                    Field::Int(k as i64),
                    Field::Int(i as i64),
                    Field::Int(j as i64),
                    Field::Num(c[(i, j)].re),
                    Field::Num(c[(i, j)].im),
                ]);
            }
        }
    }
    table.sort();

    let mut extra = quad_meta();
    for &eps in &eps_list.0 {
        let mut sum = CMatrix::zeros(dim);
        let mut power = 1.0;
        for c in &coeffs {
            sum = sum.add(&c.scale(Complex64::new(power, 0.0)));
            power *= eps;
        }
        let defect = sum.adjoint().mul(&sum).sub(&CMatrix::identity(dim)).frobenius_norm();
        extra.push((format!("unitarity.eps_{eps}"), sci(defect)));
    }
    Ok(CommandResult { name: OP, table, extra_meta: extra })
}
