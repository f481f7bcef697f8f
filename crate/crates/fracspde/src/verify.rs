//! Built-in verification suites.
//!
//! Each suite checks one module against closed forms and invariants and
//! writes `<suite>_report.csv` with columns `check, value, expected,
//! tolerance, pass`. Every check is named and its tolerance can be
//! overridden with `--tol NAME=VALUE`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use fracspde_core::kernel::{
    green_exp_moment, green_exp_moment_quadrature, green_kernel, green_kernel_spectral, green_l2_norm, green_mass,
};
use fracspde_core::renewal::{check_supersolution, picard_iterate, solve_renewal, solve_renewal_on_grid, Ordering};
use fracspde_core::spde_sim::{energy_bound_rate, front_bounds, lower_bound_rate, second_moment_renewal};
use fracspde_core::spde_sim::estimate_moment;
use fracspde_core::spde_sim::simulate;
use fracspde_core::special_fn::{gamma_fn, ml_bounds, mittag_leffler};
use fracspde_core::stats::least_squares_line;
use fracspde_core::subordinator::{
    inverse_subordinator_density, inverse_subordinator_density_at_zero, inverse_subordinator_mgf, stable_density,
};
use fracspde_core::{
    Boundary, Forcing, MLParams, ModelParams, NonlinearitySpec, RenewalProblem, SimulationSpec, SpaceTimeGrid,
    SubordinatorParams,
};
use serde::{Deserialize, Serialize};

use crate::{numerical, Check, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[value(name = "special_fn")]
    SpecialFn,
    Subordinator,
    Kernel,
    Renewal,
    Spde,
    All,
}

impl Suite {
    pub const MODULES: [Suite; 5] = [Suite::SpecialFn, Suite::Subordinator, Suite::Kernel, Suite::Renewal, Suite::Spde];

    pub fn name(self) -> &'static str {
        match self {
            Suite::SpecialFn => "special_fn",
            Suite::Subordinator => "subordinator",
            Suite::Kernel => "kernel",
            Suite::Renewal => "renewal",
            Suite::Spde => "spde",
            Suite::All => "all",
        }
    }

    /// The module suites `self` stands for.
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => Self::MODULES.to_vec(),
            s => vec![s],
        }
    }

    fn tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Suite::SpecialFn => &[
                ("gamma_half", 1e-14),
                ("ml_exponential", 1e-12),
                ("ml_half_order_1", 1e-10),
                ("ml_half_order_3", 1e-10),
                ("ml_sandwich", 1e-9),
            ],
            Suite::Subordinator => &[
                ("levy_density", 1e-10),
                ("inverse_density_half_order", 1e-10),
                ("inverse_density_at_zero", 1e-12),
                ("inverse_mgf_half_order", 1e-10),
            ],
            Suite::Kernel => &[
                ("gaussian_reduction", 1e-8),
                ("l2_identity", 1e-6),
                ("l2_scaling_slope", 1e-3),
                ("mass", 1e-8),
                ("spectral_agreement", 1e-6),
                ("exp_moment", 1e-4),
                ("evenness", 0.0),
            ],
            Suite::Renewal => &[
                ("renewal_asymptote", 1e-2),
                ("renewal_ml_closed_form", 1e-4),
                ("picard_from_above", 1e-4),
                ("picard_from_below", 1e-4),
                ("supersolution_ordering", 0.0),
            ],
            Suite::Spde => &[
                ("lower_bound_rate", 1e-14),
                ("front_threshold", 1e-14),
                ("energy_rate", 1e-14),
                ("noise_free_constant", 0.0),
                ("renewal_oracle", 3.0),
            ],
            Suite::All => &[],
        }
    }
}

pub fn default_tolerances(suite: Suite) -> BTreeMap<String, f64> {
    suite
        .expand()
        .into_iter()
        .flat_map(|s| s.tolerances().iter())
        .map(|&(k, v)| (k.to_string(), v))
        .collect()
}

/// Run one module suite.
pub fn run_suite(suite: Suite, tol: &BTreeMap<String, f64>) -> Result<Vec<Check>, RunError> {
    let t = |name: &str| tol[name];
    match suite {
        Suite::SpecialFn => special_fn_suite(&t),
        Suite::Subordinator => subordinator_suite(&t),
        Suite::Kernel => kernel_suite(&t),
        Suite::Renewal => renewal_suite(&t),
        Suite::Spde => spde_suite(&t),
        Suite::All => Err(RunError::Config("run_suite takes a single module suite".into())),
    }
}

fn ml(beta: f64, z: f64) -> Result<f64, RunError> {
    let p = MLParams::with_default_tol(beta).map_err(numerical("MLParams"))?;
    mittag_leffler(&p, z).map_err(numerical("mittag_leffler"))
}

// E_{1/2}(-x) = e^{x²} erfc(x), evaluated to 30 digits
const ML_HALF_AT_1: f64 = 0.427_583_576_155_807_004_4;
const ML_HALF_AT_3: f64 = 0.179_001_151_181_389_950_4;

fn special_fn_suite(t: &dyn Fn(&str) -> f64) -> Result<Vec<Check>, RunError> {
    let mut out = vec![
        Check::rel("gamma_half", gamma_fn(0.5).map_err(numerical("gamma_fn"))?, PI.sqrt(), t("gamma_half")),
        Check::rel("ml_exponential", ml(1.0, -1.0)?, (-1.0f64).exp(), t("ml_exponential")),
        Check::rel("ml_half_order_1", ml(0.5, -1.0)?, ML_HALF_AT_1, t("ml_half_order_1")),
        Check::rel("ml_half_order_3", ml(0.5, -3.0)?, ML_HALF_AT_3, t("ml_half_order_3")),
    ];
    let tol = t("ml_sandwich");
    let mut violations = 0usize;
    for k in 1..=9 {
        let beta = k as f64 / 10.0;
        for i in 1..=40 {
            let x = 50.0 * i as f64 / 40.0;
            let e = ml(beta, -x)?;
            let (lo, hi) = ml_bounds(beta, x).map_err(numerical("ml_bounds"))?;
            if e < lo * (1.0 - tol) || e > hi * (1.0 + tol) {
                violations += 1;
            }
        }
    }
    out.push(Check::new("ml_sandwich", violations as f64, 0.0, tol, violations == 0));
    Ok(out)
}

fn subordinator_suite(t: &dyn Fn(&str) -> f64) -> Result<Vec<Check>, RunError> {
    let half = SubordinatorParams::with_default_tol(0.5).map_err(numerical("SubordinatorParams"))?;
    let levy = |u: f64| (2.0 * PI.sqrt()).recip() * u.powf(-1.5) * (-0.25 / u).exp();
    let mut worst = 0.0f64;
    for u in [0.05, 0.3, 1.0, 4.0, 40.0] {
        let g = stable_density(&half, u).map_err(numerical("stable_density"))?;
        worst = worst.max((g / levy(u) - 1.0).abs());
    }
    let mut worst_inv = 0.0f64;
    for x in [0.1, 0.5, 1.0, 2.5] {
        let f = inverse_subordinator_density(&half, 1.0, x).map_err(numerical("inverse_subordinator_density"))?;
        let want = (-x * x / 4.0).exp() / PI.sqrt();
        worst_inv = worst_inv.max((f / want - 1.0).abs());
    }
    let p = SubordinatorParams::with_default_tol(0.7).map_err(numerical("SubordinatorParams"))?;
    let z = inverse_subordinator_density_at_zero(&p, 2.0).map_err(numerical("inverse_subordinator_density_at_zero"))?;
    let z_want = 2f64.powf(-0.7) / gamma_fn(0.3).map_err(numerical("gamma_fn"))?;
    let mgf = inverse_subordinator_mgf(&half, -1.0, 1.0).map_err(numerical("inverse_subordinator_mgf"))?;
    Ok(vec![
        Check::at_most("levy_density", worst, 0.0, t("levy_density")),
        Check::at_most("inverse_density_half_order", worst_inv, 0.0, t("inverse_density_half_order")),
        Check::rel("inverse_density_at_zero", z, z_want, t("inverse_density_at_zero")),
        Check::rel("inverse_mgf_half_order", mgf, ML_HALF_AT_1, t("inverse_mgf_half_order")),
    ])
}

fn model(beta: f64, alpha: f64, nu: f64) -> Result<ModelParams, RunError> {
    ModelParams::new(beta, alpha, nu, 1).map_err(numerical("ModelParams"))
}

/// Largest absolute deviation from the heat kernel on 200 points of
/// `[-10, 10]` at `t ∈ {0.25, 1, 4}`.
pub fn gaussian_reduction_error() -> Result<f64, RunError> {
    let p = model(1.0, 2.0, 1.0)?;
    let mut worst = 0.0f64;
    for t in [0.25, 1.0, 4.0] {
        for i in 0..200 {
            let x = -10.0 + 20.0 * i as f64 / 199.0;
            let g = green_kernel(&p, t, &[x]).map_err(numerical("green_kernel"))?;
            let want = (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp();
            worst = worst.max((g - want).abs());
        }
    }
    Ok(worst)
}

/// Log-log slope of `t ↦ ‖G_t‖²` over `points` geometric times in `[0.25, 4]`.
pub fn l2_scaling_slope(p: &ModelParams, points: usize) -> Result<f64, RunError> {
    let ts: Vec<f64> = (0..points)
        .map(|i| 0.25 * 16f64.powf(i as f64 / (points - 1) as f64))
        .collect();
    let mut ys = Vec::with_capacity(points);
    for &t in &ts {
        ys.push(green_l2_norm(p, t).map_err(numerical("green_l2_norm"))?.ln());
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let (_, slope) = least_squares_line(&xs, &ys).map_err(numerical("least_squares_line"))?;
    Ok(slope)
}

fn kernel_suite(t: &dyn Fn(&str) -> f64) -> Result<Vec<Check>, RunError> {
    let heat = model(1.0, 2.0, 1.0)?;
    let mut worst_l2 = 0.0f64;
    for s in [0.5, 1.0, 2.0] {
        let v = green_l2_norm(&heat, s).map_err(numerical("green_l2_norm"))?;
        worst_l2 = worst_l2.max((v / (8.0 * PI * s).powf(-0.5) - 1.0).abs());
    }
    let half = model(0.5, 2.0, 1.0)?;
    let slope = l2_scaling_slope(&half, 9)?;
    let mass = green_mass(&model(0.5, 1.5, 1.0)?, 1.0).map_err(numerical("green_mass"))?;
    let frac = model(0.5, 1.5, 1.0)?;
    let mut worst_spec = 0.0f64;
    for x in [0.0, 0.7, 2.0] {
        let a = green_kernel(&frac, 1.0, &[x]).map_err(numerical("green_kernel"))?;
        let b = green_kernel_spectral(&frac, 1.0, x).map_err(numerical("green_kernel_spectral"))?;
        worst_spec = worst_spec.max((a / b - 1.0).abs());
    }
    let q = green_exp_moment_quadrature(&half, 1.0, 1.0).map_err(numerical("green_exp_moment_quadrature"))?;
    let e = green_exp_moment(&half, &[1.0], 1.0).map_err(numerical("green_exp_moment"))?;
    let mut asym = 0.0f64;
    for x in [0.3, 1.1, 3.0] {
        let a = green_kernel(&frac, 0.8, &[x]).map_err(numerical("green_kernel"))?;
        let b = green_kernel(&frac, 0.8, &[-x]).map_err(numerical("green_kernel"))?;
        asym = asym.max((a - b).abs());
    }
    Ok(vec![
        Check::at_most("gaussian_reduction", gaussian_reduction_error()?, 0.0, t("gaussian_reduction")),
        Check::at_most("l2_identity", worst_l2, 0.0, t("l2_identity")),
        Check::abs("l2_scaling_slope", slope, -0.25, t("l2_scaling_slope")),
        Check::abs("mass", mass, 1.0, t("mass")),
        Check::at_most("spectral_agreement", worst_spec, 0.0, t("spectral_agreement")),
        Check::rel("exp_moment", q, e, t("exp_moment")),
        Check::at_most("evenness", asym, 0.0, t("evenness")),
    ])
}

fn renewal_suite(t: &dyn Fn(&str) -> f64) -> Result<Vec<Check>, RunError> {
    let theta = 0.5;
    let c = fracspde_core::renewal::tilt_constant(1.0, theta).map_err(numerical("tilt_constant"))?;
    let p = RenewalProblem::new(Forcing::Constant(1.0), 1.0, theta, vec![8.0 / c]).map_err(numerical("RenewalProblem"))?;
    let s = solve_renewal(&p).map_err(numerical("solve_renewal"))?;

    // constant forcing: f(t) = E_{1-θ}(b Γ(1-θ) t^{1-θ})
    let (b, th) = (0.7, 0.3);
    let times = vec![0.25, 0.5, 1.0];
    let q = RenewalProblem::new(Forcing::Constant(1.0), b, th, times.clone()).map_err(numerical("RenewalProblem"))?;
    let sq = fracspde_core::renewal::solve_renewal_with(&q, 1e-5).map_err(numerical("solve_renewal"))?;
    let g = gamma_fn(1.0 - th).map_err(numerical("gamma_fn"))?;
    let mut worst = 0.0f64;
    for (tt, f) in times.iter().zip(&sq.f) {
        let want = ml(1.0 - th, b * g * tt.powf(1.0 - th))?;
        worst = worst.max((f / want - 1.0).abs());
    }

    let (above, below, ordering) = picard_checks(0.5, 1.0, 256, 60)?;
    Ok(vec![
        Check::rel("renewal_asymptote", s.tilted[0], s.asymptote, t("renewal_asymptote")),
        Check::at_most("renewal_ml_closed_form", worst, 0.0, t("renewal_ml_closed_form")),
        Check::at_most("picard_from_above", above.1, 0.0, t("picard_from_above")),
        Check::at_most("picard_from_below", below.1, 0.0, t("picard_from_below")),
        Check::new(
            "supersolution_ordering",
            ordering as u8 as f64,
            1.0,
            t("supersolution_ordering"),
            ordering && above.0 && below.0,
        ),
    ])
}

/// `(monotone, sup-norm error)` of one Picard start.
pub type PicardSide = (bool, f64);

/// Picard iteration on `t_i = i T/n` from `1.5 f` and from `0`, with
/// `a ≡ 1`, `b = 1`.
///
/// Returns `(monotone, sup-norm error after n_iters)` for each start and
/// whether every iterate keeps its side of `f` and `1.5 f` classifies as a
/// supersolution.
pub fn picard_checks(theta: f64, t_max: f64, n: usize, n_iters: usize) -> Result<(PicardSide, PicardSide, bool), RunError> {
    let p = RenewalProblem::uniform(Forcing::Constant(1.0), 1.0, theta, t_max / n as f64, n)
        .map_err(numerical("RenewalProblem"))?;
    let f = solve_renewal_on_grid(&p).map_err(numerical("solve_renewal_on_grid"))?;
    let up: Vec<f64> = f.iter().map(|v| 1.5 * v).collect();
    let rep = check_supersolution(&up, &p).map_err(numerical("check_supersolution"))?;
    let mut ordered = rep.kind == Ordering::Supersolution && rep.ordering_holds;
    let run = |start: &[f64], down: bool| -> Result<(bool, f64, bool), RunError> {
        let its = picard_iterate(start, &p, n_iters).map_err(numerical("picard_iterate"))?;
        let slack = |v: f64| 1e-12 * v.abs().max(1.0);
        let monotone = its.windows(2).all(|w| {
            w[0].iter()
                .zip(&w[1])
                .all(|(a, b)| if down { *b <= a + slack(*a) } else { *b >= a - slack(*a) })
        });
        let sided = its.iter().all(|it| {
            it.iter()
                .zip(&f)
                .all(|(a, b)| if down { *a >= b - slack(*b) } else { *a <= b + slack(*b) })
        });
        let last = its.last().expect("nonempty");
        let err = last.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((monotone, err, sided))
    };
    let (m_up, e_up, s_up) = run(&up, true)?;
    let (m_dn, e_dn, s_dn) = run(&vec![0.0; n], false)?;
    ordered &= s_up && s_dn;
    Ok(((m_up, e_up), (m_dn, e_dn), ordered))
}

fn spde_suite(t: &dyn Fn(&str) -> f64) -> Result<Vec<Check>, RunError> {
    let heat = model(1.0, 2.0, 1.0)?;
    let one = NonlinearitySpec::linear(1.0).map_err(numerical("NonlinearitySpec"))?;
    let rate = lower_bound_rate(&heat, 1.0).map_err(numerical("lower_bound_rate"))?;
    let thr = front_bounds(&heat, &one).map_err(numerical("front_bounds"))?.threshold;
    let energy = energy_bound_rate(&heat, 1.0, 0.5).map_err(numerical("energy_bound_rate"))?;

    let grid = SpaceTimeGrid::new(-8.0, 8.0, 128, 1.0, 16, Boundary::Periodic).map_err(numerical("SpaceTimeGrid"))?;
    let quiet = SimulationSpec {
        params: heat,
        grid,
        u0: vec![1.0; grid.nx],
        sigma: NonlinearitySpec::zero(),
        seed: 1,
        replicas: 2,
        record_cells: vec![grid.nx / 2],
    };
    let e = simulate(&quiet).map_err(numerical("simulate"))?;
    let mut dev = 0.0f64;
    for r in 0..e.replicas {
        for m in 0..e.levels() {
            dev = dev.max((e.recorded_value(r, m, 0) - 1.0).abs());
        }
    }

    let lambda = 0.5;
    let noisy = SimulationSpec {
        sigma: NonlinearitySpec::linear(lambda).map_err(numerical("NonlinearitySpec"))?,
        seed: 5,
        replicas: 2000,
        record_cells: [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&x| grid.nearest_cell(x)).collect(),
        ..quiet
    };
    let worst_z = oracle_max_z(&simulate(&noisy).map_err(numerical("simulate"))?)?;
    Ok(vec![
        Check::abs("lower_bound_rate", rate, 0.125, t("lower_bound_rate")),
        Check::abs("front_threshold", thr, 2.0 / PI.sqrt(), t("front_threshold")),
        Check::abs("energy_rate", energy, 0.5, t("energy_rate")),
        Check::at_most("noise_free_constant", dev, 0.0, t("noise_free_constant")),
        Check::at_most("renewal_oracle", worst_z, 0.0, t("renewal_oracle")),
    ])
}

/// `(estimate - oracle) / stderr` of `E u²` at every recorded cell and
/// level `m ≥ 1` against [`second_moment_renewal`].
pub fn oracle_z_scores(e: &fracspde_core::FieldEnsemble) -> Result<Vec<OracleRow>, RunError> {
    let times: Vec<f64> = (1..e.levels()).map(|m| e.grid.t(m)).collect();
    let oracle = second_moment_renewal(&e.params, &e.sigma, &e.u0, &times).map_err(numerical("second_moment_renewal"))?;
    let mut rows = Vec::with_capacity(times.len() * e.recorded_cells.len());
    for &cell in &e.recorded_cells {
        for (k, m) in (1..e.levels()).enumerate() {
            let pt = estimate_moment(e, 2, m, &[cell]).map_err(numerical("estimate_moment"))?;
            let want = oracle.f[k];
            let diff = pt.estimate - want;
            let z = if pt.stderr > 0.0 {
                diff / pt.stderr
            } else if diff.abs() <= 1e-12 * want.abs() {
                0.0
            } else {
                f64::INFINITY
            };
            rows.push(OracleRow {
                t: pt.t,
                x: e.grid.x(cell),
                estimate: pt.estimate,
                stderr: pt.stderr,
                oracle: want,
                z,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub t: f64,
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub oracle: f64,
    pub z: f64,
}

pub fn oracle_max_z(e: &fracspde_core::FieldEnsemble) -> Result<f64, RunError> {
    Ok(oracle_z_scores(e)?.iter().map(|r| r.z.abs()).fold(0.0, f64::max))
}
