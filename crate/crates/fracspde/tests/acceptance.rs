//! Acceptance criteria, one PASS/FAIL line each. Tolerances, seeds and
//! replica counts are fixed here.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use fracspde::parallel::thread_cap;
use fracspde::run::{front_sign_checks, LOW_THETA};
use fracspde::verify::{gaussian_reduction_error, l2_scaling_slope, oracle_z_scores, picard_checks};
use fracspde::{numerical, par_simulate, RunError};
use fracspde_core::kernel::{green_exp_moment, green_exp_moment_quadrature, green_l2_norm};
use fracspde_core::renewal::solve_renewal;
use fracspde_core::spde_sim::{
    envelope_check, envelope_min_c, estimate_front, estimate_lyapunov, front_bounds, l2_energy_check,
    lower_bound_rate, moment_curve,
};
use fracspde_core::special_fn::{ml_bounds, mittag_leffler};
use fracspde_core::{
    Boundary, FieldEnsemble, Forcing, MLParams, ModelParams, NonlinearitySpec, RenewalProblem, SimulationSpec,
    SpaceTimeGrid,
};

const GAUSSIAN_ABS: f64 = 1e-8;
const L2_REL: f64 = 1e-6;
const SLOPE_ABS: f64 = 1e-3;
const EXP_MOMENT_REL: f64 = 1e-4;
const ASYMPTOTE_REL: f64 = 1e-2;
const PICARD_SUP: f64 = 1e-4;
const PICARD_ITERS: usize = 60;
const ORACLE_SE: f64 = 3.0;
const LOWER_BOUND_SLACK: f64 = 0.25;
const RATE_EXACT: f64 = 1e-15;
const FRONT_CI_WIDTHS: f64 = 5.0;
const ENVELOPE_FACTOR: f64 = 1.1;
const ENERGY_EPSILON: f64 = 0.5;

const ORACLE_SEED: u64 = 8;
const ORACLE_REPLICAS: usize = 10_000;
const FRONT_SEED: u64 = 10;
const FRONT_REPLICAS: usize = 4000;
const RECORD_X: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

type Outcome = Result<(bool, String), RunError>;

fn model(beta: f64, alpha: f64) -> ModelParams {
    ModelParams::new(beta, alpha, 1.0, 1).expect("valid parameters")
}

fn gaussian() -> Outcome {
    let err = gaussian_reduction_error()?;
    Ok((err <= GAUSSIAN_ABS, format!("max abs error {err:.3e} (tol {GAUSSIAN_ABS:e})")))
}

fn l2_identity() -> Outcome {
    let p = model(1.0, 2.0);
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let v = green_l2_norm(&p, t).map_err(numerical("green_l2_norm"))?;
        worst = worst.max((v / (8.0 * PI * t).powf(-0.5) - 1.0).abs());
    }
    Ok((worst <= L2_REL, format!("max rel error {worst:.3e} (tol {L2_REL:e})")))
}

fn scaling() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (beta, alpha) in [(0.5, 2.0), (0.75, 2.0), (0.5, 1.5)] {
        let p = model(beta, alpha);
        let slope = l2_scaling_slope(&p, 9)?;
        let want = -beta / alpha;
        ok &= (slope - want).abs() <= SLOPE_ABS;
        parts.push(format!("({beta},{alpha},1) {slope:.6} vs {want:.6}"));
    }
    Ok((ok, format!("{} (tol {SLOPE_ABS:e})", parts.join(", "))))
}

fn sandwich() -> Outcome {
    let mut violations = 0;
    for k in 1..=9 {
        let beta = k as f64 / 10.0;
        let p = MLParams::with_default_tol(beta).map_err(numerical("MLParams"))?;
        for i in 1..=40 {
            let x = 50.0 * i as f64 / 40.0;
            let e = mittag_leffler(&p, -x).map_err(numerical("mittag_leffler"))?;
            let (lo, hi) = ml_bounds(beta, x).map_err(numerical("ml_bounds"))?;
            if !(lo <= e && e <= hi) {
                violations += 1;
            }
        }
    }
    Ok((violations == 0, format!("{violations} violations on beta = 0.1..0.9 x x in (0, 50]")))
}

fn exp_moment() -> Outcome {
    let mut worst = 0.0f64;
    for beta in [0.5, 0.75] {
        let p = model(beta, 2.0);
        for lambda in [0.5, 1.0] {
            for s in [0.5, 1.0] {
                let q = green_exp_moment_quadrature(&p, lambda, s).map_err(numerical("green_exp_moment_quadrature"))?;
                let e = green_exp_moment(&p, &[lambda], s).map_err(numerical("green_exp_moment"))?;
                worst = worst.max((q / e - 1.0).abs());
            }
        }
    }
    Ok((worst <= EXP_MOMENT_REL, format!("max rel error {worst:.3e} (tol {EXP_MOMENT_REL:e})")))
}

fn renewal_asymptote() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for theta in [0.25, 0.5, 0.75] {
        let c = fracspde_core::renewal::tilt_constant(1.0, theta).map_err(numerical("tilt_constant"))?;
        let p = RenewalProblem::new(Forcing::Constant(1.0), 1.0, theta, vec![8.0 / c])
            .map_err(numerical("RenewalProblem"))?;
        let s = solve_renewal(&p).map_err(numerical("solve_renewal"))?;
        let want = 1.0 / (1.0 - theta);
        let rel = (s.tilted[0] / want - 1.0).abs();
        ok &= rel <= ASYMPTOTE_REL;
        parts.push(format!("theta {theta}: {:.5} vs {want:.5}", s.tilted[0]));
    }
    Ok((ok, format!("{} (tol {ASYMPTOTE_REL:e} rel)", parts.join(", "))))
}

fn comparison() -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    for theta in [0.25, 0.5, 0.75] {
        // one tilt time unit, where b Γ(1-θ) T^{1-θ} = 1
        let c = fracspde_core::renewal::tilt_constant(1.0, theta).map_err(numerical("tilt_constant"))?;
        let ((mono_up, err_up), (mono_dn, err_dn), ordered) = picard_checks(theta, 1.0 / c, 256, PICARD_ITERS)?;
        ok &= mono_up && mono_dn && ordered && err_up <= PICARD_SUP && err_dn <= PICARD_SUP;
        worst = worst.max(err_up).max(err_dn);
    }
    Ok((
        ok,
        format!("theta 0.25/0.5/0.75 on [0, 1/c], {PICARD_ITERS} iterations from 1.5f and 0: monotone and ordered = {ok}, sup error {worst:.3e} (tol {PICARD_SUP:e})"),
    ))
}

fn oracle_spec(beta: f64) -> SimulationSpec {
    let grid = SpaceTimeGrid::new(-8.0, 8.0, 256, 1.0, 64, Boundary::Periodic).expect("valid grid");
    SimulationSpec {
        params: model(beta, 2.0),
        grid,
        u0: vec![1.0; grid.nx],
        sigma: NonlinearitySpec::linear(1.0).expect("valid sigma"),
        seed: ORACLE_SEED,
        replicas: ORACLE_REPLICAS,
        record_cells: RECORD_X.iter().map(|&x| grid.nearest_cell(x)).collect(),
    }
}

fn oracle(ensembles: &[FieldEnsemble]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for e in ensembles {
        let rows = oracle_z_scores(e)?;
        let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        ok &= worst <= ORACLE_SE;
        parts.push(format!("beta {}: max |z| {worst:.2} over {} points", e.params.beta, rows.len()));
    }
    Ok((ok, format!("{} (tol {ORACLE_SE} SE)", parts.join(", "))))
}

fn intermittency(heat: &FieldEnsemble) -> Outcome {
    let rate = lower_bound_rate(&heat.params, 1.0).map_err(numerical("lower_bound_rate"))?;
    let exact = (rate - 0.125).abs() <= RATE_EXACT;
    let curve = moment_curve(heat, 2, &heat.recorded_cells).map_err(numerical("moment_curve"))?;
    let fit = estimate_lyapunov(&curve, Some((0.5, 1.0))).map_err(numerical("estimate_lyapunov"))?;
    let floor = (1.0 - LOWER_BOUND_SLACK) * rate;
    Ok((
        exact && fit.rate >= floor,
        format!(
            "lower_bound_rate {rate:.17} (1/8 within {RATE_EXACT:e}), fitted rate on [0.5, 1] {:.4} +- {:.4} >= {floor:.5}",
            fit.rate, fit.stderr
        ),
    ))
}

fn front_ensemble() -> Result<FieldEnsemble, RunError> {
    let grid = SpaceTimeGrid::new(-8.0, 8.0, 256, 1.0, 64, Boundary::ZeroPadded).expect("valid grid");
    let u0 = grid.xs().iter().map(|x| if x.abs() <= 0.5 { 1.0 } else { 0.0 }).collect();
    let spec = SimulationSpec {
        params: model(0.5, 2.0),
        grid,
        u0,
        sigma: NonlinearitySpec::linear(1.0).expect("valid sigma"),
        seed: FRONT_SEED,
        replicas: FRONT_REPLICAS,
        record_cells: Vec::new(),
    };
    par_simulate(&spec, thread_cap()?)
}

fn fronts(e: &FieldEnsemble) -> Outcome {
    let thr = front_bounds(&e.params, &e.sigma).map_err(numerical("front_bounds"))?.threshold;
    let low = estimate_front(e, LOW_THETA, Some(0.5)).map_err(numerical("estimate_front"))?;
    let high = estimate_front(e, 2.0 * thr, Some(0.5)).map_err(numerical("estimate_front"))?;
    let (neg, sep) = front_sign_checks(&low, &high, FRONT_CI_WIDTHS);
    Ok((
        neg.pass && sep.pass,
        format!(
            "threshold {thr:.4}; proxy at {:.4}: max over t >= 0.5 {:.3}; proxy at 0.1 exceeds it by {:.1} CI widths (need {FRONT_CI_WIDTHS})",
            2.0 * thr,
            neg.value,
            sep.value
        ),
    ))
}

fn envelope(e: &FieldEnsemble) -> Outcome {
    let c_min = envelope_min_c(e.params.beta, e.params.nu, e.sigma.lip_sigma).map_err(numerical("envelope_min_c"))?;
    let rep = envelope_check(e, ENVELOPE_FACTOR * c_min, None).map_err(numerical("envelope_check"))?;
    Ok((
        rep.pass,
        format!(
            "c = {ENVELOPE_FACTOR} x {c_min:.4}: {} violations over {} cells, {:.4} of point estimates inside",
            rep.violations.len(),
            rep.cells_checked,
            rep.fraction_within
        ),
    ))
}

fn energy(ensembles: &[FieldEnsemble]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for e in ensembles {
        let rep = l2_energy_check(e, ENERGY_EPSILON).map_err(numerical("l2_energy_check"))?;
        let worst = rep.levels.iter().map(|l| l.estimate / l.bound).fold(0.0, f64::max);
        ok &= rep.pass;
        parts.push(format!("beta {}: max E||u||^2 / bound {worst:.3}", e.params.beta));
    }
    Ok((ok, format!("epsilon {ENERGY_EPSILON}, {}", parts.join(", "))))
}

fn report(id: u32, name: &str, outcome: Outcome, started: Instant) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    println!("{} {id:>2} {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
    pass
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let mut all = true;
    let fast: [Criterion; 7] = [
        (1, "gaussian reduction", gaussian),
        (2, "L2 identity", l2_identity),
        (3, "scaling exponent", scaling),
        (4, "Mittag-Leffler sandwich", sandwich),
        (5, "exponential moment", exp_moment),
        (6, "renewal asymptote", renewal_asymptote),
        (7, "comparison principle", comparison),
    ];
    for (id, name, f) in fast {
        let t = Instant::now();
        all &= report(id, name, f(), t);
    }

    let t = Instant::now();
    let oracle_runs: Result<Vec<FieldEnsemble>, RunError> = thread_cap()
        .and_then(|cap| [1.0, 0.5].iter().map(|&b| par_simulate(&oracle_spec(b), cap)).collect());
    match oracle_runs {
        Ok(ens) => {
            all &= report(8, "simulator vs renewal oracle", oracle(&ens), t);
            let t = Instant::now();
            all &= report(9, "intermittency lower bound", intermittency(&ens[0]), t);
            let t = Instant::now();
            all &= report(12, "L2 energy bound", energy(&ens), t);
        }
        Err(e) => {
            for (id, name) in [(8, "simulator vs renewal oracle"), (9, "intermittency lower bound"), (12, "L2 energy bound")] {
                all &= report(id, name, Err(RunError::Io(e.to_string())), t);
            }
        }
    }

    let t = Instant::now();
    match front_ensemble() {
        Ok(e) => {
            all &= report(10, "front sign structure", fronts(&e), t);
            let t = Instant::now();
            all &= report(11, "moment envelope", envelope(&e), t);
        }
        Err(e) => {
            for (id, name) in [(10, "front sign structure"), (11, "moment envelope")] {
                all &= report(id, name, Err(RunError::Io(e.to_string())), t);
            }
        }
    }

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
