//! Subcommands.
//!
//! Every run writes `manifest.json` (the resolved config), its result CSVs
//! and `summary.json` (checks, artifacts and derived constants) into the
//! output directory.
//!
//! | command    | CSV files and columns |
//! |------------|-----------------------|
//! | `ml`       | `ml.csv`: beta, x, value, lower, upper |
//! | `kernel`   | `kernel.csv`: i, j, t, x, G |
//! | `renewal`  | `renewal.csv`: t, f, tilted_f |
//! | `simulate` | `moments.csv`: t, x, p, estimate, stderr, replicas, seed; `energy.csv`: t, estimate, stderr, bound; `oracle.csv`: t, x, estimate, stderr, oracle, z (linear σ, constant u0 only) |
//! | `fronts`   | `fronts.csv`: theta, t, proxy, stderr; `front_summary.csv`: theta, window_start, proxy, stderr, ci_half_width |
//! | `verify`   | `<suite>_report.csv`: check, value, expected, tolerance, pass |

use std::collections::BTreeMap;
use std::path::Path;

use fracspde_core::kernel::{build_kernel_table, c_star, green_l2_norm};
use fracspde_core::renewal::{solve_renewal, tilt_constant};
use fracspde_core::spde_sim::{envelope_min_c, front_bounds, lower_bound_rate};
use fracspde_core::spde_sim::{
    envelope_check, estimate_front, estimate_lyapunov, estimate_moment, l2_energy_check, moment_curve, FrontEstimate,
};
use fracspde_core::spde_sim::SigmaKind;
use fracspde_core::special_fn::{ml_bounds, mittag_leffler};
use fracspde_core::{FieldEnsemble, Forcing, MLParams, RenewalProblem};
use serde::Serialize;

use crate::config::{Command, ExperimentConfig, InitialConfig};
use crate::output::{write_csv, write_json, write_report, Cell};
use crate::parallel::{par_simulate, thread_cap};
use crate::verify::{oracle_z_scores, run_suite};
use crate::{numerical, Check, RunError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: Command,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    /// Constants computed along the way.
    pub derived: BTreeMap<String, f64>,
}

impl Report {
    fn new(command: Command) -> Self {
        Self {
            command,
            pass: true,
            checks: Vec::new(),
            artifacts: vec!["manifest.json".into()],
            derived: BTreeMap::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Run a resolved config, writing every artifact.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let command = cfg
        .command
        .ok_or_else(|| RunError::Config("config has not been resolved".into()))?;
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("create {}: {e}", dir.display())))?;
    write_json(&dir.join("manifest.json"), cfg)?;
    let mut rep = Report::new(command);
    match command {
        Command::Ml => ml(cfg, dir, &mut rep)?,
        Command::Kernel => kernel(cfg, dir, &mut rep)?,
        Command::Renewal => renewal(cfg, dir, &mut rep)?,
        Command::Simulate => simulate(cfg, dir, &mut rep)?,
        Command::Fronts => fronts(cfg, dir, &mut rep)?,
        Command::Verify => verify(cfg, dir, &mut rep)?,
    }
    rep.pass = rep.checks.iter().all(|c| c.pass);
    rep.artifacts.push("summary.json".into());
    write_json(&dir.join("summary.json"), &rep)?;
    Ok(rep)
}

fn csv(dir: &Path, rep: &mut Report, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), RunError> {
    write_csv(&dir.join(name), header, rows)?;
    rep.artifacts.push(name.into());
    Ok(())
}

fn ml(cfg: &ExperimentConfig, dir: &Path, rep: &mut Report) -> Result<(), RunError> {
    let o = cfg.ml.as_ref().expect("resolved");
    let tol = cfg.tolerance("ml_sandwich_rel");
    let mut rows = Vec::new();
    let mut violations = 0usize;
    for &beta in &o.betas {
        let p = MLParams::with_default_tol(beta).map_err(|e| RunError::Config(format!("ml: {e}")))?;
        for i in 1..=o.points {
            let x = o.x_max * i as f64 / o.points as f64;
            let v = mittag_leffler(&p, -x).map_err(numerical("mittag_leffler"))?;
            let (lo, hi) = ml_bounds(beta, x).map_err(numerical("ml_bounds"))?;
            if v < lo * (1.0 - tol) || v > hi * (1.0 + tol) {
                violations += 1;
            }
            rows.push(vec![Cell::F(beta), Cell::F(x), Cell::F(v), Cell::F(lo), Cell::F(hi)]);
        }
    }
    csv(dir, rep, "ml.csv", &["beta", "x", "value", "lower", "upper"], rows)?;
    rep.checks
        .push(Check::new("ml_sandwich", violations as f64, 0.0, tol, violations == 0));
    Ok(())
}

fn kernel(cfg: &ExperimentConfig, dir: &Path, rep: &mut Report) -> Result<(), RunError> {
    let o = cfg.kernel.expect("resolved");
    let p = cfg.params.model()?;
    let table = build_kernel_table(&p, o.dt, o.dx, o.nt, o.nx).map_err(numerical("build_kernel_table"))?;
    let nx = o.nx as isize;
    let mut rows = Vec::with_capacity(o.nt * (2 * o.nx + 1));
    for i in 1..=o.nt {
        let t = table.time(i);
        for j in -nx..=nx {
            rows.push(vec![
                Cell::U(i as u64),
                Cell::I(j as i64),
                Cell::F(t),
                Cell::F(j as f64 * o.dx),
                Cell::F(table.value(i, j)),
            ]);
        }
    }
    csv(dir, rep, "kernel.csv", &["i", "j", "t", "x", "G"], rows)?;
    let mass_err = table.mass_row().iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    let mut l2_err = 0.0f64;
    for (i, v) in table.l2_row().iter().enumerate() {
        let want = green_l2_norm(&p, table.time(i + 1)).map_err(numerical("green_l2_norm"))?;
        l2_err = l2_err.max((v / want - 1.0).abs());
    }
    let tail = table.tail_row().iter().copied().fold(0.0, f64::max);
    rep.derived.insert("max_tail_mass".into(), tail);
    rep.checks
        .push(Check::at_most("kernel_mass", mass_err, 0.0, cfg.tolerance("kernel_mass")));
    rep.checks
        .push(Check::at_most("kernel_l2_rel", l2_err, 0.0, cfg.tolerance("kernel_l2_rel")));
    Ok(())
}

fn renewal(cfg: &ExperimentConfig, dir: &Path, rep: &mut Report) -> Result<(), RunError> {
    let o = cfg.renewal.expect("resolved");
    let t_max = o.t_max.expect("resolved");
    let grid: Vec<f64> = (1..=o.points).map(|i| t_max * i as f64 / o.points as f64).collect();
    let p = RenewalProblem::new(Forcing::Constant(o.a), o.b, o.theta, grid)
        .map_err(|e| RunError::Config(format!("renewal: {e}")))?;
    let s = solve_renewal(&p).map_err(numerical("solve_renewal"))?;
    let rows = (0..s.t.len())
        .map(|i| vec![Cell::F(s.t[i]), Cell::F(s.f[i]), Cell::F(s.tilted[i])])
        .collect();
    csv(dir, rep, "renewal.csv", &["t", "f", "tilted_f"], rows)?;
    rep.derived.insert("c".into(), s.c);
    rep.derived.insert("asymptote".into(), s.asymptote);
    rep.derived.insert("steps".into(), s.steps as f64);
    rep.checks.push(Check::at_most(
        "renewal_refine",
        s.refinement_change,
        0.0,
        cfg.tolerance("renewal_refine"),
    ));
    let c = tilt_constant(o.b, o.theta).map_err(numerical("tilt_constant"))?;
    if c * t_max >= 8.0 * (1.0 - 1e-12) {
        let last = *s.tilted.last().expect("nonempty grid");
        rep.checks.push(Check::rel(
            "renewal_asymptote_rel",
            last,
            s.asymptote,
            cfg.tolerance("renewal_asymptote_rel"),
        ));
    }
    Ok(())
}

fn ensemble(cfg: &ExperimentConfig) -> Result<FieldEnsemble, RunError> {
    let spec = cfg.simulation_spec()?;
    par_simulate(&spec, thread_cap()?)
}

fn oracle_applies(cfg: &ExperimentConfig, e: &FieldEnsemble) -> bool {
    matches!(e.sigma.kind, SigmaKind::Linear { .. }) && matches!(cfg.initial, Some(InitialConfig::Constant { .. }))
}

fn simulate(cfg: &ExperimentConfig, dir: &Path, rep: &mut Report) -> Result<(), RunError> {
    let o = cfg.simulate.as_ref().expect("resolved");
    let e = ensemble(cfg)?;
    let mut rows = Vec::new();
    for &p in &o.moments {
        for &cell in &e.recorded_cells {
            for m in 0..e.levels() {
                let pt = estimate_moment(&e, p, m, &[cell]).map_err(numerical("estimate_moment"))?;
                rows.push(vec![
                    Cell::F(pt.t),
                    Cell::F(e.grid.x(cell)),
                    Cell::U(p as u64),
                    Cell::F(pt.estimate),
                    Cell::F(pt.stderr),
                    Cell::U(e.replicas as u64),
                    Cell::U(e.seed),
                ]);
            }
        }
    }
    csv(
        dir,
        rep,
        "moments.csv",
        &["t", "x", "p", "estimate", "stderr", "replicas", "seed"],
        rows,
    )?;

    let energy = l2_energy_check(&e, o.epsilon).map_err(numerical("l2_energy_check"))?;
    let k = cfg.tolerance("energy_se");
    let rows = energy
        .levels
        .iter()
        .map(|l| vec![Cell::F(l.t), Cell::F(l.estimate), Cell::F(l.stderr), Cell::F(l.bound)])
        .collect();
    csv(dir, rep, "energy.csv", &["t", "estimate", "stderr", "bound"], rows)?;
    let worst = energy
        .levels
        .iter()
        .map(|l| (l.estimate - k * l.stderr) / l.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    rep.derived.insert("energy_rate".into(), energy.rate);
    rep.checks.push(Check::new("energy_bound", worst, 1.0, k, worst <= 1.0));

    if oracle_applies(cfg, &e) {
        let z = oracle_z_scores(&e)?;
        let rows = z
            .iter()
            .map(|r| {
                vec![
                    Cell::F(r.t),
                    Cell::F(r.x),
                    Cell::F(r.estimate),
                    Cell::F(r.stderr),
                    Cell::F(r.oracle),
                    Cell::F(r.z),
                ]
            })
            .collect();
        csv(dir, rep, "oracle.csv", &["t", "x", "estimate", "stderr", "oracle", "z"], rows)?;
        let worst = z.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        rep.checks
            .push(Check::at_most("renewal_oracle", worst, 0.0, cfg.tolerance("oracle_se")));
    }

    rep.derived
        .insert("c_star".into(), c_star(&e.params).map_err(numerical("c_star"))?);
    if let Ok(r) = lower_bound_rate(&e.params, e.sigma.l_sigma) {
        rep.derived.insert("lower_bound_rate".into(), r);
    }
    if !e.recorded_cells.is_empty() && e.levels() >= 10 && !e.sigma.is_zero() {
        let curve = moment_curve(&e, 2, &e.recorded_cells).map_err(numerical("moment_curve"))?;
        let fit = estimate_lyapunov(&curve, None).map_err(numerical("estimate_lyapunov"))?;
        rep.derived.insert("lyapunov_rate".into(), fit.rate);
        rep.derived.insert("lyapunov_stderr".into(), fit.stderr);
    }
    Ok(())
}

fn fronts(cfg: &ExperimentConfig, dir: &Path, rep: &mut Report) -> Result<(), RunError> {
    let o = cfg.fronts.as_ref().expect("resolved");
    let e = ensemble(cfg)?;
    let fb = front_bounds(&e.params, &e.sigma).map_err(numerical("front_bounds"))?;
    let window = o.window_start;
    let front = |theta: f64| -> Result<FrontEstimate, RunError> {
        estimate_front(&e, theta, window).map_err(numerical("estimate_front"))
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &theta in o.thetas.as_deref().expect("resolved") {
        let f = front(theta)?;
        for i in 0..f.t.len() {
            rows.push(vec![Cell::F(theta), Cell::F(f.t[i]), Cell::F(f.proxy_t[i]), Cell::F(f.stderr_t[i])]);
        }
        summary.push(vec![
            Cell::F(theta),
            Cell::F(f.window_start),
            Cell::F(f.proxy),
            Cell::F(f.stderr),
            Cell::F(f.ci_half_width),
        ]);
    }
    csv(dir, rep, "fronts.csv", &["theta", "t", "proxy", "stderr"], rows)?;
    csv(
        dir,
        rep,
        "front_summary.csv",
        &["theta", "window_start", "proxy", "stderr", "ci_half_width"],
        summary,
    )?;

    let low = front(LOW_THETA)?;
    let high = front(2.0 * fb.threshold)?;
    let (neg, sep) = front_sign_checks(&low, &high, cfg.tolerance("front_separation_ci"));
    rep.checks.push(neg);
    rep.checks.push(sep);

    let c_min = envelope_min_c(e.params.beta, e.params.nu, e.sigma.lip_sigma).map_err(numerical("envelope_min_c"))?;
    let env = envelope_check(&e, o.envelope_factor * c_min, None).map_err(numerical("envelope_check"))?;
    rep.checks.push(Check::new(
        "envelope",
        env.violations.len() as f64,
        0.0,
        0.0,
        env.pass,
    ));
    for (k, v) in [
        ("threshold", fb.threshold),
        ("c0", fb.c0),
        ("envelope_threshold", fb.envelope_threshold),
        ("thresholds_consistent", fb.consistent as u8 as f64),
        ("envelope_c", env.c),
        ("envelope_c_min", env.c_min),
        ("envelope_rate", env.rate),
        ("envelope_a", env.a_fit),
        ("envelope_fraction_within", env.fraction_within),
    ] {
        rep.derived.insert(k.into(), v);
    }
    Ok(())
}

/// Inner angle of the front comparison.
pub const LOW_THETA: f64 = 0.1;

/// Sign and separation checks of the front proxies.
///
/// `front_negative` holds when every per-level proxy in the window at the
/// outer angle is negative. `front_separation` measures the gap between
/// the windowed proxies in units of the wider of the two 95% intervals
/// (full width).
pub fn front_sign_checks(low: &FrontEstimate, high: &FrontEstimate, min_widths: f64) -> (Check, Check) {
    let tol = 1e-12 * high.t.last().copied().unwrap_or(1.0);
    let worst = high
        .t
        .iter()
        .zip(&high.proxy_t)
        .filter(|(t, _)| **t >= high.window_start - tol)
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = 2.0 * low.ci_half_width.max(high.ci_half_width);
    let widths = (low.proxy - high.proxy) / width;
    (
        Check::new("front_negative", worst, 0.0, 0.0, worst < 0.0),
        Check::new("front_separation", widths, min_widths, min_widths, widths >= min_widths),
    )
}

fn verify(cfg: &ExperimentConfig, dir: &Path, rep: &mut Report) -> Result<(), RunError> {
    let suite = cfg.verify.expect("resolved").suite;
    for s in suite.expand() {
        let checks = run_suite(s, &cfg.tolerances)?;
        let name = format!("{}_report.csv", s.name());
        write_report(&dir.join(&name), &checks)?;
        rep.artifacts.push(name);
        rep.checks.extend(checks);
    }
    Ok(())
}
