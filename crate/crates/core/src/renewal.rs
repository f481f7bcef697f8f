//! Renewal equations with power-law kernel,
//! `f(t) = a(t) + b ∫_0^t f(s) (t-s)^{-θ} ds`, `0 < θ < 1`.
//!
//! The solver uses product integration on a uniform grid `t_i = i h`: `f` is
//! interpolated linearly between nodes and the kernel is integrated exactly
//! against the two hat functions of each cell, so with cell moments over
//! `[(L-1)h, Lh]`
//!
//! ```text
//! A_L = (1/h) ∫ g(τ) (τ - (L-1)h) dτ,   B_L = (1/h) ∫ g(τ) (Lh - τ) dτ,
//! f_i (1 - b B_1) = a_i + b (A_i f_0 + Σ_{0<m<i} (A_{i-m} + B_{i-m+1}) f_m),
//! ```
//!
//! with `f_0 = a(0)`. The scheme is implicit in the current cell and all
//! weights are nonnegative, so it preserves the comparison principle.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::quad::{integrate_to_infinity, QuadConfig};
use crate::special_fn::{gamma_fn, gamma_p};

/// Nonnegative, non-increasing forcing `a(t)`.
#[derive(Clone)]
pub enum Forcing {
    Constant(f64),
    /// Linear interpolation between samples, constant beyond either end.
    Samples { times: Vec<f64>, values: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Forcing::Samples { times, values } => f
                .debug_struct("Samples")
                .field("times", times)
                .field("values", values)
                .finish(),
            Forcing::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Forcing {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Constant(v) => *v,
            Forcing::Samples { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                let n = times.len();
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let k = times.partition_point(|&s| s <= t);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
            Forcing::Function(f) => f(t),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Forcing::Constant(v) => {
                if !(*v >= 0.0) || !v.is_finite() {
                    return Err(domain(format!("forcing must be finite and nonnegative, got {v}")));
                }
            }
            Forcing::Samples { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(domain("forcing samples need matching, nonempty times and values"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(domain("forcing sample times must be strictly increasing"));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(domain("forcing samples must be finite and nonnegative"));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(domain("forcing must be non-increasing"));
                }
            }
            Forcing::Function(_) => {}
        }
        Ok(())
    }
}

/// `f = a + f * (b τ^{-θ})`, reported on `t_grid`.
#[derive(Debug, Clone)]
pub struct RenewalProblem {
    pub a: Forcing,
    pub b: f64,
    pub theta: f64,
    pub t_grid: Vec<f64>,
}

impl RenewalProblem {
    pub fn new(a: Forcing, b: f64, theta: f64, t_grid: Vec<f64>) -> Result<Self> {
        let p = Self { a, b, theta, t_grid };
        p.validate()?;
        Ok(p)
    }

    /// Problem on the uniform grid `t_i = i h`, `i = 1..=n`.
    pub fn uniform(a: Forcing, b: f64, theta: f64, h: f64, n: usize) -> Result<Self> {
        Self::new(a, b, theta, (1..=n).map(|i| i as f64 * h).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(domain(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(domain(format!("b must be finite and nonnegative, got {}", self.b)));
        }
        if self.t_grid.is_empty() || !(self.t_grid[0] > 0.0) {
            return Err(domain("time grid must be nonempty and start above 0"));
        }
        if self.t_grid.windows(2).any(|w| !(w[1] > w[0])) || self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(domain("time grid must be finite and strictly increasing"));
        }
        self.a.validate()
    }

    fn horizon(&self) -> f64 {
        *self.t_grid.last().expect("validated grid")
    }

    /// Step of a uniform grid `t_i = i h`, if `t_grid` is one.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = self.t_grid[0];
        let ok = self
            .t_grid
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - (i + 1) as f64 * h).abs() <= 1e-9 * t);
        ok.then_some(h)
    }

    fn sampled_forcing(&self, h: f64, n: usize) -> Result<Vec<f64>> {
        let a: Vec<f64> = (0..=n).map(|i| self.a.eval(i as f64 * h)).collect();
        if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(domain("forcing must be finite and nonnegative on the grid"));
        }
        if a.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-300) {
            return Err(domain("forcing must be non-increasing"));
        }
        Ok(a)
    }
}

/// `c = (b Γ(1-θ))^{1/(1-θ)}`.
pub fn tilt_constant(b: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(b >= 0.0) {
        return Err(domain(format!("b must be nonnegative, got {b}")));
    }
    Ok((b * gamma_fn(1.0 - theta)?).powf(1.0 / (1.0 - theta)))
}

/// `lim e^{-ct} f(t) = c/(1-θ) ∫_0^∞ a(y) e^{-cy} dy`.
pub fn renewal_asymptote(p: &RenewalProblem) -> Result<f64> {
    p.validate()?;
    if p.b == 0.0 {
        return Err(domain("the tilted limit needs b > 0"));
    }
    let c = tilt_constant(p.b, p.theta)?;
    let integral = match &p.a {
        Forcing::Constant(v) => return Ok(v / (1.0 - p.theta)),
        Forcing::Samples { times, .. } => {
            let mut pts = vec![0.0];
            pts.extend(times.iter().copied().filter(|&t| t > 0.0));
            let cfg = QuadConfig::new(1e-15, 1e-12).with_max_intervals(20_000);
            integrate_to_infinity(|y| p.a.eval(y) * (-c * y).exp(), &pts, &cfg)?.value
        }
        Forcing::Function(_) => {
            let cfg = QuadConfig::new(1e-15, 1e-12).with_max_intervals(20_000);
            let pts = [0.0, 1.0 / c, 10.0 / c];
            integrate_to_infinity(|y| p.a.eval(y) * (-c * y).exp(), &pts, &cfg)?.value
        }
    };
    if !integral.is_finite() {
        return Err(domain("forcing is not integrable against e^{-ct}"));
    }
    Ok(c / (1.0 - p.theta) * integral)
}

/// Solution on `t_grid` with refinement metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    /// `e^{-ct} f(t)`.
    pub tilted: Vec<f64>,
    pub c: f64,
    /// `renewal_asymptote`, or NaN when `b = 0`.
    pub asymptote: f64,
    /// Steps of the finest uniform grid used.
    pub steps: usize,
    /// Largest relative change at `t_grid` under the last 2× refinement.
    pub refinement_change: f64,
}

/// Cell moments of a kernel `k`: `(∫ k, ∫ τ k)` over `[(L-1)h, Lh]`,
/// `L = 1..=n`.
fn moment_pairs(n: usize, h: f64, m0: impl Fn(f64) -> f64, m1: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let (mut p0, mut p1) = (m0(0.0), m1(0.0));
    for l in 1..=n {
        let tau = l as f64 * h;
        let (c0, c1) = (m0(tau), m1(tau));
        out.push((c0 - p0, c1 - p1));
        p0 = c0;
        p1 = c1;
    }
    out
}

/// Weights of the piecewise-linear product rule: `(A_L, B_L)` multiply the
/// left and right node values of the cell at lag `L`.
fn linear_weights(pairs: &[(f64, f64)], h: f64) -> Vec<(f64, f64)> {
    pairs
        .iter()
        .enumerate()
        .map(|(k, &(m0, m1))| {
            let l = (k + 1) as f64;
            ((m1 - (l - 1.0) * h * m0) / h, (l * h * m0 - m1) / h)
        })
        .collect()
}

/// `(A_L, B_L)` for `g = τ^{-θ}`, `L = 1..=n`.
pub fn power_weights(theta: f64, h: f64, n: usize) -> Vec<(f64, f64)> {
    let (e0, e1) = (1.0 - theta, 2.0 - theta);
    let pairs = moment_pairs(n, h, |t| t.powf(e0) / e0, |t| t.powf(e1) / e1);
    linear_weights(&pairs, h)
}

/// `(A_L, B_L)` for `g̃ = e^{-cτ} τ^{-θ}`, `L = 1..=n`.
pub fn tilted_weights(theta: f64, c: f64, h: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let (e0, e1) = (1.0 - theta, 2.0 - theta);
    let (s0, s1) = (c.powf(-e0) * gamma_fn(e0)?, c.powf(-e1) * gamma_fn(e1)?);
    // gamma_p cannot fail for positive order and nonnegative argument
    let pairs = moment_pairs(
        n,
        h,
        |t| s0 * gamma_p(e0, c * t).unwrap_or(f64::NAN),
        |t| s1 * gamma_p(e1, c * t).unwrap_or(f64::NAN),
    );
    Ok(linear_weights(&pairs, h))
}

/// Solve the scheme given `a_0..a_n`; returns `f_0 = a_0, f_1, …, f_n`.
pub fn solve_discrete(a: &[f64], b: f64, w: &[(f64, f64)]) -> Result<Vec<f64>> {
    let n = a.len() - 1;
    let diag = 1.0 - b * w[0].1;
    if !(diag > 0.0) {
        return Err(domain(format!("step too coarse: b B_1 = {} >= 1; refine the grid", b * w[0].1)));
    }
    let comb: Vec<f64> = (1..n.max(1)).map(|l| w[l - 1].0 + w[l].1).collect();
    let mut f = vec![0.0; n + 1];
    f[0] = a[0];
    for i in 1..=n {
        let mut acc = w[i - 1].0 * f[0];
        for m in 1..i {
            acc += comb[i - m - 1] * f[m];
        }
        f[i] = (a[i] + b * acc) / diag;
    }
    Ok(f)
}

fn interpolate(h: f64, f: &[f64], t: f64) -> f64 {
    let x = t / h;
    let k = (x.floor() as usize).min(f.len() - 2);
    let w = x - k as f64;
    f[k] * (1.0 - w) + f[k + 1] * w
}

/// Refinement stops once a 2× refinement changes `f` by less than this.
pub const REFINE_TOL: f64 = 1e-3;
const MAX_STEPS: usize = 1 << 16;

/// Solve with the piecewise-linear product rule on successively halved
/// uniform grids until the relative change at `t_grid` drops below
/// [`REFINE_TOL`].
pub fn solve_renewal(p: &RenewalProblem) -> Result<RenewalSolution> {
    solve_renewal_with(p, REFINE_TOL)
}

pub fn solve_renewal_with(p: &RenewalProblem, tol: f64) -> Result<RenewalSolution> {
    p.validate()?;
    let t_end = p.horizon();
    let c = tilt_constant(p.b, p.theta)?;
    let asymptote = if p.b > 0.0 { renewal_asymptote(p)? } else { f64::NAN };
    let finish = |f: Vec<f64>, steps, change| {
        let tilted = p.t_grid.iter().zip(&f).map(|(&t, &v)| (-c * t).exp() * v).collect();
        RenewalSolution {
            t: p.t_grid.clone(),
            f,
            tilted,
            c,
            asymptote,
            steps,
            refinement_change: change,
        }
    };
    if p.b == 0.0 {
        let f = p.t_grid.iter().map(|&t| p.a.eval(t)).collect();
        return Ok(finish(f, 0, 0.0));
    }
    // start near c h = 0.02 and at least a few steps per output point
    let mut n = ((50.0 * c * t_end).ceil() as usize).max(64).max(4 * p.t_grid.len()).next_power_of_two();
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let h = t_end / n as f64;
        let a = p.sampled_forcing(h, n)?;
        let w = power_weights(p.theta, h, n);
        let sol = match solve_discrete(&a, p.b, &w) {
            Ok(s) => s,
            Err(_) if n < MAX_STEPS => {
                n *= 2;
                continue;
            }
            Err(e) => return Err(e),
        };
        let on_grid: Vec<f64> = p.t_grid.iter().map(|&t| interpolate(h, &sol, t)).collect();
        if let Some(old) = prev.as_ref() {
            let change = old
                .iter()
                .zip(&on_grid)
                .map(|(o, v)| (o - v).abs() / v.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            if change < tol {
                return Ok(finish(on_grid, n, change));
            }
            if n >= MAX_STEPS {
                return Err(Error::Accuracy {
                    estimate: on_grid[on_grid.len() - 1],
                    bound: change,
                });
            }
        }
        prev = Some(on_grid);
        n *= 2;
    }
}

/// Exact solution of the discrete scheme on a uniform `t_grid`
/// (`f_0 = a(0)` is not included in the output).
pub fn solve_renewal_on_grid(p: &RenewalProblem) -> Result<Vec<f64>> {
    p.validate()?;
    let h = p
        .uniform_step()
        .ok_or_else(|| domain("time grid must be uniform, t_i = i h"))?;
    let n = p.t_grid.len();
    let a = p.sampled_forcing(h, n)?;
    let f = solve_discrete(&a, p.b, &power_weights(p.theta, h, n))?;
    Ok(f[1..].to_vec())
}

/// `e^{-ct} f` on a uniform `t_grid` by solving the tilted equation
/// `f̃ = ã + f̃ * g̃`, `g̃(τ) = b e^{-cτ} τ^{-θ}`, directly.
pub fn solve_tilted_on_grid(p: &RenewalProblem) -> Result<Vec<f64>> {
    p.validate()?;
    let h = p
        .uniform_step()
        .ok_or_else(|| domain("time grid must be uniform, t_i = i h"))?;
    let n = p.t_grid.len();
    let c = tilt_constant(p.b, p.theta)?;
    let a: Vec<f64> = p
        .sampled_forcing(h, n)?
        .iter()
        .enumerate()
        .map(|(i, v)| v * (-c * i as f64 * h).exp())
        .collect();
    let f = solve_discrete(&a, p.b, &tilted_weights(p.theta, c, h, n)?)?;
    Ok(f[1..].to_vec())
}

/// One application of `h ↦ a + b (h * τ^{-θ})` in the discrete scheme;
/// `h` holds the values at `t_grid` (uniform) and `h(0) = a(0)`.
fn picard_map(p: &RenewalProblem, a: &[f64], w: &[(f64, f64)], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    let at = |m: usize| if m == 0 { a[0] } else { h[m - 1] };
    (1..=n)
        .map(|i| {
            let mut acc = w[i - 1].0 * a[0];
            for m in 1..=i {
                let left = if m < i { w[i - m - 1].0 } else { 0.0 };
                acc += (left + w[i - m].1) * at(m);
            }
            a[i] + p.b * acc
        })
        .collect()
}

// Nodes and per-cell weight pairs.
type Setup = (Vec<f64>, Vec<(f64, f64)>);

fn grid_setup(p: &RenewalProblem) -> Result<Setup> {
    p.validate()?;
    let h = p
        .uniform_step()
        .ok_or_else(|| domain("time grid must be uniform, t_i = i h"))?;
    let n = p.t_grid.len();
    Ok((p.sampled_forcing(h, n)?, power_weights(p.theta, h, n)))
}

/// Picard iterates `f^{(k+1)} = a + f^{(k)} * g`, `k = 0..n_iters`, on the
/// uniform `t_grid`; element 0 is `f0`.
pub fn picard_iterate(f0: &[f64], p: &RenewalProblem, n_iters: usize) -> Result<Vec<Vec<f64>>> {
    let (a, w) = grid_setup(p)?;
    if f0.len() != p.t_grid.len() {
        return Err(domain("initial iterate must match the time grid"));
    }
    if f0.iter().any(|v| !(*v >= 0.0)) {
        return Err(domain("initial iterate must be nonnegative"));
    }
    let mut out = Vec::with_capacity(n_iters + 1);
    out.push(f0.to_vec());
    for _ in 0..n_iters {
        let next = picard_map(p, &a, &w, out.last().expect("nonempty"));
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Both inequalities hold within tolerance (a solution).
    Solution,
    Supersolution,
    Subsolution,
    Neither,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    pub kind: Ordering,
    /// `max_i (a + h*g - h)_i / scale`: positive part violates supersolution.
    pub super_violation: f64,
    /// `max_i (h - a - h*g)_i / scale`: positive part violates subsolution.
    pub sub_violation: f64,
    /// Whether `h ≥ f` (supersolution) or `h ≤ f` (subsolution) holds at
    /// every grid point against the discrete solution.
    pub ordering_holds: bool,
}

/// Relative tolerance for the residual classification.
pub const ORDER_TOL: f64 = 1e-9;

/// Classify `h` against the discrete renewal operator and check the
/// comparison with the solution.
pub fn check_supersolution(h: &[f64], p: &RenewalProblem) -> Result<OrderingReport> {
    let (a, w) = grid_setup(p)?;
    if h.len() != p.t_grid.len() {
        return Err(domain("candidate must match the time grid"));
    }
    if h.iter().any(|v| !(*v >= 0.0)) {
        return Err(domain("candidate must be nonnegative"));
    }
    let th = picard_map(p, &a, &w, h);
    let scale = h.iter().chain(&th).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let super_violation = th.iter().zip(h).map(|(t, v)| (t - v) / scale).fold(f64::NEG_INFINITY, f64::max);
    let sub_violation = th.iter().zip(h).map(|(t, v)| (v - t) / scale).fold(f64::NEG_INFINITY, f64::max);
    let is_super = super_violation <= ORDER_TOL;
    let is_sub = sub_violation <= ORDER_TOL;
    let kind = match (is_super, is_sub) {
        (true, true) => Ordering::Solution,
        (true, false) => Ordering::Supersolution,
        (false, true) => Ordering::Subsolution,
        (false, false) => Ordering::Neither,
    };
    let f = solve_renewal_on_grid(p)?;
    let slack = |v: &f64| ORDER_TOL * v.abs().max(scale);
    let ordering_holds = match kind {
        Ordering::Solution => h.iter().zip(&f).all(|(x, y)| (x - y).abs() <= 1e3 * slack(y)),
        Ordering::Supersolution => h.iter().zip(&f).all(|(x, y)| *x >= y - slack(y)),
        Ordering::Subsolution => h.iter().zip(&f).all(|(x, y)| *x <= y + slack(y)),
        Ordering::Neither => false,
    };
    Ok(OrderingReport {
        kind,
        super_violation,
        sub_violation,
        ordering_holds,
    })
}
