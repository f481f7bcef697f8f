//! Estimators on a simulated ensemble.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::bounds::{energy_bound_rate, envelope_min_c, envelope_rate};
use super::FieldEnsemble;
use crate::error::{domain, Error, Result};
use crate::stats::{jackknife_of_mean, least_squares_line};

/// Half-width multiplier of the reported confidence intervals.
pub const CI_Z: f64 = 1.96;
/// Standard errors allowed between an estimate and a bound before a cell
/// counts as violating it.
pub const VIOLATION_SE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPoint {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// `E|u_t|^p` over time at a point or the average over a set of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve {
    pub p: u32,
    pub cells: Vec<usize>,
    /// Cell centres of `cells`.
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
}

/// Replica average of `|u|^p` at `level`, averaged over `cells`, with a
/// jackknife standard error. The cells must have been recorded.
pub fn estimate_moment(e: &FieldEnsemble, p: u32, level: usize, cells: &[usize]) -> Result<MomentPoint> {
    if cells.is_empty() {
        return Err(Error::Estimation("moment over an empty region".into()));
    }
    if p == 0 {
        return Err(domain("moment order must be positive"));
    }
    if level >= e.levels() {
        return Err(domain(format!("level {level} beyond the last level {}", e.grid.nt)));
    }
    let slots = cells
        .iter()
        .map(|&c| {
            e.slot(c).ok_or_else(|| {
                Error::Estimation(format!("cell {c} was not recorded; add it to the recorded cells"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = slots.len() as f64;
    let ys: Vec<f64> = (0..e.replicas)
        .map(|r| slots.iter().map(|&s| e.recorded_value(r, level, s).abs().powi(p as i32)).sum::<f64>() / k)
        .collect();
    let (estimate, stderr) = jackknife_of_mean(&ys, |m| m)?;
    Ok(MomentPoint {
        t: e.grid.t(level),
        estimate,
        stderr,
    })
}

pub fn moment_curve(e: &FieldEnsemble, p: u32, cells: &[usize]) -> Result<MomentCurve> {
    let mut c = MomentCurve {
        p,
        cells: cells.to_vec(),
        x: cells.iter().map(|&j| e.grid.x(j)).collect(),
        t: Vec::new(),
        estimate: Vec::new(),
        stderr: Vec::new(),
        replicas: e.replicas,
        seed: e.seed,
    };
    for m in 0..e.levels() {
        let pt = estimate_moment(e, p, m, cells)?;
        c.t.push(pt.t);
        c.estimate.push(pt.estimate);
        c.stderr.push(pt.stderr);
    }
    Ok(c)
}

/// `E u^p` at every cell of `level` from the power sums, with the
/// jackknife standard error of a sample mean, `s/√n`. Needs `p` and `2p`
/// among the stored powers, i.e. `p ∈ {1, 2, 4, 6}`.
pub fn moment_field(e: &FieldEnsemble, p: u32, level: usize) -> Result<Vec<(f64, f64)>> {
    let n = e.replicas as f64;
    if e.replicas < 2 {
        return Err(Error::Estimation("standard errors need at least two replicas".into()));
    }
    if level >= e.levels() {
        return Err(domain(format!("level {level} beyond the last level {}", e.grid.nt)));
    }
    let (k1, k2) = (p as i32, 2 * p as i32);
    (0..e.grid.nx)
        .map(|j| {
            let (s1, s2) = match (e.power_sum(k1, level, j), e.power_sum(k2, level, j)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Unsupported(format!(
                        "moment fields are kept for p in {{1, 2, 4, 6}}, got {p}"
                    )))
                }
            };
            let mean = s1 / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok((mean, (var / n).sqrt()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovFit {
    /// Least-squares slope of `log E|u|^p` against `t`.
    pub rate: f64,
    pub intercept: f64,
    /// Standard error of the slope treating levels as independent.
    pub stderr: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// Largest change of the slope when fitting either half of the window.
    pub window_sensitivity: f64,
}

/// Growth rate of a moment curve over `window` (default: the second half
/// of the time range).
pub fn estimate_lyapunov(curve: &MomentCurve, window: Option<(f64, f64)>) -> Result<LyapunovFit> {
    let t_end = curve.t.last().copied().unwrap_or(0.0);
    let (a, b) = window.unwrap_or((0.5 * t_end, t_end));
    let tol = 1e-12 * t_end.max(1.0);
    let idx: Vec<usize> = (0..curve.t.len())
        .filter(|&i| curve.t[i] >= a - tol && curve.t[i] <= b + tol)
        .collect();
    if idx.len() < 5 {
        return Err(Error::Estimation(format!(
            "need at least 5 time points in [{a}, {b}], found {}",
            idx.len()
        )));
    }
    if let Some(&i) = idx.iter().find(|&&i| !(curve.estimate[i] > 0.0)) {
        return Err(Error::Estimation(format!(
            "nonpositive moment estimate {} at t = {}",
            curve.estimate[i], curve.t[i]
        )));
    }
    let ts: Vec<f64> = idx.iter().map(|&i| curve.t[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| curve.estimate[i].ln()).collect();
    let (intercept, rate) = least_squares_line(&ts, &ys)?;
    let h = ts.len() / 2;
    let first = least_squares_line(&ts[..h + 1], &ys[..h + 1])?.1;
    let second = least_squares_line(&ts[h..], &ys[h..])?.1;
    let mt = ts.iter().sum::<f64>() / ts.len() as f64;
    let sxx: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    let var: f64 = idx
        .iter()
        .zip(&ts)
        .map(|(&i, t)| {
            let s = curve.stderr[i] / curve.estimate[i];
            (t - mt) * (t - mt) * s * s
        })
        .sum();
    Ok(LyapunovFit {
        rate,
        intercept,
        stderr: var.sqrt() / sxx,
        window: (a, b),
        points: ts.len(),
        window_sensitivity: (first - rate).abs().max((second - rate).abs()),
    })
}

/// `N_{γ,c}(u) = sup_{t,x} [e^{-γt + cx} E|u_t(x)|²]^{1/2}` over the grid.
pub fn weighted_norm(e: &FieldEnsemble, gamma: f64, c: f64) -> Result<f64> {
    if !(gamma > 0.0) || !c.is_finite() {
        return Err(domain("weighted norm needs gamma > 0 and finite c"));
    }
    let mut best = 0.0f64;
    for m in 0..e.levels() {
        let field = moment_field(e, 2, m)?;
        let t = e.grid.t(m);
        for (j, (v, _)) in field.iter().enumerate() {
            best = best.max((-gamma * t + c * e.grid.x(j)).exp() * v);
        }
    }
    Ok(best.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub c: f64,
    /// Admissibility threshold on `c`.
    pub c_min: f64,
    /// `(2νc²)^{1/β}`.
    pub rate: f64,
    pub a_fit: f64,
    pub cells_checked: usize,
    /// Cells whose point estimate lies below the envelope.
    pub within: usize,
    pub fraction_within: f64,
    /// `(level, cell)` with estimate minus three standard errors above the envelope.
    pub violations: Vec<(usize, usize)>,
    pub pass: bool,
}

fn require_compact_start(e: &FieldEnsemble) -> Result<()> {
    if !e.sigma.vanishes_at_zero() {
        return Err(domain("this estimate requires sigma(0) = 0"));
    }
    let n = e.u0.len();
    if e.u0[0] != 0.0 || e.u0[n - 1] != 0.0 {
        return Err(domain("this estimate requires u0 to vanish at both ends of the domain"));
    }
    Ok(())
}

/// Check `E|u_t(x)|² ≤ A exp(-c|x| + (2νc²)^{1/β} t)` at every grid point.
/// `a_fit = None` takes the smallest `A` that holds at `t = 0`.
pub fn envelope_check(e: &FieldEnsemble, c: f64, a_fit: Option<f64>) -> Result<EnvelopeReport> {
    require_compact_start(e)?;
    let (beta, nu) = (e.params.beta, e.params.nu);
    let c_min = envelope_min_c(beta, nu, e.sigma.lip_sigma)?;
    if !(c > c_min) || !c.is_finite() {
        return Err(domain(format!(
            "c = {c} is not admissible: need c > {c_min} (c^(1/beta - 1/2) > Lip_sigma c0)"
        )));
    }
    let rate = envelope_rate(beta, nu, c);
    let xs = e.grid.xs();
    let a = match a_fit {
        Some(a) => a,
        None => xs
            .iter()
            .zip(&e.u0)
            .map(|(x, u)| u * u * (c * x.abs()).exp())
            .fold(0.0, f64::max),
    };
    let mut within = 0;
    let mut checked = 0;
    let mut violations = Vec::new();
    for m in 0..e.levels() {
        let t = e.grid.t(m);
        for (j, (v, se)) in moment_field(e, 2, m)?.into_iter().enumerate() {
            // the fitted A makes the t = 0 bound tight up to rounding
            let bound = a * (-c * xs[j].abs() + rate * t).exp() * (1.0 + 1e-12);
            checked += 1;
            if v <= bound {
                within += 1;
            }
            if v - VIOLATION_SE * se > bound {
                violations.push((m, j));
            }
        }
    }
    Ok(EnvelopeReport {
        c,
        c_min,
        rate,
        a_fit: a,
        cells_checked: checked,
        within,
        fraction_within: within as f64 / checked as f64,
        pass: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontEstimate {
    pub theta: f64,
    /// Levels `m ≥ 1`.
    pub t: Vec<f64>,
    /// `(1/t) log sup_{|x| > θt} E|u_t(x)|²`.
    pub proxy_t: Vec<f64>,
    pub stderr_t: Vec<f64>,
    pub window_start: f64,
    /// Mean of `proxy_t` over `t ≥ window_start`.
    pub proxy: f64,
    /// Mean of `stderr_t` over the window (bounds the error of the mean).
    pub stderr: f64,
    pub ci_half_width: f64,
}

/// Finite-time proxy for the front `L(θ)`. `window_start` defaults to
/// `t_max / 2`.
pub fn estimate_front(e: &FieldEnsemble, theta: f64, window_start: Option<f64>) -> Result<FrontEstimate> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(domain(format!("theta must be finite and nonnegative, got {theta}")));
    }
    if !e.sigma.vanishes_at_zero() {
        return Err(domain("front estimates require sigma(0) = 0"));
    }
    let xs = e.grid.xs();
    let start = window_start.unwrap_or(0.5 * e.grid.t_max);
    let mut out = FrontEstimate {
        theta,
        t: Vec::new(),
        proxy_t: Vec::new(),
        stderr_t: Vec::new(),
        window_start: start,
        proxy: 0.0,
        stderr: 0.0,
        ci_half_width: 0.0,
    };
    for m in 1..e.levels() {
        let t = e.grid.t(m);
        let field = moment_field(e, 2, m)?;
        let best = xs
            .iter()
            .zip(&field)
            .filter(|(x, _)| x.abs() > theta * t)
            .map(|(_, v)| *v)
            .fold(None, |acc: Option<(f64, f64)>, v| match acc {
                Some(a) if a.0 >= v.0 => Some(a),
                _ => Some(v),
            });
        let Some((v, se)) = best else {
            return Err(Error::Truncation(format!(
                "no cell with |x| > {} at t = {t}; widen the domain",
                theta * t
            )));
        };
        if !(v > 0.0) {
            return Err(Error::Estimation(format!("second moment vanishes beyond |x| = {} at t = {t}", theta * t)));
        }
        out.t.push(t);
        out.proxy_t.push(v.ln() / t);
        out.stderr_t.push(se / (v * t));
    }
    let tol = 1e-12 * e.grid.t_max;
    let win: Vec<usize> = (0..out.t.len()).filter(|&i| out.t[i] >= start - tol).collect();
    if win.is_empty() {
        return Err(domain(format!("no time level at or after {start}")));
    }
    let k = win.len() as f64;
    out.proxy = win.iter().map(|&i| out.proxy_t[i]).sum::<f64>() / k;
    out.stderr = win.iter().map(|&i| out.stderr_t[i]).sum::<f64>() / k;
    out.ci_half_width = CI_Z * out.stderr;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLevel {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub epsilon: f64,
    pub rate: f64,
    pub initial_energy: f64,
    pub levels: Vec<EnergyLevel>,
    pub pass: bool,
}

/// Compare `E‖u_t‖²` with `ε^{-1} ‖u0‖² exp(rate t)`.
pub fn l2_energy_check(e: &FieldEnsemble, epsilon: f64) -> Result<EnergyReport> {
    let rate = energy_bound_rate(&e.params, e.sigma.lip_sigma, epsilon)?;
    let dx = e.grid.dx();
    let u0n = dx * e.u0.iter().map(|u| u * u).sum::<f64>();
    let mut levels = Vec::with_capacity(e.levels());
    let mut pass = true;
    for m in 0..e.levels() {
        let xs: Vec<f64> = (0..e.replicas).map(|r| e.energy(r, m)).collect();
        let (est, se) = if e.replicas >= 2 {
            jackknife_of_mean(&xs, |v| v)?
        } else {
            (xs[0], 0.0)
        };
        let t = e.grid.t(m);
        let bound = u0n / epsilon * (rate * t).exp();
        pass &= est - VIOLATION_SE * se <= bound;
        levels.push(EnergyLevel {
            t,
            estimate: est,
            stderr: se,
            bound,
        });
    }
    Ok(EnergyReport {
        epsilon,
        rate,
        initial_energy: u0n,
        levels,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovPoint {
    pub k: f64,
    pub eta: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    /// Second divided differences of `η(k)` with standard errors.
    pub second_differences: Vec<(f64, f64)>,
    /// `η(k)/k` in increasing `k`.
    pub ratios: Vec<f64>,
    /// No second difference is significantly negative.
    pub convex: bool,
    /// No increment of `η(k)/k` is significantly negative.
    pub ratio_nondecreasing: bool,
    /// Every increment of `η(k)/k` is significantly positive.
    pub ratio_strictly_increasing: bool,
}

/// Convexity of `k ↦ η(k)` and monotonicity of `η(k)/k` from estimated
/// Lyapunov exponents, with errors treated as independent.
pub fn convexity_diagnostic(points: &[LyapunovPoint]) -> Result<ConvexityReport> {
    if points.len() < 3 {
        return Err(Error::Estimation("convexity needs at least three orders".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.k.total_cmp(&b.k));
    if pts.windows(2).any(|w| !(w[1].k > w[0].k)) || pts.iter().any(|p| !(p.k > 0.0)) {
        return Err(domain("orders must be positive and distinct"));
    }
    let mut second = Vec::new();
    for w in pts.windows(3) {
        let (h1, h2) = (w[1].k - w[0].k, w[2].k - w[1].k);
        let (a, b, c) = (1.0 / h1, -(1.0 / h1 + 1.0 / h2), 1.0 / h2);
        let d = a * w[0].eta + b * w[1].eta + c * w[2].eta;
        let se = ((a * w[0].stderr).powi(2) + (b * w[1].stderr).powi(2) + (c * w[2].stderr).powi(2)).sqrt();
        second.push((d, se));
    }
    let ratios: Vec<f64> = pts.iter().map(|p| p.eta / p.k).collect();
    let steps: Vec<(f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let d = w[1].eta / w[1].k - w[0].eta / w[0].k;
            let se = ((w[1].stderr / w[1].k).powi(2) + (w[0].stderr / w[0].k).powi(2)).sqrt();
            (d, se)
        })
        .collect();
    // exact inputs leave rounding-level differences
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.eta.abs()));
    Ok(ConvexityReport {
        convex: second.iter().all(|(d, se)| *d >= -CI_Z * se - slack(scale)),
        ratio_nondecreasing: steps.iter().all(|(d, se)| *d >= -CI_Z * se - slack(scale)),
        ratio_strictly_increasing: steps.iter().all(|(d, se)| *d > CI_Z * se + slack(scale)),
        second_differences: second,
        ratios,
    })
}
