//! The fundamental solution `G_t(x)`: density of `X(E_t)`, an isotropic
//! α-stable process with symbol `e^{-sν|ξ|^α}` run at the inverse
//! subordinator clock.
//!
//! Two independent routes are provided:
//!
//! * subordination, `G_t(x) = ∫_0^∞ p_{X(s)}(x) f_{E_t}(s) ds`, using
//!   `E_t = t^β E_1` so that `f_{E_1}` can be tabulated once per β;
//! * spectral inversion in `d = 1`,
//!   `G_t(x) = (1/π) ∫_0^∞ cos(ξx) E_β(-ν ξ^α t^β) dξ`, with the part beyond
//!   the cutoff summed analytically from the algebraic expansion of `E_β`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::quad::{even_trapezoid_richardson, integrate_breaks, integrate_to_infinity, ExpSinhRule, QuadConfig};
use crate::special_fn::{
    beta_fn, gamma_fn, ln_gamma, mittag_leffler, ml_negative_asymptotic_coefficients, MLParams,
};
use crate::stats::NeumaierSum;
use crate::subordinator::{inverse_subordinator_density, inverse_subordinator_density_at_zero, SubordinatorParams};

/// Parameters of the deterministic operator `∂^β_t + ν(-Δ)^{α/2}` in `ℝ^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub alpha: f64,
    pub nu: f64,
    pub d: u32,
}

impl ModelParams {
    pub fn new(beta: f64, alpha: f64, nu: f64, d: u32) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(format!("beta must lie in (0, 1], got {beta}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(domain(format!("nu must be positive, got {nu}")));
        }
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        Ok(Self { beta, alpha, nu, d })
    }

    /// `βd/α`, the exponent of `∫G_t² = C* t^{-βd/α}`.
    pub fn theta(&self) -> f64 {
        self.beta * self.d as f64 / self.alpha
    }

    /// Require `d < 2α`, the condition for `G_t ∈ L²`.
    pub fn check_l2(&self) -> Result<()> {
        if (self.d as f64) < 2.0 * self.alpha {
            Ok(())
        } else {
            Err(domain(format!(
                "G_t is not square integrable: d = {} >= 2 alpha = {}",
                self.d,
                2.0 * self.alpha
            )))
        }
    }

    /// Require `d < min(2, 1/β) α`, the existence condition for the SPDE.
    pub fn check_simulation(&self) -> Result<()> {
        let bound = (2.0f64).min(1.0 / self.beta) * self.alpha;
        if (self.d as f64) < bound {
            Ok(())
        } else {
            Err(domain(format!(
                "d = {} violates d < min(2, 1/beta) alpha = {bound}",
                self.d
            )))
        }
    }

    fn subordinator(&self) -> Option<SubordinatorParams> {
        (self.beta < 1.0).then_some(SubordinatorParams {
            beta: self.beta,
            target_rel_err: 1e-10,
        })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_point(p: &ModelParams, x: &[f64]) -> Result<()> {
    if x.len() != p.d as usize {
        return Err(domain(format!("point has {} coordinates, expected d = {}", x.len(), p.d)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("point coordinates must be finite"));
    }
    Ok(())
}

/// Density of `X(s)`, the isotropic α-stable law with `E e^{iξ·X(s)} = e^{-sν|ξ|^α}`.
pub fn stable_pdf(p: &ModelParams, s: f64, x: &[f64]) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain(format!("stable_pdf requires s > 0, got {s}")));
    }
    check_point(p, x)?;
    stable_pdf_radial(p, s, norm(x))
}

fn stable_pdf_radial(p: &ModelParams, s: f64, r: f64) -> Result<f64> {
    let d = p.d as f64;
    if p.alpha == 2.0 {
        let v = 4.0 * p.nu * s;
        return Ok((PI * v).powf(-0.5 * d) * (-r * r / v).exp());
    }
    if p.alpha == 1.0 {
        let g = s * p.nu;
        let c = (ln_gamma(0.5 * (d + 1.0)) - 0.5 * (d + 1.0) * PI.ln()).exp();
        return Ok(c * g / (g * g + r * r).powf(0.5 * (d + 1.0)));
    }
    let sigma = (s * p.nu).powf(1.0 / p.alpha);
    Ok(standard_radial_density(p.alpha, p.d, r / sigma)? * sigma.powf(-d))
}

/// Density at radius `ρ` of the isotropic stable law with symbol `e^{-|ξ|^α}`.
pub fn standard_radial_density(alpha: f64, d: u32, rho: f64) -> Result<f64> {
    if d == 1 {
        if let Some(v) = stable_series_small(alpha, rho) {
            return Ok(v);
        }
        if let Some(v) = stable_series_large(alpha, rho) {
            return Ok(v);
        }
    }
    if d > 3 {
        return Err(Error::Unsupported(format!(
            "numeric stable density inversion implemented for d <= 3, got d = {d}"
        )));
    }
    let xi_max = 45f64.powf(1.0 / alpha);
    let mut pts: Vec<f64> = (0..40).map(|k| xi_max * 0.5f64.powi(k)).collect();
    pts.push(0.0);
    if rho > 0.0 {
        let period = PI / rho;
        let n = (xi_max / period).floor() as usize;
        if n <= 4000 {
            pts.extend((1..=n).map(|k| k as f64 * period));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let cfg = QuadConfig::new(1e-17, 1e-12).with_max_intervals(20_000);
    let damp = |xi: f64| (-xi.powf(alpha)).exp();
    let q = match d {
        1 => integrate_breaks(|xi| (xi * rho).cos() * damp(xi), &pts, &cfg)?.value / PI,
        2 => integrate_breaks(|xi| xi * libm::j0(xi * rho) * damp(xi), &pts, &cfg)?.value / (2.0 * PI),
        _ => {
            if rho == 0.0 {
                integrate_breaks(|xi| xi * xi * damp(xi), &pts, &cfg)?.value / (2.0 * PI * PI)
            } else {
                integrate_breaks(|xi| xi * (xi * rho).sin() * damp(xi), &pts, &cfg)?.value
                    / (2.0 * PI * PI * rho)
            }
        }
    };
    Ok(q.max(0.0))
}

// (1/πα) Σ (-1)^k Γ((2k+1)/α) ρ^{2k} / (2k)!, entire for α > 1
fn stable_series_small(alpha: f64, rho: f64) -> Option<f64> {
    if alpha <= 1.0 {
        return None;
    }
    let mut sum = NeumaierSum::default();
    let mut abs_sum = 0.0;
    let lr = if rho > 0.0 { rho.ln() } else { f64::NEG_INFINITY };
    for k in 0..300u32 {
        let kf = k as f64;
        let lmag = ln_gamma((2.0 * kf + 1.0) / alpha) - ln_gamma(2.0 * kf + 1.0)
            + if k == 0 { 0.0 } else { 2.0 * kf * lr };
        let mag = lmag.exp();
        sum.add(if k % 2 == 0 { mag } else { -mag });
        abs_sum += mag;
        if k > 2 && mag < 1e-18 * abs_sum {
            let v = sum.value() / (PI * alpha);
            let err = 64.0 * f64::EPSILON * abs_sum / (PI * alpha);
            return (v > 0.0 && err <= 1e-11 * v).then_some(v);
        }
    }
    None
}

// (1/π) Σ (-1)^{k+1} Γ(αk+1)/k! sin(παk/2) ρ^{-αk-1}, asymptotic for 1 < α < 2
fn stable_series_large(alpha: f64, rho: f64) -> Option<f64> {
    if !(alpha > 1.0 && alpha < 2.0) || rho < 1.0 {
        return None;
    }
    let lr = rho.ln();
    let mut sum = NeumaierSum::default();
    let mut prev = f64::INFINITY;
    for k in 1..200u32 {
        let kf = k as f64;
        let mag = (ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0) - (alpha * kf + 1.0) * lr).exp();
        let term = mag * (0.5 * PI * alpha * kf).sin();
        let term = if k % 2 == 1 { term } else { -term };
        let s = sum.value();
        if k > 1 && mag <= 1e-13 * s.abs() {
            return (s > 0.0).then_some(s / PI);
        }
        if mag > prev {
            return None;
        }
        prev = mag;
        sum.add(term);
    }
    None
}

/// `G_t(x)` by adaptive quadrature of the subordination integral.
pub fn green_kernel(p: &ModelParams, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("green_kernel requires t > 0, got {t}")));
    }
    check_point(p, x)?;
    let r = norm(x);
    let Some(sp) = p.subordinator() else {
        return stable_pdf_radial(p, t, r);
    };
    let tb = t.powf(p.beta);
    let mut err = None;
    let integrand = |y: f64| {
        if y == 0.0 {
            return 0.0;
        }
        let f = inverse_subordinator_density(&sp, 1.0, y);
        let g = stable_pdf_radial(p, tb * y, r);
        match (f, g) {
            (Ok(f), Ok(g)) => f * g,
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let mut pts = vec![0.0, 0.05, 0.3, 1.0, 3.0];
    if p.alpha == 2.0 {
        // the Gaussian factor peaks in s at r²/(2dν)
        let ys = r * r / (2.0 * p.d as f64 * p.nu * tb);
        if ys > 0.0 && ys < 3.0 {
            pts.push(ys);
        }
    }
    pts.sort_by(f64::total_cmp);
    let cfg = QuadConfig::new(1e-16, 1e-10).with_max_intervals(4000);
    let q = integrate_to_infinity(integrand, &pts, &cfg)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(q.value)
}

/// Fixed-node evaluator of the subordination integral. The density of
/// `E_1` is tabulated on exp-sinh nodes once; each `G_t(x)` is then a
/// weighted sum of stable densities.
#[derive(Debug, Clone)]
pub struct GreenEvaluator {
    params: ModelParams,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GreenEvaluator {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let Some(sp) = p.subordinator() else {
            return Ok(Self {
                params: *p,
                nodes: Vec::new(),
                weights: Vec::new(),
            });
        };
        // f_{E_1} rises like exp(-c y^{β/(1-β)}); resolve that wall with at
        // least four nodes per (1-β)/β in log y
        let wall = (1.0 - p.beta) / p.beta;
        let step = (0.025f64).min(wall / (4.0 * core::f64::consts::FRAC_PI_2));
        let rule = ExpSinhRule::new(1.0, step, -4.5, 2.6);
        let mut nodes = Vec::with_capacity(rule.nodes.len());
        let mut weights = Vec::with_capacity(rule.nodes.len());
        for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
            let f = inverse_subordinator_density(&sp, 1.0, y)?;
            if f > 0.0 {
                nodes.push(y);
                weights.push(w * f);
            }
        }
        // guard against an unresolved rule
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Accuracy {
                estimate: mass,
                bound: 1e-9,
            });
        }
        let _ = inverse_subordinator_density_at_zero(&sp, 1.0)?;
        Ok(Self {
            params: *p,
            nodes,
            weights,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `G_t` at radius `r`.
    pub fn eval_radial(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(domain(format!("time must be positive, got {t}")));
        }
        if self.nodes.is_empty() {
            return stable_pdf_radial(&self.params, t, r);
        }
        let tb = t.powf(self.params.beta);
        let mut sum = 0.0;
        for (&y, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * stable_pdf_radial(&self.params, tb * y, r)?;
        }
        Ok(sum)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        check_point(&self.params, x)?;
        self.eval_radial(t, norm(x))
    }

    /// `P(|X(E_t)| > r)` for `d = 1`, `α = 2`.
    pub fn tail_mass(&self, t: f64, r: f64) -> Result<f64> {
        let p = &self.params;
        if p.d != 1 || p.alpha != 2.0 {
            return Err(Error::Unsupported("tail mass is implemented for d = 1, alpha = 2".into()));
        }
        let tail = |s: f64| libm::erfc(r / (4.0 * p.nu * s).sqrt());
        if self.nodes.is_empty() {
            return Ok(tail(t));
        }
        let tb = t.powf(p.beta);
        Ok(self.nodes.iter().zip(&self.weights).map(|(&y, &w)| w * tail(tb * y)).sum())
    }

    fn length_scale(&self, t: f64) -> f64 {
        (self.params.nu * t.powf(self.params.beta)).powf(1.0 / self.params.alpha)
    }

    fn radial_breaks(&self, t: f64) -> Vec<f64> {
        let l = self.length_scale(t);
        let mut pts = vec![0.0];
        pts.extend([0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|k| k * l));
        pts
    }
}

/// `∫_0^∞ cos(ηy) η^{-m} dη` over `[h, ∞)`, `y ≥ 0`.
fn power_cosine_tail(m: f64, h: f64, y: f64) -> f64 {
    if y == 0.0 {
        return h.powf(1.0 - m) / (m - 1.0);
    }
    // repeated integration by parts in 1/(iyh)
    let iy = Complex64::new(0.0, y);
    let z = Complex64::new(0.0, y * h);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..60 {
        let next = term * (m + n as f64) / z;
        if next.norm() > term.norm() {
            break;
        }
        term = next;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    let phase = Complex64::new((y * h).cos(), (y * h).sin());
    (-(phase * h.powf(-m) / iy) * sum).re
}

/// `G_t(x)` in `d = 1` by cosine inversion of `E_β(-ν|ξ|^α t^β)`.
pub fn green_kernel_spectral(p: &ModelParams, t: f64, x: f64) -> Result<f64> {
    if p.d != 1 {
        return Err(Error::Unsupported("spectral inversion is implemented for d = 1".into()));
    }
    if !(t > 0.0) || !x.is_finite() {
        return Err(domain(format!("green_kernel_spectral requires t > 0, finite x; got ({t}, {x})")));
    }
    let a = p.nu * t.powf(p.beta);
    let scale = a.powf(1.0 / p.alpha);
    let y = (x / scale).abs();
    let y = if y < 1e-8 { 0.0 } else { y };
    if y == 0.0 && p.alpha <= 1.0 {
        return Err(domain("G_t(0) is infinite for alpha <= 1 in d = 1"));
    }
    let ml = MLParams::new(p.beta, 1e-11)?;
    let z_cut = 1e4f64;
    let mut h = z_cut.powf(1.0 / p.alpha);
    if y > 0.0 {
        h = h.max(200.0 / y);
    }
    let mut pts = vec![0.0];
    let mut b = 1e-3f64;
    while b < h {
        pts.push(b);
        b *= 2.0;
    }
    pts.push(h);
    if y > 0.0 {
        let period = PI / y;
        let n = (h / period) as usize;
        if n <= 4000 {
            pts.extend((1..n).map(|k| k as f64 * period));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
    }
    let mut err = None;
    let integrand = |eta: f64| {
        let e = if p.beta == 1.0 {
            (-eta.powf(p.alpha)).exp()
        } else {
            match mittag_leffler(&ml, -eta.powf(p.alpha)) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        };
        (eta * y).cos() * e
    };
    let cfg = QuadConfig::new(1e-15, 1e-11).with_max_intervals(40_000);
    let body = integrate_breaks(integrand, &pts, &cfg)?.value;
    if let Some(e) = err {
        return Err(e);
    }
    let mut tail = 0.0;
    if p.beta < 1.0 {
        let coeffs = ml_negative_asymptotic_coefficients(p.beta, 40);
        let zc = h.powf(p.alpha);
        for (k, &c) in coeffs.iter().enumerate() {
            let kf = (k + 1) as f64;
            if c == 0.0 {
                continue;
            }
            if (c * zc.powf(-kf)).abs() < 1e-18 {
                break;
            }
            tail += c * power_cosine_tail(p.alpha * kf, h, y);
        }
    }
    Ok((body + tail) / (PI * scale))
}

fn ml_tol() -> f64 {
    1e-12
}

/// `∫_0^∞ z^{d/α - 1} E_β(-z)² dz`.
pub fn c_star_z_integral(p: &ModelParams) -> Result<f64> {
    p.check_l2()?;
    let q = p.d as f64 / p.alpha;
    if p.beta == 1.0 {
        return Ok(gamma_fn(q)? * 2f64.powf(-q));
    }
    let ml = MLParams::new(p.beta, ml_tol())?;
    let z_cut = 1e3f64;
    // z = w^{1/q} removes the endpoint singularity
    let mut pts = vec![0.0];
    let mut z = 1e-4;
    while z < z_cut {
        pts.push(z.powf(q));
        z *= 2.0;
    }
    pts.push(z_cut.powf(q));
    let mut err = None;
    let integrand = |w: f64| {
        let z = w.powf(1.0 / q);
        match mittag_leffler(&ml, -z) {
            Ok(e) => e * e / q,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let cfg = QuadConfig::new(1e-16, 1e-12).with_max_intervals(4000);
    let body = integrate_breaks(integrand, &pts, &cfg)?.value;
    if let Some(e) = err {
        return Err(e);
    }
    let c = ml_negative_asymptotic_coefficients(p.beta, 12);
    let mut tail = 0.0;
    for (i, ci) in c.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            let n = (i + j + 2) as f64;
            tail += ci * cj * z_cut.powf(q - n) / (n - q);
        }
    }
    Ok(body + tail)
}

/// Bounds on [`c_star_z_integral`] from the Mittag-Leffler sandwich:
/// `B(q, 2-q) Γ(1-β)^{-q} ≤ ∫ ≤ B(q, 2-q) Γ(1+β)^q`, `q = d/α`.
pub fn c_star_z_integral_bounds(p: &ModelParams) -> Result<(f64, f64)> {
    p.check_l2()?;
    let q = p.d as f64 / p.alpha;
    let b = beta_fn(q, 2.0 - q)?;
    let upper = b * gamma_fn(1.0 + p.beta)?.powf(q);
    let lower = if p.beta < 1.0 {
        b * gamma_fn(1.0 - p.beta)?.powf(-q)
    } else {
        0.0
    };
    Ok((lower, upper))
}

fn c_star_prefactor(p: &ModelParams) -> Result<f64> {
    let d = p.d as f64;
    let q = d / p.alpha;
    Ok(p.nu.powf(-q) * 2.0 * PI.powf(0.5 * d) / (p.alpha * gamma_fn(0.5 * d)?) * (2.0 * PI).powf(-d))
}

/// `C*` with `∫ G_t(x)² dx = C* t^{-βd/α}`.
pub fn c_star(p: &ModelParams) -> Result<f64> {
    Ok(c_star_prefactor(p)? * c_star_z_integral(p)?)
}

/// `∫ G_t(x)² dx` by quadrature in `x` (radial for `d > 1`).
pub fn green_l2_norm(p: &ModelParams, t: f64) -> Result<f64> {
    p.check_l2()?;
    let ev = GreenEvaluator::new(p)?;
    green_l2_norm_with(&ev, t)
}

pub fn green_l2_norm_with(ev: &GreenEvaluator, t: f64) -> Result<f64> {
    radial_integral(ev, t, |g, _| g * g)
}

/// `∫ G_t(x) dx`.
pub fn green_mass(p: &ModelParams, t: f64) -> Result<f64> {
    let ev = GreenEvaluator::new(p)?;
    radial_integral(&ev, t, |g, _| g)
}

fn radial_integral(ev: &GreenEvaluator, t: f64, h: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let p = *ev.params();
    let d = p.d as f64;
    let surface = 2.0 * PI.powf(0.5 * d) / gamma_fn(0.5 * d)?;
    let mut err = None;
    let integrand = |r: f64| match ev.eval_radial(t, r) {
        Ok(g) => h(g, r) * r.powf(d - 1.0),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let cfg = QuadConfig::new(1e-300, 1e-10).with_max_intervals(4000);
    let q = integrate_to_infinity(integrand, &ev.radial_breaks(t), &cfg)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(surface * q.value)
}

fn check_exp_moment(p: &ModelParams, lambda: &[f64], s: f64) -> Result<()> {
    if p.alpha != 2.0 {
        return Err(Error::Unsupported(format!(
            "exponential moments of G exist only for alpha = 2, got {}",
            p.alpha
        )));
    }
    check_point(p, lambda)?;
    if !(s > 0.0) {
        return Err(domain(format!("time must be positive, got {s}")));
    }
    Ok(())
}

/// `∫ e^{λ·x} G_s(x) dx = E_β(ν|λ|² s^β)` (α = 2).
pub fn green_exp_moment(p: &ModelParams, lambda: &[f64], s: f64) -> Result<f64> {
    check_exp_moment(p, lambda, s)?;
    let l2: f64 = lambda.iter().map(|v| v * v).sum();
    let ml = MLParams::new(p.beta, 1e-12)?;
    mittag_leffler(&ml, p.nu * l2 * s.powf(p.beta))
}

/// The same exponential moment by direct quadrature in `x` (`d = 1`).
pub fn green_exp_moment_quadrature(p: &ModelParams, lambda: f64, s: f64) -> Result<f64> {
    check_exp_moment(p, &[lambda], s)?;
    if p.d != 1 {
        return Err(Error::Unsupported("quadrature check implemented for d = 1".into()));
    }
    let ev = GreenEvaluator::new(p)?;
    let mut err = None;
    let integrand = |x: f64| match ev.eval_radial(s, x) {
        Ok(g) => 2.0 * (lambda * x).cosh() * g,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let mut pts = ev.radial_breaks(s);
    let l = ev.length_scale(s);
    pts.extend([32.0 * l, 64.0 * l]);
    let cfg = QuadConfig::new(1e-300, 1e-10).with_max_intervals(4000);
    let q = integrate_to_infinity(integrand, &pts, &cfg)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(q.value)
}

/// Largest tail mass tolerated at the spatial edge of a kernel table.
pub const TABLE_TAIL_TOL: f64 = 1e-4;

/// `G` sampled on a space-time lattice in `d = 1`, `α = 2`.
///
/// Row `i` (1-based) holds `G_{t_i}(j dx)` for `j = 0..=nx`; negative
/// offsets follow by symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    params: ModelParams,
    dt: f64,
    dx: f64,
    nx: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    mass_row: Vec<f64>,
    l2_row: Vec<f64>,
    tail_row: Vec<f64>,
}

impl KernelTable {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Time of row `i` (1-based).
    pub fn time(&self, i: usize) -> f64 {
        self.times[i - 1]
    }

    /// `G_{t_i}(j dx)`; panics outside `1 ≤ i ≤ nt`, `|j| ≤ nx`.
    pub fn value(&self, i: usize, j: isize) -> f64 {
        let j = j.unsigned_abs();
        assert!(i >= 1 && i <= self.times.len() && j <= self.nx, "table index out of range");
        self.values[(i - 1) * (self.nx + 1) + j]
    }

    /// Offsets `0..=nx` of row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.nx + 1;
        &self.values[(i - 1) * w..i * w]
    }

    /// `∫ G_{t_i}` by Richardson trapezoid on the row plus the exact tail.
    pub fn mass_row(&self) -> &[f64] {
        &self.mass_row
    }

    /// `∫ G_{t_i}²` by Richardson trapezoid on the row.
    pub fn l2_row(&self) -> &[f64] {
        &self.l2_row
    }

    /// `P(|X(E_{t_i})| > nx dx)`.
    pub fn tail_row(&self) -> &[f64] {
        &self.tail_row
    }
}

/// Tabulate `G` at `t_i = i dt`, `i = 1..=nt`, offsets `|j| ≤ nx`.
pub fn build_kernel_table(p: &ModelParams, dt: f64, dx: f64, nt: usize, nx: usize) -> Result<KernelTable> {
    if !(dt > 0.0) || nt == 0 {
        return Err(domain(format!("kernel table needs dt > 0 and nt >= 1, got ({dt}, {nt})")));
    }
    let times: Vec<f64> = (1..=nt).map(|i| i as f64 * dt).collect();
    build_kernel_rows(p, dt, dx, nx, &times)
}

/// As [`build_kernel_table`] at arbitrary positive row times.
pub fn build_kernel_rows(p: &ModelParams, dt: f64, dx: f64, nx: usize, times: &[f64]) -> Result<KernelTable> {
    if p.d != 1 {
        return Err(domain(format!("kernel tables are one dimensional, got d = {}", p.d)));
    }
    if p.alpha != 2.0 {
        return Err(Error::Unsupported(format!(
            "kernel tables are implemented for alpha = 2, got {}",
            p.alpha
        )));
    }
    p.check_simulation()?;
    if !(dx > 0.0) || nx < 2 {
        return Err(domain(format!("kernel table needs dx > 0 and nx >= 2, got ({dx}, {nx})")));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(domain("kernel table times must be positive"));
    }
    let ev = GreenEvaluator::new(p)?;
    let edge = nx as f64 * dx;
    let mut values = Vec::with_capacity(times.len() * (nx + 1));
    let mut mass_row = Vec::with_capacity(times.len());
    let mut l2_row = Vec::with_capacity(times.len());
    let mut tail_row = Vec::with_capacity(times.len());
    for &t in times {
        let start = values.len();
        for j in 0..=nx {
            values.push(ev.eval_radial(t, j as f64 * dx)?);
        }
        let row = &values[start..];
        let tail = ev.tail_mass(t, edge)?;
        if tail > TABLE_TAIL_TOL {
            return Err(Error::Truncation(format!(
                "kernel tail mass {tail:.3e} beyond |x| = {edge} at t = {t} exceeds {TABLE_TAIL_TOL:.0e}; widen the domain"
            )));
        }
        let sq: Vec<f64> = row.iter().map(|g| g * g).collect();
        mass_row.push(even_trapezoid_richardson(row, dx) + tail);
        l2_row.push(even_trapezoid_richardson(&sq, dx));
        tail_row.push(tail);
    }
    Ok(KernelTable {
        params: *p,
        dt,
        dx,
        nx,
        times: times.to_vec(),
        values,
        mass_row,
        l2_row,
        tail_row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn evaluator_resolves_orders_near_one() {
        for beta in [0.93, 0.97, 0.99] {
            let p = ModelParams::new(beta, 2.0, 1.0, 1).unwrap();
            let ev = GreenEvaluator::new(&p).unwrap();
            let want = green_kernel(&p, 1.0, &[0.5]).unwrap();
            assert!(rel(ev.eval(1.0, &[0.5]).unwrap(), want) < 1e-10, "{beta}");
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 2.0, 1.0, 1).is_err());
        assert!(ModelParams::new(0.5, 2.5, 1.0, 1).is_err());
        assert!(ModelParams::new(0.5, 2.0, -1.0, 1).is_err());
        assert!(ModelParams::new(0.5, 2.0, 1.0, 0).is_err());
        let p = ModelParams::new(0.5, 1.0, 1.0, 2).unwrap();
        assert!(p.check_l2().is_err());
        let p = ModelParams::new(1.0, 2.0, 1.0, 2).unwrap();
        assert!(p.check_simulation().is_err());
        let p = ModelParams::new(0.5, 2.0, 1.0, 3).unwrap();
        assert!(p.check_simulation().is_ok());
    }

    #[test]
    fn closed_form_densities() {
        let g = ModelParams::new(1.0, 2.0, 1.0, 1).unwrap();
        assert!(rel(stable_pdf(&g, 1.0, &[0.0]).unwrap(), (4.0 * PI).powf(-0.5)) < 1e-15);
        let c = ModelParams::new(1.0, 1.0, 1.0, 1).unwrap();
        assert!(rel(stable_pdf(&c, 1.0, &[0.0]).unwrap(), 1.0 / PI) < 1e-14);
        assert!(stable_pdf(&g, 0.0, &[0.0]).is_err());
        assert!(stable_pdf(&g, 1.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn numeric_inversion_matches_closed_forms() {
        for d in 1..=3u32 {
            for rho in [0.0, 0.3, 1.7, 6.0] {
                let gauss = (4.0 * PI).powf(-0.5 * d as f64) * (-rho * rho / 4.0).exp();
                let v = standard_radial_density(1.999_999_999, d, rho).unwrap();
                assert!((v - gauss).abs() < 1e-8 * gauss.max(1e-3), "d={d} rho={rho}");
                let cd = (ln_gamma(0.5 * (d as f64 + 1.0)) - 0.5 * (d as f64 + 1.0) * PI.ln()).exp();
                let cauchy = cd / (1.0 + rho * rho).powf(0.5 * (d as f64 + 1.0));
                let v = standard_radial_density(1.0, d, rho).unwrap();
                assert!(rel(v, cauchy) < 1e-8, "d={d} rho={rho}: {v} vs {cauchy}");
            }
        }
    }

    #[test]
    fn stable_series_match_numeric() {
        for rho in [0.2, 1.0, 3.0, 12.0, 40.0] {
            let num = {
                let xi_max = 45f64.powf(1.0 / 1.5);
                let mut pts: Vec<f64> = (0..=2000).map(|k| xi_max * k as f64 / 2000.0).collect();
                pts.dedup();
                let cfg = QuadConfig::new(1e-18, 1e-13).with_max_intervals(20_000);
                integrate_breaks(|xi| (xi * rho).cos() * (-xi.powf(1.5)).exp(), &pts, &cfg)
                    .unwrap()
                    .value
                    / PI
            };
            let v = standard_radial_density(1.5, 1, rho).unwrap();
            assert!((v - num).abs() < 1e-10 * num.abs() + 1e-16, "rho={rho}: {v} vs {num}");
        }
    }

    #[test]
    fn subordination_reduces_to_gaussian() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 1).unwrap();
        let g = green_kernel(&p, 1.0, &[0.0]).unwrap();
        assert!(rel(g, 0.282_094_791_773_878_1) < 1e-14);
    }

    #[test]
    fn evaluator_matches_adaptive() {
        for (beta, alpha) in [(0.5, 2.0), (0.75, 2.0), (0.3, 2.0), (0.9, 2.0), (0.5, 1.5)] {
            let p = ModelParams::new(beta, alpha, 1.0, 1).unwrap();
            let ev = GreenEvaluator::new(&p).unwrap();
            for t in [0.1, 1.0, 3.0] {
                for x in [0.0, 0.2, 1.0, 3.0, 7.0] {
                    let a = green_kernel(&p, t, &[x]).unwrap();
                    let b = ev.eval(t, &[x]).unwrap();
                    assert!((b - a).abs() < 1e-8 * a + 1e-15, "beta={beta} alpha={alpha} t={t} x={x}: {b} vs {a}");
                }
            }
        }
    }

    #[test]
    fn spectral_matches_subordination() {
        for (beta, alpha) in [(1.0, 2.0), (0.5, 2.0), (0.75, 2.0), (0.5, 1.5)] {
            let p = ModelParams::new(beta, alpha, 1.0, 1).unwrap();
            let ev = GreenEvaluator::new(&p).unwrap();
            for t in [0.3, 1.0, 2.5] {
                for x in [0.0, 0.05, 0.7, 2.0] {
                    let a = green_kernel_spectral(&p, t, x).unwrap();
                    let b = ev.eval(t, &[x]).unwrap();
                    assert!(rel(a, b) < 1e-6, "beta={beta} alpha={alpha} t={t} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn power_cosine_tail_against_quadrature() {
        for (m, h, y) in [(2.0, 10.0, 30.0), (1.5, 100.0, 3.0), (4.0, 5.0, 100.0)] {
            let cfg = QuadConfig::new(1e-18, 1e-12).with_max_intervals(50_000);
            let period = PI / y;
            let pts: Vec<f64> = (0..20_000).map(|k| h + k as f64 * period).collect();
            let body = integrate_breaks(|e: f64| (e * y).cos() * e.powf(-m), &pts, &cfg).unwrap().value;
            let rest = power_cosine_tail(m, *pts.last().unwrap(), y);
            let want = body + rest;
            let got = power_cosine_tail(m, h, y);
            assert!((got - want).abs() < 1e-12 * h.powf(-m) / y, "{m} {h} {y}: {got} vs {want}");
        }
        assert!((power_cosine_tail(2.0, 4.0, 0.0) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn c_star_reference_values() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 1).unwrap();
        assert!(rel(c_star(&p).unwrap(), (8.0 * PI).powf(-0.5)) < 1e-13);
        let p4 = ModelParams::new(1.0, 2.0, 4.0, 1).unwrap();
        assert!(rel(c_star(&p4).unwrap(), (32.0 * PI).powf(-0.5)) < 1e-13);
        let bad = ModelParams::new(0.5, 0.5, 1.0, 1).unwrap();
        assert!(matches!(c_star(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn c_star_integral_for_half_order() {
        // E_{1/2}(-z) = e^{z²} erfc(z): independent check of the z-integral
        let p = ModelParams::new(0.5, 2.0, 1.0, 1).unwrap();
        let cfg = QuadConfig::new(1e-16, 1e-12);
        let oracle = integrate_to_infinity(
            |w: f64| {
                let z = w * w;
                let e = if z < 25.0 {
                    (z * z).exp() * libm::erfc(z)
                } else {
                    // e^{z²}erfc(z) asymptotics
                    (1.0 - 0.5 / (z * z) + 0.75 / z.powi(4) - 1.875 / z.powi(6)) / (z * PI.sqrt())
                };
                2.0 * e * e
            },
            &[0.0, 1.0, 3.0, 5.0],
            &cfg,
        )
        .unwrap()
        .value;
        let got = c_star_z_integral(&p).unwrap();
        assert!(rel(got, oracle) < 1e-9, "{got} vs {oracle}");
        let (lo, hi) = c_star_z_integral_bounds(&p).unwrap();
        assert!(lo <= got && got <= hi);
    }

    #[test]
    fn l2_norm_gaussian() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 1).unwrap();
        for t in [1.0, 4.0] {
            let v = green_l2_norm(&p, t).unwrap();
            assert!(rel(v, (8.0 * PI * t).powf(-0.5)) < 1e-9);
        }
    }

    #[test]
    fn l2_norm_matches_c_star() {
        for (beta, alpha, d) in [(0.5, 2.0, 1), (0.75, 2.0, 1), (0.5, 1.5, 1), (0.6, 2.0, 2)] {
            let p = ModelParams::new(beta, alpha, 1.3, d).unwrap();
            let c = c_star(&p).unwrap();
            for t in [0.5, 2.0] {
                let v = green_l2_norm(&p, t).unwrap();
                assert!(rel(v, c * t.powf(-p.theta())) < 1e-6, "{beta} {alpha} {d} {t}");
            }
        }
    }

    #[test]
    fn exp_moment_two_ways() {
        let p = ModelParams::new(0.5, 2.0, 1.0, 1).unwrap();
        let e = green_exp_moment(&p, &[1.0], 1.0).unwrap();
        assert!(rel(e, core::f64::consts::E * (1.0 + libm::erf(1.0))) < 1e-11);
        let q = green_exp_moment_quadrature(&p, 1.0, 1.0).unwrap();
        assert!(rel(q, e) < 1e-7, "{q} vs {e}");
        assert_eq!(green_exp_moment(&p, &[0.0], 2.0).unwrap(), 1.0);
        let c = ModelParams::new(0.5, 1.0, 1.0, 1).unwrap();
        assert!(matches!(green_exp_moment(&c, &[1.0], 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn table_rows() {
        let g = ModelParams::new(1.0, 2.0, 1.0, 1).unwrap();
        let tab = build_kernel_table(&g, 0.05, 0.05, 8, 160).unwrap();
        for i in 1..=8 {
            let t = tab.time(i);
            for j in [-160isize, -3, 0, 7, 100] {
                let x = j as f64 * 0.05;
                let want = (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp();
                assert!((tab.value(i, j) - want).abs() < 1e-12);
            }
            assert!((tab.mass_row()[i - 1] - 1.0).abs() < 1e-10);
        }
        let frac = ModelParams::new(0.5, 2.0, 1.0, 1).unwrap();
        let tab = build_kernel_table(&frac, 1.0 / 64.0, 1.0 / 16.0, 64, 256).unwrap();
        let c = c_star(&frac).unwrap();
        for i in 1..=64 {
            assert!((tab.mass_row()[i - 1] - 1.0).abs() < 1e-4, "mass row {i}");
            let want = c * tab.time(i).powf(-0.25);
            assert!(rel(tab.l2_row()[i - 1], want) < 1e-3, "l2 row {i}");
        }
        assert!(matches!(
            build_kernel_table(&frac, 0.1, 0.01, 10, 20),
            Err(Error::Truncation(_))
        ));
        let c15 = ModelParams::new(0.5, 1.5, 1.0, 1).unwrap();
        assert!(matches!(build_kernel_table(&c15, 0.1, 0.1, 4, 20), Err(Error::Unsupported(_))));
    }
}
