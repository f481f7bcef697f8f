//! One-sided β-stable density `g_β` (Laplace transform `e^{-s^β}`), the
//! density of the inverse subordinator `E_t`, and its moments.
//!
//! `g_β(u)` comes from the convergent series in `u^{-β k - 1}` when the
//! terms do not cancel badly, and otherwise from Kanter's integral
//!
//! ```text
//! g_β(u) = β/(1-β) · u^{-1/(1-β)} · (1/π) ∫_0^π A(φ) exp(-u^{-β/(1-β)} A(φ)) dφ
//! A(φ)   = (sin βφ / sin φ)^{1/(1-β)} · sin((1-β)φ) / sin βφ
//! ```
//!
//! whose integrand is positive and bounded, so it is reliable near `u = 0`.

use alloc::format;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::quad::{integrate, QuadConfig};
use crate::special_fn::{gamma_fn, ln_gamma, mittag_leffler, MLParams};
use crate::stats::NeumaierSum;

/// Order and accuracy goal for subordinator densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatorParams {
    pub beta: f64,
    pub target_rel_err: f64,
}

impl SubordinatorParams {
    pub fn new(beta: f64, target_rel_err: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(domain(format!("subordinator order must lie in (0, 1), got {beta}")));
        }
        if !(target_rel_err > 0.0 && target_rel_err < 1.0) {
            return Err(domain(format!("target_rel_err must lie in (0, 1), got {target_rel_err}")));
        }
        Ok(Self { beta, target_rel_err })
    }

    pub fn with_default_tol(beta: f64) -> Result<Self> {
        Self::new(beta, 1e-10)
    }
}

/// `g_β(u)`, zero for `u ≤ 0`.
pub fn stable_density(p: &SubordinatorParams, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(domain(format!("stable_density requires finite u, got {u}")));
    }
    if u <= 0.0 {
        return Ok(0.0);
    }
    if let Some(v) = series(p.beta, u, p.target_rel_err) {
        return Ok(v);
    }
    kanter(p.beta, u, p.target_rel_err)
}

fn series(beta: f64, u: f64, tol: f64) -> Option<f64> {
    let lu = u.ln();
    let mut sum = NeumaierSum::default();
    let mut abs_sum = 0.0;
    for k in 1..400u32 {
        let kf = k as f64;
        let s = (PI * beta * kf).sin();
        let mag = (ln_gamma(beta * kf + 1.0) - ln_gamma(kf + 1.0) - (beta * kf + 1.0) * lu).exp();
        let term = if k % 2 == 1 { mag * s } else { -mag * s };
        sum.add(term);
        abs_sum += term.abs();
        if k > 4 && mag < 1e-18 * abs_sum {
            let v = sum.value() / PI;
            let err = 64.0 * f64::EPSILON * abs_sum / PI;
            return (v > 0.0 && err <= 0.1 * tol * v).then_some(v);
        }
        if !abs_sum.is_finite() {
            return None;
        }
    }
    None
}

fn kanter(beta: f64, u: f64, tol: f64) -> Result<f64> {
    let q = 1.0 / (1.0 - beta);
    let scale = u.powf(-beta * q);
    let integrand = |phi: f64| {
        let sb = (beta * phi).sin();
        let a = (sb / phi.sin()).powf(q) * ((1.0 - beta) * phi).sin() / sb;
        let v = a * (-scale * a).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let cfg = QuadConfig::new(1e-300, 0.05 * tol).with_max_intervals(4000);
    let r = integrate(integrand, 0.0, PI, &cfg)?;
    let pref = beta * q * u.powf(-q) / PI;
    let value = pref * r.value;
    let bound = pref * r.abs_err;
    // values near the underflow threshold carry no relative precision
    if value > 1e-280 && bound > tol * value {
        return Err(Error::Accuracy { estimate: value, bound });
    }
    Ok(value.max(0.0))
}

/// Density of `E_t` at `x`; zero for `x ≤ 0`.
pub fn inverse_subordinator_density(p: &SubordinatorParams, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("inverse_subordinator_density requires t > 0, got {t}")));
    }
    if !x.is_finite() {
        return Err(domain(format!("inverse_subordinator_density requires finite x, got {x}")));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let b = p.beta;
    let u = t * x.powf(-1.0 / b);
    if u == 0.0 {
        return Ok(0.0);
    }
    let g = stable_density(p, u)?;
    Ok(t / b * x.powf(-1.0 - 1.0 / b) * g)
}

/// Right limit `f_{E_t}(0⁺) = t^{-β}/Γ(1-β)`.
pub fn inverse_subordinator_density_at_zero(p: &SubordinatorParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("time must be positive, got {t}")));
    }
    Ok(t.powf(-p.beta) / gamma_fn(1.0 - p.beta)?)
}

/// `E[E_s^k] = Γ(1+k) s^{βk} / Γ(1+βk)` for real `k > -1`.
pub fn inverse_subordinator_moment(p: &SubordinatorParams, s: f64, k: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(domain(format!("moment requires s > 0, got {s}")));
    }
    if !(k > -1.0) {
        return Err(domain(format!("moment order must exceed -1, got {k}")));
    }
    Ok((ln_gamma(1.0 + k) - ln_gamma(1.0 + p.beta * k)).exp() * s.powf(p.beta * k))
}

/// `E[e^{w E_s}] = E_β(w s^β)`.
pub fn inverse_subordinator_mgf(p: &SubordinatorParams, w: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(domain(format!("mgf requires s > 0, got {s}")));
    }
    let ml = MLParams::new(p.beta, p.target_rel_err.min(1e-3))?;
    mittag_leffler(&ml, w * s.powf(p.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levy(u: f64) -> f64 {
        (2.0 * PI.sqrt()).recip() * u.powf(-1.5) * (-0.25 / u).exp()
    }

    #[test]
    fn half_order_matches_levy_law() {
        let p = SubordinatorParams::with_default_tol(0.5).unwrap();
        let mut u = 1e-3;
        while u < 1e4 {
            let got = stable_density(&p, u).unwrap();
            let want = levy(u);
            assert!((got - want).abs() <= 1e-9 * want + 1e-300, "u={u}: {got} vs {want}");
            u *= 1.3;
        }
        assert_eq!(stable_density(&p, -1.0).unwrap(), 0.0);
        assert_eq!(stable_density(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn series_and_integral_agree() {
        for beta in [0.2, 0.45, 0.7, 0.9] {
            for u in [0.8, 2.0, 10.0] {
                if let Some(s) = series(beta, u, 1e-10) {
                    let k = kanter(beta, u, 1e-11).unwrap();
                    assert!((s - k).abs() < 1e-9 * k, "beta={beta} u={u}: {s} vs {k}");
                }
            }
        }
    }

    #[test]
    fn inverse_density_half_order() {
        let p = SubordinatorParams::with_default_tol(0.5).unwrap();
        for x in [0.01, 0.5, 2.0, 5.0] {
            let want = (-x * x / 4.0).exp() / PI.sqrt();
            let got = inverse_subordinator_density(&p, 1.0, x).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "{x}");
        }
        let z = inverse_subordinator_density_at_zero(&p, 1.0).unwrap();
        assert!((z - 1.0 / PI.sqrt()).abs() < 1e-13);
        assert!(inverse_subordinator_density(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn moments_and_mgf() {
        let p = SubordinatorParams::with_default_tol(0.5).unwrap();
        assert!((inverse_subordinator_moment(&p, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let m1 = inverse_subordinator_moment(&p, 1.0, 1.0).unwrap();
        assert!((m1 - 2.0 / PI.sqrt()).abs() < 1e-13);
        let m4 = inverse_subordinator_moment(&p, 4.0, 1.0).unwrap();
        assert!((m4 - 2.0 * m1).abs() < 1e-13);
        assert!(inverse_subordinator_moment(&p, 1.0, -1.0).is_err());
        assert_eq!(inverse_subordinator_mgf(&p, 0.0, 3.0).unwrap(), 1.0);
        let v = inverse_subordinator_mgf(&p, -1.0, 1.0).unwrap();
        assert!((v - core::f64::consts::E * libm::erfc(1.0)).abs() < 1e-10);
    }
}
