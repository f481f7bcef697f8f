//! Closed-form rates, constants and thresholds.

use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

use super::{NonlinearitySpec, SigmaKind};
use crate::error::{domain, Error, Result};
use crate::kernel::{c_star, ModelParams};
use crate::renewal::{solve_renewal_with, Forcing, RenewalProblem, RenewalSolution};
use crate::special_fn::gamma_fn;

/// `[C* L_σ² Γ(1-θ)]^{1/(1-θ)}`, `θ = βd/α`: lower bound for the second
/// moment Lyapunov exponent.
pub fn lower_bound_rate(params: &ModelParams, l_sigma: f64) -> Result<f64> {
    params.check_l2()?;
    if !(l_sigma >= 0.0) || !l_sigma.is_finite() {
        return Err(domain(format!("L_sigma must be finite and nonnegative, got {l_sigma}")));
    }
    let theta = params.theta();
    if theta >= 1.0 {
        return Err(domain(format!("need beta d / alpha < 1, got {theta}")));
    }
    let cs = c_star(params)?;
    Ok((cs * l_sigma * l_sigma * gamma_fn(1.0 - theta)?).powf(1.0 / (1.0 - theta)))
}

/// Weighted Young constant
/// `sqrt(2^{β/2-1} / (√ν Γ(1-β/2) γ^{1-β/2}) · 1/(1 - ν c² γ^{-β}))`
/// for `N_{γ,c}(G ⊛ Φ) ≤ C N_{γ,c}(Φ)`.
pub fn weighted_young_constant(beta: f64, nu: f64, c: f64, gamma: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    if !(nu > 0.0) || !(gamma > 0.0) || !c.is_finite() {
        return Err(domain("need nu > 0, gamma > 0 and finite c"));
    }
    let ratio = nu * c * c * gamma.powf(-beta);
    if ratio >= 1.0 {
        return Err(Error::Divergence(format!(
            "geometric series diverges: gamma^beta = {} <= nu c^2 = {}",
            gamma.powf(beta),
            nu * c * c
        )));
    }
    let lead = 2f64.powf(0.5 * beta - 1.0) / (nu.sqrt() * gamma_fn(1.0 - 0.5 * beta)? * gamma.powf(1.0 - 0.5 * beta));
    Ok((lead / (1.0 - ratio)).sqrt())
}

/// `c0 = sqrt(2^{β/2+1/2-1/β} / (ν^{1/β} Γ(1-β/2)))`.
pub fn front_c0(beta: f64, nu: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    if !(nu > 0.0) {
        return Err(domain(format!("nu must be positive, got {nu}")));
    }
    let num = 2f64.powf(0.5 * beta + 0.5 - 1.0 / beta);
    Ok((num / (nu.powf(1.0 / beta) * gamma_fn(1.0 - 0.5 * beta)?)).sqrt())
}

/// Smallest admissible envelope decay: `c^{1/β-1/2} > Lip_σ c0`.
pub fn envelope_min_c(beta: f64, nu: f64, lip: f64) -> Result<f64> {
    let c0 = front_c0(beta, nu)?;
    Ok((lip * c0).powf(1.0 / (1.0 / beta - 0.5)))
}

/// Growth rate `(2νc²)^{1/β}` of the moment envelope.
pub fn envelope_rate(beta: f64, nu: f64, c: f64) -> f64 {
    (2.0 * nu * c * c).powf(1.0 / beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontBounds {
    /// `2^{1/β} (Lip_σ c0)^{4/(2-β)} / (Lip_σ c0)^{2β/(2-β)}`, as displayed.
    pub threshold: f64,
    pub c0: f64,
    /// Speed `(2νc²)^{1/β}/c` of the envelope at the smallest admissible `c`.
    pub envelope_threshold: f64,
    /// Whether the two thresholds agree to rounding.
    pub consistent: bool,
}

/// Upper-front threshold: `L(θ) < 0` for `θ` above it.
pub fn front_bounds(params: &ModelParams, sigma: &NonlinearitySpec) -> Result<FrontBounds> {
    if params.d != 1 || params.alpha != 2.0 {
        return Err(Error::Unsupported("front bounds are stated for d = 1, alpha = 2".into()));
    }
    let lip = sigma.lip_sigma;
    if !(lip >= 0.0) || !lip.is_finite() {
        return Err(domain(format!("Lip_sigma must be finite and nonnegative, got {lip}")));
    }
    let (b, nu) = (params.beta, params.nu);
    let c0 = front_c0(b, nu)?;
    let base = lip * c0;
    // the displayed exponents 4/(2-β) - 2β/(2-β) collapse to 2
    let threshold = 2f64.powf(1.0 / b) * base.powf((4.0 - 2.0 * b) / (2.0 - b));
    let c_min = envelope_min_c(b, nu, lip)?;
    let envelope_threshold = if c_min > 0.0 {
        envelope_rate(b, nu, c_min) / c_min
    } else {
        0.0
    };
    let consistent = (threshold - envelope_threshold).abs() <= 1e-12 * threshold.max(envelope_threshold);
    Ok(FrontBounds {
        threshold,
        c0,
        envelope_threshold,
        consistent,
    })
}

/// Exponent `[C* Γ(1-θ) Lip_σ² / (1-ε)]^{1/(1-θ)}` of the `L²(ℝ)` energy bound.
pub fn energy_bound_rate(params: &ModelParams, lip: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let theta = params.theta();
    params.check_l2()?;
    if theta >= 1.0 {
        return Err(domain(format!("need beta d / alpha < 1, got {theta}")));
    }
    let cs = c_star(params)?;
    Ok((cs * gamma_fn(1.0 - theta)? * lip * lip / (1.0 - epsilon)).powf(1.0 / (1.0 - theta)))
}

/// Refinement tolerance used for the second-moment oracle.
pub const MOMENT_ORACLE_TOL: f64 = 1e-5;

/// `E|u_t(x)|²` for `σ(u) = λu` and constant `u0`: the solution of
/// `f = u0² + C* λ² ∫_0^t f(s) (t-s)^{-θ} ds`.
pub fn second_moment_renewal(
    params: &ModelParams,
    sigma: &NonlinearitySpec,
    u0: &[f64],
    t_grid: &[f64],
) -> Result<RenewalSolution> {
    let lambda = match sigma.kind {
        SigmaKind::Linear { lambda } => lambda,
        SigmaKind::Sampled { .. } => {
            return Err(Error::Unsupported("the renewal oracle needs sigma(u) = lambda u".into()))
        }
    };
    let Some(&v) = u0.first() else {
        return Err(domain("u0 is empty"));
    };
    if u0.iter().any(|&x| x != v) {
        return Err(Error::Unsupported("the renewal oracle needs constant u0".into()));
    }
    params.check_l2()?;
    let cs = c_star(params)?;
    let p = RenewalProblem::new(Forcing::Constant(v * v), cs * lambda * lambda, params.theta(), t_grid.to_vec())?;
    solve_renewal_with(&p, MOMENT_ORACLE_TOL)
}
