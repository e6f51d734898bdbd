//! Closed-form divergence and amplification bounds.
//!
//! `T_pairs` counts two-iteration Markov steps; every report also states the
//! number of underlying noisy iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::norms::contraction_factor;

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::ZeroSigma);
    }
    Ok(())
}

/// zCDP divergence between `N(x, σ²I)` and `N(x2, σ²I)`.
pub fn zcdp_gaussian(x: &Vector, x2: &Vector, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok((x - x2).norm_sq() / (2.0 * sigma * sigma))
}

/// Rényi divergence of order α between equal-variance Gaussians.
pub fn renyi_gaussian(x: &Vector, x2: &Vector, sigma: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(alpha * zcdp_gaussian(x, x2, sigma)?)
}

const NEAR_ONE: f64 = 1e-6;

/// `(L^{-1/2} − L^{1/2}) / (L^{-T/2} − L^{T/2})`, equal to `1/T` at `L = 1`.
pub fn phi(t: u32, l: f64) -> f64 {
    assert!(t >= 1 && l > 0.0 && l <= 1.0, "phi needs T ≥ 1 and 0 < L ≤ 1");
    let tf = t as f64;
    if t == 1 {
        return 1.0;
    }
    // with a = −ln(L)/2 the ratio is sinh(a)/sinh(Ta)
    let a = -0.5 * l.ln();
    if (1.0 - l).abs() < NEAR_ONE {
        return (1.0 - (tf * tf - 1.0) * a * a / 6.0) / tf;
    }
    phi_direct(tf, a)
}

fn phi_direct(tf: f64, a: f64) -> f64 {
    a.sinh() / (tf * a).sinh()
}

fn lambda_direct(tf: f64, l: f64) -> f64 {
    let u = l.ln();
    u.exp_m1() / (tf * u).exp_m1()
}

/// `(1 − L)/(1 − L^T)`, equal to `1/T` at `L = 1`.
pub fn lambda_mix(t: u32, l: f64) -> f64 {
    assert!(t >= 1 && l > 0.0 && l <= 1.0, "lambda_mix needs T ≥ 1 and 0 < L ≤ 1");
    let tf = t as f64;
    if t == 1 {
        return 1.0;
    }
    let e = 1.0 - l;
    if e.abs() < NEAR_ONE {
        return (1.0 + (tf - 1.0) * e / 2.0 + (tf * tf - 1.0) * e * e / 12.0) / tf;
    }
    lambda_direct(tf, l)
}

/// Recurrence form `(T−1)L^{T−2}φ_{T−1}²(1−λ_T)² + L^{2(T−1)}λ_T²`.
pub fn gamma(t: u32, l: f64) -> f64 {
    assert!(t >= 2, "gamma needs T ≥ 2");
    let tf = t as f64;
    let ph = phi(t - 1, l);
    let lm = lambda_mix(t, l);
    (tf - 1.0) * l.powi(t as i32 - 2) * ph * ph * (1.0 - lm) * (1.0 - lm) + l.powi(2 * (t as i32 - 1)) * lm * lm
}

/// Closed form `T·L^{T−1}·φ_T(L)²`.
pub fn gamma_closed(t: u32, l: f64) -> f64 {
    let ph = phi(t, l);
    t as f64 * l.powi(t as i32 - 1) * ph * ph
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBoundReport {
    pub kind: String,
    pub local_dz: f64,
    pub amplified_dz: f64,
    /// Same bound via `T·L^{T−1}·φ_T(L)²`.
    pub amplified_dz_phi_form: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_K")]
    pub c_k: f64,
    pub t_pairs: u32,
    pub total_iterations: u32,
    pub sigma: f64,
    pub delta: Option<f64>,
    pub dist0: Option<f64>,
    pub eta: f64,
    pub beta: f64,
    pub op_norm_a: f64,
    pub contraction: Option<f64>,
    pub kappa: Option<f64>,
}

fn check_pairs(t_pairs: u32) -> Result<()> {
    if t_pairs == 0 {
        return Err(Error::InvalidParameter("T_pairs must be at least 1".into()));
    }
    Ok(())
}

/// `max{2, 3/(βη)}·(1 + βη‖A‖²)`
pub fn general_constant(beta: f64, eta: f64, op_a: f64) -> f64 {
    (2.0f64).max(3.0 / (beta * eta)) * (1.0 + beta * eta * op_a * op_a)
}

/// Bound after `2·T_pairs` noisy iterations from starts at distance `dist0`.
pub fn amp_bound_general(
    sigma: f64,
    t_pairs: u32,
    dist0: f64,
    beta: f64,
    eta: f64,
    op_a: f64,
) -> Result<PrivacyBoundReport> {
    check_sigma(sigma)?;
    check_pairs(t_pairs)?;
    let c = general_constant(beta, eta, op_a);
    let base = c * dist0 * dist0 / (2.0 * sigma * sigma);
    let t = t_pairs as f64;
    let ph = phi(t_pairs, 1.0);
    Ok(PrivacyBoundReport {
        kind: "general".into(),
        local_dz: base,
        amplified_dz: base / t,
        amplified_dz_phi_form: base * t * ph * ph,
        c,
        c_k: (2.0f64).max(3.0 / (eta * beta)) / (2.0 * sigma * sigma),
        t_pairs,
        total_iterations: 2 * t_pairs,
        sigma,
        delta: None,
        dist0: Some(dist0),
        eta,
        beta,
        op_norm_a: op_a,
        contraction: None,
        kappa: None,
    })
}

/// First-user guarantee after `2·T_pairs + 1` iterations.
pub fn first_user_bound(
    sigma: f64,
    delta: f64,
    eta: f64,
    beta: f64,
    op_a: f64,
    t_pairs: u32,
) -> Result<PrivacyBoundReport> {
    check_sigma(sigma)?;
    check_pairs(t_pairs)?;
    let c = general_constant(beta, eta, op_a);
    let local = eta * eta * delta * delta / (2.0 * sigma * sigma);
    let t = t_pairs as f64;
    let ph = phi(t_pairs, 1.0);
    Ok(PrivacyBoundReport {
        kind: "first_user".into(),
        local_dz: local,
        amplified_dz: c / t * local,
        amplified_dz_phi_form: c * t * ph * ph * local,
        c,
        c_k: (2.0f64).max(3.0 / (eta * beta)) / (2.0 * sigma * sigma),
        t_pairs,
        total_iterations: 2 * t_pairs + 1,
        sigma,
        delta: Some(delta),
        dist0: None,
        eta,
        beta,
        op_norm_a: op_a,
        contraction: None,
        kappa: None,
    })
}

/// Strongly convex parameters shared by the SC bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScParams {
    pub nu: f64,
    pub mu: f64,
    pub mu_g: f64,
    pub op_norm_ab: f64,
}

struct ScConstants {
    c: f64,
    c_k: f64,
    factor: f64,
    kappa: f64,
}

fn sc_constants(sigma: f64, beta: f64, eta: f64, op_a: f64, sc: &ScParams) -> Result<ScConstants> {
    let rep = contraction_factor(sc.nu, sc.mu, sc.mu_g, beta, sc.op_norm_ab, eta)?;
    let k = rep.kappa;
    let head = (2.0 / k).max(3.0 / (eta * beta));
    Ok(ScConstants {
        c: head * (k + eta * beta * op_a * op_a),
        c_k: rep.factor * head / (2.0 * sigma * sigma),
        factor: rep.factor,
        kappa: k,
    })
}

/// `(C/2σ²)·(𝔏^{2T−1}/T)·dist0²`
pub fn amp_bound_sc(
    sigma: f64,
    t_pairs: u32,
    dist0: f64,
    beta: f64,
    eta: f64,
    op_a: f64,
    sc: &ScParams,
) -> Result<PrivacyBoundReport> {
    check_sigma(sigma)?;
    check_pairs(t_pairs)?;
    let k = sc_constants(sigma, beta, eta, op_a, sc)?;
    let t = t_pairs as f64;
    let decay = k.factor.powi(2 * t_pairs as i32 - 1);
    let base = k.c * dist0 * dist0 / (2.0 * sigma * sigma);
    let ph = phi(t_pairs, 1.0);
    Ok(PrivacyBoundReport {
        kind: "strongly_convex".into(),
        local_dz: base * k.factor,
        amplified_dz: base * decay / t,
        amplified_dz_phi_form: base * decay * t * ph * ph,
        c: k.c,
        c_k: k.c_k,
        t_pairs,
        total_iterations: 2 * t_pairs,
        sigma,
        delta: None,
        dist0: Some(dist0),
        eta,
        beta,
        op_norm_a: op_a,
        contraction: Some(k.factor),
        kappa: Some(k.kappa),
    })
}

/// First-user variant `(C·𝔏^{2T−1}/T)·η²Δ²/(2σ²)`.
pub fn first_user_bound_sc(
    sigma: f64,
    delta: f64,
    eta: f64,
    beta: f64,
    op_a: f64,
    t_pairs: u32,
    sc: &ScParams,
) -> Result<PrivacyBoundReport> {
    check_sigma(sigma)?;
    check_pairs(t_pairs)?;
    let k = sc_constants(sigma, beta, eta, op_a, sc)?;
    let t = t_pairs as f64;
    let local = eta * eta * delta * delta / (2.0 * sigma * sigma);
    let decay = k.factor.powi(2 * t_pairs as i32 - 1);
    let ph = phi(t_pairs, 1.0);
    Ok(PrivacyBoundReport {
        kind: "first_user_strongly_convex".into(),
        local_dz: local,
        amplified_dz: k.c * decay / t * local,
        amplified_dz_phi_form: k.c * decay * t * ph * ph * local,
        c: k.c,
        c_k: k.c_k,
        t_pairs,
        total_iterations: 2 * t_pairs + 1,
        sigma,
        delta: Some(delta),
        dist0: None,
        eta,
        beta,
        op_norm_a: op_a,
        contraction: Some(k.factor),
        kappa: Some(k.kappa),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AllUsersScheme {
    /// Users processed in a uniformly random order.
    Permutation { users: u32 },
    /// Stop after `T ~ Uniform{⌊N/2⌋+1, …, N}` iterations.
    RandomStopping { users: u32 },
}

impl AllUsersScheme {
    pub fn users(&self) -> u32 {
        match self {
            AllUsersScheme::Permutation { users } | AllUsersScheme::RandomStopping { users } => *users,
        }
    }
}

/// `E[1/L]` where `L` counts the iterations from a user's step to the end.
pub fn expected_inverse_l(scheme: AllUsersScheme, user: u32) -> Result<f64> {
    let n = scheme.users();
    if n == 0 || user == 0 || user > n {
        return Err(Error::InvalidParameter(format!("user {user} of {n}")));
    }
    Ok(match scheme {
        AllUsersScheme::Permutation { .. } => (1..=n).map(|l| 1.0 / l as f64).sum::<f64>() / n as f64,
        AllUsersScheme::RandomStopping { .. } => {
            let lo = n / 2 + 1;
            let count = (n - lo + 1) as f64;
            (lo..=n).filter(|&t| t >= user).map(|t| 1.0 / (t - user + 1) as f64).sum::<f64>() / count
        }
    })
}

/// Per-user Rényi-α guarantee `2αC·max_t E[1/L_t]`.
pub fn all_users_bound(alpha: f64, c_assumption: f64, scheme: AllUsersScheme) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    let limit = 1.0 / (alpha * (alpha - 1.0));
    if c_assumption > limit {
        return Err(Error::WeakConvexityPreconditionViolated { c: c_assumption, limit });
    }
    let mut worst: f64 = 0.0;
    for u in 1..=scheme.users() {
        worst = worst.max(expected_inverse_l(scheme, u)?);
    }
    Ok(2.0 * alpha * c_assumption * worst)
}
