//! Weighted primal/dual norms under which one ADMM iteration is
//! non-expansive, and the strong-convexity contraction factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct CustomNormParams {
    pub eta: f64,
    pub beta: f64,
    pub a: Matrix,
}

/// `‖x‖² + (η/β)‖λ − βAx‖²`
pub fn custom_norm_sq(x: &Vector, lambda: &Vector, p: &CustomNormParams) -> f64 {
    let w = lambda.axpy(-p.beta, &p.a.matvec(x));
    x.norm_sq() + p.eta / p.beta * w.norm_sq()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScNormParams {
    pub eta: f64,
    pub beta: f64,
    pub a: Matrix,
    pub nu: f64,
    pub mu: f64,
    pub kappa: f64,
}

/// `(1 − 2ηνμ/(ν+μ)) + (1/η)(2/(ν+μ) − η)`
pub fn kappa(eta: f64, nu: f64, mu: f64) -> f64 {
    (1.0 - 2.0 * eta * nu * mu / (nu + mu)) + (2.0 / (nu + mu) - eta) / eta
}

impl ScNormParams {
    pub fn new(eta: f64, beta: f64, a: Matrix, nu: f64, mu: f64) -> Result<Self> {
        let upper = 2.0 / (nu + mu);
        if !(eta > 0.0 && eta < upper) {
            return Err(Error::BadEta { eta, upper });
        }
        let k = kappa(eta, nu, mu);
        if k <= 0.0 {
            return Err(Error::BadEta { eta, upper });
        }
        Ok(ScNormParams { eta, beta, a, nu, mu, kappa: k })
    }
}

/// `κ‖x‖² + (η/β)‖λ − βAx‖²`
pub fn sc_norm_sq(x: &Vector, lambda: &Vector, p: &ScNormParams) -> f64 {
    let w = lambda.axpy(-p.beta, &p.a.matvec(x));
    p.kappa * x.norm_sq() + p.eta / p.beta * w.norm_sq()
}

/// Open interval of step sizes for which the strict contraction holds.
pub fn eta_interval(nu: f64, mu: f64, mu_g: f64, beta: f64, op_ab: f64) -> Result<(f64, f64)> {
    if !(nu >= mu && mu > 0.0 && mu_g > 0.0 && beta > 0.0 && op_ab > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need ν ≥ μ > 0, μ_g > 0, β > 0, ‖AᵀB‖ > 0 (got {nu}, {mu}, {mu_g}, {beta}, {op_ab})"
        )));
    }
    let s = nu + mu;
    let first = 4.0 / (s + (s * s + 8.0 * nu * mu).sqrt());
    let second = 2.0 / s - 2.0 * mu_g / (beta * beta * op_ab * op_ab);
    let low = first.max(second);
    let high = 2.0 / s;
    if low >= high {
        return Err(Error::EmptyInterval { low, high });
    }
    Ok((low, high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub factor: f64,
    pub kappa: f64,
    pub eta: f64,
    pub eta_low: f64,
    pub eta_high: f64,
    pub eta_mid: f64,
}

const INTERVAL_MARGIN: f64 = 1e-12;

pub fn contraction_factor(nu: f64, mu: f64, mu_g: f64, beta: f64, op_ab: f64, eta: f64) -> Result<ContractionReport> {
    let (low, high) = eta_interval(nu, mu, mu_g, beta, op_ab)?;
    if !(eta > low + INTERVAL_MARGIN && eta < high - INTERVAL_MARGIN) {
        return Err(Error::EtaOutsideInterval { eta, low, high });
    }
    let gap = 2.0 / (nu + mu) - eta;
    let r = kappa(eta, nu, mu);
    let s = eta / beta;
    let q = eta / beta + eta / 4.0 * gap;
    let p = 1.0 - gap / eta;
    let factor = (r / p).max(s / q);
    Ok(ContractionReport {
        p,
        q,
        r,
        s,
        factor,
        kappa: r,
        eta,
        eta_low: low,
        eta_high: high,
        eta_mid: 0.5 * (low + high),
    })
}

/// Report at the interval midpoint.
pub fn contraction_at_midpoint(nu: f64, mu: f64, mu_g: f64, beta: f64, op_ab: f64) -> Result<ContractionReport> {
    let (low, high) = eta_interval(nu, mu, mu_g, beta, op_ab)?;
    contraction_factor(nu, mu, mu_g, beta, op_ab, 0.5 * (low + high))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn custom_norm_basics() {
        let p = CustomNormParams { eta: 0.5, beta: 2.0, a: Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap() };
        assert_eq!(custom_norm_sq(&Vector::zeros(2), &Vector::zeros(1), &p), 0.0);
        let x = Vector(vec![0.3, -1.0]);
        let lam = p.a.matvec(&x).scale(p.beta);
        assert!((custom_norm_sq(&x, &lam, &p) - x.norm_sq()).abs() < 1e-15);
        let l2 = Vector(vec![0.7]);
        let v = custom_norm_sq(&x, &l2, &p);
        let v3 = custom_norm_sq(&x.scale(-3.0), &l2.scale(-3.0), &p);
        assert!((v3 - 9.0 * v).abs() < 1e-12 * v3);
    }

    #[test]
    fn sc_norm_degenerate_kappa() {
        let nu = 0.3;
        assert!(matches!(ScNormParams::new(1.0 / nu, 1.0, Matrix::identity(1), nu, nu), Err(Error::BadEta { .. })));
        let p = ScNormParams::new(2.0, 1.0, Matrix::identity(1), nu, nu).unwrap();
        assert_eq!(sc_norm_sq(&Vector::zeros(1), &Vector::zeros(1), &p), 0.0);
        let x = Vector(vec![2.0]);
        assert!((sc_norm_sq(&x, &x.scale(p.beta), &p) - 4.0 * p.kappa).abs() < 1e-14);
    }

    #[test]
    fn interval_rows() {
        let (lo, hi) = eta_interval(0.02, 0.02, 0.2, 0.15, 1.0).unwrap();
        assert!((lo - 36.603).abs() < 1e-3 && (hi - 50.0).abs() < 1e-12);
        assert!((0.5 * (lo + hi) - 43.30).abs() < 0.01);
        let (lo, hi) = eta_interval(0.045, 0.045, 0.2, 0.3, 1.0).unwrap();
        assert!((0.5 * (lo + hi) - 20.0).abs() < 1e-9);
        let (lo, _) = eta_interval(0.045, 0.045, 1e12, 0.3, 1.0).unwrap();
        let s = 0.09f64;
        assert!((lo - 4.0 / (s + (s * s + 8.0 * 0.045 * 0.045).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn factor_examples() {
        let r = contraction_factor(0.18, 0.18, 0.2, 0.5, 1.0, 4.81).unwrap();
        assert!((r.factor - 0.9147).abs() < 1e-3, "{}", r.factor);
        assert!((r.r / r.p - 0.342).abs() < 1e-3);
        let r = contraction_factor(0.045, 0.045, 0.2, 0.3, 1.0, 20.0).unwrap();
        assert!((r.factor - 0.857).abs() < 1e-3);
        let r = contraction_factor(0.02, 0.02, 0.2, 0.15, 1.0, 43.30).unwrap();
        assert!((r.factor - 0.799).abs() < 1e-3);
        assert!(matches!(contraction_factor(0.5, 0.5, 0.2, 0.9, 1.0, 1.95), Ok(ContractionReport { .. })));
        assert!(matches!(contraction_factor(0.18, 0.18, 0.2, 0.5, 1.0, 6.0), Err(Error::EtaOutsideInterval { .. })));
    }
}
