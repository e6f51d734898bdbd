//! Synthetic generalized-LASSO data and its reference optimum.

use crate::engine::{AdmmProblem, AdmmState};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, Matrix, Vector};
use crate::norms::{custom_norm_sq, CustomNormParams};
use crate::problem::{soft_threshold, ConstraintSystem, Objective, Regularizer, SquaredLoss};
use crate::rng::GaussianStream;

#[derive(Debug, Clone)]
pub struct LassoDataset {
    pub points: Vec<SquaredLoss>,
    pub n: usize,
    pub mu_scale: f64,
    pub sigma_b: f64,
    pub seed: u64,
    pub planted: Vector,
    /// `XᵀX/N`, `Xᵀb/N` and `‖b‖²/N`, so the average loss costs `O(n²)`.
    gram: Matrix,
    xtb: Vector,
    bb: f64,
}

/// Number of heavy coordinates, `⌊n/5⌋`.
pub fn heavy_count(n: usize) -> usize {
    n / 5
}

/// Rows `a_i = √μ·a'_i/‖a'_i‖` with `a'_ij = 50z_ij` on the heavy block and
/// `z_ij` elsewhere; `b_i = ⟨a_i, x'⟩ + σ_b·noise` with `x'` equal to 3 on the
/// heavy block.
pub fn gen_lasso(n: usize, num_points: usize, mu_scale: f64, sigma_b: f64, seed: u64) -> Result<LassoDataset> {
    if n < 5 || num_points == 0 {
        return Err(Error::InvalidParameter(format!("need n ≥ 5 and N ≥ 1, got n = {n}, N = {num_points}")));
    }
    if !(mu_scale > 0.0) || !(sigma_b >= 0.0) {
        return Err(Error::InvalidParameter("μ must be positive and σ_b non-negative".into()));
    }
    let heavy = heavy_count(n);
    let mut rows = GaussianStream::substream(seed, u32::MAX as u64, 0);
    let mut noise = GaussianStream::substream(seed, u32::MAX as u64, 1);
    let planted = Vector((0..n).map(|j| if j < heavy { 3.0 } else { 0.0 }).collect());
    let scale = mu_scale.sqrt();
    let points: Vec<SquaredLoss> = (0..num_points)
        .map(|_| {
            let raw = Vector(
                (0..n)
                    .map(|j| {
                        let z = rows.standard_normal();
                        if j < heavy {
                            50.0 * z
                        } else {
                            z
                        }
                    })
                    .collect(),
            );
            let a = raw.scale(scale / raw.norm());
            let b = a.dot(&planted) + sigma_b * noise.standard_normal();
            SquaredLoss { a, b }
        })
        .collect();
    let nf = num_points as f64;
    let mut gram = Matrix::zeros(n, n);
    let mut xtb = Vector::zeros(n);
    let mut bb = 0.0;
    for p in &points {
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += p.a[i] * p.a[j] / nf;
            }
        }
        xtb = xtb.axpy(p.b / nf, &p.a);
        bb += p.b * p.b / nf;
    }
    Ok(LassoDataset { points, n, mu_scale, sigma_b, seed, planted, gram, xtb, bb })
}

impl LassoDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(1/N)Σ(⟨a_i, x⟩ − b_i)²`
    pub fn loss(&self) -> FullLoss<'_> {
        FullLoss { data: self }
    }

    /// Smoothness of the average loss, `2·λ_max(XᵀX/N)`.
    pub fn smoothness(&self) -> f64 {
        2.0 * operator_norm(&self.gram)
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn xtb(&self) -> &Vector {
        &self.xtb
    }

    /// The LASSO program as an ADMM problem: `x − y = 0`.
    pub fn admm_problem(&self, c1: f64, c2: f64, beta: f64, eta: f64) -> Result<AdmmProblem> {
        let n = self.n;
        let cs = ConstraintSystem::new(Matrix::identity(n), Matrix::identity(n).scale(-1.0), Vector::zeros(n))?;
        AdmmProblem::new(cs, Regularizer::ElasticNet { c1, c2 }, beta, eta)
    }
}

/// Average squared loss over the whole dataset.
pub struct FullLoss<'a> {
    data: &'a LassoDataset,
}

impl Objective for FullLoss<'_> {
    fn value(&self, x: &Vector) -> f64 {
        let d = self.data;
        x.dot(&d.gram.matvec(x)) - 2.0 * d.xtb.dot(x) + d.bb
    }
    fn gradient(&self, x: &Vector) -> Vector {
        let d = self.data;
        (&d.gram.matvec(x) - &d.xtb).scale(2.0)
    }
    fn smoothness(&self) -> f64 {
        self.data.smoothness()
    }
}

/// `𝔣(x) + c1‖x‖₁ + c2‖x‖²`
pub fn composite_objective(data: &LassoDataset, c1: f64, c2: f64, x: &Vector) -> f64 {
    data.loss().value(x) + Regularizer::ElasticNet { c1, c2 }.value(x)
}

#[derive(Debug, Clone)]
pub struct ReferenceOptimum {
    pub x: Vector,
    pub y: Vector,
    pub value: f64,
    pub admm_value: f64,
    pub prox_value: f64,
    pub admm_iterations: usize,
    pub prox_iterations: usize,
}

const REF_MAX_ITERS: usize = 50_000;
const REF_STEP_TOL: f64 = 1e-12;
const DISAGREE_TOL: f64 = 1e-4;

/// Noiseless ADMM with the full gradient, cross-checked against accelerated
/// proximal gradient with restarts; the lower objective wins.
pub fn reference_optimum(data: &LassoDataset, c1: f64, c2: f64) -> Result<ReferenceOptimum> {
    let n = data.n;
    let loss = data.loss();
    let nu = data.smoothness().max(1e-12);

    let beta = 1.0;
    let eta = 1.0 / nu;
    let problem = data.admm_problem(c1, c2, beta, eta)?;
    let norm = CustomNormParams { eta, beta, a: Matrix::identity(n) };
    let mut st = AdmmState::new(Vector::filled(n, 3.0), Vector::zeros(n));
    let mut admm_iterations = REF_MAX_ITERS;
    for k in 0..REF_MAX_ITERS {
        let next = problem.admm_iteration(&st, &loss)?;
        let step = custom_norm_sq(&(&next.x - &st.x), &(&next.lambda - &st.lambda), &norm).sqrt();
        st = next;
        if step < REF_STEP_TOL {
            admm_iterations = k + 1;
            break;
        }
    }
    let x_admm = st.x;
    let admm_value = composite_objective(data, c1, c2, &x_admm);

    let t = 1.0 / nu;
    let prox = |v: &Vector| Vector(v.iter().map(|&vi| soft_threshold(vi, t * c1) / (1.0 + 2.0 * t * c2)).collect());
    let mut x = Vector::filled(n, 3.0);
    let mut z = x.clone();
    let mut theta = 1.0f64;
    let mut fx = composite_objective(data, c1, c2, &x);
    let mut prox_iterations = REF_MAX_ITERS;
    for k in 0..REF_MAX_ITERS {
        let g = loss.gradient(&z);
        let next = prox(&z.axpy(-t, &g));
        let fnext = composite_objective(data, c1, c2, &next);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let step = (&next - &x).norm();
        if fnext > fx {
            // restart the momentum
            theta = 1.0;
            z = x.clone();
            continue;
        }
        z = next.axpy((theta - 1.0) / theta_next, &(&next - &x));
        x = next;
        fx = fnext;
        theta = theta_next;
        if step < REF_STEP_TOL * (1.0 + x.norm()) {
            prox_iterations = k + 1;
            break;
        }
    }
    let prox_value = fx;

    let scale = admm_value.abs().max(prox_value.abs()).max(1.0);
    if (admm_value - prox_value).abs() > DISAGREE_TOL * scale {
        return Err(Error::NotConverged(format!("ADMM {admm_value} vs proximal gradient {prox_value}")));
    }
    let (xs, value) = if admm_value <= prox_value { (x_admm, admm_value) } else { (x, prox_value) };
    Ok(ReferenceOptimum { y: xs.clone(), x: xs, value, admm_value, prox_value, admm_iterations, prox_iterations })
}
