//! Seeded random quadratic instances for property checks and the oracle.

use crate::accountant::ScParams;
use crate::engine::{AdmmProblem, AdmmState};
use crate::error::Result;
use crate::linalg::{operator_norm, symmetric_eigen, Matrix};
use crate::norms::eta_interval;
use crate::problem::{op_norm_atb, ConstraintSystem, QuadraticLoss, Regularizer};
use crate::rng::GaussianStream;

/// Size limits and structural switches for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub max_n: usize,
    pub max_m: usize,
    pub max_l: usize,
    /// Number of losses to draw (one per iteration).
    pub losses: usize,
    pub strongly_convex: bool,
    /// Use an elastic-net regularizer with `B = −I` (requires `l = m`).
    pub elastic_net: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec { max_n: 8, max_m: 4, max_l: 3, losses: 2, strongly_convex: false, elastic_net: false }
    }
}

pub struct QuadraticInstance {
    pub seed: u64,
    pub problem: AdmmProblem,
    pub losses: Vec<QuadraticLoss>,
    pub sc: Option<ScParams>,
    /// Declared `ν` of every loss.
    pub nu: f64,
    pub start: AdmmState,
    pub start_prime: AdmmState,
}

impl QuadraticInstance {
    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }
}

fn gaussian_matrix(s: &mut GaussianStream, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_row_major(r, c, (0..r * c).map(|_| scale * s.standard_normal()).collect()).unwrap()
}

/// Random orthogonal matrix from the eigenvectors of a random symmetric one.
pub fn random_orthogonal(s: &mut GaussianStream, n: usize) -> Matrix {
    let g = gaussian_matrix(s, n, n, 1.0);
    symmetric_eigen(&g.symmetrize()).vectors
}

/// `QᵀΛQ` with the given spectrum.
pub fn spd_with_spectrum(s: &mut GaussianStream, eigs: &[f64]) -> Matrix {
    let q = random_orthogonal(s, eigs.len());
    q.matmul(&Matrix::diag(eigs)).matmul(&q.transpose()).symmetrize()
}

fn int_in(s: &mut GaussianStream, lo: usize, hi: usize) -> usize {
    lo + s.below((hi - lo + 1) as u64) as usize
}

/// Losses `½xᵀPx + qᵀx` with spectrum of `P` inside `[lo, hi]`; the extreme
/// values are always present.
fn random_losses(s: &mut GaussianStream, n: usize, count: usize, lo: f64, hi: f64) -> Vec<QuadraticLoss> {
    (0..count)
        .map(|_| {
            let mut eigs: Vec<f64> = (0..n).map(|_| s.uniform_range(lo, hi)).collect();
            eigs[0] = hi;
            if n > 1 {
                eigs[n - 1] = lo;
            }
            let p = spd_with_spectrum(s, &eigs);
            QuadraticLoss::new(p, s.normal_vector(n)).unwrap()
        })
        .collect()
}

/// Random instance with `A = [I_m | D]`.
pub fn random_instance(seed: u64, spec: &InstanceSpec) -> Result<QuadraticInstance> {
    let mut s = GaussianStream::substream(seed, 0x1157, 0);
    let n = int_in(&mut s, 2, spec.max_n.max(2));
    let m = int_in(&mut s, 1, spec.max_m.min(n).max(1));
    let l = if spec.elastic_net { m } else { int_in(&mut s, 1, spec.max_l.max(1)) };
    let d = gaussian_matrix(&mut s, m, n - m, 0.7);
    let a = Matrix::identity(m).hstack(&d);
    let (b, g) = if spec.elastic_net {
        let c1 = s.uniform_range(0.0, 0.5);
        let c2 = s.uniform_range(if spec.strongly_convex { 0.05 } else { 0.0 }, 0.5);
        (Matrix::identity(m).scale(-1.0), Regularizer::ElasticNet { c1, c2 })
    } else {
        let b = gaussian_matrix(&mut s, m, l, 1.0);
        let lo = s.uniform_range(0.05, 0.5);
        let mut eigs: Vec<f64> = (0..l).map(|_| s.uniform_range(lo, 2.0)).collect();
        eigs[0] = lo;
        let p = spd_with_spectrum(&mut s, &eigs);
        (b, Regularizer::Quadratic { p, q: s.normal_vector(l) })
    };
    let c = s.normal_vector(m);
    let cs = ConstraintSystem::new(a, b, c)?;
    let beta = s.uniform_range(0.3, 2.0);

    let (eta, losses, sc, nu) = if spec.strongly_convex {
        let mu = s.uniform_range(0.1, 1.0);
        let nu = mu * s.uniform_range(1.0, 2.5);
        let mu_g = match &g {
            Regularizer::ElasticNet { c2, .. } => 2.0 * c2,
            Regularizer::Quadratic { p, .. } => symmetric_eigen(p).values.iter().cloned().fold(f64::INFINITY, f64::min),
            Regularizer::Custom { mu_g, .. } => *mu_g,
        };
        let op_ab = op_norm_atb(&cs);
        let (lo, hi) = eta_interval(nu, mu, mu_g, beta, op_ab)?;
        let eta = lo + (hi - lo) * s.uniform_range(0.02, 0.98);
        let losses = random_losses(&mut s, n, spec.losses, mu, nu);
        (eta, losses, Some(ScParams { nu, mu, mu_g, op_norm_ab: op_ab }), nu)
    } else {
        let eta = s.uniform_range(0.1, 2.0);
        let nu = s.uniform_range(0.0, 1.0) / eta;
        let losses = random_losses(&mut s, n, spec.losses, 0.0, nu);
        (eta, losses, None, nu)
    };
    let problem = AdmmProblem::new(cs, g, beta, eta)?;
    let lambda = s.normal_vector(m);
    let start = AdmmState::new(s.normal_vector(n), lambda.clone());
    let start_prime = AdmmState::new(s.normal_vector(n), lambda);
    Ok(QuadraticInstance { seed, problem, losses, sc, nu, start, start_prime })
}

/// `‖A‖` of the instance constraint matrix.
pub fn op_norm_a(inst: &QuadraticInstance) -> f64 {
    operator_norm(&inst.problem.system.a)
}
