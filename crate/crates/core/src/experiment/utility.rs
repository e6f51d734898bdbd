//! Empirical check of the averaged-iterate convergence bound for the
//! gradient-oracle variant, plus the feasibility monotonicity it relies on.

use crate::engine::{AdmmProblem, NoiseTape, OracleState};
use crate::error::Result;
use crate::instances::spd_with_spectrum;
use crate::linalg::{operator_norm, solve_spd, Matrix, Vector};
use crate::problem::{ConstraintSystem, Objective, QuadraticLoss, Regularizer};
use crate::rng::{stream_id, GaussianStream};

use super::utility_bound_rhs;

/// A seeded configuration: `A = [I_m | D]`, `B = −I`, ridge `g`, a pool of
/// quadratic losses sampled uniformly each step, `η = 1/√T`.
pub struct UtilityConfig {
    pub seed: u64,
    pub problem: AdmmProblem,
    pub c2: f64,
    pub losses: Vec<QuadraticLoss>,
    pub rho: f64,
    pub iterations: usize,
    pub trials: usize,
    pub x0: Vector,
}

pub fn utility_config(seed: u64, iterations: usize, trials: usize) -> Result<UtilityConfig> {
    let mut s = GaussianStream::substream(seed, 0x0071, 0);
    let n = 2 + s.below(5) as usize;
    let m = 1 + s.below(n.min(3) as u64) as usize;
    let d = Matrix::from_row_major(m, n - m, (0..m * (n - m)).map(|_| 0.7 * s.standard_normal()).collect())?;
    let a = Matrix::identity(m).hstack(&d);
    let c = s.normal_vector(m);
    let cs = ConstraintSystem::new(a, Matrix::identity(m).scale(-1.0), c)?;
    let c2 = s.uniform_range(0.1, 1.0);
    let beta = s.uniform_range(0.5, 2.0);
    let eta = 1.0 / (iterations as f64).sqrt();
    let problem = AdmmProblem::new(cs, Regularizer::ElasticNet { c1: 0.0, c2 }, beta, eta)?;
    let pool = 3 + s.below(4) as usize;
    let losses = (0..pool)
        .map(|_| {
            let eigs: Vec<f64> = (0..n).map(|_| s.uniform_range(0.05, 1.0)).collect();
            QuadraticLoss::new(spd_with_spectrum(&mut s, &eigs), s.normal_vector(n))
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = s.uniform_range(0.1, 1.0);
    let x0 = s.normal_vector(n);
    Ok(UtilityConfig { seed, problem, c2, losses, rho, iterations, trials, x0 })
}

impl UtilityConfig {
    /// `𝔣 = mean of the pool`.
    pub fn mean_loss(&self) -> Result<QuadraticLoss> {
        let k = self.losses.len() as f64;
        let n = self.problem.n();
        let mut p = Matrix::zeros(n, n);
        let mut q = Vector::zeros(n);
        for f in &self.losses {
            p = p.add(&f.p.scale(1.0 / k));
            q = q.axpy(1.0 / k, &f.q);
        }
        QuadraticLoss::new(p, q)
    }

    /// Minimizer of `𝔣(x) + c2‖Ax − c‖²`, i.e. `y* = Ax* − c`.
    pub fn optimum(&self) -> Result<(Vector, Vector, f64)> {
        let f = self.mean_loss()?;
        let s = &self.problem.system;
        let lhs = f.p.add(&s.a.gram().scale(2.0 * self.c2));
        let rhs = &s.a.tr_matvec(&s.c).scale(2.0 * self.c2) - &f.q;
        let x = solve_spd(&lhs, &rhs)?;
        let y = &s.a.matvec(&x) - &s.c;
        let v = f.value(&x) + self.c2 * y.norm_sq();
        Ok((x, y, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityOutcome {
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub g_estimate: f64,
    /// Largest `‖Ax_{t+1}+By_{t+1}−c‖ − ‖Ax_{t+1}+By_t−c‖` seen.
    pub worst_monotonicity: f64,
    pub monotone: bool,
}

impl UtilityOutcome {
    pub fn within_bound(&self) -> bool {
        self.lhs <= self.rhs
    }
}

const MONO_TOL: f64 = 1e-9;

/// Runs the oracle variant from `(x0, y0 = 0, λ0 = 0)` for every trial and
/// compares the trial-averaged left-hand side with the bound, with `G` the
/// largest sampled gradient norm.
pub fn check_utility(cfg: &UtilityConfig) -> Result<UtilityOutcome> {
    let p = &cfg.problem;
    let s = &p.system;
    let f = cfg.mean_loss()?;
    let g = Regularizer::ElasticNet { c1: 0.0, c2: cfg.c2 };
    let (x_star, y_star, opt) = cfg.optimum()?;
    let (n, m) = (p.n(), p.m());
    let t_total = cfg.iterations;
    let mut lhs_sum = 0.0;
    let mut g_est: f64 = 0.0;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut monotone = true;

    for trial in 0..cfg.trials {
        let mut picks = GaussianStream::substream(cfg.seed, 0x0072, 2 * trial as u64);
        let mut tape = NoiseTape::new(cfg.seed, stream_id(0x0072, 2 * trial as u64 + 1));
        let mut st = OracleState { x: cfg.x0.clone(), y: Vector::zeros(m), lambda: Vector::zeros(m) };
        let mut sum_x_lo = Vector::zeros(n);
        let mut sum_x_hi = Vector::zeros(n);
        let mut sum_y = Vector::zeros(m);
        for _ in 0..t_total {
            sum_x_lo += &st.x;
            let fi = &cfg.losses[picks.below(cfg.losses.len() as u64) as usize];
            let prev_y = st.y.clone();
            let step = p.oracle_admm_iteration(&st, fi, cfg.rho, &mut tape)?;
            g_est = g_est.max(step.sampled_gradient.norm());
            st = step.state;
            let after = s.residual(&st.x, &st.y).norm();
            let before = s.residual(&st.x, &prev_y).norm();
            let excess = after - before;
            worst = worst.max(excess);
            if excess > MONO_TOL * (1.0 + before) {
                monotone = false;
            }
            sum_x_hi += &st.x;
            sum_y += &st.y;
        }
        let tf = t_total as f64;
        let xb = sum_x_lo.scale(1.0 / tf);
        let xb1 = sum_x_hi.scale(1.0 / tf);
        let yb = sum_y.scale(1.0 / tf);
        let feas = s.residual(&xb1, &yb).norm_sq();
        lhs_sum += f.value(&xb) + g.value(&yb) - opt + 0.5 * p.beta * feas;
    }
    let lhs = lhs_sum / cfg.trials as f64;
    let rhs = utility_bound_rhs(
        t_total,
        n,
        p.beta,
        operator_norm(&s.a),
        cfg.rho,
        g_est,
        (&cfg.x0 - &x_star).norm(),
        s.b.matvec(&y_star).norm(),
    );
    Ok(UtilityOutcome { seed: cfg.seed, lhs, rhs, g_estimate: g_est, worst_monotonicity: worst, monotone })
}
