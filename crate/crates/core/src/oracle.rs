//! Exact law of the noisy iteration on quadratic instances.
//!
//! With quadratic `f` and `g` every iteration is affine in `(x, λ)`, so from a
//! point mass the state stays Gaussian and its mean and covariance can be
//! carried forward exactly. Two scenarios that share losses and noise but
//! start apart have equal covariances, and their zCDP divergence is
//! `½ΔmᵀΣ⁺Δm`, infinite when `Δm` leaves the range of `Σ`.

use std::io::Write;

use serde::Serialize;

use crate::accountant::{amp_bound_general, amp_bound_sc};
use crate::engine::{AdmmProblem, AdmmState};
use crate::error::{Error, Result};
use crate::instances::{op_norm_a, random_instance, InstanceSpec, QuadraticInstance};
use crate::linalg::{pseudo_solve, Cholesky, Matrix, Vector, PSEUDO_TOL};
use crate::problem::{Objective, QuadraticLoss};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn point(state: &AdmmState) -> Self {
        let mean = state.stacked();
        let k = mean.len();
        GaussianBelief { mean, cov: Matrix::zeros(k, k) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `s ↦ M s + b`
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub m: Matrix,
    pub b: Vector,
}

impl AffineMap {
    pub fn apply(&self, v: &Vector) -> Vector {
        &self.m.matvec(v) + &self.b
    }
}

/// One iteration as an affine map on the stacked state `(x, λ)`.
pub fn iteration_as_affine(f: &QuadraticLoss, problem: &AdmmProblem) -> Result<AffineMap> {
    if problem.has_absorbed_constraints() {
        return Err(Error::Unsupported("affine form with absorbed constraints".into()));
    }
    let (n, m, l) = (problem.n(), problem.m(), problem.l());
    let (pg, qg) = problem.g.as_quadratic(l).ok_or(Error::NonQuadratic)?;
    let (beta, eta) = (problem.beta, problem.eta);
    let s = &problem.system;
    let k = n + m;

    // w = E s with E = [−βA | I]
    let e = s.a.scale(-beta).hstack(&Matrix::identity(m));
    let ky = Cholesky::new(&pg.add(&s.b.gram().scale(beta)).symmetrize())?;
    let bt = s.b.transpose();
    let y_map = ky.solve_matrix(&bt.matmul(&e));
    let y0 = ky.solve(&(&bt.matvec(&s.c).scale(beta) - &qg));

    let by = s.b.matmul(&y_map);
    let l_map = e.sub(&by.scale(beta));
    let l0 = &s.c.scale(beta) - &s.b.matvec(&y0).scale(beta);

    // x' = H⁻¹{x − η[Px + q + Aᵀ(β(By − c) − λ')]}
    let sel = Matrix::identity(n).hstack(&Matrix::zeros(n, m));
    let p_ext = f.p.hstack(&Matrix::zeros(n, m));
    let inner = by.scale(beta).sub(&l_map);
    let grad_part = p_ext.add(&s.a.transpose().matmul(&inner));
    let h = Cholesky::new(&Matrix::identity(n).add(&s.a.gram().scale(eta * beta)))?;
    let x_map = h.solve_matrix(&sel.sub(&grad_part.scale(eta)));
    let inner0 = &(&s.b.matvec(&y0).scale(beta) - &s.c.scale(beta)) - &l0;
    let x0 = h.solve(&(&f.q + &s.a.tr_matvec(&inner0)).scale(-eta));

    let mut mm = Matrix::zeros(k, k);
    for i in 0..n {
        for j in 0..k {
            mm[(i, j)] = x_map[(i, j)];
        }
    }
    for i in 0..m {
        for j in 0..k {
            mm[(n + i, j)] = l_map[(i, j)];
        }
    }
    Ok(AffineMap { m: mm, b: x0.concat(&l0) })
}

/// Pushes a belief through the map and adds `Normal(0, σ²I_n)` to the x-block.
pub fn propagate(belief: &GaussianBelief, map: &AffineMap, sigma: f64, n: usize) -> GaussianBelief {
    let mean = map.apply(&belief.mean);
    let mut cov = map.m.matmul(&belief.cov).matmul(&map.m.transpose()).symmetrize();
    for i in 0..n {
        cov[(i, i)] += sigma * sigma;
    }
    GaussianBelief { mean, cov }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn value(&self) -> f64 {
        match self {
            Divergence::Finite(v) => *v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Divergence::Infinite)
    }
}

const COV_TOL: f64 = 1e-8;

/// zCDP divergence between two equal-covariance Gaussians.
pub fn exact_zcdp(b1: &GaussianBelief, b2: &GaussianBelief) -> Result<Divergence> {
    let diff = b1.cov.sub(&b2.cov).max_abs();
    if diff > COV_TOL * (1.0 + b1.cov.max_abs()) {
        return Err(Error::CovarianceMismatch(diff));
    }
    let dm = &b1.mean - &b2.mean;
    if dm.norm() == 0.0 {
        return Ok(Divergence::Finite(0.0));
    }
    let sigma = b1.cov.add(&b2.cov).scale(0.5);
    match pseudo_solve(&sigma, &dm, PSEUDO_TOL) {
        Ok(v) => Ok(Divergence::Finite(0.5 * dm.dot(&v))),
        Err(Error::OutOfRange { .. }) => Ok(Divergence::Infinite),
        Err(e) => Err(e),
    }
}

/// Beliefs of both scenarios after `iterations` noisy steps.
pub fn propagate_pair(
    inst: &QuadraticInstance,
    sigma: f64,
    iterations: usize,
) -> Result<(GaussianBelief, GaussianBelief)> {
    let n = inst.n();
    let mut b1 = GaussianBelief::point(&inst.start);
    let mut b2 = GaussianBelief::point(&inst.start_prime);
    for t in 0..iterations {
        let f = &inst.losses[t % inst.losses.len()];
        let map = iteration_as_affine(f, &inst.problem)?;
        b1 = propagate(&b1, &map, sigma, n);
        b2 = propagate(&b2, &map, sigma, n);
    }
    Ok((b1, b2))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub exact: Divergence,
    /// Strongly convex bound when admissible, the general one otherwise.
    pub bound: f64,
    pub general_bound: Option<f64>,
    pub sc_bound: Option<f64>,
    pub ok: bool,
}

const SMOOTH_SLACK: f64 = 1e-9;

/// Runs `2·T_pairs` exact steps for both scenarios and compares the divergence
/// with every amplification bound whose hypotheses the instance meets.
pub fn verify_bound(inst: &QuadraticInstance, sigma: f64, t_pairs: u32) -> Result<VerifyOutcome> {
    if !inst.problem.is_standard_form() {
        return Err(Error::NotStandardForm);
    }
    if t_pairs == 0 {
        return Err(Error::InvalidParameter("T_pairs must be at least 1".into()));
    }
    let (b1, b2) = propagate_pair(inst, sigma, 2 * t_pairs as usize)?;
    let exact = exact_zcdp(&b1, &b2)?;
    let p = &inst.problem;
    let dist0 = (&inst.start.x - &inst.start_prime.x).norm();
    let op_a = op_norm_a(inst);
    let max_nu = inst.losses.iter().map(|f| f.smoothness()).fold(0.0, f64::max);
    let general_bound = if max_nu <= (1.0 + SMOOTH_SLACK) / p.eta {
        Some(amp_bound_general(sigma, t_pairs, dist0, p.beta, p.eta, op_a)?.amplified_dz)
    } else {
        None
    };
    let sc_bound = match &inst.sc {
        Some(sc) => amp_bound_sc(sigma, t_pairs, dist0, p.beta, p.eta, op_a, sc).ok().map(|r| r.amplified_dz),
        None => None,
    };
    let bound = sc_bound
        .or(general_bound)
        .ok_or_else(|| Error::InvalidParameter("no amplification bound applies to this instance".into()))?;
    let v = exact.value();
    let ok = [general_bound, sc_bound].iter().flatten().all(|b| v <= b * (1.0 + 1e-9));
    Ok(VerifyOutcome { exact, bound, general_bound, sc_bound, ok })
}

/// One row of a verification batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub t_pairs: u32,
    pub sigma: f64,
    pub exact: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Settings for [`verify_batch`]. Unset `sigma`/`t_pairs` cycle through
/// `{0.5, 1, 2}` and `1..=6`; odd instances are strongly convex.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyBatch {
    pub seed: u64,
    pub instances: usize,
    pub max_n: usize,
    pub max_m: usize,
    pub sigma: Option<f64>,
    pub t_pairs: Option<u32>,
}

impl Default for VerifyBatch {
    fn default() -> Self {
        VerifyBatch { seed: 42, instances: 100, max_n: 8, max_m: 4, sigma: None, t_pairs: None }
    }
}

pub fn verify_batch(cfg: &VerifyBatch) -> Result<Vec<VerifyRow>> {
    if cfg.t_pairs == Some(0) {
        return Err(Error::InvalidParameter("T_pairs must be at least 1".into()));
    }
    if cfg.max_n < 2 || cfg.max_m < 1 {
        return Err(Error::InvalidParameter("need max_n ≥ 2 and max_m ≥ 1".into()));
    }
    (0..cfg.instances)
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let spec =
                InstanceSpec { max_n: cfg.max_n, max_m: cfg.max_m, strongly_convex: i % 2 == 1, ..Default::default() };
            let inst = random_instance(seed, &spec)?;
            let sigma = cfg.sigma.unwrap_or([0.5, 1.0, 2.0][i % 3]);
            let t_pairs = cfg.t_pairs.unwrap_or(1 + (i % 6) as u32);
            let out = verify_bound(&inst, sigma, t_pairs)?;
            Ok(VerifyRow {
                seed,
                n: inst.n(),
                m: inst.m(),
                t_pairs,
                sigma,
                exact: out.exact.value(),
                bound: out.bound,
                ok: out.ok,
            })
        })
        .collect()
}

/// `seed,n,m,T_pairs,sigma,exact,bound,ok` with a seed comment line.
pub fn write_verify_csv<W: Write>(cfg: &VerifyBatch, rows: &[VerifyRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "# seed={} instances={} max_n={} max_m={} sigma={} t_pairs={}",
        cfg.seed,
        cfg.instances,
        cfg.max_n,
        cfg.max_m,
        cfg.sigma.map_or("cycle".into(), |s| s.to_string()),
        cfg.t_pairs.map_or("cycle".into(), |t| t.to_string()),
    )?;
    writeln!(out, "seed,n,m,T_pairs,sigma,exact,bound,ok")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{:e},{:e},{}", r.seed, r.n, r.m, r.t_pairs, r.sigma, r.exact, r.bound, r.ok)?;
    }
    Ok(())
}
