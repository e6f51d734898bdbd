//! ADMM iterations: the gradient-variant step, its noisy release, the
//! two-step operator K, the split mechanisms M1/M2, and the variant with a
//! noisy gradient oracle.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, Vector};
use crate::problem::{ConstraintSystem, Objective, Regularizer, StandardForm, YSolver};
use crate::rng::GaussianStream;

/// Primal/dual pair carried between iterations; `y` is recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Vector,
    pub lambda: Vector,
}

impl AdmmState {
    pub fn new(x: Vector, lambda: Vector) -> Self {
        AdmmState { x, lambda }
    }

    /// `(x, λ)` concatenated.
    pub fn stacked(&self) -> Vector {
        self.x.concat(&self.lambda)
    }

    pub fn from_stacked(v: &Vector, n: usize) -> Self {
        AdmmState { x: v.slice(0, n), lambda: v.slice(n, v.len()) }
    }
}

/// Everything one iteration computes.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationParts {
    pub y: Vector,
    pub lambda_next: Vector,
    pub x_next: Vector,
}

/// Constraint system, regularizer and step parameters, with the
/// factorization of `I + ηβAᵀA` and the `y`-minimizer prepared once.
#[derive(Clone)]
pub struct AdmmProblem {
    pub system: ConstraintSystem,
    pub g: Regularizer,
    pub beta: f64,
    pub eta: f64,
    h: Cholesky,
    y_solver: YSolver,
    standard: bool,
    absorbed: bool,
}

impl AdmmProblem {
    pub fn new(system: ConstraintSystem, g: Regularizer, beta: f64, eta: f64) -> Result<Self> {
        Self::build(system, g, beta, eta, None)
    }

    /// Uses the absorbed constraints `B̂y = ĉ` inside the `y`-minimizer.
    pub fn from_standard_form(sf: &StandardForm, g: Regularizer, beta: f64, eta: f64) -> Result<Self> {
        Self::build(sf.system.clone(), g, beta, eta, Some((&sf.b_hat, &sf.c_hat)))
    }

    fn build(
        system: ConstraintSystem,
        g: Regularizer,
        beta: f64,
        eta: f64,
        extra: Option<(&Matrix, &Vector)>,
    ) -> Result<Self> {
        if !(beta > 0.0 && eta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta}, eta = {eta}")));
        }
        let n = system.n();
        let h = Matrix::identity(n).add(&system.a.gram().scale(eta * beta));
        let h = Cholesky::new(&h)?;
        let y_solver = YSolver::new(&g, &system.b, &system.c, beta, extra)?;
        let standard = system.a.has_identity_prefix();
        let absorbed = extra.is_some_and(|(bh, _)| bh.rows() > 0);
        Ok(AdmmProblem { system, g, beta, eta, h, y_solver, standard, absorbed })
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    pub fn l(&self) -> usize {
        self.system.l()
    }

    pub fn is_standard_form(&self) -> bool {
        self.standard
    }

    /// True when the `y`-minimizer enforces absorbed constraints `B̂y = ĉ`.
    pub fn has_absorbed_constraints(&self) -> bool {
        self.absorbed
    }

    /// `D` in `A = [I | D]`.
    pub fn d_block(&self) -> Result<Matrix> {
        if !self.standard {
            return Err(Error::NotStandardForm);
        }
        Ok(self.system.a.col_block(self.m(), self.n()))
    }

    /// `𝒢(w)`
    pub fn y_of_w(&self, w: &Vector) -> Result<Vector> {
        self.y_solver.solve(w)
    }

    /// `λ − βAx`
    pub fn w_of(&self, x: &Vector, lambda: &Vector) -> Vector {
        lambda.axpy(-self.beta, &self.system.a.matvec(x))
    }

    /// `𝒢(λ − βAx)`
    pub fn y_of(&self, x: &Vector, lambda: &Vector) -> Result<Vector> {
        self.y_of_w(&self.w_of(x, lambda))
    }

    /// `(I + ηβAᵀA)v`
    pub fn h_apply(&self, v: &Vector) -> Vector {
        let a = &self.system.a;
        v.axpy(self.eta * self.beta, &a.tr_matvec(&a.matvec(v)))
    }

    /// Closed-form minimizer of the linearized x-subproblem:
    /// `(I + ηβAᵀA)⁻¹{x − η[grad + Aᵀ(β(By − c) − λ)]}`.
    pub fn x_update(&self, x: &Vector, grad: &Vector, y: &Vector, lambda: &Vector) -> Vector {
        let s = &self.system;
        let by_c = &s.b.matvec(y) - &s.c;
        let inner = by_c.scale(self.beta);
        let inner = &inner - lambda;
        let mut dir = s.a.tr_matvec(&inner);
        dir += grad;
        self.h.solve(&x.axpy(-self.eta, &dir))
    }

    /// `λ − β(Ax + By − c)`
    pub fn lambda_update(&self, x: &Vector, y: &Vector, lambda: &Vector) -> Vector {
        lambda.axpy(-self.beta, &self.system.residual(x, y))
    }

    fn check_dims(&self, state: &AdmmState) -> Result<()> {
        if state.x.len() != self.n() || state.lambda.len() != self.m() {
            return Err(Error::Dimension(format!(
                "state ({}, {}) vs problem ({}, {})",
                state.x.len(),
                state.lambda.len(),
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }

    /// One iteration, order `y`, `λ`, `x`.
    pub fn step(&self, state: &AdmmState, f: &dyn Objective) -> Result<IterationParts> {
        self.check_dims(state)?;
        let y = self.y_of(&state.x, &state.lambda)?;
        let lambda_next = self.lambda_update(&state.x, &y, &state.lambda);
        let grad = f.gradient(&state.x);
        let x_next = self.x_update(&state.x, &grad, &y, &lambda_next);
        Ok(IterationParts { y, lambda_next, x_next })
    }

    pub fn admm_iteration(&self, state: &AdmmState, f: &dyn Objective) -> Result<AdmmState> {
        let p = self.step(state, f)?;
        Ok(AdmmState { x: p.x_next, lambda: p.lambda_next })
    }

    /// `admm_iteration` followed by `x ← x + N`, `N ~ Normal(0, σ²I)`.
    pub fn noisy_iteration(
        &self,
        state: &AdmmState,
        f: &dyn Objective,
        sigma: f64,
        tape: &mut NoiseTape,
    ) -> Result<AdmmState> {
        Ok(self.noisy_step(state, f, sigma, tape)?.0)
    }

    /// Noisy iteration also returning its parts and the noise vector.
    pub fn noisy_step(
        &self,
        state: &AdmmState,
        f: &dyn Objective,
        sigma: f64,
        tape: &mut NoiseTape,
    ) -> Result<(AdmmState, IterationParts, Vector)> {
        check_sigma(sigma)?;
        let parts = self.step(state, f)?;
        let noise = tape.draw(self.n())?.scale(sigma);
        let x = &parts.x_next + &noise;
        Ok((AdmmState { x, lambda: parts.lambda_next.clone() }, parts, noise))
    }

    /// Two noisy iterations bundled into one Markov step.
    pub fn markov_k(
        &self,
        state: &AdmmState,
        f1: &dyn Objective,
        f2: &dyn Objective,
        sigma: f64,
        tape: &mut NoiseTape,
    ) -> Result<KStep> {
        let s1 = self.noisy_iteration(state, f1, sigma, tape)?;
        let s2 = self.noisy_iteration(&s1, f2, sigma, tape)?;
        Ok(KStep { state: s2, not_standard_form: !self.standard })
    }

    /// Releases `w̃ = w − βD𝔷 − βU` with `w = λ_{t+1} − βAx_{t+1}`,
    /// `U ~ Normal(0, σ²I_m)`.
    pub fn mechanism_m1(
        &self,
        state: &AdmmState,
        f1: &dyn Objective,
        sigma: f64,
        z_fixed: &Vector,
        tape: &mut NoiseTape,
    ) -> Result<Vector> {
        check_sigma(sigma)?;
        let d = self.d_block()?;
        if z_fixed.len() != self.n() - self.m() {
            return Err(Error::Dimension("fixed block length must be n − m".into()));
        }
        let p = self.step(state, f1)?;
        let w = self.w_of(&p.x_next, &p.lambda_next);
        let u = tape.draw(self.m())?.scale(sigma);
        let mut out = w.axpy(-self.beta, &d.matvec(z_fixed));
        out = out.axpy(-self.beta, &u);
        Ok(out)
    }

    /// Reconstructs `U` from `w̃`, finishes the first iteration and runs the
    /// second one, returning `x̃_{t+2}` and `λ_{t+2}`.
    #[allow(clippy::too_many_arguments)]
    pub fn mechanism_m2(
        &self,
        state: &AdmmState,
        f1: &dyn Objective,
        f2: &dyn Objective,
        sigma: f64,
        z_fixed: &Vector,
        w_tilde: &Vector,
        tape: &mut NoiseTape,
    ) -> Result<M2Output> {
        check_sigma(sigma)?;
        let d = self.d_block()?;
        if z_fixed.len() != self.n() - self.m() || w_tilde.len() != self.m() {
            return Err(Error::Dimension("mechanism inputs".into()));
        }
        let p = self.step(state, f1)?;
        let w = self.w_of(&p.x_next, &p.lambda_next);
        let u = (&w - w_tilde).scale(1.0 / self.beta);
        let u = &u - &d.matvec(z_fixed);
        let x_tilde_1 = &p.x_next + &u.concat(z_fixed);
        let y1 = self.y_of_w(w_tilde)?;
        let s = &self.system;
        let lambda2 = w_tilde.axpy(-self.beta, &(&s.b.matvec(&y1) - &s.c));
        let grad = f2.gradient(&x_tilde_1);
        let x2 = self.x_update(&x_tilde_1, &grad, &y1, &lambda2);
        let noise = tape.draw(self.n())?.scale(sigma);
        Ok(M2Output { x_tilde: &x2 + &noise, lambda: lambda2, y: y1, u, x_tilde_mid: x_tilde_1 })
    }

    /// One step of the oracle variant: order `x`, `y`, `λ`, with gradient
    /// `∇f(x) + (I + ηβAᵀA)z`, `z ~ Normal(0, ρ²I)`.
    pub fn oracle_admm_iteration(
        &self,
        st: &OracleState,
        f: &dyn Objective,
        rho: f64,
        tape: &mut NoiseTape,
    ) -> Result<OracleStep> {
        check_sigma(rho)?;
        let z = tape.draw(self.n())?.scale(rho);
        let grad = &f.gradient(&st.x) + &self.h_apply(&z);
        let x = self.x_update(&st.x, &grad, &st.y, &st.lambda);
        let y = self.y_of(&x, &st.lambda)?;
        let lambda = self.lambda_update(&x, &y, &st.lambda);
        Ok(OracleStep { state: OracleState { x, y, lambda }, z, sampled_gradient: f.gradient(&st.x) })
    }

    /// Same step with the noise placed on `x` after a clean update.
    pub fn oracle_admm_iteration_x_noise(
        &self,
        st: &OracleState,
        f: &dyn Objective,
        x_noise: &Vector,
    ) -> Result<OracleState> {
        let x = &self.x_update(&st.x, &f.gradient(&st.x), &st.y, &st.lambda) + x_noise;
        let y = self.y_of(&x, &st.lambda)?;
        let lambda = self.lambda_update(&x, &y, &st.lambda);
        Ok(OracleState { x, y, lambda })
    }

    /// Runs `fs.len()` noisy iterations and records everything.
    pub fn run_noisy(
        &self,
        start: &AdmmState,
        fs: &[&dyn Objective],
        sigma: f64,
        tape: &mut NoiseTape,
    ) -> Result<Transcript> {
        let mut records = Vec::with_capacity(fs.len() + 1);
        let mut state = start.clone();
        let mut clean = start.x.clone();
        let mut noise = Vector::zeros(self.n());
        for (t, f) in fs.iter().enumerate() {
            let (next, parts, nz) = self.noisy_step(&state, *f, sigma, tape)?;
            records.push(TranscriptRecord { iter: t, x: clean, noise, lambda: state.lambda.clone(), y: parts.y });
            clean = parts.x_next;
            noise = nz;
            state = next;
        }
        let y = self.y_of(&state.x, &state.lambda)?;
        records.push(TranscriptRecord { iter: fs.len(), x: clean, noise, lambda: state.lambda, y });
        Ok(Transcript { records })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise scale {sigma}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KStep {
    pub state: AdmmState,
    /// Set when `A` lacks the identity prefix the privacy analysis needs.
    pub not_standard_form: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct M2Output {
    pub x_tilde: Vector,
    pub lambda: Vector,
    pub y: Vector,
    /// Reconstructed first-block noise.
    pub u: Vector,
    /// `x̃_{t+1} = x_{t+1} + (U, 𝔷)`
    pub x_tilde_mid: Vector,
}

/// State of the oracle variant, which carries `y` explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleState {
    pub x: Vector,
    pub y: Vector,
    pub lambda: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub state: OracleState,
    /// Gradient noise `z` (already scaled by ρ).
    pub z: Vector,
    /// `∇f(x_t)` before noise.
    pub sampled_gradient: Vector,
}

/// Recorded standard-normal draws.
///
/// A live tape pulls from a seeded stream and records every draw; a replay
/// tape hands back a fixed list in order. Callers scale by σ.
#[derive(Debug, Clone)]
pub struct NoiseTape {
    seed: Option<u64>,
    stream: Option<GaussianStream>,
    draws: Vec<Vector>,
    cursor: usize,
}

impl NoiseTape {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        NoiseTape { seed: Some(seed), stream: Some(GaussianStream::new(seed, stream_id)), draws: Vec::new(), cursor: 0 }
    }

    pub fn from_stream(seed: u64, stream: GaussianStream) -> Self {
        NoiseTape { seed: Some(seed), stream: Some(stream), draws: Vec::new(), cursor: 0 }
    }

    pub fn replay(draws: Vec<Vector>) -> Self {
        NoiseTape { seed: None, stream: None, draws, cursor: 0 }
    }

    /// Replay tape holding everything drawn so far.
    pub fn rewound(&self) -> Self {
        NoiseTape { seed: self.seed, stream: None, draws: self.draws[..self.cursor].to_vec(), cursor: 0 }
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn draws(&self) -> &[Vector] {
        &self.draws[..self.cursor]
    }

    pub fn draw(&mut self, dim: usize) -> Result<Vector> {
        if self.cursor < self.draws.len() {
            let v = &self.draws[self.cursor];
            if v.len() != dim {
                return Err(Error::Dimension(format!("tape entry has length {}, requested {dim}", v.len())));
            }
            self.cursor += 1;
            return Ok(v.clone());
        }
        match &mut self.stream {
            Some(s) => {
                let v = s.normal_vector(dim);
                self.draws.push(v.clone());
                self.cursor += 1;
                Ok(v)
            }
            None => Err(Error::InvalidParameter("replay tape exhausted".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptRecord {
    pub iter: usize,
    /// Pre-noise iterate; the released value is `x + noise`.
    pub x: Vector,
    pub noise: Vector,
    pub lambda: Vector,
    /// `𝒢(λ − βA(x + noise))`
    pub y: Vector,
}

impl TranscriptRecord {
    pub fn released_x(&self) -> Vector {
        &self.x + &self.noise
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    /// Columns `iter, x[0..n), lambda[0..m), noise[0..n)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let Some(first) = self.records.first() else {
            return Ok(());
        };
        let (n, m) = (first.x.len(), first.lambda.len());
        let mut header = vec!["iter".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..m).map(|i| format!("lambda{i}")));
        header.extend((0..n).map(|i| format!("noise{i}")));
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.iter.to_string()];
            row.extend(r.x.iter().map(|v| format!("{v:e}")));
            row.extend(r.lambda.iter().map(|v| format!("{v:e}")));
            row.extend(r.noise.iter().map(|v| format!("{v:e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
