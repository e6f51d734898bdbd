#![allow(dead_code)]

use std::sync::Arc;

use noisy_admm::engine::{AdmmProblem, AdmmState, NoiseTape};
use noisy_admm::instances::{random_instance, InstanceSpec};
use noisy_admm::norms::{contraction_factor, custom_norm_sq, sc_norm_sq, CustomNormParams, ScNormParams};
use noisy_admm::problem::{ConstraintSystem, CustomArgmin, QuadraticLoss, Regularizer};
use noisy_admm::rng::GaussianStream;
use noisy_admm::{Matrix, Vector};

fn perturbed_pair(seed: u64, m: usize, start: &AdmmState, other: &AdmmState) -> (AdmmState, AdmmState) {
    let mut s = GaussianStream::substream(seed, 0x5eed, 1);
    let mut b = other.clone();
    b.lambda = s.normal_vector(m);
    (start.clone(), b)
}

/// `‖Δout‖²/‖Δin‖²` in the custom norm for one clean iteration.
pub fn nonexpansion_ratio(seed: u64) -> f64 {
    let spec = InstanceSpec { elastic_net: seed.is_multiple_of(2), losses: 1, ..Default::default() };
    let inst = random_instance(seed, &spec).unwrap();
    let p = &inst.problem;
    let (a, b) = perturbed_pair(seed, p.m(), &inst.start, &inst.start_prime);
    let oa = p.admm_iteration(&a, &inst.losses[0]).unwrap();
    let ob = p.admm_iteration(&b, &inst.losses[0]).unwrap();
    let np = CustomNormParams { eta: p.eta, beta: p.beta, a: p.system.a.clone() };
    custom_norm_sq(&(&oa.x - &ob.x), &(&oa.lambda - &ob.lambda), &np)
        / custom_norm_sq(&(&a.x - &b.x), &(&a.lambda - &b.lambda), &np)
}

/// `‖Δout‖²/(𝔏‖Δin‖²)` in the strongly convex norm.
pub fn contraction_ratio(seed: u64) -> f64 {
    let spec =
        InstanceSpec { strongly_convex: true, elastic_net: seed.is_multiple_of(2), losses: 1, ..Default::default() };
    let inst = random_instance(seed, &spec).unwrap();
    let p = &inst.problem;
    let sc = inst.sc.unwrap();
    let rep = contraction_factor(sc.nu, sc.mu, sc.mu_g, p.beta, sc.op_norm_ab, p.eta).unwrap();
    let np = ScNormParams::new(p.eta, p.beta, p.system.a.clone(), sc.nu, sc.mu).unwrap();
    let (a, b) = perturbed_pair(seed, p.m(), &inst.start, &inst.start_prime);
    let oa = p.admm_iteration(&a, &inst.losses[0]).unwrap();
    let ob = p.admm_iteration(&b, &inst.losses[0]).unwrap();
    sc_norm_sq(&(&oa.x - &ob.x), &(&oa.lambda - &ob.lambda), &np)
        / (rep.factor * sc_norm_sq(&(&a.x - &b.x), &(&a.lambda - &b.lambda), &np))
}

/// Relative distance between operator K and `M2∘M1` driven by the same
/// noise: `N₁ = (U, 𝔷)` and `N₂` shared.
pub fn coupling_error(seed: u64) -> f64 {
    let spec =
        InstanceSpec { elastic_net: seed.is_multiple_of(3), strongly_convex: seed % 2 == 1, ..Default::default() };
    let inst = random_instance(seed, &spec).unwrap();
    let p = &inst.problem;
    let (n, m) = (p.n(), p.m());
    let sigma = 0.5 + (seed % 4) as f64 * 0.5;
    let mut s = GaussianStream::substream(seed, 0x5eed, 2);
    let (n1, n2) = (s.normal_vector(n), s.normal_vector(n));
    let (f1, f2) = (&inst.losses[0], &inst.losses[1]);

    let mut k_tape = NoiseTape::replay(vec![n1.clone(), n2.clone()]);
    let k = p.markov_k(&inst.start, f1, f2, sigma, &mut k_tape).unwrap();

    let u_std = n1.slice(0, m);
    let z = n1.slice(m, n).scale(sigma);
    let mut t1 = NoiseTape::replay(vec![u_std]);
    let w = p.mechanism_m1(&inst.start, f1, sigma, &z, &mut t1).unwrap();
    let mut t2 = NoiseTape::replay(vec![n2]);
    let out = p.mechanism_m2(&inst.start, f1, f2, sigma, &z, &w, &mut t2).unwrap();

    let scale = 1.0 + k.state.x.norm() + k.state.lambda.norm();
    ((&out.x_tilde - &k.state.x).norm() + (&out.lambda - &k.state.lambda).norm()) / scale
}

struct ZeroG;

impl CustomArgmin for ZeroG {
    fn argmin(&self, _w: &Vector, b: &Matrix, _c: &Vector, _beta: f64) -> Vector {
        Vector::zeros(b.cols())
    }
    fn value(&self, _y: &Vector) -> f64 {
        0.0
    }
}

/// Euclidean expansion of one iteration with `g ≡ 0`, `B = 0`, `c = 0`,
/// `A = I`, `β = 1`, `η = 10⁻⁶` and a constant `f`, started at `λ = 0`.
pub fn euclidean_expansion(seed: u64) -> f64 {
    let n = 3;
    let cs = ConstraintSystem::new(Matrix::identity(n), Matrix::zeros(n, n), Vector::zeros(n)).unwrap();
    let g = Regularizer::Custom { handle: Arc::new(ZeroG), mu_g: 0.0 };
    let p = AdmmProblem::new(cs, g, 1.0, 1e-6).unwrap();
    let f = QuadraticLoss::zero(n);
    let mut s = GaussianStream::substream(seed, 0x5eed, 3);
    let a = AdmmState::new(s.normal_vector(n), Vector::zeros(n));
    let b = AdmmState::new(s.normal_vector(n), Vector::zeros(n));
    let oa = p.admm_iteration(&a, &f).unwrap();
    let ob = p.admm_iteration(&b, &f).unwrap();
    let out = (&oa.x - &ob.x).norm_sq() + (&oa.lambda - &ob.lambda).norm_sq();
    out / (&a.x - &b.x).norm_sq()
}
