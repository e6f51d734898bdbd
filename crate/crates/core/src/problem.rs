//! Problem instances: linear constraints `Ax + By = c`, smooth losses,
//! regularizers with their `y`-minimizer, and row-reduction to `[I | D]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, min_eigenvalue, operator_norm, symmetric_eigen, Cholesky, Matrix, Vector};

/// `Ax + By = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vector,
}

impl ConstraintSystem {
    pub fn new(a: Matrix, b: Matrix, c: Vector) -> Result<Self> {
        if a.rows() != b.rows() || a.rows() != c.len() {
            return Err(Error::Dimension(format!("A has {} rows, B has {}, c has {}", a.rows(), b.rows(), c.len())));
        }
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Dimension("empty constraint matrix".into()));
        }
        if !a.is_finite() || !b.is_finite() || !c.is_finite() {
            return Err(Error::InvalidParameter("non-finite constraint data".into()));
        }
        Ok(ConstraintSystem { a, b, c })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn l(&self) -> usize {
        self.b.cols()
    }

    /// `Ax + By − c`
    pub fn residual(&self, x: &Vector, y: &Vector) -> Vector {
        let mut r = self.a.matvec(x);
        r += &self.b.matvec(y);
        r -= &self.c;
        r
    }
}

/// Smooth convex loss with gradient access.
pub trait Objective: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Lipschitz constant ν of the gradient.
    fn smoothness(&self) -> f64;
    /// Strong-convexity modulus μ (0 when merely convex).
    fn strong_convexity(&self) -> f64 {
        0.0
    }
    /// Uniform bound on the gradient norm, when one is known.
    fn gradient_bound(&self) -> Option<f64> {
        None
    }
    /// Exposes `(P, q)` for losses of the form `½xᵀPx + qᵀx`.
    fn as_quadratic(&self) -> Option<QuadraticLoss> {
        None
    }
}

/// `f(x) = ½xᵀPx + qᵀx`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    pub p: Matrix,
    pub q: Vector,
    nu: f64,
    mu: f64,
}

impl QuadraticLoss {
    pub fn new(p: Matrix, q: Vector) -> Result<Self> {
        if p.rows() != p.cols() || p.rows() != q.len() {
            return Err(Error::Dimension("quadratic loss shape".into()));
        }
        let p = p.symmetrize();
        let vals = symmetric_eigen(&p).values;
        let nu = vals.iter().cloned().fold(0.0, f64::max);
        let mu = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if mu < -1e-10 * nu.max(1.0) {
            return Err(Error::InvalidParameter("quadratic loss is not convex".into()));
        }
        Ok(QuadraticLoss { p, q, nu, mu: mu.max(0.0) })
    }

    pub fn zero(n: usize) -> Self {
        QuadraticLoss { p: Matrix::zeros(n, n), q: Vector::zeros(n), nu: 0.0, mu: 0.0 }
    }
}

impl Objective for QuadraticLoss {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.p.matvec(x)) + self.q.dot(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.p.matvec(x) + &self.q
    }
    fn smoothness(&self) -> f64 {
        self.nu
    }
    fn strong_convexity(&self) -> f64 {
        self.mu
    }
    fn as_quadratic(&self) -> Option<QuadraticLoss> {
        Some(self.clone())
    }
}

/// `f(x) = (⟨a, x⟩ − b)²`
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredLoss {
    pub a: Vector,
    pub b: f64,
}

impl Objective for SquaredLoss {
    fn value(&self, x: &Vector) -> f64 {
        let r = self.a.dot(x) - self.b;
        r * r
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.a.scale(2.0 * (self.a.dot(x) - self.b))
    }
    fn smoothness(&self) -> f64 {
        2.0 * self.a.norm_sq()
    }
    fn strong_convexity(&self) -> f64 {
        if self.a.len() == 1 {
            self.smoothness()
        } else {
            0.0
        }
    }
    /// Same gradient; the value drops the constant `b²`.
    fn as_quadratic(&self) -> Option<QuadraticLoss> {
        let n = self.a.len();
        let mut p = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] = 2.0 * self.a[i] * self.a[j];
            }
        }
        Some(QuadraticLoss { p, q: self.a.scale(-2.0 * self.b), nu: self.smoothness(), mu: self.strong_convexity() })
    }
}

/// Two neighboring losses with the caller-supplied gradient gap Δ.
#[derive(Clone)]
pub struct NeighboringPair<F> {
    pub f: F,
    pub f_prime: F,
    pub delta: f64,
}

/// Deterministic user-supplied `y`-minimizer.
pub trait CustomArgmin: Send + Sync {
    /// Minimizer of `g(y) − ⟨w + βc, By⟩ + (β/2)‖By‖²`.
    fn argmin(&self, w: &Vector, b: &Matrix, c: &Vector, beta: f64) -> Vector;
    fn value(&self, y: &Vector) -> f64;
}

#[derive(Clone)]
pub enum Regularizer {
    /// `c1‖y‖₁ + c2‖y‖²`
    ElasticNet {
        c1: f64,
        c2: f64,
    },
    /// `½yᵀPy + qᵀy`
    Quadratic {
        p: Matrix,
        q: Vector,
    },
    Custom {
        handle: Arc<dyn CustomArgmin>,
        mu_g: f64,
    },
}

impl fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::ElasticNet { c1, c2 } => write!(f, "ElasticNet {{ c1: {c1}, c2: {c2} }}"),
            Regularizer::Quadratic { p, q } => write!(f, "Quadratic {{ p: {p:?}, q: {q:?} }}"),
            Regularizer::Custom { mu_g, .. } => write!(f, "Custom {{ mu_g: {mu_g} }}"),
        }
    }
}

impl Regularizer {
    pub fn value(&self, y: &Vector) -> f64 {
        match self {
            Regularizer::ElasticNet { c1, c2 } => c1 * y.iter().map(|v| v.abs()).sum::<f64>() + c2 * y.norm_sq(),
            Regularizer::Quadratic { p, q } => 0.5 * y.dot(&p.matvec(y)) + q.dot(y),
            Regularizer::Custom { handle, .. } => handle.value(y),
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self {
            Regularizer::ElasticNet { c2, .. } => 2.0 * c2,
            Regularizer::Quadratic { p, .. } => min_eigenvalue(p).max(0.0),
            Regularizer::Custom { mu_g, .. } => *mu_g,
        }
    }

    /// Quadratic data `(P, q)` when the regularizer has no ℓ1 part.
    pub fn as_quadratic(&self, dim: usize) -> Option<(Matrix, Vector)> {
        match self {
            Regularizer::Quadratic { p, q } => Some((p.clone(), q.clone())),
            Regularizer::ElasticNet { c1, c2 } if *c1 == 0.0 => {
                Some((Matrix::identity(dim).scale(2.0 * c2), Vector::zeros(dim)))
            }
            _ => None,
        }
    }
}

pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

/// `y` minimizer for the elastic net with `B = −I`, `c = 0`.
pub fn elastic_net_argmin(w: &Vector, c1: f64, c2: f64, beta: f64) -> Vector {
    let d = 2.0 * c2 + beta;
    Vector(w.iter().map(|&wj| soft_threshold(-wj, c1) / d).collect())
}

fn is_neg_identity(b: &Matrix) -> bool {
    b.rows() == b.cols() && (0..b.rows()).all(|i| (0..b.cols()).all(|j| b[(i, j)] == if i == j { -1.0 } else { 0.0 }))
}

/// Minimizer over `y` of the augmented Lagrangian, written in terms of
/// `w = λ − βAx`.
pub fn generic_argmin(g: &Regularizer, w: &Vector, b: &Matrix, c: &Vector, beta: f64) -> Result<Vector> {
    YSolver::new(g, b, c, beta, None)?.solve(w)
}

/// Cached `y`-minimizer for a fixed `(g, B, c, β)` and optional absorbed
/// equality constraints `B̂y = ĉ`.
#[derive(Clone)]
pub struct YSolver {
    kind: YKind,
    b: Matrix,
    c: Vector,
    beta: f64,
}

#[derive(Clone)]
enum YKind {
    ElasticNet { c1: f64, c2: f64 },
    Quadratic { chol: Cholesky, q: Vector },
    ConstrainedQuadratic { kkt: Matrix, q: Vector, c_hat: Vector },
    Custom(Arc<dyn CustomArgmin>),
}

impl YSolver {
    pub fn new(g: &Regularizer, b: &Matrix, c: &Vector, beta: f64, extra: Option<(&Matrix, &Vector)>) -> Result<Self> {
        let l = b.cols();
        let extra = extra.filter(|(bh, _)| bh.rows() > 0);
        let kind = match (g, extra) {
            (Regularizer::Custom { handle, .. }, None) => YKind::Custom(handle.clone()),
            (Regularizer::ElasticNet { c1, c2 }, None) if is_neg_identity(b) => YKind::ElasticNet { c1: *c1, c2: *c2 },
            _ => {
                let (p, q) = g.as_quadratic(l).ok_or_else(|| {
                    Error::Unsupported("no closed-form y-minimizer for this regularizer and B".into())
                })?;
                let h = p.add(&b.gram().scale(beta)).symmetrize();
                match extra {
                    None => YKind::Quadratic { chol: Cholesky::new(&h)?, q },
                    Some((bh, ch)) => {
                        let k = bh.rows();
                        let mut kkt = Matrix::zeros(l + k, l + k);
                        for i in 0..l {
                            for j in 0..l {
                                kkt[(i, j)] = h[(i, j)];
                            }
                        }
                        for r in 0..k {
                            for j in 0..l {
                                kkt[(l + r, j)] = bh[(r, j)];
                                kkt[(j, l + r)] = bh[(r, j)];
                            }
                        }
                        YKind::ConstrainedQuadratic { kkt, q, c_hat: ch.clone() }
                    }
                }
            }
        };
        Ok(YSolver { kind, b: b.clone(), c: c.clone(), beta })
    }

    pub fn solve(&self, w: &Vector) -> Result<Vector> {
        let shifted = w.axpy(self.beta, &self.c);
        match &self.kind {
            YKind::ElasticNet { c1, c2 } => Ok(elastic_net_argmin(&shifted, *c1, *c2, self.beta)),
            YKind::Quadratic { chol, q } => Ok(chol.solve(&(&self.b.tr_matvec(&shifted) - q))),
            YKind::ConstrainedQuadratic { kkt, q, c_hat } => {
                let l = q.len();
                let rhs = (&self.b.tr_matvec(&shifted) - q).concat(c_hat);
                let sol = lu_solve(kkt, &rhs)?;
                Ok(sol.slice(0, l))
            }
            YKind::Custom(h) => Ok(h.argmin(w, &self.b, &self.c, self.beta)),
        }
    }
}

/// Result of row-reducing the constraint system to `A' = [I | D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub system: ConstraintSystem,
    /// Rows whose `A`-part vanished: `B̂y = ĉ`, absorbed into the regularizer.
    pub b_hat: Matrix,
    pub c_hat: Vector,
    /// `x'_k = x[column_order[k]]`; identity when the pivots are leading.
    pub column_order: Vec<usize>,
}

impl StandardForm {
    pub fn permute_x(&self, x: &Vector) -> Vector {
        Vector(self.column_order.iter().map(|&j| x[j]).collect())
    }
}

const PIVOT_TOL: f64 = 1e-10;

/// Gaussian elimination with partial pivoting on the `A` block of
/// `[A | B | c]`, producing `A' = [I | D]` (after a column reordering of `x`
/// when the pivot columns are not leading).
pub fn standardize(cs: &ConstraintSystem) -> Result<StandardForm> {
    let (m, n, l) = (cs.m(), cs.n(), cs.l());
    let w = n + l + 1;
    let mut t = Matrix::zeros(m, w);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = cs.a[(i, j)];
        }
        for j in 0..l {
            t[(i, n + j)] = cs.b[(i, j)];
        }
        t[(i, w - 1)] = cs.c[i];
    }
    let tol = PIVOT_TOL * cs.a.max_abs().max(1.0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for j in 0..n {
        if r == m {
            break;
        }
        let (p, pv) =
            (r..m).map(|i| (i, t[(i, j)].abs())).fold((r, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pv <= tol {
            for i in r..m {
                t[(i, j)] = 0.0;
            }
            continue;
        }
        if p != r {
            for k in 0..w {
                let tmp = t[(r, k)];
                t[(r, k)] = t[(p, k)];
                t[(p, k)] = tmp;
            }
        }
        let piv = t[(r, j)];
        if piv != 1.0 {
            for k in 0..w {
                t[(r, k)] /= piv;
            }
        }
        t[(r, j)] = 1.0;
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = t[(i, j)];
            if f == 0.0 {
                continue;
            }
            for k in 0..w {
                t[(i, k)] -= f * t[(r, k)];
            }
            t[(i, j)] = 0.0;
        }
        pivots.push(j);
        r += 1;
    }

    let mut column_order = pivots.clone();
    column_order.extend((0..n).filter(|j| !pivots.contains(j)));

    let mut a2 = Matrix::zeros(r, n);
    let mut b2 = Matrix::zeros(r, l);
    let mut c2 = Vector::zeros(r);
    for i in 0..r {
        for (k, &j) in column_order.iter().enumerate() {
            a2[(i, k)] = t[(i, j)];
        }
        for k in 0..r {
            a2[(i, k)] = if i == k { 1.0 } else { 0.0 };
        }
        for j in 0..l {
            b2[(i, j)] = t[(i, n + j)];
        }
        c2[i] = t[(i, w - 1)];
    }

    let bscale = cs.b.max_abs().max(cs.c.max_abs()).max(1.0);
    let mut bh_rows = Vec::new();
    let mut ch = Vec::new();
    for i in r..m {
        let brow: Vec<f64> = (0..l).map(|j| t[(i, n + j)]).collect();
        let cv = t[(i, w - 1)];
        let bmax = brow.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if bmax <= PIVOT_TOL * bscale {
            if cv.abs() > PIVOT_TOL * bscale {
                return Err(Error::DegenerateSystem(i));
            }
            continue;
        }
        bh_rows.push(brow);
        ch.push(cv);
    }
    let b_hat = if bh_rows.is_empty() { Matrix::zeros(0, l) } else { Matrix::from_rows(&bh_rows)? };
    if r == 0 {
        return Err(Error::Dimension("constraint matrix A has rank zero".into()));
    }
    Ok(StandardForm { system: ConstraintSystem { a: a2, b: b2, c: c2 }, b_hat, c_hat: Vector(ch), column_order })
}

/// Step parameters shared by all iteration variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub beta: f64,
    pub eta: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_iterations() -> usize {
    1
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// JSON layout of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDoc {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub beta: f64,
    pub eta: f64,
    #[serde(default)]
    pub sigma: f64,
    pub regularizer: RegularizerDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerDoc {
    ElasticNet {
        c1: f64,
        c2: f64,
    },
    Quadratic {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        q: Vec<f64>,
    },
}

impl ProblemDoc {
    pub fn from_parts(cs: &ConstraintSystem, g: &Regularizer, cfg: &AdmmConfig) -> Result<Self> {
        let regularizer = match g {
            Regularizer::ElasticNet { c1, c2 } => RegularizerDoc::ElasticNet { c1: *c1, c2: *c2 },
            Regularizer::Quadratic { p, q } => RegularizerDoc::Quadratic { p: p.to_rows(), q: q.0.clone() },
            Regularizer::Custom { .. } => {
                return Err(Error::Unsupported("custom regularizers are not serializable".into()))
            }
        };
        Ok(ProblemDoc {
            a: cs.a.to_rows(),
            b: cs.b.to_rows(),
            c: cs.c.0.clone(),
            beta: cfg.beta,
            eta: cfg.eta,
            sigma: cfg.sigma,
            regularizer,
        })
    }

    pub fn into_parts(self) -> Result<(ConstraintSystem, Regularizer, AdmmConfig)> {
        let cs = ConstraintSystem::new(Matrix::from_rows(&self.a)?, Matrix::from_rows(&self.b)?, Vector(self.c))?;
        let g = match self.regularizer {
            RegularizerDoc::ElasticNet { c1, c2 } => {
                if c1 < 0.0 || c2 < 0.0 {
                    return Err(Error::InvalidParameter("elastic-net weights must be non-negative".into()));
                }
                Regularizer::ElasticNet { c1, c2 }
            }
            RegularizerDoc::Quadratic { p, q } => {
                let p = Matrix::from_rows(&p)?;
                if p.rows() != cs.l() || p.cols() != cs.l() || q.len() != cs.l() {
                    return Err(Error::Dimension("regularizer shape".into()));
                }
                Regularizer::Quadratic { p, q: Vector(q) }
            }
        };
        let cfg = AdmmConfig { beta: self.beta, eta: self.eta, sigma: self.sigma, iterations: 1 };
        cfg.validate()?;
        Ok((cs, g, cfg))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `‖AᵀB‖`
pub fn op_norm_atb(cs: &ConstraintSystem) -> f64 {
    operator_norm(&cs.a.transpose().matmul(&cs.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    fn rand_matrix(s: &mut GaussianStream, r: usize, c: usize) -> Matrix {
        Matrix::from_row_major(r, c, (0..r * c).map(|_| s.standard_normal()).collect()).unwrap()
    }

    #[test]
    fn elastic_net_examples() {
        assert_eq!(elastic_net_argmin(&Vector::zeros(3), 0.1, 0.2, 1.0).0, vec![0.0; 3]);
        let y = elastic_net_argmin(&Vector(vec![0.05, -0.1]), 0.1, 0.2, 1.0);
        assert!(y.iter().all(|v| *v == 0.0));
        let (c1, c2, beta) = (0.3, 0.25, 0.7);
        let y = elastic_net_argmin(&Vector(vec![-(c1 + 2.0 * c2 + beta)]), c1, c2, beta);
        assert!((y[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_argmin_example() {
        let g = Regularizer::Quadratic { p: Matrix::identity(1), q: Vector::zeros(1) };
        let y =
            generic_argmin(&g, &Vector(vec![2.0]), &Matrix::identity(1).scale(-1.0), &Vector::zeros(1), 1.0).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn elastic_net_dispatch_and_unsupported() {
        let g = Regularizer::ElasticNet { c1: 0.1, c2: 0.2 };
        let w = Vector(vec![0.7, -0.2, 0.05]);
        let b = Matrix::identity(3).scale(-1.0);
        let y = generic_argmin(&g, &w, &b, &Vector::zeros(3), 0.9).unwrap();
        assert_eq!(y, elastic_net_argmin(&w, 0.1, 0.2, 0.9));
        let err = generic_argmin(&g, &w, &Matrix::identity(3), &Vector::zeros(3), 0.9);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    struct Doubler;
    impl CustomArgmin for Doubler {
        fn argmin(&self, w: &Vector, _b: &Matrix, _c: &Vector, _beta: f64) -> Vector {
            w.scale(2.0)
        }
        fn value(&self, _y: &Vector) -> f64 {
            0.0
        }
    }

    #[test]
    fn custom_handle_invoked_verbatim() {
        let g = Regularizer::Custom { handle: Arc::new(Doubler), mu_g: 0.0 };
        let w = Vector(vec![1.5, -2.0]);
        let y = generic_argmin(&g, &w, &Matrix::identity(2), &Vector(vec![9.0, 9.0]), 3.0).unwrap();
        assert_eq!(y.0, vec![3.0, -4.0]);
    }

    fn check_optimality(g: &Regularizer, cs: &ConstraintSystem, beta: f64, seed: u64) {
        let mut s = GaussianStream::new(seed, 9);
        let x = s.normal_vector(cs.n());
        let lam = s.normal_vector(cs.m());
        let w = lam.axpy(-beta, &cs.a.matvec(&x));
        let y1 = generic_argmin(g, &w, &cs.b, &cs.c, beta).unwrap();
        let r1 = cs.residual(&x, &y1);
        let mult = lam.axpy(-beta, &r1);
        for _ in 0..100 {
            let y = s.normal_vector(cs.l()).scale(3.0);
            let lhs = g.value(&y1) - g.value(&y);
            let rhs = mult.dot(&cs.b.matvec(&(&y1 - &y)));
            assert!(lhs <= rhs + 1e-8, "{lhs} > {rhs}");
        }
        // y depends on (x, λ) only through w
        let x2 = s.normal_vector(cs.n());
        let lam2 = w.axpy(beta, &cs.a.matvec(&x2));
        let w2 = lam2.axpy(-beta, &cs.a.matvec(&x2));
        if w2 == w {
            assert_eq!(generic_argmin(g, &w2, &cs.b, &cs.c, beta).unwrap(), y1);
        }
    }

    #[test]
    fn optimality_inequality_holds() {
        for seed in 0..20 {
            let mut s = GaussianStream::new(seed, 1);
            let (m, n) = (3, 5);
            let a = rand_matrix(&mut s, m, n);
            let c = s.normal_vector(m);
            let en = ConstraintSystem::new(a.clone(), Matrix::identity(m).scale(-1.0), c.clone()).unwrap();
            check_optimality(&Regularizer::ElasticNet { c1: 0.3, c2: 0.1 }, &en, 0.8, seed);
            let b = rand_matrix(&mut s, m, 2);
            let pg = rand_matrix(&mut s, 2, 2).gram();
            let qs = ConstraintSystem::new(a, b, c).unwrap();
            check_optimality(
                &Regularizer::Quadratic { p: pg.add(&Matrix::identity(2).scale(0.1)), q: s.normal_vector(2) },
                &qs,
                1.3,
                seed,
            );
        }
    }

    #[test]
    fn standardize_fixed_point() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0, 0.4, -2.0], vec![0.0, 1.0, 3.0, 0.5]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let cs = ConstraintSystem::new(a, b, Vector(vec![0.3, -0.7])).unwrap();
        let sf = standardize(&cs).unwrap();
        assert_eq!(sf.system, cs);
        assert_eq!(sf.b_hat.rows(), 0);
        assert_eq!(sf.column_order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn standardize_diagonal_scaling() {
        let a = Matrix::diag(&[2.0, 1.0]);
        let b = Matrix::from_rows(&[vec![4.0, 1.0], vec![3.0, -1.0]]).unwrap();
        let cs = ConstraintSystem::new(a, b, Vector(vec![6.0, 5.0])).unwrap();
        let sf = standardize(&cs).unwrap();
        assert_eq!(sf.system.a, Matrix::identity(2));
        assert_eq!(sf.system.b.to_rows(), vec![vec![2.0, 0.5], vec![3.0, -1.0]]);
        assert_eq!(sf.system.c.0, vec![3.0, 5.0]);
    }

    #[test]
    fn standardize_rank_deficient_rows() {
        // third row = first + second
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![5.0]]).unwrap();
        let cs = ConstraintSystem::new(a, b, Vector(vec![1.0, 2.0, 4.0])).unwrap();
        let sf = standardize(&cs).unwrap();
        assert_eq!(sf.system.a, Matrix::identity(2));
        assert_eq!(sf.b_hat.rows(), 1);
        // row3 − row1 − row2: (5 − 1 − 1) y = 4 − 1 − 2
        let ratio = sf.c_hat[0] / sf.b_hat[(0, 0)];
        assert!((ratio - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_degenerate() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let cs = ConstraintSystem::new(a, b, Vector(vec![1.0, 3.0])).unwrap();
        assert!(matches!(standardize(&cs), Err(Error::DegenerateSystem(_))));
    }

    #[test]
    fn standardize_preserves_feasible_set() {
        let mut s = GaussianStream::new(5, 5);
        for trial in 0..10 {
            let (m, n, l) = (4, 6, 3);
            let mut a = rand_matrix(&mut s, m, n);
            if trial % 2 == 0 {
                // force a dependent row
                for j in 0..n {
                    a[(3, j)] = a[(0, j)] - 2.0 * a[(1, j)];
                }
            }
            let b = rand_matrix(&mut s, m, l);
            let x0 = s.normal_vector(n);
            let y0 = s.normal_vector(l);
            let c = &a.matvec(&x0) + &b.matvec(&y0);
            let cs = ConstraintSystem::new(a, b, c).unwrap();
            let sf = standardize(&cs).unwrap();
            assert!(sf.system.a.has_identity_prefix());
            // null-space directions keep feasibility
            for _ in 0..100 {
                let (x, y) = if sf.b_hat.rows() == 0 && cs.m() <= n {
                    // choose y freely, solve for pivot block of x in the standard form
                    let y = s.normal_vector(l);
                    let mut xp = s.normal_vector(n);
                    let r = sf.system.m();
                    let rhs = &sf.system.c - &sf.system.b.matvec(&y);
                    let d = sf.system.a.col_block(r, n);
                    let tail = xp.slice(r, n);
                    let head = &rhs - &d.matvec(&tail);
                    xp[..r].copy_from_slice(&head);
                    let mut x = Vector::zeros(n);
                    for (k, &j) in sf.column_order.iter().enumerate() {
                        x[j] = xp[k];
                    }
                    (x, y)
                } else {
                    (x0.clone(), y0.clone())
                };
                let orig = cs.residual(&x, &y).norm();
                assert!(orig <= 1e-9 * (1.0 + x.norm() + y.norm()) * 10.0, "{orig}");
                let std = sf.system.residual(&sf.permute_x(&x), &y).norm();
                assert!(std <= 1e-9 * (1.0 + x.norm() + y.norm()) * 10.0);
                if sf.b_hat.rows() > 0 {
                    let extra = (&sf.b_hat.matvec(&y) - &sf.c_hat).norm();
                    assert!(extra <= 1e-9 * (1.0 + y.norm()) * 10.0);
                }
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let cs = ConstraintSystem::new(Matrix::identity(2), Matrix::identity(2).scale(-1.0), Vector::zeros(2)).unwrap();
        let g = Regularizer::ElasticNet { c1: 0.01, c2: 0.1 };
        let cfg = AdmmConfig { beta: 0.9, eta: 1.7, sigma: 0.1, iterations: 1 };
        let doc = ProblemDoc::from_parts(&cs, &g, &cfg).unwrap();
        let json = doc.to_json().unwrap();
        assert!(json.contains("\"A\"") && json.contains("elastic_net"));
        let back = ProblemDoc::from_json(&json).unwrap();
        assert_eq!(back, doc);
        let (cs2, _, cfg2) = back.into_parts().unwrap();
        assert_eq!(cs2, cs);
        assert_eq!(cfg2.beta, 0.9);
    }

    #[test]
    fn squared_loss_gradient() {
        let f = SquaredLoss { a: Vector(vec![1.0, 2.0]), b: 1.0 };
        let x = Vector(vec![0.5, 0.5]);
        // ⟨a,x⟩ − b = 0.5
        assert_eq!(f.gradient(&x).0, vec![1.0, 2.0]);
        let q = f.as_quadratic().unwrap();
        let g = q.gradient(&x);
        assert!((&g - &f.gradient(&x)).norm() < 1e-14);
    }
}
