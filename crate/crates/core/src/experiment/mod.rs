//! LASSO reproduction: multi-trial noisy runs, optimality gaps, t-tests and
//! convergence-iteration detection.

pub mod lasso;
pub mod stats;
pub mod svg;
pub mod utility;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::AdmmState;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::norms::contraction_at_midpoint;
use crate::problem::{Objective, Regularizer};
use crate::rng::GaussianStream;

pub use lasso::{gen_lasso, reference_optimum, LassoDataset, ReferenceOptimum};
pub use stats::{welch_statistic, welch_t_test};

/// One parameter row: `μ`, `β`, `c2`, `c1` and an optional `η` (midpoint of
/// the admissible interval when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRow {
    pub mu: f64,
    pub beta: f64,
    pub c2: f64,
    pub c1: f64,
    #[serde(default)]
    pub eta: Option<f64>,
}

/// Where the gap is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapPoint {
    /// Post-noise `x̃_t` with `y = 𝒢(λ_t − βx̃_t)`.
    #[default]
    Released,
    /// Pre-noise `x_t` with `y = 𝒢(λ_t − βx_t)`.
    Clean,
}

fn default_seed() -> u64 {
    42
}
fn default_one() -> usize {
    1
}
fn default_ttest() -> usize {
    100
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub n: usize,
    pub num_points: usize,
    pub sigma_b: f64,
    pub trials: usize,
    pub iterations: usize,
    pub sigmas: Vec<f64>,
    pub rows: Vec<ParamRow>,
    #[serde(default = "default_one")]
    pub gap_every: usize,
    #[serde(default = "default_ttest")]
    pub ttest_iteration: usize,
    #[serde(default)]
    pub gap_point: GapPoint,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.trials == 0 || self.iterations == 0 {
            return bad("trials and iterations must be at least 1");
        }
        if self.n < 5 || self.num_points == 0 {
            return bad("need n ≥ 5 and at least one data point");
        }
        if self.gap_every == 0 {
            return bad("gap_every must be at least 1");
        }
        if self.sigmas.is_empty() || self.rows.is_empty() {
            return bad("need at least one σ and one parameter row");
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || !(self.sigma_b >= 0.0) {
            return bad("noise levels must be finite and non-negative");
        }
        for r in &self.rows {
            if !(r.mu > 0.0 && r.beta > 0.0 && r.c2 >= 0.0 && r.c1 >= 0.0) {
                return bad("rows need μ, β > 0 and c1, c2 ≥ 0");
            }
            if let Some(eta) = r.eta {
                if !(eta > 0.0 && eta.is_finite()) {
                    return bad("η must be positive");
                }
            }
        }
        Ok(())
    }

    /// Row-major over `rows × sigmas`.
    pub fn settings(&self) -> Vec<Setting> {
        let mut out = Vec::new();
        for (ri, row) in self.rows.iter().enumerate() {
            for (si, &sigma) in self.sigmas.iter().enumerate() {
                out.push(Setting { id: ri * self.sigmas.len() + si, row_index: ri, row: row.clone(), sigma });
            }
        }
        out
    }

    /// Iterations at which gaps are recorded: `0, k, 2k, …` and always `T`.
    pub fn recorded_iterations(&self) -> Vec<usize> {
        let mut it: Vec<usize> = (0..=self.iterations).step_by(self.gap_every).collect();
        if *it.last().unwrap() != self.iterations {
            it.push(self.iterations);
        }
        it
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub id: usize,
    pub row_index: usize,
    pub row: ParamRow,
    pub sigma: f64,
}

/// Resolved per-row constants: `η` and `𝔏` under `ν = μ_f = 2μ`, `μ_g = 2c2`,
/// `‖AᵀB‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowConstants {
    pub eta: f64,
    pub contraction: Option<f64>,
}

pub fn row_constants(row: &ParamRow) -> Result<RowConstants> {
    let s = 2.0 * row.mu;
    let mid = contraction_at_midpoint(s, s, 2.0 * row.c2, row.beta, 1.0).ok();
    match (row.eta, mid) {
        (Some(eta), _) => {
            let l = crate::norms::contraction_factor(s, s, 2.0 * row.c2, row.beta, 1.0, eta).ok().map(|r| r.factor);
            Ok(RowConstants { eta, contraction: l })
        }
        (None, Some(r)) => Ok(RowConstants { eta: r.eta, contraction: Some(r.factor) }),
        (None, None) => Err(Error::InvalidParameter(format!("no admissible η for row {row:?}"))),
    }
}

/// Per-trial gap trajectories and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTrajectory {
    pub iters: Vec<usize>,
    /// `gaps[trial][k]` is the gap at `iters[k]`.
    pub gaps: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl GapTrajectory {
    pub fn from_gaps(iters: Vec<usize>, gaps: Vec<Vec<f64>>) -> Result<Self> {
        if gaps.is_empty() || gaps.iter().any(|g| g.len() != iters.len()) {
            return Err(Error::Dimension("every trial needs one gap per recorded iteration".into()));
        }
        let r = gaps.len() as f64;
        let mean = (0..iters.len()).map(|k| gaps.iter().map(|g| g[k]).sum::<f64>() / r).collect();
        Ok(GapTrajectory { iters, gaps, mean })
    }

    /// Samples across trials at iteration `t`.
    pub fn at(&self, t: usize) -> Option<Vec<f64>> {
        let k = self.iters.iter().position(|&i| i == t)?;
        Some(self.gaps.iter().map(|g| g[k]).collect())
    }

    pub fn trials(&self) -> usize {
        self.gaps.len()
    }
}

/// Runs `config.trials` independent noisy runs of one setting. Trial `r`
/// samples its functions and noise from substreams keyed by
/// `(seed, setting, r)`, so the output does not depend on scheduling.
pub fn run_trials(
    data: &LassoDataset,
    optimum: f64,
    setting: &Setting,
    config: &ExperimentConfig,
) -> Result<GapTrajectory> {
    config.validate()?;
    let consts = row_constants(&setting.row)?;
    let row = &setting.row;
    let problem = data.admm_problem(row.c1, row.c2, row.beta, consts.eta)?;
    let g = Regularizer::ElasticNet { c1: row.c1, c2: row.c2 };
    let iters = config.recorded_iterations();
    let n = data.n;
    let loss = data.loss();
    let gap = |x: &Vector, lambda: &Vector| -> Result<f64> {
        let y = problem.y_of(x, lambda)?;
        let v = loss.value(x) + g.value(&y) - optimum;
        if !v.is_finite() {
            return Err(Error::NotConverged(format!("non-finite gap in setting {}", setting.id)));
        }
        Ok(v)
    };

    let gaps: Result<Vec<Vec<f64>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let major = 1 + setting.id as u64;
            let mut picks = GaussianStream::substream(config.seed, major, 2 * trial as u64);
            let mut noise = GaussianStream::substream(config.seed, major, 2 * trial as u64 + 1);
            let mut state = AdmmState::new(Vector::filled(n, 3.0), Vector::zeros(n));
            let mut clean = state.x.clone();
            let mut out = Vec::with_capacity(iters.len());
            let mut next_rec = 0;
            for t in 0..=config.iterations {
                if iters.get(next_rec) == Some(&t) {
                    let x = match config.gap_point {
                        GapPoint::Released => &state.x,
                        GapPoint::Clean => &clean,
                    };
                    out.push(gap(x, &state.lambda)?);
                    next_rec += 1;
                }
                if t == config.iterations {
                    break;
                }
                let f = &data.points[picks.below(data.len() as u64) as usize];
                let parts = problem.step(&state, f)?;
                let z = noise.normal_vector(n).scale(setting.sigma);
                clean = parts.x_next;
                state = AdmmState::new(&clean + &z, parts.lambda_next);
            }
            Ok(out)
        })
        .collect();
    GapTrajectory::from_gaps(iters, gaps?)
}

/// Welch p-value, treating two constant samples with different means as
/// infinitely significant.
fn p_value(a: &[f64], b: &[f64]) -> Result<f64> {
    match welch_t_test(a, b) {
        Err(Error::DegenerateSamples(_)) => Ok(0.0),
        r => r,
    }
}

/// Smallest `t ≥ 1` whose gaps are not significantly different from those
/// at `t + 5`, i.e. Welch `p > 1 − confidence`.
pub fn convergence_iterations(traj: &GapTrajectory, confidence: f64) -> Result<usize> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence {confidence}")));
    }
    let threshold = 1.0 - confidence;
    for &t in traj.iters.iter().filter(|&&t| t >= 1) {
        let (Some(a), Some(b)) = (traj.at(t), traj.at(t + 5)) else { continue };
        if p_value(&a, &b)? > threshold {
            return Ok(t);
        }
    }
    Err(Error::NeverConverged(traj.iters.last().copied().unwrap_or(0)))
}

/// Right-hand side of the averaged-iterate convergence bound at `η = 1/√T`:
/// `β‖By₀−By*‖²/(2T) + ‖x₀−x*‖²/(2√T) + (G²+nρ²)/(2√T)
///  + nβ²ρ²‖A‖⁴/(2T^1.5) + nβρ²‖A‖²/T`.
#[allow(clippy::too_many_arguments)]
pub fn utility_bound_rhs(
    t: usize,
    n: usize,
    beta: f64,
    op_a: f64,
    rho: f64,
    g: f64,
    dist_x0: f64,
    dist_by0: f64,
) -> f64 {
    let tf = t as f64;
    let st = tf.sqrt();
    let nf = n as f64;
    let r2 = rho * rho;
    let a2 = op_a * op_a;
    beta * dist_by0 * dist_by0 / (2.0 * tf)
        + dist_x0 * dist_x0 / (2.0 * st)
        + (g * g + nf * r2) / (2.0 * st)
        + nf * beta * beta * r2 * a2 * a2 / (2.0 * tf * st)
        + nf * beta * r2 * a2 / tf
}

/// Everything one `run-lasso` invocation produces.
#[derive(Debug, Clone)]
pub struct SettingResult {
    pub setting: Setting,
    pub eta: f64,
    pub contraction: Option<f64>,
    pub optimum: f64,
    pub trajectory: GapTrajectory,
    pub convergence: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub settings: Vec<SettingResult>,
}

/// Generates one dataset per row, solves it to reference accuracy and runs
/// every setting.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut datasets = Vec::with_capacity(config.rows.len());
    for row in &config.rows {
        let data = gen_lasso(config.n, config.num_points, row.mu, config.sigma_b, config.seed)?;
        let opt = reference_optimum(&data, row.c1, row.c2)?;
        datasets.push((data, opt.value));
    }
    let mut settings = Vec::new();
    for s in config.settings() {
        let (data, opt) = &datasets[s.row_index];
        let consts = row_constants(&s.row)?;
        let trajectory = run_trials(data, *opt, &s, config)?;
        let convergence = convergence_iterations(&trajectory, 0.95).ok();
        settings.push(SettingResult {
            setting: s,
            eta: consts.eta,
            contraction: consts.contraction,
            optimum: *opt,
            trajectory,
            convergence,
        });
    }
    Ok(ExperimentResult { config: config.clone(), settings })
}

/// Pairwise Welch p-values between settings of the same row at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTest {
    pub setting_a: usize,
    pub setting_b: usize,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub iter: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
}

impl ExperimentResult {
    pub fn pairwise_tests(&self) -> Result<Vec<PairTest>> {
        let it = self.config.ttest_iteration.min(self.config.iterations);
        let mut out = Vec::new();
        for (i, a) in self.settings.iter().enumerate() {
            for b in &self.settings[i + 1..] {
                if a.setting.row_index != b.setting.row_index {
                    continue;
                }
                let (Some(sa), Some(sb)) = (a.trajectory.at(it), b.trajectory.at(it)) else { continue };
                let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
                let p = if sa.len() < 2 { f64::NAN } else { p_value(&sa, &sb)? };
                out.push(PairTest {
                    setting_a: a.setting.id,
                    setting_b: b.setting.id,
                    sigma_a: a.setting.sigma,
                    sigma_b: b.setting.sigma,
                    iter: it,
                    mean_a: mean(&sa),
                    mean_b: mean(&sb),
                    p_value: p,
                });
            }
        }
        Ok(out)
    }

    fn header<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# seed={}", self.config.seed)?;
        writeln!(out, "# config={}", serde_json::to_string(&self.config)?)?;
        Ok(())
    }

    /// `setting_id,trial,iter,gap`
    pub fn write_gaps_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.header(&mut out)?;
        writeln!(out, "setting_id,trial,iter,gap")?;
        for s in &self.settings {
            for (trial, g) in s.trajectory.gaps.iter().enumerate() {
                for (it, v) in s.trajectory.iters.iter().zip(g) {
                    writeln!(out, "{},{},{},{:e}", s.setting.id, trial, it, v)?;
                }
            }
        }
        Ok(())
    }

    /// `setting_id,iter,mean_gap`
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.header(&mut out)?;
        for s in &self.settings {
            writeln!(
                out,
                "# setting {}: mu={} beta={} c2={} c1={} eta={} L={} sigma={} convergence_iterations={}",
                s.setting.id,
                s.setting.row.mu,
                s.setting.row.beta,
                s.setting.row.c2,
                s.setting.row.c1,
                s.eta,
                s.contraction.map_or("n/a".to_string(), |l| l.to_string()),
                s.setting.sigma,
                s.convergence.map_or("never".to_string(), |c| c.to_string()),
            )?;
        }
        writeln!(out, "setting_id,iter,mean_gap")?;
        for s in &self.settings {
            for (it, m) in s.trajectory.iters.iter().zip(&s.trajectory.mean) {
                writeln!(out, "{},{},{:e}", s.setting.id, it, m)?;
            }
        }
        Ok(())
    }

    /// `setting_a,setting_b,sigma_a,sigma_b,iter,mean_a,mean_b,p_value`
    pub fn write_ttests_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.header(&mut out)?;
        writeln!(out, "setting_a,setting_b,sigma_a,sigma_b,iter,mean_a,mean_b,p_value")?;
        for t in self.pairwise_tests()? {
            writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{:e}",
                t.setting_a, t.setting_b, t.sigma_a, t.sigma_b, t.iter, t.mean_a, t.mean_b, t.p_value
            )?;
        }
        Ok(())
    }

    /// One line plot per row, one series per σ.
    pub fn plots(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (ri, row) in self.config.rows.iter().enumerate() {
            let series: Vec<svg::Series> = self
                .settings
                .iter()
                .filter(|s| s.setting.row_index == ri)
                .map(|s| svg::Series {
                    label: format!("sigma={}", s.setting.sigma),
                    points: s
                        .trajectory
                        .iters
                        .iter()
                        .map(|&i| i as f64)
                        .zip(s.trajectory.mean.iter().cloned())
                        .collect(),
                })
                .collect();
            let title =
                format!("mu={} beta={} c2={} c1={} (seed {})", row.mu, row.beta, row.c2, row.c1, self.config.seed);
            out.push((format!("row{ri}.svg"), svg::line_plot(&title, "iteration", "mean gap", &series)));
        }
        out
    }
}
