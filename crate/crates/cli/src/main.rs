//! `noisy-admm` command-line tool.
//!
//! Exit codes: 0 ok, 2 usage or malformed input, 3 infeasible parameters,
//! 4 verification failure.

// NaN-rejecting guards read best as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use noisy_admm::accountant::{first_user_bound, first_user_bound_sc, PrivacyBoundReport, ScParams};
use noisy_admm::experiment::{run_experiment, ExperimentConfig, ParamRow};
use noisy_admm::norms::{contraction_at_midpoint, ContractionReport};
use noisy_admm::oracle::{verify_batch, write_verify_csv, VerifyBatch};
use noisy_admm::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "noisy-admm", version, about = "Noisy ADMM privacy accounting and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the first-user amplification bound as JSON.
    AmplifyBound(AmplifyArgs),
    /// Print η at the interval midpoint and the contraction factor per row.
    Contraction(ContractionArgs),
    /// Compare exact divergences with the bounds on random quadratic instances.
    VerifyOracle(VerifyArgs),
    /// Run the LASSO experiments described by a JSON config.
    RunLasso(LassoArgs),
}

#[derive(Args)]
struct AmplifyArgs {
    #[arg(long)]
    sigma: f64,
    /// Sensitivity `Δ` of the neighbouring gradients.
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    beta: f64,
    /// Operator norm of `A`.
    #[arg(long = "op-norm-a")]
    op_norm_a: f64,
    #[arg(long = "t-pairs")]
    t_pairs: u32,
    /// Use the strongly convex bound; needs --nu --mu --mu-g --op-norm-ab.
    #[arg(long, requires_all = ["nu", "mu", "mu_g", "op_norm_ab"])]
    sc: bool,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "mu-g")]
    mu_g: Option<f64>,
    /// Operator norm of `AᵀB`.
    #[arg(long = "op-norm-ab")]
    op_norm_ab: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ContractionArgs {
    /// JSON file holding a list of rows `{mu, beta, c2, c1}`.
    #[arg(long, conflicts_with = "row")]
    config: Option<PathBuf>,
    /// A row `mu,beta,c2,c1`; may be repeated.
    #[arg(long)]
    row: Vec<String>,
    /// Emit JSON instead of the text table.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long = "max-n", default_value_t = 8)]
    max_n: usize,
    #[arg(long = "max-m", default_value_t = 4)]
    max_m: usize,
    /// Fixed pair count; cycles 1..=6 when absent.
    #[arg(long = "t-pairs", value_parser = clap::value_parser!(u32).range(1..))]
    t_pairs: Option<u32>,
    /// Fixed noise scale; cycles 0.5, 1, 2 when absent.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LassoArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::EtaOutsideInterval { .. } | Error::EmptyInterval { .. } | Error::BadEta { .. } => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

#[derive(Serialize)]
struct SeededReport<'a> {
    seed: u64,
    report: &'a PrivacyBoundReport,
}

fn amplify(a: AmplifyArgs) -> ExitCode {
    let report = if a.sc {
        let sc =
            ScParams { nu: a.nu.unwrap(), mu: a.mu.unwrap(), mu_g: a.mu_g.unwrap(), op_norm_ab: a.op_norm_ab.unwrap() };
        first_user_bound_sc(a.sigma, a.delta, a.eta, a.beta, a.op_norm_a, a.t_pairs, &sc)
    } else {
        first_user_bound(a.sigma, a.delta, a.eta, a.beta, a.op_norm_a, a.t_pairs)
    };
    match report {
        Ok(r) => {
            println!("{}", serde_json::to_string_pretty(&SeededReport { seed: a.seed, report: &r }).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => fail(code_for(&e), e),
    }
}

/// The four built-in rows with their listed `η` and `𝔏`.
const BUILTIN: [(f64, f64, f64, f64, f64, f64); 4] = [
    (0.25, 0.9, 0.1, 0.01, 1.95, 0.95),
    (0.09, 0.5, 0.1, 0.01, 4.81, 0.91),
    (0.0225, 0.3, 0.1, 0.01, 20.00, 0.85),
    (0.01, 0.15, 0.1, 0.01, 43.30, 0.80),
];

fn parse_row(s: &str) -> Result<ParamRow, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("row '{s}': {e}"))?;
    match v[..] {
        [mu, beta, c2, c1] => Ok(ParamRow { mu, beta, c2, c1, eta: None }),
        _ => Err(format!("row '{s}' needs mu,beta,c2,c1")),
    }
}

#[derive(Serialize)]
struct ContractionRow {
    mu: f64,
    beta: f64,
    c2: f64,
    c1: f64,
    eta_mid: f64,
    contraction: f64,
    listed: Option<(f64, f64)>,
    report: ContractionReport,
}

fn contraction(a: ContractionArgs) -> ExitCode {
    let rows: Vec<(ParamRow, Option<(f64, f64)>)> = if let Some(path) = &a.config {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
        };
        match serde_json::from_str::<Vec<ParamRow>>(&text) {
            Ok(r) => r.into_iter().map(|r| (r, None)).collect(),
            Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
        }
    } else if !a.row.is_empty() {
        match a.row.iter().map(|r| parse_row(r)).collect::<Result<Vec<_>, _>>() {
            Ok(r) => r.into_iter().map(|r| (r, None)).collect(),
            Err(e) => return fail(EXIT_USAGE, e),
        }
    } else {
        BUILTIN
            .iter()
            .map(|&(mu, beta, c2, c1, eta, l)| (ParamRow { mu, beta, c2, c1, eta: None }, Some((eta, l))))
            .collect()
    };

    let mut out = Vec::new();
    for (row, listed) in rows {
        let s = 2.0 * row.mu;
        match contraction_at_midpoint(s, s, 2.0 * row.c2, row.beta, 1.0) {
            Ok(r) => out.push(ContractionRow {
                mu: row.mu,
                beta: row.beta,
                c2: row.c2,
                c1: row.c1,
                eta_mid: r.eta,
                contraction: r.factor,
                listed,
                report: r,
            }),
            Err(e) => return fail(code_for(&e), format!("row mu={} beta={}: {e}", row.mu, row.beta)),
        }
    }
    if a.json {
        let doc = serde_json::json!({ "seed": a.seed, "rows": out });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        return ExitCode::SUCCESS;
    }
    println!("# seed={} convention: nu = mu_f = 2*mu, mu_g = 2*c2, |A^T B| = 1", a.seed);
    println!("{:>8} {:>6} {:>6} {:>6} {:>9} {:>8}", "mu", "beta", "c2", "c1", "eta_mid", "L");
    let mut notes = Vec::new();
    for (i, r) in out.iter().enumerate() {
        let mut mark = "";
        if let Some((eta, l)) = r.listed {
            if (r.eta_mid - eta).abs() > 0.01 || (r.contraction - l).abs() > 0.01 {
                mark = " *";
                notes.push(format!(
                    "* row {}: listed eta = {eta:.2}, L = {l:.2}; recomputation under the convention gives eta_mid = {:.3}, L = {:.4}",
                    i + 1,
                    r.eta_mid,
                    r.contraction
                ));
            }
        }
        println!("{:>8} {:>6} {:>6} {:>6} {:>9.3} {:>8.4}{mark}", r.mu, r.beta, r.c2, r.c1, r.eta_mid, r.contraction);
    }
    for n in notes {
        println!("{n}");
    }
    ExitCode::SUCCESS
}

fn verify(a: VerifyArgs) -> ExitCode {
    let cfg = VerifyBatch {
        seed: a.seed,
        instances: a.instances,
        max_n: a.max_n,
        max_m: a.max_m,
        sigma: a.sigma,
        t_pairs: a.t_pairs,
    };
    if let Some(s) = a.sigma {
        if !(s > 0.0 && s.is_finite()) {
            return fail(EXIT_USAGE, "--sigma must be positive");
        }
    }
    let rows = match verify_batch(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(code_for(&e), e),
    };
    let mut buf = Vec::new();
    write_verify_csv(&cfg, &rows, &mut buf).unwrap();
    match &a.out {
        Some(p) => {
            if let Err(e) = fs::write(p, &buf) {
                return fail(EXIT_USAGE, format!("{}: {e}", p.display()));
            }
        }
        None => print!("{}", String::from_utf8(buf).unwrap()),
    }
    let bad = rows.iter().filter(|r| !r.ok).count();
    if bad > 0 {
        return fail(EXIT_VERIFY, format!("{bad} of {} instances exceed their bound", rows.len()));
    }
    ExitCode::SUCCESS
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), String> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| format!("{}: {e}", p.display()))
}

fn run_lasso(a: LassoArgs) -> ExitCode {
    let text = match fs::read_to_string(&a.config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", a.config.display())),
    };
    let cfg: ExperimentConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, format!("malformed config: {e}")),
    };
    if let Err(e) = cfg.validate() {
        return fail(EXIT_USAGE, e);
    }
    let res = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(code_for(&e), e),
    };
    if let Err(e) = fs::create_dir_all(&a.out) {
        return fail(EXIT_USAGE, format!("{}: {e}", a.out.display()));
    }
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut gaps = Vec::new();
    let mut summary = Vec::new();
    let mut ttests = Vec::new();
    if let Err(e) = res
        .write_gaps_csv(&mut gaps)
        .and_then(|_| res.write_summary_csv(&mut summary))
        .and_then(|_| res.write_ttests_csv(&mut ttests))
    {
        return fail(EXIT_USAGE, e);
    }
    files.push(("gaps.csv".into(), gaps));
    files.push(("summary.csv".into(), summary));
    files.push(("ttests.csv".into(), ttests));
    if cfg.plots {
        for (name, svg) in res.plots() {
            files.push((name, svg.into_bytes()));
        }
    }
    for (name, bytes) in &files {
        if let Err(e) = write_file(&a.out, name, bytes) {
            return fail(EXIT_USAGE, e);
        }
    }
    for s in &res.settings {
        println!(
            "setting {}: sigma={} eta={:.4} L={} final mean gap {:.4e} convergence_iterations={}",
            s.setting.id,
            s.setting.sigma,
            s.eta,
            s.contraction.map_or("n/a".into(), |l| format!("{l:.4}")),
            s.trajectory.mean.last().copied().unwrap_or(f64::NAN),
            s.convergence.map_or("never".into(), |c| c.to_string()),
        );
    }
    println!("seed={} wrote {} files to {}", cfg.seed, files.len(), a.out.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::AmplifyBound(a) => amplify(a),
        Command::Contraction(a) => contraction(a),
        Command::VerifyOracle(a) => verify(a),
        Command::RunLasso(a) => run_lasso(a),
    }
}
