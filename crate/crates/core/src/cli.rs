//! `cournot-chain`: solve, sweep and verify markets described in a JSON file.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 trivial market
//! (every price optimal), 3 no optimal margin exists, 4 verification failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{solve_equilibrium, BayesError, BayesProblem, FixedPointBranch, FixedPointResult};
use crate::distributions::DemandBelief;
use crate::first_stage::{optimal_margin_general, supplier_payoff_on_path, SupplierRegime, SupplierSolution};
use crate::inefficiency::{bound_check, dmrl_bound, inefficiency, InefficiencyReport};
use crate::oracle::{grid_argmax_margin, mc_expected_payoff, verify_nash, OracleConfig};
use crate::second_stage::{equilibrium, MarketError, MarketParams, RetailerOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_TRIVIAL: i32 = 2;
pub const EXIT_NO_MAXIMIZER: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cournot-chain", version, about = "Equilibria of a two-stage Cournot supply chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for Monte Carlo checks; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Absolute tolerance for oracle comparisons.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one market and print the equilibrium as JSON.
    Solve { config: PathBuf },
    /// Solve over a parameter grid and emit CSV.
    Sweep { config: PathBuf },
    /// Cross-check the closed forms against brute-force oracles.
    Verify { config: PathBuf },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("verification failed: {}", .0.join(", "))]
    Mismatch(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Bayes(BayesError::Trivial { .. }) => EXIT_TRIVIAL,
            CliError::Bayes(BayesError::NoMaximizer { .. }) => EXIT_NO_MAXIMIZER,
            CliError::Mismatch(_) => EXIT_MISMATCH,
            _ => EXIT_CONFIG,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Market block of the config: either a common capacity `T` or a pair `T1`, `T2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(rename = "T1", default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(rename = "T2", default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    pub c: f64,
    #[serde(default = "two")]
    pub n: u32,
}

fn two() -> u32 {
    2
}

impl MarketSection {
    pub fn params(&self) -> Result<MarketParams, CliError> {
        let (t1, t2) = match (self.t, self.t1, self.t2) {
            (Some(t), None, None) => (t, t),
            (None, Some(t1), Some(t2)) => (t1, t2),
            _ => return Err(config_err("market needs either `T` or both `T1` and `T2`")),
        };
        let params = MarketParams { t1, t2, c: self.c, n: self.n };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "T")]
    Capacity,
    #[serde(rename = "c")]
    Cost,
}

impl SweepVar {
    fn name(&self) -> &'static str {
        match self {
            SweepVar::Alpha => "alpha",
            SweepVar::Capacity => "T",
            SweepVar::Cost => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub vary: SweepVar,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    /// `steps` evenly spaced values, both ends included.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.to } else { self.from + (self.to - self.from) * i as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfigFile {
    pub market: MarketSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<DemandBelief>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Margin to verify in place of the solver's answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
}

/// What a single solve is about.
#[derive(Debug, Clone)]
pub enum Scenario {
    Complete { alpha: f64, params: MarketParams },
    Incomplete { problem: BayesProblem, params: MarketParams },
}

impl MarketConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(config_err)?;
        if let Some(a) = cfg.alpha {
            if !(a.is_finite() && a >= 0.0) {
                return Err(config_err(format!("alpha must be non-negative and finite, got {a}")));
            }
        }
        if let Some(s) = &cfg.sweep {
            if !(s.from.is_finite() && s.to.is_finite()) {
                return Err(config_err("sweep bounds must be finite"));
            }
            if s.steps < 2 {
                return Err(config_err(format!("sweep needs at least 2 steps, got {}", s.steps)));
            }
        }
        if let Some(r) = cfg.r_star {
            if !r.is_finite() {
                return Err(config_err("r_star must be finite"));
            }
        }
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let params = self.market.params()?;
        match (self.alpha, &self.belief) {
            (Some(alpha), None) => Ok(Scenario::Complete { alpha, params }),
            (None, Some(belief)) => Ok(Scenario::Incomplete { problem: bayes_problem(belief, &params)?, params }),
            _ => Err(config_err("exactly one of `alpha` and `belief` must be given")),
        }
    }
}

fn bayes_problem(belief: &DemandBelief, params: &MarketParams) -> Result<BayesProblem, CliError> {
    if !params.is_symmetric() {
        return Err(config_err("a demand belief requires identical capacities (`T`)"));
    }
    Ok(BayesProblem::new(belief.clone(), params.t1, params.c, params.n)?)
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SupplierReport {
    Complete(SupplierSolution),
    Bayesian(FixedPointResult),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub market: MarketParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub belief: Option<DemandBelief>,
    pub supplier: SupplierReport,
    /// Retailer equilibrium at `w*`; under incomplete information evaluated at `α = E[α]`.
    pub retailers: RetailerOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inefficiency: Option<InefficiencyReport>,
}

/// Solve a scenario. `Ok` carries the report and its exit code (2 for an
/// indifferent complete-information supplier).
pub fn solve(scenario: &Scenario) -> Result<(SolveReport, i32), CliError> {
    match scenario {
        Scenario::Complete { alpha, params } => {
            let sol = optimal_margin_general(*alpha, params)?;
            let retailers = equilibrium(*alpha, sol.w_star, params)?;
            let code = if sol.regime == SupplierRegime::Indifferent { EXIT_TRIVIAL } else { EXIT_OK };
            let report = SolveReport {
                market: *params,
                alpha: Some(*alpha),
                belief: None,
                supplier: SupplierReport::Complete(sol),
                retailers,
                inefficiency: None,
            };
            Ok((report, code))
        }
        Scenario::Incomplete { problem, params } => {
            let sol = solve_equilibrium(problem)?;
            let retailers = equilibrium(problem.belief.mean(), sol.w_star, params)?;
            let report = SolveReport {
                market: *params,
                alpha: None,
                belief: Some(problem.belief.clone()),
                inefficiency: Some(inefficiency(problem, &sol)),
                supplier: SupplierReport::Bayesian(sol),
                retailers,
            };
            Ok((report, EXIT_OK))
        }
    }
}

/// One CSV row. Numeric fields are empty for failed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub r_star: Option<f64>,
    pub w_star: Option<f64>,
    pub payoff: Option<f64>,
    pub regime: String,
    pub p_conditional: Option<f64>,
}

impl SweepRow {
    fn error(param: f64) -> Self {
        Self { param, r_star: None, w_star: None, payoff: None, regime: "error".into(), p_conditional: None }
    }
}

fn branch_label(b: FixedPointBranch) -> &'static str {
    match b {
        FixedPointBranch::ExplicitLowDemandSpread => "explicit",
        FixedPointBranch::InteriorFixedPoint => "interior",
    }
}

fn sweep_point(cfg: &MarketConfigFile, base: &MarketParams, vary: SweepVar, value: f64) -> SweepRow {
    let mut params = *base;
    match vary {
        SweepVar::Alpha => {}
        SweepVar::Capacity => {
            params.t1 = value;
            params.t2 = value;
        }
        SweepVar::Cost => params.c = value,
    }
    if params.validate().is_err() {
        return SweepRow::error(value);
    }
    match &cfg.belief {
        None => {
            let alpha = if vary == SweepVar::Alpha { value } else { cfg.alpha.unwrap_or(f64::NAN) };
            match optimal_margin_general(alpha, &params) {
                Ok(s) => SweepRow {
                    param: value,
                    r_star: Some(s.r_star),
                    w_star: Some(s.w_star),
                    payoff: Some(s.payoff),
                    regime: s.regime.label().into(),
                    p_conditional: None,
                },
                Err(_) => SweepRow::error(value),
            }
        }
        Some(belief) => {
            let problem = match BayesProblem::new(belief.clone(), params.t1, params.c, params.n) {
                Ok(p) => p,
                Err(_) => return SweepRow::error(value),
            };
            match solve_equilibrium(&problem) {
                Ok(s) => SweepRow {
                    param: value,
                    r_star: Some(s.r_star),
                    w_star: Some(s.w_star),
                    payoff: Some(s.expected_payoff),
                    regime: branch_label(s.branch).into(),
                    p_conditional: inefficiency(&problem, &s).p_conditional,
                },
                // same convention as the complete-information indifferent regime
                Err(BayesError::Trivial { .. }) => SweepRow {
                    param: value,
                    r_star: Some(0.0),
                    w_star: Some(params.c),
                    payoff: Some(0.0),
                    regime: SupplierRegime::Indifferent.label().into(),
                    p_conditional: None,
                },
                Err(_) => SweepRow::error(value),
            }
        }
    }
}

/// Evaluate every sweep point on up to `jobs` threads; rows come back in grid order.
pub fn sweep_rows(cfg: &MarketConfigFile, jobs: Option<usize>) -> Result<Vec<SweepRow>, CliError> {
    let spec = cfg.sweep.ok_or_else(|| config_err("`sweep` block is required"))?;
    let base = cfg.market.params()?;
    match (spec.vary, cfg.alpha, &cfg.belief) {
        (SweepVar::Alpha, _, Some(_)) => return Err(config_err("cannot vary alpha with a demand belief")),
        (SweepVar::Alpha, _, None) => {}
        (_, Some(_), None) | (_, None, Some(_)) => {}
        _ => return Err(config_err("exactly one of `alpha` and `belief` must be given")),
    }
    if spec.vary == SweepVar::Capacity && !base.is_symmetric() {
        return Err(config_err("varying `T` requires identical capacities"));
    }
    if cfg.belief.is_some() && !base.is_symmetric() {
        return Err(config_err("a demand belief requires identical capacities (`T`)"));
    }
    let grid = spec.grid();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(config_err)?;
    Ok(pool.install(|| grid.par_iter().map(|&v| sweep_point(cfg, &base, spec.vary, v)).collect()))
}

/// CSV with a `.`-decimal point and LF line endings.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["param", "r_star", "w_star", "payoff", "regime", "p_conditional"])?;
    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.param.to_string(), num(r.r_star), num(r.w_star), num(r.payoff), r.regime.clone(), num(r.p_conditional)])?;
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub ok: bool,
    /// Measured discrepancy (or value) the check compares against `limit`.
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub r_star: f64,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.ok).map(|c| c.name.to_string()).collect()
    }
}

fn check(name: &'static str, value: f64, limit: f64, detail: String) -> CheckOutcome {
    CheckOutcome { name, ok: value <= limit, value, limit, detail }
}

/// Run the oracle suite against the solver's answer, or against `r_star` when
/// the config supplies one.
pub fn verify(cfg: &MarketConfigFile, oracle: &OracleConfig) -> Result<VerifyReport, CliError> {
    let tol = oracle.tolerance_abs;
    let mut checks = Vec::new();
    let r_star;
    match cfg.scenario()? {
        Scenario::Complete { alpha, params } => {
            let sol = optimal_margin_general(alpha, &params)?;
            r_star = cfg.r_star.unwrap_or(sol.r_star);
            let w = r_star + params.c;
            if r_star < 0.0 {
                return Err(config_err("r_star must be non-negative"));
            }
            let outcome = equilibrium(alpha, w, &params)?;
            let nash = verify_nash(alpha, w, &params, &outcome, oracle);
            checks.push(check("nash", nash.max_gain, tol, format!("largest unilateral gain at w = {w}")));

            let payoff = |r: f64| supplier_payoff_on_path(r, alpha, &params).unwrap_or(f64::NEG_INFINITY);
            let here = payoff(r_star);
            let r_hi = alpha - params.c;
            if r_hi > 0.0 {
                let (r_grid, best) = grid_argmax_margin(payoff, 0.0, r_hi, &oracle.with_grid(10_000));
                checks.push(check(
                    "margin",
                    best - here,
                    tol,
                    format!("grid optimum {best} at r = {r_grid}; payoff {here} at r* = {r_star}"),
                ));
            } else {
                checks.push(check("margin", here.abs(), tol, "indifferent: every margin earns 0".into()));
            }
        }
        Scenario::Incomplete { problem, params } => {
            let sol = solve_equilibrium(&problem)?;
            r_star = cfg.r_star.unwrap_or(sol.r_star);
            let w = r_star + params.c;
            let alpha = problem.belief.mean();
            let outcome = equilibrium(alpha, w.max(0.0), &params)?;
            let nash = verify_nash(alpha, w.max(0.0), &params, &outcome, oracle);
            checks.push(check("nash", nash.max_gain, tol, format!("largest unilateral gain at alpha = E[alpha] = {alpha}")));

            let r_hi = search_top(&problem);
            let (r_grid, best) = grid_argmax_margin(|r| problem.expected_payoff(r), 0.0, r_hi, &oracle.with_grid(10_000));
            let here = problem.expected_payoff(r_star);
            checks.push(check(
                "margin",
                best - here,
                tol,
                format!("grid optimum {best} at r = {r_grid}; payoff {here} at r* = {r_star}"),
            ));

            let worst = derivative_mismatch(&problem, r_hi, 25);
            checks.push(check("derivative", worst, 1e-5, "worst relative gap to central differences (h = 1e-6)".into()));

            let mut rep = inefficiency(&problem, &sol);
            if cfg.r_star.is_some() {
                let injected = FixedPointResult { r_star, ..sol.clone() };
                rep = inefficiency(&problem, &injected);
            }
            let dmrl = sol.dmrl;
            let p = rep.p_conditional.unwrap_or(0.0);
            let equality = (p - dmrl_bound()).abs() <= 1e-9;
            checks.push(CheckOutcome {
                name: "bound",
                ok: bound_check(&rep, dmrl),
                value: p,
                limit: dmrl_bound(),
                detail: match (dmrl, equality) {
                    (false, _) => "belief is not DMRL; bound not required".into(),
                    (true, true) => "P(V|U) attains 1 - 1/e".into(),
                    (true, false) => "P(V|U) below 1 - 1/e".into(),
                },
            });

            let mc = mc_expected_payoff(&problem.belief, problem.capacity, problem.c, problem.n, r_star, oracle);
            let gap = (mc.estimate - here).abs();
            checks.push(check(
                "monte_carlo",
                gap,
                4.0 * mc.std_error + 1e-12,
                format!("{} samples, estimate {} +/- {}", mc.samples, mc.estimate, mc.std_error),
            ));
        }
    }
    let passed = checks.iter().all(|c| c.ok);
    Ok(VerifyReport { r_star, passed, checks })
}

/// Upper end of a margin search: `r_H`, or for unbounded support the larger of
/// a far quantile and 40 mean residual lives past `(n+1)T + c`.
pub fn search_top(problem: &BayesProblem) -> f64 {
    let r_high = problem.r_high();
    if r_high.is_finite() {
        r_high
    } else {
        let shift = problem.shift();
        (problem.belief.quantile(1.0 - 1e-8) - shift).max(40.0 * problem.belief.mrl(shift))
    }
}

/// Worst gap between `payoff_derivative` and central differences over `points`
/// interior margins, measured as `|fd - d| / (|d| + 1e-4)`: at a limit of `1e-5`
/// this is a relative tolerance with a `1e-9` absolute floor where `d` vanishes.
/// The step is `1e-6`, scaled by `r` once `r > 1`.
pub fn derivative_mismatch(problem: &BayesProblem, r_hi: f64, points: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..points {
        let r = r_hi * (i as f64 + 0.5) / points as f64;
        let h = 1e-6 * r.max(1.0);
        if r <= h || r + h >= problem.r_high() {
            continue;
        }
        let Ok(d) = problem.payoff_derivative(r) else { continue };
        let fd = (problem.expected_payoff(r + h) - problem.expected_payoff(r - h)) / (2.0 * h);
        worst = worst.max((fd - d).abs() / (d.abs() + 1e-4));
    }
    worst
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|source| CliError::Io { path: path.into(), source })?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into());
    let io_err = |source| CliError::Io { path: path.clone(), source };
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err)
}

pub fn cmd_solve(config: &Path, out: Option<&Path>) -> Result<i32, CliError> {
    let cfg = MarketConfigFile::load(config)?;
    let (report, code) = solve(&cfg.scenario()?)?;
    write_json(&report, out)?;
    if code == EXIT_TRIVIAL {
        eprintln!("trivial market: the supplier is indifferent between all prices w >= c");
    }
    Ok(code)
}

pub fn cmd_sweep(config: &Path, out: Option<&Path>, jobs: Option<usize>) -> Result<i32, CliError> {
    let cfg = MarketConfigFile::load(config)?;
    let rows = sweep_rows(&cfg, jobs)?;
    let vary = cfg.sweep.map(|s| s.vary).unwrap_or(SweepVar::Alpha);
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into());
    write_sweep_csv(&rows, open_output(out)?).map_err(|source| CliError::Io { path, source })?;
    let failed = rows.iter().filter(|r| r.regime == "error").count();
    if failed > 0 {
        eprintln!("{failed} of {} {} points failed", rows.len(), vary.name());
    }
    Ok(EXIT_OK)
}

/// `seed` from the command line wins over the config file; both default to 0.
pub fn cmd_verify(config: &Path, out: Option<&Path>, tolerance: f64, seed: Option<u64>) -> Result<i32, CliError> {
    let cfg = MarketConfigFile::load(config)?;
    let oracle = OracleConfig::default().with_tolerance(tolerance).with_seed(seed.or(cfg.seed).unwrap_or(0));
    let report = verify(&cfg, &oracle)?;
    write_json(&report, out)?;
    if report.passed {
        Ok(EXIT_OK)
    } else {
        for c in report.checks.iter().filter(|c| !c.ok) {
            eprintln!("check `{}` failed: {} > {} ({})", c.name, c.value, c.limit, c.detail);
        }
        Err(CliError::Mismatch(report.failed()))
    }
}

/// Dispatch a parsed command line and map the result to an exit code.
pub fn run(cli: Cli) -> i32 {
    let out = cli.out.as_deref();
    let result = match &cli.command {
        Command::Solve { config } => cmd_solve(config, out),
        Command::Sweep { config } => cmd_sweep(config, out, cli.jobs),
        Command::Verify { config } => cmd_verify(config, out, cli.tolerance, cli.seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
