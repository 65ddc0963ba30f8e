//! `bdchain` command line: analyze, verify, simulate, criterion.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analytics::{self, CriterionVerdict, ExtinctionProbability, TailKind};
use crate::chain::ChainSpec;
use crate::error::{AnalyticsError, SimError, SpecError};
use crate::montecarlo::{self, RuleFamily, SimOptions};
use crate::number::{ExtendedValue, Scalar};
use crate::oracle::{self, TruncatedChainModel};
use crate::report::{self, block, exact_bound, extended_json, finite_json, scalar_json, Provenance, Report, Status};
use crate::spec_io;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;
/// Depth to which chain specs are checked for valid probabilities.
const VALIDATION_DEPTH: u64 = 10_000;
/// Largest `b` in the exit-probability grid of `verify`.
const EXIT_GRID_MAX: u64 = 50;
/// Horizons of the stopping-identity and monotonicity checks.
const VERIFY_HORIZONS: [u64; 3] = [10, 100, 1000];
/// Exact arithmetic is used for evolutions up to this many steps.
const EXACT_EVOLUTION_LIMIT: u64 = 100;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("cannot read chain spec {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

#[derive(Parser, Debug, Clone)]
#[command(name = "bdchain", version, about = "Birth-death chain analytics, oracles and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Ratio table, tail class, extinction probability and limit expectation.
    Analyze(AnalyzeArgs),
    /// Compare every closed form against the brute-force oracles.
    Verify(VerifyArgs),
    /// Monte Carlo sweep of the stopped expectation along a grid.
    Simulate(SimulateArgs),
    /// Summability criterion for |1 - l_n/r_n|.
    Criterion(CriterionArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stopping {
    Truncation,
    IntervalExit,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Chain spec: a JSON file path, or an inline JSON object.
    #[arg(long)]
    pub chain: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of ratio-table and occupation entries to print.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub table_len: u64,
    /// Upper level of the exit-probability interval (default 2k).
    #[arg(long)]
    pub exit_b: Option<u64>,
    /// Terms used by numeric series and tail classification.
    #[arg(long, default_value_t = analytics::DEFAULT_HORIZON, value_parser = clap::value_parser!(u64).range(10..))]
    pub horizon: u64,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest truncation level of the occupation convergence check.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
    pub oracle_n: u64,
    /// Absolute tolerance for floating-point checks.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Strictly increasing comma-separated grid of m (or b for interval-exit).
    #[arg(long, default_value = "10,100,1000", value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub m_grid: Vec<u64>,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub paths: u64,
    #[arg(long, value_enum, default_value_t = Stopping::Truncation)]
    pub stopping: Stopping,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Paths still running after this many steps are dropped and reported.
    #[arg(long, default_value_t = montecarlo::DEFAULT_STEP_CAP, value_parser = clap::value_parser!(u64).range(1..))]
    pub step_cap: u64,
}

#[derive(Args, Debug, Clone)]
pub struct CriterionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of terms in the partial sum.
    #[arg(long, default_value_t = analytics::DEFAULT_HORIZON, value_parser = clap::value_parser!(u64).range(10..))]
    pub horizon: u64,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (common, result) = match &cli.command {
        Command::Analyze(a) => (&a.common, cmd_analyze(a)),
        Command::Verify(a) => (&a.common, cmd_verify(a)),
        Command::Simulate(a) => (&a.common, cmd_simulate(a)),
        Command::Criterion(a) => (&a.common, cmd_criterion(a)),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Err(e) = emit(&report, common) {
        eprintln!("error: {e}");
        return 1;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(failed) = report.results.get("checks").and_then(Value::as_array) {
        for check in failed.iter().filter(|c| c["passed"] == json!(false)) {
            eprintln!(
                "check failed: {}: {}",
                check["name"].as_str().unwrap_or("?"),
                check["detail"].as_str().unwrap_or("")
            );
        }
    }
    report.status.exit_code()
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}

fn emit(report: &Report, common: &CommonArgs) -> Result<(), CliError> {
    let text = render(report, common.format);
    match &common.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Write { path: path.display().to_string(), reason: e.to_string() }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Write { path: "stdout".into(), reason: e.to_string() }),
    }
}

/// Loads a chain from a path, or parses it directly when the argument is a JSON object.
pub fn load_chain(reference: &str) -> Result<ChainSpec, CliError> {
    let document = if reference.trim_start().starts_with('{') {
        reference.to_string()
    } else {
        fs::read_to_string(reference).map_err(|e| CliError::Read { path: reference.into(), reason: e.to_string() })?
    };
    let spec = spec_io::parse_spec(&document)?;
    let validation = spec.validate(VALIDATION_DEPTH);
    if let Some(v) = validation.violation {
        return Err(CliError::Config(format!("chain is invalid at state {}: {}", v.state, v.kind)));
    }
    Ok(spec)
}

fn common_config(common: &CommonArgs) -> Value {
    let chain = if common.chain.trim_start().starts_with('{') { "inline".to_string() } else { common.chain.clone() };
    json!({
        "chain": chain,
        "format": match common.format { Format::Json => "json", Format::Csv => "csv" },
        "seed": common.seed,
    })
}

fn with_fields(mut base: Value, fields: Value) -> Value {
    if let (Value::Object(b), Value::Object(f)) = (&mut base, fields) {
        b.extend(f);
    }
    base
}

fn new_report(command: &str, common: &CommonArgs, extra: Value, spec: &ChainSpec) -> Report {
    Report::new(command, with_fields(common_config(common), extra), spec_io::spec_to_value(spec))
}

fn tail_json(kind: &TailKind) -> Value {
    match kind {
        TailKind::PositiveFinite(v) => json!({"class": "positive-finite", "limit": report::number_json(v)}),
        TailKind::Zero => json!({"class": "zero"}),
        TailKind::Infinite => json!({"class": "infinite"}),
        TailKind::Undetermined => json!({"class": "undetermined"}),
    }
}

fn extinction_json(ext: &ExtinctionProbability) -> Value {
    match ext {
        ExtinctionProbability::ClosedForm { value, reason } => {
            let bound = if value.is_exact() { json!("exact") } else { json!("double precision") };
            with_fields(
                block(Provenance::Analytic, report::number_json(value), bound),
                json!({"method": "closed-form", "reason": reason}),
            )
        }
        ExtinctionProbability::Series { value, tail_bound, terms, reason } => with_fields(
            block(Provenance::Analytic, json!({"approx": finite_json(*value)}), finite_json(*tail_bound)),
            json!({"method": "series", "terms": terms, "reason": reason}),
        ),
        ExtinctionProbability::Inconclusive(reason) => with_fields(
            block(Provenance::Analytic, Value::Null, Value::Null),
            json!({"method": "inconclusive", "reason": reason}),
        ),
    }
}

fn limit_json<S: Scalar>(limit: &Result<ExtendedValue<S>, AnalyticsError>) -> Value {
    match limit {
        Ok(v) => block(Provenance::Analytic, extended_json(v), exact_bound::<S>()),
        Err(e) => with_fields(block(Provenance::Analytic, Value::Null, Value::Null), json!({"refused": e.to_string()})),
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Report, CliError> {
    let spec = load_chain(&args.common.chain)?;
    let k = spec.start_state();
    let exit_b = args.exit_b.unwrap_or(2 * k);
    if exit_b <= k {
        return Err(CliError::Config(format!("--exit-b must exceed the start state {k}, got {exit_b}")));
    }
    let extra = json!({"table_len": args.table_len, "exit_b": exit_b, "horizon": args.horizon});
    let mut report = new_report("analyze", &args.common, extra, &spec);
    if spec.is_exact() {
        analyze_with::<BigRational>(&spec, args, exit_b, &mut report)?;
    } else {
        analyze_with::<f64>(&spec, args, exit_b, &mut report)?;
    }
    Ok(report)
}

fn analyze_with<S: Scalar>(
    spec: &ChainSpec,
    args: &AnalyzeArgs,
    exit_b: u64,
    report: &mut Report,
) -> Result<(), CliError> {
    let k = spec.start_state();
    let bound = exact_bound::<S>();

    let (t, x) = analytics::ratio_sequences::<S>(spec, args.table_len)?;
    report.insert(
        "ratio_table",
        json!({
            "provenance": Provenance::Analytic.as_str(),
            "error_bound": bound,
            "t": t.iter().map(scalar_json).collect::<Vec<_>>(),
            "x": x.iter().map(scalar_json).collect::<Vec<_>>(),
        }),
    );

    let tail = analytics::classify_tail(spec, analytics::DEFAULT_TAIL_TOLERANCE, args.horizon);
    report.insert(
        "tail_class",
        with_fields(tail_json(&tail.kind), json!({"provenance": "analytic", "evidence": tail.evidence})),
    );

    let ext = analytics::extinction_probability(spec, args.horizon, analytics::DEFAULT_TAIL_TOLERANCE);
    report.insert("extinction_probability", extinction_json(&ext));

    let (hit_zero, hit_b) = analytics::exit_probabilities::<S>(spec, 0, k, exit_b)?;
    report.insert(
        "exit_probabilities",
        json!({
            "provenance": "analytic",
            "error_bound": bound,
            "interval": [0, exit_b],
            "start": k,
            "hit_lower": scalar_json(&hit_zero),
            "hit_upper": scalar_json(&hit_b),
        }),
    );

    match analytics::occupation_profile_until_extinction::<S>(spec, args.table_len.max(k)) {
        Ok(profile) => report.insert(
            "occupation",
            json!({
                "provenance": "analytic",
                "error_bound": bound,
                "regime": "until-extinction",
                "values": profile.values.iter().enumerate()
                    .map(|(i, g)| json!({"state": i + 1, "expected_visits": scalar_json(g)}))
                    .collect::<Vec<_>>(),
            }),
        ),
        Err(e) => {
            report.insert("occupation", json!({"provenance": "analytic", "refused": e.to_string()}));
            if matches!(e, AnalyticsError::Inconclusive(_)) {
                report.status = Status::Inconclusive;
            }
        }
    }

    let limit = analytics::limit_expectation::<S>(spec);
    if let Err(e) = &limit {
        report.warn(format!("limit expectation refused: {e}"));
        report.status = Status::Inconclusive;
    }
    report.insert("limit_expectation", limit_json(&limit));
    if matches!(ext, ExtinctionProbability::Inconclusive(_)) {
        report.status = Status::Inconclusive;
    }
    Ok(())
}

/// One oracle-vs-analytics comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub mode: &'static str,
    pub cases: u64,
    pub max_abs_discrepancy: f64,
    /// `None` when the check was skipped.
    pub passed: Option<bool>,
    pub detail: String,
    /// Per-horizon outcomes when several runs were merged.
    pub parts: Vec<CheckOutcome>,
}

impl CheckOutcome {
    fn to_value(&self, tol: f64) -> Value {
        let mut value = json!({
            "name": self.name,
            "provenance": "oracle",
            "mode": self.mode,
            "cases": self.cases,
            "max_abs_discrepancy": finite_json(self.max_abs_discrepancy),
            "tolerance": if self.mode == "exact" { json!("exact") } else { json!(tol) },
            "passed": self.passed,
            "detail": self.detail,
        });
        if !self.parts.is_empty() {
            value["parts"] = Value::Array(self.parts.iter().map(|p| p.to_value(tol)).collect());
        }
        value
    }

    fn failed(name: &str, mode: &'static str, detail: String) -> Self {
        Self {
            name: name.into(),
            mode,
            cases: 0,
            max_abs_discrepancy: f64::NAN,
            passed: Some(false),
            detail,
            parts: Vec::new(),
        }
    }
}

fn mode_name<S: Scalar>() -> &'static str {
    if S::EXACT {
        "exact"
    } else {
        "float"
    }
}

fn within<S: Scalar>(diff: &S, tol: f64) -> bool {
    if S::EXACT {
        diff.is_zero()
    } else {
        diff.to_f64().abs() <= tol
    }
}

/// Analytic exit probabilities against first-step recursion for every `(0, start, b)`, `b <= max_b`.
pub fn check_exit_probabilities<S: Scalar>(spec: &ChainSpec, max_b: u64, tol: f64) -> CheckOutcome {
    let name = "exit-probabilities";
    let mut worst = 0.0_f64;
    let mut cases = 0;
    let mut offending = None;
    for b in 2..=max_b {
        let model = match TruncatedChainModel::<S>::from_spec(spec, b as usize) {
            Ok(m) => m,
            Err(e) => return CheckOutcome::failed(name, mode_name::<S>(), e.to_string()),
        };
        let hits = match oracle::exit_probs_all_starts(&model) {
            Ok(h) => h,
            Err(e) => return CheckOutcome::failed(name, mode_name::<S>(), e.to_string()),
        };
        let table = match analytics::exit_probability_table::<S>(spec, b) {
            Ok(v) => v,
            Err(e) => return CheckOutcome::failed(name, mode_name::<S>(), e.to_string()),
        };
        for start in 1..b {
            let analytic_zero = table[start as usize - 1].0.clone();
            let diff = analytic_zero - hits[start as usize - 1].0.clone();
            cases += 1;
            worst = worst.max(diff.to_f64().abs());
            if offending.is_none() && !within(&diff, tol) {
                offending = Some((start, b));
            }
        }
    }
    let detail = match offending {
        Some((start, b)) => format!("first mismatch at start={start}, b={b}"),
        None => format!("all (0, start, b) with b <= {max_b} agree"),
    };
    CheckOutcome {
        name: name.into(),
        mode: mode_name::<S>(),
        cases,
        max_abs_discrepancy: worst,
        passed: Some(offending.is_none()),
        detail,
        parts: Vec::new(),
    }
}

/// Fundamental-matrix occupation at increasing truncation levels: monotone in
/// `N` and bounded by the until-extinction formula.
pub fn check_occupation_convergence(spec: &ChainSpec, levels: &[u64], tol: f64) -> CheckOutcome {
    let name = "occupation-convergence";
    let k = spec.start_state();
    let mut levels: Vec<u64> = levels.iter().copied().filter(|&n| n > k && n >= 2).collect();
    levels.sort_unstable();
    levels.dedup();
    if levels.is_empty() {
        return CheckOutcome {
            passed: None,
            ..CheckOutcome::failed(name, "float", format!("no truncation level above k={k}"))
        };
    }
    let states = levels[0] - 1;
    let formula = match analytics::occupation_profile_until_extinction::<f64>(spec, states) {
        Ok(p) => p,
        Err(e @ (AnalyticsError::Transient | AnalyticsError::Inconclusive(_))) => {
            return CheckOutcome {
                passed: None,
                cases: 0,
                ..CheckOutcome::failed(name, "float", format!("skipped: {e}"))
            };
        }
        Err(e) => return CheckOutcome::failed(name, "float", e.to_string()),
    };
    let mut previous: Option<Vec<f64>> = None;
    let mut problem = None;
    let mut worst_gap = 0.0_f64;
    let mut cases = 0;
    for &level in &levels {
        let profile = match TruncatedChainModel::<f64>::from_spec(spec, level as usize)
            .and_then(|m| oracle::occupation_by_fundamental_matrix(&m, k as usize))
        {
            Ok(p) => p,
            Err(e) => return CheckOutcome::failed(name, "float", format!("N={level}: {e}")),
        };
        let values = profile.values[..states as usize].to_vec();
        worst_gap = 0.0;
        for (i, (&g, &limit)) in values.iter().zip(&formula.values).enumerate() {
            cases += 1;
            worst_gap = worst_gap.max((limit - g).abs());
            if problem.is_none() && g > limit * (1.0 + tol) {
                problem = Some(format!("N={level}, state {}: {g} exceeds formula {limit}", i + 1));
            }
            if let Some(prev) = &previous {
                if problem.is_none() && g < prev[i] * (1.0 - tol) {
                    problem = Some(format!("N={level}, state {}: {g} below value {} at smaller N", i + 1, prev[i]));
                }
            }
        }
        previous = Some(values);
    }
    let largest = levels[levels.len() - 1];
    CheckOutcome {
        name: name.into(),
        mode: "float",
        cases,
        max_abs_discrepancy: worst_gap,
        passed: Some(problem.is_none()),
        detail: problem.unwrap_or_else(|| {
            format!("monotone in N over {levels:?} and bounded by the formula; gap at N={largest} is truncation error")
        }),
        parts: Vec::new(),
    }
}

/// Stopped expectation from distribution evolution against `k + Σ G_n (r_n - l_n)`
/// built from the same evolution, plus strict decrease of `G_n t_{n-1} l_n` for `n >= k`.
pub fn check_evolution<S: Scalar>(spec: &ChainSpec, m: u64, tol: f64) -> (CheckOutcome, CheckOutcome) {
    let identity = "stopping-identity";
    let monotone = "normalized-monotonicity";
    let k = spec.start_state();
    let level = oracle::non_binding_level(k, m);
    let evolution = match TruncatedChainModel::<S>::from_spec(spec, level)
        .and_then(|model| oracle::evolve_distribution(&model, k as usize, m))
    {
        Ok(e) => e,
        Err(e) => {
            let msg = format!("m={m}: {e}");
            return (
                CheckOutcome::failed(identity, mode_name::<S>(), msg.clone()),
                CheckOutcome::failed(monotone, mode_name::<S>(), msg),
            );
        }
    };
    let expected = oracle::expected_value_of(&evolution.distribution);
    let identity_outcome = match analytics::stopping_identity_rhs(&evolution.occupation, spec) {
        Ok(rhs) => {
            let diff = expected.clone() - rhs;
            let ok = within(&diff, tol);
            CheckOutcome {
                name: identity.into(),
                mode: mode_name::<S>(),
                cases: 1,
                max_abs_discrepancy: diff.to_f64().abs(),
                passed: Some(ok),
                detail: format!("m={m}: E[X_(m^T)] = {}", expected.to_f64()),
                parts: Vec::new(),
            }
        }
        Err(e) => CheckOutcome::failed(identity, mode_name::<S>(), format!("m={m}: {e}")),
    };
    let monotone_outcome = match analytics::monotonicity_violation(&evolution.occupation, spec) {
        Ok(None) => CheckOutcome {
            name: monotone.into(),
            mode: mode_name::<S>(),
            cases: evolution.occupation.max_state(),
            max_abs_discrepancy: 0.0,
            passed: Some(true),
            detail: format!("m={m}: strictly decreasing for n >= {k} where positive"),
            parts: Vec::new(),
        },
        Ok(Some(n)) => CheckOutcome {
            max_abs_discrepancy: 0.0,
            ..CheckOutcome::failed(
                monotone,
                mode_name::<S>(),
                format!("m={m}: not strictly decreasing between states {n} and {}", n + 1),
            )
        },
        Err(e) => CheckOutcome::failed(monotone, mode_name::<S>(), format!("m={m}: {e}")),
    };
    (identity_outcome, monotone_outcome)
}

/// Merges per-horizon outcomes of one check into a single entry.
fn merge(name: &str, parts: Vec<CheckOutcome>) -> CheckOutcome {
    let failed: Vec<&CheckOutcome> = parts.iter().filter(|p| p.passed == Some(false)).collect();
    let modes: Vec<&str> = parts.iter().map(|p| p.mode).collect();
    let mode = if modes.iter().all(|m| *m == "exact") {
        "exact"
    } else if modes.iter().all(|m| *m == "float") {
        "float"
    } else {
        "mixed"
    };
    CheckOutcome {
        name: name.into(),
        mode,
        cases: parts.iter().map(|p| p.cases).sum(),
        max_abs_discrepancy: parts.iter().map(|p| p.max_abs_discrepancy).fold(0.0, f64::max),
        passed: Some(failed.is_empty()),
        detail: if failed.is_empty() {
            parts.iter().map(|p| p.detail.as_str()).collect::<Vec<_>>().join("; ")
        } else {
            failed.iter().map(|p| p.detail.as_str()).collect::<Vec<_>>().join("; ")
        },
        parts,
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Report, CliError> {
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(CliError::Config(format!("--tol must be positive, got {}", args.tol)));
    }
    let spec = load_chain(&args.common.chain)?;
    let extra = json!({"oracle_n": args.oracle_n, "tol": args.tol});
    let mut report = new_report("verify", &args.common, extra, &spec);
    let exact = spec.is_exact();
    let max_b = EXIT_GRID_MAX.min(args.oracle_n);

    let mut checks = Vec::new();
    checks.push(if exact {
        check_exit_probabilities::<BigRational>(&spec, max_b, args.tol)
    } else {
        check_exit_probabilities::<f64>(&spec, max_b, args.tol)
    });

    let n = args.oracle_n;
    checks.push(check_occupation_convergence(&spec, &[n / 100, n / 10, n], args.tol));

    let mut identities = Vec::new();
    let mut monotones = Vec::new();
    for m in VERIFY_HORIZONS {
        let (identity, monotone) = if exact && m <= EXACT_EVOLUTION_LIMIT {
            check_evolution::<BigRational>(&spec, m, args.tol)
        } else {
            check_evolution::<f64>(&spec, m, args.tol)
        };
        identities.push(identity);
        monotones.push(monotone);
    }
    checks.push(merge("stopping-identity", identities));
    checks.push(merge("normalized-monotonicity", monotones));

    for c in checks.iter().filter(|c| c.passed.is_none()) {
        report.warn(format!("{}: {}", c.name, c.detail));
    }
    if checks.iter().any(|c| c.passed == Some(false)) {
        report.status = Status::VerificationFailed;
    }
    report.insert("checks", Value::Array(checks.iter().map(|c| c.to_value(args.tol)).collect()));
    Ok(report)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Report, CliError> {
    let spec = load_chain(&args.common.chain)?;
    let family = match args.stopping {
        Stopping::Truncation => RuleFamily::Truncation,
        Stopping::IntervalExit => RuleFamily::IntervalExit,
    };
    let extra = json!({
        "m_grid": args.m_grid,
        "paths": args.paths,
        "stopping": match args.stopping { Stopping::Truncation => "truncation", Stopping::IntervalExit => "interval-exit" },
        "step_cap": args.step_cap,
    });
    let mut report = new_report("simulate", &args.common, extra, &spec);
    let options = SimOptions { workers: args.workers as usize, step_cap: args.step_cap };
    let sweep = montecarlo::convergence_sweep(&spec, family, &args.m_grid, args.paths, args.common.seed, options)
        .map_err(|e| match e {
            SimError::InvalidArgument(msg) => CliError::Config(msg),
            other => CliError::Simulation(other),
        })?;

    let limit_cell = match &sweep.analytic_limit {
        Ok(ExtendedValue::Finite(v)) => format!("{v:?}"),
        Ok(ExtendedValue::PosInfinity) => "inf".to_string(),
        Err(_) => String::new(),
    };
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    for (&m, est) in sweep.grid.iter().zip(&sweep.rows) {
        if est.cap_hits > 0 {
            report.warn(format!(
                "m={m}: {} of {} paths hit the step cap {} and were excluded",
                est.cap_hits, args.paths, args.step_cap
            ));
        }
        rows.push(json!({
            "m": m,
            "rule": est.rule.to_string(),
            "mean": finite_json(est.mean),
            "ci_half_width": finite_json(est.half_width_95),
            "paths": est.paths,
            "cap_hits": est.cap_hits,
        }));
        csv_rows.push(vec![
            m.to_string(),
            format!("{:?}", est.mean),
            format!("{:?}", est.half_width_95),
            limit_cell.clone(),
        ]);
    }
    report.insert(
        "sweep",
        json!({"provenance": "monte-carlo", "error_bound": "95% normal confidence interval", "seed": args.common.seed, "rows": rows}),
    );
    let limit = sweep.analytic_limit.as_ref().map_err(|e| AnalyticsError::UndeterminedTail(e.clone()));
    let limit_block = match &limit {
        Ok(v) => block(Provenance::Analytic, extended_json(*v), json!("double precision")),
        Err(e) => with_fields(block(Provenance::Analytic, Value::Null, Value::Null), json!({"refused": e.to_string()})),
    };
    if let Err(e) = &sweep.analytic_limit {
        report.warn(format!("analytic limit unavailable: {e}"));
    }
    report.insert("analytic_limit", limit_block);
    report.rows =
        Some((["m", "mean", "ci_half_width", "analytic_limit"].iter().map(|s| s.to_string()).collect(), csv_rows));
    Ok(report)
}

pub fn cmd_criterion(args: &CriterionArgs) -> Result<Report, CliError> {
    let spec = load_chain(&args.common.chain)?;
    let mut report = new_report("criterion", &args.common, json!({"horizon": args.horizon}), &spec);
    let verdict = analytics::convergence_criterion(&spec, args.horizon)?;
    report.insert(
        "criterion",
        json!({
            "provenance": "analytic",
            "verdict": verdict.verdict.to_string(),
            "partial_sum": finite_json(verdict.partial_sum),
            "terms": verdict.terms,
            "error_bound": "partial sum in double precision; tail not included",
            "evidence": verdict.evidence,
        }),
    );
    match verdict.verdict {
        CriterionVerdict::Satisfied => {
            let value = if spec.is_exact() {
                limit_json(&analytics::limit_expectation::<BigRational>(&spec))
            } else {
                limit_json(&analytics::limit_expectation::<f64>(&spec))
            };
            report.insert("limit_expectation", value);
        }
        CriterionVerdict::Violated => {}
        CriterionVerdict::Inconclusive => report.status = Status::Inconclusive,
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("bdchain").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let Command::Simulate(a) = parse(&["simulate", "--chain", "x.json"]).command else { panic!() };
        assert_eq!(a.common.seed, DEFAULT_SEED);
        assert_eq!(a.common.format, Format::Json);
        assert_eq!(a.m_grid, vec![10, 100, 1000]);
        assert_eq!(a.stopping, Stopping::Truncation);
        let Command::Verify(v) = parse(&["verify", "--chain", "x.json"]).command else { panic!() };
        assert_eq!(v.oracle_n, 1000);
        assert_eq!(v.tol, 1e-10);
    }

    #[test]
    fn grid_and_ranges() {
        let Command::Simulate(a) =
            parse(&["simulate", "--chain", "x", "--m-grid", "5,50", "--stopping", "interval-exit"]).command
        else {
            panic!()
        };
        assert_eq!(a.m_grid, vec![5, 50]);
        assert_eq!(a.stopping, Stopping::IntervalExit);
        assert!(Cli::try_parse_from(["bdchain", "simulate", "--chain", "x", "--paths", "1"]).is_err());
        assert!(Cli::try_parse_from(["bdchain", "simulate", "--chain", "x", "--m-grid", "0,3"]).is_err());
    }

    #[test]
    fn usage_errors_exit_with_config_code() {
        assert_eq!(run(["bdchain", "analyze"]), 1);
        assert_eq!(run(["bdchain", "frobnicate"]), 1);
        assert_eq!(run(["bdchain", "analyze", "--chain", "/nonexistent/chain.json"]), 1);
    }

    #[test]
    fn inline_chain() {
        let spec = load_chain(r#"{"family": "simple-symmetric", "k": 2}"#).unwrap();
        assert_eq!(spec.start_state(), 2);
        assert!(matches!(load_chain(r#"{"family": "constant", "k": 1, "p": 1.5}"#), Err(CliError::Spec(_))));
    }

    #[test]
    fn verify_srw_inline() {
        let args = VerifyArgs {
            common: CommonArgs {
                chain: r#"{"family": "simple-symmetric", "k": 3}"#.into(),
                format: Format::Json,
                seed: 1,
                out: None,
            },
            oracle_n: 200,
            tol: 1e-10,
        };
        let report = cmd_verify(&args).unwrap();
        assert_eq!(report.status, Status::Ok, "{}", report.to_json());
    }
}
