use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use relchange_core::relevance::{
    correlation_statistic, distribution_test, ecdf_l2_distance, mean_test, regression_test,
    variance_test, Ecdf,
};
use relchange_core::sim::{power_curve, run_scenario, ScenarioResult, ScenarioSpec, Sweep};
use relchange_core::{LrvMode, RelevanceConfig, RelevanceReport, TestKind};
use serde::Serialize;

use crate::error::CliError;
use crate::format::{opt_sig10, sig10};
use crate::ingest::{read_table, Table};
use crate::scenario_file::load_scenario;

/// Environment variable capping the number of Monte Carlo worker threads.
pub const THREADS_ENV: &str = "RELCHANGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "relchange",
    version,
    about = "Tests for relevant structural breaks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a relevance test on a CSV file.
    Test(TestArgs),
    /// Run one Monte Carlo scenario.
    Simulate(SimArgs),
    /// Run a scenario over its sweep grid(s).
    Power(SimArgs),
    /// L2 distance between the empirical distribution functions of two files.
    CalibrateDelta(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestArg {
    Mean,
    Variance,
    Regression,
    Distribution,
    CorrelationStat,
}

impl From<TestArg> for TestKind {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Mean => TestKind::Mean,
            TestArg::Variance => TestKind::Variance,
            TestArg::Regression => TestKind::Regression,
            TestArg::Distribution => TestKind::Distribution,
            TestArg::CorrelationStat => TestKind::CorrelationStat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LrvArg {
    Hac,
    Plain,
}

impl From<LrvArg> for LrvMode {
    fn from(m: LrvArg) -> Self {
        match m {
            LrvArg::Hac => LrvMode::HacBartlett,
            LrvArg::Plain => LrvMode::PlainVariance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    test: TestArg,
    /// Relevance threshold.
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, value_enum)]
    lrv: Option<LrvArg>,
    #[arg(long)]
    bias_correction: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    test: Option<TestArg>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    lrv: Option<LrvArg>,
    #[arg(long)]
    bias_correction: bool,
    /// Master seed; overrides the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    input2: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Test(args) => run_test(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Power(args) => run_power(&args),
        Command::CalibrateDelta(args) => run_calibrate_delta(&args),
    }
}

fn emit(output: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn workers() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Test report as written by `relchange test`.
#[derive(Debug, Serialize)]
pub struct TestOutput {
    #[serde(flatten)]
    pub report: RelevanceReport,
    /// Label of the last pre-break observation, from the `date` column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub break_label: Option<String>,
}

fn build_config(
    delta: f64,
    alpha: f64,
    lrv: Option<LrvArg>,
    bias: bool,
) -> Result<RelevanceConfig, CliError> {
    let mut config =
        RelevanceConfig::new(delta, alpha).map_err(|e| CliError::Usage(e.to_string()))?;
    config.bias_correction = bias;
    config.lrv_mode = lrv.map(LrvMode::from);
    Ok(config)
}

fn run_test(args: &TestArgs) -> Result<(), CliError> {
    let config = build_config(args.delta, args.alpha, args.lrv, args.bias_correction)?;
    let table = read_table(&args.input)?;
    let format = args.output.format.unwrap_or(Format::Json);
    if args.test == TestArg::CorrelationStat {
        let report = correlation_statistic(&table.sample()?)?;
        let text = match format {
            Format::Json => to_json(&report),
            Format::Csv => csv_text(
                &[
                    "n",
                    "m_hat_squared",
                    "t_hat",
                    "break_index",
                    "correlation_before",
                    "correlation_after",
                ]
                .map(String::from),
                &[vec![
                    report.n.to_string(),
                    sig10(report.m_hat_squared),
                    sig10(report.t_hat),
                    report.break_index.to_string(),
                    sig10(report.correlation_before),
                    sig10(report.correlation_after),
                ]],
            ),
        };
        return emit(&args.output, &text);
    }
    let report = test_table(&table, args.test.into(), &config)?;
    let output = TestOutput {
        break_label: table.label(report.break_index).map(str::to_string),
        report,
    };
    let text = match format {
        Format::Json => to_json(&output),
        Format::Csv => report_csv(&output),
    };
    emit(&args.output, &text)
}

/// Applies test `kind` to the data of `table`.
pub fn test_table(
    table: &Table,
    kind: TestKind,
    config: &RelevanceConfig,
) -> Result<RelevanceReport, CliError> {
    let report = match kind {
        TestKind::Mean => mean_test(&table.sample()?, config)?,
        TestKind::Variance => variance_test(&table.sample()?, config)?,
        TestKind::Distribution => distribution_test(table.series()?, config)?,
        TestKind::Regression => {
            let (x, y) = table.regression_pair()?;
            regression_test(x, y, config)?
        }
        TestKind::CorrelationStat => {
            return Err(CliError::Usage(
                "the correlation statistic has no decision".into(),
            ));
        }
    };
    Ok(report)
}

fn report_csv(output: &TestOutput) -> String {
    let r = &output.report;
    let mut header: Vec<String> = [
        "test",
        "n",
        "delta",
        "alpha",
        "m_hat_squared",
        "tau_hat_squared",
        "t_hat",
        "break_index",
        "p_value",
        "reject",
        "critical_value",
        "degenerate",
    ]
    .map(String::from)
    .to_vec();
    let mut row = vec![
        r.test.as_str().to_string(),
        r.n.to_string(),
        sig10(r.delta),
        sig10(r.alpha),
        sig10(r.m_hat_squared),
        sig10(r.tau_hat_squared),
        sig10(r.t_hat),
        r.break_index.to_string(),
        sig10(r.p_value),
        r.reject.to_string(),
        sig10(r.critical_value),
        r.degenerate.to_string(),
    ];
    for (i, v) in r.segment_estimates.before.iter().enumerate() {
        header.push(format!("before_{}", i + 1));
        row.push(sig10(*v));
    }
    for (i, v) in r.segment_estimates.after.iter().enumerate() {
        header.push(format!("after_{}", i + 1));
        row.push(sig10(*v));
    }
    if let Some(label) = &output.break_label {
        header.push("break_label".into());
        row.push(label.clone());
    }
    csv_text(&header, &[row])
}

fn apply_overrides(spec: &mut ScenarioSpec, args: &SimArgs) -> Result<(), CliError> {
    if let Some(t) = args.test {
        spec.test = t.into();
    }
    if let Some(d) = args.delta {
        spec.config.delta = d;
    }
    if let Some(a) = args.alpha {
        spec.config.alpha = a;
    }
    if let Some(m) = args.lrv {
        spec.config.lrv_mode = Some(m.into());
    }
    if args.bias_correction {
        spec.config.bias_correction = true;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    if let Some(r) = args.reps {
        spec.reps = r;
    }
    spec.validate()
        .map_err(|e| CliError::Usage(format!("invalid scenario: {e}")))
}

fn scenario_error(e: relchange_core::Error) -> CliError {
    match e {
        relchange_core::Error::InvalidInput(msg) => {
            CliError::Usage(format!("invalid scenario: {msg}"))
        }
        other => CliError::Data(other.to_string()),
    }
}

fn run_simulate(args: &SimArgs) -> Result<(), CliError> {
    let mut file = load_scenario(&args.config)?;
    apply_overrides(&mut file.scenario, args)?;
    let result = run_scenario(&file.scenario, workers()?).map_err(scenario_error)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&result),
        Format::Csv => csv_text(&simulate_header(), &[simulate_row(&result)]),
    };
    emit(&args.output, &text)
}

fn simulate_header() -> Vec<String> {
    [
        "rejection_rate",
        "mc_se",
        "predicted_power",
        "mean_t_hat",
        "reps_completed",
        "degenerate_count",
        "failed_reps",
    ]
    .map(String::from)
    .to_vec()
}

fn simulate_row(r: &ScenarioResult) -> Vec<String> {
    vec![
        sig10(r.rejection_rate),
        sig10(r.mc_standard_error),
        opt_sig10(r.predicted_power),
        sig10(r.mean_t_hat),
        r.reps_completed.to_string(),
        r.degenerate_count.to_string(),
        r.failed_reps.to_string(),
    ]
}

/// One row of a `power` table.
#[derive(Debug, Serialize)]
struct PowerRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_value: Option<f64>,
    grid_value: f64,
    rejection_rate: f64,
    mc_se: f64,
    predicted_power: Option<f64>,
}

fn run_power(args: &SimArgs) -> Result<(), CliError> {
    let mut file = load_scenario(&args.config)?;
    apply_overrides(&mut file.scenario, args)?;
    let sweep = file
        .sweep
        .clone()
        .ok_or_else(|| CliError::Usage("scenario file has no [sweep] table".into()))?;
    let workers = workers()?;
    let outer_points: Vec<(Option<f64>, ScenarioSpec)> = match &file.outer {
        None => vec![(None, file.scenario.clone())],
        Some(outer) => outer
            .values
            .iter()
            .map(|&v| {
                Ok((
                    Some(v),
                    outer
                        .parameter
                        .apply(&file.scenario, v)
                        .map_err(scenario_error)?,
                ))
            })
            .collect::<Result<_, CliError>>()?,
    };
    let mut rows = Vec::new();
    for (outer_value, spec) in &outer_points {
        for point in power_curve(spec, &sweep, workers).map_err(scenario_error)? {
            rows.push(PowerRow {
                outer_value: *outer_value,
                grid_value: point.grid_value,
                rejection_rate: point.result.rejection_rate,
                mc_se: point.result.mc_standard_error,
                predicted_power: point.result.predicted_power,
            });
        }
    }
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        Format::Csv => power_csv(&rows, file.outer.as_ref()),
    };
    emit(&args.output, &text)
}

fn power_csv(rows: &[PowerRow], outer: Option<&Sweep>) -> String {
    let mut header = Vec::new();
    if let Some(o) = outer {
        header.push(o.parameter.as_str().to_string());
    }
    header.extend(["grid_value", "rejection_rate", "mc_se", "predicted_power"].map(String::from));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = Vec::new();
            if let Some(v) = r.outer_value {
                row.push(sig10(v));
            }
            row.extend([
                sig10(r.grid_value),
                sig10(r.rejection_rate),
                sig10(r.mc_se),
                opt_sig10(r.predicted_power),
            ]);
            row
        })
        .collect();
    csv_text(&header, &body)
}

/// L2 distance between the empirical distribution functions of two
/// univariate files.
pub fn calibrate_delta(first: &Path, second: &Path) -> Result<f64, CliError> {
    let a = read_table(first)?;
    let b = read_table(second)?;
    let fa = Ecdf::new(a.series()?)?;
    let fb = Ecdf::new(b.series()?)?;
    Ok(ecdf_l2_distance(&fa, &fb))
}

#[derive(Debug, Serialize)]
struct Distance {
    distance: f64,
}

fn run_calibrate_delta(args: &CalibrateArgs) -> Result<(), CliError> {
    let distance = calibrate_delta(&args.input, &args.input2)?;
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&Distance { distance }),
        Format::Csv => csv_text(&["distance".to_string()], &[vec![sig10(distance)]]),
    };
    emit(&args.output, &text)
}
