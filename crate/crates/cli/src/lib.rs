//! Command implementations behind the `corrbern` binary.
//!
//! Each subcommand has a function that works on readers and writers so it can
//! be driven from tests without touching the filesystem.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corrbern::experiment::{
    run_experiment, write_rows_csv, ExperimentConfig, ExperimentMode, ExperimentRow, ExperimentSummary,
    ParamStream, DEFAULT_N, DEFAULT_REPLICATES, SPEC_VERSION,
};
use corrbern::linsys::{degenerate_delta_report, write_matrix_csv, DegenerateReport, DegenerateSystem};
use corrbern::oracle::alignment_report;
use corrbern::verify::{run_verify, VerifyLevel, VerifyReport};
use corrbern::{sample_pair, Builtin, Error, GraphPair, ModelParams, Result, Statistic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "corrbern", version, about = "Alignment strength on correlated Bernoulli graph pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw graph pairs from a parameter file.
    Sample(SampleArgs),
    /// Evaluate the estimators on every row of a sample file.
    Estimate(EstimateArgs),
    /// Exact moments of the estimators at one parameter point.
    Exact(ExactArgs),
    /// Replicated exact-moment experiment over random parameter draws.
    Experiment(ExperimentArgs),
    /// Minimum-variance unbiased estimators of E(delta) when the mean is known.
    Degenerate(DegenerateArgs),
    /// Run the self-check suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub params_file: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sample file written by `sample`.
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub params_file: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "uniform-both")]
    pub mode: ExperimentMode,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `child-seeds` or `mt19937`.
    #[arg(long, default_value = "child-seeds")]
    pub stream: ParamStream,
    /// Parameter point(s) to evaluate instead of random draws: one object or an array.
    #[arg(long)]
    pub params_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON path; defaults to `<out>.summary.json`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DegenerateArgs {
    #[arg(long, default_value_t = 0.25)]
    pub mu: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.15,0.35")]
    pub p_values: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the 5x16 coefficient matrix as CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "fast")]
    pub level: VerifyLevel,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<Box<dyn Write>> {
    Ok(Box::new(BufWriter::new(File::create(path)?)))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => create(p),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn read_params(path: &Path) -> Result<ModelParams> {
    ModelParams::from_json(&std::fs::read_to_string(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    }
}

/// Writes `n_samples` draws as `sample_id,x_bits,y_bits`.
pub fn sample_csv<W: Write>(params: &ModelParams, n_samples: usize, seed: u64, out: W) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "x_bits", "y_bits"]).map_err(csv_err)?;
    for id in 0..n_samples {
        let pair = sample_pair(params, &mut rng);
        w.write_record([id.to_string(), pair.x_string(), pair.y_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Statistics reported per sample row, in column order.
pub const ESTIMATE_COLUMNS: [Builtin; 8] = [
    Builtin::Delta,
    Builtin::DensityX,
    Builtin::DensityY,
    Builtin::CombinedDensity,
    Builtin::IntersectionDensity,
    Builtin::AlignmentStrength,
    Builtin::BalancedAlignmentStrength,
    Builtin::ModifiedAlignmentStrength,
];

/// Reads a sample file and writes one row of estimates per sample.
pub fn estimate_csv<R: Read, W: Write>(input: R, out: W) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = rdr.headers().map_err(csv_err)?;
    if head.iter().collect::<Vec<_>>() != ["sample_id", "x_bits", "y_bits"] {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header sample_id,x_bits,y_bits".into(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sample_id".to_owned()];
    header.extend(ESTIMATE_COLUMNS.iter().map(|b| b.name()));
    w.write_record(&header).map_err(csv_err)?;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let pair = GraphPair::parse(rec[1].trim(), rec[2].trim()).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let mut row = vec![rec[0].trim().to_owned()];
        row.extend(ESTIMATE_COLUMNS.iter().map(|b| b.eval(&pair).to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Exact report written by `exact`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactReport {
    pub spec_version: String,
    pub params: ModelParams,
    pub mu: f64,
    pub sigma2: f64,
    #[serde(rename = "rho_H")]
    pub rho_h: f64,
    #[serde(rename = "rho_T")]
    pub rho_t: f64,
    #[serde(rename = "E_delta")]
    pub e_delta: f64,
    #[serde(rename = "E_str")]
    pub e_str: f64,
    #[serde(rename = "E_strbar")]
    pub e_strbar: f64,
    #[serde(rename = "E_strprime")]
    pub e_strprime: f64,
    #[serde(rename = "Var_str")]
    pub var_str: f64,
    #[serde(rename = "Var_strbar")]
    pub var_strbar: f64,
    #[serde(rename = "Var_strprime")]
    pub var_strprime: f64,
    #[serde(rename = "MSE_str_vs_rhoT")]
    pub mse_str_vs_rho_t: f64,
    #[serde(rename = "MSE_strbar_vs_rhoT")]
    pub mse_strbar_vs_rho_t: f64,
    #[serde(rename = "MSE_strprime_vs_rhoT")]
    pub mse_strprime_vs_rho_t: f64,
    /// Probability that `x` and `y` are both all-zeros or both all-ones.
    pub degenerate_probability: f64,
    pub convention_value: f64,
    /// `degenerate_probability * convention_value`, included in every mean above.
    pub convention_contribution: f64,
}

pub fn exact_report(params: &ModelParams) -> Result<ExactReport> {
    let r = alignment_report(params)?;
    Ok(ExactReport {
        spec_version: SPEC_VERSION.to_owned(),
        params: params.clone(),
        mu: r.mu,
        sigma2: r.sigma2,
        rho_h: r.rho_h,
        rho_t: r.rho_t,
        e_delta: r.e_delta,
        e_str: r.e_str,
        e_strbar: r.e_strbar,
        e_strprime: r.e_strprime,
        var_str: r.var_str,
        var_strbar: r.var_strbar,
        var_strprime: r.var_strprime,
        mse_str_vs_rho_t: r.mse_str_vs_rho_t,
        mse_strbar_vs_rho_t: r.mse_strbar_vs_rho_t,
        mse_strprime_vs_rho_t: r.mse_strprime_vs_rho_t,
        degenerate_probability: r.degenerate_probability,
        convention_value: r.convention_value,
        convention_contribution: r.degenerate_probability * r.convention_value,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsInput {
    One(ModelParams),
    Many(Vec<ModelParams>),
}

/// Parses one parameter object or an array of them.
pub fn parse_params_list(text: &str) -> Result<Vec<ModelParams>> {
    let list = match serde_json::from_str::<ParamsInput>(text) {
        Ok(ParamsInput::One(p)) => vec![p],
        Ok(ParamsInput::Many(v)) => v,
        // Re-parse as a single object for a precise message.
        Err(_) => vec![ModelParams::from_json(text)?],
    };
    if list.is_empty() {
        return Err(Error::domain("parameter list is empty"));
    }
    Ok(list)
}

impl ExperimentArgs {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            replicates: self.replicates,
            n_components: self.n,
            base_seed: self.seed,
            stream: self.stream,
        }
    }
}

/// Rows and summary for `experiment`. Injected parameters replace the draws.
pub fn experiment_rows(
    config: &ExperimentConfig,
    injected: Option<Vec<ModelParams>>,
) -> Result<(Vec<ExperimentRow>, ExperimentSummary)> {
    match injected {
        None => {
            let rows = run_experiment(config)?;
            let summary = ExperimentSummary::of(config, &rows);
            Ok((rows, summary))
        }
        Some(list) => {
            let mut config = config.clone();
            config.replicates = list.len();
            config.n_components = list[0].n_components();
            config.validate()?;
            let rows = list
                .into_iter()
                .enumerate()
                .map(|(i, p)| ExperimentRow::compute(i, p))
                .collect::<Result<Vec<_>>>()?;
            let summary = ExperimentSummary::of(&config, &rows);
            Ok((rows, summary))
        }
    }
}

/// JSON written by `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateOutput {
    pub spec_version: String,
    #[serde(flatten)]
    pub report: DegenerateReport,
}

fn summary_path(args: &ExperimentArgs) -> Option<PathBuf> {
    args.summary
        .clone()
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("summary.json")))
}

fn print_verify(report: &VerifyReport) {
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:<40} {:>8.3}s  {}", c.name, c.seconds, c.detail);
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sample(a) => {
            let params = read_params(&a.params_file)?;
            sample_csv(&params, a.n_samples, a.seed, output(a.out.as_deref())?)?;
        }
        Command::Estimate(a) => {
            estimate_csv(File::open(&a.input)?, output(a.out.as_deref())?)?;
        }
        Command::Exact(a) => {
            let report = exact_report(&read_params(&a.params_file)?)?;
            let mut out = output(a.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
        Command::Experiment(a) => {
            let injected = match &a.params_file {
                Some(p) => Some(parse_params_list(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            let (rows, summary) = experiment_rows(&a.config(), injected)?;
            write_rows_csv(&rows, output(a.out.as_deref())?)?;
            let json = serde_json::to_string_pretty(&summary)?;
            match summary_path(&a) {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => eprintln!("{json}"),
            }
        }
        Command::Degenerate(a) => {
            let report = degenerate_delta_report(a.mu, &a.p_values)?;
            if let Some(path) = &a.matrix_out {
                write_matrix_csv(DegenerateSystem::new(a.mu)?.matrix(), create(path)?)?;
            }
            let mut out = output(a.out.as_deref())?;
            let doc = DegenerateOutput {
                spec_version: SPEC_VERSION.to_owned(),
                report,
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
        Command::Verify(a) => {
            let report = run_verify(a.level);
            print_verify(&report);
            if let Some(path) = &a.out {
                std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            if !report.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
