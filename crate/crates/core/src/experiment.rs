//! Replicated exact-moment experiments over random parameter draws.
//!
//! Each replicate draws a parameter point, computes the exact moments of the
//! alignment-strength family at it, and records one [`ExperimentRow`].
//! Replicates run in parallel but rows always come back in replicate order.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::mt::{Mt19937, DEFAULT_SEED};
use crate::oracle::{alignment_report, AlignmentReport, MAX_EXACT_N};

/// Version tag written into every JSON report.
pub const SPEC_VERSION: &str = "1.0";

/// Six vertex pairs, i.e. every pair in a four-vertex graph.
pub const DEFAULT_N: usize = 6;
pub const DEFAULT_REPLICATES: usize = 200;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "CORRBERN_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    /// Every `p_i` and `rho_i` uniform on `[0, 1)`.
    UniformBoth,
    /// `rho_i = 0`, `p_i` uniform.
    RhoZero,
    /// `p_i = 1/2`, `rho_i` uniform.
    PHalf,
}

impl ExperimentMode {
    pub const ALL: [ExperimentMode; 3] = [Self::UniformBoth, Self::RhoZero, Self::PHalf];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::UniformBoth => "uniform-both",
            Self::RhoZero => "rho-zero",
            Self::PHalf => "p-half",
        }
    }
}

impl fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown mode {s:?}; expected uniform-both, rho-zero or p-half")))
    }
}

/// Where replicate parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamStream {
    /// Replicate `r` draws from ChaCha8 seeded with the base seed on stream `r`.
    ChildSeeds,
    /// Replays the MT19937 (seed 5489) reference draws.
    /// Only defined for `n = 6` and at most 200 replicates.
    Mt19937,
}

impl ParamStream {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ChildSeeds => "child-seeds",
            Self::Mt19937 => "mt19937",
        }
    }
}

impl FromStr for ParamStream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "child-seeds" => Ok(Self::ChildSeeds),
            "mt19937" => Ok(Self::Mt19937),
            _ => Err(Error::domain(format!("unknown stream {s:?}; expected child-seeds or mt19937"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub replicates: usize,
    pub n_components: usize,
    pub base_seed: u64,
    pub stream: ParamStream,
}

impl ExperimentConfig {
    pub fn new(mode: ExperimentMode) -> Self {
        Self {
            mode,
            replicates: DEFAULT_REPLICATES,
            n_components: DEFAULT_N,
            base_seed: 0,
            stream: ParamStream::ChildSeeds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::domain("replicates must be at least 1"));
        }
        if self.n_components == 0 || self.n_components > MAX_EXACT_N {
            return Err(Error::Capacity {
                what: "experiment",
                n: self.n_components,
                limit: MAX_EXACT_N,
                hint: "",
            });
        }
        if self.stream == ParamStream::Mt19937 {
            if self.n_components != MT_N {
                return Err(Error::domain(format!("the mt19937 stream needs n = {MT_N}")));
            }
            if self.replicates > MT_REPLICATES {
                return Err(Error::domain(format!(
                    "the mt19937 stream has only {MT_REPLICATES} replicates"
                )));
            }
        }
        Ok(())
    }
}

const MT_N: usize = 6;
const MT_REPLICATES: usize = 200;
const MT_P_BLOCK1: usize = 108;
const MT_P_BLOCK2: usize = 1308;
const MT_RHO_BLOCK1: usize = 2508;
const MT_RHO_BLOCK3: usize = 3708;

fn mt19937_draws() -> &'static [f64] {
    static DRAWS: OnceLock<Vec<f64>> = OnceLock::new();
    DRAWS.get_or_init(|| {
        let mut mt = Mt19937::new(DEFAULT_SEED);
        let len = MT_RHO_BLOCK3 + MT_REPLICATES * MT_N;
        (0..len).map(|_| mt.next_f64()).collect()
    })
}

/// Column `c` of replicate `r` in a column-major 200-row block at `offset`.
fn mt19937_row(offset: usize, r: usize) -> Vec<f64> {
    let draws = mt19937_draws();
    (0..MT_N).map(|c| draws[offset + r + MT_REPLICATES * c]).collect()
}

/// Parameters of replicate `r` (0-based) of the reference experiments.
pub fn mt19937_params(mode: ExperimentMode, r: usize) -> Result<ModelParams> {
    if r >= MT_REPLICATES {
        return Err(Error::domain(format!("replicate {r} out of range")));
    }
    let (p, rho) = match mode {
        ExperimentMode::UniformBoth => (mt19937_row(MT_P_BLOCK1, r), mt19937_row(MT_RHO_BLOCK1, r)),
        ExperimentMode::RhoZero => (mt19937_row(MT_P_BLOCK2, r), vec![0.0; MT_N]),
        ExperimentMode::PHalf => (vec![0.5; MT_N], mt19937_row(MT_RHO_BLOCK3, r)),
    };
    ModelParams::new(p, rho)
}

/// Parameters of replicate `r` under the child-seed stream.
pub fn child_seed_params(mode: ExperimentMode, n: usize, base_seed: u64, r: usize) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(r as u64);
    let mut uniform = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen::<f64>()).collect() };
    let (p, rho) = match mode {
        ExperimentMode::UniformBoth => {
            let p = uniform(n);
            (p, uniform(n))
        }
        ExperimentMode::RhoZero => (uniform(n), vec![0.0; n]),
        ExperimentMode::PHalf => (vec![0.5; n], uniform(n)),
    };
    ModelParams::new(p, rho).expect("draws lie in [0, 1)")
}

pub fn replicate_params(config: &ExperimentConfig, r: usize) -> Result<ModelParams> {
    match config.stream {
        ParamStream::ChildSeeds => Ok(child_seed_params(config.mode, config.n_components, config.base_seed, r)),
        ParamStream::Mt19937 => mt19937_params(config.mode, r),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub replicate_index: usize,
    pub params: ModelParams,
    pub e_str: f64,
    pub e_strprime: f64,
    pub rho_t: f64,
    pub var_str: f64,
    pub var_strbar: f64,
    pub var_strprime: f64,
    pub mse_strbar: f64,
    pub mse_strprime: f64,
}

impl ExperimentRow {
    pub fn from_report(replicate_index: usize, params: ModelParams, r: &AlignmentReport) -> Self {
        Self {
            replicate_index,
            params,
            e_str: r.e_str,
            e_strprime: r.e_strprime,
            rho_t: r.rho_t,
            var_str: r.var_str,
            var_strbar: r.var_strbar,
            var_strprime: r.var_strprime,
            mse_strbar: r.mse_strbar_vs_rho_t,
            mse_strprime: r.mse_strprime_vs_rho_t,
        }
    }

    pub fn compute(replicate_index: usize, params: ModelParams) -> Result<Self> {
        let report = alignment_report(&params)?;
        Ok(Self::from_report(replicate_index, params, &report))
    }

    /// `Var(str) > Var(strbar) > Var(strprime)`.
    pub fn variance_ordered(&self) -> bool {
        self.var_str > self.var_strbar && self.var_strbar > self.var_strprime
    }

    /// `E(str) < E(strprime) < rho_T`.
    pub fn mean_ordered(&self) -> bool {
        self.e_str < self.e_strprime && self.e_strprime < self.rho_t
    }

    /// `strprime` is less biased for `rho_T` than `str`.
    pub fn strprime_less_biased(&self) -> bool {
        (self.e_strprime - self.rho_t).abs() < (self.e_str - self.rho_t).abs()
    }

    pub fn strprime_mse_no_worse(&self) -> bool {
        self.mse_strprime <= self.mse_strbar
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub spec_version: String,
    pub mode: ExperimentMode,
    pub stream: ParamStream,
    pub n_components: usize,
    pub replicates: usize,
    pub base_seed: u64,
    pub variance_ordered: usize,
    pub mean_ordered: usize,
    pub strprime_less_biased: usize,
    pub strprime_mse_no_worse: usize,
}

impl ExperimentSummary {
    pub fn of(config: &ExperimentConfig, rows: &[ExperimentRow]) -> Self {
        let count = |f: fn(&ExperimentRow) -> bool| rows.iter().filter(|r| f(r)).count();
        Self {
            spec_version: SPEC_VERSION.to_owned(),
            mode: config.mode,
            stream: config.stream,
            n_components: config.n_components,
            replicates: rows.len(),
            base_seed: config.base_seed,
            variance_ordered: count(ExperimentRow::variance_ordered),
            mean_ordered: count(ExperimentRow::mean_ordered),
            strprime_less_biased: count(ExperimentRow::strprime_less_biased),
            strprime_mse_no_worse: count(ExperimentRow::strprime_mse_no_worse),
        }
    }
}

/// Worker count: `CORRBERN_THREADS` if set to a positive integer, otherwise
/// rayon's default.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Maps `f` over `0..count` on a bounded pool, keeping index order.
pub fn par_map_ordered<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Send + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    par_map_ordered(config.replicates, |r| ExperimentRow::compute(r, replicate_params(config, r)?))
}

fn header(n: usize) -> Vec<String> {
    let mut h = vec!["replicate".to_owned()];
    h.extend((1..=n).map(|i| format!("p{i}")));
    h.extend((1..=n).map(|i| format!("rho{i}")));
    h.extend(
        ["e_str", "e_strprime", "rho_t", "var_str", "var_strbar", "var_strprime", "mse_strbar", "mse_strprime"]
            .map(String::from),
    );
    h
}

/// Writes rows as CSV with one header line. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_rows_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let n = rows.first().map_or(DEFAULT_N, |r| r.params.n_components());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n)).map_err(csv_err)?;
    for row in rows {
        if row.params.n_components() != n {
            return Err(Error::domain("rows have differing component counts"));
        }
        let mut rec = vec![row.replicate_index.to_string()];
        rec.extend(row.params.p().iter().map(f64::to_string));
        rec.extend(row.params.rho().iter().map(f64::to_string));
        rec.extend(
            [
                row.e_str,
                row.e_strprime,
                row.rho_t,
                row.var_str,
                row.var_strbar,
                row.var_strprime,
                row.mse_strbar,
                row.mse_strprime,
            ]
            .iter()
            .map(f64::to_string),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ExperimentRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = rdr.headers().map_err(csv_err)?.clone();
    let width = head.len();
    if width < 9 || (width - 9) % 2 != 0 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header with {width} columns"),
        });
    }
    let n = (width - 9) / 2;
    if head.iter().collect::<Vec<_>>() != header(n) {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("column {}: {e}", head[i].to_owned()),
            })
        };
        let replicate_index = rec[0].trim().parse::<usize>().map_err(|e| Error::Parse {
            line,
            msg: format!("replicate: {e}"),
        })?;
        let p = (1..=n).map(num).collect::<Result<Vec<_>>>()?;
        let rho = (n + 1..=2 * n).map(num).collect::<Result<Vec<_>>>()?;
        let params = ModelParams::new(p, rho).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let base = 2 * n + 1;
        rows.push(ExperimentRow {
            replicate_index,
            params,
            e_str: num(base)?,
            e_strprime: num(base + 1)?,
            rho_t: num(base + 2)?,
            var_str: num(base + 3)?,
            var_strbar: num(base + 4)?,
            var_strprime: num(base + 5)?,
            mse_strbar: num(base + 6)?,
            mse_strprime: num(base + 7)?,
        });
    }
    Ok(rows)
}

/// Tally of `MSE(strprime) <= MSE(strbar)` over random parameter points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureAudit {
    pub spec_version: String,
    pub points: usize,
    pub holds: usize,
    pub fraction: f64,
    /// Parameter points where `strprime` had the larger MSE.
    pub counterexamples: Vec<ModelParams>,
}

/// Draws `points` parameter points (mode cycling through all three, `n`
/// cycling through `1..=max_n`) and checks the MSE comparison at each.
pub fn conjecture_audit(points: usize, max_n: usize, seed: u64) -> Result<ConjectureAudit> {
    if max_n == 0 || max_n > MAX_EXACT_N {
        return Err(Error::Capacity {
            what: "conjecture audit",
            n: max_n,
            limit: MAX_EXACT_N,
            hint: "",
        });
    }
    let rows = par_map_ordered(points, |i| {
        let mode = ExperimentMode::ALL[i % 3];
        let n = 1 + (i / 3) % max_n;
        ExperimentRow::compute(i, child_seed_params(mode, n, seed, i))
    })?;
    let counterexamples: Vec<ModelParams> = rows
        .iter()
        .filter(|r| !r.strprime_mse_no_worse())
        .map(|r| r.params.clone())
        .collect();
    let holds = points - counterexamples.len();
    Ok(ConjectureAudit {
        spec_version: SPEC_VERSION.to_owned(),
        points,
        holds,
        fraction: holds as f64 / points.max(1) as f64,
        counterexamples,
    })
}
