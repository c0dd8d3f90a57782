//! `exitlab` command line.
//!
//! Every subcommand reads a strict JSON config, writes a CSV to `--out` (or
//! stdout) and, next to the CSV, a `.manifest.json` with the parsed config,
//! seed and engine parameters. Exit codes: 0 success, 1 a verdict failed,
//! 2 bad arguments, unreadable or malformed config, or a rejected input.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::verify::{verify_fast_exit, verify_hardy_tails, verify_lemma1, verify_long_stay};
use super::{ExperimentResult, HarnessError, Table, Verdict};
use crate::capacity::{dirichlet_condenser, energy_capacity, equilibrium_measure, CapacityReport};
use crate::geometry::{CompactSet, Domain, Point};
use crate::kernels::bessel::{table, Order};
use crate::pde::{eigen_lambda, exit_cdf_flux, Engine, Resolution};
use crate::sampler::{
    fit_lambda, fit_tail_exponent, log_grid, BatchSpec, ExitSampleBatch, SamplerSpec, SurvivalCurve,
};

#[derive(Parser, Debug)]
#[command(name = "exitlab", version, about = "Brownian exit-time experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// Sample exit times and points.
    Simulate,
    /// Exit-time CDF from the killed heat equation.
    Pde,
    /// Capacities of a compact set.
    Capacity,
    /// Principal Dirichlet eigenvalue, optionally with a fitted decay rate.
    Lambda,
    /// Survival tail and fitted exponent.
    Tails,
    VerifyFastExit,
    VerifyLongStay,
    VerifyLemma1,
    VerifyHardy,
    /// Bessel zero tables as JSON.
    DumpTables,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Simulate => "simulate",
            Cmd::Pde => "pde",
            Cmd::Capacity => "capacity",
            Cmd::Lambda => "lambda",
            Cmd::Tails => "tails",
            Cmd::VerifyFastExit => "verify-fast-exit",
            Cmd::VerifyLongStay => "verify-long-stay",
            Cmd::VerifyLemma1 => "verify-lemma1",
            Cmd::VerifyHardy => "verify-hardy",
            Cmd::DumpTables => "dump-tables",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub domain: Domain,
    #[serde(default)]
    pub x0: Option<Point>,
    pub sampler: SamplerSpec,
    pub count: usize,
    #[serde(default)]
    pub max_time: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// A time grid: an explicit list or `{"lo", "hi", "points"}` log-spaced.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Log(LogGrid),
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Log(g) => log_grid(g.lo, g.hi, g.points),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub domain: Domain,
    #[serde(default)]
    pub x0: Option<Point>,
    pub t_grid: TimeGrid,
    pub h: f64,
    #[serde(default)]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub engine: Engine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethod {
    #[default]
    Energy,
    Condenser,
    Equilibrium,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub compact: CompactSet,
    /// Outer ball for condenser methods.
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub methods: Vec<CapacityMethod>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_h")]
    pub h: f64,
}

fn default_points() -> usize {
    400
}

fn default_h() -> f64 {
    0.02
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaFitConfig {
    pub window: (f64, f64),
    #[serde(default = "default_fit_points")]
    pub points: usize,
}

fn default_fit_points() -> usize {
    24
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub domain: Domain,
    pub h: f64,
    #[serde(default)]
    pub fit: Option<LambdaFitConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsConfig {
    pub domain: Domain,
    #[serde(default)]
    pub x0: Option<Point>,
    pub count: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub window: (f64, f64),
    #[serde(default = "default_fit_points")]
    pub points: usize,
}

fn default_eps() -> f64 {
    1e-4
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    seed: u64,
    threads: usize,
    config: serde_json::Value,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    passed: Option<bool>,
    verdicts: &'a [Verdict],
    provenance: BTreeMap<String, String>,
    notes: Vec<String>,
    wall_time_s: f64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(HarnessError),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Run(e)
    }
}

fn run_err<T, E: Into<HarnessError>>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Run(e.into()))
}

/// What a subcommand produced before anything is written.
struct Output {
    table: Table,
    labels: Option<(String, Vec<String>)>,
    json: Option<serde_json::Value>,
    result: Option<ExperimentResult>,
    provenance: BTreeMap<String, String>,
}

impl Output {
    fn table(table: Table) -> Self {
        Output { table, labels: None, json: None, result: None, provenance: BTreeMap::new() }
    }
}

fn load<T: DeserializeOwned>(path: &Option<PathBuf>) -> Result<(T, serde_json::Value), CliError> {
    let path = path.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let parsed = serde_json::from_value(value.clone())
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((parsed, value))
}

fn start(x0: &Option<Point>, d: &Domain) -> Point {
    x0.unwrap_or_else(|| Point::origin(d.dim()))
}

fn note(verbose: bool, msg: &str) {
    if verbose {
        eprintln!("exitlab: {msg}");
    }
}

fn execute(cli: &Cli) -> Result<(Output, serde_json::Value), CliError> {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Simulate => {
            let (c, v): (SimulateConfig, _) = load(&cli.config)?;
            note(cli.verbose, &format!("sampling {} exits", c.count));
            let batch = run_err(ExitSampleBatch::generate(BatchSpec {
                domain: c.domain.clone(),
                x0: start(&c.x0, &c.domain),
                sampler: c.sampler,
                seed,
                count: c.count,
                max_time: c.max_time,
            }))?;
            let dim = c.domain.dim();
            let names = ["exit_x", "exit_y", "exit_z"];
            let mut cols = vec!["index", "exit_time"];
            cols.extend(&names[..dim]);
            let mut table = Table::new(&cols);
            for (i, s) in batch.samples.iter().enumerate() {
                let mut row = vec![i as f64, s.exit_time];
                row.extend((0..dim).map(|k| s.exit_point.coords()[k]));
                table.push(row);
            }
            let mut out = Output::table(table);
            out.provenance.insert("sampler".into(), batch.spec.sampler.id().into());
            out.provenance.insert("censored".into(), batch.censored().to_string());
            if let Some(b) = batch.shell_bias_bound() {
                out.provenance.insert("shell_bias_bound".into(), b.to_string());
            }
            Ok((out, v))
        }
        Cmd::Pde => {
            let (c, v): (PdeConfig, _) = load(&cli.config)?;
            let res = Resolution { h: c.h, truncation: c.truncation, engine: c.engine, estimate_error: true };
            let t = c.t_grid.values();
            let f = run_err(exit_cdf_flux(&c.domain, &start(&c.x0, &c.domain), &t, &res))?;
            let mut table =
                Table::new(&["t", "cdf", "survival", "truncation_flux", "truncation_bound", "error_estimate"]);
            for k in 0..f.times.len() {
                table.push(vec![
                    f.times[k],
                    f.cdf[k],
                    f.survival[k],
                    f.truncation_flux[k],
                    f.truncation_bound[k],
                    f.error_estimate[k],
                ]);
            }
            let mut out = Output::table(table);
            out.provenance.insert("h".into(), f.h.to_string());
            Ok((out, v))
        }
        Cmd::Capacity => {
            let (c, v): (CapacityConfig, _) = load(&cli.config)?;
            let methods = if c.methods.is_empty() { vec![CapacityMethod::Energy] } else { c.methods.clone() };
            let outer = || c.domain.clone().ok_or_else(|| CliError::Usage("condenser methods need `domain`".into()));
            let mut reports: Vec<CapacityReport> = Vec::new();
            for m in methods {
                note(cli.verbose, &format!("capacity method {m:?}"));
                reports.push(match m {
                    CapacityMethod::Energy => run_err(energy_capacity(&c.compact, c.compact.dim(), c.points))?,
                    CapacityMethod::Condenser => run_err(dirichlet_condenser(&outer()?, &c.compact, c.h))?,
                    CapacityMethod::Equilibrium => {
                        run_err(equilibrium_measure(&outer()?, &c.compact, c.points))?.report
                    }
                });
            }
            let mut table = Table::new(&[
                "value",
                "convention_constant",
                "points",
                "h",
                "coarse",
                "fine",
                "extrapolated",
                "error_estimate",
                "regularized",
            ]);
            let mut kinds = Vec::new();
            for r in &reports {
                let d = &r.diagnostics;
                kinds.push(serde_json::to_value(r.kind).ok().and_then(|k| k.as_str().map(String::from)).unwrap_or_default());
                table.push(vec![
                    r.value,
                    r.convention_constant,
                    d.points as f64,
                    d.h.unwrap_or(f64::NAN),
                    d.coarse,
                    d.fine,
                    d.extrapolated,
                    d.error_estimate,
                    if d.regularized { 1.0 } else { 0.0 },
                ]);
            }
            let mut out = Output::table(table);
            out.labels = Some(("kind".into(), kinds));
            out.json = Some(serde_json::to_value(&reports).expect("reports serialize"));
            Ok((out, v))
        }
        Cmd::Lambda => {
            let (c, v): (LambdaConfig, _) = load(&cli.config)?;
            let res = Resolution::new(c.h);
            let e = run_err(eigen_lambda(&c.domain, &res))?;
            let mut table = Table::new(&["lambda", "std_err", "residual"]);
            let mut labels = vec![e.method.clone()];
            table.push(vec![e.lambda, f64::NAN, e.residual]);
            if let Some(fit) = &c.fit {
                let grid = log_grid(fit.window.0, fit.window.1, fit.points);
                let f = run_err(exit_cdf_flux(&c.domain, &Point::origin(c.domain.dim()), &grid, &res))?;
                let l = run_err(fit_lambda(&SurvivalCurve::exact(grid, f.survival), fit.window))?;
                table.push(vec![l.lambda, l.std_err, f64::NAN]);
                labels.push("survival-fit".into());
            }
            let mut out = Output::table(table);
            out.labels = Some(("method".into(), labels));
            Ok((out, v))
        }
        Cmd::Tails => {
            let (c, v): (TailsConfig, _) = load(&cli.config)?;
            let batch = run_err(ExitSampleBatch::generate(BatchSpec {
                domain: c.domain.clone(),
                x0: start(&c.x0, &c.domain),
                sampler: SamplerSpec::Wos { eps: c.eps },
                seed,
                count: c.count,
                max_time: Some(c.window.1),
            }))?;
            let grid = log_grid(c.window.0, c.window.1, c.points);
            let curve = run_err(SurvivalCurve::from_times(&batch.times(), &grid))?;
            let fit = run_err(fit_tail_exponent(&curve, c.window))?;
            let mut table = Table::new(&["t", "survival"]);
            for k in 0..curve.t.len() {
                table.push(vec![curve.t[k], curve.s[k]]);
            }
            let mut out = Output::table(table);
            out.json = Some(serde_json::to_value(&fit).expect("fit serializes"));
            out.provenance.insert("exponent".into(), fit.exponent.to_string());
            out.provenance.insert("std_err".into(), fit.std_err.to_string());
            Ok((out, v))
        }
        Cmd::VerifyFastExit => {
            let (c, v) = load(&cli.config)?;
            Ok((experiment(verify_fast_exit(&c, seed))?, v))
        }
        Cmd::VerifyLongStay => {
            let (c, v) = load(&cli.config)?;
            Ok((experiment(verify_long_stay(&c, seed))?, v))
        }
        Cmd::VerifyLemma1 => {
            let (c, v) = load(&cli.config)?;
            Ok((experiment(verify_lemma1(&c, seed))?, v))
        }
        Cmd::VerifyHardy => {
            let (c, v) = load(&cli.config)?;
            Ok((experiment(verify_hardy_tails(&c, seed))?, v))
        }
        Cmd::DumpTables => {
            let t = table();
            let z = |o: Order| {
                let zt = t.get(o);
                serde_json::json!({ "nu": zt.nu, "zeros": zt.zeros, "jnu1_abs": zt.jnu1_abs })
            };
            let json = serde_json::json!({ "bessel": { "j0": z(Order::Zero), "j_half": z(Order::Half) } });
            let mut out = Output::table(Table::new(&[]));
            out.json = Some(json);
            Ok((out, serde_json::Value::Null))
        }
    }
}

fn experiment(r: Result<ExperimentResult, HarnessError>) -> Result<Output, CliError> {
    let r = r?;
    let mut out = Output::table(r.table.clone());
    out.provenance = r.provenance.clone();
    out.result = Some(r);
    Ok(out)
}

fn csv_text(out: &Output) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = Vec::new();
    if let Some((name, _)) = &out.labels {
        header.push(name.clone());
    }
    header.extend(out.table.columns.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in out.table.rows.iter().enumerate() {
        let mut rec: Vec<String> = Vec::new();
        if let Some((_, l)) = &out.labels {
            rec.push(l[i].clone());
        }
        rec.extend(row.iter().map(|v| super::cell(*v)));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

fn write_outputs(cli: &Cli, out: &Output, config: serde_json::Value, wall: f64, threads: usize) -> Result<(), HarnessError> {
    let body = if cli.cmd == Cmd::DumpTables {
        let mut s = serde_json::to_vec_pretty(out.json.as_ref().expect("tables")).expect("json");
        s.push(b'\n');
        s
    } else {
        csv_text(out)?
    };
    let Some(path) = &cli.out else {
        std::io::stdout().write_all(&body)?;
        report(cli, out);
        return Ok(());
    };
    std::fs::write(path, &body)?;
    if cli.cmd == Cmd::DumpTables {
        return Ok(());
    }
    let outputs = vec![path.display().to_string()];
    let (verdicts, notes, passed) = match &out.result {
        Some(r) => (r.verdicts.as_slice(), r.notes.clone(), Some(r.passed())),
        None => (&[][..], Vec::new(), None),
    };
    let mut provenance = out.provenance.clone();
    if let Some(j) = &out.json {
        provenance.insert("details".into(), j.to_string());
    }
    let m = Manifest {
        tool: "exitlab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.cmd.name(),
        seed: cli.seed,
        threads,
        config,
        outputs,
        passed,
        verdicts,
        provenance,
        notes,
        wall_time_s: wall,
    };
    let mut s = serde_json::to_vec_pretty(&m).expect("manifest serializes");
    s.push(b'\n');
    std::fs::write(manifest_path(path), s)?;
    report(cli, out);
    Ok(())
}

fn report(cli: &Cli, out: &Output) {
    if let Some(r) = out.result.as_ref().filter(|_| cli.verbose) {
        for v in &r.verdicts {
            eprintln!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
    }
}

/// `<out>` with its extension replaced by `manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Parse `argv` (program name first), run, and return the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("exitlab: {e}");
            return 2;
        }
    };
    let clock = Instant::now();
    let done = pool.install(|| execute(&cli));
    let (out, config) = match done {
        Ok(x) => x,
        Err(CliError::Usage(m)) => {
            eprintln!("exitlab: {m}");
            return 2;
        }
        Err(CliError::Run(e)) => {
            eprintln!("exitlab: {e}");
            return 2;
        }
    };
    if let Err(e) = write_outputs(&cli, &out, config, clock.elapsed().as_secs_f64(), threads) {
        eprintln!("exitlab: {e}");
        return 2;
    }
    match &out.result {
        Some(r) if !r.passed() => 1,
        _ => 0,
    }
}
