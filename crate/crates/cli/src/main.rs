//! `nsgls`: constants tables, ψ evaluation, snapshot norms, simulations,
//! estimate verification and parameter sweeps.
//!
//! Exit codes: 0 success or pass, 1 a check failed, 2 hypothesis not met,
//! 3 numerical failure, 4 bad input.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use nsgls_core::constants::{ConstantsRecord, RieszBound};
use nsgls_core::error::Error;
use nsgls_core::psi::{gls_norm, kappa, NormProfile, PsiSpec, PsiValue, Support};
use nsgls_core::snapshot;
use nsgls_core::solver::{min_threshold, run, write_norms_csv, SimulationConfig};
use nsgls_core::verify::{desk_scale_config, verify, Status, Theorem, Tolerances, VerificationReport};

use manifest::RunManifest;

const EXIT_FAIL: u8 = 1;
const EXIT_HYPOTHESIS: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_BAD_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "nsgls", version, about = "Grand Lebesgue estimates for periodic Navier–Stokes")]
struct Cli {
    /// Seed for every random choice; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bound {
    Integral,
    Sharp,
}

impl From<Bound> for RieszBound {
    fn from(b: Bound) -> Self {
        match b {
            Bound::Integral => RieszBound::Integral,
            Bound::Sharp => RieszBound::Sharp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Amplitude,
    ThresholdFraction,
    N,
    Dt,
}

#[derive(Subcommand)]
enum Command {
    /// Table of the closed-form constants at one dimension.
    Constants {
        #[arg(long)]
        d: u32,
        /// Comma-separated exponents.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Exponent range `lo:hi:step`, appended to `--p`.
        #[arg(long)]
        p_range: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, value_enum, default_value = "integral")]
        bound: Bound,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate a ψ-function given as JSON.
    Psi {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Datum for a natural ψ with an empty field list.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Norms of a snapshot.
    Norms {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,6")]
        p: Vec<f64>,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run a simulation and write norms.csv, snapshots and diagnostics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Verify one estimate and write its JSON report.
    Verify {
        /// thm31, thm41, thm51, thm61 or inequalities.
        #[arg(long)]
        theorem: String,
        /// Simulation config; the desk-scale preset when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// ψ spec; natural ψ of u_0 on [2, max p + 1) when omitted.
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Vary one scalar of a config and aggregate verification margins.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "thm31")]
        theorem: String,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) | Error::Overflow(_) => EXIT_NUMERICAL,
            _ => EXIT_BAD_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

fn bad_input(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_BAD_INPUT, message: message.into() }
}

type CliResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult {
    let started = Instant::now();
    match &cli.command {
        Command::Constants { d, p, p_range, format, bound, out_dir } => {
            let mut ps = p.clone();
            if let Some(range) = p_range {
                ps.extend(parse_range(range)?);
            }
            if ps.is_empty() {
                return Err(bad_input("give exponents with --p or --p-range"));
            }
            let records: Vec<ConstantsRecord> = ps.iter().map(|&p| ConstantsRecord::evaluate(*d, p, (*bound).into())).collect();
            let text = match format {
                Format::Csv => constants_csv(&records),
                Format::Json => constants_json(&records),
            };
            print!("{text}");
            if let Some(dir) = out_dir {
                fs::create_dir_all(dir).map_err(Error::from)?;
                let name = match format {
                    Format::Csv => "constants.csv",
                    Format::Json => "constants.json",
                };
                fs::write(dir.join(name), &text).map_err(Error::from)?;
                RunManifest::new("constants", None, dir, cli.seed.unwrap_or(0), started).write()?;
            }
            if records.iter().any(ConstantsRecord::any_valid) {
                Ok(0)
            } else {
                Err(bad_input(format!("no valid cells for d = {d}")))
            }
        }
        Command::Psi { spec, p, snapshot: datum } => {
            let spec = read_psi(spec)?;
            let datum = datum.as_deref().map(snapshot::read).transpose()?;
            let psi = spec.resolve(datum.as_ref(), p)?;
            let ps = if p.is_empty() { psi.grid().to_vec() } else { p.clone() };
            println!("p,psi");
            for q in ps {
                match psi.value(q) {
                    PsiValue::Finite(v) => println!("{q},{v}"),
                    PsiValue::Excluded => println!("{q},excluded"),
                }
            }
            for w in psi.warnings() {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
        Command::Norms { snapshot: path, p, psi, format } => {
            let u = snapshot::read(path)?;
            print!("{}", norms_report(&u, p, psi.as_deref(), *format)?);
            Ok(0)
        }
        Command::Simulate { config, out_dir } => {
            let cfg = load_config(Some(config), cli.seed)?;
            fs::create_dir_all(out_dir).map_err(Error::from)?;
            let out = run(&cfg)?;
            write_norms_csv(&out_dir.join("norms.csv"), &out.series)?;
            for (k, snap) in out.snapshots.iter().enumerate() {
                snapshot::write(&out_dir.join(format!("snapshot_{k:05}.nsgls")), snap)?;
            }
            let diag = serde_json::to_string_pretty(&out.diagnostics).expect("diagnostics serialise");
            fs::write(out_dir.join("diagnostics.json"), diag).map_err(Error::from)?;
            RunManifest::new("simulate", Some(config), out_dir, cfg.seed, started).write()?;
            match &out.diagnostics.failure {
                Some(f) => {
                    eprintln!("run aborted: {f}");
                    Ok(EXIT_NUMERICAL)
                }
                None => Ok(0),
            }
        }
        Command::Verify { theorem, config, psi, out_dir } => {
            let theorem = Theorem::parse(theorem)?;
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let spec = psi_spec_for(psi.as_deref(), &cfg)?;
            fs::create_dir_all(out_dir).map_err(Error::from)?;
            let report = verify(theorem, &cfg, &spec, &Tolerances::default())?;
            fs::write(out_dir.join(format!("report_{}.json", theorem.id())), report.to_json()).map_err(Error::from)?;
            RunManifest::new("verify", config.as_deref(), out_dir, cfg.seed, started).write()?;
            println!("{} {:?}", theorem.id(), report.status);
            Ok(status_code(report.status))
        }
        Command::Sweep { config, axis, values, theorem, psi, out_dir } => {
            let theorem = Theorem::parse(theorem)?;
            let base = load_config(config.as_deref(), cli.seed)?;
            let spec = psi_spec_for(psi.as_deref(), &base)?;
            fs::create_dir_all(out_dir).map_err(Error::from)?;
            let csv = sweep(&base, *axis, values, theorem, &spec)?;
            fs::write(out_dir.join("sweep.csv"), &csv).map_err(Error::from)?;
            RunManifest::new("sweep", config.as_deref(), out_dir, base.seed, started).write()?;
            print!("{csv}");
            Ok(0)
        }
    }
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Pass => 0,
        Status::Fail => EXIT_FAIL,
        Status::HypothesisNotMet => EXIT_HYPOTHESIS,
        Status::NumericalFailure => EXIT_NUMERICAL,
    }
}

fn parse_range(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad_input(format!("--p-range {text:?}: {e}")))?;
    let [lo, hi, step] = parts[..] else {
        return Err(bad_input(format!("--p-range {text:?} must be lo:hi:step")));
    };
    if !(step > 0.0 && hi >= lo) {
        return Err(bad_input(format!("--p-range {text:?} needs lo ≤ hi and step > 0")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| lo + k as f64 * step).collect())
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimulationConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| bad_input(format!("{}: {e}", p.display())))?;
            SimulationConfig::from_json(&text)?
        }
        None => desk_scale_config(0),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(bad_input(format!("invalid config:\n  {}", violations.join("\n  "))));
    }
    Ok(cfg)
}

fn read_psi(path: &Path) -> Result<PsiSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
    Ok(PsiSpec::from_json(&text)?)
}

fn psi_spec_for(path: Option<&Path>, cfg: &SimulationConfig) -> Result<PsiSpec, Failure> {
    match path {
        Some(p) => read_psi(p),
        None => {
            let top = cfg.p_grid.iter().cloned().fold(cfg.d as f64, f64::max);
            Ok(PsiSpec::Natural { fields: Vec::new(), support: Some(Support::half_open(2.0, top + 1.0)), grid: None })
        }
    }
}

fn cell_text(cell: &nsgls_core::Result<f64>) -> String {
    match cell {
        Ok(v) => format!("{v:e}"),
        Err(e) => format!("n/a ({e})"),
    }
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn constants_csv(records: &[ConstantsRecord]) -> String {
    let mut out = ConstantsRecord::COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let mut row = vec![r.d.to_string(), r.p.to_string()];
        row.extend(r.cells().iter().map(|(_, c)| csv_field(&cell_text(c))));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn constants_json(records: &[ConstantsRecord]) -> String {
    let rows: Vec<Value> = records
        .iter()
        .map(|r| {
            let mut row = serde_json::Map::new();
            row.insert("d".into(), json!(r.d));
            row.insert("p".into(), json!(r.p));
            for (name, cell) in r.cells() {
                let v = match cell {
                    Ok(v) => json!(v),
                    Err(e) => json!({ "n/a": e.to_string() }),
                };
                row.insert(name.into(), v);
            }
            Value::Object(row)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rows).expect("rows serialise");
    text.push('\n');
    text
}

fn norms_report(u: &nsgls_core::field::VectorField, ps: &[f64], psi: Option<&Path>, format: Format) -> Result<String, Failure> {
    let d = u.grid.d as u32;
    let l2 = u.lp_norm(2.0)?;
    let mut rows = Vec::new();
    for &p in ps {
        let lp = u.lp_norm(p)?;
        let k = if p > 2.0 { Some(kappa(lp, l2, d, p)?) } else { None };
        rows.push((p, lp, k));
    }
    let gls = match psi {
        Some(path) => {
            let spec = read_psi(path)?;
            let psi = spec.resolve(Some(u), ps)?;
            let grid: Vec<f64> = psi.active().map(|(p, _)| p).collect();
            Some(gls_norm(&NormProfile::of_field(u, &grid, "snapshot")?, &psi)?)
        }
        None => None,
    };
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("p,lp,kappa\n");
            for (p, lp, k) in &rows {
                let k = k.map_or_else(|| "n/a (needs p > 2)".to_string(), |k| k.to_string());
                out.push_str(&format!("{p},{lp},{}\n", csv_field(&k)));
            }
            out.push_str(&format!("# l2,{l2}\n"));
            if let Some(g) = gls {
                out.push_str(&format!("# gls,{g}\n"));
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = rows.iter().map(|(p, lp, k)| json!({"p": p, "lp": lp, "kappa": k})).collect();
            let mut text = serde_json::to_string_pretty(&json!({"l2": l2, "norms": rows, "gls": gls})).expect("serialise");
            text.push('\n');
            text
        }
    })
}

fn apply_axis(base: &SimulationConfig, axis: Axis, value: f64) -> Result<SimulationConfig, Failure> {
    let mut cfg = base.clone();
    match axis {
        Axis::Amplitude => {
            cfg.initial.amplitude = value;
            cfg.initial.scale_to_threshold = None;
        }
        Axis::ThresholdFraction => cfg.initial.scale_to_threshold = Some(value),
        Axis::N => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(bad_input(format!("n = {value} is not a whole number")));
            }
            cfg.n = value as usize;
        }
        Axis::Dt => cfg.dt = value,
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(bad_input(format!("axis value {value}: {}", violations.join("; "))));
    }
    Ok(cfg)
}

/// Worker count from `NSGLS_THREADS`, or rayon's default.
fn thread_cap() -> Option<usize> {
    std::env::var("NSGLS_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
}

fn sweep(base: &SimulationConfig, axis: Axis, values: &[f64], theorem: Theorem, spec: &PsiSpec) -> Result<String, Failure> {
    let configs = values.iter().map(|&v| apply_axis(base, axis, v)).collect::<Result<Vec<_>, _>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| bad_input(format!("thread pool: {e}")))?;
    let tol = Tolerances::default();
    let results: Vec<Result<(VerificationReport, Option<f64>), Error>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let report = verify(theorem, cfg, spec, &tol)?;
                Ok((report, threshold_log_margin(cfg)?))
            })
            .collect()
    });
    let mut out = String::from("value,status,pass,max_ratio,max_violation,ln_threshold_margin\n");
    for (value, result) in values.iter().zip(results) {
        let (report, margin) = result?;
        let max_ratio = report.margins.iter().filter_map(|m| m.ratio).fold(None, |a: Option<f64>, r| Some(a.map_or(r, |a| a.max(r))));
        let max_violation =
            report.margins.iter().filter_map(|m| m.violation).fold(None, |a: Option<f64>, r| Some(a.map_or(r, |a| a.max(r))));
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let status = serde_json::to_value(report.status).expect("status serialises");
        out.push_str(&format!(
            "{value},{},{},{},{},{}\n",
            status.as_str().unwrap_or_default(),
            report.pass,
            fmt(max_ratio),
            fmt(max_violation),
            fmt(margin)
        ));
    }
    Ok(out)
}

/// `ln(min_p threshold / ‖u_0‖_d)`: positive below the small-data threshold.
fn threshold_log_margin(cfg: &SimulationConfig) -> Result<Option<f64>, Error> {
    if cfg.d < 3 || !cfg.p_grid.iter().any(|&p| p > cfg.d as f64) {
        return Ok(None);
    }
    let norm = cfg.initial_field()?.lp_norm(cfg.d as f64)?;
    if norm == 0.0 {
        return Ok(None);
    }
    Ok(Some(min_threshold(cfg.d as u32, &cfg.p_grid, cfg.initial.bound)?.ln() - norm.ln()))
}
