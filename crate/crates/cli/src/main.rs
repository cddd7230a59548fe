//! Command-line front end for the `minent` calculators and simulators.
//!
//! Subcommands:
//!
//! * `bb84` — finite-key length for entanglement-based BB84.
//! * `diqkd` — finite-key length for the CHSH device-independent protocol.
//! * `qrng` — certified output length for heterodyne randomness generation.
//! * `mineval` — min-entropy bound and guessing probability of a profile.
//! * `simulate {bb84,chsh,qrng}` — Monte Carlo samplers.
//!
//! Parameters come from flags or from a flat JSON config object passed with
//! `--config` (same key spelling as the flags); flags override file values.
//! Numeric flags accept scientific notation; counts must be integral after
//! parsing. `--sweep NAME=START:STOP:STEPS` reruns the calculator over an
//! evenly spaced grid and emits one record per grid point, ordered by grid
//! index.
//!
//! Output formats (`--out`): `json` (default; includes a config echo that can
//! be fed back via `--config` to reproduce the run byte-for-byte), `csv`
//! (RFC 4180, header row of field names), and `text` (aligned key = value
//! lines). Identical inputs and seed produce byte-identical output.
//!
//! Bitstreams written by `simulate qrng --emit-bits` are packed
//! little-endian within bytes: bit `i` of byte `j` is raw bit `8j + i`; each
//! quadrant symbol contributes two raw bits, low bit first. The optional
//! Toeplitz extraction stage draws its hash seed from RNG seed + 1 so the
//! sampling stream is unaffected.
//!
//! Exit codes: 0 success, 2 invalid input, 3 internal numeric failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use minent::bb84::{self, Bb84Error};
use minent::bounds::{self, BoundsError, FailureBudget};
use minent::diqkd::{self, DiqkdError, MeasurementAngles, SingleRoundSpectrum};
use minent::minentropy::{min_entropy_lb, profile_guess_prob, EigProfile, MinEntropyError};
use minent::qmath::MatrixError;
use minent::qrng::{self, FockDiagonalState, QrngError, QrngParams, ToeplitzSeed};
use minent::report::KeyRateReport;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

// ----- error handling and exit codes -----

/// CLI failure: either bad input (exit 2) or a numerical failure inside the
/// calculators (exit 3).
#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(String),
}

type CliResult<T> = Result<T, CliError>;

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MinEntropyError> for CliError {
    fn from(e: MinEntropyError) -> Self {
        match e {
            MinEntropyError::Matrix(m) => m.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<Bb84Error> for CliError {
    fn from(e: Bb84Error) -> Self {
        match e {
            Bb84Error::MinEntropy(inner) => inner.into(),
            Bb84Error::Bounds(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<DiqkdError> for CliError {
    fn from(e: DiqkdError) -> Self {
        match e {
            DiqkdError::Matrix(inner) => inner.into(),
            DiqkdError::MinEntropy(inner) => inner.into(),
            DiqkdError::Bounds(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<QrngError> for CliError {
    fn from(e: QrngError) -> Self {
        let numeric = matches!(e, QrngError::Numerics { .. });
        match e {
            QrngError::Matrix(inner) => inner.into(),
            QrngError::MinEntropy(inner) => inner.into(),
            QrngError::Bounds(inner) => inner.into(),
            other if numeric => CliError::Numeric(other.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

// ----- command-line grammar -----

#[derive(Parser)]
#[command(
    name = "minent",
    version,
    about = "Finite-size key and randomness calculators built on one-shot min-entropy bounds",
    propagate_version = true
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json, global = true)]
    out: OutputFormat,

    /// RNG seed for the simulators (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config file with the same key spelling as the flags; flags
    /// override file values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Rerun over an evenly spaced grid of one numeric parameter and emit
    /// one record per grid point.
    #[arg(long, global = true, value_name = "NAME=START:STOP:STEPS")]
    sweep: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-key length for entanglement-based BB84.
    Bb84(Bb84Args),
    /// Finite-key length for the CHSH device-independent protocol.
    Diqkd(DiqkdArgs),
    /// Certified randomness length for heterodyne quadrant binning.
    Qrng(QrngArgs),
    /// Min-entropy bound and guessing probability of an eigenvalue profile.
    Mineval(MinevalArgs),
    /// Monte Carlo samplers.
    #[command(subcommand)]
    Simulate(SimulateCmd),
}

#[derive(Args)]
struct Bb84Args {
    /// Key-generation rounds (scientific notation accepted, must be integral).
    #[arg(long)]
    n: Option<f64>,
    /// Test rounds per basis.
    #[arg(long)]
    k: Option<f64>,
    /// Observed Z-basis (key) error rate.
    #[arg(long)]
    ez: Option<f64>,
    /// Observed X-basis (test) error rate.
    #[arg(long)]
    ex: Option<f64>,
    /// Secrecy failure budget ε_sec.
    #[arg(long = "eps-sec")]
    eps_sec: Option<f64>,
    /// Correctness failure budget ε_cor.
    #[arg(long = "eps-cor")]
    eps_cor: Option<f64>,
    /// Error-correction leakage in bits, or `auto` for 1.16·n·h(ex).
    #[arg(long)]
    leak: Option<String>,
    /// Report the asymptotic secret fraction and the zero-rate error
    /// threshold instead of the finite-size length.
    #[arg(long)]
    asymptotic: bool,
}

#[derive(Args)]
struct DiqkdArgs {
    /// Key-generation rounds.
    #[arg(long)]
    n: Option<f64>,
    /// CHSH test rounds.
    #[arg(long)]
    k: Option<f64>,
    /// Observed CHSH winning frequency.
    #[arg(long)]
    omega: Option<f64>,
    /// Error-correction leakage in bits.
    #[arg(long)]
    leak: Option<f64>,
    /// CHSH-test failure budget ε_t.
    #[arg(long = "eps-t")]
    eps_t: Option<f64>,
    /// Generation-sampling failure budget ε_g.
    #[arg(long = "eps-g")]
    eps_g: Option<f64>,
    /// Correctness failure budget ε_cor.
    #[arg(long = "eps-cor")]
    eps_cor: Option<f64>,
    /// Report the asymptotic rate 1 − h(phase error) instead of the
    /// finite-size length.
    #[arg(long)]
    asymptotic: bool,
}

#[derive(Args)]
struct QrngArgs {
    /// Generation rounds.
    #[arg(long)]
    n: Option<f64>,
    /// Test rounds.
    #[arg(long)]
    k: Option<f64>,
    /// Observed click frequency in the test rounds.
    #[arg(long = "Q")]
    q_obs: Option<f64>,
    /// Secrecy failure budget ε_sec.
    #[arg(long = "eps-sec")]
    eps_sec: Option<f64>,
    /// Report the asymptotic bits-per-round rate instead of the finite-size
    /// length.
    #[arg(long)]
    asymptotic: bool,
}

#[derive(Args)]
struct MinevalArgs {
    /// Comma-separated eigenvalue profile, e.g. 0.7,0.3.
    #[arg(long)]
    lambdas: Option<String>,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Depolarizing-channel BB84 sampler.
    Bb84(SimBb84Args),
    /// Born-rule CHSH game sampler.
    Chsh(SimChshArgs),
    /// Heterodyne quadrant sampler with optional Toeplitz extraction.
    Qrng(SimQrngArgs),
}

#[derive(Args)]
struct SimBb84Args {
    /// Number of EPR pairs.
    #[arg(long)]
    pairs: Option<f64>,
    /// Depolarizing strength q in [0, 1].
    #[arg(long)]
    depol: Option<f64>,
}

#[derive(Args)]
struct SimChshArgs {
    /// Number of game rounds.
    #[arg(long)]
    rounds: Option<f64>,
    /// Werner noise parameter q in [0, 1] (0 = ideal Bell pair).
    #[arg(long)]
    werner: Option<f64>,
    /// Alice's measurement-plane angle α (radians; default 0).
    #[arg(long)]
    alpha: Option<f64>,
    /// Bob's measurement angle β (radians; default π/4).
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct SimQrngArgs {
    /// Number of heterodyne rounds.
    #[arg(long)]
    rounds: Option<f64>,
    /// Source: vacuum | fock:M | poisson:MU | thermal:NBAR.
    #[arg(long)]
    source: Option<String>,
    /// Write the raw symbol bits to this file, packed 8 bits per byte
    /// (bit i of byte j is raw bit 8j + i; two bits per symbol, low first).
    #[arg(long = "emit-bits", value_name = "PATH")]
    emit_bits: Option<PathBuf>,
    /// Toeplitz-extract this many output bits from the raw bits.
    #[arg(long, value_name = "BITS")]
    extract: Option<f64>,
    /// Write the extracted bits to this file (requires --extract).
    #[arg(long = "emit-extracted", value_name = "PATH")]
    emit_extracted: Option<PathBuf>,
}

// ----- config file handling -----

/// Flat JSON config object; values are looked up by flag name.
struct Resolver {
    cfg: Map<String, Value>,
}

impl Resolver {
    fn load(path: Option<&PathBuf>) -> CliResult<Self> {
        let mut cfg = Map::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?;
            match value {
                Value::Object(map) => cfg = map,
                _ => return Err(CliError::usage("config must be a flat JSON object")),
            }
        }
        Ok(Resolver { cfg })
    }

    /// Reject config keys the chosen command does not understand ("seed" is
    /// accepted everywhere for parity with the global flag).
    fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        for key in self.cfg.keys() {
            if key != "seed" && !allowed.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "unknown config key {key:?} for this command (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn num_key(&self, key: &str) -> CliResult<Option<f64>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(Value::String(s)) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key {key:?} is not numeric: {s:?}"))),
            Some(other) => Err(CliError::usage(format!(
                "config key {key:?} must be a number, got {other}"
            ))),
        }
    }

    fn str_key(&self, key: &str) -> CliResult<Option<String>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(other) => Err(CliError::usage(format!(
                "config key {key:?} must be a string, got {other}"
            ))),
        }
    }

    fn bool_key(&self, key: &str) -> CliResult<Option<bool>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(other) => Err(CliError::usage(format!(
                "config key {key:?} must be a boolean, got {other}"
            ))),
        }
    }

    /// Required float: flag wins, then config, then an error.
    fn f64(&self, flag: Option<f64>, key: &str) -> CliResult<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        self.num_key(key)?
            .ok_or_else(|| CliError::usage(format!("missing required parameter --{key}")))
    }

    /// Optional float with a default.
    fn f64_or(&self, flag: Option<f64>, key: &str, default: f64) -> CliResult<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.num_key(key)?.unwrap_or(default))
    }

    /// Required count: must be a nonnegative integer ≥ 1 after parsing.
    fn count(&self, flag: Option<f64>, key: &str) -> CliResult<u64> {
        to_count(self.f64(flag, key)?, key)
    }

    /// Boolean switch: the flag can only turn it on; config may set it
    /// either way.
    fn switch(&self, flag: bool, key: &str) -> CliResult<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.bool_key(key)?.unwrap_or(false))
    }

    fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        match self.num_key("seed")? {
            None => Ok(0),
            Some(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= MAX_EXACT_COUNT => {
                Ok(v as u64)
            }
            Some(v) => Err(CliError::usage(format!(
                "config seed must be a nonnegative integer, got {v}"
            ))),
        }
    }
}

/// Largest float that still represents integers exactly.
const MAX_EXACT_COUNT: f64 = 9_007_199_254_740_992.0;

fn to_count(v: f64, key: &str) -> CliResult<u64> {
    if !v.is_finite() || v < 1.0 || v.fract() != 0.0 || v > MAX_EXACT_COUNT {
        return Err(CliError::usage(format!(
            "--{key} must be a positive integer (scientific notation allowed), got {v}"
        )));
    }
    Ok(v as u64)
}

/// Counts on a sweep grid are rounded to the nearest integer first.
fn to_swept_count(v: f64, key: &str) -> CliResult<u64> {
    if !v.is_finite() {
        return Err(CliError::usage(format!("swept value for {key} is not finite")));
    }
    to_count(v.round().max(1.0), key)
}

fn parse_lambdas(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("invalid eigenvalue {:?} in --lambdas", part.trim())))
        })
        .collect()
}

// ----- sweep grammar -----

struct Sweep {
    name: String,
    values: Vec<f64>,
}

fn parse_sweep(text: &str) -> CliResult<Sweep> {
    let bad = || {
        CliError::usage(format!(
            "--sweep expects NAME=START:STOP:STEPS, got {text:?}"
        ))
    };
    let (name, grid) = text.split_once('=').ok_or_else(bad)?;
    let name = name.trim();
    if name.is_empty() {
        return Err(bad());
    }
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !start.is_finite() || !stop.is_finite() || steps == 0 {
        return Err(bad());
    }
    let values = if steps == 1 {
        vec![start]
    } else {
        let step = (stop - start) / (steps - 1) as f64;
        (0..steps).map(|i| start + step * i as f64).collect()
    };
    Ok(Sweep { name: name.to_string(), values })
}

// ----- report bodies and output assembly -----

/// What one run produced: a full finite-size report or a small value table.
enum ReportBody {
    Rate(KeyRateReport),
    Table(BTreeMap<String, f64>),
}

impl ReportBody {
    fn to_json(&self) -> Value {
        match self {
            ReportBody::Rate(r) => serde_json::to_value(r).expect("report serialization"),
            ReportBody::Table(t) => json!(t),
        }
    }

    /// Flat name → value view for CSV and text output; the headline fields
    /// of a rate report are merged into its term breakdown.
    fn flat_terms(&self) -> BTreeMap<String, f64> {
        match self {
            ReportBody::Rate(r) => {
                let mut terms = r.terms.clone();
                terms.insert("hmin_smooth".into(), r.hmin_smooth);
                terms.insert("e_hat".into(), r.e_hat);
                terms.insert("ell".into(), r.ell as f64);
                terms.insert("delta_sec".into(), r.delta_sec);
                terms
            }
            ReportBody::Table(t) => t.clone(),
        }
    }
}

enum Outcome {
    Single(ReportBody),
    Sweep {
        name: String,
        records: Vec<(f64, ReportBody)>,
    },
}

fn emit(fmt: OutputFormat, command: &str, config: &Value, outcome: &Outcome) -> CliResult<String> {
    match fmt {
        OutputFormat::Json => emit_json(command, config, outcome),
        OutputFormat::Csv => emit_csv(outcome),
        OutputFormat::Text => Ok(emit_text(command, outcome)),
    }
}

fn emit_json(command: &str, config: &Value, outcome: &Outcome) -> CliResult<String> {
    let value = match outcome {
        Outcome::Single(body) => json!({
            "command": command,
            "config": config,
            "report": body.to_json(),
        }),
        Outcome::Sweep { name, records } => {
            let rows: Vec<Value> = records
                .iter()
                .map(|(v, body)| json!({ name.clone(): v, "report": body.to_json() }))
                .collect();
            json!({
                "command": command,
                "config": config,
                "sweep": name,
                "records": rows,
            })
        }
    };
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|e| CliError::Numeric(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn emit_csv(outcome: &Outcome) -> CliResult<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let write = |writer: &mut csv::Writer<Vec<u8>>, row: Vec<String>| {
        writer
            .write_record(&row)
            .map_err(|e| CliError::Numeric(format!("csv write failed: {e}")))
    };
    match outcome {
        Outcome::Single(body) => {
            let terms = body.flat_terms();
            write(&mut writer, terms.keys().cloned().collect())?;
            write(&mut writer, terms.values().map(|v| v.to_string()).collect())?;
        }
        Outcome::Sweep { name, records } => {
            let keys: Vec<String> = match records.first() {
                Some((_, body)) => body.flat_terms().keys().cloned().collect(),
                None => Vec::new(),
            };
            let mut header = vec![format!("sweep:{name}")];
            header.extend(keys.iter().cloned());
            write(&mut writer, header)?;
            for (value, body) in records {
                let terms = body.flat_terms();
                let mut row = vec![value.to_string()];
                for key in &keys {
                    row.push(terms.get(key).map_or_else(String::new, |v| v.to_string()));
                }
                write(&mut writer, row)?;
            }
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Numeric(format!("csv write failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numeric(format!("csv encoding failed: {e}")))
}

fn emit_text(command: &str, outcome: &Outcome) -> String {
    let mut out = String::new();
    let block = |out: &mut String, indent: &str, terms: &BTreeMap<String, f64>| {
        let width = terms.keys().map(String::len).max().unwrap_or(0);
        for (key, value) in terms {
            let _ = writeln!(out, "{indent}{key:<width$} = {value}");
        }
    };
    match outcome {
        Outcome::Single(body) => {
            let _ = writeln!(out, "command: {command}");
            block(&mut out, "", &body.flat_terms());
        }
        Outcome::Sweep { name, records } => {
            let _ = writeln!(out, "command: {command}");
            let _ = writeln!(out, "sweep: {name}");
            for (value, body) in records {
                let _ = writeln!(out);
                let _ = writeln!(out, "{name} = {value}");
                block(&mut out, "  ", &body.flat_terms());
            }
        }
    }
    out
}

// ----- per-command parameter sets -----

/// A resolved, runnable parameter block: knows how to rerun itself with one
/// parameter overridden (for sweeps), echo its configuration, and execute.
trait ParamSet: Clone {
    fn apply(&mut self, name: &str, value: f64) -> CliResult<()>;
    fn run(&self) -> CliResult<ReportBody>;
    fn echo(&self) -> Value;
}

fn drive<P: ParamSet>(
    command: &str,
    base: P,
    sweep: Option<Sweep>,
    fmt: OutputFormat,
) -> CliResult<String> {
    let config = base.echo();
    let outcome = match sweep {
        None => Outcome::Single(base.run()?),
        Some(sw) => {
            let mut records = Vec::with_capacity(sw.values.len());
            for &value in &sw.values {
                let mut point = base.clone();
                point.apply(&sw.name, value)?;
                records.push((value, point.run()?));
            }
            Outcome::Sweep { name: sw.name, records }
        }
    };
    emit(fmt, command, &config, &outcome)
}

fn no_sweep(command: &str, name: &str) -> CliError {
    CliError::usage(format!("{command} has no sweepable parameter {name:?}"))
}

// --- bb84 ---

#[derive(Clone)]
struct Bb84Set {
    n: u64,
    k: u64,
    ez: f64,
    ex: f64,
    eps_sec: f64,
    eps_cor: f64,
    /// None = `auto` (1.16·n·h(ex)), Some = explicit bits.
    leak: Option<f64>,
    asymptotic: bool,
}

fn prep_bb84(a: Bb84Args, r: &Resolver) -> CliResult<Bb84Set> {
    r.check_keys(&["n", "k", "ez", "ex", "eps-sec", "eps-cor", "leak", "asymptotic"])?;
    let leak_text = match a.leak {
        Some(text) => text,
        None => r.str_key("leak")?.unwrap_or_else(|| "auto".into()),
    };
    let leak = if leak_text == "auto" {
        None
    } else {
        Some(leak_text.parse::<f64>().map_err(|_| {
            CliError::usage(format!("--leak must be a number or \"auto\", got {leak_text:?}"))
        })?)
    };
    Ok(Bb84Set {
        n: r.count(a.n, "n")?,
        k: r.count(a.k, "k")?,
        ez: r.f64(a.ez, "ez")?,
        ex: r.f64(a.ex, "ex")?,
        eps_sec: r.f64(a.eps_sec, "eps-sec")?,
        eps_cor: r.f64(a.eps_cor, "eps-cor")?,
        leak,
        asymptotic: r.switch(a.asymptotic, "asymptotic")?,
    })
}

impl Bb84Set {
    fn budget(&self) -> CliResult<FailureBudget> {
        Ok(FailureBudget::qkd(self.eps_sec / 4.0, self.eps_cor)?)
    }
}

impl ParamSet for Bb84Set {
    fn apply(&mut self, name: &str, value: f64) -> CliResult<()> {
        match name {
            "n" => self.n = to_swept_count(value, "n")?,
            "k" => self.k = to_swept_count(value, "k")?,
            "ez" => self.ez = value,
            "ex" => self.ex = value,
            "eps-sec" => self.eps_sec = value,
            "eps-cor" => self.eps_cor = value,
            "leak" => self.leak = Some(value),
            other => return Err(no_sweep("bb84", other)),
        }
        Ok(())
    }

    fn run(&self) -> CliResult<ReportBody> {
        let budget = self.budget()?;
        if self.asymptotic {
            let rate = bb84::bb84_asymptotic_rate(self.ex, self.ez, bb84::EC_EFFICIENCY)?;
            let threshold = bb84::zero_rate_threshold(self.n, self.k, &budget, bb84::EC_EFFICIENCY)?;
            let mut table = BTreeMap::new();
            table.insert("rate".into(), rate);
            table.insert("zero_rate_threshold".into(), threshold);
            return Ok(ReportBody::Table(table));
        }
        let params = match self.leak {
            None => bb84::Bb84Params::with_standard_leak(self.n, self.k, self.ex, self.ez, budget)?,
            Some(bits) => bb84::Bb84Params::new(self.n, self.k, self.ex, self.ez, bits, budget)?,
        };
        Ok(ReportBody::Rate(bb84::bb84_key_length(&params)?))
    }

    fn echo(&self) -> Value {
        let mut map = Map::new();
        map.insert("n".into(), json!(self.n));
        map.insert("k".into(), json!(self.k));
        map.insert("ez".into(), json!(self.ez));
        map.insert("ex".into(), json!(self.ex));
        map.insert("eps-sec".into(), json!(self.eps_sec));
        map.insert("eps-cor".into(), json!(self.eps_cor));
        match self.leak {
            None => map.insert("leak".into(), json!("auto")),
            Some(bits) => map.insert("leak".into(), json!(bits)),
        };
        if self.asymptotic {
            map.insert("asymptotic".into(), json!(true));
        }
        Value::Object(map)
    }
}

// --- diqkd ---

#[derive(Clone)]
struct DiqkdSet {
    n: u64,
    k: u64,
    omega: f64,
    leak: f64,
    eps_t: f64,
    eps_g: f64,
    eps_cor: f64,
    asymptotic: bool,
}

fn prep_diqkd(a: DiqkdArgs, r: &Resolver) -> CliResult<DiqkdSet> {
    r.check_keys(&["n", "k", "omega", "leak", "eps-t", "eps-g", "eps-cor", "asymptotic"])?;
    Ok(DiqkdSet {
        n: r.count(a.n, "n")?,
        k: r.count(a.k, "k")?,
        omega: r.f64(a.omega, "omega")?,
        leak: r.f64(a.leak, "leak")?,
        eps_t: r.f64(a.eps_t, "eps-t")?,
        eps_g: r.f64(a.eps_g, "eps-g")?,
        eps_cor: r.f64(a.eps_cor, "eps-cor")?,
        asymptotic: r.switch(a.asymptotic, "asymptotic")?,
    })
}

impl ParamSet for DiqkdSet {
    fn apply(&mut self, name: &str, value: f64) -> CliResult<()> {
        match name {
            "n" => self.n = to_swept_count(value, "n")?,
            "k" => self.k = to_swept_count(value, "k")?,
            "omega" => self.omega = value,
            "leak" => self.leak = value,
            "eps-t" => self.eps_t = value,
            "eps-g" => self.eps_g = value,
            "eps-cor" => self.eps_cor = value,
            other => return Err(no_sweep("diqkd", other)),
        }
        Ok(())
    }

    fn run(&self) -> CliResult<ReportBody> {
        let budget = FailureBudget::diqkd(self.eps_t, self.eps_g, self.eps_cor)?;
        if self.asymptotic {
            if !(0.0..=1.0).contains(&self.omega) {
                return Err(CliError::usage(format!(
                    "--omega must lie in [0, 1], got {}",
                    self.omega
                )));
            }
            let phase_error = diqkd::phase_error_from_omega(self.omega);
            let rate = 1.0 - bounds::binary_entropy(phase_error)?;
            let mut table = BTreeMap::new();
            table.insert("phase_error".into(), phase_error);
            table.insert("rate".into(), rate);
            return Ok(ReportBody::Table(table));
        }
        let params = diqkd::DiqkdParams::new(self.n, self.k, self.omega, self.leak, budget)?;
        Ok(ReportBody::Rate(diqkd::diqkd_key_length(&params)?))
    }

    fn echo(&self) -> Value {
        let mut map = Map::new();
        map.insert("n".into(), json!(self.n));
        map.insert("k".into(), json!(self.k));
        map.insert("omega".into(), json!(self.omega));
        map.insert("leak".into(), json!(self.leak));
        map.insert("eps-t".into(), json!(self.eps_t));
        map.insert("eps-g".into(), json!(self.eps_g));
        map.insert("eps-cor".into(), json!(self.eps_cor));
        if self.asymptotic {
            map.insert("asymptotic".into(), json!(true));
        }
        Value::Object(map)
    }
}

// --- qrng ---

#[derive(Clone)]
struct QrngSet {
    n: u64,
    k: u64,
    q_obs: f64,
    eps_sec: f64,
    asymptotic: bool,
}

fn prep_qrng(a: QrngArgs, r: &Resolver) -> CliResult<QrngSet> {
    r.check_keys(&["n", "k", "Q", "eps-sec", "asymptotic"])?;
    Ok(QrngSet {
        n: r.count(a.n, "n")?,
        k: r.count(a.k, "k")?,
        q_obs: r.f64(a.q_obs, "Q")?,
        eps_sec: r.f64(a.eps_sec, "eps-sec")?,
        asymptotic: r.switch(a.asymptotic, "asymptotic")?,
    })
}

impl ParamSet for QrngSet {
    fn apply(&mut self, name: &str, value: f64) -> CliResult<()> {
        match name {
            "n" => self.n = to_swept_count(value, "n")?,
            "k" => self.k = to_swept_count(value, "k")?,
            "Q" => self.q_obs = value,
            "eps-sec" => self.eps_sec = value,
            other => return Err(no_sweep("qrng", other)),
        }
        Ok(())
    }

    fn run(&self) -> CliResult<ReportBody> {
        if self.asymptotic {
            let mut table = BTreeMap::new();
            table.insert("rate".into(), qrng::qrng_asymptotic_rate(self.q_obs)?);
            return Ok(ReportBody::Table(table));
        }
        let budget = FailureBudget::qrng(self.eps_sec)?;
        let params = QrngParams::new(self.n, self.k, self.q_obs, budget)?;
        Ok(ReportBody::Rate(qrng::qrng_output_length(&params)?))
    }

    fn echo(&self) -> Value {
        let mut map = Map::new();
        map.insert("n".into(), json!(self.n));
        map.insert("k".into(), json!(self.k));
        map.insert("Q".into(), json!(self.q_obs));
        map.insert("eps-sec".into(), json!(self.eps_sec));
        if self.asymptotic {
            map.insert("asymptotic".into(), json!(true));
        }
        Value::Object(map)
    }
}

// --- mineval ---

#[derive(Clone)]
struct MinevalSet {
    lambdas: Vec<f64>,
}

fn prep_mineval(a: MinevalArgs, r: &Resolver) -> CliResult<MinevalSet> {
    r.check_keys(&["lambdas"])?;
    let lambdas = match a.lambdas {
        Some(text) => parse_lambdas(&text)?,
        None => match r.cfg.get("lambdas") {
            Some(Value::Array(items)) => items
                .iter()
                .map(|item| {
                    item.as_f64().ok_or_else(|| {
                        CliError::usage(format!("config lambdas entry {item} is not a number"))
                    })
                })
                .collect::<CliResult<Vec<f64>>>()?,
            Some(Value::String(text)) => parse_lambdas(text)?,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "config key \"lambdas\" must be an array or string, got {other}"
                )))
            }
            None => return Err(CliError::usage("missing required parameter --lambdas")),
        },
    };
    Ok(MinevalSet { lambdas })
}

impl ParamSet for MinevalSet {
    fn apply(&mut self, name: &str, _value: f64) -> CliResult<()> {
        Err(no_sweep("mineval", name))
    }

    fn run(&self) -> CliResult<ReportBody> {
        let profile = EigProfile::new(self.lambdas.clone())?;
        let mut table = BTreeMap::new();
        table.insert("d".into(), self.lambdas.len() as f64);
        table.insert("hmin".into(), min_entropy_lb(&profile));
        table.insert("pguess".into(), profile_guess_prob(&profile));
        Ok(ReportBody::Table(table))
    }

    fn echo(&self) -> Value {
        json!({ "lambdas": self.lambdas })
    }
}

// --- simulate bb84 ---

#[derive(Clone)]
struct SimBb84Set {
    pairs: u64,
    depol: f64,
    seed: u64,
}

fn prep_sim_bb84(a: SimBb84Args, seed: Option<u64>, r: &Resolver) -> CliResult<SimBb84Set> {
    r.check_keys(&["pairs", "depol"])?;
    Ok(SimBb84Set {
        pairs: r.count(a.pairs, "pairs")?,
        depol: r.f64(a.depol, "depol")?,
        seed: r.seed(seed)?,
    })
}

impl ParamSet for SimBb84Set {
    fn apply(&mut self, name: &str, _value: f64) -> CliResult<()> {
        Err(no_sweep("simulate bb84", name))
    }

    fn run(&self) -> CliResult<ReportBody> {
        let obs = bb84::simulate_bb84(self.pairs, self.depol, self.seed)?;
        let mut table = BTreeMap::new();
        table.insert("pairs".into(), obs.pairs as f64);
        table.insert("sifted_x".into(), obs.sifted_x as f64);
        table.insert("sifted_z".into(), obs.sifted_z as f64);
        table.insert("errors_x".into(), obs.errors_x as f64);
        table.insert("errors_z".into(), obs.errors_z as f64);
        table.insert("e_x".into(), obs.e_x);
        table.insert("e_z".into(), obs.e_z);
        Ok(ReportBody::Table(table))
    }

    fn echo(&self) -> Value {
        json!({ "pairs": self.pairs, "depol": self.depol, "seed": self.seed })
    }
}

// --- simulate chsh ---

#[derive(Clone)]
struct SimChshSet {
    rounds: u64,
    werner: f64,
    alpha: f64,
    beta: f64,
    seed: u64,
}

fn prep_sim_chsh(a: SimChshArgs, seed: Option<u64>, r: &Resolver) -> CliResult<SimChshSet> {
    r.check_keys(&["rounds", "werner", "alpha", "beta"])?;
    Ok(SimChshSet {
        rounds: r.count(a.rounds, "rounds")?,
        werner: r.f64_or(a.werner, "werner", 0.0)?,
        alpha: r.f64_or(a.alpha, "alpha", 0.0)?,
        beta: r.f64_or(a.beta, "beta", FRAC_PI_4)?,
        seed: r.seed(seed)?,
    })
}

impl ParamSet for SimChshSet {
    fn apply(&mut self, name: &str, _value: f64) -> CliResult<()> {
        Err(no_sweep("simulate chsh", name))
    }

    fn run(&self) -> CliResult<ReportBody> {
        let spectrum = SingleRoundSpectrum::werner(self.werner)?;
        let angles = MeasurementAngles::new(self.alpha, self.beta)?;
        let obs = diqkd::simulate_chsh(self.rounds, &spectrum, &angles, self.seed)?;
        let expected = diqkd::expected_win_prob(&spectrum, &angles)?;
        let mut table = BTreeMap::new();
        table.insert("rounds".into(), obs.rounds as f64);
        table.insert("wins".into(), obs.wins as f64);
        table.insert("omega".into(), obs.omega);
        table.insert("expected_omega".into(), expected);
        Ok(ReportBody::Table(table))
    }

    fn echo(&self) -> Value {
        json!({
            "rounds": self.rounds,
            "werner": self.werner,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
        })
    }
}

// --- simulate qrng ---

#[derive(Clone)]
struct SimQrngSet {
    rounds: u64,
    source: String,
    seed: u64,
    emit_bits: Option<PathBuf>,
    extract: Option<u64>,
    emit_extracted: Option<PathBuf>,
}

fn prep_sim_qrng(a: SimQrngArgs, seed: Option<u64>, r: &Resolver) -> CliResult<SimQrngSet> {
    r.check_keys(&["rounds", "source", "emit-bits", "extract", "emit-extracted"])?;
    let source = match a.source {
        Some(text) => text,
        None => r
            .str_key("source")?
            .ok_or_else(|| CliError::usage("missing required parameter --source"))?,
    };
    let emit_bits = match a.emit_bits {
        Some(p) => Some(p),
        None => r.str_key("emit-bits")?.map(PathBuf::from),
    };
    let extract = match a.extract {
        Some(v) => Some(to_count(v, "extract")?),
        None => r.num_key("extract")?.map(|v| to_count(v, "extract")).transpose()?,
    };
    let emit_extracted = match a.emit_extracted {
        Some(p) => Some(p),
        None => r.str_key("emit-extracted")?.map(PathBuf::from),
    };
    if emit_extracted.is_some() && extract.is_none() {
        return Err(CliError::usage("--emit-extracted requires --extract"));
    }
    parse_source(&source)?; // validate up front so errors precede sampling
    Ok(SimQrngSet {
        rounds: r.count(a.rounds, "rounds")?,
        source,
        seed: r.seed(seed)?,
        emit_bits,
        extract,
        emit_extracted,
    })
}

/// Photon-number distribution named on the command line. Truncation points
/// are chosen so the omitted tail mass stays below the library's tolerance;
/// intensities are capped at desk scale.
fn parse_source(text: &str) -> CliResult<FockDiagonalState> {
    let bad = || {
        CliError::usage(format!(
            "unrecognized source {text:?} (expected vacuum, fock:M, poisson:MU, or thermal:NBAR)"
        ))
    };
    if text == "vacuum" {
        return Ok(FockDiagonalState::vacuum());
    }
    if let Some(rest) = text.strip_prefix("fock:") {
        let m: usize = rest.parse().map_err(|_| bad())?;
        if m > 1000 {
            return Err(CliError::usage("fock photon number is capped at 1000"));
        }
        return Ok(FockDiagonalState::fock(m));
    }
    if let Some(rest) = text.strip_prefix("poisson:") {
        let mu: f64 = rest.parse().map_err(|_| bad())?;
        if !mu.is_finite() || !(0.0..=100.0).contains(&mu) {
            return Err(CliError::usage("poisson intensity must lie in [0, 100]"));
        }
        let m_max = ((mu + 12.0 * mu.sqrt() + 30.0).ceil() as usize).max(40);
        return Ok(FockDiagonalState::poisson(mu, m_max)?);
    }
    if let Some(rest) = text.strip_prefix("thermal:") {
        let mean: f64 = rest.parse().map_err(|_| bad())?;
        if !mean.is_finite() || !(0.0..=100.0).contains(&mean) {
            return Err(CliError::usage("thermal mean photon number must lie in [0, 100]"));
        }
        let m_max = if mean == 0.0 {
            0
        } else {
            let ratio: f64 = mean / (1.0 + mean);
            (27.64 / -ratio.ln()).ceil() as usize + 1
        };
        return Ok(FockDiagonalState::thermal(mean, m_max)?);
    }
    Err(bad())
}

/// Pack bits little-endian within bytes: bit i of byte j is raw bit 8j + i.
fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &bit) in bits.iter().enumerate() {
        if bit != 0 {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    bytes
}

fn write_packed(path: &PathBuf, bits: &[u8]) -> CliResult<()> {
    std::fs::write(path, pack_bits(bits))
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

impl ParamSet for SimQrngSet {
    fn apply(&mut self, name: &str, _value: f64) -> CliResult<()> {
        Err(no_sweep("simulate qrng", name))
    }

    fn run(&self) -> CliResult<ReportBody> {
        let source = parse_source(&self.source)?;
        let obs = qrng::simulate_qrng(self.rounds, &source, self.seed)?;
        let mut counts = [0u64; 4];
        for &s in &obs.symbols {
            counts[s as usize] += 1;
        }
        let mut table = BTreeMap::new();
        table.insert("rounds".into(), obs.symbols.len() as f64);
        table.insert("clicks".into(), obs.clicks as f64);
        table.insert("click_freq".into(), obs.click_freq);
        for (y, &c) in counts.iter().enumerate() {
            table.insert(format!("freq_{y}"), c as f64 / obs.symbols.len() as f64);
        }
        table.insert("raw_bits".into(), 2.0 * obs.symbols.len() as f64);

        if self.emit_bits.is_some() || self.extract.is_some() {
            let mut raw = Vec::with_capacity(2 * obs.symbols.len());
            for &s in &obs.symbols {
                raw.push(s & 1);
                raw.push((s >> 1) & 1);
            }
            if let Some(path) = &self.emit_bits {
                write_packed(path, &raw)?;
            }
            if let Some(out_len) = self.extract {
                let out_len = out_len as usize;
                if out_len > raw.len() {
                    return Err(CliError::usage(format!(
                        "--extract {out_len} exceeds the {} raw bits",
                        raw.len()
                    )));
                }
                let hash_seed = ToeplitzSeed::random(raw.len() + out_len - 1, self.seed.wrapping_add(1));
                let extracted = qrng::toeplitz_extract(&raw, &hash_seed, out_len)?;
                table.insert("extracted_bits".into(), extracted.len() as f64);
                if let Some(path) = &self.emit_extracted {
                    write_packed(path, &extracted)?;
                }
            }
        }
        Ok(ReportBody::Table(table))
    }

    fn echo(&self) -> Value {
        let mut map = Map::new();
        map.insert("rounds".into(), json!(self.rounds));
        map.insert("source".into(), json!(self.source));
        map.insert("seed".into(), json!(self.seed));
        if let Some(path) = &self.emit_bits {
            map.insert("emit-bits".into(), json!(path.display().to_string()));
        }
        if let Some(out_len) = self.extract {
            map.insert("extract".into(), json!(out_len));
        }
        if let Some(path) = &self.emit_extracted {
            map.insert("emit-extracted".into(), json!(path.display().to_string()));
        }
        Value::Object(map)
    }
}

// ----- entry point -----

fn execute(cli: Cli) -> CliResult<String> {
    let resolver = Resolver::load(cli.config.as_ref())?;
    let sweep = cli.sweep.as_deref().map(parse_sweep).transpose()?;
    let fmt = cli.out;
    match cli.command {
        Command::Bb84(a) => drive("bb84", prep_bb84(a, &resolver)?, sweep, fmt),
        Command::Diqkd(a) => drive("diqkd", prep_diqkd(a, &resolver)?, sweep, fmt),
        Command::Qrng(a) => drive("qrng", prep_qrng(a, &resolver)?, sweep, fmt),
        Command::Mineval(a) => drive("mineval", prep_mineval(a, &resolver)?, sweep, fmt),
        Command::Simulate(sim) => match sim {
            SimulateCmd::Bb84(a) => {
                drive("simulate bb84", prep_sim_bb84(a, cli.seed, &resolver)?, sweep, fmt)
            }
            SimulateCmd::Chsh(a) => {
                drive("simulate chsh", prep_sim_chsh(a, cli.seed, &resolver)?, sweep, fmt)
            }
            SimulateCmd::Qrng(a) => {
                drive("simulate qrng", prep_sim_qrng(a, cli.seed, &resolver)?, sweep, fmt)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
