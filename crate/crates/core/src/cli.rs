//! File-driven scenario runner behind the `acpc` binary.
//!
//! Exit codes: 0 clean run, 1 configuration or gain error, 2 the run stopped
//! on a fault.

use crate::config::{load_config, ConfigError, LoadedConfig, VARIANT_NAMES};
use crate::sim::{run, telemetry_header, RowParseError, RunResult, ScenarioConfig, TelemetryRow};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAULT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "acpc",
    version,
    about = "Constrained attitude tracking scenario runner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write telemetry.csv, metrics.json, manifest.json.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOptions,
        /// acpc | constant-gain | nominal
        #[arg(long)]
        variant: Option<String>,
    },
    /// Print the gain conditions and their pass/fail status.
    CheckGains { config: PathBuf },
    /// Run several variants on the same scenario.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOptions,
        /// Variants to compare; repeat or comma-separate, at least two.
        #[arg(long = "variant", value_delimiter = ',', required = true)]
        variants: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunOptions {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Control period override, s.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time override, s.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Gain used by the constant-gain variant.
    #[arg(long)]
    pub zeta: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown variant `{0}` (expected one of acpc, constant-gain, nominal)")]
    UnknownVariant(String),
    #[error("compare needs at least two variants, got {0}")]
    TooFewVariants(usize),
    #[error("cannot write `{path}`: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("cannot read telemetry: {0}")]
    Read(String),
    #[error(transparent)]
    Row(#[from] RowParseError),
}

/// Parses `args` (including the program name) and dispatches.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run {
            config,
            opts,
            variant,
        } => cmd_run(&config, variant.as_deref(), &opts),
        Command::CheckGains { config } => cmd_check_gains(&config),
        Command::Compare {
            config,
            opts,
            variants,
        } => cmd_compare(&config, &variants, &opts),
    }
}

/// Loads a config and applies the command-line overrides.
pub fn prepare(
    config: &Path,
    variant: Option<&str>,
    opts: &RunOptions,
) -> Result<ScenarioConfig, CliError> {
    let LoadedConfig {
        mut scenario,
        mut variants,
    } = load_config(config)?;
    if let Some(dt) = opts.dt {
        scenario.dt = dt;
    }
    if let Some(t) = opts.t_end {
        scenario.t_end = t;
    }
    if let Some(z) = opts.zeta {
        variants.zeta_const = z;
    }
    let name = variant.unwrap_or(scenario.variant.name());
    scenario.variant = variants
        .variant(name)
        .ok_or_else(|| CliError::UnknownVariant(name.to_string()))?;
    scenario.validate().map_err(ConfigError::from)?;
    Ok(scenario)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: PathBuf,
    pub out: PathBuf,
    pub variant: Option<String>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub zeta: Option<f64>,
    pub files: Vec<String>,
}

pub fn cmd_run(config: &Path, variant: Option<&str>, opts: &RunOptions) -> i32 {
    let result = prepare(config, variant, opts).and_then(|sc| {
        let res = run(&sc);
        write_run(&opts.out, &sc, &res)?;
        let manifest = RunManifest {
            config: config.to_path_buf(),
            out: opts.out.clone(),
            variant: variant.map(str::to_string),
            dt: opts.dt,
            t_end: opts.t_end,
            zeta: opts.zeta,
            files: RUN_FILES.iter().map(|s| s.to_string()).collect(),
        };
        write_json(&opts.out.join("manifest.json"), &manifest)?;
        Ok(res)
    });
    match result {
        Ok(res) => report(&res),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

const RUN_FILES: [&str; 3] = ["telemetry.csv", "metrics.json", "manifest.json"];

fn report(res: &RunResult) -> i32 {
    let m = &res.metrics;
    println!(
        "t = {:.1} s, accuracy {:.3e}, max |omega_s| {:.4e}, max |tau| {:.4e}, violations: velocity {} torque {} envelope {}",
        m.t_final,
        m.steady_state_accuracy,
        m.max_omega_s,
        m.max_tau,
        m.velocity_violations,
        m.torque_violations,
        m.envelope_violations,
    );
    match &res.fault {
        Some(f) => {
            eprintln!("fault: {f}");
            EXIT_FAULT
        }
        None => EXIT_OK,
    }
}

/// Writes telemetry.csv and metrics.json into `dir`.
pub fn write_run(dir: &Path, sc: &ScenarioConfig, res: &RunResult) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| werr(dir, e))?;
    write_telemetry(&dir.join("telemetry.csv"), &res.telemetry)?;
    write_json(&dir.join("metrics.json"), &metrics_json(sc, res))
}

/// Flat metrics object with the run's variant and fault status.
pub fn metrics_json(sc: &ScenarioConfig, res: &RunResult) -> Value {
    let mut obj = match serde_json::to_value(&res.metrics) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    obj.insert("variant".into(), json!(sc.variant.name()));
    match sc.variant {
        crate::controller::Variant::ConstantGain { zeta } => {
            obj.insert("zeta_const".into(), json!(zeta));
        }
        crate::controller::Variant::Nominal { d_m, phi, k_s } => {
            obj.insert("D_m".into(), json!(d_m));
            obj.insert("phi".into(), json!(phi));
            obj.insert("K_s".into(), json!(k_s));
        }
        crate::controller::Variant::Acpc => {}
    }
    obj.insert("B_omega".into(), json!(sc.b_omega()));
    obj.insert("omega_max".into(), json!(sc.omega_max));
    obj.insert("u_max".into(), json!(sc.u_max));
    obj.insert("dt".into(), json!(sc.dt));
    obj.insert("rho_resets".into(), json!(res.rho_resets));
    obj.insert(
        "fault".into(),
        json!(res.fault.as_ref().map(|f| f.to_string())),
    );
    Value::Object(obj)
}

pub fn write_telemetry(path: &Path, rows: &[TelemetryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| werr(path, e))?;
    w.write_record(telemetry_header())
        .map_err(|e| werr(path, e))?;
    for r in rows {
        w.write_record(r.to_record()).map_err(|e| werr(path, e))?;
    }
    w.flush().map_err(|e| werr(path, e))
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Read(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Read(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != telemetry_header() {
        return Err(CliError::Read(format!(
            "unexpected header in {}",
            path.display()
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Read(e.to_string()))?;
            let fields: Vec<&str> = rec.iter().collect();
            Ok(TelemetryRow::from_record(&fields)?)
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| werr(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| werr(path, e))
}

fn werr(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

pub fn cmd_check_gains(config: &Path) -> i32 {
    let sc = match load_config(config) {
        Ok(c) => c.scenario,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let report = match sc.gain_report() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    for c in &report.conditions {
        println!(
            "{:<16} {:>14}  {}",
            c.name,
            fmt_num(c.value),
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    println!("{:<16} {:>14}", "L_rho", fmt_num(report.l_rho));
    println!(
        "{:<16} {:>14}",
        "lambda_min(J0)",
        fmt_num(report.lambda_j0_min)
    );
    if report.all_pass() {
        println!("all conditions pass");
        EXIT_OK
    } else {
        println!("failing: {}", report.failures().join(", "));
        EXIT_CONFIG
    }
}

pub fn cmd_compare(config: &Path, variants: &[String], opts: &RunOptions) -> i32 {
    if variants.len() < 2 {
        eprintln!("error: {}", CliError::TooFewVariants(variants.len()));
        return EXIT_CONFIG;
    }
    if let Some(v) = variants
        .iter()
        .find(|v| !VARIANT_NAMES.contains(&v.as_str()))
    {
        eprintln!("error: {}", CliError::UnknownVariant(v.clone()));
        return EXIT_CONFIG;
    }
    let scenarios: Result<Vec<ScenarioConfig>, CliError> = variants
        .iter()
        .map(|v| prepare(config, Some(v), opts))
        .collect();
    let scenarios = match scenarios {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let results: Vec<RunResult> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| s.spawn(move || run(sc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });

    let mut summary = Map::new();
    let mut code = EXIT_OK;
    for ((name, sc), res) in variants.iter().zip(&scenarios).zip(&results) {
        let dir = opts.out.join(name);
        if let Err(e) = write_run(&dir, sc, res) {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        print!("{name:<14} ");
        if report(res) != EXIT_OK {
            code = EXIT_FAULT;
        }
        summary.insert(
            name.clone(),
            json!({
                "z2_overshoot": res.metrics.z2_overshoot,
                "steady_state_accuracy": res.metrics.steady_state_accuracy,
                "max_omega_s": res.metrics.max_omega_s,
                "max_tau": res.metrics.max_tau,
                "zeta_const": match sc.variant {
                    crate::controller::Variant::ConstantGain { zeta } => Some(zeta),
                    _ => None,
                },
                "fault": res.fault.as_ref().map(|f| f.to_string()),
                "dir": dir,
            }),
        );
    }
    if let Err(e) = write_json(&opts.out.join("comparison.json"), &Value::Object(summary)) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    code
}
