//! `speedbump` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 scenario error, 3 acceptance
//! failure (the simulated vehicle missed the bump speed or never
//! triggered). Everything written to stdout is CSV or plain text; errors go
//! to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::kinematics::{kmh_to_mps, speed_at_distance_mps, stopping_distance_m, FrictionModel};
use crate::propagation::{fspl_db, link_margin_db, received_power_dbm, RadioLinkParams};
use crate::simengine::{
    format_sig6, is_known_key, load_scenario_with_overrides, run, write_trace_csv, ScenarioError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCENARIO: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

/// Tolerance on the bump-site speed check (m/s).
pub const BUMP_SPEED_TOLERANCE_MPS: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "speedbump", version, about = "RF speed bump link-budget and deceleration simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Free-space loss, received power and link margin over a distance range.
    Linkbudget(LinkbudgetArgs),
    /// Stopping distance and the braking speed-vs-distance profile.
    Stopdist(StopdistArgs),
    /// Run one scenario and write its per-tick trace.
    Simulate(SimulateArgs),
    /// Re-run a scenario over a list of values for one key.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct RadioOverrides {
    /// Transmit power (dBm) [default: 10]
    #[arg(long)]
    pub tx_power_dbm: Option<f64>,
    /// Transmit antenna gain (dBi) [default: 15]
    #[arg(long)]
    pub tx_gain_dbi: Option<f64>,
    /// Transmitter loss (dB) [default: 5]
    #[arg(long)]
    pub tx_loss_db: Option<f64>,
    /// Miscellaneous loss (dB) [default: 5]
    #[arg(long)]
    pub misc_loss_db: Option<f64>,
    /// Receive antenna gain (dBi) [default: 8]
    #[arg(long)]
    pub rx_gain_dbi: Option<f64>,
    /// Receiver loss (dB) [default: 5]
    #[arg(long)]
    pub rx_loss_db: Option<f64>,
    /// Receiver sensitivity (dBm) [default: -90]
    #[arg(long, allow_negative_numbers = true)]
    pub rx_sensitivity_dbm: Option<f64>,
    /// Carrier frequency (Hz) [default: 2.4e9]
    #[arg(long)]
    pub frequency_hz: Option<f64>,
}

impl RadioOverrides {
    fn apply(&self, mut p: RadioLinkParams) -> RadioLinkParams {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.tx_power_dbm, self.tx_power_dbm);
        set(&mut p.tx_gain_dbi, self.tx_gain_dbi);
        set(&mut p.tx_loss_db, self.tx_loss_db);
        set(&mut p.misc_loss_db, self.misc_loss_db);
        set(&mut p.rx_gain_dbi, self.rx_gain_dbi);
        set(&mut p.rx_loss_db, self.rx_loss_db);
        set(&mut p.rx_sensitivity_dbm, self.rx_sensitivity_dbm);
        set(&mut p.frequency_hz, self.frequency_hz);
        p
    }
}

#[derive(Debug, Args)]
pub struct LinkbudgetArgs {
    /// First distance (m), must be > 0
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    /// Last distance (m), inclusive
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    /// Distance step (m), must be > 0
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub step: f64,
    #[command(flatten)]
    pub radio: RadioOverrides,
    /// Write the CSV here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StopdistArgs {
    /// Initial speed (km/h)
    #[arg(long, allow_negative_numbers = true)]
    pub speed: f64,
    /// Coefficient of friction, in (0, 1]
    #[arg(long, default_value_t = 0.7)]
    pub mu: f64,
    /// Deceleration rate g (m/s²)
    #[arg(long, default_value_t = 10.0)]
    pub g: f64,
    /// Write the profile CSV here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (`key = value` lines); the canonical scenario if omitted
    #[arg(long, short)]
    pub scenario: Option<PathBuf>,
    /// Override shadowing.seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the trace CSV here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Scenario key to vary, e.g. vehicle.initial_speed_kmh
    #[arg(long)]
    pub param: String,
    /// Comma-separated values for the key
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub values: Vec<String>,
    /// Base scenario file; the canonical scenario if omitted
    #[arg(long, short)]
    pub scenario: Option<PathBuf>,
    /// Runs per value, with consecutive shadowing seeds
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// First shadowing seed (defaults to the scenario's)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the CSV here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Scenario(String),
    Acceptance(String),
    Io(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Scenario(_) => EXIT_SCENARIO,
            CliError::Acceptance(_) => EXIT_ACCEPTANCE,
            CliError::Io(_) => EXIT_SCENARIO,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Scenario(e.to_string())
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Linkbudget(a) => cmd_linkbudget(a, out),
        Command::Stopdist(a) => cmd_stopdist(a, out),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = match &e {
                CliError::Usage(m) => writeln!(err, "usage error: {m}"),
                CliError::Scenario(m) => writeln!(err, "scenario error: {m}"),
                CliError::Acceptance(m) => writeln!(err, "acceptance failure: {m}"),
                CliError::Io(e) => writeln!(err, "error: {e:#}"),
            };
            e.exit_code()
        }
    }
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::Io),
        None => out
            .write_all(text.as_bytes())
            .context("writing to stdout")
            .map_err(CliError::Io),
    }
}

fn cmd_linkbudget(a: &LinkbudgetArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.from > 0.0 && a.from.is_finite()) {
        return Err(CliError::Usage(format!("--from must be > 0, got {}", a.from)));
    }
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(CliError::Usage(format!("--step must be > 0, got {}", a.step)));
    }
    if !(a.to >= a.from && a.to.is_finite()) {
        return Err(CliError::Usage(format!("--to must be >= --from, got {}", a.to)));
    }
    let radio = a.radio.apply(RadioLinkParams::default());
    radio.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let rows = ((a.to - a.from) / a.step + 1e-9).floor() as u64 + 1;
    let mut csv = String::from("distance_m,fspl_db,p_rx_dbm,margin_db\n");
    for i in 0..rows {
        let d = a.from + i as f64 * a.step;
        let fspl = fspl_db(d, radio.frequency_hz).map_err(|e| CliError::Usage(e.to_string()))?;
        let prx = received_power_dbm(&radio, d).map_err(|e| CliError::Usage(e.to_string()))?;
        let margin = link_margin_db(&radio, d).map_err(|e| CliError::Usage(e.to_string()))?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            format_sig6(d),
            format_sig6(fspl),
            format_sig6(prx),
            format_sig6(margin)
        ));
    }
    emit(&csv, a.output.as_deref(), out)
}

fn cmd_stopdist(a: &StopdistArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.speed >= 0.0 && a.speed.is_finite()) {
        return Err(CliError::Usage(format!("--speed must be >= 0, got {}", a.speed)));
    }
    let friction = FrictionModel::new(a.mu, a.g).map_err(|e| CliError::Usage(e.to_string()))?;
    let u = kmh_to_mps(a.speed);
    let s = stopping_distance_m(u, &friction);

    let report = format!(
        "# speed_kmh={} mu={} g_mps2={}\n# stopping_distance_m={:.2}\n# rounded_up_m={}\n",
        format_sig6(a.speed),
        format_sig6(a.mu),
        format_sig6(a.g),
        s,
        s.ceil()
    );
    let mut csv = String::from("distance_m,speed_mps,speed_kmh\n");
    if s > 0.0 {
        for m in 0..=(s.floor() as u64) {
            let v = speed_at_distance_mps(u, &friction, m as f64);
            csv.push_str(&format!("{},{},{}\n", m, format_sig6(v), format_sig6(v * 3.6)));
        }
    }
    match &a.output {
        Some(path) => {
            emit(&report, None, out)?;
            emit(&csv, Some(path), out)
        }
        None => emit(&(report + &csv), None, out),
    }
}

fn read_scenario_text(path: Option<&Path>) -> Result<String, CliError> {
    match path {
        None => Ok(String::new()),
        Some(p) => fs::read_to_string(p)
            .map_err(|e| CliError::Scenario(format!("cannot read {}: {e}", p.display()))),
    }
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let text = read_scenario_text(a.scenario.as_deref())?;
    let overrides: Vec<(String, String)> =
        a.seed.map(|s| ("shadowing.seed".to_string(), s.to_string())).into_iter().collect();
    let scenario = load_scenario_with_overrides(&text, &overrides)?;
    let outcome = run(&scenario);
    emit(&write_trace_csv(&outcome.trace), a.output.as_deref(), out)?;

    let line = outcome.summary.one_line();
    // keep stdout pure CSV when the trace goes there
    let summary_sink: &mut dyn Write = if a.output.is_some() { out } else { err };
    let _ = writeln!(summary_sink, "{line}");

    if outcome.summary.trigger.is_none() {
        return Err(CliError::Acceptance("no trigger".into()));
    }
    if !outcome.summary.bump_site_ok(BUMP_SPEED_TOLERANCE_MPS) {
        return Err(CliError::Acceptance(format!(
            "bump-site speed above {} m/s",
            format_sig6(outcome.summary.payload.bump_speed_mps() + BUMP_SPEED_TOLERANCE_MPS)
        )));
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !is_known_key(&a.param) {
        return Err(CliError::Usage(format!("`{}` is not a scenario key", a.param)));
    }
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let text = read_scenario_text(a.scenario.as_deref())?;
    let base = load_scenario_with_overrides(&text, &[])?;
    let first_seed = a.seed.unwrap_or(base.shadowing.seed);

    let mut values: Vec<String> = a.values.iter().map(|v| v.trim().to_string()).collect();
    if values.iter().all(|v| v.parse::<f64>().is_ok()) {
        values.sort_by(|x, y| x.parse::<f64>().unwrap().total_cmp(&y.parse::<f64>().unwrap()));
    }

    let mut jobs = Vec::new();
    for value in &values {
        for seed in first_seed..first_seed + a.seeds {
            let mut overrides = vec![(a.param.clone(), value.clone())];
            if a.param != "shadowing.seed" {
                overrides.push(("shadowing.seed".to_string(), seed.to_string()));
            }
            let scenario = load_scenario_with_overrides(&text, &overrides)?;
            jobs.push((value.clone(), seed, scenario));
        }
    }

    let rows: Vec<String> = jobs
        .par_iter()
        .map(|(value, seed, scenario)| {
            let s = run(scenario).summary;
            let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
            format!(
                "{},{},{},{},{}\n",
                value,
                seed,
                opt(s.bump_site_speed_mps),
                opt(s.trigger_distance_m),
                opt(s.trigger_error_m)
            )
        })
        .collect();

    let mut csv = format!("{},seed,bump_site_speed_mps,trigger_distance_m,trigger_error_m\n", a.param);
    csv.extend(rows);
    emit(&csv, a.output.as_deref(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["speedbump"];
        full.extend_from_slice(args);
        let code = run_cli(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn linkbudget_rows() {
        let (code, out, _) = invoke(&["linkbudget", "--from", "1", "--to", "400", "--step", "1"]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 401);
        let last: Vec<f64> = lines[400].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(last[0], 400.0);
        assert!((last[3] - 15.9).abs() < 0.2);
    }

    #[test]
    fn linkbudget_single_row() {
        let (code, out, _) = invoke(&["linkbudget", "--from", "400", "--to", "400", "--step", "1"]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        let fspl: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((fspl - 92.1).abs() < 0.05);
    }

    #[test]
    fn linkbudget_guards() {
        assert_eq!(invoke(&["linkbudget", "--from", "0", "--to", "400"]).0, EXIT_USAGE);
        assert_eq!(invoke(&["linkbudget", "--from", "-5", "--to", "400"]).0, EXIT_USAGE);
        assert_eq!(invoke(&["linkbudget", "--from", "10", "--to", "5"]).0, EXIT_USAGE);
        assert_eq!(invoke(&["linkbudget", "--from", "1", "--to", "5", "--step", "0"]).0, EXIT_USAGE);
        assert_eq!(invoke(&["linkbudget", "--from", "1", "--to", "5", "--bogus", "1"]).0, EXIT_USAGE);
        assert_eq!(
            invoke(&["linkbudget", "--from", "1", "--to", "5", "--tx-loss-db", "-3"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn linkbudget_radio_override() {
        let (_, out, _) = invoke(&["linkbudget", "--from", "400", "--to", "400", "--tx-power-dbm", "30"]);
        let margin: f64 = out.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert!((margin - 35.9).abs() < 0.2);
    }

    #[test]
    fn stopdist_report() {
        let (code, out, _) = invoke(&["stopdist", "--speed", "120", "--mu", "0.7", "--g", "10"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("stopping_distance_m=79.37"));
        assert!(out.contains("rounded_up_m=80"));
        let rows = out.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, 1 + 80);

        let (_, out, _) = invoke(&["stopdist", "--speed", "80"]);
        assert!(out.contains("stopping_distance_m=35.27"));

        let (code, out, _) = invoke(&["stopdist", "--speed", "0"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("stopping_distance_m=0.00"));
        let data: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["distance_m,speed_mps,speed_kmh"]);

        assert_eq!(invoke(&["stopdist", "--speed", "120", "--mu", "1.5"]).0, EXIT_USAGE);
        assert_eq!(invoke(&["stopdist", "--speed", "-1"]).0, EXIT_USAGE);
    }

    #[test]
    fn sweep_rejects_unknown_key() {
        let (code, _, err) = invoke(&["sweep", "--param", "vehicle.colour", "--values", "1,2"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("vehicle.colour"));
    }

    #[test]
    fn missing_subcommand_is_usage_error() {
        assert_eq!(invoke(&[]).0, EXIT_USAGE);
        assert_eq!(invoke(&["fly"]).0, EXIT_USAGE);
        assert_eq!(invoke(&["--help"]).0, EXIT_OK);
    }
}
