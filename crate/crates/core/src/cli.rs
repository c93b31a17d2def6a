//! File formats and command implementations behind the `mec-offload` binary.
//!
//! # Instance files
//!
//! UTF-8 text; `#` starts a comment that runs to the end of the line. A global
//! section of `key = value` lines comes first, with keys `K`, `W`, `N0`,
//! `gamma_bs`, `gamma_user`, `g0`, `tau` and `epsilon` (`W` and `N0` default
//! to 1, `epsilon` to 0.05). It is followed by exactly `K` user rows, in order:
//!
//! ```text
//! user <k> L=<v> B=<v> C=<v> Y=<v> beta=<v> g=<v>
//! ```
//!
//! # Sweep configs
//!
//! The same `key = value` style with keys `K`, `gamma_bs`, `gamma_user`, `g0`,
//! `mean_L`, `mean_B`, `mean_C`, `gbar`, `c0`, `c1`, `epsilon`, `tau`, `axis`
//! (`mean_B` or `tau`), `grid` (comma-separated), `trials`, `seed`, and an
//! optional boolean `crn`. Only `axis` and `grid` are required; the rest
//! default to the server-data sweep preset.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::costs::{transmission_times, TimeMode};
use crate::model::{
    validate_scenario, EnergyParams, RadioParams, ScenarioInstance, Site, TaskSpec, UserState,
    DEFAULT_FADE_FLOOR,
};
use crate::montecarlo::{sample_trial, sweep, SamplingSpec, SweepAxis, SweepOptions, SweepRow, DEFAULT_TRIALS};
use crate::solver::{exhaustive_oracle, solve_offloading, OffloadSolution, SolverConfig, SubproblemValue, DEFAULT_TOLERANCE, ORACLE_USER_LIMIT};

/// Largest user count accepted by `check`.
pub const CHECK_USER_LIMIT: usize = 12;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
/// `check` found a disagreement between solver and oracle.
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mec-offload", version, about = "Energy-optimal offloading with cloud-server data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance file.
    Solve {
        file: PathBuf,
        /// Also report the exact-uplink-time evaluation and its exhaustive optimum.
        #[arg(long)]
        exact_time: bool,
        /// Restrict the examined offloader counts to the mean-time cap.
        #[arg(long)]
        prune_nbar: bool,
    },
    /// Run a Monte Carlo sweep and emit CSV.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver against exhaustive search on random instances.
    Check {
        #[arg(long = "k", default_value_t = 8)]
        users: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {message}", location(path, *line))]
    Config {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {message}", location(path, Some(*line)))]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Io { .. } | CliError::Parse { .. } => EXIT_INPUT,
        }
    }
}

fn location(path: &Path, line: Option<usize>) -> String {
    match line {
        Some(line) => format!("{}:{line}", path.display()),
        None => path.display().to_string(),
    }
}

/// A syntax or validation problem at a given line of a text input.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// Formats like C's `%.6g`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    fn trim(s: &str) -> &str {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.')
        } else {
            s
        }
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_sig)
}

/// Non-comment content of each line, with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn parse_number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ParseError> {
    value
        .parse()
        .map_err(|_| parse_err(line, format!("{key}: cannot parse '{value}' as a number")))
}

/// Line numbers of the fields of a parsed instance, for diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceMap {
    pub globals: HashMap<String, usize>,
    pub users: Vec<usize>,
    pub last_line: usize,
}

impl SourceMap {
    fn line_of(&self, site: Site) -> usize {
        let global = |key: &str| self.globals.get(key).copied();
        let line = match site {
            Site::Shape => None,
            Site::Radio(key) | Site::Energy(key) => global(key),
            Site::Slot => global("tau"),
            Site::FadeFloor => global("epsilon"),
            Site::Task { user, .. } | Site::User { user, .. } => self.users.get(user).copied(),
        };
        line.unwrap_or(self.last_line)
    }
}

const INSTANCE_KEYS: [&str; 8] = ["K", "W", "N0", "gamma_bs", "gamma_user", "g0", "tau", "epsilon"];
const USER_FIELDS: [&str; 6] = ["L", "B", "C", "Y", "beta", "g"];

/// Parses an instance file without checking the value invariants.
pub fn parse_instance(text: &str) -> Result<(ScenarioInstance, SourceMap), ParseError> {
    let mut map = SourceMap::default();
    let mut globals: HashMap<&str, &str> = HashMap::new();
    let mut tasks = Vec::new();
    let mut users = Vec::new();

    for (line, body) in content_lines(text) {
        map.last_line = line;
        let mut tokens = body.split_whitespace();
        if tokens.clone().next() == Some("user") {
            tokens.next();
            let expected = users.len() + 1;
            let index: usize = tokens
                .next()
                .ok_or_else(|| parse_err(line, "user row without an index"))
                .and_then(|t| parse_number(line, "user index", t))?;
            if index != expected {
                return Err(parse_err(line, format!("expected user {expected}, found user {index}")));
            }
            let mut values = [0.0; 6];
            for (slot, field) in values.iter_mut().zip(USER_FIELDS) {
                let token = tokens
                    .next()
                    .ok_or_else(|| parse_err(line, format!("user {index}: missing field {field}")))?;
                let value = token
                    .strip_prefix(field)
                    .and_then(|rest| rest.strip_prefix('='))
                    .ok_or_else(|| {
                        parse_err(line, format!("user {index}: expected {field}=<value>, found '{token}'"))
                    })?;
                *slot = parse_number(line, field, value)?;
            }
            if let Some(extra) = tokens.next() {
                return Err(parse_err(line, format!("user {index}: unexpected token '{extra}'")));
            }
            let [l, b, c, y, beta, g] = values;
            tasks.push(TaskSpec::new(l, b, c, y));
            users.push(UserState::new(beta, g));
            map.users.push(line);
            continue;
        }

        let (key, value) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| parse_err(line, format!("expected 'key = value' or a user row, found '{body}'")))?;
        if !users.is_empty() {
            return Err(parse_err(line, format!("{key}: global keys must precede the user rows")));
        }
        if !INSTANCE_KEYS.contains(&key) {
            return Err(parse_err(line, format!("unknown key '{key}'")));
        }
        if globals.insert(key, value).is_some() {
            return Err(parse_err(line, format!("{key}: duplicate key")));
        }
        map.globals.insert(key.to_string(), line);
    }

    let end = map.last_line;
    let number = |key: &str, default: Option<f64>| -> Result<f64, ParseError> {
        match globals.get(key) {
            Some(v) => parse_number(map.globals[key], key, v),
            None => default.ok_or_else(|| parse_err(end, format!("missing key {key}"))),
        }
    };
    let k: usize = match globals.get("K") {
        Some(v) => parse_number(map.globals["K"], "K", v)?,
        None => return Err(parse_err(end, "missing key K")),
    };
    let s = ScenarioInstance {
        radio: RadioParams {
            bandwidth: number("W", Some(1.0))?,
            noise: number("N0", Some(1.0))?,
            snr_bs: number("gamma_bs", None)?,
            snr_user: number("gamma_user", None)?,
        },
        energy: EnergyParams {
            server_energy_per_cycle: number("g0", None)?,
        },
        tasks,
        users,
        slot: number("tau", None)?,
        fade_floor: number("epsilon", Some(DEFAULT_FADE_FLOOR))?,
    };
    if s.users.len() != k {
        return Err(parse_err(end, format!("K = {k} but {} user rows", s.users.len())));
    }
    Ok((s, map))
}

/// Parses and validates an instance file's contents.
pub fn parse_valid_instance(text: &str) -> Result<ScenarioInstance, ParseError> {
    let (s, map) = parse_instance(text)?;
    match validate_scenario(&s).first() {
        None => Ok(s),
        Some(v) => Err(parse_err(map.line_of(v.site), v.to_string())),
    }
}

/// Serializes an instance; values use the shortest exactly round-tripping form.
pub fn write_instance(s: &ScenarioInstance) -> String {
    let mut out = String::new();
    let r = &s.radio;
    let globals = [
        ("W", r.bandwidth),
        ("N0", r.noise),
        ("gamma_bs", r.snr_bs),
        ("gamma_user", r.snr_user),
        ("g0", s.energy.server_energy_per_cycle),
        ("tau", s.slot),
        ("epsilon", s.fade_floor),
    ];
    writeln!(out, "K = {}", s.num_users()).unwrap();
    for (key, value) in globals {
        writeln!(out, "{key} = {value}").unwrap();
    }
    for (k, (t, u)) in s.tasks.iter().zip(&s.users).enumerate() {
        writeln!(
            out,
            "user {} L={} B={} C={} Y={} beta={} g={}",
            k + 1,
            t.local,
            t.server,
            t.cycles,
            t.output,
            u.gain,
            u.energy_per_cycle
        )
        .unwrap();
    }
    out
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_instance(path: &Path) -> Result<ScenarioInstance, CliError> {
    parse_valid_instance(&read_file(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        message: e.message,
    })
}

/// Human-readable `key = value` report of a solution.
pub fn format_solution(sol: &OffloadSolution) -> String {
    let mut out = String::new();
    match &sol.optimum {
        Some(o) => {
            writeln!(out, "status = FEASIBLE").unwrap();
            writeln!(out, "feasible = 1").unwrap();
            writeln!(out, "decision = {}", o.decision).unwrap();
            writeln!(out, "n_star = {}", o.n_star).unwrap();
            writeln!(out, "total_energy = {}", fmt_sig(o.total_energy)).unwrap();
            writeln!(out, "total_time = {}", fmt_sig(o.total_time)).unwrap();
        }
        None => {
            writeln!(out, "status = INFEASIBLE").unwrap();
            writeln!(out, "feasible = 0").unwrap();
        }
    }
    for (n, value) in &sol.per_n {
        let value = match value {
            SubproblemValue::Optimal(e) => fmt_sig(*e),
            SubproblemValue::Infeasible => "INFEASIBLE".to_string(),
        };
        writeln!(out, "energy_n{n} = {value}").unwrap();
    }
    out
}

pub fn cmd_solve(path: &Path, exact_time: bool, prune_nbar: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let s = read_instance(path)?;
    let cfg = SolverConfig {
        prune_with_cap: prune_nbar,
        ..SolverConfig::default()
    };
    let sol = solve_offloading(&s, &cfg);
    let mut report = format_solution(&sol);
    if exact_time {
        if let Some(o) = &sol.optimum {
            let exact = transmission_times(&s, &o.decision, TimeMode::Exact)
                .expect("decision sized to the scenario")
                .total;
            writeln!(report, "total_time_exact = {}", fmt_sig(exact)).unwrap();
        }
        match exhaustive_oracle(&s, DEFAULT_TOLERANCE, TimeMode::Exact) {
            Ok(ex) => match ex.optimum {
                Some(o) => {
                    writeln!(report, "exact_decision = {}", o.decision).unwrap();
                    writeln!(report, "exact_energy = {}", fmt_sig(o.total_energy)).unwrap();
                }
                None => writeln!(report, "exact_decision = INFEASIBLE").unwrap(),
            },
            Err(_) => writeln!(report, "exact_decision = SKIPPED (K > {ORACLE_USER_LIMIT})").unwrap(),
        }
    }
    emit(out, &report)?;
    Ok(EXIT_OK)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// A parsed sweep configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub spec: SamplingSpec,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub common_random_numbers: bool,
}

const SWEEP_KEYS: [&str; 17] = [
    "K", "gamma_bs", "gamma_user", "g0", "mean_L", "mean_B", "mean_C", "gbar", "c0", "c1", "epsilon",
    "tau", "axis", "grid", "trials", "seed", "crn",
];

/// Problems found while reading a sweep config.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepConfigError {
    /// Malformed input.
    Syntax(ParseError),
    /// Well-formed but unusable values.
    Invalid { line: Option<usize>, message: String },
}

pub fn parse_sweep_config(text: &str) -> Result<SweepConfig, SweepConfigError> {
    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    for (line, body) in content_lines(text) {
        let (key, value) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| SweepConfigError::Syntax(parse_err(line, format!("expected 'key = value', found '{body}'"))))?;
        if !SWEEP_KEYS.contains(&key) {
            return Err(SweepConfigError::Syntax(parse_err(line, format!("unknown key '{key}'"))));
        }
        if entries.insert(key, (line, value)).is_some() {
            return Err(SweepConfigError::Syntax(parse_err(line, format!("{key}: duplicate key"))));
        }
    }

    let mut spec = SamplingSpec::fig2(4.0);
    let get = |key: &str| entries.get(key).copied();
    let number = |key: &str, target: &mut f64| -> Result<(), SweepConfigError> {
        if let Some((line, v)) = get(key) {
            *target = parse_number(line, key, v).map_err(SweepConfigError::Syntax)?;
        }
        Ok(())
    };
    if let Some((line, v)) = get("K") {
        spec.users = parse_number(line, "K", v).map_err(SweepConfigError::Syntax)?;
    }
    number("gamma_bs", &mut spec.radio.snr_bs)?;
    number("gamma_user", &mut spec.radio.snr_user)?;
    number("g0", &mut spec.g0)?;
    number("mean_L", &mut spec.mean_local)?;
    number("mean_B", &mut spec.mean_server)?;
    number("mean_C", &mut spec.mean_cycles)?;
    number("gbar", &mut spec.gbar)?;
    number("c0", &mut spec.output_model.intercept)?;
    number("c1", &mut spec.output_model.slope)?;
    number("epsilon", &mut spec.epsilon)?;
    number("tau", &mut spec.tau)?;

    let invalid = |line, message: String| SweepConfigError::Invalid { line, message };
    let (axis_line, axis_name) = get("axis").ok_or_else(|| invalid(None, "missing key axis".into()))?;
    let axis = SweepAxis::from_name(axis_name)
        .ok_or_else(|| invalid(Some(axis_line), format!("axis: expected mean_B or tau, found '{axis_name}'")))?;

    let (grid_line, grid_text) = get("grid").ok_or_else(|| invalid(None, "missing key grid".into()))?;
    let grid = grid_text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_number::<f64>(grid_line, "grid", t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(SweepConfigError::Syntax)?;
    if grid.is_empty() {
        return Err(invalid(Some(grid_line), "grid: no values".into()));
    }
    if let Some(bad) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(invalid(Some(grid_line), format!("grid: values must be positive, found {bad}")));
    }

    let trials = match get("trials") {
        Some((line, v)) => parse_number(line, "trials", v).map_err(SweepConfigError::Syntax)?,
        None => DEFAULT_TRIALS,
    };
    if trials == 0 {
        return Err(invalid(get("trials").map(|e| e.0), "trials: must be at least 1".into()));
    }
    let seed = match get("seed") {
        Some((line, v)) => parse_number(line, "seed", v).map_err(SweepConfigError::Syntax)?,
        None => 1,
    };
    let common_random_numbers = match get("crn") {
        Some((line, v)) => match v {
            "true" | "1" => true,
            "false" | "0" => false,
            _ => return Err(SweepConfigError::Syntax(parse_err(line, format!("crn: expected true or false, found '{v}'")))),
        },
        None => axis == SweepAxis::Slot,
    };
    if let Some(problem) = spec.problems().into_iter().next() {
        return Err(invalid(None, problem));
    }
    Ok(SweepConfig {
        spec,
        axis,
        grid,
        trials,
        seed,
        common_random_numbers,
    })
}

/// CSV table with one row per grid point, in grid order.
pub fn sweep_csv(axis: SweepAxis, users: usize, rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_name,axis_value,trials,infeasible_count,mean_total_energy,mean_num_offloaders");
    for n in 0..=users {
        write!(out, ",pmf_{n}").unwrap();
    }
    out.push('\n');
    for row in rows {
        let a = &row.aggregate;
        write!(
            out,
            "{},{},{},{},{},{}",
            axis.name(),
            fmt_sig(row.axis_value),
            a.trials,
            a.infeasible_count,
            fmt_opt(a.mean_total_energy),
            fmt_opt(a.mean_num_offloaders)
        )
        .unwrap();
        for p in &a.offloader_pmf {
            write!(out, ",{}", fmt_sig(*p)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn cmd_sweep(path: &Path, out_path: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = parse_sweep_config(&read_file(path)?).map_err(|e| match e {
        SweepConfigError::Syntax(e) => CliError::Parse {
            path: path.to_path_buf(),
            line: e.line,
            message: e.message,
        },
        SweepConfigError::Invalid { line, message } => CliError::Config {
            path: path.to_path_buf(),
            line,
            message,
        },
    })?;
    let opts = SweepOptions {
        solver: SolverConfig::default(),
        common_random_numbers: cfg.common_random_numbers,
    };
    let rows = sweep(&cfg.spec, cfg.axis, &cfg.grid, cfg.trials, cfg.seed, &opts);
    let csv = sweep_csv(cfg.axis, cfg.spec.users, &rows);
    match out_path {
        Some(p) => std::fs::write(p, csv).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => emit(out, &csv)?,
    }
    Ok(EXIT_OK)
}

/// Outcome of comparing the solver with the exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub trials: usize,
    pub mismatches: usize,
    /// First disagreeing trial and its instance.
    pub first: Option<(usize, ScenarioInstance)>,
}

fn agrees(a: &OffloadSolution, b: &OffloadSolution) -> bool {
    match (a.energy(), b.energy()) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()),
        (None, None) => true,
        _ => false,
    }
}

pub fn run_check(users: usize, trials: usize, seed: u64) -> Result<CheckReport, CliError> {
    if users == 0 || users > CHECK_USER_LIMIT {
        return Err(CliError::Usage(format!(
            "--k must lie in [1, {CHECK_USER_LIMIT}], got {users}"
        )));
    }
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let spec = SamplingSpec {
        users,
        ..SamplingSpec::fig2(4.0)
    };
    let cfg = SolverConfig::default();
    let failed: Vec<usize> = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let s = sample_trial(&spec, seed, t);
            let oracle = exhaustive_oracle(&s, cfg.tolerance, TimeMode::Linearized).expect("size guarded");
            !agrees(&solve_offloading(&s, &cfg), &oracle)
        })
        .collect();
    Ok(CheckReport {
        trials,
        mismatches: failed.len(),
        first: failed.first().map(|&t| (t, sample_trial(&spec, seed, t))),
    })
}

pub fn cmd_check(users: usize, trials: usize, seed: u64, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = run_check(users, trials, seed)?;
    let mut text = format!("checked = {}\nmismatches = {}\n", report.trials, report.mismatches);
    if let Some((t, s)) = &report.first {
        writeln!(text, "# first mismatch: trial {t}").unwrap();
        text.push_str(&write_instance(s));
    }
    emit(out, &text)?;
    Ok(if report.mismatches == 0 { EXIT_OK } else { EXIT_MISMATCH })
}

/// Runs a parsed command line; returns the process exit status.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve {
            file,
            exact_time,
            prune_nbar,
        } => cmd_solve(&file, exact_time, prune_nbar, out),
        Command::Sweep { file, out: out_path } => cmd_sweep(&file, out_path.as_deref(), out),
        Command::Check { users, trials, seed } => cmd_check(users, trials, seed, out),
    }
}
