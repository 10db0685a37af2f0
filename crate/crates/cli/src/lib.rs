//! Command-line front end for `measim`.
//!
//! Exit codes: `0` success or conditions hold, `1` a computed negative
//! result or a runtime failure, `2` malformed input.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use measim::dynamics::{evolve_stepped, step_grid, ExactEvolution, Trajectory};
use measim::measurement::{aggregate_sigma, aggregate_sigma_empirical, outcome_distribution, repeated_trials, Experiment};
use measim::model::{check_conditions, prepare_initial, DEFAULT_CONDITION_THRESHOLD};
use measim::scenario::{bundled_sources, ResolvedScenario, Scenario};
use measim::sweep::{interpolation_sweep, SweepConfig};
use measim::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "measim", version, about = "Simulate system-apparatus measurement models")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Sampling seed; overrides the scenario's `schedule.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV destination; `-` writes the CSV to stdout and the summary to stderr.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the summary.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Commutator defects of the coupling against both free Hamiltonians.
    Check {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        /// Relative defect at or below which a condition holds.
        #[arg(long, default_value_t = DEFAULT_CONDITION_THRESHOLD)]
        threshold: f64,
    },
    /// Evolve the prepared state and write the trajectory.
    Evolve {
        scenario: String,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = measim::tol::DEFAULT_STEP)]
        dt: f64,
        /// Propagator evolution on the step grid (default).
        #[arg(long, conflicts_with = "stepped")]
        exact: bool,
        /// Fourth-order Runge-Kutta integration.
        #[arg(long)]
        stepped: bool,
    },
    /// Repeated readouts: record CSV plus mean-reading summary.
    Measure {
        scenario: String,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Interpolation sweep between coupling families.
    Sweep {
        /// `d_s,d_m`.
        #[arg(long, default_value = "2,2")]
        dims: String,
        /// Comma-separated η values in [0, 1].
        #[arg(long)]
        eta_grid: Option<String>,
        /// Comma-separated model seeds; defaults to the published list.
        #[arg(long)]
        seeds: Option<String>,
        /// Trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_NEGATIVE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NEGATIVE };
        Self { code, message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Runs one command. The summary goes to `out` unless the CSV itself is
/// routed there with `--out -`, in which case it goes to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, CliError> {
    let csv_to_stdout = cli.global.out.as_deref() == Some(Path::new("-"));
    let mut sink = Sink { out, err, csv_to_stdout, quiet: cli.global.quiet };
    match &cli.command {
        Command::Check { scenario, threshold } => cmd_check(&load_scenario(scenario)?, *threshold, &mut sink),
        Command::Evolve { scenario, t_end, dt, stepped, .. } => {
            let s = load_scenario(scenario)?;
            let traj = cmd_evolve(&s, *t_end, *dt, *stepped)?;
            sink.csv(cli.global.out.as_deref(), &traj.to_csv())?;
            sink.line(format_args!("points: {}", traj.len()))?;
            sink.line(format_args!("terminal_trace_deviation: {:e}", traj.terminal_trace_deviation()))?;
            sink.line(format_args!("purity_drift: {:e}", traj.max_purity_drift()))?;
            Ok(EXIT_OK)
        }
        Command::Measure { scenario, repeats, trials } => {
            let mut s = load_scenario(scenario)?;
            if let Some(r) = repeats {
                s.schedule.repeats = *r;
            }
            if let Some(n) = trials {
                s.schedule.trials = *n;
            }
            if let Some(seed) = cli.global.seed {
                s.schedule.seed = seed;
            }
            let summary = cmd_measure(&s)?;
            sink.csv(cli.global.out.as_deref(), &summary.csv)?;
            summary.print(&mut sink)?;
            Ok(EXIT_OK)
        }
        Command::Sweep { dims, eta_grid, seeds, trials } => {
            let cfg = sweep_config(dims, eta_grid.as_deref(), seeds.as_deref(), *trials)?;
            let csv = interpolation_sweep(&cfg)?.to_csv();
            sink.csv(cli.global.out.as_deref(), &csv)?;
            sink.line(format_args!("points: {}", cfg.eta_grid.len() * cfg.seeds.len()))?;
            Ok(EXIT_OK)
        }
    }
}

struct Sink<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    csv_to_stdout: bool,
    quiet: bool,
}

impl Sink<'_> {
    fn line(&mut self, args: fmt::Arguments<'_>) -> Result<(), CliError> {
        if self.quiet {
            return Ok(());
        }
        let w: &mut dyn Write = if self.csv_to_stdout { &mut *self.err } else { &mut *self.out };
        writeln!(w, "{args}").map_err(io_error)
    }

    fn csv(&mut self, dest: Option<&Path>, csv: &str) -> Result<(), CliError> {
        match dest {
            None => Ok(()),
            Some(p) if p == Path::new("-") => self.out.write_all(csv.as_bytes()).map_err(io_error),
            Some(p) => fs::write(p, csv).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display()))),
        }
    }
}

fn io_error(e: io::Error) -> CliError {
    CliError::runtime(format!("output error: {e}"))
}

/// Reads a scenario file; a path that does not exist but names a bundled
/// scenario loads that scenario instead.
pub fn load_scenario(path: &str) -> Result<ResolvedScenario, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => match bundled_sources().iter().find(|(name, _)| *name == path) {
            Some((_, src)) if !Path::new(path).exists() => src.to_string(),
            _ => return Err(CliError::input(format!("cannot read {path}: {e}"))),
        },
    };
    let (_, resolved) = Scenario::load(&text).map_err(|e| CliError::input(format!("{path}: {e}")))?;
    Ok(resolved)
}

pub fn cmd_check(s: &ResolvedScenario, threshold: f64, sink: &mut impl SummaryWrite) -> Result<u8, CliError> {
    let r = check_conditions(&s.model, threshold)?;
    sink.summary(format_args!("scenario: {}", s.name))?;
    sink.summary(format_args!("system_coupling_defect: {:e} ({})", r.eq4_defect, verdict(r.eq4_holds)))?;
    sink.summary(format_args!("coupling_apparatus_defect: {:e} ({})", r.eq5_defect, verdict(r.eq5_holds)))?;
    sink.summary(format_args!("threshold: {:e}", r.threshold))?;
    Ok(if r.both_hold() { EXIT_OK } else { EXIT_NEGATIVE })
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "violated"
    }
}

/// Exact or stepped trajectory from the prepared state. `t_end = 0` gives
/// the single initial row.
pub fn cmd_evolve(s: &ResolvedScenario, t_end: f64, dt: f64, stepped: bool) -> Result<Trajectory, CliError> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(CliError::input(format!("--t-end must be finite and non-negative, got {t_end}")));
    }
    let w0 = prepare_initial(&s.model, &s.preparation, s.pointer.basis())?;
    if t_end == 0.0 {
        return Ok(Trajectory::initial(w0));
    }
    if stepped {
        Ok(evolve_stepped(&s.model, &w0, t_end, dt)?)
    } else {
        Ok(ExactEvolution::new(&s.model).trajectory(&w0, &step_grid(t_end, dt)?)?)
    }
}

/// Outcome of `measure`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSummary {
    pub csv: String,
    pub trials: usize,
    pub repeats: usize,
    pub sigma_analytic: f64,
    pub sigma_empirical: f64,
    pub reading_variance: f64,
    pub repeat_changes: usize,
    pub degenerate: bool,
}

impl MeasureSummary {
    fn print(&self, sink: &mut impl SummaryWrite) -> Result<(), CliError> {
        sink.summary(format_args!("trials: {}", self.trials))?;
        sink.summary(format_args!("repeats: {}", self.repeats))?;
        sink.summary(format_args!("sigma_analytic: {}", self.sigma_analytic))?;
        sink.summary(format_args!("sigma_empirical: {}", self.sigma_empirical))?;
        if self.degenerate {
            sink.summary(format_args!("reading_variance: {} (degenerate: fewer than 2 trials)", self.reading_variance))?;
        } else {
            sink.summary(format_args!("reading_variance: {}", self.reading_variance))?;
        }
        sink.summary(format_args!("repeat_changes: {}", self.repeat_changes))
    }
}

/// Repeated trials on the scenario schedule. The dispersion statistics use
/// each trial's first reading.
pub fn cmd_measure(s: &ResolvedScenario) -> Result<MeasureSummary, CliError> {
    let exp = Experiment { model: &s.model, preparation: &s.preparation, pointer: &s.pointer, calibration: &s.calibration };
    let sched = &s.schedule;
    let record = repeated_trials(&exp, &sched.repeat_schedule(), sched.trials, sched.seed)?;
    let first = record.first_readings();
    let readings: Vec<f64> = first.iter().map(|e| e.reading).collect();
    let system = s.preparation.system_label();
    let w0 = prepare_initial(&s.model, &s.preparation, s.pointer.basis())?;
    let w = ExactEvolution::new(&s.model).evolve(&w0, sched.tau)?;
    let p = outcome_distribution(&w, &s.pointer, s.model.d_s(), s.model.d_m())?;
    Ok(MeasureSummary {
        csv: record.to_csv(),
        trials: sched.trials,
        repeats: sched.repeats,
        sigma_analytic: aggregate_sigma(&p, &s.calibration, system)?.sigma,
        sigma_empirical: aggregate_sigma_empirical(&first, &s.calibration, system)?.sigma,
        reading_variance: measim::measurement::population_variance(&readings),
        repeat_changes: record.repeat_changes(),
        degenerate: first.len() < 2,
    })
}

/// Builds a sweep configuration from the textual flags.
pub fn sweep_config(dims: &str, eta_grid: Option<&str>, seeds: Option<&str>, trials: Option<usize>) -> Result<SweepConfig, CliError> {
    let mut cfg = SweepConfig::default();
    let d: Vec<usize> = parse_list(dims, "--dims")?;
    let [d_s, d_m] = d[..] else {
        return Err(CliError::input(format!("--dims expects two values, got `{dims}`")));
    };
    cfg.d_s = d_s;
    cfg.d_m = d_m;
    if let Some(g) = eta_grid {
        cfg.eta_grid = parse_list(g, "--eta-grid")?;
    }
    if let Some(s) = seeds {
        cfg.seeds = parse_list(s, "--seeds")?;
    }
    if let Some(n) = trials {
        cfg.schedule.trials = n;
    }
    if cfg.seeds.is_empty() {
        return Err(CliError::input("--seeds must list at least one seed"));
    }
    if cfg.eta_grid.is_empty() {
        return Err(CliError::input("--eta-grid must list at least one value"));
    }
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::input(format!("{flag}: cannot parse `{t}`"))))
        .collect()
}

/// Destination for human-readable summary lines.
pub trait SummaryWrite {
    fn summary(&mut self, args: fmt::Arguments<'_>) -> Result<(), CliError>;
}

impl SummaryWrite for Sink<'_> {
    fn summary(&mut self, args: fmt::Arguments<'_>) -> Result<(), CliError> {
        self.line(args)
    }
}

impl SummaryWrite for Vec<u8> {
    fn summary(&mut self, args: fmt::Arguments<'_>) -> Result<(), CliError> {
        writeln!(self, "{args}").map_err(io_error)
    }
}
