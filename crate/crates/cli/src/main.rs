//! `infmod`: simulations, ε-sweeps, the validation suite and the
//! sexual/asexual comparison.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or a run
//! breaks down, 2 on configuration errors.

mod config;
mod plots;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infmod_core::moments::moment_ode_residuals;
use infmod_core::suite::asexual_comparison;
use infmod_core::sweep::{fit_rate_window, write_records_csv, SweepField};
use infmod_core::{
    run_sweep, run_validation_suite, simulate_with, sweep_gates, validate_hypotheses, CheckResult, Error, ModelKind,
    SimulateOptions, SuiteReport,
};

use crate::config::HarnessConfig;

/// Above this many samples `simulate` skips the moment residual table,
/// which needs every density in memory.
const MAX_RESIDUAL_SAMPLES: usize = 4001;

#[derive(Parser, Debug)]
#[command(name = "infmod", version, about = "Infinitesimal model with selection and competition")]
struct Cli {
    /// TOML file with optional [run], [sweep] and [suite] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Also write SVG figures next to the CSVs.
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Worker threads for sweeps and the suite (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the random densities used by the suite.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One run; writes the trajectory, mean paths and moment residuals.
    Simulate,
    /// One run per ε; writes records, fits and rate gates.
    Sweep,
    /// Runs the validation suite.
    Validate,
    /// Sexual and asexual runs under two selection strengths.
    Asexual,
}

enum Failure {
    Config(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigInvalid(_) | Error::UnderResolved { .. } | Error::Precondition(_) => Failure::Config(e),
            other => Failure::Run(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let mut cfg = HarnessConfig::load(cli.config.as_deref()).map_err(Failure::Config)?;
    if let Some(seed) = cli.seed {
        cfg.suite.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config(Error::ConfigInvalid("--threads must be >= 1".into())));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(Error::Io(e.to_string())))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    match cli.command {
        Command::Simulate => simulate_cmd(cli, &cfg),
        Command::Sweep => sweep_cmd(cli, &cfg),
        Command::Validate => validate_cmd(cli, &cfg),
        Command::Asexual => asexual_cmd(cli, &cfg),
    }
}

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Prints the checks to stdout and stores them under `name`.
fn report(dir: &Path, name: &str, checks: Vec<CheckResult>) -> Result<bool, Failure> {
    let rep = SuiteReport { checks };
    rep.write_csv(create(dir, name)?)?;
    let stdout = std::io::stdout();
    rep.write_csv(stdout.lock())?;
    Ok(rep.all_pass())
}

fn plot(result: Result<(), Box<dyn std::error::Error>>, what: &str) {
    if let Err(e) = result {
        log::error!("could not render {what}: {e}");
    }
}

fn flag(name: &str, value: Option<bool>) -> Option<CheckResult> {
    value.map(|ok| CheckResult {
        check_name: name.into(),
        pass: ok,
        value: if ok { 0.0 } else { 1.0 },
        threshold: 0.0,
    })
}

fn simulate_cmd(cli: &Cli, cfg: &HarnessConfig) -> Result<bool, Failure> {
    let run = &cfg.run;
    let steps = (run.t_end / run.nominal_dt()).ceil() as usize;
    let samples = steps / run.output_stride + 2;
    let keep_states = samples <= MAX_RESIDUAL_SAMPLES;
    let tr = simulate_with(
        run,
        SimulateOptions {
            keep_states,
            ..Default::default()
        },
    )?;
    let dir = &cli.out_dir;
    tr.write_csv(create(dir, "trajectory.csv")?)?;
    tr.mean_path.write_csv(create(dir, "mean_path.csv")?)?;
    tr.limit_path.write_csv(create(dir, "limit_path.csv")?)?;
    if keep_states && tr.rows.len() >= 5 && run.model != ModelKind::AsexualFull {
        let res = moment_ode_residuals(&tr.times(), &tr.states, &run.mortality, run.r, run.epsilon, run.k0)?;
        res.write_csv(create(dir, "residuals.csv")?)?;
        println!("fitted remainder constants: C_F1 = {:.3e}, C_F2 = {:.3e}", res.fitted_c_f1, res.fitted_c_f2);
    } else {
        log::warn!("moment residual table skipped ({} samples)", tr.rows.len());
    }
    if cli.emit_plots {
        plot(plots::trajectory(&dir.join("trajectory.csv"), run.epsilon, &dir.join("trajectory.svg")), "trajectory");
    }

    let hyp = validate_hypotheses(&run.mortality, run.r, run.k0 as u32, &tr.grid)?;
    let f = &tr.flags;
    let mut checks = vec![
        CheckResult {
            check_name: "hypotheses".into(),
            pass: hyp.all_ok(),
            value: hyp.eta,
            threshold: 0.0,
        },
        CheckResult {
            check_name: "positivity".into(),
            pass: f.positivity,
            value: f.min_ratio,
            threshold: -infmod_core::dynamics::NEG_REL,
        },
    ];
    checks.extend(
        [
            ("l1_ceiling", f.l1_ceiling),
            ("pointwise_ceiling", f.pointwise_ceiling),
            ("floor", f.floor),
            ("xk_bound", f.xk_bound),
        ]
        .into_iter()
        .filter_map(|(n, v)| flag(n, v)),
    );
    if run.model == ModelKind::SexualRenormalized {
        checks.push(CheckResult {
            check_name: "mass_drift".into(),
            pass: f.max_mass_drift <= infmod_core::suite::MASS_DRIFT_TOL,
            value: f.max_mass_drift,
            threshold: infmod_core::suite::MASS_DRIFT_TOL,
        });
    }
    report(dir, "simulate_checks.csv", checks)
}

fn sweep_cmd(cli: &Cli, cfg: &HarnessConfig) -> Result<bool, Failure> {
    let sc = &cfg.sweep;
    let out = run_sweep(&cfg.run, &sc.epsilons, &sc.params())?;
    let dir = &cli.out_dir;
    write_records_csv(&out.records, create(dir, "sweep.csv")?)?;

    // wall-clock times vary between runs, so they live apart from the records
    let mut wr = csv::Writer::from_writer(create(dir, "sweep_runtime.csv")?);
    wr.write_record(["epsilon", "runtime_seconds"])?;
    for (r, secs) in out.records.iter().zip(&out.runtime_seconds) {
        wr.write_record([r.epsilon.to_string(), secs.to_string()])?;
    }
    wr.flush()?;

    let mut wr = csv::Writer::from_writer(create(dir, "fits.csv")?);
    wr.write_record(["field", "dropped", "slope", "intercept", "r_squared", "points"])?;
    for field in SweepField::ALL {
        for drop in [0, sc.fit_drop] {
            match fit_rate_window(&out.records, field, drop) {
                Ok(f) => wr.write_record([
                    field.name().to_string(),
                    drop.to_string(),
                    f.slope.to_string(),
                    f.intercept.to_string(),
                    f.r_squared.to_string(),
                    f.points.to_string(),
                ])?,
                Err(e) => log::warn!("no fit for {} (dropping {drop}): {e}", field.name()),
            }
            if sc.fit_drop == 0 {
                break;
            }
        }
    }
    wr.flush()?;
    if cli.emit_plots {
        plot(plots::sweep(&dir.join("sweep.csv"), &dir.join("sweep.svg")), "sweep");
    }
    report(dir, "sweep_checks.csv", sweep_gates(&out, sc.fit_drop))
}

fn validate_cmd(cli: &Cli, cfg: &HarnessConfig) -> Result<bool, Failure> {
    let rep = run_validation_suite(&cfg.suite);
    report(&cli.out_dir, "suite.csv", rep.checks)
}

fn asexual_cmd(cli: &Cli, cfg: &HarnessConfig) -> Result<bool, Failure> {
    let cmp = asexual_comparison(&cfg.suite)?;
    let dir = &cli.out_dir;
    let mut wr = csv::Writer::from_writer(create(dir, "asexual_variance.csv")?);
    wr.write_record(["model", "s", "t", "M2c", "M2c_over_eps2"])?;
    for (label, runs) in [("sexual", &cmp.sexual), ("asexual", &cmp.asexual)] {
        for (s, tr) in cmp.selection.iter().zip(runs.iter()) {
            let eps2 = tr.config.epsilon * tr.config.epsilon;
            for r in &tr.rows {
                wr.write_record([
                    label.to_string(),
                    s.to_string(),
                    r.t.to_string(),
                    r.m2c.to_string(),
                    (r.m2c / eps2).to_string(),
                ])?;
            }
        }
    }
    wr.flush()?;

    let mut wr = csv::Writer::from_writer(create(dir, "asexual_residuals.csv")?);
    wr.write_record(["s", "t", "mean_residual", "variance_residual", "tol_mean", "tol_variance"])?;
    for (s, rows) in cmp.selection.iter().zip(cmp.residuals()?) {
        for r in rows {
            wr.write_record(
                [*s, r.t, r.mean_residual, r.variance_residual, r.tol_mean, r.tol_variance].map(|x| x.to_string()),
            )?;
        }
    }
    wr.flush()?;
    if cli.emit_plots {
        plot(
            plots::asexual(&dir.join("asexual_variance.csv"), &dir.join("asexual_variance.svg")),
            "asexual comparison",
        );
    }
    report(dir, "asexual_checks.csv", cmp.checks()?)
}
