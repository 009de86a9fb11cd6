//! Command-line front end: fly scenarios, audit the allocator, fit the
//! voltage map, and recompute metrics from run logs.
//!
//! Exit codes: 0 success, 1 runtime or input trouble, 2 mission abort,
//! 3 divergence, 4 unusable scenario configuration.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{Quaternion, UnitQuaternion, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polestack_core::allocation::{build_problem, verify_kkt, ActiveSetQp};
use polestack_core::metrics::MetricsCollector;
use polestack_core::report::phase_table;
use polestack_core::runlog::{read_runlog, RunLogWriter};
use polestack_core::scenario::Scenario;
use polestack_core::sim::{run_scenario, run_scenario_quiet, SimError};
use polestack_core::so3::{euler_zyx, RotationMatrix};
use polestack_core::vehicle::AllocationMatrix;
use polestack_core::voltage::{plant_speed_fraction, training_sweep, VoltageMap};

#[derive(Parser)]
#[command(name = "polestack", version, about = "Pole-stacking octorotor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly a scenario and print the end-of-run report.
    Run {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Write the control-rate run log to this CSV file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Solve random wrenches and certify every solution against the
    /// optimality conditions.
    VerifyAllocation {
        /// Scenario TOML file supplying the vehicle and the weights.
        scenario: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the voltage compensation map and report its round-trip quality.
    FitVoltage,
    /// Recompute per-phase precision metrics from a run log.
    Metrics {
        /// Run log CSV produced by `run --log`.
        log: PathBuf,
    },
}

enum Failure {
    /// The scenario file cannot be loaded or does not validate.
    Config(String),
    /// Anything else: IO, solver trouble, unreadable logs.
    Other(String),
}

impl Failure {
    fn exit(&self) -> u8 {
        match self {
            Self::Config(_) => 4,
            Self::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Other(m) => m,
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit())
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run { scenario, log } => cmd_run(&scenario, log.as_deref()),
        Command::VerifyAllocation {
            scenario,
            samples,
            seed,
        } => cmd_verify_allocation(&scenario, samples, seed),
        Command::FitVoltage => cmd_fit_voltage(),
        Command::Metrics { log } => cmd_metrics(&log),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_toml_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn sim_failure(error: SimError) -> Failure {
    match error {
        SimError::Scenario(e) => Failure::Config(e.to_string()),
        other => Failure::Other(other.to_string()),
    }
}

fn cmd_run(scenario_path: &Path, log_path: Option<&Path>) -> Result<u8, Failure> {
    let scenario = load_scenario(scenario_path)?;
    let result = match log_path {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| Failure::Other(format!("cannot create {}: {e}", path.display())))?;
            let mut writer = RunLogWriter::new(BufWriter::new(file))
                .map_err(|e| Failure::Other(e.to_string()))?;
            let result = run_scenario(&scenario, Some(&mut writer)).map_err(sim_failure)?;
            writer
                .into_inner()
                .flush()
                .map_err(|e| Failure::Other(format!("cannot finish {}: {e}", path.display())))?;
            result
        }
        None => run_scenario_quiet(&scenario).map_err(sim_failure)?,
    };
    print!("{}", result.report());
    Ok(result.outcome.exit_code() as u8)
}

fn cmd_verify_allocation(scenario_path: &Path, samples: u32, seed: u64) -> Result<u8, Failure> {
    const TOLERANCE: f64 = 1e-8;
    let scenario = load_scenario(scenario_path)?;
    let params = scenario
        .vehicle_params()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let matrix = AllocationMatrix::from_params(&params).map_err(|e| Failure::Other(e.to_string()))?;
    let problem = build_problem(&matrix, &params, &scenario.allocation_weights())
        .map_err(|e| Failure::Other(e.to_string()))?;

    let weight = params.mass * params.gravity_w.z;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solver = ActiveSetQp::new();
    let mut certified = 0u32;
    let mut worst_residual = 0.0f64;
    let mut max_iterations = 0usize;
    let mut total_iterations = 0usize;

    for _ in 0..samples {
        // Lateral forces and torques beyond what the side rotors can do are
        // deliberate: saturated, slack-active cases must certify too.
        let target = Vector6::new(
            rng.random_range(-8.0..8.0),
            rng.random_range(-8.0..8.0),
            rng.random_range(0.0..2.2) * weight,
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-1.5..1.5),
        );
        let solution = solver
            .solve(&problem, &target)
            .map_err(|e| Failure::Other(format!("solver failed: {e}")))?;
        let report = verify_kkt(&problem, &target, &solution.decision_vector())
            .map_err(|e| Failure::Other(format!("verifier failed: {e}")))?;
        worst_residual = worst_residual.max(report.worst());
        max_iterations = max_iterations.max(solution.iterations);
        total_iterations += solution.iterations;
        if report.passes(TOLERANCE) {
            certified += 1;
        }
    }

    println!("samples:        {samples}");
    println!("certified:      {certified} (tolerance {TOLERANCE:.0e})");
    println!("worst residual: {worst_residual:.3e}");
    println!(
        "iterations:     max {max_iterations}, mean {:.2}",
        total_iterations as f64 / f64::from(samples.max(1))
    );
    Ok(if certified == samples { 0 } else { 1 })
}

fn cmd_fit_voltage() -> Result<u8, Failure> {
    let map = VoltageMap::fit(&training_sweep()).map_err(|e| Failure::Other(e.to_string()))?;
    println!("basis coefficients:");
    for (i, c) in map.coefficients().iter().enumerate() {
        println!("  c[{i}] = {c}");
    }

    // Round-trip audit on the reachable part of the grid: a desired speed
    // fraction above the voltage fraction cannot be reached at any command.
    let mut worst = 0.0f64;
    for s_step in 4..=20 {
        let desired = f64::from(s_step) * 0.05;
        for v_step in 82..=100 {
            let voltage = f64::from(v_step) / 100.0;
            if desired > voltage {
                continue;
            }
            let command = map.command_for(desired, voltage);
            let achieved = plant_speed_fraction(command, voltage);
            worst = worst.max((achieved - desired).abs() / desired);
        }
    }
    println!("worst relative round-trip error: {worst:.3e}");
    Ok(0)
}

fn cmd_metrics(log_path: &Path) -> Result<u8, Failure> {
    let text = fs::read_to_string(log_path)
        .map_err(|e| Failure::Other(format!("cannot read {}: {e}", log_path.display())))?;
    let rows = read_runlog(&text).map_err(|e| Failure::Other(e.to_string()))?;
    if rows.is_empty() {
        return Err(Failure::Other("log has no data rows".into()));
    }

    let mut collector = MetricsCollector::new();
    for row in &rows {
        let [w, i, j, k] = row.quaternion;
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, i, j, k));
        let attitude = RotationMatrix::from_matrix_unchecked(*q.to_rotation_matrix().matrix());
        let (roll, pitch, _) = euler_zyx(&attitude);
        collector.record(
            &row.phase,
            row.t,
            row.radial_error,
            row.tip_radial_error,
            roll,
            pitch,
        );
    }

    println!(
        "{} rows spanning {} s",
        rows.len(),
        rows.last().expect("nonempty").t - rows[0].t
    );
    print!("{}", phase_table(collector.phases(), &collector.overall()));
    Ok(0)
}
