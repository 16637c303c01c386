//! Command-line front end: seeded property-check batteries, file-level
//! composition of structures, and model simulation to CSV/JSON.
//!
//! Exit codes: 0 success, 1 property failure, 2 usage/parse errors,
//! 3 inconsistent initial data, 4 regularity violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use portdirac::checks::{run_checks, CheckConfig};
use portdirac::dynamics::{
    power_balance, simulate_with, DynamicsError, Scheme, SolverOptions, StateField, Trajectory,
};
use portdirac::models::{
    build_lc, build_nonholonomic, build_pendulum_pair, build_port_controlled,
    build_spring_pendulum, constant_spec, nonholonomic_particle, InputSignal, Netlist,
    PendulumPairSpec, PortMode,
};
use portdirac::transfer::{compose, ComposeDims};
use portdirac::LinearStructure;

#[derive(Parser)]
#[command(
    name = "portdirac",
    about = "Structure calculus and DAE simulation for power-conserving interconnected systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded property-check batteries and emit a JSON report.
    Check(CheckArgs),
    /// Compose two port-bearing Dirac structures through an interconnecting
    /// structure, all given as structure JSON files.
    Compose(ComposeArgs),
    /// Simulate a bundled model and write the trajectory.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Seed for the deterministic instance streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances per suite.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Additionally validate structure JSON files (parse, classification).
    #[arg(long = "structure")]
    structures: Vec<PathBuf>,
}

#[derive(Args)]
struct ComposeArgs {
    /// First structure (on U1 ⊕ U2).
    #[arg(long)]
    da: PathBuf,
    /// Second structure (on V1 ⊕ V2).
    #[arg(long)]
    db: PathBuf,
    /// Interconnecting structure (on U2 ⊕ V2).
    #[arg(long)]
    di: PathBuf,
    /// Block dimensions u1,u2,v1,v2.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Output path for the composed structure JSON.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model: oscillator | lc | nonholonomic | spring-pendulum |
    /// pendulum-pair | port-controlled.
    #[arg(long)]
    model: String,
    /// Netlist JSON (lc model).
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Port-closure structure JSON (lc model with ports).
    #[arg(long)]
    closure: Option<PathBuf>,
    /// Close the ports (pendulum-pair, port-controlled).
    #[arg(long, default_value_t = false)]
    closed: bool,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-final", default_value_t = 10.0)]
    t_final: f64,
    /// Stage-solve tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Recorded in the summary; the bundled models are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "midpoint")]
    scheme: String,
    /// Override the initial state (comma-separated components).
    #[arg(long, value_delimiter = ',')]
    initial: Option<Vec<f64>>,
    /// Trajectory output path (defaults to trajectory.csv / trajectory.json).
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv | json.
    #[arg(long, default_value = "csv")]
    format: String,
}

const EXIT_PROPERTY_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INCONSISTENT: u8 = 3;
const EXIT_REGULARITY: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Compose(args) => cmd_compose(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify_error(&err))
        }
    }
}

/// Maps dynamics failure modes onto the documented exit codes.
fn classify_error(err: &anyhow::Error) -> u8 {
    if let Some(dyn_err) = err.downcast_ref::<DynamicsError>() {
        let mut cur = dyn_err;
        loop {
            match cur {
                DynamicsError::AtStep { source, .. } => cur = source,
                DynamicsError::InconsistentState { .. } => return EXIT_INCONSISTENT,
                DynamicsError::RegularityViolation { .. } => return EXIT_REGULARITY,
                _ => return EXIT_USAGE,
            }
        }
    }
    EXIT_USAGE
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {what} file {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("cannot parse {what} file {}: {e}", path.display()))
}

fn cmd_check(args: &CheckArgs) -> anyhow::Result<ExitCode> {
    for path in &args.structures {
        let s: LinearStructure = read_json(path, "structure")?;
        let recomputed = s.reclassify().map_err(|e| anyhow::anyhow!("{e}"))?;
        if recomputed != s.class() {
            anyhow::bail!(
                "structure file {} carries class `{}` but reclassifies as `{}`",
                path.display(),
                s.class().as_str(),
                recomputed.as_str()
            );
        }
    }
    let report = run_checks(&CheckConfig {
        seed: args.seed,
        cases: args.cases,
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &args.output {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_PROPERTY_FAILURE))
    }
}

fn cmd_compose(args: &ComposeArgs) -> anyhow::Result<ExitCode> {
    let da: LinearStructure = read_json(&args.da, "structure")?;
    let db: LinearStructure = read_json(&args.db, "structure")?;
    let di: LinearStructure = read_json(&args.di, "structure")?;
    if args.dims.len() != 4 {
        anyhow::bail!("--dims takes exactly four integers u1,u2,v1,v2");
    }
    let dims = ComposeDims {
        u1: args.dims[0],
        u2: args.dims[1],
        v1: args.dims[2],
        v2: args.dims[3],
    };
    let out = compose(&da, &db, &di, dims).map_err(|e| anyhow::anyhow!("{e}"))?;
    if !out.is_dirac() {
        anyhow::bail!(
            "composition came out as `{}` instead of a Dirac structure",
            out.class().as_str()
        );
    }
    std::fs::write(
        &args.output,
        format!("{}\n", serde_json::to_string_pretty(&out)?),
    )?;
    println!(
        "{}",
        serde_json::json!({
            "schema": "portdirac-compose/v1",
            "output": args.output.display().to_string(),
            "flow_dim": out.flow_dim(),
            "dim": out.dim(),
            "class": out.class().as_str(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

struct ModelRun {
    field: StateField,
    x0: DVector<f64>,
    io_kind: Option<&'static str>,
}

fn canonical_j(n: usize) -> DMatrix<f64> {
    let half = n / 2;
    let mut j = DMatrix::zeros(n, n);
    for i in 0..half {
        j[(i, half + i)] = 1.0;
        j[(half + i, i)] = -1.0;
    }
    j
}

fn build_model(args: &SimulateArgs) -> anyhow::Result<ModelRun> {
    match args.model.as_str() {
        "oscillator" => {
            let spec = Arc::new(constant_spec(
                canonical_j(2),
                DMatrix::zeros(2, 1),
                DMatrix::identity(2, 2),
            ));
            let sys = build_port_controlled(spec, PortMode::Closed)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            Ok(ModelRun {
                field: sys.field,
                x0: DVector::from_column_slice(&[1.0, 0.0]),
                io_kind: Some("fio"),
            })
        }
        "lc" => {
            let netlist_path = args
                .netlist
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("the lc model needs --netlist"))?;
            let netlist: Netlist = read_json(netlist_path, "netlist")?;
            let closure: Option<LinearStructure> = match &args.closure {
                Some(path) => Some(read_json(path, "closure")?),
                None => None,
            };
            let sys = build_lc(&netlist, closure.as_ref()).map_err(|e| anyhow::anyhow!("{e}"))?;
            let b = netlist.branch_count();
            let kind = sys.io.as_ref().map(|io| match io.kind() {
                portdirac::IoKind::Obio => "obio",
                _ => "bio",
            });
            let field = sys
                .field
                .ok_or_else(|| anyhow::anyhow!("open ports: supply --closure to simulate"))?;
            // Capacitors start charged to 1, everything at rest.
            let mut x0 = DVector::zeros(3 * b);
            for (i, branch) in netlist.branches.iter().enumerate() {
                if matches!(branch.kind, portdirac::models::BranchKind::Capacitor) {
                    x0[i] = 1.0;
                }
            }
            Ok(ModelRun {
                field,
                x0,
                io_kind: kind,
            })
        }
        "nonholonomic" => {
            let sys = build_nonholonomic(Arc::new(nonholonomic_particle()))
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            Ok(ModelRun {
                field: sys.field,
                x0: DVector::from_column_slice(&[0.0, 0.0, 0.0, 0.3, 0.1, 0.0]),
                io_kind: Some("fio"),
            })
        }
        "spring-pendulum" => {
            let sys = build_spring_pendulum(5.0, 1.0, 1.0, [0.0, 0.0])
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let x0 = sys.state_from(1.3, 0.0, 0.0, 0.8);
            Ok(ModelRun {
                field: sys.field,
                x0,
                io_kind: Some("ofio"),
            })
        }
        "pendulum-pair" => {
            if !args.closed {
                anyhow::bail!(
                    "the open pendulum-pair record has underdetermined dynamics; pass --closed"
                );
            }
            let spec = PendulumPairSpec::matched(1.0, 0.5, 9.81, 0.3, 0.0);
            let sys = build_pendulum_pair(spec, true).map_err(|e| anyhow::anyhow!("{e}"))?;
            Ok(ModelRun {
                field: sys.field.expect("closed system is simulable"),
                x0: spec.initial_state(),
                io_kind: Some("bio"),
            })
        }
        "port-controlled" => {
            if args.closed {
                let spec = Arc::new(constant_spec(
                    canonical_j(4),
                    DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0]),
                    DMatrix::identity(4, 4),
                ));
                let sys = build_port_controlled(spec, PortMode::Closed)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(ModelRun {
                    field: sys.field,
                    x0: DVector::from_column_slice(&[0.4, 1.0, 0.0, 0.0]),
                    io_kind: Some("fio"),
                })
            } else {
                let spec = Arc::new(constant_spec(
                    canonical_j(2),
                    DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
                    DMatrix::identity(2, 2),
                ));
                let input: InputSignal =
                    Arc::new(|t: f64| DVector::from_column_slice(&[t.sin()]));
                let sys = build_port_controlled(spec, PortMode::Open(input))
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let x0 = sys.initial_state(&DVector::from_column_slice(&[1.0, 0.0]));
                Ok(ModelRun {
                    field: sys.field,
                    x0,
                    io_kind: Some("ofio"),
                })
            }
        }
        other => anyhow::bail!(
            "unknown model `{other}` (expected oscillator|lc|nonholonomic|spring-pendulum|pendulum-pair|port-controlled)"
        ),
    }
}

fn trajectory_json(traj: &Trajectory) -> serde_json::Value {
    serde_json::json!({
        "schema": "portdirac-trajectory/v1",
        "times": traj.times,
        "states": traj
            .states
            .iter()
            .map(|s| s.iter().copied().collect::<Vec<f64>>())
            .collect::<Vec<_>>(),
        "energies": traj.energies,
        "consistency_residuals": traj.consistency_residuals,
        "power_residuals": traj.power_residuals,
    })
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<ExitCode> {
    if args.dt <= 0.0 {
        anyhow::bail!("--dt must be positive");
    }
    if args.t_final < 0.0 {
        anyhow::bail!("--t-final must be nonnegative");
    }
    let scheme: Scheme = args
        .scheme
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let run = build_model(args)?;
    let x0 = match &args.initial {
        Some(values) => {
            if values.len() != run.field.n {
                anyhow::bail!(
                    "--initial has {} components, the model state has {}",
                    values.len(),
                    run.field.n
                );
            }
            DVector::from_column_slice(values)
        }
        None => run.x0.clone(),
    };
    let opts = SolverOptions {
        newton_tol: args.tol,
        ..SolverOptions::default()
    };
    let traj = simulate_with(&run.field, &x0, args.dt, args.t_final, scheme, &opts)
        .map_err(anyhow::Error::from)?;

    let default_name = match args.format.as_str() {
        "json" => "trajectory.json",
        _ => "trajectory.csv",
    };
    let out_path = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_name));
    match args.format.as_str() {
        "csv" => {
            let mut file = std::fs::File::create(&out_path)?;
            traj.write_csv(&mut file)?;
        }
        "json" => {
            std::fs::write(
                &out_path,
                format!(
                    "{}\n",
                    serde_json::to_string_pretty(&trajectory_json(&traj))?
                ),
            )?;
        }
        other => anyhow::bail!("unknown format `{other}` (expected csv|json)"),
    }

    let balance = power_balance(&traj);
    let summary = serde_json::json!({
        "schema": "portdirac-sim/v1",
        "model": args.model,
        "io_kind": run.io_kind,
        "scheme": args.scheme,
        "dt": args.dt,
        "t_final": args.t_final,
        "seed": args.seed,
        "steps": traj.len() - 1,
        "state_dim": run.field.n,
        "energy_drift_max": traj.max_energy_drift(),
        "consistency_residual_max": traj.max_consistency_residual(),
        "power_residual_max": traj.power_residuals.as_ref().map(|_| balance.max_residual),
        "output": out_path.display().to_string(),
    });
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}
