use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use gridtherm::oracle::IterativeSolver;
use gridtherm::report::{
    bench, compare_solvers, write_snapshot_csv, write_trace_csv, GridSummary, RunManifest,
};
use gridtherm::sim::{run_episode, Model, Solver};
use gridtherm::weather::load_weather_file;
use gridtherm::{Building, TensorSolver, WeatherSeries};

#[derive(Parser)]
#[command(name = "gridtherm", version, about = "2D building thermal simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverKind {
    Tensor,
    Iterative,
}

#[derive(clap::Args)]
struct Inputs {
    /// Building description (TOML).
    #[arg(long)]
    building: PathBuf,
    /// Weather time series (CSV).
    #[arg(long)]
    weather: PathBuf,
    /// Number of timesteps.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write snapshots, a convergence trace and a manifest.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = SolverKind::Tensor)]
        solver: SolverKind,
        /// Write a snapshot every N steps.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        snapshot_every: u64,
    },
    /// Run both solvers on identical inputs and compare the fields per step.
    Compare {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Time both solvers, best of `--repeats`.
    Bench {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        repeats: u64,
    },
}

fn load(inputs: &Inputs) -> Result<(Building, Arc<Model>, WeatherSeries)> {
    let building = Building::load(&inputs.building)
        .with_context(|| format!("loading {}", inputs.building.display()))?;
    let weather = load_weather_file(&inputs.weather)
        .with_context(|| format!("loading {}", inputs.weather.display()))?;
    let model = Arc::new(Model::from_building(&building)?);
    fs::create_dir_all(&inputs.out)
        .with_context(|| format!("creating {}", inputs.out.display()))?;
    Ok((building, model, weather))
}

fn make_solver(kind: SolverKind, model: Arc<Model>) -> Result<Box<dyn Solver>> {
    Ok(match kind {
        SolverKind::Tensor => Box::new(TensorSolver::new(model)?),
        SolverKind::Iterative => Box::new(IterativeSolver::new(model)?),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_run(inputs: &Inputs, kind: SolverKind, every: usize) -> Result<bool> {
    let (_, model, weather) = load(inputs)?;
    let steps = inputs.steps as usize;
    let initial = model.initial_state(&weather)?;
    let start = initial.sim_clock;
    let mut solver = make_solver(kind, Arc::clone(&model))?;
    let episode = run_episode(solver.as_mut(), initial, &weather, steps, every)?;

    for snap in &episode.snapshots {
        let path = inputs
            .out
            .join(format!("snapshot_{:04}.csv", snap.step_index));
        write_snapshot_csv(create(&path)?, &model.grid, snap)?;
    }
    write_trace_csv(create(&inputs.out.join("trace.csv"))?, &episode.reports)?;
    if let Some(m) = &model.exchange {
        m.write_csv(create(&inputs.out.join("exchange_matrix.csv"))?)?;
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        solver: solver.name().to_string(),
        building: inputs.building.display().to_string(),
        weather: inputs.weather.display().to_string(),
        steps,
        start: start.to_rfc3339(),
        total_wall_time: episode.total_wall_time(),
        grid: GridSummary {
            rows: model.grid.rows,
            cols: model.grid.cols,
            n_cells: model.grid.n_cells(),
            z: model.grid.z,
            zones: model.grid.n_zones,
        },
        site: model.site,
        simulation: model.config.clone(),
    };
    manifest.write(&inputs.out.join("manifest.toml"))?;
    info!(
        "{} steps in {:.4} s, {} snapshots written to {}",
        steps,
        episode.total_wall_time(),
        episode.snapshots.len(),
        inputs.out.display()
    );
    Ok(true)
}

fn cmd_compare(inputs: &Inputs) -> Result<bool> {
    let (_, model, weather) = load(inputs)?;
    let initial = model.initial_state(&weather)?;
    let mut a = TensorSolver::new(Arc::clone(&model))?;
    let mut b = IterativeSolver::new(Arc::clone(&model))?;
    let report = compare_solvers(&mut a, &mut b, &weather, &initial, inputs.steps as usize)?;
    fs::write(inputs.out.join("compare.toml"), report.to_toml_string()?)?;
    println!(
        "max relative difference {:.3e}, max absolute difference {:.3e} K, {} significant figures: {}",
        report.per_cell_max_rel_diff,
        report.per_cell_max_abs_diff,
        report.sig_figs_agreement,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(report.pass)
}

fn cmd_bench(inputs: &Inputs, repeats: usize) -> Result<bool> {
    let (_, model, weather) = load(inputs)?;
    let report = bench(model, &weather, inputs.steps as usize, repeats)?;
    let table = report.to_markdown();
    fs::write(inputs.out.join("bench.md"), &table)?;
    fs::write(inputs.out.join("bench.toml"), report.to_toml_string()?)?;
    print!("{table}");
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            inputs,
            solver,
            snapshot_every,
        } => cmd_run(inputs, *solver, *snapshot_every as usize),
        Command::Compare { inputs } => cmd_compare(inputs),
        Command::Bench { inputs, repeats } => cmd_bench(inputs, *repeats as usize),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
