//! Solver comparison, benchmarking and the CSV/TOML artifacts written by the
//! command-line driver.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::building::{BuildingGrid, SimulationConfig};
use crate::error::{Error, Result};
use crate::oracle::IterativeSolver;
use crate::sim::{run_episode, Model, Solver, ThermalState};
use crate::tensor::{StepReport, TensorSolver};
use crate::weather::{SitePosition, WeatherSeries};

/// Relative tolerance for "five significant figures".
pub const AGREEMENT_TOLERANCE: f64 = 1e-5;

/// Published reference timings for 10 steps on the 276-CV building [s].
pub const REFERENCE_ITERATIVE_TOTAL: f64 = 12.70;
pub const REFERENCE_TENSOR_TOTAL: f64 = 3.03;
pub const REFERENCE_SPEEDUP: f64 = 4.19;

/// `|a − b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Number of agreeing significant figures implied by a relative difference,
/// capped at 16.
pub fn significant_figures(rel: f64) -> u32 {
    if rel <= 0.0 {
        return 16;
    }
    (-rel.log10()).floor().clamp(0.0, 16.0) as u32
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepComparison {
    pub step: usize,
    pub max_rel_diff: f64,
    pub max_abs_diff: f64,
    pub worst_row: usize,
    pub worst_col: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub solver_a: String,
    pub solver_b: String,
    pub per_cell_max_rel_diff: f64,
    pub per_cell_max_abs_diff: f64,
    pub sig_figs_agreement: u32,
    pub pass: bool,
    pub steps: Vec<StepComparison>,
}

/// Field-wise comparison of two temperature fields of equal shape.
pub fn compare_fields(step: usize, a: &ThermalState, b: &ThermalState) -> Result<StepComparison> {
    if a.t.dim() != b.t.dim() {
        return Err(Error::Dimension {
            expected: a.t.len(),
            found: b.t.len(),
        });
    }
    let mut out = StepComparison {
        step,
        max_rel_diff: 0.0,
        max_abs_diff: 0.0,
        worst_row: 0,
        worst_col: 0,
    };
    for (((r, c), &x), &y) in a.t.indexed_iter().zip(b.t.iter()) {
        let rel = relative_difference(x, y);
        if rel > out.max_rel_diff || rel.is_nan() {
            out.max_rel_diff = if rel.is_nan() { f64::INFINITY } else { rel };
            out.worst_row = r;
            out.worst_col = c;
        }
        out.max_abs_diff = out.max_abs_diff.max((x - y).abs());
    }
    Ok(out)
}

/// Steps two solvers side by side from the same initial state and compares
/// the fields after every step.
pub fn compare_solvers(
    a: &mut dyn Solver,
    b: &mut dyn Solver,
    weather: &WeatherSeries,
    initial: &ThermalState,
    n_steps: usize,
) -> Result<ComparisonReport> {
    if n_steps == 0 {
        return Err(Error::Precondition("n_steps must be at least 1".into()));
    }
    let mut sa = initial.clone();
    let mut sb = initial.clone();
    let mut steps = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        sa = run_episode(a, sa, weather, 1, 1)?.final_state;
        sb = run_episode(b, sb, weather, 1, 1)?.final_state;
        steps.push(compare_fields(sa.step_index, &sa, &sb)?);
    }
    let rel = steps.iter().map(|s| s.max_rel_diff).fold(0.0, f64::max);
    let abs = steps.iter().map(|s| s.max_abs_diff).fold(0.0, f64::max);
    Ok(ComparisonReport {
        solver_a: a.name().to_string(),
        solver_b: b.name().to_string(),
        per_cell_max_rel_diff: rel,
        per_cell_max_abs_diff: abs,
        sig_figs_agreement: significant_figures(rel),
        pass: rel <= AGREEMENT_TOLERANCE,
        steps,
    })
}

impl ComparisonReport {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Precondition(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverTiming {
    pub solver_name: String,
    /// Best total over the repeats [s].
    pub total_time: f64,
    pub mean_per_step: f64,
    /// Per-step times of the best repeat [s].
    pub per_step_times: Vec<f64>,
    /// Total of every repeat, in run order [s].
    pub repeat_totals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceTiming {
    pub iterative_total: f64,
    pub tensor_total: f64,
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub steps: usize,
    pub repeats: usize,
    pub n_cells: usize,
    pub iterative: SolverTiming,
    pub tensor: SolverTiming,
    /// `iterative.total_time / tensor.total_time`.
    pub speedup: f64,
    pub reference: ReferenceTiming,
}

fn time_solver(
    make: &dyn Fn() -> Result<Box<dyn Solver>>,
    weather: &WeatherSeries,
    initial: &ThermalState,
    steps: usize,
    repeats: usize,
) -> Result<SolverTiming> {
    let mut best: Option<Vec<f64>> = None;
    let mut totals = Vec::with_capacity(repeats);
    let mut name = String::new();
    for _ in 0..repeats {
        let mut solver = make()?;
        name = solver.name().to_string();
        let episode = run_episode(solver.as_mut(), initial.clone(), weather, steps, steps)?;
        let times: Vec<f64> = episode.reports.iter().map(|r| r.wall_time).collect();
        let total: f64 = times.iter().sum();
        totals.push(total);
        if best.as_ref().is_none_or(|b| total < b.iter().sum::<f64>()) {
            best = Some(times);
        }
    }
    let per_step_times = best.expect("repeats >= 1");
    let total_time: f64 = per_step_times.iter().sum();
    Ok(SolverTiming {
        solver_name: name,
        total_time,
        mean_per_step: total_time / steps as f64,
        per_step_times,
        repeat_totals: totals,
    })
}

/// Times both solvers over `steps` timesteps, best of `repeats`. Solver
/// construction is excluded; per-step source assembly is included.
pub fn bench(
    model: Arc<Model>,
    weather: &WeatherSeries,
    steps: usize,
    repeats: usize,
) -> Result<BenchmarkReport> {
    if steps == 0 || repeats == 0 {
        return Err(Error::Precondition(
            "steps and repeats must be at least 1".into(),
        ));
    }
    let initial = model.initial_state(weather)?;
    let m = Arc::clone(&model);
    let iterative = time_solver(
        &move || Ok(Box::new(IterativeSolver::new(Arc::clone(&m))?) as Box<dyn Solver>),
        weather,
        &initial,
        steps,
        repeats,
    )?;
    let m = Arc::clone(&model);
    let tensor = time_solver(
        &move || Ok(Box::new(TensorSolver::new(Arc::clone(&m))?) as Box<dyn Solver>),
        weather,
        &initial,
        steps,
        repeats,
    )?;
    Ok(BenchmarkReport {
        steps,
        repeats,
        n_cells: model.grid.n_cells(),
        speedup: iterative.total_time / tensor.total_time,
        iterative,
        tensor,
        reference: ReferenceTiming {
            iterative_total: REFERENCE_ITERATIVE_TOTAL,
            tensor_total: REFERENCE_TENSOR_TOTAL,
            speedup: REFERENCE_SPEEDUP,
        },
    })
}

impl BenchmarkReport {
    /// Markdown table with the measured figures next to the reference ones.
    pub fn to_markdown(&self) -> String {
        let reference_steps = 10.0;
        format!(
            "| Metric | Iterative | Tensorized | Reference iterative | Reference tensorized |\n\
             |---|---|---|---|---|\n\
             | Total time (s) | {:.4} | {:.4} | {:.2} | {:.2} |\n\
             | Mean per step (s) | {:.5} | {:.5} | {:.2} | {:.2} |\n\
             | Speedup | {:.2}x | | {:.2}x | |\n\
             \n{} steps, {} CVs, best of {} repeats.\n",
            self.iterative.total_time,
            self.tensor.total_time,
            self.reference.iterative_total,
            self.reference.tensor_total,
            self.iterative.mean_per_step,
            self.tensor.mean_per_step,
            self.reference.iterative_total / reference_steps,
            self.reference.tensor_total / reference_steps,
            self.speedup,
            self.reference.speedup,
            self.steps,
            self.n_cells,
            self.repeats,
        )
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Precondition(e.to_string()))
    }
}

/// Writes one CSV row per CV: `row,col,type,T,T_mass`. `T_mass` is empty
/// where there is no mass node.
pub fn write_snapshot_csv<W: Write>(
    writer: W,
    grid: &BuildingGrid,
    state: &ThermalState,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "col", "type", "T", "T_mass"])?;
    for ((r, c), kind) in grid.cv_type.indexed_iter() {
        let t_mass = match &state.mass {
            Some(m) if kind.is_air() => m.t_mass[[r, c]].to_string(),
            _ => String::new(),
        };
        w.write_record([
            r.to_string(),
            c.to_string(),
            kind.name().to_string(),
            state.t[[r, c]].to_string(),
            t_mass,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `step,inner_iterations,max_delta,wall_time`, one row per step.
pub fn write_trace_csv<W: Write>(writer: W, reports: &[StepReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "inner_iterations", "max_delta", "wall_time"])?;
    for (i, r) in reports.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.inner_iterations.to_string(),
            r.max_delta.to_string(),
            r.wall_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub rows: usize,
    pub cols: usize,
    pub n_cells: usize,
    pub z: f64,
    pub zones: usize,
}

/// Record of a `run` invocation.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub solver: String,
    pub building: String,
    pub weather: String,
    pub steps: usize,
    pub start: String,
    pub total_wall_time: f64,
    pub grid: GridSummary,
    pub site: SitePosition,
    pub simulation: SimulationConfig,
}

impl RunManifest {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Precondition(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}
