//! Model bundle, thermal state, per-step forcing and the episode loop shared
//! by both solvers.

use std::time::Instant;

use chrono::{DateTime, Duration, Utc};
use log::warn;
use ndarray::Array2;

use crate::building::{Building, BuildingGrid, MaterialField, SimulationConfig};
use crate::error::{Error, Result};
use crate::mass::{init_mass, MassState};
use crate::radiation::{
    assemble_exterior_lw_tensor, assemble_solar_tensors, build_exchange_matrix_2d, BoundaryTemps,
    FluxTensors, InteriorLwKernel, RadiationExchangeMatrix,
};
use crate::tensor::StepReport;
use crate::weather::{
    required_orientations, sky_temperature, solar_position, PoaIrradiance, SitePosition,
    SolarGeometry, WeatherRecord, WeatherSeries,
};

/// Everything a solver needs that stays fixed over an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub grid: BuildingGrid,
    pub materials: MaterialField,
    pub config: SimulationConfig,
    pub site: SitePosition,
    /// Heat source per CV [W].
    pub heat_source: Array2<f64>,
    /// Interior exchange matrix, present when interior long-wave is enabled.
    pub exchange: Option<RadiationExchangeMatrix>,
}

impl Model {
    /// Builds the model, loading the configured exchange matrix file or
    /// computing one with the crossed-strings builder.
    pub fn from_building(building: &Building) -> Result<Self> {
        let exchange = if building.config.enable_interior_lw {
            Some(match building.exchange_matrix_path() {
                Some(path) => {
                    let file = std::fs::File::open(&path)?;
                    RadiationExchangeMatrix::read_csv(file)?
                }
                None => build_exchange_matrix_2d(&building.grid, &building.materials)?,
            })
        } else {
            None
        };
        Self::from_parts(
            building.grid.clone(),
            building.materials.clone(),
            building.config.clone(),
            building.site,
            building.heat_source.clone(),
            exchange,
        )
    }

    pub fn from_parts(
        grid: BuildingGrid,
        materials: MaterialField,
        config: SimulationConfig,
        site: SitePosition,
        heat_source: Array2<f64>,
        exchange: Option<RadiationExchangeMatrix>,
    ) -> Result<Self> {
        materials.validate(&grid)?;
        config.validate()?;
        site.validate()?;
        if heat_source.dim() != grid.dim() {
            return Err(Error::Dimension {
                expected: grid.n_cells(),
                found: heat_source.len(),
            });
        }
        let exchange = match (config.enable_interior_lw, exchange) {
            (true, None) => Some(build_exchange_matrix_2d(&grid, &materials)?),
            (true, Some(m)) => {
                m.check_grid(&grid)?;
                Some(m)
            }
            (false, _) => None,
        };
        Ok(Model {
            grid,
            materials,
            config,
            site,
            heat_source,
            exchange,
        })
    }

    pub fn dt(&self) -> Duration {
        Duration::nanoseconds((self.config.dt * 1e9).round() as i64)
    }

    pub fn start_time(&self, weather: &WeatherSeries) -> DateTime<Utc> {
        self.config.start.unwrap_or_else(|| weather.first_time())
    }

    /// State with every CV (and mass node) at `temperature`.
    pub fn uniform_state(&self, temperature: f64, clock: DateTime<Utc>) -> Result<ThermalState> {
        let t = Array2::from_elem(self.grid.dim(), temperature);
        let mass = if self.config.enable_interior_mass {
            Some(init_mass(&self.grid, &self.config, &t)?)
        } else {
            None
        };
        Ok(ThermalState {
            t_prev_step: t.clone(),
            t,
            mass,
            step_index: 0,
            sim_clock: clock,
        })
    }

    pub fn initial_state(&self, weather: &WeatherSeries) -> Result<ThermalState> {
        self.uniform_state(self.config.initial_temperature, self.start_time(weather))
    }

    /// Boundary conditions for the step ending at `time`.
    pub fn forcing(&self, weather: &WeatherSeries, time: DateTime<Utc>) -> Result<StepForcing> {
        let record = weather.at(time)?.clone();
        Ok(self.forcing_from_record(record, time))
    }

    pub fn forcing_from_record(&self, record: WeatherRecord, time: DateTime<Utc>) -> StepForcing {
        let geometry = solar_position(&self.site, time);
        let orientations = required_orientations(&self.grid, &self.materials);
        let poa = PoaIrradiance::compute(&record, &geometry, self.site.albedo, &orientations);
        StepForcing {
            time,
            boundary: BoundaryTemps {
                t_air: record.t_air,
                t_gnd: record.t_gnd,
                t_sky: sky_temperature(&record),
            },
            record,
            geometry,
            poa,
            heat_source: self.heat_source.clone(),
        }
    }
}

impl Model {
    /// The four radiative source tensors for temperatures `t`, each zero when
    /// its feature is disabled. Transmitted solar routed to mass nodes does
    /// not appear in `q_sol_tau`.
    pub fn flux_tensors(&self, t: &Array2<f64>, forcing: &StepForcing) -> Result<FluxTensors> {
        let mut f = FluxTensors::zeros(self.grid.dim());
        let divisor = self.config.envelope_layer_divisor;
        if self.config.enable_exterior_lw {
            f.q_lwr = assemble_exterior_lw_tensor(
                &self.grid,
                &self.materials,
                divisor,
                t,
                &forcing.boundary,
            );
        }
        if let Some(m) = self
            .exchange
            .as_ref()
            .filter(|_| self.config.enable_interior_lw)
        {
            InteriorLwKernel::new(m, self.grid.z).apply(t, &mut f.q_lwx);
        }
        if self.config.enable_solar {
            let s = assemble_solar_tensors(
                &self.grid,
                &self.materials,
                &forcing.poa,
                self.config.enable_interior_mass,
                divisor,
            )?;
            f.q_sol_alpha = s.q_sol_alpha;
            f.q_sol_tau = s.q_sol_tau;
        }
        Ok(f)
    }
}

/// Temperature fields carried between timesteps.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalState {
    pub t: Array2<f64>,
    /// Converged field of the previous timestep.
    pub t_prev_step: Array2<f64>,
    pub mass: Option<MassState>,
    pub step_index: usize,
    pub sim_clock: DateTime<Utc>,
}

/// Weather-derived inputs for one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct StepForcing {
    /// End of the step; the weather record and sun position are taken here.
    pub time: DateTime<Utc>,
    pub record: WeatherRecord,
    pub boundary: BoundaryTemps,
    pub geometry: SolarGeometry,
    pub poa: PoaIrradiance,
    pub heat_source: Array2<f64>,
}

impl StepForcing {
    /// Ambient temperature used for convection and grid padding.
    pub fn t_inf(&self) -> f64 {
        self.boundary.t_air
    }
}

/// A timestep integrator over a [`Model`].
pub trait Solver {
    fn name(&self) -> &str;
    fn model(&self) -> &Model;
    /// Advances `state` by one timestep. A report with `converged == false`
    /// means the inner loop hit `max_inner_iterations`.
    fn step(&mut self, state: &mut ThermalState, forcing: &StepForcing) -> Result<StepReport>;
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub snapshots: Vec<ThermalState>,
    pub reports: Vec<StepReport>,
    pub final_state: ThermalState,
}

impl Episode {
    pub fn total_wall_time(&self) -> f64 {
        self.reports.iter().map(|r| r.wall_time).sum()
    }
}

/// Runs `n_steps` timesteps, keeping a snapshot every `snapshot_every` steps.
/// A step that fails to converge aborts the episode.
pub fn run_episode(
    solver: &mut dyn Solver,
    initial: ThermalState,
    weather: &WeatherSeries,
    n_steps: usize,
    snapshot_every: usize,
) -> Result<Episode> {
    if n_steps == 0 {
        return Err(Error::Precondition("n_steps must be at least 1".into()));
    }
    let every = snapshot_every.max(1);
    let mut state = initial;
    let mut snapshots = Vec::new();
    let mut reports = Vec::with_capacity(n_steps);
    let dt = solver.model().dt();
    for _ in 0..n_steps {
        let step = state.step_index + 1;
        let wrap = |e: Error| Error::Step {
            step,
            source: Box::new(e),
        };
        let forcing = solver
            .model()
            .forcing(weather, state.sim_clock + dt)
            .map_err(wrap)?;
        let started = Instant::now();
        let mut report = solver.step(&mut state, &forcing).map_err(wrap)?;
        report.wall_time = started.elapsed().as_secs_f64();
        if !report.converged {
            warn!(
                "{}: step {step} did not converge (max delta {:.3e} K)",
                solver.name(),
                report.max_delta
            );
            return Err(Error::NotConverged {
                step,
                iterations: report.inner_iterations,
                max_delta: report.max_delta,
            });
        }
        reports.push(report);
        if state.step_index % every == 0 {
            snapshots.push(state.clone());
        }
    }
    Ok(Episode {
        snapshots,
        reports,
        final_state: state,
    })
}
