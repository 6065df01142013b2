//! Whole-grid fixed-point solver.
//!
//! Each inner iteration evaluates, element-wise over the grid,
//!
//! ```text
//!        Q_x + Σ_d A_d (K_d/L_d · T_d + H_d · T_inf) + G_m T_mass
//!            + Q_lwx + Q_lwr + Q_sol,α + Q_sol,τ + S · T⁻
//!   T = -------------------------------------------------------
//!        Σ_d A_d (K_d/L_d + H_d) + G_m + S
//! ```
//!
//! with `A_d` the face area (`V·z` for west/east, `U·z` for north/south),
//! `L_d` the center distance, `G_m = K_mass·U·V/z` and `S = C·ρ·U·V·z/Δt`.
//! Radiation is re-evaluated from the latest iterate each time (Picard).

use std::sync::Arc;
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2, Zip};

use crate::building::Direction;
use crate::error::{Error, Result};
use crate::mass::deposit_flux_density;
use crate::radiation::{assemble_solar_tensors, ExteriorLwKernel, InteriorLwKernel};
use crate::sim::{Model, Solver, StepForcing, ThermalState};

/// Neighbor temperature fields, padded with `T_inf` outside the grid.
/// `t1..t4` are the west, north, east and south neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedFields {
    pub t1: Array2<f64>,
    pub t2: Array2<f64>,
    pub t3: Array2<f64>,
    pub t4: Array2<f64>,
}

impl ShiftedFields {
    pub fn get(&self, dir: Direction) -> &Array2<f64> {
        match dir {
            Direction::West => &self.t1,
            Direction::North => &self.t2,
            Direction::East => &self.t3,
            Direction::South => &self.t4,
        }
    }
}

fn fill_padded(padded: &mut Array2<f64>, t: &Array2<f64>) {
    let (r, c) = t.dim();
    padded.slice_mut(s![1..r + 1, 1..c + 1]).assign(t);
}

fn neighbor_view(padded: &Array2<f64>, dir: Direction) -> ArrayView2<'_, f64> {
    let (pr, pc) = padded.dim();
    let (r, c) = (pr - 2, pc - 2);
    let (dr, dc) = dir.offset();
    let r0 = (1 + dr) as usize;
    let c0 = (1 + dc) as usize;
    padded.slice(s![r0..r0 + r, c0..c0 + c])
}

pub fn shift_fields(t: &Array2<f64>, t_inf: f64) -> ShiftedFields {
    let (r, c) = t.dim();
    let mut padded = Array2::from_elem((r + 2, c + 2), t_inf);
    fill_padded(&mut padded, t);
    let get = |d| neighbor_view(&padded, d).to_owned();
    ShiftedFields {
        t1: get(Direction::West),
        t2: get(Direction::North),
        t3: get(Direction::East),
        t4: get(Direction::South),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub inner_iterations: usize,
    /// Largest |ΔT| of the last inner iteration [K].
    pub max_delta: f64,
    pub converged: bool,
    /// Seconds spent in the step.
    pub wall_time: f64,
}

/// Conductances of the update that do not change over an episode [W/K].
#[derive(Clone, Debug)]
struct Coefficients {
    conduction: [Array2<f64>; 4],
    convection: Array2<f64>,
    mass: Array2<f64>,
    storage: Array2<f64>,
    denominator: Array2<f64>,
    active: Array2<bool>,
}

impl Coefficients {
    fn new(model: &Model) -> Result<Self> {
        let grid = &model.grid;
        let mats = &model.materials;
        let cfg = &model.config;
        let z = grid.z;
        let dim = grid.dim();
        let face_area = |d: Direction| {
            if d.is_x_face() {
                &grid.v * z
            } else {
                &grid.u * z
            }
        };
        let dist = |d: Direction| if d.is_x_face() { &grid.u } else { &grid.v };

        let conduction = Direction::ALL.map(|d| face_area(d) * mats.k_dir(d) / dist(d));
        let mut convection = Array2::zeros(dim);
        for d in Direction::ALL {
            convection += &(face_area(d) * mats.h_dir(d));
        }
        let mass = if cfg.enable_interior_mass {
            let k = cfg.mass_params.k_mass;
            let air = grid.cv_type.mapv(|t| if t.is_air() { k } else { 0.0 });
            air * &grid.u * &grid.v / z
        } else {
            Array2::zeros(dim)
        };
        let storage = &mats.c * &mats.rho * &grid.u * &grid.v * z / cfg.dt;
        let active = grid.cv_type.mapv(|t| !t.is_boundary());

        let mut denominator = &convection + &mass + &storage;
        for a in &conduction {
            denominator += a;
        }
        for ((r, c), &value) in denominator.indexed_iter() {
            if active[[r, c]] && !(value > 0.0) {
                return Err(Error::Degenerate {
                    row: r,
                    col: c,
                    value,
                });
            }
        }
        Ok(Coefficients {
            conduction,
            convection,
            mass,
            storage,
            denominator,
            active,
        })
    }
}

/// Vectorized solver for the full energy balance.
#[derive(Debug)]
pub struct TensorSolver {
    model: Arc<Model>,
    coef: Coefficients,
    interior: Option<InteriorLwKernel>,
    padded: Array2<f64>,
    fixed: Array2<f64>,
    num: Array2<f64>,
    radiation: Array2<f64>,
}

impl TensorSolver {
    /// Precomputes the static conductances; fails if any active CV has a
    /// non-positive denominator.
    pub fn new(model: Arc<Model>) -> Result<Self> {
        let coef = Coefficients::new(&model)?;
        let interior = model
            .exchange
            .as_ref()
            .filter(|_| model.config.enable_interior_lw)
            .map(|m| InteriorLwKernel::new(m, model.grid.z));
        let (r, c) = model.grid.dim();
        Ok(TensorSolver {
            interior,
            padded: Array2::zeros((r + 2, c + 2)),
            fixed: Array2::zeros((r, c)),
            num: Array2::zeros((r, c)),
            radiation: Array2::zeros((r, c)),
            coef,
            model,
        })
    }

    /// Denominator of the update per CV [W/K].
    pub fn denominator(&self) -> &Array2<f64> {
        &self.coef.denominator
    }
}

impl Solver for TensorSolver {
    fn name(&self) -> &str {
        "tensor"
    }

    fn model(&self) -> &Model {
        &self.model
    }

    fn step(&mut self, state: &mut ThermalState, forcing: &StepForcing) -> Result<StepReport> {
        let started = Instant::now();
        let model = Arc::clone(&self.model);
        let grid = &model.grid;
        let mats = &model.materials;
        let cfg = &model.config;
        let dim = grid.dim();
        if state.t.dim() != dim || forcing.heat_source.dim() != dim {
            return Err(Error::Dimension {
                expected: grid.n_cells(),
                found: state.t.len().min(forcing.heat_source.len()),
            });
        }
        if cfg.enable_interior_mass && state.mass.is_none() {
            return Err(Error::Precondition(
                "interior mass is enabled but the state carries no mass field".into(),
            ));
        }
        let t_inf = forcing.t_inf();
        let coef = &self.coef;

        Zip::from(&mut state.t).and(&coef.active).for_each(|t, &a| {
            if !a {
                *t = t_inf
            }
        });
        let t_prev = state.t.clone();

        let solar = if cfg.enable_solar {
            Some(assemble_solar_tensors(
                grid,
                mats,
                &forcing.poa,
                cfg.enable_interior_mass,
                cfg.envelope_layer_divisor,
            )?)
        } else {
            None
        };

        // sources that stay fixed over the inner loop
        let fixed = &mut self.fixed;
        Zip::from(&mut *fixed)
            .and(&forcing.heat_source)
            .and(&coef.convection)
            .and(&coef.storage)
            .and(&t_prev)
            .for_each(|f, &q, &h, &s, &tp| *f = q + h * t_inf + s * tp);
        if cfg.enable_interior_mass {
            let mass = state.mass.as_ref().expect("checked above");
            Zip::from(&mut *fixed)
                .and(&coef.mass)
                .and(&mass.t_mass)
                .for_each(|f, &g, &tm| *f += g * tm);
        }
        if let Some(sol) = &solar {
            Zip::from(&mut *fixed)
                .and(&sol.q_sol_alpha)
                .and(&sol.q_sol_tau)
                .for_each(|f, &a, &t| *f += a + t);
        }

        let exterior = cfg.enable_exterior_lw.then(|| {
            ExteriorLwKernel::new(grid, mats, cfg.envelope_layer_divisor, &forcing.boundary)
        });

        self.padded.fill(t_inf);
        let mut iterations = 0;
        let mut max_delta = f64::INFINITY;
        let mut converged = false;
        while iterations < cfg.max_inner_iterations {
            iterations += 1;
            fill_padded(&mut self.padded, &state.t);
            self.num.assign(&self.fixed);
            for d in Direction::ALL {
                Zip::from(&mut self.num)
                    .and(&coef.conduction[d.index()])
                    .and(neighbor_view(&self.padded, d))
                    .for_each(|n, &a, &td| *n += a * td);
            }
            if let Some(k) = &exterior {
                k.apply(&state.t, &mut self.radiation);
                self.num += &self.radiation;
            }
            if let Some(k) = &mut self.interior {
                k.apply(&state.t, &mut self.radiation);
                self.num += &self.radiation;
            }

            let mut delta = 0.0_f64;
            let mut finite = true;
            Zip::from(&mut state.t)
                .and(&self.num)
                .and(&coef.denominator)
                .and(&coef.active)
                .for_each(|t, &n, &d, &a| {
                    if a {
                        let next = n / d;
                        finite &= next.is_finite();
                        delta = delta.max((next - *t).abs());
                        *t = next;
                    }
                });
            max_delta = if finite { delta } else { f64::INFINITY };
            if max_delta < cfg.convergence_epsilon {
                converged = true;
                break;
            }
            if !finite {
                break;
            }
        }

        if let Some(mass) = state.mass.as_mut().filter(|_| cfg.enable_interior_mass) {
            let q = match &solar {
                Some(sol) => deposit_flux_density(grid, &sol.mass_deposit),
                None => Array2::zeros(dim),
            };
            mass.update(&state.t, &q, grid.z);
        }
        state.t_prev_step.assign(&state.t);
        state.step_index += 1;
        state.sim_clock = forcing.time;

        Ok(StepReport {
            inner_iterations: iterations,
            max_delta,
            converged,
            wall_time: started.elapsed().as_secs_f64(),
        })
    }
}
