//! Node-by-node Gauss-Seidel solver.
//!
//! Written as scalar per-cell balances with its own radiation, solar and mass
//! arithmetic. It reads the same model data as [`crate::TensorSolver`] but
//! calls none of its kernels, so agreement between the two is a meaningful
//! check.

use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;

use crate::building::{CvType, Direction};
use crate::error::{Error, Result};
use crate::sim::{Model, Solver, StepForcing, ThermalState};
use crate::tensor::StepReport;

const SIGMA: f64 = 5.670374419e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepOrder {
    /// Row-major, north-west corner first.
    Forward,
    /// Row-major reversed, south-east corner first.
    Reverse,
}

/// One radiating outside face of an envelope CV.
#[derive(Clone, Copy, Debug)]
struct OutsideFace {
    area: f64,
}

/// Per-cell data the sweep needs, gathered once per model.
#[derive(Clone, Debug)]
struct Node {
    row: usize,
    col: usize,
    outside: Vec<OutsideFace>,
    /// Interior exchange surfaces on this cell (matrix indices).
    surfaces: Vec<usize>,
}

#[derive(Debug)]
pub struct IterativeSolver {
    model: Arc<Model>,
    order: SweepOrder,
    nodes: Vec<Node>,
    /// Owning cell of each exchange-matrix surface.
    surface_cells: Vec<(usize, usize)>,
}

impl IterativeSolver {
    pub fn new(model: Arc<Model>) -> Result<Self> {
        Self::with_order(model, SweepOrder::Forward)
    }

    pub fn with_order(model: Arc<Model>, order: SweepOrder) -> Result<Self> {
        let grid = &model.grid;
        let mut nodes = Vec::new();
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let kind = grid.cv_type[[r, c]];
                if kind == CvType::Boundary {
                    continue;
                }
                let mut outside = Vec::new();
                if kind == CvType::ExteriorWall || kind == CvType::Window {
                    let mask = grid.facade[[r, c]];
                    if grid.exposed_faces[[r, c]] > 0 {
                        for d in Direction::ALL {
                            if mask & d.bit() != 0 {
                                let len = if d.is_x_face() {
                                    grid.v[[r, c]]
                                } else {
                                    grid.u[[r, c]]
                                };
                                outside.push(OutsideFace { area: len * grid.z });
                            }
                        }
                    } else if let Some(k) = model.config.envelope_layer_divisor {
                        if mask != 0 {
                            outside.push(OutsideFace {
                                area: grid.delta_x[[r, c]] * grid.z / k,
                            });
                        }
                    }
                }
                let mut surfaces = Vec::new();
                if let Some(m) = model
                    .exchange
                    .as_ref()
                    .filter(|_| model.config.enable_interior_lw)
                {
                    for d in Direction::ALL {
                        if let Some(i) = m.surface_index(r, c, d) {
                            surfaces.push(i);
                        }
                    }
                }
                nodes.push(Node {
                    row: r,
                    col: c,
                    outside,
                    surfaces,
                });
            }
        }
        if order == SweepOrder::Reverse {
            nodes.reverse();
        }
        let surface_cells = model
            .exchange
            .as_ref()
            .map(|m| m.surfaces().iter().map(|s| (s.row, s.col)).collect())
            .unwrap_or_default();
        let solver = IterativeSolver {
            model,
            order,
            nodes,
            surface_cells,
        };
        for n in &solver.nodes {
            let (_, den) = solver.linear_part(n.row, n.col, &Array2::zeros((0, 0)), 0.0, true);
            if !(den > 0.0) {
                return Err(Error::Degenerate {
                    row: n.row,
                    col: n.col,
                    value: den,
                });
            }
        }
        Ok(solver)
    }

    pub fn order(&self) -> SweepOrder {
        self.order
    }

    /// Conduction, convection, mass and storage parts of a node balance
    /// `(numerator without T⁻ and T_mass terms, denominator)`. With
    /// `den_only` the temperatures are not read.
    fn linear_part(
        &self,
        r: usize,
        c: usize,
        t: &Array2<f64>,
        t_inf: f64,
        den_only: bool,
    ) -> (f64, f64) {
        let m = &self.model;
        let grid = &m.grid;
        let mats = &m.materials;
        let (u, v, z) = (grid.u[[r, c]], grid.v[[r, c]], grid.z);
        let mut num = 0.0;
        let mut den = 0.0;
        for d in Direction::ALL {
            let (area, dist) = if d.is_x_face() {
                (v * z, u)
            } else {
                (u * z, v)
            };
            let k = mats.k[d.index()][[r, c]];
            let h = mats.h[d.index()][[r, c]];
            let g = area * k / dist;
            den += g + area * h;
            if !den_only {
                let (dr, dc) = d.offset();
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                let tn = if nr < 0 || nc < 0 || nr as usize >= grid.rows || nc as usize >= grid.cols
                {
                    t_inf
                } else {
                    t[[nr as usize, nc as usize]]
                };
                num += g * tn + area * h * t_inf;
            }
        }
        if m.config.enable_interior_mass && grid.cv_type[[r, c]] == CvType::InteriorAir {
            den += m.config.mass_params.k_mass * u * v / z;
        }
        den += mats.c[[r, c]] * mats.rho[[r, c]] * u * v * z / m.config.dt;
        (num, den)
    }

    /// Exterior long-wave gain of a node at its own temperature `ts` [W].
    fn exterior_lw(&self, node: &Node, ts: f64, forcing: &StepForcing) -> f64 {
        if node.outside.is_empty() || !self.model.config.enable_exterior_lw {
            return 0.0;
        }
        let (r, c) = (node.row, node.col);
        let eps = self.model.materials.emissivity[[r, c]];
        let tilt = self.model.materials.tilt[[r, c]];
        let cos_tilt = if tilt == 90.0 {
            0.0
        } else {
            tilt.to_radians().cos()
        };
        let f_sky = 0.5 * (1.0 + cos_tilt);
        let f_gnd = 0.5 * (1.0 - cos_tilt);
        let beta = f_sky.sqrt();
        let f_air = f_sky * (1.0 - beta);
        let b = &forcing.boundary;
        let t4 = ts * ts * ts * ts;
        let q = eps
            * SIGMA
            * (f_gnd * (b.t_gnd.powi(4) - t4)
                + beta * f_sky * (b.t_sky.powi(4) - t4)
                + f_air * (b.t_air.powi(4) - t4));
        node.outside.iter().map(|f| q * f.area).sum()
    }

    /// Interior long-wave gain of a node with the current field `t` [W].
    fn interior_lw(&self, node: &Node, t: &Array2<f64>) -> f64 {
        let Some(m) = self.model.exchange.as_ref() else {
            return 0.0;
        };
        let coeffs = m.coefficients();
        let z = self.model.grid.z;
        let mut total = 0.0;
        for &i in &node.surfaces {
            let ti = t[self.surface_cells[i]];
            let mut q = 0.0;
            for (j, cell) in self.surface_cells.iter().enumerate() {
                let cij = coeffs[[i, j]];
                if cij != 0.0 {
                    let tj = t[*cell];
                    q += cij * (tj.powi(4) - ti.powi(4));
                }
            }
            total += SIGMA * q * m.surfaces()[i].length * z;
        }
        total
    }
}

/// Solar gains per cell `(absorbed, transmitted to air, deposited on mass)`.
struct SolarSources {
    absorbed: Array2<f64>,
    to_air: Array2<f64>,
    to_mass: Array2<f64>,
}

fn solar_sources(model: &Model, forcing: &StepForcing) -> Result<SolarSources> {
    let grid = &model.grid;
    let mats = &model.materials;
    let dim = grid.dim();
    let mut out = SolarSources {
        absorbed: Array2::zeros(dim),
        to_air: Array2::zeros(dim),
        to_mass: Array2::zeros(dim),
    };
    if !model.config.enable_solar {
        return Ok(out);
    }
    let mut per_zone = vec![0.0; grid.n_zones];
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let kind = grid.cv_type[[r, c]];
            if kind != CvType::ExteriorWall && kind != CvType::Window {
                continue;
            }
            let mask = grid.facade[[r, c]];
            let mut faces: Vec<(Direction, f64)> = Vec::new();
            if grid.exposed_faces[[r, c]] > 0 {
                for d in Direction::ALL {
                    if mask & d.bit() != 0 {
                        let len = if d.is_x_face() {
                            grid.v[[r, c]]
                        } else {
                            grid.u[[r, c]]
                        };
                        faces.push((d, len * grid.z));
                    }
                }
            } else if let Some(k) = model.config.envelope_layer_divisor {
                if let Some(d) = Direction::ALL.into_iter().find(|d| mask & d.bit() != 0) {
                    faces.push((d, grid.delta_x[[r, c]] * grid.z / k));
                }
            }
            for (d, area) in faces {
                let g = forcing.poa.get(d, mats.tilt[[r, c]])?;
                out.absorbed[[r, c]] += mats.absorptivity[[r, c]] * g * area;
                if kind == CvType::Window {
                    if let Some(zone) = grid.window_zone[[r, c]] {
                        per_zone[zone] += mats.transmissivity[[r, c]] * g * area;
                    }
                }
            }
        }
    }
    let target = if model.config.enable_interior_mass {
        &mut out.to_mass
    } else {
        &mut out.to_air
    };
    for (zone, power) in per_zone.into_iter().enumerate() {
        let n = grid.zone.iter().filter(|z| **z == Some(zone)).count();
        for ((r, c), z) in grid.zone.indexed_iter() {
            if *z == Some(zone) {
                target[[r, c]] += power / n as f64;
            }
        }
    }
    Ok(out)
}

impl Solver for IterativeSolver {
    fn name(&self) -> &str {
        match self.order {
            SweepOrder::Forward => "iterative",
            SweepOrder::Reverse => "iterative-reverse",
        }
    }

    fn model(&self) -> &Model {
        &self.model
    }

    fn step(&mut self, state: &mut ThermalState, forcing: &StepForcing) -> Result<StepReport> {
        let started = Instant::now();
        let model = Arc::clone(&self.model);
        let grid = &model.grid;
        let cfg = &model.config;
        if state.t.dim() != grid.dim() {
            return Err(Error::Dimension {
                expected: grid.n_cells(),
                found: state.t.len(),
            });
        }
        let t_inf = forcing.t_inf();
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                if grid.cv_type[[r, c]] == CvType::Boundary {
                    state.t[[r, c]] = t_inf;
                }
            }
        }
        let t_prev = state.t.clone();
        let t_mass_prev = match (&state.mass, cfg.enable_interior_mass) {
            (Some(m), true) => Some(m.t_mass.clone()),
            (None, true) => {
                return Err(Error::Precondition(
                    "interior mass is enabled but the state carries no mass field".into(),
                ))
            }
            _ => None,
        };
        let solar = solar_sources(&model, forcing)?;

        let mut sweeps = 0;
        let mut max_delta = f64::INFINITY;
        let mut converged = false;
        while sweeps < cfg.max_inner_iterations {
            sweeps += 1;
            let mut delta = 0.0_f64;
            for node in &self.nodes {
                let (r, c) = (node.row, node.col);
                let (u, v, z) = (grid.u[[r, c]], grid.v[[r, c]], grid.z);
                let (mut num, den) = self.linear_part(r, c, &state.t, t_inf, false);
                num += forcing.heat_source[[r, c]];
                num += model.materials.c[[r, c]] * model.materials.rho[[r, c]] * u * v * z / cfg.dt
                    * t_prev[[r, c]];
                if let Some(tm) = &t_mass_prev {
                    if grid.cv_type[[r, c]] == CvType::InteriorAir {
                        num += cfg.mass_params.k_mass * u * v / z * tm[[r, c]];
                    }
                }
                num += solar.absorbed[[r, c]] + solar.to_air[[r, c]];
                num += self.exterior_lw(node, state.t[[r, c]], forcing);
                num += self.interior_lw(node, &state.t);
                let next = num / den;
                let change = (next - state.t[[r, c]]).abs();
                delta = if change.is_nan() {
                    f64::INFINITY
                } else {
                    delta.max(change)
                };
                state.t[[r, c]] = next;
            }
            max_delta = delta;
            if max_delta < cfg.convergence_epsilon {
                converged = true;
                break;
            }
            if !max_delta.is_finite() {
                break;
            }
        }

        if let (Some(mass), Some(_)) = (state.mass.as_mut(), &t_mass_prev) {
            let p = &cfg.mass_params;
            let z = grid.z;
            let t0 = p.rho_mass * p.c_mass * z * z / (p.k_mass * cfg.dt);
            for r in 0..grid.rows {
                for c in 0..grid.cols {
                    if grid.cv_type[[r, c]] == CvType::InteriorAir {
                        let q = solar.to_mass[[r, c]] / (grid.u[[r, c]] * grid.v[[r, c]]);
                        let tm = mass.t_mass[[r, c]];
                        mass.t_mass[[r, c]] =
                            (state.t[[r, c]] + q * z / p.k_mass + t0 * tm) / (1.0 + t0);
                    }
                }
            }
        }
        state.t_prev_step = state.t.clone();
        state.step_index += 1;
        state.sim_clock = forcing.time;

        Ok(StepReport {
            inner_iterations: sweeps,
            max_delta,
            converged,
            wall_time: started.elapsed().as_secs_f64(),
        })
    }
}

/// Energy balance of one completed step, all terms in W.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyAudit {
    /// `Σ C·ρ·U·V·z·(T − T⁻)/Δt` over active CVs.
    pub stored: f64,
    /// Net gain from outside the active CVs: convection, conduction into
    /// held or off-grid neighbors, radiation, solar, mass coupling and `Q_x`.
    pub sources: f64,
    /// Sum of the magnitudes of every term, used as the relative scale.
    pub gross: f64,
}

impl EnergyAudit {
    pub fn residual(&self) -> f64 {
        self.stored - self.sources
    }

    pub fn relative_error(&self) -> f64 {
        if self.gross == 0.0 {
            self.residual().abs()
        } else {
            self.residual().abs() / self.gross
        }
    }
}

/// Audits the step that took `before` to `after` under `forcing`. Radiation
/// is evaluated at the converged field; conduction between two active CVs
/// is internal and cancels, so it does not appear.
pub fn energy_audit(
    solver: &IterativeSolver,
    before: &ThermalState,
    after: &ThermalState,
    forcing: &StepForcing,
) -> Result<EnergyAudit> {
    let model = &solver.model;
    let grid = &model.grid;
    let mats = &model.materials;
    let cfg = &model.config;
    let t_inf = forcing.t_inf();
    let t = &after.t;
    let solar = solar_sources(model, forcing)?;
    let mut stored = 0.0;
    let mut sources = 0.0;
    let mut gross = 0.0;
    let mut add = |x: f64| {
        sources += x;
        gross += x.abs();
    };
    for node in &solver.nodes {
        let (r, c) = (node.row, node.col);
        let (u, v, z) = (grid.u[[r, c]], grid.v[[r, c]], grid.z);
        let s = mats.c[[r, c]] * mats.rho[[r, c]] * u * v * z / cfg.dt;
        stored += s * (t[[r, c]] - before.t[[r, c]]);
        for d in Direction::ALL {
            let (area, dist) = if d.is_x_face() {
                (v * z, u)
            } else {
                (u * z, v)
            };
            let k = mats.k[d.index()][[r, c]];
            let h = mats.h[d.index()][[r, c]];
            add(area * h * (t_inf - t[[r, c]]));
            match grid.neighbor(r, c, d) {
                None => add(area * k / dist * (t_inf - t[[r, c]])),
                Some(n) if grid.cv_type[n] == CvType::Boundary => {
                    add(area * k / dist * (t[n] - t[[r, c]]))
                }
                Some(_) => {}
            }
        }
        add(forcing.heat_source[[r, c]]);
        add(solar.absorbed[[r, c]]);
        add(solar.to_air[[r, c]]);
        add(solver.exterior_lw(node, t[[r, c]], forcing));
        add(solver.interior_lw(node, t));
        if let Some(m) = before.mass.as_ref().filter(|_| cfg.enable_interior_mass) {
            if grid.cv_type[[r, c]] == CvType::InteriorAir {
                add(cfg.mass_params.k_mass * u * v / z * (m.t_mass[[r, c]] - t[[r, c]]));
            }
        }
    }
    Ok(EnergyAudit {
        stored,
        sources,
        gross: gross + stored.abs(),
    })
}
