//! Long-wave and solar flux tensors.
//!
//! All tensors are in watts per CV. A flux density `q` [W/m²] acting on an
//! envelope CV is scaled by the exposed face area: each exterior-facing face
//! contributes `length·z·q`, so a square corner CV receives `2·δx·z·q` and an
//! edge CV `δx·z·q`. Envelope CVs without an exposed face only receive flux
//! when `envelope_layer_divisor` is configured, scaled by `δx·z/k`.

mod exchange;
mod solar;

use ndarray::Array2;

use crate::building::{BuildingGrid, Direction, MaterialField};
use crate::error::{Error, Result};

pub use exchange::{
    apply_interior_lw, build_exchange_matrix_2d, crossed_strings_view_factor, InteriorLwKernel,
    InteriorSurface, RadiationExchangeMatrix,
};
pub use solar::{assemble_solar_tensors, SolarTensors};

/// Stefan-Boltzmann constant [W/(m²·K⁴)], CODATA 2018.
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Tilt-dependent exterior view factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewFactorSet {
    pub f_gnd: f64,
    pub f_sky: f64,
    /// Sky correction `sqrt(F_sky)`.
    pub beta: f64,
    pub f_air: f64,
    pub tilt: f64,
}

impl ViewFactorSet {
    /// `F_gnd + β·F_sky + F_air`, which is 1 for every tilt.
    pub fn closure(&self) -> f64 {
        self.f_gnd + self.beta * self.f_sky + self.f_air
    }
}

pub fn view_factors(tilt_deg: f64) -> ViewFactorSet {
    let cos_tilt = if tilt_deg == 90.0 {
        // cos(pi/2) rounds to 6e-17; vertical walls see ground and sky equally
        0.0
    } else {
        tilt_deg.to_radians().cos()
    };
    let f_gnd = 0.5 * (1.0 - cos_tilt);
    let f_sky = 0.5 * (1.0 + cos_tilt);
    let beta = f_sky.sqrt();
    ViewFactorSet {
        f_gnd,
        f_sky,
        beta,
        f_air: f_sky * (1.0 - beta),
        tilt: tilt_deg,
    }
}

/// Temperatures an exterior surface exchanges long-wave radiation with [K].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryTemps {
    pub t_air: f64,
    pub t_gnd: f64,
    pub t_sky: f64,
}

/// Net exterior long-wave flux density [W/m²] into a surface.
pub fn exterior_lw_flux(
    eps: f64,
    vf: &ViewFactorSet,
    t_surf: f64,
    t_gnd: f64,
    t_sky: f64,
    t_air: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Precondition(format!(
            "emissivity {eps} outside [0, 1]"
        )));
    }
    if [t_surf, t_gnd, t_sky, t_air].iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition(
            "long-wave temperatures must be positive kelvin".into(),
        ));
    }
    let ts4 = t_surf.powi(4);
    Ok(eps
        * STEFAN_BOLTZMANN
        * (vf.f_gnd * (t_gnd.powi(4) - ts4)
            + vf.beta * vf.f_sky * (t_sky.powi(4) - ts4)
            + vf.f_air * (t_air.powi(4) - ts4)))
}

/// One radiating face of an envelope CV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeFace {
    pub row: usize,
    pub col: usize,
    pub facade: Direction,
    pub length: f64,
    /// 1 for exposed faces, `1/k` for buried envelope layers.
    pub weight: f64,
}

impl EnvelopeFace {
    /// Face area [m²] the flux density acts on.
    pub fn area(&self, z: f64) -> f64 {
        self.length * z * self.weight
    }
}

/// Radiating envelope faces in row-major order, faces within a CV in
/// [`Direction::ALL`] order.
pub fn envelope_faces(grid: &BuildingGrid, layer_divisor: Option<f64>) -> Vec<EnvelopeFace> {
    let mut faces = Vec::new();
    for ((r, c), kind) in grid.cv_type.indexed_iter() {
        if !kind.is_envelope() {
            continue;
        }
        if grid.exposed_faces[[r, c]] > 0 {
            for d in Direction::in_mask(grid.facade[[r, c]]) {
                faces.push(EnvelopeFace {
                    row: r,
                    col: c,
                    facade: d,
                    length: grid.face_length(r, c, d),
                    weight: 1.0,
                });
            }
        } else if let Some(k) = layer_divisor {
            if let Some(d) = Direction::in_mask(grid.facade[[r, c]]).next() {
                faces.push(EnvelopeFace {
                    row: r,
                    col: c,
                    facade: d,
                    length: grid.delta_x[[r, c]],
                    weight: 1.0 / k,
                });
            }
        }
    }
    faces
}

/// Exterior long-wave operator for fixed boundary temperatures. Applying it
/// to a temperature field yields `Q_lwr`.
#[derive(Clone, Debug)]
pub struct ExteriorLwKernel {
    cells: Vec<(usize, usize)>,
    /// `ε·σ·Σ area` per CV.
    gain: Vec<f64>,
    /// `F_gnd·T_gnd⁴ + β·F_sky·T_sky⁴ + F_air·T_air⁴`.
    source: Vec<f64>,
    /// `F_gnd + β·F_sky + F_air`.
    sink: Vec<f64>,
}

impl ExteriorLwKernel {
    pub fn new(
        grid: &BuildingGrid,
        mats: &MaterialField,
        layer_divisor: Option<f64>,
        boundary: &BoundaryTemps,
    ) -> Self {
        let mut kernel = ExteriorLwKernel {
            cells: Vec::new(),
            gain: Vec::new(),
            source: Vec::new(),
            sink: Vec::new(),
        };
        let (g4, s4, a4) = (
            boundary.t_gnd.powi(4),
            boundary.t_sky.powi(4),
            boundary.t_air.powi(4),
        );
        for face in envelope_faces(grid, layer_divisor) {
            let cell = (face.row, face.col);
            let area = face.area(grid.z);
            if kernel.cells.last() == Some(&cell) {
                *kernel.gain.last_mut().unwrap() += mats.emissivity[cell] * STEFAN_BOLTZMANN * area;
                continue;
            }
            let vf = view_factors(mats.tilt[cell]);
            kernel.cells.push(cell);
            kernel
                .gain
                .push(mats.emissivity[cell] * STEFAN_BOLTZMANN * area);
            kernel
                .source
                .push(vf.f_gnd * g4 + vf.beta * vf.f_sky * s4 + vf.f_air * a4);
            kernel.sink.push(vf.closure());
        }
        kernel
    }

    /// Writes `Q_lwr` for temperatures `t` into `out`, zero off the envelope.
    pub fn apply(&self, t: &Array2<f64>, out: &mut Array2<f64>) {
        out.fill(0.0);
        for (i, &cell) in self.cells.iter().enumerate() {
            let t4 = t[cell].powi(4);
            out[cell] = self.gain[i] * (self.source[i] - self.sink[i] * t4);
        }
    }
}

/// Exterior long-wave tensor `Q_lwr` [W] with surface temperatures taken
/// from `t`.
pub fn assemble_exterior_lw_tensor(
    grid: &BuildingGrid,
    mats: &MaterialField,
    layer_divisor: Option<f64>,
    t: &Array2<f64>,
    boundary: &BoundaryTemps,
) -> Array2<f64> {
    let mut out = Array2::zeros(grid.dim());
    ExteriorLwKernel::new(grid, mats, layer_divisor, boundary).apply(t, &mut out);
    out
}

/// The four radiative source tensors of the energy balance [W per CV].
#[derive(Clone, Debug, PartialEq)]
pub struct FluxTensors {
    pub q_lwr: Array2<f64>,
    pub q_lwx: Array2<f64>,
    pub q_sol_alpha: Array2<f64>,
    pub q_sol_tau: Array2<f64>,
}

impl FluxTensors {
    pub fn zeros(dim: (usize, usize)) -> Self {
        FluxTensors {
            q_lwr: Array2::zeros(dim),
            q_lwx: Array2::zeros(dim),
            q_sol_alpha: Array2::zeros(dim),
            q_sol_tau: Array2::zeros(dim),
        }
    }

    pub fn sum(&self) -> Array2<f64> {
        &self.q_lwr + &self.q_lwx + &self.q_sol_alpha + &self.q_sol_tau
    }
}
