use ndarray::Array2;

use super::envelope_faces;
use crate::building::{BuildingGrid, CvType, MaterialField};
use crate::error::Result;
use crate::weather::PoaIrradiance;

/// Solar source tensors for one timestep [W per CV].
#[derive(Clone, Debug, PartialEq)]
pub struct SolarTensors {
    /// Absorbed at envelope faces.
    pub q_sol_alpha: Array2<f64>,
    /// Transmitted power entering the air balance; zero when mass is enabled.
    pub q_sol_tau: Array2<f64>,
    /// Transmitted power routed to mass nodes; zero when mass is disabled.
    pub mass_deposit: Array2<f64>,
    /// Transmitted power per zone, summed over its windows in row-major face
    /// order.
    pub zone_transmitted: Vec<f64>,
}

impl SolarTensors {
    /// Total transmitted power, summed zone by zone.
    pub fn transmitted_total(&self) -> f64 {
        self.zone_transmitted.iter().sum()
    }
}

/// Assembles absorbed and transmitted solar tensors. Transmitted power of
/// each window is spread uniformly over the air CVs of the zone behind it,
/// either into the air balance or onto the mass nodes.
pub fn assemble_solar_tensors(
    grid: &BuildingGrid,
    mats: &MaterialField,
    poa: &PoaIrradiance,
    mass_enabled: bool,
    layer_divisor: Option<f64>,
) -> Result<SolarTensors> {
    let dim = grid.dim();
    let mut q_sol_alpha = Array2::zeros(dim);
    let mut zone_transmitted = vec![0.0; grid.n_zones];

    for face in envelope_faces(grid, layer_divisor) {
        let cell = [face.row, face.col];
        let g = poa.get(face.facade, mats.tilt[cell])?;
        let area = face.area(grid.z);
        q_sol_alpha[cell] += mats.absorptivity[cell] * g * area;
        let tau = mats.transmissivity[cell];
        if grid.cv_type[cell] == CvType::Window && tau > 0.0 {
            let zone = grid.window_zone[cell].expect("validated windows border a zone");
            zone_transmitted[zone] += tau * g * area;
        }
    }

    let mut deposit = Array2::zeros(dim);
    for (zone, &power) in zone_transmitted.iter().enumerate() {
        if power == 0.0 {
            continue;
        }
        let cells = grid.zone_cells(zone);
        let share = power / cells.len() as f64;
        let mut given = 0.0;
        let (last, rest) = cells.split_last().expect("zones are non-empty");
        for &cell in rest {
            deposit[cell] = share;
            given += share;
        }
        // the remainder lands on the last CV so the zone total is exact
        deposit[*last] = power - given;
    }

    let (q_sol_tau, mass_deposit) = if mass_enabled {
        (Array2::zeros(dim), deposit)
    } else {
        (deposit, Array2::zeros(dim))
    };
    Ok(SolarTensors {
        q_sol_alpha,
        q_sol_tau,
        mass_deposit,
        zone_transmitted,
    })
}
