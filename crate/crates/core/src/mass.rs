//! Interior thermal mass: one lumped node under every interior-air CV.
//!
//! The node is coupled to its air CV through a conductive layer of
//! conductivity `k_mass` and thickness `z`, absorbs the transmitted solar
//! flux, and is advanced explicitly once the air field has converged:
//!
//! ```text
//! T_mass = (T + q·z/k_mass + t0·T_mass_prev) / (1 + t0)
//! t0     = rho_mass·c_mass·z² / (k_mass·dt)
//! ```

use ndarray::{Array2, Zip};

use crate::building::{BuildingGrid, SimulationConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MassState {
    /// Mass temperature [K]; meaningful on interior-air CVs only.
    pub t_mass: Array2<f64>,
    /// Mass temporal parameter, zero off air CVs.
    pub t0: Array2<f64>,
    /// Air-to-mass coupling conductivity [W/(m·K)], zero off air CVs.
    pub k_mass: Array2<f64>,
}

pub fn mass_time_parameter(rho_mass: f64, c_mass: f64, z: f64, k_mass: f64, dt: f64) -> f64 {
    rho_mass * c_mass * z * z / (k_mass * dt)
}

/// Scalar mass update.
pub fn mass_update_scalar(
    t_air: f64,
    q: f64,
    z: f64,
    k_mass: f64,
    t0: f64,
    t_mass_prev: f64,
) -> f64 {
    (t_air + q * z / k_mass + t0 * t_mass_prev) / (1.0 + t0)
}

/// Mass state starting in equilibrium with `t_initial`.
pub fn init_mass(
    grid: &BuildingGrid,
    config: &SimulationConfig,
    t_initial: &Array2<f64>,
) -> Result<MassState> {
    let p = &config.mass_params;
    if !(p.k_mass > 0.0) {
        return Err(Error::Precondition(format!(
            "mass conductivity must be positive, got {}",
            p.k_mass
        )));
    }
    let t0 = mass_time_parameter(p.rho_mass, p.c_mass, grid.z, p.k_mass, config.dt);
    let air = grid.cv_type.mapv(|k| k.is_air());
    Ok(MassState {
        t_mass: t_initial.clone(),
        t0: air.mapv(|a| if a { t0 } else { 0.0 }),
        k_mass: air.mapv(|a| if a { p.k_mass } else { 0.0 }),
    })
}

impl MassState {
    /// Advances the mass field in place. `q_sol_tau` is the transmitted flux
    /// density on each mass node [W/m²].
    pub fn update(&mut self, t: &Array2<f64>, q_sol_tau: &Array2<f64>, z: f64) {
        Zip::from(&mut self.t_mass)
            .and(t)
            .and(q_sol_tau)
            .and(&self.t0)
            .and(&self.k_mass)
            .for_each(|tm, &ta, &q, &t0, &k| {
                if k > 0.0 {
                    *tm = (ta + q * z / k + t0 * *tm) / (1.0 + t0);
                }
            });
    }

    /// Coupling conductance `K_mass·U·V/z` [W/K] per CV.
    pub fn coupling(&self, grid: &BuildingGrid) -> Array2<f64> {
        let mut g = &self.k_mass * &grid.u * &grid.v;
        g /= grid.z;
        g
    }
}

/// Functional form of [`MassState::update`] with an explicit `k_mass`.
pub fn update_mass(
    state: &MassState,
    t: &Array2<f64>,
    q_sol_tau: &Array2<f64>,
    z: f64,
    k_mass: f64,
) -> MassState {
    let mut next = state.clone();
    Zip::from(&mut next.t_mass)
        .and(t)
        .and(q_sol_tau)
        .and(&state.t0)
        .and(&state.k_mass)
        .for_each(|tm, &ta, &q, &t0, &k| {
            if k > 0.0 {
                *tm = mass_update_scalar(ta, q, z, k_mass, t0, *tm);
            }
        });
    next
}

/// Converts deposited power [W per CV] to flux density over each CV's plan
/// area [W/m²].
pub fn deposit_flux_density(grid: &BuildingGrid, deposit: &Array2<f64>) -> Array2<f64> {
    deposit / &(&grid.u * &grid.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::CvType;

    #[test]
    fn time_parameter_example() {
        assert_eq!(
            mass_time_parameter(1000.0, 1000.0, 3.0, 1.0, 300.0),
            30000.0
        );
        let half = mass_time_parameter(1000.0, 1000.0, 3.0, 1.0, 600.0);
        assert_eq!(half, 15000.0);
    }

    #[test]
    fn fixed_point_and_example() {
        assert_eq!(
            mass_update_scalar(295.0, 0.0, 3.0, 1.0, 123.0, 295.0),
            295.0
        );
        let v = mass_update_scalar(300.0, 100.0, 3.0, 1.0, 30000.0, 290.0);
        let expected = (300.0 + 300.0 + 30000.0 * 290.0) / 30001.0;
        assert_eq!(v, expected);
        assert!((v - 290.0103).abs() < 1e-4);
    }

    #[test]
    fn small_t0_approaches_steady_state() {
        let v = mass_update_scalar(300.0, 100.0, 3.0, 2.0, 1e-12, 250.0);
        assert!((v - (300.0 + 150.0)).abs() < 1e-9);
    }

    #[test]
    fn init_rejects_nonpositive_conductivity() {
        let cv = Array2::from_shape_fn((3, 3), |(r, c)| {
            if (r, c) == (1, 1) {
                CvType::InteriorAir
            } else {
                CvType::ExteriorWall
            }
        });
        let grid = BuildingGrid::new(cv, 1.0, 3.0).unwrap();
        let mut cfg = SimulationConfig::default();
        let t = Array2::from_elem((3, 3), 295.0);
        let m = init_mass(&grid, &cfg, &t).unwrap();
        assert_eq!(m.t0[[1, 1]], 30000.0);
        assert_eq!(m.k_mass[[0, 0]], 0.0);
        cfg.mass_params.k_mass = 0.0;
        assert!(init_mass(&grid, &cfg, &t).is_err());
    }
}
