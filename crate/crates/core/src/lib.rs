//! Two-dimensional finite-difference thermal simulation of a building floor.
//!
//! Each floor is a grid of control volumes (CVs). Every timestep the air and
//! wall temperatures are advanced by an implicit energy balance covering
//! conduction, convection, interior and exterior long-wave radiation, solar
//! gains and an optional interior thermal-mass layer.
//!
//! Two solvers advance the same balance:
//!
//! * [`TensorSolver`] evaluates the whole-grid update as element-wise field
//!   arithmetic and iterates it to a fixed point.
//! * [`IterativeSolver`] sweeps node by node (Gauss-Seidel) and shares no
//!   numerical kernels with the tensor solver, so it serves as an oracle.
//!
//! The [`report`] module compares the two and benchmarks them.

pub mod building;
pub mod error;
pub mod mass;
pub mod oracle;
pub mod radiation;
pub mod report;
pub mod sim;
pub mod tensor;
pub mod weather;

pub use building::{
    classify_exposure, load_building, Building, BuildingGrid, CvType, Direction, MassParams,
    MaterialField, SimulationConfig,
};
pub use error::{Error, Result};
pub use mass::MassState;
pub use oracle::IterativeSolver;
pub use radiation::{FluxTensors, RadiationExchangeMatrix, ViewFactorSet};
pub use sim::{Model, Solver, StepForcing, ThermalState};
pub use tensor::{StepReport, TensorSolver};
pub use weather::{PoaIrradiance, SitePosition, SolarGeometry, WeatherRecord, WeatherSeries};
