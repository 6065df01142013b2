//! Python bindings for gridtherm.

use std::sync::Arc;

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gridtherm::oracle::IterativeSolver;
use gridtherm::radiation;
use gridtherm::report;
use gridtherm::sim::{self, Model, Solver, ThermalState};
use gridtherm::weather;
use gridtherm::{SitePosition, TensorSolver};

fn err(e: gridtherm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// A validated building loaded from TOML.
#[pyclass(name = "Building", frozen)]
pub struct PyBuilding {
    inner: gridtherm::Building,
}

#[pymethods]
impl PyBuilding {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        gridtherm::Building::load(path).map(|inner| PyBuilding { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        gridtherm::Building::from_toml_str(text)
            .map(|inner| PyBuilding { inner })
            .map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.grid.rows, self.inner.grid.cols)
    }

    #[getter]
    fn n_zones(&self) -> usize {
        self.inner.grid.n_zones
    }

    /// CV type names, row-major.
    fn cv_types(&self) -> Vec<Vec<String>> {
        self.inner
            .grid
            .cv_type
            .outer_iter()
            .map(|r| r.iter().map(|k| k.name().to_string()).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Building({}x{}, {} zones)",
            self.inner.grid.rows, self.inner.grid.cols, self.inner.grid.n_zones
        )
    }
}

/// An ordered weather series.
#[pyclass(name = "Weather", frozen)]
pub struct PyWeather {
    inner: gridtherm::WeatherSeries,
}

#[pymethods]
impl PyWeather {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        weather::load_weather_file(path)
            .map(|inner| PyWeather { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let records = weather::load_weather(text).map_err(err)?;
        gridtherm::WeatherSeries::new(records)
            .map(|inner| PyWeather { inner })
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.records().len()
    }

    /// Sky temperature [K] of record `i`, derived from air temperature
    /// when the file leaves it blank.
    fn sky_temperature(&self, i: usize) -> PyResult<f64> {
        self.inner
            .records()
            .get(i)
            .map(weather::sky_temperature)
            .ok_or_else(|| PyValueError::new_err(format!("no record {i}")))
    }
}

fn model(b: &PyBuilding) -> PyResult<Arc<Model>> {
    Model::from_building(&b.inner).map(Arc::new).map_err(err)
}

fn make_solver(name: &str, m: Arc<Model>) -> PyResult<Box<dyn Solver + Send + Sync>> {
    Ok(match name {
        "tensor" => Box::new(TensorSolver::new(m).map_err(err)?),
        "iterative" => Box::new(IterativeSolver::new(m).map_err(err)?),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown solver '{other}', expected 'tensor' or 'iterative'"
            )))
        }
    })
}

fn state_dict<'py>(py: Python<'py>, s: &ThermalState) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", s.step_index)?;
    d.set_item("time", s.sim_clock.to_rfc3339())?;
    d.set_item("T", rows(&s.t))?;
    d.set_item("T_mass", s.mass.as_ref().map(|m| rows(&m.t_mass)))?;
    Ok(d)
}

/// One solver stepping a building through a weather series.
#[pyclass(name = "Simulation")]
pub struct PySimulation {
    solver: Box<dyn Solver + Send + Sync>,
    state: ThermalState,
    weather: gridtherm::WeatherSeries,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (building, weather, solver = "tensor"))]
    fn new(building: &PyBuilding, weather: &PyWeather, solver: &str) -> PyResult<Self> {
        let m = model(building)?;
        let state = m.initial_state(&weather.inner).map_err(err)?;
        Ok(PySimulation {
            solver: make_solver(solver, m)?,
            state,
            weather: weather.inner.clone(),
        })
    }

    #[getter]
    fn solver(&self) -> String {
        self.solver.name().to_string()
    }

    /// Advances `steps` timesteps and returns the per-step reports.
    fn run<'py>(&mut self, py: Python<'py>, steps: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let ep = sim::run_episode(
            self.solver.as_mut(),
            self.state.clone(),
            &self.weather,
            steps,
            steps.max(1),
        )
        .map_err(err)?;
        self.state = ep.final_state;
        ep.reports
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("inner_iterations", r.inner_iterations)?;
                d.set_item("max_delta", r.max_delta)?;
                d.set_item("converged", r.converged)?;
                d.set_item("wall_time", r.wall_time)?;
                Ok(d)
            })
            .collect()
    }

    /// Current state: step index, clock, `T` and `T_mass` as nested lists.
    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        state_dict(py, &self.state)
    }
}

/// Runs both solvers side by side and returns the comparison summary.
#[pyfunction]
fn compare<'py>(
    py: Python<'py>,
    building: &PyBuilding,
    weather: &PyWeather,
    steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let m = model(building)?;
    let initial = m.initial_state(&weather.inner).map_err(err)?;
    let mut a = TensorSolver::new(Arc::clone(&m)).map_err(err)?;
    let mut b = IterativeSolver::new(m).map_err(err)?;
    let r = report::compare_solvers(&mut a, &mut b, &weather.inner, &initial, steps)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("max_rel_diff", r.per_cell_max_rel_diff)?;
    d.set_item("max_abs_diff", r.per_cell_max_abs_diff)?;
    d.set_item("sig_figs", r.sig_figs_agreement)?;
    d.set_item("pass", r.pass)?;
    d.set_item(
        "per_step_rel_diff",
        r.steps.iter().map(|s| s.max_rel_diff).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Times both solvers, best of `repeats`.
#[pyfunction]
#[pyo3(name = "bench", signature = (building, weather, steps = 10, repeats = 3))]
fn run_bench<'py>(
    py: Python<'py>,
    building: &PyBuilding,
    weather: &PyWeather,
    steps: usize,
    repeats: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = report::bench(model(building)?, &weather.inner, steps, repeats).map_err(err)?;
    let d = PyDict::new(py);
    for t in [&r.iterative, &r.tensor] {
        let s = PyDict::new(py);
        s.set_item("total_time", t.total_time)?;
        s.set_item("mean_per_step", t.mean_per_step)?;
        s.set_item("repeat_totals", t.repeat_totals.clone())?;
        d.set_item(t.solver_name.as_str(), s)?;
    }
    d.set_item("speedup", r.speedup)?;
    d.set_item("markdown", r.to_markdown())?;
    Ok(d)
}

/// Ground, sky and air view factors of a surface tilted `tilt` degrees.
#[pyfunction]
fn view_factors(py: Python<'_>, tilt: f64) -> PyResult<Bound<'_, PyDict>> {
    let vf = radiation::view_factors(tilt);
    let d = PyDict::new(py);
    d.set_item("f_gnd", vf.f_gnd)?;
    d.set_item("f_sky", vf.f_sky)?;
    d.set_item("beta", vf.beta)?;
    d.set_item("f_air", vf.f_air)?;
    Ok(d)
}

/// Net exterior long-wave flux density [W/m²] into a surface.
#[pyfunction]
fn exterior_lw_flux(
    emissivity: f64,
    tilt: f64,
    t_surf: f64,
    t_gnd: f64,
    t_sky: f64,
    t_air: f64,
) -> PyResult<f64> {
    let vf = radiation::view_factors(tilt);
    radiation::exterior_lw_flux(emissivity, &vf, t_surf, t_gnd, t_sky, t_air).map_err(err)
}

/// One explicit mass-node update.
#[pyfunction]
fn mass_update(t_air: f64, q: f64, z: f64, k_mass: f64, t0: f64, t_mass_prev: f64) -> f64 {
    gridtherm::mass::mass_update_scalar(t_air, q, z, k_mass, t0, t_mass_prev)
}

/// Solar zenith and azimuth [deg] at a site for an ISO 8601 timestamp.
#[pyfunction]
fn solar_position(latitude: f64, longitude: f64, timestamp: &str) -> PyResult<(f64, f64)> {
    let t = weather::parse_timestamp(timestamp)
        .ok_or_else(|| PyValueError::new_err(format!("bad timestamp '{timestamp}'")))?;
    let site = SitePosition {
        latitude,
        longitude,
        albedo: 0.2,
    };
    let g = weather::solar_position(&site, t);
    Ok((g.zenith, g.azimuth))
}

#[pymodule]
pub fn gridtherm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBuilding>()?;
    m.add_class::<PyWeather>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add_function(wrap_pyfunction!(view_factors, m)?)?;
    m.add_function(wrap_pyfunction!(exterior_lw_flux, m)?)?;
    m.add_function(wrap_pyfunction!(mass_update, m)?)?;
    m.add_function(wrap_pyfunction!(solar_position, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
