#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridtherm::building::{BuildingDoc, GridSection, MaterialDecl, ZoneRect};
use gridtherm::sim::Model;
use gridtherm::{
    Building, CvType, Direction, MassParams, SimulationConfig, SitePosition, WeatherRecord,
    WeatherSeries,
};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn bundled_building() -> Building {
    Building::load(data_path("two_zone.toml")).expect("bundled building loads")
}

pub fn bundled_weather() -> WeatherSeries {
    gridtherm::weather::load_weather_file(data_path("weather_24h.csv")).expect("bundled weather")
}

pub fn bundled_model() -> Arc<Model> {
    Arc::new(Model::from_building(&bundled_building()).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn zone(cv_type: CvType, row: usize, col: usize, rows: usize, cols: usize) -> ZoneRect {
    ZoneRect {
        name: None,
        cv_type,
        row,
        col,
        rows,
        cols,
        heat_source: 0.0,
    }
}

fn material(name: &str, cv_types: Vec<CvType>) -> MaterialDecl {
    MaterialDecl {
        name: name.into(),
        cv_types,
        rects: vec![],
        conductivity: 1.0,
        density: 1000.0,
        specific_heat: 1000.0,
        emissivity: 0.9,
        absorptivity: 0.0,
        transmissivity: 0.0,
        exterior_convection: 0.0,
        interior_convection: None,
        tilt: 90.0,
    }
}

/// Knobs for [`random_doc`].
#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub max_rows: usize,
    pub max_cols: usize,
    pub epsilon: f64,
    /// Allow non-vertical envelope tilts.
    pub tilted: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_rows: 8,
            max_cols: 8,
            epsilon: 1e-3,
            tilted: true,
        }
    }
}

/// A random valid single-floor building: a one-cell envelope ring around
/// air, optionally inside a ring of boundary cells, optionally split by an
/// interior wall, with a few windows on the edges.
pub fn random_doc(rng: &mut ChaCha8Rng, opts: RandomSpec) -> BuildingDoc {
    let rows = rng.random_range(4..=opts.max_rows);
    let cols = rng.random_range(4..=opts.max_cols);
    let padded = rows >= 6 && cols >= 6 && rng.random_bool(0.4);
    let off = usize::from(padded);
    let (er, ec) = (rows - 2 * off, cols - 2 * off);

    let mut zones = vec![
        zone(CvType::ExteriorWall, off, off, er, ec),
        zone(CvType::InteriorAir, off + 1, off + 1, er - 2, ec - 2),
    ];
    zones[1].heat_source = rng.random_range(0.0..10.0);

    // partition column, leaving air on both sides
    let mut partition = None;
    if ec - 2 >= 3 && rng.random_bool(0.5) {
        let c = off + rng.random_range(2..ec - 2);
        zones.push(zone(CvType::InteriorWall, off + 1, c, er - 2, 1));
        partition = Some(c);
    }

    // windows on non-corner edge cells not touching the partition
    let mut candidates = Vec::new();
    for c in off + 1..off + ec - 1 {
        if Some(c) != partition {
            candidates.push((off, c));
            candidates.push((off + er - 1, c));
        }
    }
    for r in off + 1..off + er - 1 {
        candidates.push((r, off));
        candidates.push((r, off + ec - 1));
    }
    let n_windows = rng.random_range(0..=candidates.len().min(4));
    for _ in 0..n_windows {
        let (r, c) = candidates.swap_remove(rng.random_range(0..candidates.len()));
        zones.push(zone(CvType::Window, r, c, 1, 1));
    }

    let mut wall = material("wall", vec![CvType::ExteriorWall]);
    wall.conductivity = rng.random_range(0.5..2.0);
    wall.density = rng.random_range(1000.0..2500.0);
    wall.specific_heat = rng.random_range(800.0..1000.0);
    wall.emissivity = rng.random_range(0.5..0.95);
    wall.absorptivity = rng.random_range(0.2..0.9);
    wall.exterior_convection = rng.random_range(5.0..25.0);
    wall.interior_convection = Some(rng.random_range(2.0..8.0));
    if opts.tilted && rng.random_bool(0.3) {
        wall.tilt = rng.random_range(30.0..150.0);
    }

    let mut glass = material("glass", vec![CvType::Window]);
    glass.conductivity = rng.random_range(0.5..1.0);
    glass.density = 2500.0;
    glass.specific_heat = 840.0;
    glass.emissivity = rng.random_range(0.8..0.9);
    glass.absorptivity = rng.random_range(0.0..0.2);
    glass.transmissivity = rng.random_range(0.3..0.8);
    glass.exterior_convection = rng.random_range(5.0..25.0);
    glass.interior_convection = Some(rng.random_range(2.0..8.0));

    let mut partition_mat = material("partition", vec![CvType::InteriorWall]);
    partition_mat.conductivity = rng.random_range(0.2..1.0);
    partition_mat.density = rng.random_range(500.0..1500.0);
    partition_mat.emissivity = rng.random_range(0.7..0.95);
    partition_mat.interior_convection = Some(rng.random_range(2.0..8.0));

    let mut air = material("air", vec![CvType::InteriorAir]);
    air.conductivity = rng.random_range(0.02..0.05);
    air.density = 1.2;
    air.specific_heat = 1005.0;
    air.emissivity = 0.0;

    let simulation = SimulationConfig {
        convergence_epsilon: opts.epsilon,
        initial_temperature: rng.random_range(285.0..300.0),
        mass_params: MassParams {
            k_mass: rng.random_range(0.5..2.0),
            rho_mass: rng.random_range(500.0..2000.0),
            c_mass: rng.random_range(500.0..1500.0),
        },
        ..SimulationConfig::default()
    };

    BuildingDoc {
        grid: GridSection {
            rows,
            cols,
            z: rng.random_range(2.5..4.0),
            cell_size: rng.random_range(0.25..1.0),
            fill: CvType::Boundary,
        },
        site: SitePosition {
            latitude: rng.random_range(-60.0..60.0),
            longitude: rng.random_range(-180.0..180.0),
            albedo: rng.random_range(0.0..0.5),
        },
        simulation,
        zones,
        materials: vec![wall, glass, partition_mat, air],
    }
}

pub fn random_building(rng: &mut ChaCha8Rng, opts: RandomSpec) -> Building {
    Building::from_doc(random_doc(rng, opts)).expect("generated building is valid")
}

/// Random weather around a random start: hourly records from one hour
/// before `start` to `hours` after it.
pub fn random_weather(rng: &mut ChaCha8Rng, hours: i64) -> (DateTime<Utc>, WeatherSeries) {
    let day = rng.random_range(0..365);
    let hour = rng.random_range(0..24);
    let start = Utc.with_ymd_and_hms(2021, 1, 1, hour, 0, 0).unwrap() + Duration::days(day);
    let records = (-1..=hours)
        .map(|h| {
            let t_air = rng.random_range(265.0..310.0);
            let ghi: f64 = if rng.random_bool(0.7) {
                rng.random_range(0.0..1000.0)
            } else {
                0.0
            };
            WeatherRecord {
                timestamp: start + Duration::hours(h),
                t_air,
                t_gnd: t_air + rng.random_range(-5.0..5.0),
                t_sky: rng
                    .random_bool(0.5)
                    .then(|| t_air - rng.random_range(5.0..30.0)),
                ghi,
                dni: if ghi > 0.0 {
                    rng.random_range(0.0..900.0)
                } else {
                    0.0
                },
                dhi: ghi * rng.random_range(0.1..0.6),
            }
        })
        .collect();
    (start, WeatherSeries::new(records).unwrap())
}

/// Random building plus weather, with the simulation start set.
pub fn random_case(seed: u64, opts: RandomSpec, hours: i64) -> (Building, WeatherSeries) {
    let mut r = rng(seed);
    let mut doc = random_doc(&mut r, opts);
    let (start, weather) = random_weather(&mut r, hours);
    doc.simulation.start = Some(start);
    (Building::from_doc(doc).unwrap(), weather)
}

/// Constant record at `t` everywhere, no sun.
pub fn dark_isothermal(t: f64, at: DateTime<Utc>) -> WeatherSeries {
    WeatherSeries::constant(WeatherRecord {
        timestamp: at,
        t_air: t,
        t_gnd: t,
        t_sky: Some(t),
        ghi: 0.0,
        dni: 0.0,
        dhi: 0.0,
    })
    .unwrap()
}

/// The conduction/convection update written out literally: per CV,
/// neighbor temperatures taken by index arithmetic (padding with `t_inf`
/// off the grid), face areas `V·z` (west/east) and `U·z` (north/south).
pub fn eq1_direct(
    model: &Model,
    t: &Array2<f64>,
    t_prev: &Array2<f64>,
    t_inf: f64,
    q_x: &Array2<f64>,
) -> Array2<f64> {
    let g = &model.grid;
    let m = &model.materials;
    let z = g.z;
    let (rows, cols) = g.dim();
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            t_inf
        } else {
            t[[r as usize, c as usize]]
        }
    };
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (ri, ci) = (r as isize, c as isize);
        let (u, v) = (g.u[[r, c]], g.v[[r, c]]);
        let k = |d: Direction| m.k[d.index()][[r, c]];
        let h = |d: Direction| m.h[d.index()][[r, c]];
        let (t1, t2, t3, t4) = (
            at(ri, ci - 1),
            at(ri - 1, ci),
            at(ri, ci + 1),
            at(ri + 1, ci),
        );
        let (w, n, e, s) = (
            Direction::West,
            Direction::North,
            Direction::East,
            Direction::South,
        );
        let storage = m.c[[r, c]] * m.rho[[r, c]] * u * v * z / model.config.dt;
        let num = q_x[[r, c]]
            + v * z * (k(w) / u * t1 + h(w) * t_inf + k(e) / u * t3 + h(e) * t_inf)
            + u * z * (k(n) / v * t2 + h(n) * t_inf + k(s) / v * t4 + h(s) * t_inf)
            + storage * t_prev[[r, c]];
        let den = v * z * (k(w) / u + h(w) + k(e) / u + h(e))
            + u * z * (k(n) / v + h(n) + k(s) / v + h(s))
            + storage;
        num / den
    })
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let s = x.abs().max(y.abs());
            if s == 0.0 {
                0.0
            } else {
                (x - y).abs() / s
            }
        })
        .fold(0.0, f64::max)
}
