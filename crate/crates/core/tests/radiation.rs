mod common;

use chrono::{TimeZone, Utc};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

use common::*;
use gridtherm::radiation::{
    apply_interior_lw, assemble_exterior_lw_tensor, build_exchange_matrix_2d, exterior_lw_flux,
    view_factors, BoundaryTemps, InteriorLwKernel, STEFAN_BOLTZMANN,
};
use gridtherm::sim::Model;
use gridtherm::{Building, Direction};

/// Exterior flux density from scratch, view factors included.
fn exterior_scalar(eps: f64, tilt: f64, ts: f64, tg: f64, tsky: f64, ta: f64) -> f64 {
    let c = if tilt == 90.0 {
        0.0
    } else {
        tilt.to_radians().cos()
    };
    let (fg, fs) = ((1.0 - c) / 2.0, (1.0 + c) / 2.0);
    let beta = fs.sqrt();
    let s4 = ts.powi(4);
    eps * 5.670374419e-8
        * (fg * (tg.powi(4) - s4)
            + beta * fs * (tsky.powi(4) - s4)
            + fs * (1.0 - beta) * (ta.powi(4) - s4))
}

#[test]
fn exterior_flux_worked_example() {
    let vf = view_factors(90.0);
    let q = exterior_lw_flux(0.9, &vf, 300.0, 290.0, 270.0, 285.0).unwrap();
    // evaluated independently in 50-digit arithmetic
    assert!((q - (-87.7001176239905)).abs() < 1e-10, "{q}");
    assert!((q - exterior_scalar(0.9, 90.0, 300.0, 290.0, 270.0, 285.0)).abs() < 1e-12);
    assert!(exterior_lw_flux(1.2, &vf, 300.0, 290.0, 270.0, 285.0).is_err());
    assert!(exterior_lw_flux(0.9, &vf, 0.0, 290.0, 270.0, 285.0).is_err());
}

#[test]
fn corner_gets_two_faces_edge_gets_one() {
    let b = bundled_building();
    let boundary = BoundaryTemps {
        t_air: 285.0,
        t_gnd: 290.0,
        t_sky: 270.0,
    };
    let t = Array2::from_elem(b.grid.dim(), 300.0);
    let q = assemble_exterior_lw_tensor(&b.grid, &b.materials, None, &t, &boundary);
    let dx = 0.5;
    let flux = exterior_scalar(0.9, 90.0, 300.0, 290.0, 270.0, 285.0);
    assert!((q[[1, 8]] - dx * 3.0 * flux).abs() < 1e-10);
    assert!((q[[1, 1]] - 2.0 * q[[1, 8]]).abs() < 1e-10);
    assert_eq!(q[[5, 5]], 0.0);
    assert_eq!(q[[5, 11]], 0.0);
    assert_eq!(q[[0, 0]], 0.0);
}

#[test]
fn exterior_tensor_matches_face_by_face_sum() {
    let mut r = rng(41);
    for _ in 0..30 {
        let b = random_building(&mut r, RandomSpec::default());
        let g = &b.grid;
        let boundary = BoundaryTemps {
            t_air: r.random_range(250.0..310.0),
            t_gnd: r.random_range(250.0..320.0),
            t_sky: r.random_range(200.0..300.0),
        };
        let t = Array2::from_shape_fn(g.dim(), |_| r.random_range(260.0..320.0));
        let q = assemble_exterior_lw_tensor(g, &b.materials, None, &t, &boundary);
        for ((row, col), kind) in g.cv_type.indexed_iter() {
            let mut expected = 0.0;
            if kind.is_envelope() {
                for d in Direction::ALL {
                    let exposed = match g.neighbor(row, col, d) {
                        None => true,
                        Some(n) => g.cv_type[n].is_boundary(),
                    };
                    if exposed {
                        let len = if d.is_x_face() {
                            g.v[[row, col]]
                        } else {
                            g.u[[row, col]]
                        };
                        expected += len
                            * g.z
                            * exterior_scalar(
                                b.materials.emissivity[[row, col]],
                                b.materials.tilt[[row, col]],
                                t[[row, col]],
                                boundary.t_gnd,
                                boundary.t_sky,
                                boundary.t_air,
                            );
                    }
                }
            }
            let got = q[[row, col]];
            assert!(
                (got - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "({row}, {col}) {got} vs {expected}"
            );
        }
    }
}

const CAVITY: &str = r#"
[grid]
rows = 4
cols = 5
z = 2.0
cell_size = 1.0
fill = "exterior_wall"

[simulation]
interior_lw = true

[[zones]]
cv_type = "interior_air"
row = 1
col = 1
rows = ROWS
cols = COLS

[[materials]]
name = "wall"
cv_types = ["exterior_wall"]
conductivity = 1.0
density = 2000.0
specific_heat = 900.0
emissivity = 0.9
exterior_convection = 10.0
interior_convection = 3.0

[[materials]]
name = "air"
cv_types = ["interior_air"]
conductivity = 0.026
density = 1.2
specific_heat = 1005.0
"#;

fn cavity(rows: usize, cols: usize) -> Building {
    let text = CAVITY
        .replace("rows = 4", &format!("rows = {}", rows + 2))
        .replace("cols = 5", &format!("cols = {}", cols + 2))
        .replace("ROWS", &rows.to_string())
        .replace("COLS", &cols.to_string());
    Building::from_toml_str(&text).unwrap()
}

#[test]
fn unit_square_cavity_matches_analytic_factors() {
    let b = cavity(1, 1);
    let m = build_exchange_matrix_2d(&b.grid, &b.materials).unwrap();
    assert_eq!(m.n_surfaces(), 4);
    let eff = 1.0 / (2.0 / 0.9 - 1.0);
    let adjacent = (2.0 - 2f64.sqrt()) / 2.0;
    let opposite = 2f64.sqrt() - 1.0;
    let c = m.coefficients();
    for i in 0..4 {
        for j in 0..4 {
            let expected = match (i + 4 - j) % 4 {
                0 => 0.0,
                2 => opposite * eff,
                _ => adjacent * eff,
            };
            assert!(
                (c[[i, j]] - expected).abs() < 1e-12,
                "c[{i},{j}] = {}",
                c[[i, j]]
            );
        }
    }
}

/// Crossed-strings factors for the perimeter of a `w x h` cavity of unit
/// cells, surfaces listed clockwise from the north-west corner.
fn perimeter_factors(w: usize, h: usize) -> Array2<f64> {
    let mut segs = Vec::new();
    for i in 0..w {
        segs.push(((i as f64, 0.0), (i as f64 + 1.0, 0.0)));
    }
    for j in 0..h {
        segs.push(((w as f64, j as f64), (w as f64, j as f64 + 1.0)));
    }
    for i in 0..w {
        segs.push(((i as f64, h as f64), (i as f64 + 1.0, h as f64)));
    }
    for j in 0..h {
        segs.push(((0.0, j as f64), (0.0, j as f64 + 1.0)));
    }
    let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
    let n = segs.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (a, b) = (segs[i], segs[j]);
        if i == j
            || (a.0 .0 == a.1 .0 && a.0 .0 == b.0 .0 && b.0 .0 == b.1 .0)
            || (a.0 .1 == a.1 .1 && a.0 .1 == b.0 .1 && b.0 .1 == b.1 .1)
        {
            return 0.0;
        }
        let crossed = d(a.0, b.1) + d(a.1, b.0);
        let uncrossed = d(a.0, b.0) + d(a.1, b.1);
        (crossed - uncrossed).abs() / (2.0 * d(a.0, a.1))
    })
}

#[test]
fn rectangular_cavity_matches_independent_crossed_strings() {
    let b = cavity(2, 3);
    let m = build_exchange_matrix_2d(&b.grid, &b.materials).unwrap();
    let f = perimeter_factors(3, 2);
    let eff = 1.0 / (2.0 / 0.9 - 1.0);
    assert_eq!(m.n_surfaces(), f.nrows());
    for (i, row) in f.rows().into_iter().enumerate() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
        for (j, v) in row.iter().enumerate() {
            assert!((m.coefficients()[[i, j]] - v * eff).abs() < 1e-12);
        }
    }
    assert!(m.reciprocity_error() < 1e-12);
}

#[test]
fn two_surfaces_antisymmetric_four_surfaces_brute_force() {
    let b = cavity(1, 1);
    let m = build_exchange_matrix_2d(&b.grid, &b.materials).unwrap();
    let temps = [310.0, 290.0, 295.0, 280.0];
    let q = apply_interior_lw(&m, &temps).unwrap();
    let c = m.coefficients();
    for i in 0..4 {
        let mut expected = 0.0;
        for j in 0..4 {
            expected += STEFAN_BOLTZMANN * c[[i, j]] * (temps[j].powi(4) - temps[i].powi(4));
        }
        assert!((q[i] - expected).abs() < 1e-10);
    }
    // only surfaces 0 and 2 differ from a common temperature
    let q = apply_interior_lw(&m, &[310.0, 300.0, 290.0, 300.0]).unwrap();
    assert!((q[0] + q[2] + q[1] + q[3]).abs() < 1e-10);
    assert!(q[0] < 0.0 && q[2] > 0.0);
    let iso = apply_interior_lw(&m, &[300.0; 4]).unwrap();
    assert!(iso.iter().all(|v| *v == 0.0));
}

#[test]
fn flux_tensors_follow_feature_flags() {
    let noon = Utc.with_ymd_and_hms(2021, 6, 21, 20, 0, 0).unwrap();
    let weather = bundled_weather();
    let on = bundled_model();
    let state = on.initial_state(&weather).unwrap();
    let f = on
        .flux_tensors(&state.t, &on.forcing(&weather, noon).unwrap())
        .unwrap();
    assert!(f.q_lwr.iter().any(|v| *v != 0.0));
    assert!(f.q_sol_alpha.iter().any(|v| *v != 0.0));

    let mut b = bundled_building();
    b.config.enable_exterior_lw = false;
    b.config.enable_interior_lw = false;
    b.config.enable_solar = false;
    let off = Model::from_building(&b).unwrap();
    let mut t = state.t.clone();
    t[[5, 5]] += 10.0;
    let f = off
        .flux_tensors(&t, &off.forcing(&weather, noon).unwrap())
        .unwrap();
    for tensor in [&f.q_lwr, &f.q_lwx, &f.q_sol_alpha, &f.q_sol_tau] {
        assert!(tensor.iter().all(|v| *v == 0.0));
    }
}

proptest! {
    #[test]
    fn exterior_flux_decreases_with_surface_temperature(
        eps in 0.0f64..=1.0, tilt in 0.0f64..=180.0,
        ts in 200.0f64..350.0, bump in 0.01f64..50.0,
        tg in 200.0f64..330.0, tsky in 150.0f64..310.0, ta in 200.0f64..330.0,
    ) {
        let vf = view_factors(tilt);
        let a = exterior_lw_flux(eps, &vf, ts, tg, tsky, ta).unwrap();
        let b = exterior_lw_flux(eps, &vf, ts + bump, tg, tsky, ta).unwrap();
        prop_assert!(b <= a);
        prop_assert!((a - exterior_scalar(eps, tilt, ts, tg, tsky, ta)).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn interior_exchange_conserves_energy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = random_building(&mut r, RandomSpec::default());
        let m = build_exchange_matrix_2d(&b.grid, &b.materials).unwrap();
        prop_assert!(m.reciprocity_error() <= 1e-9);
        let t = Array2::from_shape_fn(b.grid.dim(), |_| r.random_range(260.0..330.0));
        let mut q = Array2::zeros(b.grid.dim());
        InteriorLwKernel::new(&m, b.grid.z).apply(&t, &mut q);
        let gross: f64 = q.iter().map(|v| v.abs()).sum();
        prop_assert!(q.sum().abs() <= 1e-9 * gross.max(1.0));
        q.iter().zip(&b.grid.cv_type).for_each(|(v, k)| {
            if k.is_air() || k.is_boundary() { assert_eq!(*v, 0.0) }
        });
    }
}
