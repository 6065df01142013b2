//! Computational grid, CV typing, material fields and the building document.
//!
//! A building is described by a TOML document with four sections:
//! `grid`, `zones`, `materials` and `simulation` (plus an optional `site`).
//! Zones are axis-aligned rectangles painted onto the grid in document
//! order; materials are bound to CV types and/or rectangles, later
//! declarations overriding earlier ones. See `docs/building-format.md`.

use std::collections::VecDeque;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weather::SitePosition;

/// Control-volume type. The numeric codes are the ones written to snapshot
/// files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvType {
    InteriorAir,
    ExteriorWall,
    InteriorWall,
    /// Fixed-temperature padding outside the envelope, held at ambient.
    Boundary,
    Window,
}

impl CvType {
    pub const ALL: [CvType; 5] = [
        CvType::InteriorAir,
        CvType::ExteriorWall,
        CvType::InteriorWall,
        CvType::Boundary,
        CvType::Window,
    ];

    pub fn code(self) -> u8 {
        match self {
            CvType::InteriorAir => 0,
            CvType::ExteriorWall => 1,
            CvType::InteriorWall => 2,
            CvType::Boundary => 3,
            CvType::Window => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }

    /// Exterior walls and windows: the CVs that see sky, ground and sun.
    pub fn is_envelope(self) -> bool {
        matches!(self, CvType::ExteriorWall | CvType::Window)
    }

    pub fn is_air(self) -> bool {
        self == CvType::InteriorAir
    }

    pub fn is_boundary(self) -> bool {
        self == CvType::Boundary
    }

    pub fn name(self) -> &'static str {
        match self {
            CvType::InteriorAir => "interior_air",
            CvType::ExteriorWall => "exterior_wall",
            CvType::InteriorWall => "interior_wall",
            CvType::Boundary => "boundary",
            CvType::Window => "window",
        }
    }
}

impl fmt::Display for CvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cardinal face direction. Row 0 is the north edge of the plan and column 0
/// the west edge. The declaration order matches the neighbor numbering of the
/// update equation: 1 = west, 2 = north, 3 = east, 4 = south.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    West,
    North,
    East,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::West,
        Direction::North,
        Direction::East,
        Direction::South,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(d_row, d_col)` of the neighbor across this face.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::West => (0, -1),
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::West => Direction::East,
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
        }
    }

    /// True for faces normal to x (west/east), whose area is `V·z`.
    pub fn is_x_face(self) -> bool {
        matches!(self, Direction::West | Direction::East)
    }

    /// Outward-normal azimuth of a facade facing this way, clockwise from north.
    pub fn azimuth_deg(self) -> f64 {
        match self {
            Direction::North => 0.0,
            Direction::East => 90.0,
            Direction::South => 180.0,
            Direction::West => 270.0,
        }
    }

    pub fn bit(self) -> u8 {
        1 << self.index()
    }

    pub fn letter(self) -> &'static str {
        match self {
            Direction::West => "W",
            Direction::North => "N",
            Direction::East => "E",
            Direction::South => "S",
        }
    }

    pub fn from_letter(s: &str) -> Option<Self> {
        match s.trim() {
            "W" | "w" => Some(Direction::West),
            "N" | "n" => Some(Direction::North),
            "E" | "e" => Some(Direction::East),
            "S" | "s" => Some(Direction::South),
            _ => None,
        }
    }

    /// Directions whose bit is set in `mask`, in declaration order.
    pub fn in_mask(mask: u8) -> impl Iterator<Item = Direction> {
        Self::ALL.into_iter().filter(move |d| mask & d.bit() != 0)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

/// Geometric substrate shared by every field in the model.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildingGrid {
    pub rows: usize,
    pub cols: usize,
    pub cv_type: Array2<CvType>,
    /// x-extent of each CV [m].
    pub u: Array2<f64>,
    /// y-extent of each CV [m].
    pub v: Array2<f64>,
    /// Floor height [m].
    pub z: f64,
    /// Mean exposed face length of envelope CVs [m]; zero elsewhere.
    pub delta_x: Array2<f64>,
    /// Number of exterior-facing faces: 2 at corners, 1 on straight runs.
    pub exposed_faces: Array2<u8>,
    /// Facade bitmask. For exposed envelope CVs these are the exterior-facing
    /// faces; for envelope CVs buried inside a thick wall it is the facade of
    /// the nearest exposed CV.
    pub facade: Array2<u8>,
    /// Envelope layers between this CV and the exterior (0 when exposed).
    pub layer_depth: Array2<u32>,
    /// Air zone (4-connected component of interior air) of each air CV.
    pub zone: Array2<Option<usize>>,
    pub n_zones: usize,
    /// Zone receiving the transmitted solar flux of each window.
    pub window_zone: Array2<Option<usize>>,
}

impl BuildingGrid {
    /// Builds a grid of square `cell_size` CVs and classifies its exposure.
    pub fn new(cv_type: Array2<CvType>, cell_size: f64, z: f64) -> Result<Self> {
        let (rows, cols) = cv_type.dim();
        let grid = BuildingGrid {
            rows,
            cols,
            cv_type,
            u: Array2::from_elem((rows, cols), cell_size),
            v: Array2::from_elem((rows, cols), cell_size),
            z,
            delta_x: Array2::zeros((rows, cols)),
            exposed_faces: Array2::zeros((rows, cols)),
            facade: Array2::zeros((rows, cols)),
            layer_depth: Array2::zeros((rows, cols)),
            zone: Array2::from_elem((rows, cols), None),
            n_zones: 0,
            window_zone: Array2::from_elem((rows, cols), None),
        };
        classify_exposure(grid)
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn neighbor(&self, row: usize, col: usize, dir: Direction) -> Option<(usize, usize)> {
        let (dr, dc) = dir.offset();
        let r = row.checked_add_signed(dr)?;
        let c = col.checked_add_signed(dc)?;
        (r < self.rows && c < self.cols).then_some((r, c))
    }

    /// A face is on the exterior when it borders the grid edge or a boundary CV.
    pub fn faces_exterior(&self, row: usize, col: usize, dir: Direction) -> bool {
        match self.neighbor(row, col, dir) {
            None => true,
            Some(n) => self.cv_type[n].is_boundary(),
        }
    }

    /// Length of the face in the plan [m]: `V` for west/east faces, `U` for
    /// north/south faces.
    pub fn face_length(&self, row: usize, col: usize, dir: Direction) -> f64 {
        if dir.is_x_face() {
            self.v[[row, col]]
        } else {
            self.u[[row, col]]
        }
    }

    /// Distance between the centers of this CV and its neighbor across `dir`.
    pub fn center_distance(&self, row: usize, col: usize, dir: Direction) -> f64 {
        if dir.is_x_face() {
            self.u[[row, col]]
        } else {
            self.v[[row, col]]
        }
    }

    /// Air CVs of `zone` in row-major order.
    pub fn zone_cells(&self, zone: usize) -> Vec<(usize, usize)> {
        self.zone
            .indexed_iter()
            .filter(|(_, z)| **z == Some(zone))
            .map(|(idx, _)| idx)
            .collect()
    }
}

/// Populates exposure counts, facades, layer depths, air zones and window
/// target zones, rejecting geometry the model cannot represent.
pub fn classify_exposure(mut grid: BuildingGrid) -> Result<BuildingGrid> {
    let (rows, cols) = grid.cv_type.dim();
    grid.rows = rows;
    grid.cols = cols;

    if !grid.cv_type.iter().any(|t| t.is_envelope()) {
        return Err(Error::Validation(
            "an envelope is required: no exterior wall or window cells".into(),
        ));
    }
    if rows * cols < 4 {
        return Err(Error::Validation(format!(
            "grid must hold at least 4 cells, got {rows}x{cols}"
        )));
    }
    if !(grid.z > 0.0) {
        return Err(Error::Validation(format!(
            "floor height must be positive, got {}",
            grid.z
        )));
    }
    for (((r, c), &u), &v) in grid.u.indexed_iter().zip(grid.v.iter()) {
        if !(u > 0.0 && v > 0.0) {
            return Err(Error::Validation(format!(
                "cell ({r}, {c}) has non-positive dimensions U={u}, V={v}"
            )));
        }
    }

    grid.exposed_faces.fill(0);
    grid.facade.fill(0);
    grid.delta_x.fill(0.0);
    grid.layer_depth.fill(0);

    let mut queue = VecDeque::new();
    let mut reached = Array2::from_elem((rows, cols), false);
    for r in 0..rows {
        for c in 0..cols {
            let kind = grid.cv_type[[r, c]];
            if kind.is_boundary() {
                continue;
            }
            let mask = Direction::ALL
                .into_iter()
                .filter(|&d| grid.faces_exterior(r, c, d))
                .fold(0u8, |m, d| m | d.bit());
            if mask == 0 {
                continue;
            }
            if !kind.is_envelope() {
                return Err(Error::Validation(format!(
                    "cell ({r}, {c}) of type {kind} faces the exterior; \
                     only exterior walls and windows may"
                )));
            }
            let count = mask.count_ones() as u8;
            if count > 2 {
                return Err(Error::Validation(format!(
                    "envelope cell ({r}, {c}) has {count} exterior faces; at most 2 are supported"
                )));
            }
            let total: f64 = Direction::in_mask(mask)
                .map(|d| grid.face_length(r, c, d))
                .sum();
            grid.exposed_faces[[r, c]] = count;
            grid.facade[[r, c]] = mask;
            grid.delta_x[[r, c]] = total / f64::from(count);
            reached[[r, c]] = true;
            queue.push_back((r, c));
        }
    }

    // Envelope CVs buried in thick walls inherit the facade of the nearest
    // exposed CV.
    while let Some((r, c)) = queue.pop_front() {
        let depth = grid.layer_depth[[r, c]];
        let facade = grid.facade[[r, c]];
        for d in Direction::ALL {
            let Some(n) = grid.neighbor(r, c, d) else {
                continue;
            };
            if reached[n] || !grid.cv_type[n].is_envelope() {
                continue;
            }
            reached[n] = true;
            let primary = Direction::in_mask(facade).next().unwrap_or(d.opposite());
            grid.facade[n] = primary.bit();
            grid.layer_depth[n] = depth + 1;
            grid.delta_x[n] = grid.face_length(n.0, n.1, primary);
            queue.push_back(n);
        }
    }
    for ((r, c), kind) in grid.cv_type.indexed_iter() {
        if kind.is_envelope() && !reached[[r, c]] {
            return Err(Error::Validation(format!(
                "envelope cell ({r}, {c}) is not connected to the exterior"
            )));
        }
    }

    grid.zone.fill(None);
    let mut n_zones = 0;
    for r in 0..rows {
        for c in 0..cols {
            if !grid.cv_type[[r, c]].is_air() || grid.zone[[r, c]].is_some() {
                continue;
            }
            grid.zone[[r, c]] = Some(n_zones);
            let mut stack = vec![(r, c)];
            while let Some((pr, pc)) = stack.pop() {
                for d in Direction::ALL {
                    if let Some(n) = grid.neighbor(pr, pc, d) {
                        if grid.cv_type[n].is_air() && grid.zone[n].is_none() {
                            grid.zone[n] = Some(n_zones);
                            stack.push(n);
                        }
                    }
                }
            }
            n_zones += 1;
        }
    }
    grid.n_zones = n_zones;

    grid.window_zone.fill(None);
    for r in 0..rows {
        for c in 0..cols {
            if grid.cv_type[[r, c]] != CvType::Window {
                continue;
            }
            let preferred = Direction::in_mask(grid.facade[[r, c]])
                .next()
                .map(Direction::opposite);
            let target = preferred
                .into_iter()
                .chain(Direction::ALL)
                .filter_map(|d| grid.neighbor(r, c, d))
                .find_map(|n| grid.zone[n]);
            match target {
                Some(z) => grid.window_zone[[r, c]] = Some(z),
                None => {
                    return Err(Error::Validation(format!(
                        "window ({r}, {c}) does not border any interior air"
                    )))
                }
            }
        }
    }

    Ok(grid)
}

/// Per-CV physical properties. Conductivity and convection are stored per
/// face (indexed by [`Direction::index`]) so that the loader can resolve
/// interface conductances once.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    /// Face conductivity [W/(m·K)]; divided by the center distance it gives
    /// the conductance per unit face area.
    pub k: [Array2<f64>; 4],
    /// Face convection coefficient to ambient [W/(m²·K)].
    pub h: [Array2<f64>; 4],
    pub c: Array2<f64>,
    pub rho: Array2<f64>,
    pub emissivity: Array2<f64>,
    pub absorptivity: Array2<f64>,
    pub transmissivity: Array2<f64>,
    /// Surface tilt from horizontal [deg].
    pub tilt: Array2<f64>,
}

impl MaterialField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let z = || Array2::zeros((rows, cols));
        MaterialField {
            k: [z(), z(), z(), z()],
            h: [z(), z(), z(), z()],
            c: z(),
            rho: z(),
            emissivity: z(),
            absorptivity: z(),
            transmissivity: z(),
            tilt: Array2::from_elem((rows, cols), 90.0),
        }
    }

    pub fn k_dir(&self, dir: Direction) -> &Array2<f64> {
        &self.k[dir.index()]
    }

    pub fn h_dir(&self, dir: Direction) -> &Array2<f64> {
        &self.h[dir.index()]
    }

    pub fn validate(&self, grid: &BuildingGrid) -> Result<()> {
        let dim = grid.dim();
        let fields = self.k.iter().chain(self.h.iter()).chain([
            &self.c,
            &self.rho,
            &self.emissivity,
            &self.absorptivity,
            &self.transmissivity,
            &self.tilt,
        ]);
        for f in fields {
            if f.dim() != dim {
                return Err(Error::Dimension {
                    expected: grid.n_cells(),
                    found: f.len(),
                });
            }
        }
        let bad = |r: usize, c: usize, what: String| {
            Err(Error::Validation(format!(
                "cell ({r}, {c}) [{}]: {what}",
                grid.cv_type[[r, c]]
            )))
        };
        for ((r, c), kind) in grid.cv_type.indexed_iter() {
            let idx = [r, c];
            for d in Direction::ALL {
                let (k, h) = (self.k[d.index()][idx], self.h[d.index()][idx]);
                if !(k >= 0.0 && k.is_finite()) || !(h >= 0.0 && h.is_finite()) {
                    return bad(r, c, format!("negative or non-finite K/H on {d} face"));
                }
            }
            let (cp, rho) = (self.c[idx], self.rho[idx]);
            if !(cp >= 0.0 && rho >= 0.0) {
                return bad(r, c, "negative specific heat or density".into());
            }
            if kind.is_boundary() {
                continue;
            }
            if !(cp * rho > 0.0) {
                return bad(r, c, "C·rho must be positive".into());
            }
            let (eps, alpha, tau) = (
                self.emissivity[idx],
                self.absorptivity[idx],
                self.transmissivity[idx],
            );
            for (name, val) in [
                ("emissivity", eps),
                ("absorptivity", alpha),
                ("transmissivity", tau),
            ] {
                if !(0.0..=1.0).contains(&val) {
                    return bad(r, c, format!("{name} {val} outside [0, 1]"));
                }
            }
            if alpha + tau > 1.0 {
                return bad(
                    r,
                    c,
                    format!("absorptivity + transmissivity = {} > 1", alpha + tau),
                );
            }
            if tau > 0.0 && *kind != CvType::Window {
                return bad(r, c, format!("transmissivity {tau} on an opaque cell"));
            }
            let tilt = self.tilt[idx];
            if !(0.0..=180.0).contains(&tilt) {
                return bad(r, c, format!("tilt {tilt} outside [0, 180] deg"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassParams {
    /// Air-to-mass conductivity [W/(m·K)], reused as the coupling coefficient.
    #[serde(rename = "k")]
    pub k_mass: f64,
    #[serde(rename = "rho")]
    pub rho_mass: f64,
    #[serde(rename = "c")]
    pub c_mass: f64,
}

impl Default for MassParams {
    fn default() -> Self {
        MassParams {
            k_mass: 1.0,
            rho_mass: 1000.0,
            c_mass: 1000.0,
        }
    }
}

fn default_dt() -> f64 {
    300.0
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_max_inner() -> usize {
    500
}
fn default_true() -> bool {
    true
}
fn default_initial_temperature() -> f64 {
    294.15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Inner-iteration stop threshold on max |ΔT| [K].
    #[serde(rename = "epsilon", default = "default_epsilon")]
    pub convergence_epsilon: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner_iterations: usize,
    #[serde(rename = "interior_lw", default = "default_true")]
    pub enable_interior_lw: bool,
    #[serde(rename = "exterior_lw", default = "default_true")]
    pub enable_exterior_lw: bool,
    #[serde(rename = "solar", default = "default_true")]
    pub enable_solar: bool,
    #[serde(rename = "interior_mass", default = "default_true")]
    pub enable_interior_mass: bool,
    #[serde(rename = "mass", default)]
    pub mass_params: MassParams,
    /// Initial temperature of every non-boundary CV [K].
    #[serde(default = "default_initial_temperature")]
    pub initial_temperature: f64,
    /// When set, envelope CVs without an exposed face receive `1/divisor` of
    /// the exterior flux of their facade face. Unset means they receive none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_layer_divisor: Option<f64>,
    /// Simulation start; defaults to the first weather record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<DateTime<Utc>>,
    /// Optional exchange-matrix CSV replacing the built-in crossed-strings
    /// builder. Relative paths resolve against the building file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange_matrix: Option<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: default_dt(),
            convergence_epsilon: default_epsilon(),
            max_inner_iterations: default_max_inner(),
            enable_interior_lw: true,
            enable_exterior_lw: true,
            enable_solar: true,
            enable_interior_mass: true,
            mass_params: MassParams::default(),
            initial_temperature: default_initial_temperature(),
            envelope_layer_divisor: None,
            start: None,
            exchange_matrix: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.convergence_epsilon > 0.0) {
            return fail(format!(
                "epsilon must be positive, got {}",
                self.convergence_epsilon
            ));
        }
        if self.max_inner_iterations < 1 {
            return fail("max_inner_iterations must be at least 1".into());
        }
        if !(self.initial_temperature > 0.0) {
            return fail(format!(
                "initial_temperature must be positive kelvin, got {}",
                self.initial_temperature
            ));
        }
        if let Some(k) = self.envelope_layer_divisor {
            if !(k > 0.0) {
                return fail(format!("envelope_layer_divisor must be positive, got {k}"));
            }
        }
        if self.enable_interior_mass {
            let m = &self.mass_params;
            if !(m.k_mass > 0.0) {
                return fail(format!("mass k must be positive, got {}", m.k_mass));
            }
            if !(m.rho_mass > 0.0 && m.c_mass > 0.0) {
                return fail("mass rho and c must be positive".into());
            }
        }
        Ok(())
    }

    /// True when every radiative and mass feature is switched off, i.e. the
    /// update is plain conduction/convection.
    pub fn conduction_only(&self) -> bool {
        !(self.enable_interior_lw
            || self.enable_exterior_lw
            || self.enable_solar
            || self.enable_interior_mass)
    }
}

fn default_fill() -> CvType {
    CvType::Boundary
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
    /// Floor height [m].
    pub z: f64,
    /// Edge length of the square CVs [m].
    pub cell_size: f64,
    /// CV type of cells no zone covers.
    #[serde(default = "default_fill")]
    pub fill: CvType,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Rect {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.row..self.row + self.rows).contains(&r)
            && (self.col..self.col + self.cols).contains(&c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneRect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub cv_type: CvType,
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    /// Heat source per CV [W] (the HVAC term).
    #[serde(default)]
    pub heat_source: f64,
}

fn default_emissivity() -> f64 {
    0.9
}
fn default_tilt() -> f64 {
    90.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDecl {
    pub name: String,
    #[serde(default)]
    pub cv_types: Vec<CvType>,
    #[serde(default)]
    pub rects: Vec<Rect>,
    pub conductivity: f64,
    pub density: f64,
    pub specific_heat: f64,
    #[serde(default = "default_emissivity")]
    pub emissivity: f64,
    #[serde(default)]
    pub absorptivity: f64,
    #[serde(default)]
    pub transmissivity: f64,
    /// Convection to ambient on exterior faces [W/(m²·K)].
    #[serde(default)]
    pub exterior_convection: f64,
    /// Surface film coefficient toward interior air [W/(m²·K)], added in
    /// series with conduction on solid/air interfaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_convection: Option<f64>,
    #[serde(default = "default_tilt")]
    pub tilt: f64,
}

/// The building document as written on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingDoc {
    pub grid: GridSection,
    #[serde(default)]
    pub site: SitePosition,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub zones: Vec<ZoneRect>,
    #[serde(default)]
    pub materials: Vec<MaterialDecl>,
}

/// A loaded, validated building.
#[derive(Clone, Debug, PartialEq)]
pub struct Building {
    pub grid: BuildingGrid,
    pub materials: MaterialField,
    pub config: SimulationConfig,
    pub site: SitePosition,
    /// Heat source per CV [W].
    pub heat_source: Array2<f64>,
    pub doc: BuildingDoc,
    /// Directory relative paths in the document resolve against.
    pub base_dir: Option<PathBuf>,
}

/// Parses a building document into its grid, materials and config.
pub fn load_building(text: &str) -> Result<(BuildingGrid, MaterialField, SimulationConfig)> {
    let b = Building::from_toml_str(text)?;
    Ok((b.grid, b.materials, b.config))
}

impl Building {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: BuildingDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut b = Self::from_toml_str(&text)?;
        b.base_dir = path.parent().map(Path::to_path_buf);
        Ok(b)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.doc).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_doc(doc: BuildingDoc) -> Result<Self> {
        let g = &doc.grid;
        if g.rows == 0 || g.cols == 0 {
            return Err(Error::Validation(
                "grid rows and cols must be positive".into(),
            ));
        }
        if !(g.cell_size > 0.0) {
            return Err(Error::Validation(format!(
                "cell_size must be positive, got {}",
                g.cell_size
            )));
        }
        let (rows, cols) = (g.rows, g.cols);
        let mut cv = Array2::from_elem((rows, cols), g.fill);
        let mut heat_source = Array2::zeros((rows, cols));
        for (i, zone) in doc.zones.iter().enumerate() {
            if zone.row + zone.rows > rows || zone.col + zone.cols > cols {
                return Err(Error::Validation(format!(
                    "zone {} ({}) exceeds the {rows}x{cols} grid",
                    i,
                    zone.name.as_deref().unwrap_or("unnamed")
                )));
            }
            for r in zone.row..zone.row + zone.rows {
                for c in zone.col..zone.col + zone.cols {
                    cv[[r, c]] = zone.cv_type;
                    heat_source[[r, c]] = zone.heat_source;
                }
            }
        }
        let grid = BuildingGrid::new(cv, g.cell_size, g.z)?;

        let mut assigned: Array2<Option<usize>> = Array2::from_elem((rows, cols), None);
        for (m, decl) in doc.materials.iter().enumerate() {
            for ((r, c), kind) in grid.cv_type.indexed_iter() {
                if decl.cv_types.contains(kind) || decl.rects.iter().any(|rc| rc.contains(r, c)) {
                    assigned[[r, c]] = Some(m);
                }
            }
        }
        for ((r, c), kind) in grid.cv_type.indexed_iter() {
            if kind.is_boundary() {
                assigned[[r, c]] = None;
                heat_source[[r, c]] = 0.0;
            } else if assigned[[r, c]].is_none() {
                return Err(Error::Validation(format!(
                    "cell ({r}, {c}) [{kind}] has no material"
                )));
            }
        }

        let materials = resolve_materials(&grid, &doc.materials, &assigned);
        materials.validate(&grid)?;
        doc.simulation.validate()?;
        doc.site.validate()?;

        Ok(Building {
            grid,
            materials,
            config: doc.simulation.clone(),
            site: doc.site,
            heat_source,
            doc,
            base_dir: None,
        })
    }

    /// Path of the configured exchange matrix file, if any.
    pub fn exchange_matrix_path(&self) -> Option<PathBuf> {
        let p = PathBuf::from(self.config.exchange_matrix.as_ref()?);
        Some(match (&self.base_dir, p.is_relative()) {
            (Some(base), true) => base.join(p),
            _ => p,
        })
    }
}

/// Effective conductivity across the interface between two CVs whose
/// centers are `dist` apart: half-cell conduction on each side in series with
/// an optional film resistance.
fn interface_conductivity(dist: f64, k_a: f64, k_b: f64, film_resistance: f64) -> f64 {
    if k_a <= 0.0 || k_b <= 0.0 {
        return 0.0;
    }
    dist / (0.5 * dist / k_a + 0.5 * dist / k_b + film_resistance)
}

fn resolve_materials(
    grid: &BuildingGrid,
    decls: &[MaterialDecl],
    assigned: &Array2<Option<usize>>,
) -> MaterialField {
    let (rows, cols) = grid.dim();
    let mut f = MaterialField::zeros(rows, cols);
    for ((r, c), m) in assigned.indexed_iter() {
        let Some(m) = m else { continue };
        let d = &decls[*m];
        let idx = [r, c];
        f.c[idx] = d.specific_heat;
        f.rho[idx] = d.density;
        f.emissivity[idx] = d.emissivity;
        f.absorptivity[idx] = d.absorptivity;
        f.transmissivity[idx] = d.transmissivity;
        f.tilt[idx] = d.tilt;

        let kind = grid.cv_type[idx];
        for dir in Direction::ALL {
            let slot = dir.index();
            if grid.faces_exterior(r, c, dir) {
                f.h[slot][idx] = d.exterior_convection;
                continue;
            }
            let n = grid
                .neighbor(r, c, dir)
                .expect("interior face has a neighbor");
            let Some(nm) = assigned[n] else { continue };
            let nd = &decls[nm];
            let n_kind = grid.cv_type[n];
            let film = if kind.is_air() != n_kind.is_air() {
                let solid = if kind.is_air() { nd } else { d };
                match solid.interior_convection {
                    Some(h) if h > 0.0 => 1.0 / h,
                    _ => 0.0,
                }
            } else {
                0.0
            };
            let dist = grid.center_distance(r, c, dir);
            f.k[slot][idx] = interface_conductivity(dist, d.conductivity, nd.conductivity, film);
        }
    }
    f
}
