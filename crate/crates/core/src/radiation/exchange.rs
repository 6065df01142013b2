//! Interior long-wave exchange between the surfaces enclosing each air zone.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;

use super::STEFAN_BOLTZMANN;
use crate::building::{BuildingGrid, Direction, MaterialField};
use crate::error::{Error, Result};

/// Row-sum slack allowed by [`RadiationExchangeMatrix::validate`].
const CLOSURE_SLACK: f64 = 1e-9;

/// The face of a solid CV that looks into an air zone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorSurface {
    pub row: usize,
    pub col: usize,
    /// Direction from the solid CV toward the air it faces.
    pub face: Direction,
    /// Face length in the plan [m].
    pub length: f64,
}

/// Dense exchange coefficients: the net flux density into surface `i` is
/// `σ·Σ_j c_ij·(T_j⁴ − T_i⁴)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiationExchangeMatrix {
    surfaces: Vec<InteriorSurface>,
    coefficients: Array2<f64>,
    index: HashMap<(usize, usize, Direction), usize>,
}

impl RadiationExchangeMatrix {
    pub fn new(surfaces: Vec<InteriorSurface>, coefficients: Array2<f64>) -> Result<Self> {
        let n = surfaces.len();
        if coefficients.dim() != (n, n) {
            return Err(Error::Dimension {
                expected: n * n,
                found: coefficients.len(),
            });
        }
        let mut index = HashMap::with_capacity(n);
        for (i, s) in surfaces.iter().enumerate() {
            if index.insert((s.row, s.col, s.face), i).is_some() {
                return Err(Error::ExchangeMatrix(format!(
                    "duplicate surface ({}, {}, {})",
                    s.row, s.col, s.face
                )));
            }
        }
        let m = RadiationExchangeMatrix {
            surfaces,
            coefficients,
            index,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_surfaces(&self) -> usize {
        self.surfaces.len()
    }

    pub fn surfaces(&self) -> &[InteriorSurface] {
        &self.surfaces
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }

    pub fn surface_index(&self, row: usize, col: usize, face: Direction) -> Option<usize> {
        self.index.get(&(row, col, face)).copied()
    }

    /// Non-negative coefficients and emissivity-weighted row closure.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.coefficients.rows().into_iter().enumerate() {
            if row.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::ExchangeMatrix(format!(
                    "row {i} has a negative or non-finite coefficient"
                )));
            }
            let sum: f64 = row.sum();
            if sum > 1.0 + CLOSURE_SLACK {
                return Err(Error::ExchangeMatrix(format!("row {i} sums to {sum} > 1")));
            }
        }
        Ok(())
    }

    /// Checks that every surface is a solid CV face bordering interior air.
    pub fn check_grid(&self, grid: &BuildingGrid) -> Result<()> {
        for (i, s) in self.surfaces.iter().enumerate() {
            let fail = || {
                Err(Error::ExchangeMatrix(format!(
                    "surface {i} at ({}, {}) facing {} is not a solid face bordering interior air",
                    s.row, s.col, s.face
                )))
            };
            if s.row >= grid.rows || s.col >= grid.cols {
                return fail();
            }
            let kind = grid.cv_type[[s.row, s.col]];
            if kind.is_air() || kind.is_boundary() {
                return fail();
            }
            match grid.neighbor(s.row, s.col, s.face) {
                Some(n) if grid.cv_type[n].is_air() => {}
                _ => return fail(),
            }
        }
        Ok(())
    }

    /// Largest reciprocity defect `|A_i c_ij − A_j c_ji|`, relative to the
    /// largest `A_i c_ij`.
    pub fn reciprocity_error(&self) -> f64 {
        let n = self.n_surfaces();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.surfaces[i].length * self.coefficients[[i, j]];
                let b = self.surfaces[j].length * self.coefficients[[j, i]];
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Surface temperatures gathered from a CV temperature field.
    pub fn surface_temperatures(&self, t: &Array2<f64>) -> Vec<f64> {
        self.surfaces.iter().map(|s| t[[s.row, s.col]]).collect()
    }

    /// Adds `q_i·length_i·z` into the owning CV of every surface.
    pub fn scatter(&self, q: &[f64], z: f64, out: &mut Array2<f64>) -> Result<()> {
        if q.len() != self.n_surfaces() {
            return Err(Error::Dimension {
                expected: self.n_surfaces(),
                found: q.len(),
            });
        }
        for (s, qi) in self.surfaces.iter().zip(q) {
            out[[s.row, s.col]] += qi * s.length * z;
        }
        Ok(())
    }

    /// Writes the matrix as CSV: `surface,row,col,face,length,s0..s{n-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.n_surfaces();
        let mut header: Vec<String> = ["surface", "row", "col", "face", "length"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..n).map(|j| format!("s{j}")));
        w.write_record(&header)?;
        for (i, s) in self.surfaces.iter().enumerate() {
            let mut rec = vec![
                i.to_string(),
                s.row.to_string(),
                s.col.to_string(),
                s.face.letter().to_string(),
                s.length.to_string(),
            ];
            rec.extend(self.coefficients.row(i).iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let fixed = ["surface", "row", "col", "face", "length"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
            return Err(Error::ExchangeMatrix(format!(
                "header must start with {}",
                fixed.join(",")
            )));
        }
        let n = header.len() - fixed.len();
        let mut surfaces = Vec::with_capacity(n);
        let mut coefficients = Array2::zeros((n, n));
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::ExchangeMatrix(format!("row {i}: bad {what}"));
            if i >= n {
                return Err(Error::ExchangeMatrix(format!(
                    "more rows than the {n} surface columns"
                )));
            }
            let idx: usize = rec[0].parse().map_err(|_| bad("surface"))?;
            if idx != i {
                return Err(bad("surface index order"));
            }
            surfaces.push(InteriorSurface {
                row: rec[1].parse().map_err(|_| bad("row"))?,
                col: rec[2].parse().map_err(|_| bad("col"))?,
                face: Direction::from_letter(&rec[3]).ok_or_else(|| bad("face"))?,
                length: rec[4].parse().map_err(|_| bad("length"))?,
            });
            for j in 0..n {
                coefficients[[i, j]] = rec[fixed.len() + j]
                    .parse()
                    .map_err(|_| bad("coefficient"))?;
            }
        }
        if surfaces.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: surfaces.len(),
            });
        }
        Self::new(surfaces, coefficients)
    }
}

/// Net interior long-wave flux density [W/m²] into each surface.
pub fn apply_interior_lw(
    matrix: &RadiationExchangeMatrix,
    surface_temps: &[f64],
) -> Result<Vec<f64>> {
    let n = matrix.n_surfaces();
    if surface_temps.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: surface_temps.len(),
        });
    }
    if surface_temps.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition(
            "surface temperatures must be positive kelvin".into(),
        ));
    }
    let t4: Vec<f64> = surface_temps.iter().map(|t| t.powi(4)).collect();
    Ok(matrix
        .coefficients
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            STEFAN_BOLTZMANN
                * row
                    .iter()
                    .zip(&t4)
                    .map(|(c, tj)| c * (tj - t4[i]))
                    .sum::<f64>()
        })
        .collect())
}

/// Sparse form of the exchange matrix bound to grid cells. Applying it to a
/// temperature field yields `Q_lwx`.
#[derive(Clone, Debug)]
pub struct InteriorLwKernel {
    cells: Vec<(usize, usize)>,
    area: Vec<f64>,
    row_sum: Vec<f64>,
    row_start: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    t4: Vec<f64>,
}

impl InteriorLwKernel {
    pub fn new(matrix: &RadiationExchangeMatrix, z: f64) -> Self {
        let n = matrix.n_surfaces();
        let mut k = InteriorLwKernel {
            cells: matrix.surfaces.iter().map(|s| (s.row, s.col)).collect(),
            area: matrix.surfaces.iter().map(|s| s.length * z).collect(),
            row_sum: Vec::with_capacity(n),
            row_start: Vec::with_capacity(n + 1),
            col_idx: Vec::new(),
            values: Vec::new(),
            t4: vec![0.0; n],
        };
        for row in matrix.coefficients.rows() {
            k.row_start.push(k.values.len());
            k.row_sum.push(row.sum());
            for (j, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    k.col_idx.push(j);
                    k.values.push(c);
                }
            }
        }
        k.row_start.push(k.values.len());
        k
    }

    /// Writes `Q_lwx` for temperatures `t` into `out`.
    pub fn apply(&mut self, t: &Array2<f64>, out: &mut Array2<f64>) {
        out.fill(0.0);
        for (t4, cell) in self.t4.iter_mut().zip(&self.cells) {
            *t4 = t[*cell].powi(4);
        }
        for i in 0..self.cells.len() {
            let span = self.row_start[i]..self.row_start[i + 1];
            let incoming: f64 = self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&j, c)| c * self.t4[j])
                .sum();
            let q = STEFAN_BOLTZMANN * (incoming - self.row_sum[i] * self.t4[i]);
            out[self.cells[i]] += q * self.area[i];
        }
    }
}

type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Hottel crossed-strings view factor from segment `a` to segment `b` in a
/// 2D enclosure. Collinear segments give zero.
pub fn crossed_strings_view_factor(a: (Point, Point), b: (Point, Point)) -> f64 {
    let len = dist(a.0, a.1);
    if len == 0.0 {
        return 0.0;
    }
    let crossed = dist(a.0, b.1) + dist(a.1, b.0);
    let uncrossed = dist(a.0, b.0) + dist(a.1, b.1);
    (crossed - uncrossed).abs() / (2.0 * len)
}

/// Builds the exchange matrix for every air zone with crossed-strings view
/// factors and the two-surface emissivity factor
/// `1 / (1/ε_i + 1/ε_j − 1)`. Zones must be closed rectangles.
pub fn build_exchange_matrix_2d(
    grid: &BuildingGrid,
    mats: &MaterialField,
) -> Result<RadiationExchangeMatrix> {
    let mut surfaces = Vec::new();
    let mut segments: Vec<(Point, Point)> = Vec::new();
    let mut blocks = Vec::new();

    for zone in 0..grid.n_zones {
        let cells = grid.zone_cells(zone);
        let r0 = cells[0].0;
        let r1 = cells.iter().map(|c| c.0).max().unwrap();
        let c0 = cells.iter().map(|c| c.1).min().unwrap();
        let c1 = cells.iter().map(|c| c.1).max().unwrap();
        if cells.len() != (r1 - r0 + 1) * (c1 - c0 + 1) {
            return Err(Error::ExchangeMatrix(format!(
                "zone {zone} is not a rectangular cavity"
            )));
        }
        // plan coordinates: x east along columns, y south along rows
        let mut xs = vec![0.0];
        for c in c0..=c1 {
            xs.push(xs[xs.len() - 1] + grid.u[[r0, c]]);
        }
        let mut ys = vec![0.0];
        for r in r0..=r1 {
            ys.push(ys[ys.len() - 1] + grid.v[[r, c0]]);
        }
        let (x_end, y_end) = (xs[xs.len() - 1], ys[ys.len() - 1]);

        let start = surfaces.len();
        let mut push = |cell: Option<(usize, usize)>, face: Direction, seg: (Point, Point)| {
            let Some((r, c)) = cell.filter(|&n| {
                let k = grid.cv_type[n];
                !k.is_air() && !k.is_boundary()
            }) else {
                return Err(Error::ExchangeMatrix(format!(
                    "zone {zone} is an open cavity"
                )));
            };
            surfaces.push(InteriorSurface {
                row: r,
                col: c,
                face,
                length: dist(seg.0, seg.1),
            });
            segments.push(seg);
            Ok(())
        };
        for (i, c) in (c0..=c1).enumerate() {
            let seg = ((xs[i], 0.0), (xs[i + 1], 0.0));
            push(
                grid.neighbor(r0, c, Direction::North),
                Direction::South,
                seg,
            )?;
        }
        for (i, r) in (r0..=r1).enumerate() {
            let seg = ((x_end, ys[i]), (x_end, ys[i + 1]));
            push(grid.neighbor(r, c1, Direction::East), Direction::West, seg)?;
        }
        for (i, c) in (c0..=c1).enumerate() {
            let seg = ((xs[i], y_end), (xs[i + 1], y_end));
            push(
                grid.neighbor(r1, c, Direction::South),
                Direction::North,
                seg,
            )?;
        }
        for (i, r) in (r0..=r1).enumerate() {
            let seg = ((0.0, ys[i]), (0.0, ys[i + 1]));
            push(grid.neighbor(r, c0, Direction::West), Direction::East, seg)?;
        }
        blocks.push(start..surfaces.len());
    }

    let n = surfaces.len();
    let mut coefficients = Array2::zeros((n, n));
    let eps: Vec<f64> = surfaces
        .iter()
        .map(|s| mats.emissivity[[s.row, s.col]])
        .collect();
    for block in blocks {
        for i in block.clone() {
            let mut row: Vec<f64> = block
                .clone()
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        crossed_strings_view_factor(segments[i], segments[j])
                    }
                })
                .collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|f| *f /= sum);
            }
            for (f, j) in row.into_iter().zip(block.clone()) {
                coefficients[[i, j]] = f * effective_emissivity(eps[i], eps[j]);
            }
        }
    }
    RadiationExchangeMatrix::new(surfaces, coefficients)
}

fn effective_emissivity(e_i: f64, e_j: f64) -> f64 {
    if e_i <= 0.0 || e_j <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 / e_i + 1.0 / e_j - 1.0)
    }
}
