use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::Grid;
use crate::linop::LinearOperator;
use crate::par::{self, Execution};
use crate::tomo::SensorArray;

/// Sparse `M × N` ray matrix in CSR layout. Entry `(r, p)` is the length of
/// ray `r` inside pixel `p` divided by the ray length, so each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RayMatrix {
    grid: Grid,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Pixel weights of the segment `p0 → p1`, normalized by its length.
///
/// Parametric traversal: the segment is cut at every crossing with a pixel
/// edge, and each piece goes to the pixel holding its midpoint. A piece that
/// runs along an edge goes to the pixel on the larger-index side.
pub fn segment_weights(p0: Point, p1: Point, grid: Grid) -> Result<Vec<(usize, f64)>> {
    if p0 == p1 {
        return Err(Error::invalid(format!("coincident ray endpoints at {p0:?}")));
    }
    for p in [p0, p1] {
        if !p.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)) {
            return Err(Error::invalid(format!("ray endpoint {p:?} outside the unit square")));
        }
    }
    let side = grid.side();
    let s = side as f64;
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let mut alphas = vec![0.0, 1.0];
    for axis in 0..2 {
        if d[axis] == 0.0 {
            continue;
        }
        for line in 0..=side {
            let a = (line as f64 / s - p0[axis]) / d[axis];
            if a > 0.0 && a < 1.0 {
                alphas.push(a);
            }
        }
    }
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    alphas.dedup();

    let mut out: Vec<(usize, f64)> = Vec::with_capacity(alphas.len());
    for w in alphas.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let p = [p0[0] + mid * d[0], p0[1] + mid * d[1]];
        let pix = grid
            .locate(p)
            .ok_or_else(|| Error::invalid(format!("ray leaves the domain at {p:?}")))?;
        out.push((pix, len));
    }
    out.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
    for (p, w) in out {
        match merged.last_mut() {
            Some(last) if last.0 == p => last.1 += w,
            _ => merged.push((p, w)),
        }
    }
    Ok(merged)
}

/// One row per unordered sensor pair, in lexicographic pair order.
pub fn build_ray_matrix(sensors: &SensorArray, grid: Grid) -> Result<RayMatrix> {
    build_ray_matrix_with(sensors, grid, Execution::default())
}

pub fn build_ray_matrix_with(sensors: &SensorArray, grid: Grid, exec: Execution) -> Result<RayMatrix> {
    let pairs: Vec<(usize, usize)> = sensors.pairs().collect();
    let pos = sensors.positions();
    let rows = par::try_map_indexed(exec, pairs.len(), |r| {
        let (i, j) = pairs[r];
        segment_weights(pos[i], pos[j], grid)
    })?;
    Ok(RayMatrix::from_rows(grid, rows))
}

impl RayMatrix {
    pub fn from_rows(grid: Grid, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                cols.push(c as u32);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        RayMatrix {
            grid,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.grid.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    /// Text triplet format: header `M N nnz`, then one `r c v` line per entry.
    pub fn to_triplets(&self) -> String {
        let mut s = String::with_capacity(24 * self.nnz() + 32);
        writeln!(s, "{} {} {}", self.nrows(), self.ncols(), self.nnz()).unwrap();
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                writeln!(s, "{r} {c} {v:?}").unwrap();
            }
        }
        s
    }

    pub fn from_triplets(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse("header", "empty matrix file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(Error::parse("header", format!("expected `M N nnz`, found `{header}`")));
        }
        let num = |field: &str, s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(field, format!("not an integer: `{s}`")))
        };
        let (m, n, nnz) = (num("M", h[0])?, num("N", h[1])?, num("nnz", h[2])?);
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n {
            return Err(Error::parse("N", format!("{n} is not a square pixel count")));
        }
        let grid = Grid::new(side).map_err(|e| Error::parse("N", e.to_string()))?;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut count = 0;
        for (k, line) in lines.enumerate() {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::parse("entry", format!("line {}: expected `r c v`", k + 2)));
            }
            let r = num("r", t[0])?;
            let c = num("c", t[1])?;
            let v: f64 = t[2]
                .parse()
                .map_err(|_| Error::parse("v", format!("not a number: `{}`", t[2])))?;
            if r >= m || c >= n {
                return Err(Error::parse("entry", format!("index ({r}, {c}) outside {m}x{n}")));
            }
            rows[r].push((c, v));
            count += 1;
        }
        if count != nnz {
            return Err(Error::parse("nnz", format!("header says {nnz} entries, found {count}")));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
        }
        Ok(RayMatrix::from_rows(grid, rows))
    }
}

impl LinearOperator for RayMatrix {
    fn rows(&self) -> usize {
        self.nrows()
    }
    fn cols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }
    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (c, v) in self.row(r) {
                    x[c] += v * yr;
                }
            }
        }
    }
}
