use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Square pixel grid over the unit square. Pixel `(i, j)` (row `i`, column
/// `j`) is centred at `((j + 0.5) / side, (i + 0.5) / side)`; row index grows
/// with `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    side: usize,
}

impl Grid {
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(format!("grid side must be >= 2, got {side}")));
        }
        Ok(Grid { side })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of pixels, `side²`.
    #[inline]
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let s = self.side as f64;
        let (row, col) = (idx / self.side, idx % self.side);
        [(col as f64 + 0.5) / s, (row as f64 + 0.5) / s]
    }

    /// Pixel holding the point, with points on a pixel edge going to the
    /// larger index and the far domain edge clamped inwards.
    #[inline]
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return None;
        }
        let s = self.side as f64;
        let col = ((p[0] * s).floor() as usize).min(self.side - 1);
        let row = ((p[1] * s).floor() as usize).min(self.side - 1);
        Some(self.index(row, col))
    }
}

/// Real-valued raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: Grid,
    values: Vec<f64>,
}

impl Image {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len("image values", grid.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("image value at pixel {i} is not finite")));
        }
        Ok(Image { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Image::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Image {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let side = grid.side();
        let values = (0..grid.len()).map(|k| f(k / side, k % side)).collect();
        Image { grid, values }
    }

    /// Single pixel set to `value` on a zero background.
    pub fn impulse(grid: Grid, row: usize, col: usize, value: f64) -> Self {
        let mut img = Image::zeros(grid);
        img.values[grid.index(row, col)] = value;
        img
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn ensure_grid(&self, grid: Grid) -> Result<()> {
        if self.grid == grid {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: "grid side",
                expected: grid.side(),
                found: self.grid.side(),
            })
        }
    }
}
