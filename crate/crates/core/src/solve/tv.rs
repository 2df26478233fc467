//! Anisotropic total variation with forward differences and a zero
//! difference across the last row/column.

use crate::grid::Grid;

/// `Σ |x[i][j+1] − x[i][j]| + Σ |x[i+1][j] − x[i][j]|`.
pub fn anisotropic_tv(grid: Grid, x: &[f64]) -> f64 {
    let n = grid.side();
    let mut tv = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = x[i * n + j];
            if j + 1 < n {
                tv += (x[i * n + j + 1] - v).abs();
            }
            if i + 1 < n {
                tv += (x[(i + 1) * n + j] - v).abs();
            }
        }
    }
    tv
}

/// Discrete gradient `D x` into `out` of length `2N` (horizontal, then vertical).
pub fn tv_gradient(grid: Grid, x: &[f64], out: &mut [f64]) {
    let n = grid.side();
    let len = n * n;
    let (gx, gy) = out.split_at_mut(len);
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            gx[k] = if j + 1 < n { x[k + 1] - x[k] } else { 0.0 };
            gy[k] = if i + 1 < n { x[k + n] - x[k] } else { 0.0 };
        }
    }
}

/// Adjoint `Dᵀ v` (a negative divergence).
pub fn tv_adjoint(grid: Grid, v: &[f64], out: &mut [f64]) {
    let n = grid.side();
    let len = n * n;
    let (gx, gy) = v.split_at(len);
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let mut s = 0.0;
            if j + 1 < n {
                s -= gx[k];
            }
            if j > 0 {
                s += gx[k - 1];
            }
            if i + 1 < n {
                s -= gy[k];
            }
            if i > 0 {
                s += gy[k - n];
            }
            out[k] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    #[test]
    fn adjoint_identity() {
        let g = Grid::new(7).unwrap();
        let mut rng = Seed(1).rng();
        let x: Vec<f64> = (0..49).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..98).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut dx = vec![0.0; 98];
        tv_gradient(g, &x, &mut dx);
        let mut dtv = vec![0.0; 49];
        tv_adjoint(g, &v, &mut dtv);
        let lhs: f64 = dx.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&dtv).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let l1: f64 = dx.iter().map(|d| d.abs()).sum();
        assert!((l1 - anisotropic_tv(g, &x)).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_tv() {
        let g = Grid::new(5).unwrap();
        assert_eq!(anisotropic_tv(g, &[0.3; 25]), 0.0);
    }
}
