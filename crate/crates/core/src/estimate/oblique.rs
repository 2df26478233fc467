use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::grid::Image;
use crate::mesh::SubspaceBasis;
use crate::tomo::{Measurement, RayMatrix};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;
/// Bound on `‖F A b_k − b_k‖∞` accepted at construction.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// The consistent linear estimator `F = B (A B)†`.
///
/// `F A` is the oblique projection onto `span B` along the null space of `A`.
#[derive(Debug, Clone)]
pub struct ObliqueOperator {
    basis: DMatrix<f64>,
    pinv: DMatrix<f64>,
    matrix: DMatrix<f64>,
    rank: usize,
    fingerprint: Option<String>,
}

/// Builds `F` for a ray matrix and a mesh basis; `A B` must have full column
/// rank.
pub fn build_oblique(a: &RayMatrix, basis: &SubspaceBasis) -> Result<ObliqueOperator> {
    build(a, basis, true)
}

/// Like [`build_oblique`] but with the truncated pseudo-inverse when `A B` is
/// rank-deficient, e.g. for triangles no ray crosses. Those directions get
/// the minimum-norm answer and consistency holds only on the observed part.
pub fn build_oblique_min_norm(a: &RayMatrix, basis: &SubspaceBasis) -> Result<ObliqueOperator> {
    build(a, basis, false)
}

fn build(a: &RayMatrix, basis: &SubspaceBasis, strict: bool) -> Result<ObliqueOperator> {
    check_len("ray matrix columns", basis.grid().len(), a.ncols())?;
    let k = basis.dim();
    let cols = basis.pixel_columns();
    let scale: Vec<f64> = basis.counts().iter().map(|&c| 1.0 / (c as f64).sqrt()).collect();
    let mut ab = DMatrix::zeros(a.nrows(), k);
    for r in 0..a.nrows() {
        for (p, v) in a.row(r) {
            let c = cols[p] as usize;
            ab[(r, c)] += v * scale[c];
        }
    }
    let mut b = DMatrix::zeros(basis.grid().len(), k);
    for (p, &c) in cols.iter().enumerate() {
        b[(p, c as usize)] = scale[c as usize];
    }
    let mut op = ObliqueOperator::from_parts(ab, b, strict)?;
    op.fingerprint = Some(basis.fingerprint());
    Ok(op)
}

impl ObliqueOperator {
    /// `F` for a dense forward matrix `a` (M×N) and orthonormal basis columns
    /// `basis` (N×K).
    pub fn from_dense(a: &DMatrix<f64>, basis: DMatrix<f64>) -> Result<Self> {
        check_len("basis rows", a.ncols(), basis.nrows())?;
        let ab = a * &basis;
        Self::from_parts(ab, basis, true)
    }

    fn from_parts(ab: DMatrix<f64>, basis: DMatrix<f64>, strict: bool) -> Result<Self> {
        let k = ab.ncols();
        if k == 0 {
            return Err(Error::invalid("empty basis"));
        }
        let svd = ab.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
        if strict && rank < k {
            return Err(Error::RankDeficient { cols: k, rank });
        }
        let pinv = if smax == 0.0 {
            DMatrix::zeros(k, ab.nrows())
        } else {
            svd.pseudo_inverse(RANK_TOL * smax).map_err(Error::invalid)?
        };
        let matrix = &basis * &pinv;
        if strict {
            let residual = (&matrix * &ab - &basis).amax();
            if residual > CONSISTENCY_TOL {
                return Err(Error::Inconsistent { context: "oblique operator", residual });
            }
        }
        Ok(ObliqueOperator {
            basis,
            pinv,
            matrix,
            rank,
            fingerprint: None,
        })
    }

    /// Numerical rank of `A B`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `F`, N×M.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Orthonormal basis columns, N×K.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    /// `F y` as a raw vector.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("measurement", self.matrix.ncols(), y.len())?;
        Ok((&self.matrix * nalgebra::DVector::from_column_slice(y)).as_slice().to_vec())
    }

    /// `Bᵀ F y = (A B)† y`.
    pub fn coeffs(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("measurement", self.pinv.ncols(), y.len())?;
        Ok((&self.pinv * nalgebra::DVector::from_column_slice(y)).as_slice().to_vec())
    }
}

/// Coefficients of the oblique estimate `F y` in the basis.
pub fn oblique_coeffs(op: &ObliqueOperator, y: &Measurement) -> Result<Vec<f64>> {
    op.coeffs(y.values())
}

/// Exact `B_λᵀ x`: the ideal coefficient target.
pub fn oracle_coeffs(basis: &SubspaceBasis, x: &Image) -> Result<Vec<f64>> {
    basis.coeffs(x)
}
