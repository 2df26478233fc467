//! Optimization back-ends.
//!
//! * [`nnls`]: box-constrained least squares by FISTA with adaptive restart,
//!   the warm start fed to estimators.
//! * [`solve_reformulated`] / [`tv_direct`]: `‖b − Kx‖² + λ·TV(x)` over a box,
//!   with `K = Bᵀ` (stacked subspace coefficients) or `K = A` (raw rays).
//!   Chambolle–Pock when `λ > 0`, the FISTA path when `λ = 0`.
//! * [`minnorm_solve`]: `(Bᵀ)† q` by CGLS.

mod cgls;
mod fista;
mod primal_dual;
mod tv;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Image;
use crate::linop::{BasisAnalysis, LinearOperator, RowSubset};
use crate::mesh::StackedBasis;
use crate::tomo::{Measurement, RayMatrix};

pub use cgls::{cgls_min_norm, minnorm_solve, minnorm_solve_with, CglsOutcome};
pub use tv::{anisotropic_tv, tv_adjoint, tv_gradient};

/// Power-iteration budget for step sizes.
pub const POWER_ITERS: usize = 20;
pub const POWER_TOL: f64 = 1e-6;

/// How erased measurements enter the classical solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErasureMode {
    /// Remove erased rows from the system.
    #[default]
    Drop,
    /// Fit erased entries to zero, as a network would see them.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
    /// Box `[lo, hi]`. `None` means unconstrained (non-negative for `nnls`).
    pub bounds: Option<(f64, f64)>,
    pub tv_weight: f64,
    pub erasures: ErasureMode,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 1000,
            tol: 1e-9,
            bounds: Some((0.0, 1.0)),
            tv_weight: 0.0,
            erasures: ErasureMode::Drop,
        }
    }
}

impl SolveOptions {
    pub fn with_tv(mut self, weight: f64) -> Self {
        self.tv_weight = weight;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) {
                return Err(Error::invalid(format!("box needs lo < hi, got [{lo}, {hi}]")));
            }
        }
        if !(self.tv_weight >= 0.0 && self.tv_weight.is_finite()) {
            return Err(Error::invalid(format!("tv_weight must be >= 0, got {}", self.tv_weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub image: Image,
    pub objective: f64,
    pub iterations: usize,
    /// `false` when `max_iters` ran out; `image` is then the best iterate seen.
    pub converged: bool,
    /// Objective after every accepted iteration.
    pub history: Vec<f64>,
}

/// Box-constrained least squares warm start, minimizing `½‖Ax − y‖²`.
pub fn nnls(a: &RayMatrix, y: &Measurement, opts: &SolveOptions) -> Result<SolveReport> {
    let bounds = opts.bounds.unwrap_or((0.0, f64::INFINITY));
    nnls_operator(a, y, bounds, opts, a.grid())
}

/// [`nnls`] for any operator whose columns are the pixels of `grid`.
pub fn nnls_operator(
    op: &(impl LinearOperator + ?Sized),
    y: &Measurement,
    bounds: (f64, f64),
    opts: &SolveOptions,
    grid: crate::grid::Grid,
) -> Result<SolveReport> {
    opts.validate()?;
    check_len("measurement", op.rows(), y.len())?;
    check_len("operator columns", grid.len(), op.cols())?;
    let (rows, b) = select_rows(y, opts.erasures);
    let sub = RowSubset::new(op, rows);
    let out = fista::fista_box(&sub, &b, 0.5, bounds, opts)?;
    out.into_report(grid)
}

/// `argmin_{x ∈ box} ‖q − Bᵀx‖² + λ·TV(x)`.
pub fn solve_reformulated(basis: &StackedBasis, q: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    check_len("stacked coefficients", basis.total_columns(), q.len())?;
    let op = BasisAnalysis(basis);
    let bounds = opts.bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    regularized(&op, q, bounds, opts, basis.grid())
}

/// `argmin_{x ∈ box} ‖y − Ax‖² + λ·TV(x)` on the raw measurements.
pub fn tv_direct(a: &RayMatrix, y: &Measurement, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    check_len("measurement", a.nrows(), y.len())?;
    let (rows, b) = select_rows(y, opts.erasures);
    let sub = RowSubset::new(a, rows);
    let bounds = opts.bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    regularized(&sub, &b, bounds, opts, a.grid())
}

fn regularized(
    op: &(impl LinearOperator + ?Sized),
    b: &[f64],
    bounds: (f64, f64),
    opts: &SolveOptions,
    grid: crate::grid::Grid,
) -> Result<SolveReport> {
    let out = if opts.tv_weight == 0.0 {
        fista::fista_box(op, b, 1.0, bounds, opts)?
    } else {
        primal_dual::chambolle_pock_tv(op, b, grid, bounds, opts)?
    };
    out.into_report(grid)
}

fn select_rows(y: &Measurement, mode: ErasureMode) -> (Vec<usize>, Vec<f64>) {
    let rows = match mode {
        ErasureMode::Drop => y.kept_rows(),
        ErasureMode::Zero => (0..y.len()).collect(),
    };
    let b = rows.iter().map(|&r| y.values()[r]).collect();
    (rows, b)
}

/// Raw iterate plus bookkeeping from an inner solver.
pub(crate) struct InnerOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

impl InnerOutcome {
    fn into_report(self, grid: crate::grid::Grid) -> Result<SolveReport> {
        Ok(SolveReport {
            image: Image::new(grid, self.x)?,
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            history: self.history,
        })
    }
}

/// Log-spaced TV weights from 1e-4 to 1, two per decade.
pub fn default_tv_grid() -> Vec<f64> {
    (0..=8).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect()
}

/// Picks the candidate with the highest score (e.g. mean output SNR on
/// held-out images). Ties go to the smaller weight.
pub fn select_tv_weight(candidates: &[f64], mut score: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &w in candidates {
        let s = score(w)?;
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((w, s));
        }
    }
    best.ok_or_else(|| Error::invalid("no candidate TV weights"))
}

#[inline]
pub(crate) fn clamp_box(v: &mut [f64], (lo, hi): (f64, f64)) {
    for x in v {
        *x = x.clamp(lo, hi);
    }
}
