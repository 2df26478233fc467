use crate::error::{check_len, Error, Result};
use crate::grid::Image;
use crate::linop::{norm, BasisAnalysis, LinearOperator};
use crate::mesh::StackedBasis;

/// Relative normal-equation residual at which CGLS stops.
pub const MINNORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CglsOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖Kᵀ(b − Kx)‖ / ‖Kᵀb‖` at exit.
    pub relative_residual: f64,
}

/// CGLS from `x = 0`: iterates stay in the row space of `K`, so the limit is
/// the minimum-norm least-squares solution `K† b`.
pub fn cgls_min_norm(
    op: &(impl LinearOperator + ?Sized),
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<CglsOutcome> {
    check_len("cgls right-hand side", op.rows(), b.len())?;
    let n = op.cols();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = vec![0.0; n];
    op.apply_t(&r, &mut s);
    let s0 = norm(&s);
    if s0 == 0.0 {
        return Ok(CglsOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut p = s.clone();
    let mut gamma = s0 * s0;
    let mut t = vec![0.0; op.rows()];
    for it in 1..=max_iters {
        op.apply(&p, &mut t);
        let tt: f64 = t.iter().map(|v| v * v).sum();
        if tt == 0.0 {
            break;
        }
        let alpha = gamma / tt;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, ti) in r.iter_mut().zip(&t) {
            *ri -= alpha * ti;
        }
        op.apply_t(&r, &mut s);
        let gamma_new: f64 = s.iter().map(|v| v * v).sum();
        let rel = gamma_new.sqrt() / s0;
        if !rel.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        if rel <= tol {
            return Ok(CglsOutcome {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        let beta = gamma_new / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_new;
    }
    Err(Error::Stagnated {
        iterations: max_iters,
        residual: gamma.sqrt() / s0,
    })
}

/// `x̂ = (Bᵀ)† q`, the minimum-norm solution of `Bᵀx ≈ q`.
pub fn minnorm_solve(basis: &StackedBasis, q: &[f64]) -> Result<Image> {
    let max_iters = (4 * basis.total_columns()).max(200);
    minnorm_solve_with(basis, q, MINNORM_TOL, max_iters)
}

pub fn minnorm_solve_with(basis: &StackedBasis, q: &[f64], tol: f64, max_iters: usize) -> Result<Image> {
    check_len("stacked coefficients", basis.total_columns(), q.len())?;
    let out = cgls_min_norm(&BasisAnalysis(basis), q, tol, max_iters)?;
    Image::new(basis.grid(), out.x)
}
