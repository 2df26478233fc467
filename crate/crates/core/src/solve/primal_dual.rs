use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linop::{norm_squared_estimate, LinearOperator};
use crate::solve::tv::{anisotropic_tv, tv_adjoint, tv_gradient};
use crate::solve::{clamp_box, InnerOutcome, SolveOptions, POWER_ITERS, POWER_TOL};

/// `‖D‖² ≤ 8` for 2-D forward differences.
const TV_NORM_SQ: f64 = 8.0;

/// Check convergence over windows of this many iterations; the primal-dual
/// objective is not monotone step to step.
const WINDOW: usize = 10;

/// Chambolle–Pock for `‖Kx − b‖² + λ‖Dx‖₁ + ι_box(x)`.
///
/// Both the data term and the TV term are dualized:
/// `u ← (u + σ(Kx̄ − b)) / (1 + σ/2)`, `v ← clip(v + σDx̄, ±λ)`,
/// `x ← Π_box(x − τ(Kᵀu + Dᵀv))`, `x̄ ← 2x_new − x`.
/// `σ = τ = 0.99/‖[K; D]‖`. Returns the iterate with the lowest objective seen.
pub(crate) fn chambolle_pock_tv(
    op: &(impl LinearOperator + ?Sized),
    b: &[f64],
    grid: Grid,
    bounds: (f64, f64),
    opts: &SolveOptions,
) -> Result<InnerOutcome> {
    let n = grid.len();
    let m = op.rows();
    let lambda = opts.tv_weight;
    let k_norm_sq = norm_squared_estimate(op, POWER_ITERS, POWER_TOL) * 1.1;
    let step = 0.99 / (k_norm_sq + TV_NORM_SQ).sqrt();

    let mut x = vec![0.0; n];
    clamp_box(&mut x, bounds);
    let mut x_bar = x.clone();
    let mut x_new = vec![0.0; n];
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; 2 * n];
    let mut kx = vec![0.0; m];
    let mut dx = vec![0.0; 2 * n];
    let mut ktu = vec![0.0; n];
    let mut dtv = vec![0.0; n];

    let objective = |x: &[f64], kx: &mut [f64]| -> f64 {
        op.apply(x, kx);
        let data: f64 = kx.iter().zip(b).map(|(a, bi)| (a - bi).powi(2)).sum();
        data + lambda * anisotropic_tv(grid, x)
    };

    let mut best_x = x.clone();
    let mut best_f = objective(&x, &mut kx);
    let mut history = vec![best_f];
    let mut window_start = best_f;
    let mut converged = best_f == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        op.apply(&x_bar, &mut kx);
        for ((ui, ki), bi) in u.iter_mut().zip(&kx).zip(b) {
            *ui = (*ui + step * (ki - bi)) / (1.0 + 0.5 * step);
        }
        tv_gradient(grid, &x_bar, &mut dx);
        for (vi, di) in v.iter_mut().zip(&dx) {
            *vi = (*vi + step * di).clamp(-lambda, lambda);
        }
        op.apply_t(&u, &mut ktu);
        tv_adjoint(grid, &v, &mut dtv);
        for (((xn, xi), a), d) in x_new.iter_mut().zip(&x).zip(&ktu).zip(&dtv) {
            *xn = xi - step * (a + d);
        }
        clamp_box(&mut x_new, bounds);
        for ((xb, xn), xi) in x_bar.iter_mut().zip(&x_new).zip(&x) {
            *xb = 2.0 * xn - xi;
        }
        std::mem::swap(&mut x, &mut x_new);

        let f = objective(&x, &mut kx);
        if !f.is_finite() {
            return Err(Error::Diverged { iteration: iterations });
        }
        if f < best_f {
            best_f = f;
            best_x.copy_from_slice(&x);
        }
        history.push(f);
        if iterations % WINDOW == 0 {
            converged = f == 0.0 || (window_start - f).abs() <= opts.tol * f;
            window_start = f;
        }
    }
    Ok(InnerOutcome {
        x: best_x,
        objective: best_f,
        iterations,
        converged,
        history,
    })
}
