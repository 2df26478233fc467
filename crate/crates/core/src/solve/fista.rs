use crate::error::{Error, Result};
use crate::linop::{norm_squared_estimate, LinearOperator};
use crate::solve::{clamp_box, InnerOutcome, SolveOptions, POWER_ITERS, POWER_TOL};

/// FISTA on `scale·‖Ax − b‖²` over a box, with function-value restart.
///
/// A step that would raise the objective is rejected: with momentum active
/// the momentum is reset, otherwise the Lipschitz estimate is doubled. The
/// accepted objective sequence is therefore non-increasing.
pub(crate) fn fista_box(
    op: &(impl LinearOperator + ?Sized),
    b: &[f64],
    scale: f64,
    bounds: (f64, f64),
    opts: &SolveOptions,
) -> Result<InnerOutcome> {
    let n = op.cols();
    let m = op.rows();
    let mut x = vec![0.0; n];
    clamp_box(&mut x, bounds);
    if m == 0 {
        return Ok(InnerOutcome {
            x,
            objective: 0.0,
            iterations: 0,
            converged: true,
            history: Vec::new(),
        });
    }

    let mut lip = 2.0 * scale * norm_squared_estimate(op, POWER_ITERS, POWER_TOL);
    if lip <= 0.0 {
        lip = 1.0;
    }
    let mut resid = vec![0.0; m];
    let objective = |x: &[f64], resid: &mut [f64]| -> f64 {
        op.apply(x, resid);
        scale * resid.iter().zip(b).map(|(r, bi)| (r - bi).powi(2)).sum::<f64>()
    };

    let mut fx = objective(&x, &mut resid);
    let mut history = vec![fx];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut grad = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut converged = fx == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        op.apply(&y, &mut resid);
        for (r, bi) in resid.iter_mut().zip(b) {
            *r = 2.0 * scale * (*r - bi);
        }
        op.apply_t(&resid, &mut grad);
        for ((xn, yi), g) in x_new.iter_mut().zip(&y).zip(&grad) {
            *xn = yi - g / lip;
        }
        clamp_box(&mut x_new, bounds);
        let f_new = objective(&x_new, &mut resid);
        if !f_new.is_finite() {
            return Err(Error::Diverged { iteration: iterations });
        }
        if f_new > fx {
            if t > 1.0 {
                t = 1.0;
                y.copy_from_slice(&x);
            } else {
                lip *= 2.0;
            }
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for ((yi, xn), xo) in y.iter_mut().zip(&x_new).zip(&x) {
            *yi = xn + beta * (xn - xo);
        }
        t = t_next;
        std::mem::swap(&mut x, &mut x_new);
        let f_old = fx;
        fx = f_new;
        history.push(fx);
        converged = fx == 0.0 || (f_old - fx) <= opts.tol * f_old;
    }
    Ok(InnerOutcome {
        x,
        objective: fx,
        iterations,
        converged,
        history,
    })
}
