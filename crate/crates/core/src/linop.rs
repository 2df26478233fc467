//! Matrix-free linear operators shared by the solvers.

use nalgebra::DMatrix;

use crate::mesh::StackedBasis;
use crate::rng::Seed;

pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `x = Aᵀ y`
    fn apply_t(&self, y: &[f64], x: &mut [f64]);
}


#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
    }
}

impl LinearOperator for DMatrix<f64> {
    fn rows(&self) -> usize {
        self.nrows()
    }
    fn cols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, a) in y.iter_mut().zip(self.column(j).iter()) {
                    *yi += a * xj;
                }
            }
        }
    }
    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = self.column(j).iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }
}

/// The stacked basis viewed as `Bᵀ`: images in, stacked coefficients out.
#[derive(Debug, Clone, Copy)]
pub struct BasisAnalysis<'a>(pub &'a StackedBasis);

impl LinearOperator for BasisAnalysis<'_> {
    fn rows(&self) -> usize {
        self.0.total_columns()
    }
    fn cols(&self) -> usize {
        self.0.grid().len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_t(x, y);
    }
    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        self.0.apply(y, x);
    }
}

/// Keeps a subset of the rows of an operator.
pub struct RowSubset<'a, A: LinearOperator + ?Sized> {
    inner: &'a A,
    rows: Vec<usize>,
}

impl<'a, A: LinearOperator + ?Sized> RowSubset<'a, A> {
    pub fn new(inner: &'a A, rows: Vec<usize>) -> Self {
        RowSubset { inner, rows }
    }
}

impl<A: LinearOperator + ?Sized> LinearOperator for RowSubset<'_, A> {
    fn rows(&self) -> usize {
        self.rows.len()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut full = vec![0.0; self.inner.rows()];
        self.inner.apply(x, &mut full);
        for (yi, &r) in y.iter_mut().zip(&self.rows) {
            *yi = full[r];
        }
    }
    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        let mut full = vec![0.0; self.inner.rows()];
        for (&yi, &r) in y.iter().zip(&self.rows) {
            full[r] = yi;
        }
        self.inner.apply_t(&full, x);
    }
}

/// Estimate of `‖A‖²` (largest eigenvalue of `AᵀA`) by power iteration.
pub fn norm_squared_estimate(op: &(impl LinearOperator + ?Sized), max_iters: usize, tol: f64) -> f64 {
    use rand::Rng;
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return 0.0;
    }
    let mut rng = Seed(0x7077_6572).rng();
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize(&mut v);
    let mut av = vec![0.0; op.rows()];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        op.apply(&v, &mut av);
        op.apply_t(&av, &mut w);
        let next = dot(&v, &w);
        let nw = normalize(&mut w);
        if nw == 0.0 {
            return 0.0;
        }
        std::mem::swap(&mut v, &mut w);
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}
