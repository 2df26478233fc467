use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Orthogonal projector `W W†` onto the span of an `n × k` matrix with iid
/// standard normal entries. Dense; meant for small `n`.
pub fn gaussian_subspace_projector(n: usize, k: usize, seed: Seed) -> Result<DMatrix<f64>> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    if n > 256 {
        return Err(Error::invalid(format!("dense projector limited to n <= 256, got {n}")));
    }
    let mut rng = seed.rng();
    let w: DMatrix<f64> = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    // W W† = Q Qᵀ for the thin QR factor of a full-rank W
    let q = w.qr().q();
    Ok(&q * q.transpose())
}
