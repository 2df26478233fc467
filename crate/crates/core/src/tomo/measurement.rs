use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::grid::Image;
use crate::linop::LinearOperator;
use crate::rng::Seed;
use crate::tomo::RayMatrix;

/// Measured traveltimes plus the erasure mask. Erased entries hold exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl Measurement {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mask = vec![false; values.len()];
        Measurement::with_mask(values, mask)
    }

    pub fn with_mask(mut values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        check_len("measurement mask", values.len(), mask.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("measurement {i} is not finite")));
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if m {
                *v = 0.0;
            }
        }
        Ok(Measurement { values, mask })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `true` marks an erased entry.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn erased_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Indices of entries that were not erased.
    pub fn kept_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.mask[i]).collect()
    }

    /// CSV with header `value,mask`; mask is 0 or 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,mask\n");
        for (v, m) in self.values.iter().zip(&self.mask) {
            writeln!(s, "{v:?},{}", *m as u8).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("value,mask") => {}
            other => return Err(Error::parse("header", format!("expected `value,mask`, found {other:?}"))),
        }
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (v, m) = line
                .split_once(',')
                .ok_or_else(|| Error::parse("row", format!("line {}: missing comma", k + 2)))?;
            values.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse("value", format!("line {}: `{v}`", k + 2)))?,
            );
            mask.push(match m.trim() {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse("mask", format!("line {}: `{other}`", k + 2))),
            });
        }
        Measurement::with_mask(values, mask)
    }
}

/// Noiseless `y = A x`.
pub fn forward(a: &RayMatrix, x: &Image) -> Result<Measurement> {
    x.ensure_grid(a.grid())?;
    let mut y = vec![0.0; a.nrows()];
    a.apply(x.values(), &mut y);
    Measurement::new(y)
}

/// Adds iid zero-mean Gaussian noise at the given SNR in dB, where the signal
/// variance is the population variance of `y`. `f64::INFINITY` is a no-op.
/// Erased entries stay at zero.
pub fn add_gaussian_noise(y: &Measurement, snr_db: f64, seed: Seed) -> Result<Measurement> {
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("snr must be finite or +inf, got {snr_db}")));
    }
    if y.len() < 2 {
        return Err(Error::invalid("noise needs at least 2 measurements"));
    }
    let n = y.len() as f64;
    let mean = y.values.iter().sum::<f64>() / n;
    let var = y.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::invalid("measurement variance is zero; SNR is undefined"));
    }
    let sigma = (var * 10f64.powf(-snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed.rng();
    let values = y
        .values
        .iter()
        .zip(&y.mask)
        .map(|(&v, &m)| {
            let e = normal.sample(&mut rng);
            if m {
                0.0
            } else {
                v + e
            }
        })
        .collect();
    Measurement::with_mask(values, y.mask.clone())
}

/// Zeroes each entry independently with probability `p` and records it in the
/// mask.
pub fn erase(y: &Measurement, p: f64, seed: Seed) -> Result<Measurement> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("erasure probability must lie in [0, 1], got {p}")));
    }
    let mut rng = seed.rng();
    let mask: Vec<bool> = y
        .mask
        .iter()
        .map(|&m| {
            let hit = rng.random::<f64>() < p;
            m || hit
        })
        .collect();
    Measurement::with_mask(y.values.clone(), mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::tomo::{build_ray_matrix, place_sensors};

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    fn ramp(n: usize) -> Measurement {
        Measurement::new((0..n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn forward_zero_constant_nonneg() {
        let g = Grid::new(16).unwrap();
        let a = build_ray_matrix(&place_sensors(12).unwrap(), g).unwrap();
        assert!(forward(&a, &Image::zeros(g)).unwrap().values().iter().all(|&v| v == 0.0));
        let y = forward(&a, &Image::constant(g, 0.8)).unwrap();
        assert!(y.values().iter().all(|v| (v - 0.8).abs() < 1e-12));
        let x = Image::from_fn(g, |i, j| ((i * 7 + j * 3) % 5) as f64);
        assert!(forward(&a, &x).unwrap().values().iter().all(|&v| v >= 0.0));
        assert!(forward(&a, &Image::zeros(Grid::new(8).unwrap())).is_err());
    }

    #[test]
    fn noise_levels() {
        let y = ramp(10_000);
        assert_eq!(add_gaussian_noise(&y, f64::INFINITY, Seed(1)).unwrap(), y);
        for (db, lo, hi) in [(0.0, 0.9, 1.1), (10.0, 0.09, 0.11)] {
            let z = add_gaussian_noise(&y, db, Seed(2)).unwrap();
            let noise: Vec<f64> = z.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
            let ratio = variance(&noise) / variance(y.values());
            assert!(ratio > lo && ratio < hi, "{db} dB: ratio {ratio}");
        }
    }

    #[test]
    fn noise_errors() {
        let flat = Measurement::new(vec![1.0; 5]).unwrap();
        assert!(add_gaussian_noise(&flat, 10.0, Seed(0)).is_err());
        assert!(add_gaussian_noise(&flat, f64::INFINITY, Seed(0)).is_ok());
        assert!(add_gaussian_noise(&Measurement::new(vec![1.0]).unwrap(), 10.0, Seed(0)).is_err());
    }

    #[test]
    fn erasure_extremes() {
        let y = ramp(50);
        assert_eq!(erase(&y, 0.0, Seed(3)).unwrap(), y);
        let z = erase(&y, 1.0, Seed(3)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(z.mask().iter().all(|&m| m));
        assert!(erase(&y, 1.5, Seed(3)).is_err());
    }

    #[test]
    fn erasure_mean_count() {
        let y = ramp(300);
        let total: usize = (0..10_000).map(|s| erase(&y, 0.125, Seed(s)).unwrap().erased_count()).sum();
        let mean = total as f64 / 10_000.0;
        assert!((mean - 37.5).abs() <= 1.0, "mean erased {mean}");
    }

    #[test]
    fn noise_then_erase_keeps_zeros() {
        let y = ramp(200);
        let z = erase(&add_gaussian_noise(&y, 10.0, Seed(4)).unwrap(), 0.3, Seed(5)).unwrap();
        let z2 = add_gaussian_noise(&z, 5.0, Seed(6)).unwrap();
        for (v, &m) in z2.values().iter().zip(z.mask()) {
            if m {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn csv_roundtrip() {
        let y = erase(&ramp(20), 0.4, Seed(9)).unwrap();
        assert_eq!(Measurement::from_csv(&y.to_csv()).unwrap(), y);
        assert!(Measurement::from_csv("v,m\n").is_err());
        assert!(Measurement::from_csv("value,mask\n1.0,2\n").is_err());
    }
}
