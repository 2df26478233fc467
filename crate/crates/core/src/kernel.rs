//! Monte Carlo estimate of the expected minimum-norm reconstruction from
//! random-mesh coefficients, and checks that it acts as an isotropic
//! convolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Image};
use crate::mesh::{mesh_with_k_triangles, StackedBasis};
use crate::par::{self, Execution};
use crate::rng::Seed;
use crate::solve::minnorm_solve;

/// Angular sectors used by [`isotropy_check`].
pub const SECTORS: usize = 16;
pub const ISOTROPY_CV_MAX: f64 = 0.15;
/// Trials below which the isotropy bound is not trusted.
pub const ISOTROPY_MIN_TRIALS: usize = 2000;
/// Trials summed sequentially before partial sums are combined in order.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialBin {
    /// Bin centre in pixels; the bin holds distances in `[r − ½, r + ½)`.
    pub radius: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub grid: Grid,
    pub mean_image: Image,
    /// Profile about [`center`](Self::center); empty unless `x` was a single pixel.
    pub radial_profile: Vec<RadialBin>,
    pub center: Option<(usize, usize)>,
    pub trials: usize,
    pub k: usize,
    pub lambda_count: usize,
    pub seed: Seed,
}

/// The `Λ` meshes of trial `t`. Shared across `K` and `Λ` so that sweep cells
/// see common random numbers.
fn trial_basis(grid: Grid, k: usize, lambda_count: usize, seed: Seed, t: usize) -> Result<StackedBasis> {
    let trial = seed.child(t as u64);
    let meshes = (0..lambda_count)
        .map(|l| mesh_with_k_triangles(k, trial.child(l as u64)))
        .collect::<Result<Vec<_>>>()?;
    StackedBasis::from_meshes(&meshes, grid)
}

/// `E x̂` for several images at once, every image seeing the same meshes.
pub fn mc_expected_recon_many(
    xs: &[Image],
    k: usize,
    lambda_count: usize,
    trials: usize,
    seed: Seed,
    exec: Execution,
) -> Result<Vec<Image>> {
    let Some(first) = xs.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid();
    for x in xs {
        x.ensure_grid(grid)?;
    }
    if trials == 0 || lambda_count == 0 {
        return Err(Error::invalid("need at least one trial and one mesh per trial"));
    }
    let n = grid.len();
    let chunks = trials.div_ceil(CHUNK);
    let partial = par::try_map_indexed(exec, chunks, |c| -> Result<Vec<Vec<f64>>> {
        let mut sums = vec![vec![0.0; n]; xs.len()];
        for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
            let mut run = || -> Result<()> {
                let basis = trial_basis(grid, k, lambda_count, seed, t)?;
                for (x, sum) in xs.iter().zip(sums.iter_mut()) {
                    let q = basis.coeffs(x)?;
                    let xhat = minnorm_solve(&basis, &q)?;
                    for (s, v) in sum.iter_mut().zip(xhat.values()) {
                        *s += v;
                    }
                }
                Ok(())
            };
            run().map_err(|e| Error::Trial {
                context: "expected reconstruction",
                trial: t,
                source: Box::new(e),
            })?;
        }
        Ok(sums)
    })?;
    let mut totals = vec![vec![0.0; n]; xs.len()];
    for chunk in partial {
        for (tot, s) in totals.iter_mut().zip(chunk) {
            for (a, b) in tot.iter_mut().zip(s) {
                *a += b;
            }
        }
    }
    totals
        .into_iter()
        .map(|t| Image::new(grid, t.into_iter().map(|v| v / trials as f64).collect()))
        .collect()
}

/// Averages `(Bᵀ)† Bᵀ x` over `trials` independent draws of `Λ` meshes with
/// `k` triangles each.
pub fn mc_expected_recon(x: &Image, k: usize, lambda_count: usize, trials: usize, seed: Seed) -> Result<KernelEstimate> {
    mc_expected_recon_with(x, k, lambda_count, trials, seed, Execution::default())
}

pub fn mc_expected_recon_with(
    x: &Image,
    k: usize,
    lambda_count: usize,
    trials: usize,
    seed: Seed,
    exec: Execution,
) -> Result<KernelEstimate> {
    let mean = mc_expected_recon_many(std::slice::from_ref(x), k, lambda_count, trials, seed, exec)?
        .pop()
        .expect("one image in, one out");
    let mut est = KernelEstimate::from_mean(mean, single_pixel(x), trials);
    est.k = k;
    est.lambda_count = lambda_count;
    est.seed = seed;
    Ok(est)
}

fn single_pixel(x: &Image) -> Option<(usize, usize)> {
    let side = x.grid().side();
    let mut nz = x.values().iter().enumerate().filter(|(_, &v)| v != 0.0);
    match (nz.next(), nz.next()) {
        (Some((p, _)), None) => Some((p / side, p % side)),
        _ => None,
    }
}

impl KernelEstimate {
    /// Wraps a mean image, e.g. an analytic stand-in, with its profile about
    /// `center`.
    pub fn from_mean(mean_image: Image, center: Option<(usize, usize)>, trials: usize) -> Self {
        let radial_profile = center.map(|c| radial_profile(&mean_image, c)).unwrap_or_default();
        KernelEstimate {
            grid: mean_image.grid(),
            mean_image,
            radial_profile,
            center,
            trials,
            k: 0,
            lambda_count: 0,
            seed: Seed(0),
        }
    }

    /// Radius where the profile first drops to half its central value,
    /// linearly interpolated between bins.
    pub fn half_width(&self) -> Option<f64> {
        let prof = &self.radial_profile;
        let peak = prof.first()?.mean;
        if !(peak > 0.0) {
            return None;
        }
        let half = peak / 2.0;
        for w in prof.windows(2) {
            if w[1].mean <= half {
                let t = (w[0].mean - half) / (w[0].mean - w[1].mean);
                return Some(w[0].radius + t * (w[1].radius - w[0].radius));
            }
        }
        None
    }
}

fn distance(grid: Grid, p: usize, (ci, cj): (usize, usize)) -> (f64, f64, f64) {
    let side = grid.side();
    let di = (p / side) as f64 - ci as f64;
    let dj = (p % side) as f64 - cj as f64;
    (di.hypot(dj), di, dj)
}

/// One-pixel-wide rings about `center`.
pub fn radial_profile(img: &Image, center: (usize, usize)) -> Vec<RadialBin> {
    let grid = img.grid();
    let mut bins: Vec<Vec<f64>> = Vec::new();
    for (p, &v) in img.values().iter().enumerate() {
        let (r, _, _) = distance(grid, p, center);
        let b = (r + 0.5).floor() as usize;
        if bins.len() <= b {
            bins.resize(b + 1, Vec::new());
        }
        bins[b].push(v);
    }
    bins.iter()
        .enumerate()
        .filter(|(_, vs)| !vs.is_empty())
        .map(|(b, vs)| {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let var = vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            RadialBin {
                radius: b as f64,
                mean,
                std: var.sqrt(),
                count: vs.len(),
            }
        })
        .collect()
}

fn interpolate(prof: &[RadialBin], r: f64) -> f64 {
    match prof.iter().position(|b| b.radius >= r) {
        Some(0) => prof[0].mean,
        Some(i) => {
            let (a, b) = (&prof[i - 1], &prof[i]);
            let t = (r - a.radius) / (b.radius - a.radius);
            a.mean + t * (b.mean - a.mean)
        }
        None => prof.last().map_or(0.0, |b| b.mean),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    /// Mean over rings of the coefficient of variation of sector means.
    pub angular_cv: f64,
    pub rings: usize,
    pub pass: bool,
    pub note: Option<String>,
}

/// Angular variation of the kernel over [`SECTORS`] sectors.
///
/// Every pixel value is divided by the radial profile interpolated at its
/// exact distance, so a perfectly isotropic kernel scores 0. Rings from
/// radius 1 outwards are used while the profile stays above a fifth of its
/// peak; rings with fewer than half the sectors populated are skipped.
pub fn isotropy_check(est: &KernelEstimate) -> Result<IsotropyReport> {
    let center = est
        .center
        .ok_or_else(|| Error::invalid("isotropy needs a single-pixel kernel estimate"))?;
    let prof = &est.radial_profile;
    let peak = prof.first().map_or(0.0, |b| b.mean);
    if !(peak > 0.0) {
        return Err(Error::invalid("kernel has no positive peak"));
    }
    let mut last = 1;
    while last + 1 < prof.len() && prof[last + 1].mean >= 0.2 * peak {
        last += 1;
    }
    let grid = est.grid;
    let mut sector = vec![vec![(0.0, 0usize); SECTORS]; last + 1];
    for (p, &v) in est.mean_image.values().iter().enumerate() {
        let (r, di, dj) = distance(grid, p, center);
        let b = (r + 0.5).floor() as usize;
        if b == 0 || b > last {
            continue;
        }
        let expected = interpolate(prof, r);
        if expected == 0.0 {
            continue;
        }
        let angle = di.atan2(dj) + std::f64::consts::PI;
        let s = ((angle / std::f64::consts::TAU * SECTORS as f64).floor() as usize).min(SECTORS - 1);
        let cell = &mut sector[b][s];
        cell.0 += v / expected;
        cell.1 += 1;
    }
    let mut cvs = Vec::new();
    for ring in &sector[1..] {
        let means: Vec<f64> = ring.iter().filter(|c| c.1 > 0).map(|c| c.0 / c.1 as f64).collect();
        if means.len() < SECTORS / 2 {
            continue;
        }
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / means.len() as f64;
        cvs.push(var.sqrt() / m.abs());
    }
    if cvs.is_empty() {
        return Err(Error::invalid("no ring with enough populated sectors"));
    }
    let angular_cv = cvs.iter().sum::<f64>() / cvs.len() as f64;
    let enough = est.trials >= ISOTROPY_MIN_TRIALS;
    let note = (!enough).then(|| {
        format!(
            "{} trials; Monte Carlo variance is only controlled from {ISOTROPY_MIN_TRIALS}",
            est.trials
        )
    });
    Ok(IsotropyReport {
        angular_cv,
        rings: cvs.len(),
        pass: enough && angular_cv <= ISOTROPY_CV_MAX,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionReport {
    /// Max |E x̂ − x ∗ κ̃| on the central region over max |E x̂| there.
    pub deviation: f64,
    pub within_tolerance: bool,
    /// Some support pixel lies outside the central region.
    pub boundary_affected: bool,
    /// `within_tolerance`, or excused by `boundary_affected`.
    pub pass: bool,
}

/// Rows/columns `[side/4, 3·side/4)`.
fn central(grid: Grid, p: usize) -> bool {
    let side = grid.side();
    let (i, j) = (p / side, p % side);
    let (lo, hi) = (side / 4, side - side / 4);
    (lo..hi).contains(&i) && (lo..hi).contains(&j)
}

/// Runs the Monte Carlo estimate for `x_multi` with the kernel's parameters
/// and seeds, and compares it with the superposition of the centred kernel
/// shifted to every support pixel.
pub fn convolution_consistency(x_multi: &Image, kernel: &KernelEstimate, tolerance: f64) -> Result<ConvolutionReport> {
    let center = kernel
        .center
        .ok_or_else(|| Error::invalid("superposition needs a single-pixel kernel estimate"))?;
    x_multi.ensure_grid(kernel.grid)?;
    let direct = mc_expected_recon(x_multi, kernel.k, kernel.lambda_count, kernel.trials, kernel.seed)?;
    let grid = kernel.grid;
    let superposed = superpose(x_multi, &kernel.mean_image, center);
    let (mut diff, mut peak) = (0.0f64, 0.0f64);
    for p in (0..grid.len()).filter(|&p| central(grid, p)) {
        diff = diff.max((direct.mean_image.values()[p] - superposed[p]).abs());
        peak = peak.max(direct.mean_image.values()[p].abs());
    }
    let deviation = if peak > 0.0 { diff / peak } else { diff };
    let boundary_affected = x_multi
        .values()
        .iter()
        .enumerate()
        .any(|(p, &v)| v != 0.0 && !central(grid, p));
    let within_tolerance = deviation <= tolerance;
    Ok(ConvolutionReport {
        deviation,
        within_tolerance,
        boundary_affected,
        pass: within_tolerance || boundary_affected,
    })
}

/// `Σ_p x_p · κ(· − p + c)` with zero fill.
pub fn superpose(x: &Image, kernel: &Image, (ci, cj): (usize, usize)) -> Vec<f64> {
    let side = x.grid().side() as i64;
    let mut out = vec![0.0; x.values().len()];
    for (p, &v) in x.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (pi, pj) = (p as i64 / side, p as i64 % side);
        for i in 0..side {
            for j in 0..side {
                let (ki, kj) = (i - pi + ci as i64, j - pj + cj as i64);
                if (0..side).contains(&ki) && (0..side).contains(&kj) {
                    out[(i * side + j) as usize] += v * kernel.get(ki as usize, kj as usize);
                }
            }
        }
    }
    out
}
