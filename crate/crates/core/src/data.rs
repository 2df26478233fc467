//! Synthetic phantoms and reconstruction quality metrics.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{Grid, Image};
use crate::io::{load_image, save_image, ImageFormat};
use crate::par::{self, Execution};
use crate::rng::Seed;

/// SNR reported for a perfect fit.
pub const SNR_CAP_DB: f64 = 300.0;

/// Residuals at or below this fraction of `‖x‖` count as a perfect fit.
const EXACT_FIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Ellipse,
    Circle,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapesConfig {
    pub count: usize,
    pub side: usize,
    /// Inclusive range of shapes per image.
    pub shapes_per_image: (usize, usize),
    pub kinds: Vec<ShapeKind>,
    /// Range of patch intensities, inside `[0, 1]`.
    pub intensity: (f64, f64),
    pub seed: Seed,
}

impl Default for ShapesConfig {
    fn default() -> Self {
        ShapesConfig {
            count: 1,
            side: 32,
            shapes_per_image: (2, 5),
            kinds: vec![ShapeKind::Ellipse, ShapeKind::Circle, ShapeKind::Rectangle],
            intensity: (0.2, 1.0),
            seed: Seed(0),
        }
    }
}

impl ShapesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("count must be >= 1"));
        }
        Grid::new(self.side)?;
        let (lo, hi) = self.shapes_per_image;
        if lo > hi {
            return Err(Error::invalid(format!("empty shapes-per-image range {lo}..={hi}")));
        }
        if hi > 0 && self.kinds.is_empty() {
            return Err(Error::invalid("no shape kinds"));
        }
        let (a, b) = self.intensity;
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return Err(Error::invalid(format!("intensity range [{a}, {b}] must lie in [0, 1]")));
        }
        Ok(())
    }

    /// Seed of image `index`.
    pub fn image_seed(&self, index: usize) -> Seed {
        self.seed.child(index as u64)
    }
}

/// A patch in unit-square coordinates, independent of the raster size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Ellipse { center: [f64; 2], axes: [f64; 2], angle: f64, value: f64 },
    Circle { center: [f64; 2], radius: f64, value: f64 },
    Rectangle { center: [f64; 2], half: [f64; 2], angle: f64, value: f64 },
}

impl Shape {
    pub fn value(&self) -> f64 {
        match *self {
            Shape::Ellipse { value, .. } | Shape::Circle { value, .. } | Shape::Rectangle { value, .. } => value,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Circle { center, radius, .. } => {
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= radius * radius
            }
            Shape::Ellipse { center, axes, angle, .. } => {
                let [u, v] = rotate_into(p, center, angle);
                (u / axes[0]).powi(2) + (v / axes[1]).powi(2) <= 1.0
            }
            Shape::Rectangle { center, half, angle, .. } => {
                let [u, v] = rotate_into(p, center, angle);
                u.abs() <= half[0] && v.abs() <= half[1]
            }
        }
    }

    fn sample(kind: ShapeKind, intensity: (f64, f64), rng: &mut ChaCha8Rng) -> Shape {
        let center = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
        let value = if intensity.0 < intensity.1 {
            rng.random_range(intensity.0..=intensity.1)
        } else {
            intensity.0
        };
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        match kind {
            ShapeKind::Circle => Shape::Circle {
                center,
                radius: rng.random_range(0.05..0.2),
                value,
            },
            ShapeKind::Ellipse => Shape::Ellipse {
                center,
                axes: [rng.random_range(0.05..0.25), rng.random_range(0.04..0.15)],
                angle,
                value,
            },
            ShapeKind::Rectangle => Shape::Rectangle {
                center,
                half: [rng.random_range(0.04..0.2), rng.random_range(0.04..0.2)],
                angle,
                value,
            },
        }
    }
}

fn rotate_into(p: [f64; 2], c: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, co) = angle.sin_cos();
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    [co * dx + s * dy, -s * dx + co * dy]
}

/// Shapes of image `index`; identical for every raster size.
pub fn sample_shapes(cfg: &ShapesConfig, index: usize) -> Vec<Shape> {
    let mut rng = cfg.image_seed(index).rng();
    let (lo, hi) = cfg.shapes_per_image;
    let count = rng.random_range(lo..=hi);
    (0..count)
        .map(|_| {
            let kind = cfg.kinds[rng.random_range(0..cfg.kinds.len())];
            Shape::sample(kind, cfg.intensity, &mut rng)
        })
        .collect()
}

/// Pixel-centre rasterization on a zero background; later shapes overwrite
/// earlier ones.
pub fn render_shapes(shapes: &[Shape], grid: Grid) -> Image {
    let mut values = vec![0.0; grid.len()];
    for (k, v) in values.iter_mut().enumerate() {
        let p = grid.center(k);
        if let Some(s) = shapes.iter().rev().find(|s| s.contains(p)) {
            *v = s.value();
        }
    }
    Image::new(grid, values).expect("finite shapes")
}

pub fn gen_shapes(cfg: &ShapesConfig) -> Result<Vec<Image>> {
    gen_shapes_with(cfg, Execution::default())
}

pub fn gen_shapes_with(cfg: &ShapesConfig, exec: Execution) -> Result<Vec<Image>> {
    cfg.validate()?;
    let grid = Grid::new(cfg.side)?;
    Ok(par::map_indexed(exec, cfg.count, |i| render_shapes(&sample_shapes(cfg, i), grid)))
}

/// Alternating 0/1 blocks, `cells × cells` of them, starting with 0.
pub fn gen_checkerboard(side: usize, cells: usize) -> Result<Image> {
    let grid = Grid::new(side)?;
    if cells == 0 || !side.is_multiple_of(cells) {
        return Err(Error::invalid(format!("{cells} cells do not divide side {side}")));
    }
    let block = side / cells;
    Ok(Image::from_fn(grid, |i, j| ((i / block + j / block) % 2) as f64))
}

/// `sup_{a,b} 20·log10(‖x‖ / ‖x − a·x̂ − b‖)` with the fit in closed form.
pub fn output_snr(x: &Image, xhat: &Image) -> Result<f64> {
    xhat.ensure_grid(x.grid())?;
    let xn = x.norm();
    if xn == 0.0 {
        return Err(Error::invalid("output SNR undefined for a zero reference"));
    }
    let (a, b) = affine_fit(x.values(), xhat.values());
    let res = x
        .values()
        .iter()
        .zip(xhat.values())
        .map(|(xi, hi)| (xi - a * hi - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(snr_db(xn, res, 20.0))
}

/// Least-squares `(a, b)` for `x ≈ a·x̂ + b`.
pub fn affine_fit(x: &[f64], xhat: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mh = xhat.iter().sum::<f64>() / n;
    let (mut sxh, mut shh) = (0.0, 0.0);
    for (xi, hi) in x.iter().zip(xhat) {
        sxh += (xi - mx) * (hi - mh);
        shh += (hi - mh) * (hi - mh);
    }
    let a = if shh > 0.0 { sxh / shh } else { 0.0 };
    (a, mx - a * mh)
}

/// `10·log10(var(clean) / var(noisy − clean))`.
pub fn input_snr(clean: &[f64], noisy: &[f64]) -> Result<f64> {
    check_len("noisy measurement", clean.len(), noisy.len())?;
    if clean.is_empty() {
        return Err(Error::invalid("input SNR of an empty vector"));
    }
    let noise: Vec<f64> = noisy.iter().zip(clean).map(|(a, b)| a - b).collect();
    let (vs, vn) = (variance(clean), variance(&noise));
    if noise.iter().all(|&e| e == 0.0) {
        return Ok(SNR_CAP_DB);
    }
    Ok(snr_db(vs, vn, 10.0))
}

fn snr_db(signal: f64, noise: f64, factor: f64) -> f64 {
    if noise <= EXACT_FIT * signal {
        return SNR_CAP_DB;
    }
    (factor * (signal / noise).log10()).min(SNR_CAP_DB)
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: ShapesConfig,
    pub images: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub file: String,
    pub seed: Seed,
}

pub fn image_file_name(index: usize) -> String {
    format!("{index:05}.f32raw")
}

/// Writes `NNNNN.f32raw` files plus `manifest.json`.
pub fn save_dataset(dir: &Path, cfg: &ShapesConfig, images: &[Image]) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        let file = image_file_name(i);
        save_image(img, dir.join(&file), ImageFormat::F32Raw)?;
        entries.push(DatasetEntry {
            file,
            seed: cfg.image_seed(i),
        });
    }
    let manifest = DatasetManifest {
        config: cfg.clone(),
        images: entries,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<Image>)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse("manifest", e.to_string()))?;
    let images = manifest
        .images
        .iter()
        .map(|e| load_image(dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, images))
}
