use std::fmt::Write as _;
use std::path::Path;

use randmesh::data::{gen_shapes, load_dataset, output_snr, save_dataset, ShapesConfig};
use randmesh::estimate::{
    build_oblique_min_norm, estimate_coeffs, oblique_coeffs, oracle_coeffs, train_ensemble, train_shared, Estimator,
    EstimatorKind, Sample, TrainConfig,
};
use randmesh::kernel::{isotropy_check, mc_expected_recon_with};
use randmesh::mesh::{mesh_with_k_triangles, StackedBasis};
use randmesh::par::try_map_indexed;
use randmesh::solve::{nnls, solve_reformulated, tv_direct, SolveOptions};
use randmesh::tomo::{add_gaussian_noise, build_ray_matrix, erase, forward, place_sensors};
use randmesh::{Execution, Grid, Image};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::files::{self, rel, Layout, SPLITS};

/// Source of the stacked coefficients fed to `reconstruct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Backend {
    Oracle,
    Oblique,
    Learned,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::Oblique => "oblique",
            Backend::Learned => "learned",
        }
    }
}

/// What `reconstruct` solves: a recombination from coefficients or the
/// direct TV baseline on raw measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Oracle,
    Oblique,
    Learned,
    Direct,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Direct, Method::Oblique, Method::Oracle, Method::Learned];

    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Oblique => "oblique",
            Method::Learned => "learned",
            Method::Direct => "direct",
        }
    }

    fn backend(self) -> Option<Backend> {
        match self {
            Method::Oracle => Some(Backend::Oracle),
            Method::Oblique => Some(Backend::Oblique),
            Method::Learned => Some(Backend::Learned),
            Method::Direct => None,
        }
    }
}

fn exec() -> Execution {
    Execution::default()
}

fn grid(cfg: &ExperimentConfig) -> Result<Grid, CliError> {
    Ok(Grid::new(cfg.grid_side)?)
}

fn split_count(cfg: &ExperimentConfig, split: &str) -> usize {
    if split == "train" {
        cfg.train_count
    } else {
        cfg.test_count
    }
}

fn stack(cfg: &ExperimentConfig, layout: &Layout) -> Result<StackedBasis, CliError> {
    let meshes = files::load_meshes(layout, cfg.subspaces)?;
    Ok(StackedBasis::from_meshes(&meshes, grid(cfg)?)?)
}

pub fn gen_data(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let mut outputs = Vec::new();
    for split in SPLITS {
        let shapes = ShapesConfig {
            count: split_count(cfg, split),
            side: cfg.grid_side,
            shapes_per_image: cfg.shapes_per_image,
            kinds: cfg.shape_kinds.clone(),
            intensity: cfg.intensity,
            seed: cfg.seed().tagged(split),
        };
        shapes.validate().map_err(|e| CliError::Config {
            field: "shapes".into(),
            message: e.to_string(),
        })?;
        let images = gen_shapes(&shapes)?;
        let dir = layout.data(split);
        let manifest = save_dataset(&dir, &shapes, &images)?;
        outputs.push(rel(&cfg.out, &dir.join("manifest.json")));
        outputs.extend(manifest.images.iter().map(|e| rel(&cfg.out, &dir.join(&e.file))));
    }
    files::write_run(&cfg.out.join("data"), "gen-data", cfg, outputs)
}

pub fn gen_mesh(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let base = cfg.seed().tagged("mesh");
    let meshes = try_map_indexed(exec(), cfg.subspaces, |l| mesh_with_k_triangles(cfg.triangles, base.child(l as u64)))?;
    let mut outputs = Vec::new();
    for (l, m) in meshes.iter().enumerate() {
        let path = layout.mesh(l);
        files::write(&path, m.to_json().as_bytes())?;
        outputs.push(rel(&cfg.out, &path));
    }
    files::write_run(&layout.meshes(), "gen-mesh", cfg, outputs)
}

pub fn forward_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let a = build_ray_matrix(&place_sensors(cfg.sensors)?, grid(cfg)?)?;
    files::write(&layout.rays(), a.to_triplets().as_bytes())?;
    let mut outputs = vec![rel(&cfg.out, &layout.rays())];
    for split in SPLITS {
        let (_, images) = load_split(&layout, split)?;
        let ys = try_map_indexed(exec(), images.len(), |i| forward(&a, &images[i]))?;
        for (i, y) in ys.iter().enumerate() {
            let path = layout.clean(split).join(files::measurement_name(i));
            files::save_measurement(y, &path)?;
            outputs.push(rel(&cfg.out, &path));
        }
    }
    files::write_run(&layout.forward(), "forward", cfg, outputs)
}

fn load_split(layout: &Layout, split: &str) -> Result<(randmesh::data::DatasetManifest, Vec<Image>), CliError> {
    let dir = layout.data(split);
    files::require(&dir.join("manifest.json"))?;
    Ok(load_dataset(&dir)?)
}

/// Noise on both splits at their own SNR; erasures on the test split only.
pub fn corrupt(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let mut outputs = Vec::new();
    for split in SPLITS {
        let n = split_count(cfg, split);
        let clean = files::load_measurements(&layout.clean(split), n)?;
        let (snr, p) = if split == "train" {
            (cfg.train_snr_db, 0.0)
        } else {
            (cfg.snr_db, cfg.erasure_p)
        };
        let noise = cfg.seed().tagged(&format!("noise-{split}"));
        let erasure = cfg.seed().tagged(&format!("erase-{split}"));
        let ys = try_map_indexed(exec(), n, |i| {
            let mut y = clean[i].clone();
            if let Some(db) = snr {
                y = add_gaussian_noise(&y, db, noise.child(i as u64))?;
            }
            if p > 0.0 {
                y = erase(&y, p, erasure.child(i as u64))?;
            }
            Ok::<_, randmesh::Error>(y)
        })?;
        for (i, y) in ys.iter().enumerate() {
            let path = layout.corrupt(split).join(files::measurement_name(i));
            files::save_measurement(y, &path)?;
            outputs.push(rel(&cfg.out, &path));
        }
    }
    files::write_run(&cfg.out.join("corrupt"), "corrupt", cfg, outputs)
}

pub fn nnls_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let a = files::load_rays(&layout)?;
    let opts = SolveOptions::default().with_max_iters(cfg.warm_iters);
    let mut outputs = Vec::new();
    for split in SPLITS {
        let ys = files::load_measurements(&layout.corrupt(split), split_count(cfg, split))?;
        let warm = try_map_indexed(exec(), ys.len(), |i| nnls(&a, &ys[i], &opts).map(|r| r.image))?;
        for (i, w) in warm.iter().enumerate() {
            let path = layout.warm(split).join(files::image_name(i));
            files::save_image(w, &path)?;
            outputs.push(rel(&cfg.out, &path));
        }
    }
    files::write_run(&cfg.out.join("warm"), "nnls", cfg, outputs)
}

pub fn train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let stack = stack(cfg, &layout)?;
    let (_, truth) = load_split(&layout, "train")?;
    let warm = files::load_images(&layout.warm("train"), truth.len())?;
    let dataset: Vec<Sample> = truth
        .into_iter()
        .zip(warm)
        .map(|(truth, warm)| Sample { truth, warm })
        .collect();
    let tc = TrainConfig {
        seed: cfg.seed().tagged("estimator").child(cfg.train.seed.value()),
        ..cfg.train.clone()
    };
    let reports = match cfg.estimator {
        EstimatorKind::PerMeshAffine => train_ensemble(&dataset, &stack, &tc, exec())?,
        EstimatorKind::SharedPooled => vec![train_shared(&dataset, &stack, &tc)?],
    };
    let mut outputs = Vec::new();
    let mut curves = String::from("mesh,epoch,train_loss,val_loss\n");
    for (l, r) in reports.iter().enumerate() {
        let path = match cfg.estimator {
            EstimatorKind::PerMeshAffine => layout.estimator(l),
            EstimatorKind::SharedPooled => layout.shared_estimator(),
        };
        files::write(&path, &r.estimator.to_bytes()?)?;
        outputs.push(rel(&cfg.out, &path));
        for (e, t) in r.train_loss.iter().enumerate() {
            let v = r.val_loss.get(e).map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(curves, "{l},{e},{t:?},{v}").unwrap();
        }
    }
    let loss = layout.estimators().join("loss.csv");
    files::write(&loss, curves.as_bytes())?;
    outputs.push(rel(&cfg.out, &loss));
    files::write_run(&layout.estimators(), "train", cfg, outputs)
}

fn load_estimators(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<Estimator>, CliError> {
    let paths = match cfg.estimator {
        EstimatorKind::PerMeshAffine => (0..cfg.subspaces).map(|l| layout.estimator(l)).collect(),
        EstimatorKind::SharedPooled => vec![layout.shared_estimator()],
    };
    paths
        .iter()
        .map(|p| {
            files::require(p)?;
            Ok(Estimator::load(p)?)
        })
        .collect()
}

pub fn estimate(cfg: &ExperimentConfig, backend: Backend) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let stack = stack(cfg, &layout)?;
    let n = cfg.test_count;
    let parts: Vec<Vec<Vec<f64>>> = match backend {
        Backend::Oracle => {
            let (_, truth) = load_split(&layout, "test")?;
            try_map_indexed(exec(), n.min(truth.len()), |i| {
                stack.bases().iter().map(|b| oracle_coeffs(b, &truth[i])).collect()
            })?
        }
        Backend::Oblique => {
            let a = files::load_rays(&layout)?;
            let ys = files::load_measurements(&layout.corrupt("test"), n)?;
            let ops = try_map_indexed(exec(), stack.len(), |l| build_oblique_min_norm(&a, &stack.bases()[l]))?;
            try_map_indexed(exec(), n, |i| ops.iter().map(|op| oblique_coeffs(op, &ys[i])).collect())?
        }
        Backend::Learned => {
            let ests = load_estimators(cfg, &layout)?;
            let warm = files::load_images(&layout.warm("test"), n)?;
            try_map_indexed(exec(), n, |i| {
                stack
                    .bases()
                    .iter()
                    .enumerate()
                    .map(|(l, b)| estimate_coeffs(&ests[if ests.len() == 1 { 0 } else { l }], b, &warm[i]))
                    .collect()
            })?
        }
    };
    let dir = layout.coeffs(backend.name());
    let mut outputs = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        let path = dir.join(files::measurement_name(i));
        files::write(&path, files::coeffs_to_csv(p).as_bytes())?;
        outputs.push(rel(&cfg.out, &path));
    }
    files::write_run(&dir, &format!("estimate --backend {}", backend.name()), cfg, outputs)
}

pub fn reconstruct(cfg: &ExperimentConfig, method: Method) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let n = cfg.test_count;
    let images = match method.backend() {
        Some(backend) => {
            let stack = stack(cfg, &layout)?;
            let dir = layout.coeffs(backend.name());
            let qs = (0..n)
                .map(|i| {
                    let path = dir.join(files::measurement_name(i));
                    let parts = files::coeffs_from_csv(&files::read_text(&path)?, &path)?;
                    Ok(stack.stack(&parts)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let opts = SolveOptions::default().with_tv(cfg.tv_weight).with_max_iters(cfg.max_iters);
            try_map_indexed(exec(), n, |i| solve_reformulated(&stack, &qs[i], &opts).map(|r| r.image))?
        }
        None => {
            let a = files::load_rays(&layout)?;
            let ys = files::load_measurements(&layout.corrupt("test"), n)?;
            let opts = SolveOptions::default()
                .with_tv(cfg.direct_tv_weight)
                .with_max_iters(cfg.max_iters);
            try_map_indexed(exec(), n, |i| tv_direct(&a, &ys[i], &opts).map(|r| r.image))?
        }
    };
    let dir = layout.recon(method.name());
    let mut outputs = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let path = dir.join(files::image_name(i));
        files::save_image(img, &path)?;
        outputs.push(rel(&cfg.out, &path));
    }
    files::write_run(&dir, &format!("reconstruct --backend {}", method.name()), cfg, outputs)
}

#[derive(Serialize)]
struct KernelSummary {
    k: usize,
    lambda_count: usize,
    trials: usize,
    center: Option<(usize, usize)>,
    half_width: Option<f64>,
    angular_cv: Option<f64>,
    isotropy_note: Option<String>,
}

pub fn kernel_mc(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let g = grid(cfg)?;
    let c = cfg.grid_side / 2;
    let x = Image::impulse(g, c, c, 1.0);
    let est = mc_expected_recon_with(
        &x,
        cfg.triangles,
        cfg.subspaces,
        cfg.kernel_trials,
        cfg.seed().tagged("kernel"),
        exec(),
    )?;
    let dir = layout.kernel();
    files::save_image(&est.mean_image, &dir.join("mean.f32raw"))?;
    let mut csv = String::from("radius,mean,std,n\n");
    for b in &est.radial_profile {
        writeln!(csv, "{:?},{:?},{:?},{}", b.radius, b.mean, b.std, b.count).unwrap();
    }
    files::write(&dir.join("radial.csv"), csv.as_bytes())?;
    let iso = isotropy_check(&est).ok();
    let summary = KernelSummary {
        k: est.k,
        lambda_count: est.lambda_count,
        trials: est.trials,
        center: est.center,
        half_width: est.half_width(),
        angular_cv: iso.as_ref().map(|r| r.angular_cv),
        isotropy_note: iso.and_then(|r| r.note),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    files::write(&dir.join("summary.json"), text.as_bytes())?;
    let outputs = ["mean.f32raw", "radial.csv", "summary.json"]
        .iter()
        .map(|f| rel(&cfg.out, &dir.join(f)))
        .collect();
    files::write_run(&dir, "kernel-mc", cfg, outputs)
}

/// Output SNR of every available method, plus side-by-side panels.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let layout = Layout::new(&cfg.out);
    let (_, truth) = load_split(&layout, "test")?;
    let n = cfg.test_count.min(truth.len());
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| layout.recon(m.name()).join("run.json").exists())
        .collect();
    if methods.is_empty() {
        return Err(CliError::Missing(layout.recon("<method>")));
    }
    let recons = methods
        .iter()
        .map(|m| files::load_images(&layout.recon(m.name()), n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("image,method,snr_db\n");
    let mut means = vec![0.0; methods.len()];
    for i in 0..n {
        for (j, m) in methods.iter().enumerate() {
            let snr = output_snr(&truth[i], &recons[j][i])?;
            means[j] += snr / n as f64;
            writeln!(csv, "{i},{},{snr:.6}", m.name()).unwrap();
        }
    }
    let dir = layout.eval();
    files::write(&dir.join("snr.csv"), csv.as_bytes())?;
    let mut outputs = vec![rel(&cfg.out, &dir.join("snr.csv"))];
    for i in 0..n.min(cfg.panels) {
        let mut tiles = vec![&truth[i]];
        tiles.extend(recons.iter().map(|r| &r[i]));
        let path = dir.join(format!("panel_{i:05}.pgm"));
        files::write(&path, &panel_pgm16(&tiles))?;
        outputs.push(rel(&cfg.out, &path));
    }
    for (m, s) in methods.iter().zip(&means) {
        println!("{:<8} mean output SNR {s:.2} dB over {n} images", m.name());
    }
    files::write_run(&dir, "evaluate", cfg, outputs)
}

/// Tiles side by side with a one-pixel white gutter; values clamped to [0, 1].
pub fn panel_pgm16(tiles: &[&Image]) -> Vec<u8> {
    let side = tiles.first().map_or(0, |t| t.grid().side());
    let width = tiles.len() * side + tiles.len().saturating_sub(1);
    let mut out = format!("P5\n# columns: truth then methods\n{width} {side}\n65535\n").into_bytes();
    for r in 0..side {
        for (j, t) in tiles.iter().enumerate() {
            if j > 0 {
                out.extend_from_slice(&u16::MAX.to_be_bytes());
            }
            for c in 0..side {
                let v = (t.get(r, c).clamp(0.0, 1.0) * 65535.0).round() as u16;
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    out
}

pub fn ensure_out(out: &Path) -> Result<(), CliError> {
    files::create_dir(out)
}
