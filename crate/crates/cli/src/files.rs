use std::fs;
use std::path::{Path, PathBuf};

use randmesh::mesh::TriMesh;
use randmesh::tomo::{Measurement, RayMatrix};
use randmesh::{io, Image};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SPLITS: [&str; 2] = ["train", "test"];

/// Where every stage reads and writes under `out`.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn data(&self, split: &str) -> PathBuf {
        self.root.join("data").join(split)
    }

    pub fn meshes(&self) -> PathBuf {
        self.root.join("meshes")
    }

    pub fn mesh(&self, l: usize) -> PathBuf {
        self.meshes().join(format!("mesh_{l:02}.json"))
    }

    pub fn forward(&self) -> PathBuf {
        self.root.join("forward")
    }

    pub fn rays(&self) -> PathBuf {
        self.forward().join("rays.txt")
    }

    pub fn clean(&self, split: &str) -> PathBuf {
        self.forward().join(split)
    }

    pub fn corrupt(&self, split: &str) -> PathBuf {
        self.root.join("corrupt").join(split)
    }

    pub fn warm(&self, split: &str) -> PathBuf {
        self.root.join("warm").join(split)
    }

    pub fn estimators(&self) -> PathBuf {
        self.root.join("estimators")
    }

    pub fn estimator(&self, l: usize) -> PathBuf {
        self.estimators().join(format!("est_{l:02}.bin"))
    }

    pub fn shared_estimator(&self) -> PathBuf {
        self.estimators().join("est_shared.bin")
    }

    pub fn coeffs(&self, backend: &str) -> PathBuf {
        self.root.join("coeffs").join(backend)
    }

    pub fn recon(&self, method: &str) -> PathBuf {
        self.root.join("recon").join(method)
    }

    pub fn kernel(&self) -> PathBuf {
        self.root.join("kernel")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }
}

pub fn measurement_name(i: usize) -> String {
    format!("{i:05}.csv")
}

pub fn image_name(i: usize) -> String {
    randmesh::data::image_file_name(i)
}

/// Provenance written next to every stage's outputs.
#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub outputs: Vec<String>,
}

pub fn write_run(dir: &Path, command: &str, cfg: &ExperimentConfig, outputs: Vec<String>) -> Result<(), CliError> {
    let run = RunManifest {
        command,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&run)?;
    text.push('\n');
    write(&dir.join("run.json"), text.as_bytes())
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::from_io(dir, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::from_io(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))
}

pub fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Missing(path.to_path_buf()))
    }
}

pub fn save_image(img: &Image, path: &Path) -> Result<(), CliError> {
    write(path, &io::encode_f32raw(img))
}

pub fn load_image(path: &Path) -> Result<Image, CliError> {
    require(path)?;
    Ok(io::load_image(path)?)
}

pub fn load_images(dir: &Path, count: usize) -> Result<Vec<Image>, CliError> {
    (0..count).map(|i| load_image(&dir.join(image_name(i)))).collect()
}

pub fn save_measurement(y: &Measurement, path: &Path) -> Result<(), CliError> {
    write(path, y.to_csv().as_bytes())
}

pub fn load_measurements(dir: &Path, count: usize) -> Result<Vec<Measurement>, CliError> {
    (0..count)
        .map(|i| Ok(Measurement::from_csv(&read_text(&dir.join(measurement_name(i)))?)?))
        .collect()
}

pub fn load_rays(layout: &Layout) -> Result<RayMatrix, CliError> {
    Ok(RayMatrix::from_triplets(&read_text(&layout.rays())?)?)
}

pub fn load_meshes(layout: &Layout, count: usize) -> Result<Vec<TriMesh>, CliError> {
    (0..count)
        .map(|l| Ok(TriMesh::from_json(&read_text(&layout.mesh(l))?)?))
        .collect()
}

/// Stacked coefficients as CSV rows `mesh,index,value`.
pub fn coeffs_to_csv(parts: &[Vec<f64>]) -> String {
    use std::fmt::Write;
    let mut s = String::from("mesh,index,value\n");
    for (l, part) in parts.iter().enumerate() {
        for (k, v) in part.iter().enumerate() {
            writeln!(s, "{l},{k},{v:?}").unwrap();
        }
    }
    s
}

pub fn coeffs_from_csv(text: &str, path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |line: usize, what: &str| CliError::Core(randmesh::Error::Parse {
        field: format!("{}:{line}", path.display()),
        message: what.to_string(),
    });
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("mesh,index,value") {
        return Err(bad(1, "expected header `mesh,index,value`"));
    }
    let mut parts: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let (Some(l), Some(k), Some(v), 3) = (
            f.first().and_then(|s| s.parse::<usize>().ok()),
            f.get(1).and_then(|s| s.parse::<usize>().ok()),
            f.get(2).and_then(|s| s.parse::<f64>().ok()),
            f.len(),
        ) else {
            return Err(bad(n + 2, "expected `mesh,index,value`"));
        };
        if l == parts.len() {
            parts.push(Vec::new());
        }
        if l + 1 != parts.len() || k != parts[l].len() {
            return Err(bad(n + 2, "rows out of order"));
        }
        parts[l].push(v);
    }
    Ok(parts)
}

/// Path relative to `root`, with `/` separators.
pub fn rel(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}
