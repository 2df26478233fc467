use std::path::{Path, PathBuf};

use randmesh::data::ShapeKind;
use randmesh::estimate::{EstimatorKind, TrainConfig};
use randmesh::Seed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Everything a pipeline run depends on. Missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid_side: usize,
    pub sensors: usize,
    /// Triangles per mesh, `K`.
    pub triangles: usize,
    /// Number of meshes, `Λ`.
    pub subspaces: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub shapes_per_image: (usize, usize),
    pub shape_kinds: Vec<ShapeKind>,
    pub intensity: (f64, f64),
    /// Measurement SNR of the training split; `null` is noiseless.
    pub train_snr_db: Option<f64>,
    /// Measurement SNR of the test split; `null` is noiseless.
    pub snr_db: Option<f64>,
    pub erasure_p: f64,
    /// TV weight of the recombination solve.
    pub tv_weight: f64,
    /// TV weight of the direct baseline.
    pub direct_tv_weight: f64,
    pub max_iters: usize,
    pub warm_iters: usize,
    pub estimator: EstimatorKind,
    pub train: TrainConfig,
    pub kernel_trials: usize,
    /// Images written as side-by-side panels by `evaluate`.
    pub panels: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid_side: 32,
            sensors: 25,
            triangles: 50,
            subspaces: 10,
            train_count: 500,
            test_count: 50,
            shapes_per_image: (2, 5),
            shape_kinds: vec![ShapeKind::Ellipse, ShapeKind::Circle, ShapeKind::Rectangle],
            intensity: (0.2, 1.0),
            train_snr_db: None,
            snr_db: None,
            erasure_p: 0.0,
            tv_weight: 3e-3,
            direct_tv_weight: 1e-3,
            max_iters: 500,
            warm_iters: 300,
            estimator: EstimatorKind::PerMeshAffine,
            train: TrainConfig {
                epochs: 60,
                learning_rate: 1e-4,
                init: randmesh::estimate::Init::Projection,
                ..TrainConfig::default()
            },
            kernel_trials: 500,
            panels: 5,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Flag values that replace config fields.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub grid_side: Option<usize>,
    pub sensors: Option<usize>,
    pub triangles: Option<usize>,
    pub subspaces: Option<usize>,
    pub snr_db: Option<Option<f64>>,
    pub erasure_p: Option<f64>,
    pub tv_weight: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::from_io(p, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config {
                    field: json_field(&e),
                    message: e.to_string(),
                })?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! apply {
            ($($f:ident),*) => {$(if let Some(v) = over.$f.clone() { cfg.$f = v; })*};
        }
        apply!(grid_side, sensors, triangles, subspaces, snr_db, erasure_p, tv_weight, seed, out);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, message: String| Err(CliError::Config { field: field.into(), message });
        if self.grid_side < 2 {
            return bad("grid_side", format!("must be >= 2, got {}", self.grid_side));
        }
        if self.sensors < 2 {
            return bad("sensors", format!("must be >= 2, got {}", self.sensors));
        }
        if self.triangles < 2 {
            return bad("triangles", format!("must be >= 2, got {}", self.triangles));
        }
        if self.subspaces == 0 {
            return bad("subspaces", "must be >= 1".into());
        }
        if self.train_count == 0 || self.test_count == 0 {
            return bad("train_count", "train and test counts must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.erasure_p) {
            return bad("erasure_p", format!("must lie in [0, 1], got {}", self.erasure_p));
        }
        for (field, w) in [("tv_weight", self.tv_weight), ("direct_tv_weight", self.direct_tv_weight)] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(field, format!("must be a finite weight >= 0, got {w}"));
            }
        }
        for (field, s) in [("snr_db", self.snr_db), ("train_snr_db", self.train_snr_db)] {
            if s.is_some_and(|v| !v.is_finite()) {
                return bad(field, "use null for noiseless measurements".into());
            }
        }
        if self.max_iters == 0 || self.warm_iters == 0 {
            return bad("max_iters", "iteration budgets must be >= 1".into());
        }
        if self.kernel_trials == 0 {
            return bad("kernel_trials", "must be >= 1".into());
        }
        self.train.validate().map_err(|e| CliError::Config {
            field: "train".into(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn seed(&self) -> Seed {
        Seed(self.seed)
    }
}

/// Best-effort name of the offending field in a serde error.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `", "field `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "config".into()
}

/// Parses `inf` (or `∞`) as noiseless, anything else as dB.
pub fn parse_snr(s: &str) -> Result<Option<f64>, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" | "none" => Ok(None),
        other => other
            .parse::<f64>()
            .map(|v| v.is_finite().then_some(v))
            .map_err(|e| format!("expected a number or `inf`: {e}")),
    }
}
