use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{NetSpec, TensorInfo};
use super::NeuralError;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Descend,
    Ascend,
}

/// RMS-scaled gradient steps with global-norm clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub decay: f32,
    pub eps: f32,
    pub clip_norm: f32,
    pub square_avg: Vec<f32>,
}

impl RmsProp {
    pub fn new(len: usize) -> RmsProp {
        RmsProp { decay: 0.99, eps: 1e-5, clip_norm: 1.0, square_avg: vec![0.0; len] }
    }

    pub fn reset(&mut self) {
        self.square_avg.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f32, dir: Direction) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.square_avg.len());
        let norm = grads.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt() as f32;
        let scale = if norm > self.clip_norm { self.clip_norm / norm } else { 1.0 };
        let sign = match dir {
            Direction::Descend => -1.0,
            Direction::Ascend => 1.0,
        };
        for ((p, &g), v) in params.iter_mut().zip(grads).zip(self.square_avg.iter_mut()) {
            let g = g * scale;
            *v = self.decay * *v + (1.0 - self.decay) * g * g;
            *p += sign * lr * g / (v.sqrt() + self.eps);
        }
    }
}

/// Named parameters of one network, with optimizer state and a version
/// that increases on every update.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub spec: NetSpec,
    pub tensors: Vec<TensorInfo>,
    pub data: Vec<f32>,
    pub optimizer: RmsProp,
    pub version: u64,
}

impl ParamStore {
    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn init(spec: &NetSpec, seed: u64) -> Result<ParamStore, NeuralError> {
        let mut store = ParamStore::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &store.tensors {
            if t.is_bias() {
                continue;
            }
            let k = 1.0 / (t.shape[1] as f64).sqrt();
            for x in &mut store.data[t.offset..t.offset + t.len()] {
                *x = rng.gen_range(-k..k) as f32;
            }
        }
        Ok(store)
    }

    pub fn zeros(spec: &NetSpec) -> Result<ParamStore, NeuralError> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(ParamStore {
            spec: spec.clone(),
            data: vec![0.0; layout.total],
            optimizer: RmsProp::new(layout.total),
            tensors: layout.tensors,
            version: 0,
        })
    }

    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &self.data[t.offset..t.offset + t.len()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        let t = self.tensors.iter().find(|t| t.name == name)?;
        Some(&mut self.data[t.offset..t.offset + t.len()])
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&x| x as f64).collect()
    }

    pub fn optimize_step(&mut self, grads: &[f32], lr: f32, dir: Direction) -> Result<(), NeuralError> {
        if grads.len() != self.data.len() {
            return Err(NeuralError::ShapeMismatch { what: "gradients", expected: self.data.len(), got: grads.len() });
        }
        self.optimizer.step(&mut self.data, grads, lr, dir);
        self.version += 1;
        Ok(())
    }

    /// Writes `<dir>/<name>.json` (manifest) and `<dir>/<name>.bin`
    /// (little-endian f32, row-major).
    pub fn save(&self, dir: &Path, name: &str) -> Result<(), NeuralError> {
        self.save_with(dir, name, None)
    }

    /// Like [`ParamStore::save`], recording `config` (the run configuration)
    /// in the manifest.
    pub fn save_with(&self, dir: &Path, name: &str, config: Option<&serde_json::Value>) -> Result<(), NeuralError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format_version: CHECKPOINT_FORMAT,
            spec: self.spec.clone(),
            version: self.version,
            tensors: self
                .tensors
                .iter()
                .map(|t| ManifestTensor { name: t.name.clone(), shape: t.shape.clone(), byte_offset: t.offset * 4 })
                .collect(),
            blob: format!("{name}.bin"),
            config: config.cloned(),
        };
        let mut blob = Vec::with_capacity(self.data.len() * 4);
        for x in &self.data {
            blob.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(dir.join(format!("{name}.bin")), blob)?;
        fs::write(manifest_path(dir, name), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, name: &str) -> Result<ParamStore, NeuralError> {
        let path = manifest_path(dir, name);
        if !path.exists() {
            return Err(NeuralError::MissingCheckpoint(path));
        }
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if manifest.format_version != CHECKPOINT_FORMAT {
            return Err(NeuralError::Checkpoint(format!("unsupported format_version {}", manifest.format_version)));
        }
        let mut store = ParamStore::zeros(&manifest.spec)?;
        let expected: Vec<(String, Vec<usize>, usize)> =
            store.tensors.iter().map(|t| (t.name.clone(), t.shape.clone(), t.offset * 4)).collect();
        let got: Vec<(String, Vec<usize>, usize)> =
            manifest.tensors.iter().map(|t| (t.name.clone(), t.shape.clone(), t.byte_offset)).collect();
        if expected != got {
            return Err(NeuralError::Checkpoint("tensor table does not match spec".into()));
        }
        let blob = fs::read(dir.join(&manifest.blob))?;
        if blob.len() != store.data.len() * 4 {
            return Err(NeuralError::Checkpoint(format!("blob has {} bytes, expected {}", blob.len(), store.data.len() * 4)));
        }
        for (x, b) in store.data.iter_mut().zip(blob.chunks_exact(4)) {
            *x = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        store.version = manifest.version;
        Ok(store)
    }
}

pub fn manifest_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json"))
}

/// The run configuration recorded in a checkpoint manifest, if any.
pub fn manifest_config(dir: &Path, name: &str) -> Result<Option<serde_json::Value>, NeuralError> {
    let path = manifest_path(dir, name);
    if !path.exists() {
        return Err(NeuralError::MissingCheckpoint(path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
    Ok(manifest.config)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    spec: NetSpec,
    version: u64,
    tensors: Vec<ManifestTensor>,
    blob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestTensor {
    name: String,
    shape: Vec<usize>,
    byte_offset: usize,
}
