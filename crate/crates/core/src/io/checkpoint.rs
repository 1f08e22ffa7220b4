//! Named-tensor checkpoints: a flat little-endian payload plus a JSON sidecar
//! at `<path>.json` mapping each name to its byte offset and shape.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::animator::{Animator, AnimatorConfig};
use crate::corpus::ClassWeights;
use crate::error::{Error, Result};
use crate::io::formats::{read_bytes, write_atomic};
use crate::numeric::{AdamW, AdamWConfig, ParamStore, PlateauScheduler, RngStream, Tensor};
use crate::sed::{EpochStats, SedHead, SedHeadConfig, SedTrainConfig, SedTrainer};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub offset: u64,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format_version: u32,
    pub dtype: Dtype,
    pub payload_bytes: u64,
    pub payload_sha256: String,
    pub tensors: BTreeMap<String, TensorEntry>,
    #[serde(default)]
    pub meta: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dtype: Dtype,
    tensors: Vec<(String, Tensor)>,
    pub meta: Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".json");
    PathBuf::from(s)
}

impl Checkpoint {
    pub fn new(dtype: Dtype, meta: Value) -> Self {
        Self { dtype, tensors: Vec::new(), meta }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.iter().any(|(n, _)| *n == name) {
            return Err(Error::Input(format!("duplicate checkpoint tensor `{name}`")));
        }
        self.tensors.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Input(format!("checkpoint has no tensor `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn encode(&self) -> Result<(Vec<u8>, Sidecar)> {
        let mut payload = Vec::new();
        let mut tensors = BTreeMap::new();
        for (name, t) in &self.tensors {
            tensors.insert(name.clone(), TensorEntry { offset: payload.len() as u64, shape: t.shape().to_vec() });
            for &v in t.data() {
                match self.dtype {
                    Dtype::F64 => payload.extend_from_slice(&v.to_le_bytes()),
                    Dtype::F32 => {
                        let f = v as f32;
                        if !f.is_finite() {
                            return Err(Error::Input(format!("tensor `{name}` value {v} does not fit in f32")));
                        }
                        payload.extend_from_slice(&f.to_le_bytes());
                    }
                }
            }
        }
        let sidecar = Sidecar {
            format_version: CHECKPOINT_VERSION,
            dtype: self.dtype,
            payload_bytes: payload.len() as u64,
            payload_sha256: hex_sha256(&payload),
            tensors,
            meta: self.meta.clone(),
        };
        Ok((payload, sidecar))
    }

    /// Writes the payload, then the sidecar; each replaces its target atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let (payload, sidecar) = self.encode()?;
        write_atomic(path, &payload)?;
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        write_atomic(&sidecar_path(path), text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side_path = sidecar_path(path);
        let sidecar: Sidecar = serde_json::from_slice(&read_bytes(&side_path)?)
            .map_err(|e| Error::format(&side_path, e.to_string()))?;
        let payload = read_bytes(path)?;
        Self::decode(&payload, sidecar, path)
    }

    pub fn decode(payload: &[u8], sidecar: Sidecar, path: &Path) -> Result<Self> {
        if sidecar.format_version != CHECKPOINT_VERSION {
            return Err(Error::format(path, format!("unsupported checkpoint version {}", sidecar.format_version)));
        }
        if payload.len() as u64 != sidecar.payload_bytes || hex_sha256(payload) != sidecar.payload_sha256 {
            return Err(Error::format(path, "payload does not match its sidecar (size or sha256)"));
        }
        let width = sidecar.dtype.width();
        let mut entries: Vec<(String, TensorEntry)> = sidecar.tensors.into_iter().collect();
        entries.sort_by_key(|(_, e)| e.offset);
        let mut expected = 0u64;
        let mut tensors = Vec::with_capacity(entries.len());
        for (name, e) in entries {
            if e.offset != expected {
                return Err(Error::format(path, format!("tensor `{name}` at offset {} overlaps or leaves a gap", e.offset)));
            }
            let count: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let end = start + count * width;
            let bytes = payload
                .get(start..end)
                .ok_or_else(|| Error::format(path, format!("tensor `{name}` runs past the payload")))?;
            let data: Vec<f64> = match sidecar.dtype {
                Dtype::F64 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
                Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect(),
            };
            let t = Tensor::new(e.shape, data).map_err(|err| Error::format(path, format!("tensor `{name}`: {err}")))?;
            tensors.push((name, t));
            expected = end as u64;
        }
        if expected != payload.len() as u64 {
            return Err(Error::format(path, "payload has bytes no tensor claims"));
        }
        Ok(Self { dtype: sidecar.dtype, tensors, meta: sidecar.meta })
    }

    pub fn kind(&self) -> Option<&str> {
        self.meta.get("kind").and_then(Value::as_str)
    }

    fn meta_field<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self.meta.get(key).ok_or_else(|| Error::Input(format!("checkpoint metadata lacks `{key}`")))?;
        serde_json::from_value(v.clone()).map_err(|e| Error::Input(format!("checkpoint metadata `{key}`: {e}")))
    }

    fn expect_kind(&self, kinds: &[&str]) -> Result<()> {
        match self.kind() {
            Some(k) if kinds.contains(&k) => Ok(()),
            other => Err(Error::Input(format!("expected a {} checkpoint, found {:?}", kinds.join(" or "), other))),
        }
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn push_params(ckpt: &mut Checkpoint, store: &ParamStore) -> Result<()> {
    for p in store.iter() {
        ckpt.push(p.name.clone(), p.value.clone())?;
    }
    Ok(())
}

fn load_params(ckpt: &Checkpoint, store: &mut ParamStore) -> Result<()> {
    for p in store.iter_mut() {
        let t = ckpt.get(&p.name)?;
        if t.shape() != p.value.shape() {
            return Err(Error::dim(format!("parameter `{}`: expected {:?}, checkpoint has {:?}", p.name, p.value.shape(), t.shape())));
        }
        p.value = t.clone();
    }
    Ok(())
}

pub const SED_HEAD_KIND: &str = "sed_head";
pub const SED_TRAINER_KIND: &str = "sed_trainer";
pub const ANIMATOR_KIND: &str = "animator";

pub fn sed_head_checkpoint(head: &SedHead, dtype: Dtype) -> Result<Checkpoint> {
    let mut c = Checkpoint::new(dtype, json!({ "kind": SED_HEAD_KIND, "head": head.config }));
    push_params(&mut c, &head.store)?;
    Ok(c)
}

/// Restores the head from either a head or a trainer checkpoint.
pub fn restore_sed_head(ckpt: &Checkpoint) -> Result<SedHead> {
    ckpt.expect_kind(&[SED_HEAD_KIND, SED_TRAINER_KIND])?;
    let config: SedHeadConfig = ckpt.meta_field("head")?;
    let mut head = SedHead::zeroed(config)?;
    load_params(ckpt, &mut head.store)?;
    Ok(head)
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    counter: u128,
}

#[derive(Serialize, Deserialize)]
struct OptimizerState {
    config: AdamWConfig,
    step: u64,
}

/// Full trainer state; restoring it and continuing is bit-identical to an
/// uninterrupted run when saved as f64.
pub fn sed_trainer_checkpoint(trainer: &SedTrainer) -> Result<Checkpoint> {
    let meta = json!({
        "kind": SED_TRAINER_KIND,
        "head": trainer.head.config,
        "train": trainer.config,
        "class_weights": trainer.weights,
        "optimizer": OptimizerState { config: trainer.optimizer.config, step: trainer.optimizer.step },
        "scheduler": trainer.scheduler,
        "rng": RngState { seed: trainer.rng.seed(), counter: trainer.rng.counter() },
        "epoch": trainer.epoch,
        "history": trainer.history,
    });
    let mut c = Checkpoint::new(Dtype::F64, meta);
    push_params(&mut c, &trainer.head.store)?;
    for (p, (m, v)) in trainer.head.store.iter().zip(trainer.optimizer.first_moment.iter().zip(&trainer.optimizer.second_moment)) {
        c.push(format!("adam.m.{}", p.name), m.clone())?;
        c.push(format!("adam.v.{}", p.name), v.clone())?;
    }
    Ok(c)
}

pub fn restore_sed_trainer(ckpt: &Checkpoint) -> Result<SedTrainer> {
    ckpt.expect_kind(&[SED_TRAINER_KIND])?;
    let head = restore_sed_head(ckpt)?;
    let config: SedTrainConfig = ckpt.meta_field("train")?;
    let weights: ClassWeights = ckpt.meta_field("class_weights")?;
    let opt: OptimizerState = ckpt.meta_field("optimizer")?;
    let scheduler: PlateauScheduler = ckpt.meta_field("scheduler")?;
    let rng: RngState = ckpt.meta_field("rng")?;
    let epoch: usize = ckpt.meta_field("epoch")?;
    let history: Vec<EpochStats> = ckpt.meta_field("history")?;

    let mut optimizer = AdamW::new(opt.config, &head.store)?;
    optimizer.step = opt.step;
    for (i, p) in head.store.iter().enumerate() {
        optimizer.first_moment[i] = ckpt.get(&format!("adam.m.{}", p.name))?.clone();
        optimizer.second_moment[i] = ckpt.get(&format!("adam.v.{}", p.name))?.clone();
        if optimizer.first_moment[i].shape() != p.value.shape() || optimizer.second_moment[i].shape() != p.value.shape() {
            return Err(Error::dim(format!("optimizer moments for `{}` have the wrong shape", p.name)));
        }
    }
    let mut trainer = SedTrainer::new(head, config, weights, rng.seed)?;
    trainer.optimizer = optimizer;
    trainer.scheduler = scheduler;
    trainer.rng = RngStream::from_state(rng.seed, rng.counter);
    trainer.epoch = epoch;
    trainer.history = history;
    Ok(trainer)
}

pub fn animator_checkpoint(model: &Animator, dtype: Dtype) -> Result<Checkpoint> {
    let meta = json!({
        "kind": ANIMATOR_KIND,
        "config": model.config,
        "vertices": model.vertices,
        "lip_indices": model.lip_indices,
    });
    let mut c = Checkpoint::new(dtype, meta);
    push_params(&mut c, &model.store)?;
    Ok(c)
}

pub fn restore_animator(ckpt: &Checkpoint) -> Result<Animator> {
    ckpt.expect_kind(&[ANIMATOR_KIND])?;
    let config: AnimatorConfig = ckpt.meta_field("config")?;
    let vertices: usize = ckpt.meta_field("vertices")?;
    let lips: Vec<usize> = ckpt.meta_field("lip_indices")?;
    // Values are overwritten below; the stream only shapes the store.
    let mut model = Animator::with_topology(config, vertices, lips, &mut RngStream::new(0))?;
    load_params(ckpt, &mut model.store)?;
    Ok(model)
}
