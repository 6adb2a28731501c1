//! Trained-model files: the config that built the model, its structure hash
//! and every parameter tensor, behind a magic and a CRC32.

use std::fs;
use std::path::Path;

use crate::codec::{open, seal, Reader, Writer};
use crate::config::{parse, Instance, ModelSpecDoc};
use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::potentials::PotentialModel;
use crate::tensor::TensorValue;

pub const MODEL_MAGIC: &[u8; 8] = b"DSMODEL1";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug)]
pub struct SavedModel {
    pub doc: ModelSpecDoc,
    pub instance: Instance,
    pub params: ParameterStore,
}

/// Names and shapes every parameter store for `model` must have, in order.
pub fn expected_parameters(model: &PotentialModel) -> Vec<(String, Vec<usize>)> {
    let mut all = model.unary_graph().parameters();
    for p in model.pairwise() {
        all.extend(p.graph().parameters());
    }
    all
}

pub fn encode_model(doc: &ModelSpecDoc, params: &ParameterStore) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(MODEL_VERSION);
    w.u64(doc.structure_hash());
    w.str(&doc.serialize());
    w.u32(params.len() as u32);
    for (name, t) in params.iter() {
        w.str(name);
        w.u32(t.shape().len() as u32);
        t.shape().iter().for_each(|&d| w.u32(d as u32));
        t.data().iter().for_each(|&v| w.f64(v));
    }
    seal(MODEL_MAGIC, &w.buf)
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    let mut r = Reader::new(open(MODEL_MAGIC, "DSMODEL1", bytes)?);
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let hash = r.u64()?;
    let doc = parse(&r.str()?)?;
    if doc.structure_hash() != hash {
        return Err(Error::Incompatible(format!(
            "stored structure hash {hash:016x} does not match the embedded config ({:016x})",
            doc.structure_hash()
        )));
    }
    let mut params = ParameterStore::new();
    for _ in 0..r.u32()? {
        let name = r.str()?;
        let shape = (0..r.u32()?).map(|_| Ok(r.u32()? as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        if n * 8 > r.remaining() {
            return Err(Error::Truncated);
        }
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        params.insert(name, TensorValue::new(shape, data)?)?;
    }
    if r.remaining() != 0 {
        return Err(Error::InvalidArgument(format!("{} unexpected trailing bytes", r.remaining())));
    }
    let instance = doc.instantiate()?;
    let expected = expected_parameters(&instance.model);
    let stored: Vec<(String, Vec<usize>)> = params.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
    if stored != expected {
        return Err(Error::Incompatible("stored tensors do not match the embedded network".into()));
    }
    Ok(SavedModel { doc, instance, params })
}

pub fn write_model(path: impl AsRef<Path>, doc: &ModelSpecDoc, params: &ParameterStore) -> Result<()> {
    fs::write(path, encode_model(doc, params))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    decode_model(&fs::read(path)?)
}
