//! Binary checkpoint format.
//!
//! Layout (little-endian): 8-byte magic, `u32` schema version, the model
//! widths as `u64`, the position scale as `f64`, a `u64` group count, then
//! per group a `u64` tensor count and per tensor a `u64` length followed by
//! that many `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::model::{ModelConfig, PredictorModel};

pub const MAGIC: &[u8; 8] = b"SSATCKPT";
pub const SCHEMA_VERSION: u32 = 1;

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn get_usize(r: &mut impl Read) -> Result<usize> {
    usize::try_from(get_u64(r)?).map_err(|_| Error::Checkpoint("size overflow".into()))
}

pub fn write_checkpoint<T: Real>(w: &mut impl Write, model: &PredictorModel<T>) -> Result<()> {
    let c = &model.config;
    w.write_all(MAGIC)?;
    w.write_all(&SCHEMA_VERSION.to_le_bytes())?;
    for v in [
        c.embed_width,
        c.latent_other_width,
        c.conv_channels,
        c.neighbor_width,
        c.encoder_hidden,
        c.decoder_hidden,
        c.disc_hidden,
    ] {
        put_u64(w, v as u64)?;
    }
    w.write_all(&c.position_scale.to_le_bytes())?;
    let groups = model.groups();
    put_u64(w, groups.len() as u64)?;
    for g in groups {
        put_u64(w, g.tensors.len() as u64)?;
        for t in &g.tensors {
            put_u64(w, t.data.len() as u64)?;
            for v in &t.data {
                w.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<T: Real>(r: &mut impl Read) -> Result<PredictorModel<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)
        .map_err(|_| Error::Checkpoint("missing schema version".into()))?;
    let version = u32::from_le_bytes(vb);
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let mut config = ModelConfig {
        embed_width: get_usize(r)?,
        latent_other_width: get_usize(r)?,
        conv_channels: get_usize(r)?,
        neighbor_width: get_usize(r)?,
        encoder_hidden: get_usize(r)?,
        decoder_hidden: get_usize(r)?,
        disc_hidden: get_usize(r)?,
        position_scale: f64::from_bits(get_u64(r)?),
        init_seed: 0,
    };
    config.validate()?;
    config.init_seed = 0;
    let mut model = PredictorModel::<T>::new(config)?;
    let n_groups = get_usize(r)?;
    let mut groups = model.groups_mut();
    if n_groups != groups.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter groups, found {n_groups}",
            groups.len()
        )));
    }
    for (gi, g) in groups.iter_mut().enumerate() {
        let n_tensors = get_usize(r)?;
        if n_tensors != g.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "group {gi}: expected {} tensors, found {n_tensors}",
                g.tensors.len()
            )));
        }
        for t in &mut g.tensors {
            let len = get_usize(r)?;
            if len != t.data.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {}: expected {} values, found {len}",
                    t.name,
                    t.data.len()
                )));
            }
            for v in &mut t.data {
                *v = T::lit(f64::from_bits(get_u64(r)?));
            }
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("checkpoint parameters".into()));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Real>(path: &Path, model: &PredictorModel<T>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<PredictorModel<T>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(&mut r)
}
