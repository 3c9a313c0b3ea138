//! Binary checkpoint format.
//!
//! ```text
//! magic            7 bytes  "SELNET1"
//! version          u8       1
//! config block     feature_dim u32, steps u32, embed_dim u32,
//!                  selector u8, fab u8, resblock u8, fab_step_source u8,
//!                  attention_scope u8,
//!                  seed u64, bn_momentum f64, bn_epsilon f64
//! record count     u32
//! records          name_len u16, name (UTF-8), rows u32, cols u32,
//!                  rows*cols f64 values
//! ```
//!
//! All integers and reals are little-endian. Records cover every parameter
//! and batch-norm running statistic in traversal order, so a round trip is
//! bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use super::config::{AttentionScope, FabStepSource, FabVariant, ResBlockVariant, SelectorNetConfig, SelectorVariant};
use super::model::SelectorNet;
use crate::error::{CheckpointError, Error, Result};
use crate::numeric::layers::{BN_EPSILON, BN_MOMENTUM};
use crate::numeric::module::{Module, Tensor, TensorMut};
use crate::numeric::Matrix;

pub const MAGIC: &[u8; 7] = b"SELNET1";
pub const VERSION: u8 = 1;

pub fn encode(model: &SelectorNet) -> Vec<u8> {
    let c = model.config();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(c.feature_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(c.steps as u32).to_le_bytes());
    buf.extend_from_slice(&(c.embed_dim as u32).to_le_bytes());
    buf.push(c.selector.code());
    buf.push(c.fab.code());
    buf.push(c.resblock.code());
    buf.push(c.fab_step_source.code());
    buf.push(c.attention_scope.code());
    buf.extend_from_slice(&c.seed.to_le_bytes());
    buf.extend_from_slice(&BN_MOMENTUM.to_le_bytes());
    buf.extend_from_slice(&BN_EPSILON.to_le_bytes());

    let mut records: Vec<(String, Matrix)> = Vec::new();
    model.visit("", &mut |name, t| {
        let m = match t {
            Tensor::Param(p) => p.value.clone(),
            Tensor::Buffer(b) => b.clone(),
        };
        records.push((name.to_owned(), m));
    });
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, m) in records {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        for v in m.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64(what)?))
    }
}

fn bad(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Malformed(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<SelectorNet, CheckpointError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cur.u8("version")?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let feature_dim = cur.u32("config")? as usize;
    let steps = cur.u32("config")? as usize;
    let embed_dim = cur.u32("config")? as usize;
    let selector = SelectorVariant::from_code(cur.u8("config")?).ok_or_else(|| bad("selector variant"))?;
    let fab = FabVariant::from_code(cur.u8("config")?).ok_or_else(|| bad("fab variant"))?;
    let resblock = ResBlockVariant::from_code(cur.u8("config")?).ok_or_else(|| bad("resblock variant"))?;
    let fab_step_source =
        FabStepSource::from_code(cur.u8("config")?).ok_or_else(|| bad("fab step source"))?;
    let attention_scope =
        AttentionScope::from_code(cur.u8("config")?).ok_or_else(|| bad("attention scope"))?;
    let seed = cur.u64("config")?;
    let momentum = cur.f64("config")?;
    let epsilon = cur.f64("config")?;

    let config = SelectorNetConfig {
        feature_dim,
        steps,
        embed_dim,
        selector,
        fab,
        resblock,
        fab_step_source,
        attention_scope,
        seed,
    };
    let mut model = SelectorNet::new(config).map_err(|e| bad(e.to_string()))?;

    let count = cur.u32("record count")? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = cur.u16("record name")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "record name")?)
            .map_err(|_| bad("record name is not UTF-8"))?
            .to_owned();
        let rows = cur.u32("record shape")? as usize;
        let cols = cur.u32("record shape")? as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| bad("record size overflow"))?;
        let raw = cur.take(len, "record data")?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        records.push((name, rows, cols, data));
    }
    if cur.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }

    let mut expected = 0usize;
    let mut error: Option<CheckpointError> = None;
    let mut iter = records.into_iter();
    model.visit_mut("", &mut |name, t| {
        expected += 1;
        if error.is_some() {
            return;
        }
        let Some((rname, rows, cols, data)) = iter.next() else {
            error = Some(bad(format!("missing record {name}")));
            return;
        };
        let target: &mut Matrix = match t {
            TensorMut::Param(p) => &mut p.value,
            TensorMut::Buffer(b) => b,
        };
        if rname != name || (rows, cols) != target.shape() {
            error = Some(bad(format!(
                "record {rname} {rows}x{cols} does not match {name} {:?}",
                target.shape()
            )));
            return;
        }
        target.data_mut().copy_from_slice(&data);
    });
    if let Some(e) = error {
        return Err(e);
    }
    if expected != count {
        return Err(bad(format!("expected {expected} records, found {count}")));
    }
    set_batch_norm_constants(&mut model, momentum, epsilon);
    Ok(model)
}

fn set_batch_norm_constants(model: &mut SelectorNet, momentum: f64, epsilon: f64) {
    for step in model.steps_mut() {
        for rb in [
            &mut step.x_step_block,
            &mut step.post,
            &mut step.dec1,
            &mut step.dec2,
        ] {
            if let Some(bn) = rb.batch_norm_mut() {
                bn.momentum = momentum;
                bn.epsilon = epsilon;
            }
        }
        if let Some(a) = step.fab.attention_layers_mut() {
            for bn in [&mut a.bn_dec, &mut a.bn_step] {
                bn.momentum = momentum;
                bn.epsilon = epsilon;
            }
        }
    }
}

pub fn save_checkpoint(model: &SelectorNet, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(model))?;
    f.sync_all()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SelectorNet> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes).map_err(Error::from)
}
