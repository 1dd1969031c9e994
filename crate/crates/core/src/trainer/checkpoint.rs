//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic "AMGAECKP" | version u32 | config hash [32] | epoch u64
//! rng seed [32] | rng stream u64 | rng word position u128
//! model config (u64 length + JSON) | history (u64 length + JSON lines)
//! slot count u64, then per slot:
//!   name (u64 length + utf8) | rows u64 | cols u64 | step count u64
//!   value, adam_m, adam_v as rows*cols f64 each
//! SHA-256 of everything above [32]
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use sha2::{Digest, Sha256};

use super::{EpochRecord, TrainState};
use crate::compute::{GradSlot, Tensor};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::rng::StreamRng;

const MAGIC: &[u8; 8] = b"AMGAECKP";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    out.extend_from_slice(b);
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(state: &TrainState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&state.config_hash);
    out.extend_from_slice(&(state.epoch as u64).to_le_bytes());
    out.extend_from_slice(&state.mask_rng.get_seed());
    out.extend_from_slice(&state.mask_rng.get_stream().to_le_bytes());
    out.extend_from_slice(&state.mask_rng.get_word_pos().to_le_bytes());
    put_bytes(&mut out, serde_json::to_string(&state.params.cfg).expect("config json").as_bytes());
    put_bytes(&mut out, state.history_jsonl().as_bytes());
    let slots: Vec<&GradSlot> = state.params.gen.iter().chain(&state.params.disc).collect();
    out.extend_from_slice(&(slots.len() as u64).to_le_bytes());
    for s in slots {
        put_bytes(&mut out, s.name.as_bytes());
        out.extend_from_slice(&(s.value.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(s.value.cols() as u64).to_le_bytes());
        out.extend_from_slice(&s.step_count.to_le_bytes());
        put_tensor(&mut out, &s.value);
        put_tensor(&mut out, &s.adam_m);
        put_tensor(&mut out, &s.adam_v);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(msg: &str) -> Error {
    Error::Checkpoint(msg.to_string())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() - self.pos {
            return Err(corrupt("unexpected end of data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }

    fn text(&mut self) -> Result<&'a str> {
        std::str::from_utf8(self.bytes()?).map_err(|_| corrupt("invalid utf-8"))
    }

    fn tensor(&mut self, rows: usize, cols: usize) -> Result<Tensor> {
        let n = rows.checked_mul(cols).ok_or_else(|| corrupt("tensor size overflow"))?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| corrupt("tensor size overflow"))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Tensor::from_vec(rows, cols, data)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version}, this build reads {CHECKPOINT_VERSION}"
        )));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch (truncated or corrupt file)"));
    }
    let mut r = Reader { bytes: body, pos: 12 };
    let config_hash: [u8; 32] = r.array()?;
    let epoch = r.u64()? as usize;
    let seed: [u8; 32] = r.array()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.array()?);
    let mut mask_rng = StreamRng::from_seed(seed);
    mask_rng.set_stream(stream);
    mask_rng.set_word_pos(word_pos);
    let cfg: ModelConfig = serde_json::from_str(r.text()?).map_err(|e| Error::Checkpoint(format!("model config: {e}")))?;
    let history = r
        .text()?
        .lines()
        .map(|l| serde_json::from_str::<EpochRecord>(l).map_err(|e| Error::Checkpoint(format!("history: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let count = r.u64()? as usize;
    let mut slots = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.text()?.to_string();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let step_count = r.u64()?;
        let value = r.tensor(rows, cols)?;
        let adam_m = r.tensor(rows, cols)?;
        let adam_v = r.tensor(rows, cols)?;
        let mut slot = GradSlot::new(name, value);
        slot.adam_m = adam_m;
        slot.adam_v = adam_v;
        slot.step_count = step_count;
        slots.push(slot);
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing data"));
    }
    let n_disc = 2 * cfg.disc_layers + 2;
    if slots.len() < n_disc {
        return Err(corrupt("too few parameter slots"));
    }
    let disc = slots.split_off(slots.len() - n_disc);
    let params = ModelParams { cfg, gen: slots, disc };
    let expected = crate::model::init_params(&params.cfg, crate::rng::RngStream::new(0))?;
    for (a, b) in params.gen.iter().chain(&params.disc).zip(expected.gen.iter().chain(&expected.disc)) {
        if a.name != b.name || a.value.shape() != b.value.shape() {
            return Err(Error::Checkpoint(format!(
                "slot `{}` {:?} does not match expected `{}` {:?}",
                a.name,
                a.value.shape(),
                b.name,
                b.value.shape()
            )));
        }
    }
    if params.gen.len() != expected.gen.len() {
        return Err(corrupt("parameter slot count does not match the model config"));
    }
    Ok(TrainState {
        params,
        epoch,
        mask_rng,
        history,
        timings: Vec::new(),
        config_hash,
    })
}

/// Writes atomically: a temporary sibling is renamed over `path`.
pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, encode_checkpoint(state)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
