//! Bit-exact model checkpoints.
//!
//! Little-endian layout, every real stored as an IEEE-754 double:
//!
//! ```text
//! "TPCK"  u32 version=1  u64 seed  u32 r  u32 r′  u32 K  f64 κ
//! attention: u32 d_a, W (d_a × r, row-major), b (d_a), v (d_a)
//! encoder, decoder: u32 n_layers, then per layer u32 out, u32 in, weight (row-major), bias
//! topics: K × r′, row-major
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::attention::AttentionParams;
use crate::error::{CheckpointError, FormatError};
use crate::latent::LatentModel;
use crate::mlp::{Layer, Mlp};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"TPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model together with its attention parameters and run seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub model: LatentModel,
    pub attention: AttentionParams,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s<'a>(&mut self, xs: impl IntoIterator<Item = &'a f64>) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn mlp(&mut self, mlp: &Mlp) {
        self.u32(mlp.layers().len() as u32);
        for layer in mlp.layers() {
            self.u32(layer.weight.nrows() as u32);
            self.u32(layer.weight.ncols() as u32);
            self.f64s(layer.weight.iter());
            self.f64s(layer.bias.iter());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8], FormatError> {
        let available = self.bytes.len() - self.offset;
        if available < n {
            return Err(FormatError::Truncated {
                what,
                offset: self.offset as u64,
                needed: n as u64,
                available: available as u64,
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, FormatError> {
        let len = n.checked_mul(8).ok_or(FormatError::Header {
            offset: self.offset as u64,
            reason: format!("{what} size overflows"),
        })?;
        let raw = self.take(len, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn matrix(&mut self, rows: usize, cols: usize, what: &'static str) -> Result<Array2<f64>, FormatError> {
        let data = self.f64s(rows.saturating_mul(cols), what)?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    }
    fn mlp(&mut self, what: &'static str) -> Result<Mlp, CheckpointError> {
        let n = self.u32("layer count")? as usize;
        let mut layers = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let out = self.u32("layer shape")? as usize;
            let inp = self.u32("layer shape")? as usize;
            let weight = self.matrix(out, inp, what)?;
            let bias = Array1::from(self.f64s(out, what)?);
            layers.push(Layer { weight, bias });
        }
        Mlp::new(layers).map_err(|e| CheckpointError::Invalid(format!("{what}: {e}")))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(&CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u64(self.seed);
        w.u32(self.model.dim() as u32);
        w.u32(self.model.latent_dim() as u32);
        w.u32(self.model.num_topics() as u32);
        w.f64s([self.model.kappa()].iter());
        w.u32(self.attention.attention_dim() as u32);
        w.f64s(self.attention.w.iter());
        w.f64s(self.attention.b.iter());
        w.f64s(self.attention.v.iter());
        w.mlp(&self.model.encoder);
        w.mlp(&self.model.decoder);
        w.f64s(self.model.topics().iter());
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, offset: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != CHECKPOINT_MAGIC {
            return Err(FormatError::BadMagic {
                offset: 0,
                expected: CHECKPOINT_MAGIC,
                found: magic,
            }
            .into());
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(FormatError::UnsupportedVersion { offset: 4, version }.into());
        }
        let seed = r.u64("seed")?;
        let dim = r.u32("r")? as usize;
        let latent_dim = r.u32("r′")? as usize;
        let k = r.u32("K")? as usize;
        let kappa = r.f64s(1, "kappa")?[0];
        let d_a = r.u32("attention width")? as usize;
        let w = r.matrix(d_a, dim, "attention W")?;
        let b = Array1::from(r.f64s(d_a, "attention b")?);
        let v = Array1::from(r.f64s(d_a, "attention v")?);
        let attention = AttentionParams::new(w, b, v).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        let encoder = r.mlp("encoder")?;
        let decoder = r.mlp("decoder")?;
        if encoder.input_dim() != dim || encoder.output_dim() != latent_dim {
            return Err(CheckpointError::Invalid(format!(
                "encoder maps {} → {} but the header says {dim} → {latent_dim}",
                encoder.input_dim(),
                encoder.output_dim()
            )));
        }
        let topics = r.matrix(k, latent_dim, "topics")?;
        if r.offset != bytes.len() {
            return Err(FormatError::TrailingBytes {
                offset: r.offset as u64,
                trailing: (bytes.len() - r.offset) as u64,
            }
            .into());
        }
        // Stored topics are already unit rows; bypass renormalization so reloads stay bit-exact.
        let model = LatentModel::from_stored(encoder, decoder, topics, kappa)
            .map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        Ok(Checkpoint {
            seed,
            model,
            attention,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut file = std::fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
        file.write_all(&self.to_bytes())
            .map_err(|e| FormatError::io(path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
