//! Tensor files.
//!
//! Two encodings of one schema: JSON text for inspection and a binary
//! layout for speed. Both round-trip every value bit for bit; the reader
//! tells them apart by the leading magic bytes.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! "HDLG" | version u32 | format u8 | d u32 | d x mode size u64
//!        | rank count u32 | ranks u64... | payload length u64 | payload f64...
//! ```
//!
//! The payload is the dense values in row-major order, the CP factor blocks
//! mode after mode (term-major within a mode), or the TT cores in order,
//! each indexed `(left, i, right)` row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraElement;
use crate::cp::CpTensor;
use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::shape::Shape;
use crate::tt::{TtCore, TtTensor};

pub const FILE_VERSION: u32 = 1;
pub const MAGIC: &[u8; 4] = b"HDLG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Dense,
    Cp,
    Tt,
}

impl Format {
    fn code(self) -> u8 {
        match self {
            Format::Dense => 0,
            Format::Cp => 1,
            Format::Tt => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Format::Dense),
            1 => Ok(Format::Cp),
            2 => Ok(Format::Tt),
            _ => Err(Error::Format(format!("unknown format code {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Text,
    Binary,
}

/// A tensor in any of the three representations.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Dense(DenseTensor),
    Cp(CpTensor),
    Tt(TtTensor),
}

impl TensorData {
    pub fn format(&self) -> Format {
        match self {
            TensorData::Dense(_) => Format::Dense,
            TensorData::Cp(_) => Format::Cp,
            TensorData::Tt(_) => Format::Tt,
        }
    }

    pub fn shape(&self) -> &Shape {
        match self {
            TensorData::Dense(w) => w.shape(),
            TensorData::Cp(w) => w.shape(),
            TensorData::Tt(w) => w.shape(),
        }
    }
}

impl From<DenseTensor> for TensorData {
    fn from(w: DenseTensor) -> Self {
        TensorData::Dense(w)
    }
}

impl From<CpTensor> for TensorData {
    fn from(w: CpTensor) -> Self {
        TensorData::Cp(w)
    }
}

impl From<TtTensor> for TensorData {
    fn from(w: TtTensor) -> Self {
        TensorData::Tt(w)
    }
}

/// The schema shared by both encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub version: u32,
    pub format: Format,
    pub shape: Vec<usize>,
    /// Empty for dense, `[r]` for CP, `[r_0, ..., r_d]` for TT.
    pub ranks: Vec<usize>,
    pub payload: Vec<f64>,
}

impl TensorFile {
    pub fn from_tensor(t: &TensorData) -> Self {
        let shape = t.shape().mode_sizes().to_vec();
        let (ranks, payload) = match t {
            TensorData::Dense(w) => (Vec::new(), w.values().to_vec()),
            TensorData::Cp(w) => (vec![w.rank()], w.factors().concat()),
            TensorData::Tt(w) => (w.ranks(), w.cores().iter().flat_map(|c| c.data().iter().copied()).collect()),
        };
        Self {
            version: FILE_VERSION,
            format: t.format(),
            shape,
            ranks,
            payload,
        }
    }

    pub fn into_tensor(self) -> Result<TensorData> {
        if self.version != FILE_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        let shape = Shape::new(self.shape).map_err(|e| Error::Format(e.to_string()))?;
        let bad = |e: Error| Error::Format(e.to_string());
        match self.format {
            Format::Dense => {
                if !self.ranks.is_empty() {
                    return Err(Error::Format("dense files carry no ranks".into()));
                }
                Ok(DenseTensor::from_vec(shape, self.payload).map_err(bad)?.into())
            }
            Format::Cp => {
                let [r] = self.ranks[..] else {
                    return Err(Error::Format(format!("CP files carry one rank, got {:?}", self.ranks)));
                };
                let mut rest = &self.payload[..];
                let mut factors = Vec::with_capacity(shape.order());
                for &n in shape.mode_sizes() {
                    let len = r.checked_mul(n).filter(|&l| l <= rest.len()).ok_or_else(|| {
                        Error::Format(format!("payload too short for rank {r}"))
                    })?;
                    factors.push(rest[..len].to_vec());
                    rest = &rest[len..];
                }
                if !rest.is_empty() {
                    return Err(Error::Format(format!("{} trailing payload values", rest.len())));
                }
                Ok(CpTensor::new(shape, r, factors).map_err(bad)?.into())
            }
            Format::Tt => {
                let d = shape.order();
                if self.ranks.len() != d + 1 {
                    return Err(Error::Format(format!("TT files carry {} ranks, got {}", d + 1, self.ranks.len())));
                }
                let mut rest = &self.payload[..];
                let mut cores = Vec::with_capacity(d);
                for (k, &n) in shape.mode_sizes().iter().enumerate() {
                    let (rl, rr) = (self.ranks[k], self.ranks[k + 1]);
                    let len = rl
                        .checked_mul(n)
                        .and_then(|x| x.checked_mul(rr))
                        .filter(|&l| l <= rest.len())
                        .ok_or_else(|| Error::Format(format!("payload too short for core {k}")))?;
                    cores.push(TtCore::new(rl, n, rr, rest[..len].to_vec()).map_err(bad)?);
                    rest = &rest[len..];
                }
                if !rest.is_empty() {
                    return Err(Error::Format(format!("{} trailing payload values", rest.len())));
                }
                Ok(TtTensor::new(cores).map_err(bad)?.into())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if self.payload.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("text files cannot hold non-finite values".into()));
        }
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * (self.shape.len() + self.ranks.len() + self.payload.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.format.code());
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &n in &self.shape {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.ranks.len() as u32).to_le_bytes());
        for &r in &self.ranks {
            out.extend_from_slice(&(r as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        for x in &self.payload {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("missing magic bytes".into()));
        }
        let version = r.u32()?;
        let format = Format::from_code(r.take(1)?[0])?;
        let d = r.u32()? as usize;
        let shape = (0..d).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let nr = r.u32()? as usize;
        let ranks = (0..nr).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let len = r.usize()?;
        if len.checked_mul(8) != Some(bytes.len() - r.pos) {
            return Err(Error::Format(format!(
                "payload of {len} values does not match {} remaining bytes",
                bytes.len() - r.pos
            )));
        }
        let payload = r.rest().chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self {
            version,
            format,
            shape,
            ranks,
            payload,
        })
    }

    /// Decodes either encoding.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            Self::from_bytes(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("neither binary nor UTF-8 text".into()))?;
            Self::from_json(text)
        }
    }

    pub fn encode(&self, encoding: Encoding) -> Result<Vec<u8>> {
        match encoding {
            Encoding::Text => self.to_json().map(String::into_bytes),
            Encoding::Binary => Ok(self.to_bytes()),
        }
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("size {v} does not fit in memory")))
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

pub fn write_tensor(path: impl AsRef<Path>, t: &TensorData, encoding: Encoding) -> Result<()> {
    let bytes = TensorFile::from_tensor(t).encode(encoding)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorData> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    TensorFile::decode(&bytes)?.into_tensor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_cp, random_tt};

    fn samples() -> Vec<TensorData> {
        let shape = Shape::new(vec![3, 2, 4]).unwrap();
        vec![
            DenseTensor::from_function(shape.clone(), |m| (m.0[0] as f64 + 0.1).ln() / 3.0).unwrap().into(),
            random_cp(&shape, 2, 5).unwrap().into(),
            random_tt(&shape, 3, 5).unwrap().into(),
        ]
    }

    #[test]
    fn both_encodings_round_trip_exactly() {
        for t in samples() {
            let file = TensorFile::from_tensor(&t);
            for enc in [Encoding::Text, Encoding::Binary] {
                let bytes = file.encode(enc).unwrap();
                let back = TensorFile::decode(&bytes).unwrap().into_tensor().unwrap();
                assert_eq!(back, t, "{enc:?}");
            }
        }
    }

    #[test]
    fn text_layout() {
        let shape = Shape::new(vec![2]).unwrap();
        let t: TensorData = DenseTensor::from_vec(shape, vec![0.5, -1.0]).unwrap().into();
        let json = TensorFile::from_tensor(&t).to_json().unwrap();
        assert_eq!(json, r#"{"version":1,"format":"dense","shape":[2],"ranks":[],"payload":[0.5,-1.0]}"#);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let file = TensorFile::from_tensor(&samples()[1]);
        let mut bytes = file.to_bytes();
        bytes.pop();
        assert!(matches!(TensorFile::decode(&bytes), Err(Error::Format(_))));
        let mut short = file.clone();
        short.payload.pop();
        assert!(matches!(short.into_tensor(), Err(Error::Format(_))));
        let mut v2 = file;
        v2.version = 2;
        assert!(matches!(v2.into_tensor(), Err(Error::Format(_))));
        assert!(matches!(TensorFile::decode(b"{\"version\":1"), Err(Error::Format(_))));
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        for (k, t) in samples().into_iter().enumerate() {
            let p = dir.path().join(format!("t{k}.hdlg"));
            write_tensor(&p, &t, Encoding::Binary).unwrap();
            assert_eq!(read_tensor(&p).unwrap(), t);
        }
    }
}
