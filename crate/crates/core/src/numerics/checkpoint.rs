//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"TSPC"
//! version u32            (currently 1)
//! count   u32
//! count × {
//!     name_len u32, name utf-8 bytes,
//!     group    u8     (0 encoder, 1 decoder),
//!     rank     u32, dims rank × u64,
//!     values   prod(dims) × f64
//! }
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::params::{ParamGroup, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TSPC";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_params<W: Write>(params: &ParamSet, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, group, t) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&[match group {
            ParamGroup::Encoder => 0,
            ParamGroup::Decoder => 1,
        }])?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.values() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_params<R: Read>(mut input: R) -> Result<ParamSet> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let count = c.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| Error::Checkpoint("parameter name is not utf-8".into()))?
            .to_string();
        let group = match c.take(1)?[0] {
            0 => ParamGroup::Encoder,
            1 => ParamGroup::Decoder,
            g => return Err(Error::Checkpoint(format!("unknown group tag {g}"))),
        };
        let rank = c.u32()? as usize;
        let shape = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = c.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if params.id(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter `{name}`")));
        }
        params.insert(&name, group, Tensor::new(shape, values)?);
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(params)
}

pub fn save_params(params: &ParamSet, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    write_params(params, &mut bytes).expect("writing to memory");
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<ParamSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_params(&bytes[..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            tensors in prop::collection::vec(
                (prop::collection::vec(1usize..4, 0..3), any::<u64>()),
                1..5,
            )
        ) {
            let mut params = ParamSet::new();
            for (i, (shape, seed)) in tensors.iter().enumerate() {
                let n: usize = shape.iter().product();
                let values = (0..n)
                    .map(|k| f64::from_bits(seed.wrapping_mul(k as u64 + 1) >> 2))
                    .collect();
                let group = if i % 2 == 0 { ParamGroup::Encoder } else { ParamGroup::Decoder };
                params.insert(&format!("p{i}"), group, Tensor::new(shape.clone(), values).unwrap());
            }
            let mut bytes = Vec::new();
            write_params(&params, &mut bytes).unwrap();
            let back = read_params(&bytes[..]).unwrap();
            prop_assert_eq!(back.len(), params.len());
            for ((n1, g1, t1), (n2, g2, t2)) in params.iter().zip(back.iter()) {
                prop_assert_eq!(n1, n2);
                prop_assert_eq!(g1, g2);
                prop_assert_eq!(t1.shape(), t2.shape());
                let a: Vec<u64> = t1.values().iter().map(|v| v.to_bits()).collect();
                let b: Vec<u64> = t2.values().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn rejects_wrong_version_and_truncation() {
        let mut params = ParamSet::new();
        params.insert("w", ParamGroup::Encoder, Tensor::zeros(&[2, 2]));
        let mut bytes = Vec::new();
        write_params(&params, &mut bytes).unwrap();
        assert!(read_params(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        let err = read_params(&bad[..]).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
