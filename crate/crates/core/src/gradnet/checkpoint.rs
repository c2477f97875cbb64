//! Binary checkpoint format.
//!
//! Layout (all integers and reals little-endian):
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 8            | magic `SAOODCKP`                          |
//! | 4 (u32)      | format version, currently 1               |
//! | 4 (u32)      | number of layer sizes `L`                 |
//! | 8*L (u64)    | layer sizes, input first                  |
//! | 8 (u64)      | parameter count `P`                       |
//! | 8*P (f64)    | parameters in flat order                  |
//!
//! Flat order is layer by layer; within a layer the `out x in` weight
//! matrix row-major, then the bias vector.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::ParameterSet;

const MAGIC: &[u8; 8] = b"SAOODCKP";
const VERSION: u32 = 1;

pub fn encode<T: Scalar>(params: &ParameterSet<T>) -> Vec<u8> {
    let sizes = params.layer_sizes();
    let mut out = Vec::with_capacity(24 + 8 * sizes.len() + 8 * params.total_dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.total_dim() as u64).to_le_bytes());
    for v in params.iter() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::invalid("checkpoint truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<ParameterSet<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::invalid("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::invalid(format!("unsupported checkpoint version {version}")));
    }
    let n_sizes = r.u32()? as usize;
    let sizes = (0..n_sizes)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = r.u64()? as usize;
    let mut flat = Vec::with_capacity(count.min(bytes.len() / 8));
    for _ in 0..count {
        flat.push(T::lit(f64::from_bits(r.u64()?)));
    }
    if r.pos != bytes.len() {
        return Err(Error::invalid("trailing bytes after checkpoint"));
    }
    let params = ParameterSet::from_flat(&sizes, &flat)?;
    if !params.all_finite() {
        return Err(Error::non_finite("checkpoint"));
    }
    Ok(params)
}

pub fn save<T: Scalar>(params: &ParameterSet<T>, path: &Path) -> Result<()> {
    crate::fsutil::write_atomic(path, &encode(params))
}

pub fn load<T: Scalar>(path: &Path) -> Result<ParameterSet<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradnet::init_params;

    #[test]
    fn roundtrip_is_bit_exact() {
        let p: ParameterSet<f64> = init_params(&[2, 5, 3], 21).unwrap();
        let q: ParameterSet<f64> = decode(&encode(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn header_layout() {
        let p = ParameterSet::<f64>::zeros(&[1, 1]).unwrap();
        let b = encode(&p);
        assert_eq!(&b[..8], b"SAOODCKP");
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(b.len(), 8 + 4 + 4 + 16 + 8 + 2 * 8);
    }

    #[test]
    fn rejects_corrupt_input() {
        let p: ParameterSet<f64> = init_params(&[2, 3], 1).unwrap();
        let b = encode(&p);
        assert!(decode::<f64>(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode::<f64>(&bad).is_err());
        let mut extra = b;
        extra.push(0);
        assert!(decode::<f64>(&extra).is_err());
    }
}
