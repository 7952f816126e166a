//! The MMTF binary tensor layout, all fields little-endian:
//!
//! | offset      | size      | field                         |
//! |-------------|-----------|-------------------------------|
//! | 0           | 4         | magic `MMTF`                  |
//! | 4           | 1         | version (`1`)                 |
//! | 5           | 1         | dtype (`0` = f32, `1` = f64)  |
//! | 6           | 2         | rank (u16)                    |
//! | 8           | 4 × rank  | dims (u32 each)               |
//! | 8 + 4·rank  | …         | row-major payload             |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MMTF";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    #[default]
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }
}

pub fn encode_tensor(t: &Tensor, dtype: DType) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + t.len() * dtype.width());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    out.extend_from_slice(&(t.rank() as u16).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match dtype {
        DType::F32 => t.data().iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        DType::F64 => t.data().iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<(Tensor, DType)> {
    let need = |offset: usize, len: usize, what: &str| -> Result<&[u8]> {
        bytes
            .get(offset..offset + len)
            .ok_or_else(|| Error::format(offset as u64, format!("truncated {what}: file has {} bytes", bytes.len())))
    };
    if need(0, 4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, expected `MMTF`"));
    }
    let version = need(4, 1, "header")?[0];
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let code = need(5, 1, "header")?[0];
    let dtype = DType::from_code(code).ok_or_else(|| Error::format(5, format!("unknown dtype code {code}")))?;
    let rank = u16::from_le_bytes(need(6, 2, "header")?.try_into().unwrap()) as usize;
    if rank == 0 {
        return Err(Error::format(6, "rank must be at least 1"));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut count: usize = 1;
    for i in 0..rank {
        let offset = 8 + 4 * i;
        let d = u32::from_le_bytes(need(offset, 4, "dims")?.try_into().unwrap()) as usize;
        if d == 0 {
            return Err(Error::format(offset as u64, format!("dim {i} is zero")));
        }
        count = count
            .checked_mul(d)
            .filter(|c| c.checked_mul(dtype.width()).is_some())
            .ok_or_else(|| Error::format(offset as u64, "dims overflow the element count"))?;
        dims.push(d);
    }
    let start = 8 + 4 * rank;
    let len = count * dtype.width();
    let payload = bytes.get(start..).unwrap_or(&[]);
    if payload.len() < len {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: expected {len} bytes from offset {start}, found {}", payload.len()),
        ));
    }
    if payload.len() > len {
        return Err(Error::format((start + len) as u64, "trailing bytes after payload"));
    }
    let data = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok((Tensor::new(dims, data)?, dtype))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor, dtype: DType) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_tensor(t, dtype)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_with_dtype(path: impl AsRef<Path>) -> Result<(Tensor, DType)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|e| match e {
        Error::Format { offset, message } => Error::format(offset, format!("{}: {message}", path.display())),
        other => other,
    })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    Ok(read_tensor_with_dtype(path)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_bytes() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.5]).unwrap();
        let bytes = encode_tensor(&t, DType::F32);
        let expected: Vec<u8> = vec![
            b'M', b'M', b'T', b'F', 1, 0, 2, 0, // magic, version, dtype, rank
            1, 0, 0, 0, 2, 0, 0, 0, // dims
            0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0, // 1.0f, -2.5f
        ];
        assert_eq!(bytes, expected);
        let f64_bytes = encode_tensor(&Tensor::from_vec(vec![1.0]), DType::F64);
        assert_eq!(&f64_bytes[..10], &[b'M', b'M', b'T', b'F', 1, 1, 1, 0, 1, 0]);
        assert_eq!(&f64_bytes[12..], &[0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
    }

    #[test]
    fn single_value_round_trip() {
        let t = Tensor::from_vec(vec![std::f64::consts::PI]);
        let (back, dtype) = decode_tensor(&encode_tensor(&t, DType::F64)).unwrap();
        assert_eq!(dtype, DType::F64);
        assert_eq!(back.data()[0].to_bits(), t.data()[0].to_bits());
    }

    #[test]
    fn corrupted_magic_names_offset_zero() {
        let mut bytes = encode_tensor(&Tensor::from_vec(vec![1.0]), DType::F64);
        bytes[0] = b'X';
        match decode_tensor(&bytes).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let bytes = encode_tensor(&Tensor::from_vec(vec![1.0, 2.0]), DType::F64);
        let short = &bytes[..bytes.len() - 1];
        assert!(matches!(decode_tensor(short), Err(Error::Format { offset, .. }) if offset == short.len() as u64));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_tensor(&long), Err(Error::Format { offset, .. }) if offset == bytes.len() as u64));
        assert!(matches!(decode_tensor(&bytes[..7]), Err(Error::Format { offset: 6, .. })));
    }

    #[test]
    fn dim_overflow_is_reported_at_the_dim() {
        let mut bytes = Vec::from(&MAGIC[..]);
        bytes.extend([1, 1, 3, 0]);
        for _ in 0..3 {
            bytes.extend(u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode_tensor(&bytes), Err(Error::Format { offset: 12, .. })));
    }

    #[test]
    fn bad_version_and_dtype() {
        let mut bytes = encode_tensor(&Tensor::from_vec(vec![1.0]), DType::F64);
        bytes[4] = 2;
        assert!(matches!(decode_tensor(&bytes), Err(Error::Format { offset: 4, .. })));
        bytes[4] = 1;
        bytes[5] = 9;
        assert!(matches!(decode_tensor(&bytes), Err(Error::Format { offset: 5, .. })));
    }
}
