//! Dense tensors and the binary container format used for fixture I/O.
//!
//! Container layout, little-endian throughout:
//! magic `ADSLT` (5 bytes), version `u16`, dtype tag `u8`
//! (0=f16, 1=f32, 2=i32, 3=u8), rank `u8`, dims `u64 * rank`,
//! then the raw row-major payload.

use crate::ast::Dtype;
use half::f16;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const CONTAINER_MAGIC: &[u8; 5] = b"ADSLT";
pub const CONTAINER_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    /// Raw f16 bit patterns.
    F16(Vec<u16>),
    F32(Vec<f32>),
    I32(Vec<i32>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F16(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::I32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F16(_) => Dtype::F16,
            TensorData::F32(_) => Dtype::F32,
            TensorData::I32(_) => Dtype::I32,
            TensorData::U8(_) => Dtype::U8,
        }
    }

    pub fn zeros(dtype: Dtype, len: usize) -> TensorData {
        match dtype {
            Dtype::F16 => TensorData::F16(vec![0; len]),
            Dtype::F32 => TensorData::F32(vec![0.0; len]),
            Dtype::I32 => TensorData::I32(vec![0; len]),
            Dtype::U8 => TensorData::U8(vec![0; len]),
        }
    }

    /// Element as f64 for comparisons and oracles.
    pub fn get_f64(&self, idx: usize) -> f64 {
        match self {
            TensorData::F16(v) => f16::from_bits(v[idx]).to_f64(),
            TensorData::F32(v) => v[idx] as f64,
            TensorData::I32(v) => v[idx] as f64,
            TensorData::U8(v) => v[idx] as f64,
        }
    }

    /// Exact bit equality, used for the cross-interpreter checks.
    pub fn bits_equal(&self, other: &TensorData) -> bool {
        match (self, other) {
            (TensorData::F16(a), TensorData::F16(b)) => a == b,
            (TensorData::F32(a), TensorData::F32(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::I32(a), TensorData::I32(b)) => a == b,
            (TensorData::U8(a), TensorData::U8(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape {shape:?} implies {expected} elements, data has {actual}")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("bad container: {0}")]
    BadContainer(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TensorValue {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<TensorValue, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(TensorValue { shape, data })
    }

    pub fn zeros(dtype: Dtype, shape: Vec<usize>) -> TensorValue {
        let len = shape.iter().product();
        TensorValue {
            shape,
            data: TensorData::zeros(dtype, len),
        }
    }

    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Result<TensorValue, TensorError> {
        TensorValue::new(shape, TensorData::F32(data))
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), TensorError> {
        w.write_all(CONTAINER_MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        let tag: u8 = match self.dtype() {
            Dtype::F16 => 0,
            Dtype::F32 => 1,
            Dtype::I32 => 2,
            Dtype::U8 => 3,
        };
        w.write_all(&[tag, self.shape.len() as u8])?;
        for &d in &self.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        match &self.data {
            TensorData::F16(v) => {
                for &x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::F32(v) => {
                for &x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::I32(v) => {
                for &x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::U8(v) => w.write_all(v)?,
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<TensorValue, TensorError> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != CONTAINER_MAGIC {
            return Err(TensorError::BadContainer("wrong magic".into()));
        }
        let mut two = [0u8; 2];
        r.read_exact(&mut two)?;
        let version = u16::from_le_bytes(two);
        if version != CONTAINER_VERSION {
            return Err(TensorError::BadContainer(format!(
                "unsupported version {version}"
            )));
        }
        r.read_exact(&mut two)?;
        let [tag, rank] = two;
        let dtype = match tag {
            0 => Dtype::F16,
            1 => Dtype::F32,
            2 => Dtype::I32,
            3 => Dtype::U8,
            other => {
                return Err(TensorError::BadContainer(format!("unknown dtype tag {other}")));
            }
        };
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            let mut eight = [0u8; 8];
            r.read_exact(&mut eight)?;
            shape.push(u64::from_le_bytes(eight) as usize);
        }
        let numel: usize = shape.iter().product();
        let data = match dtype {
            Dtype::F16 => {
                let mut v = Vec::with_capacity(numel);
                let mut b = [0u8; 2];
                for _ in 0..numel {
                    r.read_exact(&mut b)?;
                    v.push(u16::from_le_bytes(b));
                }
                TensorData::F16(v)
            }
            Dtype::F32 => {
                let mut v = Vec::with_capacity(numel);
                let mut b = [0u8; 4];
                for _ in 0..numel {
                    r.read_exact(&mut b)?;
                    v.push(f32::from_le_bytes(b));
                }
                TensorData::F32(v)
            }
            Dtype::I32 => {
                let mut v = Vec::with_capacity(numel);
                let mut b = [0u8; 4];
                for _ in 0..numel {
                    r.read_exact(&mut b)?;
                    v.push(i32::from_le_bytes(b));
                }
                TensorData::I32(v)
            }
            Dtype::U8 => {
                let mut v = vec![0u8; numel];
                r.read_exact(&mut v)?;
                TensorData::U8(v)
            }
        };
        TensorValue::new(shape, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("in-memory write cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TensorValue, TensorError> {
        let mut cursor = std::io::Cursor::new(bytes);
        let t = TensorValue::read_from(&mut cursor)?;
        if (cursor.position() as usize) != bytes.len() {
            return Err(TensorError::BadContainer("trailing bytes".into()));
        }
        Ok(t)
    }
}

/// Round an f64 to f16 bits (round-to-nearest-even, via f32).
pub fn f64_to_f16_bits(v: f64) -> u16 {
    f16::from_f32(v as f32).to_bits()
}

/// Round an f32 to the nearest f16 (round-to-nearest-even) and return bits.
pub fn f32_to_f16_bits(v: f32) -> u16 {
    f16::from_f32(v).to_bits()
}

pub fn f16_bits_to_f32(bits: u16) -> f32 {
    f16::from_bits(bits).to_f32()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_roundtrip_all_dtypes() {
        let cases = vec![
            TensorValue::new(vec![2, 3], TensorData::F32(vec![1.0, -2.5, 0.0, 3.25, -0.0, 7.5]))
                .unwrap(),
            TensorValue::new(vec![4], TensorData::F16(vec![0x3C00, 0xBC00, 0x0000, 0x7BFF]))
                .unwrap(),
            TensorValue::new(vec![3], TensorData::I32(vec![-7, 0, 12345])).unwrap(),
            TensorValue::new(vec![2, 2], TensorData::U8(vec![0, 1, 1, 0])).unwrap(),
        ];
        for t in cases {
            let bytes = t.to_bytes();
            assert_eq!(&bytes[..5], CONTAINER_MAGIC);
            let back = TensorValue::from_bytes(&bytes).unwrap();
            assert_eq!(back.shape, t.shape);
            assert!(back.data.bits_equal(&t.data));
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(TensorValue::new(vec![2, 2], TensorData::F32(vec![1.0])).is_err());
    }

    #[test]
    fn f16_rounding_is_nearest_even() {
        // 1.0 + 2^-11 is exactly between 1.0 and the next f16; ties to even → 1.0.
        let bits = f32_to_f16_bits(1.0 + 2f32.powi(-11));
        assert_eq!(bits, 0x3C00);
        // 1.0 + 3*2^-11 rounds up to 1.0 + 2^-10.
        let bits = f32_to_f16_bits(1.0 + 3.0 * 2f32.powi(-11));
        assert_eq!(bits, 0x3C02);
    }
}
