//! Middlebury `.flo` files.
//!
//! Layout (all little-endian): `f32` magic `202021.25` (the bytes `PIEH`),
//! `i32` width, `i32` height, then `width * height` interleaved `(u, v)`
//! `f32` pairs in row-major order.

use thiserror::Error;

use super::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
/// Largest accepted width or height.
pub const MAX_DIMENSION: i64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloError {
    #[error("bad magic number {0}")]
    BadMagic(f32),
    #[error("file truncated: expected {expected} bytes, got {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("dimensions {width}x{height} out of range")]
    DimensionOverflow { width: i64, height: i64 },
    #[error("{0} unexpected trailing bytes")]
    TrailingData(usize),
    #[error("non-finite flow value at index {0}")]
    NonFinite(usize),
}

fn read_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn read_i32(bytes: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn read_flo(bytes: &[u8]) -> Result<FlowField, FloError> {
    if bytes.len() < 12 {
        return Err(FloError::TruncatedFile { expected: 12, actual: bytes.len() });
    }
    let magic = read_f32(bytes, 0);
    if magic != FLO_MAGIC {
        return Err(FloError::BadMagic(magic));
    }
    let (w, h) = (read_i32(bytes, 4) as i64, read_i32(bytes, 8) as i64);
    if w < 1 || h < 1 || w > MAX_DIMENSION || h > MAX_DIMENSION {
        return Err(FloError::DimensionOverflow { width: w, height: h });
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + w * h * 8;
    if bytes.len() < expected {
        return Err(FloError::TruncatedFile { expected, actual: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(FloError::TrailingData(bytes.len() - expected));
    }
    let data: Vec<f32> = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(FloError::NonFinite(i));
    }
    Ok(FlowField { width: w, height: h, data })
}

pub fn write_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.data.len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for v in &flow.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_byte_layout() {
        let flow = FlowField::from_vec(2, 1, vec![1.0, 0.5, -1.0, 0.0]).unwrap();
        let bytes = write_flo(&flow);
        #[rustfmt::skip]
        let expected: [u8; 28] = [
            b'P', b'I', b'E', b'H',
            0x02, 0x00, 0x00, 0x00,
            0x01, 0x00, 0x00, 0x00,
            0x00, 0x00, 0x80, 0x3F, // u0 = 1.0
            0x00, 0x00, 0x00, 0x3F, // v0 = 0.5
            0x00, 0x00, 0x80, 0xBF, // u1 = -1.0
            0x00, 0x00, 0x00, 0x00, // v1 = 0.0
        ];
        assert_eq!(bytes, expected);
        assert_eq!(read_flo(&bytes).unwrap(), flow);
    }

    #[test]
    fn zero_magic_rejected() {
        let mut bytes = write_flo(&FlowField::zeros(1, 1));
        bytes[..4].copy_from_slice(&0.0f32.to_le_bytes());
        assert_eq!(read_flo(&bytes), Err(FloError::BadMagic(0.0)));
    }

    #[test]
    fn truncation_and_dimensions() {
        let bytes = write_flo(&FlowField::zeros(3, 2));
        assert!(matches!(read_flo(&bytes[..bytes.len() - 1]), Err(FloError::TruncatedFile { .. })));
        assert!(matches!(read_flo(&bytes[..7]), Err(FloError::TruncatedFile { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(read_flo(&extra), Err(FloError::TrailingData(1)));

        let mut big = bytes.clone();
        big[4..8].copy_from_slice(&100_001i32.to_le_bytes());
        assert!(matches!(read_flo(&big), Err(FloError::DimensionOverflow { .. })));
        let mut neg = bytes;
        neg[8..12].copy_from_slice(&(-1i32).to_le_bytes());
        assert!(matches!(read_flo(&neg), Err(FloError::DimensionOverflow { .. })));
    }

    #[test]
    fn nan_rejected() {
        let mut bytes = write_flo(&FlowField::zeros(1, 1));
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(read_flo(&bytes), Err(FloError::NonFinite(1)));
    }
}
