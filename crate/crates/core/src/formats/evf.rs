//! `EVF1` event frame files: magic `EVF1`, little-endian `u32` width and
//! height, then `width * height` little-endian `f32` counts in row-major order.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::events::EventFrame;

pub const MAGIC: &[u8; 4] = b"EVF1";

pub fn encode(frame: &EventFrame) -> Vec<u8> {
    let (h, w) = frame.counts.dim();
    let mut out = Vec::with_capacity(12 + 4 * w * h);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    for &v in frame.counts.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<EventFrame> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::invalid("event frame file", "missing EVF1 header"));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::invalid("event frame file", "dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::invalid(
            "event frame file",
            format!(
                "{w}x{h} frame needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let counts: Vec<f64> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    if counts.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid(
            "event frame file",
            "counts must be non-negative",
        ));
    }
    let counts = Array2::from_shape_vec((h, w), counts)
        .map_err(|e| Error::invalid("event frame file", e.to_string()))?;
    Ok(EventFrame { counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_layout() {
        let mut f = EventFrame::zeros(2, 1);
        f.counts[[0, 1]] = 3.0;
        let bytes = encode(&f);
        let mut expected = b"EVF1".to_vec();
        expected.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&0f32.to_le_bytes());
        expected.extend_from_slice(&3f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(decode(b"EVF0\x01\0\0\0\x01\0\0\0\0\0\0\0").is_err());
        assert!(decode(b"EVF1\x02\0\0\0\x01\0\0\0\0\0\0\0").is_err());
        let mut neg = b"EVF1\x01\0\0\0\x01\0\0\0".to_vec();
        neg.extend_from_slice(&(-1f32).to_le_bytes());
        assert!(decode(&neg).is_err());
    }

    proptest! {
        #[test]
        fn integer_counts_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let counts = Array2::from_shape_fn((h, w), |(y, x)| ((seed >> ((x + y) % 32)) & 0xff) as f64);
            let f = EventFrame { counts };
            prop_assert_eq!(decode(&encode(&f)).unwrap(), f);
        }
    }
}
