//! 8-bit binary graymap (P5) reading and writing.

use std::io::Cursor;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Decodes a P5 graymap with maxval <= 255 into raw sample values.
pub fn decode_p5(bytes: &[u8]) -> Result<Array2<u8>> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::invalid("pgm", "expected binary graymap (magic P5)"));
    }
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
        .map_err(|e| Error::invalid("pgm", e.to_string()))?;
    let DynamicImage::ImageLuma8(gray) = img else {
        return Err(Error::invalid("pgm", "only 8-bit graymaps are supported"));
    };
    let (w, h) = gray.dimensions();
    Array2::from_shape_vec((h as usize, w as usize), gray.into_raw())
        .map_err(|e| Error::invalid("pgm", e.to_string()))
}

/// Encodes `values / full_scale` as an 8-bit P5 graymap (clamped to [0, 1]).
pub fn encode_p5(values: &Array2<f64>, full_scale: f64) -> Vec<u8> {
    let (h, w) = values.dim();
    let scale = if full_scale > 0.0 { full_scale } else { 1.0 };
    let data: Vec<u8> = values
        .iter()
        .map(|&v| ((v / scale).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let mut out = Cursor::new(Vec::new());
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&data, w as u32, h as u32, ExtendedColorType::L8)
        .expect("in-memory PGM encoding cannot fail");
    out.into_inner()
}
