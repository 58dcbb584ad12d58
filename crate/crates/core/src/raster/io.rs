//! Raster file formats.
//!
//! * Grayscale/RGB PNG, TIFF and PGM through the `image` crate; samples are
//!   scaled to `[0, 1]` and RGB is reduced to the plain channel average.
//! * `PCW1`: a 16-byte little-endian header (`b"PCW1"`, `u32` width, `u32`
//!   height, `u32` reserved = 0) followed by `width * height` `f32` samples
//!   in row-major order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use super::Raster;
use crate::error::{Error, Result};

const PCW_MAGIC: &[u8; 4] = b"PCW1";
const PCW_HEADER_LEN: usize = 16;

/// Loads an image (or a `PCW1` grid) as a single-channel raster.
pub fn load_gray(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(PCW_MAGIC) {
        return decode_pcw(&bytes);
    }
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Format(e.to_string()))?;
    from_dynamic(img)
}

fn from_dynamic(img: DynamicImage) -> Result<Raster> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let samples: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b.pixels().map(|p| rgb_mean(p.0, 255.0)).collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| rgb_mean([p.0[0], p.0[1], p.0[2]], 255.0))
            .collect(),
        DynamicImage::ImageRgb16(b) => b.pixels().map(|p| rgb_mean(p.0, 65535.0)).collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| rgb_mean([p.0[0], p.0[1], p.0[2]], 65535.0))
            .collect(),
        DynamicImage::ImageRgb32F(b) => b
            .pixels()
            .map(|p| ((p.0[0] + p.0[1] + p.0[2]) as f64 / 3.0).clamp(0.0, 1.0))
            .collect(),
        DynamicImage::ImageRgba32F(b) => b
            .pixels()
            .map(|p| ((p.0[0] + p.0[1] + p.0[2]) as f64 / 3.0).clamp(0.0, 1.0))
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "unsupported pixel layout {:?}",
                other.color()
            )))
        }
    };
    Raster::new(w, h, samples)
}

#[inline]
fn rgb_mean<T: Into<f64> + Copy>(c: [T; 3], full_scale: f64) -> f64 {
    (c[0].into() + c[1].into() + c[2].into()) / (3.0 * full_scale)
}

/// Reads a `PCW1` float grid.
pub fn load_pcw(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pcw(&bytes)
}

fn decode_pcw(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < PCW_HEADER_LEN || &bytes[..4] != PCW_MAGIC {
        return Err(Error::Format("missing PCW1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let body = &bytes[PCW_HEADER_LEN..];
    if body.len() != w * h * 4 {
        return Err(Error::Format(format!(
            "PCW1 body has {} bytes, expected {}",
            body.len(),
            w * h * 4
        )));
    }
    let samples = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Raster::new(w, h, samples)
}

/// Writes the raster as a `PCW1` float grid.
pub fn save_pcw(r: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut header = [0u8; PCW_HEADER_LEN];
    header[..4].copy_from_slice(PCW_MAGIC);
    header[4..8].copy_from_slice(&(r.width() as u32).to_le_bytes());
    header[8..12].copy_from_slice(&(r.height() as u32).to_le_bytes());
    let write = |out: &mut BufWriter<fs::File>, b: &[u8]| out.write_all(b).map_err(|e| Error::io(path, e));
    write(&mut out, &header)?;
    for &v in r.samples() {
        write(&mut out, &(v as f32).to_le_bytes())?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes a 16-bit grayscale PNG mapping `[0, 1]` onto the full `u16` range.
/// Samples outside `[0, 1]` are clamped.
pub fn save_png16(r: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let data: Vec<u16> = r
        .samples()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(r.width() as u32, r.height() as u32, data)
            .ok_or_else(|| Error::Format("buffer size mismatch".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Format(other.to_string()),
        })
}
