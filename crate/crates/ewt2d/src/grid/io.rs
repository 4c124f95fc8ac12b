//! Grayscale image and displacement-field file I/O.
//!
//! Images: 8/16-bit PNG and PGM, values mapped linearly to `[0, 1]`.
//! Fields: little-endian binary, magic `EWTF`, u32 width, u32 height,
//! then `W*H` (dx, dy) f64 pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use super::{DisplacementField, Image};
use crate::error::{EwtError, Result};

const FIELD_MAGIC: &[u8; 4] = b"EWTF";

/// Reads a grayscale image (PNG or PGM, 8/16-bit) to `[0, 1]`.
pub fn read_gray(path: &Path) -> Result<Image> {
    let dynimg = image::open(path)?;
    let gray: ImageBuffer<Luma<u16>, Vec<u16>> = match dynimg {
        DynamicImage::ImageLuma16(b) => b,
        other => other.to_luma16(),
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data: Vec<f64> = gray.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
    Image::new(w, h, data)
}

/// Writes an image as 8-bit grayscale PNG; values are clamped to `[0, 1]`.
pub fn write_gray_png(path: &Path, img: &Image) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(
        img.width() as u32,
        img.height() as u32,
        |x, y| {
            let v = img.get(x as usize, y as usize).clamp(0.0, 1.0);
            Luma([(v * 255.0).round() as u8])
        },
    );
    buf.save(path)?;
    Ok(())
}

/// Zigzag label encoding used for 16-bit label PNGs: labels may be
/// negative (mirror pairs n and -n), PNG samples may not.
pub fn zigzag_encode(label: i32) -> u16 {
    if label >= 0 {
        (label as u32 * 2) as u16
    } else {
        ((-label as u32) * 2 - 1) as u16
    }
}

pub fn zigzag_decode(v: u16) -> i32 {
    if v % 2 == 0 {
        (v / 2) as i32
    } else {
        -(((v + 1) / 2) as i32)
    }
}

/// Writes a label map as 16-bit PNG using the zigzag encoding.
pub fn write_labels_png(path: &Path, labels: &[i32], width: usize, height: usize) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
            Luma([zigzag_encode(labels[y as usize * width + x as usize])])
        });
    buf.save(path)?;
    Ok(())
}

/// Reads a zigzag-encoded 16-bit label PNG.
pub fn read_labels_png(path: &Path) -> Result<(Vec<i32>, usize, usize)> {
    let dynimg = image::open(path)?;
    let gray = dynimg.to_luma16();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let labels = gray.pixels().map(|p| zigzag_decode(p.0[0])).collect();
    Ok((labels, w, h))
}

const RASTER_MAGIC: &[u8; 4] = b"EWTR";

/// Writes a real-valued raster as little-endian f64 binary
/// (magic `EWTR`, u32 width, u32 height, row-major values).
pub fn write_raster_f64(path: &Path, img: &Image) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(RASTER_MAGIC)?;
    out.write_all(&(img.width() as u32).to_le_bytes())?;
    out.write_all(&(img.height() as u32).to_le_bytes())?;
    for &v in img.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a raster written by [`write_raster_f64`].
pub fn read_raster_f64(path: &Path) -> Result<Image> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != RASTER_MAGIC {
        return Err(EwtError::InvalidParameter(format!(
            "{}: not an EWTR raster file",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let w = u32::from_le_bytes(u32buf) as usize;
    input.read_exact(&mut u32buf)?;
    let h = u32::from_le_bytes(u32buf) as usize;
    let mut data = Vec::with_capacity(w * h);
    let mut f64buf = [0u8; 8];
    for _ in 0..w * h {
        input.read_exact(&mut f64buf)?;
        data.push(f64::from_le_bytes(f64buf));
    }
    Image::new(w, h, data)
}

/// Writes a real-valued raster as little-endian f32 binary
/// (magic `EWTC`, u32 width, u32 height, row-major values).
pub fn write_raster_f32(path: &Path, img: &Image) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(b"EWTC")?;
    out.write_all(&(img.width() as u32).to_le_bytes())?;
    out.write_all(&(img.height() as u32).to_le_bytes())?;
    for &v in img.as_slice() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a raster written by [`write_raster_f32`].
pub fn read_raster_f32(path: &Path) -> Result<Image> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != b"EWTC" {
        return Err(EwtError::InvalidParameter(format!(
            "{}: not an EWTC coefficient file",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let w = u32::from_le_bytes(u32buf) as usize;
    input.read_exact(&mut u32buf)?;
    let h = u32::from_le_bytes(u32buf) as usize;
    let mut data = Vec::with_capacity(w * h);
    let mut f32buf = [0u8; 4];
    for _ in 0..w * h {
        input.read_exact(&mut f32buf)?;
        data.push(f32::from_le_bytes(f32buf) as f64);
    }
    Image::new(w, h, data)
}

/// Writes a displacement field in the EWTF binary format.
pub fn write_field(path: &Path, field: &DisplacementField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FIELD_MAGIC)?;
    out.write_all(&(field.width() as u32).to_le_bytes())?;
    out.write_all(&(field.height() as u32).to_le_bytes())?;
    for y in 0..field.height() {
        for x in 0..field.width() {
            let (dx, dy) = field.get(x, y);
            out.write_all(&dx.to_le_bytes())?;
            out.write_all(&dy.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a displacement field from the EWTF binary format.
pub fn read_field(path: &Path) -> Result<DisplacementField> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(EwtError::InvalidParameter(format!(
            "{}: not an EWTF field file",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let w = u32::from_le_bytes(u32buf) as usize;
    input.read_exact(&mut u32buf)?;
    let h = u32::from_le_bytes(u32buf) as usize;
    let mut dx = Vec::with_capacity(w * h);
    let mut dy = Vec::with_capacity(w * h);
    let mut f64buf = [0u8; 8];
    for _ in 0..w * h {
        input.read_exact(&mut f64buf)?;
        dx.push(f64::from_le_bytes(f64buf));
        input.read_exact(&mut f64buf)?;
        dy.push(f64::from_le_bytes(f64buf));
    }
    DisplacementField::from_parts(w, h, dx, dy)
}
