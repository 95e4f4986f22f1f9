//! Raster file I/O: 8-bit grayscale PNG and binary PGM in, 8/16-bit PNG out.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, LabelMap, Mask};

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an 8-bit grayscale image from PNG or PGM (P5). Color PNG input is
/// reduced to luminance with integer Rec.601 weights; 16-bit input is rejected.
pub fn load_grayscale(path: &Path) -> Result<GrayImage> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(&PNG_MAGIC) {
        load_png_gray(path, &bytes)
    } else if bytes.starts_with(b"P5") {
        load_pgm(path, &bytes)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "not a PNG or binary PGM file".into(),
        })
    }
}

fn load_png_gray(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
        |e| Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("PNG decode failed: {e}"),
        },
    )?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let data: Vec<u8> = match dynimg {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        image::DynamicImage::ImageLumaA8(buf) => {
            buf.pixels().map(|p| p.0[0]).collect()
        }
        image::DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luma601(p.0)).collect(),
        image::DynamicImage::ImageRgba8(buf) => {
            buf.pixels().map(|p| luma601([p.0[0], p.0[1], p.0[2]])).collect()
        }
        _ => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "only 8-bit grayscale or color PNG is supported".into(),
            })
        }
    };
    Ok(GrayImage::from_data(w, h, data))
}

#[inline]
fn luma601(rgb: [u8; 3]) -> u8 {
    let v = 299u32 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((v + 500) / 1000) as u8
}

fn load_pgm(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let bad = |reason: &str| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        // skip whitespace and '#' comments between header fields
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_digit() => break,
                _ => return Err(bad("truncated PGM header")),
            }
        }
        let mut v = 0usize;
        while let Some(b) = bytes.get(pos) {
            if !b.is_ascii_digit() {
                break;
            }
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| bad("PGM header field overflow"))?;
            pos += 1;
        }
        *f = v;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(bad("PGM maxval must be in 1..=255"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("missing whitespace after PGM maxval")),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| bad("PGM dimensions overflow"))?;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| bad("PGM pixel data truncated"))?;
    Ok(GrayImage::from_data(width, height, data.to_vec()))
}

/// Writes an 8-bit grayscale image; PGM P5 when the path ends in .pgm, PNG otherwise.
pub fn save_grayscale(img: &GrayImage, path: &Path) -> Result<()> {
    let is_pgm = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false);
    if is_pgm {
        let mut bytes = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
        bytes.extend_from_slice(&img.data);
        write_bytes(path, &bytes)
    } else {
        save_png8(&img.data, img.width, img.height, path)
    }
}

fn save_png8(data: &[u8], width: usize, height: usize, path: &Path) -> Result<()> {
    let buf: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
        image::ImageBuffer::from_raw(width as u32, height as u32, data.to_vec())
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("PNG encode failed: {other}"),
            },
        })
}

/// Writes a mask as an 8-bit PNG, foreground 255 and background 0.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let data: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    save_png8(&data, mask.width, mask.height, path)
}

/// Reads an 8-bit PNG or PGM as a mask; any nonzero pixel is foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = load_grayscale(path)?;
    Ok(Mask {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v != 0).collect(),
    })
}

/// Writes a label map as a 16-bit grayscale PNG holding raw label values.
pub fn save_labels(labels: &LabelMap, path: &Path) -> Result<()> {
    if let Some(&big) = labels.data.iter().find(|&&v| v > u16::MAX as u32) {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("label {big} exceeds 16-bit range"),
        });
    }
    let data: Vec<u16> = labels.data.iter().map(|&v| v as u16).collect();
    let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(labels.width as u32, labels.height as u32, data)
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("PNG encode failed: {other}"),
            },
        })
}

/// Reads a 16-bit (or 8-bit) grayscale PNG as a label map. `n_labels` is the
/// maximum value present; contiguity is the caller's concern.
pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let bytes = read_bytes(path)?;
    if !bytes.starts_with(&PNG_MAGIC) {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "label maps must be PNG".into(),
        });
    }
    let dynimg = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(
        |e| Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("PNG decode failed: {e}"),
        },
    )?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let data: Vec<u32> = match dynimg {
        image::DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as u32).collect(),
        image::DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as u32).collect(),
        _ => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "label maps must be single-channel PNG".into(),
            })
        }
    };
    let n_labels = data.iter().copied().max().unwrap_or(0);
    Ok(LabelMap {
        width: w,
        height: h,
        n_labels,
        data,
    })
}
