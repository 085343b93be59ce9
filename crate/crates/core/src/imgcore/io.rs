//! 8-bit PNG reading and writing.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageEncoder, ImageFormat, ImageReader};

use super::ImageBuffer;
use crate::error::{Error, Result};

fn image_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Decodes an 8-bit grayscale or RGB PNG into [0, 1] samples.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|msg| image_err(path, msg))
}

fn decode_png(bytes: &[u8]) -> std::result::Result<ImageBuffer, String> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| e.to_string())?;
    match reader.format() {
        Some(ImageFormat::Png) => {}
        Some(other) => return Err(format!("unsupported format {other:?}, expected PNG")),
        None => return Err("unrecognized image format, expected PNG".into()),
    }
    let decoded = reader.decode().map_err(|e| e.to_string())?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, interleaved) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        other => {
            return Err(format!(
                "unsupported pixel layout {:?}, expected 8-bit gray or RGB",
                other.color()
            ))
        }
    };
    let n = h * w;
    let mut planar = vec![0u8; n * channels];
    for (p, px) in interleaved.chunks_exact(channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            planar[c * n + p] = v;
        }
    }
    ImageBuffer::from_u8(h, w, channels, &planar).map_err(|e| e.to_string())
}

/// Encodes an image as 8-bit PNG bytes (values rounded to the nearest level).
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let (h, w, c) = img.dims();
    let planar = img.to_u8();
    let n = h * w;
    let mut interleaved = vec![0u8; n * c];
    for p in 0..n {
        for ch in 0..c {
            interleaved[p * c + ch] = planar[ch * n + p];
        }
    }
    let color = if c == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&interleaved, w as u32, h as u32, color)
        .map_err(|e| Error::contract(format!("png encoding failed: {e}")))?;
    Ok(out)
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::contract(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_png(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    write_atomic(path.as_ref(), &encode_png(img)?)
}
