//! PNG and binary PPM (P6) decoding, plus writers for inspection dumps.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use reid_core::RgbImage;
use thiserror::Error;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{}: cannot read image: {source}", path.display())]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: unsupported image: {detail}", path.display())]
    Unsupported { path: PathBuf, detail: String },
    #[error("{}: corrupt image: {detail}", path.display())]
    Corrupt { path: PathBuf, detail: String },
}

/// Decoding failure without a path attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    Unsupported(String),
    Corrupt(String),
}

impl DecodeError {
    fn at(self, path: &Path) -> ImageError {
        let path = path.to_path_buf();
        match self {
            DecodeError::Unsupported(detail) => ImageError::Unsupported { path, detail },
            DecodeError::Corrupt(detail) => ImageError::Corrupt { path, detail },
        }
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage, ImageError> {
    let bytes = fs::read(path).map_err(|source| ImageError::Unreadable { path: path.to_path_buf(), source })?;
    decode_image(&bytes).map_err(|e| e.at(path))
}

/// Sniffs the format from the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P") && bytes.len() > 1 && bytes[1].is_ascii_digit() {
        Err(DecodeError::Unsupported(format!("netpbm variant P{} (only binary P6 is read)", bytes[1] as char)))
    } else {
        Err(DecodeError::Unsupported("not a PNG or binary PPM file".into()))
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, DecodeError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DecodeError::Corrupt(format!("bad PPM header: missing {what}")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    if !bytes.starts_with(b"P6") {
        return Err(DecodeError::Unsupported("missing P6 magic".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::Corrupt(format!("bad PPM header: {width}x{height} image")));
    }
    if maxval != 255 {
        return Err(DecodeError::Unsupported(format!("PPM maxval {maxval} (only 255 is read)")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(DecodeError::Corrupt("bad PPM header: no separator before raster".into()));
    }
    let raster = &bytes[cur.pos + 1..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| DecodeError::Corrupt("PPM dimensions overflow".into()))?;
    if raster.len() < expected {
        return Err(DecodeError::Corrupt(format!(
            "truncated PPM raster: expected {expected} bytes, found {}",
            raster.len()
        )));
    }
    RgbImage::from_rgb8(width, height, &raster[..expected]).map_err(|e| DecodeError::Corrupt(e.to_string()))
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| DecodeError::Corrupt(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| DecodeError::Corrupt("PNG image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| DecodeError::Corrupt(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(DecodeError::Unsupported(format!("PNG bit depth {:?} (only 8-bit is read)", info.bit_depth)));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(DecodeError::Unsupported(format!("PNG color type {other:?} (RGB or RGBA only)"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let rgb: Vec<u8> = buf[..info.buffer_size()]
        .chunks_exact(info.line_size)
        .flat_map(|row| row[..w * channels].chunks_exact(channels).flat_map(|px| [px[0], px[1], px[2]]))
        .collect();
    RgbImage::from_rgb8(w, h, &rgb).map_err(|e| DecodeError::Corrupt(e.to_string()))
}

/// Binary P6 encoding of the image rounded to 8 bits.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_rgb8());
    out
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    // Writing into a Vec cannot fail for a well-formed 8-bit RGB raster.
    let mut writer = encoder.write_header().expect("PNG header for an in-memory buffer");
    writer.write_image_data(&img.to_rgb8()).expect("PNG data for an in-memory buffer");
    writer.finish().expect("PNG trailer for an in-memory buffer");
    out
}

/// Writes PNG when the extension is `.png`, binary PPM otherwise.
pub fn save_image(path: &Path, img: &RgbImage) -> std::io::Result<()> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    fs::write(path, if is_png { encode_png(img) } else { encode_ppm(img) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_comments_and_whitespace() {
        let bytes = b"P6 # comment\n2\t1\n# another\n255\n\x01\x02\x03\x04\x05\x06";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.get(1, 0), [4.0, 5.0, 6.0]);
    }

    #[test]
    fn rejects_other_maxvals_and_formats() {
        assert!(matches!(decode_ppm(b"P6 1 1 65535\n\0\0\0\0\0\0"), Err(DecodeError::Unsupported(_))));
        assert!(matches!(decode_image(b"P3 1 1 255\n1 2 3"), Err(DecodeError::Unsupported(_))));
        assert!(matches!(decode_image(b"GIF89a"), Err(DecodeError::Unsupported(_))));
        assert!(matches!(decode_ppm(b"P6 1"), Err(DecodeError::Corrupt(_))));
        assert!(matches!(decode_ppm(b"P6 0 1 255\n"), Err(DecodeError::Corrupt(_))));
    }

    #[test]
    fn png_round_trip() {
        let bytes: Vec<u8> = (0..4 * 3 * 3).map(|v| (v * 7) as u8).collect();
        let img = RgbImage::from_rgb8(4, 3, &bytes).unwrap();
        assert_eq!(decode_image(&encode_png(&img)).unwrap(), img);
        assert_eq!(decode_image(&encode_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn png_alpha_is_dropped() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[10, 20, 30, 40]).unwrap();
        w.finish().unwrap();
        assert_eq!(decode_png(&out).unwrap().get(0, 0), [10.0, 20.0, 30.0]);
    }
}
