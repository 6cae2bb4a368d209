//! 8-bit image codecs: PNG through the `image` crate, binary PGM/PPM by hand.
//!
//! Reading maps byte `b` to `b / 255.0`; writing scales by 255, rounds half
//! away from zero and clamps to `[0, 255]`.

use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// File extensions recognised by [`read_image`].
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "ppm"];

pub fn is_image_path(path: &Path) -> bool {
    extension(path).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str()))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

#[inline]
pub fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn from_byte(b: u8) -> f64 {
    b as f64 / 255.0
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    match extension(path).as_deref() {
        Some("png") => read_png(path),
        Some("pgm") | Some("ppm") => decode_pnm(&fs::read(path)?),
        _ => Err(Error::invalid(format!("unsupported image format: {}", path.display()))),
    }
}

pub fn write_image(path: &Path, img: &ImageGrid) -> Result<()> {
    match extension(path).as_deref() {
        Some("png") => write_png(path, img),
        Some("pgm") | Some("ppm") => {
            fs::write(path, encode_pnm(img))?;
            Ok(())
        }
        _ => Err(Error::invalid(format!("unsupported image format: {}", path.display()))),
    }
}

fn read_png(path: &Path) -> Result<ImageGrid> {
    let dynimg = image::open(path).map_err(|e| Error::Codec(format!("{}: {e}", path.display())))?;
    let (channels, w, h, bytes) = match dynimg {
        DynamicImage::ImageLuma8(g) => (1, g.width(), g.height(), g.into_raw()),
        DynamicImage::ImageRgb8(rgb) => (3, rgb.width(), rgb.height(), rgb.into_raw()),
        other => {
            if other.color().has_color() {
                let rgb = other.to_rgb8();
                (3, rgb.width(), rgb.height(), rgb.into_raw())
            } else {
                let g = other.to_luma8();
                (1, g.width(), g.height(), g.into_raw())
            }
        }
    };
    ImageGrid::new(h as usize, w as usize, channels, bytes.into_iter().map(from_byte).collect())
}

fn write_png(path: &Path, img: &ImageGrid) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let res = match img.channels() {
        1 => GrayImage::from_raw(w, h, bytes).map(|g| g.save(path)),
        _ => RgbImage::from_raw(w, h, bytes).map(|g| g.save(path)),
    };
    match res {
        Some(Ok(())) => Ok(()),
        Some(Err(e)) => Err(Error::Codec(format!("{}: {e}", path.display()))),
        None => Err(Error::Codec("buffer size mismatch".into())),
    }
}

/// Binary P5 (gray) or P6 (RGB) with maxval 255.
pub fn encode_pnm(img: &ImageGrid) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| to_byte(v)));
    out
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Codec("truncated PNM header".into()));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let channels = match header[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::Codec(format!("unsupported PNM magic {m}"))),
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Codec(format!("bad PNM header field {s:?}")))
    };
    let (w, h, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
    if maxval != 255 {
        return Err(Error::Codec(format!("only maxval 255 is supported, got {maxval}")));
    }
    let n = w * h * channels;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Codec("truncated PNM raster".into()))?;
    ImageGrid::new(h, w, channels, raster.iter().map(|&b| from_byte(b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_conversion_rounds_half_away() {
        assert_eq!(to_byte(0.5 / 255.0), 1);
        assert_eq!(to_byte(-0.2), 0);
        assert_eq!(to_byte(1.7), 255);
        for b in 0..=255u8 {
            assert_eq!(to_byte(from_byte(b)), b);
        }
    }

    #[test]
    fn pnm_round_trip() {
        let img = ImageGrid::new(2, 3, 3, (0..18).map(|i| i as f64 * 10.0 / 255.0).collect()).unwrap();
        let back = decode_pnm(&encode_pnm(&img)).unwrap();
        assert_eq!(back, img);
        let with_comment = b"P5\n# hello\n2 1\n255\n\x00\xff";
        let g = decode_pnm(with_comment).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
        assert!(decode_pnm(b"P5\n2 2\n65535\n").is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageGrid::from_fn(4, 5, |r, c| ((r * 5 + c) * 12) as f64 / 255.0);
        let path = dir.path().join("a.png");
        write_image(&path, &img).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
        assert!(read_image(&dir.path().join("a.bmp")).is_err());
    }
}
