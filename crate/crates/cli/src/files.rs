//! Directory listing, hashing and manifest output shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use narmsr::io::{is_image_path, read_image};
use narmsr::ImageGrid;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, IoContext};

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.is_file() && is_image_path(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no png/pgm/ppm images"),
        });
    }
    Ok(paths)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).at(dir)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).at(path)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).at(path)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path).at(path)?)))
}

/// Hash of the dimensions and the little-endian `f64` samples.
pub fn sha256_grid(img: &ImageGrid) -> String {
    let mut h = Sha256::new();
    for d in [img.height(), img.width(), img.channels()] {
        h.update((d as u64).to_le_bytes());
    }
    for v in img.data() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Reads an image, tagging failures with the path.
pub fn load(path: &Path) -> CliResult<ImageGrid> {
    match read_image(path) {
        Ok(img) => Ok(img),
        Err(narmsr::Error::Io(source)) => Err(CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        what: path.display().to_string(),
        source,
    })?;
    write_text(path, &(text + "\n"))
}

/// Common head of every manifest.
#[derive(Debug, Serialize)]
pub struct RunInfo {
    pub command_line: Vec<String>,
    pub version: &'static str,
}

impl RunInfo {
    pub fn current() -> Self {
        RunInfo {
            command_line: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// `*.txt` files directly inside `dir`, sorted by file name.
pub fn list_kernel_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
