//! File input and output: atomic writes, images, keys and corpus listing.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bscramble_core::codec::decode_image;
use bscramble_core::keystream::{KeySet, Scheme, SecretKey};
use bscramble_core::RasterImage;
use serde::Serialize;

use crate::args::KeyArgs;
use crate::usage;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    write_atomic(path, &w.into_inner().context("flushing CSV")?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_image(path: &Path) -> Result<RasterImage> {
    decode_image(&read(path)?).with_context(|| format!("decoding {}", path.display()))
}

pub fn is_jpeg_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jpg") || e.eq_ignore_ascii_case("jpeg"))
}

/// `<path>.json`, keeping the original extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_key(path: &Path) -> Result<SecretKey> {
    SecretKey::from_key_file(&read(path)?).with_context(|| format!("key file {}", path.display()))
}

pub fn load_keys(args: &KeyArgs, scheme: Scheme) -> Result<KeySet> {
    match (&args.key, &args.subkeys) {
        (Some(master), _) => Ok(KeySet::derive(&read_key(master)?, scheme)),
        (None, Some(paths)) => {
            let keys = paths.iter().map(|p| read_key(p)).collect::<Result<Vec<_>>>()?;
            let subkeys: [SecretKey; 4] = keys.try_into().expect("clap enforces four subkey files");
            Ok(KeySet::from_subkeys(scheme, subkeys))
        }
        (None, None) => usage!("no key given; pass --key FILE or --subkeys K1 K2 K3 K4"),
    }
}

pub fn load_master(path: &Path) -> Result<SecretKey> {
    read_key(path)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Expands files, directories (their images, not recursive) and glob
/// patterns into a sorted, duplicate-free list.
pub fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        let path = Path::new(input);
        if path.is_dir() {
            for entry in std::fs::read_dir(path).with_context(|| format!("listing {input}"))? {
                let p = entry?.path();
                if p.is_file() && is_image(&p) {
                    out.push(p);
                }
            }
        } else if path.is_file() {
            out.push(path.to_path_buf());
        } else if input.contains(['*', '?', '[']) {
            let pattern = match glob::glob(input) {
                Ok(p) => p,
                Err(e) => usage!("bad glob {input:?}: {e}"),
            };
            for p in pattern {
                let p = p?;
                if p.is_file() {
                    out.push(p);
                }
            }
        } else {
            anyhow::bail!("input {input} does not exist");
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        anyhow::bail!("no images found in {}", inputs.join(", "));
    }
    Ok(out)
}

/// File stem used as the image id in reports.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}
