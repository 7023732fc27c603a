//! CIFAR-10 binary batches: 3073-byte records, a label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes.

use std::path::Path;

use crate::error::{Error, Result};

pub const RECORD_LEN: usize = 3073;
pub const PIXELS_PER_CHANNEL: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CifarRecord {
    pub label: u8,
    /// Planar RGB, 3 × 32 × 32.
    pub rgb: Vec<u8>,
}

pub fn parse_cifar10(bytes: &[u8], source: &str) -> Result<Vec<CifarRecord>> {
    if !bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::Parse {
            source_name: source.to_string(),
            offset: bytes.len() - bytes.len() % RECORD_LEN,
            reason: format!("size {} is not a multiple of {RECORD_LEN}", bytes.len()),
        });
    }
    bytes
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            if rec[0] > 9 {
                return Err(Error::Parse {
                    source_name: source.to_string(),
                    offset: i * RECORD_LEN,
                    reason: format!("label byte {} out of range 0..=9", rec[0]),
                });
            }
            Ok(CifarRecord {
                label: rec[0],
                rgb: rec[1..].to_vec(),
            })
        })
        .collect()
}

pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<CifarRecord>> {
    let mut out = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        out.extend(parse_cifar10(&bytes, &path.display().to_string())?);
    }
    Ok(out)
}
