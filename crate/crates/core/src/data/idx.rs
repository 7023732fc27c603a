//! IDX container (MNIST / Fashion-MNIST): big-endian header, raw bytes.

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// One grayscale image as stored in the file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source.to_string(),
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.err(format!("truncated header: missing {what}")))?;
        self.pos += 4;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let magic = self.u32("magic")?;
        if magic != expected {
            self.pos -= 4;
            return Err(self.err(format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}")));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(self.err(format!(
                "truncated payload: expected {len} bytes, found {available}"
            )));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}

pub fn parse_idx_images(bytes: &[u8], source: &str) -> Result<Vec<GrayImage>> {
    let mut r = Reader { bytes, pos: 0, source };
    r.magic(IMAGES_MAGIC)?;
    let count = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let data = r.payload(count * rows * cols)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    Ok(data
        .chunks_exact(rows * cols)
        .map(|px| GrayImage {
            rows,
            cols,
            pixels: px.to_vec(),
        })
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8], source: &str) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0, source };
    r.magic(LABELS_MAGIC)?;
    let count = r.u32("label count")? as usize;
    Ok(r.payload(count)?.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<GrayImage>> {
    let path = path.as_ref();
    parse_idx_images(&read(path)?, &path.display().to_string())
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&read(path)?, &path.display().to_string())
}

/// Serializes images in IDX form; used by tests and fixture generation.
pub fn encode_idx_images(images: &[GrayImage], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(&img.pixels);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
