//! On-disk formats: checkpoints, PGM frames and CSV tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{RocCurve, RoundRecord};
use crate::models::{DiscriminatorNet, ParamSet, IMAGE_SIDE};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FLGM";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Serializes a parameter set:
///
/// ```text
/// "FLGM" | version u16 | count u32 |
///   per tensor: name_len u16 | name | rank u8 | extents u32… | payload f32…
/// ```
///
/// All integers and floats are little-endian.
pub fn checkpoint_to_bytes(params: &ParamSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + 4 * params.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Checkpoint(format!("tensor name `{name}` is too long")))?;
        let rank = u8::try_from(t.shape().len())
            .map_err(|_| Error::Checkpoint(format!("tensor `{name}` has rank {}", t.shape().len())))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Checkpoint(format!("extent {d} of `{name}` exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!(
                "truncated at byte {} reading {what} ({n} bytes needed, {} left)",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ParamSet> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:02x?}")));
    }
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let count = r.u32("tensor count")?;
    let mut entries = Vec::new();
    for i in 0..count {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|e| Error::Checkpoint(format!("tensor {i}: name is not UTF-8: {e}")))?
            .to_string();
        let rank = r.u8("rank")?;
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(r.u32("extent")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}`: element count overflows")))?;
        let payload = r.take(n.saturating_mul(4), "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
        entries.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - r.pos
        )));
    }
    ParamSet::new(entries).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    checkpoint_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Loads a checkpoint and checks it against the discriminator architecture.
pub fn load_discriminator(path: &Path) -> Result<DiscriminatorNet> {
    DiscriminatorNet::from_params(load_checkpoint(path)?)
        .map_err(|e| Error::Checkpoint(format!("{}: not a discriminator checkpoint: {e}", path.display())))
}

/// Binary PGM (P5, maxval 255) of a `[1, 28, 28]` image in `[-1, 1]`.
pub fn pgm_bytes(image: &Tensor) -> Result<Vec<u8>> {
    image.expect_shape("pgm_bytes", &[1, IMAGE_SIDE, IMAGE_SIDE])?;
    let mut out = format!("P5\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn export_pgm(image: &Tensor, path: &Path) -> Result<()> {
    fs::write(path, pgm_bytes(image)?).map_err(|e| Error::io(path, e))
}

pub const METRICS_HEADER: &str = "round,accuracy,macro_precision,macro_recall,f1,\
auc_c0,auc_c1,auc_c2,auc_c3,auc_c4,auc_c5,auc_c6,auc_c7,auc_c8,auc_c9,recon_distance";

/// One metrics.csv row (no trailing newline). Undefined values are empty.
pub fn metrics_row(r: &RoundRecord) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut fields = vec![
        r.round.to_string(),
        r.accuracy.to_string(),
        r.macro_precision.to_string(),
        r.macro_recall.to_string(),
        r.f1.to_string(),
    ];
    fields.extend(r.per_class_auc.iter().map(|&a| opt(a)));
    fields.push(opt(r.reconstruction_distance));
    fields.join(",")
}

/// `class,fpr,tpr` rows for every defined curve.
pub fn roc_csv(curves: &[Option<RocCurve>]) -> String {
    let mut out = String::from("class,fpr,tpr\n");
    for (class, curve) in curves.iter().enumerate() {
        for &(fpr, tpr) in curve.iter().flat_map(|c| &c.points) {
            out.push_str(&format!("{class},{fpr},{tpr}\n"));
        }
    }
    out
}

pub(crate) fn append_line(file: &mut fs::File, path: &Path, line: &str) -> Result<()> {
    writeln!(file, "{line}").map_err(|e| Error::io(path, e))
}
