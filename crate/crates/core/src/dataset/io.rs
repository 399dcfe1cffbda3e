//! Binary (`SMPD`) and CSV persistence for [`NoisyDataset`].
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic "SMPD" | version u32 = 1 | N u64 | d u32 | K u32 | flags u32
//! features f32[N*d] row-major | noisy i32[N] | true i32[N]? | verified u8[N]?
//! ```
//!
//! `flags` bit 0 marks true labels present, bit 1 a verified mask.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::NoisyDataset;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SMPD";
pub const VERSION: u32 = 1;

const FLAG_TRUE: u32 = 1;
const FLAG_VERIFIED: u32 = 2;

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn encode_dataset(ds: &NoisyDataset) -> Vec<u8> {
    let n = ds.len();
    let mut out = Vec::with_capacity(28 + n * (ds.dim * 4 + 9));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(ds.dim as u32).to_le_bytes());
    out.extend_from_slice(&(ds.classes as u32).to_le_bytes());
    let mut flags = 0;
    if ds.true_labels.is_some() {
        flags |= FLAG_TRUE;
    }
    if ds.verified.is_some() {
        flags |= FLAG_VERIFIED;
    }
    out.extend_from_slice(&flags.to_le_bytes());
    for v in &ds.features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in &ds.noisy_labels {
        out.extend_from_slice(&(l as i32).to_le_bytes());
    }
    if let Some(t) = &ds.true_labels {
        for &l in t {
            out.extend_from_slice(&(l as i32).to_le_bytes());
        }
    }
    if let Some(v) = &ds.verified {
        out.extend(v.iter().map(|&b| u8::from(b)));
    }
    out
}

fn read_labels(cur: &mut Cursor<'_>, n: usize, classes: usize) -> Result<Vec<usize>> {
    let bytes = cur.take(n.checked_mul(4).ok_or_else(|| Error::Format("N overflows".into()))?)?;
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(index, b)| {
            let label = i32::from_le_bytes(b.try_into().unwrap());
            if label < 0 || label as usize >= classes {
                Err(Error::LabelOutOfRange {
                    index,
                    label: i64::from(label),
                    classes,
                })
            } else {
                Ok(label as usize)
            }
        })
        .collect()
}

pub fn decode_dataset(buf: &[u8]) -> Result<NoisyDataset> {
    let mut cur = Cursor::new(buf);
    if cur.take(4).map_err(|_| Error::Format("bad magic".into()))? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = usize::try_from(cur.u64()?).map_err(|_| Error::Format("N too large".into()))?;
    let dim = cur.u32()? as usize;
    let classes = cur.u32()? as usize;
    let flags = cur.u32()?;
    if flags & !(FLAG_TRUE | FLAG_VERIFIED) != 0 {
        return Err(Error::Format(format!("unknown flags {flags:#x}")));
    }
    // reject absurd headers before allocating
    let per_sample = dim * 4 + 4 + if flags & FLAG_TRUE != 0 { 4 } else { 0 } + usize::from(flags & FLAG_VERIFIED != 0);
    if n.checked_mul(per_sample).is_none_or(|need| need > cur.remaining()) {
        return Err(Error::Format("truncated file".into()));
    }
    let features = cur
        .take(n * dim * 4)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let noisy = read_labels(&mut cur, n, classes)?;
    let truth = if flags & FLAG_TRUE != 0 {
        Some(read_labels(&mut cur, n, classes)?)
    } else {
        None
    };
    let verified = if flags & FLAG_VERIFIED != 0 {
        let bytes = cur.take(n)?;
        Some(
            bytes
                .iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(Error::Format(format!("verified flag byte {other}"))),
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    cur.finish()?;
    NoisyDataset::new(classes, dim, features, noisy, truth, verified)
}

pub fn write_dataset(ds: &NoisyDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<NoisyDataset> {
    decode_dataset(&fs::read(path)?)
}

/// CSV with header `f0..f{d-1},noisy_label[,true_label][,verified]`.
/// Features are printed in shortest round-trip form, so values survive exactly.
pub fn write_csv(ds: &NoisyDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let mut header: Vec<String> = (0..ds.dim).map(|j| format!("f{j}")).collect();
    header.push("noisy_label".into());
    if ds.true_labels.is_some() {
        header.push("true_label".into());
    }
    if ds.verified.is_some() {
        header.push("verified".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..ds.len() {
        let mut fields: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        fields.push(ds.noisy_labels[i].to_string());
        if let Some(t) = &ds.true_labels {
            fields.push(t[i].to_string());
        }
        if let Some(v) = &ds.verified {
            fields.push(u8::from(v[i]).to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the CSV layout of [`write_csv`]. When `classes` is `None` the class
/// count is one more than the largest label seen.
pub fn read_csv(path: impl AsRef<Path>, classes: Option<usize>) -> Result<NoisyDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?
        .split(',')
        .collect();
    let dim = header.iter().take_while(|h| h.starts_with('f')).count();
    for (j, h) in header[..dim].iter().enumerate() {
        if *h != format!("f{j}") {
            return Err(Error::Format(format!("unexpected column {h}")));
        }
    }
    let rest = &header[dim..];
    let has_true = rest.contains(&"true_label");
    let has_verified = rest.contains(&"verified");
    let expected = 1 + usize::from(has_true) + usize::from(has_verified);
    if rest.first() != Some(&"noisy_label") || rest.len() != expected {
        return Err(Error::Format(
            "header must end with noisy_label[,true_label][,verified]".into(),
        ));
    }
    let mut features = Vec::new();
    let mut noisy = Vec::new();
    let mut truth = Vec::new();
    let mut verified = Vec::new();
    let parse_label = |s: &str, line: usize| -> Result<usize> {
        s.trim()
            .parse::<i64>()
            .ok()
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| Error::Format(format!("line {line}: bad label {s:?}")))
    };
    for (ln, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != dim + expected {
            return Err(Error::Format(format!("line {}: {} columns", ln + 2, cols.len())));
        }
        for c in &cols[..dim] {
            features.push(
                c.trim()
                    .parse::<f32>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", ln + 2)))?,
            );
        }
        noisy.push(parse_label(cols[dim], ln + 2)?);
        let mut at = dim + 1;
        if has_true {
            truth.push(parse_label(cols[at], ln + 2)?);
            at += 1;
        }
        if has_verified {
            verified.push(match cols[at].trim() {
                "0" => false,
                "1" => true,
                other => return Err(Error::Format(format!("line {}: verified {other:?}", ln + 2))),
            });
        }
    }
    let k = classes.unwrap_or_else(|| noisy.iter().chain(&truth).max().map_or(1, |m| m + 1));
    NoisyDataset::new(
        k,
        dim,
        features,
        noisy,
        has_true.then_some(truth),
        has_verified.then_some(verified),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, inject_noise, NoiseModel, SyntheticSpec};

    fn sample() -> NoisyDataset {
        let spec = SyntheticSpec {
            classes: 3,
            subclusters_per_class: 2,
            dim: 5,
            samples_per_class: 20,
            subcluster_spread: 0.5,
            center_separation: 3.0,
            seed: 2,
        };
        let mut ds = inject_noise(&generate_synthetic(&spec).unwrap(), &NoiseModel::uniform(0.3, 1)).unwrap();
        ds.mark_verified(0.5, 1).unwrap();
        ds
    }

    #[test]
    fn binary_roundtrip() {
        let ds = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.smpd");
        write_dataset(&ds, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn empty_dataset_roundtrip() {
        let ds = NoisyDataset::new(2, 3, vec![], vec![], None, None).unwrap();
        let bytes = encode_dataset(&ds);
        assert_eq!(bytes.len(), 28);
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_dataset(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(m)) if m.contains("magic")));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode_dataset(&sample());
        bytes[4] = 2;
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(m)) if m.contains("version")));
    }

    #[test]
    fn truncated() {
        let bytes = encode_dataset(&sample());
        for cut in [3, 10, 27, bytes.len() - 1] {
            assert!(
                matches!(decode_dataset(&bytes[..cut]), Err(Error::Format(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn label_out_of_range() {
        let ds = sample();
        let mut bytes = encode_dataset(&ds);
        let at = 28 + ds.features.len() * 4;
        bytes[at..at + 4].copy_from_slice(&7i32.to_le_bytes());
        assert!(matches!(
            decode_dataset(&bytes),
            Err(Error::LabelOutOfRange { label: 7, .. })
        ));
        bytes[at..at + 4].copy_from_slice(&(-1i32).to_le_bytes());
        assert!(matches!(
            decode_dataset(&bytes),
            Err(Error::LabelOutOfRange { label: -1, .. })
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let ds = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&ds, &path).unwrap();
        let back = read_csv(&path, Some(3)).unwrap();
        assert_eq!(back, ds);
        let header = fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("f0,f1,f2,f3,f4,noisy_label,true_label,verified\n"));
    }
}
