//! Dataset files.
//!
//! Two interchangeable encodings of a labeled dataset:
//!
//! * CSV with a header, one `label` column of non-negative integers and any
//!   number of 64-bit real feature columns.
//! * Binary, little-endian: magic `LQMD`, `u16` version, `u32` record
//!   count `n`, `u32` feature count `f`, `n` `u32` labels, then `n·f` `f64`
//!   values row by row.
//!
//! A synthetic dataset is stored as a binary dataset file plus a JSON
//! sidecar (`<path>.json`) carrying its class layout and provenance.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lqm_core::condenser::{Provenance, SyntheticClass, SyntheticDataset};
use lqm_core::data::LabeledDataset;
use lqm_core::tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

pub const MAGIC: &[u8; 4] = b"LQMD";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

/// Writes through a temporary file in the destination directory and
/// renames it into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| IoError::io(path, e))?;
    let tmp = w.into_inner().map_err(|e| IoError::io(path, e.into_error()))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.into(), source })
}

/// Original label of every contiguous class index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub original: Vec<u64>,
}

impl LabelMap {
    pub fn identity(classes: usize) -> Self {
        LabelMap { original: (0..classes as u64).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.original.iter().enumerate().all(|(i, &l)| i as u64 == l)
    }

    /// Contiguous index of an original label.
    pub fn index_of(&self, label: u64) -> Option<usize> {
        self.original.binary_search(&label).ok()
    }
}

/// A dataset as stored on disk, labels not yet remapped.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub features: Matrix,
    pub labels: Vec<u64>,
}

impl RawDataset {
    /// Remaps labels to `0..classes` in ascending order of original value.
    pub fn remap(self) -> Result<(LabeledDataset, LabelMap)> {
        let mut original = self.labels.clone();
        original.sort_unstable();
        original.dedup();
        let map = LabelMap { original };
        if !map.is_identity() {
            log::warn!("labels are not contiguous from 0; remapping {:?} to 0..{}", map.original, map.original.len());
        }
        let data = self.apply(&map)?;
        Ok((data, map))
    }

    /// Maps labels through an existing mapping; unknown labels are errors.
    pub fn apply(self, map: &LabelMap) -> Result<LabeledDataset> {
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                map.index_of(l).ok_or_else(|| IoError::Config(format!("label {l} is not in the label mapping {:?}", map.original)))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(LabeledDataset::with_num_classes(self.features, labels, map.original.len())?)
    }

    pub fn from_labeled(data: &LabeledDataset) -> Self {
        RawDataset { features: data.features().clone(), labels: data.labels().iter().map(|&l| l as u64).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    Binary,
}

impl Encoding {
    /// `.lqmd` and `.bin` select binary, anything else CSV.
    pub fn for_path(path: &Path) -> Encoding {
        match path.extension().and_then(|e| e.to_str()) {
            Some("lqmd" | "bin") => Encoding::Binary,
            _ => Encoding::Csv,
        }
    }
}

/// Reads either encoding, detected by the magic bytes.
pub fn read_raw(path: &Path) -> Result<RawDataset> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(path, &bytes)
    } else {
        parse_csv(path, &bytes)
    }
}

/// Reads a dataset and remaps its labels to be contiguous from 0.
pub fn ingest(path: &Path) -> Result<(LabeledDataset, LabelMap)> {
    read_raw(path)?.remap()
}

pub fn write_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    let raw = RawDataset::from_labeled(data);
    match Encoding::for_path(path) {
        Encoding::Csv => write_csv(path, &raw),
        Encoding::Binary => write_binary(path, &raw),
    }
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| IoError::Parse { path: path.into(), line: 1, message: e.to_string() })?
        .clone();
    let label_cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| *h == "label").map(|(i, _)| i).collect();
    let label_col = match label_cols.as_slice() {
        [i] => *i,
        [] => return Err(IoError::Parse { path: path.into(), line: 1, message: "missing `label` column".into() }),
        _ => return Err(IoError::Parse { path: path.into(), line: 1, message: "duplicate `label` column".into() }),
    };
    let dim = header.len() - 1;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Parse {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| IoError::Parse { path: path.into(), line, message };
        for (i, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(err(format!("missing value in column `{}`", &header[i])));
            }
            if i == label_col {
                let label = cell.parse::<u64>().map_err(|_| err(format!("label `{cell}` is not a non-negative integer")))?;
                if label > u64::from(u32::MAX) {
                    return Err(err(format!("label {label} does not fit in 32 bits")));
                }
                labels.push(label);
            } else {
                let v = cell.parse::<f64>().map_err(|_| err(format!("`{cell}` in column `{}` is not a number", &header[i])))?;
                if !v.is_finite() {
                    return Err(err(format!("non-finite value `{cell}` in column `{}`", &header[i])));
                }
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(IoError::format(path, "no records"));
    }
    let features = Matrix::from_vec(labels.len(), dim, data)?;
    Ok(RawDataset { features, labels })
}

pub fn write_csv(path: &Path, data: &RawDataset) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string()];
        header.extend((0..data.features.cols()).map(|j| format!("x{j}")));
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (i, label) in data.labels.iter().enumerate() {
            row.clear();
            row.push(label.to_string());
            // `Display` for f64 prints the shortest string that parses back
            // to the same bits.
            row.extend(data.features.row(i).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()
    })
}

pub fn encode_binary(data: &RawDataset) -> std::result::Result<Vec<u8>, String> {
    let (n, f) = data.features.shape();
    let n32 = u32::try_from(n).map_err(|_| format!("{n} records exceed the format limit"))?;
    let f32_ = u32::try_from(f).map_err(|_| format!("{f} features exceed the format limit"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n + 8 * n * f);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&f32_.to_le_bytes());
    for &l in &data.labels {
        let l = u32::try_from(l).map_err(|_| format!("label {l} does not fit in 32 bits"))?;
        out.extend_from_slice(&l.to_le_bytes());
    }
    for v in data.features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_binary(path: &Path, data: &RawDataset) -> Result<()> {
    let bytes = encode_binary(data).map_err(|m| IoError::format(path, m))?;
    write_atomic(path, |w| w.write_all(&bytes))
}

pub fn decode_binary(path: &Path, bytes: &[u8]) -> Result<RawDataset> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(IoError::format(path, "not an LQMD file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(IoError::format(path, format!("unsupported LQMD version {version}")));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let n = u32_at(6) as usize;
    let f = u32_at(10) as usize;
    let expected = n
        .checked_mul(f)
        .and_then(|nf| nf.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN + 4 * n));
    if expected != Some(bytes.len()) {
        return Err(IoError::format(
            path,
            format!("{n} records of {f} features need {expected:?} bytes, file has {}", bytes.len()),
        ));
    }
    let labels: Vec<u64> = (0..n).map(|i| u64::from(u32_at(HEADER_LEN + 4 * i))).collect();
    let base = HEADER_LEN + 4 * n;
    let data: Vec<f64> = bytes[base..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(IoError::format(path, format!("non-finite value in record {}", pos / f.max(1))));
    }
    Ok(RawDataset { features: Matrix::from_vec(n, f, data)?, labels })
}

/// Sidecar metadata of a synthetic dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticMeta {
    pub num_classes: usize,
    pub dim: usize,
    /// `(label, records)` in storage order.
    pub classes: Vec<(usize, usize)>,
    pub provenance: Provenance,
    /// Original labels of the real data the set was condensed from.
    pub label_map: Option<LabelMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticFile {
    pub dataset: SyntheticDataset,
    pub label_map: Option<LabelMap>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_synthetic(path: &Path, syn: &SyntheticDataset, label_map: Option<&LabelMap>) -> Result<()> {
    write_binary(path, &RawDataset::from_labeled(&syn.to_labeled()))?;
    let meta = SyntheticMeta {
        num_classes: syn.num_classes(),
        dim: syn.dim(),
        classes: syn.classes().iter().map(|c| (c.label, c.records.rows())).collect(),
        provenance: syn.provenance.clone(),
        label_map: label_map.cloned(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_synthetic(path: &Path) -> Result<SyntheticFile> {
    let raw = read_raw(path)?;
    let meta: SyntheticMeta = read_json(&sidecar_path(path))?;
    if raw.features.cols() != meta.dim {
        return Err(IoError::format(path, format!("sidecar says {} features, file has {}", meta.dim, raw.features.cols())));
    }
    let total: usize = meta.classes.iter().map(|c| c.1).sum();
    if total != raw.labels.len() {
        return Err(IoError::format(path, format!("sidecar lists {total} records, file has {}", raw.labels.len())));
    }
    let mut classes = Vec::with_capacity(meta.classes.len());
    let mut start = 0;
    for &(label, count) in &meta.classes {
        if raw.labels[start..start + count].iter().any(|&l| l != label as u64) {
            return Err(IoError::format(path, format!("records of class {label} are not where the sidecar puts them")));
        }
        let rows: Vec<usize> = (start..start + count).collect();
        classes.push(SyntheticClass { label, records: raw.features.select_rows(&rows) });
        start += count;
    }
    let dataset = SyntheticDataset::new(classes, meta.num_classes, meta.dim, meta.provenance)?;
    Ok(SyntheticFile { dataset, label_map: meta.label_map })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledDataset {
        let features = Matrix::from_rows(&[vec![1.0, -0.0], vec![0.1 + 0.2, 1e-300], vec![-5.5e10, f64::MIN_POSITIVE]]).unwrap();
        LabeledDataset::new(features, vec![1, 0, 1]).unwrap()
    }

    fn bits(m: &Matrix) -> Vec<u64> {
        m.as_slice().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn csv_example() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "label,x\n0,1.0\n1,2.0\n").unwrap();
        let (d, map) = ingest(&p).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 1);
        assert_eq!(d.num_classes(), 2);
        assert!(map.is_identity());
    }

    #[test]
    fn label_column_anywhere_and_gaps_remapped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "a,label,b\n1,7,2\n3,3,4\n5,7,6\n").unwrap();
        let (d, map) = ingest(&p).unwrap();
        assert_eq!(map.original, vec![3, 7]);
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert_eq!(d.features().row(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        for (body, line, needle) in [
            ("label,x\n0,1\n1,abc\n", 3, "not a number"),
            ("label,x\n0,1\n0,inf\n", 3, "non-finite"),
            ("label,x\n-1,1\n", 2, "non-negative"),
            ("label,x\n0,\n", 2, "missing"),
            ("label,x\n0,1,2\n", 2, ""),
        ] {
            fs::write(&p, body).unwrap();
            match read_raw(&p) {
                Err(IoError::Parse { line: l, message, .. }) => {
                    assert_eq!(l, line, "{body:?}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("{body:?}: {other:?}"),
            }
        }
        fs::write(&p, "x,y\n1,2\n").unwrap();
        assert!(matches!(read_raw(&p), Err(IoError::Parse { line: 1, .. })));
    }

    #[test]
    fn both_encodings_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample();
        for name in ["d.csv", "d.lqmd"] {
            let p = dir.path().join(name);
            write_dataset(&p, &d).unwrap();
            let (back, _) = ingest(&p).unwrap();
            assert_eq!(bits(back.features()), bits(d.features()), "{name}");
            assert_eq!(back.labels(), d.labels());
        }
    }

    #[test]
    fn binary_layout() {
        let raw = RawDataset { features: Matrix::from_rows(&[vec![1.5]]).unwrap(), labels: vec![2] };
        let b = encode_binary(&raw).unwrap();
        let mut want = b"LQMD".to_vec();
        want.extend_from_slice(&[1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        want.extend_from_slice(&1.5f64.to_le_bytes());
        assert_eq!(b, want);
        assert!(decode_binary(Path::new("x"), &b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(decode_binary(Path::new("x"), &bad).is_err());
    }

    #[test]
    fn synthetic_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("syn.lqmd");
        let mut syn = SyntheticDataset::new(
            vec![
                SyntheticClass { label: 2, records: Matrix::from_rows(&[vec![0.1, 0.2]]).unwrap() },
                SyntheticClass { label: 0, records: Matrix::from_rows(&[vec![1.0 / 3.0, -2.0], vec![7.0, 8.0]]).unwrap() },
            ],
            4,
            2,
            Provenance::default(),
        )
        .unwrap();
        syn.provenance.seed = u64::MAX;
        syn.provenance.config = Some(lqm_core::condenser::CondenseConfig { learning_rate: 0.1 + 0.2, ..Default::default() });
        let map = LabelMap { original: vec![3, 5, 9, 11] };
        write_synthetic(&p, &syn, Some(&map)).unwrap();
        let back = read_synthetic(&p).unwrap();
        assert_eq!(back.dataset, syn);
        assert_eq!(back.label_map, Some(map));
        for (a, b) in back.dataset.classes().iter().zip(syn.classes()) {
            assert_eq!(bits(&a.records), bits(&b.records));
        }
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.lqmd");
        write_dataset(&p, &sample()).unwrap();
        write_dataset(&p, &sample()).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
