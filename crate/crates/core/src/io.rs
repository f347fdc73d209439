//! Text file formats: dataset manifests, matrix and transform files,
//! iteration traces and feature sets. Every write is atomic.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::descriptors::FeatureSet;
use crate::error::{Error, Result};
use crate::optimizer::IterationRecord;
use crate::pairgraph::LabeledDataset;
use crate::spd::{SpdMatrix, Transform};

/// Writes `contents` to a temporary file beside `path`, then renames it.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-empty lines with `#` comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_floats(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("invalid number '{tok}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(path, line_no, format!("non-finite value '{tok}'")))
            }
        })
        .collect()
}

fn parse_usizes(path: &Path, line_no: usize, line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| parse_err(path, line_no, format!("invalid dimension '{tok}'")))
        })
        .collect()
}

fn format_rows(m: &DMatrix<f64>, out: &mut String) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn parse_rows<'a>(
    path: &Path,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let Some((line_no, line)) = lines.next() else {
            return Err(parse_err(path, 0, format!("expected {rows} rows, found {r}")));
        };
        let values = parse_floats(path, line_no, line)?;
        if values.len() != cols {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {cols} values, found {}", values.len()),
            ));
        }
        for (c, v) in values.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(path, line_no, "unexpected trailing data"));
    }
    Ok(m)
}

/// Square matrix: a line `n`, then `n` rows of `n` values.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{}\n", m.nrows());
    format_rows(m, &mut out);
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| parse_err(path, 0, "empty matrix file"))?;
    let dims = parse_usizes(path, line_no, header)?;
    let [n] = dims[..] else {
        return Err(parse_err(path, line_no, "header must be a single dimension n"));
    };
    if n == 0 {
        return Err(parse_err(path, line_no, "dimension must be positive"));
    }
    parse_rows(path, &mut lines, n, n)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    atomic_write(path, &format_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&read_text(path)?, path)
}

pub fn read_spd(path: &Path) -> Result<SpdMatrix> {
    let m = read_matrix(path)?;
    SpdMatrix::new(m).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Transform: a line `n m`, then `n` rows of `m` values.
pub fn format_transform(w: &Transform) -> String {
    let mut out = format!("{} {}\n", w.source_dim(), w.target_dim());
    format_rows(w.matrix(), &mut out);
    out
}

pub fn parse_transform(text: &str, path: &Path) -> Result<Transform> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| parse_err(path, 0, "empty transform file"))?;
    let dims = parse_usizes(path, line_no, header)?;
    let [n, m] = dims[..] else {
        return Err(parse_err(path, line_no, "header must be 'n m'"));
    };
    let w = parse_rows(path, &mut lines, n, m)?;
    Transform::new(w).map_err(|e| parse_err(path, line_no, e.to_string()))
}

pub fn write_transform(path: &Path, w: &Transform) -> Result<()> {
    atomic_write(path, &format_transform(w))
}

pub fn read_transform(path: &Path) -> Result<Transform> {
    parse_transform(&read_text(path)?, path)
}

/// One `iter J grad_norm step` record per line.
pub fn format_trace(trace: &[IterationRecord]) -> String {
    let mut out = String::from("# iter J grad_norm step\n");
    for r in trace {
        let _ = writeln!(out, "{} {:.16e} {:.16e} {:.16e}", r.iter, r.value, r.grad_norm, r.step);
    }
    out
}

pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    atomic_write(path, &format_trace(trace))
}

pub fn read_trace(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line_no, line)| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [iter, ref rest @ ..] = fields[..] else {
                return Err(parse_err(path, line_no, "empty record"));
            };
            let iter = iter
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("invalid iteration '{iter}'")))?;
            let values = parse_floats(path, line_no, &rest.join(" "))?;
            let [value, grad_norm, step] = values[..] else {
                return Err(parse_err(path, line_no, "expected 'iter J grad_norm step'"));
            };
            Ok(IterationRecord {
                iter,
                value,
                grad_norm,
                step,
            })
        })
        .collect()
}

/// One frame per line, whitespace-separated values.
pub fn read_feature_set(path: &Path) -> Result<FeatureSet> {
    let text = read_text(path)?;
    let frames = content_lines(&text)
        .map(|(line_no, line)| parse_floats(path, line_no, line))
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(frames).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_feature_set(path: &Path, frames: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for f in frames {
        let row: Vec<String> = f.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    atomic_write(path, &out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub label: String,
    /// As written in the manifest, relative to the manifest's directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Directory the entry paths are relative to.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Distinct labels in order of first appearance; index = class id.
    pub fn class_names(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.label.as_str()))
            .map(|e| e.label.clone())
            .collect()
    }

    pub fn class_ids(&self) -> Vec<usize> {
        let index: HashMap<String, usize> = self
            .class_names()
            .into_iter()
            .enumerate()
            .map(|(i, name)| (name, i))
            .collect();
        self.entries.iter().map(|e| index[&e.label]).collect()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

/// `<sample_id> <class_label> <relative_path>` per line, `#` comments.
pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let mut ids = HashSet::new();
    let mut entries = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, label, rel] = fields[..] else {
            return Err(parse_err(
                path,
                line_no,
                format!("expected '<sample_id> <class_label> <relative_path>', found {} fields", fields.len()),
            ));
        };
        if !ids.insert(id.to_string()) {
            return Err(parse_err(path, line_no, format!("duplicate sample id '{id}'")));
        }
        entries.push(ManifestEntry {
            id: id.to_string(),
            label: label.to_string(),
            path: PathBuf::from(rel),
        });
    }
    if entries.is_empty() {
        return Err(parse_err(path, 0, "manifest has no entries"));
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Manifest { root, entries })
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    parse_manifest(&read_text(path)?, path)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("# sample_id class_label relative_path\n");
    for e in entries {
        let _ = writeln!(out, "{} {} {}", e.id, e.label, e.path.display());
    }
    out
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    atomic_write(path, &format_manifest(entries))
}

/// A dataset loaded from a manifest of SPD matrix files.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub data: LabeledDataset,
    pub ids: Vec<String>,
    pub class_names: Vec<String>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<LoadedDataset> {
    let manifest = read_manifest(manifest_path)?;
    let samples = manifest
        .entries
        .iter()
        .map(|e| read_spd(&manifest.resolve(e)))
        .collect::<Result<Vec<_>>>()?;
    let class_names = manifest.class_names();
    let data = LabeledDataset::with_classes(samples, manifest.class_ids(), class_names.len())?;
    Ok(LoadedDataset {
        data,
        ids: manifest.entries.into_iter().map(|e| e.id).collect(),
        class_names,
    })
}

/// Writes every sample to `dir/samples/` and a manifest at `dir/manifest.txt`.
pub fn write_dataset(dir: &Path, data: &LabeledDataset) -> Result<PathBuf> {
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(|e| Error::io(&samples_dir, e))?;
    let width = data.len().to_string().len().max(3);
    let mut entries = Vec::with_capacity(data.len());
    for (i, x) in data.samples().iter().enumerate() {
        let id = format!("s{i:0width$}");
        let rel = PathBuf::from("samples").join(format!("{id}.mat"));
        write_matrix(&dir.join(&rel), x.matrix())?;
        entries.push(ManifestEntry {
            id,
            label: format!("c{}", data.label(i)),
            path: rel,
        });
    }
    let manifest = dir.join("manifest.txt");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}
