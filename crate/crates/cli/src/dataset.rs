//! On-disk dataset formats: per-frame feature CSVs, the JSON manifest
//! mapping files to labels, and text edge lists.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dyngraph_core::graph::{EdgeSet, FrameSequence};
use dyngraph_core::matrix::Matrix;

/// Maps feature files to class labels; `dim` records the feature dimension
/// the extractor produced.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub dim: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub label: usize,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Reads a headerless numeric CSV into a feature matrix. Ragged rows and
/// non-numeric cells are reported with their position.
pub fn read_feature_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), line + 1))?;
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().with_context(|| {
                format!(
                    "{}: row {}, column {}: non-numeric cell '{cell}'",
                    path.display(),
                    line + 1,
                    col + 1
                )
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    line + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: empty feature file", path.display());
    }
    let (t, p) = (rows.len(), rows[0].len());
    Matrix::from_vec(t, p, rows.into_iter().flatten().collect())
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Writes a feature matrix as a headerless CSV. The float formatting round
/// trips exactly through `read_feature_csv`.
pub fn write_feature_csv(path: &Path, features: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..features.rows() {
        let row: Vec<String> = features
            .row(i)
            .iter()
            .map(|v| format!("{v:?}"))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(out.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

/// Loads every manifest entry as a frame sequence; file paths are resolved
/// relative to the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<FrameSequence>> {
    let manifest = load_manifest(manifest_path)?;
    if manifest.entries.is_empty() {
        bail!("{}: manifest lists no entries", manifest_path.display());
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let file = base.join(&entry.file);
        let features = read_feature_csv(&file)?;
        if features.cols() != manifest.dim {
            bail!(
                "{}: has {} feature columns but the manifest records dim={}",
                file.display(),
                features.cols(),
                manifest.dim
            );
        }
        out.push(
            FrameSequence::new(features, entry.label, entry.file.clone())
                .map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?,
        );
    }
    Ok(out)
}

/// Emotion label from a RAVDESS-style filename: seven dash-separated
/// two-digit fields, the third being the 1-based emotion code.
pub fn ravdess_label(file_name: &str) -> Option<usize> {
    let stem = file_name.strip_suffix(".wav").unwrap_or(file_name);
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7 || fields.iter().any(|f| f.len() != 2) {
        return None;
    }
    let emotion: usize = fields[2].parse().ok()?;
    if (1..=8).contains(&emotion) {
        Some(emotion - 1)
    } else {
        None
    }
}

/// Formats an edge set as "i j" lines, one edge per line.
pub fn edges_to_text(edges: &EdgeSet) -> String {
    let mut out = String::new();
    for &(i, j) in edges {
        out.push_str(&format!("{i} {j}\n"));
    }
    out
}

/// Parses an "i j" per-line edge list. Blank lines and `#` comments are
/// allowed.
pub fn edges_from_text(text: &str) -> Result<EdgeSet> {
    let mut edges = EdgeSet::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => bail!("edge list line {}: expected 'i j', got '{line}'", line_no + 1),
        };
        let i: usize = a
            .parse()
            .with_context(|| format!("edge list line {}: bad node '{a}'", line_no + 1))?;
        let j: usize = b
            .parse()
            .with_context(|| format!("edge list line {}: bad node '{b}'", line_no + 1))?;
        if i == j {
            bail!("edge list line {}: self-edge {i} {j}", line_no + 1);
        }
        edges.insert((i.min(j), i.max(j)));
    }
    Ok(edges)
}

/// Sorted listing of files in a directory with one of the given extensions.
pub fn files_with_extensions(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| exts.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}
