//! File formats: feature matrices (CSV or binary "PGF1"), graphs (binary
//! "PGG1"), label files and ground-truth class files.
//!
//! PGF1 layout: magic "PGF1", little-endian u64 n, u64 D, then n*D
//! little-endian f32 values row-major.
//! PGG1 layout: magic "PGG1", little-endian u64 n, u64 nnz, then nnz triples
//! (u64 i, u64 j, f64 w) storing both directions of every edge; the loader
//! validates symmetry.

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, SparseGraph};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const FEATURE_MAGIC: &[u8; 4] = b"PGF1";
const GRAPH_MAGIC: &[u8; 4] = b"PGG1";

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::FileFormat {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// CSV features: one row per point, comma-separated decimal floats, no header.
pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut values: Vec<f64> = Vec::new();
    let mut dim = None;
    let mut rows = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for tok in trimmed.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                format_err(path, format!("line {}: bad float {tok:?}", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(format_err(
                    path,
                    format!("line {}: non-finite value", lineno + 1),
                ));
            }
            values.push(v);
            count += 1;
        }
        match dim {
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(format_err(
                    path,
                    format!("line {}: expected {d} columns, got {count}", lineno + 1),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let dim = dim.ok_or_else(|| format_err(path, "empty feature file"))?;
    Array2::from_shape_vec((rows, dim), values)
        .map_err(|e| format_err(path, format!("shape error: {e}")))
}

pub fn write_features_csv(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in features.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_bin(path: &Path) -> Result<FeatureMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FEATURE_MAGIC {
        return Err(format_err(path, "bad magic, expected PGF1"));
    }
    let n = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let mut values = Vec::with_capacity(n * d);
    let mut buf = [0u8; 4];
    for _ in 0..n * d {
        r.read_exact(&mut buf)?;
        let v = f32::from_le_bytes(buf) as f64;
        if !v.is_finite() {
            return Err(format_err(path, "non-finite feature value"));
        }
        values.push(v);
    }
    Array2::from_shape_vec((n, d), values).map_err(|e| format_err(path, format!("shape: {e}")))
}

pub fn write_features_bin(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(features.nrows() as u64).to_le_bytes())?;
    w.write_all(&(features.ncols() as u64).to_le_bytes())?;
    for &v in features.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<SparseGraph> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(format_err(path, "bad magic, expected PGG1"));
    }
    let n = read_u64(&mut r)? as usize;
    let nnz = read_u64(&mut r)? as usize;
    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let i = read_u64(&mut r)? as usize;
        let j = read_u64(&mut r)? as usize;
        let w = read_f64(&mut r)?;
        entries.push((i, j, w));
    }
    SparseGraph::from_symmetric_entries(n, &entries)
}

pub fn write_graph(path: &Path, graph: &SparseGraph) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&(graph.node_count() as u64).to_le_bytes())?;
    w.write_all(&(graph.entry_count() as u64).to_le_bytes())?;
    for (i, j, weight) in graph.entries() {
        w.write_all(&(i as u64).to_le_bytes())?;
        w.write_all(&(j as u64).to_le_bytes())?;
        w.write_all(&weight.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Label file: lines of "node_index,class_id".
pub fn read_labels_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.trim().parse().ok()).ok_or_else(|| {
                format_err(
                    path,
                    format!("line {}: expected \"node,class\"", lineno + 1),
                )
            })
        };
        let node = parse(parts.next())?;
        let class = parse(parts.next())?;
        out.push((node, class));
    }
    Ok(out)
}

pub fn write_labels_csv(path: &Path, entries: &[(usize, usize)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &(node, class) in entries {
        writeln!(w, "{node},{class}")?;
    }
    w.flush()?;
    Ok(())
}

/// Ground-truth file: one class id per line, line number = node index.
pub fn read_truth(path: &Path) -> Result<Vec<usize>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let c: usize = trimmed.parse().map_err(|_| {
            format_err(path, format!("line {}: bad class id {trimmed:?}", lineno + 1))
        })?;
        out.push(c);
    }
    Ok(out)
}

pub fn write_truth(path: &Path, truth: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &c in truth {
        writeln!(w, "{c}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
