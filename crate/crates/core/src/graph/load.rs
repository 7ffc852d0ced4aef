//! Dataset ingestion: LINQS `.content`/`.cites` and CSV.

use std::collections::HashMap;
use std::path::Path;

use crate::linalg::Matrix;
use crate::{Error, Result};

use super::Graph;

/// Counts of rows dropped while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Citations/edges referencing an unknown node id.
    pub dropped_unknown: usize,
    /// Self-loop rows.
    pub dropped_self_loops: usize,
    /// Duplicate edge rows (after symmetrization).
    pub dropped_duplicates: usize,
}

/// Loads the LINQS citation format.
///
/// `content` rows are `id <tab> f_1..f_d <tab> label`; `cites` rows are
/// `cited <tab> citing`. String labels map to dense class ids in
/// first-appearance order. Citations with unknown endpoints are dropped and
/// counted.
pub fn load_linqs(content_path: &Path, cites_path: &Path) -> Result<(Graph, LoadStats)> {
    let content = std::fs::read_to_string(content_path)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut arity: Option<usize> = None;

    for (lineno, line) in content.lines().enumerate() {
        let line_num = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_num,
                msg: format!("expected `id<TAB>features<TAB>label`, got {} fields", fields.len()),
            });
        }
        let id = fields[0].to_string();
        let label = fields[fields.len() - 1].trim();
        let feats = &fields[1..fields.len() - 1];
        match arity {
            None => arity = Some(feats.len()),
            Some(d) if d != feats.len() => {
                return Err(Error::Schema(format!(
                    "line {line_num}: feature arity {} differs from {d}",
                    feats.len()
                )));
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(feats.len());
        for f in feats {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_num,
                msg: format!("bad feature value `{f}`"),
            })?;
            row.push(v);
        }
        if ids.insert(id.clone(), feature_rows.len()).is_some() {
            return Err(Error::Parse { line: line_num, msg: format!("duplicate node id `{id}`") });
        }
        let next_label = label_ids.len();
        let class = *label_ids.entry(label.to_string()).or_insert(next_label);
        feature_rows.push(row);
        labels.push(Some(class));
    }

    let cites = std::fs::read_to_string(cites_path)?;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stats = LoadStats::default();
    for (lineno, line) in cites.lines().enumerate() {
        let line_num = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_num,
                msg: format!("expected `cited<TAB>citing`, got {} fields", fields.len()),
            });
        }
        match (ids.get(fields[0].trim()), ids.get(fields[1].trim())) {
            (Some(&a), Some(&b)) => {
                if a == b {
                    stats.dropped_self_loops += 1;
                } else {
                    edges.push((a, b));
                }
            }
            _ => stats.dropped_unknown += 1,
        }
    }
    if stats.dropped_unknown > 0 {
        log::warn!("load_linqs: dropped {} citations with unknown endpoints", stats.dropped_unknown);
    }

    let graph = Graph::build(Matrix::from_rows(feature_rows), labels, &edges)?;
    stats.dropped_duplicates = edges.len() - graph.num_edges();
    Ok((graph, stats))
}

/// Loads the CSV pair format.
///
/// `nodes` header is `id,label,f0..f{d-1}` (label may be empty: the node
/// gets no label and cannot be train-masked); `edges` header is `src,dst`.
pub fn load_csv(nodes_path: &Path, edges_path: &Path) -> Result<(Graph, LoadStats)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(nodes_path)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(Error::Schema("nodes CSV header must start with `id,label`".into()));
    }
    let d = headers.len() - 2;

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        let id = record[0].to_string();
        if ids.insert(id.clone(), feature_rows.len()).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate node id `{id}`") });
        }
        let label_field = record[1].trim().to_string();
        let label = if label_field.is_empty() {
            None
        } else {
            let next = label_ids.len();
            Some(*label_ids.entry(label_field).or_insert(next))
        };
        let mut row = Vec::with_capacity(d);
        for f in record.iter().skip(2) {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("bad feature value `{f}`") })?;
            row.push(v);
        }
        feature_rows.push(row);
        labels.push(label);
    }

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(edges_path)?;
    let headers = reader.headers().map_err(csv_err)?;
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(Error::Schema("edges CSV header must be `src,dst`".into()));
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stats = LoadStats::default();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        match (ids.get(record[0].trim()), ids.get(record[1].trim())) {
            (Some(&a), Some(&b)) => {
                if a == b {
                    stats.dropped_self_loops += 1;
                } else {
                    edges.push((a, b));
                }
            }
            _ => stats.dropped_unknown += 1,
        }
    }

    let n = feature_rows.len();
    let features =
        if n == 0 { Matrix::zeros(0, d) } else { Matrix::from_rows(feature_rows) };
    let graph = Graph::build(features, labels, &edges)?;
    stats.dropped_duplicates = edges.len() - graph.num_edges();
    Ok((graph, stats))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, msg: e.to_string() }
}
