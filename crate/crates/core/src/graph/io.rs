//! Dataset ingestion and the canonical on-disk format.
//!
//! - Edge file: one edge per line, two 0-based ids separated by whitespace;
//!   `#` starts a comment.
//! - Feature file: CSV, row i = node i, no header.
//! - Label file: CSV lines `node_id,label` with label in {0,1}; absent
//!   nodes are unknown.
//!
//! `save_graph` mirrors those three files plus a JSON manifest carrying
//! counts and a content checksum.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::types::{AttributedGraph, Label};
use crate::numeric::Matrix;

#[derive(Debug, Error)]
pub enum GraphIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed line: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("feature rows ({rows}) != node count ({nodes})")]
    FeatureRowMismatch { rows: usize, nodes: usize },
    #[error("{path}:{line}: node id {id} out of range (n_nodes={nodes})")]
    IdOutOfRange { path: String, line: usize, id: usize, nodes: usize },
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// Ingestion side facts: what was collapsed or dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub duplicate_edges: usize,
    pub self_loops_dropped: usize,
    pub n_edges: usize,
    pub n_labeled: usize,
}

fn read(path: &Path) -> Result<String, GraphIoError> {
    fs::read_to_string(path).map_err(|source| GraphIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a graph from edge/feature/label files.
///
/// The node count comes from the feature file. Duplicate edges collapse,
/// self-loops drop; both are counted in the report.
pub fn load_graph(
    edge_path: &Path,
    feature_path: &Path,
    label_path: &Path,
) -> Result<(AttributedGraph, IngestReport), GraphIoError> {
    let feature_text = read(feature_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in feature_text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for piece in trimmed.split(',') {
            let v: f64 = piece.trim().parse().map_err(|_| GraphIoError::Malformed {
                path: feature_path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad float '{piece}'"),
            })?;
            if !v.is_finite() {
                return Err(GraphIoError::Malformed {
                    path: feature_path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("non-finite feature {v}"),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(GraphIoError::Malformed {
                    path: feature_path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n_nodes = rows.len();
    let features = Matrix::from_rows(&rows);

    let edge_text = read(edge_path)?;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut report = IngestReport::default();
    let mut seen_pairs = 0usize;
    for (lineno, line) in edge_text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(GraphIoError::Malformed {
                    path: edge_path.display().to_string(),
                    line: lineno + 1,
                    msg: "expected exactly two ids".to_string(),
                })
            }
        };
        let parse = |s: &str| -> Result<usize, GraphIoError> {
            s.parse().map_err(|_| GraphIoError::Malformed {
                path: edge_path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad id '{s}'"),
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        for id in [a, b] {
            if id >= n_nodes {
                return Err(GraphIoError::IdOutOfRange {
                    path: edge_path.display().to_string(),
                    line: lineno + 1,
                    id,
                    nodes: n_nodes,
                });
            }
        }
        if a == b {
            report.self_loops_dropped += 1;
            continue;
        }
        seen_pairs += 1;
        edges.insert((a.min(b), a.max(b)));
    }
    report.duplicate_edges = seen_pairs - edges.len();
    report.n_edges = edges.len();

    let label_text = read(label_path)?;
    let mut labels = vec![Label::Unknown; n_nodes];
    for (lineno, line) in label_text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (id_s, label_s) = trimmed.split_once(',').ok_or_else(|| GraphIoError::Malformed {
            path: label_path.display().to_string(),
            line: lineno + 1,
            msg: "expected 'node_id,label'".to_string(),
        })?;
        let id: usize = id_s.trim().parse().map_err(|_| GraphIoError::Malformed {
            path: label_path.display().to_string(),
            line: lineno + 1,
            msg: format!("bad id '{id_s}'"),
        })?;
        if id >= n_nodes {
            return Err(GraphIoError::IdOutOfRange {
                path: label_path.display().to_string(),
                line: lineno + 1,
                id,
                nodes: n_nodes,
            });
        }
        labels[id] = match label_s.trim() {
            "0" => Label::Normal,
            "1" => Label::Anomalous,
            other => {
                return Err(GraphIoError::Malformed {
                    path: label_path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("label '{other}' not in {{0,1}}"),
                })
            }
        };
    }
    report.n_labeled = labels.iter().filter(|l| **l != Label::Unknown).count();

    let edge_vec: Vec<(usize, usize)> = edges.into_iter().collect();
    Ok((AttributedGraph::new(n_nodes, &edge_vec, features, labels), report))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphManifest {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub feature_dim: usize,
    pub n_labeled: usize,
    pub n_anomalous: usize,
    pub checksum: String,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

fn canonical_edge_text(g: &AttributedGraph) -> String {
    let mut out = String::new();
    for (a, b) in g.edge_list() {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

fn canonical_feature_text(g: &AttributedGraph) -> String {
    let mut out = String::new();
    for i in 0..g.n_nodes() {
        let row: Vec<String> = g.feature_row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn canonical_label_text(g: &AttributedGraph) -> String {
    let mut out = String::new();
    for i in 0..g.n_nodes() {
        match g.label(i) {
            Label::Normal => out.push_str(&format!("{i},0\n")),
            Label::Anomalous => out.push_str(&format!("{i},1\n")),
            Label::Unknown => {}
        }
    }
    out
}

pub fn content_checksum(g: &AttributedGraph) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_edge_text(g).as_bytes());
    hasher.update(canonical_feature_text(g).as_bytes());
    hasher.update(canonical_label_text(g).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the canonical three files plus `manifest.json` into `dir`.
pub fn save_graph(
    g: &AttributedGraph,
    dir: &Path,
    provenance: serde_json::Value,
) -> Result<GraphManifest, GraphIoError> {
    fs::create_dir_all(dir).map_err(|source| GraphIoError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let write_atomic = |name: &str, text: &str| -> Result<(), GraphIoError> {
        let path = dir.join(name);
        let tmp = dir.join(format!("{name}.tmp"));
        fs::write(&tmp, text).map_err(|source| GraphIoError::Io {
            path: tmp.display().to_string(),
            source,
        })?;
        fs::rename(&tmp, &path).map_err(|source| GraphIoError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write_atomic("edges.txt", &canonical_edge_text(g))?;
    write_atomic("features.csv", &canonical_feature_text(g))?;
    write_atomic("labels.csv", &canonical_label_text(g))?;
    let manifest = GraphManifest {
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
        feature_dim: g.feature_dim(),
        n_labeled: g.labeled_ids().len(),
        n_anomalous: g.anomaly_count(),
        checksum: content_checksum(g),
        provenance,
    };
    write_atomic("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Load a directory previously written by [`save_graph`].
pub fn load_graph_dir(dir: &Path) -> Result<(AttributedGraph, IngestReport), GraphIoError> {
    load_graph(
        &dir.join("edges.txt"),
        &dir.join("features.csv"),
        &dir.join("labels.csv"),
    )
}
