//! Dataset directory persistence.
//!
//! A dataset is a directory of four text files: `meta.json` (counts and
//! provenance), `features.csv` (one row per node), `labels.csv` (one label
//! per line), and `edges.csv` (undirected pairs `u,v` with u < v,
//! symmetrized on load).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{CsrAdjacency, GraphData};
use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub nodes: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub provenance: String,
}

fn parse_error(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn save_dataset(g: &GraphData, dir: &Path) -> Result<()> {
    save_dataset_with_provenance(g, dir, "")
}

pub fn save_dataset_with_provenance(g: &GraphData, dir: &Path, provenance: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = DatasetMeta {
        nodes: g.n(),
        feature_dim: g.d(),
        num_classes: g.num_classes,
        provenance: provenance.to_string(),
    };
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serialization"),
    )?;

    let mut features = String::new();
    for i in 0..g.n() {
        let row: Vec<String> = g.features.row(i).iter().map(|v| format!("{v}")).collect();
        features.push_str(&row.join(","));
        features.push('\n');
    }
    fs::write(dir.join("features.csv"), features)?;

    let labels: String = g.labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(dir.join("labels.csv"), labels)?;

    let mut edges = String::new();
    for (u, v) in g.adjacency.edge_list() {
        edges.push_str(&format!("{u},{v}\n"));
    }
    fs::write(dir.join("edges.csv"), edges)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<GraphData> {
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| parse_error(&meta_path, e.line(), e.to_string()))?;

    let feat_path = dir.join("features.csv");
    let feat_text = fs::read_to_string(&feat_path)?;
    let mut values = Vec::with_capacity(meta.nodes * meta.feature_dim);
    let mut rows = 0;
    for (lineno, line) in feat_text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != meta.feature_dim {
            return Err(parse_error(
                &feat_path,
                lineno + 1,
                format!("expected {} fields, found {}", meta.feature_dim, fields.len()),
            ));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|e| parse_error(&feat_path, lineno + 1, format!("bad real '{f}': {e}")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != meta.nodes {
        return Err(parse_error(
            &feat_path,
            rows,
            format!("expected {} rows, found {rows}", meta.nodes),
        ));
    }
    let features = Matrix::from_vec(meta.nodes, meta.feature_dim, values)?;

    let label_path = dir.join("labels.csv");
    let label_text = fs::read_to_string(&label_path)?;
    let mut labels = Vec::with_capacity(meta.nodes);
    for (lineno, line) in label_text.lines().enumerate() {
        let l: usize = line
            .trim()
            .parse()
            .map_err(|e| parse_error(&label_path, lineno + 1, format!("bad label '{line}': {e}")))?;
        if l >= meta.num_classes {
            return Err(parse_error(
                &label_path,
                lineno + 1,
                format!("label {l} outside [0, {})", meta.num_classes),
            ));
        }
        labels.push(l);
    }
    if labels.len() != meta.nodes {
        return Err(parse_error(
            &label_path,
            labels.len(),
            format!("expected {} labels, found {}", meta.nodes, labels.len()),
        ));
    }

    let edge_path = dir.join("edges.csv");
    let edge_text = fs::read_to_string(&edge_path)?;
    let mut edges = Vec::new();
    for (lineno, line) in edge_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (u_str, v_str) = line
            .split_once(',')
            .ok_or_else(|| parse_error(&edge_path, lineno + 1, "expected 'u,v'"))?;
        let u: usize = u_str
            .trim()
            .parse()
            .map_err(|e| parse_error(&edge_path, lineno + 1, format!("bad endpoint '{u_str}': {e}")))?;
        let v: usize = v_str
            .trim()
            .parse()
            .map_err(|e| parse_error(&edge_path, lineno + 1, format!("bad endpoint '{v_str}': {e}")))?;
        if u >= v {
            return Err(parse_error(
                &edge_path,
                lineno + 1,
                format!("edge {u},{v} must satisfy u < v (undirected, stored once)"),
            ));
        }
        if v >= meta.nodes {
            return Err(parse_error(
                &edge_path,
                lineno + 1,
                format!("endpoint {v} outside [0, {})", meta.nodes),
            ));
        }
        edges.push((u, v));
    }

    let adjacency = CsrAdjacency::from_edges(meta.nodes, &edges)?;
    let g = GraphData::new(features, labels, adjacency, meta.num_classes)?;
    if !g.all_classes_present() {
        return Err(Error::invalid(format!(
            "dataset in {} is missing at least one of its {} classes",
            dir.display(),
            meta.num_classes
        )));
    }
    Ok(g)
}

/// Content hash of a graph: dimensions, feature bit patterns, labels, and
/// the undirected edge list.
pub fn dataset_fingerprint(g: &GraphData) -> String {
    let mut hasher = Sha256::new();
    hasher.update(g.n().to_le_bytes());
    hasher.update(g.d().to_le_bytes());
    hasher.update(g.num_classes.to_le_bytes());
    for v in g.features.values() {
        hasher.update(v.to_bits().to_le_bytes());
    }
    for &l in &g.labels {
        hasher.update(l.to_le_bytes());
    }
    for (u, v) in g.adjacency.edge_list() {
        hasher.update(u.to_le_bytes());
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
