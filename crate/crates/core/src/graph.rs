//! Weighted directed multigraph with per-edge affinity and cost.
//!
//! Affinities drive the random-walk transition probabilities, costs drive
//! hitting costs. Undirected input is expanded to two directed arcs at
//! ingestion; parallel edges are merged by summing affinities (their costs
//! must agree).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed arc after ingestion. `cost` defaults to the arc's affinity
/// when the input does not state one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub affinity: f64,
    pub cost: f64,
}

/// Immutable graph: dense 0-based node indices, unique labels, merged arcs
/// sorted by `(src, dst)`.
#[derive(Debug, Clone)]
pub struct Graph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    directed: bool,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Directed arcs (undirected edges appear in both orientations).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Dense affinity matrix A with `A[(i, j)]` the merged affinity of arc i->j.
    pub fn affinity_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut a = DMatrix::zeros(n, n);
        for e in &self.edges {
            a[(e.src, e.dst)] = e.affinity;
        }
        a
    }

    /// Dense cost matrix W, defined on the support of A (zero elsewhere).
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut w = DMatrix::zeros(n, n);
        for e in &self.edges {
            w[(e.src, e.dst)] = e.cost;
        }
        w
    }

    /// Out-degrees d_i = sum_j a_ij.
    pub fn out_degrees(&self) -> DVector<f64> {
        let n = self.node_count();
        let mut d = DVector::zeros(n);
        for e in &self.edges {
            d[e.src] += e.affinity;
        }
        d
    }

    /// Arcs to serialize: for undirected graphs each edge is emitted once
    /// (the `src <= dst` orientation), for directed graphs every arc.
    fn canonical_edges(&self) -> impl Iterator<Item = &Edge> {
        let directed = self.directed;
        self.edges
            .iter()
            .filter(move |e| directed || e.src <= e.dst)
    }

    /// Edge-list rendering, `src,dst,affinity,cost` per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in self.canonical_edges() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.labels[e.src], self.labels[e.dst], e.affinity, e.cost
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = JsonGraph {
            directed: self.directed,
            nodes: self.labels.clone(),
            edges: self
                .canonical_edges()
                .map(|e| JsonEdge {
                    src: self.labels[e.src].clone(),
                    dst: self.labels[e.dst].clone(),
                    affinity: e.affinity,
                    cost: Some(e.cost),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serialization cannot fail")
    }
}

/// Incremental construction with label interning and duplicate-arc merging.
///
/// Merging sums affinities and requires equal costs, so ingestion does not
/// depend on input order. Zero-affinity edges are treated as absent.
#[derive(Debug)]
pub struct GraphBuilder {
    directed: bool,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    arcs: BTreeMap<(usize, usize), (f64, f64)>,
}

impl GraphBuilder {
    pub fn new(directed: bool) -> Self {
        GraphBuilder {
            directed,
            labels: Vec::new(),
            index: HashMap::new(),
            arcs: BTreeMap::new(),
        }
    }

    /// Interns a label, assigning dense indices in first-appearance order.
    pub fn node(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    /// Adds an edge; `cost` defaults to the edge's own affinity.
    pub fn edge(&mut self, src: &str, dst: &str, affinity: f64, cost: Option<f64>) -> Result<()> {
        if !affinity.is_finite() || affinity < 0.0 {
            return Err(Error::NegativeAffinity {
                src: src.to_string(),
                dst: dst.to_string(),
                affinity,
            });
        }
        let cost = cost.unwrap_or(affinity);
        if !cost.is_finite() {
            return Err(Error::InvalidGraph(format!(
                "non-finite cost on edge {src} -> {dst}"
            )));
        }
        let s = self.node(src);
        let d = self.node(dst);
        if affinity == 0.0 {
            return Ok(());
        }
        self.insert_arc(s, d, affinity, cost)?;
        if !self.directed && s != d {
            self.insert_arc(d, s, affinity, cost)?;
        }
        Ok(())
    }

    fn insert_arc(&mut self, s: usize, d: usize, affinity: f64, cost: f64) -> Result<()> {
        match self.arcs.get_mut(&(s, d)) {
            Some((a, c)) => {
                if *c != cost {
                    return Err(Error::CostMismatch {
                        src: self.labels[s].clone(),
                        dst: self.labels[d].clone(),
                        first: *c,
                        second: cost,
                    });
                }
                *a += affinity;
            }
            None => {
                self.arcs.insert((s, d), (affinity, cost));
            }
        }
        Ok(())
    }

    pub fn build(self) -> Graph {
        let edges = self
            .arcs
            .into_iter()
            .map(|((src, dst), (affinity, cost))| Edge {
                src,
                dst,
                affinity,
                cost,
            })
            .collect();
        Graph {
            labels: self.labels,
            index: self.index,
            edges,
            directed: self.directed,
        }
    }
}

/// Input format of a graph stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeListCsv,
    Json,
}

/// Loads a graph from a byte stream in the declared format.
///
/// For JSON input the file's own `directed` field wins and the flag is
/// ignored; the csv format carries no directedness, so the flag decides.
pub fn load_graph<R: BufRead>(reader: R, format: GraphFormat, directed: bool) -> Result<Graph> {
    match format {
        GraphFormat::EdgeListCsv => load_csv(reader, directed),
        GraphFormat::Json => load_json(reader),
    }
}

/// Edge-list csv: one `src,dst,affinity[,cost]` per line, `#` comments.
pub fn load_csv<R: BufRead>(reader: R, directed: bool) -> Result<Graph> {
    let mut builder = GraphBuilder::new(directed);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 or 4 comma-separated fields, got {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty node label".to_string(),
            });
        }
        let affinity: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid affinity '{}'", fields[2]),
        })?;
        let cost: Option<f64> = match fields.get(3) {
            Some(c) => Some(c.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid cost '{c}'"),
            })?),
            None => None,
        };
        builder.edge(fields[0], fields[1], affinity, cost)?;
    }
    Ok(builder.build())
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonGraph {
    directed: bool,
    nodes: Vec<String>,
    edges: Vec<JsonEdge>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEdge {
    src: String,
    dst: String,
    affinity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
}

/// JSON graph object: `{directed, nodes: [..], edges: [{src,dst,affinity,cost?}]}`.
/// Edges must reference declared nodes.
pub fn load_json<R: Read>(reader: R) -> Result<Graph> {
    let doc: JsonGraph = serde_json::from_reader(reader)
        .map_err(|e| Error::InvalidGraph(format!("json: {e}")))?;
    let mut builder = GraphBuilder::new(doc.directed);
    for label in &doc.nodes {
        if label.is_empty() {
            return Err(Error::InvalidGraph("empty node label".to_string()));
        }
        if label.contains(',') {
            return Err(Error::InvalidGraph(format!(
                "node label '{label}' contains a comma, which the edge-list format cannot carry"
            )));
        }
        if builder.index.contains_key(label) {
            return Err(Error::InvalidGraph(format!("duplicate node label '{label}'")));
        }
        builder.node(label);
    }
    for e in &doc.edges {
        for endpoint in [&e.src, &e.dst] {
            if !builder.index.contains_key(endpoint) {
                return Err(Error::UnknownLabel(endpoint.clone()));
            }
        }
        builder.edge(&e.src, &e.dst, e.affinity, e.cost)?;
    }
    Ok(builder.build())
}
