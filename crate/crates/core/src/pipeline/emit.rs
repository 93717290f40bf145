//! Graph artifacts: versioned JSON, Graphviz DOT.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{Variable, VariableKind, VariableTable};
use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, CausalGraph};
use crate::strength::StrengthMatrix;

/// Version written to every graph document.
pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableEntry {
    pub index: usize,
    pub name: String,
    #[serde(default)]
    pub denotation: Option<String>,
    #[serde(default = "continuous")]
    pub kind: VariableKind,
}

fn continuous() -> VariableKind {
    VariableKind::Continuous
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_strength: Option<f64>,
    #[serde(default)]
    pub degenerate: bool,
}

/// Summary of the search that produced a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub best_reward: Option<f64>,
    pub iterations: usize,
    pub cyclic_fraction_final: f64,
    /// BIC of the graph returned by the search, before pruning.
    pub search_bic: f64,
    pub search_edges: usize,
    pub refined: bool,
    pub repaired: bool,
}

/// On-disk form of a graph. Keys are emitted in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub version: u32,
    pub variables: Vec<VariableEntry>,
    pub edges: Vec<EdgeEntry>,
    /// Dense 0/1 rows; accepted on input as an alternative to `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RunMetrics>,
}

impl GraphDocument {
    pub fn new(graph: &CausalGraph, strengths: Option<&StrengthMatrix>) -> Self {
        let variables = graph
            .variables
            .iter()
            .enumerate()
            .map(|(index, v)| VariableEntry {
                index,
                name: v.name.clone(),
                denotation: v.denotation.clone(),
                kind: v.kind,
            })
            .collect();
        let edges = graph
            .adjacency
            .edges()
            .map(|(from, to)| {
                let s = strengths.and_then(|s| s.get(from, to));
                EdgeEntry {
                    from,
                    to,
                    log_strength: graph.strength(from, to).or(s.map(|s| s.log_strength)),
                    degenerate: s.is_some_and(|s| s.degenerate),
                }
            })
            .collect();
        Self {
            version: GRAPH_SCHEMA_VERSION,
            variables,
            edges,
            adjacency: None,
            config: None,
            metrics: None,
        }
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        // Going through `Value` sorts object keys.
        let value = serde_json::to_value(self)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.version != GRAPH_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "graph schema version {} is not supported (expected {GRAPH_SCHEMA_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }

    /// Rebuilds the graph, including any strengths.
    pub fn to_graph(&self) -> Result<CausalGraph> {
        for (k, v) in self.variables.iter().enumerate() {
            if v.index != k {
                return Err(Error::Validation(format!("variable `{}` has index {}, expected {k}", v.name, v.index)));
            }
        }
        let table = VariableTable::new(
            self.variables
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    kind: v.kind,
                    denotation: v.denotation.clone(),
                })
                .collect(),
        )?;
        let d = table.len();
        let adjacency = match &self.adjacency {
            Some(rows) => {
                let a = AdjacencyMatrix::from_rows(rows).map_err(validation)?;
                let listed = AdjacencyMatrix::from_edges(d, self.edges.iter().map(|e| (e.from, e.to))).map_err(validation)?;
                if !self.edges.is_empty() && listed != a {
                    return Err(Error::Validation("`adjacency` and `edges` disagree".into()));
                }
                a
            }
            None => AdjacencyMatrix::from_edges(d, self.edges.iter().map(|e| (e.from, e.to))).map_err(validation)?,
        };
        let mut g = CausalGraph::new(adjacency, table).map_err(validation)?;
        for e in &self.edges {
            if let Some(s) = e.log_strength {
                g.set_strength(e.from, e.to, s)?;
            }
        }
        Ok(g)
    }
}

fn validation(e: Error) -> Error {
    match e {
        Error::Usage(m) => Error::Validation(m),
        other => other,
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Node label: name, with the denotation in parentheses when present.
pub fn node_label(v: &Variable) -> String {
    match &v.denotation {
        Some(d) => format!("{} ({d})", v.name),
        None => v.name.clone(),
    }
}

/// Graphviz rendering: nodes then edges, both in ascending index order.
pub fn emit_dot(graph: &CausalGraph) -> String {
    let mut out = String::from("digraph causal {\n  rankdir=LR;\n  node [shape=box];\n");
    for (i, v) in graph.variables.iter().enumerate() {
        out.push_str(&format!("  n{i} [label=\"{}\"];\n", escape(&node_label(v))));
    }
    for (i, j) in graph.adjacency.edges() {
        match graph.strength(i, j) {
            Some(s) => out.push_str(&format!("  n{i} -> n{j} [label=\"{s:.2}\"];\n")),
            None => out.push_str(&format!("  n{i} -> n{j};\n")),
        }
    }
    out.push_str("}\n");
    out
}
