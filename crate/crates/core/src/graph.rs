//! Binary directed graphs over the dataset's variables.
//!
//! Orientation convention used throughout the crate: `entry(i, j) == 1` means
//! the edge `i → j`, so `i` is a parent of `j`.

use std::collections::BTreeMap;

use crate::data::VariableTable;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Tolerance under which the acyclicity penalty counts as zero.
pub const ACYCLIC_TOLERANCE: f64 = 1e-9;

/// `d×d` binary adjacency with an all-zero diagonal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    d: usize,
    entries: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            entries: vec![false; d * d],
        }
    }

    pub fn from_edges(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut a = Self::empty(d);
        for (i, j) in edges {
            a.insert(i, j)?;
        }
        Ok(a)
    }

    /// Builds from nested 0/1 rows. Non-zero diagonal entries are rejected.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let d = rows.len();
        let mut a = Self::empty(d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::usage(format!("adjacency row {i} has {} entries, expected {d}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                match v {
                    0 => {}
                    1 => a.insert(i, j)?,
                    other => return Err(Error::usage(format!("adjacency entry ({i},{j}) = {other} is not binary"))),
                }
            }
        }
        Ok(a)
    }

    /// Full lower-triangular graph: every `i → j` with `i < j`.
    pub fn complete_forward(d: usize) -> Self {
        let mut a = Self::empty(d);
        for i in 0..d {
            for j in i + 1..d {
                a.entries[i * d + j] = true;
            }
        }
        a
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.d + j]
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::usage(format!("self-loop {i} → {i} is not allowed")));
        }
        self.entries[i * self.d + j] = true;
        Ok(())
    }

    pub fn remove(&mut self, i: usize, j: usize) {
        if i < self.d && j < self.d {
            self.entries[i * self.d + j] = false;
        }
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// Edges in ascending `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.d;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(move |(k, _)| (k / d, k % d))
    }

    pub fn parents(&self, j: usize) -> Result<Vec<usize>> {
        self.check_index(j)?;
        Ok((0..self.d).filter(|&i| self.has_edge(i, j)).collect())
    }

    pub fn children(&self, i: usize) -> Result<Vec<usize>> {
        self.check_index(i)?;
        Ok((0..self.d).filter(|&j| self.has_edge(i, j)).collect())
    }

    /// Parent set of `j` as a bitmask (bit `i` set when `i → j`). Requires `d ≤ 64`.
    pub fn parent_mask(&self, j: usize) -> u64 {
        (0..self.d).filter(|&i| self.has_edge(i, j)).fold(0u64, |m, i| m | (1 << i))
    }

    /// Row-major 0/1 rows.
    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| u8::from(self.has_edge(i, j))).collect())
            .collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.d, self.d, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(Error::usage("permutation length differs from node count"));
        }
        let mut out = Self::empty(self.d);
        for (i, j) in self.edges() {
            out.insert(perm[i], perm[j])?;
        }
        Ok(out)
    }

    /// Exact cycle test by repeatedly removing nodes with zero in-degree.
    pub fn is_dag(&self) -> bool {
        self.peel().len() == self.d
    }

    /// Nodes in an order where every edge points forward; ties go to the
    /// smallest index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let order = self.peel();
        if order.len() != self.d {
            return Err(Error::usage("topological order requested for a cyclic graph"));
        }
        Ok(order)
    }

    fn peel(&self) -> Vec<usize> {
        let d = self.d;
        let mut indegree: Vec<usize> = (0..d).map(|j| (0..d).filter(|&i| self.has_edge(i, j)).count()).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..d).filter(|&j| indegree[j] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for j in 0..d {
                if self.has_edge(n, j) {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.insert(j);
                    }
                }
            }
        }
        order
    }

    /// `trace(e^A) − d` for the binary adjacency.
    ///
    /// Accumulates `Σ_k trace(A^k)/k!` through the scaled powers `A^k/k!`.
    /// A DAG's adjacency is nilpotent with non-negative entries, so every term is
    /// exactly zero; any cycle contributes a positive closed-walk count.
    pub fn acyclicity_penalty(&self) -> f64 {
        let d = self.d;
        let a = self.to_matrix();
        let mut term = a.clone();
        let mut total = 0.0;
        let mut k = 1usize;
        loop {
            total += (0..d).map(|i| term.get(i, i)).sum::<f64>();
            let largest = term.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if k >= d && largest * d as f64 <= f64::EPSILON * total.max(1.0) * 1e-2 {
                break;
            }
            if largest == 0.0 || k > 4 * d + 200 {
                break;
            }
            k += 1;
            term = term.matmul(&a).expect("square").scale(1.0 / k as f64);
        }
        total
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.d {
            return Err(Error::usage(format!("node index {i} out of range for d = {}", self.d)));
        }
        Ok(())
    }
}

impl std::fmt::Debug for AdjacencyMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AdjacencyMatrix(d={}, edges={:?})", self.d, self.edges().collect::<Vec<_>>())
    }
}

/// Final learned structure: a graph over named variables plus optional
/// per-edge strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    pub adjacency: AdjacencyMatrix,
    pub variables: VariableTable,
    strengths: BTreeMap<(usize, usize), f64>,
}

impl CausalGraph {
    pub fn new(adjacency: AdjacencyMatrix, variables: VariableTable) -> Result<Self> {
        if adjacency.d() != variables.len() {
            return Err(Error::usage(format!(
                "graph has {} nodes but the variable table has {} entries",
                adjacency.d(),
                variables.len()
            )));
        }
        Ok(Self {
            adjacency,
            variables,
            strengths: BTreeMap::new(),
        })
    }

    /// Attaches a strength to an existing edge.
    pub fn set_strength(&mut self, from: usize, to: usize, value: f64) -> Result<()> {
        if from >= self.adjacency.d() || to >= self.adjacency.d() || !self.adjacency.has_edge(from, to) {
            return Err(Error::usage(format!("no edge {from} → {to} to attach a strength to")));
        }
        self.strengths.insert((from, to), value);
        Ok(())
    }

    pub fn strength(&self, from: usize, to: usize) -> Option<f64> {
        self.strengths.get(&(from, to)).copied()
    }

    pub fn strengths(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.strengths
    }

    /// Drops an edge and its strength.
    pub fn remove_edge(&mut self, from: usize, to: usize) {
        self.adjacency.remove(from, to);
        self.strengths.remove(&(from, to));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_basics() {
        let a = AdjacencyMatrix::empty(4);
        assert!(a.is_dag());
        assert_eq!(a.acyclicity_penalty(), 0.0);
        assert_eq!(a.topological_order().unwrap(), vec![0, 1, 2, 3]);
        for j in 0..4 {
            assert!(a.parents(j).unwrap().is_empty());
        }
    }

    #[test]
    fn two_cycle() {
        let a = AdjacencyMatrix::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        assert!(!a.is_dag());
        // trace(A^k) = 2 for even k, 0 for odd k: Σ 2/(2n)! = 2·cosh(1) − 2.
        assert!((a.acyclicity_penalty() - (2.0 * 1f64.cosh() - 2.0)).abs() < 1e-12);
        assert!((a.acyclicity_penalty() - 1.0862).abs() < 1e-4);
        assert!(a.topological_order().is_err());
    }

    #[test]
    fn chain_parents_and_order() {
        let a = AdjacencyMatrix::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(a.parents(2).unwrap(), vec![1]);
        let rev = AdjacencyMatrix::from_edges(3, [(2, 1), (1, 0)]).unwrap();
        assert_eq!(rev.topological_order().unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn lower_triangular_parents() {
        let a = AdjacencyMatrix::complete_forward(5);
        for j in 0..5 {
            assert_eq!(a.parents(j).unwrap(), (0..j).collect::<Vec<_>>());
        }
        assert_eq!(a.parent_mask(3), 0b111);
        assert_eq!(a.acyclicity_penalty(), 0.0);
    }

    #[test]
    fn out_of_range_and_self_loop() {
        let mut a = AdjacencyMatrix::empty(3);
        assert!(matches!(a.parents(3), Err(Error::Usage(_))));
        assert!(a.insert(1, 1).is_err());
        assert!(AdjacencyMatrix::from_rows(&[[1u8, 0], [0, 0]]).is_err());
        assert!(AdjacencyMatrix::from_rows(&[[0u8, 2], [0, 0]]).is_err());
    }

    #[test]
    fn strengths_only_on_edges() {
        let vars = VariableTable::from_names(["a", "b"]).unwrap();
        let mut g = CausalGraph::new(AdjacencyMatrix::from_edges(2, [(0, 1)]).unwrap(), vars).unwrap();
        assert!(g.set_strength(1, 0, 1.0).is_err());
        g.set_strength(0, 1, 2.5).unwrap();
        assert_eq!(g.strength(0, 1), Some(2.5));
        g.remove_edge(0, 1);
        assert!(g.strengths().is_empty());
    }
}
