//! Graph inputs flattened to vectors by feature propagation.
//!
//! Node features are smoothed over `r` hops with the symmetrically
//! normalized adjacency `Â = D^{-1/2} (A + I) D^{-1/2}`, after which the
//! nodes are ordinary labeled records.

use std::fs;
use std::path::Path;

use lqm_core::data::LabeledDataset;
use lqm_core::tensor::Matrix;

use crate::error::{IoError, Result};

/// Undirected graph over `nodes` vertices stored as sorted neighbor lists,
/// without self-loops or duplicate edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); nodes];
        for &(a, b) in edges {
            for v in [a, b] {
                if v >= nodes {
                    return Err(lqm_core::Error::IndexOutOfRange { what: "node", index: v, len: nodes }.into());
                }
            }
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Ok(Graph { neighbors })
    }

    pub fn nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Degree including the self-loop.
    fn degree(&self, node: usize) -> f64 {
        (self.neighbors[node].len() + 1) as f64
    }

    /// One application of `Â`.
    pub fn smooth(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.nodes() {
            return Err(lqm_core::Error::ShapeMismatch {
                context: "Graph::smooth",
                expected: (self.nodes(), x.cols()),
                found: x.shape(),
            }
            .into());
        }
        let inv_sqrt: Vec<f64> = (0..self.nodes()).map(|v| 1.0 / self.degree(v).sqrt()).collect();
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for v in 0..self.nodes() {
            let row = out.row_mut(v);
            let self_w = inv_sqrt[v] * inv_sqrt[v];
            for (o, &xi) in row.iter_mut().zip(x.row(v)) {
                *o = self_w * xi;
            }
            for &u in &self.neighbors[v] {
                let w = inv_sqrt[v] * inv_sqrt[u];
                for (o, &xi) in row.iter_mut().zip(x.row(u)) {
                    *o += w * xi;
                }
            }
        }
        Ok(out)
    }

    /// `Â^hops · x`.
    pub fn propagate(&self, x: &Matrix, hops: usize) -> Result<Matrix> {
        let mut out = x.clone();
        for _ in 0..hops {
            out = self.smooth(&out)?;
        }
        Ok(out)
    }
}

/// Propagates node features, keeping labels.
pub fn propagate_graph(nodes: &LabeledDataset, graph: &Graph, hops: usize) -> Result<LabeledDataset> {
    let features = graph.propagate(nodes.features(), hops)?;
    Ok(LabeledDataset::with_num_classes(features, nodes.labels().to_vec(), nodes.num_classes())?)
}

/// Reads an edge list CSV of `src,dst` node index pairs. A header row is
/// optional.
pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut edges = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let record = record.map_err(|e| IoError::Parse { path: path.into(), line, message: e.to_string() })?;
        if record.len() != 2 {
            return Err(IoError::Parse { path: path.into(), line, message: format!("expected 2 columns, found {}", record.len()) });
        }
        let parsed: std::result::Result<Vec<usize>, _> = record.iter().map(str::parse::<usize>).collect();
        match parsed {
            Ok(p) => edges.push((p[0], p[1])),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(IoError::Parse {
                    path: path.into(),
                    line,
                    message: format!("`{}` is not a pair of node indices", record.iter().collect::<Vec<_>>().join(",")),
                })
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_hot(n: usize) -> Matrix {
        Matrix::identity(n)
    }

    #[test]
    fn zero_hops_is_identity() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(g.propagate(&x, 0).unwrap(), x);
    }

    #[test]
    fn isolated_nodes_unchanged() {
        let g = Graph::new(2, &[]).unwrap();
        let x = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 9.0]]).unwrap();
        for r in 0..4 {
            assert_eq!(g.propagate(&x, r).unwrap(), x);
        }
    }

    #[test]
    fn triangle_by_hand() {
        // Every node has degree 3 with its self-loop, so Â is 1/3 everywhere.
        let g = Graph::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let out = g.propagate(&one_hot(3), 1).unwrap();
        for v in out.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn path_by_hand() {
        // Path 0-1-2: degrees with self-loops are 2, 3, 2.
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let out = g.propagate(&one_hot(3), 1).unwrap();
        let s6 = 1.0 / 6f64.sqrt();
        let want = [[0.5, s6, 0.0], [s6, 1.0 / 3.0, s6], [0.0, s6, 0.5]];
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((out.get(i, j) - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn duplicates_and_self_loops_ignored() {
        let a = Graph::new(3, &[(0, 1), (1, 0), (0, 1), (2, 2)]).unwrap();
        let b = Graph::new(3, &[(0, 1)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dangling_edge_is_error() {
        assert!(Graph::new(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn edge_file_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "src,dst\n0,1\n1,2\n").unwrap();
        assert_eq!(read_edges(&p).unwrap(), vec![(0, 1), (1, 2)]);
        fs::write(&p, "0,1\n").unwrap();
        assert_eq!(read_edges(&p).unwrap(), vec![(0, 1)]);
        fs::write(&p, "0,1\nx,2\n").unwrap();
        assert!(matches!(read_edges(&p), Err(IoError::Parse { line: 2, .. })));
    }

    proptest! {
        // Â is symmetric with spectrum in [-1, 1], so propagation never
        // grows the Frobenius norm.
        #[test]
        fn propagation_is_non_expansive(
            edges in prop::collection::vec((0usize..6, 0usize..6), 0..15),
            values in prop::collection::vec(-10.0f64..10.0, 12),
        ) {
            let g = Graph::new(6, &edges).unwrap();
            let x = Matrix::from_vec(6, 2, values).unwrap();
            let norm = |m: &Matrix| m.as_slice().iter().map(|v| v * v).sum::<f64>();
            let y = g.propagate(&x, 3).unwrap();
            prop_assert!(norm(&y) <= norm(&x) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
