//! Undirected, weighted sensory topology.

use crate::{Error, Matrix, Result};

/// `λ₂` above this value declares the graph connected.
pub const CONNECTIVITY_TOLERANCE: f64 = 1e-8;

/// Weighted undirected measurement graph over `N ≥ 3` agents.
///
/// Immutable after construction. Neighbor sets are `{j : w_ij > 0}` and are
/// kept in ascending index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensoryGraph {
    weights: Matrix,
    neighbors: Vec<Vec<usize>>,
    lambda2: f64,
}

impl SensoryGraph {
    /// Builds a graph from a full weight matrix, validating symmetry, a zero
    /// diagonal, nonnegative weights and connectivity.
    pub fn from_weights(weights: Matrix) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::config("graph", "weight matrix must be square"));
        }
        if n < 3 {
            return Err(Error::config("graph", format!("need at least 3 agents, got {n}")));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::config("graph", format!("self-loop on agent {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::config(
                        "graph",
                        format!("weight ({i}, {j}) = {w} must be finite and nonnegative"),
                    ));
                }
                if w != weights[(j, i)] {
                    return Err(Error::config(
                        "graph",
                        format!("weights ({i}, {j}) and ({j}, {i}) differ"),
                    ));
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| weights[(i, j)] > 0.0).collect())
            .collect();
        let lambda2 = algebraic_connectivity(&laplacian_of(&weights))?;
        Ok(Self {
            weights,
            neighbors,
            lambda2,
        })
    }

    /// Builds a graph from a 0-based weighted edge list. Each undirected edge
    /// is listed once; listing both directions with equal weights is accepted.
    pub fn from_edges(agent_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = Matrix::zeros(agent_count, agent_count);
        for (k, &(i, j, weight)) in edges.iter().enumerate() {
            let path = format!("graph.edges[{k}]");
            if i >= agent_count || j >= agent_count {
                return Err(Error::config(
                    path,
                    format!("agent index out of range for {agent_count} agents"),
                ));
            }
            if i == j {
                return Err(Error::config(path, "self-loops are not allowed"));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::config(path, format!("weight {weight} must be positive")));
            }
            let existing = w[(i, j)];
            if existing != 0.0 && existing != weight {
                return Err(Error::config(path, "conflicting duplicate edge"));
            }
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        Self::from_weights(w)
    }

    /// Ring `0 - 1 - … - (N-1) - 0` with uniform weight.
    pub fn ring(agent_count: usize, weight: f64) -> Result<Self> {
        let edges: Vec<_> = (0..agent_count)
            .map(|i| (i, (i + 1) % agent_count, weight))
            .collect();
        Self::from_edges(agent_count, &edges)
    }

    pub fn agent_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Neighbors of agent `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.agent_count();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).filter_map(move |j| {
                let w = self.weights[(i, j)];
                (w > 0.0).then_some((i, j, w))
            })
        })
    }

    pub fn laplacian(&self) -> Matrix {
        laplacian_of(&self.weights)
    }

    /// Algebraic connectivity computed at construction.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
}

/// Weighted Laplacian `L = D - A` of a graph.
pub fn build_laplacian(graph: &SensoryGraph) -> Matrix {
    graph.laplacian()
}

fn laplacian_of(weights: &Matrix) -> Matrix {
    let n = weights.nrows();
    let mut l = -weights.clone();
    for i in 0..n {
        l[(i, i)] = weights.row(i).sum();
    }
    l
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn spectrum(symmetric: &Matrix) -> Vec<f64> {
    let mut eig: Vec<f64> = symmetric
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Second-smallest Laplacian eigenvalue; fails when the graph is disconnected.
pub fn algebraic_connectivity(laplacian: &Matrix) -> Result<f64> {
    let eig = spectrum(laplacian);
    let lambda2 = eig.get(1).copied().unwrap_or(0.0);
    if lambda2 > CONNECTIVITY_TOLERANCE {
        Ok(lambda2)
    } else {
        Err(Error::Disconnected { lambda2 })
    }
}
