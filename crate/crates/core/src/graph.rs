//! The weighted jump graph underlying every solver in the crate.
//!
//! Nodes are admissible states (lattice points, segment points, or ad-hoc
//! test states); a directed edge `i -> k` with weight `w` records that the
//! process at node `i` jumps to node `k` with intensity `w` (rate `w / h`
//! after the jump-size scaling). State constraints are structural: a
//! suppressed jump simply has no edge, so the generator, the backward
//! Hamilton-Jacobi operator and the controlled forward equation all read the
//! same topology and never consult the domain again.

use crate::error::{Error, Result};
use crate::network::{build_grid, lma_intensity, Direction, Domain, LatticeGrid, ReactionNetwork};

/// One directed jump channel out of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEdge {
    pub target: usize,
    /// Intensity at the source node (nonnegative; the per-time rate is
    /// `weight / h`).
    pub weight: f64,
}

/// Directed weighted jump graph with mesh scale `h`.
#[derive(Debug, Clone)]
pub struct JumpGraph {
    h: f64,
    out: Vec<Vec<JumpEdge>>,
}

impl JumpGraph {
    /// Assemble a graph from explicit adjacency. Intended for small closed
    /// systems (oracle tests, custom intensity tables).
    pub fn from_parts(h: f64, out: Vec<Vec<JumpEdge>>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidModel("graph scale h must be positive".into()));
        }
        let n = out.len();
        for (i, edges) in out.iter().enumerate() {
            for e in edges {
                if e.target >= n {
                    return Err(Error::InvalidModel(format!(
                        "edge {i} -> {} points outside the node set", e.target
                    )));
                }
                if e.target == i {
                    return Err(Error::InvalidModel(format!("self-loop at node {i}")));
                }
                if !(e.weight.is_finite() && e.weight >= 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "edge {i} -> {} has invalid weight {}", e.target, e.weight
                    )));
                }
            }
        }
        Ok(JumpGraph { h, out })
    }

    /// Mass-action weights on a state-constrained lattice: every recorded
    /// neighbor link becomes an edge with the channel intensity evaluated at
    /// the source point.
    pub fn from_lattice(net: &ReactionNetwork, grid: &LatticeGrid) -> Self {
        let mut out = Vec::with_capacity(grid.n_points());
        for i in 0..grid.n_points() {
            let x = grid.coords(i);
            let mut edges = Vec::new();
            for j in 0..net.n_reactions() {
                for dir in [Direction::Forward, Direction::Backward] {
                    if let Some(k) = grid.neighbor(i, j, dir) {
                        edges.push(JumpEdge {
                            target: k,
                            weight: lma_intensity(net, x, j, dir),
                        });
                    }
                }
            }
            out.push(edges);
        }
        JumpGraph { h: grid.h(), out }
    }

    /// Per-point intensity tables on a lattice, for intensities beyond mass
    /// action: `phi[dir][point][reaction]` with `dir` 0 = forward, 1 = backward.
    /// Entries whose neighbor link is suppressed are ignored.
    pub fn from_lattice_table(
        grid: &LatticeGrid,
        n_reactions: usize,
        phi_fwd: &[Vec<f64>],
        phi_bwd: &[Vec<f64>],
    ) -> Result<Self> {
        let n = grid.n_points();
        if phi_fwd.len() != n || phi_bwd.len() != n {
            return Err(Error::InvalidModel(format!(
                "intensity tables must have one row per grid point ({n})"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if phi_fwd[i].len() != n_reactions || phi_bwd[i].len() != n_reactions {
                return Err(Error::InvalidModel(format!(
                    "intensity table row {i} must have {n_reactions} entries"
                )));
            }
            let mut edges = Vec::new();
            for j in 0..n_reactions {
                for (dir, phi) in [(Direction::Forward, &phi_fwd), (Direction::Backward, &phi_bwd)]
                {
                    if let Some(k) = grid.neighbor(i, j, dir) {
                        let w = phi[i][j];
                        if !(w.is_finite() && w >= 0.0) {
                            return Err(Error::InvalidModel(format!(
                                "intensity table entry ({i}, {j}) is invalid: {w}"
                            )));
                        }
                        edges.push(JumpEdge { target: k, weight: w });
                    }
                }
            }
            out.push(edges);
        }
        Ok(JumpGraph { h: grid.h(), out })
    }

    /// Convenience: mass-action graph straight from a domain.
    pub fn from_domain(net: &ReactionNetwork, dom: &Domain, h: f64) -> Result<Self> {
        Ok(JumpGraph::from_lattice(net, &build_grid(dom, net, h)?))
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.out.len()
    }

    pub fn out_edges(&self, i: usize) -> &[JumpEdge] {
        &self.out[i]
    }

    /// Total outgoing intensity at node `i` (rate times `h`).
    pub fn total_weight(&self, i: usize) -> f64 {
        self.out[i].iter().map(|e| e.weight).sum()
    }

    /// Largest total outgoing intensity over all nodes.
    pub fn max_total_weight(&self) -> f64 {
        (0..self.n_nodes())
            .map(|i| self.total_weight(i))
            .fold(0.0, f64::max)
    }
}
