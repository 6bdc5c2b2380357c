//! Reduction of a single-reaction two-species system to a one-dimensional
//! lattice chain.
//!
//! With one reaction the state only ever moves along `nu`, so the dynamics
//! through `x0` decomposes into independent chains indexed by the transverse
//! offset `beta`. Points on a chain are `x0 + beta*nu_perp + (r + k*h)*nu`;
//! the domain cuts the admissible `k` down to a finite window `[k_a, k_b]`,
//! and the window endpoints are exactly where the state constraint shows up
//! as missing jump edges. Solving the full lattice equation on such a chain
//! is the same as solving it on the 2-D lattice restricted to the chain —
//! the projection identity that the tests here pin down — which connects the
//! 2-D solver to the interval limit handled by [`crate::chje`].

use crate::chje::Hamiltonian1D;
use crate::dhje;
use crate::error::{Error, Result};
use crate::graph::{JumpEdge, JumpGraph};
use crate::network::{nu_perp, segment_bounds, Domain, GridFunction};

/// A finite chain of lattice points along the reaction direction.
#[derive(Debug, Clone)]
pub struct SegmentGrid {
    x0: [f64; 2],
    nu: [f64; 2],
    nu_perp: [f64; 2],
    beta: f64,
    /// Offset of the `k = 0` point, reduced into `(-h, h)`.
    r: f64,
    h: f64,
    k_a: i64,
    k_b: i64,
    /// Admissible parameter interval of the full (unmeshed) segment.
    a_beta: f64,
    b_beta: f64,
}

impl SegmentGrid {
    pub fn n_points(&self) -> usize {
        (self.k_b - self.k_a + 1) as usize
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k_range(&self) -> (i64, i64) {
        (self.k_a, self.k_b)
    }

    /// Parameter interval of the continuous segment this chain meshes.
    pub fn alpha_bounds(&self) -> (f64, f64) {
        (self.a_beta, self.b_beta)
    }

    /// Chain coordinate of mesh node `idx`.
    pub fn alpha(&self, idx: usize) -> f64 {
        debug_assert!(idx < self.n_points());
        self.r + (self.k_a + idx as i64) as f64 * self.h
    }

    /// Ambient coordinates of mesh node `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let al = self.alpha(idx);
        [
            self.x0[0] + self.beta * self.nu_perp[0] + al * self.nu[0],
            self.x0[1] + self.beta * self.nu_perp[1] + al * self.nu[1],
        ]
    }

    /// Sample a function of the ambient point onto the chain.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Result<GridFunction> {
        GridFunction::new((0..self.n_points()).map(|i| f(self.point(i))).collect())
    }
}

/// Mesh the chain through `x0 + beta*nu_perp` with spacing `h` and offset
/// `r` (reduced mod `h`), keeping exactly the points inside the domain.
pub fn build_segment_grid(
    dom: &Domain,
    x0: [f64; 2],
    nu: [f64; 2],
    beta: f64,
    r: f64,
    h: f64,
) -> Result<SegmentGrid> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidModel(format!("mesh width must be positive, got {h}")));
    }
    let (a, b) = segment_bounds(dom, x0, nu, beta)?;
    let r = r % h;
    let perp = nu_perp(nu);
    let point_at = |k: i64| -> [f64; 2] {
        let al = r + k as f64 * h;
        [
            x0[0] + beta * perp[0] + al * nu[0],
            x0[1] + beta * perp[1] + al * nu[1],
        ]
    };
    // Nominal window from the parameter interval, then verified against the
    // domain membership test itself so endpoint roundoff cannot leave a
    // stray outside point or drop a genuine one.
    let mut k_a = ((a - r) / h - 1e-9).ceil() as i64;
    let mut k_b = ((b - r) / h + 1e-9).floor() as i64;
    while k_a <= k_b && !dom.contains(&point_at(k_a)) {
        k_a += 1;
    }
    while k_b >= k_a && !dom.contains(&point_at(k_b)) {
        k_b -= 1;
    }
    while dom.contains(&point_at(k_a - 1)) {
        k_a -= 1;
    }
    while dom.contains(&point_at(k_b + 1)) {
        k_b += 1;
    }
    if k_a > k_b {
        return Err(Error::EmptyGrid { h });
    }
    Ok(SegmentGrid { x0, nu, nu_perp: perp, beta, r, h, k_a, k_b, a_beta: a, b_beta: b })
}

/// The chain as a jump graph: node `i` jumps up with intensity
/// `phi_plus(alpha_i)` and down with `phi_minus(alpha_i)`; the window
/// endpoints simply lack the outward edge.
pub fn segment_graph(seg: &SegmentGrid, ham: &Hamiltonian1D) -> JumpGraph {
    let n = seg.n_points();
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        let al = seg.alpha(i);
        if i + 1 < n {
            out[i].push(JumpEdge { target: i + 1, weight: ham.phi_plus(al) });
        }
        if i > 0 {
            out[i].push(JumpEdge { target: i - 1, weight: ham.phi_minus(al) });
        }
    }
    JumpGraph::from_parts(seg.h, out).expect("chain weights are validated rates")
}

/// Evolve the chain's lattice equation to time `t`.
pub fn evolve_segment(
    seg: &SegmentGrid,
    ham: &Hamiltonian1D,
    w0: &GridFunction,
    t: f64,
) -> Result<GridFunction> {
    let g = segment_graph(seg, ham);
    dhje::evolve_ode(&g, w0, t)
}

/// Sup distance between two equally sized chains compared index-by-index.
pub fn compare_matched_grids(w_a: &GridFunction, w_b: &GridFunction) -> Result<f64> {
    if w_a.len() != w_b.len() {
        return Err(Error::SizeMismatch { left: w_a.len(), right: w_b.len() });
    }
    Ok(w_a.sup_dist(w_b))
}

/// Find a mesh width in `[h_lo, h_hi]` whose chain has exactly
/// `target_count` points, by bisecting the (weakly decreasing) point count.
///
/// Used to compare a chain against a slightly offset chain index-by-index:
/// the offset shrinks the admissible window, so the same mesh width can lose
/// a point, and a nearby width restores the count.
pub fn match_mesh_for_count(
    dom: &Domain,
    x0: [f64; 2],
    nu: [f64; 2],
    beta: f64,
    r: f64,
    target_count: usize,
    h_lo: f64,
    h_hi: f64,
) -> Result<SegmentGrid> {
    if !(h_lo > 0.0 && h_hi > h_lo) {
        return Err(Error::InvalidModel("need 0 < h_lo < h_hi".into()));
    }
    let count = |h: f64| -> Result<usize> {
        match build_segment_grid(dom, x0, nu, beta, r, h) {
            Ok(g) => Ok(g.n_points()),
            Err(Error::EmptyGrid { .. }) => Ok(0),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (h_lo, h_hi);
    let (c_lo, c_hi) = (count(lo)?, count(hi)?);
    if c_lo == target_count {
        return build_segment_grid(dom, x0, nu, beta, r, lo);
    }
    if c_hi == target_count {
        return build_segment_grid(dom, x0, nu, beta, r, hi);
    }
    if !(c_hi <= target_count && target_count <= c_lo) {
        return Err(Error::InvalidModel(format!(
            "point count {target_count} not attainable in [{h_lo}, {h_hi}] \
             (counts {c_lo} down to {c_hi})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = count(mid)?;
        if c == target_count {
            return build_segment_grid(dom, x0, nu, beta, r, mid);
        }
        if c > target_count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::InvalidModel(format!(
        "no mesh width in [{h_lo}, {h_hi}] yields exactly {target_count} points \
         (the count jumps past it)"
    )))
}
