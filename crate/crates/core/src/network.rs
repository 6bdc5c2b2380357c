//! Reaction networks, convex state domains, and scaled lattices.
//!
//! A network holds `M` reversible reactions over `N` species. Reaction `j`
//! fires forward with mass-action intensity
//! `k_plus[j] * prod_l x_l^{nu_plus[j][l]}` and moves the state by
//! `h * nu_j`, where `nu_j = nu_minus[j] - nu_plus[j]`; the backward channel
//! uses `nu_minus[j]` as orders and moves by `-h * nu_j`. The convention
//! `0^0 = 1` applies to zero orders.
//!
//! A [`Domain`] is a convex closed region whose closure stays inside the
//! strictly positive orthant, so mass-action intensities are bounded away
//! from zero on it. [`build_grid`] intersects the `h`-spaced nonnegative
//! lattice with the domain closure and records, per point and reaction, the
//! forward/backward neighbors that stay inside: jumps without a recorded
//! neighbor are suppressed, which is the state constraint used everywhere
//! else in the crate.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Jump direction of a reversible reaction channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

// ---------------------------------------------------------------------------
// Reaction networks
// ---------------------------------------------------------------------------

/// A reversible mass-action reaction network.
#[derive(Debug, Clone)]
pub struct ReactionNetwork {
    n_species: usize,
    /// Reactant orders per reaction (row `j` drives the forward channel).
    nu_plus: Vec<Vec<u32>>,
    /// Product orders per reaction (row `j` drives the backward channel).
    nu_minus: Vec<Vec<u32>>,
    k_plus: Vec<f64>,
    k_minus: Vec<f64>,
    /// Net state change of a forward firing: `nu_minus - nu_plus`.
    nu: Vec<Vec<i64>>,
}

impl ReactionNetwork {
    pub fn new(
        n_species: usize,
        nu_plus: Vec<Vec<u32>>,
        nu_minus: Vec<Vec<u32>>,
        k_plus: Vec<f64>,
        k_minus: Vec<f64>,
    ) -> Result<Self> {
        let m = nu_plus.len();
        if n_species == 0 {
            return Err(Error::InvalidModel("need at least one species".into()));
        }
        if m == 0 {
            return Err(Error::InvalidModel("need at least one reaction".into()));
        }
        if nu_minus.len() != m || k_plus.len() != m || k_minus.len() != m {
            return Err(Error::InvalidModel(format!(
                "inconsistent reaction count: {} orders+, {} orders-, {} rates+, {} rates-",
                m,
                nu_minus.len(),
                k_plus.len(),
                k_minus.len()
            )));
        }
        for j in 0..m {
            if nu_plus[j].len() != n_species || nu_minus[j].len() != n_species {
                return Err(Error::InvalidModel(format!(
                    "reaction {j}: stoichiometry rows must have {n_species} entries"
                )));
            }
            if !(k_plus[j].is_finite() && k_minus[j].is_finite())
                || k_plus[j] < 0.0
                || k_minus[j] < 0.0
            {
                return Err(Error::InvalidModel(format!(
                    "reaction {j}: rate constants must be finite and nonnegative"
                )));
            }
        }
        let nu: Vec<Vec<i64>> = (0..m)
            .map(|j| {
                (0..n_species)
                    .map(|l| nu_minus[j][l] as i64 - nu_plus[j][l] as i64)
                    .collect()
            })
            .collect();
        for (j, row) in nu.iter().enumerate() {
            if row.iter().all(|&v| v == 0) {
                return Err(Error::InvalidModel(format!(
                    "reaction {j}: net state change is zero, the jump does nothing"
                )));
            }
        }
        Ok(ReactionNetwork {
            n_species,
            nu_plus,
            nu_minus,
            k_plus,
            k_minus,
            nu,
        })
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_reactions(&self) -> usize {
        self.nu.len()
    }

    /// Net state change (in lattice units) of a forward firing of reaction `j`.
    pub fn nu(&self, j: usize) -> &[i64] {
        &self.nu[j]
    }

    pub fn rate_constant(&self, j: usize, dir: Direction) -> f64 {
        match dir {
            Direction::Forward => self.k_plus[j],
            Direction::Backward => self.k_minus[j],
        }
    }

    /// Monomial orders driving the intensity of channel `(j, dir)`.
    pub fn orders(&self, j: usize, dir: Direction) -> &[u32] {
        match dir {
            Direction::Forward => &self.nu_plus[j],
            Direction::Backward => &self.nu_minus[j],
        }
    }
}

/// Mass-action intensity of channel `(j, dir)` at state `x`:
/// `k * prod_l x_l^{order_l}` with the convention `0^0 = 1`.
pub fn lma_intensity(net: &ReactionNetwork, x: &[f64], j: usize, dir: Direction) -> f64 {
    debug_assert_eq!(x.len(), net.n_species);
    let mut phi = net.rate_constant(j, dir);
    for (xl, &e) in x.iter().zip(net.orders(j, dir)) {
        // powi(0) == 1 even at 0.0, which is exactly the 0^0 = 1 convention.
        phi *= xl.powi(e as i32);
    }
    phi
}

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/// A convex closed region with closure in the strictly positive orthant.
///
/// Membership tests use a signed residual (negative inside) compared against
/// `1e-12 * diameter`, so they are robust to the last-ulp noise of coordinate
/// arithmetic without ever being sensitive to points a meaningful distance
/// outside.
#[derive(Debug, Clone)]
pub enum Domain {
    /// Euclidean ball in the plane.
    Ball { center: [f64; 2], radius: f64 },
    /// Convex polygon with counter-clockwise vertex order.
    ConvexPolygon { vertices: Vec<[f64; 2]> },
    /// Axis-aligned box `[lower_1, upper_1] x ... x [lower_N, upper_N]`.
    AxisBox { lower: Vec<f64>, upper: Vec<f64> },
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl Domain {
    pub fn ball(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidModel("ball radius must be positive".into()));
        }
        if center.iter().any(|&c| !c.is_finite() || c - radius <= 0.0) {
            return Err(Error::InvalidModel(
                "ball closure must lie in the strictly positive orthant".into(),
            ));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn convex_polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidModel("polygon needs at least 3 vertices".into()));
        }
        if vertices
            .iter()
            .any(|v| v.iter().any(|&c| !c.is_finite() || c <= 0.0))
        {
            return Err(Error::InvalidModel(
                "polygon vertices must have strictly positive coordinates".into(),
            ));
        }
        let n = vertices.len();
        let scale: f64 = vertices
            .iter()
            .flat_map(|v| v.iter().map(|c| c.abs()))
            .fold(0.0, f64::max);
        let mut area2 = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let turn = cross([b[0] - a[0], b[1] - a[1]], [c[0] - b[0], c[1] - b[1]]);
            if turn < -1e-9 * scale * scale {
                return Err(Error::InvalidModel(
                    "polygon must be convex with counter-clockwise vertex order".into(),
                ));
            }
            area2 += cross(a, b);
        }
        if area2 <= 0.0 {
            return Err(Error::InvalidModel("polygon has nonpositive area".into()));
        }
        Ok(Domain::ConvexPolygon { vertices })
    }

    pub fn axis_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidModel("box corners must have equal, nonzero length".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite()) || *l <= 0.0 || l > u {
                return Err(Error::InvalidModel(
                    "box needs 0 < lower_i <= upper_i in every coordinate".into(),
                ));
            }
        }
        Ok(Domain::AxisBox { lower, upper })
    }

    /// Ambient dimension (always 2 for balls and polygons).
    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { .. } | Domain::ConvexPolygon { .. } => 2,
            Domain::AxisBox { lower, .. } => lower.len(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::ConvexPolygon { vertices } => {
                let mut d2: f64 = 0.0;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        let dx = a[0] - b[0];
                        let dy = a[1] - b[1];
                        d2 = d2.max(dx * dx + dy * dy);
                    }
                }
                d2.sqrt()
            }
            Domain::AxisBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Membership slack: geometry predicates treat residuals up to this as on
    /// the boundary.
    pub fn tolerance(&self) -> f64 {
        1e-12 * self.diameter()
    }

    /// Signed residual: `<= 0` strictly inside, `0` on the boundary, `> 0`
    /// outside, in units of distance (exact for balls and boxes, a supporting
    /// half-plane bound for polygons).
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                (dx * dx + dy * dy).sqrt() - radius
            }
            Domain::ConvexPolygon { vertices } => {
                let n = vertices.len();
                let mut worst = f64::NEG_INFINITY;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    // CCW order: inside means the point is to the left of
                    // every edge, i.e. cross >= 0.
                    let c = cross(e, [x[0] - a[0], x[1] - a[1]]);
                    worst = worst.max(-c / len);
                }
                worst
            }
            Domain::AxisBox { lower, upper } => {
                let mut worst = f64::NEG_INFINITY;
                for ((l, u), xi) in lower.iter().zip(upper).zip(x) {
                    worst = worst.max(l - xi).max(xi - u);
                }
                worst
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        self.residual(x) <= self.tolerance()
    }

    /// Smallest coordinate value attained on the closure. Positive by
    /// construction; callers use it to bound intensities away from zero.
    pub fn min_coordinate(&self) -> f64 {
        match self {
            Domain::Ball { center, radius } => center
                .iter()
                .map(|c| c - radius)
                .fold(f64::INFINITY, f64::min),
            Domain::ConvexPolygon { vertices } => vertices
                .iter()
                .flat_map(|v| v.iter().copied())
                .fold(f64::INFINITY, f64::min),
            Domain::AxisBox { lower, .. } => lower.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Axis-aligned bounding box of the closure.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::ConvexPolygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                (lo, hi)
            }
            Domain::AxisBox { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    /// Maximal parameter interval `[alpha_lo, alpha_hi]` with
    /// `q + alpha * nu` in the closure, or `None` if the line misses it.
    ///
    /// Tangential contact within tolerance collapses to a length-zero
    /// interval rather than a miss.
    fn line_range(&self, q: &[f64], nu: &[f64]) -> Option<(f64, f64)> {
        let tol = self.tolerance();
        match self {
            Domain::Ball { center, radius } => {
                let d = [q[0] - center[0], q[1] - center[1]];
                let a = nu[0] * nu[0] + nu[1] * nu[1];
                let b = 2.0 * (d[0] * nu[0] + d[1] * nu[1]);
                let c = d[0] * d[0] + d[1] * d[1] - radius * radius;
                if a == 0.0 {
                    return if c <= tol * (2.0 * radius + tol) {
                        Some((0.0, 0.0))
                    } else {
                        None
                    };
                }
                let alpha_min = -b / (2.0 * a);
                // Closest-approach residual in squared units; tolerance in
                // distance units converts to tol * (2r + tol).
                let q_min = c - b * b / (4.0 * a);
                if q_min > tol * (2.0 * radius + tol) {
                    return None;
                }
                let disc = b * b - 4.0 * a * c;
                if disc <= 0.0 {
                    return Some((alpha_min, alpha_min));
                }
                let s = disc.sqrt() / (2.0 * a);
                Some((alpha_min - s, alpha_min + s))
            }
            Domain::ConvexPolygon { vertices } => {
                let nu_norm = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let elen = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    // Constraint: cross(e, q + alpha*nu - a) >= -tol*|e|.
                    let c0 = cross(e, [q[0] - a[0], q[1] - a[1]]) + tol * elen;
                    let c1 = cross(e, [nu[0], nu[1]]);
                    if c1.abs() <= 1e-15 * elen * nu_norm.max(1.0) {
                        if c0 < 0.0 {
                            return None;
                        }
                    } else if c1 > 0.0 {
                        lo = lo.max(-c0 / c1);
                    } else {
                        hi = hi.min(-c0 / c1);
                    }
                }
                finish_interval(lo, hi, tol, nu_norm)
            }
            Domain::AxisBox { lower, upper } => {
                let nu_norm = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for (d, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if nu[d].abs() <= 1e-15 * nu_norm.max(1.0) {
                        if q[d] < l - tol || q[d] > u + tol {
                            return None;
                        }
                    } else {
                        let t1 = (l - tol - q[d]) / nu[d];
                        let t2 = (u + tol - q[d]) / nu[d];
                        lo = lo.max(t1.min(t2));
                        hi = hi.min(t1.max(t2));
                    }
                }
                finish_interval(lo, hi, tol, nu_norm)
            }
        }
    }
}

/// Resolve the raw half-plane/slab intersection `[lo, hi]`: a genuinely empty
/// interval is a miss, while an interval empty by no more than the geometric
/// tolerance is a tangential touch and collapses to its midpoint.
fn finish_interval(lo: f64, hi: f64, tol: f64, nu_norm: f64) -> Option<(f64, f64)> {
    if !(lo.is_finite() && hi.is_finite()) {
        // Unbounded intersection cannot happen for bounded domains unless nu
        // is degenerate; treat as a miss.
        return None;
    }
    if lo <= hi {
        return Some((lo, hi));
    }
    let slack = if nu_norm > 0.0 { 2.0 * tol / nu_norm } else { 0.0 };
    if lo - hi <= slack {
        let mid = 0.5 * (lo + hi);
        return Some((mid, mid));
    }
    None
}

/// In-plane normal used for offsetting segment lines: for `nu = (n0, n1)`
/// this is `(n1, -n0)`, so `{nu, nu_perp}` is an orthogonal basis.
pub fn nu_perp(nu: [f64; 2]) -> [f64; 2] {
    [nu[1], -nu[0]]
}

/// Endpoints `(a_beta, b_beta)` of the maximal parameter interval such that
/// `x0 + beta*nu_perp(nu) + alpha*nu` stays in the domain closure.
pub fn segment_bounds(dom: &Domain, x0: [f64; 2], nu: [f64; 2], beta: f64) -> Result<(f64, f64)> {
    if dom.dim() != 2 {
        return Err(Error::InvalidModel(
            "segment geometry requires a two-dimensional domain".into(),
        ));
    }
    if nu == [0.0, 0.0] {
        return Err(Error::InvalidModel("segment direction must be nonzero".into()));
    }
    let p = nu_perp(nu);
    let q = [x0[0] + beta * p[0], x0[1] + beta * p[1]];
    dom.line_range(&q, &nu).ok_or(Error::NoIntersection)
}

// ---------------------------------------------------------------------------
// Lattices
// ---------------------------------------------------------------------------

/// The `h`-spaced nonnegative lattice intersected with a domain closure,
/// with per-reaction neighbor links. Immutable after construction.
#[derive(Debug, Clone)]
pub struct LatticeGrid {
    h: f64,
    n_species: usize,
    /// Integer multi-indices in lexicographic order.
    points: Vec<Vec<i64>>,
    /// Cached real coordinates `index * h`.
    coords: Vec<Vec<f64>>,
    /// `neighbor[dir][point][reaction]`, `dir` 0 = forward (+nu_j), 1 = backward.
    neighbor: [Vec<Vec<Option<usize>>>; 2],
    index: HashMap<Vec<i64>, usize>,
}

impl LatticeGrid {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    /// Integer multi-index of point `i`.
    pub fn point(&self, i: usize) -> &[i64] {
        &self.points[i]
    }

    /// Real coordinates of point `i`.
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    /// Neighbor reached from point `i` by firing channel `(j, dir)`, if that
    /// state is in the grid; `None` means the jump is suppressed.
    pub fn neighbor(&self, i: usize, j: usize, dir: Direction) -> Option<usize> {
        let d = match dir {
            Direction::Forward => 0,
            Direction::Backward => 1,
        };
        self.neighbor[d][i][j]
    }

    /// Look up a point by its integer multi-index.
    pub fn find(&self, multi_index: &[i64]) -> Option<usize> {
        self.index.get(multi_index).copied()
    }

    /// Grid point whose multi-index is the componentwise rounding of `x / h`,
    /// if it belongs to the grid.
    pub fn find_rounded(&self, x: &[f64]) -> Option<usize> {
        let idx: Vec<i64> = x.iter().map(|&xi| (xi / self.h).round() as i64).collect();
        self.find(&idx)
    }
}

/// Build the state-constrained lattice for `net` on `dom` with spacing `h`.
pub fn build_grid(dom: &Domain, net: &ReactionNetwork, h: f64) -> Result<LatticeGrid> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidModel("grid spacing must be positive".into()));
    }
    if net.n_species() != dom.dim() {
        return Err(Error::InvalidModel(format!(
            "network has {} species but domain dimension is {}",
            net.n_species(),
            dom.dim()
        )));
    }
    let n = dom.dim();
    let tol = dom.tolerance();
    let (lo, hi) = dom.bounding_box();
    let mut i_lo = Vec::with_capacity(n);
    let mut i_hi = Vec::with_capacity(n);
    let mut total: u128 = 1;
    for d in 0..n {
        let a = (((lo[d] - tol) / h).ceil() as i64).max(0);
        let b = ((hi[d] + tol) / h).floor() as i64;
        if b < a {
            return Err(Error::EmptyGrid { h });
        }
        total = total.saturating_mul((b - a + 1) as u128);
        i_lo.push(a);
        i_hi.push(b);
    }
    if total > 20_000_000 {
        return Err(Error::InvalidModel(format!(
            "grid enumeration would visit {total} candidate points; refusing"
        )));
    }

    // Odometer enumeration gives lexicographic point order, so grid layout
    // is deterministic and independent of hash-map iteration.
    let mut points = Vec::new();
    let mut coords = Vec::new();
    let mut cur = i_lo.clone();
    'outer: loop {
        let x: Vec<f64> = cur.iter().map(|&i| i as f64 * h).collect();
        if dom.contains(&x) {
            points.push(cur.clone());
            coords.push(x);
        }
        for d in (0..n).rev() {
            cur[d] += 1;
            if cur[d] <= i_hi[d] {
                continue 'outer;
            }
            cur[d] = i_lo[d];
            if d == 0 {
                break 'outer;
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid { h });
    }

    let index: HashMap<Vec<i64>, usize> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();

    let m = net.n_reactions();
    let mut fwd = vec![vec![None; m]; points.len()];
    let mut bwd = vec![vec![None; m]; points.len()];
    let mut target = vec![0i64; n];
    for (i, p) in points.iter().enumerate() {
        for j in 0..m {
            let nu = net.nu(j);
            for (sign, table) in [(1i64, &mut fwd), (-1i64, &mut bwd)] {
                let mut ok = true;
                for d in 0..n {
                    target[d] = p[d] + sign * nu[d];
                    if target[d] < 0 {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    table[i][j] = index.get(&target[..].to_vec()).copied();
                }
            }
        }
    }

    Ok(LatticeGrid {
        h,
        n_species: n,
        points,
        coords,
        neighbor: [fwd, bwd],
        index,
    })
}

// ---------------------------------------------------------------------------
// Mesh functions
// ---------------------------------------------------------------------------

/// Real-valued function sampled on the points of a grid (lattice, segment, or
/// any other indexed node set). All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("grid function values must be finite".into()));
        }
        Ok(GridFunction { values })
    }

    pub fn constant(value: f64, n: usize) -> Self {
        GridFunction {
            values: vec![value; n],
        }
    }

    /// Sample a coordinate function on every lattice point.
    pub fn from_coords(grid: &LatticeGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        GridFunction::new((0..grid.n_points()).map(|i| f(grid.coords(i))).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `||self - other||_inf`; the lengths must match.
    pub fn sup_dist(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.len(), other.len(), "grid function length mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl From<GridFunction> for Vec<f64> {
    fn from(f: GridFunction) -> Vec<f64> {
        f.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-species unit-rate interconversion: forward consumes one unit of
    /// species 1 and produces one unit of species 2.
    pub(crate) fn interconversion() -> ReactionNetwork {
        ReactionNetwork::new(2, vec![vec![1, 0]], vec![vec![0, 1]], vec![1.0], vec![1.0]).unwrap()
    }

    fn ball_7_3() -> Domain {
        Domain::ball([7.0, 3.0], 2.0f64.sqrt()).unwrap()
    }

    // -- intensities --------------------------------------------------------

    #[test]
    fn mass_action_linear_orders() {
        let net = interconversion();
        assert_eq!(lma_intensity(&net, &[7.0, 3.0], 0, Direction::Forward), 7.0);
        assert_eq!(lma_intensity(&net, &[7.0, 3.0], 0, Direction::Backward), 3.0);
        // Zero population shuts the channel down.
        assert_eq!(lma_intensity(&net, &[4.0, 0.0], 0, Direction::Backward), 0.0);
    }

    #[test]
    fn mass_action_higher_orders_and_zero_convention() {
        // Forward orders (2, 1) with k+ = 0.5: intensity 0.5 * x1^2 * x2.
        let net =
            ReactionNetwork::new(2, vec![vec![2, 1]], vec![vec![0, 0]], vec![0.5], vec![1.0])
                .unwrap();
        assert_eq!(lma_intensity(&net, &[3.0, 4.0], 0, Direction::Forward), 18.0);
        // Backward orders are all zero: the intensity is the bare rate
        // constant even at states with zero coordinates (0^0 = 1).
        assert_eq!(lma_intensity(&net, &[0.0, 0.0], 0, Direction::Backward), 1.0);
    }

    #[test]
    fn zero_net_change_is_rejected() {
        let err = ReactionNetwork::new(2, vec![vec![1, 0]], vec![vec![1, 0]], vec![1.0], vec![1.0]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    // -- grids ---------------------------------------------------------------

    #[test]
    fn unit_ball_grid_has_the_nine_integer_points() {
        let grid = build_grid(&ball_7_3(), &interconversion(), 1.0).unwrap();
        let pts: Vec<Vec<i64>> = (0..grid.n_points()).map(|i| grid.point(i).to_vec()).collect();
        // All integer offsets with dx^2 + dy^2 <= 2 around (7, 3); the four
        // diagonal corners sit exactly on the boundary and are included.
        let expected: Vec<Vec<i64>> = vec![
            vec![6, 2],
            vec![6, 3],
            vec![6, 4],
            vec![7, 2],
            vec![7, 3],
            vec![7, 4],
            vec![8, 2],
            vec![8, 3],
            vec![8, 4],
        ];
        assert_eq!(pts, expected);
    }

    #[test]
    fn neighbor_links_follow_the_reaction_vector() {
        let grid = build_grid(&ball_7_3(), &interconversion(), 1.0).unwrap();
        let at = |p: &[i64]| grid.find(p).unwrap();
        // Forward jump adds nu = (-1, 1).
        assert_eq!(
            grid.neighbor(at(&[7, 3]), 0, Direction::Forward),
            Some(at(&[6, 4]))
        );
        // From (6, 4) the forward target (5, 5) is outside: suppressed.
        assert_eq!(grid.neighbor(at(&[6, 4]), 0, Direction::Forward), None);
        assert_eq!(
            grid.neighbor(at(&[7, 3]), 0, Direction::Backward),
            Some(at(&[8, 2]))
        );
        assert_eq!(grid.neighbor(at(&[8, 2]), 0, Direction::Backward), None);
    }

    #[test]
    fn degenerate_box_is_a_single_point() {
        let dom = Domain::axis_box(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let grid = build_grid(&dom, &interconversion(), 0.25).unwrap();
        assert_eq!(grid.n_points(), 1);
        assert_eq!(grid.point(0), &[4, 4]);
        // No neighbor: every jump leaves the single-point domain.
        assert_eq!(grid.neighbor(0, 0, Direction::Forward), None);
        assert_eq!(grid.neighbor(0, 0, Direction::Backward), None);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let dom = Domain::ball([0.5, 0.5], 0.1).unwrap();
        match build_grid(&dom, &interconversion(), 1.0) {
            Err(Error::EmptyGrid { h }) => assert_eq!(h, 1.0),
            other => panic!("expected EmptyGrid, got {other:?}"),
        }
    }

    #[test]
    fn polygon_grid_matches_square_box() {
        let square = Domain::convex_polygon(vec![
            [6.0, 2.0],
            [8.0, 2.0],
            [8.0, 4.0],
            [6.0, 4.0],
        ])
        .unwrap();
        let boxed = Domain::axis_box(vec![6.0, 2.0], vec![8.0, 4.0]).unwrap();
        let net = interconversion();
        let g1 = build_grid(&square, &net, 1.0).unwrap();
        let g2 = build_grid(&boxed, &net, 1.0).unwrap();
        assert_eq!(g1.n_points(), 9);
        let p1: Vec<_> = (0..g1.n_points()).map(|i| g1.point(i).to_vec()).collect();
        let p2: Vec<_> = (0..g2.n_points()).map(|i| g2.point(i).to_vec()).collect();
        assert_eq!(p1, p2);
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let cw = Domain::convex_polygon(vec![[6.0, 2.0], [6.0, 4.0], [8.0, 4.0], [8.0, 2.0]]);
        assert!(matches!(cw, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn three_species_box_grid() {
        // One reaction consuming one unit of species 3 and producing one of
        // each of species 1, 2.
        let net = ReactionNetwork::new(
            3,
            vec![vec![0, 0, 1]],
            vec![vec![1, 1, 0]],
            vec![1.0],
            vec![1.0],
        )
        .unwrap();
        let dom = Domain::axis_box(vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]).unwrap();
        let grid = build_grid(&dom, &net, 0.5).unwrap();
        assert_eq!(grid.n_points(), 27);
        let at = |p: &[i64]| grid.find(p).unwrap();
        // nu = (1, 1, -1): from (2,2,4)*0.5 = (1,1,2) the forward jump lands
        // at (1.5, 1.5, 1.5).
        assert_eq!(
            grid.neighbor(at(&[2, 2, 4]), 0, Direction::Forward),
            Some(at(&[3, 3, 3]))
        );
        // From a state already at the species-1 cap, forward jumps exit.
        assert_eq!(grid.neighbor(at(&[4, 2, 3]), 0, Direction::Forward), None);
    }

    // -- segment geometry ----------------------------------------------------

    #[test]
    fn centered_chord_bounds() {
        let (a, b) = segment_bounds(&ball_7_3(), [7.0, 3.0], [-1.0, 1.0], 0.0).unwrap();
        assert!((a + 1.0).abs() < 1e-12, "a = {a}");
        assert!((b - 1.0).abs() < 1e-12, "b = {b}");
    }

    #[test]
    fn offset_chord_bounds() {
        // Offset beta * (1, 1): |beta*nu_perp + alpha*nu|^2 = 2 beta^2 + 2 alpha^2,
        // so beta = 0.6 gives alpha = +/- 0.8.
        let (a, b) = segment_bounds(&ball_7_3(), [7.0, 3.0], [-1.0, 1.0], 0.6).unwrap();
        assert!((a + 0.8).abs() < 1e-12, "a = {a}");
        assert!((b - 0.8).abs() < 1e-12, "b = {b}");
    }

    #[test]
    fn tangent_line_collapses_to_a_point() {
        // Start at the top of the ball and run tangentially. Roundoff in
        // 3 + sqrt(2) leaves the start a few ulps inside the ball, so the
        // chord may survive as a sqrt(ulp)-sized interval around 0 rather
        // than collapsing exactly.
        let r = 2.0f64.sqrt();
        let (a, b) = segment_bounds(&ball_7_3(), [7.0, 3.0 + r], [1.0, 0.0], 0.0).unwrap();
        assert!(a <= b, "a = {a}, b = {b}");
        assert!(a.abs() <= 1e-7 && b.abs() <= 1e-7, "a = {a}, b = {b}");
    }

    #[test]
    fn missing_line_is_an_error() {
        let res = segment_bounds(&ball_7_3(), [7.0, 3.0], [-1.0, 1.0], 2.0);
        assert!(matches!(res, Err(Error::NoIntersection)));
    }

    #[test]
    fn perp_convention() {
        assert_eq!(nu_perp([-1.0, 1.0]), [1.0, 1.0]);
    }

    #[test]
    fn box_chord_through_corner_direction() {
        let dom = Domain::axis_box(vec![6.0, 2.0], vec![8.0, 4.0]).unwrap();
        let (a, b) = segment_bounds(&dom, [7.0, 3.0], [-1.0, 1.0], 0.0).unwrap();
        assert!((a + 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9, "({a}, {b})");
    }

    // -- mesh functions -------------------------------------------------------

    #[test]
    fn grid_function_rejects_non_finite_values() {
        assert!(GridFunction::new(vec![0.0, f64::NAN]).is_err());
        assert!(GridFunction::new(vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn grid_function_norms() {
        let f = GridFunction::new(vec![1.0, -3.0, 2.0]).unwrap();
        let g = GridFunction::new(vec![0.0, -1.0, 2.0]).unwrap();
        assert_eq!(f.min(), -3.0);
        assert_eq!(f.max(), 2.0);
        assert_eq!(f.sup_norm(), 3.0);
        assert_eq!(f.sup_dist(&g), 2.0);
    }

    // -- properties -----------------------------------------------------------

    proptest! {
        /// Forward and backward neighbor tables are transposes of each other.
        #[test]
        fn neighbor_links_are_symmetric(
            cx in 4.0f64..10.0,
            cy in 4.0f64..10.0,
            radius in 0.6f64..3.0,
            h_num in 1u32..5,
        ) {
            let h = h_num as f64 * 0.25;
            prop_assume!(cx - radius > 0.1 && cy - radius > 0.1);
            let dom = Domain::ball([cx, cy], radius).unwrap();
            let net = interconversion();
            if let Ok(grid) = build_grid(&dom, &net, h) {
                for i in 0..grid.n_points() {
                    if let Some(k) = grid.neighbor(i, 0, Direction::Forward) {
                        prop_assert_eq!(grid.neighbor(k, 0, Direction::Backward), Some(i));
                    }
                    if let Some(k) = grid.neighbor(i, 0, Direction::Backward) {
                        prop_assert_eq!(grid.neighbor(k, 0, Direction::Forward), Some(i));
                    }
                }
            }
        }

        /// Mass-action intensities are bounded away from zero on grids over
        /// domains with positive coordinates and positive rate constants.
        #[test]
        fn intensities_are_positive_on_grids(
            cx in 4.0f64..10.0,
            radius in 0.6f64..2.5,
        ) {
            prop_assume!(cx - radius > 0.2);
            let dom = Domain::ball([cx, 5.0], radius).unwrap();
            let net = interconversion();
            if let Ok(grid) = build_grid(&dom, &net, 0.5) {
                // c0 = k * (min coordinate)^(max order) is a uniform lower bound.
                let c0 = dom.min_coordinate();
                prop_assert!(c0 > 0.0);
                for i in 0..grid.n_points() {
                    let x = grid.coords(i);
                    prop_assert!(lma_intensity(&net, x, 0, Direction::Forward) >= c0 - 1e-12);
                    prop_assert!(lma_intensity(&net, x, 0, Direction::Backward) >= c0 - 1e-12);
                }
            }
        }

        /// Perturbing h by a relative 1e-13 never changes the point set for
        /// the well-separated radii used in the test domains.
        #[test]
        fn grids_are_robust_to_last_ulp_spacing_noise(scale in 1u32..4) {
            let h = 1.0 / f64::from(1u32 << scale);
            let dom = Domain::ball([7.0, 3.0], 2.0f64.sqrt()).unwrap();
            let net = interconversion();
            let g0 = build_grid(&dom, &net, h).unwrap();
            for bump in [-1e-13, 1e-13] {
                let g1 = build_grid(&dom, &net, h * (1.0 + bump)).unwrap();
                prop_assert_eq!(g0.n_points(), g1.n_points());
                for i in 0..g0.n_points() {
                    prop_assert_eq!(g0.point(i), g1.point(i));
                }
            }
        }

        /// Segment endpoints move continuously with the offset (checked away
        /// from the tangency where the modulus degenerates).
        #[test]
        fn segment_endpoints_move_continuously(beta in -0.5f64..0.5) {
            let dom = Domain::ball([7.0, 3.0], 2.0f64.sqrt()).unwrap();
            let delta = 1e-4;
            let (a0, b0) = segment_bounds(&dom, [7.0, 3.0], [-1.0, 1.0], beta).unwrap();
            let (a1, b1) = segment_bounds(&dom, [7.0, 3.0], [-1.0, 1.0], beta + delta).unwrap();
            // For |beta| <= 0.5 + eps the chord-length derivative is bounded
            // by ~2/sqrt(1 - 0.51^2) < 3.
            prop_assert!((a1 - a0).abs() <= 3.0 * delta);
            prop_assert!((b1 - b0).abs() <= 3.0 * delta);
        }
    }
}
