//! The one-dimensional continuous Hamilton-Jacobi limit on an interval.
//!
//! On the segment `[a, b]` the evolution is
//!
//! ```text
//! dw/dt = phi_plus(alpha) * (exp(dw/dalpha) - 1)
//!       + phi_minus(alpha) * (exp(-dw/dalpha) - 1),
//! ```
//!
//! with no-flux (Neumann) behavior at both ends: the state constraint of the
//! lattice process survives the limit as a boundary condition, not a boundary
//! term. Three independent routes to `w(., t)` live here — an upwind
//! finite-difference scheme, a direct optimal-control recursion over reflected
//! paths, and the action form `w = sup_y (w0(y) - I(y))` built from the rate
//! table — plus the zero-cost (mean-field) path itself. Agreement between the
//! routes is the main correctness check for all of them.

use crate::error::{Error, Result};
use crate::network::{segment_bounds, Domain, ReactionNetwork};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rate coefficient along the segment: either an explicit affine profile or a
/// mass-action monomial restricted to the line `base + alpha * direction`.
#[derive(Debug, Clone)]
pub enum Phi1D {
    Affine { c0: f64, c1: f64 },
    MassAction {
        k: f64,
        exponents: [u32; 2],
        base: [f64; 2],
        direction: [f64; 2],
    },
}

impl Phi1D {
    pub fn eval(&self, alpha: f64) -> f64 {
        match self {
            Phi1D::Affine { c0, c1 } => c0 + c1 * alpha,
            Phi1D::MassAction { k, exponents, base, direction } => {
                let mut v = *k;
                for l in 0..2 {
                    if exponents[l] > 0 {
                        // Coordinates are concentrations; endpoint roundoff can
                        // produce -1e-17, which must not flip the sign.
                        let x = (base[l] + alpha * direction[l]).max(0.0);
                        v *= x.powi(exponents[l] as i32);
                    }
                }
                v
            }
        }
    }
}

/// Uniformly spaced sample points including both endpoints.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && b > a);
    let d = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { b } else { a + d * i as f64 }).collect()
}

/// Linear interpolation on a uniform grid starting at `a` with spacing `d`.
/// `x` must already lie within the grid's span. Infinite node values
/// propagate unless their interpolation weight is exactly zero.
fn lerp_uniform(a: f64, d: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let pos = ((x - a) / d).clamp(0.0, (n - 1) as f64);
    let i0 = (pos.floor() as usize).min(n - 2);
    let frac = pos - i0 as f64;
    if frac == 0.0 {
        values[i0]
    } else if frac == 1.0 {
        values[i0 + 1]
    } else {
        (1.0 - frac) * values[i0] + frac * values[i0 + 1]
    }
}

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

/// The segment Hamiltonian: interval `[a, b]` with positive rate profiles.
#[derive(Debug, Clone)]
pub struct Hamiltonian1D {
    a: f64,
    b: f64,
    phi_plus: Phi1D,
    phi_minus: Phi1D,
}

impl Hamiltonian1D {
    /// Validates `a < b` and strict positivity of both profiles on a dense
    /// sample of `[a, b]` (the scheme, the Legendre transform and the CFL
    /// rule all divide by or take logarithms of the rates).
    pub fn new(a: f64, b: f64, phi_plus: Phi1D, phi_minus: Phi1D) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidModel(format!(
                "segment endpoints must satisfy a < b, got [{a}, {b}]"
            )));
        }
        let ham = Hamiltonian1D { a, b, phi_plus, phi_minus };
        for &alpha in &uniform_grid(a, b, 2049) {
            let (p, m) = (ham.phi_plus.eval(alpha), ham.phi_minus.eval(alpha));
            if !(p.is_finite() && m.is_finite() && p > 0.0 && m > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "rate profiles must be positive on the segment; at alpha = {alpha}: \
                     phi_plus = {p}, phi_minus = {m}"
                )));
            }
        }
        Ok(ham)
    }

    /// Build the Hamiltonian for a single-reaction two-species network along
    /// the reachable segment through `x0 + beta * nu_perp`: the interval is
    /// the chord the reaction direction cuts out of the domain, and the rate
    /// profiles are the mass-action intensities restricted to that line.
    pub fn from_network_segment(
        net: &ReactionNetwork,
        dom: &Domain,
        x0: [f64; 2],
        beta: f64,
    ) -> Result<Self> {
        if net.n_species() != 2 || net.n_reactions() != 1 {
            return Err(Error::InvalidModel(
                "segment reduction needs exactly two species and one reaction".into(),
            ));
        }
        let nu: [f64; 2] = {
            let n = net.nu(0);
            [n[0] as f64, n[1] as f64]
        };
        let (a, b) = segment_bounds(dom, x0, nu, beta)?;
        if !(a < b) {
            return Err(Error::InvalidModel(format!(
                "segment through x0 = {x0:?} at offset {beta} degenerates to a point"
            )));
        }
        let perp = crate::network::nu_perp(nu);
        let base = [x0[0] + beta * perp[0], x0[1] + beta * perp[1]];
        // Both intensities are evaluated at the pre-jump point x(alpha), so
        // they share the same line parameterization.
        let phi_plus = Phi1D::MassAction {
            k: net.rate_constant(0, crate::network::Direction::Forward),
            exponents: {
                let o = net.orders(0, crate::network::Direction::Forward);
                [o[0], o[1]]
            },
            base,
            direction: nu,
        };
        let phi_minus = Phi1D::MassAction {
            k: net.rate_constant(0, crate::network::Direction::Backward),
            exponents: {
                let o = net.orders(0, crate::network::Direction::Backward);
                [o[0], o[1]]
            },
            base,
            direction: nu,
        };
        Hamiltonian1D::new(a, b, phi_plus, phi_minus)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn phi_plus(&self, alpha: f64) -> f64 {
        self.phi_plus.eval(alpha)
    }

    pub fn phi_minus(&self, alpha: f64) -> f64 {
        self.phi_minus.eval(alpha)
    }

    /// `H(alpha, p) = phi_plus (e^p - 1) + phi_minus (e^{-p} - 1)`.
    pub fn h_value(&self, alpha: f64, p: f64) -> f64 {
        self.phi_plus(alpha) * (p.exp() - 1.0) + self.phi_minus(alpha) * ((-p).exp() - 1.0)
    }

    /// Zero-cost velocity `phi_plus - phi_minus`.
    pub fn drift(&self, alpha: f64) -> f64 {
        self.phi_plus(alpha) - self.phi_minus(alpha)
    }

    fn max_abs_drift(&self) -> f64 {
        uniform_grid(self.a, self.b, 513)
            .iter()
            .fold(0.0f64, |m, &al| m.max(self.drift(al).abs()))
    }
}

// ---------------------------------------------------------------------------
// Legendre transform
// ---------------------------------------------------------------------------

/// Closed-form Legendre transform of the Hamiltonian at `(alpha, s)`:
/// returns `(p_star, cost)` where `cost = sup_p (s p - H(alpha, p))` and
/// `p_star` attains it.
///
/// With `D = sqrt(s^2 + 4 phi_plus phi_minus)` the optimum is
/// `p* = ln((s + D) / (2 phi_plus))`; for `s < 0` the algebraically equal
/// form `ln(2 phi_minus / (D - s))` avoids the cancellation in `s + D`.
/// The cost `s p* - D + phi_plus + phi_minus` is clamped at zero, its exact
/// minimum (attained at the drift velocity).
pub fn legendre(ham: &Hamiltonian1D, alpha: f64, s: f64) -> (f64, f64) {
    let fp = ham.phi_plus(alpha);
    let fm = ham.phi_minus(alpha);
    let d = (s * s + 4.0 * fp * fm).sqrt();
    let p_star = if s >= 0.0 {
        ((s + d) / (2.0 * fp)).ln()
    } else {
        (2.0 * fm / (d - s)).ln()
    };
    let cost = (s * p_star - d + fp + fm).max(0.0);
    (p_star, cost)
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Final time slice of the finite-difference solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FdSolution {
    pub alphas: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
    pub steps: usize,
}

impl FdSolution {
    /// Linear interpolation of the final slice.
    pub fn value_at(&self, alpha: f64) -> f64 {
        let d = self.alphas[1] - self.alphas[0];
        lerp_uniform(self.alphas[0], d, &self.w, alpha.clamp(self.alphas[0], *self.alphas.last().unwrap()))
    }

    /// Largest one-sided difference quotient of the final slice.
    pub fn max_slope(&self) -> f64 {
        let d = self.alphas[1] - self.alphas[0];
        self.w
            .windows(2)
            .fold(0.0f64, |m, p| m.max(((p[1] - p[0]) / d).abs()))
    }
}

/// Upwind rhs with copied-ghost (no-flux) endpoints. Returns the stability
/// rate `max_i (phi_plus e^{D+ w} + phi_minus e^{-D- w}) / dalpha`.
fn fd_rhs(fp: &[f64], fm: &[f64], w: &[f64], dalpha: f64, out: &mut [f64]) -> f64 {
    let n = w.len();
    let mut rate = 0.0f64;
    for i in 0..n {
        let dp = if i + 1 < n { (w[i + 1] - w[i]) / dalpha } else { 0.0 };
        let dm = if i > 0 { (w[i] - w[i - 1]) / dalpha } else { 0.0 };
        let ep = dp.exp();
        let em = (-dm).exp();
        out[i] = fp[i] * (ep - 1.0) + fm[i] * (em - 1.0);
        rate = rate.max((fp[i] * ep + fm[i] * em) / dalpha);
    }
    rate
}

/// Solve the interval equation by the monotone upwind scheme.
///
/// The forward difference feeds the `e^{dw} - 1` term and the backward
/// difference the `e^{-dw} - 1` term, which makes every update a
/// nondecreasing function of the neighbor values provided
/// `dt * rate <= 1`; time stepping is forward Euler at half that bound
/// (recomputed every step), so the discrete solution inherits the comparison
/// principle. Endpoint ghosts copy the boundary value, which is the no-flux
/// condition. An explicit `dt` above the current half-CFL bound is
/// [`Error::CflViolation`].
pub fn solve_fd(ham: &Hamiltonian1D, w0: &[f64], t: f64, dt: Option<f64>) -> Result<FdSolution> {
    let n = w0.len();
    if n < 3 {
        return Err(Error::InvalidModel("need at least 3 interval grid points".into()));
    }
    if !w0.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidModel("initial slice must be finite".into()));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidModel("evolution time must be nonnegative".into()));
    }
    let alphas = uniform_grid(ham.a, ham.b, n);
    let dalpha = (ham.b - ham.a) / (n - 1) as f64;
    let fp: Vec<f64> = alphas.iter().map(|&al| ham.phi_plus(al)).collect();
    let fm: Vec<f64> = alphas.iter().map(|&al| ham.phi_minus(al)).collect();

    let mut w = w0.to_vec();
    let mut rhs = vec![0.0; n];
    let mut s = 0.0;
    let mut steps = 0;
    let step_floor = 1e-15 * t.max(1.0);
    while s < t {
        let rate = fd_rhs(&fp, &fm, &w, dalpha, &mut rhs);
        let bound = 0.5 / rate;
        let step = match dt {
            Some(fixed) => {
                if fixed > bound {
                    return Err(Error::CflViolation { dt: fixed, bound });
                }
                fixed.min(t - s)
            }
            None => bound.min(t - s),
        };
        if step < step_floor {
            return Err(Error::StepTooSmall { t: s, dt: step, floor: step_floor });
        }
        for i in 0..n {
            w[i] += step * rhs[i];
        }
        s += step;
        steps += 1;
    }
    Ok(FdSolution { alphas, w, t, steps })
}

// ---------------------------------------------------------------------------
// Optimal-control recursion (Lax-Oleinik over reflected paths)
// ---------------------------------------------------------------------------

/// Time-indexed value slices from the control recursion.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub alphas: Vec<f64>,
    pub times: Vec<f64>,
    /// `levels[m][i]` is the value at `times[m]`, `alphas[i]`.
    pub levels: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn terminal(&self) -> &[f64] {
        self.levels.last().unwrap()
    }

    pub fn value_at(&self, alpha: f64) -> f64 {
        let d = self.alphas[1] - self.alphas[0];
        lerp_uniform(
            self.alphas[0],
            d,
            self.terminal(),
            alpha.clamp(self.alphas[0], *self.alphas.last().unwrap()),
        )
    }
}

fn map_indices<F: Fn(usize) -> f64 + Sync + Send>(parallel: bool, n: usize, f: F) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Default velocity range for the control recursion: generous room above
/// both the zero-cost speed and the steepest slope the data can sustain.
fn default_v_max(ham: &Hamiltonian1D, w0: &[f64], dalpha: f64) -> f64 {
    let lip = w0
        .windows(2)
        .fold(0.0f64, |m, p| m.max(((p[1] - p[0]) / dalpha).abs()));
    2.0 * ham.max_abs_drift() + 4.0 * lip
}

/// One-step transitions for the control recursion, precomputed once: the
/// Hamiltonian is autonomous, so the table is shared by every time slice.
struct PushTable {
    /// Flattened `(i, k) -> (interp index, interp fraction, step cost)`.
    idx: Vec<u32>,
    frac: Vec<f64>,
    cost: Vec<f64>,
    n_v_total: usize,
}

fn build_push_table(
    ham: &Hamiltonian1D,
    alphas: &[f64],
    velocities: &[f64],
    ds: f64,
) -> PushTable {
    let n = alphas.len();
    let dalpha = alphas[1] - alphas[0];
    let (a, b) = (alphas[0], *alphas.last().unwrap());
    let nk = velocities.len();
    let mut idx = vec![0u32; n * nk];
    let mut frac = vec![0.0; n * nk];
    let mut cost = vec![0.0; n * nk];
    for i in 0..n {
        let al = alphas[i];
        for (k, &v) in velocities.iter().enumerate() {
            // Constant control v over the slice; hitting an endpoint sticks
            // there (the reflection term absorbs the outward excess), so the
            // arrival point is just the clamp.
            let target = (al + v * ds).clamp(a, b);
            let pos = ((target - a) / dalpha).clamp(0.0, (n - 1) as f64);
            let i0 = (pos.floor() as usize).min(n - 2);
            idx[i * nk + k] = i0 as u32;
            frac[i * nk + k] = pos - i0 as f64;
            cost[i * nk + k] = ds * legendre(ham, al, v).1;
        }
    }
    PushTable { idx, frac, cost, n_v_total: nk }
}

fn dp_impl(
    ham: &Hamiltonian1D,
    w0: &[f64],
    t: f64,
    n_v: usize,
    n_t: usize,
    v_max: Option<f64>,
    parallel: bool,
) -> Result<ValueField> {
    let n = w0.len();
    if n < 3 || n_v == 0 || n_t == 0 {
        return Err(Error::InvalidModel(
            "control recursion needs >= 3 grid points and positive n_v, n_t".into(),
        ));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidModel("control recursion needs t > 0".into()));
    }
    let alphas = uniform_grid(ham.a, ham.b, n);
    let dalpha = alphas[1] - alphas[0];
    let vmax = match v_max {
        Some(v) if v > 0.0 => v,
        Some(_) => return Err(Error::InvalidModel("v_max must be positive".into())),
        None => default_v_max(ham, w0, dalpha),
    };
    let velocities: Vec<f64> = (0..=2 * n_v)
        .map(|k| vmax * (k as f64 - n_v as f64) / n_v as f64)
        .collect();
    let ds = t / n_t as f64;
    let table = build_push_table(ham, &alphas, &velocities, ds);

    let mut levels = Vec::with_capacity(n_t + 1);
    levels.push(w0.to_vec());
    for _ in 0..n_t {
        let prev = levels.last().unwrap();
        let next = map_indices(parallel, n, |i| {
            let mut best = f64::NEG_INFINITY;
            for k in 0..table.n_v_total {
                let e = i * table.n_v_total + k;
                let i0 = table.idx[e] as usize;
                let f = table.frac[e];
                let val = (1.0 - f) * prev[i0] + f * prev[i0 + 1] - table.cost[e];
                if val > best {
                    best = val;
                }
            }
            best
        });
        levels.push(next);
    }
    let times = (0..=n_t).map(|m| ds * m as f64).collect();
    Ok(ValueField { alphas, times, levels })
}

/// Direct dynamic-programming form of the solution: over each time slice a
/// constant-velocity reflected move is charged its Legendre cost, and the
/// value is the best terminal reward minus accumulated cost. Converges to
/// the same limit as [`solve_fd`] as the grids refine.
pub fn lax_oleinik_dp(
    ham: &Hamiltonian1D,
    w0: &[f64],
    t: f64,
    n_v: usize,
    n_t: usize,
    v_max: Option<f64>,
) -> Result<ValueField> {
    dp_impl(ham, w0, t, n_v, n_t, v_max, true)
}

/// Sequential twin of [`lax_oleinik_dp`] with identical output.
pub fn lax_oleinik_dp_serial(
    ham: &Hamiltonian1D,
    w0: &[f64],
    t: f64,
    n_v: usize,
    n_t: usize,
    v_max: Option<f64>,
) -> Result<ValueField> {
    dp_impl(ham, w0, t, n_v, n_t, v_max, false)
}

// ---------------------------------------------------------------------------
// Rate function
// ---------------------------------------------------------------------------

/// Infeasible-path sentinel during the forward recursion; anything that ends
/// above [`RENDER_INFINITE`] is reported as infinity.
const BIG: f64 = 1e6;
/// Rate values at or above this are unreachable-region sentinels, not
/// finite actions; consumers should render them as infinity.
pub const RENDER_INFINITE: f64 = 1e5;

/// Action table `I(y; alpha_start, t)` on a uniform `y` grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateTable {
    pub y: Vec<f64>,
    /// `i_values[j]` is the minimal action to reach `y[j]`; infeasible
    /// targets hold `f64::INFINITY`.
    pub i_values: Vec<f64>,
    /// Index of the cheapest target (smallest index on ties).
    pub argmin_index: usize,
    /// The start point after snapping to the `y` grid.
    pub alpha_start_snapped: f64,
    pub t: f64,
}

impl RateTable {
    /// Interpolated action at `y`; infinite if either bracketing node is
    /// infeasible (unless its weight is exactly zero).
    pub fn eval(&self, y: f64) -> f64 {
        let d = self.y[1] - self.y[0];
        lerp_uniform(self.y[0], d, &self.i_values, y.clamp(self.y[0], *self.y.last().unwrap()))
    }

    pub fn min_value(&self) -> f64 {
        self.i_values[self.argmin_index]
    }
}

/// Minimal action to reach each grid point from `alpha_start` in time `t`,
/// by forward value iteration over the same one-step reflected transitions
/// as the control recursion, run in the pull direction.
///
/// The first slice moves off the start point with the exact velocity needed
/// per target (the velocity grid cannot represent a point mass); later
/// slices pull each target back along grid velocities, interpolating the
/// running action. Arrivals at an endpoint also admit the stick-in-place
/// move at that endpoint's cheapest admissible velocity. Costs are charged
/// at the source position.
pub fn rate_function(
    ham: &Hamiltonian1D,
    alpha_start: f64,
    t: f64,
    n_alpha: usize,
    n_v: usize,
    n_t: usize,
    v_max: Option<f64>,
) -> Result<RateTable> {
    if n_alpha < 3 || n_v == 0 || n_t == 0 {
        return Err(Error::InvalidModel(
            "rate recursion needs >= 3 grid points and positive n_v, n_t".into(),
        ));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidModel("rate recursion needs t > 0".into()));
    }
    if !(ham.a..=ham.b).contains(&alpha_start) {
        return Err(Error::InvalidModel(format!(
            "start point {alpha_start} outside segment [{}, {}]",
            ham.a, ham.b
        )));
    }
    let y = uniform_grid(ham.a, ham.b, n_alpha);
    let dalpha = y[1] - y[0];
    let vmax = match v_max {
        Some(v) if v > 0.0 => v,
        Some(_) => return Err(Error::InvalidModel("v_max must be positive".into())),
        None => (2.0 * ham.max_abs_drift()).max(2.0 * (ham.b - ham.a) / t),
    };
    let ds = t / n_t as f64;
    let velocities: Vec<f64> = (0..=2 * n_v)
        .map(|k| vmax * (k as f64 - n_v as f64) / n_v as f64)
        .collect();

    let j_start = ((alpha_start - ham.a) / dalpha).round() as usize;
    let j_start = j_start.min(n_alpha - 1);
    let alpha_snapped = y[j_start];

    // First slice: exact transport from the snapped start.
    let mut cur: Vec<f64> = (0..n_alpha)
        .map(|j| {
            let v_exact = (y[j] - alpha_snapped) / ds;
            let mut best = if v_exact.abs() <= vmax {
                ds * legendre(ham, alpha_snapped, v_exact).1
            } else {
                BIG
            };
            // Endpoint arrivals may overshoot and stick mid-slice; the cost
            // is convex in v, so the best admissible velocity is the drift
            // clamped into the overshoot range.
            if j == n_alpha - 1 {
                let v_lo = (y[j] - alpha_snapped) / ds;
                if v_lo <= vmax {
                    let v_opt = ham.drift(alpha_snapped).clamp(v_lo, vmax);
                    best = best.min(ds * legendre(ham, alpha_snapped, v_opt).1);
                }
            } else if j == 0 {
                let v_hi = (y[j] - alpha_snapped) / ds;
                if v_hi >= -vmax {
                    let v_opt = ham.drift(alpha_snapped).clamp(-vmax, v_hi);
                    best = best.min(ds * legendre(ham, alpha_snapped, v_opt).1);
                }
            }
            best
        })
        .collect();

    if n_t > 1 {
        // Pull transitions are time-independent; precompute them. A source
        // outside the segment is not a real path (interior arrivals cannot
        // have stuck anywhere), marked by cost = infinity.
        let nk = velocities.len();
        let mut src_idx = vec![0u32; n_alpha * nk];
        let mut src_frac = vec![0.0; n_alpha * nk];
        let mut cost = vec![f64::INFINITY; n_alpha * nk];
        for j in 0..n_alpha {
            for (k, &v) in velocities.iter().enumerate() {
                let src = y[j] - v * ds;
                if src >= ham.a - 1e-12 * (ham.b - ham.a) && src <= ham.b + 1e-12 * (ham.b - ham.a) {
                    let s_cl = src.clamp(ham.a, ham.b);
                    let pos = ((s_cl - ham.a) / dalpha).clamp(0.0, (n_alpha - 1) as f64);
                    let i0 = (pos.floor() as usize).min(n_alpha - 2);
                    src_idx[j * nk + k] = i0 as u32;
                    src_frac[j * nk + k] = pos - i0 as f64;
                    cost[j * nk + k] = ds * legendre(ham, s_cl, v).1;
                }
            }
        }
        // Stick-in-place moves at the endpoints.
        let stick_hi = ds * legendre(ham, ham.b, ham.drift(ham.b).clamp(0.0, vmax)).1;
        let stick_lo = ds * legendre(ham, ham.a, ham.drift(ham.a).clamp(-vmax, 0.0)).1;

        for _ in 1..n_t {
            let prev = cur;
            let next = map_indices(true, n_alpha, |j| {
                let mut best = BIG;
                for k in 0..nk {
                    let e = j * nk + k;
                    let c = cost[e];
                    if c.is_finite() {
                        let i0 = src_idx[e] as usize;
                        let f = src_frac[e];
                        let base = (1.0 - f) * prev[i0] + f * prev[i0 + 1];
                        let val = base + c;
                        if val < best {
                            best = val;
                        }
                    }
                }
                if j == n_alpha - 1 {
                    best = best.min(prev[n_alpha - 1] + stick_hi);
                } else if j == 0 {
                    best = best.min(prev[0] + stick_lo);
                }
                best.min(BIG)
            });
            cur = next;
        }
    }

    let i_values: Vec<f64> = cur
        .iter()
        .map(|&v| if v > RENDER_INFINITE { f64::INFINITY } else { v })
        .collect();
    let mut argmin = 0;
    for (j, &v) in i_values.iter().enumerate() {
        if v < i_values[argmin] {
            argmin = j;
        }
    }
    if !i_values[argmin].is_finite() {
        return Err(Error::DegenerateRate { beta: f64::NAN, resolution: dalpha + ds });
    }
    Ok(RateTable { y, i_values, argmin_index: argmin, alpha_start_snapped: alpha_snapped, t })
}

/// Action form of the solution: `w(alpha_start, t) = sup_y (w0(y) - I(y))`,
/// evaluated on the rate table's grid.
pub fn variational_value<F: Fn(f64) -> f64>(rate: &RateTable, w0: F) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (j, &iv) in rate.i_values.iter().enumerate() {
        if iv.is_finite() {
            let v = w0(rate.y[j]) - iv;
            if v > best {
                best = v;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Mean-field (zero-cost) path
// ---------------------------------------------------------------------------

/// The reflected zero-cost trajectory: position, realized control and
/// reflection intensity sampled on a uniform time grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReflectedPath {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    /// Control velocity (always the local drift on the zero-cost path).
    pub v: Vec<f64>,
    /// Reflection intensity; zero in the interior, `|drift|` while stuck.
    pub l: Vec<f64>,
}

impl ReflectedPath {
    pub fn terminal(&self) -> f64 {
        *self.eta.last().unwrap()
    }

    /// First sampled time with active reflection, if any.
    pub fn first_stick_time(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.l)
            .find(|(_, &l)| l > 0.0)
            .map(|(&t, _)| t)
    }
}

/// Integrate `d eta/dt = drift(eta)` with sticking at the endpoints.
///
/// Interior motion is classical RK4 on a uniform grid of step `dt`. When a
/// step would exit the interval, the hitting time inside that step is
/// bisected on the single-step map, the path is placed exactly on the
/// endpoint, and from an endpoint with outward drift it stays stuck with
/// reflection intensity `|drift|` (the drift profile is autonomous, so it
/// never unsticks); inward drift re-enters the interior.
pub fn mean_field_path(
    ham: &Hamiltonian1D,
    alpha_start: f64,
    t_end: f64,
    dt: f64,
) -> Result<ReflectedPath> {
    if !(ham.a..=ham.b).contains(&alpha_start) {
        return Err(Error::InvalidModel(format!(
            "start point {alpha_start} outside segment [{}, {}]",
            ham.a, ham.b
        )));
    }
    if !(dt > 0.0 && t_end >= 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::InvalidModel("mean-field path needs dt > 0 and t_end >= 0".into()));
    }
    let rk4 = |x: f64, step: f64| -> f64 {
        let k1 = ham.drift(x);
        let k2 = ham.drift(x + 0.5 * step * k1);
        let k3 = ham.drift(x + 0.5 * step * k2);
        let k4 = ham.drift(x + step * k3);
        x + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };

    let n = (t_end / dt).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut eta = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let mut l = Vec::with_capacity(n + 1);

    let mut x = alpha_start;
    let mut stuck_at: Option<f64> = None;
    for k in 0..=n {
        let tk = (dt * k as f64).min(t_end);
        let drift = ham.drift(x);
        times.push(tk);
        eta.push(x);
        v.push(drift);
        l.push(if stuck_at.is_some() { drift.abs() } else { 0.0 });
        if k == n {
            break;
        }
        let step = (t_end - tk).min(dt);
        if let Some(bd) = stuck_at {
            let d = ham.drift(bd);
            let outward = (bd == ham.b && d > 0.0) || (bd == ham.a && d < 0.0);
            if outward {
                continue; // stays stuck; x is already bd
            }
            stuck_at = None;
        }
        let next = rk4(x, step);
        if next >= ham.a && next <= ham.b {
            x = next;
        } else {
            let bd = if next > ham.b { ham.b } else { ham.a };
            // Bisect the hitting time of the single-step map.
            let (mut lo, mut hi) = (0.0f64, step);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let inside = if bd == ham.b { rk4(x, mid) < bd } else { rk4(x, mid) > bd };
                if inside {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            x = bd;
            let d = ham.drift(bd);
            let outward = (bd == ham.b && d > 0.0) || (bd == ham.a && d < 0.0);
            if outward {
                stuck_at = Some(bd);
            }
            // Inward drift at the touched endpoint: the next step integrates
            // away from it normally.
        }
    }
    Ok(ReflectedPath { times, eta, v, l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Affine rates matching the canonical two-species interconversion
    /// restricted to the chord through (7, 3): phi_plus = 7 - alpha,
    /// phi_minus = 3 + alpha on [-1, 1].
    fn canonical() -> Hamiltonian1D {
        Hamiltonian1D::new(
            -1.0,
            1.0,
            Phi1D::Affine { c0: 7.0, c1: -1.0 },
            Phi1D::Affine { c0: 3.0, c1: 1.0 },
        )
        .unwrap()
    }

    fn const_ham(fp: f64, fm: f64) -> Hamiltonian1D {
        Hamiltonian1D::new(
            -1.0,
            1.0,
            Phi1D::Affine { c0: fp, c1: 0.0 },
            Phi1D::Affine { c0: fm, c1: 0.0 },
        )
        .unwrap()
    }

    // -- rates and Hamiltonian -------------------------------------------------

    #[test]
    fn mass_action_profile_matches_lattice_intensity() {
        let net = ReactionNetwork::new(2, vec![vec![1, 0]], vec![vec![0, 1]], vec![1.0], vec![1.0])
            .unwrap();
        let dom = Domain::ball([7.0, 3.0], 2.0f64.sqrt()).unwrap();
        let ham = Hamiltonian1D::from_network_segment(&net, &dom, [7.0, 3.0], 0.0).unwrap();
        assert!((ham.a() + 1.0).abs() < 1e-12 && (ham.b() - 1.0).abs() < 1e-12);
        assert!((ham.phi_plus(0.0) - 7.0).abs() < 1e-12);
        assert!((ham.phi_minus(0.0) - 3.0).abs() < 1e-12);
        assert!((ham.phi_plus(0.5) - 6.5).abs() < 1e-12);
        assert!((ham.phi_minus(-0.5) - 2.5).abs() < 1e-12);
        assert!((ham.drift(0.25) - (6.75 - 3.25)).abs() < 1e-12);
    }

    #[test]
    fn second_order_mass_action_squares_the_coordinate() {
        let phi = Phi1D::MassAction {
            k: 0.5,
            exponents: [2, 0],
            base: [7.0, 3.0],
            direction: [-1.0, 1.0],
        };
        assert!((phi.eval(1.0) - 0.5 * 36.0).abs() < 1e-12);
        assert!((phi.eval(0.0) - 24.5).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_rates_are_rejected() {
        // phi_minus = alpha vanishes at the left endpoint of [0, 1].
        let r = Hamiltonian1D::new(
            0.0,
            1.0,
            Phi1D::Affine { c0: 1.0, c1: 0.0 },
            Phi1D::Affine { c0: 0.0, c1: 1.0 },
        );
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    // -- Legendre transform ------------------------------------------------------

    #[test]
    fn legendre_closed_form_oracle() {
        // phi+ = 4, phi- = 1: at s = 0, D = 4, p* = ln(1/2), cost = 1.
        let ham = const_ham(4.0, 1.0);
        let (p, c) = legendre(&ham, 0.0, 0.0);
        assert!((p - 0.5f64.ln()).abs() < 1e-14);
        assert!((c - 1.0).abs() < 1e-14);
        // At the drift velocity the cost vanishes and p* = 0.
        let (p, c) = legendre(&ham, 0.0, 3.0);
        assert!(p.abs() < 1e-14);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn legendre_matches_ternary_search() {
        // s p - H(alpha, p) is strictly concave in p, so ternary search
        // converges to the global supremum.
        let ham = canonical();
        for &alpha in &[-0.8, 0.0, 0.6] {
            for &s in &[-5.0, -1.2, 0.0, 0.7, 4.0] {
                let (_, cost) = legendre(&ham, alpha, s);
                let (mut lo, mut hi) = (-30.0f64, 30.0f64);
                for _ in 0..300 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    let f1 = s * m1 - ham.h_value(alpha, m1);
                    let f2 = s * m2 - ham.h_value(alpha, m2);
                    if f1 < f2 {
                        lo = m1;
                    } else {
                        hi = m2;
                    }
                }
                let p = 0.5 * (lo + hi);
                let direct = s * p - ham.h_value(alpha, p);
                assert!(
                    (cost - direct).abs() < 1e-10,
                    "alpha={alpha}, s={s}: closed form {cost} vs search {direct}"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Fenchel inequality: the closed form dominates s*p - H at every p,
        /// and the returned p* attains it.
        #[test]
        fn legendre_is_the_upper_envelope(
            s in -8.0f64..8.0,
            p in -4.0f64..4.0,
            alpha in -0.9f64..0.9,
        ) {
            let ham = canonical();
            let (p_star, cost) = legendre(&ham, alpha, s);
            prop_assert!(cost + 1e-10 >= s * p - ham.h_value(alpha, p));
            let attained = s * p_star - ham.h_value(alpha, p_star);
            prop_assert!((cost - attained).abs() <= 1e-10 * (1.0 + cost.abs()));
        }
    }

    // -- finite differences -------------------------------------------------------

    #[test]
    fn constants_stay_constant_bitwise() {
        let ham = canonical();
        let w0 = vec![0.25; 41];
        let sol = solve_fd(&ham, &w0, 0.3, None).unwrap();
        assert!(sol.w.iter().all(|&x| x == 0.25));
    }

    #[test]
    fn explicit_step_above_cfl_bound_is_rejected() {
        let ham = canonical();
        let w0 = vec![0.0; 41];
        // rate >= (phi+ + phi-)/dalpha = 10/0.05 = 200, so dt = 0.1 is far
        // beyond the half-CFL bound.
        assert!(matches!(
            solve_fd(&ham, &w0, 0.3, Some(0.1)),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn fd_and_control_recursion_agree_coarsely() {
        let ham = canonical();
        let n = 201;
        let alphas = uniform_grid(-1.0, 1.0, n);
        let w0: Vec<f64> = alphas.iter().map(|&al| 0.5 * (std::f64::consts::PI * al).sin()).collect();
        let t = 0.15;
        let fd = solve_fd(&ham, &w0, t, None).unwrap();
        let dp = lax_oleinik_dp(&ham, &w0, t, 160, 60, None).unwrap();
        let gap = fd
            .w
            .iter()
            .zip(dp.terminal())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap < 0.05, "fd vs dp gap {gap}");
    }

    #[test]
    fn parallel_and_serial_recursions_agree_bitwise() {
        let ham = canonical();
        let alphas = uniform_grid(-1.0, 1.0, 101);
        let w0: Vec<f64> = alphas.iter().map(|&al| al * al).collect();
        let a = lax_oleinik_dp(&ham, &w0, 0.1, 80, 20, None).unwrap();
        let b = lax_oleinik_dp_serial(&ham, &w0, 0.1, 80, 20, None).unwrap();
        assert_eq!(a.terminal(), b.terminal());
    }

    #[test]
    fn slope_bound_from_data_and_rates_holds() {
        // A-priori interior gradient bound: |dw/dalpha| stays below the level
        // set where the Hamiltonian can no longer balance |dw/dt| <= C0.
        let ham = canonical();
        let n = 201;
        let alphas = uniform_grid(-1.0, 1.0, n);
        let w0: Vec<f64> = alphas.iter().map(|&al| 7.0 - al).collect();
        let dalpha = alphas[1] - alphas[0];
        let fp: Vec<f64> = alphas.iter().map(|&al| ham.phi_plus(al)).collect();
        let fm: Vec<f64> = alphas.iter().map(|&al| ham.phi_minus(al)).collect();
        let mut rhs = vec![0.0; n];
        fd_rhs(&fp, &fm, &w0, dalpha, &mut rhs);
        let c0 = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let fp_max = fp.iter().cloned().fold(f64::MIN, f64::max);
        let fm_max = fm.iter().cloned().fold(f64::MIN, f64::max);
        let phi_min = fp
            .iter()
            .chain(&fm)
            .cloned()
            .fold(f64::MAX, f64::min);
        let c_alpha = ((c0 + fp_max + fm_max) / phi_min).ln();
        let sol = solve_fd(&ham, &w0, 0.2, None).unwrap();
        let measured = sol.max_slope();
        assert!(
            measured <= 1.1 * c_alpha,
            "slope {measured} exceeds bound {c_alpha} by >= 10%"
        );
        if measured > c_alpha {
            eprintln!(
                "warning: measured slope {measured} within 10% above the nominal bound {c_alpha}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// The scheme is monotone: ordered data stay ordered, and it is a
        /// sup-norm contraction.
        #[test]
        fn fd_scheme_is_monotone_and_contractive(
            raw_a in proptest::collection::vec(-0.5f64..0.5, 41),
            raw_b in proptest::collection::vec(-0.5f64..0.5, 41),
        ) {
            let ham = canonical();
            let t = 0.05;
            let upper: Vec<f64> = raw_a.iter().zip(&raw_b).map(|(x, y)| x.max(*y)).collect();
            let sol_a = solve_fd(&ham, &raw_a, t, None).unwrap();
            let sol_b = solve_fd(&ham, &raw_b, t, None).unwrap();
            let sol_u = solve_fd(&ham, &upper, t, None).unwrap();
            for i in 0..41 {
                prop_assert!(sol_u.w[i] >= sol_a.w[i] - 1e-12);
                prop_assert!(sol_u.w[i] >= sol_b.w[i] - 1e-12);
            }
            let dist0 = raw_a.iter().zip(&raw_b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let dist1 = sol_a.w.iter().zip(&sol_b.w).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            prop_assert!(dist1 <= dist0 + 1e-12);
        }
    }

    // -- rate function and duality ---------------------------------------------------

    #[test]
    fn rate_vanishes_near_the_mean_field_point_and_grows_away() {
        let ham = canonical();
        let t = 0.2;
        let rate = rate_function(&ham, 0.0, t, 401, 200, 80, None).unwrap();
        // Mean field from 0: eta' = 4 - 2 eta -> eta(t) = 2(1 - e^{-2t}).
        let eta_t = 2.0 * (1.0 - (-2.0 * t).exp());
        let near = rate.eval(eta_t);
        assert!(near < 0.02, "I at the mean-field point should be tiny, got {near}");
        assert!((rate.y[rate.argmin_index] - eta_t).abs() < 0.05);
        // Far side of the start against the drift: strictly positive action.
        assert!(rate.eval(-0.9) > 0.5);
        // The table is infinite nowhere on this segment (speeds are ample),
        // but every value is nonnegative.
        assert!(rate.i_values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn unreachable_targets_are_infinite() {
        let ham = canonical();
        // One short slice with a small velocity cap: targets beyond
        // v_max * t from the start cannot be hit.
        let rate = rate_function(&ham, 0.0, 0.01, 401, 40, 1, Some(1.0)).unwrap();
        assert!(rate.eval(0.5).is_infinite());
        assert!(rate.eval(0.0).is_finite());
    }

    #[test]
    fn action_form_matches_fd_solution() {
        let ham = canonical();
        let t = 0.15;
        let n = 201;
        let alphas = uniform_grid(-1.0, 1.0, n);
        let w0_fn = |al: f64| 0.4 * (std::f64::consts::PI * al).cos();
        let w0: Vec<f64> = alphas.iter().map(|&al| w0_fn(al)).collect();
        let fd = solve_fd(&ham, &w0, t, None).unwrap();
        for &alpha in &[-0.5, 0.0, 0.5] {
            let rate = rate_function(&ham, alpha, t, 401, 200, 60, None).unwrap();
            let dual = variational_value(&rate, w0_fn);
            let direct = fd.value_at(rate.alpha_start_snapped);
            assert!(
                (dual - direct).abs() < 0.05,
                "alpha={alpha}: dual {dual} vs fd {direct}"
            );
        }
    }

    // -- mean-field path ------------------------------------------------------------

    #[test]
    fn interior_mean_field_matches_closed_form() {
        let ham = canonical();
        let path = mean_field_path(&ham, 0.0, 0.2, 1e-3).unwrap();
        let exact = 2.0 * (1.0 - (-0.4f64).exp());
        assert!((path.terminal() - exact).abs() < 1e-8, "terminal {}", path.terminal());
        assert!(path.l.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn outward_drift_sticks_at_the_endpoint() {
        let ham = canonical();
        // eta(t) = 2(1 - e^{-2t}) hits b = 1 at t = ln(2)/2 and the drift
        // there (4 - 2 = 2) points outward, so the path stays stuck with
        // reflection intensity 2.
        let hit = 0.5 * 2.0f64.ln();
        let path = mean_field_path(&ham, 0.0, 0.5, 1e-3).unwrap();
        assert_eq!(path.terminal(), 1.0);
        assert_eq!(*path.l.last().unwrap(), 2.0);
        let first = path.first_stick_time().unwrap();
        assert!((first - hit).abs() < 2e-3, "stick at {first}, expected {hit}");
        // Once stuck it never leaves.
        let idx = path.times.iter().position(|&t| t >= first).unwrap();
        assert!(path.eta[idx..].iter().all(|&e| e == 1.0));
    }

    #[test]
    fn inward_drift_keeps_the_path_interior() {
        // Reverse the rates: drift = 3 + alpha - (7 - alpha) = 2 alpha - 4 < 0,
        // pulling toward a = -1 where the drift (-6) points outward, so the
        // path sticks at the left endpoint instead.
        let ham = Hamiltonian1D::new(
            -1.0,
            1.0,
            Phi1D::Affine { c0: 3.0, c1: 1.0 },
            Phi1D::Affine { c0: 7.0, c1: -1.0 },
        )
        .unwrap();
        let path = mean_field_path(&ham, 0.5, 2.0, 1e-3).unwrap();
        assert_eq!(path.terminal(), -1.0);
        assert_eq!(*path.l.last().unwrap(), 6.0);
    }
}
