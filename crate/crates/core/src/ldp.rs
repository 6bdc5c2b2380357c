//! Cross-solver consistency checks and rate-function reports.
//!
//! Everything here triangulates the same quantity by independent routes:
//! the exact lattice value `h log E exp(u0(X_t)/h)` against Monte Carlo
//! sampling and against the interval limit, concentration of the process
//! around the zero-cost path against the action minimum outside a
//! neighborhood, and the touching-function test showing the limit equation
//! cannot hold up to the boundary without the no-flux condition. These are
//! the module's deliverables: structured reports meant to be serialized and
//! eyeballed, with the quantitative assertions living in the test suites.

use crate::chje::{
    mean_field_path, rate_function, solve_fd, uniform_grid, Hamiltonian1D, RateTable,
};
use crate::error::{Error, Result};
use crate::graph::JumpGraph;
use crate::network::{
    build_grid, lma_intensity, nu_perp, Direction, Domain, GridFunction, ReactionNetwork,
};
use crate::segment::{build_segment_grid, segment_graph, SegmentGrid};
use crate::simulate::{mc_wkb_estimate, run_ensemble};
use crate::{dhje, rng::SplitMix64};

use serde::Serialize;

/// Split a displacement into components along the reaction direction and its
/// perpendicular: `d = r * nu + beta * nu_perp`. Returns `(r, beta)`.
fn decompose_displacement(nu: &[f64; 2], d: &[f64; 2]) -> (f64, f64) {
    let perp = nu_perp(*nu);
    let nn = nu[0] * nu[0] + nu[1] * nu[1];
    let pp = perp[0] * perp[0] + perp[1] * perp[1];
    ((d[0] * nu[0] + d[1] * nu[1]) / nn, (d[0] * perp[0] + d[1] * perp[1]) / pp)
}

/// Nearest lattice point to `x0` that lies in the domain, searching the
/// surrounding lattice cell (center first, then the 8 neighbors in a fixed
/// order so ties resolve deterministically).
fn nearest_admissible(dom: &Domain, x0: &[f64; 2], h: f64) -> Result<[f64; 2]> {
    let bi = (x0[0] / h).round() as i64;
    let bj = (x0[1] / h).round() as i64;
    const OFFSETS: [(i64, i64); 9] = [
        (0, 0),
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    for (di, dj) in OFFSETS {
        let p = [(bi + di) as f64 * h, (bj + dj) as f64 * h];
        if dom.contains(&p) {
            return Ok(p);
        }
    }
    Err(Error::NoAdmissibleStart {
        x: x0[0],
        y: x0[1],
        h,
        detail: "no lattice point in the surrounding cell lies inside the domain".into(),
    })
}

fn single_reaction_nu(net: &ReactionNetwork) -> Result<[f64; 2]> {
    if net.n_species() != 2 || net.n_reactions() != 1 {
        return Err(Error::InvalidModel(
            "cross-solver reports need exactly two species and one reaction".into(),
        ));
    }
    let n = net.nu(0);
    Ok([n[0] as f64, n[1] as f64])
}

/// Chain through a lattice-admissible start: the grid, its jump graph, and
/// the index of the node at chain coordinate `k0 * h`.
fn chain_through(
    net: &ReactionNetwork,
    dom: &Domain,
    x_lattice: [f64; 2],
    h: f64,
    k0: i64,
) -> Result<(SegmentGrid, JumpGraph, Hamiltonian1D, usize)> {
    let nu = single_reaction_nu(net)?;
    let ham = Hamiltonian1D::from_network_segment(net, dom, x_lattice, 0.0)?;
    let seg = build_segment_grid(dom, x_lattice, nu, 0.0, 0.0, h)?;
    let (k_a, k_b) = seg.k_range();
    let k = k0.clamp(k_a, k_b);
    let start = (k - k_a) as usize;
    let graph = segment_graph(&seg, &ham);
    Ok((seg, graph, ham, start))
}

// ---------------------------------------------------------------------------
// Exact value vs Monte Carlo vs interval limit
// ---------------------------------------------------------------------------

/// Sampling and discretization knobs for [`varadhan_check`].
#[derive(Debug, Clone, Serialize)]
pub struct VaradhanConfig {
    pub samples: usize,
    pub base_seed: u64,
    /// Interval grid size for the continuous reference solve.
    pub n_alpha: usize,
}

impl Default for VaradhanConfig {
    fn default() -> Self {
        VaradhanConfig { samples: 20_000, base_seed: 0x5eed, n_alpha: 1601 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VaradhanEntry {
    pub h: f64,
    /// Transverse offset of the requested start from the lattice chain.
    pub beta: f64,
    /// Residual chain offset after extracting whole steps.
    pub r: f64,
    /// Whole chain steps between the lattice anchor and the requested start.
    pub k0: i64,
    pub exact_wkb: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    /// `|exact_wkb - mc_estimate|`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VaradhanReport {
    pub t: f64,
    pub x0: [f64; 2],
    pub x_lattice: [f64; 2],
    /// Interval-limit value at the start's chain coordinate.
    pub continuous_value: f64,
    pub entries: Vec<VaradhanEntry>,
}

/// Compare, across a mesh ladder, the exact lattice value started at the
/// admissible point nearest `x0` with a Monte Carlo estimate of the same
/// expectation and with the interval-limit solution.
///
/// The requested start may sit off the lattice; its displacement from the
/// anchor decomposes into a along-chain part (compared via the chain
/// coordinate) and a transverse part `beta`, which must stay within one mesh
/// width for the comparison to be meaningful.
pub fn varadhan_check<F: Fn([f64; 2]) -> f64>(
    net: &ReactionNetwork,
    dom: &Domain,
    x0: [f64; 2],
    u0: F,
    t: f64,
    h_ladder: &[f64],
    config: &VaradhanConfig,
) -> Result<VaradhanReport> {
    if h_ladder.is_empty() {
        return Err(Error::InvalidModel("mesh ladder must be nonempty".into()));
    }
    let nu = single_reaction_nu(net)?;
    let mut entries = Vec::with_capacity(h_ladder.len());
    let mut continuous_value = f64::NAN;
    let mut anchor = [f64::NAN; 2];

    for (li, &h) in h_ladder.iter().enumerate() {
        let x_lat = nearest_admissible(dom, &x0, h)?;
        let d = [x0[0] - x_lat[0], x0[1] - x_lat[1]];
        let (r_full, beta) = decompose_displacement(&nu, &d);
        if beta.abs() > h {
            return Err(Error::InvalidModel(format!(
                "transverse offset {beta} exceeds mesh width {h}; \
                 the interval comparison needs |beta| <= h"
            )));
        }
        let k0 = (r_full / h).round() as i64;
        let r = r_full - k0 as f64 * h;
        let (seg, graph, ham, start) = chain_through(net, dom, x_lat, h, k0)?;
        let w0 = seg.sample(&u0)?;
        let exact_wkb = dhje::evolve_ode(&graph, &w0, t)?.get(start);
        let seed_h = SplitMix64::new(config.base_seed ^ h.to_bits()).next_u64();
        let mc = mc_wkb_estimate(&graph, start, &w0, t, config.samples, seed_h);

        if li == 0 {
            // One continuous reference: the chain geometry is h-independent
            // (the anchor is the same point for every h on a sane ladder).
            let alphas = uniform_grid(ham.a(), ham.b(), config.n_alpha);
            let w0_cont: Vec<f64> = alphas
                .iter()
                .map(|&al| u0([x_lat[0] + al * nu[0], x_lat[1] + al * nu[1]]))
                .collect();
            let fd = solve_fd(&ham, &w0_cont, t, None)?;
            continuous_value = fd.value_at(r_full);
            anchor = x_lat;
        }

        entries.push(VaradhanEntry {
            h,
            beta,
            r,
            k0,
            exact_wkb,
            mc_estimate: mc.estimate,
            mc_stderr: mc.stderr,
            discrepancy: (exact_wkb - mc.estimate).abs(),
        });
    }
    Ok(VaradhanReport { t, x0, x_lattice: anchor, continuous_value, entries })
}

// ---------------------------------------------------------------------------
// Law-of-large-numbers concentration
// ---------------------------------------------------------------------------

/// Sampling and discretization knobs for [`lln_concentration`].
#[derive(Debug, Clone, Serialize)]
pub struct LlnConfig {
    pub samples: usize,
    pub base_seed: u64,
    pub n_alpha: usize,
    pub n_v: usize,
    pub n_t: usize,
    /// Step for the zero-cost path integration.
    pub dt_mean_field: f64,
}

impl Default for LlnConfig {
    fn default() -> Self {
        LlnConfig {
            samples: 100_000,
            base_seed: 0x5eed,
            n_alpha: 1601,
            n_v: 200,
            n_t: 200,
            dt_mean_field: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnEntry {
    pub h: f64,
    pub samples: usize,
    /// Fraction of trajectories ending at ambient distance >= eps from the
    /// zero-cost endpoint.
    pub tail_fraction: f64,
    /// The concentration bound `exp(-beta_rate / (2h))`.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub t: f64,
    pub eps: f64,
    /// Zero-cost path endpoint in chain coordinates and ambient space.
    pub eta_star: f64,
    pub x_star: [f64; 2],
    /// Minimal action outside the eps-neighborhood of the endpoint.
    pub beta_rate: f64,
    /// Grid resolution `dalpha + ds` of the action table; the rate is only
    /// trusted when it clears this scale.
    pub resolution: f64,
    pub entries: Vec<LlnEntry>,
}

/// Concentration check: trajectories should end near the zero-cost endpoint
/// with exponentially small exceptions, at the rate given by the action
/// minimum over the far set.
pub fn lln_concentration(
    net: &ReactionNetwork,
    dom: &Domain,
    x0: [f64; 2],
    t: f64,
    eps: f64,
    h_ladder: &[f64],
    config: &LlnConfig,
) -> Result<LlnReport> {
    if h_ladder.is_empty() {
        return Err(Error::InvalidModel("mesh ladder must be nonempty".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidModel("eps must be positive".into()));
    }
    let nu = single_reaction_nu(net)?;
    let nu_len = (nu[0] * nu[0] + nu[1] * nu[1]).sqrt();
    let x_lat = nearest_admissible(dom, &x0, h_ladder[0])?;
    let ham = Hamiltonian1D::from_network_segment(net, dom, x_lat, 0.0)?;

    let path = mean_field_path(&ham, 0.0, t, config.dt_mean_field)?;
    let eta_star = path.terminal();
    let x_star = [x_lat[0] + eta_star * nu[0], x_lat[1] + eta_star * nu[1]];

    let table = rate_function(&ham, 0.0, t, config.n_alpha, config.n_v, config.n_t, None)?;
    let dalpha = table.y[1] - table.y[0];
    let resolution = dalpha + t / config.n_t as f64;
    let mut beta_rate = f64::INFINITY;
    for (j, &iv) in table.i_values.iter().enumerate() {
        if (table.y[j] - eta_star).abs() * nu_len >= eps && iv < beta_rate {
            beta_rate = iv;
        }
    }
    if beta_rate <= 2.0 * resolution {
        return Err(Error::DegenerateRate { beta: beta_rate, resolution });
    }

    let mut entries = Vec::with_capacity(h_ladder.len());
    for &h in h_ladder {
        let x_h = nearest_admissible(dom, &x0, h)?;
        let (seg, graph, _, start) = chain_through(net, dom, x_h, h, 0)?;
        let seed_h = SplitMix64::new(config.base_seed ^ h.to_bits()).next_u64();
        let ens = run_ensemble(&graph, start, t, config.samples, seed_h);
        let mut far = 0u64;
        for (i, &c) in ens.counts.iter().enumerate() {
            if (seg.alpha(i) - eta_star).abs() * nu_len >= eps {
                far += c;
            }
        }
        entries.push(LlnEntry {
            h,
            samples: config.samples,
            tail_fraction: far as f64 / config.samples as f64,
            bound: (-beta_rate / (2.0 * h)).exp(),
        });
    }
    Ok(LlnReport { t, eps, eta_star, x_star, beta_rate, resolution, entries })
}

// ---------------------------------------------------------------------------
// Boundary counterexample
// ---------------------------------------------------------------------------

/// Outcome of the touching-function test at the domain boundary.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub h: f64,
    /// Sup norm of the lattice operator applied to the conserved data
    /// (exactly zero: the data is invariant along every jump).
    pub stationarity_residual: f64,
    /// Boundary point where the smooth test function touches the data.
    pub touch_point: [f64; 2],
    /// Minimum of (test function - data) over the grid; zero at the touch.
    pub touch_gap: f64,
    /// Value of the unconstrained limit operator on the test function at the
    /// touch point.
    pub test_value: f64,
    /// True when the test value is negative: the stationary solution fails
    /// the interior subsolution inequality at the boundary, so the limit
    /// equation must carry a boundary condition there.
    pub violated: bool,
}

/// Run the touching-function test on the canonical interconversion ball.
///
/// The data `u0 = x1 + x2` is conserved by the jump direction, hence exactly
/// stationary for every mesh. The affine test function
/// `phi = (21/20) x1 + (19/20) x2 - 1/10` dominates `u0` on the closed ball
/// and touches it at the boundary point (6, 4), where the unconstrained
/// Hamiltonian evaluates to a strictly negative number: without a boundary
/// condition the stationary solution would violate the subsolution property.
pub fn counterexample_check(h: f64) -> Result<CounterexampleReport> {
    let net =
        ReactionNetwork::new(2, vec![vec![1, 0]], vec![vec![0, 1]], vec![1.0], vec![1.0])?;
    let dom = Domain::ball([7.0, 3.0], 2.0f64.sqrt())?;
    let grid = build_grid(&dom, &net, h)?;
    let graph = JumpGraph::from_lattice(&net, &grid);

    let u0 = GridFunction::from_coords(&grid, |x| x[0] + x[1])?;
    let stationarity_residual = dhje::apply_hamiltonian(&graph, &u0)?.sup_norm();

    let (c1, c2, c0) = (21.0 / 20.0, 19.0 / 20.0, -0.1);
    let mut touch_idx = 0;
    let mut touch_gap = f64::INFINITY;
    for i in 0..grid.n_points() {
        let x = grid.coords(i);
        let gap = c1 * x[0] + c2 * x[1] + c0 - (x[0] + x[1]);
        if gap < touch_gap {
            touch_gap = gap;
            touch_idx = i;
        }
    }
    let xs = grid.coords(touch_idx);
    let touch_point = [xs[0], xs[1]];

    // Unconstrained limit operator at the touch point: both jump directions
    // contribute even though one of them leaves the domain.
    let nu = [-1.0, 1.0];
    let dphi = nu[0] * c1 + nu[1] * c2;
    let fwd = lma_intensity(&net, &touch_point, 0, Direction::Forward);
    let bwd = lma_intensity(&net, &touch_point, 0, Direction::Backward);
    let test_value = fwd * (dphi.exp() - 1.0) + bwd * ((-dphi).exp() - 1.0);

    Ok(CounterexampleReport {
        h,
        stationarity_residual,
        touch_point,
        touch_gap,
        test_value,
        violated: test_value < 0.0 && touch_gap.abs() <= 1e-9,
    })
}

// ---------------------------------------------------------------------------
// Ambient-space view of the rate function
// ---------------------------------------------------------------------------

/// Rate function for endpoints in ambient coordinates: finite only on the
/// reachable chain segment through the start, infinite off it.
#[derive(Debug, Clone, Serialize)]
pub struct RateFunction2D {
    pub x0: [f64; 2],
    pub nu: [f64; 2],
    pub table: RateTable,
    pub seg_a: f64,
    pub seg_b: f64,
}

impl RateFunction2D {
    pub fn new(
        net: &ReactionNetwork,
        dom: &Domain,
        x0: [f64; 2],
        t: f64,
        n_alpha: usize,
        n_v: usize,
        n_t: usize,
    ) -> Result<Self> {
        let nu = single_reaction_nu(net)?;
        let ham = Hamiltonian1D::from_network_segment(net, dom, x0, 0.0)?;
        let table = rate_function(&ham, 0.0, t, n_alpha, n_v, n_t, None)?;
        Ok(RateFunction2D { x0, nu, table, seg_a: ham.a(), seg_b: ham.b() })
    }

    /// Action to reach `y`; infinite when `y` is off the chain by more than
    /// `tol` (ambient distance) or outside the admissible window.
    pub fn eval(&self, y: [f64; 2], tol: f64) -> f64 {
        let d = [y[0] - self.x0[0], y[1] - self.x0[1]];
        let (alpha, beta) = decompose_displacement(&self.nu, &d);
        let perp = nu_perp(self.nu);
        let perp_dist = beta.abs() * (perp[0] * perp[0] + perp[1] * perp[1]).sqrt();
        if perp_dist > tol || alpha < self.seg_a - tol || alpha > self.seg_b + tol {
            return f64::INFINITY;
        }
        self.table.eval(alpha.clamp(self.seg_a, self.seg_b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> (ReactionNetwork, Domain) {
        let net =
            ReactionNetwork::new(2, vec![vec![1, 0]], vec![vec![0, 1]], vec![1.0], vec![1.0])
                .unwrap();
        let dom = Domain::ball([7.0, 3.0], 2.0f64.sqrt()).unwrap();
        (net, dom)
    }

    #[test]
    fn displacement_decomposition_oracle() {
        // (0.002, 0) against nu = (-1, 1): solving r*nu + beta*nu_perp = d
        // gives beta = 0.001, r = -0.001.
        let (r, beta) = decompose_displacement(&[-1.0, 1.0], &[0.002, 0.0]);
        assert!((beta - 0.001).abs() < 1e-15);
        assert!((r + 0.001).abs() < 1e-15);
        // Reconstruction.
        let perp = nu_perp([-1.0, 1.0]);
        let x = [r * -1.0 + beta * perp[0], r * 1.0 + beta * perp[1]];
        assert!((x[0] - 0.002).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn off_lattice_start_is_anchored_and_compared() {
        let (net, dom) = canonical();
        let cfg = VaradhanConfig { samples: 4000, base_seed: 77, n_alpha: 801 };
        let report = varadhan_check(
            &net,
            &dom,
            [7.002, 3.0],
            |x| x[0],
            0.2,
            &[0.2, 0.1],
            &cfg,
        )
        .unwrap();
        assert_eq!(report.x_lattice, [7.0, 3.0]);
        assert!(report.continuous_value.is_finite());
        for e in &report.entries {
            assert_eq!(e.k0, 0);
            assert!((e.beta - 0.001).abs() < 1e-12);
            assert!((e.r + 0.001).abs() < 1e-12);
            assert!(
                e.discrepancy <= 4.0 * e.mc_stderr,
                "h={}: exact {} vs mc {} +- {}",
                e.h,
                e.exact_wkb,
                e.mc_estimate,
                e.mc_stderr
            );
            // The lattice value and the interval limit are within coarse
            // reach of each other already at these widths.
            assert!((e.exact_wkb - report.continuous_value).abs() < 0.1);
        }
    }

    #[test]
    fn inadmissible_start_is_reported() {
        let (net, dom) = canonical();
        let cfg = VaradhanConfig { samples: 10, base_seed: 1, n_alpha: 801 };
        let r = varadhan_check(&net, &dom, [20.0, 20.0], |x| x[0], 0.1, &[0.5], &cfg);
        assert!(matches!(r, Err(Error::NoAdmissibleStart { .. })));
    }

    #[test]
    fn concentration_tails_stay_under_the_bound() {
        let (net, dom) = canonical();
        let cfg = LlnConfig {
            samples: 3000,
            base_seed: 11,
            n_alpha: 801,
            n_v: 120,
            n_t: 100,
            dt_mean_field: 1e-3,
        };
        let report =
            lln_concentration(&net, &dom, [7.0, 3.0], 0.2, 0.3, &[0.1], &cfg).unwrap();
        assert!((report.eta_star - 0.6593599079287213).abs() < 1e-6);
        assert!(report.beta_rate > 0.0 && report.beta_rate.is_finite());
        assert!(report.beta_rate > 2.0 * report.resolution);
        for e in &report.entries {
            assert!(e.tail_fraction <= e.bound, "tail {} > bound {}", e.tail_fraction, e.bound);
            assert!(e.tail_fraction > 0.0, "eps should not swallow all mass at this h");
        }
    }

    #[test]
    fn touching_test_oracle() {
        let report = counterexample_check(1.0).unwrap();
        assert_eq!(report.stationarity_residual, 0.0);
        assert_eq!(report.touch_point, [6.0, 4.0]);
        assert!(report.touch_gap.abs() <= 1e-12);
        assert!((report.test_value - (-0.15029181948165204)).abs() < 1e-9);
        assert!(report.test_value < 0.0);
        assert!(report.violated);
        assert_eq!(format!("{:.6}", report.test_value), "-0.150292");
    }

    #[test]
    fn ambient_rate_function_is_infinite_off_the_chain() {
        let (net, dom) = canonical();
        let rf = RateFunction2D::new(&net, &dom, [7.0, 3.0], 0.2, 401, 150, 80).unwrap();
        let tol = 1e-9;
        // Zero-ish at the mean-field endpoint on the chain.
        let eta = 2.0 * (1.0 - (-0.4f64).exp());
        let on_chain = [7.0 - eta, 3.0 + eta];
        assert!(rf.eval(on_chain, tol) < 0.02);
        // Transverse displacement is unreachable however small.
        assert!(rf.eval([7.01 - eta, 3.0 + eta], tol).is_infinite());
        // As is leaving the window.
        assert!(rf.eval([7.0 - 1.5, 3.0 + 1.5], tol).is_infinite());
        // Starting point itself: reachable at finite action.
        assert!(rf.eval([7.0, 3.0], tol).is_finite());
    }
}
