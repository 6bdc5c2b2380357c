//! Exact simulation of the constrained jump process, master-equation
//! integration, and Monte-Carlo estimation of the exponential value.
//!
//! The process jumps along graph edges with rate `weight / h`. Suppressed
//! jumps (no edge) simply never fire, which realizes the state constraint
//! with the exact generator of the constrained process: zeroing a channel's
//! rate and deleting the channel are the same generator.

use crate::error::{Error, Result};
use crate::graph::JumpGraph;
use crate::network::GridFunction;
use crate::rng::SplitMix64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// Exact paths
// ---------------------------------------------------------------------------

/// One exact trajectory. `states[k]` is occupied on `[times[k], times[k+1])`
/// (and from `times.last()` to the simulation horizon for the last entry).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub seed: u64,
}

impl Trajectory {
    pub fn terminal_state(&self) -> usize {
        *self.states.last().expect("trajectory has at least the start state")
    }
}

/// Draw the next jump of the chain at node `x`, returning `(holding, target)`
/// or `None` if the node is absorbing.
fn next_jump(g: &JumpGraph, x: usize, rng: &mut SplitMix64) -> Option<(f64, usize)> {
    let edges = g.out_edges(x);
    let total: f64 = edges.iter().map(|e| e.weight).sum();
    if total <= 0.0 {
        return None;
    }
    let holding = rng.next_exp(total / g.h());
    let mut u = rng.next_f64() * total;
    for e in edges {
        if u < e.weight {
            return Some((holding, e.target));
        }
        u -= e.weight;
    }
    // Rounding pushed u past the last bucket; take the final edge.
    Some((holding, edges.last().unwrap().target))
}

/// Exact (Gillespie direct-method) simulation from `start` until `t_end`.
///
/// Bit-for-bit reproducible for a given `(graph, start, t_end, seed)`.
pub fn simulate_path(g: &JumpGraph, start: usize, t_end: f64, seed: u64) -> Trajectory {
    assert!(start < g.n_nodes(), "start node out of range");
    assert!(t_end >= 0.0 && t_end.is_finite());
    let mut rng = SplitMix64::new(seed);
    let mut t = 0.0;
    let mut x = start;
    let mut times = vec![0.0];
    let mut states = vec![start];
    while let Some((holding, target)) = next_jump(g, x, &mut rng) {
        if t + holding > t_end {
            break;
        }
        t += holding;
        x = target;
        times.push(t);
        states.push(x);
    }
    Trajectory { h: g.h(), times, states, seed }
}

/// Terminal state only; avoids storing the path.
fn terminal_state(g: &JumpGraph, start: usize, t_end: f64, seed: u64) -> usize {
    let mut rng = SplitMix64::new(seed);
    let mut t = 0.0;
    let mut x = start;
    while let Some((holding, target)) = next_jump(g, x, &mut rng) {
        if t + holding > t_end {
            break;
        }
        t += holding;
        x = target;
    }
    x
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

/// Terminal-state histogram of an ensemble. Member `i` always runs on the
/// stream `base_seed ^ i`, so the histogram does not depend on scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n: usize,
    pub t_end: f64,
    pub base_seed: u64,
    /// Terminal-state counts per graph node; sums to `n`.
    pub counts: Vec<u64>,
}

impl Ensemble {
    /// Total-variation distance between the empirical terminal distribution
    /// and a reference distribution on the same nodes.
    pub fn tv_distance(&self, p: &GridFunction) -> f64 {
        assert_eq!(p.len(), self.counts.len());
        0.5 * self
            .counts
            .iter()
            .zip(p.values())
            .map(|(&c, &q)| (c as f64 / self.n as f64 - q).abs())
            .sum::<f64>()
    }
}

fn histogram(n_nodes: usize, terminals: &[usize]) -> Vec<u64> {
    let mut counts = vec![0u64; n_nodes];
    for &t in terminals {
        counts[t] += 1;
    }
    counts
}

/// Run `n` independent trajectories and histogram their terminal states
/// (sequential reference implementation).
pub fn run_ensemble_serial(
    g: &JumpGraph,
    start: usize,
    t_end: f64,
    n: usize,
    base_seed: u64,
) -> Ensemble {
    let terminals: Vec<usize> = (0..n)
        .map(|i| terminal_state(g, start, t_end, base_seed ^ i as u64))
        .collect();
    Ensemble { n, t_end, base_seed, counts: histogram(g.n_nodes(), &terminals) }
}

/// Run `n` independent trajectories and histogram their terminal states.
/// Identical output to [`run_ensemble_serial`] — per-member seeding makes the
/// result independent of the thread schedule.
pub fn run_ensemble(g: &JumpGraph, start: usize, t_end: f64, n: usize, base_seed: u64) -> Ensemble {
    #[cfg(feature = "parallel")]
    {
        let terminals: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| terminal_state(g, start, t_end, base_seed ^ i as u64))
            .collect();
        Ensemble { n, t_end, base_seed, counts: histogram(g.n_nodes(), &terminals) }
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_ensemble_serial(g, start, t_end, n, base_seed)
    }
}

// ---------------------------------------------------------------------------
// Monte-Carlo exponential value
// ---------------------------------------------------------------------------

/// Monte-Carlo estimate of `h * log E[exp(u0(X_t)/h)]` with a jackknife
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

fn wkb_from_terminals(h: f64, u0: &GridFunction, terminals: &[usize]) -> McEstimate {
    let n = terminals.len();
    assert!(n >= 1, "need at least one sample");
    // Log-sum-exp with the max subtracted: exponents u0/h reach hundreds for
    // small h, so the naive mean would overflow long before the estimate
    // itself is extreme.
    let exps: Vec<f64> = terminals.iter().map(|&t| u0.get(t) / h).collect();
    let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = exps.iter().map(|&g| (g - m).exp()).collect();
    let s: f64 = shifted.iter().sum();
    let estimate = h * (m + (s / n as f64).ln());
    if n < 2 {
        return McEstimate { estimate, stderr: f64::INFINITY, n_samples: n };
    }
    // Jackknife over leave-one-out log-means. When a single sample carries
    // the whole sum the leave-it-out mean vanishes and the standard error is
    // honestly infinite.
    let mut theta = Vec::with_capacity(n);
    for &e in &shifted {
        let rest = s - e;
        if rest <= 0.0 {
            return McEstimate { estimate, stderr: f64::INFINITY, n_samples: n };
        }
        theta.push(h * (m + (rest / (n as f64 - 1.0)).ln()));
    }
    let mean = theta.iter().sum::<f64>() / n as f64;
    let var = theta.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>();
    let stderr = ((n as f64 - 1.0) / n as f64 * var).sqrt();
    McEstimate { estimate, stderr, n_samples: n }
}

/// Sequential reference implementation of [`mc_wkb_estimate`].
pub fn mc_wkb_estimate_serial(
    g: &JumpGraph,
    start: usize,
    u0: &GridFunction,
    t_end: f64,
    n: usize,
    base_seed: u64,
) -> McEstimate {
    assert_eq!(u0.len(), g.n_nodes(), "u0 must be sampled on the graph nodes");
    let terminals: Vec<usize> = (0..n)
        .map(|i| terminal_state(g, start, t_end, base_seed ^ i as u64))
        .collect();
    wkb_from_terminals(g.h(), u0, &terminals)
}

/// Monte-Carlo estimate of `h * log E[exp(u0(X_t)/h)]` from `n` exact
/// trajectories, with a jackknife standard error. Deterministic for a given
/// seed regardless of thread count.
pub fn mc_wkb_estimate(
    g: &JumpGraph,
    start: usize,
    u0: &GridFunction,
    t_end: f64,
    n: usize,
    base_seed: u64,
) -> McEstimate {
    #[cfg(feature = "parallel")]
    {
        assert_eq!(u0.len(), g.n_nodes(), "u0 must be sampled on the graph nodes");
        let terminals: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| terminal_state(g, start, t_end, base_seed ^ i as u64))
            .collect();
        wkb_from_terminals(g.h(), u0, &terminals)
    }
    #[cfg(not(feature = "parallel"))]
    {
        mc_wkb_estimate_serial(g, start, u0, t_end, n, base_seed)
    }
}

// ---------------------------------------------------------------------------
// Master equation
// ---------------------------------------------------------------------------

/// Result of a master-equation integration.
#[derive(Debug, Clone)]
pub struct ForwardSolve {
    pub p: GridFunction,
    /// Largest `|sum(p) - 1|` observed after any accepted step.
    pub max_mass_drift: f64,
    pub steps: usize,
}

fn master_rhs(g: &JumpGraph, p: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    let h = g.h();
    for i in 0..g.n_nodes() {
        let pi = p[i];
        if pi == 0.0 {
            continue;
        }
        for e in g.out_edges(i) {
            let flow = e.weight / h * pi;
            out[i] -= flow;
            out[e.target] += flow;
        }
    }
}

/// Compensated (Neumaier) sum; keeps the conservation check itself from
/// contributing rounding noise comparable to the quantity it measures.
fn stable_sum(v: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in v {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Integrate the forward master equation from `p0` to `t_end` with classical
/// RK4.
///
/// The step is capped at `0.1 * h / max_rate` (far inside the stability
/// region) and additionally by `dt_cap`; a step that still produces a
/// meaningfully negative entry is halved and retried, and exhausting the
/// halving budget is the error [`Error::StepTooLarge`].
pub fn forward_evolve(
    g: &JumpGraph,
    p0: &GridFunction,
    t_end: f64,
    dt_cap: f64,
) -> Result<ForwardSolve> {
    let n = g.n_nodes();
    if p0.len() != n {
        return Err(Error::InvalidModel(format!(
            "p0 has {} entries for {} nodes",
            p0.len(),
            n
        )));
    }
    if p0.values().iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidModel("p0 must be nonnegative".into()));
    }
    if (stable_sum(p0.values()) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel("p0 must sum to 1 within 1e-12".into()));
    }
    if !(dt_cap.is_finite() && dt_cap > 0.0) {
        return Err(Error::InvalidModel("dt must be positive".into()));
    }

    let max_rate = g.max_total_weight() / g.h();
    let dt_base = if max_rate > 0.0 {
        dt_cap.min(0.1 * g.h() / max_rate)
    } else {
        dt_cap
    };

    let mut p: Vec<f64> = p0.values().to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut next = vec![0.0; n];

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut max_drift = (stable_sum(&p) - 1.0).abs();
    // Negative excursions beyond this are treated as genuine positivity loss,
    // not roundoff.
    let neg_tol = -1e-13;

    while t < t_end {
        let mut dt = dt_base.min(t_end - t);
        let mut halvings = 0;
        loop {
            master_rhs(g, &p, &mut k1);
            for i in 0..n {
                tmp[i] = p[i] + 0.5 * dt * k1[i];
            }
            master_rhs(g, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = p[i] + 0.5 * dt * k2[i];
            }
            master_rhs(g, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = p[i] + dt * k3[i];
            }
            master_rhs(g, &tmp, &mut k4);
            for i in 0..n {
                next[i] = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if next.iter().all(|&x| x >= neg_tol) {
                break;
            }
            halvings += 1;
            if halvings > 40 {
                return Err(Error::StepTooLarge { t, dt });
            }
            dt *= 0.5;
        }
        std::mem::swap(&mut p, &mut next);
        t += dt;
        steps += 1;
        max_drift = max_drift.max((stable_sum(&p) - 1.0).abs());
    }

    Ok(ForwardSolve {
        p: GridFunction::new(p)?,
        max_mass_drift: max_drift,
        steps,
    })
}
