//! Experiment configuration: a single TOML file with `[network]`, `[domain]`
//! and `[run]` sections. Parsing and validation are separate stages so a
//! malformed file reports its location while a well-formed but inconsistent
//! one reports every violation at once.

use crnhje::network::{Domain, ReactionNetwork};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub domain: DomainConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub species: usize,
    #[serde(rename = "reaction")]
    pub reactions: Vec<ReactionConfig>,
}

/// One reversible reaction: the forward direction consumes `reactants` and
/// produces `products`; rate constants for both directions must be positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    pub reactants: Vec<u32>,
    pub products: Vec<u32>,
    pub k_forward: f64,
    pub k_backward: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Ball { center: [f64; 2], radius: f64 },
    ConvexPolygon { vertices: Vec<[f64; 2]> },
    AxisBox { lower: Vec<f64>, upper: Vec<f64> },
}

/// Ambient affine function `coeffs . x + offset`, used for terminal data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearFunction {
    pub coeffs: [f64; 2],
    #[serde(default)]
    pub offset: f64,
}

impl LinearFunction {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.coeffs[0] * x[0] + self.coeffs[1] * x[1] + self.offset
    }
}

/// Command-specific knobs. Everything is optional; each subcommand reads the
/// fields it needs and falls back to the canonical-example defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub t: Option<f64>,
    pub h: Option<f64>,
    pub h_ladder: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub n_alpha: Option<usize>,
    pub n_v: Option<usize>,
    pub n_t: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    pub r: Option<f64>,
    pub x0: Option<[f64; 2]>,
    pub alpha_start: Option<f64>,
    pub v_max: Option<f64>,
    pub u0: Option<LinearFunction>,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Validation(Vec<String>),
    Run(crnhje::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Parse(m) => write!(f, "{m}"),
            CliError::Validation(v) => write!(f, "{}", v.join("; ")),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<crnhje::Error> for CliError {
    fn from(e: crnhje::Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Run(_) => "run",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Parse(_) | CliError::Validation(_) => 1,
            CliError::Run(_) => 2,
        }
    }

    /// Individual violations for the validation case, empty otherwise; the
    /// error JSON carries them as a `details` array.
    pub fn details(&self) -> &[String] {
        match self {
            CliError::Validation(v) => v,
            _ => &[],
        }
    }
}

/// The worked example used throughout: two species interconverting with unit
/// rates on the ball of radius sqrt(2) around (7, 3).
pub fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        network: NetworkConfig {
            species: 2,
            reactions: vec![ReactionConfig {
                reactants: vec![1, 0],
                products: vec![0, 1],
                k_forward: 1.0,
                k_backward: 1.0,
            }],
        },
        domain: DomainConfig::Ball { center: [7.0, 3.0], radius: 2.0f64.sqrt() },
        run: RunConfig::default(),
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    // toml's error display carries line/column context for the failing field.
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Check everything checkable before touching any solver, and report the full
/// list of violations rather than the first one.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut errors = Vec::new();
    let n = cfg.network.species;
    if n == 0 {
        errors.push("network.species must be at least 1".into());
    }
    if cfg.network.reactions.is_empty() {
        errors.push("network needs at least one [[network.reaction]]".into());
    }
    for (j, r) in cfg.network.reactions.iter().enumerate() {
        if r.reactants.len() != n {
            errors.push(format!(
                "network.reaction[{j}].reactants has {} entries for {n} species",
                r.reactants.len()
            ));
        }
        if r.products.len() != n {
            errors.push(format!(
                "network.reaction[{j}].products has {} entries for {n} species",
                r.products.len()
            ));
        }
        if r.reactants == r.products {
            errors.push(format!("network.reaction[{j}] moves nothing (reactants == products)"));
        }
        if !(r.k_forward.is_finite() && r.k_forward > 0.0) {
            errors.push(format!(
                "network.reaction[{j}].k_forward must be positive, got {}",
                r.k_forward
            ));
        }
        if !(r.k_backward.is_finite() && r.k_backward > 0.0) {
            errors.push(format!(
                "network.reaction[{j}].k_backward must be positive, got {}",
                r.k_backward
            ));
        }
    }
    match &cfg.domain {
        DomainConfig::Ball { radius, .. } => {
            if !(radius.is_finite() && *radius > 0.0) {
                errors.push(format!("domain.radius must be positive, got {radius}"));
            }
        }
        DomainConfig::ConvexPolygon { vertices } => {
            if vertices.len() < 3 {
                errors.push(format!("domain needs at least 3 vertices, got {}", vertices.len()));
            }
        }
        DomainConfig::AxisBox { lower, upper } => {
            if lower.len() != upper.len() || lower.is_empty() {
                errors.push("domain.lower and domain.upper must have equal nonzero length".into());
            } else if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                errors.push("domain requires lower < upper in every coordinate".into());
            }
        }
    }
    let run = &cfg.run;
    let positive = [
        ("run.t", run.t),
        ("run.h", run.h),
        ("run.dt", run.dt),
        ("run.eps", run.eps),
        ("run.v_max", run.v_max),
    ];
    for (name, value) in positive {
        if let Some(v) = value {
            if !(v.is_finite() && v > 0.0) {
                errors.push(format!("{name} must be positive, got {v}"));
            }
        }
    }
    if let Some(ladder) = &run.h_ladder {
        if ladder.is_empty() {
            errors.push("run.h_ladder must be nonempty".into());
        }
        if ladder.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            errors.push("run.h_ladder entries must be positive".into());
        }
        if ladder.windows(2).any(|w| w[1] >= w[0]) {
            errors.push("run.h_ladder must be strictly decreasing".into());
        }
    }
    if let Some(na) = run.n_alpha {
        if na < 3 {
            errors.push(format!("run.n_alpha must be at least 3, got {na}"));
        }
    }
    for (name, value) in [("run.n_v", run.n_v), ("run.n_t", run.n_t), ("run.samples", run.samples)]
    {
        if let Some(0) = value {
            errors.push(format!("{name} must be at least 1"));
        }
    }
    if let Some(b) = run.beta {
        if !b.is_finite() {
            errors.push(format!("run.beta must be finite, got {b}"));
        }
    }
    if let Some(r) = run.r {
        if !r.is_finite() {
            errors.push(format!("run.r must be finite, got {r}"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(errors))
    }
}

impl ExperimentConfig {
    pub fn build_network(&self) -> Result<ReactionNetwork, CliError> {
        let mut nu_plus = Vec::new();
        let mut nu_minus = Vec::new();
        let mut k_plus = Vec::new();
        let mut k_minus = Vec::new();
        for r in &self.network.reactions {
            nu_plus.push(r.reactants.clone());
            nu_minus.push(r.products.clone());
            k_plus.push(r.k_forward);
            k_minus.push(r.k_backward);
        }
        Ok(ReactionNetwork::new(self.network.species, nu_plus, nu_minus, k_plus, k_minus)?)
    }

    pub fn build_domain(&self) -> Result<Domain, CliError> {
        Ok(match &self.domain {
            DomainConfig::Ball { center, radius } => Domain::ball(*center, *radius)?,
            DomainConfig::ConvexPolygon { vertices } => Domain::convex_polygon(vertices.clone())?,
            DomainConfig::AxisBox { lower, upper } => {
                Domain::axis_box(lower.clone(), upper.clone())?
            }
        })
    }

    /// Jump vector of the first reaction, `products - reactants`.
    pub fn first_reaction_nu(&self) -> [f64; 2] {
        let r = &self.network.reactions[0];
        [
            r.products[0] as f64 - r.reactants[0] as f64,
            r.products[1] as f64 - r.reactants[1] as f64,
        ]
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Hash of the effective configuration (after flag overrides), used to key
/// output filenames and stamped into every JSON report so artifacts can be
/// traced back to the exact inputs that produced them.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = toml::to_string(cfg).expect("config serializes");
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}
