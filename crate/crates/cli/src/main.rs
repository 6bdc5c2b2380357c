//! Experiment runner. Every subcommand reads one TOML configuration (or the
//! built-in canonical example when `--config` is omitted), runs the matching
//! solver pipeline, and writes `<subcommand>-<confighash>.{csv,json}`
//! artifacts into `--out`. Identical configuration and seed produce identical
//! bytes; the JSON envelope carries the hash so artifacts are traceable.

mod config;
mod output;

use clap::{Parser, Subcommand};
use config::{parse_config, validate, CliError, ExperimentConfig, LinearFunction};
use crnhje::chje::{
    mean_field_path, rate_function, solve_fd, uniform_grid, Hamiltonian1D, RENDER_INFINITE,
};
use crnhje::dhje::{apply_hamiltonian, evolve_ode, evolve_semigroup};
use crnhje::graph::JumpGraph;
use crnhje::ldp::{counterexample_check, lln_concentration, varadhan_check, LlnConfig, VaradhanConfig};
use crnhje::network::{build_grid, nu_perp, GridFunction};
use crnhje::segment::{build_segment_grid, evolve_segment};
use crnhje::simulate::run_ensemble;
use output::{artifact_path, write_json, CsvTable};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "crnhje", version, about = "Reaction-network Hamilton-Jacobi experiments")]
struct Cli {
    /// Experiment configuration (TOML); defaults to the built-in canonical
    /// two-species interconversion example on the ball around (7, 3).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override `run.seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the worker-thread count (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample constrained jump-process trajectories and histogram the
    /// terminal states.
    Simulate,
    /// Evolve terminal data under the lattice backward equation.
    SolveDhje,
    /// Evolve terminal data on the 1-D chain cut out by a one-reaction
    /// two-species network.
    SolveSegment,
    /// Solve the continuous interval equation with no-flux boundaries.
    SolveChje,
    /// Tabulate the action needed to reach each point of the interval.
    Rate,
    /// Integrate the zero-cost (law-of-large-numbers) path.
    Meanfield,
    /// Compare exact, sampled and continuum values over a mesh ladder.
    LdpCheck,
    /// Estimate concentration tails against the action-based bound.
    Lln,
    /// Evaluate the boundary test exposing the wrong continuum boundary
    /// condition.
    Counterexample,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SolveDhje => "solve-dhje",
            Command::SolveSegment => "solve-segment",
            Command::SolveChje => "solve-chje",
            Command::Rate => "rate",
            Command::Meanfield => "meanfield",
            Command::LdpCheck => "ldp-check",
            Command::Lln => "lln",
            Command::Counterexample => "counterexample",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Command::Simulate | Command::LdpCheck | Command::Lln)
    }
}

// Canonical-example fallbacks for fields the configuration leaves unset.
const DEFAULT_T: f64 = 0.2;
const DEFAULT_H: f64 = 0.1;
const DEFAULT_LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const DEFAULT_N_ALPHA: usize = 1601;
const DEFAULT_N_V: usize = 200;
const DEFAULT_N_T: usize = 200;
const DEFAULT_SAMPLES: usize = 100_000;
const DEFAULT_EPS: f64 = 0.3;
const DEFAULT_X0: [f64; 2] = [7.0, 3.0];
const DEFAULT_PATH_DT: f64 = 1e-3;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            let envelope = serde_json::json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "details": e.details(),
                }
            });
            eprintln!("{envelope}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => config::default_config(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    validate(&cfg)?;
    if cli.command.needs_seed() && cfg.run.seed.is_none() {
        return Err(CliError::Validation(vec![format!(
            "run.seed (or --seed) is required for `{}`",
            cli.command.name()
        )]));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("cannot configure {n} worker threads: {e}")))?;
    }
    // The hash keys artifacts by the effective configuration, overrides
    // included, so a rerun with a different seed lands in different files.
    let hash = config::config_hash(&cfg);
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;
    if cli.verbose {
        eprintln!("config hash {hash}, running `{}`", cli.command.name());
    }
    let ctx = Ctx { cfg, hash, out: cli.out.clone(), command: cli.command };
    match cli.command {
        Command::Simulate => ctx.simulate(),
        Command::SolveDhje => ctx.solve_dhje(),
        Command::SolveSegment => ctx.solve_segment(),
        Command::SolveChje => ctx.solve_chje(),
        Command::Rate => ctx.rate(),
        Command::Meanfield => ctx.meanfield(),
        Command::LdpCheck => ctx.ldp_check(),
        Command::Lln => ctx.lln(),
        Command::Counterexample => ctx.counterexample(),
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
    out: PathBuf,
    command: Command,
}

impl Ctx {
    fn csv_path(&self) -> PathBuf {
        artifact_path(&self.out, self.command.name(), &self.hash, "csv")
    }

    fn json_path(&self) -> PathBuf {
        artifact_path(&self.out, self.command.name(), &self.hash, "json")
    }

    fn emit<T: Serialize>(
        &self,
        table: Option<CsvTable>,
        report: &T,
    ) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        if let Some(table) = table {
            let path = self.csv_path();
            table.write(&path)?;
            written.push(path);
        }
        let path = self.json_path();
        write_json(&path, self.command.name(), &self.hash, report)?;
        written.push(path);
        Ok(written)
    }

    fn t(&self) -> f64 {
        self.cfg.run.t.unwrap_or(DEFAULT_T)
    }

    fn h(&self) -> f64 {
        self.cfg.run.h.unwrap_or(DEFAULT_H)
    }

    fn ladder(&self) -> Vec<f64> {
        self.cfg.run.h_ladder.clone().unwrap_or_else(|| DEFAULT_LADDER.to_vec())
    }

    fn x0(&self) -> [f64; 2] {
        self.cfg.run.x0.unwrap_or(DEFAULT_X0)
    }

    fn u0(&self) -> LinearFunction {
        self.cfg.run.u0.clone().unwrap_or(LinearFunction { coeffs: [1.0, 0.0], offset: 0.0 })
    }

    fn seed(&self) -> u64 {
        self.cfg.run.seed.expect("checked before dispatch")
    }

    fn hamiltonian(&self) -> Result<Hamiltonian1D, CliError> {
        let net = self.cfg.build_network()?;
        let dom = self.cfg.build_domain()?;
        Ok(Hamiltonian1D::from_network_segment(
            &net,
            &dom,
            self.x0(),
            self.cfg.run.beta.unwrap_or(0.0),
        )?)
    }

    fn simulate(&self) -> Result<Vec<PathBuf>, CliError> {
        let net = self.cfg.build_network()?;
        let dom = self.cfg.build_domain()?;
        let (h, t) = (self.h(), self.t());
        let grid = build_grid(&dom, &net, h)?;
        let graph = JumpGraph::from_lattice(&net, &grid);
        let x0 = self.x0();
        let start = grid.find_rounded(&x0).ok_or_else(|| {
            crnhje::Error::InvalidModel(format!("start point {x0:?} is not on the h={h} grid"))
        })?;
        let samples = self.cfg.run.samples.unwrap_or(DEFAULT_SAMPLES);
        let ensemble = run_ensemble(&graph, start, t, samples, self.seed());
        let mut table = CsvTable::new(vec!["x1", "x2", "count", "frequency"]);
        let mut mean = [0.0f64; 2];
        for (i, &count) in ensemble.counts.iter().enumerate() {
            let x = grid.coords(i);
            let frequency = count as f64 / samples as f64;
            mean[0] += x[0] * frequency;
            mean[1] += x[1] * frequency;
            table.push(vec![x[0], x[1], count as f64, frequency]);
        }
        #[derive(Serialize)]
        struct SimulateReport {
            h: f64,
            t: f64,
            samples: usize,
            seed: u64,
            n_nodes: usize,
            start: [f64; 2],
            mean_terminal: [f64; 2],
        }
        let report = SimulateReport {
            h,
            t,
            samples,
            seed: self.seed(),
            n_nodes: grid.n_points(),
            start: [grid.coords(start)[0], grid.coords(start)[1]],
            mean_terminal: mean,
        };
        self.emit(Some(table), &report)
    }

    fn solve_dhje(&self) -> Result<Vec<PathBuf>, CliError> {
        let net = self.cfg.build_network()?;
        let dom = self.cfg.build_domain()?;
        let (h, t) = (self.h(), self.t());
        let grid = build_grid(&dom, &net, h)?;
        let graph = JumpGraph::from_lattice(&net, &grid);
        let u0fn = self.u0();
        let u0 = GridFunction::from_coords(&grid, |x| u0fn.eval([x[0], x[1]]))?;
        let initial_rate_norm = apply_hamiltonian(&graph, &u0)?.sup_norm();
        let u_t = match self.cfg.run.dt {
            Some(dt) => evolve_semigroup(&graph, &u0, t, dt)?,
            None => evolve_ode(&graph, &u0, t)?,
        };
        let mut table = CsvTable::new(vec!["x1", "x2", "u0", "u_t"]);
        for i in 0..grid.n_points() {
            let x = grid.coords(i);
            table.push(vec![x[0], x[1], u0.get(i), u_t.get(i)]);
        }
        #[derive(Serialize)]
        struct DhjeReport {
            h: f64,
            t: f64,
            dt: Option<f64>,
            n_nodes: usize,
            initial_rate_norm: f64,
            u_min: f64,
            u_max: f64,
        }
        let report = DhjeReport {
            h,
            t,
            dt: self.cfg.run.dt,
            n_nodes: grid.n_points(),
            initial_rate_norm,
            u_min: u_t.min(),
            u_max: u_t.max(),
        };
        self.emit(Some(table), &report)
    }

    fn solve_segment(&self) -> Result<Vec<PathBuf>, CliError> {
        let net = self.cfg.build_network()?;
        let dom = self.cfg.build_domain()?;
        let (h, t) = (self.h(), self.t());
        let beta = self.cfg.run.beta.unwrap_or(0.0);
        let r = self.cfg.run.r.unwrap_or(0.0);
        let nu = self.cfg.first_reaction_nu();
        let seg = build_segment_grid(&dom, self.x0(), nu, beta, r, h)?;
        let ham = Hamiltonian1D::from_network_segment(&net, &dom, self.x0(), beta)?;
        let u0fn = self.u0();
        let w0 = seg.sample(|x| u0fn.eval(x))?;
        let w_t = evolve_segment(&seg, &ham, &w0, t)?;
        let mut table = CsvTable::new(vec!["alpha", "x1", "x2", "w0", "w_t"]);
        for i in 0..seg.n_points() {
            let x = seg.point(i);
            table.push(vec![seg.alpha(i), x[0], x[1], w0.get(i), w_t.get(i)]);
        }
        #[derive(Serialize)]
        struct SegmentReport {
            h: f64,
            t: f64,
            beta: f64,
            r: f64,
            n_points: usize,
            alpha_bounds: (f64, f64),
            k_range: (i64, i64),
        }
        let report = SegmentReport {
            h,
            t,
            beta,
            r,
            n_points: seg.n_points(),
            alpha_bounds: seg.alpha_bounds(),
            k_range: seg.k_range(),
        };
        self.emit(Some(table), &report)
    }

    fn solve_chje(&self) -> Result<Vec<PathBuf>, CliError> {
        let t = self.t();
        let beta = self.cfg.run.beta.unwrap_or(0.0);
        let n_alpha = self.cfg.run.n_alpha.unwrap_or(DEFAULT_N_ALPHA);
        let ham = self.hamiltonian()?;
        let nu = self.cfg.first_reaction_nu();
        let perp = nu_perp(nu);
        let x0 = self.x0();
        let base = [x0[0] + beta * perp[0], x0[1] + beta * perp[1]];
        let embed = |alpha: f64| [base[0] + alpha * nu[0], base[1] + alpha * nu[1]];
        let u0fn = self.u0();
        let alphas = uniform_grid(ham.a(), ham.b(), n_alpha);
        let w0: Vec<f64> = alphas.iter().map(|&al| u0fn.eval(embed(al))).collect();
        let fd = solve_fd(&ham, &w0, t, self.cfg.run.dt)?;
        let mut table = CsvTable::new(vec!["alpha", "x1", "x2", "w0", "w_t"]);
        for (i, &al) in fd.alphas.iter().enumerate() {
            let x = embed(al);
            table.push(vec![al, x[0], x[1], w0[i], fd.w[i]]);
        }
        #[derive(Serialize)]
        struct ChjeReport {
            t: f64,
            beta: f64,
            n_alpha: usize,
            steps: usize,
            interval: (f64, f64),
            max_slope: f64,
        }
        let report = ChjeReport {
            t,
            beta,
            n_alpha,
            steps: fd.steps,
            interval: (ham.a(), ham.b()),
            max_slope: fd.max_slope(),
        };
        self.emit(Some(table), &report)
    }

    fn rate(&self) -> Result<Vec<PathBuf>, CliError> {
        let t = self.t();
        let alpha_start = self.cfg.run.alpha_start.unwrap_or(0.0);
        let n_alpha = self.cfg.run.n_alpha.unwrap_or(DEFAULT_N_ALPHA);
        let n_v = self.cfg.run.n_v.unwrap_or(DEFAULT_N_V);
        let n_t = self.cfg.run.n_t.unwrap_or(DEFAULT_N_T);
        let ham = self.hamiltonian()?;
        let table_data =
            rate_function(&ham, alpha_start, t, n_alpha, n_v, n_t, self.cfg.run.v_max)?;
        let beta = self.cfg.run.beta.unwrap_or(0.0);
        let nu = self.cfg.first_reaction_nu();
        let perp = nu_perp(nu);
        let x0 = self.x0();
        let base = [x0[0] + beta * perp[0], x0[1] + beta * perp[1]];
        let mut table = CsvTable::new(vec!["y", "x1", "x2", "rate"]);
        for (i, &y) in table_data.y.iter().enumerate() {
            let value = table_data.i_values[i];
            let rendered = if value >= RENDER_INFINITE { f64::INFINITY } else { value };
            table.push(vec![y, base[0] + y * nu[0], base[1] + y * nu[1], rendered]);
        }
        #[derive(Serialize)]
        struct RateReport {
            t: f64,
            alpha_start: f64,
            alpha_start_snapped: f64,
            n_alpha: usize,
            n_v: usize,
            n_t: usize,
            argmin_y: f64,
            min_value: f64,
        }
        let report = RateReport {
            t,
            alpha_start,
            alpha_start_snapped: table_data.alpha_start_snapped,
            n_alpha,
            n_v,
            n_t,
            argmin_y: table_data.y[table_data.argmin_index],
            min_value: table_data.min_value(),
        };
        self.emit(Some(table), &report)
    }

    fn meanfield(&self) -> Result<Vec<PathBuf>, CliError> {
        let t = self.t();
        let dt = self.cfg.run.dt.unwrap_or(DEFAULT_PATH_DT);
        let alpha_start = self.cfg.run.alpha_start.unwrap_or(0.0);
        let ham = self.hamiltonian()?;
        let path = mean_field_path(&ham, alpha_start, t, dt)?;
        let beta = self.cfg.run.beta.unwrap_or(0.0);
        let nu = self.cfg.first_reaction_nu();
        let perp = nu_perp(nu);
        let x0 = self.x0();
        let base = [x0[0] + beta * perp[0], x0[1] + beta * perp[1]];
        let mut table = CsvTable::new(vec!["s", "eta", "x1", "x2", "v", "l"]);
        for (k, &s) in path.times.iter().enumerate() {
            let eta = path.eta[k];
            table.push(vec![
                s,
                eta,
                base[0] + eta * nu[0],
                base[1] + eta * nu[1],
                path.v[k],
                path.l[k],
            ]);
        }
        #[derive(Serialize)]
        struct MeanfieldReport {
            t: f64,
            dt: f64,
            alpha_start: f64,
            terminal_eta: f64,
            first_stick_time: Option<f64>,
        }
        let report = MeanfieldReport {
            t,
            dt,
            alpha_start,
            terminal_eta: path.terminal(),
            first_stick_time: path.first_stick_time(),
        };
        self.emit(Some(table), &report)
    }

    fn ldp_check(&self) -> Result<Vec<PathBuf>, CliError> {
        let net = self.cfg.build_network()?;
        let dom = self.cfg.build_domain()?;
        let t = self.t();
        let ladder = self.ladder();
        let vcfg = VaradhanConfig {
            samples: self.cfg.run.samples.unwrap_or(DEFAULT_SAMPLES),
            base_seed: self.seed(),
            n_alpha: self.cfg.run.n_alpha.unwrap_or(DEFAULT_N_ALPHA),
        };
        let u0fn = self.u0();
        let report = varadhan_check(&net, &dom, self.x0(), |x| u0fn.eval(x), t, &ladder, &vcfg)?;
        let mut table = CsvTable::new(vec![
            "h",
            "beta",
            "r",
            "k0",
            "exact_wkb",
            "mc_estimate",
            "mc_stderr",
            "discrepancy",
            "limit_error",
        ]);
        for e in &report.entries {
            table.push(vec![
                e.h,
                e.beta,
                e.r,
                e.k0 as f64,
                e.exact_wkb,
                e.mc_estimate,
                e.mc_stderr,
                e.discrepancy,
                (e.exact_wkb - report.continuous_value).abs(),
            ]);
        }
        self.emit(Some(table), &report)
    }

    fn lln(&self) -> Result<Vec<PathBuf>, CliError> {
        let net = self.cfg.build_network()?;
        let dom = self.cfg.build_domain()?;
        let t = self.t();
        let eps = self.cfg.run.eps.unwrap_or(DEFAULT_EPS);
        let ladder = self.ladder();
        let lcfg = LlnConfig {
            samples: self.cfg.run.samples.unwrap_or(DEFAULT_SAMPLES),
            base_seed: self.seed(),
            n_alpha: self.cfg.run.n_alpha.unwrap_or(DEFAULT_N_ALPHA),
            n_v: self.cfg.run.n_v.unwrap_or(DEFAULT_N_V),
            n_t: self.cfg.run.n_t.unwrap_or(DEFAULT_N_T),
            dt_mean_field: self.cfg.run.dt.unwrap_or(DEFAULT_PATH_DT),
        };
        let report = lln_concentration(&net, &dom, self.x0(), t, eps, &ladder, &lcfg)?;
        let mut table = CsvTable::new(vec!["h", "samples", "tail_fraction", "bound"]);
        for e in &report.entries {
            table.push(vec![e.h, e.samples as f64, e.tail_fraction, e.bound]);
        }
        self.emit(Some(table), &report)
    }

    fn counterexample(&self) -> Result<Vec<PathBuf>, CliError> {
        let h = self.cfg.run.h.unwrap_or(1.0);
        let report = counterexample_check(h)?;
        #[derive(Serialize)]
        struct Verdict {
            verdict: &'static str,
            report: crnhje::ldp::CounterexampleReport,
        }
        let payload = Verdict {
            verdict: if report.violated { "violated" } else { "not violated" },
            report,
        };
        self.emit(None, &payload)
    }
}
