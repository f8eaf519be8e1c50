//! Command-line flags and their `--config` file mirror.
//!
//! Every flag can also be given as a key of the JSON config file, spelled as
//! on the command line (`"max-iter": 200`). Flags win over the file; the file
//! wins over `MIPT_BITS`, which wins over built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "mipt", version, about = "Discretized IPT-DMFT solvers, Pick diagnostics and root counting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalArgs,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr; $($f:ident),*) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )*
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct GlobalArgs {
    /// JSON file mirroring the command-line flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads for scans (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Working precision in bits; overrides MIPT_BITS.
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    /// Seed for randomised start systems.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

impl GlobalArgs {
    fn merge(&mut self, o: &GlobalArgs) {
        merge_fields!(self, o; jobs, bits, seed, output);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ModelArgs {
    /// dimer, ring:L or torus:n.
    #[arg(long)]
    pub graph: Option<String>,
    /// Custom graph as JSON {"L": .., "edges": [[i, j], ..]}.
    #[arg(long)]
    pub graph_file: Option<PathBuf>,
    /// Inverse temperature β.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Hopping amplitude (called T in plots at β = 1).
    #[arg(long)]
    pub hopping: Option<f64>,
    /// On-site repulsion U.
    #[arg(long)]
    pub repulsion: Option<f64>,
    /// Frequency cutoff N: indices 0..=N are kept.
    #[arg(long)]
    pub nomega: Option<usize>,
}

impl ModelArgs {
    fn merge(&mut self, o: &ModelArgs) {
        merge_fields!(self, o; graph, graph_file, beta, hopping, repulsion, nomega);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SolverArgs {
    /// zero or resolvent.
    #[arg(long)]
    pub init: Option<String>,
    /// Step-size threshold (default depends on precision).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap (default 500)
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Damping θ in (0, 1].
    #[arg(long)]
    pub mix: Option<f64>,
}

impl SolverArgs {
    fn merge(&mut self, o: &SolverArgs) {
        merge_fields!(self, o; init, tol, max_iter, mix);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ContinuationArgs {
    /// Broadening of the real-axis evaluation.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Number of Matsubara nodes fed to the Padé fit (default: all).
    #[arg(long)]
    pub pade_nodes: Option<usize>,
}

impl ContinuationArgs {
    fn merge(&mut self, o: &ContinuationArgs) {
        merge_fields!(self, o; eta, pade_nodes);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct MeshArgs {
    /// Lower end of the real-frequency mesh
    #[arg(long, allow_hyphen_values = true)]
    pub emin: Option<f64>,
    /// Upper end of the real-frequency mesh
    #[arg(long, allow_hyphen_values = true)]
    pub emax: Option<f64>,
    /// Number of mesh points
    #[arg(long)]
    pub nmesh: Option<usize>,
}

impl MeshArgs {
    fn merge(&mut self, o: &MeshArgs) {
        merge_fields!(self, o; emin, emax, nmesh);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ScanArgs {
    /// Hopping grid start:stop:count.
    #[arg(long)]
    pub hopping_range: Option<String>,
    /// Repulsion grid start:stop:count.
    #[arg(long)]
    pub u_range: Option<String>,
    /// Also continue each point and report ρ(0).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub rho0: Option<bool>,
}

impl ScanArgs {
    fn merge(&mut self, o: &ScanArgs) {
        merge_fields!(self, o; hopping_range, u_range, rho0);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct InputArgs {
    /// Result file written by `solve`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated repulsion values for a sweep.
    #[arg(long, value_delimiter = ',')]
    pub u_list: Option<Vec<f64>>,
}

impl InputArgs {
    fn merge(&mut self, o: &InputArgs) {
        merge_fields!(self, o; input, u_list);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct RootArgs {
    /// Dimensionless a = t²/π²
    #[arg(long)]
    pub a: Option<f64>,
    /// Dimensionless b = u²/π⁴
    #[arg(long)]
    pub b: Option<f64>,
    /// u/t for the single-frequency quartic.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Hopping t for the single-frequency quartic
    #[arg(long)]
    pub t: Option<f64>,
    /// a grid start:stop:count.
    #[arg(long)]
    pub a_range: Option<String>,
    /// b grid start:stop:count.
    #[arg(long)]
    pub b_range: Option<String>,
}

impl RootArgs {
    fn merge(&mut self, o: &RootArgs) {
        merge_fields!(self, o; a, b, alpha, t, a_range, b_range);
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the damped fixed-point iteration and write the result as JSON.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve and Pick-check every point of a (hopping, U) grid; CSV output.
    Scan {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        cont: ContinuationArgs,
    },
    /// Padé spectral density of a stored result or of a sweep over U; CSV output.
    Spectral {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        cont: ContinuationArgs,
    },
    /// Pick matrices of -G, -Δ, -Σ for a stored result; JSON output.
    PickCheck {
        #[command(flatten)]
        input: InputArgs,
    },
    /// All roots of the bipartite polynomial system at one (a, b); JSON output.
    Roots {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        roots: RootArgs,
    },
    /// Admissible-root counts over an (a, b) grid; CSV output.
    PhaseCount {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        roots: RootArgs,
    },
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    #[serde(flatten)]
    pub global: GlobalArgs,
    #[serde(flatten)]
    pub model: ModelArgs,
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[serde(flatten)]
    pub cont: ContinuationArgs,
    #[serde(flatten)]
    pub mesh: MeshArgs,
    #[serde(flatten)]
    pub scan: ScanArgs,
    #[serde(flatten)]
    pub input: InputArgs,
    #[serde(flatten)]
    pub roots: RootArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> mipt::Result<FileConfig> {
        let text = mipt::io::read_text(path)?;
        let bad = |m: String| mipt::Error::Format(format!("{}: {m}", path.display()));
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| bad("config must be a JSON object".into()))?;
        let known = serde_json::to_value(FileConfig::default()).expect("config serializes");
        let known = known.as_object().expect("config is an object");
        if let Some(k) = obj.keys().find(|k| !known.contains_key(*k)) {
            return Err(bad(format!("unknown key {k:?}")));
        }
        serde_json::from_value(value).map_err(|e| bad(e.to_string()))
    }
}

/// Folds the config file (if any) under the command-line flags.
pub fn apply_config(cli: &mut Cli) -> mipt::Result<()> {
    let Some(path) = cli.global.config.clone() else {
        return Ok(());
    };
    let f = FileConfig::load(&path)?;
    cli.global.merge(&f.global);
    match &mut cli.command {
        Command::Solve { model, solver } => {
            model.merge(&f.model);
            solver.merge(&f.solver);
        }
        Command::Scan { model, solver, scan, cont } => {
            model.merge(&f.model);
            solver.merge(&f.solver);
            scan.merge(&f.scan);
            cont.merge(&f.cont);
        }
        Command::Spectral { input, model, solver, mesh, cont } => {
            input.merge(&f.input);
            model.merge(&f.model);
            solver.merge(&f.solver);
            mesh.merge(&f.mesh);
            cont.merge(&f.cont);
        }
        Command::PickCheck { input } => input.merge(&f.input),
        Command::Roots { model, roots } | Command::PhaseCount { model, roots } => {
            model.merge(&f.model);
            roots.merge(&f.roots);
        }
    }
    Ok(())
}

/// `--bits`, then the config file (already merged), then `MIPT_BITS`, then `default`.
pub fn resolve_bits(flag: Option<u32>, default: u32) -> mipt::Result<u32> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var("MIPT_BITS") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| mipt::Error::Parameter(format!("MIPT_BITS must be an integer, got {s:?}"))),
        Err(_) => Ok(default),
    }
}
