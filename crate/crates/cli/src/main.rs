mod settings;

use std::io::Write as _;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use mipt::bipartite::{count_admissible, dimer_system, homotopy_solve, solve_dimer_n0, HomotopyOptions, RootSet};
use mipt::dmft::{Init, PhysicalParams, SolverConfig};
use mipt::io::{self, Cell, Csv, RunInfo};
use mipt::model::{GraphKind, HubbardGraph};
use mipt::nevanlinna::{spectral_density, DEFAULT_ETA};
use mipt::scalar::{DEFAULT_EXTENDED_BITS, DOUBLE_BITS};
use mipt::scan::{self, ContinuationOptions, ScanConfig, Solved, SweepConfig};
use mipt::{Error, Result};

use settings::{apply_config, resolve_bits, Cli, Command, ContinuationArgs, GlobalArgs, ModelArgs, SolverArgs};

/// Outcome of a command that ran to completion.
enum Status {
    Done,
    NotConverged,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Singular { .. } | Error::CayleyPole(_) | Error::Degenerate(_) | Error::NodeMismatch { .. } => 3,
        Error::Parameter(_) | Error::Graph(_) | Error::Io { .. } | Error::Format(_) => 2,
    }
}

fn emit(global: &GlobalArgs, text: &str) -> Result<()> {
    match &global.output {
        Some(path) => io::write_text(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn graph_of(m: &ModelArgs) -> Result<(HubbardGraph, String)> {
    if let Some(path) = &m.graph_file {
        let g = HubbardGraph::from_json(&io::read_text(path)?)?;
        return Ok((g, format!("file:{}", path.display())));
    }
    let name = m.graph.clone().unwrap_or_else(|| "dimer".into());
    let kind: GraphKind = name.parse()?;
    Ok((HubbardGraph::build(kind)?, kind.to_string()))
}

fn solver_config(s: &SolverArgs, bits: u32) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let cfg = SolverConfig {
        tol: s.tol,
        max_iter: s.max_iter.unwrap_or(d.max_iter),
        mixing: s.mix.unwrap_or(d.mixing),
        init: match &s.init {
            Some(name) => name.parse::<Init>()?,
            None => Init::Zero,
        },
        precision_bits: bits,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn continuation(c: &ContinuationArgs, bits: u32) -> ContinuationOptions {
    ContinuationOptions {
        eta: c.eta.unwrap_or(DEFAULT_ETA),
        nodes: c.pade_nodes,
        bits,
    }
}

fn homotopy_options(global: &GlobalArgs) -> HomotopyOptions {
    let mut opts = HomotopyOptions::default();
    if let Some(seed) = global.seed {
        opts.seed = seed;
    }
    opts
}

fn cmd_solve(global: &GlobalArgs, model: &ModelArgs, solver: &SolverArgs) -> Result<Status> {
    let (graph, name) = graph_of(model)?;
    let phys = PhysicalParams {
        beta: model.beta.unwrap_or(1.0),
        hopping: model.hopping.unwrap_or(1.0),
        repulsion: model.repulsion.unwrap_or(0.0),
        n_omega: model.nomega.unwrap_or(100),
    };
    let bits = resolve_bits(global.bits, DOUBLE_BITS)?;
    let cfg = solver_config(solver, bits)?;
    let solved = scan::solve(&graph, &phys, &cfg)?;
    let info = RunInfo {
        graph: name,
        physical: phys,
        tol: cfg.tolerance(),
        mixing: cfg.mixing,
        init: solver.init.clone().unwrap_or_else(|| "zero".into()),
    };
    emit(global, &io::to_canonical_string(&solved.to_json(&info))?)?;
    if solved.converged() {
        Ok(Status::Done)
    } else {
        Ok(Status::NotConverged)
    }
}

fn cmd_scan(
    global: &GlobalArgs,
    model: &ModelArgs,
    solver: &SolverArgs,
    args: &settings::ScanArgs,
    cont: &ContinuationArgs,
) -> Result<Status> {
    let (graph, _) = graph_of(model)?;
    let bits = resolve_bits(global.bits, DEFAULT_EXTENDED_BITS)?;
    let cfg = ScanConfig {
        graph,
        beta: model.beta.unwrap_or(1.0),
        n_omega: model.nomega.unwrap_or(2),
        hopping: scan::parse_range(args.hopping_range.as_deref().unwrap_or("0:10:21"))?,
        repulsion: scan::parse_range(args.u_range.as_deref().unwrap_or("0:10:21"))?,
        solver: solver_config(solver, bits)?,
        pick_bits: bits,
        rho0: args.rho0.unwrap_or(false).then(|| continuation(cont, bits)),
    };
    let records = scan::run_scan(&cfg)?;
    emit(global, scan::scan_csv(&records).as_str())?;
    Ok(Status::Done)
}

fn cmd_spectral(
    global: &GlobalArgs,
    input: &settings::InputArgs,
    model: &ModelArgs,
    solver: &SolverArgs,
    mesh: &settings::MeshArgs,
    cont: &ContinuationArgs,
) -> Result<Status> {
    let bits = resolve_bits(global.bits, DEFAULT_EXTENDED_BITS)?;
    let emin = mesh.emin.unwrap_or(-10.0);
    let emax = mesh.emax.unwrap_or(10.0);
    let n_mesh = mesh.nmesh.unwrap_or(1000);
    let opts = continuation(cont, bits);
    match (&input.input, &input.u_list) {
        (Some(_), Some(_)) => Err(Error::Parameter("give either --input or --u-list, not both".into())),
        (None, None) => Err(Error::Parameter("spectral needs --input or --u-list".into())),
        (Some(path), None) => {
            let stored = io::load_result(path)?;
            let solved = match stored.extended {
                Some(r) => Solved::Extended(r),
                None => Solved::Double(stored.double),
            };
            let r = solved.continue_green(stored.info.physical.beta, bits, opts.nodes)?;
            let mut csv = Csv::new(&["epsilon", "rho"]);
            for (e, rho) in spectral_density(&r, emin, emax, n_mesh, opts.eta)? {
                csv.row(&[Cell::Num(e), Cell::Num(rho)]);
            }
            emit(global, csv.as_str())?;
            Ok(Status::Done)
        }
        (None, Some(us)) => {
            let (graph, _) = graph_of(model)?;
            let mut cfg = SweepConfig::new(graph, us.clone());
            cfg.beta = model.beta.unwrap_or(cfg.beta);
            cfg.hopping = model.hopping.unwrap_or(cfg.hopping);
            cfg.n_omega = model.nomega.unwrap_or(cfg.n_omega);
            cfg.solver = solver_config(solver, bits)?;
            cfg.emin = emin;
            cfg.emax = emax;
            cfg.n_mesh = n_mesh;
            cfg.continuation = opts;
            let out = scan::run_spectral_sweep(&cfg)?;
            for (u, why) in &out.failures {
                eprintln!("mipt: skipped U={u}: {why}");
            }
            emit(global, scan::sweep_csv(&out).as_str())?;
            Ok(Status::Done)
        }
    }
}

fn cmd_pick_check(global: &GlobalArgs, input: &settings::InputArgs) -> Result<Status> {
    let path = input
        .input
        .as_ref()
        .ok_or_else(|| Error::Parameter("pick-check needs --input".into()))?;
    let bits = resolve_bits(global.bits, DEFAULT_EXTENDED_BITS)?;
    let stored = io::load_result(path)?;
    let beta = stored.info.physical.beta;
    let report = match stored.extended {
        Some(r) => Solved::Extended(r),
        None => Solved::Double(stored.double),
    }
    .pick_report(beta, bits)?;
    emit(global, &io::to_canonical_string(&io::pick_report_to_json(&report))?)?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct RootsOutput<'a> {
    a: f64,
    b: f64,
    n_omega: usize,
    #[serde(flatten)]
    roots: &'a RootSet,
}

fn require_dimer(model: &ModelArgs) -> Result<usize> {
    if model.graph_file.is_some() || model.graph.as_deref().is_some_and(|g| g != "dimer") {
        return Err(Error::Parameter("root counting is implemented for --graph dimer only".into()));
    }
    let n = model.nomega.unwrap_or(1);
    if n > 2 {
        return Err(Error::Parameter(format!("--nomega must be 0, 1 or 2, got {n}")));
    }
    Ok(n)
}

fn cmd_roots(global: &GlobalArgs, model: &ModelArgs, args: &settings::RootArgs) -> Result<Status> {
    let n = require_dimer(model)?;
    let text = match (args.alpha, args.t, args.a, args.b) {
        (Some(alpha), Some(t), None, None) => {
            if n != 0 {
                return Err(Error::Parameter("--alpha/--t select the single-frequency quartic; use --nomega 0".into()));
            }
            io::to_canonical_string(&solve_dimer_n0(alpha, t)?)?
        }
        (None, None, Some(a), Some(b)) => {
            let set = homotopy_solve(&dimer_system(n, a, b), &homotopy_options(global))?;
            io::to_canonical_string(&RootsOutput { a, b, n_omega: n, roots: &set })?
        }
        _ => return Err(Error::Parameter("roots needs either --a and --b, or --alpha and --t".into())),
    };
    emit(global, &text)?;
    Ok(Status::Done)
}

fn cmd_phase_count(global: &GlobalArgs, model: &ModelArgs, args: &settings::RootArgs) -> Result<Status> {
    let n = require_dimer(model)?;
    let a = scan::parse_range(args.a_range.as_deref().unwrap_or("0:10:50"))?;
    let b = scan::parse_range(args.b_range.as_deref().unwrap_or("0:25:50"))?;
    let cells = count_admissible(n, &a, &b, &homotopy_options(global))?;
    let mut csv = Csv::new(&["a", "b", "count", "failed_paths"]);
    for c in &cells {
        csv.row(&[
            Cell::Num(c.a),
            Cell::Num(c.b),
            Cell::Int(c.count as i64),
            Cell::Int(c.failed_paths as i64),
        ]);
    }
    emit(global, csv.as_str())?;
    Ok(Status::Done)
}

fn run(cli: &mut Cli) -> Result<Status> {
    apply_config(cli)?;
    let global = &cli.global;
    if let Some(k) = global.jobs {
        if k == 0 {
            return Err(Error::Parameter("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Parameter(format!("cannot start {k} workers: {e}")))?;
    }
    match &cli.command {
        Command::Solve { model, solver } => cmd_solve(global, model, solver),
        Command::Scan { model, solver, scan, cont } => cmd_scan(global, model, solver, scan, cont),
        Command::Spectral { input, model, solver, mesh, cont } => cmd_spectral(global, input, model, solver, mesh, cont),
        Command::PickCheck { input } => cmd_pick_check(global, input),
        Command::Roots { model, roots } => cmd_roots(global, model, roots),
        Command::PhaseCount { model, roots } => cmd_phase_count(global, model, roots),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut cli = Cli::parse();
    match run(&mut cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("mipt: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Singular { index: 0, iteration: None }), 3);
        assert_eq!(exit_code(&Error::Parameter("x".into())), 2);
        let io = Error::Io {
            path: "p".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(exit_code(&io), 2);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["mipt", "spectral", "--u-list", "2,4", "--emin", "-5", "--bits", "128"]).unwrap();
        assert_eq!(cli.global.bits, Some(128));
        match cli.command {
            Command::Spectral { input, mesh, .. } => {
                assert_eq!(input.u_list, Some(vec![2.0, 4.0]));
                assert_eq!(mesh.emin, Some(-5.0));
            }
            _ => panic!("wrong command"),
        }
    }
}
