//! Parameter sweeps: the `(hopping, U)` Pick scan and the spectral sweep
//! over `U`. Grid points run concurrently on the current rayon pool and are
//! collected in grid order, so the output does not depend on the worker count.

use rayon::prelude::*;

use crate::dmft::{solve_fixed_point, PhysicalParams, SolveResult, SolverConfig};
use crate::io::{result_to_json, Cell, Csv, RunInfo};
use crate::model::HubbardGraph;
use crate::nevanlinna::{continue_green, density_at, pick_report, spectral_density, PickReport, RationalInterpolant};
use crate::scalar::{ExtFloat, Real, DEFAULT_EXTENDED_BITS, DOUBLE_BITS};
use crate::{Error, Result};

/// A solve carried out in double or extended precision.
#[derive(Debug, Clone)]
pub enum Solved {
    Double(SolveResult<f64>),
    Extended(SolveResult<ExtFloat>),
}

macro_rules! with_result {
    ($s:expr, $r:ident => $body:expr) => {
        match $s {
            Solved::Double($r) => $body,
            Solved::Extended($r) => $body,
        }
    };
}

impl Solved {
    pub fn iterations(&self) -> usize {
        with_result!(self, r => r.iterations)
    }

    pub fn converged(&self) -> bool {
        with_result!(self, r => r.converged)
    }

    pub fn admissible(&self) -> bool {
        with_result!(self, r => r.admissible)
    }

    pub fn to_double(&self) -> SolveResult<f64> {
        match self {
            Solved::Double(r) => r.clone(),
            Solved::Extended(r) => SolveResult {
                params: r.params,
                delta: r.delta.to_f64(),
                sigma: r.sigma.to_f64(),
                green: r.green.to_f64(),
                residuals: r.residuals.clone(),
                iterations: r.iterations,
                converged: r.converged,
                admissible: r.admissible,
                left_admissible_at: r.left_admissible_at,
                max_abs_re: r.max_abs_re,
                precision_bits: r.precision_bits,
            },
        }
    }

    pub fn pick_report(&self, beta: f64, bits: u32) -> Result<PickReport> {
        with_result!(self, r => pick_report(r, beta, bits))
    }

    pub fn continue_green(&self, beta: f64, bits: u32, nodes: Option<usize>) -> Result<RationalInterpolant<ExtFloat>> {
        with_result!(self, r => continue_green(r, beta, bits, nodes))
    }

    pub fn to_json(&self, info: &RunInfo) -> serde_json::Value {
        with_result!(self, r => result_to_json(info, r))
    }
}

/// Solves at `cfg.precision_bits`, in `f64` when that is double precision.
pub fn solve(graph: &HubbardGraph, phys: &PhysicalParams, cfg: &SolverConfig) -> Result<Solved> {
    phys.validate()?;
    let p = phys.dimensionless();
    let bits = cfg.precision_bits;
    if bits <= DOUBLE_BITS {
        let part = graph.partition::<f64>(bits);
        solve_fixed_point(&p, &part, cfg).map(Solved::Double)
    } else {
        let part = graph.partition::<ExtFloat>(bits);
        solve_fixed_point(&p, &part, cfg).map(Solved::Extended)
    }
}

/// Padé continuation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub eta: f64,
    /// Number of Matsubara nodes used; all when `None`.
    pub nodes: Option<usize>,
    pub bits: u32,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            eta: crate::nevanlinna::DEFAULT_ETA,
            nodes: None,
            bits: DEFAULT_EXTENDED_BITS,
        }
    }
}

/// Inclusive range `start:stop:count`, `count ≥ 1` points.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    crate::nevanlinna::mesh(start, stop, count)
}

/// Parses `start:stop:count` into a grid.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Parameter(format!("range {s:?} must be start:stop:count"));
    match parts.as_slice() {
        [a, b, n] => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n == 0 || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            Ok(linspace(a, b, n))
        }
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub graph: HubbardGraph,
    pub beta: f64,
    pub n_omega: usize,
    pub hopping: Vec<f64>,
    pub repulsion: Vec<f64>,
    pub solver: SolverConfig,
    /// Precision of the Pick stage.
    pub pick_bits: u32,
    /// Also report `ρ(0)` when set.
    pub rho0: Option<ContinuationOptions>,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hopping.is_empty() || self.repulsion.is_empty() {
            return Err(Error::Parameter("scan ranges must be non-empty".into()));
        }
        if self.pick_bits < DOUBLE_BITS {
            return Err(Error::Parameter(format!("pick precision must be at least {DOUBLE_BITS} bits")));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ScanRecord {
    pub hopping: f64,
    pub repulsion: f64,
    pub iterations: Option<usize>,
    pub converged: bool,
    /// Smallest Pick eigenvalues of `−G`, `−Δ`, `−Σ`; NaN when unavailable.
    pub min_eig: [f64; 3],
    pub rho0: f64,
    pub admissible: bool,
    pub error: Option<String>,
}

fn scan_point(cfg: &ScanConfig, hopping: f64, repulsion: f64) -> ScanRecord {
    let mut rec = ScanRecord {
        hopping,
        repulsion,
        iterations: None,
        converged: false,
        min_eig: [f64::NAN; 3],
        rho0: f64::NAN,
        admissible: false,
        error: None,
    };
    let phys = PhysicalParams {
        beta: cfg.beta,
        hopping,
        repulsion,
        n_omega: cfg.n_omega,
    };
    let solved = match solve(&cfg.graph, &phys, &cfg.solver) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.iterations = Some(solved.iterations());
    rec.converged = solved.converged();
    rec.admissible = solved.admissible();
    match solved.pick_report(cfg.beta, cfg.pick_bits) {
        Ok(r) => {
            rec.min_eig = [r.green.min_eig.to_f64(), r.delta.min_eig.to_f64(), r.sigma.min_eig.to_f64()];
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    if let Some(opts) = &cfg.rho0 {
        match solved.continue_green(cfg.beta, opts.bits, opts.nodes) {
            Ok(r) => rec.rho0 = density_at(&r, 0.0, opts.eta),
            Err(e) => rec.error = Some(e.to_string()),
        }
    }
    rec
}

/// One record per grid point, hopping-major.
pub fn run_scan(cfg: &ScanConfig) -> Result<Vec<ScanRecord>> {
    cfg.validate()?;
    let grid: Vec<(f64, f64)> = cfg
        .hopping
        .iter()
        .flat_map(|&h| cfg.repulsion.iter().map(move |&u| (h, u)))
        .collect();
    let records: Vec<ScanRecord> = grid
        .par_iter()
        .map(|&(h, u)| scan_point(cfg, h, u))
        .collect();
    for r in records.iter().filter(|r| r.error.is_some()) {
        log::warn!(
            "scan point hopping={} U={}: {}",
            r.hopping,
            r.repulsion,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(records)
}

pub const SCAN_HEADER: [&str; 9] = [
    "hopping",
    "U",
    "iterations",
    "converged",
    "min_eig_G",
    "min_eig_D",
    "min_eig_S",
    "rho0",
    "admissible",
];

pub fn scan_csv(records: &[ScanRecord]) -> Csv {
    let mut csv = Csv::new(&SCAN_HEADER);
    for r in records {
        csv.row(&[
            Cell::Num(r.hopping),
            Cell::Num(r.repulsion),
            r.iterations.map_or(Cell::Num(f64::NAN), |k| Cell::Int(k as i64)),
            Cell::Bool(r.converged),
            Cell::Num(r.min_eig[0]),
            Cell::Num(r.min_eig[1]),
            Cell::Num(r.min_eig[2]),
            Cell::Num(r.rho0),
            Cell::Bool(r.admissible),
        ]);
    }
    csv
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub graph: HubbardGraph,
    pub beta: f64,
    pub hopping: f64,
    pub n_omega: usize,
    pub repulsion: Vec<f64>,
    pub solver: SolverConfig,
    pub emin: f64,
    pub emax: f64,
    pub n_mesh: usize,
    pub continuation: ContinuationOptions,
}

impl SweepConfig {
    /// `β = 1`, hopping 1, 100 frequencies, mesh `[−10, 10]` with 1000
    /// points; solved at the continuation precision.
    pub fn new(graph: HubbardGraph, repulsion: Vec<f64>) -> Self {
        SweepConfig {
            graph,
            beta: 1.0,
            hopping: 1.0,
            n_omega: 100,
            repulsion,
            solver: SolverConfig {
                precision_bits: DEFAULT_EXTENDED_BITS,
                ..SolverConfig::default()
            },
            emin: -10.0,
            emax: 10.0,
            n_mesh: 1000,
            continuation: ContinuationOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralCurve {
    pub repulsion: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rho0: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub curves: Vec<SpectralCurve>,
    /// `U` values whose solve or continuation failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

fn sweep_point(cfg: &SweepConfig, u: f64) -> Result<SpectralCurve> {
    let phys = PhysicalParams {
        beta: cfg.beta,
        hopping: cfg.hopping,
        repulsion: u,
        n_omega: cfg.n_omega,
    };
    let solved = solve(&cfg.graph, &phys, &cfg.solver)?;
    let opts = &cfg.continuation;
    let r = solved.continue_green(cfg.beta, opts.bits, opts.nodes)?;
    Ok(SpectralCurve {
        repulsion: u,
        iterations: solved.iterations(),
        converged: solved.converged(),
        rho0: density_at(&r, 0.0, opts.eta),
        points: spectral_density(&r, cfg.emin, cfg.emax, cfg.n_mesh, opts.eta)?,
    })
}

pub fn run_spectral_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    if cfg.repulsion.is_empty() {
        return Err(Error::Parameter("U list must be non-empty".into()));
    }
    if !(cfg.continuation.eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {}", cfg.continuation.eta)));
    }
    cfg.solver.validate()?;
    let outcomes: Vec<Result<SpectralCurve>> = cfg
        .repulsion
        .par_iter()
        .map(|&u| sweep_point(cfg, u))
        .collect();
    let mut out = SweepOutput::default();
    for (u, o) in cfg.repulsion.iter().zip(outcomes) {
        match o {
            Ok(c) => out.curves.push(c),
            Err(e) => {
                log::warn!("skipping U={u}: {e}");
                out.failures.push((*u, e.to_string()));
            }
        }
    }
    Ok(out)
}

pub fn sweep_csv(out: &SweepOutput) -> Csv {
    let mut csv = Csv::new(&["U", "epsilon", "rho"]);
    for c in &out.curves {
        for &(e, rho) in &c.points {
            csv.row(&[Cell::Num(c.repulsion), Cell::Num(e), Cell::Num(rho)]);
        }
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GraphKind;

    fn dimer() -> HubbardGraph {
        HubbardGraph::build(GraphKind::Dimer).unwrap()
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:10:3").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_range("2:9:1").unwrap(), vec![2.0]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn zero_repulsion_rows_converge_at_once() {
        let cfg = ScanConfig {
            graph: dimer(),
            beta: 1.0,
            n_omega: 2,
            hopping: vec![0.5, 1.0, 2.0],
            repulsion: vec![0.0],
            solver: SolverConfig::default(),
            pick_bits: 128,
            rho0: None,
        };
        let recs = run_scan(&cfg).unwrap();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            assert_eq!(r.iterations, Some(1));
            assert!(r.converged && r.error.is_none());
        }
        let text = scan_csv(&recs).into_string();
        assert!(text.starts_with("hopping,U,iterations,converged,min_eig_G,min_eig_D,min_eig_S,rho0,admissible\n"));
        assert!(text.contains("\n0.5,0,1,true,"));
    }

    #[test]
    fn free_dimer_density_is_even() {
        let mut cfg = SweepConfig::new(dimer(), vec![0.0]);
        cfg.n_omega = 10;
        cfg.n_mesh = 41;
        cfg.solver.precision_bits = 128;
        cfg.continuation.bits = 128;
        let out = run_spectral_sweep(&cfg).unwrap();
        let pts = &out.curves[0].points;
        for j in 0..pts.len() {
            let (e, rho) = pts[j];
            let (e2, rho2) = pts[pts.len() - 1 - j];
            assert!((e + e2).abs() < 1e-12);
            assert!((rho - rho2).abs() < 1e-8, "{e}: {rho} vs {rho2}");
        }
    }
}
