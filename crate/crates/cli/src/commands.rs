//! Command implementations shared by the binary and the tests.

use std::time::{Duration, Instant};

use poisson_stab::catalog::{self, EntryOutcome, Status};
use poisson_stab::dynamics::{self, IntegratorOptions, ProbeOptions, ProbeReport, Samples, TrajectoryRecord};
use poisson_stab::stability::{self, AnalysisOptions, VerdictValue};
use poisson_stab::HamiltonianSystem;
use rayon::prelude::*;

use crate::error::{CliError, ErrorKind};
use crate::report::Report;
use crate::system::LoadedSystem;

pub const THREADS_ENV: &str = "POISSON_STAB_THREADS";

/// Worker count: `POISSON_STAB_THREADS` when set to a positive integer,
/// otherwise the available hardware parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::new(ErrorKind::Numerical, format!("worker pool: {e}")))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    /// Also run the single-piece energy-Casimir variant.
    pub single_piece: bool,
}

pub fn analyze(sys: &LoadedSystem, opts: AnalyzeOptions) -> Result<Report, CliError> {
    let x_e = &sys.equilibrium;
    let aopts = AnalysisOptions {
        t2_override: sys.t2_override.clone(),
        family: None,
        single_piece: opts.single_piece,
    };
    let analysis = stability::analyze(&sys.system, x_e, &aopts);
    if let Some(group) = sys.euclidean {
        let verdict = stability::euclidean_criteria(group, &sys.system.h, x_e)?;
        let mut report = match &analysis {
            Ok(a) => {
                let mut r = Report::from_analysis(&sys.name, x_e, a);
                r.notes.push(format!("Poisson pipeline verdict: {:?} ({})", a.verdict.value, a.verdict.criterion));
                r.verdict = verdict.clone();
                r
            }
            Err(e) => {
                let mut r = Report::new(&sys.name, x_e, verdict.clone());
                r.notes.push(format!("Poisson pipeline skipped: {e}"));
                r
            }
        };
        report.steps.push(verdict);
        return Ok(report);
    }
    let a = analysis?;
    let mut report = Report::from_analysis(&sys.name, x_e, &a);
    let lie_poisson = sys.system.structure.algebra().is_some();
    if let (Some(alg), false) = (&sys.algebra, lie_poisson) {
        match stability::reduced_energy_momentum(alg, &sys.system.h, x_e) {
            Ok(v) => report.steps.push(v),
            Err(e) => report.notes.push(format!("reduced energy-momentum skipped: {e}")),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub x0: Option<Vec<f64>>,
    pub t_final: f64,
    pub tol: f64,
    pub samples: usize,
}

pub fn simulate(sys: &LoadedSystem, opts: &SimulateOptions) -> Result<TrajectoryRecord, CliError> {
    let x0 = opts.x0.clone().unwrap_or_else(|| sys.equilibrium.clone());
    if x0.len() != sys.system.dim() {
        return Err(CliError::validation(format!("x0 has {} entries, expected {}", x0.len(), sys.system.dim())));
    }
    let mut iopts = IntegratorOptions::new(opts.tol);
    iopts.samples = Samples::Uniform(opts.samples.max(2));
    Ok(dynamics::integrate_with(&sys.system, &x0, opts.t_final, &iopts)?)
}

/// Human-readable drift summary.
pub fn drift_summary(rec: &TrajectoryRecord) -> String {
    let mut s = format!(
        "samples {}  accepted steps {}  rejected steps {}\nmax relative energy drift {:.3e}\n",
        rec.times.len(),
        rec.stats.accepted,
        rec.stats.rejected,
        rec.max_energy_drift
    );
    for (i, d) in rec.max_casimir_drift.iter().enumerate() {
        s.push_str(&format!("max relative drift of C{} {:.3e}\n", i + 1, d));
    }
    s
}

/// Runs the probe trials on `threads` workers. The report does not depend
/// on the worker count.
pub fn probe(sys: &HamiltonianSystem, x_e: &[f64], opts: &ProbeOptions, threads: usize) -> Result<ProbeReport, CliError> {
    let plan = dynamics::probe_plan(sys.dim(), opts)?;
    let results = pool(threads)?.install(|| {
        plan.par_iter()
            .map(|spec| dynamics::run_trial(sys, x_e, opts, spec))
            .collect::<Vec<_>>()
    });
    Ok(dynamics::assemble_probe(x_e, opts, results))
}

/// Runs catalogue expectations for `names` (all entries when empty) within
/// `budget`, on `threads` workers.
pub fn catalog_check(names: &[String], budget: Option<Duration>, seed: u64, threads: usize) -> Result<Vec<EntryOutcome>, CliError> {
    let entries = if names.is_empty() {
        catalog::entries()
    } else {
        names.iter().map(|n| catalog::get_entry(n)).collect::<Result<Vec<_>, _>>()?
    };
    let start = Instant::now();
    let out_of_time = move || budget.is_some_and(|b| start.elapsed() >= b);
    let outcomes = pool(threads)?.install(|| {
        entries
            .par_iter()
            .map(|e| catalog::run_entry(e, seed, &mut { out_of_time }))
            .collect::<Vec<_>>()
    });
    Ok(outcomes)
}

pub fn any_failed(outcomes: &[EntryOutcome]) -> bool {
    outcomes.iter().any(|o| o.status == Status::Fail)
}

pub fn status_label(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skipped => "SKIPPED",
        Status::Unrunnable => "UNRUNNABLE",
    }
}

pub fn verdict_label(v: VerdictValue) -> &'static str {
    match v {
        VerdictValue::Stable => "stable",
        VerdictValue::LeafwiseStable => "leafwise_stable",
        VerdictValue::InstabilityEvidence => "instability_evidence",
        VerdictValue::Inconclusive => "inconclusive",
    }
}
