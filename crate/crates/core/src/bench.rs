//! The benchmark matrix: every corpus sample under each checking mode and
//! array-conversion bound, one TSV row per run.

use std::fmt::Write as _;
use std::time::Duration;

use crate::bmc::{check, Backend, Options, Outcome};
use crate::riscu::corpus::Sample;
use crate::riscu::generate_model;
use crate::smt::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    /// Solver only.
    P0,
    /// Constant propagation plus solver.
    P1,
    Roabvdd,
    Cflobvdd,
}

impl BenchMode {
    pub const ALL: [BenchMode; 4] = [BenchMode::P0, BenchMode::P1, BenchMode::Roabvdd, BenchMode::Cflobvdd];

    pub fn name(self) -> &'static str {
        match self {
            BenchMode::P0 => "p0",
            BenchMode::P1 => "p1",
            BenchMode::Roabvdd => "roabvdd-p8",
            BenchMode::Cflobvdd => "cflobvdd-p8",
        }
    }

    pub fn options(self, base: &Options) -> Options {
        let (propagate, backend) = match self {
            BenchMode::P0 => (0, Backend::Roabvdd),
            BenchMode::P1 => (1, Backend::Roabvdd),
            BenchMode::Roabvdd => (8, Backend::Roabvdd),
            BenchMode::Cflobvdd => (8, Backend::Cflobvdd { block_bits: 8 }),
        };
        Options { propagate, backend, ..base.clone() }
    }
}

pub const ARRAY_BOUNDS: [u32; 3] = [0, 4, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub sample: String,
    pub mode: &'static str,
    pub array: u32,
    /// `None` when the run timed out or failed.
    pub runtime_s: Option<f64>,
    pub events: usize,
    pub solver_calls: u32,
    pub peak_nodes: usize,
}

pub const TSV_HEADER: &str = "sample\tmode\tarray\truntime_s\tevents\tsolver_calls\tpeak_nodes";

impl BenchRow {
    pub fn tsv(&self) -> String {
        let rt = self.runtime_s.map(|s| format!("{s:.3}")).unwrap_or_else(|| "timeout".into());
        format!(
            "{}\t{}\t{}\t{rt}\t{}\t{}\t{}",
            self.sample, self.mode, self.array, self.events, self.solver_calls, self.peak_nodes
        )
    }
}

pub fn to_tsv(rows: &[BenchRow]) -> String {
    let mut out = format!("{TSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.tsv());
    }
    out
}

/// Runs one sample in one configuration.
pub fn run_one(sample: &Sample, mode: BenchMode, array: u32, solver: &SolverConfig, timeout: Duration) -> BenchRow {
    let model = generate_model(&sample.program, &sample.config).expect("corpus programs fit");
    let base = Options {
        kmax: sample.kmax,
        array_bits: array,
        solver: solver.clone(),
        timeout: Some(timeout),
        bytes_to_read: Some(sample.config.bytes_to_read as usize),
        ..Options::default()
    };
    let row = |runtime_s, events, solver_calls, peak_nodes| BenchRow {
        sample: sample.name.clone(),
        mode: mode.name(),
        array,
        runtime_s,
        events,
        solver_calls,
        peak_nodes,
    };
    match check(&model, &mode.options(&base)) {
        Ok(r) => {
            let ok = !matches!(r.outcome, Outcome::Timeout | Outcome::SolverFailure(_));
            if !ok {
                log::warn!("{} {} array {array}: {:?}", sample.name, mode.name(), r.outcome);
            }
            row(ok.then(|| r.elapsed.as_secs_f64()), r.events.len(), r.solver_calls, r.peak_structures)
        }
        Err(e) => {
            log::warn!("{} {} array {array}: {e}", sample.name, mode.name());
            row(None, 0, 0, 0)
        }
    }
}

/// The full matrix, calling `each` after every run (for progress output).
pub fn run_matrix(
    samples: &[Sample],
    modes: &[BenchMode],
    arrays: &[u32],
    solver: &SolverConfig,
    timeout: Duration,
    mut each: impl FnMut(&BenchRow),
) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for s in samples {
        for &mode in modes {
            for &a in arrays {
                let r = run_one(s, mode, a, solver, timeout);
                each(&r);
                rows.push(r);
            }
        }
    }
    rows
}
