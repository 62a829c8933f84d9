//! The bounded model checking loop: constraints narrow the live inputs, bads
//! are decided by trackers where possible and by the solver otherwise.

pub mod unroll;

pub use unroll::{unroll, UnrollMode};

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::arrays::{convert_arrays, ArrayError};
use crate::bitvec::{BinaryOp, BitVec};
use crate::btor2::{Model, Nid};
use crate::cflobvdd::Cflobvdd;
use crate::eval::{EvalError, InputLayout};
use crate::propagate::{Live, Mode, PropagateError, Propagator, Status, Verdict};
use crate::roabvdd::Roabvdd;
use crate::smt::{self, SolverConfig, SolverError};
use crate::tracker::{Cube, InputSet, Tracker};

#[derive(Debug, Error)]
pub enum BmcError {
    #[error("kmin {kmin} exceeds kmax {kmax}")]
    Bounds { kmin: u32, kmax: u32 },
    #[error("CFLOBVDD block size must be 1, 2, 4 or 8 bits (got {0})")]
    BlockBits(u32),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
}

impl From<EvalError> for BmcError {
    fn from(e: EvalError) -> Self {
        BmcError::Propagate(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Roabvdd,
    Cflobvdd { block_bits: u32 },
}

#[derive(Debug, Clone)]
pub struct Options {
    pub kmin: u32,
    pub kmax: u32,
    /// Widest input propagated by trackers: 0, 1, 2, 4 or 8.
    pub propagate: u32,
    pub backend: Backend,
    /// Arrays with at most this many index bits are converted; 0 keeps all.
    pub array_bits: u32,
    pub recursive_array: bool,
    pub check_termination: bool,
    pub unconstraining_bad: bool,
    pub branching: bool,
    pub print_pc: bool,
    pub print_transition: bool,
    pub solver: SolverConfig,
    pub timeout: Option<Duration>,
    /// Symbolic input bytes; `None` makes every input cell symbolic.
    pub bytes_to_read: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            kmin: 0,
            kmax: 100,
            propagate: 8,
            backend: Backend::Roabvdd,
            array_bits: 0,
            recursive_array: false,
            check_termination: false,
            unconstraining_bad: false,
            branching: false,
            print_pc: false,
            print_transition: false,
            solver: SolverConfig::from_template(smt::DEFAULT_SOLVER),
            timeout: Some(Duration::from_secs(900)),
            bytes_to_read: None,
        }
    }
}

/// Depth limit for branching exploration.
pub const MAX_BRANCH_DEPTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub k: u32,
    pub bad: String,
    pub inputs: InputSet,
    /// Transitions minus read stalls; unknown once the stall pattern depends
    /// on the input.
    pub instructions: Option<u32>,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={} bad={} inputs={}", self.k, self.bad, self.inputs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Ran to kmax, or until every input was accounted for.
    Completed,
    /// No state changed at this step.
    Terminated(u32),
    /// Every input violates a constraint from this step on.
    ConstraintsFail(u32),
    Timeout,
    SolverFailure(String),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub events: Vec<Event>,
    pub outcome: Outcome,
    /// Deepest step reached.
    pub steps: u32,
    pub solver_calls: u32,
    /// Largest number of unique tracker structures alive at once.
    pub peak_structures: usize,
    /// Size of the tracker's unique table when the run ended.
    pub table_size: usize,
    /// Branching hit the depth cap somewhere.
    pub partial: bool,
    pub paths: u32,
    pub tracker: String,
    pub input_bytes: usize,
    pub trace: Vec<String>,
    pub elapsed: Duration,
}

impl Report {
    /// Events as `(k, bad) -> explicit assignments`, for comparisons with
    /// exhaustive enumeration.
    pub fn event_map(&self) -> BTreeMap<(u32, String), Vec<Vec<u8>>> {
        self.events.iter().map(|e| ((e.k, e.bad.clone()), e.inputs.assignments())).collect()
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.outcome, Outcome::Timeout | Outcome::SolverFailure(_))
    }

    pub fn to_json(&self) -> Json {
        let events: Vec<Json> = self
            .events
            .iter()
            .map(|e| {
                let mut j = json!({
                    "k": e.k,
                    "bad": e.bad,
                    "inputs": e.inputs.to_string(),
                    "count": e.inputs.count().to_string(),
                    "instructions": e.instructions,
                });
                if e.inputs.count() <= 4096 {
                    let hex: Vec<String> = e.inputs.assignments().iter().map(|a| hex(a)).collect();
                    j["assignments"] = json!(hex);
                }
                j
            })
            .collect();
        let outcome = match &self.outcome {
            Outcome::Completed => json!({"status": "completed"}),
            Outcome::Terminated(k) => json!({"status": "terminated", "k": k}),
            Outcome::ConstraintsFail(k) => json!({"status": "constraints-fail", "k": k}),
            Outcome::Timeout => json!({"status": "timeout"}),
            Outcome::SolverFailure(m) => json!({"status": "solver-failure", "message": m}),
        };
        json!({
            "events": events,
            "outcome": outcome,
            "steps": self.steps,
            "solver_calls": self.solver_calls,
            "peak_structures": self.peak_structures,
            "table_size": self.table_size,
            "partial": self.partial,
            "paths": self.paths,
            "tracker": self.tracker,
            "input_bytes": self.input_bytes,
            "runtime_s": self.elapsed.as_secs_f64(),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Prepares the model (array conversion) and runs the check on a thread with
/// a stack deep enough for recursive propagation.
pub fn check(model: &Model, opts: &Options) -> Result<Report, BmcError> {
    if opts.kmin > opts.kmax {
        return Err(BmcError::Bounds { kmin: opts.kmin, kmax: opts.kmax });
    }
    let mode = Mode::for_width(opts.propagate)?;
    if let Backend::Cflobvdd { block_bits } = opts.backend {
        if ![1, 2, 4, 8].contains(&block_bits) {
            return Err(BmcError::BlockBits(block_bits));
        }
    }
    let converted;
    let model = if opts.array_bits > 0 {
        converted = convert_arrays(model, opts.array_bits, opts.recursive_array)?;
        &converted
    } else {
        model
    };
    let layout = InputLayout::new(model, opts.bytes_to_read)?;
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(512 << 20)
            .spawn_scoped(s, || match (mode, opts.backend) {
                (Mode::Domain, Backend::Cflobvdd { block_bits }) => {
                    let t = Cflobvdd::new(layout.len(), block_bits);
                    run(model, layout.clone(), t, mode, opts)
                }
                _ => run(model, layout.clone(), Roabvdd::new(), mode, opts),
            })
            .expect("spawn checker thread")
            .join()
            .expect("checker thread panicked")
    })
}

struct Path<T> {
    k: u32,
    cur: Vec<Status<T>>,
    live: Live<T>,
    depth: u32,
    stalls: Option<u32>,
}

enum Abort {
    Timeout,
    Solver(String),
}

impl From<SolverError> for Abort {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Timeout => Abort::Timeout,
            e => Abort::Solver(e.to_string()),
        }
    }
}

struct Run<'m, 'o, K: Tracker> {
    p: Propagator<'m, K>,
    opts: &'o Options,
    deadline: Option<Instant>,
    events: BTreeMap<(u32, String), Vec<Cube>>,
    instructions: BTreeMap<(u32, String), Option<u32>>,
    solver_calls: u32,
    peak: usize,
    partial: bool,
    paths: u32,
    steps: u32,
    trace: Vec<String>,
    pc_slot: Option<usize>,
    counter_slot: Option<usize>,
}

fn run<K: Tracker>(
    model: &Model,
    layout: InputLayout,
    tracker: K,
    mode: Mode,
    opts: &Options,
) -> Result<Report, BmcError> {
    let start = Instant::now();
    let input_bytes = layout.len();
    let slot = |name: &str| model.state_by_symbol(name).and_then(|s| model.states().iter().position(|&x| x == s));
    let mut r = Run {
        p: Propagator::new(model, layout, tracker, mode),
        opts,
        deadline: opts.timeout.map(|t| start + t),
        events: BTreeMap::new(),
        instructions: BTreeMap::new(),
        solver_calls: 0,
        peak: 0,
        partial: false,
        paths: 0,
        steps: 0,
        trace: Vec::new(),
        pc_slot: slot("pc"),
        counter_slot: slot("read-call-counter"),
    };
    let init = r.p.initial()?;
    let outcome = match r.explore(init) {
        Ok(o) => o,
        Err(Abort::Timeout) => Outcome::Timeout,
        Err(Abort::Solver(m)) => Outcome::SolverFailure(m),
    };
    let events = r
        .events
        .iter()
        .map(|((k, bad), cubes)| Event {
            k: *k,
            bad: bad.clone(),
            inputs: InputSet::from_cubes(input_bytes, cubes),
            instructions: r.instructions[&(*k, bad.clone())],
        })
        .collect();
    Ok(Report {
        events,
        outcome,
        steps: r.steps,
        solver_calls: r.solver_calls,
        peak_structures: r.peak,
        table_size: if mode == Mode::Domain { r.p.tracker.table_size() } else { 0 },
        partial: r.partial,
        paths: r.paths,
        tracker: if mode == Mode::Domain { r.p.tracker.name() } else { "none".into() },
        input_bytes,
        trace: r.trace,
        elapsed: start.elapsed(),
    })
}

impl<K: Tracker> Run<'_, '_, K> {
    fn check_deadline(&self) -> Result<(), Abort> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Abort::Timeout),
            _ => Ok(()),
        }
    }

    /// Depth-first over paths; without branching there is exactly one.
    fn explore(&mut self, init: Vec<Status<K::T>>) -> Result<Outcome, Abort> {
        let mut outcome = Outcome::Completed;
        let mut stack = vec![Path { k: 0, cur: init, live: Live::default(), depth: 0, stalls: Some(0) }];
        while let Some(path) = stack.pop() {
            self.paths += 1;
            let end = self.follow(path, &mut stack)?;
            if outcome == Outcome::Completed {
                outcome = end;
            }
        }
        Ok(outcome)
    }

    fn follow(&mut self, mut path: Path<K::T>, stack: &mut Vec<Path<K::T>>) -> Result<Outcome, Abort> {
        let model = self.p.model();
        loop {
            self.check_deadline()?;
            let k = path.k;
            self.steps = self.steps.max(k);
            self.p.begin_step();
            for c in model.constraints() {
                let s = self.p.status(&path.cur, c.cond);
                self.p.restrict(&mut path.live, &s);
                if path.live.dead {
                    return Ok(Outcome::ConstraintsFail(k));
                }
            }
            if k >= self.opts.kmin {
                self.check_bads(&mut path)?;
                if path.live.dead {
                    // Every live input has been reported.
                    return Ok(Outcome::Completed);
                }
            }
            self.peak = self.peak.max(self.p.structure_count(&path.cur, &path.live));
            if k == self.opts.kmax {
                return Ok(Outcome::Completed);
            }
            let mut next = self.p.next_statuses(&path.cur);
            if let Some(c) = self.counter_slot {
                path.stalls = match (&next[c], path.stalls) {
                    (Status::Const(v), Some(n)) => Some(n + v.as_bv().is_some_and(|b| !b.is_zero()) as u32),
                    _ => None,
                };
            }
            if self.opts.print_pc || self.opts.print_transition {
                self.trace_step(k, &path.cur, &next);
            }
            if self.opts.check_termination && next == path.cur {
                return Ok(Outcome::Terminated(k));
            }
            if self.opts.branching {
                if let Some(pc) = self.pc_slot {
                    if let Status::Tracked(t) = next[pc] {
                        if self.branch(&path, &mut next, pc, t, stack) {
                            return Ok(Outcome::Completed);
                        }
                    }
                }
            }
            path.cur = next;
            path.k += 1;
        }
    }

    /// Splits the path on the values of a tracked program counter, taken
    /// branches first. Returns false when the path continues unsplit.
    fn branch(
        &mut self,
        path: &Path<K::T>,
        next: &mut [Status<K::T>],
        pc: usize,
        t: K::T,
        stack: &mut Vec<Path<K::T>>,
    ) -> bool {
        let mut targets = self.p.tracker.leaves(t);
        if targets.len() < 2 {
            return false;
        }
        if path.depth >= MAX_BRANCH_DEPTH {
            self.partial = true;
            return false;
        }
        let fallthrough = match &path.cur[pc] {
            Status::Const(v) => v.as_bv().map(|b| BitVec::binary(BinaryOp::Add, b, BitVec::from_u64(b.width(), 4))),
            _ => None,
        }
        .and_then(Result::ok);
        targets.sort_by_key(|v| (Some(*v) == fallthrough, *v));
        let mut children = Vec::new();
        for v in targets {
            let c = self.p.tracker.constant(v);
            let hit = self.p.tracker.binary(BinaryOp::Eq, t, c);
            let mut live = path.live.clone();
            self.p.restrict(&mut live, &Status::Tracked(hit));
            if live.dead {
                continue;
            }
            let mut cur = next.to_vec();
            cur[pc] = Status::Const(crate::eval::Value::Bv(v));
            children.push(Path { k: path.k + 1, cur, live, depth: path.depth + 1, stalls: path.stalls });
        }
        // The stack pops last-in first.
        stack.extend(children.into_iter().rev());
        true
    }

    fn trace_step(&mut self, k: u32, cur: &[Status<K::T>], next: &[Status<K::T>]) {
        let model = self.p.model();
        if self.opts.print_pc {
            if let Some(pc) = self.pc_slot {
                let text = match &cur[pc] {
                    Status::Const(v) => format!("0x{:x}", v.as_bv().map(|b| b.low_u64()).unwrap_or(0)),
                    Status::Tracked(t) => format!("one of {} values", self.p.tracker.leaves(*t).len()),
                    Status::Residual(_) => "symbolic".into(),
                };
                self.trace.push(format!("k={k} pc={text}"));
            }
        }
        if self.opts.print_transition {
            let changed: Vec<String> = model
                .states()
                .iter()
                .enumerate()
                .filter(|(i, _)| cur[*i] != next[*i])
                .map(|(_, &s)| model.symbol(s).map(str::to_string).unwrap_or_else(|| s.to_string()))
                .collect();
            self.trace.push(format!("k={k} changed={}", changed.join(",")));
        }
    }

    fn check_bads(&mut self, path: &mut Path<K::T>) -> Result<(), Abort> {
        let model = self.p.model();
        let k = path.k;
        let mut statuses = Vec::new();
        let mut found: Vec<(usize, Vec<Cube>)> = Vec::new();
        let mut queries: Vec<(usize, Vec<Nid>)> = Vec::new();
        for (i, b) in model.bads().iter().enumerate() {
            let s = self.p.status(&path.cur, b.cond);
            match self.p.decide(&s, &path.live) {
                Verdict::Unsat => {}
                Verdict::Sat(cubes) => found.push((i, cubes)),
                Verdict::NeedsSolver(a) => queries.push((i, a)),
            }
            statuses.push(s);
        }
        if !queries.is_empty() && self.any_sat(&queries)? {
            for (i, a) in queries {
                self.check_deadline()?;
                self.solver_calls += 1;
                let t0 = Instant::now();
                let e = smt::enumerate(&self.opts.solver, self.p.terms.model(), &a, self.p.input_terms(), self.deadline)?;
                log::debug!("k={k} bad={i} enum {:.3}s cubes={}", t0.elapsed().as_secs_f64(), e.cubes.len());
                if !e.cubes.is_empty() {
                    found.push((i, e.cubes));
                }
            }
        }
        found.sort_by_key(|(i, _)| *i);
        for (i, cubes) in &found {
            let key = (k, model.bads()[*i].name.clone());
            self.instructions.insert(key.clone(), path.stalls.map(|s| k - s));
            self.events.entry(key).or_default().extend(cubes.iter().cloned());
        }
        if !self.opts.unconstraining_bad {
            for (i, _) in &found {
                self.p.assume_not(&mut path.live, &statuses[*i]);
            }
        }
        Ok(())
    }

    /// One query for the disjunction of several solver-bound bads, so that
    /// the common all-unsat case costs a single call.
    fn any_sat(&mut self, queries: &[(usize, Vec<Nid>)]) -> Result<bool, Abort> {
        if queries.len() == 1 {
            return Ok(true);
        }
        let conj: Vec<Nid> = queries.iter().map(|(_, a)| self.p.terms.all(a)).collect();
        let any = self.p.terms.any(&conj);
        self.solver_calls += 1;
        let t0 = Instant::now();
        let r = smt::is_sat(&self.opts.solver, self.p.terms.model(), &[any], self.deadline)?;
        log::debug!("disjunction query {:.3}s {r}", t0.elapsed().as_secs_f64());
        Ok(r)
    }
}
