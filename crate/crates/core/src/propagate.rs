//! Domain propagation: every node of the model is classified per transition
//! as a constant, a tracker over the input bytes, or a residual term that
//! only an SMT solver can decide.

use std::collections::HashMap;
use std::sync::Arc;

use ethnum::U256;
use thiserror::Error;

use crate::bitvec::{BinaryOp, BitVec, UnaryOp};
use crate::btor2::{Builder, Model, Nid, Op, Sort};
use crate::eval::{ArrayValue, EvalError, InputLayout, Value};
use crate::tracker::{Cube, Tracker};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropagateError {
    #[error("propagation width must be one of 0, 1, 2, 4, 8 (got {0})")]
    Width(u32),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// What propagation is allowed to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No folding at all: every node becomes a term.
    Off,
    /// Constant folding; input bytes stay terms.
    Constants,
    /// Input bytes are tracked by decision diagrams.
    Domain,
}

impl Mode {
    /// Input bytes are 8 bits wide, so only `p = 8` tracks them.
    pub fn for_width(p: u32) -> Result<Mode, PropagateError> {
        match p {
            0 => Ok(Mode::Off),
            1 | 2 | 4 => Ok(Mode::Constants),
            8 => Ok(Mode::Domain),
            _ => Err(PropagateError::Width(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status<T> {
    Const(Value),
    Tracked(T),
    /// A term in the propagator's residual builder.
    Residual(Nid),
}

impl<T: Copy> Status<T> {
    fn bv(&self) -> Option<BitVec> {
        match self {
            Status::Const(v) => v.as_bv(),
            _ => None,
        }
    }

    pub fn is_residual(&self) -> bool {
        matches!(self, Status::Residual(_))
    }
}

/// Input assignments still consistent with every constraint seen so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Live<T> {
    /// Conjunction of tracked constraints; `None` means no restriction.
    pub tracked: Option<T>,
    /// Constraint terms that could not be tracked.
    pub residual: Vec<Nid>,
    pub dead: bool,
}

impl<T> Default for Live<T> {
    fn default() -> Self {
        Live { tracked: None, residual: Vec::new(), dead: false }
    }
}

/// Outcome of deciding a bad property against the live inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Unsat,
    /// Satisfied exactly by the union of these cubes.
    Sat(Vec<Cube>),
    /// Satisfied by the assignments satisfying all of these 1-bit terms.
    NeedsSolver(Vec<Nid>),
}

/// Outcome of adding a constraint to the live inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintVerdict {
    Holds,
    FailsForAllInputs,
    /// Live inputs narrowed to these cubes.
    Restricts(Vec<Cube>),
    NeedsSolver(Nid),
}

pub struct Propagator<'m, K: Tracker> {
    model: &'m Model,
    pub tracker: K,
    pub mode: Mode,
    /// Residual terms, hash-consed.
    pub terms: Builder,
    layout: InputLayout,
    input_terms: Vec<Nid>,
    slot_of: Vec<u32>,
    lowered: HashMap<K::T, Nid>,
    const_arrays: HashMap<usize, (Arc<ArrayValue>, Nid)>,
    base_arrays: HashMap<(u32, BitVec), Nid>,
    memo: Vec<Option<Status<K::T>>>,
    stamp: Vec<u32>,
    generation: u32,
}

impl<'m, K: Tracker> Propagator<'m, K> {
    pub fn new(model: &'m Model, layout: InputLayout, tracker: K, mode: Mode) -> Self {
        let mut terms = Builder::new();
        let input_terms =
            (0..layout.len()).map(|i| terms.state(Sort::Bitvec(8), Some(&format!("input{i}")))).collect();
        let mut slot_of = vec![u32::MAX; model.len()];
        for (slot, &s) in model.states().iter().enumerate() {
            slot_of[model.position(s).expect("state exists")] = slot as u32;
        }
        Propagator {
            model,
            tracker,
            mode,
            terms,
            layout,
            input_terms,
            slot_of,
            lowered: HashMap::new(),
            const_arrays: HashMap::new(),
            base_arrays: HashMap::new(),
            memo: vec![None; model.len()],
            stamp: vec![0; model.len()],
            generation: 1,
        }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn layout(&self) -> &InputLayout {
        &self.layout
    }

    /// Residual term of each symbolic input byte.
    pub fn input_terms(&self) -> &[Nid] {
        &self.input_terms
    }

    /// Forgets all node statuses; call whenever the state statuses change.
    pub fn begin_step(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    fn constant(&mut self, v: Value) -> Status<K::T> {
        if self.mode == Mode::Off {
            let t = self.lower(&Status::Const(v));
            Status::Residual(t)
        } else {
            Status::Const(v)
        }
    }

    fn wrap(&self, t: K::T) -> Status<K::T> {
        match self.tracker.as_constant(t) {
            Some(v) => Status::Const(Value::Bv(v)),
            None => Status::Tracked(t),
        }
    }

    fn lift(&mut self, s: &Status<K::T>) -> Option<K::T> {
        match s {
            Status::Const(Value::Bv(v)) => Some(self.tracker.constant(*v)),
            Status::Tracked(t) => Some(*t),
            _ => None,
        }
    }

    fn input_status(&mut self, pos: usize) -> Status<K::T> {
        match self.mode {
            Mode::Domain => Status::Tracked(self.tracker.input_byte(pos)),
            _ => Status::Residual(self.input_terms[pos]),
        }
    }

    /// Statuses of all states at step 0.
    pub fn initial(&mut self) -> Result<Vec<Status<K::T>>, PropagateError> {
        let model = self.model;
        let states = model.states();
        let mut values: Vec<Option<Status<K::T>>> = vec![None; states.len()];
        let slot = |s: Nid| states.iter().position(|&x| x == s).expect("input is a state");
        let mut array_cells: std::collections::BTreeMap<usize, Vec<(u64, usize)>> = Default::default();
        for (pos, cell) in self.layout.cells().to_vec().into_iter().enumerate() {
            let i = slot(cell.state);
            match cell.index {
                None if pos < self.layout.len() => values[i] = Some(self.input_status(pos)),
                None => values[i] = Some(self.constant(Value::Bv(BitVec::zero(8)))),
                Some(k) => array_cells.entry(i).or_default().push((k, pos)),
            }
        }
        for (i, cells) in array_cells {
            let Some(Sort::Array { index, .. }) = model.sort_of(states[i]) else { unreachable!() };
            let zero = Arc::new(ArrayValue::new(index, BitVec::zero(8)));
            let symbolic: Vec<(u64, usize)> = cells.into_iter().filter(|&(_, p)| p < self.layout.len()).collect();
            if symbolic.is_empty() {
                values[i] = Some(self.constant(Value::Array(zero)));
                continue;
            }
            let mut t = self.lower(&Status::Const(Value::Array(zero)));
            for (k, pos) in symbolic {
                let idx = self.terms.const_u64(index, k);
                t = self.terms.write(t, idx, self.input_terms[pos]);
            }
            values[i] = Some(Status::Residual(t));
        }
        let mut visiting = vec![false; states.len()];
        for i in 0..states.len() {
            self.init_slot(i, &mut values, &mut visiting)?;
        }
        self.begin_step();
        Ok(values.into_iter().map(|v| v.expect("initialized")).collect())
    }

    fn init_slot(
        &mut self,
        i: usize,
        values: &mut Vec<Option<Status<K::T>>>,
        visiting: &mut Vec<bool>,
    ) -> Result<(), PropagateError> {
        if values[i].is_some() {
            return Ok(());
        }
        let model = self.model;
        let s = model.states()[i];
        let init = model.init_of(s).ok_or_else(|| {
            EvalError::Unsupported(format!("uninitialized state {s} is not covered by the input layout"))
        })?;
        if std::mem::replace(&mut visiting[i], true) {
            return Err(EvalError::CyclicInit(s).into());
        }
        for dep in self.state_dependencies(init) {
            self.init_slot(dep, values, visiting)?;
        }
        let partial: Vec<Status<K::T>> =
            values.iter().map(|v| v.clone().unwrap_or(Status::Const(Value::Bv(BitVec::zero(1))))).collect();
        self.begin_step();
        let v = self.status(&partial, init);
        let v = match (model.sort_of(s), v) {
            (Some(Sort::Array { index, .. }), Status::Const(Value::Bv(b))) => {
                Status::Const(Value::Array(Arc::new(ArrayValue::new(index, b))))
            }
            (Some(sort @ Sort::Array { .. }), Status::Residual(t)) if self.terms.sort_of(t) != sort => {
                let st = self.terms.state(sort, None);
                self.terms.init(st, t);
                Status::Residual(st)
            }
            (Some(Sort::Array { .. }), Status::Tracked(_)) => {
                return Err(EvalError::Unsupported(format!("array {s} initialized with an input-dependent value")).into())
            }
            (_, v) => v,
        };
        values[i] = Some(v);
        Ok(())
    }

    fn state_dependencies(&self, root: Nid) -> Vec<usize> {
        let model = self.model;
        let mut seen = vec![false; model.len()];
        let mut todo = vec![model.position(root).expect("node exists")];
        let mut deps = Vec::new();
        while let Some(p) = todo.pop() {
            if std::mem::replace(&mut seen[p], true) {
                continue;
            }
            if self.slot_of[p] != u32::MAX {
                deps.push(self.slot_of[p] as usize);
            }
            if model.nodes()[p].op != Op::SortArray {
                todo.extend(model.arg_positions(p).into_iter().filter(|&a| a != u32::MAX).map(|a| a as usize));
            }
        }
        deps
    }

    /// Status of node `id` given the state statuses `cur`; memoized until
    /// the next [`Self::begin_step`].
    pub fn status(&mut self, cur: &[Status<K::T>], id: Nid) -> Status<K::T> {
        let p = self.model.position(id).expect("node exists");
        self.status_at(cur, p)
    }

    fn status_at(&mut self, cur: &[Status<K::T>], p: usize) -> Status<K::T> {
        if self.stamp[p] == self.generation {
            if let Some(s) = &self.memo[p] {
                return s.clone();
            }
        }
        let model = self.model;
        let node = &model.nodes()[p];
        let arg = |i: usize| model.arg_positions(p)[i] as usize;
        let s = match &node.op {
            Op::Const(_, v) => self.constant(Value::Bv(*v)),
            Op::State => cur[self.slot_of[p] as usize].clone(),
            Op::Unary(op) => {
                let a = self.status_at(cur, arg(0));
                self.unary(*op, a)
            }
            Op::Binary(op) => {
                let a = self.status_at(cur, arg(0));
                match (op, a.bv()) {
                    (BinaryOp::And, Some(v)) if v.is_zero() => a,
                    (BinaryOp::Or, Some(v)) if v == BitVec::ones(v.width()) => a,
                    _ => {
                        let b = self.status_at(cur, arg(1));
                        self.binary(*op, a, b)
                    }
                }
            }
            Op::Ite => {
                let c = self.status_at(cur, arg(0));
                match c.bv() {
                    Some(v) => self.status_at(cur, if v.is_true() { arg(1) } else { arg(2) }),
                    None => {
                        let t = self.status_at(cur, arg(1));
                        let e = self.status_at(cur, arg(2));
                        self.ite(c, t, e)
                    }
                }
            }
            Op::Read => {
                let a = self.status_at(cur, arg(0));
                let i = self.status_at(cur, arg(1));
                match (&a, i.bv()) {
                    (Status::Const(Value::Array(arr)), Some(iv)) => Status::Const(Value::Bv(arr.get(iv.value()))),
                    _ => {
                        let (ta, ti) = (self.lower(&a), self.lower(&i));
                        Status::Residual(self.terms.read(ta, ti))
                    }
                }
            }
            Op::Write => {
                let a = self.status_at(cur, arg(0));
                let i = self.status_at(cur, arg(1));
                let v = self.status_at(cur, arg(2));
                match (&a, i.bv(), v.bv()) {
                    (Status::Const(Value::Array(arr)), Some(iv), Some(vv)) => {
                        let mut out = (**arr).clone();
                        out.set(iv.value(), vv);
                        Status::Const(Value::Array(Arc::new(out)))
                    }
                    _ => {
                        let (ta, ti, tv) = (self.lower(&a), self.lower(&i), self.lower(&v));
                        Status::Residual(self.terms.write(ta, ti, tv))
                    }
                }
            }
            other => panic!("node {} ({}) has no value", node.id, other.keyword()),
        };
        self.memo[p] = Some(s.clone());
        self.stamp[p] = self.generation;
        s
    }

    fn unary(&mut self, op: UnaryOp, a: Status<K::T>) -> Status<K::T> {
        match a {
            Status::Const(Value::Bv(v)) => {
                Status::Const(Value::Bv(BitVec::unary(op, v).expect("validated model")))
            }
            Status::Tracked(t) => {
                let r = self.tracker.unary(op, t);
                self.wrap(r)
            }
            other => {
                let t = self.lower(&other);
                Status::Residual(self.terms.unary(op, t))
            }
        }
    }

    fn binary(&mut self, op: BinaryOp, a: Status<K::T>, b: Status<K::T>) -> Status<K::T> {
        if let (Some(x), Some(y)) = (a.bv(), b.bv()) {
            return Status::Const(Value::Bv(BitVec::binary(op, x, y).expect("validated model")));
        }
        if let Some(v) = b.bv() {
            if (op == BinaryOp::And && v.is_zero()) || (op == BinaryOp::Or && v == BitVec::ones(v.width())) {
                return b;
            }
        }
        if let (Some(x), Some(y)) = (self.lift(&a), self.lift(&b)) {
            let r = self.tracker.binary(op, x, y);
            return self.wrap(r);
        }
        let (x, y) = (self.lower(&a), self.lower(&b));
        Status::Residual(self.terms.binary(op, x, y))
    }

    fn ite(&mut self, c: Status<K::T>, t: Status<K::T>, e: Status<K::T>) -> Status<K::T> {
        if t == e && self.mode != Mode::Off {
            return t;
        }
        if let Status::Tracked(ct) = c {
            if let (Some(x), Some(y)) = (self.lift(&t), self.lift(&e)) {
                let r = self.tracker.ite(ct, x, y);
                return self.wrap(r);
            }
        }
        let (tc, tt, te) = (self.lower(&c), self.lower(&t), self.lower(&e));
        Status::Residual(self.terms.ite(tc, tt, te))
    }

    /// The residual term equivalent to a status.
    pub fn lower(&mut self, s: &Status<K::T>) -> Nid {
        match s {
            Status::Residual(n) => *n,
            Status::Const(Value::Bv(v)) => self.terms.constant(*v),
            Status::Tracked(t) => {
                if let Some(&n) = self.lowered.get(t) {
                    return n;
                }
                let n = self.tracker.to_term(*t, &mut self.terms, &self.input_terms);
                self.lowered.insert(*t, n);
                n
            }
            Status::Const(Value::Array(a)) => {
                let key = Arc::as_ptr(a) as usize;
                if let Some((_, n)) = self.const_arrays.get(&key) {
                    return *n;
                }
                let (iw, def) = (a.index_width(), a.default_element());
                let base = match self.base_arrays.get(&(iw, def)) {
                    Some(&n) => n,
                    None => {
                        let st = self.terms.state(Sort::Array { index: iw, element: def.width() }, None);
                        let d = self.terms.constant(def);
                        self.terms.init(st, d);
                        self.base_arrays.insert((iw, def), st);
                        st
                    }
                };
                let mut t = base;
                for (i, v) in a.entries() {
                    let it = self.terms.constant(BitVec::new(iw, i).expect("index fits"));
                    let vt = self.terms.constant(v);
                    t = self.terms.write(t, it, vt);
                }
                self.const_arrays.insert(key, (a.clone(), t));
                t
            }
        }
    }

    /// Statuses of all states after one transition from `cur`.
    pub fn next_statuses(&mut self, cur: &[Status<K::T>]) -> Vec<Status<K::T>> {
        let model = self.model;
        model
            .states()
            .iter()
            .enumerate()
            .map(|(i, &s)| match model.next_of(s) {
                Some(n) => self.status(cur, n),
                None => cur[i].clone(),
            })
            .collect()
    }

    fn live_and(&mut self, live: &Live<K::T>, t: K::T) -> K::T {
        match live.tracked {
            Some(l) => self.tracker.binary(BinaryOp::And, l, t),
            None => t,
        }
    }

    /// Narrows `live` by a constraint status.
    pub fn restrict(&mut self, live: &mut Live<K::T>, c: &Status<K::T>) -> ConstraintVerdict {
        match c {
            Status::Const(v) => {
                if v.as_bv().is_some_and(|b| b.is_true()) {
                    ConstraintVerdict::Holds
                } else {
                    live.dead = true;
                    ConstraintVerdict::FailsForAllInputs
                }
            }
            Status::Tracked(t) => {
                let r = self.live_and(live, *t);
                live.tracked = Some(r);
                if self.tracker.as_constant(r).is_some_and(|v| v.is_zero()) {
                    live.dead = true;
                    return ConstraintVerdict::FailsForAllInputs;
                }
                ConstraintVerdict::Restricts(self.tracker.satisfying_cubes(r))
            }
            Status::Residual(n) => {
                if !live.residual.contains(n) {
                    live.residual.push(*n);
                }
                ConstraintVerdict::NeedsSolver(*n)
            }
        }
    }

    /// Decides a bad condition for the live inputs.
    pub fn decide(&mut self, cond: &Status<K::T>, live: &Live<K::T>) -> Verdict {
        if live.dead {
            return Verdict::Unsat;
        }
        let tracked = match cond {
            Status::Const(v) if !v.as_bv().is_some_and(|b| b.is_true()) => return Verdict::Unsat,
            Status::Const(_) => live.tracked,
            Status::Tracked(t) => Some(self.live_and(live, *t)),
            Status::Residual(_) => live.tracked,
        };
        if !cond.is_residual() && live.residual.is_empty() {
            return match tracked {
                None => Verdict::Sat(vec![Vec::new()]),
                Some(t) => {
                    let cubes = self.tracker.satisfying_cubes(t);
                    if cubes.is_empty() {
                        Verdict::Unsat
                    } else {
                        Verdict::Sat(cubes)
                    }
                }
            };
        }
        if let Some(t) = tracked {
            if self.tracker.as_constant(t).is_some_and(|v| v.is_zero()) {
                return Verdict::Unsat;
            }
        }
        let mut assertions = live.residual.clone();
        if let Status::Residual(n) = cond {
            assertions.push(*n);
        }
        if let Some(t) = tracked {
            let n = self.lower(&Status::Tracked(t));
            assertions.push(n);
        }
        Verdict::NeedsSolver(assertions)
    }

    /// Conjunction of a status with the live inputs, for restricting the
    /// live set once a bad has been reported.
    pub fn assume_not(&mut self, live: &mut Live<K::T>, cond: &Status<K::T>) {
        let neg = self.unary(UnaryOp::Not, cond.clone());
        self.restrict(live, &neg);
    }

    /// Unique tracker structures reachable from the tracked statuses.
    pub fn structure_count(&self, statuses: &[Status<K::T>], live: &Live<K::T>) -> usize {
        let mut roots: Vec<K::T> =
            statuses.iter().filter_map(|s| if let Status::Tracked(t) = s { Some(*t) } else { None }).collect();
        roots.extend(live.tracked);
        self.tracker.structure_count(&roots)
    }

    /// Whether a state's status pins it to a single known value.
    pub fn value_of(&self, s: &Status<K::T>) -> Option<U256> {
        s.bv().map(|b| b.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::parse;
    use crate::roabvdd::Roabvdd;
    use crate::tracker::ByteSet;

    const EQ48: &str = "\
1 sort bitvec 1
2 sort bitvec 8
3 state 2 x
4 constd 2 48
5 eq 1 3 4
6 bad 5
7 sort array 2 2
8 state 7 mem
9 zero 2
10 init 7 8 9
11 read 2 8 3
12 eq 1 11 9
13 bad 12
";

    fn setup(m: &Model, mode: Mode) -> Propagator<'_, Roabvdd> {
        let layout = InputLayout::new(m, None).unwrap();
        Propagator::new(m, layout, Roabvdd::new(), mode)
    }

    #[test]
    fn tracked_equality() {
        let m = parse(EQ48).unwrap();
        let mut p = setup(&m, Mode::Domain);
        let cur = p.initial().unwrap();
        let c = p.status(&cur, 5);
        assert!(matches!(c, Status::Tracked(_)));
        assert_eq!(p.decide(&c, &Live::default()), Verdict::Sat(vec![vec![(0, ByteSet::singleton(48))]]));
        // Reading an unconverted array at a tracked index falls back to a term.
        let r = p.status(&cur, 11);
        assert!(r.is_residual());
        let b = p.status(&cur, 12);
        assert!(matches!(p.decide(&b, &Live::default()), Verdict::NeedsSolver(_)));
    }

    #[test]
    fn constant_only_and_off_modes() {
        let m = parse(EQ48).unwrap();
        let mut p = setup(&m, Mode::Constants);
        let cur = p.initial().unwrap();
        assert!(p.status(&cur, 5).is_residual());
        assert_eq!(p.status(&cur, 9), Status::Const(Value::Bv(BitVec::zero(8))));
        let mut off = setup(&m, Mode::Off);
        let cur = off.initial().unwrap();
        assert!(off.status(&cur, 9).is_residual());
        assert!(cur.iter().all(|s| s.is_residual()));
    }

    #[test]
    fn constraints_restrict_live_inputs() {
        let m = parse(EQ48).unwrap();
        let mut p = setup(&m, Mode::Domain);
        let cur = p.initial().unwrap();
        let c = p.status(&cur, 5);
        let mut live = Live::default();
        let not_c = p.unary(UnaryOp::Not, c.clone());
        match p.restrict(&mut live, &not_c) {
            ConstraintVerdict::Restricts(cubes) => {
                let n: u32 = cubes.iter().map(|c| c[0].1.len()).sum();
                assert_eq!(n, 255);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(p.decide(&c, &live), Verdict::Unsat);
        assert_eq!(p.restrict(&mut live, &c), ConstraintVerdict::FailsForAllInputs);
        assert!(live.dead);
        let one = Status::Const(Value::Bv(BitVec::bool(true)));
        assert_eq!(p.restrict(&mut Live::default(), &one), ConstraintVerdict::Holds);
    }
}
