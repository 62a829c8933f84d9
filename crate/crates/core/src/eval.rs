//! Concrete BTOR2 emulator: evaluation, stepping and exhaustive enumeration
//! of small input spaces. Every symbolic engine is checked against it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use ethnum::U256;
use rayon::prelude::*;
use thiserror::Error;

use crate::bitvec::{BinaryOp, BitVec, BitVecError};
use crate::btor2::{Model, Nid, Op, Sort};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("input assignment has {got} bytes, expected {expected}")]
    InputLength { got: usize, expected: usize },
    #[error("enumeration over {0} input bytes refused (at most 2)")]
    TooManyInputs(usize),
    #[error("{bytes} bytes to read exceed the {cells} input cells of the model")]
    BytesToRead { bytes: usize, cells: usize },
    #[error("state {0} is initialized in terms of itself")]
    CyclicInit(Nid),
    #[error(transparent)]
    BitVec(#[from] BitVecError),
}

/// Array value: a default element plus explicitly stored entries. Entries
/// equal to the default are never stored, so equality is semantic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrayValue {
    index_width: u32,
    default: BitVec,
    entries: BTreeMap<U256, BitVec>,
}

impl ArrayValue {
    pub fn new(index_width: u32, default: BitVec) -> Self {
        ArrayValue { index_width, default, entries: BTreeMap::new() }
    }

    pub fn index_width(&self) -> u32 {
        self.index_width
    }

    pub fn element_width(&self) -> u32 {
        self.default.width()
    }

    pub fn default_element(&self) -> BitVec {
        self.default
    }

    pub fn get(&self, index: U256) -> BitVec {
        self.entries.get(&index).copied().unwrap_or(self.default)
    }

    pub fn set(&mut self, index: U256, value: BitVec) {
        if value == self.default {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, value);
        }
    }

    /// Explicitly stored (non-default) entries in index order.
    pub fn entries(&self) -> impl Iterator<Item = (U256, BitVec)> + '_ {
        self.entries.iter().map(|(i, v)| (*i, *v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bv(BitVec),
    Array(Arc<ArrayValue>),
}

impl Value {
    pub fn as_bv(&self) -> Option<BitVec> {
        match self {
            Value::Bv(b) => Some(*b),
            Value::Array(_) => None,
        }
    }

    fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Array(a), Value::Array(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => self == other,
        }
    }
}

/// One symbolic input byte: a whole 8-bit uninitialized state, or one element
/// of an uninitialized array of bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputCell {
    pub state: Nid,
    pub index: Option<u64>,
}

/// Maps input positions to the byte cells of the model's uninitialized states.
/// Only the first `symbolic_len` cells are inputs; the rest are fixed to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLayout {
    cells: Vec<InputCell>,
    symbolic: usize,
}

const MAX_INPUT_INDEX_BITS: u32 = 16;

impl InputLayout {
    pub fn new(model: &Model, bytes_to_read: Option<usize>) -> Result<Self, EvalError> {
        if !model.input_nodes().is_empty() {
            return Err(EvalError::Unsupported("BTOR2 input nodes are not supported".into()));
        }
        let mut cells = Vec::new();
        for s in model.inputs() {
            match model.sort_of(s) {
                Some(Sort::Bitvec(8)) => cells.push(InputCell { state: s, index: None }),
                Some(Sort::Array { index, element: 8 }) if index <= MAX_INPUT_INDEX_BITS => {
                    cells.extend((0..1u64 << index).map(|k| InputCell { state: s, index: Some(k) }))
                }
                sort => {
                    return Err(EvalError::Unsupported(format!(
                        "uninitialized state {s} of sort {sort:?} is not a byte input"
                    )))
                }
            }
        }
        let symbolic = bytes_to_read.unwrap_or(cells.len());
        if symbolic > cells.len() {
            return Err(EvalError::BytesToRead { bytes: symbolic, cells: cells.len() });
        }
        Ok(InputLayout { cells, symbolic })
    }

    pub fn cells(&self) -> &[InputCell] {
        &self.cells
    }

    /// Number of symbolic input bytes.
    pub fn len(&self) -> usize {
        self.symbolic
    }

    pub fn is_empty(&self) -> bool {
        self.symbolic == 0
    }
}

/// Values of all states, in the order of [`Model::states`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    values: Vec<Value>,
}

impl ConcreteState {
    pub fn values(&self) -> &[Value] {
        &self.values
    }

    fn same(&self, other: &ConcreteState) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a.same(b))
    }
}

/// Outcome of running one input: least step with a satisfied bad, and the
/// indices of all bads satisfied there.
pub type RunResult = Option<(u32, Vec<usize>)>;

/// Reusable evaluator bound to one model.
pub struct Evaluator<'m> {
    model: &'m Model,
    slot_of: Vec<u32>,
    cache: Vec<Option<Value>>,
    stamp: Vec<u32>,
    generation: u32,
    stack: Vec<(u32, u8)>,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m Model) -> Self {
        let mut slot_of = vec![u32::MAX; model.len()];
        for (slot, &s) in model.states().iter().enumerate() {
            slot_of[model.position(s).expect("state exists")] = slot as u32;
        }
        Evaluator {
            model,
            slot_of,
            cache: vec![None; model.len()],
            stamp: vec![0; model.len()],
            generation: 1,
            stack: Vec::new(),
        }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    fn invalidate(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    fn cached(&self, p: usize) -> Option<&Value> {
        if self.stamp[p] == self.generation {
            self.cache[p].as_ref()
        } else {
            None
        }
    }

    fn bv(&self, p: u32) -> BitVec {
        match self.cached(p as usize) {
            Some(Value::Bv(b)) => *b,
            other => panic!("operand at {p} not evaluated to a bitvector: {other:?}"),
        }
    }

    fn arr(&self, p: u32) -> Arc<ArrayValue> {
        match self.cached(p as usize) {
            Some(Value::Array(a)) => a.clone(),
            other => panic!("operand at {p} not evaluated to an array: {other:?}"),
        }
    }

    fn set(&mut self, p: usize, v: Value) {
        self.cache[p] = Some(v);
        self.stamp[p] = self.generation;
    }

    /// Builds the initial state for an input assignment.
    pub fn init_state(&mut self, layout: &InputLayout, input: &[u8]) -> Result<ConcreteState, EvalError> {
        if input.len() != layout.len() {
            return Err(EvalError::InputLength { got: input.len(), expected: layout.len() });
        }
        let model = self.model;
        let states = model.states();
        let mut values: Vec<Option<Value>> = vec![None; states.len()];
        let slot = |s: Nid| states.iter().position(|&x| x == s).expect("input is a state");
        for (pos, cell) in layout.cells().iter().enumerate() {
            let byte = BitVec::from_u64(8, input.get(pos).copied().unwrap_or(0) as u64);
            let i = slot(cell.state);
            match cell.index {
                None => values[i] = Some(Value::Bv(byte)),
                Some(k) => {
                    let sort = model.sort_of(cell.state).expect("input sort");
                    let Sort::Array { index, .. } = sort else { unreachable!() };
                    let entry = values[i]
                        .get_or_insert_with(|| Value::Array(Arc::new(ArrayValue::new(index, BitVec::zero(8)))));
                    if let Value::Array(a) = entry {
                        Arc::make_mut(a).set(U256::from(k), byte);
                    }
                }
            }
        }
        // Initialized states may refer to other states; resolve on demand.
        let mut visiting = vec![false; states.len()];
        for i in 0..states.len() {
            self.init_slot(i, &mut values, &mut visiting)?;
        }
        Ok(ConcreteState { values: values.into_iter().map(|v| v.expect("initialized")).collect() })
    }

    fn init_slot(
        &mut self,
        i: usize,
        values: &mut Vec<Option<Value>>,
        visiting: &mut Vec<bool>,
    ) -> Result<(), EvalError> {
        if values[i].is_some() {
            return Ok(());
        }
        let model = self.model;
        let s = model.states()[i];
        let init = model.init_of(s).ok_or_else(|| {
            EvalError::Unsupported(format!("uninitialized state {s} is not covered by the input layout"))
        })?;
        if visiting[i] {
            return Err(EvalError::CyclicInit(s));
        }
        visiting[i] = true;
        for dep in self.state_dependencies(init) {
            self.init_slot(dep, values, visiting)?;
        }
        let partial = ConcreteState {
            values: values
                .iter()
                .map(|v| v.clone().unwrap_or(Value::Bv(BitVec::zero(1))))
                .collect(),
        };
        self.invalidate();
        let v = self.eval_pos(model.position(init).expect("init exists"), &partial)?;
        let v = match (model.sort_of(s), v) {
            (Some(Sort::Array { index, .. }), Value::Bv(b)) => Value::Array(Arc::new(ArrayValue::new(index, b))),
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
            for a in model.arg_positions(p) {
                if a != u32::MAX && model.nodes()[p].op != Op::SortArray {
                    todo.push(a as usize);
                }
            }
        }
        deps
    }

    /// Evaluates a node against a state (fresh evaluation, no reuse).
    pub fn eval_node(&mut self, state: &ConcreteState, id: Nid) -> Result<Value, EvalError> {
        self.invalidate();
        let p = self.model.position(id).ok_or_else(|| EvalError::Unsupported(format!("no node {id}")))?;
        self.eval_pos(p, state)
    }

    /// Evaluates with the current cache generation (values shared within a step).
    fn eval_pos(&mut self, root: usize, state: &ConcreteState) -> Result<Value, EvalError> {
        let model = self.model;
        let nodes = model.nodes();
        let mut stack = std::mem::take(&mut self.stack);
        stack.clear();
        stack.push((root as u32, 0));
        while let Some((p32, stage)) = stack.pop() {
            let p = p32 as usize;
            if self.cached(p).is_some() {
                continue;
            }
            let args = model.arg_positions(p);
            let need = |ev: &Self, stack: &mut Vec<(u32, u8)>, a: u32| {
                if ev.cached(a as usize).is_none() {
                    stack.push((a, 0));
                }
            };
            match &nodes[p].op {
                Op::Const(_, v) => self.set(p, Value::Bv(*v)),
                Op::State => {
                    let v = state.values[self.slot_of[p] as usize].clone();
                    self.set(p, v);
                }
                Op::Input => {
                    self.stack = stack;
                    return Err(EvalError::Unsupported("BTOR2 input nodes are not supported".into()));
                }
                Op::Unary(op) => {
                    if stage == 0 {
                        stack.push((p32, 1));
                        need(self, &mut stack, args[0]);
                    } else {
                        let v = BitVec::unary(*op, self.bv(args[0]))?;
                        self.set(p, Value::Bv(v));
                    }
                }
                Op::Binary(op @ (BinaryOp::And | BinaryOp::Or)) => match stage {
                    0 => {
                        stack.push((p32, 1));
                        need(self, &mut stack, args[0]);
                    }
                    1 => {
                        let a = self.bv(args[0]);
                        let absorbing = if *op == BinaryOp::And {
                            a.is_zero()
                        } else {
                            a == BitVec::ones(a.width())
                        };
                        if absorbing {
                            self.set(p, Value::Bv(a));
                        } else {
                            stack.push((p32, 2));
                            need(self, &mut stack, args[1]);
                        }
                    }
                    _ => {
                        let v = BitVec::binary(*op, self.bv(args[0]), self.bv(args[1]))?;
                        self.set(p, Value::Bv(v));
                    }
                },
                Op::Binary(op) => {
                    if stage == 0 {
                        stack.push((p32, 1));
                        need(self, &mut stack, args[0]);
                        need(self, &mut stack, args[1]);
                    } else {
                        let v = BitVec::binary(*op, self.bv(args[0]), self.bv(args[1]))?;
                        self.set(p, Value::Bv(v));
                    }
                }
                Op::Ite => match stage {
                    0 => {
                        stack.push((p32, 1));
                        need(self, &mut stack, args[0]);
                    }
                    _ => {
                        let branch = if self.bv(args[0]).is_true() { args[1] } else { args[2] };
                        match self.cached(branch as usize) {
                            Some(v) => {
                                let v = v.clone();
                                self.set(p, v);
                            }
                            None => {
                                stack.push((p32, 1));
                                stack.push((branch, 0));
                            }
                        }
                    }
                },
                Op::Read => {
                    if stage == 0 {
                        stack.push((p32, 1));
                        need(self, &mut stack, args[0]);
                        need(self, &mut stack, args[1]);
                    } else {
                        let v = self.arr(args[0]).get(self.bv(args[1]).value());
                        self.set(p, Value::Bv(v));
                    }
                }
                Op::Write => {
                    if stage == 0 {
                        stack.push((p32, 1));
                        need(self, &mut stack, args[0]);
                        need(self, &mut stack, args[1]);
                        need(self, &mut stack, args[2]);
                    } else {
                        let mut a = self.arr(args[0]);
                        let (i, v) = (self.bv(args[1]).value(), self.bv(args[2]));
                        if a.get(i) != v {
                            Arc::make_mut(&mut a).set(i, v);
                        }
                        self.set(p, Value::Array(a));
                    }
                }
                op => {
                    self.stack = stack;
                    return Err(EvalError::Unsupported(format!("cannot evaluate '{}' node", op.keyword())));
                }
            }
        }
        self.stack = stack;
        Ok(self.cached(root).expect("root evaluated").clone())
    }

    fn eval_bool(&mut self, state: &ConcreteState, id: Nid) -> Result<bool, EvalError> {
        let p = self.model.position(id).expect("property condition exists");
        Ok(self.eval_pos(p, state)?.as_bv().is_some_and(|b| b.is_true()))
    }

    /// Indices of satisfied bads and violated constraints in `state`.
    pub fn check_properties(&mut self, state: &ConcreteState) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
        self.invalidate();
        let model = self.model;
        let mut bads = Vec::new();
        for (i, b) in model.bads().iter().enumerate() {
            if self.eval_bool(state, b.cond)? {
                bads.push(i);
            }
        }
        let mut violated = Vec::new();
        for (i, c) in model.constraints().iter().enumerate() {
            if !self.eval_bool(state, c.cond)? {
                violated.push(i);
            }
        }
        Ok((bads, violated))
    }

    /// Evaluates all next functions against `state` and commits them at once.
    pub fn step(&mut self, state: &ConcreteState) -> Result<ConcreteState, EvalError> {
        self.invalidate();
        let model = self.model;
        let mut values = Vec::with_capacity(state.values.len());
        for (i, &s) in model.states().iter().enumerate() {
            match model.next_of(s) {
                Some(n) => values.push(self.eval_pos(model.position(n).expect("next exists"), state)?),
                None => values.push(state.values[i].clone()),
            }
        }
        Ok(ConcreteState { values })
    }

    /// Runs one input for at most `kmax` transitions and returns the least
    /// step at which a bad holds while every constraint held so far.
    pub fn run(&mut self, layout: &InputLayout, input: &[u8], kmax: u32) -> Result<RunResult, EvalError> {
        let mut state = self.init_state(layout, input)?;
        for k in 0..=kmax {
            let (bads, violated) = self.check_properties(&state)?;
            if !violated.is_empty() {
                return Ok(None);
            }
            if !bads.is_empty() {
                return Ok(Some((k, bads)));
            }
            if k == kmax {
                break;
            }
            let next = self.step(&state)?;
            if next.same(&state) {
                // Fixpoint: every later step repeats this one.
                return Ok(None);
            }
            state = next;
        }
        Ok(None)
    }

    /// Whether `k` steps reach a state satisfying bad `bad` with every
    /// constraint holding at steps 0..=k (k-satisfiability for one input).
    pub fn k_satisfies(&mut self, layout: &InputLayout, input: &[u8], k: u32, bad: usize) -> Result<bool, EvalError> {
        let mut state = self.init_state(layout, input)?;
        for i in 0..=k {
            let (bads, violated) = self.check_properties(&state)?;
            if !violated.is_empty() {
                return Ok(false);
            }
            if i == k {
                return Ok(bads.contains(&bad));
            }
            state = self.step(&state)?;
        }
        unreachable!()
    }
}

/// Exhaustive least-k table over all assignments of at most two input bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumTable {
    pub bad_names: Vec<String>,
    pub rows: Vec<(Vec<u8>, RunResult)>,
}

impl EnumTable {
    /// TSV rows `input-bytes(hex)\tleast-k\tbad-name`; `-` marks no bad.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("input\tleast_k\tbad\n");
        for (input, result) in &self.rows {
            let hex: String = input.iter().map(|b| format!("{b:02x}")).collect();
            match result {
                Some((k, bads)) => {
                    let names: Vec<&str> = bads.iter().map(|&i| self.bad_names[i].as_str()).collect();
                    let _ = writeln!(out, "{hex}\t{k}\t{}", names.join(","));
                }
                None => {
                    let _ = writeln!(out, "{hex}\t-\t-");
                }
            }
        }
        out
    }

    /// Inputs grouped by (least k, bad name).
    pub fn events(&self) -> BTreeMap<(u32, String), Vec<Vec<u8>>> {
        let mut out: BTreeMap<(u32, String), Vec<Vec<u8>>> = BTreeMap::new();
        for (input, result) in &self.rows {
            if let Some((k, bads)) = result {
                for &b in bads {
                    out.entry((*k, self.bad_names[b].clone())).or_default().push(input.clone());
                }
            }
        }
        out
    }
}

/// All assignments of `n` bytes in lexicographic order.
pub fn all_assignments(n: usize) -> Vec<Vec<u8>> {
    let total = 1usize << (8 * n);
    (0..total)
        .map(|x| (0..n).map(|i| (x >> (8 * (n - 1 - i))) as u8).collect())
        .collect()
}

/// Runs every assignment of the layout's input bytes (at most two).
pub fn run_enumerated(model: &Model, layout: &InputLayout, kmax: u32) -> Result<EnumTable, EvalError> {
    if layout.len() > 2 {
        return Err(EvalError::TooManyInputs(layout.len()));
    }
    let rows = all_assignments(layout.len())
        .into_par_iter()
        .map_init(
            || Evaluator::new(model),
            |ev, input| ev.run(layout, &input, kmax).map(|r| (input, r)),
        )
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnumTable { bad_names: model.bads().iter().map(|b| b.name.clone()).collect(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::{parse, Builder};

    fn byte_model() -> (Model, Nid) {
        let mut b = Builder::new();
        let x = b.state(Sort::Bitvec(8), Some("in"));
        let c = b.const_u64(8, 48);
        let e = b.eq(x, c);
        b.bad(e, "is-zero-char");
        (b.finish(), e)
    }

    #[test]
    fn eval_constants_and_inputs() {
        let mut b = Builder::new();
        let x = b.state(Sort::Bitvec(8), None);
        let three = b.const_u64(8, 3);
        let four = b.const_u64(8, 4);
        let sum = b.add(three, four);
        let c48 = b.const_u64(8, 48);
        let e = b.eq(x, c48);
        let one = b.const_u64(8, 1);
        let zero = b.const_u64(8, 0);
        let pick = b.ite(e, one, zero);
        let m = b.finish();
        let layout = InputLayout::new(&m, None).unwrap();
        let mut ev = Evaluator::new(&m);
        let s = ev.init_state(&layout, &[48]).unwrap();
        assert_eq!(ev.eval_node(&s, sum).unwrap(), Value::Bv(BitVec::from_u64(8, 7)));
        assert_eq!(ev.eval_node(&s, pick).unwrap(), Value::Bv(BitVec::from_u64(8, 1)));
        assert!(ev.init_state(&layout, &[]).is_err());
    }

    #[test]
    fn array_axiom() {
        let mut b = Builder::new();
        let a = b.state(Sort::Array { index: 8, element: 8 }, Some("mem"));
        let z = b.const_u64(8, 0);
        b.init(a, z);
        let five = b.const_u64(8, 5);
        let nine = b.const_u64(8, 9);
        let w = b.write(a, five, nine);
        let r = b.read(w, five);
        let r2 = b.read(w, nine);
        let m = b.finish();
        let layout = InputLayout::new(&m, None).unwrap();
        let mut ev = Evaluator::new(&m);
        let s = ev.init_state(&layout, &[]).unwrap();
        assert_eq!(ev.eval_node(&s, r).unwrap().as_bv(), Some(BitVec::from_u64(8, 9)));
        assert_eq!(ev.eval_node(&s, r2).unwrap().as_bv(), Some(BitVec::from_u64(8, 0)));
    }

    #[test]
    fn simultaneous_swap_and_counter() {
        let m = parse(
            "1 sort bitvec 8\n2 zero 1\n3 one 1\n4 state 1 x\n5 state 1 y\n6 init 1 4 2\n7 init 1 5 3\n\
             8 next 1 4 5\n9 next 1 5 4\n10 state 1 pc\n11 init 1 10 2\n12 constd 1 4\n13 add 1 10 12\n14 next 1 10 13\n",
        )
        .unwrap();
        let layout = InputLayout::new(&m, None).unwrap();
        let mut ev = Evaluator::new(&m);
        let s0 = ev.init_state(&layout, &[]).unwrap();
        let s1 = ev.step(&s0).unwrap();
        assert_eq!(s1.values()[0], Value::Bv(BitVec::from_u64(8, 1)));
        assert_eq!(s1.values()[1], Value::Bv(BitVec::from_u64(8, 0)));
        assert_eq!(s1.values()[2], Value::Bv(BitVec::from_u64(8, 4)));
    }

    #[test]
    fn enumeration_finds_single_byte() {
        let (m, _) = byte_model();
        let layout = InputLayout::new(&m, None).unwrap();
        let t = run_enumerated(&m, &layout, 0).unwrap();
        let hits: Vec<_> = t.rows.iter().filter(|(_, r)| r.is_some()).collect();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, vec![48]);
        assert!(t.to_tsv().contains("30\t0\tis-zero-char"));
    }

    #[test]
    fn constraint_gates_bad() {
        let mut b = Builder::new();
        let x = b.state(Sort::Bitvec(8), None);
        let c = b.const_u64(8, 48);
        let e = b.eq(x, c);
        let ne = b.not(e);
        b.constraint(ne, "not-zero-char");
        let t = b.bool_const(true);
        b.bad(t, "always");
        let m = b.finish();
        let layout = InputLayout::new(&m, None).unwrap();
        let tab = run_enumerated(&m, &layout, 3).unwrap();
        assert_eq!(tab.rows[48].1, None);
        assert_eq!(tab.rows[49].1, Some((0, vec![0])));
    }

    #[test]
    fn refuses_three_bytes() {
        let mut b = Builder::new();
        b.state(Sort::Array { index: 2, element: 8 }, None);
        let m = b.finish();
        let layout = InputLayout::new(&m, Some(3)).unwrap();
        assert!(matches!(run_enumerated(&m, &layout, 1), Err(EvalError::TooManyInputs(3))));
        assert!(InputLayout::new(&m, Some(5)).is_err());
    }
}
