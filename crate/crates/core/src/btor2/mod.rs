//! BTOR2 models: node representation, parsing, printing, validation and a
//! hash-consing builder used by every model-producing pass.

mod parse;
mod print;
mod validate;

use std::collections::HashMap;

use crate::bitvec::{BinaryOp, BitVec, UnaryOp};

pub use parse::{parse, ParseError};
pub use print::print;
pub use validate::{validate, Diagnostic};

/// Node (line) identifier.
pub type Nid = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bitvec(u32),
    Array { index: u32, element: u32 },
}

impl Sort {
    pub fn bitvec_width(self) -> Option<u32> {
        match self {
            Sort::Bitvec(w) => Some(w),
            Sort::Array { .. } => None,
        }
    }

    pub fn is_array(self) -> bool {
        matches!(self, Sort::Array { .. })
    }
}

/// Literal syntax of a constant, kept so printing reproduces the source keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstFormat {
    Binary,
    Decimal,
    Hex,
    Zero,
    One,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    SortBitvec(u32),
    /// Operands: index sort, element sort.
    SortArray,
    Const(ConstFormat, BitVec),
    Input,
    State,
    /// Operands: state, value.
    Init,
    /// Operands: state, value.
    Next,
    Bad,
    Constraint,
    Unary(UnaryOp),
    Binary(BinaryOp),
    Ite,
    Read,
    Write,
}

impl Op {
    pub fn keyword(&self) -> &'static str {
        match self {
            Op::SortBitvec(_) | Op::SortArray => "sort",
            Op::Const(ConstFormat::Binary, _) => "const",
            Op::Const(ConstFormat::Decimal, _) => "constd",
            Op::Const(ConstFormat::Hex, _) => "consth",
            Op::Const(ConstFormat::Zero, _) => "zero",
            Op::Const(ConstFormat::One, _) => "one",
            Op::Const(ConstFormat::Ones, _) => "ones",
            Op::Input => "input",
            Op::State => "state",
            Op::Init => "init",
            Op::Next => "next",
            Op::Bad => "bad",
            Op::Constraint => "constraint",
            Op::Unary(u) => u.name(),
            Op::Binary(b) => b.name(),
            Op::Ite => "ite",
            Op::Read => "read",
            Op::Write => "write",
        }
    }

    /// True for operators that compute a value from operands.
    pub fn is_combinational(&self) -> bool {
        matches!(self, Op::Unary(_) | Op::Binary(_) | Op::Ite | Op::Read | Op::Write)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: Nid,
    pub op: Op,
    /// Sort node of the value this node denotes (absent for sorts and properties).
    pub sort: Option<Nid>,
    pub args: Vec<Nid>,
    pub symbol: Option<String>,
}

/// A bad or constraint property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    /// Id of the `bad`/`constraint` line.
    pub line: Nid,
    /// Id of the 1-bit condition.
    pub cond: Nid,
    pub name: String,
}

/// A BTOR2 model. Nodes are kept in ascending id order.
#[derive(Debug, Clone, Default)]
pub struct Model {
    nodes: Vec<Node>,
    index: HashMap<Nid, usize>,
    sorts: Vec<Option<Sort>>,
    arg_pos: Vec<[u32; 3]>,
    states: Vec<Nid>,
    input_nodes: Vec<Nid>,
    inits: HashMap<Nid, Nid>,
    nexts: HashMap<Nid, Nid>,
    bads: Vec<Property>,
    constraints: Vec<Property>,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a node. Ids must be strictly increasing; sort consistency is
    /// checked by [`validate`], not here.
    pub(crate) fn push(&mut self, node: Node) {
        if let Some(last) = self.nodes.last() {
            assert!(node.id > last.id, "node ids must increase");
        }
        let resolved = match &node.op {
            Op::SortBitvec(w) => Some(Sort::Bitvec(*w)),
            Op::SortArray => {
                let part = |i: usize| {
                    node.args.get(i).and_then(|a| self.sort_of(*a)).and_then(Sort::bitvec_width)
                };
                match (part(0), part(1)) {
                    (Some(index), Some(element)) => Some(Sort::Array { index, element }),
                    _ => None,
                }
            }
            _ => node.sort.and_then(|s| self.declared_sort(s)),
        };
        match node.op {
            Op::State => self.states.push(node.id),
            Op::Input => self.input_nodes.push(node.id),
            Op::Init if node.args.len() == 2 => {
                self.inits.entry(node.args[0]).or_insert(node.args[1]);
            }
            Op::Next if node.args.len() == 2 => {
                self.nexts.entry(node.args[0]).or_insert(node.args[1]);
            }
            Op::Bad if !node.args.is_empty() => {
                let name = node.symbol.clone().unwrap_or_else(|| format!("b{}", self.bads.len()));
                self.bads.push(Property { line: node.id, cond: node.args[0], name });
            }
            Op::Constraint if !node.args.is_empty() => {
                let name =
                    node.symbol.clone().unwrap_or_else(|| format!("c{}", self.constraints.len()));
                self.constraints.push(Property { line: node.id, cond: node.args[0], name });
            }
            _ => {}
        }
        let mut pos = [u32::MAX; 3];
        for (slot, a) in pos.iter_mut().zip(&node.args) {
            if let Some(&p) = self.index.get(a) {
                *slot = p as u32;
            }
        }
        self.arg_pos.push(pos);
        self.index.insert(node.id, self.nodes.len());
        self.nodes.push(node);
        self.sorts.push(resolved);
    }

    fn declared_sort(&self, sort_id: Nid) -> Option<Sort> {
        let i = *self.index.get(&sort_id)?;
        match self.nodes[i].op {
            Op::SortBitvec(_) | Op::SortArray => self.sorts[i],
            _ => None,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: Nid) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    /// Dense position of a node in [`Model::nodes`].
    pub fn position(&self, id: Nid) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Dense positions of a node's operands (unused slots hold `u32::MAX`).
    pub fn arg_positions(&self, pos: usize) -> [u32; 3] {
        self.arg_pos[pos]
    }

    /// Sort of the node at a dense position.
    pub fn sort_at(&self, pos: usize) -> Option<Sort> {
        self.sorts[pos]
    }

    /// Sort of the value denoted by a node (or the sort a sort node declares).
    pub fn sort_of(&self, id: Nid) -> Option<Sort> {
        self.index.get(&id).and_then(|&i| self.sorts[i])
    }

    pub fn width_of(&self, id: Nid) -> Option<u32> {
        self.sort_of(id).and_then(Sort::bitvec_width)
    }

    pub fn states(&self) -> &[Nid] {
        &self.states
    }

    /// Uninitialized states in declaration order.
    pub fn inputs(&self) -> Vec<Nid> {
        self.states.iter().copied().filter(|s| !self.inits.contains_key(s)).collect()
    }

    /// BTOR2 `input` nodes (fresh per step; not supported by the checkers).
    pub fn input_nodes(&self) -> &[Nid] {
        &self.input_nodes
    }

    pub fn init_of(&self, state: Nid) -> Option<Nid> {
        self.inits.get(&state).copied()
    }

    pub fn next_of(&self, state: Nid) -> Option<Nid> {
        self.nexts.get(&state).copied()
    }

    pub fn bads(&self) -> &[Property] {
        &self.bads
    }

    pub fn constraints(&self) -> &[Property] {
        &self.constraints
    }

    pub fn symbol(&self, id: Nid) -> Option<&str> {
        self.node(id).and_then(|n| n.symbol.as_deref())
    }

    pub fn state_by_symbol(&self, symbol: &str) -> Option<Nid> {
        self.states.iter().copied().find(|&s| self.symbol(s) == Some(symbol))
    }

    pub fn max_id(&self) -> Nid {
        self.nodes.last().map(|n| n.id).unwrap_or(0)
    }
}

/// Builds models node by node, reusing sort declarations and structurally
/// identical combinational nodes.
#[derive(Debug, Clone, Default)]
pub struct Builder {
    model: Model,
    next_id: Nid,
    sort_ids: HashMap<Sort, Nid>,
    shared: HashMap<(Op, Vec<Nid>), Nid>,
}

impl Builder {
    pub fn new() -> Self {
        Builder { next_id: 1, ..Default::default() }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn finish(self) -> Model {
        self.model
    }

    fn emit(&mut self, op: Op, sort: Option<Nid>, args: Vec<Nid>, symbol: Option<String>) -> Nid {
        let id = self.next_id;
        self.next_id += 1;
        self.model.push(Node { id, op, sort, args, symbol });
        id
    }

    pub fn sort(&mut self, sort: Sort) -> Nid {
        if let Some(&id) = self.sort_ids.get(&sort) {
            return id;
        }
        let id = match sort {
            Sort::Bitvec(w) => self.emit(Op::SortBitvec(w), None, vec![], None),
            Sort::Array { index, element } => {
                let i = self.sort(Sort::Bitvec(index));
                let e = self.sort(Sort::Bitvec(element));
                self.emit(Op::SortArray, None, vec![i, e], None)
            }
        };
        self.sort_ids.insert(sort, id);
        id
    }

    pub fn sort_of(&self, id: Nid) -> Sort {
        self.model.sort_of(id).unwrap_or_else(|| panic!("node {id} has no sort"))
    }

    pub fn width_of(&self, id: Nid) -> u32 {
        self.sort_of(id).bitvec_width().unwrap_or_else(|| panic!("node {id} is an array"))
    }

    fn shared_node(&mut self, op: Op, sort: Sort, args: Vec<Nid>) -> Nid {
        let key = (op, args);
        if let Some(&id) = self.shared.get(&key) {
            return id;
        }
        let sid = self.sort(sort);
        let id = self.emit(key.0.clone(), Some(sid), key.1.clone(), None);
        self.shared.insert(key, id);
        id
    }

    pub fn constant(&mut self, value: BitVec) -> Nid {
        let format = if value.is_zero() {
            ConstFormat::Zero
        } else if value == BitVec::one(value.width()) {
            ConstFormat::One
        } else if value == BitVec::ones(value.width()) {
            ConstFormat::Ones
        } else {
            ConstFormat::Decimal
        };
        self.shared_node(Op::Const(format, value), Sort::Bitvec(value.width()), vec![])
    }

    pub fn const_u64(&mut self, width: u32, value: u64) -> Nid {
        self.constant(BitVec::from_u64(width, value))
    }

    pub fn bool_const(&mut self, b: bool) -> Nid {
        self.constant(BitVec::bool(b))
    }

    /// Panics if the operand is not a bitvector of a fitting width.
    pub fn unary(&mut self, op: UnaryOp, a: Nid) -> Nid {
        let w = op.result_width(self.width_of(a)).unwrap_or_else(|e| panic!("{e}"));
        self.shared_node(Op::Unary(op), Sort::Bitvec(w), vec![a])
    }

    /// Panics on operand width mismatch.
    pub fn binary(&mut self, op: BinaryOp, a: Nid, b: Nid) -> Nid {
        let w = op
            .result_width(self.width_of(a), self.width_of(b))
            .unwrap_or_else(|e| panic!("{e}"));
        self.shared_node(Op::Binary(op), Sort::Bitvec(w), vec![a, b])
    }

    pub fn ite(&mut self, c: Nid, t: Nid, e: Nid) -> Nid {
        let sort = self.sort_of(t);
        assert_eq!(self.sort_of(c), Sort::Bitvec(1), "ite condition must be 1-bit");
        assert_eq!(sort, self.sort_of(e), "ite branches must share a sort");
        if t == e {
            return t;
        }
        self.shared_node(Op::Ite, sort, vec![c, t, e])
    }

    pub fn read(&mut self, array: Nid, index: Nid) -> Nid {
        match self.sort_of(array) {
            Sort::Array { element, .. } => {
                self.shared_node(Op::Read, Sort::Bitvec(element), vec![array, index])
            }
            s => panic!("read from non-array sort {s:?}"),
        }
    }

    pub fn write(&mut self, array: Nid, index: Nid, value: Nid) -> Nid {
        let sort = self.sort_of(array);
        self.shared_node(Op::Write, sort, vec![array, index, value])
    }

    pub fn state(&mut self, sort: Sort, symbol: Option<&str>) -> Nid {
        let sid = self.sort(sort);
        self.emit(Op::State, Some(sid), vec![], symbol.map(str::to_string))
    }

    pub fn input(&mut self, sort: Sort, symbol: Option<&str>) -> Nid {
        let sid = self.sort(sort);
        self.emit(Op::Input, Some(sid), vec![], symbol.map(str::to_string))
    }

    pub fn init(&mut self, state: Nid, value: Nid) -> Nid {
        let sid = self.sort(self.sort_of(state));
        self.emit(Op::Init, Some(sid), vec![state, value], None)
    }

    pub fn next(&mut self, state: Nid, value: Nid) -> Nid {
        let sid = self.sort(self.sort_of(state));
        self.emit(Op::Next, Some(sid), vec![state, value], None)
    }

    pub fn bad(&mut self, cond: Nid, name: &str) -> Nid {
        self.emit(Op::Bad, None, vec![cond], Some(name.to_string()))
    }

    pub fn constraint(&mut self, cond: Nid, name: &str) -> Nid {
        self.emit(Op::Constraint, None, vec![cond], Some(name.to_string()))
    }

    // Boolean and arithmetic shorthands used by model-producing passes.

    pub fn not(&mut self, a: Nid) -> Nid {
        self.unary(UnaryOp::Not, a)
    }

    pub fn and(&mut self, a: Nid, b: Nid) -> Nid {
        self.binary(BinaryOp::And, a, b)
    }

    pub fn or(&mut self, a: Nid, b: Nid) -> Nid {
        self.binary(BinaryOp::Or, a, b)
    }

    pub fn eq(&mut self, a: Nid, b: Nid) -> Nid {
        self.binary(BinaryOp::Eq, a, b)
    }

    pub fn add(&mut self, a: Nid, b: Nid) -> Nid {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Nid, b: Nid) -> Nid {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn slice(&mut self, a: Nid, hi: u32, lo: u32) -> Nid {
        self.unary(UnaryOp::Slice { hi, lo }, a)
    }

    pub fn uext(&mut self, a: Nid, to: u32) -> Nid {
        let w = self.width_of(a);
        if w == to {
            a
        } else {
            self.unary(UnaryOp::Uext(to - w), a)
        }
    }

    pub fn sext(&mut self, a: Nid, to: u32) -> Nid {
        let w = self.width_of(a);
        if w == to {
            a
        } else {
            self.unary(UnaryOp::Sext(to - w), a)
        }
    }

    /// Conjunction of all conditions (true when empty).
    pub fn all(&mut self, conds: &[Nid]) -> Nid {
        match conds.split_first() {
            None => self.bool_const(true),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &c| self.and(acc, c)),
        }
    }

    /// Disjunction of all conditions (false when empty).
    pub fn any(&mut self, conds: &[Nid]) -> Nid {
        match conds.split_first() {
            None => self.bool_const(false),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &c| self.or(acc, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_shares_structure() {
        let mut b = Builder::new();
        let s = b.state(Sort::Bitvec(8), Some("x"));
        let c = b.const_u64(8, 48);
        let e1 = b.eq(s, c);
        let e2 = b.eq(s, c);
        assert_eq!(e1, e2);
        assert_eq!(b.sort(Sort::Bitvec(8)), b.sort(Sort::Bitvec(8)));
        b.bad(e1, "hit");
        let m = b.finish();
        assert_eq!(m.bads()[0].name, "hit");
        assert_eq!(m.inputs(), vec![s]);
        assert!(validate(&m).is_empty());
    }
}
