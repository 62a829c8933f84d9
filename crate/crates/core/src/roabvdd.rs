//! Reduced ordered algebraic bitvector decision diagrams: decisions on whole
//! input bytes, edges labelled by 256-bit value sets, bitvector leaves.

use std::collections::HashMap;
use std::fmt::Write;

use crate::bitvec::{BinaryOp, BitVec, UnaryOp};
use crate::btor2::{Builder, Nid};
use crate::tracker::{membership_term, ByteSet, Cube, Tracker};

pub type NodeId = u32;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum RNode {
    Leaf(BitVec),
    /// Edges partition the byte values, no two share a child, and they are
    /// ordered by their lowest member.
    Internal { var: u32, edges: Box<[(ByteSet, NodeId)]> },
}

/// A unique table plus apply caches. Node handles are only meaningful within
/// the context that created them.
#[derive(Default)]
pub struct Roabvdd {
    nodes: Vec<RNode>,
    unique: HashMap<RNode, NodeId>,
    unary_memo: HashMap<(UnaryOp, NodeId), NodeId>,
    binary_memo: HashMap<(BinaryOp, NodeId, NodeId), NodeId>,
    ite_memo: HashMap<(NodeId, NodeId, NodeId), NodeId>,
    /// Clear the apply caches once they hold this many entries.
    pub memo_limit: Option<usize>,
}

fn bin(op: BinaryOp, a: BitVec, b: BitVec) -> BitVec {
    BitVec::binary(op, a, b).expect("operand widths checked when the model was validated")
}

impl Roabvdd {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, id: NodeId) -> &RNode {
        &self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn intern(&mut self, n: RNode) -> NodeId {
        if let Some(&id) = self.unique.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n.clone());
        self.unique.insert(n, id);
        id
    }

    pub fn leaf(&mut self, v: BitVec) -> NodeId {
        self.intern(RNode::Leaf(v))
    }

    /// Builds a reduced node from edges that partition the byte values.
    fn make(&mut self, var: u32, edges: Vec<(ByteSet, NodeId)>) -> NodeId {
        let mut merged: Vec<(ByteSet, NodeId)> = Vec::with_capacity(edges.len());
        let mut slot: HashMap<NodeId, usize> = HashMap::new();
        for (s, c) in edges {
            if s.is_empty() {
                continue;
            }
            match slot.get(&c) {
                Some(&i) => merged[i].0 = merged[i].0.union(s),
                None => {
                    slot.insert(c, merged.len());
                    merged.push((s, c));
                }
            }
        }
        if merged.len() == 1 {
            return merged[0].1;
        }
        merged.sort_by_key(|(s, _)| s.lowest());
        self.intern(RNode::Internal { var, edges: merged.into_boxed_slice() })
    }

    pub fn var(&mut self, pos: u32) -> NodeId {
        let edges = (0..=255u8).map(|v| (ByteSet::singleton(v), self.leaf(BitVec::from_u64(8, v as u64)))).collect();
        self.make(pos, edges)
    }

    /// The 1-bit tracker that holds iff byte `pos` lies in `set`.
    pub fn membership(&mut self, pos: u32, set: ByteSet) -> NodeId {
        let t = self.leaf(BitVec::bool(true));
        let f = self.leaf(BitVec::bool(false));
        self.make(pos, vec![(set, t), (set.complement(), f)])
    }

    fn top_var(&self, id: NodeId) -> Option<u32> {
        match &self.nodes[id as usize] {
            RNode::Leaf(_) => None,
            RNode::Internal { var, .. } => Some(*var),
        }
    }

    /// Edges of `id` when branching on `var`; a node that does not test `var`
    /// behaves as a single full edge.
    fn edges_at(&self, id: NodeId, var: u32) -> Vec<(ByteSet, NodeId)> {
        match &self.nodes[id as usize] {
            RNode::Internal { var: v, edges } if *v == var => edges.to_vec(),
            _ => vec![(ByteSet::FULL, id)],
        }
    }

    fn leaf_value(&self, id: NodeId) -> Option<BitVec> {
        match &self.nodes[id as usize] {
            RNode::Leaf(v) => Some(*v),
            _ => None,
        }
    }

    fn trim_memos(&mut self) {
        if let Some(limit) = self.memo_limit {
            if self.binary_memo.len() + self.unary_memo.len() + self.ite_memo.len() > limit {
                self.binary_memo.clear();
                self.unary_memo.clear();
                self.ite_memo.clear();
            }
        }
    }

    pub fn apply_unary(&mut self, op: UnaryOp, a: NodeId) -> NodeId {
        if let Some(&r) = self.unary_memo.get(&(op, a)) {
            return r;
        }
        let r = match self.nodes[a as usize].clone() {
            RNode::Leaf(v) => self.leaf(BitVec::unary(op, v).expect("width checked")),
            RNode::Internal { var, edges } => {
                let e = edges.iter().map(|&(s, c)| (s, self.apply_unary(op, c))).collect();
                self.make(var, e)
            }
        };
        self.unary_memo.insert((op, a), r);
        r
    }

    fn shortcut(&self, op: BinaryOp, a: NodeId, b: NodeId) -> Option<NodeId> {
        let (va, vb) = (self.leaf_value(a), self.leaf_value(b));
        match op {
            BinaryOp::And => match (va, vb) {
                (Some(v), _) if v.is_zero() => Some(a),
                (_, Some(v)) if v.is_zero() => Some(b),
                (Some(v), _) if v == BitVec::ones(v.width()) => Some(b),
                (_, Some(v)) if v == BitVec::ones(v.width()) => Some(a),
                _ => (a == b).then_some(a),
            },
            BinaryOp::Or => match (va, vb) {
                (Some(v), _) if v.is_zero() => Some(b),
                (_, Some(v)) if v.is_zero() => Some(a),
                (Some(v), _) if v == BitVec::ones(v.width()) => Some(a),
                (_, Some(v)) if v == BitVec::ones(v.width()) => Some(b),
                _ => (a == b).then_some(a),
            },
            _ => None,
        }
    }

    pub fn apply_binary(&mut self, op: BinaryOp, a: NodeId, b: NodeId) -> NodeId {
        if let Some(r) = self.shortcut(op, a, b) {
            return r;
        }
        if let Some(&r) = self.binary_memo.get(&(op, a, b)) {
            return r;
        }
        let r = match (self.top_var(a), self.top_var(b)) {
            (None, None) => {
                let v = bin(op, self.leaf_value(a).unwrap(), self.leaf_value(b).unwrap());
                self.leaf(v)
            }
            (va, vb) => {
                let var = va.unwrap_or(u32::MAX).min(vb.unwrap_or(u32::MAX));
                let ea = self.edges_at(a, var);
                let eb = self.edges_at(b, var);
                let mut out = Vec::with_capacity(ea.len().max(eb.len()));
                for &(sa, ca) in &ea {
                    for &(sb, cb) in &eb {
                        let s = sa.intersect(sb);
                        if !s.is_empty() {
                            out.push((s, self.apply_binary(op, ca, cb)));
                        }
                    }
                }
                self.make(var, out)
            }
        };
        self.binary_memo.insert((op, a, b), r);
        r
    }

    pub fn apply_ite(&mut self, c: NodeId, t: NodeId, e: NodeId) -> NodeId {
        if t == e {
            return t;
        }
        if let Some(v) = self.leaf_value(c) {
            return if v.is_true() { t } else { e };
        }
        if let Some(&r) = self.ite_memo.get(&(c, t, e)) {
            return r;
        }
        let var = [c, t, e].iter().filter_map(|&x| self.top_var(x)).min().expect("c is internal");
        let ec = self.edges_at(c, var);
        let et = self.edges_at(t, var);
        let ee = self.edges_at(e, var);
        let mut out = Vec::new();
        for &(sc, cc) in &ec {
            for &(st, ct) in &et {
                let s1 = sc.intersect(st);
                if s1.is_empty() {
                    continue;
                }
                for &(se, ce) in &ee {
                    let s = s1.intersect(se);
                    if !s.is_empty() {
                        out.push((s, self.apply_ite(cc, ct, ce)));
                    }
                }
            }
        }
        let r = self.make(var, out);
        self.ite_memo.insert((c, t, e), r);
        r
    }

    pub fn lookup_checked(&self, mut id: NodeId, input: &[u8]) -> Option<BitVec> {
        loop {
            match &self.nodes[id as usize] {
                RNode::Leaf(v) => return Some(*v),
                RNode::Internal { var, edges } => {
                    let x = *input.get(*var as usize)?;
                    id = edges.iter().find(|(s, _)| s.contains(x)).expect("edges partition the bytes").1;
                }
            }
        }
    }

    /// Writes the values of `id` over bytes `depth..` into `out`, whose
    /// entries are ordered with byte 0 most significant.
    fn fill(&self, id: NodeId, depth: usize, bytes: usize, out: &mut [BitVec]) {
        let stride = out.len() / 256;
        match &self.nodes[id as usize] {
            RNode::Leaf(v) => out.fill(*v),
            RNode::Internal { var, .. } if (*var as usize) > depth && depth < bytes => {
                for chunk in out.chunks_mut(stride) {
                    self.fill(id, depth + 1, bytes, chunk);
                }
            }
            RNode::Internal { var, edges } => {
                assert!((*var as usize) == depth && depth < bytes, "node decides on byte {var} beyond the table");
                for (set, child) in edges {
                    for x in set.iter() {
                        let at = x as usize * stride;
                        self.fill(*child, depth + 1, bytes, &mut out[at..at + stride]);
                    }
                }
            }
        }
    }

    fn reachable(&self, roots: &[NodeId]) -> Vec<NodeId> {
        let mut seen = std::collections::HashSet::new();
        let mut todo: Vec<NodeId> = roots.to_vec();
        let mut out = Vec::new();
        while let Some(id) = todo.pop() {
            if !seen.insert(id) {
                continue;
            }
            out.push(id);
            if let RNode::Internal { edges, .. } = &self.nodes[id as usize] {
                todo.extend(edges.iter().map(|e| e.1));
            }
        }
        out
    }

    /// Reachable internal nodes only.
    pub fn internal_count(&self, roots: &[NodeId]) -> usize {
        self.reachable(roots).into_iter().filter(|&i| self.top_var(i).is_some()).count()
    }

    /// Text dump for debugging: one line per reachable node.
    pub fn dump(&self, root: NodeId) -> String {
        let mut ids = self.reachable(&[root]);
        ids.sort_unstable();
        let mut out = String::new();
        for id in ids {
            match &self.nodes[id as usize] {
                RNode::Leaf(v) => {
                    let _ = writeln!(out, "{id} leaf {}", v.to_hex_string());
                }
                RNode::Internal { var, edges } => {
                    let es: Vec<String> = edges.iter().map(|(s, c)| format!("{s}->{c}")).collect();
                    let _ = writeln!(out, "{id} byte{var} {}", es.join(" "));
                }
            }
        }
        out
    }

    fn cubes_into(&self, id: NodeId, path: &mut Cube, out: &mut Vec<Cube>) {
        match &self.nodes[id as usize] {
            RNode::Leaf(v) => {
                if !v.is_zero() {
                    out.push(path.clone());
                }
            }
            RNode::Internal { var, edges } => {
                for &(s, c) in edges.iter() {
                    path.push((*var as usize, s));
                    self.cubes_into(c, path, out);
                    path.pop();
                }
            }
        }
    }
}

impl Tracker for Roabvdd {
    type T = NodeId;

    fn constant(&mut self, v: BitVec) -> NodeId {
        self.leaf(v)
    }

    fn input_byte(&mut self, pos: usize) -> NodeId {
        self.var(pos as u32)
    }

    fn unary(&mut self, op: UnaryOp, a: NodeId) -> NodeId {
        self.trim_memos();
        self.apply_unary(op, a)
    }

    fn binary(&mut self, op: BinaryOp, a: NodeId, b: NodeId) -> NodeId {
        self.trim_memos();
        self.apply_binary(op, a, b)
    }

    fn ite(&mut self, c: NodeId, t: NodeId, e: NodeId) -> NodeId {
        self.trim_memos();
        self.apply_ite(c, t, e)
    }

    fn as_constant(&self, t: NodeId) -> Option<BitVec> {
        self.leaf_value(t)
    }

    fn lookup(&self, t: NodeId, input: &[u8]) -> BitVec {
        self.lookup_checked(t, input).expect("assignment covers every tested byte")
    }

    fn tabulate(&self, t: NodeId, bytes: usize) -> Vec<BitVec> {
        let mut out = vec![BitVec::zero(1); 1 << (8 * bytes)];
        self.fill(t, 0, bytes, &mut out);
        out
    }

    fn satisfying_cubes(&mut self, t: NodeId) -> Vec<Cube> {
        let mut out = Vec::new();
        self.cubes_into(t, &mut Vec::new(), &mut out);
        out
    }

    fn leaves(&self, t: NodeId) -> Vec<BitVec> {
        let mut v: Vec<BitVec> = self.reachable(&[t]).into_iter().filter_map(|i| self.leaf_value(i)).collect();
        v.sort();
        v
    }

    fn to_term(&mut self, t: NodeId, b: &mut Builder, inputs: &[Nid]) -> Nid {
        let mut memo = HashMap::new();
        self.term_rec(t, b, inputs, &mut memo)
    }

    /// Decision nodes only: terminal values are not structure, just as a
    /// CFLOBVDD keeps its values outside its groupings.
    fn structure_count(&self, roots: &[NodeId]) -> usize {
        self.internal_count(roots)
    }

    fn table_size(&self) -> usize {
        self.nodes.len()
    }

    fn name(&self) -> String {
        "ROABVDD".into()
    }
}

impl Roabvdd {
    fn term_rec(&self, id: NodeId, b: &mut Builder, inputs: &[Nid], memo: &mut HashMap<NodeId, Nid>) -> Nid {
        if let Some(&n) = memo.get(&id) {
            return n;
        }
        let n = match &self.nodes[id as usize] {
            RNode::Leaf(v) => b.constant(*v),
            RNode::Internal { var, edges } => {
                let x = inputs[*var as usize];
                // The edge with the most ranges becomes the untested default.
                let default = (0..edges.len()).max_by_key(|&i| edges[i].0.ranges().len()).unwrap();
                let mut acc = self.term_rec(edges[default].1, b, inputs, memo);
                for (i, &(s, c)) in edges.iter().enumerate().rev() {
                    if i == default {
                        continue;
                    }
                    let child = self.term_rec(c, b, inputs, memo);
                    let cond = membership_term(b, x, 8, s);
                    acc = b.ite(cond, child, acc);
                }
                acc
            }
        };
        memo.insert(id, n);
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::Sort;
    use crate::eval::{Evaluator, InputLayout};

    fn k8(v: u64) -> BitVec {
        BitVec::from_u64(8, v)
    }

    #[test]
    fn tabulate_matches_lookup() {
        let mut r = Roabvdd::new();
        let (x, y) = (r.input_byte(0), r.input_byte(1));
        let t = r.binary(BinaryOp::Udiv, x, y);
        let inputs = crate::eval::all_assignments(2);
        let looked: Vec<BitVec> = inputs.iter().map(|i| r.lookup(t, i)).collect();
        assert_eq!(r.tabulate(t, 2), looked);
        // Byte 0 is a don't-care of `y`.
        let only_y: Vec<BitVec> = inputs.iter().map(|i| r.lookup(y, i)).collect();
        assert_eq!(r.tabulate(y, 2), only_y);
    }

    #[test]
    fn leaves_are_canonical() {
        let mut r = Roabvdd::new();
        let a = r.leaf(k8(7));
        assert_eq!(a, r.leaf(k8(7)));
        assert_ne!(a, r.leaf(k8(8)));
        assert_eq!(r.lookup(a, &[]), k8(7));
    }

    #[test]
    fn variables_project() {
        let mut r = Roabvdd::new();
        let x0 = r.var(0);
        assert_eq!(r.lookup(x0, &[77]), k8(77));
        assert_eq!(r.leaves(x0).len(), 256);
        let x2 = r.var(2);
        assert_eq!(r.lookup(x2, &[1, 2, 3]), k8(3));
    }

    #[test]
    fn eq_48_and_annihilator() {
        let mut r = Roabvdd::new();
        let x = r.var(0);
        let c = r.leaf(k8(48));
        let e = r.binary(BinaryOp::Eq, x, c);
        assert_eq!(r.satisfying_cubes(e), vec![vec![(0, ByteSet::singleton(48))]]);
        let z = r.leaf(k8(0));
        let a = r.binary(BinaryOp::And, x, z);
        assert_eq!(a, z);
        let one = r.leaf(BitVec::bool(true));
        let zero = r.leaf(BitVec::bool(false));
        assert_eq!(r.ite(e, one, zero), e);
        let y = r.var(1);
        let s = r.binary(BinaryOp::Add, x, y);
        assert_eq!(r.lookup(s, &[3, 4]), k8(7));
    }

    #[test]
    fn slice_of_extension_collapses() {
        let mut r = Roabvdd::new();
        let x = r.var(0);
        let w = r.unary(UnaryOp::Uext(8), x);
        let back = r.unary(UnaryOp::Slice { hi: 7, lo: 0 }, w);
        assert_eq!(back, x);
    }

    #[test]
    fn term_matches_lookup() {
        let mut r = Roabvdd::new();
        let x = r.var(0);
        let y = r.var(1);
        let k = r.leaf(k8(48));
        let ex = r.binary(BinaryOp::Ult, x, k);
        let ey = r.binary(BinaryOp::Eq, y, k);
        let both = r.binary(BinaryOp::Or, ex, ey);
        let mut b = Builder::new();
        let i0 = b.state(Sort::Bitvec(8), Some("x"));
        let i1 = b.state(Sort::Bitvec(8), Some("y"));
        let t = r.to_term(both, &mut b, &[i0, i1]);
        b.bad(t, "t");
        let m = b.finish();
        let layout = InputLayout::new(&m, None).unwrap();
        let mut ev = Evaluator::new(&m);
        for v0 in (0..=255u8).step_by(3) {
            for v1 in [0u8, 47, 48, 49] {
                let s = ev.init_state(&layout, &[v0, v1]).unwrap();
                let got = ev.eval_node(&s, t).unwrap().as_bv().unwrap();
                assert_eq!(got, r.lookup(both, &[v0, v1]));
            }
        }
    }
}
