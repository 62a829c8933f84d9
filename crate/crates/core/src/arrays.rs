//! Replaces small arrays by one bitvector state per element so that values
//! stored in memory can be propagated like any other state.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::btor2::{Builder, Model, Nid, Op, Sort};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArrayError {
    #[error("array conversion supports index widths of at most {max} bits, {got} requested")]
    TooWide { max: u32, got: u32 },
    #[error("node {0}: array inputs cannot be converted")]
    ArrayInput(Nid),
}

pub const MAX_CONVERTED_INDEX_BITS: u32 = 16;

#[derive(Clone)]
enum Conv {
    Node(Nid),
    Elems(Rc<Vec<Nid>>),
}

struct Converter<'m> {
    src: &'m Model,
    b: Builder,
    map: HashMap<Nid, Conv>,
    max_bits: u32,
    recursive: bool,
}

impl Converter<'_> {
    fn converts(&self, sort: Option<Sort>) -> bool {
        matches!(sort, Some(Sort::Array { index, .. }) if index <= self.max_bits)
    }

    fn node(&self, id: Nid) -> Nid {
        match &self.map[&id] {
            Conv::Node(n) => *n,
            Conv::Elems(_) => panic!("node {id} was converted to elements"),
        }
    }

    /// Elements of a converted array expression. A bitvector in array
    /// position denotes the constant array.
    fn elems(&self, id: Nid, count: usize) -> Rc<Vec<Nid>> {
        match &self.map[&id] {
            Conv::Elems(e) => e.clone(),
            Conv::Node(n) => Rc::new(vec![*n; count]),
        }
    }

    fn const_index(&self, i: Nid) -> Option<usize> {
        match &self.b.model().node(i)?.op {
            Op::Const(_, v) => v.to_u64().map(|v| v as usize),
            _ => None,
        }
    }

    fn select(&mut self, elems: &[Nid], index: Nid, index_bits: u32) -> Nid {
        if let Some(k) = self.const_index(index) {
            return elems[k];
        }
        if self.recursive {
            self.select_tree(elems, index, index_bits)
        } else {
            let mut acc = *elems.last().unwrap();
            for k in (0..elems.len() - 1).rev() {
                let kk = self.b.const_u64(index_bits, k as u64);
                let hit = self.b.eq(index, kk);
                acc = self.b.ite(hit, elems[k], acc);
            }
            acc
        }
    }

    /// Binary search on the index bits, most significant first.
    fn select_tree(&mut self, elems: &[Nid], index: Nid, bits: u32) -> Nid {
        if elems.len() == 1 {
            return elems[0];
        }
        let half = elems.len() / 2;
        let lo = self.select_tree(&elems[..half], index, bits - 1);
        let hi = self.select_tree(&elems[half..], index, bits - 1);
        let bit = self.b.slice(index, bits - 1, bits - 1);
        self.b.ite(bit, hi, lo)
    }

    fn store(&mut self, elems: &[Nid], index: Nid, value: Nid, index_bits: u32) -> Vec<Nid> {
        if let Some(k) = self.const_index(index) {
            let mut out = elems.to_vec();
            out[k] = value;
            return out;
        }
        (0..elems.len())
            .map(|k| {
                let kk = self.b.const_u64(index_bits, k as u64);
                let hit = self.b.eq(index, kk);
                self.b.ite(hit, value, elems[k])
            })
            .collect()
    }

    fn run(mut self) -> Result<Model, ArrayError> {
        let src = self.src;
        for n in src.nodes() {
            let sort = src.sort_of(n.id);
            let conv = match &n.op {
                Op::SortBitvec(_) | Op::SortArray => continue,
                Op::Const(_, v) => Conv::Node(self.b.constant(*v)),
                Op::Input => {
                    if self.converts(sort) {
                        return Err(ArrayError::ArrayInput(n.id));
                    }
                    Conv::Node(self.b.input(sort.expect("input sort"), n.symbol.as_deref()))
                }
                Op::State => match sort {
                    Some(Sort::Array { index, element }) if index <= self.max_bits => {
                        let base = n.symbol.clone().unwrap_or_else(|| format!("array{}", n.id));
                        let elems = (0..1usize << index)
                            .map(|k| self.b.state(Sort::Bitvec(element), Some(&format!("{base}[{k}]"))))
                            .collect();
                        Conv::Elems(Rc::new(elems))
                    }
                    Some(s) => Conv::Node(self.b.state(s, n.symbol.as_deref())),
                    None => unreachable!("state without sort"),
                },
                Op::Init | Op::Next => {
                    let (state, value) = (n.args[0], n.args[1]);
                    match self.map[&state].clone() {
                        Conv::Elems(se) => {
                            let ve = self.elems(value, se.len());
                            for (s, v) in se.iter().zip(ve.iter()) {
                                if n.op == Op::Init {
                                    self.b.init(*s, *v);
                                } else {
                                    self.b.next(*s, *v);
                                }
                            }
                        }
                        Conv::Node(s) => {
                            let v = self.node(value);
                            if n.op == Op::Init {
                                self.b.init(s, v);
                            } else {
                                self.b.next(s, v);
                            }
                        }
                    }
                    continue;
                }
                Op::Bad | Op::Constraint => {
                    let c = self.node(n.args[0]);
                    let props = if n.op == Op::Bad { src.bads() } else { src.constraints() };
                    let name = props.iter().find(|p| p.line == n.id).map(|p| p.name.clone()).unwrap_or_default();
                    if n.op == Op::Bad {
                        self.b.bad(c, &name);
                    } else {
                        self.b.constraint(c, &name);
                    }
                    continue;
                }
                Op::Unary(op) => {
                    let a = self.node(n.args[0]);
                    Conv::Node(self.b.unary(*op, a))
                }
                Op::Binary(op) => {
                    let a = self.node(n.args[0]);
                    let c = self.node(n.args[1]);
                    Conv::Node(self.b.binary(*op, a, c))
                }
                Op::Ite => {
                    let c = self.node(n.args[0]);
                    if let Some(Sort::Array { index, .. }) = sort.filter(|_| self.converts(sort)) {
                        let count = 1usize << index;
                        let t = self.elems(n.args[1], count);
                        let e = self.elems(n.args[2], count);
                        let out = t.iter().zip(e.iter()).map(|(&x, &y)| self.b.ite(c, x, y)).collect();
                        Conv::Elems(Rc::new(out))
                    } else {
                        let t = self.node(n.args[1]);
                        let e = self.node(n.args[2]);
                        Conv::Node(self.b.ite(c, t, e))
                    }
                }
                Op::Read => {
                    let idx = self.node(n.args[1]);
                    match src.sort_of(n.args[0]) {
                        Some(Sort::Array { index, .. }) if index <= self.max_bits => {
                            let e = self.elems(n.args[0], 1 << index);
                            Conv::Node(self.select(&e, idx, index))
                        }
                        _ => {
                            let a = self.node(n.args[0]);
                            Conv::Node(self.b.read(a, idx))
                        }
                    }
                }
                Op::Write => {
                    let idx = self.node(n.args[1]);
                    let v = self.node(n.args[2]);
                    match sort {
                        Some(Sort::Array { index, .. }) if index <= self.max_bits => {
                            let e = self.elems(n.args[0], 1 << index);
                            Conv::Elems(Rc::new(self.store(&e, idx, v, index)))
                        }
                        _ => {
                            let a = self.node(n.args[0]);
                            Conv::Node(self.b.write(a, idx, v))
                        }
                    }
                }
            };
            self.map.insert(n.id, conv);
        }
        Ok(self.b.finish())
    }
}

/// Converts every array whose index is at most `max_index_bits` wide into
/// element states named `<symbol>[k]`, declared where the array was.
/// Reads become an ite chain over all indexes, or with `recursive` a binary
/// search over the index bits. Other arrays are kept.
pub fn convert_arrays(model: &Model, max_index_bits: u32, recursive: bool) -> Result<Model, ArrayError> {
    if max_index_bits > MAX_CONVERTED_INDEX_BITS {
        return Err(ArrayError::TooWide { max: MAX_CONVERTED_INDEX_BITS, got: max_index_bits });
    }
    Converter { src: model, b: Builder::new(), map: HashMap::new(), max_bits: max_index_bits, recursive }.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::{parse, print, validate};
    use crate::eval::{run_enumerated, InputLayout};

    const SMALL: &str = "\
1 sort bitvec 1
2 sort bitvec 8
3 sort array 1 2
4 state 3 mem
5 state 1 i
6 state 2 x
7 zero 2
8 init 3 4 7
9 write 3 4 5 6
10 next 3 4 9
11 read 2 4 5
12 constd 2 48
13 eq 1 11 12
14 bad 13
";

    #[test]
    fn one_bit_index_read_is_an_ite() {
        let m = parse(SMALL).unwrap();
        let c = convert_arrays(&m, 8, false).unwrap();
        assert!(validate(&c).is_empty());
        let text = print(&c);
        assert!(text.contains("mem[0]") && text.contains("mem[1]"), "{text}");
        assert!(!text.contains("read"), "{text}");
        assert!(text.contains(" ite "), "{text}");
    }

    #[test]
    fn recursive_tree_depth() {
        let mut b = Builder::new();
        let a = b.state(Sort::Array { index: 3, element: 8 }, Some("a"));
        let z = b.const_u64(8, 0);
        b.init(a, z);
        let i = b.state(Sort::Bitvec(3), Some("i"));
        let r = b.read(a, i);
        let k = b.const_u64(8, 1);
        let e = b.eq(r, k);
        b.bad(e, "b");
        let m = b.finish();
        let c = convert_arrays(&m, 8, true).unwrap();
        let ites = c.nodes().iter().filter(|n| n.op == Op::Ite).count();
        assert_eq!(ites, 7, "full binary tree over 8 leaves");
        let iter = convert_arrays(&m, 8, false).unwrap();
        assert_eq!(iter.nodes().iter().filter(|n| n.op == Op::Ite).count(), 7);
        let slices = c.nodes().iter().filter(|n| matches!(n.op, Op::Unary(crate::bitvec::UnaryOp::Slice { .. }))).count();
        assert_eq!(slices, 3);
    }

    #[test]
    fn conversion_preserves_semantics() {
        let text = "\
1 sort bitvec 1
2 sort bitvec 2
3 sort bitvec 8
4 sort array 2 3
5 state 4 input-buffer
6 state 4 mem
7 zero 3
8 init 4 6 7
9 state 2 k
10 zero 2
11 init 2 9 10
12 one 2
13 add 2 9 12
14 next 2 9 13
15 read 3 5 9
16 write 4 6 9 15
17 next 4 6 16
18 read 3 6 10
19 read 3 6 12
20 ugt 1 18 19
21 bad 20
";
        let m = parse(text).unwrap();
        let layout = InputLayout::new(&m, Some(2)).unwrap();
        let expect = run_enumerated(&m, &layout, 4).unwrap();
        for rec in [false, true] {
            let c = convert_arrays(&m, 8, rec).unwrap();
            assert!(validate(&c).is_empty());
            let l2 = InputLayout::new(&c, Some(2)).unwrap();
            assert!(run_enumerated(&c, &l2, 4).unwrap() == expect, "recursive={rec}");
        }
        let untouched = convert_arrays(&m, 1, false).unwrap();
        assert!(print(&untouched).contains("read"));
    }
}
