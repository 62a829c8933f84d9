//! k-unrolling: composes the transition function k times so that the
//! resulting model checks at step 0 what the original checks at step k.

use std::collections::HashMap;

use crate::btor2::{Builder, Model, Nid, Op, Sort};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnrollMode {
    /// Rewrites only the cone of the properties, substituting each state by
    /// the term of its previous step on demand.
    Substitution,
    /// Copies every transition function once per step.
    Duplication,
}

struct Unroller<'m> {
    src: &'m Model,
    b: Builder,
    /// (position, step) -> term.
    memo: HashMap<(usize, u32), Nid>,
    /// State position -> uninitialized state, the same at every step.
    fixed: HashMap<usize, Nid>,
    /// Array state position -> its constant-array state, the step-0 value.
    const_arrays: HashMap<usize, Nid>,
}

impl Unroller<'_> {
    fn args(&self, p: usize) -> Vec<usize> {
        self.src.nodes()[p].args.iter().map(|&a| self.src.position(a).expect("arg exists")).collect()
    }

    /// Dependencies of `(p, step)` that must be built first.
    fn deps(&self, p: usize, step: u32) -> Vec<(usize, u32)> {
        let n = &self.src.nodes()[p];
        match &n.op {
            Op::State if self.fixed.contains_key(&p) => Vec::new(),
            Op::State if step == 0 && self.const_arrays.contains_key(&p) => Vec::new(),
            Op::State if step == 0 => {
                let init = self.src.init_of(n.id).expect("initialized state");
                vec![(self.src.position(init).unwrap(), 0)]
            }
            Op::State => match self.src.next_of(n.id) {
                Some(nx) => vec![(self.src.position(nx).unwrap(), step - 1)],
                None => vec![(p, step - 1)],
            },
            op if op.is_combinational() => self.args(p).into_iter().map(|a| (a, step)).collect(),
            _ => Vec::new(),
        }
    }

    fn build(&mut self, p: usize, step: u32) -> Nid {
        let n = &self.src.nodes()[p];
        let arg = |u: &Self, i: usize| u.memo[&(u.src.position(n.args[i]).unwrap(), step)];
        match &n.op {
            Op::Const(_, v) => self.b.constant(*v),
            Op::State => {
                if let Some(&f) = self.fixed.get(&p) {
                    return f;
                }
                if step == 0 {
                    if let Some(&c) = self.const_arrays.get(&p) {
                        return c;
                    }
                }
                let dep = self.deps(p, step)[0];
                self.memo[&dep]
            }
            Op::Unary(op) => {
                let a = arg(self, 0);
                self.b.unary(*op, a)
            }
            Op::Binary(op) => {
                let (a, c) = (arg(self, 0), arg(self, 1));
                self.b.binary(*op, a, c)
            }
            Op::Ite => {
                let (c, t, e) = (arg(self, 0), arg(self, 1), arg(self, 2));
                self.b.ite(c, t, e)
            }
            Op::Read => {
                let (a, i) = (arg(self, 0), arg(self, 1));
                self.b.read(a, i)
            }
            Op::Write => {
                let (a, i, v) = (arg(self, 0), arg(self, 1), arg(self, 2));
                self.b.write(a, i, v)
            }
            other => panic!("node {} ({}) has no value", n.id, other.keyword()),
        }
    }

    /// Builds `(p, step)` and everything it depends on without recursion.
    fn term(&mut self, p: usize, step: u32) -> Nid {
        let mut stack = vec![(p, step, false)];
        while let Some((q, s, expanded)) = stack.pop() {
            if self.memo.contains_key(&(q, s)) {
                continue;
            }
            if expanded {
                let t = self.build(q, s);
                self.memo.insert((q, s), t);
                continue;
            }
            stack.push((q, s, true));
            for d in self.deps(q, s) {
                if !self.memo.contains_key(&d) {
                    stack.push((d.0, d.1, false));
                }
            }
        }
        self.memo[&(p, step)]
    }
}

/// The k-unrolled model: uninitialized states stay as its inputs (declared
/// first, in the original order), and its bads and constraints at step 0
/// are the original bads at step `k` and constraints at every step up to
/// `k`. The only sequential lines left are bitvector inits of array states,
/// which is how BTOR2 spells constant arrays.
pub fn unroll(model: &Model, k: u32, mode: UnrollMode) -> Model {
    let mut u = Unroller {
        src: model,
        b: Builder::new(),
        memo: HashMap::new(),
        fixed: HashMap::new(),
        const_arrays: HashMap::new(),
    };
    for s in model.inputs() {
        let sort = model.sort_of(s).expect("state sort");
        let t = u.b.state(sort, model.symbol(s));
        u.fixed.insert(model.position(s).unwrap(), t);
    }
    for &s in model.states() {
        let Some(init) = model.init_of(s) else { continue };
        if let (Some(sort @ Sort::Array { .. }), Some(Sort::Bitvec(_))) = (model.sort_of(s), model.sort_of(init)) {
            let v = u.term(model.position(init).unwrap(), 0);
            let t = u.b.state(sort, model.symbol(s));
            u.b.init(t, v);
            u.const_arrays.insert(model.position(s).unwrap(), t);
        }
    }
    if mode == UnrollMode::Duplication {
        for step in 0..=k {
            for p in 0..model.len() {
                let op = &model.nodes()[p].op;
                if op.is_combinational() || *op == Op::State || matches!(op, Op::Const(..)) {
                    u.term(p, step);
                }
            }
        }
    }
    for c in model.constraints() {
        let p = model.position(c.cond).unwrap();
        for step in 0..=k {
            let t = u.term(p, step);
            u.b.constraint(t, &format!("{}@{step}", c.name));
        }
    }
    for bad in model.bads() {
        let t = u.term(model.position(bad.cond).unwrap(), k);
        u.b.bad(t, &bad.name);
    }
    u.b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::{parse, validate};
    use crate::eval::{InputLayout, Evaluator};

    const COUNTER: &str = "\
1 sort bitvec 1
2 sort bitvec 8
3 state 2 x
4 state 2 n
5 zero 2
6 init 2 4 5
7 one 2
8 add 2 4 7
9 next 2 4 8
10 add 2 3 4
11 constd 2 50
12 eq 1 10 11
13 bad 12
";

    #[test]
    fn zero_unroll_is_the_combinational_slice() {
        let m = parse(COUNTER).unwrap();
        let u = unroll(&m, 0, UnrollMode::Substitution);
        assert!(validate(&u).is_empty());
        assert!(u.nodes().iter().all(|n| n.op != Op::Next && n.op != Op::Init));
        let text = crate::btor2::print(&u);
        assert!(text.contains("state 1 x"), "{text}");
    }

    const MEMORY: &str = "\
1 sort bitvec 1
2 sort bitvec 8
3 sort bitvec 2
4 sort array 3 2
5 state 2 x
6 state 4 mem
7 zero 2
8 init 4 6 7
9 zero 3
10 write 4 6 9 5
11 next 4 6 10
12 read 2 6 9
13 constd 2 5
14 eq 1 12 13
15 bad 14
";

    #[test]
    fn constant_array_is_only_the_first_step() {
        let m = parse(MEMORY).unwrap();
        let layout = InputLayout::new(&m, None).unwrap();
        for k in 0..3 {
            let u = unroll(&m, k, UnrollMode::Substitution);
            assert!(validate(&u).is_empty());
            let ul = InputLayout::new(&u, None).unwrap();
            for x in [0u8, 5, 7] {
                let stepped = Evaluator::new(&m).k_satisfies(&layout, &[x], k, 0).unwrap();
                assert_eq!(stepped, k > 0 && x == 5);
                assert_eq!(Evaluator::new(&u).k_satisfies(&ul, &[x], 0, 0).unwrap(), stepped, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn unrolled_bad_matches_stepping() {
        let m = parse(COUNTER).unwrap();
        let layout = InputLayout::new(&m, None).unwrap();
        for k in 0..4 {
            for mode in [UnrollMode::Substitution, UnrollMode::Duplication] {
                let u = unroll(&m, k, mode);
                let ul = InputLayout::new(&u, None).unwrap();
                for x in 0..=255u8 {
                    let stepped = Evaluator::new(&m).k_satisfies(&layout, &[x], k, 0).unwrap();
                    let flat = Evaluator::new(&u).k_satisfies(&ul, &[x], 0, 0).unwrap();
                    assert_eq!(stepped, flat, "k={k} x={x} {mode:?}");
                }
            }
        }
    }
}
