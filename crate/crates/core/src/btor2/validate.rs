use std::collections::{HashMap, HashSet};

use super::{Model, Nid, Op, Sort};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub id: Nid,
    pub message: String,
}

/// Structural checks: operand ordering, sort signatures, one init/next per
/// state, and disjoint bad/constraint conditions. Empty result means valid.
pub fn validate(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut inits: HashMap<Nid, usize> = HashMap::new();
    let mut nexts: HashMap<Nid, usize> = HashMap::new();
    for n in model.nodes() {
        let mut report = |message: String| out.push(Diagnostic { id: n.id, message });
        let mut operands_ok = true;
        for &a in &n.args {
            if a >= n.id || model.node(a).is_none() {
                report(format!("operand {a} is not defined before node {}", n.id));
                operands_ok = false;
            }
        }
        if !operands_ok {
            continue;
        }
        let arg = |i: usize| model.sort_of(n.args[i]);
        let own = model.sort_of(n.id);
        let needs_sort = !matches!(n.op, Op::SortBitvec(_) | Op::SortArray | Op::Bad | Op::Constraint);
        if needs_sort && own.is_none() {
            report(format!("sort reference {:?} does not name a sort", n.sort));
            continue;
        }
        let arity = match n.op {
            Op::SortBitvec(_) | Op::Const(..) | Op::Input | Op::State => 0,
            Op::Bad | Op::Constraint | Op::Unary(_) => 1,
            Op::SortArray | Op::Init | Op::Next | Op::Binary(_) | Op::Read => 2,
            Op::Ite | Op::Write => 3,
        };
        if n.args.len() != arity {
            report(format!("expected {arity} operands, found {}", n.args.len()));
            continue;
        }
        match &n.op {
            Op::SortBitvec(w) => {
                if !(1..=256).contains(w) {
                    report(format!("bitvector width {w} outside 1..=256"));
                }
            }
            Op::SortArray => {
                for &a in &n.args {
                    match model.node(a).map(|x| &x.op) {
                        Some(Op::SortBitvec(_)) => {}
                        Some(Op::SortArray) => report("nested array sorts are not supported".into()),
                        _ => report(format!("array sort operand {a} is not a sort")),
                    }
                }
            }
            Op::Const(_, v) => {
                if own != Some(Sort::Bitvec(v.width())) {
                    report(format!("constant of width {} has sort {own:?}", v.width()));
                }
            }
            Op::Input | Op::State => {}
            Op::Init | Op::Next => {
                let state = n.args[0];
                if !matches!(model.node(state).map(|x| &x.op), Some(Op::State)) {
                    report(format!("{} target {state} is not a state", n.op.keyword()));
                    continue;
                }
                let ss = model.sort_of(state);
                if own != ss {
                    report(format!("{} sort {own:?} differs from state sort {ss:?}", n.op.keyword()));
                }
                let value = arg(1);
                let constant_array_init = matches!(
                    (n.op.clone(), ss, value),
                    (Op::Init, Some(Sort::Array { element, .. }), Some(Sort::Bitvec(w))) if element == w
                );
                if value != ss && !constant_array_init {
                    report(format!("{} value sort {value:?} differs from state sort {ss:?}", n.op.keyword()));
                }
                let counter = if n.op == Op::Init { &mut inits } else { &mut nexts };
                let seen = counter.entry(state).or_insert(0);
                *seen += 1;
                if *seen > 1 {
                    report(format!("state {state} has more than one {}", n.op.keyword()));
                }
            }
            Op::Bad | Op::Constraint => {
                if arg(0) != Some(Sort::Bitvec(1)) {
                    report(format!("{} condition must be 1-bit, found {:?}", n.op.keyword(), arg(0)));
                }
            }
            Op::Unary(u) => match arg(0) {
                Some(Sort::Bitvec(w)) => match u.result_width(w) {
                    Ok(r) if own == Some(Sort::Bitvec(r)) => {}
                    Ok(r) => report(format!("{} yields width {r}, sort is {own:?}", u.name())),
                    Err(e) => report(e.to_string()),
                },
                s => report(format!("{} operand has sort {s:?}", u.name())),
            },
            Op::Binary(b) => match (arg(0), arg(1)) {
                (Some(Sort::Bitvec(l)), Some(Sort::Bitvec(r))) => match b.result_width(l, r) {
                    Ok(w) if own == Some(Sort::Bitvec(w)) => {}
                    Ok(w) => report(format!("{} yields width {w}, sort is {own:?}", b.name())),
                    Err(e) => report(e.to_string()),
                },
                (l, r) => report(format!("{} operands have sorts {l:?}, {r:?}", b.name())),
            },
            Op::Ite => {
                if arg(0) != Some(Sort::Bitvec(1)) {
                    report(format!("ite condition must be 1-bit, found {:?}", arg(0)));
                }
                if arg(1) != arg(2) || arg(1) != own {
                    report(format!("ite sorts {:?}/{:?} do not match {own:?}", arg(1), arg(2)));
                }
            }
            Op::Read => match arg(0) {
                Some(Sort::Array { index, element }) => {
                    if arg(1) != Some(Sort::Bitvec(index)) {
                        report(format!("read index sort {:?} differs from {index}-bit index", arg(1)));
                    }
                    if own != Some(Sort::Bitvec(element)) {
                        report(format!("read sort {own:?} differs from {element}-bit element"));
                    }
                }
                s => report(format!("read from non-array sort {s:?}")),
            },
            Op::Write => match arg(0) {
                Some(Sort::Array { index, element }) => {
                    if arg(1) != Some(Sort::Bitvec(index)) {
                        report(format!("write index sort {:?} differs from {index}-bit index", arg(1)));
                    }
                    if arg(2) != Some(Sort::Bitvec(element)) {
                        report(format!("write value sort {:?} differs from {element}-bit element", arg(2)));
                    }
                    if own != arg(0) {
                        report(format!("write sort {own:?} differs from array sort {:?}", arg(0)));
                    }
                }
                s => report(format!("write to non-array sort {s:?}")),
            },
        }
    }
    let bad_conds: HashSet<Nid> = model.bads().iter().map(|p| p.cond).collect();
    for c in model.constraints() {
        if bad_conds.contains(&c.cond) {
            out.push(Diagnostic {
                id: c.line,
                message: format!("condition {} is both a bad and a constraint", c.cond),
            });
        }
    }
    out
}
