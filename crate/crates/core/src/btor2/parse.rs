use std::collections::HashMap;

use thiserror::Error;

use super::{validate, ConstFormat, Model, Nid, Node, Op};
use crate::bitvec::{BinaryOp, BitVec, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: node {id} refers to undefined node {operand}")]
    ForwardReference { line: usize, id: Nid, operand: Nid },
    #[error("line {line}: {msg}")]
    Sort { line: usize, msg: String },
    #[error("line {line}: unsupported operator '{op}'")]
    Unsupported { line: usize, op: String },
}

/// Parses BTOR2 text into a validated model.
pub fn parse(text: &str) -> Result<Model, ParseError> {
    let mut model = Model::new();
    let mut lines: HashMap<Nid, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(';').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let node = parse_line(&model, &tokens, line)?;
        if node.id <= model.max_id() {
            return Err(ParseError::Syntax {
                line,
                msg: format!("node id {} does not exceed previous id {}", node.id, model.max_id()),
            });
        }
        for &operand in node.args.iter().chain(node.sort.iter()) {
            if model.node(operand).is_none() {
                return Err(ParseError::ForwardReference { line, id: node.id, operand });
            }
        }
        lines.insert(node.id, line);
        model.push(node);
    }
    if let Some(d) = validate(&model).into_iter().next() {
        let line = lines.get(&d.id).copied().unwrap_or(0);
        return Err(ParseError::Sort { line, msg: d.message });
    }
    Ok(model)
}

struct Cursor<'a> {
    tokens: &'a [&'a str],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, msg: msg.into() }
    }

    fn word(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let t = self.tokens.get(self.pos).ok_or_else(|| self.syntax(format!("missing {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn number(&mut self, what: &str) -> Result<u64, ParseError> {
        let t = self.word(what)?;
        t.parse::<u64>().map_err(|_| self.syntax(format!("expected {what}, found '{t}'")))
    }

    fn operand(&mut self) -> Result<Nid, ParseError> {
        let t = self.word("operand")?;
        if t.starts_with('-') {
            return Err(self.syntax(format!("negated operand '{t}' is not supported")));
        }
        match t.parse::<Nid>() {
            Ok(0) | Err(_) => Err(self.syntax(format!("expected operand id, found '{t}'"))),
            Ok(id) => Ok(id),
        }
    }

    fn symbol(&mut self) -> Result<Option<String>, ParseError> {
        let sym = self.tokens.get(self.pos).map(|s| s.to_string());
        if sym.is_some() {
            self.pos += 1;
        }
        if self.pos < self.tokens.len() {
            return Err(self.syntax(format!("unexpected token '{}'", self.tokens[self.pos])));
        }
        Ok(sym)
    }
}

fn unary_op(kw: &str) -> Option<UnaryOp> {
    Some(match kw {
        "not" => UnaryOp::Not,
        "neg" => UnaryOp::Neg,
        "inc" => UnaryOp::Inc,
        "dec" => UnaryOp::Dec,
        "redand" => UnaryOp::Redand,
        "redor" => UnaryOp::Redor,
        "redxor" => UnaryOp::Redxor,
        _ => return None,
    })
}

fn parse_line(model: &Model, tokens: &[&str], line: usize) -> Result<Node, ParseError> {
    let mut c = Cursor { tokens, pos: 0, line };
    let id_tok = c.word("node id")?;
    let id = match id_tok.parse::<Nid>() {
        Ok(id) if id > 0 => id,
        _ => return Err(c.syntax(format!("expected positive node id, found '{id_tok}'"))),
    };
    let kw = c.word("operator")?;
    let mut node = Node { id, op: Op::Input, sort: None, args: vec![], symbol: None };
    match kw {
        "sort" => match c.word("sort kind")? {
            "bitvec" => {
                let w = c.number("width")?;
                if !(1..=256).contains(&w) {
                    return Err(c.syntax(format!("bitvector width {w} outside 1..=256")));
                }
                node.op = Op::SortBitvec(w as u32);
            }
            "array" => {
                node.op = Op::SortArray;
                node.args = vec![c.operand()?, c.operand()?];
            }
            other => return Err(c.syntax(format!("unknown sort kind '{other}'"))),
        },
        "const" | "constd" | "consth" | "zero" | "one" | "ones" => {
            let sid = c.operand()?;
            node.sort = Some(sid);
            let width = model
                .sort_of(sid)
                .and_then(|s| s.bitvec_width())
                .ok_or_else(|| ParseError::Sort {
                    line,
                    msg: format!("constant sort {sid} is not a bitvector sort"),
                })?;
            let lit = |c: &mut Cursor| -> Result<(ConstFormat, BitVec), ParseError> {
                let bad = |e| ParseError::Syntax { line, msg: format!("{e}") };
                Ok(match kw {
                    "const" => {
                        let s = c.word("binary literal")?;
                        (ConstFormat::Binary, BitVec::from_binary_str(width, s).map_err(bad)?)
                    }
                    "constd" => {
                        let s = c.word("decimal literal")?;
                        (ConstFormat::Decimal, BitVec::from_decimal_str(width, s).map_err(bad)?)
                    }
                    "consth" => {
                        let s = c.word("hex literal")?;
                        (ConstFormat::Hex, BitVec::from_hex_str(width, s).map_err(bad)?)
                    }
                    "zero" => (ConstFormat::Zero, BitVec::zero(width)),
                    "one" => (ConstFormat::One, BitVec::one(width)),
                    _ => (ConstFormat::Ones, BitVec::ones(width)),
                })
            };
            let (format, value) = lit(&mut c)?;
            node.op = Op::Const(format, value);
        }
        "input" | "state" => {
            node.op = if kw == "input" { Op::Input } else { Op::State };
            node.sort = Some(c.operand()?);
        }
        "init" | "next" => {
            node.op = if kw == "init" { Op::Init } else { Op::Next };
            node.sort = Some(c.operand()?);
            node.args = vec![c.operand()?, c.operand()?];
        }
        "bad" | "constraint" => {
            node.op = if kw == "bad" { Op::Bad } else { Op::Constraint };
            node.args = vec![c.operand()?];
        }
        "sext" | "uext" => {
            node.sort = Some(c.operand()?);
            node.args = vec![c.operand()?];
            let n = c.number("extension width")? as u32;
            node.op = Op::Unary(if kw == "sext" { UnaryOp::Sext(n) } else { UnaryOp::Uext(n) });
        }
        "slice" => {
            node.sort = Some(c.operand()?);
            node.args = vec![c.operand()?];
            let hi = c.number("upper bit")? as u32;
            let lo = c.number("lower bit")? as u32;
            node.op = Op::Unary(UnaryOp::Slice { hi, lo });
        }
        "ite" | "write" => {
            node.op = if kw == "ite" { Op::Ite } else { Op::Write };
            node.sort = Some(c.operand()?);
            node.args = vec![c.operand()?, c.operand()?, c.operand()?];
        }
        "read" => {
            node.op = Op::Read;
            node.sort = Some(c.operand()?);
            node.args = vec![c.operand()?, c.operand()?];
        }
        "fair" | "justice" | "output" => {
            return Err(ParseError::Unsupported { line, op: kw.to_string() });
        }
        _ => {
            if let Some(op) = unary_op(kw) {
                node.op = Op::Unary(op);
                node.sort = Some(c.operand()?);
                node.args = vec![c.operand()?];
            } else if let Some(op) = BinaryOp::from_name(kw) {
                node.op = Op::Binary(op);
                node.sort = Some(c.operand()?);
                node.args = vec![c.operand()?, c.operand()?];
            } else {
                return Err(ParseError::Unsupported { line, op: kw.to_string() });
            }
        }
    }
    node.symbol = c.symbol()?;
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::Sort;

    #[test]
    fn sorts() {
        let m = parse("1 sort bitvec 64").unwrap();
        assert_eq!(m.sort_of(1), Some(Sort::Bitvec(64)));
        let m = parse("1 sort bitvec 8\n2 sort bitvec 64\n3 sort array 1 2").unwrap();
        assert_eq!(m.sort_of(3), Some(Sort::Array { index: 8, element: 64 }));
    }

    #[test]
    fn uninitialized_bad_state() {
        let m = parse("1 sort bitvec 1\n2 state 1\n3 bad 2").unwrap();
        assert_eq!(m.inputs(), vec![2]);
        assert_eq!(m.bads().len(), 1);
        assert_eq!(m.bads()[0].cond, 2);
        assert_eq!(m.bads()[0].name, "b0");
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("1 sort bitvec 8\n2 add 1 3 4"), Err(ParseError::ForwardReference { line: 2, .. })));
        assert!(matches!(parse("1 sort bitvec 8\n2 state 1\n3 fair 2"), Err(ParseError::Unsupported { .. })));
        assert!(matches!(parse("1 sort bitvec 8\n2 frobnicate 1"), Err(ParseError::Unsupported { .. })));
        assert!(matches!(parse("1 sort bitvec 8\n2 state 1\n3 not 1 -2"), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("1 sort bitvec 8\n2 state 1\n3 bad 2"),
            Err(ParseError::Sort { line: 3, .. })
        ));
        assert!(matches!(parse("2 sort bitvec 8\n1 sort bitvec 4"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn comments_and_constants() {
        let m = parse(
            "; header\n1 sort bitvec 8 ; byte\n2 constd 1 -1\n3 consth 1 ff\n4 const 1 11111111\n5 eq 1 2 3",
        );
        assert!(m.is_err(), "eq must produce a 1-bit sort");
        let m = parse("1 sort bitvec 8\n2 sort bitvec 1\n3 constd 2 1\n4 constd 1 -1\n5 consth 1 ff\n6 eq 2 4 5 same")
            .unwrap();
        assert_eq!(m.symbol(6), Some("same"));
    }
}
