use std::fmt::Write;

use super::{ConstFormat, Model, Op};
use crate::bitvec::UnaryOp;

/// Prints a model back to BTOR2 text, one node per line in id order.
pub fn print(model: &Model) -> String {
    let mut out = String::new();
    for n in model.nodes() {
        let mut line = format!("{} {}", n.id, n.op.keyword());
        match &n.op {
            Op::SortBitvec(w) => {
                let _ = write!(line, " bitvec {w}");
            }
            Op::SortArray => {
                let _ = write!(line, " array {} {}", n.args[0], n.args[1]);
            }
            _ => {
                if let Some(s) = n.sort {
                    let _ = write!(line, " {s}");
                }
                for a in &n.args {
                    let _ = write!(line, " {a}");
                }
            }
        }
        match &n.op {
            Op::Const(ConstFormat::Binary, v) => {
                let _ = write!(line, " {}", v.to_binary_string());
            }
            Op::Const(ConstFormat::Decimal, v) => {
                let _ = write!(line, " {}", v.to_decimal_string());
            }
            Op::Const(ConstFormat::Hex, v) => {
                let _ = write!(line, " {}", v.to_hex_string());
            }
            Op::Unary(UnaryOp::Sext(w)) | Op::Unary(UnaryOp::Uext(w)) => {
                let _ = write!(line, " {w}");
            }
            Op::Unary(UnaryOp::Slice { hi, lo }) => {
                let _ = write!(line, " {hi} {lo}");
            }
            _ => {}
        }
        if let Some(sym) = &n.symbol {
            let _ = write!(line, " {sym}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::parse;

    #[test]
    fn empty_model_prints_nothing() {
        assert_eq!(print(&Model::new()), "");
    }

    #[test]
    fn round_trip_preserves_symbols_and_formats() {
        let text = "1 sort bitvec 8\n2 sort bitvec 1\n3 sort array 1 1\n4 state 1 in-byte\n\
                    5 constd 1 48\n6 consth 1 2f\n7 const 1 00000001\n8 ones 1\n9 eq 2 4 5\n\
                    10 state 3 buffer\n11 read 1 10 4\n12 slice 2 11 3 3\n13 sext 1 12 7\n\
                    14 bad 9 found-zero\n15 init 1 4 6\n";
        let m = parse(text).unwrap();
        let printed = print(&m);
        assert_eq!(printed, text);
        assert_eq!(parse(&printed).unwrap(), m);
    }
}
