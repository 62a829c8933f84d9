//! SMT-LIB v2 export of residual terms and an external-solver session that
//! enumerates all satisfying input-byte assignments.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Instant;

use thiserror::Error;

use crate::bitvec::{BinaryOp, BitVec, UnaryOp};
use crate::btor2::{Model, Nid, Op, Sort};
use crate::tracker::{ByteSet, Cube};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("a residual query needs an SMT solver but none is configured")]
    NoSolver,
    #[error("cannot start solver '{0}': {1}")]
    Spawn(String, std::io::Error),
    #[error("solver timed out")]
    Timeout,
    #[error("solver answered unknown")]
    Unknown,
    #[error("solver protocol error: {0}")]
    Protocol(String),
}

fn sort_text(s: Sort) -> String {
    match s {
        Sort::Bitvec(w) => format!("(_ BitVec {w})"),
        Sort::Array { index, element } => format!("(Array (_ BitVec {index}) (_ BitVec {element}))"),
    }
}

fn lit(v: BitVec) -> String {
    format!("#b{}", v.to_binary_string())
}

fn name(id: Nid) -> String {
    format!("n{id}")
}

fn bool_to_bv(e: String) -> String {
    format!("(ite {e} #b1 #b0)")
}

fn unary_text(op: UnaryOp, a: &str, w: u32) -> String {
    match op {
        UnaryOp::Not => format!("(bvnot {a})"),
        UnaryOp::Neg => format!("(bvneg {a})"),
        UnaryOp::Inc => format!("(bvadd {a} {})", lit(BitVec::one(w))),
        UnaryOp::Dec => format!("(bvsub {a} {})", lit(BitVec::one(w))),
        UnaryOp::Redand => bool_to_bv(format!("(= {a} {})", lit(BitVec::ones(w)))),
        UnaryOp::Redor => bool_to_bv(format!("(distinct {a} {})", lit(BitVec::zero(w)))),
        UnaryOp::Redxor => {
            let bits: Vec<String> = (0..w).map(|i| format!("((_ extract {i} {i}) {a})")).collect();
            if bits.len() == 1 {
                bits[0].clone()
            } else {
                format!("(bvxor {})", bits.join(" "))
            }
        }
        UnaryOp::Sext(n) => format!("((_ sign_extend {n}) {a})"),
        UnaryOp::Uext(n) => format!("((_ zero_extend {n}) {a})"),
        UnaryOp::Slice { hi, lo } => format!("((_ extract {hi} {lo}) {a})"),
    }
}

fn binary_text(op: BinaryOp, a: &str, b: &str) -> String {
    use BinaryOp::*;
    let f = match op {
        Add => "bvadd",
        Sub => "bvsub",
        Mul => "bvmul",
        Udiv => "bvudiv",
        Urem => "bvurem",
        Sdiv => "bvsdiv",
        Srem => "bvsrem",
        And => "bvand",
        Or => "bvor",
        Xor => "bvxor",
        Sll => "bvshl",
        Srl => "bvlshr",
        Sra => "bvashr",
        Concat => "concat",
        Eq => return bool_to_bv(format!("(= {a} {b})")),
        Neq => return bool_to_bv(format!("(distinct {a} {b})")),
        Ult => return bool_to_bv(format!("(bvult {a} {b})")),
        Ulte => return bool_to_bv(format!("(bvule {a} {b})")),
        Ugt => return bool_to_bv(format!("(bvugt {a} {b})")),
        Ugte => return bool_to_bv(format!("(bvuge {a} {b})")),
        Slt => return bool_to_bv(format!("(bvslt {a} {b})")),
        Slte => return bool_to_bv(format!("(bvsle {a} {b})")),
        Sgt => return bool_to_bv(format!("(bvsgt {a} {b})")),
        Sgte => return bool_to_bv(format!("(bvsge {a} {b})")),
    };
    format!("({f} {a} {b})")
}

/// Nodes in the cone of `roots`, dependencies first. A state with an init
/// depends on its init value (the constant-array encoding).
fn cone(m: &Model, roots: &[Nid]) -> Vec<Nid> {
    let mut done: HashMap<Nid, bool> = HashMap::new();
    let mut order = Vec::new();
    let mut stack: Vec<(Nid, bool)> = roots.iter().rev().map(|&r| (r, false)).collect();
    while let Some((id, expanded)) = stack.pop() {
        if expanded {
            if done.insert(id, true) != Some(true) {
                order.push(id);
            }
            continue;
        }
        if done.contains_key(&id) {
            continue;
        }
        done.insert(id, false);
        stack.push((id, true));
        let n = m.node(id).expect("term exists");
        let deps: Vec<Nid> = match n.op {
            Op::State => m.init_of(id).into_iter().collect(),
            _ if n.op.is_combinational() => n.args.clone(),
            _ => Vec::new(),
        };
        for d in deps.into_iter().rev() {
            if !done.contains_key(&d) {
                stack.push((d, false));
            }
        }
    }
    order
}

/// SMT-LIB text declaring and defining the cone of `assertions` and asserting
/// each of them (1-bit terms) to be 1.
pub fn script(m: &Model, assertions: &[Nid]) -> String {
    let mut out = String::from("(set-option :produce-models true)\n(set-logic QF_ABV)\n");
    for id in cone(m, assertions) {
        let n = m.node(id).unwrap();
        let sort = m.sort_of(id).expect("term sort");
        let st = sort_text(sort);
        let args: Vec<String> = n.args.iter().map(|&a| name(a)).collect();
        let body = match &n.op {
            Op::State => match m.init_of(id) {
                None => {
                    let _ = writeln!(out, "(declare-const {} {st})", name(id));
                    continue;
                }
                Some(v) => format!("((as const {st}) {})", name(v)),
            },
            Op::Input => {
                let _ = writeln!(out, "(declare-const {} {st})", name(id));
                continue;
            }
            Op::Const(_, v) => lit(*v),
            Op::Unary(op) => unary_text(*op, &args[0], m.width_of(n.args[0]).unwrap()),
            Op::Binary(op) => binary_text(*op, &args[0], &args[1]),
            Op::Ite => format!("(ite (= {} #b1) {} {})", args[0], args[1], args[2]),
            Op::Read => format!("(select {} {})", args[0], args[1]),
            Op::Write => format!("(store {} {} {})", args[0], args[1], args[2]),
            other => panic!("node {id} ({}) cannot appear in a term", other.keyword()),
        };
        let _ = writeln!(out, "(define-fun {} () {st} {body})", name(id));
    }
    for &a in assertions {
        let _ = writeln!(out, "(assert (= {} #b1))", name(a));
    }
    out
}

/// A solver command line plus the command used to check satisfiability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: Vec<String>,
    pub check: String,
}

/// z3's default strategy runs expensive preprocessing before simplifying
/// away the constant parts of unfolded machine formulas; simplifying first
/// is orders of magnitude faster on them.
pub const Z3_CHECK: &str = "(check-sat-using (then simplify smt))";

impl SolverConfig {
    /// Splits a command template on whitespace; an empty template means no
    /// solver. z3 gets [`Z3_CHECK`], anything else plain `(check-sat)`.
    pub fn from_template(template: &str) -> Self {
        let command: Vec<String> = template.split_whitespace().map(str::to_string).collect();
        let is_z3 = command
            .first()
            .is_some_and(|p| std::path::Path::new(p).file_name().is_some_and(|n| n == "z3"));
        let check = if is_z3 { Z3_CHECK } else { "(check-sat)" }.to_string();
        SolverConfig { command, check }
    }

    pub fn is_configured(&self) -> bool {
        !self.command.is_empty()
    }
}

pub const DEFAULT_SOLVER: &str = "z3 -in -smt2";

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    deadline: Option<Instant>,
}

impl Session {
    fn start(cfg: &SolverConfig, deadline: Option<Instant>) -> Result<Session, SolverError> {
        let (prog, args) = cfg.command.split_first().ok_or(SolverError::NoSolver)?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Spawn(cfg.command.join(" "), e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session { child, stdin, lines: rx, deadline })
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SolverError::Protocol(format!("write failed: {e}")))
    }

    fn line(&mut self) -> Result<String, SolverError> {
        let r = match self.deadline {
            Some(d) => self.lines.recv_timeout(d.saturating_duration_since(Instant::now())),
            None => self.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        match r {
            Ok(l) => Ok(l),
            Err(RecvTimeoutError::Timeout) => Err(SolverError::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(SolverError::Protocol("solver exited".into())),
        }
    }

    /// Reads one balanced s-expression (or atom), possibly over several lines.
    fn sexpr(&mut self) -> Result<String, SolverError> {
        let mut text = String::new();
        loop {
            let l = self.line()?;
            if text.is_empty() && l.trim().is_empty() {
                continue;
            }
            text.push_str(&l);
            text.push('\n');
            let depth: i64 = text.chars().map(|c| (c == '(') as i64 - (c == ')') as i64).sum();
            if depth <= 0 {
                return Ok(text.trim().to_string());
            }
        }
    }

    fn check(&mut self, command: &str) -> Result<bool, SolverError> {
        self.send(command)?;
        self.send("\n")?;
        let reply = self.sexpr()?;
        match reply.as_str() {
            "sat" => Ok(true),
            "unsat" => Ok(false),
            "unknown" => Err(SolverError::Unknown),
            other => Err(SolverError::Protocol(format!("unexpected reply '{other}'"))),
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Parses `((n5 #x30) (n9 #b00000001))` into id/value pairs.
fn parse_values(text: &str) -> Result<Vec<(String, u64)>, SolverError> {
    let cleaned = text.replace(['(', ')'], " ");
    let toks: Vec<&str> = cleaned.split_whitespace().collect();
    if toks.len() % 2 != 0 {
        return Err(SolverError::Protocol(format!("bad get-value reply '{text}'")));
    }
    toks.chunks(2)
        .map(|p| {
            let v = if let Some(h) = p[1].strip_prefix("#x") {
                u64::from_str_radix(h, 16)
            } else if let Some(b) = p[1].strip_prefix("#b") {
                u64::from_str_radix(b, 2)
            } else {
                return Err(SolverError::Protocol(format!("bad value '{}'", p[1])));
            };
            v.map(|v| (p[0].to_string(), v)).map_err(|e| SolverError::Protocol(e.to_string()))
        })
        .collect()
}

/// Outcome of enumerating a residual query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    /// One cube per model found, constraining only the input bytes in the
    /// formula's cone; together they cover all satisfying assignments.
    pub cubes: Vec<Cube>,
    /// Solver sessions started.
    pub calls: u32,
}

/// Finds every assignment of the input bytes (`inputs[i]` is the term of
/// byte `i`) that satisfies all `assertions`, by repeated solving with
/// blocking clauses.
pub fn enumerate(
    cfg: &SolverConfig,
    m: &Model,
    assertions: &[Nid],
    inputs: &[Nid],
    deadline: Option<Instant>,
) -> Result<Enumeration, SolverError> {
    if !cfg.is_configured() {
        return Err(SolverError::NoSolver);
    }
    let in_cone: std::collections::HashSet<Nid> = cone(m, assertions).into_iter().collect();
    let relevant: Vec<(usize, Nid)> = inputs.iter().copied().enumerate().filter(|(_, n)| in_cone.contains(n)).collect();
    let mut s = Session::start(cfg, deadline)?;
    s.send(&script(m, assertions))?;
    let mut cubes = Vec::new();
    while s.check(&cfg.check)? {
        if relevant.is_empty() {
            cubes.push(Vec::new());
            break;
        }
        let names: Vec<String> = relevant.iter().map(|&(_, n)| name(n)).collect();
        s.send(&format!("(get-value ({}))\n", names.join(" ")))?;
        let vals = parse_values(&s.sexpr()?)?;
        let by_name: HashMap<String, u64> = vals.into_iter().collect();
        let mut cube = Cube::new();
        let mut block = Vec::new();
        for (&(pos, _), nm) in relevant.iter().zip(&names) {
            let v = *by_name.get(nm).ok_or_else(|| SolverError::Protocol(format!("no value for {nm}")))?;
            cube.push((pos, ByteSet::singleton(v as u8)));
            block.push(format!("(= {nm} {})", lit(BitVec::from_u64(8, v))));
        }
        cubes.push(cube);
        let clause = if block.len() == 1 { block.pop().unwrap() } else { format!("(and {})", block.join(" ")) };
        s.send(&format!("(assert (not {clause}))\n"))?;
    }
    Ok(Enumeration { cubes, calls: 1 })
}

/// Satisfiability of the conjunction of `assertions`.
pub fn is_sat(cfg: &SolverConfig, m: &Model, assertions: &[Nid], deadline: Option<Instant>) -> Result<bool, SolverError> {
    if !cfg.is_configured() {
        return Err(SolverError::NoSolver);
    }
    let mut s = Session::start(cfg, deadline)?;
    s.send(&script(m, assertions))?;
    s.check(&cfg.check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::Builder;

    fn z3() -> SolverConfig {
        SolverConfig::from_template(DEFAULT_SOLVER)
    }

    fn have_z3() -> bool {
        Command::new("z3").arg("-version").output().is_ok()
    }

    #[test]
    fn byte_equals_0x30() {
        if !have_z3() {
            eprintln!("z3 not installed; skipping");
            return;
        }
        let mut b = Builder::new();
        let x = b.state(Sort::Bitvec(8), Some("x"));
        let y = b.state(Sort::Bitvec(8), Some("y"));
        let k = b.const_u64(8, 0x30);
        let e = b.eq(x, k);
        let m = b.model().clone();
        let r = enumerate(&z3(), &m, &[e], &[x, y], None).unwrap();
        assert_eq!(r.cubes, vec![vec![(0, ByteSet::singleton(0x30))]]);
        let ne = b.not(e);
        let m = b.model().clone();
        assert!(!is_sat(&z3(), &m, &[e, ne], None).unwrap());
    }

    #[test]
    fn arrays_and_const_arrays() {
        if !have_z3() {
            return;
        }
        let mut b = Builder::new();
        let x = b.state(Sort::Bitvec(8), Some("x"));
        let arr = b.state(Sort::Array { index: 4, element: 8 }, Some("mem"));
        let z = b.const_u64(8, 7);
        b.init(arr, z);
        let i = b.const_u64(4, 3);
        let w = b.write(arr, i, x);
        let j = b.slice(x, 3, 0);
        let r = b.read(w, j);
        let k = b.const_u64(8, 7);
        let hit = b.eq(r, k);
        let m = b.model().clone();
        let got = enumerate(&z3(), &m, &[hit], &[x], None).unwrap();
        // Reading back 7 happens whenever x's low nibble is not 3, or x == 7.
        let expect = (0..=255u32).filter(|&v| v & 15 != 3 || v == 7).count();
        assert_eq!(got.cubes.len(), expect);
    }

    #[test]
    fn missing_solver() {
        let m = Builder::new().finish();
        assert!(matches!(enumerate(&SolverConfig::from_template(""), &m, &[], &[], None), Err(SolverError::NoSolver)));
        let bogus = SolverConfig::from_template("/nonexistent/solver");
        assert!(matches!(is_sat(&bogus, &m, &[], None), Err(SolverError::Spawn(..))));
    }

    #[test]
    fn value_parsing() {
        assert_eq!(
            parse_values("((n5 #x30)\n (n9 #b00000001))").unwrap(),
            vec![("n5".to_string(), 0x30), ("n9".to_string(), 1)]
        );
    }
}
