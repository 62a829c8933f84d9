//! Fixed-width bitvector values (1 to 256 bits) with BTOR2/SMT-LIB semantics.

use std::fmt;

use ethnum::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported bitvector width.
pub const MAX_WIDTH: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitVecError {
    #[error("bitvector width {0} outside 1..={MAX_WIDTH}")]
    Width(u32),
    #[error("value {value} does not fit in {width} bits")]
    Overflow { value: String, width: u32 },
    #[error("{op}: operand widths {left} and {right} differ")]
    Mismatch { op: &'static str, left: u32, right: u32 },
    #[error("slice [{hi}:{lo}] out of range for width {width}")]
    Slice { hi: u32, lo: u32, width: u32 },
    #[error("ite condition has width {0}, expected 1")]
    Condition(u32),
    #[error("malformed constant literal {0:?}")]
    Literal(String),
}

/// A bitvector value: `width` bits, value kept reduced modulo 2^width.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    value: U256,
    width: u16,
}

fn mask(width: u32) -> U256 {
    if width >= 256 {
        U256::MAX
    } else {
        (U256::ONE << width) - U256::ONE
    }
}

fn check_width(width: u32) -> Result<(), BitVecError> {
    if (1..=MAX_WIDTH).contains(&width) {
        Ok(())
    } else {
        Err(BitVecError::Width(width))
    }
}

impl BitVec {
    /// Builds a value, rejecting values that do not fit.
    pub fn new(width: u32, value: U256) -> Result<Self, BitVecError> {
        check_width(width)?;
        if value & !mask(width) != U256::ZERO {
            return Err(BitVecError::Overflow { value: value.to_string(), width });
        }
        Ok(BitVec { value, width: width as u16 })
    }

    /// Builds a value, truncating to `width` bits.
    pub fn wrapping(width: u32, value: U256) -> Result<Self, BitVecError> {
        check_width(width)?;
        Ok(BitVec { value: value & mask(width), width: width as u16 })
    }

    /// Truncating constructor from a machine integer. Panics on an invalid width.
    pub fn from_u64(width: u32, value: u64) -> Self {
        Self::wrapping(width, U256::from(value)).expect("valid bitvector width")
    }

    pub fn zero(width: u32) -> Self {
        Self::from_u64(width, 0)
    }

    pub fn one(width: u32) -> Self {
        Self::from_u64(width, 1)
    }

    pub fn ones(width: u32) -> Self {
        Self::wrapping(width, U256::MAX).expect("valid bitvector width")
    }

    pub fn bool(b: bool) -> Self {
        Self::from_u64(1, b as u64)
    }

    pub fn width(&self) -> u32 {
        self.width as u32
    }

    pub fn value(&self) -> U256 {
        self.value
    }

    /// The value as `u64` if it fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.value <= U256::from(u64::MAX) {
            Some(self.value.as_u64())
        } else {
            None
        }
    }

    /// Low 64 bits of the value.
    pub fn low_u64(&self) -> u64 {
        self.value.as_u64()
    }

    pub fn is_zero(&self) -> bool {
        self.value == U256::ZERO
    }

    /// True iff this is the 1-bit value 1.
    pub fn is_true(&self) -> bool {
        self.width == 1 && self.value == U256::ONE
    }

    fn msb(&self) -> bool {
        (self.value >> (self.width as u32 - 1)) & U256::ONE == U256::ONE
    }

    fn with(&self, value: U256) -> Self {
        BitVec { value: value & mask(self.width()), width: self.width }
    }

    fn neg_value(&self) -> U256 {
        (U256::ZERO.wrapping_sub(self.value)) & mask(self.width())
    }

    /// Parses a binary digit string of exactly `width` digits or fewer.
    pub fn from_binary_str(width: u32, s: &str) -> Result<Self, BitVecError> {
        check_width(width)?;
        if s.is_empty() || s.len() > width as usize {
            return Err(BitVecError::Literal(s.to_string()));
        }
        let v = U256::from_str_radix(s, 2).map_err(|_| BitVecError::Literal(s.to_string()))?;
        Self::new(width, v)
    }

    /// Parses a decimal literal; a leading '-' denotes two's-complement negation.
    pub fn from_decimal_str(width: u32, s: &str) -> Result<Self, BitVecError> {
        check_width(width)?;
        let (neg, digits) = match s.strip_prefix('-') {
            Some(d) => (true, d),
            None => (false, s),
        };
        if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
            return Err(BitVecError::Literal(s.to_string()));
        }
        let v = U256::from_str_radix(digits, 10).map_err(|_| BitVecError::Literal(s.to_string()))?;
        let bv = Self::new(width, v)?;
        Ok(if neg { bv.with(bv.neg_value()) } else { bv })
    }

    /// Parses a hexadecimal literal (no prefix).
    pub fn from_hex_str(width: u32, s: &str) -> Result<Self, BitVecError> {
        check_width(width)?;
        if s.is_empty() {
            return Err(BitVecError::Literal(s.to_string()));
        }
        let v = U256::from_str_radix(s, 16).map_err(|_| BitVecError::Literal(s.to_string()))?;
        Self::new(width, v)
    }

    pub fn to_binary_string(&self) -> String {
        let mut s = String::with_capacity(self.width() as usize);
        for i in (0..self.width()).rev() {
            s.push(if (self.value >> i) & U256::ONE == U256::ONE { '1' } else { '0' });
        }
        s
    }

    pub fn to_decimal_string(&self) -> String {
        self.value.to_string()
    }

    pub fn to_hex_string(&self) -> String {
        format!("{:x}", self.value)
    }

    pub fn unary(op: UnaryOp, a: BitVec) -> Result<BitVec, BitVecError> {
        let w = a.width();
        let out_width = op.result_width(w)?;
        Ok(match op {
            UnaryOp::Not => a.with(!a.value),
            UnaryOp::Neg => a.with(a.neg_value()),
            UnaryOp::Inc => a.with(a.value.wrapping_add(U256::ONE)),
            UnaryOp::Dec => a.with(a.value.wrapping_sub(U256::ONE)),
            UnaryOp::Redand => BitVec::bool(a.value == mask(w)),
            UnaryOp::Redor => BitVec::bool(a.value != U256::ZERO),
            UnaryOp::Redxor => BitVec::bool(a.value.count_ones() % 2 == 1),
            UnaryOp::Uext(_) => BitVec { value: a.value, width: out_width as u16 },
            UnaryOp::Sext(_) => {
                let v = if a.msb() { a.value | (mask(out_width) & !mask(w)) } else { a.value };
                BitVec { value: v, width: out_width as u16 }
            }
            UnaryOp::Slice { lo, .. } => {
                BitVec { value: (a.value >> lo) & mask(out_width), width: out_width as u16 }
            }
        })
    }

    pub fn binary(op: BinaryOp, a: BitVec, b: BitVec) -> Result<BitVec, BitVecError> {
        let w = a.width();
        op.result_width(w, b.width())?;
        let (x, y) = (a.value, b.value);
        Ok(match op {
            BinaryOp::Add => a.with(x.wrapping_add(y)),
            BinaryOp::Sub => a.with(x.wrapping_sub(y)),
            BinaryOp::Mul => a.with(x.wrapping_mul(y)),
            BinaryOp::Udiv => a.with(udiv(x, y, w)),
            BinaryOp::Urem => a.with(urem(x, y)),
            BinaryOp::Sdiv => {
                let (sa, sb) = (a.msb(), b.msb());
                let ax = if sa { a.neg_value() } else { x };
                let by = if sb { b.neg_value() } else { y };
                let q = a.with(udiv(ax, by, w));
                if sa != sb {
                    q.with(q.neg_value())
                } else {
                    q
                }
            }
            BinaryOp::Srem => {
                let (sa, sb) = (a.msb(), b.msb());
                let ax = if sa { a.neg_value() } else { x };
                let by = if sb { b.neg_value() } else { y };
                let r = a.with(urem(ax, by));
                if sa {
                    r.with(r.neg_value())
                } else {
                    r
                }
            }
            BinaryOp::And => a.with(x & y),
            BinaryOp::Or => a.with(x | y),
            BinaryOp::Xor => a.with(x ^ y),
            BinaryOp::Sll => match shift_amount(y, w) {
                Some(s) => a.with(x << s),
                None => BitVec::zero(w),
            },
            BinaryOp::Srl => match shift_amount(y, w) {
                Some(s) => a.with(x >> s),
                None => BitVec::zero(w),
            },
            BinaryOp::Sra => {
                let fill = a.msb();
                match shift_amount(y, w) {
                    Some(s) => {
                        let shifted = x >> s;
                        if fill {
                            a.with(shifted | (mask(w) & !(mask(w) >> s)))
                        } else {
                            a.with(shifted)
                        }
                    }
                    None if fill => BitVec::ones(w),
                    None => BitVec::zero(w),
                }
            }
            BinaryOp::Concat => {
                let width = w + b.width();
                BitVec { value: (x << b.width()) | y, width: width as u16 }
            }
            BinaryOp::Eq => BitVec::bool(x == y),
            BinaryOp::Neq => BitVec::bool(x != y),
            BinaryOp::Ult => BitVec::bool(x < y),
            BinaryOp::Ulte => BitVec::bool(x <= y),
            BinaryOp::Ugt => BitVec::bool(x > y),
            BinaryOp::Ugte => BitVec::bool(x >= y),
            BinaryOp::Slt => BitVec::bool(signed_key(&a) < signed_key(&b)),
            BinaryOp::Slte => BitVec::bool(signed_key(&a) <= signed_key(&b)),
            BinaryOp::Sgt => BitVec::bool(signed_key(&a) > signed_key(&b)),
            BinaryOp::Sgte => BitVec::bool(signed_key(&a) >= signed_key(&b)),
        })
    }

    pub fn ite(c: BitVec, t: BitVec, e: BitVec) -> Result<BitVec, BitVecError> {
        if c.width() != 1 {
            return Err(BitVecError::Condition(c.width()));
        }
        if t.width() != e.width() {
            return Err(BitVecError::Mismatch { op: "ite", left: t.width(), right: e.width() });
        }
        Ok(if c.is_true() { t } else { e })
    }
}

fn udiv(x: U256, y: U256, w: u32) -> U256 {
    if y == U256::ZERO {
        mask(w)
    } else {
        x / y
    }
}

fn urem(x: U256, y: U256) -> U256 {
    if y == U256::ZERO {
        x
    } else {
        x % y
    }
}

fn shift_amount(y: U256, w: u32) -> Option<u32> {
    if y < U256::from(w) {
        Some(y.as_u32())
    } else {
        None
    }
}

/// Flipping the sign bit maps two's-complement order onto unsigned order.
fn signed_key(a: &BitVec) -> U256 {
    a.value ^ (U256::ONE << (a.width() - 1))
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}:{}", self.value, self.width)
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.value)
    }
}

/// Unary operators. `Sext`/`Uext` carry the number of added bits, as in BTOR2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnaryOp {
    Not,
    Neg,
    Inc,
    Dec,
    Redand,
    Redor,
    Redxor,
    Sext(u32),
    Uext(u32),
    Slice { hi: u32, lo: u32 },
}

impl UnaryOp {
    pub fn result_width(self, w: u32) -> Result<u32, BitVecError> {
        check_width(w)?;
        match self {
            UnaryOp::Not | UnaryOp::Neg | UnaryOp::Inc | UnaryOp::Dec => Ok(w),
            UnaryOp::Redand | UnaryOp::Redor | UnaryOp::Redxor => Ok(1),
            UnaryOp::Sext(n) | UnaryOp::Uext(n) => {
                let out = w.checked_add(n).ok_or(BitVecError::Width(u32::MAX))?;
                check_width(out)?;
                Ok(out)
            }
            UnaryOp::Slice { hi, lo } => {
                if hi < w && lo <= hi {
                    Ok(hi - lo + 1)
                } else {
                    Err(BitVecError::Slice { hi, lo, width: w })
                }
            }
        }
    }

    /// BTOR2 keyword.
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Not => "not",
            UnaryOp::Neg => "neg",
            UnaryOp::Inc => "inc",
            UnaryOp::Dec => "dec",
            UnaryOp::Redand => "redand",
            UnaryOp::Redor => "redor",
            UnaryOp::Redxor => "redxor",
            UnaryOp::Sext(_) => "sext",
            UnaryOp::Uext(_) => "uext",
            UnaryOp::Slice { .. } => "slice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Udiv,
    Urem,
    Sdiv,
    Srem,
    And,
    Or,
    Xor,
    Sll,
    Srl,
    Sra,
    Concat,
    Eq,
    Neq,
    Ult,
    Ulte,
    Ugt,
    Ugte,
    Slt,
    Slte,
    Sgt,
    Sgte,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 24] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Udiv,
        BinaryOp::Urem,
        BinaryOp::Sdiv,
        BinaryOp::Srem,
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Xor,
        BinaryOp::Sll,
        BinaryOp::Srl,
        BinaryOp::Sra,
        BinaryOp::Concat,
        BinaryOp::Eq,
        BinaryOp::Neq,
        BinaryOp::Ult,
        BinaryOp::Ulte,
        BinaryOp::Ugt,
        BinaryOp::Ugte,
        BinaryOp::Slt,
        BinaryOp::Slte,
        BinaryOp::Sgt,
        BinaryOp::Sgte,
    ];

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq
                | BinaryOp::Neq
                | BinaryOp::Ult
                | BinaryOp::Ulte
                | BinaryOp::Ugt
                | BinaryOp::Ugte
                | BinaryOp::Slt
                | BinaryOp::Slte
                | BinaryOp::Sgt
                | BinaryOp::Sgte
        )
    }

    pub fn result_width(self, left: u32, right: u32) -> Result<u32, BitVecError> {
        check_width(left)?;
        check_width(right)?;
        if self == BinaryOp::Concat {
            let w = left + right;
            check_width(w)?;
            return Ok(w);
        }
        if left != right {
            return Err(BitVecError::Mismatch { op: self.name(), left, right });
        }
        Ok(if self.is_comparison() { 1 } else { left })
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Udiv => "udiv",
            BinaryOp::Urem => "urem",
            BinaryOp::Sdiv => "sdiv",
            BinaryOp::Srem => "srem",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Xor => "xor",
            BinaryOp::Sll => "sll",
            BinaryOp::Srl => "srl",
            BinaryOp::Sra => "sra",
            BinaryOp::Concat => "concat",
            BinaryOp::Eq => "eq",
            BinaryOp::Neq => "neq",
            BinaryOp::Ult => "ult",
            BinaryOp::Ulte => "ulte",
            BinaryOp::Ugt => "ugt",
            BinaryOp::Ugte => "ugte",
            BinaryOp::Slt => "slt",
            BinaryOp::Slte => "slte",
            BinaryOp::Sgt => "sgt",
            BinaryOp::Sgte => "sgte",
        }
    }

    pub fn from_name(name: &str) -> Option<BinaryOp> {
        BinaryOp::ALL.iter().copied().find(|op| op.name() == name)
    }
}
