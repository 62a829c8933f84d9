//! The interface shared by both decision-diagram backends, plus byte sets,
//! cubes and canonical input sets.

use std::fmt;
use std::hash::Hash;

use ethnum::U256;

use crate::bitvec::{BinaryOp, BitVec, UnaryOp};
use crate::btor2::{Builder, Nid};
use crate::eval::all_assignments;
use crate::roabvdd::Roabvdd;

/// Positions of the set bits of `w`, offset by `base`, ascending.
fn bits(mut w: u128, base: u8) -> impl Iterator<Item = u8> {
    std::iter::from_fn(move || {
        (w != 0).then(|| {
            let i = w.trailing_zeros() as u8;
            w &= w - 1;
            base + i
        })
    })
}

/// A subset of the 256 byte values, one bit per value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ByteSet(pub U256);

impl ByteSet {
    pub const EMPTY: ByteSet = ByteSet(U256::ZERO);
    pub const FULL: ByteSet = ByteSet(U256::MAX);

    pub fn singleton(v: u8) -> Self {
        ByteSet(U256::ONE << v as u32)
    }

    /// All values below `2^bits`.
    pub fn below_pow2(bits: u32) -> Self {
        if bits >= 8 {
            Self::FULL
        } else {
            ByteSet((U256::ONE << (1u32 << bits)) - 1)
        }
    }

    pub fn from_values(vals: impl IntoIterator<Item = u8>) -> Self {
        vals.into_iter().fold(Self::EMPTY, |s, v| s.with(v))
    }

    pub fn with(self, v: u8) -> Self {
        ByteSet(self.0 | (U256::ONE << v as u32))
    }

    pub fn contains(self, v: u8) -> bool {
        let word = if v < 128 { *self.0.low() } else { *self.0.high() };
        word >> (v & 127) & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == U256::ZERO
    }

    pub fn is_full(self) -> bool {
        self.0 == U256::MAX
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn lowest(self) -> Option<u8> {
        (!self.is_empty()).then(|| self.0.trailing_zeros() as u8)
    }

    pub fn union(self, o: Self) -> Self {
        ByteSet(self.0 | o.0)
    }

    pub fn intersect(self, o: Self) -> Self {
        ByteSet(self.0 & o.0)
    }

    pub fn complement(self) -> Self {
        ByteSet(!self.0)
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        let (hi, lo) = self.0.into_words();
        bits(lo, 0).chain(bits(hi, 128))
    }

    /// Maximal runs of consecutive members as inclusive ranges.
    pub fn ranges(self) -> Vec<(u8, u8)> {
        let mut out = Vec::new();
        let mut start: Option<u8> = None;
        for v in 0..=255u8 {
            match (self.contains(v), start) {
                (true, None) => start = Some(v),
                (false, Some(s)) => {
                    out.push((s, v - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, 255));
        }
        out
    }
}

impl fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_full() {
            return f.write_str("*");
        }
        let parts: Vec<String> = self
            .ranges()
            .into_iter()
            .map(|(lo, hi)| if lo == hi { format!("{lo:02x}") } else { format!("{lo:02x}-{hi:02x}") })
            .collect();
        if parts.is_empty() {
            f.write_str("{}")
        } else {
            f.write_str(&parts.join("|"))
        }
    }
}

/// A conjunction of per-position membership constraints; unlisted positions
/// are unconstrained. Sorted by position.
pub type Cube = Vec<(usize, ByteSet)>;

/// Builds a 1-bit term stating that the `width`-bit term `x` lies in `set`
/// (only values below `2^width` are meaningful).
pub fn membership_term(b: &mut Builder, x: Nid, width: u32, set: ByteSet) -> Nid {
    let domain = ByteSet::below_pow2(width);
    let set = set.intersect(domain);
    if set.is_empty() {
        return b.bool_const(false);
    }
    if set == domain {
        return b.bool_const(true);
    }
    let outside = domain.intersect(set.complement());
    if outside.ranges().len() < set.ranges().len() {
        let t = ranges_term(b, x, width, outside);
        return b.not(t);
    }
    ranges_term(b, x, width, set)
}

fn ranges_term(b: &mut Builder, x: Nid, width: u32, set: ByteSet) -> Nid {
    let max = ((1u32 << width.min(8)) - 1) as u8;
    let terms: Vec<Nid> = set
        .ranges()
        .into_iter()
        .map(|(lo, hi)| {
            let hi = hi.min(max);
            let klo = b.const_u64(width, lo as u64);
            let khi = b.const_u64(width, hi as u64);
            if lo == hi {
                b.eq(x, klo)
            } else if lo == 0 {
                b.binary(BinaryOp::Ulte, x, khi)
            } else if hi == max {
                b.binary(BinaryOp::Ugte, x, klo)
            } else {
                let a = b.binary(BinaryOp::Ugte, x, klo);
                let c = b.binary(BinaryOp::Ulte, x, khi);
                b.and(a, c)
            }
        })
        .collect();
    b.any(&terms)
}

/// Decision-diagram operations needed for domain propagation. Handles are
/// canonical: two handles denote the same function iff they are equal.
pub trait Tracker {
    type T: Copy + Eq + Hash + fmt::Debug;

    fn constant(&mut self, v: BitVec) -> Self::T;
    /// The value of input byte `pos` (8 bits wide).
    fn input_byte(&mut self, pos: usize) -> Self::T;
    fn unary(&mut self, op: UnaryOp, a: Self::T) -> Self::T;
    fn binary(&mut self, op: BinaryOp, a: Self::T, b: Self::T) -> Self::T;
    fn ite(&mut self, c: Self::T, t: Self::T, e: Self::T) -> Self::T;
    fn as_constant(&self, t: Self::T) -> Option<BitVec>;
    fn lookup(&self, t: Self::T, input: &[u8]) -> BitVec;
    /// Disjoint cubes covering exactly the assignments mapped to a nonzero value.
    fn satisfying_cubes(&mut self, t: Self::T) -> Vec<Cube>;
    /// Distinct values the tracker can take.
    fn leaves(&self, t: Self::T) -> Vec<BitVec>;
    /// An equivalent combinational term over the given input-byte terms.
    fn to_term(&mut self, t: Self::T, b: &mut Builder, inputs: &[Nid]) -> Nid;
    /// The value for every assignment of the first `bytes` input bytes, in
    /// the order of `eval::all_assignments`.
    fn tabulate(&self, t: Self::T, bytes: usize) -> Vec<BitVec> {
        all_assignments(bytes).iter().map(|a| self.lookup(t, a)).collect()
    }
    /// Unique structures (nodes or groupings) reachable from `roots`.
    fn structure_count(&self, roots: &[Self::T]) -> usize;
    /// Every structure ever interned in this context's unique table.
    fn table_size(&self) -> usize;
    fn name(&self) -> String;
}

/// A canonical set of assignments to `n` input bytes, stored as the disjoint
/// cubes of its ROABVDD. Equal sets have equal representations.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct InputSet {
    pub n: usize,
    pub cubes: Vec<Vec<ByteSet>>,
}

impl InputSet {
    pub fn empty(n: usize) -> Self {
        InputSet { n, cubes: Vec::new() }
    }

    pub fn all(n: usize) -> Self {
        Self::from_cubes(n, &[Vec::new()])
    }

    pub fn from_cubes(n: usize, cubes: &[Cube]) -> Self {
        let mut r = Roabvdd::new();
        let f = cubes_to_roabvdd(&mut r, cubes);
        Self::from_roabvdd(n, &mut r, f)
    }

    pub fn from_assignments(n: usize, assignments: &[Vec<u8>]) -> Self {
        let cubes: Vec<Cube> = assignments
            .iter()
            .map(|a| a.iter().enumerate().map(|(i, &v)| (i, ByteSet::singleton(v))).collect())
            .collect();
        Self::from_cubes(n, &cubes)
    }

    fn from_roabvdd(n: usize, r: &mut Roabvdd, f: u32) -> Self {
        let mut cubes: Vec<Vec<ByteSet>> = r
            .satisfying_cubes(f)
            .into_iter()
            .map(|c| {
                let mut full = vec![ByteSet::FULL; n];
                for (i, s) in c {
                    assert!(i < n, "cube constrains byte {i} of {n}");
                    full[i] = s;
                }
                full
            })
            .collect();
        cubes.sort();
        InputSet { n, cubes }
    }

    pub fn union(&self, other: &InputSet) -> InputSet {
        let mut all = self.cube_list();
        all.extend(other.cube_list());
        Self::from_cubes(self.n.max(other.n), &all)
    }

    fn cube_list(&self) -> Vec<Cube> {
        self.cubes.iter().map(|c| c.iter().copied().enumerate().filter(|(_, s)| !s.is_full()).collect()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, input: &[u8]) -> bool {
        self.cubes.iter().any(|c| c.iter().enumerate().all(|(i, s)| s.contains(input.get(i).copied().unwrap_or(0))))
    }

    /// Number of assignments (saturating).
    pub fn count(&self) -> u128 {
        self.cubes.iter().map(|c| c.iter().map(|s| s.len() as u128).product::<u128>()).sum()
    }

    /// Explicit assignments in lexicographic order; only sensible for small `n`.
    pub fn assignments(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        for c in &self.cubes {
            let mut acc: Vec<Vec<u8>> = vec![Vec::new()];
            for s in c {
                acc = acc.into_iter().flat_map(|p| s.iter().map(move |v| [p.clone(), vec![v]].concat())).collect();
            }
            out.extend(acc);
        }
        out.sort();
        out
    }
}

fn cubes_to_roabvdd(r: &mut Roabvdd, cubes: &[Cube]) -> u32 {
    let mut acc = r.constant(BitVec::bool(false));
    for c in cubes {
        let mut conj = r.constant(BitVec::bool(true));
        for &(i, s) in c {
            let m = r.membership(i as u32, s);
            conj = r.binary(BinaryOp::And, conj, m);
        }
        acc = r.binary(BinaryOp::Or, acc, conj);
    }
    acc
}

impl fmt::Display for InputSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cubes.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self
            .cubes
            .iter()
            .map(|c| {
                let fields: Vec<String> = c.iter().enumerate().map(|(i, s)| format!("{i}:{s}")).collect();
                format!("{{{}}}", fields.join(","))
            })
            .collect();
        f.write_str(&parts.join(";"))
    }
}

impl fmt::Debug for InputSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
