//! Context-free-language ordered bitvector decision diagrams.
//!
//! Inputs are split into blocks of `b` bits (b in 1, 2, 4, 8); a grouping of
//! level `l` decides on `2^l` consecutive blocks. Level 0 groupings are lookup
//! tables over one block. A level `l` grouping runs its A-connection on the
//! first half of its blocks, lands on a middle vertex, then runs that vertex's
//! B-connection on the second half, whose exits are mapped to the grouping's
//! exits by a return tuple. Exits are numbered in order of first occurrence,
//! which together with unique tables makes the representation canonical.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::bitvec::{BinaryOp, BitVec, UnaryOp};
use crate::eval::all_assignments;
use crate::btor2::{Builder, Nid};
use crate::tracker::{membership_term, ByteSet, Cube, Tracker};

pub type GId = u32;
pub type TopId = u32;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Grouping {
    Base { exits: u32, table: Box<[u32]> },
    Inner { level: u32, exits: u32, a: GId, bs: Box<[(GId, Box<[u32]>)]> },
}

impl Grouping {
    fn exits(&self) -> u32 {
        match self {
            Grouping::Base { exits, .. } | Grouping::Inner { exits, .. } => *exits,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Top {
    pub grouping: GId,
    /// One distinct value per exit of the grouping.
    pub values: Box<[BitVec]>,
}

struct Product {
    grouping: GId,
    /// Per product exit, the exit of each argument (stride = argument count).
    tuples: Box<[u32]>,
}

/// A CFLOBVDD context for a fixed input size and block granularity.
pub struct Cflobvdd {
    block_bits: u32,
    level: u32,
    bytes: usize,
    groupings: Vec<Grouping>,
    unique: HashMap<Grouping, GId>,
    /// The single-exit grouping of each level.
    no_distinction: Vec<GId>,
    tops: Vec<Top>,
    top_unique: HashMap<Top, TopId>,
    product_memo: HashMap<Box<[GId]>, Rc<Product>>,
    reduce_memo: HashMap<(GId, Box<[u32]>), GId>,
    unary_memo: HashMap<(UnaryOp, TopId), TopId>,
    binary_memo: HashMap<(BinaryOp, TopId, TopId), TopId>,
    ite_memo: HashMap<(TopId, TopId, TopId), TopId>,
    byte_memo: HashMap<usize, TopId>,
    paths_memo: HashMap<(GId, u32), Rc<Vec<Cube>>>,
}

/// Renumbers a sequence by first occurrence: returns the distinct values in
/// order and, for each element, its index among them.
fn first_occurrence<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> (Vec<T>, Vec<u32>) {
    let mut index: HashMap<&T, u32> = HashMap::new();
    let mut distinct = Vec::new();
    let mut map = Vec::with_capacity(items.len());
    for it in items {
        let i = *index.entry(it).or_insert_with(|| {
            distinct.push(it.clone());
            distinct.len() as u32 - 1
        });
        map.push(i);
    }
    (distinct, map)
}

impl Cflobvdd {
    /// A context for `bytes` input bytes at block granularity `block_bits`.
    pub fn new(bytes: usize, block_bits: u32) -> Self {
        assert!(matches!(block_bits, 1 | 2 | 4 | 8), "granularity must be 1, 2, 4 or 8 bits");
        let total_bits = (bytes.max(1) * 8) as u64;
        let mut level = 0;
        while (block_bits as u64) << level < total_bits {
            level += 1;
        }
        let mut c = Cflobvdd {
            block_bits,
            level,
            bytes,
            groupings: Vec::new(),
            unique: HashMap::new(),
            no_distinction: Vec::new(),
            tops: Vec::new(),
            top_unique: HashMap::new(),
            product_memo: HashMap::new(),
            reduce_memo: HashMap::new(),
            unary_memo: HashMap::new(),
            binary_memo: HashMap::new(),
            ite_memo: HashMap::new(),
            byte_memo: HashMap::new(),
            paths_memo: HashMap::new(),
        };
        let base = c.intern(Grouping::Base { exits: 1, table: vec![0; 1 << block_bits].into_boxed_slice() });
        c.no_distinction.push(base);
        for l in 1..=level {
            let below = c.no_distinction[l as usize - 1];
            let g = c.intern(Grouping::Inner { level: l, exits: 1, a: below, bs: Box::new([(below, Box::new([0]))]) });
            c.no_distinction.push(g);
        }
        c
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bits
    }

    pub fn top(&self, t: TopId) -> &Top {
        &self.tops[t as usize]
    }

    pub fn grouping(&self, g: GId) -> &Grouping {
        &self.groupings[g as usize]
    }

    fn intern(&mut self, g: Grouping) -> GId {
        if let Some(&id) = self.unique.get(&g) {
            return id;
        }
        let id = self.groupings.len() as GId;
        self.groupings.push(g.clone());
        self.unique.insert(g, id);
        id
    }

    fn intern_top(&mut self, t: Top) -> TopId {
        if let Some(&id) = self.top_unique.get(&t) {
            return id;
        }
        let id = self.tops.len() as TopId;
        self.tops.push(t.clone());
        self.top_unique.insert(t, id);
        id
    }

    fn level_of(&self, g: GId) -> u32 {
        match &self.groupings[g as usize] {
            Grouping::Base { .. } => 0,
            Grouping::Inner { level, .. } => *level,
        }
    }

    fn exits(&self, g: GId) -> u32 {
        self.groupings[g as usize].exits()
    }

    fn is_nd(&self, g: GId) -> bool {
        self.no_distinction[self.level_of(g) as usize] == g
    }

    /// Projection onto one block at the given level.
    fn projection_grouping(&mut self, block: u64, level: u32) -> GId {
        let n = 1u32 << self.block_bits;
        if level == 0 {
            return self.intern(Grouping::Base { exits: n, table: (0..n).collect() });
        }
        let half = 1u64 << (level - 1);
        let nd = self.no_distinction[level as usize - 1];
        let g = if block < half {
            let a = self.projection_grouping(block, level - 1);
            let bs = (0..n).map(|j| (nd, vec![j].into_boxed_slice())).collect();
            Grouping::Inner { level, exits: n, a, bs }
        } else {
            let b = self.projection_grouping(block - half, level - 1);
            Grouping::Inner { level, exits: n, a: nd, bs: Box::new([(b, (0..n).collect())]) }
        };
        self.intern(g)
    }

    /// The tracker returning the `b`-bit value of block `block`.
    pub fn projection(&mut self, block: u64) -> TopId {
        assert!(block < 1 << self.level, "block {block} outside level {}", self.level);
        let g = self.projection_grouping(block, self.level);
        let values = (0..1u64 << self.block_bits).map(|v| BitVec::from_u64(self.block_bits, v)).collect();
        self.intern_top(Top { grouping: g, values })
    }

    fn product(&mut self, args: &[GId]) -> Rc<Product> {
        let n = args.len();
        let mut uniq: Vec<GId> = Vec::new();
        let mut slot: Vec<Option<usize>> = Vec::with_capacity(n);
        for &g in args {
            if self.is_nd(g) {
                slot.push(None);
            } else if let Some(i) = uniq.iter().position(|&u| u == g) {
                slot.push(Some(i));
            } else {
                uniq.push(g);
                slot.push(Some(uniq.len() - 1));
            }
        }
        let (grouping, core_tuples, stride): (GId, Rc<[u32]>, usize) = match uniq.len() {
            0 => (self.no_distinction[self.level_of(args[0]) as usize], Rc::from(vec![0u32]), 1),
            1 => (uniq[0], (0..self.exits(uniq[0])).collect::<Vec<u32>>().into(), 1),
            _ => {
                let p = self.core_product(&uniq);
                (p.grouping, Rc::from(&p.tuples[..]), uniq.len())
            }
        };
        let exits = self.exits(grouping) as usize;
        let mut tuples = Vec::with_capacity(exits * n);
        for x in 0..exits {
            for s in &slot {
                tuples.push(match s {
                    None => 0,
                    Some(i) => core_tuples[x * stride + i],
                });
            }
        }
        Rc::new(Product { grouping, tuples: tuples.into_boxed_slice() })
    }

    /// Product of distinct groupings none of which is the no-distinction one.
    fn core_product(&mut self, args: &[GId]) -> Rc<Product> {
        if let Some(p) = self.product_memo.get(args) {
            return p.clone();
        }
        let n = args.len();
        let p = match self.groupings[args[0] as usize].clone() {
            Grouping::Base { .. } => {
                let tables: Vec<Box<[u32]>> = args
                    .iter()
                    .map(|&g| match &self.groupings[g as usize] {
                        Grouping::Base { table, .. } => table.clone(),
                        _ => unreachable!("level mismatch"),
                    })
                    .collect();
                let rows: Vec<Vec<u32>> = (0..tables[0].len()).map(|v| tables.iter().map(|t| t[v]).collect()).collect();
                let (distinct, map) = first_occurrence(&rows);
                let g = self.intern(Grouping::Base { exits: distinct.len() as u32, table: map.into_boxed_slice() });
                Product { grouping: g, tuples: distinct.concat().into_boxed_slice() }
            }
            Grouping::Inner { level, .. } => {
                let parts: Vec<(GId, Box<[(GId, Box<[u32]>)]>)> = args
                    .iter()
                    .map(|&g| match &self.groupings[g as usize] {
                        Grouping::Inner { a, bs, .. } => (*a, bs.clone()),
                        _ => unreachable!("level mismatch"),
                    })
                    .collect();
                let a_args: Vec<GId> = parts.iter().map(|p| p.0).collect();
                let pa = self.product(&a_args);
                let middles = self.exits(pa.grouping) as usize;
                let mut exit_index: HashMap<Vec<u32>, u32> = HashMap::new();
                let mut exit_tuples: Vec<u32> = Vec::new();
                let mut bs = Vec::with_capacity(middles);
                for j in 0..middles {
                    let mid = &pa.tuples[j * n..(j + 1) * n];
                    let b_args: Vec<GId> = (0..n).map(|i| parts[i].1[mid[i] as usize].0).collect();
                    let pb = self.product(&b_args);
                    let b_exits = self.exits(pb.grouping) as usize;
                    let mut ret = Vec::with_capacity(b_exits);
                    for x in 0..b_exits {
                        let inner = &pb.tuples[x * n..(x + 1) * n];
                        let outer: Vec<u32> =
                            (0..n).map(|i| parts[i].1[mid[i] as usize].1[inner[i] as usize]).collect();
                        let next = exit_index.len() as u32;
                        let e = *exit_index.entry(outer.clone()).or_insert_with(|| {
                            exit_tuples.extend_from_slice(&outer);
                            next
                        });
                        ret.push(e);
                    }
                    bs.push((pb.grouping, ret.into_boxed_slice()));
                }
                let g = self.intern(Grouping::Inner {
                    level,
                    exits: exit_index.len() as u32,
                    a: pa.grouping,
                    bs: bs.into_boxed_slice(),
                });
                Product { grouping: g, tuples: exit_tuples.into_boxed_slice() }
            }
        };
        let p = Rc::new(p);
        self.product_memo.insert(args.into(), p.clone());
        p
    }

    /// Merges exits of `g` according to `rt`, which must number the merged
    /// exits by first occurrence.
    fn reduce(&mut self, g: GId, rt: &[u32]) -> GId {
        if rt.iter().enumerate().all(|(i, &r)| r == i as u32) {
            return g;
        }
        if rt.iter().all(|&r| r == 0) {
            return self.no_distinction[self.level_of(g) as usize];
        }
        let key = (g, Box::<[u32]>::from(rt));
        if let Some(&r) = self.reduce_memo.get(&key) {
            return r;
        }
        let exits = rt.iter().max().map_or(0, |m| m + 1);
        let r = match self.groupings[g as usize].clone() {
            Grouping::Base { table, .. } => {
                let table = table.iter().map(|&e| rt[e as usize]).collect();
                self.intern(Grouping::Base { exits, table })
            }
            Grouping::Inner { level, a, bs, .. } => {
                let mut reduced = Vec::with_capacity(bs.len());
                for (b, ret) in bs.iter() {
                    let induced: Vec<u32> = ret.iter().map(|&x| rt[x as usize]).collect();
                    let (new_ret, b_rt) = first_occurrence(&induced);
                    let b2 = self.reduce(*b, &b_rt);
                    reduced.push((b2, new_ret.into_boxed_slice()));
                }
                let (distinct, a_rt) = first_occurrence(&reduced);
                let a2 = self.reduce(a, &a_rt);
                self.intern(Grouping::Inner { level, exits, a: a2, bs: distinct.into_boxed_slice() })
            }
        };
        self.reduce_memo.insert(key, r);
        r
    }

    /// Builds the tracker mapping each product exit to `f` of the argument values.
    fn apply_n(&mut self, args: &[TopId], f: impl Fn(&[BitVec]) -> BitVec) -> TopId {
        let groupings: Vec<GId> = args.iter().map(|&t| self.tops[t as usize].grouping).collect();
        let p = self.product(&groupings);
        let n = args.len();
        let exits = self.exits(p.grouping) as usize;
        let mut vals = Vec::with_capacity(exits);
        let mut operand = Vec::with_capacity(n);
        for x in 0..exits {
            operand.clear();
            for (i, &t) in args.iter().enumerate() {
                operand.push(self.tops[t as usize].values[p.tuples[x * n + i] as usize]);
            }
            vals.push(f(&operand));
        }
        let (distinct, rt) = first_occurrence(&vals);
        let g = self.reduce(p.grouping, &rt);
        self.intern_top(Top { grouping: g, values: distinct.into_boxed_slice() })
    }

    /// The exit reached in `g` when its first block is block `first` of `input`.
    fn walk(&self, g: GId, input: &[u8], first: usize) -> u32 {
        match &self.groupings[g as usize] {
            Grouping::Base { table, .. } => table[self.block(input, first) as usize],
            Grouping::Inner { level, a, bs, .. } => {
                let half = 1usize << (level - 1);
                let j = self.walk(*a, input, first);
                let (b, ret) = &bs[j as usize];
                ret[self.walk(*b, input, first + half) as usize]
            }
        }
    }

    fn block(&self, input: &[u8], k: usize) -> u32 {
        let per_byte = (8 / self.block_bits) as usize;
        let shift = (k % per_byte) as u32 * self.block_bits;
        (input.get(k / per_byte).copied().unwrap_or(0) as u32 >> shift) & ((1u32 << self.block_bits) - 1)
    }

    /// The exit of `g` for every block assignment, indexed with block 0 as
    /// the least significant digit.
    fn exit_table(&self, g: GId, memo: &mut HashMap<GId, Rc<Vec<u32>>>) -> Rc<Vec<u32>> {
        if let Some(t) = memo.get(&g) {
            return t.clone();
        }
        let out = match &self.groupings[g as usize] {
            Grouping::Base { table, .. } => table.to_vec(),
            Grouping::Inner { a, bs, .. } => {
                let ta = self.exit_table(*a, memo);
                let tbs: Vec<Rc<Vec<u32>>> = bs.iter().map(|(b, _)| self.exit_table(*b, memo)).collect();
                let mut out = Vec::with_capacity(ta.len() * tbs[0].len());
                for hi in 0..tbs[0].len() {
                    out.extend(ta.iter().map(|&j| bs[j as usize].1[tbs[j as usize][hi] as usize]));
                }
                out
            }
        };
        let out = Rc::new(out);
        memo.insert(g, out.clone());
        out
    }

    /// Block constraints (relative to the grouping's first block) of all paths
    /// from the entry of `g` to `exit`.
    fn paths(&mut self, g: GId, exit: u32) -> Rc<Vec<Cube>> {
        if let Some(p) = self.paths_memo.get(&(g, exit)) {
            return p.clone();
        }
        let out = match self.groupings[g as usize].clone() {
            Grouping::Base { table, .. } => {
                let set = ByteSet::from_values((0..table.len()).filter(|&v| table[v] == exit).map(|v| v as u8));
                if set == ByteSet::below_pow2(self.block_bits) {
                    vec![Vec::new()]
                } else if set.is_empty() {
                    Vec::new()
                } else {
                    vec![vec![(0, set)]]
                }
            }
            Grouping::Inner { level, a, bs, .. } => {
                let half = 1usize << (level - 1);
                let mut out = Vec::new();
                for (j, (b, ret)) in bs.iter().enumerate() {
                    let xs: Vec<u32> = (0..ret.len() as u32).filter(|&x| ret[x as usize] == exit).collect();
                    if xs.is_empty() {
                        continue;
                    }
                    let pa = self.paths(a, j as u32);
                    for x in xs {
                        let pb = self.paths(*b, x);
                        for ca in pa.iter() {
                            for cb in pb.iter() {
                                let mut c = ca.clone();
                                c.extend(cb.iter().map(|&(k, s)| (k + half, s)));
                                out.push(c);
                            }
                        }
                    }
                }
                out
            }
        };
        let out = Rc::new(out);
        self.paths_memo.insert((g, exit), out.clone());
        out
    }

    /// Converts block constraints to byte constraints.
    fn to_byte_cube(&self, blocks: &Cube) -> Cube {
        let per_byte = (8 / self.block_bits) as usize;
        let mask = (1u32 << self.block_bits) - 1;
        let mut bytes: Vec<(usize, ByteSet)> = Vec::new();
        for &(k, s) in blocks {
            let byte = k / per_byte;
            let shift = (k % per_byte) as u32 * self.block_bits;
            let allowed = ByteSet::from_values((0..=255u8).filter(|&v| s.contains(((v as u32 >> shift) & mask) as u8)));
            match bytes.iter_mut().find(|(i, _)| *i == byte) {
                Some(e) => e.1 = e.1.intersect(allowed),
                None => bytes.push((byte, allowed)),
            }
        }
        bytes.sort_by_key(|e| e.0);
        bytes
    }

    fn reachable(&self, roots: &[GId]) -> HashSet<GId> {
        let mut seen = HashSet::new();
        let mut todo = roots.to_vec();
        while let Some(g) = todo.pop() {
            if !seen.insert(g) {
                continue;
            }
            if let Grouping::Inner { a, bs, .. } = &self.groupings[g as usize] {
                todo.push(*a);
                todo.extend(bs.iter().map(|b| b.0));
            }
        }
        seen
    }

    /// Per-level structure counts as TSV (`level, groupings, edges, values`);
    /// values are attributed to the top level.
    pub fn structure_report(&self, roots: &[TopId]) -> String {
        let gs: Vec<GId> = roots.iter().map(|&t| self.tops[t as usize].grouping).collect();
        let mut rows = vec![(0usize, 0usize); self.level as usize + 1];
        for g in self.reachable(&gs) {
            let (level, edges) = match &self.groupings[g as usize] {
                Grouping::Base { exits, .. } => (0, *exits as usize),
                Grouping::Inner { level, bs, .. } => (*level as usize, 1 + bs.len()),
            };
            rows[level].0 += 1;
            rows[level].1 += edges;
        }
        let values = self.count_structures(roots).2;
        let mut out = String::from("level\tgroupings\tedges\tvalues\n");
        for (l, (g, e)) in rows.iter().enumerate() {
            let v = if l == self.level as usize { values } else { 0 };
            out.push_str(&format!("{l}\t{g}\t{e}\t{v}\n"));
        }
        out
    }

    /// (unique groupings, connection edges, distinct top values) reachable from `roots`.
    pub fn count_structures(&self, roots: &[TopId]) -> (usize, usize, usize) {
        let gs: Vec<GId> = roots.iter().map(|&t| self.tops[t as usize].grouping).collect();
        let seen = self.reachable(&gs);
        let edges = seen
            .iter()
            .map(|&g| match &self.groupings[g as usize] {
                Grouping::Base { exits, .. } => *exits as usize,
                Grouping::Inner { bs, .. } => 1 + bs.len(),
            })
            .sum();
        let values: HashSet<BitVec> = roots.iter().flat_map(|&t| self.tops[t as usize].values.iter().copied()).collect();
        (seen.len(), edges, values.len())
    }

    fn exit_term(&self, g: GId, offset: usize, b: &mut Builder, inputs: &[Nid], memo: &mut HashMap<(GId, usize), Nid>) -> Nid {
        if let Some(&n) = memo.get(&(g, offset)) {
            return n;
        }
        let n = match &self.groupings[g as usize] {
            _ if self.is_nd(g) => b.const_u64(32, 0),
            Grouping::Base { exits, table } => {
                let per_byte = (8 / self.block_bits) as usize;
                let byte = offset / per_byte;
                let x = if byte < inputs.len() { inputs[byte] } else { b.const_u64(8, 0) };
                let lo = (offset % per_byte) as u32 * self.block_bits;
                let blk = if self.block_bits == 8 { x } else { b.slice(x, lo + self.block_bits - 1, lo) };
                let sets: Vec<ByteSet> = (0..*exits)
                    .map(|e| ByteSet::from_values((0..table.len()).filter(|&v| table[v] == e).map(|v| v as u8)))
                    .collect();
                let default = (0..sets.len()).max_by_key(|&e| sets[e].ranges().len()).unwrap();
                let mut acc = b.const_u64(32, default as u64);
                for (e, &s) in sets.iter().enumerate().rev() {
                    if e != default {
                        let cond = membership_term(b, blk, self.block_bits, s);
                        let k = b.const_u64(32, e as u64);
                        acc = b.ite(cond, k, acc);
                    }
                }
                acc
            }
            Grouping::Inner { level, a, bs, .. } => {
                let half = 1usize << (level - 1);
                let at = self.exit_term(*a, offset, b, inputs, memo);
                let mut mapped = Vec::with_capacity(bs.len());
                for (bg, ret) in bs.iter() {
                    let bt = self.exit_term(*bg, offset + half, b, inputs, memo);
                    let t = if ret.iter().enumerate().all(|(i, &r)| r == i as u32) {
                        bt
                    } else {
                        let mut acc = b.const_u64(32, *ret.last().unwrap() as u64);
                        for (x, &r) in ret.iter().enumerate().rev().skip(1) {
                            let kx = b.const_u64(32, x as u64);
                            let cond = b.eq(bt, kx);
                            let kr = b.const_u64(32, r as u64);
                            acc = b.ite(cond, kr, acc);
                        }
                        acc
                    };
                    mapped.push(t);
                }
                let mut acc = *mapped.last().unwrap();
                for (j, &t) in mapped.iter().enumerate().rev().skip(1) {
                    let kj = b.const_u64(32, j as u64);
                    let cond = b.eq(at, kj);
                    acc = b.ite(cond, t, acc);
                }
                acc
            }
        };
        memo.insert((g, offset), n);
        n
    }
}

impl Tracker for Cflobvdd {
    type T = TopId;

    fn constant(&mut self, v: BitVec) -> TopId {
        let g = self.no_distinction[self.level as usize];
        self.intern_top(Top { grouping: g, values: Box::new([v]) })
    }

    fn input_byte(&mut self, pos: usize) -> TopId {
        assert!(pos < self.bytes.max(1), "input byte {pos} outside the {} tracked bytes", self.bytes);
        if let Some(&t) = self.byte_memo.get(&pos) {
            return t;
        }
        let per_byte = (8 / self.block_bits) as u64;
        let first = pos as u64 * per_byte;
        let mut acc = self.projection(first);
        for k in 1..per_byte {
            let hi = self.projection(first + k);
            acc = self.binary(BinaryOp::Concat, hi, acc);
        }
        self.byte_memo.insert(pos, acc);
        acc
    }

    fn unary(&mut self, op: UnaryOp, a: TopId) -> TopId {
        if let Some(&r) = self.unary_memo.get(&(op, a)) {
            return r;
        }
        let top = self.tops[a as usize].clone();
        let vals: Vec<BitVec> = top.values.iter().map(|&v| BitVec::unary(op, v).expect("width checked")).collect();
        let (distinct, rt) = first_occurrence(&vals);
        let g = self.reduce(top.grouping, &rt);
        let r = self.intern_top(Top { grouping: g, values: distinct.into_boxed_slice() });
        self.unary_memo.insert((op, a), r);
        r
    }

    fn binary(&mut self, op: BinaryOp, a: TopId, b: TopId) -> TopId {
        if let Some(&r) = self.binary_memo.get(&(op, a, b)) {
            return r;
        }
        let r = self.apply_n(&[a, b], |v| BitVec::binary(op, v[0], v[1]).expect("width checked"));
        self.binary_memo.insert((op, a, b), r);
        r
    }

    fn ite(&mut self, c: TopId, t: TopId, e: TopId) -> TopId {
        if t == e {
            return t;
        }
        if let Some(v) = self.as_constant(c) {
            return if v.is_true() { t } else { e };
        }
        if let Some(&r) = self.ite_memo.get(&(c, t, e)) {
            return r;
        }
        let r = self.apply_n(&[c, t, e], |v| if v[0].is_true() { v[1] } else { v[2] });
        self.ite_memo.insert((c, t, e), r);
        r
    }

    fn as_constant(&self, t: TopId) -> Option<BitVec> {
        let top = &self.tops[t as usize];
        (top.values.len() == 1).then(|| top.values[0])
    }

    fn lookup(&self, t: TopId, input: &[u8]) -> BitVec {
        let top = &self.tops[t as usize];
        top.values[self.walk(top.grouping, input, 0) as usize]
    }

    fn tabulate(&self, t: TopId, bytes: usize) -> Vec<BitVec> {
        let covered = (1u32 << self.level) * self.block_bits;
        if covered > 16 || bytes > 2 {
            return all_assignments(bytes).iter().map(|a| self.lookup(t, a)).collect();
        }
        let top = &self.tops[t as usize];
        let exits = self.exit_table(top.grouping, &mut HashMap::new());
        let mask = (1usize << covered) - 1;
        // Exit tables put byte 0 in the low digit; the result puts it first.
        (0..1usize << (8 * bytes))
            .map(|pos| {
                let le = if bytes == 2 { (pos >> 8) | (pos & 0xff) << 8 } else { pos };
                top.values[exits[le & mask] as usize]
            })
            .collect()
    }

    fn satisfying_cubes(&mut self, t: TopId) -> Vec<Cube> {
        let top = self.tops[t as usize].clone();
        let mut out = Vec::new();
        for (e, v) in top.values.iter().enumerate() {
            if !v.is_zero() {
                let ps = self.paths(top.grouping, e as u32);
                out.extend(ps.iter().map(|c| self.to_byte_cube(c)));
            }
        }
        out
    }

    fn leaves(&self, t: TopId) -> Vec<BitVec> {
        let mut v = self.tops[t as usize].values.to_vec();
        v.sort();
        v
    }

    fn to_term(&mut self, t: TopId, b: &mut Builder, inputs: &[Nid]) -> Nid {
        let top = self.tops[t as usize].clone();
        if top.values.len() == 1 {
            return b.constant(top.values[0]);
        }
        let mut memo = HashMap::new();
        let exit = self.exit_term(top.grouping, 0, b, inputs, &mut memo);
        let mut acc = b.constant(*top.values.last().unwrap());
        for (e, &v) in top.values.iter().enumerate().rev().skip(1) {
            let ke = b.const_u64(32, e as u64);
            let cond = b.eq(exit, ke);
            let kv = b.constant(v);
            acc = b.ite(cond, kv, acc);
        }
        acc
    }

    fn structure_count(&self, roots: &[TopId]) -> usize {
        self.count_structures(roots).0
    }

    fn table_size(&self) -> usize {
        self.groupings.len()
    }

    fn name(&self) -> String {
        format!("CFLOBVDD/{}", self.block_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roabvdd::Roabvdd;

    fn k8(v: u64) -> BitVec {
        BitVec::from_u64(8, v)
    }

    #[test]
    fn constant_is_one_grouping_per_level() {
        let mut c = Cflobvdd::new(2, 2);
        assert_eq!(c.level(), 3);
        let k = c.constant(k8(5));
        assert_eq!(k, c.constant(k8(5)));
        assert_eq!(c.count_structures(&[k]).0, 4);
        assert_eq!(c.lookup(k, &[9, 9]), k8(5));
    }

    #[test]
    fn projection_exits() {
        let mut c = Cflobvdd::new(2, 8);
        let p = c.projection(1);
        assert_eq!(c.top(p).values.len(), 256);
        assert_eq!(c.lookup(p, &[1, 77]), k8(77));
    }

    #[test]
    fn projection_structure_report() {
        let mut c = Cflobvdd::new(2, 8);
        let p = c.projection(1);
        assert_eq!(c.structure_report(&[p]), "level\tgroupings\tedges\tvalues\n0\t2\t257\t0\n1\t1\t2\t256\n");
    }

    #[test]
    fn tabulate_matches_lookup() {
        for b in [1, 2, 4, 8] {
            let mut c = Cflobvdd::new(2, b);
            let (x, y) = (c.input_byte(0), c.input_byte(1));
            let t = c.binary(BinaryOp::Mul, x, y);
            let inputs = all_assignments(2);
            let looked: Vec<BitVec> = inputs.iter().map(|i| c.lookup(t, i)).collect();
            assert_eq!(c.tabulate(t, 2), looked, "b={b}");
            let one: Vec<BitVec> = all_assignments(1).iter().map(|i| c.lookup(x, i)).collect();
            assert_eq!(c.tabulate(x, 1), one);
        }
    }

    #[test]
    fn input_bytes_at_every_granularity() {
        for b in [1, 2, 4, 8] {
            let mut c = Cflobvdd::new(2, b);
            let x = c.input_byte(0);
            let y = c.input_byte(1);
            for (v0, v1) in [(0u8, 0u8), (1, 255), (0x30, 0x31), (200, 7)] {
                assert_eq!(c.lookup(x, &[v0, v1]), k8(v0 as u64), "b={b}");
                assert_eq!(c.lookup(y, &[v0, v1]), k8(v1 as u64), "b={b}");
            }
        }
    }

    #[test]
    fn eq_48_single_cube() {
        for b in [1, 2, 4, 8] {
            let mut c = Cflobvdd::new(1, b);
            let x = c.input_byte(0);
            let k = c.constant(k8(48));
            let e = c.binary(BinaryOp::Eq, x, k);
            let cubes = c.satisfying_cubes(e);
            let all: Vec<u8> = (0..=255u8).filter(|&v| cubes.iter().any(|cu| cu.iter().all(|(_, s)| s.contains(v)))).collect();
            assert_eq!(all, vec![48], "b={b}");
            let t = c.constant(BitVec::bool(true));
            assert_eq!(c.ite(e, t, t), t);
        }
    }

    #[test]
    fn add_agrees_with_roabvdd_on_all_pairs() {
        let mut r = Roabvdd::new();
        let rx = r.input_byte(0);
        let ry = r.input_byte(1);
        let rs = r.binary(BinaryOp::Add, rx, ry);
        for b in [2, 8] {
            let mut c = Cflobvdd::new(2, b);
            let x = c.input_byte(0);
            let y = c.input_byte(1);
            let s = c.binary(BinaryOp::Add, x, y);
            for v0 in 0..=255u8 {
                for v1 in 0..=255u8 {
                    assert_eq!(c.lookup(s, &[v0, v1]), r.lookup(rs, &[v0, v1]));
                }
            }
        }
    }

    #[test]
    fn canonical_after_different_constructions() {
        let mut c = Cflobvdd::new(2, 4);
        let x = c.input_byte(0);
        let y = c.input_byte(1);
        let a = c.binary(BinaryOp::Xor, x, y);
        let b = c.binary(BinaryOp::Xor, y, x);
        assert_eq!(a, b);
        let z = c.binary(BinaryOp::Xor, a, y);
        assert_eq!(z, x);
    }
}
