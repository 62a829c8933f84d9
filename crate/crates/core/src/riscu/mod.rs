//! RISC-U: the 14-instruction unsigned subset of RV64 used for benchmark
//! programs, with an assembler, a BTOR2 model generator and a reference
//! simulator.

mod asm;
pub mod corpus;
mod model;
mod sim;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use asm::{assemble, disassemble};
pub use model::generate_model;
pub use sim::{simulate, SyscallEvent, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiscuError {
    #[error("line {line}: {msg}")]
    Asm { line: usize, msg: String },
    #[error("cannot encode {0}")]
    Encoding(String),
    #[error("word {0:#010x} is not a RISC-U instruction")]
    Decode(u32),
    #[error("memory layout: {0}")]
    Layout(String),
}

pub const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5",
    "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
];

/// Register number 0..=31.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reg(pub u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);
    pub const SP: Reg = Reg(2);
    pub const A0: Reg = Reg(10);
    pub const A1: Reg = Reg(11);
    pub const A2: Reg = Reg(12);
    pub const A7: Reg = Reg(17);

    pub fn parse(s: &str) -> Option<Reg> {
        if s == "fp" {
            return Some(Reg(8));
        }
        if let Some(i) = ABI_NAMES.iter().position(|&n| n == s) {
            return Some(Reg(i as u8));
        }
        let n: u8 = s.strip_prefix('x')?.parse().ok()?;
        (n < 32).then_some(Reg(n))
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(ABI_NAMES[self.0 as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ROp {
    Add,
    Sub,
    Mul,
    Divu,
    Remu,
    Sltu,
}

impl ROp {
    pub const ALL: [ROp; 6] = [ROp::Add, ROp::Sub, ROp::Mul, ROp::Divu, ROp::Remu, ROp::Sltu];

    pub fn mnemonic(self) -> &'static str {
        match self {
            ROp::Add => "add",
            ROp::Sub => "sub",
            ROp::Mul => "mul",
            ROp::Divu => "divu",
            ROp::Remu => "remu",
            ROp::Sltu => "sltu",
        }
    }

    /// (funct3, funct7)
    pub fn functs(self) -> (u32, u32) {
        match self {
            ROp::Add => (0, 0),
            ROp::Sub => (0, 0x20),
            ROp::Mul => (0, 1),
            ROp::Divu => (5, 1),
            ROp::Remu => (7, 1),
            ROp::Sltu => (3, 0),
        }
    }
}

pub const OP_LUI: u32 = 0x37;
pub const OP_IMM: u32 = 0x13;
pub const OP_LOAD: u32 = 0x03;
pub const OP_STORE: u32 = 0x23;
pub const OP_REG: u32 = 0x33;
pub const OP_BRANCH: u32 = 0x63;
pub const OP_JAL: u32 = 0x6F;
pub const OP_JALR: u32 = 0x67;
pub const ECALL: u32 = 0x73;

/// A decoded instruction. Immediates hold their sign-extended values; `Lui`
/// holds the raw 20-bit upper immediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instr {
    Lui { rd: Reg, imm20: u32 },
    Addi { rd: Reg, rs1: Reg, imm: i64 },
    Ld { rd: Reg, rs1: Reg, imm: i64 },
    Sd { rs1: Reg, rs2: Reg, imm: i64 },
    R { op: ROp, rd: Reg, rs1: Reg, rs2: Reg },
    Beq { rs1: Reg, rs2: Reg, offset: i64 },
    Jal { rd: Reg, offset: i64 },
    Jalr { rd: Reg, rs1: Reg, imm: i64 },
    Ecall,
}

fn fits_signed(v: i64, bits: u32) -> bool {
    let lim = 1i64 << (bits - 1);
    (-lim..lim).contains(&v)
}

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

fn sign_extend(v: u32, width: u32) -> i64 {
    let shift = 64 - width;
    ((v as i64) << shift) >> shift
}

impl Instr {
    pub fn encode(&self) -> Result<u32, RiscuError> {
        let r = |x: Reg| x.0 as u32;
        let itype = |opc: u32, f3: u32, rd: Reg, rs1: Reg, imm: i64| -> Result<u32, RiscuError> {
            if !fits_signed(imm, 12) {
                return Err(RiscuError::Encoding(format!("{self}: immediate {imm} exceeds 12 bits")));
            }
            Ok(((imm as u32 & 0xFFF) << 20) | (r(rs1) << 15) | (f3 << 12) | (r(rd) << 7) | opc)
        };
        match *self {
            Instr::Lui { rd, imm20 } => {
                if imm20 > 0xFFFFF {
                    return Err(RiscuError::Encoding(format!("{self}: immediate exceeds 20 bits")));
                }
                Ok((imm20 << 12) | (r(rd) << 7) | OP_LUI)
            }
            Instr::Addi { rd, rs1, imm } => itype(OP_IMM, 0, rd, rs1, imm),
            Instr::Ld { rd, rs1, imm } => itype(OP_LOAD, 3, rd, rs1, imm),
            Instr::Jalr { rd, rs1, imm } => itype(OP_JALR, 0, rd, rs1, imm),
            Instr::Sd { rs1, rs2, imm } => {
                if !fits_signed(imm, 12) {
                    return Err(RiscuError::Encoding(format!("{self}: immediate {imm} exceeds 12 bits")));
                }
                let u = imm as u32;
                Ok((bits(u, 11, 5) << 25) | (r(rs2) << 20) | (r(rs1) << 15) | (3 << 12) | (bits(u, 4, 0) << 7) | OP_STORE)
            }
            Instr::R { op, rd, rs1, rs2 } => {
                let (f3, f7) = op.functs();
                Ok((f7 << 25) | (r(rs2) << 20) | (r(rs1) << 15) | (f3 << 12) | (r(rd) << 7) | OP_REG)
            }
            Instr::Beq { rs1, rs2, offset } => {
                if offset % 4 != 0 || !fits_signed(offset, 13) {
                    return Err(RiscuError::Encoding(format!("{self}: branch offset {offset} misaligned or out of range")));
                }
                let u = offset as u32;
                Ok((bits(u, 12, 12) << 31)
                    | (bits(u, 10, 5) << 25)
                    | (r(rs2) << 20)
                    | (r(rs1) << 15)
                    | (bits(u, 4, 1) << 8)
                    | (bits(u, 11, 11) << 7)
                    | OP_BRANCH)
            }
            Instr::Jal { rd, offset } => {
                if offset % 4 != 0 || !fits_signed(offset, 21) {
                    return Err(RiscuError::Encoding(format!("{self}: jump offset {offset} misaligned or out of range")));
                }
                let u = offset as u32;
                Ok((bits(u, 20, 20) << 31)
                    | (bits(u, 10, 1) << 21)
                    | (bits(u, 11, 11) << 20)
                    | (bits(u, 19, 12) << 12)
                    | (r(rd) << 7)
                    | OP_JAL)
            }
            Instr::Ecall => Ok(ECALL),
        }
    }

    pub fn decode(word: u32) -> Result<Instr, RiscuError> {
        let rd = Reg(bits(word, 11, 7) as u8);
        let rs1 = Reg(bits(word, 19, 15) as u8);
        let rs2 = Reg(bits(word, 24, 20) as u8);
        let f3 = bits(word, 14, 12);
        let f7 = bits(word, 31, 25);
        let imm_i = sign_extend(bits(word, 31, 20), 12);
        let err = Err(RiscuError::Decode(word));
        Ok(match bits(word, 6, 0) {
            OP_LUI => Instr::Lui { rd, imm20: bits(word, 31, 12) },
            OP_IMM if f3 == 0 => Instr::Addi { rd, rs1, imm: imm_i },
            OP_LOAD if f3 == 3 => Instr::Ld { rd, rs1, imm: imm_i },
            OP_JALR if f3 == 0 => Instr::Jalr { rd, rs1, imm: imm_i },
            OP_STORE if f3 == 3 => {
                let imm = sign_extend((bits(word, 31, 25) << 5) | bits(word, 11, 7), 12);
                Instr::Sd { rs1, rs2, imm }
            }
            OP_REG => match ROp::ALL.iter().find(|op| op.functs() == (f3, f7)) {
                Some(&op) => Instr::R { op, rd, rs1, rs2 },
                None => return err,
            },
            OP_BRANCH if f3 == 0 => {
                let u = (bits(word, 31, 31) << 12)
                    | (bits(word, 7, 7) << 11)
                    | (bits(word, 30, 25) << 5)
                    | (bits(word, 11, 8) << 1);
                Instr::Beq { rs1, rs2, offset: sign_extend(u, 13) }
            }
            OP_JAL => {
                let u = (bits(word, 31, 31) << 20)
                    | (bits(word, 19, 12) << 12)
                    | (bits(word, 20, 20) << 11)
                    | (bits(word, 30, 21) << 1);
                Instr::Jal { rd, offset: sign_extend(u, 21) }
            }
            _ if word == ECALL => Instr::Ecall,
            _ => return err,
        })
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Lui { rd, imm20 } => write!(f, "lui {rd}, {imm20:#x}"),
            Instr::Addi { rd, rs1, imm } => write!(f, "addi {rd}, {rs1}, {imm}"),
            Instr::Ld { rd, rs1, imm } => write!(f, "ld {rd}, {imm}({rs1})"),
            Instr::Sd { rs1, rs2, imm } => write!(f, "sd {rs2}, {imm}({rs1})"),
            Instr::R { op, rd, rs1, rs2 } => write!(f, "{} {rd}, {rs1}, {rs2}", op.mnemonic()),
            Instr::Beq { rs1, rs2, offset } => write!(f, "beq {rs1}, {rs2}, {offset}"),
            Instr::Jal { rd, offset } => write!(f, "jal {rd}, {offset}"),
            Instr::Jalr { rd, rs1, imm } => write!(f, "jalr {rd}, {imm}({rs1})"),
            Instr::Ecall => write!(f, "ecall"),
        }
    }
}

/// An encoded program: code words loaded at the code segment start, data
/// words loaded at the data segment start.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub code: Vec<u32>,
    pub data: Vec<u64>,
}

pub const SYSCALL_EXIT: u64 = 93;
pub const SYSCALL_READ: u64 = 63;
pub const SYSCALL_WRITE: u64 = 64;
pub const SYSCALL_OPENAT: u64 = 56;
pub const SYSCALL_BRK: u64 = 214;

/// Safety properties that become bad states; each can be switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyToggles {
    pub bad_exit_code: bool,
    pub division_by_zero: bool,
    /// Accepted for flag compatibility; RISC-U has no signed division.
    pub division_overflow: bool,
    pub invalid_addresses: bool,
    pub segfaults: bool,
    pub unknown_instructions: bool,
    pub unknown_syscalls: bool,
}

impl Default for PropertyToggles {
    fn default() -> Self {
        PropertyToggles {
            bad_exit_code: true,
            division_by_zero: true,
            division_overflow: true,
            invalid_addresses: true,
            segfaults: true,
            unknown_instructions: true,
            unknown_syscalls: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub bytes_to_read: u64,
    pub heap_allowance: u64,
    pub stack_allowance: u64,
    pub virtual_address_space: u32,
    pub properties: PropertyToggles,
    /// Emit the program-break bound as a constraint.
    pub segment_constraints: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            bytes_to_read: 1,
            heap_allowance: 4096,
            stack_allowance: 2048,
            virtual_address_space: 32,
            properties: PropertyToggles::default(),
            segment_constraints: true,
        }
    }
}

pub const CODE_START: u64 = 0x10000;

/// A power-of-two sized segment of words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: u64,
    /// log2 of the number of words (the array index width).
    pub index_bits: u32,
    /// log2 of the word size in bytes.
    pub word_bytes_log: u32,
}

impl Segment {
    pub fn words(&self) -> u64 {
        1 << self.index_bits
    }

    pub fn end(&self) -> u64 {
        self.start + (self.words() << self.word_bytes_log)
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.start && addr < self.end()
    }

    /// Word index of an address inside the segment (low bits ignored).
    pub fn index(&self, addr: u64) -> u64 {
        (addr.wrapping_sub(self.start) >> self.word_bytes_log) & (self.words() - 1)
    }
}

fn index_bits_for(words: u64) -> u32 {
    let words = words.max(2);
    64 - (words - 1).leading_zeros()
}

/// Addresses and sizes of all segments for a program and configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryLayout {
    pub code: Segment,
    pub data: Segment,
    pub heap: Segment,
    pub stack: Segment,
    /// Index width of the input buffer.
    pub input_bits: u32,
    pub bytes_to_read: u64,
}

impl MemoryLayout {
    pub fn new(program: &Program, cfg: &MachineConfig) -> Result<Self, RiscuError> {
        if !(24..=48).contains(&cfg.virtual_address_space) {
            return Err(RiscuError::Layout(format!(
                "virtual address space of {} bits unsupported",
                cfg.virtual_address_space
            )));
        }
        let code = Segment { start: CODE_START, index_bits: index_bits_for(program.code.len() as u64), word_bytes_log: 2 };
        let data = Segment { start: code.end(), index_bits: index_bits_for(program.data.len() as u64), word_bytes_log: 3 };
        let heap_words = cfg.heap_allowance.div_ceil(8);
        let stack_words = cfg.stack_allowance.div_ceil(8);
        let heap = Segment { start: data.end(), index_bits: index_bits_for(heap_words), word_bytes_log: 3 };
        let vas_end: u128 = 1u128 << cfg.virtual_address_space;
        let stack_bits = index_bits_for(stack_words);
        let stack_start = vas_end - ((1u128 << stack_bits) << 3);
        if (heap.end() as u128) > stack_start {
            return Err(RiscuError::Layout("program and heap overlap the stack".into()));
        }
        let stack = Segment { start: stack_start as u64, index_bits: stack_bits, word_bytes_log: 3 };
        if cfg.bytes_to_read > 1 << 16 {
            return Err(RiscuError::Layout(format!("{} bytes to read exceed the input limit", cfg.bytes_to_read)));
        }
        let input_bits = index_bits_for(cfg.bytes_to_read);
        Ok(MemoryLayout { code, data, heap, stack, input_bits, bytes_to_read: cfg.bytes_to_read })
    }

    /// Initial stack pointer: the top of the stack segment.
    pub fn initial_sp(&self) -> u64 {
        self.stack.end()
    }

    pub fn data_segments(&self) -> [Segment; 3] {
        [self.data, self.heap, self.stack]
    }
}

/// Names of the bad properties the generator can emit, in emission order.
pub const BAD_NAMES: [&str; 12] = [
    "fetch-segfault",
    "invalid-code-address",
    "unknown-instruction",
    "bad-exit-code",
    "division-by-zero",
    "invalid-memory-address",
    "load-segfault",
    "store-segfault",
    "read-segfault",
    "write-segfault",
    "openat-segfault",
    "unknown-syscall",
];

#[cfg(test)]
mod tests {
    use super::*;

    /// Encodings produced by an external RV64IM assembler for the same text.
    const REFERENCE: [(&str, u32); 19] = [
        ("addi a0, zero, 1", 0x00100513),
        ("addi sp, sp, -16", 0xff010113),
        ("lui a0, 0x10", 0x00010537),
        ("lui t0, 0xfffff", 0xfffff2b7),
        ("ld a0, 8(sp)", 0x00813503),
        ("sd ra, -8(s0)", 0xfe143c23),
        ("add a0, a0, a1", 0x00b50533),
        ("sub a0, a0, a1", 0x40b50533),
        ("mul t2, t1, t0", 0x025303b3),
        ("divu t2, t1, t0", 0x025353b3),
        ("remu s3, s4, s5", 0x035a79b3),
        ("sltu a0, t3, t6", 0x01fe3533),
        ("beq t0, t1, -8", 0xfe628ce3),
        ("beq a0, zero, 2048", 0x000500e3),
        ("jal ra, 16", 0x010000ef),
        ("jal zero, -1048576", 0x8000006f),
        ("jalr zero, 0(ra)", 0x00008067),
        ("jalr t0, -4(a1)", 0xffc582e7),
        ("ecall", 0x00000073),
    ];

    #[test]
    fn encodings_match_reference_assembler() {
        for (text, word) in REFERENCE {
            let p = assemble(text).unwrap();
            assert_eq!(p.code, vec![word], "{text}");
            let back = Instr::decode(word).unwrap();
            assert_eq!(back.encode().unwrap(), word, "{text}");
        }
    }

    #[test]
    fn encoding_errors() {
        assert!(Instr::Jal { rd: Reg(0), offset: 6 }.encode().is_err());
        assert!(Instr::Addi { rd: Reg(1), rs1: Reg(1), imm: 2048 }.encode().is_err());
        assert!(Instr::Beq { rs1: Reg(1), rs2: Reg(1), offset: 4096 }.encode().is_err());
        assert!(Instr::decode(0).is_err());
        assert!(Instr::decode(0x00001013).is_err(), "slli is not RISC-U");
    }

    #[test]
    fn layout_is_power_of_two() {
        let p = Program { code: vec![0x73; 5], data: vec![] };
        let l = MemoryLayout::new(&p, &MachineConfig::default()).unwrap();
        assert_eq!(l.code.words(), 8);
        assert_eq!(l.data.start, CODE_START + 32);
        assert_eq!(l.heap.words(), 512);
        assert_eq!(l.stack.end(), 1 << 32);
        assert_eq!(l.input_bits, 1);
        let cfg = MachineConfig { heap_allowance: 1 << 33, ..Default::default() };
        assert!(MemoryLayout::new(&p, &cfg).is_err());
    }
}
