//! Benchmark programs: small RISC-U programs whose bad states depend on
//! one or a few input bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{assemble, generate_model, simulate, MachineConfig, Program, PropertyToggles, CODE_START};
use crate::btor2::print;
use crate::eval::{run_enumerated, InputLayout};

#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub source: String,
    pub program: Program,
    pub config: MachineConfig,
    /// A bound that covers every execution of the program.
    pub kmax: u32,
}

const PRELUDE: &str = "\
  addi a7, zero, 214
  addi a0, zero, 0
  ecall                 ; a0 = program break
  addi s0, a0, 0        ; s0 = input buffer
  addi a0, s0, 8
  addi a7, zero, 214
  ecall                 ; reserve one word
";

const READ_BYTE: &str = "\
  addi a0, zero, 0
  addi a1, s0, 0
  addi a2, zero, 1
  addi a7, zero, 63
  ecall
  ld t0, 0(s0)
";

fn exit_with(reg: &str) -> String {
    format!("  addi a0, {reg}, 0\n  addi a7, zero, 93\n  ecall\n")
}

fn division_by_zero() -> String {
    format!(
        "{PRELUDE}{READ_BYTE}  addi t0, t0, -48\n  addi t1, zero, 100\n  divu t1, t1, t0\n{}",
        exit_with("zero")
    )
}

fn bad_exit_code() -> String {
    format!(
        "{PRELUDE}{READ_BYTE}  addi t0, t0, -49\n  addi s1, zero, 0\n  beq t0, zero, fail\n  jal zero, done\n\
         fail:\n  addi s1, zero, 1\ndone:\n{}",
        exit_with("s1")
    )
}

fn segmentation_fault() -> String {
    format!(
        "{PRELUDE}{READ_BYTE}  addi t0, t0, -48\n  addi t1, zero, 8\n  mul t0, t0, t1\n  add t0, s0, t0\n  sd t1, 0(t0)\n{}",
        exit_with("zero")
    )
}

/// Reads `x` bytes one at a time and fails iff all of them are '0'.
fn multi_input(x: u32) -> String {
    format!(
        "{PRELUDE}  addi s1, zero, {x}\n  addi s2, zero, 0\nloop:\n  beq s1, zero, end\n{READ_BYTE}\
         \n  addi t0, t0, -48\n  addi t1, zero, 1\n  sltu t0, t0, t1\n  add s2, s2, t0\n  addi s1, s1, -1\n  jal zero, loop\n\
         end:\n  addi t0, s2, -{x}\n  addi t1, zero, 1\n  sltu s3, t0, t1\n{}",
        exit_with("s3")
    )
}

fn reverse_bits(v: u64, x: u32) -> u64 {
    (0..x).filter(|&i| v >> i & 1 == 1).map(|i| 1 << (x - 1 - i)).sum()
}

/// Reads a decimal digit, reverses the order of its low `x` bits and fails
/// iff the result equals the reversal of the low bits of 6. Branch-free
/// apart from the fixed-count loop, so the control flow never depends on
/// the input.
fn bit_inversion(x: u32) -> String {
    let target = reverse_bits(6 & ((1 << x) - 1), x);
    format!(
        "{PRELUDE}{READ_BYTE}  addi s1, t0, -48\n  addi t1, zero, 10\n  sltu t2, s1, t1      ; digit?\n\
         \n  addi s2, zero, 0\n  addi s3, zero, {weight}\n  addi s4, zero, {x}\n  addi t3, zero, 2\n\
         loop:\n  beq s4, zero, end\n  remu t4, s1, t3\n  divu s1, s1, t3\n  mul t5, t4, s3\n  add s2, s2, t5\n\
         \n  divu s3, s3, t3\n  addi s4, s4, -1\n  jal zero, loop\n\
         end:\n  addi t0, s2, -{target}\n  addi t1, zero, 1\n  sltu s5, t0, t1      ; reversed bits match?\n\
         \n  add t0, s5, t2\n  addi t0, t0, -2\n  sltu s5, t0, t1      ; both\n{}",
        exit_with("s5"),
        weight = 1u64 << (x - 1),
    )
}

pub fn corpus_config(bytes_to_read: u64) -> MachineConfig {
    MachineConfig { bytes_to_read, heap_allowance: 128, stack_allowance: 256, ..Default::default() }
}

fn sample(name: String, source: String, bytes: u64, probes: Vec<Vec<u8>>) -> Sample {
    let program = assemble(&source).unwrap_or_else(|e| panic!("{name}: {e}"));
    let config = corpus_config(bytes);
    let longest = probes
        .iter()
        .map(|input| simulate(&program, &config, input, 100_000).expect("layout").pcs.len() as u32)
        .max()
        .unwrap_or(0);
    Sample { name, source, program, config, kmax: longest + 2 }
}

fn all_bytes() -> Vec<Vec<u8>> {
    (0..=255u8).map(|b| vec![b]).collect()
}

/// Every benchmark sample, in a fixed order.
pub fn samples() -> Vec<Sample> {
    let mut out = vec![
        sample("division-by-zero".into(), division_by_zero(), 1, all_bytes()),
        sample("bad-exit-code".into(), bad_exit_code(), 1, all_bytes()),
        sample("segmentation-fault".into(), segmentation_fault(), 1, all_bytes()),
    ];
    for x in 2..=6 {
        let probes = vec![vec![b'0'; x as usize], vec![0; x as usize]];
        out.push(sample(format!("multi-input-{x}"), multi_input(x), x as u64, probes));
    }
    for x in 2..=6 {
        out.push(sample(format!("bit-inversion-{x}"), bit_inversion(x), 1, all_bytes()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedEvent {
    pub k: u32,
    pub bad: String,
    /// Satisfying inputs as hex strings, one byte pair per input byte.
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub name: String,
    pub bytes_to_read: u64,
    pub heap_allowance: u64,
    pub stack_allowance: u64,
    pub properties: PropertyToggles,
    pub bad_names: Vec<String>,
    pub entry_pc: u64,
    pub kmax: u32,
    /// Exhaustive-evaluation verdict, present when the input space is enumerable.
    pub expected: Option<Vec<ExpectedEvent>>,
}

pub fn hex_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(sample: &Sample, with_oracle: bool) -> Manifest {
    let model = generate_model(&sample.program, &sample.config).expect("corpus programs fit");
    let expected = (with_oracle && sample.config.bytes_to_read <= 2).then(|| {
        let layout = InputLayout::new(&model, Some(sample.config.bytes_to_read as usize)).expect("layout");
        let table = run_enumerated(&model, &layout, sample.kmax).expect("enumerable");
        table
            .events()
            .into_iter()
            .map(|((k, bad), inputs)| ExpectedEvent { k, bad, inputs: inputs.iter().map(|i| hex_bytes(i)).collect() })
            .collect()
    });
    Manifest {
        name: sample.name.clone(),
        bytes_to_read: sample.config.bytes_to_read,
        heap_allowance: sample.config.heap_allowance,
        stack_allowance: sample.config.stack_allowance,
        properties: sample.config.properties,
        bad_names: model.bads().iter().map(|b| b.name.clone()).collect(),
        entry_pc: CODE_START,
        kmax: sample.kmax,
        expected,
    }
}

/// Writes `<name>.s`, `<name>.btor2` and `<name>.json` for every sample.
pub fn write_corpus(dir: &Path, with_oracle: bool) -> std::io::Result<Vec<Manifest>> {
    std::fs::create_dir_all(dir)?;
    let mut manifests = Vec::new();
    for s in samples() {
        let model = generate_model(&s.program, &s.config).expect("corpus programs fit");
        std::fs::write(dir.join(format!("{}.s", s.name)), &s.source)?;
        std::fs::write(dir.join(format!("{}.btor2", s.name)), print(&model))?;
        let m = manifest(&s, with_oracle);
        let json = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{}.json", s.name)), json)?;
        manifests.push(m);
    }
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversal() {
        assert_eq!(reverse_bits(0b110, 3), 0b011);
        assert_eq!(reverse_bits(0b10, 2), 0b01);
        assert_eq!(reverse_bits(0b0110, 4), 0b0110);
    }

    #[test]
    fn samples_assemble_and_terminate() {
        for s in samples() {
            assert!(s.kmax > 10, "{}", s.name);
            let zeros = vec![b'0'; s.config.bytes_to_read as usize];
            let t = simulate(&s.program, &s.config, &zeros, s.kmax).unwrap();
            assert!(t.exit_code.is_some() || t.violation.is_some(), "{}", s.name);
        }
    }
}
