use std::collections::HashMap;
use std::fmt::Write;

use super::{Instr, Program, ROp, Reg, RiscuError};

fn parse_int(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

struct Line<'a> {
    number: usize,
    index: usize,
    mnemonic: &'a str,
    operands: Vec<&'a str>,
}

impl Line<'_> {
    fn err(&self, msg: impl Into<String>) -> RiscuError {
        RiscuError::Asm { line: self.number, msg: msg.into() }
    }

    fn expect(&self, n: usize) -> Result<(), RiscuError> {
        if self.operands.len() == n {
            Ok(())
        } else {
            Err(self.err(format!("{} expects {n} operands, found {}", self.mnemonic, self.operands.len())))
        }
    }

    fn reg(&self, i: usize) -> Result<Reg, RiscuError> {
        Reg::parse(self.operands[i]).ok_or_else(|| self.err(format!("unknown register '{}'", self.operands[i])))
    }

    fn imm(&self, i: usize) -> Result<i64, RiscuError> {
        parse_int(self.operands[i]).ok_or_else(|| self.err(format!("bad immediate '{}'", self.operands[i])))
    }

    /// `imm(reg)` operand.
    fn mem(&self, i: usize) -> Result<(i64, Reg), RiscuError> {
        let op = self.operands[i];
        let open = op.find('(').ok_or_else(|| self.err(format!("expected imm(reg), found '{op}'")))?;
        let close = op.strip_suffix(')').ok_or_else(|| self.err(format!("expected imm(reg), found '{op}'")))?;
        let imm_text = &op[..open];
        let imm = if imm_text.is_empty() {
            0
        } else {
            parse_int(imm_text).ok_or_else(|| self.err(format!("bad offset '{imm_text}'")))?
        };
        let reg = Reg::parse(&close[open + 1..]).ok_or_else(|| self.err(format!("unknown register in '{op}'")))?;
        Ok((imm, reg))
    }

    /// A label (resolved relative to this instruction) or a byte offset.
    fn target(&self, i: usize, labels: &HashMap<String, usize>) -> Result<i64, RiscuError> {
        let op = self.operands[i];
        if let Some(&at) = labels.get(op) {
            return Ok((at as i64 - self.index as i64) * 4);
        }
        parse_int(op).ok_or_else(|| self.err(format!("unknown label '{op}'")))
    }
}

/// Assembles RISC-U text: one instruction per line, `;` comments, `name:`
/// labels, and an optional `.data` section of `.dword` values.
pub fn assemble(text: &str) -> Result<Program, RiscuError> {
    let mut labels = HashMap::new();
    let mut lines = Vec::new();
    let mut data = Vec::new();
    let mut in_data = false;
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let mut content = raw.split(';').next().unwrap_or("").trim();
        while let Some(colon) = content.find(':') {
            let label = content[..colon].trim();
            if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return Err(RiscuError::Asm { line: number, msg: format!("bad label '{label}'") });
            }
            if labels.insert(label.to_string(), lines.len()).is_some() {
                return Err(RiscuError::Asm { line: number, msg: format!("duplicate label '{label}'") });
            }
            content = content[colon + 1..].trim();
        }
        if content.is_empty() {
            continue;
        }
        let (mnemonic, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let operands: Vec<&str> = rest.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        match mnemonic {
            ".text" => in_data = false,
            ".data" => in_data = true,
            ".dword" => {
                if !in_data {
                    return Err(RiscuError::Asm { line: number, msg: ".dword outside .data".into() });
                }
                for op in operands {
                    let v = parse_int(op)
                        .or_else(|| op.strip_prefix("0x").and_then(|h| u64::from_str_radix(h, 16).ok().map(|v| v as i64)))
                        .ok_or_else(|| RiscuError::Asm { line: number, msg: format!("bad value '{op}'") })?;
                    data.push(v as u64);
                }
            }
            _ if in_data => {
                return Err(RiscuError::Asm { line: number, msg: format!("instruction '{mnemonic}' in .data") });
            }
            _ => lines.push(Line { number, index: lines.len(), mnemonic, operands }),
        }
    }
    let mut code = Vec::with_capacity(lines.len());
    for l in &lines {
        let instr = match l.mnemonic {
            "lui" => {
                l.expect(2)?;
                let v = l.imm(1)?;
                if !(-(1 << 19)..1 << 20).contains(&v) {
                    return Err(l.err(format!("lui immediate {v} exceeds 20 bits")));
                }
                Instr::Lui { rd: l.reg(0)?, imm20: (v as u32) & 0xFFFFF }
            }
            "addi" => {
                l.expect(3)?;
                Instr::Addi { rd: l.reg(0)?, rs1: l.reg(1)?, imm: l.imm(2)? }
            }
            "ld" => {
                l.expect(2)?;
                let (imm, rs1) = l.mem(1)?;
                Instr::Ld { rd: l.reg(0)?, rs1, imm }
            }
            "sd" => {
                l.expect(2)?;
                let (imm, rs1) = l.mem(1)?;
                Instr::Sd { rs1, rs2: l.reg(0)?, imm }
            }
            "beq" => {
                l.expect(3)?;
                Instr::Beq { rs1: l.reg(0)?, rs2: l.reg(1)?, offset: l.target(2, &labels)? }
            }
            "jal" => {
                l.expect(2)?;
                Instr::Jal { rd: l.reg(0)?, offset: l.target(1, &labels)? }
            }
            "jalr" => {
                l.expect(2)?;
                let (imm, rs1) = l.mem(1)?;
                Instr::Jalr { rd: l.reg(0)?, rs1, imm }
            }
            "ecall" => {
                l.expect(0)?;
                Instr::Ecall
            }
            m => match ROp::ALL.iter().find(|op| op.mnemonic() == m) {
                Some(&op) => {
                    l.expect(3)?;
                    Instr::R { op, rd: l.reg(0)?, rs1: l.reg(1)?, rs2: l.reg(2)? }
                }
                None => return Err(l.err(format!("unknown mnemonic '{m}'"))),
            },
        };
        code.push(instr.encode().map_err(|e| l.err(e.to_string()))?);
    }
    Ok(Program { code, data })
}

/// Prints a program as assembly that [`assemble`] maps back to the same words.
/// Undecodable words are an error.
pub fn disassemble(program: &Program) -> Result<String, RiscuError> {
    let mut out = String::new();
    for &w in &program.code {
        let _ = writeln!(out, "{}", Instr::decode(w)?);
    }
    if !program.data.is_empty() {
        out.push_str(".data\n");
        for &d in &program.data {
            let _ = writeln!(out, ".dword {d:#x}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_comments() {
        let p = assemble(
            "start: addi t0, zero, 3 ; counter\nloop:\n  addi t0, t0, -1\n  beq t0, zero, done\n  jal zero, loop\ndone: ecall\n",
        )
        .unwrap();
        assert_eq!(p.code.len(), 5);
        assert_eq!(Instr::decode(p.code[2]).unwrap(), Instr::Beq { rs1: Reg(5), rs2: Reg(0), offset: 8 });
        assert_eq!(Instr::decode(p.code[3]).unwrap(), Instr::Jal { rd: Reg(0), offset: -8 });
    }

    #[test]
    fn round_trip() {
        let text = "lui a0, 0x10\naddi a0, a0, -5\nld t0, 16(sp)\nsd t1, -8(sp)\nsltu a0, a1, a2\n\
                    beq a0, a1, -12\njal ra, 8\njalr zero, 0(ra)\necall\n.data\n.dword 0x2a\n.dword 0xffffffffffffffff\n";
        let p = assemble(text).unwrap();
        let printed = disassemble(&p).unwrap();
        assert_eq!(assemble(&printed).unwrap(), p);
        assert_eq!(p.data, vec![42, u64::MAX]);
    }

    #[test]
    fn errors() {
        assert!(assemble("frob a0, a1").is_err());
        assert!(assemble("addi a0, zero, 5000").is_err());
        assert!(assemble("jal zero, 6").is_err());
        assert!(assemble("addi q9, zero, 1").is_err());
        assert!(assemble("beq a0, a1, nowhere").is_err());
    }
}
