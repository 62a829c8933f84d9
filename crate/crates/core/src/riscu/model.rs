use crate::bitvec::BinaryOp;
use crate::btor2::{Builder, Model, Nid, Sort};

use super::{
    MachineConfig, MemoryLayout, Program, RiscuError, Segment, CODE_START, ECALL, OP_BRANCH, OP_IMM, OP_JAL,
    OP_JALR, OP_LOAD, OP_LUI, OP_REG, OP_STORE, ROp, SYSCALL_BRK, SYSCALL_EXIT, SYSCALL_OPENAT, SYSCALL_READ,
    SYSCALL_WRITE,
};

struct Gen {
    b: Builder,
}

impl Gen {
    fn k(&mut self, width: u32, v: u64) -> Nid {
        self.b.const_u64(width, v)
    }

    fn k64(&mut self, v: u64) -> Nid {
        self.k(64, v)
    }

    fn bin(&mut self, op: BinaryOp, a: Nid, c: Nid) -> Nid {
        self.b.binary(op, a, c)
    }

    fn and3(&mut self, a: Nid, c: Nid, d: Nid) -> Nid {
        self.b.all(&[a, c, d])
    }

    fn in_segment(&mut self, addr: Nid, seg: &Segment) -> Nid {
        let lo = self.k64(seg.start);
        let hi = self.k64(seg.end());
        let above = self.bin(BinaryOp::Ugte, addr, lo);
        let below = self.bin(BinaryOp::Ult, addr, hi);
        self.b.and(above, below)
    }

    /// [addr, addr+len) lies within the segment without wrapping around.
    fn range_in_segment(&mut self, addr: Nid, len: Nid, seg: &Segment) -> Nid {
        let lo = self.k64(seg.start);
        let hi = self.k64(seg.end());
        let end = self.b.add(addr, len);
        let above = self.bin(BinaryOp::Ugte, addr, lo);
        let fits = self.bin(BinaryOp::Ulte, end, hi);
        let no_wrap = self.bin(BinaryOp::Ugte, end, addr);
        self.and3(above, fits, no_wrap)
    }

    fn word_index(&mut self, addr: Nid, seg: &Segment) -> Nid {
        let start = self.k64(seg.start);
        let off = self.b.sub(addr, start);
        self.b.slice(off, seg.index_bits + seg.word_bytes_log - 1, seg.word_bytes_log)
    }

    fn low_bits_zero(&mut self, v: Nid, n: u32) -> Nid {
        let low = self.b.slice(v, n - 1, 0);
        let z = self.k(n, 0);
        self.b.eq(low, z)
    }

    fn field(&mut self, ir: Nid, hi: u32, lo: u32) -> Nid {
        self.b.slice(ir, hi, lo)
    }

    fn concat(&mut self, parts: &[Nid]) -> Nid {
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.bin(BinaryOp::Concat, acc, p);
        }
        acc
    }

    fn segment_state(&mut self, name: &str, seg: &Segment, element: u32, words: &[u64]) -> Nid {
        let sort = Sort::Array { index: seg.index_bits, element };
        let zero = self.k(element, 0);
        let s = self.b.state(sort, Some(name));
        if words.iter().all(|&w| w == 0) {
            self.b.init(s, zero);
        } else {
            let zeroed = self.b.state(sort, Some(&format!("zeroed-{name}")));
            self.b.init(zeroed, zero);
            let mut acc = zeroed;
            for (i, &w) in words.iter().enumerate() {
                if w != 0 {
                    let idx = self.k(seg.index_bits, i as u64);
                    let val = self.k(element, w);
                    acc = self.b.write(acc, idx, val);
                }
            }
            self.b.init(s, acc);
        }
        s
    }
}

/// Generates the BTOR2 model of a RISC-U machine running `program`.
///
/// One transition executes one instruction, except that a `read` system call
/// consumes one input byte per transition while the program counter stalls.
pub fn generate_model(program: &Program, cfg: &MachineConfig) -> Result<Model, RiscuError> {
    let lay = MemoryLayout::new(program, cfg)?;
    let props = cfg.properties;
    let mut g = Gen { b: Builder::new() };
    let bv64 = Sort::Bitvec(64);

    // Machine state.
    let pc = g.b.state(bv64, Some("pc"));
    let entry = g.k64(CODE_START);
    g.b.init(pc, entry);

    let regs_sort = Sort::Array { index: 5, element: 64 };
    let zregs = g.b.state(regs_sort, Some("zeroed-register-file"));
    let z64 = g.k64(0);
    g.b.init(zregs, z64);
    let regs = g.b.state(regs_sort, Some("register-file"));
    let sp_idx = g.k(5, 2);
    let sp0 = g.k64(lay.initial_sp());
    let regs0 = g.b.write(zregs, sp_idx, sp0);
    g.b.init(regs, regs0);

    let code_words: Vec<u64> = program.code.iter().map(|&w| w as u64).collect();
    let code = g.segment_state("code-segment", &lay.code, 32, &code_words);
    let data = g.segment_state("data-segment", &lay.data, 64, &program.data);
    let heap = g.segment_state("heap-segment", &lay.heap, 64, &[]);
    let stack = g.segment_state("stack-segment", &lay.stack, 64, &[]);

    let brk = g.b.state(bv64, Some("program-break"));
    let heap_start = g.k64(lay.heap.start);
    g.b.init(brk, heap_start);
    let fd = g.b.state(bv64, Some("file-descriptor-bump"));
    let three = g.k64(3);
    g.b.init(fd, three);
    let rc = g.b.state(bv64, Some("read-call-counter"));
    g.b.init(rc, z64);
    let rt = g.b.state(bv64, Some("read-total"));
    g.b.init(rt, z64);
    let input = g.b.state(Sort::Array { index: lay.input_bits, element: 8 }, Some("input-buffer"));

    // Fetch.
    let in_code = g.in_segment(pc, &lay.code);
    let aligned4 = g.low_bits_zero(pc, 2);
    let fetch_ok = g.b.and(in_code, aligned4);
    let code_idx = g.word_index(pc, &lay.code);
    let ir = g.b.read(code, code_idx);

    // Decode.
    let opcode = g.field(ir, 6, 0);
    let f3 = g.field(ir, 14, 12);
    let f7 = g.field(ir, 31, 25);
    let rd = g.field(ir, 11, 7);
    let rs1 = g.field(ir, 19, 15);
    let rs2 = g.field(ir, 24, 20);
    let is = |g: &mut Gen, opc: u32, f3v: Option<u32>, f7v: Option<u32>| {
        let oc = g.k(7, opc as u64);
        let mut conds = vec![fetch_ok, g.b.eq(opcode, oc)];
        if let Some(v) = f3v {
            let c = g.k(3, v as u64);
            conds.push(g.b.eq(f3, c));
        }
        if let Some(v) = f7v {
            let c = g.k(7, v as u64);
            conds.push(g.b.eq(f7, c));
        }
        g.b.all(&conds)
    };
    let is_lui = is(&mut g, OP_LUI, None, None);
    let is_addi = is(&mut g, OP_IMM, Some(0), None);
    let is_ld = is(&mut g, OP_LOAD, Some(3), None);
    let is_sd = is(&mut g, OP_STORE, Some(3), None);
    let is_r: Vec<(ROp, Nid)> = ROp::ALL
        .iter()
        .map(|&op| {
            let (a, c) = op.functs();
            (op, is(&mut g, OP_REG, Some(a), Some(c)))
        })
        .collect();
    let is_beq = is(&mut g, OP_BRANCH, Some(0), None);
    let is_jal = is(&mut g, OP_JAL, None, None);
    let is_jalr = is(&mut g, OP_JALR, Some(0), None);
    let ecall_word = g.k(32, ECALL as u64);
    let ir_is_ecall = g.b.eq(ir, ecall_word);
    let is_ecall = g.b.and(fetch_ok, ir_is_ecall);
    let r_of = |op: ROp| is_r.iter().find(|(o, _)| *o == op).unwrap().1;
    let mut all_kinds = vec![is_lui, is_addi, is_ld, is_sd, is_beq, is_jal, is_jalr, is_ecall];
    all_kinds.extend(is_r.iter().map(|(_, n)| *n));
    let known = g.b.any(&all_kinds);

    // Immediates.
    let imm_i_raw = g.field(ir, 31, 20);
    let imm_i = g.b.sext(imm_i_raw, 64);
    let s_hi = g.field(ir, 31, 25);
    let s_lo = g.field(ir, 11, 7);
    let imm_s_raw = g.concat(&[s_hi, s_lo]);
    let imm_s = g.b.sext(imm_s_raw, 64);
    let zero1 = g.k(1, 0);
    let b12 = g.field(ir, 31, 31);
    let b11 = g.field(ir, 7, 7);
    let b10_5 = g.field(ir, 30, 25);
    let b4_1 = g.field(ir, 11, 8);
    let imm_b_raw = g.concat(&[b12, b11, b10_5, b4_1, zero1]);
    let imm_b = g.b.sext(imm_b_raw, 64);
    let j19_12 = g.field(ir, 19, 12);
    let j11 = g.field(ir, 20, 20);
    let j10_1 = g.field(ir, 30, 21);
    let imm_j_raw = g.concat(&[b12, j19_12, j11, j10_1, zero1]);
    let imm_j = g.b.sext(imm_j_raw, 64);
    let u_hi = g.field(ir, 31, 12);
    let zero12 = g.k(12, 0);
    let imm_u_raw = g.concat(&[u_hi, zero12]);
    let imm_u = g.b.sext(imm_u_raw, 64);

    // Operands.
    let v1 = g.b.read(regs, rs1);
    let v2 = g.b.read(regs, rs2);
    let reg_at = |g: &mut Gen, r: u64| {
        let i = g.k(5, r);
        g.b.read(regs, i)
    };
    let a0 = reg_at(&mut g, 10);
    let a1 = reg_at(&mut g, 11);
    let a2 = reg_at(&mut g, 12);
    let a7 = reg_at(&mut g, 17);
    let four = g.k64(4);
    let pc4 = g.b.add(pc, four);

    // Loads and stores.
    let addr_ld = g.b.add(v1, imm_i);
    let addr_sd = g.b.add(v1, imm_s);
    let mut load_val = z64;
    for (seg, arr) in [(lay.stack, stack), (lay.heap, heap), (lay.data, data)] {
        let inside = g.in_segment(addr_ld, &seg);
        let idx = g.word_index(addr_ld, &seg);
        let word = g.b.read(arr, idx);
        load_val = g.b.ite(inside, word, load_val);
    }
    let ld_aligned = g.low_bits_zero(addr_ld, 3);
    let sd_aligned = g.low_bits_zero(addr_sd, 3);
    let seg_hits = |g: &mut Gen, addr: Nid| -> Vec<Nid> {
        lay.data_segments().iter().map(|s| g.in_segment(addr, s)).collect()
    };
    let ld_in = seg_hits(&mut g, addr_ld);
    let ld_any = g.b.any(&ld_in);
    let sd_in = seg_hits(&mut g, addr_sd);
    let sd_any = g.b.any(&sd_in);

    // System calls.
    let sys = |g: &mut Gen, id: u64| {
        let c = g.k64(id);
        let e = g.b.eq(a7, c);
        g.b.and(is_ecall, e)
    };
    let sys_exit = sys(&mut g, SYSCALL_EXIT);
    let sys_read = sys(&mut g, SYSCALL_READ);
    let sys_write = sys(&mut g, SYSCALL_WRITE);
    let sys_openat = sys(&mut g, SYSCALL_OPENAT);
    let sys_brk = sys(&mut g, SYSCALL_BRK);

    // read(fd=a0, buf=a1, n=a2): one byte per transition.
    let budget = g.k64(lay.bytes_to_read);
    let want_more = g.bin(BinaryOp::Ult, rc, a2);
    let have_input = g.bin(BinaryOp::Ult, rt, budget);
    let can_read = g.b.and(want_more, have_input);
    let in_idx = g.b.slice(rt, lay.input_bits - 1, 0);
    let byte = g.b.read(input, in_idx);
    let dest = g.b.add(a1, rc);
    let dest_in_heap = g.in_segment(dest, &lay.heap);
    let dest_idx = g.word_index(dest, &lay.heap);
    let dest_low = g.b.slice(dest, 2, 0);
    let zero3 = g.k(3, 0);
    let bit_off = g.concat(&[dest_low, zero3]);
    let shift = g.b.uext(bit_off, 64);
    let old_word = g.b.read(heap, dest_idx);
    let ff = g.k64(0xFF);
    let mask = g.bin(BinaryOp::Sll, ff, shift);
    let keep = g.b.not(mask);
    let kept = g.b.and(old_word, keep);
    let byte64 = g.b.uext(byte, 64);
    let placed = g.bin(BinaryOp::Sll, byte64, shift);
    let new_word = g.b.or(kept, placed);
    let one64 = g.k64(1);
    let rc1 = g.b.add(rc, one64);
    let rt1 = g.b.add(rt, one64);
    let call_full = g.b.eq(rc1, a2);
    let input_out = g.b.eq(rt1, budget);
    let last = g.b.or(call_full, input_out);
    let cannot = g.b.not(can_read);
    let read_done = g.b.or(cannot, last);
    let read_ret = g.b.ite(can_read, rc1, rc);

    // brk(a0)
    let above_brk = g.bin(BinaryOp::Ugte, a0, brk);
    let heap_end = g.k64(lay.heap.end());
    let below_end = g.bin(BinaryOp::Ulte, a0, heap_end);
    let brk_ok = g.b.and(above_brk, below_end);
    let new_brk = g.b.ite(brk_ok, a0, brk);

    // Control flow.
    let eq12 = g.b.eq(v1, v2);
    let br_target = g.b.add(pc, imm_b);
    let beq_next = g.b.ite(eq12, br_target, pc4);
    let jal_target = g.b.add(pc, imm_j);
    let jalr_sum = g.b.add(v1, imm_i);
    let not1 = g.k64(!1);
    let jalr_target = g.b.and(jalr_sum, not1);
    let not_done = g.b.not(read_done);
    let stall_read = g.b.and(sys_read, not_done);
    let stall = g.b.or(sys_exit, stall_read);
    let ecall_next = g.b.ite(stall, pc, pc4);
    let mut pc_next = g.b.ite(is_ecall, ecall_next, pc4);
    pc_next = g.b.ite(is_jalr, jalr_target, pc_next);
    pc_next = g.b.ite(is_jal, jal_target, pc_next);
    pc_next = g.b.ite(is_beq, beq_next, pc_next);
    g.b.next(pc, pc_next);

    // Register data flow.
    let link = pc4;
    let mut rd_val = link;
    for &(op, flag) in is_r.iter().rev() {
        let v = match op {
            ROp::Add => g.b.add(v1, v2),
            ROp::Sub => g.b.sub(v1, v2),
            ROp::Mul => g.bin(BinaryOp::Mul, v1, v2),
            ROp::Divu => g.bin(BinaryOp::Udiv, v1, v2),
            ROp::Remu => g.bin(BinaryOp::Urem, v1, v2),
            ROp::Sltu => {
                let lt = g.bin(BinaryOp::Ult, v1, v2);
                g.b.uext(lt, 64)
            }
        };
        rd_val = g.b.ite(flag, v, rd_val);
    }
    rd_val = g.b.ite(is_ld, load_val, rd_val);
    let addi_val = g.b.add(v1, imm_i);
    rd_val = g.b.ite(is_addi, addi_val, rd_val);
    rd_val = g.b.ite(is_lui, imm_u, rd_val);
    let mut writers = vec![is_lui, is_addi, is_ld, is_jal, is_jalr];
    writers.extend(is_r.iter().map(|(_, n)| *n));
    let writes_rd = g.b.any(&writers);
    let zero5 = g.k(5, 0);
    let rd_is_zero = g.b.eq(rd, zero5);
    let rd_nonzero = g.b.not(rd_is_zero);
    let we = g.b.and(writes_rd, rd_nonzero);

    let mut sys_val = a2; // write returns the byte count
    sys_val = g.b.ite(sys_openat, fd, sys_val);
    sys_val = g.b.ite(sys_brk, new_brk, sys_val);
    sys_val = g.b.ite(sys_read, read_ret, sys_val);
    let read_finished = g.b.and(sys_read, read_done);
    let sys_we = g.b.any(&[read_finished, sys_brk, sys_openat, sys_write]);
    let a0_idx = g.k(5, 10);
    let regs_rd = g.b.write(regs, rd, rd_val);
    let regs_sys = g.b.write(regs, a0_idx, sys_val);
    let regs_after_sys = g.b.ite(sys_we, regs_sys, regs);
    let regs_next = g.b.ite(we, regs_rd, regs_after_sys);
    g.b.next(regs, regs_next);

    // Memory data flow.
    let sd_ok = g.b.and(is_sd, sd_aligned);
    for (i, (seg, arr)) in [(lay.data, data), (lay.heap, heap), (lay.stack, stack)].into_iter().enumerate() {
        let hit = g.b.and(sd_ok, sd_in[i]);
        let idx = g.word_index(addr_sd, &seg);
        let stored = g.b.write(arr, idx, v2);
        let mut next = g.b.ite(hit, stored, arr);
        if arr == heap {
            let byte_in = g.and3(sys_read, can_read, dest_in_heap);
            let with_byte = g.b.write(heap, dest_idx, new_word);
            let after_read = g.b.ite(byte_in, with_byte, heap);
            next = g.b.ite(hit, stored, after_read);
        }
        g.b.next(arr, next);
    }

    // Kernel state.
    let brk_next = g.b.ite(sys_brk, new_brk, brk);
    g.b.next(brk, brk_next);
    let fd1 = g.b.add(fd, one64);
    let fd_next = g.b.ite(sys_openat, fd1, fd);
    g.b.next(fd, fd_next);
    let rc_after = g.b.ite(read_done, z64, rc1);
    let rc_next = g.b.ite(sys_read, rc_after, rc);
    g.b.next(rc, rc_next);
    let consumed = g.b.and(sys_read, can_read);
    let rt_next = g.b.ite(consumed, rt1, rt);
    g.b.next(rt, rt_next);

    // Bad states, checked before the instruction at pc executes.
    let segv = props.segfaults;
    let inval = props.invalid_addresses;
    if segv {
        let c = g.b.not(in_code);
        g.b.bad(c, "fetch-segfault");
    }
    if inval {
        let mis = g.b.not(aligned4);
        let c = g.b.and(in_code, mis);
        g.b.bad(c, "invalid-code-address");
    }
    if props.unknown_instructions {
        let unk = g.b.not(known);
        let c = g.b.and(fetch_ok, unk);
        g.b.bad(c, "unknown-instruction");
    }
    if props.bad_exit_code {
        let zero_code = g.b.eq(a0, z64);
        let nonzero = g.b.not(zero_code);
        let c = g.b.and(sys_exit, nonzero);
        g.b.bad(c, "bad-exit-code");
    }
    if props.division_by_zero {
        let div = g.b.or(r_of(ROp::Divu), r_of(ROp::Remu));
        let by_zero = g.b.eq(v2, z64);
        let c = g.b.and(div, by_zero);
        g.b.bad(c, "division-by-zero");
    }
    if inval {
        let ld_mis = g.b.not(ld_aligned);
        let sd_mis = g.b.not(sd_aligned);
        let l = g.b.and(is_ld, ld_mis);
        let s = g.b.and(is_sd, sd_mis);
        let c = g.b.or(l, s);
        g.b.bad(c, "invalid-memory-address");
    }
    if segv {
        let outside = g.b.not(ld_any);
        let c = g.and3(is_ld, ld_aligned, outside);
        g.b.bad(c, "load-segfault");
        let outside = g.b.not(sd_any);
        let c = g.and3(is_sd, sd_aligned, outside);
        g.b.bad(c, "store-segfault");

        let n_zero = g.b.eq(a2, z64);
        let n_pos = g.b.not(n_zero);
        let in_heap = g.range_in_segment(a1, a2, &lay.heap);
        let out = g.b.not(in_heap);
        let c = g.and3(sys_read, n_pos, out);
        g.b.bad(c, "read-segfault");

        let ranges: Vec<Nid> =
            lay.data_segments().iter().map(|s| g.range_in_segment(a1, a2, s)).collect();
        let inside = g.b.any(&ranges);
        let out = g.b.not(inside);
        let c = g.and3(sys_write, n_pos, out);
        g.b.bad(c, "write-segfault");

        let path_in = seg_hits(&mut g, a1);
        let inside = g.b.any(&path_in);
        let out = g.b.not(inside);
        let c = g.b.and(sys_openat, out);
        g.b.bad(c, "openat-segfault");
    }
    if props.unknown_syscalls {
        let known_sys = g.b.any(&[sys_exit, sys_read, sys_write, sys_openat, sys_brk]);
        let unk = g.b.not(known_sys);
        let c = g.b.and(is_ecall, unk);
        g.b.bad(c, "unknown-syscall");
    }

    if cfg.segment_constraints {
        let lo = g.bin(BinaryOp::Ugte, brk, heap_start);
        let hi = g.bin(BinaryOp::Ulte, brk, heap_end);
        let c = g.b.and(lo, hi);
        g.b.constraint(c, "program-break-in-heap");
    }
    Ok(g.b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btor2::validate;
    use crate::eval::{run_enumerated, Evaluator, InputLayout};
    use crate::riscu::{assemble, corpus, simulate};

    fn least_k(model: &Model, bytes: usize, input: &[u8], kmax: u32) -> Option<(u32, Vec<String>)> {
        let layout = InputLayout::new(model, Some(bytes)).unwrap();
        let mut full = input.to_vec();
        full.resize(layout.len(), 0);
        let mut ev = Evaluator::new(model);
        ev.run(&layout, &full, kmax)
            .unwrap()
            .map(|(k, bads)| (k, bads.iter().map(|&b| model.bads()[b].name.clone()).collect()))
    }

    #[test]
    fn exit_one_program() {
        let p = assemble("addi a0, zero, 1\naddi a7, zero, 93\necall\n").unwrap();
        let cfg = MachineConfig::default();
        let m = generate_model(&p, &cfg).unwrap();
        assert!(validate(&m).is_empty(), "{:?}", validate(&m));
        assert_eq!(least_k(&m, 1, &[0], 10), Some((2, vec!["bad-exit-code".to_string()])));
    }

    #[test]
    fn exit_zero_stays_put() {
        let p = assemble("addi a7, zero, 93\necall\n").unwrap();
        let m = generate_model(&p, &MachineConfig::default()).unwrap();
        let layout = InputLayout::new(&m, Some(1)).unwrap();
        let mut ev = Evaluator::new(&m);
        let mut s = ev.init_state(&layout, &vec![0; layout.len()]).unwrap();
        for _ in 0..2 {
            s = ev.step(&s).unwrap();
        }
        let after = ev.step(&s).unwrap();
        assert_eq!(after, s);
    }

    #[test]
    fn division_by_zero_only_for_ascii_zero() {
        let s = corpus::samples().into_iter().find(|s| s.name == "division-by-zero").unwrap();
        let m = generate_model(&s.program, &s.config).unwrap();
        let layout = InputLayout::new(&m, Some(1)).unwrap();
        let table = run_enumerated(&m, &layout, s.kmax).unwrap();
        let events = table.events();
        assert_eq!(events.len(), 1);
        let ((_, bad), inputs) = events.into_iter().next().unwrap();
        assert_eq!(bad, "division-by-zero");
        assert_eq!(inputs, vec![vec![0x30]]);
    }

    #[test]
    fn model_agrees_with_simulator_on_single_byte_samples() {
        for s in corpus::samples().into_iter().filter(|s| s.config.bytes_to_read == 1).take(4) {
            let m = generate_model(&s.program, &s.config).unwrap();
            assert!(validate(&m).is_empty(), "{}", s.name);
            for b in 0..=255u8 {
                let t = simulate(&s.program, &s.config, &[b], s.kmax).unwrap();
                let sim = t.violation.map(|(k, names)| (k, names.iter().map(|n| n.to_string()).collect()));
                assert_eq!(least_k(&m, 1, &[b], s.kmax), sim, "{} input {b:#x}", s.name);
            }
        }
    }
}
