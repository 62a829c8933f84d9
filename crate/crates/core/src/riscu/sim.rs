use super::{
    Instr, MachineConfig, MemoryLayout, Program, ROp, Reg, RiscuError, Segment, SYSCALL_BRK, SYSCALL_EXIT,
    SYSCALL_OPENAT, SYSCALL_READ, SYSCALL_WRITE,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyscallEvent {
    /// Transition at which the call completed.
    pub step: u32,
    pub id: u64,
    pub args: [u64; 3],
    pub ret: Option<u64>,
}

/// Outcome of a simulation. Steps count transitions of the generated model,
/// so a `read` of n bytes accounts for n steps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    /// Program counter before each transition, plus the final one.
    pub pcs: Vec<u64>,
    pub syscalls: Vec<SyscallEvent>,
    pub exit_code: Option<u64>,
    /// First step at which some bad property holds, with all bads holding there.
    pub violation: Option<(u32, Vec<&'static str>)>,
    pub steps: u32,
    /// Executed instructions; a multi-byte read counts once.
    pub instructions: u32,
}

struct Machine<'a> {
    lay: MemoryLayout,
    cfg: &'a MachineConfig,
    code: Vec<u32>,
    data: Vec<u64>,
    heap: Vec<u64>,
    stack: Vec<u64>,
    regs: [u64; 32],
    pc: u64,
    brk: u64,
    fd: u64,
    rc: u64,
    rt: u64,
}

fn range_in(seg: &Segment, addr: u64, len: u64) -> bool {
    match addr.checked_add(len) {
        Some(end) => addr >= seg.start && end <= seg.end(),
        None => {
            // The model computes the end modulo 2^64 and rejects wrap-around.
            false
        }
    }
}

impl Machine<'_> {
    fn reg(&self, r: Reg) -> u64 {
        self.regs[r.0 as usize]
    }

    fn segments(&self) -> [Segment; 3] {
        self.lay.data_segments()
    }

    fn any_segment(&self, addr: u64) -> bool {
        self.segments().iter().any(|s| s.contains(addr))
    }

    fn load(&self, addr: u64) -> u64 {
        let l = &self.lay;
        if l.data.contains(addr) {
            self.data[l.data.index(addr) as usize]
        } else if l.heap.contains(addr) {
            self.heap[l.heap.index(addr) as usize]
        } else if l.stack.contains(addr) {
            self.stack[l.stack.index(addr) as usize]
        } else {
            0
        }
    }

    fn store(&mut self, addr: u64, v: u64) {
        let l = self.lay;
        if l.data.contains(addr) {
            self.data[l.data.index(addr) as usize] = v;
        } else if l.heap.contains(addr) {
            self.heap[l.heap.index(addr) as usize] = v;
        } else if l.stack.contains(addr) {
            self.stack[l.stack.index(addr) as usize] = v;
        }
    }

    fn fetch(&self) -> Option<Result<Instr, RiscuError>> {
        if !self.lay.code.contains(self.pc) || self.pc % 4 != 0 {
            return None;
        }
        Some(Instr::decode(self.code[self.lay.code.index(self.pc) as usize]))
    }

    /// Bad properties holding in the current state, in declaration order.
    fn bads(&self) -> Vec<&'static str> {
        let p = self.cfg.properties;
        let mut out = Vec::new();
        let in_code = self.lay.code.contains(self.pc);
        if p.segfaults && !in_code {
            out.push("fetch-segfault");
        }
        if p.invalid_addresses && in_code && self.pc % 4 != 0 {
            out.push("invalid-code-address");
        }
        let instr = match self.fetch() {
            None => return out,
            Some(Err(_)) => {
                if p.unknown_instructions {
                    out.push("unknown-instruction");
                }
                return out;
            }
            Some(Ok(i)) => i,
        };
        let a0 = self.reg(Reg::A0);
        let a1 = self.reg(Reg::A1);
        let a2 = self.reg(Reg::A2);
        let sys = matches!(instr, Instr::Ecall).then(|| self.reg(Reg::A7));
        if p.bad_exit_code && sys == Some(SYSCALL_EXIT) && a0 != 0 {
            out.push("bad-exit-code");
        }
        if let Instr::R { op: ROp::Divu | ROp::Remu, rs2, .. } = instr {
            if p.division_by_zero && self.reg(rs2) == 0 {
                out.push("division-by-zero");
            }
        }
        let access = match instr {
            Instr::Ld { rs1, imm, .. } | Instr::Sd { rs1, imm, .. } => {
                Some((self.reg(rs1).wrapping_add(imm as u64), matches!(instr, Instr::Ld { .. })))
            }
            _ => None,
        };
        if let Some((addr, _)) = access {
            if p.invalid_addresses && addr % 8 != 0 {
                out.push("invalid-memory-address");
            }
        }
        if p.segfaults {
            if let Some((addr, is_load)) = access {
                if addr % 8 == 0 && !self.any_segment(addr) {
                    out.push(if is_load { "load-segfault" } else { "store-segfault" });
                }
            }
            if sys == Some(SYSCALL_READ) && a2 != 0 && !range_in(&self.lay.heap, a1, a2) {
                out.push("read-segfault");
            }
            if sys == Some(SYSCALL_WRITE) && a2 != 0 && !self.segments().iter().any(|s| range_in(s, a1, a2)) {
                out.push("write-segfault");
            }
            if sys == Some(SYSCALL_OPENAT) && !self.any_segment(a1) {
                out.push("openat-segfault");
            }
        }
        if p.unknown_syscalls {
            if let Some(id) = sys {
                if ![SYSCALL_EXIT, SYSCALL_READ, SYSCALL_WRITE, SYSCALL_OPENAT, SYSCALL_BRK].contains(&id) {
                    out.push("unknown-syscall");
                }
            }
        }
        out
    }

    fn set_reg(&mut self, r: Reg, v: u64) {
        if r.0 != 0 {
            self.regs[r.0 as usize] = v;
        }
    }

    /// Executes one transition. Returns the completed syscall, whether the
    /// transition finished an instruction, and whether the machine exited.
    fn step(&mut self, input: &[u8], step: u32) -> (Option<SyscallEvent>, bool, bool) {
        let Some(Ok(instr)) = self.fetch() else {
            // The model leaves everything but pc untouched; pc advances by 4.
            self.pc = self.pc.wrapping_add(4);
            return (None, true, false);
        };
        let pc4 = self.pc.wrapping_add(4);
        let mut next_pc = pc4;
        match instr {
            Instr::Lui { rd, imm20 } => self.set_reg(rd, ((imm20 << 12) as i32) as i64 as u64),
            Instr::Addi { rd, rs1, imm } => self.set_reg(rd, self.reg(rs1).wrapping_add(imm as u64)),
            Instr::Ld { rd, rs1, imm } => {
                let addr = self.reg(rs1).wrapping_add(imm as u64);
                self.set_reg(rd, self.load(addr));
            }
            Instr::Sd { rs1, rs2, imm } => {
                let addr = self.reg(rs1).wrapping_add(imm as u64);
                if addr % 8 == 0 {
                    self.store(addr, self.reg(rs2));
                }
            }
            Instr::R { op, rd, rs1, rs2 } => {
                let (a, b) = (self.reg(rs1), self.reg(rs2));
                let v = match op {
                    ROp::Add => a.wrapping_add(b),
                    ROp::Sub => a.wrapping_sub(b),
                    ROp::Mul => a.wrapping_mul(b),
                    ROp::Divu => a.checked_div(b).unwrap_or(u64::MAX),
                    ROp::Remu => a.checked_rem(b).unwrap_or(a),
                    ROp::Sltu => (a < b) as u64,
                };
                self.set_reg(rd, v);
            }
            Instr::Beq { rs1, rs2, offset } => {
                if self.reg(rs1) == self.reg(rs2) {
                    next_pc = self.pc.wrapping_add(offset as u64);
                }
            }
            Instr::Jal { rd, offset } => {
                self.set_reg(rd, pc4);
                next_pc = self.pc.wrapping_add(offset as u64);
            }
            Instr::Jalr { rd, rs1, imm } => {
                next_pc = self.reg(rs1).wrapping_add(imm as u64) & !1;
                self.set_reg(rd, pc4);
            }
            Instr::Ecall => return self.ecall(input, step),
        }
        self.pc = next_pc;
        (None, true, false)
    }

    fn ecall(&mut self, input: &[u8], step: u32) -> (Option<SyscallEvent>, bool, bool) {
        let id = self.reg(Reg::A7);
        let args = [self.reg(Reg::A0), self.reg(Reg::A1), self.reg(Reg::A2)];
        let pc4 = self.pc.wrapping_add(4);
        let event = |ret| Some(SyscallEvent { step, id, args, ret });
        match id {
            SYSCALL_EXIT => (event(None), true, true),
            SYSCALL_READ => {
                let n = args[2];
                let can_read = self.rc < n && self.rt < self.lay.bytes_to_read;
                let last = self.rc.wrapping_add(1) == n || self.rt.wrapping_add(1) == self.lay.bytes_to_read;
                let done = !can_read || last;
                if can_read {
                    let dest = args[1].wrapping_add(self.rc);
                    if self.lay.heap.contains(dest) {
                        let byte = input.get(self.rt as usize).copied().unwrap_or(0) as u64;
                        let shift = (dest & 7) * 8;
                        let i = self.lay.heap.index(dest) as usize;
                        self.heap[i] = (self.heap[i] & !(0xFF << shift)) | (byte << shift);
                    }
                    self.rt += 1;
                }
                if done {
                    let ret = if can_read { self.rc + 1 } else { self.rc };
                    self.rc = 0;
                    self.set_reg(Reg::A0, ret);
                    self.pc = pc4;
                    (event(Some(ret)), true, false)
                } else {
                    self.rc += 1;
                    (None, false, false)
                }
            }
            SYSCALL_WRITE => {
                self.set_reg(Reg::A0, args[2]);
                self.pc = pc4;
                (event(Some(args[2])), true, false)
            }
            SYSCALL_OPENAT => {
                let fd = self.fd;
                self.fd += 1;
                self.set_reg(Reg::A0, fd);
                self.pc = pc4;
                (event(Some(fd)), true, false)
            }
            SYSCALL_BRK => {
                if args[0] >= self.brk && args[0] <= self.lay.heap.end() {
                    self.brk = args[0];
                }
                self.set_reg(Reg::A0, self.brk);
                self.pc = pc4;
                (event(Some(self.brk)), true, false)
            }
            _ => {
                self.pc = pc4;
                (None, true, false)
            }
        }
    }
}

/// Runs `program` on concrete input, one model transition at a time, and
/// stops at the first bad state, at exit, or after `max_steps` transitions.
pub fn simulate(program: &Program, cfg: &MachineConfig, input: &[u8], max_steps: u32) -> Result<Trace, RiscuError> {
    let lay = MemoryLayout::new(program, cfg)?;
    let mut code = program.code.clone();
    code.resize(lay.code.words() as usize, 0);
    let mut data = program.data.clone();
    data.resize(lay.data.words() as usize, 0);
    let mut regs = [0u64; 32];
    regs[Reg::SP.0 as usize] = lay.initial_sp();
    let mut m = Machine {
        lay,
        cfg,
        code,
        data,
        heap: vec![0; lay.heap.words() as usize],
        stack: vec![0; lay.stack.words() as usize],
        regs,
        pc: super::CODE_START,
        brk: lay.heap.start,
        fd: 3,
        rc: 0,
        rt: 0,
    };
    let mut trace = Trace::default();
    for step in 0..=max_steps {
        trace.pcs.push(m.pc);
        let bads = m.bads();
        if !bads.is_empty() {
            trace.violation = Some((step, bads));
            break;
        }
        if step == max_steps {
            break;
        }
        let (event, finished, exited) = m.step(input, step);
        if let Some(e) = event {
            trace.syscalls.push(e);
        }
        trace.instructions += finished as u32;
        if exited {
            trace.exit_code = Some(m.reg(Reg::A0));
            break;
        }
        trace.steps += 1;
    }
    Ok(trace)
}
