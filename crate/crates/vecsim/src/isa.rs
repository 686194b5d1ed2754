//! Machine state and instruction-level interpreter for the vector engine
//! subset used by the matmul kernels, including the custom `vindexmac`
//! indirect register-file read.
//!
//! Lanes are 32-bit reals. Scalar registers are 64 bits wide and carry one
//! scalar operand value apiece (stored as f64 bits): `vmv.x.s` forwards a
//! lane value, `li`/`sadd` produce integers, and the consuming instruction
//! decides how to use the value -- `vmacc.vx`/`vindexmac.vx` as an f32
//! multiplicand or a register number, loads/stores as a word address.
//! Integer values below 2^24 survive all of these paths exactly, which is
//! the range the kernel generators stay in.
//!
//! Memory is a flat array of 32-bit words; one address names one element.

use std::fmt;

use thiserror::Error;

use crate::error::{Error as CrateError, Result as CrateResult};
use crate::timing::CostModel;

pub const NUM_VREGS: usize = 32;
pub const NUM_SREGS: usize = 32;

/// Vector engine geometry. Defaults to a 512-bit register file with 32-bit
/// elements, i.e. 16 lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorConfig {
    pub vlen_bits: usize,
    pub sew_bits: usize,
}

impl VectorConfig {
    pub fn new(vlen_bits: usize, sew_bits: usize) -> CrateResult<Self> {
        // Lanes are f32 throughout; other element widths are not modeled.
        if sew_bits != 32 {
            return Err(CrateError::constraint(format!(
                "element width is fixed at 32 bits, got sew {sew_bits}"
            )));
        }
        if vlen_bits == 0 || !vlen_bits.is_multiple_of(sew_bits) {
            return Err(CrateError::constraint(format!(
                "vlen {vlen_bits} must be a positive multiple of sew {sew_bits}"
            )));
        }
        Ok(Self {
            vlen_bits,
            sew_bits,
        })
    }

    #[inline]
    pub fn vl_max(&self) -> usize {
        self.vlen_bits / self.sew_bits
    }
}

impl Default for VectorConfig {
    fn default() -> Self {
        Self {
            vlen_bits: 512,
            sew_bits: 32,
        }
    }
}

/// Vector register number, always < 32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VReg(u8);

/// Scalar register number, always < 32. x0 reads as zero and ignores writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SReg(u8);

impl VReg {
    pub fn new(n: usize) -> Self {
        assert!(n < NUM_VREGS, "vector register v{n} out of range");
        VReg(n as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SReg {
    pub const ZERO: SReg = SReg(0);

    pub fn new(n: usize) -> Self {
        assert!(n < NUM_SREGS, "scalar register x{n} out of range");
        SReg(n as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for SReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Base operand of a vector memory instruction: a literal word address or a
/// scalar register holding one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemBase {
    Imm(usize),
    Reg(SReg),
}

impl fmt::Display for MemBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemBase::Imm(a) => write!(f, "{a}"),
            MemBase::Reg(r) => write!(f, "({r})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    /// `setvl n`: set the active vector length.
    SetVl { vl: usize },
    /// `vload vd, base`: `vd[0..vl] = mem[base..base+vl]`.
    VLoad { vd: VReg, base: MemBase },
    /// `vstore vs, base`: `mem[base..base+vl] = vs[0..vl]`.
    VStore { vs: VReg, base: MemBase },
    /// `vmacc.vx vd, rs, vs2`: `vd[i] += scalar(rs) * vs2[i]`.
    VMaccVx { vd: VReg, rs: SReg, vs2: VReg },
    /// `vadd.vx vd, vs, rs`: `vd[i] = vs[i] + scalar(rs)`.
    VAddVx { vd: VReg, vs: VReg, rs: SReg },
    /// `vslide1down vd, vs`: `vd[i] = vs[i+1]`, zero shifted into lane vl-1.
    VSlide1Down { vd: VReg, vs: VReg },
    /// `vmv.x.s rd, vs`: `scalar(rd) = vs[0]`.
    VMvXS { rd: SReg, vs: VReg },
    /// `li rd, imm`.
    SLoadImm { rd: SReg, imm: i64 },
    /// `sadd rd, ra, rb`.
    SAdd { rd: SReg, ra: SReg, rb: SReg },
    /// `vindexmac.vx vd, vs2, rs`: `vd[i] += vs2[0] * vrf[scalar(rs) mod 32][i]`.
    VIndexMac { vd: VReg, vs2: VReg, rs: SReg },
}

/// Straight-line instruction trace plus the number of unrolled-loop
/// iterations it stands for (used by the timing model's per-iteration
/// overhead; not part of the text format).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub insts: Vec<Instruction>,
    pub iterations: u64,
}

impl Program {
    pub fn push(&mut self, inst: Instruction) {
        self.insts.push(inst);
    }

    pub fn len(&self) -> usize {
        self.insts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.insts.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.insts.len() * 24);
        for inst in &self.insts {
            s.push_str(&inst.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses a textual dump. Blank lines and `#` comments are skipped;
    /// `iterations` is not represented in the format and comes back as 0.
    pub fn parse(text: &str) -> CrateResult<Self> {
        let mut insts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let inst = line
                .parse::<Instruction>()
                .map_err(|e| CrateError::parse(format!("line {}: {e}", lineno + 1)))?;
            insts.push(inst);
        }
        Ok(Program {
            insts,
            iterations: 0,
        })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::SetVl { vl } => write!(f, "setvl {vl}"),
            Instruction::VLoad { vd, base } => write!(f, "vload {vd}, {base}"),
            Instruction::VStore { vs, base } => write!(f, "vstore {vs}, {base}"),
            Instruction::VMaccVx { vd, rs, vs2 } => write!(f, "vmacc.vx {vd}, {rs}, {vs2}"),
            Instruction::VAddVx { vd, vs, rs } => write!(f, "vadd.vx {vd}, {vs}, {rs}"),
            Instruction::VSlide1Down { vd, vs } => write!(f, "vslide1down {vd}, {vs}"),
            Instruction::VMvXS { rd, vs } => write!(f, "vmv.x.s {rd}, {vs}"),
            Instruction::SLoadImm { rd, imm } => write!(f, "li {rd}, {imm}"),
            Instruction::SAdd { rd, ra, rb } => write!(f, "sadd {rd}, {ra}, {rb}"),
            Instruction::VIndexMac { vd, vs2, rs } => write!(f, "vindexmac.vx {vd}, {vs2}, {rs}"),
        }
    }
}

fn parse_vreg(tok: &str) -> Result<VReg, String> {
    let n: usize = tok
        .strip_prefix('v')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("expected vector register, got {tok:?}"))?;
    if n >= NUM_VREGS {
        return Err(format!("vector register {tok} out of range"));
    }
    Ok(VReg(n as u8))
}

fn parse_sreg(tok: &str) -> Result<SReg, String> {
    let n: usize = tok
        .strip_prefix('x')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("expected scalar register, got {tok:?}"))?;
    if n >= NUM_SREGS {
        return Err(format!("scalar register {tok} out of range"));
    }
    Ok(SReg(n as u8))
}

fn parse_base(tok: &str) -> Result<MemBase, String> {
    if let Some(inner) = tok.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        Ok(MemBase::Reg(parse_sreg(inner)?))
    } else {
        tok.parse::<usize>()
            .map(MemBase::Imm)
            .map_err(|_| format!("expected address or (xN), got {tok:?}"))
    }
}

impl std::str::FromStr for Instruction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (mnemonic, rest) = s
            .trim()
            .split_once(char::is_whitespace)
            .unwrap_or((s.trim(), ""));
        let ops: Vec<&str> = rest
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .collect();
        let argc = |n: usize| -> Result<(), String> {
            if ops.len() == n {
                Ok(())
            } else {
                Err(format!("{mnemonic} takes {n} operands, got {}", ops.len()))
            }
        };
        match mnemonic {
            "setvl" => {
                argc(1)?;
                let vl = ops[0]
                    .parse()
                    .map_err(|_| format!("bad length {:?}", ops[0]))?;
                Ok(Instruction::SetVl { vl })
            }
            "vload" => {
                argc(2)?;
                Ok(Instruction::VLoad {
                    vd: parse_vreg(ops[0])?,
                    base: parse_base(ops[1])?,
                })
            }
            "vstore" => {
                argc(2)?;
                Ok(Instruction::VStore {
                    vs: parse_vreg(ops[0])?,
                    base: parse_base(ops[1])?,
                })
            }
            "vmacc.vx" => {
                argc(3)?;
                Ok(Instruction::VMaccVx {
                    vd: parse_vreg(ops[0])?,
                    rs: parse_sreg(ops[1])?,
                    vs2: parse_vreg(ops[2])?,
                })
            }
            "vadd.vx" => {
                argc(3)?;
                Ok(Instruction::VAddVx {
                    vd: parse_vreg(ops[0])?,
                    vs: parse_vreg(ops[1])?,
                    rs: parse_sreg(ops[2])?,
                })
            }
            "vslide1down" => {
                argc(2)?;
                Ok(Instruction::VSlide1Down {
                    vd: parse_vreg(ops[0])?,
                    vs: parse_vreg(ops[1])?,
                })
            }
            "vmv.x.s" => {
                argc(2)?;
                Ok(Instruction::VMvXS {
                    rd: parse_sreg(ops[0])?,
                    vs: parse_vreg(ops[1])?,
                })
            }
            "li" => {
                argc(2)?;
                let imm = ops[1]
                    .parse()
                    .map_err(|_| format!("bad immediate {:?}", ops[1]))?;
                Ok(Instruction::SLoadImm {
                    rd: parse_sreg(ops[0])?,
                    imm,
                })
            }
            "sadd" => {
                argc(3)?;
                Ok(Instruction::SAdd {
                    rd: parse_sreg(ops[0])?,
                    ra: parse_sreg(ops[1])?,
                    rb: parse_sreg(ops[2])?,
                })
            }
            "vindexmac.vx" => {
                argc(3)?;
                Ok(Instruction::VIndexMac {
                    vd: parse_vreg(ops[0])?,
                    vs2: parse_vreg(ops[1])?,
                    rs: parse_sreg(ops[2])?,
                })
            }
            other => Err(format!("unknown mnemonic {other:?}")),
        }
    }
}

/// Execution fault raised by a single instruction.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum Fault {
    #[error("vector length {vl} outside (0, {vl_max}]")]
    VlOutOfRange { vl: usize, vl_max: usize },
    #[error("memory access [{addr}, {addr}+{vl}) outside 0..{mem_words}")]
    AddrOutOfRange {
        addr: usize,
        vl: usize,
        mem_words: usize,
    },
    #[error("scalar register holds invalid address value {value}")]
    BadAddress { value: f64 },
}

/// Per-mnemonic issue counts plus total words moved by memory instructions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub setvl: u64,
    pub vload: u64,
    pub vstore: u64,
    pub vmacc: u64,
    pub vadd: u64,
    pub vslide: u64,
    pub vmv: u64,
    pub vindexmac: u64,
    pub sload: u64,
    pub sadd: u64,
    pub load_elems: u64,
    pub store_elems: u64,
}

impl OpCounts {
    pub fn total_instructions(&self) -> u64 {
        self.setvl
            + self.vload
            + self.vstore
            + self.vmacc
            + self.vadd
            + self.vslide
            + self.vmv
            + self.vindexmac
            + self.sload
            + self.sadd
    }

    /// Vector loads plus vector stores: the memory-traffic measure the
    /// benchmark reports.
    pub fn total_mem_ops(&self) -> u64 {
        self.vload + self.vstore
    }

    pub fn scalar_ops(&self) -> u64 {
        self.sload + self.sadd
    }
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, o: Self) {
        self.setvl += o.setvl;
        self.vload += o.vload;
        self.vstore += o.vstore;
        self.vmacc += o.vmacc;
        self.vadd += o.vadd;
        self.vslide += o.vslide;
        self.vmv += o.vmv;
        self.vindexmac += o.vindexmac;
        self.sload += o.sload;
        self.sadd += o.sadd;
        self.load_elems += o.load_elems;
        self.store_elems += o.store_elems;
    }
}

/// Execution statistics: issue counts and the accumulated cycle estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExecStats {
    pub counts: OpCounts,
    pub cycles: u64,
}

impl ExecStats {
    pub fn vector_mem_loads(&self) -> u64 {
        self.counts.vload
    }

    pub fn vector_mem_stores(&self) -> u64 {
        self.counts.vstore
    }

    pub fn vrf_indirect_reads(&self) -> u64 {
        self.counts.vindexmac
    }
}

/// One memory access, as reported to a `run_observed` observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemAccess {
    pub is_store: bool,
    pub addr: usize,
    pub vl: usize,
    pub inst_index: usize,
}

/// Scalar registers, vector register file, flat word-addressed memory, the
/// active vector length, and statistics counters.
#[derive(Debug, Clone)]
pub struct MachineState {
    vcfg: VectorConfig,
    sregs: [u64; NUM_SREGS],
    vregs: Vec<f32>,
    pub mem: Vec<f32>,
    vl: usize,
    pub stats: ExecStats,
}

impl MachineState {
    pub fn new(vcfg: VectorConfig, mem_words: usize) -> Self {
        Self::with_mem(vcfg, vec![0.0; mem_words])
    }

    pub fn with_mem(vcfg: VectorConfig, mem: Vec<f32>) -> Self {
        let vl_max = vcfg.vl_max();
        Self {
            vcfg,
            sregs: [0; NUM_SREGS],
            vregs: vec![0.0; NUM_VREGS * vl_max],
            mem,
            vl: vl_max,
            stats: ExecStats::default(),
        }
    }

    #[inline]
    pub fn vcfg(&self) -> VectorConfig {
        self.vcfg
    }

    #[inline]
    pub fn vl(&self) -> usize {
        self.vl
    }

    pub fn vreg(&self, r: VReg) -> &[f32] {
        let w = self.vcfg.vl_max();
        &self.vregs[r.index() * w..(r.index() + 1) * w]
    }

    pub fn vreg_mut(&mut self, r: VReg) -> &mut [f32] {
        let w = self.vcfg.vl_max();
        &mut self.vregs[r.index() * w..(r.index() + 1) * w]
    }

    /// The scalar value a consuming instruction would see.
    pub fn sreg_value(&self, r: SReg) -> f64 {
        if r.index() == 0 {
            0.0
        } else {
            f64::from_bits(self.sregs[r.index()])
        }
    }

    /// Writes a scalar value; writes to x0 are dropped.
    pub fn set_sreg_value(&mut self, r: SReg, v: f64) {
        if r.index() != 0 {
            self.sregs[r.index()] = v.to_bits();
        }
    }

    fn resolve(&self, base: MemBase) -> Result<usize, Fault> {
        match base {
            MemBase::Imm(a) => Ok(a),
            MemBase::Reg(r) => {
                let v = self.sreg_value(r);
                if !v.is_finite() || v < 0.0 {
                    return Err(Fault::BadAddress { value: v });
                }
                Ok(v as usize)
            }
        }
    }

    fn check_mem(&self, addr: usize, vl: usize) -> Result<(), Fault> {
        if addr.checked_add(vl).is_none_or(|end| end > self.mem.len()) {
            return Err(Fault::AddrOutOfRange {
                addr,
                vl,
                mem_words: self.mem.len(),
            });
        }
        Ok(())
    }

    /// Executes one instruction, updating lanes [0, vl), the statistics
    /// counters, and the cycle estimate.
    pub fn step(&mut self, inst: &Instruction, cost: &CostModel) -> Result<(), Fault> {
        let vl = self.vl;
        let w = self.vcfg.vl_max();
        match *inst {
            Instruction::SetVl { vl: new_vl } => {
                if new_vl == 0 || new_vl > w {
                    return Err(Fault::VlOutOfRange {
                        vl: new_vl,
                        vl_max: w,
                    });
                }
                self.vl = new_vl;
                self.stats.counts.setvl += 1;
                self.stats.cycles += cost.setvl;
            }
            Instruction::VLoad { vd, base } => {
                let addr = self.resolve(base)?;
                self.check_mem(addr, vl)?;
                let d = vd.index() * w;
                self.vregs[d..d + vl].copy_from_slice(&self.mem[addr..addr + vl]);
                self.stats.counts.vload += 1;
                self.stats.counts.load_elems += vl as u64;
                self.stats.cycles += cost.vload_base + cost.per_element_mem * vl as u64;
            }
            Instruction::VStore { vs, base } => {
                let addr = self.resolve(base)?;
                self.check_mem(addr, vl)?;
                let s = vs.index() * w;
                self.mem[addr..addr + vl].copy_from_slice(&self.vregs[s..s + vl]);
                self.stats.counts.vstore += 1;
                self.stats.counts.store_elems += vl as u64;
                self.stats.cycles += cost.vstore_base + cost.per_element_mem * vl as u64;
            }
            Instruction::VMaccVx { vd, rs, vs2 } => {
                let s = self.sreg_value(rs) as f32;
                let d = vd.index() * w;
                let a = vs2.index() * w;
                for i in 0..vl {
                    self.vregs[d + i] += s * self.vregs[a + i];
                }
                self.stats.counts.vmacc += 1;
                self.stats.cycles += cost.valu;
            }
            Instruction::VAddVx { vd, vs, rs } => {
                let s = self.sreg_value(rs) as f32;
                let d = vd.index() * w;
                let a = vs.index() * w;
                for i in 0..vl {
                    self.vregs[d + i] = self.vregs[a + i] + s;
                }
                self.stats.counts.vadd += 1;
                self.stats.cycles += cost.valu;
            }
            Instruction::VSlide1Down { vd, vs } => {
                let d = vd.index() * w;
                let a = vs.index() * w;
                for i in 0..vl - 1 {
                    self.vregs[d + i] = self.vregs[a + i + 1];
                }
                self.vregs[d + vl - 1] = 0.0;
                self.stats.counts.vslide += 1;
                self.stats.cycles += cost.valu;
            }
            Instruction::VMvXS { rd, vs } => {
                let v = self.vregs[vs.index() * w];
                self.set_sreg_value(rd, v as f64);
                self.stats.counts.vmv += 1;
                self.stats.cycles += cost.vmv;
            }
            Instruction::SLoadImm { rd, imm } => {
                self.set_sreg_value(rd, imm as f64);
                self.stats.counts.sload += 1;
                self.stats.cycles += cost.scalar_op;
            }
            Instruction::SAdd { rd, ra, rb } => {
                let v = self.sreg_value(ra) + self.sreg_value(rb);
                self.set_sreg_value(rd, v);
                self.stats.counts.sadd += 1;
                self.stats.cycles += cost.scalar_op;
            }
            Instruction::VIndexMac { vd, vs2, rs } => {
                // Only the 5 least significant bits of the scalar value
                // address the register file.
                let reg = (self.sreg_value(rs) as i64).rem_euclid(NUM_VREGS as i64) as usize;
                let s0 = self.vregs[vs2.index() * w];
                let d = vd.index() * w;
                let a = reg * w;
                for i in 0..vl {
                    self.vregs[d + i] += s0 * self.vregs[a + i];
                }
                self.stats.counts.vindexmac += 1;
                self.stats.cycles += cost.valu;
            }
        }
        Ok(())
    }
}

/// Folds `step` over the whole program; faults carry the offending
/// instruction index. Returns the statistics accumulated by this run.
pub fn run(
    state: &mut MachineState,
    program: &Program,
    cost: &CostModel,
) -> CrateResult<ExecStats> {
    let before = state.stats;
    for (index, inst) in program.insts.iter().enumerate() {
        state
            .step(inst, cost)
            .map_err(|fault| CrateError::Exec { index, fault })?;
    }
    let mut stats = state.stats;
    stats.cycles -= before.cycles;
    stats.counts = sub_counts(stats.counts, before.counts);
    Ok(stats)
}

fn sub_counts(a: OpCounts, b: OpCounts) -> OpCounts {
    OpCounts {
        setvl: a.setvl - b.setvl,
        vload: a.vload - b.vload,
        vstore: a.vstore - b.vstore,
        vmacc: a.vmacc - b.vmacc,
        vadd: a.vadd - b.vadd,
        vslide: a.vslide - b.vslide,
        vmv: a.vmv - b.vmv,
        vindexmac: a.vindexmac - b.vindexmac,
        sload: a.sload - b.sload,
        sadd: a.sadd - b.sadd,
        load_elems: a.load_elems - b.load_elems,
        store_elems: a.store_elems - b.store_elems,
    }
}

/// Like `run`, but reports every memory access to `observe`. Used to
/// classify loads by address region.
pub fn run_observed(
    state: &mut MachineState,
    program: &Program,
    cost: &CostModel,
    mut observe: impl FnMut(MemAccess),
) -> CrateResult<ExecStats> {
    let before = state.stats;
    for (index, inst) in program.insts.iter().enumerate() {
        if let Instruction::VLoad { base, .. } | Instruction::VStore { base, .. } = inst {
            let addr = state
                .resolve(*base)
                .map_err(|fault| CrateError::Exec { index, fault })?;
            observe(MemAccess {
                is_store: matches!(inst, Instruction::VStore { .. }),
                addr,
                vl: state.vl,
                inst_index: index,
            });
        }
        state
            .step(inst, cost)
            .map_err(|fault| CrateError::Exec { index, fault })?;
    }
    let mut stats = state.stats;
    stats.cycles -= before.cycles;
    stats.counts = sub_counts(stats.counts, before.counts);
    Ok(stats)
}
