//! Kernel generators: straight-line instruction programs for dense row-wise
//! matmul, the sparse-dense row-wise baseline, and the `vindexmac` kernel
//! with B-tile preloading. All loops are fully unrolled at generation time.
//!
//! Shared structure, B-stationary: the k dimension (rows of B) is tiled into
//! L-row tiles and the output columns into vector-length tiles. For each
//! (k-tile, j-tile) the `vindexmac` kernel preloads the B tile into v0..vL-1
//! and streams rows of A and C past it; the baseline walks the same tiles
//! but fetches each referenced B row from memory inside the inner loop.
//!
//! The generators keep the active vector length as wide as the data being
//! touched: exact lengths for loads and stores of matrix rows, `vl_max` for
//! register-to-register arithmetic (lanes past the stored length hold don't
//! care values that are never written back). Memory carries a `vl_max`-word
//! tail so wide inner-loop loads near the end of B stay in bounds.

use crate::error::{Error, Result};
use crate::isa::{Instruction, MemBase, OpCounts, Program, SReg, VReg, VectorConfig, NUM_VREGS};
use crate::matrix::{DenseMatrix, NMConfig, StructuredSparseMatrix};

/// Word addresses of the operand regions in simulator memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMap {
    pub a_values: usize,
    pub a_col_idx: usize,
    pub b: usize,
    pub c: usize,
    /// Total memory size, including slack for wide tail loads.
    pub mem_words: usize,
}

/// Addresses stay exactly representable in an f32 lane; the generators rely
/// on that for runtime-computed load addresses.
const MAX_ADDRESS: usize = 1 << 24;

impl AddressMap {
    fn layout(
        a_words: usize,
        idx_words: usize,
        b_words: usize,
        c_words: usize,
        slack: usize,
    ) -> Result<Self> {
        let a_values = 0;
        let a_col_idx = a_values + a_words;
        let b = a_col_idx + idx_words;
        let c = b + b_words;
        let mem_words = c + c_words + slack;
        if mem_words >= MAX_ADDRESS {
            return Err(Error::constraint(format!(
                "memory image of {mem_words} words exceeds the exactly-addressable range"
            )));
        }
        Ok(Self {
            a_values,
            a_col_idx,
            b,
            c,
            mem_words,
        })
    }

    pub fn for_sparse(
        a: &StructuredSparseMatrix,
        b_cols: usize,
        vcfg: VectorConfig,
    ) -> Result<Self> {
        let slots = a.rows * a.slots_per_row();
        Self::layout(
            slots,
            slots,
            a.cols * b_cols,
            a.rows * b_cols,
            vcfg.vl_max(),
        )
    }

    pub fn for_dense(a_shape: (usize, usize), b_cols: usize, vcfg: VectorConfig) -> Result<Self> {
        let (rows, cols) = a_shape;
        Self::layout(rows * cols, 0, cols * b_cols, rows * b_cols, vcfg.vl_max())
    }

    pub fn b_region(&self) -> std::ops::Range<usize> {
        self.b..self.c
    }
}

/// Tiling schedule: L rows of B per k-tile, one vector length of output
/// columns per j-tile, and the row-loop unroll factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePlan {
    pub l_rows: usize,
    pub unroll: usize,
    pub vl_max: usize,
    /// (k_start, rows) pairs covering the rows of B.
    pub k_tiles: Vec<(usize, usize)>,
    /// (col_start, active length) pairs covering the columns of B.
    pub j_tiles: Vec<(usize, usize)>,
}

fn chunks(total: usize, step: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(total.div_ceil(step));
    let mut start = 0;
    while start < total {
        let len = step.min(total - start);
        out.push((start, len));
        start += len;
    }
    out
}

/// Unrolled row groups: full groups of `unroll` rows, then one group per
/// remainder row.
fn row_groups(rows: usize, unroll: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut r = 0;
    while r + unroll <= rows {
        out.push((r, unroll));
        r += unroll;
    }
    while r < rows {
        out.push((r, 1));
        r += 1;
    }
    out
}

/// Builds the tiling schedule, rejecting invalid tile heights:
/// L must be a positive multiple of M, at most M * vl_max / N (taller tiles
/// could never be addressed by in-block column indexes), and must leave
/// room for the per-unrolled-row C/values/col_idx registers in the 32-entry
/// register file (L + 3 * unroll <= 32).
pub fn plan_tiles(
    a_shape: (usize, usize),
    b_shape: (usize, usize),
    nm: NMConfig,
    vcfg: VectorConfig,
    l_rows: usize,
    unroll: usize,
) -> Result<TilePlan> {
    let (a_rows, a_cols) = a_shape;
    let (b_rows, b_cols) = b_shape;
    if a_rows == 0 || a_cols == 0 || b_cols == 0 {
        return Err(Error::shape("dimensions must be positive"));
    }
    if a_cols != b_rows {
        return Err(Error::shape(format!(
            "inner dimensions differ: {a_rows}x{a_cols} * {b_rows}x{b_cols}"
        )));
    }
    if a_cols % nm.m() != 0 {
        return Err(Error::shape(format!(
            "a.cols {a_cols} not a multiple of block size {}",
            nm.m()
        )));
    }
    if unroll == 0 {
        return Err(Error::constraint("unroll must be positive"));
    }
    let vl_max = vcfg.vl_max();
    if l_rows == 0 || !l_rows.is_multiple_of(nm.m()) {
        return Err(Error::constraint(format!(
            "tile height {l_rows} must be a positive multiple of M={}",
            nm.m()
        )));
    }
    if l_rows * nm.n() > nm.m() * vl_max {
        return Err(Error::constraint(format!(
            "tile height {l_rows} exceeds M*VL/N = {}",
            nm.m() * vl_max / nm.n()
        )));
    }
    if l_rows + 3 * unroll > NUM_VREGS {
        return Err(Error::constraint(format!(
            "register budget exceeded: {l_rows} B rows + 3*{unroll} working registers > {NUM_VREGS}"
        )));
    }
    Ok(TilePlan {
        l_rows,
        unroll,
        vl_max,
        k_tiles: chunks(b_rows, l_rows),
        j_tiles: chunks(b_cols, vl_max),
    })
}

impl TilePlan {
    /// Non-zero slots a row of A contributes per k-tile of the given height.
    pub fn nnz_per_tile(&self, l_eff: usize, nm: NMConfig) -> usize {
        l_eff / nm.m() * nm.n()
    }
}

/// Which generated kernel to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Dense,
    Spmm,
    IndexMac,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Dense => "dense",
            KernelKind::Spmm => "spmm",
            KernelKind::IndexMac => "indexmac",
        })
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(KernelKind::Dense),
            "spmm" => Ok(KernelKind::Spmm),
            "indexmac" => Ok(KernelKind::IndexMac),
            other => Err(Error::parse(format!(
                "unknown kernel {other:?}, expected dense|spmm|indexmac"
            ))),
        }
    }
}

// Scalar register roles shared by the generators.
const X_BIAS: usize = 5;
const X_STRIDE: usize = 6;
const X_ROW: usize = 10;
const X_VAL: usize = 11;

struct Emitter {
    program: Program,
}

impl Emitter {
    fn new() -> Self {
        Emitter {
            program: Program::default(),
        }
    }

    fn setvl(&mut self, vl: usize) {
        self.program.push(Instruction::SetVl { vl });
    }

    fn vload(&mut self, vd: usize, base: MemBase) {
        self.program.push(Instruction::VLoad {
            vd: VReg::new(vd),
            base,
        });
    }

    fn vstore(&mut self, vs: usize, base: MemBase) {
        self.program.push(Instruction::VStore {
            vs: VReg::new(vs),
            base,
        });
    }

    fn li(&mut self, rd: usize, imm: i64) {
        self.program.push(Instruction::SLoadImm {
            rd: SReg::new(rd),
            imm,
        });
    }

    fn vadd_vx(&mut self, vd: usize, vs: usize, rs: usize) {
        self.program.push(Instruction::VAddVx {
            vd: VReg::new(vd),
            vs: VReg::new(vs),
            rs: SReg::new(rs),
        });
    }

    fn vmacc_vx(&mut self, vd: usize, rs: usize, vs2: usize) {
        self.program.push(Instruction::VMaccVx {
            vd: VReg::new(vd),
            rs: SReg::new(rs),
            vs2: VReg::new(vs2),
        });
    }

    fn vmv_x_s(&mut self, rd: usize, vs: usize) {
        self.program.push(Instruction::VMvXS {
            rd: SReg::new(rd),
            vs: VReg::new(vs),
        });
    }

    fn vslide(&mut self, vd: usize) {
        self.program.push(Instruction::VSlide1Down {
            vd: VReg::new(vd),
            vs: VReg::new(vd),
        });
    }

    fn vindexmac(&mut self, vd: usize, vs2: usize, rs: usize) {
        self.program.push(Instruction::VIndexMac {
            vd: VReg::new(vd),
            vs2: VReg::new(vs2),
            rs: SReg::new(rs),
        });
    }
}

/// Working registers of one unrolled row, laid out after the B tile:
/// C rows at vL.., values at vL+u.., column indexes at vL+2u...
fn sparse_regs(plan: &TilePlan) -> (usize, usize, usize) {
    let l = plan.l_rows;
    let u = plan.unroll;
    (l, l + u, l + 2 * u)
}

fn check_tile_indexes(a: &StructuredSparseMatrix, plan: &TilePlan) -> Result<()> {
    // Block boundaries never straddle k-tiles (both are multiples of M), so
    // a valid encoding always biases into [0, l_eff). Scan anyway so a
    // corrupted matrix fails at generation time rather than mid-simulation.
    for &(k_start, l_eff) in &plan.k_tiles {
        let lo = (k_start / a.nm.m()) * a.nm.n();
        let hi = ((k_start + l_eff) / a.nm.m()) * a.nm.n();
        for i in 0..a.rows {
            for &c in &a.col_idx_row(i)[lo..hi] {
                let biased = c as i64 - k_start as i64;
                if biased < 0 || biased >= l_eff as i64 {
                    return Err(Error::constraint(format!(
                        "row {i}: column index {c} biases outside tile [{k_start}, {})",
                        k_start + l_eff
                    )));
                }
            }
        }
    }
    Ok(())
}

fn check_sparse_inputs(a: &StructuredSparseMatrix, b_cols: usize, plan: &TilePlan) -> Result<()> {
    a.validate()?;
    let covered: usize = plan.k_tiles.iter().map(|t| t.1).sum();
    if covered != a.cols {
        return Err(Error::shape(format!(
            "plan covers {covered} inner elements, matrix has {}",
            a.cols
        )));
    }
    let j_covered: usize = plan.j_tiles.iter().map(|t| t.1).sum();
    if j_covered != b_cols {
        return Err(Error::shape(format!(
            "plan covers {j_covered} output columns, B has {b_cols}"
        )));
    }
    check_tile_indexes(a, plan)
}

/// Sparse-dense row-wise baseline. Per (k-tile, j-tile, row): load the
/// values / col_idx slices, turn the indexes into B row addresses
/// (one vadd.vx for the base bias plus one vmacc.vx for the row stride),
/// reload the partial C row, then per non-zero slot fetch the addressed row
/// of B from memory and multiply-accumulate -- six instructions per slot,
/// one of them a vector load.
pub fn gen_spmm_baseline(
    a: &StructuredSparseMatrix,
    b_cols: usize,
    addr: &AddressMap,
    plan: &TilePlan,
) -> Result<Program> {
    check_sparse_inputs(a, b_cols, plan)?;
    let nm = a.nm;
    let slots = a.slots_per_row();
    let (v_c, v_val, v_idx) = sparse_regs(plan);
    // The B tile registers are free here (nothing is preloaded); use them
    // for the per-row address vectors and the fetched B rows.
    let free: Vec<usize> = (0..plan.l_rows)
        .chain(plan.l_rows + 3 * plan.unroll..NUM_VREGS)
        .collect();
    let v_addr = |r: usize| free[r];
    let v_b = |r: usize| free[plan.unroll + r];

    let mut e = Emitter::new();
    e.li(X_STRIDE, b_cols as i64 - 1);
    for &(k_start, l_eff) in &plan.k_tiles {
        let nnz_t = plan.nnz_per_tile(l_eff, nm);
        let slot_off = (k_start / nm.m()) * nm.n();
        for &(j_start, vl_eff) in &plan.j_tiles {
            e.li(X_BIAS, (addr.b + j_start) as i64);
            for &(row0, u) in &row_groups(a.rows, plan.unroll) {
                e.setvl(nnz_t);
                for r in 0..u {
                    let row = row0 + r;
                    e.vload(
                        v_val + r,
                        MemBase::Imm(addr.a_values + row * slots + slot_off),
                    );
                    e.vload(
                        v_idx + r,
                        MemBase::Imm(addr.a_col_idx + row * slots + slot_off),
                    );
                }
                e.setvl(plan.vl_max);
                for r in 0..u {
                    // addr = col_idx + (b_base + j_start) + (b_cols-1)*col_idx
                    e.vadd_vx(v_addr(r), v_idx + r, X_BIAS);
                    e.vmacc_vx(v_addr(r), X_STRIDE, v_idx + r);
                }
                e.setvl(vl_eff);
                for r in 0..u {
                    e.vload(
                        v_c + r,
                        MemBase::Imm(addr.c + (row0 + r) * b_cols + j_start),
                    );
                }
                e.setvl(plan.vl_max);
                for _ in 0..nnz_t {
                    for r in 0..u {
                        e.vmv_x_s(X_ROW, v_addr(r));
                        e.vload(v_b(r), MemBase::Reg(SReg::new(X_ROW)));
                        e.vmv_x_s(X_VAL, v_val + r);
                        e.vmacc_vx(v_c + r, X_VAL, v_b(r));
                        e.vslide(v_val + r);
                        e.vslide(v_addr(r));
                    }
                }
                e.setvl(vl_eff);
                for r in 0..u {
                    e.vstore(
                        v_c + r,
                        MemBase::Imm(addr.c + (row0 + r) * b_cols + j_start),
                    );
                }
                e.program.iterations += 1;
            }
        }
    }
    Ok(e.program)
}

/// `vindexmac` kernel. Per (k-tile, j-tile): preload the L-row B tile into
/// v0..vL-1, then per row bias the loaded column indexes by -k_start so each
/// lane names the vector register holding its row of B, and accumulate with
/// `vindexmac` -- four instructions per non-zero slot, none of them memory.
pub fn gen_spmm_indexmac(
    a: &StructuredSparseMatrix,
    b_cols: usize,
    addr: &AddressMap,
    plan: &TilePlan,
) -> Result<Program> {
    check_sparse_inputs(a, b_cols, plan)?;
    let nm = a.nm;
    let slots = a.slots_per_row();
    let (v_c, v_val, v_idx) = sparse_regs(plan);

    let mut e = Emitter::new();
    for &(k_start, l_eff) in &plan.k_tiles {
        let nnz_t = plan.nnz_per_tile(l_eff, nm);
        let slot_off = (k_start / nm.m()) * nm.n();
        // B tile lives in v0..; biased indexes are register numbers directly.
        e.li(X_BIAS, -(k_start as i64));
        for &(j_start, vl_eff) in &plan.j_tiles {
            e.setvl(vl_eff);
            for l in 0..l_eff {
                e.vload(l, MemBase::Imm(addr.b + (k_start + l) * b_cols + j_start));
            }
            for &(row0, u) in &row_groups(a.rows, plan.unroll) {
                e.setvl(nnz_t);
                for r in 0..u {
                    let row = row0 + r;
                    e.vload(
                        v_val + r,
                        MemBase::Imm(addr.a_values + row * slots + slot_off),
                    );
                    e.vload(
                        v_idx + r,
                        MemBase::Imm(addr.a_col_idx + row * slots + slot_off),
                    );
                }
                e.setvl(plan.vl_max);
                for r in 0..u {
                    e.vadd_vx(v_idx + r, v_idx + r, X_BIAS);
                }
                e.setvl(vl_eff);
                for r in 0..u {
                    e.vload(
                        v_c + r,
                        MemBase::Imm(addr.c + (row0 + r) * b_cols + j_start),
                    );
                }
                e.setvl(plan.vl_max);
                for _ in 0..nnz_t {
                    for r in 0..u {
                        e.vmv_x_s(X_VAL, v_idx + r);
                        e.vindexmac(v_c + r, v_val + r, X_VAL);
                        e.vslide(v_val + r);
                        e.vslide(v_idx + r);
                    }
                }
                e.setvl(vl_eff);
                for r in 0..u {
                    e.vstore(
                        v_c + r,
                        MemBase::Imm(addr.c + (row0 + r) * b_cols + j_start),
                    );
                }
                e.program.iterations += 1;
            }
        }
    }
    Ok(e.program)
}

/// Dense row-wise kernel: per (row group, j-tile) the C rows stay in
/// registers while slices of the A rows stream through; every element of A
/// scales one row of B, which the unrolled rows share.
pub fn gen_dense(
    a_shape: (usize, usize),
    b_shape: (usize, usize),
    addr: &AddressMap,
    plan: &TilePlan,
) -> Result<Program> {
    let (a_rows, a_cols) = a_shape;
    let (b_rows, b_cols) = b_shape;
    if a_cols != b_rows {
        return Err(Error::shape(format!(
            "inner dimensions differ: {a_rows}x{a_cols} * {b_rows}x{b_cols}"
        )));
    }
    let j_covered: usize = plan.j_tiles.iter().map(|t| t.1).sum();
    if j_covered != b_cols {
        return Err(Error::shape(format!(
            "plan covers {j_covered} output columns, B has {b_cols}"
        )));
    }
    let u_max = plan.unroll;
    let v_c = |r: usize| r;
    let v_a = |r: usize| u_max + r;
    let v_b = 2 * u_max;

    let mut e = Emitter::new();
    for &(row0, u) in &row_groups(a_rows, plan.unroll) {
        for &(j_start, vl_eff) in &plan.j_tiles {
            e.setvl(vl_eff);
            for r in 0..u {
                e.vload(v_c(r), MemBase::Imm(addr.c + (row0 + r) * b_cols + j_start));
            }
            for (k0, klen) in chunks(a_cols, plan.vl_max) {
                e.setvl(klen);
                for r in 0..u {
                    e.vload(
                        v_a(r),
                        MemBase::Imm(addr.a_values + (row0 + r) * a_cols + k0),
                    );
                }
                e.setvl(plan.vl_max);
                for t in 0..klen {
                    e.vload(v_b, MemBase::Imm(addr.b + (k0 + t) * b_cols + j_start));
                    for r in 0..u {
                        e.vmv_x_s(X_VAL, v_a(r));
                        e.vmacc_vx(v_c(r), X_VAL, v_b);
                        e.vslide(v_a(r));
                    }
                }
            }
            e.setvl(vl_eff);
            for r in 0..u {
                e.vstore(v_c(r), MemBase::Imm(addr.c + (row0 + r) * b_cols + j_start));
            }
            e.program.iterations += 1;
        }
    }
    Ok(e.program)
}

/// Predicted issue counts for one kernel, plus the inner-loop profile used
/// by the instruction-replacement checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelCounts {
    pub counts: OpCounts,
    pub iterations: u64,
    /// Non-zero slots processed across all tiles (rows * slots * j-tiles).
    pub nnz_processed: u64,
    /// Instructions issued per non-zero slot by the inner loop.
    pub inner_issues_per_nnz: u64,
    /// Vector memory loads issued per non-zero slot by the inner loop.
    pub inner_vloads_per_nnz: u64,
}

/// Closed-form instruction counts for a generated kernel; exactly what the
/// interpreter's counters report after running it.
///
/// With R rows of A, S encoded slots per row, K inner elements, KT k-tiles,
/// JT j-tiles, RG unrolled row groups, and nnz_t = l_eff/M*N per k-tile:
///
/// baseline per (k-tile, j-tile): R*(3 + nnz_t) vector loads + R stores,
/// 5*RG setvl, R address computations (vadd + vmacc), and the inner loop's
/// 6 issues per slot; plus 1 li per (k-tile, j-tile) and 1 per program.
///
/// indexmac per (k-tile, j-tile): l_eff preloads + R*3 vector loads + R
/// stores, 1 + 5*RG setvl, R biases, and 4 issues per slot; plus 1 li per
/// k-tile.
///
/// dense per (row group, j-tile): u C loads/stores, u A loads and klen
/// shared B loads per k-chunk, 2 + 2*CH setvl, and 3 issues per element
/// lane.
pub fn analytic_counts(
    kernel: KernelKind,
    a_shape: (usize, usize),
    nm: NMConfig,
    plan: &TilePlan,
) -> KernelCounts {
    let (a_rows, a_cols) = a_shape;
    let r = a_rows as u64;
    let groups = row_groups(a_rows, plan.unroll).len() as u64;
    let jt = plan.j_tiles.len() as u64;
    let kt = plan.k_tiles.len() as u64;
    let b_cols: u64 = plan.j_tiles.iter().map(|t| t.1 as u64).sum();
    let vl_max = plan.vl_max as u64;
    let mut c = OpCounts::default();

    match kernel {
        KernelKind::Dense => {
            let k = a_cols as u64;
            let k_chunks = chunks(a_cols, plan.vl_max);
            let ch = k_chunks.len() as u64;
            c.setvl = groups * jt * (2 + 2 * ch);
            c.vload = jt * (r * (1 + ch) + groups * k);
            c.vstore = jt * r;
            c.vmv = jt * r * k;
            c.vmacc = jt * r * k;
            c.vslide = jt * r * k;
            c.load_elems = r * b_cols + jt * r * k + vl_max * jt * groups * k;
            c.store_elems = r * b_cols;
            return KernelCounts {
                counts: c,
                iterations: groups * jt,
                nnz_processed: jt * r * k,
                inner_issues_per_nnz: 3,
                inner_vloads_per_nnz: 0,
            };
        }
        KernelKind::Spmm | KernelKind::IndexMac => {}
    }

    let s: u64 = plan
        .k_tiles
        .iter()
        .map(|&(_, l_eff)| plan.nnz_per_tile(l_eff, nm) as u64)
        .sum();
    let nnz_processed = jt * r * s;
    let sum_l_vl: u64 = plan
        .k_tiles
        .iter()
        .flat_map(|&(_, l)| plan.j_tiles.iter().map(move |&(_, v)| (l * v) as u64))
        .sum();

    match kernel {
        KernelKind::Spmm => {
            c.sload = 1 + kt * jt;
            c.setvl = kt * jt * 5 * groups;
            c.vload = 3 * r * kt * jt + nnz_processed;
            c.vstore = r * kt * jt;
            c.vadd = r * kt * jt;
            c.vmacc = r * kt * jt + nnz_processed;
            c.vmv = 2 * nnz_processed;
            c.vslide = 2 * nnz_processed;
            c.load_elems = 2 * jt * r * s + r * kt * b_cols + vl_max * nnz_processed;
            c.store_elems = r * kt * b_cols;
            KernelCounts {
                counts: c,
                iterations: kt * jt * groups,
                nnz_processed,
                inner_issues_per_nnz: 6,
                inner_vloads_per_nnz: 1,
            }
        }
        KernelKind::IndexMac => {
            c.sload = kt;
            c.setvl = kt * jt * (1 + 5 * groups);
            // Preloads: sum of l_eff over k-tiles (= a_cols) once per j-tile.
            c.vload = jt * a_cols as u64 + 3 * r * kt * jt;
            c.vstore = r * kt * jt;
            c.vadd = r * kt * jt;
            c.vmv = nnz_processed;
            c.vindexmac = nnz_processed;
            c.vslide = 2 * nnz_processed;
            c.load_elems = sum_l_vl + 2 * jt * r * s + r * kt * b_cols;
            c.store_elems = r * kt * b_cols;
            KernelCounts {
                counts: c,
                iterations: kt * jt * groups,
                nnz_processed,
                inner_issues_per_nnz: 4,
                inner_vloads_per_nnz: 0,
            }
        }
        KernelKind::Dense => unreachable!(),
    }
}

/// Writes the sparse operands into a fresh memory image laid out per the
/// returned address map. Column indexes are stored as integer-valued words.
pub fn build_sparse_image(
    a: &StructuredSparseMatrix,
    b: &DenseMatrix,
    vcfg: VectorConfig,
) -> Result<(AddressMap, Vec<f32>)> {
    if a.cols != b.rows {
        return Err(Error::shape(format!(
            "inner dimensions differ: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let addr = AddressMap::for_sparse(a, b.cols, vcfg)?;
    let mut mem = vec![0.0f32; addr.mem_words];
    let slots = a.slots_per_row();
    for i in 0..a.rows {
        let v0 = addr.a_values + i * slots;
        mem[v0..v0 + slots].copy_from_slice(a.values_row(i));
        for (s, &ci) in a.col_idx_row(i).iter().enumerate() {
            mem[addr.a_col_idx + i * slots + s] = ci as f32;
        }
    }
    mem[addr.b..addr.b + b.rows * b.cols].copy_from_slice(b.data());
    Ok((addr, mem))
}

/// Dense-kernel memory image: row-major A in the values region, no index
/// region, then B and C.
pub fn build_dense_image(
    a: &DenseMatrix,
    b: &DenseMatrix,
    vcfg: VectorConfig,
) -> Result<(AddressMap, Vec<f32>)> {
    if a.cols != b.rows {
        return Err(Error::shape(format!(
            "inner dimensions differ: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let addr = AddressMap::for_dense((a.rows, a.cols), b.cols, vcfg)?;
    let mut mem = vec![0.0f32; addr.mem_words];
    mem[..a.rows * a.cols].copy_from_slice(a.data());
    mem[addr.b..addr.b + b.rows * b.cols].copy_from_slice(b.data());
    Ok((addr, mem))
}

/// Reads the result region back out of simulator memory.
pub fn extract_c(mem: &[f32], addr: &AddressMap, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(rows, cols, mem[addr.c..addr.c + rows * cols].to_vec())
        .expect("C region shape")
}
