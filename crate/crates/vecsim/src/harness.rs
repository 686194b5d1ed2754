//! Benchmark harness: configuration, layer-shape suites, kernel execution
//! with verification against the dense reference, and CSV reporting.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::codegen::{
    analytic_counts, build_dense_image, build_sparse_image, extract_c, gen_dense,
    gen_spmm_baseline, gen_spmm_indexmac, plan_tiles, AddressMap, KernelKind,
};
use crate::error::{Error, Result};
use crate::isa::{run_observed, ExecStats, Instruction, MachineState, MemBase, VectorConfig};
use crate::matrix::{
    decode_nm, dense_matmul, parse_mtxt, write_mtxt, DenseMatrix, Matrix, NMConfig,
    StructuredSparseMatrix,
};
use crate::timing::{cycles_of, speedup, CostModel};

/// Verification tolerance when a result is not bit-identical to the oracle.
pub const VERIFY_REL_TOL: f32 = 1e-5;

/// Run-time configuration: engine geometry, tiling, seed, and cycle costs.
/// Loadable from a flat `key = value` text file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub vcfg: VectorConfig,
    pub l_rows: usize,
    pub unroll: usize,
    pub seed: u64,
    pub cost: CostModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            vcfg: VectorConfig::default(),
            l_rows: 16,
            unroll: 4,
            seed: 42,
            cost: CostModel::default(),
        }
    }
}

/// Parses `key = value` lines over the default configuration. `#` starts a
/// comment; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut vlen = cfg.vcfg.vlen_bits;
    let mut sew = cfg.vcfg.sew_bits;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let int = || -> Result<u64> {
            value
                .parse()
                .map_err(|_| Error::parse(format!("line {}: bad value {value:?}", lineno + 1)))
        };
        match key {
            "vlen" => vlen = int()? as usize,
            "sew" => sew = int()? as usize,
            "L" => cfg.l_rows = int()? as usize,
            "unroll" => cfg.unroll = int()? as usize,
            "seed" => cfg.seed = int()?,
            "vload_base" => cfg.cost.vload_base = int()?,
            "vstore_base" => cfg.cost.vstore_base = int()?,
            "per_element_mem" => cfg.cost.per_element_mem = int()?,
            "valu" => cfg.cost.valu = int()?,
            "vmv" => cfg.cost.vmv = int()?,
            "scalar_op" => cfg.cost.scalar_op = int()?,
            "setvl" => cfg.cost.setvl = int()?,
            "loop_overhead" => cfg.cost.loop_overhead = int()?,
            other => {
                return Err(Error::parse(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    cfg.vcfg = VectorConfig::new(vlen, sew)?;
    cfg.cost.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config(&text)
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_mtxt(&text)
}

pub fn save_matrix(path: &Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, write_mtxt(m)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Outcome of executing one generated kernel on a fresh machine.
#[derive(Debug, Clone)]
pub struct KernelRun {
    pub kernel: KernelKind,
    pub verified: bool,
    pub max_abs_diff: f32,
    pub stats: ExecStats,
    pub cycles: u64,
    pub iterations: u64,
    pub program_len: usize,
    /// Vector loads that hit the B region through a register-held address
    /// (the baseline's inner-loop row fetches).
    pub b_loads_indirect: u64,
    /// Vector loads that hit the B region at a literal address (the
    /// indexmac kernel's tile preloads).
    pub b_loads_immediate: u64,
    pub result: DenseMatrix,
}

fn execute(
    program: &crate::isa::Program,
    addr: &AddressMap,
    mem: Vec<f32>,
    cfg: &SimConfig,
    out_shape: (usize, usize),
    oracle: &DenseMatrix,
    kernel: KernelKind,
) -> Result<KernelRun> {
    let mut st = MachineState::with_mem(cfg.vcfg, mem);
    let b_region = addr.b_region();
    let mut b_loads_indirect = 0u64;
    let mut b_loads_immediate = 0u64;
    let stats = run_observed(&mut st, program, &cfg.cost, |acc| {
        if !acc.is_store && b_region.contains(&acc.addr) {
            match program.insts[acc.inst_index] {
                Instruction::VLoad {
                    base: MemBase::Reg(_),
                    ..
                } => b_loads_indirect += 1,
                _ => b_loads_immediate += 1,
            }
        }
    })?;
    let result = extract_c(&st.mem, addr, out_shape.0, out_shape.1);
    let verified = result.matches(oracle, VERIFY_REL_TOL);
    let max_abs_diff = result.max_abs_diff(oracle)?;
    Ok(KernelRun {
        kernel,
        verified,
        max_abs_diff,
        stats,
        cycles: cycles_of(program, &stats, &cfg.cost),
        iterations: program.iterations,
        program_len: program.len(),
        b_loads_indirect,
        b_loads_immediate,
        result,
    })
}

/// Generates and runs one of the sparse kernels, verifying the C region
/// against `oracle` (the dense product of the decoded A with B).
pub fn run_sparse_kernel(
    kernel: KernelKind,
    a: &StructuredSparseMatrix,
    b: &DenseMatrix,
    oracle: &DenseMatrix,
    cfg: &SimConfig,
) -> Result<KernelRun> {
    let plan = plan_tiles(
        (a.rows, a.cols),
        (b.rows, b.cols),
        a.nm,
        cfg.vcfg,
        cfg.l_rows,
        cfg.unroll,
    )?;
    let (addr, mem) = build_sparse_image(a, b, cfg.vcfg)?;
    let program = match kernel {
        KernelKind::Spmm => gen_spmm_baseline(a, b.cols, &addr, &plan)?,
        KernelKind::IndexMac => gen_spmm_indexmac(a, b.cols, &addr, &plan)?,
        KernelKind::Dense => {
            return Err(Error::constraint(
                "dense kernel takes a dense matrix; use run_dense_kernel",
            ))
        }
    };
    execute(&program, &addr, mem, cfg, (a.rows, b.cols), oracle, kernel)
}

/// Generates and runs the dense row-wise kernel.
pub fn run_dense_kernel(a: &DenseMatrix, b: &DenseMatrix, cfg: &SimConfig) -> Result<KernelRun> {
    // The dense kernel has no N:M constraint; plan with a degenerate 1:1
    // pattern so any inner dimension is accepted. The tile height only has
    // to fit the register budget, which plan_tiles still enforces.
    let nm = NMConfig::new(1, 1).unwrap();
    let budget = 32usize.saturating_sub(3 * cfg.unroll).max(1);
    let l = cfg.l_rows.min(cfg.vcfg.vl_max()).min(budget);
    let plan = plan_tiles(
        (a.rows, a.cols),
        (b.rows, b.cols),
        nm,
        cfg.vcfg,
        l,
        cfg.unroll,
    )?;
    let (addr, mem) = build_dense_image(a, b, cfg.vcfg)?;
    let program = gen_dense((a.rows, a.cols), (b.rows, b.cols), &addr, &plan)?;
    let oracle = dense_matmul(a, b)?;
    execute(
        &program,
        &addr,
        mem,
        cfg,
        (a.rows, b.cols),
        &oracle,
        KernelKind::Dense,
    )
}

/// Full report for a `run` invocation: the requested kernel, and for the
/// indexmac kernel the baseline it is normalized against.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub run: KernelRun,
    pub baseline: Option<KernelRun>,
    pub speedup: Option<f64>,
    pub mem_reduction: Option<f64>,
}

pub fn run_with_report(
    kernel: KernelKind,
    a: &StructuredSparseMatrix,
    b: &DenseMatrix,
    cfg: &SimConfig,
) -> Result<RunReport> {
    let oracle = dense_matmul(&decode_nm(a)?, b)?;
    let run = run_sparse_kernel(kernel, a, b, &oracle, cfg)?;
    if kernel == KernelKind::IndexMac {
        let base = run_sparse_kernel(KernelKind::Spmm, a, b, &oracle, cfg)?;
        let sp = speedup(base.cycles, run.cycles)?;
        let red = mem_reduction(&base.stats, &run.stats);
        Ok(RunReport {
            run,
            baseline: Some(base),
            speedup: Some(sp),
            mem_reduction: Some(red),
        })
    } else {
        Ok(RunReport {
            run,
            baseline: None,
            speedup: None,
            mem_reduction: None,
        })
    }
}

/// 1 - optimized / baseline total memory operations.
pub fn mem_reduction(baseline: &ExecStats, optimized: &ExecStats) -> f64 {
    1.0 - optimized.counts.total_mem_ops() as f64 / baseline.counts.total_mem_ops() as f64
}

// ---------------------------------------------------------------------------
// Layer suites
// ---------------------------------------------------------------------------

/// One sparse-dense matmul shape: A is a_rows x a_cols (the pruned weights),
/// B is a_cols x b_cols (the dense input features).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub a_rows: usize,
    pub a_cols: usize,
    pub b_cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSuite {
    pub name: String,
    pub layers: Vec<LayerShape>,
}

/// Suite file: one `name a_rows a_cols b_cols` line per layer, `#` comments.
pub fn parse_suite(name: &str, text: &str) -> Result<LayerSuite> {
    let mut layers = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(format!(
                "line {}: expected `name a_rows a_cols b_cols`",
                lineno + 1
            )));
        }
        let dim = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| Error::parse(format!("line {}: bad dimension {s:?}", lineno + 1)))?;
            if v == 0 {
                return Err(Error::parse(format!("line {}: zero dimension", lineno + 1)));
            }
            Ok(v)
        };
        layers.push(LayerShape {
            name: fields[0].to_string(),
            a_rows: dim(fields[1])?,
            a_cols: dim(fields[2])?,
            b_cols: dim(fields[3])?,
        });
    }
    Ok(LayerSuite {
        name: name.to_string(),
        layers,
    })
}

pub fn load_suite(path: &Path) -> Result<LayerSuite> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "suite".to_string());
    parse_suite(&name, &text)
}

// ---------------------------------------------------------------------------
// Benchmark sweep
// ---------------------------------------------------------------------------

/// One CSV row of a benchmark sweep.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub layer: String,
    pub nm: NMConfig,
    pub kernel: KernelKind,
    pub verified: bool,
    pub vloads: u64,
    pub vstores: u64,
    pub total_mem_ops: u64,
    pub instructions: u64,
    pub cycles: u64,
    pub speedup: f64,
    pub mem_reduction: f64,
}

/// Aggregates for one sparsity over a whole suite.
#[derive(Debug, Clone)]
pub struct BenchAggregate {
    pub nm: NMConfig,
    pub layers: usize,
    pub geomean_speedup: f64,
    /// 1 - sum(indexmac mem ops) / sum(baseline mem ops).
    pub total_mem_reduction: f64,
    pub min_speedup: f64,
    pub max_speedup: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub suite: String,
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<BenchAggregate>,
    /// (layer, sparsity, error message) for entries that could not run.
    pub failures: Vec<(String, NMConfig, String)>,
}

fn a_seed(cfg: &SimConfig, idx: usize, nm: NMConfig) -> u64 {
    cfg.seed
        .wrapping_add(1 + idx as u64 * 4)
        .wrapping_add((nm.n() as u64) << 32 | (nm.m() as u64) << 40)
}

fn b_seed(cfg: &SimConfig, idx: usize) -> u64 {
    cfg.seed.wrapping_add(0x5EED_0000).wrapping_add(idx as u64)
}

struct LayerOutcome {
    layer: String,
    nm: NMConfig,
    result: Result<(KernelRun, KernelRun)>,
}

/// Runs the baseline and indexmac kernels over every (layer, sparsity) pair,
/// verifying each against the dense oracle. Layers execute in parallel on
/// isolated machines; the report is assembled in suite order. Per-layer
/// failures are recorded and the sweep continues.
pub fn bench_suite(suite: &LayerSuite, sparsities: &[NMConfig], cfg: &SimConfig) -> BenchReport {
    let tasks: Vec<(usize, &LayerShape, NMConfig)> = sparsities
        .iter()
        .flat_map(|&nm| {
            suite
                .layers
                .iter()
                .enumerate()
                .map(move |(i, l)| (i, l, nm))
        })
        .collect();

    let mut outcomes: Vec<(usize, usize, LayerOutcome)> = tasks
        .par_iter()
        .enumerate()
        .map(|(task_idx, &(idx, layer, nm))| {
            let result = (|| {
                let a =
                    crate::matrix::random_nm(layer.a_rows, layer.a_cols, nm, a_seed(cfg, idx, nm))?;
                let b = DenseMatrix::random(layer.a_cols, layer.b_cols, b_seed(cfg, idx));
                let oracle = dense_matmul(&decode_nm(&a)?, &b)?;
                let base = run_sparse_kernel(KernelKind::Spmm, &a, &b, &oracle, cfg)?;
                let opt = run_sparse_kernel(KernelKind::IndexMac, &a, &b, &oracle, cfg)?;
                // Every reported row must agree with the closed-form counts.
                let shapes = ((a.rows, a.cols), (b.rows, b.cols));
                check_counts(KernelKind::Spmm, shapes.0, shapes.1, nm, cfg, &base.stats)?;
                check_counts(
                    KernelKind::IndexMac,
                    shapes.0,
                    shapes.1,
                    nm,
                    cfg,
                    &opt.stats,
                )?;
                Ok((base, opt))
            })();
            (
                task_idx,
                idx,
                LayerOutcome {
                    layer: layer.name.clone(),
                    nm,
                    result,
                },
            )
        })
        .collect();
    outcomes.sort_by_key(|(task_idx, _, _)| *task_idx);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut aggregates = Vec::new();
    for &nm in sparsities {
        let mut log_speedups = Vec::new();
        let mut min_sp = f64::INFINITY;
        let mut max_sp = f64::NEG_INFINITY;
        let mut base_mem = 0u64;
        let mut opt_mem = 0u64;
        for (_, _, out) in outcomes.iter_mut().filter(|(_, _, o)| o.nm == nm) {
            match &out.result {
                Ok((base, opt)) => {
                    let sp = base.cycles as f64 / opt.cycles as f64;
                    let red = mem_reduction(&base.stats, &opt.stats);
                    rows.push(BenchRow {
                        layer: out.layer.clone(),
                        nm,
                        kernel: KernelKind::Spmm,
                        verified: base.verified,
                        vloads: base.stats.vector_mem_loads(),
                        vstores: base.stats.vector_mem_stores(),
                        total_mem_ops: base.stats.counts.total_mem_ops(),
                        instructions: base.stats.counts.total_instructions(),
                        cycles: base.cycles,
                        speedup: 1.0,
                        mem_reduction: 0.0,
                    });
                    rows.push(BenchRow {
                        layer: out.layer.clone(),
                        nm,
                        kernel: KernelKind::IndexMac,
                        verified: opt.verified,
                        vloads: opt.stats.vector_mem_loads(),
                        vstores: opt.stats.vector_mem_stores(),
                        total_mem_ops: opt.stats.counts.total_mem_ops(),
                        instructions: opt.stats.counts.total_instructions(),
                        cycles: opt.cycles,
                        speedup: sp,
                        mem_reduction: red,
                    });
                    log_speedups.push(sp.ln());
                    min_sp = min_sp.min(sp);
                    max_sp = max_sp.max(sp);
                    base_mem += base.stats.counts.total_mem_ops();
                    opt_mem += opt.stats.counts.total_mem_ops();
                }
                Err(e) => failures.push((out.layer.clone(), nm, e.to_string())),
            }
        }
        if !log_speedups.is_empty() {
            aggregates.push(BenchAggregate {
                nm,
                layers: log_speedups.len(),
                geomean_speedup: (log_speedups.iter().sum::<f64>() / log_speedups.len() as f64)
                    .exp(),
                total_mem_reduction: 1.0 - opt_mem as f64 / base_mem as f64,
                min_speedup: min_sp,
                max_speedup: max_sp,
            });
        }
    }
    BenchReport {
        suite: suite.name.clone(),
        rows,
        aggregates,
        failures,
    }
}

pub const CSV_HEADER: &str =
    "layer,sparsity,kernel,vloads,vstores,total_mem_ops,instructions,cycles,speedup,mem_reduction";

/// Renders the report as CSV: one row per (layer, sparsity, kernel) and one
/// aggregate row per sparsity. Byte-stable under re-runs with the same
/// seed and configuration.
pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.4},{:.4}",
            r.layer,
            r.nm,
            r.kernel,
            r.vloads,
            r.vstores,
            r.total_mem_ops,
            r.instructions,
            r.cycles,
            r.speedup,
            r.mem_reduction
        );
    }
    for a in &report.aggregates {
        let _ = writeln!(
            out,
            "aggregate,{},indexmac,,,,,,{:.4},{:.4}",
            a.nm, a.geomean_speedup, a.total_mem_reduction
        );
    }
    out
}

/// Cross-checks a finished run's counters against the closed-form
/// predictions; returns the predicted counts on success.
pub fn check_counts(
    kernel: KernelKind,
    a_shape: (usize, usize),
    b_shape: (usize, usize),
    nm: NMConfig,
    cfg: &SimConfig,
    stats: &ExecStats,
) -> Result<crate::codegen::KernelCounts> {
    let plan = plan_tiles(a_shape, b_shape, nm, cfg.vcfg, cfg.l_rows, cfg.unroll)?;
    let predicted = analytic_counts(kernel, a_shape, nm, &plan);
    if predicted.counts != stats.counts {
        return Err(Error::constraint(format!(
            "instruction counts diverge from the analytic model:\n measured {:?}\n predicted {:?}",
            stats.counts, predicted.counts
        )));
    }
    Ok(predicted)
}
