//! Command-line front end: matrix generation and pruning, kernel execution
//! with verification, benchmark sweeps over layer suites, CSV reporting.
//!
//! Exit codes: 0 success, 1 verification failure, 2 constraint or format
//! error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vecsim::codegen::KernelKind;
use vecsim::harness::{
    bench_csv, bench_suite, load_config, load_matrix, load_suite, save_matrix, KernelRun,
    SimConfig, CSV_HEADER,
};
use vecsim::matrix::{
    encode_nm, prune_nm, random_nm, DenseMatrix, Matrix, NMConfig, StructuredSparseMatrix,
};
use vecsim::Error;

#[derive(Parser)]
#[command(
    name = "vecsim",
    version,
    about = "Vector-engine simulator for structured-sparse matmul kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Configuration file (flat `key = value`: cost model, vlen, L, unroll, seed).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> vecsim::Result<SimConfig> {
        match &self.config {
            Some(path) => load_config(path),
            None => Ok(SimConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random matrix file (dense, or N:M-encoded with --nm).
    Gen {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Sparsity pattern, e.g. 2:4. Omit for a dense matrix.
        #[arg(long)]
        nm: Option<NMConfig>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Magnitude-prune a dense matrix to an N:M pattern.
    Prune {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        nm: NMConfig,
        /// Write the N:M encoding instead of the pruned dense matrix.
        #[arg(long)]
        encode: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a matrix file against the format invariants.
    Validate { input: PathBuf },
    /// Generate, execute, and verify one kernel on a matrix pair.
    Run {
        /// Left operand: N:M file for spmm/indexmac, dense file for dense.
        #[arg(long)]
        a: PathBuf,
        /// Right operand: dense matrix file.
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        kernel: KernelKind,
        /// Prune+encode a dense left operand on the fly for sparse kernels.
        #[arg(long)]
        nm: Option<NMConfig>,
        #[command(flatten)]
        config: ConfigArg,
        /// Append one CSV row to this file (header written if new).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Dump the generated program text to this file.
        #[arg(long)]
        dump_program: Option<PathBuf>,
    },
    /// Sweep a layer suite over sparsity patterns and report CSV.
    Bench {
        /// Layer suite file (`name a_rows a_cols b_cols` per line).
        #[arg(long)]
        suite: PathBuf,
        /// Sparsity patterns to sweep (repeatable).
        #[arg(long = "sparsity", default_values = ["1:4", "2:4"])]
        sparsities: Vec<NMConfig>,
        #[command(flatten)]
        config: ConfigArg,
        /// Write the CSV report here (stdout gets a summary either way).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Verify { .. } => 1,
        Error::Io { .. } => 3,
        _ => 2,
    }
}

fn write_file(path: &PathBuf, text: &str) -> vecsim::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn dispatch(cmd: Command) -> vecsim::Result<()> {
    match cmd {
        Command::Gen {
            rows,
            cols,
            nm,
            seed,
            out,
        } => {
            let m = match nm {
                Some(nm) => Matrix::Sparse(random_nm(rows, cols, nm, seed)?),
                None => Matrix::Dense(DenseMatrix::random(rows, cols, seed)),
            };
            save_matrix(&out, &m)?;
            let (r, c) = m.shape();
            println!("wrote {} ({r}x{c})", out.display());
            Ok(())
        }
        Command::Prune {
            input,
            nm,
            encode,
            out,
        } => {
            let Matrix::Dense(d) = load_matrix(&input)? else {
                return Err(Error::format(format!(
                    "{}: prune expects a dense matrix",
                    input.display()
                )));
            };
            let pruned = prune_nm(&d, nm)?;
            let m = if encode {
                Matrix::Sparse(encode_nm(&pruned, nm)?)
            } else {
                Matrix::Dense(pruned)
            };
            save_matrix(&out, &m)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Validate { input } => {
            match load_matrix(&input)? {
                Matrix::Dense(d) => {
                    println!("ok: dense {}x{}, {} non-zeros", d.rows, d.cols, d.nnz());
                }
                Matrix::Sparse(s) => {
                    // Parsing already validated the invariants.
                    println!(
                        "ok: nm {}x{} {}, {} blocks, {} non-zeros",
                        s.rows,
                        s.cols,
                        s.nm,
                        s.rows * s.blocks_per_row(),
                        s.nnz()
                    );
                }
            }
            Ok(())
        }
        Command::Run {
            a,
            b,
            kernel,
            nm,
            config,
            csv,
            dump_program,
        } => {
            let cfg = config.load()?;
            let Matrix::Dense(bm) = load_matrix(&b)? else {
                return Err(Error::format(format!(
                    "{}: B must be a dense matrix",
                    b.display()
                )));
            };
            match kernel {
                KernelKind::Dense => {
                    let Matrix::Dense(am) = load_matrix(&a)? else {
                        return Err(Error::format(format!(
                            "{}: dense kernel expects a dense A",
                            a.display()
                        )));
                    };
                    let run = vecsim::harness::run_dense_kernel(&am, &bm, &cfg)?;
                    if let Some(path) = dump_program {
                        dump_dense(&path, &am, &bm, &cfg)?;
                    }
                    finish_run_full(run, None, None, csv.as_ref(), "dense")
                }
                KernelKind::Spmm | KernelKind::IndexMac => {
                    let am = load_sparse_operand(&a, nm)?;
                    let report = vecsim::harness::run_with_report(kernel, &am, &bm, &cfg)?;
                    if let Some(path) = dump_program {
                        dump_sparse(&path, kernel, &am, &bm, &cfg)?;
                    }
                    let label = report.run.kernel.to_string();
                    let speedup = report.speedup;
                    let reduction = report.mem_reduction;
                    if let Some(base) = &report.baseline {
                        println!(
                            "baseline spmm: {} cycles, {} mem ops",
                            base.cycles,
                            base.stats.counts.total_mem_ops()
                        );
                    }
                    finish_run_full(report.run, speedup, reduction, csv.as_ref(), &label)
                }
            }
        }
        Command::Bench {
            suite,
            sparsities,
            config,
            csv,
        } => {
            let cfg = config.load()?;
            let suite = load_suite(&suite)?;
            let report = bench_suite(&suite, &sparsities, &cfg);
            let text = bench_csv(&report);
            match &csv {
                Some(path) => {
                    write_file(path, &text)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            for a in &report.aggregates {
                println!(
                    "{} {}: geomean speedup {:.3} (min {:.3}, max {:.3}), total memory reduction {:.1}% over {} layers",
                    report.suite,
                    a.nm,
                    a.geomean_speedup,
                    a.min_speedup,
                    a.max_speedup,
                    a.total_mem_reduction * 100.0,
                    a.layers
                );
            }
            for (layer, nm, msg) in &report.failures {
                eprintln!("layer {layer} ({nm}) failed: {msg}");
            }
            let unverified = report.rows.iter().filter(|r| !r.verified).count();
            if unverified > 0 {
                return Err(Error::Verify {
                    max_abs_diff: f32::NAN,
                });
            }
            if !report.failures.is_empty() {
                return Err(Error::constraint(format!(
                    "{} layer(s) failed to run",
                    report.failures.len()
                )));
            }
            Ok(())
        }
    }
}

fn load_sparse_operand(
    path: &Path,
    nm: Option<NMConfig>,
) -> vecsim::Result<StructuredSparseMatrix> {
    match (load_matrix(path)?, nm) {
        (Matrix::Sparse(s), None) => Ok(s),
        (Matrix::Sparse(s), Some(nm)) if s.nm == nm => Ok(s),
        (Matrix::Sparse(s), Some(nm)) => Err(Error::format(format!(
            "{}: file is {} but --nm {} was requested",
            path.display(),
            s.nm,
            nm
        ))),
        (Matrix::Dense(d), Some(nm)) => encode_nm(&prune_nm(&d, nm)?, nm),
        (Matrix::Dense(_), None) => Err(Error::format(format!(
            "{}: sparse kernels need an N:M matrix (or pass --nm to prune on the fly)",
            path.display()
        ))),
    }
}

fn dump_dense(
    path: &PathBuf,
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SimConfig,
) -> vecsim::Result<()> {
    use vecsim::codegen::{build_dense_image, gen_dense, plan_tiles};
    let nm = NMConfig::new(1, 1).unwrap();
    let l = cfg.l_rows.min(cfg.vcfg.vl_max().min(32 - 3 * cfg.unroll));
    let plan = plan_tiles(
        (a.rows, a.cols),
        (b.rows, b.cols),
        nm,
        cfg.vcfg,
        l,
        cfg.unroll,
    )?;
    let (addr, _) = build_dense_image(a, b, cfg.vcfg)?;
    let program = gen_dense((a.rows, a.cols), (b.rows, b.cols), &addr, &plan)?;
    write_file(path, &program.to_text())
}

fn dump_sparse(
    path: &PathBuf,
    kernel: KernelKind,
    a: &StructuredSparseMatrix,
    b: &DenseMatrix,
    cfg: &SimConfig,
) -> vecsim::Result<()> {
    use vecsim::codegen::{build_sparse_image, gen_spmm_baseline, gen_spmm_indexmac, plan_tiles};
    let plan = plan_tiles(
        (a.rows, a.cols),
        (b.rows, b.cols),
        a.nm,
        cfg.vcfg,
        cfg.l_rows,
        cfg.unroll,
    )?;
    let (addr, _) = build_sparse_image(a, b, cfg.vcfg)?;
    let program = match kernel {
        KernelKind::Spmm => gen_spmm_baseline(a, b.cols, &addr, &plan)?,
        _ => gen_spmm_indexmac(a, b.cols, &addr, &plan)?,
    };
    write_file(path, &program.to_text())
}

fn finish_run_full(
    run: KernelRun,
    speedup: Option<f64>,
    reduction: Option<f64>,
    csv: Option<&PathBuf>,
    label: &str,
) -> vecsim::Result<()> {
    let c = &run.stats.counts;
    println!(
        "kernel {label}: {} instructions, {} cycles",
        c.total_instructions(),
        run.cycles
    );
    println!(
        "  vloads {} (B-region: {} indirect, {} preload), vstores {}, vindexmac {}",
        c.vload, run.b_loads_indirect, run.b_loads_immediate, c.vstore, c.vindexmac
    );
    println!(
        "  per class: setvl {} vmacc {} vadd {} vslide {} vmv {} scalar {}",
        c.setvl,
        c.vmacc,
        c.vadd,
        c.vslide,
        c.vmv,
        c.scalar_ops()
    );
    if let Some(sp) = speedup {
        println!("  speedup vs spmm baseline: {sp:.3}");
    }
    if let Some(red) = reduction {
        println!("  memory-access reduction vs baseline: {:.1}%", red * 100.0);
    }
    println!(
        "  verification: {} (max abs diff {:e})",
        if run.verified { "PASS" } else { "FAIL" },
        run.max_abs_diff
    );
    if let Some(path) = csv {
        use std::io::Write as _;
        let new_file = !path.exists();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let io_err = |e| Error::io(path.display().to_string(), e);
        if new_file {
            writeln!(f, "{CSV_HEADER}").map_err(io_err)?;
        }
        writeln!(
            f,
            "run,,{label},{},{},{},{},{},{},{}",
            c.vload,
            c.vstore,
            c.total_mem_ops(),
            c.total_instructions(),
            run.cycles,
            speedup.map_or("1.0000".into(), |s| format!("{s:.4}")),
            reduction.map_or("0.0000".into(), |r| format!("{r:.4}")),
        )
        .map_err(io_err)?;
    }
    if !run.verified {
        return Err(Error::Verify {
            max_abs_diff: run.max_abs_diff,
        });
    }
    Ok(())
}
