//! Command-line front end: compile kernel files, check the optimized
//! program against the naive one on real or generated data, and benchmark
//! the bundled kernels with JSON-lines output.

mod dataset;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dataset::{DataSpec, Source};
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use symten::exec::{
    bench_prepared, prepare_sparse, run_dense, run_sparse, ExecConfig, ExecReport, SparsePrepared,
};
use symten::passes::default_pipeline;
use symten::suite;
use symten::tensor::DenseTensor;

#[derive(Parser)]
#[command(name = "symten", version, about = "Symmetry-aware sparse einsum compiler and runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a kernel file and print the lowered program
    Compile(CompileArgs),
    /// Run optimized against naive on one dataset and compare outputs
    Validate(ValidateArgs),
    /// Time kernels on generated or file data, one JSON line per kernel
    Bench(BenchArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Kernel source file
    file: PathBuf,
    /// Comma-separated passes to run after symmetrization; empty for none
    #[arg(long, value_delimiter = ',', conflicts_with = "after")]
    passes: Option<Vec<String>>,
    /// Stop after this pipeline stage ("symmetrize" or a pass name)
    #[arg(long)]
    after: Option<String>,
    /// Output form
    #[arg(long, value_enum, default_value_t = EmitKind::Pseudocode)]
    emit: EmitKind,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitKind {
    Pseudocode,
    Ir,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Matrix Market file for the driver tensor
    #[arg(long, conflicts_with = "er", value_name = "PATH")]
    mtx: Option<PathBuf>,
    /// Generate the driver: dimension and density, e.g. 60,0.1
    #[arg(long, value_name = "DIM,P")]
    er: Option<String>,
    /// Columns of the generated dense factors
    #[arg(long, default_value_t = 4)]
    rank: usize,
    /// Seed for generated data
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Mirror the file's entries across the diagonal before use
    #[arg(long)]
    symmetrize: bool,
    /// Reject drivers that break the kernel's declared symmetry
    #[arg(long)]
    check_sym: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Bundled kernel id
    kernel: String,
    #[command(flatten)]
    data: DataArgs,
    /// Relative tolerance for the output comparison
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Flip one output value first, to watch a failure
    #[arg(long)]
    corrupt: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Bundled kernel ids; all of them when omitted
    kernels: Vec<String>,
    #[command(flatten)]
    data: DataArgs,
    /// Repetitions per timed side
    #[arg(long, default_value_t = 50)]
    reps: u64,
    /// Seconds of measured time per side before stopping early
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
    /// Write the JSON lines here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this many kernels concurrently
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            if let Some(m) = err.downcast_ref::<Mismatch>() {
                eprintln!("validation failed: {m}");
                return ExitCode::from(1);
            }
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Compile(args) => cmd_compile(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Bench(args) => cmd_bench(args),
    }
}

fn cmd_compile(args: CompileArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))?;
    let a = symten::parse::parse(&text).map_err(|e| anyhow!("{}: {e}", args.file.display()))?;
    let kernel = if let Some(passes) = &args.passes {
        let names: Vec<&str> =
            passes.iter().map(String::as_str).filter(|s| !s.is_empty()).collect();
        symten::compile_with(&a, &names)?
    } else if let Some(stage) = &args.after {
        let pipeline = default_pipeline();
        let names: &[&str] = if stage == "symmetrize" {
            &[]
        } else {
            let pos = pipeline.iter().position(|p| *p == stage.as_str()).ok_or_else(|| {
                anyhow!("unknown stage {stage:?}; stages: symmetrize, {}", pipeline.join(", "))
            })?;
            &pipeline[..=pos]
        };
        symten::compile_with(&a, names)?
    } else {
        symten::compile(&a)
    };
    match args.emit {
        EmitKind::Pseudocode => println!("{}", kernel.dump()),
        EmitKind::Ir => println!("{kernel:#?}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let spec = data_spec(&args.kernel, &args.data)?;
    let ds = dataset::build(&spec)?;
    let cfg = ExecConfig::default();
    let prepared = prepare_sparse(&ds.optimized, &ds.levels, &cfg)
        .with_context(|| format!("preparing optimized {}", args.kernel))?;
    let opt = prepared.run(None).context("running optimized")?;

    const DENSE_SWEEP_LIMIT: u128 = 30_000_000;
    let naive = if ds.naive_points <= DENSE_SWEEP_LIMIT {
        run_dense(&ds.naive, &ds.denses, None).context("running naive")?
    } else {
        println!(
            "note: a dense naive sweep would visit {} points; walking stored entries instead",
            ds.naive_points
        );
        run_sparse(&ds.naive, &ds.levels, None, &cfg).context("running naive")?
    };

    let mut out = opt.output.clone();
    if args.corrupt {
        let coord = vec![0usize; out.dims().len()];
        let bumped = *out.get(&coord) + 1.0;
        out.set(&coord, bumped);
    }

    println!("validate {} on {}: nnz({}) = {}", args.kernel, ds.label, ds.driver, ds.nnz);
    let oc = &opt.counts;
    let nc = &naive.counts;
    println!(
        "  reads({}): optimized {} / naive {} = {}",
        ds.driver,
        oc.reads_of(&ds.driver),
        nc.reads_of(&ds.driver),
        show_ratio(oc.reads_of(&ds.driver), nc.reads_of(&ds.driver)),
    );
    println!(
        "  map_ops: optimized {} / naive {} = {}",
        oc.map_ops,
        nc.map_ops,
        show_ratio(oc.map_ops, nc.map_ops),
    );
    println!(
        "  reduce_ops: optimized {} / naive {} = {}",
        oc.reduce_ops,
        nc.reduce_ops,
        show_ratio(oc.reduce_ops, nc.reduce_ops),
    );

    if let Some(m) = first_mismatch(&args.kernel, &out, &naive.output, args.tol) {
        println!("FAIL {m}");
        return Ok(ExitCode::from(1));
    }
    println!("PASS outputs agree within {:e} relative", args.tol);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct BenchLine {
    kernel: String,
    dataset: String,
    naive: ExecReport,
    optimized: ExecReport,
    read_ratio: f64,
    map_ratio: f64,
    speedup: f64,
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let ids: Vec<String> = if args.kernels.is_empty() {
        suite::kernels().iter().map(|k| k.id.to_string()).collect()
    } else {
        args.kernels.clone()
    };
    let specs: Vec<DataSpec> =
        ids.iter().map(|id| data_spec(id, &args.data)).collect::<Result<_>>()?;

    let reps = args.reps;
    let budget = args.budget;
    let jobs = args.jobs.max(1);
    let mut lines: Vec<BenchLine> = Vec::with_capacity(specs.len());
    for chunk in specs.chunks(jobs) {
        let batch: Vec<Result<BenchLine>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|spec| s.spawn(move || bench_one(spec, reps, budget)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
        });
        for line in batch {
            lines.push(line?);
        }
    }

    let mut rendered = String::new();
    for line in &lines {
        rendered.push_str(&serde_json::to_string(line)?);
        rendered.push('\n');
    }
    match &args.out {
        Some(path) => fs::write(path, rendered)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_one(spec: &DataSpec, reps: u64, budget: f64) -> Result<BenchLine> {
    let ds = dataset::build(spec)?;
    let cfg = ExecConfig::default();
    let optimized = prepare_sparse(&ds.optimized, &ds.levels, &cfg)
        .with_context(|| format!("preparing optimized {}", spec.kernel_id))?;
    let naive = prepare_sparse(&ds.naive, &ds.levels, &cfg)
        .with_context(|| format!("preparing naive {}", spec.kernel_id))?;

    let check_opt = optimized.run(None)?;
    let check_naive = naive.run(None)?;
    if let Some(m) =
        first_mismatch(&spec.kernel_id, &check_opt.output, &check_naive.output, 1e-12)
    {
        return Err(anyhow::Error::new(m));
    }

    let ob = bench_prepared(&optimized, None, reps, budget)?;
    let nb = bench_prepared(&naive, None, reps, budget)?;
    let walked = |p: &SparsePrepared<f64>| {
        p.nest_drivers().into_iter().flatten().next().map(str::to_string)
    };
    Ok(BenchLine {
        kernel: spec.kernel_id.clone(),
        dataset: ds.label.clone(),
        read_ratio: ratio(ob.counts.reads_of(&ds.driver), nb.counts.reads_of(&ds.driver)),
        map_ratio: ratio(ob.counts.map_ops, nb.counts.map_ops),
        speedup: nb.min_time_s / ob.min_time_s,
        naive: ExecReport::new(
            &spec.kernel_id,
            walked(&naive).as_deref(),
            Some(ds.nnz),
            ds.seed,
            &nb.counts,
            nb.min_time_s,
        ),
        optimized: ExecReport::new(
            &spec.kernel_id,
            walked(&optimized).as_deref(),
            Some(ds.nnz),
            ds.seed,
            &ob.counts,
            ob.min_time_s,
        ),
    })
}

fn data_spec(kernel: &str, d: &DataArgs) -> Result<DataSpec> {
    let source = match (&d.mtx, &d.er) {
        (Some(path), _) => Some(Source::Mtx(path.clone())),
        (None, Some(er)) => Some(parse_er(er)?),
        (None, None) => None,
    };
    Ok(DataSpec {
        kernel_id: kernel.to_string(),
        source,
        rank: d.rank,
        seed: d.seed,
        symmetrize: d.symmetrize,
        check_sym: d.check_sym,
    })
}

fn parse_er(text: &str) -> Result<Source> {
    let (dim, p) = text.split_once(',').ok_or_else(|| anyhow!("--er wants DIM,P like 60,0.1"))?;
    let dim: usize = dim.trim().parse().context("--er dimension")?;
    let p: f64 = p.trim().parse().context("--er density")?;
    if dim == 0 {
        bail!("--er dimension must be positive");
    }
    if !(0.0..=1.0).contains(&p) {
        bail!("--er density {p} is outside [0, 1]");
    }
    Ok(Source::Er { dim, p })
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

fn show_ratio(a: u64, b: u64) -> String {
    if b == 0 {
        "n/a".to_string()
    } else {
        format!("{:.4}", a as f64 / b as f64)
    }
}

fn within_tol(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn first_mismatch(
    kernel: &str,
    optimized: &DenseTensor<f64>,
    naive: &DenseTensor<f64>,
    tol: f64,
) -> Option<Mismatch> {
    for coord in optimized.iter_coords() {
        let a = *optimized.get(&coord);
        let b = *naive.get(&coord);
        if !within_tol(a, b, tol) {
            return Some(Mismatch { kernel: kernel.to_string(), coord, optimized: a, naive: b });
        }
    }
    None
}

#[derive(Debug)]
struct Mismatch {
    kernel: String,
    coord: Vec<usize>,
    optimized: f64,
    naive: f64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coord: Vec<String> = self.coord.iter().map(|c| c.to_string()).collect();
        write!(
            f,
            "{}: first difference at [{}]: optimized {} vs naive {}",
            self.kernel,
            coord.join(", "),
            self.optimized,
            self.naive
        )
    }
}

impl std::error::Error for Mismatch {}
