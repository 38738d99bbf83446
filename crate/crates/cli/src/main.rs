//! Command-line front end: solve problem files, generate instance suites,
//! run batches and query the planar brute-force oracle.

mod bench;
mod report;
mod settings;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ttrs_core::format::{self, Convention, Layout, WriteOptions};
use ttrs_core::gen::{generate, oracle_2d, GenSpec, LngmSide, ProblemClass};
use ttrs_core::{solve, Status, TtrsProblem};

use crate::bench::BenchRecord;
use crate::report::{OracleView, ReportView, Sidecar};
use crate::settings::SolverArgs;

/// Environment variable holding the worker count of `bench`.
const THREADS_VAR: &str = "TTRS_THREADS";

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_MAX_ITER: u8 = 3;

#[derive(Parser)]
#[command(name = "ttrs", version, about = "Two-trust-region subproblem solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum ConventionArg {
    #[default]
    Half,
    Nohalf,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Half => Convention::Half,
            ConventionArg::Nohalf => Convention::NoHalf,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem file and print the report
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Generate random instances with ground-truth sidecars
    Gen {
        /// class2, class3a, class3b, class4, example1 or example2
        #[arg(long)]
        class: ProblemClass,
        /// Dimension [default: 10, or 2 for the worked examples]
        #[arg(long)]
        n: Option<usize>,
        /// Structural density of A and B
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        /// Seed of the first instance; instance i uses seed + i
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Relaxation carrying the planted minimizer (class2): ball or ellipsoid
        #[arg(long, default_value = "ball")]
        side: LngmSide,
        /// Scaling of the quadratic term written to the files
        #[arg(long, value_enum, default_value_t)]
        convention: ConventionArg,
        /// Write matrices in coordinate form
        #[arg(long)]
        sparse: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Solve every *.ttrs file of a directory and tabulate the results
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Output file (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force a planar problem on a grid
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
}

fn read_problem(path: &Path) -> Result<TtrsProblem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    format::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_solve(file: &Path, solver: &SolverArgs, fmt: OutputFormat) -> Result<ExitCode> {
    let problem = read_problem(file)?;
    let cfg = solver.build()?;
    let t = std::time::Instant::now();
    let report = solve(&problem, &cfg)?;
    let cpu = t.elapsed().as_secs_f64();
    let mut stdout = std::io::stdout().lock();
    match fmt {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut stdout, &ReportView::from(&report))?;
            writeln!(stdout)?;
        }
        OutputFormat::Csv => {
            let best = report.best.as_ref();
            let lngm = report.lngm.as_ref();
            let row = BenchRecord {
                file: file
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                n: problem.dim(),
                den: problem.hessian.density(),
                cpu: Some(cpu),
                kkt: best.map(|b| b.kkt.stationarity_residual),
                obj: best.map(|b| b.objective),
                lngm_ball: lngm.map_or(0, |l| u32::from(l.ball_feasible)),
                lngm_ellipsoid: lngm.map_or(0, |l| u32::from(l.ellipsoid_feasible)),
                opt_2active: best.map_or(0, |b| u32::from(b.kkt.two_active())),
                opt_source: report
                    .optimum_source()
                    .map(|s| s.as_str().to_string())
                    .unwrap_or_default(),
                status: report.status.as_str().to_string(),
            };
            bench::write_csv(&mut stdout, &[row], &[])?;
        }
    }
    Ok(match report.status {
        Status::GlobalCertified | Status::StationaryPoint => ExitCode::SUCCESS,
        Status::Infeasible => ExitCode::from(EXIT_INFEASIBLE),
        Status::MaxIter => ExitCode::from(EXIT_MAX_ITER),
    })
}

/// `<class>_n<n>_d<density>_s<seed>`
fn instance_name(spec: &GenSpec) -> String {
    format!(
        "{}_n{}_d{}_s{}",
        spec.class.as_str(),
        spec.n,
        spec.density,
        spec.seed
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    class: ProblemClass,
    n: usize,
    density: f64,
    seed: u64,
    count: u64,
    side: LngmSide,
    opts: WriteOptions,
    out: &Path,
) -> Result<ExitCode> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut failures = 0;
    for i in 0..count {
        let spec = GenSpec::new(class, n, seed + i)
            .with_density(density)
            .with_side(side);
        let name = instance_name(&spec);
        let generated = match generate(&spec) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("{name}: {e}");
                failures += 1;
                continue;
            }
        };
        let path = out.join(format!("{name}.ttrs"));
        fs::write(&path, format::serialize(&generated.problem, opts))
            .with_context(|| format!("writing {}", path.display()))?;
        let sidecar = serde_json::to_string_pretty(&Sidecar::new(&spec, &generated.annotations))?;
        let path = out.join(format!("{name}.json"));
        fs::write(&path, sidecar + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ERROR)
    })
}

fn cmd_bench(
    dir: &Path,
    solver: &SolverArgs,
    fmt: OutputFormat,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let cfg = solver.build()?;
    let files = bench::problem_files(dir)?;
    let records = bench::run(&files, &cfg);
    let summary = bench::summarize(&records);
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    match fmt {
        OutputFormat::Csv => bench::write_csv(&mut sink, &records, &summary)?,
        OutputFormat::Json => {
            let doc = bench::BenchJson {
                records: &records,
                summary: &summary,
            };
            serde_json::to_writer_pretty(&mut sink, &doc)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(file: &Path, grid: usize) -> Result<ExitCode> {
    let problem = read_problem(file)?;
    if problem.dim() != 2 {
        bail!("the oracle handles n = 2 only, got n = {}", problem.dim());
    }
    let (x, objective) = oracle_2d(&problem, grid)?;
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &OracleView::new(&x, objective))?;
    writeln!(stdout)?;
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .with_context(|| format!("{THREADS_VAR}={value:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Solve {
            file,
            solver,
            format,
        } => cmd_solve(&file, &solver, format),
        Command::Gen {
            class,
            n,
            density,
            seed,
            count,
            side,
            convention,
            sparse,
            out,
        } => {
            let opts = WriteOptions {
                convention: convention.into(),
                layout: if sparse {
                    Layout::Sparse
                } else {
                    Layout::Dense
                },
            };
            let planar = matches!(class, ProblemClass::Example1 | ProblemClass::Example2);
            let n = n.unwrap_or(if planar { 2 } else { 10 });
            cmd_gen(class, n, density, seed, count, side, opts, &out)
        }
        Command::Bench {
            dir,
            solver,
            format,
            out,
        } => cmd_bench(&dir, &solver, format, out.as_deref()),
        Command::Oracle { file, grid } => cmd_oracle(&file, grid),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
