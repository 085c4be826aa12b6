use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};

use spherekhin::constants::constant_set;
use spherekhin::moments::{sum_moment_exact, sum_moment_mc, CoeffVector, ExactOptions, MomentQuery, DEFAULT_EXACT_CAP};
use spherekhin::report::{Format, ReportDocument, SweepConfig};
use spherekhin::verifier::{run_sweep, tightness_search, Budget, InequalityId};
use spherekhin::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "spherekhin", version, about = "Moments of weighted sums of uniform sphere vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// E|v + Σ a_j ξ_j|^p by exact quadrature or Monte Carlo.
    Moment {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        a: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// All constants for one (p, d).
    Constants {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: usize,
    },
    /// Sweep the inequalities over a grid and write a report.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        ids: Option<Vec<InequalityId>>,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        vectors: Option<usize>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        retries: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Smallest observed deficit ratio over unit coefficient vectors.
    Tightness {
        #[arg(long)]
        id: InequalityId,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// Maximum number of objective evaluations.
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Io(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => Failure::Io(m),
            Error::Singular(_) | Error::NonAdmissible(_) => Failure::Compute(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // the reader went away, as with `| head`
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(io_failure),
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_failure)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Moment { d, p, a, shift, method, samples, nodes, cap, seed } => {
            let query = MomentQuery::new(d, p, CoeffVector::new(a)?, shift)?;
            let est = match method {
                MethodArg::Exact => sum_moment_exact(&query, ExactOptions { nodes, cap })?,
                MethodArg::Mc => sum_moment_mc(&query, samples, seed)?,
            };
            print_json(&est)?;
            Ok(0)
        }
        Command::Constants { p, d } => {
            if p.is_nan() || p < 2.0 {
                return Err(Failure::Usage(format!("p must be at least 2, got {p}")));
            }
            print_json(&constant_set(p, d)?)?;
            Ok(0)
        }
        Command::Verify { config, ids, p, d, n, vectors, samples, nodes, cap, retries, seed, out, format } => {
            let mut cfg = match &config {
                Some(path) => SweepConfig::from_toml(&std::fs::read_to_string(path).map_err(io_failure)?)?,
                None => SweepConfig::default(),
            };
            cfg.ids = ids.unwrap_or(cfg.ids);
            cfg.p = p.unwrap_or(cfg.p);
            cfg.d = d.unwrap_or(cfg.d);
            cfg.n = n.unwrap_or(cfg.n);
            cfg.vectors_per_cell = vectors.unwrap_or(cfg.vectors_per_cell);
            cfg.samples = samples.unwrap_or(cfg.samples);
            cfg.nodes = nodes.or(cfg.nodes);
            cfg.exact_cap = cap.unwrap_or(cfg.exact_cap);
            cfg.retries = retries.unwrap_or(cfg.retries);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.out = out.or(cfg.out);
            if let Some(f) = format {
                cfg.format = match f {
                    FormatArg::Json => Format::Json,
                    FormatArg::Csv => Format::Csv,
                };
            }
            cfg.validate()?;
            let records = run_sweep(&cfg.spec())?;
            let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|t| t.as_secs()).unwrap_or(0);
            let doc = ReportDocument::new(cfg.clone(), records, timestamp);
            let w = open_out(&cfg.out)?;
            match cfg.format {
                Format::Json => doc.write_jsonl(w)?,
                Format::Csv => doc.write_csv(w)?,
            }
            let s = &doc.summary;
            eprintln!("pass {} fail {} inconclusive {}", s.pass, s.fail, s.inconclusive);
            Ok(s.exit_code() as u8)
        }
        Command::Tightness { id, p, d, n, budget, seed, samples, out } => {
            if budget == 0 {
                return Err(Failure::Usage("budget must be positive".into()));
            }
            let b = Budget { samples, seed, ..Budget::default() };
            let report = tightness_search(id, p, d, n, budget, &b)?;
            if let Some(path) = &out {
                let mut w = open_out(&Some(path.clone()))?;
                serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Failure::Io(e.to_string()))?;
                w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_failure)?;
            }
            print_json(&report)?;
            Ok(if report.falsification_candidate { 1 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("SPHEREKHIN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
