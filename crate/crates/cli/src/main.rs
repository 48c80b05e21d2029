use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ltr_core::bench::{self, BenchConfig, Method};
use ltr_core::infogeo::{clamp_to_floor, eta_from_tensor, theta_from_tensor};
use ltr_core::{
    best_rank1, certify_projection, io, kl_divergence, ls_error, ltr_reduce, sample_bingo_spec,
    uniform_tensor, BingoSpec, BlockRule, CertifyTolerances, DenseTensor, Error, LtrOptions, Shape,
    TuckerRank,
};
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_BAD_RANK: u8 = 3;
const EXIT_CERTIFY_REDUCE: u8 = 4;
const EXIT_CERTIFY_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "ltr", version, about = "Tucker rank reduction of non-negative tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded uniform [0, 1) tensor.
    Gen {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        shape: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Reduce a tensor to a target Tucker rank.
    Reduce {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated ranks, one per mode.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        rank: Vec<usize>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Index sets as inline JSON or a path to a JSON file; overrides sampling.
        #[arg(long)]
        indices: Option<String>,
        /// Comma-separated permutation of 1..=d.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        mode_order: Option<Vec<usize>>,
        /// Raise elements below this fraction of the maximum before reducing.
        #[arg(long)]
        clamp_epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = Rule::Unfolding)]
        rule: Rule,
        /// Check the projection conditions on the result.
        #[arg(long)]
        certify: bool,
    },
    /// Closed-form KL-optimal rank-1 approximation.
    Rank1 {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Emit θ or η coordinates of the normalized tensor.
    Coords {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        coords: CoordKind,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        clamp_epsilon: Option<f64>,
    },
    /// Certify that an output is the projection of an input for given index sets.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Index sets as inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
    },
    /// Time and score methods over seeded trials, writing CSV.
    Bench {
        #[arg(long, default_value = "ltr,ntd_ls")]
        methods: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        shape: Option<Vec<usize>>,
        /// Comma-separated targets; `10` means 10 on every mode, `4x3x2` is explicit.
        #[arg(long)]
        ranks: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: PathBuf,
        /// Iteration budget of the NTD baselines.
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// Benchmark this tensor instead of fresh uniform data.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Unfolding,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoordKind {
    Theta,
    Eta,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidRank(_) => EXIT_BAD_RANK,
            Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::InvalidShape(_)
            | Error::OrderTooLarge(_)
            | Error::NonFinite { .. }
            | Error::InvalidSpec(_)
            | Error::UnknownMethod(_) => EXIT_BAD_INPUT,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { shape, seed, output } => cmd_gen(shape, seed, &output),
        Command::Reduce {
            input,
            rank,
            output,
            seed,
            indices,
            mode_order,
            clamp_epsilon,
            rule,
            certify,
        } => cmd_reduce(ReduceArgs {
            input,
            rank,
            output,
            seed,
            indices,
            mode_order,
            clamp_epsilon,
            rule,
            certify,
        }),
        Command::Rank1 { input, output } => cmd_rank1(&input, &output),
        Command::Coords {
            input,
            coords,
            output,
            clamp_epsilon,
        } => cmd_coords(&input, coords, &output, clamp_epsilon),
        Command::Verify { input, output, spec } => cmd_verify(&input, &output, &spec),
        Command::Bench {
            methods,
            shape,
            ranks,
            trials,
            seed,
            csv,
            iters,
            input,
        } => cmd_bench(BenchArgs {
            methods,
            shape,
            ranks,
            trials,
            seed,
            csv,
            iters,
            input,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> std::result::Result<DenseTensor, Failure> {
    io::load(path).map_err(|e| Failure::new(EXIT_BAD_INPUT, format!("{}: {e}", path.display())))
}

fn read_spec(arg: &str) -> std::result::Result<BingoSpec, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| Failure::new(EXIT_BAD_INPUT, format!("{arg}: {e}")))?
    };
    BingoSpec::from_json(&text).map_err(|e| Failure::new(EXIT_BAD_INPUT, format!("index sets: {e}")))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn cmd_gen(dims: Vec<usize>, seed: u64, output: &Path) -> CmdResult {
    let shape = Shape::new(dims)?;
    io::save(output, &uniform_tensor(&shape, seed))?;
    Ok(())
}

struct ReduceArgs {
    input: PathBuf,
    rank: Vec<usize>,
    output: PathBuf,
    seed: u64,
    indices: Option<String>,
    mode_order: Option<Vec<usize>>,
    clamp_epsilon: Option<f64>,
    rule: Rule,
    certify: bool,
}

fn cmd_reduce(a: ReduceArgs) -> CmdResult {
    let mut t = load(&a.input)?;
    if let Some(eps) = a.clamp_epsilon {
        t = clamp_to_floor(&t, eps)?;
    }
    let target = TuckerRank::new(a.rank);
    target.validate(t.shape())?;
    let spec = match &a.indices {
        Some(arg) => {
            let spec = read_spec(arg)?;
            spec.validate(t.shape())?;
            if spec.target() != target {
                return Err(Failure::new(
                    EXIT_BAD_RANK,
                    format!(
                        "index set sizes {:?} do not match --rank {:?}",
                        spec.target().ranks(),
                        target.ranks()
                    ),
                ));
            }
            spec
        }
        None => sample_bingo_spec(t.shape(), &target, a.seed)?,
    };
    let opts = LtrOptions {
        mode_order: a.mode_order,
        rule: match a.rule {
            Rule::Unfolding => BlockRule::Unfolding,
            Rule::Joint => BlockRule::Joint,
        },
    };
    let start = Instant::now();
    let red = ltr_reduce(&t, &spec, &opts)?;
    let runtime = start.elapsed().as_secs_f64();
    io::save(&a.output, &red.tensor)?;

    for b in &red.skipped {
        eprintln!(
            "warning: block [{}, {}] of mode {} has zero mass and was left unchanged",
            b.lo, b.hi, b.mode
        );
    }
    let kl = kl_divergence(&t, &red.tensor).ok();
    let mut summary = json!({
        "kl": kl,
        "ls": ls_error(&t, &red.tensor)?,
        "runtime": runtime,
        "spec": spec,
    });
    let mut failed = false;
    if a.certify {
        if t.is_strictly_positive() {
            let cert = certify_projection(&t, &red.tensor, &spec, &CertifyTolerances::default())?;
            failed = !cert.pass;
            summary["certificate"] = serde_json::to_value(&cert).expect("serializable");
        } else {
            eprintln!("warning: input has zero elements; certification skipped");
        }
    }
    print_json(&summary);
    if failed {
        return Err(Failure::new(EXIT_CERTIFY_REDUCE, "projection certificate failed"));
    }
    Ok(())
}

fn cmd_rank1(input: &Path, output: &Path) -> CmdResult {
    let t = load(input)?;
    let (q, f) = best_rank1(&t)?;
    io::save(output, &q)?;
    print_json(&json!({
        "lambda": f.lambda,
        "kl": kl_divergence(&t, &q).ok(),
        "ls": ls_error(&t, &q)?,
    }));
    Ok(())
}

fn cmd_coords(input: &Path, kind: CoordKind, output: &Path, clamp: Option<f64>) -> CmdResult {
    let mut t = load(input)?;
    if let Some(eps) = clamp {
        t = clamp_to_floor(&t, eps)?;
    }
    t.check_strictly_positive().map_err(|e| {
        Failure::new(EXIT_BAD_INPUT, format!("{e}; pass --clamp-epsilon to floor zeros"))
    })?;
    let p = t.normalized()?;
    let coords = match kind {
        CoordKind::Theta => theta_from_tensor(&p)?.into_tensor(),
        CoordKind::Eta => eta_from_tensor(&p, true)?.into_tensor(),
    };
    io::save(output, &coords)?;
    Ok(())
}

fn cmd_verify(input: &Path, output: &Path, spec: &str) -> CmdResult {
    let p = load(input)?;
    let q = load(output)?;
    let spec = read_spec(spec)?;
    let cert = certify_projection(&p, &q, &spec, &CertifyTolerances::default()).map_err(|e| {
        let code = match e {
            Error::ShapeMismatch { .. } | Error::InvalidSpec(_) => EXIT_CERTIFY_VERIFY,
            _ => EXIT_BAD_INPUT,
        };
        Failure::new(code, e.to_string())
    })?;
    print_json(&serde_json::to_value(&cert).expect("serializable"));
    if cert.pass {
        Ok(())
    } else {
        Err(Failure::new(EXIT_CERTIFY_VERIFY, "projection certificate failed"))
    }
}

struct BenchArgs {
    methods: String,
    shape: Option<Vec<usize>>,
    ranks: String,
    trials: usize,
    seed: u64,
    csv: PathBuf,
    iters: usize,
    input: Option<PathBuf>,
}

fn parse_ranks(s: &str, order: usize) -> std::result::Result<Vec<TuckerRank>, Failure> {
    s.split(',')
        .map(|item| {
            let parts: std::result::Result<Vec<usize>, _> =
                item.trim().split('x').map(str::parse::<usize>).collect();
            match parts {
                Ok(v) if v.len() == 1 => Ok(TuckerRank::uniform(v[0], order)),
                Ok(v) => Ok(TuckerRank::new(v)),
                Err(e) => Err(Failure::new(EXIT_BAD_RANK, format!("rank `{item}`: {e}"))),
            }
        })
        .collect()
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let methods = Method::parse_list(&a.methods)?;
    let input = a.input.as_deref().map(load).transpose()?;
    let shape = match (&input, a.shape) {
        (Some(t), _) => t.shape().clone(),
        (None, Some(dims)) => Shape::new(dims)?,
        (None, None) => {
            return Err(Failure::new(EXIT_BAD_INPUT, "either --shape or --input is required"))
        }
    };
    let ranks = parse_ranks(&a.ranks, shape.order())?;
    let threads = match std::env::var("LTR_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::new(EXIT_BAD_INPUT, format!("LTR_THREADS=`{v}`")))?,
        Err(_) => 1,
    };
    let cfg = BenchConfig {
        methods,
        shape,
        ranks,
        trials: a.trials,
        seed: a.seed,
        ntd_iters: a.iters,
        input,
        threads,
    };
    let records = bench::run_bench(&cfg)?;
    let file = std::fs::File::create(&a.csv)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", a.csv.display())))?;
    bench::write_csv(std::io::BufWriter::new(file), &records)?;

    println!(
        "{:<10} {:<12} {:>6} {:>24} {:>24} {:>24}",
        "method", "rank", "trials", "runtime_s", "kl_err", "ls_err"
    );
    for row in bench::summarize(&records) {
        let cell = |m: bench::MeanSe| format!("{:.4e} ± {:.1e}", m.mean, m.se);
        println!(
            "{:<10} {:<12} {:>6} {:>24} {:>24} {:>24}",
            row.method,
            row.rank,
            row.trials,
            cell(row.runtime_s),
            cell(row.kl_err),
            cell(row.ls_err)
        );
    }
    Ok(())
}
