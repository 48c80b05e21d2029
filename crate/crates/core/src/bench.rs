//! Seeded runtime and error benchmarks.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ntd_fit, NtdConfig, NtdObjective};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::ltr::{ltr_reduce_seeded, BlockRule, LtrOptions, TuckerRank};
use crate::synth::{derive_seed, uniform_tensor};
use crate::tensor::{DenseTensor, Shape};
use crate::verify::{kl_divergence, ls_error};

pub const CSV_HEADER: [&str; 8] = [
    "method", "shape", "rank", "trial", "seed", "runtime_s", "kl_err", "ls_err",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ltr,
    LtrJoint,
    NtdLs,
    NtdKl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ltr => "ltr",
            Method::LtrJoint => "ltr_joint",
            Method::NtdLs => "ntd_ls",
            Method::NtdKl => "ntd_kl",
        }
    }

    /// Parses a comma-separated list such as `ltr,ntd_ls`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',').map(|m| m.trim().parse()).collect()
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ltr" => Ok(Method::Ltr),
            "ltr_joint" => Ok(Method::LtrJoint),
            "ntd_ls" => Ok(Method::NtdLs),
            "ntd_kl" => Ok(Method::NtdKl),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One CSV row. `shape` and `rank` are written as `30x30x30`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub shape: String,
    pub rank: String,
    pub trial: usize,
    pub seed: u64,
    pub runtime_s: f64,
    pub kl_err: f64,
    pub ls_err: f64,
}

pub fn join_dims(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub shape: Shape,
    pub ranks: Vec<TuckerRank>,
    pub trials: usize,
    pub seed: u64,
    pub ntd_iters: usize,
    /// Used for every trial instead of fresh random data.
    pub input: Option<DenseTensor>,
    pub threads: usize,
}

/// Runs every `(trial, rank, method)` combination.
///
/// Trial `i` uses data seed `derive_seed(seed, i)`, which also seeds the
/// index sampling and initialization of every method in that trial, so
/// results do not depend on the thread count. Records come back in
/// trial, rank, method order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if cfg.methods.is_empty() || cfg.ranks.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument(
            "bench needs at least one method, rank and trial".into(),
        ));
    }
    let shape = match &cfg.input {
        Some(t) => t.shape().clone(),
        None => cfg.shape.clone(),
    };
    for r in &cfg.ranks {
        r.validate(&shape)?;
    }
    let jobs: Vec<(usize, &TuckerRank, Method)> = (0..cfg.trials)
        .flat_map(|trial| {
            cfg.ranks
                .iter()
                .flat_map(move |r| cfg.methods.iter().map(move |&m| (trial, r, m)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(trial, rank, method)| {
                let seed = derive_seed(cfg.seed, trial as u64);
                let data = match &cfg.input {
                    Some(t) => t.clone(),
                    None => uniform_tensor(&shape, seed),
                };
                run_one(&data, rank, method, trial, seed, cfg.ntd_iters)
            })
            .collect()
    })
}

fn run_one(
    x: &DenseTensor,
    rank: &TuckerRank,
    method: Method,
    trial: usize,
    seed: u64,
    ntd_iters: usize,
) -> Result<BenchRecord> {
    let start = Instant::now();
    let out = match method {
        Method::Ltr | Method::LtrJoint => {
            let rule = if method == Method::Ltr {
                BlockRule::Unfolding
            } else {
                BlockRule::Joint
            };
            let opts = LtrOptions { rule, ..Default::default() };
            ltr_reduce_seeded(x, rank, seed, &opts)?.tensor
        }
        Method::NtdLs | Method::NtdKl => {
            let objective = if method == Method::NtdLs {
                NtdObjective::LeastSquares
            } else {
                NtdObjective::KullbackLeibler
            };
            let cfg = NtdConfig { max_iters: ntd_iters, ..NtdConfig::new(objective, seed) };
            ntd_fit(x, rank, &cfg)?.reconstruction
        }
    };
    let runtime_s = start.elapsed().as_secs_f64();
    let kl_err = match kl_divergence(x, &out) {
        Ok(v) => v,
        Err(Error::InfiniteDivergence { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(BenchRecord {
        method: method.name().to_string(),
        shape: join_dims(x.dims()),
        rank: join_dims(rank.ranks()),
        trial,
        seed,
        runtime_s,
        kl_err,
        ls_err: ls_error(x, &out)?,
    })
}

/// Writes the header and records, floats with 17 significant digits.
pub fn write_csv(w: impl Write, records: &[BenchRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        wr.write_record([
            r.method.clone(),
            r.shape.clone(),
            r.rank.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            format_f64(r.runtime_s),
            format_f64(r.kl_err),
            format_f64(r.ls_err),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv(r: impl Read) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub rank: String,
    pub trials: usize,
    pub runtime_s: MeanSe,
    pub kl_err: MeanSe,
    pub ls_err: MeanSe,
}

/// Groups by `(method, rank)` in first-appearance order.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in records {
        let key = (r.method.clone(), r.rank.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, rank)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.method == method && r.rank == rank)
                .collect();
            let col = |f: fn(&BenchRecord) -> f64| {
                MeanSe::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            SummaryRow {
                trials: group.len(),
                runtime_s: col(|r| r.runtime_s),
                kl_err: col(|r| r.kl_err),
                ls_err: col(|r| r.ls_err),
                method,
                rank,
            }
        })
        .collect()
}
