//! Legendre Tucker-rank reduction.
//!
//! For each mode `k`, a sorted index set `C^(k) = {1 = c_1 < … < c_{r_k}}`
//! splits `[I_k]` into contiguous slabs `[c_l, c_{l+1} − 1]` (with
//! `c_{r_k+1} = I_k + 1`). Every slab with two or more slices is replaced
//! by a rank-1 tensor that keeps its axis sums, which makes each non-leading
//! slice of the slab proportional to its predecessor. The mode-`k` expansion
//! of the result then has rank at most `r_k`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank1::best_rank1;
use crate::tensor::{DenseTensor, ModeBlock, Shape};

/// Target `(r_1, …, r_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuckerRank(pub Vec<usize>);

impl TuckerRank {
    pub fn new(ranks: impl Into<Vec<usize>>) -> Self {
        Self(ranks.into())
    }

    /// `(r, …, r)` of the given order.
    pub fn uniform(r: usize, order: usize) -> Self {
        Self(vec![r; order])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, shape: &Shape) -> Result<()> {
        if self.0.len() != shape.order() {
            return Err(Error::InvalidRank(format!(
                "{} ranks given for a tensor of order {}",
                self.0.len(),
                shape.order()
            )));
        }
        for (k, (&r, &n)) in self.0.iter().zip(shape.dims()).enumerate() {
            if r == 0 || r > n {
                return Err(Error::InvalidRank(format!(
                    "rank {r} on mode {} outside 1..={n}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Per-mode retained index sets. Serializes as `{"modes":[[1,3,7],[1,2],[1]]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BingoSpec {
    pub modes: Vec<Vec<usize>>,
}

impl BingoSpec {
    /// Keeps every index: no reduction anywhere.
    pub fn full(shape: &Shape) -> Self {
        Self {
            modes: shape.dims().iter().map(|&n| (1..=n).collect()).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index sets always serialize")
    }

    /// The Tucker rank bound this spec realizes.
    pub fn target(&self) -> TuckerRank {
        TuckerRank(self.modes.iter().map(Vec::len).collect())
    }

    pub fn validate(&self, shape: &Shape) -> Result<()> {
        if self.modes.len() != shape.order() {
            return Err(Error::InvalidSpec(format!(
                "{} index sets for a tensor of order {}",
                self.modes.len(),
                shape.order()
            )));
        }
        for (k, (c, &n)) in self.modes.iter().zip(shape.dims()).enumerate() {
            if c.first() != Some(&1) {
                return Err(Error::InvalidSpec(format!(
                    "index set of mode {} must start with 1",
                    k + 1
                )));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSpec(format!(
                    "index set of mode {} is not strictly increasing",
                    k + 1
                )));
            }
            if *c.last().expect("non-empty") > n {
                return Err(Error::InvalidSpec(format!(
                    "index set of mode {} exceeds extent {n}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Draws `C^(k)` uniformly among the `r_k`-subsets of `[I_k]` containing 1.
///
/// A seeded partial Fisher–Yates shuffle of `{2, …, I_k}` picks the
/// `r_k − 1` extra indices; modes are drawn in order from one stream.
pub fn sample_bingo_spec(shape: &Shape, target: &TuckerRank, seed: u64) -> Result<BingoSpec> {
    target.validate(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = shape
        .dims()
        .iter()
        .zip(target.ranks())
        .map(|(&n, &r)| {
            let mut pool: Vec<usize> = (2..=n).collect();
            let picks = r - 1;
            for i in 0..picks {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            let mut c = Vec::with_capacity(r);
            c.push(1);
            c.extend_from_slice(&pool[..picks]);
            c.sort_unstable();
            c
        })
        .collect();
    Ok(BingoSpec { modes })
}

/// Slabs of mode `k` (1-based) that hold at least two slices.
pub fn blocks_from_spec(spec: &BingoSpec, shape: &Shape, k: usize) -> Result<Vec<ModeBlock>> {
    spec.validate(shape)?;
    let axis = shape.axis(k)?;
    let c = &spec.modes[axis];
    let n = shape.dims()[axis];
    Ok(c.iter()
        .enumerate()
        .filter_map(|(l, &lo)| {
            let hi = c.get(l + 1).map_or(n, |&next| next - 1);
            (hi > lo).then(|| ModeBlock::new(k, lo, hi))
        })
        .collect())
}

/// How a slab is replaced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRule {
    /// Rank-1 approximation of the slab's mode-`k` expansion: the slab
    /// becomes `r_i · m(y) / S` with `r` its mode-`k` axis sums and `m` its
    /// sum over mode `k`. This is the KL projection onto tensors whose
    /// slab slices are mutually proportional, and it commutes across modes.
    #[default]
    Unfolding,
    /// Full `d`-way rank-1 approximation of the slab. Also rank-reducing,
    /// but for `d ≥ 3` it constrains more than proportionality and the
    /// result depends on the mode order.
    Joint,
}

#[derive(Clone, Debug, Default)]
pub struct LtrOptions {
    /// Permutation of `1..=d`; `None` processes modes in ascending order.
    pub mode_order: Option<Vec<usize>>,
    pub rule: BlockRule,
}

/// Output of [`ltr_reduce`].
#[derive(Clone, Debug)]
pub struct Reduction {
    pub tensor: DenseTensor,
    pub spec: BingoSpec,
    /// Slabs with zero mass, left unchanged.
    pub skipped: Vec<ModeBlock>,
}

/// Reduces `t` with the index sets of `spec`.
pub fn ltr_reduce(t: &DenseTensor, spec: &BingoSpec, opts: &LtrOptions) -> Result<Reduction> {
    t.check_nonnegative()?;
    if !(t.total_sum() > 0.0) {
        return Err(Error::ZeroSum);
    }
    spec.validate(t.shape())?;
    let order = mode_order(opts.mode_order.as_deref(), t.order())?;

    let mut out = t.clone();
    let mut skipped = Vec::new();
    for k in order {
        for b in blocks_from_spec(spec, t.shape(), k)? {
            let replaced = match opts.rule {
                BlockRule::Unfolding => project_slab_unfolding(&mut out, &b),
                BlockRule::Joint => project_slab_joint(&mut out, &b)?,
            };
            if !replaced {
                skipped.push(b);
            }
        }
    }
    Ok(Reduction {
        tensor: out,
        spec: spec.clone(),
        skipped,
    })
}

/// Samples index sets for `target` from `seed`, then reduces.
pub fn ltr_reduce_seeded(
    t: &DenseTensor,
    target: &TuckerRank,
    seed: u64,
    opts: &LtrOptions,
) -> Result<Reduction> {
    let spec = sample_bingo_spec(t.shape(), target, seed)?;
    ltr_reduce(t, &spec, opts)
}

/// Same as [`ltr_reduce_seeded`], also returning the elapsed wall time in seconds.
pub fn ltr_reduce_timed(
    t: &DenseTensor,
    target: &TuckerRank,
    seed: u64,
    opts: &LtrOptions,
) -> Result<(Reduction, f64)> {
    let start = Instant::now();
    let r = ltr_reduce_seeded(t, target, seed, opts)?;
    Ok((r, start.elapsed().as_secs_f64()))
}

/// Worst-case element-operation count `r_1⋯r_d · I_1⋯I_d`.
pub fn worst_case_cost(shape: &Shape, target: &TuckerRank) -> Result<u128> {
    target.validate(shape)?;
    let r: u128 = target.ranks().iter().map(|&r| r as u128).product();
    let n: u128 = shape.dims().iter().map(|&n| n as u128).product();
    Ok(r * n)
}

fn mode_order(requested: Option<&[usize]>, d: usize) -> Result<Vec<usize>> {
    match requested {
        None => Ok((1..=d).collect()),
        Some(order) => {
            let mut sorted = order.to_vec();
            sorted.sort_unstable();
            if sorted != (1..=d).collect::<Vec<_>>() {
                return Err(Error::InvalidArgument(format!(
                    "mode order {order:?} is not a permutation of 1..={d}"
                )));
            }
            Ok(order.to_vec())
        }
    }
}

/// In-place slab replacement by `r_i m(y) / S`. Returns false for a
/// zero-mass slab, which is left untouched.
fn project_slab_unfolding(t: &mut DenseTensor, b: &ModeBlock) -> bool {
    let axis = b.mode - 1;
    let (outer, extent, inner) = t.shape().slab(axis);
    let (lo, hi) = (b.lo - 1, b.hi - 1);
    let data = t.data_mut();

    let mut rows = vec![0.0; b.len()];
    let mut rest = vec![0.0; outer * inner];
    for o in 0..outer {
        for i in lo..=hi {
            let start = (o * extent + i) * inner;
            let slice = &data[start..start + inner];
            rows[i - lo] += slice.iter().sum::<f64>();
            for (acc, &v) in rest[o * inner..(o + 1) * inner].iter_mut().zip(slice) {
                *acc += v;
            }
        }
    }
    let total: f64 = rows.iter().sum();
    if !(total > 0.0) {
        return false;
    }
    for o in 0..outer {
        let m = &rest[o * inner..(o + 1) * inner];
        for i in lo..=hi {
            let scale = rows[i - lo] / total;
            let start = (o * extent + i) * inner;
            for (dst, &mv) in data[start..start + inner].iter_mut().zip(m) {
                *dst = scale * mv;
            }
        }
    }
    true
}

fn project_slab_joint(t: &mut DenseTensor, b: &ModeBlock) -> Result<bool> {
    let sub = t.extract_block(b)?;
    if !(sub.total_sum() > 0.0) {
        return Ok(false);
    }
    let (approx, _) = best_rank1(&sub)?;
    t.replace_block_in_place(b, &approx)?;
    Ok(true)
}
