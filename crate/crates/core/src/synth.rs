//! Seeded synthetic tensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::infogeo::{tensor_from_theta, ThetaCoords};
use crate::tensor::{DenseTensor, Shape};

/// SplitMix64 step: a well-mixed child seed for stream `index` of `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Elements drawn i.i.d. from uniform `[0, 1)`, in storage order.
pub fn uniform_tensor(shape: &Shape, seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    let data = (0..shape.len()).map(|_| r.random::<f64>()).collect();
    DenseTensor::from_parts(shape.clone(), data)
}

/// Strictly positive tensor normalized to sum 1, elements before
/// normalization uniform in `[0.05, 1)`.
pub fn random_distribution(shape: &Shape, seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..shape.len())
        .map(|_| 0.05 + 0.95 * r.random::<f64>())
        .collect();
    let s: f64 = data.iter().sum();
    DenseTensor::from_parts(shape.clone(), data.into_iter().map(|v| v / s).collect())
}

/// Positive vectors with entries uniform in `[0.1, 1)`, one per mode.
pub fn random_vectors(dims: &[usize], r: &mut impl Rng) -> Vec<Vec<f64>> {
    dims.iter()
        .map(|&n| (0..n).map(|_| 0.1 + 0.9 * r.random::<f64>()).collect())
        .collect()
}

/// Normalized rank-1 tensor from random positive factors.
pub fn random_rank1(shape: &Shape, seed: u64) -> Result<DenseTensor> {
    let mut r = rng(seed);
    DenseTensor::outer_product(&random_vectors(shape.dims(), &mut r))?.normalized()
}

/// θ-coordinates with i.i.d. `N(0, sigma²)` entries off the root.
pub fn random_theta(shape: &Shape, sigma: f64, seed: u64) -> ThetaCoords {
    let mut r = rng(seed);
    let mut data: Vec<f64> = (0..shape.len())
        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, &mut r))
        .collect();
    data[0] = 0.0;
    ThetaCoords::from_tensor(DenseTensor::from_parts(shape.clone(), data))
}

/// Normalized tensor whose θ vanishes at every index selected by `zero`.
pub fn tensor_with_zero_theta(
    shape: &Shape,
    sigma: f64,
    seed: u64,
    zero: impl Fn(&[usize]) -> bool,
) -> Result<DenseTensor> {
    let th = random_theta(shape, sigma, seed);
    let mut data = th.into_tensor().into_data();
    for (off, v) in data.iter_mut().enumerate().skip(1) {
        if zero(shape.unravel(off).as_slice()) {
            *v = 0.0;
        }
    }
    let th = ThetaCoords::from_tensor(DenseTensor::from_parts(shape.clone(), data));
    tensor_from_theta(&th, true)
}

/// Normalized tensor whose mode-`k` slices at `rows` (each ≥ 2) are
/// positive multiples of their predecessors, so every many-body θ with
/// `k`-th component in `rows` vanishes. With `identical` the multiple is 1
/// and the matching one-body θ vanish too.
pub fn planted_bingo(
    shape: &Shape,
    k: usize,
    rows: &[usize],
    identical: bool,
    seed: u64,
) -> Result<DenseTensor> {
    let axis = shape.axis(k)?;
    let mut r = rng(seed);
    let mut data: Vec<f64> = (0..shape.len())
        .map(|_| 0.05 + 0.95 * r.random::<f64>())
        .collect();
    let (outer, extent, inner) = shape.slab(axis);
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    for &i in &sorted {
        if i < 2 || i > extent {
            return Err(crate::error::Error::IndexOutOfRange {
                mode: k,
                index: i,
                extent,
            });
        }
        let c = if identical { 1.0 } else { 0.5 + 1.5 * r.random::<f64>() };
        for o in 0..outer {
            let prev = (o * extent + i - 2) * inner;
            let cur = prev + inner;
            for j in 0..inner {
                data[cur + j] = c * data[prev + j];
            }
        }
    }
    DenseTensor::from_parts(shape.clone(), data).normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infogeo::{detect_bingos, DEFAULT_BINGO_TOL};

    #[test]
    fn uniform_is_seeded_and_in_range() {
        let s = Shape::new(vec![30, 30, 30]).unwrap();
        let a = uniform_tensor(&s, 7);
        assert_eq!(a, uniform_tensor(&s, 7));
        assert_ne!(a, uniform_tensor(&s, 8));
        assert_eq!(a.len(), 27000);
        assert!(a.data().iter().all(|&v| (0.0..1.0).contains(&v)));
        let n = a.len() as f64;
        let sigma = (1.0f64 / 12.0).sqrt();
        assert!((a.total_sum() / n - 0.5).abs() < 3.0 * sigma / n.sqrt());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(3, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
    }

    #[test]
    fn planted_rows_are_detected() {
        let s = Shape::new(vec![5, 4, 3]).unwrap();
        for k in 1..=3 {
            let t = planted_bingo(&s, k, &[2], false, 11).unwrap();
            let found = detect_bingos(&t, k, DEFAULT_BINGO_TOL).unwrap();
            assert_eq!(found.into_iter().collect::<Vec<_>>(), vec![2], "mode {k}");
        }
        let t = random_distribution(&s, 1);
        assert!((t.total_sum() - 1.0).abs() < 1e-12);
        assert!(detect_bingos(&t, 1, DEFAULT_BINGO_TOL).unwrap().is_empty());
    }
}
