//! Closed-form KL-optimal rank-1 approximation (the mean-field projection).
//!
//! For a non-negative tensor `P` with total mass `S`, the rank-1 tensor
//! minimizing the generalized KL divergence from `P` is
//! `λ · s^(1) ⊗ … ⊗ s^(d)`, where `s^(k)` are the axis sums of `P` and
//! `λ = S^{1−d}`. It keeps every axis sum of `P`.

use crate::error::{Error, Result};
use crate::infogeo::{eta_from_tensor, one_body_eta};
use crate::tensor::DenseTensor;

/// `λ` and the per-mode vectors of a rank-1 tensor `λ s^(1) ⊗ … ⊗ s^(d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Factors {
    pub lambda: f64,
    pub factors: Vec<Vec<f64>>,
}

impl Rank1Factors {
    pub fn to_tensor(&self) -> Result<DenseTensor> {
        Ok(DenseTensor::outer_product(&self.factors)?.scaled(self.lambda))
    }
}

/// Best rank-1 approximation of `t` under the generalized KL divergence.
///
/// Zeros are allowed; the total mass must be positive. Axis sums are
/// accumulated in ascending storage order.
pub fn best_rank1(t: &DenseTensor) -> Result<(DenseTensor, Rank1Factors)> {
    t.check_nonnegative()?;
    let total = t.total_sum();
    if !(total > 0.0) {
        return Err(Error::ZeroSum);
    }
    let d = t.order();
    let factors = (1..=d)
        .map(|k| t.axis_sums(k))
        .collect::<Result<Vec<_>>>()?;
    let lambda = total.powi(1 - d as i32);
    let f = Rank1Factors { lambda, factors };
    Ok((f.to_tensor()?, f))
}

/// True when the normalized `t` has every many-body η equal to the
/// product of its one-body η factors, within `tol`.
pub fn is_rank1(t: &DenseTensor, tol: f64) -> Result<bool> {
    t.check_strictly_positive()?;
    let p = t.normalized()?;
    let eta = eta_from_tensor(&p, true)?;
    let factors = one_body_eta(&eta);
    let shape = eta.shape();
    let worst = eta
        .values()
        .iter()
        .enumerate()
        .map(|(off, &v)| {
            let prod: f64 = (0..shape.order())
                .map(|k| factors[k][shape.coord(off, k)])
                .product();
            (v - prod).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst <= tol)
}
