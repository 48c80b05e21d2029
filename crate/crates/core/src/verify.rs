//! Rank estimation, divergences and projection certificates.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infogeo::{
    classify, detect_bingos, eta_from_tensor, tensor_from_theta, theta_from_tensor, ParamClass,
    ThetaCoords, DEFAULT_BINGO_TOL,
};
use crate::ltr::BingoSpec;
use crate::tensor::{DenseTensor, Matrix, Shape};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Singular values of `m` in descending order.
///
/// One-sided Jacobi on the rows or columns, whichever are fewer: pairs of
/// vectors are rotated until mutually orthogonal, then their norms are the
/// singular values.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let mut vecs: Vec<Vec<f64>> = if m.rows() <= m.cols() {
        (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
    } else {
        let t = m.transpose();
        (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
    };
    let n = vecs.len();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (head, tail) = vecs.split_at_mut(q);
                let (u, v) = (&mut head[p], &mut tail[0]);
                let alpha: f64 = u.iter().map(|x| x * x).sum();
                let beta: f64 = v.iter().map(|x| x * x).sum();
                let gamma: f64 = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (x, y) in u.iter_mut().zip(v.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = vecs
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Per-mode ranks with the singular values they were read from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub ranks: Vec<usize>,
    pub singular_values: Vec<Vec<f64>>,
    pub tol: f64,
}

/// Counts singular values of each mode expansion above `tol × σ_max`.
pub fn numerical_tucker_rank(t: &DenseTensor, tol: f64) -> Result<RankEstimate> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance {tol} outside (0, 1)")));
    }
    let mut ranks = Vec::with_capacity(t.order());
    let mut all = Vec::with_capacity(t.order());
    for k in 1..=t.order() {
        let sv = singular_values(&t.mode_k_expansion(k)?);
        let cut = tol * sv.first().copied().unwrap_or(0.0);
        ranks.push(sv.iter().filter(|&&s| s > cut).count());
        all.push(sv);
    }
    Ok(RankEstimate {
        ranks,
        singular_values: all,
        tol,
    })
}

fn check_same_shape(p: &DenseTensor, q: &DenseTensor) -> Result<()> {
    if p.dims() != q.dims() {
        return Err(Error::ShapeMismatch {
            expected: p.dims().to_vec(),
            actual: q.dims().to_vec(),
        });
    }
    Ok(())
}

/// Generalized KL divergence `Σ p log(p/q) − p + q`, with `0 log 0 = 0`.
pub fn kl_divergence(p: &DenseTensor, q: &DenseTensor) -> Result<f64> {
    check_same_shape(p, q)?;
    p.check_nonnegative()?;
    q.check_nonnegative()?;
    let mut acc = 0.0;
    for (off, (&a, &b)) in p.data().iter().zip(q.data()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::InfiniteDivergence { offset: off, p: a });
            }
            acc += a * (a / b).ln() - a + b;
        } else {
            acc += b;
        }
    }
    Ok(acc)
}

/// Frobenius norm of `p − q`.
pub fn ls_error(p: &DenseTensor, q: &DenseTensor) -> Result<f64> {
    check_same_shape(p, q)?;
    Ok(p.data()
        .iter()
        .zip(q.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Per-mode flags: `true` for indices outside `C^(k)`, i.e. the non-leading
/// slices of each block.
fn interior_flags(spec: &BingoSpec, shape: &Shape) -> Result<Vec<Vec<bool>>> {
    spec.validate(shape)?;
    Ok(spec
        .modes
        .iter()
        .zip(shape.dims())
        .map(|(c, &n)| (1..=n).map(|i| !c.contains(&i)).collect())
        .collect())
}

/// Offsets of the constrained θ set: many-body indices with at least one
/// component strictly inside a block of its mode.
pub fn bingo_mask(spec: &BingoSpec, shape: &Shape) -> Result<Vec<bool>> {
    let interior = interior_flags(spec, shape)?;
    Ok((0..shape.len())
        .map(|off| {
            let idx = shape.unravel(off);
            classify(idx.as_slice()) == ParamClass::ManyBody
                && idx
                    .as_slice()
                    .iter()
                    .zip(&interior)
                    .any(|(&i, flags)| flags[i - 1])
        })
        .collect())
}

/// Offsets whose element is a Möbius combination of unconstrained η only,
/// and which reduction therefore leaves unchanged.
pub fn unchanged_mask(spec: &BingoSpec, shape: &Shape) -> Result<Vec<bool>> {
    let mask = bingo_mask(spec, shape)?;
    let d = shape.order();
    Ok((0..shape.len())
        .map(|off| {
            let idx = shape.unravel(off);
            (0u32..1 << d).all(|eps| {
                let up: Vec<usize> = idx
                    .as_slice()
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| i + ((eps >> k) & 1) as usize)
                    .collect();
                match shape.offset(&up) {
                    Ok(o) => !mask[o],
                    Err(_) => true,
                }
            })
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyTolerances {
    pub theta: f64,
    pub eta: f64,
    pub axis_sum: f64,
}

impl Default for CertifyTolerances {
    fn default() -> Self {
        Self {
            theta: 1e-8,
            eta: 1e-9,
            axis_sum: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCertificate {
    /// `max |θ̃|` over the constrained set.
    pub max_theta: f64,
    /// `max |η̃ − η|` outside the constrained set.
    pub max_eta_drift: f64,
    /// Largest relative axis-sum difference over all modes.
    pub max_axis_sum_drift: f64,
    pub constrained: usize,
    pub theta_pass: bool,
    pub eta_pass: bool,
    pub axis_sum_pass: bool,
    pub pass: bool,
    pub tolerances: CertifyTolerances,
}

/// Checks that `output` is the projection of `input` onto the bingo space
/// of `spec`. Both tensors are normalized before their coordinates are
/// compared; axis sums are compared unnormalized.
pub fn certify_projection(
    input: &DenseTensor,
    output: &DenseTensor,
    spec: &BingoSpec,
    tols: &CertifyTolerances,
) -> Result<ProjectionCertificate> {
    check_same_shape(input, output)?;
    let mask = bingo_mask(spec, input.shape())?;
    let p = input.normalized()?;
    let q = output.normalized()?;
    let theta = theta_from_tensor(&q)?;
    let eta_p = eta_from_tensor(&p, true)?;
    let eta_q = eta_from_tensor(&q, true)?;

    let mut max_theta: f64 = 0.0;
    let mut max_eta: f64 = 0.0;
    for (off, &constrained) in mask.iter().enumerate() {
        if constrained {
            max_theta = max_theta.max(theta.values()[off].abs());
        } else {
            max_eta = max_eta.max((eta_q.values()[off] - eta_p.values()[off]).abs());
        }
    }
    let max_axis = max_axis_sum_drift(input, output)?;
    let theta_pass = max_theta < tols.theta;
    let eta_pass = max_eta < tols.eta;
    let axis_sum_pass = max_axis < tols.axis_sum;
    Ok(ProjectionCertificate {
        max_theta,
        max_eta_drift: max_eta,
        max_axis_sum_drift: max_axis,
        constrained: mask.iter().filter(|&&m| m).count(),
        theta_pass,
        eta_pass,
        axis_sum_pass,
        pass: theta_pass && eta_pass && axis_sum_pass,
        tolerances: *tols,
    })
}

/// `max_k max_i |s_out − s_in| / |s_in|` over all axis sums; exact zeros on
/// both sides count as agreement.
pub fn max_axis_sum_drift(input: &DenseTensor, output: &DenseTensor) -> Result<f64> {
    check_same_shape(input, output)?;
    let mut worst: f64 = 0.0;
    for k in 1..=input.order() {
        for (a, b) in input.axis_sums(k)?.into_iter().zip(output.axis_sums(k)?) {
            let diff = (a - b).abs();
            if diff > 0.0 {
                worst = worst.max(diff / a.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(worst)
}

/// Checks `rank_k ≤ I_k − b_k` where `b_k` counts the detected bingos of mode `k`.
pub fn bingo_rank_bound_check(t: &DenseTensor, k: usize) -> Result<bool> {
    let b = detect_bingos(t, k, DEFAULT_BINGO_TOL)?.len();
    let axis = t.shape().axis(k)?;
    let sv = singular_values(&t.mode_k_expansion(k)?);
    let cut = DEFAULT_RANK_TOL * sv[0];
    let rank = sv.iter().filter(|&&s| s > cut).count();
    Ok(rank <= t.dims()[axis] - b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptimum {
    pub kl: f64,
    pub a: f64,
    pub b: f64,
}

/// Exhaustive search over normalized rank-1 `2 × 2` tensors
/// `(a, 1−a) ⊗ (b, 1−b)` with `a, b` on the grid `step, 2·step, …`.
pub fn rank1_grid_oracle(t: &DenseTensor, step: f64) -> Result<GridOptimum> {
    if t.dims() != [2, 2] {
        return Err(Error::ShapeMismatch {
            expected: vec![2, 2],
            actual: t.dims().to_vec(),
        });
    }
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside (0, 0.1]")));
    }
    t.check_nonnegative()?;
    let p = t.data();
    let n = (1.0 / step).round() as usize;
    let term = |x: f64, y: f64| if x > 0.0 { x * (x / y).ln() - x + y } else { y };
    let mut best = GridOptimum {
        kl: f64::INFINITY,
        a: f64::NAN,
        b: f64::NAN,
    };
    for i in 1..n {
        let a = i as f64 * step;
        for j in 1..n {
            let b = j as f64 * step;
            let kl = term(p[0], a * b)
                + term(p[1], a * (1.0 - b))
                + term(p[2], (1.0 - a) * b)
                + term(p[3], (1.0 - a) * (1.0 - b));
            if kl < best.kl {
                best = GridOptimum { kl, a, b };
            }
        }
    }
    Ok(best)
}

/// A random member of the bingo space of `spec` near `q`: Gaussian noise
/// of scale `sigma` on every unconstrained non-root θ, then renormalized
/// and rescaled to the total mass of `q`.
pub fn perturb_in_bingo_space(
    q: &DenseTensor,
    spec: &BingoSpec,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<DenseTensor> {
    let mask = bingo_mask(spec, q.shape())?;
    let mass = q.total_sum();
    let theta = theta_from_tensor(&q.normalized()?)?;
    let mut data = theta.into_tensor().into_data();
    for (off, v) in data.iter_mut().enumerate().skip(1) {
        if !mask[off] {
            *v += sigma * Distribution::<f64>::sample(&StandardNormal, rng);
        }
    }
    let th = ThetaCoords::from_tensor(DenseTensor::new(q.shape().clone(), data)?);
    Ok(tensor_from_theta(&th, true)?.scaled(mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltr::{ltr_reduce, LtrOptions};
    use crate::rank1::best_rank1;
    use crate::synth::{random_distribution, rng};

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn singular_values_of_small_matrices() {
        let m = Matrix::new(2, 2, vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(singular_values(&m), vec![4.0, 3.0]);
        // [[1,1],[1,1]] has singular values (2, 0)
        let m = Matrix::new(2, 2, vec![1.0; 4]).unwrap();
        let sv = singular_values(&m);
        assert!((sv[0] - 2.0).abs() < 1e-14 && sv[1].abs() < 1e-14);
        // 2x3 [[1,0,1],[0,1,0]]: sqrt(2), 1
        let m = Matrix::new(2, 3, vec![1., 0., 1., 0., 1., 0.]).unwrap();
        let sv = singular_values(&m);
        assert!((sv[0] - 2f64.sqrt()).abs() < 1e-14 && (sv[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_examples() {
        let mut r = rng(3);
        let v = crate::synth::random_vectors(&[3, 4, 5], &mut r);
        let t = DenseTensor::outer_product(&v).unwrap();
        assert_eq!(numerical_tucker_rank(&t, 1e-8).unwrap().ranks, vec![1, 1, 1]);
        let diag = DenseTensor::from_dims(&[3, 3], vec![1., 0., 0., 0., 2., 0., 0., 0., 3.]).unwrap();
        assert_eq!(numerical_tucker_rank(&diag, 1e-8).unwrap().ranks, vec![3, 3]);
        assert!(numerical_tucker_rank(&diag, 0.0).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = DenseTensor::from_dims(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let q = DenseTensor::from_dims(&[2, 2], vec![0.12, 0.18, 0.28, 0.42]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let want = 0.1 * (0.1f64 / 0.12).ln()
            + 0.2 * (0.2f64 / 0.18).ln()
            + 0.3 * (0.3f64 / 0.28).ln()
            + 0.4 * (0.4f64 / 0.42).ln();
        let got = kl_divergence(&p, &q).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.0040217).abs() < 1e-7);
        let z = DenseTensor::from_dims(&[2, 2], vec![0.0, 0.5, 0.25, 0.25]).unwrap();
        assert!(matches!(
            kl_divergence(&p, &z),
            Err(Error::InfiniteDivergence { offset: 0, .. })
        ));
        assert!(kl_divergence(&z, &p).unwrap().is_finite());
    }

    #[test]
    fn ls_examples() {
        let p = DenseTensor::from_dims(&[2, 2], vec![1., 0., 0., 1.]).unwrap();
        let z = DenseTensor::from_dims(&[2, 2], vec![0.; 4]).unwrap();
        assert_eq!(ls_error(&p, &z).unwrap(), 2f64.sqrt());
        assert_eq!(ls_error(&z, &p).unwrap(), 2f64.sqrt());
        assert!(ls_error(&p, &DenseTensor::from_dims(&[4], vec![0.; 4]).unwrap()).is_err());
    }

    #[test]
    fn mask_examples() {
        let s = shape(&[3, 2]);
        let spec = BingoSpec { modes: vec![vec![1, 3], vec![1, 2]] };
        // interior row is i_1 = 2; many-body needs i_2 = 2 as well
        let m = bingo_mask(&spec, &s).unwrap();
        assert_eq!(m, vec![false, false, false, true, false, false]);
        assert!(bingo_mask(&BingoSpec::full(&s), &s).unwrap().iter().all(|&b| !b));
    }

    #[test]
    fn certificates() {
        let s = shape(&[4, 3, 3]);
        let t = random_distribution(&s, 9);
        let spec = BingoSpec { modes: vec![vec![1, 3], vec![1], vec![1, 2]] };
        let out = ltr_reduce(&t, &spec, &LtrOptions::default()).unwrap().tensor;
        let c = certify_projection(&t, &out, &spec, &CertifyTolerances::default()).unwrap();
        assert!(c.pass, "{c:?}");
        let c = certify_projection(&t, &t, &BingoSpec::full(&s), &CertifyTolerances::default())
            .unwrap();
        assert!(c.pass && c.constrained == 0);
        let mut shuffled = t.data().to_vec();
        shuffled.reverse();
        let sh = DenseTensor::new(s.clone(), shuffled).unwrap();
        let c = certify_projection(&t, &sh, &spec, &CertifyTolerances::default()).unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn unchanged_region_matches_input() {
        let s = shape(&[5, 4, 3]);
        let t = random_distribution(&s, 4);
        let spec = BingoSpec { modes: vec![vec![1, 2, 4], vec![1, 3, 4], vec![1, 2]] };
        let out = ltr_reduce(&t, &spec, &LtrOptions::default()).unwrap().tensor;
        let keep = unchanged_mask(&spec, &s).unwrap();
        assert!(keep.iter().any(|&k| k));
        for (off, &k) in keep.iter().enumerate() {
            if k {
                assert!((out.data()[off] - t.data()[off]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_oracle_matches_closed_form() {
        let t = DenseTensor::from_dims(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = rank1_grid_oracle(&t, 1e-3).unwrap();
        assert!((g.a - 0.3).abs() <= 1e-3 + 1e-12 && (g.b - 0.4).abs() <= 1e-3 + 1e-12);
        let (q, _) = best_rank1(&t).unwrap();
        assert!(g.kl >= kl_divergence(&t, &q).unwrap() - 1e-6);
        assert!(rank1_grid_oracle(&DenseTensor::from_dims(&[4], vec![1.; 4]).unwrap(), 0.01)
            .is_err());
        let r1 = DenseTensor::outer_product(&[vec![0.25, 0.75], vec![0.6, 0.4]]).unwrap();
        let g = rank1_grid_oracle(&r1, 1e-3).unwrap();
        assert!(g.kl < 1e-9 && (g.a - 0.25).abs() < 1e-9 && (g.b - 0.6).abs() < 1e-9);
    }

    #[test]
    fn perturbation_stays_in_bingo_space() {
        let s = shape(&[4, 4, 4]);
        let t = random_distribution(&s, 2).scaled(3.0);
        let spec = BingoSpec { modes: vec![vec![1, 3], vec![1, 2, 4], vec![1]] };
        let out = ltr_reduce(&t, &spec, &LtrOptions::default()).unwrap().tensor;
        let mut r = rng(5);
        let q = perturb_in_bingo_space(&out, &spec, 0.1, &mut r).unwrap();
        assert!((q.total_sum() - 3.0).abs() < 1e-12);
        let th = theta_from_tensor(&q.normalized().unwrap()).unwrap();
        let mask = bingo_mask(&spec, &s).unwrap();
        for (off, &m) in mask.iter().enumerate() {
            if m {
                assert!(th.values()[off].abs() < 1e-9);
            }
        }
        let base = kl_divergence(&t, &out).unwrap();
        assert!(kl_divergence(&t, &q).unwrap() >= base);
    }
}
