//! Dual coordinates of a strictly positive tensor viewed as a distribution
//! over the index grid `[I_1] × … × [I_d]`.
//!
//! * θ (canonical): `log P_i = Σ_{i' ≤ i} θ_{i'}`.
//! * η (expectation): `η_i = Σ_{i' ≥ i} P_{i'}`, the upper-orthant tail sum.
//!
//! Both are shape-congruent with the tensor and stored as [`DenseTensor`]s.
//! Every conversion runs as a per-axis sweep: cumulative sums and backward
//! differences for θ, tail sums and forward differences for η. Each costs
//! `O(d N)`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

/// Relative proportionality tolerance used to call a slice a bingo.
pub const DEFAULT_BINGO_TOL: f64 = 1e-8;
/// Allowed deviation of the total mass from 1 for "normalized" inputs.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Default clamp floor relative to the largest element.
pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-12;

/// θ-coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCoords(DenseTensor);

/// η-coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaCoords(DenseTensor);

macro_rules! coords_common {
    ($t:ty) => {
        impl $t {
            /// Wraps a shape-congruent array of coordinate values.
            pub fn from_tensor(values: DenseTensor) -> Self {
                Self(values)
            }

            pub fn as_tensor(&self) -> &DenseTensor {
                &self.0
            }

            pub fn into_tensor(self) -> DenseTensor {
                self.0
            }

            pub fn shape(&self) -> &Shape {
                self.0.shape()
            }

            pub fn values(&self) -> &[f64] {
                self.0.data()
            }

            /// Value at a 1-based index.
            pub fn get(&self, idx: &[usize]) -> Result<f64> {
                self.0.get(idx)
            }
        }
    };
}

coords_common!(ThetaCoords);
coords_common!(EtaCoords);

impl ThetaCoords {
    /// The root value `θ_{1,…,1}` implied by normalization, computed from
    /// every other entry: `−log Σ_{i ∈ Ω} exp(Σ_{(1,…,1) ≠ i' ≤ i} θ_{i'})`.
    /// The root term contributes `exp(0) = 1` to the sum.
    pub fn normalizer(&self) -> f64 {
        let mut partial = self.0.data().to_vec();
        partial[0] = 0.0;
        cumsum_axes(self.shape(), &mut partial);
        -log_sum_exp(&partial)
    }

    pub fn root(&self) -> f64 {
        self.0.data()[0]
    }
}

impl EtaCoords {
    pub fn root(&self) -> f64 {
        self.0.data()[0]
    }
}

/// Classification of a coordinate index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamClass {
    /// `(1, …, 1)`.
    Root,
    /// Exactly one component exceeds 1: mode `mode` (1-based) at `index`.
    OneBody { mode: usize, index: usize },
    /// Two or more components exceed 1.
    ManyBody,
}

pub fn classify(idx: &[usize]) -> ParamClass {
    let mut raised = idx.iter().enumerate().filter(|(_, &i)| i > 1);
    match (raised.next(), raised.next()) {
        (None, _) => ParamClass::Root,
        (Some((k, &i)), None) => ParamClass::OneBody {
            mode: k + 1,
            index: i,
        },
        _ => ParamClass::ManyBody,
    }
}

/// Replaces every element below `rel_eps × max` by that floor.
///
/// Zero-bearing data becomes admissible for coordinate extraction.
pub fn clamp_to_floor(t: &DenseTensor, rel_eps: f64) -> Result<DenseTensor> {
    if !(rel_eps > 0.0 && rel_eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "clamp epsilon {rel_eps} outside (0, 1)"
        )));
    }
    t.check_nonnegative()?;
    let floor = rel_eps * t.max();
    if floor <= 0.0 {
        return Err(Error::ZeroSum);
    }
    Ok(t.map(|v| v.max(floor)))
}

fn check_normalized(t: &DenseTensor) -> Result<()> {
    let s = t.total_sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(s));
    }
    Ok(())
}

/// Tail sums `η_i = Σ_{i' ≥ i} P_{i'}`.
///
/// With `normalized` set, the total mass must be 1 within
/// [`NORMALIZATION_TOL`].
pub fn eta_from_tensor(t: &DenseTensor, normalized: bool) -> Result<EtaCoords> {
    t.check_strictly_positive()?;
    if normalized {
        check_normalized(t)?;
    }
    let mut data = t.data().to_vec();
    tailsum_axes(t.shape(), &mut data);
    Ok(EtaCoords(DenseTensor::from_parts(t.shape().clone(), data)))
}

/// Inverts [`eta_from_tensor`] by Möbius inversion on the grid.
///
/// `P_i = Σ_{ε ∈ {0,1}^d} (−1)^{|ε|} η_{i+ε}`, with η outside the grid
/// taken as 0. Fails if any reconstructed element is not strictly positive.
pub fn tensor_from_eta(e: &EtaCoords) -> Result<DenseTensor> {
    let mut data = e.values().to_vec();
    fwddiff_axes(e.shape(), &mut data);
    if let Some(offset) = data.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidEta(format!(
            "reconstructed element at {:?} is {}",
            e.shape().unravel(offset).0,
            data[offset]
        )));
    }
    Ok(DenseTensor::from_parts(e.shape().clone(), data))
}

/// Möbius function `μ(lower, upper)` of the product order on the grid.
///
/// It factorizes over modes: each component contributes 1 when equal,
/// −1 when `upper_k = lower_k + 1`, and zeroes the product otherwise.
///
/// # Panics
/// If the two indices have different lengths.
pub fn mobius_coefficient(lower: &[usize], upper: &[usize]) -> i64 {
    assert_eq!(lower.len(), upper.len(), "index orders differ");
    let mut mu = 1;
    for (&a, &b) in lower.iter().zip(upper) {
        if b == a {
            continue;
        } else if b == a + 1 {
            mu = -mu;
        } else {
            return 0;
        }
    }
    mu
}

/// θ-coordinates of a strictly positive normalized tensor.
///
/// `θ_i = Σ_{ε ∈ {0,1}^d} (−1)^{|ε|} log P_{i−ε}`, dropping off-grid terms,
/// so that `θ_{1,…,1} = log P_{1,…,1}`.
pub fn theta_from_tensor(t: &DenseTensor) -> Result<ThetaCoords> {
    t.check_strictly_positive()?;
    check_normalized(t)?;
    Ok(ThetaCoords(log_backdiff(t)))
}

/// Backward-difference of `log t` without any normalization requirement.
pub(crate) fn log_backdiff(t: &DenseTensor) -> DenseTensor {
    let mut data: Vec<f64> = t.data().iter().map(|v| v.ln()).collect();
    backdiff_axes(t.shape(), &mut data);
    DenseTensor::from_parts(t.shape().clone(), data)
}

/// `P_i = exp(Σ_{i' ≤ i} θ_{i'})`.
///
/// With `renormalize`, the stored root is ignored and replaced by
/// [`ThetaCoords::normalizer`], so the result sums to 1.
pub fn tensor_from_theta(th: &ThetaCoords, renormalize: bool) -> Result<DenseTensor> {
    let mut data = th.values().to_vec();
    if renormalize {
        data[0] = 0.0;
        cumsum_axes(th.shape(), &mut data);
        let z = log_sum_exp(&data);
        for v in &mut data {
            *v = (*v - z).exp();
        }
    } else {
        cumsum_axes(th.shape(), &mut data);
        for v in &mut data {
            *v = v.exp();
        }
    }
    DenseTensor::new(th.shape().clone(), data)
}

/// One-body η vectors `η^(k)_j = η_{1,…,j,…,1}`, `j = 1..=I_k`.
pub fn one_body_eta(e: &EtaCoords) -> Vec<Vec<f64>> {
    one_body(e.as_tensor())
}

/// One-body θ vectors `θ^(k)_j`. Entry `j = 1` is the shared root.
pub fn one_body_theta(th: &ThetaCoords) -> Vec<Vec<f64>> {
    one_body(th.as_tensor())
}

fn one_body(t: &DenseTensor) -> Vec<Vec<f64>> {
    let shape = t.shape();
    (0..shape.order())
        .map(|k| {
            (0..shape.dims()[k])
                .map(|j| t.data()[j * shape.strides()[k]])
                .collect()
        })
        .collect()
}

/// Slices `i ∈ 2..=I_k` whose mode-`k` row is proportional to row `i − 1`
/// within relative tolerance `tol`.
pub fn detect_bingos(t: &DenseTensor, k: usize, tol: f64) -> Result<BTreeSet<usize>> {
    t.check_strictly_positive()?;
    let m = t.mode_k_expansion(k)?;
    let mut found = BTreeSet::new();
    for i in 1..m.rows() {
        let (prev, cur) = (m.row(i - 1), m.row(i));
        let base = cur[0] / prev[0];
        let proportional = cur
            .iter()
            .zip(prev)
            .all(|(c, p)| ((c / p) / base - 1.0).abs() <= tol);
        if proportional {
            found.insert(i + 1);
        }
    }
    Ok(found)
}

/// Bingo detection through the θ-coordinates of the mode-`k` expansion:
/// slice `i` is a bingo when `θ^(k)_{ij} = 0` for every column `j ≥ 2`.
pub fn detect_bingos_theta(t: &DenseTensor, k: usize, tol: f64) -> Result<BTreeSet<usize>> {
    t.check_strictly_positive()?;
    let m = t.mode_k_expansion(k)?;
    let as_matrix = DenseTensor::from_parts(
        Shape::new(vec![m.rows(), m.cols()])?,
        m.data().to_vec(),
    );
    let theta = log_backdiff(&as_matrix);
    let cols = m.cols();
    let mut found = BTreeSet::new();
    for i in 1..m.rows() {
        let row = &theta.data()[i * cols..(i + 1) * cols];
        if row[1..].iter().all(|v| v.abs() <= tol) {
            found.insert(i + 1);
        }
    }
    Ok(found)
}

/// One-body θ of a rank-1 tensor from its one-body η:
/// `θ^(k)_j = log((η_j − η_{j+1}) / (η_{j−1} − η_j))` for `j ≥ 2`, with
/// `η_{I_k+1} = 0`. Entry `j = 1` (the shared root) is returned as 0; see
/// [`rank1_root_theta`].
pub fn rank1_theta_from_eta(one_body_eta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    one_body_eta
        .iter()
        .enumerate()
        .map(|(k, eta)| {
            if eta.is_empty() || (eta[0] - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidEta(format!(
                    "mode {} one-body eta must start at 1",
                    k + 1
                )));
            }
            let at = |j: usize| if j < eta.len() { eta[j] } else { 0.0 };
            let mut theta = vec![0.0; eta.len()];
            for j in 1..eta.len() {
                let num = at(j) - at(j + 1);
                let den = at(j - 1) - at(j);
                if !(num > 0.0 && den > 0.0) {
                    return Err(Error::InvalidEta(format!(
                        "mode {} one-body eta is not strictly decreasing at j = {}",
                        k + 1,
                        j + 1
                    )));
                }
                theta[j] = (num / den).ln();
            }
            Ok(theta)
        })
        .collect()
}

/// One-body η of a rank-1 tensor from its one-body θ (entry 0 ignored):
/// `η^(k)_j = Σ_{i ≥ j} e^{c_i} / Σ_i e^{c_i}` with `c_i = Σ_{2 ≤ i' ≤ i} θ^(k)_{i'}`.
pub fn rank1_eta_from_theta(one_body_theta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    one_body_theta
        .iter()
        .map(|theta| {
            let weights = mode_weights(theta);
            let z: f64 = weights.iter().sum();
            let mut eta = vec![0.0; theta.len()];
            let mut tail = 0.0;
            for j in (0..theta.len()).rev() {
                tail += weights[j];
                eta[j] = tail / z;
            }
            if eta.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { offset: 0 });
            }
            Ok(eta)
        })
        .collect()
}

/// Root `θ_{1,…,1} = −log ∏_k (1 + Σ_{i ≥ 2} exp(Σ_{2 ≤ i' ≤ i} θ^(k)_{i'}))`
/// of the rank-1 tensor with the given one-body θ.
pub fn rank1_root_theta(one_body_theta: &[Vec<f64>]) -> f64 {
    -one_body_theta
        .iter()
        .map(|theta| mode_weights(theta).iter().sum::<f64>().ln())
        .sum::<f64>()
}

/// `exp(c_i)` for the partial sums `c_1 = 0`, `c_i = Σ_{2 ≤ i' ≤ i} θ_{i'}`.
fn mode_weights(theta: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    theta
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            if j > 0 {
                acc += t;
            }
            acc.exp()
        })
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

// Per-axis sweeps. Each visits elements in the order that keeps the
// neighbour it reads unmodified (differences) or already final (sums).

fn cumsum_axes(shape: &Shape, data: &mut [f64]) {
    for axis in 0..shape.order() {
        let s = shape.strides()[axis];
        for x in 0..data.len() {
            if shape.coord(x, axis) > 0 {
                data[x] += data[x - s];
            }
        }
    }
}

fn backdiff_axes(shape: &Shape, data: &mut [f64]) {
    for axis in 0..shape.order() {
        let s = shape.strides()[axis];
        for x in (0..data.len()).rev() {
            if shape.coord(x, axis) > 0 {
                data[x] -= data[x - s];
            }
        }
    }
}

fn tailsum_axes(shape: &Shape, data: &mut [f64]) {
    for axis in 0..shape.order() {
        let (s, n) = (shape.strides()[axis], shape.dims()[axis]);
        for x in (0..data.len()).rev() {
            if shape.coord(x, axis) + 1 < n {
                data[x] += data[x + s];
            }
        }
    }
}

fn fwddiff_axes(shape: &Shape, data: &mut [f64]) {
    for axis in 0..shape.order() {
        let (s, n) = (shape.strides()[axis], shape.dims()[axis]);
        for x in 0..data.len() {
            if shape.coord(x, axis) + 1 < n {
                data[x] -= data[x + s];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m22() -> DenseTensor {
        DenseTensor::from_dims(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    fn assert_all_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})");
        }
    }

    #[test]
    fn eta_examples() {
        let e = eta_from_tensor(&m22(), true).unwrap();
        assert_all_close(e.values(), &[1.0, 0.6, 0.7, 0.4], 1e-15);

        let u = DenseTensor::filled(Shape::new(vec![2, 2]).unwrap(), 0.25);
        let e = eta_from_tensor(&u, true).unwrap();
        assert_all_close(e.values(), &[1.0, 0.5, 0.5, 0.25], 1e-15);

        let s = DenseTensor::from_dims(&[1], vec![1.0]).unwrap();
        assert_eq!(eta_from_tensor(&s, true).unwrap().values(), &[1.0]);
    }

    #[test]
    fn eta_rejects_bad_input() {
        let z = DenseTensor::from_dims(&[2], vec![0.0, 1.0]).unwrap();
        assert!(matches!(eta_from_tensor(&z, false), Err(Error::NonPositive { .. })));
        let big = DenseTensor::from_dims(&[2], vec![1.0, 1.0]).unwrap();
        assert!(matches!(eta_from_tensor(&big, true), Err(Error::NotNormalized(_))));
        assert!(eta_from_tensor(&big, false).is_ok());
    }

    #[test]
    fn tensor_from_eta_examples() {
        let e = EtaCoords::from_tensor(
            DenseTensor::from_dims(&[2, 2], vec![1.0, 0.6, 0.7, 0.4]).unwrap(),
        );
        assert_all_close(tensor_from_eta(&e).unwrap().data(), &[0.1, 0.2, 0.3, 0.4], 1e-15);

        let e1 = EtaCoords::from_tensor(DenseTensor::from_dims(&[2], vec![1.0, 0.4]).unwrap());
        assert_all_close(tensor_from_eta(&e1).unwrap().data(), &[0.6, 0.4], 1e-15);

        let bad = EtaCoords::from_tensor(DenseTensor::from_dims(&[2], vec![0.4, 1.0]).unwrap());
        assert!(matches!(tensor_from_eta(&bad), Err(Error::InvalidEta(_))));
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius_coefficient(&[2, 3], &[2, 3]), 1);
        assert_eq!(mobius_coefficient(&[4], &[5]), -1);
        assert_eq!(mobius_coefficient(&[1, 1], &[2, 2]), 1);
        assert_eq!(mobius_coefficient(&[1, 1], &[2, 1]), -1);
        assert_eq!(mobius_coefficient(&[1, 1], &[3, 1]), 0);
        assert_eq!(mobius_coefficient(&[2, 2], &[1, 2]), 0);
    }

    #[test]
    fn theta_examples() {
        let u = DenseTensor::filled(Shape::new(vec![2, 3, 2]).unwrap(), 1.0 / 12.0);
        let th = theta_from_tensor(&u).unwrap();
        assert_relative_eq!(th.root(), -(12f64).ln(), epsilon = 1e-14);
        assert!(th.values()[1..].iter().all(|v| v.abs() < 1e-14));

        let r1 = DenseTensor::from_dims(&[2, 2], vec![0.12, 0.18, 0.28, 0.42]).unwrap();
        let th = theta_from_tensor(&r1).unwrap();
        assert!(th.get(&[2, 2]).unwrap().abs() < 1e-14);

        let th = theta_from_tensor(&m22()).unwrap();
        let back = tensor_from_theta(&th, false).unwrap();
        assert_all_close(back.data(), m22().data(), 1e-12);

        assert!(theta_from_tensor(&DenseTensor::from_dims(&[2], vec![0.5, 0.6]).unwrap()).is_err());
        assert!(theta_from_tensor(&DenseTensor::from_dims(&[2], vec![0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn tensor_from_theta_examples() {
        let mut vals = vec![0.0; 8];
        vals[0] = -(8f64).ln();
        let th = ThetaCoords::from_tensor(DenseTensor::from_dims(&[2, 2, 2], vals).unwrap());
        assert_all_close(tensor_from_theta(&th, false).unwrap().data(), &[0.125; 8], 1e-15);

        let th1 = ThetaCoords::from_tensor(
            DenseTensor::from_dims(&[2], vec![0.6f64.ln(), (0.4f64 / 0.6).ln()]).unwrap(),
        );
        assert_all_close(tensor_from_theta(&th1, false).unwrap().data(), &[0.6, 0.4], 1e-15);

        // renormalize ignores the stored root
        let th2 = ThetaCoords::from_tensor(
            DenseTensor::from_dims(&[2], vec![42.0, (0.4f64 / 0.6).ln()]).unwrap(),
        );
        assert_all_close(tensor_from_theta(&th2, true).unwrap().data(), &[0.6, 0.4], 1e-15);

        let huge = ThetaCoords::from_tensor(DenseTensor::from_dims(&[2], vec![0.0, 1e3]).unwrap());
        assert!(tensor_from_theta(&huge, false).is_err());
    }

    #[test]
    fn normalizer_matches_root() {
        let th = theta_from_tensor(&m22()).unwrap();
        assert_relative_eq!(th.normalizer(), th.root(), epsilon = 1e-12);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[1, 1, 3, 1]), ParamClass::OneBody { mode: 3, index: 3 });
        assert_eq!(classify(&[1, 5, 1, 1]), ParamClass::OneBody { mode: 2, index: 5 });
        assert_eq!(classify(&[1, 1, 1, 1]), ParamClass::Root);
        assert_eq!(classify(&[2, 1, 3, 1]), ParamClass::ManyBody);
    }

    #[test]
    fn bingo_detection_examples() {
        let m = DenseTensor::from_dims(&[3, 2], vec![1., 2., 2., 4., 5., 1.]).unwrap();
        let expect: BTreeSet<usize> = [2].into();
        assert_eq!(detect_bingos(&m, 1, DEFAULT_BINGO_TOL).unwrap(), expect);
        assert_eq!(detect_bingos_theta(&m, 1, DEFAULT_BINGO_TOL).unwrap(), expect);

        let r1 = DenseTensor::outer_product(&[vec![0.2, 0.5, 0.3], vec![1., 2.], vec![3., 1., 2., 4.]])
            .unwrap();
        for k in 1..=3 {
            let all: BTreeSet<usize> = (2..=r1.dims()[k - 1]).collect();
            assert_eq!(detect_bingos(&r1, k, DEFAULT_BINGO_TOL).unwrap(), all);
            assert_eq!(detect_bingos_theta(&r1, k, DEFAULT_BINGO_TOL).unwrap(), all);
        }
        let z = DenseTensor::from_dims(&[2, 2], vec![0., 1., 1., 1.]).unwrap();
        assert!(detect_bingos(&z, 1, DEFAULT_BINGO_TOL).is_err());
    }

    #[test]
    fn rank1_mean_field_examples() {
        let th = rank1_theta_from_eta(&[vec![1.0, 0.5]]).unwrap();
        assert!(th[0][1].abs() < 1e-15);
        let th = rank1_theta_from_eta(&[vec![1.0, 0.4]]).unwrap();
        assert_relative_eq!(th[0][1], (0.4f64 / 0.6).ln(), epsilon = 1e-15);

        let eta = rank1_eta_from_theta(&[vec![0.0, 0.0, 0.0]]).unwrap();
        assert_all_close(&eta[0], &[1.0, 2.0 / 3.0, 1.0 / 3.0], 1e-15);
        let eta = rank1_eta_from_theta(&[vec![0.0, 2f64.ln()]]).unwrap();
        assert_all_close(&eta[0], &[1.0, 2.0 / 3.0], 1e-15);

        let eta = vec![vec![1.0, 0.7, 0.25, 0.1], vec![1.0, 0.55]];
        let back = rank1_eta_from_theta(&rank1_theta_from_eta(&eta).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&eta) {
            assert_all_close(a, b, 1e-12);
        }

        assert!(rank1_theta_from_eta(&[vec![1.0, 0.5, 0.6]]).is_err());
        assert!(rank1_theta_from_eta(&[vec![0.9, 0.5]]).is_err());
    }

    #[test]
    fn clamp_floor_behaviour() {
        let z = DenseTensor::from_dims(&[3], vec![0.0, 2.0, 1.0]).unwrap();
        let c = clamp_to_floor(&z, DEFAULT_CLAMP_EPSILON).unwrap();
        assert_eq!(c.data(), &[2e-12, 2.0, 1.0]);
        assert!(clamp_to_floor(&z, 0.0).is_err());
        let neg = DenseTensor::from_dims(&[2], vec![-1.0, 1.0]).unwrap();
        assert!(clamp_to_floor(&neg, 1e-12).is_err());
    }
}
