//! Non-negative Tucker decomposition by multiplicative updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ltr::TuckerRank;
use crate::synth::rng;
use crate::tensor::{DenseTensor, Matrix};

/// Guards divisions in the update ratios.
const DENOM_FLOOR: f64 = 1e-300;

/// Core `G` of shape `(r_1, …, r_d)` and factors `A^(k)` of shape `I_k × r_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerModel {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerModel {
    fn check(&self) -> Result<()> {
        let ok = self.factors.len() == self.core.order()
            && self
                .factors
                .iter()
                .zip(self.core.dims())
                .all(|(a, &r)| a.cols() == r);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.core.dims().to_vec(),
                actual: self.factors.iter().map(Matrix::cols).collect(),
            })
        }
    }

    pub fn output_dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }
}

/// `G ×_1 A^(1) ×_2 … ×_d A^(d)`.
pub fn tucker_reconstruct(m: &TuckerModel) -> Result<DenseTensor> {
    m.check()?;
    m.factors
        .iter()
        .enumerate()
        .try_fold(m.core.clone(), |acc, (k, a)| acc.mode_product(a, k + 1))
}

/// Core multiplied by every factor except mode `skip` (1-based).
fn partial_reconstruct(m: &TuckerModel, skip: usize) -> Result<DenseTensor> {
    m.factors
        .iter()
        .enumerate()
        .filter(|(k, _)| k + 1 != skip)
        .try_fold(m.core.clone(), |acc, (k, a)| acc.mode_product(a, k + 1))
}

/// `X ×_1 A^(1)ᵀ … ×_d A^(d)ᵀ`.
fn project_all(x: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    factors
        .iter()
        .enumerate()
        .try_fold(x.clone(), |acc, (k, a)| acc.mode_product(&a.transpose(), k + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NtdObjective {
    /// `½ ‖X − X̂‖²`.
    LeastSquares,
    /// Generalized KL divergence from `X` to `X̂`.
    KullbackLeibler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NtdConfig {
    pub objective: NtdObjective,
    pub max_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl NtdConfig {
    pub fn new(objective: NtdObjective, seed: u64) -> Self {
        Self {
            objective,
            max_iters: 200,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NtdFit {
    pub model: TuckerModel,
    pub reconstruction: DenseTensor,
    /// Objective after initialization, then after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

pub fn objective_value(obj: NtdObjective, x: &DenseTensor, xh: &DenseTensor) -> f64 {
    let pairs = x.data().iter().zip(xh.data());
    match obj {
        NtdObjective::LeastSquares => 0.5 * pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        NtdObjective::KullbackLeibler => pairs
            .map(|(&a, &b)| {
                if a > 0.0 {
                    a * (a / b.max(DENOM_FLOOR)).ln() - a + b
                } else {
                    b
                }
            })
            .sum(),
    }
}

fn random_matrix(rows: usize, cols: usize, r: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random::<f64>())
}

/// Fits a non-negative Tucker model of rank `target` to `t`.
pub fn ntd_fit(t: &DenseTensor, target: &TuckerRank, cfg: &NtdConfig) -> Result<NtdFit> {
    t.check_nonnegative()?;
    target.validate(t.shape())?;
    if cfg.max_iters == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let mut r = rng(cfg.seed);
    let factors: Vec<Matrix> = t
        .dims()
        .iter()
        .zip(target.ranks())
        .map(|(&n, &k)| random_matrix(n, k, &mut r))
        .collect();
    let core_data = (0..target.ranks().iter().product::<usize>())
        .map(|_| r.random::<f64>())
        .collect();
    let mut model = TuckerModel {
        core: DenseTensor::from_dims(target.ranks(), core_data)?,
        factors,
    };

    let mut xh = tucker_reconstruct(&model)?;
    let mut trace = vec![objective_value(cfg.objective, t, &xh)];
    let mut iterations = 0;
    for it in 1..=cfg.max_iters {
        match cfg.objective {
            NtdObjective::LeastSquares => ls_sweep(t, &mut model)?,
            NtdObjective::KullbackLeibler => kl_sweep(t, &mut model)?,
        }
        xh = tucker_reconstruct(&model)?;
        let f = objective_value(cfg.objective, t, &xh);
        if !f.is_finite() {
            return Err(Error::Diverged(it));
        }
        let prev = *trace.last().expect("non-empty");
        trace.push(f);
        iterations = it;
        if (prev - f).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(NtdFit {
        model,
        reconstruction: xh,
        trace,
        iterations,
    })
}

fn multiply_ratio(target: &mut [f64], num: &[f64], den: &[f64]) {
    for ((a, n), d) in target.iter_mut().zip(num).zip(den) {
        *a *= n / d.max(DENOM_FLOOR);
    }
}

/// `A ← A ⊙ (X_(k) Bᵀ) / (A B Bᵀ)` per mode, then the analogous core step.
fn ls_sweep(x: &DenseTensor, m: &mut TuckerModel) -> Result<()> {
    for k in 1..=x.order() {
        let w = partial_reconstruct(m, k)?;
        let num = x.contract_except(&w, k)?;
        let gram = w.contract_except(&w, k)?;
        let a = &mut m.factors[k - 1];
        let den = a.matmul(&gram)?;
        multiply_ratio(a.data_mut(), num.data(), den.data());
    }
    let num = project_all(x, &m.factors)?;
    let den = m
        .factors
        .iter()
        .enumerate()
        .try_fold(m.core.clone(), |acc, (k, a)| {
            acc.mode_product(&a.transpose().matmul(a)?, k + 1)
        })?;
    let mut core = m.core.clone().into_data();
    multiply_ratio(&mut core, num.data(), den.data());
    m.core = DenseTensor::new(m.core.shape().clone(), core)?;
    Ok(())
}

fn ratio_tensor(x: &DenseTensor, xh: &DenseTensor) -> Result<DenseTensor> {
    let data = x
        .data()
        .iter()
        .zip(xh.data())
        .map(|(&a, &b)| if a > 0.0 { a / b.max(DENOM_FLOOR) } else { 0.0 })
        .collect();
    DenseTensor::new(x.shape().clone(), data)
}

/// `A ← A ⊙ ((X/X̂)_(k) Bᵀ) / (1 Bᵀ)` per mode, then the analogous core step.
fn kl_sweep(x: &DenseTensor, m: &mut TuckerModel) -> Result<()> {
    for k in 1..=x.order() {
        let w = partial_reconstruct(m, k)?;
        let xh = w.mode_product(&m.factors[k - 1], k)?;
        let num = ratio_tensor(x, &xh)?.contract_except(&w, k)?;
        let col = w.axis_sums(k)?;
        let a = &mut m.factors[k - 1];
        let (rows, cols) = (a.rows(), a.cols());
        let den: Vec<f64> = (0..rows * cols).map(|i| col[i % cols]).collect();
        multiply_ratio(a.data_mut(), num.data(), &den);
    }
    let xh = tucker_reconstruct(m)?;
    let num = project_all(&ratio_tensor(x, &xh)?, &m.factors)?;
    let den = DenseTensor::outer_product(
        &m.factors.iter().map(Matrix::col_sums).collect::<Vec<_>>(),
    )?;
    let mut core = m.core.clone().into_data();
    multiply_ratio(&mut core, num.data(), den.data());
    m.core = DenseTensor::new(m.core.shape().clone(), core)?;
    Ok(())
}
