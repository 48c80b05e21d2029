//! Dense row-major tensors and the multilinear primitives used by every
//! other module.
//!
//! Tensor indices and mode numbers are 1-based at the API surface
//! (`mode` ranges over `1..=d`, an index on mode `k` over `1..=I_k`).
//! Storage is a flat `Vec<f64>` with the last index varying fastest.
//! [`Matrix`] is a plain 0-based row-major buffer.

use std::fmt;

use crate::error::{Error, Result};

/// Largest tensor order accepted anywhere in the crate.
pub const MAX_ORDER: usize = 8;

/// Extents `(I_1, …, I_d)` with precomputed row-major strides.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
        }
        if dims.len() > MAX_ORDER {
            return Err(Error::OrderTooLarge(dims.len()));
        }
        if let Some(k) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidShape(format!("mode {} has extent 0", k + 1)));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidShape(format!("{dims:?} overflows usize")))?;
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(Self { dims, strides, len })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of elements, `∏ I_k`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Extent of the 1-based `mode`.
    pub fn extent(&self, mode: usize) -> Result<usize> {
        Ok(self.dims[self.axis(mode)?])
    }

    /// Converts a 1-based mode into a 0-based axis.
    pub(crate) fn axis(&self, mode: usize) -> Result<usize> {
        if mode == 0 || mode > self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(mode - 1)
    }

    /// Flat offset of a 1-based multi-index.
    pub fn offset(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.order() {
            return Err(Error::InvalidArgument(format!(
                "index {idx:?} has {} components, tensor order is {}",
                idx.len(),
                self.order()
            )));
        }
        let mut off = 0;
        for (k, (&i, &n)) in idx.iter().zip(&self.dims).enumerate() {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange {
                    mode: k + 1,
                    index: i,
                    extent: n,
                });
            }
            off += (i - 1) * self.strides[k];
        }
        Ok(off)
    }

    /// 0-based coordinate on `axis` of the element stored at `offset`.
    #[inline]
    pub(crate) fn coord(&self, offset: usize, axis: usize) -> usize {
        (offset / self.strides[axis]) % self.dims[axis]
    }

    /// 1-based multi-index of the element stored at `offset`.
    pub fn unravel(&self, offset: usize) -> MultiIndex {
        MultiIndex(
            (0..self.order())
                .map(|k| self.coord(offset, k) + 1)
                .collect(),
        )
    }

    /// All 1-based multi-indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len).map(move |off| self.unravel(off))
    }

    /// `(outer, extent, inner)` such that the element with coordinate `i` on
    /// `axis` sits at `(o * extent + i) * inner + n`.
    #[inline]
    pub(crate) fn slab(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.dims[..axis].iter().product();
        (outer, self.dims[axis], self.strides[axis])
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// A 1-based position `(i_1, …, i_d)` in the index grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(idx: impl Into<Vec<usize>>) -> Self {
        Self(idx.into())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// `(1, …, 1)` of the given order.
    pub fn root(order: usize) -> Self {
        Self(vec![1; order])
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// The slab `lo..=hi` of a 1-based `mode`, all other indices free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ModeBlock {
    pub mode: usize,
    pub lo: usize,
    pub hi: usize,
}

impl ModeBlock {
    pub fn new(mode: usize, lo: usize, hi: usize) -> Self {
        Self { mode, lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }

    /// Checks the bounds against `shape` and returns the 0-based axis.
    pub(crate) fn validate(&self, shape: &Shape) -> Result<usize> {
        let axis = shape.axis(self.mode)?;
        let n = shape.dims()[axis];
        if self.lo == 0 || self.lo > self.hi || self.hi > n {
            return Err(Error::InvalidArgument(format!(
                "block {}..={} invalid on mode {} of extent {n}",
                self.lo, self.hi, self.mode
            )));
        }
        Ok(axis)
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: vec![self.cols],
                actual: vec![other.rows],
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Column sums.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (acc, &v) in s.iter_mut().zip(self.row(r)) {
                *acc += v;
            }
        }
        s
    }
}

/// A dense `f64` tensor in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps `data`; every element must be finite.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { offset });
        }
        Ok(Self { shape, data })
    }

    pub fn from_dims(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::new(Shape::new(dims)?, data)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let data = vec![value; shape.len()];
        Self { shape, data }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&MultiIndex) -> f64) -> Result<Self> {
        let data = shape.indices().map(|idx| f(&idx)).collect();
        Self::new(shape, data)
    }

    /// Internal constructor for data already known to match the shape.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Element at a 1-based multi-index.
    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.offset(idx)?])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> DenseTensor {
        self.map(|v| v * c)
    }

    /// Sum of all elements, accumulated in storage order.
    pub fn total_sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_strictly_positive(&self) -> Result<()> {
        match self.data.iter().position(|&v| v <= 0.0) {
            Some(offset) => Err(Error::NonPositive {
                offset,
                value: self.data[offset],
            }),
            None => Ok(()),
        }
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.data.iter().position(|&v| v < 0.0) {
            Some(offset) => Err(Error::Negative {
                offset,
                value: self.data[offset],
            }),
            None => Ok(()),
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.data.iter().all(|&v| v > 0.0)
    }

    /// Copy scaled to unit total mass.
    pub fn normalized(&self) -> Result<DenseTensor> {
        let s = self.total_sum();
        if s <= 0.0 {
            return Err(Error::ZeroSum);
        }
        Ok(self.scaled(1.0 / s))
    }

    /// Mode-`k` expansion `P^(k)`, an `I_k × ∏_{m≠k} I_m` matrix.
    ///
    /// Column `j` (1-based) holds `P_{i_1…i_d}` with
    /// `j = 1 + Σ_{l≠k} (i_l − 1) J_l`, `J_l = ∏_{m<l, m≠k} I_m`, so the
    /// lowest remaining mode varies fastest along a row.
    pub fn mode_k_expansion(&self, k: usize) -> Result<Matrix> {
        let axis = self.shape.axis(k)?;
        let dims = self.dims();
        let rows = dims[axis];
        let cols = self.len() / rows;
        let weights = expansion_weights(dims, axis);
        let mut out = Matrix::zeros(rows, cols);
        for (off, &v) in self.data.iter().enumerate() {
            let (r, c) = self.expansion_position(off, axis, &weights);
            out.set(r, c, v);
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::mode_k_expansion`].
    pub fn from_mode_k_expansion(m: &Matrix, shape: Shape, k: usize) -> Result<DenseTensor> {
        let axis = shape.axis(k)?;
        let rows = shape.dims()[axis];
        if m.rows() != rows || m.rows() * m.cols() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![rows, shape.len() / rows],
                actual: vec![m.rows(), m.cols()],
            });
        }
        let weights = expansion_weights(shape.dims(), axis);
        let mut t = DenseTensor::filled(shape, 0.0);
        for off in 0..t.len() {
            let (r, c) = t.expansion_position(off, axis, &weights);
            t.data[off] = m.get(r, c);
        }
        Ok(t)
    }

    fn expansion_position(&self, off: usize, axis: usize, weights: &[usize]) -> (usize, usize) {
        let mut col = 0;
        for (l, &w) in weights.iter().enumerate() {
            if l != axis {
                col += self.shape.coord(off, l) * w;
            }
        }
        (self.shape.coord(off, axis), col)
    }

    /// `s^(1) ⊗ … ⊗ s^(d)`.
    pub fn outer_product(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("outer product of no vectors".into()));
        }
        let shape = Shape::new(vectors.iter().map(Vec::len).collect::<Vec<_>>())?;
        let mut data = vec![1.0];
        for v in vectors {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for &a in &data {
                next.extend(v.iter().map(|&b| a * b));
            }
            data = next;
        }
        DenseTensor::new(shape, data)
    }

    /// Sum of every element whose index on mode `k` equals `i`.
    pub fn axis_sum(&self, k: usize, i: usize) -> Result<f64> {
        let sums = self.axis_sums(k)?;
        if i == 0 || i > sums.len() {
            return Err(Error::IndexOutOfRange {
                mode: k,
                index: i,
                extent: sums.len(),
            });
        }
        Ok(sums[i - 1])
    }

    /// All axis sums of mode `k`, entry `i − 1` for slice `i`.
    pub fn axis_sums(&self, k: usize) -> Result<Vec<f64>> {
        let axis = self.shape.axis(k)?;
        Ok(axis_sums_0(&self.shape, &self.data, axis))
    }

    /// Copy of the sub-tensor `P_{lo:hi}` on the block's mode.
    pub fn extract_block(&self, b: &ModeBlock) -> Result<DenseTensor> {
        let axis = b.validate(&self.shape)?;
        let mut dims = self.dims().to_vec();
        dims[axis] = b.len();
        let sub_shape = Shape::new(dims)?;
        let (outer, extent, inner) = self.shape.slab(axis);
        let mut data = Vec::with_capacity(sub_shape.len());
        for o in 0..outer {
            let start = (o * extent + b.lo - 1) * inner;
            data.extend_from_slice(&self.data[start..start + b.len() * inner]);
        }
        Ok(DenseTensor::from_parts(sub_shape, data))
    }

    /// Copy with the block region overwritten by `sub`.
    pub fn replace_block(&self, b: &ModeBlock, sub: &DenseTensor) -> Result<DenseTensor> {
        let mut out = self.clone();
        out.replace_block_in_place(b, sub)?;
        Ok(out)
    }

    pub(crate) fn replace_block_in_place(&mut self, b: &ModeBlock, sub: &DenseTensor) -> Result<()> {
        let axis = b.validate(&self.shape)?;
        let mut dims = self.dims().to_vec();
        dims[axis] = b.len();
        if sub.dims() != dims.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: dims,
                actual: sub.dims().to_vec(),
            });
        }
        let (outer, extent, inner) = self.shape.slab(axis);
        let chunk = b.len() * inner;
        for o in 0..outer {
            let start = (o * extent + b.lo - 1) * inner;
            self.data[start..start + chunk].copy_from_slice(&sub.data[o * chunk..(o + 1) * chunk]);
        }
        Ok(())
    }

    /// Mode-`k` product `P ×_k M` for `M` of shape `J × I_k`.
    pub fn mode_product(&self, m: &Matrix, k: usize) -> Result<DenseTensor> {
        let axis = self.shape.axis(k)?;
        let (outer, extent, inner) = self.shape.slab(axis);
        if m.cols() != extent {
            return Err(Error::ShapeMismatch {
                expected: vec![m.rows(), extent],
                actual: vec![m.rows(), m.cols()],
            });
        }
        let mut dims = self.dims().to_vec();
        dims[axis] = m.rows();
        let shape = Shape::new(dims)?;
        let rows = m.rows();
        let mut data = vec![0.0; shape.len()];
        for o in 0..outer {
            let src = &self.data[o * extent * inner..(o + 1) * extent * inner];
            let dst = &mut data[o * rows * inner..(o + 1) * rows * inner];
            for r in 0..rows {
                let out_row = &mut dst[r * inner..(r + 1) * inner];
                for i in 0..extent {
                    let a = m.get(r, i);
                    if a == 0.0 {
                        continue;
                    }
                    for (d, &s) in out_row.iter_mut().zip(&src[i * inner..(i + 1) * inner]) {
                        *d += a * s;
                    }
                }
            }
        }
        Ok(DenseTensor::from_parts(shape, data))
    }

    /// `C[a, b] = Σ P[…, a, …] Q[…, b, …]` summed over every mode except `k`.
    ///
    /// Both tensors must agree on all modes other than `k`.
    pub fn contract_except(&self, other: &DenseTensor, k: usize) -> Result<Matrix> {
        let axis = self.shape.axis(k)?;
        let mismatch = self.order() != other.order()
            || self
                .dims()
                .iter()
                .zip(other.dims())
                .enumerate()
                .any(|(l, (a, b))| l != axis && a != b);
        if mismatch {
            return Err(Error::ShapeMismatch {
                expected: self.dims().to_vec(),
                actual: other.dims().to_vec(),
            });
        }
        let (outer, ea, inner) = self.shape.slab(axis);
        let eb = other.dims()[axis];
        let mut out = Matrix::zeros(ea, eb);
        for o in 0..outer {
            let pa = &self.data[o * ea * inner..(o + 1) * ea * inner];
            let pb = &other.data[o * eb * inner..(o + 1) * eb * inner];
            for a in 0..ea {
                let ra = &pa[a * inner..(a + 1) * inner];
                for b in 0..eb {
                    let rb = &pb[b * inner..(b + 1) * inner];
                    let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                    out.data[a * eb + b] += dot;
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// `J_l = ∏_{m<l, m≠axis} I_m` for every `l` (entry at `axis` unused).
fn expansion_weights(dims: &[usize], axis: usize) -> Vec<usize> {
    let mut w = vec![0; dims.len()];
    let mut acc = 1;
    for (l, &n) in dims.iter().enumerate() {
        if l == axis {
            continue;
        }
        w[l] = acc;
        acc *= n;
    }
    w
}

pub(crate) fn axis_sums_0(shape: &Shape, data: &[f64], axis: usize) -> Vec<f64> {
    let (outer, extent, inner) = shape.slab(axis);
    let mut sums = vec![0.0; extent];
    for o in 0..outer {
        for (i, s) in sums.iter_mut().enumerate() {
            let start = (o * extent + i) * inner;
            *s += data[start..start + inner].iter().sum::<f64>();
        }
    }
    sums
}
