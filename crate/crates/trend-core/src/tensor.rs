//! Dense third-order tensors with an optional missing-value mask.
//!
//! Values are stored with the first mode fastest (index `i + I*j + I*J*k`),
//! and the mode-n unfoldings follow the matching convention: the mode-1
//! unfolding of a rank-R model equals `A * khatri_rao(C, B)^T`, and the
//! analogous identities hold in modes 2 and 3. The identities are the
//! binding contract; the layout itself is an implementation detail.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dense `I x J x K` tensor over `f64`.
///
/// When a mask is present, `true` marks an observed entry; unobserved
/// positions hold `0.0` as an inert sentinel that arithmetic never reads.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl Tensor3 {
    /// Builds a fully observed tensor from values in canonical layout.
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let (i, j, k) = dims;
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::InvalidArg("tensor dims must be >= 1".into()));
        }
        if values.len() != i * j * k {
            return Err(Error::DimMismatch(format!(
                "tensor expects {} values, got {}",
                i * j * k,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tensor values must be finite".into()));
        }
        Ok(Self { dims, values, mask: None })
    }

    /// Builds a masked tensor; values at unobserved positions are reset to 0.
    pub fn with_mask(
        dims: (usize, usize, usize),
        mut values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let (i, j, k) = dims;
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::InvalidArg("tensor dims must be >= 1".into()));
        }
        if values.len() != i * j * k || mask.len() != i * j * k {
            return Err(Error::DimMismatch(
                "tensor values/mask length must equal I*J*K".into(),
            ));
        }
        for (v, &obs) in values.iter_mut().zip(&mask) {
            if obs {
                if !v.is_finite() {
                    return Err(Error::NonFinite(
                        "observed tensor values must be finite".into(),
                    ));
                }
            } else {
                *v = 0.0;
            }
        }
        if mask.iter().all(|&m| m) {
            Ok(Self { dims, values, mask: None })
        } else {
            Ok(Self { dims, values, mask: Some(mask) })
        }
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Result<Self> {
        Self::new(dims, vec![0.0; dims.0 * dims.1 * dims.2])
    }

    /// Builds a tensor by evaluating `f(i, j, k)`.
    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let (i_dim, j_dim, k_dim) = dims;
        let mut values = vec![0.0; i_dim * j_dim * k_dim];
        for k in 0..k_dim {
            for j in 0..j_dim {
                for i in 0..i_dim {
                    values[i + i_dim * (j + j_dim * k)] = f(i, j, k);
                }
            }
        }
        Self::new(dims, values)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_mask(&self) -> bool {
        self.mask.is_some()
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    fn check_index(&self, i: usize, j: usize, k: usize) -> Result<()> {
        let (di, dj, dk) = self.dims;
        if i >= di || j >= dj || k >= dk {
            return Err(Error::InvalidArg(format!(
                "index ({i}, {j}, {k}) out of range for dims {:?}",
                self.dims
            )));
        }
        Ok(())
    }

    /// Value at `(i, j, k)`; out-of-range indices are an error, never a wrap.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_index(i, j, k)?;
        Ok(self.values[self.idx(i, j, k)])
    }

    /// True when `(i, j, k)` is observed (always true without a mask).
    pub fn is_observed(&self, i: usize, j: usize, k: usize) -> Result<bool> {
        self.check_index(i, j, k)?;
        Ok(self.mask.as_ref().map_or(true, |m| m[self.idx(i, j, k)]))
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) -> Result<()> {
        self.check_index(i, j, k)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("set: value must be finite".into()));
        }
        let idx = self.idx(i, j, k);
        self.values[idx] = v;
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn observed_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.values.len(), |m| m.iter().filter(|&&b| b).count())
    }

    /// Frobenius norm over observed entries.
    pub fn frobenius(&self) -> f64 {
        match &self.mask {
            None => self.values.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Some(m) => self
                .values
                .iter()
                .zip(m)
                .filter(|(_, &obs)| obs)
                .map(|(v, _)| v * v)
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Mean of observed entries (0 when nothing is observed).
    pub fn observed_mean(&self) -> f64 {
        let n = self.observed_count();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = match &self.mask {
            None => self.values.iter().sum(),
            Some(m) => self.values.iter().zip(m).filter(|(_, &o)| o).map(|(v, _)| v).sum(),
        };
        sum / n as f64
    }

    /// Mode-n unfolding (`mode` in 1..=3).
    ///
    /// Mode 1 is `I x (J*K)` with column `j + J*k`; mode 2 is `J x (I*K)`
    /// with column `i + I*k`; mode 3 is `K x (I*J)` with column `i + I*j`.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        let (i_dim, j_dim, k_dim) = self.dims;
        match mode {
            1 => Ok(Matrix::from_fn(i_dim, j_dim * k_dim, |i, c| {
                self.values[self.idx(i, c % j_dim, c / j_dim)]
            })),
            2 => Ok(Matrix::from_fn(j_dim, i_dim * k_dim, |j, c| {
                self.values[self.idx(c % i_dim, j, c / i_dim)]
            })),
            3 => Ok(Matrix::from_fn(k_dim, i_dim * j_dim, |k, c| {
                self.values[self.idx(c % i_dim, c / i_dim, k)]
            })),
            m => Err(Error::InvalidArg(format!("unfold: invalid mode {m}"))),
        }
    }

    /// Mask in the same layout as [`Tensor3::unfold`], if a mask is present.
    pub fn unfold_mask(&self, mode: usize) -> Result<Option<Vec<Vec<bool>>>> {
        let Some(mask) = &self.mask else {
            if !(1..=3).contains(&mode) {
                return Err(Error::InvalidArg(format!("unfold_mask: invalid mode {mode}")));
            }
            return Ok(None);
        };
        let (i_dim, j_dim, k_dim) = self.dims;
        let rows = match mode {
            1 => (0..i_dim)
                .map(|i| {
                    (0..j_dim * k_dim)
                        .map(|c| mask[self.idx(i, c % j_dim, c / j_dim)])
                        .collect()
                })
                .collect(),
            2 => (0..j_dim)
                .map(|j| {
                    (0..i_dim * k_dim)
                        .map(|c| mask[self.idx(c % i_dim, j, c / i_dim)])
                        .collect()
                })
                .collect(),
            3 => (0..k_dim)
                .map(|k| {
                    (0..i_dim * j_dim)
                        .map(|c| mask[self.idx(c % i_dim, c / i_dim, k)])
                        .collect()
                })
                .collect(),
            m => return Err(Error::InvalidArg(format!("unfold_mask: invalid mode {m}"))),
        };
        Ok(Some(rows))
    }

    /// Inverse of [`Tensor3::unfold`] for the same mode and dims.
    pub fn fold(m: &Matrix, mode: usize, dims: (usize, usize, usize)) -> Result<Self> {
        let (i_dim, j_dim, k_dim) = dims;
        let expect = match mode {
            1 => (i_dim, j_dim * k_dim),
            2 => (j_dim, i_dim * k_dim),
            3 => (k_dim, i_dim * j_dim),
            m => return Err(Error::InvalidArg(format!("fold: invalid mode {m}"))),
        };
        if (m.nrows(), m.ncols()) != expect {
            return Err(Error::DimMismatch(format!(
                "fold: matrix is {}x{}, mode {} of {:?} requires {}x{}",
                m.nrows(),
                m.ncols(),
                mode,
                dims,
                expect.0,
                expect.1
            )));
        }
        Self::from_fn(dims, |i, j, k| match mode {
            1 => m[(i, j + j_dim * k)],
            2 => m[(j, i + i_dim * k)],
            _ => m[(k, i + i_dim * j)],
        })
    }

    /// Entrywise difference `self - other` over observed entries.
    ///
    /// The result carries `self`'s mask; dims must match.
    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!(
                "sub: dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let mut values = vec![0.0; self.values.len()];
        match &self.mask {
            None => {
                for (out, (a, b)) in values.iter_mut().zip(self.values.iter().zip(&other.values)) {
                    *out = a - b;
                }
            }
            Some(m) => {
                for idx in 0..values.len() {
                    if m[idx] {
                        values[idx] = self.values[idx] - other.values[idx];
                    }
                }
            }
        }
        Ok(Tensor3 { dims: self.dims, values, mask: self.mask.clone() })
    }
}
