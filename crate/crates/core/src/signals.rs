//! Finite vector-valued signals, block-Hankel matrices and the persistency
//! of excitation order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numkit::{self, RankReport};

/// Samples `v(0), ..., v(T-1)` of dimension `dim`, stored time-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalRepr", into = "SignalRepr")]
pub struct Signal {
    dim: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SignalRepr {
    dim: usize,
    samples: Vec<Vec<f64>>,
}

impl TryFrom<SignalRepr> for Signal {
    type Error = Error;

    fn try_from(r: SignalRepr) -> Result<Self> {
        let s = Signal::from_samples(&r.samples)?;
        if s.dim != r.dim {
            return Err(Error::dims(format!("declared dim {} but samples have {}", r.dim, s.dim)));
        }
        Ok(s)
    }
}

impl From<Signal> for SignalRepr {
    fn from(s: Signal) -> Self {
        SignalRepr { dim: s.dim, samples: s.samples().map(<[f64]>::to_vec).collect() }
    }
}

impl Signal {
    /// `data` holds `v(0)` followed by `v(1)`, and so on.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("signal dimension must be positive"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form a non-empty sequence of {dim}-vectors",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("signal has a non-finite sample"));
        }
        Ok(Signal { dim, data })
    }

    pub fn from_samples<S: AsRef<[f64]>>(samples: &[S]) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.as_ref().len());
        if samples.iter().any(|s| s.as_ref().len() != dim) {
            return Err(Error::dims("samples of unequal size"));
        }
        Signal::new(dim, samples.iter().flat_map(|s| s.as_ref().iter().copied()).collect())
    }

    /// Scalar signal.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Signal::new(1, values.to_vec())
    }

    pub fn zeros(dim: usize, len: usize) -> Result<Self> {
        Signal::new(dim, vec![0.0; dim * len])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn sample_vector(&self, t: usize) -> DVector<f64> {
        DVector::from_row_slice(self.sample(t))
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    /// Samples `start .. start + len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return Err(Error::invalid(format!(
                "window [{start}, {}) outside a signal of length {}",
                start + len,
                self.len()
            )));
        }
        Signal::new(self.dim, self.data[start * self.dim..(start + len) * self.dim].to_vec())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Signal::new(self.dim, self.data.iter().map(|x| x * factor).collect())
    }

    /// Largest absolute sample entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub(crate) fn from_vectors(vs: &[DVector<f64>]) -> Result<Self> {
        let dim = vs.first().map_or(0, |v| v.len());
        Signal::new(dim, vs.iter().flat_map(|v| v.iter().copied()).collect())
    }
}

/// `[v(0); v(1); ...; v(T-1)]` as one column.
pub fn stack(v: &Signal) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// Depth-`k` block-Hankel matrix: block `(i, j)` is `v(i + j)`.
pub fn hankel(v: &Signal, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > v.len() {
        return Err(Error::invalid(format!("Hankel depth {k} outside [1, {}]", v.len())));
    }
    Ok(hankel_unchecked(v, k))
}

/// Like [`hankel`] but also accepts `k = T + 1`, which yields zero columns.
pub(crate) fn hankel_unchecked(v: &Signal, k: usize) -> DMatrix<f64> {
    let d = v.dim();
    let cols = (v.len() + 1).saturating_sub(k);
    DMatrix::from_fn(k * d, cols, |r, j| v.sample(j + r / d)[r % d])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    pub max_order: usize,
    /// `(k, report for the depth-k Hankel matrix)` for `k = 1 ..= floor((T+1)/(dim+1))`.
    pub per_order: Vec<(usize, RankReport)>,
}

impl PeReport {
    pub fn is_pe(&self, order: usize) -> bool {
        order <= self.max_order
    }
}

/// Largest order that can possibly be persistently exciting: depth `k`
/// needs `k * dim <= T - k + 1` columns.
pub fn max_checkable_order(dim: usize, len: usize) -> usize {
    (len + 1) / (dim + 1)
}

pub fn pe_order(v: &Signal, rtol: f64) -> Result<PeReport> {
    pe_order_with(v, rtol, Execution::default())
}

/// Persistency of excitation order. The first depth whose Hankel matrix is
/// row-rank deficient caps `max_order`, since excitation of order `k`
/// implies every lower order.
pub fn pe_order_with(v: &Signal, rtol: f64, exec: Execution) -> Result<PeReport> {
    numkit::check_positive(rtol, "rtol")?;
    let k_max = max_checkable_order(v.dim(), v.len());
    let per_order = exec::map_indexed(exec, k_max, |i| {
        let k = i + 1;
        numkit::rank_report(&hankel_unchecked(v, k), rtol).map(|r| (k, r))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_order = per_order.iter().take_while(|(_, r)| r.full_row_rank).count();
    Ok(PeReport { max_order, per_order })
}

pub fn is_pe(v: &Signal, k: usize, rtol: f64) -> Result<(bool, RankReport)> {
    let h = hankel(v, k)?;
    let report = numkit::rank_report(&h, rtol)?;
    Ok((report.full_row_rank, report))
}

/// Like [`is_pe`], but orders beyond the signal length are simply not
/// persistently exciting instead of an error.
pub fn is_pe_of_order(v: &Signal, k: usize, rtol: f64) -> Result<bool> {
    if k == 0 {
        return Err(Error::invalid("order must be positive"));
    }
    if k > v.len() {
        return Ok(false);
    }
    Ok(is_pe(v, k, rtol)?.0)
}
