//! Dense matrix kernel: SVD-based rank and kernel, polynomial roots through
//! companion-matrix eigenvalues, and the common-root set of a vector
//! polynomial.
//!
//! Rank policy used everywhere in the crate: a singular value counts toward
//! the rank when it is strictly greater than
//! `rtol * max(rows, cols) * sigma_max` (or `rtol` for the zero matrix).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_CLUSTER_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
    pub full_row_rank: bool,
    pub full_col_rank: bool,
}

impl RankReport {
    pub fn deficiency(&self) -> usize {
        self.rows.min(self.cols) - self.rank
    }
}

pub fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has a non-finite entry")))
    }
}

pub(crate) fn check_positive(value: f64, what: &str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive and finite, got {value}")))
    }
}

fn tolerance(rows: usize, cols: usize, sigma_max: f64, rtol: f64) -> f64 {
    if sigma_max > 0.0 {
        rtol * rows.max(cols) as f64 * sigma_max
    } else {
        rtol
    }
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Singular values paired with the full set of right singular vectors,
/// sorted by non-increasing singular value. Matrices with fewer rows than
/// columns are padded with zero rows, which leaves the row space intact and
/// supplies the zero singular values of the missing directions.
fn right_singular_pairs(m: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Vec::new();
    }
    if rows == 0 {
        return (0..cols).map(|j| (0.0, DVector::from_fn(cols, |i, _| if i == j { 1.0 } else { 0.0 }))).collect();
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut pairs: Vec<(f64, DVector<f64>)> =
        svd.singular_values.iter().enumerate().map(|(i, &s)| (s, v_t.row(i).transpose())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

pub fn rank_report(m: &DMatrix<f64>, rtol: f64) -> Result<RankReport> {
    rank_report_scaled(m, rtol, 0.0)
}

/// Like [`rank_report`], with the tolerance measured against
/// `max(sigma_max, scale)`. Blocks that vanish in exact arithmetic but carry
/// roundoff then count as zero instead of as full rank.
pub fn rank_report_scaled(m: &DMatrix<f64>, rtol: f64, scale: f64) -> Result<RankReport> {
    ensure_finite(m, "matrix")?;
    check_positive(rtol, "rtol")?;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid(format!("scale must be finite and non-negative, got {scale}")));
    }
    let (rows, cols) = m.shape();
    let singular_values = sorted_singular_values(m);
    let sigma_max = singular_values.first().copied().unwrap_or(0.0).max(scale);
    let tolerance_used = tolerance(rows, cols, sigma_max, rtol);
    let rank = singular_values.iter().filter(|&&s| s > tolerance_used).count();
    Ok(RankReport {
        rows,
        cols,
        rank,
        singular_values,
        tolerance_used,
        full_row_rank: rank == rows,
        full_col_rank: rank == cols,
    })
}

/// Orthonormal basis of the right kernel of `m`, one vector per column.
///
/// Columns are ordered by increasing singular value, so column 0 is the
/// best-annihilating direction.
pub fn kernel_basis(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    ensure_finite(m, "matrix")?;
    check_positive(rtol, "rtol")?;
    let (rows, cols) = m.shape();
    let pairs = right_singular_pairs(m);
    let sigma_max = pairs.first().map_or(0.0, |p| p.0);
    let tol = tolerance(rows, cols, sigma_max, rtol);
    let kernel: Vec<DVector<f64>> = pairs.into_iter().rev().take_while(|(s, _)| *s <= tol).map(|(_, v)| v).collect();
    if kernel.is_empty() {
        return Ok(DMatrix::zeros(cols, 0));
    }
    Ok(DMatrix::from_columns(&kernel))
}

/// Smallest singular value of `m` (zero when it has fewer rows than columns)
/// together with its unit right singular vector.
pub fn least_right_singular_vector(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    ensure_finite(m, "matrix")?;
    right_singular_pairs(m).pop().ok_or_else(|| Error::invalid("matrix has no columns"))
}

/// 2-norm condition number; infinite for singular or empty matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = sorted_singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 && sv.len() == m.nrows().min(m.ncols()) => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Least-squares solution of `a x = b` through the SVD pseudo-inverse.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> Result<DVector<f64>> {
    ensure_finite(a, "matrix")?;
    if a.nrows() != b.len() {
        return Err(Error::dims(format!("least squares with {} rows and rhs of length {}", a.nrows(), b.len())));
    }
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    if a.nrows() == 0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = tolerance(a.nrows(), a.ncols(), sigma_max, rtol);
    svd.solve(b, eps).map_err(|e| Error::invalid(e.to_string()))
}

/// Ranks of `x`, `y` and `[x y]` at one shared tolerance.
///
/// Columns are normalized to unit length first (zero columns dropped), so
/// the comparison depends on the spans only and not on the relative scale
/// of the two matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanComparison {
    pub rank_x: usize,
    pub rank_y: usize,
    pub rank_joint: usize,
}

impl SpanComparison {
    /// `span x = span y`.
    pub fn equal(&self) -> bool {
        self.rank_x == self.rank_joint && self.rank_y == self.rank_joint
    }

    /// `span x` is contained in `span y`.
    pub fn x_in_y(&self) -> bool {
        self.rank_y == self.rank_joint
    }
}

fn unit_columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter()
        .filter_map(|c| {
            let norm = c.norm();
            (norm > 0.0).then(|| c / norm)
        })
        .collect()
}

pub fn compare_spans(x: &DMatrix<f64>, y: &DMatrix<f64>, rtol: f64) -> Result<SpanComparison> {
    ensure_finite(x, "matrix")?;
    ensure_finite(y, "matrix")?;
    check_positive(rtol, "rtol")?;
    if x.nrows() != y.nrows() {
        return Err(Error::dims("span comparison needs equal row counts"));
    }
    let rows = x.nrows();
    let xs = unit_columns(x);
    let ys = unit_columns(y);
    let build = |cols: &[DVector<f64>]| {
        if cols.is_empty() {
            DMatrix::zeros(rows, 0)
        } else {
            DMatrix::from_columns(cols)
        }
    };
    let joint_cols: Vec<DVector<f64>> = xs.iter().chain(ys.iter()).cloned().collect();
    let joint = build(&joint_cols);
    let sv_joint = sorted_singular_values(&joint);
    let tol = tolerance(rows, joint.ncols(), sv_joint.first().copied().unwrap_or(0.0), rtol);
    let rank = |m: &DMatrix<f64>| sorted_singular_values(m).iter().filter(|&&s| s > tol).count();
    Ok(SpanComparison {
        rank_x: rank(&build(&xs)),
        rank_y: rank(&build(&ys)),
        rank_joint: sv_joint.iter().filter(|&&s| s > tol).count(),
    })
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::dims(format!("eigenvalues of a {}x{} matrix", a.nrows(), a.ncols())));
    }
    ensure_finite(a, "matrix")?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    Ok(a.complex_eigenvalues().iter().copied().collect())
}

/// Finite set of complex numbers, none closer to another than `cluster_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    #[serde(with = "complex_list")]
    roots: Vec<Complex64>,
    cluster_radius: f64,
}

impl RootSet {
    pub fn empty(cluster_radius: f64) -> Self {
        RootSet { roots: Vec::new(), cluster_radius }
    }

    /// Builds a root set, merging points closer than `cluster_radius`.
    pub fn from_points(points: impl IntoIterator<Item = Complex64>, cluster_radius: f64) -> Self {
        RootSet { roots: cluster(points.into_iter().collect(), cluster_radius), cluster_radius }
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn cluster_radius(&self) -> f64 {
        self.cluster_radius
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Distance from `z` to the nearest root; infinite for the empty set.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        self.roots.iter().map(|r| (r - z).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.distance_to(z) <= self.cluster_radius
    }
}

mod complex_list {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

/// Single-linkage clustering; each cluster is replaced by its centroid.
fn cluster(points: Vec<Complex64>, radius: f64) -> Vec<Complex64> {
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for p in points {
        match groups.iter_mut().find(|(c, _)| (*c - p).norm() <= radius) {
            Some((c, k)) => {
                *c = (*c * *k as f64 + p) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => groups.push((p, 1)),
        }
    }
    // centroids can drift into each other; merge until pairwise separated
    loop {
        let mut merged = false;
        'outer: for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                if (groups[i].0 - groups[j].0).norm() <= radius {
                    let (cj, kj) = groups.remove(j);
                    let (ci, ki) = groups[i];
                    groups[i] = ((ci * ki as f64 + cj * kj as f64) / (ki + kj) as f64, ki + kj);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    groups.into_iter().map(|(c, _)| c).collect()
}

/// Roots of `c[0] + c[1] z + ... + c[d] z^d`.
///
/// Trailing coefficients with `|c_i| <= rtol * max|c|` are dropped first.
/// Exact zero low-order coefficients are factored out as a root at 0.
pub fn polynomial_roots(coeffs: &[f64], rtol: f64, cluster_radius: f64) -> Result<RootSet> {
    check_positive(rtol, "rtol")?;
    check_positive(cluster_radius, "cluster_radius")?;
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("polynomial has a non-finite coefficient"));
    }
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(Error::ZeroPolynomial);
    }
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1].abs() <= rtol * scale {
        hi -= 1;
    }
    let trimmed = &coeffs[..hi];
    let zeros = trimmed.iter().take_while(|&&c| c == 0.0).count();
    let core = &trimmed[zeros..];
    let degree = core.len() - 1;

    let mut points = Vec::with_capacity(degree + 1);
    if zeros > 0 {
        points.push(Complex64::new(0.0, 0.0));
    }
    match degree {
        0 => {}
        1 => points.push(Complex64::new(-core[0] / core[1], 0.0)),
        _ => {
            let lead = core[degree];
            let companion = DMatrix::from_fn(degree, degree, |i, j| {
                if j == degree - 1 {
                    -core[i] / lead
                } else if i == j + 1 {
                    1.0
                } else {
                    0.0
                }
            });
            points.extend(companion.complex_eigenvalues().iter().copied());
        }
    }
    Ok(RootSet::from_points(points, cluster_radius))
}

/// `sum_i z^i eta[i]` for a vector polynomial with coefficient blocks `eta`.
pub fn eval_vector_polynomial(eta: &[DVector<f64>], z: Complex64) -> Vec<Complex64> {
    let m = eta.first().map_or(0, |e| e.len());
    let mut acc = vec![Complex64::new(0.0, 0.0); m];
    for block in eta.iter().rev() {
        for (a, &b) in acc.iter_mut().zip(block.iter()) {
            *a = *a * z + b;
        }
    }
    acc
}

/// Common roots of the vector polynomial `sum_i z^i eta[i]`.
///
/// Each coordinate is a scalar polynomial. A coordinate whose coefficients
/// are all at most `rtol * max|eta|` is treated as identically zero and
/// imposes no constraint; the result is the intersection (within
/// `cluster_radius`) of the root sets of the remaining coordinates.
pub fn lambda_set(eta: &[DVector<f64>], rtol: f64, cluster_radius: f64) -> Result<RootSet> {
    check_positive(rtol, "rtol")?;
    check_positive(cluster_radius, "cluster_radius")?;
    let m = eta.first().map_or(0, |e| e.len());
    if m == 0 || eta.iter().any(|e| e.len() != m) {
        return Err(Error::dims("eta blocks must be non-empty and of equal length"));
    }
    if eta.iter().flat_map(|e| e.iter()).any(|x| !x.is_finite()) {
        return Err(Error::invalid("eta has a non-finite entry"));
    }
    let scale = eta.iter().flat_map(|e| e.iter()).fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return Err(Error::invalid("eta must be nonzero"));
    }

    let mut sets = Vec::new();
    for j in 0..m {
        let coeffs: Vec<f64> = eta.iter().map(|e| e[j]).collect();
        if coeffs.iter().all(|c| c.abs() <= rtol * scale) {
            continue;
        }
        sets.push(polynomial_roots(&coeffs, rtol, cluster_radius)?);
    }
    sets.sort_by_key(RootSet::len);
    let (first, rest) = sets.split_first().expect("the largest coordinate is never trimmed");
    let common = first.roots().iter().copied().filter(|&z| rest.iter().all(|s| s.contains(z)));
    Ok(RootSet::from_points(common, cluster_radius))
}

/// Smallest distance between the spectrum of `a` and `set`.
pub fn spectral_gap(a: &DMatrix<f64>, set: &RootSet) -> Result<f64> {
    Ok(eigenvalues(a)?.into_iter().map(|z| set.distance_to(z)).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_has_full_rank() {
        let r = rank_report(&DMatrix::identity(2, 2), 1e-10).unwrap();
        assert_eq!(r.rank, 2);
        assert!(r.full_row_rank && r.full_col_rank);
        assert_eq!(r.singular_values, vec![1.0, 1.0]);
    }

    #[test]
    fn input_then_output_rows_have_full_rank_for_any_initial_state() {
        for (x1, x2) in [(0.0, 0.0), (3.0, -2.0), (1e3, 1e-3)] {
            let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, x1, x2, 1.0]);
            assert_eq!(rank_report(&m, DEFAULT_RTOL).unwrap().rank, 2);
        }
    }

    #[test]
    fn zero_matrix_uses_absolute_tolerance() {
        let r = rank_report(&DMatrix::zeros(3, 2), 1e-9).unwrap();
        assert_eq!(r.rank, 0);
        assert_eq!(r.tolerance_used, 1e-9);
        assert!(!r.full_row_rank);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(rank_report(&m, 1e-9), Err(Error::InvalidInput(_))));
        assert!(kernel_basis(&m, 1e-9).is_err());
        assert!(rank_report(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn kernel_of_rank_one_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let k = kernel_basis(&m, 1e-9).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!(close(k[(0, 0)], 0.0, 1e-15));
        assert!(close(k[(1, 0)].abs(), 1.0, 1e-15));
    }

    #[test]
    fn kernel_of_all_ones() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let k = kernel_basis(&m, 1e-9).unwrap();
        assert_eq!(k.ncols(), 2);
        for col in k.column_iter() {
            assert!(col.sum().abs() < 1e-12);
            assert!(close(col.norm(), 1.0, 1e-12));
        }
    }

    #[test]
    fn kernel_of_wide_and_empty_matrices() {
        let wide = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let k = kernel_basis(&wide, 1e-9).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!((&wide * &k).norm() < 1e-12);

        let no_rows = DMatrix::<f64>::zeros(0, 4);
        let k = kernel_basis(&no_rows, 1e-9).unwrap();
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k.transpose() * &k, DMatrix::identity(4, 4));
        let (s, v) = least_right_singular_vector(&no_rows).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(v.norm(), 1.0);
    }

    #[test]
    fn roots_of_quadratic() {
        let r = polynomial_roots(&[-1.0, 0.0, 1.0], 1e-9, 1e-6).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.contains(c(1.0)) && r.contains(c(-1.0)));
    }

    #[test]
    fn double_root_at_zero_collapses() {
        let r = polynomial_roots(&[0.0, 0.0, 1.0], 1e-9, 1e-6).unwrap();
        assert_eq!(r.roots(), &[c(0.0)]);
    }

    #[test]
    fn quartic_from_known_roots() {
        // (z+2)(z+1)(z-1)(z-3) = z^4 - z^3 - 7z^2 + z + 6
        let r = polynomial_roots(&[6.0, 1.0, -7.0, -1.0, 1.0], 1e-9, 1e-6).unwrap();
        assert_eq!(r.len(), 4);
        for root in [-2.0, -1.0, 1.0, 3.0] {
            assert!(r.distance_to(c(root)) < 1e-8, "root {root}");
        }
    }

    #[test]
    fn trailing_tiny_coefficients_trimmed() {
        let r = polynomial_roots(&[-2.0, 1.0, 1e-14], 1e-9, 1e-6).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.distance_to(c(2.0)) < 1e-12);
        assert!(polynomial_roots(&[5.0], 1e-9, 1e-6).unwrap().is_empty());
        assert_eq!(polynomial_roots(&[0.0, 0.0], 1e-9, 1e-6), Err(Error::ZeroPolynomial));
    }

    #[test]
    fn complex_roots() {
        let r = polynomial_roots(&[1.0, 0.0, 1.0], 1e-9, 1e-6).unwrap();
        assert!(r.distance_to(Complex64::new(0.0, 1.0)) < 1e-12);
        assert!(r.distance_to(Complex64::new(0.0, -1.0)) < 1e-12);
    }

    fn blocks(rows: &[&[f64]]) -> Vec<DVector<f64>> {
        rows.iter().map(|r| DVector::from_row_slice(r)).collect()
    }

    #[test]
    fn lambda_set_scalar() {
        let s = lambda_set(&blocks(&[&[-1.0], &[0.0], &[1.0]]), 1e-9, 1e-6).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains(c(1.0)) && s.contains(c(-1.0)));
    }

    #[test]
    fn lambda_set_without_common_root() {
        let s = lambda_set(&blocks(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]), 1e-9, 1e-6).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn lambda_set_common_root() {
        // coordinate 0: z^2 - 1, coordinate 1: z^2 - 3z + 2
        let s = lambda_set(&blocks(&[&[-1.0, 2.0], &[0.0, -3.0], &[1.0, 1.0]]), 1e-9, 1e-6).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.distance_to(c(1.0)) < 1e-9);
    }

    #[test]
    fn lambda_set_ignores_zero_coordinates() {
        let s = lambda_set(&blocks(&[&[-1.0, 0.0], &[0.0, 1e-15], &[1.0, 0.0]]), 1e-9, 1e-6).unwrap();
        assert_eq!(s.len(), 2);
        assert!(lambda_set(&blocks(&[&[0.0], &[0.0]]), 1e-9, 1e-6).is_err());
    }

    #[test]
    fn spectral_gap_of_jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let set = RootSet::from_points([c(1.0), c(-1.0)], 1e-6);
        assert!(close(spectral_gap(&a, &set).unwrap(), 1.0, 1e-6));
        assert_eq!(spectral_gap(&a, &RootSet::empty(1e-6)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn span_comparison_ignores_column_scale() {
        let x = DMatrix::from_row_slice(3, 2, &[1e6, 0.0, 0.0, 1e-6, 0.0, 0.0]);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 0.0]);
        let cmp = compare_spans(&x, &y, DEFAULT_RTOL).unwrap();
        assert!(cmp.equal());
        let z = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let cmp = compare_spans(&x, &z, DEFAULT_RTOL).unwrap();
        assert_eq!((cmp.rank_x, cmp.rank_y, cmp.rank_joint), (2, 1, 3));
        assert!(!cmp.x_in_y() && !cmp.equal());
        let empty = DMatrix::zeros(3, 1);
        assert!(compare_spans(&empty, &z, DEFAULT_RTOL).unwrap().x_in_y());
    }

    #[test]
    fn condition_numbers() {
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[4.0, 0.5]));
        assert!(close(condition_number(&d), 8.0, 1e-12));
        assert_eq!(condition_number(&DMatrix::zeros(2, 2)), f64::INFINITY);
    }
}
