//! Counterexample construction for inputs that are not persistently
//! exciting.
//!
//! Given `u` with a nonzero `eta` in the left kernel of `H_{n+L}(u)`, we pick
//! a cyclic `A` whose spectrum avoids the common roots of
//! `sum_i z^i eta_i` and a `zeta` with `(A, zeta)` controllable, run
//!
//! ```text
//! E_{n+L-1} = 0,    E_{i-1} = A E_i + zeta eta_i^T,    B = E_{-1},
//! x(0) = -sum_{i=0}^{n+L-2} E_i u(i),
//! ```
//!
//! and take `xi` with `xi^T A^i zeta = 0` for `i < n - 1`. Then
//! `[v; w] = [E_0^T xi; ...; E_{L-1}^T xi; xi]` annihilates
//! `[H_L(u); H_1(x_[0,T-L])]`, so the input-state data of the controllable
//! pair `(A, B)` is rank deficient. Appending the output row `w^T` turns this
//! into a system whose input-output data misses part of its behavior.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lemma::{self, LemmaCheck};
use crate::lti::{self, StateSpaceSystem};
use crate::numkit::{self, RankReport, RootSet, DEFAULT_CLUSTER_RADIUS, DEFAULT_RTOL};
use crate::rowmajor;
use crate::signals::{self, Signal};

pub const DEFAULT_TOL_CERT: f64 = 1e-7;

/// Jordan eigenvalue candidates tried before giving up.
const MAX_EIGENVALUE_CANDIDATES: usize = 32;
/// Minimum distance between the Jordan eigenvalue and the root set.
const EIGENVALUE_EXCLUSION: f64 = 0.1;
/// `sum_i A^i eta_i` beyond this condition number is refused.
const MAX_POLY_CONDITION: f64 = 1e10;
/// Krylov matrices beyond this condition number use the kernel route for `xi`.
const MAX_KRYLOV_CONDITION: f64 = 1e12;

/// Replacements for the quantities the construction would otherwise choose.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// `eta_0, ..., eta_{n+L-1}`; projected onto the numerical left kernel
    /// of `H_{n+L}(u)` before use.
    pub eta: Option<Vec<DVector<f64>>>,
    pub a: Option<DMatrix<f64>>,
    pub zeta: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateOptions {
    pub rtol: f64,
    pub cluster_radius: f64,
    pub tol_cert: f64,
    pub seed: u64,
    pub overrides: Overrides,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            rtol: DEFAULT_RTOL,
            cluster_radius: DEFAULT_CLUSTER_RADIUS,
            tol_cert: DEFAULT_TOL_CERT,
            seed: 0,
            overrides: Overrides::default(),
        }
    }
}

impl CertificateOptions {
    fn validate(&self) -> Result<()> {
        numkit::check_positive(self.rtol, "rtol")?;
        numkit::check_positive(self.cluster_radius, "cluster_radius")?;
        numkit::check_positive(self.tol_cert, "tol_cert")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionPath {
    /// Fewer samples than `n + L - 1`: a stock controllable pair suffices.
    ShortData,
    /// Jordan block `J(eigenvalue)` with `zeta = e_n`.
    JordanScan { eigenvalue: f64, candidates_tried: usize },
    /// `A` (and possibly `zeta`) supplied by the caller.
    Override { eta_projection_shift: Option<f64> },
    /// Caller's `(A, B)` with `zeta = (sum_i A^i eta_i)^{-1} B`.
    SingleInputFamily,
}

/// One term `E_index` of the matrix recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionTerm {
    pub index: isize,
    #[serde(with = "rowmajor::matrix")]
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||[v^T w^T] [H_L(u); H_1(x)]||_2`.
    pub annihilation: f64,
    /// Bound the annihilation residual was checked against.
    pub annihilation_bound: f64,
    /// `||eta^T H_{n+L}(u)||_2 / ||eta||_2`.
    pub eta_annihilation: f64,
    /// `max_i ||A E_i + zeta eta_i^T - E_{i-1}||`, relative.
    pub recursion: f64,
    /// Largest relative gap between simulated and closed-form states.
    pub closed_form: f64,
    /// `max_{i < n-1} |xi^T A^i zeta|`, relative.
    pub xi_orthogonality: f64,
    /// `max_{L <= i <= n+L-1} ||xi^T E_i||`, relative.
    pub xi_tail: f64,
    /// Distance between the spectrum of `A` and the root set; `None` when the root
    /// set is empty.
    pub spectral_gap: Option<f64>,
}

/// Everything the construction produced, plus the checks it passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    #[serde(rename = "T")]
    pub len: usize,
    #[serde(with = "rowmajor::vectors")]
    pub eta: Vec<DVector<f64>>,
    pub lambda: RootSet,
    #[serde(rename = "A", with = "rowmajor::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "rowmajor::vector")]
    pub zeta: DVector<f64>,
    /// `E_{n+L-1}, ..., E_{-1}`; empty for short data.
    #[serde(rename = "E")]
    pub e: Vec<RecursionTerm>,
    #[serde(rename = "B", with = "rowmajor::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "rowmajor::vector")]
    pub x0: DVector<f64>,
    #[serde(with = "rowmajor::vector")]
    pub xi: DVector<f64>,
    #[serde(with = "rowmajor::vector")]
    pub v: DVector<f64>,
    #[serde(with = "rowmajor::vector")]
    pub w: DVector<f64>,
    /// `x(0) ..= x(T)`.
    pub states: Signal,
    pub stacked_rank: RankReport,
    pub controllable: bool,
    pub rank_deficit_confirmed: bool,
    pub short_data_case: bool,
    pub path: ConstructionPath,
    pub residuals: Residuals,
    pub seed: u64,
    pub rtol: f64,
    pub tol_cert: f64,
    pub cluster_radius: f64,
}

impl Certificate {
    /// `E_index`, for `index` in `-1 ..= n+L-1`.
    pub fn e(&self, index: isize) -> Option<&DMatrix<f64>> {
        self.e.iter().find(|t| t.index == index).map(|t| &t.matrix)
    }

    /// States `x(0) ..= x(T-L)` entering the rank condition.
    pub fn state_window(&self) -> Signal {
        self.states.window(0, self.len - self.depth + 1).expect("certificate states cover [0, T]")
    }
}

pub fn construct_certificate(u: &Signal, n: usize, depth: usize, opts: &CertificateOptions) -> Result<Certificate> {
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1; use construct_certificate_l0 for depth 0"));
    }
    if depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} exceeds input length {}", u.len())));
    }
    build(u, n, depth, opts)
}

/// Depth-0 variant: `u` covers `u(0) ..= u(T)` and the certificate shows
/// `w^T H_1(x_[0,T]) = 0` whenever `u_[0,T-1]` is not persistently exciting
/// of order `n`.
pub fn construct_certificate_l0(u: &Signal, n: usize, opts: &CertificateOptions) -> Result<Certificate> {
    if u.len() < 2 {
        return Err(Error::invalid("depth-0 construction needs at least two input samples"));
    }
    build(&u.window(0, u.len() - 1)?, n, 0, opts)
}

/// Left-kernel vector of `H_{n+L}(u)` split into `m`-blocks.
///
/// Picks the right singular vector of `H^T` with the smallest singular
/// value, signed so that its largest entry is positive.
pub fn select_eta(u: &Signal, order: usize, rtol: f64) -> Result<Vec<DVector<f64>>> {
    let ht = signals::hankel_unchecked(u, order).transpose();
    let kernel = numkit::kernel_basis(&ht, rtol)?;
    let mut eta =
        if kernel.ncols() > 0 { kernel.column(0).into_owned() } else { numkit::least_right_singular_vector(&ht)?.1 };
    let pivot = eta.iamax();
    if eta[pivot] < 0.0 {
        eta.neg_mut();
    }
    Ok(split_blocks(&eta, u.dim()))
}

fn split_blocks(eta: &DVector<f64>, m: usize) -> Vec<DVector<f64>> {
    eta.as_slice().chunks(m).map(DVector::from_row_slice).collect()
}

fn join_blocks(eta: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(eta.iter().map(|e| e.len()).sum(), eta.iter().flat_map(|e| e.iter().copied()))
}

fn ensure_not_pe(u: &Signal, order: usize, rtol: f64) -> Result<()> {
    if signals::is_pe_of_order(u, order, rtol)? {
        Err(Error::PersistentlyExciting { order })
    } else {
        Ok(())
    }
}

fn basis_vector(n: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 })
}

/// `0, 1, -1, 2, -2, ...`
fn eigenvalue_scan() -> impl Iterator<Item = f64> {
    (0..).map(|k: i64| if k % 2 == 1 { ((k + 1) / 2) as f64 } else { -(k / 2) as f64 })
}

fn build(u: &Signal, n: usize, depth: usize, opts: &CertificateOptions) -> Result<Certificate> {
    opts.validate()?;
    if n == 0 {
        return Err(Error::invalid("state dimension n must be positive"));
    }
    let order = n + depth;
    ensure_not_pe(u, order, opts.rtol)?;
    if u.len() + 1 < order {
        return short_data(u, n, depth, opts);
    }

    let (eta, shift) = match &opts.overrides.eta {
        Some(given) => {
            let (eta, shift) = project_eta(u, order, given, opts.rtol)?;
            (eta, Some(shift))
        }
        None => (select_eta(u, order, opts.rtol)?, None),
    };
    let lambda = numkit::lambda_set(&eta, opts.rtol, opts.cluster_radius)?;

    if let Some(a) = &opts.overrides.a {
        if a.shape() != (n, n) {
            return Err(Error::dims(format!("override A is {:?}, expected ({n}, {n})", a.shape())));
        }
        let gap = numkit::spectral_gap(a, &lambda)?;
        if gap <= opts.cluster_radius {
            return Err(Error::EigenvalueConflict { distance: gap });
        }
        let zeta = match &opts.overrides.zeta {
            Some(z) => z.clone(),
            None => {
                lti::is_cyclic(a, opts.rtol, opts.seed)?.ok_or_else(|| Error::invalid("override A is not cyclic"))?
            }
        };
        let path = ConstructionPath::Override { eta_projection_shift: shift };
        return assemble(u, n, depth, &eta, lambda, a.clone(), zeta, None, path, true, opts)
            .map_err(Error::ConstructionFailed);
    }

    let zeta = match &opts.overrides.zeta {
        Some(z) if z.len() != n => {
            return Err(Error::dims(format!("override zeta has {} entries, expected {n}", z.len())))
        }
        Some(z) => z.clone(),
        None => basis_vector(n, n - 1),
    };
    let exclusion = EIGENVALUE_EXCLUSION.max(2.0 * opts.cluster_radius);
    let mut failures = Vec::new();
    for (tried, eigenvalue) in eigenvalue_scan()
        .filter(|&z| lambda.distance_to(Complex64::new(z, 0.0)) > exclusion)
        .take(MAX_EIGENVALUE_CANDIDATES)
        .enumerate()
    {
        let path = match &opts.overrides.eta {
            Some(_) => ConstructionPath::Override { eta_projection_shift: shift },
            None => ConstructionPath::JordanScan { eigenvalue, candidates_tried: tried + 1 },
        };
        let a = lti::jordan_block(n, eigenvalue);
        match assemble(u, n, depth, &eta, lambda.clone(), a, zeta.clone(), None, path, true, opts) {
            Ok(cert) => return Ok(cert),
            Err(why) => failures.push(format!("eigenvalue {eigenvalue}: {why}")),
        }
    }
    Err(Error::ConstructionFailed(failures.join("; ")))
}

/// Projects a caller-supplied `eta` onto the numerical left kernel of
/// `H_order(u)`. Returns the projection and the relative shift.
fn project_eta(u: &Signal, order: usize, given: &[DVector<f64>], rtol: f64) -> Result<(Vec<DVector<f64>>, f64)> {
    if given.len() != order || given.iter().any(|b| b.len() != u.dim()) {
        return Err(Error::dims(format!("override eta must have {order} blocks of size {}", u.dim())));
    }
    let flat = join_blocks(given);
    let norm = flat.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::invalid("override eta must be nonzero and finite"));
    }
    let kernel = numkit::kernel_basis(&signals::hankel_unchecked(u, order).transpose(), rtol)?;
    let projected = &kernel * (kernel.transpose() * &flat);
    let shift = (&projected - &flat).norm() / norm;
    if projected.norm() < 0.5 * norm {
        return Err(Error::invalid(format!(
            "override eta is far from the left kernel of the Hankel matrix (relative shift {shift:.3e})"
        )));
    }
    Ok((split_blocks(&projected, u.dim()), shift))
}

/// `E_{d}, ..., E_{-1}` for `d = eta.len() - 1`, starting from `E_d = 0`.
fn recursion(a: &DMatrix<f64>, zeta: &DVector<f64>, eta: &[DVector<f64>]) -> Vec<RecursionTerm> {
    let (n, m) = (a.nrows(), eta[0].len());
    let top = eta.len() as isize - 1;
    let mut terms = vec![RecursionTerm { index: top, matrix: DMatrix::zeros(n, m) }];
    for i in (0..eta.len()).rev() {
        let prev = &terms.last().expect("seeded").matrix;
        let next = a * prev + zeta * eta[i].transpose();
        terms.push(RecursionTerm { index: i as isize - 1, matrix: next });
    }
    terms
}

fn e_at(terms: &[RecursionTerm], index: isize) -> &DMatrix<f64> {
    let top = terms[0].index;
    &terms[(top - index) as usize].matrix
}

/// `xi != 0` with `xi^T A^i zeta = 0` for `i < n - 1`, normalized so that
/// `xi^T A^{n-1} zeta = 1` when the Krylov matrix is invertible, and to
/// `||xi|| >= 1` in any case.
fn annihilating_xi(a: &DMatrix<f64>, zeta: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let zeta_col = DMatrix::from_column_slice(n, 1, zeta.as_slice());
    let k = lti::krylov(a, &zeta_col, n)?;
    let solved = if numkit::condition_number(&k) < MAX_KRYLOV_CONDITION {
        k.transpose().lu().solve(&basis_vector(n, n - 1))
    } else {
        None
    };
    let xi = match solved {
        Some(xi) => xi,
        None => numkit::least_right_singular_vector(&lti::krylov(a, &zeta_col, n - 1)?.transpose())?.1,
    };
    let norm = xi.norm();
    Ok(if norm < 1.0 { xi / norm } else { xi })
}

/// Closed-form state formulas used to cross-check the simulation:
/// `x(t) = -sum_{i<d} E_i u(t+i)` for `t <= s`, and for `t` in `[1, n-1]`
/// `x(t+s) = sum_{j<t} sum_{i=j}^{d-1} A^{t-j-1} zeta eta_{i-j}^T u(i+s)
///           - sum_{i=t}^{d-1} E_{i-t} u(i+s)`,
/// with `d = n+L-1` and `s = T-L-n+1`.
fn closed_form_states(
    u: &Signal,
    n: usize,
    depth: usize,
    a: &DMatrix<f64>,
    zeta: &DVector<f64>,
    eta: &[DVector<f64>],
    terms: &[RecursionTerm],
) -> Vec<DVector<f64>> {
    let d = n + depth - 1;
    let s = u.len() + 1 - depth - n;
    let mut a_pow_zeta = vec![zeta.clone()];
    for k in 1..n {
        let next = a * &a_pow_zeta[k - 1];
        a_pow_zeta.push(next);
    }
    let mut out = Vec::with_capacity(s + n);
    for t in 0..=s {
        let mut x = DVector::zeros(n);
        for i in 0..d {
            x -= e_at(terms, i as isize) * u.sample_vector(t + i);
        }
        out.push(x);
    }
    for t in 1..n {
        let mut x = DVector::zeros(n);
        for j in 0..t {
            for i in j..d {
                let coeff = eta[i - j].dot(&u.sample_vector(i + s));
                x += &a_pow_zeta[t - j - 1] * coeff;
            }
        }
        for i in t..d {
            x -= e_at(terms, (i - t) as isize) * u.sample_vector(i + s);
        }
        out.push(x);
    }
    out
}

fn relative_gap(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (x - y).amax() / (1.0 + x.amax().max(y.amax()))
}

/// Builds and verifies a certificate for a given `(A, zeta)`. `b_given`
/// replaces `E_{-1}` as the simulated input matrix.
#[allow(clippy::too_many_arguments)]
fn assemble(
    u: &Signal,
    n: usize,
    depth: usize,
    eta: &[DVector<f64>],
    lambda: RootSet,
    a: DMatrix<f64>,
    zeta: DVector<f64>,
    b_given: Option<DMatrix<f64>>,
    path: ConstructionPath,
    require_controllable: bool,
    opts: &CertificateOptions,
) -> std::result::Result<Certificate, String> {
    let m = u.dim();
    let order = n + depth;
    let len = u.len();
    let err = |e: Error| e.to_string();
    if zeta.len() != n {
        return Err(format!("zeta has {} entries, expected {n}", zeta.len()));
    }

    let terms = recursion(&a, &zeta, eta);
    let b = b_given.unwrap_or_else(|| e_at(&terms, -1).clone());
    let mut x0 = DVector::zeros(n);
    for i in 0..order - 1 {
        x0 -= e_at(&terms, i as isize) * u.sample_vector(i);
    }
    let sys = StateSpaceSystem::new(a.clone(), b.clone(), DMatrix::zeros(1, n), DMatrix::zeros(1, m)).map_err(err)?;
    let states = lti::simulate(&sys, &x0, u).map_err(err)?.x;
    let window = states.window(0, len - depth + 1).map_err(err)?;

    let xi = annihilating_xi(&a, &zeta).map_err(err)?;
    let mut v = DVector::zeros(depth * m);
    for i in 0..depth {
        v.rows_mut(i * m, m).copy_from(&(e_at(&terms, i as isize).transpose() * &xi));
    }
    let w = xi.clone();

    let stacked = lemma::input_state_matrix(u, &window, depth).map_err(err)?;
    let certificate_row = {
        let mut c = DVector::zeros(depth * m + n);
        c.rows_mut(0, depth * m).copy_from(&v);
        c.rows_mut(depth * m, n).copy_from(&w);
        c
    };
    let annihilation = (certificate_row.transpose() * &stacked).norm();
    let annihilation_bound = opts.tol_cert * (1.0 + window.max_abs()) * u.max_abs().max(1.0) * (len - depth + 1) as f64;
    let scale = u.max_abs() * terms.iter().fold(1.0, |s: f64, t| s.max(t.matrix.amax()));
    let stacked_rank = numkit::rank_report_scaled(&stacked, opts.rtol, scale).map_err(err)?;
    let (controllable, _) = lti::is_controllable(&a, &b, opts.rtol).map_err(err)?;
    let spectral_gap = numkit::spectral_gap(&a, &lambda).map_err(err)?;

    let flat_eta = join_blocks(eta);
    let eta_annihilation = (flat_eta.transpose() * signals::hankel_unchecked(u, order)).norm() / flat_eta.norm();
    let recursion_residual = (0..order)
        .map(|i| {
            let lhs = &a * e_at(&terms, i as isize) + &zeta * eta[i].transpose();
            let rhs = e_at(&terms, i as isize - 1);
            (lhs - rhs).amax() / (1.0 + rhs.amax())
        })
        .fold(0.0, f64::max);
    let closed_form = closed_form_states(u, n, depth, &a, &zeta, eta, &terms)
        .iter()
        .enumerate()
        .map(|(t, x)| relative_gap(&window.sample_vector(t), x))
        .fold(0.0, f64::max);
    let mut a_pow_zeta = zeta.clone();
    let mut xi_orthogonality: f64 = 0.0;
    for _ in 0..n.saturating_sub(1) {
        xi_orthogonality =
            xi_orthogonality.max(xi.dot(&a_pow_zeta).abs() / (xi.norm() * a_pow_zeta.norm().max(1e-300)));
        a_pow_zeta = &a * a_pow_zeta;
    }
    let xi_tail = (depth..order)
        .map(|i| {
            (xi.transpose() * e_at(&terms, i as isize)).amax() / (xi.norm() * (1.0 + e_at(&terms, i as isize).amax()))
        })
        .fold(0.0, f64::max);

    let residuals = Residuals {
        annihilation,
        annihilation_bound,
        eta_annihilation,
        recursion: recursion_residual,
        closed_form,
        xi_orthogonality,
        xi_tail,
        spectral_gap: spectral_gap.is_finite().then_some(spectral_gap),
    };
    let rank_deficit_confirmed = stacked_rank.rank < depth * m + n;

    let mut problems = Vec::new();
    if !(annihilation <= annihilation_bound) {
        problems.push(format!("annihilation residual {annihilation:.3e} > {annihilation_bound:.3e}"));
    }
    if require_controllable && !controllable {
        problems.push("(A, B) not controllable".to_string());
    }
    if spectral_gap <= opts.cluster_radius {
        problems.push(format!("spectrum within {spectral_gap:.3e} of the root set"));
    }
    if !rank_deficit_confirmed {
        problems.push(format!("stacked rank {} is not deficient", stacked_rank.rank));
    }
    if !problems.is_empty() {
        return Err(problems.join(", "));
    }

    Ok(Certificate {
        n,
        m,
        depth,
        len,
        eta: eta.to_vec(),
        lambda,
        a,
        zeta,
        e: terms,
        b,
        x0,
        xi,
        v,
        w,
        states,
        stacked_rank,
        controllable,
        rank_deficit_confirmed,
        short_data_case: false,
        path,
        residuals,
        seed: opts.seed,
        rtol: opts.rtol,
        tol_cert: opts.tol_cert,
        cluster_radius: opts.cluster_radius,
    })
}

/// Fewer than `n` state samples enter the rank condition, so any
/// controllable pair works; `w` spans part of the left kernel of the states.
fn short_data(u: &Signal, n: usize, depth: usize, opts: &CertificateOptions) -> Result<Certificate> {
    let m = u.dim();
    let a = lti::jordan_block(n, 0.0);
    let zeta = basis_vector(n, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let b = loop {
        let mut b = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
        b.set_column(0, &zeta);
        if lti::is_controllable(&a, &b, opts.rtol)?.0 {
            break b;
        }
    };
    let x0 = DVector::zeros(n);
    let sys = StateSpaceSystem::new(a.clone(), b.clone(), DMatrix::zeros(1, n), DMatrix::zeros(1, m))?;
    let states = lti::simulate(&sys, &x0, u)?.x;
    let window = states.window(0, u.len() - depth + 1)?;
    let hx = signals::hankel_unchecked(&window, 1);
    let (_, w) = numkit::least_right_singular_vector(&hx.transpose())?;
    let v = DVector::zeros(depth * m);

    let stacked = lemma::input_state_matrix(u, &window, depth)?;
    let mut row = DVector::zeros(depth * m + n);
    row.rows_mut(depth * m, n).copy_from(&w);
    let annihilation = (row.transpose() * &stacked).norm();
    let annihilation_bound = opts.tol_cert * (1.0 + window.max_abs()) * u.max_abs().max(1.0) * window.len() as f64;
    let scale = u.max_abs() * b.amax().max(1.0);
    let stacked_rank = numkit::rank_report_scaled(&stacked, opts.rtol, scale)?;
    let rank_deficit_confirmed = stacked_rank.rank < depth * m + n;
    if !(annihilation <= annihilation_bound) || !rank_deficit_confirmed {
        return Err(Error::ConstructionFailed(format!(
            "short-data certificate: residual {annihilation:.3e}, stacked rank {}",
            stacked_rank.rank
        )));
    }
    Ok(Certificate {
        n,
        m,
        depth,
        len: u.len(),
        eta: Vec::new(),
        lambda: RootSet::empty(opts.cluster_radius),
        a,
        zeta,
        e: Vec::new(),
        b,
        x0,
        xi: w.clone(),
        v,
        w,
        states,
        stacked_rank,
        controllable: true,
        rank_deficit_confirmed,
        short_data_case: true,
        path: ConstructionPath::ShortData,
        residuals: Residuals { annihilation, annihilation_bound, ..Residuals::default() },
        seed: opts.seed,
        rtol: opts.rtol,
        tol_cert: opts.tol_cert,
        cluster_radius: opts.cluster_radius,
    })
}

/// `sum_i A^i eta_i` for scalar coefficients.
fn scalar_matrix_polynomial(a: &DMatrix<f64>, eta: &[DVector<f64>]) -> DMatrix<f64> {
    let n = a.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for e in eta.iter().rev() {
        acc = a * acc + DMatrix::identity(n, n) * e[0];
    }
    acc
}

/// Single-input counterexample for the caller's `(A, B)`: any `A` whose
/// spectrum avoids the root set of `eta` admits an initial state with
/// rank-deficient input-state data.
pub fn single_input_family(
    u: &Signal,
    n: usize,
    depth: usize,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    opts: &CertificateOptions,
) -> Result<Certificate> {
    opts.validate()?;
    if u.dim() != 1 {
        return Err(Error::invalid("the single-input family needs m = 1"));
    }
    if depth == 0 || depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} outside [1, {}]", u.len())));
    }
    if a.shape() != (n, n) || b.len() != n {
        return Err(Error::dims(format!("A {:?} and B of length {} for n = {n}", a.shape(), b.len())));
    }
    numkit::ensure_finite(a, "A")?;
    if b.iter().any(|x| !x.is_finite()) || b.amax() == 0.0 {
        return Err(Error::invalid("B must be nonzero and finite"));
    }
    let order = n + depth;
    ensure_not_pe(u, order, opts.rtol)?;
    if u.len() + 1 < order {
        return Err(Error::invalid(format!("needs T >= n + L - 1 = {}", order - 1)));
    }
    let eta = match &opts.overrides.eta {
        Some(given) => project_eta(u, order, given, opts.rtol)?.0,
        None => select_eta(u, order, opts.rtol)?,
    };
    let lambda = numkit::lambda_set(&eta, opts.rtol, opts.cluster_radius)?;
    let gap = numkit::spectral_gap(a, &lambda)?;
    if gap <= opts.cluster_radius {
        return Err(Error::EigenvalueConflict { distance: gap });
    }
    let poly = scalar_matrix_polynomial(a, &eta);
    let condition = numkit::condition_number(&poly);
    if !(condition <= MAX_POLY_CONDITION) {
        return Err(Error::NearSingular { condition });
    }
    let zeta = poly.lu().solve(b).ok_or(Error::NearSingular { condition })?;
    let b_mat = DMatrix::from_column_slice(n, 1, b.as_slice());
    assemble(u, n, depth, &eta, lambda, a.clone(), zeta, Some(b_mat), ConstructionPath::SingleInputFamily, false, opts)
        .map_err(Error::ConstructionFailed)
}

/// Output-level counterexample: the certificate's pair with output rows
/// `C = [w^T; 0]`, `D = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputCounterexample {
    pub system: StateSpaceSystem,
    #[serde(with = "rowmajor::vector")]
    pub x0: DVector<f64>,
    pub y: Signal,
    /// `[v; e_1; 0]`, of length `L m + L p`.
    #[serde(with = "rowmajor::vector")]
    pub annihilator: DVector<f64>,
    pub annihilation_residual: f64,
    pub witness_u: Signal,
    #[serde(with = "rowmajor::vector")]
    pub witness_x0: DVector<f64>,
    pub witness_y: Signal,
    /// `annihilator^T [u_bar; y_bar] = w^T x_bar(0)`.
    pub separation_value: f64,
    pub behavior_check: LemmaCheck,
}

pub fn extend_to_output(cert: &Certificate, u: &Signal, outputs: usize, rtol: f64) -> Result<OutputCounterexample> {
    if cert.depth == 0 {
        return Err(Error::Unsupported("output counterexamples need depth L >= 1".into()));
    }
    if outputs == 0 {
        return Err(Error::invalid("output dimension must be positive"));
    }
    if u.len() != cert.len || u.dim() != cert.m {
        return Err(Error::dims("input does not match the certificate"));
    }
    let (n, m, depth) = (cert.n, cert.m, cert.depth);
    let mut c = DMatrix::zeros(outputs, n);
    c.set_row(0, &cert.w.transpose());
    let system = StateSpaceSystem::new(cert.a.clone(), cert.b.clone(), c, DMatrix::zeros(outputs, m))?;
    let y = lti::simulate(&system, &cert.x0, u)?.y;

    let mut annihilator = DVector::zeros(depth * (m + outputs));
    annihilator.rows_mut(0, depth * m).copy_from(&cert.v);
    annihilator[depth * m] = 1.0;
    let data = lemma::vstack(&signals::hankel(u, depth)?, &signals::hankel(&y, depth)?);
    let annihilation_residual = (annihilator.transpose() * &data).norm();

    let witness_u = Signal::zeros(m, depth)?;
    let witness_x0 = &cert.w / cert.w.norm_squared();
    let witness_y = lti::simulate(&system, &witness_x0, &witness_u)?.y;
    let mut window = DVector::zeros(depth * (m + outputs));
    window.rows_mut(depth * m, depth * outputs).copy_from(&signals::stack(&witness_y));
    let separation_value = annihilator.dot(&window);

    let behavior_check = lemma::check_behavior_equality(&system, u, &y, depth, rtol)?;
    Ok(OutputCounterexample {
        system,
        x0: cert.x0.clone(),
        y,
        annihilator,
        annihilation_residual,
        witness_u,
        witness_x0,
        witness_y,
        separation_value,
        behavior_check,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudOptions {
    pub samples: usize,
    pub a_range: (f64, f64),
    pub zeta_range: (f64, f64),
    pub rtol: f64,
    pub cluster_radius: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for CloudOptions {
    fn default() -> Self {
        CloudOptions {
            samples: 10_000,
            a_range: (-1.0, 1.0),
            zeta_range: (-1.0, 1.0),
            rtol: DEFAULT_RTOL,
            cluster_radius: DEFAULT_CLUSTER_RADIUS,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

/// One scalar-state system `x(t+1) = a x(t) + b u(t)` from the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub a: f64,
    pub zeta: f64,
    pub b: Vec<f64>,
    pub x0: f64,
    pub stacked_rank: usize,
    pub controllable: bool,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudReport {
    #[serde(with = "rowmajor::vectors")]
    pub eta: Vec<DVector<f64>>,
    pub lambda: RootSet,
    pub points: Vec<CloudPoint>,
    /// Samples dropped because `a` fell on the root set.
    pub skipped: usize,
    pub verified_fraction: f64,
}

/// The family of `n = 1` systems generating rank-deficient data for `u`:
/// for each `a` off the root set and `zeta != 0`, `b = zeta sum_i a^i eta_i^T`
/// with the matching initial state.
pub fn sample_system_cloud(u: &Signal, depth: usize, opts: &CloudOptions) -> Result<CloudReport> {
    numkit::check_positive(opts.rtol, "rtol")?;
    numkit::check_positive(opts.cluster_radius, "cluster_radius")?;
    for (lo, hi) in [opts.a_range, opts.zeta_range] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("invalid sampling range [{lo}, {hi}]")));
        }
    }
    if opts.zeta_range.0 == 0.0 && opts.zeta_range.1 == 0.0 {
        return Err(Error::invalid("zeta range must contain nonzero values"));
    }
    if depth == 0 || depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} outside [1, {}]", u.len())));
    }
    ensure_not_pe(u, depth + 1, opts.rtol)?;
    let eta = select_eta(u, depth + 1, opts.rtol)?;
    let lambda = numkit::lambda_set(&eta, opts.rtol, opts.cluster_radius)?;

    let drawn = exec::map_indexed(opts.exec, opts.samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(exec::trial_seed(opts.seed, i as u64));
        let a = uniform(&mut rng, opts.a_range);
        let zeta = loop {
            let z = uniform(&mut rng, opts.zeta_range);
            if z != 0.0 {
                break z;
            }
        };
        if lambda.contains(Complex64::new(a, 0.0)) {
            return Ok(None);
        }
        family_point(u, depth, &eta, a, zeta, opts.rtol).map(Some)
    });
    let mut points = Vec::with_capacity(opts.samples);
    let mut skipped = 0;
    for p in drawn {
        match p? {
            Some(p) => points.push(p),
            None => skipped += 1,
        }
    }
    let verified = points.iter().filter(|p| p.verified).count();
    let verified_fraction = if points.is_empty() { 1.0 } else { verified as f64 / points.len() as f64 };
    Ok(CloudReport { eta, lambda, points, skipped, verified_fraction })
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn family_point(u: &Signal, depth: usize, eta: &[DVector<f64>], a: f64, zeta: f64, rtol: f64) -> Result<CloudPoint> {
    let a_mat = DMatrix::from_element(1, 1, a);
    let zeta_vec = DVector::from_element(1, zeta);
    let terms = recursion(&a_mat, &zeta_vec, eta);
    let b = e_at(&terms, -1).clone();
    let mut x0 = 0.0;
    for i in 0..depth {
        x0 -= (e_at(&terms, i as isize) * u.sample_vector(i))[0];
    }
    let sys = StateSpaceSystem::new(a_mat, b.clone(), DMatrix::zeros(1, 1), DMatrix::zeros(1, u.dim()))?;
    let states = lti::simulate(&sys, &DVector::from_element(1, x0), u)?.x;
    let window = states.window(0, u.len() - depth + 1)?;
    let report = lemma::check_rank_condition(u, &window, depth, 1, rtol)?;
    let controllable = b.amax() > 0.0;
    Ok(CloudPoint {
        a,
        zeta,
        b: b.iter().copied().collect(),
        x0,
        stacked_rank: report.rank,
        controllable,
        verified: controllable && report.rank < 1 + depth * u.dim(),
    })
}

/// Member of the `n = 1` family at pole `a` with the given `zeta`.
pub fn family_member(u: &Signal, depth: usize, a: f64, zeta: f64, rtol: f64) -> Result<CloudPoint> {
    if depth == 0 || depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} outside [1, {}]", u.len())));
    }
    let eta = select_eta(u, depth + 1, rtol)?;
    family_point(u, depth, &eta, a, zeta, rtol)
}

/// Family member at pole `a` whose `b` is closest (least squares over
/// `zeta`) to the given input row.
pub fn nearest_family_member(u: &Signal, depth: usize, a: f64, b: &[f64], rtol: f64) -> Result<CloudPoint> {
    if b.len() != u.dim() {
        return Err(Error::dims(format!("b has {} entries, expected {}", b.len(), u.dim())));
    }
    let eta = select_eta(u, depth + 1, rtol)?;
    let direction = eta.iter().rev().fold(DVector::zeros(u.dim()), |acc, e| acc * a + e);
    let denom = direction.norm_squared();
    if denom == 0.0 {
        return Err(Error::EigenvalueConflict { distance: 0.0 });
    }
    let zeta = direction.dot(&DVector::from_row_slice(b)) / denom;
    family_point(u, depth, &eta, a, zeta, rtol)
}
