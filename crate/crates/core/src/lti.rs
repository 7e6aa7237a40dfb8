//! Discrete-time state-space systems
//!
//! ```text
//! x(t+1) = A x(t) + B u(t)
//! y(t)   = C x(t) + D u(t)
//! ```
//!
//! with simulation, Kalman controllability, cyclicity and explicit bases of
//! the depth-`L` input-output behavior.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, RankReport};
use crate::rowmajor;
use crate::signals::{self, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemRepr", into = "SystemRepr")]
pub struct StateSpaceSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SystemRepr {
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "A", with = "rowmajor::matrix")]
    a: DMatrix<f64>,
    #[serde(rename = "B", with = "rowmajor::matrix")]
    b: DMatrix<f64>,
    #[serde(rename = "C", with = "rowmajor::matrix")]
    c: DMatrix<f64>,
    #[serde(rename = "D", with = "rowmajor::matrix")]
    d: DMatrix<f64>,
}

impl TryFrom<SystemRepr> for StateSpaceSystem {
    type Error = Error;

    fn try_from(r: SystemRepr) -> Result<Self> {
        let sys = StateSpaceSystem::new(r.a, r.b, r.c, r.d)?;
        if (sys.n(), sys.m(), sys.p()) != (r.n, r.m, r.p) {
            return Err(Error::dims(format!(
                "declared (n, m, p) = ({}, {}, {}) but matrices give ({}, {}, {})",
                r.n,
                r.m,
                r.p,
                sys.n(),
                sys.m(),
                sys.p()
            )));
        }
        Ok(sys)
    }
}

impl From<StateSpaceSystem> for SystemRepr {
    fn from(s: StateSpaceSystem) -> Self {
        SystemRepr { n: s.n(), m: s.m(), p: s.p(), a: s.a, b: s.b, c: s.c, d: s.d }
    }
}

impl StateSpaceSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::invalid("n, m and p must be positive"));
        }
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
            return Err(Error::dims(format!(
                "A {:?}, B {:?}, C {:?}, D {:?} are not compatible",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            numkit::ensure_finite(mat, name)?;
        }
        Ok(StateSpaceSystem { a, b, c, d })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub u: Signal,
    /// `x(0) ..= x(T)`, one sample longer than `u` and `y`.
    pub x: Signal,
    pub y: Signal,
}

pub fn simulate(sys: &StateSpaceSystem, x0: &DVector<f64>, u: &Signal) -> Result<Trajectory> {
    if u.dim() != sys.m() {
        return Err(Error::dims(format!("input dim {} but system has m = {}", u.dim(), sys.m())));
    }
    if x0.len() != sys.n() {
        return Err(Error::dims(format!("x0 has {} entries but n = {}", x0.len(), sys.n())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("x0 has a non-finite entry"));
    }
    let mut xs = Vec::with_capacity(u.len() + 1);
    let mut ys = Vec::with_capacity(u.len());
    let mut x = x0.clone();
    for t in 0..u.len() {
        let ut = u.sample_vector(t);
        ys.push(&sys.c * &x + &sys.d * &ut);
        let next = &sys.a * &x + &sys.b * &ut;
        xs.push(std::mem::replace(&mut x, next));
    }
    xs.push(x);
    Ok(Trajectory { u: u.clone(), x: Signal::from_vectors(&xs)?, y: Signal::from_vectors(&ys)? })
}

pub fn jordan_block(n: usize, eigenvalue: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            eigenvalue
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    krylov(a, b, a.nrows())
}

/// `[B, AB, ..., A^{depth-1} B]`.
pub fn krylov(a: &DMatrix<f64>, b: &DMatrix<f64>, depth: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::dims(format!("A {:?} and B {:?} are not compatible", a.shape(), b.shape())));
    }
    let m = b.ncols();
    let mut k = DMatrix::zeros(n, depth * m);
    let mut block = b.clone();
    for i in 0..depth {
        k.columns_mut(i * m, m).copy_from(&block);
        block = a * block;
    }
    Ok(k)
}

/// Kalman rank test. For `n > 6` the powers are built from `A / rho(A)`;
/// rescaling whole blocks does not change the column span.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>, rtol: f64) -> Result<(bool, RankReport)> {
    numkit::ensure_finite(a, "A")?;
    numkit::ensure_finite(b, "B")?;
    let n = a.nrows();
    let scaled;
    let a_used = if n > 6 {
        let rho = numkit::eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if rho > 0.0 {
            scaled = a / rho;
            &scaled
        } else {
            a
        }
    } else {
        a
    };
    let report = numkit::rank_report(&controllability_matrix(a_used, b)?, rtol)?;
    Ok((report.rank == n, report))
}

const CYCLIC_ATTEMPTS: usize = 16;

/// Returns a vector `zeta` with `(A, zeta)` controllable if `A` is cyclic.
///
/// Tries 16 Gaussian vectors drawn from `seed`, then the standard basis
/// vectors and the all-ones vector.
pub fn is_cyclic(a: &DMatrix<f64>, rtol: f64, seed: u64) -> Result<Option<DVector<f64>>> {
    if !a.is_square() {
        return Err(Error::dims("cyclicity needs a square matrix"));
    }
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..CYCLIC_ATTEMPTS)
        .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
        .collect::<Vec<DVector<f64>>>();
    let fallback = (0..n)
        .rev()
        .map(|j| DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 }))
        .chain(std::iter::once(DVector::from_element(n, 1.0)));
    for zeta in random.into_iter().chain(fallback) {
        let col = DMatrix::from_column_slice(n, 1, zeta.as_slice());
        if is_controllable(a, &col, rtol)?.0 {
            return Ok(Some(zeta));
        }
    }
    Ok(None)
}

/// `[C; CA; ...; CA^{depth-1}]`.
pub fn observability_matrix(sys: &StateSpaceSystem, depth: usize) -> DMatrix<f64> {
    let (n, p) = (sys.n(), sys.p());
    let mut o = DMatrix::zeros(depth * p, n);
    let mut block = sys.c.clone();
    for i in 0..depth {
        o.rows_mut(i * p, p).copy_from(&block);
        block = &block * &sys.a;
    }
    o
}

/// Lower block-triangular Toeplitz matrix of the Markov parameters
/// `D, CB, CAB, ..., CA^{depth-2}B`.
pub fn toeplitz_markov(sys: &StateSpaceSystem, depth: usize) -> DMatrix<f64> {
    let (m, p) = (sys.m(), sys.p());
    let mut markov = Vec::with_capacity(depth);
    markov.push(sys.d.clone());
    let mut ca = sys.c.clone();
    for _ in 1..depth {
        markov.push(&ca * &sys.b);
        ca = &ca * &sys.a;
    }
    let mut t = DMatrix::zeros(depth * p, depth * m);
    for i in 0..depth {
        for j in 0..=i {
            t.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
        }
    }
    t
}

/// Basis whose column span is the depth-`L` input-output behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorBasis {
    pub depth: usize,
    /// `[[I, 0], [T_L, O_L]]`, of size `(Lm + Lp) x (Lm + n)`.
    #[serde(with = "rowmajor::matrix")]
    pub basis: DMatrix<f64>,
    /// `Lm + rank(O_L)`.
    pub dim: usize,
}

pub fn behavior_basis(sys: &StateSpaceSystem, depth: usize, rtol: f64) -> Result<BehaviorBasis> {
    if depth == 0 {
        return Err(Error::invalid("behavior depth must be at least 1"));
    }
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let obs = observability_matrix(sys, depth);
    let toe = toeplitz_markov(sys, depth);
    let lm = depth * m;
    let mut basis = DMatrix::zeros(lm + depth * p, lm + n);
    basis.view_mut((0, 0), (lm, lm)).fill_with_identity();
    basis.view_mut((lm, 0), (depth * p, lm)).copy_from(&toe);
    basis.view_mut((lm, lm), (depth * p, n)).copy_from(&obs);
    let dim = lm + numkit::rank_report(&obs, rtol)?.rank;
    Ok(BehaviorBasis { depth, basis, dim })
}

/// Initial state that best explains `y` under input `u`, with the relative
/// residual of the fit. A residual near machine precision means `(u, y)` is
/// a trajectory of `sys`.
pub fn fit_initial_state(sys: &StateSpaceSystem, u: &Signal, y: &Signal, rtol: f64) -> Result<(DVector<f64>, f64)> {
    if y.dim() != sys.p() || u.len() != y.len() {
        return Err(Error::dims(format!(
            "output of dim {} and length {} does not match p = {} and T = {}",
            y.dim(),
            y.len(),
            sys.p(),
            u.len()
        )));
    }
    let forced = simulate(sys, &DVector::zeros(sys.n()), u)?;
    let target = signals::stack(y) - signals::stack(&forced.y);
    let obs = observability_matrix(sys, u.len());
    let x0 = numkit::least_squares(&obs, &target, rtol)?;
    let residual = (&obs * &x0 - &target).amax();
    let scale = 1.0 + y.max_abs() + forced.y.max_abs() + (&obs * &x0).amax();
    Ok((x0, residual / scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::DEFAULT_RTOL;

    fn example1() -> StateSpaceSystem {
        StateSpaceSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn zero_input_zero_state_stays_zero() {
        let sys = example1();
        let tr = simulate(&sys, &DVector::zeros(2), &Signal::zeros(1, 5).unwrap()).unwrap();
        assert_eq!(tr.x.len(), 6);
        assert!(tr.x.max_abs() == 0.0 && tr.y.max_abs() == 0.0);
    }

    #[test]
    fn integrator_counts_steps() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = StateSpaceSystem::new(one.clone(), one.clone(), one, DMatrix::zeros(1, 1)).unwrap();
        let tr = simulate(&sys, &DVector::zeros(1), &Signal::scalar(&[1.0; 6]).unwrap()).unwrap();
        for t in 0..=6 {
            assert_eq!(tr.x.sample(t)[0], t as f64);
        }
    }

    #[test]
    fn simulate_rejects_mismatch() {
        let sys = example1();
        assert!(simulate(&sys, &DVector::zeros(3), &Signal::zeros(1, 2).unwrap()).is_err());
        assert!(simulate(&sys, &DVector::zeros(2), &Signal::zeros(2, 2).unwrap()).is_err());
    }

    #[test]
    fn controllability_examples() {
        let sys = example1();
        assert!(is_controllable(sys.a(), sys.b(), DEFAULT_RTOL).unwrap().0);
        let (ok, r) =
            is_controllable(&DMatrix::identity(2, 2), &DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), DEFAULT_RTOL)
                .unwrap();
        assert!(!ok);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn large_jordan_block_is_controllable_from_last_basis_vector() {
        let a = jordan_block(9, 3.0);
        let mut b = DMatrix::zeros(9, 1);
        b[(8, 0)] = 1.0;
        assert!(is_controllable(&a, &b, DEFAULT_RTOL).unwrap().0);
    }

    #[test]
    fn cyclicity() {
        for n in 1..6 {
            assert!(is_cyclic(&jordan_block(n, -0.5), DEFAULT_RTOL, 0).unwrap().is_some());
        }
        assert!(is_cyclic(&DMatrix::identity(2, 2), DEFAULT_RTOL, 0).unwrap().is_none());
        assert!(is_cyclic(&DMatrix::zeros(1, 1), DEFAULT_RTOL, 0).unwrap().is_some());
    }

    #[test]
    fn behavior_of_example1_fills_the_plane() {
        let bb = behavior_basis(&example1(), 1, DEFAULT_RTOL).unwrap();
        assert_eq!(bb.basis.shape(), (2, 3));
        assert_eq!(bb.dim, 2);
        assert_eq!(numkit::rank_report(&bb.basis, DEFAULT_RTOL).unwrap().rank, 2);
    }

    #[test]
    fn behavior_without_output_coupling() {
        let sys = StateSpaceSystem::new(
            jordan_block(3, 0.5),
            DMatrix::from_element(3, 2, 1.0),
            DMatrix::zeros(2, 3),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        for depth in 1..4 {
            assert_eq!(behavior_basis(&sys, depth, DEFAULT_RTOL).unwrap().dim, depth * 2);
        }
    }

    #[test]
    fn behavior_basis_layout() {
        let sys = StateSpaceSystem::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::from_element(1, 1, 5.0),
            DMatrix::from_element(1, 1, 7.0),
        )
        .unwrap();
        let bb = behavior_basis(&sys, 2, DEFAULT_RTOL).unwrap();
        // u0, u1, x0 columns; rows u0, u1, y0, y1
        let expected = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 7.0, 0.0, 5.0, 15.0, 7.0, 10.0]);
        assert_eq!(bb.basis, expected);
        assert_eq!(bb.dim, 3);
    }

    #[test]
    fn initial_state_recovered() {
        let sys = example1();
        let u = Signal::scalar(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        let x0 = DVector::from_row_slice(&[1.5, -0.25]);
        let tr = simulate(&sys, &x0, &u).unwrap();
        let (fit, res) = fit_initial_state(&sys, &u, &tr.y, DEFAULT_RTOL).unwrap();
        assert!((fit - x0).amax() < 1e-12);
        assert!(res < 1e-14);
        let bad = Signal::scalar(&[0.0, 0.0, 1.0, 5.0]).unwrap();
        assert!(fit_initial_state(&sys, &u, &bad, DEFAULT_RTOL).unwrap().1 > 1e-3);
    }

    #[test]
    fn system_json_layout() {
        let json = serde_json::to_string(&example1()).unwrap();
        assert_eq!(
            json,
            r#"{"n":2,"m":1,"p":1,"A":[[0.0,1.0],[0.0,0.0]],"B":[[0.0],[1.0]],"C":[[1.0,0.0]],"D":[[0.0]]}"#
        );
        let back: StateSpaceSystem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, example1());
        assert!(serde_json::from_str::<StateSpaceSystem>(
            r#"{"n":3,"m":1,"p":1,"A":[[0.0,1.0],[0.0,0.0]],"B":[[0.0],[1.0]],"C":[[1.0,0.0]],"D":[[0.0]]}"#
        )
        .is_err());
    }
}
