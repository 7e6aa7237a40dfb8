//! Numerical checks of the two conclusions of the fundamental lemma (the
//! input-state rank condition and equality of the data span with the
//! restricted behavior), and the universality verdict.
//!
//! An input is universal for depth `L` exactly when it is persistently
//! exciting of order `n + L`. When it is not, the verdict carries a verified
//! counterexample built by [`crate::adversary`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, Certificate, CertificateOptions, OutputCounterexample};
use crate::error::{Error, Result};
use crate::lti::{self, StateSpaceSystem};
use crate::numkit::{self, RankReport, SpanComparison};
use crate::signals::{self, PeReport, Signal};

/// Largest relative residual accepted when validating that `(u, y)` is a
/// trajectory of the system.
pub const TRAJECTORY_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub depth: usize,
    /// Report on `[H_L(u); H_1(x_[0,T-L])]` for the reconstructed states.
    pub rank_condition: RankReport,
    pub rank_condition_holds: bool,
    pub behavior_equal: bool,
    /// Data span contained in the behavior; holds for every genuine trajectory.
    pub inclusion_holds: bool,
    pub data_span_dim: usize,
    pub behavior_dim: usize,
    pub trajectory_residual: f64,
}

/// `[top; bottom]`.
pub(crate) fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// `[H_L(u); H_1(x)]` where `x` covers `x(0) ..= x(T-L)`. `depth = 0` gives
/// `H_1(x)` alone.
pub fn input_state_matrix(u: &Signal, x: &Signal, depth: usize) -> Result<DMatrix<f64>> {
    if depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} exceeds input length {}", u.len())));
    }
    if x.len() != u.len() - depth + 1 {
        return Err(Error::dims(format!(
            "state window has {} samples, expected T - L + 1 = {}",
            x.len(),
            u.len() - depth + 1
        )));
    }
    let hx = signals::hankel_unchecked(x, 1);
    if depth == 0 {
        return Ok(hx);
    }
    Ok(vstack(&signals::hankel_unchecked(u, depth), &hx))
}

/// Rank report on `[H_L(u); H_1(x_[0,T-L])]`; the rank condition of the
/// fundamental lemma holds iff the rank is `n + L m`.
pub fn check_rank_condition(u: &Signal, x: &Signal, depth: usize, n: usize, rtol: f64) -> Result<RankReport> {
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    if x.dim() != n {
        return Err(Error::dims(format!("state dim {} but n = {n}", x.dim())));
    }
    numkit::rank_report(&input_state_matrix(u, x, depth)?, rtol)
}

/// Rank report on `H_1(x_[0,T])` for states one sample longer than `u`.
pub fn check_state_rank(u: &Signal, x: &Signal, n: usize, rtol: f64) -> Result<RankReport> {
    if x.dim() != n {
        return Err(Error::dims(format!("state dim {} but n = {n}", x.dim())));
    }
    if x.len() != u.len() + 1 {
        return Err(Error::dims(format!(
            "expected {} states for an input of length {}, got {}",
            u.len() + 1,
            u.len(),
            x.len()
        )));
    }
    numkit::rank_report(&signals::hankel_unchecked(x, 1), rtol)
}

/// Decides whether the depth-`L` data span equals the depth-`L` behavior.
///
/// `(u, y)` is first validated as a trajectory of `sys` by a least-squares
/// fit of the initial state.
pub fn check_behavior_equality(
    sys: &StateSpaceSystem,
    u: &Signal,
    y: &Signal,
    depth: usize,
    rtol: f64,
) -> Result<LemmaCheck> {
    if depth == 0 || depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} outside [1, {}]", u.len())));
    }
    if u.dim() != sys.m() {
        return Err(Error::dims(format!("input dim {} but m = {}", u.dim(), sys.m())));
    }
    let (x0, residual) = lti::fit_initial_state(sys, u, y, rtol)?;
    if residual > TRAJECTORY_RTOL {
        return Err(Error::NotATrajectory { residual });
    }
    let traj = lti::simulate(sys, &x0, u)?;
    let states = traj.x.window(0, u.len() - depth + 1)?;
    let rank_condition = check_rank_condition(u, &states, depth, sys.n(), rtol)?;

    let data = vstack(&signals::hankel(u, depth)?, &signals::hankel(y, depth)?);
    let basis = lti::behavior_basis(sys, depth, rtol)?;
    let SpanComparison { rank_x, rank_y, rank_joint } = numkit::compare_spans(&data, &basis.basis, rtol)?;
    let n_plus_lm = sys.n() + depth * sys.m();
    Ok(LemmaCheck {
        depth,
        rank_condition_holds: rank_condition.rank == n_plus_lm,
        rank_condition,
        behavior_equal: rank_x == rank_joint && rank_joint == rank_y,
        inclusion_holds: rank_joint == rank_y,
        data_span_dim: rank_x,
        behavior_dim: rank_y,
        trajectory_residual: residual,
    })
}

#[derive(Debug, Clone, Default)]
pub struct VerdictOptions {
    pub certificate: CertificateOptions,
    /// Output dimension of the output-level counterexample; 1 if unset.
    pub outputs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityVerdict {
    pub universal: bool,
    pub pe_order_needed: usize,
    pub pe_report: PeReport,
    pub certificate: Option<Certificate>,
    pub output_counterexample: Option<OutputCounterexample>,
}

/// Universal iff persistently exciting of order `n + L`; otherwise a
/// verified certificate and its output-level extension are attached.
pub fn universality_verdict(u: &Signal, n: usize, depth: usize, opts: &VerdictOptions) -> Result<UniversalityVerdict> {
    if n == 0 {
        return Err(Error::invalid("state dimension n must be positive"));
    }
    if depth == 0 || depth > u.len() {
        return Err(Error::invalid(format!("depth {depth} outside [1, {}]", u.len())));
    }
    let rtol = opts.certificate.rtol;
    let pe_report = signals::pe_order(u, rtol)?;
    let needed = n + depth;
    if pe_report.is_pe(needed) {
        return Ok(UniversalityVerdict {
            universal: true,
            pe_order_needed: needed,
            pe_report,
            certificate: None,
            output_counterexample: None,
        });
    }
    let cert = adversary::construct_certificate(u, n, depth, &opts.certificate)?;
    let output = adversary::extend_to_output(&cert, u, opts.outputs.unwrap_or(1), rtol)?;
    if output.behavior_check.behavior_equal {
        return Err(Error::ConstructionFailed("output counterexample did not break behavior equality".into()));
    }
    Ok(UniversalityVerdict {
        universal: false,
        pe_order_needed: needed,
        pe_report,
        certificate: Some(cert),
        output_counterexample: Some(output),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::DEFAULT_RTOL;
    use nalgebra::DVector;

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
    fn example1_behavior_is_recovered_for_one_system() {
        let u = Signal::scalar(&[1.0, 0.0, 0.0]).unwrap();
        for x0 in [[0.0, 0.0], [1.0, -2.0], [0.3, 7.0]] {
            let tr = lti::simulate(&example1(), &DVector::from_row_slice(&x0), &u).unwrap();
            let check = check_behavior_equality(&example1(), &u, &tr.y, 1, DEFAULT_RTOL).unwrap();
            assert!(check.behavior_equal && check.inclusion_holds);
            assert_eq!((check.data_span_dim, check.behavior_dim), (2, 2));
        }
    }

    #[test]
    fn zero_data_does_not_span_the_behavior() {
        let u = Signal::zeros(1, 6).unwrap();
        let y = Signal::zeros(1, 6).unwrap();
        let check = check_behavior_equality(&example1(), &u, &y, 2, DEFAULT_RTOL).unwrap();
        assert!(!check.behavior_equal);
        assert!(check.inclusion_holds);
        assert_eq!(check.data_span_dim, 0);
        assert_eq!(check.rank_condition.rank, 0);
    }

    #[test]
    fn garbage_output_is_rejected() {
        let u = Signal::scalar(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let y = Signal::scalar(&[0.0, 0.0, 1.0, 3.0]).unwrap();
        assert!(matches!(
            check_behavior_equality(&example1(), &u, &y, 1, DEFAULT_RTOL),
            Err(Error::NotATrajectory { .. })
        ));
    }

    #[test]
    fn rank_condition_shapes() {
        let u = Signal::scalar(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Signal::zeros(2, 3).unwrap();
        let r = check_rank_condition(&u, &x, 2, 2, DEFAULT_RTOL).unwrap();
        assert_eq!((r.rows, r.cols), (4, 3));
        assert!(check_rank_condition(&u, &Signal::zeros(2, 4).unwrap(), 2, 2, DEFAULT_RTOL).is_err());
        assert!(check_rank_condition(&u, &x, 2, 3, DEFAULT_RTOL).is_err());
    }

    #[test]
    fn zero_states_have_rank_zero() {
        let u = Signal::zeros(1, 4).unwrap();
        let r = check_state_rank(&u, &Signal::zeros(3, 5).unwrap(), 3, DEFAULT_RTOL).unwrap();
        assert_eq!(r.rank, 0);
    }

    #[test]
    fn depth_equal_to_length_is_well_defined() {
        let u = Signal::scalar(&[1.0, -1.0, 0.5]).unwrap();
        let tr = lti::simulate(&example1(), &DVector::from_row_slice(&[0.2, 0.1]), &u).unwrap();
        let check = check_behavior_equality(&example1(), &u, &tr.y, 3, DEFAULT_RTOL).unwrap();
        assert_eq!(check.data_span_dim, 1);
        assert!(!check.behavior_equal);
    }

    #[test]
    fn unit_pulse_is_not_universal() {
        let u = Signal::scalar(&[1.0, 0.0, 0.0]).unwrap();
        let v = universality_verdict(&u, 2, 1, &VerdictOptions::default()).unwrap();
        assert!(!v.universal);
        assert_eq!(v.pe_order_needed, 3);
        assert_eq!(v.pe_report.max_order, 1);
        let out = v.output_counterexample.unwrap();
        assert!(!out.behavior_check.behavior_equal);
        assert!(v.certificate.unwrap().rank_deficit_confirmed);
    }

    #[test]
    fn zero_input_is_not_universal() {
        for (n, depth) in [(1, 1), (2, 3), (3, 2)] {
            let v = universality_verdict(&Signal::zeros(2, 12).unwrap(), n, depth, &VerdictOptions::default()).unwrap();
            assert!(!v.universal);
            assert!(v.certificate.is_some());
        }
    }
}
