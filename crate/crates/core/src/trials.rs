//! Random generators and Monte Carlo harnesses.
//!
//! Each trial draws from its own `ChaCha8Rng` seeded with
//! [`exec::trial_seed`]`(master, index)`, so summaries are identical whether
//! trials run in parallel or one after another.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adversary::{self, CertificateOptions};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lemma;
use crate::lti::{self, StateSpaceSystem};
use crate::numkit::{self, DEFAULT_RTOL};
use crate::signals::{self, Signal};

/// Redraw threshold for the controllability matrix condition number.
pub const DEFAULT_COND_MAX: f64 = 1e8;
/// Tolerance on `|separation - 1|` for output counterexamples.
pub const SEPARATION_TOL: f64 = 1e-7;
/// Tolerance on the closed-form state replay.
pub const CLOSED_FORM_TOL: f64 = 1e-8;

const MAX_REDRAWS: usize = 1000;

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn gaussian_signal(rng: &mut impl Rng, dim: usize, len: usize) -> Signal {
    Signal::new(dim, (0..dim * len).map(|_| gaussian(rng)).collect()).expect("positive dim and len")
}

/// Gaussian system with spectral radius in `[0.3, 1.1]` whose
/// controllability matrix has condition number at most `cond_max`.
pub fn random_controllable_system(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    p: usize,
    cond_max: f64,
) -> Result<StateSpaceSystem> {
    for _ in 0..MAX_REDRAWS {
        let mut a = gaussian_matrix(rng, n, n);
        let radius = numkit::eigenvalues(&a)?.iter().fold(0.0, |r: f64, z| r.max(z.norm()));
        if radius > 0.0 {
            a *= rng.random_range(0.3..1.1) / radius;
        }
        let b = gaussian_matrix(rng, n, m);
        let cond = numkit::condition_number(&lti::controllability_matrix(&a, &b)?);
        if cond <= cond_max {
            return StateSpaceSystem::new(a, b, gaussian_matrix(rng, p, n), gaussian_matrix(rng, p, m));
        }
    }
    Err(Error::ConstructionFailed(format!(
        "no controllable draw with condition <= {cond_max:e} after {MAX_REDRAWS} attempts"
    )))
}

/// Length-`len` input whose depth-`order` Hankel matrix has a known left
/// kernel vector `eta` (returned unit-norm).
///
/// One pivot coordinate follows the recursion `eta^T [u(t); ...; u(t+order-1)] = 0`
/// with stable characteristic roots; every other coordinate is Gaussian.
pub fn non_pe_input(rng: &mut impl Rng, m: usize, order: usize, len: usize) -> (Signal, Vec<DVector<f64>>) {
    assert!(m >= 1 && order >= 1 && len >= 1);
    let pivot = rng.random_range(0..m);
    let mut eta: Vec<DVector<f64>> = (0..order).map(|_| DVector::from_fn(m, |_, _| gaussian(rng))).collect();
    eta[order - 1][pivot] = 1.0;
    // Pivot coefficients of lower powers sum to 0.8 in absolute value, which
    // keeps the roots of the pivot recursion inside the unit disk.
    let lower: f64 = eta[..order - 1].iter().map(|e| e[pivot].abs()).sum();
    if lower > 0.0 {
        for e in &mut eta[..order - 1] {
            e[pivot] *= 0.8 / lower;
        }
    }
    let mut data: Vec<f64> = (0..m * len).map(|_| gaussian(rng)).collect();
    for t in order - 1..len {
        let start = t + 1 - order;
        let mut acc = 0.0;
        for (i, e) in eta.iter().enumerate() {
            for (j, coeff) in e.iter().enumerate() {
                if i == order - 1 && j == pivot {
                    continue;
                }
                acc += coeff * data[(start + i) * m + j];
            }
        }
        data[t * m + pivot] = -acc;
    }
    let norm = eta.iter().map(|e| e.norm_squared()).sum::<f64>().sqrt();
    for e in &mut eta {
        *e /= norm;
    }
    (Signal::new(m, data).expect("finite recursion"), eta)
}

/// Strictly row diagonally dominant `n x n` matrix with diagonal entries of
/// magnitude in `[0.2, 1]`.
pub fn random_diagonally_dominant(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    for i in 0..n {
        let diag: f64 = rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        let budget = 0.9 * diag.abs() * rng.random_range(0.0..1.0);
        for j in 0..n {
            if j != i && off > 0.0 {
                a[(i, j)] *= budget / off;
            }
        }
        a[(i, i)] = diag;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    /// Hypothesis not met (for example the draw was not persistently
    /// exciting); counts neither as pass nor failure.
    pub vacuous: bool,
    pub failure: Option<String>,
    /// Largest closed-form replay residual, where applicable.
    pub closed_form: Option<f64>,
}

impl TrialOutcome {
    fn new(index: usize, seed: u64) -> Self {
        TrialOutcome { index, seed, vacuous: false, failure: None, closed_form: None }
    }

    fn fail(mut self, why: impl Into<String>) -> Self {
        self.failure = Some(why.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub passed: usize,
    pub vacuous: usize,
    pub failures: Vec<TrialOutcome>,
    pub worst_closed_form: Option<f64>,
}

impl TrialSummary {
    fn from_outcomes(outcomes: Vec<TrialOutcome>) -> Self {
        let trials = outcomes.len();
        let vacuous = outcomes.iter().filter(|o| o.vacuous).count();
        let worst_closed_form = outcomes
            .iter()
            .filter_map(|o| o.closed_form)
            .fold(None, |w: Option<f64>, r| Some(w.map_or(r, |w| w.max(r))));
        let failures: Vec<_> = outcomes.into_iter().filter(|o| o.failure.is_some()).collect();
        TrialSummary { trials, passed: trials - vacuous - failures.len(), vacuous, failures, worst_closed_form }
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn run<F>(count: usize, seed: u64, exec: Execution, trial: F) -> TrialSummary
where
    F: Fn(TrialOutcome, &mut ChaCha8Rng) -> TrialOutcome + Sync + Send,
{
    TrialSummary::from_outcomes(exec::map_indexed(exec, count, |i| {
        let s = exec::trial_seed(seed, i as u64);
        trial(TrialOutcome::new(i, s), &mut ChaCha8Rng::seed_from_u64(s))
    }))
}

/// Random controllable systems driven by Gaussian inputs of length
/// `(n+L)(m+1) - 1`: whenever the input is persistently exciting of order
/// `n + L`, the rank condition and behavior equality must both hold.
pub fn fundamental_lemma_trials(count: usize, seed: u64, exec: Execution) -> TrialSummary {
    run(count, seed, exec, |out, rng| {
        let (n, m, p, depth) =
            (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
        let sys = match random_controllable_system(rng, n, m, p, DEFAULT_COND_MAX) {
            Ok(s) => s,
            Err(e) => return out.fail(e.to_string()),
        };
        let u = gaussian_signal(rng, m, (n + depth) * (m + 1) - 1);
        let x0 = DVector::from_fn(n, |_, _| gaussian(rng));
        let checked = (|| {
            if !signals::is_pe_of_order(&u, n + depth, DEFAULT_RTOL)? {
                return Ok(None);
            }
            let y = lti::simulate(&sys, &x0, &u)?.y;
            lemma::check_behavior_equality(&sys, &u, &y, depth, DEFAULT_RTOL).map(Some)
        })();
        match checked {
            Ok(None) => TrialOutcome { vacuous: true, ..out },
            Ok(Some(c)) if c.rank_condition_holds && c.behavior_equal => out,
            Ok(Some(c)) => out.fail(format!(
                "n={n} m={m} p={p} L={depth}: rank {} of {}, data span {} vs behavior {}",
                c.rank_condition.rank,
                n + depth * m,
                c.data_span_dim,
                c.behavior_dim
            )),
            Err(e) => out.fail(format!("n={n} m={m} p={p} L={depth}: {e}")),
        }
    })
}

/// Non-PE inputs from [`non_pe_input`], longer than the minimal length:
/// the certificate must verify, the output extension must break behavior
/// equality with unit separation, and the closed-form states must match.
pub fn converse_trials(count: usize, seed: u64, exec: Execution) -> TrialSummary {
    run(count, seed, exec, |mut out, rng| {
        let (n, m, depth) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=4));
        let len = (n + depth) * (m + 1) - 1 + rng.random_range(0..=8);
        let (u, _) = non_pe_input(rng, m, n + depth, len);
        let opts = CertificateOptions { seed: out.seed, ..CertificateOptions::default() };
        let tag = format!("n={n} m={m} L={depth} T={len}");
        let cert = match adversary::construct_certificate(&u, n, depth, &opts) {
            Ok(c) => c,
            Err(e) => return out.fail(format!("{tag}: {e}")),
        };
        out.closed_form = Some(cert.residuals.closed_form);
        let mut problems = Vec::new();
        if !(cert.residuals.annihilation <= cert.residuals.annihilation_bound) {
            problems.push(format!("annihilation {:.3e}", cert.residuals.annihilation));
        }
        if !cert.controllable {
            problems.push("not controllable".to_string());
        }
        if !cert.rank_deficit_confirmed {
            problems.push("full rank".to_string());
        }
        if !(cert.residuals.closed_form <= CLOSED_FORM_TOL) {
            problems.push(format!("closed form {:.3e}", cert.residuals.closed_form));
        }
        match adversary::extend_to_output(&cert, &u, 1, DEFAULT_RTOL) {
            Ok(o) => {
                if o.behavior_check.behavior_equal {
                    problems.push("behavior equal".to_string());
                }
                if !((o.separation_value - 1.0).abs() <= SEPARATION_TOL) {
                    problems.push(format!("separation {}", o.separation_value));
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
        if problems.is_empty() {
            out
        } else {
            out.fail(format!("{tag}: {}", problems.join(", ")))
        }
    })
}

/// Depth-0 statements. The first `count` trials use inputs that are not PE
/// of order `n` and check the certificate; the next `count` use Gaussian
/// inputs that are, and check that the state matrix has full row rank.
pub fn depth_zero_trials(count: usize, seed: u64, exec: Execution) -> TrialSummary {
    run(2 * count, seed, exec, |out, rng| {
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let len = n * (m + 1) - 1 + rng.random_range(0..=6);
        let tag = format!("n={n} m={m} T={len}");
        if out.index < count {
            let (head, _) = non_pe_input(rng, m, n, len);
            let mut data = head.as_slice().to_vec();
            data.extend((0..m).map(|_| gaussian(rng)));
            let u = Signal::new(m, data).expect("finite");
            let opts = CertificateOptions { seed: out.seed, ..CertificateOptions::default() };
            let checked = adversary::construct_certificate_l0(&u, n, &opts).and_then(|cert| {
                let hx = signals::hankel(&cert.states, 1)?;
                let residual = (cert.w.transpose() * hx).norm();
                let bound = opts.tol_cert * (1.0 + cert.states.max_abs()) * u.max_abs().max(1.0) * (len + 1) as f64;
                Ok((residual, bound, cert.stacked_rank.rank))
            });
            match checked {
                Ok((r, b, rank)) if r <= b && rank < n => out,
                Ok((r, b, rank)) => out.fail(format!("{tag}: residual {r:.3e} (bound {b:.3e}), rank {rank}")),
                Err(e) => out.fail(format!("{tag}: {e}")),
            }
        } else {
            let checked = (|| {
                let sys = random_controllable_system(rng, n, m, 1, DEFAULT_COND_MAX)?;
                let u = gaussian_signal(rng, m, len);
                if !signals::is_pe_of_order(&u, n, DEFAULT_RTOL)? {
                    return Ok(None);
                }
                let x0 = DVector::from_fn(n, |_, _| gaussian(rng));
                let x = lti::simulate(&sys, &x0, &u)?.x;
                lemma::check_state_rank(&u, &x, n, DEFAULT_RTOL).map(Some)
            })();
            match checked {
                Ok(None) => TrialOutcome { vacuous: true, ..out },
                Ok(Some(r)) if r.full_row_rank => out,
                Ok(Some(r)) => out.fail(format!("{tag}: state rank {} < {n}", r.rank)),
                Err(e) => out.fail(format!("{tag}: {e}")),
            }
        }
    })
}

/// Single-input systems with diagonally dominant `A` whose spectrum is at
/// least 0.05 away from the root set: the family member must give
/// rank-deficient input-state data.
pub fn single_input_trials(count: usize, seed: u64, exec: Execution) -> TrialSummary {
    run(count, seed, exec, |out, rng| {
        let (n, depth) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let len = 2 * (n + depth) - 1 + rng.random_range(0..=6);
        let tag = format!("n={n} L={depth} T={len}");
        let (u, _) = non_pe_input(rng, 1, n + depth, len);
        let checked = (|| {
            let eta = adversary::select_eta(&u, n + depth, DEFAULT_RTOL)?;
            let lambda = numkit::lambda_set(&eta, DEFAULT_RTOL, numkit::DEFAULT_CLUSTER_RADIUS)?;
            let a = (0..MAX_REDRAWS)
                .map(|_| random_diagonally_dominant(rng, n))
                .find(|a| numkit::spectral_gap(a, &lambda).is_ok_and(|g| g > 0.05))
                .ok_or_else(|| Error::ConstructionFailed("no A away from the root set".into()))?;
            let b = loop {
                let b = DVector::from_fn(n, |_, _| gaussian(rng));
                if b.amax() > 1e-3 {
                    break b;
                }
            };
            let opts = CertificateOptions { seed: out.seed, ..CertificateOptions::default() };
            adversary::single_input_family(&u, n, depth, &a, &b, &opts)
        })();
        match checked {
            Ok(c) if c.rank_deficit_confirmed && c.stacked_rank.rank < n + depth => out,
            Ok(c) => out.fail(format!("{tag}: stacked rank {}", c.stacked_rank.rank)),
            Err(e) => out.fail(format!("{tag}: {e}")),
        }
    })
}
