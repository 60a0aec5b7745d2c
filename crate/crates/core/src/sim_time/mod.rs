//! Cost of thermal state preparation: the simulated minimal collision count,
//! zero-temperature closed forms through Lambert W, and numerical solvers for
//! the general-`d` transcendental conditions.

pub mod lambert;

use thiserror::Error;

use crate::collision::{CollisionConfig, CollisionError, Path, Stepper};
use crate::linalg::DensityMatrix;
use crate::models::Model;
use crate::scalar::{binomial_real, Real};
use crate::spectral::lambda_pm;

pub use lambert::{lambert_w, residual_tolerance, LambertBranch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimTimeError {
    #[error("z = {z:e} is outside the domain of the {branch:?} Lambert branch")]
    OutOfDomain { z: f64, branch: LambertBranch },
    #[error("epsilon = {epsilon:e} is too large for the closed form (bound {bound:e})")]
    EpsilonTooLarge { epsilon: f64, bound: f64 },
    #[error("populations are frozen at J*tau = {j_tau}")]
    FrozenDynamics { j_tau: f64 },
    #[error("J*tau = {j_tau} gives a full swap each collision; the count is exact")]
    InstantCase { j_tau: f64 },
    #[error("no root below the cap {cap:e}")]
    NoRootBelowCap { cap: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Collision(#[from] CollisionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Discrete,
    ContinuousSL,
}

/// Minimal collision count, or `Unreachable` when the cap ran out first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NStar {
    Reached(usize),
    Unreachable,
}

impl NStar {
    pub fn value(self) -> Option<usize> {
        match self {
            NStar::Reached(n) => Some(n),
            NStar::Unreachable => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalizationResult<T> {
    pub n_star: NStar,
    /// `n* tau`, or `n_max tau` when unreachable.
    pub t_sim: T,
    /// Distance at `n*`, or after the last collision when unreachable.
    pub final_distance: T,
    pub mode: Mode,
    /// Collisions actually applied.
    pub collisions_run: usize,
}

/// Smallest `n <= n_max` with trace distance to the target Gibbs state at most
/// `epsilon`.
pub fn nstar_simulated<T: Real>(
    rho0: &DensityMatrix<T>,
    model: &Model<T>,
    cfg: &CollisionConfig<T>,
    path: Path,
) -> Result<ThermalizationResult<T>, SimTimeError> {
    let target = model.target_populations();
    let mut stepper = Stepper::new(rho0, model, cfg.tau, path)?;
    let mut dist = stepper.distance_to_diagonal(&target)?;
    let mut n = 0;
    loop {
        if dist <= cfg.epsilon {
            return Ok(ThermalizationResult {
                n_star: NStar::Reached(n),
                t_sim: T::count(n) * cfg.tau,
                final_distance: dist,
                mode: Mode::Discrete,
                collisions_run: n,
            });
        }
        if n == cfg.n_max {
            return Ok(ThermalizationResult {
                n_star: NStar::Unreachable,
                t_sim: T::count(n) * cfg.tau,
                final_distance: dist,
                mode: Mode::Discrete,
                collisions_run: n,
            });
        }
        stepper.step()?;
        n += 1;
        dist = stepper.distance_to_diagonal(&target)?;
    }
}

/// A real-valued collision count together with its ceiling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountEstimate<T> {
    pub value: T,
    pub ceiled: usize,
}

impl<T: Real> CountEstimate<T> {
    fn new(value: T) -> Self {
        let v = value.max(T::zero());
        Self {
            value,
            ceiled: v.ceil().to_usize().unwrap_or(usize::MAX),
        }
    }
}

fn check_probabilities<T: Real>(p0: &[T], d_min: usize) -> Result<(), SimTimeError> {
    if p0.len() < d_min {
        return Err(SimTimeError::InvalidArgument(format!(
            "need at least {d_min} populations, got {}",
            p0.len()
        )));
    }
    if p0.iter().any(|&x| !(x >= T::zero())) {
        return Err(SimTimeError::InvalidArgument(
            "populations must be nonnegative".into(),
        ));
    }
    Ok(())
}

fn check_epsilon<T: Real>(epsilon: T) -> Result<(), SimTimeError> {
    if !(epsilon > T::zero()) {
        return Err(SimTimeError::InvalidArgument(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    Ok(())
}

/// `lambda_- ~ 0`: no population moves.
fn frozen<T: Real>(lm: T) -> bool {
    lm <= T::tol(1e-14)
}

/// `lambda_+ ~ 0`: every collision is a full swap.
fn instant<T: Real>(lp: T) -> bool {
    lp <= T::tol(1e-14)
}

/// Zero-temperature three-level collision count through the `W_{-1}` branch:
///
/// `n* = -(lambda_+/lambda_-)(p2 + p3)/p3 + W_{-1}(z) / ln lambda_+`, with
/// `z = ln(lambda_+) lambda_+ eps / (lambda_- p3) * lambda_+^{lambda_+ (p2+p3) / (lambda_- p3)}`.
pub fn nstar_closed_d3_zero_t<T: Real>(
    p0: [T; 3],
    j_tau: T,
    epsilon: T,
) -> Result<CountEstimate<T>, SimTimeError> {
    check_probabilities(&p0, 3)?;
    check_epsilon(epsilon)?;
    let (lp, lm) = lambda_pm(j_tau);
    if frozen(lm) {
        return Err(SimTimeError::FrozenDynamics {
            j_tau: j_tau.to_f64_lossy(),
        });
    }
    if instant(lp) {
        return Err(SimTimeError::InstantCase {
            j_tau: j_tau.to_f64_lossy(),
        });
    }
    let [_, p2, p3] = p0;
    if p2 + p3 <= epsilon {
        return Ok(CountEstimate::new(T::zero()));
    }
    let ln_lp = lp.ln();
    if p3 <= T::tol(1e-14) {
        return Ok(CountEstimate::new((epsilon / p2).ln() / ln_lp));
    }
    let a = lp * (p2 + p3) / (lm * p3);
    let z = ln_lp * lp * epsilon / (lm * p3) * (a * ln_lp).exp();
    let inv_e = (-T::one()).exp();
    if z < -inv_e {
        // the bound on epsilon where z reaches the branch point
        let bound = -inv_e * lm * p3 / (ln_lp * lp) / (a * ln_lp).exp();
        return Err(SimTimeError::EpsilonTooLarge {
            epsilon: epsilon.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    let w = lambert_w(LambertBranch::LowerMinusOne, z)?;
    Ok(CountEstimate::new(-a + w / ln_lp))
}

/// Zero-temperature three-level continuous-limit simulation time:
///
/// `T = -(1/gamma) [1 + p2/p3 + W_{-1}(-(eps/p3) e^{-(1 + p2/p3)})]`.
pub fn tsim_closed_sl_zero_t<T: Real>(p0: [T; 3], gamma: T, epsilon: T) -> Result<T, SimTimeError> {
    check_probabilities(&p0, 3)?;
    check_epsilon(epsilon)?;
    if !(gamma > T::zero()) {
        return Err(SimTimeError::InvalidArgument(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let [_, p2, p3] = p0;
    if p2 + p3 <= epsilon {
        return Ok(T::zero());
    }
    if p3 <= T::tol(1e-14) {
        return Ok((p2 / epsilon).ln() / gamma);
    }
    let r = p2 / p3;
    let bound = p3 * r.exp();
    if epsilon > bound {
        return Err(SimTimeError::EpsilonTooLarge {
            epsilon: epsilon.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    let z = -(epsilon / p3) * (-(T::one() + r)).exp();
    let w = lambert_w(LambertBranch::LowerMinusOne, z)?;
    Ok(-(T::one() + r + w) / gamma)
}

/// Tail sums `S_j = sum_{i >= j+2} p_i` (one-based levels) for `j = 0..d-2`.
fn tail_sums<T: Real>(p0: &[T]) -> Vec<T> {
    let d = p0.len();
    (0..d - 1)
        .map(|j| p0[j + 1..].iter().copied().sum())
        .collect()
}

/// Finds the crossing of a function that starts above `epsilon` and
/// eventually decreases below it: doubling from `start`, then bisection.
fn bracket_and_bisect<T: Real>(
    f: impl Fn(T) -> T,
    epsilon: T,
    start: T,
    cap: T,
) -> Result<T, SimTimeError> {
    let mut lo = T::zero();
    let mut hi = start;
    while f(hi) > epsilon {
        lo = hi;
        hi *= T::lit(2.0);
        if hi > cap {
            if f(cap) > epsilon {
                return Err(SimTimeError::NoRootBelowCap {
                    cap: cap.to_f64_lossy(),
                });
            }
            hi = cap;
        }
    }
    for _ in 0..300 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi || hi - lo <= T::epsilon() * T::lit(4.0) * hi.max(T::one()) {
            break;
        }
        if f(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

/// Default cap for the transcendental solvers.
pub const DEFAULT_SOLVER_CAP: f64 = 1e12;

/// Zero-temperature collision count for any `d`: the root of
/// `lambda_+^n sum_j C(n, j) (lambda_-/lambda_+)^j S_j = eps`.
pub fn nstar_general_zero_t_solve<T: Real>(
    p0: &[T],
    j_tau: T,
    epsilon: T,
    cap: T,
) -> Result<CountEstimate<T>, SimTimeError> {
    check_probabilities(p0, 2)?;
    check_epsilon(epsilon)?;
    let (lp, lm) = lambda_pm(j_tau);
    if frozen(lm) {
        return Err(SimTimeError::FrozenDynamics {
            j_tau: j_tau.to_f64_lossy(),
        });
    }
    let s = tail_sums(p0);
    if instant(lp) {
        // each collision lowers every level by one: after n collisions only
        // the weight that started at levels >= n + 2 is left above the ground
        let n = (0..=s.len())
            .find(|&n| s.get(n).copied().unwrap_or(T::zero()) <= epsilon)
            .unwrap_or(s.len());
        return Ok(CountEstimate::new(T::count(n)));
    }
    if s[0] <= epsilon {
        return Ok(CountEstimate::new(T::zero()));
    }
    let ratio = lm / lp;
    let ln_lp = lp.ln();
    let f = |n: T| -> T {
        let poly = s.iter().enumerate().fold(T::zero(), |acc, (j, &sj)| {
            acc + binomial_real(n, j) * ratio.powi(j as i32) * sj
        });
        (n * ln_lp).exp() * poly
    };
    bracket_and_bisect(f, epsilon, T::one(), cap).map(CountEstimate::new)
}

/// Zero-temperature continuous-limit simulation time for any `d`: the root of
/// `e^{-gamma T} sum_k (gamma T)^k / k! S_k = eps`.
pub fn tsim_general_sl_zero_t_solve<T: Real>(
    p0: &[T],
    gamma: T,
    epsilon: T,
    cap: T,
) -> Result<T, SimTimeError> {
    check_probabilities(p0, 2)?;
    check_epsilon(epsilon)?;
    if !(gamma > T::zero()) {
        return Err(SimTimeError::InvalidArgument(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let s = tail_sums(p0);
    if s[0] <= epsilon {
        return Ok(T::zero());
    }
    let g = |t: T| -> T {
        let x = gamma * t;
        let mut term = T::one();
        let mut acc = T::zero();
        for (k, &sk) in s.iter().enumerate() {
            if k > 0 {
                term = term * x / T::count(k);
            }
            acc += term * sk;
        }
        (-x).exp() * acc
    };
    bracket_and_bisect(g, epsilon, T::one() / gamma, cap)
}
