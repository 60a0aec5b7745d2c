//! Spectra of the population maps.
//!
//! Both the one-collision stochastic matrix `Lambda_d` and the continuous
//! generator `L_d` are tridiagonal with off-diagonal products of one sign, so
//! they are similar to symmetric tridiagonal matrices. Their numeric spectra
//! come from Sturm-sequence bisection on that symmetric form.

use thiserror::Error;

use crate::models::gibbs_populations_from_pa;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("population deviation must sum to zero (sum = {sum:e})")]
    SumNotZero { sum: f64 },
    #[error("slow-mode vectors are singular at p_A = {p_a}")]
    DegenerateTemperature { p_a: f64 },
    #[error("slow-mode amplitude {amplitude:e} does not exceed 2*epsilon = {threshold:e}")]
    AmplitudeTooSmall { amplitude: f64, threshold: f64 },
    #[error("populations are frozen at J*tau = {j_tau}")]
    FrozenDynamics { j_tau: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Real tridiagonal matrix. `lower[i]` is entry `(i+1, i)` and `upper[i]` is
/// entry `(i, i+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    /// Uniform bands with separate corner entries. For `d = 2` the two corners
    /// are the whole diagonal.
    pub fn banded(d: usize, lower: T, diag: T, upper: T, first: T, last: T) -> Self {
        assert!(d >= 2, "tridiagonal population maps need d >= 2");
        let mut dg = vec![diag; d];
        dg[0] = first;
        dg[d - 1] = last;
        Self {
            lower: vec![lower; d - 1],
            diag: dg,
            upper: vec![upper; d - 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.lower[j]
        } else if j == i + 1 {
            self.upper[i]
        } else {
            T::zero()
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length must match matrix dimension");
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.upper[j - 1];
                }
                if j + 1 < n {
                    s += self.lower[j];
                }
                s
            })
            .collect()
    }

    /// Eigenvalues, descending.
    ///
    /// Requires `lower[i] * upper[i] >= 0`; the spectrum then equals that of the
    /// symmetric matrix with off-diagonals `sqrt(lower[i] * upper[i])`.
    pub fn eigenvalues(&self) -> Result<Vec<T>, SpectralError> {
        let off: Vec<T> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                let prod = l * u;
                if prod < -T::tol(1e-14) * (l.abs() + u.abs()).max(T::one()) {
                    Err(SpectralError::InvalidArgument(format!(
                        "off-diagonal product {prod} is negative"
                    )))
                } else {
                    Ok(prod.max(T::zero()).sqrt())
                }
            })
            .collect::<Result<_, _>>()?;
        let mut ev = sturm_bisection(&self.diag, &off);
        ev.reverse();
        Ok(ev)
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(a, b)` below `x`.
fn sturm_count<T: Real>(a: &[T], b: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = a[0] - x;
    for i in 0..a.len() {
        if i > 0 {
            q = a[i] - x - b[i - 1] * b[i - 1] / q;
        }
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending.
fn sturm_bisection<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len();
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for i in 0..n {
        let r = if i > 0 { b[i - 1].abs() } else { T::zero() }
            + if i + 1 < n { b[i].abs() } else { T::zero() };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    let pad = (hi - lo).abs().max(T::one()) * T::epsilon() * T::lit(4.0);
    lo -= pad;
    hi += pad;
    (0..n)
        .map(|k| {
            let (mut l, mut h) = (lo, hi);
            for _ in 0..400 {
                let mid = (l + h) * T::lit(0.5);
                if mid <= l || mid >= h {
                    break;
                }
                if sturm_count(a, b, mid) > k {
                    h = mid;
                } else {
                    l = mid;
                }
            }
            (l + h) * T::lit(0.5)
        })
        .collect()
}

/// `theta = sqrt(p_A (1 - p_A))`.
pub fn theta<T: Real>(p_a: T) -> T {
    (p_a * (T::one() - p_a)).max(T::zero()).sqrt()
}

/// `(lambda_+, lambda_-) = (cos^2 J tau, sin^2 J tau)`.
pub fn lambda_pm<T: Real>(j_tau: T) -> (T, T) {
    let (s, c) = j_tau.sin_cos();
    (c * c, s * s)
}

/// One-collision population map.
pub fn stochastic_matrix<T: Real>(d: usize, p_a: T, j_tau: T) -> Tridiagonal<T> {
    let one = T::one();
    let half = T::lit(0.5);
    let c2 = (T::lit(2.0) * j_tau).cos();
    let eta11 = half * ((one + p_a) + (one - p_a) * c2);
    let eta12 = half * p_a * (one - c2);
    let eta21 = half * (one - p_a) * (one - c2);
    let eta22 = half * (one + c2);
    let eta33 = one - half * p_a * (one - c2);
    Tridiagonal::banded(d, eta21, eta22, eta12, eta11, eta33)
}

/// Generator of the continuous population dynamics with rate `gamma`.
pub fn liouvillian_matrix<T: Real>(d: usize, p_a: T, gamma: T) -> Tridiagonal<T> {
    let one = T::one();
    Tridiagonal::banded(
        d,
        gamma * (one - p_a),
        -gamma,
        gamma * p_a,
        -gamma * (one - p_a),
        -gamma * p_a,
    )
}

fn mode_cosines<T: Real>(d: usize) -> impl Iterator<Item = T> {
    (2..=d).map(move |m| (T::count(m - 1) * T::PI() / T::count(d)).cos())
}

/// Closed-form spectrum of [`stochastic_matrix`]: `xi_1 = 1` then
/// `xi_m = lambda_+ + 2 theta lambda_- cos((m-1) pi / d)`.
pub fn xi_closed<T: Real>(d: usize, p_a: T, j_tau: T) -> Vec<T> {
    let (lp, lm) = lambda_pm(j_tau);
    let th = theta(p_a);
    std::iter::once(T::one())
        .chain(mode_cosines(d).map(|c| lp + T::lit(2.0) * th * lm * c))
        .collect()
}

/// Closed-form spectrum of [`liouvillian_matrix`]: `0` then
/// `-gamma (1 - 2 theta cos((m-1) pi / d))`.
pub fn lambda_closed<T: Real>(d: usize, p_a: T, gamma: T) -> Vec<T> {
    let th = theta(p_a);
    std::iter::once(T::zero())
        .chain(mode_cosines(d).map(|c| -gamma * (T::one() - T::lit(2.0) * th * c)))
        .collect()
}

pub fn xi_numeric<T: Real>(d: usize, p_a: T, j_tau: T) -> Result<Vec<T>, SpectralError> {
    stochastic_matrix(d, p_a, j_tau).eigenvalues()
}

pub fn lambda_numeric<T: Real>(d: usize, p_a: T, gamma: T) -> Result<Vec<T>, SpectralError> {
    liouvillian_matrix(d, p_a, gamma).eigenvalues()
}

/// Slow-mode decomposition of a three-level population deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowModeSummary<T> {
    pub theta: T,
    /// Projection onto the slow right eigenvector `v_2`.
    pub alpha2: T,
    /// Weight of the fast eigenvector `v_3`.
    pub alpha3: T,
    /// Long-time amplitude in the continuous limit.
    pub c_amplitude: T,
    /// Long-time amplitude of the discrete map.
    pub k_amplitude: T,
}

fn check_three_level<T: Real>(delta_p0: &[T], p_a: T) -> Result<(), SpectralError> {
    if delta_p0.len() != 3 {
        return Err(SpectralError::InvalidArgument(format!(
            "slow-mode analysis is for three levels, got {}",
            delta_p0.len()
        )));
    }
    let s: T = delta_p0.iter().copied().sum();
    if s.abs() > T::tol(1e-12) {
        return Err(SpectralError::SumNotZero {
            sum: s.to_f64_lossy(),
        });
    }
    if p_a == T::one() || p_a == T::lit(0.5) {
        return Err(SpectralError::DegenerateTemperature {
            p_a: p_a.to_f64_lossy(),
        });
    }
    if !(p_a > T::lit(0.5) && p_a < T::one()) {
        return Err(SpectralError::InvalidArgument(format!(
            "p_A = {p_a} outside (1/2, 1)"
        )));
    }
    Ok(())
}

/// Right eigenvector of the slow mode, normalized to a unit last entry.
pub fn slow_right_vector<T: Real>(p_a: T) -> [T; 3] {
    let th = theta(p_a);
    let q = T::one() - p_a;
    [-th / q, (th - q) / q, T::one()]
}

/// Right eigenvector of the fast mode, normalized to a unit last entry.
pub fn fast_right_vector<T: Real>(p_a: T) -> [T; 3] {
    let th = theta(p_a);
    let q = T::one() - p_a;
    [th / q, (-th - q) / q, T::one()]
}

/// Left eigenvector dual to [`slow_right_vector`].
pub fn slow_left_vector<T: Real>(p_a: T) -> [T; 3] {
    let th = theta(p_a);
    let q = T::one() - p_a;
    let k = T::one() / (T::lit(2.0) * (T::one() - th));
    [-(q * th) / p_a * k, (-q + th) * k, p_a * k]
}

pub fn slow_mode_projection<T: Real>(
    delta_p0: &[T],
    p_a: T,
) -> Result<SlowModeSummary<T>, SpectralError> {
    check_three_level(delta_p0, p_a)?;
    let th = theta(p_a);
    let u2 = slow_left_vector(p_a);
    let alpha2 = u2.iter().zip(delta_p0).map(|(&u, &x)| u * x).sum::<T>();
    let alpha3 = delta_p0[2] - alpha2;
    let p2_star = gibbs_populations_from_pa(3, p_a)[1];
    let q = T::one() - p_a;
    let one = T::one();
    let c_amplitude = alpha2.abs()
        * (p2_star.abs() + ((th - one + p_a) / q).abs() + ((p_a - one - th) / q).abs());
    let k_amplitude =
        alpha2.abs() * (p2_star.abs() + (-one + p_a / th).abs() + (-one - p_a / th).abs());
    Ok(SlowModeSummary {
        theta: th,
        alpha2,
        alpha3,
        c_amplitude,
        k_amplitude,
    })
}

/// Continuous-limit simulation time from the slow mode alone:
/// `T = -ln(2 eps / C) / (gamma (1 - theta))`.
pub fn tsim_estimate_sl<T: Real>(
    delta_p0: &[T],
    p_a: T,
    gamma: T,
    epsilon: T,
) -> Result<T, SpectralError> {
    if !(gamma > T::zero()) {
        return Err(SpectralError::InvalidArgument(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let s = slow_mode_projection(delta_p0, p_a)?;
    let threshold = T::lit(2.0) * epsilon;
    if s.c_amplitude <= threshold {
        return Err(SpectralError::AmplitudeTooSmall {
            amplitude: s.c_amplitude.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    Ok(-(threshold / s.c_amplitude).ln() / (gamma * (T::one() - s.theta)))
}

/// Discrete collision count from the slow mode: `ln(2 eps / K) / ln xi_2`.
pub fn nstar_estimate_discrete<T: Real>(
    delta_p0: &[T],
    p_a: T,
    j_tau: T,
    epsilon: T,
) -> Result<T, SpectralError> {
    let (lp, lm) = lambda_pm(j_tau);
    if lm <= T::tol(1e-14) {
        return Err(SpectralError::FrozenDynamics {
            j_tau: j_tau.to_f64_lossy(),
        });
    }
    let s = slow_mode_projection(delta_p0, p_a)?;
    let threshold = T::lit(2.0) * epsilon;
    if s.k_amplitude <= threshold {
        return Err(SpectralError::AmplitudeTooSmall {
            amplitude: s.k_amplitude.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    let xi2 = lp + s.theta * lm;
    Ok((threshold / s.k_amplitude).ln() / xi2.ln())
}

/// Stationary `c_13` of the continuous dynamics with counter-rotating terms:
/// `(3/2) gamma12 / (gamma1 + gamma2) (2 p2 - p1 - p3)`.
pub fn c13_steady_state<T: Real>(
    gamma1: T,
    gamma2: T,
    gamma12: T,
    p_star: [T; 3],
) -> Result<T, SpectralError> {
    let g = gamma1 + gamma2;
    if !(g > T::zero()) {
        return Err(SpectralError::InvalidArgument(
            "gamma1 + gamma2 must be positive".into(),
        ));
    }
    Ok(T::lit(1.5) * gamma12 / g * (T::lit(2.0) * p_star[1] - p_star[0] - p_star[2]))
}
