//! Collision dynamics.
//!
//! Three routes are provided:
//!
//! * the exact map `rho -> Tr_A[U (rho (x) rho_A) U^dagger]` on the joint space;
//! * the population and coherence recursions, exact for the resonant flip-flop
//!   interaction and much cheaper;
//! * RK4 integration of the continuous (stroboscopic Lindblad) limit.
//!
//! Zero-temperature closed forms of the recursions live here as well.

use thiserror::Error;

use crate::linalg::{
    half_l1, kron, partial_trace_second, trace_distance_matrices, unitary_from_hamiltonian,
    ComplexMatrix, DensityMatrix, LinalgError,
};
use crate::models::{ancilla_thermal_state, Interaction, Model, ModelError};
use crate::scalar::{binomial_real, cis, cr, Real, C};
use crate::spectral::{lambda_pm, liouvillian_matrix, stochastic_matrix, Tridiagonal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("requested {requested} collisions but the cap is {n_max}")]
    CapExceeded { requested: usize, n_max: usize },
    #[error("population deviation must sum to zero (sum = {sum:e})")]
    SumNotZero { sum: f64 },
    #[error("step dt = {dt:e} too large for rate {gamma_max:e} (dt * rate must be <= 0.1)")]
    StepTooLarge { dt: f64, gamma_max: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Collision duration, cap and precision target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionConfig<T> {
    pub tau: T,
    pub n_max: usize,
    pub epsilon: T,
}

impl<T: Real> CollisionConfig<T> {
    pub fn new(tau: T, n_max: usize, epsilon: T) -> Result<Self, CollisionError> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(CollisionError::InvalidConfig(format!(
                "tau = {tau} must be positive"
            )));
        }
        if n_max == 0 {
            return Err(CollisionError::InvalidConfig(
                "n_max must be at least 1".into(),
            ));
        }
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(CollisionError::InvalidConfig(format!(
                "epsilon = {epsilon} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            tau,
            n_max,
            epsilon,
        })
    }
}

/// Population transfer rates of one resonant collision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaCoefficients<T> {
    pub eta11: T,
    pub eta12: T,
    pub eta21: T,
    pub eta22: T,
    pub eta33: T,
}

pub fn eta_coefficients<T: Real>(p_a: T, j_tau: T) -> EtaCoefficients<T> {
    let (one, half) = (T::one(), T::lit(0.5));
    let c2 = (T::lit(2.0) * j_tau).cos();
    EtaCoefficients {
        eta11: half * ((one + p_a) + (one - p_a) * c2),
        eta12: half * p_a * (one - c2),
        eta21: half * (one - p_a) * (one - c2),
        eta22: half * (one + c2),
        eta33: one - half * p_a * (one - c2),
    }
}

/// Coherence transfer factors of one resonant collision (three levels).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiCoefficients<T> {
    pub psi11: T,
    pub psi13: T,
    pub psi22: T,
    pub psi31: T,
    pub psi33: T,
}

pub fn psi_coefficients<T: Real>(p_a: T, j_tau: T) -> PsiCoefficients<T> {
    let (one, half, two) = (T::one(), T::lit(0.5), T::lit(2.0));
    let c2 = (two * j_tau).cos();
    let mu = j_tau.cos();
    PsiCoefficients {
        psi11: half * (one - p_a + two * p_a * mu + (one - p_a) * c2),
        psi13: half * p_a * (one - c2),
        psi22: mu,
        psi31: half * (one - p_a) * (one - c2),
        psi33: half * (p_a + two * (one - p_a) * mu + p_a * c2),
    }
}

/// Applies one collision to a population deviation from the fixed point.
pub fn step_populations_recursive<T: Real>(
    delta_p: &[T],
    p_a: T,
    j_tau: T,
) -> Result<Vec<T>, CollisionError> {
    let s: T = delta_p.iter().copied().sum();
    if s.abs() > T::tol(1e-12) {
        return Err(CollisionError::SumNotZero {
            sum: s.to_f64_lossy(),
        });
    }
    if delta_p.len() < 2 {
        return Err(CollisionError::InvalidConfig(
            "need at least two levels".into(),
        ));
    }
    Ok(stochastic_matrix(delta_p.len(), p_a, j_tau).mul_vec(delta_p))
}

/// One collision on the three-level coherences `(c12, c13, c23)`, where
/// `c_ij = rho[i-1][j-1]`.
pub fn step_coherences_d3<T: Real>(c: [C<T>; 3], p_a: T, j_tau: T, omega_tau: T) -> [C<T>; 3] {
    let psi = psi_coefficients(p_a, j_tau);
    step_coherences_with(&psi, cis(omega_tau), cis(T::lit(2.0) * omega_tau), c)
}

fn step_coherences_with<T: Real>(
    psi: &PsiCoefficients<T>,
    ph1: C<T>,
    ph2: C<T>,
    [c12, c13, c23]: [C<T>; 3],
) -> [C<T>; 3] {
    [
        ph1 * (c12 * psi.psi11 + c23 * psi.psi13),
        ph2 * (c13 * psi.psi22),
        ph1 * (c12 * psi.psi31 + c23 * psi.psi33),
    ]
}

/// Zero-temperature populations after `n` collisions in closed form.
pub fn zero_temp_populations_closed<T: Real>(p0: &[T], n: usize, j_tau: T) -> Vec<T> {
    if n == 0 {
        return p0.to_vec();
    }
    let d = p0.len();
    let (lp, lm) = lambda_pm(j_tau);
    let nf = T::count(n);
    let mut out = vec![T::zero(); d];
    // level d-k (one-based) for k = 0..d-2 collects from the levels above it
    for k in 0..d - 1 {
        let mut acc = T::zero();
        for j in 0..=k.min(n) {
            acc += binomial_real(nf, j)
                * lm.powi(j as i32)
                * lp.powi((n - j) as i32)
                * p0[d - 1 - k + j];
        }
        out[d - 1 - k] = acc;
    }
    let upper: T = out[1..].iter().copied().sum();
    out[0] = p0.iter().copied().sum::<T>() - upper;
    out
}

/// Which form of the `c12` solution was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeBranch {
    /// Two distinct decay factors `mu` and `lambda_+`.
    TwoMode,
    /// `lambda_+ = mu`; the secular limit `n lambda_- mu^{n-1}` applies.
    DegenerateLimit,
}

/// Zero-temperature three-level coherences after `n` collisions.
pub fn zero_temp_coherences_d3_closed<T: Real>(
    c0: [C<T>; 3],
    n: usize,
    j_tau: T,
    omega_tau: T,
) -> ([C<T>; 3], ModeBranch) {
    let [c12, c13, c23] = c0;
    let (lp, lm) = lambda_pm(j_tau);
    let mu = j_tau.cos();
    let nf = T::count(n);
    let ni = n as i32;
    let ph1 = cis(omega_tau * nf);
    let ph2 = cis(T::lit(2.0) * omega_tau * nf);
    let c13n = ph2 * c13 * mu.powi(ni);
    let c23n = ph1 * c23 * lp.powi(ni);
    let (c12n, branch) = if (lp - mu).abs() < T::tol(1e-12) {
        let lin = if n == 0 {
            cr(T::zero())
        } else {
            c23 * (nf * lm * mu.powi(ni - 1))
        };
        (ph1 * (c12 * mu.powi(ni) + lin), ModeBranch::DegenerateLimit)
    } else {
        let b = c23 * (lm / (lp - mu));
        (
            ph1 * ((c12 - b) * mu.powi(ni) + b * lp.powi(ni)),
            ModeBranch::TwoMode,
        )
    };
    ([c12n, c13n, c23n], branch)
}

/// Exact single-collision map with the unitary cached for deterministic
/// interactions.
#[derive(Clone, Debug)]
pub struct Collider<T> {
    model: Model<T>,
    tau: T,
    ancilla: ComplexMatrix<T>,
    unitary: Option<ComplexMatrix<T>>,
}

impl<T: Real> Collider<T> {
    pub fn new(model: &Model<T>, tau: T) -> Result<Self, CollisionError> {
        model.interaction.validate()?;
        let unitary = if model.interaction.is_random() {
            None
        } else {
            Some(unitary_from_hamiltonian(&model.total_hamiltonian(0), tau)?)
        };
        Ok(Self {
            model: *model,
            tau,
            ancilla: ancilla_thermal_state(&model.ancilla).into_matrix(),
            unitary,
        })
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    /// Collision unitary for the given collision index.
    pub fn unitary(&self, index: u64) -> Result<ComplexMatrix<T>, CollisionError> {
        match &self.unitary {
            Some(u) => Ok(u.clone()),
            None => Ok(unitary_from_hamiltonian(
                &self.model.total_hamiltonian(index),
                self.tau,
            )?),
        }
    }

    /// Applies collision number `index` (zero-based).
    pub fn collide(
        &self,
        rho: &DensityMatrix<T>,
        index: u64,
    ) -> Result<DensityMatrix<T>, CollisionError> {
        let d = self.model.d();
        if rho.dim() != d {
            return Err(LinalgError::DimensionMismatch {
                expected: d,
                found: rho.dim(),
            }
            .into());
        }
        let owned;
        let u = match &self.unitary {
            Some(u) => u,
            None => {
                owned = self.unitary(index)?;
                &owned
            }
        };
        let joint = kron(rho.matrix(), &self.ancilla);
        let evolved = &(u * &joint) * &u.dagger();
        let reduced = partial_trace_second(&evolved, d, 2)?;
        Ok(DensityMatrix::from_matrix_unchecked(reduced))
    }
}

/// One collision of `rho_s` with a fresh ancilla.
pub fn collide_once<T: Real>(
    rho_s: &DensityMatrix<T>,
    model: &Model<T>,
    cfg: &CollisionConfig<T>,
) -> Result<DensityMatrix<T>, CollisionError> {
    Collider::new(model, cfg.tau)?.collide(rho_s, 0)
}

/// How a trajectory is propagated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    /// Exact joint unitary every collision.
    BruteForce,
    /// Recursions where they are exact, the joint unitary otherwise.
    Recursion,
}

enum StepperKind<T> {
    Exact {
        collider: Collider<T>,
        rho: DensityMatrix<T>,
    },
    Populations {
        map: Tridiagonal<T>,
        p: Vec<T>,
    },
    Qutrit {
        map: Tridiagonal<T>,
        psi: PsiCoefficients<T>,
        ph1: C<T>,
        ph2: C<T>,
        p: Vec<T>,
        c: [C<T>; 3],
    },
}

/// Incremental trajectory propagator.
pub struct Stepper<T> {
    kind: StepperKind<T>,
    collisions: u64,
}

impl<T: Real> Stepper<T> {
    pub fn new(
        rho0: &DensityMatrix<T>,
        model: &Model<T>,
        tau: T,
        path: Path,
    ) -> Result<Self, CollisionError> {
        let d = model.d();
        if rho0.dim() != d {
            return Err(LinalgError::DimensionMismatch {
                expected: d,
                found: rho0.dim(),
            }
            .into());
        }
        let exact = |rho0: &DensityMatrix<T>| -> Result<StepperKind<T>, CollisionError> {
            Ok(StepperKind::Exact {
                collider: Collider::new(model, tau)?,
                rho: rho0.clone(),
            })
        };
        let kind = match (path, model.interaction) {
            (Path::Recursion, Interaction::IsotropicFlipFlop { j })
                if model.is_energy_conserving() =>
            {
                let j_tau = j * tau;
                let p_a = model.p_a();
                let map = stochastic_matrix(d, p_a, j_tau);
                let p = rho0.populations();
                if rho0.is_diagonal(T::zero()) {
                    StepperKind::Populations { map, p }
                } else if d == 3 {
                    let m = rho0.matrix();
                    let wt = model.system.omega * tau;
                    StepperKind::Qutrit {
                        map,
                        psi: psi_coefficients(p_a, j_tau),
                        ph1: cis(wt),
                        ph2: cis(T::lit(2.0) * wt),
                        p,
                        c: [m[(0, 1)], m[(0, 2)], m[(1, 2)]],
                    }
                } else {
                    exact(rho0)?
                }
            }
            _ => exact(rho0)?,
        };
        Ok(Self {
            kind,
            collisions: 0,
        })
    }

    /// Number of collisions applied so far.
    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    /// True when only populations are tracked.
    pub fn is_population_only(&self) -> bool {
        matches!(self.kind, StepperKind::Populations { .. })
    }

    pub fn step(&mut self) -> Result<(), CollisionError> {
        let index = self.collisions;
        match &mut self.kind {
            StepperKind::Exact { collider, rho } => {
                *rho = collider.collide(rho, index)?;
            }
            StepperKind::Populations { map, p } => {
                *p = map.mul_vec(p);
            }
            StepperKind::Qutrit {
                map,
                psi,
                ph1,
                ph2,
                p,
                c,
            } => {
                *p = map.mul_vec(p);
                *c = step_coherences_with(psi, *ph1, *ph2, *c);
            }
        }
        self.collisions += 1;
        Ok(())
    }

    pub fn populations(&self) -> Vec<T> {
        match &self.kind {
            StepperKind::Exact { rho, .. } => rho.populations(),
            StepperKind::Populations { p, .. } | StepperKind::Qutrit { p, .. } => p.clone(),
        }
    }

    pub fn density_matrix(&self) -> DensityMatrix<T> {
        match &self.kind {
            StepperKind::Exact { rho, .. } => rho.clone(),
            StepperKind::Populations { p, .. } => {
                DensityMatrix::from_matrix_unchecked(ComplexMatrix::from_real_diagonal(p))
            }
            StepperKind::Qutrit { p, c, .. } => {
                DensityMatrix::from_matrix_unchecked(qutrit_matrix(p, c))
            }
        }
    }

    /// Trace distance to a diagonal target.
    pub fn distance_to_diagonal(&self, target: &[T]) -> Result<T, CollisionError> {
        match &self.kind {
            StepperKind::Populations { p, .. } => Ok(diag_distance(p, target)),
            StepperKind::Exact { rho, .. } => Ok(trace_distance_matrices(
                rho.matrix(),
                &ComplexMatrix::from_real_diagonal(target),
            )?),
            StepperKind::Qutrit { p, c, .. } => Ok(trace_distance_matrices(
                &qutrit_matrix(p, c),
                &ComplexMatrix::from_real_diagonal(target),
            )?),
        }
    }
}

fn diag_distance<T: Real>(p: &[T], q: &[T]) -> T {
    let diff: Vec<T> = p.iter().zip(q).map(|(a, b)| *a - *b).collect();
    half_l1(&diff)
}

fn qutrit_matrix<T: Real>(p: &[T], c: &[C<T>; 3]) -> ComplexMatrix<T> {
    let mut m = ComplexMatrix::from_real_diagonal(p);
    for (k, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        m[(i, j)] = c[k];
        m[(j, i)] = c[k].conj();
    }
    m
}

/// Stored trajectory: full states, or populations only on the fast path.
#[derive(Clone, Debug)]
pub enum TrajectoryStates<T> {
    Full(Vec<DensityMatrix<T>>),
    Populations(Vec<Vec<T>>),
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T> {
    pub states: TrajectoryStates<T>,
    /// Trace distance to the target Gibbs state after each collision.
    pub distances: Vec<T>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn populations(&self, k: usize) -> Vec<T> {
        match &self.states {
            TrajectoryStates::Full(s) => s[k].populations(),
            TrajectoryStates::Populations(p) => p[k].clone(),
        }
    }

    /// Full state `k`, rebuilt as a diagonal matrix on the fast path.
    pub fn state(&self, k: usize) -> DensityMatrix<T> {
        match &self.states {
            TrajectoryStates::Full(s) => s[k].clone(),
            TrajectoryStates::Populations(p) => {
                DensityMatrix::from_matrix_unchecked(ComplexMatrix::from_real_diagonal(&p[k]))
            }
        }
    }
}

/// Applies `n` collisions and records every intermediate state.
pub fn evolve<T: Real>(
    rho0: &DensityMatrix<T>,
    model: &Model<T>,
    cfg: &CollisionConfig<T>,
    n: usize,
    path: Path,
) -> Result<TrajectoryRecord<T>, CollisionError> {
    if n > cfg.n_max {
        return Err(CollisionError::CapExceeded {
            requested: n,
            n_max: cfg.n_max,
        });
    }
    let target = model.target_populations();
    let mut stepper = Stepper::new(rho0, model, cfg.tau, path)?;
    let pop_only = stepper.is_population_only();
    let mut full = Vec::new();
    let mut pops = Vec::new();
    let mut distances = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            stepper.step()?;
        }
        distances.push(stepper.distance_to_diagonal(&target)?);
        if pop_only {
            pops.push(stepper.populations());
        } else {
            full.push(stepper.density_matrix());
        }
    }
    let states = if pop_only {
        TrajectoryStates::Populations(pops)
    } else {
        TrajectoryStates::Full(full)
    };
    Ok(TrajectoryRecord { states, distances })
}

/// Generator of the continuous-limit dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlGenerator<T> {
    /// Resonant flip-flop with `gamma = J^2 tau`. Populations follow the
    /// tridiagonal generator for any `d`; three-level coherences are evolved
    /// when present.
    EnergyConserving { gamma: T },
    /// Three levels with flip-flop rate `gamma1 = J^2 tau`, counter-rotating
    /// rate `gamma2 = J'^2 tau` and cross rate `gamma12 = J J' tau`.
    NonConserving { gamma1: T, gamma2: T, gamma12: T },
}

impl<T: Real> SlGenerator<T> {
    pub fn gamma_max(&self) -> T {
        match *self {
            SlGenerator::EnergyConserving { gamma } => gamma.abs(),
            SlGenerator::NonConserving {
                gamma1,
                gamma2,
                gamma12,
            } => gamma1.abs().max(gamma2.abs()).max(gamma12.abs()),
        }
    }

    /// Default integration step `0.01 / gamma_max`.
    pub fn default_dt(&self) -> T {
        let g = self.gamma_max();
        if g > T::zero() {
            T::lit(0.01) / g
        } else {
            T::lit(0.01)
        }
    }
}

/// Populations plus, for three levels, the coherences `(c12, c13, c23)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlState<T> {
    pub populations: Vec<T>,
    pub coherences: Vec<C<T>>,
}

impl<T: Real> SlState<T> {
    pub fn diagonal(populations: Vec<T>) -> Self {
        Self {
            populations,
            coherences: Vec::new(),
        }
    }

    pub fn from_density_matrix(rho: &DensityMatrix<T>) -> Self {
        let populations = rho.populations();
        let coherences = if rho.dim() == 3 {
            let m = rho.matrix();
            vec![m[(0, 1)], m[(0, 2)], m[(1, 2)]]
        } else {
            Vec::new()
        };
        Self {
            populations,
            coherences,
        }
    }

    fn pack(&self) -> Vec<C<T>> {
        self.populations
            .iter()
            .map(|&p| cr(p))
            .chain(self.coherences.iter().copied())
            .collect()
    }

    fn unpack(v: &[C<T>], d: usize) -> Self {
        Self {
            populations: v[..d].iter().map(|z| z.re).collect(),
            coherences: v[d..].to_vec(),
        }
    }

    /// Trace distance to a diagonal target.
    pub fn distance_to_diagonal(&self, target: &[T]) -> Result<T, CollisionError> {
        if self.coherences.is_empty() || self.coherences.iter().all(|z| z.norm() == T::zero()) {
            return Ok(diag_distance(&self.populations, target));
        }
        let c = [self.coherences[0], self.coherences[1], self.coherences[2]];
        Ok(trace_distance_matrices(
            &qutrit_matrix(&self.populations, &c),
            &ComplexMatrix::from_real_diagonal(target),
        )?)
    }
}

#[derive(Clone, Debug)]
pub struct SlTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<SlState<T>>,
}

struct SlRhs<T> {
    generator: SlGenerator<T>,
    p_a: T,
    d: usize,
    populations: Tridiagonal<T>,
}

impl<T: Real> SlRhs<T> {
    fn new(generator: SlGenerator<T>, p_a: T, state: &SlState<T>) -> Result<Self, CollisionError> {
        let d = state.populations.len();
        if d < 2 {
            return Err(CollisionError::InvalidConfig(
                "need at least two levels".into(),
            ));
        }
        if !state.coherences.is_empty() && (d != 3 || state.coherences.len() != 3) {
            return Err(CollisionError::InvalidConfig(
                "coherences are tracked for three levels only, as (c12, c13, c23)".into(),
            ));
        }
        let gamma = match generator {
            SlGenerator::EnergyConserving { gamma } => gamma,
            SlGenerator::NonConserving { .. } => {
                if d != 3 {
                    return Err(CollisionError::InvalidConfig(
                        "the counter-rotating generator is defined for three levels".into(),
                    ));
                }
                T::zero()
            }
        };
        Ok(Self {
            generator,
            p_a,
            d,
            populations: liouvillian_matrix(d, p_a, gamma),
        })
    }

    fn eval(&self, y: &[C<T>]) -> Vec<C<T>> {
        let (one, two, half) = (T::one(), T::lit(2.0), T::lit(0.5));
        let p = self.p_a;
        let d = self.d;
        match self.generator {
            SlGenerator::EnergyConserving { gamma } => {
                let pops: Vec<T> = y[..d].iter().map(|z| z.re).collect();
                let mut out: Vec<C<T>> = self
                    .populations
                    .mul_vec(&pops)
                    .into_iter()
                    .map(cr)
                    .collect();
                if y.len() == d + 3 {
                    let (c12, c13, c23) = (y[d], y[d + 1], y[d + 2]);
                    out.push((c12 * (-half * (two - p)) + c23 * p) * gamma);
                    out.push(c13 * (-half * gamma));
                    out.push((c12 * (one - p) - c23 * (half * (one + p))) * gamma);
                }
                out
            }
            SlGenerator::NonConserving {
                gamma1: g1,
                gamma2: g2,
                gamma12: g12,
            } => {
                let (p1, p2, p3) = (y[0].re, y[1].re, y[2].re);
                let zero = cr(T::zero());
                let (c12, c13, c23) = if y.len() == 6 {
                    (y[3], y[4], y[5])
                } else {
                    (zero, zero, zero)
                };
                let rc13 = c13.re;
                let up = g1 * (one - p) + g2 * p;
                let down = g2 * (one - p) + g1 * p;
                let dp1 = -g1 * p1 + g2 * p2 + (g1 - g2) * (p1 + p2) * p - g12 * rc13;
                let dp2 = p1 * up - p2 * (g1 + g2) + p3 * down + two * g12 * rc13;
                let dp3 = p2 * up - p3 * down - g12 * rc13;
                let dc12 = c23 * down - c12 * (half * (g1 * (two - p) + g2 * (one + p)))
                    + (c12.conj() * two - c23.conj()) * (half * g12);
                let dc13 = cr(half * g12 * (two * p2 - p1 - p3)) - c13 * ((g1 + g2) / T::lit(3.0));
                let dc23 = c12 * up
                    - c23 * (half * (g2 * (two - p) + g1 * (one + p)))
                    - (c12.conj() - c23.conj() * two) * (half * g12);
                let mut out = vec![cr(dp1), cr(dp2), cr(dp3)];
                if y.len() == 6 {
                    out.extend([dc12, dc13, dc23]);
                }
                out
            }
        }
    }

    fn rk4(&self, y: &[C<T>], h: T) -> Vec<C<T>> {
        let axpy = |a: &[C<T>], k: &[C<T>], s: T| -> Vec<C<T>> {
            a.iter().zip(k).map(|(x, kk)| x + kk * s).collect()
        };
        let half = h * T::lit(0.5);
        let k1 = self.eval(y);
        let k2 = self.eval(&axpy(y, &k1, half));
        let k3 = self.eval(&axpy(y, &k2, half));
        let k4 = self.eval(&axpy(y, &k3, h));
        let sixth = h / T::lit(6.0);
        (0..y.len())
            .map(|i| y[i] + (k1[i] + k2[i] * T::lit(2.0) + k3[i] * T::lit(2.0) + k4[i]) * sixth)
            .collect()
    }
}

fn check_step<T: Real>(generator: &SlGenerator<T>, dt: T) -> Result<(), CollisionError> {
    if !(dt > T::zero()) {
        return Err(CollisionError::InvalidConfig(format!(
            "dt = {dt} must be positive"
        )));
    }
    let g = generator.gamma_max();
    if dt * g > T::lit(0.1) {
        return Err(CollisionError::StepTooLarge {
            dt: dt.to_f64_lossy(),
            gamma_max: g.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Fixed-step RK4 integration of the continuous-limit dynamics up to `t_end`.
///
/// The step is shrunk uniformly so that an integer number of steps lands on
/// `t_end`; every step is recorded.
pub fn sl_ode_evolve<T: Real>(
    state0: &SlState<T>,
    generator: SlGenerator<T>,
    p_a: T,
    t_end: T,
    dt: T,
) -> Result<SlTrajectory<T>, CollisionError> {
    check_step(&generator, dt)?;
    if !(t_end >= T::zero()) {
        return Err(CollisionError::InvalidConfig(format!(
            "t_end = {t_end} must be >= 0"
        )));
    }
    let rhs = SlRhs::new(generator, p_a, state0)?;
    let steps = (t_end / dt - T::lit(1e-9))
        .ceil()
        .max(T::zero())
        .to_usize()
        .unwrap_or(0);
    let h = if steps > 0 {
        t_end / T::count(steps)
    } else {
        dt
    };
    let d = state0.populations.len();
    let mut y = state0.pack();
    let mut times = vec![T::zero()];
    let mut states = vec![state0.clone()];
    for k in 1..=steps {
        y = rhs.rk4(&y, h);
        times.push(h * T::count(k));
        states.push(SlState::unpack(&y, d));
    }
    Ok(SlTrajectory { times, states })
}

/// First time the trace distance to `target` drops to `epsilon`, or `None` if
/// that does not happen before `t_max`.
///
/// The crossing step is refined by bisecting the length of a single RK4 step
/// taken from the last state above the threshold.
pub fn sl_crossing_time<T: Real>(
    state0: &SlState<T>,
    generator: SlGenerator<T>,
    p_a: T,
    target: &[T],
    epsilon: T,
    t_max: T,
    dt: T,
) -> Result<Option<T>, CollisionError> {
    check_step(&generator, dt)?;
    let rhs = SlRhs::new(generator, p_a, state0)?;
    let d = state0.populations.len();
    let dist = |y: &[C<T>]| SlState::unpack(y, d).distance_to_diagonal(target);
    let mut y = state0.pack();
    if dist(&y)? <= epsilon {
        return Ok(Some(T::zero()));
    }
    let mut t = T::zero();
    while t < t_max {
        let next = rhs.rk4(&y, dt);
        if dist(&next)? <= epsilon {
            let (mut lo, mut hi) = (T::zero(), dt);
            for _ in 0..100 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if dist(&rhs.rk4(&y, mid))? <= epsilon {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(t + hi));
        }
        y = next;
        t += dt;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        gibbs_populations_from_pa, random_ginibre_state, random_populations, AncillaSpec,
        SystemSpec,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn model_pa(d: usize, p_a: f64, j: f64) -> Model<f64> {
        Model::new(
            SystemSpec::new(d, 1.0).unwrap(),
            AncillaSpec::from_ground_population(1.0, p_a).unwrap(),
            Interaction::IsotropicFlipFlop { j },
        )
        .unwrap()
    }

    fn cfg(tau: f64) -> CollisionConfig<f64> {
        CollisionConfig::new(tau, 10_000, 1e-4).unwrap()
    }

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn collision_unitary_matches_closed_form_entry() {
        let (j, tau) = (0.8, 1.1);
        let m = Model::flip_flop(3, 1.0, 1.0, j).unwrap();
        let u = Collider::new(&m, tau).unwrap().unitary(0).unwrap();
        // block {1, 2} has energy -1/2 and coupling j
        let want = c(0.0, -1.0) * cis(0.5 * tau) * (j * tau).sin();
        assert!((u[(1, 2)] - want).norm() < 1e-12);
        assert!((u[(0, 0)] - cis(1.5 * tau)).norm() < 1e-12);
        assert!((u[(1, 1)] - cis(0.5 * tau) * (j * tau).cos()).norm() < 1e-12);
    }

    #[test]
    fn gibbs_is_a_fixed_point() {
        for (d, beta) in [(3, 1.0), (4, 0.3), (2, 5.0)] {
            let m = Model::flip_flop(d, 1.0, beta, 0.7).unwrap();
            let g = m.target_state();
            let out = collide_once(&g, &m, &cfg(1.3)).unwrap();
            assert!((out.matrix() - g.matrix()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_populations_at_j_tau_pi() {
        let m = model_pa(3, 1.0, 1.0);
        let rho = DensityMatrix::from_populations(&[0.2, 0.5, 0.3]).unwrap();
        let out = collide_once(&rho, &m, &cfg(PI)).unwrap();
        for (a, b) in out.populations().iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn qutrit_population_update_matches_rates() {
        let (p, jt) = (0.7, 0.9);
        let m = model_pa(3, p, 1.0);
        let p0 = [0.5, 0.2, 0.3];
        let out =
            collide_once(&DensityMatrix::from_populations(&p0).unwrap(), &m, &cfg(jt)).unwrap();
        let e = eta_coefficients(p, jt);
        let want = [
            e.eta11 * p0[0] + e.eta12 * p0[1],
            e.eta21 * p0[0] + e.eta22 * p0[1] + e.eta12 * p0[2],
            e.eta21 * p0[1] + e.eta33 * p0[2],
        ];
        for (a, b) in out.populations().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_limits() {
        let e = eta_coefficients(0.8f64, 0.0);
        assert_eq!(
            (e.eta11, e.eta12, e.eta21, e.eta22, e.eta33),
            (1.0, 0.0, 0.0, 1.0, 1.0)
        );
        let jt: f64 = 0.6;
        let (lp, lm) = lambda_pm(jt);
        let e = eta_coefficients(1.0, jt);
        assert!((e.eta11 - 1.0).abs() < 1e-15 && e.eta21 == 0.0);
        assert!((e.eta12 - lm).abs() < 1e-15);
        assert!((e.eta22 - lp).abs() < 1e-15 && (e.eta33 - lp).abs() < 1e-15);
        let e = eta_coefficients(0.7, PI / 3.0);
        let c2 = (2.0 * PI / 3.0).cos();
        assert!((e.eta11 - 0.5 * (1.7 + 0.3 * c2)).abs() < 1e-15);
        assert!((e.eta21 - 0.5 * 0.3 * (1.0 - c2)).abs() < 1e-15);

        let s = psi_coefficients(0.9, 0.0);
        assert_eq!(
            (s.psi11, s.psi13, s.psi22, s.psi31, s.psi33),
            (1.0, 0.0, 1.0, 0.0, 1.0)
        );
        let mu = jt.cos();
        let s = psi_coefficients(1.0, jt);
        assert!((s.psi11 - mu).abs() < 1e-15 && (s.psi22 - mu).abs() < 1e-15);
        assert!((s.psi13 - lm).abs() < 1e-15 && s.psi31 == 0.0);
        assert!((s.psi33 - lp).abs() < 1e-15);
        let s = psi_coefficients(0.6, 1.0);
        let (c1, c2) = (1f64.cos(), 2f64.cos());
        assert!((s.psi11 - 0.5 * (0.4 + 1.2 * c1 + 0.4 * c2)).abs() < 1e-15);
        assert!((s.psi33 - 0.5 * (0.6 + 0.8 * c1 + 0.6 * c2)).abs() < 1e-15);
    }

    #[test]
    fn recursive_population_step() {
        assert_eq!(
            step_populations_recursive(&[0.0; 3], 0.8, 0.5).unwrap(),
            vec![0.0; 3]
        );
        assert!(matches!(
            step_populations_recursive(&[0.1, 0.0, 0.0], 0.8, 0.5),
            Err(CollisionError::SumNotZero { .. })
        ));
        let (p, jt) = (0.75f64, 0.4);
        let e = eta_coefficients(p, jt);
        let dp = [0.1, -0.04, -0.06];
        let out = step_populations_recursive(&dp, p, jt).unwrap();
        let want = [
            e.eta11 * dp[0] + e.eta12 * dp[1],
            e.eta21 * dp[0] + e.eta22 * dp[1] + e.eta12 * dp[2],
            e.eta21 * dp[1] + e.eta33 * dp[2],
        ];
        for (a, b) in out.iter().zip(want) {
            assert!((a - b).abs() < 1e-16);
        }
        // four levels, row by row
        let dp4 = [0.1, -0.05, 0.02, -0.07];
        let out = step_populations_recursive(&dp4, p, jt).unwrap();
        let want4 = [
            e.eta11 * dp4[0] + e.eta12 * dp4[1],
            e.eta21 * dp4[0] + e.eta22 * dp4[1] + e.eta12 * dp4[2],
            e.eta21 * dp4[1] + e.eta22 * dp4[2] + e.eta12 * dp4[3],
            e.eta21 * dp4[2] + e.eta33 * dp4[3],
        ];
        for (a, b) in out.iter().zip(want4) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn coherence_step_matches_exact_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for &(p, jt) in &[(0.8, 0.7), (0.6, 2.1), (1.0, 1.2)] {
            let m = model_pa(3, p, 1.0);
            let rho: DensityMatrix<f64> = random_ginibre_state(3, &mut rng);
            let out = collide_once(&rho, &m, &cfg(jt)).unwrap();
            let r = rho.matrix();
            let next = step_coherences_d3([r[(0, 1)], r[(0, 2)], r[(1, 2)]], p, jt, jt);
            let o = out.matrix();
            for (k, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
                assert!((next[k] - o[(i, j)]).norm() < 1e-12, "c{}{}", i + 1, j + 1);
            }
        }
        assert_eq!(
            step_coherences_d3([c(0.0, 0.0); 3], 0.7, 0.4, 0.2),
            [c(0.0, 0.0); 3]
        );
    }

    #[test]
    fn zero_temperature_population_closed_form() {
        let jt: f64 = 0.45;
        let (lp, lm) = lambda_pm(jt);
        let p0 = [0.2, 0.5, 0.3];
        assert_eq!(zero_temp_populations_closed(&p0, 0, jt), p0.to_vec());
        for n in [1usize, 5, 17] {
            let got = zero_temp_populations_closed(&p0, n, jt);
            let nf = n as f64;
            let p1 = 1.0 - lp.powi(n as i32) * (p0[1] + p0[2] * (1.0 + nf * lm / lp));
            assert!((got[0] - p1).abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p0: Vec<f64> = random_populations(10, &mut rng);
        let mut p = p0.clone();
        let map = stochastic_matrix(10, 1.0, jt);
        for _ in 0..7 {
            p = map.mul_vec(&p);
        }
        for (a, b) in zero_temp_populations_closed(&p0, 7, jt).iter().zip(&p) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_temperature_coherence_closed_form() {
        let (jt, wt) = (0.8, 0.3);
        let c0 = [c(0.1, -0.05), c(0.02, 0.07), c(-0.08, 0.04)];
        let (z, _) = zero_temp_coherences_d3_closed([c(0.0, 0.0); 3], 4, jt, wt);
        assert_eq!(z, [c(0.0, 0.0); 3]);
        let mut it = c0;
        for _ in 0..9 {
            it = step_coherences_d3(it, 1.0, jt, wt);
        }
        let (cl, branch) = zero_temp_coherences_d3_closed(c0, 9, jt, wt);
        assert_eq!(branch, ModeBranch::TwoMode);
        for k in 0..3 {
            assert!((cl[k] - it[k]).norm() < 1e-14);
        }
        let mu: f64 = jt.cos();
        assert!((cl[1] - cis(2.0 * wt * 9.0) * mu.powi(9) * c0[1]).norm() < 1e-15);
    }

    #[test]
    fn degenerate_mode_limit_at_half_pi() {
        let c0 = [c(0.1, 0.0), c(0.0, 0.0), c(0.2, 0.0)];
        let mut it = c0;
        for n in 1..4 {
            it = step_coherences_d3(it, 1.0, FRAC_PI_2, 0.0);
            let (cl, branch) = zero_temp_coherences_d3_closed(c0, n, FRAC_PI_2, 0.0);
            assert_eq!(branch, ModeBranch::DegenerateLimit);
            for k in 0..3 {
                assert!((cl[k] - it[k]).norm() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn c12_feed_in_is_nonmonotone() {
        let c0 = [c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)];
        let grows =
            (1..20).any(|n| zero_temp_coherences_d3_closed(c0, n, 0.3, 0.1).0[0].norm() > 0.0);
        assert!(grows);
    }

    #[test]
    fn exact_cooling_in_d_minus_one() {
        for d in [3, 5] {
            let m = model_pa(d, 1.0, 1.0);
            let rec = evolve(
                &DensityMatrix::maximally_mixed(d),
                &m,
                &cfg(FRAC_PI_2),
                d - 1,
                Path::BruteForce,
            )
            .unwrap();
            let last = rec.state(d - 1);
            assert!((last.populations()[0] - 1.0).abs() < 1e-14);
            assert!(rec.distances[d - 1] < 1e-14);
        }
    }

    #[test]
    fn evolve_record_and_cap() {
        let m = model_pa(3, 0.8, 1.0);
        let rho0 = DensityMatrix::maximally_mixed(3);
        let rec = evolve(&rho0, &m, &cfg(0.5), 0, Path::Recursion).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.populations(0), rho0.populations());
        let small = CollisionConfig::new(0.5, 3, 1e-4).unwrap();
        assert!(matches!(
            evolve(&rho0, &m, &small, 4, Path::Recursion),
            Err(CollisionError::CapExceeded { .. })
        ));
    }

    #[test]
    fn recursion_and_exact_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for d in [2, 3, 4] {
            let m = model_pa(d, 0.85, 0.9);
            let rho0: DensityMatrix<f64> = random_ginibre_state(d, &mut rng);
            let a = evolve(&rho0, &m, &cfg(1.1), 30, Path::Recursion).unwrap();
            let b = evolve(&rho0, &m, &cfg(1.1), 30, Path::BruteForce).unwrap();
            for k in 0..=30 {
                assert!((a.state(k).matrix() - b.state(k).matrix()).max_abs() < 1e-12);
                assert!((a.distances[k] - b.distances[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sl_zero_temperature_populations() {
        let g: f64 = 1.0;
        let p0 = vec![0.2, 0.5, 0.3];
        let gen = SlGenerator::EnergyConserving { gamma: g };
        let tr = sl_ode_evolve(
            &SlState::diagonal(p0.clone()),
            gen,
            1.0,
            3.0,
            gen.default_dt(),
        )
        .unwrap();
        let t = *tr.times.last().unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        let last = &tr.states.last().unwrap().populations;
        let e = (-g * t).exp();
        let p3 = e * p0[2];
        let p2 = e * (p0[1] + g * t * p0[2]);
        assert!((last[2] - p3).abs() < 1e-8);
        assert!((last[1] - p2).abs() < 1e-8);
        assert!((last.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sl_zero_rate_is_constant() {
        let s = SlState {
            populations: vec![0.5, 0.3, 0.2],
            coherences: vec![c(0.1, 0.0), c(0.0, 0.05), c(0.02, 0.0)],
        };
        let tr = sl_ode_evolve(
            &s,
            SlGenerator::EnergyConserving { gamma: 0.0 },
            0.7,
            1.0,
            0.01,
        )
        .unwrap();
        assert_eq!(tr.states.last().unwrap(), &s);
    }

    #[test]
    fn sl_step_guard() {
        let s = SlState::diagonal(vec![0.5, 0.5]);
        assert!(matches!(
            sl_ode_evolve(
                &s,
                SlGenerator::EnergyConserving { gamma: 2.0 },
                0.7,
                1.0,
                0.06
            ),
            Err(CollisionError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn sl_coherences_follow_collision_limit() {
        // weak, short collisions: J = 10, tau = 1e-4, so gamma = J^2 tau = 1e-2 per unit time
        let (j, tau, p) = (10.0, 1e-4, 0.8);
        let gamma = j * j * tau;
        let n = 2000;
        let mut cc = [c(0.1, 0.0), c(0.05, 0.0), c(-0.07, 0.0)];
        for _ in 0..n {
            cc = step_coherences_d3(cc, p, j * tau, 0.0);
        }
        let s0 = SlState {
            populations: vec![0.5, 0.3, 0.2],
            coherences: vec![c(0.1, 0.0), c(0.05, 0.0), c(-0.07, 0.0)],
        };
        let gen = SlGenerator::EnergyConserving { gamma };
        let tr = sl_ode_evolve(&s0, gen, p, n as f64 * tau, gen.default_dt()).unwrap();
        let last = &tr.states.last().unwrap().coherences;
        for k in 0..3 {
            assert!(
                (last[k] - cc[k]).norm() < 1e-3,
                "k={k}: {} vs {}",
                last[k],
                cc[k]
            );
        }
    }

    #[test]
    fn non_conserving_generator_conserves_trace() {
        let gen = SlGenerator::NonConserving {
            gamma1: 1.0,
            gamma2: 0.25,
            gamma12: 0.5,
        };
        let s = SlState {
            populations: vec![1.0 / 3.0; 3],
            coherences: vec![c(0.05, 0.01), c(0.0, 0.0), c(0.02, -0.03)],
        };
        let tr = sl_ode_evolve(&s, gen, 0.73, 5.0, gen.default_dt()).unwrap();
        for st in &tr.states {
            assert!((st.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // reduces to the resonant generator when the counter-rotating rates vanish
        let a = sl_ode_evolve(
            &s,
            SlGenerator::NonConserving {
                gamma1: 1.0,
                gamma2: 0.0,
                gamma12: 0.0,
            },
            0.73,
            2.0,
            0.01,
        )
        .unwrap();
        let b = sl_ode_evolve(
            &s,
            SlGenerator::EnergyConserving { gamma: 1.0 },
            0.73,
            2.0,
            0.01,
        )
        .unwrap();
        let (sa, sb) = (a.states.last().unwrap(), b.states.last().unwrap());
        for k in 0..3 {
            assert!((sa.populations[k] - sb.populations[k]).abs() < 1e-13);
        }
        for k in [0, 2] {
            assert!((sa.coherences[k] - sb.coherences[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn crossing_time_zero_temperature() {
        let p0 = vec![1.0 / 3.0; 3];
        let gen = SlGenerator::EnergyConserving { gamma: 1.0 };
        let t = sl_crossing_time(
            &SlState::diagonal(p0),
            gen,
            1.0,
            &[1.0, 0.0, 0.0],
            0.01,
            100.0,
            0.01,
        )
        .unwrap()
        .unwrap();
        // distance is p2 + p3 = e^{-t}(2/3 + t/3)
        let f = |t: f64| (-t).exp() * (2.0 + t) / 3.0;
        assert!((f(t) - 0.01).abs() < 1e-9);
        let target = gibbs_populations_from_pa(3, 0.8);
        let none = sl_crossing_time(
            &SlState::diagonal(vec![1.0 / 3.0; 3]),
            SlGenerator::EnergyConserving { gamma: 0.0 },
            0.8,
            &target,
            1e-4,
            1.0,
            0.01,
        )
        .unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn random_interaction_evolves_deterministically() {
        let m = Model::new(
            SystemSpec::new(3, 1.0).unwrap(),
            AncillaSpec::new(1.0, 1.0).unwrap(),
            Interaction::RandomFull {
                lo: 1e-3,
                hi: PI * 1e-3,
                seed: 9,
            },
        )
        .unwrap();
        let a = evolve(
            &DensityMatrix::maximally_mixed(3),
            &m,
            &cfg(100.0),
            5,
            Path::Recursion,
        )
        .unwrap();
        let b = evolve(
            &DensityMatrix::maximally_mixed(3),
            &m,
            &cfg(100.0),
            5,
            Path::BruteForce,
        )
        .unwrap();
        assert_eq!(a.distances, b.distances);
    }
}
