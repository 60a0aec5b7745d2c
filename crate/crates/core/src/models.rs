//! Hamiltonians and reference states for a `d`-level system coupled to qubit
//! ancillas.
//!
//! The joint basis index of `|k> (x) |a>` is `2k + a`, with `a = 0` the ancilla
//! ground state. System level `k = 0` is the lowest energy `-s omega`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{kron, ComplexMatrix, DensityMatrix};
use crate::scalar::{cr, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Equidistant `d`-level system (spin `s = (d-1)/2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemSpec<T> {
    pub d: usize,
    pub omega: T,
}

impl<T: Real> SystemSpec<T> {
    pub fn new(d: usize, omega: T) -> Result<Self, ModelError> {
        if d < 2 {
            return Err(invalid("d", format!("need at least two levels, got {d}")));
        }
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(invalid("omega", format!("must be positive, got {omega}")));
        }
        Ok(Self { d, omega })
    }

    /// `E_k = omega (k - s)`.
    pub fn energies(&self) -> Vec<T> {
        let s = T::count(self.d - 1) * T::lit(0.5);
        (0..self.d)
            .map(|k| self.omega * (T::count(k) - s))
            .collect()
    }
}

/// Thermal qubit ancilla. `beta = +inf` denotes zero temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AncillaSpec<T> {
    pub omega: T,
    pub beta: T,
}

impl<T: Real> AncillaSpec<T> {
    pub fn new(omega: T, beta: T) -> Result<Self, ModelError> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(invalid("omega", format!("must be positive, got {omega}")));
        }
        if beta.is_nan() || beta < T::zero() {
            return Err(invalid("beta", format!("must be >= 0 or +inf, got {beta}")));
        }
        Ok(Self { omega, beta })
    }

    pub fn zero_temperature(omega: T) -> Result<Self, ModelError> {
        Self::new(omega, T::infinity())
    }

    /// Ancilla whose ground population is `p_a` (in `[1/2, 1]`).
    pub fn from_ground_population(omega: T, p_a: T) -> Result<Self, ModelError> {
        if !(p_a >= T::lit(0.5) && p_a <= T::one()) {
            return Err(invalid("p_a", format!("must lie in [1/2, 1], got {p_a}")));
        }
        let beta = if p_a == T::one() {
            T::infinity()
        } else {
            (p_a / (T::one() - p_a)).ln() / omega
        };
        Self::new(omega, beta)
    }

    /// `p_A = 1 / (1 + e^{-beta omega})`, exactly one at `beta = +inf`.
    pub fn ground_population(&self) -> T {
        ground_population(self.beta, self.omega)
    }

    pub fn hamiltonian(&self) -> ComplexMatrix<T> {
        let h = self.omega * T::lit(0.5);
        ComplexMatrix::from_real_diagonal(&[-h, h])
    }
}

/// Ground population of a thermal qubit with splitting `omega`.
pub fn ground_population<T: Real>(beta: T, omega: T) -> T {
    if beta.is_infinite() && beta > T::zero() {
        return T::one();
    }
    T::one() / (T::one() + (-beta * omega).exp())
}

/// System-ancilla coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interaction<T> {
    /// Flip-flop exchange `|k+1, g> <-> |k, e>` with strength `j`.
    IsotropicFlipFlop { j: T },
    /// Flip-flop plus the counter-rotating `|k+1, e> <-> |k, g>` term `j_prime`.
    CounterRotating { j: T, j_prime: T },
    /// Every joint off-diagonal entry drawn from `U(lo, hi)`, redrawn each
    /// collision from `(seed, collision index)`.
    RandomFull { lo: T, hi: T, seed: u64 },
}

impl<T: Real> Interaction<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Interaction::IsotropicFlipFlop { j } => {
                if !(j >= T::zero()) || !j.is_finite() {
                    return Err(invalid("j", format!("must be >= 0, got {j}")));
                }
            }
            Interaction::CounterRotating { j, j_prime } => {
                if !(j >= T::zero()) || !j.is_finite() {
                    return Err(invalid("j", format!("must be >= 0, got {j}")));
                }
                if !(j_prime >= T::zero()) || !j_prime.is_finite() {
                    return Err(invalid("j_prime", format!("must be >= 0, got {j_prime}")));
                }
            }
            Interaction::RandomFull { lo, hi, .. } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(invalid("lo/hi", format!("need lo < hi, got [{lo}, {hi})")));
                }
            }
        }
        Ok(())
    }

    /// The flip-flop strength `J` where one is defined.
    pub fn flip_flop_strength(&self) -> Option<T> {
        match *self {
            Interaction::IsotropicFlipFlop { j } | Interaction::CounterRotating { j, .. } => {
                Some(j)
            }
            Interaction::RandomFull { .. } => None,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Interaction::RandomFull { .. })
    }
}

/// `H_S = diag(omega (k - s))`.
pub fn system_hamiltonian<T: Real>(sys: &SystemSpec<T>) -> ComplexMatrix<T> {
    ComplexMatrix::from_real_diagonal(&sys.energies())
}

pub fn ancilla_thermal_state<T: Real>(anc: &AncillaSpec<T>) -> DensityMatrix<T> {
    let p = anc.ground_population();
    DensityMatrix::from_matrix_unchecked(ComplexMatrix::from_real_diagonal(&[p, T::one() - p]))
}

/// Gibbs populations of the system at inverse temperature `beta`.
///
/// Built from the Boltzmann ratio `r = e^{-beta omega}` as `r^k / sum r^j`, so
/// that `beta = +inf` gives the ground projector and `beta = 0` gives `I/d`.
pub fn gibbs_populations<T: Real>(sys: &SystemSpec<T>, beta: T) -> Vec<T> {
    let r = if beta.is_infinite() && beta > T::zero() {
        T::zero()
    } else {
        (-beta * sys.omega).exp()
    };
    boltzmann_ladder(sys.d, r)
}

/// Gibbs populations for an ancilla with ground population `p_a`; the ratio of
/// neighbouring populations is `(1 - p_a) / p_a`.
pub fn gibbs_populations_from_pa<T: Real>(d: usize, p_a: T) -> Vec<T> {
    boltzmann_ladder(d, (T::one() - p_a) / p_a)
}

fn boltzmann_ladder<T: Real>(d: usize, r: T) -> Vec<T> {
    let mut w = Vec::with_capacity(d);
    let mut x = T::one();
    for _ in 0..d {
        w.push(x);
        x *= r;
    }
    let z: T = w.iter().copied().sum();
    w.into_iter().map(|v| v / z).collect()
}

pub fn system_gibbs_state<T: Real>(sys: &SystemSpec<T>, beta: T) -> DensityMatrix<T> {
    DensityMatrix::from_matrix_unchecked(ComplexMatrix::from_real_diagonal(&gibbs_populations(
        sys, beta,
    )))
}

/// Interaction Hamiltonian on the `2d`-dimensional joint space. The collision
/// index only matters for [`Interaction::RandomFull`].
pub fn interaction_hamiltonian<T: Real>(
    sys: &SystemSpec<T>,
    interaction: &Interaction<T>,
    collision_index: u64,
) -> ComplexMatrix<T> {
    let n = 2 * sys.d;
    let mut h = ComplexMatrix::zeros(n);
    let mut set = |i: usize, j: usize, v: T| {
        h[(i, j)] = cr(v);
        h[(j, i)] = cr(v);
    };
    match *interaction {
        Interaction::IsotropicFlipFlop { j } => {
            for k in 0..sys.d - 1 {
                set(2 * k + 1, 2 * k + 2, j);
            }
        }
        Interaction::CounterRotating { j, j_prime } => {
            for k in 0..sys.d - 1 {
                set(2 * k + 1, 2 * k + 2, j);
                set(2 * k, 2 * k + 3, j_prime);
            }
        }
        Interaction::RandomFull { lo, hi, seed } => {
            let mut rng = collision_rng(seed, collision_index);
            let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
            for i in 0..n {
                for j in (i + 1)..n {
                    set(i, j, T::lit(rng.random_range(lo..hi)));
                }
            }
        }
    }
    h
}

/// Independent generator for one collision of a randomized run.
pub fn collision_rng(seed: u64, collision_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(collision_index);
    rng
}

/// `H_0 = H_S (x) I_2 + I_d (x) H_A`.
pub fn free_hamiltonian<T: Real>(sys: &SystemSpec<T>, anc: &AncillaSpec<T>) -> ComplexMatrix<T> {
    &kron(&system_hamiltonian(sys), &ComplexMatrix::identity(2))
        + &kron(&ComplexMatrix::identity(sys.d), &anc.hamiltonian())
}

pub fn total_hamiltonian<T: Real>(
    sys: &SystemSpec<T>,
    anc: &AncillaSpec<T>,
    interaction: &Interaction<T>,
    collision_index: u64,
) -> ComplexMatrix<T> {
    &free_hamiltonian(sys, anc) + &interaction_hamiltonian(sys, interaction, collision_index)
}

/// Complete collision model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Model<T> {
    pub system: SystemSpec<T>,
    pub ancilla: AncillaSpec<T>,
    pub interaction: Interaction<T>,
}

impl<T: Real> Model<T> {
    pub fn new(
        system: SystemSpec<T>,
        ancilla: AncillaSpec<T>,
        interaction: Interaction<T>,
    ) -> Result<Self, ModelError> {
        interaction.validate()?;
        Ok(Self {
            system,
            ancilla,
            interaction,
        })
    }

    /// Resonant flip-flop model with `omega` shared by system and ancilla.
    pub fn flip_flop(d: usize, omega: T, beta: T, j: T) -> Result<Self, ModelError> {
        Self::new(
            SystemSpec::new(d, omega)?,
            AncillaSpec::new(omega, beta)?,
            Interaction::IsotropicFlipFlop { j },
        )
    }

    pub fn d(&self) -> usize {
        self.system.d
    }

    pub fn p_a(&self) -> T {
        self.ancilla.ground_population()
    }

    /// Resonant flip-flop, the case where the recursions are exact.
    pub fn is_energy_conserving(&self) -> bool {
        matches!(self.interaction, Interaction::IsotropicFlipFlop { .. })
            && self.system.omega == self.ancilla.omega
    }

    /// The collision fixed point for energy-conserving models: the system
    /// Gibbs state at the ancilla temperature.
    pub fn target_state(&self) -> DensityMatrix<T> {
        DensityMatrix::from_matrix_unchecked(ComplexMatrix::from_real_diagonal(
            &self.target_populations(),
        ))
    }

    pub fn target_populations(&self) -> Vec<T> {
        gibbs_populations(&self.system, self.ancilla.beta)
    }

    pub fn total_hamiltonian(&self, collision_index: u64) -> ComplexMatrix<T> {
        total_hamiltonian(
            &self.system,
            &self.ancilla,
            &self.interaction,
            collision_index,
        )
    }
}

/// Random system state from a complex Ginibre matrix `G`: `G G^dagger / Tr`.
///
/// This is a convention for generating generic full-rank coherent states; it is
/// not tied to any particular physical preparation.
pub fn random_ginibre_state<T: Real>(d: usize, rng: &mut impl Rng) -> DensityMatrix<T> {
    let g = ComplexMatrix::from_fn(d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(T::lit(re), T::lit(im))
    });
    let m = &g * &g.dagger();
    let tr = m.trace().re;
    DensityMatrix::from_matrix_unchecked(m.scale(cr(T::one() / tr)))
}

/// Uniform sample from the probability simplex.
pub fn random_populations<T: Real>(d: usize, rng: &mut impl Rng) -> Vec<T> {
    let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| T::lit(x / s)).collect()
}
