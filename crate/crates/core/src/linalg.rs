//! Dense complex linear algebra for the small (at most a few dozen levels)
//! matrices that appear in a single collision: products, Kronecker products,
//! a Jacobi Hermitian eigensolver, spectral unitaries, partial traces and the
//! trace distance.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{cis, cr, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max |H - H^dagger| = {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
}

/// Dense square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = cr(T::one());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a square.
    pub fn from_row_major(entries: Vec<C<T>>) -> Result<Self, LinalgError> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, data: entries })
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = cr(v);
        }
        m
    }

    pub fn from_real_rows(rows: &[Vec<T>]) -> Self {
        Self::from_fn(rows.len(), |i, j| cr(rows[i][j]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C<T>] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<C<T>> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn real_diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(cr(T::zero()), |acc, i| acc + self[(i, i)])
    }

    /// Largest entry modulus, `||A||_max`.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `||A - A^dagger||_max`.
    pub fn hermiticity_residual(&self) -> T {
        let mut r = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    pub fn is_diagonal(&self, tol: T) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = &self.data[i * self.dim + j];
                write!(f, " ({:?}, {:?})", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Kronecker product; entry `(ia*db + ib, ja*db + jb)` is `a[ia,ja] * b[ib,jb]`.
pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (da, db) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(da * db, |r, c| a[(r / db, c / db)] * b[(r % db, c % db)])
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T>(ComplexMatrix<T>);

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity, unit trace and positivity (to `1e-10`).
    pub fn new(m: ComplexMatrix<T>) -> Result<Self, LinalgError> {
        if !m.all_finite() {
            return Err(LinalgError::InvalidState("non-finite entry".into()));
        }
        let scale = m.max_abs().max(T::one());
        let herm = m.hermiticity_residual();
        if herm > T::tol(1e-10) * scale {
            return Err(LinalgError::NotHermitian {
                residual: herm.to_f64_lossy(),
            });
        }
        let tr = m.trace();
        if (tr.re - T::one()).abs() > T::tol(1e-10) || tr.im.abs() > T::tol(1e-10) {
            return Err(LinalgError::InvalidState(format!(
                "trace {} + {}i differs from one",
                tr.re, tr.im
            )));
        }
        let eig = hermitian_eigen(&m)?;
        if let Some(&lo) = eig.eigenvalues.first() {
            if lo < -T::tol(1e-10) {
                return Err(LinalgError::InvalidState(format!(
                    "negative eigenvalue {lo:e}"
                )));
            }
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller already knows to be a valid state.
    pub fn from_matrix_unchecked(m: ComplexMatrix<T>) -> Self {
        Self(m)
    }

    pub fn from_populations(p: &[T]) -> Result<Self, LinalgError> {
        if p.iter().any(|&x| x < -T::tol(1e-12)) {
            return Err(LinalgError::InvalidState("negative population".into()));
        }
        let s: T = p.iter().copied().sum();
        if (s - T::one()).abs() > T::tol(1e-10) {
            return Err(LinalgError::InvalidState(format!(
                "populations sum to {s} instead of one"
            )));
        }
        Ok(Self(ComplexMatrix::from_real_diagonal(p)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = T::one() / T::count(dim);
        Self(ComplexMatrix::from_real_diagonal(&vec![w; dim]))
    }

    /// Projector onto computational basis state `k`.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim);
        m[(k, k)] = cr(T::one());
        Self(m)
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C<T>]) -> Self {
        let norm: T = psi.iter().map(|z| z.norm_sqr()).sum();
        let m = ComplexMatrix::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj() / cr(norm));
        Self(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.0
    }

    pub fn populations(&self) -> Vec<T> {
        self.0.real_diagonal()
    }

    /// Entry `(i, j)` (zero-based).
    #[inline]
    pub fn coherence(&self, i: usize, j: usize) -> C<T> {
        self.0[(i, j)]
    }

    pub fn is_diagonal(&self, tol: T) -> bool {
        self.0.is_diagonal(tol)
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending; column `k` of
/// `basis` is the eigenvector of `eigenvalues[k]`.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub eigenvalues: Vec<T>,
    pub basis: ComplexMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// `V f(Lambda) V^dagger` for a complex function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(T) -> C<T>) -> ComplexMatrix<T> {
        let n = self.basis.dim();
        let fl: Vec<C<T>> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            fl.iter().enumerate().fold(cr(T::zero()), |acc, (k, &f)| {
                acc + self.basis[(i, k)] * f * self.basis[(j, k)].conj()
            })
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        self.apply_fn(cr)
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic complex Jacobi eigensolver.
///
/// Sweeps stop once the off-diagonal Frobenius mass drops to `1e-13 ||H||_F`
/// (floored near machine precision for `f32`).
pub fn hermitian_eigen<T: Real>(h: &ComplexMatrix<T>) -> Result<HermitianEigen<T>, LinalgError> {
    let n = h.dim();
    let hmax = h.max_abs();
    let herm = h.hermiticity_residual();
    if herm > T::tol(1e-10) * hmax {
        return Err(LinalgError::NotHermitian {
            residual: herm.to_f64_lossy(),
        });
    }

    // symmetrize exactly so rotations act on a Hermitian matrix
    let mut a = ComplexMatrix::from_fn(n, |i, j| {
        if i == j {
            cr(h[(i, i)].re)
        } else {
            (h[(i, j)] + h[(j, i)].conj()) * cr(T::lit(0.5))
        }
    });
    let mut v = ComplexMatrix::identity(n);
    let threshold = T::tol(1e-13).max(T::epsilon() * T::lit(100.0)) * a.frobenius();

    let off_norm = |a: &ComplexMatrix<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in original index order
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let basis = ComplexMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { eigenvalues, basis })
}

/// One Jacobi rotation annihilating `a[p,q]`: `A <- G^dagger A G`, `V <- V G`,
/// with `G = diag(1, e^{-i phi}) R(c, s)` on the `(p, q)` plane.
fn rotate<T: Real>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    let phase = apq / cr(mag);
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (T::lit(2.0) * mag);
    let t = if theta >= T::zero() {
        T::one() / (theta + (theta * theta + T::one()).sqrt())
    } else {
        -T::one() / (-theta + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    // G entries
    let g_pp = cr(c);
    let g_pq = cr(s);
    let g_qp = cr(-s) * phase.conj();
    let g_qq = cr(c) * phase.conj();

    let n = a.dim();
    // A <- A G (columns p, q)
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
    }
    // A <- G^dagger A (rows p, q)
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = cr(T::zero());
    a[(q, p)] = cr(T::zero());
    a[(p, p)] = cr(a[(p, p)].re);
    a[(q, q)] = cr(a[(q, q)].re);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
}

/// `exp(-i H tau)` through the spectral decomposition of `H`.
pub fn unitary_from_hamiltonian<T: Real>(
    h: &ComplexMatrix<T>,
    tau: T,
) -> Result<ComplexMatrix<T>, LinalgError> {
    let eig = hermitian_eigen(h)?;
    Ok(eig.apply_fn(|l| cis(-l * tau)))
}

/// Trace over the second tensor factor of a `d_sys * d_anc` joint matrix.
pub fn partial_trace_second<T: Real>(
    joint: &ComplexMatrix<T>,
    d_sys: usize,
    d_anc: usize,
) -> Result<ComplexMatrix<T>, LinalgError> {
    if joint.dim() != d_sys * d_anc {
        return Err(LinalgError::DimensionMismatch {
            expected: d_sys * d_anc,
            found: joint.dim(),
        });
    }
    Ok(ComplexMatrix::from_fn(d_sys, |i, j| {
        (0..d_anc).fold(cr(T::zero()), |acc, k| {
            acc + joint[(i * d_anc + k, j * d_anc + k)]
        })
    }))
}

/// Reduced state of the first subsystem.
pub fn reduce_to_system<T: Real>(
    joint: &DensityMatrix<T>,
    d_sys: usize,
    d_anc: usize,
) -> Result<DensityMatrix<T>, LinalgError> {
    partial_trace_second(joint.matrix(), d_sys, d_anc).map(DensityMatrix::from_matrix_unchecked)
}

/// `D(rho, sigma) = 1/2 sum |eig(rho - sigma)|`.
pub fn trace_distance<T: Real>(
    rho: &DensityMatrix<T>,
    sigma: &DensityMatrix<T>,
) -> Result<T, LinalgError> {
    trace_distance_matrices(rho.matrix(), sigma.matrix())
}

pub(crate) fn trace_distance_matrices<T: Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
) -> Result<T, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = a - b;
    if diff.is_diagonal(T::zero()) {
        return Ok(half_l1(&diff.real_diagonal()));
    }
    // states are Hermitian only up to rounding, which can dominate a small
    // difference; check against the operands' scale, then symmetrize
    let scale = a.max_abs().max(b.max_abs()).max(T::one());
    let herm = diff.hermiticity_residual();
    if herm > T::tol(1e-10) * scale {
        return Err(LinalgError::NotHermitian {
            residual: herm.to_f64_lossy(),
        });
    }
    let half = cr(T::lit(0.5));
    let sym = ComplexMatrix::from_fn(diff.dim(), |i, j| {
        (diff[(i, j)] + diff[(j, i)].conj()) * half
    });
    let eig = hermitian_eigen(&sym)?;
    Ok(half_l1(&eig.eigenvalues))
}

/// `1/2 sum |x_i|`; the trace distance between commuting (diagonal) states.
pub fn half_l1<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| v.abs()).sum::<T>() * T::lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> M {
        let mut m = M::zeros(n);
        for i in 0..n {
            m[(i, i)] = c(rng.random_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    fn random_state(n: usize, rng: &mut impl Rng) -> DensityMatrix<f64> {
        let g = M::from_fn(n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = &g * &g.dagger();
        let tr = m.trace();
        DensityMatrix::from_matrix_unchecked(m.scale(tr.inv()))
    }

    fn pauli_x() -> M {
        M::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    #[test]
    fn kron_of_identities_is_identity() {
        assert_eq!(kron(&M::identity(2), &M::identity(3)), M::identity(6));
    }

    #[test]
    fn kron_builds_free_qutrit_qubit_diagonal() {
        let w = 1.3;
        let hs = M::from_real_diagonal(&[-w, 0.0, w]);
        let ha = M::from_real_diagonal(&[-w / 2.0, w / 2.0]);
        let h0 = &kron(&hs, &M::identity(2)) + &kron(&M::identity(3), &ha);
        let expected = [-1.5, -0.5, -0.5, 0.5, 0.5, 1.5].map(|x| x * w);
        assert!(h0.is_diagonal(0.0));
        for (got, want) in h0.real_diagonal().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn kron_index_convention() {
        let xx = kron(&pauli_x(), &pauli_x());
        assert_eq!(xx[(0, 3)], c(1.0, 0.0));
        assert_eq!(xx[(0, 1)], c(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(2, &mut rng);
        let k = kron(&a, &b);
        for ia in 0..3 {
            for ja in 0..3 {
                for ib in 0..2 {
                    for jb in 0..2 {
                        assert_eq!(k[(ia * 2 + ib, ja * 2 + jb)], a[(ia, ja)] * b[(ib, jb)]);
                    }
                }
            }
        }
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_permutation() {
        let h = M::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let e = hermitian_eigen(&h).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);
        // columns are the basis vectors e1, e2, e0
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert_eq!(e.basis[(row, col)], c(1.0, 0.0));
        }
    }

    #[test]
    fn eigen_of_flip_flop_block() {
        let (w, j) = (1.0, 0.37);
        let h = M::from_real_rows(&[vec![-w / 2.0, j], vec![j, -w / 2.0]]);
        let e = hermitian_eigen(&h).unwrap();
        // roots of (x + w/2)^2 - j^2
        assert!((e.eigenvalues[0] - (-w / 2.0 - j)).abs() < 1e-14);
        assert!((e.eigenvalues[1] - (-w / 2.0 + j)).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_random_twelve_by_twelve() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = random_hermitian(12, &mut rng);
        let e = hermitian_eigen(&h).unwrap();
        let resid = (&e.reconstruct() - &h).max_abs();
        assert!(resid <= 1e-10 * h.max_abs(), "residual {resid:e}");
        let unit = (&(&e.basis.dagger() * &e.basis) - &M::identity(12)).max_abs();
        assert!(unit <= 1e-12, "basis not unitary: {unit:e}");
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut h = M::identity(3);
        h[(0, 2)] = c(1.0, 0.0);
        assert!(matches!(
            hermitian_eigen(&h),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigen_matches_characteristic_roots_three_by_three() {
        // symmetrized 3-level rate matrix: eigenvalues 0, -(1-t), -(1+t) for G = 1
        let p: f64 = 0.8;
        let t = (p * (1.0 - p)).sqrt();
        let rows = vec![vec![-(1.0 - p), t, 0.0], vec![t, -1.0, t], vec![0.0, t, -p]];
        let e = hermitian_eigen(&M::from_real_rows(&rows)).unwrap();
        let want = [-(1.0 + t), -(1.0 - t), 0.0];
        for (g, w) in e.eigenvalues.iter().zip(want) {
            assert!((g - w).abs() < 1e-13, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_time_unitary_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(5, &mut rng);
        let u = unitary_from_hamiltonian(&h, 0.0).unwrap();
        assert!((&u - &M::identity(5)).max_abs() < 1e-14);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(8, &mut rng);
        let u = unitary_from_hamiltonian(&h, 2.7).unwrap();
        assert!((&(&u * &u.dagger()) - &M::identity(8)).max_abs() <= 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rs = random_state(3, &mut rng);
        let ra = random_state(2, &mut rng);
        let joint = kron(rs.matrix(), ra.matrix());
        let back = partial_trace_second(&joint, 3, 2).unwrap();
        assert!((&back - rs.matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state_is_mixed() {
        let s = 0.5f64.sqrt();
        let bell = DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let r = partial_trace_second(bell.matrix(), 2, 2).unwrap();
        assert!((&r - &M::identity(2).scale(c(0.5, 0.0))).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_state(6, &mut rng);
        let r = partial_trace_second(rho.matrix(), 3, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = c(0.0, 0.0);
                for k in 0..2 {
                    acc += rho.matrix()[(2 * i + k, 2 * j + k)];
                }
                assert!((r[(i, j)] - acc).norm() < 1e-15);
            }
        }
        assert!((r.trace() - rho.matrix().trace()).norm() < 1e-13);
        assert!(matches!(
            partial_trace_second(rho.matrix(), 4, 2),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trace_distance_basics() {
        let a = DensityMatrix::<f64>::basis_projector(2, 0);
        let b = DensityMatrix::<f64>::basis_projector(2, 1);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.2, 0.6];
        let d = trace_distance(
            &DensityMatrix::from_populations(&p).unwrap(),
            &DensityMatrix::from_populations(&q).unwrap(),
        )
        .unwrap();
        assert!((d - 0.5 * (0.3 + 0.1 + 0.4f64)).abs() < 1e-15);
        assert!(trace_distance(&a, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(M::identity(2)).is_err());
        let neg = M::from_real_diagonal(&[1.5, -0.5]);
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::new(M::from_real_diagonal(&[0.25, 0.75])).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unitary_group_property(seed in any::<u64>(), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(6, &mut rng);
            let u1 = unitary_from_hamiltonian(&h, t1).unwrap();
            let u2 = unitary_from_hamiltonian(&h, t2).unwrap();
            let u12 = unitary_from_hamiltonian(&h, t1 + t2).unwrap();
            prop_assert!((&(&u1 * &u2) - &u12).max_abs() <= 1e-10);
        }

        #[test]
        fn partial_trace_inverts_tensoring(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rs = random_state(4, &mut rng);
            let ra = random_state(2, &mut rng);
            let back = partial_trace_second(&kron(rs.matrix(), ra.matrix()), 4, 2).unwrap();
            prop_assert!((&back - rs.matrix()).max_abs() <= 1e-13);
        }

        #[test]
        fn trace_distance_is_a_metric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, cc) = (random_state(3, &mut rng), random_state(3, &mut rng), random_state(3, &mut rng));
            let ab = trace_distance(&a, &b).unwrap();
            let ba = trace_distance(&b, &a).unwrap();
            let bc = trace_distance(&b, &cc).unwrap();
            let ac = trace_distance(&a, &cc).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }
    }
}
