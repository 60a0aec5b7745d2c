//! Real branches of the Lambert W function, the inverse of `w -> w e^w`.

use super::SimTimeError;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambertBranch {
    /// `W_0`, defined on `z >= -1/e`, values `w >= -1`.
    Principal,
    /// `W_{-1}`, defined on `-1/e <= z < 0`, values `w <= -1`.
    LowerMinusOne,
}

/// Residual bound `|w e^w - z| <= 1e-12 max(1, |z|)` (floored for `f32`).
pub fn residual_tolerance<T: Real>(z: T) -> T {
    T::tol(1e-12) * z.abs().max(T::one())
}

/// Square-root series about the branch point in `p = +-sqrt(2 (1 + e z))`.
fn branch_point_series<T: Real>(p: T) -> T {
    let c = [
        -1.0,
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
    ];
    c.iter()
        .rev()
        .fold(T::zero(), |acc, &k| acc * p + T::lit(k))
}

pub fn lambert_w<T: Real>(branch: LambertBranch, z: T) -> Result<T, SimTimeError> {
    let inv_e = (-T::one()).exp();
    let out_of_domain = || SimTimeError::OutOfDomain {
        z: z.to_f64_lossy(),
        branch,
    };
    if z.is_nan() {
        return Err(out_of_domain());
    }
    let q = z + inv_e;
    // tolerate rounding of -1/e itself
    if q < -T::epsilon() * T::lit(4.0) {
        return Err(out_of_domain());
    }
    if branch == LambertBranch::LowerMinusOne && z >= T::zero() {
        return Err(out_of_domain());
    }
    if branch == LambertBranch::Principal && z == T::zero() {
        return Ok(T::zero());
    }
    if branch == LambertBranch::Principal && z.is_infinite() {
        return Ok(T::infinity());
    }

    let sign = match branch {
        LambertBranch::Principal => T::one(),
        LambertBranch::LowerMinusOne => -T::one(),
    };
    let q = q.max(T::zero());
    let p = sign * (T::lit(2.0) * T::E() * q).sqrt();
    if q < T::lit(1e-6) {
        return Ok(branch_point_series(p));
    }

    let mut w = if q < T::lit(0.25) {
        branch_point_series(p)
    } else {
        match branch {
            LambertBranch::Principal => {
                if z < T::E() {
                    (T::one() + z).ln()
                } else {
                    let l1 = z.ln();
                    let l2 = l1.ln();
                    l1 - l2 + l2 / l1
                }
            }
            LambertBranch::LowerMinusOne => {
                let l1 = (-z).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    };

    let tol = residual_tolerance(z);
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - z;
        if f.abs() <= tol * T::lit(1e-2) {
            break;
        }
        let wp1 = w + T::one();
        let denom = ew * wp1 - (w + T::lit(2.0)) * f / (T::lit(2.0) * wp1);
        if denom == T::zero() || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        w = next;
        if step.abs() <= T::epsilon() * w.abs().max(T::one()) {
            break;
        }
    }
    // keep the branch ranges exact under rounding
    Ok(match branch {
        LambertBranch::Principal => w.max(-T::one()),
        LambertBranch::LowerMinusOne => w.min(-T::one()),
    })
}
