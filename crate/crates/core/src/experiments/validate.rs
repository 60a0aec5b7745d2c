//! Quick oracle cross-checks behind the `validate` subcommand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::collision::{evolve, CollisionConfig, Path};
use crate::linalg::{trace_distance, DensityMatrix};
use crate::models::{random_ginibre_state, Model};
use crate::sim_time::{lambert_w, residual_tolerance, LambertBranch};
use crate::spectral::{lambda_closed, lambda_numeric, xi_closed, xi_numeric};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed discrepancy.
    pub worst: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
    }
}

fn recursion_vs_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for d in [2, 3, 4] {
        let model = Model::flip_flop(d, 1.0, 1.3, 1.0).expect("valid model");
        let cfg = CollisionConfig::new(0.7, 30, 1e-4).expect("valid config");
        let rho0 = random_ginibre_state::<f64>(d, &mut rng);
        let a = evolve(&rho0, &model, &cfg, 30, Path::Recursion).expect("recursion");
        let b = evolve(&rho0, &model, &cfg, 30, Path::BruteForce).expect("brute force");
        for k in 0..a.len() {
            let (sa, sb) = (a.state(k), b.state(k));
            let diff = (sa.matrix() - sb.matrix()).max_abs();
            worst = worst.max(diff);
        }
    }
    check("recursion matches brute force", worst, 1e-12)
}

fn gibbs_fixed_point() -> Check {
    let mut worst: f64 = 0.0;
    for (d, beta) in [(2, 0.5), (3, 1.0), (5, 5.0)] {
        let model = Model::flip_flop(d, 1.0, beta, 1.0).expect("valid model");
        let cfg = CollisionConfig::new(0.9, 100, 1e-4).expect("valid config");
        let rho0 = model.target_state();
        let tr = evolve(&rho0, &model, &cfg, 100, Path::BruteForce).expect("evolve");
        let dist = trace_distance(&tr.state(tr.len() - 1), &rho0).expect("distance");
        worst = worst.max(dist);
    }
    check("Gibbs state is a fixed point", worst, 1e-11)
}

fn exact_cooling() -> Check {
    let mut worst: f64 = 0.0;
    for d in 2..=6 {
        let model = Model::flip_flop(d, 1.0, f64::INFINITY, 1.0).expect("valid model");
        let cfg = CollisionConfig::new(std::f64::consts::FRAC_PI_2, d, 1e-4).expect("valid config");
        let tr = evolve(
            &DensityMatrix::maximally_mixed(d),
            &model,
            &cfg,
            d - 1,
            Path::BruteForce,
        )
        .expect("evolve");
        worst = worst.max(tr.distances[d - 1]);
    }
    check("zero-temperature cooling in d-1 collisions", worst, 1e-14)
}

fn closed_spectra() -> Check {
    let mut worst: f64 = 0.0;
    for d in 2..=10 {
        for &(p, x) in &[(0.6, 0.4), (0.83, 1.1), (0.97, 2.5)] {
            let pairs: [(Vec<f64>, Vec<f64>); 2] = [
                (xi_closed(d, p, x), xi_numeric(d, p, x).expect("spectrum")),
                (
                    lambda_closed(d, p, x),
                    lambda_numeric(d, p, x).expect("spectrum"),
                ),
            ];
            for (mut closed, numeric) in pairs {
                closed.sort_by(|a, b| b.total_cmp(a));
                for (a, b) in closed.iter().zip(&numeric) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    check("closed-form spectra", worst, 1e-10)
}

fn lambert_residuals() -> Check {
    let inv_e = (-1.0f64).exp();
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let t = k as f64 / 199.0;
        for (branch, z) in [
            (LambertBranch::LowerMinusOne, -inv_e * (1e-12f64).powf(t)),
            (LambertBranch::Principal, -inv_e + 1e4 * t * t),
        ] {
            let w = lambert_w(branch, z).expect("in domain");
            worst = worst.max((w * w.exp() - z).abs() / residual_tolerance(z));
        }
    }
    check("Lambert W residuals (relative to bound)", worst, 1.0)
}

/// Runs every check; never panics on a numerical mismatch, only reports it.
pub fn run_validation() -> Vec<Check> {
    vec![
        recursion_vs_brute_force(),
        gibbs_fixed_point(),
        exact_cooling(),
        closed_spectra(),
        lambert_residuals(),
    ]
}
