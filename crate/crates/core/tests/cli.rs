//! The command-line driver and the strong-coupling golden file.

use std::path::PathBuf;
use std::process::Command;

use ri_thermalizer::collision::{CollisionConfig, Path};
use ri_thermalizer::experiments::{format_csv, parse_config, parse_csv, run_sweep};
use ri_thermalizer::linalg::DensityMatrix;
use ri_thermalizer::models::Model;
use ri_thermalizer::sim_time::nstar_simulated;

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ri-thermalizer"));
    c.env_remove("RI_THERMALIZER_THREADS");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ri-thermalizer-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn golden_strong_coupling_sweep() {
    let text = std::fs::read_to_string(repo("configs/nstar_vs_tau_strong.cfg")).unwrap();
    let golden = std::fs::read_to_string(repo("crates/core/tests/golden/nstar_vs_tau_strong.csv")).unwrap();
    let records = run_sweep(&parse_config(&text).unwrap()).unwrap();
    assert_eq!(format_csv(&records), golden);

    // spot-check rows against the exact joint-unitary simulation
    let model = Model::flip_flop(3, 1.0, 10.0, 10.0).unwrap();
    for r in parse_csv(&golden).unwrap().iter().step_by(7) {
        let cfg = CollisionConfig::new(r.point, 100_000, 1e-4).unwrap();
        let sim = nstar_simulated(
            &DensityMatrix::maximally_mixed(3),
            &model,
            &cfg,
            Path::BruteForce,
        )
        .unwrap();
        assert_eq!(
            sim.n_star.value().map(|n| n as f64),
            Some(r.value),
            "tau = {}",
            r.point
        );
    }
}

#[test]
fn sweep_writes_csv_and_honours_overrides() {
    let cfg = scratch("ens.cfg");
    std::fs::write(
        &cfg,
        "kind = random_ensemble_vs_beta\ngrid = 1,2\nm = 3\nepsilon = 0.05\n",
    )
    .unwrap();
    let run = |seed: &str, threads: &str, out: &PathBuf| {
        let st = bin()
            .args([
                "sweep",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ])
            .env("RI_THERMALIZER_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("5", "1", &scratch("a.csv"));
    let b = run("5", "4", &scratch("b.csv"));
    let c = run("6", "2", &scratch("c.csv"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("point,value,stderr,reachable\n"));
    assert_eq!(parse_csv(&a).unwrap().len(), 2);
}

#[test]
fn engine_override_is_validated() {
    let cfg = scratch("jt.cfg");
    std::fs::write(&cfg, "kind = nstar_vs_jtau\ngrid = 1,2\n").unwrap();
    let out = bin()
        .args(["sweep", cfg.to_str().unwrap(), "--engine", "brute_force"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .args(["sweep", cfg.to_str().unwrap(), "--engine", "ode_sl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let bad = scratch("bad.cfg");
    std::fs::write(&bad, "kind = nstar_vs_jtau\ngrid = 1\nbogus = 3\n").unwrap();
    let out = bin()
        .args(["sweep", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");

    let out = bin()
        .args(["sweep", "/definitely/not/here.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let good = scratch("good.cfg");
    std::fs::write(&good, "kind = nstar_vs_jtau\ngrid = 1\n").unwrap();
    let out = bin()
        .args([
            "sweep",
            good.to_str().unwrap(),
            "--out",
            "/definitely/not/here/out.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validate_and_spectra_subcommands() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 5 && !text.contains("FAIL"));

    let out = bin().args(["spectra", "4", "0.9", "0.6"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("xi") && text.contains("lambda"));
}
