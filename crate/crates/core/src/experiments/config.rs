//! Flat `key = value` sweep configs.
//!
//! Blank lines and `#` comments are ignored. Grids are written either as
//! `start:stop:count` (inclusive, linearly spaced) or as a comma list.

use std::collections::HashMap;

use super::{Engine, ExperimentError, InitialState, JtauAxis, SweepKind, SweepSpec};

const KEYS: &[&str] = &[
    "kind",
    "grid",
    "axis",
    "d",
    "omega",
    "beta",
    "j_tau",
    "j",
    "gamma",
    "tau",
    "epsilon",
    "engine",
    "seed",
    "repetitions",
    "n_max",
    "t_max",
    "j_lo",
    "j_hi",
    "initial",
];

/// Parses a grid expression; errors are plain messages for the caller to
/// attach a line to.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err("range grids are written start:stop:count".into());
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|e| format!("start `{}`: {e}", parts[0]))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|e| format!("stop `{}`: {e}", parts[1]))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|e| format!("count `{}`: {e}", parts[2]))?;
        match n {
            0 => return Err("count must be at least 1".into()),
            1 => vec![a],
            _ => (0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("grid value `{}`: {e}", s.trim()))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    if grid.is_empty() {
        return Err("grid is empty".into());
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err("grid values must be finite".into());
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err("grid must be strictly increasing".into());
    }
    Ok(grid)
}

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map(|(l, _)| *l).unwrap_or(0)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<V: std::str::FromStr>(&self, key: &str) -> Result<Option<V>, ExperimentError>
    where
        V::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<V>()
                .map(Some)
                .map_err(|e| ExperimentError::config(line, key, format!("`{v}`: {e}"))),
        }
    }
}

pub fn parse_config(text: &str) -> Result<SweepSpec, ExperimentError> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ExperimentError::config(
                line_no,
                line,
                "expected `key = value`",
            ));
        };
        let key = k.trim().to_ascii_lowercase();
        let key = if key == "m" {
            "repetitions".to_string()
        } else {
            key
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(ExperimentError::config(line_no, key, "unknown key"));
        }
        if map.contains_key(&key) {
            return Err(ExperimentError::config(line_no, key, "duplicate key"));
        }
        map.insert(key, (line_no, v.trim().to_string()));
    }
    let e = Entries { map };
    let req = |key: &str| ExperimentError::config(0, key, "missing required key");
    let check = |ok: bool, key: &str, reason: &str| -> Result<(), ExperimentError> {
        if ok {
            Ok(())
        } else {
            Err(ExperimentError::config(e.line(key), key, reason))
        }
    };

    let kind: SweepKind = e.get("kind")?.ok_or_else(|| req("kind"))?;
    let (gl, gtext) = e.raw("grid").ok_or_else(|| req("grid"))?;
    let grid = parse_grid(gtext).map_err(|r| ExperimentError::config(gl, "grid", r))?;

    let axis = match e.raw("axis") {
        None => JtauAxis::JTau,
        Some((l, v)) => match v.to_ascii_lowercase().replace('_', "").as_str() {
            "jtau" => JtauAxis::JTau,
            "tau" => JtauAxis::Tau,
            _ => {
                return Err(ExperimentError::config(
                    l,
                    "axis",
                    format!("`{v}`: expected jtau or tau"),
                ))
            }
        },
    };
    let d: usize = e.get("d")?.unwrap_or(3);
    let omega: f64 = e.get("omega")?.unwrap_or(1.0);
    let beta: f64 = e.get("beta")?.unwrap_or(10.0);
    let j_tau: Option<f64> = e.get("j_tau")?;
    let j: f64 = e.get("j")?.unwrap_or(1e-3);
    let gamma: f64 = e.get("gamma")?.unwrap_or(1.0);
    let tau: Option<f64> = e.get("tau")?;
    let epsilon: f64 = e.get("epsilon")?.unwrap_or(1e-4);
    let seed: u64 = e.get("seed")?.unwrap_or(0);
    let n_max: usize = e.get("n_max")?.unwrap_or(100_000);
    let t_max: Option<f64> = e.get("t_max")?;
    let j_lo: f64 = e.get("j_lo")?.unwrap_or(1e-3);
    let j_hi: f64 = e.get("j_hi")?.unwrap_or(std::f64::consts::PI * 1e-3);
    let ensemble = kind == SweepKind::RandomEnsembleVsBeta;
    let repetitions: usize = e
        .get("repetitions")?
        .unwrap_or(if ensemble { 20 } else { 1 });
    let engine: Engine = e.get("engine")?.unwrap_or(match kind {
        SweepKind::TsimVsBeta | SweepKind::TsimVsEpsilon => Engine::OdeSL,
        SweepKind::RandomEnsembleVsBeta => Engine::BruteForce,
        _ => Engine::Recursion,
    });
    let initial = match e.raw("initial") {
        None => InitialState::MaximallyMixed,
        Some((_, v)) if v.eq_ignore_ascii_case("mixed") => InitialState::MaximallyMixed,
        Some((l, v)) => {
            let p = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|err| ExperimentError::config(l, "initial", format!("`{v}`: {err}")))?;
            InitialState::Populations(p)
        }
    };

    check(d >= 2, "d", "need at least two levels")?;
    check(
        omega > 0.0 && omega.is_finite(),
        "omega",
        "must be positive",
    )?;
    check(
        beta >= 0.0,
        "beta",
        "must be >= 0 (use inf for zero temperature)",
    )?;
    check(
        epsilon > 0.0 && epsilon < 1.0,
        "epsilon",
        "must lie in (0, 1)",
    )?;
    check(j > 0.0 && j.is_finite(), "j", "must be positive")?;
    check(
        gamma > 0.0 && gamma.is_finite(),
        "gamma",
        "must be positive",
    )?;
    check(n_max >= 1, "n_max", "must be at least 1")?;
    check(repetitions >= 1, "repetitions", "must be at least 1")?;
    check(j_lo < j_hi, "j_hi", "need j_lo < j_hi")?;
    if let Some(t) = tau {
        check(t > 0.0 && t.is_finite(), "tau", "must be positive")?;
    }
    if let Some(t) = t_max {
        check(t > 0.0, "t_max", "must be positive")?;
    }
    if let Some(x) = j_tau {
        check(x > 0.0 && x.is_finite(), "j_tau", "must be positive")?;
    }
    if let InitialState::Populations(p) = &initial {
        check(p.len() == d, "initial", "need one population per level")?;
        check(
            p.iter().all(|&x| x >= 0.0),
            "initial",
            "populations must be nonnegative",
        )?;
        check(
            (p.iter().sum::<f64>() - 1.0).abs() <= 1e-10,
            "initial",
            "populations must sum to one",
        )?;
    }
    let engine_line = e.line("engine");
    match kind {
        SweepKind::NstarVsJtau => {
            check(grid[0] > 0.0, "grid", "J tau values must be positive")?;
            if engine == Engine::OdeSL {
                return Err(ExperimentError::config(
                    engine_line,
                    "engine",
                    "collision counts need a discrete engine",
                ));
            }
        }
        SweepKind::NstarVsBeta => {
            check(j_tau.is_some(), "j_tau", "required for this sweep kind")?;
            check(grid[0] >= 0.0, "grid", "beta values must be >= 0")?;
            if engine == Engine::OdeSL {
                return Err(ExperimentError::config(
                    engine_line,
                    "engine",
                    "collision counts need a discrete engine",
                ));
            }
        }
        SweepKind::TsimVsBeta => {
            check(grid[0] >= 0.0, "grid", "beta values must be >= 0")?;
            if engine != Engine::OdeSL {
                check(j_tau.is_some(), "j_tau", "required for discrete engines")?;
            }
        }
        SweepKind::TsimVsEpsilon => {
            check(
                grid[0] > 0.0 && *grid.last().unwrap() < 1.0,
                "grid",
                "epsilon values must lie in (0, 1)",
            )?;
            if engine != Engine::OdeSL {
                check(j_tau.is_some(), "j_tau", "required for discrete engines")?;
            }
        }
        SweepKind::RandomEnsembleVsBeta => {
            check(grid[0] >= 0.0, "grid", "beta values must be >= 0")?;
            if engine == Engine::OdeSL {
                return Err(ExperimentError::config(
                    engine_line,
                    "engine",
                    "random ensembles need a discrete engine",
                ));
            }
        }
    }

    Ok(SweepSpec {
        kind,
        grid,
        axis,
        d,
        omega,
        beta,
        j_tau,
        j,
        gamma,
        tau,
        epsilon,
        engine,
        seed,
        repetitions,
        n_max,
        t_max,
        j_lo,
        j_hi,
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("0.5, 1, 2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_grid("1,1").is_err());
        assert!(parse_grid("3,2").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_config("kind = nstar_vs_jtau\ngrid = 0.5:2.5:5\n").unwrap();
        assert_eq!(s.kind, SweepKind::NstarVsJtau);
        assert_eq!((s.d, s.omega, s.epsilon, s.beta), (3, 1.0, 1e-4, 10.0));
        assert_eq!(s.engine, Engine::Recursion);
        assert_eq!((s.seed, s.repetitions, s.n_max), (0, 1, 100_000));
        assert_eq!(s.axis, JtauAxis::JTau);
        let t = parse_config("kind = TsimVsBeta\ngrid = 1,2\n").unwrap();
        assert_eq!(t.engine, Engine::OdeSL);
        let r = parse_config("kind = random_ensemble_vs_beta\ngrid = 1\n").unwrap();
        assert_eq!((r.engine, r.repetitions), (Engine::BruteForce, 20));
    }

    #[test]
    fn comments_and_aliases() {
        let s = parse_config(
            "# header\nkind = random_ensemble_vs_beta # trailing\n\ngrid = 1\nm = 7\nbeta = inf\n",
        )
        .unwrap();
        assert_eq!(s.repetitions, 7);
        assert!(s.beta.is_infinite());
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        match parse_config("kind = nstar_vs_beta\ngrid = 1,2\nwibble = 3\n") {
            Err(ExperimentError::ConfigInvalid { line, field, .. }) => {
                assert_eq!((line, field.as_str()), (3, "wibble"));
            }
            other => panic!("{other:?}"),
        }
        match parse_config("kind = nstar_vs_beta\ngrid = 1,2\n") {
            Err(ExperimentError::ConfigInvalid { field, .. }) => assert_eq!(field, "j_tau"),
            other => panic!("{other:?}"),
        }
        match parse_config("kind = nstar_vs_beta\ngrid = 2,1\nj_tau = 1") {
            Err(ExperimentError::ConfigInvalid { line, field, .. }) => {
                assert_eq!((line, field.as_str()), (2, "grid"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config("grid = 1\n").is_err());
        assert!(parse_config("kind = nstar_vs_jtau\ngrid = 1\nd = x\n").is_err());
        assert!(parse_config("kind = nstar_vs_jtau\ngrid = 1\nengine = ode_sl\n").is_err());
        assert!(parse_config("kind = nstar_vs_jtau\ngrid = 1\nkind = tsim_vs_beta\n").is_err());
        assert!(parse_config("kind = nstar_vs_jtau\ngrid = 1\ninitial = 0.5,0.5\n").is_err());
    }
}
