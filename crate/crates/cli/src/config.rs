//! Flat key-value run configuration, flag overrides and the canonical form
//! that the config hash is taken over.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use grouptest::experiments::{Density, ExperimentConfig};
use grouptest::Algorithm;
use sha2::{Digest, Sha256};

use crate::{Failure, SimulateArgs};

const KNOWN_KEYS: [&str; 14] = [
    "n",
    "k",
    "p",
    "nu",
    "tests",
    "t_grid",
    "trials",
    "decoders",
    "seed",
    "threads",
    "sss_budget",
    "delta",
    "records",
    "oracle_diagnostics",
];

/// Settings read from a config file; every key is optional.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub p: Option<f64>,
    pub nu: Option<f64>,
    pub tests: Option<Vec<usize>>,
    pub t_grid: Option<String>,
    pub trials: Option<usize>,
    pub decoders: Option<Vec<Algorithm>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub sss_budget: Option<u64>,
    pub delta: Option<f64>,
    pub records: Option<bool>,
    pub oracle_diagnostics: Option<bool>,
}

fn as_count(key: &str, v: &toml::Value, errs: &mut Vec<String>) -> Option<u64> {
    match v.as_integer() {
        Some(i) if i >= 0 => Some(i as u64),
        _ => {
            errs.push(format!("{key}: expected a non-negative integer, found {v}"));
            None
        }
    }
}

fn as_float(key: &str, v: &toml::Value, errs: &mut Vec<String>) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => {
            errs.push(format!("{key}: expected a number, found {v}"));
            None
        }
    }
}

fn as_bool(key: &str, v: &toml::Value, errs: &mut Vec<String>) -> Option<bool> {
    let b = v.as_bool();
    if b.is_none() {
        errs.push(format!("{key}: expected true or false, found {v}"));
    }
    b
}

impl FileConfig {
    /// Parses a flat TOML table, collecting every problem before failing.
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Failure::Validation(format!("config: {}", e.message())))?;
        let mut errs = Vec::new();
        let mut c = FileConfig::default();
        for (key, v) in &table {
            let key = key.as_str();
            match key {
                "n" => c.n = as_count(key, v, &mut errs).map(|x| x as usize),
                "k" => c.k = as_count(key, v, &mut errs).map(|x| x as usize),
                "trials" => c.trials = as_count(key, v, &mut errs).map(|x| x as usize),
                "threads" => c.threads = as_count(key, v, &mut errs).map(|x| x as usize),
                "seed" => c.seed = as_count(key, v, &mut errs),
                "sss_budget" => c.sss_budget = as_count(key, v, &mut errs),
                "p" => c.p = as_float(key, v, &mut errs),
                "nu" => c.nu = as_float(key, v, &mut errs),
                "delta" => c.delta = as_float(key, v, &mut errs),
                "records" => c.records = as_bool(key, v, &mut errs),
                "oracle_diagnostics" => c.oracle_diagnostics = as_bool(key, v, &mut errs),
                "t_grid" => match v.as_str() {
                    Some(s) => c.t_grid = Some(s.to_string()),
                    None => errs.push(format!("t_grid: expected a string, found {v}")),
                },
                "tests" => match v.as_array() {
                    Some(items) => {
                        c.tests = items.iter().map(|x| as_count(key, x, &mut errs).map(|x| x as usize)).collect()
                    }
                    None => errs.push(format!("tests: expected an array, found {v}")),
                },
                "decoders" => match v.as_array() {
                    Some(items) => {
                        let mut out = Vec::new();
                        for item in items {
                            match item.as_str().map(str::parse::<Algorithm>) {
                                Some(Ok(a)) => out.push(a),
                                _ => errs.push(format!("decoders: unknown decoder {item}")),
                            }
                        }
                        c.decoders = Some(out);
                    }
                    None => errs.push(format!("decoders: expected an array, found {v}")),
                },
                other => errs.push(format!(
                    "unknown key {other:?}; expected one of {}",
                    KNOWN_KEYS.join(", ")
                )),
            }
        }
        if errs.is_empty() {
            Ok(c)
        } else {
            Err(Failure::Validation(format!("invalid config:\n  {}", errs.join("\n  "))))
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }
}

/// Test counts from `START:STOP:POINTS`, evenly spaced and rounded.
pub fn parse_grid(text: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, points] = parts.as_slice() else {
        return Err(format!("t_grid {text:?}: expected START:STOP:POINTS"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("t_grid {text:?}: {s:?} is not a number"));
    let (a, b) = (num(start)?, num(stop)?);
    let points: usize = points.trim().parse().map_err(|_| format!("t_grid {text:?}: bad point count"))?;
    if points == 0 || a < 0.0 || b < a {
        return Err(format!("t_grid {text:?}: need 0 <= START <= STOP and POINTS >= 1"));
    }
    if points == 1 {
        return Ok(vec![a.round() as usize]);
    }
    Ok((0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).round() as usize)
        .collect())
}

/// A fully resolved simulation run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub seed_drawn: bool,
    pub records: bool,
    /// Sorted `key=value` lines of everything that affects results.
    pub canonical: String,
    pub hash: String,
}

/// Shortest round-trip decimal, so equal numbers always print alike.
fn canonical_float(x: f64) -> String {
    format!("{x:?}")
}

pub fn canonicalize(config: &ExperimentConfig) -> String {
    let mut map: BTreeMap<&str, String> = BTreeMap::new();
    map.insert("n", config.n.to_string());
    map.insert("k", config.k.to_string());
    match config.density {
        Density::Nu(nu) => map.insert("nu", canonical_float(nu)),
        Density::P(p) => map.insert("p", canonical_float(p)),
    };
    let join = |v: Vec<String>| v.join(",");
    map.insert("tests", join(config.t_grid.iter().map(|t| t.to_string()).collect()));
    map.insert("trials", config.trials.to_string());
    map.insert("decoders", join(config.decoders.iter().map(|d| d.name().to_string()).collect()));
    map.insert("seed", config.master_seed.to_string());
    map.insert("sss_budget", config.sss_budget.to_string());
    map.insert("delta", canonical_float(config.delta));
    map.insert("oracle_diagnostics", config.oracle_diagnostics.to_string());
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Merges file settings with flag overrides and validates the result.
pub fn resolve(args: &SimulateArgs) -> Result<Resolved, Failure> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut errs = Vec::new();

    let n = args.n.or(file.n);
    let k = args.k.or(file.k);
    if n.is_none() {
        errs.push("n is required".to_string());
    }
    if k.is_none() {
        errs.push("k is required".to_string());
    }

    // a flag for either density form replaces whatever the file said
    let density = match (args.p, args.nu) {
        (Some(p), _) => Density::P(p),
        (None, Some(nu)) => Density::Nu(nu),
        (None, None) => match (file.p, file.nu) {
            (Some(_), Some(_)) => {
                errs.push("config sets both p and nu".to_string());
                Density::Nu(std::f64::consts::LN_2)
            }
            (Some(p), None) => Density::P(p),
            (None, Some(nu)) => Density::Nu(nu),
            (None, None) => Density::Nu(std::f64::consts::LN_2),
        },
    };

    let grid = if let Some(t) = &args.tests {
        t.clone()
    } else if let Some(g) = &args.t_grid {
        parse_grid(g).unwrap_or_else(|e| {
            errs.push(e);
            Vec::new()
        })
    } else if let Some(t) = &file.tests {
        if file.t_grid.is_some() {
            errs.push("config sets both tests and t_grid".to_string());
        }
        t.clone()
    } else if let Some(g) = &file.t_grid {
        parse_grid(g).unwrap_or_else(|e| {
            errs.push(e);
            Vec::new()
        })
    } else {
        errs.push("a test grid is required (--tests or --t-grid)".to_string());
        Vec::new()
    };

    let decoders = if !args.decoders.is_empty() {
        args.decoders.clone()
    } else {
        file.decoders.clone().unwrap_or_else(|| vec![Algorithm::Comp, Algorithm::Dd])
    };
    let mut unique = Vec::new();
    for d in decoders {
        if !unique.contains(&d) {
            unique.push(d);
        }
    }

    let (seed, seed_drawn) = match args.seed.or(file.seed) {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };

    let mut config = ExperimentConfig::new(n.unwrap_or(0), k.unwrap_or(0), grid, args.trials.or(file.trials).unwrap_or(1000));
    config.density = density;
    config.decoders = unique;
    config.master_seed = seed;
    config.threads = args.threads.or(file.threads);
    if let Some(b) = args.sss_budget.or(file.sss_budget) {
        config.sss_budget = b;
    }
    if let Some(d) = args.delta.or(file.delta) {
        config.delta = d;
    }
    config.oracle_diagnostics = file.oracle_diagnostics.unwrap_or(false);

    if n.is_some() && k.is_some() {
        if let Err(grouptest::Error::InvalidConfig(more)) = config.validate() {
            errs.extend(more);
        }
    }
    if !errs.is_empty() {
        return Err(Failure::Validation(format!("invalid configuration:\n  {}", errs.join("\n  "))));
    }

    let canonical = canonicalize(&config);
    let hash = hash(&canonical);
    Ok(Resolved { config, seed_drawn, records: args.records || file.records.unwrap_or(false), canonical, hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ranges() {
        assert_eq!(parse_grid("100:300:3").unwrap(), vec![100, 200, 300]);
        assert_eq!(parse_grid("5:5:1").unwrap(), vec![5]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("3:1:4").is_err());
    }

    #[test]
    fn file_errors_collected() {
        let err = FileConfig::parse("n = -3\nbogus = 1\ndecoders = [\"XYZ\"]\n").unwrap_err();
        let Failure::Validation(msg) = err else { panic!() };
        assert_eq!(msg.lines().count(), 4, "{msg}");
    }

    #[test]
    fn file_values() {
        let c = FileConfig::parse("n = 1000\nk = 31\np = 1\ntests = [10, 20]\ndecoders = [\"comp\", \"SSS\"]\n").unwrap();
        assert_eq!(c.p, Some(1.0));
        assert_eq!(c.tests, Some(vec![10, 20]));
        assert_eq!(c.decoders, Some(vec![Algorithm::Comp, Algorithm::Sss]));
    }

    #[test]
    fn canonical_form_is_sorted_and_stable() {
        let mut c = ExperimentConfig::new(1000, 31, vec![100, 200], 50);
        c.master_seed = 9;
        let a = canonicalize(&c);
        let keys: Vec<&str> = a.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        c.threads = Some(4);
        assert_eq!(a, canonicalize(&c));
        assert_eq!(hash(&a).len(), 64);
        c.master_seed = 10;
        assert_ne!(hash(&a), hash(&canonicalize(&c)));
    }
}
