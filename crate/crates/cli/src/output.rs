use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

use crate::Failure;

pub const CURVE_SCHEMA: &str = "grouptest.curve/v1";
pub const MANIFEST_SCHEMA: &str = "grouptest.manifest/v1";
pub const RATES_SCHEMA: &str = "grouptest.rates/v1";
pub const FIGURE1_SCHEMA: &str = "grouptest.figure1/v1";
pub const ORACLE_SCHEMA: &str = "grouptest.oracle-check/v1";

/// Six significant digits, plain decimal where that stays short.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new leading digit, e.g. 9.999996
        let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
        if digits > 6 && decimals > 0 {
            let decimals = decimals - 1;
            return format!("{x:.decimals$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).context("writing CSV")?;
    for row in rows {
        w.write_record(row).context("writing CSV")?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("writing CSV: {e}"))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

pub fn json_string<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).context("serialising JSON")?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub canonical_config: String,
    pub master_seed: u64,
    pub seed_drawn: bool,
    pub generator: &'static str,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, canonical_config: String, master_seed: u64, seed_drawn: bool) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA,
            tool: "grouptest",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash,
            canonical_config,
            master_seed,
            seed_drawn,
            generator: grouptest::rng::GENERATOR_ID,
            started_unix_ms: unix_millis(),
            finished_unix_ms: 0,
            outputs: Vec::new(),
        }
    }
}
