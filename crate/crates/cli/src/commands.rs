use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use grouptest::decoders::{self, possible_defectives};
use grouptest::experiments::{self, estimate_threshold, figure1_data, sweep_tests_with_records, Figure1Row};
use grouptest::oracle::{random_instance, run_oracle_checks, OracleCheckConfig, OracleCheckReport};
use grouptest::rates;
use grouptest::{BitVec, DecodeResult, DefectiveSet, OutcomeVector, TestDesign};
use serde::Serialize;

use crate::config;
use crate::output::{self, sig6, RunManifest};
use crate::{Failure, Figure1Args, Format, Mutant, OracleArgs, OutputArgs, RatesArgs, SimulateArgs};

const DEFAULT_OUT_DIR: &str = "grouptest-out";

fn out_dir(args: &OutputArgs) -> PathBuf {
    args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn print(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).context("writing to standard output")?;
    Ok(())
}

fn announce_seed(seed: u64, drawn: bool) {
    if drawn {
        eprintln!("master seed: {seed} (drawn at random; pass --seed {seed} to replay)");
    }
}

#[derive(Debug, Serialize)]
struct RateRow {
    quantity: &'static str,
    value: f64,
    nu: Option<f64>,
    note: String,
}

impl RateRow {
    fn new(quantity: &'static str, b: &rates::RateBound) -> Self {
        let nu = b.optimal_nu.or(b.nu.map(|n| n.nu));
        let note = b.regime.map(|r| format!("{r:?}")).unwrap_or_default();
        Self { quantity, value: b.value, nu, note }
    }
}

fn rate_rows(args: &RatesArgs) -> Result<Vec<RateRow>, Failure> {
    if args.theta.is_none() && (args.n.is_none() || args.k.is_none()) {
        return Err(Failure::Validation("give --theta, or both --n and --k".into()));
    }
    if args.n.is_some() != args.k.is_some() {
        return Err(Failure::Validation("--n and --k go together".into()));
    }
    if (args.p.is_some() || args.nu.is_some()) && args.n.is_none() {
        return Err(Failure::Validation("--p and --nu need --n and --k".into()));
    }
    let theta = match (args.theta, args.n, args.k) {
        (Some(t), _, _) => Some(t),
        (None, Some(n), Some(k)) => rates::ProblemScale::from_counts(n, k)?.theta,
        _ => None,
    };

    let mut rows = Vec::new();
    if let Some(t) = theta {
        rows.push(RateRow::new("capacity", &rates::capacity(t)?));
        rows.push(RateRow::new("counting_bound", &rates::counting_bound(t)?));
        rows.push(RateRow::new("comp_rate", &rates::comp_max_rate(t)?));
        rows.push(RateRow::new("dd_rate", &rates::dd_rate(t)?));
    }
    if let (Some(n), Some(k)) = (args.n, args.k) {
        rows.push(RateRow { quantity: "log2_binom", value: rates::log_binom(n, k)?, nu: None, note: String::new() });
        rows.push(RateRow::new("t_star", &rates::t_star(n, k)?));
        if k >= 2 {
            rows.push(RateRow::new("t_sss", &rates::t_sss(n, k)?));
        }
        rows.push(RateRow::new("t_comp", &rates::t_comp(n, k)?));
        let p = match (args.p, args.nu) {
            (Some(p), _) => p,
            (None, Some(nu)) => rates::nu_to_p(nu, k)?,
            (None, None) => rates::nu_to_p(std::f64::consts::LN_2, k)?,
        };
        rows.push(RateRow::new("t_typ", &rates::t_typ(n, k, p)?));
    }
    Ok(rows)
}

const RATES_HEADER: [&str; 4] = ["quantity", "value", "nu", "note"];

fn rates_csv(rows: &[RateRow]) -> Result<String, Failure> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.quantity.to_string(), sig6(r.value), r.nu.map(sig6).unwrap_or_default(), r.note.clone()])
        .collect();
    output::csv_string(&RATES_HEADER, &body)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Rows<'a, T: Serialize> {
    rows: &'a [T],
}

pub fn rates(args: &RatesArgs) -> Result<(), Failure> {
    let rows = rate_rows(args)?;
    let text = match args.output.format {
        Some(Format::Csv) => rates_csv(&rows)?,
        Some(Format::Json) => output::json_string(&Document { schema_version: output::RATES_SCHEMA, body: &Rows { rows: &rows } })?,
        None => {
            let mut s = String::new();
            for r in &rows {
                let nu = r.nu.map(|v| format!("nu = {}", sig6(v))).unwrap_or_default();
                s.push_str(&format!("{:<16}{:>14}  {:<16}{}\n", r.quantity, sig6(r.value), nu, r.note));
            }
            s
        }
    };
    print(&text)?;
    if let Some(dir) = &args.output.out {
        output::write_file(dir, "rates.csv", &rates_csv(&rows)?)?;
    }
    Ok(())
}

pub const CURVE_HEADER: [&str; 12] = [
    "decoder", "tests", "trials", "successes", "estimate", "ci_low", "ci_high", "truncated", "n", "k", "p", "seed",
];

fn curve_csv(curve: &experiments::SuccessCurve) -> Result<String, Failure> {
    let mut rows = Vec::new();
    for pt in &curve.points {
        for d in &pt.decoders {
            rows.push(vec![
                d.algorithm.name().to_string(),
                pt.tests.to_string(),
                d.trials.to_string(),
                d.successes.to_string(),
                sig6(d.estimate),
                sig6(d.ci_low),
                sig6(d.ci_high),
                d.truncated.to_string(),
                curve.n.to_string(),
                curve.k.to_string(),
                sig6(curve.p),
                curve.master_seed.to_string(),
            ]);
        }
    }
    output::csv_string(&CURVE_HEADER, &rows)
}

#[derive(Serialize)]
struct ThresholdEntry {
    decoder: grouptest::Algorithm,
    level: f64,
    tests: Option<f64>,
    below: Option<(f64, f64)>,
    above: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct CurveDocument<'a> {
    schema_version: &'static str,
    config_hash: &'a str,
    canonical_config: &'a str,
    curve: &'a experiments::SuccessCurve,
    thresholds: &'a [ThresholdEntry],
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let resolved = config::resolve(args)?;
    let cfg = &resolved.config;
    announce_seed(cfg.master_seed, resolved.seed_drawn);
    let mut manifest = RunManifest::new("simulate", resolved.hash.clone(), resolved.canonical.clone(), cfg.master_seed, resolved.seed_drawn);

    let (curve, records) = sweep_tests_with_records(cfg)?;
    let thresholds: Vec<ThresholdEntry> = cfg
        .decoders
        .iter()
        .map(|&d| {
            let t = estimate_threshold(&curve, d, cfg.delta).ok();
            ThresholdEntry {
                decoder: d,
                level: 1.0 - cfg.delta,
                tests: t.map(|t| t.tests),
                below: t.map(|t| t.below),
                above: t.map(|t| t.above),
            }
        })
        .collect();

    let dir = out_dir(&args.output);
    let csv = curve_csv(&curve)?;
    let doc = CurveDocument {
        schema_version: output::CURVE_SCHEMA,
        config_hash: &resolved.hash,
        canonical_config: &resolved.canonical,
        curve: &curve,
        thresholds: &thresholds,
    };
    let json = output::json_string(&doc)?;
    manifest.outputs.push(output::write_file(&dir, "curve.csv", &csv)?.display().to_string());
    manifest.outputs.push(output::write_file(&dir, "curve.json", &json)?.display().to_string());
    if resolved.records {
        let mut lines = String::new();
        for r in &records {
            lines.push_str(&serde_json::to_string(r).context("serialising trial record")?);
            lines.push('\n');
        }
        manifest.outputs.push(output::write_file(&dir, "records.jsonl", &lines)?.display().to_string());
    }
    manifest.finished_unix_ms = output::unix_millis();
    output::write_file(&dir, "manifest.json", &output::json_string(&manifest)?)?;

    match args.output.format {
        Some(Format::Csv) => print(&csv)?,
        Some(Format::Json) => print(&json)?,
        None => {
            let mut s = format!(
                "n = {}, k = {}, p = {}, {} trials per point, seed {}\n",
                cfg.n,
                cfg.k,
                sig6(curve.p),
                cfg.trials,
                cfg.master_seed
            );
            for pt in &curve.points {
                for d in &pt.decoders {
                    s.push_str(&format!(
                        "{:<6} T = {:<8} success {:>9}  [{}, {}]\n",
                        d.algorithm.name(),
                        pt.tests,
                        sig6(d.estimate),
                        sig6(d.ci_low),
                        sig6(d.ci_high)
                    ));
                }
            }
            for t in &thresholds {
                match t.tests {
                    Some(x) => s.push_str(&format!("{}: success reaches {} near T = {}\n", t.decoder, sig6(t.level), sig6(x))),
                    None => s.push_str(&format!("{}: success never reaches {} on this grid\n", t.decoder, sig6(t.level))),
                }
            }
            s.push_str(&format!("wrote {}\n", dir.display()));
            print(&s)?;
        }
    }
    Ok(())
}

pub const FIGURE1_HEADER: [&str; 5] = ["theta", "counting", "capacity", "dd", "comp"];

fn figure1_csv(rows: &[Figure1Row]) -> Result<String, Failure> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![sig6(r.theta), sig6(r.counting), sig6(r.capacity), sig6(r.dd), sig6(r.comp)])
        .collect();
    output::csv_string(&FIGURE1_HEADER, &body)
}

pub fn figure1(args: &Figure1Args) -> Result<(), Failure> {
    if args.points == 0 || !(args.theta_min > 0.0 && args.theta_max < 1.0 && args.theta_min <= args.theta_max) {
        return Err(Failure::Validation("need 0 < theta-min <= theta-max < 1 and at least one point".into()));
    }
    let grid: Vec<f64> = if args.points == 1 {
        vec![args.theta_min]
    } else if (args.theta_min, args.theta_max, args.points) == (0.01, 0.99, 99) {
        experiments::default_theta_grid()
    } else {
        let step = (args.theta_max - args.theta_min) / (args.points - 1) as f64;
        (0..args.points).map(|i| args.theta_min + step * i as f64).collect()
    };
    let rows = figure1_data(&grid)?;
    let csv = figure1_csv(&rows)?;
    match args.output.format {
        Some(Format::Json) => print(&output::json_string(&Document { schema_version: output::FIGURE1_SCHEMA, body: &Rows { rows: &rows } })?)?,
        _ => print(&csv)?,
    }
    if let Some(dir) = &args.output.out {
        output::write_file(dir, "figure1.csv", &csv)?;
    }
    Ok(())
}

/// COMP that forgets items appearing in no test at all.
fn comp_drops_untested(design: &TestDesign, y: &OutcomeVector) -> grouptest::Result<DecodeResult> {
    let mut possible = possible_defectives(design, y)?;
    let mut tested = BitVec::zeros(design.items());
    for row in design.rows() {
        tested.or_assign(row);
    }
    possible.and_assign(&tested);
    let mut r = decoders::comp_decode(design, y)?;
    r.estimate = DefectiveSet::from_mask(&possible);
    Ok(r)
}

fn oracle_table(report: &OracleCheckReport) -> String {
    let mut s = format!("{:<36}{:>10}{:>12}  first counterexample\n", "invariant", "checked", "violations");
    for t in &report.invariants {
        let ce = t
            .first_counterexample
            .map(|(i, seed)| format!("instance {i}, seed {seed}"))
            .unwrap_or_else(|| "-".into());
        s.push_str(&format!("{:<36}{:>10}{:>12}  {ce}\n", t.name, t.checked, t.violations));
    }
    s.push_str(&format!(
        "union bound: P(|SSS|<k, |COMP|>k) = {} >= 1 - {} - {}\n",
        sig6(report.freq_both_fail),
        sig6(report.freq_sss_size_k),
        sig6(report.freq_comp_size_k)
    ));
    s
}

#[derive(Serialize)]
struct OracleDocument<'a> {
    schema_version: &'static str,
    seed: u64,
    passed: bool,
    report: &'a OracleCheckReport,
}

pub fn oracle_check(args: &OracleArgs) -> Result<(), Failure> {
    let (seed, drawn) = match args.seed {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    announce_seed(seed, drawn);
    let cfg = OracleCheckConfig {
        instances: args.instances,
        max_items: args.max_items,
        max_defectives: args.max_defectives,
        probabilities: args.p.clone(),
        intermediate_samples: args.intermediate_samples,
        seed,
    };
    if args.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Failure::Validation("design probabilities must lie in [0, 1]".into()));
    }
    let report = match args.inject_mutant {
        None => run_oracle_checks(&cfg, decoders::comp_decode)?,
        Some(Mutant::CompDropsUntested) => run_oracle_checks(&cfg, comp_drops_untested)?,
    };
    let passed = report.passed();
    match args.output.format {
        Some(Format::Json) => print(&output::json_string(&OracleDocument { schema_version: output::ORACLE_SCHEMA, seed, passed, report: &report })?)?,
        _ => print(&oracle_table(&report))?,
    }
    if let Some(dir) = &args.output.out {
        let doc = OracleDocument { schema_version: output::ORACLE_SCHEMA, seed, passed, report: &report };
        output::write_file(dir, "oracle-check.json", &output::json_string(&doc)?)?;
    }
    if passed {
        print(&format!("PASS: {} instances, seed {seed}\n", report.instances))?;
        Ok(())
    } else {
        let Some((name, index, inst_seed)) = report
            .invariants
            .iter()
            .find_map(|t| t.first_counterexample.map(|(i, s)| (t.name.clone(), i, s)))
        else {
            return Err(Failure::Invariant("union-bound accounting failed".into()));
        };
        let inst = random_instance(&cfg, index)?;
        let dump = serde_json::json!({
            "instance": index,
            "instance_seed": inst_seed,
            "master_seed": seed,
            "defectives": inst.defectives,
            "design": inst.design.to_json_form(),
            "outcomes": (0..inst.outcomes.len()).map(|t| if inst.outcomes.is_positive(t) { '1' } else { '0' }).collect::<String>(),
        });
        eprintln!("counterexample: {dump}");
        Err(Failure::Invariant(format!("{name} fails first at instance {index} (seed {inst_seed})")))
    }
}
