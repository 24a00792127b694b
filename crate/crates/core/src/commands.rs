//! Command implementations behind the `byzcode` binary.
//!
//! Every structured output carries `"schema": 1` and the library version.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::info::{JointPmf, SensorSet};
use crate::maxent::{closed_form_t1, closed_form_tm1, sum_rate_star_report, IpfOptions};
use crate::regions::{check_region, min_sum_rate, RatePoint, RegionMode};
use crate::sim::{run_trials, summarize, SimParams, Strategy, TrialOutcome, TrialSummary};
use crate::{Error, SCHEMA_VERSION, VERSION};

/// Environment variable capping the number of trial worker threads.
pub const THREADS_ENV: &str = "BYZCODE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("cannot read {path}: {cause}")]
    Read {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("cannot write {path}: {cause}")]
    Write {
        path: PathBuf,
        cause: std::io::Error,
    },

    /// Carries serde's line and column.
    #[error("{path}: {cause}")]
    Parse {
        path: PathBuf,
        cause: serde_json::Error,
    },

    #[error("{path}: {cause}")]
    Csv { path: PathBuf, cause: csv::Error },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Library(#[from] Error),
}

pub type CommandResult<T> = std::result::Result<T, CommandError>;

pub fn load_pmf(path: &Path) -> CommandResult<JointPmf> {
    let text = fs::read_to_string(path).map_err(|cause| CommandError::Read {
        path: path.to_path_buf(),
        cause,
    })?;
    serde_json::from_str(&text).map_err(|cause| CommandError::Parse {
        path: path.to_path_buf(),
        cause,
    })
}

fn write_file(path: &Path, contents: &str) -> CommandResult<()> {
    fs::write(path, contents).map_err(|cause| CommandError::Write {
        path: path.to_path_buf(),
        cause,
    })
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn nonempty_subsets(m: usize) -> impl Iterator<Item = SensorSet> {
    let mut all: Vec<SensorSet> = (1u32..(1 << m)).map(SensorSet::from_bits).collect();
    all.sort_by_key(|s| (s.len(), s.to_vec()));
    all.into_iter()
}

#[derive(Serialize)]
struct PairInfo {
    i: usize,
    j: usize,
    mutual_information: f64,
    /// Given all other sensors.
    conditional_mutual_information: f64,
}

/// Entropy of every nonempty subset and information between every pair.
pub fn info(p: &JointPmf, as_json: bool) -> CommandResult<String> {
    let m = p.num_sensors();
    let subsets: Vec<(SensorSet, f64)> = nonempty_subsets(m)
        .map(|s| Ok((s, p.entropy(s)?)))
        .collect::<Result<_, Error>>()?;
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (SensorSet::singleton(i), SensorSet::singleton(j));
            let rest = a.union(b).complement(m);
            pairs.push(PairInfo {
                i: i + 1,
                j: j + 1,
                mutual_information: p.mutual_information(a, b)?,
                conditional_mutual_information: p.conditional_mutual_information(a, b, rest)?,
            });
        }
    }
    if as_json {
        let rows: Vec<_> = subsets
            .iter()
            .map(|(s, h)| json!({ "sensors": s, "H": h }))
            .collect();
        return Ok(to_json(&json!({
            "schema": SCHEMA_VERSION,
            "version": VERSION,
            "alphabet_sizes": p.alphabet_sizes(),
            "joint_entropy": p.joint_entropy(),
            "subsets": rows,
            "pairs": pairs,
        })));
    }
    let mut out = String::new();
    let width = subsets
        .iter()
        .map(|(s, _)| s.to_string().len())
        .max()
        .unwrap_or(0)
        .max(7);
    writeln!(out, "{:<width$}  H(X_s)", "sensors").unwrap();
    for (s, h) in &subsets {
        writeln!(out, "{:<width$}  {h:.6}", s.to_string()).unwrap();
    }
    if !pairs.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "i  j  I(Xi;Xj)   I(Xi;Xj|rest)").unwrap();
        for q in &pairs {
            writeln!(
                out,
                "{:<2} {:<2} {:<10.6} {:.6}",
                q.i, q.j, q.mutual_information, q.conditional_mutual_information
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// `R*` with one row per minimal cover; the maximizing `q` is written to
/// `q_out` if given.
pub fn maxent(p: &JointPmf, t: usize, q_out: Option<&Path>) -> CommandResult<String> {
    let m = p.num_sensors();
    let report = sum_rate_star_report(p, t, &IpfOptions::default())?;
    let per_cover: Vec<_> = report
        .per_cover
        .iter()
        .map(|c| {
            json!({
                "cover": c.cover,
                "H": c.solution.entropy,
                "iterations": c.solution.iterations,
                "marginal_error": c.solution.marginal_error,
            })
        })
        .collect();
    let closed_form = if t == 0 {
        Some(p.joint_entropy())
    } else if t + 1 == m {
        Some(closed_form_tm1(p))
    } else if t == 1 {
        Some(closed_form_t1(p)?)
    } else {
        None
    };
    if let Some(path) = q_out {
        let q = &report.best().solution.q;
        let text = serde_json::to_string_pretty(q).expect("pmf serializes") + "\n";
        write_file(path, &text)?;
    }
    Ok(to_json(&json!({
        "schema": SCHEMA_VERSION,
        "version": VERSION,
        "t": t,
        "joint_entropy": p.joint_entropy(),
        "R_star": report.r_star,
        "best_cover": report.best().cover,
        "closed_form": closed_form,
        "per_cover": per_cover,
    })))
}

pub fn regions_check(p: &JointPmf, t: usize, rates: &str, mode: &str) -> CommandResult<String> {
    let rates: RatePoint = rates.parse()?;
    let mode: RegionMode = mode.parse()?;
    let verdict = check_region(&rates, p, t, mode)?;
    Ok(to_json(&json!({
        "schema": SCHEMA_VERSION,
        "version": VERSION,
        "t": t,
        "rates": rates,
        "mode": verdict.mode,
        "k": verdict.k,
        "achievable": verdict.achievable,
        "violation": verdict.violation,
    })))
}

pub fn regions_minsum(p: &JointPmf, k: usize) -> CommandResult<String> {
    let r = min_sum_rate(p, k)?;
    Ok(to_json(&json!({
        "schema": SCHEMA_VERSION,
        "version": VERSION,
        "k": r.k,
        "min_sum_rate": r.value,
        "point": r.point,
    })))
}

/// Parses a comma-separated list of 1-based sensor indices.
pub fn parse_traitors(list: &str, m: usize) -> CommandResult<SensorSet> {
    let mut set = SensorSet::EMPTY;
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let i: usize = part.parse().map_err(|_| {
            CommandError::Config(format!("traitor {part:?} is not a sensor number"))
        })?;
        if i == 0 || i > m {
            return Err(CommandError::Config(format!(
                "traitor {i} is outside 1..={m}"
            )));
        }
        set.insert(i - 1);
    }
    Ok(set)
}

/// Worker thread cap from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> CommandResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CommandError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

#[derive(Clone, Debug)]
pub struct SimulateConfig {
    pub dist: PathBuf,
    pub t: usize,
    /// 1-based, comma-separated.
    pub traitors: String,
    pub strategy: String,
    pub qtilde: Option<PathBuf>,
    pub k: usize,
    pub rounds: usize,
    pub eps: f64,
    pub functions: usize,
    pub trials: usize,
    pub seed: u64,
    pub typicality_eps: Option<f64>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub struct SimulateResult {
    pub outcomes: Vec<TrialOutcome>,
    pub summary: TrialSummary,
    pub report_json: String,
}

pub fn trials_csv(outcomes: &[TrialOutcome]) -> CommandResult<String> {
    let to_err = |cause| CommandError::Csv {
        path: PathBuf::from("trials.csv"),
        cause,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "trial",
        "honest_error",
        "session_error_kind",
        "sum_rate_bits_per_symbol",
        "final_cover",
    ])
    .map_err(to_err)?;
    for o in outcomes {
        let kind = o
            .session_error
            .map_or_else(|| "none".to_string(), |k| k.to_string());
        w.write_record([
            o.trial.to_string(),
            (o.honest_error as u8).to_string(),
            kind,
            o.sum_rate.to_string(),
            o.final_cover.to_string(),
        ])
        .map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CommandError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

/// Runs the trials, writes `out` and `log` if given, and returns the
/// report. Protocol errors inside sessions are data, not failures.
pub fn simulate(cfg: &SimulateConfig) -> CommandResult<SimulateResult> {
    let p = load_pmf(&cfg.dist)?;
    let m = p.num_sensors();
    let strategy: Strategy = cfg.strategy.parse()?;
    let traitors = parse_traitors(&cfg.traitors, m)?;
    let q_tilde = cfg.qtilde.as_deref().map(load_pmf).transpose()?;
    if strategy == Strategy::Fabricate && q_tilde.is_none() {
        return Err(CommandError::Config(
            "the fabricate strategy needs --qtilde".into(),
        ));
    }
    if strategy != Strategy::Fabricate && q_tilde.is_some() {
        return Err(CommandError::Config(
            "--qtilde is only used by the fabricate strategy".into(),
        ));
    }
    if cfg.trials == 0 {
        return Err(CommandError::Config("--trials must be at least 1".into()));
    }
    let params = SimParams {
        typicality_eps: cfg.typicality_eps,
        ..SimParams::new(cfg.k, cfg.rounds, cfg.eps, cfg.functions, cfg.seed, cfg.t)
    };
    params.validate(m)?;
    let r_star = sum_rate_star_report(&p, cfg.t, &IpfOptions::default())?.r_star;
    let outcomes = run_trials(
        &p,
        &params,
        traitors,
        strategy,
        q_tilde.as_ref(),
        cfg.trials,
        cfg.threads,
    )?;
    let summary = summarize(&outcomes);
    let report_json = to_json(&json!({
        "schema": SCHEMA_VERSION,
        "version": VERSION,
        "config": {
            "dist": cfg.dist,
            "t": cfg.t,
            "traitors": traitors,
            "strategy": strategy,
            "qtilde": cfg.qtilde,
            "k": cfg.k,
            "rounds": cfg.rounds,
            "eps": cfg.eps,
            "C": cfg.functions,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "typicality_eps": params.prune_eps(),
            "hash_bits_per_transaction": params.hash_bits(),
            "index_bits_per_phase": params.index_bits(),
        },
        "summary": summary,
        "R_star": r_star,
        "joint_entropy": p.joint_entropy(),
    }));
    if let Some(path) = &cfg.out {
        write_file(path, &report_json)?;
    }
    if let Some(path) = &cfg.log {
        write_file(path, &trials_csv(&outcomes)?)?;
    }
    Ok(SimulateResult {
        outcomes,
        summary,
        report_json,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr_pair() -> JointPmf {
        JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap()
    }

    #[test]
    fn info_examples() {
        let uniform = JointPmf::uniform(vec![2, 2]).unwrap();
        let text = info(&uniform, false).unwrap();
        assert!(text
            .lines()
            .any(|l| l.starts_with("{1,2}") && l.ends_with("2.000000")));
        let point = JointPmf::point_mass(vec![2, 3], &[1, 2]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&info(&point, true).unwrap()).unwrap();
        assert!(v["subsets"]
            .as_array()
            .unwrap()
            .iter()
            .all(|r| r["H"].as_f64().unwrap() == 0.0));
        let v: serde_json::Value =
            serde_json::from_str(&info(&corr_pair(), true).unwrap()).unwrap();
        assert!((v["joint_entropy"].as_f64().unwrap() - 1.721928).abs() < 1e-6);
        assert_eq!(v["schema"], 1);
    }

    #[test]
    fn maxent_endpoints_and_q_out() {
        let p = corr_pair();
        let v: serde_json::Value = serde_json::from_str(&maxent(&p, 0, None).unwrap()).unwrap();
        assert!((v["R_star"].as_f64().unwrap() - p.joint_entropy()).abs() < 1e-9);
        let dir = tempfile::tempdir().unwrap();
        let q_path = dir.path().join("q.json");
        let v: serde_json::Value =
            serde_json::from_str(&maxent(&p, 1, Some(&q_path)).unwrap()).unwrap();
        assert!((v["R_star"].as_f64().unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(v["per_cover"][0]["cover"], json!([[1], [2]]));
        let q = load_pmf(&q_path).unwrap();
        assert!((q.joint_entropy() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn traitor_lists() {
        assert_eq!(parse_traitors("3", 3).unwrap(), SensorSet::singleton(2));
        assert_eq!(
            parse_traitors("1, 2", 3).unwrap(),
            SensorSet::from_indices([0, 1])
        );
        assert_eq!(parse_traitors("", 3).unwrap(), SensorSet::EMPTY);
        assert!(parse_traitors("0", 3).is_err());
        assert!(parse_traitors("4", 3).is_err());
        assert!(parse_traitors("x", 3).is_err());
    }

    #[test]
    fn parse_errors_name_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        fs::write(
            &path,
            "{\n  \"alphabet_sizes\": [2, 2],\n  \"probs\": [0.5, 0.5, x]\n}",
        )
        .unwrap();
        let msg = load_pmf(&path).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        fs::write(
            &path,
            r#"{"alphabet_sizes": [2], "probs": [0.5, 0.5], "extra": 1}"#,
        )
        .unwrap();
        assert!(load_pmf(&path).unwrap_err().to_string().contains("extra"));
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let dist = dir.path().join("p.json");
        fs::write(&dist, serde_json::to_string(&corr_pair()).unwrap()).unwrap();
        let cfg = SimulateConfig {
            dist,
            t: 0,
            traitors: String::new(),
            strategy: "honest".into(),
            qtilde: None,
            k: 40,
            rounds: 1,
            eps: 0.1,
            functions: 4,
            trials: 3,
            seed: 1,
            typicality_eps: None,
            out: None,
            log: None,
            threads: Some(1),
        };
        let r = simulate(&cfg).unwrap();
        let csv = trials_csv(&r.outcomes).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "trial,honest_error,session_error_kind,sum_rate_bits_per_symbol,final_cover"
        );
        assert_eq!(lines.count(), 3);
        let v: serde_json::Value = serde_json::from_str(&r.report_json).unwrap();
        assert_eq!(v["config"]["C"], 4);
        assert!(simulate(&SimulateConfig {
            strategy: "fabricate".into(),
            ..cfg.clone()
        })
        .is_err());
        assert!(simulate(&SimulateConfig {
            strategy: "evil".into(),
            ..cfg
        })
        .is_err());
    }
}
