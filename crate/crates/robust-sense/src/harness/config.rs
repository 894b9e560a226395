//! Experiment configuration: flat `section.key = value` text, strict.
//!
//! Unknown keys are rejected, semantic violations are collected and
//! reported exhaustively, and matrix references are loaded (and the
//! path-times-structure composition cross-checked) at load time.
//! Paths are resolved relative to the config file.

use crate::adversary::{AttackKind, AttackSpec};
use crate::aggregators::{AggregationRule, AggregatorSpec, BaselineXSchedule, Wrapper};
use crate::error::{Error, Result};
use crate::estimator::{BoundStatement, Mode};
use crate::linalg::{read_matrix, read_vector};
use crate::problem::{BoxProjection, SensingProblem};
use crate::recover::compose_tomography;
use ndarray::{Array1, Array2};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Estimator {
        statement: BoundStatement,
    },
    Baseline {
        rule: AggregationRule,
        wrapper: Wrapper,
        schedule_x: BaselineXSchedule,
    },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Estimator { statement } => format!("estimator-{}", statement.label()),
            Method::Baseline { rule, wrapper, schedule_x } => {
                let w = match wrapper {
                    Wrapper::None => String::new(),
                    other => format!("+{}", other.label()),
                };
                format!("{}{w}-{}", rule.label(), schedule_x.label())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub a: Array2<f64>,
    pub mu: Array1<f64>,
    pub sigma: f64,
    pub m: usize,
    pub adversaries: BTreeSet<usize>,
    pub attack: Option<AttackKind>,
    pub mode: Mode,
    pub method: Method,
    pub n: u64,
    pub r: f64,
    pub trials: u64,
    pub seed: u64,
    pub box_lo: Array1<f64>,
    pub box_hi: Array1<f64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn problem(&self) -> Result<SensingProblem> {
        SensingProblem::new(
            self.a.clone(),
            self.mu.clone(),
            self.sigma,
            self.adversaries.clone(),
            self.m,
        )
    }

    pub fn bounds(&self) -> Result<BoxProjection> {
        BoxProjection::new(self.box_lo.clone(), self.box_hi.clone())
    }

    pub fn attack_spec(&self, problem: &SensingProblem) -> Result<Option<AttackSpec>> {
        match &self.attack {
            None => Ok(None),
            Some(kind) => Ok(Some(AttackSpec::on_all_adversaries(kind.clone(), problem))),
        }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.method.label(), self.mode.label())
    }

    /// True when two configs describe the same estimation problem (so
    /// their results are comparable).
    pub fn same_problem(&self, other: &Self) -> bool {
        self.a == other.a
            && self.mu == other.mu
            && self.sigma == other.sigma
            && self.m == other.m
            && self.adversaries == other.adversaries
            && self.box_lo == other.box_lo
            && self.box_hi == other.box_hi
            && self.n == other.n
            && (self.r - other.r).abs() < 1e-15
    }
}

const KNOWN_KEYS: &[&str] = &[
    "problem.a",
    "problem.p",
    "problem.b",
    "problem.mu",
    "problem.sigma",
    "problem.m",
    "problem.adversaries",
    "problem.scale",
    "attack.kind",
    "attack.value",
    "attack.scale",
    "run.mode",
    "run.method",
    "run.schedule",
    "run.n",
    "run.r",
    "run.trials",
    "run.seed",
    "baseline.rule",
    "baseline.wrapper",
    "baseline.s",
    "baseline.schedule_x",
    "box.lo",
    "box.hi",
    "output.csv",
];

struct RawConfig {
    entries: Vec<(String, String, usize)>,
}

impl RawConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }
}

fn parse_raw(text: &str, origin: &str) -> Result<RawConfig> {
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("expected `key = value`, found {line:?}"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("duplicate key {key:?}"),
            });
        }
        entries.push((key, value, idx + 1));
    }
    Ok(RawConfig { entries })
}

struct Checker<'a> {
    raw: &'a RawConfig,
    violations: Vec<String>,
}

impl<'a> Checker<'a> {
    fn violation(&mut self, msg: String) {
        self.violations.push(msg);
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        match self.raw.get(key) {
            None => None,
            Some(v) => match v.parse::<T>() {
                Ok(x) => Some(x),
                Err(_) => {
                    self.violation(format!("{key}: {v:?} is not a valid {what}"));
                    None
                }
            },
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        if self.raw.get(key).is_none() {
            self.violation(format!("{key}: required key is missing"));
            return None;
        }
        self.parse(key, what)
    }

    fn list_f64(&mut self, key: &str) -> Option<Array1<f64>> {
        let v = self.raw.get(key)?;
        let mut out = Vec::new();
        for tok in v.split(',') {
            match tok.trim().parse::<f64>() {
                Ok(x) => out.push(x),
                Err(_) => {
                    self.violation(format!("{key}: {tok:?} is not a number"));
                    return None;
                }
            }
        }
        Some(Array1::from_vec(out))
    }

    fn list_usize(&mut self, key: &str) -> Option<Vec<usize>> {
        let v = self.raw.get(key)?;
        if v.is_empty() {
            return Some(Vec::new());
        }
        let mut out = Vec::new();
        for tok in v.split(',') {
            match tok.trim().parse::<usize>() {
                Ok(x) => out.push(x),
                Err(_) => {
                    self.violation(format!("{key}: {tok:?} is not a worker index"));
                    return None;
                }
            }
        }
        Some(out)
    }
}

/// Parse and validate a config from text. `base_dir` anchors relative
/// matrix paths.
pub fn parse_config(text: &str, origin: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw = parse_raw(text, origin)?;
    let mut ck = Checker {
        raw: &raw,
        violations: Vec::new(),
    };

    for (key, _, line) in &raw.entries {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            ck.violation(format!("line {line}: unknown key {key:?}"));
        }
    }

    let resolve = |p: &str| -> PathBuf { base_dir.join(p) };
    let load_mat = |ck: &mut Checker, key: &str| -> Option<Array2<f64>> {
        let p = ck.raw.get(key)?.to_string();
        match read_matrix(&resolve(&p)) {
            Ok(m) => Some(m),
            Err(e) => {
                ck.violation(format!("{key}: {e}"));
                None
            }
        }
    };

    let a_file = load_mat(&mut ck, "problem.a");
    let p_file = load_mat(&mut ck, "problem.p");
    let b_file = load_mat(&mut ck, "problem.b");
    let mu = match ck.raw.get("problem.mu") {
        None => {
            ck.violation("problem.mu: required key is missing".into());
            None
        }
        Some(p) => match read_vector(&resolve(p)) {
            Ok(v) => Some(v),
            Err(e) => {
                ck.violation(format!("problem.mu: {e}"));
                None
            }
        },
    };

    let a = match (a_file, p_file, b_file) {
        (Some(a), None, None) => Some(a),
        (a_opt, Some(p), Some(b)) => match compose_tomography(&p, &b) {
            Ok(composed) => {
                if let Some(a) = a_opt {
                    if a != composed {
                        ck.violation(
                            "problem.a: provided matrix disagrees with the path-times-structure composition"
                                .into(),
                        );
                    }
                }
                Some(composed)
            }
            Err(e) => {
                ck.violation(format!("problem.p/problem.b: {e}"));
                None
            }
        },
        (None, None, None) => {
            ck.violation("problem.a (or problem.p + problem.b): required key is missing".into());
            None
        }
        _ => {
            ck.violation("problem.p and problem.b must be given together".into());
            None
        }
    };

    let scale: f64 = ck.parse("problem.scale", "number").unwrap_or(1.0);
    if scale == 0.0 {
        ck.violation("problem.scale: must be nonzero".into());
    }
    let a = a.map(|m| &m * scale);

    let sigma: Option<f64> = ck.required("problem.sigma", "number");
    if let Some(s) = sigma {
        if s.is_nan() || s < 0.0 {
            ck.violation(format!("problem.sigma: {s} must be >= 0"));
        }
    }
    let m: Option<usize> = ck.required("problem.m", "nonnegative integer");
    let adversaries: BTreeSet<usize> = ck
        .list_usize("problem.adversaries")
        .unwrap_or_default()
        .into_iter()
        .collect();

    let attack = match ck.raw.get("attack.kind").unwrap_or("none") {
        "none" => None,
        "baruch" => Some(AttackKind::Baruch),
        "constant" => {
            let v: f64 = ck.parse("attack.value", "number").unwrap_or(0.0);
            Some(AttackKind::Constant(v))
        }
        "sign_flip" => Some(AttackKind::SignFlip),
        "random_large" => {
            let s: f64 = ck.parse("attack.scale", "number").unwrap_or(1000.0);
            Some(AttackKind::RandomLarge(s))
        }
        other => {
            ck.violation(format!(
                "attack.kind: unknown kind {other:?} (expected none|baruch|constant|sign_flip|random_large)"
            ));
            None
        }
    };

    let mode = match ck.raw.get("run.mode") {
        None => {
            ck.violation("run.mode: required key is missing".into());
            None
        }
        Some("sync") => Some(Mode::Sync),
        Some("async") => Some(Mode::Async),
        Some(other) => {
            ck.violation(format!("run.mode: {other:?} is not sync|async"));
            None
        }
    };

    let statement = match ck.raw.get("run.schedule").unwrap_or("s3") {
        "s1" => Some(BoundStatement::ConstConst),
        "s2" => Some(BoundStatement::ConstDecay),
        "s3" => Some(BoundStatement::DecayDecay),
        other => {
            ck.violation(format!("run.schedule: {other:?} is not s1|s2|s3"));
            None
        }
    };

    let method = match ck.raw.get("run.method") {
        None => {
            ck.violation("run.method: required key is missing".into());
            None
        }
        Some("estimator") => statement.map(|statement| Method::Estimator { statement }),
        Some("baseline") => {
            let rule = match ck.raw.get("baseline.rule") {
                None => {
                    ck.violation("baseline.rule: required for run.method = baseline".into());
                    None
                }
                Some(r) => match AggregationRule::parse(r) {
                    Ok(rule) => Some(rule),
                    Err(e) => {
                        ck.violation(format!("baseline.rule: {e}"));
                        None
                    }
                },
            };
            let s: usize = ck.parse("baseline.s", "positive integer").unwrap_or(3);
            if s == 0 {
                ck.violation("baseline.s: must be >= 1".into());
            }
            let wrapper = match ck.raw.get("baseline.wrapper").unwrap_or("none") {
                "none" => Some(Wrapper::None),
                "bucketing" => Some(Wrapper::Bucketing { s: s.max(1) }),
                "buffered" => Some(Wrapper::Buffered { s: s.max(1) }),
                other => {
                    ck.violation(format!(
                        "baseline.wrapper: {other:?} is not none|bucketing|buffered"
                    ));
                    None
                }
            };
            let schedule_x = match ck.raw.get("baseline.schedule_x").unwrap_or("sqrt") {
                "sqrt" => Some(BaselineXSchedule::Sqrt),
                "pow09" => Some(BaselineXSchedule::Pow09),
                other => {
                    ck.violation(format!("baseline.schedule_x: {other:?} is not sqrt|pow09"));
                    None
                }
            };
            match (rule, wrapper, schedule_x) {
                (Some(rule), Some(wrapper), Some(schedule_x)) => Some(Method::Baseline {
                    rule,
                    wrapper,
                    schedule_x,
                }),
                _ => None,
            }
        }
        Some(other) => {
            ck.violation(format!("run.method: {other:?} is not estimator|baseline"));
            None
        }
    };

    let n: Option<u64> = ck.required("run.n", "positive integer");
    if let Some(n) = n {
        if n == 0 {
            ck.violation("run.n: must be >= 1".into());
        }
    }
    let r: f64 = ck.parse("run.r", "number").unwrap_or(0.5);
    if !(r > 0.0 && r < 1.0) {
        ck.violation(format!("run.r: {r} must lie in (0, 1)"));
    }
    let trials: Option<u64> = ck.required("run.trials", "positive integer");
    if let Some(t) = trials {
        if t == 0 {
            ck.violation("run.trials: must be >= 1".into());
        }
    }
    let seed: Option<u64> = ck.required("run.seed", "integer");

    let box_lo = ck.list_f64("box.lo");
    let box_hi = ck.list_f64("box.hi");
    if box_lo.is_none() && ck.raw.get("box.lo").is_none() {
        ck.violation("box.lo: required key is missing".into());
    }
    if box_hi.is_none() && ck.raw.get("box.hi").is_none() {
        ck.violation("box.hi: required key is missing".into());
    }

    let output = ck.raw.get("output.csv").map(resolve);

    // Cross-field checks once the pieces exist.
    if let (Some(a), Some(mu)) = (&a, &mu) {
        if mu.len() != a.ncols() {
            ck.violation(format!(
                "problem.mu: length {} does not match the {} matrix columns",
                mu.len(),
                a.ncols()
            ));
        }
        if let Some(m) = m {
            if m > a.nrows() {
                ck.violation(format!(
                    "problem.m: budget {m} exceeds the {} workers",
                    a.nrows()
                ));
            }
            if adversaries.len() > m {
                ck.violation(format!(
                    "problem.adversaries: {} listed workers exceed budget m = {m}",
                    adversaries.len()
                ));
            }
        }
        if let Some(&w) = adversaries.iter().next_back() {
            if w >= a.nrows() {
                ck.violation(format!(
                    "problem.adversaries: index {w} out of range for {} workers",
                    a.nrows()
                ));
            }
        }
        if let (Some(lo), Some(hi)) = (&box_lo, &box_hi) {
            if lo.len() != a.ncols() || hi.len() != a.ncols() {
                ck.violation("box.lo/box.hi: dimension does not match the matrix columns".into());
            } else {
                if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                    ck.violation("box.lo/box.hi: lo exceeds hi in some coordinate".into());
                }
                if mu
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .any(|(v, (l, h))| v < l || v > h)
                {
                    ck.violation("box: the hidden mean must lie inside the projection box".into());
                }
            }
        }
    }
    if !adversaries.is_empty() && attack.is_none() {
        ck.violation("attack.kind: adversarial workers are listed but no attack is configured".into());
    }
    if attack.is_some() && adversaries.is_empty() {
        ck.violation("problem.adversaries: an attack is configured but no worker is adversarial".into());
    }

    if !ck.violations.is_empty() {
        let mut msg = ck.violations;
        msg.sort();
        return Err(Error::ConfigInvalid(msg.join("\n")));
    }

    Ok(ExperimentConfig {
        a: a.expect("validated"),
        mu: mu.expect("validated"),
        sigma: sigma.expect("validated"),
        m: m.expect("validated"),
        adversaries,
        attack,
        mode: mode.expect("validated"),
        method: method.expect("validated"),
        n: n.expect("validated"),
        r,
        trials: trials.expect("validated"),
        seed: seed.expect("validated"),
        box_lo: box_lo.expect("validated"),
        box_hi: box_hi.expect("validated"),
        output,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, &path.display().to_string(), base)
}

/// Aggregator spec implied by a baseline config, with the momentum
/// defaults of the shipped comparison experiments.
pub fn baseline_spec(cfg: &ExperimentConfig) -> Result<Option<AggregatorSpec>> {
    match &cfg.method {
        Method::Estimator { .. } => Ok(None),
        Method::Baseline { rule, wrapper, .. } => Ok(Some(AggregatorSpec::experiment_defaults(
            *rule,
            *wrapper,
            cfg.m,
            cfg.mode,
        )?)),
    }
}


#[cfg(test)]
pub(crate) fn demo_config_text() -> String {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    format!(
        "problem.a = {}/demo_A.txt\nproblem.mu = {}/demo_mu.txt\nproblem.sigma = 1\nproblem.m = 1\nproblem.adversaries = 6\nattack.kind = baruch\nrun.mode = async\nrun.method = estimator\nrun.schedule = s3\nrun.n = 300\nrun.trials = 3\nrun.seed = 11\nbox.lo = 0,0,0,0\nbox.hi = 30,30,30,30\n",
        dir.display(),
        dir.display()
    )
}
