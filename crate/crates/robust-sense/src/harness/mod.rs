//! Experiment orchestration: seeded multi-trial runs, CSV and
//! plot-series emission, rate-slope fitting, method comparison, and the
//! end-to-end tomography demo.
//!
//! Trials run in parallel (thread count via `RAYON_NUM_THREADS`) but
//! are reduced in fixed trial order, so every output is a pure function
//! of the config.

mod config;

pub use config::{baseline_spec, load_config, parse_config, ExperimentConfig, Method};

use crate::data;
use crate::error::{Error, Result};
use crate::estimator::{
    self, objective_f, theorem_bound, Mode, RateConstants, Trajectory,
};
use crate::linalg::l2_norm;
use crate::problem::BoxProjection;
use crate::recover::{compute_eta, RecoverabilityReport};
use crate::rng::RandomSource;
use ndarray::Array1;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

/// CSV schema version; the first line of every emitted CSV.
pub const CSV_SCHEMA: &str = "# schema: robust-sense/run/v1";

/// Geometric checkpoint grid used for rate fitting.
pub fn rate_grid(n: u64) -> Vec<u64> {
    [100u64, 316, 1000, 3162, 10_000]
        .into_iter()
        .filter(|g| *g <= n)
        .collect()
}

/// Iterations recorded in the CSV: a uniform stride plus the rate grid
/// and the final iterate.
pub fn recorded_steps(n: u64) -> Vec<u64> {
    let stride = (n / 500).max(1);
    let mut steps: Vec<u64> = (0..=n).step_by(stride as usize).collect();
    steps.extend(rate_grid(n));
    steps.push(n);
    steps.sort_unstable();
    steps.dedup();
    steps
}

#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    /// Checkpoints dropped because their value was not positive.
    pub excluded: usize,
}

/// Least-squares line through `(ln n, ln value)`. Requires at least
/// five checkpoints; nonpositive values are excluded and counted.
pub fn fit_rate(checkpoints: &[(f64, f64)]) -> Result<RateFit> {
    if checkpoints.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 5 checkpoints, got {}",
            checkpoints.len()
        )));
    }
    let usable: Vec<(f64, f64)> = checkpoints
        .iter()
        .filter(|(n, v)| *n > 0.0 && *v > 0.0)
        .map(|(n, v)| (n.ln(), v.ln()))
        .collect();
    let excluded = checkpoints.len() - usable.len();
    if usable.len() < 2 {
        return Err(Error::InvalidArgument(
            "rate fit has fewer than 2 positive checkpoints".into(),
        ));
    }
    let count = usable.len() as f64;
    let sx: f64 = usable.iter().map(|(x, _)| x).sum();
    let sy: f64 = usable.iter().map(|(_, y)| y).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = usable.iter().map(|(x, y)| x * y).sum();
    let denom = count * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::InvalidArgument("rate fit checkpoints are degenerate".into()));
    }
    let slope = (count * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / count;
    let rms = (usable
        .iter()
        .map(|(x, y)| {
            let p = intercept + slope * x;
            (y - p) * (y - p)
        })
        .sum::<f64>()
        / count)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        rms_residual: rms,
        excluded,
    })
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-iteration statistics over trials at one recorded step.
#[derive(Debug, Clone)]
pub struct AggregatedRecord {
    pub t: u64,
    pub f_x_mean: f64,
    pub f_x_se: f64,
    pub f_tail_mean: f64,
    pub f_tail_se: f64,
    pub err_mean: f64,
    pub err_se: f64,
    pub y_err_mean: f64,
    pub y_err_se: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub label: String,
    pub attack_label: String,
    pub records: Vec<AggregatedRecord>,
    /// Log-log slope of the tail objective over the geometric grid;
    /// present only when the grid has at least five points.
    pub slope: Option<RateFit>,
    pub eta_report: Option<RecoverabilityReport>,
    pub constants: Option<RateConstants>,
    pub final_f_tail_mean: f64,
    pub final_f_tail_se: f64,
    pub final_err_mean: f64,
    pub final_err_se: f64,
    pub notes: Vec<String>,
}

fn run_one_trial(cfg: &ExperimentConfig, trial: u64) -> Result<Trajectory> {
    let problem = cfg.problem()?;
    let bounds = cfg.bounds()?;
    let attack = cfg.attack_spec(&problem)?;
    let source = RandomSource::new(cfg.seed);
    match &cfg.method {
        Method::Estimator { statement } => {
            let sched = statement.schedule(cfg.n, cfg.r)?;
            estimator::run(
                &problem,
                cfg.mode,
                &sched,
                &bounds,
                attack.as_ref(),
                cfg.n,
                cfg.r,
                &source,
                trial,
            )
        }
        Method::Baseline { schedule_x, .. } => {
            let spec = baseline_spec(cfg)?.expect("baseline method");
            crate::aggregators::run_baseline(
                &problem,
                &spec,
                cfg.mode,
                *schedule_x,
                &bounds,
                attack.as_ref(),
                cfg.n,
                cfg.r,
                &source,
                trial,
            )
        }
    }
}

/// Execute the configured trials, aggregate, and (when an output path
/// is configured) write the per-trial CSV plus plot-series files.
/// Deterministic for a fixed config, independent of parallelism.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let problem = cfg.problem()?;
    let bounds = cfg.bounds()?;
    let trajectories: Vec<Trajectory> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_one_trial(cfg, trial))
        .collect::<Result<Vec<_>>>()?;

    let mut notes = Vec::new();
    let eta_report = if cfg.m > 0 {
        let rep = compute_eta(&cfg.a, cfg.m)?;
        if !rep.certified() {
            notes.push("eta: multistart upper bound, not certified".into());
        }
        Some(rep)
    } else {
        None
    };
    let statement = match &cfg.method {
        Method::Estimator { statement } => Some(*statement),
        Method::Baseline { .. } => None,
    };
    let constants = match (&statement, &eta_report) {
        (Some(_), Some(rep)) if rep.holds_a2 => Some(RateConstants::derive(
            &problem,
            &bounds,
            &bounds.center(),
            rep.eta,
            cfg.mode,
        )?),
        (Some(_), None) => Some(RateConstants::derive(
            &problem,
            &bounds,
            &bounds.center(),
            f64::INFINITY,
            cfg.mode,
        )?),
        _ => None,
    };
    if let Method::Baseline { wrapper, .. } = &cfg.method {
        if matches!(wrapper, crate::aggregators::Wrapper::Bucketing { .. }) {
            notes.push("bucketing: byzantine budget passed through unchanged".into());
        }
    }
    if cfg.attack.is_some() {
        notes.push("attack values enter through the measurement channel".into());
    }

    let steps = recorded_steps(cfg.n);
    let mut records = Vec::with_capacity(steps.len());
    let mut per_trial_tail: Vec<Vec<f64>> = vec![Vec::with_capacity(steps.len()); trajectories.len()];
    for &t in &steps {
        let ti = t as usize;
        let f_x: Vec<f64> = trajectories.iter().map(|tr| tr.f_x[ti]).collect();
        let err: Vec<f64> = trajectories.iter().map(|tr| tr.err_x[ti]).collect();
        let y_err: Vec<f64> = trajectories
            .iter()
            .map(|tr| tr.max_honest_y_err[ti])
            .collect();
        let f_tail: Vec<f64> = trajectories
            .iter()
            .enumerate()
            .map(|(ix, tr)| {
                let v = objective_f(&cfg.a, &problem.expected_y(), &tr.tail_average_at(t, cfg.r))
                    .expect("dimensions fixed");
                per_trial_tail[ix].push(v);
                v
            })
            .collect();
        let bound = match (statement, &constants) {
            (Some(st), Some(c)) => theorem_bound(st, c, t, cfg.r).unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        let (f_x_mean, f_x_se) = mean_se(&f_x);
        let (f_tail_mean, f_tail_se) = mean_se(&f_tail);
        let (err_mean, err_se) = mean_se(&err);
        let (y_err_mean, y_err_se) = mean_se(&y_err);
        records.push(AggregatedRecord {
            t,
            f_x_mean,
            f_x_se,
            f_tail_mean,
            f_tail_se,
            err_mean,
            err_se,
            y_err_mean,
            y_err_se,
            bound,
        });
    }

    let grid = rate_grid(cfg.n);
    let slope = if grid.len() >= 5 {
        let pts: Vec<(f64, f64)> = grid
            .iter()
            .map(|g| {
                let rec = records.iter().find(|r| r.t == *g).expect("grid is recorded");
                (*g as f64, rec.f_tail_mean)
            })
            .collect();
        fit_rate(&pts).ok()
    } else {
        None
    };

    let finals_f: Vec<f64> = trajectories.iter().map(|tr| tr.f_tail).collect();
    let finals_err: Vec<f64> = trajectories
        .iter()
        .map(|tr| *tr.err_x.last().expect("nonempty"))
        .collect();
    let (final_f_tail_mean, final_f_tail_se) = mean_se(&finals_f);
    let (final_err_mean, final_err_se) = mean_se(&finals_err);

    let report = RunReport {
        label: cfg.label(),
        attack_label: match cfg.attack_spec(&problem)? {
            Some(spec) => spec.descriptor(),
            None => "none".to_string(),
        },
        records,
        slope,
        eta_report,
        constants,
        final_f_tail_mean,
        final_f_tail_se,
        final_err_mean,
        final_err_se,
        notes,
    };

    if let Some(path) = &cfg.output {
        // no partial output: drop everything written so far on failure
        let emit = write_csv(path, cfg, &report, &trajectories, &steps, &per_trial_tail)
            .and_then(|()| write_series(path, &report));
        if let Err(e) = emit {
            let _ = std::fs::remove_file(path);
            let _ = std::fs::remove_dir_all(series_dir(path));
            return Err(e);
        }
    }
    Ok(report)
}

fn series_dir(csv_path: &Path) -> std::path::PathBuf {
    let stem = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run");
    csv_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(format!("{stem}_series"))
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

fn write_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    report: &RunReport,
    trajectories: &[Trajectory],
    steps: &[u64],
    per_trial_tail: &[Vec<f64>],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA);
    out.push('\n');
    let _ = writeln!(out, "# label = {}", report.label);
    let _ = writeln!(
        out,
        "# seed = {} trials = {} n = {} r = {} mode = {}",
        cfg.seed,
        cfg.trials,
        cfg.n,
        cfg.r,
        cfg.mode.label()
    );
    let _ = writeln!(out, "# attack = {}", report.attack_label);
    if let Some(rep) = &report.eta_report {
        let _ = writeln!(
            out,
            "# eta = {} k = {} certified = {}",
            fmt_f64(rep.eta),
            fmt_f64(rep.k),
            rep.certified()
        );
    }
    if let Some(c) = &report.constants {
        let _ = writeln!(
            out,
            "# constants: d_x = {} a_bar = {} c_n = {} delta = {} e0_y = {}",
            fmt_f64(c.d_x),
            fmt_f64(c.a_bar),
            fmt_f64(c.c_n),
            fmt_f64(c.delta),
            fmt_f64(c.e0_y)
        );
    }
    for note in &report.notes {
        let _ = writeln!(out, "# note: {note}");
    }
    let rule_col = match &cfg.method {
        Method::Baseline { .. } => true,
        Method::Estimator { .. } => false,
    };
    out.push_str("trial,t,f_x,f_xtail,err_x_l2,max_honest_y_err,bound_value");
    if rule_col {
        out.push_str(",rule");
    }
    out.push('\n');
    let statement = match &cfg.method {
        Method::Estimator { statement } => Some(*statement),
        _ => None,
    };
    let rule_label = match &cfg.method {
        Method::Baseline { rule, .. } => rule.label().to_string(),
        _ => String::new(),
    };
    for (trial, traj) in trajectories.iter().enumerate() {
        for (si, &t) in steps.iter().enumerate() {
            let ti = t as usize;
            let bound = match (statement, &report.constants) {
                (Some(st), Some(c)) => theorem_bound(st, c, t, cfg.r).unwrap_or(f64::NAN),
                _ => f64::NAN,
            };
            let _ = write!(
                out,
                "{trial},{t},{},{},{},{},{}",
                fmt_f64(traj.f_x[ti]),
                fmt_f64(per_trial_tail[trial][si]),
                fmt_f64(traj.err_x[ti]),
                fmt_f64(traj.max_honest_y_err[ti]),
                fmt_f64(bound)
            );
            if rule_col {
                let _ = write!(out, ",{rule_label}");
            }
            out.push('\n');
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

type SeriesExtractor = Box<dyn Fn(&AggregatedRecord) -> f64>;

/// Two-column `(t, value)` series next to the CSV plus a gnuplot index.
fn write_series(csv_path: &Path, report: &RunReport) -> Result<()> {
    let dir = series_dir(csv_path);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let series: [(&str, SeriesExtractor); 4] = [
        ("f_x", Box::new(|r| r.f_x_mean)),
        ("f_xtail", Box::new(|r| r.f_tail_mean)),
        ("err_x", Box::new(|r| r.err_mean)),
        ("bound", Box::new(|r| r.bound)),
    ];
    let mut index = String::from("# gnuplot index; run: gnuplot index.gp\nset logscale xy\n");
    let mut plots = Vec::new();
    for (name, f) in &series {
        let mut text = String::new();
        for rec in &report.records {
            let v = f(rec);
            if v.is_finite() {
                let _ = writeln!(text, "{} {}", rec.t, fmt_f64(v));
            }
        }
        let fname = format!("{name}.dat");
        std::fs::write(dir.join(&fname), text).map_err(|e| Error::io(&dir.join(&fname), e))?;
        plots.push(format!("\"{fname}\" using 1:2 with lines title \"{name}\""));
    }
    let _ = writeln!(index, "plot {}", plots.join(", \\\n     "));
    let idx_path = dir.join("index.gp");
    std::fs::write(&idx_path, index).map_err(|e| Error::io(&idx_path, e))
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub label: String,
    pub final_err_mean: f64,
    pub final_err_se: f64,
    pub final_f_tail_mean: f64,
    pub final_f_tail_se: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// Ranked by final mean estimation error, best first.
    pub rows: Vec<ComparisonRow>,
}

/// Run every config (all must share the problem and horizon) and rank
/// the methods by final estimation error. Optionally emits per-method
/// error series under `out_dir`.
pub fn compare_methods(
    configs: &[ExperimentConfig],
    out_dir: Option<&Path>,
) -> Result<ComparisonReport> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("no configs to compare".into()));
    }
    for c in &configs[1..] {
        if !configs[0].same_problem(c) {
            return Err(Error::InvalidArgument(format!(
                "config {} does not share the problem/horizon of {}",
                c.label(),
                configs[0].label()
            )));
        }
    }
    let mut rows = Vec::with_capacity(configs.len());
    let mut index = String::from("# gnuplot index; run: gnuplot index.gp\nset logscale xy\n");
    let mut plots = Vec::new();
    for cfg in configs {
        let report = run_experiment(cfg)?;
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let fname = format!("{}.dat", report.label);
            let mut text = String::new();
            for rec in &report.records {
                let _ = writeln!(text, "{} {}", rec.t, fmt_f64(rec.err_mean));
            }
            std::fs::write(dir.join(&fname), text)
                .map_err(|e| Error::io(&dir.join(&fname), e))?;
            plots.push(format!(
                "\"{fname}\" using 1:2 with lines title \"{}\"",
                report.label
            ));
        }
        rows.push(ComparisonRow {
            label: report.label.clone(),
            final_err_mean: report.final_err_mean,
            final_err_se: report.final_err_se,
            final_f_tail_mean: report.final_f_tail_mean,
            final_f_tail_se: report.final_f_tail_se,
        });
    }
    if let Some(dir) = out_dir {
        let _ = writeln!(index, "plot {}", plots.join(", \\\n     "));
        std::fs::write(dir.join("index.gp"), index)
            .map_err(|e| Error::io(&dir.join("index.gp"), e))?;
    }
    rows.sort_by(|a, b| a.final_err_mean.partial_cmp(&b.final_err_mean).unwrap());
    Ok(ComparisonReport { rows })
}

#[derive(Debug, Clone)]
pub struct TomographyReport {
    pub eta: RecoverabilityReport,
    /// Mean estimation error at the start point.
    pub initial_err: f64,
    /// `(checkpoint, mean component-estimate error)` over trials.
    pub checkpoints: Vec<(u64, f64)>,
    /// Mean absolute per-link delay error after reconstruction.
    pub link_errors: Array1<f64>,
    /// Final checkpoint error relative to the start-point error.
    pub final_initial_ratio: f64,
}

/// End-to-end demo on the bundled network: compose the effective
/// sensing matrix from routing and structure, certify recoverability
/// with one adversary, estimate the shared/free link delays with the
/// synchronous estimator while the adversary mounts the collinear
/// attack, and reconstruct all link delays.
pub fn tomography_demo(n: u64, trials: u64, seed: u64, sigma: f64) -> Result<TomographyReport> {
    let p = data::demo_path_matrix();
    let b = data::demo_structure_matrix();
    let a = crate::recover::compose_tomography(&p, &b)?;
    if a != data::demo_sensing_matrix() {
        return Err(Error::InvalidArgument(
            "composed sensing matrix disagrees with the bundled one".into(),
        ));
    }
    let eta = crate::recover::compute_eta_exact(&a, 1)?;
    if !eta.holds_a2 {
        return Err(Error::RecoverabilityFailure { eta: eta.eta });
    }

    let theta_true = data::demo_mean();
    let problem = crate::problem::SensingProblem::new(
        a.clone(),
        theta_true.clone(),
        sigma,
        [6].into_iter().collect(),
        1,
    )?;
    let bounds = BoxProjection::cube(0.0, 30.0, 4)?;
    let attack = crate::adversary::AttackSpec::on_all_adversaries(
        crate::adversary::AttackKind::Baruch,
        &problem,
    );
    let source = RandomSource::new(seed);
    let sched = crate::schedule::StepsizeSchedule::DecayDecay;

    let trajectories: Vec<Trajectory> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            estimator::run(
                &problem,
                Mode::Sync,
                &sched,
                &bounds,
                Some(&attack),
                n,
                0.5,
                &source,
                trial,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let grid: Vec<u64> = {
        let mut g = rate_grid(n);
        if g.last() != Some(&n) {
            g.push(n);
        }
        g
    };
    let mut checkpoints = Vec::with_capacity(grid.len());
    for &g in &grid {
        let mean_err = trajectories
            .iter()
            .map(|tr| l2_norm(&(&tr.tail_average_at(g, 0.5) - &theta_true)))
            .sum::<f64>()
            / trials as f64;
        checkpoints.push((g, mean_err));
    }
    let initial_err =
        trajectories.iter().map(|tr| tr.err_x[0]).sum::<f64>() / trials as f64;

    let mut link_errors = Array1::zeros(b.nrows());
    for tr in &trajectories {
        let recon = b.dot(&tr.tail_x);
        let truth = b.dot(&theta_true);
        link_errors = &link_errors + &(&recon - &truth).mapv(f64::abs);
    }
    link_errors /= trials as f64;

    let final_initial_ratio = checkpoints.last().unwrap().1 / initial_err;
    Ok(TomographyReport {
        eta,
        initial_err,
        checkpoints,
        link_errors,
        final_initial_ratio,
    })
}
