//! Robust-aggregation baselines over momentum-corrected least-squares
//! gradients: distance filtering (krum), coordinate-wise median and
//! trimmed mean, the geometric median, and a farthest-from-mean
//! filtering approximation, with a randomized bucketing wrapper for
//! synchronous runs and a fixed-partition buffered wrapper for
//! asynchronous ones.
//!
//! These methods descend the smooth objective
//! `sum_j (a_j'x - EY_j)^2 / N`; each worker's gradient estimate is
//! `a_j (a_j'x - y_j)` with the server's running measurement-mean
//! estimate standing in for `EY_j`.

use crate::adversary::{attack_baseline, AttackContext, AttackSpec, BaselineAttackContext};
use crate::error::{Error, Result};
use crate::estimator::{objective_f, Mode, Trajectory};
use crate::linalg::l2_norm;
use crate::problem::{project_box, sample_measurement, BoxProjection, SensingProblem};
use crate::rng::{RandomSource, StreamRng, TrialStreams};
use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::RngExt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationRule {
    Krum,
    CoordinateMedian,
    TrimmedMean,
    GeometricMedian,
    RageApprox,
}

impl AggregationRule {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Krum => "krum",
            Self::CoordinateMedian => "cm",
            Self::TrimmedMean => "ctm",
            Self::GeometricMedian => "rfa",
            Self::RageApprox => "rage-approx",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "krum" => Self::Krum,
            "cm" => Self::CoordinateMedian,
            "ctm" => Self::TrimmedMean,
            "rfa" => Self::GeometricMedian,
            "rage-approx" | "rage" => Self::RageApprox,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown aggregation rule {other:?} (expected krum|cm|ctm|rfa|rage-approx)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrapper {
    None,
    /// Random permutation, contiguous buckets of at most `s`, average
    /// within buckets, aggregate the bucket means (synchronous).
    Bucketing { s: usize },
    /// Fixed worker-to-buffer partition; aggregate buffer means once
    /// every buffer has reported (asynchronous).
    Buffered { s: usize },
}

impl Wrapper {
    pub fn label(&self) -> String {
        match self {
            Self::None => "none".to_string(),
            Self::Bucketing { s } => format!("bucketing({s})"),
            Self::Buffered { s } => format!("buffered({s})"),
        }
    }
}

/// Momentum coefficient schedule: synchronous bucketing runs use
/// `1/(t+1)^0.9`, everything else runs with plain gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSchedule {
    Zero,
    Pow09,
}

impl GammaSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Pow09 => 1.0 / (t as f64 + 1.0).powf(0.9),
        }
    }
}

/// Stepsize for the baseline x-updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineXSchedule {
    /// `1/sqrt(t+1)`
    Sqrt,
    /// `1/(t+1)^0.9`
    Pow09,
}

impl BaselineXSchedule {
    pub fn alpha(&self, t: u64) -> f64 {
        let tf = t as f64 + 1.0;
        match self {
            Self::Sqrt => 1.0 / tf.sqrt(),
            Self::Pow09 => 1.0 / tf.powf(0.9),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Pow09 => "pow09",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AggregatorSpec {
    pub rule: AggregationRule,
    pub wrapper: Wrapper,
    pub byzantine_budget: usize,
    pub gamma: GammaSchedule,
}

impl AggregatorSpec {
    pub fn new(
        rule: AggregationRule,
        wrapper: Wrapper,
        byzantine_budget: usize,
        gamma: GammaSchedule,
    ) -> Result<Self> {
        if let Wrapper::Bucketing { s } | Wrapper::Buffered { s } = wrapper {
            if s < 1 {
                return Err(Error::InvalidArgument("wrapper size must be >= 1".into()));
            }
        }
        Ok(Self {
            rule,
            wrapper,
            byzantine_budget,
            gamma,
        })
    }

    /// Momentum only for synchronous bucketing; plain gradients
    /// everywhere else.
    pub fn experiment_defaults(
        rule: AggregationRule,
        wrapper: Wrapper,
        byzantine_budget: usize,
        mode: Mode,
    ) -> Result<Self> {
        let gamma = match (mode, wrapper) {
            (Mode::Sync, Wrapper::Bucketing { .. }) => GammaSchedule::Pow09,
            _ => GammaSchedule::Zero,
        };
        Self::new(rule, wrapper, byzantine_budget, gamma)
    }

    pub fn label(&self) -> String {
        match self.wrapper {
            Wrapper::None => self.rule.label().to_string(),
            _ => format!("{}+{}", self.rule.label(), self.wrapper.label()),
        }
    }
}

/// Least-squares gradient estimate `a_j (a_j'x - y_j)`.
pub fn l2_gradient(a_j: &ArrayView1<f64>, x: &Array1<f64>, y_j: f64) -> Array1<f64> {
    &a_j.to_owned() * (a_j.dot(x) - y_j)
}

/// `(1 - gamma) grad + gamma m_prev`.
pub fn momentum_update(m_prev: &Array1<f64>, grad: &Array1<f64>, gamma: f64) -> Result<Array1<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "momentum coefficient {gamma} outside [0, 1]"
        )));
    }
    Ok(&(grad * (1.0 - gamma)) + &(m_prev * gamma))
}

fn coordinate_median(vectors: &[Array1<f64>]) -> Array1<f64> {
    let d = vectors[0].len();
    let n = vectors.len();
    let mut out = Array1::zeros(d);
    let mut col = vec![0.0; n];
    for k in 0..d {
        for (i, v) in vectors.iter().enumerate() {
            col[i] = v[k];
        }
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out[k] = if n % 2 == 1 {
            col[n / 2]
        } else {
            (col[n / 2 - 1] + col[n / 2]) / 2.0
        };
    }
    out
}

fn trimmed_mean(vectors: &[Array1<f64>], f: usize) -> Result<Array1<f64>> {
    let n = vectors.len();
    if n <= 2 * f {
        return Err(Error::InvalidArgument(format!(
            "trimmed mean needs more than 2f = {} inputs, got {n}",
            2 * f
        )));
    }
    let d = vectors[0].len();
    let mut out = Array1::zeros(d);
    let mut col = vec![0.0; n];
    for k in 0..d {
        for (i, v) in vectors.iter().enumerate() {
            col[i] = v[k];
        }
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kept = &col[f..n - f];
        out[k] = kept.iter().sum::<f64>() / kept.len() as f64;
    }
    Ok(out)
}

fn krum(vectors: &[Array1<f64>], f: usize) -> Result<Array1<f64>> {
    let n = vectors.len();
    if n < 2 * f + 3 {
        return Err(Error::InvalidArgument(format!(
            "krum needs at least 2f + 3 = {} inputs, got {n}",
            2 * f + 3
        )));
    }
    let closest = n - f - 2;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let diff = &vectors[i] - &vectors[j];
                diff.dot(&diff)
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let score: f64 = dists.iter().take(closest).sum();
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((i, score));
        }
    }
    Ok(vectors[best.unwrap().0].clone())
}

/// Weiszfeld iteration for the geometric median. Returns the point and
/// the objective trace across iterations (non-increasing).
pub fn geometric_median(vectors: &[Array1<f64>]) -> (Array1<f64>, Vec<f64>) {
    let d = vectors[0].len();
    let n = vectors.len() as f64;
    let objective = |z: &Array1<f64>| -> f64 {
        vectors.iter().map(|v| l2_norm(&(v - z))).sum()
    };
    let mut z = Array1::zeros(d);
    for v in vectors {
        z = &z + v;
    }
    z /= n;
    let mut trace = vec![objective(&z)];
    for _ in 0..100 {
        let mut num = Array1::zeros(d);
        let mut den = 0.0;
        for v in vectors {
            let dist = l2_norm(&(v - &z)).max(1e-12);
            num = &num + &(v / dist);
            den += 1.0 / dist;
        }
        let next = num / den;
        let step = l2_norm(&(&next - &z));
        z = next;
        trace.push(objective(&z));
        if step < 1e-10 {
            break;
        }
    }
    (z, trace)
}

/// Filtering approximation standing in for accumulated-gradient
/// estimation: repeatedly drop the report farthest from the running
/// mean, then average the survivors. Documented approximation, not the
/// cited original.
fn rage_approx(vectors: &[Array1<f64>], f: usize) -> Result<Array1<f64>> {
    let n = vectors.len();
    if f >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot remove {f} of {n} reports"
        )));
    }
    let mut alive: Vec<usize> = (0..n).collect();
    for _ in 0..f {
        let mut mean = Array1::zeros(vectors[0].len());
        for &i in &alive {
            mean = &mean + &vectors[i];
        }
        mean /= alive.len() as f64;
        let far = alive
            .iter()
            .copied()
            .max_by(|&i, &j| {
                let di = l2_norm(&(&vectors[i] - &mean));
                let dj = l2_norm(&(&vectors[j] - &mean));
                di.partial_cmp(&dj).unwrap().then(j.cmp(&i))
            })
            .unwrap();
        alive.retain(|&i| i != far);
    }
    let mut mean = Array1::zeros(vectors[0].len());
    for &i in &alive {
        mean = &mean + &vectors[i];
    }
    Ok(mean / alive.len() as f64)
}

/// Apply one robust rule to a list of reports. A single report is
/// returned unchanged regardless of rule, so a whole-population bucket
/// reduces to the plain mean.
pub fn aggregate(
    rule: AggregationRule,
    vectors: &[Array1<f64>],
    budget: usize,
) -> Result<Array1<f64>> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch("ragged aggregation input".into()));
    }
    if vectors.len() == 1 {
        return Ok(vectors[0].clone());
    }
    match rule {
        AggregationRule::Krum => krum(vectors, budget),
        AggregationRule::CoordinateMedian => Ok(coordinate_median(vectors)),
        AggregationRule::TrimmedMean => trimmed_mean(vectors, budget),
        AggregationRule::GeometricMedian => Ok(geometric_median(vectors).0),
        AggregationRule::RageApprox => rage_approx(vectors, budget),
    }
}

/// Contiguous index buckets of size at most `s` covering `0..n`.
pub fn bucket_partition(n: usize, s: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(s))
        .map(|b| (b * s)..((b + 1) * s).min(n))
        .collect()
}

/// Randomly permute the reports, average within contiguous buckets of
/// at most `s`, and aggregate the bucket means. The budget is passed
/// through unchanged to the post-bucket rule.
pub fn bucketing_aggregate(
    rule: AggregationRule,
    vectors: &[Array1<f64>],
    s: usize,
    budget: usize,
    rng: &mut StreamRng,
) -> Result<Array1<f64>> {
    if s < 1 {
        return Err(Error::InvalidArgument("bucket size must be >= 1".into()));
    }
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.shuffle(rng);
    let d = vectors[0].len();
    let means: Vec<Array1<f64>> = bucket_partition(vectors.len(), s)
        .into_iter()
        .map(|range| {
            let mut acc = Array1::zeros(d);
            for &i in &order[range.clone()] {
                acc = &acc + &vectors[i];
            }
            acc / range.len() as f64
        })
        .collect();
    aggregate(rule, &means, budget)
}

/// Fixed-partition buffers for asynchronous aggregation: worker `w`
/// reports into buffer `w / s`; once every buffer holds a report, the
/// buffer means are aggregated and all buffers clear.
#[derive(Debug, Clone)]
pub struct BufferedAggregator {
    s: usize,
    n_workers: usize,
    buffers: Vec<std::collections::BTreeMap<usize, Array1<f64>>>,
}

impl BufferedAggregator {
    pub fn new(n_workers: usize, s: usize) -> Result<Self> {
        if s < 1 || n_workers == 0 {
            return Err(Error::InvalidArgument("buffer size must be >= 1".into()));
        }
        Ok(Self {
            s,
            n_workers,
            buffers: vec![Default::default(); n_workers.div_ceil(s)],
        })
    }

    pub fn buffer_of(&self, worker: usize) -> usize {
        worker / self.s
    }

    pub fn n_buffers(&self) -> usize {
        self.buffers.len()
    }

    /// Record a report; the latest report per worker wins.
    pub fn submit(&mut self, worker: usize, value: Array1<f64>) {
        debug_assert!(worker < self.n_workers);
        let b = self.buffer_of(worker);
        self.buffers[b].insert(worker, value);
    }

    pub fn ready(&self) -> bool {
        self.buffers.iter().all(|b| !b.is_empty())
    }

    /// Aggregate the buffer means and clear every buffer; `None` until
    /// all buffers have reported.
    pub fn emit(&mut self, rule: AggregationRule, budget: usize) -> Result<Option<Array1<f64>>> {
        if !self.ready() {
            return Ok(None);
        }
        let means: Vec<Array1<f64>> = self
            .buffers
            .iter()
            .map(|b| {
                let mut acc: Array1<f64> = Array1::zeros(
                    b.values().next().expect("ready buffer is nonempty").len(),
                );
                for v in b.values() {
                    acc = &acc + v;
                }
                acc / b.len() as f64
            })
            .collect();
        for b in &mut self.buffers {
            b.clear();
        }
        aggregate(rule, &means, budget).map(Some)
    }
}

/// Submit one report and aggregate if every buffer has one.
pub fn buffered_step(
    agg: &mut BufferedAggregator,
    worker: usize,
    value: Array1<f64>,
    rule: AggregationRule,
    budget: usize,
) -> Result<Option<Array1<f64>>> {
    agg.submit(worker, value);
    agg.emit(rule, budget)
}

fn beta_at(t: u64) -> f64 {
    1.0 / (t as f64 + 1.0)
}

/// Run one baseline trajectory. The measurement-mean updates are the
/// same per-mode rules as the estimator's; gradients and momenta feed
/// the chosen rule through the chosen wrapper, and the descent step is
/// projected onto the box so diverging runs stay comparable.
#[allow(clippy::too_many_arguments)]
pub fn run_baseline(
    problem: &SensingProblem,
    spec: &AggregatorSpec,
    mode: Mode,
    x_sched: BaselineXSchedule,
    bounds: &BoxProjection,
    attack: Option<&AttackSpec>,
    n: u64,
    r: f64,
    source: &RandomSource,
    trial: u64,
) -> Result<Trajectory> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} must lie in (0, 1)")));
    }
    if problem.budget() > 0 && !problem.adversary_set().is_empty() && attack.is_none() {
        return Err(Error::InvalidArgument(
            "problem has adversarial workers but no attack model was supplied".into(),
        ));
    }
    // Krum's population constraint is against the worker count; when a
    // wrapper shrinks the aggregation list below 2f + 3, the budget is
    // clamped to the largest value the shrunk list supports.
    let mut budget = spec.byzantine_budget;
    if spec.rule == AggregationRule::Krum {
        if problem.n_workers() < 2 * spec.byzantine_budget + 3 {
            return Err(Error::InvalidArgument(format!(
                "krum needs at least 2f + 3 = {} workers, got {}",
                2 * spec.byzantine_budget + 3,
                problem.n_workers()
            )));
        }
        let inputs = match spec.wrapper {
            Wrapper::None => problem.n_workers(),
            Wrapper::Bucketing { s } | Wrapper::Buffered { s } => {
                problem.n_workers().div_ceil(s)
            }
        };
        if inputs < 2 * budget + 3 {
            budget = inputs.saturating_sub(3) / 2;
        }
    }

    let n_workers = problem.n_workers();
    let d = problem.dim();
    let expected_y = problem.expected_y();
    let mu = problem.mu_true();
    let a = problem.matrix();
    let mut streams = TrialStreams::open(source, n_workers, trial);
    let mut x = bounds.center();
    let mut y = Array1::<f64>::zeros(n_workers);
    let mut momenta: Vec<Array1<f64>> = vec![Array1::zeros(d); n_workers];
    let mut buffered = match spec.wrapper {
        Wrapper::Buffered { s } => Some(BufferedAggregator::new(n_workers, s)?),
        _ => None,
    };

    let k = (r * n as f64).ceil() as u64;
    let len = (n + 1) as usize;
    let mut traj = Trajectory {
        f_x: Vec::with_capacity(len),
        err_x: Vec::with_capacity(len),
        max_honest_y_err: Vec::with_capacity(len),
        xs: Vec::with_capacity(len),
        alphas: Vec::with_capacity(len),
        tail_x: Array1::zeros(d),
        f_tail: f64::NAN,
        tail_start: k,
    };
    let mut tail_weight = 0.0;
    let mut tail_sum = Array1::<f64>::zeros(d);

    for t in 0..=n {
        let alpha = x_sched.alpha(t);
        traj.f_x.push(objective_f(a, &expected_y, &x)?);
        traj.err_x.push(l2_norm(&(&x - mu)));
        traj.max_honest_y_err.push(
            problem
                .honest_workers()
                .map(|j| (y[j] - expected_y[j]).abs())
                .fold(0.0, f64::max),
        );
        traj.xs.push(x.clone());
        traj.alphas.push(alpha);
        if t >= k {
            tail_weight += alpha;
            tail_sum = &tail_sum + &(&x * alpha);
        }

        let beta = beta_at(t);
        let gamma = spec.gamma.at(t);
        let aggregated: Option<Array1<f64>> = match mode {
            Mode::Sync => {
                // Honest workers report and refresh their momenta first;
                // the adversary then reads them and reports last.
                for j in 0..n_workers {
                    if problem.is_adversarial(j) {
                        continue;
                    }
                    let sample = sample_measurement(problem, j, &mut streams.workers[j])?;
                    y[j] += beta * (sample - y[j]);
                    let grad = l2_gradient(&problem.row(j), &x, y[j]);
                    momenta[j] = momentum_update(&momenta[j], &grad, gamma)?;
                }
                let honest: Vec<Array1<f64>> = problem
                    .honest_workers()
                    .map(|j| momenta[j].clone())
                    .collect();
                for w in 0..n_workers {
                    if !problem.is_adversarial(w) {
                        continue;
                    }
                    let spec_attack = attack.expect("checked above");
                    let out = attack_baseline(
                        spec_attack,
                        &BaselineAttackContext {
                            base: AttackContext {
                                x: &x,
                                honest_momenta: &honest,
                                worker: w,
                                problem,
                            },
                            gamma,
                            beta,
                            y_scale: 1.0,
                            y_current: y[w],
                            m_prev: &momenta[w],
                        },
                        &mut streams.workers[w],
                    )?;
                    y[w] += beta * (out.y_value - y[w]);
                    momenta[w] = match out.momentum_override {
                        Some(m) => m,
                        None => {
                            let grad = l2_gradient(&problem.row(w), &x, y[w]);
                            momentum_update(&momenta[w], &grad, gamma)?
                        }
                    };
                }
                match spec.wrapper {
                    Wrapper::None => Some(aggregate(spec.rule, &momenta, budget)?),
                    Wrapper::Bucketing { s } => Some(bucketing_aggregate(
                        spec.rule,
                        &momenta,
                        s,
                        budget,
                        &mut streams.server,
                    )?),
                    Wrapper::Buffered { .. } => {
                        let agg = buffered.as_mut().expect("buffered state exists");
                        for (w, m) in momenta.iter().enumerate() {
                            agg.submit(w, m.clone());
                        }
                        agg.emit(spec.rule, budget)?
                    }
                }
            }
            Mode::Async => {
                let i = streams.server.random_range(0..n_workers);
                if problem.is_adversarial(i) {
                    let honest: Vec<Array1<f64>> = problem
                        .honest_workers()
                        .map(|j| momenta[j].clone())
                        .collect();
                    let spec_attack = attack.expect("checked above");
                    let out = attack_baseline(
                        spec_attack,
                        &BaselineAttackContext {
                            base: AttackContext {
                                x: &x,
                                honest_momenta: &honest,
                                worker: i,
                                problem,
                            },
                            gamma,
                            beta,
                            y_scale: n_workers as f64,
                            y_current: y[i],
                            m_prev: &momenta[i],
                        },
                        &mut streams.workers[i],
                    )?;
                    for j in 0..n_workers {
                        let drive = if j == i {
                            n_workers as f64 * out.y_value
                        } else {
                            0.0
                        };
                        y[j] += beta * (drive - y[j]);
                    }
                    momenta[i] = match out.momentum_override {
                        Some(m) => m,
                        None => {
                            let grad = l2_gradient(&problem.row(i), &x, y[i]);
                            momentum_update(&momenta[i], &grad, gamma)?
                        }
                    };
                } else {
                    let sample = sample_measurement(problem, i, &mut streams.workers[i])?;
                    for j in 0..n_workers {
                        let drive = if j == i {
                            n_workers as f64 * sample
                        } else {
                            0.0
                        };
                        y[j] += beta * (drive - y[j]);
                    }
                    let grad = l2_gradient(&problem.row(i), &x, y[i]);
                    momenta[i] = momentum_update(&momenta[i], &grad, gamma)?;
                }
                match spec.wrapper {
                    Wrapper::Buffered { .. } => {
                        let agg = buffered.as_mut().expect("buffered state exists");
                        buffered_step(agg, i, momenta[i].clone(), spec.rule, budget)?
                    }
                    Wrapper::None => Some(aggregate(spec.rule, &momenta, budget)?),
                    Wrapper::Bucketing { s } => Some(bucketing_aggregate(
                        spec.rule,
                        &momenta,
                        s,
                        budget,
                        &mut streams.server,
                    )?),
                }
            }
        };
        if let Some(g) = aggregated {
            let stepped = &x - &(&g * alpha);
            x = project_box(&stepped, bounds)?;
        }
    }

    traj.tail_x = &tail_sum / tail_weight;
    traj.f_tail = objective_f(a, &expected_y, &traj.tail_x)?;
    Ok(traj)
}
