//! Differentially private SGD whose gradient aggregate goes through PTR with
//! the trimmed sum as robust statistic, on small closed-form models.
//!
//! Each iteration Poisson-samples a batch, computes per-example gradients
//! (some possibly corrupted), clips them to `clip_r` and runs PTR:
//!
//! * test failed (`'+'`): `SUM + N(0, (sigma clip_r)^2)`, step size
//!   `eta_A = ((m - F) / m) eta_B`, then `F` grows;
//! * test passed (`'-'`): `TSUM_F + N(0, (sigma tau)^2)`, step size `eta_B`,
//!   then `F` shrinks.
//!
//! The aggregate is divided by the expected batch size `q N` before the
//! step. Privacy is charged every iteration, including those whose batch
//! came out empty, from the subsampled PTR curve.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::accountant::{default_alpha_grid, rdp_to_dp, DpConversion, DpGuarantee, RdpCurve};
use crate::error::{PtrError, Result};
use crate::noise::{sample_gaussian_vec, PrivRng, RngSeed};
use crate::ptr::{run_ptr, Branch, PtrConfig};
use crate::subsampling::{subsampled_gaussian_curve, subsampled_ptr_curve, BoundSource, SubsampleParams};
use crate::trimmed_sum::{clip, TrimmedSumOracle};

/// Regression value or class index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Real(f64),
    Class(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub target: Target,
}

/// A scalar loss with per-example gradients in closed form.
pub trait Model: Sync {
    fn num_params(&self) -> usize;
    fn loss(&self, w: &[f64], example: &Example) -> f64;
    fn gradient(&self, w: &[f64], example: &Example) -> Vec<f64>;

    fn mean_loss(&self, w: &[f64], data: &[Example]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter().map(|e| self.loss(w, e)).sum::<f64>() / data.len() as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared loss `(w . x - y)^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRegression {
    pub features: usize,
}

impl LinearRegression {
    fn residual(&self, w: &[f64], example: &Example) -> f64 {
        match example.target {
            Target::Real(y) => dot(w, &example.features) - y,
            Target::Class(c) => dot(w, &example.features) - c as f64,
        }
    }
}

impl Model for LinearRegression {
    fn num_params(&self) -> usize {
        self.features
    }

    fn loss(&self, w: &[f64], example: &Example) -> f64 {
        0.5 * self.residual(w, example).powi(2)
    }

    fn gradient(&self, w: &[f64], example: &Example) -> Vec<f64> {
        let r = self.residual(w, example);
        example.features.iter().map(|x| r * x).collect()
    }
}

/// Squared distance to the example, `|w - x|^2 / 2`; the minimiser of the
/// mean loss is the mean of the features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub dim: usize,
}

impl Model for Quadratic {
    fn num_params(&self) -> usize {
        self.dim
    }

    fn loss(&self, w: &[f64], example: &Example) -> f64 {
        0.5 * w.iter().zip(&example.features).map(|(a, x)| (a - x).powi(2)).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], example: &Example) -> Vec<f64> {
        w.iter().zip(&example.features).map(|(a, x)| a - x).collect()
    }
}

/// Multinomial logistic regression; parameters are `classes` rows of
/// `features` weights. Two classes give ordinary logistic regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxRegression {
    pub features: usize,
    pub classes: usize,
}

impl SoftmaxRegression {
    fn probabilities(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = w.chunks(self.features).map(|row| dot(row, x)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.iter().map(|e| e / total).collect()
    }

    fn label(example: &Example) -> usize {
        match example.target {
            Target::Class(c) => c,
            Target::Real(y) => y.round().max(0.0) as usize,
        }
    }
}

impl Model for SoftmaxRegression {
    fn num_params(&self) -> usize {
        self.features * self.classes
    }

    fn loss(&self, w: &[f64], example: &Example) -> f64 {
        let p = self.probabilities(w, &example.features);
        -p[Self::label(example).min(self.classes - 1)].max(1e-300).ln()
    }

    fn gradient(&self, w: &[f64], example: &Example) -> Vec<f64> {
        let mut p = self.probabilities(w, &example.features);
        p[Self::label(example).min(self.classes - 1)] -= 1.0;
        p.iter()
            .flat_map(|&pk| example.features.iter().map(move |x| pk * x))
            .collect()
    }
}

fn standard_normal_vec(n: usize, rng: &mut PrivRng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `n` examples with `x ~ N(0, I_d)` and `y = w* . x + N(0, noise^2)`; also
/// returns `w*`, drawn as a standard normal vector.
pub fn linear_regression_data(n: usize, d: usize, noise: f64, rng: &mut PrivRng) -> (Vec<Example>, Vec<f64>) {
    let w_star = standard_normal_vec(d, rng);
    let data = (0..n)
        .map(|_| {
            let features = standard_normal_vec(d, rng);
            let eps: f64 = StandardNormal.sample(rng);
            let y = dot(&w_star, &features) + noise * eps;
            Example {
                features,
                target: Target::Real(y),
            }
        })
        .collect();
    (data, w_star)
}

/// `n` points `center + spread N(0, I)` with a zero target, for [`Quadratic`].
pub fn quadratic_data(n: usize, center: &[f64], spread: f64, rng: &mut PrivRng) -> Vec<Example> {
    (0..n)
        .map(|_| Example {
            features: standard_normal_vec(center.len(), rng)
                .into_iter()
                .zip(center)
                .map(|(z, c)| c + spread * z)
                .collect(),
            target: Target::Real(0.0),
        })
        .collect()
}

/// `n` examples from a mixture of unit-variance Gaussians whose means are
/// drawn with scale `separation`, one component per class.
pub fn gaussian_mixture_data(n: usize, d: usize, classes: usize, separation: f64, rng: &mut PrivRng) -> Vec<Example> {
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| standard_normal_vec(d, rng).into_iter().map(|m| m * separation).collect())
        .collect();
    (0..n)
        .map(|_| {
            let class = rng.random_range(0..classes);
            let features = standard_normal_vec(d, rng)
                .into_iter()
                .zip(&means[class])
                .map(|(z, m)| z + m)
                .collect();
            Example {
                features,
                target: Target::Class(class),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    None,
    LabelFlip,
    TargetedLabelFlip,
    FeatureNoise,
    GradientNoise,
    GradientBitFlip,
}

impl CorruptionKind {
    /// Whether the corruption perturbs gradients rather than training data.
    pub fn on_gradients(self) -> bool {
        matches!(self, CorruptionKind::GradientNoise | CorruptionKind::GradientBitFlip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub ratio: f64,
    pub noise_sigma: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            kind: CorruptionKind::None,
            ratio: 0.0,
            noise_sigma: 10.0,
        }
    }
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, ratio: f64) -> Result<Self> {
        let spec = Self {
            kind,
            ratio,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.ratio) {
            return Err(PtrError::param("ratio", format!("must lie in [0, 1/2), got {}", self.ratio)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(PtrError::param("noise_sigma", "must be nonnegative"));
        }
        Ok(())
    }

    /// `floor(ratio m)`.
    pub fn count(&self, m: usize) -> Result<usize> {
        self.validate()?;
        let k = (self.ratio * m as f64).floor() as usize;
        if k > 0 && 2 * k >= m {
            return Err(PtrError::param("ratio", format!("{k} of {m} elements is not a minority")));
        }
        Ok(k)
    }
}

fn add_noise(v: &mut [f64], sigma: f64, rng: &mut PrivRng) {
    for x in v {
        let z: f64 = StandardNormal.sample(rng);
        *x += sigma * z;
    }
}

/// Corrupts `floor(ratio m)` uniformly chosen examples. Gradient kinds leave
/// the data untouched.
pub fn corrupt_dataset(data: &mut [Example], spec: &CorruptionSpec, classes: usize, rng: &mut PrivRng) -> Result<()> {
    let k = spec.count(data.len())?;
    if k == 0 || spec.kind == CorruptionKind::None || spec.kind.on_gradients() {
        return Ok(());
    }
    let label_kind = matches!(spec.kind, CorruptionKind::LabelFlip | CorruptionKind::TargetedLabelFlip);
    if label_kind && classes < 2 {
        return Err(PtrError::Config("label corruption needs at least two classes".into()));
    }
    for i in sample(rng, data.len(), k).into_vec() {
        let example = &mut data[i];
        match spec.kind {
            CorruptionKind::LabelFlip => {
                if !matches!(example.target, Target::Class(_)) {
                    return Err(PtrError::Config("label corruption needs class targets".into()));
                }
                example.target = Target::Class(rng.random_range(0..classes));
            }
            CorruptionKind::TargetedLabelFlip => match example.target {
                Target::Class(c) => example.target = Target::Class(classes - 1 - c.min(classes - 1)),
                Target::Real(_) => return Err(PtrError::Config("label corruption needs class targets".into())),
            },
            CorruptionKind::FeatureNoise => add_noise(&mut example.features, spec.noise_sigma, rng),
            _ => unreachable!("gradient kinds return early"),
        }
    }
    Ok(())
}

/// Corrupts `floor(ratio m)` uniformly chosen gradients. Data kinds leave
/// the gradients untouched.
pub fn corrupt_gradients(grads: &mut [Vec<f64>], spec: &CorruptionSpec, rng: &mut PrivRng) -> Result<()> {
    let k = spec.count(grads.len())?;
    if k == 0 || !spec.kind.on_gradients() {
        return Ok(());
    }
    for i in sample(rng, grads.len(), k).into_vec() {
        match spec.kind {
            CorruptionKind::GradientNoise => add_noise(&mut grads[i], spec.noise_sigma, rng),
            CorruptionKind::GradientBitFlip => grads[i].iter_mut().for_each(|x| *x = -*x),
            _ => unreachable!("data kinds return early"),
        }
    }
    Ok(())
}

/// How the trim count follows the test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimPolicy {
    /// Step as a fraction of the expected batch size.
    pub adapt_frac: f64,
    pub min_frac: f64,
    pub max_frac: f64,
}

impl Default for TrimPolicy {
    fn default() -> Self {
        Self {
            adapt_frac: 0.02,
            min_frac: 0.05,
            max_frac: 0.45,
        }
    }
}

impl TrimPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.adapt_frac >= 0.0) {
            return Err(PtrError::param("adapt_frac", "must be nonnegative"));
        }
        if !(0.0 < self.min_frac && self.min_frac <= self.max_frac && self.max_frac < 0.5) {
            return Err(PtrError::param(
                "trim bounds",
                format!("need 0 < min <= max < 1/2, got [{}, {}]", self.min_frac, self.max_frac),
            ));
        }
        Ok(())
    }

    /// `[ceil(min_frac B), floor(max_frac B)]` for expected batch size `B`.
    pub fn bounds(&self, expected_batch: f64) -> (usize, usize) {
        let lo = (self.min_frac * expected_batch).ceil() as usize;
        let hi = (self.max_frac * expected_batch).floor() as usize;
        (lo.min(hi), hi)
    }

    pub fn step(&self, expected_batch: f64) -> usize {
        (self.adapt_frac * expected_batch).round() as usize
    }
}

/// Raises `F` after a failed test and lowers it after a passed one, within
/// the policy's clamps.
pub fn adapt_f(current: usize, branch: Branch, policy: &TrimPolicy, expected_batch: f64) -> usize {
    let step = policy.step(expected_batch);
    let (lo, hi) = policy.bounds(expected_batch);
    let next = match branch {
        Branch::LargeNoise => current.saturating_add(step),
        Branch::SmallNoise => current.saturating_sub(step),
    };
    next.clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// PTR between the sum and the trimmed sum.
    #[default]
    PtrTrimmedMean,
    /// Plain sum with Gaussian noise `sigma clip_r`, never trimmed.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub q: f64,
    pub eta_b: f64,
    #[serde(default)]
    pub f_init: usize,
    #[serde(default)]
    pub trim_policy: TrimPolicy,
    pub clip_r: f64,
    pub tau: f64,
    /// Noise multiplier: the release noise is `sigma clip_r` or `sigma tau`.
    pub sigma: f64,
    pub b: f64,
    pub delta0: f64,
    pub t_max: usize,
    pub budget: DpGuarantee,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub aggregator: Aggregator,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.q) {
            return Err(PtrError::param("q", format!("must lie in [0, 1), got {}", self.q)));
        }
        if !(self.eta_b > 0.0) {
            return Err(PtrError::param("eta_b", "must be positive"));
        }
        if !(self.budget.delta > 0.0 && self.budget.delta < 1.0) {
            return Err(PtrError::param("budget.delta", "must lie in (0, 1)"));
        }
        self.trim_policy.validate()?;
        if self.aggregator == Aggregator::PtrTrimmedMean {
            self.release_config()?;
        } else if !(self.sigma > 0.0 && self.clip_r > 0.0) {
            return Err(PtrError::param("sigma", "noise multiplier and clip bound must be positive"));
        }
        Ok(())
    }

    /// PTR parameters in gradient units.
    pub fn release_config(&self) -> Result<PtrConfig> {
        PtrConfig::new(self.sigma * self.clip_r, self.sigma * self.tau, self.tau, self.b, self.delta0)
    }

    /// PTR parameters at unit global sensitivity, as the accountant needs them.
    pub fn unit_config(&self) -> Result<PtrConfig> {
        self.release_config()?.normalized(self.clip_r)
    }
}

/// Per-iteration privacy cost of a training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAccounting {
    pub curve: RdpCurve,
    /// Present for PTR; one entry per order of `curve`.
    pub sources: Option<Vec<BoundSource>>,
}

/// Largest integer order used for Gaussian accounting.
pub const GAUSSIAN_MAX_ORDER: u32 = 200;

pub fn step_accounting(config: &TrainConfig) -> Result<StepAccounting> {
    match config.aggregator {
        Aggregator::PtrTrimmedMean => {
            let params = SubsampleParams::new(config.q, config.unit_config()?)?;
            let c = subsampled_ptr_curve(&params, &default_alpha_grid())?;
            Ok(StepAccounting {
                curve: c.curve,
                sources: Some(c.sources),
            })
        }
        Aggregator::Mean => Ok(StepAccounting {
            curve: subsampled_gaussian_curve(config.sigma, config.q, GAUSSIAN_MAX_ORDER)?,
            sources: None,
        }),
    }
}

/// Test outcome of one aggregation; `Empty` when the Poisson batch drew nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBranch {
    /// Failed test, large noise (`'+'`).
    Plus,
    /// Passed test, small noise (`'-'`).
    Minus,
    /// Plain-mean aggregator: no test.
    Mean,
    Empty,
}

impl StepBranch {
    pub fn symbol(self) -> &'static str {
        match self {
            StepBranch::Plus => "+",
            StepBranch::Minus => "-",
            StepBranch::Mean => "mean",
            StepBranch::Empty => "empty",
        }
    }
}

impl From<Branch> for StepBranch {
    fn from(b: Branch) -> Self {
        match b {
            Branch::LargeNoise => StepBranch::Plus,
            Branch::SmallNoise => StepBranch::Minus,
        }
    }
}

/// Noisy aggregate of a clipped batch with its branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub release: Vec<f64>,
    pub branch: StepBranch,
    pub delta_hat: Option<f64>,
}

/// PTR between `SUM` and `TSUM_F` over already-clipped gradients.
pub fn aggregate_ptr_tmean(
    gradients: &[Vec<f64>],
    dim: usize,
    trim: usize,
    config: &TrainConfig,
    rng: &mut PrivRng,
) -> Result<Aggregate> {
    if gradients.is_empty() {
        return Ok(Aggregate {
            release: vec![0.0; dim],
            branch: StepBranch::Empty,
            delta_hat: None,
        });
    }
    let oracle = TrimmedSumOracle {
        clip_bound: config.clip_r,
        trim,
    };
    let out = run_ptr(gradients, &config.release_config()?, &oracle, rng)?;
    Ok(Aggregate {
        release: out.release,
        branch: out.branch.into(),
        delta_hat: Some(out.delta_hat),
    })
}

fn aggregate_mean(gradients: &[Vec<f64>], dim: usize, config: &TrainConfig, rng: &mut PrivRng) -> Result<Aggregate> {
    if gradients.is_empty() {
        return Ok(Aggregate {
            release: vec![0.0; dim],
            branch: StepBranch::Empty,
            delta_hat: None,
        });
    }
    let mut sum = vec![0.0; dim];
    for g in gradients {
        for (s, x) in sum.iter_mut().zip(g) {
            *s += x;
        }
    }
    Ok(Aggregate {
        release: sample_gaussian_vec(&sum, config.sigma * config.clip_r, rng)?,
        branch: StepBranch::Mean,
        delta_hat: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Mean loss on the uncorrupted training data after the step.
    pub loss: f64,
    pub branch: StepBranch,
    /// Trim count used by this iteration.
    pub trim: usize,
    pub delta_hat: Option<f64>,
    pub batch_size: usize,
    pub eps_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
    pub step_accounting: StepAccounting,
    /// `step_accounting.curve` composed once per recorded iteration.
    pub cumulative: RdpCurve,
    pub final_dp: DpConversion,
    pub params: Vec<f64>,
    pub stop: StopReason,
    pub initial_loss: f64,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }
}

/// Runs private SGD from `w = 0` until `t_max` iterations or until the next
/// step would overrun the budget.
pub fn train<M: Model>(
    model: &M,
    data: &[Example],
    classes: usize,
    config: &TrainConfig,
    corruption: &CorruptionSpec,
) -> Result<TrainReport> {
    config.validate()?;
    corruption.validate()?;
    if data.is_empty() {
        return Err(PtrError::param("data", "training set is empty"));
    }
    let mut rng = RngSeed(config.seed).rng();
    let mut corrupted = data.to_vec();
    corrupt_dataset(&mut corrupted, corruption, classes, &mut rng)?;

    let accounting = step_accounting(config)?;
    let dim = model.num_params();
    let n = data.len();
    let expected_batch = config.q * n as f64;
    let (lo, hi) = config.trim_policy.bounds(expected_batch);
    let mut trim = config.f_init.clamp(lo, hi);
    let mut w = vec![0.0; dim];
    let initial_loss = model.mean_loss(&w, data);
    let mut records = Vec::with_capacity(config.t_max);
    let mut stop = StopReason::MaxIterations;

    for iter in 0..config.t_max {
        let spent = rdp_to_dp(&accounting.curve.scaled((iter + 1) as f64), config.budget.delta)?;
        if spent.guarantee.eps > config.budget.eps {
            stop = StopReason::BudgetExhausted;
            break;
        }
        let batch: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < config.q).collect();
        let mut grads: Vec<Vec<f64>> = batch.iter().map(|&i| model.gradient(&w, &corrupted[i])).collect();
        corrupt_gradients(&mut grads, corruption, &mut rng)?;
        let grads: Vec<Vec<f64>> = grads.iter().map(|g| clip(g, config.clip_r)).collect();

        let agg = match config.aggregator {
            Aggregator::PtrTrimmedMean => aggregate_ptr_tmean(&grads, dim, trim, config, &mut rng)?,
            Aggregator::Mean => aggregate_mean(&grads, dim, config, &mut rng)?,
        };
        let m = grads.len();
        let eta = match agg.branch {
            StepBranch::Plus => config.eta_b * m.saturating_sub(trim) as f64 / m as f64,
            _ => config.eta_b,
        };
        if expected_batch > 0.0 {
            for (wi, gi) in w.iter_mut().zip(&agg.release) {
                *wi -= eta * gi / expected_batch;
            }
        }
        records.push(IterationRecord {
            iter,
            loss: model.mean_loss(&w, data),
            branch: agg.branch,
            trim,
            delta_hat: agg.delta_hat,
            batch_size: m,
            eps_so_far: spent.guarantee.eps,
        });
        if config.aggregator == Aggregator::PtrTrimmedMean {
            match agg.branch {
                StepBranch::Plus => trim = adapt_f(trim, Branch::LargeNoise, &config.trim_policy, expected_batch),
                StepBranch::Minus => trim = adapt_f(trim, Branch::SmallNoise, &config.trim_policy, expected_batch),
                _ => {}
            }
        }
    }

    let cumulative = accounting.curve.scaled(records.len() as f64);
    let final_dp = rdp_to_dp(&cumulative, config.budget.delta)?;
    Ok(TrainReport {
        records,
        step_accounting: accounting,
        cumulative,
        final_dp,
        params: w,
        stop,
        initial_loss,
    })
}

/// Noise multiplier at which `steps` iterations of the subsampled Gaussian
/// mechanism spend exactly `target_eps` at `delta` (bisection in log space).
pub fn calibrate_gaussian_sigma(q: f64, steps: usize, delta: f64, target_eps: f64) -> Result<f64> {
    if !(target_eps > 0.0) {
        return Err(PtrError::param("target_eps", "must be positive"));
    }
    let eps_at = |sigma: f64| -> Result<f64> {
        let curve = subsampled_gaussian_curve(sigma, q, GAUSSIAN_MAX_ORDER)?.scaled(steps as f64);
        Ok(rdp_to_dp(&curve, delta)?.guarantee.eps)
    };
    let (mut lo, mut hi) = (1e-2f64.ln(), 1e4f64.ln());
    if eps_at(hi.exp())? > target_eps || eps_at(lo.exp())? < target_eps {
        return Err(PtrError::Domain(format!("no noise multiplier in [1e-2, 1e4] reaches eps = {target_eps}")));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid.exp())? > target_eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.exp())
}

/// Noise multiplier at which one step of the subsampled Gaussian mechanism
/// spends exactly `target_rdp` at integer order `alpha`.
pub fn match_gaussian_sigma_at_order(q: f64, alpha: u32, target_rdp: f64) -> Result<f64> {
    if alpha < 2 {
        return Err(PtrError::param("alpha", "must be an integer order of at least 2"));
    }
    if !(target_rdp > 0.0) {
        return Err(PtrError::param("target_rdp", "must be positive"));
    }
    let order = alpha as f64;
    let eps_at = |sigma: f64| -> Result<f64> { subsampled_gaussian_curve(sigma, q, alpha)?.eps_at(order) };
    let (mut lo, mut hi) = (1e-2f64.ln(), 1e4f64.ln());
    if eps_at(hi.exp())? > target_rdp || eps_at(lo.exp())? < target_rdp {
        return Err(PtrError::Domain(format!(
            "no noise multiplier in [1e-2, 1e4] spends {target_rdp} at order {alpha}"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid.exp())? > target_rdp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.exp())
}

/// Problem constants for the convergence bound of trimmed-mean PTR SGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    /// Strong-convexity modulus.
    pub alpha_sc: f64,
    /// Smoothness.
    pub beta_sm: f64,
    /// Lipschitz bound of per-example losses.
    pub r_lip: f64,
    /// Gradient-noise standard deviation.
    pub sigma_grad: f64,
    /// Gradient oracles per step.
    pub n: usize,
    pub f: usize,
    pub sigma1_noise: f64,
    pub sigma2_noise: f64,
    pub d: usize,
    pub eta_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceBound {
    pub rho_b: f64,
    pub m_b: f64,
    pub rho_a: f64,
    pub m_a: f64,
    pub eta_a: f64,
    pub eta_max: f64,
    /// Asymptotic bound `M_B / (1 - rho_B)` on `E ||w - w*||^2`.
    pub limit_radius: f64,
    /// Whether `sigma2` is large enough for the passed-test contraction to dominate.
    pub sigma2_floor_ok: bool,
}

/// Contraction factors and noise floors for both branches with
/// `eta_A = ((n - F) / n) eta_B`.
pub fn convergence_bound(p: &ConvergenceParams) -> Result<ConvergenceBound> {
    if !(p.alpha_sc > 0.0 && p.alpha_sc <= p.beta_sm) {
        return Err(PtrError::param("alpha_sc", "need 0 < alpha_sc <= beta_sm"));
    }
    if 2 * p.f >= p.n {
        return Err(PtrError::param("f", format!("need F < n/2, got F = {} and n = {}", p.f, p.n)));
    }
    if p.d == 0 {
        return Err(PtrError::param("d", "must be positive"));
    }
    let n = p.n as f64;
    let f = p.f as f64;
    let d = p.d as f64;
    let (a, b2) = (p.alpha_sc, p.beta_sm * p.beta_sm);
    let var = p.sigma_grad * p.sigma_grad;
    let eta_max = 2.0 * a * (n - 2.0 * f) / (n * n + (n - f + 1.0) * (n - f) * b2);
    if !(p.eta_b > 0.0 && p.eta_b <= eta_max) {
        return Err(PtrError::Config(format!(
            "eta_b = {} outside the admissible range (0, {eta_max}]",
            p.eta_b
        )));
    }
    let eb = p.eta_b;
    let ea = (n - f) / n * eb;
    let bias = (f / n).powi(2) * p.r_lip * p.r_lip;
    let s1 = p.sigma1_noise * p.sigma1_noise;
    let s2 = p.sigma2_noise * p.sigma2_noise;
    let rho_b = 1.0 - 2.0 * eb * a * (n - 2.0 * f) + eb * eb * (n * n + (n - f + 1.0) * (n - f) * b2);
    let m_b = eb * eb * (n - f + 1.0) * ((n - f) * var + d * s2) + bias;
    let rho_a = 1.0 - 2.0 * ea * a * (n - f) + ea * ea * (n * n + (n + 1.0) * (n - f) * b2);
    let m_a = ea * ea * (n + 1.0) * ((n - f) * var + f * p.r_lip + d * s1) + bias;
    let floor = (n - f) * (n + 1.0) / (n * n) * (((n - f) * var + f * p.r_lip) / d + s1);
    Ok(ConvergenceBound {
        rho_b,
        m_b,
        rho_a,
        m_a,
        eta_a: ea,
        eta_max,
        limit_radius: m_b / (1.0 - rho_b),
        sigma2_floor_ok: s2 >= floor,
    })
}
