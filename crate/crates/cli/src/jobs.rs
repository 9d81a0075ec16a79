//! Resolved parameter sets and the computations behind each command.
//!
//! A [`Job`] is what a manifest records: running it again yields the same
//! payload byte for byte.

use ptr_accountant::accountant::{ptr_rdp_arms, DpGuarantee};
use ptr_accountant::audit::{run_audit, AuditScenario};
use ptr_accountant::figures::{alpha_grid_up_to, amplification_rows, direct_vs_rdp, CompositionCurves};
use ptr_accountant::sgd::{
    gaussian_mixture_data, linear_regression_data, quadratic_data, train, CorruptionSpec, Example, LinearRegression,
    Model, Quadratic, SoftmaxRegression, StepBranch, TrainConfig, TrainReport,
};
use ptr_accountant::subsampling::SubsampleParams;
use ptr_accountant::trimmed_sum::{local_sensitivity_profile, safety_margin, GradientBatch, SensitivityProfile};
use ptr_accountant::{PtrConfig, RngSeed, SafetyMargin};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::output::{num, opt_num, JobOutput, Payload, Table};

/// Version of the `train-sim` config schema this build reads.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Job {
    RdpCurve(RdpCurveParams),
    CompareFig1(Fig1Params),
    CompareFig2(Fig2Params),
    ComposeFig3(Fig3Params),
    DeltaMargin(DeltaMarginParams),
    TrainSim(TrainSimConfig),
    Audit(AuditParams),
}

impl Job {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::TrainSim(c) => Some(c.train.seed),
            Job::Audit(p) => Some(p.seed),
            _ => None,
        }
    }

    pub fn run(&self) -> CliResult<JobOutput> {
        let main = match self {
            Job::RdpCurve(p) => p.run()?,
            Job::CompareFig1(p) => p.run()?,
            Job::CompareFig2(p) => p.run()?,
            Job::ComposeFig3(p) => p.run()?,
            Job::DeltaMargin(p) => p.run()?,
            Job::Audit(p) => p.run()?,
            Job::TrainSim(c) => return c.run(),
        };
        Ok(JobOutput { main, trace: None })
    }
}

/// `delta0` picked by equalizing the two arms of the PTR bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizedDelta0 {
    pub at_alpha: f64,
    pub raw: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdpCurveParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub tau: f64,
    pub b: f64,
    pub delta0: f64,
    pub optimal_delta0: Option<OptimizedDelta0>,
    pub alphas: Vec<f64>,
}

impl RdpCurveParams {
    pub fn config(&self) -> CliResult<PtrConfig> {
        if !(self.sigma2 < self.sigma1) {
            return Err(CliError::Usage(format!(
                "sigma2 must be below sigma1, got sigma1 = {} and sigma2 = {}",
                self.sigma1, self.sigma2
            )));
        }
        Ok(PtrConfig::new(self.sigma1, self.sigma2, self.tau, self.b, self.delta0)?)
    }

    fn run(&self) -> CliResult<Payload> {
        let config = self.config()?;
        let mut table = Table::new(vec!["alpha", "eps_ptr", "eps_gauss_large", "eps_lap", "arm_taken"]);
        for &alpha in &self.alphas {
            let arms = ptr_rdp_arms(&config, alpha)?;
            table.push(vec![
                num(alpha),
                num(arms.value()),
                num(arms.eps_gauss_large),
                num(arms.eps_lap),
                arms.binding().as_str().to_string(),
            ]);
        }
        Ok(Payload::Csv(table))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1Params {
    pub sigma1: Vec<f64>,
    pub tau: Vec<f64>,
    pub b: f64,
    pub delta: f64,
    pub delta0: Vec<f64>,
    pub alpha_max: f64,
}

impl Fig1Params {
    fn run(&self) -> CliResult<Payload> {
        let alphas = alpha_grid_up_to(self.alpha_max);
        let mut table = Table::new(vec![
            "sigma1",
            "sigma2",
            "delta0",
            "eps_direct",
            "eps_from_rdp",
            "alpha",
            "arm_taken",
        ]);
        for &sigma1 in &self.sigma1 {
            for &tau in &self.tau {
                for &delta0 in &self.delta0 {
                    let row = direct_vs_rdp(sigma1, tau, self.b, self.delta, delta0, &alphas)?;
                    table.push(vec![
                        num(sigma1),
                        num(sigma1 * tau),
                        num(delta0),
                        num(row.eps_direct),
                        num(row.eps_from_rdp),
                        num(row.alpha),
                        row.arm.as_str().to_string(),
                    ]);
                }
            }
        }
        Ok(Payload::Csv(table))
    }
}

/// Per-step PTR configuration at unit sensitivity with sampling rate `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    pub q: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub tau: f64,
    pub b: f64,
    pub delta0: f64,
}

impl StepParams {
    fn subsample(&self) -> CliResult<SubsampleParams> {
        let config = PtrConfig::new(self.sigma1, self.sigma2, self.tau, self.b, self.delta0)?;
        Ok(SubsampleParams::new(self.q, config)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Params {
    pub step: StepParams,
    pub alpha_min: u32,
    pub alpha_max: u32,
}

impl Fig2Params {
    fn run(&self) -> CliResult<Payload> {
        let rows = amplification_rows(&self.step.subsample()?, self.alpha_min, self.alpha_max)?;
        let mut table = Table::new(vec!["alpha", "eps_whitebox", "eps_blackbox", "eps_lower", "conditions_ok"]);
        for r in rows {
            table.push(vec![
                r.alpha.to_string(),
                opt_num(r.eps_whitebox),
                num(r.eps_blackbox),
                num(r.eps_lower),
                r.conditions_ok.to_string(),
            ]);
        }
        Ok(Payload::Csv(table))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3Params {
    pub step: StepParams,
    pub delta: f64,
    pub ks: Vec<u64>,
    pub alpha_max: f64,
}

impl Fig3Params {
    fn run(&self) -> CliResult<Payload> {
        let curves = CompositionCurves::new(self.step.subsample()?, &alpha_grid_up_to(self.alpha_max))?;
        let rows = self
            .ks
            .par_iter()
            .map(|&k| curves.row(k, self.delta))
            .collect::<ptr_accountant::Result<Vec<_>>>()?;
        let mut table = Table::new(vec!["k", "eps_whitebox_ma", "eps_blackbox_ma", "eps_strong_composition"]);
        for r in rows {
            table.push(vec![
                r.k.to_string(),
                num(r.eps_whitebox_ma),
                num(r.eps_blackbox_ma),
                opt_num(r.eps_strong_composition),
            ]);
        }
        Ok(Payload::Csv(table))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaMarginParams {
    pub vectors: Vec<Vec<f64>>,
    pub trim: usize,
    pub tau: f64,
    pub clip_r: f64,
}

impl DeltaMarginParams {
    fn run(&self) -> CliResult<Payload> {
        let first = self.vectors.first().ok_or_else(|| CliError::Usage("no vectors in input".into()))?;
        let batch = GradientBatch::clipped(self.vectors.clone(), first.len(), self.clip_r)?;
        let profile = SensitivityProfile::new(self.trim, self.tau, self.clip_r)?;
        let margin = match safety_margin(&batch, &profile) {
            SafetyMargin::Finite(r) => json!(r),
            SafetyMargin::Infinite => json!("inf"),
        };
        let mut fields = Map::new();
        fields.insert("m".into(), json!(batch.len()));
        fields.insert("F".into(), json!(self.trim));
        fields.insert("tau".into(), json!(self.tau));
        fields.insert("ls_r".into(), json!(local_sensitivity_profile(&batch, &profile)));
        fields.insert("delta_margin".into(), margin);
        Ok(Payload::Json(fields))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditParams {
    pub scenario: AuditScenario,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
}

impl AuditParams {
    fn run(&self) -> CliResult<Payload> {
        let report = run_audit(self.scenario, self.alpha, self.samples, self.seed)?;
        let Value::Object(fields) = serde_json::to_value(report).expect("report serializes") else {
            unreachable!("audit report is a struct")
        };
        Ok(Payload::Json(fields))
    }
}

/// Synthetic training data; `seed` drives generation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `y = w* . x + noise` with standard normal features.
    LinearRegression { n: usize, d: usize, noise: f64, seed: u64 },
    /// Points scattered around `center`; the loss is half the squared
    /// distance to the point.
    Quadratic {
        n: usize,
        center: Vec<f64>,
        spread: f64,
        seed: u64,
    },
    GaussianMixture {
        n: usize,
        d: usize,
        classes: usize,
        separation: f64,
        seed: u64,
    },
}

impl DataSpec {
    fn n(&self) -> usize {
        match self {
            DataSpec::LinearRegression { n, .. } | DataSpec::Quadratic { n, .. } | DataSpec::GaussianMixture { n, .. } => *n,
        }
    }
}

/// The `train-sim` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSimConfig {
    pub schema_version: u32,
    pub data: DataSpec,
    pub train: TrainConfig,
    #[serde(default)]
    pub corruption: CorruptionSpec,
    /// Runs seeds `train.seed .. train.seed + seeds` on the same data.
    #[serde(default = "one")]
    pub seeds: u64,
}

fn one() -> u64 {
    1
}

impl Default for TrainSimConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            data: DataSpec::LinearRegression {
                n: 20_000,
                d: 10,
                noise: 0.0,
                seed: 100,
            },
            train: TrainConfig {
                q: 0.1,
                eta_b: 0.5,
                f_init: 500,
                trim_policy: ptr_accountant::sgd::TrimPolicy {
                    min_frac: 0.1,
                    ..Default::default()
                },
                clip_r: 1.0,
                tau: 1.0 / 6.0,
                sigma: 24.0,
                b: 16.0,
                delta0: 1e-3,
                t_max: 1000,
                budget: DpGuarantee { eps: 2.0, delta: 1e-5 },
                seed: 0,
                aggregator: Default::default(),
            },
            corruption: CorruptionSpec::default(),
            seeds: 1,
        }
    }
}

impl TrainSimConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema {
                origin: "config".into(),
                path: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            });
        }
        if self.data.n() == 0 {
            return Err(CliError::Usage("data.n must be positive".into()));
        }
        if self.seeds == 0 {
            return Err(CliError::Usage("seeds must be positive".into()));
        }
        self.corruption.validate()?;
        self.train.validate()?;
        Ok(())
    }

    fn run(&self) -> CliResult<JobOutput> {
        self.validate()?;
        let (data, classes): (Vec<Example>, usize) = match &self.data {
            DataSpec::LinearRegression { n, d, noise, seed } => {
                (linear_regression_data(*n, *d, *noise, &mut RngSeed(*seed).rng()).0, 0)
            }
            DataSpec::Quadratic { n, center, spread, seed } => {
                (quadratic_data(*n, center, *spread, &mut RngSeed(*seed).rng()), 0)
            }
            DataSpec::GaussianMixture {
                n,
                d,
                classes,
                separation,
                seed,
            } => (
                gaussian_mixture_data(*n, *d, *classes, *separation, &mut RngSeed(*seed).rng()),
                *classes,
            ),
        };
        let reports = match &self.data {
            DataSpec::LinearRegression { d, .. } => self.run_seeds(&LinearRegression { features: *d }, &data, classes),
            DataSpec::Quadratic { center, .. } => self.run_seeds(&Quadratic { dim: center.len() }, &data, classes),
            DataSpec::GaussianMixture { d, classes, .. } => self.run_seeds(
                &SoftmaxRegression {
                    features: *d,
                    classes: *classes,
                },
                &data,
                *classes,
            ),
        }?;
        Ok(self.render(&reports))
    }

    fn run_seeds<M: Model>(&self, model: &M, data: &[Example], classes: usize) -> CliResult<Vec<(u64, TrainReport)>> {
        (0..self.seeds)
            .into_par_iter()
            .map(|i| {
                let seed = self.train.seed + i;
                let config = TrainConfig {
                    seed,
                    ..self.train.clone()
                };
                Ok((seed, train(model, data, classes, &config, &self.corruption)?))
            })
            .collect()
    }

    fn render(&self, reports: &[(u64, TrainReport)]) -> JobOutput {
        let multi = self.seeds > 1;
        let mut header = vec!["iter", "loss", "branch", "F", "eps_so_far"];
        if multi {
            header.insert(0, "seed");
        }
        let mut trace = Table::new(header);
        let mut runs = Vec::new();
        for (seed, report) in reports {
            for r in &report.records {
                let mut row = vec![
                    r.iter.to_string(),
                    num(r.loss),
                    r.branch.symbol().to_string(),
                    r.trim.to_string(),
                    num(r.eps_so_far),
                ];
                if multi {
                    row.insert(0, seed.to_string());
                }
                trace.push(row);
            }
            let count = |b: StepBranch| report.records.iter().filter(|r| r.branch == b).count();
            runs.push(json!({
                "seed": seed,
                "iterations": report.records.len(),
                "stop": report.stop,
                "initial_loss": report.initial_loss,
                "final_loss": report.final_loss(),
                "eps": report.final_dp.guarantee.eps,
                "delta": report.final_dp.guarantee.delta,
                "alpha": report.final_dp.alpha,
                "branches": {
                    "plus": count(StepBranch::Plus),
                    "minus": count(StepBranch::Minus),
                    "mean": count(StepBranch::Mean),
                    "empty": count(StepBranch::Empty),
                },
                "params": report.params,
            }));
        }
        let mean_final = reports.iter().map(|(_, r)| r.final_loss()).sum::<f64>() / reports.len() as f64;
        let mut fields = Map::new();
        fields.insert("runs".into(), Value::Array(runs));
        fields.insert("mean_final_loss".into(), json!(mean_final));
        JobOutput {
            main: Payload::Json(fields),
            trace: Some(trace),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_roundtrips_through_json() {
        let job = Job::Audit(AuditParams {
            scenario: AuditScenario::Identical,
            alpha: 2.0,
            samples: 100_000,
            seed: 4,
        });
        let value = serde_json::to_value(&job).unwrap();
        assert_eq!(value["command"], "audit");
        assert_eq!(crate::error::from_value::<Job>(value, "t").unwrap(), job);
    }

    #[test]
    fn unknown_config_fields_are_rejected_with_their_path() {
        let mut value = serde_json::to_value(TrainSimConfig::default()).unwrap();
        value["train"]["trim_policy"]["bogus"] = json!(1);
        let err = crate::error::from_value::<TrainSimConfig>(value, "cfg").unwrap_err();
        assert!(err.to_string().contains("train.trim_policy"), "{err}");
    }

    #[test]
    fn rdp_curve_rejects_inverted_scales() {
        let p = RdpCurveParams {
            sigma1: 2.0,
            sigma2: 2.0,
            tau: 1.0,
            b: 1.0,
            delta0: 1e-6,
            optimal_delta0: None,
            alphas: vec![2.0],
        };
        assert_eq!(p.config().unwrap_err().exit_code(), 2);
    }
}
