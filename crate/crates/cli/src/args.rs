//! Command-line flags and their resolution into [`Job`]s.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ptr_accountant::accountant::{default_alpha_grid, optimal_delta0};
use ptr_accountant::audit::AuditScenario;
use ptr_accountant::sgd::{Aggregator, CorruptionKind, CorruptionSpec};

use crate::error::{from_value, CliError, CliResult};
use crate::jobs::{
    AuditParams, DeltaMarginParams, Fig1Params, Fig2Params, Fig3Params, Job, OptimizedDelta0, RdpCurveParams,
    StepParams, TrainSimConfig,
};

#[derive(Debug, Parser)]
#[command(name = "ptr-accountant", version, about = "Privacy accounting for Propose-Test-Release")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rényi-DP curve of a single PTR release.
    RdpCurve(RdpCurveArgs),
    /// Direct `(eps, delta)` analysis against the RDP route over a delta0 sweep.
    CompareFig1(Fig1Args),
    /// White-box, black-box and lower subsampled RDP bounds per order.
    CompareFig2(Fig2Args),
    /// Privacy loss of repeated subsampled PTR steps under three accountants.
    ComposeFig3(Fig3Args),
    /// Local sensitivities and safety margin of a trimmed sum.
    DeltaMargin(DeltaMarginArgs),
    /// Robust private SGD on synthetic data.
    TrainSim(TrainSimArgs),
    /// Monte Carlo Rényi moment of a built-in adjacent pair against its bound.
    Audit(AuditArgs),
    /// Reruns the command recorded in an output file's manifest.
    Replay(ReplayArgs),
}

/// Accepts decimals and fractions such as `1/3`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            n / d
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("not a finite number: {s:?}"))
    }
}

/// `lo:hi` or `lo:hi:step`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

pub fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let (lo, hi, step) = match parts.as_slice() {
        [lo, hi] => (parse_real(lo)?, parse_real(hi)?, 1.0),
        [lo, hi, step] => (parse_real(lo)?, parse_real(hi)?, parse_real(step)?),
        _ => return Err(format!("expected lo:hi or lo:hi:step, got {s:?}")),
    };
    if !(step > 0.0 && lo <= hi) {
        return Err(format!("need lo <= hi and a positive step, got {s:?}"));
    }
    Ok(Range { lo, hi, step })
}

/// `none`, or `KIND:RATIO` with `bit_flip` accepted for `gradient_bit_flip`.
pub fn parse_corruption(s: &str) -> Result<CorruptionSpec, String> {
    if s == "none" {
        return Ok(CorruptionSpec::default());
    }
    let (kind, ratio) = s.split_once(':').ok_or_else(|| format!("expected KIND:RATIO, got {s:?}"))?;
    let kind = match kind {
        "label_flip" => CorruptionKind::LabelFlip,
        "targeted_label_flip" => CorruptionKind::TargetedLabelFlip,
        "feature_noise" => CorruptionKind::FeatureNoise,
        "gradient_noise" => CorruptionKind::GradientNoise,
        "bit_flip" | "gradient_bit_flip" => CorruptionKind::GradientBitFlip,
        other => return Err(format!("unknown corruption {other:?}")),
    };
    CorruptionSpec::new(kind, parse_real(ratio)?).map_err(|e| e.to_string())
}

pub fn parse_aggregator(s: &str) -> Result<Aggregator, String> {
    match s {
        "ptr" | "ptr_trimmed_mean" => Ok(Aggregator::PtrTrimmedMean),
        "mean" => Ok(Aggregator::Mean),
        other => Err(format!("unknown aggregator {other:?}, expected ptr or mean")),
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RdpCurveArgs {
    #[arg(long, value_parser = parse_real, default_value = "20")]
    pub sigma1: f64,
    /// Defaults to `sigma1 tau`.
    #[arg(long, value_parser = parse_real)]
    pub sigma2: Option<f64>,
    /// Defaults to `sigma2 / sigma1`, or 1/2 when neither is given.
    #[arg(long, value_parser = parse_real)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub b: f64,
    #[arg(long, value_parser = parse_real, default_value = "1e-6", conflicts_with = "optimal_delta0")]
    pub delta0: f64,
    /// Pick delta0 where both arms of the bound meet, at `--optimal-at` or
    /// the first order of the grid.
    #[arg(long)]
    pub optimal_delta0: bool,
    #[arg(long, value_parser = parse_real, requires = "optimal_delta0")]
    pub optimal_at: Option<f64>,
    /// Orders, comma separated.
    #[arg(long, value_parser = parse_real, value_delimiter = ',', conflicts_with = "alpha_range")]
    pub alpha: Vec<f64>,
    #[arg(long, value_parser = parse_range)]
    pub alpha_range: Option<Range>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    #[arg(long, value_parser = parse_real, value_delimiter = ',', default_value = "20")]
    pub sigma1: Vec<f64>,
    /// Ratios `sigma2 / sigma1`.
    #[arg(long, value_parser = parse_real, value_delimiter = ',', default_value = "1/2,1/3")]
    pub tau: Vec<f64>,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub b: f64,
    #[arg(long, value_parser = parse_real, default_value = "1e-5")]
    pub delta: f64,
    #[arg(long, value_parser = parse_real, value_delimiter = ',', default_value = "1e-8,1e-7,1e-6,5e-6")]
    pub delta0: Vec<f64>,
    #[arg(long, value_parser = parse_real, default_value = "200")]
    pub alpha_max: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct Fig2Args {
    #[arg(long, value_parser = parse_real, default_value = "0.01")]
    pub q: f64,
    #[arg(long, value_parser = parse_real, default_value = "4")]
    pub sigma1: f64,
    #[arg(long, value_parser = parse_real, default_value = "4")]
    pub sigma2: f64,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub b: f64,
    #[arg(long, value_parser = parse_real, default_value = "1e-5")]
    pub delta0: f64,
    /// Integer orders `lo:hi`.
    #[arg(long, value_parser = parse_range, default_value = "2:64")]
    pub alpha_range: Range,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct Fig3Args {
    #[arg(long, value_parser = parse_real, default_value = "0.01")]
    pub q: f64,
    #[arg(long, value_parser = parse_real, default_value = "12")]
    pub sigma1: f64,
    #[arg(long, value_parser = parse_real, default_value = "4")]
    pub sigma2: f64,
    #[arg(long, value_parser = parse_real, default_value = "2")]
    pub b: f64,
    #[arg(long, value_parser = parse_real, default_value = "1e-8")]
    pub delta0: f64,
    #[arg(long, value_parser = parse_real, default_value = "1e-5")]
    pub delta: f64,
    /// Numbers of composed steps.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,500,700,1000,1500,2000")]
    pub k: Vec<u64>,
    #[arg(long, value_parser = parse_real, default_value = "200")]
    pub alpha_max: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DeltaMarginArgs {
    /// One vector per line, whitespace-separated decimals.
    #[arg(long)]
    pub input: PathBuf,
    /// Trim count F.
    #[arg(long = "trim", short = 'F')]
    pub trim: usize,
    #[arg(long, value_parser = parse_real)]
    pub tau: f64,
    /// Clip bound R, also the global sensitivity.
    #[arg(long = "clip-r", short = 'R', value_parser = parse_real)]
    pub clip_r: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrainSimArgs {
    /// JSON config; the built-in default when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to run on the same data.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// `none` or `KIND:RATIO`, e.g. `bit_flip:0.2`.
    #[arg(long, value_parser = parse_corruption)]
    pub corruption: Option<CorruptionSpec>,
    /// `ptr` or `mean`.
    #[arg(long, value_parser = parse_aggregator)]
    pub aggregator: Option<Aggregator>,
    #[arg(long, value_parser = parse_real)]
    pub budget_eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub q: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub sigma: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub b: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub delta0: Option<f64>,
    /// Summary JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace CSV; defaults to `<out>.trace.csv` when `--out` is given.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub scenario: AuditScenario,
    #[arg(long, value_parser = parse_real, default_value = "2")]
    pub alpha: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A CSV or JSON file written by any command.
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace CSV for replayed training runs.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Where a job writes its files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Destinations {
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl RdpCurveArgs {
    pub fn resolve(&self) -> CliResult<Job> {
        let sigma1 = self.sigma1;
        let (sigma2, tau) = match (self.sigma2, self.tau) {
            (Some(s2), Some(t)) => (s2, t),
            (Some(s2), None) => (s2, s2 / sigma1),
            (None, Some(t)) => (sigma1 * t, t),
            (None, None) => (sigma1 / 2.0, 0.5),
        };
        let alphas = match (&self.alpha_range, self.alpha.is_empty()) {
            (Some(r), _) => r.values(),
            (None, false) => self.alpha.clone(),
            (None, true) => default_alpha_grid(),
        };
        let (delta0, optimal) = if self.optimal_delta0 {
            let at_alpha = self.optimal_at.unwrap_or(alphas[0]);
            let opt = optimal_delta0(sigma1, sigma2, self.b, at_alpha)?;
            let info = OptimizedDelta0 {
                at_alpha,
                raw: opt.raw,
                clamped: opt.was_clamped(),
            };
            (opt.delta0, Some(info))
        } else {
            (self.delta0, None)
        };
        let params = RdpCurveParams {
            sigma1,
            sigma2,
            tau,
            b: self.b,
            delta0,
            optimal_delta0: optimal,
            alphas,
        };
        params.config()?;
        Ok(Job::RdpCurve(params))
    }
}

impl Fig1Args {
    pub fn resolve(&self) -> CliResult<Job> {
        Ok(Job::CompareFig1(Fig1Params {
            sigma1: self.sigma1.clone(),
            tau: self.tau.clone(),
            b: self.b,
            delta: self.delta,
            delta0: self.delta0.clone(),
            alpha_max: self.alpha_max,
        }))
    }
}

fn integer_bounds(r: &Range) -> CliResult<(u32, u32)> {
    let whole = |x: f64| x.fract() == 0.0 && x >= 0.0 && x <= f64::from(u32::MAX);
    if !(whole(r.lo) && whole(r.hi) && r.step == 1.0) {
        return Err(CliError::Usage("--alpha-range must be integer lo:hi here".into()));
    }
    Ok((r.lo as u32, r.hi as u32))
}

impl Fig2Args {
    pub fn resolve(&self) -> CliResult<Job> {
        let (alpha_min, alpha_max) = integer_bounds(&self.alpha_range)?;
        Ok(Job::CompareFig2(Fig2Params {
            step: StepParams {
                q: self.q,
                sigma1: self.sigma1,
                sigma2: self.sigma2,
                tau: self.sigma2 / self.sigma1,
                b: self.b,
                delta0: self.delta0,
            },
            alpha_min,
            alpha_max,
        }))
    }
}

impl Fig3Args {
    pub fn resolve(&self) -> CliResult<Job> {
        Ok(Job::ComposeFig3(Fig3Params {
            step: StepParams {
                q: self.q,
                sigma1: self.sigma1,
                sigma2: self.sigma2,
                tau: self.sigma2 / self.sigma1,
                b: self.b,
                delta0: self.delta0,
            },
            delta: self.delta,
            ks: self.k.clone(),
            alpha_max: self.alpha_max,
        }))
    }
}

/// Parses the vector file format; blank lines are skipped.
pub fn parse_vectors(text: &str, origin: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Usage(format!("{}:{}: bad number {tok:?}", origin.display(), lineno + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(first) = vectors.first() {
            if first.len() != v.len() {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected {} components, got {}",
                    origin.display(),
                    lineno + 1,
                    first.len(),
                    v.len()
                )));
            }
        }
        vectors.push(v);
    }
    if vectors.is_empty() {
        return Err(CliError::Usage(format!("{}: no vectors", origin.display())));
    }
    Ok(vectors)
}

impl DeltaMarginArgs {
    pub fn resolve(&self) -> CliResult<Job> {
        let text = fs::read_to_string(&self.input).map_err(|e| CliError::io(&self.input, e))?;
        Ok(Job::DeltaMargin(DeltaMarginParams {
            vectors: parse_vectors(&text, &self.input)?,
            trim: self.trim,
            tau: self.tau,
            clip_r: self.clip_r,
        }))
    }
}

impl TrainSimArgs {
    pub fn resolve(&self) -> CliResult<Job> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", path.display())))?;
                from_value::<TrainSimConfig>(value, &path.display().to_string())?
            }
            None => TrainSimConfig::default(),
        };
        let t = &mut config.train;
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.aggregator {
            t.aggregator = v;
        }
        if let Some(v) = self.budget_eps {
            t.budget.eps = v;
        }
        if let Some(v) = self.t_max {
            t.t_max = v;
        }
        if let Some(v) = self.q {
            t.q = v;
        }
        if let Some(v) = self.sigma {
            t.sigma = v;
        }
        if let Some(v) = self.tau {
            t.tau = v;
        }
        if let Some(v) = self.b {
            t.b = v;
        }
        if let Some(v) = self.delta0 {
            t.delta0 = v;
        }
        if let Some(v) = self.corruption {
            config.corruption = v;
        }
        if let Some(v) = self.seeds {
            config.seeds = v;
        }
        config.validate()?;
        Ok(Job::TrainSim(config))
    }

    pub fn destinations(&self) -> Destinations {
        Destinations {
            out: self.out.clone(),
            trace: self.trace.clone(),
        }
    }
}

impl AuditArgs {
    pub fn resolve(&self) -> CliResult<Job> {
        Ok(Job::Audit(AuditParams {
            scenario: self.scenario,
            alpha: self.alpha,
            samples: self.samples,
            seed: self.seed,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_accept_fractions() {
        assert_eq!(parse_real("1/4").unwrap(), 0.25);
        assert_eq!(parse_real("1e-5").unwrap(), 1e-5);
        assert!(parse_real("1/0").is_err());
        assert!(parse_real("abc").is_err());
    }

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(parse_range("2:5").unwrap().values(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse_range("1.5:2:0.25").unwrap().values(), vec![1.5, 1.75, 2.0]);
        assert!(parse_range("5:2").is_err());
        assert!(parse_range("2").is_err());
    }

    #[test]
    fn corruption_flags() {
        let c = parse_corruption("bit_flip:0.2").unwrap();
        assert_eq!((c.kind, c.ratio), (CorruptionKind::GradientBitFlip, 0.2));
        assert_eq!(parse_corruption("none").unwrap(), CorruptionSpec::default());
        assert!(parse_corruption("bit_flip:0.7").is_err());
        assert!(parse_corruption("meteor:0.1").is_err());
    }

    #[test]
    fn vector_files() {
        let p = Path::new("v.txt");
        assert_eq!(parse_vectors("1 2\n\n3 4\n", p).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_vectors("1 2\n3\n", p).is_err());
        assert!(parse_vectors("1 x\n", p).is_err());
        assert!(parse_vectors("\n  \n", p).is_err());
    }
}
