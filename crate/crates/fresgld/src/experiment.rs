//! Config-driven experiment execution: per-seed runs, plot-ready outputs and
//! cross-variant comparison.
//!
//! Every seed owns one master seed split into named streams (`low-chain`,
//! `high-chain`, `model-low`, `model-high`, `swap`, `probe`), so sampler
//! variants run under coupled randomness and whole runs are bit-reproducible.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SamplerChoice, TargetConfig, VarianceConfig};
use crate::diagnostics::{
    density_grid, gaussian_quantile, kde, mixture_quantile, silverman_bandwidth, swap_summary,
    wasserstein2_vs_target, DensityEstimate, DEFAULT_N_QUANTILES,
};
use crate::error::{Error, Result};
use crate::pde::{iqoi_metrics, HeatModelParams, IqoiMetrics, PdePosterior};
use crate::samplers::{
    run_single_chain, ChainState, RecordOptions, ReplicaOptions, ReplicaSampler, SampleTrace,
    SingleChainKind,
};
use crate::stream::derive_rng;
use crate::targets::{EnergyModel, GaussianMixture1d, NoisyEnergyModel, Quadratic};
use crate::variance::PairVariance;

/// Environment variable overriding configured output directories; runs land
/// in `$FRESGLD_OUTPUT_DIR/<experiment name>`.
pub const OUTPUT_DIR_ENV: &str = "FRESGLD_OUTPUT_DIR";

/// Everything produced by one seed of one experiment.
pub struct SeedRun {
    pub seed: u64,
    pub trace: SampleTrace,
    /// Retained post-burn-in low-temperature samples, exactly `n_retained`.
    pub retained_low: Vec<Vec<f64>>,
    pub metrics: SeedMetrics,
}

/// Per-seed metrics record; exactly one of the distance and coverage blocks
/// is populated depending on the target.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SeedMetrics {
    pub seed: u64,
    pub w2_to_truth: Option<f64>,
    pub swap_acceptance_rate: f64,
    pub mean_energy_low: f64,
    pub n_samples: usize,
    pub iqoi: Option<IqoiMetrics>,
    /// Present when the seed aborted (for example on an inadmissible step
    /// size); other seeds still run.
    pub error: Option<String>,
}

/// Aggregate over the seeds of one experiment.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSummary {
    pub name: String,
    pub sampler: SamplerChoice,
    pub n_seeds: usize,
    pub n_failed: usize,
    pub seed_metrics: Vec<SeedMetrics>,
    pub w2_mean: Option<f64>,
    pub w2_sd: Option<f64>,
    pub annulus_coverage_mean: Option<f64>,
    pub angular_bins_mean: Option<f64>,
    pub output_dir: PathBuf,
}

fn build_base(target: &TargetConfig) -> Result<(Arc<dyn EnergyModel>, Option<HeatModelParams>)> {
    match target {
        TargetConfig::Mixture => Ok((Arc::new(GaussianMixture1d::benchmark()), None)),
        TargetConfig::Quadratic { m, dim } => Ok((Arc::new(Quadratic::new(*m, *dim)?), None)),
        TargetConfig::Pde {
            h,
            t_final,
            sensor,
            x0_true,
            obs_noise_sd,
            ..
        } => {
            let params = HeatModelParams {
                h: *h,
                t_final: *t_final,
                sensor: *sensor,
                x0_true: *x0_true,
            };
            let posterior = PdePosterior::from_true_center(params, *obs_noise_sd)?;
            Ok((Arc::new(posterior), Some(params)))
        }
    }
}

fn initial_position(target: &TargetConfig, dim: usize) -> Vec<f64> {
    match target {
        TargetConfig::Pde { x0_true, .. } => x0_true.to_vec(),
        _ => vec![0.0; dim],
    }
}

fn build_variance(config: &ExperimentConfig) -> PairVariance {
    match &config.variance_estimator {
        VarianceConfig::Known => PairVariance::known(),
        VarianceConfig::RunningConstant => PairVariance::running(),
        VarianceConfig::KernelRidge { .. } => {
            PairVariance::krr(config.variance_estimator.krr_settings().unwrap())
        }
    }
}

/// Retention plan: drop `burn_in` steps, then keep every `thin`-th step so at
/// least `n_retained` states survive; the trace is truncated to exactly
/// `n_retained` afterwards.
fn record_options(config: &ExperimentConfig) -> RecordOptions {
    let burn = config.burn_in();
    let span = config.n_steps - burn;
    RecordOptions {
        burn_in: burn,
        thin: (span / config.n_retained).max(1),
    }
}

/// Run one seed of the experiment. Deterministic in (config, seed).
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let (base, pde_params) = build_base(&config.target)?;
    let dim = base.dim();
    let init = initial_position(&config.target, dim);
    let (tau1, tau2) = config.temperatures;
    let record = record_options(config);

    let trace = if config.sampler.is_replica() {
        let kind = config.sampler.replica_kind().expect("replica sampler");
        let reflect_box = match &config.target {
            TargetConfig::Pde { reflect: true, .. } => Some((0.0, 1.0)),
            _ => None,
        };
        let mut sampler = ReplicaSampler::new(
            kind,
            ChainState::new(init.clone(), tau1, derive_rng(seed, "low-chain"))?,
            ChainState::new(init, tau2, derive_rng(seed, "high-chain"))?,
            NoisyEnergyModel::new(
                base.clone(),
                config.noise.low.to_spec(),
                derive_rng(seed, "model-low"),
            ),
            NoisyEnergyModel::new(
                base.clone(),
                config.noise.high.to_spec(),
                derive_rng(seed, "model-high"),
            ),
            build_variance(config),
            ReplicaOptions {
                swap: config.swap,
                clamp_noise: config.clamp_noise,
                reflect_box,
                probe_draws: config.probe_draws,
            },
            derive_rng(seed, "swap"),
            derive_rng(seed, "probe"),
        )?;
        sampler.run(&config.eta, config.n_steps, record)?
    } else {
        let kind = match config.sampler {
            SamplerChoice::Ld => SingleChainKind::Ld,
            _ => SingleChainKind::Sgld,
        };
        let mut chain = ChainState::new(init, tau1, derive_rng(seed, "low-chain"))?;
        let mut model = NoisyEnergyModel::new(
            base.clone(),
            config.noise.low.to_spec(),
            derive_rng(seed, "model-low"),
        );
        run_single_chain(kind, &mut chain, &mut model, &config.eta, config.n_steps, record)?
    };

    let mut retained_low = trace.chain_positions(0);
    retained_low.truncate(config.n_retained);

    let base_summary = swap_summary(&trace)?;
    let (w2, iqoi) = match &config.target {
        TargetConfig::Mixture => {
            let m = GaussianMixture1d::benchmark();
            let xs: Vec<f64> = retained_low.iter().map(|p| p[0]).collect();
            let d = wasserstein2_vs_target(&xs, &|p| mixture_quantile(&m, p), DEFAULT_N_QUANTILES)?;
            (Some(d), None)
        }
        TargetConfig::Quadratic { m, .. } => {
            // First-coordinate marginal of the tempered target is N(0, tau1/m).
            let xs: Vec<f64> = retained_low.iter().map(|p| p[0]).collect();
            let sd = (tau1 / m).sqrt();
            let d = wasserstein2_vs_target(
                &xs,
                &|p| gaussian_quantile(0.0, sd, p),
                DEFAULT_N_QUANTILES,
            )?;
            (Some(d), None)
        }
        TargetConfig::Pde { .. } => {
            let params = pde_params.expect("pde target has params");
            (None, Some(iqoi_metrics(&retained_low, &params)?))
        }
    };

    Ok(SeedRun {
        seed,
        metrics: SeedMetrics {
            seed,
            w2_to_truth: w2,
            swap_acceptance_rate: base_summary.swap_acceptance_rate,
            mean_energy_low: base_summary.mean_energy_low,
            n_samples: retained_low.len(),
            iqoi,
            error: None,
        },
        trace,
        retained_low,
    })
}

/// Resolved output directory: the env override (plus the experiment name) or
/// the configured path.
pub fn resolve_output_dir(config: &ExperimentConfig) -> PathBuf {
    match std::env::var(OUTPUT_DIR_ENV) {
        Ok(base) if !base.is_empty() => PathBuf::from(base).join(&config.name),
        _ => config.output_dir.clone(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_samples_csv(path: &Path, samples: &[Vec<f64>], dim: usize) -> Result<()> {
    let mut out = String::new();
    for i in 0..dim {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("theta_{i}"));
    }
    out.push('\n');
    for s in samples {
        for (i, x) in s.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{x}"));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn seed_kde(retained_low: &[Vec<f64>]) -> Result<DensityEstimate> {
    let xs: Vec<f64> = retained_low.iter().map(|p| p[0]).collect();
    let bw = silverman_bandwidth(&xs);
    let grid = density_grid(&xs, bw, 512, 3.0);
    kde(&xs, &grid, bw)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Run every seed of the experiment, writing per-seed trace, sample, density
/// and metrics files plus an aggregate record into the output directory.
/// A seed failing with a sampler error is recorded and skipped; the run only
/// fails if every seed does.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let out_dir = resolve_output_dir(config);
    std::fs::create_dir_all(&out_dir)?;

    let is_1d = !matches!(config.target, TargetConfig::Pde { .. });
    let results: Vec<(u64, Result<SeedRun>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || (seed, run_seed(config, seed))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed thread")).collect()
    });

    let mut seed_metrics = Vec::new();
    let mut first_error: Option<Error> = None;
    for (seed, result) in results {
        match result {
            Ok(run) => {
                run.trace.write_csv(&out_dir.join(format!("trace-seed-{seed}.csv")))?;
                write_samples_csv(
                    &out_dir.join(format!("samples-seed-{seed}.csv")),
                    &run.retained_low,
                    run.trace.dim,
                )?;
                if is_1d {
                    seed_kde(&run.retained_low)?
                        .write_csv(&out_dir.join(format!("kde-seed-{seed}.csv")))?;
                }
                write_json(&out_dir.join(format!("metrics-seed-{seed}.json")), &run.metrics)?;
                seed_metrics.push(run.metrics);
            }
            Err(e) => {
                log::warn!("seed {seed} failed: {e}");
                let metrics = SeedMetrics {
                    seed,
                    w2_to_truth: None,
                    swap_acceptance_rate: 0.0,
                    mean_energy_low: f64::NAN,
                    n_samples: 0,
                    iqoi: None,
                    error: Some(e.to_string()),
                };
                write_json(&out_dir.join(format!("metrics-seed-{seed}.json")), &metrics)?;
                seed_metrics.push(metrics);
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }

    let ok: Vec<&SeedMetrics> = seed_metrics.iter().filter(|m| m.error.is_none()).collect();
    if ok.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::invalid("no seeds succeeded")));
    }
    let w2s: Vec<f64> = ok.iter().filter_map(|m| m.w2_to_truth).collect();
    let (w2_mean, w2_sd) = if w2s.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&w2s);
        (Some(m), Some(s))
    };
    let annulus: Vec<f64> = ok
        .iter()
        .filter_map(|m| m.iqoi.as_ref().map(|i| i.annulus_coverage))
        .collect();
    let bins: Vec<f64> = ok
        .iter()
        .filter_map(|m| m.iqoi.as_ref().map(|i| i.angular_bins_occupied as f64))
        .collect();

    let summary = ExperimentSummary {
        name: config.name.clone(),
        sampler: config.sampler,
        n_seeds: config.seeds.len(),
        n_failed: seed_metrics.iter().filter(|m| m.error.is_some()).count(),
        seed_metrics,
        w2_mean,
        w2_sd,
        annulus_coverage_mean: (!annulus.is_empty()).then(|| mean_sd(&annulus).0),
        angular_bins_mean: (!bins.is_empty()).then(|| mean_sd(&bins).0),
        output_dir: out_dir.clone(),
    };
    write_json(&out_dir.join("aggregate.json"), &summary)?;
    Ok(summary)
}

/// One variant inside a comparison, ranked by its primary metric.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VariantResult {
    pub name: String,
    pub sampler: SamplerChoice,
    /// Mean W2 for 1-d targets, mean annulus coverage for the pde target.
    pub metric: f64,
    pub rank: usize,
}

/// Per-seed metric differences between two variants.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PairedDifference {
    pub first: String,
    pub second: String,
    /// metric(first) - metric(second), per shared seed.
    pub differences: Vec<f64>,
    /// Seeds where the first variant's metric is strictly better.
    pub first_better: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComparisonReport {
    /// `w2_to_truth` (lower is better) or `annulus_coverage` (higher is
    /// better).
    pub metric_name: String,
    pub lower_is_better: bool,
    pub variants: Vec<VariantResult>,
    pub paired: Vec<PairedDifference>,
}

fn primary_metric(m: &SeedMetrics, lower_is_better: bool) -> Option<f64> {
    if lower_is_better {
        m.w2_to_truth
    } else {
        m.iqoi.as_ref().map(|i| i.annulus_coverage)
    }
}

/// Compare experiment variants sharing a target and seed list: rank by the
/// aggregate primary metric and report per-seed paired differences for every
/// variant pair.
pub fn compare(configs: &[ExperimentConfig]) -> Result<ComparisonReport> {
    if configs.len() < 2 {
        return Err(Error::invalid("compare needs at least two configs"));
    }
    let target = &configs[0].target;
    let seeds = &configs[0].seeds;
    for c in &configs[1..] {
        if &c.target != target {
            return Err(Error::invalid("compare requires configs sharing one target"));
        }
        if &c.seeds != seeds {
            return Err(Error::invalid("compare requires configs sharing the seed list"));
        }
    }
    let lower_is_better = !matches!(target, TargetConfig::Pde { .. });
    let metric_name = if lower_is_better {
        "w2_to_truth"
    } else {
        "annulus_coverage"
    };

    let summaries: Vec<ExperimentSummary> = configs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;

    let mut variants: Vec<VariantResult> = summaries
        .iter()
        .map(|s| {
            let metric = if lower_is_better {
                s.w2_mean.ok_or_else(|| Error::invalid("variant lacks a distance metric"))
            } else {
                s.annulus_coverage_mean
                    .ok_or_else(|| Error::invalid("variant lacks coverage metrics"))
            }?;
            Ok(VariantResult {
                name: s.name.clone(),
                sampler: s.sampler,
                metric,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..variants.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (variants[a].metric, variants[b].metric);
        if lower_is_better {
            x.partial_cmp(&y).unwrap()
        } else {
            y.partial_cmp(&x).unwrap()
        }
    });
    for (rank, idx) in order.iter().enumerate() {
        variants[*idx].rank = rank + 1;
    }

    let mut paired = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            let mut differences = Vec::new();
            let mut first_better = 0usize;
            for (a, b) in summaries[i].seed_metrics.iter().zip(&summaries[j].seed_metrics) {
                if let (Some(x), Some(y)) = (
                    primary_metric(a, lower_is_better),
                    primary_metric(b, lower_is_better),
                ) {
                    let d = x - y;
                    differences.push(d);
                    let better = if lower_is_better { d < 0.0 } else { d > 0.0 };
                    if better {
                        first_better += 1;
                    }
                }
            }
            paired.push(PairedDifference {
                first: summaries[i].name.clone(),
                second: summaries[j].name.clone(),
                differences,
                first_better,
            });
        }
    }

    Ok(ComparisonReport {
        metric_name: metric_name.to_string(),
        lower_is_better,
        variants,
        paired,
    })
}
