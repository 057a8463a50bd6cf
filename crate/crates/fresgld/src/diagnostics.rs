//! Output diagnostics: kernel density estimates for the density figures,
//! empirical 1-d 2-Wasserstein distance against samples or analytic targets,
//! and swap/trace summaries.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::samplers::SampleTrace;
use crate::targets::GaussianMixture1d;

/// Gaussian-kernel density estimate on a fixed grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid integral over the grid; close to 1 when the grid spans the
    /// sample range generously.
    pub fn mass(&self) -> f64 {
        let mut m = 0.0;
        for w in self.grid.windows(2).zip(self.values.windows(2)) {
            let (g, v) = w;
            m += 0.5 * (v[0] + v[1]) * (g[1] - g[0]);
        }
        m
    }

    /// Two-column CSV: `grid,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,density\n");
        for (g, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{g},{v}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Silverman's rule of thumb `1.06 σ̂ n^{-1/5}` with a positive floor for
/// degenerate samples.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (1.06 * sd * n.powf(-0.2)).max(1e-6)
}

/// Uniform evaluation grid spanning the sample range plus `pad` bandwidths
/// on either side.
pub fn density_grid(samples: &[f64], bandwidth: f64, n_points: usize, pad: f64) -> Vec<f64> {
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - pad * bandwidth;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad * bandwidth;
    (0..n_points)
        .map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
        .collect()
}

/// Gaussian-kernel density estimate of the samples on the grid.
pub fn kde(samples: &[f64], grid: &[f64], bandwidth: f64) -> Result<DensityEstimate> {
    if samples.len() < 2 {
        return Err(Error::invalid("kde needs at least 2 samples"));
    }
    if !(bandwidth > 0.0) || grid.len() < 2 {
        return Err(Error::invalid("kde needs bandwidth > 0 and a grid of >= 2 points"));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let values = grid
        .iter()
        .map(|&g| {
            norm * samples
                .iter()
                .map(|&x| {
                    let z = (g - x) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        bandwidth,
    })
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Levels used for quantile-grid couplings.
pub const DEFAULT_N_QUANTILES: usize = 10_000;

fn empirical_quantile(sorted_samples: &[f64], p: f64) -> f64 {
    let n = sorted_samples.len();
    let idx = ((p * n as f64) as usize).min(n - 1);
    sorted_samples[idx]
}

/// Exact 2-Wasserstein distance between two equal-length empirical measures
/// via the sorted-sample coupling; unequal lengths fall back to the
/// quantile-grid coupling at [`DEFAULT_N_QUANTILES`] midpoint levels.
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("wasserstein2_1d needs nonempty inputs"));
    }
    let sa = sorted(a);
    let sb = sorted(b);
    if sa.len() == sb.len() {
        let n = sa.len() as f64;
        let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((ss / n).sqrt());
    }
    let m = DEFAULT_N_QUANTILES;
    let mut ss = 0.0;
    for i in 0..m {
        let p = (i as f64 + 0.5) / m as f64;
        let d = empirical_quantile(&sa, p) - empirical_quantile(&sb, p);
        ss += d * d;
    }
    Ok((ss / m as f64).sqrt())
}

/// 2-Wasserstein distance between empirical samples and an analytic target,
/// coupled on `n_quantiles` midpoint levels of both quantile functions.
pub fn wasserstein2_vs_target(
    samples: &[f64],
    target_quantile: &dyn Fn(f64) -> Result<f64>,
    n_quantiles: usize,
) -> Result<f64> {
    if samples.is_empty() || n_quantiles == 0 {
        return Err(Error::invalid("wasserstein2_vs_target needs samples and n_quantiles >= 1"));
    }
    let s = sorted(samples);
    let mut ss = 0.0;
    for i in 0..n_quantiles {
        let p = (i as f64 + 0.5) / n_quantiles as f64;
        let d = empirical_quantile(&s, p) - target_quantile(p)?;
        ss += d * d;
    }
    Ok((ss / n_quantiles as f64).sqrt())
}

/// Quantile function of the benchmark mixture by bisecting its CDF to 1e-10,
/// on a bracket auto-expanded from `[-20, 20]`.
pub fn mixture_quantile(mixture: &GaussianMixture1d, p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::QuantileBracket { level: p });
    }
    let (mut lo, mut hi) = (-20.0f64, 20.0f64);
    let mut tries = 0;
    while mixture.cdf(lo) > p {
        lo *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::QuantileBracket { level: p });
        }
    }
    while mixture.cdf(hi) < p {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::QuantileBracket { level: p });
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mixture.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form Gaussian quantile.
pub fn gaussian_quantile(mean: f64, sd: f64, p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::QuantileBracket { level: p });
    }
    let n = Normal::new(mean, sd).map_err(|e| Error::invalid(format!("gaussian: {e}")))?;
    Ok(n.inverse_cdf(p))
}

/// Whole-run summary of one trace.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunMetrics {
    /// Distance of the retained low-temperature samples to the target; filled
    /// by the experiment layer, absent for bare traces.
    pub w2_to_truth: Option<f64>,
    pub swap_acceptance_rate: f64,
    pub mean_energy_low: f64,
    pub mean_energy_high: Option<f64>,
    pub n_samples: usize,
}

/// Acceptance rate and per-chain mean energies of a trace. Chain 0 is the low
/// (or only) chain.
pub fn swap_summary(trace: &SampleTrace) -> Result<RunMetrics> {
    if trace.rows.is_empty() {
        return Err(Error::invalid("swap_summary needs a nonempty trace"));
    }
    let mean_of = |id: u8| -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for r in trace.rows.iter().filter(|r| r.chain_id == id) {
            sum += r.energy_estimate;
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    };
    let mean_low = mean_of(0).ok_or_else(|| Error::invalid("trace has no chain-0 rows"))?;
    let rate = if trace.swap_attempts == 0 {
        0.0
    } else {
        trace.swap_accepts as f64 / trace.swap_attempts as f64
    };
    Ok(RunMetrics {
        w2_to_truth: None,
        swap_acceptance_rate: rate,
        mean_energy_low: mean_low,
        mean_energy_high: mean_of(1),
        n_samples: trace.rows.iter().filter(|r| r.chain_id == 0).count(),
    })
}
