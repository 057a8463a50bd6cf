//! Estimators for the noise scales `ŝ²(θ)` and `σ̂²(θ)` that the
//! bias-corrected sampler credits against its injected noise.
//!
//! Two schemes: a running-average constant estimate
//! `ŝ²_k = (1 - 1/k)ŝ²_{k-1} + (1/k)·observed` (whose closed form is the
//! arithmetic mean of the observations), and a nonparametric kernel ridge
//! regression fitted to per-state sample variances collected from the
//! high-temperature chain.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::{NoiseFactor, NoisyEnergyModel};

/// Unbiased sample variance (denominator n-1).
pub fn unbiased_variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::invalid("sample variance needs at least 2 draws"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Ok(xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Per-state sample variance of the gradient estimator: `n_draws` independent
/// `∇Û(θ)` evaluations, componentwise unbiased variance, averaged over
/// components. Draws come from the supplied probe stream.
pub fn sample_gradient_variance(
    model: &mut NoisyEnergyModel,
    theta: &[f64],
    n_draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if n_draws < 2 {
        return Err(Error::invalid("n_draws must be >= 2"));
    }
    let p = theta.len();
    let draws: Vec<Vec<f64>> = (0..n_draws)
        .map(|_| model.noisy_gradient_with(theta, rng))
        .collect();
    let mut total = 0.0;
    for i in 0..p {
        let comp: Vec<f64> = draws.iter().map(|g| g[i]).collect();
        total += unbiased_variance(&comp)?;
    }
    Ok(total / p as f64)
}

/// Per-state sample variance of the energy estimator.
pub fn sample_energy_variance(
    model: &mut NoisyEnergyModel,
    theta: &[f64],
    n_draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if n_draws < 2 {
        return Err(Error::invalid("n_draws must be >= 2"));
    }
    let draws: Vec<f64> = (0..n_draws)
        .map(|_| model.noisy_energy_with(theta, rng))
        .collect();
    unbiased_variance(&draws)
}

/// Running-average constant variance estimate. After k updates the estimate
/// equals the mean of the k observations.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunningVariance {
    estimate: f64,
    count: u64,
}

impl RunningVariance {
    pub fn new() -> Self {
        RunningVariance::default()
    }

    pub fn observe(&mut self, value: f64) {
        self.count += 1;
        let k = self.count as f64;
        self.estimate = (1.0 - 1.0 / k) * self.estimate + value / k;
    }

    pub fn estimate(&self) -> f64 {
        if self.estimate < 0.0 {
            log::warn!("negative running variance estimate {} clamped to 0", self.estimate);
            0.0
        } else {
            self.estimate
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Fitted kernel ridge regression with Gaussian RBF kernel
/// `k(x, x') = exp(-||x - x'||² / (2 b²))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KrrModel {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub bandwidth: f64,
    pub ridge: f64,
    pub weights: Vec<f64>,
}

fn rbf(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * bandwidth * bandwidth)).exp()
}

/// Solve `(K + λI) w = y`. The system is symmetric positive definite for any
/// `λ > 0`, so duplicate inputs are fine.
pub fn krr_fit(
    inputs: &[Vec<f64>],
    targets: &[f64],
    bandwidth: f64,
    ridge: f64,
) -> Result<KrrModel> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::invalid("krr_fit needs >= 1 training pair with matching lengths"));
    }
    if !(bandwidth > 0.0) || !(ridge > 0.0) {
        return Err(Error::invalid("krr_fit needs bandwidth > 0 and ridge > 0"));
    }
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rbf(&inputs[i], &inputs[j], bandwidth);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += ridge;
    }
    let y = DVector::from_column_slice(targets);
    let chol = k
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("kernel system not positive definite"))?;
    let w = chol.solve(&y);
    Ok(KrrModel {
        inputs: inputs.to_vec(),
        targets: targets.to_vec(),
        bandwidth,
        ridge,
        weights: w.iter().copied().collect(),
    })
}

impl KrrModel {
    /// Prediction `max(0, Σᵢ wᵢ k(θ, xᵢ))`; variance predictions are clamped
    /// at zero.
    pub fn predict(&self, theta: &[f64]) -> f64 {
        let raw = self.predict_raw(theta);
        if raw < 0.0 {
            log::warn!("negative KRR variance prediction {raw} clamped to 0");
            0.0
        } else {
            raw
        }
    }

    pub fn predict_raw(&self, theta: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * rbf(theta, x, self.bandwidth))
            .sum()
    }

    /// Residual `||(K + λI)w - y||` of the fitted system.
    pub fn residual_norm(&self) -> f64 {
        let n = self.inputs.len();
        let mut r = 0.0;
        for i in 0..n {
            let mut acc = self.ridge * self.weights[i];
            for j in 0..n {
                acc += rbf(&self.inputs[i], &self.inputs[j], self.bandwidth) * self.weights[j];
            }
            r += (acc - self.targets[i]).powi(2);
        }
        r.sqrt()
    }

    /// Serialize to a structured text file for experiment reproducibility.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Median pairwise distance of the training inputs; the default bandwidth.
pub fn median_heuristic_bandwidth(inputs: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            let d2: f64 = inputs[i]
                .iter()
                .zip(&inputs[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    dists.retain(|d| *d > 0.0);
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dists[dists.len() / 2]
}

/// KRR hyperparameters and training-set size for the nonparametric scheme.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KrrSettings {
    /// Number of high-temperature states collected before fitting.
    pub n_train: usize,
    /// RBF bandwidth; `None` selects the median heuristic at fit time.
    pub bandwidth: Option<f64>,
    pub ridge: f64,
}

impl Default for KrrSettings {
    fn default() -> Self {
        KrrSettings {
            n_train: 100,
            bandwidth: None,
            ridge: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainId {
    Low,
    High,
}

/// Gradient- and energy-variance estimates for one chain.
#[derive(Clone, Debug, Default)]
pub struct ChainEstimates {
    pub grad: RunningVariance,
    pub energy: RunningVariance,
}

/// Variance source for a replica pair.
///
/// `Known` passes the wrapper's true `s(θ)`, `σ²(θ)` through (synthetic
/// experiments). `Running` keeps one running-constant estimator per chain.
/// `Krr` collects the first `n_train` high-temperature states with their
/// sample variances, fits one KRR per noise channel, and serves both chains
/// from the fitted curves; until fitted it falls back to the running mean of
/// the collected observations.
// One long-lived value per sampler, so the Krr variant's size is harmless.
#[allow(clippy::large_enum_variant)]
pub enum PairVariance {
    Known,
    Running {
        low: ChainEstimates,
        high: ChainEstimates,
    },
    Krr {
        settings: KrrSettings,
        train_states: Vec<Vec<f64>>,
        train_grad: Vec<f64>,
        train_energy: Vec<f64>,
        grad_model: Option<KrrModel>,
        energy_model: Option<KrrModel>,
        fallback: ChainEstimates,
    },
}

impl PairVariance {
    pub fn known() -> Self {
        PairVariance::Known
    }

    pub fn running() -> Self {
        PairVariance::Running {
            low: ChainEstimates::default(),
            high: ChainEstimates::default(),
        }
    }

    pub fn krr(settings: KrrSettings) -> Self {
        PairVariance::Krr {
            settings,
            train_states: Vec::new(),
            train_grad: Vec::new(),
            train_energy: Vec::new(),
            grad_model: None,
            energy_model: None,
            fallback: ChainEstimates::default(),
        }
    }

    /// Whether the driver must collect per-state sample variances each step.
    pub fn needs_probe(&self) -> bool {
        !matches!(self, PairVariance::Known)
    }

    /// Feed one per-state observation pair (gradient variance, energy
    /// variance) from the given chain.
    pub fn observe(&mut self, chain: ChainId, theta: &[f64], grad_var: f64, energy_var: f64) {
        match self {
            PairVariance::Known => {}
            PairVariance::Running { low, high } => {
                let est = match chain {
                    ChainId::Low => low,
                    ChainId::High => high,
                };
                est.grad.observe(grad_var);
                est.energy.observe(energy_var);
            }
            PairVariance::Krr {
                settings,
                train_states,
                train_grad,
                train_energy,
                grad_model,
                energy_model,
                fallback,
            } => {
                // Training data comes from the high-temperature chain only.
                if chain != ChainId::High || grad_model.is_some() {
                    return;
                }
                train_states.push(theta.to_vec());
                train_grad.push(grad_var);
                train_energy.push(energy_var);
                fallback.grad.observe(grad_var);
                fallback.energy.observe(energy_var);
                if train_states.len() >= settings.n_train {
                    let bw = settings
                        .bandwidth
                        .unwrap_or_else(|| median_heuristic_bandwidth(train_states));
                    match (
                        krr_fit(train_states, train_grad, bw, settings.ridge),
                        krr_fit(train_states, train_energy, bw, settings.ridge),
                    ) {
                        (Ok(g), Ok(e)) => {
                            *grad_model = Some(g);
                            *energy_model = Some(e);
                        }
                        _ => log::warn!("KRR variance fit failed; keeping running fallback"),
                    }
                }
            }
        }
    }

    /// Estimated gradient-noise factor `ŝ(θ)` for the given chain.
    pub fn gradient_factor(
        &self,
        chain: ChainId,
        model: &NoisyEnergyModel,
        theta: &[f64],
    ) -> NoiseFactor {
        match self {
            PairVariance::Known => model.true_gradient_factor(theta),
            PairVariance::Running { low, high } => {
                let est = match chain {
                    ChainId::Low => low,
                    ChainId::High => high,
                };
                NoiseFactor::Scalar(est.grad.estimate().sqrt())
            }
            PairVariance::Krr {
                grad_model,
                fallback,
                ..
            } => match grad_model {
                Some(m) => NoiseFactor::Scalar(m.predict(theta).sqrt()),
                None => NoiseFactor::Scalar(fallback.grad.estimate().sqrt()),
            },
        }
    }

    /// Estimated energy variance `σ̂²(θ)` for the given chain.
    pub fn energy_variance(&self, chain: ChainId, model: &NoisyEnergyModel, theta: &[f64]) -> f64 {
        match self {
            PairVariance::Known => model.true_energy_variance(theta),
            PairVariance::Running { low, high } => {
                let est = match chain {
                    ChainId::Low => low,
                    ChainId::High => high,
                };
                est.energy.estimate()
            }
            PairVariance::Krr {
                energy_model,
                fallback,
                ..
            } => match energy_model {
                Some(m) => m.predict(theta),
                None => fallback.energy.estimate(),
            },
        }
    }

    pub fn krr_models(&self) -> Option<(&KrrModel, &KrrModel)> {
        match self {
            PairVariance::Krr {
                grad_model: Some(g),
                energy_model: Some(e),
                ..
            } => Some((g, e)),
            _ => None,
        }
    }
}
