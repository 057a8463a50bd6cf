//! Two-chain replica-exchange driver.
//!
//! A low- and a high-temperature chain advance in lockstep within one thread
//! of control; each step ends with one swap attempt using post-update
//! positions. Positions are exchanged, not temperatures, so chain identity
//! stays tied to temperature identity throughout a trace.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    f_sgld_step, ld_step, sgld_step, swap_probability, swap_rate_exact, swap_rate_fresgld,
    swap_rate_mresgld, swap_rate_resgld, ChainState, StepSchedule,
};
use crate::error::{Error, Result};
use crate::targets::NoisyEnergyModel;
use crate::variance::{sample_energy_variance, sample_gradient_variance, ChainId, PairVariance};

/// Which replica-exchange variant drives the two chains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Exact gradients and energies on both chains.
    ReLd,
    /// Noisy updates; equal-variance swap correction using the low chain's
    /// energy variance.
    Resgld,
    /// Noisy updates; weighted swap rule evaluating both estimators at both
    /// states (four energy evaluations per attempt).
    MResgld,
    /// Bias-corrected updates; one energy evaluation per chain per attempt.
    FResgld,
}

/// Single-chain baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleChainKind {
    Ld,
    Sgld,
}

/// Swap-attempt parameters: intensity `a` and the m-reSGLD weights
/// `(a₁, a₂)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SwapConfig {
    pub intensity: f64,
    pub weights: (f64, f64),
}

impl Default for SwapConfig {
    fn default() -> Self {
        SwapConfig {
            intensity: 1.0,
            weights: (0.5, 0.5),
        }
    }
}

impl SwapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0) || !self.intensity.is_finite() {
            return Err(Error::config("swap intensity a must be finite and > 0"));
        }
        let (a1, a2) = self.weights;
        if a1 < 0.0 || a2 < 0.0 || (a1 + a2 - 1.0).abs() > 1e-12 {
            return Err(Error::config("swap weights must be nonnegative with a1 + a2 = 1"));
        }
        Ok(())
    }
}

/// Driver knobs that are orthogonal to the sampler kind.
#[derive(Clone, Copy, Debug)]
pub struct ReplicaOptions {
    pub swap: SwapConfig,
    /// Clamp the inadmissible part of the injected noise instead of failing
    /// with a step-size error.
    pub clamp_noise: bool,
    /// Reflect both chains into `[lo, hi]^p` after every update.
    pub reflect_box: Option<(f64, f64)>,
    /// Estimator draws per chain per step when the variance source needs
    /// per-state sample variances.
    pub probe_draws: usize,
}

impl Default for ReplicaOptions {
    fn default() -> Self {
        ReplicaOptions {
            swap: SwapConfig::default(),
            clamp_noise: false,
            reflect_box: None,
            probe_draws: 10,
        }
    }
}

/// Which rows of a run are kept in the trace. Swap statistics always cover
/// the full run.
#[derive(Clone, Copy, Debug)]
pub struct RecordOptions {
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in step; must be >= 1.
    pub thin: usize,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions { burn_in: 0, thin: 1 }
    }
}

impl RecordOptions {
    fn keeps(&self, step: usize) -> bool {
        step >= self.burn_in && (step - self.burn_in).is_multiple_of(self.thin.max(1))
    }
}

/// One recorded chain state.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub chain_id: u8,
    pub temperature: f64,
    pub theta: Vec<f64>,
    pub energy_estimate: f64,
    pub swapped: bool,
    pub eta: f64,
}

/// Recorded run of one or two chains plus whole-run swap statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleTrace {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
    pub swap_attempts: u64,
    pub swap_accepts: u64,
}

impl SampleTrace {
    /// First coordinate of every recorded state of one chain, in step order.
    pub fn chain_first_coordinate(&self, chain_id: u8) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.chain_id == chain_id)
            .map(|r| r.theta[0])
            .collect()
    }

    pub fn chain_positions(&self, chain_id: u8) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter(|r| r.chain_id == chain_id)
            .map(|r| r.theta.clone())
            .collect()
    }

    pub fn csv_header(dim: usize) -> String {
        let mut h = String::from("step,chain_id,temperature");
        for i in 0..dim {
            h.push_str(&format!(",theta_{i}"));
        }
        h.push_str(",energy_estimate,swapped,eta");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.dim);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.step, r.chain_id, r.temperature));
            for x in &r.theta {
                out.push_str(&format!(",{x}"));
            }
            out.push_str(&format!(
                ",{},{},{}\n",
                r.energy_estimate,
                u8::from(r.swapped),
                r.eta
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Result of one lockstep step: post-swap energies and whether the attempt
/// exchanged the positions.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub u_low: f64,
    pub u_high: f64,
    pub swapped: bool,
}

/// A replica pair with its estimators, variance source and named streams.
pub struct ReplicaSampler {
    kind: SamplerKind,
    low: ChainState,
    high: ChainState,
    model_low: NoisyEnergyModel,
    model_high: NoisyEnergyModel,
    variance: PairVariance,
    options: ReplicaOptions,
    swap_rng: ChaCha8Rng,
    probe_rng: ChaCha8Rng,
    swap_attempts: u64,
    swap_accepts: u64,
    swap_energy_evals: u64,
}

impl ReplicaSampler {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: SamplerKind,
        low: ChainState,
        high: ChainState,
        model_low: NoisyEnergyModel,
        model_high: NoisyEnergyModel,
        variance: PairVariance,
        options: ReplicaOptions,
        swap_rng: ChaCha8Rng,
        probe_rng: ChaCha8Rng,
    ) -> Result<Self> {
        if !(high.temperature > low.temperature) {
            return Err(Error::invalid("replica pair requires tau_high > tau_low > 0"));
        }
        if low.position.len() != high.position.len() {
            return Err(Error::invalid("replica chains must share a dimension"));
        }
        if low.position.len() != model_low.dim() || high.position.len() != model_high.dim() {
            return Err(Error::invalid("chain and model dimensions must agree"));
        }
        options.swap.validate()?;
        if options.probe_draws < 2 && variance.needs_probe() {
            return Err(Error::invalid("probe_draws must be >= 2 for estimated variances"));
        }
        Ok(ReplicaSampler {
            kind,
            low,
            high,
            model_low,
            model_high,
            variance,
            options,
            swap_rng,
            probe_rng,
            swap_attempts: 0,
            swap_accepts: 0,
            swap_energy_evals: 0,
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn low(&self) -> &ChainState {
        &self.low
    }

    pub fn high(&self) -> &ChainState {
        &self.high
    }

    pub fn swap_attempts(&self) -> u64 {
        self.swap_attempts
    }

    pub fn swap_accepts(&self) -> u64 {
        self.swap_accepts
    }

    /// Energy-estimator evaluations spent on swap attempts (not on updates or
    /// variance probes).
    pub fn swap_energy_evals(&self) -> u64 {
        self.swap_energy_evals
    }

    pub fn variance(&self) -> &PairVariance {
        &self.variance
    }

    /// One lockstep step: update low, update high, reflect, feed the variance
    /// source, then attempt one swap with the post-update positions. The swap
    /// coin is drawn every step so coupled runs stay aligned.
    pub fn step(&mut self, eta: f64) -> Result<StepOutcome> {
        update_chain(
            self.kind,
            &mut self.low,
            &mut self.model_low,
            &self.variance,
            ChainId::Low,
            eta,
            self.options.clamp_noise,
        )?;
        update_chain(
            self.kind,
            &mut self.high,
            &mut self.model_high,
            &self.variance,
            ChainId::High,
            eta,
            self.options.clamp_noise,
        )?;
        if let Some((lo, hi)) = self.options.reflect_box {
            reflect_into(&mut self.low.position, lo, hi);
            reflect_into(&mut self.high.position, lo, hi);
        }
        if self.variance.needs_probe() {
            let n = self.options.probe_draws;
            let gv = sample_gradient_variance(&mut self.model_low, &self.low.position, n, &mut self.probe_rng)?;
            let ev = sample_energy_variance(&mut self.model_low, &self.low.position, n, &mut self.probe_rng)?;
            self.variance.observe(ChainId::Low, &self.low.position, gv, ev);
            let gv = sample_gradient_variance(&mut self.model_high, &self.high.position, n, &mut self.probe_rng)?;
            let ev = sample_energy_variance(&mut self.model_high, &self.high.position, n, &mut self.probe_rng)?;
            self.variance.observe(ChainId::High, &self.high.position, gv, ev);
        }

        let (tau1, tau2) = (self.low.temperature, self.high.temperature);
        let (mut u_low, mut u_high, rate) = match self.kind {
            SamplerKind::ReLd => {
                let u1 = self.model_low.base().energy(&self.low.position);
                let u2 = self.model_high.base().energy(&self.high.position);
                (u1, u2, swap_rate_exact(u1, u2, tau1, tau2))
            }
            SamplerKind::Resgld => {
                let u1 = self.model_low.noisy_energy(&self.low.position);
                let u2 = self.model_high.noisy_energy(&self.high.position);
                self.swap_energy_evals += 2;
                // Equal-variance rule: the correction uses the low chain's
                // energy variance at its own state.
                let sigma2 =
                    self.variance
                        .energy_variance(ChainId::Low, &self.model_low, &self.low.position);
                (u1, u2, swap_rate_resgld(u1, u2, sigma2, tau1, tau2))
            }
            SamplerKind::MResgld => {
                // Fixed evaluation order: estimator 1 at both states, then
                // estimator 2 at both states.
                let u1_at_1 = self.model_low.noisy_energy(&self.low.position);
                let u1_at_2 = self.model_low.noisy_energy(&self.high.position);
                let u2_at_1 = self.model_high.noisy_energy(&self.low.position);
                let u2_at_2 = self.model_high.noisy_energy(&self.high.position);
                self.swap_energy_evals += 4;
                let s1 =
                    self.variance
                        .energy_variance(ChainId::Low, &self.model_low, &self.low.position);
                let s2 = self.variance.energy_variance(
                    ChainId::High,
                    &self.model_high,
                    &self.high.position,
                );
                let (a1, a2) = self.options.swap.weights;
                let rate = swap_rate_mresgld(
                    u1_at_1, u1_at_2, u2_at_1, u2_at_2, s1, s2, a1, a2, tau1, tau2,
                );
                (u1_at_1, u2_at_2, rate)
            }
            SamplerKind::FResgld => {
                let u1 = self.model_low.noisy_energy(&self.low.position);
                let u2 = self.model_high.noisy_energy(&self.high.position);
                self.swap_energy_evals += 2;
                let s1 =
                    self.variance
                        .energy_variance(ChainId::Low, &self.model_low, &self.low.position);
                let s2 = self.variance.energy_variance(
                    ChainId::High,
                    &self.model_high,
                    &self.high.position,
                );
                (u1, u2, swap_rate_fresgld(u1, u2, s1, s2, tau1, tau2))
            }
        };

        let p = swap_probability(self.options.swap.intensity, eta, rate);
        self.swap_attempts += 1;
        let coin: f64 = self.swap_rng.random();
        let swapped = coin < p;
        if swapped {
            std::mem::swap(&mut self.low.position, &mut self.high.position);
            // Energies travel with the positions they were evaluated at.
            std::mem::swap(&mut u_low, &mut u_high);
            self.swap_accepts += 1;
        }
        Ok(StepOutcome {
            u_low,
            u_high,
            swapped,
        })
    }

    /// Run `n_steps` lockstep steps, recording post-swap states of both
    /// chains per the record options.
    pub fn run(
        &mut self,
        schedule: &StepSchedule,
        n_steps: usize,
        record: RecordOptions,
    ) -> Result<SampleTrace> {
        schedule.validate()?;
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be >= 1"));
        }
        let dim = self.low.position.len();
        let mut trace = SampleTrace {
            dim,
            ..SampleTrace::default()
        };
        for k in 0..n_steps {
            let eta = schedule.value(k);
            let out = self.step(eta).map_err(|e| {
                log::error!("replica step {k} failed: {e}");
                e
            })?;
            if record.keeps(k) {
                trace.rows.push(TraceRow {
                    step: k as u64,
                    chain_id: 0,
                    temperature: self.low.temperature,
                    theta: self.low.position.clone(),
                    energy_estimate: out.u_low,
                    swapped: out.swapped,
                    eta,
                });
                trace.rows.push(TraceRow {
                    step: k as u64,
                    chain_id: 1,
                    temperature: self.high.temperature,
                    theta: self.high.position.clone(),
                    energy_estimate: out.u_high,
                    swapped: out.swapped,
                    eta,
                });
            }
        }
        trace.swap_attempts = self.swap_attempts;
        trace.swap_accepts = self.swap_accepts;
        Ok(trace)
    }
}

fn update_chain(
    kind: SamplerKind,
    chain: &mut ChainState,
    model: &mut NoisyEnergyModel,
    variance: &PairVariance,
    id: ChainId,
    eta: f64,
    clamp_noise: bool,
) -> Result<()> {
    match kind {
        SamplerKind::ReLd => ld_step(chain, model.base(), eta),
        SamplerKind::Resgld | SamplerKind::MResgld => sgld_step(chain, model, eta),
        SamplerKind::FResgld => {
            let s_hat = variance.gradient_factor(id, model, &chain.position);
            f_sgld_step(chain, model, &s_hat, eta, clamp_noise)
        }
    }
}

/// Reflect every coordinate into `[lo, hi]` by folding at the boundaries.
pub fn reflect_into(position: &mut [f64], lo: f64, hi: f64) {
    let width = hi - lo;
    debug_assert!(width > 0.0);
    for x in position.iter_mut() {
        let mut t = (*x - lo).rem_euclid(2.0 * width);
        if t > width {
            t = 2.0 * width - t;
        }
        *x = lo + t;
    }
}

/// Convenience wrapper over [`ReplicaSampler::run`].
pub fn run_replica_exchange(
    sampler: &mut ReplicaSampler,
    schedule: &StepSchedule,
    n_steps: usize,
    record: RecordOptions,
) -> Result<SampleTrace> {
    sampler.run(schedule, n_steps, record)
}

/// Run one chain with the LD or SGLD kernel; rows carry chain_id 0 and the
/// exact energy at the recorded state.
pub fn run_single_chain(
    kind: SingleChainKind,
    chain: &mut ChainState,
    model: &mut NoisyEnergyModel,
    schedule: &StepSchedule,
    n_steps: usize,
    record: RecordOptions,
) -> Result<SampleTrace> {
    schedule.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1"));
    }
    let dim = chain.position.len();
    let mut trace = SampleTrace {
        dim,
        ..SampleTrace::default()
    };
    for k in 0..n_steps {
        let eta = schedule.value(k);
        match kind {
            SingleChainKind::Ld => ld_step(chain, model.base(), eta)?,
            SingleChainKind::Sgld => sgld_step(chain, model, eta)?,
        }
        if record.keeps(k) {
            trace.rows.push(TraceRow {
                step: k as u64,
                chain_id: 0,
                temperature: chain.temperature,
                theta: chain.position.clone(),
                energy_estimate: model.base().energy(&chain.position),
                swapped: false,
                eta,
            });
        }
    }
    Ok(trace)
}
