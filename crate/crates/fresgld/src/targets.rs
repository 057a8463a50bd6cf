//! Energy models and their Gaussian-noise wrappers.
//!
//! An [`EnergyModel`] supplies the exact energy `U` and gradient `∇U`;
//! a [`NoisyEnergyModel`] wraps it with a [`NoiseSpec`] producing the
//! stochastic estimators `Û ~ N(U, σ²(θ))` and `∇Û ~ N(∇U, s(θ)s(θ)ᵀ)`
//! that every stochastic-gradient sampler consumes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A point in parameter space. Entries must be finite and the dimension is
/// fixed for the lifetime of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    coords: Vec<f64>,
}

impl State {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("state dimension must be >= 1"));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("state coordinates must be finite"));
        }
        Ok(State { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Exact energy function `U` with analytic gradient.
///
/// Implementations must keep `gradient` consistent with finite differences of
/// `energy`; the test helpers in this module check that for every concrete
/// model.
pub trait EnergyModel: Send + Sync {
    fn dim(&self) -> usize;
    fn energy(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

/// Two-component 1-d Gaussian mixture, `exp(-U) = w1 N(m1, sd1^2) + w2 N(m2, sd2^2)`.
#[derive(Clone, Debug)]
pub struct GaussianMixture1d {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub sds: [f64; 2],
}

impl GaussianMixture1d {
    /// The benchmark mixture `0.4 N(-4, 0.7^2) + 0.6 N(3, 0.5^2)`.
    pub fn benchmark() -> Self {
        GaussianMixture1d {
            weights: [0.4, 0.6],
            means: [-4.0, 3.0],
            sds: [0.7, 0.5],
        }
    }

    /// Log of the mixture density, computed via log-sum-exp.
    pub fn log_density(&self, x: f64) -> f64 {
        let mut terms = [0.0f64; 2];
        for (i, term) in terms.iter_mut().enumerate() {
            let z = (x - self.means[i]) / self.sds[i];
            *term = self.weights[i].ln()
                - self.sds[i].ln()
                - 0.5 * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * z * z;
        }
        let m = terms[0].max(terms[1]);
        m + ((terms[0] - m).exp() + (terms[1] - m).exp()).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let std = Normal::new(0.0, 1.0).unwrap();
        (0..2)
            .map(|i| self.weights[i] * std.cdf((x - self.means[i]) / self.sds[i]))
            .sum()
    }

    /// Component responsibilities at `x` (softmax of the per-component log terms).
    fn responsibilities(&self, x: f64) -> [f64; 2] {
        let mut lt = [0.0f64; 2];
        for (i, term) in lt.iter_mut().enumerate() {
            let z = (x - self.means[i]) / self.sds[i];
            *term = self.weights[i].ln() - self.sds[i].ln() - 0.5 * z * z;
        }
        let m = lt[0].max(lt[1]);
        let e = [(lt[0] - m).exp(), (lt[1] - m).exp()];
        let s = e[0] + e[1];
        [e[0] / s, e[1] / s]
    }
}

impl EnergyModel for GaussianMixture1d {
    fn dim(&self) -> usize {
        1
    }

    fn energy(&self, theta: &[f64]) -> f64 {
        -self.log_density(theta[0])
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let x = theta[0];
        let r = self.responsibilities(x);
        let g = (0..2)
            .map(|i| r[i] * (x - self.means[i]) / (self.sds[i] * self.sds[i]))
            .sum();
        vec![g]
    }
}

/// `U(θ) = (m/2) ||θ||²`, the m-strongly-convex test target with
/// `π_τ = N(0, (τ/m) I)`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub m: f64,
    pub dim: usize,
}

impl Quadratic {
    pub fn new(m: f64, dim: usize) -> Result<Self> {
        if m <= 0.0 {
            return Err(Error::invalid("quadratic curvature m must be > 0"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        Ok(Quadratic { m, dim })
    }
}

impl EnergyModel for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, theta: &[f64]) -> f64 {
        0.5 * self.m * theta.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|x| self.m * x).collect()
    }
}

/// Numerically stable logistic `e^x / (1 + e^x)`.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A state-dependent (or constant) scalar noise scale.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseScale {
    Zero,
    Constant { value: f64 },
    /// `amplitude * e^x / (1 + e^x)` evaluated at the first coordinate.
    Logistic { amplitude: f64 },
    /// `amplitude * e^U / (1 + e^U)` evaluated at the energy `U(θ)`.
    LogisticOfEnergy { amplitude: f64 },
}

impl NoiseScale {
    pub fn value(&self, theta: &[f64], model: &dyn EnergyModel) -> f64 {
        match self {
            NoiseScale::Zero => 0.0,
            NoiseScale::Constant { value } => *value,
            NoiseScale::Logistic { amplitude } => amplitude * logistic(theta[0]),
            NoiseScale::LogisticOfEnergy { amplitude } => {
                amplitude * logistic(model.energy(theta))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(
            self,
            NoiseScale::Zero | NoiseScale::Constant { value: 0.0 }
        )
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, NoiseScale::Zero | NoiseScale::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match self {
            NoiseScale::Constant { value } => *value < 0.0 || !value.is_finite(),
            NoiseScale::Logistic { amplitude } | NoiseScale::LogisticOfEnergy { amplitude } => {
                *amplitude < 0.0 || !amplitude.is_finite()
            }
            NoiseScale::Zero => false,
        };
        if bad {
            Err(Error::invalid("noise scale must be finite and >= 0"))
        } else {
            Ok(())
        }
    }
}

/// Covariance factor `s(θ)` of the gradient estimator, so the covariance is
/// `s(θ)s(θ)ᵀ`. The scalar form means `s(θ)·I`; the matrix form is a constant
/// full factor. Storing the factor keeps noise sampling a single
/// matrix-vector product.
#[derive(Clone, Debug)]
pub enum GradientNoise {
    Scalar(NoiseScale),
    Matrix(DMatrix<f64>),
}

impl GradientNoise {
    pub fn is_zero(&self) -> bool {
        match self {
            GradientNoise::Scalar(s) => s.is_zero(),
            GradientNoise::Matrix(m) => m.iter().all(|&x| x == 0.0),
        }
    }
}

/// Scalar (isotropic) or full-matrix noise factor at a fixed state.
#[derive(Clone, Debug)]
pub enum NoiseFactor {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl NoiseFactor {
    pub fn zero() -> Self {
        NoiseFactor::Scalar(0.0)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoiseFactor::Scalar(s) => *s == 0.0,
            NoiseFactor::Matrix(m) => m.iter().all(|&x| x == 0.0),
        }
    }
}

/// Noise structure of the estimator pair `(Û, ∇Û)`.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub energy_sd: NoiseScale,
    pub gradient: GradientNoise,
}

impl NoiseSpec {
    pub fn zero() -> Self {
        NoiseSpec {
            energy_sd: NoiseScale::Zero,
            gradient: GradientNoise::Scalar(NoiseScale::Zero),
        }
    }

    /// Constant isotropic noise: `Û ~ N(U, sigma²)`, `∇Û ~ N(∇U, s² I)`.
    pub fn constant(sigma: f64, s: f64) -> Self {
        NoiseSpec {
            energy_sd: NoiseScale::Constant { value: sigma },
            gradient: GradientNoise::Scalar(NoiseScale::Constant { value: s }),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.energy_sd.is_zero() && self.gradient.is_zero()
    }
}

/// An [`EnergyModel`] plus Gaussian estimator noise and a seeded stream.
///
/// Draw order is documented and fixed: each `noisy_gradient` call consumes
/// the gradient-noise variates (component order), each `noisy_energy` call
/// consumes one variate. Zero noise scales consume nothing, so a zero-noise
/// wrapper reproduces the exact model bit-for-bit.
///
/// The wrapper also counts estimator evaluations, which the swap-rate
/// efficiency checks rely on.
pub struct NoisyEnergyModel {
    base: Arc<dyn EnergyModel>,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
    energy_evals: u64,
    gradient_evals: u64,
}

impl NoisyEnergyModel {
    pub fn new(base: Arc<dyn EnergyModel>, noise: NoiseSpec, rng: ChaCha8Rng) -> Self {
        NoisyEnergyModel {
            base,
            noise,
            rng,
            energy_evals: 0,
            gradient_evals: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &dyn EnergyModel {
        &*self.base
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn energy_evals(&self) -> u64 {
        self.energy_evals
    }

    pub fn gradient_evals(&self) -> u64 {
        self.gradient_evals
    }

    pub fn reset_counters(&mut self) {
        self.energy_evals = 0;
        self.gradient_evals = 0;
    }

    /// `Û(θ) = U(θ) + σ(θ)·Z`, drawn from the model's own stream.
    pub fn noisy_energy(&mut self, theta: &[f64]) -> f64 {
        let (base, noise, rng) = (&self.base, &self.noise, &mut self.rng);
        self.energy_evals += 1;
        noisy_energy_impl(&**base, noise, theta, rng)
    }

    /// Same estimator, but drawing from an external (probe) stream.
    pub fn noisy_energy_with(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        self.energy_evals += 1;
        noisy_energy_impl(&*self.base, &self.noise, theta, rng)
    }

    /// `∇Û(θ) = ∇U(θ) + s(θ)·ζ`, `ζ ~ N(0, I_p)`, from the model's own stream.
    pub fn noisy_gradient(&mut self, theta: &[f64]) -> Vec<f64> {
        let (base, noise, rng) = (&self.base, &self.noise, &mut self.rng);
        self.gradient_evals += 1;
        noisy_gradient_impl(&**base, noise, theta, rng)
    }

    /// Same estimator, but drawing from an external (probe) stream.
    pub fn noisy_gradient_with(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.gradient_evals += 1;
        noisy_gradient_impl(&*self.base, &self.noise, theta, rng)
    }

    /// True energy-noise variance `σ²(θ)` of this wrapper.
    pub fn true_energy_variance(&self, theta: &[f64]) -> f64 {
        let sd = self.noise.energy_sd.value(theta, &*self.base);
        sd * sd
    }

    /// True gradient-noise factor `s(θ)` of this wrapper.
    pub fn true_gradient_factor(&self, theta: &[f64]) -> NoiseFactor {
        match &self.noise.gradient {
            GradientNoise::Scalar(s) => NoiseFactor::Scalar(s.value(theta, &*self.base)),
            GradientNoise::Matrix(m) => NoiseFactor::Matrix(m.clone()),
        }
    }
}

fn noisy_energy_impl(
    base: &dyn EnergyModel,
    noise: &NoiseSpec,
    theta: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let u = base.energy(theta);
    if noise.energy_sd.is_zero() {
        return u;
    }
    let sd = noise.energy_sd.value(theta, base);
    let z: f64 = rng.sample(StandardNormal);
    u + sd * z
}

fn noisy_gradient_impl(
    base: &dyn EnergyModel,
    noise: &NoiseSpec,
    theta: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut g = base.gradient(theta);
    match &noise.gradient {
        GradientNoise::Scalar(s) => {
            if !s.is_zero() {
                let sd = s.value(theta, base);
                for gi in g.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *gi += sd * z;
                }
            }
        }
        GradientNoise::Matrix(m) => {
            let zeta = DVector::from_fn(g.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let kick = m * zeta;
            for (gi, ki) in g.iter_mut().zip(kick.iter()) {
                *gi += ki;
            }
        }
    }
    g
}

/// Central finite difference of `model.energy`, used as the gradient oracle.
pub fn finite_difference_gradient(model: &dyn EnergyModel, theta: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    let mut t = theta.to_vec();
    for i in 0..theta.len() {
        t[i] = theta[i] + h;
        let up = model.energy(&t);
        t[i] = theta[i] - h;
        let dn = model.energy(&t);
        t[i] = theta[i];
        g[i] = (up - dn) / (2.0 * h);
    }
    g
}
