//! Inverse heat-source benchmark.
//!
//! A Gaussian heat bump `u(x,t) = β·exp(-‖x-x0‖²/α)·e^{-t}` is observed by a
//! single sensor at terminal time; the inverse problem recovers the bump
//! center `x0` from that one scalar reading. Because the reading depends on
//! `x0` only through its distance to the sensor, the posterior's minimum is a
//! full circle of centers, which makes the benchmark a clean multimodal
//! (continuum of modes) target for the replica samplers.
//!
//! The forward model is the closed form itself; no numerical solver is
//! involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::SamplerKind;
use crate::targets::{EnergyModel, NoiseSpec};

/// Geometry of the heat bump and the sensor.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct HeatModelParams {
    /// Bump width parameter; amplitude and decay are recomputed from it.
    pub h: f64,
    /// Terminal observation time.
    pub t_final: f64,
    pub sensor: [f64; 2],
    /// Data-generating bump center.
    pub x0_true: [f64; 2],
}

impl Default for HeatModelParams {
    fn default() -> Self {
        HeatModelParams {
            h: 0.1,
            t_final: 0.03,
            sensor: [0.3, 0.5],
            x0_true: [0.5, 0.5],
        }
    }
}

impl HeatModelParams {
    /// Amplitude `β = 1/(2πh²)`.
    pub fn beta(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.h * self.h)
    }

    /// Width `α = 2h²`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.h * self.h
    }

    /// Radius of the circle of centers consistent with the noiseless reading.
    pub fn r_star(&self) -> f64 {
        dist(&self.x0_true, &self.sensor)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::config("heat model needs h > 0 and t_final >= 0"));
        }
        for p in [&self.sensor, &self.x0_true] {
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::config("sensor and x0_true must lie in the unit square"));
            }
        }
        Ok(())
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `u(x, t) = β·exp(-‖x - x0‖²/α)·e^{-t}` for a bump centered at `x0`.
pub fn forward_solution(params: &HeatModelParams, x0: &[f64; 2], x: &[f64; 2], t: f64) -> f64 {
    let d2 = (x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2);
    params.beta() * (-d2 / params.alpha()).exp() * (-t).exp()
}

/// Posterior over the bump center given the single sensor reading: Gaussian
/// misfit `(F(x0) - y)²/(2σ_obs²)`. Rotation of `x0` about the sensor leaves
/// the energy invariant, so the level sets are circles.
#[derive(Clone, Debug)]
pub struct PdePosterior {
    pub params: HeatModelParams,
    pub observation: f64,
    pub obs_noise_sd: f64,
}

impl PdePosterior {
    /// Observation generated noiselessly from `params.x0_true`, making the
    /// minimum-energy circle exact.
    pub fn from_true_center(params: HeatModelParams, obs_noise_sd: f64) -> Result<Self> {
        params.validate()?;
        if !(obs_noise_sd > 0.0) {
            return Err(Error::config("obs_noise_sd must be > 0"));
        }
        let observation =
            forward_solution(&params, &params.x0_true, &params.sensor, params.t_final);
        Ok(PdePosterior {
            params,
            observation,
            obs_noise_sd,
        })
    }

    /// Sensor prediction for a candidate center.
    pub fn predict(&self, x0: &[f64; 2]) -> f64 {
        forward_solution(&self.params, x0, &self.params.sensor, self.params.t_final)
    }
}

impl EnergyModel for PdePosterior {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, theta: &[f64]) -> f64 {
        let x0 = [theta[0], theta[1]];
        let r = self.predict(&x0) - self.observation;
        r * r / (2.0 * self.obs_noise_sd * self.obs_noise_sd)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let x0 = [theta[0], theta[1]];
        let f = self.predict(&x0);
        let r = f - self.observation;
        // dF/dx0 = F * 2(x_s - x0)/alpha.
        let scale = r / (self.obs_noise_sd * self.obs_noise_sd) * f * 2.0 / self.params.alpha();
        vec![
            scale * (self.params.sensor[0] - x0[0]),
            scale * (self.params.sensor[1] - x0[1]),
        ]
    }
}

/// The three experimental arms: a small-noise baseline, the bias-corrected
/// sampler under large noise, and the uncorrected baseline under the same
/// large noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeArm {
    SmallNoise,
    Corrected,
    Large,
}

/// Noise, temperatures and sampler variant for one arm.
#[derive(Clone, Debug)]
pub struct PdeArmConfig {
    pub arm: PdeArm,
    pub noise: NoiseSpec,
    pub tau_low: f64,
    pub tau_high: f64,
    pub sampler_kind: SamplerKind,
}

/// Arm presets: small-noise runs the uncorrected sampler at `(σ, s) =
/// (0.1, 0.1)`; the other two arms share `(σ, s) = (0.8, 2)` and differ only
/// in whether the updates and swap rule credit the noise.
pub fn make_pde_arm(arm: PdeArm) -> PdeArmConfig {
    let (sigma, s, kind) = match arm {
        PdeArm::SmallNoise => (0.1, 0.1, SamplerKind::Resgld),
        PdeArm::Corrected => (0.8, 2.0, SamplerKind::FResgld),
        PdeArm::Large => (0.8, 2.0, SamplerKind::Resgld),
    };
    PdeArmConfig {
        arm,
        noise: NoiseSpec::constant(sigma, s),
        tau_low: 0.08,
        tau_high: 0.5,
        sampler_kind: kind,
    }
}

/// How well a sample cloud captures the circle of consistent centers.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IqoiMetrics {
    pub n_samples: usize,
    /// Fraction of samples within ±0.05 of the circle radius.
    pub annulus_coverage: f64,
    /// Occupied 10-degree bins among 36 around the sensor, counting only
    /// in-annulus samples.
    pub angular_bins_occupied: usize,
    pub r_star: f64,
}

/// Annulus half-width around the consistent-center radius.
pub const ANNULUS_TOL: f64 = 0.05;
/// Number of angular bins around the sensor.
pub const N_ANGLE_BINS: usize = 36;

pub fn iqoi_metrics(samples: &[Vec<f64>], params: &HeatModelParams) -> Result<IqoiMetrics> {
    if samples.is_empty() {
        return Err(Error::invalid("iqoi_metrics needs at least one sample"));
    }
    let r_star = params.r_star();
    let mut in_annulus = 0usize;
    let mut bins = [false; N_ANGLE_BINS];
    for s in samples {
        let dx = s[0] - params.sensor[0];
        let dy = s[1] - params.sensor[1];
        let r = (dx * dx + dy * dy).sqrt();
        if (r - r_star).abs() <= ANNULUS_TOL {
            in_annulus += 1;
            let angle = dy.atan2(dx).rem_euclid(2.0 * std::f64::consts::PI);
            let bin = ((angle / (2.0 * std::f64::consts::PI) * N_ANGLE_BINS as f64) as usize)
                .min(N_ANGLE_BINS - 1);
            bins[bin] = true;
        }
    }
    Ok(IqoiMetrics {
        n_samples: samples.len(),
        annulus_coverage: in_annulus as f64 / samples.len() as f64,
        angular_bins_occupied: bins.iter().filter(|b| **b).count(),
        r_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::derive_rng;
    use crate::targets::finite_difference_gradient;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn amplitude_and_peak() {
        let p = HeatModelParams::default();
        assert_relative_eq!(p.beta(), 15.915494309189535, max_relative = 1e-12);
        assert_relative_eq!(p.alpha(), 0.02, max_relative = 1e-12);
        let x0 = [0.4, 0.6];
        assert_relative_eq!(
            forward_solution(&p, &x0, &x0, 0.0),
            p.beta(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn forward_value_at_sensor() {
        // x0 = (0.5, 0.5), sensor (0.3, 0.5), t = 0.03: distance^2 = 0.04,
        // value = beta e^{-2} e^{-0.03}.
        let p = HeatModelParams::default();
        let v = forward_solution(&p, &[0.5, 0.5], &[0.3, 0.5], 0.03);
        let expected = p.beta() * (-2.0f64).exp() * (-0.03f64).exp();
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert_relative_eq!(v, 2.0902697394332836, max_relative = 1e-10);
    }

    #[test]
    fn exponential_time_decay() {
        let p = HeatModelParams::default();
        let x0 = [0.7, 0.2];
        let x = [0.4, 0.9];
        for t in [0.0, 0.01, 0.03, 1.0] {
            assert_eq!(
                forward_solution(&p, &x0, &x, t),
                forward_solution(&p, &x0, &x, 0.0) * (-t).exp()
            );
        }
    }

    #[test]
    fn radial_symmetry_of_forward() {
        let p = HeatModelParams::default();
        let x0 = [0.5, 0.5];
        // Same distance 0.2 from x0 in two directions.
        let a = forward_solution(&p, &x0, &[0.7, 0.5], 0.03);
        let b = forward_solution(&p, &x0, &[0.5, 0.7], 0.03);
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn energy_vanishes_on_circle_and_is_rotation_invariant() {
        let post = PdePosterior::from_true_center(HeatModelParams::default(), 0.1).unwrap();
        let r = post.params.r_star();
        let s = post.params.sensor;
        assert_relative_eq!(r, 0.2, max_relative = 1e-14);
        for k in 0..24 {
            let ang = k as f64 * std::f64::consts::PI / 12.0;
            let x0 = [s[0] + r * ang.cos(), s[1] + r * ang.sin()];
            assert!(post.energy(&x0).abs() < 1e-20, "energy {} at {ang}", post.energy(&x0));
        }
        // Off-circle states: the same energy at every angle (tolerance 1e-12).
        let r_off = 0.31;
        let e0 = post.energy(&[s[0] + r_off, s[1]]);
        for k in 1..24 {
            let ang = k as f64 * std::f64::consts::PI / 12.0;
            let e = post.energy(&[s[0] + r_off * ang.cos(), s[1] + r_off * ang.sin()]);
            assert_relative_eq!(e, e0, max_relative = 1e-12);
        }
    }

    #[test]
    fn residual_at_sensor_center() {
        // Center placed on the sensor: residual beta e^{-0.03}(1 - e^{-2}).
        let post = PdePosterior::from_true_center(HeatModelParams::default(), 0.1).unwrap();
        let s = post.params.sensor;
        let residual = post.predict(&s) - post.observation;
        let expected = post.params.beta() * (-0.03f64).exp() * (1.0 - (-2.0f64).exp());
        assert_relative_eq!(residual, expected, max_relative = 1e-12);
        assert_relative_eq!(residual, 13.354850627136399, max_relative = 1e-10);
        assert_relative_eq!(
            post.energy(&[s[0], s[1]]),
            expected * expected / 0.02,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let post = PdePosterior::from_true_center(HeatModelParams::default(), 0.1).unwrap();
        let mut rng = derive_rng(7, "fd-pde");
        for _ in 0..100 {
            let theta = [rng.random::<f64>(), rng.random::<f64>()];
            let g = post.gradient(&theta);
            let fd = finite_difference_gradient(&post, &theta, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                // Energies reach ~10^4, so central differences carry ~1e-8
                // absolute roundoff; floor the relative scale at 1.
                let scale = a.abs().max(b.abs()).max(1.0);
                assert!((a - b).abs() / scale < 1e-5, "{a} vs {b} at {theta:?}");
            }
        }
    }

    #[test]
    fn gradient_is_radial() {
        // Component tangent to the circle about the sensor is 0 to 1e-10.
        let post = PdePosterior::from_true_center(HeatModelParams::default(), 0.1).unwrap();
        let s = post.params.sensor;
        for k in 0..24 {
            let ang = k as f64 * std::f64::consts::PI / 12.0;
            for r in [0.1, 0.27, 0.4] {
                let x0 = [s[0] + r * ang.cos(), s[1] + r * ang.sin()];
                let g = post.gradient(&x0);
                let tangent = [-ang.sin(), ang.cos()];
                let t_comp = g[0] * tangent[0] + g[1] * tangent[1];
                assert!(t_comp.abs() < 1e-10, "tangential component {t_comp}");
            }
        }
        // On the circle (noiseless data) the gradient vanishes.
        let on = [s[0] + 0.2, s[1]];
        let g = post.gradient(&on);
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn arm_presets() {
        use crate::targets::{GradientNoise, NoiseScale};
        let check = |cfg: &PdeArmConfig, sigma: f64, s: f64| {
            assert_eq!(cfg.noise.energy_sd, NoiseScale::Constant { value: sigma });
            match &cfg.noise.gradient {
                GradientNoise::Scalar(ns) => {
                    assert_eq!(*ns, NoiseScale::Constant { value: s })
                }
                _ => panic!(),
            }
            assert_eq!(cfg.tau_low, 0.08);
            assert_eq!(cfg.tau_high, 0.5);
        };
        let a = make_pde_arm(PdeArm::SmallNoise);
        check(&a, 0.1, 0.1);
        assert_eq!(a.sampler_kind, SamplerKind::Resgld);
        let b = make_pde_arm(PdeArm::Corrected);
        check(&b, 0.8, 2.0);
        assert_eq!(b.sampler_kind, SamplerKind::FResgld);
        let c = make_pde_arm(PdeArm::Large);
        check(&c, 0.8, 2.0);
        assert_eq!(c.sampler_kind, SamplerKind::Resgld);
    }

    #[test]
    fn iqoi_degenerate_clouds() {
        let p = HeatModelParams::default();
        let s = p.sensor;
        let circle: Vec<Vec<f64>> = (0..36)
            .map(|k| {
                let ang = (k as f64 + 0.5) * std::f64::consts::PI / 18.0;
                vec![s[0] + 0.2 * ang.cos(), s[1] + 0.2 * ang.sin()]
            })
            .collect();
        let m = iqoi_metrics(&circle, &p).unwrap();
        assert_eq!(m.annulus_coverage, 1.0);
        assert_eq!(m.angular_bins_occupied, 36);
        assert_eq!(m.r_star, 0.2);

        let point = vec![vec![s[0] + 0.2, s[1]]; 50];
        let m = iqoi_metrics(&point, &p).unwrap();
        assert_eq!(m.annulus_coverage, 1.0);
        assert_eq!(m.angular_bins_occupied, 1);

        assert!(iqoi_metrics(&[], &p).is_err());
    }

    #[test]
    fn iqoi_uniform_square_matches_annulus_area() {
        // The full annulus r in [0.15, 0.25] around (0.3, 0.5) fits in the
        // square, so coverage estimates its area pi(0.25^2 - 0.15^2).
        let p = HeatModelParams::default();
        let mut rng = derive_rng(8, "iqoi");
        let n = 200_000usize;
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let m = iqoi_metrics(&samples, &p).unwrap();
        let area = std::f64::consts::PI * (0.25f64.powi(2) - 0.15f64.powi(2));
        let se = (area * (1.0 - area) / n as f64).sqrt();
        assert!(
            (m.annulus_coverage - area).abs() < 4.0 * se,
            "coverage {} vs area {area}",
            m.annulus_coverage
        );
        assert_eq!(m.angular_bins_occupied, 36);
    }
}
