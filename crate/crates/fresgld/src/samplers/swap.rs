//! Swap-rate rules for replica exchange.
//!
//! All rates share the exponential form `exp{τ_δ(...)}` with
//! `τ_δ = 1/τ₁ - 1/τ₂` and are computed in log space with the exponent capped
//! at ±[`EXP_CAP`] so that `min(1, rate)` never sees `Inf·0`.

/// Cap applied to swap-rate exponents before exponentiation.
pub const EXP_CAP: f64 = 700.0;

#[inline]
fn exp_capped(x: f64) -> f64 {
    x.clamp(-EXP_CAP, EXP_CAP).exp()
}

/// `τ_δ = 1/τ₁ - 1/τ₂`, positive whenever `τ₂ > τ₁ > 0`.
#[inline]
pub fn tau_delta(tau1: f64, tau2: f64) -> f64 {
    1.0 / tau1 - 1.0 / tau2
}

/// Exact swap rate `S = exp{τ_δ(U(θ¹) - U(θ²))}` for noiseless energies.
pub fn swap_rate_exact(u1: f64, u2: f64, tau1: f64, tau2: f64) -> f64 {
    exp_capped(tau_delta(tau1, tau2) * (u1 - u2))
}

/// Equal-variance noisy swap rate
/// `Ŝ = exp{τ_δ(Û(θ¹) - Û(θ²) - τ_δ σ²)}`; unbiased for `S` when both
/// estimates carry independent `N(0, σ²)` noise.
pub fn swap_rate_resgld(u1_hat: f64, u2_hat: f64, sigma2: f64, tau1: f64, tau2: f64) -> f64 {
    let td = tau_delta(tau1, tau2);
    exp_capped(td * (u1_hat - u2_hat - td * sigma2))
}

/// Multi-variance swap rate: the `a₁/a₂`-weighted form requiring both
/// estimators at both states (four energy evaluations),
/// `Ŝ = exp{τ_δ[a₁(Û₁(θ¹)-Û₁(θ²)) + a₂(Û₂(θ¹)-Û₂(θ²)) - (a₁²σ₁² + a₂²σ₂²)τ_δ]}`.
#[allow(clippy::too_many_arguments)]
pub fn swap_rate_mresgld(
    u1_at_1: f64,
    u1_at_2: f64,
    u2_at_1: f64,
    u2_at_2: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
    a1: f64,
    a2: f64,
    tau1: f64,
    tau2: f64,
) -> f64 {
    let td = tau_delta(tau1, tau2);
    exp_capped(
        td * (a1 * (u1_at_1 - u1_at_2) + a2 * (u2_at_1 - u2_at_2)
            - (a1 * a1 * sigma1_sq + a2 * a2 * sigma2_sq) * td),
    )
}

/// One-evaluation-per-chain unbiased swap rate
/// `S̃ = exp{τ_δ(Û₁(θ¹) - Û₂(θ²) - τ_δ(σ₁²(θ¹) + σ₂²(θ²))/2)}`.
pub fn swap_rate_fresgld(
    u1_at_1: f64,
    u2_at_2: f64,
    sigma1_sq_at_1: f64,
    sigma2_sq_at_2: f64,
    tau1: f64,
    tau2: f64,
) -> f64 {
    let td = tau_delta(tau1, tau2);
    exp_capped(td * (u1_at_1 - u2_at_2 - td * (sigma1_sq_at_1 + sigma2_sq_at_2) / 2.0))
}

/// Discrete swap probability `min(1, a·η·min(1, rate))`, clamped into [0, 1].
pub fn swap_probability(a: f64, eta: f64, rate: f64) -> f64 {
    (a * eta * rate.min(1.0)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn exact_rate_values() {
        assert_eq!(swap_rate_exact(2.0, 2.0, 1.0, 10.0), 1.0);
        let s = swap_rate_exact(1.0, 2.0, 1.0, 10.0);
        assert_relative_eq!(s, (-0.9f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(s, 0.4065696597405991, max_relative = 1e-10);
        // Antisymmetry of the exponent.
        let r = swap_rate_exact(2.0, 1.0, 1.0, 10.0);
        assert_relative_eq!(r * s, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn resgld_rate_values() {
        // sigma^2 = 0 reduces to the exact rate.
        assert_eq!(
            swap_rate_resgld(1.3, 2.7, 0.0, 1.0, 10.0),
            swap_rate_exact(1.3, 2.7, 1.0, 10.0)
        );
        // tau_delta = 0.9, U1 = 1, U2 = 2, sigma^2 = 1.
        let s = swap_rate_resgld(1.0, 2.0, 1.0, 1.0, 10.0);
        assert_relative_eq!(s, (-1.71f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(s, 0.1808657926171221, max_relative = 1e-10);
    }

    #[test]
    fn mresgld_rate_values() {
        // a1 = 1, a2 = 0 collapses to the equal-variance rate on estimator 1.
        let collapsed = swap_rate_mresgld(1.0, 2.0, 9.9, -3.0, 1.0, 77.0, 1.0, 0.0, 1.0, 10.0);
        assert_eq!(collapsed, swap_rate_resgld(1.0, 2.0, 1.0, 1.0, 10.0));
        // Equal weights, all energies (1,2,1,2), sigma1^2 = 1, sigma2^2 = 9.
        let s = swap_rate_mresgld(1.0, 2.0, 1.0, 2.0, 1.0, 9.0, 0.5, 0.5, 1.0, 10.0);
        assert_relative_eq!(s, (0.9f64 * -3.25).exp(), max_relative = 1e-12);
        assert_relative_eq!(s, 0.05366469191273011, max_relative = 1e-10);
    }

    #[test]
    fn fresgld_rate_values() {
        // Equal variances reduce algebraically to the equal-variance rate.
        let a = swap_rate_fresgld(1.0, 2.0, 4.0, 4.0, 1.0, 10.0);
        let b = swap_rate_resgld(1.0, 2.0, 4.0, 1.0, 10.0);
        assert_relative_eq!(a, b, max_relative = 1e-12);
        // tau_delta = 0.9, U1 = 1, U2 = 2, sigma1^2 = 1, sigma2^2 = 9.
        let s = swap_rate_fresgld(1.0, 2.0, 1.0, 9.0, 1.0, 10.0);
        assert_relative_eq!(s, (-4.95f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(s, 0.0070834089290521185, max_relative = 1e-10);
    }

    #[test]
    fn rates_overflow_guarded() {
        let s = swap_rate_exact(1e6, -1e6, 1.0, 10.0);
        assert!(s.is_finite());
        assert_eq!(s, EXP_CAP.exp());
        let s = swap_rate_exact(-1e6, 1e6, 1.0, 10.0);
        assert!(s > 0.0);
    }

    #[test]
    fn unbiasedness_monte_carlo() {
        // E[S_hat] = S within 4 standard errors for random tuples, for all
        // three noisy estimators.
        let mut rng = crate::stream::derive_rng(11, "lemma");
        for _ in 0..20 {
            let u1 = rng.random::<f64>() * 4.0 - 2.0;
            let u2 = rng.random::<f64>() * 4.0 - 2.0;
            let s1 = 0.3 + rng.random::<f64>() * 0.9;
            let s2 = 0.3 + rng.random::<f64>() * 0.9;
            let (tau1, tau2) = (1.0, 10.0);
            let exact = swap_rate_exact(u1, u2, tau1, tau2);
            let n = 200_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                let v = swap_rate_fresgld(u1 + s1 * z1, u2 + s2 * z2, s1 * s1, s2 * s2, tau1, tau2);
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n as f64;
            let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(
                (mean - exact).abs() < 4.0 * se.max(1e-12),
                "mean {mean} vs exact {exact} (se {se})"
            );
        }
    }

    #[test]
    fn jensen_direction() {
        // E[min(1, S_hat)] <= min(1, S) + 3 standard errors when sigma > 0.
        let mut rng = crate::stream::derive_rng(12, "jensen");
        for &(u1, u2, sig) in &[(0.0, 0.0, 1.0), (1.0, 2.0, 0.5), (-1.0, 0.5, 2.0)] {
            let (tau1, tau2) = (1.0, 10.0);
            let exact = swap_rate_exact(u1, u2, tau1, tau2).min(1.0);
            let n = 200_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                let v = swap_rate_resgld(u1 + sig * z1, u2 + sig * z2, sig * sig, tau1, tau2)
                    .min(1.0);
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n as f64;
            let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(mean <= exact + 3.0 * se, "mean {mean} vs min(1,S) {exact}");
        }
    }

    #[test]
    fn probability_clamped() {
        assert_eq!(swap_probability(1.0, 0.03, 0.0), 0.0);
        assert_eq!(swap_probability(40.0, 0.03, 5.0), 1.0);
        let p = swap_probability(1.0, 0.03, 0.40657);
        assert_relative_eq!(p, 0.0121971, max_relative = 1e-5);
    }
}
