//! The teacher's side of the problem.
//!
//! Demonstrations are drawn from the canonical family whose feature matrix
//! has columns `(1, 0)` and `(cos ω, sin ω)`. For that family `|det Φ| = |sin ω|`,
//! the eigenvalues of `ΦᵀΦ` are `1 ± |cos ω|`, and the noise-driven part of the
//! teaching risk is minimized at `ω = π/2`, where the determinant is largest.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::learner::{
    build_feature_matrix, inverse_feature_map, predict, ridge_fit, ActionVector, FeatureMatrix,
    FeatureVector, SkillParams,
};
use crate::rng;

/// Two demonstrations: the teaching budget equals the teaching dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoSet {
    pub states: [State; 2],
    pub actions: ActionVector,
}

impl DemoSet {
    pub fn feature_matrix(&self) -> FeatureMatrix {
        build_feature_matrix(self.states)
    }
}

/// Zero-mean Gaussian action noise; `sigma` is the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "noise level must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub const fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub variance_term: f64,
    pub bias_term: f64,
    pub total: f64,
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "angle between feature vectors must lie in (0, π/2], got {omega}"
        )))
    }
}

fn check_sigma_lambda(sigma: f64, lambda: f64) -> Result<()> {
    NoiseModel::new(sigma)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "regularization must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Canonical feature matrix with columns `(1, 0)` and `(cos ω, sin ω)`.
pub fn canonical_phi(omega: f64) -> Result<FeatureMatrix> {
    check_omega(omega)?;
    Ok(FeatureMatrix::from_columns(
        FeatureVector::new(1.0, 0.0),
        FeatureVector::new(omega.cos(), omega.sin()),
    ))
}

pub fn det_phi(phi: &FeatureMatrix) -> f64 {
    phi.det()
}

/// Teaching-quality index `100·|det Φ|`, clamped to `[0, 100]`.
pub fn teaching_score(demos: &DemoSet) -> f64 {
    score_states(demos.states)
}

pub fn score_states(states: [State; 2]) -> f64 {
    (100.0 * build_feature_matrix(states).det().abs()).clamp(0.0, 100.0)
}

/// Eigenvalues `(b1, b2)` of `ΦᵀΦ` for the canonical matrix, `b1 ≥ b2`.
pub fn gram_eigenvalues(omega: f64) -> Result<(f64, f64)> {
    check_omega(omega)?;
    let s = omega.sin();
    let c = (1.0 - s * s).max(0.0).sqrt();
    Ok((1.0 + c, 1.0 - c))
}

/// Variance part of the teaching risk, `σ²·Σ bᵢ/(bᵢ+λ)²`.
pub fn risk_variance(omega: f64, sigma: f64, lambda: f64) -> Result<f64> {
    check_sigma_lambda(sigma, lambda)?;
    let b = gram_eigenvalues(omega)?;
    Ok(sigma * sigma * spectrum_variance(b, lambda))
}

/// Full teaching risk: variance term from the spectrum of `ΦᵀΦ`, plus the
/// regularization bias `λ²·w*ᵀ(ΦΦᵀ + λI)⁻²w*`.
pub fn risk_full(
    phi: &FeatureMatrix,
    w_star: &SkillParams,
    sigma: f64,
    lambda: f64,
) -> Result<RiskBreakdown> {
    check_sigma_lambda(sigma, lambda)?;
    let gram = phi.inner_gram();
    let half_tr = 0.5 * gram.trace();
    let disc = (half_tr * half_tr - gram.det()).max(0.0).sqrt();
    let b = (half_tr + disc, (half_tr - disc).max(0.0));
    let variance_term = sigma * sigma * spectrum_variance(b, lambda);
    let bias_term = if lambda == 0.0 {
        0.0
    } else {
        let z = phi.outer_gram().shifted(lambda).solve(w_star.as_array());
        lambda * lambda * (z[0] * z[0] + z[1] * z[1])
    };
    Ok(RiskBreakdown {
        variance_term,
        bias_term,
        total: variance_term + bias_term,
    })
}

// A zero eigenvalue carries no data and contributes nothing to the variance.
fn spectrum_variance(b: (f64, f64), lambda: f64) -> f64 {
    let term = |bi: f64| {
        if bi == 0.0 {
            0.0
        } else {
            bi / ((bi + lambda) * (bi + lambda))
        }
    };
    term(b.0) + term(b.1)
}

/// Closed-form derivative of [`risk_variance`] with respect to `ω`.
pub fn risk_derivative(omega: f64, sigma: f64, lambda: f64) -> Result<f64> {
    check_omega(omega)?;
    check_sigma_lambda(sigma, lambda)?;
    let s = omega.sin();
    let c = omega.cos();
    let root = (1.0 - s * s).max(0.0).sqrt();
    let num = 4.0
        * sigma
        * sigma
        * c
        * s
        * ((2.0 * lambda + 1.0) * s * s
            - 2.0 * lambda.powi(3)
            - 3.0 * lambda * lambda
            - 2.0 * lambda);
    let den = (root - lambda - 1.0).powi(3) * (root + lambda + 1.0).powi(3);
    Ok(num / den)
}

/// Demonstrated action `w*ᵀφ(x) + ε` with `ε ~ N(0, σ²)`.
///
/// Always consumes exactly one normal draw, so streams stay aligned across noise levels.
pub fn noisy_action<R: Rng + ?Sized>(
    w_star: &SkillParams,
    x: State,
    noise: &NoiseModel,
    rng: &mut R,
) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    predict(w_star, x) + noise.sigma * z
}

/// Canonical demonstration pair at angle `ω` with noisy actions.
pub fn generate_demo_pair<R: Rng + ?Sized>(
    omega: f64,
    w_star: &SkillParams,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DemoSet> {
    check_omega(omega)?;
    let states = [
        inverse_feature_map(FeatureVector::new(1.0, 0.0))?,
        inverse_feature_map(FeatureVector::new(omega.cos(), omega.sin()))?,
    ];
    let u1 = noisy_action(w_star, states[0], noise, rng);
    let u2 = noisy_action(w_star, states[1], noise, rng);
    Ok(DemoSet {
        states,
        actions: ActionVector::new(u1, u2),
    })
}

/// Grid element with the lowest variance risk; ties go to the larger angle.
pub fn optimal_omega(grid: &[f64], sigma: f64, lambda: f64) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &omega in grid {
        let risk = risk_variance(omega, sigma, lambda)?;
        best = match best {
            Some((bo, br)) if risk > br || (risk == br && omega < bo) => Some((bo, br)),
            _ => Some((omega, risk)),
        };
    }
    best.map(|(o, _)| o).ok_or(Error::EmptyGrid)
}

/// Empirical teaching risk `E‖ŵ − w*‖²` over `trials` independent demonstration sets.
///
/// Trial `i` draws its noise from `rng::derive(seed, [i])`.
pub fn monte_carlo_risk(
    omega: f64,
    w_star: &SkillParams,
    sigma: f64,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    check_sigma_lambda(sigma, lambda)?;
    let noise = NoiseModel::new(sigma)?;
    let phi = canonical_phi(omega)?;
    let errors = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::derive(seed, &[i as u64]);
            let demos = generate_demo_pair(omega, w_star, &noise, &mut stream)?;
            let w = ridge_fit(&phi, &demos.actions, lambda)?;
            let e = w.sub(w_star).norm();
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std_error = if errors.len() > 1 {
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(RiskEstimate {
        mean,
        std_error,
        trials,
    })
}
