//! Linear-in-parameters skill model and its ridge-regression learner.
//!
//! A skill maps a state to an action `u = wᵀφ(x)` with `φ(x) = (sin q, q̇)`.
//! Demonstrations are stacked as columns of a 2×2 feature matrix `Φ`, so the
//! learner's data equations read `Φᵀw = u`.

use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};

/// `|det Φ|` below this makes the unregularized solve singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Feature vector `φ(x) = (sin q, q̇)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub f1: f64,
    pub f2: f64,
}

impl FeatureVector {
    pub const fn new(f1: f64, f2: f64) -> Self {
        Self { f1, f2 }
    }

    pub fn norm(&self) -> f64 {
        self.f1.hypot(self.f2)
    }

    fn dot(&self, w: &SkillParams) -> f64 {
        w.stiffness * self.f1 + w.damping * self.f2
    }
}

/// Controller weights `(stiffness, damping)`; used for targets and learnt models alike.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SkillParams {
    pub stiffness: f64,
    pub damping: f64,
}

impl SkillParams {
    pub const fn new(stiffness: f64, damping: f64) -> Self {
        Self { stiffness, damping }
    }

    pub fn is_finite(&self) -> bool {
        self.stiffness.is_finite() && self.damping.is_finite()
    }

    pub fn sub(&self, other: &SkillParams) -> SkillParams {
        SkillParams::new(
            self.stiffness - other.stiffness,
            self.damping - other.damping,
        )
    }

    pub fn norm(&self) -> f64 {
        self.stiffness.hypot(self.damping)
    }

    pub(crate) fn as_array(&self) -> [f64; 2] {
        [self.stiffness, self.damping]
    }
}

/// Pair of demonstrated actions, one per feature column.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionVector(pub [f64; 2]);

impl ActionVector {
    pub const fn new(u1: f64, u2: f64) -> Self {
        Self([u1, u2])
    }
}

/// 2×2 feature matrix whose columns are the feature vectors of the two demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: [FeatureVector; 2],
}

impl FeatureMatrix {
    pub const fn from_columns(c1: FeatureVector, c2: FeatureVector) -> Self {
        Self { columns: [c1, c2] }
    }

    pub const fn identity() -> Self {
        Self::from_columns(FeatureVector::new(1.0, 0.0), FeatureVector::new(0.0, 1.0))
    }

    /// Entry at (row, col).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let c = &self.columns[col];
        if row == 0 {
            c.f1
        } else {
            c.f2
        }
    }

    pub fn det(&self) -> f64 {
        let [a, b] = self.columns;
        a.f1 * b.f2 - b.f1 * a.f2
    }

    /// `ΦΦᵀ` as a symmetric matrix.
    pub(crate) fn outer_gram(&self) -> Sym2 {
        let [a, b] = self.columns;
        Sym2 {
            xx: a.f1 * a.f1 + b.f1 * b.f1,
            xy: a.f1 * a.f2 + b.f1 * b.f2,
            yy: a.f2 * a.f2 + b.f2 * b.f2,
        }
    }

    /// `ΦᵀΦ` as a symmetric matrix.
    pub fn inner_gram(&self) -> Sym2 {
        let [a, b] = self.columns;
        Sym2 {
            xx: a.f1 * a.f1 + a.f2 * a.f2,
            xy: a.f1 * b.f1 + a.f2 * b.f2,
            yy: b.f1 * b.f1 + b.f2 * b.f2,
        }
    }

    /// `Φu`.
    pub(crate) fn apply(&self, u: &ActionVector) -> [f64; 2] {
        let [a, b] = self.columns;
        [a.f1 * u.0[0] + b.f1 * u.0[1], a.f2 * u.0[0] + b.f2 * u.0[1]]
    }

    fn is_finite(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.f1.is_finite() && c.f2.is_finite())
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub(crate) fn shifted(&self, lambda: f64) -> Sym2 {
        Sym2 {
            xx: self.xx + lambda,
            xy: self.xy,
            yy: self.yy + lambda,
        }
    }

    /// Solves `self · x = b` by Cramer's rule.
    pub(crate) fn solve(&self, b: [f64; 2]) -> [f64; 2] {
        let det = self.det();
        [
            (self.yy * b[0] - self.xy * b[1]) / det,
            (self.xx * b[1] - self.xy * b[0]) / det,
        ]
    }

    pub(crate) fn mul(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }
}

pub fn feature_map(x: State) -> FeatureVector {
    FeatureVector::new(x.angle.sin(), x.velocity)
}

/// Principal-branch inverse of [`feature_map`]: angle in `[-π/2, π/2]`.
pub fn inverse_feature_map(f: FeatureVector) -> Result<State> {
    if f.f1.is_nan() || f.f1.abs() > 1.0 || !f.f2.is_finite() {
        return Err(Error::Domain(format!(
            "feature ({}, {}) has no preimage: |sin q| must not exceed 1",
            f.f1, f.f2
        )));
    }
    Ok(State::new(f.f1.asin(), f.f2))
}

pub fn build_feature_matrix(states: [State; 2]) -> FeatureMatrix {
    FeatureMatrix::from_columns(feature_map(states[0]), feature_map(states[1]))
}

/// Ridge solution `ŵ = (ΦΦᵀ + λI)⁻¹Φu`.
///
/// With `λ = 0` this is the exact solve and fails on a singular `Φ`.
pub fn ridge_fit(phi: &FeatureMatrix, u: &ActionVector, lambda: f64) -> Result<SkillParams> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "regularization must be finite and non-negative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        let det = phi.det();
        if det.abs() < SINGULAR_DET {
            return Err(Error::Singular { det: det.abs() });
        }
    }
    let [s, d] = phi.outer_gram().shifted(lambda).solve(phi.apply(u));
    Ok(SkillParams::new(s, d))
}

/// Unregularized solve of `Φᵀŵ = u` for a square, invertible feature matrix.
pub fn exact_fit(phi: &FeatureMatrix, u: &ActionVector) -> Result<SkillParams> {
    let det = phi.det();
    if !phi.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::Singular { det: det.abs() });
    }
    let [a, b] = phi.columns;
    // Φᵀ = [[a.f1, a.f2], [b.f1, b.f2]]; det Φᵀ = det Φ.
    let s = (b.f2 * u.0[0] - a.f2 * u.0[1]) / det;
    let d = (a.f1 * u.0[1] - b.f1 * u.0[0]) / det;
    Ok(SkillParams::new(s, d))
}

/// Action the skill `w` takes at `x`.
pub fn predict(w: &SkillParams, x: State) -> f64 {
    feature_map(x).dot(w)
}

/// Ridge objective `Σ ½(wᵀφᵢ − uᵢ)² + (λ/2)‖w‖²`.
pub fn loss(w: &SkillParams, phi: &FeatureMatrix, u: &ActionVector, lambda: f64) -> f64 {
    let fit: f64 = phi
        .columns
        .iter()
        .zip(u.0)
        .map(|(c, ui)| 0.5 * (c.dot(w) - ui).powi(2))
        .sum();
    fit + 0.5 * lambda * (w.stiffness * w.stiffness + w.damping * w.damping)
}

/// Residual norm `‖(ΦΦᵀ + λI)w − Φu‖` of the ridge normal equations.
pub fn normal_equation_residual(
    w: &SkillParams,
    phi: &FeatureMatrix,
    u: &ActionVector,
    lambda: f64,
) -> f64 {
    let lhs = phi.outer_gram().shifted(lambda).mul(w.as_array());
    let rhs = phi.apply(u);
    (lhs[0] - rhs[0]).hypot(lhs[1] - rhs[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn feature_map_examples() {
        assert_eq!(
            feature_map(State::new(FRAC_PI_2, 0.0)),
            FeatureVector::new(1.0, 0.0)
        );
        let f = feature_map(State::new(FRAC_PI_6, 0.5));
        assert!(close(f.f1, 0.5, 1e-15) && f.f2 == 0.5);
        assert_eq!(
            feature_map(State::new(0.0, 1.0)),
            FeatureVector::new(0.0, 1.0)
        );
    }

    #[test]
    fn inverse_feature_map_examples() {
        let x = inverse_feature_map(FeatureVector::new(1.0, 0.0)).unwrap();
        assert!(close(x.angle, FRAC_PI_2, 1e-15) && x.velocity == 0.0);
        let x = inverse_feature_map(FeatureVector::new(0.5, 0.8660254)).unwrap();
        assert!(close(x.angle, FRAC_PI_6, 1e-15) && x.velocity == 0.8660254);
        assert!(matches!(
            inverse_feature_map(FeatureVector::new(1.2, 0.0)),
            Err(Error::Domain(_))
        ));
        assert!(inverse_feature_map(FeatureVector::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn feature_matrix_construction() {
        let phi = build_feature_matrix([State::new(FRAC_PI_2, 0.0), State::new(0.0, 1.0)]);
        assert_eq!(phi, FeatureMatrix::identity());
        let phi = build_feature_matrix([State::new(FRAC_PI_2, 0.0); 2]);
        assert_eq!(phi.columns[0], phi.columns[1]);
        assert_eq!(phi.det(), 0.0);
    }

    #[test]
    fn ridge_examples() {
        let phi = FeatureMatrix::identity();
        let u = ActionVector::new(2.0, 3.0);
        assert_eq!(
            ridge_fit(&phi, &u, 0.0).unwrap(),
            SkillParams::new(2.0, 3.0)
        );
        assert_eq!(
            ridge_fit(&phi, &u, 1.0).unwrap(),
            SkillParams::new(1.0, 1.5)
        );
        let w = ridge_fit(&phi, &ActionVector::new(9.81, 0.0), 1e-6).unwrap();
        assert!(w.sub(&SkillParams::new(9.81, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn ridge_rejects_bad_lambda_and_singular() {
        let phi = FeatureMatrix::identity();
        let u = ActionVector::new(1.0, 1.0);
        assert!(ridge_fit(&phi, &u, -1.0).is_err());
        assert!(ridge_fit(&phi, &u, f64::NAN).is_err());
        let flat = build_feature_matrix([State::new(FRAC_PI_2, 0.0); 2]);
        assert!(matches!(
            ridge_fit(&flat, &u, 0.0),
            Err(Error::Singular { .. })
        ));
        assert!(ridge_fit(&flat, &u, 1e-6).is_ok());
    }

    #[test]
    fn exact_fit_examples() {
        let w = exact_fit(&FeatureMatrix::identity(), &ActionVector::new(9.81, 0.0)).unwrap();
        assert_eq!(w, SkillParams::new(9.81, 0.0));

        // Hand elimination on Φᵀw = u with Φ = [[1, 0.5], [0, 0.8660254]]:
        // row 1 gives s = 9.81, row 2 gives 0.5·9.81 + 0.8660254·d = 4.905, so d = 0.
        let phi = FeatureMatrix::from_columns(
            FeatureVector::new(1.0, 0.0),
            FeatureVector::new(FRAC_PI_3.cos(), FRAC_PI_3.sin()),
        );
        let w = exact_fit(&phi, &ActionVector::new(9.81, 4.905)).unwrap();
        assert!(close(w.stiffness, 9.81, 1e-12));
        assert!(close(w.damping, 0.0, 1e-12));

        let flat =
            FeatureMatrix::from_columns(FeatureVector::new(0.6, 0.3), FeatureVector::new(0.4, 0.2));
        match exact_fit(&flat, &ActionVector::new(1.0, 2.0)) {
            Err(Error::Singular { det }) => assert!(det < 1e-12),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(
            predict(&SkillParams::new(9.81, 0.0), State::new(FRAC_PI_2, 0.0)),
            9.81
        );
        assert_eq!(predict(&SkillParams::default(), State::new(1.0, 2.0)), 0.0);
        assert!(close(
            predict(&SkillParams::new(1.0, 1.0), State::new(FRAC_PI_6, 0.5)),
            1.0,
            1e-15
        ));
    }

    #[test]
    fn loss_examples() {
        let phi = FeatureMatrix::identity();
        let w = SkillParams::new(2.0, 3.0);
        assert_eq!(loss(&w, &phi, &ActionVector::new(2.0, 3.0), 0.0), 0.0);
        assert_eq!(
            loss(
                &SkillParams::default(),
                &phi,
                &ActionVector::new(1.0, 1.0),
                0.0
            ),
            1.0
        );
    }

    #[test]
    fn loss_gradient_vanishes_at_ridge_solution() {
        let phi = FeatureMatrix::from_columns(
            FeatureVector::new(0.9, 0.1),
            FeatureVector::new(0.3, -0.7),
        );
        let u = ActionVector::new(1.3, -0.4);
        let lambda = 1e-2;
        let w = ridge_fit(&phi, &u, lambda).unwrap();
        let h = 1e-6;
        let g0 = (loss(
            &SkillParams::new(w.stiffness + h, w.damping),
            &phi,
            &u,
            lambda,
        ) - loss(
            &SkillParams::new(w.stiffness - h, w.damping),
            &phi,
            &u,
            lambda,
        )) / (2.0 * h);
        let g1 = (loss(
            &SkillParams::new(w.stiffness, w.damping + h),
            &phi,
            &u,
            lambda,
        ) - loss(
            &SkillParams::new(w.stiffness, w.damping - h),
            &phi,
            &u,
            lambda,
        )) / (2.0 * h);
        assert!(g0.hypot(g1) < 1e-6);
    }

    #[test]
    fn ridge_approaches_exact_solution() {
        let phi = FeatureMatrix::from_columns(
            FeatureVector::new(0.8, 0.2),
            FeatureVector::new(-0.1, 0.9),
        );
        let u = ActionVector::new(3.0, -1.0);
        let exact = exact_fit(&phi, &u).unwrap();
        let gaps: Vec<f64> = [1e-3, 1e-6, 1e-9]
            .iter()
            .map(|&l| ridge_fit(&phi, &u, l).unwrap().sub(&exact).norm())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }
}
