//! Behavioral and parametric error between a learnt controller and its target.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PendulumParams, State, Trajectory};
use crate::error::{Error, Result};
use crate::learner::SkillParams;

/// Largest RMSE value written to result files.
pub const RMSE_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean Euclidean state distance along the rollout; `+∞` when the learnt rollout diverged.
    pub rmse: f64,
    pub l2: f64,
    pub diverged: bool,
}

/// Mean per-step Euclidean distance between two equally sampled trajectories.
///
/// Averages over every logged state, the initial one included.
pub fn rmse(traj: &Trajectory, reference: &Trajectory) -> Result<f64> {
    if traj.dt != reference.dt {
        return Err(Error::Mismatch(format!(
            "time steps differ ({} vs {})",
            traj.dt, reference.dt
        )));
    }
    if traj.len() != reference.len() {
        return Err(Error::Mismatch(format!(
            "lengths differ ({} vs {})",
            traj.len(),
            reference.len()
        )));
    }
    if traj.is_empty() {
        return Err(Error::Mismatch("trajectories are empty".into()));
    }
    let total: f64 = traj
        .states
        .iter()
        .zip(&reference.states)
        .map(|(a, b)| a.distance(b))
        .sum();
    Ok(total / traj.len() as f64)
}

pub fn l2_error(w: &SkillParams, w_star: &SkillParams) -> f64 {
    w.sub(w_star).norm()
}

/// Rolls out both controllers from `x0` and compares them.
pub fn evaluate_learner(
    w: &SkillParams,
    w_star: &SkillParams,
    x0: State,
    duration: f64,
    p: &PendulumParams,
) -> Result<EvalResult> {
    let reference = dynamics::rollout(w_star, x0, duration, p)?;
    evaluate_against(w, w_star, &reference, p)
}

/// Compares `w` against an already simulated target trajectory without storing
/// the learnt rollout.
pub fn evaluate_against(
    w: &SkillParams,
    w_star: &SkillParams,
    reference: &Trajectory,
    p: &PendulumParams,
) -> Result<EvalResult> {
    if reference.is_empty() {
        return Err(Error::Mismatch("reference trajectory is empty".into()));
    }
    if reference.dt != p.dt {
        return Err(Error::Mismatch(format!(
            "reference sampled at {} s, simulator at {} s",
            reference.dt, p.dt
        )));
    }
    let l2 = l2_error(w, w_star);
    let steps = reference.len() - 1;
    let mut total = 0.0;
    let outcome = dynamics::rollout_with(w, reference.states[0], steps, p, |i, x, _| {
        total += x.distance(&reference.states[i]);
    });
    match outcome {
        Ok(last) => {
            total += last.distance(&reference.states[steps]);
            Ok(EvalResult {
                rmse: total / reference.len() as f64,
                l2,
                diverged: false,
            })
        }
        Err(Error::Divergence { .. }) => Ok(EvalResult {
            rmse: f64::INFINITY,
            l2,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}
