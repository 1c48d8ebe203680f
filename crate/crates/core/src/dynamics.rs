//! Torque-controlled pendulum and its fixed-step integrator.
//!
//! The pendulum hangs down with the angle measured from the downward
//! vertical: `m L² q̈ = -m g L sin q + τ`. A skill produces the action
//! `u = wᵀφ(x)` and the motor applies `τ = -u`, so the target
//! `w* = (g/L, 0)` closes the loop as `q̈ = -2 g sin q`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::SkillParams;

/// Velocities beyond this magnitude abort a rollout.
pub const DIVERGENCE_VELOCITY: f64 = 1e6;

/// Pendulum state: angle in radians, angular velocity in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub angle: f64,
    pub velocity: f64,
}

impl State {
    pub const fn new(angle: f64, velocity: f64) -> Self {
        Self { angle, velocity }
    }

    pub fn is_finite(&self) -> bool {
        self.angle.is_finite() && self.velocity.is_finite()
    }

    /// Euclidean distance in the (angle, velocity) plane.
    pub fn distance(&self, other: &State) -> f64 {
        (self.angle - other.angle).hypot(self.velocity - other.velocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub dt: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            dt: 1e-4,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.mass) && ok(self.length) && ok(self.gravity)) {
            return Err(Error::Domain(format!(
                "pendulum mass, length and gravity must be positive, got {self:?}"
            )));
        }
        if !(ok(self.dt) && self.dt <= 1e-2) {
            return Err(Error::Domain(format!(
                "time step must lie in (0, 1e-2], got {}",
                self.dt
            )));
        }
        Ok(())
    }

    /// Number of whole steps covering `duration`, if it is an integer multiple of `dt`.
    pub fn steps_for(&self, duration: f64) -> Result<usize> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Domain(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let n = duration / self.dt;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded < 1.0 {
            return Err(Error::Domain(format!(
                "duration {duration} is not a whole number of {} s steps",
                self.dt
            )));
        }
        Ok(rounded as usize)
    }

    /// Closed-loop energy per unit inertia for the stiffness-only controller `(k, 0)`:
    /// `½v² + (g/L + k/(mL²))·(1 − cos q)`, zero at rest hanging down.
    /// Conserved by the continuous dynamics.
    pub fn closed_loop_energy(&self, stiffness: f64, x: State) -> f64 {
        let inertia = self.mass * self.length * self.length;
        0.5 * x.velocity * x.velocity
            + (self.gravity / self.length + stiffness / inertia) * (1.0 - x.angle.cos())
    }
}

/// Sampled closed-loop trajectory; `torques[i]` drives `states[i]` to `states[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
    pub torques: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes `t,angle,velocity,torque` rows for every `stride`-th state.
    ///
    /// The final state has no outgoing torque; its row repeats the last applied one.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        writeln!(out, "t,angle,velocity,torque")?;
        for (i, s) in self.states.iter().enumerate().step_by(stride) {
            let torque = self
                .torques
                .get(i)
                .or_else(|| self.torques.last())
                .copied()
                .unwrap_or(0.0);
            writeln!(
                out,
                "{:.4},{:.9},{:.9},{:.9}",
                i as f64 * self.dt,
                s.angle,
                s.velocity,
                torque
            )?;
        }
        Ok(())
    }
}

/// Motor torque for skill `w` at state `x`: the negated skill action.
#[inline]
pub fn applied_torque(w: &SkillParams, x: State) -> f64 {
    -(w.stiffness * x.angle.sin() + w.damping * x.velocity)
}

/// One semi-implicit Euler step: velocity first, then position with the new velocity.
#[inline]
pub fn step(x: State, torque: f64, p: &PendulumParams) -> State {
    let inertia = p.mass * p.length * p.length;
    let accel = -(p.gravity / p.length) * x.angle.sin() + torque / inertia;
    let velocity = x.velocity + p.dt * accel;
    State {
        angle: x.angle + p.dt * velocity,
        velocity,
    }
}

/// Streams a closed-loop rollout, calling `visit(step_index, state)` for every
/// state including the initial one. Returns the final state.
pub(crate) fn rollout_with<F>(
    w: &SkillParams,
    x0: State,
    steps: usize,
    p: &PendulumParams,
    mut visit: F,
) -> Result<State>
where
    F: FnMut(usize, State, f64),
{
    let mut x = x0;
    for i in 0..steps {
        let torque = applied_torque(w, x);
        visit(i, x, torque);
        x = step(x, torque, p);
        if !x.is_finite() || x.velocity.abs() > DIVERGENCE_VELOCITY {
            return Err(Error::Divergence { step: i + 1 });
        }
    }
    Ok(x)
}

/// Simulates skill `w` from `x0` for `duration` seconds.
pub fn rollout(
    w: &SkillParams,
    x0: State,
    duration: f64,
    p: &PendulumParams,
) -> Result<Trajectory> {
    p.validate()?;
    if !x0.is_finite() {
        return Err(Error::Domain(format!(
            "initial state is not finite: {x0:?}"
        )));
    }
    let steps = p.steps_for(duration)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut torques = Vec::with_capacity(steps);
    let last = rollout_with(w, x0, steps, p, |_, x, tau| {
        states.push(x);
        torques.push(tau);
    })?;
    states.push(last);
    Ok(Trajectory {
        dt: p.dt,
        states,
        torques,
    })
}
