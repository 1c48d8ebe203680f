//! Target skills S1 (undamped oscillation) and S2 (fast settling without overshoot).

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PendulumParams, State, Trajectory};
use crate::error::{Error, Result};
use crate::learner::SkillParams;

const GRAVITY: f64 = 9.81;
const LENGTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillId {
    S1,
    S2,
}

impl SkillId {
    pub const ALL: [SkillId; 2] = [SkillId::S1, SkillId::S2];

    pub fn as_str(&self) -> &'static str {
        match self {
            SkillId::S1 => "s1",
            SkillId::S2 => "s2",
        }
    }

    pub fn spec(&self) -> SkillSpec {
        let stiffness = GRAVITY / LENGTH;
        let (w_star, description) = match self {
            SkillId::S1 => (SkillParams::new(stiffness, 0.0), "undamped oscillation"),
            // Critically damps the linearized closed loop q̈ = -2(g/L)q - d·q̇.
            SkillId::S2 => (
                SkillParams::new(stiffness, 2.0 * (2.0 * GRAVITY / LENGTH).sqrt()),
                "rapid movement without overshoot",
            ),
        };
        SkillSpec {
            id: *self,
            w_star,
            description: description.to_string(),
            x0: State::new(FRAC_PI_2, 0.0),
            duration: 3.0,
        }
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(SkillId::S1),
            "s2" => Ok(SkillId::S2),
            _ => Err(Error::UnknownSkill(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub id: SkillId,
    pub w_star: SkillParams,
    pub description: String,
    pub x0: State,
    pub duration: f64,
}

pub fn get_skill(id: &str) -> Result<SkillSpec> {
    Ok(id.parse::<SkillId>()?.spec())
}

type CacheKey = (SkillId, [u64; 2], [u64; 2], u64, [u64; 4]);

fn cache_key(spec: &SkillSpec, p: &PendulumParams) -> CacheKey {
    (
        spec.id,
        [
            spec.w_star.stiffness.to_bits(),
            spec.w_star.damping.to_bits(),
        ],
        [spec.x0.angle.to_bits(), spec.x0.velocity.to_bits()],
        spec.duration.to_bits(),
        [
            p.mass.to_bits(),
            p.length.to_bits(),
            p.gravity.to_bits(),
            p.dt.to_bits(),
        ],
    )
}

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<Trajectory>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<Trajectory>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Target-controller rollout for `spec`, memoized per `(spec, p)`.
pub fn reference_trajectory(spec: &SkillSpec, p: &PendulumParams) -> Result<Arc<Trajectory>> {
    let key = cache_key(spec, p);
    if let Some(t) = cache().read().expect("reference cache poisoned").get(&key) {
        return Ok(Arc::clone(t));
    }
    let traj = Arc::new(dynamics::rollout(&spec.w_star, spec.x0, spec.duration, p)?);
    let mut guard = cache().write().expect("reference cache poisoned");
    Ok(Arc::clone(guard.entry(key).or_insert(traj)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_examples() {
        assert_eq!(get_skill("s1").unwrap().w_star, SkillParams::new(9.81, 0.0));
        let s2 = get_skill("S2").unwrap().w_star;
        assert_eq!(s2.stiffness, 9.81);
        assert!((s2.damping - 8.859).abs() < 1e-3);
        assert!(matches!(get_skill("s3"), Err(Error::UnknownSkill(_))));
    }

    #[test]
    fn s1_reference_oscillates() {
        let p = PendulumParams::default();
        let t = reference_trajectory(&SkillId::S1.spec(), &p).unwrap();
        assert_eq!(t.torques[0], -9.81);
        // returns near the release angle after the first swing
        let back = t.states[1000..]
            .iter()
            .any(|s| (s.angle - FRAC_PI_2).abs() < 0.02);
        assert!(back);
    }

    #[test]
    fn s2_reference_settles_without_overshoot() {
        let p = PendulumParams::default();
        let t = reference_trajectory(&SkillId::S2.spec(), &p).unwrap();
        assert!(t.states.iter().all(|s| s.angle >= -0.01));
        assert!(t.states.last().unwrap().angle.abs() < 0.05);
    }

    #[test]
    fn cache_is_transparent() {
        let p = PendulumParams::default();
        let spec = SkillId::S1.spec();
        let cached = reference_trajectory(&spec, &p).unwrap();
        let again = reference_trajectory(&spec, &p).unwrap();
        assert!(Arc::ptr_eq(&cached, &again));
        let fresh = dynamics::rollout(&spec.w_star, spec.x0, spec.duration, &p).unwrap();
        assert_eq!(*cached, fresh);
    }
}
