//! Machine teaching for linear-in-parameters motor skills.
//!
//! A torque-controlled pendulum learns a stiffness/damping controller by ridge
//! regression from two demonstrated (state, action) pairs. The teacher's goal
//! is to pick demonstrations that minimize the expected parameter error; for
//! this learner the best pairs maximize `|det Φ|`, which also drives the 0–100
//! teaching-quality score shown to human teachers.
//!
//! Modules follow the data flow: [`dynamics`] simulates, [`learner`] fits,
//! [`teaching`] chooses and scores demonstrations, [`evaluation`] compares
//! learnt and target behavior, [`experiments`] sweeps and runs statistics,
//! and [`session`]/[`server`] run the six-phase human teaching protocol.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod learner;
pub mod rng;
pub mod server;
pub mod session;
pub mod skills;
pub mod teaching;

pub use dynamics::{PendulumParams, State, Trajectory};
pub use error::{Error, Result};
pub use learner::{ActionVector, FeatureMatrix, FeatureVector, SkillParams};
pub use session::{Group, Session, SessionStore};
pub use skills::SkillId;
pub use teaching::{DemoSet, NoiseModel};
