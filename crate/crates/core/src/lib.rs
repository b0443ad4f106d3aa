//! Cooperative two-drone medical delivery under triage escalation.
//!
//! The crate bundles a deterministic grid simulator ([`world`]), the patient
//! survival and escalation model ([`triage`]), per-agent observations
//! ([`sensing`]), the reward model ([`incentives`]), a from-scratch CTDE deep
//! Q-learner ([`learner`]), heuristic baselines ([`schedulers`]) and the
//! evaluation harness ([`evalkit`]).

pub mod config;
pub mod error;
pub mod evalkit;
pub mod incentives;
pub mod learner;
pub mod schedulers;
pub mod seed;
pub mod sensing;
pub mod triage;
pub mod world;

pub use config::{RunConfig, SimConfig};
pub use error::{Error, Result};
pub use learner::{QNetwork, TrainingLog};
pub use sensing::AblationMask;
pub use triage::{Patient, TriageLevel};
pub use world::{Action, Cell, Event, GridMap, StepOutcome, World};
