//! Belief-space driver-warning planning with a closed-loop traffic
//! simulator.
//!
//! The engine models a distracted driver as a hidden behavior mode, tracks
//! it with a discrete Bayesian filter over warning-conditioned behavior
//! switches, and picks warnings by forward-simulating a decision tree over
//! future scenario states. Two rule-based generators (a time-to-collision
//! scheme and an adaptive stopping-distance scheme) serve as baselines, and
//! a batch harness reproduces the closed-loop evaluation protocol.
//!
//! Modules:
//! - [`state`]: kinematic types, road geometry, collision checks
//! - [`idm`]: the car-following acceleration law
//! - [`policy`]: the driver behavior set and action distributions
//! - [`transition`]: warning-conditioned behavior switching
//! - [`belief`]: the Bayesian behavior filter
//! - [`reward`]: trajectory rewards and warning costs
//! - [`planner`]: the warning search tree and both selection modes
//! - [`baseline`]: TTC and rule-based warning generators
//! - [`sim`]: scenario scripts and the closed-loop episode engine
//! - [`harness`]: seeded sweeps, summaries and reports
//! - [`config`]: the single JSON configuration document
//!
//! Start with the runnable examples (`cargo run --example single_episode`)
//! or the `warnsim` binary for the batch workflows.

pub mod baseline;
pub mod belief;
pub mod config;
pub mod harness;
pub mod idm;
pub mod planner;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod state;
pub mod transition;

pub use belief::Belief;
pub use config::EngineConfig;
pub use planner::{search, select_warning_mdp, select_warning_pomdp, WorldModel};
pub use policy::{PolicyKind, PolicyState};
pub use sim::{build_scenario, episode, EpisodeResult, Method, ScenarioKind};
pub use state::{DriverAction, ScenarioState, VehicleState, Warning};
pub use transition::TransitionModel;
