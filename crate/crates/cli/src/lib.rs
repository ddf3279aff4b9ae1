//! Admin commands and the scenario replay driver behind the `leaftutor` binary.

pub mod replay;
pub mod scenario;

pub use replay::{replay, replay_file, ReplayError, ReplayReport, StepReport, Verdict};
pub use scenario::{LoadedScenario, Scenario, ScenarioInvalid};
