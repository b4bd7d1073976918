//! Simulation harness: synthetic data, evaluation metrics, experiment
//! runners and named scenarios.

pub mod metrics;
pub mod pitfall;
pub mod runners;
pub mod scenarios;
pub mod synthetic;
pub mod table;

pub use metrics::{detection_rates, evaluate, evaluate_frame, robust_adjusted_variance, EvalReport};
pub use pitfall::{svd_pitfall_demo, PitfallReport};
pub use runners::{run_batch_comparison, run_comparison, run_q_sensitivity, CellMeans};
pub use scenarios::{run_scenario, Scenario, ScenarioOptions};
pub use synthetic::{generate, GroundTruth, SyntheticSpec};
pub use table::{Cell, Table};
