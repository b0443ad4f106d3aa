//! Episode runner, metrics, scenario suite and exports.

pub mod export;
pub mod metrics;
pub mod runner;
pub mod scenarios;

pub use export::{
    export_trajectory_svg, read_episodes_csv, trajectory_svg, write_ablation_csv, write_episodes_csv, write_stress_csv,
    EpisodeRow,
};
pub use metrics::{
    jain_index, oracle_from_events, per_class_stats, summarize, triage_efficiency, utilization, ClassStats, Summary,
};
pub use runner::{episode_seed, run_episode, run_episodes, EpisodeRecord, PatientFate, PatientRecord, Policy, Trace};
pub use scenarios::{
    ablation_mask, ablation_suite, stress_grid, AblationRow, AblationTable, Override, Scenario, StressCell, StressGrid,
    ABLATIONS, SCENARIO_NAMES, STRESS_P_FAIL, STRESS_ROWS,
};
