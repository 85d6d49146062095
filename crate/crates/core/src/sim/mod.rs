//! Quasi-static grasp execution and the evaluation harness.

mod eval;
mod simulate;
mod svg;

pub use eval::{
    emit_config, emit_report, emit_sweep, emit_timing, mean_ci95, read_report, run_trials, summary_csv, sweep_csv,
    threshold_sweep, trial_dir, trial_seed, ObjectSummary, Overall, Predictor, SweepReport, SweepRow, SweepTrial,
    Timing, TrialRecord, TrialReport, REPORT_FILE, SUMMARY_FILE, SWEEP_CSV_FILE, SWEEP_JSON_FILE, TENSOR_FILE,
    TIMING_FILE,
};
pub use simulate::{simulate_grasp, simulate_proposal, ClosureContacts, SimOutcome, SimParams, SimResult};
