//! Configuration, experiment commands and report files.

mod commands;
mod config;
mod report;
pub mod stats;
mod sweep;

pub use commands::{
    cmd_forward, cmd_invert, cmd_recover, kappa_grid_for_scales, load_samples, oracle_residual, recover_samples,
    synthesize, trace_bytes, ForwardDiagnostics, ForwardOutputs, InversionInputs, InvertOutputs, Mode, TraceRow,
    CALIBRATION_DELTA, DENSE_CELL_LIMIT, PW_LMAX, RECOVERY_HEADER, TRACE_HEADER,
};
pub use config::{
    CCal, Calibrate, DataSource, ExperimentConfig, GridConfig, InversionConfig, LambdaGridConfig, NoiseConfig,
    RecoveryConfig,
};
pub use report::{fmt_f64, read_report, report_bytes, write_atomic, ReportRow, ScheduleColumns, REPORT_HEADER};
pub use sweep::{
    cmd_sweep, coefficient_envelope, criterion_name, recovery_test_potential, summary_bytes, CriterionOutcome, Status,
    SweepConfig, SweepOutputs, SUMMARY_HEADER,
};
