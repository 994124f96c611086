//! Agreement metrics (MAE, RMSE, Pearson, BHS grade, Bland-Altman), evaluation
//! reports and the cross-subject / per-subject protocol driver.

mod export;
mod metrics;
mod protocol;
mod report;

pub use export::{bland_altman_csv, error_histogram_csv, write_protocol_outputs};
pub use metrics::{
    bhs_grade, bland_altman, error_mean_sd, grade_from_fractions, mae, pearson, rmse, BhsGrade, BlandAltman,
    Pearson, BHS_TABLE,
};
pub use protocol::{check_disjoint, fold_seed, run_protocol, FoldOutcome, Protocol, ProtocolOptions, ProtocolRun};
pub use report::{
    BeatPair, Columns, EvalReport, FoldStatus, ProtocolReport, ReportMeta, TargetMetrics, WindowAggregate, LOA_SD,
    P_VALUE_TEST,
};
