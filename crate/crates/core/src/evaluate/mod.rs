//! Video-level identity decisions, accuracy tables, exact McNemar tests and
//! the evaluation report.

mod decide;
mod mcnemar;
mod report;

pub use decide::{
    decide_threshold, decide_video, decide_vote, video_accuracy, DecisionRule, VideoDecision,
};
pub use mcnemar::{
    discordant_counts, mcnemar_exact, mcnemar_p, mcnemar_p_exact, pairwise_significance,
    McNemarResult, SignificanceMatrix, DEFAULT_ALPHA,
};
pub use report::{write_report_csv, MethodReport, Report, VideoAccuracySummary};
