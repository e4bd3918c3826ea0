//! Ranking and classification metrics plus the case-study protocols.

mod metrics;
mod protocols;
mod report;

pub use metrics::{
    concordance_index, cpa_ratio, discontinued_in, f1_at_horizon, f1_score, horizon_interval, ndcg_order, ndcg_tied,
    predicted_discontinuation_order, spearman, top_sales_slice, Concordance, CpaRatio, F1Report, RankedPrediction,
    Truth, F1_HORIZONS,
};
pub use protocols::{
    actual_discontinuation_groups, actual_discontinuation_order, day_ablation_sweep, long_term_case_study, short_term_case_study, AblationRow,
    AblationSweep, LongCaseItem, LongCaseReport, NdcgPoint, RatioSummary, ShortCaseItem, ShortCaseReport, METHOD_CPA,
    METHOD_MODEL, METHOD_SALES,
};
pub use report::{ndcg_plot_csv, reports_csv, serving_day_slice, summary_text, EvalReport, SLICE_ALL, SLICE_TOP_SALES};
