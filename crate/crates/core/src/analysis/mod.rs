//! Fidelity metrics and audits of what an extracted tree says about its
//! oracle: feature effects, subgroup effects, occurrence and model comparison.

mod compare;
mod dependence;
mod fidelity;
mod occurrence;

pub use compare::{compare_models, Comparison, ComparisonRow, FlaggedFeature, ModelEntry, ThresholdRange};
pub use dependence::{
    dependence_report, feature_effect, indicator_regions, prevalence, subgroup_effect, DependenceReport, EffectConfig,
    EffectEstimate, Estimate, Prevalence, Response, SubgroupEntry,
};
pub use fidelity::{fidelity, macro_f1, mean_squared_error, FidelityReport, Metric};
pub use occurrence::{occurrence_report, OccurrenceReport, TreeOccurrence};
