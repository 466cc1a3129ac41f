//! Per-source stage chains, configuration, reports and manifests.

mod config;
mod report;
mod run;
mod standalone;

pub use config::{
    validate_config, ConfigError, Diagnostic, Inputs, PiiPolicy, PipelineConfig, Resources, Source, StageToggles,
    Stages,
};
pub use report::{format_bytes, stats, RunReport, StageReport};
pub use run::{
    execute, run, CompositionSummary, InputDigest, Manifest, Reject, RunError, RunOutput, DOCUMENTS_FILE,
    MANIFEST_FILE, PARTIAL_SUFFIX, REJECTS_FILE, REPORT_FILE, UNSCORED_FILE,
};
pub use standalone::{dedup_file, render_file, RenderSummary};
