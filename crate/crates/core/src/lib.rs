//! Curation and rendering of raw source-code corpora into sentinel-token
//! training documents.
//!
//! Each module owns one stage: license assignment, quality filters,
//! near-deduplication, decontamination, redaction, issue/PR structure rules,
//! notebook conversion, rendering, and sampling. [`pipeline`] wires them into
//! per-source stage chains.

pub mod decontam;
pub mod dedup;
pub mod filters;
pub mod issues;
pub mod languages;
pub mod license;
pub mod model;
pub mod notebooks;
pub mod pipeline;
pub mod redact;
pub mod render;
pub mod rng;
pub mod sampling;
pub mod stackexchange;
pub mod text;
