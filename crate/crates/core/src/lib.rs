//! Toolkit for measuring video-streaming QoE.
//!
//! The pipeline runs from HAR captures (or an emulated network) to segment
//! timelines, stall reports and P.1203-style quality scores, then into a
//! scaled integer dataset that feeds MOS regression models trained on five
//! network KPIs.

pub mod dataset;
pub mod emulator;
pub mod features;
pub mod har;
pub mod learner;
pub mod quality;
pub mod seed;
pub mod stall;

pub use dataset::{CleanDataset, SessionRecord};
pub use emulator::{DirectionSpec, KpiSample, NetworkProfile};
pub use features::{FeatureMatrix, FeatureVector};
pub use har::{HarEntry, SegmentTiming, SessionCapture};
pub use learner::{EvalMetrics, ForestModel, ForestParams, LinearModel};
pub use quality::{QualityScores, ScorerConfig, SegmentMedia};
pub use stall::{StallEvent, StallReport};
