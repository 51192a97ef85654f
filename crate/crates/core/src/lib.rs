//! Multi-importance fast-forward for egocentric video feature streams.
//!
//! The pipeline scores frames semantically, segments the smoothed profile
//! into importance levels, assigns per-level integer speed-ups, picks the
//! output frames through weighted skip graphs, stabilizes the resulting
//! chain against interpolated master frames, and evaluates the outcome.
//!
//! The crate operates on pre-extracted per-frame features (detections,
//! tracked keypoints, flow summaries, histograms) in a JSON-Lines format;
//! it never touches encoded video. [`scenario`] generates seeded synthetic
//! streams with ground truth for experiments and tests.

pub mod error;
pub mod features;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod profile;
pub mod pso;
pub mod raster;
pub mod scenario;
pub mod speedup;
pub mod stabilizer;

pub use error::{Error, Result};
pub use features::{Detection, FeatureStream, FrameFeatures, Keypoint, ScoreConfig};
pub use geometry::{Homography, RansacConfig, Rect};
pub use graph::{GraphWeights, SelectionOutcome, TransitionGraph};
pub use metrics::{InstabilityConfig, Retention};
pub use pipeline::{PipelineConfig, PipelineOutput, Report};
pub use profile::{Segment, SegmentKind, SegmentTree, SemanticProfile};
pub use pso::{PsoConfig, PsoResult};
pub use raster::Raster;
pub use scenario::{GroundTruth, MotionScript, MotionStep, NoiseLevels, ScenarioSpec, SemanticBlock};
pub use speedup::{SpeedupProblem, SpeedupSolution};
pub use stabilizer::{PlanAction, PlanEntry, StabilizationPlan, StabilizerConfig};
