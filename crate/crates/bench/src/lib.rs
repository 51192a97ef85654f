//! Shared fixtures for the benchmark suite.

use miff_core::scenario::{NoiseLevels, ScenarioSpec, SemanticBlock};
use miff_core::FeatureStream;

/// A mid-sized stream with one strong and one mild block, camera jitter on.
pub fn benchmark_stream(length: usize, seed: u64) -> FeatureStream {
    let mut spec = ScenarioSpec::base(length, 10.0, seed);
    let quarter = length / 4;
    spec.semantic_blocks = vec![
        SemanticBlock {
            start: quarter,
            end: quarter + length / 8,
            intensity: 3,
        },
        SemanticBlock {
            start: 2 * quarter,
            end: 2 * quarter + length / 8,
            intensity: 1,
        },
    ];
    spec.noise = NoiseLevels {
        motion_jitter: 1.0,
        keypoint_jitter: 0.1,
        confidence_jitter: 2.0,
        ..NoiseLevels::default()
    };
    miff_core::scenario::synthesize_scenario(&spec)
        .expect("benchmark scenario")
        .0
}
