//! End-to-end pipeline runs over synthetic scenarios.

use miff_core::pipeline::{run_pipeline, uniform_baseline, AutoKeyword, AutoOr, PipelineConfig};
use miff_core::profile::SegmentKind;
use miff_core::scenario::{synthesize_scenario, NoiseLevels, ScenarioSpec, SemanticBlock};

fn config(required: f64, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        required_speedup: required,
        seed,
        ..PipelineConfig::default()
    };
    // the default border width (one second at 30 fps) is outsized for these
    // short 10 fps scenarios; keep entry/exit slack proportional
    cfg.graph.border = 5;
    cfg.graph.max_skip = 60;
    cfg
}

#[test]
fn empty_semantics_tracks_uniform_rate() {
    let mut spec = ScenarioSpec::base(1200, 10.0, 101);
    spec.noise = NoiseLevels {
        motion_jitter: 1.5,
        keypoint_jitter: 0.1,
        ..NoiseLevels::default()
    };
    let (stream, _) = synthesize_scenario(&spec).unwrap();
    let out = run_pipeline(&stream, &config(10.0, 7), None).unwrap();
    assert!(out.report.retention.degenerate);
    let baseline = uniform_baseline(stream.len(), 10.0);
    let diff = (out.selection.selection.len() as f64 - baseline.len() as f64).abs();
    assert!(
        diff / baseline.len() as f64 <= 0.15,
        "selection {} vs uniform {}",
        out.selection.selection.len(),
        baseline.len()
    );
    assert!(
        (out.report.achieved_speedup - 10.0).abs() <= 1.0,
        "achieved {}",
        out.report.achieved_speedup
    );
}

#[test]
fn quarter_semantic_scenario_emphasizes_blocks() {
    // 25% semantic at two intensities: the refinement pushes the strong
    // block to a much lower rate than one flat block would get
    let mut spec = ScenarioSpec::base(2000, 10.0, 55);
    spec.semantic_blocks = vec![
        SemanticBlock {
            start: 600,
            end: 850,
            intensity: 3,
        },
        SemanticBlock {
            start: 850,
            end: 1100,
            intensity: 1,
        },
    ];
    spec.noise = NoiseLevels {
        motion_jitter: 1.0,
        keypoint_jitter: 0.1,
        confidence_jitter: 2.0,
        ..NoiseLevels::default()
    };
    let (stream, _) = synthesize_scenario(&spec).unwrap();
    let out = run_pipeline(&stream, &config(10.0, 3), None).unwrap();

    let semantic: Vec<_> = out
        .report
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Semantic)
        .collect();
    let non_semantic: Vec<_> = out
        .report
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::NonSemantic)
        .collect();
    assert!(!semantic.is_empty());
    for seg in &semantic {
        assert!(
            (seg.speedup as f64) < 10.0,
            "semantic segment at rate {}",
            seg.speedup
        );
    }
    for seg in &non_semantic {
        assert!(
            seg.speedup as f64 >= 10.0,
            "non-semantic segment at rate {}",
            seg.speedup
        );
    }

    // the selection keeps clearly more of the block than uniform sampling
    let scores = &out.scores;
    let baseline = uniform_baseline(stream.len(), 10.0);
    let sum = |sel: &[usize]| -> f64 { sel.iter().map(|&f| scores[f]).sum() };
    assert!(
        sum(&out.selection.selection) > 1.5 * sum(&baseline),
        "selection {} vs baseline {}",
        sum(&out.selection.selection),
        sum(&baseline)
    );
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let mut spec = ScenarioSpec::base(600, 10.0, 20);
    spec.semantic_blocks = vec![SemanticBlock {
        start: 150,
        end: 350,
        intensity: 1,
    }];
    spec.noise.motion_jitter = 1.0;
    let (stream, _) = synthesize_scenario(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg = config(8.0, 99);
    run_pipeline(&stream, &cfg, Some(&out_a)).unwrap();
    run_pipeline(&stream, &cfg, Some(&out_b)).unwrap();
    for name in [
        "scores.json",
        "segments.json",
        "selection.json",
        "pso_trace.json",
        "plan.json",
        "report.json",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap_or_default();
        let b = std::fs::read(out_b.join(name)).unwrap_or_default();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert!(!a.is_empty() || name == "pso_trace.json", "{name} missing");
    }
}

#[test]
fn rendered_scenario_reports_instability() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ScenarioSpec::base(120, 10.0, 31);
    spec.width = 64;
    spec.height = 48;
    spec.track_count = 50;
    spec.noise = NoiseLevels {
        motion_jitter: 2.0,
        raster_noise: 1.0,
        ..NoiseLevels::default()
    };
    spec.raster_dir = Some(dir.path().join("rasters"));
    let (stream, _) = synthesize_scenario(&spec).unwrap();
    let mut cfg = config(4.0, 5);
    cfg.metrics.buffer = Some(5);
    let out_dir = dir.path().join("out");
    let out = run_pipeline(&stream, &cfg, Some(&out_dir)).unwrap();
    let instability = out.report.instability.expect("rasters present");
    assert!(instability.stabilized.is_finite());
    assert!(instability.unstabilized.is_finite());
    assert!(out_dir.join("stabilized").join("out_000000.pgm").exists());
}

#[test]
fn graph_auto_mode_runs_on_small_input() {
    let mut spec = ScenarioSpec::base(300, 10.0, 77);
    spec.semantic_blocks = vec![SemanticBlock {
        start: 100,
        end: 200,
        intensity: 1,
    }];
    spec.noise.motion_jitter = 1.0;
    let (stream, _) = synthesize_scenario(&spec).unwrap();
    let mut cfg = config(5.0, 1);
    cfg.graph.lambdas = AutoOr::Auto(AutoKeyword::Auto);
    cfg.pso.particles = 6;
    cfg.pso.iterations = 5;
    let out = run_pipeline(&stream, &cfg, None).unwrap();
    assert!(out
        .pso_traces
        .iter()
        .any(|t| t.stage == "graph_lambdas"));
    assert!(!out.selection.selection.is_empty());
}
