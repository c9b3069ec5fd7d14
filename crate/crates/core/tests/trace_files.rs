use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rppg_core::geometry::{default_roi_specs, LANDMARK_COUNT, ROI_COUNT};
use rppg_core::synth::{generate, SynthConfig};
use rppg_core::trace_io::{
    parse_trace, read_ground_truth, read_trace, trace_to_string, write_ground_truth, write_trace, FrameRecord,
    TraceFile,
};
use rppg_core::Error;

fn random_trace(seed: u64, frames: usize, fps: f64) -> TraceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..frames)
        .map(|_| FrameRecord {
            landmarks: (0..LANDMARK_COUNT)
                .map(|_| [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0), rng.random_range(-80.0..80.0)])
                .collect(),
            roi_rgb: (0..ROI_COUNT).map(|_| [0, 1, 2].map(|_| rng.random_range(0.0..=255.0))).collect(),
        })
        .collect();
    TraceFile::new(fps, default_roi_specs(), frames)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn text_round_trip_is_exact(seed in any::<u64>(), frames in 1usize..4, fps in 5.0f64..120.0) {
        let t = random_trace(seed, frames, fps);
        let text = trace_to_string(&t).unwrap();
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(trace_to_string(&back).unwrap(), text);
    }
}

#[test]
fn synth_trace_is_byte_stable_through_files() {
    let (trace, gt) = generate(&SynthConfig {
        duration_s: 4.0,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.trace.json");
    let b = dir.path().join("b.trace.json");
    write_trace(&trace, &a).unwrap();
    write_trace(&read_trace(&a).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let g = dir.path().join("a.gt.json");
    write_ground_truth(&gt, &g).unwrap();
    assert_eq!(read_ground_truth(&g).unwrap(), gt);
}

#[test]
fn truncated_file_is_a_parse_error() {
    let text = trace_to_string(&random_trace(1, 1, 30.0)).unwrap();
    let err = parse_trace(&text[..text.len() / 2]).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_trace("/nonexistent/clip.trace.json").unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}
