use rppg_core::pipeline::{estimate, estimate_variant, PipelineConfig, Variant};
use rppg_core::rppg::Method;
use rppg_core::synth::{generate, Preset, SynthConfig};
use rppg_core::trace_io::{trace_to_string, TraceFile};
use rppg_core::Error;

fn clip(hr: f64, seed: u64) -> TraceFile {
    generate(&SynthConfig {
        hr_bpm: hr,
        duration_s: 12.0,
        seed,
        ..Default::default()
    })
    .unwrap()
    .0
}

/// Reverses the ROI order in specs and every frame together.
fn reversed_rois(t: &TraceFile) -> TraceFile {
    let mut out = t.clone();
    out.roi_specs.reverse();
    for f in &mut out.frames {
        f.roi_rgb.reverse();
    }
    out
}

#[test]
fn roi_order_does_not_change_results() {
    let t = clip(66.0, 3);
    let r = reversed_rois(&t);
    let cfg = PipelineConfig::default();
    assert_eq!(estimate(&t, &cfg).unwrap().hr, estimate(&r, &cfg).unwrap().hr);
    let a = estimate_variant(&t, &cfg, Variant::SroiBp).unwrap().hr_bpm;
    let b = estimate_variant(&r, &cfg, Variant::SroiBp).unwrap().hr_bpm;
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn synth_is_deterministic_per_seed() {
    let cfg = SynthConfig::preset(Preset::Motion, 80.0, 17);
    let a = trace_to_string(&generate(&cfg).unwrap().0).unwrap();
    let b = trace_to_string(&generate(&cfg).unwrap().0).unwrap();
    assert_eq!(a, b);
    let other = SynthConfig::preset(Preset::Motion, 80.0, 18);
    assert_ne!(a, trace_to_string(&generate(&other).unwrap().0).unwrap());
}

#[test]
fn every_variant_reads_a_clean_clip() {
    let t = clip(90.0, 4);
    for m in [Method::Pos, Method::Pbv, Method::Omit, Method::Green] {
        let cfg = PipelineConfig {
            method: m,
            ..Default::default()
        };
        for v in Variant::ALL {
            let hr = estimate_variant(&t, &cfg, v).unwrap().hr_bpm;
            assert!((hr - 90.0).abs() < 3.0, "{m:?} {v}: {hr}");
        }
    }
}

#[test]
fn fixed_weights_skip_learning() {
    let cfg = PipelineConfig {
        fixed_weights: Some([2.0, 0.0, 0.0]),
        ..Default::default()
    };
    let out = estimate(&clip(70.0, 5), &cfg).unwrap();
    assert_eq!(out.weights, [1.0, 0.0, 0.0]);
    assert!(out.weight_fit.is_none());
}

#[test]
fn constant_motion_is_unrecoverable() {
    use rppg_core::synth::{Axis, MotionEvent};
    let cfg = SynthConfig {
        duration_s: 8.0,
        motion_events: vec![MotionEvent {
            start_s: 1.0,
            duration_s: 6.0,
            axis: Axis::Yaw,
            deg_per_s: 12.0,
        }],
        ..Default::default()
    };
    let (t, _) = generate(&cfg).unwrap();
    let strict = PipelineConfig {
        vel_threshold: 5.0,
        ..Default::default()
    };
    let err = estimate(&t, &strict).unwrap_err();
    assert!(matches!(err.root(), Error::Unrecoverable { .. }), "{err}");
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = PipelineConfig {
        lambda: 0.0,
        ..Default::default()
    };
    assert!(estimate(&clip(70.0, 6), &cfg).is_err());
}
