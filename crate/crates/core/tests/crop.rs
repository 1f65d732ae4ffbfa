use adlforge_core::model::{Joint, PoseFrame, PoseSequence, Skeleton};
use adlforge_core::video::{compute_person_crop, frame_crop, union_crop, CropMode, CropResult, MIN_EXTENT};
use proptest::prelude::*;

fn joint(uv: Option<[f32; 2]>) -> Joint {
    Joint { x: 0.0, y: 0.0, z: 0.0, uv }
}

fn one_frame(w: u32, h: u32, skeletons: Vec<Vec<Option<[f32; 2]>>>) -> PoseSequence {
    let joints = skeletons.first().map_or(0, Vec::len);
    let frame = PoseFrame {
        skeletons: skeletons
            .into_iter()
            .map(|js| Skeleton { joints: js.into_iter().map(joint).collect() })
            .collect(),
    };
    PoseSequence::new(joints, w, h, vec![frame])
}

type Frame = (u32, u32, f64, Vec<Vec<Option<[f32; 2]>>>);

/// Joint coordinates may fall outside the frame or be missing entirely.
fn frame_strategy() -> impl Strategy<Value = Frame> {
    (16u32..640, 16u32..480, 0.0f64..=1.0).prop_flat_map(|(w, h, margin)| {
        let uv = prop_oneof![
            8 => (0.0f32..w as f32, 0.0f32..h as f32).prop_map(|(u, v)| Some([u, v])),
            1 => (-50.0f32..w as f32 + 50.0, -50.0f32..h as f32 + 50.0).prop_map(|(u, v)| Some([u, v])),
            1 => Just(None),
        ];
        let skeleton = prop::collection::vec(uv, 1..26);
        (Just(w), Just(h), Just(margin), prop::collection::vec(skeleton, 0..3))
    })
}

fn in_bounds(uv: [f32; 2], w: u32, h: u32) -> bool {
    uv[0] >= 0.0 && uv[1] >= 0.0 && uv[0] < w as f32 && uv[1] < h as f32
}

/// Straight-line reference for one axis.
fn oracle_axis(values: &[f64], margin: f64, limit: i64) -> (i64, i64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - MIN_EXTENT / 2.0, lo + MIN_EXTENT / 2.0) };
    let pad = margin * (hi - lo);
    let a = ((lo - pad).floor() as i64).max(0).min(limit);
    let b = ((hi + pad).ceil() as i64).max(0).min(limit);
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn crop_properties((w, h, margin, skeletons) in frame_strategy()) {
        let visible: Vec<[f32; 2]> = skeletons
            .iter()
            .flatten()
            .flatten()
            .copied()
            .filter(|uv| in_bounds(*uv, w, h))
            .collect();
        let poses = one_frame(w, h, skeletons);
        let got = frame_crop(&poses, 0, margin);
        if visible.is_empty() {
            prop_assert!(got.is_none());
            prop_assert!(union_crop(&poses, margin).is_err());
            return Ok(());
        }
        let b = got.expect("visible joints give a box");
        prop_assert!(b.is_valid(), "{b:?}");
        prop_assert_eq!((b.frame_w, b.frame_h), (w, h));
        for uv in &visible {
            prop_assert!(b.x1 as f32 <= uv[0] && uv[0] <= b.x2 as f32);
            prop_assert!(b.y1 as f32 <= uv[1] && uv[1] <= b.y2 as f32);
        }
        let us: Vec<f64> = visible.iter().map(|uv| uv[0] as f64).collect();
        let vs: Vec<f64> = visible.iter().map(|uv| uv[1] as f64).collect();
        prop_assert_eq!((b.x1, b.x2), oracle_axis(&us, margin, w as i64));
        prop_assert_eq!((b.y1, b.y2), oracle_axis(&vs, margin, h as i64));
        // More margin never shrinks the box.
        let wider = frame_crop(&poses, 0, (margin + 0.1).min(1.0)).unwrap();
        prop_assert!(wider.x1 <= b.x1 && wider.y1 <= b.y1 && wider.x2 >= b.x2 && wider.y2 >= b.y2);
        prop_assert_eq!(union_crop(&poses, margin).unwrap(), b);
    }
}

#[test]
fn worked_example() {
    let poses = one_frame(100, 100, vec![vec![Some([10.0, 20.0]), Some([30.0, 60.0])]]);
    let b = union_crop(&poses, 0.2).unwrap();
    assert_eq!((b.x1, b.y1, b.x2, b.y2), (6, 12, 34, 68));
}

#[test]
fn union_covers_every_frame() {
    let frames = [[10.0f32, 10.0], [50.0, 40.0], [80.0, 90.0]]
        .iter()
        .map(|uv| PoseFrame { skeletons: vec![Skeleton { joints: vec![joint(Some(*uv)), joint(Some([uv[0] + 5.0, uv[1] + 5.0]))] }] })
        .collect();
    let poses = PoseSequence::new(2, 100, 100, frames);
    let CropResult::PerFrame(per) = compute_person_crop(&poses, 0.1, CropMode::PerFrame).unwrap() else {
        panic!("per-frame result expected");
    };
    let u = union_crop(&poses, 0.1).unwrap();
    for b in per.into_iter().flatten() {
        assert!(u.x1 <= b.x1 && u.y1 <= b.y1 && u.x2 >= b.x2 && u.y2 >= b.y2);
    }
    assert!(compute_person_crop(&poses, 1.5, CropMode::PerFrame).is_err());
}
