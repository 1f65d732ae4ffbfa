//! Synthetic trimmed-clip corpus: flat-colour frames with a moving
//! figure and matching 25-joint skeletons.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::media::{VideoCodec, VideoFrames};
use crate::model::{write_corpus_manifest, ActionTable, ClipRecord, Joint, PoseFrame, PoseSequence, Skeleton};
use crate::video::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub subjects: usize,
    pub cameras: usize,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            subjects: 4,
            cameras: 2,
            width: 96,
            height: 72,
            fps: 10.0,
            min_frames: 20,
            max_frames: 40,
            seed: 7,
        }
    }
}

pub const JOINT_COUNT: usize = 25;

/// Rest pose offsets from the body centre, indexed like the 25-joint
/// Kinect layout (3 head, 7/11 hands, 13/17 knees).
const REST: [(f32, f32); JOINT_COUNT] = [
    (0.0, 2.0),
    (0.0, -6.0),
    (0.0, -16.0),
    (0.0, -20.0),
    (5.0, -14.0),
    (8.0, -7.0),
    (9.0, -1.0),
    (9.0, 1.0),
    (-5.0, -14.0),
    (-8.0, -7.0),
    (-9.0, -1.0),
    (-9.0, 1.0),
    (3.0, 3.0),
    (3.0, 11.0),
    (3.0, 19.0),
    (4.0, 21.0),
    (-3.0, 3.0),
    (-3.0, 11.0),
    (-3.0, 19.0),
    (-4.0, 21.0),
    (0.0, -14.0),
    (9.0, 3.0),
    (8.0, 2.0),
    (-9.0, 3.0),
    (-8.0, 2.0),
];

const ARM_JOINTS: [usize; 10] = [5, 6, 7, 21, 22, 9, 10, 11, 23, 24];

pub fn clip_id(subject: usize, camera: usize, action: u32) -> String {
    format!("S001C{:03}P{:03}R001A{:03}", camera + 1, subject + 1, action)
}

fn skeleton(cx: f32, cy: f32, lift: f32, sway: f32, spec: &SynthSpec) -> Skeleton {
    let joints = REST
        .iter()
        .enumerate()
        .map(|(j, (dx, dy))| {
            let dy = if ARM_JOINTS.contains(&j) { dy - lift } else { *dy };
            let u = (cx + dx + sway).clamp(0.0, spec.width as f32 - 1.0);
            let v = (cy + dy).clamp(0.0, spec.height as f32 - 1.0);
            Joint {
                x: (u - spec.width as f32 / 2.0) / 100.0,
                y: (spec.height as f32 / 2.0 - v) / 100.0,
                z: 3.0,
                uv: Some([u, v]),
            }
        })
        .collect();
    Skeleton { joints }
}

fn render(poses: &PoseSequence, subject: usize, camera: usize, spec: &SynthSpec) -> VideoFrames {
    let bg = if camera.is_multiple_of(2) { Rgb([70, 90, 110]) } else { Rgb([150, 140, 120]) };
    let body = Rgb([200 - 30 * subject as u8 % 200, 60 + 40 * subject as u8 % 190, 90]);
    let frames = poses
        .frames
        .iter()
        .map(|f| {
            let mut img = RgbImage::from_pixel(spec.width, spec.height, bg);
            for y in spec.height * 3 / 4..spec.height {
                for x in 0..spec.width {
                    img.put_pixel(x, y, Rgb([bg[0] / 2, bg[1] / 2, bg[2] / 2]));
                }
            }
            for j in &f.skeletons[0].joints {
                let [u, v] = j.uv.expect("synthetic joints are visible");
                let (u, v) = (u as i64, v as i64);
                for y in (v - 1)..=(v + 1) {
                    for x in (u - 1)..=(u + 1) {
                        if (0..spec.width as i64).contains(&x) && (0..spec.height as i64).contains(&y) {
                            img.put_pixel(x as u32, y as u32, body);
                        }
                    }
                }
            }
            img
        })
        .collect();
    VideoFrames { fps: spec.fps, frames }
}

/// Writes `corpus.jsonl`, `clips/*.adlv` and `poses/*.json` under `dir`:
/// one clip per (subject, camera, action).
pub fn generate_corpus(dir: &Path, actions: &ActionTable, spec: &SynthSpec, codec: &dyn VideoCodec) -> Result<Vec<ClipRecord>> {
    if spec.min_frames == 0 || spec.min_frames > spec.max_frames || spec.subjects == 0 || spec.cameras == 0 {
        return Err(Error::Precondition("invalid synthetic corpus spec".into()));
    }
    for sub in ["clips", "poses"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let jobs: Vec<(usize, usize, u32)> = (0..spec.subjects)
        .flat_map(|s| (0..spec.cameras).flat_map(move |c| actions.ids().into_iter().map(move |a| (s, c, a))))
        .collect();
    let records: Result<Vec<ClipRecord>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(s, c, a))| {
            let id = clip_id(s, c, a);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
            let n = rng.random_range(spec.min_frames..=spec.max_frames);
            let cx = spec.width as f32 * rng.random_range(0.35..0.65);
            let cy = spec.height as f32 * 0.5;
            let amp = rng.random_range(2.0f32..8.0);
            let drift = rng.random_range(-0.3f32..0.3);
            let frames = (0..n)
                .map(|t| {
                    let phase = t as f32 / n as f32 * std::f32::consts::TAU;
                    PoseFrame {
                        skeletons: vec![skeleton(cx + drift * t as f32, cy, amp * phase.sin().abs(), 0.0, spec)],
                    }
                })
                .collect();
            let poses = PoseSequence::new(JOINT_COUNT, spec.width, spec.height, frames);
            let video_path = format!("clips/{id}.adlv");
            let pose_path = format!("poses/{id}.json");
            codec.encode(&dir.join(&video_path), &render(&poses, s, c, spec))?;
            poses.save(&dir.join(&pose_path))?;
            Ok(ClipRecord {
                clip_id: id,
                subject_id: format!("P{:03}", s + 1),
                camera_id: format!("C{:03}", c + 1),
                action_id: a,
                action_label: actions.label(a).expect("id from table").to_string(),
                video_path,
                num_frames: n,
                fps: spec.fps,
                pose_path: Some(pose_path),
            })
        })
        .collect();
    let records = records?;
    write_corpus_manifest(&dir.join("corpus.jsonl"), &records)?;
    Ok(records)
}
