use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PoseSequence, Rect};

/// Side length substituted for a zero-width or zero-height joint extent.
pub const MIN_EXTENT: f64 = 32.0;
pub const DEFAULT_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
    pub frame_w: u32,
    pub frame_h: u32,
}

impl CropBox {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x1, self.y1, self.x2, self.y2)
    }

    pub fn union(&self, other: &CropBox) -> CropBox {
        let r = self.rect().union(&other.rect());
        CropBox {
            x1: r.x1,
            y1: r.y1,
            x2: r.x2,
            y2: r.y2,
            ..*self
        }
    }

    pub fn is_valid(&self) -> bool {
        0 <= self.x1
            && self.x1 < self.x2
            && self.x2 <= self.frame_w as i64
            && 0 <= self.y1
            && self.y1 < self.y2
            && self.y2 <= self.frame_h as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    PerFrame,
    #[default]
    PerVideoUnion,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CropResult {
    /// One entry per pose frame; `None` where the frame has no valid joints.
    PerFrame(Vec<Option<CropBox>>),
    Union(CropBox),
}

/// Box for one frame: joint extent, padded by `margin` of its size per side,
/// outer edges rounded outward, then clamped to the frame.
pub fn frame_crop(poses: &PoseSequence, frame: usize, margin: f64) -> Option<CropBox> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for s in &poses.frames.get(frame)?.skeletons {
        for uv in s.joints.iter().filter_map(|j| j.uv) {
            if !poses.in_bounds(uv) {
                continue;
            }
            for d in 0..2 {
                lo[d] = lo[d].min(uv[d] as f64);
                hi[d] = hi[d].max(uv[d] as f64);
            }
        }
    }
    if !lo[0].is_finite() {
        return None;
    }
    let limits = [poses.frame_width as i64, poses.frame_height as i64];
    let mut edges = [(0i64, 0i64); 2];
    for d in 0..2 {
        let (mut a, mut b) = (lo[d], hi[d]);
        if b - a <= 0.0 {
            let c = (a + b) / 2.0;
            a = c - MIN_EXTENT / 2.0;
            b = c + MIN_EXTENT / 2.0;
        }
        let pad = margin * (b - a);
        edges[d] = (
            ((a - pad).floor() as i64).clamp(0, limits[d]),
            ((b + pad).ceil() as i64).clamp(0, limits[d]),
        );
    }
    Some(CropBox {
        x1: edges[0].0,
        y1: edges[1].0,
        x2: edges[0].1,
        y2: edges[1].1,
        frame_w: poses.frame_width,
        frame_h: poses.frame_height,
    })
}

pub fn compute_person_crop(poses: &PoseSequence, margin: f64, mode: CropMode) -> Result<CropResult> {
    if !(0.0..=1.0).contains(&margin) {
        return Err(Error::Precondition(format!("margin {margin} outside [0,1]")));
    }
    let boxes: Vec<Option<CropBox>> = (0..poses.len()).map(|t| frame_crop(poses, t, margin)).collect();
    let union = boxes
        .iter()
        .flatten()
        .copied()
        .reduce(|a, b| a.union(&b))
        .ok_or(Error::NoPersonDetected)?;
    Ok(match mode {
        CropMode::PerFrame => CropResult::PerFrame(boxes),
        CropMode::PerVideoUnion => CropResult::Union(union),
    })
}

/// Union box over the whole sequence.
pub fn union_crop(poses: &PoseSequence, margin: f64) -> Result<CropBox> {
    match compute_person_crop(poses, margin, CropMode::PerVideoUnion)? {
        CropResult::Union(b) => Ok(b),
        CropResult::PerFrame(_) => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Joint, PoseFrame, Skeleton};

    fn joint(u: f32, v: f32) -> Joint {
        Joint {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            uv: Some([u, v]),
        }
    }

    fn seq(frames: Vec<Vec<(f32, f32)>>) -> PoseSequence {
        let frames = frames
            .into_iter()
            .map(|js| PoseFrame {
                skeletons: if js.is_empty() {
                    vec![]
                } else {
                    vec![Skeleton {
                        joints: js.into_iter().map(|(u, v)| joint(u, v)).collect(),
                    }]
                },
            })
            .collect();
        PoseSequence::new(2, 100, 100, frames)
    }

    fn tuple(b: CropBox) -> (i64, i64, i64, i64) {
        (b.x1, b.y1, b.x2, b.y2)
    }

    #[test]
    fn worked_example() {
        let p = seq(vec![vec![(10.0, 20.0), (30.0, 60.0)]]);
        assert_eq!(tuple(union_crop(&p, 0.2).unwrap()), (6, 12, 34, 68));
    }

    #[test]
    fn single_joint_expands_to_minimum() {
        let p = seq(vec![vec![(50.0, 50.0)]]);
        assert_eq!(tuple(union_crop(&p, 0.0).unwrap()), (34, 34, 66, 66));
    }

    #[test]
    fn union_of_frames() {
        let p = seq(vec![
            vec![(10.0, 20.0), (30.0, 60.0)],
            vec![],
            vec![(10.0, 20.0), (30.0, 60.0)],
        ]);
        let CropResult::PerFrame(b) = compute_person_crop(&p, 0.2, CropMode::PerFrame).unwrap() else {
            panic!()
        };
        assert_eq!(b[1], None);
        let other = CropBox {
            x1: 40,
            y1: 10,
            x2: 90,
            y2: 50,
            frame_w: 100,
            frame_h: 100,
        };
        assert_eq!(tuple(b[0].unwrap().union(&other)), (6, 10, 90, 68));
    }

    #[test]
    fn clamped_to_frame() {
        let p = seq(vec![vec![(1.0, 2.0), (99.0, 98.0)]]);
        let b = union_crop(&p, 0.5).unwrap();
        assert_eq!(tuple(b), (0, 0, 100, 100));
        assert!(b.is_valid());
    }

    #[test]
    fn no_person() {
        let p = seq(vec![vec![], vec![(150.0, 20.0)]]);
        assert!(matches!(union_crop(&p, 0.2), Err(Error::NoPersonDetected)));
    }
}
