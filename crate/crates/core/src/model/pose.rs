use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Image-space position in pixels; `None` when the sensor flagged it missing.
    pub uv: Option<[f32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseFrame {
    pub skeletons: Vec<Skeleton>,
}

/// Per-frame skeletons for one clip or stitched video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence {
    pub joint_count: usize,
    pub frame_width: u32,
    pub frame_height: u32,
    pub persons_per_frame: Vec<usize>,
    pub frames: Vec<PoseFrame>,
}

impl PoseSequence {
    pub fn new(joint_count: usize, frame_width: u32, frame_height: u32, frames: Vec<PoseFrame>) -> Self {
        let persons_per_frame = frames.iter().map(|f| f.skeletons.len()).collect();
        PoseSequence {
            joint_count,
            frame_width,
            frame_height,
            persons_per_frame,
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// True when `(u,v)` lies inside the declared frame.
    pub fn in_bounds(&self, uv: [f32; 2]) -> bool {
        uv[0].is_finite()
            && uv[1].is_finite()
            && uv[0] >= 0.0
            && uv[1] >= 0.0
            && uv[0] < self.frame_width as f32
            && uv[1] < self.frame_height as f32
    }

    pub fn check(&self) -> Result<()> {
        if self.persons_per_frame.len() != self.frames.len() {
            return Err(Error::Invalid(format!(
                "persons_per_frame has {} entries for {} frames",
                self.persons_per_frame.len(),
                self.frames.len()
            )));
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.skeletons.len() != self.persons_per_frame[t] {
                return Err(Error::Invalid(format!(
                    "frame {t}: {} skeletons, persons_per_frame says {}",
                    frame.skeletons.len(),
                    self.persons_per_frame[t]
                )));
            }
            for (p, skel) in frame.skeletons.iter().enumerate() {
                if skel.joints.len() != self.joint_count {
                    return Err(Error::Invalid(format!(
                        "frame {t} person {p}: {} joints, expected {}",
                        skel.joints.len(),
                        self.joint_count
                    )));
                }
                for (j, joint) in skel.joints.iter().enumerate() {
                    if let Some(uv) = joint.uv {
                        if !self.in_bounds(uv) {
                            return Err(Error::Invalid(format!(
                                "frame {t} person {p} joint {j}: 2D position {uv:?} outside {}x{} and not flagged missing",
                                self.frame_width, self.frame_height
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Concatenates sequences that share joint layout and frame size.
    pub fn concat(parts: &[PoseSequence]) -> Result<PoseSequence> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Precondition("no pose sequences to concatenate".into()))?;
        let mut frames = Vec::new();
        for p in parts {
            if p.joint_count != first.joint_count
                || p.frame_width != first.frame_width
                || p.frame_height != first.frame_height
            {
                return Err(Error::Invalid(
                    "pose sequences differ in joint layout or frame size".into(),
                ));
            }
            frames.extend(p.frames.iter().cloned());
        }
        Ok(PoseSequence::new(
            first.joint_count,
            first.frame_width,
            first.frame_height,
            frames,
        ))
    }

    pub fn load(path: &Path) -> Result<PoseSequence> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let seq: PoseSequence = serde_json::from_str(&text)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        seq.check()?;
        Ok(seq)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
