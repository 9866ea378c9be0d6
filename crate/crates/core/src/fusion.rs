//! Boosting appearance detections with overlapping motion detections.
//!
//! For each appearance box and each class `c`, the motion box with the
//! largest IoU is found (ties go to the higher class-`c` motion score, then
//! to the earlier box). If that IoU is strictly above `tau`, the class score
//! becomes `s_c + s_c(motion) * IoU`. Motion boxes are never emitted, and one
//! motion box may boost any number of appearance boxes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DetectionBox, VideoDetections};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("tau must lie in [0, 1], got {0}")]
    BadTau(f64),
    #[error("appearance boxes have {appearance} classes but motion boxes have {motion}")]
    ClassMismatch { appearance: usize, motion: usize },
    #[error("video {appearance:?} paired with motion stream for {motion:?}")]
    VideoMismatch { appearance: String, motion: String },
    #[error("video {video:?}: appearance has {appearance} frames, motion has {motion}")]
    FrameCountMismatch {
        video: String,
        appearance: usize,
        motion: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Minimum IoU (exclusive) for a motion box to boost an appearance box.
    pub tau: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { tau: 0.3 }
    }
}

impl FusionConfig {
    pub fn new(tau: f64) -> Result<Self, FusionError> {
        let cfg = Self { tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if (0.0..=1.0).contains(&self.tau) {
            Ok(())
        } else {
            Err(FusionError::BadTau(self.tau))
        }
    }
}

fn class_count(boxes: &[DetectionBox]) -> Option<usize> {
    boxes.first().map(DetectionBox::num_classes)
}

/// Fuses the detections of one frame.
pub fn fuse_frame(
    appearance: &[DetectionBox],
    motion: &[DetectionBox],
    cfg: &FusionConfig,
) -> Result<Vec<DetectionBox>, FusionError> {
    cfg.validate()?;
    let num_classes = match class_count(appearance) {
        Some(c) => c,
        None => return Ok(Vec::new()),
    };
    for d in appearance.iter().chain(motion) {
        if d.num_classes() != num_classes {
            return Err(FusionError::ClassMismatch {
                appearance: num_classes,
                motion: d.num_classes(),
            });
        }
    }

    let mut overlaps = vec![0.0; motion.len()];
    let fused = appearance
        .iter()
        .map(|app| {
            for (o, m) in overlaps.iter_mut().zip(motion) {
                *o = app.bbox.iou(&m.bbox);
            }
            let raw = app.raw_scores.clone().unwrap_or_else(|| app.scores.clone());
            let scores = (0..num_classes)
                .map(|c| {
                    let s = app.scores[c];
                    match best_motion(&overlaps, motion, c) {
                        Some((j, ov)) if ov > cfg.tau => s + motion[j].scores[c] * ov,
                        _ => s,
                    }
                })
                .collect();
            DetectionBox {
                bbox: app.bbox,
                scores,
                raw_scores: Some(raw),
            }
        })
        .collect();
    Ok(fused)
}

/// Index and IoU of the best-overlapping motion box for class `c`.
fn best_motion(overlaps: &[f64], motion: &[DetectionBox], c: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &ov) in overlaps.iter().enumerate() {
        let better = match best {
            None => true,
            Some((b, bov)) => ov > bov || (ov == bov && motion[j].scores[c] > motion[b].scores[c]),
        };
        if better {
            best = Some((j, ov));
        }
    }
    best
}

/// Frame-wise [`fuse_frame`] over a whole video.
pub fn fuse_video(
    appearance: &VideoDetections,
    motion: &VideoDetections,
    cfg: &FusionConfig,
) -> Result<VideoDetections, FusionError> {
    if appearance.video_id != motion.video_id {
        return Err(FusionError::VideoMismatch {
            appearance: appearance.video_id.clone(),
            motion: motion.video_id.clone(),
        });
    }
    if appearance.num_frames() != motion.num_frames() {
        return Err(FusionError::FrameCountMismatch {
            video: appearance.video_id.clone(),
            appearance: appearance.num_frames(),
            motion: motion.num_frames(),
        });
    }
    let frames = appearance
        .frames
        .iter()
        .zip(&motion.frames)
        .map(|(a, m)| fuse_frame(a, m, cfg))
        .collect::<Result<_, _>>()?;
    Ok(VideoDetections::new(appearance.video_id.clone(), frames))
}
