//! First dynamic-programming pass: class-specific action paths.
//!
//! A path picks one box in every frame and is scored by
//!
//! ```text
//! E(p) = sum_t s*_c(b_t) + lambda_o * sum_{t >= 2} IoU(b_t, b_{t-1})
//! ```
//!
//! [`best_path`] maximises `E` exactly with a Viterbi recursion in
//! `O(T * N^2)`. [`extract_paths`] repeats it, removing the boxes of every
//! path found, to recover several co-occurring instances of one class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionPath, PathNode, VideoDetections};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("lambda_o must be finite and non-negative, got {0}")]
    BadLambda(f64),
    #[error("max_paths_per_class must be at least 1")]
    ZeroMaxPaths,
    #[error("score floor must be finite, got {0}")]
    BadScoreFloor(f64),
    #[error("video {video:?} has no candidate boxes for class {class} in frame {frame}")]
    EmptyFrame {
        video: String,
        class: usize,
        /// 1-based, as in files.
        frame: usize,
    },
    #[error("video {video:?} has no frames")]
    NoFrames { video: String },
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
}

/// What to do when a frame has no candidate boxes before any path exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyFramePolicy {
    /// Fail with [`PathError::EmptyFrame`].
    Stop,
    /// The class yields no paths for this video.
    #[default]
    SkipClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    /// Weight of the overlap term.
    pub lambda_o: f64,
    pub max_paths_per_class: usize,
    pub empty_frame_policy: EmptyFramePolicy,
    /// Boxes whose class score is below the floor never join a path.
    pub score_floor: Option<f64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            lambda_o: 1.0,
            max_paths_per_class: 10,
            empty_frame_policy: EmptyFramePolicy::SkipClass,
            score_floor: None,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<(), PathError> {
        if !self.lambda_o.is_finite() || self.lambda_o < 0.0 {
            return Err(PathError::BadLambda(self.lambda_o));
        }
        if self.max_paths_per_class == 0 {
            return Err(PathError::ZeroMaxPaths);
        }
        if let Some(f) = self.score_floor {
            if !f.is_finite() {
                return Err(PathError::BadScoreFloor(f));
            }
        }
        Ok(())
    }
}

/// Energy of a path: summed class scores plus `lambda_o` times the IoU of
/// every pair of consecutive boxes.
pub fn path_energy(path: &ActionPath, lambda_o: f64) -> f64 {
    let unary: f64 = path.nodes.iter().map(|n| n.score).sum();
    let pairwise: f64 = path
        .nodes
        .windows(2)
        .map(|w| w[1].bbox.iou(&w[0].bbox))
        .sum();
    unary + lambda_o * pairwise
}

/// Links the boxes of one video. Holds the class-independent IoU matrices of
/// every adjacent frame pair, so one linker serves all classes.
pub struct Linker<'a> {
    video: &'a VideoDetections,
    /// `overlaps[t][i * n_{t+1} + j]` = IoU(frame t box i, frame t+1 box j).
    overlaps: Vec<Vec<f64>>,
}

impl<'a> Linker<'a> {
    pub fn new(video: &'a VideoDetections) -> Self {
        let overlaps = video
            .frames
            .windows(2)
            .map(|w| {
                let (prev, next) = (&w[0], &w[1]);
                let mut m = Vec::with_capacity(prev.len() * next.len());
                for a in prev {
                    m.extend(next.iter().map(|b| a.bbox.iou(&b.bbox)));
                }
                m
            })
            .collect();
        Self { video, overlaps }
    }

    pub fn video(&self) -> &VideoDetections {
        self.video
    }

    fn check_class(&self, class: usize) -> Result<(), PathError> {
        if self.video.frames.is_empty() {
            return Err(PathError::NoFrames {
                video: self.video.video_id.clone(),
            });
        }
        match self.video.num_classes() {
            Some(n) if class >= n => Err(PathError::ClassOutOfRange {
                class,
                num_classes: n,
            }),
            _ => Ok(()),
        }
    }

    /// Candidate mask for `class`: every box, minus those under the floor.
    fn initial_pool(&self, class: usize, cfg: &PathConfig) -> Vec<Vec<bool>> {
        self.video
            .frames
            .iter()
            .map(|dets| {
                dets.iter()
                    .map(|d| cfg.score_floor.is_none_or(|f| d.scores[class] >= f))
                    .collect()
            })
            .collect()
    }

    fn first_empty(pool: &[Vec<bool>]) -> Option<usize> {
        pool.iter().position(|alive| !alive.iter().any(|&a| a))
    }

    /// The maximum-energy path for `class`.
    pub fn best_path(&self, class: usize, cfg: &PathConfig) -> Result<ActionPath, PathError> {
        cfg.validate()?;
        self.check_class(class)?;
        let pool = self.initial_pool(class, cfg);
        if let Some(t) = Self::first_empty(&pool) {
            return Err(self.empty_frame(class, t));
        }
        let picks = self.viterbi(class, &pool, cfg.lambda_o);
        Ok(self.make_path(class, &picks, cfg.lambda_o))
    }

    /// Greedy multi-path extraction: best path, remove its boxes, repeat
    /// until a frame runs out of boxes or the per-class cap is reached.
    pub fn extract_paths(
        &self,
        class: usize,
        cfg: &PathConfig,
    ) -> Result<Vec<ActionPath>, PathError> {
        cfg.validate()?;
        self.check_class(class)?;
        let mut pool = self.initial_pool(class, cfg);
        if let Some(t) = Self::first_empty(&pool) {
            return match cfg.empty_frame_policy {
                EmptyFramePolicy::SkipClass => Ok(Vec::new()),
                EmptyFramePolicy::Stop => Err(self.empty_frame(class, t)),
            };
        }
        let mut paths = Vec::new();
        while paths.len() < cfg.max_paths_per_class {
            let picks = self.viterbi(class, &pool, cfg.lambda_o);
            for (t, &i) in picks.iter().enumerate() {
                pool[t][i] = false;
            }
            paths.push(self.make_path(class, &picks, cfg.lambda_o));
            if Self::first_empty(&pool).is_some() {
                break;
            }
        }
        Ok(paths)
    }

    fn empty_frame(&self, class: usize, t: usize) -> PathError {
        PathError::EmptyFrame {
            video: self.video.video_id.clone(),
            class,
            frame: t + 1,
        }
    }

    /// Box index per frame of the optimal path over the alive boxes.
    /// Every frame must have at least one alive box. Ties go to the lower
    /// box index, both for predecessors and for the final box.
    fn viterbi(&self, class: usize, alive: &[Vec<bool>], lambda_o: f64) -> Vec<usize> {
        let frames = &self.video.frames;
        let num_frames = frames.len();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(num_frames);
        let mut cum: Vec<f64> = frames[0]
            .iter()
            .zip(&alive[0])
            .map(|(d, &a)| {
                if a {
                    d.scores[class]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        back.push(vec![usize::MAX; cum.len()]);

        for t in 1..num_frames {
            let n_next = frames[t].len();
            let overlap = &self.overlaps[t - 1];
            let mut next = vec![f64::NEG_INFINITY; n_next];
            let mut ptr = vec![usize::MAX; n_next];
            for (j, d) in frames[t].iter().enumerate() {
                if !alive[t][j] {
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                let mut arg = usize::MAX;
                for (i, &prev) in cum.iter().enumerate() {
                    if !alive[t - 1][i] {
                        continue;
                    }
                    let v = prev + lambda_o * overlap[i * n_next + j];
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                next[j] = best + d.scores[class];
                ptr[j] = arg;
            }
            cum = next;
            back.push(ptr);
        }

        let mut last = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for (j, &v) in cum.iter().enumerate() {
            if alive[num_frames - 1][j] && (last == usize::MAX || v > best) {
                best = v;
                last = j;
            }
        }
        let mut picks = vec![0; num_frames];
        picks[num_frames - 1] = last;
        for t in (1..num_frames).rev() {
            picks[t - 1] = back[t][picks[t]];
        }
        picks
    }

    fn make_path(&self, class: usize, picks: &[usize], lambda_o: f64) -> ActionPath {
        let nodes = picks
            .iter()
            .zip(&self.video.frames)
            .map(|(&i, dets)| {
                let d = &dets[i];
                PathNode {
                    bbox: d.bbox,
                    score: d.scores[class],
                    raw_score: d.raw_score(class),
                    box_index: i,
                }
            })
            .collect();
        let mut path = ActionPath {
            video_id: self.video.video_id.clone(),
            class_id: class,
            nodes,
            energy: 0.0,
        };
        path.energy = path_energy(&path, lambda_o);
        path
    }
}

/// Convenience wrapper over [`Linker::best_path`].
pub fn best_path(
    video: &VideoDetections,
    class: usize,
    cfg: &PathConfig,
) -> Result<ActionPath, PathError> {
    Linker::new(video).best_path(class, cfg)
}

/// Convenience wrapper over [`Linker::extract_paths`].
pub fn extract_paths(
    video: &VideoDetections,
    class: usize,
    cfg: &PathConfig,
) -> Result<Vec<ActionPath>, PathError> {
    Linker::new(video).extract_paths(class, cfg)
}
