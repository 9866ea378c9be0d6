//! Second dynamic-programming pass: temporal trimming of action paths.
//!
//! Each box of a path is labelled action or background by maximising
//!
//! ```text
//! sum_t s_{l_t}(b_t) - lambda_l * sum_{t >= 2} psi(l_t, l_{t-1})
//! ```
//!
//! with the Potts penalty `psi = 0` for equal labels and `alpha_c`
//! otherwise. Maximal action runs become tubes, scored by the mean of
//! their top-k augmented class scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionPath, ActionTube, Label, Labelling, VideoDetections};
use crate::pathing::{Linker, PathConfig, PathError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrimError {
    #[error("lambda_l must be finite and non-negative, got {0}")]
    BadLambda(f64),
    #[error("alpha must be finite and non-negative, got {value}")]
    BadAlpha { class: Option<usize>, value: f64 },
    #[error("top_k must be at least 1")]
    ZeroTopK,
    #[error("constant background score must be finite, got {0}")]
    BadBackground(f64),
    #[error("labelling has {labels} entries for a path of {frames} frames")]
    LengthMismatch { labels: usize, frames: usize },
}

/// Unary score of the background label.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundScore {
    /// `max(0, 1 - s_c)` from the pre-fusion class score.
    #[default]
    Complement,
    Constant(f64),
}

/// Which class score serves as the action-label unary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForegroundScore {
    /// Fused score.
    #[default]
    Augmented,
    /// Pre-fusion appearance score.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimConfig {
    pub lambda_l: f64,
    /// Potts penalty for classes without an override.
    pub alpha_default: f64,
    /// Per-class Potts penalties.
    pub alpha: BTreeMap<usize, f64>,
    pub background_score: BackgroundScore,
    pub foreground_score: ForegroundScore,
    /// Number of top box scores averaged into the tube score.
    pub top_k: usize,
}

impl Default for TrimConfig {
    fn default() -> Self {
        Self {
            lambda_l: 1.0,
            alpha_default: 1.0,
            alpha: BTreeMap::new(),
            background_score: BackgroundScore::Complement,
            foreground_score: ForegroundScore::Augmented,
            top_k: 40,
        }
    }
}

impl TrimConfig {
    pub fn alpha_for(&self, class: usize) -> f64 {
        self.alpha
            .get(&class)
            .copied()
            .unwrap_or(self.alpha_default)
    }

    /// Cost of one label switch for `class`.
    pub fn switch_penalty(&self, class: usize) -> f64 {
        self.lambda_l * self.alpha_for(class)
    }

    pub fn validate(&self) -> Result<(), TrimError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_l) {
            return Err(TrimError::BadLambda(self.lambda_l));
        }
        if !ok(self.alpha_default) {
            return Err(TrimError::BadAlpha {
                class: None,
                value: self.alpha_default,
            });
        }
        for (&class, &value) in &self.alpha {
            if !ok(value) {
                return Err(TrimError::BadAlpha {
                    class: Some(class),
                    value,
                });
            }
        }
        if self.top_k == 0 {
            return Err(TrimError::ZeroTopK);
        }
        if let BackgroundScore::Constant(v) = self.background_score {
            if !v.is_finite() {
                return Err(TrimError::BadBackground(v));
            }
        }
        Ok(())
    }

    /// `(action, background)` unaries of every path box.
    pub fn unaries(&self, path: &ActionPath) -> Vec<(f64, f64)> {
        path.nodes
            .iter()
            .map(|n| {
                let fg = match self.foreground_score {
                    ForegroundScore::Augmented => n.score,
                    ForegroundScore::Raw => n.raw_score,
                };
                let bg = match self.background_score {
                    BackgroundScore::Complement => (1.0 - n.raw_score).max(0.0),
                    BackgroundScore::Constant(v) => v,
                };
                (fg, bg)
            })
            .collect()
    }
}

/// Trimming objective of `labels` on `path`.
pub fn labelling_objective(path: &ActionPath, labels: &[Label], cfg: &TrimConfig) -> f64 {
    let unary: f64 = cfg
        .unaries(path)
        .iter()
        .zip(labels)
        .map(|(&(fg, bg), l)| match l {
            Label::Action => fg,
            Label::Background => bg,
        })
        .sum();
    let switches = labels.windows(2).filter(|w| w[0] != w[1]).count();
    unary - cfg.switch_penalty(path.class_id) * switches as f64
}

/// Optimal action/background labelling of a path.
///
/// Among equally good labellings the one that says "action" at the first
/// frame where they differ wins. To get that, values are accumulated from
/// the end of the path and the labelling is read off front to back.
pub fn trim_path(path: &ActionPath, cfg: &TrimConfig) -> Result<Labelling, TrimError> {
    cfg.validate()?;
    let unaries = cfg.unaries(path);
    let penalty = cfg.switch_penalty(path.class_id);
    let n = unaries.len();
    if n == 0 {
        return Ok(Labelling {
            class_id: path.class_id,
            labels: Vec::new(),
        });
    }

    // suffix[t] = best objective of frames t.. given (action, background) at t
    let mut suffix = vec![(0.0, 0.0); n];
    suffix[n - 1] = unaries[n - 1];
    for t in (0..n - 1).rev() {
        let (na, nb) = suffix[t + 1];
        let (fg, bg) = unaries[t];
        suffix[t] = (fg + na.max(nb - penalty), bg + nb.max(na - penalty));
    }

    let mut labels = Vec::with_capacity(n);
    let (a0, b0) = suffix[0];
    let mut current = if a0 >= b0 {
        Label::Action
    } else {
        Label::Background
    };
    labels.push(current);
    for &(na, nb) in &suffix[1..] {
        let (via_action, via_background) = match current {
            Label::Action => (na, nb - penalty),
            Label::Background => (na - penalty, nb),
        };
        current = if via_action >= via_background {
            Label::Action
        } else {
            Label::Background
        };
        labels.push(current);
    }
    Ok(Labelling {
        class_id: path.class_id,
        labels,
    })
}

/// Mean of the `k` largest values (all of them if there are fewer).
pub fn top_k_mean(scores: &[f64], k: usize) -> f64 {
    if scores.is_empty() || k == 0 {
        return 0.0;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = k.min(sorted.len());
    sorted[..k].iter().sum::<f64>() / k as f64
}

fn tube_from(path: &ActionPath, start: usize, end: usize, top_k: usize) -> ActionTube {
    let nodes = &path.nodes[start..=end];
    let box_scores: Vec<f64> = nodes.iter().map(|n| n.score).collect();
    ActionTube {
        video_id: path.video_id.clone(),
        class_id: path.class_id,
        start_frame: start,
        end_frame: end,
        boxes: nodes.iter().map(|n| n.bbox).collect(),
        score: top_k_mean(&box_scores, top_k),
        box_scores,
    }
}

/// One tube per maximal run of action labels.
pub fn cut_tubes(
    path: &ActionPath,
    labelling: &Labelling,
    cfg: &TrimConfig,
) -> Result<Vec<ActionTube>, TrimError> {
    if labelling.len() != path.len() {
        return Err(TrimError::LengthMismatch {
            labels: labelling.len(),
            frames: path.len(),
        });
    }
    Ok(labelling
        .action_runs()
        .into_iter()
        .map(|(s, e)| tube_from(path, s, e, cfg.top_k))
        .collect())
}

/// The whole path as a single tube, skipping the trimming pass.
pub fn untrimmed_tube(path: &ActionPath, cfg: &TrimConfig) -> Option<ActionTube> {
    (!path.is_empty()).then(|| tube_from(path, 0, path.len() - 1, cfg.top_k))
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Trim(#[from] TrimError),
}

/// Paths, then trimming, for every class of a fused video. Tubes come out
/// ordered by class id, then extraction order, then start frame.
pub fn build_tubes(
    video: &VideoDetections,
    path_cfg: &PathConfig,
    trim_cfg: &TrimConfig,
) -> Result<Vec<ActionTube>, BuildError> {
    build_with(video, path_cfg, trim_cfg, true)
}

/// Single-pass baseline: every extracted path is emitted as one full-length
/// tube.
pub fn build_untrimmed_tubes(
    video: &VideoDetections,
    path_cfg: &PathConfig,
    trim_cfg: &TrimConfig,
) -> Result<Vec<ActionTube>, BuildError> {
    build_with(video, path_cfg, trim_cfg, false)
}

fn build_with(
    video: &VideoDetections,
    path_cfg: &PathConfig,
    trim_cfg: &TrimConfig,
    trim: bool,
) -> Result<Vec<ActionTube>, BuildError> {
    path_cfg.validate()?;
    trim_cfg.validate()?;
    let num_classes = match video.num_classes() {
        Some(c) => c,
        None => return Ok(Vec::new()),
    };
    let linker = Linker::new(video);
    let mut tubes = Vec::new();
    for class in 0..num_classes {
        for path in linker.extract_paths(class, path_cfg)? {
            if trim {
                let labelling = trim_path(&path, trim_cfg)?;
                tubes.extend(cut_tubes(&path, &labelling, trim_cfg)?);
            } else {
                tubes.extend(untrimmed_tube(&path, trim_cfg));
            }
        }
    }
    Ok(tubes)
}

/// Trims already-linked paths into tubes, keeping input order.
pub fn trim_paths(paths: &[ActionPath], cfg: &TrimConfig) -> Result<Vec<ActionTube>, TrimError> {
    let mut tubes = Vec::new();
    for path in paths {
        let labelling = trim_path(path, cfg)?;
        tubes.extend(cut_tubes(path, &labelling, cfg)?);
    }
    Ok(tubes)
}
