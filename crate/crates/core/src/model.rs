//! In-memory types shared by every stage of the pipeline.
//!
//! Frame indices are 0-based here. The on-disk format in [`crate::io`] is
//! 1-based and converts at the boundary.

use std::collections::HashSet;

use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("class catalog must not be empty")]
    EmptyCatalog,
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("class name {0:?} is reserved")]
    ReservedClass(String),
    #[error("expected {expected} class scores, found {found}")]
    ScoreLength { expected: usize, found: usize },
    #[error("score {value} for class {class} is negative or not finite")]
    BadScore { class: usize, value: f64 },
    #[error("a video needs at least one frame")]
    NoFrames,
    #[error("tube starts at frame {start} but ends at frame {end}")]
    ReversedRange { start: usize, end: usize },
    #[error("tube spans {expected} frames but carries {found} boxes")]
    BoxCount { expected: usize, found: usize },
    #[error("tube score {0} is not finite")]
    BadTubeScore(f64),
    #[error("class id {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
}

/// Ordered foreground class names. Class ids are positions in the list.
///
/// Background is not a catalog entry; it is represented by
/// [`Label::Background`] during trimming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    names: Vec<String>,
}

impl ClassCatalog {
    pub const BACKGROUND: &'static str = "background";

    pub fn new<I, S>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(ModelError::EmptyCatalog);
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n == Self::BACKGROUND {
                return Err(ModelError::ReservedClass(n.clone()));
            }
            if !seen.insert(n.as_str()) {
                return Err(ModelError::DuplicateClass(n.clone()));
            }
        }
        Ok(Self { names })
    }

    /// Catalog named `class0`, `class1`, ... for data without names.
    pub fn anonymous(num_classes: usize) -> Result<Self, ModelError> {
        Self::new((0..num_classes).map(|c| format!("class{c}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One detection box with a score per class.
///
/// `raw_scores` holds the appearance scores from before fusion. It is `None`
/// for unfused detections, in which case `scores` are the raw scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionBox {
    pub bbox: BBox,
    pub scores: Vec<f64>,
    pub raw_scores: Option<Vec<f64>>,
}

impl DetectionBox {
    pub fn new(bbox: BBox, scores: Vec<f64>) -> Self {
        Self {
            bbox,
            scores,
            raw_scores: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.scores.len()
    }

    pub fn score(&self, class: usize) -> f64 {
        self.scores[class]
    }

    /// Pre-fusion score for `class`.
    pub fn raw_score(&self, class: usize) -> f64 {
        match &self.raw_scores {
            Some(raw) => raw[class],
            None => self.scores[class],
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<(), ModelError> {
        check_scores(&self.scores, num_classes)?;
        if let Some(raw) = &self.raw_scores {
            check_scores(raw, num_classes)?;
        }
        Ok(())
    }
}

fn check_scores(scores: &[f64], num_classes: usize) -> Result<(), ModelError> {
    if scores.len() != num_classes {
        return Err(ModelError::ScoreLength {
            expected: num_classes,
            found: scores.len(),
        });
    }
    for (class, &value) in scores.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::BadScore { class, value });
        }
    }
    Ok(())
}

/// Per-frame detections of one stream for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDetections {
    pub video_id: String,
    pub frames: Vec<Vec<DetectionBox>>,
}

impl VideoDetections {
    pub fn new(video_id: impl Into<String>, frames: Vec<Vec<DetectionBox>>) -> Self {
        Self {
            video_id: video_id.into(),
            frames,
        }
    }

    /// A video of `num_frames` frames with no detections.
    pub fn empty(video_id: impl Into<String>, num_frames: usize) -> Self {
        Self::new(video_id, vec![Vec::new(); num_frames])
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Class count taken from the first detection, if any.
    pub fn num_classes(&self) -> Option<usize> {
        self.frames
            .iter()
            .flatten()
            .next()
            .map(DetectionBox::num_classes)
    }

    pub fn num_detections(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, num_classes: usize) -> Result<(), ModelError> {
        if self.frames.is_empty() {
            return Err(ModelError::NoFrames);
        }
        for det in self.frames.iter().flatten() {
            det.validate(num_classes)?;
        }
        Ok(())
    }
}

/// One box of an [`ActionPath`], with the class scores used by both passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathNode {
    pub bbox: BBox,
    /// Augmented (fused) score for the path's class.
    pub score: f64,
    /// Pre-fusion score for the path's class.
    pub raw_score: f64,
    /// Position of the box within its frame's detection list.
    pub box_index: usize,
}

/// A class-specific chain of exactly one box per frame over the whole video.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPath {
    pub video_id: String,
    pub class_id: usize,
    pub nodes: Vec<PathNode>,
    pub energy: f64,
}

impl ActionPath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Per-frame label assigned by temporal trimming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Action,
    Background,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labelling {
    pub class_id: usize,
    pub labels: Vec<Label>,
}

impl Labelling {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_switches(&self) -> usize {
        self.labels.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Maximal runs of [`Label::Action`] as inclusive `(start, end)` frames.
    pub fn action_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (t, &l) in self.labels.iter().enumerate() {
            match (l, start) {
                (Label::Action, None) => start = Some(t),
                (Label::Background, Some(s)) => {
                    runs.push((s, t - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.labels.len() - 1));
        }
        runs
    }
}

/// A scored, class-labelled, temporally contiguous run of boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTube {
    pub video_id: String,
    pub class_id: usize,
    /// First frame, 0-based.
    pub start_frame: usize,
    /// Last frame, inclusive.
    pub end_frame: usize,
    pub boxes: Vec<BBox>,
    /// Augmented class score of each box.
    pub box_scores: Vec<f64>,
    pub score: f64,
}

impl ActionTube {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn box_at(&self, frame: usize) -> Option<&BBox> {
        frame
            .checked_sub(self.start_frame)
            .and_then(|i| self.boxes.get(i))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_range(self.start_frame, self.end_frame, self.boxes.len())?;
        if self.box_scores.len() != self.boxes.len() {
            return Err(ModelError::BoxCount {
                expected: self.boxes.len(),
                found: self.box_scores.len(),
            });
        }
        if !self.score.is_finite() {
            return Err(ModelError::BadTubeScore(self.score));
        }
        for (class, &value) in self.box_scores.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::BadScore { class, value });
            }
        }
        Ok(())
    }
}

/// An annotated tube.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTube {
    pub video_id: String,
    pub class_id: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub boxes: Vec<BBox>,
}

impl GroundTruthTube {
    pub fn box_at(&self, frame: usize) -> Option<&BBox> {
        frame
            .checked_sub(self.start_frame)
            .and_then(|i| self.boxes.get(i))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_range(self.start_frame, self.end_frame, self.boxes.len())
    }
}

fn check_range(start: usize, end: usize, boxes: usize) -> Result<(), ModelError> {
    if start > end {
        return Err(ModelError::ReversedRange { start, end });
    }
    let expected = end - start + 1;
    if boxes != expected {
        return Err(ModelError::BoxCount {
            expected,
            found: boxes,
        });
    }
    Ok(())
}

/// Common view of predicted and annotated tubes used by evaluation.
pub trait Tube {
    fn video_id(&self) -> &str;
    fn class_id(&self) -> usize;
    fn start_frame(&self) -> usize;
    fn end_frame(&self) -> usize;
    fn box_at(&self, frame: usize) -> Option<&BBox>;
}

impl Tube for ActionTube {
    fn video_id(&self) -> &str {
        &self.video_id
    }
    fn class_id(&self) -> usize {
        self.class_id
    }
    fn start_frame(&self) -> usize {
        self.start_frame
    }
    fn end_frame(&self) -> usize {
        self.end_frame
    }
    fn box_at(&self, frame: usize) -> Option<&BBox> {
        ActionTube::box_at(self, frame)
    }
}

impl Tube for GroundTruthTube {
    fn video_id(&self) -> &str {
        &self.video_id
    }
    fn class_id(&self) -> usize {
        self.class_id
    }
    fn start_frame(&self) -> usize {
        self.start_frame
    }
    fn end_frame(&self) -> usize {
        self.end_frame
    }
    fn box_at(&self, frame: usize) -> Option<&BBox> {
        GroundTruthTube::box_at(self, frame)
    }
}
