//! Spatiotemporal action tubes from two-stream frame detections.
//!
//! The pipeline has three stages:
//!
//! 1. [`fusion`] boosts appearance-stream detection scores with the
//!    best-overlapping motion-stream detection.
//! 2. [`pathing`] links one box per frame into class-specific action paths
//!    spanning the whole video (Viterbi over score plus overlap), extracting
//!    several paths per class by removing the boxes of each path found.
//! 3. [`trimming`] labels each path box action or background under a Potts
//!    smoothness prior and cuts the action runs into scored tubes.
//!
//! [`evaluation`] scores tubes against ground truth with spatiotemporal IoU
//! and per-class average precision. [`synth`] generates seeded synthetic
//! corpora and holds the brute-force oracles used to certify both DP passes.

pub mod cli;
pub mod config;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod model;
pub mod pathing;
pub mod pipeline;
pub mod synth;
pub mod trimming;

pub use evaluation::{evaluate, tube_iou, EvalConfig, EvalReport};
pub use fusion::{fuse_frame, fuse_video, FusionConfig};
pub use geometry::BBox;
pub use model::{
    ActionPath, ActionTube, ClassCatalog, DetectionBox, GroundTruthTube, Label, Labelling,
    PathNode, VideoDetections,
};
pub use pathing::{best_path, extract_paths, path_energy, Linker, PathConfig};
pub use trimming::{build_tubes, cut_tubes, trim_path, TrimConfig};
