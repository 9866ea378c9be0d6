//! Corpus-level drivers: fan out over videos on a bounded worker pool and
//! merge results in video-id order, so output does not depend on the number
//! of workers.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::fusion::{fuse_video, FusionConfig, FusionError};
use crate::model::{ActionPath, ActionTube, VideoDetections};
use crate::pathing::{Linker, PathConfig, PathError};
use crate::trimming::{build_tubes, trim_paths, BuildError, TrimConfig, TrimError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("video {0:?} has no motion-stream record")]
    MissingMotion(String),
    #[error("video {0:?} has no appearance-stream record")]
    MissingAppearance(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Trim(#[from] TrimError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Applies `f` to every item on `workers` threads, preserving input order.
pub fn par_map<T, R, E, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, PipelineError>
where
    T: Sync,
    R: Send,
    E: Into<PipelineError> + Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    pool.install(|| {
        items
            .par_iter()
            .map(|item| f(item).map_err(Into::into))
            .collect()
    })
}

/// Pairs appearance and motion records by video id, sorted by id.
pub fn pair_streams<'a>(
    appearance: &'a [VideoDetections],
    motion: &'a [VideoDetections],
) -> Result<Vec<(&'a VideoDetections, &'a VideoDetections)>, PipelineError> {
    let by_id: HashMap<&str, &VideoDetections> =
        motion.iter().map(|m| (m.video_id.as_str(), m)).collect();
    if let Some(m) = motion
        .iter()
        .find(|m| !appearance.iter().any(|a| a.video_id == m.video_id))
    {
        return Err(PipelineError::MissingAppearance(m.video_id.clone()));
    }
    let mut pairs = appearance
        .iter()
        .map(|a| {
            by_id
                .get(a.video_id.as_str())
                .map(|&m| (a, m))
                .ok_or_else(|| PipelineError::MissingMotion(a.video_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    pairs.sort_by(|x, y| x.0.video_id.cmp(&y.0.video_id));
    Ok(pairs)
}

pub fn fuse_corpus(
    appearance: &[VideoDetections],
    motion: &[VideoDetections],
    cfg: &FusionConfig,
    workers: usize,
) -> Result<Vec<VideoDetections>, PipelineError> {
    let pairs = pair_streams(appearance, motion)?;
    par_map(&pairs, workers, |(a, m)| fuse_video(a, m, cfg))
}

fn sorted(videos: &[VideoDetections]) -> Vec<&VideoDetections> {
    let mut v: Vec<&VideoDetections> = videos.iter().collect();
    v.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    v
}

/// Paths for every class of every video, ordered by video id, class id,
/// then extraction order.
pub fn link_corpus(
    fused: &[VideoDetections],
    cfg: &PathConfig,
    workers: usize,
) -> Result<Vec<ActionPath>, PipelineError> {
    let videos = sorted(fused);
    let per_video = par_map(&videos, workers, |v| -> Result<_, PathError> {
        let linker = Linker::new(v);
        let mut paths = Vec::new();
        for class in 0..v.num_classes().unwrap_or(0) {
            paths.extend(linker.extract_paths(class, cfg)?);
        }
        Ok(paths)
    })?;
    Ok(per_video.into_iter().flatten().collect())
}

/// Trims paths into tubes. Paths are grouped by video so the output order
/// matches [`run_corpus`].
pub fn trim_corpus(
    paths: &[ActionPath],
    cfg: &TrimConfig,
    workers: usize,
) -> Result<Vec<ActionTube>, PipelineError> {
    let mut groups: BTreeMap<&str, Vec<ActionPath>> = BTreeMap::new();
    for p in paths {
        groups
            .entry(p.video_id.as_str())
            .or_default()
            .push(p.clone());
    }
    let groups: Vec<Vec<ActionPath>> = groups.into_values().collect();
    let per_video = par_map(&groups, workers, |g| trim_paths(g, cfg))?;
    Ok(per_video.into_iter().flatten().collect())
}

/// Fusion, linking and trimming end to end.
pub fn run_corpus(
    appearance: &[VideoDetections],
    motion: &[VideoDetections],
    fusion: &FusionConfig,
    pathing: &PathConfig,
    trimming: &TrimConfig,
    workers: usize,
) -> Result<Vec<ActionTube>, PipelineError> {
    let pairs = pair_streams(appearance, motion)?;
    let per_video = par_map(&pairs, workers, |(a, m)| -> Result<_, PipelineError> {
        let fused = fuse_video(a, m, fusion)?;
        Ok(build_tubes(&fused, pathing, trimming)?)
    })?;
    Ok(per_video.into_iter().flatten().collect())
}
