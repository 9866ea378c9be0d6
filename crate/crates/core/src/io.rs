//! Line-delimited JSON interchange format.
//!
//! Every file holds one UTF-8 JSON record per line; blank lines are skipped.
//! Frame indices are 1-based on disk. [`SCHEMA`] is the authoritative
//! description of all four record kinds.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, GeometryError};
use crate::model::{
    ActionPath, ActionTube, DetectionBox, GroundTruthTube, ModelError, PathNode, VideoDetections,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {source}")]
    Syntax {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: expected {expected} class scores, found {found}")]
    ScoreLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {source}")]
    DegenerateBox {
        line: usize,
        #[source]
        source: GeometryError,
    },
    #[error("line {line}: frame index {found} does not follow {previous} within 1..={num_frames}")]
    FrameOrder {
        line: usize,
        previous: usize,
        found: usize,
        num_frames: usize,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("cannot save record {index}: {source}")]
    Unsaveable {
        index: usize,
        #[source]
        source: ModelError,
    },
}

impl DataError {
    /// True for I/O failures, false for content problems.
    pub fn is_io(&self) -> bool {
        matches!(self, DataError::Io { .. })
    }
}

/// Authoritative schema of the interchange format, as JSON Schema.
pub const SCHEMA: &str = include_str!("schema.json");

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionsRecord {
    video_id: String,
    num_frames: usize,
    frames: Vec<FrameRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    frame_index: usize,
    detections: Vec<DetectionRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_scores: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathRecord {
    video_id: String,
    class_id: usize,
    energy: f64,
    boxes: Vec<PathNodeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathNodeRecord {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    score: f64,
    raw_score: f64,
    box_index: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TubeRecord {
    video_id: String,
    class_id: usize,
    start_frame: usize,
    end_frame: usize,
    score: f64,
    boxes: Vec<[f64; 4]>,
    /// Optional on read; tubes from other tools often carry only `score`.
    #[serde(default)]
    box_scores: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthRecord {
    video_id: String,
    class_id: usize,
    start_frame: usize,
    end_frame: usize,
    boxes: Vec<[f64; 4]>,
}

fn to_box(line: usize, v: [f64; 4]) -> Result<BBox, DataError> {
    BBox::try_from(v).map_err(|source| DataError::DegenerateBox { line, source })
}

fn check_finite(line: usize, what: &str, v: f64) -> Result<(), DataError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DataError::Schema {
            line,
            message: format!("{what} must be finite"),
        })
    }
}

/// Calls `f` with each non-blank line and its 1-based number.
fn for_each_record<R, F>(reader: R, mut f: F) -> Result<(), DataError>
where
    R: BufRead,
    F: FnMut(usize, &str) -> Result<(), DataError>,
{
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| DataError::Io {
            path: PathBuf::from(format!("<line {line_no}>")),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        f(line_no, &text)?;
    }
    Ok(())
}

fn parse<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T, DataError> {
    serde_json::from_str(text).map_err(|source| DataError::Syntax { line, source })
}

/// Parses detection records. With `num_classes = None` the class count is
/// taken from the first detection and enforced for the rest of the input.
pub fn read_detections<R: BufRead>(
    reader: R,
    num_classes: Option<usize>,
) -> Result<Vec<VideoDetections>, DataError> {
    let mut classes = num_classes;
    let mut videos: Vec<VideoDetections> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for_each_record(reader, |line, text| {
        let rec: DetectionsRecord = parse(line, text)?;
        if rec.num_frames == 0 {
            return Err(DataError::Invalid {
                line,
                source: ModelError::NoFrames,
            });
        }
        if !seen.insert(rec.video_id.clone()) {
            return Err(DataError::Schema {
                line,
                message: format!("duplicate video id {:?}", rec.video_id),
            });
        }
        let mut frames = vec![Vec::new(); rec.num_frames];
        let mut previous = 0;
        for fr in rec.frames {
            if fr.frame_index <= previous || fr.frame_index > rec.num_frames {
                return Err(DataError::FrameOrder {
                    line,
                    previous,
                    found: fr.frame_index,
                    num_frames: rec.num_frames,
                });
            }
            previous = fr.frame_index;
            let slot = &mut frames[fr.frame_index - 1];
            for d in fr.detections {
                let expected = *classes.get_or_insert(d.scores.len());
                if d.scores.len() != expected {
                    return Err(DataError::ScoreLength {
                        line,
                        expected,
                        found: d.scores.len(),
                    });
                }
                if let Some(raw) = &d.raw_scores {
                    if raw.len() != expected {
                        return Err(DataError::ScoreLength {
                            line,
                            expected,
                            found: raw.len(),
                        });
                    }
                }
                let det = DetectionBox {
                    bbox: to_box(line, d.bbox)?,
                    scores: d.scores,
                    raw_scores: d.raw_scores,
                };
                det.validate(expected)
                    .map_err(|source| DataError::Invalid { line, source })?;
                slot.push(det);
            }
        }
        videos.push(VideoDetections::new(rec.video_id, frames));
        Ok(())
    })?;
    Ok(videos)
}

pub fn write_detections<W: Write>(mut w: W, videos: &[VideoDetections]) -> Result<(), DataError> {
    let mut classes = None;
    for (index, v) in videos.iter().enumerate() {
        let num_classes = match (classes, v.num_classes()) {
            (Some(c), _) => c,
            (None, Some(c)) => *classes.insert(c),
            (None, None) => 0,
        };
        v.validate(num_classes)
            .map_err(|source| DataError::Unsaveable { index, source })?;
        let rec = DetectionsRecord {
            video_id: v.video_id.clone(),
            num_frames: v.num_frames(),
            frames: v
                .frames
                .iter()
                .enumerate()
                .map(|(t, dets)| FrameRecord {
                    frame_index: t + 1,
                    detections: dets
                        .iter()
                        .map(|d| DetectionRecord {
                            bbox: d.bbox.to_array(),
                            scores: d.scores.clone(),
                            raw_scores: d.raw_scores.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        write_line(&mut w, &rec)?;
    }
    Ok(())
}

pub fn read_paths<R: BufRead>(reader: R) -> Result<Vec<ActionPath>, DataError> {
    let mut out = Vec::new();
    for_each_record(reader, |line, text| {
        let rec: PathRecord = parse(line, text)?;
        check_finite(line, "energy", rec.energy)?;
        if rec.boxes.is_empty() {
            return Err(DataError::Invalid {
                line,
                source: ModelError::NoFrames,
            });
        }
        let mut nodes = Vec::with_capacity(rec.boxes.len());
        for n in rec.boxes {
            check_finite(line, "score", n.score)?;
            check_finite(line, "raw_score", n.raw_score)?;
            nodes.push(PathNode {
                bbox: to_box(line, n.bbox)?,
                score: n.score,
                raw_score: n.raw_score,
                box_index: n.box_index,
            });
        }
        out.push(ActionPath {
            video_id: rec.video_id,
            class_id: rec.class_id,
            nodes,
            energy: rec.energy,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_paths<W: Write>(mut w: W, paths: &[ActionPath]) -> Result<(), DataError> {
    for (index, p) in paths.iter().enumerate() {
        if p.nodes.is_empty() {
            return Err(DataError::Unsaveable {
                index,
                source: ModelError::NoFrames,
            });
        }
        let rec = PathRecord {
            video_id: p.video_id.clone(),
            class_id: p.class_id,
            energy: p.energy,
            boxes: p
                .nodes
                .iter()
                .map(|n| PathNodeRecord {
                    bbox: n.bbox.to_array(),
                    score: n.score,
                    raw_score: n.raw_score,
                    box_index: n.box_index,
                })
                .collect(),
        };
        write_line(&mut w, &rec)?;
    }
    Ok(())
}

fn frame_range(line: usize, start: usize, end: usize) -> Result<(usize, usize), DataError> {
    if start == 0 || end == 0 {
        return Err(DataError::Schema {
            line,
            message: "frame indices are 1-based".into(),
        });
    }
    Ok((start - 1, end - 1))
}

pub fn read_tubes<R: BufRead>(reader: R) -> Result<Vec<ActionTube>, DataError> {
    let mut out = Vec::new();
    for_each_record(reader, |line, text| {
        let rec: TubeRecord = parse(line, text)?;
        let (start_frame, end_frame) = frame_range(line, rec.start_frame, rec.end_frame)?;
        let boxes = rec
            .boxes
            .into_iter()
            .map(|b| to_box(line, b))
            .collect::<Result<Vec<_>, _>>()?;
        let box_scores = rec
            .box_scores
            .unwrap_or_else(|| vec![rec.score; boxes.len()]);
        let tube = ActionTube {
            video_id: rec.video_id,
            class_id: rec.class_id,
            start_frame,
            end_frame,
            boxes,
            box_scores,
            score: rec.score,
        };
        tube.validate()
            .map_err(|source| DataError::Invalid { line, source })?;
        out.push(tube);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_tubes<W: Write>(mut w: W, tubes: &[ActionTube]) -> Result<(), DataError> {
    for (index, t) in tubes.iter().enumerate() {
        t.validate()
            .map_err(|source| DataError::Unsaveable { index, source })?;
        let rec = TubeRecord {
            video_id: t.video_id.clone(),
            class_id: t.class_id,
            start_frame: t.start_frame + 1,
            end_frame: t.end_frame + 1,
            score: t.score,
            boxes: t.boxes.iter().map(BBox::to_array).collect(),
            box_scores: Some(t.box_scores.clone()),
        };
        write_line(&mut w, &rec)?;
    }
    Ok(())
}

pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GroundTruthTube>, DataError> {
    let mut out = Vec::new();
    for_each_record(reader, |line, text| {
        let rec: GroundTruthRecord = parse(line, text)?;
        let (start_frame, end_frame) = frame_range(line, rec.start_frame, rec.end_frame)?;
        let boxes = rec
            .boxes
            .into_iter()
            .map(|b| to_box(line, b))
            .collect::<Result<Vec<_>, _>>()?;
        let gt = GroundTruthTube {
            video_id: rec.video_id,
            class_id: rec.class_id,
            start_frame,
            end_frame,
            boxes,
        };
        gt.validate()
            .map_err(|source| DataError::Invalid { line, source })?;
        out.push(gt);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_ground_truth<W: Write>(mut w: W, tubes: &[GroundTruthTube]) -> Result<(), DataError> {
    for (index, t) in tubes.iter().enumerate() {
        t.validate()
            .map_err(|source| DataError::Unsaveable { index, source })?;
        let rec = GroundTruthRecord {
            video_id: t.video_id.clone(),
            class_id: t.class_id,
            start_frame: t.start_frame + 1,
            end_frame: t.end_frame + 1,
            boxes: t.boxes.iter().map(BBox::to_array).collect(),
        };
        write_line(&mut w, &rec)?;
    }
    Ok(())
}

fn write_line<W: Write, T: Serialize>(w: &mut W, rec: &T) -> Result<(), DataError> {
    serde_json::to_writer(&mut *w, rec).map_err(|e| DataError::Io {
        path: PathBuf::from("<output>"),
        source: e.into(),
    })?;
    w.write_all(b"\n").map_err(|source| DataError::Io {
        path: PathBuf::from("<output>"),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.to_owned(),
            source,
        })
}

/// Writes a file through a temporary sibling that is renamed into place,
/// so readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, f: F) -> Result<(), DataError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), DataError>,
{
    let io_err = |source| DataError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // the rename keeps the temp file's 0600 mode; ask for the usual umask-governed one
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o666));
    }
    let tmp = builder.tempfile_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        f(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn load_detections(
    path: &Path,
    num_classes: Option<usize>,
) -> Result<Vec<VideoDetections>, DataError> {
    read_detections(open(path)?, num_classes)
}

pub fn save_detections(path: &Path, videos: &[VideoDetections]) -> Result<(), DataError> {
    write_atomic(path, |w| write_detections(w, videos))
}

pub fn load_paths(path: &Path) -> Result<Vec<ActionPath>, DataError> {
    read_paths(open(path)?)
}

pub fn save_paths(path: &Path, paths: &[ActionPath]) -> Result<(), DataError> {
    write_atomic(path, |w| write_paths(w, paths))
}

pub fn load_tubes(path: &Path) -> Result<Vec<ActionTube>, DataError> {
    read_tubes(open(path)?)
}

pub fn save_tubes(path: &Path, tubes: &[ActionTube]) -> Result<(), DataError> {
    write_atomic(path, |w| write_tubes(w, tubes))
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthTube>, DataError> {
    read_ground_truth(open(path)?)
}

pub fn save_ground_truth(path: &Path, tubes: &[GroundTruthTube]) -> Result<(), DataError> {
    write_atomic(path, |w| write_ground_truth(w, tubes))
}
