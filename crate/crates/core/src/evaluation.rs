//! Spatiotemporal detection metrics.
//!
//! Tube overlap is temporal IoU of the frame ranges times the mean spatial
//! IoU over the frames both tubes cover. Per-class AP uses greedy one-to-one
//! matching in descending score order with an inclusive threshold, and
//! all-points interpolation of the precision/recall curve.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ActionTube, ClassCatalog, GroundTruthTube, Tube};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("at least one overlap threshold is required")]
    NoDeltas,
    #[error("overlap threshold {0} is outside (0, 1]")]
    BadDelta(f64),
    #[error("overlap thresholds must be strictly ascending")]
    UnsortedDeltas,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub deltas: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        }
    }
}

impl EvalConfig {
    pub fn new(deltas: Vec<f64>) -> Result<Self, EvalError> {
        let cfg = Self { deltas };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.deltas.is_empty() {
            return Err(EvalError::NoDeltas);
        }
        for &d in &self.deltas {
            if !(d > 0.0 && d <= 1.0) {
                return Err(EvalError::BadDelta(d));
            }
        }
        if self.deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::UnsortedDeltas);
        }
        Ok(())
    }
}

/// Spatiotemporal IoU of two tubes of the same video. Symmetric.
pub fn tube_iou<A: Tube + ?Sized, B: Tube + ?Sized>(a: &A, b: &B) -> f64 {
    let start = a.start_frame().max(b.start_frame());
    let end = a.end_frame().min(b.end_frame());
    if start > end {
        return 0.0;
    }
    let inter = (end - start + 1) as f64;
    let len_a = (a.end_frame() - a.start_frame() + 1) as f64;
    let len_b = (b.end_frame() - b.start_frame() + 1) as f64;
    let temporal = inter / (len_a + len_b - inter);
    let spatial: f64 = (start..=end)
        .map(|t| match (a.box_at(t), b.box_at(t)) {
            (Some(x), Some(y)) => x.iou(y),
            _ => 0.0,
        })
        .sum();
    temporal * (spatial / inter)
}

/// One point of a precision/recall curve, taken after each ranked prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Outcome of matching one class's predictions at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatch {
    /// Prediction indices in rank order.
    pub ranking: Vec<usize>,
    /// Ground-truth index claimed by each ranked prediction, if a true positive.
    pub matched: Vec<Option<usize>>,
    pub num_gt: usize,
}

impl ClassMatch {
    pub fn true_positives(&self) -> usize {
        self.matched.iter().filter(|m| m.is_some()).count()
    }

    pub fn pr_curve(&self) -> Vec<PrPoint> {
        let mut tp = 0usize;
        self.matched
            .iter()
            .enumerate()
            .map(|(i, m)| {
                tp += m.is_some() as usize;
                PrPoint {
                    recall: if self.num_gt == 0 {
                        0.0
                    } else {
                        tp as f64 / self.num_gt as f64
                    },
                    precision: tp as f64 / (i + 1) as f64,
                }
            })
            .collect()
    }

    /// All-points interpolated AP, `None` when there is no ground truth.
    pub fn average_precision(&self) -> Option<f64> {
        if self.num_gt == 0 {
            return None;
        }
        let curve = self.pr_curve();
        let mut interp = vec![0.0; curve.len()];
        let mut running = 0.0f64;
        for i in (0..curve.len()).rev() {
            running = running.max(curve[i].precision);
            interp[i] = running;
        }
        let step = 1.0 / self.num_gt as f64;
        let mut ap = 0.0;
        for (m, p) in self.matched.iter().zip(&interp) {
            let recall_gain = if m.is_some() { step } else { 0.0 };
            ap += recall_gain * p;
        }
        Some(ap)
    }
}

/// Sorts by descending score; equal scores keep input order.
fn rank(preds: &[&ActionTube]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
    order
}

/// Greedy matching of one class's predictions against its ground truth.
/// Each prediction takes the unmatched ground-truth tube of its video with
/// the highest overlap (earliest on ties); it is a true positive iff that
/// overlap is at least `delta`.
pub fn match_class(preds: &[&ActionTube], gts: &[&GroundTruthTube], delta: f64) -> ClassMatch {
    let ranking = rank(preds);
    let mut by_video: HashMap<&str, Vec<usize>> = HashMap::new();
    for (g, gt) in gts.iter().enumerate() {
        by_video.entry(gt.video_id.as_str()).or_default().push(g);
    }
    let mut taken = vec![false; gts.len()];
    let matched = ranking
        .iter()
        .map(|&p| {
            let pred = preds[p];
            let mut best: Option<(usize, f64)> = None;
            for &g in by_video.get(pred.video_id.as_str()).into_iter().flatten() {
                if taken[g] {
                    continue;
                }
                let ov = tube_iou(pred, gts[g]);
                if best.is_none_or(|(_, b)| ov > b) {
                    best = Some((g, ov));
                }
            }
            match best {
                Some((g, ov)) if ov >= delta => {
                    taken[g] = true;
                    Some(g)
                }
                _ => None,
            }
        })
        .collect();
    ClassMatch {
        ranking,
        matched,
        num_gt: gts.len(),
    }
}

/// AP of one class at one threshold; `None` without ground truth.
pub fn average_precision(
    preds: &[&ActionTube],
    gts: &[&GroundTruthTube],
    delta: f64,
) -> Option<f64> {
    match_class(preds, gts, delta).average_precision()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
    pub num_gt: usize,
    pub num_pred: usize,
    /// AP per threshold, in the order of [`EvalReport::deltas`].
    pub ap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoReport {
    pub video_id: String,
    pub num_gt: usize,
    pub num_pred: usize,
    /// True positives per threshold.
    pub true_positives: Vec<usize>,
    pub gt_class: Option<usize>,
    pub predicted_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub class_id: usize,
    pub delta: f64,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub deltas: Vec<f64>,
    /// Classes with ground truth, by id.
    pub classes: Vec<ClassReport>,
    /// Predicted classes without ground truth; excluded from mAP.
    pub absent_classes: Vec<usize>,
    /// Mean AP over `classes` per threshold; `None` without ground truth.
    pub map: Vec<Option<f64>>,
    /// Fraction of ground-truth videos whose top-scoring tube has the
    /// video's class.
    pub accuracy: Option<f64>,
    pub videos: Vec<VideoReport>,
    #[serde(skip)]
    pub pr_curves: Vec<PrCurve>,
}

fn majority_class(tubes: &[&GroundTruthTube]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tubes {
        *counts.entry(t.class_id).or_default() += 1;
    }
    // max_by_key keeps the last maximum; iterate in reverse for the lowest id
    counts
        .into_iter()
        .rev()
        .max_by_key(|&(_, n)| n)
        .map(|(c, _)| c)
}

fn top_class(tubes: &[&ActionTube]) -> Option<usize> {
    tubes
        .iter()
        .min_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.class_id.cmp(&b.class_id))
        })
        .map(|t| t.class_id)
}

/// Full evaluation over a corpus.
pub fn evaluate(
    tubes: &[ActionTube],
    ground_truth: &[GroundTruthTube],
    cfg: &EvalConfig,
    catalog: Option<&ClassCatalog>,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let mut preds_by_class: BTreeMap<usize, Vec<&ActionTube>> = BTreeMap::new();
    for t in tubes {
        preds_by_class.entry(t.class_id).or_default().push(t);
    }
    let mut gts_by_class: BTreeMap<usize, Vec<&GroundTruthTube>> = BTreeMap::new();
    for g in ground_truth {
        gts_by_class.entry(g.class_id).or_default().push(g);
    }

    let video_ids: BTreeSet<&str> = ground_truth
        .iter()
        .map(|g| g.video_id.as_str())
        .chain(tubes.iter().map(|t| t.video_id.as_str()))
        .collect();
    let mut video_tp: HashMap<&str, Vec<usize>> = video_ids
        .iter()
        .map(|&v| (v, vec![0; cfg.deltas.len()]))
        .collect();

    let mut classes = Vec::new();
    let mut pr_curves = Vec::new();
    for (&class_id, gts) in &gts_by_class {
        let preds = preds_by_class.get(&class_id).map_or(&[][..], Vec::as_slice);
        let mut ap = Vec::with_capacity(cfg.deltas.len());
        for (d, &delta) in cfg.deltas.iter().enumerate() {
            let m = match_class(preds, gts, delta);
            for (&p, hit) in m.ranking.iter().zip(&m.matched) {
                if hit.is_some() {
                    video_tp.get_mut(preds[p].video_id.as_str()).unwrap()[d] += 1;
                }
            }
            ap.push(m.average_precision().unwrap_or(0.0));
            pr_curves.push(PrCurve {
                class_id,
                delta,
                points: m.pr_curve(),
            });
        }
        classes.push(ClassReport {
            class_id,
            class_name: catalog.and_then(|c| c.name(class_id)).map(str::to_owned),
            num_gt: gts.len(),
            num_pred: preds.len(),
            ap,
        });
    }
    let absent_classes = preds_by_class
        .keys()
        .filter(|c| !gts_by_class.contains_key(c))
        .copied()
        .collect();

    let map = (0..cfg.deltas.len())
        .map(|d| {
            (!classes.is_empty())
                .then(|| classes.iter().map(|c| c.ap[d]).sum::<f64>() / classes.len() as f64)
        })
        .collect();

    let mut videos = Vec::with_capacity(video_ids.len());
    let (mut labelled, mut correct) = (0usize, 0usize);
    for &vid in &video_ids {
        let gts: Vec<&GroundTruthTube> =
            ground_truth.iter().filter(|g| g.video_id == vid).collect();
        let preds: Vec<&ActionTube> = tubes.iter().filter(|t| t.video_id == vid).collect();
        let gt_class = majority_class(&gts);
        let predicted_class = top_class(&preds);
        if let Some(g) = gt_class {
            labelled += 1;
            correct += (predicted_class == Some(g)) as usize;
        }
        videos.push(VideoReport {
            video_id: vid.to_owned(),
            num_gt: gts.len(),
            num_pred: preds.len(),
            true_positives: video_tp.remove(vid).unwrap_or_default(),
            gt_class,
            predicted_class,
        });
    }
    let accuracy = (labelled > 0).then(|| correct as f64 / labelled as f64);

    Ok(EvalReport {
        deltas: cfg.deltas.clone(),
        classes,
        absent_classes,
        map,
        accuracy,
        videos,
        pr_curves,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{:.2}", 100.0 * x))
}

impl EvalReport {
    /// mAP at the threshold closest to `delta`.
    pub fn map_at(&self, delta: f64) -> Option<f64> {
        let d = self
            .deltas
            .iter()
            .position(|&x| (x - delta).abs() < 1e-12)?;
        self.map[d]
    }

    /// Plain-text table: one column per threshold, one row per class plus
    /// the mAP row. Values in percent.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let label_width = self
            .classes
            .iter()
            .map(|c| c.class_name.as_ref().map_or(8, |n| n.len()))
            .max()
            .unwrap_or(0)
            .max(24);
        let _ = write!(out, "{:<label_width$}", "Spatio-temporal overlap δ");
        for d in &self.deltas {
            let _ = write!(out, " {:>7}", d);
        }
        out.push('\n');
        for c in &self.classes {
            let label = c
                .class_name
                .clone()
                .unwrap_or_else(|| format!("class {}", c.class_id));
            let _ = write!(out, "{label:<label_width$}");
            for &ap in &c.ap {
                let _ = write!(out, " {:>7}", pct(Some(ap)));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<label_width$}", "mAP");
        for &m in &self.map {
            let _ = write!(out, " {:>7}", pct(m));
        }
        out.push('\n');
        let _ = writeln!(out, "classification accuracy: {}", pct(self.accuracy));
        if !self.absent_classes.is_empty() {
            let _ = writeln!(
                out,
                "classes predicted without ground truth (excluded from mAP): {:?}",
                self.absent_classes
            );
        }
        out
    }
}
