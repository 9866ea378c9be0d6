//! Seeded synthetic scenarios and exhaustive oracles.
//!
//! [`generate`] turns a [`ScenarioSpec`] into appearance and motion
//! detections plus ground truth. Planted instances move linearly between two
//! boxes and follow a trapezoidal score profile; clutter boxes are scattered
//! uniformly. All randomness comes from ChaCha8 seeded with the spec's seed,
//! so output is a pure function of the spec.
//!
//! [`oracle`] enumerates every path or labelling to certify the DP passes.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::model::{DetectionBox, GroundTruthTube, VideoDetections};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("scenario needs at least one frame and one class")]
    Empty,
    #[error("plant {plant}: {reason}")]
    BadPlant { plant: usize, reason: String },
    #[error("plants {first} and {second} are identical and overlap in time")]
    DuplicatePlants { first: usize, second: usize },
    #[error("clutter: {0}")]
    BadClutter(String),
    #[error("noise amplitudes must be finite and non-negative")]
    BadNoise,
    #[error("frame size must be positive")]
    BadFrame,
}

/// Class-score profile of a planted instance: ramps from `edge` at the first
/// and last frame up to `peak` over `ramp` frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreProfile {
    pub peak: f64,
    #[serde(default)]
    pub edge: f64,
    #[serde(default)]
    pub ramp: usize,
}

impl ScoreProfile {
    pub fn flat(peak: f64) -> Self {
        Self {
            peak,
            edge: peak,
            ramp: 0,
        }
    }

    /// Score at offset `i` of an instance of length `len`.
    pub fn at(&self, i: usize, len: usize) -> f64 {
        if self.ramp == 0 {
            return self.peak;
        }
        let from_edge = i.min(len - 1 - i);
        let w = ((from_edge as f64) / self.ramp as f64).min(1.0);
        self.edge + (self.peak - self.edge) * w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plant {
    pub class_id: usize,
    /// 1-based, inclusive.
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_box: [f64; 4],
    pub end_box: [f64; 4],
    pub profile: ScoreProfile,
    /// When set, the actor also appears outside the action (parked at the
    /// nearest trajectory end) with this class score.
    #[serde(default)]
    pub idle_score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Clutter {
    pub per_frame: usize,
    pub score_min: f64,
    pub score_max: f64,
    pub min_size: f64,
    pub max_size: f64,
}

impl Default for Clutter {
    fn default() -> Self {
        Self {
            per_frame: 0,
            score_min: 0.0,
            score_max: 0.3,
            min_size: 20.0,
            max_size: 80.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    /// Uniform jitter, in pixels, applied to each box coordinate.
    pub box_jitter: f64,
    /// Uniform perturbation amplitude of planted scores.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "default_video_id")]
    pub video_id: String,
    pub num_frames: usize,
    pub num_classes: usize,
    #[serde(default = "default_width")]
    pub frame_width: f64,
    #[serde(default = "default_height")]
    pub frame_height: f64,
    #[serde(default)]
    pub plants: Vec<Plant>,
    #[serde(default)]
    pub clutter: Clutter,
    #[serde(default)]
    pub noise: Noise,
}

fn default_video_id() -> String {
    "synth".to_owned()
}

fn default_width() -> f64 {
    320.0
}

fn default_height() -> f64 {
    240.0
}

/// Generated streams and annotations for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub appearance: VideoDetections,
    pub motion: VideoDetections,
    pub ground_truth: Vec<GroundTruthTube>,
}

/// File of several scenario specs, one video each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub videos: Vec<ScenarioSpec>,
}

/// Stable uniform source built on ChaCha8.
pub struct Uniform(ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform in `[-a, a)`.
    pub fn symmetric(&mut self, a: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else {
            self.range(-a, a)
        }
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n.saturating_sub(1))
    }
}

fn lerp_box(a: &[f64; 4], b: &[f64; 4], w: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = a[k] + (b[k] - a[k]) * w;
    }
    out
}

impl Plant {
    fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    /// Noise-free box at 0-based frame `t`, clamped to the trajectory ends.
    fn box_at(&self, t: usize) -> [f64; 4] {
        let (s, e) = (self.start_frame - 1, self.end_frame - 1);
        if t <= s {
            self.start_box
        } else if t >= e {
            self.end_box
        } else {
            lerp_box(
                &self.start_box,
                &self.end_box,
                (t - s) as f64 / (e - s) as f64,
            )
        }
    }

    fn active(&self, t: usize) -> bool {
        t + 1 >= self.start_frame && t < self.end_frame
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_frames == 0 || self.num_classes == 0 {
            return Err(SynthError::Empty);
        }
        if !(self.frame_width > 0.0 && self.frame_height > 0.0) {
            return Err(SynthError::BadFrame);
        }
        let n = &self.noise;
        if !(n.box_jitter.is_finite()
            && n.box_jitter >= 0.0
            && n.score.is_finite()
            && n.score >= 0.0)
        {
            return Err(SynthError::BadNoise);
        }
        let c = &self.clutter;
        if !(0.0 <= c.score_min && c.score_min <= c.score_max && c.score_max <= 1.0) {
            return Err(SynthError::BadClutter(
                "scores must satisfy 0 <= min <= max <= 1".into(),
            ));
        }
        if !(0.0 < c.min_size && c.min_size <= c.max_size && c.max_size.is_finite()) {
            return Err(SynthError::BadClutter(
                "sizes must satisfy 0 < min <= max".into(),
            ));
        }
        for (i, p) in self.plants.iter().enumerate() {
            let bad = |reason: &str| SynthError::BadPlant {
                plant: i,
                reason: reason.to_owned(),
            };
            if p.class_id >= self.num_classes {
                return Err(bad("class out of range"));
            }
            if p.start_frame == 0 || p.start_frame > p.end_frame || p.end_frame > self.num_frames {
                return Err(bad("frame range must lie within 1..=num_frames"));
            }
            for b in [p.start_box, p.end_box] {
                BBox::try_from(b).map_err(|e| bad(&e.to_string()))?;
            }
            let scores = [Some(p.profile.peak), Some(p.profile.edge), p.idle_score];
            if scores
                .into_iter()
                .flatten()
                .any(|s| !(0.0..=1.0).contains(&s))
            {
                return Err(bad("scores must lie in [0, 1]"));
            }
        }
        for (i, a) in self.plants.iter().enumerate() {
            for (j, b) in self.plants.iter().enumerate().skip(i + 1) {
                let overlap = a.start_frame <= b.end_frame && b.start_frame <= a.end_frame;
                if overlap
                    && a.class_id == b.class_id
                    && a.start_box == b.start_box
                    && a.end_box == b.end_box
                {
                    return Err(SynthError::DuplicatePlants {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(())
    }
}

struct Emitter<'a> {
    spec: &'a ScenarioSpec,
    rng: Uniform,
}

impl Emitter<'_> {
    fn jittered(&mut self, b: [f64; 4]) -> BBox {
        let j = self.spec.noise.box_jitter;
        if j == 0.0 {
            return BBox::try_from(b).expect("validated plant box");
        }
        let mut c = b;
        for v in &mut c {
            *v += self.rng.symmetric(j);
        }
        // keep a positive extent whatever the jitter
        c[2] = c[2].max(c[0] + 1.0);
        c[3] = c[3].max(c[1] + 1.0);
        BBox::try_from(c).expect("finite jittered box")
    }

    /// Softmax-like scores: the planted class gets `base`, the remainder is
    /// shared evenly by the other classes and an implicit background.
    fn class_scores(&mut self, class: usize, base: f64) -> Vec<f64> {
        let noise = self.spec.noise.score;
        let s = (base + self.rng.symmetric(noise)).clamp(0.0, 1.0);
        let c = self.spec.num_classes;
        let rest = (1.0 - s) / c as f64;
        (0..c).map(|k| if k == class { s } else { rest }).collect()
    }

    fn frame(&mut self, t: usize) -> Vec<DetectionBox> {
        let spec = self.spec;
        let mut dets = Vec::new();
        for p in &spec.plants {
            let base = if p.active(t) {
                Some(p.profile.at(t + 1 - p.start_frame, p.len()))
            } else {
                p.idle_score
            };
            if let Some(base) = base {
                let bbox = self.jittered(p.box_at(t));
                let scores = self.class_scores(p.class_id, base);
                dets.push(DetectionBox::new(bbox, scores));
            }
        }
        let c = spec.clutter;
        for _ in 0..c.per_frame {
            let w = self.rng.range(c.min_size, c.max_size).min(spec.frame_width);
            let h = self
                .rng
                .range(c.min_size, c.max_size)
                .min(spec.frame_height);
            let x = self.rng.range(0.0, spec.frame_width - w);
            let y = self.rng.range(0.0, spec.frame_height - h);
            let bbox = BBox::new(x, y, x + w, y + h).expect("positive clutter size");
            let scores = (0..spec.num_classes)
                .map(|_| self.rng.range(c.score_min, c.score_max))
                .collect();
            dets.push(DetectionBox::new(bbox, scores));
        }
        dets
    }
}

/// Builds the appearance stream, the motion stream and the ground truth.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SynthError> {
    spec.validate()?;
    let mut em = Emitter {
        spec,
        rng: Uniform::new(spec.seed),
    };
    let appearance = (0..spec.num_frames).map(|t| em.frame(t)).collect();
    let motion = (0..spec.num_frames).map(|t| em.frame(t)).collect();
    let ground_truth = spec
        .plants
        .iter()
        .map(|p| GroundTruthTube {
            video_id: spec.video_id.clone(),
            class_id: p.class_id,
            start_frame: p.start_frame - 1,
            end_frame: p.end_frame - 1,
            boxes: (p.start_frame - 1..p.end_frame)
                .map(|t| BBox::try_from(p.box_at(t)).expect("validated plant box"))
                .collect(),
        })
        .collect();
    Ok(Scenario {
        appearance: VideoDetections::new(spec.video_id.clone(), appearance),
        motion: VideoDetections::new(spec.video_id.clone(), motion),
        ground_truth,
    })
}

/// Ready-made scenario families shared by the examples and the test suites.
pub mod scenarios {
    use super::*;

    /// Box jitter of the moderate-noise setting, in pixels: 3% of the
    /// 50 px actor width used by `three_concurrent`.
    pub const MODERATE_BOX_JITTER: f64 = 1.5;
    /// Score perturbation amplitude of the moderate-noise setting.
    pub const MODERATE_SCORE_NOISE: f64 = 0.05;

    pub fn moderate_noise() -> Noise {
        Noise {
            box_jitter: MODERATE_BOX_JITTER,
            score: MODERATE_SCORE_NOISE,
        }
    }

    /// Three concurrent instances of class 0 in separate horizontal lanes,
    /// each covering a different, overlapping part of a 60-frame video.
    pub fn three_concurrent(seed: u64, noise: Noise) -> ScenarioSpec {
        let mut rng = Uniform::new(seed ^ 0x9e37_79b9_7f4a_7c15);
        let plants = (0..3)
            .map(|lane| {
                let start = 1 + rng.below(15);
                let end = 45 + rng.below(16);
                let y = 10.0 + 80.0 * lane as f64;
                let x0 = rng.range(10.0, 60.0);
                let x1 = rng.range(200.0, 250.0);
                Plant {
                    class_id: 0,
                    start_frame: start,
                    end_frame: end,
                    start_box: [x0, y, x0 + 50.0, y + 60.0],
                    end_box: [x1, y, x1 + 50.0, y + 60.0],
                    profile: ScoreProfile {
                        peak: 0.9,
                        edge: 0.6,
                        ramp: 3,
                    },
                    idle_score: None,
                }
            })
            .collect();
        ScenarioSpec {
            seed,
            video_id: format!("multi-{seed}"),
            num_frames: 60,
            num_classes: 2,
            frame_width: 320.0,
            frame_height: 240.0,
            plants,
            clutter: Clutter {
                per_frame: 4,
                score_max: 0.3,
                ..Clutter::default()
            },
            noise,
        }
    }

    /// Untrimmed video: one actor performs class `class` twice, with idle
    /// stretches before, between and after. The two instances together cover
    /// 30-60% of the video.
    pub fn untrimmed(seed: u64, num_classes: usize) -> ScenarioSpec {
        let mut rng = Uniform::new(seed ^ 0x5851_f42d_4c95_7f2d);
        let num_frames = 100;
        let class = rng.below(num_classes);
        let cover = 30 + rng.below(31);
        let first = cover / 2;
        let second = cover - first;
        let slack = num_frames - cover;
        let gap = 10 + rng.below(slack - 20);
        let lead = rng.below(slack - gap + 1);
        let s1 = 1 + lead;
        let e1 = s1 + first - 1;
        let s2 = e1 + gap + 1;
        let e2 = s2 + second - 1;
        let x = rng.range(20.0, 200.0);
        let y = rng.range(20.0, 120.0);
        let actor = |start: usize, end: usize, dx: f64| Plant {
            class_id: class,
            start_frame: start,
            end_frame: end,
            start_box: [x + dx, y, x + dx + 60.0, y + 100.0],
            end_box: [x + dx + 30.0, y, x + dx + 90.0, y + 100.0],
            profile: ScoreProfile {
                peak: 0.9,
                edge: 0.5,
                ramp: 2,
            },
            idle_score: Some(0.1),
        };
        ScenarioSpec {
            seed,
            video_id: format!("untrimmed-{seed}"),
            num_frames,
            num_classes,
            frame_width: 320.0,
            frame_height: 240.0,
            plants: vec![actor(s1, e1, 0.0), actor(s2, e2, 40.0)],
            clutter: Clutter {
                per_frame: 3,
                score_max: 0.3,
                ..Clutter::default()
            },
            noise: Noise {
                box_jitter: 2.0,
                score: 0.05,
            },
        }
    }
}

pub mod oracle {
    //! Exhaustive references for the dynamic-programming passes.

    use thiserror::Error;

    use crate::model::{ActionPath, Label, Labelling, VideoDetections};
    use crate::trimming::{BackgroundScore, ForegroundScore, TrimConfig};

    /// Largest number of paths [`brute_force_best_path`] will enumerate.
    pub const MAX_PATHS: u128 = 1_000_000;
    /// Longest path [`brute_force_best_labelling`] accepts.
    pub const MAX_LABEL_FRAMES: usize = 20;

    #[derive(Debug, Clone, PartialEq, Error)]
    pub enum OracleError {
        #[error("{0} candidate paths exceed the enumeration limit")]
        TooManyPaths(u128),
        #[error("{0} frames exceed the labelling enumeration limit")]
        TooManyFrames(usize),
        #[error("frame {0} has no boxes")]
        EmptyFrame(usize),
    }

    /// Enumerates every box-per-frame path. Returns the box index per frame
    /// of the first maximiser in lexicographic order, and its energy.
    pub fn brute_force_best_path(
        video: &VideoDetections,
        class: usize,
        lambda_o: f64,
    ) -> Result<(Vec<usize>, f64), OracleError> {
        let sizes: Vec<usize> = video.frames.iter().map(Vec::len).collect();
        if let Some(t) = sizes.iter().position(|&n| n == 0) {
            return Err(OracleError::EmptyFrame(t + 1));
        }
        let total = sizes.iter().try_fold(1u128, |acc, &n| {
            let next = acc * n as u128;
            (next <= MAX_PATHS).then_some(next).ok_or(next)
        });
        let total = total.map_err(OracleError::TooManyPaths)?;

        let mut choice = vec![0usize; sizes.len()];
        let mut best: Option<(Vec<usize>, f64)> = None;
        for _ in 0..total {
            let mut energy = 0.0;
            for (t, &i) in choice.iter().enumerate() {
                energy += video.frames[t][i].scores[class];
                if t > 0 {
                    let prev = &video.frames[t - 1][choice[t - 1]].bbox;
                    energy += lambda_o * video.frames[t][i].bbox.iou(prev);
                }
            }
            if best.as_ref().is_none_or(|(_, e)| energy > *e) {
                best = Some((choice.clone(), energy));
            }
            // odometer increment, last frame fastest
            for t in (0..choice.len()).rev() {
                choice[t] += 1;
                if choice[t] < sizes[t] {
                    break;
                }
                choice[t] = 0;
            }
        }
        Ok(best.expect("at least one path"))
    }

    /// Enumerates all 2^T labellings. Among maximisers, returns the first in
    /// lexicographic order with action before background.
    pub fn brute_force_best_labelling(
        path: &ActionPath,
        cfg: &TrimConfig,
    ) -> Result<(Labelling, f64), OracleError> {
        let n = path.nodes.len();
        if n > MAX_LABEL_FRAMES {
            return Err(OracleError::TooManyFrames(n));
        }
        let penalty = cfg.lambda_l
            * cfg
                .alpha
                .get(&path.class_id)
                .copied()
                .unwrap_or(cfg.alpha_default);
        let mut best: Option<(u32, f64)> = None;
        for mask in 0u32..(1u32 << n) {
            // bit (n-1-t) set means background at frame t
            let mut objective = 0.0;
            let mut prev_bg = None;
            for (t, node) in path.nodes.iter().enumerate() {
                let bg = mask >> (n - 1 - t) & 1 == 1;
                objective += if bg {
                    match cfg.background_score {
                        BackgroundScore::Complement => (1.0 - node.raw_score).max(0.0),
                        BackgroundScore::Constant(v) => v,
                    }
                } else {
                    match cfg.foreground_score {
                        ForegroundScore::Augmented => node.score,
                        ForegroundScore::Raw => node.raw_score,
                    }
                };
                if prev_bg.is_some_and(|p| p != bg) {
                    objective -= penalty;
                }
                prev_bg = Some(bg);
            }
            if best.is_none_or(|(_, o)| objective > o) {
                best = Some((mask, objective));
            }
        }
        let (mask, objective) = best.expect("at least one labelling");
        let labels = (0..n)
            .map(|t| {
                if mask >> (n - 1 - t) & 1 == 1 {
                    Label::Background
                } else {
                    Label::Action
                }
            })
            .collect();
        Ok((
            Labelling {
                class_id: path.class_id,
                labels,
            },
            objective,
        ))
    }
}
