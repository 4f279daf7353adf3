//! Detection scoring: one-to-one IoU matching and the Wolf-Jolion
//! many-to-many coverage protocol.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{iou, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Line,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Protocol {
    OneToOne,
    WolfJolion,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::OneToOne => "one_to_one",
            Protocol::WolfJolion => "wolf_jolion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub boxes: Vec<Rect>,
    #[serde(default)]
    pub granularity: Granularity,
}

impl GroundTruth {
    pub fn new(boxes: Vec<Rect>, granularity: Granularity) -> Result<Self> {
        let gt = GroundTruth { boxes, granularity };
        gt.validate()?;
        Ok(gt)
    }

    pub fn validate(&self) -> Result<()> {
        match self.boxes.iter().position(|b| b.area().is_nan() || b.area() <= 0.0) {
            Some(i) => Err(Error::InvalidScene(format!("ground-truth box {i} has no area"))),
            None => Ok(()),
        }
    }
}

/// Ground truth for a batch of images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub images: Vec<TruthImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthImage {
    pub id: String,
    pub boxes: Vec<Rect>,
    #[serde(default)]
    pub granularity: Granularity,
}

impl TruthImage {
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        GroundTruth::new(self.boxes.clone(), self.granularity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Scores {
    pub fn new(precision: f64, recall: f64) -> Self {
        Scores { precision, recall, f_score: f_score(precision, recall) }
    }
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub per_image: Vec<ImageScore>,
}

impl EvalReport {
    /// Macro average: precision and recall are means over images, the
    /// F-score is the harmonic mean of those means.
    pub fn aggregate(protocol: Protocol, per_image: Vec<ImageScore>) -> Self {
        let n = per_image.len();
        let (precision, recall) = if n == 0 {
            (1.0, 1.0)
        } else {
            let p = per_image.iter().map(|s| s.scores.precision).sum::<f64>() / n as f64;
            let r = per_image.iter().map(|s| s.scores.recall).sum::<f64>() / n as f64;
            (p, r)
        };
        EvalReport { protocol, precision, recall, f_score: f_score(precision, recall), per_image }
    }

    /// Plain-text table with recall, precision and F-score columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>8} {:>10} {:>8}", "Image", "Recall", "Precision", "F-score");
        for img in &self.per_image {
            let s = &img.scores;
            let _ = writeln!(out, "{:<20} {:>8.4} {:>10.4} {:>8.4}", img.id, s.recall, s.precision, s.f_score);
        }
        let _ = writeln!(
            out,
            "{:<20} {:>8.4} {:>10.4} {:>8.4}",
            format!("mean ({})", self.protocol.name()),
            self.recall,
            self.precision,
            self.f_score
        );
        out
    }
}

fn canonical(rects: &[Rect]) -> Vec<Rect> {
    let mut sorted = rects.to_vec();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.w.total_cmp(&b.w))
            .then(a.h.total_cmp(&b.h))
    });
    sorted
}

/// `matched / total`, with an empty denominator scoring 1.
fn ratio(credit: f64, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        credit / total as f64
    }
}

/// Greedy one-to-one assignment by descending IoU; a pair counts when its
/// IoU exceeds `match_threshold`.
pub fn eval_one_to_one(detections: &[Rect], truth: &GroundTruth, match_threshold: f64) -> Scores {
    let dets = canonical(detections);
    let gts = canonical(&truth.boxes);
    let matched = greedy_matches(&dets, &gts, match_threshold);
    Scores::new(ratio(matched as f64, dets.len()), ratio(matched as f64, gts.len()))
}

fn greedy_matches(dets: &[Rect], gts: &[Rect], threshold: f64) -> usize {
    let mut pairs = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        for (di, d) in dets.iter().enumerate() {
            let v = iou(g, d);
            if v > threshold {
                pairs.push((v, gi, di));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gts.len()];
    let mut det_used = vec![false; dets.len()];
    let mut matched = 0;
    for (_, gi, di) in pairs {
        if !gt_used[gi] && !det_used[di] {
            gt_used[gi] = true;
            det_used[di] = true;
            matched += 1;
        }
    }
    matched
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WolfJolionParams {
    /// Area recall constraint.
    pub t_r: f64,
    /// Area precision constraint.
    pub t_p: f64,
    /// Credit for split and merge matches.
    pub scatter: f64,
}

impl Default for WolfJolionParams {
    fn default() -> Self {
        WolfJolionParams { t_r: 0.8, t_p: 0.4, scatter: 0.8 }
    }
}

/// Wolf-Jolion evaluation. One-to-one matches are resolved first, then one
/// truth split over several detections, then one detection merging several
/// truths. Every party of a split or merge earns `scatter`.
pub fn eval_wolf_jolion(detections: &[Rect], truth: &GroundTruth, params: &WolfJolionParams) -> Scores {
    let dets = canonical(detections);
    let gts = canonical(&truth.boxes);
    let (ng, nd) = (gts.len(), dets.len());
    let mut sigma = vec![vec![0.0; nd]; ng];
    let mut tau = vec![vec![0.0; nd]; ng];
    for (i, g) in gts.iter().enumerate() {
        for (j, d) in dets.iter().enumerate() {
            let inter = g.intersection_area(d);
            sigma[i][j] = inter / g.area();
            tau[i][j] = if d.area() > 0.0 { inter / d.area() } else { 0.0 };
        }
    }
    let significant = |i: usize, j: usize| sigma[i][j] > params.t_r && tau[i][j] > params.t_p;

    let mut gt_credit = vec![0.0; ng];
    let mut det_credit = vec![0.0; nd];
    let mut gt_done = vec![false; ng];
    let mut det_done = vec![false; nd];

    for i in 0..ng {
        for j in 0..nd {
            if significant(i, j)
                && (0..nd).filter(|&k| significant(i, k)).count() == 1
                && (0..ng).filter(|&k| significant(k, j)).count() == 1
            {
                gt_credit[i] = 1.0;
                det_credit[j] = 1.0;
                gt_done[i] = true;
                det_done[j] = true;
            }
        }
    }

    for i in 0..ng {
        if gt_done[i] {
            continue;
        }
        let parts: Vec<usize> = (0..nd).filter(|&j| !det_done[j] && tau[i][j] > params.t_p).collect();
        let coverage: f64 = parts.iter().map(|&j| sigma[i][j]).sum();
        if parts.len() >= 2 && coverage > params.t_r {
            gt_credit[i] = params.scatter;
            gt_done[i] = true;
            for j in parts {
                det_credit[j] = params.scatter;
                det_done[j] = true;
            }
        }
    }

    for j in 0..nd {
        if det_done[j] {
            continue;
        }
        let parts: Vec<usize> = (0..ng).filter(|&i| !gt_done[i] && sigma[i][j] > params.t_r).collect();
        let coverage: f64 = parts.iter().map(|&i| tau[i][j]).sum();
        if parts.len() >= 2 && coverage > params.t_p {
            det_credit[j] = params.scatter;
            det_done[j] = true;
            for i in parts {
                gt_credit[i] = params.scatter;
                gt_done[i] = true;
            }
        }
    }

    Scores::new(ratio(det_credit.iter().sum(), nd), ratio(gt_credit.iter().sum(), ng))
}
