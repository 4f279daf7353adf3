//! Geometry, candidate, scene and parameter types shared by the pipeline.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixel coordinates, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Smallest rectangle containing both.
    pub fn union_bounds(&self, other: &Rect) -> Rect {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        Rect {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Rect {
        Rect { x: self.x + dx, y: self.y + dy, ..*self }
    }
}

/// Intersection over union. Zero-area or disjoint pairs give 0.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// A square character candidate with its text confidence `p(Text|A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidate")]
pub struct CandidateBox {
    id: usize,
    x: f64,
    y: f64,
    w: f64,
    confidence: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCandidate {
    id: usize,
    x: f64,
    y: f64,
    w: f64,
    confidence: f64,
}

impl TryFrom<RawCandidate> for CandidateBox {
    type Error = Error;

    fn try_from(raw: RawCandidate) -> Result<Self> {
        CandidateBox::new(raw.id, raw.x, raw.y, raw.w, raw.confidence)
    }
}

impl CandidateBox {
    pub fn new(id: usize, x: f64, y: f64, w: f64, confidence: f64) -> Result<Self> {
        let bad = |reason: String| Err(Error::InvalidCandidate { id, reason });
        if !x.is_finite() || !y.is_finite() {
            return bad(format!("non-finite position ({x}, {y})"));
        }
        if !(w.is_finite() && w > 0.0) {
            return bad(format!("side length must be positive, got {w}"));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return bad(format!("confidence must lie in [0, 1], got {confidence}"));
        }
        Ok(CandidateBox { id, x, y, w, confidence })
    }

    /// Builds a candidate from a rectangle, which must be square.
    pub fn from_rect(id: usize, rect: Rect, confidence: f64) -> Result<Self> {
        if rect.w != rect.h {
            return Err(Error::InvalidCandidate {
                id,
                reason: format!("box must be square, got {}x{}", rect.w, rect.h),
            });
        }
        CandidateBox::new(id, rect.x, rect.y, rect.w, confidence)
    }

    pub fn id(&self) -> usize {
        self.id
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    /// Side length.
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.w)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.w / 2.0)
    }

    pub fn with_id(self, id: usize) -> Self {
        CandidateBox { id, ..self }
    }

    pub fn with_confidence(self, confidence: f64) -> Result<Self> {
        CandidateBox::new(self.id, self.x, self.y, self.w, confidence)
    }

    /// Copy with position and size multiplied by `s`.
    pub fn scaled(self, s: f64) -> Result<Self> {
        CandidateBox::new(self.id, self.x * s, self.y * s, self.w * s, self.confidence)
    }

    pub fn translated(self, dx: f64, dy: f64) -> Result<Self> {
        CandidateBox::new(self.id, self.x + dx, self.y + dy, self.w, self.confidence)
    }
}

/// Sort order used for network construction: center x, then center y, then id.
pub fn candidate_order(a: &CandidateBox, b: &CandidateBox) -> Ordering {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ax.total_cmp(&bx)
        .then(ay.total_cmp(&by))
        .then(a.id.cmp(&b.id))
}

/// Row-major grayscale intensity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let raster = Raster { rows, cols, data };
        raster.validate()?;
        Ok(raster)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Raster { rows, cols, data: vec![0.0; rows * cols] }
    }

    fn validate(&self) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidScene(format!(
                "raster has {} values, expected rows*cols = {}",
                self.data.len(),
                self.rows * self.cols
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScene("raster contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }
}

/// A set of candidates in one image, optionally with image bounds, a raster
/// and precomputed gradient profiles keyed by line index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawScene")]
pub struct Scene {
    pub image_width: u32,
    pub image_height: u32,
    pub candidates: Vec<CandidateBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raster: Option<Raster>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<BTreeMap<usize, Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    #[serde(default)]
    image_width: u32,
    #[serde(default)]
    image_height: u32,
    candidates: Vec<CandidateBox>,
    #[serde(default)]
    raster: Option<Raster>,
    #[serde(default)]
    profiles: Option<BTreeMap<usize, Vec<f64>>>,
}

impl TryFrom<RawScene> for Scene {
    type Error = Error;

    fn try_from(raw: RawScene) -> Result<Self> {
        let scene = Scene {
            image_width: raw.image_width,
            image_height: raw.image_height,
            candidates: raw.candidates,
            raster: raw.raster,
            profiles: raw.profiles,
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl Scene {
    /// Scene with unknown image bounds.
    pub fn new(candidates: Vec<CandidateBox>) -> Result<Self> {
        Scene::with_bounds(candidates, 0, 0)
    }

    pub fn with_bounds(candidates: Vec<CandidateBox>, image_width: u32, image_height: u32) -> Result<Self> {
        let scene = Scene { image_width, image_height, candidates, raster: None, profiles: None };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.candidates.len();
        let mut seen = vec![false; n];
        for c in &self.candidates {
            if c.id >= n {
                return Err(Error::InvalidScene(format!(
                    "candidate id {} is not dense in 0..{n}",
                    c.id
                )));
            }
            if std::mem::replace(&mut seen[c.id], true) {
                return Err(Error::InvalidScene(format!("duplicate candidate id {}", c.id)));
            }
        }
        if self.image_width > 0 && self.image_height > 0 {
            let (iw, ih) = (self.image_width as f64, self.image_height as f64);
            for c in &self.candidates {
                let r = c.rect();
                if r.x < 0.0 || r.y < 0.0 || r.right() > iw || r.bottom() > ih {
                    return Err(Error::InvalidScene(format!(
                        "candidate {} lies outside the {}x{} image",
                        c.id, self.image_width, self.image_height
                    )));
                }
            }
        }
        if let Some(raster) = &self.raster {
            raster.validate()?;
        }
        if let Some(profiles) = &self.profiles {
            for (line, values) in profiles {
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidScene(format!(
                        "profile for line {line} has negative or non-finite values"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Candidate lookup by id; ids are dense so this is a direct index when
    /// the scene is in id order.
    pub fn candidate(&self, id: usize) -> Option<&CandidateBox> {
        match self.candidates.get(id) {
            Some(c) if c.id == id => Some(c),
            _ => self.candidates.iter().find(|c| c.id == id),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A scene reordered for network construction, with ids re-densified.
/// `original_ids[i]` is the input id of the candidate now carrying id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedScene {
    pub scene: Scene,
    pub original_ids: Vec<usize>,
}

pub fn sort_candidates(scene: &Scene) -> SortedScene {
    let mut ordered = scene.candidates.clone();
    ordered.sort_by(candidate_order);
    let original_ids = ordered.iter().map(|c| c.id).collect();
    let candidates = ordered
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.with_id(i))
        .collect();
    SortedScene {
        scene: Scene { candidates, ..scene.clone() },
        original_ids,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryCostMode {
    /// `-max_j C1(j)`, i.e. the minimum predecessor confidence.
    #[default]
    Literal,
    /// Maximum predecessor confidence.
    ConfidenceMax,
}

/// Model parameters. Any field may be omitted from a JSON config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Horizontal gap threshold.
    pub t_h: f64,
    /// Vertical overlap threshold.
    pub t_v: f64,
    /// Size similarity threshold.
    pub t_s: f64,
    /// Distance vs size weight in the smoothness cost.
    pub alpha: f64,
    /// Data cost weight.
    pub beta: f64,
    /// IoU above which candidates are deleted after a flow is accepted.
    pub overlap_delete: f64,
    /// Fixed-point multiplier for stored costs.
    pub cost_scale: i64,
    pub entry_cost_mode: EntryCostMode,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            t_h: 2.0,
            t_v: 0.6,
            t_s: 0.2,
            alpha: 0.4,
            beta: 2.0,
            overlap_delete: 0.5,
            cost_scale: 1_000_000,
            entry_cost_mode: EntryCostMode::Literal,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::InvalidParam { field, reason });
        for (field, v) in [("t_h", self.t_h), ("t_v", self.t_v), ("t_s", self.t_s)] {
            if !v.is_finite() {
                return bad(field, format!("must be finite, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", format!("must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta", format!("must be positive, got {}", self.beta));
        }
        if !(self.overlap_delete > 0.0 && self.overlap_delete <= 1.0) {
            return bad("overlap_delete", format!("must lie in (0, 1], got {}", self.overlap_delete));
        }
        if self.cost_scale <= 0 {
            return bad("cost_scale", format!("must be a positive integer, got {}", self.cost_scale));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: Params = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }
}

/// A detected text line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextLine {
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub members: Vec<usize>,
    pub cost: f64,
    #[serde(default)]
    pub words: Option<Vec<Rect>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq(id: usize, x: f64, y: f64, w: f64) -> CandidateBox {
        CandidateBox::new(id, x, y, w, 0.5).unwrap()
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &Rect::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert_eq!(iou(&a, &Rect::new(0.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn iou_half_shift_matches_pixel_count() {
        let a = Rect::new(0.0, 0.0, 10.0, 10.0);
        let b = Rect::new(5.0, 0.0, 10.0, 10.0);
        // rasterize both on an integer grid and count pixels
        let inside = |r: &Rect, px: i32, py: i32| {
            (px as f64) >= r.x && (px as f64) < r.right() && (py as f64) >= r.y && (py as f64) < r.bottom()
        };
        let (mut inter, mut uni) = (0, 0);
        for py in -2..20 {
            for px in -2..20 {
                let (ia, ib) = (inside(&a, px, py), inside(&b, px, py));
                inter += (ia && ib) as i32;
                uni += (ia || ib) as i32;
            }
        }
        let counted = inter as f64 / uni as f64;
        assert!((counted - 50.0 / 150.0).abs() < 1e-12);
        assert!((iou(&a, &b) - counted).abs() < 1e-12);
    }

    #[test]
    fn candidate_validation() {
        assert!(CandidateBox::new(0, 0.0, 0.0, 0.0, 0.5).is_err());
        assert!(CandidateBox::new(0, 0.0, 0.0, -1.0, 0.5).is_err());
        assert!(CandidateBox::new(0, 0.0, 0.0, 1.0, 1.01).is_err());
        assert!(CandidateBox::new(0, 0.0, 0.0, 1.0, -0.01).is_err());
        assert!(CandidateBox::from_rect(0, Rect::new(0.0, 0.0, 2.0, 3.0), 0.5).is_err());
        assert!(CandidateBox::from_rect(0, Rect::new(0.0, 0.0, 2.0, 2.0), 0.5).is_ok());
    }

    #[test]
    fn sort_keeps_sorted_scene() {
        let scene = Scene::new((0..4).map(|i| sq(i, i as f64 * 10.0, 0.0, 5.0)).collect()).unwrap();
        let sorted = sort_candidates(&scene);
        assert_eq!(sorted.original_ids, vec![0, 1, 2, 3]);
        assert_eq!(sorted.scene.candidates, scene.candidates);
    }

    #[test]
    fn sort_ties_on_center_x_use_center_y() {
        let scene = Scene::new(vec![sq(0, 0.0, 30.0, 5.0), sq(1, 0.0, 10.0, 5.0)]).unwrap();
        assert_eq!(sort_candidates(&scene).original_ids, vec![1, 0]);
    }

    #[test]
    fn sort_reversed_scene() {
        let scene = Scene::new((0..5).map(|i| sq(i, 40.0 - i as f64 * 10.0, 0.0, 5.0)).collect()).unwrap();
        let sorted = sort_candidates(&scene);
        assert_eq!(sorted.original_ids, vec![4, 3, 2, 1, 0]);
        for (i, c) in sorted.scene.candidates.iter().enumerate() {
            assert_eq!(c.id(), i);
        }
    }

    #[test]
    fn scene_rejects_sparse_or_duplicate_ids() {
        assert!(Scene::new(vec![sq(1, 0.0, 0.0, 1.0)]).is_err());
        assert!(Scene::new(vec![sq(0, 0.0, 0.0, 1.0), sq(0, 2.0, 0.0, 1.0)]).is_err());
        assert!(Scene::with_bounds(vec![sq(0, 95.0, 0.0, 10.0)], 100, 100).is_err());
    }

    #[test]
    fn scene_json_rejects_unknown_field() {
        let err = Scene::from_json(r#"{"candidates": [], "colour": 1}"#).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = Scene::from_json(r#"{"candidates": [{"id":0,"x":0,"y":0,"w":1,"h":1,"confidence":0.5}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("`h`"), "{err}");
    }

    #[test]
    fn scene_json_raster_shape_checked() {
        let err = Scene::from_json(r#"{"candidates": [], "raster": {"rows": 2, "cols": 2, "data": [0, 1, 2]}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("raster"), "{err}");
    }

    #[test]
    fn params_defaults_and_partial_override() {
        let p = Params::from_json(r#"{"alpha": 0.3}"#).unwrap();
        assert_eq!(p.alpha, 0.3);
        assert_eq!(p.t_h, 2.0);
        assert_eq!(p.t_v, 0.6);
        assert_eq!(p.t_s, 0.2);
        assert_eq!(p.beta, 2.0);
        assert_eq!(p.overlap_delete, 0.5);
        assert_eq!(p.cost_scale, 1_000_000);
        assert_eq!(p.entry_cost_mode, EntryCostMode::Literal);
        let err = Params::from_json(r#"{"gamma": 1}"#).unwrap_err();
        assert!(err.to_string().contains("gamma"));
        assert!(Params::from_json(r#"{"beta": 0}"#).is_err());
    }

    proptest! {
        #[test]
        fn iou_symmetric_bounded(
            ax in -50.0..50.0f64, ay in -50.0..50.0f64, aw in 0.0..40.0f64, ah in 0.0..40.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64, bw in 0.0..40.0f64, bh in 0.0..40.0f64,
        ) {
            let a = Rect::new(ax, ay, aw, ah);
            let b = Rect::new(bx, by, bw, bh);
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
        }

        #[test]
        fn sort_is_sorted_permutation(boxes in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64, 1.0..20.0f64), 0..30)) {
            let cands: Vec<_> = boxes.iter().enumerate().map(|(i, &(x, y, w))| sq(i, x, y, w)).collect();
            let scene = Scene::new(cands.clone()).unwrap();
            let sorted = sort_candidates(&scene);
            let mut ids = sorted.original_ids.clone();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..cands.len()).collect::<Vec<_>>());
            for (c, &orig) in sorted.scene.candidates.iter().zip(&sorted.original_ids) {
                prop_assert_eq!(c.rect(), cands[orig].rect());
            }
            for pair in sorted.original_ids.windows(2) {
                prop_assert_ne!(candidate_order(&cands[pair[0]], &cands[pair[1]]), Ordering::Greater);
            }
        }

        #[test]
        fn params_round_trip_bit_exact(t_h in 0.0..10.0f64, t_v in 0.0..1.0f64, alpha in 0.0..1.0f64, beta in 0.01..5.0f64) {
            let p = Params { t_h, t_v, alpha, beta, ..Params::default() };
            let back = Params::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
            prop_assert_eq!(back.t_h.to_bits(), p.t_h.to_bits());
            prop_assert_eq!(back.t_v.to_bits(), p.t_v.to_bits());
            prop_assert_eq!(back.alpha.to_bits(), p.alpha.to_bits());
            prop_assert_eq!(back.beta.to_bits(), p.beta.to_bits());
        }
    }
}
