//! Text lines from flows, and word splitting by gradient projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{candidate_order, Params, Raster, Rect, Scene, TextLine};
use crate::solver::{extract_all, ExtractionResult, FlowPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Supplied,
    Computed,
}

/// Column-wise gradient energy over a line box.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientProfile {
    pub values: Vec<f64>,
    pub source: ProfileSource,
}

impl GradientProfile {
    pub fn supplied(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidScene("profile values must be finite and non-negative".into()));
        }
        Ok(GradientProfile { values, source: ProfileSource::Supplied })
    }
}

/// Thresholds for blank-run detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordSplit {
    /// Normalized profile value below which a column counts as blank.
    pub blank_ratio: f64,
    /// Minimum blank run, as a fraction of line height, that separates words.
    pub min_gap_ratio: f64,
}

impl Default for WordSplit {
    fn default() -> Self {
        WordSplit { blank_ratio: 0.15, min_gap_ratio: 0.3 }
    }
}

pub fn path_to_line(path: &FlowPath, scene: &Scene, scale: i64) -> Result<TextLine> {
    let members = path
        .members
        .iter()
        .map(|&id| scene.candidate(id).ok_or(Error::UnknownCandidate(id)))
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = members.first() else {
        return Err(Error::InvalidScene("flow path has no members".into()));
    };
    for (i, pair) in members.windows(2).enumerate() {
        if !candidate_order(pair[0], pair[1]).is_lt() {
            return Err(Error::PathOrder(i + 1));
        }
    }
    let bbox = members.iter().fold(first.rect(), |acc, c| acc.union_bounds(&c.rect()));
    Ok(TextLine {
        bbox,
        members: path.members.clone(),
        cost: path.cost(scale),
        words: None,
    })
}

/// Pixel columns covered by the line box: `round(x) .. round(x) + round(w)`.
fn line_columns(line: &TextLine) -> (i64, usize) {
    let start = line.bbox.x.round() as i64;
    let width = line.bbox.w.round().max(0.0) as usize;
    (start, width)
}

/// Sums absolute central horizontal differences down each column of the
/// line box. Neighbor indices clamp at the raster border; columns outside the
/// raster contribute zero.
pub fn compute_profile(line: &TextLine, raster: &Raster) -> Result<GradientProfile> {
    let (col0, width) = line_columns(line);
    let row0 = line.bbox.y.round() as i64;
    let height = line.bbox.h.round().max(0.0) as i64;
    let (rows, cols) = (raster.rows as i64, raster.cols as i64);
    let r_lo = row0.max(0);
    let r_hi = (row0 + height).min(rows);
    let c_lo = col0.max(0);
    let c_hi = (col0 + width as i64).min(cols);
    if r_lo >= r_hi || c_lo >= c_hi {
        return Err(Error::OutsideRaster);
    }
    let mut values = vec![0.0; width];
    for (k, value) in values.iter_mut().enumerate() {
        let c = col0 + k as i64;
        if c < 0 || c >= cols {
            continue;
        }
        let left = (c - 1).max(0) as usize;
        let right = (c + 1).min(cols - 1) as usize;
        *value = (r_lo..r_hi)
            .map(|r| (raster.get(r as usize, right) - raster.get(r as usize, left)).abs() / 2.0)
            .sum();
    }
    Ok(GradientProfile { values, source: ProfileSource::Computed })
}

/// Maximal runs `[start, end)` of columns below `blank_ratio` after
/// normalizing by the maximum.
pub fn blank_runs(values: &[f64], blank_ratio: f64) -> Vec<(usize, usize)> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![(0, values.len())];
    }
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (v / max < blank_ratio, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len()));
    }
    runs
}

/// Splits a line into word rectangles at the centers of wide blank runs.
pub fn split_words(line: &TextLine, profile: &GradientProfile, opts: &WordSplit) -> Result<Vec<Rect>> {
    let (col0, width) = line_columns(line);
    let values = &profile.values;
    if values.len() != width {
        return Err(Error::ProfileLength { expected: width, got: values.len() });
    }
    let b = &line.bbox;
    if values.iter().all(|&v| v <= 0.0) {
        return Ok(vec![*b]);
    }
    let runs = blank_runs(values, opts.blank_ratio);
    let min_len = opts.min_gap_ratio * b.h;
    // trim leading and trailing blanks
    let mut lo = 0;
    let mut hi = width;
    let mut interior = Vec::new();
    for &(s, e) in &runs {
        if s == 0 {
            lo = e;
        } else if e == width {
            hi = s;
        } else if (e - s) as f64 >= min_len {
            interior.push((s, e));
        }
    }
    let col_x = |c: f64| (col0 as f64 + c).clamp(b.x, b.right());
    let mut cuts = vec![col_x(lo as f64)];
    cuts.extend(interior.iter().map(|&(s, e)| col_x((s + e) as f64 / 2.0)));
    cuts.push(col_x(hi as f64));
    Ok(cuts
        .windows(2)
        .map(|w| Rect::new(w[0], b.y, w[1] - w[0], b.h))
        .collect())
}

/// Full pipeline for one scene: extraction, line boxes, and word splitting
/// where the scene supplies a profile for the line index or a raster.
pub fn detect_lines(scene: &Scene, params: &Params, split: &WordSplit) -> Result<(ExtractionResult, Vec<TextLine>)> {
    let result = extract_all(scene, params)?;
    let mut lines = Vec::with_capacity(result.accepted.len());
    for (index, path) in result.accepted.iter().enumerate() {
        let mut line = path_to_line(path, scene, result.scale)?;
        let supplied = scene.profiles.as_ref().and_then(|p| p.get(&index));
        let profile = match (supplied, &scene.raster) {
            (Some(values), _) => Some(GradientProfile::supplied(values.clone())?),
            (None, Some(raster)) => Some(compute_profile(&line, raster)?),
            (None, None) => None,
        };
        if let Some(profile) = profile {
            line.words = Some(split_words(&line, &profile, split)?);
        }
        lines.push(line);
    }
    Ok((result, lines))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CandidateBox;

    fn line(x: f64, y: f64, w: f64, h: f64) -> TextLine {
        TextLine { bbox: Rect::new(x, y, w, h), members: vec![0], cost: -1.0, words: None }
    }

    #[test]
    fn single_member_line() {
        let scene = Scene::new(vec![CandidateBox::new(0, 10.0, 10.0, 20.0, 1.0).unwrap()]).unwrap();
        let l = path_to_line(&FlowPath { members: vec![0], cost_fp: -2_000_000 }, &scene, 1_000_000).unwrap();
        assert_eq!(l.bbox, Rect::new(10.0, 10.0, 20.0, 20.0));
        assert_eq!(l.cost, -2.0);
    }

    #[test]
    fn two_member_bounds_and_order() {
        let scene = Scene::new(vec![
            CandidateBox::new(0, 0.0, 0.0, 10.0, 1.0).unwrap(),
            CandidateBox::new(1, 20.0, 2.0, 10.0, 1.0).unwrap(),
        ])
        .unwrap();
        let l = path_to_line(&FlowPath { members: vec![0, 1], cost_fp: 0 }, &scene, 1).unwrap();
        assert_eq!(l.bbox, Rect::new(0.0, 0.0, 30.0, 12.0));
        let err = path_to_line(&FlowPath { members: vec![1, 0], cost_fp: 0 }, &scene, 1).unwrap_err();
        assert!(matches!(err, Error::PathOrder(1)));
        assert!(path_to_line(&FlowPath { members: vec![7], cost_fp: 0 }, &scene, 1).is_err());
    }

    #[test]
    fn constant_raster_zero_profile() {
        let raster = Raster::new(10, 20, vec![3.0; 200]).unwrap();
        let p = compute_profile(&line(2.0, 1.0, 10.0, 5.0), &raster).unwrap();
        assert_eq!(p.values, vec![0.0; 10]);
        assert_eq!(p.source, ProfileSource::Computed);
    }

    #[test]
    fn step_edge_support() {
        let k = 7;
        let mut raster = Raster::zeros(4, 16);
        for r in 0..4 {
            for c in k..16 {
                raster.set(r, c, 1.0);
            }
        }
        let p = compute_profile(&line(0.0, 0.0, 16.0, 4.0), &raster).unwrap();
        for (c, &v) in p.values.iter().enumerate() {
            if c == k - 1 || c == k {
                assert_eq!(v, 2.0, "column {c}");
            } else {
                assert_eq!(v, 0.0, "column {c}");
            }
        }
    }

    #[test]
    fn outside_raster_rejected() {
        let raster = Raster::zeros(10, 10);
        assert!(matches!(compute_profile(&line(20.0, 0.0, 5.0, 5.0), &raster), Err(Error::OutsideRaster)));
        // partially outside is fine, outside columns are zero
        let p = compute_profile(&line(-3.0, 0.0, 6.0, 5.0), &raster).unwrap();
        assert_eq!(p.values.len(), 6);
    }

    #[test]
    fn translation_equivariant_profile() {
        let mut raster = Raster::zeros(20, 40);
        for r in 0..20 {
            for c in 0..40 {
                raster.set(r, c, ((r * 7 + c * 13) % 5) as f64);
            }
        }
        let mut shifted = Raster::zeros(25, 50);
        for r in 0..20 {
            for c in 0..40 {
                shifted.set(r + 5, c + 10, raster.get(r, c));
            }
        }
        let a = compute_profile(&line(3.0, 2.0, 30.0, 12.0), &raster).unwrap();
        let b = compute_profile(&line(13.0, 7.0, 30.0, 12.0), &shifted).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn zero_profile_one_word() {
        let l = line(0.0, 0.0, 20.0, 10.0);
        let words = split_words(&l, &GradientProfile::supplied(vec![0.0; 20]).unwrap(), &WordSplit::default()).unwrap();
        assert_eq!(words, vec![l.bbox]);
    }

    #[test]
    fn wide_gap_splits_at_center() {
        // 10 ink columns, 8 blank (>= 0.3 * 10), 12 ink
        let mut values = vec![1.0; 10];
        values.extend(vec![0.0; 8]);
        values.extend(vec![1.0; 12]);
        let l = line(100.0, 5.0, 30.0, 10.0);
        let words = split_words(&l, &GradientProfile::supplied(values).unwrap(), &WordSplit::default()).unwrap();
        assert_eq!(words, vec![Rect::new(100.0, 5.0, 14.0, 10.0), Rect::new(114.0, 5.0, 16.0, 10.0)]);
    }

    #[test]
    fn narrow_dips_do_not_split() {
        // dips of 2 columns < 0.3 * 10
        let mut values = Vec::new();
        for _ in 0..4 {
            values.extend([1.0, 0.8, 0.9, 0.0, 0.05]);
        }
        values.extend([1.0, 1.0]);
        let l = line(0.0, 0.0, values.len() as f64, 10.0);
        let words = split_words(&l, &GradientProfile::supplied(values).unwrap(), &WordSplit::default()).unwrap();
        assert_eq!(words.len(), 1);
    }

    #[test]
    fn leading_and_trailing_blanks_trim() {
        let mut values = vec![0.0; 5];
        values.extend(vec![1.0; 10]);
        values.extend(vec![0.0; 5]);
        let l = line(0.0, 0.0, 20.0, 10.0);
        let words = split_words(&l, &GradientProfile::supplied(values).unwrap(), &WordSplit::default()).unwrap();
        assert_eq!(words, vec![Rect::new(5.0, 0.0, 10.0, 10.0)]);
    }

    #[test]
    fn profile_length_checked() {
        let l = line(0.0, 0.0, 20.0, 10.0);
        let err = split_words(&l, &GradientProfile::supplied(vec![1.0; 19]).unwrap(), &WordSplit::default());
        assert!(matches!(err, Err(Error::ProfileLength { expected: 20, got: 19 })));
    }
}
