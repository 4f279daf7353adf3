//! Test-only oracles, written against the cost definitions directly rather
//! than the library's network tables.

#![allow(dead_code)]

use textflow::model::{CandidateBox, EntryCostMode, Params, Rect};
use textflow::synth::SplitMix64;

/// Up to `max_n` candidates packed into a small area so that many pairs are
/// admissible; sizes stay within a narrow band.
pub fn random_candidates(rng: &mut SplitMix64, max_n: usize) -> Vec<CandidateBox> {
    let n = rng.int([1, max_n]);
    let base = rng.uniform([12.0, 30.0]);
    (0..n)
        .map(|id| {
            let w = base * rng.uniform([0.92, 1.08]);
            let x = rng.uniform([0.0, 6.0 * base]);
            let y = rng.uniform([0.0, 0.8 * base]);
            let p = rng.uniform([0.0, 1.0]);
            CandidateBox::new(id, x, y, w, p).unwrap()
        })
        .collect()
}

fn fp(v: f64, scale: i64) -> i64 {
    (v * scale as f64).round() as i64
}

fn admissible(a: &CandidateBox, b: &CandidateBox, p: &Params) -> bool {
    let (ar, br) = (a.rect(), b.rect());
    let m = a.w().min(b.w());
    let h = (br.x - ar.right()).max(ar.x - br.right()).max(0.0);
    let v = ar.bottom().min(br.bottom()) - ar.y.max(br.y);
    let s = (a.w() - b.w()).abs() / m;
    h / m < p.t_h && v / m > p.t_v && s < p.t_s
}

fn smooth(a: &CandidateBox, b: &CandidateBox, p: &Params) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt() / ((a.w() + b.w()) / 2.0);
    let s = (a.w() - b.w()).abs() / a.w().min(b.w());
    p.alpha * d + (1.0 - p.alpha) * s
}

/// Brute-force minimum over every non-empty increasing candidate sequence
/// whose consecutive pairs are admissible. `sorted` must be in network order.
/// Returns (positions, fixed-point cost); ties go to the smaller sequence.
pub fn brute_force_min(sorted: &[CandidateBox], p: &Params) -> Option<(Vec<usize>, i64)> {
    let n = sorted.len();
    assert!(n <= 16);
    let scale = p.cost_scale;
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            adj[i][j] = admissible(&sorted[i], &sorted[j], p);
        }
    }
    // transitive closure
    let mut reach = adj.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let conf: Vec<f64> = sorted.iter().map(|c| c.confidence()).collect();
    let fold = |vals: Vec<f64>| -> f64 {
        if vals.is_empty() {
            return 0.0;
        }
        match p.entry_cost_mode {
            // -max(-p) == min(p)
            EntryCostMode::Literal => -vals.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max),
            EntryCostMode::ConfidenceMax => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let entry: Vec<i64> = (0..n)
        .map(|a| fp(fold((0..n).filter(|&j| reach[j][a]).map(|j| conf[j]).collect()), scale))
        .collect();
    let exit: Vec<i64> = (0..n)
        .map(|a| fp(fold((0..n).filter(|&j| reach[a][j]).map(|j| conf[j]).collect()), scale))
        .collect();

    let mut best: Option<(Vec<usize>, i64)> = None;
    for mask in 1u32..(1u32 << n) {
        let seq: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if seq.windows(2).any(|w| !adj[w[0]][w[1]]) {
            continue;
        }
        let mut cost = entry[seq[0]] + exit[*seq.last().unwrap()];
        for &i in &seq {
            cost += fp(p.beta * -conf[i], scale);
        }
        for w in seq.windows(2) {
            cost += fp(smooth(&sorted[w[0]], &sorted[w[1]], p), scale);
        }
        let better = match &best {
            None => true,
            Some((s, c)) => cost < *c || (cost == *c && seq < *s),
        };
        if better {
            best = Some((seq, cost));
        }
    }
    best
}

fn iou(a: &Rect, b: &Rect) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        0.0
    } else {
        inter / (a.w * a.h + b.w * b.h - inter)
    }
}

/// Largest number of disjoint (truth, detection) pairs with IoU above the
/// threshold, by trying every assignment of truths to detections.
pub fn exhaustive_matches(dets: &[Rect], gts: &[Rect], threshold: f64) -> usize {
    fn go(g: usize, gts: &[Rect], dets: &[Rect], used: &mut Vec<bool>, thr: f64) -> usize {
        if g == gts.len() {
            return 0;
        }
        let mut best = go(g + 1, gts, dets, used, thr);
        for d in 0..dets.len() {
            if !used[d] && iou(&gts[g], &dets[d]) > thr {
                used[d] = true;
                best = best.max(1 + go(g + 1, gts, dets, used, thr));
                used[d] = false;
            }
        }
        best
    }
    go(0, gts, dets, &mut vec![false; dets.len()], threshold)
}
