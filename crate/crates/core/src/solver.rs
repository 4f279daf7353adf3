//! Iterative text flow extraction.
//!
//! A unit flow on a unit-capacity DAG is exactly a shortest source-to-sink
//! path, so each iteration is one relaxation pass in reverse topological
//! order. Negative data costs are fine since the graph has no cycles.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{iou, sort_candidates, CandidateBox, Params, Scene};
use crate::network::FlowNetwork;

/// One extracted flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowPath {
    /// Candidate ids in flow order.
    pub members: Vec<usize>,
    pub cost_fp: i64,
}

impl FlowPath {
    pub fn cost(&self, scale: i64) -> f64 {
        self.cost_fp as f64 / scale as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionResult {
    /// Accepted flows in extraction order, members as input scene ids.
    pub accepted: Vec<FlowPath>,
    /// Cost of the positive flow that stopped the loop, if any.
    pub rejected_final_cost_fp: Option<i64>,
    /// Ids removed after each accepted flow (members plus suppressed overlaps).
    pub deleted: Vec<Vec<usize>>,
    pub iterations: usize,
    pub scale: i64,
}

/// Minimum-cost path as node positions. Ties go to the lexicographically
/// smallest position sequence.
pub fn min_cost_positions(network: &FlowNetwork) -> Option<(Vec<usize>, i64)> {
    let n = network.len();
    if n == 0 {
        return None;
    }
    // best[i]: cheapest cost from entering node i's data edge to the sink
    let mut best = vec![0i64; n];
    let mut next: Vec<Option<usize>> = vec![None; n];
    for i in (0..n).rev() {
        let mut tail = network.exit_cost_fp[i];
        let mut succ = None;
        for &e in &network.out_edges[i] {
            let edge = &network.edges[e];
            let through = edge.cost_fp + best[edge.to];
            // stopping here is a prefix of any continuation, so it wins ties;
            // heads are ascending so the first strict improvement is the smallest
            if through < tail {
                tail = through;
                succ = Some(edge.to);
            }
        }
        best[i] = network.data_cost_fp[i] + tail;
        next[i] = succ;
    }
    let start = (0..n)
        .min_by_key(|&i| (network.entry_cost_fp[i] + best[i], i))
        .expect("non-empty");
    let cost = network.entry_cost_fp[start] + best[start];
    let mut positions = vec![start];
    while let Some(j) = next[*positions.last().unwrap()] {
        positions.push(j);
    }
    Some((positions, cost))
}

/// Minimum-cost source-to-sink flow of value one, members as node ids.
pub fn min_cost_path(network: &FlowNetwork) -> Option<FlowPath> {
    min_cost_positions(network).map(|(positions, cost_fp)| FlowPath {
        members: positions.iter().map(|&p| network.nodes[p]).collect(),
        cost_fp,
    })
}

/// Ids to delete after accepting `path`: its members and every remaining
/// candidate overlapping a member by more than `overlap_delete` IoU.
pub fn suppress_overlaps(remaining: &[CandidateBox], path: &FlowPath, params: &Params) -> Vec<usize> {
    let member_rects: Vec<_> = remaining
        .iter()
        .filter(|c| path.members.contains(&c.id()))
        .map(|c| c.rect())
        .collect();
    remaining
        .iter()
        .filter(|c| {
            path.members.contains(&c.id())
                || member_rects.iter().any(|m| iou(m, &c.rect()) > params.overlap_delete)
        })
        .map(|c| c.id())
        .collect()
}

/// Runs extraction until the cheapest remaining flow has positive cost or
/// no candidates are left. Entry and exit costs are rebuilt every iteration.
pub fn extract_all(scene: &Scene, params: &Params) -> Result<ExtractionResult> {
    params.validate()?;
    let sorted = sort_candidates(scene);
    let mut remaining = sorted.scene.candidates.clone();
    let mut result = ExtractionResult { scale: params.cost_scale, ..Default::default() };
    let to_original = |ids: &[usize]| ids.iter().map(|&i| sorted.original_ids[i]).collect::<Vec<_>>();

    while !remaining.is_empty() {
        let network = FlowNetwork::build(&remaining, params, None)?;
        let Some(path) = min_cost_path(&network) else { break };
        result.iterations += 1;
        if path.cost_fp > 0 {
            result.rejected_final_cost_fp = Some(path.cost_fp);
            break;
        }
        let removed = suppress_overlaps(&remaining, &path, params);
        remaining.retain(|c| !removed.contains(&c.id()));
        result.deleted.push(to_original(&removed));
        result.accepted.push(FlowPath { members: to_original(&path.members), cost_fp: path.cost_fp });
    }
    Ok(result)
}
