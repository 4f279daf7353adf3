//! Flow network construction: transition edges and the four cost kinds.
//!
//! Every candidate becomes an in/out node pair joined by its data-cost edge.
//! Admissible transitions become smoothness edges, and every candidate is
//! wired to the source (entry cost) and the sink (exit cost). The solver only
//! needs the per-node and per-edge weights, so the pair structure is implicit.
//!
//! All stored costs are fixed-point integers (`round(cost * scale)`, half away
//! from zero). The real-valued cost functions are exported separately so they
//! can be checked on their own.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{candidate_order, CandidateBox, EntryCostMode, Params, Scene};

const MAX_CANDIDATES: usize = 1_000_000_000;

/// Horizontal gap between the x-extents, 0 when they overlap.
pub fn horizontal_gap(a: &CandidateBox, b: &CandidateBox) -> f64 {
    let gap = a.x().max(b.x()) - (a.x() + a.w()).min(b.x() + b.w());
    gap.max(0.0)
}

/// Signed overlap of the y-extents, negative when disjoint.
pub fn vertical_overlap(a: &CandidateBox, b: &CandidateBox) -> f64 {
    (a.y() + a.w()).min(b.y() + b.w()) - a.y().max(b.y())
}

/// `|W_a - W_b| / min(W_a, W_b)`.
pub fn size_difference(a: &CandidateBox, b: &CandidateBox) -> f64 {
    (a.w() - b.w()).abs() / a.w().min(b.w())
}

/// Center distance normalized by the mean side length.
pub fn normalized_distance(a: &CandidateBox, b: &CandidateBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by) / ((a.w() + b.w()) / 2.0)
}

/// Whether `b` may follow `a` in a text flow.
pub fn can_transition(a: &CandidateBox, b: &CandidateBox, params: &Params) -> bool {
    let min_w = a.w().min(b.w());
    horizontal_gap(a, b) / min_w < params.t_h
        && vertical_overlap(a, b) / min_w > params.t_v
        && size_difference(a, b) < params.t_s
}

pub fn data_cost(c: &CandidateBox) -> f64 {
    -c.confidence()
}

pub fn smoothness_cost(a: &CandidateBox, b: &CandidateBox, params: &Params) -> f64 {
    params.alpha * normalized_distance(a, b) + (1.0 - params.alpha) * size_difference(a, b)
}

/// Real-valued entry and exit costs over the transitive predecessor and
/// successor sets of each node. `edges` hold `(from, to)` positions into
/// `confidences`, with `from < to`.
pub fn entry_exit_costs(confidences: &[f64], edges: &[(usize, usize)], mode: EntryCostMode) -> (Vec<f64>, Vec<f64>) {
    let n = confidences.len();
    let pick = |a: f64, b: f64| match mode {
        EntryCostMode::Literal => a.min(b),
        EntryCostMode::ConfidenceMax => a.max(b),
    };
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(from, to) in edges {
        debug_assert!(from < to);
        preds[to].push(from);
        succs[from].push(to);
    }

    // best confidence among everything that reaches (or is reached by) a node
    let mut entry: Vec<Option<f64>> = vec![None; n];
    for v in 0..n {
        let mut acc: Option<f64> = None;
        for &u in &preds[v] {
            let through = entry[u].map_or(confidences[u], |e| pick(e, confidences[u]));
            acc = Some(acc.map_or(through, |a| pick(a, through)));
        }
        entry[v] = acc;
    }
    let mut exit: Vec<Option<f64>> = vec![None; n];
    for v in (0..n).rev() {
        let mut acc: Option<f64> = None;
        for &w in &succs[v] {
            let through = exit[w].map_or(confidences[w], |e| pick(e, confidences[w]));
            acc = Some(acc.map_or(through, |a| pick(a, through)));
        }
        exit[v] = acc;
    }
    // C_en = -max_j C1(j) = min_j p(j) in literal mode
    (
        entry.into_iter().map(|e| e.unwrap_or(0.0)).collect(),
        exit.into_iter().map(|e| e.unwrap_or(0.0)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Node position of the tail.
    pub from: usize,
    /// Node position of the head.
    pub to: usize,
    pub cost_fp: i64,
}

/// Immutable flow network over a sorted candidate list. Node `i` is the
/// candidate at position `i`; every edge points from a lower to a higher
/// position, so position order is a topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    /// Candidate id for each node.
    pub nodes: Vec<usize>,
    pub confidences: Vec<f64>,
    /// `beta * C1` per node.
    pub data_cost_fp: Vec<i64>,
    pub entry_cost_fp: Vec<i64>,
    pub exit_cost_fp: Vec<i64>,
    pub edges: Vec<Edge>,
    /// Outgoing edge indices per node, heads ascending.
    pub out_edges: Vec<Vec<usize>>,
    pub scale: i64,
}

fn to_fixed(value: f64, scale: i64, limit: i64, what: &str) -> Result<i64> {
    let scaled = (value * scale as f64).round();
    if !scaled.is_finite() || scaled.abs() > limit as f64 {
        return Err(Error::Overflow(format!("{what} cost {value} does not fit at scale {scale}")));
    }
    Ok(scaled as i64)
}

/// Builds the network for a sorted scene.
pub fn build_network(scene: &Scene, params: &Params, confidences: Option<&[f64]>) -> Result<FlowNetwork> {
    FlowNetwork::build(&scene.candidates, params, confidences)
}

impl FlowNetwork {
    /// Builds the network for candidates already in `candidate_order`.
    /// `confidences` overrides the candidates' own scores when given.
    pub fn build(candidates: &[CandidateBox], params: &Params, confidences: Option<&[f64]>) -> Result<Self> {
        params.validate()?;
        let n = candidates.len();
        if n > MAX_CANDIDATES {
            return Err(Error::Overflow(format!("{n} candidates exceed the supported maximum")));
        }
        for (i, pair) in candidates.windows(2).enumerate() {
            if candidate_order(&pair[0], &pair[1]).is_gt() {
                return Err(Error::Unsorted(i + 1));
            }
        }
        let confidences: Vec<f64> = match confidences {
            Some(over) => {
                if over.len() != n {
                    return Err(Error::InvalidScene(format!(
                        "{} confidence overrides for {n} candidates",
                        over.len()
                    )));
                }
                if let Some(i) = over.iter().position(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::InvalidCandidate {
                        id: candidates[i].id(),
                        reason: format!("override confidence {} outside [0, 1]", over[i]),
                    });
                }
                over.to_vec()
            }
            None => candidates.iter().map(|c| c.confidence()).collect(),
        };

        // a path has at most 2n + 1 terms; keep each one small enough that sums cannot overflow
        let scale = params.cost_scale;
        let limit = i64::MAX / (2 * n as i64 + 2);

        let mut pairs = Vec::new();
        let mut edges = Vec::new();
        let mut out_edges = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&candidates[i], &candidates[j]);
                if can_transition(a, b, params) {
                    let cost_fp = to_fixed(smoothness_cost(a, b, params), scale, limit, "smoothness")?;
                    out_edges[i].push(edges.len());
                    edges.push(Edge { from: i, to: j, cost_fp });
                    pairs.push((i, j));
                }
            }
        }

        let data_cost_fp = confidences
            .iter()
            .map(|&p| to_fixed(params.beta * -p, scale, limit, "data"))
            .collect::<Result<Vec<_>>>()?;
        let (entry, exit) = entry_exit_costs(&confidences, &pairs, params.entry_cost_mode);
        let entry_cost_fp = entry
            .iter()
            .map(|&v| to_fixed(v, scale, limit, "entry"))
            .collect::<Result<Vec<_>>>()?;
        let exit_cost_fp = exit
            .iter()
            .map(|&v| to_fixed(v, scale, limit, "exit"))
            .collect::<Result<Vec<_>>>()?;

        Ok(FlowNetwork {
            nodes: candidates.iter().map(|c| c.id()).collect(),
            confidences,
            data_cost_fp,
            entry_cost_fp,
            exit_cost_fp,
            edges,
            out_edges,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_cost(&self, from: usize, to: usize) -> Option<i64> {
        self.out_edges
            .get(from)?
            .iter()
            .map(|&e| &self.edges[e])
            .find(|e| e.to == to)
            .map(|e| e.cost_fp)
    }

    /// Total cost of a path given as node positions, or `None` if some
    /// consecutive pair has no edge.
    pub fn path_cost(&self, positions: &[usize]) -> Option<i64> {
        let (&first, &last) = (positions.first()?, positions.last()?);
        let mut total = self.entry_cost_fp[first] + self.exit_cost_fp[last];
        for &p in positions {
            total += self.data_cost_fp[p];
        }
        for pair in positions.windows(2) {
            total += self.edge_cost(pair[0], pair[1])?;
        }
        Some(total)
    }

    /// Graphviz rendering with source `S`, sink `T` and one in/out node pair
    /// per candidate.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph flow {\n  rankdir=LR;\n  S [shape=box];\n  T [shape=box];\n");
        for (i, &id) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{id}_in [label=\"{id}/{:.3}\"];\n  n{id}_out [label=\"\", style=filled];",
                self.confidences[i]
            );
            let _ = writeln!(out, "  n{id}_in -> n{id}_out [label=\"{}\"];", self.data_cost_fp[i]);
            let _ = writeln!(out, "  S -> n{id}_in [label=\"{}\"];", self.entry_cost_fp[i]);
            let _ = writeln!(out, "  n{id}_out -> T [label=\"{}\"];", self.exit_cost_fp[i]);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{}_out -> n{}_in [label=\"{}\"];",
                self.nodes[e.from], self.nodes[e.to], e.cost_fp
            );
        }
        out.push_str("}\n");
        out
    }
}
