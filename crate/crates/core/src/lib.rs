//! Text line extraction from scored character candidates.
//!
//! Candidates are wired into a directed acyclic flow network with data,
//! smoothness, entry and exit costs; text lines are pulled out one
//! minimum-cost flow at a time until the cheapest remaining flow costs more
//! than nothing.

pub mod cli;
pub mod error;
pub mod eval;
pub mod lines;
pub mod model;
pub mod network;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{eval_one_to_one, eval_wolf_jolion, EvalReport, Granularity, GroundTruth, Protocol, WolfJolionParams};
pub use lines::{compute_profile, detect_lines, path_to_line, split_words, GradientProfile, WordSplit};
pub use model::{iou, sort_candidates, CandidateBox, EntryCostMode, Params, Raster, Rect, Scene, SortedScene, TextLine};
pub use network::{build_network, can_transition, data_cost, entry_exit_costs, smoothness_cost, FlowNetwork};
pub use solver::{extract_all, min_cost_path, suppress_overlaps, ExtractionResult, FlowPath};
pub use synth::{generate, SynthConfig};
