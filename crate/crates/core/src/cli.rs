//! Command-line front end: `synth`, `extract`, `eval` and `render`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 input validation failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::eval::{
    eval_one_to_one, eval_wolf_jolion, EvalReport, Granularity, GroundTruth, ImageScore, Protocol, TruthFile,
    TruthImage, WolfJolionParams,
};
use crate::lines::{detect_lines, WordSplit};
use crate::model::{candidate_order, Params, Rect, Scene, TextLine};
use crate::network::FlowNetwork;
use crate::synth::{generate, SynthConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "textflow", version, about = "Text line extraction by min-cost flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Extract text lines from one or more scenes.
    Extract(ExtractArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Draw a scene and its detections as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config (JSON); defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for scene.json, truth.json and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Scene file; repeat for batch mode, in which case `--out` is a directory.
    #[arg(long, required = true)]
    pub scene: Vec<PathBuf>,
    /// Params override file (JSON, any subset of fields).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the initial flow network as Graphviz DOT.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Write an SVG of candidates and extracted flows.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    pub blank_ratio: f64,
    #[arg(long, default_value_t = 0.3)]
    pub min_gap_ratio: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value = "one_to_one")]
    pub protocol: Protocol,
    /// Report path (JSON); the text table goes next to it with a `.txt` extension.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub match_threshold: f64,
    #[arg(long, default_value_t = 0.8)]
    pub t_r: f64,
    #[arg(long, default_value_t = 0.4)]
    pub t_p: f64,
    #[arg(long, default_value_t = 0.8)]
    pub scatter: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure { code: if err.is_validation() { 2 } else { 1 }, message: err.to_string() }
    }
}

fn at(path: &Path, err: impl Into<Error>) -> Failure {
    let err = err.into();
    Failure { code: if err.is_validation() { 2 } else { 1 }, message: format!("{}: {err}", path.display()) }
}

fn invalid(message: String) -> Failure {
    Failure { code: 2, message }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| at(path, e))?;
    serde_json::from_str(&text).map_err(|e| at(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| at(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| at(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| at(path, e))?;
    text.push('\n');
    write_file(path, &text)
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<Params>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            version: VERSION.into(),
            params: None,
            synth: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    fn time(&mut self, stage: &str, since: Instant) {
        *self.timings_ms.entry(stage.into()).or_default() += since.elapsed().as_secs_f64() * 1e3;
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Detections for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detections {
    pub lines: Vec<TextLine>,
}

/// Detections for several images, matched to truth by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBatch {
    pub images: Vec<DetectionImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionImage {
    pub id: String,
    pub lines: Vec<TextLine>,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Extract(args) => cmd_extract(&args),
        Command::Eval(args) => cmd_eval(&args).map(|_| ()),
        Command::Render(args) => cmd_render(&args),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("synth");
    let mut cfg = match &args.config {
        Some(path) => {
            manifest.inputs.push(display(path));
            let cfg: SynthConfig = read_json(path)?;
            cfg.validate().map_err(|e| at(path, e))?;
            cfg
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (scene, truth) = generate(&cfg)?;
    manifest.time("generate", start);

    let write_start = Instant::now();
    let scene_path = args.out.join("scene.json");
    let truth_path = args.out.join("truth.json");
    write_json(&scene_path, &scene)?;
    let truth_file = TruthFile {
        images: vec![TruthImage {
            id: format!("seed-{}", cfg.seed),
            boxes: truth.boxes,
            granularity: truth.granularity,
        }],
    };
    write_json(&truth_path, &truth_file)?;
    manifest.time("write", write_start);
    manifest.outputs = vec![display(&scene_path), display(&truth_path)];
    manifest.synth = Some(cfg);
    write_json(&args.out.join("manifest.json"), &manifest)
}

fn load_scene(path: &Path) -> Result<Scene, Failure> {
    read_json(path)
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<(), Failure> {
    let params = match &args.params {
        Some(path) => {
            let p: Params = read_json(path)?;
            p.validate().map_err(|e| at(path, e))?;
            p
        }
        None => Params::default(),
    };
    let split = WordSplit { blank_ratio: args.blank_ratio, min_gap_ratio: args.min_gap_ratio };
    if !(split.blank_ratio > 0.0 && split.blank_ratio <= 1.0) {
        return Err(invalid(format!("--blank-ratio must lie in (0, 1], got {}", split.blank_ratio)));
    }
    if args.scene.len() == 1 {
        return extract_one(&args.scene[0], &args.out, args.dot.as_deref(), args.svg.as_deref(), &params, &split);
    }
    if args.dot.is_some() || args.svg.is_some() {
        return Err(invalid("--dot and --svg take a single --scene".into()));
    }
    let outputs: Vec<(PathBuf, PathBuf)> = args
        .scene
        .iter()
        .map(|scene| {
            let stem = scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (scene.clone(), args.out.join(format!("{stem}.lines.json")))
        })
        .collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(outputs.len());
    let chunk = outputs.len().div_ceil(workers);
    let results: Vec<Result<(), Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = outputs
            .chunks(chunk)
            .map(|part| {
                s.spawn(|| {
                    part.iter()
                        .map(|(scene, out)| extract_one(scene, out, None, None, &params, &split))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("extract worker panicked")).collect()
    });
    results.into_iter().collect()
}

fn extract_one(
    scene_path: &Path,
    out: &Path,
    dot: Option<&Path>,
    svg: Option<&Path>,
    params: &Params,
    split: &WordSplit,
) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("extract");
    manifest.params = Some(*params);
    manifest.inputs.push(display(scene_path));

    let start = Instant::now();
    let scene = load_scene(scene_path)?;
    manifest.time("load", start);

    let start = Instant::now();
    let (_, lines) = detect_lines(&scene, params, split).map_err(|e| at(scene_path, e))?;
    manifest.time("extract", start);

    let start = Instant::now();
    write_json(out, &Detections { lines: lines.clone() })?;
    manifest.outputs.push(display(out));
    if let Some(path) = dot {
        let mut ordered = scene.candidates.clone();
        ordered.sort_by(candidate_order);
        let network = FlowNetwork::build(&ordered, params, None)?;
        write_file(path, &network.to_dot())?;
        manifest.outputs.push(display(path));
    }
    if let Some(path) = svg {
        write_file(path, &render_svg(&scene, &lines))?;
        manifest.outputs.push(display(path));
    }
    manifest.time("write", start);
    write_json(&manifest_path(out), &manifest)
}

/// Boxes to score for one image at the truth's granularity. Returns a warning
/// when detection and truth granularities disagree.
fn detection_boxes(lines: &[TextLine], granularity: Granularity) -> (Vec<Rect>, Option<String>) {
    let has_words = lines.iter().any(|l| l.words.is_some());
    match granularity {
        Granularity::Line => {
            let warning = has_words.then(|| "word detections against line truth; evaluating line boxes".to_string());
            (lines.iter().map(|l| l.bbox).collect(), warning)
        }
        Granularity::Word => {
            let missing = lines.iter().any(|l| l.words.is_none());
            let boxes = lines
                .iter()
                .flat_map(|l| l.words.clone().unwrap_or_else(|| vec![l.bbox]))
                .collect();
            let warning = missing.then(|| "word truth but some lines have no words; using line boxes".to_string());
            (boxes, warning)
        }
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, Failure> {
    let mut manifest = RunManifest::new("eval");
    manifest.inputs = vec![display(&args.detections), display(&args.truth)];
    let start = Instant::now();

    let truth: TruthFile = read_json(&args.truth)?;
    let raw: serde_json::Value = read_json(&args.detections)?;
    let by_image: BTreeMap<String, Vec<TextLine>> = if raw.get("images").is_some() {
        let batch: DetectionBatch = serde_json::from_value(raw).map_err(|e| at(&args.detections, e))?;
        batch.images.into_iter().map(|img| (img.id, img.lines)).collect()
    } else {
        let single: Detections = serde_json::from_value(raw).map_err(|e| at(&args.detections, e))?;
        match truth.images.as_slice() {
            [only] => BTreeMap::from([(only.id.clone(), single.lines)]),
            _ => {
                return Err(invalid(format!(
                    "{}: single-scene detections need exactly one truth image, found {}",
                    display(&args.detections),
                    truth.images.len()
                )))
            }
        }
    };
    manifest.time("load", start);

    let start = Instant::now();
    let wolf = WolfJolionParams { t_r: args.t_r, t_p: args.t_p, scatter: args.scatter };
    let mut per_image = Vec::with_capacity(truth.images.len());
    for image in &truth.images {
        let gt: GroundTruth = image.ground_truth().map_err(|e| at(&args.truth, e))?;
        let lines = by_image.get(&image.id).map(Vec::as_slice).unwrap_or(&[]);
        let (dets, warning) = detection_boxes(lines, gt.granularity);
        if let Some(w) = warning {
            eprintln!("warning: image {}: {w}", image.id);
        }
        let scores = match args.protocol {
            Protocol::OneToOne => eval_one_to_one(&dets, &gt, args.match_threshold),
            Protocol::WolfJolion => eval_wolf_jolion(&dets, &gt, &wolf),
        };
        per_image.push(ImageScore { id: image.id.clone(), scores });
    }
    let report = EvalReport::aggregate(args.protocol, per_image);
    manifest.time("evaluate", start);

    let start = Instant::now();
    let table_path = args.out.with_extension("txt");
    write_json(&args.out, &report)?;
    write_file(&table_path, &report.to_table())?;
    manifest.time("write", start);
    manifest.outputs = vec![display(&args.out), display(&table_path)];
    write_json(&manifest_path(&args.out), &manifest)?;
    Ok(report)
}

pub fn cmd_render(args: &RenderArgs) -> Result<(), Failure> {
    let scene = load_scene(&args.scene)?;
    let lines = match &args.detections {
        Some(path) => read_json::<Detections>(path)?.lines,
        None => Vec::new(),
    };
    write_file(&args.out, &render_svg(&scene, &lines))
}

/// SVG with candidate boxes in grey, line boxes and word boxes in green,
/// and one polyline per flow through its member centers.
pub fn render_svg(scene: &Scene, lines: &[TextLine]) -> String {
    let (mut w, mut h) = (scene.image_width as f64, scene.image_height as f64);
    if w <= 0.0 || h <= 0.0 {
        for c in &scene.candidates {
            w = w.max(c.x() + c.w());
            h = h.max(c.y() + c.w());
        }
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(svg, "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(svg, "  <g id=\"candidates\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\">");
    for c in &scene.candidates {
        let _ = writeln!(
            svg,
            "    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"><title>{} p={:.3}</title></rect>",
            c.x(),
            c.y(),
            c.w(),
            c.w(),
            c.id(),
            c.confidence()
        );
    }
    svg.push_str("  </g>\n");
    let _ = writeln!(svg, "  <g id=\"lines\" fill=\"none\" stroke=\"#00a000\" stroke-width=\"2\">");
    for line in lines {
        let b = line.bbox;
        let _ = writeln!(
            svg,
            "    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"/>",
            b.x, b.y, b.w, b.h
        );
        for word in line.words.iter().flatten() {
            let _ = writeln!(
                svg,
                "    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" stroke-dasharray=\"4 2\" stroke-width=\"1\"/>",
                word.x, word.y, word.w, word.h
            );
        }
    }
    svg.push_str("  </g>\n");
    let _ = writeln!(svg, "  <g id=\"flows\">");
    for line in lines {
        let centers: Vec<(f64, f64)> = line
            .members
            .iter()
            .filter_map(|&id| scene.candidate(id))
            .map(|c| c.center())
            .collect();
        let points: Vec<String> = centers.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            "    <polyline points=\"{}\" fill=\"none\" stroke=\"#00c000\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        for (x, y) in centers {
            let _ = writeln!(svg, "    <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2\" fill=\"red\"/>");
        }
    }
    svg.push_str("  </g>\n</svg>\n");
    svg
}
