//! Python module `textflow`: candidates, scenes, extraction, synthesis and
//! scoring.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use textflow::eval::{eval_one_to_one, eval_wolf_jolion, Granularity, GroundTruth, WolfJolionParams};
use textflow::lines::{detect_lines, WordSplit};
use textflow::model::{self, CandidateBox, EntryCostMode, Rect};
use textflow::synth::{generate, SynthConfig};

type PyRect = (f64, f64, f64, f64);

fn py_err(e: textflow::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn rect(r: PyRect) -> Rect {
    Rect::new(r.0, r.1, r.2, r.3)
}

fn tuple(r: &Rect) -> PyRect {
    (r.x, r.y, r.w, r.h)
}

/// A square character candidate with a confidence in [0, 1].
#[pyclass(name = "Candidate", frozen, from_py_object)]
#[derive(Clone)]
struct PyCandidate(CandidateBox);

#[pymethods]
impl PyCandidate {
    #[new]
    fn new(id: usize, x: f64, y: f64, w: f64, confidence: f64) -> PyResult<Self> {
        CandidateBox::new(id, x, y, w, confidence).map(PyCandidate).map_err(py_err)
    }

    #[getter]
    fn id(&self) -> usize {
        self.0.id()
    }
    #[getter]
    fn x(&self) -> f64 {
        self.0.x()
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.y()
    }
    #[getter]
    fn w(&self) -> f64 {
        self.0.w()
    }
    #[getter]
    fn confidence(&self) -> f64 {
        self.0.confidence()
    }

    fn rect(&self) -> PyRect {
        tuple(&self.0.rect())
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!("Candidate(id={}, x={}, y={}, w={}, confidence={})", c.id(), c.x(), c.y(), c.w(), c.confidence())
    }
}

/// Network and extraction parameters.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    #[pyo3(get, set)]
    t_h: f64,
    #[pyo3(get, set)]
    t_v: f64,
    #[pyo3(get, set)]
    t_s: f64,
    #[pyo3(get, set)]
    alpha: f64,
    #[pyo3(get, set)]
    beta: f64,
    #[pyo3(get, set)]
    overlap_delete: f64,
    #[pyo3(get, set)]
    cost_scale: i64,
    /// "literal" or "confidence_max".
    #[pyo3(get, set)]
    entry_cost_mode: String,
}

impl PyParams {
    fn to_params(&self) -> PyResult<model::Params> {
        let entry_cost_mode = match self.entry_cost_mode.as_str() {
            "literal" => EntryCostMode::Literal,
            "confidence_max" => EntryCostMode::ConfidenceMax,
            other => return Err(PyValueError::new_err(format!("unknown entry_cost_mode {other:?}"))),
        };
        let p = model::Params {
            t_h: self.t_h,
            t_v: self.t_v,
            t_s: self.t_s,
            alpha: self.alpha,
            beta: self.beta,
            overlap_delete: self.overlap_delete,
            cost_scale: self.cost_scale,
            entry_cost_mode,
        };
        p.validate().map_err(py_err)?;
        Ok(p)
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let d = model::Params::default();
        let mut p = PyParams {
            t_h: d.t_h,
            t_v: d.t_v,
            t_s: d.t_s,
            alpha: d.alpha,
            beta: d.beta,
            overlap_delete: d.overlap_delete,
            cost_scale: d.cost_scale,
            entry_cost_mode: "literal".into(),
        };
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                match key.as_str() {
                    "t_h" => p.t_h = value.extract()?,
                    "t_v" => p.t_v = value.extract()?,
                    "t_s" => p.t_s = value.extract()?,
                    "alpha" => p.alpha = value.extract()?,
                    "beta" => p.beta = value.extract()?,
                    "overlap_delete" => p.overlap_delete = value.extract()?,
                    "cost_scale" => p.cost_scale = value.extract()?,
                    "entry_cost_mode" => p.entry_cost_mode = value.extract()?,
                    other => return Err(PyValueError::new_err(format!("unknown parameter {other:?}"))),
                }
            }
        }
        p.to_params()?;
        Ok(p)
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(t_h={}, t_v={}, t_s={}, alpha={}, beta={}, overlap_delete={}, cost_scale={}, entry_cost_mode={:?})",
            self.t_h, self.t_v, self.t_s, self.alpha, self.beta, self.overlap_delete, self.cost_scale, self.entry_cost_mode
        )
    }
}

/// Candidates with optional image bounds.
#[pyclass(name = "Scene", frozen, from_py_object)]
#[derive(Clone)]
struct PyScene(model::Scene);

#[pymethods]
impl PyScene {
    #[new]
    #[pyo3(signature = (candidates, image_width=None, image_height=None))]
    fn new(candidates: Vec<PyCandidate>, image_width: Option<u32>, image_height: Option<u32>) -> PyResult<Self> {
        let cands = candidates.into_iter().map(|c| c.0).collect();
        let scene = match (image_width, image_height) {
            (Some(w), Some(h)) => model::Scene::with_bounds(cands, w, h),
            (None, None) => model::Scene::new(cands),
            _ => return Err(PyValueError::new_err("give both image_width and image_height or neither")),
        };
        scene.map(PyScene).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        model::Scene::from_json(text).map(PyScene).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[getter]
    fn candidates(&self) -> Vec<PyCandidate> {
        self.0.candidates.iter().cloned().map(PyCandidate).collect()
    }

    fn __len__(&self) -> usize {
        self.0.candidates.len()
    }
}

/// One detected text line.
#[pyclass(name = "TextLine", frozen, get_all)]
struct PyTextLine {
    /// (x, y, w, h)
    bbox: PyRect,
    members: Vec<usize>,
    cost: f64,
    words: Option<Vec<PyRect>>,
}

#[pymethods]
impl PyTextLine {
    fn __repr__(&self) -> String {
        format!("TextLine(bbox={:?}, members={:?}, cost={})", self.bbox, self.members, self.cost)
    }
}

/// Intersection over union of two (x, y, w, h) rectangles.
#[pyfunction]
fn iou(a: PyRect, b: PyRect) -> f64 {
    model::iou(&rect(a), &rect(b))
}

/// Extracts text lines, in extraction order.
#[pyfunction]
#[pyo3(signature = (scene, params=None, blank_ratio=0.15, min_gap_ratio=0.3))]
fn extract(
    py: Python<'_>,
    scene: &PyScene,
    params: Option<PyParams>,
    blank_ratio: f64,
    min_gap_ratio: f64,
) -> PyResult<Vec<PyTextLine>> {
    let params = match params {
        Some(p) => p.to_params()?,
        None => model::Params::default(),
    };
    let split = WordSplit { blank_ratio, min_gap_ratio };
    let scene = scene.0.clone();
    let (_, lines) = py.detach(move || detect_lines(&scene, &params, &split)).map_err(py_err)?;
    Ok(lines
        .into_iter()
        .map(|l| PyTextLine {
            bbox: tuple(&l.bbox),
            members: l.members,
            cost: l.cost,
            words: l.words.map(|w| w.iter().map(tuple).collect()),
        })
        .collect())
}

/// Generates a synthetic scene. `config` is a JSON object with any subset
/// of generator fields; `seed` overrides its seed. Returns the scene and the
/// ground-truth line boxes.
#[pyfunction]
#[pyo3(signature = (seed=None, config=None))]
fn synth(seed: Option<u64>, config: Option<&str>) -> PyResult<(PyScene, Vec<PyRect>)> {
    let mut cfg = match config {
        Some(text) => SynthConfig::from_json(text).map_err(py_err)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let (scene, truth) = generate(&cfg).map_err(py_err)?;
    Ok((PyScene(scene), truth.boxes.iter().map(tuple).collect()))
}

/// Scores detections against ground truth for one image. Returns a dict
/// with precision, recall and f_score.
#[pyfunction]
#[pyo3(signature = (detections, truth, protocol="one_to_one", match_threshold=0.5))]
fn evaluate<'py>(
    py: Python<'py>,
    detections: Vec<PyRect>,
    truth: Vec<PyRect>,
    protocol: &str,
    match_threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let dets: Vec<Rect> = detections.into_iter().map(rect).collect();
    let gt = GroundTruth::new(truth.into_iter().map(rect).collect(), Granularity::Line).map_err(py_err)?;
    let s = match protocol {
        "one_to_one" => eval_one_to_one(&dets, &gt, match_threshold),
        "wolf_jolion" => eval_wolf_jolion(&dets, &gt, &WolfJolionParams::default()),
        other => return Err(PyValueError::new_err(format!("unknown protocol {other:?}"))),
    };
    let out = PyDict::new(py);
    out.set_item("precision", s.precision)?;
    out.set_item("recall", s.recall)?;
    out.set_item("f_score", s.f_score)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "textflow")]
fn textflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCandidate>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyTextLine>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
