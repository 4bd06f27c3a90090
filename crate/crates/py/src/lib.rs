//! Python bindings for the tonecluster core.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tonecluster::autoencoder::{self, TrainingConfig};
use tonecluster::cluster::{self, KMeansConfig, MeanShiftConfig, Point};
use tonecluster::eval::{self, NmiVariant};
use tonecluster::ingest::AudioBuffer;
use tonecluster::pipeline::{self, PipelineConfig};
use tonecluster::pitch::{self, NormalizedContour, PitchParams};
use tonecluster::synth::{self, SynthConfig};

fn to_py(e: tonecluster::Error) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn variant(name: &str) -> PyResult<NmiVariant> {
    match name {
        "arithmetic" => Ok(NmiVariant::Arithmetic),
        "geometric" => Ok(NmiVariant::Geometric),
        "min" => Ok(NmiVariant::Min),
        _ => Err(PyValueError::new_err(format!("unknown NMI variant {name:?}"))),
    }
}

fn contours(values: Vec<Vec<f64>>) -> PyResult<Vec<NormalizedContour>> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| NormalizedContour::new(format!("c{i}"), 0, v).map_err(to_py))
        .collect()
}

/// F0 track of mono samples as `(time_s, f0_hz or None)` pairs.
#[pyfunction]
fn estimate_f0(samples: Vec<f64>, sample_rate_hz: u32) -> PyResult<Vec<(f64, Option<f64>)>> {
    let audio = AudioBuffer::new(samples, sample_rate_hz).map_err(to_py)?;
    let track = pitch::estimate_f0(&audio, &PitchParams::default()).map_err(to_py)?;
    Ok(track.frames.iter().map(|f| (f.time_s, f.f0_hz)).collect())
}

/// Linear resampling of `(time, value)` points onto `n` evenly spaced points.
#[pyfunction]
#[pyo3(signature = (points, n = pitch::CONTOUR_LEN))]
fn resample_contour(points: Vec<(f64, f64)>, n: usize) -> PyResult<Vec<f64>> {
    pitch::resample_contour(&points, n).map_err(to_py)
}

/// The 40-point convolutional autoencoder with a 2-d latent code.
#[pyclass(name = "Autoencoder")]
struct PyAutoencoder {
    model: autoencoder::Model,
}

#[pymethods]
impl PyAutoencoder {
    #[new]
    #[pyo3(signature = (seed = 0))]
    fn new(seed: u64) -> Self {
        Self {
            model: autoencoder::build_model(seed),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            model: autoencoder::Model::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.model.save(path).map_err(to_py)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    /// Trains in place and returns the mean MSE of each epoch.
    #[pyo3(signature = (contours, epochs = 500, batch_size = 60, lr = 5e-4, seed = 0))]
    fn train(&mut self, py: Python<'_>, contours: Vec<Vec<f64>>, epochs: usize, batch_size: usize, lr: f64, seed: u64) -> PyResult<Vec<f64>> {
        let data = self::contours(contours)?;
        let cfg = TrainingConfig {
            epochs,
            batch_size,
            lr,
            seed,
            ..TrainingConfig::default()
        };
        let model = self.model.clone();
        let (model, loss) = py.detach(|| autoencoder::train(model, &data, &cfg)).map_err(to_py)?;
        self.model = model;
        Ok(loss)
    }

    fn encode(&self, contour: Vec<f64>) -> PyResult<(f64, f64)> {
        let z = self.model.encode_values(&contour).map_err(to_py)?;
        Ok((z[0], z[1]))
    }

    fn decode(&self, z: (f64, f64)) -> Vec<f64> {
        self.model.decode([z.0, z.1])
    }

    fn reconstruct(&self, contour: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.reconstruct(&contour).map_err(to_py)
    }
}

/// Centers and rotates points onto their principal axes. Returns the
/// transformed points, the mean and the rotation matrix.
#[pyfunction]
fn pca(points: Vec<Point>) -> PyResult<(Vec<Point>, Point, [[f64; 2]; 2])> {
    let (t, out) = cluster::pca_fit_apply(&points).map_err(to_py)?;
    Ok((out, t.mean, t.rotation))
}

/// Flat-kernel mean shift. Returns modes and per-point mode indices.
#[pyfunction]
#[pyo3(signature = (points, bandwidth = 0.6))]
fn mean_shift(points: Vec<Point>, bandwidth: f64) -> PyResult<(Vec<Point>, Vec<usize>)> {
    let cfg = MeanShiftConfig {
        bandwidth,
        ..MeanShiftConfig::default()
    };
    let out = cluster::mean_shift(&points, &cfg).map_err(to_py)?;
    Ok((out.modes, out.assignments))
}

/// k-means on z-scored features. Returns assignments.
#[pyfunction]
#[pyo3(signature = (features, k, seed = 0))]
fn kmeans(features: Vec<Point>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(cluster::kmeans(&features, k, seed, &KMeansConfig::default()).map_err(to_py)?.assignments)
}

/// Mean pitch and least-squares slope of a contour.
#[pyfunction]
fn baseline_features(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let f = cluster::baseline_features(&values).map_err(to_py)?;
    Ok((f.mean_pitch, f.ols_slope))
}

/// NMI between cluster assignments (None = unclustered, excluded) and labels.
#[pyfunction]
#[pyo3(signature = (assignments, labels, variant = "arithmetic"))]
fn nmi(assignments: Vec<Option<usize>>, labels: Vec<String>, variant: &str) -> PyResult<f64> {
    let table = eval::contingency(&assignments, &labels).map_err(to_py)?;
    eval::nmi(&table, self::variant(variant)?).map_err(to_py)
}

/// Synthetic four-tone contours. Returns `(contours, labels)`.
#[pyfunction]
#[pyo3(signature = (seed = 2020, per_class = 100, jitter_sd = 0.03, level_shift_sd = 0.05))]
fn synth_corpus(seed: u64, per_class: usize, jitter_sd: f64, level_shift_sd: f64) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let c = synth::gen_contour_corpus(&SynthConfig {
        seed,
        per_class_count: per_class,
        jitter_sd,
        level_shift_sd,
        ..SynthConfig::default()
    })
    .map_err(to_py)?;
    Ok((c.contours.iter().map(|c| c.values().to_vec()).collect(), c.labels))
}

/// Runs every pipeline stage with the config at `config` (or defaults plus
/// `contours`) and returns a summary dict.
#[pyfunction]
#[pyo3(signature = (output_dir, config = None, contours = None, seed = None, epochs = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    output_dir: PathBuf,
    config: Option<PathBuf>,
    contours: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::from_toml_file(p).map_err(to_py)?,
        None => PipelineConfig::default(),
    };
    cfg.output_dir = output_dir;
    if contours.is_some() {
        cfg.dataset.contours = contours;
        cfg.dataset.manifest = None;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.training.epochs = e;
    }
    let s = py.detach(|| pipeline::run(&cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("k", s.clusters.k)?;
    d.set_item("sizes", s.clusters.sizes.clone())?;
    d.set_item("unclustered", s.clusters.unclustered)?;
    d.set_item("final_loss", s.loss.last().copied())?;
    d.set_item("plausible", s.plausibility.all_pass())?;
    let nmi = PyDict::new(py);
    for r in &s.reports {
        nmi.set_item(format!("{}_{}", r.method.name(), r.split.name()), r.nmi)?;
    }
    d.set_item("nmi", nmi)?;
    Ok(d)
}

#[pymodule]
fn tonecluster_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAutoencoder>()?;
    m.add_function(wrap_pyfunction!(estimate_f0, m)?)?;
    m.add_function(wrap_pyfunction!(resample_contour, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(mean_shift, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_features, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("CONTOUR_LEN", pitch::CONTOUR_LEN)?;
    Ok(())
}
