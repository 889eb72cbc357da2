//! Python bindings. Matrices cross the boundary as lists of rows.

use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use harmonia::config::PipelineConfig;
use harmonia::gating::{self, EnergyLabels, VrdState};
use harmonia::harmonic::{self, MatrixConvention};
use harmonia::masking::{self, CompensationMask, ComplexMask, MagnitudeMask};
use harmonia::metrics::{self, LoudnessExponent};
use harmonia::pipeline::{self, StageTimings};
use harmonia::spectral::{self, AnalysisConfig, AudioBuffer, ComplexSpectrogram};

fn py_err(e: harmonia::Error) -> PyErr {
    match e {
        harmonia::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn preset(sample_rate: u32) -> PyResult<AnalysisConfig> {
    match sample_rate {
        16_000 => Ok(AnalysisConfig::wideband()),
        48_000 => Ok(AnalysisConfig::fullband()),
        other => Err(PyValueError::new_err(format!(
            "unsupported sample rate {other}, expected 16000 or 48000"
        ))),
    }
}

fn band_config(sample_rate: u32) -> PyResult<PipelineConfig> {
    preset(sample_rate)?;
    let band = match sample_rate {
        48_000 => harmonia::config::BandMode::Fb,
        _ => harmonia::config::BandMode::Wb,
    };
    Ok(PipelineConfig {
        band,
        ..PipelineConfig::default()
    })
}

#[pyclass(name = "Spectrogram", module = "harmonia_py")]
struct PySpectrogram {
    inner: ComplexSpectrogram,
}

#[pymethods]
impl PySpectrogram {
    #[new]
    #[pyo3(signature = (real, imag, frame_hop=384, bin_hz=31.25))]
    fn new(
        real: Vec<Vec<f64>>,
        imag: Vec<Vec<f64>>,
        frame_hop: usize,
        bin_hz: f64,
    ) -> PyResult<Self> {
        let real = to_array(real)?;
        let n = real.nrows().saturating_sub(1) * frame_hop;
        ComplexSpectrogram::new(real, to_array(imag)?, frame_hop, bin_hz, n)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.dim()
    }

    #[getter]
    fn bin_hz(&self) -> f64 {
        self.inner.bin_hz()
    }

    fn real(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.real())
    }

    fn imag(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.imag())
    }

    fn magnitude(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.magnitude())
    }

    fn phase(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.phase())
    }

    fn __repr__(&self) -> String {
        let (t, f) = self.inner.dim();
        format!("Spectrogram(frames={t}, bins={f})")
    }
}

#[pyclass(name = "IntegralMatrix", module = "harmonia_py")]
struct PyIntegralMatrix {
    inner: harmonic::IntegralMatrix,
}

#[pymethods]
impl PyIntegralMatrix {
    #[new]
    #[pyo3(signature = (bins=257, bin_hz=31.25, convention="aligned"))]
    fn new(bins: usize, bin_hz: f64, convention: &str) -> PyResult<Self> {
        let conv: MatrixConvention = convention.parse().map_err(py_err)?;
        harmonic::IntegralMatrix::build(bins, bin_hz, conv)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.values().dim()
    }

    fn nonzero_count(&self) -> usize {
        self.inner.nonzero_count()
    }

    fn row(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= harmonic::NUM_CANDIDATES {
            return Err(PyValueError::new_err(format!("row {j} out of range")));
        }
        Ok(self.inner.row(j).to_vec())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        harmonia::io::write_matrix(path.as_ref(), self.inner.values()).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16_000))]
fn stft(samples: Vec<f64>, sample_rate: u32) -> PyResult<PySpectrogram> {
    let cfg = preset(sample_rate)?;
    let audio = AudioBuffer::new(samples, sample_rate).map_err(py_err)?;
    spectral::stft(&audio, &cfg)
        .map(|inner| PySpectrogram { inner })
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (spec, sample_rate=16_000))]
fn istft(spec: &PySpectrogram, sample_rate: u32) -> PyResult<Vec<f64>> {
    let cfg = preset(sample_rate)?;
    spectral::istft(&spec.inner, &cfg)
        .map(AudioBuffer::into_samples)
        .map_err(py_err)
}

#[pyfunction]
fn candidate_hz(j: usize) -> f64 {
    harmonic::candidate_hz(j)
}

#[pyfunction]
fn significance(magnitude: Vec<Vec<f64>>, matrix: &PyIntegralMatrix) -> PyResult<Vec<Vec<f64>>> {
    harmonic::significance(&to_array(magnitude)?, &matrix.inner)
        .map(|q| to_rows(q.values()))
        .map_err(py_err)
}

/// `(candidate, pitch_hz, significance)` per frame.
#[pyfunction]
fn select_pitch(q: Vec<Vec<f64>>) -> PyResult<Vec<(usize, f64, f64)>> {
    let q = harmonic::SignificanceSpectrum::new(to_array(q)?).map_err(py_err)?;
    Ok(harmonic::select_pitch(&q)
        .frames
        .iter()
        .map(|f| {
            let j = f.candidate.unwrap_or(0);
            (j, harmonic::candidate_hz(j), f.significance)
        })
        .collect())
}

#[pyfunction]
fn sed_labels(clean_magnitude: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    gating::sed_labels(&to_array(clean_magnitude)?)
        .map(|l| to_rows(l.values()))
        .map_err(py_err)
}

#[pyfunction]
fn compose_gate(
    vrd_flags: Vec<bool>,
    energy: Vec<Vec<f64>>,
    template: Vec<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let energy = EnergyLabels::new(to_array(energy)?).map_err(py_err)?;
    gating::compose_gate(&vrd_flags, &energy, &to_array(template)?)
        .map(|g| to_rows(g.values()))
        .map_err(py_err)
}

#[pyfunction]
fn apply_mask_magnitude(spec: &PySpectrogram, logits: Vec<Vec<f64>>) -> PyResult<PySpectrogram> {
    masking::apply_mask_magnitude(&spec.inner, &MagnitudeMask(to_array(logits)?))
        .map(|inner| PySpectrogram { inner })
        .map_err(py_err)
}

#[pyfunction]
fn apply_mask_complex(
    spec: &PySpectrogram,
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
) -> PyResult<PySpectrogram> {
    let m = ComplexMask {
        real: to_array(real)?,
        imag: to_array(imag)?,
    };
    masking::apply_mask_complex(&spec.inner, &m)
        .map(|inner| PySpectrogram { inner })
        .map_err(py_err)
}

#[pyfunction]
fn apply_gated_compensation(
    spec: &PySpectrogram,
    gate: Vec<Vec<f64>>,
    logits: Vec<Vec<f64>>,
) -> PyResult<PySpectrogram> {
    masking::apply_gated_compensation(
        &spec.inner,
        &to_array(gate)?,
        &CompensationMask(to_array(logits)?),
    )
    .map(|inner| PySpectrogram { inner })
    .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (est, reference, gamma=0.5))]
fn apc_snr(est: &PySpectrogram, reference: &PySpectrogram, gamma: f64) -> PyResult<f64> {
    let g = LoudnessExponent::constant(reference.inner.bins(), gamma).map_err(py_err)?;
    metrics::apc_snr(&est.inner, &reference.inner, &g).map_err(py_err)
}

#[pyfunction]
fn si_snr(est: Vec<f64>, reference: Vec<f64>) -> PyResult<f64> {
    metrics::si_snr(&est, &reference).map_err(py_err)
}

#[pyfunction]
fn hb_loss(est_magnitude: Vec<Vec<f64>>, ref_magnitude: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::hb_loss(&to_array(est_magnitude)?, &to_array(ref_magnitude)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (p, alpha=1.0, beta=2.0))]
fn focal_loss(p: Vec<f64>, alpha: f64, beta: f64) -> PyResult<f64> {
    metrics::focal_loss(&p, alpha, beta).map_err(py_err)
}

#[pyclass(name = "Analysis", module = "harmonia_py", get_all)]
struct PyAnalysis {
    /// Pitch in Hz per frame, `None` when unvoiced.
    pitch_hz: Vec<Option<f64>>,
    voiced: Vec<bool>,
    gate: Vec<Vec<f64>>,
    xi: Option<f64>,
}

/// Pitch, voicing and gate of one signal; `xi` carries the voiced-region
/// threshold state between calls.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16_000, xi=None, alpha=0.4))]
fn analyze(
    samples: Vec<f64>,
    sample_rate: u32,
    xi: Option<f64>,
    alpha: f64,
) -> PyResult<PyAnalysis> {
    let cfg = band_config(sample_rate)?;
    let audio = AudioBuffer::new(samples, sample_rate).map_err(py_err)?;
    let state = match xi {
        Some(x) => VrdState::with_xi(x, alpha),
        None => VrdState::new(alpha),
    }
    .map_err(py_err)?;
    let u = pipeline::integral_matrix(&cfg).map_err(py_err)?;
    let a = pipeline::analyze(&audio, &cfg, &u, &state, &mut StageTimings::default())
        .map_err(py_err)?;
    let h = a.harmonic;
    Ok(PyAnalysis {
        pitch_hz: h.track.pitches(),
        voiced: h.voiced,
        gate: to_rows(h.gate.values()),
        xi: h.state.xi(),
    })
}

type Report = Vec<(String, f64)>;

/// Oracle-mask enhancement; returns `(samples, report)` with the loss
/// components keyed by name.
#[pyfunction]
#[pyo3(signature = (noisy, clean, sample_rate=16_000, compensation=true))]
fn enhance(
    noisy: Vec<f64>,
    clean: Vec<f64>,
    sample_rate: u32,
    compensation: bool,
) -> PyResult<(Vec<f64>, Report)> {
    let mut cfg = band_config(sample_rate)?;
    cfg.compensation = compensation;
    let noisy = AudioBuffer::new(noisy, sample_rate).map_err(py_err)?;
    let clean = AudioBuffer::new(clean, sample_rate).map_err(py_err)?;
    let u = pipeline::integral_matrix(&cfg).map_err(py_err)?;
    let out = pipeline::enhance(
        &noisy,
        &clean,
        &cfg,
        &u,
        &VrdState::default(),
        &mut StageTimings::default(),
    )
    .map_err(py_err)?;
    let r = out.report;
    let report = [
        ("l_hb", r.l_hb),
        ("l_apc_coarse", r.l_apc_coarse),
        ("l_apc_refined", r.l_apc_refined),
        ("l_focal", r.l_focal),
        ("total", r.total),
    ]
    .map(|(k, v)| (k.to_string(), v))
    .to_vec();
    Ok((out.audio.into_samples(), report))
}

#[pymodule]
fn harmonia_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpectrogram>()?;
    m.add_class::<PyIntegralMatrix>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_function(wrap_pyfunction!(stft, m)?)?;
    m.add_function(wrap_pyfunction!(istft, m)?)?;
    m.add_function(wrap_pyfunction!(candidate_hz, m)?)?;
    m.add_function(wrap_pyfunction!(significance, m)?)?;
    m.add_function(wrap_pyfunction!(select_pitch, m)?)?;
    m.add_function(wrap_pyfunction!(sed_labels, m)?)?;
    m.add_function(wrap_pyfunction!(compose_gate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_mask_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(apply_mask_complex, m)?)?;
    m.add_function(wrap_pyfunction!(apply_gated_compensation, m)?)?;
    m.add_function(wrap_pyfunction!(apc_snr, m)?)?;
    m.add_function(wrap_pyfunction!(si_snr, m)?)?;
    m.add_function(wrap_pyfunction!(hb_loss, m)?)?;
    m.add_function(wrap_pyfunction!(focal_loss, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(enhance, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_conversion_round_trips() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let a = to_array(rows.clone()).unwrap();
        assert_eq!(a.dim(), (2, 3));
        assert_eq!(to_rows(&a), rows);
    }

    #[test]
    fn presets_by_rate() {
        assert_eq!(preset(16_000).unwrap().bins(), 257);
        assert_eq!(preset(48_000).unwrap().bins(), 769);
    }
}
