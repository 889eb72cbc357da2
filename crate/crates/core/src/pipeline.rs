//! End-to-end commands: analyze, enhance, metrics and matrix.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Zip};
use serde::Serialize;

use crate::config::{BandMode, EnergySource, MatrixLayout, PipelineConfig, TemplateMode};
use crate::error::{Error, Result};
use crate::gating::{
    compose_gate, oracle_sed, sed_labels, smooth_gate, vrd, EnergyLabels, GateMatrix, VrdState,
};
use crate::harmonic::{
    harmonic_template, select_pitch, signed_template, significance, IntegralMatrix, PitchTrack,
    SignificanceSpectrum,
};
use crate::io::{read_matrix, read_wav, write_atomic, write_matrix, write_wav, SampleFormat};
use crate::masking::{
    apply_gated_compensation, apply_mask_complex, apply_mask_magnitude, ConstantMasks, FileMasks,
    MaskProvider, MaskSpec, OracleMasks,
};
use crate::metrics::{
    apc_snr, focal_loss, hb_loss, si_snr, total_loss, LossReport, FOCAL_ALPHA, FOCAL_BETA,
};
use crate::spectral::{istft, merge_bands, split_bands, stft, AudioBuffer, ComplexSpectrogram};

pub const TOOL_NAME: &str = "harmonia";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Floor applied to true-class probabilities taken from binary detections.
pub const FOCAL_PROB_FLOOR: f64 = 1e-4;

/// Wall-clock milliseconds per named stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings(pub Vec<(String, f64)>);

impl StageTimings {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0
            .push((stage.to_string(), start.elapsed().as_secs_f64() * 1e3));
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    /// Relative to the output directory.
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str, cfg: &PipelineConfig) -> Result<Self> {
        let config = cfg
            .canonical()?
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config_hash: cfg.hash()?,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Integral matrix for the wide band of `cfg`, in the configured layout.
pub fn integral_matrix(cfg: &PipelineConfig) -> Result<IntegralMatrix> {
    let a = cfg.analysis()?;
    let bins = match cfg.band {
        BandMode::Wb => a.bins(),
        BandMode::Fb => crate::spectral::WB_BINS.min(a.bins()),
    };
    let u = IntegralMatrix::build(bins, a.bin_hz(), cfg.matrix_convention)?;
    Ok(match cfg.matrix_layout {
        MatrixLayout::Dense => u,
        MatrixLayout::Csr => u.compressed(),
    })
}

fn check_rate(audio: &AudioBuffer, cfg: &PipelineConfig) -> Result<()> {
    let expected = cfg.analysis()?.sample_rate;
    if audio.sample_rate() != expected {
        let hint = match audio.sample_rate() {
            16_000 => " (use --band wb)",
            48_000 => " (use --band fb)",
            _ => "",
        };
        return Err(Error::UnsupportedFormat(format!(
            "input is {} Hz but band {} expects {expected} Hz{hint}",
            audio.sample_rate(),
            cfg.band
        )));
    }
    Ok(())
}

/// Forward transform; in full-band mode returns the wide and high bands.
fn analyse_bands(
    audio: &AudioBuffer,
    cfg: &PipelineConfig,
) -> Result<(ComplexSpectrogram, Option<ComplexSpectrogram>)> {
    check_rate(audio, cfg)?;
    let spec = stft(audio, &cfg.analysis()?)?;
    match cfg.band {
        BandMode::Wb => Ok((spec, None)),
        BandMode::Fb => {
            let (wb, hb) = split_bands(&spec)?;
            Ok((wb, Some(hb)))
        }
    }
}

fn template_for(cfg: &PipelineConfig, voiced: &PitchTrack, u: &IntegralMatrix) -> Array2<f64> {
    match cfg.template {
        TemplateMode::Binary => harmonic_template(&voiced.pitches(), u.bins(), u.bin_hz()),
        TemplateMode::Signed => signed_template(voiced, u).mapv(|v| v.clamp(0.0, 1.0)),
    }
}

/// Everything derived from one wide-band magnitude.
#[derive(Debug, Clone)]
pub struct HarmonicGate {
    pub significance: SignificanceSpectrum,
    /// Pitch per frame, unvoiced frames cleared.
    pub track: PitchTrack,
    pub voiced: Vec<bool>,
    pub gate: GateMatrix,
    pub state: VrdState,
}

/// Significance, pitch, voicing and the composed gate `G`.
pub fn harmonic_gate(
    mag: &Array2<f64>,
    energy: &EnergyLabels,
    u: &IntegralMatrix,
    cfg: &PipelineConfig,
    state: &VrdState,
    timings: &mut StageTimings,
) -> Result<HarmonicGate> {
    let q = timings.time("significance", || significance(mag, u))?;
    let (track, voiced, state) = timings.time("pitch", || {
        let raw = select_pitch(&q);
        let (voiced, state) = vrd(&q, state);
        raw.with_voicing(&voiced).map(|t| (t, voiced, state))
    })?;
    let gate = timings.time("gate", || {
        compose_gate(&voiced, energy, &template_for(cfg, &track, u))
    })?;
    Ok(HarmonicGate {
        significance: q,
        track,
        voiced,
        gate,
        state,
    })
}

fn vrd_state(cfg: &PipelineConfig, path: Option<&Path>) -> Result<VrdState> {
    match path {
        Some(p) if p.exists() => VrdState::load(p),
        _ => VrdState::new(cfg.vrd_alpha),
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub harmonic: HarmonicGate,
    pub hop_s: f64,
}

/// In-memory analyze: the energy gate comes from the analysed signal.
pub fn analyze(
    audio: &AudioBuffer,
    cfg: &PipelineConfig,
    u: &IntegralMatrix,
    state: &VrdState,
    timings: &mut StageTimings,
) -> Result<Analysis> {
    let (wb, _) = timings.time("stft", || analyse_bands(audio, cfg))?;
    let mag = wb.magnitude();
    let energy = timings.time("energy", || sed_labels(&mag))?;
    let harmonic = harmonic_gate(&mag, &energy, u, cfg, state, timings)?;
    Ok(Analysis {
        harmonic,
        hop_s: wb.frame_hop() as f64 / audio.sample_rate() as f64,
    })
}

pub const PITCH_CSV: &str = "pitch.csv";
pub const GATES_BIN: &str = "gates.bin";
pub const SIGNIFICANCE_BIN: &str = "significance.bin";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Writes `pitch.csv`, `gates.bin`, `significance.bin` and `manifest.json`
/// into `out_dir`; updates the VRD state file when given.
pub fn cmd_analyze(
    wav: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    vrd_state_path: Option<&Path>,
) -> Result<RunManifest> {
    let mut timings = StageTimings::default();
    let mut manifest = RunManifest::new("analyze", cfg)?;
    let audio = timings.time("read", || read_wav(wav))?;
    let u = timings.time("matrix", || integral_matrix(cfg))?;
    let state = vrd_state(cfg, vrd_state_path)?;
    let analysis = analyze(&audio, cfg, &u, &state, &mut timings)?;
    let h = &analysis.harmonic;

    std::fs::create_dir_all(out_dir)?;
    timings.time("write", || -> Result<()> {
        let mut csv = Vec::new();
        h.track.write_csv(&mut csv, analysis.hop_s)?;
        write_atomic(&out_dir.join(PITCH_CSV), &csv)?;
        write_matrix(&out_dir.join(GATES_BIN), h.gate.values())?;
        write_matrix(&out_dir.join(SIGNIFICANCE_BIN), h.significance.values())?;
        Ok(())
    })?;
    manifest.inputs.push(wav.display().to_string());
    manifest
        .outputs
        .extend([PITCH_CSV, GATES_BIN, SIGNIFICANCE_BIN].map(String::from));
    if let Some(p) = vrd_state_path {
        h.state.save(p)?;
        manifest.inputs.push(p.display().to_string());
        manifest.outputs.push(p.display().to_string());
    }
    manifest.outputs.push(MANIFEST_JSON.to_string());
    manifest.timings_ms = timings.0.into_iter().collect();
    write_atomic(&out_dir.join(MANIFEST_JSON), manifest.to_json().as_bytes())?;
    Ok(manifest)
}

/// Probability of the true label for binary detections.
fn true_class_probabilities(pred: &EnergyLabels, target: &EnergyLabels) -> Result<Vec<f64>> {
    if pred.values().dim() != target.values().dim() {
        return Err(Error::shape(
            "energy labels",
            target.values().dim(),
            pred.values().dim(),
        ));
    }
    Ok(Zip::from(pred.values())
        .and(target.values())
        .map_collect(|&p, &t| if p == t { 1.0 } else { FOCAL_PROB_FLOOR })
        .into_raw_vec_and_offset()
        .0)
}

fn mask_provider(
    spec: &MaskSpec,
    clean_wb: &ComplexSpectrogram,
    clean_hb: Option<&ComplexSpectrogram>,
) -> Box<dyn MaskProvider> {
    match spec {
        MaskSpec::Oracle => Box::new(OracleMasks {
            clean_wb: clean_wb.clone(),
            clean_hb: clean_hb.cloned(),
        }),
        MaskSpec::Constant(v) => Box::new(ConstantMasks(*v)),
        MaskSpec::File(dir) => Box::new(FileMasks { dir: dir.clone() }),
    }
}

#[derive(Debug, Clone)]
pub struct Enhanced {
    pub audio: AudioBuffer,
    pub coarse: ComplexSpectrogram,
    pub refined: ComplexSpectrogram,
    pub high_band: Option<ComplexSpectrogram>,
    pub harmonic: HarmonicGate,
    /// Gate after causal smoothing, as applied.
    pub gate_smoothed: GateMatrix,
    pub report: LossReport,
}

/// Complex mask, harmonic gate, gated compensation, and in full-band mode
/// the high-band magnitude mask; scored against `clean`.
pub fn enhance(
    noisy: &AudioBuffer,
    clean: &AudioBuffer,
    cfg: &PipelineConfig,
    u: &IntegralMatrix,
    state: &VrdState,
    timings: &mut StageTimings,
) -> Result<Enhanced> {
    if noisy.len() != clean.len() {
        return Err(Error::Mismatch(format!(
            "noisy has {} samples, clean {}",
            noisy.len(),
            clean.len()
        )));
    }
    if noisy.sample_rate() != clean.sample_rate() {
        return Err(Error::SampleRate {
            expected: noisy.sample_rate(),
            actual: clean.sample_rate(),
        });
    }
    let analysis = cfg.analysis()?;
    let gamma = cfg.gamma.resolve(u.bins())?;
    let ((noisy_wb, noisy_hb), (clean_wb, clean_hb)) = timings.time("stft", || {
        Ok::<_, Error>((analyse_bands(noisy, cfg)?, analyse_bands(clean, cfg)?))
    })?;
    let masks = mask_provider(&cfg.mask, &clean_wb, clean_hb.as_ref());

    let coarse = timings.time("coarse", || {
        apply_mask_complex(&noisy_wb, &masks.complex_mask(&noisy_wb)?)
    })?;
    let coarse_mag = coarse.magnitude();
    let clean_labels = sed_labels(&clean_wb.magnitude())?;
    let energy = match cfg.energy {
        EnergySource::Reference => oracle_sed(&clean_wb.magnitude())?,
        EnergySource::Coarse => sed_labels(&coarse_mag)?,
    };
    let harmonic = harmonic_gate(&coarse_mag, &energy, u, cfg, state, timings)?;
    let gate = if cfg.compensation {
        harmonic.gate.clone()
    } else {
        GateMatrix::zeros(coarse.frames(), coarse.bins())
    };
    let gate_smoothed = smooth_gate(&gate, &cfg.gate_kernel);
    let refined = timings.time("compensation", || {
        let m = masks.compensation_mask(&coarse, &gate_smoothed)?;
        apply_gated_compensation(&coarse, gate_smoothed.values(), &m)
    })?;

    let high_band = match (&noisy_hb, &clean_hb) {
        (Some(hb), Some(_)) => Some(timings.time("high_band", || {
            apply_mask_magnitude(hb, &masks.magnitude_mask(hb)?)
        })?),
        _ => None,
    };
    let audio = timings.time("istft", || match &high_band {
        Some(hb) => istft(&merge_bands(&refined, hb)?, &analysis),
        None => istft(&refined, &analysis),
    })?;

    let report = timings.time("losses", || -> Result<LossReport> {
        let l_hb = match (&high_band, &clean_hb) {
            (Some(est), Some(reference)) => hb_loss(&est.magnitude(), &reference.magnitude())?,
            _ => 0.0,
        };
        let p = true_class_probabilities(&energy, &clean_labels)?;
        Ok(total_loss(
            l_hb,
            apc_snr(&coarse, &clean_wb, &gamma)?,
            apc_snr(&refined, &clean_wb, &gamma)?,
            focal_loss(&p, FOCAL_ALPHA, FOCAL_BETA)?,
        ))
    })?;
    Ok(Enhanced {
        audio,
        coarse,
        refined,
        high_band,
        harmonic,
        gate_smoothed,
        report,
    })
}

/// Reads the pair, enhances, writes `out_wav` (float) and returns the report.
pub fn cmd_enhance(
    noisy_wav: &Path,
    clean_wav: &Path,
    cfg: &PipelineConfig,
    out_wav: &Path,
    vrd_state_path: Option<&Path>,
) -> Result<(Enhanced, RunManifest)> {
    let mut timings = StageTimings::default();
    let mut manifest = RunManifest::new("enhance", cfg)?;
    let (noisy, clean) = timings.time("read", || {
        Ok::<_, Error>((read_wav(noisy_wav)?, read_wav(clean_wav)?))
    })?;
    let u = timings.time("matrix", || integral_matrix(cfg))?;
    let state = vrd_state(cfg, vrd_state_path)?;
    let out = enhance(&noisy, &clean, cfg, &u, &state, &mut timings)?;
    if out.audio.samples().iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("enhanced audio is not finite".into()));
    }
    if let Some(dir) = out_wav.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    timings.time("write", || {
        write_wav(out_wav, &out.audio, SampleFormat::Float32)
    })?;
    manifest.inputs = vec![
        noisy_wav.display().to_string(),
        clean_wav.display().to_string(),
    ];
    manifest.outputs.push(out_wav.display().to_string());
    if let Some(p) = vrd_state_path {
        out.harmonic.state.save(p)?;
        manifest.inputs.push(p.display().to_string());
        manifest.outputs.push(p.display().to_string());
    }
    manifest.timings_ms = timings.0.into_iter().collect();
    Ok((out, manifest))
}

/// Scores of an estimate against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub report: LossReport,
    /// Loudness-compressed SNR of the wide band, dB.
    pub apc_snr_db: f64,
    /// Time-domain scale-invariant SNR, dB.
    pub si_snr_db: f64,
}

impl Scores {
    pub fn write_key_values<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        self.report.write_key_values(&mut w)?;
        writeln!(w, "apc_snr_db={}", self.apc_snr_db)?;
        writeln!(w, "si_snr_db={}", self.si_snr_db)
    }

    pub const CSV_HEADER: &'static str =
        "l_hb,l_apc_coarse,l_apc_refined,l_focal,total,apc_snr_db,si_snr_db";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{}",
            self.report.csv_row(),
            self.apc_snr_db,
            self.si_snr_db
        )
    }
}

/// Both APC terms score the single estimate; the focal term compares the
/// energy labels of estimate and reference.
pub fn metrics(est: &AudioBuffer, reference: &AudioBuffer, cfg: &PipelineConfig) -> Result<Scores> {
    if est.sample_rate() != reference.sample_rate() {
        return Err(Error::SampleRate {
            expected: reference.sample_rate(),
            actual: est.sample_rate(),
        });
    }
    if est.len() != reference.len() {
        return Err(Error::Mismatch(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let (est_wb, est_hb) = analyse_bands(est, cfg)?;
    let (ref_wb, ref_hb) = analyse_bands(reference, cfg)?;
    let gamma = cfg.gamma.resolve(ref_wb.bins())?;
    let l_hb = match (&est_hb, &ref_hb) {
        (Some(e), Some(r)) => hb_loss(&e.magnitude(), &r.magnitude())?,
        _ => 0.0,
    };
    let apc = apc_snr(&est_wb, &ref_wb, &gamma)?;
    let p = true_class_probabilities(
        &sed_labels(&est_wb.magnitude())?,
        &sed_labels(&ref_wb.magnitude())?,
    )?;
    let report = total_loss(l_hb, apc, apc, focal_loss(&p, FOCAL_ALPHA, FOCAL_BETA)?);
    Ok(Scores {
        report,
        apc_snr_db: apc,
        si_snr_db: si_snr(est.samples(), reference.samples())?,
    })
}

pub fn cmd_metrics(est_wav: &Path, ref_wav: &Path, cfg: &PipelineConfig) -> Result<Scores> {
    metrics(&read_wav(est_wav)?, &read_wav(ref_wav)?, cfg)
}

/// Builds and writes the integral matrix; `bins` overrides the band's bin
/// count.
pub fn cmd_matrix(cfg: &PipelineConfig, out: &Path, bins: Option<usize>) -> Result<IntegralMatrix> {
    let u = match bins {
        Some(b) => IntegralMatrix::build(b, cfg.analysis()?.bin_hz(), cfg.matrix_convention)?,
        None => integral_matrix(cfg)?,
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_matrix(out, u.values())?;
    Ok(u)
}

/// Reads a matrix file written by [`cmd_matrix`].
pub fn load_matrix(path: &Path, bin_hz: f64) -> Result<IntegralMatrix> {
    IntegralMatrix::from_values(read_matrix(path)?, bin_hz)
}

/// Paths of the artifacts [`cmd_analyze`] writes into `out_dir`.
pub fn analyze_artifacts(out_dir: &Path) -> [PathBuf; 4] {
    [PITCH_CSV, GATES_BIN, SIGNIFICANCE_BIN, MANIFEST_JSON].map(|f| out_dir.join(f))
}
