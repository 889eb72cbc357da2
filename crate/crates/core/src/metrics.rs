//! Losses and quality scores.
//!
//! Scores (SI-SNR, APC-SNR) are in dB, higher is better, clamped to
//! `[-60, 60]`. Inside [`LossReport`] the APC terms appear negated so that
//! every component is minimised.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Zip};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gating::LOG_FLOOR;
use crate::spectral::ComplexSpectrogram;

pub const DB_CEILING: f64 = 60.0;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const FOCAL_ALPHA: f64 = 1.0;
pub const FOCAL_BETA: f64 = 2.0;

/// Per-bin loudness exponents in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessExponent {
    gamma: Vec<f64>,
}

impl LoudnessExponent {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::Empty("loudness exponents"));
        }
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::invalid(format!(
                "loudness exponent {g} outside (0, 1]"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn constant(bins: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![gamma; bins])
    }

    /// Whitespace-separated exponents, one per bin; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut gamma = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line.split_whitespace() {
                gamma.push(tok.parse::<f64>().map_err(|_| Error::Config {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: format!("bad exponent {tok:?}"),
                })?);
            }
        }
        Self::new(gamma)
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

/// `|S| (|S| + 1)^((gamma - 1) / 2)` with phase kept.
pub fn loudness_compress(
    spec: &ComplexSpectrogram,
    gamma: &LoudnessExponent,
) -> Result<ComplexSpectrogram> {
    if gamma.len() != spec.bins() {
        return Err(Error::shape(
            "loudness exponents",
            (spec.bins(), 1),
            (gamma.len(), 1),
        ));
    }
    let mag = spec.magnitude();
    let mut gain = Array2::zeros(spec.dim());
    for (mut g_row, m_row) in gain.rows_mut().into_iter().zip(mag.rows()) {
        Zip::from(&mut g_row)
            .and(&m_row)
            .and(ndarray::ArrayView1::from(gamma.values()))
            .for_each(|g, &m, &y| *g = (m + 1.0).powf((y - 1.0) / 2.0));
    }
    spec.scale(&gain)
}

fn projection_snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::Mismatch(format!(
            "estimate has {} values, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let ref_energy: f64 = reference.iter().map(|r| r * r).sum();
    if ref_energy == 0.0 {
        return Err(Error::invalid("reference is identically zero"));
    }
    let scale = est.iter().zip(reference).map(|(e, r)| e * r).sum::<f64>() / ref_energy;
    let (mut target, mut residual) = (0.0, 0.0);
    for (e, r) in est.iter().zip(reference) {
        let t = scale * r;
        target += t * t;
        residual += (e - t) * (e - t);
    }
    let db = if target == 0.0 {
        -DB_CEILING
    } else if residual == 0.0 {
        DB_CEILING
    } else {
        10.0 * (target / residual).log10()
    };
    Ok(db.clamp(-DB_CEILING, DB_CEILING))
}

/// Scale-invariant SNR of two real sequences, dB.
pub fn si_snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    projection_snr(est, reference)
}

/// SI-SNR of loudness-compressed complex spectra (real and imaginary parts
/// taken as one real vector), dB.
pub fn apc_snr(
    est: &ComplexSpectrogram,
    reference: &ComplexSpectrogram,
    gamma: &LoudnessExponent,
) -> Result<f64> {
    if est.dim() != reference.dim() {
        return Err(Error::shape("apc_snr", reference.dim(), est.dim()));
    }
    let e = loudness_compress(est, gamma)?;
    let r = loudness_compress(reference, gamma)?;
    projection_snr(&e.interleaved(), &r.interleaved())
}

/// Mean squared magnitude error plus mean squared log-magnitude error.
pub fn hb_loss(est_mag: &Array2<f64>, ref_mag: &Array2<f64>) -> Result<f64> {
    if est_mag.dim() != ref_mag.dim() {
        return Err(Error::shape("hb_loss", ref_mag.dim(), est_mag.dim()));
    }
    if est_mag.is_empty() {
        return Ok(0.0);
    }
    if est_mag
        .iter()
        .chain(ref_mag.iter())
        .any(|&m| m.is_nan() || m < 0.0)
    {
        return Err(Error::invalid("magnitudes must be nonnegative"));
    }
    let total: f64 = Zip::from(est_mag).and(ref_mag).fold(0.0, |acc, &e, &r| {
        let d = e - r;
        let dl = e.max(LOG_FLOOR).ln() - r.max(LOG_FLOOR).ln();
        acc + d * d + dl * dl
    });
    Ok(total / est_mag.len() as f64)
}

/// Mean of `-alpha (1 - p)^beta ln p` over probabilities of the true class.
pub fn focal_loss(p: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Empty("focal loss probabilities"));
    }
    if let Some(bad) = p.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::invalid(format!("probability {bad} outside (0, 1]")));
    }
    let sum = p
        .iter()
        .fold(0.0, |acc, &v| acc - alpha * (1.0 - v).powf(beta) * v.ln());
    Ok(sum / p.len() as f64)
}

/// Components of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub l_hb: f64,
    /// Negated APC-SNR of the coarse estimate.
    pub l_apc_coarse: f64,
    /// Negated APC-SNR of the refined estimate.
    pub l_apc_refined: f64,
    pub l_focal: f64,
    pub total: f64,
}

pub const REPORT_CSV_HEADER: &str = "l_hb,l_apc_coarse,l_apc_refined,l_focal,total";

impl LossReport {
    pub fn write_key_values<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "l_hb={}", self.l_hb)?;
        writeln!(w, "l_apc_coarse={}", self.l_apc_coarse)?;
        writeln!(w, "l_apc_refined={}", self.l_apc_refined)?;
        writeln!(w, "l_focal={}", self.l_focal)?;
        writeln!(w, "total={}", self.total)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.l_hb, self.l_apc_coarse, self.l_apc_refined, self.l_focal, self.total
        )
    }
}

/// Sums the components; APC arguments are scores (dB) and enter negated.
pub fn total_loss(l_hb: f64, apc_coarse_db: f64, apc_refined_db: f64, l_focal: f64) -> LossReport {
    let l_apc_coarse = -apc_coarse_db;
    let l_apc_refined = -apc_refined_db;
    LossReport {
        l_hb,
        l_apc_coarse,
        l_apc_refined,
        l_focal,
        total: l_hb + l_apc_coarse + l_apc_refined + l_focal,
    }
}
