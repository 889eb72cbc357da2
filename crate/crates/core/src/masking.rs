//! Mask application operators and mask providers.
//!
//! * [`apply_mask_magnitude`]: `|S| * sigmoid(M) * e^{j phase(S)}` (high band).
//! * [`apply_mask_complex`]: `|S| * tanh(|M|) * e^{j (phase(S) + phase(M))}`
//!   (coarse wide-band enhancement).
//! * [`apply_gated_compensation`]: `[1 + G * sigmoid(M)] * |S'| * e^{j phase(S')}`
//!   (harmonic compensation of the coarse result).
//!
//! Mask estimators are abstracted behind [`MaskProvider`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::gating::GateMatrix;
use crate::io::read_matrix;
use crate::spectral::{wrapped_atan2, ComplexSpectrogram};

/// Ratios are clamped to `[ORACLE_EPS, 1 - ORACLE_EPS]` before inverting a
/// sigmoid.
pub const ORACLE_EPS: f64 = 1e-4;
/// Upper ratio clamp before `atanh` in the complex oracle.
pub const ORACLE_TANH_CEIL: f64 = 1.0 - 1e-12;
const MAG_FLOOR: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Pre-sigmoid logits for the high-band magnitude mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeMask(pub Array2<f64>);

/// Complex mask; its magnitude passes through `tanh`, its phase is added.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask {
    pub real: Array2<f64>,
    pub imag: Array2<f64>,
}

/// Pre-sigmoid logits for the gated compensation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationMask(pub Array2<f64>);

fn check_mask(context: &'static str, spec: &ComplexSpectrogram, m: &Array2<f64>) -> Result<()> {
    if m.dim() != spec.dim() {
        return Err(Error::shape(context, spec.dim(), m.dim()));
    }
    if m.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric(format!("NaN in {context}")));
    }
    Ok(())
}

pub fn apply_mask_magnitude(
    spec: &ComplexSpectrogram,
    m: &MagnitudeMask,
) -> Result<ComplexSpectrogram> {
    check_mask("magnitude mask", spec, &m.0)?;
    spec.scale(&m.0.mapv(sigmoid))
}

pub fn apply_mask_complex(
    spec: &ComplexSpectrogram,
    m: &ComplexMask,
) -> Result<ComplexSpectrogram> {
    check_mask("complex mask (real)", spec, &m.real)?;
    check_mask("complex mask (imag)", spec, &m.imag)?;
    let mut real = Array2::zeros(spec.dim());
    let mut imag = Array2::zeros(spec.dim());
    Zip::from(&mut real)
        .and(&mut imag)
        .and(spec.real())
        .and(spec.imag())
        .and(&m.real)
        .and(&m.imag)
        .for_each(|or, oi, &sr, &si, &mr, &mi| {
            let gain = mr.hypot(mi).tanh();
            let radius = sr.hypot(si) * gain;
            if radius == 0.0 {
                return;
            }
            let angle = wrapped_atan2(si, sr) + wrapped_atan2(mi, mr);
            let (mut re, mut im) = (radius * angle.cos(), radius * angle.sin());
            // cos/sin rounding can land an ulp outside |S|
            let limit = sr.hypot(si);
            while re.hypot(im) > limit {
                re *= 1.0 - f64::EPSILON;
                im *= 1.0 - f64::EPSILON;
            }
            *or = re;
            *oi = im;
        });
    Ok(spec.with_parts(real, imag))
}

pub fn apply_gated_compensation(
    coarse: &ComplexSpectrogram,
    gate_smoothed: &Array2<f64>,
    m: &CompensationMask,
) -> Result<ComplexSpectrogram> {
    check_mask("compensation mask", coarse, &m.0)?;
    if gate_smoothed.dim() != coarse.dim() {
        return Err(Error::shape("gate", coarse.dim(), gate_smoothed.dim()));
    }
    if gate_smoothed.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::invalid("gate entries must lie in [0, 1]"));
    }
    let factor = Zip::from(gate_smoothed)
        .and(&m.0)
        .map_collect(|&g, &logit| 1.0 + g * sigmoid(logit));
    coarse.scale(&factor)
}

fn ratio(num: f64, den: f64) -> f64 {
    num / den.max(MAG_FLOOR)
}

/// Logits whose sigmoid is the clamped clean/noisy magnitude ratio.
pub fn oracle_magnitude_mask(
    noisy: &ComplexSpectrogram,
    clean: &ComplexSpectrogram,
) -> Result<MagnitudeMask> {
    if noisy.dim() != clean.dim() {
        return Err(Error::shape("oracle pair", noisy.dim(), clean.dim()));
    }
    let logits = Zip::from(&clean.magnitude())
        .and(&noisy.magnitude())
        .map_collect(|&c, &n| logit(ratio(c, n).clamp(ORACLE_EPS, 1.0 - ORACLE_EPS)));
    Ok(MagnitudeMask(logits))
}

/// Complex mask with magnitude `atanh(clamped ratio)` and phase
/// `phase(clean) - phase(noisy)`.
pub fn oracle_complex_mask(
    noisy: &ComplexSpectrogram,
    clean: &ComplexSpectrogram,
) -> Result<ComplexMask> {
    if noisy.dim() != clean.dim() {
        return Err(Error::shape("oracle pair", noisy.dim(), clean.dim()));
    }
    let cm = clean.magnitude();
    let nm = noisy.magnitude();
    let dphase = &clean.phase() - &noisy.phase();
    let amp = Zip::from(&cm)
        .and(&nm)
        .map_collect(|&c, &n| ratio(c, n).clamp(ORACLE_EPS, ORACLE_TANH_CEIL).atanh());
    Ok(ComplexMask {
        real: Zip::from(&amp)
            .and(&dphase)
            .map_collect(|&a, &d| a * d.cos()),
        imag: Zip::from(&amp)
            .and(&dphase)
            .map_collect(|&a, &d| a * d.sin()),
    })
}

/// Compensation logits reproducing `|clean| / |coarse|` where the gate is
/// open; closed bins get the minimum logit.
///
/// The target is divided by the gate value so a smoothed gate below one
/// still reaches the ratio when it can.
pub fn oracle_compensation_mask(
    coarse: &ComplexSpectrogram,
    clean: &ComplexSpectrogram,
    gate_smoothed: &Array2<f64>,
) -> Result<CompensationMask> {
    if coarse.dim() != clean.dim() {
        return Err(Error::shape("oracle pair", coarse.dim(), clean.dim()));
    }
    if gate_smoothed.dim() != coarse.dim() {
        return Err(Error::shape("gate", coarse.dim(), gate_smoothed.dim()));
    }
    let logits = Zip::from(&clean.magnitude())
        .and(&coarse.magnitude())
        .and(gate_smoothed)
        .map_collect(|&c, &s, &g| {
            let target = if g > 0.0 {
                (ratio(c, s) - 1.0) / g
            } else {
                0.0
            };
            logit(target.clamp(ORACLE_EPS, 1.0 - ORACLE_EPS))
        });
    Ok(CompensationMask(logits))
}

/// Source of the three masks for one utterance.
pub trait MaskProvider {
    fn magnitude_mask(&self, noisy_hb: &ComplexSpectrogram) -> Result<MagnitudeMask>;

    fn complex_mask(&self, noisy_wb: &ComplexSpectrogram) -> Result<ComplexMask>;

    fn compensation_mask(
        &self,
        coarse_wb: &ComplexSpectrogram,
        gate_smoothed: &GateMatrix,
    ) -> Result<CompensationMask>;
}

/// Ideal masks derived from the clean reference.
#[derive(Debug, Clone)]
pub struct OracleMasks {
    pub clean_wb: ComplexSpectrogram,
    pub clean_hb: Option<ComplexSpectrogram>,
}

impl MaskProvider for OracleMasks {
    fn magnitude_mask(&self, noisy_hb: &ComplexSpectrogram) -> Result<MagnitudeMask> {
        let clean = self
            .clean_hb
            .as_ref()
            .ok_or_else(|| Error::invalid("oracle has no high-band reference"))?;
        oracle_magnitude_mask(noisy_hb, clean)
    }

    fn complex_mask(&self, noisy_wb: &ComplexSpectrogram) -> Result<ComplexMask> {
        oracle_complex_mask(noisy_wb, &self.clean_wb)
    }

    fn compensation_mask(
        &self,
        coarse_wb: &ComplexSpectrogram,
        gate_smoothed: &GateMatrix,
    ) -> Result<CompensationMask> {
        oracle_compensation_mask(coarse_wb, &self.clean_wb, gate_smoothed.values())
    }
}

/// Every logit equal to one value (complex masks get a zero imaginary part).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantMasks(pub f64);

impl MaskProvider for ConstantMasks {
    fn magnitude_mask(&self, noisy_hb: &ComplexSpectrogram) -> Result<MagnitudeMask> {
        Ok(MagnitudeMask(Array2::from_elem(noisy_hb.dim(), self.0)))
    }

    fn complex_mask(&self, noisy_wb: &ComplexSpectrogram) -> Result<ComplexMask> {
        Ok(ComplexMask {
            real: Array2::from_elem(noisy_wb.dim(), self.0),
            imag: Array2::zeros(noisy_wb.dim()),
        })
    }

    fn compensation_mask(
        &self,
        coarse_wb: &ComplexSpectrogram,
        _gate: &GateMatrix,
    ) -> Result<CompensationMask> {
        Ok(CompensationMask(Array2::from_elem(coarse_wb.dim(), self.0)))
    }
}

/// Masks read from a directory of matrix files: `hb_mask.bin`,
/// `cem_real.bin`, `cem_imag.bin` and `gm_mask.bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct FileMasks {
    pub dir: PathBuf,
}

impl FileMasks {
    pub const HB: &'static str = "hb_mask.bin";
    pub const CEM_REAL: &'static str = "cem_real.bin";
    pub const CEM_IMAG: &'static str = "cem_imag.bin";
    pub const GM: &'static str = "gm_mask.bin";

    fn load(&self, name: &str, dim: (usize, usize)) -> Result<Array2<f64>> {
        let m = read_matrix(&self.dir.join(name))?;
        if m.dim() != dim {
            return Err(Error::shape("mask file", dim, m.dim()));
        }
        Ok(m)
    }
}

impl MaskProvider for FileMasks {
    fn magnitude_mask(&self, noisy_hb: &ComplexSpectrogram) -> Result<MagnitudeMask> {
        Ok(MagnitudeMask(self.load(Self::HB, noisy_hb.dim())?))
    }

    fn complex_mask(&self, noisy_wb: &ComplexSpectrogram) -> Result<ComplexMask> {
        Ok(ComplexMask {
            real: self.load(Self::CEM_REAL, noisy_wb.dim())?,
            imag: self.load(Self::CEM_IMAG, noisy_wb.dim())?,
        })
    }

    fn compensation_mask(
        &self,
        coarse_wb: &ComplexSpectrogram,
        _gate: &GateMatrix,
    ) -> Result<CompensationMask> {
        Ok(CompensationMask(self.load(Self::GM, coarse_wb.dim())?))
    }
}

/// `oracle`, `constant:<logit>` or `file:<dir>`.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    Oracle,
    Constant(f64),
    File(PathBuf),
}

impl FromStr for MaskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "oracle" {
            return Ok(Self::Oracle);
        }
        if let Some(v) = s.strip_prefix("constant:") {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::invalid(format!("bad constant mask value {v:?}")))?;
            if v.is_nan() {
                return Err(Error::invalid("constant mask value is NaN"));
            }
            return Ok(Self::Constant(v));
        }
        if let Some(p) = s.strip_prefix("file:") {
            if p.is_empty() {
                return Err(Error::invalid("file mask needs a directory"));
            }
            return Ok(Self::File(Path::new(p).to_path_buf()));
        }
        Err(Error::invalid(format!(
            "mask must be oracle, constant:<v> or file:<dir>, got {s:?}"
        )))
    }
}

impl std::fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Oracle => f.write_str("oracle"),
            Self::Constant(v) => write!(f, "constant:{v}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}
