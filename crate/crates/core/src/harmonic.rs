//! Harmonic integration: pitch-candidate templates, significance, pitch
//! selection and the per-frame harmonic peak template.
//!
//! Candidates span 60.0 to 419.9 Hz in 0.1 Hz steps (3600 of them). Each
//! candidate row of the integral matrix places a peak of `1/sqrt(k)` at the
//! bin of its `k`-th harmonic, up to 8 kHz, and fills the space between
//! consecutive peaks with a cosine valley whose envelope interpolates the two
//! peak heights. Peaks only one bin apart cannot host a valley; both are
//! lowered by the mean of the two peak heights instead.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub const NUM_CANDIDATES: usize = 3600;
/// Lowest candidate in units of 0.1 Hz.
pub const MIN_CANDIDATE_DECIHZ: usize = 600;
/// Harmonics are integrated up to this frequency.
pub const HARMONIC_CEILING_HZ: f64 = 8000.0;

/// Frequency of candidate `j`.
pub fn candidate_hz(j: usize) -> f64 {
    (MIN_CANDIDATE_DECIHZ + j) as f64 / 10.0
}

/// Bin-placement convention for the integral matrix.
///
/// `Aligned` places harmonic `k` of `f` at `round(k f / bin_hz)` and spans each
/// cosine valley over both bounding peaks, so consecutive peaks two bins apart
/// still get a negative valley between them. `Literal` assumes `F` bins per
/// 8 kHz and writes the interpolation one bin to the right, which leaves rows
/// for candidates below roughly 95 Hz (at 31.25 Hz bins) without valleys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixConvention {
    #[default]
    Aligned,
    Literal,
}

impl std::str::FromStr for MatrixConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(Self::Aligned),
            "literal" => Ok(Self::Literal),
            other => Err(Error::invalid(format!(
                "unknown matrix convention {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for MatrixConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Aligned => "aligned",
            Self::Literal => "literal",
        })
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive, last value pinned to `b`.
fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n { b } else { a + i as f64 * step })
}

/// One candidate row under construction; writes past the last bin are dropped.
struct Row<'a> {
    values: &'a mut [f64],
}

impl Row<'_> {
    fn set(&mut self, idx: usize, v: f64) {
        if let Some(slot) = self.values.get_mut(idx) {
            *slot = v;
        }
    }

    fn sub(&mut self, idx: usize, v: f64) {
        if let Some(slot) = self.values.get_mut(idx) {
            *slot -= v;
        }
    }
}

fn fill_row(values: &mut [f64], decihz: usize, bin_hz: f64, convention: MatrixConvention) {
    let bins = values.len();
    let f0 = 0.1 * decihz as f64;
    let harmonics = (HARMONIC_CEILING_HZ / f0).round() as usize;
    let locate = |k: usize| -> usize {
        match convention {
            MatrixConvention::Aligned => (f0 * k as f64 / bin_hz).round() as usize,
            MatrixConvention::Literal => {
                (f0 * k as f64 * bins as f64 / HARMONIC_CEILING_HZ).round() as usize
            }
        }
    };

    let mut row = Row { values };
    let mut loc_last = 0usize;
    let mut peak_last = 1.0f64;
    for k in 1..=harmonics {
        let loc = locate(k);
        let peak = 1.0 / (k as f64).sqrt();
        row.set(loc, peak);
        let gap = loc - loc_last;
        if gap > 1 {
            let (n, first) = match convention {
                MatrixConvention::Aligned => (gap + 1, loc_last),
                MatrixConvention::Literal => (gap, loc_last + 1),
            };
            let shape = linspace(0.0, 2.0 * PI, n).map(f64::cos);
            let envelope = linspace(peak_last, peak, n);
            for (i, (c, e)) in shape.zip(envelope).enumerate() {
                row.set(first + i, c * e);
            }
        } else {
            let dip = (peak_last + peak) / 2.0;
            row.sub(loc, dip);
            row.sub(loc_last, dip);
        }
        loc_last = loc;
        peak_last = peak;
    }
}

/// Dense `3600 x F` harmonic integration matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralMatrix {
    values: Array2<f64>,
    bin_hz: f64,
    csr: Option<CsrMatrix>,
}

impl IntegralMatrix {
    pub fn build(bins: usize, bin_hz: f64, convention: MatrixConvention) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
        }
        if !(bin_hz.is_finite() && bin_hz > 0.0) {
            return Err(Error::invalid(format!("bin spacing {bin_hz} Hz")));
        }
        let mut values = Array2::zeros((NUM_CANDIDATES, bins));
        for (j, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
            let slice = row.as_slice_mut().expect("standard layout");
            fill_row(slice, MIN_CANDIDATE_DECIHZ + j, bin_hz, convention);
        }
        Ok(Self {
            values,
            bin_hz,
            csr: None,
        })
    }

    /// Wraps imported values (e.g. read back from a matrix file).
    pub fn from_values(values: Array2<f64>, bin_hz: f64) -> Result<Self> {
        if values.nrows() != NUM_CANDIDATES {
            return Err(Error::shape(
                "integral matrix",
                (NUM_CANDIDATES, values.ncols()),
                values.dim(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite integral matrix entry".into()));
        }
        Ok(Self {
            values,
            bin_hz,
            csr: None,
        })
    }

    /// Switches significance evaluation to a compressed-sparse-row copy.
    pub fn compressed(mut self) -> Self {
        self.csr = Some(CsrMatrix::from_dense(&self.values));
        self
    }

    pub fn is_compressed(&self) -> bool {
        self.csr.is_some()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.row(j)
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Builds the matrix with the default [`MatrixConvention::Aligned`] placement.
pub fn build_integral_matrix(bins: usize, bin_hz: f64) -> Result<IntegralMatrix> {
    IntegralMatrix::build(bins, bin_hz, MatrixConvention::Aligned)
}

/// Compressed-sparse-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in m.rows() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c as u32);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self {
            cols: m.ncols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out[j] = sum_c self[j, c] * x[c]`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows());
        for (j, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[j], self.row_ptr[j + 1]);
            let mut acc = 0.0;
            for (&c, &v) in self.col_idx[lo..hi].iter().zip(&self.values[lo..hi]) {
                acc += v * x[c as usize];
            }
            *o = acc;
        }
    }
}

/// Per-frame candidate significances, `T x 3600`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceSpectrum {
    values: Array2<f64>,
}

impl SignificanceSpectrum {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() != NUM_CANDIDATES {
            return Err(Error::shape(
                "significance",
                (values.nrows(), NUM_CANDIDATES),
                values.dim(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite significance".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    /// `max_j Q[t, j]` for every frame.
    pub fn frame_maxima(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// `Q_t = |S_t|^0.5 U^T` for every frame of a (coarse, uncompressed) magnitude.
pub fn significance(coarse_mag: &Array2<f64>, u: &IntegralMatrix) -> Result<SignificanceSpectrum> {
    if coarse_mag.ncols() != u.bins() {
        return Err(Error::shape(
            "significance magnitude",
            (coarse_mag.nrows(), u.bins()),
            coarse_mag.dim(),
        ));
    }
    if coarse_mag.iter().any(|&m| m.is_nan() || m < 0.0) {
        return Err(Error::invalid("magnitudes must be nonnegative"));
    }
    let root = coarse_mag.mapv(f64::sqrt);
    let values = match &u.csr {
        Some(csr) => {
            let mut q = Array2::zeros((root.nrows(), NUM_CANDIDATES));
            for (x, mut out) in root.rows().into_iter().zip(q.rows_mut()) {
                let x = x.to_vec();
                csr.matvec(&x, out.as_slice_mut().expect("standard layout"));
            }
            q
        }
        None => root.dot(&u.values.t()),
    };
    SignificanceSpectrum::new(values)
}

/// Selected pitch for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    pub candidate: Option<usize>,
    pub significance: f64,
}

impl PitchFrame {
    pub fn pitch_hz(&self) -> Option<f64> {
        self.candidate.map(candidate_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PitchTrack {
    pub frames: Vec<PitchFrame>,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn pitches(&self) -> Vec<Option<f64>> {
        self.frames.iter().map(PitchFrame::pitch_hz).collect()
    }

    /// Drops the pitch of every frame whose flag is false.
    pub fn with_voicing(&self, voiced: &[bool]) -> Result<Self> {
        if voiced.len() != self.frames.len() {
            return Err(Error::shape(
                "voicing flags",
                (self.frames.len(), 1),
                (voiced.len(), 1),
            ));
        }
        let frames = self
            .frames
            .iter()
            .zip(voiced)
            .map(|(f, &v)| PitchFrame {
                candidate: if v { f.candidate } else { None },
                significance: f.significance,
            })
            .collect();
        Ok(Self { frames })
    }

    /// CSV with header `frame,time_s,candidate,pitch_hz,significance`.
    /// Frames without a pitch leave `candidate` and `pitch_hz` empty.
    pub fn write_csv<W: Write>(&self, mut w: W, hop_s: f64) -> Result<()> {
        writeln!(w, "frame,time_s,candidate,pitch_hz,significance")?;
        for (t, f) in self.frames.iter().enumerate() {
            let time = t as f64 * hop_s;
            match f.candidate {
                Some(j) => writeln!(
                    w,
                    "{t},{time:.6},{j},{:.1},{}",
                    candidate_hz(j),
                    f.significance
                )?,
                None => writeln!(w, "{t},{time:.6},,,{}", f.significance)?,
            }
        }
        Ok(())
    }
}

/// Per-frame argmax of `Q`; ties go to the lowest candidate index.
pub fn select_pitch(q: &SignificanceSpectrum) -> PitchTrack {
    let frames = q
        .values
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_val = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_val {
                    best = j;
                    best_val = v;
                }
            }
            PitchFrame {
                candidate: Some(best),
                significance: best_val,
            }
        })
        .collect();
    PitchTrack { frames }
}

/// Binary `T x F` template with ones at `round(k * pitch / bin_hz)` for
/// `k = 1 ..= round(8000 / pitch)`; frames without a pitch are all zero.
pub fn harmonic_template(pitches: &[Option<f64>], bins: usize, bin_hz: f64) -> Array2<f64> {
    let mut out = Array2::zeros((pitches.len(), bins));
    for (t, pitch) in pitches.iter().enumerate() {
        let Some(f0) = pitch.filter(|&p| p > 0.0) else {
            continue;
        };
        let harmonics = (HARMONIC_CEILING_HZ / f0).round() as usize;
        for k in 1..=harmonics {
            let bin = (k as f64 * f0 / bin_hz).round() as usize;
            if bin < bins {
                out[[t, bin]] = 1.0;
            }
        }
    }
    out
}

/// Signed alternative to [`harmonic_template`]: the selected candidate's
/// integral-matrix row, zero for frames without a pitch.
pub fn signed_template(track: &PitchTrack, u: &IntegralMatrix) -> Array2<f64> {
    let mut out = Array2::zeros((track.len(), u.bins()));
    for (t, f) in track.frames.iter().enumerate() {
        if let Some(j) = f.candidate {
            out.row_mut(t).assign(&u.row(j));
        }
    }
    out
}
