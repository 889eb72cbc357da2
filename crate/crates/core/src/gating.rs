//! Voiced-region detection, speech-energy labels and harmonic gate
//! composition.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::harmonic::SignificanceSpectrum;

pub const DEFAULT_VRD_ALPHA: f64 = 0.4;
/// Magnitudes are floored here before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-8;
const XI_DECAY: f64 = 0.9;

/// Moving-average threshold state threaded through successive utterances.
///
/// `xi` is `None` until the first utterance has been seen; that utterance
/// seeds it with its own mean of per-frame maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrdState {
    xi: Option<f64>,
    alpha: f64,
}

impl Default for VrdState {
    fn default() -> Self {
        Self {
            xi: None,
            alpha: DEFAULT_VRD_ALPHA,
        }
    }
}

impl VrdState {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::check_alpha(alpha)?;
        Ok(Self { xi: None, alpha })
    }

    pub fn with_xi(xi: f64, alpha: f64) -> Result<Self> {
        Self::check_alpha(alpha)?;
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::invalid(format!("xi {xi} must be finite and >= 0")));
        }
        Ok(Self {
            xi: Some(xi),
            alpha,
        })
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("vrd alpha {alpha} outside (0, 1]")))
        }
    }

    pub fn xi(&self) -> Option<f64> {
        self.xi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Loads `xi=<value|none>` / `alpha=<value>` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse().map_err(|e: Error| Error::Config {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    /// Atomic replace, so concurrent readers never see a partial file.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_string().as_bytes())?;
        Ok(())
    }
}

impl fmt::Display for VrdState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.xi {
            Some(xi) => writeln!(f, "xi={xi}")?,
            None => writeln!(f, "xi=none")?,
        }
        writeln!(f, "alpha={}", self.alpha)
    }
}

impl FromStr for VrdState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut xi = None;
        let mut alpha = None;
        for line in s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got {line:?}")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number {v:?}")))
            };
            match key.trim() {
                "xi" if value.trim() == "none" => xi = Some(None),
                "xi" => xi = Some(Some(parse(value)?)),
                "alpha" => alpha = Some(parse(value)?),
                other => return Err(Error::invalid(format!("unknown key {other:?}"))),
            }
        }
        let alpha = alpha.ok_or_else(|| Error::invalid("missing alpha"))?;
        match xi.ok_or_else(|| Error::invalid("missing xi"))? {
            Some(v) => Self::with_xi(v, alpha),
            None => Self::new(alpha),
        }
    }
}

/// Per-frame voiced flags: `max(Q_t) > alpha * xi_old`.
///
/// The threshold uses `xi` from before this utterance; the returned state
/// carries `0.9 * xi_old + 0.1 * mean_t max(Q_t)`.
pub fn vrd(q: &SignificanceSpectrum, state: &VrdState) -> (Vec<bool>, VrdState) {
    let maxima = q.frame_maxima();
    if maxima.is_empty() {
        return (Vec::new(), *state);
    }
    let mean = maxima.iter().sum::<f64>() / maxima.len() as f64;
    let xi_old = state.xi.unwrap_or(mean);
    let threshold = state.alpha * xi_old;
    let flags = maxima.iter().map(|&m| m > threshold).collect();
    let xi_new = XI_DECAY * xi_old + (1.0 - XI_DECAY) * mean;
    (
        flags,
        VrdState {
            xi: Some(xi_new.max(0.0)),
            alpha: state.alpha,
        },
    )
}

/// Binary `T x F` speech-energy labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLabels {
    values: Array2<f64>,
}

impl EnergyLabels {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("energy labels must be 0 or 1"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// Label is 1 where the log magnitude strictly exceeds its bin's mean over
/// time.
pub fn sed_labels(clean_mag: &Array2<f64>) -> Result<EnergyLabels> {
    let (frames, bins) = clean_mag.dim();
    if frames == 0 || bins == 0 {
        return Err(Error::Empty("magnitude for energy labels"));
    }
    let logs = clean_mag.mapv(|m| m.max(LOG_FLOOR).ln());
    let mut labels = Array2::zeros((frames, bins));
    for (col, mut out) in logs.columns().into_iter().zip(labels.columns_mut()) {
        // shifted mean: exact for constant columns
        let base = col[0];
        let mean = base + col.iter().map(|&v| v - base).sum::<f64>() / frames as f64;
        Zip::from(&mut out).and(&col).for_each(|o, &v| {
            *o = if v > mean { 1.0 } else { 0.0 };
        });
    }
    EnergyLabels::new(labels)
}

/// Energy labels computed from the clean reference, standing in for a
/// trained speech-energy detector. Requires access to the clean signal.
pub fn oracle_sed(clean_mag: &Array2<f64>) -> Result<EnergyLabels> {
    sed_labels(clean_mag)
}

/// `T x F` gate with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    values: Array2<f64>,
}

impl GateMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("gate entries must lie in [0, 1]"));
        }
        Ok(Self { values })
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::zeros((frames, bins)),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// `G = R_VRD * R_A * R_H` with the voiced flags broadcast over frequency.
pub fn compose_gate(
    vrd_flags: &[bool],
    energy: &EnergyLabels,
    template: &Array2<f64>,
) -> Result<GateMatrix> {
    let dim = template.dim();
    if energy.values.dim() != dim {
        return Err(Error::shape("energy labels", dim, energy.values.dim()));
    }
    if vrd_flags.len() != dim.0 {
        return Err(Error::shape("vrd flags", (dim.0, 1), (vrd_flags.len(), 1)));
    }
    let mut g = &energy.values * template;
    for (mut row, &voiced) in g.rows_mut().into_iter().zip(vrd_flags) {
        if !voiced {
            row.fill(0.0);
        }
    }
    GateMatrix::new(g)
}

/// One weight of a causal stencil: reads `lag` frames into the past and
/// `df` bins away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub lag: i64,
    pub df: i64,
    pub weight: f64,
}

/// Fixed 2-D causal stencil applied to the gate before compensation.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalKernel {
    taps: Vec<Tap>,
}

impl Default for CausalKernel {
    fn default() -> Self {
        Self::identity()
    }
}

impl CausalKernel {
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("kernel has no taps"));
        }
        for tap in &taps {
            if tap.lag < 0 {
                return Err(Error::invalid(format!(
                    "kernel tap at lag {} reads future frames",
                    tap.lag
                )));
            }
            if !(tap.weight.is_finite() && tap.weight >= 0.0) {
                return Err(Error::invalid(format!("kernel weight {}", tap.weight)));
            }
        }
        Ok(Self { taps })
    }

    pub fn identity() -> Self {
        Self {
            taps: vec![Tap {
                lag: 0,
                df: 0,
                weight: 1.0,
            }],
        }
    }

    /// Current-frame box filter over `2 * half_width + 1` bins.
    pub fn frequency_box(half_width: i64) -> Self {
        let n = (2 * half_width + 1) as f64;
        Self {
            taps: (-half_width..=half_width)
                .map(|df| Tap {
                    lag: 0,
                    df,
                    weight: 1.0 / n,
                })
                .collect(),
        }
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn is_identity(&self) -> bool {
        self.taps.len() == 1 && self.taps[0] == Self::identity().taps[0]
    }
}

/// Text form: whitespace- or comma-separated `lag:df:weight` triples, or
/// `identity`.
impl FromStr for CausalKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Self::identity());
        }
        let taps = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                let parts: Vec<&str> = t.split(':').collect();
                let [lag, df, w] = parts[..] else {
                    return Err(Error::invalid(format!(
                        "kernel tap {t:?} is not lag:df:weight"
                    )));
                };
                let bad = || Error::invalid(format!("kernel tap {t:?}"));
                Ok(Tap {
                    lag: lag.parse().map_err(|_| bad())?,
                    df: df.parse().map_err(|_| bad())?,
                    weight: w.parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(taps)
    }
}

impl fmt::Display for CausalKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .taps
            .iter()
            .map(|t| format!("{}:{}:{}", t.lag, t.df, t.weight))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Causal 2-D correlation of the gate with `kernel`, clamped to `[0, 1]`.
/// Taps that fall outside the matrix contribute nothing.
pub fn smooth_gate(gate: &GateMatrix, kernel: &CausalKernel) -> GateMatrix {
    if kernel.is_identity() {
        return gate.clone();
    }
    let (frames, bins) = gate.dim();
    let g = &gate.values;
    let out = Array2::from_shape_fn((frames, bins), |(t, f)| {
        let acc: f64 = kernel
            .taps
            .iter()
            .filter_map(|tap| {
                let tt = t as i64 - tap.lag;
                let ff = f as i64 + tap.df;
                (tt >= 0 && ff >= 0 && (ff as usize) < bins)
                    .then(|| tap.weight * g[[tt as usize, ff as usize]])
            })
            .sum();
        acc.clamp(0.0, 1.0)
    });
    GateMatrix { values: out }
}
