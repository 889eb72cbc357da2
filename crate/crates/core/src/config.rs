//! Pipeline configuration: `key=value` lines, `#` comments.
//!
//! ```text
//! band = wb               # wb | fb
//! window_ms = 32
//! overlap = 0.25
//! fft_size = 512          # defaults to the band preset
//! vrd_alpha = 0.4
//! gate_kernel = identity  # or lag:df:weight,...
//! gamma = 0.5             # constant, or a path to per-bin exponents
//! mask = oracle           # oracle | constant:<logit> | file:<dir>
//! energy = reference      # reference | coarse
//! template = binary       # binary | signed
//! matrix_convention = aligned
//! matrix_layout = dense   # dense | csr
//! compensation = on
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gating::{CausalKernel, DEFAULT_VRD_ALPHA};
use crate::harmonic::MatrixConvention;
use crate::masking::MaskSpec;
use crate::metrics::{LoudnessExponent, DEFAULT_GAMMA};
use crate::spectral::AnalysisConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandMode {
    #[default]
    Wb,
    Fb,
}

impl BandMode {
    pub fn preset(self) -> AnalysisConfig {
        match self {
            BandMode::Wb => AnalysisConfig::wideband(),
            BandMode::Fb => AnalysisConfig::fullband(),
        }
    }
}

impl FromStr for BandMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wb" => Ok(BandMode::Wb),
            "fb" => Ok(BandMode::Fb),
            other => Err(Error::invalid(format!(
                "unknown band {other:?}, expected wb or fb"
            ))),
        }
    }
}

impl fmt::Display for BandMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandMode::Wb => "wb",
            BandMode::Fb => "fb",
        })
    }
}

/// Where the energy gate `R_A` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergySource {
    /// Labels of the clean reference (the analysed signal itself in `analyze`).
    #[default]
    Reference,
    /// Labels of the coarse estimate.
    Coarse,
}

impl FromStr for EnergySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reference" | "oracle" => Ok(EnergySource::Reference),
            "coarse" => Ok(EnergySource::Coarse),
            other => Err(Error::invalid(format!(
                "unknown energy source {other:?}, expected reference or coarse"
            ))),
        }
    }
}

impl fmt::Display for EnergySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergySource::Reference => "reference",
            EnergySource::Coarse => "coarse",
        })
    }
}

/// Harmonic gate factor: binary peaks or the positive part of the selected
/// integral-matrix row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateMode {
    #[default]
    Binary,
    Signed,
}

impl FromStr for TemplateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "binary" => Ok(TemplateMode::Binary),
            "signed" => Ok(TemplateMode::Signed),
            other => Err(Error::invalid(format!(
                "unknown template {other:?}, expected binary or signed"
            ))),
        }
    }
}

impl fmt::Display for TemplateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateMode::Binary => "binary",
            TemplateMode::Signed => "signed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaSpec {
    Constant(f64),
    File(PathBuf),
}

impl GammaSpec {
    pub fn resolve(&self, bins: usize) -> Result<LoudnessExponent> {
        let gamma = match self {
            GammaSpec::Constant(g) => LoudnessExponent::constant(bins, *g)?,
            GammaSpec::File(path) => LoudnessExponent::load(path)?,
        };
        if gamma.len() != bins {
            return Err(Error::shape(
                "loudness exponents",
                (bins, 1),
                (gamma.len(), 1),
            ));
        }
        Ok(gamma)
    }
}

impl FromStr for GammaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.parse::<f64>() {
            Ok(g) if g > 0.0 && g <= 1.0 => Ok(GammaSpec::Constant(g)),
            Ok(g) => Err(Error::invalid(format!("gamma {g} outside (0, 1]"))),
            Err(_) if s.is_empty() => Err(Error::invalid("empty gamma")),
            Err(_) => Ok(GammaSpec::File(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Constant(g) => write!(f, "{g}"),
            GammaSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixLayout {
    #[default]
    Dense,
    Csr,
}

impl FromStr for MatrixLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dense" => Ok(MatrixLayout::Dense),
            "csr" => Ok(MatrixLayout::Csr),
            other => Err(Error::invalid(format!(
                "unknown matrix layout {other:?}, expected dense or csr"
            ))),
        }
    }
}

impl fmt::Display for MatrixLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixLayout::Dense => "dense",
            MatrixLayout::Csr => "csr",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub band: BandMode,
    pub window_ms: Option<f64>,
    pub overlap: Option<f64>,
    pub fft_size: Option<usize>,
    pub vrd_alpha: f64,
    pub gate_kernel: CausalKernel,
    pub gamma: GammaSpec,
    pub mask: MaskSpec,
    pub energy: EnergySource,
    pub template: TemplateMode,
    pub matrix_convention: MatrixConvention,
    pub matrix_layout: MatrixLayout,
    pub compensation: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            band: BandMode::Wb,
            window_ms: None,
            overlap: None,
            fft_size: None,
            vrd_alpha: DEFAULT_VRD_ALPHA,
            gate_kernel: CausalKernel::identity(),
            gamma: GammaSpec::Constant(DEFAULT_GAMMA),
            mask: MaskSpec::Oracle,
            energy: EnergySource::Reference,
            template: TemplateMode::Binary,
            matrix_convention: MatrixConvention::Aligned,
            matrix_layout: MatrixLayout::Dense,
            compensation: true,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(Error::invalid(format!("expected on or off, got {other:?}"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {v:?}")))
}

impl PipelineConfig {
    /// Band preset with any explicit overrides, validated.
    pub fn analysis(&self) -> Result<AnalysisConfig> {
        let mut cfg = self.band.preset();
        if let Some(w) = self.window_ms {
            cfg.window_ms = w;
        }
        if let Some(o) = self.overlap {
            cfg.overlap_fraction = o;
        }
        if let Some(n) = self.fft_size {
            cfg.fft_size = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "band" => self.band = v.parse()?,
            "window_ms" => self.window_ms = Some(parse_num(key, v)?),
            "overlap" => self.overlap = Some(parse_num(key, v)?),
            "fft_size" => self.fft_size = Some(parse_num(key, v)?),
            "vrd_alpha" => {
                let a: f64 = parse_num(key, v)?;
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::invalid(format!("vrd_alpha {a} outside (0, 1]")));
                }
                self.vrd_alpha = a;
            }
            "gate_kernel" => self.gate_kernel = v.parse()?,
            "gamma" => self.gamma = v.parse()?,
            "mask" => self.mask = v.parse()?,
            "energy" => self.energy = v.parse()?,
            "template" => self.template = v.parse()?,
            "matrix_convention" => self.matrix_convention = v.parse()?,
            "matrix_layout" => self.matrix_layout = v.parse()?,
            "compensation" => self.compensation = parse_bool(v)?,
            other => return Err(Error::invalid(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses config text; relative `gamma` and `file:` mask paths resolve
    /// against `base`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| Error::Config {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key=value, got {line:?}")))?;
            cfg.set(key, value).map_err(|e| at(e.to_string()))?;
        }
        if let GammaSpec::File(p) = &cfg.gamma {
            cfg.gamma = GammaSpec::File(base.join(p));
        }
        if let MaskSpec::File(p) = &cfg.mask {
            cfg.mask = MaskSpec::File(base.join(p));
        }
        cfg.analysis().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    /// One `key=value` line per field with resolved analysis values, in a
    /// fixed order.
    pub fn canonical(&self) -> Result<String> {
        let a = self.analysis()?;
        Ok(format!(
            "band={}\nwindow_ms={}\noverlap={}\nfft_size={}\nsample_rate={}\n\
             vrd_alpha={}\ngate_kernel={}\ngamma={}\nmask={}\nenergy={}\n\
             template={}\nmatrix_convention={}\nmatrix_layout={}\ncompensation={}\n",
            self.band,
            a.window_ms,
            a.overlap_fraction,
            a.fft_size,
            a.sample_rate,
            self.vrd_alpha,
            self.gate_kernel,
            self.gamma,
            self.mask,
            self.energy,
            self.template,
            self.matrix_convention,
            self.matrix_layout,
            if self.compensation { "on" } else { "off" },
        ))
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
