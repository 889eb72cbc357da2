//! Short-time Fourier analysis and synthesis, band splitting and magnitude
//! compression.
//!
//! Frames are Hann-windowed (periodic form) and centred: the signal is
//! reflection-padded by half a window on the left so frame `t` is centred on
//! sample `t * hop`. Synthesis is weighted overlap-add normalised by the summed
//! squared window, which reconstructs the input for any hop that keeps that sum
//! positive (the 25 % overlap configurations included).

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{s, Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Bins below this index belong to the wide band when splitting a 48 kHz,
/// 1536-point spectrogram. Bin 256 sits exactly on 8 kHz.
pub const WB_BINS: usize = 257;
/// Bin count of a 48 kHz, 1536-point spectrogram.
pub const FB_BINS: usize = 769;

/// Summed squared window values below this are treated as uncovered.
const WSUM_FLOOR: f64 = 1e-10;

/// Mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// STFT parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub window_ms: f64,
    pub overlap_fraction: f64,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl AnalysisConfig {
    pub fn new(
        window_ms: f64,
        overlap_fraction: f64,
        fft_size: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        let cfg = Self {
            window_ms,
            overlap_fraction,
            fft_size,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 16 kHz, 32 ms Hann, 25 % overlap, 512-point FFT.
    pub fn wideband() -> Self {
        Self {
            window_ms: 32.0,
            overlap_fraction: 0.25,
            fft_size: 512,
            sample_rate: 16_000,
        }
    }

    /// 48 kHz, 32 ms Hann, 25 % overlap, 1536-point FFT.
    pub fn fullband() -> Self {
        Self {
            window_ms: 32.0,
            overlap_fraction: 0.25,
            fft_size: 1536,
            sample_rate: 48_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.window_ms.is_finite() && self.window_ms > 0.0) {
            return Err(Error::invalid("window length must be positive"));
        }
        if !(self.overlap_fraction > 0.0 && self.overlap_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "overlap fraction {} outside (0, 1)",
                self.overlap_fraction
            )));
        }
        let win = self.window_len();
        if win < 2 {
            return Err(Error::invalid("window shorter than two samples"));
        }
        if self.fft_size < win {
            return Err(Error::invalid(format!(
                "fft size {} shorter than the {win}-sample window",
                self.fft_size
            )));
        }
        if self.hop() == 0 {
            return Err(Error::invalid("hop rounds to zero samples"));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        (self.window_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop(&self) -> usize {
        (self.window_len() as f64 * (1.0 - self.overlap_fraction)).round() as usize
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.fft_size as f64
    }

    /// Frame count produced for a signal of `num_samples` samples.
    pub fn frames_for(&self, num_samples: usize) -> usize {
        num_samples.div_ceil(self.hop()) + 1
    }

    /// Periodic Hann window of `window_len` samples.
    pub fn window(&self) -> Vec<f64> {
        hann(self.window_len())
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// T x F complex time-frequency representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    real: Array2<f64>,
    imag: Array2<f64>,
    frame_hop: usize,
    bin_hz: f64,
    num_samples: usize,
}

impl ComplexSpectrogram {
    pub fn new(
        real: Array2<f64>,
        imag: Array2<f64>,
        frame_hop: usize,
        bin_hz: f64,
        num_samples: usize,
    ) -> Result<Self> {
        if real.dim() != imag.dim() {
            return Err(Error::shape("spectrogram parts", real.dim(), imag.dim()));
        }
        if real.iter().chain(imag.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite spectrogram entry".into()));
        }
        Ok(Self {
            real,
            imag,
            frame_hop,
            bin_hz,
            num_samples,
        })
    }

    pub fn zeros(frames: usize, bins: usize, frame_hop: usize, bin_hz: f64) -> Self {
        Self {
            real: Array2::zeros((frames, bins)),
            imag: Array2::zeros((frames, bins)),
            frame_hop,
            bin_hz,
            num_samples: frames.saturating_sub(1) * frame_hop,
        }
    }

    pub fn real(&self) -> &Array2<f64> {
        &self.real
    }

    pub fn imag(&self) -> &Array2<f64> {
        &self.imag
    }

    pub fn frame_hop(&self) -> usize {
        self.frame_hop
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// Length of the signal this spectrogram was computed from.
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn frames(&self) -> usize {
        self.real.nrows()
    }

    pub fn bins(&self) -> usize {
        self.real.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.real.dim()
    }

    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        Complex64::new(self.real[[t, f]], self.imag[[t, f]])
    }

    pub fn magnitude(&self) -> Array2<f64> {
        Zip::from(&self.real)
            .and(&self.imag)
            .map_collect(|&r, &i| r.hypot(i))
    }

    pub fn phase(&self) -> Array2<f64> {
        Zip::from(&self.real)
            .and(&self.imag)
            .map_collect(|&r, &i| wrapped_atan2(i, r))
    }

    /// Same metadata, new values.
    pub(crate) fn with_parts(&self, real: Array2<f64>, imag: Array2<f64>) -> Self {
        debug_assert_eq!(real.dim(), self.dim());
        Self {
            real,
            imag,
            frame_hop: self.frame_hop,
            bin_hz: self.bin_hz,
            num_samples: self.num_samples,
        }
    }

    /// Multiplies every element by a real, per-element gain.
    pub fn scale(&self, gain: &Array2<f64>) -> Result<Self> {
        if gain.dim() != self.dim() {
            return Err(Error::shape("gain", self.dim(), gain.dim()));
        }
        let real = &self.real * gain;
        let imag = &self.imag * gain;
        Ok(self.with_parts(real, imag))
    }

    /// Flattened `[re, im, re, im, ...]` view used by the projection metrics.
    pub fn interleaved(&self) -> Vec<f64> {
        self.real
            .iter()
            .zip(self.imag.iter())
            .flat_map(|(&r, &i)| [r, i])
            .collect()
    }
}

/// Phase in (-pi, pi]; the zero element maps to 0.
pub fn wrapped_atan2(im: f64, re: f64) -> f64 {
    let p = im.atan2(re);
    if p <= -PI {
        p + 2.0 * PI
    } else if p == 0.0 {
        0.0
    } else {
        p
    }
}

/// Magnitude/phase decomposition of a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MagPhase {
    pub magnitude: Array2<f64>,
    pub phase: Array2<f64>,
    frame_hop: usize,
    bin_hz: f64,
    num_samples: usize,
}

pub fn mag_phase(spec: &ComplexSpectrogram) -> MagPhase {
    MagPhase {
        magnitude: spec.magnitude(),
        phase: spec.phase(),
        frame_hop: spec.frame_hop,
        bin_hz: spec.bin_hz,
        num_samples: spec.num_samples,
    }
}

pub fn polar(mp: &MagPhase) -> Result<ComplexSpectrogram> {
    if mp.magnitude.dim() != mp.phase.dim() {
        return Err(Error::shape(
            "magnitude/phase",
            mp.magnitude.dim(),
            mp.phase.dim(),
        ));
    }
    if mp.magnitude.iter().any(|&m| m < 0.0) {
        return Err(Error::invalid("negative magnitude"));
    }
    let real = Zip::from(&mp.magnitude)
        .and(&mp.phase)
        .map_collect(|&m, &p| m * p.cos());
    let imag = Zip::from(&mp.magnitude)
        .and(&mp.phase)
        .map_collect(|&m, &p| m * p.sin());
    ComplexSpectrogram::new(real, imag, mp.frame_hop, mp.bin_hz, mp.num_samples)
}

/// Index into a reflected (mirror, edge not repeated) extension of a signal.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m >= len as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

pub fn stft(audio: &AudioBuffer, cfg: &AnalysisConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if audio.is_empty() {
        return Err(Error::Empty("audio buffer"));
    }
    if audio.sample_rate() != cfg.sample_rate {
        return Err(Error::SampleRate {
            expected: cfg.sample_rate,
            actual: audio.sample_rate(),
        });
    }
    let x = audio.samples();
    let n_fft = cfg.fft_size;
    let win = cfg.window();
    let hop = cfg.hop();
    let left = (win.len() / 2) as isize;
    let frames = cfg.frames_for(x.len());
    let bins = cfg.bins();

    let plans = Plans::new(n_fft);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut real = Array2::zeros((frames, bins));
    let mut imag = Array2::zeros((frames, bins));
    for t in 0..frames {
        let start = (t * hop) as isize - left;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (n, (&w, c)) in win.iter().zip(buf.iter_mut()).enumerate() {
            let idx = reflect_index(start + n as isize, x.len());
            *c = Complex64::new(x[idx] * w, 0.0);
        }
        plans.forward.process(&mut buf);
        for (f, c) in buf[..bins].iter().enumerate() {
            real[[t, f]] = c.re;
            imag[[t, f]] = c.im;
        }
    }
    ComplexSpectrogram::new(real, imag, hop, cfg.bin_hz(), x.len())
}

pub fn istft(spec: &ComplexSpectrogram, cfg: &AnalysisConfig) -> Result<AudioBuffer> {
    cfg.validate()?;
    let bins = cfg.bins();
    if spec.bins() != bins {
        return Err(Error::shape(
            "istft bins",
            (spec.frames(), bins),
            spec.dim(),
        ));
    }
    let n_fft = cfg.fft_size;
    let win = cfg.window();
    let hop = cfg.hop();
    let left = win.len() / 2;
    let frames = spec.frames();
    let padded = if frames == 0 {
        0
    } else {
        (frames - 1) * hop + win.len()
    };
    let plans = Plans::new(n_fft);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut acc = vec![0.0; padded];
    let mut wsum = vec![0.0; padded];
    let scale = 1.0 / n_fft as f64;
    for t in 0..frames {
        // Hermitian completion; DC and Nyquist imaginary parts are discarded
        // by taking the real part of the inverse transform.
        for f in 0..bins {
            buf[f] = spec.get(t, f);
        }
        for f in bins..n_fft {
            buf[f] = buf[n_fft - f].conj();
        }
        plans.inverse.process(&mut buf);
        let start = t * hop;
        for (n, &w) in win.iter().enumerate() {
            acc[start + n] += buf[n].re * scale * w;
            wsum[start + n] += w * w;
        }
    }
    let samples = (0..spec.num_samples())
        .map(|n| {
            let p = n + left;
            match (acc.get(p), wsum.get(p)) {
                (Some(&a), Some(&w)) if w > WSUM_FLOOR => a / w,
                _ => 0.0,
            }
        })
        .collect();
    AudioBuffer::new(samples, cfg.sample_rate)
}

/// Splits a 769-bin full-band spectrogram into wide band (0..8 kHz, 257
/// bins) and high band (the remaining 512 bins).
pub fn split_bands(full: &ComplexSpectrogram) -> Result<(ComplexSpectrogram, ComplexSpectrogram)> {
    if full.bins() != FB_BINS {
        return Err(Error::shape(
            "split_bands",
            (full.frames(), FB_BINS),
            full.dim(),
        ));
    }
    let part = |range: std::ops::Range<usize>| ComplexSpectrogram {
        real: full.real.slice(s![.., range.clone()]).to_owned(),
        imag: full.imag.slice(s![.., range]).to_owned(),
        frame_hop: full.frame_hop,
        bin_hz: full.bin_hz,
        num_samples: full.num_samples,
    };
    Ok((part(0..WB_BINS), part(WB_BINS..FB_BINS)))
}

pub fn merge_bands(wb: &ComplexSpectrogram, hb: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    if wb.bins() != WB_BINS {
        return Err(Error::shape(
            "merge_bands wb",
            (wb.frames(), WB_BINS),
            wb.dim(),
        ));
    }
    if hb.dim() != (wb.frames(), FB_BINS - WB_BINS) {
        return Err(Error::shape(
            "merge_bands hb",
            (wb.frames(), FB_BINS - WB_BINS),
            hb.dim(),
        ));
    }
    let cat = |a: &Array2<f64>, b: &Array2<f64>| {
        ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("shapes checked above")
    };
    Ok(ComplexSpectrogram {
        real: cat(&wb.real, &hb.real),
        imag: cat(&wb.imag, &hb.imag),
        frame_hop: wb.frame_hop,
        bin_hz: wb.bin_hz,
        num_samples: wb.num_samples,
    })
}

/// Raises magnitudes to `exponent`, keeping phase.
pub fn compress_power(spec: &ComplexSpectrogram, exponent: f64) -> Result<ComplexSpectrogram> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::invalid(format!(
            "compression exponent {exponent} outside (0, 1]"
        )));
    }
    let gain = spec
        .magnitude()
        .mapv(|m| if m > 0.0 { m.powf(exponent - 1.0) } else { 0.0 });
    spec.scale(&gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_rms(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    fn noise(n: usize, sr: u32, seed: u64) -> AudioBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioBuffer::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), sr).unwrap()
    }

    fn tone(freq: f64, sr: u32, n: usize) -> AudioBuffer {
        let samples = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioBuffer::new(samples, sr).unwrap()
    }

    /// Direct O(N^2) DFT of one windowed frame.
    fn dft_mag(frame: &[f64], bins: usize) -> Vec<f64> {
        let n = frame.len();
        (0..bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    #[test]
    fn config_geometry() {
        let wb = AnalysisConfig::wideband();
        assert_eq!((wb.window_len(), wb.hop(), wb.bins()), (512, 384, 257));
        assert_eq!(wb.bin_hz(), 31.25);
        let fb = AnalysisConfig::fullband();
        assert_eq!((fb.window_len(), fb.hop(), fb.bins()), (1536, 1152, 769));
        assert!(AnalysisConfig::new(32.0, 1.0, 512, 16_000).is_err());
        assert!(AnalysisConfig::new(32.0, 0.25, 256, 16_000).is_err());
    }

    #[test]
    fn zero_audio_gives_zero_spectrum() {
        let audio = AudioBuffer::new(vec![0.0; 16_000], 16_000).unwrap();
        let spec = stft(&audio, &AnalysisConfig::wideband()).unwrap();
        assert!(spec
            .real()
            .iter()
            .chain(spec.imag().iter())
            .all(|&v| v == 0.0));
        let back = istft(&spec, &AnalysisConfig::wideband()).unwrap();
        assert!(back.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stft_errors() {
        let cfg = AnalysisConfig::wideband();
        let empty = AudioBuffer::new(vec![], 16_000).unwrap();
        assert!(matches!(stft(&empty, &cfg), Err(Error::Empty(_))));
        let wrong = AudioBuffer::new(vec![0.0; 10], 48_000).unwrap();
        assert!(matches!(stft(&wrong, &cfg), Err(Error::SampleRate { .. })));
        assert!(AudioBuffer::new(vec![f64::NAN], 16_000).is_err());
    }

    #[test]
    fn tone_peaks_at_bin_32_and_matches_direct_dft() {
        let cfg = AnalysisConfig::wideband();
        let audio = tone(1000.0, 16_000, 16_000);
        let spec = stft(&audio, &cfg).unwrap();
        let mag = spec.magnitude();
        let frames = mag.nrows();
        // edge frames see the reflected extension, not the tone
        for row in mag.slice(s![1..frames - 1, ..]).rows() {
            let argmax = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::MIN),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                )
                .0;
            assert_eq!(argmax, 32);
        }
        // frame 5 starts at 5 * 384 - 256 in signal coordinates, fully interior
        let start = 5 * 384 - 256;
        let w = cfg.window();
        let frame: Vec<f64> = (0..512)
            .map(|n| audio.samples()[start + n] * w[n])
            .collect();
        let oracle = dft_mag(&frame, 257);
        for (f, o) in oracle.iter().enumerate() {
            assert!((mag[[5, f]] - o).abs() < 1e-9, "bin {f}");
        }
    }

    #[test]
    fn tone_energy_concentrates_near_true_bin() {
        let cfg = AnalysisConfig::wideband();
        for bin in [20usize, 32, 100, 200] {
            let audio = tone(bin as f64 * 31.25, 16_000, 16_000);
            let mag = stft(&audio, &cfg).unwrap().magnitude();
            for row in mag.rows().into_iter().skip(1).take(30) {
                let total: f64 = row.iter().map(|m| m * m).sum();
                let near: f64 = row.slice(s![bin - 1..=bin + 1]).iter().map(|m| m * m).sum();
                assert!(near / total >= 0.95);
            }
        }
    }

    #[test]
    fn round_trip_interior() {
        for (cfg, seed) in [
            (AnalysisConfig::wideband(), 1),
            (AnalysisConfig::fullband(), 2),
        ] {
            let audio = noise(cfg.sample_rate as usize, cfg.sample_rate, seed);
            let back = istft(&stft(&audio, &cfg).unwrap(), &cfg).unwrap();
            assert_eq!(back.len(), audio.len());
            let w = cfg.window_len();
            let n = audio.len();
            let err = rel_rms(&back.samples()[w..n - w], &audio.samples()[w..n - w]);
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn round_trip_short_signal() {
        let cfg = AnalysisConfig::wideband();
        let audio = noise(100, 16_000, 3);
        let back = istft(&stft(&audio, &cfg).unwrap(), &cfg).unwrap();
        assert!(rel_rms(back.samples(), audio.samples()) < 1e-9);
    }

    #[test]
    fn single_frame_istft_matches_inverse_dft() {
        let cfg = AnalysisConfig::wideband();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 512;
        let mut re = Array2::zeros((1, 257));
        let mut im = Array2::zeros((1, 257));
        for f in 0..257 {
            re[[0, f]] = rng.random_range(-1.0..1.0);
            if f != 0 && f != 256 {
                im[[0, f]] = rng.random_range(-1.0..1.0);
            }
        }
        // Unit impulse at n = 256 is (-1)^k; add it so the frame centre is large.
        for f in 0..257 {
            re[[0, f]] += if f % 2 == 0 { 1.0 } else { -1.0 };
        }
        let spec = ComplexSpectrogram::new(re.clone(), im.clone(), 384, 31.25, 256).unwrap();
        let out = istft(&spec, &cfg).unwrap();
        assert_eq!(out.len(), 256);
        let w = cfg.window();
        for (i, &y) in out.samples().iter().enumerate() {
            let p = i + 256;
            // direct inverse real DFT
            let mut x = re[[0, 0]] + re[[0, 256]] * if p % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..256 {
                let a = 2.0 * PI * (k * p) as f64 / n as f64;
                x += 2.0 * (re[[0, k]] * a.cos() - im[[0, k]] * a.sin());
            }
            x /= n as f64;
            let expected = x * w[p] / (w[p] * w[p]);
            assert!((y - expected).abs() < 1e-9 * expected.abs().max(1.0), "{i}");
        }
    }

    #[test]
    fn split_merge_partition() {
        let cfg = AnalysisConfig::fullband();
        let audio = tone(12_000.0, 48_000, 9600);
        let full = stft(&audio, &cfg).unwrap();
        let (wb, hb) = split_bands(&full).unwrap();
        assert_eq!((wb.bins(), hb.bins()), (257, 512));
        assert_eq!(merge_bands(&wb, &hb).unwrap(), full);
        let t = full.frames();
        let energy = |x: &ComplexSpectrogram| -> f64 {
            x.magnitude()
                .slice(s![1..t - 1, ..])
                .iter()
                .map(|m| m * m)
                .sum()
        };
        let (wb_energy, hb_energy) = (energy(&wb), energy(&hb));
        assert!(wb_energy < 1e-12 * hb_energy);
        assert!(
            split_bands(&stft(&noise(1000, 16_000, 1), &AnalysisConfig::wideband()).unwrap())
                .is_err()
        );
        assert!(merge_bands(&hb, &wb).is_err());
    }

    #[test]
    fn compress_power_cases() {
        let spec = ComplexSpectrogram::new(
            Array2::from_elem((1, 1), 0.0),
            Array2::from_elem((1, 1), 4.0),
            1,
            1.0,
            0,
        )
        .unwrap();
        let out = compress_power(&spec, 0.5).unwrap();
        assert!((out.imag()[[0, 0]] - 2.0).abs() < 1e-15);
        assert_eq!(out.real()[[0, 0]], 0.0);
        assert_eq!(compress_power(&spec, 1.0).unwrap(), spec);
        assert!(compress_power(&spec, 0.0).is_err());
        assert!(compress_power(&spec, -1.0).is_err());
    }

    #[test]
    fn mag_phase_basics() {
        let spec = ComplexSpectrogram::new(
            Array2::from_shape_vec((1, 4), vec![1.0, 0.0, 0.0, -1.0]).unwrap(),
            Array2::from_shape_vec((1, 4), vec![0.0, 1.0, 0.0, -0.0]).unwrap(),
            1,
            1.0,
            0,
        )
        .unwrap();
        let mp = mag_phase(&spec);
        assert_eq!(mp.magnitude.row(0).to_vec(), vec![1.0, 1.0, 0.0, 1.0]);
        assert_eq!(mp.phase[[0, 0]], 0.0);
        assert!((mp.phase[[0, 1]] - PI / 2.0).abs() < 1e-15);
        assert_eq!(mp.phase[[0, 2]], 0.0);
        assert_eq!(mp.phase[[0, 3]], PI);
    }

    #[test]
    fn reflect_index_mirrors() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-7, 1), 0);
    }
}
