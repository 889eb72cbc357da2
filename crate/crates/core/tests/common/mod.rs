//! Test-only oracles and signal generators shared by the integration suites.
//!
//! Nothing here calls into the library's numeric code paths; each oracle is a
//! separate transcription so the suites compare two independent routes.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line transcription of the integral-matrix construction, returning
/// a row-major `3600 x bins` vector.
///
/// `literal = true` uses `F`-bins-per-8-kHz index arithmetic: peaks at
/// `[0.1 fc k F / 8000]`, `num = loc - loc_last` interpolation points written
/// to `loc_last + 1 ..= loc`. `literal = false` maps frequency to bins with the
/// actual bin spacing and spans the cosine over `loc_last ..= loc`.
pub fn integral_matrix_oracle(bins: usize, bin_hz: f64, literal: bool) -> Vec<f64> {
    let mut u = vec![0.0f64; 3600 * bins];
    let set = |u: &mut Vec<f64>, j: usize, idx: i64, v: f64| {
        if idx >= 0 && (idx as usize) < bins {
            u[j * bins + idx as usize] = v;
        }
    };
    let get = |u: &Vec<f64>, j: usize, idx: i64| -> f64 {
        if idx >= 0 && (idx as usize) < bins {
            u[j * bins + idx as usize]
        } else {
            0.0
        }
    };
    let mut fc: i64 = 600;
    while fc < 4200 {
        let mut loc_last: i64 = 0;
        let mut peak_last: f64 = 1.0;
        let j = (fc - 600) as usize;
        let kmax = (8000.0 / (0.1 * fc as f64)).round() as i64;
        let mut k: i64 = 1;
        while k <= kmax {
            let loc: i64 = if literal {
                (0.1 * fc as f64 * k as f64 * bins as f64 / 8000.0).round() as i64
            } else {
                (0.1 * fc as f64 * k as f64 / bin_hz).round() as i64
            };
            let peak = 1.0 / (k as f64).sqrt();
            set(&mut u, j, loc, peak);
            if loc - loc_last > 1 {
                let num_iner = if literal {
                    loc - loc_last
                } else {
                    loc - loc_last + 1
                } as usize;
                // numpy-style linspace: start + i * step, last element pinned to stop
                let mut f_cos = vec![0.0; num_iner];
                let mut f_lin = vec![0.0; num_iner];
                let step_c = 2.0 * PI / (num_iner - 1) as f64;
                let step_l = (peak - peak_last) / (num_iner - 1) as f64;
                for i in 0..num_iner {
                    f_cos[i] = (i as f64 * step_c).cos();
                    f_lin[i] = peak_last + i as f64 * step_l;
                }
                f_cos[num_iner - 1] = (2.0 * PI).cos();
                f_lin[num_iner - 1] = peak;
                for i in 1..=num_iner {
                    let idx = if literal {
                        i as i64 + loc_last
                    } else {
                        i as i64 - 1 + loc_last
                    };
                    set(&mut u, j, idx, f_cos[i - 1] * f_lin[i - 1]);
                }
            } else {
                let d = (peak_last + peak) / 2.0;
                let a = get(&u, j, loc) - d;
                set(&mut u, j, loc, a);
                let b = get(&u, j, loc_last) - d;
                set(&mut u, j, loc_last, b);
            }
            loc_last = loc;
            peak_last = peak;
            k += 1;
        }
        fc += 1;
    }
    u
}

/// Equal-amplitude harmonic comb with random phases, every partial below
/// 7.9 kHz, peak amplitude 0.5.
pub fn harmonic_comb(f0: f64, sample_rate: u32, seconds: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sample_rate as f64).round() as usize;
    let count = (7900.0 / f0).floor() as usize;
    let phases: Vec<f64> = (0..count)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let mut x = vec![0.0; n];
    for (h, ph) in phases.iter().enumerate() {
        let w = 2.0 * PI * f0 * (h + 1) as f64 / sample_rate as f64;
        for (i, s) in x.iter_mut().enumerate() {
            *s += (w * i as f64 + ph).cos();
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    x
}

pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Box-Muller keeps this independent of rand_distr
    (0..n)
        .map(|_| {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        })
        .collect()
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds `noise` scaled so the mixture has the requested SNR.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64) -> Vec<f64> {
    let gain = (power(clean) / power(noise) / 10f64.powf(snr_db / 10.0)).sqrt();
    clean.iter().zip(noise).map(|(c, n)| c + gain * n).collect()
}

/// Textbook scale-invariant SNR, written without the library.
pub fn si_snr_oracle(est: &[f64], reference: &[f64]) -> f64 {
    let dot: f64 = est.iter().zip(reference).map(|(a, b)| a * b).sum();
    let ref_energy: f64 = reference.iter().map(|b| b * b).sum();
    let alpha = dot / ref_energy;
    let target: Vec<f64> = reference.iter().map(|b| alpha * b).collect();
    let t_energy: f64 = target.iter().map(|v| v * v).sum();
    let e_energy: f64 = est
        .iter()
        .zip(&target)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    (10.0 * (t_energy / e_energy).log10()).clamp(-60.0, 60.0)
}

/// Writes mono float WAV without going through the library.
pub fn write_float_wav(path: &std::path::Path, samples: &[f64], sample_rate: u32) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s as f32).unwrap();
    }
    w.finalize().unwrap();
}
