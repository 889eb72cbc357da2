mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use harmonia::config::PipelineConfig;
use harmonia::io::read_matrix;
use harmonia::metrics::{apc_snr, hb_loss, si_snr, LoudnessExponent};
use harmonia::pipeline::load_matrix;
use harmonia::spectral::{split_bands, stft, AnalysisConfig, AudioBuffer};

fn harmonia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmonia"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {out}"))
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_silence_is_unvoiced() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("silence.wav");
    common::write_float_wav(&wav, &vec![0.0; 16_000], 16_000);
    let out = dir.path().join("out");
    let o = harmonia(&["analyze", s(&wav), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("pitch.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("frame,time_s,candidate,pitch_hz,significance")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), AnalysisConfig::wideband().frames_for(16_000));
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!((cols[2], cols[3]), ("", ""), "{row}");
    }
    let gates = read_matrix(&out.join("gates.bin")).unwrap();
    assert!(gates.iter().all(|&g| g == 0.0));
}

#[test]
fn analyze_comb_tracks_pitch_and_lists_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("comb.wav");
    common::write_float_wav(&wav, &common::harmonic_comb(200.0, 16_000, 1.0, 1), 16_000);
    let out = dir.path().join("out");
    let state = dir.path().join("vrd.txt");
    let o = harmonia(&[
        "analyze",
        s(&wav),
        "--out",
        s(&out),
        "--vrd-state",
        s(&state),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("pitch.csv")).unwrap();
    let pitches: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(3).filter(|v| !v.is_empty()))
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(pitches.len() > 30);
    let near = pitches.iter().filter(|p| (*p - 200.0).abs() <= 1.0).count();
    assert!(near as f64 >= 0.95 * pitches.len() as f64);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let listed: BTreeSet<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .filter(|p| p != s(&state))
        .collect();
    let on_disk: BTreeSet<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        PipelineConfig::default().hash().unwrap()
    );

    let text = std::fs::read_to_string(&state).unwrap();
    assert!(text.starts_with("xi=") && !text.contains("none"), "{text}");
    let again = harmonia(&[
        "analyze",
        s(&wav),
        "--out",
        s(&out),
        "--vrd-state",
        s(&state),
    ]);
    assert!(again.status.success());
}

#[test]
fn config_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("comb.wav");
    common::write_float_wav(&wav, &common::harmonic_comb(150.0, 16_000, 0.5, 2), 16_000);
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# tighter detector\nvrd_alpha = 0.6\n").unwrap();
    let hash = |args: &[&str]| {
        let out = dir.path().join("o");
        let mut all = vec!["analyze", s(&wav), "--out", s(&out)];
        all.extend_from_slice(args);
        assert!(harmonia(&all).status.success());
        let m: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash(&[]);
    assert_eq!(base, hash(&[]));
    assert_ne!(base, hash(&["--config", s(&conf)]));
    assert_ne!(base, hash(&["--mask", "constant:1"]));
}

#[test]
fn matrix_command_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("u1.bin");
    let b = dir.path().join("u2.bin");
    let o = harmonia(&["matrix", "--out", s(&a)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("shape=3600x257"), "{text}");
    assert!(harmonia(&["matrix", "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let u = load_matrix(&a, 31.25).unwrap();
    let built = harmonia::harmonic::build_integral_matrix(257, 31.25).unwrap();
    assert_eq!(u.values().dim(), (3600, 257));
    let max_err = u
        .values()
        .iter()
        .zip(built.values())
        .map(|(x, y)| (x - *y as f32 as f64).abs())
        .fold(0.0, f64::max);
    assert_eq!(max_err, 0.0);
    assert_eq!(value(&text, "nonzero") as usize, built.nonzero_count());

    let o = harmonia(&["matrix", "--out", s(&a), "--bins", "129"]);
    assert!(stdout(&o).contains("shape=3600x129"));
}

#[test]
fn metrics_identities_and_module_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let r = common::harmonic_comb(220.0, 16_000, 0.5, 3);
    let noise = common::white_noise(r.len(), 4);
    let e = common::mix_at_snr(&r, &noise, 5.0);
    let neg: Vec<f64> = r.iter().map(|v| -v).collect();
    let paths = ["ref.wav", "neg.wav", "est.wav"].map(|n| dir.path().join(n));
    for (p, x) in paths.iter().zip([&r, &neg, &e]) {
        common::write_float_wav(p, x, 16_000);
    }

    let same = stdout(&harmonia(&["metrics", s(&paths[0]), s(&paths[0])]));
    assert_eq!(value(&same, "l_hb"), 0.0);
    assert_eq!(value(&same, "l_focal"), 0.0);
    assert_eq!(value(&same, "apc_snr_db"), 60.0);
    let flipped = stdout(&harmonia(&["metrics", s(&paths[1]), s(&paths[0])]));
    assert_eq!(value(&flipped, "apc_snr_db"), 60.0);
    assert_eq!(value(&flipped, "si_snr_db"), 60.0);

    let csv = dir.path().join("m.csv");
    let o = harmonia(&["metrics", s(&paths[2]), s(&paths[0]), "--csv", s(&csv)]);
    assert!(o.status.success());
    let got = stdout(&o);
    // WAV stores f32; score what the binary read
    let f32ify = |x: &[f64]| x.iter().map(|v| *v as f32 as f64).collect::<Vec<_>>();
    let cfg = AnalysisConfig::wideband();
    let spec = |x: &[f64]| stft(&AudioBuffer::new(f32ify(x), 16_000).unwrap(), &cfg).unwrap();
    let gamma = LoudnessExponent::constant(257, 0.5).unwrap();
    let apc = apc_snr(&spec(&e), &spec(&r), &gamma).unwrap();
    assert_eq!(value(&got, "apc_snr_db"), apc);
    assert_eq!(
        value(&got, "si_snr_db"),
        si_snr(&f32ify(&e), &f32ify(&r)).unwrap()
    );
    assert_eq!(value(&got, "l_apc_refined"), -apc);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(
        table.starts_with("l_hb,l_apc_coarse,l_apc_refined,l_focal,total,apc_snr_db,si_snr_db\n")
    );
}

#[test]
fn enhance_full_band_uses_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let sr = 48_000;
    let n = sr as usize / 2;
    let mut clean = common::harmonic_comb(180.0, sr, 0.5, 5);
    // energy above 8 kHz so the high band matters
    for (i, v) in clean.iter_mut().enumerate() {
        *v += 0.1 * (2.0 * std::f64::consts::PI * 12_000.0 * i as f64 / sr as f64).sin();
    }
    let noisy = common::mix_at_snr(&clean, &common::white_noise(n, 6), 0.0);
    let (c, x, out) = (
        dir.path().join("clean.wav"),
        dir.path().join("noisy.wav"),
        dir.path().join("enh.wav"),
    );
    common::write_float_wav(&c, &clean, sr);
    common::write_float_wav(&x, &noisy, sr);
    let o = harmonia(&["enhance", s(&x), s(&c), "--out", s(&out), "--band", "fb"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    assert!(value(&report, "l_hb") > 0.0);
    assert!(value(&report, "l_apc_refined") < 0.0);

    let enh = harmonia::io::read_wav(&out).unwrap();
    assert_eq!((enh.sample_rate(), enh.len()), (sr, n));
    let fb = AnalysisConfig::fullband();
    let hb = |x: &AudioBuffer| split_bands(&stft(x, &fb).unwrap()).unwrap().1.magnitude();
    let clean_buf = harmonia::io::read_wav(&c).unwrap();
    let noisy_buf = harmonia::io::read_wav(&x).unwrap();
    let before = hb_loss(&hb(&noisy_buf), &hb(&clean_buf)).unwrap();
    let after = hb_loss(&hb(&enh), &hb(&clean_buf)).unwrap();
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn identity_masks_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let x = common::harmonic_comb(120.0, 16_000, 0.5, 7);
    let (p, out) = (dir.path().join("x.wav"), dir.path().join("y.wav"));
    common::write_float_wav(&p, &x, 16_000);
    let conf = dir.path().join("c.conf");
    // saturated complex mask, closed compensation
    std::fs::write(&conf, "mask = constant:40\ncompensation = off\n").unwrap();
    let o = harmonia(&[
        "enhance",
        s(&p),
        s(&p),
        "--out",
        s(&out),
        "--config",
        s(&conf),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let y = harmonia::io::read_wav(&out).unwrap();
    let x = harmonia::io::read_wav(&p).unwrap();
    let err: f64 = y
        .samples()
        .iter()
        .zip(x.samples())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let sig: f64 = x.samples().iter().map(|b| b * b).sum();
    assert!((err / sig).sqrt() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |o: Output| o.status.code().unwrap();

    assert_eq!(code(harmonia(&["analyze"])), 2);
    assert_eq!(code(harmonia(&["matrix", "--out", "x", "--band", "zz"])), 2);

    let bad_conf = dir.path().join("bad.conf");
    std::fs::write(&bad_conf, "window_ms = 32\nnot a pair\n").unwrap();
    let o = harmonia(&[
        "matrix",
        "--out",
        s(&dir.path().join("u")),
        "--config",
        s(&bad_conf),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));

    let not_wav = dir.path().join("junk.wav");
    std::fs::write(&not_wav, b"definitely not audio").unwrap();
    assert_eq!(
        code(harmonia(&["analyze", s(&not_wav), "--out", s(dir.path())])),
        3
    );

    let wb = dir.path().join("wb.wav");
    common::write_float_wav(&wb, &[0.0; 1600], 16_000);
    let o = harmonia(&["analyze", s(&wb), "--out", s(dir.path()), "--band", "fb"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--band wb"));

    let short = dir.path().join("short.wav");
    common::write_float_wav(&short, &[0.0; 1500], 16_000);
    let o = harmonia(&[
        "enhance",
        s(&wb),
        s(&short),
        "--out",
        s(&dir.path().join("e.wav")),
    ]);
    assert_eq!(o.status.code(), Some(3));

    let stereo = dir.path().join("stereo.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
    for _ in 0..200 {
        w.write_sample(0i16).unwrap();
    }
    w.finalize().unwrap();
    assert_eq!(
        code(harmonia(&["analyze", s(&stereo), "--out", s(dir.path())])),
        3
    );
}
