//! CLI contract: flag handling, key=value output, machine-parseable errors,
//! nonzero exit codes.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tcn-enhance")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn tmp(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("tcn-cli-{}-{tag}", std::process::id()))
}

fn run(args: &[&str]) -> (bool, HashMap<String, String>, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn CLI");
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    let kv = stdout
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    (out.status.success(), kv, stderr)
}

fn write_noise_wav(path: &Path, len: usize, seed: u64) {
    let x = tcn_enhance::signal::AudioSignal::seeded_noise(len, 16_000, 0.5, seed);
    tcn_enhance::io::write_wav(path, &x).unwrap();
}

#[test]
fn init_weights_reports_exact_param_count() {
    let out = tmp("init.tcnw");
    let (ok, kv, _) = run(&[
        "init-weights",
        "--config",
        config("stft_tcn.conf").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok);
    assert_eq!(kv["params"], "5033009");
    assert_eq!(kv["seed"], "42");
    std::fs::remove_file(&out).ok();
}

#[test]
fn latency_output_is_key_value() {
    let (ok, kv, _) = run(&["latency", "--config", config("conv_tasnet.conf").to_str().unwrap()]);
    assert!(ok);
    assert_eq!(kv["future_frames"], "33");
    assert_eq!(kv["lookahead_ms"].parse::<f64>().unwrap(), 33.0);
}

#[test]
fn metrics_identical_files_report_perfect_estimate() {
    let wav = tmp("same.wav");
    write_noise_wav(&wav, 8000, 3);
    let (ok, kv, _) = run(&[
        "metrics",
        "--clean",
        wav.to_str().unwrap(),
        "--est",
        wav.to_str().unwrap(),
        "--loss",
        "sisnr",
    ]);
    assert!(ok);
    assert_eq!(kv["status"], "perfect_estimate");
    assert_eq!(kv["ssnr_db"].parse::<f64>().unwrap(), 35.0);
    std::fs::remove_file(&wav).ok();
}

#[test]
fn metrics_computes_each_loss() {
    let clean = tmp("clean.wav");
    let est = tmp("est.wav");
    write_noise_wav(&clean, 8000, 4);
    write_noise_wav(&est, 8000, 5);
    for loss in ["sisnr", "snr", "pcmse", "pasemse"] {
        let (ok, kv, _) = run(&[
            "metrics",
            "--clean",
            clean.to_str().unwrap(),
            "--est",
            est.to_str().unwrap(),
            "--loss",
            loss,
        ]);
        assert!(ok, "{loss}");
        assert!(kv["loss_value"].parse::<f64>().unwrap().is_finite());
        assert_eq!(kv["status"], "ok");
    }
    std::fs::remove_file(&clean).ok();
    std::fs::remove_file(&est).ok();
}

#[test]
fn errors_are_one_line_and_nonzero() {
    // Unknown loss name.
    let wav = tmp("err.wav");
    write_noise_wav(&wav, 4000, 6);
    let (ok, _, stderr) = run(&[
        "metrics",
        "--clean",
        wav.to_str().unwrap(),
        "--est",
        wav.to_str().unwrap(),
        "--loss",
        "mse",
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error=UnknownLoss"), "{stderr}");
    assert_eq!(stderr.trim().lines().count(), 1);

    // Malformed WAV.
    let bad = tmp("bad.wav");
    std::fs::write(&bad, b"not audio").unwrap();
    let (ok, _, stderr) = run(&[
        "metrics",
        "--clean",
        bad.to_str().unwrap(),
        "--est",
        wav.to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error=MalformedWav"), "{stderr}");

    // Config/weights mismatch.
    let weights = tmp("mismatch.tcnw");
    let (ok, _, _) = run(&[
        "init-weights",
        "--config",
        config("conv_tasnet.conf").to_str().unwrap(),
        "--out",
        weights.to_str().unwrap(),
    ]);
    assert!(ok);
    let (ok, _, stderr) = run(&[
        "probe",
        "--config",
        config("stft_tcn.conf").to_str().unwrap(),
        "--weights",
        weights.to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error=WeightsConfigMismatch"), "{stderr}");

    std::fs::remove_file(&wav).ok();
    std::fs::remove_file(&bad).ok();
    std::fs::remove_file(&weights).ok();
}

#[test]
fn enhance_rejects_out_noise_for_single_source() {
    let dir = tmp("k1");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("k1.conf");
    std::fs::write(&cfg, "model = conv-tasnet\nnum_sources = 1\n").unwrap();
    let weights = dir.join("w.tcnw");
    let (ok, _, _) = run(&[
        "init-weights",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        weights.to_str().unwrap(),
    ]);
    assert!(ok);
    let wav = dir.join("in.wav");
    write_noise_wav(&wav, 2000, 8);
    let (ok, _, stderr) = run(&[
        "enhance",
        "--config",
        cfg.to_str().unwrap(),
        "--weights",
        weights.to_str().unwrap(),
        "--in",
        wav.to_str().unwrap(),
        "--out-speech",
        dir.join("s.wav").to_str().unwrap(),
        "--out-noise",
        dir.join("n.wav").to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error=InvalidArguments"), "{stderr}");
    std::fs::remove_dir_all(&dir).ok();
}
