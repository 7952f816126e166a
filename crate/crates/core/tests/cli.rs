mod common;

use std::fs;
use std::process::Command;

use common::pipeline::{self, bin};
use spokenvis::align::{AlignInit, AlignParams, FitConfig};
use spokenvis::audio::{write_wav, Waveform};
use spokenvis::io::{read_tensor, write_align_params};
use spokenvis::retrieval::EvalReport;

fn run_in(dir: &std::path::Path, args: &[&str]) -> std::process::Output {
    Command::new(bin()).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn empty_segment_list_succeeds_with_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("audio")).unwrap();
    fs::write(dir.path().join("segments.csv"), "wav,start_ms,end_ms,word_id\n").unwrap();
    let out = run_in(dir.path(), &["featurize", "--segments", "segments.csv", "--wav-dir", "audio", "--out", "feats"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let features = fs::read_to_string(dir.path().join("feats/features.csv")).unwrap();
    assert_eq!(features.trim(), "spectrogram,word_id");
    assert!(dir.path().join("feats/config.json").exists());
}

#[test]
fn bad_segments_are_reported_and_the_rest_still_written() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("audio")).unwrap();
    write_wav(dir.path().join("audio/ok.wav"), &pipeline::tone_wave(440.0, 1)).unwrap();
    fs::write(
        dir.path().join("segments.csv"),
        "wav,start_ms,end_ms,word_id\nok.wav,0,400,a\nmissing.wav,0,400,b\nok.wav,300,300,c\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["featurize", "--segments", "segments.csv", "--wav-dir", "audio", "--out", "feats"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing.wav"), "{stderr}");
    assert!(stderr.contains("2 of 3 segments failed"), "{stderr}");
    let features = fs::read_to_string(dir.path().join("feats/features.csv")).unwrap();
    assert_eq!(features.lines().count(), 2);
    assert_eq!(read_tensor(dir.path().join("feats/spectrograms/000000.mmtf")).unwrap().dims(), &[40, 100]);
}

#[test]
fn silent_segment_gives_all_zero_grid() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("audio")).unwrap();
    write_wav(dir.path().join("audio/quiet.wav"), &Waveform::new(vec![0.0; 16_000], 16_000).unwrap()).unwrap();
    fs::write(dir.path().join("segments.csv"), "wav,start_ms,end_ms,word_id\nquiet.wav,0,1000,hush\n").unwrap();
    let out = run_in(dir.path(), &["featurize", "--segments", "segments.csv", "--wav-dir", "audio", "--out", "feats"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = read_tensor(dir.path().join("feats/spectrograms/000000.mmtf")).unwrap();
    assert_eq!(grid.dims(), &[40, 100]);
    assert!(grid.data().iter().all(|&v| v == 0.0));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (set, key) in [("align.hh=3", "align.hh"), ("align.learning_rate=-1", "align.learning_rate"), ("eval.k=0", "eval.k")] {
        let out = run_in(dir.path(), &["synth", "--kind", "dataset", "--out", "ds", "--set", set]);
        assert_eq!(out.status.code(), Some(1), "{set}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(key), "{set}");
    }
    let out = run_in(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[synth]\nn_images = 30\n").unwrap();
    let out = run_in(
        dir.path(),
        &["synth", "--kind", "dataset", "--out", "ds", "--config", "run.toml", "--set", "synth.d_i=48", "--seed", "5"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ds/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["synth"]["n_images"], 30);
    assert_eq!(cfg["synth"]["d_i"], 48);
    assert_eq!(cfg["align"]["seed"], 5);
    assert_eq!(cfg["cnn"]["seed"], 5);
}

#[test]
fn eval_with_k_equal_to_pool_size_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let synth = ["synth", "--kind", "dataset", "--out", "ds", "--set", "synth.n_images=20"];
    assert!(run_in(dir.path(), &synth).status.success());
    let train = ["train", "--data", "ds/manifest.jsonl", "--out", "m", "--set", "align.h=8", "--set", "align.epochs=1"];
    assert!(run_in(dir.path(), &train).status.success());
    let captions = fs::read_dir(dir.path().join("ds/words")).unwrap().count();
    let k = captions.to_string();
    let out = run_in(dir.path(), &["eval", "--data", "ds/manifest.jsonl", "--model", "m", "--k", &k]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.annotation.pool_size, captions);
    assert_eq!(report.annotation.recall, 1.0);
    assert_eq!(report.search.recall, 1.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("annotation R@{k} = 1.0000")));
}

#[test]
fn zero_model_draws_no_links() {
    let dir = tempfile::tempdir().unwrap();
    let synth = ["synth", "--kind", "dataset", "--out", "ds", "--set", "synth.n_images=3"];
    assert!(run_in(dir.path(), &synth).status.success());
    let cfg = spokenvis::config::RunConfig::default();
    let params = AlignParams::init(4, cfg.synth.d_i, cfg.synth.d_w, AlignInit::Zeros, 0).unwrap();
    write_align_params(dir.path().join("zero"), &params, &FitConfig::default()).unwrap();
    let out = run_in(dir.path(), &["align", "--data", "ds/manifest.jsonl", "--model", "zero", "--out", "al"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("al/alignments.json")).unwrap()).unwrap();
    let captions = json.as_array().unwrap();
    assert!(!captions.is_empty());
    for c in captions {
        for w in c["words"].as_array().unwrap() {
            assert_eq!(w["score"], 0.0);
        }
        let svg = fs::read_to_string(dir.path().join(format!("al/svg/{}.svg", c["caption_id"].as_str().unwrap()))).unwrap();
        assert!(!svg.contains("<line"), "zero scores must not be drawn");
    }
}

#[test]
fn unknown_caption_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["synth", "--kind", "dataset", "--out", "ds", "--set", "synth.n_images=2"]).status.success());
    let cfg = spokenvis::config::RunConfig::default();
    let params = AlignParams::init(4, cfg.synth.d_i, cfg.synth.d_w, AlignInit::Zeros, 0).unwrap();
    write_align_params(dir.path().join("zero"), &params, &FitConfig::default()).unwrap();
    let out = run_in(dir.path(), &["align", "--data", "ds/manifest.jsonl", "--model", "zero", "--out", "al", "--caption", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_runs_from_wav_to_recall() {
    let dir = tempfile::tempdir().unwrap();
    pipeline::write_inputs(dir.path());
    let stdout = pipeline::run(dir.path());
    let report: EvalReport = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(report.search.pool_size, pipeline::N_IMAGES);
    let words = read_tensor(dir.path().join("emb/words/000000.mmtf")).unwrap();
    assert_eq!(words.dims(), &[2, 16]);
    assert!(dir.path().join("cnn/report.json").exists());
    assert!(dir.path().join("eval/report.json").exists());
}
