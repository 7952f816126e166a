//! A tiny end-to-end corpus: tone "words" in WAV files, images of random
//! regions, and captions that point at the featurized word segments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use spokenvis::audio::{write_wav, Waveform};
use spokenvis::io::{write_manifest, write_tensor, DType, ManifestCaption, ManifestImage};
use spokenvis::Tensor;

pub const N_WORDS: usize = 4;
pub const UTTERANCES_PER_WORD: usize = 6;
pub const N_IMAGES: usize = 12;

/// Small model sizes so the whole chain runs in seconds.
#[rustfmt::skip]
pub const SETTINGS: &[&str] = &[
    "--set", "cnn.channels=8",
    "--set", "cnn.fc1=32",
    "--set", "cnn.fc2=16",
    "--set", "cnn.epochs=3",
    "--set", "cnn.batch_size=8",
    "--set", "align.h=8",
    "--set", "align.epochs=5",
    "--set", "align.batch_images=4",
    "--set", "align.learning_rate=1e-3",
    "--seed", "7",
];

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_spokenvis")
}

pub fn tone_wave(freq: f64, seed: u64) -> Waveform {
    let mut r = super::rng(seed);
    let sr = 16_000.0;
    let samples = (0..9_600)
        .map(|n| {
            let t = n as f64 / sr;
            let on = (1_600..8_000).contains(&n);
            let tone = if on { 0.3 * (2.0 * PI * freq * t).sin() + 0.1 * (4.0 * PI * freq * t).sin() } else { 0.0 };
            tone + r.gen_range(-0.01..0.01)
        })
        .collect();
    Waveform::new(samples, 16_000).unwrap()
}

/// Writes `audio/`, `segments.csv` and `pairs/manifest.jsonl` under `dir`.
pub fn write_inputs(dir: &Path) {
    fs::create_dir_all(dir.join("audio")).unwrap();
    let mut csv = String::from("wav,start_ms,end_ms,word_id\n");
    let mut segment = 0;
    let mut by_word = vec![Vec::new(); N_WORDS];
    for u in 0..UTTERANCES_PER_WORD {
        for (w, seg) in by_word.iter_mut().enumerate() {
            let name = format!("u{w}_{u}.wav");
            write_wav(dir.join("audio").join(&name), &tone_wave(300.0 * 2f64.powi(w as i32), (w * 100 + u) as u64)).unwrap();
            csv.push_str(&format!("{name},50,550,word{w}\n"));
            seg.push(segment);
            segment += 1;
        }
    }
    fs::write(dir.join("segments.csv"), csv).unwrap();

    let pairs = dir.join("pairs");
    let mut r = super::rng(99);
    let mut images = Vec::new();
    for i in 0..N_IMAGES {
        let rel = format!("regions/{i:03}.mmtf");
        write_tensor(pairs.join(&rel), &Tensor::randn(&[20, 6], 1.0, &mut r), DType::F64).unwrap();
        let words = [i % N_WORDS, (i / N_WORDS + 1 + i) % N_WORDS];
        let paths = words
            .iter()
            .enumerate()
            .map(|(j, &w)| format!("../feats/spectrograms/{:06}.mmtf", by_word[w][(i + j) % UTTERANCES_PER_WORD]))
            .collect();
        images.push(ManifestImage {
            image_id: format!("im{i:02}"),
            region_tensor_path: rel,
            captions: vec![ManifestCaption {
                caption_id: format!("cap{i:02}"),
                word_tensor_path: None,
                spectrogram_paths: Some(paths),
                word_texts: Some(words.iter().map(|w| format!("word{w}")).collect()),
            }],
        });
    }
    write_manifest(pairs.join("manifest.jsonl"), &images).unwrap();
}

pub fn spokenvis(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(bin()).current_dir(dir).args(args).args(SETTINGS).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// featurize → pretrain → embed → train → eval, all with relative paths.
/// Returns the eval stdout.
pub fn run(dir: &Path) -> Vec<u8> {
    spokenvis(dir, &["featurize", "--segments", "segments.csv", "--wav-dir", "audio", "--out", "feats"]);
    spokenvis(dir, &["pretrain", "--features", "feats/features.csv", "--out", "cnn"]);
    spokenvis(dir, &["embed", "--model", "cnn", "--manifest", "pairs/manifest.jsonl", "--out", "emb"]);
    spokenvis(dir, &["train", "--data", "emb/manifest.jsonl", "--out", "model"]);
    spokenvis(dir, &["eval", "--data", "emb/manifest.jsonl", "--model", "model", "--out", "eval"]).stdout
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}
