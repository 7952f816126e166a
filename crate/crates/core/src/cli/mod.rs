//! Command-line front end. Every subcommand that writes a directory also
//! writes the fully resolved configuration there as `config.json`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{alignment_svg, fit, infer_alignment, CaptionAlignment, CaptionRecord, Dataset, ImageRecord};
use crate::audio::{read_wav, Frontend, Spectrogram};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{
    load_dataset, read_align_params, read_manifest, read_tensor, read_word_cnn, write_align_params, write_dataset,
    write_tensor, write_word_cnn, DType,
};
use crate::retrieval::evaluate;
use crate::synth::{generate, tone_classes, write_synth};
use crate::tensor::Tensor;
use crate::wordcnn::{embed_word, pretrain, Labeled};

pub const CONFIG_FILE: &str = "config.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const REPORT_FILE: &str = "report.json";
pub const ALIGNMENTS_FILE: &str = "alignments.json";

#[derive(Debug, Parser)]
#[command(name = "spokenvis", version, about = "Spoken words and image regions in one embedding space")]
pub struct Cli {
    /// TOML (or .json) run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config value, e.g. `--set align.h=16`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Seed for every module, applied after the overrides.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Region and word vectors with a ground-truth sidecar.
    Dataset,
    /// Labeled spectrograms for classifier pretraining.
    Words,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut word segments out of WAV files and write fixed-size spectrograms.
    Featurize {
        /// CSV with columns wav,start_ms,end_ms,word_id.
        #[arg(long)]
        segments: PathBuf,
        /// Directory the `wav` column is relative to.
        #[arg(long)]
        wav_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the word classifier on a features.csv.
    Pretrain {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace spectrogram lists in a manifest by word-vector tensors.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the alignment model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Image search and annotation recall on a held-out pool.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Shorthand for `--set eval.k=K`.
        #[arg(long)]
        k: Option<usize>,
        /// Per-query ranks as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for report.json and config.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Word-to-region alignments as JSON and SVG.
    Align {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only this caption.
        #[arg(long)]
        caption: Option<String>,
    },
    /// Write a synthetic dataset or word corpus.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code: 0 on success, 2 for internal errors, 1 for everything else.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.set(o)?;
    }
    if let Command::Eval { k: Some(k), .. } = cli.command {
        cfg.eval.k = k;
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Featurize { segments, wav_dir, out } => featurize(&cfg, segments, wav_dir, out),
        Command::Pretrain { features, out } => pretrain_cmd(&cfg, features, out),
        Command::Embed { model, manifest, out } => embed(&cfg, model, manifest, out),
        Command::Train { data, out } => train(&cfg, data, out),
        Command::Eval { data, model, csv, out, .. } => eval(&cfg, data, model, csv.as_deref(), out.as_deref()),
        Command::Align { data, model, out, caption } => align(&cfg, data, model, out, caption.as_deref()),
        Command::Synth { kind, out } => synth(&cfg, *kind, out),
    }
}

fn create_out(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.write_json(out.join(CONFIG_FILE))
}

fn write_json<T: Serialize>(path: &Path, value: &T, what: &str) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Error::json(what, e))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Deserialize)]
struct SegmentRow {
    wav: String,
    start_ms: u64,
    end_ms: u64,
    word_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureRow {
    pub spectrogram: String,
    pub word_id: String,
}

fn featurize(cfg: &RunConfig, segments: &Path, wav_dir: &Path, out: &Path) -> Result<()> {
    let frontend = Frontend::new(cfg.frontend.clone())?;
    let mut reader = csv::Reader::from_path(segments).map_err(|e| csv_error(segments, e))?;
    let rows = reader
        .deserialize::<SegmentRow>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(segments, e))?;
    create_out(cfg, out)?;
    let mut features = Vec::with_capacity(rows.len());
    let mut failed = 0;
    for (i, row) in rows.iter().enumerate() {
        let rel = format!("spectrograms/{i:06}.mmtf");
        let result = read_wav(wav_dir.join(&row.wav))
            .and_then(|w| w.segment(row.start_ms, row.end_ms))
            .and_then(|w| frontend.featurize(&w))
            .and_then(|s| write_tensor(out.join(&rel), s.as_tensor(), DType::F64));
        match result {
            Ok(()) => features.push(FeatureRow { spectrogram: rel, word_id: row.word_id.clone() }),
            Err(e) => {
                eprintln!("segment {} ({} {}..{} ms): {e}", i + 1, row.wav, row.start_ms, row.end_ms);
                failed += 1;
            }
        }
    }
    write_features(&out.join(FEATURES_FILE), &features)?;
    eprintln!("featurized {} of {} segments", features.len(), rows.len());
    if failed > 0 {
        return Err(Error::Input(format!("{failed} of {} segments failed", rows.len())));
    }
    Ok(())
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if rows.is_empty() {
        w.write_record(["spectrogram", "word_id"]).map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Spectrograms with their word ids; paths resolve against the CSV's folder.
pub fn read_features(path: &Path) -> Result<Vec<(Spectrogram, String)>> {
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<FeatureRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let spec = Spectrogram::from_tensor(read_tensor(dir.join(&row.spectrogram))?)?;
        out.push((spec, row.word_id));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct PretrainSummary<'a> {
    n_train: usize,
    n_validation: usize,
    vocab_size: usize,
    report: &'a crate::wordcnn::PretrainReport,
}

fn pretrain_cmd(cfg: &RunConfig, features: &Path, out: &Path) -> Result<()> {
    let examples = read_features(features)?;
    if examples.is_empty() {
        return Err(Error::Input(format!("{}: no examples", features.display())));
    }
    let vocab: Vec<String> = examples.iter().map(|(_, w)| w.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let labeled: Vec<Labeled> = examples
        .into_iter()
        .map(|(s, w)| {
            let label = vocab.binary_search(&w).expect("word is in the vocabulary");
            (s, label)
        })
        .collect();

    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.cnn.seed);
    rng.set_stream(2);
    order.shuffle(&mut rng);
    let n_val = ((labeled.len() as f64 * cfg.cnn.validation_fraction).round() as usize).min(labeled.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let pick = |idx: &[usize]| -> Vec<Labeled> {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| labeled[i].clone()).collect()
    };
    let (train, validation) = (pick(train_idx), pick(val_idx));

    create_out(cfg, out)?;
    let arch = cfg.cnn.arch(&cfg.frontend, vocab.len());
    let pre = cfg.cnn.pretrain();
    let val = (!validation.is_empty()).then_some(validation.as_slice());
    let (params, report) = pretrain(&train, val, arch, &pre)?;
    write_word_cnn(out, &params, &vocab, &pre)?;
    let summary = PretrainSummary { n_train: train.len(), n_validation: validation.len(), vocab_size: vocab.len(), report: &report };
    write_json(&out.join(REPORT_FILE), &summary, "pretrain report")?;
    if let Some(last) = report.epochs.last() {
        eprintln!("pretrained {} epochs, train top-1 {:.4}", report.epochs.len(), last.train.top1);
    }
    Ok(())
}

fn embed(cfg: &RunConfig, model: &Path, manifest_path: &Path, out: &Path) -> Result<()> {
    let (params, _) = read_word_cnn(model)?;
    let manifest = read_manifest(manifest_path)?;
    let mut ds = Dataset::default();
    for (entry, line) in &manifest.entries {
        let ctx = |e: Error| Error::Data(format!("{}:{line}: {e}", manifest_path.display()));
        let regions = read_tensor(manifest.resolve(&entry.region_tensor_path)).map_err(ctx)?;
        ds.images.push(ImageRecord::new(&entry.image_id, regions).map_err(ctx)?);
        for c in &entry.captions {
            let words = match (&c.spectrogram_paths, &c.word_tensor_path) {
                (Some(paths), _) => {
                    let mut data = Vec::with_capacity(paths.len() * params.arch().fc2);
                    for p in paths {
                        let spec = Spectrogram::from_tensor(read_tensor(manifest.resolve(p)).map_err(ctx)?).map_err(ctx)?;
                        data.extend(embed_word(&spec, &params).map_err(ctx)?);
                    }
                    Tensor::new(vec![paths.len(), params.arch().fc2], data)?
                }
                (None, Some(rel)) => read_tensor(manifest.resolve(rel)).map_err(ctx)?,
                (None, None) => unreachable!("read_manifest rejects captions without words"),
            };
            let mut cap = CaptionRecord::new(&c.caption_id, &entry.image_id, words).map_err(ctx)?;
            if let Some(texts) = &c.word_texts {
                cap = cap.with_texts(texts.clone()).map_err(ctx)?;
            }
            ds.captions.push(cap);
        }
    }
    create_out(cfg, out)?;
    let path = write_dataset(out, &ds)?;
    eprintln!("wrote {} ({} images, {} captions)", path.display(), ds.images.len(), ds.captions.len());
    Ok(())
}

fn train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let ds = load_dataset(data)?;
    create_out(cfg, out)?;
    let (params, report) = fit(&ds, &cfg.align)?;
    write_align_params(out, &params, &cfg.align)?;
    write_json(&out.join(REPORT_FILE), &report, "fit report")?;
    if let Some(c) = report.epoch_costs.last() {
        eprintln!("trained {} epochs, final mean batch cost {c:.4}", report.epoch_costs.len());
    }
    Ok(())
}

fn eval(cfg: &RunConfig, data: &Path, model: &Path, csv: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let ds = load_dataset(data)?;
    let (params, header) = read_align_params(model)?;
    let report = evaluate(&ds, &params, header.config.normalize_words, cfg.eval.k)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::json("eval report", e))?;
    json.push('\n');
    print!("{json}");
    if let Some(path) = csv {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        report.write_csv(std::io::BufWriter::new(f))?;
    }
    if let Some(dir) = out {
        create_out(cfg, dir)?;
        let path = dir.join(REPORT_FILE);
        fs::write(&path, &json).map_err(|e| Error::io(path, e))?;
    }
    eprintln!("{}", report.summary_line());
    Ok(())
}

fn file_stem_for(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn align(cfg: &RunConfig, data: &Path, model: &Path, out: &Path, only: Option<&str>) -> Result<()> {
    let ds = load_dataset(data)?;
    let (params, header) = read_align_params(model)?;
    let by_id: std::collections::HashMap<&str, &ImageRecord> = ds.images.iter().map(|im| (im.id.as_str(), im)).collect();
    let captions: Vec<&CaptionRecord> = ds.captions.iter().filter(|c| only.is_none_or(|id| c.id == id)).collect();
    if let (Some(id), true) = (only, captions.is_empty()) {
        return Err(Error::Input(format!("no caption `{id}` in {}", data.display())));
    }
    create_out(cfg, out)?;
    let svg_dir = out.join("svg");
    fs::create_dir_all(&svg_dir).map_err(|e| Error::io(&svg_dir, e))?;
    let mut all = Vec::with_capacity(captions.len());
    for cap in captions {
        let image = by_id
            .get(cap.image_id.as_str())
            .ok_or_else(|| Error::Data(format!("caption `{}` refers to unknown image `{}`", cap.id, cap.image_id)))?;
        let words = infer_alignment(image, cap, &params, header.config.normalize_words)?;
        let a = CaptionAlignment { caption_id: cap.id.clone(), image_id: cap.image_id.clone(), words };
        let svg = alignment_svg(&a, image.n_regions(), cap.word_texts.as_deref());
        let path = svg_dir.join(format!("{}.svg", file_stem_for(&cap.id)));
        fs::write(&path, svg).map_err(|e| Error::io(path, e))?;
        all.push(a);
    }
    write_json(&out.join(ALIGNMENTS_FILE), &all, "alignments")?;
    let links: usize = all.iter().map(|a| a.words.iter().filter(|w| w.displayable()).count()).sum();
    eprintln!("aligned {} captions, {links} displayable links", all.len());
    Ok(())
}

fn synth(cfg: &RunConfig, kind: SynthKind, out: &Path) -> Result<()> {
    create_out(cfg, out)?;
    match kind {
        SynthKind::Dataset => {
            let data = generate(&cfg.synth)?;
            let path = write_synth(out, &data)?;
            eprintln!("wrote {}", path.display());
        }
        SynthKind::Words => {
            let examples = tone_classes(&cfg.words)?;
            let mut rows = Vec::with_capacity(examples.len());
            for (i, (spec, class)) in examples.iter().enumerate() {
                let rel = format!("spectrograms/{i:06}.mmtf");
                write_tensor(out.join(&rel), spec.as_tensor(), DType::F64)?;
                rows.push(FeatureRow { spectrogram: rel, word_id: format!("w{class:04}") });
            }
            write_features(&out.join(FEATURES_FILE), &rows)?;
            eprintln!("wrote {} examples of {} words", rows.len(), cfg.words.n_classes);
        }
    }
    Ok(())
}
