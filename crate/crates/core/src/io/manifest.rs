//! JSON-lines dataset manifest. The first line is `{"schema":1}`; every
//! following line describes one image and its captions, with tensor paths
//! relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tensor_file::{read_tensor, write_tensor, DType};
use crate::align::{CaptionRecord, Dataset, ImageRecord};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCaption {
    pub caption_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_tensor_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrogram_paths: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_texts: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestImage {
    pub image_id: String,
    pub region_tensor_path: String,
    pub captions: Vec<ManifestCaption>,
}

/// A parsed manifest. `entries[i].1` is the 1-based line the entry came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: Vec<(ManifestImage, usize)>,
}

impl Manifest {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }
}

fn line_error(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}:{line}: {msg}", path.display()))
}

/// Parses the manifest without touching the files it references. An empty
/// file is an empty manifest.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut entries = Vec::new();
    let Some((i, first)) = lines.next() else {
        return Ok(Manifest { dir, entries });
    };
    let header: Header = serde_json::from_str(first)
        .map_err(|e| line_error(path, i + 1, format!("expected header {{\"schema\":1}}: {e}")))?;
    if header.schema != SCHEMA_VERSION {
        return Err(line_error(path, i + 1, format!("unsupported schema {}", header.schema)));
    }
    let mut seen_images = HashSet::new();
    let mut seen_captions = HashSet::new();
    for (i, line) in lines {
        let entry: ManifestImage = serde_json::from_str(line).map_err(|e| line_error(path, i + 1, e))?;
        if !seen_images.insert(entry.image_id.clone()) {
            return Err(line_error(path, i + 1, format!("duplicate image_id `{}`", entry.image_id)));
        }
        for c in &entry.captions {
            if !seen_captions.insert(c.caption_id.clone()) {
                return Err(line_error(path, i + 1, format!("duplicate caption_id `{}`", c.caption_id)));
            }
            if c.word_tensor_path.is_none() && c.spectrogram_paths.is_none() {
                return Err(line_error(
                    path,
                    i + 1,
                    format!("caption `{}` needs word_tensor_path or spectrogram_paths", c.caption_id),
                ));
            }
        }
        entries.push((entry, i + 1));
    }
    Ok(Manifest { dir, entries })
}

pub fn write_manifest(path: impl AsRef<Path>, images: &[ManifestImage]) -> Result<()> {
    let path = path.as_ref();
    let mut out = serde_json::to_string(&Header { schema: SCHEMA_VERSION }).expect("header serializes");
    out.push('\n');
    for im in images {
        out.push_str(&serde_json::to_string(im).map_err(|e| Error::json("manifest entry", e))?);
        out.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads every image and caption. Captions must carry word tensors; use
/// the `embed` step to turn spectrogram-only manifests into that form.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let manifest = read_manifest(path)?;
    let mut ds = Dataset::default();
    for (entry, line) in &manifest.entries {
        let wrap = |e: Error| line_error(path, *line, e);
        let regions = read_tensor(manifest.resolve(&entry.region_tensor_path)).map_err(wrap)?;
        ds.images.push(ImageRecord::new(&entry.image_id, regions).map_err(wrap)?);
        for c in &entry.captions {
            let rel = c.word_tensor_path.as_deref().ok_or_else(|| {
                line_error(path, *line, format!("caption `{}` has no word_tensor_path", c.caption_id))
            })?;
            let words = read_tensor(manifest.resolve(rel)).map_err(wrap)?;
            let mut cap = CaptionRecord::new(&c.caption_id, &entry.image_id, words).map_err(wrap)?;
            if let Some(texts) = &c.word_texts {
                cap = cap.with_texts(texts.clone()).map_err(wrap)?;
            }
            ds.captions.push(cap);
        }
    }
    ds.feature_dims().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(ds)
}

/// Writes `dataset` as `dir/manifest.jsonl` plus one f64 tensor file per
/// record. Returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let by_image = dataset.captions_by_image()?;
    let mut entries = Vec::with_capacity(dataset.images.len());
    for (i, (image, caps)) in dataset.images.iter().zip(&by_image).enumerate() {
        let region_rel = format!("regions/{i:06}.mmtf");
        write_tensor(dir.join(&region_rel), image.regions(), DType::F64)?;
        let captions = caps
            .iter()
            .map(|&c| {
                let cap = &dataset.captions[c];
                let rel = format!("words/{c:06}.mmtf");
                write_tensor(dir.join(&rel), cap.words(), DType::F64)?;
                Ok(ManifestCaption {
                    caption_id: cap.id.clone(),
                    word_tensor_path: Some(rel),
                    spectrogram_paths: None,
                    word_texts: cap.word_texts.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push(ManifestImage { image_id: image.id.clone(), region_tensor_path: region_rel, captions });
    }
    let path = dir.join("manifest.jsonl");
    write_manifest(&path, &entries)?;
    Ok(path)
}
