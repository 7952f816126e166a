//! Planted-correspondence datasets: every caption word is a noisy copy of a
//! concept prototype that also appears, in the image modality, in some of
//! its image's regions. Also generates labeled tone-pattern spectrograms
//! for classifier training.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use std::path::{Path, PathBuf};

use crate::align::{CaptionRecord, Dataset, ImageRecord, REGIONS_PER_IMAGE};
use crate::audio::Spectrogram;
use crate::error::{Error, Result};
use crate::io::write_dataset;
use crate::tensor::Tensor;

/// Attempts per prototype before giving up.
pub const MAX_PROTOTYPE_TRIES: usize = 1000;
/// Prototypes are accepted only when their cosine with every earlier one is below this.
pub const MAX_PROTOTYPE_COSINE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_concepts: usize,
    /// Concepts that only ever fill non-salient regions.
    pub n_filler_concepts: usize,
    pub d_i: usize,
    pub d_w: usize,
    pub regions_per_image: usize,
    pub words_per_caption: usize,
    /// Regions showing each salient concept.
    pub regions_per_concept: usize,
    pub noise_sigma: f64,
    pub n_images: usize,
    pub captions_per_image: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_concepts: 10,
            n_filler_concepts: 100,
            d_i: 64,
            d_w: 32,
            regions_per_image: REGIONS_PER_IMAGE,
            words_per_caption: 4,
            regions_per_concept: 4,
            noise_sigma: 0.05,
            n_images: 300,
            captions_per_image: 5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("synth.{key}"), msg));
        if self.n_concepts < 2 {
            return bad("n_concepts", "must be at least 2");
        }
        if self.d_i == 0 || self.d_w == 0 {
            return bad("d_i", "feature dims must be positive");
        }
        if self.regions_per_image != REGIONS_PER_IMAGE {
            return bad("regions_per_image", "images always have 20 regions");
        }
        if self.words_per_caption == 0 || self.words_per_caption > self.regions_per_image {
            return bad("words_per_caption", "must lie in 1..=regions_per_image");
        }
        if self.regions_per_concept == 0 || self.words_per_caption * self.regions_per_concept > self.regions_per_image {
            return bad("regions_per_concept", "salient regions must fit in regions_per_image");
        }
        if self.words_per_caption > self.n_concepts {
            return bad("words_per_caption", "cannot exceed n_concepts (salient concepts are distinct)");
        }
        if self.words_per_caption * self.regions_per_concept < self.regions_per_image && self.n_filler_concepts == 0 {
            return bad("n_filler_concepts", "needed to fill non-salient regions");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma", "must be a finite non-negative number");
        }
        if self.captions_per_image == 0 {
            return bad("captions_per_image", "must be positive");
        }
        Ok(())
    }
}

/// Concept labels. Word concepts are `0..n_concepts`; filler concepts are
/// `n_concepts..n_concepts + n_filler_concepts`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_concepts: usize,
    pub n_filler_concepts: usize,
    pub images: Vec<ImageTruth>,
    pub captions: Vec<CaptionTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTruth {
    pub image_id: String,
    pub region_concepts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionTruth {
    pub caption_id: String,
    pub image_id: String,
    pub word_concepts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    /// `μ_I(c)` for word and filler concepts, row per concept.
    pub image_prototypes: Tensor,
    /// `μ_W(c)` for word concepts.
    pub word_prototypes: Tensor,
}

impl SynthData {
    /// Splits after the first `n` images; captions and truth follow their image.
    pub fn split_at(&self, n: usize) -> (SynthData, SynthData) {
        let n = n.min(self.dataset.images.len());
        let head_ids: std::collections::HashSet<&str> =
            self.dataset.images[..n].iter().map(|im| im.id.as_str()).collect();
        let part = |head: bool| {
            let keep = |id: &str| head_ids.contains(id) == head;
            SynthData {
                dataset: Dataset {
                    images: self.dataset.images.iter().filter(|im| keep(&im.id)).cloned().collect(),
                    captions: self.dataset.captions.iter().filter(|c| keep(&c.image_id)).cloned().collect(),
                },
                truth: GroundTruth {
                    n_concepts: self.truth.n_concepts,
                    n_filler_concepts: self.truth.n_filler_concepts,
                    images: self.truth.images.iter().filter(|t| keep(&t.image_id)).cloned().collect(),
                    captions: self.truth.captions.iter().filter(|t| keep(&t.image_id)).cloned().collect(),
                },
                image_prototypes: self.image_prototypes.clone(),
                word_prototypes: self.word_prototypes.clone(),
            }
        };
        (part(true), part(false))
    }
}

fn unit_gaussian<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn cosine_unit(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `n` unit vectors in `R^d` with pairwise cosine below the threshold.
pub fn sample_prototypes<R: Rng>(n: usize, d: usize, rng: &mut R, key: &str) -> Result<Tensor> {
    let mut protos: Vec<Vec<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut accepted = None;
        for _ in 0..MAX_PROTOTYPE_TRIES {
            let v = unit_gaussian(d, rng);
            if protos.iter().all(|p| cosine_unit(p, &v) < MAX_PROTOTYPE_COSINE) {
                accepted = Some(v);
                break;
            }
        }
        let v = accepted.ok_or_else(|| {
            Error::config(
                key,
                format!("could not place prototype {c} of {n} in {d} dims after {MAX_PROTOTYPE_TRIES} tries"),
            )
        })?;
        protos.push(v);
    }
    Tensor::new(vec![n, d], protos.concat())
}

fn noisy<R: Rng>(proto: &[f64], noise: &Normal<f64>, rng: &mut R) -> Vec<f64> {
    proto.iter().map(|m| m + noise.sample(rng)).collect()
}

pub fn image_id(i: usize) -> String {
    format!("img{i:05}")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut proto_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_all = cfg.n_concepts + cfg.n_filler_concepts;
    let image_prototypes = sample_prototypes(n_all, cfg.d_i, &mut proto_rng, "synth.d_i")?;
    let word_prototypes = sample_prototypes(cfg.n_concepts, cfg.d_w, &mut proto_rng, "synth.d_w")?;
    let mu_i = |c: usize| &image_prototypes.data()[c * cfg.d_i..(c + 1) * cfg.d_i];
    let mu_w = |c: usize| &word_prototypes.data()[c * cfg.d_w..(c + 1) * cfg.d_w];
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::config("synth.noise_sigma", e.to_string()))?;

    let mut dataset = Dataset::default();
    let mut truth = GroundTruth { n_concepts: cfg.n_concepts, n_filler_concepts: cfg.n_filler_concepts, ..Default::default() };
    for i in 0..cfg.n_images {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        let id = image_id(i);
        let salient = index::sample(&mut rng, cfg.n_concepts, cfg.words_per_caption).into_vec();
        let n_salient = cfg.words_per_caption * cfg.regions_per_concept;
        let slots = index::sample(&mut rng, cfg.regions_per_image, n_salient).into_vec();
        let mut region_concepts = vec![usize::MAX; cfg.regions_per_image];
        for (k, &slot) in slots.iter().enumerate() {
            region_concepts[slot] = salient[k / cfg.regions_per_concept];
        }
        for rc in region_concepts.iter_mut().filter(|c| **c == usize::MAX) {
            *rc = cfg.n_concepts + rng.gen_range(0..cfg.n_filler_concepts);
        }
        let mut regions = Vec::with_capacity(cfg.regions_per_image * cfg.d_i);
        for &c in &region_concepts {
            regions.extend(noisy(mu_i(c), &noise, &mut rng));
        }
        dataset.images.push(ImageRecord::new(&id, Tensor::new(vec![cfg.regions_per_image, cfg.d_i], regions)?)?);
        for j in 0..cfg.captions_per_image {
            let mut order = salient.clone();
            order.shuffle(&mut rng);
            let mut words = Vec::with_capacity(order.len() * cfg.d_w);
            for &c in &order {
                words.extend(noisy(mu_w(c), &noise, &mut rng));
            }
            let caption_id = format!("{id}_c{j}");
            let texts = order.iter().map(|c| format!("concept{c}")).collect();
            dataset.captions.push(
                CaptionRecord::new(&caption_id, &id, Tensor::new(vec![order.len(), cfg.d_w], words)?)?.with_texts(texts)?,
            );
            truth.captions.push(CaptionTruth { caption_id, image_id: id.clone(), word_concepts: order });
        }
        truth.images.push(ImageTruth { image_id: id, region_concepts });
    }
    Ok(SynthData { dataset, truth, image_prototypes, word_prototypes })
}

/// For every caption and word, the regions of its image that carry the
/// word's concept.
pub fn oracle_alignment(dataset: &Dataset, truth: &GroundTruth) -> Result<Vec<Vec<Vec<usize>>>> {
    if truth.captions.len() != dataset.captions.len() || truth.images.len() != dataset.images.len() {
        return Err(Error::Data("ground truth does not match the dataset".into()));
    }
    let by_id: std::collections::HashMap<&str, &ImageTruth> =
        truth.images.iter().map(|t| (t.image_id.as_str(), t)).collect();
    dataset
        .captions
        .iter()
        .zip(&truth.captions)
        .map(|(cap, ct)| {
            if cap.id != ct.caption_id || cap.n_words() != ct.word_concepts.len() {
                return Err(Error::Data(format!("ground truth for `{}` does not match the caption", cap.id)));
            }
            let im = by_id
                .get(ct.image_id.as_str())
                .ok_or_else(|| Error::Data(format!("no ground truth for image `{}`", ct.image_id)))?;
            Ok(ct
                .word_concepts
                .iter()
                .map(|&c| (0..im.region_concepts.len()).filter(|&r| im.region_concepts[r] == c).collect())
                .collect())
        })
        .collect()
}

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Writes the dataset through [`write_dataset`] plus the ground truth as a
/// JSON sidecar. Returns the manifest path.
pub fn write_synth(dir: impl AsRef<Path>, data: &SynthData) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let manifest = write_dataset(dir, &data.dataset)?;
    let mut json = serde_json::to_string_pretty(&data.truth).map_err(|e| Error::json("ground truth", e))?;
    json.push('\n');
    let path = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&path, json).map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToneConfig {
    pub n_classes: usize,
    pub examples_per_class: usize,
    pub n_bands: usize,
    pub n_frames: usize,
    /// Tones summed into each class template.
    pub tones_per_class: usize,
    /// Max random time shift of an example relative to its template.
    pub max_shift: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ToneConfig {
    fn default() -> Self {
        Self {
            n_classes: 50,
            examples_per_class: 5,
            n_bands: 40,
            n_frames: 100,
            tones_per_class: 3,
            max_shift: 3,
            noise_sigma: 0.3,
            seed: 0,
        }
    }
}

impl ToneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.examples_per_class == 0 {
            return Err(Error::config("words.n_classes", "classes and examples must be positive"));
        }
        if self.n_bands == 0 || self.n_frames < 4 {
            return Err(Error::config("words.n_frames", "grid must be at least 1×4"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("words.noise_sigma", "must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// One class template: a sum of tones, each a Gaussian ridge across bands
/// held over a span of frames.
fn tone_template<R: Rng>(cfg: &ToneConfig, rng: &mut R) -> Vec<f64> {
    let mut grid = vec![0.0; cfg.n_bands * cfg.n_frames];
    for _ in 0..cfg.tones_per_class.max(1) {
        let centre = rng.gen_range(0.0..cfg.n_bands as f64);
        let width = rng.gen_range(0.8..2.5);
        let len = rng.gen_range(cfg.n_frames / 4..=cfg.n_frames / 2);
        let start = rng.gen_range(0..=cfg.n_frames - len);
        let amp = rng.gen_range(1.0..3.0);
        let glide = rng.gen_range(-0.1..0.1);
        for t in start..start + len {
            let c = centre + glide * (t - start) as f64;
            for f in 0..cfg.n_bands {
                let d = (f as f64 - c) / width;
                grid[f * cfg.n_frames + t] += amp * (-0.5 * d * d).exp();
            }
        }
    }
    grid
}

/// Labeled examples ordered by class then example.
pub fn tone_classes(cfg: &ToneConfig) -> Result<Vec<(Spectrogram, usize)>> {
    cfg.validate()?;
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::config("words.noise_sigma", e.to_string()))?;
    let mut out = Vec::with_capacity(cfg.n_classes * cfg.examples_per_class);
    for class in 0..cfg.n_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(class as u64);
        let template = tone_template(cfg, &mut rng);
        for _ in 0..cfg.examples_per_class {
            let shift = rng.gen_range(-(cfg.max_shift as i64)..=cfg.max_shift as i64);
            let mut grid = vec![0.0; template.len()];
            for f in 0..cfg.n_bands {
                for t in 0..cfg.n_frames {
                    let src = t as i64 - shift;
                    let base = if (0..cfg.n_frames as i64).contains(&src) {
                        template[f * cfg.n_frames + src as usize]
                    } else {
                        0.0
                    };
                    grid[f * cfg.n_frames + t] = base + noise.sample(&mut rng);
                }
            }
            let spec = Spectrogram::from_tensor(Tensor::new(vec![cfg.n_bands, cfg.n_frames], grid)?)?;
            out.push((spec, class));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { n_concepts: 6, n_filler_concepts: 4, d_i: 12, d_w: 8, n_images: 12, words_per_caption: 3, ..Default::default() }
    }

    #[test]
    fn zero_noise_instances_are_identical() {
        let data = generate(&SynthConfig { noise_sigma: 0.0, ..small() }).unwrap();
        let d = data.dataset.images[0].feature_dim();
        for (im, t) in data.dataset.images.iter().zip(&data.truth.images) {
            for (r, &c) in t.region_concepts.iter().enumerate() {
                assert_eq!(im.region(r), &data.image_prototypes.data()[c * d..(c + 1) * d]);
            }
        }
    }

    #[test]
    fn planted_correspondence_and_nonempty_oracle_sets() {
        let data = generate(&small()).unwrap();
        let oracle = oracle_alignment(&data.dataset, &data.truth).unwrap();
        for (ct, sets) in data.truth.captions.iter().zip(&oracle) {
            let it = data.truth.images.iter().find(|t| t.image_id == ct.image_id).unwrap();
            for (c, set) in ct.word_concepts.iter().zip(sets) {
                assert!(it.region_concepts.contains(c));
                assert!(!set.is_empty());
                assert!(set.iter().all(|&r| it.region_concepts[r] < data.truth.n_concepts));
            }
        }
    }

    #[test]
    fn prototypes_respect_cosine_bound() {
        let data = generate(&small()).unwrap();
        for p in [&data.image_prototypes, &data.word_prototypes] {
            let d = p.dims()[1];
            let rows: Vec<&[f64]> = p.data().chunks(d).collect();
            for a in 0..rows.len() {
                assert!((cosine_unit(rows[a], rows[a]) - 1.0).abs() < 1e-12);
                for b in 0..a {
                    assert!(cosine_unit(rows[a], rows[b]) < MAX_PROTOTYPE_COSINE);
                }
            }
        }
    }

    #[test]
    fn too_many_concepts_is_config_error() {
        let err = generate(&SynthConfig { n_concepts: 40, d_w: 2, ..small() }).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "synth.d_w"), "{err}");
    }

    #[test]
    fn split_keeps_captions_with_images() {
        let data = generate(&small()).unwrap();
        let (a, b) = data.split_at(8);
        assert_eq!(a.dataset.images.len(), 8);
        assert_eq!(b.dataset.captions.len(), 4 * 5);
        assert!(b.dataset.captions_by_image().unwrap().iter().all(|c| c.len() == 5));
        assert_eq!(oracle_alignment(&b.dataset, &b.truth).unwrap().len(), 20);
    }

    #[test]
    fn tone_classes_are_labeled_grids() {
        let cfg = ToneConfig { n_classes: 3, examples_per_class: 2, ..Default::default() };
        let ex = tone_classes(&cfg).unwrap();
        assert_eq!(ex.len(), 6);
        assert_eq!(ex.iter().map(|e| e.1).collect::<Vec<_>>(), [0, 0, 1, 1, 2, 2]);
        assert_eq!((ex[0].0.n_bands(), ex[0].0.n_frames()), (40, 100));
        assert_eq!(tone_classes(&cfg).unwrap(), ex);
    }
}
