use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Regions per image: the top 19 detections plus the whole frame.
pub const REGIONS_PER_IMAGE: usize = 20;

/// One image as a `20 × d_I` matrix of region feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    regions: Tensor,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, regions: Tensor) -> Result<Self> {
        let id = id.into();
        match regions.dims() {
            &[REGIONS_PER_IMAGE, _] => Ok(Self { id, regions }),
            d => Err(Error::Data(format!(
                "image `{id}`: region tensor has dims {d:?}, expected first dim {REGIONS_PER_IMAGE}"
            ))),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.regions.dims()[1]
    }

    pub fn n_regions(&self) -> usize {
        REGIONS_PER_IMAGE
    }

    pub fn region(&self, i: usize) -> &[f64] {
        let d = self.feature_dim();
        &self.regions.data()[i * d..(i + 1) * d]
    }

    pub fn regions(&self) -> &Tensor {
        &self.regions
    }
}

/// A caption as an ordered `N_w × d_W` matrix of word vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptionRecord {
    pub id: String,
    pub image_id: String,
    words: Tensor,
    pub word_texts: Option<Vec<String>>,
}

impl CaptionRecord {
    pub fn new(id: impl Into<String>, image_id: impl Into<String>, words: Tensor) -> Result<Self> {
        let id = id.into();
        if words.rank() != 2 {
            return Err(Error::Data(format!(
                "caption `{id}`: word tensor must be N_w×d_W, got {:?}",
                words.dims()
            )));
        }
        Ok(Self {
            id,
            image_id: image_id.into(),
            words,
            word_texts: None,
        })
    }

    pub fn with_texts(mut self, texts: Vec<String>) -> Result<Self> {
        if texts.len() != self.n_words() {
            return Err(Error::Data(format!(
                "caption `{}`: {} word texts for {} words",
                self.id,
                texts.len(),
                self.n_words()
            )));
        }
        self.word_texts = Some(texts);
        Ok(self)
    }

    pub fn n_words(&self) -> usize {
        self.words.dims()[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.words.dims()[1]
    }

    pub fn word(&self, j: usize) -> &[f64] {
        let d = self.feature_dim();
        &self.words.data()[j * d..(j + 1) * d]
    }

    pub fn words(&self) -> &Tensor {
        &self.words
    }
}

/// Images and their captions, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub captions: Vec<CaptionRecord>,
}

impl Dataset {
    /// Caption indices for every image, in image order. Errors if a caption
    /// names an unknown image.
    pub fn captions_by_image(&self) -> Result<Vec<Vec<usize>>> {
        let index: HashMap<&str, usize> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, im)| (im.id.as_str(), i))
            .collect();
        let mut out = vec![Vec::new(); self.images.len()];
        for (c, cap) in self.captions.iter().enumerate() {
            let &i = index.get(cap.image_id.as_str()).ok_or_else(|| {
                Error::Data(format!("caption `{}` refers to unknown image `{}`", cap.id, cap.image_id))
            })?;
            out[i].push(c);
        }
        Ok(out)
    }

    /// Feature dims `(d_I, d_W)`, checked to be uniform across records.
    pub fn feature_dims(&self) -> Result<(usize, usize)> {
        let d_i = self.images.first().map(ImageRecord::feature_dim).unwrap_or(0);
        let d_w = self.captions.first().map(CaptionRecord::feature_dim).unwrap_or(0);
        if let Some(im) = self.images.iter().find(|im| im.feature_dim() != d_i) {
            return Err(Error::Data(format!("image `{}` has d_I={}, expected {d_i}", im.id, im.feature_dim())));
        }
        if let Some(c) = self.captions.iter().find(|c| c.feature_dim() != d_w) {
            return Err(Error::Data(format!("caption `{}` has d_W={}, expected {d_w}", c.id, c.feature_dim())));
        }
        Ok((d_i, d_w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_requires_twenty_regions() {
        let err = ImageRecord::new("a", Tensor::zeros(&[19, 4])).unwrap_err();
        assert!(err.to_string().contains("expected first dim 20"));
        assert!(ImageRecord::new("a", Tensor::zeros(&[20, 4])).is_ok());
    }

    #[test]
    fn captions_group_by_image() {
        let ds = Dataset {
            images: vec![
                ImageRecord::new("a", Tensor::zeros(&[20, 2])).unwrap(),
                ImageRecord::new("b", Tensor::zeros(&[20, 2])).unwrap(),
            ],
            captions: vec![
                CaptionRecord::new("c0", "b", Tensor::zeros(&[1, 3])).unwrap(),
                CaptionRecord::new("c1", "a", Tensor::zeros(&[2, 3])).unwrap(),
                CaptionRecord::new("c2", "b", Tensor::zeros(&[1, 3])).unwrap(),
            ],
        };
        assert_eq!(ds.captions_by_image().unwrap(), vec![vec![1], vec![0, 2]]);
        assert_eq!(ds.feature_dims().unwrap(), (2, 3));
    }
}
