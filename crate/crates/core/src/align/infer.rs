//! Word-to-region alignment and its JSON / SVG renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::model::{best_region, embed_caption, embed_image, AlignParams};
use super::records::{CaptionRecord, ImageRecord};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordAlignment {
    pub word_index: usize,
    pub region_index: usize,
    /// Max inner product over the image's regions, before thresholding.
    pub score: f64,
}

impl WordAlignment {
    /// Only positive scores are drawn as links.
    pub fn displayable(&self) -> bool {
        self.score > 0.0
    }
}

pub fn infer_alignment(
    image: &ImageRecord,
    caption: &CaptionRecord,
    params: &AlignParams,
    normalize: bool,
) -> Result<Vec<WordAlignment>> {
    let y = embed_image(image, params)?;
    let x = embed_caption(caption, params, normalize)?;
    Ok(x.chunks_exact(params.h())
        .enumerate()
        .map(|(word_index, xt)| {
            let (region_index, score) = best_region(&y, xt);
            WordAlignment { word_index, region_index, score }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionAlignment {
    pub caption_id: String,
    pub image_id: String,
    pub words: Vec<WordAlignment>,
}

/// Draws the regions as a 4×5 grid of boxes and the words as a column, with
/// a line from each word to its region when the score is positive.
pub fn alignment_svg(alignment: &CaptionAlignment, n_regions: usize, word_texts: Option<&[String]>) -> String {
    const BOX_W: usize = 80;
    const BOX_H: usize = 60;
    const COLS: usize = 5;
    const ROW_H: usize = 24;
    let rows = n_regions.div_ceil(COLS);
    let grid_w = COLS * (BOX_W + 10);
    let word_x = grid_w + 160;
    let height = (rows * (BOX_H + 10)).max(alignment.words.len() * ROW_H + 40) + 20;
    let width = word_x + 220;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(s, r#"<title>{} / {}</title>"#, escape(&alignment.image_id), escape(&alignment.caption_id));
    let centre = |i: usize| {
        let (r, c) = (i / COLS, i % COLS);
        (10 + c * (BOX_W + 10) + BOX_W / 2, 10 + r * (BOX_H + 10) + BOX_H / 2)
    };
    for i in 0..n_regions {
        let (cx, cy) = centre(i);
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{BOX_W}" height="{BOX_H}" fill="none" stroke="#888"/><text x="{}" y="{}">r{i}</text>"##,
            cx - BOX_W / 2,
            cy - BOX_H / 2,
            cx - BOX_W / 2 + 4,
            cy - BOX_H / 2 + 14
        );
    }
    for w in &alignment.words {
        let y = 30 + w.word_index * ROW_H;
        let label = word_texts
            .and_then(|t| t.get(w.word_index))
            .map_or_else(|| format!("w{}", w.word_index), |t| escape(t));
        let _ = writeln!(s, r#"<text x="{word_x}" y="{y}">{label} ({:.3})</text>"#, w.score);
        if w.displayable() {
            let (cx, cy) = centre(w.region_index);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{cx}" y2="{cy}" stroke="#d33" stroke-width="1.5"/>"##,
                word_x - 6,
                y - 4
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
