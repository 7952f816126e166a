//! Image search and annotation ranking with recall@K.
//!
//! Both tasks score through [`score_embedded`], the same function the
//! alignment model trains against.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::align::{embed_caption, embed_image, score_embedded, AlignParams, CaptionRecord, Dataset, ImageRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query_id: String,
    /// Candidates by descending score, ties by ascending id.
    pub ranked_candidate_ids: Vec<String>,
    pub scores: Vec<f64>,
    /// 1-based positions of every correct candidate, ascending.
    pub correct_ranks: Vec<usize>,
    /// Best (smallest) entry of `correct_ranks`.
    pub rank_of_correct: usize,
}

/// Ranks `(id, score)` candidates. Errors if none satisfies `is_correct`.
pub fn rank_by_scores(
    query_id: &str,
    candidates: Vec<(String, f64)>,
    is_correct: impl Fn(&str) -> bool,
) -> Result<RankingResult> {
    if candidates.is_empty() {
        return Err(Error::EvalSetup(format!("query `{query_id}`: empty candidate pool")));
    }
    if let Some((id, _)) = candidates.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::Internal(format!("query `{query_id}`: NaN score for `{id}`")));
    }
    let mut ranked = candidates;
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    let correct_ranks: Vec<usize> = ranked
        .iter()
        .enumerate()
        .filter(|(_, (id, _))| is_correct(id))
        .map(|(i, _)| i + 1)
        .collect();
    let Some(&rank_of_correct) = correct_ranks.first() else {
        return Err(Error::EvalSetup(format!("query `{query_id}`: no correct candidate in the pool")));
    };
    let (ranked_candidate_ids, scores) = ranked.into_iter().unzip();
    Ok(RankingResult {
        query_id: query_id.to_string(),
        ranked_candidate_ids,
        scores,
        correct_ranks,
        rank_of_correct,
    })
}

/// Ranks `images` for one caption query.
pub fn image_search(
    caption: &CaptionRecord,
    images: &[ImageRecord],
    params: &AlignParams,
    normalize: bool,
) -> Result<RankingResult> {
    let x = embed_caption(caption, params, normalize)?;
    let candidates = images
        .iter()
        .map(|im| Ok((im.id.clone(), score_embedded(&embed_image(im, params)?, &x, params.h()))))
        .collect::<Result<Vec<_>>>()?;
    rank_by_scores(&caption.id, candidates, |id| id == caption.image_id)
}

/// Ranks `captions` for one image query.
pub fn image_annotation(
    image: &ImageRecord,
    captions: &[CaptionRecord],
    params: &AlignParams,
    normalize: bool,
) -> Result<RankingResult> {
    let y = embed_image(image, params)?;
    let mut candidates = Vec::with_capacity(captions.len());
    for c in captions {
        candidates.push((c.id.clone(), score_embedded(&y, &embed_caption(c, params, normalize)?, params.h())));
    }
    let owner: std::collections::HashMap<&str, &str> =
        captions.iter().map(|c| (c.id.as_str(), c.image_id.as_str())).collect();
    rank_by_scores(&image.id, candidates, |id| owner.get(id) == Some(&image.id.as_str()))
}

/// Fraction of queries whose correct candidate is within the top `k`.
pub fn recall_at_k(results: &[RankingResult], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("recall@k needs k ≥ 1"));
    }
    if results.is_empty() {
        return Err(Error::Input("recall@k over zero queries".into()));
    }
    let hits = results.iter().filter(|r| r.rank_of_correct <= k).count();
    Ok(hits as f64 / results.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query_id: String,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub pool_size: usize,
    pub n_queries: usize,
    pub k: usize,
    pub recall: f64,
    pub ranks: Vec<QueryRank>,
}

impl TaskReport {
    fn new(task: &str, pool_size: usize, k: usize, results: &[RankingResult]) -> Result<Self> {
        Ok(Self {
            task: task.to_string(),
            pool_size,
            n_queries: results.len(),
            k,
            recall: recall_at_k(results, k)?,
            ranks: results
                .iter()
                .map(|r| QueryRank { query_id: r.query_id.clone(), rank: r.rank_of_correct })
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub search: TaskReport,
    pub annotation: TaskReport,
}

impl EvalReport {
    pub fn summary_line(&self) -> String {
        format!(
            "search R@{} = {:.4}, annotation R@{} = {:.4}",
            self.search.k, self.search.recall, self.annotation.k, self.annotation.recall
        )
    }

    /// `task,query_id,rank` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Internal(format!("csv export: {e}"));
        w.write_record(["task", "query_id", "rank"]).map_err(io)?;
        for t in [&self.search, &self.annotation] {
            for q in &t.ranks {
                w.write_record([t.task.as_str(), q.query_id.as_str(), &q.rank.to_string()]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Internal(format!("csv export: {e}")))
    }
}

/// Search (every caption against all images) and annotation (every image
/// against all captions) over one pool, with embeddings computed once.
pub fn evaluate(dataset: &Dataset, params: &AlignParams, normalize: bool, k: usize) -> Result<EvalReport> {
    let h = params.h();
    let ys = dataset.images.iter().map(|im| embed_image(im, params)).collect::<Result<Vec<_>>>()?;
    let xs = dataset
        .captions
        .iter()
        .map(|c| embed_caption(c, params, normalize))
        .collect::<Result<Vec<_>>>()?;
    let mut search = Vec::with_capacity(xs.len());
    for (cap, x) in dataset.captions.iter().zip(&xs) {
        let candidates = dataset.images.iter().zip(&ys).map(|(im, y)| (im.id.clone(), score_embedded(y, x, h))).collect();
        search.push(rank_by_scores(&cap.id, candidates, |id| id == cap.image_id)?);
    }
    let owner: std::collections::HashMap<&str, &str> =
        dataset.captions.iter().map(|c| (c.id.as_str(), c.image_id.as_str())).collect();
    let mut annotation = Vec::with_capacity(ys.len());
    for (im, y) in dataset.images.iter().zip(&ys) {
        let candidates = dataset.captions.iter().zip(&xs).map(|(c, x)| (c.id.clone(), score_embedded(y, x, h))).collect();
        annotation.push(rank_by_scores(&im.id, candidates, |id| owner.get(id) == Some(&im.id.as_str()))?);
    }
    Ok(EvalReport {
        search: TaskReport::new("search", dataset.images.len(), k, &search)?,
        annotation: TaskReport::new("annotation", dataset.captions.len(), k, &annotation)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(rank: usize) -> RankingResult {
        RankingResult {
            query_id: String::new(),
            ranked_candidate_ids: vec![],
            scores: vec![],
            correct_ranks: vec![rank],
            rank_of_correct: rank,
        }
    }

    #[test]
    fn recall_of_listed_ranks() {
        let rs = [result(1), result(11), result(3)];
        assert!((recall_at_k(&rs, 10).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall_at_k(&rs, 11).unwrap(), 1.0);
        assert!(matches!(recall_at_k(&[], 10), Err(Error::Input(_))));
        assert!(matches!(recall_at_k(&rs, 0), Err(Error::Param(_))));
    }

    #[test]
    fn ties_break_by_id_and_minimum_rank_is_reported() {
        let c = vec![("b".to_string(), 1.0), ("a".to_string(), 1.0), ("c".to_string(), 2.0), ("d".to_string(), 0.0)];
        let r = rank_by_scores("q", c, |id| id == "b" || id == "d").unwrap();
        assert_eq!(r.ranked_candidate_ids, ["c", "a", "b", "d"]);
        assert_eq!(r.correct_ranks, [3, 4]);
        assert_eq!(r.rank_of_correct, 3);
    }

    #[test]
    fn missing_truth_is_setup_error() {
        let r = rank_by_scores("q", vec![("a".into(), 0.0)], |_| false);
        assert!(matches!(r, Err(Error::EvalSetup(_))));
    }
}
