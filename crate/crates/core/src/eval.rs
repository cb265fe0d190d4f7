//! Embedding quality metrics and the rank-frequency power-law fit.
//!
//! Similarity is cosine; distance is `1 - cosine`. Match rate is leave-one-out
//! nearest-neighbour category agreement over the evaluation set. Silhouette
//! uses categories as clusters; singleton members score 0.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CategoryId, CategoryTable, PlaceId, Trip};
use crate::seed::stream_rng;
use crate::trainer::Embeddings;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 evaluated places, have {0}")]
    TooFewPlaces(usize),
    #[error("silhouette needs at least 2 categories, have {0}")]
    TooFewCategories(usize),
    #[error("power-law fit needs at least 3 distinct ranks, have {0}")]
    TooFewPoints(usize),
    #[error("holdout fraction must lie in (0, 1], got {0}")]
    Holdout(f64),
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine from a dot product and two norms. Every metric routes through here
/// so that distance is exactly `1 - similarity`.
#[inline]
fn cosine_from_parts(dot: f64, na: f64, nb: f64) -> f64 {
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EvalError::ZeroVector);
    }
    Ok(cosine_from_parts(dot(a, b), na, nb))
}

pub fn embedding_distance(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    cosine_sim(a, b).map(|s| 1.0 - s)
}

/// Vectors and labels of the places under evaluation, with precomputed norms.
struct EvalView<'a> {
    ids: Vec<PlaceId>,
    rows: Vec<&'a [f64]>,
    norms: Vec<f64>,
    labels: Vec<CategoryId>,
}

impl<'a> EvalView<'a> {
    fn new(vectors: &'a Embeddings, eval_set: &[PlaceId], categories: &[CategoryId]) -> Result<Self, EvalError> {
        let mut ids = eval_set.to_vec();
        ids.sort();
        ids.dedup();
        let rows: Vec<&[f64]> = ids.iter().map(|id| vectors.row(id.index())).collect();
        let norms: Vec<f64> = rows.iter().map(|r| norm(r)).collect();
        if norms.contains(&0.0) {
            return Err(EvalError::ZeroVector);
        }
        let labels = ids.iter().map(|id| categories[id.index()]).collect();
        Ok(EvalView { ids, rows, norms, labels })
    }

    #[inline]
    fn sim(&self, i: usize, j: usize) -> f64 {
        cosine_from_parts(dot(self.rows[i], self.rows[j]), self.norms[i], self.norms[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub matched: usize,
    pub n_evaluated: usize,
    pub rate: f64,
    /// `(place, most similar other place)` in place-id order.
    pub neighbors: Vec<(PlaceId, PlaceId)>,
    pub matched_ids: Vec<PlaceId>,
}

/// Leave-one-out nearest neighbour by cosine similarity among `eval_set`
/// (ties to the smaller id); a place matches when its neighbour shares its
/// category. `categories` is indexed by place id.
pub fn match_rate(
    vectors: &Embeddings,
    eval_set: &[PlaceId],
    categories: &[CategoryId],
) -> Result<MatchResult, EvalError> {
    let view = EvalView::new(vectors, eval_set, categories)?;
    let n = view.ids.len();
    if n < 2 {
        return Err(EvalError::TooFewPlaces(n));
    }
    let nearest: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = usize::MAX;
            let mut best_sim = f64::NEG_INFINITY;
            for j in 0..n {
                if j != i {
                    let s = view.sim(i, j);
                    // ids ascend with j, so strict > keeps the smallest id on ties
                    if s > best_sim {
                        best_sim = s;
                        best = j;
                    }
                }
            }
            best
        })
        .collect();
    let neighbors: Vec<_> = nearest.iter().enumerate().map(|(i, &j)| (view.ids[i], view.ids[j])).collect();
    let matched_ids: Vec<_> = nearest
        .iter()
        .enumerate()
        .filter(|&(i, &j)| view.labels[i] == view.labels[j])
        .map(|(i, _)| view.ids[i])
        .collect();
    Ok(MatchResult {
        matched: matched_ids.len(),
        n_evaluated: n,
        rate: matched_ids.len() as f64 / n as f64,
        neighbors,
        matched_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteResult {
    pub mean: f64,
    pub per_category: BTreeMap<CategoryId, f64>,
    /// `s(i)` in place-id order.
    pub scores: Vec<(PlaceId, f64)>,
}

pub fn silhouette(
    vectors: &Embeddings,
    eval_set: &[PlaceId],
    categories: &[CategoryId],
) -> Result<SilhouetteResult, EvalError> {
    let view = EvalView::new(vectors, eval_set, categories)?;
    let n = view.ids.len();
    let mut clusters: Vec<CategoryId> = view.labels.clone();
    clusters.sort();
    clusters.dedup();
    if clusters.len() < 2 {
        return Err(EvalError::TooFewCategories(clusters.len()));
    }
    let slot: BTreeMap<CategoryId, usize> = clusters.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let label_slot: Vec<usize> = view.labels.iter().map(|c| slot[c]).collect();
    let mut sizes = vec![0usize; clusters.len()];
    for &k in &label_slot {
        sizes[k] += 1;
    }

    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = label_slot[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; clusters.len()];
            for j in 0..n {
                if j != i {
                    sums[label_slot[j]] += 1.0 - view.sim(i, j);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..clusters.len())
                .filter(|&k| k != own)
                .map(|k| sums[k] / sizes[k] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();

    let mut per_category = BTreeMap::new();
    for (k, &c) in clusters.iter().enumerate() {
        let (s, cnt) = scores
            .iter()
            .zip(&label_slot)
            .filter(|(_, &l)| l == k)
            .fold((0.0, 0usize), |(s, c), (x, _)| (s + x, c + 1));
        per_category.insert(c, s / cnt as f64);
    }
    Ok(SilhouetteResult {
        mean: scores.iter().sum::<f64>() / n as f64,
        per_category,
        scores: view.ids.iter().copied().zip(scores).collect(),
    })
}

/// Places that occur in at least one trip, as origin or destination.
pub fn default_eval_set(n_places: usize, trips: &[Trip]) -> Vec<PlaceId> {
    let mut seen = vec![false; n_places];
    for t in trips {
        seen[t.origin.index()] = true;
        seen[t.dest.index()] = true;
    }
    (0..n_places as u32).map(PlaceId).filter(|id| seen[id.index()]).collect()
}

/// Seeded random subset holding `fraction` of `set` (at least one element).
pub fn holdout_subset(set: &[PlaceId], fraction: f64, seed: u64) -> Result<Vec<PlaceId>, EvalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::Holdout(fraction));
    }
    let mut v = set.to_vec();
    v.shuffle(&mut stream_rng(seed, "holdout", 0));
    let keep = ((set.len() as f64 * fraction).round() as usize).clamp(1.min(set.len()), set.len());
    v.truncate(keep);
    v.sort();
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Set when log-frequency has zero variance and R² is undefined.
    pub degenerate: bool,
    pub p_value_note: String,
}

/// Trip-origin counts, descending.
pub fn origin_rank_frequency(trips: &[Trip]) -> Vec<u64> {
    let n = trips.iter().map(|t| t.origin.index() + 1).max().unwrap_or(0);
    let mut counts = vec![0u64; n];
    for t in trips {
        counts[t.origin.index()] += 1;
    }
    counts.retain(|&c| c > 0);
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
}

/// Least-squares fit of `ln(frequency)` on `ln(rank)`; zero counts are skipped.
pub fn power_law_fit_frequencies(frequencies: &[u64]) -> Result<PowerLawFit, EvalError> {
    let mut f: Vec<u64> = frequencies.iter().copied().filter(|&c| c > 0).collect();
    f.sort_unstable_by(|a, b| b.cmp(a));
    let n = f.len();
    if n < 3 {
        return Err(EvalError::TooFewPoints(n));
    }
    let xs: Vec<f64> = (1..=n).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = f.iter().map(|&c| (c as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let degenerate = syy == 0.0;
    let r_squared = if degenerate {
        0.0
    } else {
        let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
        degenerate,
        p_value_note: "p-value not computed; slope and R² only".into(),
    })
}

pub fn power_law_fit(trips: &[Trip]) -> Result<PowerLawFit, EvalError> {
    power_law_fit_frequencies(&origin_rank_frequency(trips))
}

pub fn write_rank_frequency_csv<W: Write>(frequencies: &[u64], w: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["rank", "frequency"])?;
    for (r, f) in frequencies.iter().enumerate() {
        w.write_record([(r + 1).to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub match_rate: f64,
    pub matched: usize,
    pub n_evaluated: usize,
    pub zero_vectors_excluded: usize,
    /// Absent when fewer than two categories are evaluated.
    pub silhouette_mean: Option<f64>,
    pub per_category_silhouette: BTreeMap<String, f64>,
    pub power_law: Option<PowerLawFit>,
}

impl EvalReport {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("match_rate={:.6}\n", self.match_rate));
        s.push_str(&format!("matched={}\n", self.matched));
        s.push_str(&format!("n_evaluated={}\n", self.n_evaluated));
        s.push_str(&format!("zero_vectors_excluded={}\n", self.zero_vectors_excluded));
        match self.silhouette_mean {
            Some(m) => s.push_str(&format!("silhouette_mean={m:.6}\n")),
            None => s.push_str("silhouette_mean=none\n"),
        }
        for (label, v) in &self.per_category_silhouette {
            s.push_str(&format!("silhouette[{label}]={v:.6}\n"));
        }
        if let Some(p) = &self.power_law {
            s.push_str(&format!(
                "power_law_slope={:.6}\npower_law_intercept={:.6}\npower_law_r_squared={:.6}\npower_law_degenerate={}\n",
                p.slope, p.intercept, p.r_squared, p.degenerate
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Match rate and silhouette over `eval_set`, skipping zero vectors.
pub fn evaluate(
    vectors: &Embeddings,
    eval_set: &[PlaceId],
    categories: &[CategoryId],
    table: &CategoryTable,
) -> Result<EvalReport, EvalError> {
    let (kept, zero): (Vec<PlaceId>, Vec<PlaceId>) =
        eval_set.iter().partition(|id| vectors.row(id.index()).iter().any(|&x| x != 0.0));
    let m = match_rate(vectors, &kept, categories)?;
    let sil = match silhouette(vectors, &kept, categories) {
        Ok(s) => Some(s),
        Err(EvalError::TooFewCategories(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        match_rate: m.rate,
        matched: m.matched,
        n_evaluated: m.n_evaluated,
        zero_vectors_excluded: zero.len(),
        silhouette_mean: sil.as_ref().map(|s| s.mean),
        per_category_silhouette: sil
            .map(|s| s.per_category.into_iter().map(|(c, v)| (table.label(c).to_owned(), v)).collect())
            .unwrap_or_default(),
        power_law: None,
    })
}
