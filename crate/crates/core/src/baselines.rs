//! Spatial-context baseline corpora.
//!
//! Every place takes its `k` nearest places as contexts. Each
//! `(center, context)` tuple is then repeated `β` times in the corpus, where
//! `β` depends on the chosen model:
//!
//! | model    | β before rounding up                         |
//! |----------|----------------------------------------------|
//! | checkin  | `1 + ln(1 + P_j)`                            |
//! | distance | `(1 + mean_k P_k) / (1 + d^α)`               |
//! | combined | `(1 + ln(1 + P_j)) / (1 + d^α)`              |
//! | itdl     | `ω A + (1 - ω) U`                            |
//!
//! `P_j` is the drop-off count of the context place and `d` the center to
//! context distance. For ITDL, contexts of a center are grouped into distance
//! bins of width `h`; within the bin holding `j`,
//! `A = -log2(1 - P_t / (1 + Σ_types P))` with `P_t` the bin's check-ins of
//! `j`'s type, and `U = -log2(F_t)` with `F_t` the share of the bin's contexts
//! that have `j`'s type.
//!
//! `β` is rounded up, then clamped to `[1, beta_ceiling]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GridIndex;
use crate::ingest::{CategoryId, CheckinCounts, Place, PlaceId};
use crate::pairs::TrainingPair;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("unknown baseline `{0}` (expected checkin, distance, combined or itdl)")]
    UnknownModel(String),
    #[error("invalid baseline config: {0}")]
    InvalidConfig(String),
    #[error("itdl needs type statistics")]
    MissingTypeStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineModel {
    Checkin,
    Distance,
    Combined,
    Itdl,
}

impl BaselineModel {
    pub const ALL: [BaselineModel; 4] =
        [BaselineModel::Checkin, BaselineModel::Distance, BaselineModel::Combined, BaselineModel::Itdl];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineModel::Checkin => "checkin",
            BaselineModel::Distance => "distance",
            BaselineModel::Combined => "combined",
            BaselineModel::Itdl => "itdl",
        }
    }
}

impl fmt::Display for BaselineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineModel {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineModel::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| BaselineError::UnknownModel(s.to_owned()))
    }
}

/// Unit `d` is expressed in inside `1 + d^α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceUnit {
    Meters,
    #[default]
    Kilometers,
}

impl DistanceUnit {
    fn convert(self, meters: f64) -> f64 {
        match self {
            DistanceUnit::Meters => meters,
            DistanceUnit::Kilometers => meters / 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatialContextConfig {
    pub k_neighbors: usize,
    pub alpha: f64,
    pub bin_width_m: f64,
    pub omega: f64,
    pub model: BaselineModel,
    pub beta_ceiling: u32,
    pub distance_unit: DistanceUnit,
}

impl Default for SpatialContextConfig {
    fn default() -> Self {
        SpatialContextConfig {
            k_neighbors: 10,
            alpha: 1.0,
            bin_width_m: 30.0,
            omega: 0.4,
            model: BaselineModel::Distance,
            beta_ceiling: 1000,
            distance_unit: DistanceUnit::Kilometers,
        }
    }
}

impl SpatialContextConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: &str| Err(BaselineError::InvalidConfig(m.into()));
        if self.k_neighbors == 0 {
            return bad("k_neighbors must be at least 1");
        }
        if !(self.bin_width_m > 0.0 && self.bin_width_m.is_finite()) {
            return bad("bin_width_m must be positive");
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return bad("omega must lie in [0, 1]");
        }
        if !self.alpha.is_finite() {
            return bad("alpha must be finite");
        }
        if self.beta_ceiling == 0 {
            return bad("beta_ceiling must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialContext {
    pub center: PlaceId,
    pub context: PlaceId,
    pub distance_m: f64,
}

/// The `k` nearest other places of every place, ordered by center then by
/// (distance, id).
pub fn spatial_contexts(places: &[Place], index: &GridIndex, k: usize) -> Vec<SpatialContext> {
    places
        .par_iter()
        .map(|p| {
            index
                .k_nearest(p.location, k, Some(p.id.0))
                .into_iter()
                .map(|(j, d)| SpatialContext { center: p.id, context: PlaceId(j), distance_m: d })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Context-type histogram of one (center, distance bin).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinStats {
    pub n_contexts: u32,
    pub type_counts: BTreeMap<CategoryId, u32>,
    pub type_checkins: BTreeMap<CategoryId, u64>,
}

impl BinStats {
    pub fn total_checkins(&self) -> u64 {
        self.type_checkins.values().sum()
    }

    /// Share of this bin's contexts that have type `t`.
    pub fn frequency(&self, t: CategoryId) -> f64 {
        if self.n_contexts == 0 {
            0.0
        } else {
            f64::from(self.type_counts.get(&t).copied().unwrap_or(0)) / f64::from(self.n_contexts)
        }
    }
}

/// Statistics behind the ITDL factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeStats {
    pub bin_width_m: f64,
    pub n_types: usize,
    /// Drop-offs per type over all places.
    pub type_totals: Vec<u64>,
    bins: HashMap<(PlaceId, u32), BinStats>,
}

impl TypeStats {
    pub fn bin_of(&self, distance_m: f64) -> u32 {
        (distance_m / self.bin_width_m).floor() as u32
    }

    pub fn bin(&self, center: PlaceId, bin: u32) -> Option<&BinStats> {
        self.bins.get(&(center, bin))
    }

    /// Activity `A` of type `t` in `(center, bin)`.
    pub fn activity(&self, center: PlaceId, bin: u32, t: CategoryId) -> f64 {
        let (p_t, total) = match self.bin(center, bin) {
            Some(b) => (b.type_checkins.get(&t).copied().unwrap_or(0), b.total_checkins()),
            None => (0, 0),
        };
        -(1.0 - p_t as f64 / (1.0 + total as f64)).log2()
    }

    /// Uniqueness `U` of type `t` in `(center, bin)`. When `t` is absent from
    /// the bin, `log2(contexts in bin + n_types)` stands in for `-log2(0)`.
    pub fn uniqueness(&self, center: PlaceId, bin: u32, t: CategoryId) -> f64 {
        let b = self.bin(center, bin);
        let f = b.map_or(0.0, |b| b.frequency(t));
        if f > 0.0 {
            -f.log2()
        } else {
            let n = b.map_or(0, |b| b.n_contexts) as f64;
            (n + self.n_types as f64).log2()
        }
    }
}

/// Per (center, bin) histograms over the given spatial contexts.
pub fn type_stats(
    places: &[Place],
    counts: &CheckinCounts,
    contexts: &[SpatialContext],
    n_types: usize,
    bin_width_m: f64,
) -> TypeStats {
    let mut type_totals = vec![0u64; n_types];
    for p in places {
        type_totals[p.category.index()] += counts.get(p.id);
    }
    let mut stats = TypeStats { bin_width_m, n_types, type_totals, bins: HashMap::new() };
    for c in contexts {
        let t = places[c.context.index()].category;
        let bin = stats.bin_of(c.distance_m);
        let b = stats.bins.entry((c.center, bin)).or_default();
        b.n_contexts += 1;
        *b.type_counts.entry(t).or_default() += 1;
        *b.type_checkins.entry(t).or_default() += counts.get(c.context);
    }
    stats
}

pub fn beta_checkin_raw(p_j: u64) -> f64 {
    1.0 + (p_j as f64).ln_1p()
}

pub fn beta_distance_raw(mean_checkins: f64, d: f64, alpha: f64) -> f64 {
    (1.0 + mean_checkins) / (1.0 + d.powf(alpha))
}

pub fn beta_combined_raw(p_j: u64, d: f64, alpha: f64) -> f64 {
    beta_checkin_raw(p_j) / (1.0 + d.powf(alpha))
}

pub fn beta_itdl_raw(activity: f64, uniqueness: f64, omega: f64) -> f64 {
    omega * activity + (1.0 - omega) * uniqueness
}

/// Rounds up and clamps into `[1, ceiling]`.
pub fn finalize_beta(raw: f64, ceiling: u32) -> u32 {
    let c = raw.ceil();
    if c.is_nan() || c <= 1.0 {
        1
    } else if c >= f64::from(ceiling) {
        ceiling
    } else {
        c as u32
    }
}

/// Inputs shared by every β evaluation of one corpus.
#[derive(Debug, Clone, Copy)]
pub struct BetaInputs<'a> {
    pub places: &'a [Place],
    pub counts: &'a CheckinCounts,
    pub stats: Option<&'a TypeStats>,
}

pub fn beta(cfg: &SpatialContextConfig, ctx: &SpatialContext, inputs: &BetaInputs<'_>) -> Result<u32, BaselineError> {
    let d = cfg.distance_unit.convert(ctx.distance_m);
    let p_j = inputs.counts.get(ctx.context);
    let raw = match cfg.model {
        BaselineModel::Checkin => beta_checkin_raw(p_j),
        BaselineModel::Distance => beta_distance_raw(inputs.counts.mean(), d, cfg.alpha),
        BaselineModel::Combined => beta_combined_raw(p_j, d, cfg.alpha),
        BaselineModel::Itdl => {
            let stats = inputs.stats.ok_or(BaselineError::MissingTypeStats)?;
            let bin = stats.bin_of(ctx.distance_m);
            let t = inputs.places[ctx.context.index()].category;
            beta_itdl_raw(stats.activity(ctx.center, bin, t), stats.uniqueness(ctx.center, bin, t), cfg.omega)
        }
    };
    Ok(finalize_beta(raw, cfg.beta_ceiling))
}

/// Expands every context into `β` identical pairs, in context order.
pub fn baseline_pairs(
    contexts: &[SpatialContext],
    cfg: &SpatialContextConfig,
    inputs: &BetaInputs<'_>,
) -> Result<Vec<TrainingPair>, BaselineError> {
    cfg.validate()?;
    let betas: Vec<u32> = contexts.par_iter().map(|c| beta(cfg, c, inputs)).collect::<Result<_, _>>()?;
    let total: usize = betas.iter().map(|&b| b as usize).sum();
    let mut out = Vec::with_capacity(total);
    for (c, &b) in contexts.iter().zip(&betas) {
        out.extend(std::iter::repeat_n(TrainingPair::new(c.center, c.context), b as usize));
    }
    Ok(out)
}

/// Everything needed to build a baseline corpus from places and check-ins.
pub fn build_baseline_corpus(
    places: &[Place],
    n_types: usize,
    index: &GridIndex,
    counts: &CheckinCounts,
    cfg: &SpatialContextConfig,
) -> Result<Vec<TrainingPair>, BaselineError> {
    cfg.validate()?;
    let contexts = spatial_contexts(places, index, cfg.k_neighbors);
    let stats =
        (cfg.model == BaselineModel::Itdl).then(|| type_stats(places, counts, &contexts, n_types, cfg.bin_width_m));
    baseline_pairs(&contexts, cfg, &BetaInputs { places, counts, stats: stats.as_ref() })
}
