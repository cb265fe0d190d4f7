//! Training pairs from snapped trips.
//!
//! * Trip model: each trip `o -> d` yields the pair `(o, d)`.
//! * OD model: for each trip `i`, every other trip `j` that ends at the same
//!   place with `|arrive_i - arrive_j| <= window` yields `(o_i, o_j)`.
//!
//! OD pairs are generated per destination: trips are bucketed by destination,
//! sorted by arrival time, and each trip's contexts are the contiguous run of
//! the bucket that falls inside its window. Hub destinations can produce very
//! large context sets, so each center is capped at `max_contexts_per_center`
//! contexts drawn uniformly without replacement.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{PlaceId, Trip};
use crate::seed::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingPair {
    pub center: PlaceId,
    pub context: PlaceId,
}

impl TrainingPair {
    pub fn new(center: PlaceId, context: PlaceId) -> Self {
        TrainingPair { center, context }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PairsError {
    #[error("OD window must be positive, got {0} s")]
    Window(i64),
    #[error("max contexts per center must be at least 1")]
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdConfig {
    pub window_seconds: i64,
    /// `None` disables subsampling.
    pub max_contexts_per_center: Option<usize>,
    pub seed: u64,
}

impl Default for OdConfig {
    fn default() -> Self {
        OdConfig { window_seconds: 3600, max_contexts_per_center: Some(100), seed: 0 }
    }
}

impl OdConfig {
    pub fn validate(&self) -> Result<(), PairsError> {
        if self.window_seconds <= 0 {
            return Err(PairsError::Window(self.window_seconds));
        }
        if self.max_contexts_per_center == Some(0) {
            return Err(PairsError::Cap);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripPairs {
    pub pairs: Vec<TrainingPair>,
    pub self_loops: u64,
}

/// One `(origin, dest)` pair per trip; self-loops are counted and skipped.
pub fn trip_pairs(trips: &[Trip]) -> TripPairs {
    let mut out = TripPairs::default();
    out.pairs.reserve(trips.len());
    for t in trips {
        if t.origin == t.dest {
            out.self_loops += 1;
        } else {
            out.pairs.push(TrainingPair::new(t.origin, t.dest));
        }
    }
    out
}

/// Trips grouped by destination and sorted by arrival, with each trip's
/// window precomputed as a half-open range into its bucket.
#[derive(Debug, Clone)]
pub struct OdIndex {
    buckets: Vec<OdBucket>,
    window_seconds: i64,
}

#[derive(Debug, Clone)]
struct OdBucket {
    dest: PlaceId,
    origins: Vec<PlaceId>,
    windows: Vec<(u32, u32)>,
}

impl OdBucket {
    fn context_count(&self, pos: usize) -> usize {
        let (lo, hi) = self.windows[pos];
        (hi - lo) as usize - 1
    }
}

impl OdIndex {
    pub fn build(trips: &[Trip], window_seconds: i64) -> Self {
        let mut order: Vec<u32> = (0..trips.len() as u32).collect();
        order.sort_by_key(|&i| {
            let t = &trips[i as usize];
            (t.dest, t.arrive, i)
        });
        let buckets = order
            .chunk_by(|&a, &b| trips[a as usize].dest == trips[b as usize].dest)
            .map(|run| {
                let times: Vec<i64> = run.iter().map(|&i| trips[i as usize].arrive).collect();
                let mut windows = Vec::with_capacity(run.len());
                let (mut lo, mut hi) = (0usize, 0usize);
                for (p, &t) in times.iter().enumerate() {
                    while times[lo] < t.saturating_sub(window_seconds) {
                        lo += 1;
                    }
                    hi = hi.max(p + 1);
                    while hi < times.len() && times[hi] <= t.saturating_add(window_seconds) {
                        hi += 1;
                    }
                    windows.push((lo as u32, hi as u32));
                }
                OdBucket {
                    dest: trips[run[0] as usize].dest,
                    origins: run.iter().map(|&i| trips[i as usize].origin).collect(),
                    windows,
                }
            })
            .collect();
        OdIndex { buckets, window_seconds }
    }

    pub fn window_seconds(&self) -> i64 {
        self.window_seconds
    }

    /// Uncapped number of OD pairs.
    pub fn full_pair_count(&self) -> usize {
        self.pair_count(None)
    }

    pub fn pair_count(&self, cap: Option<usize>) -> usize {
        self.buckets
            .iter()
            .map(|b| {
                (0..b.origins.len())
                    .map(|p| {
                        let n = b.context_count(p);
                        cap.map_or(n, |c| n.min(c))
                    })
                    .sum::<usize>()
            })
            .sum()
    }

    /// Pairs for one epoch, unshuffled: buckets in destination order, trips in
    /// arrival order. Subsampling draws from a stream keyed by (seed, epoch,
    /// destination), so the result does not depend on thread count.
    pub fn pairs(&self, cap: Option<usize>, seed: u64, epoch: u32) -> Vec<TrainingPair> {
        let per_bucket: Vec<Vec<TrainingPair>> = self
            .buckets
            .par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed, "od-contexts", (u64::from(epoch) << 32) | u64::from(b.dest.0));
                let mut out = Vec::new();
                for (p, &center) in b.origins.iter().enumerate() {
                    let (lo, hi) = b.windows[p];
                    let (lo, hi) = (lo as usize, hi as usize);
                    let n = hi - lo - 1;
                    // context k of this center is bucket slot lo + k, skipping the center itself
                    let slot = |k: usize| if lo + k < p { lo + k } else { lo + k + 1 };
                    match cap {
                        Some(c) if n > c => {
                            for k in index::sample(&mut rng, n, c) {
                                out.push(TrainingPair::new(center, b.origins[slot(k)]));
                            }
                        }
                        _ => {
                            for k in 0..n {
                                out.push(TrainingPair::new(center, b.origins[slot(k)]));
                            }
                        }
                    }
                }
                out
            })
            .collect();
        per_bucket.concat()
    }
}

/// OD pairs for `epoch` (unshuffled).
pub fn od_pairs(trips: &[Trip], cfg: &OdConfig, epoch: u32) -> Result<Vec<TrainingPair>, PairsError> {
    cfg.validate()?;
    Ok(OdIndex::build(trips, cfg.window_seconds).pairs(cfg.max_contexts_per_center, cfg.seed, epoch))
}

/// A corpus that can be regenerated for every epoch. The pair count must not
/// change between epochs so the learning-rate schedule is known up front.
pub trait PairSource: Sync {
    fn pairs_per_epoch(&self) -> usize;
    /// Shuffled pairs for `epoch`.
    fn epoch_pairs(&self, epoch: u32) -> Vec<TrainingPair>;
}

/// Fixed pair list, reshuffled each epoch.
#[derive(Debug, Clone)]
pub struct StaticPairs {
    pairs: Vec<TrainingPair>,
    seed: u64,
}

impl StaticPairs {
    pub fn new(pairs: Vec<TrainingPair>, seed: u64) -> Self {
        StaticPairs { pairs, seed }
    }

    pub fn pairs(&self) -> &[TrainingPair] {
        &self.pairs
    }
}

impl PairSource for StaticPairs {
    fn pairs_per_epoch(&self) -> usize {
        self.pairs.len()
    }

    fn epoch_pairs(&self, epoch: u32) -> Vec<TrainingPair> {
        let mut p = self.pairs.clone();
        p.shuffle(&mut stream_rng(self.seed, "shuffle", u64::from(epoch)));
        p
    }
}

/// OD corpus whose capped contexts are resampled every epoch.
#[derive(Debug, Clone)]
pub struct OdPairSource {
    index: OdIndex,
    cap: Option<usize>,
    seed: u64,
}

impl OdPairSource {
    pub fn new(trips: &[Trip], cfg: &OdConfig) -> Result<Self, PairsError> {
        cfg.validate()?;
        Ok(OdPairSource {
            index: OdIndex::build(trips, cfg.window_seconds),
            cap: cfg.max_contexts_per_center,
            seed: cfg.seed,
        })
    }

    pub fn index(&self) -> &OdIndex {
        &self.index
    }
}

impl PairSource for OdPairSource {
    fn pairs_per_epoch(&self) -> usize {
        self.index.pair_count(self.cap)
    }

    fn epoch_pairs(&self, epoch: u32) -> Vec<TrainingPair> {
        let mut p = self.index.pairs(self.cap, self.seed, epoch);
        p.shuffle(&mut stream_rng(self.seed, "shuffle", u64::from(epoch)));
        p
    }
}

pub fn write_pairs_csv<W: Write>(pairs: &[TrainingPair], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["center_id", "context_id"])?;
    for p in pairs {
        w.write_record([p.center.0.to_string(), p.context.0.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
