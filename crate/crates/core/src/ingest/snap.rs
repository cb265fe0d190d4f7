use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IngestError, PlaceId, RawRow, RawTripRecord, Trip};
use crate::geo::GridIndex;

pub const DEFAULT_SNAP_RADIUS_M: f64 = 200.0;

const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MissingCoords,
    InvalidCoords,
    Malformed,
    NoPlaceNearOrigin,
    NoPlaceNearDest,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::MissingCoords,
        DropReason::InvalidCoords,
        DropReason::Malformed,
        DropReason::NoPlaceNearOrigin,
        DropReason::NoPlaceNearDest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::MissingCoords => "missing_coords",
            DropReason::InvalidCoords => "invalid_coords",
            DropReason::Malformed => "malformed",
            DropReason::NoPlaceNearOrigin => "no_place_near_origin",
            DropReason::NoPlaceNearDest => "no_place_near_dest",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Row accounting for one snapping pass. `total == retained + dropped()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropStats {
    pub total: u64,
    pub retained: u64,
    pub missing_coords: u64,
    pub invalid_coords: u64,
    pub malformed: u64,
    pub no_place_near_origin: u64,
    pub no_place_near_dest: u64,
}

impl DropStats {
    pub fn record_drop(&mut self, reason: DropReason) {
        self.total += 1;
        *self.slot(reason) += 1;
    }

    fn slot(&mut self, reason: DropReason) -> &mut u64 {
        match reason {
            DropReason::MissingCoords => &mut self.missing_coords,
            DropReason::InvalidCoords => &mut self.invalid_coords,
            DropReason::Malformed => &mut self.malformed,
            DropReason::NoPlaceNearOrigin => &mut self.no_place_near_origin,
            DropReason::NoPlaceNearDest => &mut self.no_place_near_dest,
        }
    }

    pub fn count(&self, reason: DropReason) -> u64 {
        match reason {
            DropReason::MissingCoords => self.missing_coords,
            DropReason::InvalidCoords => self.invalid_coords,
            DropReason::Malformed => self.malformed,
            DropReason::NoPlaceNearOrigin => self.no_place_near_origin,
            DropReason::NoPlaceNearDest => self.no_place_near_dest,
        }
    }

    pub fn dropped(&self) -> u64 {
        DropReason::ALL.iter().map(|&r| self.count(r)).sum()
    }

    pub fn retention(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.retained as f64 / self.total as f64
        }
    }

    pub fn to_key_value(&self) -> String {
        let mut s = format!("total={}\nretained={}\n", self.total, self.retained);
        for r in DropReason::ALL {
            s.push_str(&format!("{}={}\n", r, self.count(r)));
        }
        s.push_str(&format!("retention={:.6}\n", self.retention()));
        s
    }
}

/// Drop-off count per place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckinCounts {
    pub counts: Vec<u64>,
}

impl CheckinCounts {
    pub fn from_trips(n_places: usize, trips: &[Trip]) -> Self {
        let mut counts = vec![0u64; n_places];
        for t in trips {
            counts[t.dest.index()] += 1;
        }
        CheckinCounts { counts }
    }

    pub fn get(&self, id: PlaceId) -> u64 {
        self.counts[id.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.counts.is_empty() {
            0.0
        } else {
            self.total() as f64 / self.counts.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnapOutput {
    pub trips: Vec<Trip>,
    pub checkins: CheckinCounts,
    pub stats: DropStats,
}

fn snap_one(rec: &RawTripRecord, index: &GridIndex, radius_m: f64) -> Result<Trip, DropReason> {
    let (Some(pickup), Some(dropoff)) = (rec.pickup, rec.dropoff) else {
        return Err(DropReason::MissingCoords);
    };
    let origin = index.nearest_within(pickup, radius_m).ok_or(DropReason::NoPlaceNearOrigin)?.0;
    let dest = index.nearest_within(dropoff, radius_m).ok_or(DropReason::NoPlaceNearDest)?.0;
    Ok(Trip { origin: PlaceId(origin), dest: PlaceId(dest), depart: rec.pickup_time, arrive: rec.dropoff_time })
}

/// Snaps both endpoints of every row to the nearest indexed place within
/// `radius_m`, dropping rows that cannot be snapped.
///
/// Rows are processed in chunks in parallel; output order follows input order.
pub fn snap_trips<I>(rows: I, index: &GridIndex, radius_m: f64) -> Result<SnapOutput, IngestError>
where
    I: IntoIterator<Item = Result<RawRow, IngestError>>,
{
    let mut stats = DropStats::default();
    let mut trips = Vec::new();
    let mut chunk: Vec<RawRow> = Vec::with_capacity(CHUNK);
    let mut rows = rows.into_iter();

    loop {
        chunk.clear();
        for row in rows.by_ref().take(CHUNK) {
            chunk.push(row?);
        }
        if chunk.is_empty() {
            break;
        }
        let snapped: Vec<Result<Trip, DropReason>> = chunk
            .par_iter()
            .map(|row| match row {
                RawRow::Record(rec) => snap_one(rec, index, radius_m),
                RawRow::Rejected(r) => Err(*r),
            })
            .collect();
        for s in snapped {
            match s {
                Ok(t) => {
                    stats.total += 1;
                    stats.retained += 1;
                    trips.push(t);
                }
                Err(r) => stats.record_drop(r),
            }
        }
    }
    let checkins = CheckinCounts::from_trips(index.len(), &trips);
    Ok(SnapOutput { trips, checkins, stats })
}
