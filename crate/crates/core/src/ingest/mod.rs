//! Loading places and trips, snapping trip endpoints to places, and the
//! snapped-trip binary cache.

mod cache;
mod places;
mod snap;
mod trips;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoError;

pub use cache::{read_trip_cache, write_trip_cache, CACHE_MAGIC, CACHE_VERSION};
pub use places::{load_places, read_places, write_places, CategoryTable, Place};
pub use snap::{snap_trips, CheckinCounts, DropReason, DropStats, SnapOutput, DEFAULT_SNAP_RADIUS_M};
pub use trips::{
    format_iso_utc, load_trip_rows, read_trip_rows, write_trips_csv, RawRow, RawTripRecord, TimeZoneSpec,
    TripRowReader, TRIPS_HEADER,
};

/// Dense place index, `0..|N|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaceId(pub u32);

impl PlaceId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(pub u16);

impl CategoryId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A movement between two snapped places. Times are epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Trip {
    pub origin: PlaceId,
    pub dest: PlaceId,
    pub depart: i64,
    pub arrive: i64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: {source}")]
    Coordinate {
        line: u64,
        #[source]
        source: GeoError,
    },
    #[error("line {line}: duplicate external_id `{external_id}`")]
    DuplicateExternalId { line: u64, external_id: String },
    #[error("too many categories (max {max})")]
    TooManyCategories { max: usize },
    #[error("trip cache: {0}")]
    Cache(String),
    #[error("unrecognized time zone `{0}` (expected `UTC` or an offset like `-05:00`)")]
    TimeZone(String),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io { path: path.into(), source }
    }
}
