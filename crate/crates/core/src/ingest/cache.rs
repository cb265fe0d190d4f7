//! Snapped-trip binary cache.
//!
//! Layout (little-endian): 8-byte magic, `u32` version, `u32` record size,
//! then fixed 24-byte records `(u32 origin, u32 dest, i64 depart, i64 arrive)`.

use std::io::{Read, Write};

use super::{IngestError, PlaceId, Trip};

pub const CACHE_MAGIC: [u8; 8] = *b"PLMVTRIP";
pub const CACHE_VERSION: u32 = 1;
const RECORD_SIZE: usize = 24;

pub fn write_trip_cache<W: Write>(trips: &[Trip], mut w: W) -> std::io::Result<()> {
    w.write_all(&CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(RECORD_SIZE as u32).to_le_bytes())?;
    let mut buf = [0u8; RECORD_SIZE];
    for t in trips {
        buf[0..4].copy_from_slice(&t.origin.0.to_le_bytes());
        buf[4..8].copy_from_slice(&t.dest.0.to_le_bytes());
        buf[8..16].copy_from_slice(&t.depart.to_le_bytes());
        buf[16..24].copy_from_slice(&t.arrive.to_le_bytes());
        w.write_all(&buf)?;
    }
    w.flush()
}

/// Reads a cache written by [`write_trip_cache`]. Ids are checked against
/// `n_places` when given.
pub fn read_trip_cache<R: Read>(mut r: R, n_places: Option<usize>) -> Result<Vec<Trip>, IngestError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| IngestError::io("<trip cache>", e))?;
    if bytes.len() < 16 || bytes[..8] != CACHE_MAGIC {
        return Err(IngestError::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(IngestError::Cache(format!("unsupported version {version}")));
    }
    let rs = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if rs != RECORD_SIZE || body.len() % RECORD_SIZE != 0 {
        return Err(IngestError::Cache("truncated or mis-sized records".into()));
    }
    let mut trips = Vec::with_capacity(body.len() / RECORD_SIZE);
    for rec in body.chunks_exact(RECORD_SIZE) {
        let t = Trip {
            origin: PlaceId(u32::from_le_bytes(rec[0..4].try_into().unwrap())),
            dest: PlaceId(u32::from_le_bytes(rec[4..8].try_into().unwrap())),
            depart: i64::from_le_bytes(rec[8..16].try_into().unwrap()),
            arrive: i64::from_le_bytes(rec[16..24].try_into().unwrap()),
        };
        if let Some(n) = n_places {
            if t.origin.index() >= n || t.dest.index() >= n {
                return Err(IngestError::Cache(format!("place id out of range in record {}", trips.len())));
            }
        }
        trips.push(t);
    }
    Ok(trips)
}
