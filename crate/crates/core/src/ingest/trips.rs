use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};

use super::places::check_header;
use super::{DropReason, IngestError};
use crate::geo::GeoPoint;

pub const TRIPS_HEADER: [&str; 6] =
    ["pickup_datetime", "dropoff_datetime", "pickup_lon", "pickup_lat", "dropoff_lon", "dropoff_lat"];

/// One parsed trip row. Coordinates are `None` when either component is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawTripRecord {
    pub pickup: Option<GeoPoint>,
    pub dropoff: Option<GeoPoint>,
    pub pickup_time: i64,
    pub dropoff_time: i64,
}

/// A trips CSV row: either a usable record or the reason it was rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawRow {
    Record(RawTripRecord),
    Rejected(DropReason),
}

/// Zone applied to ISO-8601 datetimes that carry no offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeZoneSpec(pub FixedOffset);

impl Default for TimeZoneSpec {
    fn default() -> Self {
        TimeZoneSpec(FixedOffset::east_opt(0).unwrap())
    }
}

impl FromStr for TimeZoneSpec {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("utc") || t == "Z" {
            return Ok(TimeZoneSpec::default());
        }
        let bad = || IngestError::TimeZone(s.to_owned());
        let (sign, rest) = match t.as_bytes().first() {
            Some(b'+') => (1, &t[1..]),
            Some(b'-') => (-1, &t[1..]),
            _ => return Err(bad()),
        };
        let digits: String = rest.chars().filter(|c| *c != ':').collect();
        if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let h: i32 = digits[..2].parse().map_err(|_| bad())?;
        let m: i32 = digits[2..].parse().map_err(|_| bad())?;
        if m >= 60 {
            return Err(bad());
        }
        FixedOffset::east_opt(sign * (h * 3600 + m * 60)).map(TimeZoneSpec).ok_or_else(bad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimeFormat {
    Epoch,
    Iso,
}

/// Streaming reader over a trips CSV. Dirty rows come back as
/// [`RawRow::Rejected`]; only I/O failures and a wrong header are errors.
pub struct TripRowReader<R: Read> {
    rdr: csv::Reader<R>,
    record: csv::StringRecord,
    tz: TimeZoneSpec,
    formats: [Option<TimeFormat>; 2],
}

impl<R: Read> TripRowReader<R> {
    pub fn new(reader: R, tz: TimeZoneSpec) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
        check_header(rdr.headers()?, &TRIPS_HEADER)?;
        Ok(TripRowReader { rdr, record: csv::StringRecord::new(), tz, formats: [None, None] })
    }

    fn parse_time(&mut self, col: usize, s: &str) -> Option<i64> {
        if s.is_empty() {
            return None;
        }
        let fmt = *self.formats[col].get_or_insert_with(|| {
            if s.parse::<i64>().is_ok() {
                TimeFormat::Epoch
            } else {
                TimeFormat::Iso
            }
        });
        match fmt {
            TimeFormat::Epoch => s.parse().ok(),
            TimeFormat::Iso => parse_iso(s, self.tz),
        }
    }

    fn parse_current(&mut self) -> RawRow {
        let rec = std::mem::take(&mut self.record);
        let row = self.classify(&rec);
        self.record = rec;
        row
    }

    fn classify(&mut self, rec: &csv::StringRecord) -> RawRow {
        if rec.len() != TRIPS_HEADER.len() {
            return RawRow::Rejected(DropReason::Malformed);
        }
        let (Some(pickup_time), Some(dropoff_time)) = (self.parse_time(0, &rec[0]), self.parse_time(1, &rec[1])) else {
            return RawRow::Rejected(DropReason::Malformed);
        };
        let pickup = match point(&rec[2], &rec[3]) {
            Ok(p) => p,
            Err(r) => return RawRow::Rejected(r),
        };
        let dropoff = match point(&rec[4], &rec[5]) {
            Ok(p) => p,
            Err(r) => return RawRow::Rejected(r),
        };
        RawRow::Record(RawTripRecord { pickup, dropoff, pickup_time, dropoff_time })
    }
}

impl<R: Read> Iterator for TripRowReader<R> {
    type Item = Result<RawRow, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rdr.read_record(&mut self.record) {
            Ok(true) => Some(Ok(self.parse_current())),
            Ok(false) => None,
            Err(e) if e.is_io_error() => Some(Err(IngestError::Csv(e))),
            Err(_) => Some(Ok(RawRow::Rejected(DropReason::Malformed))),
        }
    }
}

fn point(lon: &str, lat: &str) -> Result<Option<GeoPoint>, DropReason> {
    if lon.is_empty() || lat.is_empty() {
        return Ok(None);
    }
    let (Ok(lon), Ok(lat)) = (lon.parse::<f64>(), lat.parse::<f64>()) else {
        return Err(DropReason::Malformed);
    };
    GeoPoint::new(lat, lon).map(Some).map_err(|_| DropReason::InvalidCoords)
}

fn parse_iso(s: &str, tz: TimeZoneSpec) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return tz.0.from_local_datetime(&naive).single().map(|dt| dt.timestamp());
        }
    }
    None
}

pub fn read_trip_rows<R: Read>(reader: R, tz: TimeZoneSpec) -> Result<TripRowReader<R>, IngestError> {
    TripRowReader::new(reader, tz)
}

pub fn load_trip_rows(path: impl AsRef<Path>, tz: TimeZoneSpec) -> Result<TripRowReader<BufReader<File>>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    TripRowReader::new(BufReader::with_capacity(1 << 20, file), tz)
}

/// `YYYY-MM-DD HH:MM:SS` in UTC.
pub fn format_iso_utc(epoch: i64) -> String {
    match Utc.timestamp_opt(epoch, 0).single() {
        Some(dt) => dt.format("%Y-%m-%d %H:%M:%S").to_string(),
        None => epoch.to_string(),
    }
}

pub fn write_trips_csv<'a, W, I>(records: I, writer: W) -> Result<(), IngestError>
where
    W: Write,
    I: IntoIterator<Item = &'a RawTripRecord>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRIPS_HEADER)?;
    let coord = |p: Option<GeoPoint>| match p {
        Some(p) => (p.lon().to_string(), p.lat().to_string()),
        None => (String::new(), String::new()),
    };
    for r in records {
        let (plon, plat) = coord(r.pickup);
        let (dlon, dlat) = coord(r.dropoff);
        w.write_record([format_iso_utc(r.pickup_time), format_iso_utc(r.dropoff_time), plon, plat, dlon, dlat])?;
    }
    w.flush().map_err(|e| IngestError::io("<trips writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "pickup_datetime,dropoff_datetime,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat\n";

    fn rows(body: &str, tz: TimeZoneSpec) -> Vec<RawRow> {
        let csv = format!("{HEADER}{body}");
        read_trip_rows(csv.as_bytes(), tz).unwrap().map(Result::unwrap).collect()
    }

    #[test]
    fn iso_and_epoch_columns_are_detected() {
        let r = rows("2015-01-01 00:00:00,1420070460,-73.9,40.7,-73.8,40.6\n", TimeZoneSpec::default());
        let RawRow::Record(rec) = r[0] else { panic!("{r:?}") };
        assert_eq!(rec.pickup_time, 1_420_070_400);
        assert_eq!(rec.dropoff_time, 1_420_070_460);
        assert_eq!(rec.pickup.unwrap().lat(), 40.7);
    }

    #[test]
    fn naive_datetimes_use_configured_offset() {
        let tz: TimeZoneSpec = "-05:00".parse().unwrap();
        let r = rows("2015-01-01T00:00:00,2015-01-01T00:10:00,-73.9,40.7,-73.8,40.6\n", tz);
        let RawRow::Record(rec) = r[0] else { panic!() };
        assert_eq!(rec.pickup_time, 1_420_070_400 + 5 * 3600);
        assert_eq!(rec.dropoff_time - rec.pickup_time, 600);
    }

    #[test]
    fn rfc3339_offset_overrides_zone() {
        let tz: TimeZoneSpec = "+09:00".parse().unwrap();
        let r = rows("2015-01-01T00:00:00Z,2015-01-01T01:00:00+01:00,-73.9,40.7,-73.8,40.6\n", tz);
        let RawRow::Record(rec) = r[0] else { panic!() };
        assert_eq!(rec.pickup_time, 1_420_070_400);
        assert_eq!(rec.dropoff_time, 1_420_070_400);
    }

    #[test]
    fn dirty_rows_are_classified() {
        let r = rows(
            "0,60,-73.9,40.7,,\n0,60,-73.9,95.0,-73.8,40.6\n0,x,-73.9,40.7,-73.8,40.6\n0,60,-73.9\n",
            TimeZoneSpec::default(),
        );
        let RawRow::Record(rec) = r[0] else { panic!() };
        assert!(rec.dropoff.is_none());
        assert_eq!(r[1], RawRow::Rejected(DropReason::InvalidCoords));
        assert_eq!(r[2], RawRow::Rejected(DropReason::Malformed));
        assert_eq!(r[3], RawRow::Rejected(DropReason::Malformed));
    }

    #[test]
    fn time_zone_parsing() {
        assert!("UTC".parse::<TimeZoneSpec>().is_ok());
        assert_eq!("+0530".parse::<TimeZoneSpec>().unwrap().0.local_minus_utc(), 19800);
        assert!("EST".parse::<TimeZoneSpec>().is_err());
        assert!("+05:75".parse::<TimeZoneSpec>().is_err());
    }

    #[test]
    fn iso_formatting_round_trips() {
        let t = 1_420_070_461;
        let s = format_iso_utc(t);
        assert_eq!(s, "2015-01-01 00:01:01");
        assert_eq!(parse_iso(&s, TimeZoneSpec::default()), Some(t));
    }
}
