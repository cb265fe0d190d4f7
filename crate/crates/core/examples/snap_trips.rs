//! Snaps raw trip records to places and prints the drop statistics.
//!
//!     cargo run --release --example snap_trips -- <places.csv> <trips.csv> [radius_m]

use std::fs::File;
use std::io::BufReader;

use placemove::geo::GridIndex;
use placemove::ingest::{read_places, read_trip_rows, snap_trips, TimeZoneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [places, trips, rest @ ..] = args.as_slice() else {
        return Err("usage: snap_trips <places.csv> <trips.csv> [radius_m]".into());
    };
    let radius: f64 = rest.first().map(|s| s.parse()).transpose()?.unwrap_or(200.0);
    let (places, _) = read_places(BufReader::new(File::open(places)?))?;
    let points: Vec<_> = places.iter().map(|p| p.location).collect();
    let index = GridIndex::build(&points, radius)?;
    let rows = read_trip_rows(BufReader::new(File::open(trips)?), TimeZoneSpec::default())?;
    let out = snap_trips(rows, &index, radius)?;
    print!("{}", out.stats.to_key_value());
    let busiest = out.checkins.counts.iter().enumerate().max_by_key(|&(i, n)| (n, std::cmp::Reverse(i)));
    if let Some((i, n)) = busiest {
        println!("busiest_destination={} ({n} drop-offs)", places[i].external_id);
    }
    Ok(())
}
