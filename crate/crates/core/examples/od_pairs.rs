//! Builds the trip and OD training corpora for a synthetic city and shows
//! how the arrival window and per-trip cap change the corpus size.
//!
//!     cargo run --release --example od_pairs -- [seed]

use placemove::pairs::{trip_pairs, OdIndex};
use placemove::pipeline::Inputs;
use placemove::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let city = generate(&SynthConfig::city5(seed))?;
    let inputs = Inputs::from_records(city.places, city.categories, &city.trips, 200.0)?;
    let trip = trip_pairs(&inputs.trips);
    println!("trip model: {} pairs, {} self-loops skipped", trip.pairs.len(), trip.self_loops);
    println!("{:>8} {:>12} {:>12} {:>12}", "hours", "uncapped", "cap=100", "cap=10");
    for hours in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let index = OdIndex::build(&inputs.trips, (hours * 3600.0) as i64);
        println!(
            "{hours:>8} {:>12} {:>12} {:>12}",
            index.full_pair_count(),
            index.pair_count(Some(100)),
            index.pair_count(Some(10))
        );
    }
    Ok(())
}
