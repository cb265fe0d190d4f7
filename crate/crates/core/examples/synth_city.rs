//! Generates the five-category synthetic city and writes `places.csv`,
//! `trips.csv` and `manifest.json`.
//!
//!     cargo run --release --example synth_city -- <out-dir> [seed]

use std::path::PathBuf;

use placemove::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "city5".into()));
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let city = generate(&SynthConfig::city5(seed))?;
    city.write_to_dir(&out)?;
    let labels = city.categories.labels();
    for (label, (n, o)) in
        labels.iter().zip(city.manifest.places_per_category.iter().zip(&city.manifest.origins_per_category))
    {
        println!("{label:<12} places={n:<4} origins={o}");
    }
    println!("trips={} -> {}", city.trips.len(), out.display());
    Ok(())
}
