//! Fits a power law to origin rank-frequency for synthetic cities with
//! different Zipf exponents.
//!
//!     cargo run --release --example power_law

use placemove::eval::power_law_fit;
use placemove::pipeline::Inputs;
use placemove::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>8} {:>8}", "zipf", "slope", "r2");
    for s in [0.8, 1.0, 1.2, 1.5] {
        let city = generate(&SynthConfig { zipf_s: s, ..SynthConfig::city5(42) })?;
        let inputs = Inputs::from_records(city.places, city.categories, &city.trips, 200.0)?;
        let fit = power_law_fit(&inputs.trips)?;
        println!("{s:>6} {:>8.3} {:>8.3}", fit.slope, fit.r_squared);
    }
    Ok(())
}
