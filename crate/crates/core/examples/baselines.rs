//! Builds each spatial-context baseline corpus and prints how many pairs
//! it repeats per neighbour.
//!
//!     cargo run --release --example baselines -- [k]

use placemove::baselines::{build_baseline_corpus, BaselineModel, SpatialContextConfig};
use placemove::pipeline::Inputs;
use placemove::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let city = generate(&SynthConfig::city5(42))?;
    let inputs = Inputs::from_records(city.places, city.categories, &city.trips, 200.0)?;
    let n_types = inputs.categories.labels().len();
    let contexts = inputs.places.len() * k;
    println!("{:<10} {:>10} {:>14}", "model", "pairs", "mean beta");
    for model in BaselineModel::ALL {
        let cfg = SpatialContextConfig { model, k_neighbors: k, ..SpatialContextConfig::default() };
        let pairs = build_baseline_corpus(&inputs.places, n_types, &inputs.index, &inputs.checkins, &cfg)?;
        println!("{:<10} {:>10} {:>14.2}", model.as_str(), pairs.len(), pairs.len() as f64 / contexts as f64);
    }
    Ok(())
}
