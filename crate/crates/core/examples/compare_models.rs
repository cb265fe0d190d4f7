//! Trains every context model on the synthetic city and prints match rate
//! and silhouette side by side.
//!
//!     cargo run --release --example compare_models -- [seed]

use std::time::Instant;

use placemove::baselines::BaselineModel;
use placemove::pipeline::{run_on, Inputs, ModelKind, RunConfig};
use placemove::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let city = generate(&SynthConfig::city5(seed))?;
    let inputs = Inputs::from_records(city.places, city.categories, &city.trips, 200.0)?;
    println!("{:<20} {:>10} {:>10} {:>12} {:>8}", "model", "match", "silhouette", "pairs/epoch", "secs");
    let mut models = vec![ModelKind::Od, ModelKind::Trip];
    models.extend(BaselineModel::ALL.map(ModelKind::Baseline));
    for model in models {
        let cfg = RunConfig { model, seed, threads: 1, ..RunConfig::default() };
        let t = Instant::now();
        let out = run_on(&cfg, &inputs)?;
        println!(
            "{:<20} {:>10.4} {:>10.4} {:>12} {:>8.1}",
            model.to_string(),
            out.report.match_rate,
            out.report.silhouette_mean.unwrap_or(f64::NAN),
            out.pairs_per_epoch,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
