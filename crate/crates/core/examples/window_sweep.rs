//! Sweeps the OD arrival window on the synthetic city and writes the
//! plot-ready CSV to stdout.
//!
//!     cargo run --release --example window_sweep -- [seed] [hours,...]

use placemove::pipeline::{sweep, write_sweep_csv, Inputs, RunConfig, SweepParam};
use placemove::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let values: Vec<f64> = match args.next() {
        Some(list) => list.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![0.25, 0.5, 1.0, 2.0, 4.0],
    };
    let city = generate(&SynthConfig::city5(seed))?;
    let inputs = Inputs::from_records(city.places, city.categories, &city.trips, 200.0)?;
    let cfg = RunConfig { seed, ..RunConfig::default() };
    let rows = sweep(&cfg, &inputs, SweepParam::WindowHours, &values)?;
    write_sweep_csv(SweepParam::WindowHours, &rows, true, std::io::stdout())?;
    Ok(())
}
