//! Trains OD embeddings on a synthetic city, printing per-epoch loss, and
//! writes the vectors in word2vec text format.
//!
//!     cargo run --release --example train_od -- [out.txt] [threads]

use std::fs::File;
use std::io::BufWriter;

use placemove::pairs::{OdConfig, OdPairSource};
use placemove::pipeline::Inputs;
use placemove::synth::{generate, SynthConfig};
use placemove::trainer::io::{write_word2vec, Precision};
use placemove::trainer::{init_model, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "od_embeddings.txt".into());
    let threads = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let city = generate(&SynthConfig::city5(42))?;
    let inputs = Inputs::from_records(city.places, city.categories, &city.trips, 200.0)?;
    let source = OdPairSource::new(
        &inputs.trips,
        &OdConfig { window_seconds: 3600, max_contexts_per_center: Some(100), seed: 42 },
    )?;
    let cfg = TrainConfig { threads, seed: 42, ..TrainConfig::default() };
    let mut model = init_model(inputs.places.len(), &cfg)?;
    let stats = train(&mut model, &source, &cfg)?;
    for e in &stats.epochs {
        println!("epoch {:>2}  pairs {:>8}  loss {:.4}  lr {:.5}", e.epoch, e.pairs, e.mean_loss, e.lr_end);
    }
    write_word2vec(
        &model.embeddings(),
        &inputs.external_ids(),
        Precision::DEFAULT,
        BufWriter::new(File::create(&out)?),
    )?;
    println!("wrote {out}");
    Ok(())
}
