//! Evaluates a word2vec embedding file against place categories: nearest
//! neighbour match rate and per-category silhouette.
//!
//!     cargo run --release --example evaluate -- <embeddings.txt> <places.csv>

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;

use placemove::eval::{match_rate, silhouette};
use placemove::ingest::{read_places, PlaceId};
use placemove::trainer::io::read_word2vec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [emb, places] = args.as_slice() else {
        return Err("usage: evaluate <embeddings.txt> <places.csv>".into());
    };
    let (labels, vectors) = read_word2vec(BufReader::new(File::open(emb)?))?;
    let (places, table) = read_places(BufReader::new(File::open(places)?))?;
    let category: HashMap<&str, _> = places.iter().map(|p| (p.external_id.as_str(), p.category)).collect();
    let cats = labels
        .iter()
        .map(|l| category.get(l.as_str()).copied().ok_or_else(|| format!("unknown place {l}")))
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<PlaceId> = (0..labels.len() as u32).map(PlaceId).collect();
    let m = match_rate(&vectors, &ids, &cats)?;
    println!("match_rate={:.4} ({}/{})", m.rate, m.matched, m.n_evaluated);
    let s = silhouette(&vectors, &ids, &cats)?;
    println!("silhouette={:.4}", s.mean);
    for (c, v) in &s.per_category {
        println!("  {:<12} {v:.4}", table.label(*c));
    }
    Ok(())
}
