//! The `placemove` command line. Settings resolve as flags over `--config`
//! file over defaults.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::eval::{origin_rank_frequency, write_rank_frequency_csv};
use crate::ingest::write_trip_cache;
use crate::pairs::write_pairs_csv;
use crate::pipeline::{
    cache_dir, epoch_zero_pairs, evaluate, load_inputs, pair_source, run_on, sweep, train_model, write_report,
    write_sweep_csv, write_text, write_training_artifacts, Inputs, ModelKind, PipelineError, RunConfig, SweepParam,
};
use crate::synth::{generate, SynthConfig};
use crate::trainer::io::read_word2vec;
use crate::trainer::Embeddings;

#[derive(Debug, Parser)]
#[command(name = "placemove", version, about = "Place embeddings from taxi trips")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city (places.csv, trips.csv, manifest.json)
    Synth(SynthArgs),
    /// Snap trips to places and report drop statistics
    Ingest(RunArgs),
    /// Write the first-epoch training pairs as CSV
    Pairs(RunArgs),
    /// Train embeddings
    Train(RunArgs),
    /// Evaluate an embedding file against place categories
    Eval(EvalArgs),
    /// Train and evaluate once per value of one parameter
    Sweep(SweepArgs),
    /// Run ingest, training and evaluation and write every artifact
    Report(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "city5")]
    pub scenario: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_places: Option<usize>,
    #[arg(long)]
    pub n_trips: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub zipf_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run config; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub places: Option<PathBuf>,
    #[arg(long)]
    pub trips: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// trip | od | baseline:{checkin|distance|combined|itdl}
    #[arg(long)]
    pub model: Option<String>,
    /// Shorthand for `--model baseline:<name>`
    #[arg(long, conflicts_with = "model")]
    pub baseline: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub window_hours: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Per-trip OD context cap, 0 for none
    #[arg(long)]
    pub max_contexts: Option<usize>,
    #[arg(long)]
    pub snap_radius_m: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Offset for timestamps without one: UTC or ±HH:MM
    #[arg(long, allow_hyphen_values = true)]
    pub tz: Option<String>,
    /// Evaluate on a random fraction of places
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Write vectors as exact hexadecimal floats
    #[arg(long)]
    pub full_precision: bool,
    /// Re-snap trips even if a cached pass exists
    #[arg(long)]
    pub no_cache: bool,
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$target = v.clone();
                }
            )*};
        }
        set!(dim => dim, epochs => epochs, window_hours => window_hours, negatives => negatives,
             max_contexts => max_contexts, snap_radius_m => snap_radius_m, seed => seed,
             threads => threads, tz => timezone);
        for (flag, target) in [(&self.places, &mut c.places), (&self.trips, &mut c.trips), (&self.out, &mut c.out)] {
            if flag.is_some() {
                target.clone_from(flag);
            }
        }
        if let Some(m) = &self.model {
            c.model = m.parse()?;
        }
        if let Some(b) = &self.baseline {
            c.model = ModelKind::Baseline(b.parse()?);
        }
        if self.holdout.is_some() {
            c.holdout = self.holdout;
        }
        if self.full_precision {
            c.full_precision = true;
        }
        c.validate()?;
        Ok(c)
    }

    fn cache(&self) -> Option<PathBuf> {
        (!self.no_cache).then(cache_dir)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// word2vec text file whose labels are place external ids
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Write the origin rank-frequency table to this CSV
    #[arg(long)]
    pub dump_rank_freq: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// window_hours | dim | epochs | negatives | max_contexts
    #[arg(long)]
    pub param: String,
    /// Comma-separated values
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Add a wall-clock seconds column (makes output non-reproducible)
    #[arg(long)]
    pub timings: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| PipelineError::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::io(path, std::io::Error::other(e))
}

fn cmd_synth(a: &SynthArgs) -> Result<(), PipelineError> {
    let mut cfg = SynthConfig::scenario(&a.scenario, a.seed)?;
    cfg.n_places = a.n_places.unwrap_or(cfg.n_places);
    cfg.n_trips = a.n_trips.unwrap_or(cfg.n_trips);
    cfg.days = a.days.unwrap_or(cfg.days);
    cfg.zipf_s = a.zipf_s.unwrap_or(cfg.zipf_s);
    let out = generate(&cfg)?;
    out.write_to_dir(&a.out)?;
    println!("places={}\ntrips={}\nout={}", out.places.len(), out.trips.len(), a.out.display());
    Ok(())
}

fn cmd_ingest(a: &RunArgs) -> Result<(), PipelineError> {
    let cfg = a.resolve()?;
    let inputs = load_inputs(&cfg, a.cache().as_deref())?;
    let kv = inputs.stats.to_key_value();
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        write_text(&dir.join("drop_stats.txt"), &kv)?;
        let p = dir.join("trips.bin");
        write_trip_cache(&inputs.trips, create(&p)?).map_err(|e| PipelineError::io(&p, e))?;
        let p = dir.join("checkins.csv");
        let mut w = csv::Writer::from_writer(create(&p)?);
        w.write_record(["external_id", "checkins"]).map_err(csv_err(&p))?;
        for (place, n) in inputs.places.iter().zip(&inputs.checkins.counts) {
            w.write_record([place.external_id.as_str(), &n.to_string()]).map_err(csv_err(&p))?;
        }
        w.flush().map_err(|e| PipelineError::io(&p, e))?;
    }
    print!("{kv}");
    Ok(())
}

fn cmd_pairs(a: &RunArgs) -> Result<(), PipelineError> {
    let cfg = a.resolve()?;
    let out = cfg.out_path()?.to_owned();
    let inputs = load_inputs(&cfg, a.cache().as_deref())?;
    let pairs = epoch_zero_pairs(&cfg, &inputs)?;
    write_pairs_csv(&pairs, create(&out)?).map_err(csv_err(&out))?;
    println!("model={}\npairs={}", cfg.model, pairs.len());
    Ok(())
}

fn cmd_train(a: &RunArgs) -> Result<(), PipelineError> {
    let cfg = a.resolve()?;
    let out = cfg.out_path()?.to_owned();
    let inputs = load_inputs(&cfg, a.cache().as_deref())?;
    let source = pair_source(&cfg, &inputs)?;
    let (model, stats) = train_model(&cfg, inputs.places.len(), source.as_ref())?;
    write_training_artifacts(&cfg, &inputs, &model, &stats, &out)?;
    println!("model={}\npairs_per_epoch={}", cfg.model, source.pairs_per_epoch());
    if let Some(last) = stats.epochs.last() {
        println!("final_mean_loss={:.6}", last.mean_loss);
    }
    println!("out={}", out.display());
    Ok(())
}

/// Aligns vectors to place ids by label; unknown places get zero rows and
/// are excluded from evaluation.
fn align_embeddings(labels: &[String], vectors: &Embeddings, inputs: &Inputs) -> Result<Embeddings, PipelineError> {
    let by_label: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let dim = vectors.dim;
    let mut data = vec![0.0; inputs.places.len() * dim];
    let mut found = 0;
    for (p, row) in inputs.places.iter().zip(data.chunks_exact_mut(dim)) {
        if let Some(&i) = by_label.get(p.external_id.as_str()) {
            row.copy_from_slice(vectors.row(i));
            found += 1;
        }
    }
    if found == 0 {
        return Err(PipelineError::Usage("no embedding label matches a place external_id".into()));
    }
    Ok(Embeddings::new(dim, data))
}

fn cmd_eval(a: &EvalArgs) -> Result<(), PipelineError> {
    let cfg = a.run.resolve()?;
    let f = File::open(&a.embeddings).map_err(|e| PipelineError::io(&a.embeddings, e))?;
    let (labels, vectors) = read_word2vec(BufReader::new(f))?;
    let inputs = load_inputs(&cfg, a.run.cache().as_deref())?;
    let vectors = align_embeddings(&labels, &vectors, &inputs)?;
    let report = evaluate(&cfg, &vectors, &inputs)?;
    if let Some(dir) = &cfg.out {
        write_report(&report, dir)?;
    }
    if let Some(p) = &a.dump_rank_freq {
        write_rank_frequency_csv(&origin_rank_frequency(&inputs.trips), create(p)?).map_err(csv_err(p))?;
    }
    print!("{}", report.to_key_value());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), PipelineError> {
    let cfg = a.run.resolve()?;
    let param: SweepParam = a.param.parse()?;
    let inputs = load_inputs(&cfg, a.run.cache().as_deref())?;
    let rows = sweep(&cfg, &inputs, param, &a.values)?;
    match &cfg.out {
        Some(p) => write_sweep_csv(param, &rows, a.timings, create(p)?).map_err(csv_err(p))?,
        None => write_sweep_csv(param, &rows, a.timings, std::io::stdout().lock())
            .map_err(csv_err(Path::new("<stdout>")))?,
    }
    Ok(())
}

fn cmd_report(a: &RunArgs) -> Result<(), PipelineError> {
    let cfg = a.resolve()?;
    let out = cfg.out_path()?.to_owned();
    let inputs = load_inputs(&cfg, a.cache().as_deref())?;
    let run = run_on(&cfg, &inputs)?;
    write_training_artifacts(&cfg, &inputs, &run.model, &run.train_stats, &out)?;
    write_report(&run.report, &out)?;
    write_text(&out.join("drop_stats.txt"), &inputs.stats.to_key_value())?;
    print!("{}", run.report.to_key_value());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Pairs(a) => cmd_pairs(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 2 for usage or input errors, 3 for internal failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(())) => {
            let _ = std::io::stdout().flush();
            0
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal invariant violated");
            3
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("placemove").chain(args.iter().copied())).unwrap()
    }

    fn run_args(cli: Cli) -> RunArgs {
        match cli.command {
            Command::Train(a) | Command::Report(a) | Command::Ingest(a) | Command::Pairs(a) => a,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flags_override_defaults() {
        let a =
            run_args(parse(&["train", "--model", "trip", "--dim", "32", "--window-hours", "0.5", "--tz", "-05:00"]));
        let c = a.resolve().unwrap();
        assert_eq!(c.model, ModelKind::Trip);
        assert_eq!(c.dim, 32);
        assert_eq!(c.window_hours, 0.5);
        assert_eq!(c.timezone, "-05:00");
        assert_eq!(c.epochs, 6);
    }

    #[test]
    fn baseline_shorthand() {
        let c = run_args(parse(&["train", "--baseline", "itdl"])).resolve().unwrap();
        assert_eq!(c.model.to_string(), "baseline:itdl");
        assert!(run_args(parse(&["train", "--baseline", "nope"])).resolve().is_err());
        assert!(Cli::try_parse_from(["placemove", "train", "--baseline", "itdl", "--model", "od"]).is_err());
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dim = 50\nepochs = 2\nmodel = \"trip\"\n").unwrap();
        let p = path.to_str().unwrap();
        let c = run_args(parse(&["train", "--config", p, "--epochs", "3"])).resolve().unwrap();
        assert_eq!((c.dim, c.epochs, c.model), (50, 3, ModelKind::Trip));
    }
}
