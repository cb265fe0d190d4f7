//! End-to-end runs: load and snap inputs, build a corpus for the chosen
//! context model, train, evaluate and write artifacts.
//!
//! Every random choice derives from `RunConfig::seed` through named streams,
//! so single-threaded runs are byte-reproducible.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{build_baseline_corpus, BaselineError, BaselineModel, SpatialContextConfig};
use crate::eval::{self, EvalError, EvalReport};
use crate::geo::{GeoError, GridIndex};
use crate::ingest::{
    load_places, load_trip_rows, read_trip_cache, snap_trips, write_trip_cache, CategoryId, CategoryTable,
    CheckinCounts, DropStats, IngestError, Place, PlaceId, RawRow, RawTripRecord, TimeZoneSpec, Trip,
    DEFAULT_SNAP_RADIUS_M,
};
use crate::pairs::{trip_pairs, OdConfig, OdPairSource, PairSource, PairsError, StaticPairs, TrainingPair};
use crate::seed::derive_seed;
use crate::synth::SynthError;
use crate::trainer::io::{write_checkpoint, write_word2vec, Precision};
use crate::trainer::{init_model, train, EmbeddingModel, Embeddings, TrainConfig, TrainError, TrainStats};

pub const CACHE_DIR_ENV: &str = "PLACEMOVE_CACHE_DIR";
const DEFAULT_CACHE_DIR: &str = ".placemove-cache";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Pairs(#[from] PairsError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("config: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }

    /// 2 for bad input or usage, 3 for violated internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Invariant(_) => 3,
            _ => 2,
        }
    }
}

/// Which corpus the embeddings are trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelKind {
    Trip,
    #[default]
    Od,
    Baseline(BaselineModel),
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Trip => f.write_str("trip"),
            ModelKind::Od => f.write_str("od"),
            ModelKind::Baseline(b) => write!(f, "baseline:{b}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "trip" => Ok(ModelKind::Trip),
            "od" => Ok(ModelKind::Od),
            _ => match s.strip_prefix("baseline:") {
                Some(b) => Ok(ModelKind::Baseline(b.parse()?)),
                None => Err(PipelineError::Usage(format!(
                    "unknown model `{s}` (expected trip, od or baseline:{{checkin|distance|combined|itdl}})"
                ))),
            },
        }
    }
}

impl Serialize for ModelKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything a run needs. Serializes to TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub places: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: ModelKind,
    pub seed: u64,
    pub threads: usize,
    /// Fixed UTC offset for trip timestamps without one, e.g. `-05:00`.
    pub timezone: String,
    pub snap_radius_m: f64,
    pub window_hours: f64,
    /// Per-trip OD context cap; 0 disables it.
    pub max_contexts: usize,
    pub dim: usize,
    pub epochs: u32,
    pub negatives: usize,
    pub lr_initial: f64,
    pub lr_min: f64,
    pub noise_power: f64,
    /// Evaluate on this random fraction of the eligible places.
    pub holdout: Option<f64>,
    pub full_precision: bool,
    pub baseline: SpatialContextConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            places: None,
            trips: None,
            out: None,
            model: ModelKind::Od,
            seed: 42,
            threads: 1,
            timezone: "UTC".into(),
            snap_radius_m: DEFAULT_SNAP_RADIUS_M,
            window_hours: 1.0,
            max_contexts: 100,
            dim: t.dim,
            epochs: t.epochs,
            negatives: t.negatives,
            lr_initial: t.lr_initial,
            lr_min: t.lr_min,
            noise_power: t.noise_power,
            holdout: None,
            full_precision: false,
            baseline: SpatialContextConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.od_config()?.validate()?;
        self.train_config().validate()?;
        self.spatial_config().validate()?;
        self.timezone()?;
        if !(self.snap_radius_m > 0.0 && self.snap_radius_m.is_finite()) {
            return Err(PipelineError::Usage(format!("snap radius must be positive, got {}", self.snap_radius_m)));
        }
        if let Some(h) = self.holdout {
            if !(h > 0.0 && h <= 1.0) {
                return Err(EvalError::Holdout(h).into());
            }
        }
        Ok(())
    }

    pub fn timezone(&self) -> Result<TimeZoneSpec, PipelineError> {
        Ok(self.timezone.parse()?)
    }

    pub fn od_config(&self) -> Result<OdConfig, PipelineError> {
        let secs = self.window_hours * 3600.0;
        if !(secs >= 1.0 && secs.is_finite()) {
            return Err(PipelineError::Usage(format!(
                "window must be at least one second, got {} h",
                self.window_hours
            )));
        }
        Ok(OdConfig {
            window_seconds: secs.round() as i64,
            max_contexts_per_center: (self.max_contexts > 0).then_some(self.max_contexts),
            seed: derive_seed(self.seed, "pairs", 0),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            epochs: self.epochs,
            negatives: self.negatives,
            lr_initial: self.lr_initial,
            lr_min: self.lr_min,
            noise_power: self.noise_power,
            seed: derive_seed(self.seed, "train", 0),
            threads: self.threads,
            ..TrainConfig::default()
        }
    }

    /// Baseline settings with `model` taken from the run's model kind.
    pub fn spatial_config(&self) -> SpatialContextConfig {
        let mut c = self.baseline.clone();
        if let ModelKind::Baseline(b) = self.model {
            c.model = b;
        }
        c
    }

    pub fn hash_hex(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    fn require_path<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, PipelineError> {
        p.as_deref().ok_or_else(|| PipelineError::Usage(format!("missing --{flag}")))
    }

    pub fn places_path(&self) -> Result<&Path, PipelineError> {
        Self::require_path(&self.places, "places")
    }

    pub fn trips_path(&self) -> Result<&Path, PipelineError> {
        Self::require_path(&self.trips, "trips")
    }

    pub fn out_path(&self) -> Result<&Path, PipelineError> {
        Self::require_path(&self.out, "out")
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Places, their index and the snapped trips.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub places: Vec<Place>,
    pub categories: CategoryTable,
    pub index: GridIndex,
    pub trips: Vec<Trip>,
    pub checkins: CheckinCounts,
    pub stats: DropStats,
}

impl Inputs {
    /// Snaps in-memory records, e.g. straight from the synthetic generator.
    pub fn from_records(
        places: Vec<Place>,
        categories: CategoryTable,
        records: &[RawTripRecord],
        snap_radius_m: f64,
    ) -> Result<Self, PipelineError> {
        let index = build_index(&places, snap_radius_m)?;
        let snap = snap_trips(records.iter().map(|r| Ok(RawRow::Record(*r))), &index, snap_radius_m)?;
        Ok(Inputs { places, categories, index, trips: snap.trips, checkins: snap.checkins, stats: snap.stats })
    }

    pub fn labels(&self) -> Vec<CategoryId> {
        self.places.iter().map(|p| p.category).collect()
    }

    pub fn external_ids(&self) -> Vec<&str> {
        self.places.iter().map(|p| p.external_id.as_str()).collect()
    }
}

fn build_index(places: &[Place], snap_radius_m: f64) -> Result<GridIndex, PipelineError> {
    let pts: Vec<_> = places.iter().map(|p| p.location).collect();
    Ok(GridIndex::build(&pts, snap_radius_m.max(1.0))?)
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let mut f = BufReader::new(File::open(path).map_err(|e| PipelineError::io(path, e))?);
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| PipelineError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

/// Cache key of a snapping pass: input contents plus the settings that
/// influence snapping.
fn ingest_key(cfg: &RunConfig, places: &Path, trips: &Path) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    h.update(hash_file(places)?.as_bytes());
    h.update(hash_file(trips)?.as_bytes());
    h.update(cfg.snap_radius_m.to_bits().to_le_bytes());
    h.update(cfg.timezone.as_bytes());
    Ok(hex(&h.finalize())[..16].to_owned())
}

/// Loads places and snaps trips, reusing a cached snapping pass keyed by
/// input contents and settings when one exists under `cache`.
pub fn load_inputs(cfg: &RunConfig, cache: Option<&Path>) -> Result<Inputs, PipelineError> {
    let places_path = cfg.places_path()?;
    let trips_path = cfg.trips_path()?;
    let tz = cfg.timezone()?;
    let (places, categories) = load_places(places_path)?;
    let index = build_index(&places, cfg.snap_radius_m)?;

    let cached = match cache {
        Some(dir) => {
            let key = ingest_key(cfg, places_path, trips_path)?;
            Some((dir.join(format!("trips-{key}.bin")), dir.join(format!("trips-{key}.stats.json"))))
        }
        None => None,
    };
    if let Some((bin, json)) = &cached {
        if bin.exists() && json.exists() {
            let f = File::open(bin).map_err(|e| PipelineError::io(bin, e))?;
            let trips = read_trip_cache(BufReader::new(f), Some(places.len()))?;
            let text = fs::read_to_string(json).map_err(|e| PipelineError::io(json, e))?;
            let stats: DropStats = serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
            let checkins = CheckinCounts::from_trips(places.len(), &trips);
            return Ok(Inputs { places, categories, index, trips, checkins, stats });
        }
    }

    let snap = snap_trips(load_trip_rows(trips_path, tz)?, &index, cfg.snap_radius_m)?;
    if let Some((bin, json)) = &cached {
        let dir = bin.parent().expect("cache file has a parent");
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        // write to temporaries first so an interrupted run never leaves a torn cache
        let tmp = bin.with_extension("bin.tmp");
        let mut w = BufWriter::new(File::create(&tmp).map_err(|e| PipelineError::io(&tmp, e))?);
        write_trip_cache(&snap.trips, &mut w).map_err(|e| PipelineError::io(&tmp, e))?;
        drop(w);
        fs::rename(&tmp, bin).map_err(|e| PipelineError::io(bin, e))?;
        let json_text = serde_json::to_string(&snap.stats).expect("stats serialize");
        fs::write(json, json_text).map_err(|e| PipelineError::io(json, e))?;
    }
    Ok(Inputs { places, categories, index, trips: snap.trips, checkins: snap.checkins, stats: snap.stats })
}

/// The training corpus of `cfg.model` over `inputs`.
pub fn pair_source(cfg: &RunConfig, inputs: &Inputs) -> Result<Box<dyn PairSource>, PipelineError> {
    let shuffle_seed = derive_seed(cfg.seed, "pairs", 1);
    Ok(match cfg.model {
        ModelKind::Trip => Box::new(StaticPairs::new(trip_pairs(&inputs.trips).pairs, shuffle_seed)),
        ModelKind::Od => Box::new(OdPairSource::new(&inputs.trips, &cfg.od_config()?)?),
        ModelKind::Baseline(_) => {
            let pairs = build_baseline_corpus(
                &inputs.places,
                inputs.categories.len(),
                &inputs.index,
                &inputs.checkins,
                &cfg.spatial_config(),
            )?;
            Box::new(StaticPairs::new(pairs, shuffle_seed))
        }
    })
}

/// First-epoch pairs, as written by the `pairs` command.
pub fn epoch_zero_pairs(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<TrainingPair>, PipelineError> {
    Ok(pair_source(cfg, inputs)?.epoch_pairs(0))
}

pub fn train_model(
    cfg: &RunConfig,
    n_places: usize,
    source: &dyn PairSource,
) -> Result<(EmbeddingModel, TrainStats), PipelineError> {
    let tc = cfg.train_config();
    let mut model = init_model(n_places, &tc)?;
    let stats = train(&mut model, source, &tc)?;
    if !model.is_finite() {
        return Err(PipelineError::Invariant("training produced non-finite parameters".into()));
    }
    Ok((model, stats))
}

/// Places evaluated for `cfg`: those touched by a trip, optionally subsampled.
pub fn eval_set(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PlaceId>, PipelineError> {
    let set = eval::default_eval_set(inputs.places.len(), &inputs.trips);
    Ok(match cfg.holdout {
        Some(f) => eval::holdout_subset(&set, f, derive_seed(cfg.seed, "eval", 0))?,
        None => set,
    })
}

pub fn evaluate(cfg: &RunConfig, vectors: &Embeddings, inputs: &Inputs) -> Result<EvalReport, PipelineError> {
    let set = eval_set(cfg, inputs)?;
    let mut report = eval::evaluate(vectors, &set, &inputs.labels(), &inputs.categories)?;
    report.power_law = eval::power_law_fit(&inputs.trips).ok();
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: EmbeddingModel,
    pub train_stats: TrainStats,
    pub report: EvalReport,
    pub pairs_per_epoch: usize,
}

/// Corpus, training and evaluation over already loaded inputs.
pub fn run_on(cfg: &RunConfig, inputs: &Inputs) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let source = pair_source(cfg, inputs)?;
    let (model, train_stats) = train_model(cfg, inputs.places.len(), source.as_ref())?;
    let report = evaluate(cfg, &model.embeddings(), inputs)?;
    Ok(RunOutput { model, train_stats, report, pairs_per_epoch: source.pairs_per_epoch() })
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path).map(BufWriter::new).map_err(|e| PipelineError::io(path, e))
}

pub fn precision(cfg: &RunConfig) -> Precision {
    if cfg.full_precision {
        Precision::Full
    } else {
        Precision::DEFAULT
    }
}

/// Writes `embeddings.txt`, `checkpoint.bin`, `train_stats.json` and
/// `config.toml` into `dir`.
pub fn write_training_artifacts(
    cfg: &RunConfig,
    inputs: &Inputs,
    model: &EmbeddingModel,
    stats: &TrainStats,
    dir: &Path,
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let p = dir.join("embeddings.txt");
    write_word2vec(&model.embeddings(), &inputs.external_ids(), precision(cfg), create(&p)?)
        .map_err(|e| PipelineError::io(&p, e))?;
    let p = dir.join("checkpoint.bin");
    write_checkpoint(model, &cfg.train_config().hash(), create(&p)?).map_err(|e| PipelineError::io(&p, e))?;
    write_text(&dir.join("train_stats.json"), &serde_json::to_string_pretty(stats).expect("stats serialize"))?;
    write_text(&dir.join("config.toml"), &cfg.to_toml())
}

/// Writes `report.txt` and `report.json` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    write_text(&dir.join("report.txt"), &report.to_key_value())?;
    write_text(&dir.join("report.json"), &report.to_json())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| PipelineError::io(path, e))?;
    if !text.ends_with('\n') {
        w.write_all(b"\n").map_err(|e| PipelineError::io(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    WindowHours,
    Dim,
    Epochs,
    Negatives,
    MaxContexts,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::WindowHours => "window_hours",
            SweepParam::Dim => "dim",
            SweepParam::Epochs => "epochs",
            SweepParam::Negatives => "negatives",
            SweepParam::MaxContexts => "max_contexts",
        }
    }

    /// Whether the pair corpus depends on this parameter.
    fn changes_corpus(self) -> bool {
        matches!(self, SweepParam::WindowHours | SweepParam::MaxContexts)
    }

    pub fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<(), PipelineError> {
        let whole = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(PipelineError::Usage(format!("{} takes whole numbers, got {value}", self.as_str())))
            }
        };
        match self {
            SweepParam::WindowHours => cfg.window_hours = value,
            SweepParam::Dim => cfg.dim = whole()?,
            SweepParam::Epochs => cfg.epochs = whole()? as u32,
            SweepParam::Negatives => cfg.negatives = whole()?,
            SweepParam::MaxContexts => cfg.max_contexts = whole()?,
        }
        Ok(())
    }
}

impl FromStr for SweepParam {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [SweepParam::WindowHours, SweepParam::Dim, SweepParam::Epochs, SweepParam::Negatives, SweepParam::MaxContexts]
            .into_iter()
            .find(|p| p.as_str() == s.replace('-', "_"))
            .ok_or_else(|| PipelineError::Usage(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub match_rate: f64,
    pub silhouette: Option<f64>,
    pub pairs_per_epoch: usize,
    pub seconds: f64,
}

/// Trains and evaluates once per value. The corpus is rebuilt only when the
/// parameter affects it.
pub fn sweep(
    cfg: &RunConfig,
    inputs: &Inputs,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>, PipelineError> {
    let mut shared: Option<Box<dyn PairSource>> = None;
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        param.apply(&mut c, v)?;
        c.validate()?;
        let start = Instant::now();
        let fresh;
        let source: &dyn PairSource = if param.changes_corpus() {
            fresh = pair_source(&c, inputs)?;
            fresh.as_ref()
        } else {
            if shared.is_none() {
                shared = Some(pair_source(&c, inputs)?);
            }
            shared.as_deref().expect("just built")
        };
        let (model, _) = train_model(&c, inputs.places.len(), source)?;
        let report = evaluate(&c, &model.embeddings(), inputs)?;
        rows.push(SweepRow {
            value: v,
            match_rate: report.match_rate,
            silhouette: report.silhouette_mean,
            pairs_per_epoch: source.pairs_per_epoch(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// Plot-ready CSV. Timing is opt-in so the default output is reproducible.
pub fn write_sweep_csv<W: Write>(param: SweepParam, rows: &[SweepRow], timings: bool, w: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec![param.as_str(), "match_rate", "silhouette", "pairs_per_epoch"];
    if timings {
        header.push("seconds");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.value.to_string(),
            format!("{:.6}", r.match_rate),
            r.silhouette.map(|s| format!("{s:.6}")).unwrap_or_default(),
            r.pairs_per_epoch.to_string(),
        ];
        if timings {
            rec.push(format!("{:.3}", r.seconds));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_kind_parses_and_prints() {
        for s in ["trip", "od", "baseline:checkin", "baseline:distance", "baseline:combined", "baseline:itdl"] {
            assert_eq!(s.parse::<ModelKind>().unwrap().to_string(), s);
        }
        assert!("baseline:foo".parse::<ModelKind>().is_err());
        assert!("skipgram".parse::<ModelKind>().is_err());
    }

    #[test]
    fn run_config_round_trips_through_toml() {
        let cfg = RunConfig {
            places: Some("a/places.csv".into()),
            model: ModelKind::Baseline(BaselineModel::Itdl),
            window_hours: 0.25,
            holdout: Some(0.5),
            max_contexts: 0,
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        assert!(RunConfig::from_toml("dimm = 3").is_err());
    }

    #[test]
    fn derived_configs() {
        let cfg = RunConfig { window_hours: 0.5, max_contexts: 0, ..RunConfig::default() };
        let od = cfg.od_config().unwrap();
        assert_eq!(od.window_seconds, 1800);
        assert_eq!(od.max_contexts_per_center, None);
        assert_eq!(cfg.train_config().dim, 180);
        assert!(RunConfig { window_hours: 0.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { holdout: Some(1.5), ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { timezone: "EST".into(), ..RunConfig::default() }.validate().is_err());
        let b = RunConfig { model: ModelKind::Baseline(BaselineModel::Combined), ..RunConfig::default() };
        assert_eq!(b.spatial_config().model, BaselineModel::Combined);
    }

    #[test]
    fn sweep_params() {
        let mut cfg = RunConfig::default();
        SweepParam::Dim.apply(&mut cfg, 50.0).unwrap();
        assert_eq!(cfg.dim, 50);
        assert!(SweepParam::Dim.apply(&mut cfg, 50.5).is_err());
        assert_eq!("window-hours".parse::<SweepParam>().unwrap(), SweepParam::WindowHours);
    }
}
