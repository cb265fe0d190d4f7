//! Synthetic city: labeled places and timestamped trips whose movement
//! depends on origin and destination category.
//!
//! Each trip picks its origin by Zipf popularity, the destination category
//! from the origin category's flow row, and the destination by popularity
//! within that category. Departure hours come from the (origin, dest)
//! category pair's time profile; arrival adds `distance / speed` plus
//! lognormal noise.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_m, BoundingBox, GeoPoint};
use crate::ingest::{
    write_places, write_trips_csv, CategoryId, CategoryTable, IngestError, Place, PlaceId, RawTripRecord,
};
use crate::seed::stream_rng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("category `{0}` has no places")]
    EmptyCategory(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One Gaussian bump of departure hour-of-day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePeak {
    pub weight: f64,
    pub mean_hour: f64,
    pub sd_hours: f64,
}

impl TimePeak {
    pub const fn new(weight: f64, mean_hour: f64, sd_hours: f64) -> Self {
        TimePeak { weight, mean_hour, sd_hours }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_places: usize,
    pub n_trips: usize,
    pub category_labels: Vec<String>,
    /// Row-stochastic category transition probabilities.
    pub flow_matrix: Vec<Vec<f64>>,
    /// Departure-hour mixture per (origin category, dest category).
    pub time_profiles: Vec<Vec<Vec<TimePeak>>>,
    pub zipf_s: f64,
    pub bbox: BoundingBox,
    /// Trips are spread uniformly over this many days.
    pub days: u32,
    pub start_epoch: i64,
    pub speed_mps: f64,
    /// Median and log-sd of the lognormal duration noise, seconds.
    pub delay_median_s: f64,
    pub delay_sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn n_categories(&self) -> usize {
        self.category_labels.len()
    }

    /// Five categories: residential commuters head to offices in the morning,
    /// everything else heads home at its own hour. The four non-residential
    /// categories share one flow row and differ only in timing.
    pub fn city5(seed: u64) -> Self {
        let labels = ["residential", "office", "shopping", "dining", "nightlife"];
        let home = [0.70, 0.05, 0.05, 0.15, 0.05];
        let flow = vec![vec![0.05, 0.45, 0.15, 0.20, 0.15], home.to_vec(), home.to_vec(), home.to_vec(), home.to_vec()];
        // departure hour per (origin, dest)
        let hours = [
            [10.0, 8.0, 11.0, 19.0, 21.5],
            [17.0, 17.0, 17.0, 17.0, 17.0],
            [11.5, 11.5, 11.5, 11.5, 11.5],
            [19.0, 19.0, 19.0, 19.0, 19.0],
            [25.5, 25.5, 25.5, 25.5, 25.5],
        ];
        let time_profiles =
            hours.iter().map(|row| row.iter().map(|&h| vec![TimePeak::new(1.0, h, 0.75)]).collect()).collect();
        SynthConfig {
            n_places: 200,
            n_trips: 50_000,
            category_labels: labels.iter().map(|s| s.to_string()).collect(),
            flow_matrix: flow,
            time_profiles,
            zipf_s: 1.0,
            bbox: BoundingBox { min_lat: 40.70, max_lat: 40.80, min_lon: -74.02, max_lon: -73.93 },
            days: 730,
            start_epoch: 1_420_070_400,
            speed_mps: 10.0,
            delay_median_s: 180.0,
            delay_sigma: 0.5,
            seed,
        }
    }

    pub fn scenario(name: &str, seed: u64) -> Result<Self, SynthError> {
        match name {
            "city5" => Ok(Self::city5(seed)),
            _ => Err(SynthError::UnknownScenario(name.to_owned())),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let k = self.n_categories();
        if k < 2 {
            return bad(format!("need at least 2 categories, have {k}"));
        }
        if self.flow_matrix.len() != k || self.time_profiles.len() != k {
            return bad(format!("flow_matrix and time_profiles need {k} rows"));
        }
        for (i, row) in self.flow_matrix.iter().enumerate() {
            if row.len() != k || row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return bad(format!("flow_matrix row {i} must hold {k} non-negative values"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("flow_matrix row {i} sums to {sum}"));
            }
        }
        for (i, row) in self.time_profiles.iter().enumerate() {
            if row.len() != k {
                return bad(format!("time_profiles row {i} needs {k} entries"));
            }
            for (j, mix) in row.iter().enumerate() {
                let ok = !mix.is_empty()
                    && mix.iter().all(|p| p.weight > 0.0 && p.sd_hours > 0.0 && p.mean_hour.is_finite())
                    && mix.iter().all(|p| p.weight.is_finite() && p.sd_hours.is_finite());
                if !ok {
                    return bad(format!("time profile ({i},{j}) needs positive weights and sds"));
                }
            }
        }
        if !(self.zipf_s > 0.0 && self.zipf_s.is_finite()) {
            return bad(format!("zipf_s must be positive, got {}", self.zipf_s));
        }
        let b = &self.bbox;
        let corners_ok = GeoPoint::new(b.min_lat, b.min_lon).is_ok() && GeoPoint::new(b.max_lat, b.max_lon).is_ok();
        if !corners_ok || b.min_lat > b.max_lat || b.min_lon > b.max_lon {
            return bad("bbox must be a valid, non-inverted box".into());
        }
        let positive = |x: f64| x > 0.0;
        if self.days == 0
            || !positive(self.speed_mps)
            || !positive(self.delay_median_s)
            || self.delay_sigma.is_nan()
            || self.delay_sigma < 0.0
        {
            return bad("days, speed and delay median must be positive".into());
        }
        if self.n_places < k {
            return Err(SynthError::EmptyCategory(self.category_labels[self.n_places].clone()));
        }
        Ok(())
    }
}

/// Ground truth written next to the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub places_per_category: Vec<usize>,
    pub origins_per_category: Vec<u64>,
    /// Realized `transitions[origin_cat][dest_cat]` counts.
    pub transitions: Vec<Vec<u64>>,
    pub expected_retention: f64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub places: Vec<Place>,
    pub categories: CategoryTable,
    pub trips: Vec<RawTripRecord>,
    /// Generating `(origin, dest)` place of every trip.
    pub endpoints: Vec<(PlaceId, PlaceId)>,
    pub manifest: SynthManifest,
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-s)).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let k = cfg.n_categories();
    let categories = CategoryTable::from_labels(cfg.category_labels.iter().cloned())?;

    // equal category blocks; locations are random so block order carries no signal
    let mut rng = stream_rng(cfg.seed, "synth-places", 0);
    let b = cfg.bbox;
    let places: Vec<Place> = (0..cfg.n_places)
        .map(|i| {
            let lat = rng.random_range(b.min_lat..=b.max_lat);
            let lon = rng.random_range(b.min_lon..=b.max_lon);
            Place {
                id: PlaceId(i as u32),
                external_id: format!("p{i:05}"),
                location: GeoPoint::new(lat, lon).expect("inside validated bbox"),
                category: CategoryId((i * k / cfg.n_places) as u16),
            }
        })
        .collect();

    let mut ranks: Vec<usize> = (0..cfg.n_places).collect();
    ranks.shuffle(&mut rng);
    let weights = zipf_weights(cfg.n_places, cfg.zipf_s);
    let popularity: Vec<f64> = ranks.iter().map(|&r| weights[r]).collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for p in &places {
        members[p.category.index()].push(p.id.index());
    }
    let origin_dist = WeightedIndex::new(&popularity).expect("positive weights");
    let member_dist: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| popularity[i])).expect("non-empty category"))
        .collect();
    let flow_dist: Vec<WeightedIndex<f64>> =
        cfg.flow_matrix.iter().map(|row| WeightedIndex::new(row).expect("validated row")).collect();
    let delay = LogNormal::new(cfg.delay_median_s.ln(), cfg.delay_sigma).expect("validated delay");

    let mut rng = stream_rng(cfg.seed, "synth-trips", 0);
    let mut trips = Vec::with_capacity(cfg.n_trips);
    let mut endpoints = Vec::with_capacity(cfg.n_trips);
    let mut origins_per_category = vec![0u64; k];
    let mut transitions = vec![vec![0u64; k]; k];
    for _ in 0..cfg.n_trips {
        let o = origin_dist.sample(&mut rng);
        let oc = places[o].category.index();
        let dc = flow_dist[oc].sample(&mut rng);
        let d = members[dc][member_dist[dc].sample(&mut rng)];

        let mix = &cfg.time_profiles[oc][dc];
        let peak = mix[WeightedIndex::new(mix.iter().map(|p| p.weight)).expect("validated").sample(&mut rng)];
        let hour = Normal::new(peak.mean_hour, peak.sd_hours).expect("validated").sample(&mut rng);
        let day = rng.random_range(0..cfg.days) as i64;
        let depart = cfg.start_epoch + day * 86_400 + (hour * 3600.0).round() as i64;
        let travel = haversine_m(places[o].location, places[d].location) / cfg.speed_mps + delay.sample(&mut rng);
        let arrive = depart + travel.round() as i64;

        trips.push(RawTripRecord {
            pickup: Some(places[o].location),
            dropoff: Some(places[d].location),
            pickup_time: depart,
            dropoff_time: arrive,
        });
        endpoints.push((PlaceId(o as u32), PlaceId(d as u32)));
        origins_per_category[oc] += 1;
        transitions[oc][dc] += 1;
    }

    let manifest = SynthManifest {
        config: cfg.clone(),
        places_per_category: members.iter().map(Vec::len).collect(),
        origins_per_category,
        transitions,
        expected_retention: 1.0,
    };
    Ok(SynthOutput { places, categories, trips, endpoints, manifest })
}

impl SynthOutput {
    /// Writes `places.csv`, `trips.csv` and `manifest.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let create = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(io(&p))
        };
        write_places(&self.places, &self.categories, create("places.csv")?)?;
        write_trips_csv(&self.trips, create("trips.csv")?)?;
        let mut m = create("manifest.json")?;
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        let p = dir.join("manifest.json");
        m.write_all(json.as_bytes()).and_then(|_| m.write_all(b"\n")).and_then(|_| m.flush()).map_err(io(&p))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { n_places: 40, n_trips: 2_000, ..SynthConfig::city5(seed) }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small(1)).unwrap();
        let b = generate(&small(1)).unwrap();
        assert_eq!(a.trips, b.trips);
        assert_eq!(a.places, b.places);
        assert_ne!(generate(&small(2)).unwrap().trips, a.trips);
    }

    #[test]
    fn zero_trips_is_valid() {
        let out = generate(&SynthConfig { n_trips: 0, ..small(1) }).unwrap();
        assert!(out.trips.is_empty());
        assert_eq!(out.places.len(), 40);
    }

    #[test]
    fn identity_flow_keeps_category() {
        let mut cfg = small(3);
        let k = cfg.n_categories();
        cfg.flow_matrix = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let out = generate(&cfg).unwrap();
        for &(o, d) in &out.endpoints {
            assert_eq!(out.places[o.index()].category, out.places[d.index()].category);
        }
    }

    #[test]
    fn too_few_places_is_an_error() {
        let cfg = SynthConfig { n_places: 3, ..small(1) };
        assert!(matches!(generate(&cfg), Err(SynthError::EmptyCategory(c)) if c == "dining"));
    }

    #[test]
    fn rejects_bad_flow_rows() {
        let mut cfg = small(1);
        cfg.flow_matrix[0][0] += 0.01;
        assert!(matches!(cfg.validate(), Err(SynthError::InvalidConfig(_))));
        let cfg = SynthConfig { zipf_s: 0.0, ..small(1) };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn endpoints_sit_on_places() {
        let out = generate(&small(5)).unwrap();
        for (t, &(o, d)) in out.trips.iter().zip(&out.endpoints) {
            assert_eq!(t.pickup.unwrap(), out.places[o.index()].location);
            assert_eq!(t.dropoff.unwrap(), out.places[d.index()].location);
            assert!(t.dropoff_time > t.pickup_time);
        }
    }
}
