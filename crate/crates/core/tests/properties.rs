//! Property and oracle tests across modules.

use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use placemove::baselines::{
    baseline_pairs, beta, spatial_contexts, type_stats, BaselineModel, BetaInputs, SpatialContextConfig,
};
use placemove::eval::{self, match_rate, silhouette};
use placemove::geo::{haversine_m, GeoPoint, GridIndex};
use placemove::ingest::{
    read_places, snap_trips, write_places, CategoryId, CheckinCounts, DropReason, Place, PlaceId, RawRow,
    RawTripRecord, Trip,
};
use placemove::pairs::{od_pairs, OdConfig, OdIndex, StaticPairs, TrainingPair};
use placemove::synth::{generate, SynthConfig};
use placemove::trainer::{init_model, train, Embeddings, TrainConfig, TrainMode};

fn point(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

fn city_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
    (0..n).map(|_| point(rng.random_range(40.70..40.80), rng.random_range(-74.02..-73.93))).collect()
}

fn linear_within(pts: &[GeoPoint], q: GeoPoint, r: f64) -> Vec<(u32, f64)> {
    let mut v: Vec<(u32, f64)> =
        pts.iter().enumerate().map(|(i, &p)| (i as u32, haversine_m(q, p))).filter(|&(_, d)| d <= r).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

#[test]
fn grid_queries_equal_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pts = city_points(&mut rng, 1000);
    let idx = GridIndex::build(&pts, 200.0).unwrap();
    for _ in 0..1000 {
        let q = point(rng.random_range(40.69..40.81), rng.random_range(-74.03..-73.92));
        let r = rng.random_range(10.0..800.0);
        let want = linear_within(&pts, q, r);
        let mut got = idx.within(q, r);
        got.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        assert_eq!(got, want);
        assert_eq!(idx.nearest_within(q, r), want.first().copied());
        let k = rng.random_range(1..15);
        let all = linear_within(&pts, q, f64::INFINITY);
        assert_eq!(idx.k_nearest(q, k, None), all[..k].to_vec());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_matches_scan_anywhere(
        raw in prop::collection::vec((-89.9f64..89.9, -179.9f64..179.9), 1..80),
        q in (-90.0f64..90.0, -180.0f64..180.0),
        r in 1.0f64..2.0e6,
        cell in 50.0f64..5.0e5,
    ) {
        let pts: Vec<GeoPoint> = raw.iter().map(|&(a, b)| point(a, b)).collect();
        let idx = GridIndex::build(&pts, cell).unwrap();
        let q = point(q.0, q.1);
        let mut got = idx.within(q, r);
        got.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        prop_assert_eq!(got, linear_within(&pts, q, r));
    }

    #[test]
    fn od_pairs_are_symmetric_and_cap_is_monotone(
        raw in prop::collection::vec((0u32..8, 0u32..5, 0i64..5000), 0..120),
        w in 1i64..2000,
    ) {
        let trips: Vec<Trip> = raw
            .iter()
            .map(|&(o, d, t)| Trip { origin: PlaceId(o), dest: PlaceId(d), depart: t - 300, arrive: t })
            .collect();
        let cfg = OdConfig { window_seconds: w, max_contexts_per_center: None, seed: 1 };
        let pairs = od_pairs(&trips, &cfg, 0).unwrap();
        let mut counts: HashMap<(u32, u32), i64> = HashMap::new();
        for p in &pairs {
            *counts.entry((p.center.0, p.context.0)).or_default() += 1;
        }
        for (&(a, b), &c) in &counts {
            prop_assert_eq!(counts.get(&(b, a)).copied().unwrap_or(0), c);
        }
        let index = OdIndex::build(&trips, w);
        prop_assert_eq!(index.full_pair_count(), pairs.len());
        let mut prev = 0;
        for cap in 1..12 {
            let n = index.pair_count(Some(cap));
            prop_assert!(n >= prev && n <= pairs.len());
            prop_assert_eq!(index.pairs(Some(cap), 3, 0).len(), n);
            prev = n;
        }
    }

    #[test]
    fn match_rate_is_scale_invariant(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 3..30),
        labels in prop::collection::vec(0u16..3, 30),
        scale in 0.01f64..100.0,
    ) {
        prop_assume!(rows.iter().all(|r| r.iter().any(|&x| x.abs() > 1e-3)));
        let n = rows.len();
        let cats: Vec<CategoryId> = labels[..n].iter().map(|&l| CategoryId(l)).collect();
        let ids: Vec<PlaceId> = (0..n as u32).map(PlaceId).collect();
        let a = match_rate(&Embeddings::from_rows(&rows), &ids, &cats).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
        let b = match_rate(&Embeddings::from_rows(&scaled), &ids, &cats).unwrap();
        prop_assert_eq!(a.matched_ids, b.matched_ids);
    }
}

#[test]
fn metrics_ignore_place_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<CategoryId> = (0..n).map(|_| CategoryId(rng.random_range(0..3))).collect();
    let ids: Vec<PlaceId> = (0..n as u32).map(PlaceId).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let prow: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
    let plab: Vec<CategoryId> = perm.iter().map(|&i| labels[i]).collect();
    let a = match_rate(&Embeddings::from_rows(&rows), &ids, &labels).unwrap();
    let b = match_rate(&Embeddings::from_rows(&prow), &ids, &plab).unwrap();
    assert_eq!(a.rate, b.rate);
    let sa = silhouette(&Embeddings::from_rows(&rows), &ids, &labels).unwrap();
    let sb = silhouette(&Embeddings::from_rows(&prow), &ids, &plab).unwrap();
    assert!((sa.mean - sb.mean).abs() < 1e-12);
    assert!((-1.0..=1.0).contains(&sa.mean));
}

#[test]
fn shuffled_labels_match_at_marginal_rate() {
    // random vectors carry no category signal, so the nearest neighbour
    // matches with probability sum_c p_c^2
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 2000;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let weights = [0.5, 0.3, 0.2];
    let labels: Vec<CategoryId> = (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            CategoryId(if x < 0.5 {
                0
            } else if x < 0.8 {
                1
            } else {
                2
            })
        })
        .collect();
    let ids: Vec<PlaceId> = (0..n as u32).map(PlaceId).collect();
    let rate = match_rate(&Embeddings::from_rows(&rows), &ids, &labels).unwrap().rate;
    let p: f64 = weights.iter().map(|w| w * w).sum();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((rate - p).abs() <= 3.0 * sigma, "rate {rate}, expected {p} ± {}", 3.0 * sigma);
}

#[test]
fn snapping_conserves_rows_and_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts = city_points(&mut rng, 300);
    let idx = GridIndex::build(&pts, 200.0).unwrap();
    let rows: Vec<RawRow> = (0..5000)
        .map(|_| {
            if rng.random_bool(0.05) {
                return RawRow::Rejected(DropReason::Malformed);
            }
            let near = |rng: &mut ChaCha8Rng| {
                let p = pts[rng.random_range(0..pts.len())];
                point(p.lat() + rng.random_range(-0.003..0.003), p.lon() + rng.random_range(-0.003..0.003))
            };
            let pickup = if rng.random_bool(0.1) { None } else { Some(near(&mut rng)) };
            RawRow::Record(RawTripRecord { pickup, dropoff: Some(near(&mut rng)), pickup_time: 0, dropoff_time: 60 })
        })
        .collect();
    let out = snap_trips(rows.iter().map(|r| Ok(*r)), &idx, 200.0).unwrap();
    assert_eq!(out.stats.total, 5000);
    assert_eq!(out.stats.total, out.stats.retained + out.stats.dropped());
    assert_eq!(out.checkins.total(), out.trips.len() as u64);
    let mut k = 0;
    for r in &rows {
        let RawRow::Record(rec) = r else { continue };
        let (Some(p), Some(d)) = (rec.pickup, rec.dropoff) else { continue };
        let (o, dd) = (linear_within(&pts, p, 200.0), linear_within(&pts, d, 200.0));
        if let (Some(o), Some(dd)) = (o.first(), dd.first()) {
            assert_eq!((out.trips[k].origin.0, out.trips[k].dest.0), (o.0, dd.0));
            k += 1;
        }
    }
    assert_eq!(k, out.trips.len());
}

#[test]
fn synth_places_round_trip_through_csv() {
    let city = generate(&SynthConfig { n_trips: 0, ..SynthConfig::city5(42) }).unwrap();
    let mut buf = Vec::new();
    write_places(&city.places, &city.categories, &mut buf).unwrap();
    let (places, table) = read_places(&buf[..]).unwrap();
    assert_eq!(places, city.places);
    assert_eq!(table.labels(), city.categories.labels());
}

#[test]
fn synth_transitions_follow_flow_matrix() {
    let cfg = SynthConfig { n_trips: 20_000, ..SynthConfig::city5(7) };
    let city = generate(&cfg).unwrap();
    for (i, row) in city.manifest.transitions.iter().enumerate() {
        let n: u64 = row.iter().sum();
        for (j, &c) in row.iter().enumerate() {
            let p = cfg.flow_matrix[i][j];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = c as f64 / n as f64;
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "({i},{j}): {freq} vs {p}");
        }
    }
}

#[test]
fn synth_zipf_origins_fit_the_exponent() {
    let cfg = SynthConfig { n_trips: 10_000, zipf_s: 1.2, ..SynthConfig::city5(8) };
    let city = generate(&cfg).unwrap();
    let trips: Vec<Trip> =
        city.endpoints.iter().map(|&(o, d)| Trip { origin: o, dest: d, depart: 0, arrive: 0 }).collect();
    let fit = eval::power_law_fit(&trips).unwrap();
    assert!((fit.slope + 1.2).abs() <= 0.15, "slope {}", fit.slope);
}

fn random_places(rng: &mut ChaCha8Rng, n: usize, types: u16) -> Vec<Place> {
    city_points(rng, n)
        .into_iter()
        .enumerate()
        .map(|(i, location)| Place {
            id: PlaceId(i as u32),
            external_id: format!("p{i}"),
            location,
            category: CategoryId(rng.random_range(0..types)),
        })
        .collect()
}

#[test]
fn spatial_contexts_match_brute_force_knn() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let places = random_places(&mut rng, 300, 4);
    let pts: Vec<GeoPoint> = places.iter().map(|p| p.location).collect();
    let idx = GridIndex::build(&pts, 200.0).unwrap();
    let ctx = spatial_contexts(&places, &idx, 10);
    assert_eq!(ctx.len(), 3000);
    for p in &places {
        let mut all: Vec<(u32, f64)> = linear_within(&pts, p.location, f64::INFINITY);
        all.retain(|&(j, _)| j != p.id.0);
        let got: Vec<(u32, f64)> =
            ctx.iter().filter(|c| c.center == p.id).map(|c| (c.context.0, c.distance_m)).collect();
        assert_eq!(got, all[..10].to_vec());
    }
}

#[test]
fn itdl_statistics_match_histogram_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let places = random_places(&mut rng, 100, 4);
    let counts = CheckinCounts { counts: (0..100).map(|_| rng.random_range(0..50)).collect() };
    let pts: Vec<GeoPoint> = places.iter().map(|p| p.location).collect();
    let idx = GridIndex::build(&pts, 200.0).unwrap();
    let contexts = spatial_contexts(&places, &idx, 10);
    let h = 300.0;
    let stats = type_stats(&places, &counts, &contexts, 4, h);
    for c in &contexts {
        let bin = (c.distance_m / h).floor() as u32;
        let t = places[c.context.index()].category;
        let same_bin: Vec<_> =
            contexts.iter().filter(|x| x.center == c.center && (x.distance_m / h).floor() as u32 == bin).collect();
        let p_t: u64 =
            same_bin.iter().filter(|x| places[x.context.index()].category == t).map(|x| counts.get(x.context)).sum();
        let p_all: u64 = same_bin.iter().map(|x| counts.get(x.context)).sum();
        let n_t = same_bin.iter().filter(|x| places[x.context.index()].category == t).count();
        let a = -(1.0 - p_t as f64 / (1.0 + p_all as f64)).log2();
        let u = -(n_t as f64 / same_bin.len() as f64).log2();
        assert!((stats.activity(c.center, bin, t) - a).abs() < 1e-12);
        assert!((stats.uniqueness(c.center, bin, t) - u).abs() < 1e-12);
    }
}

#[test]
fn baseline_pair_total_equals_beta_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let places = random_places(&mut rng, 60, 3);
    let counts = CheckinCounts { counts: (0..60).map(|_| rng.random_range(0..200)).collect() };
    let pts: Vec<GeoPoint> = places.iter().map(|p| p.location).collect();
    let idx = GridIndex::build(&pts, 200.0).unwrap();
    let contexts = spatial_contexts(&places, &idx, 5);
    let stats = type_stats(&places, &counts, &contexts, 3, 30.0);
    for model in BaselineModel::ALL {
        let cfg = SpatialContextConfig { model, k_neighbors: 5, ..SpatialContextConfig::default() };
        let inputs = BetaInputs { places: &places, counts: &counts, stats: Some(&stats) };
        let pairs = baseline_pairs(&contexts, &cfg, &inputs).unwrap();
        let recount: usize = contexts.iter().map(|c| beta(&cfg, c, &inputs).unwrap() as usize).sum();
        assert_eq!(pairs.len(), recount, "{model}");
        assert!(pairs.len() >= contexts.len());
    }
}

#[test]
fn exact_softmax_objective_never_drops() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pairs: Vec<TrainingPair> = (0..500)
        .map(|_| {
            let c = rng.random_range(0..20u32);
            TrainingPair::new(PlaceId(c), PlaceId((c * 3 + rng.random_range(0..3)) % 20))
        })
        .collect();
    let cfg = TrainConfig { dim: 8, epochs: 6, mode: TrainMode::ExactSoftmax, seed: 5, ..TrainConfig::default() };
    let mut m = init_model(20, &cfg).unwrap();
    let stats = train(&mut m, &StaticPairs::new(pairs, 5), &cfg).unwrap();
    let mut prev = stats.initial_objective.unwrap();
    for e in &stats.epochs {
        let obj = e.objective.unwrap();
        assert!(obj - prev >= -1e-6, "epoch {}: {prev} -> {obj}", e.epoch);
        prev = obj;
    }
}
