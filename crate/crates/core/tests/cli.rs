//! End-to-end tests of the `placemove` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use placemove::ingest::{read_trip_rows, write_trips_csv, RawRow, TimeZoneSpec};
use placemove::pipeline::RunConfig;
use placemove::trainer::init_model;
use placemove::trainer::io::read_word2vec;

fn placemove(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_placemove"))
        .args(args)
        .env("PLACEMOVE_CACHE_DIR", cache)
        .output()
        .expect("spawn placemove")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in:\n{text}"))
        .to_string()
}

struct City {
    dir: tempfile::TempDir,
}

impl City {
    fn new(trips: usize) -> City {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let n = trips.to_string();
        ok(&placemove(
            &["synth", "--scenario", "city5", "--seed", "3", "--n-trips", &n, "--days", "60", "--out", s(&data)],
            &dir.path().join("cache"),
        ));
        City { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn data(&self, file: &str) -> PathBuf {
        self.path("data").join(file)
    }

    fn run(&self, cmd: &str, extra: &[&str]) -> Output {
        let places = self.data("places.csv");
        let trips = self.data("trips.csv");
        let mut args = vec![cmd, "--places", s(&places), "--trips", s(&trips)];
        args.extend_from_slice(extra);
        placemove(&args, &self.path("cache"))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: [&str; 4] = ["--dim", "16", "--epochs", "1"];

#[test]
fn missing_input_names_the_path() {
    let city = City::new(500);
    let missing = city.path("nope/trips.csv");
    let out =
        placemove(&["ingest", "--places", s(&city.data("places.csv")), "--trips", s(&missing)], &city.path("cache"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(placemove(&["train", "--dim", "many"], tmp.path()).status.code(), Some(2));
    assert_eq!(placemove(&["bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(placemove(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn synthetic_city_ingests_completely() {
    let city = City::new(3000);
    let out = city.path("ingest");
    let text = ok(&city.run("ingest", &["--no-cache", "--out", s(&out)]));
    assert_eq!(kv(&text, "total"), "3000");
    assert_eq!(kv(&text, "retained"), "3000");
    assert_eq!(kv(&text, "retention"), "1.000000");
    assert_eq!(fs::read_to_string(out.join("drop_stats.txt")).unwrap(), text);
    let checkins = fs::read_to_string(out.join("checkins.csv")).unwrap();
    let total: u64 = checkins.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 3000);
}

#[test]
fn missing_coordinates_are_counted() {
    let city = City::new(1000);
    let f = fs::File::open(city.data("trips.csv")).unwrap();
    let mut records: Vec<_> = read_trip_rows(f, TimeZoneSpec(chrono::FixedOffset::east_opt(0).unwrap()))
        .unwrap()
        .map(|r| match r.unwrap() {
            RawRow::Record(rec) => rec,
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    for r in records.iter_mut().step_by(10) {
        r.pickup = None;
    }
    write_trips_csv(&records, fs::File::create(city.data("trips.csv")).unwrap()).unwrap();
    let text = ok(&city.run("ingest", &["--no-cache"]));
    assert_eq!(kv(&text, "missing_coords"), "100");
    assert_eq!(kv(&text, "retained"), "900");
    assert_eq!(kv(&text, "retention"), "0.900000");
}

#[test]
fn zero_epochs_keeps_initial_vectors() {
    let city = City::new(500);
    let out = city.path("train0");
    ok(&city.run("train", &["--dim", "8", "--epochs", "0", "--seed", "9", "--full-precision", "--out", s(&out)]));
    let (labels, vectors) =
        read_word2vec(std::io::BufReader::new(fs::File::open(out.join("embeddings.txt")).unwrap())).unwrap();
    let cfg = RunConfig { dim: 8, epochs: 0, seed: 9, ..RunConfig::default() };
    let init = init_model(labels.len(), &cfg.train_config()).unwrap().embeddings();
    assert_eq!(vectors, init);
}

#[test]
fn eval_rejects_missing_embeddings() {
    let city = City::new(500);
    let missing = city.path("missing.txt");
    let out = city.run("eval", &["--embeddings", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn train_then_eval_agrees_with_report() {
    let city = City::new(4000);
    let (train_dir, report_dir) = (city.path("train"), city.path("report"));
    ok(&city.run("train", &[&FAST[..], &["--full-precision", "--out", s(&train_dir)]].concat()));
    let rank = city.path("rank.csv");
    let eval =
        ok(&city.run("eval", &["--embeddings", s(&train_dir.join("embeddings.txt")), "--dump-rank-freq", s(&rank)]));
    let report = ok(&city.run("report", &[&FAST[..], &["--full-precision", "--out", s(&report_dir)]].concat()));
    assert_eq!(eval, report);
    assert_eq!(fs::read_to_string(report_dir.join("report.txt")).unwrap(), report);
    for f in ["embeddings.txt", "checkpoint.bin", "train_stats.json", "config.toml", "report.json", "drop_stats.txt"] {
        assert!(report_dir.join(f).exists(), "{f}");
    }
    let rows = fs::read_to_string(rank).unwrap().lines().count();
    assert!(rows > 10);

    let sweep = ok(&city.run("sweep", &[&FAST[..], &["--param", "dim", "--values", "16"]].concat()));
    let row: Vec<&str> = sweep.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], kv(&report, "match_rate"));
    assert_eq!(row[2], kv(&report, "silhouette_mean"));
}

#[test]
fn dim_sweep_has_one_row_per_value() {
    let city = City::new(1500);
    let out = city.path("sweep.csv");
    ok(&city.run("sweep", &["--epochs", "1", "--param", "dim", "--values", "50,100,180", "--out", s(&out)]));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dim,match_rate,silhouette,pairs_per_epoch");
    let dims: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(dims, ["50", "100", "180"]);
}

#[test]
fn config_file_equals_flags() {
    let city = City::new(800);
    let cfg = RunConfig {
        places: Some(city.data("places.csv")),
        trips: Some(city.data("trips.csv")),
        dim: 16,
        epochs: 1,
        window_hours: 2.0,
        max_contexts: 20,
        seed: 5,
        ..RunConfig::default()
    };
    let path = city.path("run.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let (a, b) = (city.path("a"), city.path("b"));
    ok(&placemove(&["train", "--config", s(&path), "--out", s(&a)], &city.path("cache")));
    ok(&city.run(
        "train",
        &["--dim", "16", "--epochs", "1", "--window-hours", "2", "--max-contexts", "20", "--seed", "5", "--out", s(&b)],
    ));
    let resolved = |dir: &Path| RunConfig { out: None, ..RunConfig::load(&dir.join("config.toml")).unwrap() };
    assert_eq!(resolved(&a), RunConfig { out: None, ..cfg });
    assert_eq!(resolved(&b), resolved(&a));
    for f in ["embeddings.txt", "checkpoint.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn single_thread_runs_repeat_exactly() {
    let city = City::new(1500);
    let (a, b) = (city.path("a"), city.path("b"));
    ok(&city.run("report", &[&FAST[..], &["--threads", "1", "--out", s(&a)]].concat()));
    ok(&city.run("report", &[&FAST[..], &["--threads", "1", "--no-cache", "--out", s(&b)]].concat()));
    for f in ["embeddings.txt", "checkpoint.bin", "report.txt", "report.json", "train_stats.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
