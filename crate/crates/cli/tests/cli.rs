use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oge_core::hdr_io::{write_radiance_hdr, HdrImage};
use oge_core::ml::{predict, TrainedModel};
use oge_core::mrl::{build_mask, GridSpec, CALIBRATED_ELLIPSE};
use oge_core::pipeline::{image_metrics, image_mrl, load_hdr, MetricsConfig};
use oge_core::FeatureTable;
use tempfile::TempDir;

fn oge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oge")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = oge(args);
    assert!(
        out.status.success(),
        "oge {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let c = dir.join("corpus");
    ok(&[
        "synth",
        "--n",
        &n.to_string(),
        "--size",
        "64",
        "--seed",
        &seed.to_string(),
        "--out",
        s(&c),
    ]);
    c
}

fn table(path: &Path) -> FeatureTable {
    FeatureTable::read_csv(fs::File::open(path).unwrap()).unwrap()
}

fn write_image(path: &Path, img: &HdrImage) {
    write_radiance_hdr(img, fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn help_version_and_usage_exit_codes() {
    assert_eq!(code(&oge(&["--help"])), 0);
    assert_eq!(code(&oge(&["--version"])), 0);
    assert_eq!(code(&oge(&[])), 1);
    assert_eq!(code(&oge(&["extract", "--no-such-flag", "x"])), 1);
    assert_eq!(code(&oge(&["synth", "--n", "0", "--out", "/tmp/unused"])), 1);
    assert_eq!(code(&oge(&["roc", "missing.csv", "--folds", "1"])), 1);
}

#[test]
fn synth_quota_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["synth", "--n", "80", "--size", "48", "--seed", "7", "--out", s(&a)]);
    ok(&["synth", "--n", "80", "--size", "48", "--seed", "7", "--out", s(&b)]);
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest, fs::read_to_string(b.join("manifest.csv")).unwrap());
    assert!(manifest.starts_with("# oge "));
    let rows: Vec<&str> = manifest.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 80);
    assert_eq!(rows.iter().filter(|r| r.split(',').nth(1) == Some("1")).count(), 30);
    for id in [0, 41, 79] {
        let name = format!("scene_{id:04}.hdr");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn extract_matches_library_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), 12, 2);
    let manifest = c.join("manifest.csv");
    let out1 = dir.path().join("f1.csv");
    let out2 = dir.path().join("f2.csv");
    let r = ok(&[
        "extract",
        s(&c),
        "--grid",
        "25",
        "--labels",
        s(&manifest),
        "--out",
        s(&out1),
    ]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("manifest.csv: not an HDR file"));
    ok(&[
        "extract",
        s(&c),
        "--grid",
        "25",
        "--labels",
        s(&manifest),
        "--out",
        s(&out2),
    ]);
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());

    let t = table(&out1);
    assert_eq!(t.comment_value("dataset"), Some("MRL-375"));
    assert_eq!(t.rows.len(), 12);
    assert_eq!(t.feature_names.len(), 375);
    assert!(t.labels.is_some());
    let mask = build_mask(GridSpec::new(25).unwrap(), &CALIBRATED_ELLIPSE).unwrap();
    for (id, row) in t.ids.iter().zip(&t.rows) {
        let img = load_hdr(&c.join(format!("{id}.hdr"))).unwrap();
        let v = image_mrl(&img, &mask, &Default::default()).unwrap();
        assert!(
            v.region_means.iter().zip(row).all(|(a, b)| a.to_bits() == b.to_bits()),
            "{id}"
        );
    }
}

#[test]
fn extract_several_grids_into_a_directory() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), 4, 5);
    let out = dir.path().join("grids");
    ok(&[
        "extract",
        s(&c),
        "--grid",
        "10,20",
        "--mask",
        "ellipse:0.4,0.4",
        "--out",
        s(&out),
    ]);
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    assert!(table(&out.join(&names[0])).labels.is_none());
    assert_eq!(code(&oge(&["extract", s(&c), "--grid", "10,20"])), 1);
}

#[test]
fn extract_input_errors() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&oge(&["extract", s(&empty)])), 2);

    let mixed = dir.path().join("mixed");
    fs::create_dir(&mixed).unwrap();
    write_image(&mixed.join("good.hdr"), &HdrImage::uniform(32, 32, [1.0; 3]).unwrap());
    fs::write(mixed.join("bad.hdr"), b"not radiance").unwrap();
    let out = dir.path().join("x.csv");
    let r = ok(&["extract", s(&mixed), "--grid", "10", "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.hdr"));
    assert_eq!(table(&out).ids, vec!["good"]);
    assert_eq!(code(&oge(&["extract", s(&mixed), "--grid", "10", "--strict"])), 2);
}

#[test]
fn metrics_on_a_uniform_scene_and_library_equivalence() {
    let dir = TempDir::new().unwrap();
    let imgs = dir.path().join("imgs");
    fs::create_dir(&imgs).unwrap();
    let l = 120.0;
    let grey = HdrImage::uniform(200, 200, [(l / 179.0) as f32; 3]).unwrap();
    write_image(&imgs.join("grey.hdr"), &grey);
    let out = dir.path().join("m.csv");
    ok(&["metrics", s(&imgs), "--out", s(&out)]);
    let t = table(&out);
    assert_eq!(t.feature_names.len(), 24);
    let col = |name: &str| t.rows[0][t.feature_names.iter().position(|n| n == name).unwrap()];
    let stored = load_hdr(&imgs.join("grey.hdr")).unwrap();
    let lum = oge_core::hdr_io::to_luminance(&stored).values()[0];
    assert!((col("Ev") - std::f64::consts::PI * lum).abs() / col("Ev") < 1e-2);
    assert_eq!(col("Omega_S"), 0.0);
    assert!(t.rows[0].iter().all(|v| v.is_finite()));
    let lib = image_metrics(&stored, &MetricsConfig::default()).unwrap();
    assert!(lib
        .values()
        .iter()
        .zip(&t.rows[0])
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn train_predict_round_trip_matches_library() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), 40, 9);
    let features = dir.path().join("f.csv");
    ok(&[
        "extract",
        s(&c),
        "--grid",
        "10",
        "--labels",
        s(&c.join("manifest.csv")),
        "--out",
        s(&features),
    ]);
    let model_path = dir.path().join("model.json");
    let report1 = ok(&["train", s(&features), "--model", s(&model_path), "--seed", "3"]).stdout;
    let report2 = ok(&["train", s(&features), "--model", s(&model_path), "--seed", "3"]).stdout;
    assert_eq!(report1, report2);
    let text = String::from_utf8(report1).unwrap();
    let data_line = text.lines().last().unwrap();
    assert!(data_line.starts_with("MRL-62,rusboost_trees,40,15,"));

    let model = TrainedModel::from_json(&fs::read_to_string(&model_path).unwrap()).unwrap();
    assert!(model.extraction.is_some());
    let pred_path = dir.path().join("p.csv");
    ok(&["predict", "--model", s(&model_path), s(&c), "--out", s(&pred_path)]);
    let pred = fs::read_to_string(&pred_path).unwrap();
    let rows: Vec<&str> = pred.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "image_id,score,label");
    assert_eq!(rows.len(), 41);
    let t = table(&features);
    for (line, (id, x)) in rows[1..].iter().zip(t.ids.iter().zip(&t.rows)) {
        let p = predict(&model, x).unwrap();
        assert_eq!(*line, format!("{id},{},{}", p.score, u8::from(p.glare)));
    }

    let from_csv = dir.path().join("p2.csv");
    ok(&[
        "predict",
        "--model",
        s(&model_path),
        "--features",
        s(&features),
        "--out",
        s(&from_csv),
    ]);
    let a: Vec<String> = pred.lines().filter(|l| !l.starts_with('#')).map(String::from).collect();
    let b: Vec<String> = fs::read_to_string(&from_csv)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(a, b);
}

#[test]
fn train_and_predict_data_errors() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), 10, 4);
    let unlabeled = dir.path().join("u.csv");
    ok(&["extract", s(&c), "--grid", "10", "--out", s(&unlabeled)]);
    assert_eq!(code(&oge(&["train", s(&unlabeled), "--model", "/tmp/never.json"])), 2);

    let single = dir.path().join("single.csv");
    fs::write(
        &single,
        "id,a,b,label\nr1,1,2,1\nr2,3,4,1\nr3,5,6,1\nr4,7,8,1\nr5,9,1,1\n",
    )
    .unwrap();
    let model = dir.path().join("m.json");
    let r = ok(&[
        "train",
        s(&single),
        "--model",
        s(&model),
        "--algorithm",
        "decision_tree",
    ]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("DegenerateDataWarning"));
    assert_eq!(
        code(&oge(&["train", s(&single), "--model", s(&model), "--param", "x"])),
        1
    );

    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "id,a\nr1,1\n").unwrap();
    assert_eq!(
        code(&oge(&["predict", "--model", s(&model), "--features", s(&wrong)])),
        2
    );
    assert_eq!(code(&oge(&["predict", "--model", s(&model), s(&c)])), 2);
}

#[test]
fn roc_table_covers_every_metric() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), 40, 11);
    let m = dir.path().join("m.csv");
    ok(&["metrics", s(&c), "--labels", s(&c.join("manifest.csv")), "--out", s(&m)]);
    for mode in ["per-fold", "mean-cutoff"] {
        let out = ok(&["roc", s(&m), "--seed", "1", "--fold-eval", mode]).stdout;
        let text = String::from_utf8(out).unwrap();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers().unwrap().clone();
        let idx = |n: &str| header.iter().position(|h| h == n).unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 24);
        let oa: Vec<f64> = rows.iter().map(|r| r[idx("oa")].parse().unwrap()).collect();
        assert!(oa.windows(2).all(|w| w[0] >= w[1]));
        let vcp = rows.iter().find(|r| &r[0] == "VCP").unwrap();
        assert_eq!(&vcp[idx("orientation")], "lower");
        assert!(vcp[idx("auc")].parse::<f64>().unwrap() >= 0.5);
    }
    let single = dir.path().join("single.csv");
    fs::write(&single, "id,Ev,label\na,1,1\nb,2,1\nc,3,1\nd,4,1\ne,5,1\n").unwrap();
    assert_eq!(code(&oge(&["roc", s(&single)])), 2);
    assert_eq!(code(&oge(&["roc", s(&m), "--objective", "nope"])), 1);
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), 8, 6);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_oge"))
            .env("OGE_THREADS", threads)
            .args(["metrics", s(&c)])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn falsecolor_maps() {
    let dir = TempDir::new().unwrap();
    let uniform = dir.path().join("u.hdr");
    write_image(&uniform, &HdrImage::uniform(8, 4, [1.0; 3]).unwrap());
    let out = dir.path().join("u.ppm");
    ok(&["falsecolor", s(&uniform), "--out", s(&out)]);
    let img = image::open(&out).unwrap().to_rgb8();
    assert_eq!((img.width(), img.height()), (8, 4));
    let first = *img.get_pixel(0, 0);
    assert!(img.pixels().all(|p| *p == first));

    // luminance rising left to right from 0 through the scale
    let w = 64;
    let px: Vec<[f32; 3]> = (0..w)
        .map(|x| [(10f64.powf(x as f64 / 16.0) / 179.0) as f32; 3])
        .collect();
    let mut px = px;
    px[0] = [0.0; 3];
    let ramp = dir.path().join("ramp.hdr");
    write_image(&ramp, &HdrImage::new(w, 1, px).unwrap());
    let out = dir.path().join("ramp.png");
    ok(&["falsecolor", s(&ramp), "--out", s(&out), "--min", "1", "--max", "10000"]);
    let img = image::open(&out).unwrap().to_rgb8();
    assert_eq!(img.get_pixel(0, 0).0, oge_core::falsecolor::RAMP[0]);
    let stored = oge_core::hdr_io::to_luminance(&load_hdr(&ramp).unwrap());
    let scale = oge_core::falsecolor::FalseColorScale { min: 1.0, max: 10000.0 };
    let mut last = 0.0;
    for x in 0..w {
        let t = scale.position(stored.values()[x]);
        assert!(t >= last);
        last = t;
        assert_eq!(img.get_pixel(x as u32, 0).0, oge_core::falsecolor::ramp_color(t));
    }
    assert_eq!(
        code(&oge(&["falsecolor", s(&dir.path().join("none.hdr")), "--out", s(&out)])),
        2
    );
}

#[test]
fn separable_features_pass_the_gates() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("id,a,b,label\n");
    for i in 0..60 {
        let glare = i % 3 == 0;
        let a = if glare { 10.0 + i as f64 * 0.1 } else { i as f64 * 0.1 };
        csv.push_str(&format!("r{i},{a},{},{}\n", (i * 7 % 11) as f64, u8::from(glare)));
    }
    let path = dir.path().join("sep.csv");
    fs::write(&path, csv).unwrap();
    let out = ok(&[
        "train",
        s(&path),
        "--model",
        s(&dir.path().join("m.json")),
        "--algorithm",
        "bagged_trees",
    ])
    .stdout;
    let text = String::from_utf8(out).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |n: &str| row[header.iter().position(|h| h == n).unwrap()].to_string();
    assert_eq!(get("oa"), "1");
    assert_eq!(get("pass"), "1");
    assert_eq!(get("dataset"), "sep");
}
