use std::fs;
use std::path::{Path, PathBuf};

use oge_core::dataset::{format_value, region_feature_names, METRICS_DATASET};
use oge_core::falsecolor::{false_color, FalseColorScale};
use oge_core::glare::{BackgroundMode, METRIC_NAMES};
use oge_core::hdr_io::{to_luminance, HdrImage};
use oge_core::ml::{apply_acceptance_gates, cross_validate, predict, train, Algorithm, ClassifierSpec, TrainedModel};
use oge_core::mrl::{build_mask, EllipseParams, FovMask, GridSpec, CALIBRATED_ELLIPSE};
use oge_core::pipeline::{image_id, load_hdr, ExtractionRecipe, MetricsConfig};
use oge_core::roc::{metric_orientation, metric_roc_row, MetricRocRow, Orientation, RocOptions};
use oge_core::synth::{LabelSampling, ScenarioParams, SceneGenerator};
use oge_core::FeatureTable;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cli::{
    Background, Common, ExtractArgs, FalsecolorArgs, MetricsArgs, PredictArgs, RocArgs, Sampling, SynthArgs, TrainArgs,
};
use crate::io::{collect_images, emit, internal, provenance, report_skipped, Failure, LabelIndex, Outcome, Skipped};

fn config(subcommand: &str, common: &Common, args: &impl Serialize) -> serde_json::Value {
    json!({ "subcommand": subcommand, "common": common, "args": args })
}

struct Row {
    id: String,
    values: Vec<Vec<f64>>,
    label: Option<bool>,
}

/// Loads every image in parallel and applies `features`, keeping file order.
/// Failures and unlabelled images become skips.
fn per_image(
    inputs: &[PathBuf],
    labels: Option<&LabelIndex>,
    strict: bool,
    features: impl Fn(&HdrImage) -> oge_core::Result<Vec<Vec<f64>>> + Sync,
) -> Outcome<Vec<Row>> {
    let (images, mut skipped) = collect_images(inputs)?;
    if images.is_empty() && skipped.is_empty() {
        return Err(oge_core::Error::EmptyInput("no HDR images in the given inputs".into()).into());
    }
    let results: Vec<oge_core::Result<Vec<Vec<f64>>>> = images
        .par_iter()
        .map(|p| load_hdr(p).and_then(|img| features(&img)))
        .collect();
    let mut rows = Vec::new();
    for (path, result) in images.iter().zip(results) {
        let id = image_id(path);
        match result {
            Err(e) => skipped.push(Skipped {
                path: path.clone(),
                reason: e.to_string(),
            }),
            Ok(values) => {
                let label = labels.map(|l| l.get(&id));
                if label == Some(None) {
                    skipped.push(Skipped {
                        path: path.clone(),
                        reason: format!("no label for id `{id}`"),
                    });
                    continue;
                }
                rows.push(Row {
                    id,
                    values,
                    label: label.flatten(),
                });
            }
        }
    }
    report_skipped(&skipped, strict)?;
    if rows.is_empty() {
        return Err(oge_core::Error::EmptyInput("no image could be processed".into()).into());
    }
    Ok(rows)
}

fn table(
    rows: &[Row],
    which: usize,
    feature_names: Vec<String>,
    comments: Vec<String>,
    labelled: bool,
) -> FeatureTable {
    FeatureTable {
        feature_names,
        ids: rows.iter().map(|r| r.id.clone()).collect(),
        rows: rows.iter().map(|r| r.values[which].clone()).collect(),
        labels: labelled.then(|| rows.iter().map(|r| r.label.unwrap_or(false)).collect()),
        comments,
    }
}

fn table_bytes(t: &FeatureTable) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(buf)
}

fn resolve_mask(grid: GridSpec, spec: Option<&str>) -> Outcome<FovMask> {
    match spec {
        None => Ok(build_mask(grid, &CALIBRATED_ELLIPSE)?),
        Some(s) if s.starts_with("ellipse:") => Ok(build_mask(grid, &s.parse::<EllipseParams>()?)?),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("mask file {path}: {e}")))?;
            let mask = FovMask::from_lines(grid, &text)?;
            if mask.region_count() == 0 {
                return Err(Failure::Usage(format!(
                    "mask file {path} has no cells for grid {}",
                    grid.g
                )));
            }
            Ok(mask)
        }
    }
}

pub fn extract(common: &Common, args: &ExtractArgs) -> Outcome {
    let cfg = config("extract", common, args);
    if args.grid.is_empty() {
        return Err(Failure::Usage("at least one --grid is required".into()));
    }
    let masks = args
        .grid
        .iter()
        .map(|&g| resolve_mask(GridSpec::new(g)?, args.mask.as_deref()))
        .collect::<Outcome<Vec<_>>>()?;
    let out_dir = match (masks.len(), &common.out) {
        (1, _) => None,
        (_, Some(dir)) => Some(dir.clone()),
        (_, None) => return Err(Failure::Usage("several grids need --out <directory>".into())),
    };
    let labels = args.labels.as_deref().map(LabelIndex::read).transpose()?;
    let recipes: Vec<ExtractionRecipe> = masks
        .iter()
        .map(|m| ExtractionRecipe::Mrl {
            mask: m.clone(),
            conversion: Default::default(),
        })
        .collect();
    let rows = per_image(&args.inputs, labels.as_ref(), common.strict, |img| {
        recipes.iter().map(|r| r.features(img)).collect()
    })?;
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir).map_err(internal(&dir.display().to_string()))?;
    }
    for (i, (mask, recipe)) in masks.iter().zip(&recipes).enumerate() {
        let mut comments = provenance("extract", &cfg);
        comments.push(format!("dataset: {}", mask.reference_code()));
        comments.push(format!(
            "extraction: {}",
            serde_json::to_string(recipe).expect("recipe serializes")
        ));
        let t = table(
            &rows,
            i,
            region_feature_names(mask.region_count()),
            comments,
            labels.is_some(),
        );
        let bytes = table_bytes(&t)?;
        match &out_dir {
            Some(dir) => emit(Some(&dir.join(format!("{}.csv", mask.reference_code()))), &bytes)?,
            None => emit(common.out.as_deref(), &bytes)?,
        }
    }
    Ok(())
}

pub fn metrics(common: &Common, args: &MetricsArgs) -> Outcome {
    let cfg = config("metrics", common, args);
    let mut mc = MetricsConfig::default();
    if let Some(z) = &args.task_zone {
        mc.task_zone = z.parse()?;
    }
    mc.detection.threshold_multiplier = args.threshold_multiplier;
    mc.indices.background = match args.background {
        Background::IndirectIlluminance => BackgroundMode::IndirectIlluminance,
        Background::MeanNonSource => BackgroundMode::MeanNonSource,
    };
    let recipe = ExtractionRecipe::Metrics(mc);
    let labels = args.labels.as_deref().map(LabelIndex::read).transpose()?;
    let rows = per_image(&args.inputs, labels.as_ref(), common.strict, |img| {
        Ok(vec![recipe.features(img)?])
    })?;
    let mut comments = provenance("metrics", &cfg);
    comments.push(format!("dataset: {METRICS_DATASET}"));
    comments.push(format!(
        "extraction: {}",
        serde_json::to_string(&recipe).expect("recipe serializes")
    ));
    let names = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    let t = table(&rows, 0, names, comments, labels.is_some());
    emit(common.out.as_deref(), &table_bytes(&t)?)
}

fn read_table(path: &Path) -> Outcome<FeatureTable> {
    let file = fs::File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(FeatureTable::read_csv(file)?)
}

fn dataset_name(t: &FeatureTable, path: &Path) -> String {
    t.comment_value("dataset")
        .map(str::to_string)
        .unwrap_or_else(|| image_id(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn opt_flag(b: Option<bool>) -> &'static str {
    b.map(flag).unwrap_or("")
}

fn csv_bytes(comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    for c in comments {
        buf.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(&mut buf);
    let written = std::iter::once(header.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        .chain(rows.iter().cloned())
        .try_for_each(|r| w.write_record(&r));
    written
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| Failure::Internal(e.to_string()))?;
    drop(w);
    Ok(buf)
}

pub fn train_cmd(common: &Common, args: &TrainArgs) -> Outcome {
    let cfg = config("train", common, args);
    let t = read_table(&args.features)?;
    let name = dataset_name(&t, &args.features);
    let recipe: Option<ExtractionRecipe> = match t.comment_value("extraction") {
        Some(json) => {
            Some(serde_json::from_str(json).map_err(|e| Failure::Data(format!("bad extraction comment: {e}")))?)
        }
        None => None,
    };
    let data = t.into_matrix(name.clone())?;
    let mut algorithm = Algorithm::from_name(&args.algorithm)?;
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--param `{p}` is not key=value")))?;
        algorithm.set(k.trim(), v.trim())?;
    }
    let spec = ClassifierSpec::new(algorithm, common.seed);
    let report = cross_validate(&data, &spec, common.folds, common.seed)?;
    let mut model = train(&data, &spec)?;
    model.extraction = recipe;
    for w in &model.warnings {
        eprintln!("oge: warning: {w}");
    }
    fs::write(&args.model, model.to_json()?).map_err(internal(&args.model.display().to_string()))?;

    let gates = apply_acceptance_gates(&report);
    let c = report.confusion;
    let header = [
        "dataset",
        "algorithm",
        "rows",
        "positives",
        "oa",
        "tpr",
        "tnr",
        "macro_oa",
        "macro_tpr",
        "macro_tnr",
        "auc",
        "sqd",
        "tp",
        "fn",
        "tn",
        "fp",
        "gate_oa",
        "gate_tpr",
        "gate_tnr",
        "gate_auc",
        "gate_sqd",
        "pass",
        "warnings",
    ];
    let row = vec![
        name,
        spec.algorithm.name().to_string(),
        data.n().to_string(),
        data.positives().to_string(),
        format_value(report.oa),
        format_value(report.tpr),
        format_value(report.tnr),
        format_value(report.macro_oa),
        format_value(report.macro_tpr),
        format_value(report.macro_tnr),
        opt(report.auc),
        opt(report.sqd),
        c.tp.to_string(),
        c.fn_.to_string(),
        c.tn.to_string(),
        c.fp.to_string(),
        flag(gates.oa).into(),
        flag(gates.tpr).into(),
        flag(gates.tnr).into(),
        opt_flag(gates.auc).into(),
        opt_flag(gates.sqd).into(),
        flag(gates.pass).into(),
        model.warnings.join(";"),
    ];
    emit(
        common.out.as_deref(),
        &csv_bytes(&provenance("train", &cfg), &header, &[row])?,
    )
}

pub fn predict_cmd(common: &Common, args: &PredictArgs) -> Outcome {
    let cfg = config("predict", common, args);
    let text = fs::read_to_string(&args.model).map_err(|e| Failure::Data(format!("{}: {e}", args.model.display())))?;
    let model = TrainedModel::from_json(&text)?;
    let (ids, rows) = match &args.features {
        Some(path) => {
            let t = read_table(path)?;
            (t.ids, t.rows)
        }
        None => {
            let recipe = model.extraction.clone().ok_or_else(|| {
                Failure::Data("model records no extraction recipe; score a feature CSV with --features".into())
            })?;
            let rows = per_image(&args.inputs, None, common.strict, |img| Ok(vec![recipe.features(img)?]))?;
            rows.into_iter()
                .map(|r| (r.id, r.values.into_iter().next().unwrap_or_default()))
                .unzip()
        }
    };
    let mut out = Vec::with_capacity(rows.len());
    for (id, row) in ids.into_iter().zip(&rows) {
        let p = predict(&model, row)?;
        out.push(vec![id, format_value(p.score), flag(p.glare).to_string()]);
    }
    emit(
        common.out.as_deref(),
        &csv_bytes(&provenance("predict", &cfg), &["image_id", "score", "label"], &out)?,
    )
}

pub fn roc_cmd(common: &Common, args: &RocArgs) -> Outcome {
    let cfg = config("roc", common, args);
    let opts = RocOptions {
        folds: common.folds,
        seed: common.seed,
        objective: args.objective.parse()?,
        fold_eval: args.fold_eval.parse()?,
    };
    let t = read_table(&args.metrics)?;
    let labels = t
        .labels
        .clone()
        .ok_or_else(|| Failure::Data("metrics file has no `label` column".into()))?;
    for m in &args.metric {
        if !t.feature_names.contains(m) {
            return Err(Failure::Usage(format!("no column `{m}` in {}", args.metrics.display())));
        }
    }
    let mut results: Vec<MetricRocRow> = Vec::new();
    for (j, name) in t.feature_names.iter().enumerate() {
        if !args.metric.is_empty() && !args.metric.contains(name) {
            continue;
        }
        let orientation = metric_orientation(name).unwrap_or(Orientation::HigherMeansGlare);
        let scores: Vec<f64> = t.rows.iter().map(|r| r[j]).collect();
        results.push(metric_roc_row(name, &scores, &labels, orientation, &opts)?);
    }
    results.sort_by(|a, b| b.combined.oa.total_cmp(&a.combined.oa));
    let header = [
        "metric",
        "orientation",
        "fold_oa",
        "fold_tpr",
        "fold_tnr",
        "c1",
        "fold_auc",
        "fold_sqd",
        "oa",
        "tpr",
        "tnr",
        "c2",
        "auc",
        "sqd",
        "e",
        "generalizable",
        "gate_oa",
        "gate_tpr",
        "gate_tnr",
        "gate_auc",
        "gate_sqd",
        "pass",
    ];
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let orientation = match r.orientation {
                Orientation::HigherMeansGlare => "higher",
                Orientation::LowerMeansGlare => "lower",
            };
            let (f, c) = (&r.folds, &r.combined);
            vec![
                r.metric.clone(),
                orientation.into(),
                format_value(f.oa),
                format_value(f.tpr),
                format_value(f.tnr),
                format_value(f.cutoff),
                format_value(f.auc),
                format_value(f.sqd),
                format_value(c.oa),
                format_value(c.tpr),
                format_value(c.tnr),
                format_value(c.cutoff),
                format_value(c.auc),
                format_value(c.sqd),
                opt(r.e),
                flag(r.generalizable).into(),
                flag(r.gates.oa).into(),
                flag(r.gates.tpr).into(),
                flag(r.gates.tnr).into(),
                opt_flag(r.gates.auc).into(),
                opt_flag(r.gates.sqd).into(),
                flag(r.gates.pass).into(),
            ]
        })
        .collect();
    emit(
        common.out.as_deref(),
        &csv_bytes(&provenance("roc", &cfg), &header, &rows)?,
    )
}

pub fn synth(common: &Common, args: &SynthArgs) -> Outcome {
    let cfg = config("synth", common, args);
    let dir = common
        .out
        .as_deref()
        .ok_or_else(|| Failure::Usage("synth needs --out <directory>".into()))?;
    let mut params = ScenarioParams {
        n_scenes: args.n,
        size: args.size,
        positive_fraction: args.positive_fraction,
        label_noise: args.label_noise,
        sampling: match args.sampling {
            Sampling::Quota => LabelSampling::Quota,
            Sampling::Bernoulli => LabelSampling::Bernoulli,
        },
        seed: common.seed,
        ..Default::default()
    };
    if let Some(m) = args.score_margin {
        params.score_margin = m;
    }
    if params.n_scenes == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let generator = SceneGenerator::new(&params)?;
    let scenes = (0..generator.len())
        .into_par_iter()
        .map(|id| generator.scene(id))
        .collect::<oge_core::Result<Vec<_>>>()?;
    let mut comments = provenance("synth", &cfg);
    comments.push(format!(
        "params: {}",
        serde_json::to_string(&params).expect("params serialize")
    ));
    oge_core::synth::write_corpus(dir, &scenes, &comments).map_err(|e| Failure::Internal(e.to_string()))?;
    let glare = scenes.iter().filter(|s| s.label).count();
    eprintln!(
        "oge: wrote {} scenes ({glare} glare) to {}",
        scenes.len(),
        dir.display()
    );
    Ok(())
}

pub fn falsecolor(common: &Common, args: &FalsecolorArgs) -> Outcome {
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| Failure::Usage("falsecolor needs --out <file.ppm|file.png>".into()))?;
    let scale = FalseColorScale {
        min: args.min,
        max: args.max,
    };
    let lum = to_luminance(&load_hdr(&args.input)?);
    let rgb = false_color(&lum, &scale)?;
    let img = image::RgbImage::from_raw(lum.width() as u32, lum.height() as u32, rgb)
        .ok_or_else(|| Failure::Internal("false-colour buffer has the wrong size".into()))?;
    let format = match out
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => image::ImageFormat::Png,
        _ => image::ImageFormat::Pnm,
    };
    img.save_with_format(out, format)
        .map_err(|e| Failure::Internal(format!("{}: {e}", out.display())))
}
