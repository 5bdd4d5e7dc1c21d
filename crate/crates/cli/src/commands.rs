use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use reprometa_core::estimators::{mh_confidence_interval_cc, peto_log_odds_ratio_ci};
use reprometa_core::io::{read_dataset_path, read_roster_path};
use reprometa_core::model::{strip_zero_total, validate_dataset};
use reprometa_core::repro::repro_confidence_interval;
use reprometa_core::sim::{
    builtin_dataset, builtin_roster, compare_zero_total, run_coverage_study, surrogate_roster_48, ScenarioConfig,
};
use reprometa_core::{Error, MetaDataset, Method};

use crate::report::{
    AnalyzeReport, CompareReport, CompareSide, DatasetSummary, Manifest, MethodResult, SCHEMA_VERSION,
};
use crate::{AnalyzeArgs, Command, CompareArgs, MethodArg, OutputFormat, ReproArgs, SimulateArgs};

pub fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct AnalyzeSettings<'a> {
    methods: &'a [MethodArg],
    exclude_zero_total: bool,
    cc: f64,
    #[serde(flatten)]
    repro: &'a ReproArgs,
}

fn analyze(a: &AnalyzeArgs) -> Result<String> {
    if !(a.cc >= 0.0 && a.cc.is_finite()) {
        return Err(Error::InvalidConfig(format!("--cc must be >= 0, got {}", a.cc)).into());
    }
    let cfg = a.repro.config();
    cfg.check()?;
    let data = validate_dataset(read_dataset_path(&a.input)?)?;
    let analyzed = if a.exclude_zero_total { validate_dataset(strip_zero_total(&data))? } else { data.clone() };

    let mut methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    methods.dedup();
    let mut results = Vec::new();
    for m in methods {
        let r = match m {
            Method::Mh => MethodResult::from_estimate(&mh_confidence_interval_cc(&analyzed, cfg.alpha, a.cc)?),
            Method::Peto => MethodResult::from_estimate(&peto_log_odds_ratio_ci(&analyzed, cfg.alpha)?),
            Method::Repro => {
                let r = repro_confidence_interval(&analyzed, &cfg)?;
                if r.dominance_violations > 0 {
                    anyhow::bail!(
                        "internal check failed: {} grid points with T above the initializer value",
                        r.dominance_violations
                    );
                }
                MethodResult::from_repro(&r)
            }
        };
        results.push(r);
    }
    let report = AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        manifest: Manifest::new(
            "analyze",
            a.input.display().to_string(),
            AnalyzeSettings {
                methods: &a.methods,
                exclude_zero_total: a.exclude_zero_total,
                cc: a.cc,
                repro: &a.repro,
            },
        ),
        dataset: DatasetSummary::from(&data),
        analyzed_studies: analyzed.len(),
        results,
    };
    match a.run.output {
        OutputFormat::Json => json(&report),
        OutputFormat::Csv => Ok(report.to_csv()),
        OutputFormat::Text => Ok(report.to_text()),
    }
}

fn compare(a: &CompareArgs) -> Result<String> {
    let cfg = a.repro.config();
    cfg.check()?;
    let (data, input): (MetaDataset, String) = match (&a.builtin, &a.input) {
        (Some(id), _) => {
            let id = id.chars().next().unwrap_or(' ');
            let d =
                builtin_dataset(id).ok_or_else(|| Error::InvalidConfig(format!("unknown built-in dataset '{id}'")))?;
            (d, format!("builtin:{id}"))
        }
        (None, Some(path)) => (validate_dataset(read_dataset_path(path)?)?, path.display().to_string()),
        (None, None) => return Err(Error::InvalidConfig("give a dataset CSV or --builtin".into()).into()),
    };
    let c = compare_zero_total(&data, &cfg)?;
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        manifest: Manifest::new("compare", input, &a.repro),
        dataset: DatasetSummary::from(&data),
        full: CompareSide::new(c.full_studies, &c.full),
        stripped: CompareSide::new(c.stripped_studies, &c.stripped),
        full_narrower: c.full_width() < c.stripped_width(),
    };
    match a.run.output {
        OutputFormat::Json => json(&report),
        OutputFormat::Csv => Ok(report.to_csv()),
        OutputFormat::Text => Ok(report.to_text()),
    }
}

/// Reads a scenario file. The roster is given inline as `[[n, m], ...]`, as
/// one of the names `"a"`, `"b"`, `"surrogate-48"`, or through `roster_file`
/// (a CSV path relative to the scenario file).
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut v: Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse { row: e.line(), message: e.to_string() })?;
    let obj = v.as_object_mut().ok_or_else(|| Error::InvalidConfig("scenario must be a JSON object".into()))?;
    if let Some(file) = obj.remove("roster_file") {
        if obj.contains_key("roster") {
            return Err(Error::InvalidConfig("give either roster or roster_file, not both".into()).into());
        }
        let file = file.as_str().ok_or_else(|| Error::InvalidConfig("roster_file must be a string".into()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let roster = read_roster_path(base.join(file))?;
        obj.insert("roster".into(), serde_json::to_value(roster)?);
    } else if let Some(Value::String(name)) = obj.get("roster") {
        let roster = match name.as_str() {
            "a" => builtin_roster('a'),
            "b" => builtin_roster('b'),
            "surrogate-48" => Some(surrogate_roster_48()),
            _ => None,
        }
        .ok_or_else(|| Error::InvalidConfig(format!("unknown roster name '{name}'")))?;
        obj.insert("roster".into(), serde_json::to_value(roster)?);
    }
    let cfg: ScenarioConfig = serde_json::from_value(v).map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))?;
    cfg.check()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    #[serde(flatten)]
    manifest: Manifest<&'a ScenarioConfig>,
    report: String,
    wall_time_seconds: f64,
}

fn simulate(a: &SimulateArgs) -> Result<String> {
    let cfg = load_scenario(&a.scenario)?;
    let start = Instant::now();
    let report = run_coverage_study(&cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let stem = a.scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let csv_path = a.out_dir.join(format!("{stem}.report.csv"));
    let manifest_path = a.out_dir.join(format!("{stem}.manifest.json"));
    std::fs::write(&csv_path, report.to_csv()).with_context(|| format!("writing {}", csv_path.display()))?;
    let manifest = SimulateManifest {
        manifest: Manifest::new("simulate", a.scenario.display().to_string(), &cfg),
        report: csv_path.display().to_string(),
        wall_time_seconds: wall,
    };
    std::fs::write(&manifest_path, json(&manifest)?).with_context(|| format!("writing {}", manifest_path.display()))?;

    match a.run.output {
        OutputFormat::Json => json(&report),
        OutputFormat::Csv => Ok(report.to_csv()),
        OutputFormat::Text => Ok(report.to_table()),
    }
}
