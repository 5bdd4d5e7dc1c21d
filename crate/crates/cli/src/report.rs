use serde::Serialize;

use reprometa_core::{EstimateCI, MetaDataset, Method, ReproResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Manifest<S: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub settings: S,
}

impl<S: Serialize> Manifest<S> {
    pub fn new(command: &'static str, input: String, settings: S) -> Self {
        Self { tool: "reprometa", version: concat!("v", env!("CARGO_PKG_VERSION")), command, input, settings }
    }
}

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub label: String,
    pub studies: usize,
    pub zero_total_studies: usize,
}

impl From<&MetaDataset> for DatasetSummary {
    fn from(d: &MetaDataset) -> Self {
        Self { label: d.label().to_string(), studies: d.len(), zero_total_studies: d.zero_total_count() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Interval {
    pub point: Option<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    fn exp(&self) -> Self {
        Self { point: self.point.map(f64::exp), lower: self.lower.exp(), upper: self.upper.exp() }
    }
}

#[derive(Debug, Serialize)]
pub struct GridPoint {
    pub theta: f64,
    pub t_obs: f64,
    #[serde(rename = "T")]
    pub t_value: f64,
    pub gamma_init: f64,
    pub probes: usize,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct ReproDiagnostics {
    pub mc_samples: usize,
    pub grid_points: usize,
    pub grid_spacing: f64,
    pub grid_range: (f64, f64),
    pub accepted_count: usize,
    pub grid_interval: (f64, f64),
    pub refined_interval: Option<(f64, f64)>,
    #[serde(rename = "min_T")]
    pub min_t: f64,
    pub dominance_violations: usize,
    pub unconverged_points: usize,
    pub probes: usize,
    pub grid: Vec<GridPoint>,
}

impl From<&ReproResult> for ReproDiagnostics {
    fn from(r: &ReproResult) -> Self {
        let first = r.grid.first().map_or(f64::NAN, |e| e.theta);
        let last = r.grid.last().map_or(f64::NAN, |e| e.theta);
        Self {
            mc_samples: r.mc_samples,
            grid_points: r.grid.len(),
            grid_spacing: r.grid_spacing,
            grid_range: (first, last),
            accepted_count: r.accepted_count,
            grid_interval: r.interval,
            refined_interval: r.refined_interval,
            min_t: r.grid.iter().map(|e| e.t_value).fold(f64::INFINITY, f64::min),
            dominance_violations: r.dominance_violations,
            unconverged_points: r.grid.iter().filter(|e| !e.converged).count(),
            probes: r.grid.iter().map(|e| e.probes).sum(),
            grid: r
                .grid
                .iter()
                .map(|e| GridPoint {
                    theta: e.theta,
                    t_obs: e.t_obs,
                    t_value: e.t_value,
                    gamma_init: e.gamma_init,
                    probes: e.probes,
                    converged: e.converged,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub level: f64,
    pub log_odds_ratio: Interval,
    pub odds_ratio: Interval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repro: Option<ReproDiagnostics>,
}

impl MethodResult {
    pub fn from_estimate(ci: &EstimateCI) -> Self {
        let log = Interval { point: Some(ci.point), lower: ci.lower, upper: ci.upper };
        Self { method: ci.method, level: ci.level, log_odds_ratio: log, odds_ratio: log.exp(), repro: None }
    }

    pub fn from_repro(r: &ReproResult) -> Self {
        let (lower, upper) = r.best_interval();
        let log = Interval { point: None, lower, upper };
        Self {
            method: Method::Repro,
            level: r.alpha,
            log_odds_ratio: log,
            odds_ratio: log.exp(),
            repro: Some(r.into()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport<S: Serialize> {
    pub schema_version: u32,
    pub manifest: Manifest<S>,
    pub dataset: DatasetSummary,
    pub analyzed_studies: usize,
    pub results: Vec<MethodResult>,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl<S: Serialize> AnalyzeReport<S> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,level,log_or,log_lower,log_upper,or,or_lower,or_upper,studies,zero_total_studies,analyzed_studies,grid_spacing,accepted_points,min_T\n",
        );
        for r in &self.results {
            let (l, o) = (&r.log_odds_ratio, &r.odds_ratio);
            let (spacing, accepted, min_t) = match &r.repro {
                Some(d) => (num(d.grid_spacing), d.accepted_count.to_string(), num(d.min_t)),
                None => Default::default(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.method.name(),
                r.level,
                opt(l.point),
                num(l.lower),
                num(l.upper),
                opt(o.point),
                num(o.lower),
                num(o.upper),
                self.dataset.studies,
                self.dataset.zero_total_studies,
                self.analyzed_studies,
                spacing,
                accepted,
                min_t
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}: {} studies ({} zero-total), {} analyzed\n",
            self.dataset.label, self.dataset.studies, self.dataset.zero_total_studies, self.analyzed_studies
        );
        out.push_str(&format!("{:<8}{:>10}{:>22}{:>24}\n", "method", "OR", "CI (OR scale)", "CI (log OR)"));
        for r in &self.results {
            let (l, o) = (&r.log_odds_ratio, &r.odds_ratio);
            out.push_str(&format!(
                "{:<8}{:>10}{:>22}{:>24}\n",
                r.method.name(),
                o.point.map_or("-".into(), |p| format!("{p:.3}")),
                format!("({:.3}, {:.3})", o.lower, o.upper),
                format!("({:.4}, {:.4})", l.lower, l.upper)
            ));
            if let Some(d) = &r.repro {
                out.push_str(&format!(
                    "        grid: {} points, spacing {:.4}, {} accepted, M = {}, min T = {:.3}\n",
                    d.grid_points, d.grid_spacing, d.accepted_count, d.mc_samples, d.min_t
                ));
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct CompareSide {
    pub studies: usize,
    pub log_odds_ratio: Interval,
    pub odds_ratio: Interval,
    pub width: f64,
    pub diagnostics: ReproDiagnostics,
}

impl CompareSide {
    pub fn new(studies: usize, r: &ReproResult) -> Self {
        let m = MethodResult::from_repro(r);
        Self {
            studies,
            log_odds_ratio: m.log_odds_ratio,
            odds_ratio: m.odds_ratio,
            width: r.width(),
            diagnostics: r.into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CompareReport<S: Serialize> {
    pub schema_version: u32,
    pub manifest: Manifest<S>,
    pub dataset: DatasetSummary,
    pub full: CompareSide,
    pub stripped: CompareSide,
    pub full_narrower: bool,
}

impl<S: Serialize> CompareReport<S> {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("analysis,studies,log_lower,log_upper,or_lower,or_upper,log_width,accepted_points\n");
        for (name, s) in [("full", &self.full), ("stripped", &self.stripped)] {
            out.push_str(&format!(
                "{name},{},{},{},{},{},{},{}\n",
                s.studies,
                num(s.log_odds_ratio.lower),
                num(s.log_odds_ratio.upper),
                num(s.odds_ratio.lower),
                num(s.odds_ratio.upper),
                num(s.width),
                s.diagnostics.accepted_count
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}: {} studies, {} zero-total\n",
            self.dataset.label, self.dataset.studies, self.dataset.zero_total_studies
        );
        for (name, s) in [("all studies", &self.full), ("without zero-total", &self.stripped)] {
            out.push_str(&format!(
                "{:<20} K = {:<3} OR CI ({:.3}, {:.3})  log-OR CI ({:.4}, {:.4})  width {:.4}\n",
                name,
                s.studies,
                s.odds_ratio.lower,
                s.odds_ratio.upper,
                s.log_odds_ratio.lower,
                s.log_odds_ratio.upper,
                s.width
            ));
        }
        out.push_str(if self.full_narrower {
            "interval using all studies is narrower\n"
        } else {
            "interval using all studies is not narrower\n"
        });
        out
    }
}
