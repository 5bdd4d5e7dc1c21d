//! Coverage simulations and the zero-total comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{check_level, mh_confidence_interval, peto_log_odds_ratio_ci, Method};
use crate::model::{
    expit, logit, sample_tables, strip_zero_total, validate_dataset, MetaDataset, OddsParams, ProbMap,
    SampleSizeRoster, StudyTable,
};
use crate::repro::{repro_confidence_interval, NonFinitePolicy, OptimizerConfig, ReproConfig, ReproResult};
use crate::rng::{domain, RngStream};

/// Redraw budget per replicate before a scenario is declared infeasible.
pub const MAX_REDRAWS: usize = 1000;

/// One simulation design: a true odds ratio, a roster and baseline rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// True common log odds ratio.
    pub theta_true: f64,
    pub roster: SampleSizeRoster,
    /// Control rates are drawn uniformly from this range.
    #[serde(default = "default_pi0_range")]
    pub pi0_range: (f64, f64),
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub prob_map: ProbMap,
    #[serde(default)]
    pub non_finite: NonFinitePolicy,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_pi0_range() -> (f64, f64) {
    (0.0, 0.08)
}
fn default_replications() -> usize {
    200
}
fn default_mc_samples() -> usize {
    500
}
fn default_grid_points() -> usize {
    101
}
fn default_alpha() -> f64 {
    0.95
}
fn default_seed() -> u64 {
    1
}
fn default_methods() -> Vec<Method> {
    vec![Method::Mh, Method::Peto, Method::Repro]
}

impl ScenarioConfig {
    /// Desk-scale defaults for the given truth and roster.
    pub fn new(theta_true: f64, roster: SampleSizeRoster) -> Self {
        Self {
            theta_true,
            roster,
            pi0_range: default_pi0_range(),
            replications: default_replications(),
            mc_samples: default_mc_samples(),
            grid_points: default_grid_points(),
            alpha: default_alpha(),
            seed: default_seed(),
            methods: default_methods(),
            prob_map: ProbMap::default(),
            non_finite: NonFinitePolicy::default(),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        check_level(self.alpha)?;
        if !self.theta_true.is_finite() {
            return Err(Error::InvalidConfig("theta_true must be finite".into()));
        }
        let (lo, hi) = self.pi0_range;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(format!("pi0_range ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        self.repro_config(0).check()
    }

    /// Settings for the repro interval of replicate `rep`, which gets its own
    /// Monte-Carlo pool.
    pub fn repro_config(&self, rep: usize) -> ReproConfig {
        ReproConfig {
            alpha: self.alpha,
            mc_samples: self.mc_samples,
            grid_points: self.grid_points,
            grid_range: None,
            seed: self.replicate_stream(rep).child(u64::MAX).key(),
            prob_map: self.prob_map,
            non_finite: self.non_finite,
            optimizer: self.optimizer.clone(),
            refine_endpoints: false,
        }
    }

    fn replicate_stream(&self, rep: usize) -> RngStream {
        RngStream::new(self.seed).child(domain::SCENARIO).child(rep as u64)
    }
}

/// A simulated dataset with the truth it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReplicate {
    pub data: MetaDataset,
    pub truth: OddsParams,
    /// Draws discarded because an arm had no events in any study.
    pub redraws: usize,
}

/// Treatment rate implied by a control rate and a log odds ratio.
pub fn shifted_rate(pi0: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        pi0
    } else {
        expit(theta + logit(pi0))
    }
}

/// Draws replicate `rep` of the scenario. Draws where every control arm or
/// every treatment arm is event-free are redrawn from the next sub-stream.
pub fn generate_scenario_replicate(cfg: &ScenarioConfig, rep: usize) -> Result<ScenarioReplicate> {
    let (lo, hi) = cfg.pi0_range;
    let root = cfg.replicate_stream(rep);
    for attempt in 0..MAX_REDRAWS {
        let stream = root.child(attempt as u64);
        let rates = stream.child(0);
        let probs: Vec<(f64, f64)> = (0..cfg.roster.len())
            .map(|i| {
                let pi0 = lo + (hi - lo) * rates.child(i as u64).uniform();
                (pi0, shifted_rate(pi0, cfg.theta_true))
            })
            .collect();
        let data = sample_tables(&probs, &cfg.roster, &stream.child(1))?;
        if let Ok(data) = validate_dataset(data) {
            let eta = probs.iter().map(|&(p0, p1)| logit(p1) + logit(p0)).collect();
            return Ok(ScenarioReplicate { data, truth: OddsParams::new(cfg.theta_true, eta), redraws: attempt });
        }
    }
    Err(Error::ScenarioInfeasible(format!("replicate {rep}: no usable draw in {MAX_REDRAWS} attempts")))
}

/// Interval of one method on one replicate; `None` when undefined.
fn method_interval(method: Method, d: &MetaDataset, cfg: &ScenarioConfig, rep: usize) -> Option<(f64, f64)> {
    let ci = match method {
        Method::Mh => mh_confidence_interval(d, cfg.alpha).map(|c| (c.lower, c.upper)),
        Method::Peto => peto_log_odds_ratio_ci(d, cfg.alpha).map(|c| (c.lower, c.upper)),
        Method::Repro => repro_confidence_interval(d, &cfg.repro_config(rep)).map(|r| r.interval),
    };
    ci.ok().filter(|(lo, hi)| lo.is_finite() && hi.is_finite())
}

/// Coverage and length summary of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: Method,
    pub replications: usize,
    pub covered: usize,
    /// Empirical coverage probability; undefined intervals count as misses.
    pub coverage: f64,
    pub coverage_se: f64,
    /// Mean length on the log odds ratio scale over defined intervals.
    pub mean_length: f64,
    pub length_se: f64,
    /// Replicates where the interval was undefined or unbounded.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub theta_true: f64,
    pub alpha: f64,
    pub replications: usize,
    /// Total redraws over all replicates.
    pub redraws: usize,
    pub methods: Vec<MethodCoverage>,
}

impl CoverageReport {
    pub fn method(&self, m: Method) -> Option<&MethodCoverage> {
        self.methods.iter().find(|c| c.method == m)
    }

    pub const CSV_HEADER: &'static str =
        "method,theta_true,odds_ratio,alpha,replications,covered,coverage,coverage_se,mean_log_or_length,length_se,failures,redraws";

    /// One row per method, fixed column order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.methods {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.method.name(),
                self.theta_true,
                self.theta_true.exp(),
                self.alpha,
                c.replications,
                c.covered,
                c.coverage,
                c.coverage_se,
                c.mean_length,
                c.length_se,
                c.failures,
                self.redraws
            ));
        }
        out
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "OR = {:.4} (log OR {:.4}), alpha = {}, {} replications, {} redraws\n",
            self.theta_true.exp(),
            self.theta_true,
            self.alpha,
            self.replications,
            self.redraws
        );
        out.push_str(&format!("{:<8}{:>10}{:>10}{:>14}{:>10}\n", "method", "CP", "SE", "length(log)", "failed"));
        for c in &self.methods {
            out.push_str(&format!(
                "{:<8}{:>10.3}{:>10.3}{:>14.3}{:>10}\n",
                c.method.name(),
                c.coverage,
                c.coverage_se,
                c.mean_length,
                c.failures
            ));
        }
        out
    }
}

struct ReplicateOutcome {
    redraws: usize,
    intervals: Vec<Option<(f64, f64)>>,
}

/// Runs every replicate of the scenario in parallel and summarizes each
/// method. The report does not depend on the number of workers.
pub fn run_coverage_study(cfg: &ScenarioConfig) -> Result<CoverageReport> {
    cfg.check()?;
    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let r = generate_scenario_replicate(cfg, rep)?;
            let intervals = cfg.methods.iter().map(|&m| method_interval(m, &r.data, cfg, rep)).collect();
            Ok(ReplicateOutcome { redraws: r.redraws, intervals })
        })
        .collect::<Result<_>>()?;

    let n = cfg.replications as f64;
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let mut covered = 0;
            let mut lengths = Vec::new();
            for o in &outcomes {
                if let Some((lo, hi)) = o.intervals[j] {
                    covered += (lo <= cfg.theta_true && cfg.theta_true <= hi) as usize;
                    lengths.push(hi - lo);
                }
            }
            let coverage = covered as f64 / n;
            let (mean_length, length_se) = mean_and_se(&lengths);
            MethodCoverage {
                method,
                replications: cfg.replications,
                covered,
                coverage,
                coverage_se: (coverage * (1.0 - coverage) / n).sqrt(),
                mean_length,
                length_se,
                failures: cfg.replications - lengths.len(),
            }
        })
        .collect();
    Ok(CoverageReport {
        theta_true: cfg.theta_true,
        alpha: cfg.alpha,
        replications: cfg.replications,
        redraws: outcomes.iter().map(|o| o.redraws).sum(),
        methods,
    })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Repro intervals with and without the zero-total studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTotalComparison {
    pub full: ReproResult,
    pub stripped: ReproResult,
    pub full_studies: usize,
    pub stripped_studies: usize,
}

impl ZeroTotalComparison {
    pub fn full_width(&self) -> f64 {
        self.full.width()
    }

    pub fn stripped_width(&self) -> f64 {
        self.stripped.width()
    }
}

/// Runs the repro interval on `d` and on `d` without its zero-total studies.
pub fn compare_zero_total(d: &MetaDataset, cfg: &ReproConfig) -> Result<ZeroTotalComparison> {
    let d = if d.is_validated() { d.clone() } else { validate_dataset(d.clone())? };
    let stripped = validate_dataset(strip_zero_total(&d))?;
    Ok(ZeroTotalComparison {
        full: repro_confidence_interval(&d, cfg)?,
        stripped: repro_confidence_interval(&stripped, cfg)?,
        full_studies: d.len(),
        stripped_studies: stripped.len(),
    })
}

/// The two five-study illustration datasets, `'a'` or `'b'`: two studies
/// with events and three zero-total studies each.
pub fn builtin_dataset(id: char) -> Option<MetaDataset> {
    let rows: [(u32, u32, u32, u32); 5] = match id.to_ascii_lowercase() {
        'a' => [(3, 100, 2, 100), (2, 300, 1, 300), (0, 600, 0, 300), (0, 600, 0, 300), (0, 300, 0, 300)],
        'b' => [(2, 100, 2, 100), (1, 50, 1, 50), (0, 100, 0, 300), (0, 100, 0, 300), (0, 100, 0, 300)],
        _ => return None,
    };
    let studies = rows.iter().map(|&(x, n, y, m)| StudyTable { x, n, y, m }).collect();
    let ids = (1..=5).map(|i| format!("{id}{i}")).collect();
    let d = MetaDataset::with_ids(format!("builtin-{id}"), studies, ids).ok()?;
    validate_dataset(d).ok()
}

/// Zero-total comparison on a built-in dataset.
pub fn builtin_comparison(id: char, cfg: &ReproConfig) -> Result<ZeroTotalComparison> {
    let d = builtin_dataset(id).ok_or_else(|| Error::InvalidConfig(format!("unknown built-in dataset '{id}'")))?;
    compare_zero_total(&d, cfg)
}

/// `(treatment, control)` arm sizes of the surrogate roster.
const SURROGATE_48: [(u32, u32); 48] = [
    (357, 176),
    (391, 207),
    (774, 185),
    (213, 109),
    (232, 116),
    (43, 47),
    (121, 124),
    (110, 114),
    (382, 384),
    (284, 135),
    (294, 302),
    (563, 142),
    (278, 279),
    (418, 212),
    (395, 198),
    (203, 106),
    (104, 99),
    (212, 107),
    (138, 139),
    (196, 96),
    (122, 120),
    (175, 173),
    (56, 58),
    (39, 38),
    (561, 276),
    (116, 111),
    (148, 143),
    (231, 242),
    (89, 88),
    (168, 172),
    (116, 61),
    (1172, 377),
    (706, 325),
    (204, 185),
    (288, 280),
    (254, 272),
    (314, 154),
    (162, 160),
    (442, 112),
    (394, 124),
    (2635, 2634),
    (1456, 2895),
    (101, 51),
    (232, 115),
    (70, 75),
    (25, 24),
    (196, 195),
    (676, 225),
];

/// A 48-study roster shaped like a large rare-event safety meta-analysis:
/// 46 small to mid-sized trials and two large ones. It is a stand-in for
/// illustration and trend checks, not a transcription of any published data.
pub fn surrogate_roster_48() -> SampleSizeRoster {
    SampleSizeRoster::new(SURROGATE_48.iter().map(|&(m, n)| (n, m)).collect()).expect("static roster is valid")
}

/// Arm sizes of a built-in dataset, as a roster.
pub fn builtin_roster(id: char) -> Option<SampleSizeRoster> {
    builtin_dataset(id).map(|d| d.roster())
}
