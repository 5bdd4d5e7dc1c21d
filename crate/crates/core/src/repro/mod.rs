//! Repro-samples confidence interval for the common log odds ratio.
//!
//! For a candidate `theta` the observed statistic `t = |W_MH(obs) - theta|`
//! is compared with artificial datasets generated at `(theta, eta~)`:
//! `gamma(eta~) = P(|W~| < t)`. The nuclear value `T(theta)` is the minimum of
//! `gamma` over the nuisance vector, and `theta` is kept when `T <= alpha`.
//! All artificial datasets come from one fixed pool of uniforms, so every
//! objective here is a deterministic function of its arguments.

pub mod nelder_mead;
mod pool;

pub use pool::{gamma_hat, GammaCounts, GammaEvaluator, McPool, NonFinitePolicy};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{check_level, mh_confidence_interval, normal_quantile, w_statistic};
use crate::model::{eta_initial_values_or_fallback, validate_dataset, MetaDataset, ProbMap};
use nelder_mead::NelderMeadConfig;

/// Coverage level of the Mantel-Haenszel interval spanned by the default grid.
pub const DEFAULT_GRID_LEVEL: f64 = 0.9995;
pub const DEFAULT_GRID_POINTS: usize = 201;
pub const DEFAULT_MC_SAMPLES: usize = 1000;
/// Bisection steps per endpoint when refining.
pub const REFINE_STEPS: usize = 5;

/// Settings for the profile minimization over the nuisance vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub initial_step: f64,
    /// Evaluation budget per start is this times the number of studies.
    pub max_evaluations_per_study: usize,
    /// Number of starts: the initializer, then initializer -1, then +1.
    pub starts: usize,
    /// Stop once a probe reaches `alpha`; the accept decision is unchanged
    /// and `T` becomes an upper bound that is already `<= alpha`.
    pub early_accept: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.5,
            max_evaluations_per_study: 500,
            starts: 3,
            early_accept: true,
        }
    }
}

impl OptimizerConfig {
    fn nelder_mead(&self, studies: usize, replicates: usize, target: Option<f64>) -> NelderMeadConfig {
        NelderMeadConfig {
            reflection: self.reflection,
            expansion: self.expansion,
            contraction: self.contraction,
            shrink: self.shrink,
            initial_step: self.initial_step,
            max_evaluations: self.max_evaluations_per_study * studies.max(1),
            // objective lives on a 1/M lattice
            f_tolerance: 0.5 / replicates as f64,
            target,
        }
    }

    fn start_offsets(&self) -> impl Iterator<Item = f64> {
        [0.0, -1.0, 1.0].into_iter().chain((2..).flat_map(|k| [-(k as f64), k as f64])).take(self.starts.max(1))
    }
}

/// Result of the profile minimization at one `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearEval {
    pub theta: f64,
    /// `|W(x_obs, y_obs; theta)|`.
    pub t_obs: f64,
    /// Smallest `gamma` seen over all probes.
    #[serde(rename = "T")]
    pub t_value: f64,
    /// `gamma` at the initializer.
    pub gamma_init: f64,
    pub eta_argmin: Vec<f64>,
    pub probes: usize,
    pub converged: bool,
    /// Minimization stopped once `T <= alpha` was established.
    pub stopped_early: bool,
}

/// Profile minimum of `gamma` over the nuisance vector at `theta`.
///
/// `target` enables early stopping once the minimum is known to be at or
/// below it.
#[allow(clippy::too_many_arguments)]
pub fn nuclear_t(
    pool: &McPool,
    d_obs: &MetaDataset,
    theta: f64,
    init: &[f64],
    opt: &OptimizerConfig,
    map: ProbMap,
    policy: NonFinitePolicy,
    target: Option<f64>,
) -> Result<NuclearEval> {
    if init.len() != d_obs.len() {
        return Err(Error::LengthMismatch { expected: d_obs.len(), actual: init.len() });
    }
    if pool.studies() != d_obs.len() {
        return Err(Error::LengthMismatch { expected: d_obs.len(), actual: pool.studies() });
    }
    let t_obs = w_statistic(d_obs, theta).abs();
    if t_obs.is_nan() {
        return Err(Error::UndefinedEstimate("observed Mantel-Haenszel statistic is undefined".into()));
    }
    let mut ev = GammaEvaluator::new(pool, theta, t_obs, map, policy);
    let gamma_init = ev.gamma(init);
    if !gamma_init.is_finite() {
        return Err(Error::OptimizerFailure);
    }
    let mut best = gamma_init;
    let mut argmin = init.to_vec();
    let mut converged = true;
    let nm = opt.nelder_mead(init.len(), pool.replicates(), target);
    let reached = |v: f64| target.is_some_and(|a| v <= a);

    if !reached(best) {
        for offset in opt.start_offsets() {
            let start: Vec<f64> = init.iter().map(|e| e + offset).collect();
            let r = nelder_mead::minimize(|eta| ev.gamma(eta), &start, &nm);
            converged &= r.converged || r.reached_target;
            if r.f < best {
                best = r.f;
                argmin = r.x;
            }
            if reached(best) {
                break;
            }
        }
    }
    Ok(NuclearEval {
        theta,
        t_obs,
        t_value: best,
        gamma_init,
        eta_argmin: argmin,
        probes: ev.evaluations(),
        converged,
        stopped_early: reached(best),
    })
}

/// Equally spaced `theta` values.
///
/// Without an override the grid spans the 99.95% Mantel-Haenszel interval and
/// is centred on the MH estimate, so odd `q` puts the estimate on the grid.
pub fn theta_grid(d_obs: &MetaDataset, q: usize, range: Option<(f64, f64)>) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::InvalidConfig("grid needs at least one point".into()));
    }
    match range {
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!("bad grid range ({lo}, {hi})")));
            }
            if q == 1 {
                return Ok(vec![0.5 * (lo + hi)]);
            }
            let step = (hi - lo) / (q - 1) as f64;
            Ok((0..q).map(|j| if j == q - 1 { hi } else { lo + j as f64 * step }).collect())
        }
        None => {
            let ci = mh_confidence_interval(d_obs, DEFAULT_GRID_LEVEL)?;
            if q == 1 {
                return Ok(vec![ci.point]);
            }
            let half = ci.upper - ci.point;
            let step = 2.0 * half / (q - 1) as f64;
            let mid = (q - 1) as f64 / 2.0;
            Ok((0..q).map(|j| ci.point + (j as f64 - mid) * step).collect())
        }
    }
}

/// Settings for one interval computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReproConfig {
    pub alpha: f64,
    pub mc_samples: usize,
    pub grid_points: usize,
    pub grid_range: Option<(f64, f64)>,
    pub seed: u64,
    pub prob_map: ProbMap,
    pub non_finite: NonFinitePolicy,
    pub optimizer: OptimizerConfig,
    pub refine_endpoints: bool,
}

impl Default for ReproConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            mc_samples: DEFAULT_MC_SAMPLES,
            grid_points: DEFAULT_GRID_POINTS,
            grid_range: None,
            seed: 1,
            prob_map: ProbMap::Logit,
            non_finite: NonFinitePolicy::default(),
            optimizer: OptimizerConfig::default(),
            refine_endpoints: false,
        }
    }
}

impl ReproConfig {
    pub fn check(&self) -> Result<()> {
        check_level(self.alpha)?;
        if self.mc_samples == 0 {
            return Err(Error::InvalidConfig("Monte-Carlo size must be >= 1".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidConfig("grid needs at least one point".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproResult {
    pub alpha: f64,
    pub grid: Vec<NuclearEval>,
    /// `(min, max)` of accepted grid points.
    pub interval: (f64, f64),
    /// Endpoints after bisection against the neighbouring rejected points.
    pub refined_interval: Option<(f64, f64)>,
    pub accepted_count: usize,
    pub grid_spacing: f64,
    pub mc_samples: usize,
    /// Grid points where `T` exceeded `gamma` at the initializer. Always zero
    /// unless the minimization is broken.
    pub dominance_violations: usize,
}

impl ReproResult {
    /// The refined interval when available, else the grid interval.
    pub fn best_interval(&self) -> (f64, f64) {
        self.refined_interval.unwrap_or(self.interval)
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.best_interval();
        hi - lo
    }

    pub fn accepted(&self) -> impl Iterator<Item = &NuclearEval> {
        self.grid.iter().filter(move |e| e.t_value <= self.alpha)
    }
}

/// Level-`alpha` repro-samples interval: grid inversion of `T(theta) <= alpha`.
///
/// Grid points are evaluated in parallel on the current rayon pool; the
/// output does not depend on the number of workers.
pub fn repro_confidence_interval(d_obs: &MetaDataset, cfg: &ReproConfig) -> Result<ReproResult> {
    cfg.check()?;
    let d = if d_obs.is_validated() { d_obs.clone() } else { validate_dataset(d_obs.clone())? };
    let grid = theta_grid(&d, cfg.grid_points, cfg.grid_range)?;
    let pool = McPool::new(&d.roster(), cfg.mc_samples, cfg.seed);
    let init = eta_initial_values_or_fallback(&d);
    let target = cfg.optimizer.early_accept.then_some(cfg.alpha);

    let evals: Vec<NuclearEval> = grid
        .par_iter()
        .map(|&theta| nuclear_t(&pool, &d, theta, &init, &cfg.optimizer, cfg.prob_map, cfg.non_finite, target))
        .collect::<Result<_>>()?;

    let dominance_violations = evals.iter().filter(|e| e.t_value > e.gamma_init).count();
    let accepted: Vec<usize> = (0..evals.len()).filter(|&j| evals[j].t_value <= cfg.alpha).collect();
    let (Some(&first), Some(&last)) = (accepted.first(), accepted.last()) else {
        let best = evals.iter().min_by(|a, b| a.t_value.total_cmp(&b.t_value)).expect("grid is non-empty");
        return Err(Error::EmptyConfidenceSet { min_t: best.t_value, argmin_theta: best.theta });
    };
    let interval = (evals[first].theta, evals[last].theta);

    let refined_interval = if cfg.refine_endpoints {
        let refine = |inside: f64, outside: f64| -> Result<f64> {
            let (mut acc, mut rej) = (inside, outside);
            for _ in 0..REFINE_STEPS {
                let mid = 0.5 * (acc + rej);
                let e = nuclear_t(&pool, &d, mid, &init, &cfg.optimizer, cfg.prob_map, cfg.non_finite, target)?;
                if e.t_value <= cfg.alpha {
                    acc = mid;
                } else {
                    rej = mid;
                }
            }
            Ok(acc)
        };
        let lo = if first > 0 { refine(evals[first].theta, evals[first - 1].theta)? } else { interval.0 };
        let hi = if last + 1 < evals.len() { refine(evals[last].theta, evals[last + 1].theta)? } else { interval.1 };
        Some((lo, hi))
    } else {
        None
    };

    let grid_spacing = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };
    Ok(ReproResult {
        alpha: cfg.alpha,
        accepted_count: accepted.len(),
        grid: evals,
        interval,
        refined_interval,
        grid_spacing,
        mc_samples: cfg.mc_samples,
        dominance_violations,
    })
}

/// Two-sided normal quantile at the default grid level (3.4808).
pub fn default_grid_z() -> f64 {
    normal_quantile(DEFAULT_GRID_LEVEL)
}
