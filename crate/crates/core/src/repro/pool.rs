use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::estimators::{mh_terms, w_from_sums};
use crate::model::{ProbMap, SampleSizeRoster};
use crate::rng::{domain, RngStream};

use rand::distributions::Open01;
use rand::Rng;
use rayon::prelude::*;

/// Uniforms of one arm across all replicates, kept in ascending order.
#[derive(Debug, Clone)]
struct ArmUniforms {
    sorted: Vec<f64>,
    order: Vec<u32>,
}

impl ArmUniforms {
    fn from_column(column: Vec<f64>) -> Self {
        let mut order: Vec<u32> = (0..column.len() as u32).collect();
        order.sort_by(|&a, &b| column[a as usize].total_cmp(&column[b as usize]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&s| column[s as usize]).collect();
        Self { sorted, order }
    }
}

/// Fixed Monte-Carlo uniforms: one per study, arm and replicate.
///
/// Replicate `s` draws its `2K` uniforms from the stream `seed/POOL/s` in the
/// order control_1, treatment_1, control_2, ... so a pool for the first `k`
/// studies of a roster is a prefix of the pool for the whole roster.
#[derive(Debug, Clone)]
pub struct McPool {
    seed: u64,
    replicates: usize,
    sizes: Vec<(u32, u32)>,
    /// `2i` is the control arm of study `i`, `2i + 1` the treatment arm.
    arms: Vec<ArmUniforms>,
}

impl McPool {
    pub fn new(roster: &SampleSizeRoster, replicates: usize, seed: u64) -> Self {
        assert!(replicates >= 1, "Monte-Carlo size must be >= 1");
        let k = roster.len();
        let root = RngStream::new(seed).child(domain::POOL);
        let rows: Vec<Vec<f64>> = (0..replicates as u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = root.child(s).rng();
                (0..2 * k).map(|_| rng.sample(Open01)).collect()
            })
            .collect();
        let arms = (0..2 * k).map(|j| ArmUniforms::from_column(rows.iter().map(|r| r[j]).collect())).collect();
        Self { seed, replicates, sizes: roster.sizes().to_vec(), arms }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn studies(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[(u32, u32)] {
        &self.sizes
    }

    /// Uniform for replicate `s`, study `i`; `treatment` selects the arm.
    pub fn uniform(&self, s: usize, i: usize, treatment: bool) -> f64 {
        let arm = &self.arms[2 * i + treatment as usize];
        let pos = arm.order.iter().position(|&r| r as usize == s).expect("replicate index in range");
        arm.sorted[pos]
    }
}

/// How replicates whose MH statistic is infinite or undefined enter
/// `P(|W~| < t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonFinitePolicy {
    /// Never counted as below `t`.
    NotLess,
    /// Infinite values are never below `t`; any undefined replicate makes
    /// the whole objective `+inf`.
    Barrier,
    /// Both count as below every `t > 0`, i.e. they rank as `|W~| = 0`.
    #[default]
    Less,
}

/// Monte-Carlo evaluation of `P(|W~| < t)` on a pool, with reusable buffers.
#[derive(Debug, Clone)]
pub struct GammaEvaluator<'a> {
    pool: &'a McPool,
    theta: f64,
    t: f64,
    map: ProbMap,
    policy: NonFinitePolicy,
    evaluations: usize,
    sum_r: Vec<f64>,
    sum_s: Vec<f64>,
    xs: Vec<u32>,
    ys: Vec<u32>,
}

/// How replicate statistics are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GammaCounts {
    pub below: usize,
    pub infinite: usize,
    pub undefined: usize,
}

impl<'a> GammaEvaluator<'a> {
    pub fn new(pool: &'a McPool, theta: f64, t: f64, map: ProbMap, policy: NonFinitePolicy) -> Self {
        let m = pool.replicates;
        Self {
            pool,
            theta,
            t,
            map,
            policy,
            evaluations: 0,
            sum_r: vec![0.0; m],
            sum_s: vec![0.0; m],
            xs: vec![0; m],
            ys: vec![0; m],
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn threshold(&self) -> f64 {
        self.t
    }

    fn simulate(&mut self, eta: &[f64]) {
        assert_eq!(eta.len(), self.pool.studies(), "eta length must match the pool's studies");
        self.evaluations += 1;
        self.sum_r.fill(0.0);
        self.sum_s.fill(0.0);
        for (i, (&e, &(n, m))) in eta.iter().zip(&self.pool.sizes).enumerate() {
            let (p0, p1) = self.map.arm_probs(self.theta, e);
            let ctl = &self.pool.arms[2 * i];
            let trt = &self.pool.arms[2 * i + 1];
            binomial::quantiles_sorted(&ctl.sorted, &ctl.order, n, p0, &mut self.xs);
            binomial::quantiles_sorted(&trt.sorted, &trt.order, m, p1, &mut self.ys);
            for s in 0..self.xs.len() {
                let (x, y) = (self.xs[s], self.ys[s]);
                if x == 0 && y == 0 {
                    continue;
                }
                let (r, sv) = mh_terms(x, n, y, m);
                self.sum_r[s] += r;
                self.sum_s[s] += sv;
            }
        }
    }

    /// Fraction of replicates with `|W~| < t`, with non-finite replicates
    /// handled per the evaluator's policy.
    pub fn gamma(&mut self, eta: &[f64]) -> f64 {
        self.simulate(eta);
        let (theta, t) = (self.theta, self.t);
        let mut below = 0usize;
        for (&r, &s) in self.sum_r.iter().zip(&self.sum_s) {
            let w = w_from_sums(r, s, theta);
            if w.abs() < t {
                below += 1;
            } else if !w.is_finite() {
                match self.policy {
                    NonFinitePolicy::NotLess => {}
                    NonFinitePolicy::Barrier if w.is_nan() => return f64::INFINITY,
                    NonFinitePolicy::Barrier => {}
                    NonFinitePolicy::Less if t > 0.0 => below += 1,
                    NonFinitePolicy::Less => {}
                }
            }
        }
        below as f64 / self.pool.replicates as f64
    }

    /// Breakdown of the replicate statistics at `eta`.
    pub fn counts(&mut self, eta: &[f64]) -> GammaCounts {
        self.simulate(eta);
        let mut c = GammaCounts::default();
        for (&r, &s) in self.sum_r.iter().zip(&self.sum_s) {
            let w = w_from_sums(r, s, self.theta);
            if w.is_nan() {
                c.undefined += 1;
            } else if w.is_infinite() {
                c.infinite += 1;
            } else if w.abs() < self.t {
                c.below += 1;
            }
        }
        c
    }
}

/// One-shot `gamma_hat` for callers that do not need buffer reuse.
pub fn gamma_hat(pool: &McPool, theta: f64, eta: &[f64], t: f64, map: ProbMap, policy: NonFinitePolicy) -> f64 {
    GammaEvaluator::new(pool, theta, t, map, policy).gamma(eta)
}
