//! Trial tables, the (theta, eta) parameterization and synthetic data.
//!
//! `theta` is the common log odds ratio of treatment versus control and
//! `eta_i` the sum of the two per-arm log odds of study `i`, so that
//! `logit(pi1_i) = (eta_i + theta) / 2` and `logit(pi0_i) = (eta_i - theta) / 2`.

use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::error::{Error, Result};
use crate::rng::{Arm, RngStream};

/// Arguments to the logistic map are clamped to this magnitude.
pub const LOGIT_CLAMP: f64 = 36.0;
/// Upper clamp for the exponential probability map.
pub const EXP_MAP_CEILING: f64 = 1.0 - 1e-12;
/// Per-study log odds ratios closer than this are treated as one common value.
pub const COMMON_THETA_TOL: f64 = 1e-9;

/// One 2x2 trial: `x` events out of `n` controls, `y` events out of `m` treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyTable {
    pub x: u32,
    pub n: u32,
    pub y: u32,
    pub m: u32,
}

impl StudyTable {
    pub fn new(x: u32, n: u32, y: u32, m: u32) -> Result<Self> {
        let t = Self { x, n, y, m };
        t.check(0)?;
        Ok(t)
    }

    fn check(&self, index: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::MalformedCounts { index, reason });
        if self.n == 0 || self.m == 0 {
            return bad(format!("arm sizes must be >= 1 (n={}, m={})", self.n, self.m));
        }
        if self.x > self.n {
            return bad(format!("control events {} exceed arm size {}", self.x, self.n));
        }
        if self.y > self.m {
            return bad(format!("treatment events {} exceed arm size {}", self.y, self.m));
        }
        Ok(())
    }

    pub fn is_zero_total(&self) -> bool {
        self.x == 0 && self.y == 0
    }

    pub fn total(&self) -> u32 {
        self.n + self.m
    }

    /// Both arms have at least one event.
    pub fn has_events_in_both_arms(&self) -> bool {
        self.x > 0 && self.y > 0
    }

    /// The table with control and treatment swapped.
    pub fn swapped(&self) -> Self {
        Self { x: self.y, n: self.m, y: self.x, m: self.n }
    }
}

/// Ordered collection of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    label: String,
    studies: Vec<StudyTable>,
    ids: Vec<String>,
    #[serde(default)]
    validated: bool,
}

impl MetaDataset {
    /// Builds an unvalidated dataset with ids `1..=K`.
    pub fn new(label: impl Into<String>, studies: Vec<StudyTable>) -> Self {
        let ids = (1..=studies.len()).map(|i| i.to_string()).collect();
        Self { label: label.into(), studies, ids, validated: false }
    }

    pub fn with_ids(label: impl Into<String>, studies: Vec<StudyTable>, ids: Vec<String>) -> Result<Self> {
        if ids.len() != studies.len() {
            return Err(Error::LengthMismatch { expected: studies.len(), actual: ids.len() });
        }
        Ok(Self { label: label.into(), studies, ids, validated: false })
    }

    /// Shorthand for `new(..)` followed by `validate_dataset`.
    pub fn validated(label: impl Into<String>, studies: Vec<StudyTable>) -> Result<Self> {
        validate_dataset(Self::new(label, studies))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn studies(&self) -> &[StudyTable] {
        &self.studies
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn zero_total_count(&self) -> usize {
        self.studies.iter().filter(|s| s.is_zero_total()).count()
    }

    pub fn roster(&self) -> SampleSizeRoster {
        SampleSizeRoster { sizes: self.studies.iter().map(|s| (s.n, s.m)).collect() }
    }

    /// Appends a study, dropping the validation mark.
    pub fn push(&mut self, study: StudyTable) {
        self.ids.push((self.studies.len() + 1).to_string());
        self.studies.push(study);
        self.validated = false;
    }

    /// Every study with arms swapped.
    pub fn swapped(&self) -> Self {
        Self {
            label: self.label.clone(),
            studies: self.studies.iter().map(StudyTable::swapped).collect(),
            ids: self.ids.clone(),
            validated: false,
        }
    }
}

/// Checks the table invariants and the standing assumption that some control
/// event and some treatment event were observed.
pub fn validate_dataset(mut d: MetaDataset) -> Result<MetaDataset> {
    if d.studies.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, s) in d.studies.iter().enumerate() {
        s.check(i)?;
    }
    if d.studies.iter().all(|s| s.x == 0) {
        return Err(Error::AllZeroControl);
    }
    if d.studies.iter().all(|s| s.y == 0) {
        return Err(Error::AllZeroTreatment);
    }
    d.validated = true;
    Ok(d)
}

/// Removes zero-total studies, keeping order. The result is not validated.
pub fn strip_zero_total(d: &MetaDataset) -> MetaDataset {
    let (studies, ids) =
        d.studies.iter().zip(&d.ids).filter(|(s, _)| !s.is_zero_total()).map(|(s, id)| (*s, id.clone())).unzip();
    MetaDataset { label: d.label.clone(), studies, ids, validated: false }
}

/// Per-study arm sizes used when simulating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, u32)>", into = "Vec<(u32, u32)>")]
pub struct SampleSizeRoster {
    sizes: Vec<(u32, u32)>,
}

impl SampleSizeRoster {
    pub fn new(sizes: Vec<(u32, u32)>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = sizes.iter().position(|&(n, m)| n == 0 || m == 0) {
            return Err(Error::MalformedCounts { index: i, reason: "arm sizes must be >= 1".into() });
        }
        Ok(Self { sizes })
    }

    /// `(n_control, m_treatment)` pairs.
    pub fn sizes(&self) -> &[(u32, u32)] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
}

impl TryFrom<Vec<(u32, u32)>> for SampleSizeRoster {
    type Error = Error;

    fn try_from(sizes: Vec<(u32, u32)>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<SampleSizeRoster> for Vec<(u32, u32)> {
    fn from(r: SampleSizeRoster) -> Self {
        r.sizes
    }
}

/// How `(theta, eta)` is turned into arm probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbMap {
    /// `pi = expit((eta +/- theta) / 2)`.
    #[default]
    Logit,
    /// `pi = min(exp((eta +/- theta) / 2), 1 - 1e-12)`, the rare-event form.
    ExpClamped,
}

impl ProbMap {
    /// `(pi0, pi1)` for one study.
    #[inline]
    pub fn arm_probs(self, theta: f64, eta: f64) -> (f64, f64) {
        let a0 = (0.5 * (eta - theta)).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        let a1 = (0.5 * (eta + theta)).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        match self {
            ProbMap::Logit => (expit(a0), expit(a1)),
            ProbMap::ExpClamped => (a0.exp().min(EXP_MAP_CEILING), a1.exp().min(EXP_MAP_CEILING)),
        }
    }
}

#[inline]
pub fn expit(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Common log odds ratio and per-study nuisance values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsParams {
    pub theta: f64,
    pub eta: Vec<f64>,
}

impl OddsParams {
    pub fn new(theta: f64, eta: Vec<f64>) -> Self {
        Self { theta, eta }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

/// `(pi0_i, pi1_i)` for every study.
pub fn params_to_probs(p: &OddsParams, map: ProbMap) -> Vec<(f64, f64)> {
    p.eta.iter().map(|&e| map.arm_probs(p.theta, e)).collect()
}

/// Per-study `(theta_i, eta_i)` from `(pi0_i, pi1_i)`.
pub fn probs_to_study_params(probs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    probs
        .iter()
        .map(|&(p0, p1)| {
            for p in [p0, p1] {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::DegenerateProbability(p));
                }
            }
            let (l0, l1) = (logit(p0), logit(p1));
            Ok((l1 - l0, l1 + l0))
        })
        .collect()
}

/// Inverse of [`params_to_probs`] under the common odds ratio model.
///
/// Fails with `HeterogeneousTheta` when the per-study log odds ratios spread
/// by more than [`COMMON_THETA_TOL`].
pub fn probs_to_params(probs: &[(f64, f64)]) -> Result<OddsParams> {
    let per = probs_to_study_params(probs)?;
    let Some(&(theta, _)) = per.first() else {
        return Err(Error::EmptyDataset);
    };
    let (lo, hi) = per.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(t, _)| (lo.min(t), hi.max(t)));
    if hi - lo > COMMON_THETA_TOL {
        return Err(Error::HeterogeneousTheta { spread: hi - lo });
    }
    Ok(OddsParams { theta, eta: per.into_iter().map(|(_, e)| e).collect() })
}

/// Draws one table per study from explicit arm probabilities in `[0, 1]`.
///
/// Study `i` uses the uniforms at `stream/i/control` and `stream/i/treatment`.
pub fn sample_tables(probs: &[(f64, f64)], roster: &SampleSizeRoster, stream: &RngStream) -> Result<MetaDataset> {
    if probs.len() != roster.len() {
        return Err(Error::LengthMismatch { expected: roster.len(), actual: probs.len() });
    }
    let studies = probs
        .iter()
        .zip(roster.sizes())
        .enumerate()
        .map(|(i, (&(p0, p1), &(n, m)))| {
            let s = stream.child(i as u64);
            let x = binomial::quantile(s.child(Arm::Control as u64).uniform(), n, p0);
            let y = binomial::quantile(s.child(Arm::Treatment as u64).uniform(), m, p1);
            StudyTable { x, n, y, m }
        })
        .collect();
    Ok(MetaDataset::new("simulated", studies))
}

/// Draws `X_i ~ Bin(n_i, pi0_i)`, `Y_i ~ Bin(m_i, pi1_i)` by inverse CDF.
pub fn sample_dataset(
    params: &OddsParams,
    roster: &SampleSizeRoster,
    stream: &RngStream,
    map: ProbMap,
) -> Result<MetaDataset> {
    if params.len() != roster.len() {
        return Err(Error::LengthMismatch { expected: roster.len(), actual: params.len() });
    }
    sample_tables(&params_to_probs(params, map), roster, stream)
}

fn crude_eta(s: &StudyTable) -> Option<f64> {
    if s.x == 0 || s.y == 0 || s.x == s.n || s.y == s.m {
        return None;
    }
    Some(logit(s.y as f64 / s.m as f64) + logit(s.x as f64 / s.n as f64))
}

/// Eta estimate with half a count added to every cell.
pub fn pseudo_count_eta(s: &StudyTable) -> f64 {
    logit((s.y as f64 + 0.5) / (s.m as f64 + 1.0)) + logit((s.x as f64 + 0.5) / (s.n as f64 + 1.0))
}

/// Optimizer starting values for the nuisance vector.
///
/// Studies with events in both arms get their crude eta; all others share the
/// minimum of those. Studies whose crude estimate hits a probability of one
/// get the pseudo-count estimate. Fails with `NoNonzeroStudy` when no study
/// supports a crude estimate.
pub fn eta_initial_values(d: &MetaDataset) -> Result<Vec<f64>> {
    let crude: Vec<Option<f64>> = d.studies.iter().map(crude_eta).collect();
    let floor = crude.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::NoNonzeroStudy);
    }
    Ok(d.studies
        .iter()
        .zip(&crude)
        .map(|(s, c)| match c {
            Some(e) => *e,
            None if s.has_events_in_both_arms() => pseudo_count_eta(s),
            None => floor,
        })
        .collect())
}

/// [`eta_initial_values`], falling back to pseudo-count estimates for every
/// study when no crude estimate exists.
pub fn eta_initial_values_or_fallback(d: &MetaDataset) -> Vec<f64> {
    eta_initial_values(d).unwrap_or_else(|_| d.studies.iter().map(pseudo_count_eta).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(x: u32, n: u32, y: u32, m: u32) -> StudyTable {
        StudyTable::new(x, n, y, m).unwrap()
    }

    pub(crate) fn dataset_a() -> MetaDataset {
        MetaDataset::new(
            "a",
            vec![t(3, 100, 2, 100), t(2, 300, 1, 300), t(0, 600, 0, 300), t(0, 600, 0, 300), t(0, 300, 0, 300)],
        )
    }

    #[test]
    fn validate_builtin_dataset() {
        let d = validate_dataset(dataset_a()).unwrap();
        assert!(d.is_validated());
        assert_eq!(d.zero_total_count(), 3);
    }

    #[test]
    fn validate_errors() {
        assert_eq!(validate_dataset(MetaDataset::new("e", vec![])), Err(Error::EmptyDataset));
        assert_eq!(validate_dataset(MetaDataset::new("z", vec![t(0, 10, 0, 10)])), Err(Error::AllZeroControl));
        assert_eq!(validate_dataset(MetaDataset::new("z", vec![t(1, 10, 0, 10)])), Err(Error::AllZeroTreatment));
        let bad = StudyTable { x: 11, n: 10, y: 1, m: 10 };
        assert!(matches!(
            validate_dataset(MetaDataset::new("m", vec![t(1, 10, 1, 10), bad])),
            Err(Error::MalformedCounts { index: 1, .. })
        ));
        assert!(StudyTable::new(11, 10, 0, 5).is_err());
        assert!(StudyTable::new(0, 0, 0, 5).is_err());
    }

    #[test]
    fn zero_total_flag() {
        assert!(t(0, 5, 0, 5).is_zero_total());
        assert!(!t(0, 5, 1, 5).is_zero_total());
    }

    #[test]
    fn probs_at_origin() {
        let p = params_to_probs(&OddsParams::new(0.0, vec![0.0]), ProbMap::Logit);
        assert_eq!(p, vec![(0.5, 0.5)]);
    }

    #[test]
    fn inverse_direction_example() {
        let p = probs_to_params(&[(0.03, 0.02)]).unwrap();
        let theta = (0.02f64 / 0.98).ln() - (0.03f64 / 0.97).ln();
        let eta = (0.02f64 / 0.98).ln() + (0.03f64 / 0.97).ln();
        assert!((p.theta - theta).abs() < 1e-14);
        assert!((p.eta[0] - eta).abs() < 1e-14);
        assert!((p.theta - -0.41572).abs() < 1e-5);
        assert!((p.eta[0] - -7.36792).abs() < 1e-5);

        let back = params_to_probs(&p, ProbMap::Logit);
        assert!((back[0].0 - 0.03).abs() < 1e-10);
        assert!((back[0].1 - 0.02).abs() < 1e-10);
    }

    #[test]
    fn degenerate_and_heterogeneous() {
        assert_eq!(probs_to_params(&[(0.0, 0.5)]), Err(Error::DegenerateProbability(0.0)));
        assert_eq!(probs_to_params(&[(0.5, 1.0)]), Err(Error::DegenerateProbability(1.0)));
        assert!(matches!(probs_to_params(&[(0.5, 0.5), (0.5, 0.6)]), Err(Error::HeterogeneousTheta { .. })));
        assert_eq!(probs_to_study_params(&[(0.5, 0.5)]).unwrap(), vec![(0.0, 0.0)]);
    }

    #[test]
    fn exp_clamped_map() {
        let (p0, p1) = ProbMap::ExpClamped.arm_probs(0.0, -8.0);
        assert!((p0 - (-4.0f64).exp()).abs() < 1e-15);
        assert_eq!(p0, p1);
        let (_, p1) = ProbMap::ExpClamped.arm_probs(10.0, 10.0);
        assert_eq!(p1, EXP_MAP_CEILING);
    }

    #[test]
    fn sampling_edge_probabilities() {
        let roster = SampleSizeRoster::new(vec![(50, 70), (3, 4)]).unwrap();
        let s = RngStream::new(9);
        let d = sample_tables(&[(0.0, 0.0), (0.0, 0.0)], &roster, &s).unwrap();
        assert!(d.studies().iter().all(|t| t.x == 0 && t.y == 0));
        let d = sample_tables(&[(1.0, 0.0), (1.0, 1.0)], &roster, &s).unwrap();
        assert_eq!(d.studies()[0].x, 50);
        assert_eq!(d.studies()[1], StudyTable { x: 3, n: 3, y: 4, m: 4 });
        assert!(matches!(sample_tables(&[(0.1, 0.1)], &roster, &s), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn sampling_mean_matches_binomial() {
        let roster = SampleSizeRoster::new(vec![(100, 100)]).unwrap();
        let root = RngStream::new(2024);
        let reps = 100_000;
        let sum: u64 = (0..reps)
            .map(|r| sample_tables(&[(0.03, 0.03)], &roster, &root.child(r)).unwrap().studies()[0].x as u64)
            .sum();
        let mean = sum as f64 / reps as f64;
        let se = (100.0 * 0.03 * 0.97 / reps as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn initial_eta_rules() {
        let crude = (0.02f64 / 0.98).ln() + (0.03f64 / 0.97).ln();
        let e = eta_initial_values(&MetaDataset::new("s", vec![t(3, 100, 2, 100)])).unwrap();
        assert!((e[0] - crude).abs() < 1e-12);
        assert!((e[0] - -7.36792).abs() < 1e-5);

        let e = eta_initial_values(&dataset_a()).unwrap();
        let e2 = logit(1.0 / 300.0) + logit(2.0 / 300.0);
        let floor = crude.min(e2);
        assert!((e[1] - e2).abs() < 1e-12);
        assert_eq!(&e[2..], &[floor, floor, floor]);

        // full-event study has no crude estimate
        let d = MetaDataset::new("f", vec![t(10, 10, 5, 5)]);
        assert_eq!(eta_initial_values(&d), Err(Error::NoNonzeroStudy));
        let f = eta_initial_values_or_fallback(&d);
        assert!((f[0] - pseudo_count_eta(&d.studies()[0])).abs() < 1e-15 && f[0].is_finite());

        let d = MetaDataset::new("mixed", vec![t(3, 100, 2, 100), t(10, 10, 1, 5)]);
        let e = eta_initial_values(&d).unwrap();
        assert_eq!(e[1], pseudo_count_eta(&d.studies()[1]));
    }

    #[test]
    fn strip_examples() {
        let s = strip_zero_total(&dataset_a());
        assert_eq!(s.studies(), &[t(3, 100, 2, 100), t(2, 300, 1, 300)]);
        assert_eq!(s.ids(), &["1".to_string(), "2".to_string()]);
        let plain = MetaDataset::new("p", vec![t(1, 5, 2, 5)]);
        assert_eq!(strip_zero_total(&plain), plain);
        let only_zero = MetaDataset::new("z", vec![t(0, 5, 0, 5)]);
        assert_eq!(validate_dataset(strip_zero_total(&only_zero)), Err(Error::EmptyDataset));
    }

    proptest! {
        #[test]
        fn round_trip(theta in -10.0f64..10.0, eta in -20.0f64..0.0) {
            let p = OddsParams::new(theta, vec![eta]);
            let back = probs_to_params(&params_to_probs(&p, ProbMap::Logit)).unwrap();
            prop_assert!((back.theta - theta).abs() <= 1e-12 * theta.abs().max(1.0));
            prop_assert!((back.eta[0] - eta).abs() <= 1e-12 * eta.abs().max(1.0));
        }

        #[test]
        fn sampled_tables_are_valid(seed in any::<u64>(), theta in -5.0f64..5.0, etas in proptest::collection::vec(-15.0f64..5.0, 1..6)) {
            let roster = SampleSizeRoster::new(etas.iter().enumerate().map(|(i, _)| (10 + 37 * i as u32, 5 + 11 * i as u32)).collect()).unwrap();
            let d = sample_dataset(&OddsParams::new(theta, etas), &roster, &RngStream::new(seed), ProbMap::Logit).unwrap();
            for (i, s) in d.studies().iter().enumerate() {
                prop_assert!(s.check(i).is_ok());
            }
        }

        #[test]
        fn sampling_is_monotone(seed in any::<u64>(), theta in -3.0f64..3.0, eta in -12.0f64..0.0, bump in 0.0f64..3.0) {
            let roster = SampleSizeRoster::new(vec![(200, 150)]).unwrap();
            let s = RngStream::new(seed);
            let lo = sample_dataset(&OddsParams::new(theta, vec![eta]), &roster, &s, ProbMap::Logit).unwrap();
            let hi = sample_dataset(&OddsParams::new(theta, vec![eta + bump]), &roster, &s, ProbMap::Logit).unwrap();
            let again = sample_dataset(&OddsParams::new(theta, vec![eta]), &roster, &s, ProbMap::Logit).unwrap();
            prop_assert_eq!(&lo, &again);
            prop_assert!(lo.studies()[0].x <= hi.studies()[0].x);
            prop_assert!(lo.studies()[0].y <= hi.studies()[0].y);
        }

        #[test]
        fn strip_is_idempotent(cells in proptest::collection::vec((0u32..3, 0u32..3), 1..10)) {
            let d = MetaDataset::new("p", cells.iter().map(|&(x, y)| t(x, 5, y, 5)).collect());
            let once = strip_zero_total(&d);
            prop_assert_eq!(strip_zero_total(&once), once);
        }
    }
}
