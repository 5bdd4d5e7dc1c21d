//! Mantel-Haenszel and Peto baselines, and the centered MH statistic.
//!
//! All estimates are log odds ratios of treatment versus control.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{MetaDataset, StudyTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mh,
    Peto,
    Repro,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mh => "MH",
            Method::Peto => "Peto",
            Method::Repro => "Repro",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mh" => Ok(Method::Mh),
            "peto" => Ok(Method::Peto),
            "repro" => Ok(Method::Repro),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Point estimate and interval on the log odds ratio scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: Method,
}

impl EstimateCI {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Closed-interval containment.
    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }

    /// `(point, lower, upper)` exponentiated to the odds ratio scale.
    pub fn odds_ratio_scale(&self) -> (f64, f64, f64) {
        (self.point.exp(), self.lower.exp(), self.upper.exp())
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("confidence level {level} must lie in (0, 1)")))
    }
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 * (1.0 + level))
}

/// MH weights of one table: `R = x (m - y) / N` and `S = y (n - x) / N`.
///
/// Shared by the observed-data and simulated-data paths so both sum the same
/// floating-point terms in the same order.
#[inline]
pub(crate) fn mh_terms(x: u32, n: u32, y: u32, m: u32) -> (f64, f64) {
    let total = (n + m) as f64;
    let r = x as f64 * (m - y) as f64 / total;
    let s = y as f64 * (n - x) as f64 / total;
    (r, s)
}

/// `(sum R, sum S)` over all studies, in study order.
pub fn mh_sums(d: &MetaDataset) -> (f64, f64) {
    d.studies().iter().fold((0.0, 0.0), |(r, s), t| {
        let (ri, si) = mh_terms(t.x, t.n, t.y, t.m);
        (r + ri, s + si)
    })
}

fn mh_sums_corrected(d: &MetaDataset, cc: f64) -> (f64, f64) {
    d.studies().iter().fold((0.0, 0.0), |(r, s), t| {
        let (a, b, c, dd) = corrected_cells(t, cc);
        let total = a + b + c + dd;
        (r + c * b / total, s + a * dd / total)
    })
}

/// `log(sum S / sum R)`; `cc` is added to every cell of tables with a zero cell.
///
/// Returns `+inf` or `-inf` when exactly one sum vanishes.
pub fn mh_log_odds_ratio(d: &MetaDataset, cc: f64) -> Result<f64> {
    if !(cc >= 0.0 && cc.is_finite()) {
        return Err(Error::InvalidConfig(format!("continuity correction {cc} must be >= 0")));
    }
    let (r, s) = if cc == 0.0 { mh_sums(d) } else { mh_sums_corrected(d, cc) };
    if r == 0.0 && s == 0.0 {
        return Err(Error::UndefinedEstimate("Mantel-Haenszel sums are both zero".into()));
    }
    Ok((s / r).ln())
}

/// Cells `(y, m - y, x, n - x)` as reals, with `cc` added to every cell of a
/// table that has a zero cell.
fn corrected_cells(t: &StudyTable, cc: f64) -> (f64, f64, f64, f64) {
    let any_zero = t.x == 0 || t.y == 0 || t.x == t.n || t.y == t.m;
    let c = if any_zero { cc } else { 0.0 };
    (t.y as f64 + c, (t.m - t.y) as f64 + c, t.x as f64 + c, (t.n - t.x) as f64 + c)
}

/// Robins-Breslow-Greenland variance of the MH log odds ratio.
pub fn mh_rbg_variance(d: &MetaDataset) -> Result<f64> {
    rbg_variance(d, 0.0)
}

fn rbg_variance(d: &MetaDataset, cc: f64) -> Result<f64> {
    let mut sum_r = 0.0;
    let mut sum_s = 0.0;
    let mut pr = 0.0;
    let mut ps_qr = 0.0;
    let mut qs = 0.0;
    for t in d.studies() {
        let (a, b, c, dd) = corrected_cells(t, cc);
        let total = a + b + c + dd;
        let p = (a + dd) / total;
        let q = (b + c) / total;
        let r = a * dd / total;
        let s = b * c / total;
        sum_r += r;
        sum_s += s;
        pr += p * r;
        ps_qr += p * s + q * r;
        qs += q * s;
    }
    if sum_r == 0.0 || sum_s == 0.0 {
        return Err(Error::UndefinedEstimate("Mantel-Haenszel estimate is infinite".into()));
    }
    Ok(pr / (2.0 * sum_r * sum_r) + ps_qr / (2.0 * sum_r * sum_s) + qs / (2.0 * sum_s * sum_s))
}

/// MH point estimate with a Wald interval from the RBG variance.
pub fn mh_confidence_interval(d: &MetaDataset, level: f64) -> Result<EstimateCI> {
    mh_confidence_interval_cc(d, level, 0.0)
}

/// [`mh_confidence_interval`] on continuity-corrected tables. With `cc > 0`
/// zero-total studies receive the correction too and so stop being
/// ignorable.
pub fn mh_confidence_interval_cc(d: &MetaDataset, level: f64, cc: f64) -> Result<EstimateCI> {
    check_level(level)?;
    let point = mh_log_odds_ratio(d, cc)?;
    if !point.is_finite() {
        return Err(Error::UndefinedEstimate("Mantel-Haenszel estimate is infinite".into()));
    }
    let half = normal_quantile(level) * rbg_variance(d, cc)?.sqrt();
    Ok(EstimateCI { point, lower: point - half, upper: point + half, level, method: Method::Mh })
}

/// Observed-minus-expected sum and hypergeometric variance sum.
pub fn peto_moments(d: &MetaDataset) -> (f64, f64) {
    d.studies().iter().fold((0.0, 0.0), |(oe, v), t: &StudyTable| {
        let total = t.total() as f64;
        if t.total() <= 1 {
            return (oe, v);
        }
        let events = (t.x + t.y) as f64;
        let expected = events * t.m as f64 / total;
        let var = events * (total - events) * t.n as f64 * t.m as f64 / (total * total * (total - 1.0));
        (oe + (t.y as f64 - expected), v + var)
    })
}

/// Peto one-step log odds ratio and interval.
pub fn peto_log_odds_ratio_ci(d: &MetaDataset, level: f64) -> Result<EstimateCI> {
    check_level(level)?;
    let (oe, v) = peto_moments(d);
    if v <= 0.0 {
        return Err(Error::UndefinedEstimate("Peto variance sum is zero".into()));
    }
    let point = oe / v;
    let half = normal_quantile(level) / v.sqrt();
    Ok(EstimateCI { point, lower: point - half, upper: point + half, level, method: Method::Peto })
}

/// `W = W_MH - theta`. NaN stands for an undefined MH estimate (both sums
/// zero); an infinite MH estimate gives an infinite `W`.
///
/// With this encoding `w.abs() < t` is false for every undefined or
/// infinite value; the Monte-Carlo objective decides separately how to count
/// them.
#[inline]
pub fn w_from_sums(sum_r: f64, sum_s: f64, theta: f64) -> f64 {
    (sum_s / sum_r).ln() - theta
}

pub fn w_statistic(d: &MetaDataset, theta: f64) -> f64 {
    let (r, s) = mh_sums(d);
    w_from_sums(r, s, theta)
}
