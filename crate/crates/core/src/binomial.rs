//! Binomial inverse-CDF sampling.
//!
//! `quantile(u, n, p)` returns the smallest `k` with `F(k; n, p) >= u`. For a
//! fixed `u` the result is non-decreasing in `p`, which is what lets a fixed
//! pool of uniforms act as common random numbers across parameter values.

use statrs::function::gamma::ln_gamma;

/// Log-pmf threshold below which the lower tail is treated as empty.
const LOG_TINY: f64 = -700.0;

/// Incremental walk up the binomial CDF.
#[derive(Debug, Clone)]
struct CdfWalk {
    n: u32,
    k: u32,
    pmf: f64,
    cdf: f64,
    odds: f64,
    mean: f64,
}

fn ln_pmf(n: u32, k: u32, p: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * (-p).ln_1p()
}

impl CdfWalk {
    /// Requires 0 < p < 1.
    fn new(n: u32, p: f64) -> Self {
        let odds = p / (1.0 - p);
        let mean = n as f64 * p;
        let ln_p0 = n as f64 * (-p).ln_1p();
        let (k, pmf) = if ln_p0 > LOG_TINY {
            (0, ln_p0.exp())
        } else {
            // ln pmf is increasing up to the mode: bisect for the first k whose
            // mass is representable. Everything below it is < e^-700.
            let mode = ((n as f64 + 1.0) * p).floor().min(n as f64) as u32;
            let (mut lo, mut hi) = (0u32, mode);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if ln_pmf(n, mid, p) > LOG_TINY {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            (lo, ln_pmf(n, lo, p).exp())
        };
        Self { n, k, pmf, cdf: pmf, odds, mean }
    }

    /// Advance until `cdf >= u` (or the support is exhausted) and return `k`.
    #[inline]
    fn seek(&mut self, u: f64) -> u32 {
        while self.cdf < u && self.k < self.n {
            if self.k as f64 > self.mean && self.pmf < self.cdf * 1e-17 {
                // remaining mass cannot move the cdf in double precision
                break;
            }
            self.pmf *= (self.n - self.k) as f64 / (self.k + 1) as f64 * self.odds;
            self.k += 1;
            self.cdf += self.pmf;
        }
        self.k
    }
}

/// Smallest `k` with `P(Binomial(n, p) <= k) >= u`, for `u` in (0, 1).
///
/// `p <= 0` gives 0 and `p >= 1` gives `n`.
pub fn quantile(u: f64, n: u32, p: f64) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    CdfWalk::new(n, p).seek(u)
}

/// Inverse-CDF draws for a batch of uniforms supplied in ascending order.
///
/// `sorted_u[j]` belongs to replicate `order[j]`; the count is written to
/// `out[order[j]]`. One pass over the CDF serves the whole batch.
pub fn quantiles_sorted(sorted_u: &[f64], order: &[u32], n: u32, p: f64, out: &mut [u32]) {
    debug_assert_eq!(sorted_u.len(), order.len());
    if n == 0 || p <= 0.0 {
        for &s in order {
            out[s as usize] = 0;
        }
        return;
    }
    if p >= 1.0 {
        for &s in order {
            out[s as usize] = n;
        }
        return;
    }
    let mut walk = CdfWalk::new(n, p);
    for (&u, &s) in sorted_u.iter().zip(order) {
        out[s as usize] = walk.seek(u);
    }
}
