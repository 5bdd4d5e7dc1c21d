//! Nelder-Mead simplex minimization for derivative-free, possibly
//! piecewise-constant objectives.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Offset added to each coordinate of the start to build the simplex.
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Converged once `f(worst) - f(best)` drops below this.
    pub f_tolerance: f64,
    /// Stop as soon as some probe reaches this value or lower.
    pub target: Option<f64>,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.5,
            max_evaluations: 500,
            f_tolerance: 1e-8,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub reached_target: bool,
}

struct Tracker<F> {
    f: F,
    evaluations: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F: FnMut(&[f64]) -> f64> Tracker<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best_f {
            self.best_f = v;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        v
    }
}

/// Minimizes `f` from `x0`. The returned point is the best probe seen; NaN
/// objective values are treated as `+inf`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult {
    let dim = x0.len();
    assert!(dim >= 1, "need at least one coordinate");
    let mut tr = Tracker { f, evaluations: 0, best_x: x0.to_vec(), best_f: f64::INFINITY };
    let hit = |tr: &Tracker<F>| cfg.target.is_some_and(|t| tr.best_f <= t);
    let finish = |tr: Tracker<F>, converged: bool| {
        let reached_target = cfg.target.is_some_and(|t| tr.best_f <= t);
        NelderMeadResult { x: tr.best_x, f: tr.best_f, evaluations: tr.evaluations, converged, reached_target }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = tr.eval(x0);
    simplex.push((x0.to_vec(), f0));
    if hit(&tr) {
        return finish(tr, false);
    }
    for j in 0..dim {
        let mut x = x0.to_vec();
        x[j] += cfg.initial_step;
        let v = tr.eval(&x);
        simplex.push((x, v));
        if hit(&tr) {
            return finish(tr, false);
        }
    }

    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let point = |c: &[f64], w: &[f64], coef: f64, out: &mut Vec<f64>| {
        out.clear();
        out.extend(c.iter().zip(w).map(|(ci, wi)| ci + coef * (ci - wi)));
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst - best < cfg.f_tolerance {
            return finish(tr, true);
        }
        if tr.evaluations >= cfg.max_evaluations {
            return finish(tr, false);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        let second_worst = simplex[dim - 1].1;
        point(&centroid, &simplex[dim].0, cfg.reflection, &mut trial);
        let fr = tr.eval(&trial);
        if hit(&tr) {
            return finish(tr, false);
        }

        if fr < best {
            let reflected = trial.clone();
            point(&centroid, &simplex[dim].0, cfg.reflection * cfg.expansion, &mut trial);
            let fe = tr.eval(&trial);
            simplex[dim] = if fe < fr { (trial.clone(), fe) } else { (reflected, fr) };
        } else if fr < second_worst {
            simplex[dim] = (trial.clone(), fr);
        } else {
            // contraction: outside if the reflection improved on the worst
            let outside = fr < worst;
            let coef = if outside { cfg.reflection * cfg.contraction } else { -cfg.contraction };
            point(&centroid, &simplex[dim].0, coef, &mut trial);
            let fc = tr.eval(&trial);
            let accept = if outside { fc <= fr } else { fc < worst };
            if accept {
                simplex[dim] = (trial.clone(), fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + cfg.shrink * (*xi - bi);
                    }
                    *fx = tr.eval(x);
                    if hit(&tr) {
                        return finish(tr, false);
                    }
                }
            }
        }
        if hit(&tr) {
            return finish(tr, false);
        }
    }
}
