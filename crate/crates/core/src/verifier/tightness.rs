use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::eval::{compare, Partner};
use super::{Budget, InequalityId};
use crate::constants::{c_diag, c_main};
use crate::error::{Error, Result};
use crate::kernel::sampling::rng_stream;
use crate::kernel::special::gaussian_abs_moment_minus_one;
use crate::moments::CoeffVector;

const MAX_RESTARTS: usize = 20;
/// Deficit terms below this are treated as the degenerate (0/0) region.
const TERM_FLOOR: f64 = 1e-9;
const SIMPLEX_STEP: f64 = 0.15;
const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub restart: usize,
    pub evaluations: usize,
    /// Smallest ratio seen in this restart.
    pub ratio: Option<f64>,
}

/// Smallest observed `(rhs − lhs) / deficit term` over unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub id: InequalityId,
    pub p: f64,
    pub d: usize,
    pub n: usize,
    /// `None` when no nondegenerate point was evaluated.
    pub ratio: Option<f64>,
    pub ratio_err: f64,
    pub argmin: Vec<f64>,
    pub evaluations: usize,
    pub restarts: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub budget_exhausted: bool,
    /// The deficit term vanishes identically (e.g. `p = 2`).
    pub degenerate: bool,
    /// Ratio below one by more than four standard errors.
    pub falsification_candidate: bool,
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, v) in u.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

#[derive(Debug, Clone)]
struct Best {
    ratio: f64,
    err: f64,
    x: Vec<f64>,
}

struct Objective<'a> {
    id: InequalityId,
    p: f64,
    d: usize,
    constant: f64,
    diag: Vec<f64>,
    budget: &'a Budget,
    evals: AtomicUsize,
    best: Mutex<Option<Best>>,
    restart_best: Mutex<f64>,
    failure: Mutex<Option<Error>>,
}

impl Objective<'_> {
    fn ratio(&self, x: &[f64]) -> Result<Option<(f64, f64)>> {
        let a = CoeffVector::new(x.iter().map(|v| v.sqrt()).collect())?;
        let term = self.constant
            * match self.id {
                InequalityId::ThmMain => a.l4_pow4(),
                _ => a.diagonal_deficit(),
            };
        if term < TERM_FLOOR {
            return Ok(None);
        }
        let partner = match self.id {
            InequalityId::ThmMain => Partner::Gaussian,
            _ => Partner::Sphere(&self.diag),
        };
        let pair = compare(a.as_slice(), partner, &[self.p], self.d, self.budget, self.budget.samples, self.budget.seed)?[0];
        Ok(Some((pair.gap.value / term, pair.gap.err / term)))
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let x = project_simplex(y);
        let outside: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
        self.evals.fetch_add(1, Ordering::Relaxed);
        let value = match self.ratio(&x) {
            Ok(Some((ratio, err))) => {
                let mut best = self.best.lock().expect("lock");
                if best.as_ref().is_none_or(|b| ratio < b.ratio) {
                    *best = Some(Best { ratio, err, x: x.clone() });
                }
                let mut rb = self.restart_best.lock().expect("lock");
                *rb = rb.min(ratio);
                ratio
            }
            Ok(None) => PENALTY,
            Err(e) => {
                self.failure.lock().expect("lock").get_or_insert(e);
                PENALTY
            }
        };
        Ok(value + outside)
    }
}

fn random_simplex_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Minimizes the ratio by Nelder-Mead in the squared coordinates with
/// projection onto the simplex, restarting from random points until
/// `max_evals` objective evaluations are spent.
pub fn tightness_search(
    id: InequalityId,
    p: f64,
    d: usize,
    n: usize,
    max_evals: usize,
    budget: &Budget,
) -> Result<TightnessReport> {
    if max_evals == 0 {
        return Err(Error::Precondition("tightness budget must be positive".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("vector length must be at least 1".into()));
    }
    let constant = match id {
        InequalityId::ThmMain => c_main(p, d)?,
        InequalityId::ThmDiag if n >= 2 => c_diag(p, d)?,
        InequalityId::ThmDiag => return Err(Error::Precondition("the diagonal comparison needs n >= 2".into())),
        other => return Err(Error::Precondition(format!("no tightness ratio for `{other}`"))),
    };
    let mut report = TightnessReport {
        id,
        p,
        d,
        n,
        ratio: None,
        ratio_err: 0.0,
        argmin: Vec::new(),
        evaluations: 0,
        restarts: 0,
        trajectory: Vec::new(),
        budget_exhausted: false,
        degenerate: constant == 0.0,
        falsification_candidate: false,
    };
    if report.degenerate {
        return Ok(report);
    }
    if id == InequalityId::ThmMain && n == 1 {
        let ratio = gaussian_abs_moment_minus_one(p, d)? / constant;
        report.ratio = Some(ratio);
        report.argmin = vec![1.0];
        report.evaluations = 1;
        report.falsification_candidate = ratio < 1.0;
        return Ok(report);
    }

    let objective = Objective {
        id,
        p,
        d,
        constant,
        diag: vec![1.0 / (n as f64).sqrt(); n],
        budget,
        evals: AtomicUsize::new(0),
        best: Mutex::new(None),
        restart_best: Mutex::new(f64::INFINITY),
        failure: Mutex::new(None),
    };
    let mut rng = rng_stream(budget.seed, 0x7165);
    for restart in 0..MAX_RESTARTS {
        let used = objective.evals.load(Ordering::Relaxed);
        if used >= max_evals {
            report.budget_exhausted = true;
            break;
        }
        let start = random_simplex_point(&mut rng, n);
        let mut simplex = vec![start.clone()];
        for i in 0..n {
            let mut v = start.clone();
            v[i] += SIMPLEX_STEP;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-10)
            .map_err(|e| Error::Config(e.to_string()))?;
        // Each iteration costs one to `n + 2` evaluations; `n + 1` more set up the simplex.
        let iters = ((max_evals - used).saturating_sub(n + 1) / 2).max(1) as u64;
        *objective.restart_best.lock().expect("lock") = f64::INFINITY;
        Executor::new(&objective, solver)
            .configure(|s| s.max_iters(iters))
            .run()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(e) = objective.failure.lock().expect("lock").take() {
            return Err(e);
        }
        report.restarts = restart + 1;
        report.trajectory.push(TrajectoryPoint {
            restart,
            evaluations: objective.evals.load(Ordering::Relaxed),
            ratio: Some(*objective.restart_best.lock().expect("lock")).filter(|r| r.is_finite()),
        });
    }
    report.evaluations = objective.evals.load(Ordering::Relaxed);
    report.budget_exhausted |= report.evaluations >= max_evals;
    match objective.best.into_inner().expect("lock") {
        Some(best) => {
            report.ratio = Some(best.ratio);
            report.ratio_err = best.err;
            report.argmin = best.x.iter().map(|v| v.sqrt()).collect();
            report.falsification_candidate = best.ratio < 1.0 - 4.0 * best.err - 1e-9;
        }
        None => report.degenerate = true,
    }
    Ok(report)
}

impl CostFunction for &Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        (*self).cost(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::special::gaussian_abs_moment;

    #[test]
    fn projection_lands_on_the_simplex() {
        let x = project_simplex(&[0.9, 0.5, -0.2]);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(x.iter().all(|v| *v >= 0.0));
        assert_eq!(project_simplex(&[0.25, 0.75]), vec![0.25, 0.75]);
    }

    #[test]
    fn singleton_ratio() {
        let (p, d) = (3.0, 4);
        let r = tightness_search(InequalityId::ThmMain, p, d, 1, 10, &Budget::default()).unwrap();
        let want = (gaussian_abs_moment(p, d).unwrap() - 1.0) / c_main(p, d).unwrap();
        let ratio = r.ratio.unwrap();
        assert!((ratio - want).abs() < 1e-12 * want);
        assert!(ratio >= 1.0);
    }

    #[test]
    fn degenerate_at_second_moment() {
        let r = tightness_search(InequalityId::ThmDiag, 2.0, 3, 2, 100, &Budget::default()).unwrap();
        assert!(r.degenerate);
        assert!(tightness_search(InequalityId::ThmMain, 3.0, 3, 2, 0, &Budget::default()).is_err());
    }

    #[test]
    fn two_term_search_stays_above_one() {
        let r = tightness_search(InequalityId::ThmMain, 3.0, 2, 2, 150, &Budget::default()).unwrap();
        assert!(r.ratio.unwrap() >= 1.0, "{r:?}");
        assert!(!r.falsification_candidate);
        assert!(r.evaluations <= 150 + 10);
        assert!((r.argmin.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
