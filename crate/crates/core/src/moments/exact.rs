//! Deterministic evaluation of `E|v + Σ a_j ξ_j|^p` for a handful of summands.
//!
//! The running radius `ρ` of `v + a_1ξ_1 + … + a_kξ_k` evolves by
//! `ρ'² = (ρ − a)² + 2ρa(1+θ)`, so the moment is a nested expectation over
//! independent copies of `θ`. The innermost summand is integrated by the θ
//! kernel. The one before it produces a function of `ρ'` with a kink where
//! `ρ'` meets the last coefficient; that level is integrated in the angle
//! variable with panels graded toward the crossing angle. Any remaining outer
//! levels use a `K`-node Gauss-Jacobi rule, and the truncation error is
//! estimated by repeating the whole computation with half the resolution.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use super::{Estimate, MomentQuery};
use crate::error::{Error, Result};
use crate::kernel::quadrature::{cached_jacobi_rule, gauss_legendre, GaussRule, JacobiRule};
use crate::kernel::special::theta_normalizer;
use crate::kernel::theta::{theta_power_means, KERNEL_REL_ERR};

pub const DEFAULT_EXACT_CAP: usize = 5;
pub const MAX_NODES: usize = 64;
const GRADING: f64 = 4.0;
const MAX_PANEL_WIDTH: f64 = std::f64::consts::FRAC_PI_4;

/// Resolution of one evaluation: outer nodes, nodes per angle panel and the
/// number of graded panels on each side of the crossing angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Resolution {
    pub k: usize,
    pub panel_nodes: usize,
    pub graded: usize,
}

impl Resolution {
    pub(crate) fn fine(k: usize) -> Self {
        Self { k, panel_nodes: 12, graded: 5 }
    }

    pub(crate) fn coarse(k: usize) -> Self {
        Self { k: (k / 2).max(1), panel_nodes: 10, graded: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    /// Nodes per outer Jacobi level; `None` picks a default from the depth.
    pub nodes: Option<usize>,
    pub cap: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { nodes: None, cap: DEFAULT_EXACT_CAP }
    }
}

/// `min(64, ⌊600^{1/L}⌋)` for `L` outer levels.
pub fn default_nodes(levels: usize) -> usize {
    if levels == 0 {
        return MAX_NODES;
    }
    let k = 600f64.powf(1.0 / levels as f64).floor() as usize;
    k.clamp(2, MAX_NODES)
}

struct Engine<'a> {
    d: usize,
    exps: &'a [f64],
    outer: Arc<JacobiRule>,
    panel: Arc<GaussRule>,
    graded: usize,
    norm: f64,
    kernel_calls: AtomicU64,
}

enum Crossing {
    /// The last coefficient is below every reachable radius.
    Below,
    /// ... above every reachable radius.
    Above,
    /// Reached at the given angle.
    At(f64),
}

impl Engine<'_> {
    fn kernel(&self, gap_sq: f64, cross: f64, out: &mut [f64]) -> Result<()> {
        self.kernel_calls.fetch_add(1, Ordering::Relaxed);
        theta_power_means(gap_sq, cross, self.exps, self.d, out)
    }

    /// `E|ρ e₁ + Σ rest_j ξ_j|^p` for every exponent.
    fn eval(&self, rho: f64, rest: &[f64], out: &mut [f64]) -> Result<()> {
        match rest {
            [] => self.kernel(rho * rho, 0.0, out),
            [c] => self.kernel((rho - c).powi(2), 2.0 * rho * c, out),
            [c1, c2] => self.penultimate(rho, *c1, *c2, out),
            [c, tail @ ..] => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; out.len()];
                let base = (rho - c).powi(2);
                let cross = 2.0 * rho * c;
                for (x, w) in self.outer.nodes.iter().zip(&self.outer.weights) {
                    let next = (base + cross * (1.0 + x)).sqrt();
                    self.eval(next, tail, &mut tmp)?;
                    out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += w * t);
                }
                Ok(())
            }
        }
    }

    /// Top level, parallel over the outer nodes with an ordered reduction.
    fn eval_top(&self, rho: f64, rest: &[f64], out: &mut [f64]) -> Result<()> {
        if rest.len() < 3 {
            return self.eval(rho, rest, out);
        }
        let (c, tail) = (rest[0], &rest[1..]);
        let base = (rho - c).powi(2);
        let cross = 2.0 * rho * c;
        let parts: Vec<Result<Vec<f64>>> = self
            .outer
            .nodes
            .par_iter()
            .map(|x| {
                let mut tmp = vec![0.0; out.len()];
                self.eval((base + cross * (1.0 + x)).sqrt(), tail, &mut tmp)?;
                Ok(tmp)
            })
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (part, w) in parts.into_iter().zip(&self.outer.weights) {
            out.iter_mut().zip(part?).for_each(|(o, t)| *o += w * t);
        }
        Ok(())
    }

    fn penultimate(&self, rho: f64, c1: f64, c2: f64, out: &mut [f64]) -> Result<()> {
        let four = 4.0 * rho * c1;
        if four == 0.0 {
            return self.eval((rho - c1).abs(), &[c2], out);
        }
        let low = (rho - c1).abs();
        let high = rho + c1;
        let crossing = if c2 <= low {
            Crossing::Below
        } else if c2 >= high {
            Crossing::Above
        } else {
            let s = ((c2 - low) * (c2 + low) / four).sqrt().min(1.0);
            Crossing::At(2.0 * s.asin())
        };
        let centre = match crossing {
            Crossing::Below => 0.0,
            Crossing::Above => PI,
            Crossing::At(phi) => phi,
        };
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; out.len()];
        // ρ'² − c2² at angle centre ± off, written without cancellation.
        let excess = |off: f64, sign: f64| -> f64 {
            let h = (0.5 * off).sin();
            match crossing {
                Crossing::Below => (low - c2) * (low + c2) + four * h * h,
                Crossing::Above => (high - c2) * (high + c2) - four * h * h,
                Crossing::At(phi) => four * sign * h * (phi + 0.5 * sign * off).sin(),
            }
        };
        for (sign, length) in [(-1.0, centre), (1.0, PI - centre)] {
            if length <= 0.0 {
                continue;
            }
            let mut hi = length;
            for j in 0..=self.graded {
                let lo = if j == self.graded { 0.0 } else { hi / GRADING };
                let pieces = ((hi - lo) / MAX_PANEL_WIDTH).ceil().max(1.0) as usize;
                let width = (hi - lo) / pieces as f64;
                for piece in 0..pieces {
                    let plo = lo + piece as f64 * width;
                    let half = 0.5 * width;
                    for (x, w) in self.panel.nodes.iter().zip(&self.panel.weights) {
                        let off = plo + half * (1.0 + x);
                        let phi = centre + sign * off;
                        let diff = excess(off, sign);
                        let next = (c2 * c2 + diff).max(0.0).sqrt();
                        let gap = if next + c2 > 0.0 { diff / (next + c2) } else { 0.0 };
                        self.kernel(gap * gap, 2.0 * next * c2, &mut tmp)?;
                        let weight = w * width * self.norm * phi.sin().abs().powi(self.d as i32 - 2);
                        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += weight * t);
                    }
                }
                hi = lo;
            }
        }
        Ok(())
    }
}

fn validate(coeffs: &[f64], shift: f64, ps: &[f64], d: usize, opts: &ExactOptions) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    // zero coefficients drop out of the recursion
    let n = coeffs.iter().filter(|a| **a != 0.0).count();
    if n > opts.cap {
        return Err(Error::CapExceeded { n, cap: opts.cap });
    }
    if let Some(k) = opts.nodes {
        if k == 0 || k > MAX_NODES {
            return Err(Error::Config(format!("nodes per level must be in 1..={MAX_NODES}, got {k}")));
        }
    }
    if coeffs.iter().any(|a| !a.is_finite()) || !(shift >= 0.0) || !shift.is_finite() {
        return Err(Error::Precondition("coefficients and shift must be finite, shift >= 0".into()));
    }
    if let Some(&p) = ps.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidExponent { value: p, reason: "moment exponent must be >= 0" });
    }
    Ok(())
}

pub(crate) fn run(
    rho: f64,
    rest: &[f64],
    exps: &[f64],
    d: usize,
    res: Resolution,
) -> Result<(Vec<f64>, u64)> {
    let engine = Engine {
        d,
        exps,
        outer: cached_jacobi_rule(d, res.k)?,
        panel: gauss_legendre(res.panel_nodes),
        graded: res.graded,
        norm: 1.0 / theta_normalizer(d),
        kernel_calls: AtomicU64::new(0),
    };
    let mut out = vec![0.0; exps.len()];
    engine.eval_top(rho, rest, &mut out)?;
    Ok((out, engine.kernel_calls.load(Ordering::Relaxed)))
}

/// `E|v + Σ a_j ξ_j|^p` for each `p` in `ps`, sharing all quadrature work.
pub fn sum_moments_exact(
    coeffs: &[f64],
    shift: f64,
    ps: &[f64],
    d: usize,
    opts: ExactOptions,
) -> Result<Vec<Estimate>> {
    validate(coeffs, shift, ps, d, &opts)?;
    let mut mags: Vec<f64> = coeffs.iter().map(|a| a.abs()).filter(|&a| a > 0.0).collect();
    mags.sort_by(|x, y| y.total_cmp(x));
    let (rho, rest) = if shift > 0.0 || mags.is_empty() {
        (shift, &mags[..])
    } else {
        (mags[0], &mags[1..])
    };
    let exps: Vec<f64> = ps.iter().map(|p| 0.5 * p).collect();
    let levels = rest.len().saturating_sub(2);
    let k = opts.nodes.unwrap_or_else(|| default_nodes(levels));
    let (fine, calls) = run(rho, rest, &exps, d, Resolution::fine(k))?;
    let coarse = if rest.len() >= 2 {
        Some(run(rho, rest, &exps, d, Resolution::coarse(k))?.0)
    } else {
        None
    };
    Ok(fine
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let floor = KERNEL_REL_ERR * value.abs();
            match &coarse {
                None if calls <= 1 && rest.len() <= 1 && kernel_is_closed(rho, rest) => {
                    Estimate::closed_form(value)
                }
                None => Estimate::quadrature(value, floor, calls),
                Some(c) => Estimate::quadrature(value, (value - c[i]).abs() + floor, calls),
            }
        })
        .collect())
}

fn kernel_is_closed(rho: f64, rest: &[f64]) -> bool {
    match rest {
        [] => true,
        [c] => rho == *c || rho == 0.0,
        _ => false,
    }
}

/// `E|v + Σ a_j ξ_j|^p` for an all-sphere query.
pub fn sum_moment_exact(query: &MomentQuery, opts: ExactOptions) -> Result<Estimate> {
    if !query.all_sphere() {
        return Err(Error::Precondition("exact evaluation needs every summand on the sphere".into()));
    }
    let est = sum_moments_exact(query.a.as_slice(), query.shift, &[query.p], query.d, opts)?;
    Ok(est[0])
}
