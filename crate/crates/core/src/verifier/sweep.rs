use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{exact_fits, exact_moments, gaussian_side, Pair};
use super::schur::{schur_ttransform_checks, t_transform};
use super::theorems::{
    diag_record, lpl2_record, main_record, verify_homogeneous_lpl2_multi, verify_remark_scaling,
    verify_theorem_diag_multi, verify_theorem_main_multi,
};
use super::{Budget, InequalityId, VerificationRecord};
use crate::error::{Error, Result};
use crate::kernel::sampling::{fill_normal, rng_stream};
use crate::moments::{CoeffVector, Estimate};

/// SplitMix64 of `master` and `index`: decorrelated per-cell seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorKind {
    Diagonal,
    NearSingleton,
    Uniform,
    /// One coordinate carrying between 55% and 99% of the mass.
    Spiked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVector {
    pub kind: VectorKind,
    pub a: CoeffVector,
}

const NEAR_SINGLETON_TAIL: f64 = 1e-3;

fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    loop {
        fill_normal(rng, &mut g);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.iter().map(|x| x.abs() / norm).collect();
        }
    }
}

/// Diagonal and near-singleton vectors followed by `count` random ones,
/// alternating uniform and spiked. Depends only on `(n, count, seed)`.
pub fn sweep_vectors(n: usize, count: usize, seed: u64) -> Result<Vec<SweepVector>> {
    if n == 0 {
        return Err(Error::Config("vector length must be at least 1".into()));
    }
    let mut out = vec![SweepVector { kind: VectorKind::Diagonal, a: CoeffVector::diagonal(n)? }];
    if n == 1 {
        return Ok(out);
    }
    let tail = (NEAR_SINGLETON_TAIL / (n - 1) as f64).sqrt();
    let mut near = vec![tail; n];
    near[0] = (1.0 - NEAR_SINGLETON_TAIL).sqrt();
    out.push(SweepVector { kind: VectorKind::NearSingleton, a: CoeffVector::normalized(near)? });
    let mut rng = rng_stream(seed, n as u64);
    for i in 0..count {
        let (kind, a) = if i % 2 == 0 {
            (VectorKind::Uniform, random_unit(&mut rng, n))
        } else {
            let spike: f64 = 0.55 + 0.44 * rng.random::<f64>();
            let rest = random_unit(&mut rng, n - 1);
            let scale = (1.0 - spike).sqrt();
            let mut a = vec![spike.sqrt()];
            a.extend(rest.iter().map(|x| x * scale));
            (VectorKind::Spiked, a)
        };
        out.push(SweepVector { kind, a: CoeffVector::normalized(a)? });
    }
    Ok(out)
}

/// A grid campaign over `(p, d, n)` and coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ids: Vec<InequalityId>,
    pub ps: Vec<f64>,
    pub ds: Vec<usize>,
    pub ns: Vec<usize>,
    pub vectors_per_cell: usize,
    pub budget: Budget,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ids: vec![InequalityId::ThmMain, InequalityId::ThmDiag],
            ps: vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 8.0, 12.0],
            ds: vec![2, 3, 5, 10],
            ns: (1..=8).collect(),
            vectors_per_cell: 25,
            budget: Budget::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(&p) = self.ps.iter().find(|p| !(**p >= 2.0) || !p.is_finite()) {
            return Err(Error::InvalidExponent { value: p, reason: "sweep exponents must be >= 2" });
        }
        if let Some(&d) = self.ds.iter().find(|d| **d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        if self.ns.contains(&0) {
            return Err(Error::Config("vector lengths must be at least 1".into()));
        }
        if self.ps.is_empty() || self.ds.is_empty() || self.ids.is_empty() {
            return Err(Error::Config("sweep needs at least one id, p and d".into()));
        }
        if self.budget.samples < 2 {
            return Err(Error::Config("Monte Carlo budget must be at least 2 samples".into()));
        }
        for id in &self.ids {
            if !matches!(
                id,
                InequalityId::ThmMain
                    | InequalityId::ThmDiag
                    | InequalityId::Lpl2Homogeneous
                    | InequalityId::SchurTtransform
                    | InequalityId::RemarkScaling
            ) {
                return Err(Error::Config(format!("`{id}` is not a sweep inequality")));
            }
        }
        Ok(())
    }
}

struct Cell {
    d: usize,
    vector: SweepVector,
    index: u64,
}

const LPL2_SCALE: f64 = 1.5;

fn run_cell(spec: &SweepSpec, cell: &Cell, diag: &HashMap<(usize, usize), Vec<Estimate>>) -> Result<Vec<VerificationRecord>> {
    let (d, a, ps) = (cell.d, &cell.vector.a, &spec.ps[..]);
    let n = a.len();
    let seed_for = |id: InequalityId| derive_seed(spec.budget.seed, cell.index * 16 + id as u64);
    let budget_for = |id: InequalityId| spec.budget.with_seed(seed_for(id));
    let exact = exact_fits(a.as_slice(), &spec.budget);
    let first = if exact { Some(exact_moments(a.as_slice(), ps, d, &spec.budget)?) } else { None };
    let mut out = Vec::new();
    for &id in &spec.ids {
        match id {
            InequalityId::ThmMain | InequalityId::Lpl2Homogeneous => {
                let scale = if id == InequalityId::ThmMain { 1.0 } else { LPL2_SCALE };
                let scaled = CoeffVector::new(a.as_slice().iter().map(|x| x * scale).collect())?;
                match &first {
                    Some(first) => {
                        for (&p, f) in ps.iter().zip(first) {
                            let first = f.scaled(scale.powf(p));
                            let second = gaussian_side(scaled.as_slice(), p, d)?;
                            let pair = Pair { first, second, gap: second.minus(&first) };
                            out.push(if id == InequalityId::ThmMain {
                                main_record(p, d, a, &pair)?
                            } else {
                                lpl2_record(p, d, &scaled, &pair)
                            });
                        }
                    }
                    None if id == InequalityId::ThmMain => {
                        out.extend(verify_theorem_main_multi(ps, d, a, &budget_for(id))?)
                    }
                    None => out.extend(verify_homogeneous_lpl2_multi(ps, d, &scaled, &budget_for(id))?),
                }
            }
            InequalityId::ThmDiag if n >= 2 => match (&first, diag.get(&(n, d))) {
                (Some(first), Some(second)) => {
                    for ((&p, f), s) in ps.iter().zip(first).zip(second) {
                        let pair = Pair { first: *f, second: *s, gap: s.minus(f) };
                        out.push(diag_record(p, d, a, &pair)?);
                    }
                }
                _ => out.extend(verify_theorem_diag_multi(ps, d, a, &budget_for(id))?),
            },
            InequalityId::SchurTtransform if n >= 2 => {
                let x: Vec<f64> = a.as_slice().iter().map(|v| v * v).collect();
                let s = seed_for(id);
                let i = (s % n as u64) as usize;
                let j = (i + 1 + ((s >> 16) % (n as u64 - 1)) as usize) % n;
                let lambda = ((s >> 32) as f64) / (u32::MAX as f64);
                let y = t_transform(&x, i, j, lambda)?;
                out.extend(schur_ttransform_checks(ps, d, &x, &y, &budget_for(id))?);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Runs every requested check over the grid. Records come out in grid order
/// (remark scaling first, then `d`, `n`, vector), independent of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<VerificationRecord>> {
    spec.validate()?;
    let mut records = Vec::new();
    if spec.ids.contains(&InequalityId::RemarkScaling) {
        for &p in &spec.ps {
            records.extend(verify_remark_scaling(p, &spec.ds)?);
        }
    }
    let vector_ids: Vec<InequalityId> = spec.ids.iter().copied().filter(|id| *id != InequalityId::RemarkScaling).collect();
    if vector_ids.is_empty() {
        return Ok(records);
    }

    let mut cells = Vec::new();
    for &d in &spec.ds {
        for &n in &spec.ns {
            for vector in sweep_vectors(n, spec.vectors_per_cell, derive_seed(spec.budget.seed, n as u64))? {
                cells.push(Cell { d, vector, index: cells.len() as u64 });
            }
        }
    }

    let diag_keys: Vec<(usize, usize)> = if spec.ids.contains(&InequalityId::ThmDiag) {
        spec.ds
            .iter()
            .flat_map(|&d| spec.ns.iter().map(move |&n| (n, d)))
            .filter(|&(n, _)| n >= 2 && n <= spec.budget.exact_cap)
            .collect()
    } else {
        Vec::new()
    };
    let diag: HashMap<(usize, usize), Vec<Estimate>> = diag_keys
        .par_iter()
        .map(|&(n, d)| {
            let a = CoeffVector::diagonal(n)?;
            Ok(((n, d), exact_moments(a.as_slice(), &spec.ps, d, &spec.budget)?))
        })
        .collect::<Result<_>>()?;

    let spec = SweepSpec { ids: vector_ids, ..spec.clone() };
    let per_cell: Vec<Vec<VerificationRecord>> =
        cells.par_iter().map(|cell| run_cell(&spec, cell, &diag)).collect::<Result<_>>()?;
    records.extend(per_cell.into_iter().flatten());
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::Verdict;

    #[test]
    fn vectors_are_unit_and_reproducible() {
        let v = sweep_vectors(4, 6, 3).unwrap();
        assert_eq!(v.len(), 8);
        assert!(v.iter().all(|s| s.a.is_unit(1e-12) && s.a.as_slice().iter().all(|x| *x >= 0.0)));
        assert_eq!(v, sweep_vectors(4, 6, 3).unwrap());
        assert!(v.iter().filter(|s| s.kind == VectorKind::Spiked).all(|s| s.a.sup_norm().powi(2) >= 0.55 - 1e-12));
        assert_eq!(sweep_vectors(1, 6, 3).unwrap().len(), 1);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(derive_seed(0, 0), derive_seed(0, 1));
        assert_ne!(derive_seed(0, 5), derive_seed(1, 5));
    }

    #[test]
    fn small_sweep_passes_and_is_deterministic() {
        let spec = SweepSpec {
            ids: vec![InequalityId::ThmMain, InequalityId::ThmDiag, InequalityId::SchurTtransform, InequalityId::RemarkScaling],
            ps: vec![2.0, 3.0, 6.0],
            ds: vec![3],
            ns: vec![1, 2, 6],
            vectors_per_cell: 2,
            budget: Budget { samples: 20_000, ..Budget::default() },
        };
        let a = run_sweep(&spec).unwrap();
        assert!(a.iter().all(|r| r.verdict != Verdict::Fail), "{:?}", a.iter().find(|r| r.verdict == Verdict::Fail));
        assert_eq!(a, run_sweep(&spec).unwrap());
        // 3 remark + ThmMain 1·3 + (2 cells of 4 vectors)·3 ids·3 p
        assert_eq!(a.len(), 3 + 3 + 2 * 4 * 3 * 3);
    }

    #[test]
    fn rejects_bad_grids() {
        let bad = SweepSpec { ps: vec![1.5], ..SweepSpec::default() };
        assert!(run_sweep(&bad).is_err());
        let bad = SweepSpec { ids: vec![InequalityId::Lemma2Bound], ..SweepSpec::default() };
        assert!(bad.validate().is_err());
    }
}
