//! Verification campaigns for the moment inequalities: per-vector checks,
//! majorization and diagonalization walks, sweeps and the tightness probe.

mod eval;
mod schur;
mod sweep;
mod theorems;
mod tightness;

pub use schur::{
    diagonalization_walk, majorize_step, majorizes, schur_ttransform_check, schur_ttransform_checks,
    t_transform, DiagonalWalk, MajorizeStep,
};
pub use sweep::{derive_seed, run_sweep, sweep_vectors, SweepSpec, SweepVector, VectorKind};
pub use theorems::{
    verify_homogeneous_lpl2, verify_homogeneous_lpl2_multi, verify_khinchin_lower, verify_lemma2,
    verify_lemma4, verify_remark_scaling, verify_theorem_diag, verify_theorem_diag_multi,
    verify_theorem_main, verify_theorem_main_multi,
};
pub use tightness::{tightness_search, TightnessReport};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::moments::{Estimate, DEFAULT_EXACT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityId {
    ThmMain,
    ThmDiag,
    Lpl2Homogeneous,
    Lemma2Bound,
    Lemma4Bound,
    RemarkScaling,
    SchurTtransform,
    KhinchinLower,
}

impl InequalityId {
    pub const ALL: [InequalityId; 8] = [
        InequalityId::ThmMain,
        InequalityId::ThmDiag,
        InequalityId::Lpl2Homogeneous,
        InequalityId::Lemma2Bound,
        InequalityId::Lemma4Bound,
        InequalityId::RemarkScaling,
        InequalityId::SchurTtransform,
        InequalityId::KhinchinLower,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::ThmMain => "thm-main",
            InequalityId::ThmDiag => "thm-diag",
            InequalityId::Lpl2Homogeneous => "lpl2-homogeneous",
            InequalityId::Lemma2Bound => "lemma2-bound",
            InequalityId::Lemma4Bound => "lemma4-bound",
            InequalityId::RemarkScaling => "remark-scaling",
            InequalityId::SchurTtransform => "schur-ttransform",
            InequalityId::KhinchinLower => "khinchin-lower",
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        InequalityId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown inequality id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Inputs of one check; absent fields do not apply.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Second vector of a comparison (T-transform image, walk successor).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
}

impl Params {
    pub fn new(p: f64, d: usize) -> Self {
        Self { p, d, ..Default::default() }
    }

    pub fn with_a(mut self, a: &[f64]) -> Self {
        self.n = Some(a.len());
        self.a = Some(a.to_vec());
        self
    }

    pub fn with_b(mut self, b: &[f64]) -> Self {
        self.b = Some(b.to_vec());
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = Some(shift);
        self
    }
}

/// Outcome of checking `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub id: InequalityId,
    pub params: Params,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Margin over its standard error; `None` on deterministic paths, where it is infinite.
    pub sigma_margin: Option<f64>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

pub const PASS_SIGMA: f64 = -4.0;
pub const FAIL_SIGMA: f64 = -6.0;
const DETERMINISTIC_ABS: f64 = 1e-8;
const DETERMINISTIC_REL: f64 = 1e-6;

/// Allowed shortfall of a deterministic margin.
pub fn deterministic_slack(scale: f64, err: f64) -> f64 {
    DETERMINISTIC_ABS.max(DETERMINISTIC_REL * scale.abs()) + err
}

impl VerificationRecord {
    /// Judges `margin = rhs − lhs`; `margin` carries the error of the
    /// difference, which under common random numbers is smaller than the
    /// errors of the two sides combined.
    pub fn judge(id: InequalityId, params: Params, lhs: Estimate, rhs: Estimate, margin: Estimate) -> Self {
        let (sigma_margin, verdict) = if margin.is_stochastic() && margin.err > 0.0 {
            let z = margin.value / margin.err;
            let verdict = if z >= PASS_SIGMA {
                Verdict::Pass
            } else if z <= FAIL_SIGMA {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            };
            (Some(z), verdict)
        } else {
            let scale = lhs.value.abs().max(rhs.value.abs());
            let ok = margin.value >= -deterministic_slack(scale, margin.err);
            (None, if ok { Verdict::Pass } else { Verdict::Fail })
        };
        Self {
            id,
            params,
            lhs,
            rhs,
            margin: margin.value,
            sigma_margin,
            verdict,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }
}

/// Evaluation budget shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Monte Carlo samples for a first attempt.
    pub samples: u64,
    /// Largest number of nonzero summands handled by exact quadrature.
    pub exact_cap: usize,
    pub nodes: Option<usize>,
    /// Inconclusive stochastic checks are rerun with 4× samples this many times.
    pub retries: u32,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { samples: 1_000_000, exact_cap: DEFAULT_EXACT_CAP, nodes: None, retries: 2, seed: 0 }
    }
}

impl Budget {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}
