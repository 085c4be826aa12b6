//! Expectations of `|v + Σ a_j X_j|^p` and of the one-summand functions used
//! in the deficit analysis.

mod derivatives;
mod exact;
mod gaussian;
mod mc;
mod single;

pub use derivatives::{ball_average, g_prime, g_second_derivative};
pub use exact::{sum_moment_exact, sum_moments_exact, ExactOptions, DEFAULT_EXACT_CAP};
pub use gaussian::shifted_gaussian_moment;
pub use mc::{sum_moment_mc, MomentAccumulator};
pub(crate) use mc::sharded;
pub use single::shifted_single_moment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NestedQuadrature,
    Mc,
    ClosedForm,
}

/// A value with the method that produced it and an error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    /// Standard error for Monte Carlo, truncation estimate for quadrature.
    pub err: f64,
    pub samples_or_nodes: u64,
}

impl Estimate {
    pub fn closed_form(value: f64) -> Self {
        Self { value, method: Method::ClosedForm, err: 0.0, samples_or_nodes: 0 }
    }

    pub fn quadrature(value: f64, err: f64, nodes: u64) -> Self {
        Self { value, method: Method::NestedQuadrature, err: err.abs(), samples_or_nodes: nodes }
    }

    pub fn mc(value: f64, err: f64, samples: u64) -> Self {
        Self { value, method: Method::Mc, err: err.abs(), samples_or_nodes: samples }
    }

    pub fn is_stochastic(&self) -> bool {
        self.method == Method::Mc
    }

    /// Difference of two independent estimates. Standard errors add in
    /// quadrature, truncation bounds add linearly.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        let method = match (self.method, other.method) {
            (Method::Mc, _) | (_, Method::Mc) => Method::Mc,
            (Method::ClosedForm, Method::ClosedForm) => Method::ClosedForm,
            _ => Method::NestedQuadrature,
        };
        let err = if method == Method::Mc {
            self.err.hypot(other.err)
        } else {
            self.err + other.err
        };
        Estimate {
            value: self.value - other.value,
            method,
            err,
            samples_or_nodes: self.samples_or_nodes.max(other.samples_or_nodes),
        }
    }

    pub fn scaled(&self, factor: f64) -> Estimate {
        Estimate { value: self.value * factor, err: self.err * factor.abs(), ..*self }
    }
}

/// Coefficient vector with its ℓ₄ data cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoeffVector {
    a: Vec<f64>,
    norm_sq: f64,
    l4_pow4: f64,
}

impl CoeffVector {
    /// Takes the coefficients as given; no normalization.
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Precondition("coefficient vector must be nonempty".into()));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("coefficients must be finite".into()));
        }
        let norm_sq = a.iter().map(|x| x * x).sum();
        let l4_pow4 = a.iter().map(|x| x.powi(4)).sum();
        Ok(Self { a, norm_sq, l4_pow4 })
    }

    /// Rescales to unit ℓ₂ norm.
    pub fn normalized(a: Vec<f64>) -> Result<Self> {
        let raw = Self::new(a)?;
        if raw.norm_sq == 0.0 {
            return Err(Error::Precondition("cannot normalize the zero vector".into()));
        }
        let s = raw.norm_sq.sqrt();
        Self::new(raw.a.into_iter().map(|x| x / s).collect())
    }

    /// `(1/√n, …, 1/√n)`.
    pub fn diagonal(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("diagonal vector needs n >= 1".into()));
        }
        Self::new(vec![1.0 / (n as f64).sqrt(); n])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `Σ a_j⁴`.
    pub fn l4_pow4(&self) -> f64 {
        self.l4_pow4
    }

    pub fn sup_norm(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `Σ (1/n − a_j²)²`, which equals `‖a‖₄⁴ − 1/n` for unit vectors.
    pub fn diagonal_deficit(&self) -> f64 {
        let inv = 1.0 / self.a.len() as f64;
        self.a.iter().map(|x| (inv - x * x).powi(2)).sum()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm_sq - 1.0).abs() <= tol
    }
}

impl TryFrom<Vec<f64>> for CoeffVector {
    type Error = Error;

    fn try_from(a: Vec<f64>) -> Result<Self> {
        Self::new(a)
    }
}

impl From<CoeffVector> for Vec<f64> {
    fn from(c: CoeffVector) -> Self {
        c.a
    }
}

/// Law of one summand direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Sphere,
    Gaussian,
}

/// `E|v + Σ a_j X_j|^p` with `X_j` following `mix[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub d: usize,
    pub p: f64,
    pub a: CoeffVector,
    pub shift: f64,
    pub mix: Vec<Law>,
}

impl MomentQuery {
    /// All summands uniform on the sphere.
    pub fn new(d: usize, p: f64, a: CoeffVector, shift: f64) -> Result<Self> {
        let mix = vec![Law::Sphere; a.len()];
        Self::with_mix(d, p, a, shift, mix)
    }

    pub fn with_mix(d: usize, p: f64, a: CoeffVector, shift: f64, mix: Vec<Law>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidExponent { value: p, reason: "moment exponent must be >= 0" });
        }
        if !(shift >= 0.0) || !shift.is_finite() {
            return Err(Error::Precondition(format!("shift must be a finite magnitude, got {shift}")));
        }
        if mix.len() != a.len() {
            return Err(Error::Precondition(format!(
                "{} law tags for {} coefficients",
                mix.len(),
                a.len()
            )));
        }
        Ok(Self { d, p, a, shift, mix })
    }

    pub fn all_sphere(&self) -> bool {
        self.mix.iter().all(|&l| l == Law::Sphere)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coeff_vector_cached_data() {
        let c = CoeffVector::normalized(vec![3.0, 4.0]).unwrap();
        assert!((c.norm_sq() - 1.0).abs() < 1e-15);
        let want = 0.6f64.powi(4) + 0.8f64.powi(4);
        assert!((c.l4_pow4() - want).abs() < 1e-15);
        assert!((c.diagonal_deficit() - (want - 0.5)).abs() < 1e-15);
        assert_eq!(CoeffVector::diagonal(4).unwrap().diagonal_deficit(), 0.0);
        assert!(CoeffVector::normalized(vec![0.0, 0.0]).is_err());
        assert!(CoeffVector::new(vec![]).is_err());
    }

    #[test]
    fn coeff_vector_serializes_as_list() {
        let c = CoeffVector::new(vec![0.5, -0.25]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "[0.5,-0.25]");
        let back: CoeffVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn query_validation() {
        let a = CoeffVector::diagonal(2).unwrap();
        assert!(MomentQuery::new(1, 2.0, a.clone(), 0.0).is_err());
        assert!(MomentQuery::new(3, -1.0, a.clone(), 0.0).is_err());
        assert!(MomentQuery::new(3, 2.0, a.clone(), -0.5).is_err());
        assert!(MomentQuery::with_mix(3, 2.0, a.clone(), 0.0, vec![Law::Sphere]).is_err());
        assert!(MomentQuery::new(3, 2.0, a, 1.0).unwrap().all_sphere());
    }

    #[test]
    fn estimate_difference_combines_errors() {
        let a = Estimate::mc(1.0, 0.3, 10);
        let b = Estimate::mc(0.5, 0.4, 10);
        let c = a.minus(&b);
        assert!((c.err - 0.5).abs() < 1e-15 && c.method == Method::Mc);
        let q = Estimate::quadrature(2.0, 1e-9, 4).minus(&Estimate::closed_form(1.0));
        assert_eq!(q.method, Method::NestedQuadrature);
        assert_eq!(q.err, 1e-9);
    }
}
