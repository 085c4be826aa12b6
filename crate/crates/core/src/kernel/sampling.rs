//! Seeded random streams and the samplers built on them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RngStream = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with independent standard normals.
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out {
        *x = StandardNormal.sample(rng);
    }
}

/// Uniform point on the unit sphere of `R^out.len()`, written into `out`.
pub fn fill_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        fill_normal(rng, out);
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

pub fn sample_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut v = vec![0.0; d];
    fill_sphere(rng, &mut v);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialKind {
    /// Constant radius one.
    SphereRadius,
    /// `|Z|` for `Z ~ N(0, I_d/d)`.
    GaussianRadius,
    /// Radius of a uniform point in the unit ball, `U^{1/d}`.
    BallRadius,
    /// `R₁R₂` with `R₁ = U^{1/d}`, `R₂ = U'^{1/(d+2)}`.
    #[serde(rename = "r1r2-product")]
    R1R2Product,
}

/// A radial law with its sampler prepared.
#[derive(Debug, Clone)]
pub struct RadialLaw {
    kind: RadialKind,
    d: usize,
    chi: Gamma<f64>,
}

impl RadialLaw {
    pub fn new(kind: RadialKind, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let chi = Gamma::new(d as f64 / 2.0, 2.0).expect("positive shape and scale");
        Ok(Self { kind, d, chi })
    }

    pub fn kind(&self) -> RadialKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

pub fn sample_radial<R: Rng + ?Sized>(law: &RadialLaw, rng: &mut R) -> f64 {
    let d = law.d as f64;
    match law.kind {
        RadialKind::SphereRadius => 1.0,
        RadialKind::GaussianRadius => (law.chi.sample(rng) / d).sqrt(),
        RadialKind::BallRadius => open_unit(rng).powf(1.0 / d),
        RadialKind::R1R2Product => {
            open_unit(rng).powf(1.0 / d) * open_unit(rng).powf(1.0 / (d + 2.0))
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_err(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn sphere_points_are_unit_and_isotropic() {
        let d = 4;
        let mut rng = rng_stream(11, 0);
        let mut first_sq = Vec::new();
        let mut first = Vec::new();
        for _ in 0..200_000 {
            let v = sample_sphere(d, &mut rng).unwrap();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            first_sq.push(v[0] * v[0]);
            first.push(v[0]);
        }
        let (m, e) = mean_and_err(&first_sq);
        assert!((m - 0.25).abs() < 4.0 * e);
        let (m, e) = mean_and_err(&first);
        assert!(m.abs() < 4.0 * e);
        assert!(sample_sphere(1, &mut rng).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..4).map(|_| rng_stream(5, 1).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: f64 = rng_stream(5, 1).random();
        let y: f64 = rng_stream(5, 2).random();
        assert_ne!(x, y);
    }

    #[test]
    fn gaussian_radius_moments() {
        let d = 3;
        let law = RadialLaw::new(RadialKind::GaussianRadius, d).unwrap();
        let mut rng = rng_stream(3, 0);
        let r2: Vec<f64> = (0..400_000).map(|_| sample_radial(&law, &mut rng).powi(2)).collect();
        let (m, e) = mean_and_err(&r2);
        assert!((m - 1.0).abs() < 4.0 * e);
        let dev: Vec<f64> = r2.iter().map(|x| (x - 1.0).powi(2)).collect();
        let (m, e) = mean_and_err(&dev);
        assert!((m - 2.0 / d as f64).abs() < 4.0 * e);
    }

    #[test]
    fn product_radius_moment_matches_closed_form() {
        let d = 2;
        let law = RadialLaw::new(RadialKind::R1R2Product, d).unwrap();
        let mut rng = rng_stream(9, 4);
        let xs: Vec<f64> = (0..400_000).map(|_| sample_radial(&law, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m, e) = mean_and_err(&sq);
        assert!((m - 1.0 / 3.0).abs() < 4.0 * e);
    }

    #[test]
    fn ball_radius_second_moment() {
        let d = 5;
        let law = RadialLaw::new(RadialKind::BallRadius, d).unwrap();
        let mut rng = rng_stream(2, 2);
        let sq: Vec<f64> = (0..200_000).map(|_| sample_radial(&law, &mut rng).powi(2)).collect();
        let (m, e) = mean_and_err(&sq);
        assert!((m - 5.0 / 7.0).abs() < 4.0 * e);
    }
}
