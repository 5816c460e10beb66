//! Seeded random densities for property sweeps: finite mixtures of Gaussian
//! bumps placed in the middle half of the grid.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{normalize, Density, TraitGrid};

pub const DEFAULT_SEED: u64 = 0x5eed_1a7e;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpMixture {
    pub weights: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl BumpMixture {
    /// Between one and four bumps on the whole grid; see [`Self::random_within`].
    pub fn random<R: Rng + ?Sized>(grid: &TraitGrid, rng: &mut R) -> Self {
        Self::random_within(grid, grid.x_min(), grid.x_max(), rng)
    }

    /// Between one and four bumps inside `[lo, hi]`. Widths lie in
    /// `[0.01, 0.03] (hi - lo)` and never below eight grid spacings; centers
    /// keep eight widths away from `lo` and `hi` when the interval allows it.
    pub fn random_within<R: Rng + ?Sized>(grid: &TraitGrid, lo: f64, hi: f64, rng: &mut R) -> Self {
        let len = hi - lo;
        let mid = 0.5 * (lo + hi);
        let n = rng.random_range(1..=4);
        let lo_w = (0.01 * len).max(8.0 * grid.spacing());
        let hi_w = (0.03 * len).max(lo_w * 1.5);
        let spread = (0.5 * len - 8.0 * hi_w).max(0.05 * len);
        let mut mix = BumpMixture {
            weights: Vec::with_capacity(n),
            centers: Vec::with_capacity(n),
            widths: Vec::with_capacity(n),
        };
        for _ in 0..n {
            mix.weights.push(rng.random_range(0.2..1.0));
            mix.centers.push(mid + rng.random_range(-spread..spread));
            mix.widths.push(rng.random_range(lo_w..hi_w));
        }
        let total: f64 = mix.weights.iter().sum();
        mix.weights.iter_mut().for_each(|w| *w /= total);
        mix
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.centers).map(|(w, c)| w * c).sum()
    }

    pub fn shifted(&self, by: f64) -> Self {
        BumpMixture {
            centers: self.centers.iter().map(|c| c + by).collect(),
            ..self.clone()
        }
    }

    /// Every bump lies at least `sds` widths inside `[lo, hi]`.
    pub fn fits(&self, lo: f64, hi: f64, sds: f64) -> bool {
        self.centers
            .iter()
            .zip(&self.widths)
            .all(|(c, w)| c - sds * w >= lo && c + sds * w <= hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .zip(&self.widths)
            .map(|((w, c), s)| w * (-(x - c).powi(2) / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s))
            .sum()
    }

    /// Sampled on `grid` and renormalized to discrete mass 1.
    pub fn density(&self, grid: &TraitGrid) -> Result<Density> {
        normalize(&Density::from_fn(*grid, |x| self.eval(x))?)
    }
}

pub fn random_density<R: Rng + ?Sized>(grid: &TraitGrid, rng: &mut R) -> Result<Density> {
    BumpMixture::random(grid, rng).density(grid)
}

/// Two independent mixtures inside `[lo, hi]`, the second translated onto
/// the mean of the first. Draws of the second that would then leave
/// `[lo, hi]` are repeated.
pub fn random_mean_matched_pair<R: Rng + ?Sized>(
    grid: &TraitGrid,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<(Density, Density)> {
    let a = BumpMixture::random_within(grid, lo, hi, rng);
    for _ in 0..1000 {
        let b = BumpMixture::random_within(grid, lo, hi, rng);
        let b = b.shifted(a.mean() - b.mean());
        if b.fits(lo, hi, 8.0) {
            return Ok((a.density(grid)?, b.density(grid)?));
        }
    }
    Err(Error::Precondition("interval too narrow for mean-matched random pairs".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn reproducible_and_normalized() {
        let g = make_grid(-2.0, 2.0, 512).unwrap();
        let a = random_density(&g, &mut seeded_rng(7)).unwrap();
        let b = random_density(&g, &mut seeded_rng(7)).unwrap();
        assert_eq!(a, b);
        assert!((a.mass() - 1.0).abs() < 1e-12);
        assert!(a.min_value() >= 0.0);
    }

    #[test]
    fn pair_means_match() {
        let g = make_grid(-2.0, 2.0, 1024).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..20 {
            let (a, b) = random_mean_matched_pair(&g, -1.0, 1.0, &mut rng).unwrap();
            let ma = g.integrate_with(a.values(), |x| x);
            let mb = g.integrate_with(b.values(), |x| x);
            assert!((ma - mb).abs() < 1e-10, "{ma} {mb}");
        }
    }
}
