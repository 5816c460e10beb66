//! One-dimensional Wasserstein distances.

use crate::error::{Error, Result};
use crate::grid::{Cdf, Density, ProbabilityGrid};
use crate::operators::MixingOperator;

/// Slack of the contraction test.
pub const CONTRACTION_TOL: f64 = 1e-6;

fn same_grid(a: &Density, b: &Density) -> Result<()> {
    if a.grid().same_as(b.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `W1(a, b) = ∫ |F_a - F_b| dx`.
pub fn wasserstein1(a: &Density, b: &Density) -> Result<f64> {
    same_grid(a, b)?;
    let fa = Cdf::of(a)?;
    let fb = Cdf::of(b)?;
    let diff: Vec<f64> = fa.values().iter().zip(fb.values()).map(|(x, y)| (x - y).abs()).collect();
    Ok(a.grid().trapezoid(&diff))
}

pub fn wasserstein2_with(a: &Density, b: &Density, probs: &ProbabilityGrid) -> Result<f64> {
    same_grid(a, b)?;
    let qa = Cdf::of(a)?.quantiles(probs);
    let qb = Cdf::of(b)?.quantiles(probs);
    let sq: Vec<f64> = qa.values.iter().zip(&qb.values).map(|(x, y)| (x - y).powi(2)).collect();
    let n = sq.len();
    let h = probs.step();
    let integral = h * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[n - 1]));
    Ok(integral.max(0.0).sqrt())
}

/// `W2(a, b) = (∫_0^1 |Q_a - Q_b|² dp)^{1/2}` on the default probability grid.
pub fn wasserstein2(a: &Density, b: &Density) -> Result<f64> {
    wasserstein2_with(a, b, &ProbabilityGrid::default())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `W2(T̃a, T̃b) <= W2(a, b) / √2`.
pub fn contraction_check(a: &Density, b: &Density, op: &MixingOperator) -> Result<Contraction> {
    same_grid(a, b)?;
    let ta = op.apply(a)?;
    let tb = op.apply(b)?;
    let lhs = wasserstein2(&ta, &tb)?;
    let rhs = wasserstein2(a, b)? / 2f64.sqrt();
    Ok(Contraction {
        lhs,
        rhs,
        pass: lhs <= rhs + CONTRACTION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, normalize, TraitGrid};
    use crate::limit::gaussian_profile;
    use crate::operators::SegregationKernel;

    fn gauss(grid: TraitGrid, mu: f64, sd: f64) -> Density {
        normalize(&Density::from_fn(grid, |x| (-(x - mu).powi(2) / (2.0 * sd * sd)).exp()).unwrap()).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let grid = make_grid(-3.0, 3.0, 512).unwrap();
        let a = gauss(grid, 0.1, 0.3);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn translation() {
        let grid = make_grid(-4.0, 4.0, 801).unwrap();
        let h = 20.0 * grid.spacing();
        let a = gauss(grid, -0.2, 0.3);
        let b = gauss(grid, -0.2 + h, 0.3);
        assert!((wasserstein1(&a, &b).unwrap() - h).abs() < 1e-8);
        assert!((wasserstein2(&a, &b).unwrap() - h).abs() < 1e-6);
    }

    #[test]
    fn narrow_bumps() {
        let grid = make_grid(-1.0, 1.0, 1001).unwrap();
        let a = gauss(grid, 0.2, 0.005);
        let b = gauss(grid, -0.5, 0.005);
        assert!((wasserstein1(&a, &b).unwrap() - 0.7).abs() < 2.0 * grid.spacing());
    }

    #[test]
    fn gaussian_scales() {
        let grid = make_grid(-4.0, 4.0, 2048).unwrap();
        let a = gauss(grid, 0.0, 0.5);
        let b = gauss(grid, 0.0, 0.4);
        assert!((wasserstein2(&a, &b).unwrap() - 0.1).abs() < 1e-4);
    }

    #[test]
    fn mismatch_and_unnormalized() {
        let g1 = make_grid(-1.0, 1.0, 64).unwrap();
        let g2 = make_grid(-1.0, 1.0, 65).unwrap();
        let a = gauss(g1, 0.0, 0.2);
        assert!(matches!(wasserstein1(&a, &gauss(g2, 0.0, 0.2)), Err(Error::GridMismatch)));
        let un = a.scaled(3.0).unwrap();
        assert!(matches!(wasserstein2(&a, &un), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn contraction_cases() {
        let grid = make_grid(-3.0, 3.0, 1024).unwrap();
        let eps = 0.2;
        let op = MixingOperator::new(grid, SegregationKernel::new(eps));
        let a = gauss(grid, 0.0, 0.4);
        let same = contraction_check(&a, &a, &op).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert!(same.pass);
        // equal means: strict contraction
        let b = gauss(grid, 0.0, 0.25);
        let c = contraction_check(&a, &b, &op).unwrap();
        assert!(c.pass && c.lhs < c.rhs);
        // a pure translation is transported unchanged by T̃, so W2 is not halved
        let g0 = gaussian_profile(0.0, eps, &grid).unwrap();
        let h = 40.0 * grid.spacing();
        let gh = gaussian_profile(h, eps, &grid).unwrap();
        let t = contraction_check(&g0, &gh, &op).unwrap();
        assert!((t.lhs - h).abs() < 1e-6);
        assert!((t.rhs - h / 2f64.sqrt()).abs() < 1e-6);
        assert!(!t.pass);
    }
}
