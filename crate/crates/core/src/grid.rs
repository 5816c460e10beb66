//! Uniform trait-axis discretization, trapezoid quadrature and CDF/quantile
//! machinery shared by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of grid nodes.
pub const MIN_POINTS: usize = 16;

/// Values below `-NEG_TOL` are a hard error when building a [`Density`].
pub const NEG_TOL: f64 = 1e-12;

/// Uniform 1D grid `x_i = x_min + i * spacing`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    spacing: f64,
}

impl TraitGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min < x_max) || n_points < MIN_POINTS || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidBounds {
                x_min,
                x_max,
                n_points,
            });
        }
        Ok(TraitGrid {
            x_min,
            x_max,
            n_points,
            spacing: (x_max - x_min) / (n_points - 1) as f64,
        })
    }

    /// Builds a grid without the `n_points >= 16` floor. Only used for the
    /// tiny hand-checkable grids of unit tests.
    pub(crate) fn new_unchecked(x_min: f64, x_max: f64, n_points: usize) -> Self {
        assert!(x_min < x_max && n_points >= 2);
        TraitGrid {
            x_min,
            x_max,
            n_points,
            spacing: (x_max - x_min) / (n_points - 1) as f64,
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Trapezoid weight of node `i` (spacing included).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    /// Composite trapezoid rule for arbitrary node values.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.spacing * (inner + 0.5 * (values[0] + values[n - 1]))
    }

    /// Trapezoid integral of `f(x_i) * values[i]`.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, values: &[f64], f: F) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let inner: f64 = (1..n - 1).map(|i| f(self.node(i)) * values[i]).sum();
        self.spacing
            * (inner + 0.5 * (f(self.node(0)) * values[0] + f(self.node(n - 1)) * values[n - 1]))
    }

    /// Trapezoid integral of `a[i] * b[i]`.
    pub fn integrate_with_values(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.n_points);
        debug_assert_eq!(b.len(), self.n_points);
        let n = a.len();
        let inner: f64 = (1..n - 1).map(|i| a[i] * b[i]).sum();
        self.spacing * (inner + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Grid equality up to floating-point noise in the bounds.
    pub fn same_as(&self, other: &TraitGrid) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.spacing
            && (self.x_max - other.x_max).abs() <= 1e-12 * self.spacing
    }
}

pub fn make_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<TraitGrid> {
    TraitGrid::new(x_min, x_max, n_points)
}

/// Nonnegative grid function (a population density `n` or a probability
/// density `q`) with its trapezoid mass cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: TraitGrid,
    values: Vec<f64>,
    mass: f64,
}

impl Density {
    pub fn new(grid: TraitGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= -NEG_TOL))
        {
            return Err(Error::Negative { index, value });
        }
        let mass = grid.trapezoid(&values);
        Ok(Density { grid, values, mass })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: TraitGrid, f: F) -> Result<Self> {
        Density::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: TraitGrid) -> Self {
        Density {
            grid,
            values: vec![0.0; grid.n_points()],
            mass: 0.0,
        }
    }

    pub fn grid(&self) -> &TraitGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> Result<Density> {
        Density::new(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.mass - 1.0).abs() <= tol
    }

    pub(crate) fn require_normalized(&self, tol: f64) -> Result<()> {
        if self.is_normalized(tol) {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.mass))
        }
    }

    /// Sup-norm distance between two densities on the same grid.
    pub fn sup_distance(&self, other: &Density) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub fn integrate(d: &Density) -> f64 {
    d.mass()
}

pub fn normalize(d: &Density) -> Result<Density> {
    let mass = d.mass();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass(mass));
    }
    let values: Vec<f64> = d.values().iter().map(|v| v / mass).collect();
    Density::new(*d.grid(), values)
}

/// Tolerance on `|mass - 1|` accepted by CDF/quantile construction.
pub const NORMALIZED_TOL: f64 = 1e-8;

/// Default resolution of the shared probability grid.
pub const DEFAULT_PROB_POINTS: usize = 4096;

/// Probability clip used to keep the generalized inverse bounded on a
/// truncated domain.
pub const DEFAULT_PROB_CLIP: f64 = 1e-6;

/// Uniform probability grid on `[clip, 1 - clip]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityGrid {
    pub n_points: usize,
    pub clip: f64,
}

impl Default for ProbabilityGrid {
    fn default() -> Self {
        ProbabilityGrid {
            n_points: DEFAULT_PROB_POINTS,
            clip: DEFAULT_PROB_CLIP,
        }
    }
}

impl ProbabilityGrid {
    pub fn step(&self) -> f64 {
        (1.0 - 2.0 * self.clip) / (self.n_points - 1) as f64
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.clip + i as f64 * self.step()
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.prob(i))
    }
}

/// Cumulative distribution sampled at the trait nodes.
#[derive(Debug, Clone)]
pub struct Cdf {
    grid: TraitGrid,
    values: Vec<f64>,
}

impl Cdf {
    /// Cumulative trapezoid of a normalized density.
    pub fn of(d: &Density) -> Result<Cdf> {
        d.require_normalized(NORMALIZED_TOL)?;
        let grid = *d.grid();
        let h = grid.spacing();
        let v = d.values();
        let mut values = Vec::with_capacity(v.len());
        let mut acc = 0.0;
        values.push(0.0);
        for i in 1..v.len() {
            acc += 0.5 * h * (v[i - 1].max(0.0) + v[i].max(0.0));
            values.push(acc);
        }
        // Rescale the last value to exactly one; the drift is bounded by
        // NORMALIZED_TOL and keeps the quantile well defined at p -> 1.
        let total = acc;
        if total > 0.0 {
            for c in values.iter_mut() {
                *c /= total;
            }
        }
        Ok(Cdf { grid, values })
    }

    pub fn grid(&self) -> &TraitGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear CDF evaluated anywhere on the grid.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.grid.x_min() {
            return 0.0;
        }
        if x >= self.grid.x_max() {
            return 1.0;
        }
        let s = (x - self.grid.x_min()) / self.grid.spacing();
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let frac = s - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Generalized inverse `inf { x : F(x) >= p }` of the piecewise-linear CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let v = &self.values;
        if p <= 0.0 {
            // first node where mass starts
            let i = v.iter().position(|&c| c > 0.0).unwrap_or(1);
            return self.grid.node(i.saturating_sub(1));
        }
        if p >= 1.0 {
            let i = v.iter().position(|&c| c >= 1.0).unwrap_or(v.len() - 1);
            return self.grid.node(i);
        }
        // first index with v[i] >= p
        let i = v.partition_point(|&c| c < p);
        if i == 0 {
            return self.grid.x_min();
        }
        if i >= v.len() {
            return self.grid.x_max();
        }
        let (c0, c1) = (v[i - 1], v[i]);
        let frac = if c1 > c0 { (p - c0) / (c1 - c0) } else { 1.0 };
        self.grid.node(i - 1) + frac * self.grid.spacing()
    }

    pub fn quantiles(&self, probs: &ProbabilityGrid) -> Quantile {
        Quantile {
            probs: *probs,
            values: probs.probs().map(|p| self.quantile(p)).collect(),
        }
    }
}

/// Quantile function sampled on a [`ProbabilityGrid`].
#[derive(Debug, Clone)]
pub struct Quantile {
    pub probs: ProbabilityGrid,
    pub values: Vec<f64>,
}

pub fn cdf_and_quantile(d: &Density, probs: &ProbabilityGrid) -> Result<(Cdf, Quantile)> {
    let cdf = Cdf::of(d)?;
    let q = cdf.quantiles(probs);
    Ok((cdf, q))
}
