//! Reproduction operators.
//!
//! * [`SegregationKernel`]: `Γ_ε(x) = exp(-x²/ε²) / (ε √π)`, the offspring
//!   deviation from the midparent (variance `ε²/2`).
//! * [`MixingOperator`]: the infinitesimal-model operator
//!   `T̃_ε[q](x) = ∬ Γ_ε(x - (y+y')/2) q(y) q(y') dy dy'`.
//! * [`MutationOperator`]: the asexual mutation term `G_ε ⊛ q - q`.
//!
//! The fast mixing path works in index space. With trapezoid-weighted
//! samples `u_i = w_i q_i`, the double sum groups by `k = i + j`: the
//! midparent `(y_i + y_j)/2 = x_min + k h/2` lives on the half-spacing grid
//! and carries mass `H_k = Σ_{i+j=k} u_i u_j`. The output at node `j` is
//! `Σ_k Γ((2j - k) h/2) H_k`, i.e. the even samples of `H ⊛ γ` with `γ` the
//! kernel on the half-spacing grid. Both convolutions share one FFT pair, and
//! the result equals the nested trapezoid sum of the reference path up to
//! rounding and the ±10ε kernel window.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalize, Density, TraitGrid, NORMALIZED_TOL};

/// Half-width of the kernel support window in units of the kernel scale.
pub const KERNEL_WINDOW: f64 = 10.0;

/// Largest grid accepted by the O(N³) reference path.
pub const REFERENCE_MAX_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegregationKernel {
    epsilon: f64,
    // kernel width actually used; equals epsilon unless a variance fault is injected
    width: f64,
}

impl SegregationKernel {
    pub fn new(epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        SegregationKernel {
            epsilon,
            width: epsilon,
        }
    }

    /// Kernel whose variance is `scale * ε²/2`. Only meant for fault
    /// injection in the validation suite.
    pub fn with_variance_scale(epsilon: f64, scale: f64) -> Self {
        assert!(epsilon > 0.0 && scale > 0.0);
        SegregationKernel {
            epsilon,
            width: epsilon * scale.sqrt(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let w = self.width;
        (-(x * x) / (w * w)).exp() / (w * PI.sqrt())
    }

    pub fn sup_norm(&self) -> f64 {
        1.0 / (self.width * PI.sqrt())
    }

    pub fn window(&self) -> f64 {
        KERNEL_WINDOW * self.width
    }

    /// Samples `Γ_ε(m * step)` for `|m * step| <= window`, centered at index
    /// `half_len`. Returns `(samples, half_len)`.
    pub fn sample(&self, step: f64) -> (Vec<f64>, usize) {
        let k = (self.window() / step).floor() as usize;
        let samples = (0..=2 * k)
            .map(|i| self.eval((i as f64 - k as f64) * step))
            .collect();
        (samples, k)
    }
}

/// Base mutation law `G`, symmetric with finite variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseKernel {
    /// Centered normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Piecewise-linear table on a symmetric uniform grid `[-half_width, half_width]`.
    Tabulated { half_width: f64, values: Vec<f64> },
}

impl Default for BaseKernel {
    fn default() -> Self {
        BaseKernel::Gaussian { sigma: 1.0 }
    }
}

impl BaseKernel {
    fn support(&self) -> f64 {
        match self {
            BaseKernel::Gaussian { sigma } => KERNEL_WINDOW * sigma,
            BaseKernel::Tabulated { half_width, .. } => *half_width,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            BaseKernel::Gaussian { sigma } => {
                (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
            }
            BaseKernel::Tabulated { half_width, values } => {
                let n = values.len();
                if x.abs() > *half_width {
                    return 0.0;
                }
                let step = 2.0 * half_width / (n - 1) as f64;
                let s = (x + half_width) / step;
                let i = (s.floor() as usize).min(n - 2);
                let f = s - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }
}

/// Rescaled mutation law `G_ε(x) = G(x/ε)/ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationKernel {
    epsilon: f64,
    base: BaseKernel,
    variance: f64,
}

impl MutationKernel {
    pub fn new(epsilon: f64, base: BaseKernel) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::ConfigInvalid("mutation epsilon must be positive".into()));
        }
        let variance = match &base {
            BaseKernel::Gaussian { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::ConfigInvalid("Gaussian mutation sigma must be positive".into()));
                }
                sigma * sigma
            }
            BaseKernel::Tabulated { half_width, values } => {
                let n = values.len();
                if n < 3 || !(*half_width > 0.0) || values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::ConfigInvalid(
                        "tabulated mutation kernel needs >= 3 nonnegative values and half_width > 0".into(),
                    ));
                }
                for i in 0..n / 2 {
                    if (values[i] - values[n - 1 - i]).abs() > 1e-12 {
                        return Err(Error::ConfigInvalid(format!(
                            "tabulated mutation kernel is not symmetric at pair {i}"
                        )));
                    }
                }
                let g = TraitGrid::new_unchecked(-half_width, *half_width, n);
                let mass = g.trapezoid(values);
                if !(mass > 0.0) {
                    return Err(Error::ConfigInvalid("tabulated mutation kernel has zero mass".into()));
                }
                g.integrate_with(values, |x| x * x) / mass
            }
        };
        Ok(MutationKernel {
            epsilon,
            base,
            variance,
        })
    }

    pub fn gaussian(epsilon: f64) -> Self {
        MutationKernel::new(epsilon, BaseKernel::default()).expect("standard Gaussian kernel")
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Variance `σ_G²` of the base law `G`.
    pub fn base_variance(&self) -> f64 {
        self.variance
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.base.eval(x / self.epsilon) / self.epsilon
    }

    /// Samples `G_ε(m * step)` on its support, rescaled so the discrete mass
    /// `Σ step * G` is exactly one. Returns `(samples, half_len)`.
    pub fn sample(&self, step: f64) -> (Vec<f64>, usize) {
        let k = (self.base.support() * self.epsilon / step).floor() as usize;
        let mut samples: Vec<f64> = (0..=2 * k)
            .map(|i| self.eval((i as f64 - k as f64) * step))
            .collect();
        let mass: f64 = samples.iter().sum::<f64>() * step;
        for s in samples.iter_mut() {
            *s /= mass;
        }
        (samples, k)
    }
}

/// Zero-padded linear convolution through a cached FFT pair.
#[derive(Clone)]
struct Convolver {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kernel_spectrum: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("size", &self.size).finish()
    }
}

impl Convolver {
    fn new(min_len: usize, kernel: &[f64]) -> Self {
        let size = min_len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut kernel_spectrum = vec![Complex::new(0.0, 0.0); size];
        for (k, &g) in kernel.iter().enumerate() {
            kernel_spectrum[k] = Complex::new(g, 0.0);
        }
        fwd.process(&mut kernel_spectrum);
        Convolver {
            size,
            fwd,
            inv,
            kernel_spectrum,
        }
    }

    fn load(&self, data: &[f64]) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (b, &d) in buf.iter_mut().zip(data) {
            b.re = d;
        }
        self.fwd.process(&mut buf);
        buf
    }

    fn finish(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }
}

/// Fast evaluator of `T̃_ε` on a fixed grid.
#[derive(Debug, Clone)]
pub struct MixingOperator {
    grid: TraitGrid,
    kernel: SegregationKernel,
    half_len: usize,
    conv: Convolver,
}

impl MixingOperator {
    pub fn new(grid: TraitGrid, kernel: SegregationKernel) -> Self {
        let half_step = 0.5 * grid.spacing();
        let (gamma, half_len) = kernel.sample(half_step);
        // H has 2N-1 entries, gamma 2K+1; the linear convolution needs 2N+2K-1
        let min_len = 2 * grid.n_points() + 2 * half_len - 1;
        let scaled: Vec<f64> = gamma.into_iter().collect();
        MixingOperator {
            grid,
            kernel,
            half_len,
            conv: Convolver::new(min_len, &scaled),
        }
    }

    pub fn grid(&self) -> &TraitGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &SegregationKernel {
        &self.kernel
    }

    /// Bilinear form `B[v](x_j) = Σ_{i,k} w_i w_k v_i v_k Γ(x_j - (y_i+y_k)/2)`.
    /// For a probability density this is `T̃_ε[v]`; for a population density
    /// `T_ε[n] = B[n] / ρ`.
    pub fn bilinear(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.grid.n_points());
        let u: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.grid.weight(i))
            .collect();
        let mut spec = self.conv.load(&u);
        for (s, g) in spec.iter_mut().zip(&self.conv.kernel_spectrum) {
            *s = *s * *s * *g;
        }
        let full = self.conv.finish(spec);
        (0..self.grid.n_points())
            // T ≥ 0 exactly; anything negative is FFT rounding
            .map(|j| full[2 * j + self.half_len].max(0.0))
            .collect()
    }

    pub fn apply(&self, q: &Density) -> Result<Density> {
        q.require_normalized(NORMALIZED_TOL)?;
        if !q.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        Density::new(self.grid, self.bilinear(q.values()))
    }

    /// `T_ε[n] = ρ T̃_ε[n/ρ]` for a population density of positive mass.
    pub fn apply_full(&self, n: &Density) -> Result<Density> {
        let mass = n.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass(mass));
        }
        if !n.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let mut out = self.bilinear(n.values());
        for v in out.iter_mut() {
            *v /= mass;
        }
        Density::new(self.grid, out)
    }
}

/// Midparent density of `(Y + Y')/2` for `Y, Y'` i.i.d. `q`, on the
/// half-spacing grid (`2N - 1` nodes). Equals `2 (q ⊛ q)(2z)`.
pub fn midparent_density(q: &Density) -> Result<Density> {
    q.require_normalized(NORMALIZED_TOL)?;
    let g = *q.grid();
    let n = g.n_points();
    let u: Vec<f64> = q
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * g.weight(i))
        .collect();
    let conv = Convolver::new(2 * n - 1, &[1.0]);
    let mut spec = conv.load(&u);
    for s in spec.iter_mut() {
        *s = *s * *s;
    }
    let full = conv.finish(spec);
    let half = TraitGrid::new(g.x_min(), g.x_max(), 2 * n - 1)?;
    let dz = half.spacing();
    let values: Vec<f64> = (0..2 * n - 1)
        .map(|k| {
            // mass H_k sits on node k; divide by its trapezoid weight
            let w = if k == 0 || k == 2 * n - 2 { 0.5 * dz } else { dz };
            (full[k] / w).max(0.0)
        })
        .collect();
    Density::new(half, values)
}

pub fn apply_t_fast(q: &Density, kernel: &SegregationKernel) -> Result<Density> {
    MixingOperator::new(*q.grid(), *kernel).apply(q)
}

pub fn apply_t_full(n: &Density, kernel: &SegregationKernel) -> Result<Density> {
    MixingOperator::new(*n.grid(), *kernel).apply_full(n)
}

/// Direct nested-trapezoid evaluation of `T̃_ε[q]`, O(N³). Kept as the
/// independent oracle for the fast path.
pub fn apply_t_reference(q: &Density, kernel: &SegregationKernel) -> Result<Density> {
    let g = *q.grid();
    let n = g.n_points();
    if n > REFERENCE_MAX_POINTS {
        return Err(Error::GridTooLarge {
            max: REFERENCE_MAX_POINTS,
            got: n,
        });
    }
    q.require_normalized(NORMALIZED_TOL)?;
    let wq: Vec<f64> = (0..n).map(|i| g.weight(i) * q.values()[i]).collect();
    let xs: Vec<f64> = g.nodes().collect();
    let out: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for (i, &yi) in xs.iter().enumerate() {
                if wq[i] == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for (k, &yk) in xs.iter().enumerate() {
                    inner += wq[k] * kernel.eval(x - 0.5 * (yi + yk));
                }
                acc += wq[i] * inner;
            }
            acc
        })
        .collect();
    Density::new(g, out)
}

/// Fast evaluator of `G_ε ⊛ v` on a fixed grid.
#[derive(Debug, Clone)]
pub struct MutationOperator {
    grid: TraitGrid,
    kernel: MutationKernel,
    half_len: usize,
    conv: Convolver,
}

impl MutationOperator {
    pub fn new(grid: TraitGrid, kernel: MutationKernel) -> Self {
        let (samples, half_len) = kernel.sample(grid.spacing());
        let min_len = grid.n_points() + 2 * half_len;
        MutationOperator {
            grid,
            kernel,
            half_len,
            conv: Convolver::new(min_len, &samples),
        }
    }

    pub fn kernel(&self) -> &MutationKernel {
        &self.kernel
    }

    /// `(G_ε ⊛ v)(x_j) = Σ_i w_i G_ε(x_j - x_i) v_i`.
    pub fn convolve(&self, values: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.grid.weight(i))
            .collect();
        let mut spec = self.conv.load(&u);
        for (s, g) in spec.iter_mut().zip(&self.conv.kernel_spectrum) {
            *s *= *g;
        }
        let full = self.conv.finish(spec);
        (0..self.grid.n_points())
            .map(|j| full[j + self.half_len].max(0.0))
            .collect()
    }

    /// `M_ε[v] = G_ε ⊛ v - v` (uses `∫ G_ε = 1`). The result is signed.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.convolve(values)
            .into_iter()
            .zip(values)
            .map(|(c, v)| c - v)
            .collect()
    }
}

pub fn apply_mutation(q: &Density, kernel: &MutationKernel) -> Vec<f64> {
    MutationOperator::new(*q.grid(), kernel.clone()).apply(q.values())
}

/// Normalizes and applies `T̃_ε`; a convenience for population densities.
pub fn apply_t_normalized(n: &Density, kernel: &SegregationKernel) -> Result<Density> {
    apply_t_fast(&normalize(n)?, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn gaussian(grid: TraitGrid, mu: f64, var: f64) -> Density {
        Density::from_fn(grid, |x| {
            (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
        })
        .unwrap()
    }

    fn variance(d: &Density) -> (f64, f64) {
        let g = d.grid();
        let m = g.integrate_with(d.values(), |x| x) / d.mass();
        let v = g.integrate_with(d.values(), |x| (x - m).powi(2)) / d.mass();
        (m, v)
    }

    #[test]
    fn kernel_mass_and_variance() {
        for eps in [0.05, 0.1, 0.4] {
            let k = SegregationKernel::new(eps);
            let step = eps / 40.0;
            let (s, half) = k.sample(step);
            let mass: f64 = s.iter().sum::<f64>() * step;
            let var: f64 = s
                .iter()
                .enumerate()
                .map(|(i, v)| ((i as f64 - half as f64) * step).powi(2) * v)
                .sum::<f64>()
                * step;
            assert!((mass - 1.0).abs() < 1e-10);
            assert!((var / (eps * eps / 2.0) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_fixed_point() {
        let grid = make_grid(-3.0, 3.0, 1024).unwrap();
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let g = gaussian(grid, 0.3, eps * eps);
            let t = apply_t_fast(&g, &SegregationKernel::new(eps)).unwrap();
            let err = t.sup_distance(&g).unwrap() / g.max_value();
            assert!(err < 1e-6, "eps={eps} err={err}");
        }
    }

    #[test]
    fn gaussian_variance_halves_plus_segregation() {
        let grid = make_grid(-6.0, 6.0, 1024).unwrap();
        let eps = 0.2;
        let v = 0.3;
        let q = gaussian(grid, -0.4, v);
        let t = apply_t_fast(&q, &SegregationKernel::new(eps)).unwrap();
        let expected = gaussian(grid, -0.4, v / 2.0 + eps * eps / 2.0);
        assert!(t.sup_distance(&expected).unwrap() < 1e-9);
        let (m, var) = variance(&t);
        assert!((m + 0.4).abs() < 1e-10);
        assert!((var - (v / 2.0 + eps * eps / 2.0)).abs() < 1e-10, "{m} {var}");
    }

    #[test]
    fn dirac_like_input_returns_kernel() {
        let grid = make_grid(-2.0, 2.0, 513).unwrap();
        let a_idx = 300;
        let a = grid.node(a_idx);
        let mut v = vec![0.0; 513];
        v[a_idx] = 1.0 / grid.spacing();
        let q = Density::new(grid, v).unwrap();
        let eps = 0.1;
        let k = SegregationKernel::new(eps);
        let t = apply_t_fast(&q, &k).unwrap();
        for (i, x) in grid.nodes().enumerate() {
            assert!((t.values()[i] - k.eval(x - a)).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_matches_fast_on_bumps() {
        let grid = make_grid(-2.0, 2.0, 128).unwrap();
        let raw = Density::from_fn(grid, |x| {
            0.6 * (-(x + 0.5).powi(2) / 0.02).exp() + 0.4 * (-(x - 0.4).powi(2) / 0.05).exp()
        })
        .unwrap();
        let q = normalize(&raw).unwrap();
        let k = SegregationKernel::new(0.15);
        let r = apply_t_reference(&q, &k).unwrap();
        let f = apply_t_fast(&q, &k).unwrap();
        assert!(r.sup_distance(&f).unwrap() < 1e-10);
    }

    #[test]
    fn reference_rejects_large_grid() {
        let grid = make_grid(-2.0, 2.0, 300).unwrap();
        let q = gaussian(grid, 0.0, 0.1);
        assert!(matches!(
            apply_t_reference(&q, &SegregationKernel::new(0.1)),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn operators_reject_unnormalized() {
        let grid = make_grid(-2.0, 2.0, 64).unwrap();
        let q = gaussian(grid, 0.0, 0.1).scaled(2.0).unwrap();
        let k = SegregationKernel::new(0.2);
        assert!(matches!(apply_t_fast(&q, &k), Err(Error::NotNormalized(_))));
        assert!(matches!(apply_t_reference(&q, &k), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn full_operator_is_one_homogeneous() {
        let grid = make_grid(-3.0, 3.0, 512).unwrap();
        let eps = 0.2;
        let k = SegregationKernel::new(eps);
        let g = gaussian(grid, 0.1, eps * eps);
        let n = g.scaled(2.0).unwrap();
        let t = apply_t_full(&n, &k).unwrap();
        assert!((t.mass() - 2.0).abs() < 1e-8 * 2.0);
        assert!(t.sup_distance(&n).unwrap() < 1e-6 * n.max_value());

        let q = normalize(&Density::from_fn(grid, |x| (-(x * x) / 0.3).exp() * (1.2 + x.cos())).unwrap()).unwrap();
        let base = apply_t_full(&q, &k).unwrap();
        for c in [0.5, 3.0] {
            let tc = apply_t_full(&q.scaled(c).unwrap(), &k).unwrap();
            let expect = base.scaled(c).unwrap();
            assert!(tc.sup_distance(&expect).unwrap() < 1e-12 * c * base.max_value());
            assert!((tc.mass() - c).abs() < 1e-8 * c);
        }
        assert!(matches!(
            apply_t_full(&Density::zeros(grid), &k),
            Err(Error::ZeroMass(_))
        ));
    }

    #[test]
    fn midparent_of_gaussian() {
        let grid = make_grid(-3.0, 3.0, 400).unwrap();
        let q = gaussian(grid, 0.2, 0.09);
        let h = midparent_density(&q).unwrap();
        assert!((h.mass() - 1.0).abs() < 1e-10);
        let (m, v) = variance(&h);
        assert!((m - 0.2).abs() < 1e-10);
        assert!((v - 0.045).abs() < 1e-10);
    }

    #[test]
    fn mutation_integrates_to_zero_and_moments() {
        let grid = make_grid(-3.0, 3.0, 1024).unwrap();
        let eps = 0.1;
        let kern = MutationKernel::gaussian(eps);
        let q = normalize(&Density::from_fn(grid, |x| {
            (-(x - 0.3).powi(2) / 0.1).exp() * (1.0 + 0.5 * (3.0 * x).sin())
        })
        .unwrap())
        .unwrap();
        let mq = apply_mutation(&q, &kern);
        assert!(grid.trapezoid(&mq).abs() < 1e-8);
        // ∫ x M[q] = 0 and ∫ (x - M1)^2 M[q] = ε² σ_G²
        let m1 = grid.integrate_with(q.values(), |x| x);
        assert!(grid.integrate_with(&mq, |x| x).abs() < 1e-10);
        let second = grid.integrate_with(&mq, |x| (x - m1).powi(2));
        assert!((second - eps * eps).abs() < 1e-10, "{second}");
    }

    #[test]
    fn mutation_of_constant_vanishes_in_center() {
        let grid = make_grid(-3.0, 3.0, 600).unwrap();
        let kern = MutationKernel::gaussian(0.1);
        let q = Density::from_fn(grid, |_| 1.0).unwrap();
        let mq = apply_mutation(&q, &kern);
        assert!(mq[300].abs() < 1e-12);
    }

    #[test]
    fn tabulated_mutation_kernel() {
        // triangular law on [-1, 1]: variance 1/6
        let n = 201;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                1.0 - x.abs()
            })
            .collect();
        let k = MutationKernel::new(0.1, BaseKernel::Tabulated { half_width: 1.0, values }).unwrap();
        assert!((k.base_variance() - 1.0 / 6.0).abs() < 1e-4);
        let (s, _) = k.sample(0.001);
        assert!((s.iter().sum::<f64>() * 0.001 - 1.0).abs() < 1e-12);

        let mut bad: Vec<f64> = vec![1.0; 11];
        bad[0] = 0.5;
        assert!(MutationKernel::new(0.1, BaseKernel::Tabulated { half_width: 1.0, values: bad }).is_err());
    }
}
