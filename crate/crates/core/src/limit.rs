//! Limit objects: the mean ODE `ż = -m'(z)`, the Gaussian ansatz and the
//! limit population size `(r - m(z)) / κ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Density, TraitGrid};
use crate::mortality::MortalitySpec;

/// Default step of the mean ODE integrator, independent of the PDE step.
pub const MEAN_ODE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathVariant {
    /// Started from the mean of the ε-dependent initial datum.
    EpsilonInitialized,
    /// Started from the limit initial trait `x0`.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanPath {
    pub times: Vec<f64>,
    pub z_values: Vec<f64>,
    /// `ż = -m'(z)` at each sample, kept for Hermite interpolation.
    slopes: Vec<f64>,
    pub variant: PathVariant,
    pub left_window: bool,
}

impl MeanPath {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Cubic Hermite interpolation between samples; clamps to the ends.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.z_values[0];
        }
        if t >= self.times[n - 1] {
            return self.z_values[n - 1];
        }
        let h = self.times[1] - self.times[0];
        let i = (((t - self.times[0]) / h).floor() as usize).min(n - 2);
        let s = (t - self.times[i]) / h;
        let (y0, y1) = (self.z_values[i], self.z_values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "z"])?;
        for (t, z) in self.times.iter().zip(&self.z_values) {
            wr.write_record([t.to_string(), z.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Classical RK4 for `ż = -m'(z)`; the step is shrunk so that `t_end` is hit
/// exactly.
pub fn integrate_mean_ode(
    m: &MortalitySpec,
    z0: f64,
    t_end: f64,
    dt: f64,
    variant: PathVariant,
) -> Result<MeanPath> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition("mean ODE needs dt > 0 and t_end >= 0".into()));
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let f = |z: f64| m.eval_m_prime(z).map(|v| -v);
    let mut times = Vec::with_capacity(steps + 1);
    let mut zs = Vec::with_capacity(steps + 1);
    let mut slopes = Vec::with_capacity(steps + 1);
    let mut z = z0;
    let mut left_window = z0.abs() >= m.l_window;
    times.push(0.0);
    zs.push(z);
    slopes.push(f(z)?);
    for i in 0..steps {
        let k1 = f(z)?;
        let k2 = f(z + 0.5 * h * k1)?;
        let k3 = f(z + 0.5 * h * k2)?;
        let k4 = f(z + h * k3)?;
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        left_window |= z.abs() >= m.l_window;
        times.push((i + 1) as f64 * h);
        zs.push(z);
        slopes.push(f(z)?);
    }
    if left_window {
        log::warn!("mean path leaves the convexity window (-{0}, {0})", m.l_window);
    }
    Ok(MeanPath {
        times,
        z_values: zs,
        slopes,
        variant,
        left_window,
    })
}

/// Normalized Gaussian with variance `ε²` centered at `center`.
pub fn gaussian_profile(center: f64, epsilon: f64, grid: &TraitGrid) -> Result<Density> {
    if epsilon < 4.0 * grid.spacing() {
        return Err(Error::UnderResolved {
            epsilon,
            spacing: grid.spacing(),
        });
    }
    if !grid.contains(center) {
        return Err(Error::Precondition(format!("center {center} outside the grid")));
    }
    let c = 1.0 / ((2.0 * PI).sqrt() * epsilon);
    Density::from_fn(*grid, |x| c * (-(x - center).powi(2) / (2.0 * epsilon * epsilon)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoLimit {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    /// Sample indices where `r <= m(z(t))`.
    pub nonpositive: Vec<usize>,
}

pub fn rho_limit_value(m: &MortalitySpec, z: f64, r: f64, kappa: f64) -> Result<f64> {
    Ok((r - m.eval_m(z)?) / kappa)
}

pub fn rho_limit(m: &MortalitySpec, path: &MeanPath, r: f64, kappa: f64) -> Result<RhoLimit> {
    let mut rho = Vec::with_capacity(path.times.len());
    let mut nonpositive = Vec::new();
    for (i, &z) in path.z_values.iter().enumerate() {
        let v = rho_limit_value(m, z, r, kappa)?;
        if v <= 0.0 {
            nonpositive.push(i);
        }
        rho.push(v);
    }
    if !nonpositive.is_empty() {
        log::warn!("limit population size is nonpositive at {} samples", nonpositive.len());
    }
    Ok(RhoLimit {
        times: path.times.clone(),
        rho,
        nonpositive,
    })
}
