//! Moments of trait densities, the exact moment algebra of `T̃_ε`, Taylor
//! remainders of the mortality and residuals of the moment ODEs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Density, NORMALIZED_TOL};
use crate::mortality::{MortalityKind, MortalitySpec};

/// Boundary value of `|x - M1|^{2k0} q` above which the moments are flagged
/// as possibly truncated.
pub const TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentVector {
    pub mean: f64,
    /// `M^c_k` for `k = 0..=2 k0`; entries 0 and 1 are exactly 1 and 0.
    pub central: Vec<f64>,
    /// `M^{|c|}_k` for `k = 0..=2 k0`.
    pub absolute_central: Vec<f64>,
    pub k0: usize,
    pub tail_warning: bool,
}

impl MomentVector {
    pub fn order(&self) -> usize {
        2 * self.k0
    }

    pub fn central(&self, k: usize) -> Result<f64> {
        self.central.get(k).copied().ok_or(Error::OrderExceeded {
            requested: k,
            stored: self.order(),
        })
    }

    pub fn abs_central(&self, k: usize) -> Result<f64> {
        self.absolute_central.get(k).copied().ok_or(Error::OrderExceeded {
            requested: k,
            stored: self.order(),
        })
    }

    pub fn variance(&self) -> f64 {
        self.central[2]
    }
}

/// Quadrature moments of a probability density up to order `2 k0`.
pub fn extract_moments(q: &Density, k0: usize) -> Result<MomentVector> {
    assert!(k0 >= 1, "k0 must be >= 1");
    q.require_normalized(NORMALIZED_TOL)?;
    let g = q.grid();
    let v = q.values();
    let top = 2 * k0;
    let mean = g.integrate_with(v, |x| x);

    let mut central = vec![0.0; top + 1];
    let mut absolute = vec![0.0; top + 1];
    for (i, x) in g.nodes().enumerate() {
        let w = g.weight(i) * v[i];
        if w == 0.0 {
            continue;
        }
        let d = x - mean;
        let mut p = 1.0;
        for k in 0..=top {
            central[k] += w * p;
            absolute[k] += w * p.abs();
            p *= d;
        }
    }
    central[0] = 1.0;
    central[1] = 0.0;
    absolute[0] = 1.0;
    for k in (2..=top).step_by(2) {
        absolute[k] = central[k];
    }

    let n = g.n_points();
    let tail = [0, n - 1]
        .iter()
        .map(|&i| (g.node(i) - mean).abs().powi(top as i32) * v[i])
        .fold(0.0, f64::max);
    let tail_warning = tail > TAIL_TOL;
    if tail_warning {
        log::debug!("moment tail truncation: boundary integrand {tail:.3e} exceeds {TAIL_TOL:.0e}");
    }
    Ok(MomentVector {
        mean,
        central,
        absolute_central: absolute,
        k0,
        tail_warning,
    })
}

/// `σ_l = (2l - 1)!! / 2^l`.
pub fn sigma_coefficient(l: usize) -> f64 {
    (1..=l).map(|i| (2 * i - 1) as f64 / 2.0).product()
}

/// `∫ x^{2l} Γ_ε = σ_l ε^{2l}`.
pub fn kernel_even_moment(l: usize, epsilon: f64) -> f64 {
    sigma_coefficient(l) * epsilon.powi(2 * l as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMoments {
    pub epsilon: f64,
    /// `σ_l` for `l = 0..=k0`.
    pub sigma: Vec<f64>,
}

impl KernelMoments {
    pub fn new(epsilon: f64, k0: usize) -> Self {
        KernelMoments {
            epsilon,
            sigma: (0..=k0).map(sigma_coefficient).collect(),
        }
    }

    pub fn even_moment(&self, l: usize) -> f64 {
        self.sigma[l] * self.epsilon.powi(2 * l as i32)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact value of `∫ (x - M1)^{2k} T̃_ε[q] dx` from the central moments of `q`.
pub fn predict_t_moment(mv: &MomentVector, k: usize, km: &KernelMoments) -> Result<f64> {
    if 2 * k > mv.order() {
        return Err(Error::OrderExceeded {
            requested: 2 * k,
            stored: mv.order(),
        });
    }
    if k >= km.sigma.len() {
        return Err(Error::OrderExceeded {
            requested: k,
            stored: km.sigma.len() - 1,
        });
    }
    let m = &mv.central;
    let eps = km.epsilon;
    let four_k = 4f64.powi(k as i32);
    let mut total = 2.0 / four_k * m[2 * k];
    for l in 0..k {
        let outer = km.sigma[k - l] * eps.powi(2 * (k - l) as i32) / 4f64.powi(l as i32)
            * binomial(2 * k, 2 * l);
        let inner: f64 = (0..=2 * l)
            .map(|j| binomial(2 * l, j) * m[2 * l - j] * m[j])
            .sum();
        total += outer * inner;
    }
    if k >= 2 {
        for j in 2..=2 * k - 2 {
            total += binomial(2 * k, j) * m[2 * k - j] * m[j] / four_k;
        }
    }
    Ok(total)
}

/// `r^m[X](x) = (m(x) - m(X) - (x - X) m'(X)) / (x - X)²`, with the limit
/// `m''(X)/2` when `|x - X| <= 1e-3 * spacing`.
pub fn taylor_remainder(m: &MortalitySpec, big_x: f64, x: f64, spacing: f64) -> Result<f64> {
    let d = x - big_x;
    if d.abs() > spacing * 1e-3 {
        Ok((m.eval_m(x)? - m.eval_m(big_x)? - d * m.eval_m_prime(big_x)?) / (d * d))
    } else {
        Ok(0.5 * m.eval_m_second(big_x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionAverage {
    /// `∫ m q`.
    pub direct: f64,
    /// `m(M1) + ∫ (x - M1)² r^m[M1](x) q dx`.
    pub decomposed: f64,
}

pub fn selection_average(q: &Density, m: &MortalitySpec) -> Result<SelectionAverage> {
    q.require_normalized(NORMALIZED_TOL)?;
    let g = q.grid();
    let v = q.values();
    let mut direct = 0.0;
    let mut rem = 0.0;
    let mean = g.integrate_with(v, |x| x);
    for (i, x) in g.nodes().enumerate() {
        let w = g.weight(i) * v[i];
        direct += w * m.eval_m(x)?;
        rem += w * (x - mean).powi(2) * taylor_remainder(m, mean, x, g.spacing())?;
    }
    let decomposed = m.eval_m(mean)? + rem;
    let scale = direct.abs().max(m.eval_m(mean)?.abs()).max(1e-300);
    if (direct - decomposed).abs() > 1e-9 * scale + 1e-15 {
        return Err(Error::DecompositionMismatch { direct, decomposed });
    }
    Ok(SelectionAverage { direct, decomposed })
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

const GL_POINTS: usize = 12;

/// `F1 = ∫ (x - M)(m(x) - m(M) - m'(M)(x - M)) q dx`.
pub fn f1_exact(q: &Density, m: &MortalitySpec) -> Result<f64> {
    let g = q.grid();
    let v = q.values();
    let mean = g.integrate_with(v, |x| x);
    let (m0, m1) = (m.eval_m(mean)?, m.eval_m_prime(mean)?);
    let mut acc = 0.0;
    for (i, x) in g.nodes().enumerate() {
        let d = x - mean;
        acc += g.weight(i) * v[i] * d * (m.eval_m(x)? - m0 - m1 * d);
    }
    Ok(acc)
}

/// `F1` through its σ-integral display:
/// `∫∫_0^1 (1-σ)(m''(M+σd) σ d³ + 2(m'(M+σd) - m'(M)) d²) dσ q dx`, `d = x - M`.
pub fn f1_sigma_form(q: &Density, m: &MortalitySpec) -> Result<f64> {
    let g = q.grid();
    let v = q.values();
    let mean = g.integrate_with(v, |x| x);
    let mp = m.eval_m_prime(mean)?;
    let gl = gauss_legendre_unit(GL_POINTS);
    let mut acc = 0.0;
    for (i, x) in g.nodes().enumerate() {
        let d = x - mean;
        let mut inner = 0.0;
        for &(s, w) in &gl {
            let y = mean + s * d;
            inner += w
                * (1.0 - s)
                * (m.eval_m_second(y)? * s * d * d * d + 2.0 * (m.eval_m_prime(y)? - mp) * d * d);
        }
        acc += g.weight(i) * v[i] * inner;
    }
    Ok(acc)
}

/// `F2 = -∫ (x - M)² (m(x) - ∫ m q) q dx`.
pub fn f2_exact(q: &Density, m: &MortalitySpec) -> Result<f64> {
    let g = q.grid();
    let v = q.values();
    let mean = g.integrate_with(v, |x| x);
    let ms = m.sample(g)?;
    let avg = g.trapezoid(&v.iter().zip(&ms).map(|(a, b)| a * b).collect::<Vec<_>>());
    let mut acc = 0.0;
    for (i, x) in g.nodes().enumerate() {
        acc += g.weight(i) * v[i] * (x - mean).powi(2) * (ms[i] - avg);
    }
    Ok(-acc)
}

/// `F2` through its σ-integral display:
/// `-(m'(M) M3 + ∫∫_0^1 (1-σ) m''(M+σd)(d⁴ - d² M2) dσ q dx)`.
pub fn f2_sigma_form(q: &Density, m: &MortalitySpec) -> Result<f64> {
    let g = q.grid();
    let v = q.values();
    let mean = g.integrate_with(v, |x| x);
    let m2 = g.integrate_with(v, |x| (x - mean).powi(2));
    let m3 = g.integrate_with(v, |x| (x - mean).powi(3));
    let gl = gauss_legendre_unit(GL_POINTS);
    let mut acc = 0.0;
    for (i, x) in g.nodes().enumerate() {
        let d = x - mean;
        let mut inner = 0.0;
        for &(s, w) in &gl {
            inner += w * (1.0 - s) * m.eval_m_second(mean + s * d)?;
        }
        acc += g.weight(i) * v[i] * inner * (d.powi(4) - d * d * m2);
    }
    Ok(-(m.eval_m_prime(mean)? * m3 + acc))
}

/// `|F1| <= C A_m ((1 + |M1|^p) M^{|c|}_3 + M^{|c|}_{3+p})`, returned with `C = 1`.
pub fn f1_bound(mv: &MomentVector, m: &MortalitySpec) -> Result<f64> {
    let p = m.growth_exponent as usize;
    let mu = mv.mean.abs();
    Ok(m.am * ((1.0 + mu.powi(p as i32)) * mv.abs_central(3)? + mv.abs_central(3 + p)?))
}

/// `|F2| <= C A_m [(1+|M1|^p)(M2² + M4) + (|M1| + |M1|^{p+1}) M^{|c|}_3
/// + M^{|c|}_{4+p} + M2 M^{|c|}_{2+p}]`, returned with `C = 1`.
pub fn f2_bound(mv: &MomentVector, m: &MortalitySpec) -> Result<f64> {
    let p = m.growth_exponent as i32;
    let mu = mv.mean.abs();
    let m2 = mv.central(2)?;
    Ok(m.am
        * ((1.0 + mu.powi(p)) * (m2 * m2 + mv.central(4)?)
            + (mu + mu.powi(p + 1)) * mv.abs_central(3)?
            + mv.abs_central(4 + p as usize)?
            + m2 * mv.abs_central(2 + p as usize)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRow {
    pub t: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "F1_exact")]
    pub f1_exact: f64,
    #[serde(rename = "F1_bound")]
    pub f1_bound: f64,
    #[serde(rename = "F2_exact")]
    pub f2_exact: f64,
    #[serde(rename = "F2_bound")]
    pub f2_bound: f64,
    /// Finite-difference error estimate for `ε² Ṁ1` and `ε² Ṁ2`.
    pub tol1: f64,
    pub tol2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    /// Smallest `C` such that every `|F| <= C * bound(C = 1)`.
    pub fitted_c_f1: f64,
    pub fitted_c_f2: f64,
}

impl ResidualReport {
    /// Largest `|R| / (factor * tol)` over the rows, for both equations.
    pub fn worst_ratio(&self, factor: f64) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.r1.abs() / (factor * r.tol1)).max(r.r2.abs() / (factor * r.tol2)))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "R1", "R2", "F1_exact", "F1_bound", "F2_exact", "F2_bound"])?;
        for r in &self.rows {
            wr.write_record(
                [r.t, r.r1, r.r2, r.f1_exact, r.f1_bound, r.f2_exact, r.f2_bound].map(|x| x.to_string()),
            )?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Second-order derivative of uniformly sampled values, one-sided at the ends.
pub fn time_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
            } else if i == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Richardson estimate of the centered-difference error: `|D_Δ - D_2Δ| / 3`,
/// using the neighbouring estimate where the wide stencil does not fit.
pub fn derivative_error(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let narrow = time_derivative(values, dt);
    let mut err: Vec<Option<f64>> = (0..n)
        .map(|i| {
            (i >= 2 && i + 2 < n).then(|| {
                let wide = (values[i + 2] - values[i - 2]) / (4.0 * dt);
                (narrow[i] - wide).abs() / 3.0
            })
        })
        .collect();
    // ends: one-sided stencils have about twice the centered error constant
    let first = err.iter().flatten().next().copied().unwrap_or(0.0);
    let last = err.iter().rev().flatten().next().copied().unwrap_or(0.0);
    for (i, e) in err.iter_mut().enumerate() {
        if e.is_none() {
            *e = Some(if i < n / 2 { 2.0 * first } else { 2.0 * last });
        }
    }
    let err: Vec<f64> = err.into_iter().map(|e| e.unwrap()).collect();
    // the estimate crosses zero where the third derivative does; take the
    // envelope over neighbouring samples
    (0..n)
        .map(|i| err[i.saturating_sub(2)..(i + 3).min(n)].iter().copied().fold(0.0, f64::max))
        .collect()
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 5 {
        return Err(Error::InsufficientSamples {
            needed: 5,
            got: times.len(),
        });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::Precondition("moment residuals need uniformly spaced times".into()));
    }
    Ok(dt)
}

/// Residuals of `ε² Ṁ1 + m'(M1) M2 = -F1` and `ε² Ṁ2 + (r/2) M2 = r ε²/2 + F2`
/// along a sampled trajectory of probability densities.
pub fn moment_ode_residuals(
    times: &[f64],
    states: &[Density],
    m: &MortalitySpec,
    r: f64,
    epsilon: f64,
    k0: usize,
) -> Result<ResidualReport> {
    let dt = uniform_step(times)?;
    if states.len() != times.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: states.len(),
        });
    }
    let mvs: Vec<MomentVector> = states.iter().map(|q| extract_moments(q, k0)).collect::<Result<_>>()?;
    let m1: Vec<f64> = mvs.iter().map(|v| v.mean).collect();
    let m2: Vec<f64> = mvs.iter().map(|v| v.central[2]).collect();
    let d1 = time_derivative(&m1, dt);
    let d2 = time_derivative(&m2, dt);
    let e1 = derivative_error(&m1, dt);
    let e2 = derivative_error(&m2, dt);
    let eps2 = epsilon * epsilon;
    let mut rows = Vec::with_capacity(times.len());
    let (mut c1, mut c2) = (0.0f64, 0.0f64);
    for (i, q) in states.iter().enumerate() {
        let f1 = f1_exact(q, m)?;
        let f2 = f2_exact(q, m)?;
        let b1 = f1_bound(&mvs[i], m)?;
        let b2 = f2_bound(&mvs[i], m)?;
        if b1 > 0.0 {
            c1 = c1.max(f1.abs() / b1);
        }
        if b2 > 0.0 {
            c2 = c2.max(f2.abs() / b2);
        }
        rows.push(ResidualRow {
            t: times[i],
            r1: eps2 * d1[i] + m.eval_m_prime(m1[i])? * m2[i] + f1,
            r2: eps2 * d2[i] + 0.5 * r * m2[i] - 0.5 * r * eps2 - f2,
            f1_exact: f1,
            f1_bound: b1,
            f2_exact: f2,
            f2_bound: b2,
            tol1: eps2 * e1[i],
            tol2: eps2 * e2[i],
        });
    }
    Ok(ResidualReport {
        rows,
        fitted_c_f1: c1,
        fitted_c_f2: c2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsexualResidualRow {
    pub t: f64,
    pub mean_residual: f64,
    pub variance_residual: f64,
    pub tol_mean: f64,
    pub tol_variance: f64,
}

/// Residuals of `ε Ṁ1 + m'(M1) M2 + s M3 = 0` and
/// `ε Ṁ2 = p σ_G² ε² - s M4 - 2 s M3 M1 + s M2²` for `m = s x²`.
pub fn asexual_moment_residuals(
    times: &[f64],
    m1: &[f64],
    m2: &[f64],
    m3: &[f64],
    m4: &[f64],
    m: &MortalitySpec,
    mutation_rate: f64,
    base_variance: f64,
    epsilon: f64,
) -> Result<Vec<AsexualResidualRow>> {
    let s = match m.kind {
        MortalityKind::Quadratic { s } => s,
        _ => {
            return Err(Error::Precondition(
                "asexual moment equations are stated for quadratic mortality".into(),
            ))
        }
    };
    let dt = uniform_step(times)?;
    for series in [m1, m2, m3, m4] {
        if series.len() != times.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                got: series.len(),
            });
        }
    }
    let d1 = time_derivative(m1, dt);
    let d2 = time_derivative(m2, dt);
    let e1 = derivative_error(m1, dt);
    let e2 = derivative_error(m2, dt);
    Ok((0..times.len())
        .map(|i| {
            let (mu, c2, c3, c4) = (m1[i], m2[i], m3[i], m4[i]);
            AsexualResidualRow {
                t: times[i],
                mean_residual: epsilon * d1[i] + 2.0 * s * mu * c2 + s * c3,
                variance_residual: epsilon * d2[i]
                    - (mutation_rate * base_variance * epsilon * epsilon - s * c4 - 2.0 * s * c3 * mu + s * c2 * c2),
                tol_mean: epsilon * e1[i],
                tol_variance: epsilon * e2[i],
            }
        })
        .collect())
}
