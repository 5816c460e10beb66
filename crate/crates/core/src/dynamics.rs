//! Time integration of the sexual (full and renormalized) and asexual
//! models.
//!
//! Every model has the form `ε^a ∂t u = N(u) - L(x) u` with a nonnegative
//! nonlocal gain `N` and a local rate `L`. The local part is integrated
//! exactly with exponential factors. `N` is treated explicitly, either by
//! exponential Euler or by the Cox–Matthews ETD2RK scheme
//!
//! ```text
//! a   = e^{-Lh} u + h φ1(Lh) N(u)
//! u⁺  = e^{-Lh} u + h (φ1 - φ2)(Lh) N(u) + h φ2(Lh) N(a)
//! ```
//!
//! Both weights are nonnegative, so positivity is unconditional. The
//! competition rate `κρ` inside `L` is frozen at a half-step value obtained
//! from the exact logistic solution of the mass equation.

use serde::Serialize;

use crate::config::{ModelKind, RunConfig, TimeScheme};
use crate::error::{Error, Result};
use crate::grid::{normalize, Density, TraitGrid};
use crate::limit::{gaussian_profile, integrate_mean_ode, rho_limit_value, MeanPath, PathVariant, MEAN_ODE_DT};
use crate::moments::{extract_moments, f1_exact, f2_exact};
use crate::mortality::MortalitySpec;
use crate::operators::{MixingOperator, MutationKernel, MutationOperator, SegregationKernel};
use crate::transport::wasserstein1;

/// Values above this abort the run.
pub const BLOW_UP: f64 = 1e12;
/// Relative negativity tolerance `min >= -NEG_REL * max`.
pub const NEG_REL: f64 = 1e-12;
/// Weight exponent of the `X_k` norm check.
pub const XK_EXPONENT: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationState {
    pub t: f64,
    /// `n` for the full models, `q` for the renormalized one.
    pub values: Vec<f64>,
    /// Population size; for the renormalized model it is carried along by
    /// the mass equation.
    pub rho: f64,
    pub epsilon: f64,
    pub model: ModelKind,
}

impl SimulationState {
    pub fn density(&self, grid: TraitGrid) -> Result<Density> {
        Density::new(grid, self.values.clone())
    }

    /// The probability density `q = n / ∫ n`.
    pub fn probability(&self, grid: TraitGrid) -> Result<Density> {
        normalize(&self.density(grid)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepInfo {
    /// `|∫ q⁺ - 1|` before the end-of-step projection (renormalized model).
    pub mass_drift: f64,
    /// `1 / ∫ q⁺`, the projection factor actually applied.
    pub projection_factor: f64,
    /// `|λ - ∫ m q|` for the mass multiplier of the renormalized model.
    pub multiplier_gap: f64,
}

/// `(e^{-z}, φ1(z), φ2(z))` with `φ1 = (1 - e^{-z})/z`, `φ2 = (z - 1 + e^{-z})/z²`.
#[inline]
pub fn exp_weights(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        let z3 = z2 * z;
        let z4 = z3 * z;
        (
            (-z).exp(),
            1.0 - z / 2.0 + z2 / 6.0 - z3 / 24.0 + z4 / 120.0,
            0.5 - z / 6.0 + z2 / 24.0 - z3 / 120.0 + z4 / 720.0,
        )
    } else {
        let em1 = (-z).exp_m1();
        (em1 + 1.0, -em1 / z, (z + em1) / (z * z))
    }
}

/// Exact solution over scaled time `tau` of `ρ' = ρ (a - κ ρ)`.
pub fn logistic(rho: f64, a: f64, kappa: f64, tau: f64) -> f64 {
    let x = a * tau;
    let growth = if a.abs() * tau < 1e-12 { tau } else { x.exp_m1() / a };
    rho * x.exp() / (1.0 + kappa * rho * growth)
}

#[derive(Debug, Clone)]
enum Gain {
    Mixing(MixingOperator),
    Mutation(MutationOperator, f64),
}

/// Model-specific step machinery for one configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub model: ModelKind,
    pub grid: TraitGrid,
    pub r: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub scheme: TimeScheme,
    m_values: Vec<f64>,
    gain: Gain,
}

impl Stepper {
    pub fn new(cfg: &RunConfig, grid: TraitGrid) -> Result<Self> {
        Self::with_kernel(cfg, grid, SegregationKernel::new(cfg.epsilon))
    }

    pub fn with_kernel(cfg: &RunConfig, grid: TraitGrid, kernel: SegregationKernel) -> Result<Self> {
        let gain = match cfg.model {
            ModelKind::AsexualFull => {
                let k = MutationKernel::new(cfg.epsilon, cfg.asexual.kernel.clone())?;
                Gain::Mutation(MutationOperator::new(grid, k), cfg.asexual.mutation_rate)
            }
            _ => Gain::Mixing(MixingOperator::new(grid, kernel)),
        };
        Ok(Stepper {
            model: cfg.model,
            grid,
            r: cfg.r,
            kappa: cfg.kappa,
            epsilon: cfg.epsilon,
            scheme: cfg.scheme,
            m_values: cfg.mortality.sample(&grid)?,
            gain,
        })
    }

    pub fn m_values(&self) -> &[f64] {
        &self.m_values
    }

    fn scaled(&self, dt: f64) -> f64 {
        dt / self.epsilon.powi(self.model.time_scale_power())
    }

    fn mass(&self, v: &[f64]) -> f64 {
        self.grid.trapezoid(v)
    }

    fn selection(&self, v: &[f64], mass: f64) -> f64 {
        self.grid.integrate_with_values(v, &self.m_values) / mass
    }

    /// `r T[v] = r B[v] / ∫ v`, or `p G_ε ⊛ v`.
    fn gain(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &self.gain {
            Gain::Mixing(op) => {
                let mass = self.mass(v);
                if !(mass > 0.0) {
                    return Err(Error::ZeroMass(mass));
                }
                let s = self.r / mass;
                Ok(op.bilinear(v).into_iter().map(|x| x * s).collect())
            }
            Gain::Mutation(op, p) => Ok(op.convolve(v).into_iter().map(|x| x * p).collect()),
        }
    }

    fn check(&self, v: &mut [f64], t: f64) -> Result<()> {
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for &x in v.iter() {
            if !x.is_finite() || x > BLOW_UP {
                return Err(Error::BlowUp { t, value: x });
            }
            max = max.max(x);
            min = min.min(x);
        }
        if min < -NEG_REL * max {
            return Err(Error::NegativityViolation { t, ratio: min / max });
        }
        for x in v.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        Ok(())
    }

    /// One exponential step of `u' = N(u) - L u` in scaled time `h`.
    fn etd(&self, u: &[f64], rates: &[f64], h: f64) -> Result<Vec<f64>> {
        let n_u = self.gain(u)?;
        let w: Vec<(f64, f64, f64)> = rates.iter().map(|l| exp_weights(l * h)).collect();
        let a: Vec<f64> = (0..u.len())
            .map(|i| w[i].0 * u[i] + h * w[i].1 * n_u[i])
            .collect();
        match self.scheme {
            TimeScheme::ExponentialEuler => Ok(a),
            TimeScheme::ExponentialRk2 => {
                let n_a = self.gain(&a)?;
                Ok((0..u.len())
                    .map(|i| w[i].0 * u[i] + h * ((w[i].1 - w[i].2) * n_u[i] + w[i].2 * n_a[i]))
                    .collect())
            }
        }
    }

    /// `ε² ∂t n = r T_ε[n] - (m + κρ) n`.
    pub fn step_sexual_full(&self, state: &SimulationState, dt: f64) -> Result<(SimulationState, StepInfo)> {
        self.step_full(state, dt)
    }

    /// `ε ∂t n = p (G_ε ⊛ n - n) + (r - m - κρ) n`.
    pub fn step_asexual(&self, state: &SimulationState, dt: f64) -> Result<(SimulationState, StepInfo)> {
        self.step_full(state, dt)
    }

    fn step_full(&self, state: &SimulationState, dt: f64) -> Result<(SimulationState, StepInfo)> {
        let h = self.scaled(dt);
        let mass = self.mass(&state.values);
        if !(mass > 0.0) {
            return Err(Error::ZeroMass(mass));
        }
        let sel = self.selection(&state.values, mass);
        let rho_mid = logistic(mass, self.r - sel, self.kappa, 0.5 * h);
        let shift = match &self.gain {
            Gain::Mixing(_) => 0.0,
            Gain::Mutation(_, p) => p - self.r,
        };
        let rates: Vec<f64> = self
            .m_values
            .iter()
            .map(|m| m + self.kappa * rho_mid + shift)
            .collect();
        let mut next = self.etd(&state.values, &rates, h)?;
        let t = state.t + dt;
        self.check(&mut next, t)?;
        let rho = self.mass(&next);
        Ok((
            SimulationState {
                t,
                values: next,
                rho,
                epsilon: state.epsilon,
                model: state.model,
            },
            StepInfo {
                projection_factor: 1.0,
                ..Default::default()
            },
        ))
    }

    /// `ε² ∂t q = r (T̃_ε[q] - q) - (m - ∫ m q) q`.
    ///
    /// The scalar `∫ m q` is replaced in each stage by the multiplier `λ`
    /// that makes the stage output integrate to one, so the scheme conserves
    /// mass up to rounding; `|λ - ∫ m q|` is reported. A projection by the
    /// inverse mass is still applied at the end.
    pub fn step_sexual_renormalized(
        &self,
        state: &SimulationState,
        dt: f64,
    ) -> Result<(SimulationState, StepInfo)> {
        let h = self.scaled(dt);
        let q = &state.values;
        let sel = self.selection(q, 1.0);
        let rates: Vec<f64> = self.m_values.iter().map(|m| self.r + m).collect();
        let w: Vec<(f64, f64, f64)> = rates.iter().map(|l| exp_weights(l * h)).collect();
        let tq = self.gain(q)?;
        let n = q.len();

        // stage 1: a = E q + h φ1 (r T̃q + λ1 q), with ∫ a = 1
        let base: Vec<f64> = (0..n).map(|i| w[i].0 * q[i] + h * w[i].1 * tq[i]).collect();
        let dir: Vec<f64> = (0..n).map(|i| h * w[i].1 * q[i]).collect();
        let lambda1 = (1.0 - self.mass(&base)) / self.mass(&dir);
        let mut a: Vec<f64> = (0..n).map(|i| base[i] + lambda1 * dir[i]).collect();
        let mut gap = (lambda1 - sel).abs();

        let mut next = match self.scheme {
            TimeScheme::ExponentialEuler => a,
            TimeScheme::ExponentialRk2 => {
                self.check(&mut a, state.t + dt)?;
                let ta = self.gain(&a)?;
                let base: Vec<f64> = (0..n)
                    .map(|i| {
                        w[i].0 * q[i]
                            + h * ((w[i].1 - w[i].2) * (tq[i] + lambda1 * q[i]) + w[i].2 * ta[i])
                    })
                    .collect();
                let dir: Vec<f64> = (0..n).map(|i| h * w[i].2 * a[i]).collect();
                let lambda2 = (1.0 - self.mass(&base)) / self.mass(&dir);
                gap = gap.max((lambda2 - self.selection(&a, self.mass(&a))).abs());
                (0..n).map(|i| base[i] + lambda2 * dir[i]).collect()
            }
        };
        let t = state.t + dt;
        self.check(&mut next, t)?;
        let mass = self.mass(&next);
        let drift = (mass - 1.0).abs();
        let factor = 1.0 / mass;
        for v in next.iter_mut() {
            *v *= factor;
        }
        let sel_new = self.selection(&next, 1.0);
        let rho_half = logistic(state.rho, self.r - sel, self.kappa, 0.5 * h);
        let rho = logistic(rho_half, self.r - sel_new, self.kappa, 0.5 * h);
        Ok((
            SimulationState {
                t,
                values: next,
                rho,
                epsilon: state.epsilon,
                model: state.model,
            },
            StepInfo {
                mass_drift: drift,
                projection_factor: factor,
                multiplier_gap: gap,
            },
        ))
    }

    pub fn step(&self, state: &SimulationState, dt: f64) -> Result<(SimulationState, StepInfo)> {
        match self.model {
            ModelKind::SexualFull => self.step_sexual_full(state, dt),
            ModelKind::SexualRenormalized => self.step_sexual_renormalized(state, dt),
            ModelKind::AsexualFull => self.step_asexual(state, dt),
        }
    }

    /// `∫ q RHS` for the renormalized model, which vanishes by Fubini.
    pub fn renormalized_rhs_integral(&self, q: &[f64]) -> Result<f64> {
        let tq = self.gain(q)?;
        let sel = self.selection(q, 1.0);
        let rhs: Vec<f64> = (0..q.len())
            .map(|i| tq[i] - self.r * q[i] - (self.m_values[i] - sel) * q[i])
            .collect();
        Ok(self.mass(&rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub rho: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2c")]
    pub m2c: f64,
    #[serde(rename = "M4c")]
    pub m4c: f64,
    #[serde(rename = "M2k0c")]
    pub m2k0c: f64,
    #[serde(rename = "W1_to_ansatz")]
    pub w1_to_ansatz: f64,
    pub mass_drift: f64,
    pub min_value: f64,
    #[serde(rename = "M3c")]
    pub m3c: f64,
    /// Mean path started from `M1(0)`.
    #[serde(rename = "Zbar_eps")]
    pub zbar_eps: f64,
    /// Mean path started from `x0`.
    #[serde(rename = "Zbar")]
    pub zbar: f64,
    pub rho_limit: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "I_m")]
    pub selection: f64,
}

/// Outcome of the pointwise and integral a priori bounds, checked at every
/// recorded sample. `None` when the bound does not apply to the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantFlags {
    pub positivity: bool,
    pub l1_ceiling: Option<bool>,
    pub pointwise_ceiling: Option<bool>,
    pub floor: Option<bool>,
    pub xk_bound: Option<bool>,
    pub max_mass_drift: f64,
    pub max_projection_gap: f64,
    pub max_multiplier_gap: f64,
    pub min_ratio: f64,
}

impl InvariantFlags {
    pub fn all_ok(&self) -> bool {
        self.positivity
            && [self.l1_ceiling, self.pointwise_ceiling, self.floor, self.xk_bound]
                .iter()
                .all(|f| f.unwrap_or(true))
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: RunConfig,
    pub grid: TraitGrid,
    pub dt: f64,
    pub steps: usize,
    pub rows: Vec<TrajectoryRow>,
    pub flags: InvariantFlags,
    pub mean_path: MeanPath,
    pub limit_path: MeanPath,
    pub initial: SimulationState,
    pub last: SimulationState,
    /// Probability densities at the recorded times, if requested.
    pub states: Vec<Density>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    pub keep_states: bool,
    /// Overrides the segregation kernel variance (fault injection only).
    pub kernel_variance_scale: Option<f64>,
}

pub fn initial_state(cfg: &RunConfig, grid: TraitGrid) -> Result<SimulationState> {
    let sd = cfg.initial.v0.sqrt() * cfg.epsilon;
    let g = gaussian_profile(cfg.initial.x0, sd, &grid)?;
    let q = normalize(&g)?;
    let (values, rho) = match cfg.model {
        ModelKind::SexualRenormalized => (q.into_values(), cfg.initial.rho0),
        _ => (
            q.into_values().into_iter().map(|v| v * cfg.initial.rho0).collect(),
            cfg.initial.rho0,
        ),
    };
    Ok(SimulationState {
        t: 0.0,
        values,
        rho,
        epsilon: cfg.epsilon,
        model: cfg.model,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Trajectory> {
    simulate_with(cfg, SimulateOptions::default())
}

struct Bounds {
    n0: Vec<f64>,
    ceiling: f64,
    gamma_sup: f64,
    xk0: f64,
    ck: f64,
}

impl Bounds {
    fn new(cfg: &RunConfig, grid: &TraitGrid, n0: &[f64]) -> Self {
        let mass0 = grid.trapezoid(n0);
        let kernel = SegregationKernel::new(cfg.epsilon);
        let wk = |x: f64| (1.0 + x.abs()).powi(XK_EXPONENT);
        // ‖w_k Γ_ε‖_{L¹} by quadrature on a fine symmetric grid
        let half = kernel.window();
        let kg = TraitGrid::new(-half, half, 4001).expect("kernel grid");
        let kv: Vec<f64> = kg.nodes().map(|x| wk(x) * kernel.eval(x)).collect();
        Bounds {
            n0: n0.to_vec(),
            ceiling: mass0.max(cfg.r / cfg.kappa),
            gamma_sup: kernel.sup_norm(),
            xk0: grid.integrate_with(n0, wk),
            ck: 3.0 * cfg.r * kg.trapezoid(&kv),
        }
    }
}

const BOUND_SLACK: f64 = 1e-9;

pub fn simulate_with(cfg: &RunConfig, opts: SimulateOptions) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let kernel = match opts.kernel_variance_scale {
        Some(s) => SegregationKernel::with_variance_scale(cfg.epsilon, s),
        None => SegregationKernel::new(cfg.epsilon),
    };
    let stepper = Stepper::with_kernel(cfg, grid, kernel)?;
    let state0 = initial_state(cfg, grid)?;
    let q0 = state0.probability(grid)?;
    let m1_0 = extract_moments(&q0, cfg.k0)?.mean;
    let mean_path = integrate_mean_ode(&cfg.mortality, m1_0, cfg.t_end, MEAN_ODE_DT, PathVariant::EpsilonInitialized)?;
    let limit_path = integrate_mean_ode(&cfg.mortality, cfg.initial.x0, cfg.t_end, MEAN_ODE_DT, PathVariant::Limit)?;

    let nominal = cfg.nominal_dt();
    let steps = (cfg.t_end / nominal).ceil() as usize;
    let dt = if steps == 0 { 0.0 } else { cfg.t_end / steps as f64 };

    let is_full_sexual = cfg.model == ModelKind::SexualFull;
    let has_mass = cfg.model != ModelKind::SexualRenormalized;
    let bounds = Bounds::new(cfg, &grid, &state0.values);
    let scale = cfg.epsilon.powi(cfg.model.time_scale_power());

    let mut flags = InvariantFlags {
        positivity: true,
        l1_ceiling: has_mass.then_some(true),
        pointwise_ceiling: is_full_sexual.then_some(true),
        floor: is_full_sexual.then_some(true),
        xk_bound: is_full_sexual.then_some(true),
        max_mass_drift: 0.0,
        max_projection_gap: 0.0,
        max_multiplier_gap: 0.0,
        min_ratio: 0.0,
    };

    let mut rows = Vec::new();
    let mut states = Vec::new();
    let mut pending_drift = 0.0f64;
    let mut truncated = 0usize;

    let mut record = |state: &SimulationState, drift: f64, flags: &mut InvariantFlags| -> Result<()> {
        let q = state.probability(grid)?;
        let mv = extract_moments(&q, cfg.k0)?;
        truncated += mv.tail_warning as usize;
        let zbar_eps = mean_path.at(state.t);
        let zbar = limit_path.at(state.t);
        let ansatz = gaussian_profile(zbar_eps, cfg.epsilon, &grid)?;
        let sel = grid.integrate_with_values(q.values(), stepper.m_values());
        let max = state.values.iter().copied().fold(0.0, f64::max);
        let min = state.values.iter().copied().fold(f64::INFINITY, f64::min);
        flags.positivity &= min >= -NEG_REL * max;
        flags.min_ratio = flags.min_ratio.min(min / max);
        let tau = state.t / scale;
        if has_mass {
            let mass = grid.trapezoid(&state.values);
            if mass > bounds.ceiling * (1.0 + 1e-8) {
                flags.l1_ceiling = Some(false);
            }
        }
        if is_full_sexual {
            let top = cfg.r * bounds.gamma_sup * bounds.ceiling * tau;
            let mut ceil_ok = true;
            let mut floor_ok = true;
            for (i, &v) in state.values.iter().enumerate() {
                let n0 = bounds.n0[i];
                if v > (n0 + top) * (1.0 + BOUND_SLACK) {
                    ceil_ok = false;
                }
                let fl = n0 * (-(stepper.m_values()[i] + cfg.kappa * bounds.ceiling) * tau).exp();
                if v < fl * (1.0 - BOUND_SLACK) {
                    floor_ok = false;
                }
            }
            let xk = grid.integrate_with(&state.values, |x| (1.0 + x.abs()).powi(XK_EXPONENT));
            let xk_ok = xk <= bounds.xk0 * (bounds.ck * tau).exp() * (1.0 + BOUND_SLACK);
            flags.pointwise_ceiling = flags.pointwise_ceiling.map(|f| f && ceil_ok);
            flags.floor = flags.floor.map(|f| f && floor_ok);
            flags.xk_bound = flags.xk_bound.map(|f| f && xk_ok);
        }
        rows.push(TrajectoryRow {
            t: state.t,
            rho: state.rho,
            m1: mv.mean,
            m2c: mv.central[2],
            m4c: mv.central[4],
            m2k0c: mv.central[2 * cfg.k0],
            w1_to_ansatz: wasserstein1(&q, &ansatz)?,
            mass_drift: drift,
            min_value: min,
            m3c: mv.central[3],
            zbar_eps,
            zbar,
            rho_limit: rho_limit_value(&cfg.mortality, zbar, cfg.r, cfg.kappa)?,
            f1: f1_exact(&q, &cfg.mortality)?,
            f2: f2_exact(&q, &cfg.mortality)?,
            selection: sel,
        });
        if opts.keep_states {
            states.push(q);
        }
        Ok(())
    };

    record(&state0, 0.0, &mut flags)?;
    let mut state = state0.clone();
    for k in 1..=steps {
        let (next, info) = stepper.step(&state, dt)?;
        pending_drift = pending_drift.max(info.mass_drift);
        flags.max_mass_drift = flags.max_mass_drift.max(info.mass_drift);
        flags.max_projection_gap = flags.max_projection_gap.max((info.projection_factor - 1.0).abs());
        flags.max_multiplier_gap = flags.max_multiplier_gap.max(info.multiplier_gap);
        state = next;
        // pin the clock to the grid of steps to avoid accumulated rounding
        state.t = k as f64 * dt;
        if k % cfg.output_stride == 0 || k == steps {
            record(&state, pending_drift, &mut flags)?;
            pending_drift = 0.0;
        }
    }
    drop(record);
    if truncated > 0 {
        log::warn!(
            "ε = {}: {truncated} of {} samples have non-negligible mass near the grid edge",
            cfg.epsilon,
            rows.len()
        );
    }
    if flags.max_multiplier_gap > 0.0 {
        log::debug!("largest |λ - ∫ m q| = {:.3e}", flags.max_multiplier_gap);
    }
    Ok(Trajectory {
        config: cfg.clone(),
        grid,
        dt,
        steps,
        rows,
        flags,
        mean_path,
        limit_path,
        initial: state0,
        last: state,
        states,
    })
}

/// Convenience: mortality-weighted mass `∫ m v` used by diagnostics.
pub fn mortality_moment(m: &MortalitySpec, d: &Density) -> Result<f64> {
    let ms = m.sample(d.grid())?;
    Ok(d.grid().integrate_with_values(d.values(), &ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridSpec;

    #[test]
    fn weights_series_matches_closed_form() {
        for z in [1e-3 * 0.999, 1.0001e-3, -9.99e-4] {
            let (e, p1, p2) = exp_weights(z);
            let em1 = (-z).exp_m1();
            assert!((e - (-z).exp()).abs() < 1e-15);
            assert!((p1 + em1 / z).abs() < 1e-12);
            assert!((p2 - (z + em1) / (z * z)).abs() < 1e-9);
        }
        let (_, p1, p2) = exp_weights(0.0);
        assert_eq!((p1, p2), (1.0, 0.5));
        for z in [0.01, 0.5, 3.0, 40.0, -0.5] {
            let (_, p1, p2) = exp_weights(z);
            assert!(p1 >= p2 && p2 >= 0.0);
        }
    }

    #[test]
    fn logistic_exact() {
        let (rho, a, k): (f64, f64, f64) = (0.5, 2.0, 1.0);
        for tau in [0.0f64, 0.1, 1.0, 10.0] {
            let expect = a * rho / (k * rho + (a - k * rho) * (-a * tau).exp());
            assert!((logistic(rho, a, k, tau) - expect).abs() < 1e-14);
        }
        assert!((logistic(1.0, 0.0, 1.0, 2.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    fn zero_m_config(model: ModelKind) -> RunConfig {
        RunConfig {
            model,
            mortality: MortalitySpec::constant(0.0),
            epsilon: 0.2,
            t_end: 0.2,
            initial: crate::config::InitialData { x0: 0.1, v0: 1.0, rho0: 2.0 },
            grid: GridSpec { n_points: 512, x_min: Some(-3.0), x_max: Some(3.0), margin: 0.0 },
            ..RunConfig::default()
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        // m = 0, ρ* = r/κ: n = ρ* g_ε is an exact equilibrium
        for model in [ModelKind::SexualFull, ModelKind::SexualRenormalized] {
            let cfg = zero_m_config(model);
            let tr = simulate(&cfg).unwrap();
            let first = &tr.initial.values;
            let last = &tr.last.values;
            let peak = first.iter().copied().fold(0.0, f64::max);
            let err = first.iter().zip(last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err / peak < 1e-8 * cfg.t_end, "{model:?}: {err}");
            assert!(tr.flags.all_ok());
        }
    }

    #[test]
    fn zero_duration_echoes_initial_state() {
        let mut cfg = RunConfig::default();
        cfg.t_end = 0.0;
        let tr = simulate(&cfg).unwrap();
        assert_eq!(tr.rows.len(), 1);
        assert_eq!(tr.last, tr.initial);
    }

    #[test]
    fn zero_mass_config_rejected() {
        let mut cfg = RunConfig::default();
        cfg.initial.rho0 = 0.0;
        assert!(matches!(simulate(&cfg), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn mean_relaxes_monotonically() {
        let cfg = RunConfig {
            epsilon: 0.2,
            grid: GridSpec { n_points: 512, ..GridSpec::default() },
            ..RunConfig::default()
        };
        let tr = simulate(&cfg).unwrap();
        assert!(tr.rows.windows(2).all(|w| w[1].m1 < w[0].m1));
        assert!(tr.flags.all_ok(), "{:?}", tr.flags);
        let last = tr.rows.last().unwrap();
        assert!((last.m1 - last.zbar_eps).abs() < 0.05);
    }

    #[test]
    fn renormalized_conserves_mass() {
        let cfg = RunConfig {
            model: ModelKind::SexualRenormalized,
            epsilon: 0.2,
            t_end: 0.3,
            grid: GridSpec { n_points: 512, ..GridSpec::default() },
            ..RunConfig::default()
        };
        let tr = simulate(&cfg).unwrap();
        assert!(tr.flags.max_mass_drift < 1e-12);
        assert!(tr.flags.max_projection_gap < 1e-12);
        // the multiplier tracks ∫ m q to the order of the scheme
        assert!(tr.flags.max_multiplier_gap < 1e-2, "{}", tr.flags.max_multiplier_gap);
    }

    #[test]
    fn asexual_mass_follows_logistic_ceiling() {
        let cfg = RunConfig {
            model: ModelKind::AsexualFull,
            epsilon: 0.1,
            t_end: 0.5,
            grid: GridSpec { n_points: 512, x_min: Some(-1.5), x_max: Some(1.5), margin: 0.0 },
            ..RunConfig::default()
        };
        let tr = simulate(&cfg).unwrap();
        assert_eq!(tr.flags.l1_ceiling, Some(true));
        assert!(tr.flags.positivity);
    }
}
