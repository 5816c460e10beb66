//! Validation suite: named pass/fail checks over operators, moments,
//! dynamics and transport.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridSpec, ModelKind, RunConfig};
use crate::dynamics::{simulate, simulate_with, SimulateOptions, Stepper, Trajectory, TrajectoryRow};
use crate::error::{Error, Result};
use crate::grid::{make_grid, TraitGrid};
use crate::limit::gaussian_profile;
use crate::moments::{
    asexual_moment_residuals, extract_moments, moment_ode_residuals, predict_t_moment, AsexualResidualRow,
    KernelMoments,
};
use crate::mortality::{validate_hypotheses, MortalitySpec};
use crate::operators::{apply_t_fast, apply_t_reference, MixingOperator, MutationKernel, SegregationKernel};
use crate::random::{random_density, BumpMixture, random_mean_matched_pair, seeded_rng, DEFAULT_SEED};
use crate::sweep::DEFAULT_EPSILONS;
use crate::transport::{contraction_check, CONTRACTION_TOL};

pub const KERNEL_MOMENT_TOL: f64 = 1e-8;
pub const FIXED_POINT_TOL: f64 = 1e-6;
pub const REFERENCE_TOL: f64 = 1e-10;
pub const PREDICT_TOL: f64 = 1e-6;
pub const SECOND_MOMENT_TOL: f64 = 1e-9;
pub const FUBINI_TOL: f64 = 1e-10;
pub const MASS_DRIFT_TOL: f64 = 1e-8;
pub const RESIDUAL_FACTOR: f64 = 5.0;
pub const TRANSIENT_TOL: f64 = 1e-4;
pub const ASEXUAL_CONTRAST_MIN: f64 = 0.10;
pub const SEXUAL_LOCKING_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub random_densities: usize,
    pub tanaka_pairs: usize,
    /// ε values of the fixed-point and kernel-moment checks.
    pub epsilons: Vec<f64>,
    /// Physical setup of the dynamic checks. Not read from the suite table;
    /// callers set it from the shared run configuration.
    #[serde(skip)]
    pub run: RunConfig,
    /// Variance multiplier of the kernel inspected by `kernel_moments`.
    /// Values other than 1 inject a fault into that check alone.
    pub kernel_variance_scale: f64,
    pub transient_epsilons: Vec<f64>,
    pub transient_dt_factor: f64,
    /// Sampling of the sexual moment residual runs.
    pub residual_dt_factor: f64,
    pub residual_stride: usize,
    pub asexual_epsilon: f64,
    pub asexual_selection: Vec<f64>,
    pub asexual_dt_factor: f64,
    pub asexual_stride: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: DEFAULT_SEED,
            random_densities: 50,
            tanaka_pairs: 100,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            run: RunConfig::default(),
            kernel_variance_scale: 1.0,
            transient_epsilons: vec![0.2, 0.1],
            transient_dt_factor: 0.02,
            residual_dt_factor: 0.02,
            residual_stride: 50,
            asexual_epsilon: 0.04,
            asexual_selection: vec![1.0, 4.0],
            asexual_dt_factor: 0.01,
            asexual_stride: 50,
        }
    }
}

impl SuiteConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.into()));
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("suite epsilons must be a nonempty list of positive values");
        }
        if !(self.kernel_variance_scale > 0.0) {
            return bad("kernel_variance_scale must be positive");
        }
        if self.residual_stride == 0 || self.asexual_stride == 0 {
            return bad("strides must be >= 1");
        }
        for v in [self.transient_dt_factor, self.residual_dt_factor, self.asexual_dt_factor, self.asexual_epsilon] {
            if !(v > 0.0) {
                return bad("step factors and asexual_epsilon must be positive");
            }
        }
        self.run.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check_name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub(crate) fn upper(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult {
            check_name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
        }
    }

    pub(crate) fn lower(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult {
            check_name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
        }
    }

    pub(crate) fn failed(name: &str, err: &Error) -> Self {
        log::error!("check {name}: {err}");
        CheckResult {
            check_name: name.into(),
            pass: false,
            value: f64::NAN,
            threshold: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check_name == name)
    }

    /// `check_name,pass,value,threshold`, one line per check, with header.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for c in &self.checks {
            wr.serialize(c)?;
        }
        wr.flush()?;
        Ok(())
    }
}

type Group = fn(&SuiteConfig) -> Vec<CheckResult>;

fn guard(names: &[&str], f: impl FnOnce() -> Result<Vec<CheckResult>>) -> Vec<CheckResult> {
    f().unwrap_or_else(|e| names.iter().map(|n| CheckResult::failed(n, &e)).collect())
}

pub fn run_validation_suite(cfg: &SuiteConfig) -> SuiteReport {
    let groups: [Group; 10] = [
        kernel_checks,
        fixed_point_checks,
        reference_checks,
        algebra_checks,
        conservation_checks,
        tanaka_checks,
        residual_checks,
        asexual_checks,
        hypothesis_checks,
        transient_checks,
    ];
    let checks = groups.par_iter().map(|g| g(cfg)).collect::<Vec<_>>().concat();
    SuiteReport { checks }
}

fn run_grid(run: &RunConfig, epsilon: f64) -> Result<TraitGrid> {
    RunConfig {
        epsilon,
        ..run.clone()
    }
    .build_grid()
}

/// Discrete mass, variance and fourth moment of the sampled kernel at the
/// convolution step, against `1`, `ε²/2`, `3ε⁴/4`.
fn kernel_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["kernel_moments"], || {
        let mut worst = 0.0f64;
        for &eps in &cfg.epsilons {
            let step = run_grid(&cfg.run, eps)?.spacing() / 2.0;
            let kernel = SegregationKernel::with_variance_scale(eps, cfg.kernel_variance_scale);
            let (samples, half) = kernel.sample(step);
            let moment = |p: i32| -> f64 {
                samples
                    .iter()
                    .enumerate()
                    .map(|(i, v)| step * v * ((i as f64 - half as f64) * step).powi(p))
                    .sum()
            };
            let km = KernelMoments::new(eps, 2);
            for (p, want) in [(0, 1.0), (2, km.even_moment(1)), (4, km.even_moment(2))] {
                worst = worst.max((moment(p) - want).abs() / want);
            }
        }
        Ok(vec![CheckResult::upper("kernel_moments", worst, KERNEL_MOMENT_TOL)])
    })
}

fn fixed_point_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["fixed_point"], || {
        let mut worst = 0.0f64;
        for &eps in &cfg.epsilons {
            let grid = run_grid(&cfg.run, eps)?;
            let g = gaussian_profile(cfg.run.initial.x0, eps, &grid)?;
            let tg = apply_t_fast(&g, &SegregationKernel::new(eps))?;
            worst = worst.max(tg.sup_distance(&g)? / g.max_value());
        }
        Ok(vec![CheckResult::upper("fixed_point", worst, FIXED_POINT_TOL)])
    })
}

fn reference_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["reference_fast"], || {
        let grid = make_grid(-2.0, 2.0, 128)?;
        let kernel = SegregationKernel::new(0.2);
        let mut rng = seeded_rng(cfg.seed);
        let mut worst = 0.0f64;
        for _ in 0..cfg.random_densities {
            let q = random_density(&grid, &mut rng)?;
            let fast = apply_t_fast(&q, &kernel)?;
            let slow = apply_t_reference(&q, &kernel)?;
            worst = worst.max(fast.sup_distance(&slow)?);
        }
        Ok(vec![CheckResult::upper("reference_fast", worst, REFERENCE_TOL)])
    })
}

/// Binomial-sum prediction against quadrature moments of `T̃_ε[q]` around
/// the mean of `q`, and the closed form of the second moment.
fn algebra_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["predict_moments", "second_moment_identity"], || {
        let eps = 0.2;
        // room for the kernel spread of T̃ beyond the support of q
        let grid = make_grid(-2.5, 2.5, 1024)?;
        let op = MixingOperator::new(grid, SegregationKernel::new(eps));
        let km = KernelMoments::new(eps, 4);
        let mut rng = seeded_rng(cfg.seed.wrapping_add(1));
        let (mut worst, mut worst_id) = (0.0f64, 0.0f64);
        for _ in 0..cfg.random_densities {
            let q = BumpMixture::random_within(&grid, -1.25, 1.25, &mut rng).density(&grid)?;
            let mv = extract_moments(&q, 4)?;
            let tq = op.apply(&q)?;
            for k in 1..=4 {
                let want = predict_t_moment(&mv, k, &km)?;
                let got = grid.integrate_with(tq.values(), |x| (x - mv.mean).powi(2 * k as i32));
                worst = worst.max((got - want).abs() / want);
            }
            let closed = 0.5 * eps * eps + 0.5 * mv.central[2];
            worst_id = worst_id.max((predict_t_moment(&mv, 1, &km)? - closed).abs() / closed);
        }
        Ok(vec![
            CheckResult::upper("predict_moments", worst, PREDICT_TOL),
            CheckResult::upper("second_moment_identity", worst_id, SECOND_MOMENT_TOL),
        ])
    })
}

fn with_model(run: &RunConfig, model: ModelKind) -> RunConfig {
    RunConfig { model, ..run.clone() }
}

/// Renormalized mass drift, the vanishing integral of the renormalized
/// right-hand side, positivity and the a priori bounds of every model.
fn conservation_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let names = ["fubini_integral", "mass_drift", "positivity", "apriori_bounds"];
    guard(&names, || {
        let renorm_cfg = with_model(&cfg.run, ModelKind::SexualRenormalized);
        let grid = renorm_cfg.build_grid()?;
        let stepper = Stepper::new(&renorm_cfg, grid)?;
        let mut rng = seeded_rng(cfg.seed.wrapping_add(2));
        let mut fubini = 0.0f64;
        for _ in 0..cfg.random_densities {
            let q = random_density(&grid, &mut rng)?;
            fubini = fubini.max(stepper.renormalized_rhs_integral(q.values())?.abs());
        }
        let runs: Vec<Trajectory> = [ModelKind::SexualFull, ModelKind::SexualRenormalized, ModelKind::AsexualFull]
            .par_iter()
            .map(|&m| simulate(&with_model(&cfg.run, m)))
            .collect::<Result<_>>()?;
        let drift = runs[1].flags.max_mass_drift;
        let min_ratio = runs.iter().map(|t| t.flags.min_ratio).fold(0.0, f64::min);
        let positive = runs.iter().all(|t| t.flags.positivity);
        let violated = runs
            .iter()
            .flat_map(|t| [t.flags.l1_ceiling, t.flags.pointwise_ceiling, t.flags.floor, t.flags.xk_bound])
            .filter(|f| *f == Some(false))
            .count();
        Ok(vec![
            CheckResult::upper("fubini_integral", fubini, FUBINI_TOL),
            CheckResult::upper("mass_drift", drift, MASS_DRIFT_TOL),
            CheckResult {
                check_name: "positivity".into(),
                pass: positive,
                value: min_ratio,
                threshold: -crate::dynamics::NEG_REL,
            },
            CheckResult::upper("apriori_bounds", violated as f64, 0.0),
        ])
    })
}

fn tanaka_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["tanaka_contraction"], || {
        let grid = make_grid(-2.5, 2.5, 1024)?;
        let op = MixingOperator::new(grid, SegregationKernel::new(cfg.run.epsilon));
        let mut rng = seeded_rng(cfg.seed.wrapping_add(3));
        let mut pairs = Vec::with_capacity(cfg.tanaka_pairs);
        for _ in 0..cfg.tanaka_pairs {
            pairs.push(random_mean_matched_pair(&grid, -1.25, 1.25, &mut rng)?);
        }
        let results: Vec<_> = pairs
            .par_iter()
            .map(|(a, b)| contraction_check(a, b, &op))
            .collect::<Result<_>>()?;
        let passed = results.iter().filter(|c| c.pass).count();
        let excess = results.iter().map(|c| c.lhs - c.rhs).fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![
            CheckResult::upper("tanaka_contraction", excess, CONTRACTION_TOL),
            CheckResult::lower("tanaka_pass_count", passed as f64, cfg.tanaka_pairs as f64),
        ])
    })
}

/// Sexual moment equations. The tolerance at each sample is the
/// finite-difference error estimate plus the change of the residual when the
/// time step is halved, so a residual that does not vanish under refinement
/// fails.
fn residual_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["moment_residuals", "remainder_bounds"], || {
        let coarse_cfg = RunConfig {
            dt_factor: cfg.residual_dt_factor,
            output_stride: cfg.residual_stride,
            ..cfg.run.clone()
        };
        let fine_cfg = RunConfig {
            dt_factor: cfg.residual_dt_factor / 2.0,
            output_stride: 2 * cfg.residual_stride,
            ..cfg.run.clone()
        };
        let opts = SimulateOptions {
            keep_states: true,
            ..Default::default()
        };
        let (coarse, fine) = rayon::join(|| simulate_with(&coarse_cfg, opts), || simulate_with(&fine_cfg, opts));
        let (coarse, fine) = (coarse?, fine?);
        let report = |tr: &Trajectory| {
            let c = &tr.config;
            moment_ode_residuals(&tr.times(), &tr.states, &c.mortality, c.r, c.epsilon, c.k0)
        };
        let (a, b) = (report(&coarse)?, report(&fine)?);
        if a.rows.len() != b.rows.len() {
            return Err(Error::Precondition("refined run is not sampled at the same times".into()));
        }
        let mut worst = 0.0f64;
        for (x, y) in a.rows.iter().zip(&b.rows) {
            let tol1 = x.tol1 + 4.0 / 3.0 * (x.r1 - y.r1).abs();
            let tol2 = x.tol2 + 4.0 / 3.0 * (x.r2 - y.r2).abs();
            worst = worst.max(x.r1.abs() / tol1).max(x.r2.abs() / tol2);
        }
        Ok(vec![
            CheckResult::upper("moment_residuals", worst, RESIDUAL_FACTOR),
            CheckResult::upper("remainder_bounds", a.fitted_c_f1.max(a.fitted_c_f2), 1.0),
        ])
    })
}

pub struct AsexualComparison {
    pub selection: Vec<f64>,
    pub sexual: Vec<Trajectory>,
    pub asexual: Vec<Trajectory>,
}

/// Sexual and asexual runs for each selection strength `s` in
/// `m(x) = s x²`, on a fixed grid wide enough for the asexual variance.
pub fn asexual_comparison(cfg: &SuiteConfig) -> Result<AsexualComparison> {
    if cfg.asexual_selection.len() < 2 {
        return Err(Error::Precondition("asexual comparison needs two selection strengths".into()));
    }
    let l = cfg.run.mortality.l_window;
    let base = RunConfig {
        epsilon: cfg.asexual_epsilon,
        grid: GridSpec {
            x_min: Some(-1.5),
            x_max: Some(1.5),
            ..cfg.run.grid.clone()
        },
        ..cfg.run.clone()
    };
    let sexual_stride = cfg.asexual_stride * (cfg.asexual_dt_factor / (base.dt_factor * base.epsilon)).round().max(1.0) as usize;
    let configs: Vec<RunConfig> = cfg
        .asexual_selection
        .iter()
        .flat_map(|&s| {
            let mut mortality = MortalitySpec::quadratic(s, l);
            mortality.prepare().expect("quadratic mortality");
            [
                RunConfig {
                    model: ModelKind::SexualFull,
                    mortality: mortality.clone(),
                    output_stride: sexual_stride,
                    ..base.clone()
                },
                RunConfig {
                    model: ModelKind::AsexualFull,
                    mortality,
                    dt_factor: cfg.asexual_dt_factor,
                    output_stride: cfg.asexual_stride,
                    ..base.clone()
                },
            ]
        })
        .collect();
    let runs: Vec<Trajectory> = configs.par_iter().map(simulate).collect::<Result<_>>()?;
    let (mut sexual, mut asexual) = (Vec::new(), Vec::new());
    for (i, tr) in runs.into_iter().enumerate() {
        if i % 2 == 0 {
            sexual.push(tr);
        } else {
            asexual.push(tr);
        }
    }
    Ok(AsexualComparison {
        selection: cfg.asexual_selection.clone(),
        sexual,
        asexual,
    })
}

impl AsexualComparison {
    /// Residuals of the asexual moment equations, one list per run.
    pub fn residuals(&self) -> Result<Vec<Vec<AsexualResidualRow>>> {
        self.asexual
            .iter()
            .map(|tr| {
                let c = &tr.config;
                let col = |f: fn(&TrajectoryRow) -> f64| tr.rows.iter().map(f).collect::<Vec<_>>();
                let kernel = MutationKernel::new(c.epsilon, c.asexual.kernel.clone())?;
                asexual_moment_residuals(
                    &tr.times(),
                    &col(|r| r.m1),
                    &col(|r| r.m2c),
                    &col(|r| r.m3c),
                    &col(|r| r.m4c),
                    &c.mortality,
                    c.asexual.mutation_rate,
                    kernel.base_variance(),
                    c.epsilon,
                )
            })
            .collect()
    }

    /// Residual gate, asexual variance gap between the weakest and strongest
    /// selection at the final time, and the sexual variance deviation from ε².
    pub fn checks(&self) -> Result<Vec<CheckResult>> {
        if self.asexual.len() < 2 {
            return Err(Error::Precondition("asexual comparison needs two selection strengths".into()));
        }
        let mut worst = 0.0f64;
        for rows in self.residuals()? {
            for r in rows {
                worst = worst
                    .max(r.mean_residual.abs() / r.tol_mean)
                    .max(r.variance_residual.abs() / r.tol_variance);
            }
        }
        let var_end = |tr: &Trajectory| tr.rows.last().map(|r| r.m2c).unwrap_or(f64::NAN);
        let (lo, hi) = (var_end(&self.asexual[0]), var_end(self.asexual.last().unwrap()));
        let contrast = (lo - hi).abs() / lo.max(hi);
        let locking = self
            .sexual
            .iter()
            .flat_map(|tr| {
                let eps2 = tr.config.epsilon * tr.config.epsilon;
                tr.rows.iter().map(move |r| (r.m2c / eps2 - 1.0).abs())
            })
            .fold(0.0, f64::max);
        Ok(vec![
            CheckResult::upper("asexual_residuals", worst, RESIDUAL_FACTOR),
            CheckResult::lower("asexual_variance_contrast", contrast, ASEXUAL_CONTRAST_MIN),
            CheckResult::upper("sexual_variance_locking", locking, SEXUAL_LOCKING_TOL),
        ])
    }
}

fn asexual_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let names = ["asexual_residuals", "asexual_variance_contrast", "sexual_variance_locking"];
    guard(&names, || asexual_comparison(cfg)?.checks())
}

fn hypothesis_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["hypotheses"], || {
        let run = &cfg.run;
        let grid = run.build_grid()?;
        let rep = validate_hypotheses(&run.mortality, run.r, run.k0 as u32, &grid)?;
        Ok(vec![CheckResult {
            check_name: "hypotheses".into(),
            pass: rep.all_ok(),
            value: rep.eta,
            threshold: 0.0,
        }])
    })
}

/// With `m ≡ 0` the variance relaxes exactly as
/// `ε² + (M2(0) - ε²) exp(-r t / 2ε²)`.
pub fn transient_error(run: &RunConfig, epsilon: f64, dt_factor: f64) -> Result<f64> {
    let mut mortality = MortalitySpec::constant(0.0);
    mortality.prepare()?;
    let mut worst = 0.0f64;
    for model in [ModelKind::SexualFull, ModelKind::SexualRenormalized] {
        let cfg = RunConfig {
            model,
            mortality: mortality.clone(),
            epsilon,
            t_end: 20.0 * epsilon * epsilon / run.r,
            dt_factor,
            output_stride: 1,
            initial: crate::config::InitialData {
                v0: 2.0,
                ..run.initial.clone()
            },
            ..run.clone()
        };
        let tr = simulate(&cfg)?;
        let eps2 = epsilon * epsilon;
        let m0 = tr.rows[0].m2c;
        for row in &tr.rows {
            let exact = eps2 + (m0 - eps2) * (-run.r * row.t / (2.0 * eps2)).exp();
            worst = worst.max((row.m2c - exact).abs() / exact);
        }
    }
    Ok(worst)
}

fn transient_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    guard(&["variance_transient"], || {
        let errs: Vec<f64> = cfg
            .transient_epsilons
            .par_iter()
            .map(|&eps| transient_error(&cfg.run, eps, cfg.transient_dt_factor))
            .collect::<Result<_>>()?;
        let worst = errs.into_iter().fold(0.0, f64::max);
        Ok(vec![CheckResult::upper("variance_transient", worst, TRANSIENT_TOL)])
    })
}
