//! ε-sweeps and log-log rate fits.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dynamics::{simulate, Trajectory};
use crate::error::{Error, Result};
use crate::suite::CheckResult;

pub const DEFAULT_EPSILONS: [f64; 7] = [0.4, 0.28, 0.2, 0.14, 0.1, 0.07, 0.05];
pub const DEFAULT_BETA: f64 = 1.5;
/// Burn-in `t* = factor * ε² / r`.
pub const DEFAULT_T_STAR_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    /// `sup_t W1(q_ε, g_ε)`
    #[serde(rename = "sup_W1")]
    pub sup_w1: f64,
    /// `sup_t |M1 - Z̄_ε|`
    pub sup_mean_err: f64,
    /// `sup_{t >= t*} |M2c - ε²|`
    pub sup_var_err: f64,
    /// `sup_t M2k0c / ε^{2 k0}`
    pub sup_high_moment_ratio: f64,
    /// `sup_{t >= ε^β} |ρ_ε - (r - m(Z̄))/κ|`
    pub rho_err: f64,
    /// `ok`, or the error that stopped this run.
    pub status: String,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(epsilon: f64, why: String) -> Self {
        SweepRecord {
            epsilon,
            sup_w1: f64::NAN,
            sup_mean_err: f64::NAN,
            sup_var_err: f64::NAN,
            sup_high_moment_ratio: f64::NAN,
            rho_err: f64::NAN,
            status: why,
        }
    }

    pub fn field(&self, f: SweepField) -> f64 {
        match f {
            SweepField::SupW1 => self.sup_w1,
            SweepField::SupMeanErr => self.sup_mean_err,
            SweepField::SupVarErr => self.sup_var_err,
            SweepField::SupHighMomentRatio => self.sup_high_moment_ratio,
            SweepField::RhoErr => self.rho_err,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepField {
    SupW1,
    SupMeanErr,
    SupVarErr,
    SupHighMomentRatio,
    RhoErr,
}

impl SweepField {
    pub const ALL: [SweepField; 5] = [
        SweepField::SupW1,
        SweepField::SupMeanErr,
        SweepField::SupVarErr,
        SweepField::SupHighMomentRatio,
        SweepField::RhoErr,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepField::SupW1 => "sup_W1",
            SweepField::SupMeanErr => "sup_mean_err",
            SweepField::SupVarErr => "sup_var_err",
            SweepField::SupHighMomentRatio => "sup_high_moment_ratio",
            SweepField::RhoErr => "rho_err",
        }
    }
}

impl std::str::FromStr for SweepField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown sweep field `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: n,
    })
}

/// Fits `ln field` against `ln ε` over the successful records.
pub fn fit_rate(records: &[SweepRecord], field: SweepField) -> Result<RateFit> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: ok.len(),
        });
    }
    for r in &ok {
        let v = r.field(field);
        if !(v > 0.0) {
            return Err(Error::NonPositiveValues {
                field: field.name().into(),
                epsilon: r.epsilon,
                value: v,
            });
        }
    }
    let xs: Vec<f64> = ok.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = ok.iter().map(|r| r.field(field)).collect();
    fit_log_log(&xs, &ys)
}

/// Same fit after dropping the `drop` largest ε values.
pub fn fit_rate_window(records: &[SweepRecord], field: SweepField, drop: usize) -> Result<RateFit> {
    let mut sorted: Vec<SweepRecord> = records.iter().filter(|r| r.is_ok()).cloned().collect();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    fit_rate(&sorted[drop.min(sorted.len())..], field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub beta: f64,
    pub t_star_factor: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            beta: DEFAULT_BETA,
            t_star_factor: DEFAULT_T_STAR_FACTOR,
        }
    }
}

/// Reduces a trajectory to the sweep error fields.
pub fn summarize(tr: &Trajectory, params: &SweepParams) -> SweepRecord {
    let cfg = &tr.config;
    let eps = cfg.epsilon;
    let t_star = params.t_star_factor * eps * eps / cfg.r;
    let t_rho = eps.powf(params.beta);
    let scale = eps.powi(2 * cfg.k0 as i32);
    let mut rec = SweepRecord {
        epsilon: eps,
        sup_w1: 0.0,
        sup_mean_err: 0.0,
        sup_var_err: 0.0,
        sup_high_moment_ratio: 0.0,
        rho_err: 0.0,
        status: "ok".into(),
    };
    for row in &tr.rows {
        rec.sup_w1 = rec.sup_w1.max(row.w1_to_ansatz);
        rec.sup_mean_err = rec.sup_mean_err.max((row.m1 - row.zbar_eps).abs());
        if row.t >= t_star {
            rec.sup_var_err = rec.sup_var_err.max((row.m2c - eps * eps).abs());
        }
        rec.sup_high_moment_ratio = rec.sup_high_moment_ratio.max(row.m2k0c / scale);
        if row.t >= t_rho {
            rec.rho_err = rec.rho_err.max((row.rho - row.rho_limit).abs());
        }
    }
    rec
}

/// Sweep table of a harness configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Strictly descending.
    pub epsilons: Vec<f64>,
    pub beta: f64,
    pub t_star_factor: f64,
    /// Largest ε values left out of the gated fits.
    pub fit_drop: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: DEFAULT_EPSILONS.to_vec(),
            beta: DEFAULT_BETA,
            t_star_factor: DEFAULT_T_STAR_FACTOR,
            fit_drop: 2,
        }
    }
}

impl SweepConfig {
    pub fn params(&self) -> SweepParams {
        SweepParams {
            beta: self.beta,
            t_star_factor: self.t_star_factor,
        }
    }
}

pub const MEAN_RATE_MIN: f64 = 0.8;
pub const VAR_RATE_MIN: f64 = 2.7;
pub const HIGH_MOMENT_SPREAD_MAX: f64 = 10.0;
pub const W1_RATE_MIN: f64 = 0.8;
pub const W1_R2_MIN: f64 = 0.98;
pub const RHO_RATE_MIN: f64 = 0.8;

/// Rate gates over the fit window that drops the `drop` largest ε, plus the
/// run status and invariant flags of every ε.
pub fn sweep_gates(out: &SweepOutput, drop: usize) -> Vec<CheckResult> {
    let fit = |name: &str, field: SweepField| {
        fit_rate_window(&out.records, field, drop).map_err(|e| CheckResult::failed(name, &e))
    };
    let mut gates = Vec::new();
    let slope_gate = |name: &str, field: SweepField, min: f64| match fit(name, field) {
        Ok(f) => CheckResult::lower(name, f.slope, min),
        Err(c) => c,
    };
    gates.push(slope_gate("mean_rate", SweepField::SupMeanErr, MEAN_RATE_MIN));
    gates.push(slope_gate("variance_rate", SweepField::SupVarErr, VAR_RATE_MIN));
    gates.push(slope_gate("w1_rate", SweepField::SupW1, W1_RATE_MIN));
    gates.push(match fit("w1_r_squared", SweepField::SupW1) {
        Ok(f) => CheckResult::lower("w1_r_squared", f.r_squared, W1_R2_MIN),
        Err(c) => c,
    });
    gates.push(slope_gate("rho_rate", SweepField::RhoErr, RHO_RATE_MIN));
    let ratios: Vec<f64> = out
        .records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| r.sup_high_moment_ratio)
        .collect();
    let spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    gates.push(CheckResult::upper(
        "high_moment_spread",
        if ratios.is_empty() { f64::NAN } else { spread },
        HIGH_MOMENT_SPREAD_MAX,
    ));
    let failed_runs = out.records.iter().filter(|r| !r.is_ok()).count();
    gates.push(CheckResult::upper("failed_runs", failed_runs as f64, 0.0));
    let broken = out.invariants_ok.iter().filter(|ok| !**ok).count();
    gates.push(CheckResult::upper("invariant_violations", broken as f64, 0.0));
    gates
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    /// Wall-clock seconds per ε, kept apart from the records so that the
    /// records stay reproducible.
    pub runtime_seconds: Vec<f64>,
    pub invariants_ok: Vec<bool>,
}

/// One simulation per ε (run concurrently), with failures isolated per ε.
pub fn run_sweep(base: &RunConfig, epsilons: &[f64], params: &SweepParams) -> Result<SweepOutput> {
    if epsilons.len() < 3 {
        return Err(Error::Precondition(format!(
            "a sweep needs at least 3 epsilon values, got {}",
            epsilons.len()
        )));
    }
    if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Precondition("sweep epsilons must be strictly descending".into()));
    }
    if !(params.beta > 1.0 && params.beta < 2.0) {
        return Err(Error::Precondition(format!("beta must lie in (1, 2), got {}", params.beta)));
    }
    let configs: Vec<RunConfig> = epsilons
        .iter()
        .map(|&eps| RunConfig {
            epsilon: eps,
            ..base.clone()
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
        let grid = cfg.build_grid()?;
        if cfg.epsilon < 4.0 * grid.spacing() {
            return Err(Error::UnderResolved {
                epsilon: cfg.epsilon,
                spacing: grid.spacing(),
            });
        }
    }
    let results: Vec<(SweepRecord, f64, bool)> = configs
        .par_iter()
        .map(|cfg| {
            let start = Instant::now();
            let outcome = catch_unwind(AssertUnwindSafe(|| simulate(cfg)));
            let elapsed = start.elapsed().as_secs_f64();
            match outcome {
                Ok(Ok(tr)) => (summarize(&tr, params), elapsed, tr.flags.all_ok()),
                Ok(Err(e)) => {
                    log::error!("epsilon {}: {e}", cfg.epsilon);
                    (SweepRecord::failed(cfg.epsilon, e.to_string()), elapsed, false)
                }
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into());
                    log::error!("epsilon {}: panicked: {msg}", cfg.epsilon);
                    (SweepRecord::failed(cfg.epsilon, format!("panic: {msg}")), elapsed, false)
                }
            }
        })
        .collect();
    Ok(SweepOutput {
        records: results.iter().map(|r| r.0.clone()).collect(),
        runtime_seconds: results.iter().map(|r| r.1).collect(),
        invariants_ok: results.iter().map(|r| r.2).collect(),
    })
}

pub fn write_records_csv<W: std::io::Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<SweepRecord> {
        DEFAULT_EPSILONS
            .iter()
            .map(|&e| SweepRecord {
                epsilon: e,
                sup_w1: f(e),
                sup_mean_err: f(e),
                sup_var_err: f(e),
                sup_high_moment_ratio: f(e),
                rho_err: f(e),
                status: "ok".into(),
            })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_rate(&synthetic(|e| e), SweepField::SupW1).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_rate(&synthetic(|e| 3.0 * e.powi(3)), SweepField::RhoErr).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        let w = fit_rate_window(&synthetic(|e| e * e), SweepField::SupVarErr, 2).unwrap();
        assert_eq!(w.points, 5);
    }

    #[test]
    fn zero_entry_rejected() {
        let mut recs = synthetic(|e| e);
        recs[3].rho_err = 0.0;
        assert!(matches!(fit_rate(&recs, SweepField::RhoErr), Err(Error::NonPositiveValues { .. })));
    }

    #[test]
    fn sweep_guards() {
        let base = RunConfig::default();
        let p = SweepParams::default();
        assert!(matches!(run_sweep(&base, &[0.2], &p), Err(Error::Precondition(_))));
        assert!(matches!(run_sweep(&base, &[0.1, 0.2, 0.3], &p), Err(Error::Precondition(_))));
        let mut coarse = base.clone();
        coarse.grid.n_points = 64;
        coarse.grid.x_min = Some(-2.0);
        coarse.grid.x_max = Some(2.0);
        let h = 4.0 / 63.0;
        assert!(matches!(
            run_sweep(&coarse, &[0.5, 0.3, 2.0 * h], &p),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn gates_on_synthetic_rates() {
        let mut recs = synthetic(|e| e * e * e);
        recs.iter_mut().for_each(|r| r.sup_high_moment_ratio = 945.0);
        let out = SweepOutput {
            invariants_ok: vec![true; recs.len()],
            runtime_seconds: vec![0.0; recs.len()],
            records: recs,
        };
        let gates = sweep_gates(&out, 2);
        assert!(gates.iter().all(|g| g.pass), "{gates:?}");
        let mut slow = out.clone();
        slow.records.iter_mut().for_each(|r| r.sup_var_err = r.epsilon * r.epsilon);
        slow.invariants_ok[0] = false;
        let failed: Vec<String> = sweep_gates(&slow, 2).into_iter().filter(|g| !g.pass).map(|g| g.check_name).collect();
        assert_eq!(failed, ["variance_rate", "invariant_violations"]);
    }

    #[test]
    fn csv_round_trip() {
        let recs = synthetic(|e| e * 0.5);
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), recs);
    }
}
