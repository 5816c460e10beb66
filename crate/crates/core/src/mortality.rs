//! Mortality rates `m(x)` with analytic derivatives and a grid-based check of
//! the structural hypotheses the asymptotic analysis relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TraitGrid;

/// Functional form of the mortality rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MortalityKind {
    /// `s * x^2`
    Quadratic { s: f64 },
    /// `a * x^2 + b * x^4`, `a, b > 0`
    QuarticWell { a: f64, b: f64 },
    /// `a * x^2 * (x - d)^2`: two global minima (value 0) at `0` and `d`.
    DoubleWell { a: f64, d: f64 },
    /// `m = c` everywhere. Degenerate (fails the convexity hypothesis) but
    /// handy for exact-solution tests.
    Constant { c: f64 },
    /// Natural cubic spline through `(xs[i], values[i])`.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

/// Mortality rate plus the constants of the structural hypotheses: the
/// convexity window `(-l_window, l_window)` with lower curvature `a0`, and the
/// growth control `|m''(x)| <= am (1 + |x|^growth_exponent)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalitySpec {
    pub kind: MortalityKind,
    pub l_window: f64,
    pub a0: f64,
    pub am: f64,
    pub growth_exponent: u32,
    #[serde(skip)]
    spline: Option<CubicSpline>,
}

impl MortalitySpec {
    pub fn new(kind: MortalityKind, l_window: f64, a0: f64, am: f64, growth_exponent: u32) -> Result<Self> {
        let mut spec = MortalitySpec {
            kind,
            l_window,
            a0,
            am,
            growth_exponent,
            spline: None,
        };
        spec.prepare()?;
        Ok(spec)
    }

    /// `s x^2` with the natural constants `A0 = Am = 2s`, growth exponent 1.
    pub fn quadratic(s: f64, l_window: f64) -> Self {
        MortalitySpec::new(MortalityKind::Quadratic { s }, l_window, 2.0 * s, 2.0 * s, 1)
            .expect("quadratic spec is always valid")
    }

    /// `a x^2 + b x^4`: `m'' = 2a + 12 b x^2`, so `A0 = 2a` and
    /// `Am = max(2a, 12b)` with growth exponent 2.
    pub fn quartic_well(a: f64, b: f64, l_window: f64) -> Self {
        MortalitySpec::new(
            MortalityKind::QuarticWell { a, b },
            l_window,
            2.0 * a,
            (2.0 * a).max(12.0 * b),
            2,
        )
        .expect("quartic spec is always valid")
    }

    pub fn constant(c: f64) -> Self {
        MortalitySpec::new(MortalityKind::Constant { c }, 1.0, 0.0, 1.0, 1).expect("constant spec")
    }

    /// Builds derived state (the spline of the tabulated kind) and checks
    /// parameter sanity. Called after deserialization.
    pub fn prepare(&mut self) -> Result<()> {
        match &self.kind {
            MortalityKind::Quadratic { s } if !(*s > 0.0) => {
                return Err(Error::ConfigInvalid(format!("quadratic mortality needs s > 0, got {s}")))
            }
            MortalityKind::QuarticWell { a, b } if !(*a > 0.0 && *b > 0.0) => {
                return Err(Error::ConfigInvalid("quartic-well mortality needs a, b > 0".into()))
            }
            MortalityKind::DoubleWell { a, d } if !(*a > 0.0 && *d != 0.0) => {
                return Err(Error::ConfigInvalid("double-well mortality needs a > 0, d != 0".into()))
            }
            MortalityKind::Tabulated { xs, values } => {
                self.spline = Some(CubicSpline::natural(xs, values)?);
            }
            _ => {}
        }
        if !(self.l_window > 0.0) {
            return Err(Error::ConfigInvalid(format!("l_window must be > 0, got {}", self.l_window)));
        }
        Ok(())
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, MortalityKind::Tabulated { .. })
    }

    fn spline(&self) -> &CubicSpline {
        self.spline
            .as_ref()
            .expect("tabulated mortality used before prepare()")
    }

    pub fn eval_m(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            MortalityKind::Quadratic { s } => s * x * x,
            MortalityKind::QuarticWell { a, b } => {
                let x2 = x * x;
                a * x2 + b * x2 * x2
            }
            MortalityKind::DoubleWell { a, d } => {
                let y = x * (x - d);
                a * y * y
            }
            MortalityKind::Constant { c } => *c,
            MortalityKind::Tabulated { .. } => self.spline().eval(x, 0)?,
        })
    }

    pub fn eval_m_prime(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            MortalityKind::Quadratic { s } => 2.0 * s * x,
            MortalityKind::QuarticWell { a, b } => 2.0 * a * x + 4.0 * b * x * x * x,
            // d/dx a (x^2 - d x)^2 = 2a (x^2 - d x)(2x - d)
            MortalityKind::DoubleWell { a, d } => 2.0 * a * x * (x - d) * (2.0 * x - d),
            MortalityKind::Constant { .. } => 0.0,
            MortalityKind::Tabulated { .. } => self.spline().eval(x, 1)?,
        })
    }

    pub fn eval_m_second(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            MortalityKind::Quadratic { s } => 2.0 * s,
            MortalityKind::QuarticWell { a, b } => 2.0 * a + 12.0 * b * x * x,
            // 2a [(2x - d)^2 + 2 (x^2 - d x)]
            MortalityKind::DoubleWell { a, d } => {
                2.0 * a * ((2.0 * x - d).powi(2) + 2.0 * x * (x - d))
            }
            MortalityKind::Constant { .. } => 0.0,
            MortalityKind::Tabulated { .. } => self.spline().eval(x, 2)?,
        })
    }

    /// `m` sampled at every grid node.
    pub fn sample(&self, grid: &TraitGrid) -> Result<Vec<f64>> {
        grid.nodes().map(|x| self.eval_m(x)).collect()
    }
}

/// Outcome of [`validate_hypotheses`]; failures are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `m >= 0` on the grid and `min m` within 1e-10 of zero.
    pub h0: bool,
    /// `m'(0) = 0` and `m'' >= A0` at nodes of `(-L, L)`.
    pub h1: bool,
    /// `max_{[-L, L]} m < r`.
    pub h2: bool,
    /// `|m''| <= Am (1 + |x|^p)` at nodes.
    pub h3: bool,
    pub max_m_window: f64,
    /// `r (1 - 2 / 4^k0) - max_{[-L, L]} m`.
    pub eta: f64,
    pub eta_positive: bool,
    /// `k0 > 3 + ceil(p / 2)`.
    pub order_ok: bool,
}

impl HypothesisReport {
    pub fn apriori_ok(&self) -> bool {
        self.eta_positive && self.order_ok
    }

    pub fn all_ok(&self) -> bool {
        self.h0 && self.h1 && self.h2 && self.h3 && self.apriori_ok()
    }
}

pub fn validate_hypotheses(spec: &MortalitySpec, r: f64, k0: u32, grid: &TraitGrid) -> Result<HypothesisReport> {
    assert!(k0 >= 1, "k0 must be >= 1");
    let l = spec.l_window;
    // the minimum sits at 0 under H1, which need not be a grid node
    let mut min_m = spec.eval_m(0.0)?;
    let mut h1 = spec.eval_m_prime(0.0)?.abs() <= 1e-12;
    let mut h3 = true;
    for x in grid.nodes() {
        let m = spec.eval_m(x)?;
        min_m = min_m.min(m);
        let m2 = spec.eval_m_second(x)?;
        if x.abs() < l && m2 < spec.a0 {
            h1 = false;
        }
        let bound = spec.am * (1.0 + x.abs().powi(spec.growth_exponent as i32));
        if m2.abs() > bound * (1.0 + 1e-12) {
            h3 = false;
        }
    }
    if !(spec.a0 > 0.0) {
        h1 = false;
    }
    let h0 = min_m >= -1e-14 && min_m.abs() <= 1e-10;

    // max over [-L, L]: interior nodes plus both endpoints
    let mut max_m_window = spec.eval_m(-l)?.max(spec.eval_m(l)?);
    for x in grid.nodes().filter(|x| x.abs() <= l) {
        max_m_window = max_m_window.max(spec.eval_m(x)?);
    }
    let h2 = max_m_window < r;
    let eta = r * (1.0 - 2.0 / 4f64.powi(k0 as i32)) - max_m_window;
    let order_ok = k0 > 3 + spec.growth_exponent.div_ceil(2);
    Ok(HypothesisReport {
        h0,
        h1,
        h2,
        h3,
        max_m_window,
        eta,
        eta_positive: eta > 0.0,
        order_ok,
    })
}

/// Natural cubic spline with exact piecewise-polynomial derivatives.
#[derive(Debug, Clone, PartialEq)]
struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m2: Vec<f64>,
}

impl CubicSpline {
    fn natural(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::ConfigInvalid(
                "tabulated mortality needs >= 3 knots and matching values".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::ConfigInvalid("tabulated knots must be strictly increasing".into()));
        }
        // Thomas algorithm for the interior second derivatives
        let mut m2 = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let a = h0;
            let b = 2.0 * (h0 + h1);
            let c = h1;
            let d = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m2[i] = d_prime[i] - c_prime[i] * m2[i + 1];
        }
        Ok(CubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m2,
        })
    }

    fn eval(&self, x: f64, derivative: u8) -> Result<f64> {
        let (lo, hi) = (self.xs[0], *self.xs.last().unwrap());
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfTable { x, lo, hi });
        }
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, self.xs.len() - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (y0, y1, s0, s1) = (self.ys[i], self.ys[i + 1], self.m2[i], self.m2[i + 1]);
        Ok(match derivative {
            0 => a * y0 + b * y1 + ((a * a * a - a) * s0 + (b * b * b - b) * s1) * h * h / 6.0,
            1 => (y1 - y0) / h - (3.0 * a * a - 1.0) * h * s0 / 6.0 + (3.0 * b * b - 1.0) * h * s1 / 6.0,
            _ => a * s0 + b * s1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn quadratic_values() {
        let m = MortalitySpec::quadratic(1.0, 1.0);
        assert_eq!(m.eval_m(2.0).unwrap(), 4.0);
        assert_eq!(m.eval_m_prime(2.0).unwrap(), 4.0);
        assert_eq!(m.eval_m_second(2.0).unwrap(), 2.0);
    }

    #[test]
    fn quartic_flat_at_origin() {
        let m = MortalitySpec::quartic_well(1.0, 0.25, 1.0);
        assert_eq!(m.eval_m_prime(0.0).unwrap(), 0.0);
    }

    #[test]
    fn half_quadratic_unit_curvature() {
        let m = MortalitySpec::quadratic(0.5, 100.0);
        assert_eq!(m.a0, 1.0);
        let g = make_grid(-50.0, 50.0, 1001).unwrap();
        for x in g.nodes() {
            assert_eq!(m.eval_m_second(x).unwrap(), 1.0);
        }
        assert!(validate_hypotheses(&m, 1e4, 5, &g).unwrap().h1);
    }

    #[test]
    fn hypotheses_pass_example() {
        let m = MortalitySpec::quadratic(1.0, 0.5);
        let g = make_grid(-3.0, 3.0, 1024).unwrap();
        let rep = validate_hypotheses(&m, 2.0, 4, &g).unwrap();
        assert_eq!(rep.max_m_window, 0.25);
        assert_eq!(rep.eta, 2.0 * (1.0 - 2.0 / 256.0) - 0.25);
        assert!((rep.eta - 1.734375).abs() < 1e-15);
        assert!(rep.eta_positive);
        assert!(rep.h0 && rep.h1 && rep.h2 && rep.h3);
        // k0 = 4 does not satisfy the strict order condition 4 > 3 + ceil(1/2)
        assert!(!rep.order_ok);
        assert!(validate_hypotheses(&m, 2.0, 5, &g).unwrap().apriori_ok());
    }

    #[test]
    fn hypotheses_h2_fail() {
        let m = MortalitySpec::quadratic(10.0, 1.0);
        let g = make_grid(-3.0, 3.0, 1024).unwrap();
        let rep = validate_hypotheses(&m, 1.0, 4, &g).unwrap();
        assert!((rep.max_m_window - 10.0).abs() < 1e-12);
        assert!(!rep.h2);
    }

    #[test]
    fn hypotheses_order_fail() {
        let m = MortalitySpec::quadratic(1.0, 0.5);
        let g = make_grid(-3.0, 3.0, 256).unwrap();
        let rep = validate_hypotheses(&m, 2.0, 2, &g).unwrap();
        assert!(!rep.order_ok);
        assert!(!rep.apriori_ok());
    }

    #[test]
    fn constant_fails_convexity() {
        let m = MortalitySpec::constant(0.0);
        let g = make_grid(-3.0, 3.0, 64).unwrap();
        let rep = validate_hypotheses(&m, 2.0, 5, &g).unwrap();
        assert!(rep.h0);
        assert!(!rep.h1);
    }

    #[test]
    fn double_well_two_minima() {
        let m = MortalitySpec::new(MortalityKind::DoubleWell { a: 2.0, d: 1.5 }, 0.2, 1.0, 60.0, 2).unwrap();
        assert_eq!(m.eval_m(0.0).unwrap(), 0.0);
        assert_eq!(m.eval_m(1.5).unwrap(), 0.0);
        assert_eq!(m.eval_m_prime(0.0).unwrap(), 0.0);
        // m''(0) = 2 a d^2
        assert!((m.eval_m_second(0.0).unwrap() - 9.0).abs() < 1e-12);
        let g = make_grid(-2.0, 3.0, 512).unwrap();
        let rep = validate_hypotheses(&m, 2.0, 5, &g).unwrap();
        assert!(rep.h0 && rep.h1);
    }

    #[test]
    fn bis_chain_holds() {
        // A0 x^2/2 <= m(x) - m(0) on (-L, L) and the global polynomial ceiling
        let g = make_grid(-4.0, 4.0, 801).unwrap();
        for spec in [
            MortalitySpec::quadratic(1.0, 0.7),
            MortalitySpec::quartic_well(1.0, 0.25, 1.0),
        ] {
            let p = spec.growth_exponent as i32;
            let m0 = spec.eval_m(0.0).unwrap();
            for x in g.nodes() {
                let dm = spec.eval_m(x).unwrap() - m0;
                let ax = x.abs();
                if ax < spec.l_window {
                    assert!(spec.a0 * x * x / 2.0 <= dm + 1e-12);
                }
                let ceil = spec.am * (x * x / 2.0 + ax.powi(p + 2) / ((p + 1) * (p + 2)) as f64);
                assert!(dm <= ceil + 1e-12, "x={x} dm={dm} ceil={ceil}");
            }
        }
    }

    #[test]
    fn finite_difference_derivative_second_order() {
        let specs = [
            MortalitySpec::quadratic(1.3, 1.0),
            MortalitySpec::quartic_well(0.7, 0.4, 1.0),
            MortalitySpec::new(MortalityKind::DoubleWell { a: 1.0, d: 1.2 }, 0.3, 0.5, 40.0, 2).unwrap(),
        ];
        for spec in &specs {
            // max FD error at spacing h and h/2; the ratio should be ~4
            let err = |h: f64| {
                (-40..=40)
                    .map(|k| k as f64 * 0.05)
                    .map(|x| {
                        let fd = (spec.eval_m(x + h).unwrap() - spec.eval_m(x - h).unwrap()) / (2.0 * h);
                        (fd - spec.eval_m_prime(x).unwrap()).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let (h, e1) = (1e-2, err(1e-2));
            let c = e1 / (h * h);
            let e2 = err(h / 2.0);
            // quadratics differentiate exactly up to rounding
            if e1 > 1e-9 {
                assert!(e2 <= c * (h / 2.0).powi(2) * 1.05, "{e1} {e2}");
            }
        }
    }

    #[test]
    fn tabulated_matches_quadratic_in_interior() {
        let xs: Vec<f64> = (0..=80).map(|i| -2.0 + i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let spec = MortalitySpec::new(
            MortalityKind::Tabulated { xs, values: ys },
            0.5,
            1.5,
            3.0,
            1,
        )
        .unwrap();
        assert!((spec.eval_m(0.3).unwrap() - 0.09).abs() < 1e-4);
        assert!((spec.eval_m_prime(0.3).unwrap() - 0.6).abs() < 1e-3);
        assert!((spec.eval_m_second(0.0).unwrap() - 2.0).abs() < 1e-2);
        assert!(matches!(spec.eval_m(2.5), Err(Error::OutOfTable { .. })));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = MortalitySpec::quadratic(1.0, 0.7);
        let text = toml::to_string(&spec).unwrap();
        let mut back: MortalitySpec = toml::from_str(&text).unwrap();
        back.prepare().unwrap();
        assert_eq!(back, spec);
    }
}
