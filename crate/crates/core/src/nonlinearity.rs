//! Superlinear nonlinearity `f`, its truncation `f~ = min{f, a s}`, the
//! spatial cutoff `chi` and the composite `g(x, s) = chi f + (1 - chi) f~`.
//!
//! `f` is restricted to positive combinations of powers `sum c_i s^q_i`, so
//! primitives and derivatives are exact and the crossover with `a s` is
//! unique (`f(s)/s` is strictly increasing).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::golden_section;

/// Number of log-spaced samples used by the hypothesis checks.
pub const HYPOTHESIS_SAMPLES: usize = 10_000;
/// Sampling window `[10^-6, 10^3]` for the hypothesis checks.
pub const SAMPLE_WINDOW: (f64, f64) = (1e-6, 1e3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    PurePower,
    SumOfPowers,
}

/// `f(s) = sum_i c_i s^{q_i}` for `s >= 0`, extended by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Ambrosetti-Rabinowitz exponent.
    pub mu: f64,
    /// Subcritical witness exponent used by the growth bound.
    pub p: f64,
}

impl NonlinearitySpec {
    /// `f(s) = s^q` with the sharp AR exponent `mu = q + 1`.
    pub fn pure_power(q: f64) -> Self {
        Self {
            kind: NonlinearityKind::PurePower,
            exponents: vec![q],
            coefficients: vec![1.0],
            mu: q + 1.0,
            p: q,
        }
    }

    /// `f(s) = sum c_i s^{q_i}` with `mu = min(q_i) + 1` and `p = max(q_i)`.
    pub fn sum_of_powers(terms: &[(f64, f64)]) -> Self {
        let exponents: Vec<f64> = terms.iter().map(|t| t.1).collect();
        let coefficients = terms.iter().map(|t| t.0).collect();
        let qmin = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
        let qmax = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self {
            kind: NonlinearityKind::SumOfPowers,
            exponents,
            coefficients,
            mu: qmin + 1.0,
            p: qmax,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.exponents.is_empty() || self.exponents.len() != self.coefficients.len() {
            return Err(Error::Config(
                "nonlinearity needs matching, non-empty exponents and coefficients".into(),
            ));
        }
        if self.kind == NonlinearityKind::PurePower && self.exponents.len() != 1 {
            return Err(Error::Config("pure_power takes exactly one exponent".into()));
        }
        let critical = if dim >= 3 {
            (dim as f64 + 2.0) / (dim as f64 - 2.0)
        } else {
            f64::INFINITY
        };
        for (&q, &c) in self.exponents.iter().zip(&self.coefficients) {
            if !(q > 1.0 && q < critical) {
                return Err(Error::Config(format!(
                    "exponent {q} outside (1, {critical}) for N = {dim}"
                )));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("coefficient {c} must be positive")));
            }
        }
        let qmin = self.min_exponent();
        if !(self.mu > 2.0 && self.mu <= qmin + 1.0) {
            return Err(Error::Config(format!(
                "mu = {} must lie in (2, {}]",
                self.mu,
                qmin + 1.0
            )));
        }
        if !(self.p > 1.0 && self.p < critical) {
            return Err(Error::Config(format!(
                "p = {} outside (1, {critical}) for N = {dim}",
                self.p
            )));
        }
        Ok(())
    }

    pub fn min_exponent(&self) -> f64 {
        self.exponents.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(&q, &c)| c * s.powf(q))
            .sum()
    }

    /// `F(s) = int_0^s f`.
    #[inline]
    pub fn primitive(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(&q, &c)| c * s.powf(q + 1.0) / (q + 1.0))
            .sum()
    }

    /// One-sided derivative, zero for `s < 0`.
    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(&q, &c)| c * q * s.powf(q - 1.0))
            .sum()
    }

    /// Largest `r` with `f~ = f` on `(0, r)`: the unique root of `f(s) = a s`.
    pub fn crossover_threshold(&self, a: f64) -> Result<f64> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NoCrossover { a });
        }
        if self.exponents.len() == 1 {
            let (q, c) = (self.exponents[0], self.coefficients[0]);
            return Ok((a / c).powf(1.0 / (q - 1.0)));
        }
        let h = |s: f64| self.f(s) / s - a;
        let mut hi = 1.0;
        let mut guard = 0;
        while h(hi) <= 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::NoCrossover { a });
            }
        }
        let mut lo = 0.0;
        while hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Smallest constant `C` with `|f(s)| <= delta |s| + C |s|^p` on the
    /// sampling window.
    pub fn growth_constant(&self, delta: f64) -> Result<f64> {
        growth_constant_of(|s| self.f(s), delta, self.p)
    }

    /// Ambrosetti-Rabinowitz check `0 < mu F(s) <= s f(s)` on the log grid.
    pub fn check_ambrosetti_rabinowitz(&self) -> ArReport {
        let mut max_ratio: f64 = 0.0;
        let mut positive = true;
        let mut violation = None;
        for s in log_grid(SAMPLE_WINDOW.0, SAMPLE_WINDOW.1, HYPOTHESIS_SAMPLES) {
            let lhs = self.mu * self.primitive(s);
            let rhs = s * self.f(s);
            if lhs <= 0.0 {
                positive = false;
            }
            let ratio = lhs / rhs;
            if ratio > 1.0 + 1e-12 && violation.is_none() {
                violation = Some(s);
            }
            max_ratio = max_ratio.max(ratio);
        }
        ArReport {
            mu: self.mu,
            max_ratio,
            holds: positive && violation.is_none(),
            strict: positive && max_ratio < 1.0 - 1e-12,
            violation,
        }
    }
}

/// Outcome of the Ambrosetti-Rabinowitz sampling check.
#[derive(Debug, Clone, Serialize)]
pub struct ArReport {
    pub mu: f64,
    /// `max_s mu F(s) / (s f(s))`; equals 1 when `mu = q + 1` for a pure power.
    pub max_ratio: f64,
    pub holds: bool,
    pub strict: bool,
    pub violation: Option<f64>,
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
}

/// Sampled `sup_s (|f(s)| - delta s) / s^p`, clamped at zero, and checked.
pub fn growth_constant_of(f: impl Fn(f64) -> f64, delta: f64, p: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("growth bound needs delta > 0, got {delta}")));
    }
    let ratio = |s: f64| (f(s).abs() - delta * s) / s.powf(p);
    let grid: Vec<f64> = log_grid(SAMPLE_WINDOW.0, SAMPLE_WINDOW.1, HYPOTHESIS_SAMPLES).collect();
    let (best, mut c) = grid
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, ratio(s)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    // refine an interior maximum between its neighbouring samples
    if best > 0 && best + 1 < grid.len() {
        let (_, neg) = golden_section(|s| -ratio(s), grid[best - 1], grid[best + 1], 100);
        c = c.max(-neg);
    }
    let c = c.max(0.0);
    verify_growth_bound(f, delta, c, p)?;
    Ok(c)
}

/// Checks `|f(s)| <= delta |s| + C |s|^p` on the sampling window.
pub fn verify_growth_bound(f: impl Fn(f64) -> f64, delta: f64, c: f64, p: f64) -> Result<()> {
    for s in log_grid(SAMPLE_WINDOW.0, SAMPLE_WINDOW.1, HYPOTHESIS_SAMPLES) {
        let bound = delta * s + c * s.powf(p);
        if f(s).abs() > bound * (1.0 + 1e-12) {
            return Err(Error::GrowthViolation { delta, constant: c, s });
        }
    }
    Ok(())
}

/// Truncation slope and the radii `R0 < ... < R4` of the balls `B_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub a: f64,
    pub radii: [f64; 5],
    pub alpha1: f64,
}

impl TruncationParams {
    /// Default slope `a = 0.9 (1 - 2/mu) alpha1`.
    pub fn default_slope(mu: f64, alpha1: f64) -> f64 {
        0.9 * (1.0 - 2.0 / mu) * alpha1
    }

    pub fn validate(&self, mu: f64) -> Result<()> {
        let bound = (1.0 - 2.0 / mu) * self.alpha1;
        if !(self.a > 0.0 && self.a < bound) {
            return Err(Error::Config(format!(
                "truncation slope violates 0 < a < (1 - 2/mu) alpha1: a = {}, bound = {bound}",
                self.a
            )));
        }
        if self.radii[0] <= 0.0 || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "radii must be positive and strictly increasing: {:?}",
                self.radii
            )));
        }
        Ok(())
    }

    /// Cutoff `chi`: 1 on `B1`, linear ramp on `B2 \ B1`, 0 outside `B2`.
    #[inline]
    pub fn chi_radial(&self, r: f64) -> f64 {
        let (r1, r2) = (self.radii[1], self.radii[2]);
        if r <= r1 {
            1.0
        } else if r >= r2 {
            0.0
        } else {
            (r2 - r) / (r2 - r1)
        }
    }

    pub fn chi(&self, x: &[f64]) -> f64 {
        self.chi_radial(norm(x))
    }

    /// Gradient of `chi` (one-sided on the spheres `|x| = R1, R2`, taken as
    /// the interior value).
    pub fn grad_chi(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let (r1, r2) = (self.radii[1], self.radii[2]);
        if r <= r1 || r >= r2 {
            return vec![0.0; x.len()];
        }
        x.iter().map(|xi| -xi / (r * (r2 - r1))).collect()
    }

    pub fn chi_lipschitz(&self) -> f64 {
        1.0 / (self.radii[2] - self.radii[1])
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `f`, the slope `a` and the cached crossover data.
#[derive(Debug, Clone)]
pub struct Truncated {
    pub spec: NonlinearitySpec,
    pub a: f64,
    pub r: f64,
    big_f_r: f64,
}

impl Truncated {
    pub fn new(spec: NonlinearitySpec, a: f64) -> Result<Self> {
        let r = spec.crossover_threshold(a)?;
        let big_f_r = spec.primitive(r);
        Ok(Self { spec, a, r, big_f_r })
    }

    /// `f~(s) = min{f(s), a s}` for `s >= 0`, zero otherwise.
    #[inline]
    pub fn ftilde(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            self.spec.f(s).min(self.a * s)
        }
    }

    #[inline]
    pub fn primitive_tilde(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s < self.r {
            self.spec.primitive(s)
        } else {
            self.big_f_r + 0.5 * self.a * (s * s - self.r * self.r)
        }
    }

    #[inline]
    pub fn derivative_tilde(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s < self.r {
            self.spec.derivative(s)
        } else {
            self.a
        }
    }

    /// `g` at a point where the cutoff takes the value `chi`.
    ///
    /// Where `chi = 1` or `s < r` the result is `f(s)` through the same
    /// arithmetic path as [`NonlinearitySpec::f`].
    #[inline]
    pub fn g(&self, chi: f64, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if chi >= 1.0 || s < self.r {
            self.spec.f(s)
        } else if chi <= 0.0 {
            self.a * s
        } else {
            chi * self.spec.f(s) + (1.0 - chi) * self.a * s
        }
    }

    #[inline]
    pub fn big_g(&self, chi: f64, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if chi >= 1.0 || s < self.r {
            self.spec.primitive(s)
        } else if chi <= 0.0 {
            self.primitive_tilde(s)
        } else {
            chi * self.spec.primitive(s) + (1.0 - chi) * self.primitive_tilde(s)
        }
    }

    /// `d/ds g`, using the active branch of `f~` at the kink `s = r`.
    #[inline]
    pub fn g_derivative(&self, chi: f64, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if chi >= 1.0 || s < self.r {
            self.spec.derivative(s)
        } else if chi <= 0.0 {
            self.a
        } else {
            chi * self.spec.derivative(s) + (1.0 - chi) * self.a
        }
    }
}

/// The composite nonlinearity `g(x, s)` together with its cutoff geometry.
#[derive(Debug, Clone)]
pub struct Composite {
    pub trunc: Truncated,
    pub params: TruncationParams,
}

impl Composite {
    pub fn new(spec: NonlinearitySpec, params: TruncationParams) -> Result<Self> {
        params.validate(spec.mu)?;
        Ok(Self {
            trunc: Truncated::new(spec, params.a)?,
            params,
        })
    }

    pub fn g(&self, x: &[f64], s: f64) -> f64 {
        self.trunc.g(self.params.chi(x), s)
    }

    pub fn big_g(&self, x: &[f64], s: f64) -> f64 {
        self.trunc.big_g(self.params.chi(x), s)
    }

    /// `g_eps(x, s) = g(eps x, s)`.
    pub fn g_eps(&self, eps: f64, x: &[f64], s: f64) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| eps * v).collect();
        self.g(&y, s)
    }

    pub fn big_g_eps(&self, eps: f64, x: &[f64], s: f64) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| eps * v).collect();
        self.big_g(&y, s)
    }
}

/// One item of the truncation property suite.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub detail: String,
}

/// Runs the five truncation properties on `samples` random draws:
/// `F~ <= min{a s^2/2, F}`, `f~ = f` below `r`, `G <= F`, `g = f` when
/// `|s| < r` or `x in B1`, and the growth bound for `f`, `f~` and `g`.
pub fn truncation_property_suite(
    comp: &Composite,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Vec<PropertyCheck> {
    let t = &comp.trunc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_max = 10.0 * t.r.max(1.0);
    let x_max = 1.5 * comp.params.radii[4];
    let draw_s = |rng: &mut ChaCha8Rng| rng.gen_range(-1.0..s_max);
    let draw_x = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-x_max..x_max)).collect()
    };
    let tol = |v: f64| 1e-12 * (1.0 + v.abs());

    let mut worst1: f64 = f64::NEG_INFINITY;
    for _ in 0..samples {
        let s = draw_s(&mut rng);
        let bound = (0.5 * t.a * s * s).min(t.spec.primitive(s));
        worst1 = worst1.max(t.primitive_tilde(s) - bound - tol(bound));
    }

    let mut worst2: f64 = 0.0;
    for _ in 0..samples {
        let s = rng.gen_range(0.0..t.r);
        worst2 = worst2.max((t.ftilde(s) - t.spec.f(s)).abs());
    }

    let mut worst3: f64 = f64::NEG_INFINITY;
    for _ in 0..samples {
        let (x, s) = (draw_x(&mut rng), draw_s(&mut rng));
        let big_f = t.spec.primitive(s);
        worst3 = worst3.max(comp.big_g(&x, s) - big_f - tol(big_f));
    }

    let mut worst4: f64 = 0.0;
    for i in 0..samples {
        let (x, s) = if i % 2 == 0 {
            // inside B1, any s
            let mut x = draw_x(&mut rng);
            let r = norm(&x);
            let target = rng.gen_range(0.0..comp.params.radii[1]);
            if r > 0.0 {
                x.iter_mut().for_each(|v| *v *= target / r);
            }
            (x, draw_s(&mut rng))
        } else {
            (draw_x(&mut rng), rng.gen_range(-t.r..t.r))
        };
        worst4 = worst4.max((comp.g(&x, s) - t.spec.f(s)).abs());
    }

    let delta = 0.1;
    let p = t.spec.p;
    let fg = t
        .spec
        .growth_constant(delta)
        .and_then(|c| {
            verify_growth_bound(|s| t.ftilde(s), delta, c, p)?;
            for _ in 0..samples.min(200) {
                let x = draw_x(&mut rng);
                let chi = comp.params.chi(&x);
                verify_growth_bound(|s| t.g(chi, s), delta, c, p)?;
            }
            Ok(c)
        });

    vec![
        PropertyCheck {
            name: "Ftilde <= min(a s^2 / 2, F)",
            passed: worst1 <= 0.0,
            worst: worst1,
            detail: format!("{samples} samples"),
        },
        PropertyCheck {
            name: "ftilde = f on (0, r)",
            passed: worst2 == 0.0,
            worst: worst2,
            detail: format!("r = {}", t.r),
        },
        PropertyCheck {
            name: "G(x, s) <= F(s)",
            passed: worst3 <= 0.0,
            worst: worst3,
            detail: format!("{samples} samples"),
        },
        PropertyCheck {
            name: "g = f for |s| < r or x in B1",
            passed: worst4 == 0.0,
            worst: worst4,
            detail: format!("{samples} samples"),
        },
        match fg {
            Ok(c) => PropertyCheck {
                name: "growth bound for f, ftilde, g",
                passed: true,
                worst: c,
                detail: format!("delta = {delta}, C_delta = {c}"),
            },
            Err(e) => PropertyCheck {
                name: "growth bound for f, ftilde, g",
                passed: false,
                worst: f64::NAN,
                detail: e.to_string(),
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic() -> NonlinearitySpec {
        NonlinearitySpec::pure_power(3.0)
    }

    fn params(a: f64) -> TruncationParams {
        TruncationParams {
            a,
            radii: [0.2, 1.0, 1.2, 1.4, 1.6],
            alpha1: 0.88,
        }
    }

    #[test]
    fn cubic_values() {
        let f = cubic();
        assert_eq!(f.f(2.0), 8.0);
        assert_eq!(f.primitive(2.0), 4.0);
        assert_eq!(f.derivative(2.0), 12.0);
        assert_eq!(f.f(-1.0), 0.0);
        assert_eq!(f.primitive(-1.0), 0.0);
        assert_eq!(f.derivative(-1.0), 0.0);
    }

    #[test]
    fn ar_identity_for_mu_three() {
        let mut f = cubic();
        f.mu = 3.0;
        for s in [0.1, 1.0, 7.5] {
            let lhs = f.mu * f.primitive(s);
            assert!((lhs - 0.75 * s * f.f(s)).abs() < 1e-12 * lhs);
            assert!(lhs < s * f.f(s));
        }
        let rep = f.check_ambrosetti_rabinowitz();
        assert!(rep.holds && rep.strict);
        let sharp = cubic().check_ambrosetti_rabinowitz();
        assert!(sharp.holds && !sharp.strict);
    }

    #[test]
    fn truncation_branches() {
        let t = Truncated::new(cubic(), 0.25).unwrap();
        assert_eq!(t.r, 0.5);
        assert!((t.ftilde(0.3) - 0.027).abs() < 1e-15);
        assert_eq!(t.ftilde(1.0), 0.25);
        // continuity of the piecewise primitive at r
        let below = t.primitive_tilde(0.5 - 1e-12);
        let above = t.primitive_tilde(0.5);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn crossover_pure_power() {
        assert_eq!(cubic().crossover_threshold(0.25).unwrap(), 0.5);
        assert!((cubic().crossover_threshold(0.04).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            cubic().crossover_threshold(0.0),
            Err(Error::NoCrossover { .. })
        ));
    }

    #[test]
    fn crossover_mixed_matches_bisection_oracle() {
        let spec = NonlinearitySpec::sum_of_powers(&[(0.5, 3.0), (0.5, 5.0)]);
        // oracle: closed form of 0.5 r^2 + 0.5 r^4 = 0.1 in r^2
        let r2 = (-0.5 + (0.25f64 + 4.0 * 0.5 * 0.1).sqrt()) / (2.0 * 0.5);
        let r = spec.crossover_threshold(0.1).unwrap();
        assert!((r - r2.sqrt()).abs() < 1e-14, "{r} vs {}", r2.sqrt());
        // the threshold separates the two branches of min{f, a s}
        assert!(spec.f(0.99 * r) < 0.1 * 0.99 * r);
        assert!(spec.f(1.01 * r) > 0.1 * 1.01 * r);
    }

    #[test]
    fn chi_profile() {
        let p = params(0.3);
        assert_eq!(p.chi(&[0.0, 0.0]), 1.0);
        assert!((p.chi(&[1.1, 0.0]) - 0.5).abs() < 1e-12);
        assert_eq!(p.chi(&[0.0, 2.2]), 0.0);
    }

    #[test]
    fn composite_reduces_to_f() {
        let c = Composite::new(cubic(), params(0.25)).unwrap();
        assert_eq!(c.g(&[0.5, 0.1], 3.0), 27.0);
        assert_eq!(c.g(&[5.0, 0.0], 0.4), cubic().f(0.4));
        assert_eq!(c.g(&[5.0, 0.0], 3.0), 0.75);
        // scaled variant
        assert_eq!(c.g_eps(0.1, &[5.0, 0.0], 3.0), 27.0);
    }

    #[test]
    fn growth_constants() {
        let c = cubic().growth_constant(0.1).unwrap();
        assert!(c <= 1.0 && c > 0.999);
        verify_growth_bound(|s| cubic().f(s), 0.1, 1.0, 3.0).unwrap();

        // oracle: maximise (s^3 - 0.1 s)/s^4 = 1/s - 0.1/s^3, stationary at s^2 = 0.3
        let mut spec = cubic();
        spec.p = 4.0;
        let s = 0.3f64.sqrt();
        let oracle = 1.0 / s - 0.1 / s.powi(3);
        let c4 = spec.growth_constant(0.1).unwrap();
        assert!((c4 - oracle).abs() < 1e-10 * oracle, "{c4} vs {oracle}");

        let looser = spec.growth_constant(0.2).unwrap();
        assert!(looser <= c4);

        assert!(matches!(
            verify_growth_bound(|s| s * s * s, 0.1, 0.5, 3.0),
            Err(Error::GrowthViolation { .. })
        ));
    }

    #[test]
    fn slope_validation() {
        let p = params(0.5);
        assert!(p.validate(4.0).is_err());
        let mut bad = params(0.3);
        bad.radii = [0.2, 0.1, 1.2, 1.4, 1.6];
        assert!(bad.validate(4.0).is_err());
        assert!(params(0.3).validate(4.0).is_ok());
    }

    #[test]
    fn property_suite_passes_for_default() {
        let c = Composite::new(cubic(), params(0.39)).unwrap();
        for check in truncation_property_suite(&c, 2, 10_000, 7) {
            assert!(check.passed, "{check:?}");
        }
    }

    #[test]
    fn validation_rejects_supercritical() {
        assert!(NonlinearitySpec::pure_power(5.0).validate(3).is_err());
        assert!(NonlinearitySpec::pure_power(3.0).validate(3).is_ok());
        let mut s = cubic();
        s.mu = 4.5;
        assert!(s.validate(2).is_err());
    }

    proptest! {
        #[test]
        fn ftilde_below_f_and_slope(s in 0.0f64..50.0, a in 0.01f64..2.0) {
            let t = Truncated::new(NonlinearitySpec::sum_of_powers(&[(0.5, 3.0), (0.5, 5.0)]), a).unwrap();
            prop_assert!(t.ftilde(s) <= t.spec.f(s));
            prop_assert!(t.ftilde(s) <= a * s);
            let bound = (0.5 * a * s * s).min(t.spec.primitive(s));
            prop_assert!(t.primitive_tilde(s) <= bound * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn ar_inequality(s in 1e-6f64..1e3) {
            let f = cubic();
            prop_assert!(f.mu * f.primitive(s) <= s * f.f(s) * (1.0 + 1e-14));
        }

        #[test]
        fn g_monotone_in_radius(r1 in 0.0f64..2.0, r2 in 0.0f64..2.0, s in 0.0f64..5.0) {
            let c = Composite::new(cubic(), params(0.25)).unwrap();
            let (near, far) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            // f >= f~, so g decreases in |x| as chi does
            prop_assert!(c.g(&[near, 0.0], s) >= c.g(&[far, 0.0], s) - 1e-12);
            prop_assert!(c.g(&[0.0, 3.0], s) == c.trunc.ftilde(s).max(0.0) || s <= 0.0 || (c.g(&[0.0, 3.0], s) - c.trunc.ftilde(s)).abs() < 1e-14);
        }

        #[test]
        fn chi_is_lipschitz(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0) {
            let p = params(0.25);
            let dist = ((a - c).powi(2) + (b - d).powi(2)).sqrt();
            let diff = (p.chi(&[a, b]) - p.chi(&[c, d])).abs();
            prop_assert!(diff <= p.chi_lipschitz() * dist + 1e-12);
        }
    }
}
