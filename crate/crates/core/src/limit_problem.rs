//! Radial ground states of the autonomous problem `-Lap U + k U = f(U)`,
//! the action `Phi_k`, the Pohozaev and Nehari residuals, the mountain-pass
//! curve through the ground state and the level map `k -> m_k`.
//!
//! Ground states come from shooting on `U(0)`: a shot *overshoots* when `U`
//! crosses zero and *undershoots* when `U'` turns positive. Bisection drives
//! the two bracketing shots together to machine precision; the trajectory is
//! kept until the shots separate and is continued by the decaying solution
//! `r^-nu K_nu(sqrt(k) r)` of the linearised equation, `nu = N/2 - 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::quadrature::{linear_fit, simpson, sphere_area};

/// Shots are trusted until the two bracketing trajectories differ by this
/// relative amount.
const SEPARATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ShootingOptions {
    /// Outer radius in units of `1/sqrt(k)`.
    pub r_max_scaled: f64,
    pub n_points: usize,
    /// RK4 substeps per grid interval.
    pub substeps: usize,
    pub max_bisections: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            r_max_scaled: 20.0,
            n_points: 4097,
            substeps: 4,
            max_bisections: 200,
        }
    }
}

/// Radial samples `U(r_i)`, `U'(r_i)` on the uniform grid `r_i = i r_max / (n - 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub r_max: f64,
    pub n_points: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub k: f64,
    pub dim: usize,
}

impl RadialProfile {
    /// Builds a profile from values, differentiating with fourth-order
    /// central differences (even extension at `r = 0`).
    pub fn from_values(r_max: f64, dim: usize, k: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        let h = r_max / (n - 1) as f64;
        let at = |i: isize| -> f64 {
            if i < 0 {
                values[(-i) as usize]
            } else if (i as usize) < n {
                values[i as usize]
            } else {
                0.0
            }
        };
        let derivs = (0..n as isize)
            .map(|i| (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h))
            .collect();
        Self {
            r_max,
            n_points: n,
            values,
            derivs,
            k,
            dim,
        }
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.r_max / (self.n_points - 1) as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn scaled(&self, amplitude: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= amplitude);
        out.derivs.iter_mut().for_each(|v| *v *= amplitude);
        out
    }

    /// Cubic Lagrange interpolation on the four nearest nodes, even
    /// reflection at the origin and zero extension past `r_max`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let h = self.spacing();
        let x = r.abs() / h;
        let n = self.n_points;
        if x >= (n - 1) as f64 {
            return 0.0;
        }
        let i = x.floor() as isize;
        let t = x - i as f64;
        let v = |j: isize| -> f64 {
            let j = j.unsigned_abs();
            if j < n {
                self.values[j]
            } else {
                0.0
            }
        };
        let (p0, p1, p2, p3) = (v(i - 1), v(i), v(i + 1), v(i + 2));
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
    }

    /// Simpson quadrature of `S_{N-1} int_0^rmax integrand(U, U') r^{N-1} dr`.
    pub fn integrate(&self, integrand: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.spacing();
        let w = sphere_area(self.dim);
        let samples: Vec<f64> = (0..self.n_points)
            .map(|i| {
                let r = i as f64 * h;
                integrand(self.values[i], self.derivs[i]) * r.powi(self.dim as i32 - 1)
            })
            .collect();
        w * simpson(&samples, h)
    }

    pub fn integrals(&self, spec: &NonlinearitySpec) -> RadialIntegrals {
        RadialIntegrals {
            grad_sq: self.integrate(|_, d| d * d),
            l2_sq: self.integrate(|u, _| u * u),
            f_integral: self.integrate(|u, _| spec.primitive(u)),
            fu_integral: self.integrate(|u, _| spec.f(u) * u),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,U\n");
        for i in 0..self.n_points {
            s.push_str(&format!("{:.12e},{:.17e}\n", self.radius(i), self.values[i]));
        }
        s
    }
}

/// `||grad U||^2`, `||U||^2`, `int F(U)`, `int f(U) U`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialIntegrals {
    pub grad_sq: f64,
    pub l2_sq: f64,
    pub f_integral: f64,
    pub fu_integral: f64,
}

impl RadialIntegrals {
    pub fn energy(&self, k: f64) -> f64 {
        0.5 * self.grad_sq + 0.5 * k * self.l2_sq - self.f_integral
    }

    pub fn pohozaev_residual(&self, k: f64, dim: usize) -> f64 {
        let n = dim as f64;
        let scale = 0.5 * k * n * self.l2_sq;
        ((n - 2.0) / 2.0 * self.grad_sq + scale - n * self.f_integral).abs() / scale
    }

    pub fn nehari_residual(&self, k: f64) -> f64 {
        let quad = self.grad_sq + k * self.l2_sq;
        (quad - self.fu_integral).abs() / quad
    }
}

/// `Phi_k(u) = 1/2 ||grad u||^2 + k/2 ||u||^2 - int F(u)` by radial quadrature.
pub fn energy_phi(k: f64, profile: &RadialProfile, spec: &NonlinearitySpec) -> f64 {
    profile.integrals(spec).energy(k)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundState {
    pub profile: RadialProfile,
    pub spec: NonlinearitySpec,
    pub energy: f64,
    pub grad_norm_sq: f64,
    pub l2_norm_sq: f64,
    pub f_integral: f64,
    pub fu_integral: f64,
    pub decay_rate: f64,
    pub u0: f64,
    /// Radius up to which the shot is used; the linearised tail takes over beyond.
    pub matched_radius: f64,
}

impl GroundState {
    pub fn k(&self) -> f64 {
        self.profile.k
    }

    pub fn dim(&self) -> usize {
        self.profile.dim
    }

    pub fn integrals(&self) -> RadialIntegrals {
        RadialIntegrals {
            grad_sq: self.grad_norm_sq,
            l2_sq: self.l2_norm_sq,
            f_integral: self.f_integral,
            fu_integral: self.fu_integral,
        }
    }

    pub fn h1_norm(&self) -> f64 {
        (self.grad_norm_sq + self.l2_norm_sq).sqrt()
    }

    pub fn pohozaev_residual(&self) -> f64 {
        self.integrals().pohozaev_residual(self.k(), self.dim())
    }

    pub fn nehari_residual(&self) -> f64 {
        self.integrals().nehari_residual(self.k())
    }

    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            k: self.k(),
            dim: self.dim(),
            m_k: self.energy,
            grad_norm_sq: self.grad_norm_sq,
            l2_norm_sq: self.l2_norm_sq,
            f_integral: self.f_integral,
            decay_rate: self.decay_rate,
            u0: self.u0,
            pohozaev_residual: self.pohozaev_residual(),
            nehari_residual: self.nehari_residual(),
        }
    }
}

/// JSON summary of a ground state.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct GroundStateSummary {
    pub k: f64,
    pub dim: usize,
    pub m_k: f64,
    pub grad_norm_sq: f64,
    pub l2_norm_sq: f64,
    pub f_integral: f64,
    pub decay_rate: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    pub pohozaev_residual: f64,
    pub nehari_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    Over,
    Under,
}

struct Trajectory {
    values: Vec<f64>,
    derivs: Vec<f64>,
    outcome: Shot,
}

struct Shooter<'a> {
    spec: &'a NonlinearitySpec,
    k: f64,
    dim: usize,
    h: f64,
    n: usize,
    substeps: usize,
}

impl Shooter<'_> {
    #[inline]
    fn rhs(&self, r: f64, u: f64, du: f64) -> f64 {
        let src = self.k * u - self.spec.f(u);
        if r == 0.0 {
            src / self.dim as f64
        } else {
            src - (self.dim as f64 - 1.0) / r * du
        }
    }

    fn shoot(&self, alpha: f64, record: bool) -> Trajectory {
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        let (mut u, mut du) = (alpha, 0.0);
        let dt = self.h / self.substeps as f64;
        if record {
            values.push(u);
            derivs.push(du);
        }
        for i in 0..self.n - 1 {
            let r0 = i as f64 * self.h;
            for s in 0..self.substeps {
                let r = r0 + s as f64 * dt;
                let k1u = du;
                let k1d = self.rhs(r, u, du);
                let k2u = du + 0.5 * dt * k1d;
                let k2d = self.rhs(r + 0.5 * dt, u + 0.5 * dt * k1u, k2u);
                let k3u = du + 0.5 * dt * k2d;
                let k3d = self.rhs(r + 0.5 * dt, u + 0.5 * dt * k2u, k3u);
                let k4u = du + dt * k3d;
                let k4d = self.rhs(r + dt, u + dt * k3u, k4u);
                u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                du += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            }
            if record {
                values.push(u);
                derivs.push(du);
            }
            if u < 0.0 {
                return Trajectory { values, derivs, outcome: Shot::Over };
            }
            if du > 0.0 {
                return Trajectory { values, derivs, outcome: Shot::Under };
            }
        }
        Trajectory { values, derivs, outcome: Shot::Under }
    }
}

/// Large-argument series for `K_nu(z) e^z sqrt(2z/pi)`.
fn bessel_k_scaled(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..60 {
        let odd = (2 * j - 1) as f64;
        let next = term * (mu - odd * odd) / (j as f64 * 8.0 * z);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `phi(r)/phi(r_c)` and `phi'(r)/phi(r_c)` for `phi = r^-nu K_nu(sqrt(k) r)`.
fn decaying_tail(nu: f64, k: f64, rc: f64, r: f64) -> (f64, f64) {
    let sk = k.sqrt();
    let (z, zc) = (sk * r, sk * rc);
    let common = (rc / r).powf(nu) * (zc / z).sqrt() * (-(z - zc)).exp();
    let base = bessel_k_scaled(nu, zc);
    let value = common * bessel_k_scaled(nu, z) / base;
    let deriv = -sk * common * bessel_k_scaled(nu + 1.0, z) / base;
    (value, deriv)
}

/// Shooting solution of `U'' + (N-1)/r U' - k U + f(U) = 0`, `U'(0) = 0`.
pub fn solve_ground_state(
    k: f64,
    spec: &NonlinearitySpec,
    dim: usize,
    opts: &ShootingOptions,
) -> Result<GroundState> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Config(format!("limit problem needs k > 0, got {k}")));
    }
    if dim < 2 {
        return Err(Error::Config("dimension must be at least 2".into()));
    }
    spec.validate(dim)?;
    let r_max = opts.r_max_scaled / k.sqrt();
    let n = opts.n_points;
    let shooter = Shooter {
        spec,
        k,
        dim,
        h: r_max / (n - 1) as f64,
        n,
        substeps: opts.substeps.max(1),
    };

    // U(0) below the root of f(s) = k s never leaves the undershoot class.
    let mut lo = spec
        .crossover_threshold(k)
        .map_err(|e| Error::Bracket(e.to_string()))?;
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while shooter.shoot(hi, false).outcome != Shot::Over {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 || !hi.is_finite() {
            return Err(Error::Bracket(format!("no overshoot up to U(0) = {hi}")));
        }
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if iterations > opts.max_bisections {
            return Err(Error::NoConvergence {
                what: "shooting bisection",
                iterations,
                residual: hi - lo,
            });
        }
        match shooter.shoot(mid, false).outcome {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
        }
    }

    let under = shooter.shoot(lo, true);
    let over = shooter.shoot(hi, true);
    let len = under.values.len().min(over.values.len());
    let mut ic = 0;
    for i in 0..len {
        let (a, b) = (under.values[i], over.values[i]);
        if (a - b).abs() > SEPARATION_TOL * a.abs() || a <= 0.0 || under.derivs[i] > 0.0 {
            break;
        }
        ic = i;
    }
    if ic < 8 {
        return Err(Error::Bracket("shots separate immediately".into()));
    }

    let h = shooter.h;
    let rc = ic as f64 * h;
    let nu = dim as f64 / 2.0 - 1.0;
    let uc = 0.5 * (under.values[ic] + over.values[ic]);
    let mut values = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        if i <= ic {
            values.push(0.5 * (under.values[i] + over.values[i]));
            derivs.push(0.5 * (under.derivs[i] + over.derivs[i]));
        } else {
            let (v, d) = decaying_tail(nu, k, rc, i as f64 * h);
            values.push(uc * v);
            derivs.push(uc * d);
        }
    }
    let profile = RadialProfile {
        r_max,
        n_points: n,
        values,
        derivs,
        k,
        dim,
    };

    // exponential rate of U r^{(N-1)/2} on the shot part of the tail
    let u0 = profile.values[0];
    let (xs, ys): (Vec<f64>, Vec<f64>) = (1..=ic)
        .filter_map(|i| {
            let v = profile.values[i];
            let rel = v / u0;
            (rel < 1e-2 && rel > 1e-7).then(|| {
                let r = i as f64 * h;
                (r, (v * r.powf((dim as f64 - 1.0) / 2.0)).ln())
            })
        })
        .unzip();
    let decay_rate = if xs.len() >= 2 {
        -linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };

    let ints = profile.integrals(spec);
    Ok(GroundState {
        energy: ints.energy(k),
        grad_norm_sq: ints.grad_sq,
        l2_norm_sq: ints.l2_sq,
        f_integral: ints.f_integral,
        fu_integral: ints.fu_integral,
        decay_rate,
        u0,
        matched_radius: rc,
        spec: spec.clone(),
        profile,
    })
}

/// `(k, m_k)` rows sorted by `k`.
pub fn m_curve(
    k_values: &[f64],
    spec: &NonlinearitySpec,
    dim: usize,
    opts: &ShootingOptions,
) -> Result<Vec<(f64, f64)>> {
    let mut ks = k_values.to_vec();
    ks.sort_by(|a, b| a.total_cmp(b));
    ks.iter()
        .map(|&k| solve_ground_state(k, spec, dim, opts).map(|g| (k, g.energy)))
        .collect()
}

/// Shape of the mountain-pass path through the ground state.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveShape {
    /// `t -> U(. / (t theta))`, used for `N >= 3`.
    Dilation { theta: f64 },
    /// `s U_tau0`, then `U_tau` for `tau in [tau0, tau1]`, then `t U_tau1`
    /// up to `t = tau2`; used for `N = 2`.
    Piecewise { tau0: f64, tau1: f64, tau2: f64 },
}

/// Point `amplitude * U(. / dilation)` of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub amplitude: f64,
    pub dilation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveOptions {
    pub tau0: f64,
    pub tau1: f64,
    /// Endpoint energy target as a multiple of `m_k` (negative).
    pub endpoint_target: f64,
    pub check_points: usize,
    pub max_relative_excess: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            tau0: 0.8,
            tau1: 1.25,
            endpoint_target: -0.75,
            check_points: 2001,
            max_relative_excess: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MpCurve {
    pub shape: CurveShape,
    pub ground: GroundState,
    /// Parameter at which the curve passes through the ground state.
    pub t_ground: f64,
    pub max_energy: f64,
    pub endpoint_energy: f64,
}

impl MpCurve {
    pub fn point(&self, t: f64) -> CurvePoint {
        let t = t.clamp(0.0, 1.0);
        match self.shape {
            CurveShape::Dilation { theta } => {
                if t == 0.0 {
                    CurvePoint { amplitude: 0.0, dilation: 1.0 }
                } else {
                    CurvePoint { amplitude: 1.0, dilation: t * theta }
                }
            }
            CurveShape::Piecewise { tau0, tau1, tau2 } => {
                let (l1, l2, l3) = (1.0, tau1 - tau0, tau2 - 1.0);
                let s = t * (l1 + l2 + l3);
                if s <= l1 {
                    CurvePoint { amplitude: s, dilation: tau0 }
                } else if s <= l1 + l2 {
                    CurvePoint { amplitude: 1.0, dilation: tau0 + (s - l1) }
                } else {
                    CurvePoint { amplitude: 1.0 + (s - l1 - l2), dilation: tau1 }
                }
            }
        }
    }

    /// `Phi_k(a U(./tau))` through the exact change of variables.
    pub fn energy_at(&self, point: CurvePoint) -> f64 {
        scaled_energy(&self.ground, point)
    }

    pub fn energy(&self, t: f64) -> f64 {
        self.energy_at(self.point(t))
    }
}

fn scaled_energy(g: &GroundState, p: CurvePoint) -> f64 {
    if p.amplitude == 0.0 {
        return 0.0;
    }
    let (a, tau, n) = (p.amplitude, p.dilation, g.dim() as i32);
    let f_int = if a == 1.0 {
        g.f_integral
    } else {
        g.profile.integrate(|u, _| g.spec.primitive(a * u))
    };
    0.5 * a * a * tau.powi(n - 2) * g.grad_norm_sq
        + tau.powi(n) * (0.5 * g.k() * a * a * g.l2_norm_sq - f_int)
}

/// Largest root of `phi(x) = target` beyond `start`, where `phi(start) > target`.
fn bisect_down(phi: impl Fn(f64) -> f64, start: f64, target: f64) -> Result<f64> {
    let mut lo = start;
    let mut hi = 2.0 * start;
    let mut guard = 0;
    while phi(hi) > target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::CurveSearch("endpoint energy never reaches target".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Mountain-pass curve through `state`, admissible for `Gamma_k`.
pub fn build_mp_curve(state: &GroundState, opts: &CurveOptions) -> Result<MpCurve> {
    let m = state.energy;
    let target = opts.endpoint_target * m;
    if !(opts.endpoint_target < -0.5) {
        return Err(Error::Config("endpoint target must be below -1/2".into()));
    }
    let (shape, t_ground) = if state.dim() >= 3 {
        let theta = bisect_down(
            |d| scaled_energy(state, CurvePoint { amplitude: 1.0, dilation: d }),
            1.0,
            target,
        )?;
        (CurveShape::Dilation { theta }, 1.0 / theta)
    } else {
        let (tau0, tau1) = (opts.tau0, opts.tau1);
        if !(tau0 > 0.0 && tau0 < 1.0 && tau1 > 1.0) {
            return Err(Error::Config("need 0 < tau0 < 1 < tau1".into()));
        }
        let tau2 = bisect_down(
            |a| scaled_energy(state, CurvePoint { amplitude: a, dilation: tau1 }),
            1.0,
            target,
        )?;
        let total = 1.0 + (tau1 - tau0) + (tau2 - 1.0);
        (
            CurveShape::Piecewise { tau0, tau1, tau2 },
            (1.0 + (1.0 - tau0)) / total,
        )
    };
    let mut curve = MpCurve {
        shape,
        ground: state.clone(),
        t_ground,
        max_energy: f64::NAN,
        endpoint_energy: f64::NAN,
    };
    let n = opts.check_points.max(3);
    let max_energy = (0..n)
        .map(|i| curve.energy(i as f64 / (n - 1) as f64))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(curve.energy(t_ground));
    curve.max_energy = max_energy;
    curve.endpoint_energy = curve.energy(1.0);
    if curve.endpoint_energy >= -0.5 * m {
        return Err(Error::CurveSearch(format!(
            "endpoint energy {} not below -m/2",
            curve.endpoint_energy
        )));
    }
    if (max_energy - m) > opts.max_relative_excess * m.abs() {
        return Err(Error::CurveSearch(format!(
            "curve maximum {max_energy} exceeds m_k = {m}; profile too coarse or tau0/tau1 too far from 1"
        )));
    }
    Ok(curve)
}
