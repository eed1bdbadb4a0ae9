//! Uniform two-dimensional discretisation of the rescaled truncated problem
//! `-Lap u + V(eps x) u = g_eps(x, u)` on `[-L, L]^2` with Dirichlet data.
//!
//! The discrete energy is `1/2 sum_edges (u_a - u_b)^2 + h^2 sum_nodes
//! (V u^2 / 2 - G)` and the residual is exactly `h^{-2}` times its gradient
//! with respect to the nodal values, so the two are consistent to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_problem::RadialProfile;
use crate::linsolve::{minres, ShiftedPoisson};
use crate::nonlinearity::Composite;
use crate::potential::PotentialSpec;

/// `n x n` nodal values on `[-L, L]^2`, row-major with rows along `x2`
/// and columns along `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub n: usize,
    pub l: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize, l: f64) -> Self {
        Self {
            n,
            l,
            values: vec![0.0; n * n],
        }
    }

    /// Samples `f(x1, x2)` at interior nodes; boundary nodes are zero.
    pub fn from_fn(n: usize, l: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut u = Self::zeros(n, l);
        let h = u.h();
        for i in 1..n - 1 {
            let x2 = -l + i as f64 * h;
            for j in 1..n - 1 {
                u.values[i * n + j] = f(-l + j as f64 * h, x2);
            }
        }
        u
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    pub fn same_geometry(&self, other: &GridField) -> bool {
        self.n == other.n && self.l == other.l
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn boundary_is_zero(&self) -> bool {
        let n = self.n;
        (0..n).all(|k| {
            self.get(0, k) == 0.0
                && self.get(n - 1, k) == 0.0
                && self.get(k, 0) == 0.0
                && self.get(k, n - 1) == 0.0
        })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(row, col)` of the largest value; first occurrence in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best / self.n, best % self.n)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    pub fn axpy(&self, c: f64, other: &GridField) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
            ..self.clone()
        }
    }

    /// Shift by whole lattice steps along `x1` (`d1`) and `x2` (`d2`), zero fill.
    pub fn translate(&self, d1: isize, d2: isize) -> Self {
        let n = self.n as isize;
        let mut out = Self::zeros(self.n, self.l);
        for i in 0..n {
            let si = i - d2;
            if si < 0 || si >= n {
                continue;
            }
            for j in 0..n {
                let sj = j - d1;
                if sj < 0 || sj >= n {
                    continue;
                }
                out.values[(i * n + j) as usize] = self.values[(si * n + sj) as usize];
            }
        }
        out.clear_boundary();
        out
    }

    pub fn clear_boundary(&mut self) {
        let n = self.n;
        for k in 0..n {
            self.values[k] = 0.0;
            self.values[(n - 1) * n + k] = 0.0;
            self.values[k * n] = 0.0;
            self.values[k * n + n - 1] = 0.0;
        }
    }

    /// Bicubic Lagrange interpolation at a physical point, zero outside.
    pub fn sample(&self, x1: f64, x2: f64) -> f64 {
        let h = self.h();
        let (p, q) = ((x1 + self.l) / h, (x2 + self.l) / h);
        let (j0, i0) = (p.floor(), q.floor());
        let (tj, ti) = (p - j0, q - i0);
        let weights = |t: f64| {
            [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ]
        };
        let (wi, wj) = (weights(ti), weights(tj));
        let n = self.n as isize;
        let mut acc = 0.0;
        for (a, wa) in wi.iter().enumerate() {
            let i = i0 as isize - 1 + a as isize;
            if i < 0 || i >= n {
                continue;
            }
            for (b, wb) in wj.iter().enumerate() {
                let j = j0 as isize - 1 + b as isize;
                if j < 0 || j >= n {
                    continue;
                }
                acc += wa * wb * self.values[(i * n + j) as usize];
            }
        }
        acc
    }

    /// `v(x) = u(x - d)` by bicubic interpolation; exact for lattice `d`.
    pub fn shifted(&self, d: [f64; 2]) -> Self {
        Self::from_fn(self.n, self.l, |x1, x2| self.sample(x1 - d[0], x2 - d[1]))
    }

    /// `sum_edges (u_a - u_b)^2`, the discrete `int |grad u|^2`.
    pub fn grad_sq(&self) -> f64 {
        let n = self.n;
        let u = &self.values;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = u[i * n + j];
                if j + 1 < n {
                    let d = u[i * n + j + 1] - c;
                    acc += d * d;
                }
                if i + 1 < n {
                    let d = u[(i + 1) * n + j] - c;
                    acc += d * d;
                }
            }
        }
        acc
    }

    pub fn l2_sq(&self) -> f64 {
        let h = self.h();
        h * h * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        (self.grad_sq() + self.l2_sq()).sqrt()
    }

    pub fn interior(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity((n - 2) * (n - 2));
        for i in 1..n - 1 {
            out.extend_from_slice(&self.values[i * n + 1..i * n + n - 1]);
        }
        out
    }

    pub fn set_interior(&mut self, x: &[f64]) {
        let n = self.n;
        let m = n - 2;
        for i in 1..n - 1 {
            self.values[i * n + 1..i * n + n - 1].copy_from_slice(&x[(i - 1) * m..i * m]);
        }
    }

    /// Row `x2 = x2(row)` as CSV lines `x1,u`.
    pub fn slice_csv(&self, row: usize) -> String {
        let mut s = String::from("x1,u\n");
        for j in 0..self.n {
            s.push_str(&format!("{},{}\n", self.coord(j), self.get(row, j)));
        }
        s
    }
}

/// `amplitude * U(|x - center| / dilation)` sampled on the grid.
pub fn interpolate_radial(
    profile: &RadialProfile,
    n: usize,
    l: f64,
    center: [f64; 2],
    amplitude: f64,
    dilation: f64,
) -> GridField {
    GridField::from_fn(n, l, |x1, x2| {
        let r = ((x1 - center[0]).powi(2) + (x2 - center[1]).powi(2)).sqrt();
        amplitude * profile.eval(r / dilation)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target sup-norm of the residual (and of the barycenter when constrained).
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 40,
            linear_tol: 1e-10,
            linear_max_iter: 1500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub field: GridField,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub linear_iterations: usize,
    pub residual: f64,
    pub barycenter: Vec<f64>,
}

/// The truncated problem at fixed `eps` on a fixed grid, with `V(eps x)`,
/// `chi(eps x)` and the barycenter weights cached per node.
#[derive(Debug, Clone)]
pub struct EpsProblem {
    pub eps: f64,
    pub n: usize,
    pub l: f64,
    pub composite: Composite,
    pub potential: PotentialSpec,
    pub e_basis: Vec<Vec<f64>>,
    pub autonomous: bool,
    v: Vec<f64>,
    chi: Vec<f64>,
    weights: Vec<Vec<f64>>,
    poisson: ShiftedPoisson,
}

/// Default distance between `B4^eps` and the edge of the box.
pub const DEFAULT_MARGIN: f64 = 8.0;

impl EpsProblem {
    /// Box half-width `L = R4 / eps + margin`.
    pub fn new(
        eps: f64,
        composite: Composite,
        potential: PotentialSpec,
        e_basis: Vec<Vec<f64>>,
        n: usize,
        margin: f64,
    ) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::Geometry(format!("negative box margin {margin}")));
        }
        let l = composite.params.radii[4] / eps + margin;
        Self::with_half_width(eps, composite, potential, e_basis, n, l)
    }

    pub fn with_half_width(
        eps: f64,
        composite: Composite,
        potential: PotentialSpec,
        e_basis: Vec<Vec<f64>>,
        n: usize,
        l: f64,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        if n < 8 {
            return Err(Error::Geometry(format!("grid too small: n = {n}")));
        }
        if potential.dim != 2 || e_basis.iter().any(|e| e.len() != 2) {
            return Err(Error::Geometry("the grid solver is two-dimensional".into()));
        }
        let h = 2.0 * l / (n - 1) as f64;
        let mut p = Self {
            eps,
            n,
            l,
            composite,
            potential,
            e_basis,
            autonomous: false,
            v: Vec::new(),
            chi: Vec::new(),
            weights: Vec::new(),
            poisson: ShiftedPoisson::new(n - 2, h, 1.0),
        };
        p.fill_caches();
        Ok(p)
    }

    /// Same grid and barycenter weights with `V = 1` and `chi = 1`.
    pub fn autonomous(&self) -> Self {
        let mut p = self.clone();
        p.autonomous = true;
        p.fill_caches();
        p
    }

    fn fill_caches(&mut self) {
        let (n, h, l, eps) = (self.n, self.h(), self.l, self.eps);
        let r3 = self.composite.params.radii[3] / eps;
        self.v = vec![0.0; n * n];
        self.chi = vec![0.0; n * n];
        self.weights = vec![vec![0.0; n * n]; self.e_basis.len()];
        for i in 0..n {
            let x2 = -l + i as f64 * h;
            for j in 0..n {
                let x1 = -l + j as f64 * h;
                let k = i * n + j;
                if self.autonomous {
                    self.v[k] = 1.0;
                    self.chi[k] = 1.0;
                } else {
                    let y = [eps * x1, eps * x2];
                    self.v[k] = self.potential.value(&y);
                    self.chi[k] = self.composite.params.chi(&y);
                }
                if (x1 * x1 + x2 * x2).sqrt() <= r3 {
                    for (w, e) in self.weights.iter_mut().zip(&self.e_basis) {
                        w[k] = e[0] * x1 + e[1] * x2;
                    }
                }
            }
        }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n - 1) as f64
    }

    pub fn zeros(&self) -> GridField {
        GridField::zeros(self.n, self.l)
    }

    pub fn e_dim(&self) -> usize {
        self.e_basis.len()
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.v
    }

    pub fn chi_values(&self) -> &[f64] {
        &self.chi
    }

    fn check(&self, u: &GridField) -> Result<()> {
        if u.n != self.n || u.l != self.l {
            return Err(Error::Geometry(format!(
                "field geometry (n = {}, L = {}) does not match problem (n = {}, L = {})",
                u.n, u.l, self.n, self.l
            )));
        }
        Ok(())
    }

    pub fn energy(&self, u: &GridField) -> Result<f64> {
        self.check(u)?;
        let h2 = self.h() * self.h();
        let t = &self.composite.trunc;
        let mut pot = 0.0;
        for (k, &s) in u.values.iter().enumerate() {
            pot += 0.5 * self.v[k] * s * s - t.big_g(self.chi[k], s);
        }
        Ok(0.5 * u.grad_sq() + h2 * pot)
    }

    #[inline]
    fn neg_lap(u: &[f64], n: usize, k: usize, inv_h2: f64) -> f64 {
        (4.0 * u[k] - u[k - 1] - u[k + 1] - u[k - n] - u[k + n]) * inv_h2
    }

    /// `-Lap_h u + V(eps x) u - g_eps(x, u)` at interior nodes, 0 on the boundary.
    pub fn gradient(&self, u: &GridField) -> Result<GridField> {
        self.check(u)?;
        let t = &self.composite.trunc;
        Ok(self.residual_with(u, |k, s| t.g(self.chi[k], s)))
    }

    /// Residual of the untruncated equation, `g` replaced by `f`.
    pub fn plain_residual(&self, u: &GridField) -> Result<GridField> {
        self.check(u)?;
        let f = &self.composite.trunc.spec;
        Ok(self.residual_with(u, |_, s| f.f(s)))
    }

    fn residual_with(&self, u: &GridField, nl: impl Fn(usize, f64) -> f64) -> GridField {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h() * self.h());
        let mut r = self.zeros();
        let uv = &u.values;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                r.values[k] = Self::neg_lap(uv, n, k, inv_h2) + self.v[k] * uv[k] - nl(k, uv[k]);
            }
        }
        r
    }

    pub fn residual_sup(&self, u: &GridField) -> Result<f64> {
        Ok(self
            .gradient(u)?
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// `beta_eps(u) = int h_eps u^2 / int u^2`, in `E` coordinates.
    pub fn barycenter(&self, u: &GridField) -> Result<Vec<f64>> {
        self.check(u)?;
        let mass: f64 = u.values.iter().map(|v| v * v).sum();
        if mass == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(self
            .weights
            .iter()
            .map(|w| w.iter().zip(&u.values).map(|(a, s)| a * s * s).sum::<f64>() / mass)
            .collect())
    }

    /// The same quantity through a separate path: coordinates recomputed
    /// per node, column-major traversal and compensated summation.
    pub fn barycenter_independent(&self, u: &GridField) -> Result<Vec<f64>> {
        self.check(u)?;
        let (n, h) = (self.n, self.h());
        let r3 = self.composite.params.radii[3] / self.eps;
        let mut num = vec![Neumaier::default(); self.e_dim()];
        let mut den = Neumaier::default();
        for j in 0..n {
            let x1 = self.l * ((2 * j) as f64 / (n - 1) as f64 - 1.0);
            for i in 0..n {
                let x2 = self.l * ((2 * i) as f64 / (n - 1) as f64 - 1.0);
                let s2 = u.values[i * n + j].powi(2) * h * h;
                den.add(s2);
                if x1.hypot(x2) <= r3 {
                    for (acc, e) in num.iter_mut().zip(&self.e_basis) {
                        acc.add((e[0] * x1 + e[1] * x2) * s2);
                    }
                }
            }
        }
        if den.total() == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(num.iter().map(|a| a.total() / den.total()).collect())
    }

    /// Physical coordinates of node `(row, col)`.
    pub fn node(&self, row: usize, col: usize) -> [f64; 2] {
        let h = self.h();
        [-self.l + col as f64 * h, -self.l + row as f64 * h]
    }

    /// Damped Newton for the unconstrained equation.
    pub fn newton_solve(&self, seed: &GridField, opts: &NewtonOptions) -> Result<NewtonOutcome> {
        self.newton_core(seed, None, opts)
    }

    /// Damped Newton on the residual and, when `lambda0` is given, on the
    /// bordered system for `F(u) - (lambda . h) u = 0`, `int h u^2 = 0`.
    pub(crate) fn newton_core(
        &self,
        seed: &GridField,
        lambda0: Option<&[f64]>,
        opts: &NewtonOptions,
    ) -> Result<NewtonOutcome> {
        self.check(seed)?;
        let n = self.n;
        let m = n - 2;
        let mi = m * m;
        let constrained = lambda0.is_some();
        let d = if constrained { self.e_dim() } else { 0 };
        let mut u = seed.clone();
        u.clear_boundary();
        let mut lambda: Vec<f64> = lambda0.map_or_else(Vec::new, |l| l.to_vec());
        if lambda.len() != d {
            return Err(Error::Config(format!("multiplier has {} components, E has {d}", lambda.len())));
        }
        // interior copies of the barycenter weights
        let wint: Vec<Vec<f64>> = self
            .weights
            .iter()
            .take(d)
            .map(|w| GridField { n, l: self.l, values: w.clone() }.interior())
            .collect();
        let t = &self.composite.trunc;

        let system = |u: &GridField, lambda: &[f64]| -> (Vec<f64>, f64, f64) {
            let mut r = self.gradient(u).expect("geometry checked").interior();
            let ui = u.interior();
            for (lk, w) in lambda.iter().zip(&wint) {
                for ((rv, wv), uv) in r.iter_mut().zip(w).zip(&ui) {
                    *rv -= lk * wv * uv;
                }
            }
            let sup = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mass: f64 = ui.iter().map(|v| v * v).sum();
            let mut bsup = 0.0f64;
            for w in &wint {
                let c: f64 = w.iter().zip(&ui).map(|(a, s)| a * s * s).sum();
                r.push(-0.5 * c);
                if mass > 0.0 {
                    bsup = bsup.max((c / mass).abs());
                }
            }
            (r, sup, bsup)
        };
        let merit = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

        let (mut res, mut sup, mut bsup) = system(&u, &lambda);
        let mut linear_iterations = 0;
        let mut it = 0;
        loop {
            if sup < opts.tol && bsup < opts.tol {
                break;
            }
            if it >= opts.max_iter {
                return Err(Error::NoConvergence {
                    what: "newton",
                    iterations: it,
                    residual: sup.max(bsup),
                });
            }
            it += 1;
            let ui = u.interior();
            let diag: Vec<f64> = {
                let mut dg = Vec::with_capacity(mi);
                for i in 1..n - 1 {
                    for j in 1..n - 1 {
                        let k = i * n + j;
                        dg.push(self.v[k] - t.g_derivative(self.chi[k], u.values[k]));
                    }
                }
                for (lk, w) in lambda.iter().zip(&wint) {
                    for (dv, wv) in dg.iter_mut().zip(w) {
                        *dv -= lk * wv;
                    }
                }
                dg
            };
            let borders: Vec<Vec<f64>> = wint
                .iter()
                .map(|w| w.iter().zip(&ui).map(|(a, s)| a * s).collect())
                .collect();
            let inv_h2 = 1.0 / (self.h() * self.h());
            let apply = |x: &[f64], out: &mut [f64]| {
                let xs = &x[..mi];
                for i in 0..m {
                    for j in 0..m {
                        let k = i * m + j;
                        let c = xs[k];
                        let l = if j > 0 { xs[k - 1] } else { 0.0 };
                        let r = if j + 1 < m { xs[k + 1] } else { 0.0 };
                        let dn = if i > 0 { xs[k - m] } else { 0.0 };
                        let up = if i + 1 < m { xs[k + m] } else { 0.0 };
                        out[k] = (4.0 * c - l - r - dn - up) * inv_h2 + diag[k] * c;
                    }
                }
                for (kk, b) in borders.iter().enumerate() {
                    let lk = x[mi + kk];
                    for (o, bv) in out[..mi].iter_mut().zip(b) {
                        *o -= lk * bv;
                    }
                    out[mi + kk] = -b.iter().zip(xs).map(|(a, c)| a * c).sum::<f64>();
                }
            };
            // Schur block of the preconditioner: B^T P B
            let pb: Vec<Vec<f64>> = borders
                .iter()
                .map(|b| {
                    let mut o = vec![0.0; mi];
                    self.poisson.apply(b, &mut o);
                    o
                })
                .collect();
            let schur: Vec<Vec<f64>> = borders
                .iter()
                .map(|bi| pb.iter().map(|pj| bi.iter().zip(pj).map(|(a, c)| a * c).sum()).collect())
                .collect();
            let schur_inv = invert_small(&schur)?;
            let precond = |x: &[f64], out: &mut [f64]| {
                self.poisson.apply(&x[..mi], &mut out[..mi]);
                for a in 0..d {
                    out[mi + a] = (0..d).map(|b| schur_inv[a][b] * x[mi + b]).sum();
                }
            };
            let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            let (step, info) = minres(apply, precond, &rhs, opts.linear_tol, opts.linear_max_iter);
            linear_iterations += info.iterations;
            if !step.iter().all(|v| v.is_finite()) {
                return Err(Error::Breakdown("non-finite Newton step".into()));
            }
            // backtracking on the squared residual
            let m0 = merit(&res);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..12 {
                let mut trial = u.clone();
                let xi: Vec<f64> = ui.iter().zip(&step[..mi]).map(|(a, s)| a + alpha * s).collect();
                trial.set_interior(&xi);
                let tl: Vec<f64> = lambda.iter().zip(&step[mi..]).map(|(a, s)| a + alpha * s).collect();
                let (r, s, b) = system(&trial, &tl);
                if merit(&r) < (1.0 - 1e-4 * alpha) * m0 {
                    accepted = Some((trial, tl, r, s, b));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((nu, nl, r, s, b)) => {
                    u = nu;
                    lambda = nl;
                    res = r;
                    sup = s;
                    bsup = b;
                }
                None => {
                    return Err(Error::NoConvergence {
                        what: "newton line search",
                        iterations: it,
                        residual: sup.max(bsup),
                    })
                }
            }
        }
        let barycenter = if u.values.iter().any(|v| *v != 0.0) {
            self.barycenter(&u)?
        } else {
            vec![0.0; self.e_dim()]
        };
        Ok(NewtonOutcome {
            field: u,
            lambda,
            iterations: it,
            linear_iterations,
            residual: sup,
            barycenter,
        })
    }
}

fn invert_small(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    match a.len() {
        0 => Ok(Vec::new()),
        1 => {
            if a[0][0] <= 0.0 {
                return Err(Error::Breakdown("singular constraint block".into()));
            }
            Ok(vec![vec![1.0 / a[0][0]]])
        }
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if !(det > 0.0) {
                return Err(Error::Breakdown("singular constraint block".into()));
            }
            Ok(vec![
                vec![a[1][1] / det, -a[0][1] / det],
                vec![-a[1][0] / det, a[0][0] / det],
            ])
        }
        _ => Err(Error::Geometry("E has dimension greater than 2".into())),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_problem::{solve_ground_state, ShootingOptions};
    use crate::nonlinearity::{NonlinearitySpec, TruncationParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cubic_problem(eps: f64, n: usize) -> EpsProblem {
        let v = PotentialSpec::gaussian_saddle_skewed(0.3, 0.1);
        let spec = NonlinearitySpec::pure_power(3.0);
        let params = TruncationParams {
            a: TruncationParams::default_slope(spec.mu, v.alpha1),
            radii: [0.2, 0.5, 0.6, 0.7, 0.8],
            alpha1: v.alpha1,
        };
        let comp = Composite::new(spec, params).unwrap();
        EpsProblem::new(eps, comp, v, vec![vec![1.0, 0.0]], n, DEFAULT_MARGIN).unwrap()
    }

    fn bump(n: usize, l: f64, c: [f64; 2], w: f64, a: f64) -> GridField {
        GridField::from_fn(n, l, |x1, x2| {
            a * (-((x1 - c[0]).powi(2) + (x2 - c[1]).powi(2)) / (w * w)).exp()
        })
    }

    #[test]
    fn zero_field() {
        let p = cubic_problem(0.2, 48);
        let z = p.zeros();
        assert_eq!(p.energy(&z).unwrap(), 0.0);
        assert!(p.gradient(&z).unwrap().values.iter().all(|v| *v == 0.0));
        let out = p.newton_solve(&z, &NewtonOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(matches!(p.barycenter(&z), Err(Error::ZeroField)));
    }

    #[test]
    fn energy_gradient_consistency() {
        let p = cubic_problem(0.2, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h2 = p.h() * p.h();
        for _ in 0..20 {
            let c = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let u = bump(p.n, p.l, c, rng.gen_range(0.7..2.0), rng.gen_range(0.2..3.0));
            let phi = bump(p.n, p.l, [rng.gen_range(-3.0..3.0), 0.0], 1.5, 1.0);
            let g = p.gradient(&u).unwrap();
            let exact: f64 = h2 * g.values.iter().zip(&phi.values).map(|(a, b)| a * b).sum::<f64>();
            let fd = |t: f64| {
                (p.energy(&u.axpy(t, &phi)).unwrap() - p.energy(&u.axpy(-t, &phi)).unwrap()) / (2.0 * t)
            };
            let (e1, e2) = ((fd(1e-2) - exact).abs(), (fd(5e-3) - exact).abs());
            let scale = exact.abs().max(1.0);
            // second order: halving t divides the error by about 4 until rounding takes over
            assert!(e2 < 1e-9 * scale || e2 < 0.3 * e1, "{e1} {e2}");
            assert!((fd(1e-4) - exact).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn translation_and_norms() {
        let u = bump(64, 10.0, [0.0, 0.0], 1.0, 1.0);
        assert_eq!(u.translate(0, 0), u);
        let t = u.translate(5, -3);
        assert!((t.l2_norm() - u.l2_norm()).abs() < 1e-12);
        assert!((t.h1_norm() - u.h1_norm()).abs() < 1e-12);
        let s = u.shifted([5.0 * u.h(), -3.0 * u.h()]);
        for (a, b) in s.values.iter().zip(&t.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn barycenter_of_symmetric_and_translated_fields() {
        let p = cubic_problem(0.2, 96);
        let sym = bump(p.n, p.l, [0.0, 0.0], 1.0, 1.0);
        assert!(p.barycenter(&sym).unwrap()[0].abs() < 1e-14);
        let shifted = bump(p.n, p.l, [0.4, 0.0], 1.0, 1.0);
        let b = p.barycenter(&shifted).unwrap()[0];
        assert!((b - 0.4).abs() < 1e-6, "{b}");
        let indep = p.barycenter_independent(&shifted).unwrap()[0];
        assert!((b - indep).abs() < 1e-12);
        // support outside B3^eps (radius 3.5)
        let far = bump(p.n, p.l, [8.0, 0.0], 0.3, 1.0);
        assert!(p.barycenter(&far).unwrap()[0].abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for s in 0..6 {
            let b = p.barycenter(&sym.translate(s, 0)).unwrap()[0];
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn radial_interpolation_norms_and_refinement() {
        let spec = NonlinearitySpec::pure_power(3.0);
        let gs = solve_ground_state(1.0, &spec, 2, &ShootingOptions::default()).unwrap();
        let p = cubic_problem(0.2, 128).autonomous();
        let u = interpolate_radial(&gs.profile, p.n, p.l, [0.0, 0.0], 1.0, 1.0);
        assert!((u.h1_norm() / gs.h1_norm() - 1.0).abs() < 5e-3);
        let err = |n: usize| {
            let q = EpsProblem::with_half_width(
                p.eps,
                p.composite.clone(),
                p.potential.clone(),
                p.e_basis.clone(),
                n,
                p.l,
            )
                .unwrap()
                .autonomous();
            let u = interpolate_radial(&gs.profile, n, q.l, [0.0, 0.0], 1.0, 1.0);
            (q.energy(&u).unwrap() - gs.energy).abs()
        };
        let (e1, e2) = (err(96), err(191));
        assert!(e1 / e2 >= 3.0, "{e1} {e2}");
    }

    #[test]
    fn newton_converges_to_positive_spike() {
        let spec = NonlinearitySpec::pure_power(3.0);
        let gs = solve_ground_state(1.0, &spec, 2, &ShootingOptions::default()).unwrap();
        let p = cubic_problem(0.2, 96);
        let seed = interpolate_radial(&gs.profile, p.n, p.l, [0.0, 0.0], 1.0, 1.0);
        let out = p.newton_solve(&seed, &NewtonOptions::default()).unwrap();
        assert!(out.residual < 1e-9);
        assert!(out.field.min() >= -1e-10);
        let e = p.energy(&out.field).unwrap();
        assert!((e - gs.energy).abs() < 0.05 * gs.energy, "{e}");
        // already converged: no further iterations
        let again = p.newton_solve(&out.field, &NewtonOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let p = cubic_problem(0.2, 32);
        assert!(matches!(p.energy(&GridField::zeros(33, p.l)), Err(Error::Geometry(_))));
    }
}
