//! Potentials `V(x) = 1 + P(x) exp(-|x|^2)` with polynomial `P` vanishing to
//! second order at the origin, so `V(0) = 1` and `grad V(0) = 0` exactly.
//!
//! Also: classification of the critical point at 0, extraction of the
//! subspace `E` on which `V` has a local maximum, the bound check
//! `alpha1 <= V <= alpha2` and the choice of a radius `R1` whose sphere
//! meets the level set `{V = 1}` transversally.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::golden_section;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `1 + (beta (x2^2 - x1^2) + skew x1^3) exp(-|x|^2)`.
    GaussianSaddle,
    /// `1 - beta |x|^2 exp(-|x|^2)`.
    GaussianMax,
    /// `1 + sum_j c_j x^{alpha_j} exp(-|x|^2)`.
    CustomPolynomialBump,
}

/// `coefficient * prod_i x_i^{powers[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn new(coefficient: f64, powers: &[u32]) -> Self {
        Self {
            coefficient,
            powers: powers.to_vec(),
        }
    }

    fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(x)
            .fold(self.coefficient, |acc, (&p, &xi)| acc * xi.powi(p as i32))
    }

    /// `d/dx_i` and `d^2/dx_i dx_j`.
    fn partial(&self, x: &[f64], i: usize) -> f64 {
        let p = self.powers[i];
        if p == 0 {
            return 0.0;
        }
        let mut m = self.clone();
        m.coefficient *= p as f64;
        m.powers[i] -= 1;
        m.eval(x)
    }

    fn second(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let mut m = self.clone();
        let pi = m.powers[i];
        if pi == 0 {
            return 0.0;
        }
        m.coefficient *= pi as f64;
        m.powers[i] -= 1;
        let pj = m.powers[j];
        if pj == 0 {
            return 0.0;
        }
        m.coefficient *= pj as f64;
        m.powers[j] -= 1;
        m.eval(x)
    }
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub skew: f64,
    #[serde(default)]
    pub terms: Vec<Monomial>,
    /// Certified bounds `alpha1 <= V <= alpha2` on all of `R^N`, recomputed
    /// by [`PotentialSpec::rebuild`].
    #[serde(default)]
    pub alpha1: f64,
    #[serde(default)]
    pub alpha2: f64,
    /// User-supplied basis of `E` for degenerate critical points.
    #[serde(default, rename = "E_basis", skip_serializing_if = "Option::is_none")]
    pub e_basis: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    poly: Vec<Monomial>,
}

impl PotentialSpec {
    pub fn gaussian_saddle(beta: f64) -> Self {
        Self::gaussian_saddle_skewed(beta, 0.0)
    }

    /// Saddle with an extra `skew x1^3` term that breaks the `x1 -> -x1`
    /// symmetry without changing the Hessian at 0.
    pub fn gaussian_saddle_skewed(beta: f64, skew: f64) -> Self {
        Self::build(PotentialKind::GaussianSaddle, 2, beta, skew, Vec::new())
    }

    pub fn gaussian_max(beta: f64) -> Self {
        Self::build(PotentialKind::GaussianMax, 2, beta, 0.0, Vec::new())
    }

    pub fn custom(dim: usize, terms: Vec<Monomial>) -> Self {
        Self::build(PotentialKind::CustomPolynomialBump, dim, 0.0, 0.0, terms)
    }

    /// `V = 1`.
    pub fn constant(dim: usize) -> Self {
        Self::custom(dim, Vec::new())
    }

    pub fn with_e_basis(mut self, basis: Vec<Vec<f64>>) -> Self {
        self.e_basis = Some(basis);
        self
    }

    fn build(kind: PotentialKind, dim: usize, beta: f64, skew: f64, terms: Vec<Monomial>) -> Self {
        let mut spec = Self {
            kind,
            dim,
            beta,
            skew,
            terms,
            alpha1: 1.0,
            alpha2: 1.0,
            e_basis: None,
            poly: Vec::new(),
        };
        spec.rebuild();
        spec
    }

    /// Recomputes the polynomial and the certified bounds from the public
    /// fields; needed after deserialisation or manual edits.
    pub fn rebuild(&mut self) {
        self.poly = match self.kind {
            PotentialKind::GaussianSaddle => {
                let mut p = vec![
                    Monomial::new(-self.beta, &[2, 0]),
                    Monomial::new(self.beta, &[0, 2]),
                ];
                if self.skew != 0.0 {
                    p.push(Monomial::new(self.skew, &[3, 0]));
                }
                p
            }
            PotentialKind::GaussianMax => vec![
                Monomial::new(-self.beta, &[2, 0]),
                Monomial::new(-self.beta, &[0, 2]),
            ],
            PotentialKind::CustomPolynomialBump => self.terms.clone(),
        };
        let (lo, hi) = self.certified_bounds();
        self.alpha1 = lo;
        self.alpha2 = hi;
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, PotentialKind::GaussianSaddle | PotentialKind::GaussianMax)
            && self.dim != 2
        {
            return Err(Error::Config("built-in gaussian potentials are two-dimensional".into()));
        }
        for m in &self.poly {
            if m.powers.len() != self.dim {
                return Err(Error::Config(format!("monomial {m:?} has wrong dimension")));
            }
            if m.degree() < 2 {
                return Err(Error::Config(
                    "polynomial terms must vanish to second order at the origin".into(),
                ));
            }
        }
        if !(self.alpha1 > 0.0) {
            return Err(Error::Config(format!(
                "potential not bounded below by a positive constant: alpha1 = {}",
                self.alpha1
            )));
        }
        Ok(())
    }

    /// `min V >= 1 - M`, `max V <= 1 + M'` from `|x^alpha| <= |x|^{|alpha|}`
    /// and a 1D maximisation of `t^d exp(-t^2)`.
    fn certified_bounds(&self) -> (f64, f64) {
        match self.kind {
            PotentialKind::GaussianMax => {
                let m = radial_sup(|t| self.beta.abs() * t * t * (-t * t).exp());
                if self.beta >= 0.0 {
                    (1.0 - m, 1.0)
                } else {
                    (1.0, 1.0 + m)
                }
            }
            PotentialKind::GaussianSaddle => {
                let (b, s) = (self.beta.abs(), self.skew.abs());
                let m = radial_sup(|t| (b * t * t + s * t * t * t) * (-t * t).exp());
                (1.0 - m, 1.0 + m)
            }
            PotentialKind::CustomPolynomialBump => {
                let pos: Vec<&Monomial> = self.poly.iter().filter(|m| m.coefficient > 0.0).collect();
                let neg: Vec<&Monomial> = self.poly.iter().filter(|m| m.coefficient < 0.0).collect();
                let sup = |ms: &[&Monomial]| {
                    radial_sup(|t| {
                        ms.iter()
                            .map(|m| m.coefficient.abs() * t.powi(m.degree() as i32))
                            .sum::<f64>()
                            * (-t * t).exp()
                    })
                };
                (1.0 - sup(&neg), 1.0 + sup(&pos))
            }
        }
    }

    #[inline]
    fn poly_value(&self, x: &[f64]) -> f64 {
        self.poly.iter().map(|m| m.eval(x)).sum()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        1.0 + self.poly_value(x) * (-r2).exp()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let e = (-r2).exp();
        let p = self.poly_value(x);
        (0..self.dim)
            .map(|i| {
                let dp: f64 = self.poly.iter().map(|m| m.partial(x, i)).sum();
                (dp - 2.0 * x[i] * p) * e
            })
            .collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let e = (-r2).exp();
        let p = self.poly_value(x);
        let dp: Vec<f64> = (0..self.dim)
            .map(|i| self.poly.iter().map(|m| m.partial(x, i)).sum())
            .collect();
        let mut h = vec![vec![0.0; self.dim]; self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d2p: f64 = self.poly.iter().map(|m| m.second(x, i, j)).sum();
                let delta = if i == j { 1.0 } else { 0.0 };
                h[i][j] = (d2p - 2.0 * x[i] * dp[j] - 2.0 * x[j] * dp[i] - 2.0 * delta * p
                    + 4.0 * x[i] * x[j] * p)
                    * e;
            }
        }
        h
    }
}

fn radial_sup(f: impl Fn(f64) -> f64) -> f64 {
    // coarse scan then golden refinement; the integrands peak below t = 10
    let n = 2000;
    let (best, _) = (0..=n)
        .map(|i| 10.0 * i as f64 / n as f64)
        .map(|t| (t, f(t)))
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let h = 10.0 / n as f64;
    let (_, neg) = golden_section(|t| -f(t), (best - h).max(0.0), best + h, 120);
    (-neg).max(f(best))
}

/// Case of the critical point at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalCase {
    /// isolated local maximum, `E = R^N`
    V1,
    /// non-degenerate saddle, `E` = negative eigenspace of the Hessian
    V2,
    /// degenerate, with user-supplied `E` confirmed by sampling
    V3,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointClass {
    pub case: CriticalCase,
    /// Orthonormal basis of `E`.
    pub e_basis: Vec<Vec<f64>>,
    pub hessian_eigenvalues: Vec<f64>,
}

impl CriticalPointClass {
    pub fn e_dim(&self) -> usize {
        self.e_basis.len()
    }

    /// Coordinates of `x` in the basis of `E`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.e_basis
            .iter()
            .map(|e| e.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Point of `R^N` with E-coordinates `c`.
    pub fn embed(&self, c: &[f64]) -> Vec<f64> {
        let n = self.e_basis.first().map_or(0, |e| e.len());
        let mut x = vec![0.0; n];
        for (ci, e) in c.iter().zip(&self.e_basis) {
            for (xi, ei) in x.iter_mut().zip(e) {
                *xi += ci * ei;
            }
        }
        x
    }
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix; returns
/// eigenvalues and unit eigenvectors (as rows), sorted ascending.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (m[j][j], (0..n).map(|i| v[i][j]).collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn orthonormalize(basis: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for b in basis {
        let mut v = b.clone();
        for q in &out {
            let d: f64 = v.iter().zip(q).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(q).for_each(|(a, c)| *a -= d * c);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n < 1e-12 {
            return Err(Error::Config("E basis is linearly dependent".into()));
        }
        v.iter_mut().for_each(|a| *a /= n);
        out.push(v);
    }
    Ok(out)
}

/// Orthonormal completion of `basis` to `R^n`.
fn complement(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut all = basis.to_vec();
    let mut extra = Vec::new();
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for q in &all {
            let d: f64 = v.iter().zip(q).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(q).for_each(|(a, c)| *a -= d * c);
        }
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|a| *a /= nv);
            all.push(v.clone());
            extra.push(v);
        }
    }
    extra
}

/// Sample points on the sphere of radius `rho` inside `span(basis)`.
fn subspace_sphere(basis: &[Vec<f64>], rho: f64, samples: usize) -> Vec<Vec<f64>> {
    let n = basis.first().map_or(0, |b| b.len());
    match basis.len() {
        0 => Vec::new(),
        1 => vec![
            basis[0].iter().map(|v| rho * v).collect(),
            basis[0].iter().map(|v| -rho * v).collect(),
        ],
        d => {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            (0..samples)
                .map(|_| {
                    let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    let mut x = vec![0.0; n];
                    for (ci, b) in c.iter().zip(basis) {
                        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += rho * ci / nc * bi);
                    }
                    x
                })
                .collect()
        }
    }
}

/// Radii at which the max/min split of `V` across `E`, `E^perp` is sampled.
pub const SPLIT_RADII: [f64; 2] = [1e-2, 5e-3];

/// Checks that `V|_E < 1` and `V|_{E^perp} > 1` on small spheres.
pub fn confirm_split(spec: &PotentialSpec, e_basis: &[Vec<f64>]) -> bool {
    let perp = complement(e_basis, spec.dim);
    SPLIT_RADII.iter().all(|&rho| {
        subspace_sphere(e_basis, rho, 64)
            .iter()
            .all(|x| spec.value(x) < 1.0)
            && subspace_sphere(&perp, rho, 64)
                .iter()
                .all(|x| spec.value(x) > 1.0)
    })
}

pub fn classify_critical_point(spec: &PotentialSpec, tol: f64) -> Result<CriticalPointClass> {
    let origin = vec![0.0; spec.dim];
    let g = spec.gradient(&origin);
    if g.iter().any(|v| v.abs() > tol) {
        return Err(Error::Degenerate(format!("grad V(0) = {g:?} is not zero")));
    }
    let (eig, vecs) = symmetric_eigen(&spec.hessian(&origin));
    let degenerate = eig.iter().any(|l| l.abs() <= tol);
    if !degenerate {
        let e_basis: Vec<Vec<f64>> = eig
            .iter()
            .zip(&vecs)
            .filter(|(l, _)| **l < 0.0)
            .map(|(_, v)| v.clone())
            .collect();
        let case = match e_basis.len() {
            0 => {
                return Err(Error::Degenerate(
                    "origin is a local minimum of V; E would be trivial".into(),
                ))
            }
            n if n == spec.dim => CriticalCase::V1,
            _ => CriticalCase::V2,
        };
        return Ok(CriticalPointClass {
            case,
            e_basis,
            hessian_eigenvalues: eig,
        });
    }
    let user = spec.e_basis.as_ref().ok_or_else(|| {
        Error::Degenerate(format!(
            "Hessian eigenvalues {eig:?} include zero; supply E_basis"
        ))
    })?;
    let e_basis = orthonormalize(user)?;
    if e_basis.is_empty() || !confirm_split(spec, &e_basis) {
        return Err(Error::Degenerate(
            "sampling does not confirm a maximum on E and a minimum on E^perp".into(),
        ));
    }
    Ok(CriticalPointClass {
        case: CriticalCase::V3,
        e_basis,
        hessian_eigenvalues: eig,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusOptions {
    pub tol_level: f64,
    pub tol_tang: f64,
    pub n_angles: usize,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self {
            tol_level: 1e-6,
            tol_tang: 1e-4,
            n_angles: 4096,
        }
    }
}

/// Angles on `|x| = radius` where the level set `{V = 1}` is met without a
/// transversal tangential derivative (two-dimensional potentials).
pub fn radius_violations(spec: &PotentialSpec, radius: f64, opts: &RadiusOptions) -> Vec<f64> {
    use std::f64::consts::PI;
    let point = |th: f64| [radius * th.cos(), radius * th.sin()];
    let level = |th: f64| spec.value(&point(th)) - 1.0;
    let tangential = |th: f64| {
        let g = spec.gradient(&point(th));
        -th.sin() * g[0] + th.cos() * g[1]
    };
    let n = opts.n_angles;
    let angles: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    let levels: Vec<f64> = angles.iter().map(|&t| level(t)).collect();
    let mut bad = Vec::new();
    for j in 0..n {
        let th = angles[j];
        if levels[j].abs() < opts.tol_level && tangential(th).abs() <= opts.tol_tang {
            bad.push(th);
            continue;
        }
        // crossing of the level set between consecutive samples
        let (l0, l1) = (levels[j], levels[(j + 1) % n]);
        if l0 * l1 < 0.0 {
            let (mut a, mut b) = (th, th + 2.0 * PI / n as f64);
            for _ in 0..60 {
                let c = 0.5 * (a + b);
                if level(a) * level(c) <= 0.0 {
                    b = c;
                } else {
                    a = c;
                }
            }
            let c = 0.5 * (a + b);
            if tangential(c).abs() <= opts.tol_tang {
                bad.push(c);
            }
        }
    }
    bad
}

/// First candidate radius satisfying the transversality condition.
pub fn select_radius_r1(spec: &PotentialSpec, candidates: &[f64], opts: &RadiusOptions) -> Result<f64> {
    if spec.dim != 2 {
        return Err(Error::Config("radius selection samples circles; N = 2 only".into()));
    }
    let mut near = Vec::new();
    for &r in candidates {
        let bad = radius_violations(spec, r, opts);
        if bad.is_empty() {
            return Ok(r);
        }
        near.extend(bad.into_iter().take(8));
    }
    near.truncate(16);
    Err(Error::RadiusRejected {
        candidates: candidates.to_vec(),
        near_violations: near,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub observed_min: f64,
    pub observed_max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Samples `V` on `[-w, w]^N` (random points plus the axes and diagonals)
/// and confirms `0 < alpha1 <= V <= alpha2`.
pub fn check_v0(spec: &PotentialSpec, box_halfwidth: f64, n_samples: usize) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = box_halfwidth;
    let mut points: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| (0..spec.dim).map(|_| rng.gen_range(-w..w)).collect())
        .collect();
    let line = 2001;
    for i in 0..spec.dim {
        for s in 0..line {
            let t = -w + 2.0 * w * s as f64 / (line - 1) as f64;
            let mut x = vec![0.0; spec.dim];
            x[i] = t;
            points.push(x);
            points.push(vec![t / (spec.dim as f64).sqrt(); spec.dim]);
        }
    }
    let mut rep = BoundReport {
        observed_min: f64::INFINITY,
        observed_max: f64::NEG_INFINITY,
        argmin: Vec::new(),
        argmax: Vec::new(),
        alpha1: spec.alpha1,
        alpha2: spec.alpha2,
    };
    for x in points {
        let v = spec.value(&x);
        if v < rep.observed_min {
            rep.observed_min = v;
            rep.argmin = x.clone();
        }
        if v > rep.observed_max {
            rep.observed_max = v;
            rep.argmax = x;
        }
    }
    let slack = 1e-12;
    if rep.observed_min <= 0.0 || rep.observed_min < spec.alpha1 - slack || spec.alpha1 <= 0.0 {
        return Err(Error::PotentialBound {
            point: rep.argmin,
            value: rep.observed_min,
        });
    }
    if rep.observed_max > spec.alpha2 + slack {
        return Err(Error::PotentialBound {
            point: rep.argmax,
            value: rep.observed_max,
        });
    }
    Ok(rep)
}
