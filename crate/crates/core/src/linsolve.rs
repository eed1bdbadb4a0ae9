//! Fast shifted-Poisson solves on the interior of a uniform square grid and
//! a preconditioned MINRES for symmetric indefinite systems.

use std::sync::Arc;

use rustdct::{Dst1, DctPlanner};

/// `(-Lap_h + shift)^{-1}` with homogeneous Dirichlet data on an `m x m`
/// interior grid, diagonalised by the 2D DST-I.
#[derive(Clone)]
pub struct ShiftedPoisson {
    m: usize,
    dst: Arc<dyn Dst1<f64>>,
    inv_eig: Vec<f64>,
    scale: f64,
}

impl std::fmt::Debug for ShiftedPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftedPoisson").field("m", &self.m).finish()
    }
}

impl ShiftedPoisson {
    pub fn new(m: usize, h: f64, shift: f64) -> Self {
        let dst = DctPlanner::new().plan_dst1(m);
        let lam: Vec<f64> = (1..=m)
            .map(|p| {
                let s = (p as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        let mut inv_eig = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                inv_eig[i * m + j] = 1.0 / (lam[i] + lam[j] + shift);
            }
        }
        // the unnormalised DST-I squares to (m+1)/2
        let scale = (2.0 / (m + 1) as f64).powi(2);
        Self {
            m,
            dst,
            inv_eig,
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn transform(&self, buf: &mut [f64], tmp: &mut [f64]) {
        let m = self.m;
        for row in buf.chunks_exact_mut(m) {
            self.dst.process_dst1(row);
        }
        for i in 0..m {
            for j in 0..m {
                tmp[j * m + i] = buf[i * m + j];
            }
        }
        for row in tmp.chunks_exact_mut(m) {
            self.dst.process_dst1(row);
        }
        for i in 0..m {
            for j in 0..m {
                buf[j * m + i] = tmp[i * m + j];
            }
        }
    }

    pub fn apply(&self, rhs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(rhs);
        let mut tmp = vec![0.0; self.len()];
        self.transform(out, &mut tmp);
        for (o, w) in out.iter_mut().zip(&self.inv_eig) {
            *o *= w * self.scale;
        }
        self.transform(out, &mut tmp);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinresInfo {
    pub iterations: usize,
    /// Preconditioned residual estimate relative to the initial one.
    pub relative_residual: f64,
    pub converged: bool,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned MINRES for `A x = b` with `A` symmetric and `M` symmetric
/// positive definite (`precond` applies `M^{-1}`). Starts from `x = 0`.
pub fn minres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, MinresInfo) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return (
            x,
            MinresInfo {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut info = MinresInfo {
        iterations: 0,
        relative_residual: 1.0,
        converged: false,
    };
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply(&v, &mut av);
        if itn >= 2 {
            let c = beta / oldb;
            for (a, r) in av.iter_mut().zip(&r1) {
                *a -= c * r;
            }
        }
        let alfa = dot(&v, &av);
        let c = alfa / beta;
        for (a, r) in av.iter_mut().zip(&r2) {
            *a -= c * r;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&av);
        precond(&r2, &mut y);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        info.iterations = itn;
        info.relative_residual = phibar / beta1;
        if info.relative_residual < tol || beta == 0.0 {
            info.converged = true;
            break;
        }
    }
    (x, info)
}
