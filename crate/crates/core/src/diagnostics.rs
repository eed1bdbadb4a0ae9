//! Post-processing of computed spikes: location, distance to translated
//! ground states, the untruncation check, the local identity residual,
//! multiplier scaling and the convergence table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate_radial, EpsProblem, GridField};
use crate::limit_problem::RadialProfile;
use crate::nonlinearity::norm;
use crate::quadrature::{golden_section, linear_fit};

/// Location of the maximum, refined by a parabola through the neighbours
/// along each axis.
pub fn spike_center(u: &GridField) -> [f64; 2] {
    let (i, j) = u.argmax();
    let n = u.n;
    let h = u.h();
    let offset = |m: f64, c: f64, p: f64| {
        let den = m - 2.0 * c + p;
        if den < 0.0 {
            0.5 * (m - p) / den
        } else {
            0.0
        }
    };
    let d1 = if j > 0 && j + 1 < n {
        offset(u.get(i, j - 1), u.get(i, j), u.get(i, j + 1))
    } else {
        0.0
    };
    let d2 = if i > 0 && i + 1 < n {
        offset(u.get(i - 1, j), u.get(i, j), u.get(i + 1, j))
    } else {
        0.0
    };
    [u.coord(j) + d1 * h, u.coord(i) + d2 * h]
}

/// The family of translates `U(. - y)` used as the ground-state set.
#[derive(Debug, Clone, Copy)]
pub enum GroundReference<'a> {
    /// Continuum radial profile sampled on the grid.
    Profile(&'a RadialProfile),
    /// A grid field centred at the origin, shifted by bicubic interpolation.
    Field(&'a GridField),
}

impl GroundReference<'_> {
    pub fn translate(&self, n: usize, l: f64, y: [f64; 2]) -> GridField {
        match self {
            GroundReference::Profile(p) => interpolate_radial(p, n, l, y, 1.0, 1.0),
            GroundReference::Field(f) => f.shifted(y),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroundDistance {
    pub distance: f64,
    pub y: [f64; 2],
}

/// `min_y ||u - U(. - y)||_{H^1}` over a 5x5 sub-lattice of half steps
/// around the spike center, then golden refinement along each axis.
pub fn distance_to_ground_states(u: &GridField, reference: GroundReference<'_>) -> GroundDistance {
    let h = u.h();
    let dist = |y: [f64; 2]| u.axpy(-1.0, &reference.translate(u.n, u.l, y)).h1_norm();
    let c = spike_center(u);
    let mut best = GroundDistance {
        distance: f64::INFINITY,
        y: c,
    };
    for a in -2..=2 {
        for b in -2..=2 {
            let y = [c[0] + a as f64 * 0.5 * h, c[1] + b as f64 * 0.5 * h];
            let d = dist(y);
            if d < best.distance {
                best = GroundDistance { distance: d, y };
            }
        }
    }
    for _ in 0..2 {
        for axis in 0..2 {
            let base = best.y;
            let at = |s: f64| {
                let mut y = base;
                y[axis] = s;
                y
            };
            let (s, d) = golden_section(|s| dist(at(s)), base[axis] - 0.5 * h, base[axis] + 0.5 * h, 40);
            if d < best.distance {
                best = GroundDistance { distance: d, y: at(s) };
            }
        }
    }
    best
}

/// Exponential rate fitted to `ln(u sqrt r)` along `+x1` from the spike
/// center, where `1e-7 < u / max u < 1e-2`.
pub fn decay_rate(u: &GridField) -> Option<f64> {
    let c = spike_center(u);
    let (i, j0) = u.argmax();
    let umax = u.max();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let limit = 0.75 * (u.l - c[0]);
    for j in j0..u.n {
        let r = u.coord(j) - c[0];
        if r > limit {
            break;
        }
        let v = u.get(i, j);
        if v > 1e-7 * umax && v < 1e-2 * umax && r > 0.0 {
            xs.push(r);
            ys.push((v * r.sqrt()).ln());
        }
    }
    if xs.len() < 3 {
        return None;
    }
    Some(-linear_fit(&xs, &ys).0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UntruncationReport {
    /// Largest value of `u` at nodes with `|x| > R1 / eps`.
    pub max_outside: f64,
    pub location: [f64; 2],
    /// Crossover `r` below which `f~ = f`.
    pub threshold: f64,
    pub passes: bool,
    /// Truncated and plain residuals agree bit for bit at every node.
    pub residuals_identical: bool,
    pub max_residual_difference: f64,
}

pub fn untruncation_check(problem: &EpsProblem, u: &GridField) -> Result<UntruncationReport> {
    let r1 = problem.composite.params.radii[1] / problem.eps;
    let mut max_outside = f64::NEG_INFINITY;
    let mut location = [0.0; 2];
    for i in 0..u.n {
        for j in 0..u.n {
            let x = problem.node(i, j);
            if norm(&x) > r1 && u.get(i, j) > max_outside {
                max_outside = u.get(i, j);
                location = x;
            }
        }
    }
    let threshold = problem.composite.trunc.r;
    let trunc = problem.gradient(u)?;
    let plain = problem.plain_residual(u)?;
    let residuals_identical = trunc
        .values
        .iter()
        .zip(&plain.values)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let max_residual_difference = trunc
        .values
        .iter()
        .zip(&plain.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(UntruncationReport {
        max_outside,
        location,
        threshold,
        passes: max_outside < threshold,
        residuals_identical,
        max_residual_difference,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalIdentity {
    /// `1/2 d_nu V(eps c) int_ball u^2`.
    pub v_term: f64,
    /// `d_nu chi(eps c) int_ball (F(u) - F~(u))`.
    pub chi_term: f64,
    /// `(v_term - chi_term) / scale`.
    pub residual: f64,
    /// `1/2 sup_{B2} |grad V| int_ball u^2`.
    pub scale: f64,
}

/// Supremum of `|grad V|` over `B2`, sampled on a polar grid.
fn grad_v_scale(problem: &EpsProblem) -> f64 {
    let r2 = problem.composite.params.radii[2];
    let mut best = 0.0f64;
    for a in 1..=32 {
        let r = r2 * a as f64 / 32.0;
        for b in 0..64 {
            let th = 2.0 * std::f64::consts::PI * b as f64 / 64.0;
            let g = problem.potential.gradient(&[r * th.cos(), r * th.sin()]);
            best = best.max(norm(&g));
        }
    }
    best
}

/// Local Pohozaev-type identity obtained by testing the equation against
/// `d_nu u` on a ball around `center` (rescaled coordinates).
pub fn local_identity_residual(
    problem: &EpsProblem,
    u: &GridField,
    center: [f64; 2],
    radius: f64,
    nu: [f64; 2],
) -> Result<LocalIdentity> {
    let l = problem.l;
    if center[0].abs() + radius > l || center[1].abs() + radius > l {
        return Err(Error::Geometry(format!(
            "ball of radius {radius} at {center:?} leaves the box [-{l}, {l}]^2"
        )));
    }
    let nn = norm(&nu);
    if nn == 0.0 {
        return Err(Error::Config("direction must be nonzero".into()));
    }
    let nu = [nu[0] / nn, nu[1] / nn];
    let h2 = problem.h() * problem.h();
    let t = &problem.composite.trunc;
    let (mut mass, mut excess) = (0.0, 0.0);
    for i in 0..u.n {
        for j in 0..u.n {
            let x = problem.node(i, j);
            if (x[0] - center[0]).hypot(x[1] - center[1]) <= radius {
                let s = u.get(i, j);
                mass += h2 * s * s;
                excess += h2 * (t.spec.primitive(s) - t.primitive_tilde(s));
            }
        }
    }
    let y = [problem.eps * center[0], problem.eps * center[1]];
    let gv = problem.potential.gradient(&y);
    let gc = problem.composite.params.grad_chi(&y);
    let v_term = 0.5 * (gv[0] * nu[0] + gv[1] * nu[1]) * mass;
    let chi_term = (gc[0] * nu[0] + gc[1] * nu[1]) * excess;
    let scale = 0.5 * grad_v_scale(problem) * mass;
    Ok(LocalIdentity {
        v_term,
        chi_term,
        residual: if scale > 0.0 { (v_term - chi_term) / scale } else { v_term - chi_term },
        scale,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerFit {
    pub constant: f64,
    pub exponent: f64,
    pub stderr: f64,
}

/// Least squares `ln y = ln C + alpha ln x`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate("power-law fit needs at least two positive points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, intercept, stderr) = linear_fit(&lx, &ly);
    Ok(PowerFit {
        constant: intercept.exp(),
        exponent: slope,
        stderr,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaFit {
    pub slope: Option<f64>,
    pub constant: f64,
    pub stderr: f64,
    /// Every multiplier was below the noise floor.
    pub at_noise_floor: bool,
    pub passes: bool,
    /// Slope below 1/2: inconsistent with `lambda = O(eps)`.
    pub violation: bool,
}

/// Fit of `ln |lambda_eps|` against `ln eps`.
pub fn lambda_scaling(points: &[(f64, f64)], noise_floor: f64) -> Result<LambdaFit> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "lambda scaling needs at least 3 sweep points, got {}",
            points.len()
        )));
    }
    let above: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1.abs() > noise_floor).collect();
    if above.is_empty() {
        return Ok(LambdaFit {
            slope: None,
            constant: 0.0,
            stderr: 0.0,
            at_noise_floor: true,
            passes: true,
            violation: false,
        });
    }
    if above.len() < 2 {
        return Err(Error::Degenerate("only one multiplier above the noise floor".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = above.iter().map(|p| (p.0, p.1.abs())).unzip();
    let fit = fit_power_law(&x, &y)?;
    Ok(LambdaFit {
        slope: Some(fit.exponent),
        constant: fit.constant,
        stderr: fit.stderr,
        at_noise_floor: false,
        passes: fit.exponent >= 1.0,
        violation: fit.exponent < 0.5,
    })
}

/// One `eps` of the convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub energy_lower: f64,
    pub energy_upper: f64,
    /// `|energy_lower - m|` against the continuum level.
    pub energy_error: f64,
    /// `|energy_lower - m_h|` against the autonomous discrete ground state
    /// on the same grid.
    pub energy_error_matched: f64,
    pub eps_y: f64,
    pub h1_distance: f64,
    pub h1_distance_matched: f64,
    pub lambda_norm: f64,
    pub delta_gap: f64,
    pub degree: Option<i32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub m: f64,
    pub rows: Vec<ConvergenceRow>,
}

const TABLE_COLUMNS: [&str; 11] = [
    "eps",
    "energy_lower",
    "energy_upper",
    "energy_error",
    "energy_error_matched",
    "eps_y",
    "h1_distance",
    "h1_distance_matched",
    "lambda_norm",
    "delta_gap",
    "degree",
];

impl ConvergenceTable {
    /// Rows sorted by decreasing `eps`.
    pub fn new(m: f64, mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        Self { m, rows }
    }

    fn cells(r: &ConvergenceRow) -> [String; 11] {
        [
            format!("{}", r.eps),
            format!("{:.12}", r.energy_lower),
            format!("{:.12}", r.energy_upper),
            format!("{:.6e}", r.energy_error),
            format!("{:.6e}", r.energy_error_matched),
            format!("{:.6e}", r.eps_y),
            format!("{:.6e}", r.h1_distance),
            format!("{:.6e}", r.h1_distance_matched),
            format!("{:.6e}", r.lambda_norm),
            format!("{:.6e}", r.delta_gap),
            r.degree.map_or("-".into(), |d| d.to_string()),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = TABLE_COLUMNS.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&Self::cells(r).join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let body: Vec<[String; 11]> = self.rows.iter().map(Self::cells).collect();
        let widths: Vec<usize> = (0..11)
            .map(|c| body.iter().map(|r| r[c].len()).chain([TABLE_COLUMNS[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut s = line(TABLE_COLUMNS.to_vec());
        s.push('\n');
        for r in &body {
            s.push_str(&line(r.iter().map(|c| c.as_str()).collect()));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Power-law fit of a column against `eps`.
    pub fn fit(&self, column: impl Fn(&ConvergenceRow) -> f64) -> Result<PowerFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = self.rows.iter().map(|r| (r.eps, column(r))).unzip();
        fit_power_law(&x, &y)
    }

    /// Whether a column decreases strictly along decreasing `eps`.
    pub fn decreasing(&self, column: impl Fn(&ConvergenceRow) -> f64) -> bool {
        self.rows.windows(2).all(|w| column(&w[1]) < column(&w[0]))
    }

    /// Whether a column never grows by more than `slack` along decreasing `eps`.
    pub fn non_increasing_with_slack(&self, column: impl Fn(&ConvergenceRow) -> f64, slack: f64) -> bool {
        self.rows.windows(2).all(|w| column(&w[1]) <= slack * column(&w[0]))
    }
}
