//! The cone `C_eps = { gamma_t(. - xi) : t in [0,1], xi in B0^eps cap E }`,
//! its energy scans, the boundary gap, the degree of
//! `psi_t(xi) = beta_eps(gamma_t(. - xi))` and the barycenter-constrained
//! saddle search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate_radial, EpsProblem, GridField, NewtonOptions};
use crate::limit_problem::MpCurve;
use crate::quadrature::golden_section;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeOptions {
    pub t_points: usize,
    /// Points per axis of the `xi` scan inside the ball.
    pub xi_points: usize,
    /// Boundary samples for the gap when `dim E = 2`.
    pub gap_circle_points: usize,
    pub degree_circle_points: usize,
    pub refine_iters: usize,
}

impl Default for ConeOptions {
    fn default() -> Self {
        Self {
            t_points: 41,
            xi_points: 21,
            gap_circle_points: 32,
            degree_circle_points: 256,
            refine_iters: 40,
        }
    }
}

/// Samples of the cone for one problem instance.
#[derive(Debug, Clone)]
pub struct ConeSampler {
    pub curve: MpCurve,
    pub eps: f64,
    pub e_basis: Vec<Vec<f64>>,
    /// `R0 / eps`.
    pub xi_radius: f64,
    pub opts: ConeOptions,
}

impl ConeSampler {
    pub fn new(problem: &EpsProblem, curve: MpCurve, opts: ConeOptions) -> Self {
        Self {
            curve,
            eps: problem.eps,
            e_basis: problem.e_basis.clone(),
            xi_radius: problem.composite.params.radii[0] / problem.eps,
            opts,
        }
    }

    pub fn e_dim(&self) -> usize {
        self.e_basis.len()
    }

    pub fn center(&self, xi: &[f64]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (x, e) in xi.iter().zip(&self.e_basis) {
            c[0] += x * e[0];
            c[1] += x * e[1];
        }
        c
    }

    /// `gamma_t(. - xi)` on the problem grid.
    pub fn element(&self, problem: &EpsProblem, t: f64, xi: &[f64]) -> GridField {
        let p = self.curve.point(t);
        interpolate_radial(
            &self.curve.ground.profile,
            problem.n,
            problem.l,
            self.center(xi),
            p.amplitude,
            p.dilation,
        )
    }

    pub fn energy(&self, problem: &EpsProblem, t: f64, xi: &[f64]) -> f64 {
        problem
            .energy(&self.element(problem, t, xi))
            .expect("cone elements share the problem geometry")
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let n = self.opts.t_points.max(2);
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    /// Points of the closed ball `|xi| <= R0/eps` in `E` coordinates.
    pub fn xi_samples(&self) -> Vec<Vec<f64>> {
        let n = self.opts.xi_points.max(2);
        let rho = self.xi_radius;
        let axis: Vec<f64> = (0..n).map(|i| -rho + 2.0 * rho * i as f64 / (n - 1) as f64).collect();
        match self.e_dim() {
            1 => axis.iter().map(|&x| vec![x]).collect(),
            _ => {
                let mut pts = Vec::new();
                for &a in &axis {
                    for &b in &axis {
                        if a.hypot(b) <= rho * (1.0 + 1e-12) {
                            pts.push(vec![a, b]);
                        }
                    }
                }
                pts
            }
        }
    }

    /// Points of the sphere `|xi| = R0/eps` in `E`.
    pub fn xi_boundary(&self, circle_points: usize) -> Vec<Vec<f64>> {
        let rho = self.xi_radius;
        match self.e_dim() {
            1 => vec![vec![-rho], vec![rho]],
            _ => (0..circle_points)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / circle_points as f64;
                    vec![rho * th.cos(), rho * th.sin()]
                })
                .collect(),
        }
    }

    /// Curve parameter for degree checks: the energy maximiser minus 0.2,
    /// clamped to stay positive.
    pub fn default_t0(&self) -> f64 {
        (self.curve.t_ground - 0.2).max(0.02)
    }

    fn refine_t(&self, problem: &EpsProblem, t: f64, xi: &[f64]) -> (f64, f64) {
        let dt = 1.0 / (self.opts.t_points.max(2) - 1) as f64;
        let (lo, hi) = ((t - dt).max(0.0), (t + dt).min(1.0));
        let (tb, nb) = golden_section(|s| -self.energy(problem, s, xi), lo, hi, self.opts.refine_iters);
        let e0 = self.energy(problem, t, xi);
        if -nb > e0 {
            (tb, -nb)
        } else {
            (t, e0)
        }
    }

    /// `max_t` of the energy at fixed `xi`: scan then golden refinement.
    pub fn max_over_t(&self, problem: &EpsProblem, xi: &[f64]) -> (f64, f64) {
        let (mut bt, mut be) = (0.0, f64::NEG_INFINITY);
        for t in self.t_grid() {
            let e = self.energy(problem, t, xi);
            if e > be {
                bt = t;
                be = e;
            }
        }
        self.refine_t(problem, bt, xi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeMax {
    pub energy: f64,
    pub t: f64,
    pub xi: Vec<f64>,
}

/// Maximum of the truncated energy over the sampled cone.
pub fn cone_max_energy(problem: &EpsProblem, sampler: &ConeSampler) -> ConeMax {
    let mut best = ConeMax {
        energy: f64::NEG_INFINITY,
        t: 0.0,
        xi: vec![0.0; sampler.e_dim()],
    };
    let ts = sampler.t_grid();
    for xi in sampler.xi_samples() {
        for &t in &ts {
            let e = sampler.energy(problem, t, &xi);
            if e > best.energy {
                best = ConeMax { energy: e, t, xi: xi.clone() };
            }
        }
    }
    // alternate golden refinements in t and along each E axis
    let n = sampler.opts.xi_points.max(2);
    let dxi = 2.0 * sampler.xi_radius / (n - 1) as f64;
    for _ in 0..2 {
        let (t, e) = sampler.refine_t(problem, best.t, &best.xi);
        if e > best.energy {
            best.t = t;
            best.energy = e;
        }
        for axis in 0..sampler.e_dim() {
            let base = best.xi.clone();
            let at = |s: f64| {
                let mut x = base.clone();
                x[axis] = s;
                x
            };
            let lo = base[axis] - dxi;
            let hi = base[axis] + dxi;
            let inside = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt() <= sampler.xi_radius;
            let (s, ne) = golden_section(
                |s| {
                    let x = at(s);
                    if inside(&x) {
                        -sampler.energy(problem, best.t, &x)
                    } else {
                        f64::INFINITY
                    }
                },
                lo,
                hi,
                sampler.opts.refine_iters,
            );
            if -ne > best.energy {
                best.energy = -ne;
                best.xi = at(s);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryGap {
    /// `m - max over the sampled boundary of the cone`.
    pub delta: f64,
    pub m_reference: f64,
    /// Largest energy on the face `t = 1`; must be negative.
    pub t1_max: f64,
    /// Largest energy on the face `|xi| = R0/eps`.
    pub side_max: f64,
    pub side_argmax_t: f64,
    pub side_argmax_xi: Vec<f64>,
}

impl BoundaryGap {
    pub fn passes(&self) -> bool {
        self.delta > 0.0 && self.t1_max < 0.0
    }

    pub fn check(&self) -> Result<()> {
        if self.passes() {
            Ok(())
        } else {
            Err(Error::BoundaryGap { gap: self.delta.min(-self.t1_max) })
        }
    }
}

/// Worst-case margin between `m_reference` and the energy on the boundary
/// of the cone.
pub fn boundary_gap(problem: &EpsProblem, sampler: &ConeSampler, m_reference: f64) -> BoundaryGap {
    let t1_max = sampler
        .xi_samples()
        .iter()
        .map(|xi| sampler.energy(problem, 1.0, xi))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut side = (f64::NEG_INFINITY, 0.0, Vec::new());
    for xi in sampler.xi_boundary(sampler.opts.gap_circle_points) {
        let (t, e) = sampler.max_over_t(problem, &xi);
        if e > side.0 {
            side = (e, t, xi);
        }
    }
    BoundaryGap {
        delta: m_reference - side.0.max(t1_max),
        m_reference,
        t1_max,
        side_max: side.0,
        side_argmax_t: side.1,
        side_argmax_xi: side.2,
    }
}

/// `max_t` of the autonomous discrete energy along the centred curve: the
/// mountain-pass level seen at the grid resolution.
pub fn discrete_curve_level(problem: &EpsProblem, sampler: &ConeSampler) -> f64 {
    let aut = problem.autonomous();
    sampler.max_over_t(&aut, &vec![0.0; sampler.e_dim()]).1
}

/// `psi_t(xi) = beta_eps(gamma_t(. - xi))`.
pub fn psi_map(problem: &EpsProblem, sampler: &ConeSampler, t: f64, xi: &[f64]) -> Result<Vec<f64>> {
    problem.barycenter(&sampler.element(problem, t, xi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeTrace {
    pub t: f64,
    pub degree: i32,
    pub xi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl DegreeTrace {
    pub fn to_csv(&self) -> String {
        let d = self.xi.first().map_or(0, |x| x.len());
        let mut s = String::new();
        let head: Vec<String> = (0..d)
            .map(|k| format!("xi{k}"))
            .chain((0..d).map(|k| format!("psi{k}")))
            .collect();
        s.push_str(&head.join(","));
        s.push('\n');
        for (x, p) in self.xi.iter().zip(&self.psi) {
            let row: Vec<String> = x.iter().chain(p).map(|v| v.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Brouwer degree of `psi_t` on `B0^eps cap E` with respect to 0, from the
/// boundary values: sign change for `dim E = 1`, winding number for 2.
pub fn degree_trace(problem: &EpsProblem, sampler: &ConeSampler, t: f64) -> Result<DegreeTrace> {
    let xi = sampler.xi_boundary(sampler.opts.degree_circle_points);
    let psi = xi
        .iter()
        .map(|x| psi_map(problem, sampler, t, x))
        .collect::<Result<Vec<_>>>()?;
    let floor = 1e-12 * sampler.xi_radius;
    for (x, p) in xi.iter().zip(&psi) {
        if p.iter().map(|v| v * v).sum::<f64>().sqrt() <= floor {
            return Err(Error::DegreeUndefined { xi: x.clone() });
        }
    }
    let degree = match sampler.e_dim() {
        1 => ((psi[1][0].signum() - psi[0][0].signum()) / 2.0) as i32,
        2 => {
            let ang: Vec<f64> = psi.iter().map(|p| p[1].atan2(p[0])).collect();
            let mut total = 0.0;
            for k in 0..ang.len() {
                let mut d = ang[(k + 1) % ang.len()] - ang[k];
                while d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                while d <= -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                total += d;
            }
            (total / (2.0 * std::f64::consts::PI)).round() as i32
        }
        d => return Err(Error::Geometry(format!("degree check needs dim E in 1..=2, got {d}"))),
    };
    Ok(DegreeTrace { t, degree, xi, psi })
}

pub fn degree_check(problem: &EpsProblem, sampler: &ConeSampler, t: f64) -> Result<i32> {
    degree_trace(problem, sampler, t).map(|d| d.degree)
}

/// Degrees at `count` parameters evenly spread over `[t0, 1]`.
pub fn degree_scan(problem: &EpsProblem, sampler: &ConeSampler, count: usize) -> Result<Vec<(f64, i32)>> {
    let t0 = sampler.default_t0();
    let count = count.max(2);
    (0..count)
        .map(|k| {
            let t = t0 + (1.0 - t0) * k as f64 / (count - 1) as f64;
            degree_check(problem, sampler, t).map(|d| (t, d))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleResult {
    pub u_eps: GridField,
    /// `lambda_eps` in `E` coordinates.
    pub lambda_eps: Vec<f64>,
    pub energy: f64,
    /// Sup norm of the constrained residual.
    pub residual: f64,
    pub barycenter: Vec<f64>,
    pub barycenter_norm: f64,
    /// `beta_eps(u_eps)` recomputed by the independent quadrature path.
    pub barycenter_check: Vec<f64>,
    pub min_value: f64,
    pub iterations: usize,
    pub linear_iterations: usize,
}

impl SaddleResult {
    pub fn lambda_norm(&self) -> f64 {
        self.lambda_eps.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Bordered Newton for `-Lap u + V(eps x) u - g_eps(x, u) - (lambda . h_eps) u = 0`
/// with `beta_eps(u) = 0`. Fields whose energy falls below `energy_floor`
/// are rejected as collapsed.
pub fn constrained_saddle(
    problem: &EpsProblem,
    seed: &GridField,
    opts: &NewtonOptions,
    energy_floor: f64,
) -> Result<SaddleResult> {
    let lambda0 = vec![0.0; problem.e_dim()];
    let out = problem.newton_core(seed, Some(&lambda0), opts)?;
    let energy = problem.energy(&out.field)?;
    if !(energy >= energy_floor) {
        return Err(Error::Collapsed {
            energy,
            floor: energy_floor,
        });
    }
    let barycenter_check = problem.barycenter_independent(&out.field)?;
    Ok(SaddleResult {
        lambda_eps: out.lambda,
        energy,
        residual: out.residual,
        barycenter_norm: out.barycenter.iter().map(|v| v * v).sum::<f64>().sqrt(),
        barycenter: out.barycenter,
        barycenter_check,
        min_value: out.field.min(),
        iterations: out.iterations,
        linear_iterations: out.linear_iterations,
        u_eps: out.field,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Distance from `x` to the interval.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lower {
            self.lower - x
        } else if x > self.upper {
            x - self.upper
        } else {
            0.0
        }
    }
}

/// Cone element at the maximiser. On the middle piece of the planar curve
/// (amplitude 1) every point is a maximiser up to `O(eps^2 + h^2)`; there
/// the undilated profile is used.
pub fn saddle_seed(problem: &EpsProblem, sampler: &ConeSampler, cone_max: &ConeMax) -> GridField {
    let on_plateau = (sampler.curve.point(cone_max.t).amplitude - 1.0).abs() < 1e-12;
    let t = if on_plateau { sampler.curve.t_ground } else { cone_max.t };
    sampler.element(problem, t, &cone_max.xi)
}

/// Everything computed for one `eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsEstimate {
    pub eps: f64,
    pub cone_max: ConeMax,
    pub gap: BoundaryGap,
    /// Gap measured against the discrete level of the centred curve.
    pub gap_matched: f64,
    pub m_discrete: f64,
    pub saddle: SaddleResult,
    pub bracket: Bracket,
}

/// Cone scan, boundary gap, saddle from the cone maximiser and the bracket
/// `[saddle energy, cone max]` for `m_eps`.
pub fn estimate_m_eps(
    problem: &EpsProblem,
    sampler: &ConeSampler,
    opts: &NewtonOptions,
) -> Result<EpsEstimate> {
    let m = sampler.curve.ground.energy;
    let gap = boundary_gap(problem, sampler, m);
    gap.check()?;
    let m_discrete = discrete_curve_level(problem, sampler);
    let gap_matched = m_discrete - gap.side_max.max(gap.t1_max);
    let cone_max = cone_max_energy(problem, sampler);
    let seed = saddle_seed(problem, sampler, &cone_max);
    let saddle = constrained_saddle(problem, &seed, opts, m / 4.0).map_err(|e| match e {
        Error::Collapsed { .. } => e,
        other => Error::SaddleDivergence(other.to_string()),
    })?;
    let bracket = Bracket {
        lower: saddle.energy,
        upper: cone_max.energy,
    };
    Ok(EpsEstimate {
        eps: problem.eps,
        cone_max,
        gap,
        gap_matched,
        m_discrete,
        saddle,
        bracket,
    })
}

/// One line of the sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub energy_lower: f64,
    pub energy_upper: f64,
    pub lambda_norm: f64,
    pub barycenter_norm: f64,
    pub delta_gap: f64,
    pub degree: Option<i32>,
    pub status: String,
}

impl SweepRow {
    pub fn from_estimate(est: &EpsEstimate, degree: Option<i32>) -> Self {
        Self {
            eps: est.eps,
            energy_lower: est.bracket.lower,
            energy_upper: est.bracket.upper,
            lambda_norm: est.saddle.lambda_norm(),
            barycenter_norm: est.saddle.barycenter_norm,
            delta_gap: est.gap.delta,
            degree,
            status: "ok".into(),
        }
    }

    pub fn failed(eps: f64, status: impl Into<String>) -> Self {
        Self {
            eps,
            energy_lower: f64::NAN,
            energy_upper: f64::NAN,
            lambda_norm: f64::NAN,
            barycenter_norm: f64::NAN,
            delta_gap: f64::NAN,
            degree: None,
            status: status.into(),
        }
    }
}

pub const SWEEP_HEADER: &str =
    "eps,energy_lower,energy_upper,lambda_norm,barycenter_norm,delta_gap,degree,status";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{},{}\n",
            r.eps,
            r.energy_lower,
            r.energy_upper,
            r.lambda_norm,
            r.barycenter_norm,
            r.delta_gap,
            r.degree.map_or(String::new(), |d| d.to_string()),
            r.status
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_MARGIN;
    use crate::limit_problem::{build_mp_curve, solve_ground_state, CurveOptions, ShootingOptions};
    use crate::nonlinearity::{Composite, NonlinearitySpec, TruncationParams};
    use crate::potential::PotentialSpec;

    fn setup(v: PotentialSpec, e: Vec<Vec<f64>>, eps: f64, n: usize) -> (EpsProblem, ConeSampler) {
        let spec = NonlinearitySpec::pure_power(3.0);
        let params = TruncationParams {
            a: TruncationParams::default_slope(spec.mu, v.alpha1),
            radii: [0.2, 0.5, 0.6, 0.7, 0.8],
            alpha1: v.alpha1,
        };
        let comp = Composite::new(spec.clone(), params).unwrap();
        let p = EpsProblem::new(eps, comp, v, e, n, DEFAULT_MARGIN).unwrap();
        let gs = solve_ground_state(1.0, &spec, 2, &ShootingOptions::default()).unwrap();
        let curve = build_mp_curve(&gs, &CurveOptions::default()).unwrap();
        let opts = ConeOptions {
            t_points: 17,
            xi_points: 7,
            gap_circle_points: 8,
            degree_circle_points: 64,
            refine_iters: 30,
        };
        let s = ConeSampler::new(&p, curve, opts);
        (p, s)
    }

    #[test]
    fn autonomous_cone_max_is_level() {
        let (p, s) = setup(PotentialSpec::constant(2), vec![vec![1.0, 0.0]], 0.2, 128);
        let aut = p.autonomous();
        let cm = cone_max_energy(&aut, &s);
        let m = s.curve.ground.energy;
        assert!((cm.energy - m).abs() < 1e-2 * m, "{} {m}", cm.energy);
        let point = s.curve.point(cm.t);
        assert!((point.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degree_one_for_saddle_and_max() {
        let (p, s) = setup(
            PotentialSpec::gaussian_saddle_skewed(0.3, 0.1),
            vec![vec![1.0, 0.0]],
            0.1,
            96,
        );
        let t0 = s.default_t0();
        assert!(t0 > 0.0);
        assert_eq!(degree_check(&p, &s, s.curve.t_ground).unwrap(), 1);
        let trace = degree_trace(&p, &s, t0).unwrap();
        assert!(trace.psi[0][0] < 0.0 && trace.psi[1][0] > 0.0);

        let (p, s) = setup(
            PotentialSpec::gaussian_max(0.3),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            0.1,
            96,
        );
        assert_eq!(degree_check(&p, &s, s.curve.t_ground).unwrap(), 1);
    }

    #[test]
    fn psi_tracks_translation_in_autonomous_case() {
        let (p, s) = setup(PotentialSpec::constant(2), vec![vec![1.0, 0.0]], 0.2, 96);
        for xi in [-0.8, -0.3, 0.3, 0.8] {
            let b = psi_map(&p, &s, s.curve.t_ground, &[xi]).unwrap()[0];
            assert!(b.signum() == xi.signum());
        }
    }

    #[test]
    fn symmetric_constrained_saddle_has_zero_multiplier() {
        let (p, s) = setup(PotentialSpec::constant(2), vec![vec![1.0, 0.0]], 0.2, 96);
        let aut = p.autonomous();
        let seed = s.element(&aut, s.curve.t_ground, &[0.0]);
        let r = constrained_saddle(&aut, &seed, &NewtonOptions::default(), s.curve.ground.energy / 4.0).unwrap();
        assert!(r.lambda_norm() < 1e-10, "{:?}", r.lambda_eps);
        assert!(r.residual < 1e-9 && r.barycenter_norm < 1e-9);
        let plain = aut.newton_solve(&seed, &NewtonOptions::default()).unwrap();
        let diff = r
            .u_eps
            .values
            .iter()
            .zip(&plain.field.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-8);
    }

    #[test]
    fn zero_seed_rejected_as_collapsed() {
        let (p, s) = setup(PotentialSpec::constant(2), vec![vec![1.0, 0.0]], 0.2, 48);
        let tiny = s.element(&p, 0.01, &[0.0]);
        // a small amplitude seed falls to the trivial solution
        match constrained_saddle(&p, &tiny, &NewtonOptions::default(), s.curve.ground.energy / 4.0) {
            Err(Error::Collapsed { .. }) | Err(Error::NoConvergence { .. }) | Err(Error::ZeroField) => {}
            Err(e) => panic!("unexpected error {e}"),
            Ok(r) => panic!("accepted energy {}", r.energy),
        }
    }

    #[test]
    fn sweep_csv_format() {
        let rows = vec![SweepRow::failed(0.1, "boundary gap")];
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with(SWEEP_HEADER));
        assert_eq!(csv.lines().count(), 2);
        let b = Bracket { lower: 1.0, upper: 2.0 };
        assert_eq!(b.distance(1.5), 0.0);
        assert_eq!(b.distance(2.5), 0.5);
    }
}
