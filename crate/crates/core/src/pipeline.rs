//! The per-`eps` pipeline: cone scan, boundary gap, constrained saddle,
//! discrete reference ground state and the spike diagnostics.

use serde::{Deserialize, Serialize};

use crate::config::Resolved;
use crate::diagnostics::{
    decay_rate, distance_to_ground_states, lambda_scaling, local_identity_residual, spike_center,
    untruncation_check, ConvergenceRow, ConvergenceTable, GroundReference, LambdaFit, LocalIdentity, PowerFit,
    UntruncationReport,
};
use crate::error::Result;
use crate::grid::{interpolate_radial, EpsProblem, GridField, NewtonOptions};
use crate::limit_problem::{build_mp_curve, solve_ground_state, CurveOptions, GroundState, MpCurve, ShootingOptions};
use crate::minmax::{degree_scan, estimate_m_eps, ConeSampler, EpsEstimate, SweepRow};
use crate::nonlinearity::norm;

/// Ground state of the limit problem at `k = V(0) = 1` and its curve.
#[derive(Debug, Clone)]
pub struct Limit {
    pub ground: GroundState,
    pub curve: MpCurve,
}

pub fn limit(resolved: &Resolved) -> Result<Limit> {
    let k = resolved.potential.value(&[0.0, 0.0]);
    let ground = solve_ground_state(k, &resolved.composite.trunc.spec, 2, &ShootingOptions::default())?;
    let curve = build_mp_curve(&ground, &CurveOptions::default())?;
    Ok(Limit { ground, curve })
}

/// Positive critical point of the autonomous functional on the same grid.
#[derive(Debug, Clone)]
pub struct DiscreteGround {
    pub energy: f64,
    pub field: GridField,
}

pub fn discrete_ground_state(problem: &EpsProblem, ground: &GroundState, opts: &NewtonOptions) -> Result<DiscreteGround> {
    let auto = problem.autonomous();
    let seed = interpolate_radial(&ground.profile, problem.n, problem.l, [0.0, 0.0], 1.0, 1.0);
    let out = auto.newton_solve(&seed, opts)?;
    Ok(DiscreteGround {
        energy: auto.energy(&out.field)?,
        field: out.field,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeDiagnostics {
    pub y_eps: [f64; 2],
    /// `|eps y_eps|`.
    pub eps_y: f64,
    pub h1_distance: f64,
    pub h1_distance_matched: f64,
    pub ground_h1_norm: f64,
    pub decay_rate: Option<f64>,
    pub untruncation: UntruncationReport,
    pub local_identity: LocalIdentity,
}

#[derive(Debug, Clone)]
pub struct SpikeRun {
    pub eps: f64,
    pub h: f64,
    pub m: f64,
    pub estimate: EpsEstimate,
    pub discrete: DiscreteGround,
    pub degrees: Vec<(f64, i32)>,
    pub diagnostics: SpikeDiagnostics,
}

/// Scalar summary written as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeSummary {
    pub eps: f64,
    pub n: usize,
    pub h: f64,
    pub m: f64,
    pub m_h: f64,
    pub m_curve_h: f64,
    pub energy: f64,
    pub cone_max: f64,
    pub cone_argmax_t: f64,
    pub cone_argmax_xi: Vec<f64>,
    pub delta_gap: f64,
    pub delta_gap_matched: f64,
    pub lambda_eps: Vec<f64>,
    pub residual: f64,
    pub barycenter: Vec<f64>,
    pub barycenter_check: Vec<f64>,
    pub min_value: f64,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub degrees: Vec<(f64, i32)>,
    pub diagnostics: SpikeDiagnostics,
}

impl SpikeRun {
    pub fn summary(&self) -> SpikeSummary {
        let e = &self.estimate;
        let s = &e.saddle;
        SpikeSummary {
            eps: self.eps,
            n: s.u_eps.n,
            h: self.h,
            m: self.m,
            m_h: self.discrete.energy,
            m_curve_h: e.m_discrete,
            energy: s.energy,
            cone_max: e.cone_max.energy,
            cone_argmax_t: e.cone_max.t,
            cone_argmax_xi: e.cone_max.xi.clone(),
            delta_gap: e.gap.delta,
            delta_gap_matched: e.gap_matched,
            lambda_eps: s.lambda_eps.clone(),
            residual: s.residual,
            barycenter: s.barycenter.clone(),
            barycenter_check: s.barycenter_check.clone(),
            min_value: s.min_value,
            newton_iterations: s.iterations,
            linear_iterations: s.linear_iterations,
            degrees: self.degrees.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn degree(&self) -> Option<i32> {
        common_degree(&self.degrees)
    }

    pub fn sweep_row(&self) -> SweepRow {
        let mut row = SweepRow::from_estimate(&self.estimate, self.degree());
        if !self.degrees.is_empty() && row.degree.is_none() {
            row.status = "degree_mixed".into();
        }
        row
    }

    pub fn convergence_row(&self) -> ConvergenceRow {
        self.summary().convergence_row()
    }
}

/// Common degree of a scan, if all scanned levels agree.
pub fn common_degree(degrees: &[(f64, i32)]) -> Option<i32> {
    let first = degrees.first()?.1;
    degrees.iter().all(|d| d.1 == first).then_some(first)
}

impl SpikeSummary {
    pub fn convergence_row(&self) -> ConvergenceRow {
        ConvergenceRow {
            eps: self.eps,
            energy_lower: self.energy,
            energy_upper: self.cone_max,
            energy_error: (self.energy - self.m).abs(),
            energy_error_matched: (self.energy - self.m_h).abs(),
            eps_y: self.diagnostics.eps_y,
            h1_distance: self.diagnostics.h1_distance,
            h1_distance_matched: self.diagnostics.h1_distance_matched,
            lambda_norm: norm(&self.lambda_eps),
            delta_gap: self.delta_gap,
            degree: common_degree(&self.degrees),
        }
    }
}

/// Absolute noise floor for `|lambda_eps|`.
pub const LAMBDA_NOISE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub table: ConvergenceTable,
    pub lambda: Option<LambdaFit>,
    pub energy: Option<PowerFit>,
    pub energy_matched: Option<PowerFit>,
}

/// Convergence table and the fits across a sweep; fits needing more points
/// than available are left empty.
pub fn study_report(m: f64, summaries: &[SpikeSummary]) -> StudyReport {
    let table = ConvergenceTable::new(m, summaries.iter().map(|s| s.convergence_row()).collect());
    let pts: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.eps, r.lambda_norm)).collect();
    let lambda = lambda_scaling(&pts, LAMBDA_NOISE_FLOOR).ok();
    let energy = table.fit(|r| r.energy_error).ok();
    let energy_matched = table.fit(|r| r.energy_error_matched).ok();
    StudyReport {
        table,
        lambda,
        energy,
        energy_matched,
    }
}

pub fn spike_diagnostics(
    problem: &EpsProblem,
    u: &GridField,
    ground: &GroundState,
    discrete: &DiscreteGround,
) -> Result<SpikeDiagnostics> {
    let y = spike_center(u);
    let h1 = distance_to_ground_states(u, GroundReference::Profile(&ground.profile));
    let h1m = distance_to_ground_states(u, GroundReference::Field(&discrete.field));
    let untruncation = untruncation_check(problem, u)?;
    let e1 = problem.e_basis.first().cloned().unwrap_or_else(|| vec![1.0, 0.0]);
    let radius = problem.composite.params.radii[0] / problem.eps;
    let local_identity = local_identity_residual(problem, u, y, radius, [e1[0], e1[1]])?;
    Ok(SpikeDiagnostics {
        y_eps: y,
        eps_y: problem.eps * norm(&y),
        h1_distance: h1.distance,
        h1_distance_matched: h1m.distance,
        ground_h1_norm: ground.h1_norm(),
        decay_rate: decay_rate(u),
        untruncation,
        local_identity,
    })
}

/// Full pipeline at one `eps`; `degree_points = 0` skips the degree scan.
pub fn run_spike(resolved: &Resolved, limit: &Limit, eps: f64, degree_points: usize) -> Result<SpikeRun> {
    let problem = resolved.problem(eps)?;
    let sampler = ConeSampler::new(&problem, limit.curve.clone(), resolved.config.cone.clone());
    let opts = resolved.config.solver.newton();
    let estimate = estimate_m_eps(&problem, &sampler, &opts)?;
    let degrees = if degree_points > 0 {
        degree_scan(&problem, &sampler, degree_points)?
    } else {
        Vec::new()
    };
    let discrete = discrete_ground_state(&problem, &limit.ground, &opts)?;
    let diagnostics = spike_diagnostics(&problem, &estimate.saddle.u_eps, &limit.ground, &discrete)?;
    Ok(SpikeRun {
        eps,
        h: problem.h(),
        m: limit.ground.energy,
        estimate,
        discrete,
        degrees,
        diagnostics,
    })
}
