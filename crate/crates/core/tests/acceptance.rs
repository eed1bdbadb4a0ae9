//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikelab::config::{Resolved, RunConfig};
use spikelab::grid::{interpolate_radial, EpsProblem, GridField};
use spikelab::limit_problem::{
    build_mp_curve, m_curve, solve_ground_state, CurveOptions, CurvePoint, GroundState, ShootingOptions,
};
use spikelab::minmax::{degree_scan, sweep_csv, ConeSampler};
use spikelab::nonlinearity::{truncation_property_suite, NonlinearitySpec};
use spikelab::pipeline::{limit, run_spike, study_report, Limit, SpikeRun};
use spikelab::potential::PotentialSpec;

type Verdict = Result<(bool, String), String>;

const SWEEP: [f64; 3] = [0.2, 0.1, 0.05];

fn cubic() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0)
}

fn ground(k: f64, dim: usize) -> Result<GroundState, String> {
    solve_ground_state(k, &cubic(), dim, &ShootingOptions::default()).map_err(|e| e.to_string())
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn ground_state_identities() -> Verdict {
    let start = Instant::now();
    let gs = ground(1.0, 2)?;
    let secs = start.elapsed().as_secs_f64();
    let (p, n) = (gs.pohozaev_residual().abs(), gs.nehari_residual().abs());
    let g = rel(gs.grad_norm_sq, gs.l2_norm_sq);
    Ok((
        p < 1e-6 && n < 1e-6 && g < 1e-5 && secs < 5.0,
        format!("pohozaev {p:.2e}, nehari {n:.2e}, |grad|^2/|U|^2 - 1 = {g:.2e}, {secs:.2}s"),
    ))
}

fn scaling_law() -> Verdict {
    let start = Instant::now();
    let m1 = ground(1.0, 2)?.energy;
    let mut worst: f64 = 0.0;
    for k in [0.5, 1.0, 2.0, 4.0] {
        worst = worst.max(rel(ground(k, 2)?.energy, k * m1));
    }
    let mixed = NonlinearitySpec::sum_of_powers(&[(1.0, 3.0), (0.5, 5.0)]);
    let ks: Vec<f64> = (0..8).map(|i| 0.5 + 0.5 * i as f64).collect();
    let rows = m_curve(&ks, &mixed, 2, &ShootingOptions::default()).map_err(|e| e.to_string())?;
    let increasing = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-6 && increasing && rows.len() == 8 && secs < 60.0,
        format!("max |m_k/(k m_1) - 1| = {worst:.2e}, mixed-power m_k increasing: {increasing}, {secs:.1}s"),
    ))
}

/// `Phi(a U(./tau))` from the norms of `U` for `f(s) = s^3`:
/// `a^2 tau^{N-2} |grad U|^2/2 + tau^N (a^2 k |U|^2/2 - a^4 int F(U))`.
fn scaled_energy_oracle(gs: &GroundState, p: CurvePoint) -> f64 {
    let (a, tau) = (p.amplitude, p.dilation);
    let n = gs.dim() as i32;
    0.5 * a * a * tau.powi(n - 2) * gs.grad_norm_sq
        + tau.powi(n) * (0.5 * a * a * gs.k() * gs.l2_norm_sq - a.powi(4) * gs.f_integral)
}

fn mountain_pass_curves() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for dim in [2, 3] {
        let gs = ground(1.0, dim)?;
        let curve = build_mp_curve(&gs, &CurveOptions::default()).map_err(|e| e.to_string())?;
        let samples = 20_001;
        let max = (0..samples)
            .map(|i| scaled_energy_oracle(&gs, curve.point(i as f64 / (samples - 1) as f64)))
            .fold(f64::NEG_INFINITY, f64::max);
        let end = scaled_energy_oracle(&gs, curve.point(1.0));
        let err = rel(max, gs.energy);
        ok &= err < 1e-5 && end < -gs.energy / 2.0;
        parts.push(format!("N={dim}: |max/m - 1| = {err:.2e}, end/m = {:.3}", end / gs.energy));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < 30.0, format!("{}, {secs:.1}s", parts.join("; "))))
}

fn truncation_suite(resolved: &Resolved) -> Verdict {
    let checks = truncation_property_suite(&resolved.composite, 2, 10_000, 2024);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let mut exact = true;
    for q in [1.5, 2.0, 3.0, 4.5] {
        for a in [0.05, 0.3, 0.7] {
            let r = NonlinearitySpec::pure_power(q).crossover_threshold(a).map_err(|e| e.to_string())?;
            exact &= r == a.powf(1.0 / (q - 1.0));
        }
    }
    Ok((
        failed.is_empty() && checks.len() == 5 && exact,
        format!("{} properties, failed {failed:?}, closed-form crossover exact: {exact}", checks.len()),
    ))
}

struct Sweep {
    runs: Vec<SpikeRun>,
    secs: f64,
}

fn sweep(resolved: &Resolved, lim: &Limit) -> Result<Sweep, String> {
    let start = Instant::now();
    let runs = SWEEP
        .iter()
        .map(|&eps| run_spike(resolved, lim, eps, resolved.config.degree_points).map_err(|e| format!("eps {eps}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep {
        runs,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn boundary_gap(s: &Sweep) -> Verdict {
    let d: Vec<f64> = s.runs.iter().map(|r| r.estimate.gap.delta).collect();
    let dm: Vec<f64> = s.runs.iter().map(|r| r.estimate.gap_matched).collect();
    let ok = d.iter().all(|v| *v > 0.0) && d.windows(2).all(|w| w[1] >= w[0]) && s.secs < 600.0;
    Ok((
        ok,
        format!("delta {d:.4?} (same-grid curve level {dm:.4?}), sweep {:.0}s at n = 256", s.secs),
    ))
}

fn degree_check(s: &Sweep, max_config: &Resolved, lim_max: &Limit) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for r in s.runs.iter().filter(|r| r.eps <= 0.1) {
        ok &= !r.degrees.is_empty() && r.degrees.iter().all(|d| d.1 == 1);
        parts.push(format!("saddle eps {}: {:?}", r.eps, r.degrees.iter().map(|d| d.1).collect::<Vec<_>>()));
    }
    for eps in [0.1, 0.05] {
        let p = max_config.problem(eps).map_err(|e| e.to_string())?;
        let sampler = ConeSampler::new(&p, lim_max.curve.clone(), max_config.config.cone.clone());
        let d = degree_scan(&p, &sampler, max_config.config.degree_points).map_err(|e| e.to_string())?;
        ok &= !d.is_empty() && d.iter().all(|x| x.1 == 1);
        parts.push(format!("max eps {eps}: {:?}", d.iter().map(|x| x.1).collect::<Vec<_>>()));
    }
    Ok((ok, parts.join("; ")))
}

fn energy_convergence(s: &Sweep) -> Verdict {
    let m = s.runs[0].m;
    let mut ok = s.secs < 1800.0;
    let mut parts = Vec::new();
    for r in &s.runs {
        let b = r.estimate.bracket;
        let disc = (r.discrete.energy - m).abs();
        let dist = b.distance(m);
        ok &= dist <= b.width() + 2.0 * disc;
        parts.push(format!("eps {}: dist {dist:.2e} <= {:.2e}", r.eps, b.width() + 2.0 * disc));
    }
    let summaries: Vec<_> = s.runs.iter().map(|r| r.summary()).collect();
    let study = study_report(m, &summaries);
    let fit = study.energy_matched.ok_or("energy fit failed")?;
    let raw = study.energy.ok_or("energy fit failed")?;
    ok &= fit.exponent >= 0.8;
    Ok((
        ok,
        format!(
            "{}; |E - m_h| ~ {:.3e} eps^{:.2} (continuum m: eps^{:.2})",
            parts.join(", "),
            fit.constant,
            fit.exponent,
            raw.exponent
        ),
    ))
}

fn concentration(s: &Sweep, r0: f64) -> Verdict {
    let ey: Vec<f64> = s.runs.iter().map(|r| r.diagnostics.eps_y).collect();
    let h1: Vec<f64> = s.runs.iter().map(|r| r.diagnostics.h1_distance_matched).collect();
    let raw: Vec<f64> = s.runs.iter().map(|r| r.diagnostics.h1_distance).collect();
    let norm_u = s.runs[0].diagnostics.ground_h1_norm;
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let last = s.runs.len() - 1;
    let ok = dec(&ey) && ey[last] < r0 / 4.0 && dec(&h1) && h1[last] < 0.1 * norm_u && raw[last] < 0.1 * norm_u;
    Ok((
        ok,
        format!(
            "|eps y| {}; H1 distance to U_h(. - y) {} (to U: {}), 0.1 |U| = {:.3}",
            sci(&ey),
            sci(&h1),
            sci(&raw),
            0.1 * norm_u
        ),
    ))
}

fn multiplier_scaling(s: &Sweep) -> Verdict {
    let summaries: Vec<_> = s.runs.iter().map(|r| r.summary()).collect();
    let study = study_report(s.runs[0].m, &summaries);
    let fit = study.lambda.ok_or("lambda fit failed")?;
    let l: Vec<f64> = s.runs.iter().map(|r| r.estimate.saddle.lambda_norm()).collect();
    Ok((
        fit.passes,
        match fit.slope {
            Some(sl) => format!("|lambda| {}, slope {sl:.2} +- {:.2}", sci(&l), fit.stderr),
            None => "all multipliers at the noise floor".into(),
        },
    ))
}

fn untruncation(s: &Sweep) -> Verdict {
    let r = s.runs.last().ok_or("empty sweep")?;
    let u = &r.diagnostics.untruncation;
    Ok((
        u.passes && u.residuals_identical,
        format!(
            "eps {}: max outside B1 {:.2e} < r = {:.4}, residuals bitwise equal: {}",
            r.eps, u.max_outside, u.threshold, u.residuals_identical
        ),
    ))
}

fn random_field(p: &EpsProblem, rng: &mut ChaCha8Rng) -> GridField {
    let c = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
    let (amp, w) = (rng.gen_range(0.5..2.5), rng.gen_range(0.5..3.0));
    let s = rng.gen_range(-0.3..0.3);
    GridField::from_fn(p.n, p.l, |x, y| {
        amp * (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (w * w)).exp() * (1.0 + s * x)
    })
}

fn solver_hygiene(resolved: &Resolved, rerun: &SpikeRun) -> Verdict {
    // directional derivatives on the full truncated problem
    let p = resolved.problem(0.1).map_err(|e| e.to_string())?;
    let p = EpsProblem::with_half_width(p.eps, p.composite.clone(), p.potential.clone(), p.e_basis.clone(), 64, 12.0)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h2 = p.h() * p.h();
    let mut fd_ok = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..20 {
        let u = random_field(&p, &mut rng);
        let phi = random_field(&p, &mut rng);
        let g = p.gradient(&u).map_err(|e| e.to_string())?;
        let exact: f64 = h2 * g.values.iter().zip(&phi.values).map(|(a, b)| a * b).sum::<f64>();
        let fd = |t: f64| (p.energy(&u.axpy(t, &phi)).unwrap() - p.energy(&u.axpy(-t, &phi)).unwrap()) / (2.0 * t);
        let (e1, e2) = ((fd(2e-2) - exact).abs(), (fd(1e-2) - exact).abs());
        let scale = exact.abs().max(1.0);
        let at_rounding = e2 < 1e-9 * scale;
        if at_rounding || e2 < 0.3 * e1 {
            fd_ok += 1;
        }
        if !at_rounding {
            worst_ratio = worst_ratio.max(e2 / e1);
        }
    }

    // h -> h/2 on the autonomous problem with an interpolated ground state
    let gs = ground(1.0, 2)?;
    let err = |n: usize, l: f64| -> Result<f64, String> {
        let q = EpsProblem::with_half_width(0.2, p.composite.clone(), p.potential.clone(), p.e_basis.clone(), n, l)
            .map_err(|e| e.to_string())?
            .autonomous();
        let u = interpolate_radial(&gs.profile, n, q.l, [0.0, 0.0], 1.0, 1.0);
        Ok((q.energy(&u).map_err(|e| e.to_string())? - gs.energy).abs())
    };
    let l = 12.0;
    let ratios = [err(96, l)? / err(191, l)?, err(128, l)? / err(255, l)?];

    // identical configuration, identical bits
    let lim = limit(resolved).map_err(|e| e.to_string())?;
    let again = run_spike(resolved, &lim, rerun.eps, resolved.config.degree_points).map_err(|e| e.to_string())?;
    let csv_a = sweep_csv(&[rerun.sweep_row()]);
    let csv_b = sweep_csv(&[again.sweep_row()]);
    let bits = csv_a == csv_b
        && rerun
            .estimate
            .saddle
            .u_eps
            .values
            .iter()
            .zip(&again.estimate.saddle.u_eps.values)
            .all(|(a, b)| a.to_bits() == b.to_bits());

    Ok((
        fd_ok == 20 && ratios.iter().all(|r| *r >= 3.0) && bits,
        format!(
            "FD second order on {fd_ok}/20 pairs (worst error ratio {worst_ratio:.3}), refinement ratios {ratios:.2?}, bit-identical rerun: {bits}"
        ),
    ))
}

fn main() {
    let total = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, v: Verdict| {
        let (pass, detail) = v.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failures += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };

    report(1, "ground-state identities", ground_state_identities());
    report(2, "scaling law and m_k monotonicity", scaling_law());
    report(3, "mountain-pass curves", mountain_pass_curves());

    let saddle = RunConfig::default().resolve();
    let mut max_cfg = RunConfig::default();
    max_cfg.potential.spec = PotentialSpec::gaussian_max(0.3);
    let maxc = max_cfg.resolve();
    let (saddle, maxc) = match (saddle, maxc) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            let e = format!("{:?} / {:?}", a.err(), b.err());
            for (id, name) in [
                (4, "truncation suite"),
                (5, "boundary gap"),
                (6, "degree"),
                (7, "energy convergence"),
                (8, "concentration"),
                (9, "multiplier scaling"),
                (10, "untruncation"),
                (11, "solver hygiene"),
            ] {
                report(id, name, Err(format!("configuration: {e}")));
            }
            std::process::exit(1);
        }
    };
    report(4, "truncation suite", truncation_suite(&saddle));

    let pipeline = limit(&saddle)
        .and_then(|l| limit(&maxc).map(|m| (l, m)))
        .map_err(|e| e.to_string())
        .and_then(|(l, m)| sweep(&saddle, &l).map(|s| (l, m, s)));
    match pipeline {
        Ok((_, lim_max, s)) => {
            report(5, "boundary gap", boundary_gap(&s));
            report(6, "degree", degree_check(&s, &maxc, &lim_max));
            report(7, "energy convergence", energy_convergence(&s));
            report(8, "concentration", concentration(&s, saddle.composite.params.radii[0]));
            report(9, "multiplier scaling", multiplier_scaling(&s));
            report(10, "untruncation", untruncation(&s));
            report(11, "solver hygiene", solver_hygiene(&saddle, &s.runs[0]));
        }
        Err(e) => {
            for (id, name) in [
                (5, "boundary gap"),
                (6, "degree"),
                (7, "energy convergence"),
                (8, "concentration"),
                (9, "multiplier scaling"),
                (10, "untruncation"),
                (11, "solver hygiene"),
            ] {
                report(id, name, Err(e.clone()));
            }
        }
    }
    println!("acceptance: {} failed, {:.0}s", failures, total.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
