//! Browser demo: the radial ground state, the truncated nonlinearity with
//! its cutoff, and the energy along the mountain-pass curve. Every export
//! returns a JSON string; errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use spikelab::limit_problem::{build_mp_curve, solve_ground_state, CurveOptions, ShootingOptions};
use spikelab::nonlinearity::{NonlinearitySpec, Truncated, TruncationParams};

const PLOT_POINTS: usize = 241;

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}")),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

fn power(q: f64) -> Result<NonlinearitySpec, String> {
    let spec = NonlinearitySpec::pure_power(q);
    spec.validate(2).map_err(|e| e.to_string())?;
    Ok(spec)
}

#[derive(Debug, Serialize)]
pub struct ProfileView {
    pub k: f64,
    pub m: f64,
    pub u0: f64,
    pub pohozaev_residual: f64,
    pub nehari_residual: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

pub fn ground_state_view(q: f64, k: f64) -> Result<ProfileView, String> {
    if !(k > 0.0 && k <= 100.0) {
        return Err(format!("k = {k} outside (0, 100]"));
    }
    let gs = solve_ground_state(k, &power(q)?, 2, &ShootingOptions::default()).map_err(|e| e.to_string())?;
    let r_end = gs.profile.r_max / 2.0;
    let r: Vec<f64> = (0..PLOT_POINTS).map(|i| r_end * i as f64 / (PLOT_POINTS - 1) as f64).collect();
    let u = r.iter().map(|&x| gs.profile.eval(x)).collect();
    Ok(ProfileView {
        k,
        m: gs.energy,
        u0: gs.u0,
        pohozaev_residual: gs.pohozaev_residual(),
        nehari_residual: gs.nehari_residual(),
        r,
        u,
    })
}

#[derive(Debug, Serialize)]
pub struct TruncationView {
    pub a: f64,
    pub crossover: f64,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub radius: Vec<f64>,
    pub chi: Vec<f64>,
}

/// `a = fraction (1 - 2/mu) alpha1`; the admissible range is `0 < fraction < 1`.
pub fn truncation_view(q: f64, fraction: f64, alpha1: f64) -> Result<TruncationView, String> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(format!("slope fraction {fraction} outside (0, 1)"));
    }
    if !(alpha1 > 0.0) {
        return Err("alpha1 must be positive".into());
    }
    let spec = power(q)?;
    let a = fraction * (1.0 - 2.0 / spec.mu) * alpha1;
    let t = Truncated::new(spec, a).map_err(|e| e.to_string())?;
    let s_end = 2.5 * t.r;
    let s: Vec<f64> = (0..PLOT_POINTS).map(|i| s_end * i as f64 / (PLOT_POINTS - 1) as f64).collect();
    let params = TruncationParams {
        a,
        radii: [0.2, 0.5, 0.6, 0.7, 0.8],
        alpha1,
    };
    let radius: Vec<f64> = (0..PLOT_POINTS).map(|i| i as f64 / (PLOT_POINTS - 1) as f64).collect();
    Ok(TruncationView {
        a,
        crossover: t.r,
        f: s.iter().map(|&x| t.spec.f(x)).collect(),
        f_tilde: s.iter().map(|&x| t.ftilde(x)).collect(),
        chi: radius.iter().map(|&x| params.chi_radial(x)).collect(),
        s,
        radius,
    })
}

#[derive(Debug, Serialize)]
pub struct CurveView {
    pub m: f64,
    pub t_ground: f64,
    pub max_energy: f64,
    pub endpoint_energy: f64,
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
}

pub fn mp_curve_view(q: f64, k: f64) -> Result<CurveView, String> {
    if !(k > 0.0 && k <= 100.0) {
        return Err(format!("k = {k} outside (0, 100]"));
    }
    let gs = solve_ground_state(k, &power(q)?, 2, &ShootingOptions::default()).map_err(|e| e.to_string())?;
    let curve = build_mp_curve(&gs, &CurveOptions::default()).map_err(|e| e.to_string())?;
    let t: Vec<f64> = (0..PLOT_POINTS).map(|i| i as f64 / (PLOT_POINTS - 1) as f64).collect();
    Ok(CurveView {
        m: gs.energy,
        t_ground: curve.t_ground,
        max_energy: curve.max_energy,
        endpoint_energy: curve.endpoint_energy,
        energy: t.iter().map(|&x| curve.energy(x)).collect(),
        t,
    })
}

#[wasm_bindgen(js_name = groundState)]
pub fn ground_state(q: f64, k: f64) -> String {
    to_json(ground_state_view(q, k))
}

#[wasm_bindgen]
pub fn truncation(q: f64, fraction: f64, alpha1: f64) -> String {
    to_json(truncation_view(q, fraction, alpha1))
}

#[wasm_bindgen(js_name = mpCurve)]
pub fn mp_curve(q: f64, k: f64) -> String {
    to_json(mp_curve_view(q, k))
}
