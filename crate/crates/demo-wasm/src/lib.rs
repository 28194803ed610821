//! Browser bindings for the feedback-controlled Chafee–Infante solver.
//!
//! Every export starts from a named preset and overrides `μ`, the
//! interpolant and the resolution. The plain `*_impl` functions carry the
//! logic so they can be tested natively.

use std::sync::Arc;

use chafee_infante::config::{ExperimentConfig, InterpolantChoice};
use chafee_infante::diagnostics::{decay_rate_fit, verify_discrete_decay, Trajectory};
use chafee_infante::mesh::{project_initial, uniform_partition};
use chafee_infante::model::{check_stabilization_conditions, unstable_mode_count};
use chafee_infante::stepper::step_size_guard;
use chafee_infante::simulate;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 2000;
const MAX_M: usize = 20000;

/// Knobs exposed on the page.
#[derive(Debug, Clone)]
pub struct Request {
    pub preset: String,
    pub interpolant: String,
    pub mu: f64,
    pub n: usize,
    pub m: usize,
    pub t_final: f64,
}

fn build(req: &Request) -> Result<(ExperimentConfig, InterpolantChoice), String> {
    let mut cfg = ExperimentConfig::preset(&req.preset).map_err(|e| e.to_string())?;
    let choice: InterpolantChoice = req.interpolant.parse().map_err(|e: chafee_infante::Error| e.to_string())?;
    if req.n > MAX_N || req.m > MAX_M {
        return Err(format!("the demo caps N at {MAX_N} and M at {MAX_M}"));
    }
    cfg.interpolant = choice;
    cfg.params = cfg.params.with_mu(req.mu);
    cfg.n = req.n;
    cfg.m = req.m;
    cfg.t_final = req.t_final;
    cfg.snapshots.clear();
    cfg.validate().map_err(|e| e.to_string())?;
    Ok((cfg, choice))
}

/// Time series and final profile of one controlled run.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Run {
    times: Vec<f64>,
    l2: Vec<f64>,
    control: Vec<f64>,
    x: Vec<f64>,
    initial: Vec<f64>,
    last: Vec<f64>,
    alpha_fit: f64,
}

#[wasm_bindgen]
impl Run {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    pub fn l2(&self) -> Vec<f64> {
        self.l2.clone()
    }
    /// `‖I_h(y)‖` at each step.
    pub fn control(&self) -> Vec<f64> {
        self.control.clone()
    }
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    pub fn initial(&self) -> Vec<f64> {
        self.initial.clone()
    }
    #[wasm_bindgen(js_name = "final")]
    pub fn final_profile(&self) -> Vec<f64> {
        self.last.clone()
    }
    /// Fitted exponential rate, NaN when the fit is undefined.
    #[wasm_bindgen(getter, js_name = alphaFit)]
    pub fn alpha_fit(&self) -> f64 {
        self.alpha_fit
    }
}

struct Solved {
    cfg: ExperimentConfig,
    h: f64,
    traj: Trajectory,
    run: Run,
}

fn solve(req: &Request) -> Result<Solved, String> {
    let (cfg, _) = build(req)?;
    let mesh = Arc::new(uniform_partition(cfg.n).map_err(|e| e.to_string())?);
    let y0 = project_initial(&*cfg.y0.function().map_err(|e| e.to_string())?, &mesh, cfg.bc).map_err(|e| e.to_string())?;
    let spec = cfg.spec_on(&mesh).map_err(|e| e.to_string())?;
    let h = spec.observation_h(cfg.bc).min(1.0);
    let traj = simulate(&y0, &cfg.params, &spec, &cfg.stepper_config().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let alpha_fit = decay_rate_fit(&traj, traj.default_fit_window()).map(|f| f.alpha_est).unwrap_or(f64::NAN);
    let last = traj.final_state.as_ref().ok_or("run produced no final state")?.nodal_values();
    let run = Run {
        times: traj.times.clone(),
        l2: traj.l2.clone(),
        control: traj.control_l2.clone(),
        x: mesh.nodes().to_vec(),
        initial: y0.nodal_values(),
        last,
        alpha_fit,
    };
    Ok(Solved { cfg, h, traj, run })
}

pub fn simulate_impl(req: &Request) -> Result<Run, String> {
    solve(req).map(|s| s.run)
}

/// Human-readable summary of the stabilization conditions and the discrete
/// decay check for the requested run.
pub fn conditions_impl(req: &Request) -> Result<String, String> {
    let Solved { cfg, h, traj, run } = solve(req)?;
    let p = &cfg.params;
    let rep = check_stabilization_conditions(p, h);
    let decay = verify_discrete_decay(&traj, p, h, rep.alpha_max);
    let yes = |b: bool| if b { "yes" } else { "no" };
    Ok(format!(
        "boundary: {}\nunstable modes without control: {}\nobservation h = {h:.5}\n\
         nu >= mu c_p^2 h^2 / 2: {}\nmu >= 2 (gamma + nu): {}\nalpha_max = {:.4}\n\
         step guard: {}\ndecay bound violations: {} of {}\nfitted decay rate: {:.4}\n",
        cfg.bc.name(),
        unstable_mode_count(p, cfg.bc),
        yes(rep.nu_lower_ok),
        yes(rep.mu_lower_ok),
        rep.alpha_max,
        yes(step_size_guard(p, h, cfg.k())),
        decay.violations,
        decay.per_step.len(),
        run.alpha_fit,
    ))
}

/// Fitted decay rate and `α_max` for each `μ` in `mus`, interleaved as
/// `[μ₀, fit₀, α₀, μ₁, ...]`.
pub fn mu_sweep_impl(req: &Request, mus: &[f64]) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(3 * mus.len());
    for &mu in mus {
        let s = solve(&Request { mu, ..req.clone() })?;
        out.extend([mu, s.run.alpha_fit, check_stabilization_conditions(&s.cfg.params, s.h).alpha_max]);
    }
    Ok(out)
}

fn request(preset: &str, interpolant: &str, mu: f64, n: usize, m: usize, t_final: f64) -> Request {
    Request { preset: preset.into(), interpolant: interpolant.into(), mu, n, m, t_final }
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(preset: &str, interpolant: &str, mu: f64, n: usize, m: usize, t_final: f64) -> Result<Run, JsError> {
    simulate_impl(&request(preset, interpolant, mu, n, m, t_final)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn conditions(preset: &str, interpolant: &str, mu: f64, n: usize, m: usize, t_final: f64) -> Result<String, JsError> {
    conditions_impl(&request(preset, interpolant, mu, n, m, t_final)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = muSweep)]
pub fn mu_sweep(preset: &str, interpolant: &str, n: usize, m: usize, t_final: f64, mus: &[f64]) -> Result<Vec<f64>, JsError> {
    mu_sweep_impl(&request(preset, interpolant, 0.0, n, m, t_final), mus).map_err(|e| JsError::new(&e))
}

/// Preset defaults as `[ν, γ, δ, μ, N, M, T]`.
#[wasm_bindgen]
pub fn defaults(preset: &str) -> Result<Vec<f64>, JsError> {
    let c = ExperimentConfig::preset(preset).map_err(|e| JsError::new(&e.to_string()))?;
    let p = c.params;
    Ok(vec![p.nu, p.gamma, p.delta, p.mu, c.n as f64, c.m as f64, c.t_final])
}
