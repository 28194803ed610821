//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use chafee_infante::assembly::{cubic_jacobian, cubic_term};
use chafee_infante::convergence::{fd_oracle, tables};
use chafee_infante::diagnostics::{l2_norm, verify_discrete_decay};
use chafee_infante::interpolants::{uniform_breakpoints, verify_interpolation_bound, SampleFunction};
use chafee_infante::mesh::{project_initial, uniform_partition};
use chafee_infante::model::{check_stabilization_conditions, unstable_mode_count};
use chafee_infante::stepper::{backward_euler_step, Discretization, Stepper};
use chafee_infante::{simulate, BoundaryCondition, FemFunction, InterpolantKind, InterpolantSpec, ModelParams, SampleRule, StepperConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn example51(mu: f64) -> ModelParams {
    ModelParams::new(0.1, 9.0, 9.0, mu, 1.0).unwrap()
}

fn fmt_orders(o: &[f64]) -> String {
    o.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
}

fn spatial_order() -> Outcome {
    let rep = tables::table1().map_err(|e| e.to_string())?;
    let l2 = rep.mean_last_two_l2().unwrap();
    let li = rep.mean_last_two_linf().unwrap();
    check(
        (1.75..=2.25).contains(&l2) && (1.7..=2.3).contains(&li),
        format!("L2 orders [{}] mean {l2:.3}; Linf orders [{}] mean {li:.3}", fmt_orders(&rep.orders_l2), fmt_orders(&rep.orders_linf)),
    )
}

fn temporal_order() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for gamma in [5.0, 9.0] {
        let rep = tables::table2(gamma).map_err(|e| e.to_string())?;
        let m = rep.mean_last_two_linf().unwrap();
        ok &= (0.8..=1.2).contains(&m);
        detail.push(format!("gamma={gamma}: Linf orders [{}] mean {m:.3}", fmt_orders(&rep.orders_linf)));
    }
    check(ok, detail.join("; "))
}

fn control_order() -> Outcome {
    let (space, time) = tables::table4().map_err(|e| e.to_string())?;
    let last2 = |o: &[f64]| o[o.len() - 2..].to_vec();
    let s = last2(&space.orders_linf);
    let t = last2(&time.orders_linf);
    check(
        s.iter().all(|v| (1.75..=2.25).contains(v)) && t.iter().all(|v| (0.8..=1.2).contains(v)),
        format!("space Linf orders [{}]; time Linf orders [{}]", fmt_orders(&space.orders_linf), fmt_orders(&time.orders_linf)),
    )
}

fn run51(mu: f64, kind: InterpolantKind, t: f64) -> chafee_infante::diagnostics::Trajectory {
    let mesh = Arc::new(uniform_partition(100).unwrap());
    let bc = BoundaryCondition::Mixed;
    let y0 = project_initial(&|x| x * (1.0 - x), &mesh, bc).unwrap();
    let spec = InterpolantSpec::on_mesh(kind, &mesh).unwrap();
    simulate(&y0, &example51(mu), &spec, &StepperConfig::new(0.005, t).unwrap()).unwrap()
}

const NODAL: InterpolantKind = InterpolantKind::NodalValues { rule: SampleRule::Midpoint };

fn dichotomy() -> Outcome {
    let p = example51(0.0);
    let floor = 0.5 * (p.gamma / p.delta).sqrt();
    let free = *run51(0.0, NODAL, 5.0).l2.last().unwrap();
    let ctl = *run51(20.0, NODAL, 5.0).l2.last().unwrap();
    check(free >= floor && ctl < 1e-6, format!("mu=0: |Y(5)| = {free:.4} (>= {floor}); mu=20: |Y(5)| = {ctl:.3e} (< 1e-6)"))
}

fn guaranteed_decay() -> Outcome {
    let traj = run51(20.0, InterpolantKind::FiniteVolumes, 5.0);
    let p = example51(20.0);
    let alpha = check_stabilization_conditions(&p, 0.01).alpha_max;
    let rep = verify_discrete_decay(&traj, &p, 0.01, alpha);
    check(
        rep.violations == 0 && (alpha - 0.9).abs() < 1e-12,
        format!(
            "alpha = {alpha}, {} steps, {} violations, step hypothesis {}",
            traj.len(),
            rep.violations,
            if rep.hypotheses_hold { "holds" } else { "does not hold at this k (checked empirically)" }
        ),
    )
}

fn random_state(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.5..1.5)).collect();
    move |x: f64| c.iter().enumerate().map(|(n, a)| a * ((2 * n + 1) as f64 * PI * x / 2.0).sin()).sum()
}

fn contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mesh = Arc::new(uniform_partition(100).unwrap());
    let bc = BoundaryCondition::Mixed;
    let p = example51(20.0);
    if !check_stabilization_conditions(&p, mesh.h()).holds() {
        return Err("stabilization conditions fail".into());
    }
    let spec = InterpolantSpec::on_mesh(InterpolantKind::FiniteVolumes, &mesh).unwrap();
    let cfg = StepperConfig::new(0.005, 2.0).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let a = project_initial(&random_state(&mut rng), &mesh, bc).unwrap();
        let b = project_initial(&random_state(&mut rng), &mesh, bc).unwrap();
        let mut s1 = Stepper::new(a, p, spec.clone(), cfg.clone()).unwrap();
        let mut s2 = Stepper::new(b, p, spec.clone(), cfg.clone()).unwrap();
        let mut prev = l2_norm(&s1.state().difference(s2.state()).unwrap());
        while !s1.is_done() {
            s1.advance().map_err(|e| e.to_string())?;
            s2.advance().map_err(|e| e.to_string())?;
            let d = l2_norm(&s1.state().difference(s2.state()).unwrap());
            worst = worst.max(d - prev);
            if d > prev + 1e-10 {
                return Err(format!("difference grew from {prev:.3e} to {d:.3e} at t = {:.3}", s1.time()));
            }
            prev = d;
        }
    }
    Ok(format!("10 pairs x 400 steps, largest per-step change {worst:.3e}"))
}

fn linear_modes() -> Outcome {
    let p = ModelParams { delta: 0.0, ..example51(0.0) };
    let bc = BoundaryCondition::Mixed;
    let count = unstable_mode_count(&p, bc);
    let n_mesh = 4096;
    let mesh = Arc::new(uniform_partition(n_mesh).unwrap());
    let k = 1e-4;
    let cfg = StepperConfig::new(k, 5.0 * k).unwrap();
    let spec = InterpolantSpec::on_mesh(NODAL, &mesh).unwrap();
    let mut worst = 0.0f64;
    for n in 0..count + 3 {
        let lam = bc.laplacian_eigenvalue(n).unwrap();
        let y0 = project_initial(&|x| bc.eigenfunction(n, x).unwrap(), &mesh, bc).unwrap();
        let traj = simulate(&y0, &p, &spec, &cfg).map_err(|e| e.to_string())?;
        let expected = 1.0 / (1.0 + k * (p.nu * lam - p.gamma));
        for w in traj.l2.windows(2) {
            let f = w[1] / w[0];
            worst = worst.max(((f - expected) / expected).abs());
            if (f > 1.0) != (n < count) {
                return Err(format!("mode {n}: factor {f} disagrees with unstable count {count}"));
            }
        }
    }
    check(worst <= 1e-8, format!("{count} unstable modes; modes 0..{} checked, max relative factor error {worst:.2e}", count + 2))
}

fn battery() -> Vec<SampleFunction> {
    let mut v = Vec::new();
    for k in 1..=5 {
        let w = k as f64 * PI;
        v.push(SampleFunction::new(format!("sin({k} pi x)"), move |x| (w * x).sin(), move |x| w * (w * x).cos()));
        v.push(SampleFunction::new(format!("cos({k} pi x)"), move |x| (w * x).cos(), move |x| -w * (w * x).sin()));
    }
    for p in 1..=4 {
        let q = p as f64;
        v.push(SampleFunction::new(format!("x^{p}"), move |x| x.powi(p), move |x| q * x.powi(p - 1)));
    }
    v.push(SampleFunction::new("exp(x)", f64::exp, f64::exp));
    v.push(SampleFunction::new("exp(-3x)", |x| (-3.0 * x).exp(), |x| -3.0 * (-3.0 * x).exp()));
    v.push(SampleFunction::new("x(1-x)", |x| x * (1.0 - x), |x| 1.0 - 2.0 * x));
    v.push(SampleFunction::new("1/(1+x^2)", |x| 1.0 / (1.0 + x * x), |x| -2.0 * x / (1.0 + x * x).powi(2)));
    v.push(SampleFunction::new("tanh(5(x-1/2))", |x| (5.0 * (x - 0.5)).tanh(), |x| 5.0 / (5.0 * (x - 0.5)).cosh().powi(2)));
    v.push(SampleFunction::new("sin(pi x/2)", |x| (PI * x / 2.0).sin(), |x| PI / 2.0 * (PI * x / 2.0).cos()));
    v
}

fn interpolation_bound() -> Outcome {
    let samples = battery();
    assert_eq!(samples.len(), 20);
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [10, 20, 40] {
        let spec = InterpolantSpec::nodal_values(SampleRule::Midpoint, uniform_breakpoints(n)).unwrap();
        let rep = verify_interpolation_bound(&spec, &samples, 1.0 / n as f64, BoundaryCondition::Neumann).map_err(|e| e.to_string())?;
        ok &= rep.holds_with(1.0);
        detail.push(format!("h=1/{n}: max ratio {:.3}", rep.max_ratio));
    }
    check(ok, detail.join(", "))
}

fn newton_and_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mesh = Arc::new(uniform_partition(32).unwrap());
    let bc = BoundaryCondition::Mixed;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let c: Vec<f64> = (0..mesh.free_count(bc)).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = FemFunction::new(mesh.clone(), bc, c.clone()).unwrap();
        let jac = cubic_jacobian(&y);
        for j in 0..c.len() {
            let eps = 1e-6 * c[j].abs().max(1.0);
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[j] += eps;
            cm[j] -= eps;
            let fp = cubic_term(&y.with_coeffs(cp).unwrap());
            let fm = cubic_term(&y.with_coeffs(cm).unwrap());
            for i in j.saturating_sub(1)..=(j + 1).min(c.len() - 1) {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                let exact = jac.get(i, j);
                worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
            }
        }
    }
    if worst > 1e-5 {
        return Err(format!("Jacobian relative FD error {worst:.2e}"));
    }

    let m100 = Arc::new(uniform_partition(100).unwrap());
    let y0 = project_initial(&|x| x * (1.0 - x), &m100, bc).unwrap();
    let spec = InterpolantSpec::on_mesh(NODAL, &m100).unwrap();
    let lin = ModelParams { delta: 0.0, ..example51(20.0) };
    let cfg = StepperConfig::new(0.05, 1.0).unwrap();
    let disc = Discretization::new(m100.clone(), bc, spec.clone(), &lin).unwrap();
    let (_, rep) = backward_euler_step(&y0, &lin, &disc, &cfg).map_err(|e| e.to_string())?;
    if rep.iterations != 1 {
        return Err(format!("linear step took {} iterations", rep.iterations));
    }

    let p = example51(20.0);
    let mut st = Stepper::new(y0, p, spec, cfg).unwrap();
    let mut exps = Vec::new();
    while !st.is_done() {
        let r = st.advance().map_err(|e| e.to_string())?;
        exps.extend(r.convergence_exponents(1e-13));
    }
    let (lo, hi) = exps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    check(
        !exps.is_empty() && lo >= 1.5 && hi <= 2.5,
        format!("Jacobian FD error {worst:.2e}; linear step 1 iteration; {} residual exponents in [{lo:.2}, {hi:.2}]", exps.len()),
    )
}

fn oracle_equivalence() -> Outcome {
    let n = 640;
    let steps = 1000;
    let t = 1.0;
    let p = example51(20.0);
    let bc = BoundaryCondition::Mixed;
    let mesh = Arc::new(uniform_partition(n).unwrap());
    let y0 = |x: f64| x * (1.0 - x);
    let spec = InterpolantSpec::on_mesh(NODAL, &mesh).unwrap();
    let fem = simulate(&project_initial(&y0, &mesh, bc).unwrap(), &p, &spec, &StepperConfig::from_steps(t, steps).unwrap())
        .map_err(|e| e.to_string())?
        .final_state
        .unwrap();
    let fd = fd_oracle(&p, bc, &y0, n, steps, t).map_err(|e| e.to_string())?;
    let fd = FemFunction::from_nodal(mesh.clone(), bc, |x| fd[(x * n as f64).round() as usize]);
    let rel = l2_norm(&fem.difference(&fd).unwrap()) / l2_norm(&fem);
    check(rel <= 1e-3, format!("relative L2 difference {rel:.3e} at h = 1/{n}, k = {}", t / steps as f64))
}

fn family_agreement() -> Outcome {
    let p = ModelParams::new(1.0, 150.0, 150.0, 500.0, 1.0).unwrap();
    let bc = BoundaryCondition::Neumann;
    let mesh = Arc::new(uniform_partition(100).unwrap());
    let y0 = project_initial(&|x| (3.0 * PI * x).cos(), &mesh, bc).unwrap();
    let cfg = StepperConfig::new(1e-3, 5.0).unwrap();
    let specs = [
        InterpolantSpec::fourier_modes(6),
        InterpolantSpec::nodal_values(SampleRule::Midpoint, uniform_breakpoints(5)).unwrap(),
        InterpolantSpec::finite_volumes(uniform_breakpoints(5)).unwrap(),
    ];
    let trajs: Vec<_> = specs.iter().map(|s| simulate(&y0, &p, s, &cfg)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let floor = 1e-8;
    let mut worst = 0.0f64;
    let mut compared = 0;
    for i in 0..trajs[0].len() {
        if trajs[0].times[i] < 0.5 - 1e-12 {
            continue;
        }
        let v: Vec<f64> = trajs.iter().map(|t| t.l2[i]).collect();
        if v.iter().any(|x| *x < floor) {
            break;
        }
        compared += 1;
        for a in 0..3 {
            for b in a + 1..3 {
                worst = worst.max((v[a] - v[b]).abs() / v[a].max(v[b]));
            }
        }
    }
    let at = |t: f64| trajs.iter().map(|tr| format!("{:.2e}", tr.l2[(t / 1e-3).round() as usize])).collect::<Vec<_>>().join("/");
    let note = if compared == 0 { " (vacuous: every trajectory is below the floor by t = 0.5)" } else { "" };
    check(
        worst < 0.1,
        format!(
            "{compared} times compared above floor {floor:e}{note}, max pairwise relative difference {worst:.3}; L2 (fourier/nodal/volumes) at t=0.05 {}, at t=0.5 {}",
            at(0.05),
            at(0.5)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("spatial order", spatial_order),
        ("temporal order", temporal_order),
        ("control-input orders", control_order),
        ("stabilization dichotomy", dichotomy),
        ("guaranteed decay", guaranteed_decay),
        ("contraction", contraction),
        ("linearized-mode oracle", linear_modes),
        ("interpolation bound", interpolation_bound),
        ("Newton and Jacobian", newton_and_jacobian),
        ("finite-difference oracle equivalence", oracle_equivalence),
        ("interpolant-family agreement", family_agreement),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id:>2} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
