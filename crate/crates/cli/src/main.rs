//! `chafee`: command line runner for simulations and refinement studies.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chafee_infante::config::{ExperimentConfig, InterpolantChoice, Study};
use chafee_infante::convergence::{
    compute_reference, control_study, spatial_study, tables, temporal_study, ControlLadder, ConvergenceReport,
};
use chafee_infante::diagnostics::{decay_rate_fit, decay_step_condition, error_step_condition, verify_discrete_decay, Trajectory};
use chafee_infante::export::{diagnostics_csv, report_csv, snapshot_dump, trajectory_csv};
use chafee_infante::mesh::{project_initial, uniform_partition};
use chafee_infante::model::{check_stabilization_conditions, linearized_mode_rate, steady_states, unstable_mode_count};
use chafee_infante::stepper::step_size_guard;
use chafee_infante::simulate;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "chafee", version, about = "Feedback-controlled Chafee-Infante experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write trajectory, diagnostics and snapshots.
    Simulate(Common),
    /// Spatial refinement study of the state.
    ConvergeSpace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ladder: SpaceLadder,
    },
    /// Temporal refinement study of the state.
    ConvergeTime {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ladder: TimeLadder,
    },
    /// Refinement study of the control input.
    ConvergeControl {
        #[command(flatten)]
        common: Common,
        /// Refinement direction.
        #[arg(long, value_enum, default_value = "space")]
        axis: Axis,
        #[command(flatten)]
        space: SpaceLadder,
        #[command(flatten)]
        time: TimeLadder,
    },
    /// Re-run one of the built-in refinement tables (1, 2 or 4).
    TableRepro {
        /// Table number: 1 (space), 2 (time) or 4 (control input).
        #[arg(value_parser = ["1", "2", "4"])]
        table: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Check the stabilization conditions and the decay bound along a run.
    StabilityCheck(Common),
    /// Linearized growth rates around zero and the steady states.
    Modes {
        #[command(flatten)]
        common: Common,
        /// Number of modes to list.
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
enum InterpolantArg {
    Nodal,
    Volumes,
    Fourier,
    /// All three, one output per family.
    All,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Config file (`key = value` with `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Output directory (default: `out` from the config, else `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    interpolant: Option<InterpolantArg>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Number of elements.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Number of time steps.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    t: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SpaceLadder {
    /// Element counts of the spatial ladder.
    #[arg(long, value_delimiter = ',', default_values_t = tables::SPACE_LADDER.to_vec())]
    n_ladder: Vec<usize>,
    /// Elements of the spatial reference solution.
    #[arg(long, default_value_t = tables::SPACE_N_REF)]
    n_ref: usize,
}

#[derive(Args, Debug, Clone)]
struct TimeLadder {
    /// Step counts of the temporal ladder.
    #[arg(long, value_delimiter = ',', default_values_t = tables::TIME_LADDER.to_vec())]
    m_ladder: Vec<usize>,
    /// Steps of the temporal reference solution (default 16 × the largest rung).
    #[arg(long)]
    m_ref: Option<usize>,
}

impl TimeLadder {
    fn reference_steps(&self) -> usize {
        self.m_ref.unwrap_or_else(|| 16 * self.m_ladder.iter().copied().max().unwrap_or(1))
    }
}

struct Prepared {
    config: ExperimentConfig,
    choices: Vec<InterpolantChoice>,
    out: PathBuf,
}

fn prepare(common: &Common, study: Study) -> Result<Prepared> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    let p = &mut config.params;
    p.mu = common.mu.unwrap_or(p.mu);
    p.nu = common.nu.unwrap_or(p.nu);
    p.gamma = common.gamma.unwrap_or(p.gamma);
    p.delta = common.delta.unwrap_or(p.delta);
    config.n = common.n.unwrap_or(config.n);
    config.m = common.m.unwrap_or(config.m);
    config.t_final = common.t.unwrap_or(config.t_final);
    config.study = study;
    let choices = match common.interpolant {
        None => vec![config.interpolant],
        Some(InterpolantArg::All) => InterpolantChoice::ALL.to_vec(),
        Some(one) => {
            let c = match one {
                InterpolantArg::Nodal => InterpolantChoice::Nodal,
                InterpolantArg::Volumes => InterpolantChoice::Volumes,
                _ => InterpolantChoice::Fourier,
            };
            config.interpolant = c;
            vec![c]
        }
    };
    if let Some(o) = &common.out {
        config.out = Some(o.display().to_string());
    }
    config.validate()?;
    let out = PathBuf::from(config.out.clone().unwrap_or_else(|| "results".into()));
    Ok(Prepared { config, choices, out })
}

/// Files are collected in memory and written only once every computation
/// succeeded; each is written to a temporary file and renamed into place.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, String)>);

impl Outputs {
    fn add(&mut self, name: impl Into<PathBuf>, content: String) {
        self.0.push((name.into(), content));
    }

    fn write(self, dir: &Path) -> Result<()> {
        for (name, content) in self.0 {
            let path = dir.join(name);
            let parent = path.parent().unwrap_or(dir);
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
            tmp.write_all(content.as_bytes())?;
            tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn manifest(config: &ExperimentConfig) -> String {
    format!("# chafee {}\n{}", env!("CARGO_PKG_VERSION"), config.to_manifest())
}

fn run_simulation(config: &ExperimentConfig, choice: InterpolantChoice) -> Result<Trajectory> {
    let mesh = Arc::new(uniform_partition(config.n)?);
    let y0 = project_initial(&*config.y0.function()?, &mesh, config.bc)?;
    let spec = config.observer_for(choice).spec_for(&mesh)?;
    let cfg = config.stepper_config()?;
    if !step_size_guard(&config.params, spec.observation_h(config.bc).min(1.0), cfg.k) {
        eprintln!("warning: k = {} violates the step-size guard k(γ + μ c_p² h²/2) < 1", cfg.k);
    }
    Ok(simulate(&y0, &config.params, &spec, &cfg)?)
}

fn simulate_cmd(common: &Common) -> Result<()> {
    let Prepared { config, choices, out } = prepare(common, Study::Simulate)?;
    let alpha = check_stabilization_conditions(&config.params, config.h()).alpha_max;
    let mut files = Outputs::default();
    let several = choices.len() > 1;
    for choice in choices {
        let traj = run_simulation(&config, choice)?;
        let suffix = if several { format!("_{}", choice.name()) } else { String::new() };
        files.add(format!("trajectory{suffix}.csv"), trajectory_csv(&traj));
        files.add(format!("diagnostics{suffix}.csv"), diagnostics_csv(&traj, alpha));
        for (t, y) in &traj.snapshots {
            files.add(format!("snapshots{suffix}/t_{t:.4}.tsv"), snapshot_dump(y));
        }
        println!(
            "{}: |Y(0)| = {:.4e}, |Y(T)| = {:.4e} at T = {}",
            choice.name(),
            traj.l2[0],
            traj.l2.last().unwrap(),
            traj.final_time()
        );
    }
    files.add("manifest.cfg", manifest(&config));
    files.write(&out)
}

fn print_report(title: &str, rep: &ConvergenceReport) {
    println!("{title}");
    print!("{}", report_csv(rep));
}

fn converge_space(common: &Common, ladder: &SpaceLadder) -> Result<()> {
    let Prepared { config, out, .. } = prepare(common, Study::Space)?;
    let setup = config.study_setup()?;
    let r = compute_reference(&setup, ladder.n_ref, config.m)?;
    let rep = spatial_study(&setup, &ladder.n_ladder, config.m, &r)?;
    print_report("space", &rep);
    let mut files = Outputs::default();
    files.add("converge_space.csv", report_csv(&rep));
    files.add("manifest.cfg", manifest(&config));
    files.write(&out)
}

fn converge_time(common: &Common, ladder: &TimeLadder) -> Result<()> {
    let Prepared { config, out, .. } = prepare(common, Study::Time)?;
    let setup = config.study_setup()?;
    let r = compute_reference(&setup, config.n, ladder.reference_steps())?;
    let rep = temporal_study(&setup, &ladder.m_ladder, config.n, &r)?;
    print_report("time", &rep);
    let mut files = Outputs::default();
    files.add("converge_time.csv", report_csv(&rep));
    files.add("manifest.cfg", manifest(&config));
    files.write(&out)
}

fn converge_control(common: &Common, axis: Axis, space: &SpaceLadder, time: &TimeLadder) -> Result<()> {
    let Prepared { config, out, .. } = prepare(common, Study::Control)?;
    let setup = config.study_setup()?;
    let (rep, name) = match axis {
        Axis::Space => {
            let r = compute_reference(&setup, space.n_ref, config.m)?;
            let l = ControlLadder::Space { n_ladder: space.n_ladder.clone(), m_fixed: config.m };
            (control_study(&setup, &l, &r)?, "converge_control_space.csv")
        }
        Axis::Time => {
            let r = compute_reference(&setup, config.n, time.reference_steps())?;
            let l = ControlLadder::Time { m_ladder: time.m_ladder.clone(), n_fixed: config.n };
            (control_study(&setup, &l, &r)?, "converge_control_time.csv")
        }
    };
    print_report("control", &rep);
    let mut files = Outputs::default();
    files.add(name, report_csv(&rep));
    files.add("manifest.cfg", manifest(&config));
    files.write(&out)
}

fn judge(rep: &ConvergenceReport, lo: f64, hi: f64, use_l2: bool) -> (bool, String) {
    let orders = if use_l2 { &rep.orders_l2 } else { &rep.orders_linf };
    let mean = chafee_infante::convergence::mean_last_two(orders).unwrap_or(f64::NAN);
    let ok = (lo..=hi).contains(&mean);
    let norm = if use_l2 { "L2" } else { "Linf" };
    (ok, format!("{} {norm}: mean of last two orders {mean:.3} in [{lo}, {hi}]: {}", rep.axis, if ok { "PASS" } else { "FAIL" }))
}

fn table_repro(table: &str, out: &Path) -> Result<bool> {
    let mut files = Outputs::default();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut record = |(pass, line): (bool, String)| {
        ok &= pass;
        println!("{line}");
        lines.push(line);
    };
    match table {
        "1" => {
            let rep = tables::table1()?;
            print_report("table 1", &rep);
            record(judge(&rep, 1.75, 2.25, true));
            record(judge(&rep, 1.7, 2.3, false));
            files.add("table1.csv", report_csv(&rep));
        }
        "2" => {
            for gamma in [5.0, 9.0] {
                let rep = tables::table2(gamma)?;
                print_report(&format!("table 2, gamma = {gamma}"), &rep);
                let (p, l) = judge(&rep, 0.8, 1.2, false);
                record((p, format!("gamma = {gamma}: {l}")));
                files.add(format!("table2_gamma{gamma}.csv"), report_csv(&rep));
            }
        }
        "4" => {
            let (space, time) = tables::table4()?;
            print_report("table 4, space", &space);
            print_report("table 4, time", &time);
            record(judge(&space, 1.75, 2.25, false));
            record(judge(&time, 0.8, 1.2, false));
            files.add("table4_space.csv", report_csv(&space));
            files.add("table4_time.csv", report_csv(&time));
        }
        other => bail!("unknown table {other}"),
    }
    files.add(format!("table{table}_summary.txt"), lines.join("\n") + "\n");
    files.write(out)?;
    Ok(ok)
}

fn stability_check(common: &Common) -> Result<()> {
    let Prepared { config, choices, out } = prepare(common, Study::StabilityCheck)?;
    let p = &config.params;
    let mut files = Outputs::default();
    let mut summary = String::new();
    for choice in choices {
        let mesh = uniform_partition(config.n)?;
        let spec = config.observer_for(choice).spec_for(&mesh)?;
        let h_obs = spec.observation_h(config.bc).min(1.0);
        let rep = check_stabilization_conditions(p, h_obs);
        let alpha = rep.alpha_max;
        let k = config.k();
        let traj = run_simulation(&config, choice)?;
        let decay = verify_discrete_decay(&traj, p, h_obs, alpha);
        let fit = decay_rate_fit(&traj, traj.default_fit_window()).ok();
        let s = format!(
            "interpolant = {}\nobservation h = {h_obs:.6}\nnu >= mu c_p^2 h^2 / 2: {}\nmu >= 2 (gamma + nu): {}\nalpha_max = {alpha}\nbeta = {}\nstep guard k (gamma + mu c_p^2 h^2 / 2) < 1: {}\ndecay step condition (beta3) at alpha_max: {}\nerror step condition (beta2) at alpha_max: {}\ndecay bound violations: {} of {} steps{}\nfitted decay rate: {}\n",
            choice.name(),
            rep.nu_lower_ok,
            rep.mu_lower_ok,
            rep.beta,
            step_size_guard(p, h_obs, k),
            decay_step_condition(p, alpha, k),
            error_step_condition(p, alpha, k),
            decay.violations,
            traj.len(),
            decay.first_violation.map(|v| format!(" (first at t = {:.4})", v.time)).unwrap_or_default(),
            fit.map(|f| format!("{:.4}", f.alpha_est)).unwrap_or_else(|| "n/a".into()),
        );
        print!("{s}");
        summary.push_str(&s);
        files.add(format!("stability_{}.csv", choice.name()), diagnostics_csv(&traj, alpha));
    }
    files.add("stability.txt", summary);
    files.add("manifest.cfg", manifest(&config));
    files.write(&out)
}

fn modes(common: &Common, count: usize) -> Result<()> {
    let Prepared { config, out, .. } = prepare(common, Study::Simulate)?;
    let p = &config.params;
    let bc = config.bc;
    let mut csv = String::from("mode,eigenvalue,growth_rate,unstable\n");
    for n in bc.first_mode()..bc.first_mode() + count {
        let lam = bc.laplacian_eigenvalue(n)?;
        let rate = linearized_mode_rate(p, bc, n)?;
        csv.push_str(&format!("{n},{lam:.10e},{rate:.10e},{}\n", rate > 0.0));
    }
    print!("{csv}");
    let unstable = unstable_mode_count(p, bc);
    let states: Vec<String> = steady_states(p).iter().map(|s| format!("{s}")).collect();
    println!("unstable modes ({}): {unstable}", bc.name());
    println!("constant steady states: {}", states.join(", "));
    let mut files = Outputs::default();
    files.add("modes.csv", csv);
    files.write(&out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate_cmd(c).map(|_| true),
        Command::ConvergeSpace { common, ladder } => converge_space(common, ladder).map(|_| true),
        Command::ConvergeTime { common, ladder } => converge_time(common, ladder).map(|_| true),
        Command::ConvergeControl { common, axis, space, time } => converge_control(common, *axis, space, time).map(|_| true),
        Command::TableRepro { table, out } => table_repro(table, out),
        Command::StabilityCheck(c) => stability_check(c).map(|_| true),
        Command::Modes { common, count } => modes(common, *count).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more order checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
