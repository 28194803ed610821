//! Experiment configuration: a flat `key = value` text format grouped by
//! `[section]` headers, plus the named presets.
//!
//! ```text
//! # the example5.1 preset, controlled
//! [model]
//! nu = 0.1
//! gamma = 9
//! delta = 9
//! mu = 20
//! c_p = 1
//! boundary = mixed
//!
//! [control]
//! interpolant = nodal
//! rule = midpoint
//! nodal_count = element
//!
//! [initial]
//! y0 = x(1-x)
//!
//! [discretization]
//! N = 100
//! M = 1000
//! T = 5
//! ```
//!
//! `#` starts a comment. Every key is optional and falls back to the
//! `example5.1` preset value. [`ExperimentConfig::to_manifest`] writes every field
//! back in this format, so a manifest parses to an identical config.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use crate::convergence::{InitialData, Observer, StudySetup};
use crate::interpolants::{uniform_breakpoints, InterpolantKind, InterpolantSpec, SampleRule};
use crate::mesh::MeshPartition;
use crate::model::{BoundaryCondition, ModelParams};
use crate::stepper::StepperConfig;
use crate::{Error, Result};

/// Which observation family the controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpolantChoice {
    Nodal,
    Volumes,
    Fourier,
}

impl InterpolantChoice {
    pub fn name(self) -> &'static str {
        match self {
            InterpolantChoice::Nodal => "nodal",
            InterpolantChoice::Volumes => "volumes",
            InterpolantChoice::Fourier => "fourier",
        }
    }

    pub const ALL: [InterpolantChoice; 3] = [InterpolantChoice::Fourier, InterpolantChoice::Nodal, InterpolantChoice::Volumes];
}

impl FromStr for InterpolantChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nodal" | "nodal_values" | "nodes" => Ok(InterpolantChoice::Nodal),
            "volumes" | "finite_volumes" | "volume" => Ok(InterpolantChoice::Volumes),
            "fourier" | "modes" | "fourier_modes" => Ok(InterpolantChoice::Fourier),
            other => Err(Error::InvalidParameter(format!("unknown interpolant `{other}` (nodal, volumes, fourier)"))),
        }
    }
}

/// Number of observation intervals: one per mesh element or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalCount {
    PerElement,
    Fixed(usize),
}

impl IntervalCount {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("element") {
            return Ok(IntervalCount::PerElement);
        }
        let n: usize = s.parse().map_err(|_| Error::InvalidParameter(format!("expected `element` or a positive count, got `{s}`")))?;
        if n == 0 {
            return Err(Error::InvalidParameter("observation interval count must be positive".into()));
        }
        Ok(IntervalCount::Fixed(n))
    }

    fn render(self) -> String {
        match self {
            IntervalCount::PerElement => "element".into(),
            IntervalCount::Fixed(n) => n.to_string(),
        }
    }
}

/// Initial condition: a named preset or an expression in `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialCondition(String);

impl InitialCondition {
    pub const PRESETS: [&'static str; 4] = ["x(1-x)", "sin(pi x/2)", "1e-3 sin(pi x/2)", "cos(3 pi x)"];

    pub fn new(source: &str) -> Result<Self> {
        let ic = InitialCondition(source.trim().to_string());
        ic.function()?;
        Ok(ic)
    }

    pub fn source(&self) -> &str {
        &self.0
    }

    fn normalized(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase()
    }

    pub fn function(&self) -> Result<InitialData> {
        use std::f64::consts::PI;
        let f: InitialData = match Self::normalized(&self.0).as_str() {
            "x(1-x)" => Arc::new(|x| x * (1.0 - x)),
            "sin(pix/2)" => Arc::new(|x| (PI * x / 2.0).sin()),
            "1e-3sin(pix/2)" => Arc::new(|x| 1e-3 * (PI * x / 2.0).sin()),
            "cos(3pix)" => Arc::new(|x| (3.0 * PI * x).cos()),
            _ => {
                let expr: meval::Expr = self.0.parse().map_err(|e| Error::Expression(format!("`{}`: {e}", self.0)))?;
                let g = expr.bind("x").map_err(|e| Error::Expression(format!("`{}`: {e}", self.0)))?;
                let probe = g(0.5);
                if !probe.is_finite() {
                    return Err(Error::Expression(format!("`{}` is not finite at x = 0.5", self.0)));
                }
                // meval closures are not Send; rebuild one per call site
                let src = self.0.clone();
                Arc::new(move |x| {
                    thread_local! {
                        static CACHE: std::cell::RefCell<Option<(String, meval::Expr)>> = const { std::cell::RefCell::new(None) };
                    }
                    CACHE.with(|c| {
                        let mut c = c.borrow_mut();
                        if c.as_ref().is_none_or(|(s, _)| *s != src) {
                            *c = Some((src.clone(), src.parse().expect("validated expression")));
                        }
                        let (_, e) = c.as_ref().unwrap();
                        e.eval_with_context(meval::Context::new().var("x", x)).unwrap_or(f64::NAN)
                    })
                })
            }
        };
        Ok(f)
    }
}

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Simulate,
    Space,
    Time,
    Control,
    StabilityCheck,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Simulate => "simulate",
            Study::Space => "space",
            Study::Time => "time",
            Study::Control => "control",
            Study::StabilityCheck => "stability-check",
        }
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "simulate" => Ok(Study::Simulate),
            "space" => Ok(Study::Space),
            "time" => Ok(Study::Time),
            "control" => Ok(Study::Control),
            "stability-check" => Ok(Study::StabilityCheck),
            o => Err(Error::InvalidParameter(format!("unknown study `{o}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub params: ModelParams,
    pub bc: BoundaryCondition,
    pub interpolant: InterpolantChoice,
    pub rule: SampleRule,
    pub nodal_count: IntervalCount,
    pub volumes_count: IntervalCount,
    pub fourier_count: usize,
    pub y0: InitialCondition,
    /// Number of elements.
    pub n: usize,
    /// Number of time steps.
    pub m: usize,
    pub t_final: f64,
    pub snapshots: Vec<f64>,
    pub study: Study,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset("example5.1").expect("built-in preset")
    }
}

impl ExperimentConfig {
    pub const PRESETS: [&'static str; 4] = ["example5.1", "example5.2a", "example5.2b", "example5.3"];

    /// Named parameter sets. Time horizons are long enough for the
    /// controlled L² norm to drop below 1e-8.
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentConfig {
            preset: Some(name.to_string()),
            params: ModelParams { nu: 0.1, gamma: 9.0, delta: 9.0, mu: 20.0, c_p: 1.0 },
            bc: BoundaryCondition::Mixed,
            interpolant: InterpolantChoice::Nodal,
            rule: SampleRule::Midpoint,
            nodal_count: IntervalCount::PerElement,
            volumes_count: IntervalCount::PerElement,
            fourier_count: 6,
            y0: InitialCondition("x(1-x)".into()),
            n: 100,
            m: 1000,
            t_final: 5.0,
            snapshots: vec![0.0, 0.5, 1.0, 2.0, 5.0],
            study: Study::Simulate,
            out: None,
        };
        let c = match name {
            "example5.1" => base,
            "example5.2a" => ExperimentConfig {
                params: ModelParams { nu: 0.5, gamma: 1.0, delta: 1.0, mu: 10.0, c_p: 1.0 },
                y0: InitialCondition("sin(pi x/2)".into()),
                ..base
            },
            "example5.2b" => ExperimentConfig {
                params: ModelParams { nu: 0.5, gamma: 50.0, delta: 50.0, mu: 120.0, c_p: 1.0 },
                y0: InitialCondition("sin(pi x/2)".into()),
                m: 2000,
                t_final: 2.0,
                snapshots: vec![0.0, 0.1, 0.5, 1.0, 2.0],
                ..base
            },
            "example5.3" => ExperimentConfig {
                params: ModelParams { nu: 1.0, gamma: 150.0, delta: 150.0, mu: 500.0, c_p: 1.0 },
                bc: BoundaryCondition::Neumann,
                nodal_count: IntervalCount::Fixed(5),
                volumes_count: IntervalCount::Fixed(5),
                fourier_count: 6,
                y0: InitialCondition("cos(3 pi x)".into()),
                m: 5000,
                snapshots: vec![0.0, 0.05, 0.5, 5.0],
                ..base
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset `{other}` (one of {})",
                    Self::PRESETS.join(", ")
                )))
            }
        };
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 2 {
            return Err(Error::MeshTooCoarse(self.n));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("M must be positive".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter("T must be positive".into()));
        }
        if self.fourier_count == 0 {
            return Err(Error::InvalidParameter("fourier_count must be positive".into()));
        }
        for c in [self.nodal_count, self.volumes_count] {
            if let IntervalCount::Fixed(k) = c {
                if !self.n.is_multiple_of(k) {
                    return Err(Error::IncompatiblePartition(format!("{k} observation intervals do not align with N = {}", self.n)));
                }
            }
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn k(&self) -> f64 {
        self.t_final / self.m as f64
    }

    pub fn stepper_config(&self) -> Result<StepperConfig> {
        Ok(StepperConfig::from_steps(self.t_final, self.m)?.with_snapshots(self.snapshots.clone()))
    }

    /// Observation layout for the selected interpolant.
    pub fn observer(&self) -> Observer {
        self.observer_for(self.interpolant)
    }

    pub fn observer_for(&self, choice: InterpolantChoice) -> Observer {
        let piecewise = |count: IntervalCount, kind: InterpolantKind| match count {
            IntervalCount::PerElement => Observer::PerElement(kind),
            IntervalCount::Fixed(k) => Observer::Fixed(InterpolantSpec::new(kind, uniform_breakpoints(k)).expect("uniform breakpoints are valid")),
        };
        match choice {
            InterpolantChoice::Nodal => piecewise(self.nodal_count, InterpolantKind::NodalValues { rule: self.rule }),
            InterpolantChoice::Volumes => piecewise(self.volumes_count, InterpolantKind::FiniteVolumes),
            InterpolantChoice::Fourier => Observer::Fixed(InterpolantSpec::fourier_modes(self.fourier_count)),
        }
    }

    pub fn spec_on(&self, mesh: &MeshPartition) -> Result<InterpolantSpec> {
        self.observer().spec_for(mesh)
    }

    pub fn study_setup(&self) -> Result<StudySetup> {
        Ok(StudySetup {
            params: self.params,
            bc: self.bc,
            observer: self.observer(),
            y0: self.y0.function()?,
            t_final: self.t_final,
        })
    }

    /// Parses the config format. Keys not given keep the value of
    /// `preset = ...` if present (which must then come first), else the
    /// `example5.1` defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        let mut seen_key = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Config { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err(format!("unterminated section header `{line}`")))?;
                let name = name.trim();
                if !["run", "model", "control", "initial", "discretization"].contains(&name) {
                    return Err(err(format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            let num = |v: &str| -> Result<f64> {
                let x: f64 = v.parse().map_err(|_| err(format!("`{key}` expects a number, got `{v}`")))?;
                if !x.is_finite() {
                    return Err(err(format!("`{key}` must be finite")));
                }
                Ok(x)
            };
            let int = |v: &str| -> Result<usize> { v.parse().map_err(|_| err(format!("`{key}` expects a non-negative integer, got `{v}`"))) };
            let wrap = |e: Error| err(e.to_string());
            match (section.as_str(), key) {
                ("" | "run", "preset") => {
                    if seen_key {
                        return Err(err("`preset` must come before every other key".into()));
                    }
                    cfg = ExperimentConfig::preset(value).map_err(wrap)?;
                }
                ("" | "run", "study") => cfg.study = value.parse().map_err(wrap)?,
                ("" | "run", "out") => cfg.out = Some(value.to_string()),
                ("model", "nu") => cfg.params.nu = num(value)?,
                ("model", "gamma") => cfg.params.gamma = num(value)?,
                ("model", "delta") => cfg.params.delta = num(value)?,
                ("model", "mu") => cfg.params.mu = num(value)?,
                ("model", "c_p") => cfg.params.c_p = num(value)?,
                ("model", "boundary") => cfg.bc = value.parse().map_err(wrap)?,
                ("control", "interpolant") => cfg.interpolant = value.parse().map_err(wrap)?,
                ("control", "rule") => {
                    cfg.rule = match value {
                        "left" => SampleRule::Left,
                        "midpoint" => SampleRule::Midpoint,
                        "right" => SampleRule::Right,
                        o => return Err(err(format!("unknown sample rule `{o}` (left, midpoint, right)"))),
                    }
                }
                ("control", "nodal_count") => cfg.nodal_count = IntervalCount::parse(value).map_err(wrap)?,
                ("control", "volumes_count") => cfg.volumes_count = IntervalCount::parse(value).map_err(wrap)?,
                ("control", "fourier_count") => cfg.fourier_count = int(value)?,
                ("initial", "y0") => cfg.y0 = InitialCondition::new(value).map_err(wrap)?,
                ("discretization", "N") => cfg.n = int(value)?,
                ("discretization", "M") => cfg.m = int(value)?,
                ("discretization", "T") => cfg.t_final = num(value)?,
                ("discretization", "snapshots") if value == "none" => cfg.snapshots.clear(),
                ("discretization", "snapshots") => {
                    cfg.snapshots = value.split(',').map(|v| num(v.trim())).collect::<Result<Vec<_>>>()?;
                }
                (s, k) => {
                    let where_ = if s.is_empty() { "top level".to_string() } else { format!("[{s}]") };
                    return Err(err(format!("unknown key `{k}` in {where_}")));
                }
            }
            seen_key = true;
        }
        cfg.validate().map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
        Ok(cfg)
    }

    /// Full config in the text format; `parse(to_manifest())` returns an
    /// equal config.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| format!("{x:?}");
        if let Some(p) = &self.preset {
            let _ = writeln!(s, "# derived from preset {p}");
        }
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "study = {}", self.study.name());
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {o}");
        }
        let _ = writeln!(s, "\n[model]");
        let p = &self.params;
        for (k, v) in [("nu", p.nu), ("gamma", p.gamma), ("delta", p.delta), ("mu", p.mu), ("c_p", p.c_p)] {
            let _ = writeln!(s, "{k} = {}", f(v));
        }
        let _ = writeln!(s, "boundary = {}", self.bc.name());
        let _ = writeln!(s, "\n[control]");
        let _ = writeln!(s, "interpolant = {}", self.interpolant.name());
        let rule = match self.rule {
            SampleRule::Left => "left",
            SampleRule::Midpoint => "midpoint",
            SampleRule::Right => "right",
        };
        let _ = writeln!(s, "rule = {rule}");
        let _ = writeln!(s, "nodal_count = {}", self.nodal_count.render());
        let _ = writeln!(s, "volumes_count = {}", self.volumes_count.render());
        let _ = writeln!(s, "fourier_count = {}", self.fourier_count);
        let _ = writeln!(s, "\n[initial]");
        let _ = writeln!(s, "y0 = {}", self.y0.source());
        let _ = writeln!(s, "\n[discretization]");
        let _ = writeln!(s, "N = {}", self.n);
        let _ = writeln!(s, "M = {}", self.m);
        let _ = writeln!(s, "T = {}", f(self.t_final));
        if self.snapshots.is_empty() {
            let _ = writeln!(s, "snapshots = none");
        } else {
            let v: Vec<String> = self.snapshots.iter().map(|x| f(*x)).collect();
            let _ = writeln!(s, "snapshots = {}", v.join(", "));
        }
        s
    }
}
