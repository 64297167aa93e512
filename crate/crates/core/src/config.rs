//! Strict INI-style run configuration.
//!
//! ```text
//! [problem]
//! L = pi
//! M = 256
//! N = 32
//! alphas = 0.8, 0.4
//! q = 1 + 0.3*cos(x)
//! a = x*(pi - x)
//! T = 1
//! K = 128
//! ```
//!
//! Numbers accept constant expressions (`pi`, `2/3`). Function specs are
//! expressions in `x` (and `t` for `F`), `mode:<n>` for the n-th eigenfunction
//! or `powerlaw:<p>` for mode coefficients `n^{-p}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use meval::{Context, Expr};

use crate::error::{Error, Result};
use crate::mild_solver::{Coef, Forcing, InitialData, Problem, SolverOptions, TimeGrid};

thread_local! {
    static BUILTINS: Context<'static> = meval::Context::new();
}

fn eval_expr(e: &Expr, x: f64, t: f64) -> f64 {
    BUILTINS.with(|c| e.eval_with_context((("x", x), (("t", t), c))).unwrap_or(f64::NAN))
}

fn parse_expr(key: &str, src: &str, vars: &[&str]) -> Result<Expr> {
    let e: Expr = src.parse().map_err(|err| Error::Config(format!("{key}: cannot parse '{src}': {err}")))?;
    let probe = BUILTINS.with(|c| {
        let x = if vars.contains(&"x") { Some(0.5) } else { None };
        let t = if vars.contains(&"t") { Some(0.5) } else { None };
        match (x, t) {
            (Some(x), Some(t)) => e.eval_with_context((("x", x), (("t", t), c))),
            (Some(x), None) => e.eval_with_context((("x", x), c)),
            _ => e.eval_with_context(c),
        }
    });
    probe.map_err(|err| Error::Config(format!("{key}: '{src}': {err}")))?;
    Ok(e)
}

fn number(key: &str, src: &str) -> Result<f64> {
    let v = parse_expr(key, src, &[])?.eval().map_err(|e| Error::Config(format!("{key}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: '{src}' is not finite")));
    }
    Ok(v)
}

fn integer(key: &str, src: &str) -> Result<usize> {
    src.trim().parse().map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got '{src}'")))
}

fn list(key: &str, src: &str) -> Result<Vec<f64>> {
    src.split(',').map(|s| number(key, s.trim())).collect()
}

fn coef(key: &str, src: &str) -> Result<Coef> {
    let e = parse_expr(key, src, &["x"])?;
    if let Ok(v) = e.eval() {
        return Ok(Coef::Const(v));
    }
    Ok(Coef::func(move |x| eval_expr(&e, x, 0.0)))
}

/// How the initial datum was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Expr(String),
    Mode(usize),
    PowerLaw(f64),
}

const KEYS: &[(&str, &[&str])] = &[
    ("problem", &["L", "M", "N", "alphas", "q", "B", "diffusion", "reaction", "a", "F", "T", "K", "r", "checkpoints"]),
    ("solver", &["tol", "max_iter", "max_halvings", "streak", "windows"]),
    ("verify", &["gammas", "fit_window", "theta", "holder_steps", "sector_theta", "sector_radius", "omega"]),
    ("output", &["dir", "solution", "modes", "metadata", "report"]),
];

/// Parsed configuration.
#[derive(Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub m: usize,
    pub n_modes: usize,
    pub steps: usize,
    pub grading: f64,
    pub checkpoints: Vec<f64>,
    pub initial_spec: InitialSpec,
    pub solver: SolverOptions,
    pub windows: usize,
    pub gammas: Vec<f64>,
    /// Fractions of `T`.
    pub fit_window: (f64, f64),
    pub theta: f64,
    pub holder_steps: usize,
    pub sector_theta: f64,
    pub sector_radius: f64,
    pub omega: (f64, f64),
    pub out_dir: PathBuf,
    pub solution_file: String,
    pub modes_file: String,
    pub metadata_file: String,
    pub report_file: String,
}

/// Split into `section -> key -> value`, rejecting unknown sections and keys.
pub fn parse_ini(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(Error::Config(format!("line {lineno}: unknown section [{name}]")));
            }
            out.entry(name.clone()).or_default();
            section = Some(name);
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected key = value")))?;
        let sec = section.as_ref().ok_or_else(|| Error::Config(format!("line {lineno}: key outside a section")))?;
        let k = k.trim();
        let allowed = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&k) {
            return Err(Error::Config(format!("line {lineno}: unknown key '{k}' in [{sec}]")));
        }
        let entry = out.get_mut(sec).unwrap();
        if entry.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {lineno}: duplicate key '{k}'")));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = parse_ini(text)?;
        let empty = BTreeMap::new();
        let sec = |s: &str| ini.get(s).unwrap_or(&empty);
        let p = sec("problem");
        let get = |m: &BTreeMap<String, String>, k: &str| m.get(k).cloned();
        let req = |k: &str| get(p, k).ok_or_else(|| Error::Config(format!("[problem] {k} is required")));

        let length = number("L", &req("L")?)?;
        let m = integer("M", &req("M")?)?;
        let n_modes = integer("N", &req("N")?)?;
        let alphas = list("alphas", &req("alphas")?)?;
        let horizon = number("T", &req("T")?)?;
        let steps = integer("K", &req("K")?)?;
        let q = match get(p, "q") {
            Some(s) => s.split(',').map(|f| coef("q", f.trim())).collect::<Result<Vec<_>>>()?,
            None => vec![Coef::Const(1.0); alphas.len().saturating_sub(1)],
        };
        let drift = coef("B", &get(p, "B").unwrap_or_else(|| "0".into()))?;
        let a_coef = coef("diffusion", &get(p, "diffusion").unwrap_or_else(|| "1".into()))?;
        let b_coef = coef("reaction", &get(p, "reaction").unwrap_or_else(|| "0".into()))?;
        let a_src = req("a")?;
        let initial_spec = if let Some(n) = a_src.strip_prefix("mode:") {
            let n = integer("a", n)?;
            if n == 0 || n > n_modes {
                return Err(Error::Config(format!("a: mode index {n} must lie in 1..={n_modes}")));
            }
            InitialSpec::Mode(n)
        } else if let Some(pw) = a_src.strip_prefix("powerlaw:") {
            InitialSpec::PowerLaw(number("a", pw)?)
        } else {
            parse_expr("a", &a_src, &["x"])?;
            InitialSpec::Expr(a_src.clone())
        };
        let initial = match &initial_spec {
            InitialSpec::Mode(n) => {
                let mut v = vec![0.0; n_modes];
                v[n - 1] = 1.0;
                InitialData::Modes(v)
            }
            InitialSpec::PowerLaw(pw) => InitialData::Modes((1..=n_modes).map(|n| (n as f64).powf(-pw)).collect()),
            InitialSpec::Expr(s) => {
                let e = parse_expr("a", s, &["x"])?;
                InitialData::Function(Arc::new(move |x| eval_expr(&e, x, 0.0)))
            }
        };
        let forcing: Option<Forcing> = match get(p, "F") {
            None => None,
            Some(s) if s == "0" || s == "none" => None,
            Some(s) => {
                let e = parse_expr("F", &s, &["x", "t"])?;
                Some(Arc::new(move |x, t| eval_expr(&e, x, t)))
            }
        };
        let problem = Problem { length, alphas, q, drift, a_coef, b_coef, initial, forcing, horizon };
        problem.validate()?;
        if m < 4 {
            return Err(Error::Config(format!("M must be at least 4, got {m}")));
        }
        if n_modes == 0 || n_modes >= m {
            return Err(Error::Config(format!("N must lie in 1..M-1, got {n_modes} with M={m}")));
        }
        if steps == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        let grading = match get(p, "r") {
            Some(s) => number("r", &s)?,
            None => TimeGrid::default_grading(problem.alpha1()),
        };
        if grading < 1.0 {
            return Err(Error::Config(format!("r must be at least 1, got {grading}")));
        }
        let checkpoints = match get(p, "checkpoints") {
            Some(s) => list("checkpoints", &s)?,
            None => Vec::new(),
        };
        if checkpoints.iter().any(|c| !(*c > 0.0 && *c <= horizon)) {
            return Err(Error::Config("checkpoints must lie in (0, T]".into()));
        }

        let s = sec("solver");
        let d = SolverOptions::default();
        let solver = SolverOptions {
            tol: get(s, "tol").map(|v| number("tol", &v)).transpose()?.unwrap_or(d.tol),
            max_iter: get(s, "max_iter").map(|v| integer("max_iter", &v)).transpose()?.unwrap_or(d.max_iter),
            max_halvings: get(s, "max_halvings")
                .map(|v| integer("max_halvings", &v))
                .transpose()?
                .unwrap_or(d.max_halvings),
            streak: get(s, "streak").map(|v| integer("streak", &v)).transpose()?.unwrap_or(d.streak),
        };
        if !(solver.tol > 0.0) || solver.max_iter == 0 || solver.streak == 0 {
            return Err(Error::Config("tol, max_iter and streak must be positive".into()));
        }
        let windows = get(s, "windows").map(|v| integer("windows", &v)).transpose()?.unwrap_or(1);
        if windows == 0 {
            return Err(Error::Config("windows must be positive".into()));
        }

        let v = sec("verify");
        let gammas = get(v, "gammas").map(|s| list("gammas", &s)).transpose()?.unwrap_or(vec![0.25, 0.5, 0.75]);
        if gammas.iter().any(|g| !(0.0..1.0).contains(g)) {
            return Err(Error::Config("gammas must lie in [0, 1)".into()));
        }
        let fw = get(v, "fit_window").map(|s| list("fit_window", &s)).transpose()?.unwrap_or(vec![1e-3, 1e-1]);
        if fw.len() != 2 || !(fw[0] > 0.0 && fw[0] < fw[1] && fw[1] <= 0.5) {
            return Err(Error::Config("fit_window must be two fractions 0 < lo < hi <= 1/2".into()));
        }
        let theta = get(v, "theta").map(|s| number("theta", &s)).transpose()?.unwrap_or(0.5);
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0,1), got {theta}")));
        }
        let holder_steps = get(v, "holder_steps").map(|s| integer("holder_steps", &s)).transpose()?.unwrap_or(32);
        let sector_theta = get(v, "sector_theta")
            .map(|s| number("sector_theta", &s))
            .transpose()?
            .unwrap_or(std::f64::consts::FRAC_PI_4);
        if !(sector_theta > 0.0 && sector_theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("sector_theta must lie in (0, pi/2)".into()));
        }
        let sector_radius =
            get(v, "sector_radius").map(|s| number("sector_radius", &s)).transpose()?.unwrap_or(horizon);
        let om = get(v, "omega").map(|s| list("omega", &s)).transpose()?.unwrap_or(vec![length / 3.0, length / 2.0]);
        if om.len() != 2 || !(om[0] > 0.0 && om[0] < om[1] && om[1] < length) {
            return Err(Error::Config("omega must be two points 0 < x0 < x1 < L".into()));
        }

        let o = sec("output");
        Ok(RunConfig {
            problem,
            m,
            n_modes,
            steps,
            grading,
            checkpoints,
            initial_spec,
            solver,
            windows,
            gammas,
            fit_window: (fw[0], fw[1]),
            theta,
            holder_steps,
            sector_theta,
            sector_radius,
            omega: (om[0], om[1]),
            out_dir: PathBuf::from(get(o, "dir").unwrap_or_else(|| "out".into())),
            solution_file: get(o, "solution").unwrap_or_else(|| "solution.csv".into()),
            modes_file: get(o, "modes").unwrap_or_else(|| "modes.csv".into()),
            metadata_file: get(o, "metadata").unwrap_or_else(|| "metadata.json".into()),
            report_file: get(o, "report").unwrap_or_else(|| "report.txt".into()),
        })
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::graded(self.problem.horizon, self.steps, self.grading)?.with_checkpoints(&self.checkpoints)
    }

    /// Every `q_j` is constant.
    pub fn constant_q(&self) -> bool {
        self.problem.q.iter().all(|q| q.as_const().is_some())
    }
}
