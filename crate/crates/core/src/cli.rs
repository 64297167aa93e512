//! Command-line front end. `run` returns the process exit code:
//! 0 ok, 2 usage or configuration error, 3 solver non-convergence,
//! 4 verification failure.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::laplace::laplace_coeffs;
use crate::mild_solver::{l1_fd_solve, solve, Forcing, InitialData, MildSolution, Model, Problem, TimeGrid};
use crate::specfun::{MLParams, MittagLeffler};
use crate::verify::{
    alpha_bar, caputo_residual, certify_projections, cr_refinement, fit_decay_rate, fit_sector_envelope,
    holder_suite, residual_headline, sector_extend, wuc_demo, write_trace, Omega, PatchSpec, Report, SectorGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "fracdiff", version, about = "Multi-term time-fractional diffusion: solver and verification suite")]
pub struct Cli {
    /// Worker threads (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Suppress reports on standard output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate E_{α,β}(z).
    Ml {
        alpha: f64,
        beta: f64,
        #[arg(allow_hyphen_values = true)]
        z_re: f64,
        #[arg(allow_hyphen_values = true, default_value_t = 0.0)]
        z_im: f64,
    },
    /// Solve the configured problem and write solution, modes and metadata.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run verification checks.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(value_enum, default_value_t = Which::All)]
        which: Which,
    },
    /// Compare the Picard solver with the L1 scheme and Laplace inversion.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Uniform time steps of the L1 scheme.
        #[arg(long, default_value_t = 2048)]
        l1_steps: usize,
    },
    /// Mode coefficients by numerical Laplace inversion (constant q).
    Invert {
        #[arg(long)]
        config: PathBuf,
        /// Times at which to invert.
        #[arg(long = "time", required = true)]
        times: Vec<f64>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Decay,
    Holder,
    Sector,
    Residual,
    Wuc,
    All,
}

/// Parse arguments and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Ml { alpha, beta, z_re, z_im } => {
            let ml = MittagLeffler::new(MLParams::new(*alpha, *beta)?);
            let (v, regime) = ml.eval_with_regime(Complex64::new(*z_re, *z_im))?;
            if *z_im == 0.0 {
                println!("{} regime={}", sig15(v.re), regime.name());
            } else {
                println!("{} {} regime={}", sig15(v.re), sig15(v.im), regime.name());
            }
            Ok(EXIT_OK)
        }
        Command::Solve { config } => {
            let cfg = RunConfig::load(config)?;
            let out = out_dir(cli, &cfg)?;
            let model = Model::new(cfg.problem.clone(), cfg.m, cfg.n_modes)?;
            let sol = solve(&model, &cfg.time_grid()?, cfg.windows, &cfg.solver)?;
            sol.write_solution_csv(BufWriter::new(File::create(out.join(&cfg.solution_file))?))?;
            sol.write_modes_csv(BufWriter::new(File::create(out.join(&cfg.modes_file))?))?;
            sol.write_metadata(BufWriter::new(File::create(out.join(&cfg.metadata_file))?))?;
            if !cli.quiet {
                println!("wrote {} time nodes x {} modes to {}", sol.grid.len(), sol.modes(), out.display());
            }
            Ok(EXIT_OK)
        }
        Command::Verify { config, which } => {
            let cfg = RunConfig::load(config)?;
            let out = out_dir(cli, &cfg)?;
            let rep = verify_report(&cfg, *which, &out)?;
            std::fs::write(out.join(&cfg.report_file), rep.to_kv())?;
            finish(cli, &rep)
        }
        Command::Compare { config, l1_steps } => {
            let cfg = RunConfig::load(config)?;
            let out = out_dir(cli, &cfg)?;
            let rep = compare_report(&cfg, *l1_steps)?;
            std::fs::write(out.join("compare.txt"), rep.to_kv())?;
            finish(cli, &rep)
        }
        Command::Invert { config, times } => {
            let cfg = RunConfig::load(config)?;
            let model = Model::new(cfg.problem.clone(), cfg.m, cfg.n_modes)?;
            println!("t,n,c_n");
            for &t in times {
                for (n, c) in laplace_coeffs(&model, t)?.iter().enumerate() {
                    println!("{t:.16e},{},{c:.16e}", n + 1);
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn finish(cli: &Cli, rep: &Report) -> Result<i32> {
    if !cli.quiet {
        print!("{}", rep.to_kv());
    }
    Ok(if rep.passed() { EXIT_OK } else { EXIT_VERIFY })
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Format with 15 significant digits.
pub fn sig15(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        format!("{:.*}", (14 - e) as usize, v)
    } else {
        format!("{v:.14e}")
    }
}

/// The selected verification reports, merged.
pub fn verify_report(cfg: &RunConfig, which: Which, out: &Path) -> Result<Report> {
    let mut rep = Report::new("verify");
    let all = which == Which::All;
    if all || which == Which::Decay {
        rep.merge(verify_decay(cfg, out)?);
    }
    if all || which == Which::Holder {
        rep.merge(verify_holder(cfg)?);
    }
    if all || which == Which::Sector {
        rep.merge(verify_sector(cfg, out)?);
    }
    if all || which == Which::Residual {
        rep.merge(verify_residual(cfg)?);
    }
    if all || which == Which::Wuc {
        if all && !wuc_applicable(&cfg.problem) {
            rep.value("wuc", "skipped: needs constant q, B = 0 and F = 0");
        } else {
            rep.merge(verify_wuc(cfg)?);
        }
    }
    Ok(rep)
}

fn require_unforced(cfg: &RunConfig, what: &str) -> Result<()> {
    if cfg.problem.forcing.is_some() {
        return Err(Error::Config(format!("{what} needs F = 0")));
    }
    Ok(())
}

fn wuc_applicable(p: &Problem) -> bool {
    p.forcing.is_none() && p.drift.is_zero() && p.q.iter().all(|q| q.as_const().is_some())
}

/// Decay slopes of `‖A^γ u‖` over the fit window.
pub fn verify_decay(cfg: &RunConfig, out: &Path) -> Result<Report> {
    require_unforced(cfg, "the decay check")?;
    let model = Model::new(cfg.problem.clone(), cfg.m, cfg.n_modes)?;
    let sol = solve(&model, &cfg.time_grid()?, cfg.windows, &cfg.solver)?;
    let t = cfg.problem.horizon;
    let a1 = cfg.problem.alpha1();
    let mut rep = Report::new("decay");
    rep.value("fit_window", format!("[{:e}, {:e}]", cfg.fit_window.0 * t, cfg.fit_window.1 * t));
    for &g in &cfg.gammas {
        let fit = fit_decay_rate(&sol, g, (cfg.fit_window.0 * t, cfg.fit_window.1 * t))?;
        rep.value(&format!("gamma{g}.slope"), format!("{:.6}", fit.slope));
        rep.value(&format!("gamma{g}.constant"), format!("{:.6e}", fit.constant));
        rep.value(&format!("gamma{g}.nodes"), fit.nodes);
        rep.check_ge(&format!("gamma{g}.slope_lower"), fit.slope, -a1 * g - 0.05);
        rep.check_le(&format!("gamma{g}.slope_upper"), fit.slope, 0.01);
    }
    let mut header = vec!["t".to_string()];
    header.extend(cfg.gammas.iter().map(|g| format!("norm_gamma{g}")));
    let rows: Vec<Vec<f64>> = sol
        .grid
        .nodes
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &tk)| std::iter::once(tk).chain(cfg.gammas.iter().map(|&g| sol.frac_norm(g, k))).collect())
        .collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_trace(BufWriter::new(File::create(out.join("decay_trace.csv"))?), &h, &rows)?;
    Ok(rep)
}

/// `√(2/L) sin(πx/L)`, the first eigenfunction of `-∂²`.
fn first_sine(length: f64) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |x| (2.0 / length).sqrt() * (PI * x / length).sin()
}

/// Hölder plateau with `a = 0`, `F = t^θ g`, plus the exponent-mismatch control.
pub fn verify_holder(cfg: &RunConfig) -> Result<Report> {
    let theta = cfg.theta;
    let g = first_sine(cfg.problem.length);
    let n = cfg.n_modes.min(32);
    let m = cfg.m.min(256);
    let build = |power: f64| -> Problem {
        let mut p = cfg.problem.clone();
        p.initial = InitialData::Modes(vec![0.0; n]);
        let f: Forcing = Arc::new(move |x, t| t.powf(power) * g(x));
        p.forcing = Some(f);
        p
    };
    let (mut rep, _) = holder_suite(&build(theta), m, n, cfg.holder_steps, 3, theta, cfg.windows)?;
    let power = 0.6 * theta;
    let (_, lv) = holder_suite(&build(power), m, n, cfg.holder_steps, 3, theta, cfg.windows)?;
    let expected = 2f64.powf(theta - power);
    let growth = lv.windows(2).map(|w| w[1].quotient_f / w[0].quotient_f).fold(f64::INFINITY, f64::min);
    rep.value("control.forcing_power", power);
    rep.value("control.expected_growth", format!("{expected:.6}"));
    rep.check_ge("control.quotient_growth", growth, 1.0 + 0.5 * (expected - 1.0));
    Ok(rep)
}

/// Envelope of the complex-time iteration, CR refinement and real-axis match.
pub fn verify_sector(cfg: &RunConfig, out: &Path) -> Result<Report> {
    require_unforced(cfg, "the sector check")?;
    let n = cfg.n_modes.min(16);
    let model = Model::new(cfg.problem.clone(), cfg.m, n)?;
    let r = cfg.sector_radius;
    let th = cfg.sector_theta;
    let grading = TimeGrid::default_grading(cfg.problem.alpha1());
    let radii = SectorGrid::graded_radii(0.2 * r, 16, grading, 0.05 * r, r);
    let angles: Vec<f64> = (0..5).map(|j| -th + th * j as f64 / 2.0).collect();
    let grid = SectorGrid::new(radii.clone(), angles)?;
    let sol = sector_extend(&model, &grid, 200, 1e-15)?;
    let a_norm = model.a_coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let ab = alpha_bar(&cfg.problem.alphas);
    let fit = fit_sector_envelope(&sol, cfg.problem.alpha1(), ab, a_norm)?;

    // the θ = 0 ray against the time-domain solver on the same nodes
    let real_ray = SectorGrid::new(radii.clone(), vec![0.0])?;
    let sec0 = sector_extend(&model, &real_ray, 400, 1e-15)?;
    let tsol = solve(&model, &TimeGrid::from_nodes(radii)?, cfg.windows, &cfg.solver)?;
    let mut real_diff: f64 = 0.0;
    for k in 0..tsol.grid.len() {
        for j in 0..n {
            real_diff = real_diff.max((sec0.values[0][k][j] - tsol.coeffs[j][k]).norm());
        }
    }

    let spec = PatchSpec {
        rho_lo: 0.4 * r,
        rho_hi: 0.8 * r,
        theta_c: th / 2.0,
        theta_half: th / 4.0,
        steps: 8,
        graded: 8,
    };
    let study = cr_refinement(&model, &spec, 3)?;
    let min_order = study.orders.iter().copied().fold(f64::INFINITY, f64::min);

    let mut rep = Report::new("sector");
    rep.value("alpha_bar", ab);
    rep.value("rays", grid.angles.len());
    rep.value("modes", n);
    rep.value("envelope.m", format!("{:.6e}", fit.m));
    rep.value("envelope.m1", format!("{:.6e}", fit.m1));
    rep.value("envelope.samples", fit.samples);
    for (l, v) in study.residuals.iter().enumerate() {
        rep.value(&format!("cr.level{l}"), format!("{v:.6e}"));
    }
    rep.check_ge("envelope.m_positive", fit.m, f64::MIN_POSITIVE);
    rep.check_ge("envelope.m1_positive", fit.m1, f64::MIN_POSITIVE);
    rep.check_le("envelope.m1_finite", fit.m1, f64::MAX);
    rep.check_ge("envelope.slack", fit.slack, 1e-3);
    rep.check_ge("cr.order", min_order, 1.9);
    rep.check_le("real_axis_match", real_diff, 1e-6);

    let rows: Vec<Vec<f64>> = study.points.iter().map(|(l, a, b, c)| vec![*l as f64, *a, *b, *c]).collect();
    write_trace(BufWriter::new(File::create(out.join("sector_trace.csv"))?), &["level", "rho", "theta", "residual"], &rows)?;
    let iters = sol.diffs.iter().map(|r| r.len()).max().unwrap_or(0);
    let rows: Vec<Vec<f64>> = (0..iters)
        .map(|it| {
            let d = sol
                .diffs
                .iter()
                .filter_map(|ray| ray.get(it))
                .flat_map(|v| v.iter())
                .copied()
                .fold(0.0, f64::max);
            vec![it as f64, d]
        })
        .collect();
    write_trace(BufWriter::new(File::create(out.join("envelope_trace.csv"))?), &["n", "d_n_max"], &rows)?;
    Ok(rep)
}

/// Galerkin residual under simultaneous space-time refinement on three levels.
pub fn verify_residual(cfg: &RunConfig) -> Result<Report> {
    let n = cfg.n_modes.min(cfg.m / 4 - 1);
    let mut heads = Vec::new();
    let mut rep = Report::new("residual");
    for l in 0..3 {
        let m = cfg.m >> (2 - l);
        let k = (cfg.steps >> (2 - l)).max(4);
        let model = Model::new(cfg.problem.clone(), m, n)?;
        let grid = TimeGrid::graded(cfg.problem.horizon, k, cfg.grading)?;
        let sol = solve(&model, &grid, cfg.windows, &cfg.solver)?;
        let res = caputo_residual(&sol, &model)?;
        let h = residual_headline(&sol, &res);
        rep.value(&format!("level{l}.M"), m);
        rep.value(&format!("level{l}.K"), k);
        rep.value(&format!("level{l}.median"), format!("{h:.6e}"));
        heads.push(h);
    }
    let worst = heads.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    rep.check_le("monotone_ratio", worst, 1.1);
    Ok(rep)
}

/// Unique-continuation demonstration on `ω`.
pub fn verify_wuc(cfg: &RunConfig) -> Result<Report> {
    if !wuc_applicable(&cfg.problem) {
        return Err(Error::Config("the wuc check needs constant q, B = 0 and F = 0".into()));
    }
    let model = Model::new(cfg.problem.clone(), cfg.m, cfg.n_modes)?;
    let omega = Omega { x0: cfg.omega.0, x1: cfg.omega.1 };
    let t = cfg.problem.horizon;
    let times: Vec<f64> = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0].iter().map(|f| f * t).collect();
    let mut rep = wuc_demo(&model, omega, &times)?;
    let zero = certify_projections(&model, omega, &vec![0.0; model.modes()])?;
    rep.check_le("zero_datum_certified", zero.iter().copied().fold(0.0, f64::max), 1e-8);
    Ok(rep)
}

fn checkpoints(cfg: &RunConfig) -> Vec<f64> {
    if cfg.checkpoints.is_empty() {
        let t = cfg.problem.horizon;
        vec![0.1 * t, 0.5 * t, t]
    } else {
        cfg.checkpoints.clone()
    }
}

fn sampled_at(l1: &crate::mild_solver::GridSolution, t: f64) -> Vec<f64> {
    let tau = l1.t[1] - l1.t[0];
    let k = l1.t.len() - 1;
    let j = ((t / tau).floor() as usize).min(k);
    let j1 = (j + 1).min(k);
    let th = if j1 == j { 0.0 } else { (t - l1.t[j]) / tau };
    l1.u[j].iter().zip(&l1.u[j1]).map(|(a, b)| (1.0 - th) * a + th * b).collect()
}

/// Picard against the L1 oracle and, for constant `q`, Laplace inversion.
pub fn compare_report(cfg: &RunConfig, l1_steps: usize) -> Result<Report> {
    if !matches!(cfg.problem.initial, InitialData::Function(_)) {
        return Err(Error::Config("compare needs the initial datum as an expression in x".into()));
    }
    let cps = checkpoints(cfg);
    let model = Model::new(cfg.problem.clone(), cfg.m, cfg.n_modes)?;
    let grid = TimeGrid::graded(cfg.problem.horizon, cfg.steps, cfg.grading)?.with_checkpoints(&cps)?;
    let sol: MildSolution = solve(&model, &grid, cfg.windows, &cfg.solver)?;
    let l1 = l1_fd_solve(&cfg.problem, cfg.m, l1_steps)?;
    let laplace = wuc_applicable(&cfg.problem);
    let single = cfg.problem.terms() == 1;
    let mut rep = Report::new("compare");
    rep.value("three_way", laplace);
    let h = model.basis.weight;
    let l2 = |d: &[f64]| (h * d.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let sup = |d: &[f64]| d.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (mut pl1, mut plap, mut l1lap) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &cps {
        let u = sol.field_at(grid.nearest(t));
        let v = sampled_at(&l1, t);
        let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        rep.value(&format!("t{t}.picard_l1.sup"), format!("{:.6e}", sup(&d)));
        rep.value(&format!("t{t}.picard_l1.l2"), format!("{:.6e}", l2(&d)));
        pl1 = pl1.max(sup(&d));
        if laplace {
            let w = model.basis.reconstruct(&laplace_coeffs(&model, t)?);
            let d: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
            let e: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
            rep.value(&format!("t{t}.picard_laplace.sup"), format!("{:.6e}", sup(&d)));
            rep.value(&format!("t{t}.picard_laplace.l2"), format!("{:.6e}", l2(&d)));
            plap = plap.max(sup(&d));
            l1lap = l1lap.max(sup(&e));
        }
    }
    rep.check_le("picard_l1", pl1, 2e-3);
    if laplace {
        rep.check_le("picard_laplace", plap, if single { 1e-6 } else { 1e-4 });
        rep.check_le("l1_laplace", l1lap, 2e-3);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_digits() {
        assert_eq!(sig15(std::f64::consts::E), "2.71828182845905");
        assert_eq!(sig15(1.5f64.cos()), "0.0707372016677029");
        assert_eq!(sig15(-12.5), "-12.5000000000000");
        assert_eq!(sig15(1e-300), "1.00000000000000e-300");
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["fracdiff", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["fracdiff", "ml", "0", "1", "0"]), EXIT_USAGE);
        assert_eq!(run(["fracdiff", "ml", "1", "1", "1"]), EXIT_OK);
        assert_eq!(run(["fracdiff", "solve", "--config", "/nonexistent/x.cfg"]), EXIT_USAGE);
    }
}
