//! Numerical checks of the regularity, Hölder, analyticity and unique
//! continuation statements, with machine-readable reports.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laplace::{default_radius, laplace_coeffs, residue_coeffs};
use crate::mild_solver::{
    solve, InitialData, MildSolution, Model, Problem, SolverOptions, TimeGrid,
};
use crate::specfun::{ln_gamma, rgamma, MLParams, MittagLeffler};
use crate::spectral::Field;

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub pass: bool,
}

/// Key=value report: measured values plus checks against thresholds.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub title: String,
    pub values: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(title: &str) -> Self {
        Report { title: title.to_string(), ..Default::default() }
    }

    pub fn value(&mut self, key: &str, v: impl std::fmt::Display) {
        self.values.push((key.to_string(), v.to_string()));
    }

    pub fn check_le(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        let pass = value <= threshold;
        self.checks.push(Check { name: name.into(), value, threshold, relation: "<=", pass });
        pass
    }

    pub fn check_ge(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        let pass = value >= threshold;
        self.checks.push(Check { name: name.into(), value, threshold, relation: ">=", pass });
        pass
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn merge(&mut self, other: Report) {
        let prefix = other.title.clone();
        for (k, v) in other.values {
            self.values.push((format!("{prefix}.{k}"), v));
        }
        for mut c in other.checks {
            c.name = format!("{prefix}.{}", c.name);
            self.checks.push(c);
        }
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "report={}", self.title);
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k}={v}");
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "check.{}={} value={:.6e} threshold={:.6e} relation={}",
                c.name,
                if c.pass { "pass" } else { "fail" },
                c.value,
                c.threshold,
                c.relation
            );
        }
        let _ = writeln!(s, "passed={}", self.passed());
        s
    }
}

/// Write rows of numbers as CSV with the given header.
pub fn write_trace<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub constant: f64,
    pub nodes: usize,
}

/// Least-squares slope of `log ‖A^γ u(t)‖` against `log t` over the window.
pub fn fit_decay_rate(sol: &MildSolution, gamma: f64, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = sol
        .grid
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= window.0 && t <= window.1 && t > 0.0)
        .map(|(k, &t)| (t.ln(), sol.frac_norm(gamma, k).ln()))
        .filter(|(_, y)| y.is_finite())
        .collect();
    if pts.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "only {} nodes in the fit window [{}, {}]",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let (slope, intercept) = least_squares(&pts);
    Ok(DecayFit { slope, constant: intercept.exp(), nodes: pts.len() })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (x - mx), b + (x - mx) * (y - my)));
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Largest `‖A^γ u(t_k)‖ t_k^{α₁γ} / ‖a‖` over the grid (t > 0).
pub fn apriori_constant(sol: &MildSolution, gamma: f64, alpha1: f64) -> f64 {
    let a = sol.frac_norm(0.0, 0);
    sol.grid
        .nodes
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &t)| sol.frac_norm(gamma, k) * t.powf(alpha1 * gamma) / a)
        .fold(0.0, f64::max)
}

/// A vector-valued time series for the Hölder norm.
#[derive(Debug, Clone)]
pub struct HolderSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub theta: f64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `sup_t ‖f(t)‖ + sup_{t₁≠t₂} ‖f(t₁) - f(t₂)‖ / |t₁ - t₂|^θ` over node pairs.
pub fn holder_norm(series: &HolderSeries) -> f64 {
    let (sup, q) = holder_parts(series);
    sup + q
}

/// The sup part and the difference-quotient part of [`holder_norm`].
pub fn holder_parts(series: &HolderSeries) -> (f64, f64) {
    let sup = series.values.iter().map(|v| l2(v)).fold(0.0, f64::max);
    let mut q: f64 = 0.0;
    let n = series.times.len();
    for i in 0..n {
        for j in i + 1..n {
            let dt = (series.times[j] - series.times[i]).abs();
            let d: f64 = series.values[i]
                .iter()
                .zip(&series.values[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            q = q.max(d / dt.powf(series.theta));
        }
    }
    (sup, q)
}

#[derive(Debug, Clone)]
pub struct HolderLevel {
    pub steps: usize,
    pub norm_au: f64,
    pub norm_f: f64,
    pub ratio: f64,
    /// Difference-quotient part of `‖F‖_θ`.
    pub quotient_f: f64,
}

/// Solve with `a = 0` on `levels` dyadically refined uniform grids and compare
/// `‖Au‖_θ` with `‖F‖_θ`.
pub fn holder_suite(
    problem: &Problem,
    m: usize,
    n_modes: usize,
    k0: usize,
    levels: usize,
    theta: f64,
    window_count: usize,
) -> Result<(Report, Vec<HolderLevel>)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0,1), got {theta}")));
    }
    let forcing = problem
        .forcing
        .clone()
        .ok_or_else(|| Error::InvalidParameter("the Hölder suite needs a forcing term".into()))?;
    let model = Model::new(problem.clone(), m, n_modes)?;
    if model.a_coeffs.iter().any(|c| c.abs() > 1e-14) {
        return Err(Error::InvalidParameter("the Hölder suite needs a = 0".into()));
    }
    let xs = model.basis.nodes();
    if xs.iter().any(|&x| forcing(x, 0.0).abs() > 1e-14) {
        return Err(Error::InvalidParameter("the Hölder suite needs F(0) = 0".into()));
    }
    let mut out = Vec::new();
    for l in 0..levels {
        let k = k0 << l;
        let grid = TimeGrid::uniform(problem.horizon, k)?;
        let sol = solve(&model, &grid, window_count, &SolverOptions::default())?;
        let au: Vec<Vec<f64>> = (0..grid.len())
            .map(|k| sol.at(k).iter().zip(&model.basis.lambdas).map(|(c, l)| c * l).collect())
            .collect();
        let f: Vec<Vec<f64>> = grid.nodes.iter().map(|&t| model.forcing_coeffs(t).unwrap()).collect();
        let norm_au = holder_norm(&HolderSeries { times: grid.nodes.clone(), values: au, theta });
        let (sup_f, quotient_f) = holder_parts(&HolderSeries { times: grid.nodes.clone(), values: f, theta });
        let norm_f = sup_f + quotient_f;
        out.push(HolderLevel { steps: k, norm_au, norm_f, ratio: norm_au / norm_f, quotient_f });
    }
    let mut rep = Report::new("holder");
    rep.value("theta", theta);
    rep.value("terms", problem.terms());
    for (i, l) in out.iter().enumerate() {
        rep.value(&format!("level{i}.steps"), l.steps);
        rep.value(&format!("level{i}.norm_au"), format!("{:.6e}", l.norm_au));
        rep.value(&format!("level{i}.norm_f"), format!("{:.6e}", l.norm_f));
        rep.value(&format!("level{i}.ratio"), format!("{:.6e}", l.ratio));
        rep.value(&format!("level{i}.quotient_f"), format!("{:.6e}", l.quotient_f));
        if !l.ratio.is_finite() {
            rep.check_le(&format!("level{i}.ratio_finite"), f64::INFINITY, f64::MAX);
        }
    }
    if out.len() >= 2 {
        let growth = out.windows(2).map(|w| w[1].ratio / w[0].ratio).fold(0.0, f64::max);
        rep.check_le("plateau_growth", growth, 1.1);
    }
    Ok((rep, out))
}

/// Hölder quotient of `F(t) = t^{p} g` at exponent θ under dyadic refinement of
/// a uniform grid; it grows like `Δt^{p-θ}` when `p < θ`.
pub fn holder_control(power: f64, theta: f64, horizon: f64, k0: usize, levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|l| {
            let k = k0 << l;
            let times: Vec<f64> = (0..=k).map(|i| horizon * i as f64 / k as f64).collect();
            let values = times.iter().map(|t| vec![t.powf(power)]).collect();
            holder_norm(&HolderSeries { times, values, theta })
        })
        .collect()
}

/// Points `z = ρ e^{iθ}`: radial nodes (starting at 0) on each ray.
#[derive(Debug, Clone)]
pub struct SectorGrid {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
}

impl SectorGrid {
    pub fn new(radii: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || radii[0] != 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("radial nodes must start at 0 and increase".into()));
        }
        if angles.iter().any(|a| !(a.abs() < PI / 2.0)) {
            return Err(Error::InvalidParameter("sector angles must satisfy |θ| < π/2".into()));
        }
        Ok(SectorGrid { radii, angles })
    }

    /// Graded nodes `ρ_lo (k/k_g)^r` up to `ρ_lo`, then uniform steps `h` to `ρ_max`.
    pub fn graded_radii(rho_lo: f64, k_graded: usize, r: f64, h: f64, rho_max: f64) -> Vec<f64> {
        let mut v: Vec<f64> = (0..=k_graded).map(|k| rho_lo * (k as f64 / k_graded as f64).powf(r)).collect();
        let steps = ((rho_max - rho_lo) / h).round() as usize;
        for j in 1..=steps {
            v.push(rho_lo + j as f64 * h);
        }
        v
    }

    /// The smallest positive radius, `δ`.
    pub fn delta(&self) -> f64 {
        self.radii[1]
    }
}

/// Iterates of the complex-time map on every ray.
#[derive(Debug, Clone)]
pub struct SectorSolution {
    pub grid: SectorGrid,
    /// `[ray][node][mode]`.
    pub values: Vec<Vec<Vec<Complex64>>>,
    /// `d_n = ‖A^{1/2}(u_{n+1} - u_n)‖`, `[ray][iteration][node]`.
    pub diffs: Vec<Vec<Vec<f64>>>,
}

fn complex_weights(
    z: &[Complex64],
    prims: &dyn Fn(Complex64) -> Result<(Complex64, Complex64)>,
) -> Result<Vec<Complex64>> {
    let kk = z.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut w = vec![zero; kk * (kk + 1) / 2];
    let mut p1 = vec![zero; kk];
    let mut p2 = vec![zero; kk];
    for k in 1..kk {
        for j in 0..k {
            let (a, b) = prims(z[k] - z[j])?;
            p1[j] = a;
            p2[j] = b;
        }
        p1[k] = zero;
        p2[k] = zero;
        let off = k * (k + 1) / 2;
        for j in 0..k {
            let h = z[j + 1] - z[j];
            let d2 = (p2[j] - p2[j + 1]) / h;
            w[off + j] += p1[j] - d2;
            w[off + j + 1] += d2 - p1[j + 1];
        }
    }
    Ok(w)
}

struct ComplexFamily {
    alpha: f64,
    beta: f64,
    ml1: MittagLeffler,
    ml2: MittagLeffler,
}

impl ComplexFamily {
    fn new(alpha: f64, beta: f64) -> Result<Self> {
        Ok(ComplexFamily {
            alpha,
            beta,
            ml1: MittagLeffler::new(MLParams::new(alpha, beta + 1.0)?),
            ml2: MittagLeffler::new(MLParams::new(alpha, beta + 2.0)?),
        })
    }

    fn prims(&self, lambda: f64, s: Complex64) -> Result<(Complex64, Complex64)> {
        if s.norm() == 0.0 {
            return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
        }
        let w = -lambda * s.powf(self.alpha);
        let sb = s.powf(self.beta);
        Ok((sb * self.ml1.eval(w)?, sb * s * self.ml2.eval(w)?))
    }
}

fn cmatvec(m: &[f64], v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|r| m[r * n..(r + 1) * n].iter().zip(v).map(|(a, b)| b * a).sum())
        .collect()
}

/// Picard iterates `u_0 = 0, u_{n+1} = 𝒦(u_n)` continued to complex time along
/// each ray, with the kernels evaluated at complex arguments. Stops after
/// `n_iters` iterations or once the update falls below `tol`.
pub fn sector_extend(model: &Model, grid: &SectorGrid, n_iters: usize, tol: f64) -> Result<SectorSolution> {
    let p = &model.problem;
    if p.forcing.is_some() {
        return Err(Error::InvalidParameter("sector continuation needs F = 0".into()));
    }
    let a1 = p.alpha1();
    let nm = model.modes();
    let lambdas = &model.basis.lambdas;
    let kk = grid.radii.len();
    let relax = MittagLeffler::new(MLParams::new(a1, 1.0)?);
    let kfam = ComplexFamily::new(a1, a1)?;
    let wfams: Vec<Option<ComplexFamily>> = model
        .q_mats
        .iter()
        .enumerate()
        .map(|(i, m)| m.as_ref().map(|_| ComplexFamily::new(a1, a1 - p.alphas[i + 1])).transpose())
        .collect::<Result<_>>()?;
    let mut values = Vec::new();
    let mut diffs = Vec::new();
    for &th in &grid.angles {
        let rot = Complex64::from_polar(1.0, th);
        let z: Vec<Complex64> = grid.radii.iter().map(|r| rot * r).collect();
        // per-mode tables on this ray
        let mut base = vec![vec![Complex64::new(0.0, 0.0); nm]; kk];
        let mut kw: Vec<Vec<Complex64>> = Vec::new();
        let mut ww: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); wfams.len()];
        for (n, &lam) in lambdas.iter().enumerate() {
            for k in 0..kk {
                base[k][n] = if k == 0 {
                    Complex64::new(model.a_coeffs[n], 0.0)
                } else {
                    relax.eval(-lam * z[k].powf(a1))? * model.a_coeffs[n]
                };
            }
            if model.drift_mat.is_some() {
                kw.push(complex_weights(&z, &|s| kfam.prims(lam, s))?);
            }
            for (i, f) in wfams.iter().enumerate() {
                if let Some(f) = f {
                    let qa = model.qa[i][n];
                    for k in 1..kk {
                        base[k][n] += f.prims(lam, z[k])?.0 * qa;
                    }
                    ww[i].push(complex_weights(&z, &|s| f.prims(lam, s))?);
                }
            }
        }
        let mut u = vec![vec![Complex64::new(0.0, 0.0); nm]; kk];
        let mut ray_diffs = Vec::new();
        for _ in 0..n_iters {
            let dc: Option<Vec<Vec<Complex64>>> =
                model.drift_mat.as_ref().map(|m| u.iter().map(|c| cmatvec(m, c)).collect());
            let qc: Vec<Option<Vec<Vec<Complex64>>>> = model
                .q_mats
                .iter()
                .map(|m| m.as_ref().map(|m| u.iter().map(|c| cmatvec(m, c)).collect()))
                .collect();
            let mut next = base.clone();
            for k in 1..kk {
                let off = k * (k + 1) / 2;
                for n in 0..nm {
                    let mut acc = Complex64::new(0.0, 0.0);
                    if let Some(dc) = &dc {
                        for j in 0..=k {
                            acc += kw[n][off + j] * dc[j][n];
                        }
                    }
                    for (i, q) in qc.iter().enumerate() {
                        if let Some(q) = q {
                            for j in 0..=k {
                                acc -= ww[i][n][off + j] * q[j][n];
                            }
                        }
                    }
                    next[k][n] += acc;
                }
            }
            let d: Vec<f64> = (0..kk)
                .map(|k| {
                    (0..nm)
                        .map(|n| lambdas[n] * (next[k][n] - u[k][n]).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            let dmax = d.iter().copied().fold(0.0, f64::max);
            ray_diffs.push(d);
            u = next;
            if !dmax.is_finite() {
                return Err(Error::MlNonConvergence { regime: "sector", z: rot });
            }
            if dmax <= tol {
                break;
            }
        }
        values.push(u);
        diffs.push(ray_diffs);
    }
    Ok(SectorSolution { grid: grid.clone(), values, diffs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub m: f64,
    pub m1: f64,
    pub alpha_bar: f64,
    /// Samples used in the fit.
    pub samples: usize,
    /// Largest `d_n / bound` over the samples (≤ 1 by construction of `M₁`).
    pub worst: f64,
    /// Smallest over iterations of the per-iteration largest `d_n / bound`:
    /// how tight the envelope stays along the whole iteration.
    pub slack: f64,
}

/// Fit `d_n(z) ≤ M₁ Mⁿ |z|^{ᾱn-α₁/2} / Γ(ᾱn+1-α₁/2) ‖a‖`. `M` comes from a
/// least-squares line through the per-iteration maxima, `M₁` from the worst sample.
pub fn fit_sector_envelope(sol: &SectorSolution, alpha1: f64, alpha_bar: f64, a_norm: f64) -> Result<EnvelopeFit> {
    let floor = sol
        .diffs
        .iter()
        .flat_map(|r| r.iter().flat_map(|d| d.iter()))
        .copied()
        .fold(0.0, f64::max)
        * 1e-12;
    let log_shape = |n: usize, rho: f64| -> Result<f64> {
        let e = alpha_bar * n as f64 - alpha1 / 2.0;
        Ok(e * rho.ln() - ln_gamma(alpha_bar * n as f64 + 1.0 - alpha1 / 2.0)? + a_norm.ln())
    };
    let iters = sol.diffs.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut samples = Vec::new();
    let mut per_iter = Vec::new();
    for n in 0..iters {
        let mut best = f64::NEG_INFINITY;
        for ray in &sol.diffs {
            let Some(d) = ray.get(n) else { continue };
            for (k, &dn) in d.iter().enumerate().skip(1) {
                if dn > floor {
                    let y = dn.ln() - log_shape(n, sol.grid.radii[k])?;
                    samples.push((n, y));
                    best = best.max(y);
                }
            }
        }
        if best.is_finite() {
            per_iter.push((n as f64, best));
        }
    }
    if per_iter.len() < 3 {
        return Err(Error::DegenerateFit(format!("only {} usable iterations", per_iter.len())));
    }
    let (log_m, _) = least_squares(&per_iter);
    let log_m1 = samples.iter().map(|(n, y)| y - *n as f64 * log_m).fold(f64::NEG_INFINITY, f64::max);
    let worst = samples
        .iter()
        .map(|(n, y)| (y - *n as f64 * log_m - log_m1).exp())
        .fold(0.0, f64::max);
    let slack = per_iter
        .iter()
        .map(|(n, y)| (y - n * log_m - log_m1).exp())
        .fold(f64::INFINITY, f64::min);
    Ok(EnvelopeFit { m: log_m.exp(), m1: log_m1.exp(), alpha_bar, samples: samples.len(), worst, slack })
}

/// Values of each mode on a `(ρ, θ)` patch with uniform spacing.
#[derive(Debug, Clone)]
pub struct Patch {
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// `[θ index][ρ index][mode]`.
    pub values: Vec<Vec<Vec<Complex64>>>,
}

/// Largest discrete Cauchy–Riemann residual `|∂_θ f - iρ ∂_ρ f|` over the
/// interior points and modes (the polar form of `∂f/∂z̄ = 0`).
pub fn analyticity_check(patch: &Patch) -> f64 {
    analyticity_check_strided(patch, 1)
}

/// As [`analyticity_check`], restricted to every `stride`-th point so that
/// nested refinements are compared at the same locations.
pub fn analyticity_check_strided(patch: &Patch, stride: usize) -> f64 {
    cr_residual_points(patch, stride).iter().map(|p| p.2).fold(0.0, f64::max)
}

/// `(ρ, θ, residual)` at every `stride`-th interior point, maximized over modes.
pub fn cr_residual_points(patch: &Patch, stride: usize) -> Vec<(f64, f64, f64)> {
    let (nt, nr) = (patch.theta.len(), patch.rho.len());
    if nt < 2 * stride + 1 || nr < 2 * stride + 1 {
        return Vec::new();
    }
    let ht = patch.theta[1] - patch.theta[0];
    let hr = patch.rho[1] - patch.rho[0];
    let mut out = Vec::new();
    for i in (stride..nt - stride).step_by(stride) {
        for j in (stride..nr - stride).step_by(stride) {
            let mut worst: f64 = 0.0;
            for m in 0..patch.values[i][j].len() {
                let dth = (patch.values[i + 1][j][m] - patch.values[i - 1][j][m]) / (2.0 * ht);
                let drho = (patch.values[i][j + 1][m] - patch.values[i][j - 1][m]) / (2.0 * hr);
                let r = dth - Complex64::new(0.0, patch.rho[j]) * drho;
                worst = worst.max(r.norm());
            }
            out.push((patch.rho[j], patch.theta[i], worst));
        }
    }
    out
}

/// Patch layout for the refinement study.
#[derive(Debug, Clone, Copy)]
pub struct PatchSpec {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub theta_c: f64,
    pub theta_half: f64,
    /// Radial steps across the patch at the coarsest level.
    pub steps: usize,
    /// Graded nodes below `rho_lo` at the coarsest level.
    pub graded: usize,
}

impl PatchSpec {
    pub fn sector_grid(&self, level: usize, r: f64) -> Result<SectorGrid> {
        let steps = self.steps << level;
        let h = (self.rho_hi - self.rho_lo) / steps as f64;
        let radii = SectorGrid::graded_radii(self.rho_lo, self.graded << level, r, h, self.rho_hi);
        let rays = 2 * (2usize << level) + 1;
        let angles = (0..rays)
            .map(|j| self.theta_c - self.theta_half + 2.0 * self.theta_half * j as f64 / (rays - 1) as f64)
            .collect();
        SectorGrid::new(radii, angles)
    }

    pub fn extract(&self, sol: &SectorSolution) -> Patch {
        let first = sol.grid.radii.iter().position(|r| (*r - self.rho_lo).abs() < 1e-12).unwrap_or(0);
        let rho = sol.grid.radii[first..].to_vec();
        let values = sol.values.iter().map(|ray| ray[first..].to_vec()).collect();
        Patch { rho, theta: sol.grid.angles.clone(), values }
    }
}

/// Outcome of [`cr_refinement`].
#[derive(Debug, Clone)]
pub struct CrStudy {
    /// Largest residual per level at the coarse-level points.
    pub residuals: Vec<f64>,
    /// `log₂` of successive residual ratios.
    pub orders: Vec<f64>,
    /// `(level, ρ, θ, residual)` for the trace file.
    pub points: Vec<(usize, f64, f64, f64)>,
}

/// CR residuals and observed orders under simultaneous refinement of the patch
/// and the radial solver grid.
pub fn cr_refinement(model: &Model, spec: &PatchSpec, levels: usize) -> Result<CrStudy> {
    let r = TimeGrid::default_grading(model.problem.alpha1());
    let mut residuals = Vec::new();
    let mut points = Vec::new();
    for l in 0..levels {
        let grid = spec.sector_grid(l, r)?;
        let sol = sector_extend(model, &grid, 400, 1e-15)?;
        let pts = cr_residual_points(&spec.extract(&sol), 1 << l);
        residuals.push(pts.iter().map(|p| p.2).fold(0.0, f64::max));
        points.extend(pts.into_iter().map(|(a, b, c)| (l, a, b, c)));
    }
    let orders = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(CrStudy { residuals, orders, points })
}

/// `ᾱ = α₁ - max(α₁/2, α₂)`, the exponent of the iteration estimate.
pub fn alpha_bar(alphas: &[f64]) -> f64 {
    let a1 = alphas[0];
    let lower = alphas.get(1).copied().unwrap_or(0.0);
    a1 - (a1 / 2.0).max(lower)
}

/// Galerkin residual `‖∂^{α₁}c + Σ Q_i ∂^{α_i}c + Λc - Dc - F‖` per node, with
/// the Caputo derivatives by the L1 formula on the (possibly graded) grid.
pub fn caputo_residual(sol: &MildSolution, model: &Model) -> Result<Vec<f64>> {
    let t = &sol.grid.nodes;
    let kk = t.len();
    let nm = model.modes();
    let p = &model.problem;
    let caputo = |alpha: f64, c: &[f64], k: usize| -> f64 {
        let g = rgamma(2.0 - alpha);
        let mut acc = 0.0;
        for j in 0..k {
            let slope = (c[j + 1] - c[j]) / (t[j + 1] - t[j]);
            acc += slope * ((t[k] - t[j]).powf(1.0 - alpha) - (t[k] - t[j + 1]).powf(1.0 - alpha));
        }
        acc * g
    };
    let mut out = vec![0.0; kk];
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        let ck = sol.at(k);
        let mut r: Vec<f64> = (0..nm)
            .map(|n| caputo(p.alphas[0], &sol.coeffs[n], k) + model.basis.lambdas[n] * ck[n])
            .collect();
        for (i, qm) in model.q_mats.iter().enumerate() {
            if let Some(qm) = qm {
                let d: Vec<f64> = (0..nm).map(|n| caputo(p.alphas[i + 1], &sol.coeffs[n], k)).collect();
                for (row, rv) in r.iter_mut().enumerate() {
                    *rv += (0..nm).map(|m| qm[row * nm + m] * d[m]).sum::<f64>();
                }
            }
        }
        if let Some(dm) = &model.drift_mat {
            for (row, rv) in r.iter_mut().enumerate() {
                *rv -= (0..nm).map(|m| dm[row * nm + m] * ck[m]).sum::<f64>();
            }
        }
        if let Some(f) = model.forcing_coeffs(t[k]) {
            r.iter_mut().zip(&f).for_each(|(a, b)| *a -= b);
        }
        *o = l2(&r);
    }
    Ok(out)
}

/// Median residual over `t ∈ [T/10, T]`.
pub fn residual_headline(sol: &MildSolution, residual: &[f64]) -> f64 {
    let tmax = sol.grid.horizon();
    let mut v: Vec<f64> = sol
        .grid
        .nodes
        .iter()
        .zip(residual)
        .filter(|(t, _)| **t >= tmax / 10.0)
        .map(|(_, r)| *r)
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return f64::NAN;
    }
    v[v.len() / 2]
}

/// Subinterval `ω = (x0, x1)` of the domain.
#[derive(Debug, Clone, Copy)]
pub struct Omega {
    pub x0: f64,
    pub x1: f64,
}

fn omega_nodes(model: &Model, omega: Omega) -> Vec<usize> {
    model
        .basis
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > omega.x0 && x < omega.x1)
        .map(|(i, _)| i)
        .collect()
}

fn sup_on(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| v[i].abs()).fold(0.0, f64::max)
}

/// Certify each mode projection from its eigenprojection restricted to `ω`.
/// Returns `|a_k| = max_ω|u_k| / max_ω|φ_k|` per mode.
pub fn certify_projections(model: &Model, omega: Omega, projections: &[f64]) -> Result<Vec<f64>> {
    let idx = omega_nodes(model, omega);
    let lambdas = &model.basis.lambdas;
    let mut out = Vec::new();
    for k in 0..lambdas.len() {
        let c = residue_coeffs(projections, lambdas, k, default_radius(lambdas, k))?;
        let uk = model.basis.reconstruct(&c);
        let phi_on = sup_on(&model.basis.modes[k], &idx);
        if phi_on == 0.0 {
            return Err(Error::Domain(format!("eigenfunction {} vanishes on omega", k + 1)));
        }
        out.push(sup_on(&uk, &idx) / phi_on);
    }
    Ok(out)
}

/// The three-part unique-continuation demonstration for constant `q_j`.
pub fn wuc_demo(model: &Model, omega: Omega, times: &[f64]) -> Result<Report> {
    let l = model.problem.length;
    if !(omega.x0 > 0.0 && omega.x1 < l && omega.x0 < omega.x1) {
        return Err(Error::InvalidParameter(format!(
            "omega = ({}, {}) must lie strictly inside (0, {l})",
            omega.x0, omega.x1
        )));
    }
    let idx = omega_nodes(model, omega);
    let mut rep = Report::new("wuc");
    rep.value("omega", format!("({}, {})", omega.x0, omega.x1));
    rep.value("omega_nodes", idx.len());

    // (i) forward check: a solution with (a, φ_1) ≠ 0 is visible on ω
    let a1 = model.a_coeffs.first().copied().unwrap_or(0.0);
    let mut min_sup = f64::INFINITY;
    let mut fields = Vec::new();
    for &t in times {
        let c = laplace_coeffs(model, t)?;
        let u = model.basis.reconstruct(&c);
        min_sup = min_sup.min(sup_on(&u, &idx));
        fields.push((t, u));
    }
    rep.value("first_projection", format!("{a1:.6e}"));
    rep.value("min_over_t_sup_omega_u", format!("{min_sup:.6e}"));
    if a1.abs() > 1e-12 {
        rep.check_ge("forward_nonvanishing", min_sup, 1e-10);
    }

    // (ii) mechanism: projections from residues restricted to ω
    let cert = certify_projections(model, omega, &model.a_coeffs)?;
    let worst = cert
        .iter()
        .zip(&model.a_coeffs)
        .map(|(c, a)| (c - a.abs()).abs())
        .fold(0.0, f64::max);
    rep.value("certified_modes", cert.len());
    rep.check_le("mechanism_certified_vs_direct", worst, 1e-8);

    // (iii) zero extension past x = L: the junction residual equals the flux
    let h = model.basis.weight;
    let m = model.basis.m;
    let a_end = model.op.a_mid[m - 1];
    let mut worst_junction: f64 = 0.0;
    let mut max_flux: f64 = 0.0;
    for (_, u) in &fields {
        let ext = zero_extend(u, m / 8);
        // row x_M of the extended stencil (a continued by its end value)
        let res = -(a_end * (ext[m + 1] - ext[m]) - a_end * (ext[m] - ext[m - 1])) / (h * h);
        let flux = -a_end * (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h);
        worst_junction = worst_junction.max((res * h + flux).abs() / flux.abs().max(1e-300));
        max_flux = max_flux.max(flux.abs());
    }
    rep.value("max_boundary_flux", format!("{max_flux:.6e}"));
    rep.check_le("junction_residual_matches_flux", worst_junction, 0.05 + 10.0 * h);
    Ok(rep)
}

/// `u` continued by zero over `extra` further nodes.
pub fn zero_extend(u: &[f64], extra: usize) -> Field {
    let mut v = u.to_vec();
    v.extend(std::iter::repeat_n(0.0, extra));
    v
}

/// `λ_1^γ E_{α₁,1}(-λ_1 t^{α₁})`, the exact decay curve for `a = φ_1`, `ℓ = 1`.
pub fn single_mode_curve(alpha1: f64, lambda: f64, gamma: f64, t: f64) -> Result<f64> {
    let ml = MittagLeffler::new(MLParams::new(alpha1, 1.0)?);
    Ok(lambda.powf(gamma) * ml.eval_real(-lambda * t.powf(alpha1))?)
}

/// Worst-case initial data: `(a, φ_n) = n^{-0.51}`.
pub fn rough_initial(modes: usize) -> InitialData {
    InitialData::Modes((1..=modes).map(|n| (n as f64).powf(-0.51)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mild_solver::{Coef, Forcing};
    use std::sync::Arc;

    #[test]
    fn holder_norm_examples() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let s = HolderSeries { times: times.clone(), values: times.iter().map(|t| vec![*t]).collect(), theta: 0.5 };
        assert!((holder_norm(&s) - 2.0).abs() < 1e-14);
        let z = HolderSeries { times, values: vec![vec![0.0]; 11], theta: 0.5 };
        assert_eq!(holder_norm(&z), 0.0);
        let c = holder_control(0.3, 0.5, 1.0, 8, 4);
        // the quotient part grows by 2^{0.2} per level
        assert!(c.windows(2).all(|w| (w[1] - 1.0) > 1.14 * (w[0] - 1.0)), "{c:?}");
        let ok = holder_control(0.5, 0.5, 1.0, 8, 4);
        assert!(ok.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-12));
    }

    #[test]
    fn report_format() {
        let mut r = Report::new("demo");
        r.value("k", 3);
        r.check_le("small", 1.0, 2.0);
        r.check_ge("big", 1.0, 2.0);
        let s = r.to_kv();
        assert!(s.contains("report=demo\nk=3\n"));
        assert!(s.contains("check.small=pass"));
        assert!(s.contains("check.big=fail"));
        assert!(s.ends_with("passed=false\n"));
    }

    #[test]
    fn cr_residual_of_analytic_and_control() {
        let ml = MittagLeffler::new(MLParams::new(0.7, 1.0).unwrap());
        let make = |k: usize, f: &dyn Fn(Complex64) -> Complex64| {
            let stride = k / 8;
            let rho: Vec<f64> = (0..=k).map(|j| 0.5 + 0.5 * j as f64 / k as f64).collect();
            let theta: Vec<f64> = (0..=k).map(|j| -PI / 8.0 + PI / 4.0 * j as f64 / k as f64).collect();
            let values = theta
                .iter()
                .map(|&t| rho.iter().map(|&r| vec![f(Complex64::from_polar(r, t))]).collect())
                .collect();
            analyticity_check_strided(&Patch { rho, theta, values }, stride)
        };
        let e = |z: Complex64| ml.eval(-2.0 * z.powf(0.7)).unwrap();
        let (r1, r2) = (make(8, &e), make(16, &e));
        assert!((r1 / r2).log2() > 1.9, "{r1} {r2}");
        let abs = |z: Complex64| Complex64::new(z.norm(), 0.0);
        let (c1, c2) = (make(8, &abs), make(16, &abs));
        assert!(c2 > 0.4 && (c1 / c2) < 1.2);
    }

    #[test]
    fn decoupled_sector_iteration_is_stationary() {
        let p = Problem::single_term(PI, 0.6, InitialData::Modes(vec![1.0, 0.3]), 1.0);
        let model = Model::new(p, 64, 2).unwrap();
        let grid = SectorGrid::new(vec![0.0, 0.2, 0.5, 1.0], vec![-0.5, 0.0, 0.7]).unwrap();
        let sol = sector_extend(&model, &grid, 5, 0.0).unwrap();
        let ml = MittagLeffler::new(MLParams::new(0.6, 1.0).unwrap());
        for (ray, &th) in grid.angles.iter().enumerate() {
            // u_1 = S(z)a and u_2 = u_1
            assert_eq!(sol.diffs[ray].len(), 2);
            assert!(sol.diffs[ray][1].iter().all(|d| *d == 0.0));
            let z = Complex64::from_polar(1.0, th);
            let want = ml.eval(-model.basis.lambdas[0] * z.powf(0.6)).unwrap();
            assert!((sol.values[ray][3][0] - want).norm() < 1e-14);
        }
        assert!(SectorGrid::new(vec![0.0, 1.0], vec![1.6]).is_err());
    }

    #[test]
    fn sector_real_axis_matches_time_solver() {
        let p = Problem {
            length: PI,
            alphas: vec![0.8, 0.4],
            q: vec![Coef::func(|x| 1.0 + 0.3 * x.cos())],
            drift: Coef::Const(0.0),
            a_coef: Coef::Const(1.0),
            b_coef: Coef::Const(0.0),
            initial: InitialData::Function(Arc::new(|x: f64| x * (PI - x))),
            forcing: None,
            horizon: 1.0,
        };
        let model = Model::new(p, 64, 6).unwrap();
        let rad = SectorGrid::graded_radii(0.2, 8, 2.5, 0.1, 1.0);
        let grid = SectorGrid::new(rad.clone(), vec![0.0, PI / 4.0]).unwrap();
        let sec = sector_extend(&model, &grid, 200, 1e-14).unwrap();
        let tg = TimeGrid::from_nodes(rad).unwrap();
        let sol = solve(&model, &tg, 2, &SolverOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..tg.len() {
            for n in 0..6 {
                worst = worst.max((sec.values[0][k][n].re - sol.coeffs[n][k]).abs());
                assert!(sec.values[0][k][n].im.abs() < 1e-13);
            }
        }
        assert!(worst < 1e-8, "{worst}");
        let fit = fit_sector_envelope(&sec, 0.8, alpha_bar(&[0.8, 0.4]), 1.0).unwrap();
        assert!(fit.m > 0.0 && fit.m1 > 0.0 && fit.worst <= 1.0 + 1e-12);
        assert!(fit.slack > 1e-3 && fit.slack <= 1.0, "{fit:?}");
    }

    #[test]
    fn decay_fit_of_single_mode() {
        let p = Problem::single_term(PI, 0.8, InitialData::Modes(vec![1.0]), 1.0);
        let model = Model::new(p, 64, 4).unwrap();
        let grid = TimeGrid::graded(1.0, 64, 2.5).unwrap();
        let sol = solve(&model, &grid, 1, &SolverOptions::default()).unwrap();
        let fit = fit_decay_rate(&sol, 0.5, (1e-3, 1e-1)).unwrap();
        assert!(fit.slope.abs() < 0.1 && fit.slope <= 0.0, "{fit:?}");
        let k = grid.nearest(0.05);
        let want = single_mode_curve(0.8, model.basis.lambdas[0], 0.5, grid.nodes[k]).unwrap();
        assert!((sol.frac_norm(0.5, k) - want).abs() < 1e-12);
        assert!(matches!(fit_decay_rate(&sol, 0.5, (0.5, 0.51)), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn residual_vanishes_for_zero_solution() {
        let p = Problem::single_term(1.0, 0.5, InitialData::Modes(vec![0.0; 4]), 1.0);
        let model = Model::new(p, 32, 4).unwrap();
        let grid = TimeGrid::graded(1.0, 16, 4.0).unwrap();
        let sol = solve(&model, &grid, 1, &SolverOptions::default()).unwrap();
        assert!(caputo_residual(&sol, &model).unwrap().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn holder_suite_rejects_bad_data() {
        let g: Forcing = Arc::new(|x: f64, _t: f64| x.sin());
        let mut p = Problem::single_term(PI, 0.7, InitialData::Modes(vec![0.0; 4]), 1.0);
        p.forcing = Some(g);
        assert!(holder_suite(&p, 32, 4, 8, 2, 0.5, 1).is_err());
        p.forcing = None;
        assert!(holder_suite(&p, 32, 4, 8, 2, 0.5, 1).is_err());
    }

    #[test]
    fn wuc_rejects_boundary_omega() {
        let p = Problem::single_term(PI, 0.7, InitialData::Modes(vec![1.0]), 1.0);
        let model = Model::new(p, 64, 4).unwrap();
        assert!(wuc_demo(&model, Omega { x0: 0.0, x1: 1.0 }, &[0.5]).is_err());
        let rep = wuc_demo(&model, Omega { x0: 1.0, x1: 2.0 }, &[0.1, 0.5, 1.0]).unwrap();
        assert!(rep.passed(), "{}", rep.to_kv());
    }

    #[test]
    fn alpha_bar_values() {
        assert!((alpha_bar(&[0.8, 0.4]) - 0.4).abs() < 1e-15);
        assert!((alpha_bar(&[0.8, 0.2]) - 0.4).abs() < 1e-15);
        assert!((alpha_bar(&[0.9, 0.6]) - 0.3).abs() < 1e-15);
    }
}
