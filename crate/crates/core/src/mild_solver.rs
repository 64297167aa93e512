//! Mild-solution operator, windowed Picard iteration and the L1 finite-difference oracle.
//!
//! Projected on mode `n`, the equation
//! `∂^{α₁}u + Σ_i q_i ∂^{α_i}u = -Au + B u' + F` becomes the Volterra equation
//!
//! ```text
//! c_n(t) = E_{α₁,1}(-λ_n t^{α₁}) a_n                      (I5)
//!        + ∫ K_n(t-τ) (B u' + F)_n(τ) dτ                  (I1)
//!        - Σ_i ∫ W_{n,i}(t-τ) (q_i u)_n(τ) dτ             (I2 + I3)
//!        + Σ_i G_{n,i}(t) (q_i a)_n                        (I4)
//! ```
//!
//! with `K_n(s) = s^{α₁-1}E_{α₁,α₁}(-λ_n s^{α₁})`,
//! `W_{n,i}(s) = s^{α₁-α_i-1}E_{α₁,α₁-α_i}(-λ_n s^{α₁})` and
//! `G_{n,i}(t) = t^{α₁-α_i}E_{α₁,α₁-α_i+1}(-λ_n t^{α₁})`.
//! All three are members of the family `s^{β-1}E_{α,β}(-λs^α)`, whose first two
//! primitives are again of that form, so product integration against
//! piecewise-linear data is exact.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi_unit, gauss_legendre};
use crate::specfun::{gamma_fn, rgamma, MLParams, MittagLeffler};
use crate::spectral::{discretize, eigendecompose, EllipticOperator, Field, SpectralBasis};

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Forcing = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A coefficient field: spatially constant or a function of `x`.
#[derive(Clone)]
pub enum Coef {
    Const(f64),
    Func(SpaceFn),
}

impl Coef {
    pub fn func(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coef::Func(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::Func(f) => f(x),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Coef::Const(c) => Some(*c),
            Coef::Func(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }
}

impl fmt::Debug for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coef::Const(c) => write!(f, "Const({c})"),
            Coef::Func(_) => f.write_str("Func(..)"),
        }
    }
}

/// Initial datum: a function of `x` or mode coefficients `(a, φ_n)` directly.
#[derive(Clone)]
pub enum InitialData {
    Function(SpaceFn),
    Modes(Vec<f64>),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Function(_) => f.write_str("Function(..)"),
            InitialData::Modes(m) => write!(f, "Modes({} coefficients)", m.len()),
        }
    }
}

/// The initial-boundary value problem on `(0, L) x (0, T)`.
#[derive(Clone)]
pub struct Problem {
    pub length: f64,
    /// `α₁ > α₂ > … > α_ℓ`, all in `(0, 1)`.
    pub alphas: Vec<f64>,
    /// `q_2..q_ℓ`.
    pub q: Vec<Coef>,
    pub drift: Coef,
    pub a_coef: Coef,
    pub b_coef: Coef,
    pub initial: InitialData,
    pub forcing: Option<Forcing>,
    pub horizon: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("length", &self.length)
            .field("alphas", &self.alphas)
            .field("q", &self.q)
            .field("drift", &self.drift)
            .field("a_coef", &self.a_coef)
            .field("b_coef", &self.b_coef)
            .field("initial", &self.initial)
            .field("forcing", &self.forcing.as_ref().map(|_| ".."))
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl Problem {
    /// Single-term problem `∂^α u = -Au` with `a ≡ 1`, `b ≡ 0`.
    pub fn single_term(length: f64, alpha: f64, initial: InitialData, horizon: f64) -> Self {
        Problem {
            length,
            alphas: vec![alpha],
            q: Vec::new(),
            drift: Coef::Const(0.0),
            a_coef: Coef::Const(1.0),
            b_coef: Coef::Const(0.0),
            initial,
            forcing: None,
            horizon,
        }
    }

    pub fn alpha1(&self) -> f64 {
        self.alphas[0]
    }

    pub fn terms(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!("length must be positive, got {}", self.length)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon T must be positive, got {}", self.horizon)));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidParameter("at least one fractional order is required".into()));
        }
        for (i, &a) in self.alphas.iter().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidParameter(format!("alpha{} = {a} must lie in (0,1)", i + 1)));
            }
        }
        for (i, w) in self.alphas.windows(2).enumerate() {
            if !(w[0] > w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "orders must be strictly decreasing: alpha{} = {} is not greater than alpha{} = {}",
                    i + 1,
                    w[0],
                    i + 2,
                    w[1]
                )));
            }
        }
        if self.q.len() + 1 != self.alphas.len() {
            return Err(Error::InvalidParameter(format!(
                "{} orders need {} q coefficients, got {}",
                self.alphas.len(),
                self.alphas.len() - 1,
                self.q.len()
            )));
        }
        Ok(())
    }
}

/// `0 = t_0 < t_1 < … < t_K = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub nodes: Vec<f64>,
    pub grading: f64,
}

impl TimeGrid {
    /// `t_k = T (k/K)^r`.
    pub fn graded(horizon: f64, k: usize, r: f64) -> Result<Self> {
        if k < 1 || !(r >= 1.0) || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "graded grid needs K >= 1, r >= 1, T > 0 (K={k}, r={r}, T={horizon})"
            )));
        }
        let nodes = (0..=k).map(|i| horizon * (i as f64 / k as f64).powf(r)).collect();
        Ok(TimeGrid { nodes, grading: r })
    }

    pub fn uniform(horizon: f64, k: usize) -> Result<Self> {
        Self::graded(horizon, k, 1.0)
    }

    /// Default grading `r = max(2, 2/α₁)`.
    pub fn default_grading(alpha1: f64) -> f64 {
        (2.0f64).max(2.0 / alpha1)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "time nodes must start at 0 and increase strictly".into(),
            ));
        }
        Ok(TimeGrid { nodes, grading: f64::NAN })
    }

    /// Move the node nearest to each checkpoint onto it.
    pub fn with_checkpoints(mut self, checkpoints: &[f64]) -> Result<Self> {
        for &c in checkpoints {
            let k = self.nearest(c);
            self.nodes[k] = c;
        }
        if self.nodes[0] != 0.0 || self.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("checkpoints collide on this grid".into()));
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &x) in self.nodes.iter().enumerate() {
            if (x - t).abs() < (self.nodes[best] - t).abs() {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Consecutive non-decreasing differences that count as non-contraction.
    pub streak: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 50, max_halvings: 8, streak: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub start: usize,
    pub end: usize,
    pub t_a: f64,
    pub t_b: f64,
    pub iterations: usize,
    /// Sup-norm of successive differences, one per iteration.
    pub diffs: Vec<f64>,
    /// Largest disagreement with the previous window on the shared nodes.
    pub overlap_diff: Option<f64>,
    pub halvings: usize,
}

impl WindowReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.diffs.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveMetadata {
    pub tol: f64,
    pub windows: Vec<WindowReport>,
}

/// Mode coefficients `c[n][k] = (u(t_k), φ_n)`.
#[derive(Debug, Clone)]
pub struct MildSolution {
    pub basis: Arc<SpectralBasis>,
    pub grid: TimeGrid,
    pub coeffs: Vec<Vec<f64>>,
    pub meta: SolveMetadata,
}

impl MildSolution {
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient vector at node `k`.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[k]).collect()
    }

    /// `u(x, t_k)` at the spatial nodes.
    pub fn field_at(&self, k: usize) -> Field {
        self.basis.reconstruct(&self.at(k))
    }

    /// `‖A^γ u(t_k)‖`.
    pub fn frac_norm(&self, gamma: f64, k: usize) -> f64 {
        self.basis.frac_norm_coeffs(gamma, &self.at(k))
    }

    /// Largest coefficient difference to another solution on the same grid.
    pub fn max_diff(&self, other: &MildSolution) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,x,u`.
    pub fn write_solution_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,u")?;
        let xs = self.basis.nodes();
        for (k, &t) in self.grid.nodes.iter().enumerate() {
            let u = self.field_at(k);
            for (x, v) in xs.iter().zip(&u) {
                writeln!(w, "{t:.16e},{x:.16e},{v:.16e}")?;
            }
        }
        Ok(())
    }

    /// CSV with columns `t,n,c_n`.
    pub fn write_modes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,n,c_n")?;
        for (k, &t) in self.grid.nodes.iter().enumerate() {
            for (n, c) in self.coeffs.iter().enumerate() {
                writeln!(w, "{t:.16e},{},{:.16e}", n + 1, c[k])?;
            }
        }
        Ok(())
    }

    /// JSON-style metadata block.
    pub fn write_metadata<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{{")?;
        writeln!(w, "  \"tol\": {:e},", self.meta.tol)?;
        writeln!(w, "  \"modes\": {},", self.modes())?;
        writeln!(w, "  \"time_nodes\": {},", self.grid.len())?;
        writeln!(w, "  \"space_intervals\": {},", self.basis.m)?;
        writeln!(w, "  \"windows\": [")?;
        let nw = self.meta.windows.len();
        for (i, r) in self.meta.windows.iter().enumerate() {
            let diffs: Vec<String> = r.diffs.iter().map(|d| format!("{d:e}")).collect();
            let overlap = r.overlap_diff.map_or("null".to_string(), |d| format!("{d:e}"));
            writeln!(
                w,
                "    {{\"t_a\": {:.16e}, \"t_b\": {:.16e}, \"iterations\": {}, \"halvings\": {}, \
                 \"overlap_diff\": {overlap}, \"diffs\": [{}]}}{}",
                r.t_a,
                r.t_b,
                r.iterations,
                r.halvings,
                diffs.join(", "),
                if i + 1 < nw { "," } else { "" }
            )?;
        }
        writeln!(w, "  ]")?;
        writeln!(w, "}}")?;
        Ok(())
    }
}

/// Problem data projected on a spectral basis.
#[derive(Debug, Clone)]
pub struct Model {
    pub problem: Problem,
    pub op: EllipticOperator,
    pub basis: Arc<SpectralBasis>,
    /// `(q_i φ_m, φ_n)`, row-major `N x N`; `None` when `q_i ≡ 0`.
    pub q_mats: Vec<Option<Vec<f64>>>,
    /// `(B φ_m', φ_n)`; `None` when `B ≡ 0`.
    pub drift_mat: Option<Vec<f64>>,
    /// `(a, φ_n)`.
    pub a_coeffs: Vec<f64>,
    /// `(q_i a, φ_n)`.
    pub qa: Vec<Vec<f64>>,
}

impl Model {
    /// Discretise with `m` intervals and keep `n_modes` eigenpairs.
    pub fn new(problem: Problem, m: usize, n_modes: usize) -> Result<Self> {
        problem.validate()?;
        let a = problem.a_coef.clone();
        let b = problem.b_coef.clone();
        let op = discretize(problem.length, &|x| a.eval(x), &|x| b.eval(x), m)?;
        let basis = eigendecompose(&op, n_modes)?;
        Self::from_basis(problem, op, Arc::new(basis))
    }

    pub fn from_basis(problem: Problem, op: EllipticOperator, basis: Arc<SpectralBasis>) -> Result<Self> {
        problem.validate()?;
        let n = basis.len();
        let xs = basis.nodes();
        let galerkin = |weight: &Field, derivative: bool| -> Vec<f64> {
            let cols: Vec<Field> = basis
                .modes
                .iter()
                .map(|phi| {
                    let g = if derivative { gradient_field(phi, basis.weight) } else { phi.clone() };
                    g.iter().zip(weight).map(|(a, b)| a * b).collect()
                })
                .collect();
            let mut mat = vec![0.0; n * n];
            for (row, phi_n) in basis.modes.iter().enumerate() {
                for (col, c) in cols.iter().enumerate() {
                    mat[row * n + col] = basis.inner(c, phi_n);
                }
            }
            mat
        };
        let q_mats: Vec<Option<Vec<f64>>> = problem
            .q
            .iter()
            .map(|q| {
                if q.is_zero() {
                    None
                } else {
                    let w: Field = xs.iter().map(|&x| q.eval(x)).collect();
                    Some(galerkin(&w, false))
                }
            })
            .collect();
        let drift_mat = if problem.drift.is_zero() {
            None
        } else {
            let w: Field = xs.iter().map(|&x| problem.drift.eval(x)).collect();
            Some(galerkin(&w, true))
        };
        let a_coeffs = match &problem.initial {
            InitialData::Function(f) => basis.project(&basis.sample(|x| f(x))),
            InitialData::Modes(c) => {
                let mut v = c.clone();
                v.resize(n, 0.0);
                v
            }
        };
        let qa = q_mats
            .iter()
            .map(|m| match m {
                Some(m) => matvec(m, &a_coeffs),
                None => vec![0.0; n],
            })
            .collect();
        Ok(Model { problem, op, basis, q_mats, drift_mat, a_coeffs, qa })
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    fn coupled(&self) -> bool {
        self.drift_mat.is_some() || self.q_mats.iter().any(|m| m.is_some())
    }

    /// Projected forcing `F_n(t)`.
    pub fn forcing_coeffs(&self, t: f64) -> Option<Vec<f64>> {
        self.problem
            .forcing
            .as_ref()
            .map(|f| self.basis.project(&self.basis.sample(|x| f(x, t))))
    }
}

fn matvec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|r| m[r * n..(r + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `u'` on the grid: centred differences inside, second-order one-sided at the ends.
pub fn gradient_field(u: &[f64], h: f64) -> Field {
    let m = u.len() - 1;
    let mut g = vec![0.0; m + 1];
    for i in 1..m {
        g[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    if m >= 2 {
        g[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
        g[m] = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h);
    }
    g
}

/// Product-integration weights of `∫_0^{t_k} κ(t_k - τ) v(τ) dτ` for
/// piecewise-linear `v`, given the primitives `P1' = κ`, `P2' = P1`
/// (both vanishing at 0). Row `k` holds `k + 1` weights; layout is
/// triangular with row offset `k(k+1)/2`.
pub fn product_weights(t: &[f64], prims: &dyn Fn(f64) -> Result<(f64, f64)>) -> Result<Vec<f64>> {
    let kk = t.len();
    let mut w = vec![0.0; kk * (kk + 1) / 2];
    let mut p1 = vec![0.0; kk];
    let mut p2 = vec![0.0; kk];
    for k in 1..kk {
        for j in 0..k {
            let (a, b) = prims(t[k] - t[j])?;
            p1[j] = a;
            p2[j] = b;
        }
        p1[k] = 0.0;
        p2[k] = 0.0;
        let row = &mut w[k * (k + 1) / 2..k * (k + 1) / 2 + k + 1];
        for j in 0..k {
            let h = t[j + 1] - t[j];
            let d2 = (p2[j] - p2[j + 1]) / h;
            row[j] += p1[j] - d2;
            row[j + 1] += d2 - p1[j + 1];
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature { term: 0, detail: "non-finite product-integration weight".into() });
    }
    Ok(w)
}

fn row(w: &[f64], k: usize) -> &[f64] {
    &w[k * (k + 1) / 2..k * (k + 1) / 2 + k + 1]
}

/// `∫_0^{t_k} (t_k - τ)^μ v(τ) dτ` at every node, `v` piecewise linear.
pub fn convolve_singular(mu: f64, values: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    if !(mu > -1.0) {
        return Err(Error::Domain(format!("kernel exponent must exceed -1, got {mu}")));
    }
    if values.len() != grid.len() {
        return Err(Error::InvalidParameter("values and grid differ in length".into()));
    }
    let c1 = 1.0 / (mu + 1.0);
    let c2 = c1 / (mu + 2.0);
    let w = product_weights(&grid.nodes, &|r| Ok((c1 * r.powf(mu + 1.0), c2 * r.powf(mu + 2.0))))?;
    Ok((0..grid.len())
        .map(|k| row(&w, k).iter().zip(values).map(|(a, b)| a * b).sum())
        .collect())
}

/// Kernel family `s^{β-1} E_{α,β}(-λ s^α)` with its two primitives.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    pub alpha: f64,
    pub beta: f64,
    ml0: MittagLeffler,
    ml1: MittagLeffler,
    ml2: MittagLeffler,
}

impl KernelFamily {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Ok(KernelFamily {
            alpha,
            beta,
            ml0: MittagLeffler::new(MLParams::new(alpha, beta)?),
            ml1: MittagLeffler::new(MLParams::new(alpha, beta + 1.0)?),
            ml2: MittagLeffler::new(MLParams::new(alpha, beta + 2.0)?),
        })
    }

    pub fn kernel(&self, lambda: f64, s: f64) -> Result<f64> {
        Ok(s.powf(self.beta - 1.0) * self.ml0.eval_real(-lambda * s.powf(self.alpha))?)
    }

    /// `(P1(s), P2(s))`.
    pub fn primitives(&self, lambda: f64, s: f64) -> Result<(f64, f64)> {
        if s == 0.0 {
            return Ok((0.0, 0.0));
        }
        let z = -lambda * s.powf(self.alpha);
        let sb = s.powf(self.beta);
        Ok((sb * self.ml1.eval_real(z)?, sb * s * self.ml2.eval_real(z)?))
    }

    pub fn weights(&self, lambda: f64, t: &[f64]) -> Result<Vec<f64>> {
        product_weights(t, &|r| self.primitives(lambda, r))
    }
}

/// Everything that depends only on the model and the time grid.
#[derive(Debug, Clone)]
pub struct KernelTables {
    /// `E_{α₁,1}(-λ_n t_k^{α₁})`, `[n][k]`.
    pub relax: Vec<Vec<f64>>,
    /// Weights of `K_n`, per mode (only when drift is present).
    pub k_weights: Option<Vec<Vec<f64>>>,
    /// Weights of `W_{n,i}`, `[i][n]` (empty for `q_i ≡ 0`).
    pub w_weights: Vec<Vec<Vec<f64>>>,
    /// `Σ_i G_{n,i}(t_k)(q_i a)_n + ∫K_n F_n`, `[n][k]`.
    pub source: Vec<Vec<f64>>,
    /// `I4` alone, `[n][k]`.
    pub i4: Vec<Vec<f64>>,
    /// Forcing part of `I1`, `[n][k]`.
    pub i1_forcing: Vec<Vec<f64>>,
}

impl KernelTables {
    pub fn build(model: &Model, grid: &TimeGrid) -> Result<Self> {
        let p = &model.problem;
        let a1 = p.alpha1();
        let t = &grid.nodes;
        let kk = t.len();
        let lambdas = &model.basis.lambdas;
        let relax_ml = MittagLeffler::new(MLParams::new(a1, 1.0)?);
        let relax: Vec<Vec<f64>> = lambdas
            .par_iter()
            .map(|&lam| t.iter().map(|&tk| relax_ml.eval_real(-lam * tk.powf(a1))).collect())
            .collect::<Result<_>>()?;

        let forcing: Option<Vec<Vec<f64>>> = if p.forcing.is_some() {
            // [k][n] -> [n][k]
            let by_node: Vec<Vec<f64>> = t.iter().map(|&tk| model.forcing_coeffs(tk).unwrap()).collect();
            Some((0..lambdas.len()).map(|n| by_node.iter().map(|v| v[n]).collect()).collect())
        } else {
            None
        };
        let need_k = model.drift_mat.is_some() || forcing.is_some();
        let k_family = KernelFamily::new(a1, a1)?;
        let k_weights: Option<Vec<Vec<f64>>> = if need_k {
            Some(lambdas.par_iter().map(|&lam| k_family.weights(lam, t)).collect::<Result<_>>()?)
        } else {
            None
        };
        let i1_forcing: Vec<Vec<f64>> = match (&forcing, &k_weights) {
            (Some(f), Some(kw)) => f
                .iter()
                .zip(kw)
                .map(|(fn_, w)| (0..kk).map(|k| row(w, k).iter().zip(fn_).map(|(a, b)| a * b).sum()).collect())
                .collect(),
            _ => vec![vec![0.0; kk]; lambdas.len()],
        };

        let mut w_weights = Vec::new();
        let mut i4 = vec![vec![0.0; kk]; lambdas.len()];
        for (i, qm) in model.q_mats.iter().enumerate() {
            let ai = p.alphas[i + 1];
            if qm.is_none() {
                w_weights.push(Vec::new());
                continue;
            }
            let fam = KernelFamily::new(a1, a1 - ai)?;
            let ws: Vec<Vec<f64>> = lambdas.par_iter().map(|&lam| fam.weights(lam, t)).collect::<Result<_>>()?;
            for (n, &lam) in lambdas.iter().enumerate() {
                let qa = model.qa[i][n];
                if qa != 0.0 {
                    for k in 0..kk {
                        i4[n][k] += fam.primitives(lam, t[k])?.0 * qa;
                    }
                }
            }
            w_weights.push(ws);
        }
        let source = i4
            .iter()
            .zip(&i1_forcing)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(KernelTables { relax, k_weights, w_weights, source, i4, i1_forcing })
    }
}

/// Coupled right-hand-side vectors at one time node: `(D c)` and `(Q_i c)`.
struct Coupled {
    drift: Option<Vec<f64>>,
    q: Vec<Option<Vec<f64>>>,
}

fn couple(model: &Model, c: &[f64]) -> Coupled {
    Coupled {
        drift: model.drift_mat.as_ref().map(|m| matvec(m, c)),
        q: model.q_mats.iter().map(|m| m.as_ref().map(|m| matvec(m, c))).collect(),
    }
}

/// Memory integrals at node `k` for mode `n`, over the nodes `js`.
fn memory(
    tables: &KernelTables,
    coupled: &[Coupled],
    offset: usize,
    n: usize,
    k: usize,
    js: std::ops::RangeInclusive<usize>,
) -> (f64, f64) {
    let mut i1 = 0.0;
    let mut i23 = 0.0;
    if let Some(kw) = &tables.k_weights {
        let r = row(&kw[n], k);
        for j in js.clone() {
            if let Some(d) = &coupled[j - offset].drift {
                i1 += r[j] * d[n];
            }
        }
    }
    for (i, ws) in tables.w_weights.iter().enumerate() {
        if ws.is_empty() {
            continue;
        }
        let r = row(&ws[n], k);
        for j in js.clone() {
            if let Some(q) = &coupled[j - offset].q[i] {
                i23 -= r[j] * q[n];
            }
        }
    }
    (i1, i23)
}

/// Term-by-term evaluation of `𝒦u`, each `[n][k]`.
#[derive(Debug, Clone)]
pub struct KTerms {
    pub i1: Vec<Vec<f64>>,
    /// `I2 + I3`, the combined memory term of the lower-order derivatives.
    pub i23: Vec<Vec<f64>>,
    pub i4: Vec<Vec<f64>>,
    pub i5: Vec<Vec<f64>>,
}

impl KTerms {
    pub fn total(&self) -> Vec<Vec<f64>> {
        (0..self.i1.len())
            .map(|n| {
                (0..self.i1[n].len())
                    .map(|k| self.i1[n][k] + self.i23[n][k] + self.i4[n][k] + self.i5[n][k])
                    .collect()
            })
            .collect()
    }
}

/// `𝒦u` on the whole grid, term by term.
pub fn apply_k_terms(model: &Model, tables: &KernelTables, u: &MildSolution) -> Result<KTerms> {
    let kk = u.grid.len();
    let nm = model.modes();
    let coupled: Vec<Coupled> = (0..kk).map(|k| couple(model, &u.at(k))).collect();
    let mut terms = KTerms {
        i1: tables.i1_forcing.clone(),
        i23: vec![vec![0.0; kk]; nm],
        i4: tables.i4.clone(),
        i5: vec![vec![0.0; kk]; nm],
    };
    for n in 0..nm {
        for k in 0..kk {
            terms.i5[n][k] = tables.relax[n][k] * model.a_coeffs[n];
            if k > 0 {
                let (i1, i23) = memory(tables, &coupled, 0, n, k, 0..=k);
                terms.i1[n][k] += i1;
                terms.i23[n][k] = i23;
            }
        }
    }
    for (name, term) in [("I1", &terms.i1), ("I2+I3", &terms.i23), ("I4", &terms.i4)] {
        if term.iter().flatten().any(|v| !v.is_finite()) {
            let idx = match name {
                "I1" => 1,
                "I2+I3" => 2,
                _ => 4,
            };
            return Err(Error::Quadrature { term: idx, detail: format!("{name} is not finite") });
        }
    }
    Ok(terms)
}

/// `𝒦u`.
pub fn apply_k(model: &Model, tables: &KernelTables, u: &MildSolution) -> Result<MildSolution> {
    let terms = apply_k_terms(model, tables, u)?;
    Ok(MildSolution { basis: u.basis.clone(), grid: u.grid.clone(), coeffs: terms.total(), meta: u.meta.clone() })
}

/// `S(t)a` on the whole grid.
pub fn relaxation_solution(model: &Model, tables: &KernelTables, grid: &TimeGrid) -> MildSolution {
    let coeffs = tables
        .relax
        .iter()
        .zip(&model.a_coeffs)
        .map(|(r, a)| r.iter().map(|e| e * a).collect())
        .collect();
    MildSolution { basis: model.basis.clone(), grid: grid.clone(), coeffs, meta: SolveMetadata::default() }
}

/// Fixed point of the restart operator on nodes `start+1..=end` with the
/// values at nodes `0..=start` frozen. `state` is node-major `[k][n]` and is
/// updated in place on the window only.
pub fn solve_window(
    model: &Model,
    tables: &KernelTables,
    grid: &TimeGrid,
    state: &mut [Vec<f64>],
    start: usize,
    end: usize,
    opts: &SolverOptions,
) -> Result<WindowReport> {
    let nm = model.modes();
    let t = &grid.nodes;
    let (t_a, t_b) = (t[start], t[end]);
    // base terms and frozen history
    let hist_coupled: Vec<Coupled> = (0..=start).map(|k| couple(model, &state[k])).collect();
    let mut base = vec![vec![0.0; nm]; end - start];
    for (w, k) in (start + 1..=end).enumerate() {
        for n in 0..nm {
            let mut v = tables.relax[n][k] * model.a_coeffs[n] + tables.source[n][k];
            if model.coupled() {
                let (i1, i23) = memory(tables, &hist_coupled, 0, n, k, 0..=start);
                v += i1 + i23;
            }
            base[w][n] = v;
        }
    }
    // initial guess S(t)a
    let mut current: Vec<Vec<f64>> = (start + 1..=end)
        .map(|k| (0..nm).map(|n| tables.relax[n][k] * model.a_coeffs[n]).collect())
        .collect();
    let mut diffs = Vec::new();
    let mut streak = 0;
    for it in 1..=opts.max_iter {
        let next: Vec<Vec<f64>> = if model.coupled() {
            let coupled: Vec<Coupled> = current.iter().map(|c| couple(model, c)).collect();
            (start + 1..=end)
                .map(|k| {
                    let w = k - start - 1;
                    (0..nm)
                        .map(|n| {
                            let (i1, i23) = memory(tables, &coupled, start + 1, n, k, start + 1..=k);
                            base[w][n] + i1 + i23
                        })
                        .collect()
                })
                .collect()
        } else {
            base.clone()
        };
        let diff = next
            .iter()
            .zip(&current)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(Error::NonContraction { t_a, t_b, streak: opts.streak });
        }
        if let Some(&prev) = diffs.last() {
            if diff >= prev {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        diffs.push(diff);
        current = next;
        if diff <= opts.tol {
            for (w, k) in (start + 1..=end).enumerate() {
                state[k] = current[w].clone();
            }
            return Ok(WindowReport {
                start,
                end,
                t_a,
                t_b,
                iterations: it,
                diffs,
                overlap_diff: None,
                halvings: 0,
            });
        }
        if streak >= opts.streak {
            return Err(Error::NonContraction { t_a, t_b, streak });
        }
    }
    Err(Error::IterationCap { t_a, t_b, iterations: opts.max_iter, last_diff: *diffs.last().unwrap() })
}

/// Chained overlapping windows over the whole grid. Each window after the
/// first restarts at the midpoint of its predecessor; a window that fails to
/// contract is halved, at most `max_halvings` times.
pub fn solve(model: &Model, grid: &TimeGrid, window_count: usize, opts: &SolverOptions) -> Result<MildSolution> {
    let tables = KernelTables::build(model, grid)?;
    solve_with_tables(model, &tables, grid, window_count, opts)
}

pub fn solve_with_tables(
    model: &Model,
    tables: &KernelTables,
    grid: &TimeGrid,
    window_count: usize,
    opts: &SolverOptions,
) -> Result<MildSolution> {
    let kk = grid.len() - 1;
    let nm = model.modes();
    let window_count = window_count.clamp(1, kk);
    let core = kk.div_ceil(window_count);
    let mut state: Vec<Vec<f64>> = vec![vec![0.0; nm]; kk + 1];
    state[0] = model.a_coeffs.clone();
    let mut reports: Vec<WindowReport> = Vec::new();
    let mut start = 0;
    let mut end = core.min(kk);
    let mut prev_end = 0;
    loop {
        let mut halvings = 0;
        let mut try_end = end;
        let report = loop {
            let before: Vec<Vec<f64>> = state[start + 1..=prev_end.max(start)].to_vec();
            match solve_window(model, tables, grid, &mut state, start, try_end, opts) {
                Ok(mut r) => {
                    r.halvings = halvings;
                    // nodes shared with the previous window
                    let shared = prev_end.min(try_end);
                    if shared > start {
                        let d = (start + 1..=shared)
                            .flat_map(|k| {
                                let b = &before[k - start - 1];
                                state[k].iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()
                            })
                            .fold(0.0, f64::max);
                        r.overlap_diff = Some(d);
                    }
                    break r;
                }
                Err(e @ (Error::NonContraction { .. } | Error::IterationCap { .. })) => {
                    if halvings >= opts.max_halvings || try_end - start <= 1 {
                        return Err(e);
                    }
                    halvings += 1;
                    try_end = start + (try_end - start).div_ceil(2);
                }
                Err(e) => return Err(e),
            }
        };
        let (s, e) = (report.start, report.end);
        reports.push(report);
        if e >= kk {
            break;
        }
        prev_end = e;
        start = if e - s >= 2 { s + (e - s) / 2 } else { e };
        end = (e + core).min(kk);
    }
    let coeffs = (0..nm).map(|n| state.iter().map(|c| c[n]).collect()).collect();
    Ok(MildSolution {
        basis: model.basis.clone(),
        grid: grid.clone(),
        coeffs,
        meta: SolveMetadata { tol: opts.tol, windows: reports },
    })
}

/// `J_i = ∫_0^1 (1-η)^{α₁-2}(η^{-α_i} - 1) dη` in closed form.
pub fn j_weight(alpha1: f64, alpha_i: f64) -> Result<f64> {
    if !(0.0 < alpha_i && alpha_i < alpha1 && alpha1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "J weight needs 0 < alpha_i < alpha1 < 1, got ({alpha1}, {alpha_i})"
        )));
    }
    // analytic continuation of B(1-α_i, α₁-1) - B(1, α₁-1)
    Ok(gamma_fn(1.0 - alpha_i)? * gamma_fn(alpha1 - 1.0)? * rgamma(alpha1 - alpha_i) + 1.0 / (1.0 - alpha1))
}

/// `∫_0^1 (1-ξ)^{α₁-2}(ξ^{-α_i} - 1) f(ξ) dξ` for smooth `f`. The interval is
/// split at 1/2 so that each half carries a single Jacobi-type weight:
/// `ξ^{-α_i}` on the left, `(1-ξ)^{α₁-1}` on the right.
fn unit_weight_integral(alpha1: f64, alpha_i: f64, nodes: usize, f: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let half = nodes.div_ceil(2);
    let left_sing = gauss_jacobi_unit(half, 0.0, -alpha_i)?;
    let left_smooth = gauss_legendre(half)?;
    let right = gauss_jacobi_unit(half, 0.0, alpha1 - 1.0)?;
    let mut acc = 0.0;
    // ξ = y/2
    let c = 0.5f64.powf(1.0 - alpha_i);
    for (&y, &w) in left_sing.nodes.iter().zip(&left_sing.weights) {
        let x = 0.5 * y;
        acc += c * w * (1.0 - x).powf(alpha1 - 2.0) * f(x)?;
    }
    for (&y, &w) in left_smooth.nodes.iter().zip(&left_smooth.weights) {
        let x = 0.25 * (y + 1.0);
        acc -= 0.25 * w * (1.0 - x).powf(alpha1 - 2.0) * f(x)?;
    }
    // ξ = 1 - y/2
    let c = 0.5f64.powf(alpha1);
    for (&y, &w) in right.nodes.iter().zip(&right.weights) {
        let x = 1.0 - 0.5 * y;
        let psi = (x.powf(-alpha_i) - 1.0) / (0.5 * y);
        acc += c * w * psi * f(x)?;
    }
    Ok(acc)
}

/// The same weight by Gauss–Jacobi quadrature.
pub fn j_weight_quadrature(alpha1: f64, alpha_i: f64, nodes: usize) -> Result<f64> {
    unit_weight_integral(alpha1, alpha_i, nodes, &|_| Ok(1.0))
}

/// `g_{n,i}(s) = ∫_0^s k''_n(s-η)(η^{-α_i} - s^{-α_i}) dη` by the unit-interval
/// substitution `η = sξ` and Jacobi-type rules absorbing both endpoint singularities.
pub fn g_kernel(alpha1: f64, alpha_i: f64, lambda: f64, s: f64, nodes: usize) -> Result<f64> {
    let ml = MittagLeffler::new(MLParams::new(alpha1, alpha1 - 1.0)?);
    let acc = unit_weight_integral(alpha1, alpha_i, nodes, &|x| {
        ml.eval_real(-lambda * (s * (1.0 - x)).powf(alpha1))
    })?;
    // k''_n is minus the derivative of K_n
    Ok(-s.powf(alpha1 - alpha_i - 1.0) * acc)
}

/// `I2` of the term breakdown by panel quadrature: the kernel
/// `s^{α₁-α_i-1}E_{α₁,α₁}(-λs^{α₁})/Γ(1-α_i)` is integrated with a Jacobi rule
/// on the panel touching `s = 0` and Gauss–Legendre elsewhere. `I3` then
/// follows as the combined memory term minus `I2`.
pub fn split_memory_term(
    model: &Model,
    tables: &KernelTables,
    u: &MildSolution,
    nodes: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let p = &model.problem;
    let a1 = p.alpha1();
    let t = &u.grid.nodes;
    let kk = t.len();
    let nm = model.modes();
    let terms = apply_k_terms(model, tables, u)?;
    let ml = MittagLeffler::new(MLParams::new(a1, a1)?);
    let gl = gauss_legendre(nodes)?;
    let mut i2 = vec![vec![0.0; kk]; nm];
    let by_node: Vec<Vec<f64>> = (0..kk).map(|k| u.at(k)).collect();
    for (i, qm) in model.q_mats.iter().enumerate() {
        let Some(qm) = qm else { continue };
        let ai = p.alphas[i + 1];
        let jac = gauss_jacobi_unit(nodes, 0.0, a1 - ai - 1.0)?;
        let scale = rgamma(1.0 - ai);
        let qc: Vec<Vec<f64>> = by_node.iter().map(|c| matvec(qm, c)).collect();
        for n in 0..nm {
            let lam = model.basis.lambdas[n];
            let kern = |s: f64| -> Result<f64> { ml.eval_real(-lam * s.powf(a1)) };
            for k in 1..kk {
                let mut acc = 0.0;
                for j in 0..k {
                    let (ta, tb) = (t[j], t[j + 1]);
                    let h = tb - ta;
                    let lin = |tau: f64| qc[j][n] + (qc[j + 1][n] - qc[j][n]) * (tau - ta) / h;
                    if j + 1 == k {
                        // s = t_k - τ ∈ [0, h], weight s^{α₁-α_i-1}
                        let f = h.powf(a1 - ai);
                        for (&x, &w) in jac.nodes.iter().zip(&jac.weights) {
                            let s = h * x;
                            acc += f * w * kern(s)? * lin(t[k] - s);
                        }
                    } else {
                        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                            let tau = ta + 0.5 * h * (x + 1.0);
                            let s = t[k] - tau;
                            acc += 0.5 * h * w * s.powf(a1 - ai - 1.0) * kern(s)? * lin(tau);
                        }
                    }
                }
                i2[n][k] -= scale * acc;
            }
        }
    }
    let i3 = terms
        .i23
        .iter()
        .zip(&i2)
        .map(|(c, a)| c.iter().zip(a).map(|(x, y)| x - y).collect())
        .collect();
    Ok((i2, i3))
}

/// Physical-space solution of the L1 scheme: `u[k]` at all spatial nodes.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Vec<Field>,
}

impl GridSolution {
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &x) in self.t.iter().enumerate() {
            if (x - t).abs() < (self.t[best] - t).abs() {
                best = k;
            }
        }
        best
    }
}

/// Implicit L1 scheme on a uniform mesh with `m` intervals and `k` steps.
pub fn l1_fd_solve(p: &Problem, m: usize, k: usize) -> Result<GridSolution> {
    p.validate()?;
    if k < 1 {
        return Err(Error::InvalidParameter("need at least one time step".into()));
    }
    let a = p.a_coef.clone();
    let b = p.b_coef.clone();
    let op = discretize(p.length, &|x| a.eval(x), &|x| b.eval(x), m)?;
    let x = op.nodes();
    let h = op.h;
    let tau = p.horizon / k as f64;
    let t: Vec<f64> = (0..=k).map(|j| j as f64 * tau).collect();
    let terms = p.terms();
    // per-term coefficient field: 1 for the leading derivative, q_i otherwise
    let coef: Vec<Field> = (0..terms)
        .map(|i| if i == 0 { vec![1.0; m + 1] } else { x.iter().map(|&xi| p.q[i - 1].eval(xi)).collect() })
        .collect();
    let sigma: Vec<f64> = p.alphas.iter().map(|&al| tau.powf(-al) * rgamma(2.0 - al)).collect();
    let bw: Vec<Vec<f64>> = p
        .alphas
        .iter()
        .map(|&al| (0..=k).map(|j| ((j + 1) as f64).powf(1.0 - al) - (j as f64).powf(1.0 - al)).collect())
        .collect();
    let u0: Field = match &p.initial {
        InitialData::Function(f) => {
            let mut v: Field = x.iter().map(|&xi| f(xi)).collect();
            v[0] = 0.0;
            v[m] = 0.0;
            v
        }
        InitialData::Modes(_) => {
            return Err(Error::InvalidParameter(
                "the L1 oracle needs the initial datum as a function of x".into(),
            ))
        }
    };
    let drift: Field = x.iter().map(|&xi| p.drift.eval(xi)).collect();
    let (d_a, e_a) = op.tridiagonal();
    let mut u = vec![u0];
    // increments δ_j = u^j - u^{j-1}
    let mut incr: Vec<Field> = Vec::with_capacity(k);
    let n = m - 1;
    for step in 1..=k {
        let mut rhs = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for r in 0..n {
            let i = r + 1;
            let mut cdiag = 0.0;
            let mut hist = 0.0;
            for term in 0..terms {
                let c = coef[term][i] * sigma[term];
                if c == 0.0 {
                    continue;
                }
                cdiag += c;
                // Σ_{j=1}^{step-1} b_j δ^{step-j} - u^{step-1}
                let mut s = -u[step - 1][i];
                for j in 1..step {
                    s += bw[term][j] * incr[step - j - 1][i];
                }
                hist += c * s;
            }
            diag[r] = d_a[r] + cdiag;
            if r > 0 {
                lower[r] = e_a[r - 1] - drift[i] / (2.0 * h);
            }
            if r + 1 < n {
                upper[r] = e_a[r] + drift[i] / (2.0 * h);
            }
            let f = p.forcing.as_ref().map_or(0.0, |f| f(x[i], t[step]));
            rhs[r] = f - hist;
        }
        let sol = thomas(&lower, &diag, &upper, &rhs).ok_or(Error::SingularSystem { step })?;
        let mut next = vec![0.0; m + 1];
        next[1..m].copy_from_slice(&sol);
        incr.push(next.iter().zip(&u[step - 1]).map(|(a, b)| a - b).collect());
        u.push(next);
    }
    Ok(GridSolution { x, t, u })
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let scale = diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut piv = diag[0];
    if piv.abs() <= 1e-14 * scale {
        return None;
    }
    c[0] = if n > 1 { upper[0] / piv } else { 0.0 };
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv.abs() <= 1e-14 * scale || !piv.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::beta_fn;
    use std::f64::consts::PI;

    fn two_term(q: Coef, initial: InitialData) -> Problem {
        Problem {
            length: PI,
            alphas: vec![0.8, 0.4],
            q: vec![q],
            drift: Coef::Const(0.0),
            a_coef: Coef::Const(1.0),
            b_coef: Coef::Const(0.0),
            initial,
            forcing: None,
            horizon: 1.0,
        }
    }

    fn parabola() -> InitialData {
        InitialData::Function(Arc::new(|x: f64| x * (PI - x)))
    }

    #[test]
    fn validation_messages() {
        let mut p = two_term(Coef::Const(1.0), parabola());
        p.alphas = vec![0.4, 0.8];
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains("strictly decreasing"), "{e}");
        p.alphas = vec![0.8];
        assert!(p.validate().is_err());
    }

    #[test]
    fn graded_grid() {
        let g = TimeGrid::graded(2.0, 4, 2.0).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.125, 0.5, 1.125, 2.0]);
        assert_eq!(TimeGrid::default_grading(0.5), 4.0);
        assert_eq!(TimeGrid::default_grading(0.8), 2.5);
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.4]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let m = 64;
        let h = PI / m as f64;
        let x: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
        let q: Vec<f64> = x.iter().map(|v| v * (PI - v)).collect();
        let g = gradient_field(&q, h);
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi - (PI - 2.0 * xi)).abs() < 1e-12);
        }
        let s: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let g = gradient_field(&s, h);
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi - xi.cos()).abs() < 2.0 * h * h);
        }
        assert!(gradient_field(&[0.0; 9], 0.1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn convolution_closed_forms() {
        let g = TimeGrid::graded(1.0, 40, 2.0).unwrap();
        let ones = vec![1.0; g.len()];
        let c = convolve_singular(-0.3, &ones, &g).unwrap();
        for (ck, tk) in c.iter().zip(&g.nodes) {
            assert!((ck - tk.powf(0.7) / 0.7).abs() < 1e-14);
        }
        let c = convolve_singular(0.0, &g.nodes, &g).unwrap();
        for (ck, tk) in c.iter().zip(&g.nodes) {
            assert!((ck - tk * tk / 2.0).abs() < 1e-14);
        }
        let g = TimeGrid::graded(1.0, 400, 3.0).unwrap();
        let v: Vec<f64> = g.nodes.iter().map(|t| t.powf(0.3)).collect();
        let c = convolve_singular(-0.4, &v, &g).unwrap();
        let exact = beta_fn(1.3, 0.6).unwrap();
        assert!((c[g.len() - 1] - exact).abs() < 1e-5, "{} vs {exact}", c[g.len() - 1]);
        assert!(convolve_singular(-1.0, &v, &g).is_err());
    }

    #[test]
    fn j_weight_closed_form_vs_quadrature() {
        let closed = j_weight(0.8, 0.4).unwrap();
        assert!((closed - 1.091_890_976_921_804_9).abs() < 1e-13);
        let quad = j_weight_quadrature(0.8, 0.4, 48).unwrap();
        assert!((quad - closed).abs() < 1e-6, "{quad} vs {closed}");
    }

    #[test]
    fn g_kernel_identity() {
        // g/Γ(1-α) = K(s)s^{-α}/Γ(1-α) - W(s)
        let (a1, ai, lam) = (0.8, 0.4, 3.0);
        let kf = KernelFamily::new(a1, a1).unwrap();
        let wf = KernelFamily::new(a1, a1 - ai).unwrap();
        for &s in &[0.05, 0.3, 1.0] {
            let g = g_kernel(a1, ai, lam, s, 48).unwrap();
            let rhs = kf.kernel(lam, s).unwrap() * s.powf(-ai) - gamma_fn(1.0 - ai).unwrap() * wf.kernel(lam, s).unwrap();
            assert!((g - rhs).abs() < 1e-5 * rhs.abs().max(1.0), "s={s}: {g} vs {rhs}");
        }
    }

    #[test]
    fn decoupled_problem_is_relaxation() {
        let p = Problem::single_term(PI, 0.7, parabola(), 1.0);
        let model = Model::new(p, 128, 16).unwrap();
        let grid = TimeGrid::graded(1.0, 32, 3.0).unwrap();
        let sol = solve(&model, &grid, 4, &SolverOptions::default()).unwrap();
        assert!(sol.meta.windows.iter().all(|w| w.iterations == 1));
        let tables = KernelTables::build(&model, &grid).unwrap();
        let s = relaxation_solution(&model, &tables, &grid);
        assert_eq!(sol.max_diff(&s), 0.0);
        // 𝒦u = S(t)a for any u
        let mut junk = s.clone();
        junk.coeffs.iter_mut().flatten().for_each(|c| *c += 1.0);
        assert_eq!(apply_k(&model, &tables, &junk).unwrap().max_diff(&s), 0.0);
    }

    #[test]
    fn picard_contracts_and_fixed_point_holds() {
        let p = two_term(Coef::func(|x| 0.5 + 0.2 * x.sin()), parabola());
        let model = Model::new(p, 128, 12).unwrap();
        let grid = TimeGrid::graded(1.0, 48, 2.5).unwrap();
        let opts = SolverOptions::default();
        let tables = KernelTables::build(&model, &grid).unwrap();
        let sol = solve_with_tables(&model, &tables, &grid, 4, &opts).unwrap();
        for w in &sol.meta.windows {
            assert!(w.ratios().iter().all(|r| *r < 1.0), "{:?}", w.diffs);
            if let Some(d) = w.overlap_diff {
                assert!(d <= 10.0 * opts.tol, "overlap {d}");
            }
        }
        let ku = apply_k(&model, &tables, &sol).unwrap();
        assert!(ku.max_diff(&sol) <= 10.0 * opts.tol);
        for k in 0..grid.len() {
            let u = sol.field_at(k);
            assert!(u[0].abs() < 1e-14 && u[u.len() - 1].abs() < 1e-14);
        }
        for n in 0..sol.modes() {
            assert_eq!(sol.coeffs[n][0], model.a_coeffs[n]);
        }
    }

    #[test]
    fn huge_window_does_not_contract() {
        let mut p = two_term(Coef::Const(-60.0), parabola());
        p.horizon = 4.0;
        let model = Model::new(p, 64, 4).unwrap();
        let grid = TimeGrid::graded(4.0, 24, 2.5).unwrap();
        let tables = KernelTables::build(&model, &grid).unwrap();
        let mut state = vec![model.a_coeffs.clone(); grid.len()];
        let err = solve_window(&model, &tables, &grid, &mut state, 0, 24, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonContraction { .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn splitting_of_memory_term() {
        let p = two_term(Coef::Const(1.0), InitialData::Modes(vec![1.0, 0.5]));
        let model = Model::new(p, 64, 2).unwrap();
        let grid = TimeGrid::graded(0.5, 12, 2.5).unwrap();
        let tables = KernelTables::build(&model, &grid).unwrap();
        let u = relaxation_solution(&model, &tables, &grid);
        let (i2, i3) = split_memory_term(&model, &tables, &u, 24).unwrap();
        let terms = apply_k_terms(&model, &tables, &u).unwrap();
        for n in 0..2 {
            for k in 0..grid.len() {
                assert!((i2[n][k] + i3[n][k] - terms.i23[n][k]).abs() < 1e-14);
            }
            // I2 has the sign of -(q u)_n for a positive kernel
            assert!(i2[n][grid.len() - 1] < 0.0);
        }
    }

    #[test]
    fn l1_zero_data() {
        let p = Problem::single_term(1.0, 0.5, InitialData::Function(Arc::new(|_| 0.0)), 1.0);
        let s = l1_fd_solve(&p, 32, 16).unwrap();
        assert!(s.u.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn l1_manufactured_solution_converges() {
        let al = 0.6;
        let ga = gamma_fn(1.0 + al).unwrap();
        let forcing: Forcing = Arc::new(move |x: f64, t: f64| {
            let s = (PI * x).sin();
            // ∂^α(1+t^α) = Γ(1+α), A sin(πx) = π² sin(πx)
            ga * s + PI * PI * (1.0 + t.powf(al)) * s
        });
        let mut p = Problem::single_term(1.0, al, InitialData::Function(Arc::new(|x: f64| (PI * x).sin())), 1.0);
        p.forcing = Some(forcing);
        let err = |k: usize| {
            let s = l1_fd_solve(&p, 200, k).unwrap();
            let last = s.u.last().unwrap();
            s.x.iter().zip(last).map(|(x, u)| (u - 2.0 * (PI * x).sin()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(20), err(40));
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "order {order} ({e1}, {e2})");
    }
}
