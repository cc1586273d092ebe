//! The log-corrected singular cell at `p = (N+1)/(N-1)`.
//!
//! In Emden–Fowler variables `u = r^{1-N} φ(t, θ)`, `t = -log r`, the equation
//! becomes `(∂_t² + N∂_t + Δ_S + N-1) φ + |φ|^q = 0` with `q = (N+1)/(N-1)`.
//! The cell is sought as `φ = a_N t^{-b_N} φ₁ + f₂(t) φ₁ + ψ₁(t, θ)` with
//! `ψ₁ ⊥ φ₁`, and `(ψ₁, f₂)` is the fixed point of `M = (T₁ N₁, T₂ N₂)`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::angular::{dirichlet_bands, AngularModes};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LineFit};
use crate::interp::{fd_derivatives, Hermite2D};
use crate::params::ExponentParams;
use crate::sphere::{constants, phi1, project_perp, AnsatzConstants, AxisymGrid, SphericalProfile};
use crate::tridiag::Factored;

/// Which form of the `φ₁`-mode equation is solved.
///
/// `Printed` uses `(∂² + N∂ + N(N-1)/(2t)) f₂ = N₂` with source
/// `+(N²-1)/4 a_N t^{-(N+3)/2}` and the explicit inverse `G` for `T₂`.
/// `Consistent` uses the projection of the cylinder equation itself,
/// `(∂² + N∂ + N(N+1)/(2t)) f₂ = N₂` with source `-(N²-1)/4 a_N t^{-(N+3)/2}`,
/// and inverts it by forward marching from `f(t_*) = f'(t_*) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellSystem {
    Printed,
    Consistent,
}

impl CellSystem {
    fn kappa(self, n: f64) -> f64 {
        match self {
            CellSystem::Printed => n * (n - 1.0) / 2.0,
            CellSystem::Consistent => n * (n + 1.0) / 2.0,
        }
    }

    fn source_sign(self) -> f64 {
        match self {
            CellSystem::Printed => 1.0,
            CellSystem::Consistent => -1.0,
        }
    }
}

/// Uniform grid on `[t_*, T] × [0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderGrid {
    pub t_star: f64,
    pub t_end: f64,
    pub dt: f64,
    pub t_nodes: Vec<f64>,
    pub angular: Arc<AxisymGrid>,
}

impl CylinderGrid {
    pub fn new(t_star: f64, t_end: f64, n_t: usize, angular: Arc<AxisymGrid>) -> Result<Self> {
        if !(t_star > 0.0) {
            return Err(Error::InvalidGrid(format!("t_* must be positive, got {t_star}")));
        }
        if t_end < 10.0 * t_star * (1.0 - 1e-12) {
            return Err(Error::InvalidGrid(format!("need T >= 10 t_*, got T = {t_end}, t_* = {t_star}")));
        }
        if n_t < 5 {
            return Err(Error::InvalidGrid("cylinder needs at least 5 t-nodes".into()));
        }
        let dt = (t_end - t_star) / (n_t - 1) as f64;
        let t_nodes = (0..n_t).map(|j| t_star + j as f64 * dt).collect();
        Ok(Self {
            t_star,
            t_end,
            dt,
            t_nodes,
            angular,
        })
    }

    /// Grid with step as close as possible to `dt`.
    pub fn with_step(t_star: f64, t_end: f64, dt: f64, angular: Arc<AxisymGrid>) -> Result<Self> {
        let n_t = ((t_end - t_star) / dt).round() as usize + 1;
        Self::new(t_star, t_end, n_t, angular)
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.angular.len()
    }

    pub fn dim(&self) -> usize {
        self.angular.dim()
    }
}

/// `ψ(t_j, α_i)` stored column-wise: column `j` is the profile at `t_j`.
#[derive(Debug, Clone)]
pub struct CylinderField {
    pub grid: Arc<CylinderGrid>,
    pub values: DMatrix<f64>,
    pub sigma: f64,
}

impl CylinderField {
    pub fn zeros(grid: &Arc<CylinderGrid>, sigma: f64) -> Self {
        Self {
            values: DMatrix::zeros(grid.n_alpha(), grid.n_t()),
            grid: Arc::clone(grid),
            sigma,
        }
    }

    pub fn from_fn(grid: &Arc<CylinderGrid>, sigma: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let a = grid.angular.nodes();
        let t = &grid.t_nodes;
        Self {
            values: DMatrix::from_fn(grid.n_alpha(), grid.n_t(), |i, j| f(t[j], a[i])),
            grid: Arc::clone(grid),
            sigma,
        }
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.values.nrows();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.values.nrows();
        &mut self.values.as_mut_slice()[j * n..(j + 1) * n]
    }

    /// `‖t^σ ψ‖_∞`.
    pub fn weighted_sup(&self) -> f64 {
        (0..self.grid.n_t()).fold(0.0f64, |m, j| {
            let s = self.column(j).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            m.max(self.grid.t_nodes[j].powf(self.sigma) * s)
        })
    }

    /// Max over `t` of `|∫ ψ(t,·) φ₁ dσ|`.
    pub fn max_phi1_component(&self, phi1: &SphericalProfile) -> f64 {
        (0..self.grid.n_t()).fold(0.0f64, |m, j| m.max(self.grid.angular.inner(self.column(j), &phi1.values).abs()))
    }

    fn sub_weighted(&self, other: &Self) -> f64 {
        (0..self.grid.n_t()).fold(0.0f64, |m, j| {
            let s = self
                .column(j)
                .iter()
                .zip(other.column(j))
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            m.max(self.grid.t_nodes[j].powf(self.sigma) * s)
        })
    }
}

/// A function of `t` on the cylinder nodes.
#[derive(Debug, Clone)]
pub struct ScalarTrack {
    pub grid: Arc<CylinderGrid>,
    pub values: Vec<f64>,
    pub sigma: f64,
}

impl ScalarTrack {
    pub fn zeros(grid: &Arc<CylinderGrid>, sigma: f64) -> Self {
        Self {
            values: vec![0.0; grid.n_t()],
            grid: Arc::clone(grid),
            sigma,
        }
    }

    pub fn from_fn(grid: &Arc<CylinderGrid>, sigma: f64, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid.t_nodes.iter().map(|&t| f(t)).collect(),
            grid: Arc::clone(grid),
            sigma,
        }
    }

    /// `‖t^{σ + extra} f‖_∞`.
    pub fn weighted_sup(&self, extra: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.t_nodes)
            .fold(0.0f64, |m, (v, t)| m.max(t.powf(self.sigma + extra) * v.abs()))
    }

    fn sub_weighted(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.grid.t_nodes)
            .fold(0.0f64, |m, ((a, b), t)| m.max(t.powf(self.sigma) * (a - b).abs()))
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            sigma: self.sigma,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.grid.t_nodes)
                .map(|((a, b), t)| f(*a, *b, *t))
                .collect(),
        }
    }
}

/// The angular profile `N a_N b_N φ₁ - a_N^q φ₁^q` of `E(t, ·) = t^{-b_N-1}(…)`.
pub fn error_profile(phi1: &SphericalProfile, consts: &AnsatzConstants) -> SphericalProfile {
    let n = phi1.grid.dim() as f64;
    let q = (n + 1.0) / (n - 1.0);
    let (a, b) = (consts.a, consts.b);
    phi1.map(|v| n * a * b * v - (a * v).abs().powf(q))
}

/// `E(t, α) = N a_N b_N t^{-b_N-1} φ₁ - (a_N t^{-b_N} φ₁)^{(N+1)/(N-1)}`.
pub fn error_e(grid: &Arc<CylinderGrid>, consts: &AnsatzConstants) -> CylinderField {
    let p1 = phi1(&grid.angular);
    let prof = error_profile(&p1, consts);
    let b = consts.b;
    let mut out = CylinderField::zeros(grid, 0.0);
    for j in 0..grid.n_t() {
        let s = grid.t_nodes[j].powf(-b - 1.0);
        for (o, v) in out.column_mut(j).iter_mut().zip(&prof.values) {
            *o = s * v;
        }
    }
    out
}

/// Reusable solver for `(∂_t² + N∂_t + Δ_S + N-1) ψ = h` with zero data at
/// `t_*`, `T` and the equator.
#[derive(Debug, Clone)]
pub struct T1Solver {
    grid: Arc<CylinderGrid>,
    modes: AngularModes,
    factors: Vec<Factored>,
    bands: (Vec<f64>, Vec<f64>, Vec<f64>),
    phi1: SphericalProfile,
}

#[derive(Debug, Clone)]
pub struct T1Output {
    pub psi: CylinderField,
    /// Max defect of the discrete equation before the final re-projection.
    pub raw_residual: f64,
    /// `‖t^σ ψ‖ / ‖t^σ h‖` (zero for `h = 0`).
    pub bound_constant: f64,
}

impl T1Solver {
    pub fn new(grid: &Arc<CylinderGrid>) -> Result<Self> {
        let modes = AngularModes::new(&grid.angular)?;
        let n = grid.dim() as f64;
        let dt = grid.dt;
        let m = grid.n_t() - 2;
        let lo = 1.0 / (dt * dt) - n / (2.0 * dt);
        let up = 1.0 / (dt * dt) + n / (2.0 * dt);
        let factors = modes
            .eigenvalues()
            .iter()
            .map(|&mu| {
                let d = -2.0 / (dt * dt) + mu + n - 1.0;
                Factored::new(&vec![lo; m], &vec![d; m], &vec![up; m])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: Arc::clone(grid),
            bands: dirichlet_bands(&grid.angular),
            modes,
            factors,
            phi1: phi1(&grid.angular),
        })
    }

    pub fn phi1(&self) -> &SphericalProfile {
        &self.phi1
    }

    /// Applies the discrete cylinder operator at interior nodes.
    pub fn apply(&self, psi: &CylinderField) -> DMatrix<f64> {
        let g = &self.grid;
        let (na, nt) = (g.n_alpha(), g.n_t());
        let n = g.dim() as f64;
        let dt = g.dt;
        let (lo, di, up) = &self.bands;
        let v = &psi.values;
        DMatrix::from_fn(na, nt, |i, j| {
            if j == 0 || j == nt - 1 || i == na - 1 {
                return 0.0;
            }
            let tt = (v[(i, j + 1)] - 2.0 * v[(i, j)] + v[(i, j - 1)]) / (dt * dt)
                + n * (v[(i, j + 1)] - v[(i, j - 1)]) / (2.0 * dt);
            let mut lb = di[i] * v[(i, j)];
            if i > 0 {
                lb += lo[i] * v[(i - 1, j)];
            }
            if i + 1 < na - 1 {
                lb += up[i] * v[(i + 1, j)];
            }
            tt + lb + (n - 1.0) * v[(i, j)]
        })
    }

    pub fn solve(&self, h: &CylinderField, sigma: f64) -> Result<T1Output> {
        let g = &self.grid;
        let comp = h.max_phi1_component(&self.phi1);
        if comp > 1e-8 {
            return Err(Error::Precondition(format!(
                "T1 input is not orthogonal to φ₁ (max |<h, φ₁>| = {comp:e})"
            )));
        }
        let nt = g.n_t();
        let coeffs = self.modes.to_modes_batch(&h.values);
        let nm = self.modes.n_modes();
        let mut sol = DMatrix::<f64>::zeros(nm, nt);
        let mut buf = vec![0.0; nt - 2];
        for k in 0..nm {
            for j in 1..nt - 1 {
                buf[j - 1] = coeffs[(k, j)];
            }
            self.factors[k].solve_in_place(&mut buf);
            for j in 1..nt - 1 {
                sol[(k, j)] = buf[j - 1];
            }
        }
        let mut psi = CylinderField {
            grid: Arc::clone(g),
            values: self.modes.from_modes_batch(&sol),
            sigma,
        };
        let applied = self.apply(&psi);
        let mut raw_residual = 0.0f64;
        for j in 1..nt - 1 {
            for i in 0..g.n_alpha() - 1 {
                raw_residual = raw_residual.max((applied[(i, j)] - h.values[(i, j)]).abs());
            }
        }
        for j in 0..nt {
            let col = SphericalProfile::new(Arc::clone(&g.angular), psi.column(j).to_vec())?;
            let pr = project_perp(&col, &self.phi1);
            psi.column_mut(j).copy_from_slice(&pr.values);
        }
        let hn = CylinderField { sigma, ..h.clone() }.weighted_sup();
        let bound_constant = if hn > 0.0 { psi.weighted_sup() / hn } else { 0.0 };
        Ok(T1Output {
            psi,
            raw_residual,
            bound_constant,
        })
    }
}

/// One-shot [`T1Solver::solve`].
pub fn t1_solve(h: &CylinderField, sigma: f64) -> Result<T1Output> {
    T1Solver::new(&h.grid)?.solve(h, sigma)
}

/// `m_k(x) = ∫_0^1 e^{-x(1-s)} s^k ds` for `k = 0..3`.
fn exp_moments(x: f64) -> [f64; 4] {
    let mut m = [0.0; 4];
    if x < 1.0 {
        // Σ_j (-x)^j k! / (j+k+1)!
        for (k, mk) in m.iter_mut().enumerate() {
            let kf: f64 = (1..=k).map(|i| i as f64).product();
            let mut term = kf / (1..=k + 1).map(|i| i as f64).product::<f64>();
            let mut acc = term;
            for j in 1..40 {
                term *= -x / (j + k + 1) as f64;
                acc += term;
                if term.abs() < 1e-18 * acc.abs() {
                    break;
                }
            }
            *mk = acc;
        }
    } else {
        m[0] = -(-x).exp_m1() / x;
        for k in 1..4 {
            m[k] = (1.0 - k as f64 * m[k - 1]) / x;
        }
    }
    m
}

/// `∫_T^∞ I(ζ) dζ` where `I' = g - N I` and `g` continues past `T` as
/// `g(T)(T/s)^β`; linear in the data.
fn tail_integral(n: f64, t_end: f64, g_end: f64, i_end: f64, beta: f64) -> f64 {
    let b = beta.max(1.0 + 1e-6);
    g_end * t_end / (n * (b - 1.0)) + (i_end - g_end / n) / n
}

/// `G(g)(t) = -∫_t^∞ e^{-Nζ} ∫_{t_*}^ζ e^{Ns} g(s) ds dζ`.
///
/// The inner integral is propagated exactly against a cubic Hermite model of
/// `g`; the outer one uses the end-corrected trapezoid rule. Beyond `T`, `g`
/// is continued as `g(T)(T/s)^β` with `β = tail_exponent`.
pub fn g_operator(g: &ScalarTrack, tail_exponent: f64) -> ScalarTrack {
    let grid = &g.grid;
    let n = grid.dim() as f64;
    let dt = grid.dt;
    let nt = grid.n_t();
    let dg = fd_derivatives(&g.values, dt, false);
    let m = exp_moments(n * dt);
    let decay = (-n * dt).exp();
    let mut inner = vec![0.0; nt];
    for j in 0..nt - 1 {
        let (g0, g1) = (g.values[j], g.values[j + 1]);
        let (d0, d1) = (dt * dg[j], dt * dg[j + 1]);
        let c = [g0, d0, 3.0 * (g1 - g0) - 2.0 * d0 - d1, 2.0 * (g0 - g1) + d0 + d1];
        let step: f64 = c.iter().zip(&m).map(|(c, m)| c * m).sum();
        inner[j + 1] = decay * inner[j] + dt * step;
    }
    let slope: Vec<f64> = inner.iter().zip(&g.values).map(|(i, g)| g - n * i).collect();
    let (t_end, g_end, i_end) = (grid.t_end, g.values[nt - 1], inner[nt - 1]);
    let mut acc = tail_integral(n, t_end, g_end, i_end, tail_exponent);
    let mut out = vec![0.0; nt];
    out[nt - 1] = -acc;
    for j in (0..nt - 1).rev() {
        acc += 0.5 * dt * (inner[j] + inner[j + 1]) + dt * dt / 12.0 * (slope[j] - slope[j + 1]);
        out[j] = -acc;
    }
    ScalarTrack {
        grid: Arc::clone(grid),
        values: out,
        sigma: g.sigma,
    }
}

#[derive(Debug, Clone)]
pub struct T2Output {
    pub f: ScalarTrack,
    pub iterations: usize,
    /// `‖t^σ f‖ / ‖t^{1+σ} g‖` (zero for `g = 0`).
    pub bound_constant: f64,
}

/// The bound `(1/(Nσ)) (1 - (σ+1)/(N t_*))^{-1}` on `‖t^σ G(g)‖ / ‖t^{1+σ} g‖`.
pub fn t2_bound(dim: usize, sigma: f64, t_star: f64) -> f64 {
    let n = dim as f64;
    1.0 / (n * sigma) / (1.0 - (sigma + 1.0) / (n * t_star))
}

/// Right inverse of `(∂_t² + N∂_t + κ/t) f = g` for the chosen [`CellSystem`],
/// with the tail of `g` beyond `T` modelled as `t^{-1-σ}`.
pub fn t2_solve(g: &ScalarTrack, sigma: f64, system: CellSystem) -> Result<T2Output> {
    t2_solve_with_tail(g, sigma, system, 1.0 + sigma)
}

/// [`t2_solve`] with an explicit tail exponent for `g`.
pub fn t2_solve_with_tail(g: &ScalarTrack, sigma: f64, system: CellSystem, tail: f64) -> Result<T2Output> {
    let grid = &g.grid;
    let n = grid.dim() as f64;
    let kappa = system.kappa(n);
    let f = match system {
        CellSystem::Printed => {
            if sigma <= (n - 1.0) / 2.0 {
                return Err(Error::Window(format!("T2 needs σ > (N-1)/2 = {}, got {sigma}", (n - 1.0) / 2.0)));
            }
            if n * grid.t_star - 1.0 - sigma <= 0.0 {
                return Err(Error::Precondition(format!(
                    "T2 needs N t_* - 1 - σ > 0, got t_* = {}",
                    grid.t_star
                )));
            }
            let mut f = ScalarTrack::zeros(grid, sigma);
            let mut prev_diff = f64::INFINITY;
            let mut grow = 0;
            let mut iterations = 0;
            loop {
                iterations += 1;
                let rhs = g.combine(&f, |gv, fv, t| gv - kappa * fv / t);
                let next = g_operator(&rhs, tail);
                let diff = next.sub_weighted(&f);
                f = next;
                let scale = f.weighted_sup(0.0).max(1e-300);
                if diff <= 1e-12 * scale.max(1.0) || diff == 0.0 {
                    break;
                }
                if diff >= prev_diff {
                    grow += 1;
                    if grow > 5 {
                        return Err(Error::Contraction(format!(
                            "T2 perturbation iteration diverges at t_* = {} (increase t_*)",
                            grid.t_star
                        )));
                    }
                }
                if iterations > 2000 {
                    return Err(Error::Contraction("T2 perturbation iteration did not converge".into()));
                }
                prev_diff = diff;
            }
            return Ok(finish_t2(g, f, sigma, iterations));
        }
        CellSystem::Consistent => {
            if sigma >= (n + 1.0) / 2.0 {
                return Err(Error::Window(format!(
                    "forward T2 needs σ < (N+1)/2 = {}, got {sigma}",
                    (n + 1.0) / 2.0
                )));
            }
            let dt = grid.dt;
            let t = &grid.t_nodes;
            let nt = grid.n_t();
            let mut v = vec![0.0; nt];
            v[1] = 0.5 * g.values[0] * dt * dt;
            let (cp, cm) = (1.0 + n * dt / 2.0, 1.0 - n * dt / 2.0);
            for j in 1..nt - 1 {
                v[j + 1] = (g.values[j] * dt * dt + 2.0 * v[j] - cm * v[j - 1] - kappa * dt * dt * v[j] / t[j]) / cp;
            }
            ScalarTrack {
                grid: Arc::clone(grid),
                values: v,
                sigma,
            }
        }
    };
    Ok(finish_t2(g, f, sigma, 1))
}

fn finish_t2(g: &ScalarTrack, f: ScalarTrack, sigma: f64, iterations: usize) -> T2Output {
    let gn = ScalarTrack { sigma, ..g.clone() }.weighted_sup(1.0);
    let bound_constant = if gn > 0.0 { f.weighted_sup(0.0) / gn } else { 0.0 };
    T2Output {
        f,
        iterations,
        bound_constant,
    }
}

/// Shared data for evaluating `N₁`, `N₂` on a cylinder grid.
#[derive(Debug, Clone)]
pub struct CellContext {
    pub grid: Arc<CylinderGrid>,
    pub phi1: SphericalProfile,
    pub consts: AnsatzConstants,
    pub q: f64,
    pub system: CellSystem,
    e: CylinderField,
}

impl CellContext {
    pub fn new(grid: &Arc<CylinderGrid>, system: CellSystem) -> Self {
        let n = grid.dim() as f64;
        let consts = constants(&grid.angular);
        Self {
            phi1: phi1(&grid.angular),
            e: error_e(grid, &consts),
            consts,
            q: (n + 1.0) / (n - 1.0),
            system,
            grid: Arc::clone(grid),
        }
    }

    pub fn error(&self) -> &CylinderField {
        &self.e
    }

    fn base(&self, t: f64) -> f64 {
        self.consts.a * t.powf(-self.consts.b)
    }
}

/// `N₁(ψ₁, f₂) = E - Π^⊥(|a t^{-b} φ₁ + ψ₁ + f₂ φ₁|^q - |a t^{-b} φ₁|^q)`.
pub fn nonlinearity_n1(ctx: &CellContext, psi1: &CylinderField, f2: &ScalarTrack) -> CylinderField {
    let g = &ctx.grid;
    let mut out = ctx.e.clone();
    out.sigma = psi1.sigma;
    let p1 = &ctx.phi1.values;
    let mut diff = vec![0.0; g.n_alpha()];
    for j in 0..g.n_t() {
        let base = ctx.base(g.t_nodes[j]);
        let col = psi1.column(j);
        for i in 0..diff.len() {
            let b = base * p1[i];
            diff[i] = (b + col[i] + f2.values[j] * p1[i]).abs().powf(ctx.q) - b.abs().powf(ctx.q);
        }
        if diff.iter().all(|v| *v == 0.0) {
            continue;
        }
        let c = g.angular.inner(&diff, p1);
        for (o, (d, p)) in out.column_mut(j).iter_mut().zip(diff.iter().zip(p1)) {
            *o -= d - c * p;
        }
    }
    out
}

/// `N₂(ψ₁, f₂) = ±(N²-1)/4 a t^{-(N+3)/2} - ∫(|…|^q - |a t^{-b} φ₁|^q - q a^{q-1} φ₁^q f₂ / t) φ₁ dσ`.
pub fn nonlinearity_n2(ctx: &CellContext, psi1: &CylinderField, f2: &ScalarTrack) -> ScalarTrack {
    let g = &ctx.grid;
    let n = g.dim() as f64;
    let a = ctx.consts.a;
    let q = ctx.q;
    let p1 = &ctx.phi1.values;
    let lin = q * a.powf(q - 1.0);
    let mut integrand = vec![0.0; g.n_alpha()];
    let values = g
        .t_nodes
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let base = ctx.base(t);
            let col = psi1.column(j);
            let f = f2.values[j];
            for i in 0..integrand.len() {
                let b = base * p1[i];
                let d = (b + col[i] + f * p1[i]).abs().powf(q) - b.abs().powf(q) - lin * p1[i].abs().powf(q) * f / t;
                integrand[i] = d * p1[i];
            }
            ctx.system.source_sign() * (n * n - 1.0) / 4.0 * a * t.powf(-(n + 3.0) / 2.0)
                - g.angular.integrate(&integrand)
        })
        .collect();
    ScalarTrack {
        grid: Arc::clone(g),
        values,
        sigma: f2.sigma,
    }
}

/// Settings for [`fixed_point_solve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalConfig {
    pub dim: usize,
    pub sigma: f64,
    pub mu: f64,
    /// `None` selects `t_*` by doubling from 4 until the Lipschitz ratio is below 0.5.
    pub t_star: Option<f64>,
    /// Initial truncation `T = t_end_factor · t_*`.
    pub t_end_factor: f64,
    pub dt: f64,
    pub n_alpha: usize,
    pub system: CellSystem,
    pub tol: f64,
    pub max_iter: usize,
    /// Accept `T` once doubling it changes the probes by less than this.
    pub probe_tol: f64,
    pub max_t_doublings: usize,
}

impl CriticalConfig {
    pub fn new(dim: usize, sigma: f64) -> Self {
        Self {
            dim,
            sigma,
            mu: 0.5,
            t_star: None,
            t_end_factor: 10.0,
            dt: 0.05,
            n_alpha: 65,
            system: CellSystem::Printed,
            tol: 1e-10,
            max_iter: 300,
            probe_tol: 1e-6,
            max_t_doublings: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖x_{k+1} - x_k‖_μ`.
    pub distance: f64,
    /// `distance_k / distance_{k-1}`.
    pub ratio: f64,
    /// `‖x_{k+1}‖_μ`.
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub fit: LineFit,
    pub expected: f64,
    pub t_min: f64,
    pub t_max: f64,
}

/// A converged critical cell.
#[derive(Debug, Clone)]
pub struct CriticalCell {
    pub params: ExponentParams,
    pub config: CriticalConfig,
    pub consts: AnsatzConstants,
    pub grid: Arc<CylinderGrid>,
    pub psi1: CylinderField,
    pub f2: ScalarTrack,
    pub phi: CylinderField,
    pub contraction_log: Vec<IterationRecord>,
    /// Largest successive-distance ratio after the first two iterations.
    pub lipschitz: f64,
    /// `‖(ψ₁, f₂) - M(ψ₁, f₂)‖_μ` at the returned iterate.
    pub fixed_point_residual: f64,
    /// `‖(ψ₁, f₂)‖_μ`.
    pub ball_norm: f64,
    /// Max over `t` of `|∫ ψ₁(t,·) φ₁|`.
    pub orthogonality: f64,
    /// Sup of the discrete cylinder-equation defect of `φ` at interior nodes.
    pub eq33_residual: f64,
    /// The same defect weighted by `t^{(N+3)/2}`.
    pub eq33_weighted: f64,
    /// `t_*` values tried by the automatic search, with their ratios.
    pub t_star_search: Vec<(f64, f64)>,
    /// Truncations tried, with the probe change after each doubling.
    pub t_end_history: Vec<(f64, f64)>,
    /// Whether the last doubling of `T` moved the probes by less than `probe_tol`
    /// (always true when no doubling was requested).
    pub t_end_stable: bool,
    interp: Hermite2D,
    phi1_norm: f64,
}

struct PicardRun {
    psi1: CylinderField,
    f2: ScalarTrack,
    log: Vec<IterationRecord>,
    lipschitz: f64,
    residual: f64,
}

fn mu_norm(psi: &CylinderField, f: &ScalarTrack, mu: f64) -> f64 {
    psi.weighted_sup() + mu * f.weighted_sup(0.0)
}

/// One application of `M(ψ₁, f₂) = (T₁(N₁), T₂(N₂))`.
pub fn apply_map(
    ctx: &CellContext,
    t1: &T1Solver,
    psi1: &CylinderField,
    f2: &ScalarTrack,
) -> Result<(CylinderField, ScalarTrack)> {
    let sigma = psi1.sigma;
    let n1 = nonlinearity_n1(ctx, psi1, f2);
    let n2 = nonlinearity_n2(ctx, psi1, f2);
    let psi = t1.solve(&n1, sigma)?.psi;
    let n = ctx.grid.dim() as f64;
    let f = t2_solve_with_tail(&n2, sigma, ctx.system, (n + 3.0) / 2.0)?.f;
    Ok((psi, f))
}

fn picard(ctx: &CellContext, cfg: &CriticalConfig) -> Result<PicardRun> {
    let grid = &ctx.grid;
    let t1 = T1Solver::new(grid)?;
    let mut psi1 = CylinderField::zeros(grid, cfg.sigma);
    let mut f2 = ScalarTrack::zeros(grid, cfg.sigma);
    let mut log = Vec::new();
    let mut prev = f64::NAN;
    let mut lipschitz = 0.0f64;
    for k in 0..cfg.max_iter {
        let (np, nf) = apply_map(ctx, &t1, &psi1, &f2)?;
        let distance = np.sub_weighted(&psi1) + cfg.mu * nf.sub_weighted(&f2);
        let ratio = distance / prev;
        psi1 = np;
        f2 = nf;
        log.push(IterationRecord {
            iteration: k + 1,
            distance,
            ratio,
            norm: mu_norm(&psi1, &f2, cfg.mu),
        });
        if k >= 2 && ratio.is_finite() && distance > 1e3 * f64::EPSILON {
            lipschitz = lipschitz.max(ratio);
        }
        if distance <= cfg.tol {
            let (cp, cf) = apply_map(ctx, &t1, &psi1, &f2)?;
            let residual = cp.sub_weighted(&psi1) + cfg.mu * cf.sub_weighted(&f2);
            return Ok(PicardRun {
                psi1,
                f2,
                log,
                lipschitz,
                residual,
            });
        }
        if k >= 4 && lipschitz >= 1.0 && distance > prev {
            return Err(Error::Contraction(format!(
                "Lipschitz ratio {lipschitz:.3} >= 1 at t_* = {} (increase t_*)",
                grid.t_star
            )));
        }
        prev = distance;
    }
    Err(Error::Contraction(format!(
        "no convergence in {} iterations at t_* = {}",
        cfg.max_iter, grid.t_star
    )))
}

fn probe_values(psi1: &CylinderField, f2: &ScalarTrack, ctx: &CellContext) -> Vec<f64> {
    let g = &ctx.grid;
    let t_star = g.t_star;
    let mut out = Vec::new();
    for &tp in &[1.5 * t_star, 2.0 * t_star, 3.0 * t_star] {
        let j = ((tp - t_star) / g.dt).round() as usize;
        for i in (0..g.n_alpha()).step_by((g.n_alpha() / 4).max(1)) {
            out.push(psi1.values[(i, j)] + f2.values[j] * ctx.phi1.values[i]);
        }
    }
    out
}

fn run_at(cfg: &CriticalConfig, t_star: f64, angular: &Arc<AxisymGrid>) -> Result<(CellContext, PicardRun, Vec<(f64, f64)>, bool)> {
    let mut t_end = cfg.t_end_factor * t_star;
    let mut history = Vec::new();
    let grid = Arc::new(CylinderGrid::with_step(t_star, t_end, cfg.dt, Arc::clone(angular))?);
    let mut ctx = CellContext::new(&grid, cfg.system);
    let mut run = picard(&ctx, cfg)?;
    let mut probes = probe_values(&run.psi1, &run.f2, &ctx);
    history.push((t_end, f64::NAN));
    for _ in 0..cfg.max_t_doublings {
        t_end *= 2.0;
        let grid = Arc::new(CylinderGrid::with_step(t_star, t_end, cfg.dt, Arc::clone(angular))?);
        let nctx = CellContext::new(&grid, cfg.system);
        let nrun = picard(&nctx, cfg)?;
        let np = probe_values(&nrun.psi1, &nrun.f2, &nctx);
        let change = probes.iter().zip(&np).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        history.push((t_end, change));
        ctx = nctx;
        run = nrun;
        probes = np;
        if change < cfg.probe_tol {
            return Ok((ctx, run, history, true));
        }
    }
    Ok((ctx, run, history, cfg.max_t_doublings == 0))
}

/// Picard iteration for `(ψ₁, f₂) = M(ψ₁, f₂)` and assembly of the cell.
pub fn fixed_point_solve(cfg: &CriticalConfig) -> Result<CriticalCell> {
    let params = ExponentParams::critical(cfg.dim)?;
    let n = params.n();
    if !(cfg.sigma > (n - 1.0) / 2.0 && cfg.sigma < (n + 1.0) / 2.0) {
        return Err(Error::Window(format!(
            "σ must satisfy (N-1)/2 < σ < (N+1)/2, i.e. {} < σ < {}, got {}",
            (n - 1.0) / 2.0,
            (n + 1.0) / 2.0,
            cfg.sigma
        )));
    }
    if !(cfg.mu > 0.0 && cfg.mu < 1.0) {
        return Err(Error::Window(format!("μ must lie in (0, 1), got {}", cfg.mu)));
    }
    if !(cfg.tol > 0.0 && cfg.probe_tol > 0.0 && cfg.dt > 0.0) {
        return Err(Error::Config("tolerances and step must be positive".into()));
    }
    let angular = Arc::new(AxisymGrid::new(cfg.dim, cfg.n_alpha)?);
    let mut search = Vec::new();
    let (ctx, run, history, stable) = match cfg.t_star {
        Some(ts) => {
            let out = run_at(cfg, ts, &angular)?;
            search.push((ts, out.1.lipschitz));
            out
        }
        None => {
            let mut ts = 4.0;
            loop {
                match run_at(cfg, ts, &angular) {
                    Ok(out) if out.1.lipschitz < 0.5 => {
                        search.push((ts, out.1.lipschitz));
                        break out;
                    }
                    Ok(out) => search.push((ts, out.1.lipschitz)),
                    Err(Error::Contraction(_)) => search.push((ts, f64::INFINITY)),
                    Err(e) => return Err(e),
                }
                ts *= 2.0;
                if ts > 256.0 {
                    return Err(Error::Contraction("no t_* up to 256 gives a Lipschitz ratio below 0.5".into()));
                }
            }
        }
    };
    assemble(params, cfg.clone(), ctx, run, search, history, stable)
}

fn assemble(
    params: ExponentParams,
    config: CriticalConfig,
    ctx: CellContext,
    run: PicardRun,
    t_star_search: Vec<(f64, f64)>,
    t_end_history: Vec<(f64, f64)>,
    t_end_stable: bool,
) -> Result<CriticalCell> {
    let grid = Arc::clone(&ctx.grid);
    let p1 = &ctx.phi1.values;
    let mut phi = run.psi1.clone();
    phi.sigma = 0.0;
    for j in 0..grid.n_t() {
        let lead = ctx.base(grid.t_nodes[j]) + run.f2.values[j];
        for (v, p) in phi.column_mut(j).iter_mut().zip(p1) {
            *v += lead * p;
        }
    }
    let na = grid.n_alpha();
    for j in 0..grid.n_t() {
        let col = phi.column(j);
        if col[..na - 1].iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Assembly(format!("φ is not positive at t = {}", grid.t_nodes[j])));
        }
        if col[na - 1] != 0.0 {
            return Err(Error::Assembly("φ has a nonzero equator trace".into()));
        }
    }
    let t1 = T1Solver::new(&grid)?;
    let applied = t1.apply(&phi);
    let n = grid.dim() as f64;
    let mut eq33_residual = 0.0f64;
    let mut eq33_weighted = 0.0f64;
    for j in 1..grid.n_t() - 1 {
        for i in 0..na - 1 {
            let r = (applied[(i, j)] + phi.values[(i, j)].abs().powf(ctx.q)).abs();
            eq33_residual = eq33_residual.max(r);
            eq33_weighted = eq33_weighted.max(r * grid.t_nodes[j].powf((n + 3.0) / 2.0));
        }
    }
    let rows: Vec<Vec<f64>> = (0..grid.n_t()).map(|j| phi.column(j).to_vec()).collect();
    let interp = Hermite2D::new(grid.t_star, grid.dt, 0.0, grid.angular.step(), &rows, true);
    let ball_norm = mu_norm(&run.psi1, &run.f2, config.mu);
    let orthogonality = run.psi1.max_phi1_component(&ctx.phi1);
    Ok(CriticalCell {
        params,
        consts: ctx.consts,
        phi1_norm: ctx.phi1.values[0],
        grid,
        psi1: run.psi1,
        f2: run.f2,
        phi,
        contraction_log: run.log,
        lipschitz: run.lipschitz,
        fixed_point_residual: run.residual,
        ball_norm,
        orthogonality,
        eq33_residual,
        eq33_weighted,
        t_star_search,
        t_end_history,
        t_end_stable,
        interp,
        config,
    })
}

impl CriticalCell {
    pub fn t_star(&self) -> f64 {
        self.grid.t_star
    }

    pub fn t_end(&self) -> f64 {
        self.grid.t_end
    }

    /// `φ(t, α)` for `t >= t_*`; beyond `T` the leading asymptotics
    /// `(a t^{-b} + f₂(T)(T/t)^{b+1}) φ₁` are used.
    pub fn phi_at(&self, t: f64, alpha: f64) -> f64 {
        let alpha = alpha.clamp(0.0, FRAC_PI_2);
        if t <= self.grid.t_end {
            return self.interp.eval(t.max(self.grid.t_star), alpha);
        }
        let (a, b) = (self.consts.a, self.consts.b);
        let f_end = *self.f2.values.last().unwrap();
        let lead = a * t.powf(-b) + f_end * (self.grid.t_end / t).powf(b + 1.0);
        lead * self.phi1_norm * alpha.cos()
    }

    /// The cell translated to start at `t = 0`:
    /// `u(x) = |x|^{1-N} φ(t_* - log|x|, α)` on `0 < |x| <= 1`.
    pub fn u_eval(&self, x: &[f64]) -> Result<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::SingularPoint("critical cell is singular at the origin".into()));
        }
        let xn = *x.last().expect("non-empty point");
        if xn < 0.0 || r > 1.0 + 1e-12 {
            return Err(Error::Precondition("point outside the unit half-ball".into()));
        }
        Ok(self.u_polar(r, (xn / r).clamp(0.0, 1.0).acos()))
    }

    /// `u` at distance `r ∈ (0, 1]` and polar angle `α` from the inner normal.
    pub fn u_polar(&self, r: f64, alpha: f64) -> f64 {
        let n = self.grid.dim() as f64;
        r.powf(1.0 - n) * self.phi_at(self.grid.t_star - r.ln(), alpha)
    }

    /// `‖φ(t_j, ·)‖_∞` at every node.
    pub fn sup_profile(&self) -> Vec<f64> {
        (0..self.grid.n_t())
            .map(|j| self.phi.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    /// Log-log slope of `t ↦ ‖φ(t,·)‖_∞` over `[2 t_*, T/2]`.
    pub fn slope_fit(&self) -> Result<SlopeRecord> {
        let (lo, hi) = (2.0 * self.grid.t_star, 0.5 * self.grid.t_end);
        let sup = self.sup_profile();
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .grid
            .t_nodes
            .iter()
            .zip(&sup)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, s)| (*t, *s))
            .unzip();
        if xs.len() < 2 {
            return Err(Error::Config("slope fit window [2 t_*, T/2] is empty".into()));
        }
        Ok(SlopeRecord {
            fit: loglog_fit(&xs, &ys)?,
            expected: -self.consts.b,
            t_min: lo,
            t_max: hi,
        })
    }

    /// `sup_α |φ(t,·)/‖φ(t,·)‖_∞ - φ₁/‖φ₁‖_∞|` at the node closest to `t`.
    pub fn shape_defect(&self, t: f64) -> f64 {
        let j = (((t - self.grid.t_star) / self.grid.dt).round() as usize).min(self.grid.n_t() - 1);
        let col = self.phi.column(j);
        let s = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        col.iter()
            .zip(self.grid.angular.nodes())
            .fold(0.0f64, |m, (v, a)| m.max((v / s - a.cos()).abs()))
    }

    /// Fitted amplitude `A` of `‖φ(t,·)‖_∞ ≈ A t^{-b_N}` over the slope window.
    pub fn fitted_amplitude(&self) -> Result<f64> {
        let rec = self.slope_fit()?;
        Ok(rec.fit.intercept.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: usize, t_star: f64, t_end: f64, dt: f64, na: usize) -> Arc<CylinderGrid> {
        let ang = Arc::new(AxisymGrid::new(dim, na).unwrap());
        Arc::new(CylinderGrid::with_step(t_star, t_end, dt, ang).unwrap())
    }

    #[test]
    fn e_is_orthogonal_and_factorises() {
        for dim in [2, 3] {
            let g = grid(dim, 10.0, 100.0, 0.5, 129);
            let ctx = CellContext::new(&g, CellSystem::Printed);
            let e = ctx.error();
            for &t in &[10.0, 100.0] {
                let j = ((t - g.t_star) / g.dt).round() as usize;
                let c = g.angular.inner(e.column(j), &ctx.phi1.values);
                assert!(c.abs() < 1e-8, "{c}");
            }
            let prof = error_profile(&ctx.phi1, &ctx.consts);
            for j in 0..g.n_t() {
                let s = g.t_nodes[j].powf(-ctx.consts.b - 1.0);
                for (v, p) in e.column(j).iter().zip(&prof.values) {
                    assert_eq!(*v, s * p);
                }
            }
        }
    }

    #[test]
    fn t1_zero_and_residual() {
        let g = grid(2, 2.0, 20.0, 0.1, 33);
        let z = CylinderField::zeros(&g, 0.75);
        let out = t1_solve(&z, 0.75).unwrap();
        assert_eq!(out.psi.weighted_sup(), 0.0);
        let ctx = CellContext::new(&g, CellSystem::Printed);
        let out = t1_solve(ctx.error(), 0.75).unwrap();
        assert!(out.raw_residual < 1e-10, "{}", out.raw_residual);
        assert!(out.psi.max_phi1_component(&ctx.phi1) < 1e-12);
    }

    #[test]
    fn t1_rejects_phi1_component() {
        let g = grid(2, 2.0, 20.0, 0.1, 33);
        let h = CylinderField::from_fn(&g, 0.5, |t, a| (-t).exp() * a.cos());
        assert!(matches!(t1_solve(&h, 0.5), Err(Error::Precondition(_))));
    }

    /// `ψ = s(t) g(α)` with `g = Π^⊥[cos α (1 + α²)]`.
    fn manufactured_error(dim: usize, na: usize, dt: f64) -> f64 {
        let g = grid(dim, 1.0, 10.0, dt, na);
        let p1 = phi1(&g.angular);
        let nf = dim as f64;
        let big = g.angular.sample(|a| a.cos() * (1.0 + a * a));
        let c = g.angular.inner(&big.values, &p1.values) * p1.values[0];
        // g = G - c cos α, Δ_S g computed exactly
        let shape = |a: f64| a.cos() * (1.0 + a * a) - c * a.cos();
        let lap = |a: f64| {
            let g1 = -a.sin() + 2.0 * a * a.cos() - a * a * a.sin();
            let g2 = a.cos() - 4.0 * a * a.sin() - a * a * a.cos();
            let cot = if a == 0.0 { 0.0 } else { a.cos() / a.sin() };
            let lg = if a == 0.0 { (nf - 1.0) * g2 } else { g2 + (nf - 2.0) * cot * g1 };
            lg + c * (nf - 1.0) * a.cos()
        };
        let w = std::f64::consts::PI / 9.0;
        let s = |t: f64| (w * (t - 1.0)).sin();
        let s1 = |t: f64| w * (w * (t - 1.0)).cos();
        let s2 = |t: f64| -w * w * (w * (t - 1.0)).sin();
        let h = CylinderField::from_fn(&g, 0.0, |t, a| {
            (s2(t) + nf * s1(t)) * shape(a) + s(t) * (lap(a) + (nf - 1.0) * shape(a))
        });
        // the continuous h is only orthogonal to φ₁ up to quadrature error
        let mut hp = h.clone();
        for j in 0..g.n_t() {
            let col = SphericalProfile::new(g.angular.clone(), h.column(j).to_vec()).unwrap();
            hp.column_mut(j).copy_from_slice(&project_perp(&col, &p1).values);
        }
        let out = t1_solve(&hp, 0.0).unwrap();
        let exact = CylinderField::from_fn(&g, 0.0, |t, a| s(t) * shape(a));
        out.psi.sub_weighted(&exact)
    }

    #[test]
    fn t1_manufactured_second_order() {
        let e1 = manufactured_error(3, 33, 0.1);
        let e2 = manufactured_error(3, 65, 0.05);
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "order {order} ({e1:e} -> {e2:e})");
    }

    #[test]
    fn g_operator_closed_form() {
        let g = grid(2, 1.0, 20.0, 1e-3, 9);
        let n = 2.0;
        let src = ScalarTrack::from_fn(&g, 0.75, |t| (-n * t).exp());
        let out = g_operator(&src, 1.75);
        let err = out
            .values
            .iter()
            .zip(&g.t_nodes)
            .fold(0.0f64, |m, (v, t)| m.max((v + (-n * t).exp() * ((t - 1.0) / n + 1.0 / (n * n))).abs()));
        assert!(err < 1e-8, "{err:e}");
        let dt = g.dt;
        let mut fd = 0.0f64;
        for j in 1..g.n_t() - 1 {
            let v = &out.values;
            let r = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dt * dt) + n * (v[j + 1] - v[j - 1]) / (2.0 * dt)
                - src.values[j];
            fd = fd.max(r.abs());
        }
        assert!(fd < 1e-6, "{fd:e}");
    }

    #[test]
    fn g_operator_bound_and_linearity() {
        let sigma = 0.75;
        let g = grid(2, 4.0, 400.0, 0.05, 9);
        let src = ScalarTrack::from_fn(&g, sigma, |t| t.powf(-1.0 - sigma));
        let out = g_operator(&src, 1.0 + sigma);
        let c = ScalarTrack { sigma, ..out.clone() }.weighted_sup(0.0) / src.weighted_sup(1.0);
        assert!(c <= t2_bound(2, sigma, 4.0), "{c} vs {}", t2_bound(2, sigma, 4.0));
        let h = ScalarTrack::from_fn(&g, sigma, |t| (0.3 * t).sin() / t / t);
        let comb = src.combine(&h, |a, b, _| 2.0 * a - 3.0 * b);
        let lhs = t2_solve(&comb, sigma, CellSystem::Printed).unwrap().f;
        let a = t2_solve(&src, sigma, CellSystem::Printed).unwrap().f;
        let b = t2_solve(&h, sigma, CellSystem::Printed).unwrap().f;
        for j in 0..g.n_t() {
            let r = 2.0 * a.values[j] - 3.0 * b.values[j];
            assert!((lhs.values[j] - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn t2_zero_and_windows() {
        let g = grid(2, 4.0, 40.0, 0.05, 9);
        let z = ScalarTrack::zeros(&g, 0.75);
        let out = t2_solve(&z, 0.75, CellSystem::Printed).unwrap();
        assert!(out.f.values.iter().all(|v| *v == 0.0));
        assert!(t2_solve(&z, 0.4, CellSystem::Printed).is_err());
        assert!(t2_solve(&z, 1.6, CellSystem::Consistent).is_err());
        let g = grid(2, 0.5, 5.0, 0.05, 9);
        let z = ScalarTrack::zeros(&g, 0.75);
        assert!(matches!(t2_solve(&z, 0.75, CellSystem::Printed), Err(Error::Precondition(_))));
    }

    #[test]
    fn t2_consistent_solves_ode() {
        let g = grid(2, 4.0, 40.0, 0.01, 9);
        let src = ScalarTrack::from_fn(&g, 0.75, |t| t.powf(-2.5));
        let f = t2_solve(&src, 0.75, CellSystem::Consistent).unwrap().f;
        let dt = g.dt;
        for j in 1..g.n_t() - 1 {
            let v = &f.values;
            let t = g.t_nodes[j];
            let r = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dt * dt) + 2.0 * (v[j + 1] - v[j - 1]) / (2.0 * dt) + 3.0 * v[j] / t
                - src.values[j];
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn nonlinearities_at_zero() {
        let g = grid(2, 4.0, 40.0, 0.1, 33);
        let ctx = CellContext::new(&g, CellSystem::Printed);
        let z = CylinderField::zeros(&g, 0.75);
        let zf = ScalarTrack::zeros(&g, 0.75);
        let n1 = nonlinearity_n1(&ctx, &z, &zf);
        let (a, q) = (ctx.consts.a, ctx.q);
        for j in 0..g.n_t() {
            let t = g.t_nodes[j];
            for (v, p) in n1.column(j).iter().zip(&ctx.phi1.values) {
                let expect = t.powf(-1.5) * (a * p - a.powf(q) * p.powf(q));
                assert!((v - expect).abs() <= 1e-14 * (1.0 + expect.abs()));
            }
        }
        let n2 = nonlinearity_n2(&ctx, &z, &zf);
        for (v, t) in n2.values.iter().zip(&g.t_nodes) {
            let expect = 0.75 * a * t.powf(-2.5);
            assert!((v - expect).abs() <= 1e-14 * expect);
        }
    }

    #[test]
    fn n1_orthogonal_for_random_inputs() {
        use rand::{Rng, SeedableRng};
        let g = grid(2, 4.0, 40.0, 0.2, 33);
        let ctx = CellContext::new(&g, CellSystem::Printed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut psi = CylinderField::from_fn(&g, 0.75, |_, a| 0.01 * a.cos() * (3.0 * a).sin());
        for v in psi.values.iter_mut() {
            *v *= rng.gen_range(0.5..1.5);
        }
        let last = g.n_alpha() - 1;
        for j in 0..g.n_t() {
            psi.values[(last, j)] = 0.0;
            let col = SphericalProfile::new(g.angular.clone(), psi.column(j).to_vec()).unwrap();
            psi.column_mut(j).copy_from_slice(&project_perp(&col, &ctx.phi1).values);
        }
        let mut f = ScalarTrack::zeros(&g, 0.75);
        for (v, t) in f.values.iter_mut().zip(&g.t_nodes) {
            *v = 0.1 / t * rng.gen_range(-1.0..1.0);
        }
        let n1 = nonlinearity_n1(&ctx, &psi, &f);
        assert!(n1.max_phi1_component(&ctx.phi1) < 1e-8);
    }

    #[test]
    fn one_step_consistency() {
        let g = grid(2, 8.0, 80.0, 0.1, 33);
        let ctx = CellContext::new(&g, CellSystem::Printed);
        let t1 = T1Solver::new(&g).unwrap();
        let z = CylinderField::zeros(&g, 0.75);
        let zf = ScalarTrack::zeros(&g, 0.75);
        let (p, f) = apply_map(&ctx, &t1, &z, &zf).unwrap();
        let p2 = t1.solve(&nonlinearity_n1(&ctx, &z, &zf), 0.75).unwrap().psi;
        let f2 = t2_solve_with_tail(&nonlinearity_n2(&ctx, &z, &zf), 0.75, CellSystem::Printed, 2.5).unwrap().f;
        assert!(p.sub_weighted(&p2) <= 1e-12);
        assert!(f.sub_weighted(&f2) <= 1e-12);
    }

    #[test]
    fn critical_cell_n2() {
        let mut cfg = CriticalConfig::new(2, 0.75);
        cfg.dt = 0.1;
        cfg.n_alpha = 33;
        let cell = fixed_point_solve(&cfg).unwrap();
        assert!(cell.lipschitz < 0.5);
        assert!(cell.fixed_point_residual <= 1e-6);
        assert!(cell.ball_norm <= cfg.mu);
        assert!(cell.orthogonality <= 1e-8);
        let s = cell.slope_fit().unwrap();
        assert!((s.fit.slope + 0.5).abs() <= 0.05, "{:?}", s);
        assert!(cell.shape_defect(cell.t_end() / 2.0) <= 0.05);
        assert_eq!(cell.u_polar(0.3, FRAC_PI_2), 0.0);
    }
}
