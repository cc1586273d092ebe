//! The fast-decay connection cell for `p` slightly above `(N+1)/(N-1)`:
//! `u = (1-χ)ū_p + v` with `v = -G(|x|²(Δ((1-χ)ū_p) + |(1-χ)ū_p + v|^p))`.
//!
//! Two solvers are available: Picard iteration of the fixed-point map on a
//! log-polar grid, and Newton's method for the equivalent heteroclinic orbit
//! (see [`crate::heteroclinic`]). [`ConnectionMethod::Auto`] runs Picard and
//! falls back to Newton when the iteration diverges.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LineFit};
use crate::heteroclinic::solve_heteroclinic;
use crate::halfspace::{
    check_windows, cutoff, flux_coefficient, interior_defect, printed_flux_coefficient, truncated_u_infty, far_field_fit,
    LogPolarGrid, PoissonSolver, WeightedField,
};
use crate::interp::Hermite2D;
use crate::params::ExponentParams;
use crate::separable::{solve_phip_on, ShootingResult};
use crate::sphere::AxisymGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionMethod {
    Picard,
    Heteroclinic,
    Auto,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionConfig {
    pub dim: usize,
    pub p: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub ds: f64,
    pub n_alpha: usize,
    pub s_min: f64,
    pub s_max: f64,
    /// Width of the outer strip next to `s_max` excluded from norms and fits.
    pub outer_margin: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Repeat the solve on a doubled annulus and compare probes.
    pub check_widening: bool,
    pub method: ConnectionMethod,
    /// Half-width of the strip `[-L, L]` in `s` used by the Newton solver.
    pub strip: f64,
    pub newton_tol: f64,
}

impl ConnectionConfig {
    /// Defaults with `δ`, `δ'` at the midpoints of their admissible windows.
    pub fn new(dim: usize, p: f64) -> Self {
        let (d, dp) = default_weights(dim, p);
        Self {
            dim,
            p,
            delta: d,
            delta_prime: dp,
            ds: 0.05,
            n_alpha: 65,
            s_min: -20.0,
            s_max: 60.0,
            outer_margin: 10.0,
            tol: 1e-11,
            max_iter: 200,
            check_widening: true,
            method: ConnectionMethod::Auto,
            strip: 150.0,
            newton_tol: 1e-10,
        }
    }
}

/// Midpoints of `(max(1-N, -2/(p-1)), 1)` and `(max(-N, p(1-N)+2), 1-N)`.
pub fn default_weights(dim: usize, p: f64) -> (f64, f64) {
    let n = dim as f64;
    let lo = (1.0 - n).max(-2.0 / (p - 1.0));
    let lo_p = (-n).max(p * (1.0 - n) + 2.0);
    (0.5 * (lo + 1.0), 0.5 * (lo_p + 1.0 - n))
}

/// All parameter windows of the connection problem.
pub fn check_connection_windows(params: &ExponentParams, delta: f64, delta_prime: f64) -> Result<()> {
    params.require_supercritical()?;
    check_windows(params.dim, delta, delta_prime)?;
    let p = params.p;
    let n = params.n();
    if !(delta > -2.0 / (p - 1.0)) {
        return Err(Error::Window(format!(
            "δ must exceed -2/(p-1) = {}, got {delta}",
            -2.0 / (p - 1.0)
        )));
    }
    if !(delta_prime > p * (1.0 - n) + 2.0) {
        return Err(Error::Window(format!(
            "δ' must exceed p(1-N)+2 = {}, got {delta_prime}",
            p * (1.0 - n) + 2.0
        )));
    }
    Ok(())
}

/// Grid data shared by all iterates: `U = (1-χ)ū_p` and the `v`-independent
/// part `F_0 = |x|²(ΔU + U^p)` of the right-hand side.
pub struct ConnectionProblem {
    pub params: ExponentParams,
    pub profile: ShootingResult,
    pub grid: Arc<LogPolarGrid>,
    pub base: DMatrix<f64>,
    pub rhs0: WeightedField,
    solver: PoissonSolver,
}

impl ConnectionProblem {
    pub fn new(cfg: &ConnectionConfig) -> Result<Self> {
        let params = ExponentParams::new(cfg.dim, cfg.p)?;
        check_connection_windows(&params, cfg.delta, cfg.delta_prime)?;
        let angular = Arc::new(AxisymGrid::new(cfg.dim, cfg.n_alpha)?);
        let profile = solve_phip_on(&angular, &params, 1e-10)?;
        let grid = Arc::new(LogPolarGrid::new(cfg.s_min, cfg.s_max, cfg.ds, Arc::clone(&angular))?);
        let (na, ns) = (grid.n_alpha(), grid.n_s());
        let m = params.m;
        let p = params.p;
        let n = params.n();
        let phi = &profile.profile.values;
        let mut base = DMatrix::zeros(na, ns);
        let mut rhs0 = WeightedField::zeros(&grid, cfg.delta, cfg.delta_prime);
        for j in 0..ns {
            let s = grid.s(j);
            let (chi, cs, css) = cutoff(s);
            let g = 1.0 - chi;
            let e = (-m * s).exp();
            for i in 0..na - 1 {
                let ub = e * phi[i];
                let q = e * phi[i].powf(p);
                base[(i, j)] = g * ub;
                // r²Δ(gū) + (gū)^p r² with r²Δū = -Q, ū_s = -mū
                rhs0.values[(i, j)] = (g.powf(p) - g) * q + 2.0 * m * cs * ub - ub * (css + (n - 2.0) * cs);
            }
        }
        let solver = PoissonSolver::new(&grid)?;
        Ok(Self {
            params,
            profile,
            grid,
            base,
            rhs0,
            solver,
        })
    }

    /// `|x|²(Δ((1-χ)ū_p) + |(1-χ)ū_p + v|^p)` on the grid.
    pub fn residual_rhs(&self, v: &WeightedField) -> WeightedField {
        let g = &self.grid;
        let p = self.params.p;
        let mut out = self.rhs0.clone();
        for j in 0..g.n_s() {
            let r2 = (2.0 * g.s(j)).exp();
            for i in 0..g.n_alpha() - 1 {
                let u = self.base[(i, j)];
                let w = u + v.values[(i, j)];
                out.values[(i, j)] += r2 * (w.abs().powf(p) - u.powf(p));
            }
        }
        out
    }

    /// One Picard step `v ↦ -G(rhs(v))`.
    pub fn step(&self, v: &WeightedField) -> WeightedField {
        let mut out = self.solver.solve(&self.residual_rhs(v));
        out.values *= -1.0;
        out
    }

    fn trusted_hi(&self, cfg: &ConnectionConfig) -> f64 {
        self.grid.s_max() - cfg.outer_margin
    }

    /// `|a| + ‖w - aχu_∞‖_{δ,δ'}` over the trusted region, with `a` from the
    /// flux identity applied to the source `src` of `w` (`L w = src`).
    fn split_norm(&self, w: &WeightedField, src: &WeightedField, s_hi: f64) -> f64 {
        let a = flux_coefficient(src, s_hi);
        let g = &self.grid;
        let dim = g.dim();
        let mut t = w.clone();
        for j in 0..g.n_s() {
            let s = g.s(j);
            let chi = cutoff(s).0;
            if chi == 0.0 {
                continue;
            }
            let r = s.exp();
            for (i, &al) in g.angular.nodes().iter().enumerate() {
                t.values[(i, j)] -= a * chi * truncated_u_infty(dim, g.s_max(), r, al);
            }
        }
        a.abs() + t.norm_below(s_hi)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConnectionIteration {
    pub iteration: usize,
    pub step_norm: f64,
    pub ratio: f64,
    pub norm: f64,
}

/// Diagnostics of a converged Picard iteration.
#[derive(Debug, Clone, Serialize)]
pub struct PicardDiagnostics {
    pub log: Vec<ConnectionIteration>,
    pub lipschitz: f64,
    pub ball_radius: f64,
    pub stayed_in_ball: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NewtonDiagnostics {
    /// Amplitude of the departure from `φ_p` at the inner end of the strip.
    pub epsilon: f64,
    pub steps: usize,
    pub residual: f64,
}

/// A converged connection cell together with its diagnostics.
pub struct ConnectionCell {
    pub config: ConnectionConfig,
    pub params: ExponentParams,
    pub profile: ShootingResult,
    pub grid: Arc<LogPolarGrid>,
    /// `U = (1-χ)ū_p` on the grid.
    pub base: DMatrix<f64>,
    pub v: WeightedField,
    /// The solver that produced `v` (never `Auto`).
    pub method: ConnectionMethod,
    pub picard: Option<PicardDiagnostics>,
    /// Error that made `Auto` abandon the Picard iteration.
    pub picard_failure: Option<String>,
    pub newton: Option<NewtonDiagnostics>,
    /// `‖rhs(0)‖_{δ,δ'}` and the C² surrogate of `φ_p`.
    pub rhs0_norm: f64,
    pub c2_surrogate: f64,
    /// `∫ |u|^p x_N dx / (N ∫θ_N²)` over the grid plus analytic inner and outer tails.
    pub a_p: f64,
    /// Least-squares far-field coefficient.
    pub a_fit: f64,
    /// `(N-1) a ∫θ_N = -∫f|x|^{-2}` for the `v`-equation, Picard only.
    pub a_printed_form: Option<f64>,
    pub min_u: f64,
    pub inner_fit: LineFit,
    pub outer_fit: LineFit,
    /// Sup of `|x|²|Δ_h u + u^p|` on the probe region `-5 ≤ log r ≤ 5`.
    pub residual_certificate: f64,
    /// `max |v|/ū_p` over the second decade above the inner boundary.
    pub inner_ratio: f64,
    /// Max probe change when the domain is doubled.
    pub widening_change: Option<f64>,
    /// Upper end of the region where the grid solution is trusted.
    pub trusted_hi: f64,
    v_interp: Hermite2D,
}

fn probe_values(v: &WeightedField) -> Vec<f64> {
    let g = &v.grid;
    let na = g.n_alpha();
    let mut out = Vec::new();
    for s in [-1.0, 0.0, 1.0] {
        let j = g.index_of(s);
        for i in [0, na / 3, (2 * na) / 3] {
            out.push(v.values[(i, j)]);
        }
    }
    out
}

fn picard(problem: &ConnectionProblem, cfg: &ConnectionConfig) -> Result<(WeightedField, PicardDiagnostics)> {
    let s_hi = problem.trusted_hi(cfg);
    let mut v = WeightedField::zeros(&problem.grid, cfg.delta, cfg.delta_prime);
    let mut log = Vec::new();
    let mut prev_step = f64::NAN;
    let mut lipschitz = 0.0f64;
    let mut ball_radius = f64::NAN;
    let mut in_ball = true;
    for it in 0..cfg.max_iter {
        let next = problem.step(&v);
        let diff = next.linear_combination(1.0, &v, -1.0);
        // source of the difference: L(diff) = -(rhs(v_k) - rhs(v_{k-1})), read back from the solver
        let src = WeightedField {
            values: problem.solver.apply(&diff),
            ..diff.clone()
        };
        let step = problem.split_norm(&diff, &src, s_hi);
        let nsrc = WeightedField {
            values: problem.solver.apply(&next),
            ..next.clone()
        };
        let norm = problem.split_norm(&next, &nsrc, s_hi);
        if it == 0 {
            ball_radius = 2.0 * norm;
        }
        in_ball &= norm <= ball_radius;
        let ratio = step / prev_step;
        if it >= 2 && ratio.is_finite() {
            lipschitz = lipschitz.max(ratio);
        }
        log.push(ConnectionIteration {
            iteration: it,
            step_norm: step,
            ratio,
            norm,
        });
        v = next;
        if !step.is_finite() || norm > 1e3 * ball_radius {
            return Err(Error::Contraction(format!(
                "Picard iteration diverges at p = {} (iteration {it}, step {step:e}, ratio {ratio})",
                problem.params.p
            )));
        }
        if step <= cfg.tol {
            let diag = PicardDiagnostics {
                log,
                lipschitz,
                ball_radius,
                stayed_in_ball: in_ball,
            };
            return Ok((v, diag));
        }
        prev_step = step;
    }
    Err(Error::Contraction(format!(
        "no convergence after {} iterations at p = {}",
        cfg.max_iter, problem.params.p
    )))
}

struct Run {
    problem: ConnectionProblem,
    config: ConnectionConfig,
    v: WeightedField,
    picard: Option<PicardDiagnostics>,
    newton: Option<NewtonDiagnostics>,
}

fn run_picard(cfg: &ConnectionConfig) -> Result<Run> {
    let problem = ConnectionProblem::new(cfg)?;
    let (v, diag) = picard(&problem, cfg)?;
    Ok(Run {
        problem,
        config: cfg.clone(),
        v,
        picard: Some(diag),
        newton: None,
    })
}

fn run_newton(cfg: &ConnectionConfig) -> Result<Run> {
    let mut config = cfg.clone();
    config.s_min = -cfg.strip;
    config.s_max = cfg.strip;
    let problem = ConnectionProblem::new(&config)?;
    let sol = solve_heteroclinic(
        &problem.params,
        &problem.profile.profile.values,
        &problem.grid,
        cfg.newton_tol,
        50,
    )?;
    let g = &problem.grid;
    let m = problem.params.m;
    let mut v = WeightedField::zeros(g, cfg.delta, cfg.delta_prime);
    for j in 0..g.n_s() {
        let e = (-m * g.s(j)).exp();
        for i in 0..g.n_alpha() - 1 {
            v.values[(i, j)] = e * sol.w[(i, j)] - problem.base[(i, j)];
        }
    }
    let newton = NewtonDiagnostics {
        epsilon: sol.epsilon,
        steps: sol.newton_steps,
        residual: sol.residual,
    };
    Ok(Run {
        problem,
        config,
        v,
        picard: None,
        newton: Some(newton),
    })
}

fn run_method(cfg: &ConnectionConfig, method: ConnectionMethod) -> Result<Run> {
    match method {
        ConnectionMethod::Picard => run_picard(cfg),
        ConnectionMethod::Heteroclinic => run_newton(cfg),
        ConnectionMethod::Auto => unreachable!("resolved by the caller"),
    }
}

/// Runs `method` and, if requested, repeats it on a doubled domain.
fn run_checked(cfg: &ConnectionConfig, method: ConnectionMethod) -> Result<(Run, Option<f64>)> {
    let run = run_method(cfg, method)?;
    if !cfg.check_widening {
        return Ok((run, None));
    }
    let mut wide = cfg.clone();
    wide.s_min *= 2.0;
    wide.s_max *= 2.0;
    wide.strip *= 2.0;
    let w = run_method(&wide, method)?;
    let (a, b) = (probe_values(&run.v), probe_values(&w.v));
    let change = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok((run, Some(change)))
}

/// Solves for the connection cell and records fits, fluxes and certificates.
/// Under `Auto` a Picard iteration that diverges on either annulus hands over
/// to the Newton solver.
pub fn solve_connection(cfg: &ConnectionConfig) -> Result<ConnectionCell> {
    let (method, (run, widening_change), picard_failure) = match cfg.method {
        ConnectionMethod::Auto => match run_checked(cfg, ConnectionMethod::Picard) {
            Ok(r) => (ConnectionMethod::Picard, r, None),
            Err(Error::Contraction(msg)) => (
                ConnectionMethod::Heteroclinic,
                run_checked(cfg, ConnectionMethod::Heteroclinic)?,
                Some(msg),
            ),
            Err(e) => return Err(e),
        },
        m => (m, run_checked(cfg, m)?, None),
    };
    assemble(run, method, picard_failure, widening_change)
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[values.len() - 1]))
}

/// Least-squares fit of `A(s) = a + b e^{κs}`, returning `a`.
fn amplitude_fit(s: &[f64], amp: &[f64], kappa: f64) -> f64 {
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in s.iter().zip(amp) {
        let e = (kappa * x).exp();
        s11 += 1.0;
        s12 += e;
        s22 += e * e;
        y1 += y;
        y2 += e * y;
    }
    (s22 * y1 - s12 * y2) / (s11 * s22 - s12 * s12)
}

fn assemble(
    run: Run,
    method: ConnectionMethod,
    picard_failure: Option<String>,
    widening_change: Option<f64>,
) -> Result<ConnectionCell> {
    let Run {
        problem,
        config,
        v,
        picard,
        newton,
    } = run;
    let g = Arc::clone(&problem.grid);
    let p = problem.params.p;
    let n = problem.params.n();
    let m = problem.params.m;
    let (na, ns) = (g.n_alpha(), g.n_s());
    let s_hi = problem.trusted_hi(&config);
    let j_hi = g.index_of(s_hi);
    let ang = &g.angular;

    // W = r^m u keeps every quantity below in range on wide strips
    let mut w = DMatrix::zeros(na, ns);
    let mut min_u = f64::INFINITY;
    for j in 0..ns {
        let e = (m * g.s(j)).exp();
        for i in 0..na - 1 {
            let u = problem.base[(i, j)] + v.values[(i, j)];
            w[(i, j)] = e * u;
            if j > 0 && j < ns - 1 {
                min_u = min_u.min(u);
            }
        }
    }
    if !(min_u > 0.0) {
        return Err(Error::Assembly(format!("u is not positive on the grid (min {min_u:e})")));
    }

    // a N∫θ² = ∫|u|^p x_N dx = ∫∫ e^{(N-1-m)s} |W|^p θ_N ds dσ
    let th: Vec<f64> = ang.nodes().iter().map(|a| a.cos()).collect();
    let sq: Vec<f64> = th.iter().map(|t| t * t).collect();
    let theta_sq = ang.integrate(&sq);
    let gamma = n - 1.0 - m;
    let kappa = n + 1.0 - p * (n - 1.0);
    let dens: Vec<f64> = (0..=j_hi)
        .map(|j| {
            let col: Vec<f64> = w.column(j).iter().map(|x| x.abs().powf(p)).collect();
            ang.inner(&col, &th) * (gamma * g.s(j)).exp()
        })
        .collect();
    let phi_p: Vec<f64> = problem.profile.profile.values.iter().map(|x| x.abs().powf(p)).collect();
    let inner_tail = ang.inner(&phi_p, &th) * (gamma * g.s_min()).exp() / gamma;
    let outer_tail = dens[j_hi] / (-kappa);
    let a_p = (trapezoid(&dens, g.ds) + inner_tail + outer_tail) / (n * theta_sq);
    if !(a_p > 0.0) {
        return Err(Error::Assembly(format!("flux coefficient a_p = {a_p:e} is not positive")));
    }

    let far_lo = 0.5 * s_hi;
    let (a_fit, a_printed_form) = match method {
        ConnectionMethod::Picard => {
            let mut src = problem.residual_rhs(&v);
            src.values *= -1.0;
            (far_field_fit(&v, far_lo, s_hi)?, Some(printed_flux_coefficient(&src, s_hi)))
        }
        _ => {
            let js: Vec<usize> = (g.index_of(far_lo)..=j_hi).collect();
            let s: Vec<f64> = js.iter().map(|&j| g.s(j)).collect();
            let amp: Vec<f64> = js
                .iter()
                .map(|&j| {
                    let col: Vec<f64> = w.column(j).iter().copied().collect();
                    ang.inner(&col, &th) / theta_sq * (gamma * g.s(j)).exp()
                })
                .collect();
            (amplitude_fit(&s, &amp, kappa), None)
        }
    };

    let log_u = |j: usize| w[(0, j)].ln() - m * g.s(j);
    let line = |lo: f64, hi: f64| -> Result<LineFit> {
        let js: Vec<usize> = (g.index_of(lo)..=g.index_of(hi)).collect();
        let xs: Vec<f64> = js.iter().map(|&j| g.s(j)).collect();
        let ys: Vec<f64> = js.iter().map(|&j| log_u(j)).collect();
        linear_fit(&xs, &ys)
    };
    let inner_fit = match method {
        ConnectionMethod::Picard => line(g.s_min() + 4.0, g.s_min() + 12.0)?,
        // the orbit leaves φ_p along a slowly growing mode; stay well inside the plateau
        _ => {
            let span = g.s_max() - g.s_min();
            line(g.s_min() + span / 6.0, g.s_min() + 0.3 * span)?
        }
    };
    let outer_fit = line(far_lo, s_hi)?;

    // discrete residual of Δu + u^p (times r²) on the probe region
    let total = WeightedField {
        values: &problem.base + &v.values,
        ..v.clone()
    };
    let applied = problem.solver.apply(&total);
    let (j0, j1) = (g.index_of(-5.0), g.index_of(5.0));
    let mut sub_n = DMatrix::zeros(na, j1 - j0 + 1);
    for j in j0..=j1 {
        let r2 = (2.0 * g.s(j)).exp();
        for i in 0..na - 1 {
            sub_n[(i, j - j0)] = -r2 * total.values[(i, j)].abs().powf(p);
        }
    }
    let sub_a = applied.columns(j0, j1 - j0 + 1).into_owned();
    let residual_certificate = interior_defect(&sub_a, &sub_n);

    let d_lo = g.s_min() + std::f64::consts::LN_10;
    let d_hi = d_lo + std::f64::consts::LN_10;
    let mut inner_ratio = 0.0f64;
    for j in g.index_of(d_lo)..=g.index_of(d_hi) {
        for i in 0..na - 1 {
            let ub = problem.base[(i, j)];
            if ub > 0.0 {
                inner_ratio = inner_ratio.max(v.values[(i, j)].abs() / ub);
            }
        }
    }

    let rhs0_norm = problem.rhs0.norm();
    let c2_surrogate = problem.profile.c2_surrogate();
    let v_interp = v.interpolant();
    Ok(ConnectionCell {
        config,
        params: problem.params,
        profile: problem.profile,
        grid: g,
        base: problem.base,
        v,
        method,
        picard,
        picard_failure,
        newton,
        rhs0_norm,
        c2_surrogate,
        a_p,
        a_fit,
        a_printed_form,
        min_u,
        inner_fit,
        outer_fit,
        residual_certificate,
        inner_ratio,
        widening_change,
        trusted_hi: s_hi,
        v_interp,
    })
}


impl ConnectionCell {
    /// `u(r, α)` in polar form (`α` measured from the inner normal).
    pub fn u_polar(&self, r: f64, alpha: f64) -> f64 {
        if !(alpha < std::f64::consts::FRAC_PI_2) || r <= 0.0 {
            return 0.0;
        }
        let s = r.ln();
        let g = &self.grid;
        let n = self.params.n();
        let s_hi = self.trusted_hi;
        if s > s_hi {
            return self.a_p * r.powf(1.0 - n) * alpha.cos();
        }
        let ub = r.powf(-self.params.m) * self.profile.eval(alpha);
        let chi = cutoff(s).0;
        let v = if s < g.s_min() { 0.0 } else { self.v_interp.eval(s, alpha) };
        (1.0 - chi) * ub + v
    }

    /// `u(x)` with the last coordinate normal to the boundary.
    pub fn u_eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return f64::INFINITY;
        }
        let xn = x[x.len() - 1];
        self.u_polar(r, (xn / r).clamp(-1.0, 1.0).acos())
    }

    /// `u` on the grid nodes, `(s, α, u)` rows.
    pub fn grid_rows(&self) -> Vec<(f64, f64, f64)> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.n_s() * g.n_alpha());
        for j in 0..g.n_s() {
            for (i, &a) in g.angular.nodes().iter().enumerate() {
                out.push((g.s(j), a, self.base[(i, j)] + self.v.values[(i, j)]));
            }
        }
        out
    }

    /// Relative disagreement of the two flux estimates.
    pub fn flux_agreement(&self) -> f64 {
        (self.a_p - self.a_fit).abs() / self.a_p.abs()
    }
}

/// `u_λ(x) = λ^{2/(p-1)} u₁(λx)`.
pub struct ScaledCell<'a> {
    pub cell: &'a ConnectionCell,
    pub lambda: f64,
}

pub fn scaled_family(cell: &ConnectionCell, lambda: f64) -> Result<ScaledCell<'_>> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!("λ must be positive, got {lambda}")));
    }
    Ok(ScaledCell { cell, lambda })
}

impl ScaledCell<'_> {
    pub fn u_polar(&self, r: f64, alpha: f64) -> f64 {
        if self.lambda == 1.0 {
            return self.cell.u_polar(r, alpha);
        }
        self.lambda.powf(self.cell.params.m) * self.cell.u_polar(self.lambda * r, alpha)
    }

    /// Sup over `1/2 ≤ |x| ≤ 1`, sampled on a polar lattice.
    pub fn sup_on_shell(&self, n: usize) -> f64 {
        let mut m = 0.0f64;
        for k in 0..=n {
            let r = 0.5 + 0.5 * k as f64 / n as f64;
            for l in 0..n {
                let a = std::f64::consts::FRAC_PI_2 * l as f64 / n as f64;
                m = m.max(self.u_polar(r, a));
            }
        }
        m
    }
}

/// Contraction ratios along increasing `p`; `None` where the iteration fails.
pub fn contraction_sweep(dim: usize, ps: &[f64], template: &ConnectionConfig) -> Vec<(f64, Option<f64>)> {
    ps.iter()
        .map(|&p| {
            let mut cfg = template.clone();
            cfg.dim = dim;
            cfg.p = p;
            let (d, dp) = default_weights(dim, p);
            cfg.delta = d;
            cfg.delta_prime = dp;
            cfg.check_widening = false;
            let ratio = ConnectionProblem::new(&cfg)
                .and_then(|pb| picard(&pb, &cfg))
                .ok()
                .map(|r| r.1.lipschitz);
            (p, ratio)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows() {
        let (d, dp) = default_weights(2, 3.05);
        assert!((d - (-0.5 * 0.9756097560975611 + 0.5)).abs() < 1e-12);
        assert!(dp > -1.05 && dp < -1.0);
        let params = ExponentParams::new(2, 3.05).unwrap();
        assert!(check_connection_windows(&params, -0.5, -1.5).is_err());
        assert!(check_connection_windows(&params, -0.99, dp).is_err());
        assert!(check_connection_windows(&params, -0.5, dp).is_ok());
    }

    #[test]
    fn rhs0_supported_in_transition_annulus() {
        let mut cfg = ConnectionConfig::new(2, 3.05);
        cfg.s_min = -6.0;
        cfg.s_max = 6.0;
        cfg.n_alpha = 33;
        let pb = ConnectionProblem::new(&cfg).unwrap();
        let g = &pb.grid;
        for j in 0..g.n_s() {
            let s = g.s(j);
            if s <= 0.0 || s >= std::f64::consts::LN_2 {
                assert!(pb.rhs0.values.column(j).iter().all(|&v| v.abs() < 1e-14), "s = {s}");
            }
        }
        assert!(pb.rhs0.norm() > 0.0);
    }

    #[test]
    fn picard_diverges_n2_p305() {
        let mut cfg = ConnectionConfig::new(2, 3.05);
        cfg.n_alpha = 33;
        cfg.ds = 0.1;
        cfg.method = ConnectionMethod::Picard;
        cfg.check_widening = false;
        assert!(matches!(solve_connection(&cfg), Err(Error::Contraction(_))));
    }

    #[test]
    fn connection_cell_n2() {
        let cfg = ConnectionConfig::new(2, 3.05);
        let cell = solve_connection(&cfg).unwrap();
        assert_eq!(cell.method, ConnectionMethod::Heteroclinic);
        assert!(cell.picard_failure.is_some());
        assert!(cell.a_p > 0.0);
        assert!(cell.min_u > 0.0);
        assert!(cell.flux_agreement() < 0.02, "{} {}", cell.a_p, cell.a_fit);
        let m = cell.params.m;
        assert!((cell.inner_fit.slope + m).abs() <= 0.02 * m, "{:?}", cell.inner_fit);
        assert!((cell.outer_fit.slope + 1.0).abs() <= 0.02, "{:?}", cell.outer_fit);
        assert!(cell.inner_ratio < 0.1);
        assert!(cell.residual_certificate < 1e-2, "{}", cell.residual_certificate);
        assert!(cell.widening_change.unwrap() < 1e-6, "{:?}", cell.widening_change);
        // scaling
        let one = scaled_family(&cell, 1.0).unwrap();
        assert_eq!(one.u_polar(0.7, 0.4), cell.u_polar(0.7, 0.4));
        let half = scaled_family(&cell, 0.5).unwrap();
        let expect = 0.5f64.powf(m) * cell.u_polar(0.35, 0.4);
        assert!((half.u_polar(0.7, 0.4) - expect).abs() <= 1e-15 * expect.abs());
        // blow-down: u_λ → 0 away from the origin as λ grows
        let sups: Vec<f64> = (0..4)
            .map(|k| scaled_family(&cell, 2f64.powi(k)).unwrap().sup_on_shell(16))
            .collect();
        assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
        // blow-up: u_λ → ū_p as λ shrinks
        let bar = (0..=16)
            .map(|k| 2f64.powf(cell.params.m * (1.0 - k as f64 / 32.0)))
            .fold(0.0f64, f64::max)
            * cell.profile.eval(0.0);
        let tiny = scaled_family(&cell, 1e-40).unwrap().sup_on_shell(16);
        assert!((tiny - bar).abs() < 0.05 * bar, "{tiny} {bar}");
    }
}
