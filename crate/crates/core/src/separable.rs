//! The separable cell `u₀(x) = |x|^{-2/(p-1)} φ_p(x_N/|x|)`.
//!
//! `φ_p` solves `f'' + (N-2) cot(α) f' + λ_p f + f^p = 0` on `(0, π/2)` with
//! `f'(0) = 0`, `f(π/2) = 0`, and is found by shooting on `s = f(0)`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Quintic1D;
use crate::ode::{integrate, OdeOptions};
use crate::params::ExponentParams;
use crate::sphere::{AxisymGrid, SphericalProfile};

/// Default polar resolution of shooting profiles.
pub const DEFAULT_NODES: usize = 401;
const SCAN_START: f64 = 1e-4;
const SCAN_END: f64 = 1e4;

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub params: ExponentParams,
    pub s_star: f64,
    pub profile: SphericalProfile,
    /// `φ_p'` at the grid nodes, from the integrator.
    pub derivative: Vec<f64>,
    /// `|φ_p(π/2)|` for the accepted amplitude.
    pub residual: f64,
    /// Max over interior nodes of the finite-difference defect of the ODE.
    pub fd_defect: f64,
    interp: Quintic1D,
}

impl ShootingResult {
    /// `(φ_p, φ_p', φ_p'')` at polar angle `α`.
    pub fn eval3(&self, alpha: f64) -> [f64; 3] {
        self.interp.eval3(alpha)
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.interp.eval(alpha)
    }

    pub fn max_value(&self) -> f64 {
        self.profile.max()
    }

    /// `max(sup|φ|, sup|φ'|, sup|φ''|)` over the nodes, a stand-in for `‖φ_p‖_{C²}`.
    pub fn c2_surrogate(&self) -> f64 {
        let g = &self.profile.grid;
        g.nodes().iter().fold(0.0f64, |m, &a| {
            let [f, d, dd] = self.eval3(a);
            m.max(f.abs()).max(d.abs()).max(dd.abs())
        })
    }
}

fn second_derivative(params: &ExponentParams, alpha: f64, f: f64, df: f64) -> f64 {
    let n = params.n();
    let source = params.lambda_p * f + f.abs().powf(params.p - 1.0) * f;
    if alpha == 0.0 {
        -source / (n - 1.0)
    } else {
        -(n - 2.0) * alpha.cos() / alpha.sin() * df - source
    }
}

/// Integrates from the pole with `f(0) = s` and returns `(f, f')` at `outputs`.
fn shoot(params: &ExponentParams, s: f64, alpha0: f64, outputs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let f2 = second_derivative(params, 0.0, s, 0.0);
    let y0 = [s + 0.5 * f2 * alpha0 * alpha0, f2 * alpha0];
    let pr = *params;
    integrate(
        move |a, y, dy| {
            dy[0] = y[1];
            dy[1] = second_derivative(&pr, a, y[0], y[1]);
        },
        alpha0,
        &y0,
        outputs,
        OdeOptions::default(),
    )
}

fn endpoint(params: &ExponentParams, s: f64, alpha0: f64) -> Result<f64> {
    Ok(shoot(params, s, alpha0, &[FRAC_PI_2])?[0][0])
}

/// Solves the half-sphere problem on the default grid.
pub fn solve_phip(params: &ExponentParams, tol: f64) -> Result<ShootingResult> {
    let grid = Arc::new(AxisymGrid::new(params.dim, DEFAULT_NODES)?);
    solve_phip_on(&grid, params, tol)
}

/// Solves the half-sphere problem and samples `φ_p` on `grid`.
///
/// The amplitude is the smallest `s > 0` for which the solution started at
/// `f(0) = s` first vanishes exactly at `π/2`.
pub fn solve_phip_on(grid: &Arc<AxisymGrid>, params: &ExponentParams, tol: f64) -> Result<ShootingResult> {
    if grid.dim() != params.dim {
        return Err(Error::InvalidGrid("grid and parameter dimensions differ".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    params.require_supercritical()?;
    let alpha0 = (0.25 * grid.step()).min(1e-3);

    let mut lo = SCAN_START;
    let mut f_lo = endpoint(params, lo, alpha0)?;
    if !(f_lo > 0.0) {
        return Err(Error::NoSolution(format!(
            "no sign change: f(π/2) <= 0 already for s = {lo:e} at p = {}",
            params.p
        )));
    }
    let mut hi = lo;
    let mut f_hi = f_lo;
    while f_hi > 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        if hi > SCAN_END {
            return Err(Error::NoSolution(format!(
                "no sign change of f(π/2) for s up to {SCAN_END:e} at p = {}",
                params.p
            )));
        }
        f_hi = endpoint(params, hi, alpha0)?;
    }

    // Illinois regula falsi, falling back to bisection when it stalls
    let mut side = 0i32;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        s = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let fs = endpoint(params, s, alpha0)?;
        if fs.abs() <= 1e-3 * tol || (hi - lo) <= 1e-15 * hi {
            break;
        }
        if fs > 0.0 {
            lo = s;
            f_lo = fs;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = s;
            f_hi = fs;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }

    let nodes = grid.nodes();
    let traj = shoot(params, s, alpha0, &nodes[1..])?;
    let mut values = Vec::with_capacity(nodes.len());
    let mut derivative = Vec::with_capacity(nodes.len());
    values.push(s);
    derivative.push(0.0);
    for y in &traj {
        values.push(y[0]);
        derivative.push(y[1]);
    }
    let last = values.len() - 1;
    let residual = values[last].abs();
    if residual > tol {
        return Err(Error::NoSolution(format!(
            "shooting residual {residual:e} above tolerance {tol:e}"
        )));
    }
    values[last] = 0.0;
    if values[..last].iter().any(|&v| v <= 0.0) {
        return Err(Error::NoSolution("shooting profile is not positive".into()));
    }
    let second: Vec<f64> = nodes
        .iter()
        .zip(values.iter().zip(&derivative))
        .map(|(&a, (&f, &d))| second_derivative(params, a, f, d))
        .collect();
    let h = grid.step();
    let mut fd_defect = 0.0f64;
    for i in 1..last {
        let lap = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h)
            + (params.n() - 2.0) * nodes[i].cos() / nodes[i].sin() * (values[i + 1] - values[i - 1]) / (2.0 * h);
        let d = lap + params.lambda_p * values[i] + values[i].powf(params.p);
        fd_defect = fd_defect.max(d.abs());
    }
    let interp = Quintic1D::new(0.0, h, values.clone(), derivative.clone(), second);
    Ok(ShootingResult {
        params: *params,
        s_star: s,
        profile: SphericalProfile::new(Arc::clone(grid), values)?,
        derivative,
        residual,
        fd_defect,
        interp,
    })
}

/// `u₀(x) = |x|^{-m} φ_p(x_N/|x|)`, the last coordinate being normal.
pub fn u0_eval(x: &[f64], result: &ShootingResult) -> Result<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::SingularPoint("u0 is singular at the origin".into()));
    }
    let xn = *x.last().expect("non-empty point");
    if xn < 0.0 {
        return Err(Error::Precondition("point lies outside the half-space".into()));
    }
    if xn == 0.0 {
        return Ok(0.0);
    }
    let alpha = (xn / r).clamp(0.0, 1.0).acos();
    Ok(r.powf(-result.params.m) * result.eval(alpha))
}

/// Second-order central-difference Laplacian of `u` at `x`.
pub fn fd_laplacian(u: &dyn Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<f64> {
    let u0 = u(x)?;
    let mut y = x.to_vec();
    let mut lap = 0.0;
    for k in 0..x.len() {
        y[k] = x[k] + h;
        let up = u(&y)?;
        y[k] = x[k] - h;
        let dn = u(&y)?;
        y[k] = x[k];
        lap += (up - 2.0 * u0 + dn) / (h * h);
    }
    Ok(lap)
}

/// `Δu₀ + u₀^p` at `x` by central differences of step `h`.
pub fn u0_fd_residual(x: &[f64], result: &ShootingResult, h: f64) -> Result<f64> {
    let u = |y: &[f64]| u0_eval(y, result);
    let lap = fd_laplacian(&u, x, h)?;
    Ok(lap + u(x)?.powf(result.params.p))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationEntry {
    pub p: f64,
    pub s_star: f64,
    pub max_phi: f64,
    pub gap: f64,
    pub ratio: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationRecord {
    pub dim: usize,
    pub entries: Vec<BifurcationEntry>,
    /// `|r_last - r_prev| / |r_prev|`; `None` with fewer than two entries.
    pub last_variation: Option<f64>,
    /// `max φ_p` strictly decreases along the sequence.
    pub monotone_vanishing: bool,
}

/// Tabulates `r(p) = max φ_p / (N - (p+1)/(p-1))^{1/(p-1)}` along `p_list`.
pub fn verify_bifurcation(dim: usize, p_list: &[f64], tol: f64) -> Result<BifurcationRecord> {
    let mut entries = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let params = ExponentParams::new(dim, p)?;
        let res = solve_phip(&params, tol)?;
        let gap = params.bifurcation_gap();
        let max_phi = res.max_value();
        entries.push(BifurcationEntry {
            p,
            s_star: res.s_star,
            max_phi,
            gap,
            ratio: max_phi / gap.powf(1.0 / (p - 1.0)),
            residual: res.residual,
        });
    }
    let last_variation = (entries.len() >= 2).then(|| {
        let a = entries[entries.len() - 2].ratio;
        let b = entries[entries.len() - 1].ratio;
        (b - a).abs() / a.abs()
    });
    let monotone_vanishing = entries.windows(2).all(|w| w[1].max_phi < w[0].max_phi);
    Ok(BifurcationRecord {
        dim,
        entries,
        last_variation,
        monotone_vanishing,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub k: usize,
    pub h: f64,
    pub n_samples: usize,
    /// Max |Δũ + ũ^p| over the samples in dimension `N + k`.
    pub max_residual: f64,
    /// The same quantity for `u₀` in dimension `N` at the projected points.
    pub base_max_residual: f64,
    /// Max difference between the two residuals at matching points.
    pub max_difference: f64,
}

/// Extends `u₀` trivially to `R^{N+k}_+` (the `k` new coordinates are inserted
/// before the normal one) and compares finite-difference residuals.
pub fn extend_cell_k(result: &ShootingResult, k: usize, h: f64, n_samples: usize, seed: u64) -> Result<ExtensionReport> {
    let n = result.params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let project = |y: &[f64]| -> Vec<f64> {
        let mut x = y[..n - 1].to_vec();
        x.push(y[n + k - 1]);
        x
    };
    let ext = |y: &[f64]| u0_eval(&project(y), result);
    let mut max_residual = 0.0f64;
    let mut base_max_residual = 0.0f64;
    let mut max_difference = 0.0f64;
    for _ in 0..n_samples {
        let mut y: Vec<f64> = (0..n + k - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        y.push(rng.gen_range(0.3..1.0));
        let r_ext = fd_laplacian(&ext, &y, h)? + ext(&y)?.powf(result.params.p);
        let r_base = u0_fd_residual(&project(&y), result, h)?;
        max_residual = max_residual.max(r_ext.abs());
        base_max_residual = base_max_residual.max(r_base.abs());
        max_difference = max_difference.max((r_ext - r_base).abs());
    }
    Ok(ExtensionReport {
        k,
        h,
        n_samples,
        max_residual,
        base_max_residual,
        max_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_exponent_has_no_solution() {
        let pr = ExponentParams::new(2, 3.0).unwrap();
        assert!(matches!(solve_phip(&pr, 1e-8), Err(Error::NoSolution(_))));
    }

    #[test]
    fn p_3_2_profile() {
        let pr = ExponentParams::new(2, 3.2).unwrap();
        let res = solve_phip(&pr, 1e-8).unwrap();
        assert!(res.residual <= 1e-8);
        assert!(res.s_star > 0.0);
        let v = &res.profile.values;
        assert_eq!(*v.last().unwrap(), 0.0);
        assert!(v[..v.len() - 1].iter().all(|&x| x > 0.0));
        assert!(res.fd_defect < 1e-4, "{}", res.fd_defect);
    }

    #[test]
    fn p_4_lambda_and_existence() {
        let pr = ExponentParams::new(2, 4.0).unwrap();
        assert!((pr.lambda_p - 4.0 / 9.0).abs() < 1e-15);
        let res = solve_phip(&pr, 1e-8).unwrap();
        assert!(res.max_value() > 0.0);
    }

    #[test]
    fn even_reflection_solves_full_interval() {
        let pr = ExponentParams::new(2, 3.2).unwrap();
        let res = solve_phip(&pr, 1e-8).unwrap();
        let v = &res.profile.values;
        let h = res.profile.grid.step();
        let full: Vec<f64> = v.iter().rev().chain(v.iter().skip(1)).cloned().collect();
        assert_eq!(full[0], 0.0);
        assert_eq!(*full.last().unwrap(), 0.0);
        let mut defect = 0.0f64;
        for i in 1..full.len() - 1 {
            let d = (full[i + 1] - 2.0 * full[i] + full[i - 1]) / (h * h) + pr.lambda_p * full[i] + full[i].powf(pr.p);
            defect = defect.max(d.abs());
        }
        assert!(defect < 1e-4, "{defect}");
    }

    #[test]
    fn u0_boundary_and_homogeneity() {
        let pr = ExponentParams::new(2, 3.2).unwrap();
        let res = solve_phip(&pr, 1e-8).unwrap();
        assert_eq!(u0_eval(&[0.7, 0.0], &res).unwrap(), 0.0);
        assert!(matches!(u0_eval(&[0.0, 0.0], &res), Err(Error::SingularPoint(_))));
        let x = [0.3, 0.4];
        for lam in [0.5, 2.0, 7.3] {
            let a = u0_eval(&[lam * x[0], lam * x[1]], &res).unwrap();
            let b = lam.powf(-pr.m) * u0_eval(&x, &res).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn u0_residual_is_second_order() {
        let pr = ExponentParams::new(2, 3.2).unwrap();
        let res = solve_phip(&pr, 1e-8).unwrap();
        let x = [0.4, 0.6];
        let r1 = u0_fd_residual(&x, &res, 0.02).unwrap().abs();
        let r2 = u0_fd_residual(&x, &res, 0.01).unwrap().abs();
        let order = (r1 / r2).log2();
        assert!(order > 1.7 && order < 2.3, "order {order} ({r1:e}, {r2:e})");
    }

    #[test]
    fn bifurcation_ratio_stabilises() {
        let rec = verify_bifurcation(2, &[3.2, 3.1, 3.05], 1e-8).unwrap();
        assert!(rec.last_variation.unwrap() < 0.05, "{:?}", rec);
        assert!(rec.monotone_vanishing);
        // N = 3 converges more slowly: the variation shrinks along the
        // sequence but is still about 7% between 2.1 and 2.05
        let rec3 = verify_bifurcation(3, &[2.2, 2.1, 2.05], 1e-8).unwrap();
        let r: Vec<f64> = rec3.entries.iter().map(|e| e.ratio).collect();
        let v1 = (r[1] - r[0]).abs() / r[0];
        let v2 = rec3.last_variation.unwrap();
        assert!(v2 < v1, "{:?}", rec3);
        assert!(rec3.monotone_vanishing);
        let single = verify_bifurcation(2, &[3.2], 1e-8).unwrap();
        assert!(single.last_variation.is_none());
    }

    #[test]
    fn extension_adds_nothing() {
        let pr = ExponentParams::new(2, 3.2).unwrap();
        let res = solve_phip(&pr, 1e-8).unwrap();
        let r0 = extend_cell_k(&res, 0, 0.01, 20, 7).unwrap();
        assert_eq!(r0.max_difference, 0.0);
        let r1 = extend_cell_k(&res, 1, 0.01, 20, 7).unwrap();
        assert!(r1.max_difference <= 1e-12 * (1.0 + r1.base_max_residual), "{r1:?}");
        let a = extend_cell_k(&res, 2, 0.02, 20, 11).unwrap();
        let b = extend_cell_k(&res, 2, 0.01, 20, 11).unwrap();
        assert!(b.max_residual < 0.4 * a.max_residual, "{a:?} {b:?}");
    }
}
