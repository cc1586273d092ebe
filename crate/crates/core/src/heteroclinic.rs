//! The connection cell as a heteroclinic orbit in `s = log r`.
//!
//! With `u = r^{-m} W(s, α)` the equation `Δu + u^p = 0` becomes
//! `W_ss + (N-2-2m) W_s + Δ_S W + λ_p W + |W|^{p-1} W = 0`, an autonomous
//! problem whose constant state `φ_p` is the separable solution. The cell is
//! the orbit leaving `φ_p` as `s → -∞` and decaying like `r^{1-N}` as
//! `s → ∞`. On a finite strip it is computed by Newton's method with
//! `W(S_1) = (1-ε) φ_p`, `W(S_2) = 0` and the phase condition
//! `W(0, 0) = φ_p(0)/2`, the amplitude `ε` being an extra unknown.

use std::sync::Arc;

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};
use nalgebra::DMatrix;

use crate::angular::dirichlet_bands;
use crate::error::{Error, Result};
use crate::halfspace::LogPolarGrid;
use crate::params::ExponentParams;

#[derive(Debug, Clone)]
pub struct HeteroclinicSolution {
    pub grid: Arc<LogPolarGrid>,
    /// `W` on the grid, `n_alpha × n_s`, equator row zero.
    pub w: DMatrix<f64>,
    pub epsilon: f64,
    pub newton_steps: usize,
    pub residual: f64,
}

struct System<'a> {
    grid: &'a LogPolarGrid,
    phi: &'a [f64],
    p: f64,
    lambda: f64,
    c_lo: f64,
    c_up: f64,
    c_di: f64,
    bands: (Vec<f64>, Vec<f64>, Vec<f64>),
    n_a: usize,
    n_i: usize,
    j_phase: usize,
}

impl System<'_> {
    fn dim(&self) -> usize {
        self.n_a * self.n_i + 1
    }

    fn idx(&self, j: usize, i: usize) -> usize {
        (j - 1) * self.n_a + i
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let (lo, di, up) = &self.bands;
        let eps = x[x.len() - 1];
        let mut r = vec![0.0; self.dim()];
        for j in 1..=self.n_i {
            for i in 0..self.n_a {
                let k = self.idx(j, i);
                let w = x[k];
                let mut v = (self.c_di + di[i] + self.lambda) * w + w.abs().powf(self.p - 1.0) * w;
                if i > 0 {
                    v += lo[i] * x[k - 1];
                }
                if i + 1 < self.n_a {
                    v += up[i] * x[k + 1];
                }
                v += self.c_lo * if j == 1 { (1.0 - eps) * self.phi[i] } else { x[k - self.n_a] };
                if j < self.n_i {
                    v += self.c_up * x[k + self.n_a];
                }
                r[k] = v;
            }
        }
        r[self.dim() - 1] = x[self.idx(self.j_phase, 0)] - 0.5 * self.phi[0];
        r
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let (lo, di, up) = &self.bands;
        let n = self.dim();
        let mut t = Vec::with_capacity(5 * n + self.n_a);
        for j in 1..=self.n_i {
            for i in 0..self.n_a {
                let k = self.idx(j, i);
                let w = x[k];
                t.push(Triplet::new(
                    k,
                    k,
                    self.c_di + di[i] + self.lambda + self.p * w.abs().powf(self.p - 1.0),
                ));
                if i > 0 {
                    t.push(Triplet::new(k, k - 1, lo[i]));
                }
                if i + 1 < self.n_a {
                    t.push(Triplet::new(k, k + 1, up[i]));
                }
                if j == 1 {
                    t.push(Triplet::new(k, n - 1, -self.c_lo * self.phi[i]));
                } else {
                    t.push(Triplet::new(k, k - self.n_a, self.c_lo));
                }
                if j < self.n_i {
                    t.push(Triplet::new(k, k + self.n_a, self.c_up));
                }
            }
        }
        t.push(Triplet::new(n - 1, self.idx(self.j_phase, 0), 1.0));
        SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| Error::SingularSystem(format!("{e:?}")))
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton solve of the heteroclinic problem on `grid` (which must contain
/// `s = 0`). `phi` is `φ_p` on the angular nodes.
pub fn solve_heteroclinic(
    params: &ExponentParams,
    phi: &[f64],
    grid: &Arc<LogPolarGrid>,
    tol: f64,
    max_iter: usize,
) -> Result<HeteroclinicSolution> {
    let g = grid.as_ref();
    if !(g.s_min() < -1.0 && g.s_max() > 1.0) {
        return Err(Error::Config(format!(
            "strip [{}, {}] must contain a neighbourhood of s = 0",
            g.s_min(),
            g.s_max()
        )));
    }
    let n = params.n();
    let m = params.m;
    let ds = g.ds;
    let b = n - 2.0 - 2.0 * m;
    let n_a = g.n_alpha() - 1;
    let n_i = g.n_s() - 2;
    let sys = System {
        grid: g,
        phi,
        p: params.p,
        lambda: params.lambda_p,
        c_lo: 1.0 / (ds * ds) - b / (2.0 * ds),
        c_up: 1.0 / (ds * ds) + b / (2.0 * ds),
        c_di: -2.0 / (ds * ds),
        bands: dirichlet_bands(&g.angular),
        n_a,
        n_i,
        j_phase: g.index_of(0.0),
    };

    // tanh front centred at s = 0
    let mut x = vec![0.0; sys.dim()];
    for j in 1..=n_i {
        let prof = 0.5 * (1.0 - (sys.grid.s(j) / 15.0).tanh());
        for i in 0..n_a {
            x[sys.idx(j, i)] = prof * phi[i];
        }
    }

    let mut res = sys.residual(&x);
    let mut norm = sup(&res);
    let mut steps = 0;
    while norm > tol {
        if steps == max_iter {
            return Err(Error::Contraction(format!(
                "Newton did not converge in {max_iter} steps (residual {norm:e})"
            )));
        }
        let jac = sys.jacobian(&x)?;
        let lu = jac.sp_lu().map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let mut dx = Mat::from_fn(sys.dim(), 1, |i, _| -res[i]);
        lu.solve_in_place_with_conj(Conj::No, dx.as_mut());
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + t * dx[(i, 0)]).collect();
            let r = sys.residual(&trial);
            let nr = sup(&r);
            if nr.is_finite() && nr < (1.0 - 0.3 * t) * norm {
                x = trial;
                res = r;
                norm = nr;
                break;
            }
            t *= 0.5;
            if t < 1e-4 {
                return Err(Error::Contraction(format!("line search failed at residual {norm:e}")));
            }
        }
        steps += 1;
    }

    let eps = x[x.len() - 1];
    let mut w = DMatrix::zeros(g.n_alpha(), g.n_s());
    for i in 0..n_a {
        w[(i, 0)] = (1.0 - eps) * phi[i];
        for j in 1..=n_i {
            w[(i, j)] = x[sys.idx(j, i)];
        }
    }
    Ok(HeteroclinicSolution {
        grid: Arc::clone(grid),
        w,
        epsilon: eps,
        newton_steps: steps,
        residual: norm,
    })
}
