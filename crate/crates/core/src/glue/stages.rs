//! Finite-stage construction: one singular point per stage, `ε_i` halved
//! until the stage increments satisfy the `2^{-i}` bounds.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::fermi::Domain;
use super::mesh::FvSolver;
use super::{boundary_point, floor_cells, GlueProblem, GlueSolution};
use crate::error::{Error, Result};

/// Largest `log(1/ε)` before `ε` underflows.
const MAX_LOG_INV_EPS: f64 = 708.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub index: usize,
    pub point: f64,
    pub radius: f64,
    pub log_inv_eps: f64,
    pub halvings: usize,
    /// `‖u_i - u_{i-1}‖_{L¹}`.
    pub aa: f64,
    /// `(∫ dist² |u_i - u_{i-1}|^q)^q`, the displayed form.
    pub bb: f64,
    /// `∫ dist² |u_i - u_{i-1}|^q` without the outer power.
    pub bb_inner: f64,
    /// `‖γ̃^δ v_i‖_∞`, `γ̃ = dist(·, S)`.
    pub cc: f64,
    pub threshold: f64,
    pub picard_iterations: usize,
    pub lipschitz: f64,
    pub min_u: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct MultiStageReport {
    pub stages: Vec<StageRecord>,
    pub solution: GlueSolution,
}

impl MultiStageReport {
    pub fn all_passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }

    /// Partial sums of the `L¹` increments.
    pub fn l1_partial_sums(&self) -> Vec<f64> {
        self.stages
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s.aa;
                Some(*acc)
            })
            .collect()
    }
}

fn boundary_gap(domain: Domain, a: f64, b: f64) -> f64 {
    match domain {
        Domain::Disk => {
            let d = (a - b).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        }
        Domain::Ball => (a - b).abs(),
    }
}

/// Runs `k` stages over the first `k` configured points. Stage `i` keeps
/// the cells and corrector of stage `i-1`, adds a cell at `ξ_i` with radius
/// `min(R, d_i/4)` (`d_i` the boundary distance to earlier points) and
/// re-solves for the total corrector.
pub fn multi_stage(problem: &GlueProblem, k: usize) -> Result<MultiStageReport> {
    let cfg = &problem.config;
    if k == 0 || k > cfg.points.len() {
        return Err(Error::Config(format!(
            "stages must lie in 1..={} (one point per stage), got {k}",
            cfg.points.len()
        )));
    }
    let mesh = &problem.mesh;
    let q = cfg.p;
    let delta = cfg.delta();
    let mut points = Vec::new();
    let mut logs: Vec<f64> = Vec::new();
    let mut radii = Vec::new();
    let mut prev_u = vec![0.0; mesh.len()];
    let mut prev_v = vec![0.0; mesh.len()];
    let mut stages = Vec::new();
    let mut last = None;
    for i in 1..=k {
        let xi = cfg.points[i - 1];
        let r_i = points
            .iter()
            .map(|p| 0.25 * boundary_gap(cfg.domain, xi, *p))
            .fold(cfg.radius, f64::min);
        points.push(xi);
        radii.push(r_i);
        let fixed = floor_cells(mesh, &points);
        let solver = FvSolver::new(mesh, &fixed)?;
        let xs: Vec<Vec<f64>> = points.iter().map(|a| boundary_point(cfg.domain, *a)).collect();
        let mut l = logs.last().copied().unwrap_or(cfg.log_inv_eps);
        let threshold = 0.5f64.powi(i as i32);
        let mut halvings = 0;
        let (sol, rec) = loop {
            let mut ls = logs.clone();
            ls.push(l);
            let attempt = problem.solve_stage(&solver, &fixed, points.clone(), ls, radii.clone(), prev_v.clone());
            match attempt {
                Ok(sol) => {
                    let u = sol.u_cells();
                    let (mut aa, mut bb) = (0.0, 0.0);
                    let mut cc = 0.0f64;
                    for c in 0..mesh.len() {
                        let d = (u[c] - prev_u[c]).abs();
                        let w = mesh.weight(c);
                        let dist = 1.0 - mesh.polar(c).0;
                        aa += w * d;
                        bb += w * dist * dist * d.powf(q);
                        if !fixed[c] {
                            let x = mesh.cartesian(c);
                            let g = xs
                                .iter()
                                .map(|p| p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                                .fold(f64::INFINITY, f64::min)
                                .sqrt();
                            cc = cc.max(g.powf(delta) * (sol.v[c] - prev_v[c]).abs());
                        }
                    }
                    let passed = aa <= threshold && bb.powf(q) <= threshold && cc <= threshold;
                    let rec = StageRecord {
                        index: i,
                        point: xi,
                        radius: r_i,
                        log_inv_eps: l,
                        halvings,
                        aa,
                        bb: bb.powf(q),
                        bb_inner: bb,
                        cc,
                        threshold,
                        picard_iterations: sol.picard.distances.len(),
                        lipschitz: sol.picard.lipschitz,
                        min_u: sol.min_u,
                        passed,
                    };
                    if passed {
                        break (sol, rec);
                    }
                }
                Err(Error::Contraction(_)) => {}
                Err(e) => return Err(e),
            }
            l += LN_2;
            halvings += 1;
            if l > MAX_LOG_INV_EPS {
                return Err(Error::Stage(format!(
                    "stage {i}: ε underflowed before the 2^-{i} bounds were met"
                )));
            }
        };
        logs.push(l);
        prev_u = sol.u_cells();
        prev_v = sol.v.clone();
        stages.push(rec);
        last = Some(sol);
    }
    Ok(MultiStageReport {
        stages,
        solution: last.expect("at least one stage"),
    })
}
