//! Gluing rescaled half-space cells at boundary points of the unit disk or
//! ball and solving for the corrector.
//!
//! With `u_ε = Σ_i χ_R U_i` the corrector solves
//! `-Δv = E + |u_ε + v|^q - u_ε^q`, `E = Δu_ε + u_ε^q`, with `v = 0` on
//! `∂Ω` and on the mesh cells touching each singular point. The iteration is
//! Picard's, each step a Cholesky solve with the finite-volume Laplacian.

mod cells;
mod fermi;
mod mesh;
mod stages;
mod verify;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cells::{build_cell, CellProfile, PlacedCell};
pub use fermi::{Domain, FermiChart};
pub use mesh::{polar_to_cartesian, FvSolver, MeshSpec, PolarMesh};
pub use stages::{multi_stage, MultiStageReport, StageRecord};
pub use verify::{
    floor_tail, nontangential_probe, test_suite, verify_very_weak, very_weak_defect, IntegralTrend, ProbeReport,
    TestFunction, VeryWeakReport,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlueConfig {
    pub domain: Domain,
    pub p: f64,
    /// Angles `θ_i` on the circle, or pole angles `ϑ_i ∈ {0, π}` on the ball.
    pub points: Vec<f64>,
    /// `log(1/ε)`.
    pub log_inv_eps: f64,
    /// Cutoff radius `R`.
    pub radius: f64,
    /// Weight exponent, `None` for `2 - n`.
    pub delta: Option<f64>,
    pub eta: f64,
    pub h_max: f64,
    /// Decades of grading below `R`.
    pub floor_decades: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl GlueConfig {
    pub fn new(domain: Domain, p: f64, points: Vec<f64>, eps: f64) -> Self {
        Self {
            domain,
            p,
            points,
            log_inv_eps: -eps.ln(),
            radius: 0.25,
            delta: None,
            eta: 0.3,
            h_max: 0.05,
            floor_decades: 6.0,
            tol: 1e-10,
            max_iter: 200,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(2.0 - self.domain.dim() as f64)
    }

    pub fn mesh_spec(&self, level: u32) -> MeshSpec {
        MeshSpec {
            d_min: self.radius * 10f64.powf(-self.floor_decades),
            eta: self.eta,
            h_max: self.h_max,
            level,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.domain.dim() as f64;
        let d = self.delta();
        if !(d > 1.0 - n && d <= 2.0 - n) {
            return Err(Error::Window(format!(
                "δ must satisfy 1-n < δ <= 2-n, i.e. {} < δ <= {}, got {d}",
                1.0 - n,
                2.0 - n
            )));
        }
        if !(self.log_inv_eps > 0.0 && self.log_inv_eps.is_finite()) {
            return Err(Error::Window(format!(
                "ε must lie in (0, 1), got log(1/ε) = {}",
                self.log_inv_eps
            )));
        }
        if !(self.radius > 0.0 && self.radius < 0.5) {
            return Err(Error::Config(format!("cutoff radius R must lie in (0, 1/2), got {}", self.radius)));
        }
        if !(self.tol > 0.0 && self.eta > 0.0 && self.h_max > 0.0 && self.floor_decades > 0.0) {
            return Err(Error::Config("tolerances and mesh parameters must be positive".into()));
        }
        let pts = mesh::normalise_points(self.domain, &self.points)?;
        let gap = match self.domain {
            Domain::Disk => {
                let mut g = 2.0 * PI;
                for (i, a) in pts.iter().enumerate() {
                    let b = if i + 1 < pts.len() { pts[i + 1] } else { pts[0] + 2.0 * PI };
                    if pts.len() > 1 {
                        g = g.min(b - a);
                    }
                }
                g
            }
            Domain::Ball => PI,
        };
        if gap <= 2.0 * self.radius {
            return Err(Error::Config(format!(
                "cutoffs overlap: points must be separated by more than 2R = {} along the boundary, closest pair {gap}",
                2.0 * self.radius
            )));
        }
        Ok(())
    }
}

/// Cartesian position of a boundary point.
pub fn boundary_point(domain: Domain, angle: f64) -> Vec<f64> {
    polar_to_cartesian(domain, 1.0, angle)
}

/// `γ = (min_i |x - ξ_i|² + ρ_f²)^{1/2}` at the cell centres.
pub fn gamma_weight(mesh: &PolarMesh, points: &[f64], floor: f64) -> Vec<f64> {
    let xi: Vec<Vec<f64>> = points.iter().map(|a| boundary_point(mesh.domain, *a)).collect();
    (0..mesh.len())
        .map(|c| {
            let x = mesh.cartesian(c);
            let d2 = xi
                .iter()
                .map(|p| p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            (d2 + floor * floor).sqrt()
        })
        .collect()
}

/// Cells held fixed: the corner cells at each of `points`.
pub fn floor_cells(mesh: &PolarMesh, points: &[f64]) -> Vec<bool> {
    let mut fixed = vec![false; mesh.len()];
    for p in points {
        for c in mesh.corner_cells(*p) {
            fixed[c] = true;
        }
    }
    fixed
}

fn weighted_sup(values: &[f64], gamma: &[f64], power: f64, mask: &dyn Fn(usize) -> bool) -> f64 {
    values
        .iter()
        .zip(gamma)
        .enumerate()
        .filter(|(c, _)| mask(*c))
        .fold(0.0f64, |m, (_, (v, g))| m.max((v * g.powf(power)).abs()))
}

/// Result of [`weighted_corrector_solve`].
#[derive(Debug, Clone)]
pub struct WeightedSolve {
    pub u: Vec<f64>,
    /// `‖γ^{-δ} u‖_∞ / ‖γ^{-δ} f‖_∞` over the free cells.
    pub constant: f64,
}

/// Solves `Δu = γ^{-2} f` with `u = 0` on `∂Ω` and on the fixed cells.
pub fn weighted_corrector_solve(
    mesh: &PolarMesh,
    solver: &FvSolver,
    gamma: &[f64],
    f: &[f64],
    delta: f64,
) -> WeightedSolve {
    let b: Vec<f64> = (0..mesh.len())
        .map(|c| -mesh.volume[c] * f[c] / (gamma[c] * gamma[c]))
        .collect();
    let mut u = vec![0.0; mesh.len()];
    solver.solve(&b, &mut u);
    let free = |c: usize| solver.is_free(c);
    let fu = weighted_sup(f, gamma, -delta, &free);
    let constant = if fu > 0.0 {
        weighted_sup(&u, gamma, -delta, &free) / fu
    } else {
        0.0
    };
    WeightedSolve { u, constant }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PicardLog {
    /// `‖γ^{-δ}(v_{k+1} - v_k)‖_∞`.
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Largest ratio from the second step on.
    pub lipschitz: f64,
    /// Median of the last three ratios.
    pub asymptotic_ratio: f64,
}

/// A glued solution `u = Σ χ_R U_i + v`.
#[derive(Clone)]
pub struct GlueSolution {
    pub config: GlueConfig,
    pub level: u32,
    pub mesh: Arc<PolarMesh>,
    pub cell: Arc<dyn CellProfile>,
    /// Points glued so far, with their `log(1/ε_i)` and cutoff radii.
    pub points: Vec<f64>,
    pub log_inv_eps: Vec<f64>,
    pub radii: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `u_ε` at the cell centres.
    pub base: Vec<f64>,
    /// `E = Δu_ε + u_ε^q` at the cell centres.
    pub source: Vec<f64>,
    pub v: Vec<f64>,
    pub fixed: Vec<bool>,
    pub picard: PicardLog,
    /// `‖γ^{2-δ} E‖_∞`.
    pub source_norm: f64,
    /// `‖γ^{-δ}(v_1 - v_0)‖_∞` for the first Picard step.
    pub first_step: f64,
    /// `c₀ = first_step · log(1/ε)^{(n-1)/2}`.
    pub c0: f64,
    /// `2 c₀ log(1/ε)^{(1-n)/2}`.
    pub ball_radius: f64,
    /// `‖γ^{-δ}(v - v_0)‖_∞`.
    pub v_norm: f64,
    pub min_u: f64,
}

impl std::fmt::Debug for GlueSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlueSolution")
            .field("points", &self.points)
            .field("log_inv_eps", &self.log_inv_eps)
            .field("cells", &self.mesh.len())
            .field("picard", &self.picard)
            .field("v_norm", &self.v_norm)
            .field("min_u", &self.min_u)
            .finish()
    }
}

impl GlueSolution {
    pub fn placed(&self) -> Vec<PlacedCell<'_>> {
        self.points
            .iter()
            .zip(&self.log_inv_eps)
            .zip(&self.radii)
            .map(|((a, l), r)| PlacedCell::new(self.cell.as_ref(), self.config.domain, *a, *l, *r))
            .collect()
    }

    /// `u` at the cell centres.
    pub fn u_cells(&self) -> Vec<f64> {
        self.base.iter().zip(&self.v).map(|(a, b)| a + b).collect()
    }

    /// `u` at the polar point `(r, angle)`.
    pub fn u_polar(&self, r: f64, angle: f64) -> f64 {
        let cells: f64 = self
            .placed()
            .iter()
            .map(|p| {
                let (s, z) = p.fermi(r, angle);
                p.value(s, z)
            })
            .sum();
        cells + self.mesh.interpolate(&self.v, r, angle)
    }
}

/// `u_ε` and `E` at the cell centres for the given placed cells.
pub fn assemble_cells(mesh: &PolarMesh, placed: &[PlacedCell<'_>]) -> (Vec<f64>, Vec<f64>) {
    let mut base = vec![0.0; mesh.len()];
    let mut source = vec![0.0; mesh.len()];
    for c in 0..mesh.len() {
        let (r, a) = mesh.polar(c);
        for p in placed {
            let (s, z) = p.fermi(r, a);
            let (u, e) = p.value_and_source(s, z);
            base[c] += u;
            source[c] += e;
        }
    }
    (base, source)
}

/// Shared pieces of a gluing run on one mesh.
pub struct GlueProblem {
    pub config: GlueConfig,
    pub cell: Arc<dyn CellProfile>,
    pub level: u32,
    pub mesh: Arc<PolarMesh>,
    pub gamma: Vec<f64>,
}

impl GlueProblem {
    pub fn new(config: GlueConfig, cell: Arc<dyn CellProfile>, level: u32) -> Result<Self> {
        config.validate()?;
        if cell.dim() != config.domain.dim() || (cell.exponent() - config.p).abs() > 1e-12 * config.p {
            return Err(Error::Config(format!(
                "cell (N = {}, p = {}) does not match the gluing problem (N = {}, p = {})",
                cell.dim(),
                cell.exponent(),
                config.domain.dim(),
                config.p
            )));
        }
        let mesh = Arc::new(PolarMesh::new(config.domain, &config.points, config.mesh_spec(level))?);
        let floor = mesh.spec.d_min / 2f64.powi(level as i32);
        let gamma = gamma_weight(&mesh, &config.points, floor);
        Ok(Self {
            config,
            cell,
            level,
            mesh,
            gamma,
        })
    }

    /// Glues all configured points at once with the configured `ε`.
    pub fn solve(&self) -> Result<GlueSolution> {
        let n = self.config.points.len();
        let fixed = floor_cells(&self.mesh, &self.config.points);
        let solver = FvSolver::new(&self.mesh, &fixed)?;
        self.solve_stage(
            &solver,
            &fixed,
            self.config.points.clone(),
            vec![self.config.log_inv_eps; n],
            vec![self.config.radius; n],
            vec![0.0; self.mesh.len()],
        )
    }

    /// Picard iteration from `v0` (its values on fixed cells are kept).
    pub fn solve_stage(
        &self,
        solver: &FvSolver,
        fixed: &[bool],
        points: Vec<f64>,
        log_inv_eps: Vec<f64>,
        radii: Vec<f64>,
        v0: Vec<f64>,
    ) -> Result<GlueSolution> {
        let cfg = &self.config;
        let mesh = &self.mesh;
        let q = cfg.p;
        let delta = cfg.delta();
        let placed: Vec<PlacedCell<'_>> = points
            .iter()
            .zip(&log_inv_eps)
            .zip(&radii)
            .map(|((a, l), r)| PlacedCell::new(self.cell.as_ref(), cfg.domain, *a, *l, *r))
            .collect();
        let (base, source) = assemble_cells(mesh, &placed);
        let free = |c: usize| !fixed[c];
        let source_norm = weighted_sup(&source, &self.gamma, 2.0 - delta, &free);

        let mut v = v0.clone();
        let mut log = PicardLog::default();
        let mut first_step = 0.0;
        let mut rhs = vec![0.0; mesh.len()];
        loop {
            for c in 0..mesh.len() {
                let b = base[c];
                rhs[c] = mesh.volume[c] * (source[c] + (b + v[c]).abs().powf(q) - b.powf(q));
            }
            let mut next = v.clone();
            solver.solve(&rhs, &mut next);
            let diff: Vec<f64> = next.iter().zip(&v).map(|(a, b)| a - b).collect();
            let dist = weighted_sup(&diff, &self.gamma, -delta, &free);
            let norm = weighted_sup(&next, &self.gamma, -delta, &free);
            if log.distances.is_empty() {
                first_step = dist;
            }
            if let Some(prev) = log.distances.last() {
                log.ratios.push(dist / prev);
            }
            log.distances.push(dist);
            v = next;
            if !dist.is_finite() {
                return Err(Error::Contraction("corrector iteration produced non-finite values; ε too large".into()));
            }
            if dist <= cfg.tol * norm.max(f64::MIN_POSITIVE) {
                break;
            }
            let k = log.ratios.len();
            if k >= 4 && log.ratios[k - 4..].iter().all(|r| *r >= 1.0) {
                return Err(Error::Contraction(format!(
                    "corrector iteration is not contracting (ratio {:.3}); ε too large, decrease eps",
                    log.ratios[k - 1]
                )));
            }
            if log.distances.len() >= cfg.max_iter {
                return Err(Error::Contraction(format!(
                    "corrector iteration did not converge in {} steps (step {dist:e}); ε too large",
                    cfg.max_iter
                )));
            }
        }
        log.lipschitz = log.ratios.iter().skip(1).fold(0.0, |m: f64, r| m.max(*r));
        let tail: Vec<f64> = {
            let k = log.ratios.len();
            let mut t = log.ratios[k.saturating_sub(3)..].to_vec();
            t.sort_by(|a, b| a.total_cmp(b));
            t
        };
        log.asymptotic_ratio = tail.get(tail.len() / 2).copied().unwrap_or(0.0);

        let n = cfg.domain.dim() as f64;
        let l = *log_inv_eps.last().unwrap();
        let c0 = first_step * l.powf(0.5 * (n - 1.0));
        let ball_radius = 2.0 * c0 * l.powf(0.5 * (1.0 - n));
        let inc: Vec<f64> = v.iter().zip(&v0).map(|(a, b)| a - b).collect();
        let v_norm = weighted_sup(&inc, &self.gamma, -delta, &free);
        let min_u = base.iter().zip(&v).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min);
        Ok(GlueSolution {
            config: cfg.clone(),
            level: self.level,
            mesh: Arc::clone(mesh),
            cell: Arc::clone(&self.cell),
            points,
            log_inv_eps,
            radii,
            gamma: self.gamma.clone(),
            base,
            source,
            v,
            fixed: fixed.to_vec(),
            picard: log,
            source_norm,
            first_step,
            c0,
            ball_radius,
            v_norm,
            min_u,
        })
    }
}

/// Builds the cell for `config` and glues at mesh level `level`.
pub fn glue_fixed_point(config: &GlueConfig, level: u32) -> Result<GlueSolution> {
    let cell = build_cell(config.domain, config.p)?;
    GlueProblem::new(config.clone(), cell, level)?.solve()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InverseLevel {
    pub level: u32,
    pub cells: usize,
    /// Max error on cells with `γ > 10⁻²`.
    pub error: f64,
    pub constant: f64,
}

/// Manufactured-solution study of [`weighted_corrector_solve`] on the disk with
/// one singular point at angle 0.5, over mesh levels `0..levels`.
pub fn weighted_inverse_study(delta: f64, levels: u32) -> Result<Vec<InverseLevel>> {
    let cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.5], 1e-3);
    let xi = boundary_point(Domain::Disk, 0.5);
    let mut out = Vec::new();
    for level in 0..levels {
        let mesh = PolarMesh::new(Domain::Disk, &cfg.points, cfg.mesh_spec(level))?;
        let floor = mesh.spec.d_min / 2f64.powi(level as i32);
        let gamma = gamma_weight(&mesh, &cfg.points, floor);
        let fixed = floor_cells(&mesh, &cfg.points);
        let solver = FvSolver::new(&mesh, &fixed)?;
        let (ue, f): (Vec<f64>, Vec<f64>) =
            (0..mesh.len()).map(|c| manufactured(&mesh.cartesian(c), &xi, floor, delta)).unzip();
        let sol = weighted_corrector_solve(&mesh, &solver, &gamma, &f, delta);
        let error = (0..mesh.len())
            .filter(|c| gamma[*c] > 1e-2)
            .map(|c| (sol.u[c] - ue[c]).abs())
            .fold(0.0, f64::max);
        out.push(InverseLevel {
            level,
            cells: mesh.len(),
            error,
            constant: sol.constant,
        });
    }
    Ok(out)
}

/// `u = γ^δ (1 - |x|²)(1 + x_1/2)` and `f = γ² Δu`.
fn manufactured(x: &[f64], xi: &[f64], floor: f64, delta: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let d: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a - b).collect();
    let d2: f64 = d.iter().map(|v| v * v).sum();
    let g2 = d2 + floor * floor;
    let gam = g2.sqrt();
    let g = gam.powf(delta);
    let grad_g: Vec<f64> = d.iter().map(|v| delta * gam.powf(delta - 2.0) * v).collect();
    let lap_g = delta * gam.powf(delta - 2.0) * n + delta * (delta - 2.0) * gam.powf(delta - 4.0) * d2;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let l = 1.0 + 0.5 * x[0];
    let b = (1.0 - r2) * l;
    let mut grad_b: Vec<f64> = x.iter().map(|v| -2.0 * v * l).collect();
    grad_b[0] += 0.5 * (1.0 - r2);
    let lap_b = -2.0 * n * l - 2.0 * x[0];
    let dot: f64 = grad_g.iter().zip(&grad_b).map(|(a, c)| a * c).sum();
    (g * b, g2 * (b * lap_g + 2.0 * dot + g * lap_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::loglog_fit;
    use std::sync::OnceLock;

    fn disk_cell() -> Arc<dyn CellProfile> {
        static CELL: OnceLock<Arc<dyn CellProfile>> = OnceLock::new();
        CELL.get_or_init(|| build_cell(Domain::Disk, 3.0).unwrap()).clone()
    }

    #[test]
    fn zero_source_gives_zero() {
        let cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.5], 1e-3);
        let mesh = PolarMesh::new(Domain::Disk, &cfg.points, cfg.mesh_spec(0)).unwrap();
        let fixed = floor_cells(&mesh, &cfg.points);
        let solver = FvSolver::new(&mesh, &fixed).unwrap();
        let gamma = gamma_weight(&mesh, &cfg.points, mesh.spec.d_min);
        let out = weighted_corrector_solve(&mesh, &solver, &gamma, &vec![0.0; mesh.len()], 0.0);
        assert!(out.u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weighted_solve_is_second_order_with_stable_constant() {
        let study = weighted_inverse_study(-0.5, 3).unwrap();
        for w in study.windows(2) {
            let order = (w[0].error / w[1].error).log2();
            assert!(order > 1.8 && order < 2.3, "{study:?}");
        }
        let (lo, hi) = study.iter().fold((f64::INFINITY, 0.0f64), |(a, b), c| (a.min(c.constant), b.max(c.constant)));
        assert!(hi / lo - 1.0 < 0.1, "{study:?}");
    }

    #[test]
    fn source_norm_decreases_as_eps_halves() {
        let cell = disk_cell();
        let cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.5], 1e-3);
        let mesh = PolarMesh::new(Domain::Disk, &cfg.points, cfg.mesh_spec(0)).unwrap();
        let gamma = gamma_weight(&mesh, &cfg.points, mesh.spec.d_min);
        let fixed = floor_cells(&mesh, &cfg.points);
        let mut norms = Vec::new();
        let mut logs = Vec::new();
        for k in 0..4 {
            let l = cfg.log_inv_eps + k as f64 * std::f64::consts::LN_2;
            let placed = [PlacedCell::new(cell.as_ref(), Domain::Disk, 0.5, l, cfg.radius)];
            let (_, e) = assemble_cells(&mesh, &placed);
            norms.push(weighted_sup(&e, &gamma, 2.0, &|c| !fixed[c]));
            logs.push(l);
        }
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
        let fit = loglog_fit(&logs, &norms).unwrap();
        assert!(fit.slope < 0.0);
    }

    #[test]
    fn cutoff_support_and_superposition() {
        let cell = disk_cell();
        let cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.0, PI], 1e-3);
        let mesh = PolarMesh::new(Domain::Disk, &cfg.points, cfg.mesh_spec(0)).unwrap();
        let a = PlacedCell::new(cell.as_ref(), Domain::Disk, 0.0, cfg.log_inv_eps, cfg.radius);
        let b = PlacedCell::new(cell.as_ref(), Domain::Disk, PI, cfg.log_inv_eps, cfg.radius);
        let (both, _) = assemble_cells(&mesh, &[a, b]);
        let (ua, _) = assemble_cells(&mesh, &[a]);
        let (ub, _) = assemble_cells(&mesh, &[b]);
        for c in 0..mesh.len() {
            assert_eq!(both[c], ua[c] + ub[c]);
            assert!(ua[c] == 0.0 || ub[c] == 0.0);
            let x = mesh.cartesian(c);
            if (x[0] - 1.0).hypot(x[1]) > 2.0 * cfg.radius * 1.01 {
                assert_eq!(ua[c], 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.0, 0.3], 1e-3);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.points = vec![0.0];
        cfg.delta = Some(0.5);
        assert!(matches!(cfg.validate(), Err(Error::Window(_))));
        let ball = GlueConfig::new(Domain::Ball, 2.0, vec![1.0], 1e-3);
        assert!(ball.validate().is_err());
        assert!(build_cell(Domain::Disk, 2.5).is_err());
    }

    #[test]
    fn single_point_disk_contracts_and_improves_with_eps() {
        let cell = disk_cell();
        let mut ratios = Vec::new();
        for eps in [1e-3, 5e-4] {
            let cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.5], eps);
            let s = GlueProblem::new(cfg, cell.clone(), 0).unwrap().solve().unwrap();
            assert!(s.picard.lipschitz < 1.0);
            assert!(s.v_norm <= s.ball_radius);
            assert!(s.min_u > 0.0);
            ratios.push(s.picard.asymptotic_ratio);
        }
        assert!(ratios[1] < ratios[0], "{ratios:?}");
    }

    #[test]
    fn one_stage_matches_direct_gluing() {
        let cell = disk_cell();
        let cfg = GlueConfig::new(Domain::Disk, 3.0, vec![0.5], 1e-3);
        let pr = GlueProblem::new(cfg, cell, 0).unwrap();
        let direct = pr.solve().unwrap();
        let staged = multi_stage(&pr, 1).unwrap();
        if staged.stages[0].halvings == 0 {
            let d = direct.v.iter().zip(&staged.solution.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
        assert!(staged.all_passed());
    }
}
