//! Very-weak identity quadrature, integrability trends and cone probes.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::fermi::Domain;
use super::mesh::PolarMesh;
use super::{GlueSolution, PlacedCell};

/// `w = (1 - |x|²) Π_i (c_i + a_i·x)^{k_i}`, vanishing on the unit sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    factors: Vec<(f64, Vec<f64>, i32)>,
}

impl TestFunction {
    fn new(name: &str, factors: Vec<(f64, Vec<f64>, i32)>) -> Self {
        Self {
            name: name.into(),
            factors,
        }
    }

    /// `(w, Δw)` at `x`.
    pub fn eval(&self, x: &[f64]) -> (f64, f64) {
        let n = x.len();
        let mut p = 1.0;
        let mut grad_log = vec![0.0; n];
        let mut lap_sq = 0.0;
        for (c, a, k) in &self.factors {
            let l = c + a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
            let kf = *k as f64;
            p *= l.powi(*k);
            for (g, ai) in grad_log.iter_mut().zip(a) {
                *g += kf * ai / l;
            }
            lap_sq += kf * a.iter().map(|v| v * v).sum::<f64>() / (l * l);
        }
        let gl2: f64 = grad_log.iter().map(|v| v * v).sum();
        let lap_p = p * (gl2 - lap_sq);
        let grad_p: Vec<f64> = grad_log.iter().map(|v| p * v).collect();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let g = 1.0 - r2;
        let grad_dot: f64 = x.iter().zip(&grad_p).map(|(xi, gp)| -2.0 * xi * gp).sum();
        (g * p, -2.0 * n as f64 * p + 2.0 * grad_dot + g * lap_p)
    }
}

/// Eight positive test functions. On the ball they depend on `(|x'|, x_3)` only.
pub fn test_suite(domain: Domain) -> Vec<TestFunction> {
    let f = TestFunction::new;
    match domain {
        Domain::Disk => {
            let ex = vec![1.0, 0.0];
            let ey = vec![0.0, 1.0];
            vec![
                f("1", vec![]),
                f("2+x", vec![(2.0, ex.clone(), 1)]),
                f("2+y", vec![(2.0, ey.clone(), 1)]),
                f("(2+x)^2", vec![(2.0, ex.clone(), 2)]),
                f("(2+x)(2+y)", vec![(2.0, ex.clone(), 1), (2.0, ey.clone(), 1)]),
                f("(2+y)^2", vec![(2.0, ey.clone(), 2)]),
                f("(2+x)^3", vec![(2.0, ex, 3)]),
                f("(2+y)^3", vec![(2.0, ey, 3)]),
            ]
        }
        Domain::Ball => {
            let ez = vec![0.0, 0.0, 1.0];
            let mz = vec![0.0, 0.0, -1.0];
            vec![
                f("1", vec![]),
                f("2+z", vec![(2.0, ez.clone(), 1)]),
                f("3-z", vec![(3.0, mz.clone(), 1)]),
                f("(2+z)^2", vec![(2.0, ez.clone(), 2)]),
                f("(2+z)(3-z)", vec![(2.0, ez.clone(), 1), (3.0, mz.clone(), 1)]),
                f("(3-z)^2", vec![(3.0, mz.clone(), 2)]),
                f("(2+z)^3", vec![(2.0, ez.clone(), 3)]),
                f("(2+z)^2(3-z)", vec![(2.0, ez, 2), (3.0, mz, 1)]),
            ]
        }
    }
}

/// `∫ (u Δw + |u|^q w - g w)` by the midpoint rule on the mesh cells.
pub fn very_weak_defect(mesh: &PolarMesh, u: &[f64], g: Option<&[f64]>, q: f64, w: &TestFunction) -> f64 {
    (0..mesh.len())
        .map(|c| {
            let (wv, lw) = w.eval(&mesh.cartesian(c));
            let gc = g.map_or(0.0, |g| g[c]);
            mesh.weight(c) * (u[c] * lw + u[c].abs().powf(q) * wv - gc * wv)
        })
        .sum()
}

/// Very-weak defect of a glued solution. The cell part is integrated by
/// parts: for an exact cell `∫(u_ε Δw + u_ε^q w) = ∫ E w`, the boundary
/// flux at `ξ` vanishing, so the quadrature only meets bounded integrands.
pub fn glued_defect(sol: &GlueSolution, w: &TestFunction) -> f64 {
    let q = sol.config.p;
    let mesh = &sol.mesh;
    (0..mesh.len())
        .map(|c| {
            let (wv, lw) = w.eval(&mesh.cartesian(c));
            let (b, v) = (sol.base[c], sol.v[c]);
            let nl = (b + v).abs().powf(q) - b.powf(q);
            mesh.weight(c) * ((sol.source[c] + nl) * wv + v * lw)
        })
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralTrend {
    pub name: String,
    pub values: Vec<f64>,
    /// Successive differences.
    pub differences: Vec<f64>,
}

impl IntegralTrend {
    fn new(name: &str, values: Vec<f64>) -> Self {
        let differences = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        Self {
            name: name.into(),
            values,
            differences,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VeryWeakReport {
    pub levels: Vec<u32>,
    pub names: Vec<String>,
    /// `defects[f][level]`.
    pub defects: Vec<Vec<f64>>,
    /// `orders[f][k] = log2(|D_k| / |D_{k+1}|)`.
    pub orders: Vec<Vec<f64>>,
    pub l1: IntegralTrend,
    pub weighted_power: IntegralTrend,
    pub min_u: Vec<f64>,
}

impl VeryWeakReport {
    /// Smallest observed order over all functions and refinements.
    pub fn min_order(&self) -> f64 {
        self.orders.iter().flatten().fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

/// Very-weak defects and integral trends over a refinement sequence.
pub fn verify_very_weak(levels: &[GlueSolution], suite: &[TestFunction]) -> VeryWeakReport {
    let defects: Vec<Vec<f64>> = suite
        .iter()
        .map(|w| levels.iter().map(|s| glued_defect(s, w)).collect())
        .collect();
    let orders = defects
        .iter()
        .map(|d| d.windows(2).map(|w| (w[0].abs() / w[1].abs()).log2()).collect())
        .collect();
    let l1 = levels
        .iter()
        .map(|s| {
            let u = s.u_cells();
            (0..s.mesh.len()).map(|c| s.mesh.weight(c) * u[c].abs()).sum()
        })
        .collect();
    let wp = levels.iter().map(weighted_power_integral).collect();
    VeryWeakReport {
        levels: levels.iter().map(|s| s.level).collect(),
        names: suite.iter().map(|w| w.name.clone()).collect(),
        defects,
        orders,
        l1: IntegralTrend::new("int u", l1),
        weighted_power: IntegralTrend::new("int u^q dist", wp),
        min_u: levels.iter().map(|s| s.min_u).collect(),
    }
}

/// `∫ u^q dist(x, ∂Ω)`: midpoint rule off the floor cells, and the cell's
/// own polar integral over a half-ball of the floor's measure at each point.
pub fn weighted_power_integral(sol: &GlueSolution) -> f64 {
    let q = sol.config.p;
    let mesh = &sol.mesh;
    let u = sol.u_cells();
    let bulk: f64 = (0..mesh.len())
        .filter(|c| !sol.fixed[*c])
        .map(|c| mesh.weight(c) * u[c].abs().powf(q) * (1.0 - mesh.polar(c).0))
        .sum();
    let mut tail = 0.0;
    for (p, cell) in sol.points.iter().zip(sol.placed()) {
        let measure: f64 = mesh.corner_cells(*p).iter().map(|c| mesh.weight(*c)).sum();
        let rho = match mesh.domain {
            Domain::Disk => (2.0 * measure / PI).sqrt(),
            Domain::Ball => (3.0 * measure / (2.0 * PI)).cbrt(),
        };
        tail += floor_tail(&cell, rho, q);
    }
    bulk + tail
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫_{B_+(ρ₀)} U^q z dx` for a placed cell, integrated in `τ = log(ρ₀/ρ)`
/// with the substitution `τ = e^x - 1` and a power-law tail.
pub fn floor_tail(cell: &PlacedCell<'_>, rho0: f64, q: f64) -> f64 {
    let dim = cell.metric.domain.dim();
    // dx = ρ^{n-1} dρ dσ, z = ρ cos α, dρ = ρ dτ: density (ρ^{(n+1)/q} U)^q
    let power = (dim as f64 + 1.0) / q;
    let dens = |tau: f64| {
        let log_rho = rho0.ln() - tau;
        let g = |a: f64| {
            let u = cell.profile.scaled_weighted(log_rho, a, cell.log_inv_eps, power);
            let meas = if dim == 2 { 2.0 } else { 2.0 * PI * a.sin() };
            u.max(0.0).powf(q) * a.cos() * meas
        };
        simpson(&g, 0.0, FRAC_PI_2, 64)
    };
    let x_max = (1e6f64).ln();
    let body = simpson(&|x: f64| dens(x.exp() - 1.0) * x.exp(), 0.0, x_max, 600);
    // tail ∫_{τ₁}^∞ c τ^{-k}: k from the last decade
    let (t1, t0) = (x_max.exp() - 1.0, 0.1 * x_max.exp());
    let (d1, d0) = (dens(t1), dens(t0));
    if d1 <= 0.0 || d0 <= 0.0 {
        return body;
    }
    let k = (d0 / d1).ln() / (t1 / t0).ln();
    body + if k > 1.0 { d1 * t1 / (k - 1.0) } else { f64::INFINITY }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub angle: f64,
    /// Angle of the ray from the inner normal.
    pub alpha: f64,
    pub distances: Vec<f64>,
    pub values: Vec<f64>,
    pub increasing: bool,
    pub decreasing: bool,
    /// `u(last) / u(first)`.
    pub ratio: f64,
    /// `u · d^{n-1} (log 1/d)^{(n-1)/2}`.
    pub scaled: Vec<f64>,
}

/// Samples `u` along the ray at angle `alpha` from the inner normal at the
/// boundary point `angle`, at the given distances.
pub fn nontangential_probe(sol: &GlueSolution, angle: f64, alpha: f64, distances: &[f64]) -> ProbeReport {
    let domain = sol.config.domain;
    let n = domain.dim() as f64;
    let values: Vec<f64> = distances
        .iter()
        .map(|&d| {
            let (s, z) = (d * alpha.sin(), d * alpha.cos());
            let a = match domain {
                Domain::Disk => angle + s,
                Domain::Ball => {
                    if angle < FRAC_PI_2 {
                        angle + s
                    } else {
                        angle - s
                    }
                }
            };
            sol.u_polar(1.0 - z, a)
        })
        .collect();
    let scaled = distances
        .iter()
        .zip(&values)
        .map(|(d, u)| u * d.powf(n - 1.0) * (1.0 / d).ln().powf(0.5 * (n - 1.0)))
        .collect();
    ProbeReport {
        angle,
        alpha,
        distances: distances.to_vec(),
        increasing: values.windows(2).all(|w| w[1] > w[0]),
        decreasing: values.windows(2).all(|w| w[1] < w[0]),
        ratio: values.last().unwrap() / values[0],
        values,
        scaled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glue::mesh::MeshSpec;

    #[test]
    fn test_functions_vanish_and_laplacian_is_right() {
        for dom in [Domain::Disk, Domain::Ball] {
            let x: Vec<f64> = if dom == Domain::Disk { vec![0.3, -0.2] } else { vec![0.3, 0.0, -0.2] };
            for w in test_suite(dom) {
                let mut b = x.clone();
                let nrm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                b.iter_mut().for_each(|v| *v /= nrm);
                assert!(w.eval(&b).0.abs() < 1e-14);
                assert!(w.eval(&x).0 > 0.0);
                let h = 1e-4;
                let num: f64 = (0..x.len())
                    .map(|k| {
                        let mut p = x.clone();
                        let mut m = x.clone();
                        p[k] += h;
                        m[k] -= h;
                        (w.eval(&p).0 - 2.0 * w.eval(&x).0 + w.eval(&m).0) / (h * h)
                    })
                    .sum();
                assert!((num - w.eval(&x).1).abs() < 1e-5, "{}", w.name);
            }
        }
    }

    #[test]
    fn smooth_manufactured_solution_has_small_defect() {
        // u = (1-|x|²)(1 + x_N/2), g = Δu + u³: the identity holds up to quadrature error
        for dom in [Domain::Disk, Domain::Ball] {
            let spec = MeshSpec {
                d_min: 1e-4,
                eta: 0.3,
                h_max: 0.02,
                level: 0,
            };
            let m = PolarMesh::new(dom, &[0.0], spec).unwrap();
            let n = dom.dim() as f64;
            let (mut u, mut g) = (vec![0.0; m.len()], vec![0.0; m.len()]);
            for c in 0..m.len() {
                let x = m.cartesian(c);
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let xk = *x.last().unwrap();
                let l = 1.0 + 0.5 * xk;
                u[c] = (1.0 - r2) * l;
                let lap = -2.0 * n * l - 2.0 * xk;
                g[c] = lap + u[c].powi(3);
            }
            for w in test_suite(dom) {
                let d = very_weak_defect(&m, &u, Some(&g), 3.0, &w);
                assert!(d.abs() < 2e-3, "{dom:?} {}: {d}", w.name);
            }
        }
    }
}
