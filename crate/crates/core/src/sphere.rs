//! Axisymmetric calculus on the half sphere `S^{N-1}_+`.
//!
//! Functions depend only on the polar angle `α ∈ [0, π/2]` measured from the
//! north pole, so `θ_N = cos α`. The surface measure restricted to such
//! functions is `c_N sin^{N-2}(α) dα`, with `c_N` the measure of `S^{N-2}`
//! (and `c_2 = 2`, which accounts for both halves of the half circle).

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid accepted by any operator in this module.
pub const MIN_NODES: usize = 4;

/// Gregory end corrections (fourth order) for the composite trapezoid rule.
const GREGORY: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

/// Measure of the unit sphere `S^k`: `2 π^{(k+1)/2} / Γ((k+1)/2)`.
pub fn unit_sphere_measure(k: usize) -> f64 {
    2.0 * PI.powf((k as f64 + 1.0) / 2.0) / gamma_half_integer(k + 1)
}

/// `Γ(j/2)` for a positive integer `j`.
fn gamma_half_integer(j: usize) -> f64 {
    assert!(j > 0);
    let (mut x, mut g) = if j % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while x < j as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Uniform polar-angle grid on `[0, π/2]` with quadrature weights for the
/// axisymmetric surface measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisymGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    step: f64,
}

impl AxisymGrid {
    pub fn new(dim: usize, n_nodes: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidGrid(format!("dimension must be >= 2, got {dim}")));
        }
        if n_nodes < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} polar nodes, got {n_nodes}"
            )));
        }
        let step = FRAC_PI_2 / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 * step).collect();
        nodes[n_nodes - 1] = FRAC_PI_2;
        let c = if dim == 2 { 2.0 } else { unit_sphere_measure(dim - 2) };
        let rule = composite_weights(n_nodes);
        let weights = nodes
            .iter()
            .zip(&rule)
            .map(|(&a, &w)| c * step * w * a.sin().powi(dim as i32 - 2))
            .collect();
        Ok(Self {
            dim,
            nodes,
            weights,
            step,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Exact measure of `S^{N-1}_+`.
    pub fn halfsphere_measure(&self) -> f64 {
        unit_sphere_measure(self.dim - 1) / 2.0
    }

    /// `Σ f_i w_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Discrete `L²(S^{N-1}_+)` inner product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn sample(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> SphericalProfile {
        SphericalProfile {
            values: self.nodes.iter().map(|&a| f(a)).collect(),
            grid: Arc::clone(self),
        }
    }
}

fn composite_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    if n >= 2 * GREGORY.len() {
        for (k, g) in GREGORY.iter().enumerate() {
            w[k] = *g;
            w[n - 1 - k] = *g;
        }
    } else {
        w[0] = 0.5;
        w[n - 1] = 0.5;
    }
    w
}

/// An axisymmetric function on the half sphere, sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalProfile {
    pub grid: Arc<AxisymGrid>,
    pub values: Vec<f64>,
}

impl SphericalProfile {
    pub fn new(grid: Arc<AxisymGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "profile has {} values for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<AxisymGrid>) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: Arc::clone(grid),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.same_grid(other), "profiles live on different grids");
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &SphericalProfile {
    type Output = SphericalProfile;
    fn add(self, rhs: Self) -> SphericalProfile {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SphericalProfile {
    type Output = SphericalProfile;
    fn sub(self, rhs: Self) -> SphericalProfile {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &SphericalProfile {
    type Output = SphericalProfile;
    fn mul(self, rhs: Self) -> SphericalProfile {
        self.zip_with(rhs, |a, b| a * b)
    }
}

/// Stencil coefficients `(lower, diag, upper)` of the discrete
/// `Δ_S f = f'' + (N-2) cot(α) f'` at an interior node.
pub(crate) fn interior_stencil(dim: usize, alpha: f64, h: f64) -> (f64, f64, f64) {
    let k = (dim as f64 - 2.0) * alpha.cos() / alpha.sin() / (2.0 * h);
    let h2 = 1.0 / (h * h);
    (h2 - k, -2.0 * h2, h2 + k)
}

/// Pole row: the regular limit `(N-1) f''(0)` with an even ghost node.
pub(crate) fn pole_stencil(dim: usize, h: f64) -> (f64, f64) {
    let c = 2.0 * (dim as f64 - 1.0) / (h * h);
    (-c, c)
}

/// Discrete Laplace–Beltrami operator applied to an axisymmetric profile.
///
/// Second-order central differences in the interior, the even-reflection limit
/// at the pole and one-sided second-order differences at the equator node.
pub fn laplace_beltrami_axisym(f: &SphericalProfile) -> Result<SphericalProfile> {
    let grid = &f.grid;
    let n = grid.len();
    if n < MIN_NODES {
        return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes")));
    }
    let h = grid.step();
    let v = &f.values;
    let mut out = vec![0.0; n];
    let (d0, u0) = pole_stencil(grid.dim(), h);
    out[0] = d0 * v[0] + u0 * v[1];
    for i in 1..n - 1 {
        let (l, d, u) = interior_stencil(grid.dim(), grid.nodes()[i], h);
        out[i] = l * v[i - 1] + d * v[i] + u * v[i + 1];
    }
    let e = n - 1;
    let a = grid.nodes()[e];
    let f2 = (2.0 * v[e] - 5.0 * v[e - 1] + 4.0 * v[e - 2] - v[e - 3]) / (h * h);
    let f1 = (3.0 * v[e] - 4.0 * v[e - 1] + v[e - 2]) / (2.0 * h);
    out[e] = f2 + (grid.dim() as f64 - 2.0) * a.cos() / a.sin() * f1;
    SphericalProfile::new(Arc::clone(grid), out)
}

/// `∫_{S^{N-1}_+} f dσ` by the grid quadrature.
pub fn quad_halfsphere(f: &SphericalProfile) -> f64 {
    f.grid.integrate(&f.values)
}

/// First Dirichlet eigenfunction `θ_N / ‖θ_N‖_{L²}` (eigenvalue `N-1`),
/// normalised with the grid quadrature.
pub fn phi1(grid: &Arc<AxisymGrid>) -> SphericalProfile {
    let c = grid.sample(f64::cos);
    let norm = grid.inner(&c.values, &c.values).sqrt();
    let mut out = c.scale(1.0 / norm);
    let last = out.values.len() - 1;
    out.values[last] = 0.0;
    out
}

/// The constants `a_N`, `b_N` of the log-corrected ansatz `a_N t^{-b_N} φ_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzConstants {
    pub a: f64,
    pub b: f64,
}

/// `b_N = (N-1)/2` and `a_N = [2/(N(N-1)) ∫ φ_1^{2N/(N-1)}]^{-(N-1)/2}`.
pub fn constants(grid: &Arc<AxisymGrid>) -> AnsatzConstants {
    let n = grid.dim() as f64;
    let p1 = phi1(grid);
    let moment = quad_halfsphere(&p1.map(|v| v.abs().powf(2.0 * n / (n - 1.0))));
    AnsatzConstants {
        a: (2.0 / (n * (n - 1.0)) * moment).powf(-(n - 1.0) / 2.0),
        b: (n - 1.0) / 2.0,
    }
}

/// `Π^⊥ h = h - φ_1 ⟨h, φ_1⟩`.
pub fn project_perp(h: &SphericalProfile, phi1: &SphericalProfile) -> SphericalProfile {
    let c = h.grid.inner(&h.values, &phi1.values);
    h.zip_with(phi1, |a, b| a - c * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: usize, n: usize) -> Arc<AxisymGrid> {
        Arc::new(AxisymGrid::new(dim, n).unwrap())
    }

    #[test]
    fn sphere_measures() {
        assert!((unit_sphere_measure(1) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_measure(2) - 4.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_measure(0) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_measure(3) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(matches!(AxisymGrid::new(2, 3), Err(Error::InvalidGrid(_))));
        assert!(AxisymGrid::new(1, 10).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let g2 = grid(2, 400);
        assert!((quad_halfsphere(&g2.sample(|_| 1.0)) - PI).abs() < 1e-10);
        assert!((quad_halfsphere(&g2.sample(|a| a.cos().powi(2))) - PI / 2.0).abs() < 1e-8);
        let g3 = grid(3, 400);
        assert!((quad_halfsphere(&g3.sample(|_| 1.0)) - 2.0 * PI).abs() < 1e-8);
        assert!((quad_halfsphere(&g3.sample(|a| a.cos().powi(2))) - 2.0 * PI / 3.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_polynomials_in_cos() {
        // ∫ cos^k over S^1_+ (two quarter arcs) and S^2_+ (2π/(k+1))
        let wallis = [PI / 2.0, 1.0, PI / 4.0, 2.0 / 3.0, 3.0 * PI / 16.0];
        for n in [400, 801] {
            let g2 = grid(2, n);
            let g3 = grid(3, n);
            for k in 0..=4 {
                let e2 = 2.0 * wallis[k];
                let e3 = 2.0 * PI / (k as f64 + 1.0);
                assert!((quad_halfsphere(&g2.sample(|a| a.cos().powi(k as i32))) - e2).abs() < 1e-8);
                assert!((quad_halfsphere(&g3.sample(|a| a.cos().powi(k as i32))) - e3).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn laplace_beltrami_examples() {
        let g = grid(2, 200);
        let one = laplace_beltrami_axisym(&g.sample(|_| 1.0)).unwrap();
        assert!(one.sup_norm() < 1e-9);
        let h2 = g.step().powi(2);
        let f = g.sample(|a| (3.0 * a).cos());
        let lf = laplace_beltrami_axisym(&f).unwrap();
        let err = lf
            .values
            .iter()
            .zip(g.nodes())
            .fold(0.0f64, |m, (v, a)| m.max((v + 9.0 * (3.0 * a).cos()).abs()));
        assert!(err < 10.0 * h2, "err {err}");
        let g3 = grid(3, 200);
        let c = laplace_beltrami_axisym(&g3.sample(f64::cos)).unwrap();
        let err = c
            .values
            .iter()
            .zip(g3.nodes())
            .fold(0.0f64, |m, (v, a)| m.max((v + 2.0 * a.cos()).abs()));
        assert!(err < g3.step().powi(2), "err {err}");
    }

    #[test]
    fn laplace_beltrami_needs_four_nodes() {
        let g = Arc::new(AxisymGrid::new(2, 4).unwrap());
        assert!(laplace_beltrami_axisym(&g.sample(f64::cos)).is_ok());
    }

    #[test]
    fn phi1_normalisation() {
        for dim in [2, 3] {
            let g = grid(dim, 400);
            let p = phi1(&g);
            assert!((g.inner(&p.values, &p.values) - 1.0).abs() < 1e-8);
            let expect = if dim == 2 { (PI / 2.0).sqrt() } else { (2.0 * PI / 3.0).sqrt() };
            for (v, a) in p.values.iter().zip(g.nodes()) {
                assert!((v - a.cos() / expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ansatz_constants() {
        let c2 = constants(&grid(2, 400));
        assert_eq!(c2.b, 0.5);
        assert!((c2.a - (2.0 * PI / 3.0).sqrt()).abs() < 1e-8, "{}", c2.a);
        let c3 = constants(&grid(3, 400));
        assert_eq!(c3.b, 1.0);
        // N = 3: ∫φ1^3 = (2π/3)^{-3/2} 2π/4, a_3 = 3/∫φ1^3
        let m = (2.0 * PI / 3.0f64).powf(-1.5) * PI / 2.0;
        assert!((c3.a - 3.0 / m).abs() < 1e-7, "{}", c3.a);
    }

    #[test]
    fn projection_properties() {
        let g = grid(3, 301);
        let p = phi1(&g);
        assert!(project_perp(&p, &p).sup_norm() < 1e-12);
        let h = g.sample(|a| (a * 2.0).sin() * a.cos() + 0.3 * a.cos().powi(3));
        let ph = project_perp(&h, &p);
        assert!(g.inner(&ph.values, &p.values).abs() < 1e-12);
        let pph = project_perp(&ph, &p);
        assert!((&pph - &ph).sup_norm() < 1e-12);
        let sum = &p + &ph;
        assert!((&project_perp(&sum, &p) - &ph).sup_norm() < 1e-12);
        // self-adjointness
        let k = g.sample(|a| a.cos() * (1.0 + a));
        let pk = project_perp(&k, &p);
        let lhs = g.inner(&ph.values, &k.values);
        let rhs = g.inner(&h.values, &pk.values);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
