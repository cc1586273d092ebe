//! Modal decomposition of the discrete axisymmetric Laplace–Beltrami operator
//! with a Dirichlet condition at the equator `α = π/2`.
//!
//! The stencil of [`crate::sphere::laplace_beltrami_axisym`] restricted to the
//! interior unknowns is tridiagonal but not symmetric. A diagonal similarity
//! makes it symmetric, after which separable cylinder problems reduce to one
//! scalar two-point problem per mode.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sphere::{interior_stencil, pole_stencil, AxisymGrid};

/// Bands `(lower, diag, upper)` of `Δ_S` on the unknowns `α_0 .. α_{n-2}`
/// (the equator value is fixed to zero).
pub fn dirichlet_bands(grid: &AxisymGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = grid.len() - 1;
    let h = grid.step();
    let mut lo = vec![0.0; m];
    let mut di = vec![0.0; m];
    let mut up = vec![0.0; m];
    let (d0, u0) = pole_stencil(grid.dim(), h);
    di[0] = d0;
    up[0] = u0;
    for i in 1..m {
        let (l, d, u) = interior_stencil(grid.dim(), grid.nodes()[i], h);
        lo[i] = l;
        di[i] = d;
        up[i] = u;
    }
    up[m - 1] = 0.0;
    (lo, di, up)
}

/// Eigen-decomposition `Δ_S = V Λ V^{-1}` of the Dirichlet-reduced stencil.
#[derive(Debug, Clone)]
pub struct AngularModes {
    grid: Arc<AxisymGrid>,
    eigenvalues: Vec<f64>,
    /// `V^{-1} = Q^T D`
    forward: DMatrix<f64>,
    /// `V = D^{-1} Q`
    backward: DMatrix<f64>,
}

impl AngularModes {
    pub fn new(grid: &Arc<AxisymGrid>) -> Result<Self> {
        if grid.dim() > 3 {
            return Err(Error::InvalidGrid(format!(
                "modal solver supports N in {{2, 3}}, got N = {}",
                grid.dim()
            )));
        }
        let (lo, di, up) = dirichlet_bands(grid);
        let m = di.len();
        let mut s = vec![1.0; m];
        let mut sym = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            sym[(i, i)] = di[i];
            if i + 1 < m {
                let prod = up[i] * lo[i + 1];
                if prod <= 0.0 {
                    return Err(Error::InvalidGrid(format!(
                        "stencil coupling {i}-{} is not symmetrisable",
                        i + 1
                    )));
                }
                s[i + 1] = s[i] * (up[i] / lo[i + 1]).sqrt();
                sym[(i, i + 1)] = prod.sqrt();
                sym[(i + 1, i)] = prod.sqrt();
            }
        }
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..m).collect();
        // least negative eigenvalue first: mode 0 approximates φ₁
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let q = DMatrix::from_fn(m, m, |i, j| eig.eigenvectors[(i, order[j])]);
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let forward = DMatrix::from_fn(m, m, |j, i| q[(i, j)] * s[i]);
        let backward = DMatrix::from_fn(m, m, |i, j| q[(i, j)] / s[i]);
        Ok(Self {
            grid: Arc::clone(grid),
            eigenvalues,
            forward,
            backward,
        })
    }

    pub fn grid(&self) -> &Arc<AxisymGrid> {
        &self.grid
    }

    /// Eigenvalues of the discrete `Δ_S`, sorted from the top (`≈ -(N-1)`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Modal coefficients of a nodal profile (the equator value is ignored).
    pub fn to_modes(&self, values: &[f64]) -> Vec<f64> {
        let m = self.n_modes();
        let v = DVector::from_column_slice(&values[..m]);
        (&self.forward * v).as_slice().to_vec()
    }

    /// Nodal profile (with zero equator value) from modal coefficients.
    pub fn from_modes(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        let mut out = (&self.backward * c).as_slice().to_vec();
        out.push(0.0);
        out
    }

    /// Batched [`AngularModes::to_modes`]: columns of `values` are profiles.
    pub fn to_modes_batch(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.n_modes();
        &self.forward * values.rows(0, m)
    }

    /// Batched [`AngularModes::from_modes`]; appends the zero equator row.
    pub fn from_modes_batch(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        let body = &self.backward * coeffs;
        let mut out = DMatrix::zeros(body.nrows() + 1, body.ncols());
        out.rows_mut(0, body.nrows()).copy_from(&body);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{laplace_beltrami_axisym, SphericalProfile};

    #[test]
    fn top_eigenvalue_is_n_minus_one() {
        for dim in [2usize, 3] {
            let g = Arc::new(AxisymGrid::new(dim, 201).unwrap());
            let modes = AngularModes::new(&g).unwrap();
            let e = modes.eigenvalues();
            assert!((e[0] + (dim as f64 - 1.0)).abs() < 1e-3, "{}", e[0]);
            // next odd zonal harmonic: k = 3
            assert!((e[1] + 3.0 * (1.0 + dim as f64)).abs() < 1e-2, "{}", e[1]);
        }
    }

    #[test]
    fn round_trip_and_diagonalisation() {
        let g = Arc::new(AxisymGrid::new(3, 41).unwrap());
        let modes = AngularModes::new(&g).unwrap();
        let f = g.sample(|a| a.cos() * (1.0 + a * a));
        let c = modes.to_modes(&f.values);
        let back = modes.from_modes(&c);
        for (a, b) in f.values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
        let lc: Vec<f64> = c.iter().zip(modes.eigenvalues()).map(|(c, l)| c * l).collect();
        let lf = modes.from_modes(&lc);
        let direct = laplace_beltrami_axisym(&SphericalProfile::new(g.clone(), back).unwrap()).unwrap();
        for i in 0..g.len() - 1 {
            assert!((lf[i] - direct.values[i]).abs() < 1e-7 * (1.0 + direct.values[i].abs()));
        }
    }

    #[test]
    fn rejects_high_dimension() {
        let g = Arc::new(AxisymGrid::new(4, 21).unwrap());
        assert!(AngularModes::new(&g).is_err());
    }
}
