//! Fermi coordinates `y = (s, z)` at a boundary point `ξ` of the unit disk or ball:
//! `s` is the geodesic position on the sphere (arc length from `ξ`), `z = 1 - |x|`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Disk,
    Ball,
}

impl Domain {
    pub fn dim(self) -> usize {
        match self {
            Domain::Disk => 2,
            Domain::Ball => 3,
        }
    }
}

/// Chart around `ξ ∈ ∂Ω`. Tangent frame `e_k`, inner normal `-ξ`.
#[derive(Debug, Clone)]
pub struct FermiChart {
    pub domain: Domain,
    xi: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl FermiChart {
    /// `ξ` given by its angle (disk) or by spherical angles `(ϑ, φ)` (ball).
    pub fn new(domain: Domain, angles: &[f64]) -> Result<Self> {
        match (domain, angles) {
            (Domain::Disk, [t]) => Ok(Self {
                domain,
                xi: vec![t.cos(), t.sin()],
                frame: vec![vec![-t.sin(), t.cos()]],
            }),
            (Domain::Ball, [th, ph]) => {
                let (st, ct, sp, cp) = (th.sin(), th.cos(), ph.sin(), ph.cos());
                Ok(Self {
                    domain,
                    xi: vec![st * cp, st * sp, ct],
                    frame: vec![vec![ct * cp, ct * sp, -st], vec![-sp, cp, 0.0]],
                })
            }
            _ => Err(Error::Config(format!(
                "a boundary point of the {domain:?} needs {} angle(s), got {}",
                domain.dim() - 1,
                angles.len()
            ))),
        }
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `x(y)` for `y = (s_1, .., s_{N-1}, z)`.
    pub fn to_cartesian(&self, y: &[f64]) -> Vec<f64> {
        let n = self.xi.len();
        let (s, z) = (&y[..n - 1], y[n - 1]);
        let a = norm(s);
        let mut dir = self.xi.iter().map(|v| v * a.cos()).collect::<Vec<_>>();
        if a > 0.0 {
            for (k, e) in self.frame.iter().enumerate() {
                let c = a.sin() * s[k] / a;
                for (d, ei) in dir.iter_mut().zip(e) {
                    *d += c * ei;
                }
            }
        }
        dir.iter().map(|v| (1.0 - z) * v).collect()
    }

    /// Inverse of [`FermiChart::to_cartesian`] away from the antipode.
    pub fn from_cartesian(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let c = dot(x, &self.xi) / r;
        let tang: Vec<f64> = self.frame.iter().map(|e| dot(x, e) / r).collect();
        let st = norm(&tang);
        let a = st.atan2(c);
        let mut y: Vec<f64> = if st > 0.0 {
            tang.iter().map(|t| a * t / st).collect()
        } else {
            vec![0.0; tang.len()]
        };
        y.push(1.0 - r);
        y
    }

    /// Second-order Taylor expansion of the inverse chart at `ξ`:
    /// `s ≈ a (1 + b)`, `z ≈ b - |a|²/2` with `a`, `b` the tangential and
    /// normal components of `x - ξ`.
    pub fn taylor2_inverse(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.xi).map(|(u, v)| u - v).collect();
        let b = -dot(&d, &self.xi);
        let a: Vec<f64> = self.frame.iter().map(|e| dot(&d, e)).collect();
        let a2 = dot(&a, &a);
        let mut y: Vec<f64> = a.iter().map(|v| v * (1.0 + b)).collect();
        y.push(b - 0.5 * a2);
        y
    }

    /// `∂x/∂y` by central differences; columns are the `y` directions.
    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let h = 1e-6;
        DMatrix::from_fn(n, n, |i, j| {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[j] += h;
            ym[j] -= h;
            (self.to_cartesian(&yp)[i] - self.to_cartesian(&ym)[i]) / (2.0 * h)
        })
    }

    /// Column `k` of the expected Jacobian at `ξ`: tangent `e_k`, then `-ξ`.
    pub fn frame_matrix(&self) -> DMatrix<f64> {
        let n = self.xi.len();
        DMatrix::from_fn(n, n, |i, j| if j + 1 < n { self.frame[j][i] } else { -self.xi[i] })
    }

    /// `|Δ_x f(x(y)) - Δ_y (f∘x)(y)|` with both Laplacians by central
    /// differences of step `h`, the flat one in `y`.
    pub fn laplacian_discrepancy(&self, f: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> f64 {
        let x = self.to_cartesian(y);
        let lap = |g: &dyn Fn(&[f64]) -> f64, p: &[f64]| {
            let c = g(p);
            (0..p.len())
                .map(|k| {
                    let mut a = p.to_vec();
                    let mut b = p.to_vec();
                    a[k] += h;
                    b[k] -= h;
                    (g(&a) - 2.0 * c + g(&b)) / (h * h)
                })
                .sum::<f64>()
        };
        let pulled = |yy: &[f64]| f(&self.to_cartesian(yy));
        (lap(f, &x) - lap(&pulled, y)).abs()
    }
}

/// Laplacian coefficients in the axisymmetric Fermi variables `(s, z)`,
/// `s` the geodesic distance to `ξ`:
/// `Δ_x f = f_zz + a(z) f_z + b(z) (f_ss + k(s) f_s)` and
/// `Δ_flat f = f_zz + f_ss + k₀(s) f_s`.
#[derive(Debug, Clone, Copy)]
pub struct Metric {
    pub domain: Domain,
}

impl Metric {
    pub fn a(&self, z: f64) -> f64 {
        -((self.domain.dim() - 1) as f64) / (1.0 - z)
    }

    /// `b - 1 = (1-z)^{-2} - 1`.
    pub fn b_minus_one(&self, z: f64) -> f64 {
        z * (2.0 - z) / ((1.0 - z) * (1.0 - z))
    }

    pub fn b(&self, z: f64) -> f64 {
        1.0 / ((1.0 - z) * (1.0 - z))
    }

    /// `b k(s) - k₀(s)`.
    pub fn k_gap(&self, s: f64, z: f64) -> f64 {
        match self.domain {
            Domain::Disk => 0.0,
            Domain::Ball => {
                let s = s.abs();
                let cot_gap = if s < 1e-3 {
                    -s / 3.0 - s * s * s / 45.0
                } else {
                    1.0 / s.tan() - 1.0 / s
                };
                cot_gap + self.b_minus_one(z) / s.tan()
            }
        }
    }

    pub fn k(&self, s: f64) -> f64 {
        match self.domain {
            Domain::Disk => 0.0,
            Domain::Ball => 1.0 / s.abs().tan(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::loglog_fit;

    fn charts() -> Vec<FermiChart> {
        vec![
            FermiChart::new(Domain::Disk, &[0.7]).unwrap(),
            FermiChart::new(Domain::Ball, &[1.1, -0.4]).unwrap(),
        ]
    }

    #[test]
    fn jacobian_at_xi_is_the_frame() {
        for c in charts() {
            let n = c.xi().len();
            let j = c.jacobian(&vec![0.0; n]);
            let f = c.frame_matrix();
            assert!((&j - &f).amax() < 1e-9);
            // the frame is orthonormal, so the chart is an isometry at ξ
            assert!((f.transpose() * &f - DMatrix::identity(n, n)).amax() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_taylor_inverse() {
        for c in charts() {
            let n = c.xi().len();
            let dir: Vec<f64> = (0..n).map(|k| [0.6, -0.3, 0.5][k]).collect();
            let mut errs = Vec::new();
            let mut hs = Vec::new();
            for e in 1..5 {
                let h = 10f64.powi(-e);
                let y: Vec<f64> = dir.iter().map(|d| d * h).collect();
                let x = c.to_cartesian(&y);
                let back = c.from_cartesian(&x);
                assert!(back.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-13));
                let t = c.taylor2_inverse(&x);
                errs.push(t.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                hs.push(h);
            }
            let fit = loglog_fit(&hs, &errs).unwrap();
            assert!((fit.slope - 3.0).abs() < 0.1, "slope {}", fit.slope);
        }
    }

    #[test]
    fn laplacian_discrepancy_is_first_order() {
        for c in charts() {
            let n = c.xi().len();
            let xi = c.xi().to_vec();
            let f = move |x: &[f64]| x.iter().zip(&xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let dir: Vec<f64> = (0..n).map(|k| [0.5, 0.4, 0.6][k]).collect();
            let mut d = Vec::new();
            let mut hs = Vec::new();
            for e in 0..4 {
                let t = 0.1 * 0.5f64.powi(e);
                let y: Vec<f64> = dir.iter().map(|v| v * t).collect();
                d.push(c.laplacian_discrepancy(&f, &y, 1e-4));
                hs.push(t);
            }
            let fit = loglog_fit(&hs, &d).unwrap();
            assert!((fit.slope - 1.0).abs() < 0.15, "slope {}", fit.slope);
        }
    }

    #[test]
    fn metric_matches_chart_laplacian() {
        // f(s, z) = z² cos s has Δ_x computed two ways
        for dom in [Domain::Disk, Domain::Ball] {
            let m = Metric { domain: dom };
            let chart = FermiChart::new(dom, if dom == Domain::Disk { &[0.0][..] } else { &[0.3, 0.2][..] }).unwrap();
            let (s, z): (f64, f64) = (0.3, 0.2);
            let g = |s: f64, z: f64| z * z * s.cos();
            let lap = 2.0 * s.cos()
                + m.a(z) * 2.0 * z * s.cos()
                + m.b(z) * (-z * z * s.cos() + m.k(s) * (-z * z * s.sin()));
            let f = |x: &[f64]| {
                let y = chart.from_cartesian(x);
                let n = y.len();
                let sv = y[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
                g(sv, y[n - 1])
            };
            let mut y = vec![0.0; dom.dim()];
            y[0] = s;
            y[dom.dim() - 1] = z;
            let x = chart.to_cartesian(&y);
            let h = 1e-4;
            let num: f64 = (0..x.len())
                .map(|k| {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[k] += h;
                    b[k] -= h;
                    (f(&a) - 2.0 * f(&x) + f(&b)) / (h * h)
                })
                .sum();
            assert!((num - lap).abs() < 1e-5, "{dom:?}: {num} vs {lap}");
            let gap = m.b(z) * m.k(s) - if dom == Domain::Ball { 1.0 / s } else { 0.0 };
            assert!((m.k_gap(s, z) - gap).abs() < 1e-12);
        }
    }
}
