//! Cutoff, rescaled half-space cells placed at boundary points, and the
//! source `E = Δu_ε + u_ε^q` they generate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use super::fermi::{Domain, Metric};
use crate::connection::{solve_connection, ConnectionConfig, ConnectionCell};
use crate::critical::{fixed_point_solve, CellSystem, CriticalCell, CriticalConfig};
use crate::error::{Error, Result};
use crate::halfspace::cutoff;
use crate::params::{critical_exponent, ExponentParams};

/// A positive solution of `Δu + u^q = 0` in the upper half-space near the
/// origin, vanishing on the flat boundary away from it.
pub trait CellProfile: Send + Sync {
    fn dim(&self) -> usize;
    fn exponent(&self) -> f64;
    /// `ε^{-m} u₁`-type rescaling with `log(1/ε) = log_inv_eps`, at distance
    /// `rho` and angle `alpha` from the inner normal.
    fn scaled(&self, rho: f64, alpha: f64, log_inv_eps: f64) -> f64;

    /// `ρ^power · scaled(ρ, α)` given `log ρ`, usable far below `f64` range.
    fn scaled_weighted(&self, log_rho: f64, alpha: f64, log_inv_eps: f64, power: f64) -> f64 {
        (power * log_rho).exp() * self.scaled(log_rho.exp(), alpha, log_inv_eps)
    }
}

impl CellProfile for CriticalCell {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn exponent(&self) -> f64 {
        self.params.p
    }

    /// `ε^{n-1} u₁(ε y) = ρ^{1-n} φ(t_* + log(1/ε) - log ρ, α)`.
    fn scaled(&self, rho: f64, alpha: f64, log_inv_eps: f64) -> f64 {
        let n = self.params.n();
        rho.powf(1.0 - n) * self.phi_at(self.t_star() + log_inv_eps - rho.ln(), alpha)
    }

    fn scaled_weighted(&self, log_rho: f64, alpha: f64, log_inv_eps: f64, power: f64) -> f64 {
        let n = self.params.n();
        ((power + 1.0 - n) * log_rho).exp() * self.phi_at(self.t_star() + log_inv_eps - log_rho, alpha)
    }
}

impl CellProfile for ConnectionCell {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn exponent(&self) -> f64 {
        self.params.p
    }

    /// `λ^m u₁(λ y)` with `λ = 1/ε`.
    fn scaled(&self, rho: f64, alpha: f64, log_inv_eps: f64) -> f64 {
        (self.params.m * log_inv_eps).exp() * self.u_polar(rho * log_inv_eps.exp(), alpha)
    }

    fn scaled_weighted(&self, log_rho: f64, alpha: f64, log_inv_eps: f64, power: f64) -> f64 {
        if log_rho + log_inv_eps < self.grid.s_min() {
            // the cell is exactly ū_p = r^{-m} φ_p there
            if !(alpha < FRAC_PI_2) {
                return 0.0;
            }
            return ((power - self.params.m) * log_rho).exp() * self.profile.eval(alpha);
        }
        (power * log_rho).exp() * self.scaled(log_rho.exp(), alpha, log_inv_eps)
    }
}

/// The cell used for gluing in `domain` at exponent `p`: the critical cell
/// (consistent system, long truncation) at `p = (n+1)/(n-1)`, the connection
/// cell above it.
pub fn build_cell(domain: Domain, p: f64) -> Result<Arc<dyn CellProfile>> {
    let n = domain.dim();
    let params = ExponentParams::new(n, p)?;
    if params.critical {
        let mut cfg = CriticalConfig::new(n, 0.5 * n as f64 - 0.25);
        cfg.system = CellSystem::Consistent;
        cfg.t_end_factor = 40.0;
        cfg.max_t_doublings = 1;
        Ok(Arc::new(fixed_point_solve(&cfg)?))
    } else if p > critical_exponent(n) {
        params.require_supercritical()?;
        Ok(Arc::new(solve_connection(&ConnectionConfig::new(n, p))?))
    } else {
        Err(Error::Window(format!(
            "gluing needs p >= (N+1)/(N-1) = {}, got {p}",
            critical_exponent(n)
        )))
    }
}

/// A rescaled cell at one boundary point with cutoff `χ_R`.
#[derive(Clone, Copy)]
pub struct PlacedCell<'a> {
    pub profile: &'a dyn CellProfile,
    pub metric: Metric,
    /// `θ_i` (disk) or pole angle `ϑ_i` (ball).
    pub angle: f64,
    pub log_inv_eps: f64,
    pub radius: f64,
}

impl<'a> PlacedCell<'a> {
    pub fn new(profile: &'a dyn CellProfile, domain: Domain, angle: f64, log_inv_eps: f64, radius: f64) -> Self {
        Self {
            profile,
            metric: Metric { domain },
            angle,
            log_inv_eps,
            radius,
        }
    }

    /// Fermi coordinates `(s, z)` of the polar point `(r, a)`.
    pub fn fermi(&self, r: f64, a: f64) -> (f64, f64) {
        let s = match self.metric.domain {
            Domain::Disk => (a - self.angle + PI).rem_euclid(2.0 * PI) - PI,
            Domain::Ball => (a - self.angle).abs(),
        };
        (s, 1.0 - r)
    }

    /// The rescaled cell, odd in `z` and even in `s`.
    pub fn cell(&self, s: f64, z: f64) -> f64 {
        let rho = s.hypot(z);
        if rho == 0.0 || z == 0.0 {
            return 0.0;
        }
        let alpha = s.abs().atan2(z.abs()).min(FRAC_PI_2);
        z.signum() * self.profile.scaled(rho, alpha, self.log_inv_eps)
    }

    /// `(χ, χ_ρ, χ_ρρ)` for `χ_R = 1` on `B(R)`, `0` outside `B(2R)`.
    fn chi(&self, rho: f64) -> (f64, f64, f64) {
        let (c, c1, c2) = cutoff((rho / self.radius).ln());
        (1.0 - c, -c1 / rho, (c1 - c2) / (rho * rho))
    }

    /// `χ_R U` at `(s, z)`.
    pub fn value(&self, s: f64, z: f64) -> f64 {
        let rho = s.hypot(z);
        if rho >= 2.0 * self.radius {
            return 0.0;
        }
        self.chi(rho).0 * self.cell(s, z)
    }

    /// `(χ_R U, E)` where `E = Δ_x(χ_R U) + (χ_R U)^q` with the cell taken
    /// as an exact solution of the flat problem, so that
    /// `E = χ (Δ_x - Δ_flat) U + (χ^q - χ) U^q + 2∇χ·∇U + U Δ_x χ`.
    pub fn value_and_source(&self, s: f64, z: f64) -> (f64, f64) {
        let rho = s.hypot(z);
        if rho >= 2.0 * self.radius || z <= 0.0 {
            return (0.0, 0.0);
        }
        let q = self.profile.exponent();
        let m = &self.metric;
        let h = 1e-3 * rho;
        let u = self.cell(s, z);
        let (usp, usm) = (self.cell(s + h, z), self.cell(s - h, z));
        let (uzp, uzm) = (self.cell(s, z + h), self.cell(s, z - h));
        let u_s = (usp - usm) / (2.0 * h);
        let u_ss = (usp - 2.0 * u + usm) / (h * h);
        let u_z = (uzp - uzm) / (2.0 * h);
        let discrepancy = m.a(z) * u_z + m.b_minus_one(z) * u_ss + m.k_gap(s, z) * u_s;

        let (c, c_r, c_rr) = self.chi(rho);
        let (rs, rz) = (s.abs() / rho, z / rho);
        let (chi_s, chi_z) = (c_r * rs, c_r * rz);
        let chi_ss = c_rr * rs * rs + c_r * rz * rz / rho;
        let chi_zz = c_rr * rz * rz + c_r * rs * rs / rho;
        // χ depends on |s|; the sign of s only enters through u_s
        let (u_s_abs, chi_s_k) = (u_s * s.signum(), if s == 0.0 { 0.0 } else { chi_s });
        let kk = if s == 0.0 { 0.0 } else { m.k(s) };
        let lap_chi = chi_zz + m.a(z) * chi_z + m.b(z) * (chi_ss + kk * chi_s_k);
        let grad = chi_z * u_z + m.b(z) * chi_s_k * u_s_abs;
        let uq = u.max(0.0).powf(q);
        let e = c * discrepancy + (c.powf(q) - c) * uq + 2.0 * grad + u * lap_chi;
        (c * u, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfspace::cutoff as raw_cutoff;

    /// Cell `x_n |x|^{-n}`-like harmonic profile for checking `E` on a
    /// harmonic function with `q` irrelevant (`U^q` small).
    struct Harmonic;
    impl CellProfile for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn exponent(&self) -> f64 {
            3.0
        }
        fn scaled(&self, rho: f64, alpha: f64, _l: f64) -> f64 {
            1e-4 * alpha.cos() / rho
        }
    }

    #[test]
    fn cutoff_support_of_placed_cell() {
        let cell = PlacedCell::new(&Harmonic, Domain::Disk, 0.0, 5.0, 0.2);
        assert_eq!(cell.value(0.35, 0.25), 0.0);
        assert!(cell.value(0.01, 0.05) > 0.0);
        assert_eq!(raw_cutoff(-1.0).0, 0.0);
    }

    #[test]
    fn source_matches_direct_laplacian() {
        // E against Δ_x(χU) by polar differences of the Cartesian field
        let prof = Harmonic;
        for dom in [Domain::Disk, Domain::Ball] {
            let cell = PlacedCell::new(&prof, dom, 0.0, 0.0, 0.1);
            let field = |r: f64, a: f64| {
                let (s, z) = cell.fermi(r, a);
                cell.value(s, z)
            };
            for &(r, a) in &[(0.95f64, 0.03f64), (0.88, 0.1), (0.97, 0.15), (0.999, 0.001)] {
                let h = 1e-4 * (1.0 - r).min(a);
                let f = field(r, a);
                let frr = (field(r + h, a) - 2.0 * f + field(r - h, a)) / (h * h);
                let fr = (field(r + h, a) - field(r - h, a)) / (2.0 * h);
                let faa = (field(r, a + h) - 2.0 * f + field(r, a - h)) / (h * h);
                let fa = (field(r, a + h) - field(r, a - h)) / (2.0 * h);
                let lap = match dom {
                    Domain::Disk => frr + fr / r + faa / (r * r),
                    Domain::Ball => frr + 2.0 * fr / r + (faa + fa / a.tan()) / (r * r),
                };
                let (s, z) = cell.fermi(r, a);
                let (v, e) = cell.value_and_source(s, z);
                // the profile is flat-harmonic only in 2D
                let flat = |s: f64, z: f64| {
                    let g = |s: f64, z: f64| cell.cell(s, z);
                    let hh = 1e-3 * s.hypot(z);
                    (g(s + hh, z) - 2.0 * g(s, z) + g(s - hh, z)) / (hh * hh)
                        + (g(s, z + hh) - 2.0 * g(s, z) + g(s, z - hh)) / (hh * hh)
                        + if dom == Domain::Ball { (g(s + hh, z) - g(s - hh, z)) / (2.0 * hh * s) } else { 0.0 }
                };
                let (c, _, _) = cell.chi(s.hypot(z));
                let expected = lap + v.powi(3) - c * (flat(s, z) + cell.cell(s, z).powi(3));
                let scale = cell.cell(s, z).abs() / (s * s + z * z);
                assert!((e - expected).abs() < 1e-4 * scale, "{dom:?} {r} {a}: {e} vs {expected}");
            }
        }
    }
}
