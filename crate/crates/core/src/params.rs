use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether `p` sits on the critical exponent.
const CRITICAL_REL_TOL: f64 = 1e-12;

/// Dimension and exponent of `Δu + u^p = 0`, together with the derived constants
/// used throughout the half-space constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentParams {
    /// Ambient dimension `N >= 2`.
    pub dim: usize,
    /// Nonlinearity exponent `p > 1`.
    pub p: f64,
    /// Homogeneity `m = 2/(p-1)` of the separable solution.
    pub m: f64,
    /// Linear coefficient of the half-sphere problem,
    /// `(N-1) - ((p+1)/(p-1)) (N - (p+1)/(p-1))`.
    pub lambda_p: f64,
    /// Amplitude of the radial singular solution `c_{p,N} |x|^{-m}`; only defined
    /// when `m (N-2-m) > 0`, i.e. `p > N/(N-2)`.
    pub c_pn: Option<f64>,
    /// `true` iff `p = (N+1)/(N-1)`.
    pub critical: bool,
}

impl ExponentParams {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Window(format!("dimension N must satisfy N >= 2, got {dim}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Window(format!("exponent must satisfy p > 1, got {p}")));
        }
        let n = dim as f64;
        let m = 2.0 / (p - 1.0);
        let q = (p + 1.0) / (p - 1.0);
        let lambda_p = (n - 1.0) - q * (n - q);
        let radial = m * (n - 2.0 - m);
        let c_pn = (radial > 0.0).then(|| radial.powf(1.0 / (p - 1.0)));
        let pc = critical_exponent(dim);
        let critical = (p - pc).abs() <= CRITICAL_REL_TOL * pc;
        Ok(Self {
            dim,
            p,
            m,
            lambda_p,
            c_pn,
            critical,
        })
    }

    /// Parameters at the boundary-critical exponent `(N+1)/(N-1)`.
    pub fn critical(dim: usize) -> Result<Self> {
        Self::new(dim, critical_exponent(dim))
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    /// `(p+1)/(p-1) = 1 + m`.
    pub fn q(&self) -> f64 {
        1.0 + self.m
    }

    /// The factored form `-m (N-2-m)` of [`ExponentParams::lambda_p`].
    pub fn lambda_factored(&self) -> f64 {
        -self.m * (self.n() - 2.0 - self.m)
    }

    /// Distance `N - (p+1)/(p-1)` to the bifurcation point; positive above criticality.
    pub fn bifurcation_gap(&self) -> f64 {
        self.n() - self.q()
    }

    /// Upper end `(N+1)/(N-3)` of the subcritical range in dimension `N-1`
    /// (infinite for `N <= 3`).
    pub fn upper_exponent(&self) -> f64 {
        if self.dim <= 3 {
            f64::INFINITY
        } else {
            (self.n() + 1.0) / (self.n() - 3.0)
        }
    }

    /// Checks `(N+1)/(N-1) < p < (N+1)/(N-3)`, the range where the half-sphere
    /// profile is sought.
    pub fn require_supercritical(&self) -> Result<()> {
        let pc = critical_exponent(self.dim);
        if self.critical || self.p <= pc {
            return Err(Error::NoSolution(format!(
                "p must exceed (N+1)/(N-1) = {pc}; the half-sphere profile vanishes uniformly at p = {}",
                self.p
            )));
        }
        if self.p >= self.upper_exponent() {
            return Err(Error::Window(format!(
                "p must be below (N+1)/(N-3) = {}, got {}",
                self.upper_exponent(),
                self.p
            )));
        }
        Ok(())
    }
}

/// `(N+1)/(N-1)`.
pub fn critical_exponent(dim: usize) -> f64 {
    let n = dim as f64;
    (n + 1.0) / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn critical_flags() {
        assert!(ExponentParams::new(2, 3.0).unwrap().critical);
        assert!(ExponentParams::new(3, 2.0).unwrap().critical);
        assert!(!ExponentParams::new(2, 3.2).unwrap().critical);
        let c = ExponentParams::critical(3).unwrap();
        assert_eq!(c.m, 2.0);
        assert_eq!(c.m, c.n() - 1.0);
    }

    #[test]
    fn lambda_examples() {
        let pr = ExponentParams::new(2, 4.0).unwrap();
        assert!((pr.lambda_p - 4.0 / 9.0).abs() < 1e-15);
        // radial constant only exists above N/(N-2)
        assert!(ExponentParams::new(2, 4.0).unwrap().c_pn.is_none());
        let c = ExponentParams::new(3, 4.0).unwrap().c_pn.unwrap();
        let m: f64 = 2.0 / 3.0;
        assert!((c - (m * (1.0 - m)).powf(1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExponentParams::new(1, 3.0).is_err());
        assert!(ExponentParams::new(2, 1.0).is_err());
        assert!(ExponentParams::new(2, f64::NAN).is_err());
        assert!(ExponentParams::new(2, 3.0).unwrap().require_supercritical().is_err());
        assert!(ExponentParams::new(5, 3.5).unwrap().require_supercritical().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn lambda_identity(dim in 2usize..9, p in 1.05f64..12.0) {
            let pr = ExponentParams::new(dim, p).unwrap();
            let scale = 1.0 + pr.lambda_p.abs();
            prop_assert!((pr.lambda_p - pr.lambda_factored()).abs() <= 1e-14 * scale);
        }
    }
}
