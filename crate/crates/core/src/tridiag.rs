use crate::error::{Error, Result};

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`;
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::SingularSystem("tridiagonal band length mismatch".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return Err(Error::SingularSystem("zero pivot in row 0".into()));
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv.abs() < 1e-300 || !piv.is_finite() {
            return Err(Error::SingularSystem(format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Thomas factorisation kept for repeated solves with the same matrix.
#[derive(Debug, Clone)]
pub struct Factored {
    lower: Vec<f64>,
    inv_piv: Vec<f64>,
    c: Vec<f64>,
}

impl Factored {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(Error::SingularSystem("tridiagonal band length mismatch".into()));
        }
        let mut c = vec![0.0; n];
        let mut inv_piv = vec![0.0; n];
        for i in 0..n {
            let piv = if i == 0 { diag[0] } else { diag[i] - lower[i] * c[i - 1] };
            if piv.abs() < 1e-300 || !piv.is_finite() {
                return Err(Error::SingularSystem(format!("zero pivot in row {i}")));
            }
            inv_piv[i] = 1.0 / piv;
            c[i] = if i + 1 < n { upper[i] / piv } else { 0.0 };
        }
        Ok(Self {
            lower: lower.to_vec(),
            inv_piv,
            c,
        })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.c.len();
        x[0] *= self.inv_piv[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c[i] * x[i + 1];
        }
    }
}
