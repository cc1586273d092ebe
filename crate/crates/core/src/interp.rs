//! Piecewise cubic Hermite interpolation on uniform grids.

/// Fourth-order finite-difference derivatives of uniformly sampled data.
///
/// With `even_start` the data are treated as even about the first node, which
/// forces `f'(x_0) = 0` and uses mirrored ghost values near it.
pub fn fd_derivatives(values: &[f64], h: f64, even_start: bool) -> Vec<f64> {
    let n = values.len();
    let f = values;
    let mut d = vec![0.0; n];
    if n < 5 {
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            d[i] = if b > a { (f[b] - f[a]) / ((b - a) as f64 * h) } else { 0.0 };
        }
        if even_start && n > 0 {
            d[0] = 0.0;
        }
        return d;
    }
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    if even_start {
        d[0] = 0.0;
        d[1] = (f[1] - 8.0 * f[0] + 8.0 * f[2] - f[3]) / (12.0 * h);
    } else {
        d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
        d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    }
    let e = n - 1;
    d[e] = (25.0 * f[e] - 48.0 * f[e - 1] + 36.0 * f[e - 2] - 16.0 * f[e - 3] + 3.0 * f[e - 4]) / (12.0 * h);
    d[e - 1] = (3.0 * f[e] + 10.0 * f[e - 1] - 18.0 * f[e - 2] + 6.0 * f[e - 3] - f[e - 4]) / (12.0 * h);
    d
}

/// Hermite basis on the unit interval: values and derivative weights.
#[inline]
fn basis(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2]
}

#[inline]
fn basis_prime(s: f64) -> [f64; 4] {
    let s2 = s * s;
    [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s]
}

/// Locates `x` on a uniform grid; returns the cell index and local coordinate.
#[inline]
pub(crate) fn locate(x0: f64, h: f64, n: usize, x: f64) -> (usize, f64) {
    let u = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
    let j = (u.floor() as usize).min(n - 2);
    (j, u - j as f64)
}

/// C¹ piecewise cubic interpolant through uniformly spaced data.
#[derive(Debug, Clone)]
pub struct Hermite1D {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl Hermite1D {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, derivs: Vec<f64>) -> Self {
        assert_eq!(values.len(), derivs.len());
        assert!(values.len() >= 2);
        Self { x0, h, values, derivs }
    }

    pub fn from_values(x0: f64, h: f64, values: Vec<f64>, even_start: bool) -> Self {
        let derivs = fd_derivatives(&values, h, even_start);
        Self::new(x0, h, values, derivs)
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    /// Value at `x`, clamped to the data range.
    pub fn eval(&self, x: f64) -> f64 {
        let (j, s) = locate(self.x0, self.h, self.values.len(), x);
        let b = basis(s);
        b[0] * self.values[j] + b[1] * self.h * self.derivs[j] + b[2] * self.values[j + 1] + b[3] * self.h * self.derivs[j + 1]
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (j, s) = locate(self.x0, self.h, self.values.len(), x);
        let b = basis_prime(s);
        (b[0] * self.values[j] + b[2] * self.values[j + 1]) / self.h + b[1] * self.derivs[j] + b[3] * self.derivs[j + 1]
    }
}

/// C¹ tensor interpolant of data `f(x_j, y_i)` on a uniform rectangle.
///
/// Rows are indexed by `x`; within a row the data are interpolated in `y`
/// with [`Hermite1D`], and the `x`-direction uses Hermite cubics whose nodal
/// slopes come from fourth-order differences of the row interpolants.
#[derive(Debug, Clone)]
pub struct Hermite2D {
    x0: f64,
    hx: f64,
    rows: Vec<Hermite1D>,
}

impl Hermite2D {
    /// `rows[j]` holds the samples at `x_j`.
    pub fn new(x0: f64, hx: f64, y0: f64, hy: f64, rows: &[Vec<f64>], even_y_start: bool) -> Self {
        assert!(rows.len() >= 2);
        let rows = rows
            .iter()
            .map(|r| Hermite1D::from_values(y0, hy, r.clone(), even_y_start))
            .collect();
        Self { x0, hx, rows }
    }

    fn x_slope(&self, j: usize, y: f64) -> f64 {
        let n = self.rows.len();
        let f = |k: usize| self.rows[k].eval(y);
        if n < 5 {
            let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
            return (f(b) - f(a)) / ((b - a) as f64 * self.hx);
        }
        let h = self.hx;
        if j >= 2 && j + 2 < n {
            (f(j - 2) - 8.0 * f(j - 1) + 8.0 * f(j + 1) - f(j + 2)) / (12.0 * h)
        } else if j < 2 {
            let g: Vec<f64> = (0..5).map(f).collect();
            fd_derivatives(&g, h, false)[j]
        } else {
            let g: Vec<f64> = (n - 5..n).map(f).collect();
            fd_derivatives(&g, h, false)[j + 5 - n]
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (j, s) = locate(self.x0, self.hx, self.rows.len(), x);
        let b = basis(s);
        b[0] * self.rows[j].eval(y)
            + b[1] * self.hx * self.x_slope(j, y)
            + b[2] * self.rows[j + 1].eval(y)
            + b[3] * self.hx * self.x_slope(j + 1, y)
    }
}

/// C² piecewise quintic interpolant from values, first and second derivatives.
#[derive(Debug, Clone)]
pub struct Quintic1D {
    x0: f64,
    h: f64,
    f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Quintic1D {
    pub fn new(x0: f64, h: f64, f: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        assert!(f.len() >= 2 && f.len() == d1.len() && f.len() == d2.len());
        Self { x0, h, f, d1, d2 }
    }

    /// Value, first and second derivative at `x` (clamped to the data range).
    pub fn eval3(&self, x: f64) -> [f64; 3] {
        let (j, t) = locate(self.x0, self.h, self.f.len(), x);
        let h = self.h;
        let (p0, p1) = (self.f[j], self.f[j + 1]);
        let (d0, d1) = (h * self.d1[j], h * self.d1[j + 1]);
        let (s0, s1) = (h * h * self.d2[j], h * h * self.d2[j + 1]);
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let b = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
            0.5 * t3 - t4 + 0.5 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        ];
        let db = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
            1.5 * t2 - 4.0 * t3 + 2.5 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        ];
        let ddb = [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3,
            3.0 * t - 12.0 * t2 + 10.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            60.0 * t - 180.0 * t2 + 120.0 * t3,
        ];
        let c = [p0, d0, s0, s1, d1, p1];
        let dot = |w: &[f64; 6]| w.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        [dot(&b), dot(&db) / h, dot(&ddb) / (h * h)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval3(x)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_reproduces_quintics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) + 0.25 * x.powi(5);
        let dp = |x: f64| -2.0 + 1.5 * x * x + 1.25 * x.powi(4);
        let ddp = |x: f64| 3.0 * x + 5.0 * x.powi(3);
        let h = 0.3;
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * h).collect();
        let q = Quintic1D::new(0.0, h, xs.iter().map(|&x| p(x)).collect(), xs.iter().map(|&x| dp(x)).collect(), xs.iter().map(|&x| ddp(x)).collect());
        for k in 0..50 {
            let x = k as f64 * 0.042;
            let [v, d, dd] = q.eval3(x);
            assert!((v - p(x)).abs() < 1e-12);
            assert!((d - dp(x)).abs() < 1e-11);
            assert!((dd - ddp(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn hermite_reproduces_cubic_and_converges() {
        let h = 0.1;
        let vals: Vec<f64> = (0..21).map(|i| (i as f64 * h).powi(3)).collect();
        let p = Hermite1D::from_values(0.0, h, vals, false);
        for k in 0..100 {
            let x = k as f64 * 0.0199;
            assert!((p.eval(x) - x.powi(3)).abs() < 1e-12);
        }
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| (3.0 * i as f64 * h).cos()).collect();
            let p = Hermite1D::from_values(0.0, h, v, true);
            (0..997).map(|k| k as f64 / 996.0).fold(0.0f64, |m, x| m.max((p.eval(x) - (3.0 * x).cos()).abs()))
        };
        let ratio = err(41) / err(81);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn bicubic_smooth_function() {
        let (hx, hy) = (0.05, 0.04);
        let rows: Vec<Vec<f64>> = (0..41)
            .map(|j| (0..30).map(|i| (j as f64 * hx).exp() * (i as f64 * hy).cos()).collect())
            .collect();
        let p = Hermite2D::new(0.0, hx, 0.0, hy, &rows, true);
        for &(x, y) in &[(0.33, 0.21), (1.97, 1.15), (0.01, 0.9)] {
            let e: f64 = (x as f64).exp() * (y as f64).cos();
            assert!((p.eval(x, y) - e).abs() < 1e-6);
        }
    }
}
