//! Adaptive Dormand–Prince 5(4) integrator with output at prescribed points.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_init: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 200_000,
            h_init: 1e-4,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(x, y)` from `x0` and returns the state at every point of
/// `outputs` (increasing, all `>= x0`). Steps are clipped so that each output
/// point is hit exactly.
pub fn integrate<F>(mut f: F, x0: f64, y0: &[f64], outputs: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut x = x0;
    let mut y = y0.to_vec();
    let mut h = opts.h_init;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut out = Vec::with_capacity(outputs.len());
    let mut steps = 0usize;
    f(x, &y, &mut k[0]);
    for &target in outputs {
        if target < x - 1e-15 {
            return Err(Error::Config("ODE output points must be increasing".into()));
        }
        while target - x > 1e-14 * (1.0 + target.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::NoSolution(format!("ODE step budget exhausted at x = {x}")));
            }
            let last = h >= target - x;
            let hs = if last { target - x } else { h };
            for s in 1..7 {
                for d in 0..dim {
                    let mut acc = y[d];
                    for j in 0..s {
                        acc += hs * A[s][j] * k[j][d];
                    }
                    tmp[d] = acc;
                }
                f(x + C[s] * hs, &tmp, &mut k[s]);
            }
            let mut err = 0.0f64;
            for d in 0..dim {
                let mut hi = y[d];
                let mut lo = y[d];
                for j in 0..7 {
                    hi += hs * B5[j] * k[j][d];
                    lo += hs * B4[j] * k[j][d];
                }
                y5[d] = hi;
                let sc = opts.atol + opts.rtol * y[d].abs().max(hi.abs());
                err = err.max(((hi - lo) / sc).abs());
            }
            if !err.is_finite() {
                h = hs * 0.1;
                if h < 1e-16 {
                    return Err(Error::NoSolution(format!("ODE blew up near x = {x}")));
                }
                continue;
            }
            if err <= 1.0 {
                x = if last { target } else { x + hs };
                y.copy_from_slice(&y5);
                // FSAL: the last stage is f at the new point
                k.swap(0, 6);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let proposed = hs * fac;
            h = if last && err <= 1.0 { h.max(proposed) } else { proposed };
            if h < 1e-16 {
                return Err(Error::NoSolution(format!("ODE step underflow near x = {x}")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let pts: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &pts,
            OdeOptions::default(),
        )
        .unwrap();
        for (x, y) in pts.iter().zip(&sol) {
            assert!((y[0] - x.cos()).abs() < 1e-9);
            assert!((y[1] + x.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn exponential_growth() {
        let sol = integrate(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], &[3.0], OdeOptions::default()).unwrap();
        assert!((sol[0][0] - 3f64.exp()).abs() < 1e-8);
    }
}
