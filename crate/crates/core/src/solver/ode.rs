//! Adaptive Dormand-Prince 5(4) integration.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atol: 1e-9, rtol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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

const MIN_STEP: f64 = 1e-14;
const MAX_STEPS: usize = 200_000;

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction) and returns
/// `y(t1)`.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, tol: Tolerances) -> Result<(Vec<f64>, StepStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut stats = StepStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0.to_vec(), stats));
    }
    let dir = span.signum();
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = (span.abs() * 0.1).min(0.05) * dir;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = f(t, &y)?;
    let mut tmp = vec![0.0; n];
    loop {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::StepUnderflow(h.abs()));
        }
        let remaining = t1 - t;
        if remaining * dir <= 0.0 {
            break;
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            k[s] = f(t + C[s] * h, &tmp)?;
        }
        let mut err: f64 = 0.0;
        let mut y5 = vec![0.0; n];
        for i in 0..n {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * d5;
            let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            let e = h * (d5 - d4) / sc;
            err = err.max(e.abs());
        }
        if !err.is_finite() {
            h *= 0.25;
            stats.rejected += 1;
            if h.abs() < MIN_STEP {
                return Err(Error::StepUnderflow(h.abs()));
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            // first-same-as-last
            k[0] = k[6].clone();
            stats.accepted += 1;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < MIN_STEP {
                return Err(Error::StepUnderflow(h.abs()));
            }
        }
    }
    Ok((y, stats))
}
