//! Adaptive Dormand-Prince 5(4) integration of complex first-order systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the interval length when absent.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig { rtol: 1e-11, atol: 1e-13, h0: None, max_steps: 200_000 }
    }
}

impl OdeConfig {
    pub fn with_tol(tol: f64) -> Self {
        OdeConfig { rtol: tol, atol: tol * 1e-2, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
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
// fifth-order weights are the last row of A; E = b5 - b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(x, y)` from `x0` to `x1` (either direction), calling
/// `observe(x, y)` at the start and after every accepted step.
pub fn integrate_observed<F, O>(
    f: F,
    x0: f64,
    x1: f64,
    y0: Vec<Complex64>,
    cfg: &OdeConfig,
    mut observe: O,
) -> Result<(Vec<Complex64>, OdeStats)>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(f64, &[Complex64]),
{
    let n = y0.len();
    let span = x1 - x0;
    let dir = span.signum();
    let mut stats = OdeStats::default();
    let mut x = x0;
    let mut y = y0;
    observe(x, &y);
    if span == 0.0 {
        return Ok((y, stats));
    }
    let mut h = cfg.h0.unwrap_or(span.abs() * 1e-2).min(span.abs());
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    f(x, &y, &mut k[0]);
    let h_floor = 1e-14 * span.abs().max(x0.abs()).max(x1.abs());
    while (x1 - x) * dir > 0.0 {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::StepFailure { x, reason: format!("step budget {} exhausted", cfg.max_steps) });
        }
        let last = (x1 - x).abs() <= h * (1.0 + 1e-12);
        let hs = if last { x1 - x } else { h * dir };
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += kj[i] * (hs * A[s][j]);
                    }
                }
                tmp[i] = acc;
            }
            f(x + C[s] * hs, &tmp, &mut k[s]);
        }
        // tmp holds the fifth-order solution (stage 7 argument)
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = Complex64::new(0.0, 0.0);
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    e += ks[i] * (hs * E[s]);
                }
            }
            let sc = cfg.atol + cfg.rtol * y[i].norm().max(tmp[i].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::StepFailure { x, reason: "non-finite state".into() });
        }
        if err <= 1.0 {
            stats.accepted += 1;
            x = if last { x1 } else { x + hs };
            std::mem::swap(&mut y, &mut tmp);
            k.swap(0, 6);
            observe(x, &y);
        } else {
            stats.rejected += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (hs.abs() * fac).min(span.abs());
        if h < h_floor {
            return Err(Error::StepFailure { x, reason: format!("step size {h:.3e} below floor") });
        }
    }
    Ok((y, stats))
}

pub fn integrate<F>(f: F, x0: f64, x1: f64, y0: Vec<Complex64>, cfg: &OdeConfig) -> Result<(Vec<Complex64>, OdeStats)>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    integrate_observed(f, x0, x1, y0, cfg, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exponential_and_rotation() {
        let (y, st) = integrate(|_, y, d| d[0] = y[0], 0.0, 1.0, vec![c(1.0)], &OdeConfig::default()).unwrap();
        assert!((y[0].re - std::f64::consts::E).abs() < 1e-10);
        assert!(st.accepted > 0);
        // y' = i y backwards
        let (y, _) = integrate(
            |_, y, d| d[0] = Complex64::i() * y[0],
            2.0,
            0.0,
            vec![Complex64::from_polar(1.0, 2.0)],
            &OdeConfig::default(),
        )
        .unwrap();
        assert!((y[0] - c(1.0)).norm() < 1e-10);
    }

    #[test]
    fn airy_type_system_keeps_wronskian() {
        // y'' = x y as a system, two columns
        let f = |x: f64, y: &[Complex64], d: &mut [Complex64]| {
            d[0] = y[1];
            d[1] = y[0] * x;
            d[2] = y[3];
            d[3] = y[2] * x;
        };
        let mut worst: f64 = 0.0;
        integrate_observed(f, 0.0, 3.0, vec![c(1.0), c(0.0), c(0.0), c(1.0)], &OdeConfig::default(), |_, y| {
            let w = y[0] * y[3] - y[1] * y[2];
            worst = worst.max((w - c(1.0)).norm());
        })
        .unwrap();
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = OdeConfig { max_steps: 3, ..OdeConfig::default() };
        let r = integrate(|_, y, d| d[0] = y[0] * 50.0, 0.0, 1.0, vec![c(1.0)], &cfg);
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }
}
