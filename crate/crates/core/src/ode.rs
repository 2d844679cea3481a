//! Adaptive Dormand–Prince 5(4) integration of `dy/dz = M·y` for constant
//! complex `M`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

// The system is autonomous, so the node coefficients c_i never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// Fifth-order weights (also row 7 of the tableau, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// b - b* (fifth minus embedded fourth order).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { abs: tol, rel: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates from `z0` to `z1` (`z1 ≥ z0`).
pub fn integrate_linear(
    m: &DMatrix<Complex64>,
    y0: &DVector<Complex64>,
    z0: f64,
    z1: f64,
    tol: Tolerance,
) -> Result<(DVector<Complex64>, Stats)> {
    if !(tol.abs > 0.0 && tol.rel >= 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol:?}")));
    }
    let mut stats = Stats::default();
    let mut y = y0.clone();
    let span = z1 - z0;
    if span <= 0.0 {
        return Ok((y, stats));
    }

    let f = |v: &DVector<Complex64>| m * v;
    let scaled = |v: &DVector<Complex64>, h: f64| v * Complex64::new(h, 0.0);

    let mut z = z0;
    let mut k1 = f(&y);
    let rate = m.norm().max(1e-300);
    let mut h = (0.01 / rate).min(span).max(span * 1e-12);
    let h_min = span * 1e-14;

    while z < z1 {
        if z + h > z1 {
            h = z1 - z;
        }
        let k2 = f(&(&y + scaled(&k1, h * A21)));
        let k3 = f(&(&y + scaled(&k1, h * A31) + scaled(&k2, h * A32)));
        let k4 = f(&(&y + scaled(&k1, h * A41) + scaled(&k2, h * A42) + scaled(&k3, h * A43)));
        let k5 = f(&(&y + scaled(&k1, h * A51) + scaled(&k2, h * A52) + scaled(&k3, h * A53) + scaled(&k4, h * A54)));
        let k6 = f(&(&y
            + scaled(&k1, h * A61)
            + scaled(&k2, h * A62)
            + scaled(&k3, h * A63)
            + scaled(&k4, h * A64)
            + scaled(&k5, h * A65)));
        let y_new = &y
            + scaled(&k1, h * B1)
            + scaled(&k3, h * B3)
            + scaled(&k4, h * B4)
            + scaled(&k5, h * B5)
            + scaled(&k6, h * B6);
        let k7 = f(&y_new);
        let err = scaled(&k1, h * E1)
            + scaled(&k3, h * E3)
            + scaled(&k4, h * E4)
            + scaled(&k5, h * E5)
            + scaled(&k6, h * E6)
            + scaled(&k7, h * E7);

        let err_norm = err
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| e.norm() / (tol.abs + tol.rel * a.norm().max(b.norm())))
            .fold(0.0, |acc: f64, r| if r.is_nan() { f64::INFINITY } else { acc.max(r) });

        if err_norm <= 1.0 {
            z += h;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }

        let factor = if !err_norm.is_finite() {
            0.2
        } else if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < h_min && z < z1 {
            return Err(Error::IntegrationFailure { z, step: h });
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_exponential() {
        let m = DMatrix::from_element(1, 1, Complex64::new(-0.3, 2.0));
        let y0 = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let (y, stats) = integrate_linear(&m, &y0, 0.0, 3.0, Tolerance::uniform(1e-10)).unwrap();
        let exact = (Complex64::new(-0.3, 2.0) * 3.0).exp();
        assert!((y[0] - exact).norm() < 1e-9);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn rotation() {
        // y'' = −y written as a first-order system.
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let y0 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let (y, _) = integrate_linear(&m, &y0, 0.0, 10.0, Tolerance::uniform(1e-11)).unwrap();
        assert!((y[0].re - 10f64.cos()).abs() < 1e-9);
        assert!((y[1].re + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn stiff_decay_underflows_step() {
        let m = DMatrix::from_element(1, 1, Complex64::new(-1e20, 0.0));
        let y0 = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let r = integrate_linear(&m, &y0, 0.0, 1.0, Tolerance::uniform(1e-12));
        assert!(matches!(r, Err(Error::IntegrationFailure { .. })), "{r:?}");
    }

    #[test]
    fn rejects_bad_tolerance() {
        let m = DMatrix::from_element(1, 1, Complex64::new(0.0, 1.0));
        let y0 = DVector::from_element(1, Complex64::new(1.0, 0.0));
        assert!(integrate_linear(&m, &y0, 0.0, 1.0, Tolerance::uniform(0.0)).is_err());
    }
}
