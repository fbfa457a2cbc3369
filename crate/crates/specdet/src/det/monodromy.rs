//! One dimensional determinant-ratio oracle through the periodic monodromy.
//!
//! For the Hill operator `-y'' + (m^2 + W(x)) y` on a circle of circumference
//! L, the determinant ratio is carried by the monodromy matrix M of the first
//! order system over one period:
//!
//! `det(Delta + W) / det(Delta) = det(M_W - I) / det(M_0 - I)`
//!
//! with the free value `det(M_0 - I) = -4 sinh^2(m L / 2)`. Combined with the
//! closed form `det_zeta(Delta) = 4 sinh^2(m L / 2)` this yields an absolute
//! determinant that is completely independent of the spectral machinery: the
//! only ingredient is an adaptive Runge-Kutta integration of a 2x2 system.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, PerturbationField};

use super::zeta::free_circle_det_zeta;
use super::{DetResult, Method};

/// Dormand-Prince 5(4) adaptive step integrator for a fixed-size real system.
fn dp45<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    y0: [f64; N],
    tol: f64,
) -> Result<[f64; N]> {
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
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let mut x = x0;
    let mut y = y0;
    let mut h = (x1 - x0) / 64.0;
    let hmin = (x1 - x0) * 1e-14;
    let mut k1 = f(x, &y);
    while x < x1 {
        if h < hmin {
            return Err(Error::OdeStepUnderflow { x, h });
        }
        if x + h > x1 {
            h = x1 - x;
        }
        let add = |y: &[f64; N], coeffs: &[(f64, &[f64; N])]| {
            let mut out = *y;
            for i in 0..N {
                for (c, k) in coeffs {
                    out[i] += h * c * k[i];
                }
            }
            out
        };
        let k2 = f(x + A21 * h, &add(&y, &[(A21, &k1)]));
        let k3 = f(x + 0.3 * h, &add(&y, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + 0.8 * h, &add(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            x + (8.0 / 9.0) * h,
            &add(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + h,
            &add(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let ynew = add(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(x + h, &ynew);
        // embedded error estimate
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol * (1.0 + y[i].abs().max(ynew[i].abs()));
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            x += h;
            y = ynew;
            k1 = k7;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
    }
    Ok(y)
}

/// Report of a monodromy determinant evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MonodromyDet {
    /// det_zeta(Delta + W) / det_zeta(Delta).
    pub ratio: f64,
    /// Absolute determinant: ratio times the free closed form.
    pub result: DetResult,
}

/// Computes the determinant ratio of `-d^2/dx^2 + m^2 + W` against the free
/// operator on the circle through the period monodromy, and the absolute
/// determinant by the free closed form. W must be a real band-limited field.
pub fn zeta_det_monodromy(
    w: &PerturbationField,
    geometry: &Geometry,
    ode_tol: f64,
) -> Result<MonodromyDet> {
    let (l, mass) = match geometry {
        Geometry::Circle { circumference, mass } => (*circumference, *mass),
        _ => return Err(Error::WrongGeometry("monodromy oracle needs Circle")),
    };
    if !w.is_real() {
        return Err(Error::Invalid("monodromy oracle needs a real potential".into()));
    }
    let coeffs = w.fourier()?;
    let u = 2.0 * std::f64::consts::PI / l;
    let pot = move |x: f64| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&k, &c) in &coeffs {
            acc += c * Complex64::new(0.0, u * k[0] as f64 * x).exp();
        }
        acc.re + mass * mass
    };
    // two basis solutions of u'' = (m^2 + W) u, joint 4-dim system
    let rhs = move |x: f64, y: &[f64; 4]| -> [f64; 4] {
        let q = pot(x);
        [y[1], q * y[0], y[3], q * y[2]]
    };
    let yend = dp45(&rhs, 0.0, l, [1.0, 0.0, 0.0, 1.0], ode_tol)?;
    // monodromy [[u1, u2], [u1', u2']]
    let (m11, m21, m12, m22) = (yend[0], yend[1], yend[2], yend[3]);
    let det_m_minus_i = (m11 - 1.0) * (m22 - 1.0) - m12 * m21;
    let free = -4.0 * (mass * l / 2.0).sinh().powi(2);
    let ratio = det_m_minus_i / free;
    let value = ratio * free_circle_det_zeta(mass, l);
    let log = Complex64::new(value.abs().ln(), if value < 0.0 { std::f64::consts::PI } else { 0.0 });
    let result = DetResult {
        value: Complex64::new(value, 0.0),
        log_value: log,
        method: Method::ZetaMonodromy,
        error_estimate: ode_tol * 100.0,
        cutoff: None,
    };
    Ok(MonodromyDet { ratio, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_ratio_is_one() {
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let md = zeta_det_monodromy(&PerturbationField::zero(), &g, 1e-12).unwrap();
        assert!((md.ratio - 1.0).abs() < 1e-10, "{}", md.ratio);
        assert!((md.result.value.re - free_circle_det_zeta(1.0, 2.0 * PI)).abs() < 1e-8);
    }

    #[test]
    fn constant_shift_closed_form() {
        // W = c: ratio = sinh^2(pi sqrt(m^2+c)) / sinh^2(pi m) for L = 2 pi
        let m: f64 = 1.0;
        let g = Geometry::circle(2.0 * PI, m).unwrap();
        for c in [0.5, 2.0, -0.5] {
            let md =
                zeta_det_monodromy(&PerturbationField::constant(c), &g, 1e-12).unwrap();
            let s = (PI * (m * m + c).sqrt()).sinh();
            let want = s * s / (PI * m).sinh().powi(2);
            assert!((md.ratio - want).abs() < 1e-9 * want.abs(), "c={c}: {} vs {want}", md.ratio);
        }
    }

    #[test]
    fn dp45_harmonic_oscillator() {
        // y'' = -y integrated over one period returns to the start
        let rhs = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let y = dp45(&rhs, 0.0, 2.0 * PI, [1.0, 0.0], 1e-12).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }
}
