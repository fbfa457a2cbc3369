//! Scalar special functions and numeric helpers: the exponential integral E1
//! on the right half-plane, compensated summation, and branch bookkeeping for
//! logarithms along parameter paths.

use num_complex::Complex64;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral E1(z) = ∫_1^∞ e^{-zt}/t dt for Re(z) > 0.
///
/// Power series for small |z|, modified Lentz continued fraction otherwise.
/// Relative accuracy ~1e-14 over the right half-plane.
pub fn exp_integral_e1(z: Complex64) -> Complex64 {
    assert!(z.re > 0.0 || (z.re == 0.0 && z.im != 0.0), "E1 requires Re(z) > 0, got {z}");
    let r = z.norm();
    // The entire-part series converges everywhere; cancellation costs roughly
    // (|z| - Re z) / ln 10 digits. The continued fraction needs |z| large and
    // a sector away from the imaginary axis.
    let use_series = r <= 4.5 || (z.re < 0.3 * r && r - z.re <= 12.0 && r <= 30.0);
    if use_series {
        // E1(z) = -gamma - ln z + sum_{k>=1} (-1)^{k+1} z^k / (k k!)
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..=400 {
            term *= -z / k as f64;
            let add = -term / k as f64;
            sum += add;
            if term.norm() < 1e-18 * (1.0 + sum.norm()) && k as f64 > r {
                break;
            }
        }
        -EULER_GAMMA - z.ln() + sum
    } else {
        // Modified Lentz on E1(z) = e^{-z} / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...)))
        let tiny = 1e-300;
        let mut f = z + 1.0;
        if f.norm() < tiny {
            f = Complex64::new(tiny, 0.0);
        }
        let mut c = f;
        let mut d = Complex64::new(0.0, 0.0);
        for i in 1..1000 {
            let a = -((i * i) as f64);
            let b = z + (2 * i + 1) as f64;
            d = b + a * d;
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            c = b + a / c;
            if c.norm() < tiny {
                c = Complex64::new(tiny, 0.0);
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).norm() < 1e-15 {
                break;
            }
        }
        (-z).exp() / f
    }
}

/// Kahan compensated sum of an iterator of f64.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Kahan compensated sum for complex values (componentwise).
pub fn kahan_sum_complex(values: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Adjusts the imaginary parts of a sequence of log-values by multiples of
/// 2\pi so that successive entries differ by less than \pi, keeping the first
/// entry fixed. Used to continue log-determinants along a parameter path.
pub fn unwrap_log_path(values: &mut [Complex64]) {
    use std::f64::consts::PI;
    for i in 1..values.len() {
        let mut jump = values[i].im - values[i - 1].im;
        while jump > PI {
            values[i].im -= 2.0 * PI;
            jump = values[i].im - values[i - 1].im;
        }
        while jump < -PI {
            values[i].im += 2.0 * PI;
            jump = values[i].im - values[i - 1].im;
        }
    }
}

/// log(1+z) accurate for small |z|.
pub fn ln_1p_complex(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // series with Kahan-free horner: sum (-1)^{k+1} z^k / k
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..=40 {
            term *= z;
            let add = term * ((if k % 2 == 1 { 1.0 } else { -1.0 }) / k as f64);
            sum += add;
            if add.norm() < 1e-18 * (1.0 + sum.norm()) {
                break;
            }
        }
        sum
    } else {
        (Complex64::new(1.0, 0.0) + z).ln()
    }
}
