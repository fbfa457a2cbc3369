//! Entire-function machinery: Weierstrass elementary factors, truncated
//! Hadamard products with tail bounds, and estimation of order and critical
//! exponents from zero sequences.
//!
//! The elementary factor of order p is
//! `E_p(z) = (1 - z) exp(z + z^2/2 + ... + z^p/p)`,
//! and a Hadamard product with factor order p, vanishing order m at the
//! origin and exponential polynomial P reads
//! `f(z) = z^m e^{P(z)} prod_n E_p(z / a_n)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::lsq_real_design;
use crate::special::ln_1p_complex;

/// The Weierstrass elementary factor E_p(z).
pub fn weierstrass_factor(p: usize, z: Complex64) -> Complex64 {
    log_weierstrass_factor(p, z).map(|l| l.exp()).unwrap_or(Complex64::new(0.0, 0.0))
}

/// Principal-branch log E_p(z); `None` at a zero (z = 1).
///
/// For |z| < 1/2 this is evaluated by the tail series
/// `log E_p(z) = -sum_{k > p} z^k / k`, which avoids the cancellation
/// between (1 - z) and the exponential polynomial; the truncation tail is
/// kept below 1e-17 relative.
pub fn log_weierstrass_factor(p: usize, z: Complex64) -> Option<Complex64> {
    if (z - 1.0).norm() == 0.0 {
        return None;
    }
    if z.norm() < 0.5 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        for _ in 0..=p {
            pow *= z;
        }
        let mut k = p + 1;
        loop {
            let add = -pow / k as f64;
            sum += add;
            pow *= z;
            k += 1;
            if pow.norm() / k as f64 <= 0.5e-17 * (1.0 + sum.norm()) || k > 200 {
                break;
            }
        }
        Some(sum)
    } else {
        let mut poly = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        for k in 1..=p {
            pow *= z;
            poly += pow / k as f64;
        }
        Some(ln_1p_complex(-z) + poly)
    }
}

/// Zeros of an entire function, listed with multiplicity (repeated entries),
/// sorted by nondecreasing modulus; the vanishing order at the origin is kept
/// separately so no stored zero may be 0.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroSequence {
    zeros: Vec<Complex64>,
    /// Vanishing order at z = 0.
    pub order_at_origin: usize,
    /// True when the stored list is the whole divisor (no dropped tail).
    complete: bool,
}

impl ZeroSequence {
    /// A truncation of an infinite zero sequence; evaluations carry a tail
    /// bound extrapolated from the stored moduli.
    pub fn new(zeros: Vec<Complex64>, order_at_origin: usize) -> Result<Self> {
        Self::build(zeros, order_at_origin, false)
    }

    /// A complete finite divisor: no tail.
    pub fn finite(zeros: Vec<Complex64>, order_at_origin: usize) -> Result<Self> {
        Self::build(zeros, order_at_origin, true)
    }

    fn build(mut zeros: Vec<Complex64>, order_at_origin: usize, complete: bool) -> Result<Self> {
        if zeros.iter().any(|z| z.norm() == 0.0) {
            return Err(Error::Invalid("zero at the origin must go into order_at_origin".into()));
        }
        zeros.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        Ok(ZeroSequence { zeros, order_at_origin, complete })
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }
}

/// Data of a truncated Hadamard product: stored zeros, the factor order p and
/// the exponential polynomial coefficients (P(z) = c_1 z + ... + c_d z^d,
/// no constant term; degree <= p).
#[derive(Debug, Clone, Serialize)]
pub struct HadamardData {
    pub zeros: ZeroSequence,
    pub factor_order: usize,
    /// Coefficients [c_1, ..., c_d] of the exponential polynomial.
    pub exp_poly: Vec<Complex64>,
}

impl HadamardData {
    pub fn new(zeros: ZeroSequence, factor_order: usize, exp_poly: Vec<Complex64>) -> Result<Self> {
        if exp_poly.len() > factor_order {
            return Err(Error::Invalid(format!(
                "exponential polynomial degree {} exceeds factor order {}",
                exp_poly.len(),
                factor_order
            )));
        }
        Ok(HadamardData { zeros, factor_order, exp_poly })
    }
}

/// Result of evaluating a truncated Hadamard product.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HadamardValue {
    pub value: Complex64,
    pub log_value: Complex64,
    /// Bound on the effect of the dropped zero tail on log f.
    pub tail_bound: f64,
}

/// Evaluates `z^m e^{P(z)} prod E_p(z / a_n)` over the stored zeros.
///
/// The dropped tail is estimated from the modulus growth of the stored zeros:
/// fitting |a_n| ~ c n^q on the last stored decade bounds
/// `sum_{n > N} 2 |z / a_n|^{p+1}` by the integral remainder. Zeros with
/// |a_n| < 2|z| must be stored explicitly. Errors when the bound exceeds
/// `tol`.
pub fn hadamard_eval(data: &HadamardData, z: Complex64, tol: f64) -> Result<HadamardValue> {
    let p = data.factor_order;
    let zs = data.zeros.zeros();
    let bound = if data.zeros.complete { 0.0 } else { tail_bound(zs, p, z)? };
    if bound > tol {
        return Err(Error::TailBoundExceedsTol { bound, tol });
    }
    let mut log = Complex64::new(0.0, 0.0);
    let mut vanished = false;
    for a in zs {
        match log_weierstrass_factor(p, z / a) {
            Some(l) => log += l,
            None => vanished = true,
        }
    }
    let mut pow = Complex64::new(1.0, 0.0);
    for c in &data.exp_poly {
        pow *= z;
        log += c * pow;
    }
    if data.zeros.order_at_origin > 0 {
        if z.norm() == 0.0 {
            vanished = true;
        } else {
            log += (data.zeros.order_at_origin as f64) * z.ln();
        }
    }
    if vanished {
        return Ok(HadamardValue {
            value: Complex64::new(0.0, 0.0),
            log_value: Complex64::new(f64::NEG_INFINITY, 0.0),
            tail_bound: bound,
        });
    }
    Ok(HadamardValue { value: log.exp(), log_value: log, tail_bound: bound })
}

fn tail_bound(zs: &[Complex64], p: usize, z: Complex64) -> Result<f64> {
    if zs.is_empty() || z.norm() == 0.0 {
        return Ok(0.0);
    }
    let rmax = zs.last().unwrap().norm();
    if rmax < 2.0 * z.norm() {
        return Err(Error::TailBoundExceedsTol { bound: f64::INFINITY, tol: 0.0 });
    }
    let n = zs.len();
    let start = zs.iter().position(|a| a.norm() > rmax / 10.0).unwrap_or(0).min(n - 1);
    if n - start < 4 {
        let per = 2.0 * (z.norm() / rmax).powi(p as i32 + 1);
        return Ok(per * 10.0);
    }
    let design: Vec<Vec<f64>> = (start..n).map(|i| vec![1.0, ((i + 1) as f64).ln()]).collect();
    let y: Vec<Complex64> = (start..n).map(|i| Complex64::new(zs[i].norm().ln(), 0.0)).collect();
    let fit = lsq_real_design(&design, &y)?;
    let q = fit.coeffs[1].re.max(1e-3);
    let c = fit.coeffs[0].re.exp();
    // sum_{k > n} 2 (|z| / (c k^q))^{p+1} <= 2 (|z|/c)^{p+1} n^{1-q(p+1)} / (q(p+1) - 1)
    let expo = q * (p as f64 + 1.0);
    if expo <= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * (z.norm() / c).powf(p as f64 + 1.0) * (n as f64).powf(1.0 - expo) / (expo - 1.0))
}

/// Estimated critical exponent of a zero sequence: the least-squares slope of
/// log n against log |a_n|, estimating the infimum over alpha with
/// sum |a_n|^-alpha finite. Needs at least 100 zeros; returns the estimate
/// and its fit standard error.
pub fn critical_exponent(zeros: &ZeroSequence) -> Result<(f64, f64)> {
    let zs = zeros.zeros();
    if zs.len() < 100 {
        return Err(Error::TooFewZeros { need: 100, got: zs.len() });
    }
    // upper half of the sequence only, to damp pre-asymptotic bias
    let start = zs.len() / 2;
    let design: Vec<Vec<f64>> = (start..zs.len()).map(|i| vec![1.0, zs[i].norm().ln()]).collect();
    let y: Vec<Complex64> =
        (start..zs.len()).map(|i| Complex64::new(((i + 1) as f64).ln(), 0.0)).collect();
    let fit = lsq_real_design(&design, &y)?;
    Ok((fit.coeffs[1].re, fit.sigma[1].max(1e-6)))
}

/// Result of an order estimation.
#[derive(Debug, Clone, Serialize)]
pub struct OrderEstimate {
    /// Fitted growth exponent, maximized over rays.
    pub order: f64,
    /// Per-ray fitted slopes (angle, slope).
    pub per_ray: Vec<(f64, f64)>,
}

/// Estimates the order of an entire function from values of log |f| on a
/// geometric radius grid: the growth is maximized over the rays at each
/// radius (the maximum modulus M(r)), and the order is the fitted slope of
/// log log M(r) against log r. Per-ray slopes are also reported.
///
/// `log_abs_f` returns log |f(z)| (callers work in log scale so the function
/// itself may overflow f64) or None where the value is unusable. Only the
/// largest two decades of radii enter the fit.
pub fn estimate_order(
    log_abs_f: &dyn Fn(Complex64) -> Option<f64>,
    ray_angles: &[f64],
    radii: &[f64],
) -> Result<OrderEstimate> {
    let rmax = radii.iter().copied().fold(0.0f64, f64::max);
    let rmin_fit = rmax / 100.0;
    let mut max_design = Vec::new();
    let mut max_y = Vec::new();
    let mut ray_samples: Vec<(f64, Vec<(f64, f64)>)> =
        ray_angles.iter().map(|&t| (t, Vec::new())).collect();
    for &r in radii {
        if r < rmin_fit {
            continue;
        }
        let mut best: Option<f64> = None;
        for (ri, &theta) in ray_angles.iter().enumerate() {
            let dir = Complex64::from_polar(1.0, theta);
            if let Some(l) = log_abs_f(r * dir) {
                if l.is_finite() {
                    if l > 1e-8 {
                        ray_samples[ri].1.push((r, l));
                    }
                    best = Some(best.map_or(l, |b: f64| b.max(l)));
                }
            }
        }
        if let Some(m) = best {
            if m > 1e-8 {
                max_design.push(vec![1.0, r.ln()]);
                max_y.push(Complex64::new(m.ln(), 0.0));
            }
        }
    }
    if max_design.len() < 4 {
        return Err(Error::OrderGridUnusable);
    }
    let fit = lsq_real_design(&max_design, &max_y)?;
    let order = fit.coeffs[1].re;
    let mut per_ray = Vec::new();
    for (theta, samples) in ray_samples {
        if samples.len() >= 4 {
            let design: Vec<Vec<f64>> = samples.iter().map(|&(r, _)| vec![1.0, r.ln()]).collect();
            let y: Vec<Complex64> =
                samples.iter().map(|&(_, l)| Complex64::new(l.ln(), 0.0)).collect();
            let f = lsq_real_design(&design, &y)?;
            per_ray.push((theta, f.coeffs[1].re));
        }
    }
    Ok(OrderEstimate { order, per_ray })
}

/// Geometric radius grid with `count` points from `r_lo` to `r_hi`.
pub fn geometric_radii(r_lo: f64, r_hi: f64, count: usize) -> Vec<f64> {
    assert!(r_lo > 0.0 && r_hi > r_lo && count >= 2);
    let ratio = (r_hi / r_lo).powf(1.0 / (count as f64 - 1.0));
    (0..count).map(|i| r_lo * ratio.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn elementary_factor_basics() {
        for p in 0..6 {
            assert!((weierstrass_factor(p, c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
        }
        // E_0(z) = 1 - z
        assert!((weierstrass_factor(0, c(0.3, 0.0)) - c(0.7, 0.0)).norm() < 1e-15);
        // E_1(0.3) = 0.7 e^{0.3}
        let want = 0.7 * 0.3f64.exp();
        assert!((want - 0.944_901_2).abs() < 1e-7);
        assert!((weierstrass_factor(1, c(0.3, 0.0)) - c(want, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn log_factor_branches_agree() {
        for p in 0..4 {
            for arg in [0.0, 1.0, 2.5, -2.0] {
                let z = Complex64::from_polar(0.501, arg);
                let l = log_weierstrass_factor(p, z).unwrap();
                // direct product formula
                let direct = (c(1.0, 0.0) - z)
                    * (1..=p).map(|k| z.powu(k as u32) / k as f64).sum::<Complex64>().exp();
                assert!((l.exp() - direct).norm() < 1e-14 * (1.0 + direct.norm()));
                // series value just inside the switch radius is consistent
                let zs = Complex64::from_polar(0.499, arg);
                let ls = log_weierstrass_factor(p, zs).unwrap();
                let directs = (c(1.0, 0.0) - zs)
                    * (1..=p).map(|k| zs.powu(k as u32) / k as f64).sum::<Complex64>().exp();
                assert!((ls.exp() - directs).norm() < 1e-14 * (1.0 + directs.norm()));
            }
        }
    }

    #[test]
    fn classical_factor_bound_on_grid() {
        // |E_p(z) - 1| <= |z|^{p+1} for |z| <= 1/2
        for p in 0..5 {
            for i in 0..40 {
                for j in 0..8 {
                    let r = 0.5 * (i as f64 + 1.0) / 40.0;
                    let th = std::f64::consts::PI * j as f64 / 4.0;
                    let z = Complex64::from_polar(r, th);
                    let lhs = (weierstrass_factor(p, z) - c(1.0, 0.0)).norm();
                    assert!(lhs <= r.powi(p as i32 + 1) + 1e-15, "p={p} z={z} lhs={lhs}");
                }
            }
        }
    }

    #[test]
    fn hadamard_trivial_cases() {
        // empty-product conventions: zeros {1..50}, p = 1, z = 0 -> 1
        let zeros = ZeroSequence::new((1..=50).map(|n| c(n as f64, 0.0)).collect(), 0).unwrap();
        let data = HadamardData::new(zeros, 1, vec![]).unwrap();
        let v = hadamard_eval(&data, c(0.0, 0.0), 1e-6).unwrap();
        assert!((v.value - c(1.0, 0.0)).norm() < 1e-14);

        // single zero at 2, p = 0: f(2) = 0
        let zeros = ZeroSequence::finite(vec![c(2.0, 0.0)], 0).unwrap();
        let one = HadamardData::new(zeros, 0, vec![]).unwrap();
        let v0 = hadamard_eval(&one, c(2.0, 0.0), 1e6).unwrap();
        assert_eq!(v0.value, c(0.0, 0.0));
        assert!(v0.log_value.re == f64::NEG_INFINITY);
    }

    #[test]
    fn hadamard_matches_brute_force_partial_product() {
        // zeros a_n = n^2, p = 1, z = -1: stored-10^4 evaluation with tail
        // bound against a one-million-term direct partial product
        let stored = 10_000usize;
        let zeros =
            ZeroSequence::new((1..=stored).map(|n| c((n * n) as f64, 0.0)).collect(), 0).unwrap();
        let data = HadamardData::new(zeros, 1, vec![]).unwrap();
        let z = c(-1.0, 0.0);
        let got = hadamard_eval(&data, z, 1e-9).unwrap();

        let mut log_ref = 0.0f64;
        for n in 1..=1_000_000u64 {
            let x = -1.0 / ((n * n) as f64);
            log_ref += (1.0 - x).ln() + x; // log E_1(x)
        }
        assert!(
            (got.log_value.re - log_ref).abs() < 1e-8,
            "{} vs {log_ref} (tail bound {:.2e})",
            got.log_value.re,
            got.tail_bound
        );
        assert!(got.tail_bound < 1e-9);
    }

    #[test]
    fn hadamard_tail_error_when_zeros_short() {
        let zeros = ZeroSequence::new((1..=30).map(|n| c(n as f64, 0.0)).collect(), 0).unwrap();
        let data = HadamardData::new(zeros, 0, vec![]).unwrap();
        assert!(matches!(
            hadamard_eval(&data, c(20.0, 0.0), 1e-12),
            Err(Error::TailBoundExceedsTol { .. })
        ));
    }

    #[test]
    fn hadamard_p_vs_p_plus_one_consistency() {
        // prod E_{p+1}(z/a_n) = prod E_p(z/a_n) exp(sum (z/a_n)^{p+1}/(p+1))
        let zeros: Vec<Complex64> = (1..=4000).map(|n| c((n * n) as f64, 0.0)).collect();
        let zs0 = ZeroSequence::new(zeros.clone(), 0).unwrap();
        let zs1 = ZeroSequence::new(zeros.clone(), 0).unwrap();
        let p = 1usize;
        let z = c(0.8, 0.4);
        let sum_pow: Complex64 =
            zeros.iter().map(|a| (z / a).powu(p as u32 + 1) / (p as f64 + 1.0)).sum();
        let low = hadamard_eval(&HadamardData::new(zs0, p, vec![]).unwrap(), z, 1e-8).unwrap();
        let high = hadamard_eval(&HadamardData::new(zs1, p + 1, vec![]).unwrap(), z, 1e-8).unwrap();
        let reconstructed = high.log_value - sum_pow;
        assert!(
            (low.log_value - reconstructed).norm() < 1e-9,
            "{} vs {}",
            low.log_value,
            reconstructed
        );
    }

    #[test]
    fn critical_exponents_of_power_sequences() {
        for (k, want) in [(1, 1.0), (2, 0.5), (3, 1.0 / 3.0)] {
            let zeros = ZeroSequence::new(
                (1..=2000).map(|n| c((n as f64).powi(k), 0.0)).collect(),
                0,
            )
            .unwrap();
            let (est, unc) = critical_exponent(&zeros).unwrap();
            assert!((est - want).abs() < 0.05, "k={k}: {est} +- {unc}");
        }
        let short = ZeroSequence::new((1..=50).map(|n| c(n as f64, 0.0)).collect(), 0).unwrap();
        assert!(matches!(critical_exponent(&short), Err(Error::TooFewZeros { .. })));
    }

    #[test]
    fn circle_spectrum_exponent_is_half() {
        // eigenvalues n^2 + m^2 of the circle Laplacian with multiplicity,
        // m = 1, first 2000 entries -> exponent 1/2 (Weyl law in d = 1)
        let mut zs: Vec<Complex64> = Vec::new();
        let mut n = 0i64;
        while zs.len() < 2000 {
            let lam = (n * n) as f64 + 1.0;
            zs.push(c(lam, 0.0));
            if n > 0 {
                zs.push(c(lam, 0.0));
            }
            n += 1;
        }
        zs.truncate(2000);
        let zeros = ZeroSequence::new(zs, 0).unwrap();
        let (est, _) = critical_exponent(&zeros).unwrap();
        assert!((est - 0.5).abs() < 0.05, "{est}");
    }

    #[test]
    fn order_of_exponentials() {
        let radii = geometric_radii(1.0, 500.0, 32);
        let rays =
            [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, -std::f64::consts::FRAC_PI_2];
        // exp(z): log |f| = Re z
        let f1 = |z: Complex64| Some(z.re);
        let est = estimate_order(&f1, &rays, &radii).unwrap();
        assert!((est.order - 1.0).abs() < 0.1, "{}", est.order);

        // exp(z^2): log |f| = Re z^2
        let f2 = |z: Complex64| Some((z * z).re);
        let est2 = estimate_order(&f2, &rays, &radii).unwrap();
        assert!((est2.order - 2.0).abs() < 0.1, "{}", est2.order);
    }

    #[test]
    fn order_grid_unusable_error() {
        let radii = geometric_radii(1.0, 100.0, 8);
        let f = |_z: Complex64| None;
        assert!(matches!(estimate_order(&f, &[0.0], &radii), Err(Error::OrderGridUnusable)));
    }
}
