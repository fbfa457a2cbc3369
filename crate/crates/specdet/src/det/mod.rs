//! Determinant engines.
//!
//! * [`fredholm_det`]: `det_F(Id + K) = prod_k (1 + lambda_k(K))` over the
//!   full spectrum of a finite matrix.
//! * [`gk_det`]: the regularized determinant `det_p(Id + A)`, computed as the
//!   product of Weierstrass factors `prod_k E_{p-1}(-lambda_k(A))` and
//!   cross-checked against `det_F(Id + R_p(A))` with
//!   `R_p(A) = (Id + A) exp(sum_{n=1}^{p-1} (-1)^n A^n / n) - Id`.
//! * [`gk_log_trace_series`]: `log det_p(Id + A) = sum_{n >= p} (-1)^{n+1}
//!   Tr(A^n) / n`, valid inside the unit spectral radius.
//! * [`heat_trace`]: `Tr e^{-t(Delta+B)}` over the truncated spectrum with a
//!   truncation bound.
//!
//! Zeta determinants live in [`zeta`], the one dimensional monodromy oracle
//! in [`monodromy`], lattice determinants in [`lattice`].

pub mod lattice;
pub mod monodromy;
pub mod zeta;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operators::TruncatedOperator;
use crate::special::{kahan_sum_complex, ln_1p_complex};

/// Which route produced a determinant value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fredholm,
    GkProduct,
    GkRp,
    GkTraceSeries,
    ZetaMellin,
    ZetaMonodromy,
    LatticeLu,
    Renormalized,
}

/// A determinant value together with its continuously tracked logarithm, the
/// computing route and an error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetResult {
    pub value: Complex64,
    pub log_value: Complex64,
    pub method: Method,
    pub error_estimate: f64,
    /// Fourier cutoff of the underlying truncation, when applicable.
    pub cutoff: Option<u32>,
}

impl DetResult {
    fn from_log(log_value: Complex64, method: Method, error_estimate: f64) -> Self {
        let value = if log_value.re == f64::NEG_INFINITY {
            Complex64::new(0.0, 0.0)
        } else {
            log_value.exp()
        };
        DetResult { value, log_value, method, error_estimate, cutoff: None }
    }

    pub fn with_cutoff(mut self, n: u32) -> Self {
        self.cutoff = Some(n);
        self
    }

    /// exp(log_value) must reproduce value; used by sanity tests.
    pub fn log_consistent(&self) -> bool {
        if self.value.norm() <= 1e-100 {
            return self.log_value.re == f64::NEG_INFINITY || self.value.norm() == 0.0;
        }
        (self.log_value.exp() - self.value).norm() <= 1e-12 * self.value.norm()
    }
}

/// Fredholm determinant of `Id + K` over the full spectrum of K.
///
/// The log value accumulates per-factor principal branches of log(1 + lambda).
/// An eigenvalue with 1 + lambda = 0 (within 1e-14 relative) makes the value 0
/// and flags the log value as -inf.
pub fn fredholm_det(k: &CMat) -> Result<DetResult> {
    let eigs = linalg::eigenvalues_auto(k)?;
    Ok(fredholm_det_from_eigs(&eigs))
}

/// Same as [`fredholm_det`] for a precomputed spectrum of K.
pub fn fredholm_det_from_eigs(eigs: &[Complex64]) -> DetResult {
    let mut vanished = false;
    let mut terms = Vec::with_capacity(eigs.len());
    for &l in eigs {
        if (l + 1.0).norm() <= 1e-14 * (1.0 + l.norm()) {
            vanished = true;
        } else {
            terms.push(ln_1p_complex(l));
        }
    }
    let log = kahan_sum_complex(terms);
    let err = 1e-15 * eigs.len() as f64;
    if vanished {
        DetResult::from_log(Complex64::new(f64::NEG_INFINITY, 0.0), Method::Fredholm, err)
    } else {
        DetResult::from_log(log, Method::Fredholm, err)
    }
}

/// `R_p(A) = (Id + A) exp(sum_{n=1}^{p-1} (-1)^n A^n / n) - Id`, the
/// trace-class reduction entering `det_p(Id+A) = det_F(Id+R_p(A))`.
pub fn rp_transform(p: usize, a: &CMat) -> CMat {
    assert!(p >= 2, "rp_transform needs p >= 2");
    let n = a.nrows();
    let mut poly = CMat::zeros(n, n);
    let mut pow: CMat = CMat::identity(n, n);
    for k in 1..p {
        pow = &pow * a;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        for j in 0..n {
            for i in 0..n {
                poly[(i, j)] += pow[(i, j)] * (sign / k as f64);
            }
        }
    }
    let e = linalg::expm(&poly);
    let id_plus_a = CMat::from_fn(n, n, |i, j| {
        a[(i, j)] + if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    let prod = &id_plus_a * &e;
    CMat::from_fn(n, n, |i, j| {
        prod[(i, j)] - if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    })
}

/// Cross-check policy for [`gk_det_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossCheck {
    /// Check `det_F(Id + R_p(A))` when the matrix is at most 256x256.
    Auto,
    Always,
    Never,
}

/// Gohberg-Krein determinant `det_p(Id + A)` with the default (Auto)
/// cross-check policy.
pub fn gk_det(p: usize, a: &CMat) -> Result<DetResult> {
    gk_det_with(p, a, CrossCheck::Auto)
}

/// Gohberg-Krein determinant `det_p(Id + A) = prod_k E_{p-1}(-lambda_k(A))`.
///
/// For p >= 2 the product route is cross-checked against
/// `det_F(Id + R_p(A))` (policy-dependent: the R_p route costs a matrix
/// exponential, so Auto only runs it up to dimension 256). A relative
/// disagreement beyond 1e-8 reports a diagnostic error; otherwise the
/// disagreement feeds the error estimate. p = 1 reduces to [`fredholm_det`].
pub fn gk_det_with(p: usize, a: &CMat, check: CrossCheck) -> Result<DetResult> {
    if p == 0 {
        return Err(Error::Invalid("det_p needs p >= 1".into()));
    }
    if p == 1 {
        return fredholm_det(a);
    }
    let eigs = linalg::eigenvalues_auto(a)?;
    let mut log = Complex64::new(0.0, 0.0);
    let mut vanished = false;
    for &mu in &eigs {
        match crate::entire::log_weierstrass_factor(p - 1, -mu) {
            Some(l) => log += l,
            None => vanished = true,
        }
    }
    let mut result = if vanished {
        DetResult::from_log(Complex64::new(f64::NEG_INFINITY, 0.0), Method::GkProduct, 0.0)
    } else {
        DetResult::from_log(log, Method::GkProduct, 1e-15 * eigs.len() as f64)
    };

    let do_check = match check {
        CrossCheck::Always => true,
        CrossCheck::Never => false,
        CrossCheck::Auto => a.nrows() <= 256,
    };
    if do_check {
        let rp = rp_transform(p, a);
        let alt = fredholm_det(&rp)?;
        let scale = result.value.norm().max(alt.value.norm());
        if scale > 0.0 {
            let rel = (result.value - alt.value).norm() / scale;
            if rel > 1e-8 {
                return Err(Error::RouteDisagreement { a: result.value, b: alt.value, rel });
            }
            result.error_estimate = result.error_estimate.max(rel);
        }
    }
    Ok(result)
}

/// `log det_p(Id + A)` by the trace series
/// `sum_{n >= p} (-1)^{n+1} Tr(A^n) / n`, truncated once the term plus its
/// geometric tail bound falls below `tol`. Requires spectral radius < 1.
pub fn gk_log_trace_series(p: usize, a: &CMat, tol: f64) -> Result<Complex64> {
    if p == 0 {
        return Err(Error::Invalid("det_p needs p >= 1".into()));
    }
    let eigs = linalg::eigenvalues_auto(a)?;
    let rho = linalg::spectral_radius(&eigs);
    if rho >= 1.0 {
        return Err(Error::SeriesDiverges { rho });
    }
    let n_dim = a.nrows();
    // B = A^p
    let mut b: CMat = CMat::identity(n_dim, n_dim);
    for _ in 0..p {
        b = &b * a;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut n = p;
    loop {
        let t = linalg::trace(&b);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = t * (sign / n as f64);
        sum += term;
        // remaining terms are bounded by dim * rho^{n+1} / ((n+1)(1 - rho))
        let tail = n_dim as f64 * rho.powi(n as i32 + 1) / ((n as f64 + 1.0) * (1.0 - rho));
        if tail < tol || n > 100_000 {
            break;
        }
        b = &b * a;
        n += 1;
    }
    Ok(sum)
}

/// Heat trace over a truncated spectrum, with the truncation bound
/// `count * e^{-t lambda_dropped}` for the dropped modes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HeatTraceValue {
    pub value: Complex64,
    pub truncation_bound: f64,
}

/// `Tr e^{-t op}` over the truncated spectrum.
pub fn heat_trace(op: &TruncatedOperator, t: f64) -> Result<HeatTraceValue> {
    let eigs = crate::operators::eigenvalues(op)?;
    let meta = zeta::SpectrumMeta::for_operator(op);
    Ok(heat_trace_from_eigs(&eigs, &meta, t))
}

/// Heat trace from a precomputed spectrum.
pub fn heat_trace_from_eigs(
    eigs: &[Complex64],
    meta: &zeta::SpectrumMeta,
    t: f64,
) -> HeatTraceValue {
    assert!(t > 0.0, "heat trace needs t > 0");
    let value = kahan_sum_complex(eigs.iter().map(|&l| (-t * l).exp()));
    let truncation_bound = meta.count as f64 * (-t * meta.lambda_dropped_min).exp();
    HeatTraceValue { value, truncation_bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Geometry, ModeBasis, PerturbationField};
    use crate::operators::build_laplace;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(vals: &[Complex64]) -> CMat {
        CMat::from_fn(vals.len(), vals.len(), |i, j| if i == j { vals[i] } else { c(0.0, 0.0) })
    }

    /// Deterministic pseudo-random complex matrix scaled to spectral radius.
    fn random_matrix(n: usize, seed: u64, target_rho: f64) -> CMat {
        let mut state = seed;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let raw = CMat::from_fn(n, n, |_, _| c(rnd(), rnd()));
        let eigs = linalg::eigenvalues_general(&raw).unwrap();
        let rho = linalg::spectral_radius(&eigs);
        CMat::from_fn(n, n, |i, j| raw[(i, j)] * (target_rho / rho))
    }

    #[test]
    fn fredholm_trivial_and_diagonal() {
        let z = CMat::zeros(4, 4);
        let d = fredholm_det(&z).unwrap();
        assert!((d.value - c(1.0, 0.0)).norm() < 1e-15);

        let m = diag(&[c(0.5, 0.0), c(-0.25, 0.0)]);
        let d2 = fredholm_det(&m).unwrap();
        assert!((d2.value - c(1.125, 0.0)).norm() < 1e-14);
        assert!(d2.log_consistent());
    }

    #[test]
    fn fredholm_flags_zero() {
        let m = diag(&[c(-1.0, 0.0), c(0.3, 0.0)]);
        let d = fredholm_det(&m).unwrap();
        assert_eq!(d.value, c(0.0, 0.0));
        assert_eq!(d.log_value.re, f64::NEG_INFINITY);
    }

    #[test]
    fn fredholm_matches_trace_series_oracle() {
        // random 8x8 with spectral radius < 0.5: det_F(Id+K) equals
        // exp(sum (-1)^{m+1} Tr(K^m)/m) truncated at m = 60
        let k = random_matrix(8, 0xABCD, 0.45);
        let det = fredholm_det(&k).unwrap();
        let mut series = c(0.0, 0.0);
        let mut b: CMat = k.clone();
        for m in 1..=60 {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            series += linalg::trace(&b) * (sign / m as f64);
            b = &b * &k;
        }
        assert!((det.value - series.exp()).norm() < 1e-10 * det.value.norm());
    }

    #[test]
    fn fredholm_multiplicative() {
        // det_F((Id+A)(Id+B)) = det_F(Id+A) det_F(Id+B) on trace-small matrices
        for seed in [1u64, 2, 3, 4, 5] {
            let a = random_matrix(10, seed, 0.3);
            let b = random_matrix(10, seed.wrapping_mul(77), 0.3);
            let prod_m = {
                let ab = &a * &b;
                CMat::from_fn(10, 10, |i, j| a[(i, j)] + b[(i, j)] + ab[(i, j)])
            };
            let lhs = fredholm_det(&prod_m).unwrap().value;
            let rhs = fredholm_det(&a).unwrap().value * fredholm_det(&b).unwrap().value;
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0), "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn rp_scalar_cases() {
        let z = CMat::zeros(3, 3);
        assert!(linalg::max_abs(&rp_transform(2, &z)) < 1e-15);

        // diagonal a: R_2 entry is (1+a) e^{-a} - 1
        let a = 0.5;
        let m = diag(&[c(a, 0.0)]);
        let r = rp_transform(2, &m);
        let want = (1.0 + a) * (-a).exp() - 1.0;
        assert!((want - (-0.090_204_0)).abs() < 1e-7);
        assert!((r[(0, 0)] - c(want, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn gk_scalar_and_nilpotent() {
        // p = 2, A = diag(0.5): det_2 = 1.5 e^{-0.5}
        let m = diag(&[c(0.5, 0.0)]);
        let d = gk_det_with(2, &m, CrossCheck::Always).unwrap();
        let want = 1.5 * (-0.5f64).exp();
        assert!((want - 0.909_795_9).abs() < 1e-7);
        assert!((d.value - c(want, 0.0)).norm() < 1e-13);

        // strictly upper triangular: all eigenvalues zero -> det_p = 1
        let mut nil = CMat::zeros(4, 4);
        nil[(0, 1)] = c(2.0, 1.0);
        nil[(1, 2)] = c(-3.0, 0.0);
        nil[(0, 3)] = c(0.7, 0.2);
        for p in [2usize, 3, 5] {
            let d = gk_det_with(p, &nil, CrossCheck::Always).unwrap();
            assert!((d.value - c(1.0, 0.0)).norm() < 1e-10, "p={p}: {}", d.value);
        }
    }

    #[test]
    fn det2_equals_detf_times_exp_minus_trace() {
        for seed in 0..20u64 {
            let a = random_matrix(10, 0x5000 + seed, 0.6);
            let d2 = gk_det_with(2, &a, CrossCheck::Never).unwrap().value;
            let df = fredholm_det(&a).unwrap().value;
            let want = df * (-linalg::trace(&a)).exp();
            assert!((d2 - want).norm() <= 1e-12 * want.norm().max(1.0), "seed {seed}");
        }
    }

    #[test]
    fn trace_series_examples() {
        let z = CMat::zeros(3, 3);
        assert!(gk_log_trace_series(1, &z, 1e-14).unwrap().norm() < 1e-16);

        let m = diag(&[c(0.3, 0.0)]);
        let s = gk_log_trace_series(1, &m, 1e-14).unwrap();
        assert!((s - c(1.3f64.ln(), 0.0)).norm() < 1e-13);

        let big = diag(&[c(1.2, 0.0)]);
        assert!(matches!(gk_log_trace_series(1, &big, 1e-10), Err(Error::SeriesDiverges { .. })));
    }

    #[test]
    fn routes_agree_on_random_contractions() {
        for seed in [11u64, 12, 13] {
            let a = random_matrix(12, seed, 0.7);
            for p in [2usize, 3] {
                let prod = gk_det_with(p, &a, CrossCheck::Never).unwrap().value;
                let rp = fredholm_det(&rp_transform(p, &a)).unwrap().value;
                let series = gk_log_trace_series(p, &a, 1e-14).unwrap().exp();
                let scale = prod.norm().max(1.0);
                assert!((prod - rp).norm() < 1e-8 * scale, "p={p} prod vs rp");
                assert!((prod - series).norm() < 1e-10 * scale, "p={p} prod vs series");
            }
        }
    }

    #[test]
    fn heat_trace_theta_oracle() {
        // free circle m = 1: Tr e^{-t(Delta+1)} = sum_n e^{-t(n^2+1)}
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, 64).unwrap();
        let op = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        let t = 1.0;
        let h = heat_trace(&op, t).unwrap();
        // oracle: independent direct sum with a much larger range
        let mut oracle = 0.0f64;
        for n in -2000i64..=2000 {
            oracle += (-t * ((n * n) as f64 + 1.0)).exp();
        }
        assert!((h.value.re - oracle).abs() < 1e-12, "{} vs {oracle}", h.value.re);
        assert!(h.value.im.abs() < 1e-15);

        // large t: spectral gap dominance, e^{-t lambda_min} times multiplicity
        let big_t = 30.0;
        let hb = heat_trace(&op, big_t).unwrap();
        let lead = (-big_t * 1.0f64).exp();
        assert!((hb.value.re - lead).abs() < 1e-3 * lead);
    }

    #[test]
    fn heat_trace_weyl_leading_term() {
        // t^{1/2} e^{t m^2} Tr e^{-t Delta} -> sqrt(pi) for small t
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, 256).unwrap();
        let op = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        for t in [2e-3, 1e-3] {
            let h = heat_trace(&op, t).unwrap();
            let scaled = t.sqrt() * (t * 1.0).exp() * h.value.re;
            assert!((scaled - PI.sqrt()).abs() < 2e-3, "t={t}: {scaled}");
            assert!(h.truncation_bound < 1e-10);
        }
    }
}
