//! Dense linear algebra wrappers used throughout the crate.
//!
//! Everything is built on `faer` dense kernels. Complex matrices are
//! `faer::Mat<c64>` where `c64` is `num_complex::Complex<f64>`, so no scalar
//! conversion happens at module boundaries.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = Mat<Complex64>;
/// Dense real matrix.
pub type RMat = Mat<f64>;

/// Max |entry| of a complex matrix.
pub fn max_abs(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Max |M - M^H| entry: deviation from Hermitian symmetry.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

fn sort_complex(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// Full complex spectrum through the general (non-symmetric) QR algorithm,
/// sorted by (re, im) with multiplicity.
pub fn eigenvalues_general(m: &CMat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    m.eigenvalues()
        .map(sort_complex)
        .map_err(|_| Error::EigenSolver { n, scale: max_abs(m) })
}

/// Spectrum of a Hermitian matrix (real, nondecreasing).
pub fn eigenvalues_hermitian(m: &CMat) -> Result<Vec<f64>> {
    let n = m.nrows();
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenSolver { n, scale: max_abs(m) })
}

/// Threshold below which a matrix is routed to the self-adjoint solver.
pub fn hermitian_tolerance(m: &CMat) -> f64 {
    1e-13 * max_abs(m).max(1.0)
}

/// Spectrum with automatic Hermitian detection. Hermitian inputs go through
/// the self-adjoint solver, everything else through the general one; either
/// way the result is sorted by (re, im).
pub fn eigenvalues_auto(m: &CMat) -> Result<Vec<Complex64>> {
    if hermitian_deviation(m) <= hermitian_tolerance(m) {
        Ok(eigenvalues_hermitian(m)?
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect())
    } else {
        eigenvalues_general(m)
    }
}

/// Solves A X = B by partial-pivot LU.
pub fn lu_solve(a: &CMat, b: &CMat) -> CMat {
    let lu = a.partial_piv_lu();
    let mut x = b.clone();
    lu.solve_in_place(x.as_mut());
    x
}

/// Spectral radius from the full spectrum.
pub fn spectral_radius(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Trace of a complex matrix.
pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// 1-norm (max column sum), used by the exp scaling heuristic.
fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by Pade-13 scaling and squaring (Higham 2005).
/// Backward error is kept at the 1e-13 level for the f64 theta constants.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let theta13 = 5.371_920_351_148_152;
    let norm = one_norm(a);
    let s = if norm > theta13 { (norm / theta13).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);

    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let id: CMat = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * &(Mat::from_fn(n, n, |i, j| {
        a6[(i, j)] * B[13] + a4[(i, j)] * B[11] + a2[(i, j)] * B[9]
    })) + Mat::from_fn(n, n, |i, j| {
        a6[(i, j)] * B[7] + a4[(i, j)] * B[5] + a2[(i, j)] * B[3] + id[(i, j)] * B[1]
    });
    let u = &a * &u_inner;
    let v = &a6 * &(Mat::from_fn(n, n, |i, j| {
        a6[(i, j)] * B[12] + a4[(i, j)] * B[10] + a2[(i, j)] * B[8]
    })) + Mat::from_fn(n, n, |i, j| {
        a6[(i, j)] * B[6] + a4[(i, j)] * B[4] + a2[(i, j)] * B[2] + id[(i, j)] * B[0]
    });
    // solve (V - U) X = (V + U)
    let lhs = Mat::from_fn(n, n, |i, j| v[(i, j)] - u[(i, j)]);
    let rhs = Mat::from_fn(n, n, |i, j| v[(i, j)] + u[(i, j)]);
    let mut x = lu_solve(&lhs, &rhs);
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// Least-squares fit result for a real design matrix.
#[derive(Debug, Clone)]
pub struct LsqFit {
    /// Fitted coefficients (complex to cover complex observations).
    pub coeffs: Vec<Complex64>,
    /// Standard error per coefficient, from the residual variance and
    /// (X^T X)^{-1} diagonal.
    pub sigma: Vec<f64>,
    /// RMS of the fit residuals.
    pub residual_rms: f64,
    /// Condition estimate of the column-scaled design (ratio of extreme
    /// R diagonals).
    pub condition: f64,
}

/// Dense least squares min ||X c - y|| by Householder QR with column scaling.
/// `x` is row-major: x[row][col]. Observations may be complex; the design is
/// real, so real and imaginary parts solve independently.
pub fn lsq_real_design(x: &[Vec<f64>], y: &[Complex64]) -> Result<LsqFit> {
    let rows = x.len();
    assert!(rows > 0 && rows == y.len());
    let cols = x[0].len();
    assert!(rows >= cols, "need at least as many samples as parameters");

    // column scaling for conditioning
    let mut col_scale = vec![0.0f64; cols];
    for c in 0..cols {
        let nrm = x.iter().map(|r| r[c] * r[c]).sum::<f64>().sqrt();
        col_scale[c] = if nrm > 0.0 { nrm } else { 1.0 };
    }
    // augmented matrix [X_scaled | y_re | y_im]
    let width = cols + 2;
    let mut a = vec![0.0f64; rows * width];
    for r in 0..rows {
        for c in 0..cols {
            a[r * width + c] = x[r][c] / col_scale[c];
        }
        a[r * width + cols] = y[r].re;
        a[r * width + cols + 1] = y[r].im;
    }
    // Householder QR on the first `cols` columns, applied to the full width
    for k in 0..cols {
        let mut alpha = 0.0f64;
        for r in k..rows {
            alpha += a[r * width + k] * a[r * width + k];
        }
        alpha = alpha.sqrt();
        if alpha == 0.0 {
            return Err(Error::IllConditionedFit { cond: f64::INFINITY });
        }
        if a[k * width + k] > 0.0 {
            alpha = -alpha;
        }
        let mut v = vec![0.0f64; rows - k];
        v[0] = a[k * width + k] - alpha;
        for r in k + 1..rows {
            v[r - k] = a[r * width + k];
        }
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for c in k..width {
                let mut dot = 0.0;
                for r in k..rows {
                    dot += v[r - k] * a[r * width + c];
                }
                let f = 2.0 * dot / vnorm2;
                for r in k..rows {
                    a[r * width + c] -= f * v[r - k];
                }
            }
        }
        a[k * width + k] = alpha;
        for r in k + 1..rows {
            a[r * width + k] = 0.0;
        }
    }
    // condition from R diagonal
    let mut rmax = 0.0f64;
    let mut rmin = f64::INFINITY;
    for k in 0..cols {
        let d = a[k * width + k].abs();
        rmax = rmax.max(d);
        rmin = rmin.min(d);
    }
    let condition = if rmin > 0.0 { rmax / rmin } else { f64::INFINITY };

    // back substitution for both right-hand sides
    let mut c_re = vec![0.0f64; cols];
    let mut c_im = vec![0.0f64; cols];
    for part in 0..2 {
        let rhs_col = cols + part;
        let out = if part == 0 { &mut c_re } else { &mut c_im };
        for k in (0..cols).rev() {
            let mut s = a[k * width + rhs_col];
            for j in k + 1..cols {
                s -= a[k * width + j] * out[j];
            }
            out[k] = s / a[k * width + k];
        }
    }
    // residuals
    let mut rss = 0.0f64;
    for r in cols..rows {
        rss += a[r * width + cols] * a[r * width + cols] + a[r * width + cols + 1] * a[r * width + cols + 1];
    }
    let dof = (rows - cols).max(1);
    let residual_rms = (rss / rows as f64).sqrt();
    let var = rss / dof as f64;

    // sigma_i from (R^T R)^{-1} diagonal: solve R w = e_i
    let mut sigma = vec![0.0f64; cols];
    for i in 0..cols {
        let mut w = vec![0.0f64; cols];
        // solve R^T u = e_i then accumulate ||row of R^{-1}||: use R^{-1} e_i backward
        w[i] = 1.0 / a[i * width + i];
        for k in (0..i).rev() {
            let mut s = 0.0;
            for j in k + 1..=i {
                s -= a[k * width + j] * w[j];
            }
            w[k] = s / a[k * width + k];
        }
        let norm2: f64 = w.iter().map(|t| t * t).sum();
        sigma[i] = (var * norm2).sqrt() / col_scale[i];
    }

    let coeffs = (0..cols)
        .map(|i| Complex64::new(c_re[i], c_im[i]) / col_scale[i])
        .collect();
    Ok(LsqFit { coeffs, sigma, residual_rms, condition })
}

/// Cholesky log-determinant of a dense symmetric positive definite matrix.
/// Returns the sum of log pivots. Fails with the index of the first
/// non-positive pivot.
pub fn cholesky_logdet(m: &RMat) -> Result<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut l = vec![0.0f64; n * n];
    let mut logdet = 0.0f64;
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, value: d });
        }
        let dj = d.sqrt();
        l[j * n + j] = dj;
        logdet += d.ln();
        for i in j + 1..n {
            let mut s = m[(i, j)];
            let (lr, ljr) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            for k in 0..j {
                s -= lr[k] * ljr[k];
            }
            l[i * n + j] = s / dj;
        }
    }
    Ok(logdet)
}

/// Symmetric positive definite banded matrix stored by diagonals:
/// `band[i][k]` holds A[i, i-k] for k = 0..=bw (k <= i).
pub struct BandedSpd {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>, // row-major n x (bw+1), data[i*(bw+1)+k] = A[i, i-k]
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        if j > i {
            return self.at(j, i);
        }
        let k = i - j;
        if k > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + k]
        }
    }

    /// Set A[i,j] (and its transpose element) for j <= i, i-j <= bw.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        let k = i - j;
        assert!(k <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.data[i * (self.bw + 1) + k] = v;
    }

    /// In-place banded Cholesky. Returns the factor (same layout) or the
    /// failing pivot index.
    pub fn factor(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            // update column j using previous columns within the band
            let start = j.saturating_sub(bw);
            let mut d = l[j * w];
            for k in start..j {
                let ljk = l[j * w + (j - k)];
                d -= ljk * ljk;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, value: d });
            }
            let dj = d.sqrt();
            l[j * w] = dj;
            let imax = (j + bw).min(n - 1);
            for i in j + 1..=imax {
                let mut s = if i - j <= bw { l[i * w + (i - j)] } else { 0.0 };
                let kstart = i.saturating_sub(bw).max(start);
                for k in kstart..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / dj;
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// Lower-triangular banded Cholesky factor.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Sum over log pivots (pivot = L_jj^2).
    pub fn logdet(&self) -> f64 {
        let w = self.bw + 1;
        (0..self.n).map(|j| 2.0 * self.l[j * w].ln()).sum()
    }

    /// Solves A x = b in place for one right-hand side.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        // forward: L y = b
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = b[i];
            for k in start..i {
                s -= self.l[i * w + (i - k)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let imax = (i + bw).min(n - 1);
            let mut s = b[i];
            for k in i + 1..=imax {
                s -= self.l[k * w + (k - i)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
    }
}

/// log |det| and sign of a small dense real matrix by Gaussian elimination
/// with partial pivoting.
pub fn dense_lu_logdet(m: &RMat) -> (f64, f64) {
    let n = m.nrows();
    let mut a: Vec<f64> = (0..n * n).map(|t| m[(t / n, t % n)]).collect();
    let mut logdet = 0.0f64;
    let mut sign = 1.0f64;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            if a[r * n + k].abs() > best {
                best = a[r * n + k].abs();
                piv = r;
            }
        }
        if best == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            sign = -sign;
        }
        let d = a[k * n + k];
        logdet += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
        for r in k + 1..n {
            let f = a[r * n + k] / d;
            if f != 0.0 {
                for c in k + 1..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            }
        }
    }
    (logdet, sign)
}
