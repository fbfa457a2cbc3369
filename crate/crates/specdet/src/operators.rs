//! Dense mode-basis representations of the free and perturbed operators.
//!
//! The bosonic builder assembles `Delta + V` with matrix elements
//! `delta_{nm} lambda_free(n) + Vhat(n - m)`; the fermionic builders cover
//! the one dimensional chiral operator `D = -i d/dx + m` with eigenvalues
//! `n + m`, its perturbation `D + A` and the second order `D^*(D + A)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Mode, ModeBasis, PerturbationField};
use crate::linalg::{self, CMat, RMat};

/// What a truncated matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Bosonic generalized Laplacian plus potential.
    LaplacePlusV,
    /// Free one dimensional chiral Dirac operator.
    Dirac,
    /// Perturbed Dirac operator D + A.
    DiracPlusA,
    /// Second order fermionic operator D^*(D + A).
    DiracSquared,
}

/// A dense matrix representation of an operator in a fixed mode basis.
#[derive(Clone)]
pub struct TruncatedOperator {
    pub matrix: CMat,
    pub basis: ModeBasis,
    pub kind: OperatorKind,
    /// Mass offset of the underlying Dirac operator, for the fermionic kinds.
    pub dirac_mass: Option<f64>,
}

impl std::fmt::Debug for TruncatedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TruncatedOperator")
            .field("kind", &self.kind)
            .field("dim", &self.matrix.nrows())
            .field("cutoff", &self.basis.cutoff)
            .finish()
    }
}

fn check_band_limit(v: &PerturbationField, basis: &ModeBasis) -> Result<()> {
    let limit = 2 * basis.cutoff;
    let coeffs = v.fourier()?;
    for (k, _) in coeffs {
        if k[0].abs() > limit || k[1].abs() > limit {
            return Err(Error::AliasedPerturbation { mode: k, limit });
        }
    }
    Ok(())
}

/// Builds the bosonic operator `Delta + V` in the mode basis.
///
/// The result is Hermitian exactly when V is real valued; with V = 0 the
/// matrix is diagonal with the free eigenvalues, bit for bit.
pub fn build_laplace(
    geometry: &Geometry,
    v: &PerturbationField,
    basis: &ModeBasis,
) -> Result<TruncatedOperator> {
    match geometry {
        Geometry::Circle { .. } | Geometry::Torus2 { .. } => {}
        Geometry::LatticeTorus { .. } => {
            return Err(Error::WrongGeometry("build_laplace needs Circle or Torus2"))
        }
    }
    if geometry != &basis.geometry {
        return Err(Error::Invalid("basis was built for a different geometry".into()));
    }
    check_band_limit(v, basis)?;
    let coeffs = v.fourier()?;
    let n = basis.len();
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(basis.lambda_free[i], 0.0);
    }
    for (&k, &c) in coeffs.iter() {
        // entry (a, b) picks up Vhat(mode_a - mode_b) = c when mode_a = mode_b + k
        for (b, &mode_b) in basis.modes.iter().enumerate() {
            let target: Mode = [mode_b[0] + k[0], mode_b[1] + k[1]];
            if let Some(a) = basis.index_of(target) {
                m[(a, b)] += c;
            }
        }
    }
    Ok(TruncatedOperator { matrix: m, basis: basis.clone(), kind: OperatorKind::LaplacePlusV, dirac_mass: None })
}

/// Builds the free Dirac matrix diag(u n + m) on the circle, u = 2 pi / L.
fn dirac_free(basis: &ModeBasis, mass: f64) -> CMat {
    let n = basis.len();
    let u = basis.geometry.mode_factor().sqrt();
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(u * basis.modes[i][0] as f64 + mass, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn check_dirac_mass(m: f64, u: f64) -> Result<()> {
    // the free spectrum is u n + m: invertibility fails when m/u is integer
    let q = m / u;
    if (q - q.round()).abs() < 1e-12 {
        return Err(Error::IntegerDiracMass(m, -(q.round() as i64)));
    }
    Ok(())
}

/// Builds the perturbed chiral operator `D + A` with `D = -i d/dx + m` on the
/// circle; eigenvalues of the free part are `n + m`, so integer mass is
/// rejected as non-invertible.
pub fn build_dirac(
    geometry: &Geometry,
    mass: f64,
    a: &PerturbationField,
    basis: &ModeBasis,
) -> Result<TruncatedOperator> {
    if !matches!(geometry, Geometry::Circle { .. }) {
        return Err(Error::WrongGeometry("build_dirac needs Circle"));
    }
    check_dirac_mass(mass, geometry.mode_factor().sqrt())?;
    check_band_limit(a, basis)?;
    let coeffs = a.fourier()?;
    let mut m = dirac_free(basis, mass);
    for (&k, &c) in coeffs.iter() {
        for (b, &mode_b) in basis.modes.iter().enumerate() {
            let target: Mode = [mode_b[0] + k[0], mode_b[1] + k[1]];
            if let Some(ai) = basis.index_of(target) {
                m[(ai, b)] += c;
            }
        }
    }
    Ok(TruncatedOperator { matrix: m, basis: basis.clone(), kind: OperatorKind::DiracPlusA, dirac_mass: Some(mass) })
}

/// Builds `D^*(D + A)`, the second order fermionic operator whose zeta
/// determinant enters the fermionic factorization. In the rank one circle
/// case `D^*` is the plain matrix adjoint of the free Dirac matrix.
pub fn build_dirac_squared(
    geometry: &Geometry,
    mass: f64,
    a: &PerturbationField,
    basis: &ModeBasis,
) -> Result<TruncatedOperator> {
    let d_plus_a = build_dirac(geometry, mass, a, basis)?;
    let dstar = dirac_free(basis, mass); // real diagonal: adjoint equals itself
    let m = &dstar * &d_plus_a.matrix;
    Ok(TruncatedOperator { matrix: m, basis: basis.clone(), kind: OperatorKind::DiracSquared, dirac_mass: Some(mass) })
}

/// Full complex spectrum of the truncated operator, sorted by (re, im).
/// Hermitian matrices are routed to the self-adjoint solver.
pub fn eigenvalues(op: &TruncatedOperator) -> Result<Vec<Complex64>> {
    linalg::eigenvalues_auto(&op.matrix)
}

/// Spectrum through the general non-symmetric solver regardless of symmetry;
/// used as an independent cross-check of the Hermitian fast path.
pub fn eigenvalues_general_route(op: &TruncatedOperator) -> Result<Vec<Complex64>> {
    linalg::eigenvalues_general(&op.matrix)
}

/// The mode-basis matrix of the multiplication operator V (the convolution
/// by Vhat).
pub fn multiplication_matrix(v: &PerturbationField, basis: &ModeBasis) -> Result<CMat> {
    check_band_limit(v, basis)?;
    let coeffs = v.fourier()?;
    let n = basis.len();
    let mut m = CMat::zeros(n, n);
    for (&k, &c) in coeffs.iter() {
        for (b, &mode_b) in basis.modes.iter().enumerate() {
            let target: Mode = [mode_b[0] + k[0], mode_b[1] + k[1]];
            if let Some(a) = basis.index_of(target) {
                m[(a, b)] += c;
            }
        }
    }
    Ok(m)
}

/// Sparse application of the convolution by Vhat in the mode basis: for each
/// Fourier mode k of V, a list of (target, source) index pairs with the
/// coefficient. Used by Monte Carlo energies and trace series, where dense
/// matrix products would dominate the cost.
pub struct SparseConv {
    pub n: usize,
    shifts: Vec<(Complex64, Vec<(u32, u32)>)>,
}

impl SparseConv {
    pub fn build(v: &PerturbationField, basis: &ModeBasis) -> Result<Self> {
        let coeffs = v.fourier()?;
        let mut shifts = Vec::with_capacity(coeffs.len());
        for (&k, &c) in coeffs.iter() {
            let mut pairs = Vec::new();
            for (b, &mode_b) in basis.modes.iter().enumerate() {
                let target: Mode = [mode_b[0] + k[0], mode_b[1] + k[1]];
                if let Some(a) = basis.index_of(target) {
                    pairs.push((a as u32, b as u32));
                }
            }
            shifts.push((c, pairs));
        }
        Ok(SparseConv { n: basis.len(), shifts })
    }

    /// out = V x (accumulating into a zeroed buffer).
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (c, pairs) in &self.shifts {
            for &(t, s) in pairs {
                out[t as usize] += c * x[s as usize];
            }
        }
    }

    /// Quadratic form conj(x) . (V x).
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, pairs) in &self.shifts {
            let mut part = Complex64::new(0.0, 0.0);
            for &(t, s) in pairs {
                part += x[t as usize].conj() * x[s as usize];
            }
            acc += c * part;
        }
        acc
    }
}

/// Relative invertibility threshold: smallest |eigenvalue| must exceed
/// 1e-12 times the scale of the matrix.
fn invertibility_floor(op: &TruncatedOperator) -> f64 {
    1e-12 * linalg::max_abs(&op.matrix).max(1.0)
}

/// Computes `P^{-1} V` in the mode basis: the compact operator whose
/// determinants are taken. Errors when P is numerically singular.
pub fn green_compose(op: &TruncatedOperator, v: &PerturbationField) -> Result<CMat> {
    let n = op.basis.len();
    let floor = invertibility_floor(op);
    // Diagonal fast path (free operators).
    let mut is_diagonal = true;
    'outer: for j in 0..n {
        for i in 0..n {
            if i != j && op.matrix[(i, j)].norm() != 0.0 {
                is_diagonal = false;
                break 'outer;
            }
        }
    }
    let vmat = multiplication_matrix(v, &op.basis)?;
    if is_diagonal {
        let mut min_abs = f64::MAX;
        for i in 0..n {
            min_abs = min_abs.min(op.matrix[(i, i)].norm());
        }
        if min_abs < floor {
            return Err(Error::NearSingular { min_abs });
        }
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            let d = op.matrix[(i, i)];
            for j in 0..n {
                out[(i, j)] = vmat[(i, j)] / d;
            }
        }
        return Ok(out);
    }
    let eigs = eigenvalues(op)?;
    let min_abs = eigs.iter().map(|z| z.norm()).fold(f64::MAX, f64::min);
    if min_abs < floor {
        return Err(Error::NearSingular { min_abs });
    }
    Ok(linalg::lu_solve(&op.matrix, &vmat))
}

/// The standard 5-point lattice Laplacian plus mass and potential on an
/// `n x n` periodic grid of total side `side`:
/// `(4 u(s) - sum_neighbors u) / mesh^2 + m^2 u(s) + V(s) u(s)`.
///
/// This low-level builder accepts any `n >= 2` and `mass >= 0`; the
/// geometry-validated entry point is [`build_lattice_laplace`].
pub fn lattice_laplacian_matrix(n: usize, side: f64, mass: f64, v: &[f64]) -> Result<RMat> {
    if v.len() != n * n {
        return Err(Error::GridShape { got: v.len(), expected: n * n });
    }
    let mesh = side / n as f64;
    let w = 1.0 / (mesh * mesh);
    let dim = n * n;
    let mut m = RMat::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            let s = i * n + j;
            m[(s, s)] = 4.0 * w + mass * mass + v[s];
            let nb = [
                ((i + 1) % n) * n + j,
                ((i + n - 1) % n) * n + j,
                i * n + (j + 1) % n,
                i * n + (j + n - 1) % n,
            ];
            for t in nb {
                m[(s, t)] += -w;
            }
        }
    }
    Ok(m)
}

/// Geometry-validated lattice builder (LatticeTorus only).
pub fn build_lattice_laplace(geometry: &Geometry, v: &PerturbationField) -> Result<RMat> {
    let (side, mass, sites) = match geometry {
        Geometry::LatticeTorus { side, mass, sites } => (*side, *mass, *sites),
        _ => return Err(Error::WrongGeometry("build_lattice_laplace needs LatticeTorus")),
    };
    let (n, values) = v.grid()?;
    if n != sites {
        return Err(Error::GridShape { got: n * n, expected: sites * sites });
    }
    lattice_laplacian_matrix(sites, side, mass, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(m: f64) -> (Geometry, ModeBasis) {
        let g = Geometry::circle(2.0 * PI, m).unwrap();
        let b = ModeBasis::new(&g, 1).unwrap();
        (g, b)
    }

    #[test]
    fn free_laplace_is_exact_diagonal() {
        let (g, b) = circle(1.0);
        let op = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        // modes (-1, 0, 1) -> diag(2, 1, 2), bit-exact
        assert_eq!(op.matrix[(0, 0)], Complex64::new(2.0, 0.0));
        assert_eq!(op.matrix[(1, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(op.matrix[(2, 2)], Complex64::new(2.0, 0.0));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(op.matrix[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn cosine_gives_unit_tridiagonal() {
        let (g, b) = circle(1.0);
        let v = PerturbationField::cosine([1, 0], 2.0); // Vhat(+-1) = 1
        let op = build_laplace(&g, &v, &b).unwrap();
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((op.matrix[(i, j)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        assert!((op.matrix[(0, 2)]).norm() < 1e-15);
        assert!(linalg::hermitian_deviation(&op.matrix) < 1e-14);
    }

    #[test]
    fn complex_potential_breaks_hermiticity() {
        let (g, b) = circle(1.0);
        // i cos(x): coefficients i/2 at both +-1
        let v = PerturbationField::cosine([1, 0], 1.0).scaled(Complex64::new(0.0, 1.0)).unwrap();
        assert!(!v.is_real());
        let op = build_laplace(&g, &v, &b).unwrap();
        assert!(linalg::hermitian_deviation(&op.matrix) > 0.5);
    }

    #[test]
    fn aliasing_rejected() {
        let (g, b) = circle(1.0); // cutoff 1 -> band limit 2
        let v = PerturbationField::cosine([3, 0], 1.0);
        assert!(matches!(
            build_laplace(&g, &v, &b),
            Err(Error::AliasedPerturbation { limit: 2, .. })
        ));
    }

    #[test]
    fn dirac_free_spectrum_and_mass_guard() {
        let (g, b) = circle(1.0);
        let op = build_dirac(&g, 0.5, &PerturbationField::zero(), &b).unwrap();
        assert_eq!(op.matrix[(0, 0)], Complex64::new(-0.5, 0.0));
        assert_eq!(op.matrix[(1, 1)], Complex64::new(0.5, 0.0));
        assert_eq!(op.matrix[(2, 2)], Complex64::new(1.5, 0.0));

        // constant A = a shifts the diagonal
        let a = PerturbationField::constant(0.25);
        let shifted = build_dirac(&g, 0.5, &a, &b).unwrap();
        assert!((shifted.matrix[(0, 0)] - Complex64::new(-0.25, 0.0)).norm() < 1e-15);

        assert!(matches!(
            build_dirac(&g, 1.0, &PerturbationField::zero(), &b),
            Err(Error::IntegerDiracMass(_, -1))
        ));
    }

    #[test]
    fn eigenvalues_sorted_and_self_adjoint() {
        let (g, b) = circle(1.0);
        let op = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        let e = eigenvalues(&op).unwrap();
        assert!((e[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((e[1] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((e[2] - Complex64::new(2.0, 0.0)).norm() < 1e-14);

        let g2 = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b2 = ModeBasis::new(&g2, 8).unwrap();
        let v = PerturbationField::cosine([1, 0], 2.0);
        let op2 = build_laplace(&g2, &v, &b2).unwrap();
        for z in eigenvalues(&op2).unwrap() {
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn cross_solver_oracle() {
        // Hermitian matrix through both eigensolver routes, N = 32
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, 32).unwrap();
        let v = PerturbationField::cosine([1, 0], 2.0);
        let op = build_laplace(&g, &v, &b).unwrap();
        let fast = eigenvalues(&op).unwrap();
        let slow = eigenvalues_general_route(&op).unwrap();
        for (a, bb) in fast.iter().zip(slow.iter()) {
            assert!((a - bb).norm() < 1e-10, "{a} vs {bb}");
        }
    }

    #[test]
    fn green_compose_examples() {
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, 6).unwrap();
        let free = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();

        // V = 0 -> zero matrix
        let z = green_compose(&free, &PerturbationField::zero()).unwrap();
        assert!(linalg::max_abs(&z) == 0.0);

        // constant V -> diag(c / (n^2 + 1))
        let c = 0.7;
        let gc = green_compose(&free, &PerturbationField::constant(c)).unwrap();
        for (i, &mode) in b.modes.iter().enumerate() {
            let lam = (mode[0] * mode[0]) as f64 + 1.0;
            assert!((gc[(i, i)] - Complex64::new(c / lam, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn green_trace_square_mode_sum_oracle() {
        // Tr((Delta^{-1} V)^2) for V = 2cos x equals
        // sum_n [ 1/(lam_n lam_{n+1}) + 1/(lam_n lam_{n-1}) ] over the basis,
        // with lam_n = n^2 + 1 and the convention Vhat(+-1) = 1.
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, 24).unwrap();
        let free = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        let v = PerturbationField::cosine([1, 0], 2.0);
        let a = green_compose(&free, &v).unwrap();
        let sq = &a * &a;
        let tr = linalg::trace(&sq);

        let lam = |n: i32| (n * n) as f64 + 1.0;
        let nmax = 24i32;
        let mut oracle = 0.0;
        for n in -nmax..=nmax {
            if n + 1 <= nmax {
                oracle += 1.0 / (lam(n) * lam(n + 1));
            }
            if n - 1 >= -nmax {
                oracle += 1.0 / (lam(n) * lam(n - 1));
            }
        }
        assert!((tr.re - oracle).abs() < 1e-12, "{} vs {oracle}", tr.re);
        assert!(tr.im.abs() < 1e-13);
    }

    #[test]
    fn near_singular_rejected() {
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, 2).unwrap();
        let free = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        // shift the operator so one eigenvalue hits zero: V = -1 constant
        let v = PerturbationField::constant(-1.0);
        let op = build_laplace(&g, &v, &b).unwrap();
        assert!(matches!(
            green_compose(&op, &PerturbationField::constant(1.0)),
            Err(Error::NearSingular { .. })
        ));
        drop(free);
    }

    #[test]
    fn lattice_stencil_and_spectrum() {
        // rows of the massless stencil sum to zero (low-level builder, n = 2)
        let m = lattice_laplacian_matrix(2, 1.0, 0.0, &[0.0; 4]).unwrap();
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| m[(i, j)]).sum();
            assert!(row.abs() < 1e-12);
        }

        // massive free lattice: smallest eigenvalue is m^2 (constant mode)
        let n = 8usize;
        let side = 2.0 * PI;
        let mass = 0.8;
        let ml = lattice_laplacian_matrix(n, side, mass, &vec![0.0; n * n]).unwrap();
        let dim = n * n;
        let cm = CMat::from_fn(dim, dim, |i, j| Complex64::new(ml[(i, j)], 0.0));
        let eigs = linalg::eigenvalues_hermitian(&cm).unwrap();
        assert!((eigs[0] - mass * mass).abs() < 1e-10);

        // all eigenvalues match the discrete Fourier formula
        let mesh = side / n as f64;
        let mut oracle: Vec<f64> = (0..n)
            .flat_map(|j| {
                (0..n).map(move |k| {
                    let sj = (PI * j as f64 / n as f64).sin();
                    let sk = (PI * k as f64 / n as f64).sin();
                    (4.0 * sj * sj + 4.0 * sk * sk) / (mesh * mesh) + mass * mass
                })
            })
            .collect();
        oracle.sort_by(f64::total_cmp);
        for (a, b) in eigs.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn truncation_consistency_under_doubling() {
        // eigenvalues below lambda_free(N/2) move < 1e-8 when N doubles
        let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
        let v = PerturbationField::linear_combination(&[
            (Complex64::new(1.0, 0.0), &PerturbationField::cosine([1, 0], 2.0)),
            (Complex64::new(1.0, 0.0), &PerturbationField::sine([2, 0], 0.5)),
        ])
        .unwrap();
        let b1 = ModeBasis::new(&g, 16).unwrap();
        let b2 = ModeBasis::new(&g, 32).unwrap();
        let e1 = eigenvalues(&build_laplace(&g, &v, &b1).unwrap()).unwrap();
        let e2 = eigenvalues(&build_laplace(&g, &v, &b2).unwrap()).unwrap();
        let cut = g.free_eigenvalue([8, 0]);
        for (a, b) in e1.iter().zip(e2.iter()) {
            if a.re < cut {
                assert!((a - b).norm() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn lattice_eigenvalues_converge_quadratically() {
        // smallest eigenvalues approach n^2 (2pi/L)^2 + m^2 at rate mesh^2
        let side = 2.0 * PI;
        let mass = 1.0;
        let continuum: Vec<f64> = {
            let g = Geometry::circle(side, mass).unwrap();
            let mut v: Vec<f64> = (-3..=3)
                .flat_map(|a| (-3..=3).map(move |b| (a * a + b * b) as f64 + 1.0))
                .collect();
            v.sort_by(f64::total_cmp);
            drop(g);
            v
        };
        let lowest = |n: usize| -> Vec<f64> {
            let m = lattice_laplacian_matrix(n, side, mass, &vec![0.0; n * n]).unwrap();
            let dim = n * n;
            let cm = CMat::from_fn(dim, dim, |i, j| Complex64::new(m[(i, j)], 0.0));
            linalg::eigenvalues_hermitian(&cm).unwrap().into_iter().take(10).collect()
        };
        let e16 = lowest(16);
        let e32 = lowest(32);
        for k in 0..10 {
            let err16 = (e16[k] - continuum[k]).abs();
            let err32 = (e32[k] - continuum[k]).abs();
            if err16 > 1e-8 {
                let rate = err16 / err32;
                assert!(rate > 3.0 && rate < 5.5, "mode {k}: rate {rate}");
            }
        }
    }
}
