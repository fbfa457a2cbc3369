//! Log-determinants of lattice operators.
//!
//! [`lattice_logdet`] factors a dense symmetric positive definite matrix and
//! returns the sum of log pivots. [`periodic_lattice_logdet`] computes the
//! same quantity for the periodic 5-point Laplacian plus mass and potential
//! without ever materializing the dense matrix: the torus wrap in the slow
//! index is a rank-2n correction of a banded matrix, handled by a Woodbury
//! determinant identity on top of a banded Cholesky factorization.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_logdet, dense_lu_logdet, BandedSpd, RMat};

/// Sum of log pivots of a dense SPD matrix (fails with the index of the
/// first non-positive pivot).
pub fn lattice_logdet(m: &RMat) -> Result<f64> {
    cholesky_logdet(m)
}

/// log det of the periodic lattice operator
/// `(4 u(s) - sum_nb u)/mesh^2 + m^2 u + V u` on an n x n torus grid,
/// through banded Cholesky plus a Woodbury correction for the i-direction
/// wrap links.
///
/// Split A = B + U C U^T where B drops the 2n wrap couplings between row 0
/// and row n-1 (B is banded with bandwidth n and stays SPD), U selects the
/// wrap endpoints and C carries the coupling -1/mesh^2. Then
/// `log det A = log det B + log det(I + C U^T B^{-1} U)`.
pub fn periodic_lattice_logdet(n: usize, side: f64, mass: f64, v: &[f64]) -> Result<f64> {
    if v.len() != n * n {
        return Err(Error::GridShape { got: v.len(), expected: n * n });
    }
    let mesh = side / n as f64;
    let w = 1.0 / (mesh * mesh);
    let dim = n * n;
    let bw = n; // (i, j) couples (i+1, j): index distance n
    let mut b = BandedSpd::zeros(dim, bw);
    for i in 0..n {
        for j in 0..n {
            let s = i * n + j;
            b.set(s, s, 4.0 * w + mass * mass + v[s]);
            // j-direction couplings including the j-wrap (distance <= n-1)
            let right = i * n + (j + 1) % n;
            if right != s {
                b.set(s.max(right), s.min(right), -w + b.at(s.max(right), s.min(right)));
            }
            // i-direction coupling to i+1 only when not wrapping
            if i + 1 < n {
                let down = (i + 1) * n + j;
                b.set(down, s, -w);
            }
        }
    }
    let chol = b.factor()?;
    let mut logdet = chol.logdet();

    // wrap links (0, j) <-> (n-1, j): A = B + P M P^T with P the selector of
    // [e_{a_0}, ..., e_{a_{n-1}}, e_{b_0}, ..., e_{b_{n-1}}] and
    // M = [[0, -w I], [-w I, 0]]
    let r = 2 * n;
    let idx: Vec<usize> = (0..n).map(|j| j).chain((0..n).map(|j| (n - 1) * n + j)).collect();
    // X = B^{-1} P, column by column
    let mut x_cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    for &col in &idx {
        let mut e = vec![0.0; dim];
        e[col] = 1.0;
        chol.solve(&mut e);
        x_cols.push(e);
    }
    // S = I + M P^T X: M mixes the two halves with factor -w
    let mut s = RMat::zeros(r, r);
    for a in 0..r {
        // row a of M P^T X: M[a][k] is nonzero at the partner k = a +- n
        // with value -w, so (M P^T X)[a][b] = -w X[idx[partner]][b]
        let partner = if a < n { a + n } else { a - n };
        for bcol in 0..r {
            s[(a, bcol)] = -w * x_cols[bcol][idx[partner]];
        }
        s[(a, a)] += 1.0;
    }
    let (ld, sign) = dense_lu_logdet(&s);
    if sign <= 0.0 {
        return Err(Error::NotPositiveDefinite { index: 0, value: sign });
    }
    logdet += ld;
    Ok(logdet)
}
