//! Probabilistic representations: Gaussian free field sampling in the
//! eigenbasis, heat-smeared fields, Monte Carlo partition functions matching
//! inverse square-root determinants, and the discrete lattice determinant
//! ratio on the torus.
//!
//! The field is the random series `phi = sum_lambda c_lambda lambda^{-1/2}
//! e_lambda` with i.i.d. standard normal coefficients per independent real
//! degree of freedom; its covariance is the Green operator. The smeared
//! field `phi_eps = e^{-eps Delta} phi` has covariance
//! `e^{-2 eps Delta} Delta^{-1}`, and
//! `E exp(-1/2 int <phi_eps, V phi_eps>) =
//!  det_F(Id + e^{-eps Delta} Delta^{-1} e^{-eps Delta} V)^{-1/2}`.
//!
//! Randomness is counter-based: every (seed, sample, mode) triple is hashed
//! into an independent stream, so parallel evaluation order cannot change
//! any draw.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::det::lattice::periodic_lattice_logdet;
use crate::det::zeta::{zeta_det_mellin, ZetaConfig};
use crate::det::{fredholm_det_from_eigs, DetResult};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Mode, ModeBasis, PerturbationField};
use crate::operators::{build_laplace, SparseConv};
use crate::renorm::{green_v_eigenvalues, regularized_green};
use crate::special::kahan_sum;

// splitmix64: the standard 64-bit finalizer-based generator
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-(seed, sample, mode) random stream.
struct CounterRng {
    state: u64,
}

impl CounterRng {
    fn new(seed: u64, sample: u64, mode_id: u64) -> Self {
        // two mixing rounds decorrelate the components
        let mut s = seed ^ 0xA076_1D64_78BD_642F;
        let a = splitmix64(&mut s);
        let mut s2 = a ^ sample.wrapping_mul(0x9E3779B97F4A7C15) ^ mode_id.rotate_left(32);
        let b = splitmix64(&mut s2);
        CounterRng { state: b }
    }

    fn uniform(&mut self) -> f64 {
        // 53-bit uniform in (0, 1)
        let u = splitmix64(&mut self.state);
        (((u >> 11) as f64) + 0.5) / (1u64 << 53) as f64
    }

    /// Box-Muller pair of independent standard normals.
    fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        (r * th.cos(), r * th.sin())
    }
}

fn mode_id(m: Mode) -> u64 {
    (((m[0] as i64 + 0x8000) as u64) << 16) | ((m[1] as i64 + 0x8000) as u64)
}

/// The canonical representative of a +-mode pair: the lexicographically
/// positive member.
fn canonical(m: Mode) -> (Mode, bool) {
    if m[0] > 0 || (m[0] == 0 && m[1] > 0) {
        (m, false)
    } else if m == [0, 0] {
        (m, false)
    } else {
        ([-m[0], -m[1]], true)
    }
}

/// A sampled Gaussian free field: the normal coefficients c_lambda aligned
/// with the mode basis (reality constraint c_{-n} = conj c_n), reproducible
/// from (seed, sample index, basis).
#[derive(Debug, Clone, Serialize)]
pub struct GffSample {
    pub coefficients: Vec<Complex64>,
    pub seed: u64,
    pub sample_index: u64,
}

/// Draws the field coefficients for one sample.
pub fn sample_gff(basis: &ModeBasis, seed: u64, sample_index: u64) -> GffSample {
    let coefficients = basis
        .modes
        .iter()
        .map(|&m| {
            let (rep, conjugate) = canonical(m);
            if rep == [0, 0] {
                let (a, _) = CounterRng::new(seed, sample_index, mode_id(rep)).normal_pair();
                Complex64::new(a, 0.0)
            } else {
                let (a, b) = CounterRng::new(seed, sample_index, mode_id(rep)).normal_pair();
                let c = Complex64::new(a, b) / 2f64.sqrt();
                if conjugate {
                    c.conj()
                } else {
                    c
                }
            }
        })
        .collect();
    GffSample { coefficients, seed, sample_index }
}

impl GffSample {
    /// Field coefficients phi_hat(n) = c_n / sqrt(lambda_n).
    pub fn field_coefficients(&self, basis: &ModeBasis) -> Vec<Complex64> {
        self.coefficients
            .iter()
            .zip(&basis.lambda_free)
            .map(|(c, &l)| c / l.sqrt())
            .collect()
    }
}

/// Heat smearing: multiplies field coefficients by e^{-eps lambda_n}.
pub fn smear(field: &[Complex64], basis: &ModeBasis, eps: f64) -> Vec<Complex64> {
    assert!(eps >= 0.0);
    field
        .iter()
        .zip(&basis.lambda_free)
        .map(|(f, &l)| f * (-eps * l).exp())
        .collect()
}

/// The quadratic energy `int <phi, V phi> dv` in Fourier space:
/// `conj(phi_hat) . (Vhat * phi_hat)` with orthonormal eigenfunctions.
pub fn quadratic_energy(field: &[Complex64], conv: &SparseConv) -> Complex64 {
    conv.quadratic_form(field)
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

fn mc_reduce(values: &[f64], seed: u64) -> McEstimate {
    let k = values.len();
    let mean = kahan_sum(values.iter().copied()) / k as f64;
    let var = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (k as f64 - 1.0);
    McEstimate { mean, std_error: (var / k as f64).sqrt(), samples: k, seed }
}

/// Monte Carlo partition function for the smeared field:
/// mean of `exp(-1/2 int <phi_eps, V phi_eps>)` over `samples` draws,
/// together with the reference determinant
/// `det_F(Id + e^{-eps Delta} Delta^{-1} e^{-eps Delta} V)^{-1/2}`.
///
/// The spectral condition (all eigenvalues of the regularized operator above
/// -1 + 0.05) guards the integrability of the estimator.
pub fn mc_partition(
    v: &PerturbationField,
    eps: f64,
    samples: usize,
    seed: u64,
    basis: &ModeBasis,
) -> Result<(McEstimate, DetResult)> {
    assert!(samples >= 100, "need at least 100 samples");
    let conv = SparseConv::build(v, basis)?;
    let reference = partition_reference(v, eps, basis, false)?;
    let weights: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let phi = sample_gff(basis, seed, k);
            let field = smear(&phi.field_coefficients(basis), basis, eps);
            let q = quadratic_energy(&field, &conv);
            (-0.5 * q.re).exp()
        })
        .collect();
    Ok((mc_reduce(&weights, seed), reference))
}

/// Renormalized d = 2 Monte Carlo: the Wick-style counterterm
/// `Lambda_eps = 1/2 E[energy] = 1/2 Tr(e^{-2 eps Delta} Delta^{-1} V)`
/// is subtracted inside the exponent, and the reference becomes the
/// Gohberg-Krein determinant `det_2(Id + T)^{-1/2}`.
pub fn mc_partition_renormalized(
    v: &PerturbationField,
    eps: f64,
    samples: usize,
    seed: u64,
    basis: &ModeBasis,
) -> Result<(McEstimate, DetResult)> {
    assert!(samples >= 100, "need at least 100 samples");
    let conv = SparseConv::build(v, basis)?;
    let reference = partition_reference(v, eps, basis, true)?;
    let trace_t = (v.coeff([0, 0])
        * regularized_green(basis, eps).iter().sum::<f64>())
    .re;
    let weights: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let phi = sample_gff(basis, seed, k);
            let field = smear(&phi.field_coefficients(basis), basis, eps);
            let q = quadratic_energy(&field, &conv);
            (-0.5 * (q.re - trace_t)).exp()
        })
        .collect();
    Ok((mc_reduce(&weights, seed), reference))
}

/// Reference determinant for the partition function, with the spectral
/// condition check. `wick` selects det_2 (renormalized) over det_F.
fn partition_reference(
    v: &PerturbationField,
    eps: f64,
    basis: &ModeBasis,
    wick: bool,
) -> Result<DetResult> {
    let g = regularized_green(basis, eps);
    let vmat = crate::operators::multiplication_matrix(v, basis)?;
    let eigs = green_v_eigenvalues(&g, &vmat)?;
    let min_re = eigs.iter().map(|e| e.re).fold(f64::MAX, f64::min);
    if min_re <= -0.95 {
        return Err(Error::PartitionDivergent { min_eig: min_re });
    }
    let det = fredholm_det_from_eigs(&eigs);
    let trace: Complex64 = eigs.iter().sum();
    let log_half = if wick {
        -0.5 * (det.log_value - trace)
    } else {
        -0.5 * det.log_value
    };
    Ok(DetResult {
        value: log_half.exp(),
        log_value: log_half,
        method: det.method,
        error_estimate: det.error_estimate,
        cutoff: Some(basis.cutoff as u32),
    })
}

/// Per-size lattice determinant ratios and their continuum extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct DgffReport {
    /// (lattice size, log det(Delta_eps + V) - log det(Delta_eps)).
    pub per_size: Vec<(usize, f64)>,
    /// mesh^2-Richardson extrapolation of the log ratio.
    pub extrapolated_log_ratio: f64,
    /// Continuum log ratio from the zeta route, when requested.
    pub continuum_log_ratio: Option<f64>,
}

/// Discrete determinant-ratio limit on the torus: for each lattice size the
/// ratio `det(Delta_eps + V)/det(Delta_eps)` of the massive 5-point
/// operators, Richardson-extrapolated in mesh^2 and compared against the
/// continuum zeta ratio.
///
/// V must be a real band-limited field with zero mean; the mass is added on
/// both sides.
pub fn dgff_ratio(
    v: &PerturbationField,
    geometry: &Geometry,
    sizes: &[usize],
    continuum_cutoff: Option<u32>,
) -> Result<DgffReport> {
    let (side, mass) = match geometry {
        Geometry::Torus2 { side, mass } => (*side, *mass),
        _ => return Err(Error::WrongGeometry("dgff_ratio needs Torus2")),
    };
    let mean = v.mean();
    if mean.norm() > 1e-12 {
        return Err(Error::MeanNotZero(mean.re));
    }
    let mut per_size = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let sampled = v.sample_on_grid(n, side)?;
        let (_, values) = sampled.grid()?;
        let with_v = periodic_lattice_logdet(n, side, mass, values)?;
        let free = periodic_lattice_logdet(n, side, mass, &vec![0.0; n * n])?;
        per_size.push((n, with_v - free));
    }
    // Richardson in mesh^2 on the finest entries
    let mut work: Vec<(f64, f64)> = per_size
        .iter()
        .map(|&(n, r)| (side / n as f64, r))
        .collect();
    work.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut order = 2.0;
    while work.len() > 1 {
        let mut next = Vec::with_capacity(work.len() - 1);
        for w in work.windows(2) {
            let (ha, ra) = w[0];
            let (hb, rb) = w[1];
            let (wa, wb) = (ha.powf(order), hb.powf(order));
            next.push((ha, (ra * wb - rb * wa) / (wb - wa)));
        }
        work = next;
        order += 2.0;
    }
    let extrapolated_log_ratio = work[0].1;

    let continuum_log_ratio = match continuum_cutoff {
        Some(ncut) => {
            let basis = ModeBasis::new(geometry, ncut)?;
            let cfg = ZetaConfig::precise(2);
            let with_v = zeta_det_mellin(&build_laplace(geometry, v, &basis)?, &cfg)?;
            let free =
                zeta_det_mellin(&build_laplace(geometry, &PerturbationField::zero(), &basis)?, &cfg)?;
            Some((with_v.log_value - free.log_value).re)
        }
        None => None,
    };
    Ok(DgffReport { per_size, extrapolated_log_ratio, continuum_log_ratio })
}
