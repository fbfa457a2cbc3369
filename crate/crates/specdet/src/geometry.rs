//! Model geometries, Fourier mode bases and perturbation fields.
//!
//! Supported spaces are the flat circle, the flat square torus and the
//! periodic lattice torus. The mass parameter is required to be positive so
//! that the free operator `Delta + m^2` is invertible with spectrum bounded
//! below by `m^2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer mode index. One dimensional geometries use `[n, 0]`.
pub type Mode = [i32; 2];

/// A flat model space together with the mass term of the free operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    /// Circle of the given circumference.
    Circle { circumference: f64, mass: f64 },
    /// Square torus of the given side length.
    Torus2 { side: f64, mass: f64 },
    /// Periodic lattice torus: `sites x sites` points on a square torus.
    LatticeTorus { side: f64, mass: f64, sites: usize },
}

impl Geometry {
    pub fn circle(circumference: f64, mass: f64) -> Result<Self> {
        if mass <= 0.0 {
            return Err(Error::NonPositiveMass(mass));
        }
        if circumference <= 0.0 {
            return Err(Error::Invalid(format!("circumference must be positive, got {circumference}")));
        }
        Ok(Geometry::Circle { circumference, mass })
    }

    pub fn torus2(side: f64, mass: f64) -> Result<Self> {
        if mass <= 0.0 {
            return Err(Error::NonPositiveMass(mass));
        }
        if side <= 0.0 {
            return Err(Error::Invalid(format!("side must be positive, got {side}")));
        }
        Ok(Geometry::Torus2 { side, mass })
    }

    pub fn lattice_torus(side: f64, mass: f64, sites: usize) -> Result<Self> {
        if mass <= 0.0 {
            return Err(Error::NonPositiveMass(mass));
        }
        if sites < 4 {
            return Err(Error::LatticeTooSmall(sites));
        }
        Ok(Geometry::LatticeTorus { side, mass, sites })
    }

    /// Dimension of the underlying manifold.
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Circle { .. } => 1,
            Geometry::Torus2 { .. } | Geometry::LatticeTorus { .. } => 2,
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Geometry::Circle { mass, .. }
            | Geometry::Torus2 { mass, .. }
            | Geometry::LatticeTorus { mass, .. } => *mass,
        }
    }

    /// Side length (circumference in d = 1).
    pub fn length(&self) -> f64 {
        match self {
            Geometry::Circle { circumference, .. } => *circumference,
            Geometry::Torus2 { side, .. } | Geometry::LatticeTorus { side, .. } => *side,
        }
    }

    /// Total volume of the space.
    pub fn volume(&self) -> f64 {
        let l = self.length();
        match self.dim() {
            1 => l,
            _ => l * l,
        }
    }

    /// The squared momentum unit `(2 pi / L)^2`.
    pub fn mode_factor(&self) -> f64 {
        let u = 2.0 * PI / self.length();
        u * u
    }

    /// Free eigenvalue of the generalized Laplacian at an integer mode.
    pub fn free_eigenvalue(&self, mode: Mode) -> f64 {
        let m = self.mass();
        let n2 = (mode[0] as f64) * (mode[0] as f64) + (mode[1] as f64) * (mode[1] as f64);
        n2 * self.mode_factor() + m * m
    }
}

/// Ordered truncation of the Fourier basis: all integer modes with
/// `|n_i| <= cutoff`, sorted lexicographically, together with the free
/// eigenvalues.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub geometry: Geometry,
    pub cutoff: i32,
    /// Lexicographically ordered mode tuples.
    pub modes: Vec<Mode>,
    /// Free eigenvalues aligned with `modes`.
    pub lambda_free: Vec<f64>,
    index: BTreeMap<Mode, usize>,
}

/// Version tag for the mode ordering; cache keys include it.
pub const MODE_ORDERING_VERSION: u32 = 1;

impl ModeBasis {
    pub fn new(geometry: &Geometry, cutoff: u32) -> Result<Self> {
        let n = cutoff as i32;
        let dim = geometry.dim();
        if matches!(geometry, Geometry::LatticeTorus { .. }) {
            return Err(Error::WrongGeometry("LatticeTorus has no Fourier mode basis; use the lattice builders"));
        }
        let mut modes = Vec::new();
        match dim {
            1 => {
                for n1 in -n..=n {
                    modes.push([n1, 0]);
                }
            }
            _ => {
                for n1 in -n..=n {
                    for n2 in -n..=n {
                        modes.push([n1, n2]);
                    }
                }
            }
        }
        modes.sort_unstable();
        let lambda_free: Vec<f64> = modes.iter().map(|&m| geometry.free_eigenvalue(m)).collect();
        let index = modes.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(ModeBasis { geometry: geometry.clone(), cutoff: n, modes, lambda_free, index })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, mode: Mode) -> Option<usize> {
        self.index.get(&mode).copied()
    }

    /// Largest free eigenvalue of the truncation.
    pub fn lambda_free_max(&self) -> f64 {
        self.lambda_free.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Smallest free eigenvalue (equals mass^2).
    pub fn lambda_free_min(&self) -> f64 {
        self.lambda_free.iter().copied().fold(f64::MAX, f64::min)
    }
}

/// Internal representation of a perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Repr {
    /// Finitely supported Fourier coefficients: V(x) = sum_k v_k e^{i k.x (2pi/L)}.
    Fourier(BTreeMap<Mode, (f64, f64)>),
    /// Real samples on the `n x n` lattice grid (row-major, site (i, j) at
    /// x = (i, j) * L / n).
    Grid { n: usize, values: Vec<f64> },
}

/// A smooth perturbation: either a band-limited trigonometric polynomial
/// given by its Fourier coefficients, or real samples on a lattice grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    repr: Repr,
    /// Real-space support interval (1d, before band projection), when the
    /// field was built from a compactly supported bump.
    pub support_1d: Option<(f64, f64)>,
}

impl PerturbationField {
    pub fn zero() -> Self {
        PerturbationField { repr: Repr::Fourier(BTreeMap::new()), support_1d: None }
    }

    pub fn from_fourier(coeffs: BTreeMap<Mode, Complex64>) -> Self {
        let map = coeffs
            .into_iter()
            .filter(|(_, v)| v.norm() != 0.0)
            .map(|(k, v)| (k, (v.re, v.im)))
            .collect();
        PerturbationField { repr: Repr::Fourier(map), support_1d: None }
    }

    /// Constant field V(x) = c.
    pub fn constant(c: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert([0, 0], Complex64::new(c, 0.0));
        Self::from_fourier(m)
    }

    /// amp * cos(k.x): coefficients amp/2 at +-k.
    pub fn cosine(k: Mode, amp: f64) -> Self {
        let mut m = BTreeMap::new();
        let half = Complex64::new(amp / 2.0, 0.0);
        *m.entry(k).or_insert(Complex64::new(0.0, 0.0)) += half;
        *m.entry([-k[0], -k[1]]).or_insert(Complex64::new(0.0, 0.0)) += half;
        Self::from_fourier(m)
    }

    /// amp * sin(k.x).
    pub fn sine(k: Mode, amp: f64) -> Self {
        let mut m = BTreeMap::new();
        *m.entry(k).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(0.0, -amp / 2.0);
        *m.entry([-k[0], -k[1]]).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(0.0, amp / 2.0);
        Self::from_fourier(m)
    }

    /// Real grid samples for the lattice torus.
    pub fn from_grid(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::GridShape { got: values.len(), expected: n * n });
        }
        Ok(PerturbationField { repr: Repr::Grid { n, values }, support_1d: None })
    }

    /// Smooth compactly supported bump on the circle of circumference `l`:
    /// amp * exp(-u^2 / (1 - u^2)) with u = wrapped(x - center)/radius inside
    /// |u| < 1, zero outside. Fourier coefficients are computed by periodic
    /// trapezoid quadrature and truncated at the band limit.
    pub fn bump_1d(center: f64, radius: f64, amp: f64, band: i32, l: f64) -> Self {
        let grid = 1 << 13;
        let mut coeffs = BTreeMap::new();
        for k in -band..=band {
            let mut acc = Complex64::new(0.0, 0.0);
            for g in 0..grid {
                let x = l * g as f64 / grid as f64;
                let mut d = (x - center).rem_euclid(l);
                if d > l / 2.0 {
                    d -= l;
                }
                let u = d / radius;
                let val = if u.abs() < 1.0 { amp * (-u * u / (1.0 - u * u)).exp() } else { 0.0 };
                let phase = Complex64::new(0.0, -2.0 * PI * k as f64 * x / l).exp();
                acc += val * phase;
            }
            let v = acc / grid as f64;
            if v.norm() > 1e-300 {
                coeffs.insert([k, 0], v);
            }
        }
        let mut f = Self::from_fourier(coeffs);
        f.support_1d = Some((center - radius, center + radius));
        f
    }

    /// Fourier coefficient at a mode (zero when absent).
    pub fn coeff(&self, k: Mode) -> Complex64 {
        match &self.repr {
            Repr::Fourier(m) => m.get(&k).map(|&(re, im)| Complex64::new(re, im)).unwrap_or_default(),
            Repr::Grid { .. } => Complex64::new(0.0, 0.0),
        }
    }

    pub fn fourier(&self) -> Result<BTreeMap<Mode, Complex64>> {
        match &self.repr {
            Repr::Fourier(m) => {
                Ok(m.iter().map(|(&k, &(re, im))| (k, Complex64::new(re, im))).collect())
            }
            Repr::Grid { .. } => Err(Error::NotFourier),
        }
    }

    pub fn grid(&self) -> Result<(usize, &[f64])> {
        match &self.repr {
            Repr::Grid { n, values } => Ok((*n, values)),
            Repr::Fourier(_) => Err(Error::NotGrid),
        }
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self.repr, Repr::Fourier(_))
    }

    /// Largest |k_i| over the support of the coefficient map.
    pub fn band_limit(&self) -> i32 {
        match &self.repr {
            Repr::Fourier(m) => m.keys().map(|k| k[0].abs().max(k[1].abs())).max().unwrap_or(0),
            Repr::Grid { n, .. } => (*n as i32) / 2,
        }
    }

    /// True when the coefficients are Hermitian symmetric, i.e. the field is
    /// real valued.
    pub fn is_real(&self) -> bool {
        match &self.repr {
            Repr::Fourier(m) => m.iter().all(|(&k, &(re, im))| {
                let conj_at_minus = m
                    .get(&[-k[0], -k[1]])
                    .map(|&(r, i)| Complex64::new(r, i))
                    .unwrap_or_default();
                (Complex64::new(re, -im) - conj_at_minus).norm() <= 1e-14 * (1.0 + re.hypot(im))
            }),
            Repr::Grid { .. } => true,
        }
    }

    /// Mean value of the field (the zero-mode coefficient).
    pub fn mean(&self) -> Complex64 {
        match &self.repr {
            Repr::Fourier(_) => self.coeff([0, 0]),
            Repr::Grid { n, values } => {
                Complex64::new(values.iter().sum::<f64>() / (n * n) as f64, 0.0)
            }
        }
    }

    /// Integral of the field over the space of the given geometry.
    pub fn integral(&self, geometry: &Geometry) -> Complex64 {
        self.mean() * geometry.volume()
    }

    /// Pointwise evaluation of a Fourier field at position x (components
    /// beyond the geometry dimension are ignored).
    pub fn evaluate(&self, x: [f64; 2], l: f64) -> Result<Complex64> {
        let m = match &self.repr {
            Repr::Fourier(m) => m,
            Repr::Grid { .. } => return Err(Error::NotFourier),
        };
        let u = 2.0 * PI / l;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&k, &(re, im)) in m {
            let phase = u * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            acc += Complex64::new(re, im) * Complex64::new(0.0, phase).exp();
        }
        Ok(acc)
    }

    /// Complex linear combination sum_i c_i * f_i of Fourier fields.
    pub fn linear_combination(terms: &[(Complex64, &PerturbationField)]) -> Result<Self> {
        let mut acc: BTreeMap<Mode, Complex64> = BTreeMap::new();
        for (c, f) in terms {
            let m = f.fourier()?;
            for (k, v) in m {
                *acc.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c * v;
            }
        }
        Ok(Self::from_fourier(acc))
    }

    /// Scales all coefficients by a complex factor.
    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        Self::linear_combination(&[(c, self)])
    }

    /// Samples a Fourier field on the `n x n` grid of a torus of side `l`,
    /// yielding a real grid field. Errors if the field is not real valued.
    pub fn sample_on_grid(&self, n: usize, l: f64) -> Result<Self> {
        if !self.is_real() {
            return Err(Error::Invalid("cannot sample a complex field to a real grid".into()));
        }
        let mut values = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = [l * i as f64 / n as f64, l * j as f64 / n as f64];
                values[i * n + j] = self.evaluate(x, l)?.re;
            }
        }
        Self::from_grid(n, values)
    }
}
