//! Experiment configuration: a fixed-schema TOML document that round-trips
//! losslessly. Every run embeds the hash of its canonical serialization in
//! all outputs, so a run is reproducible from the JSON summary alone.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use specdet::geometry::{Geometry, PerturbationField};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// zeta | gkdet | factorize | derivatives | renormalize | gff-mc | dgff | order
    pub experiment: String,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub zeta: ZetaSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub renormalize: RenormalizeSection,
    #[serde(default)]
    pub factorize: FactorizeSection,
    #[serde(default)]
    pub derivatives: DerivativesSection,
    #[serde(default)]
    pub dgff: DgffSection,
    #[serde(default)]
    pub order: OrderSection,
    /// Per-check tolerance overrides.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// circle | torus2 | lattice_torus
    pub kind: String,
    pub length: f64,
    pub mass: f64,
    #[serde(default)]
    pub sites: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cosines: Vec<TrigTerm>,
    #[serde(default)]
    pub sines: Vec<TrigTerm>,
    #[serde(default)]
    pub bumps: Vec<BumpTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub mode: [i32; 2],
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BumpTerm {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
    pub band: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cutoff: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: String,
    #[serde(default)]
    pub no_cache: bool,
}

fn default_out() -> String {
    "specdet-out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ZetaSection {
    pub cut_angle: Option<f64>,
    pub heat_coeffs: Option<usize>,
    pub split_point: Option<f64>,
}

impl Default for ZetaSection {
    fn default() -> Self {
        ZetaSection { cut_angle: None, heat_coeffs: None, split_point: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub epsilon: f64,
    pub samples: usize,
    /// Subtract the Wick counterterm and compare against det_2 (d = 2).
    #[serde(default)]
    pub renormalized: bool,
}

impl Default for McSection {
    fn default() -> Self {
        McSection { epsilon: 0.05, samples: 10_000, renormalized: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RenormalizeSection {
    pub eps_points: usize,
}

impl Default for RenormalizeSection {
    fn default() -> Self {
        RenormalizeSection { eps_points: 16 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FactorizeSection {
    pub p: Option<usize>,
    pub z_min: f64,
    pub z_max: f64,
    pub z_points: usize,
    pub max_degree: Option<usize>,
    /// Use the fermionic family D^*(D + zA) instead of Delta + zV.
    #[serde(default)]
    pub fermionic: bool,
    #[serde(default)]
    pub dirac_mass: Option<f64>,
}

impl Default for FactorizeSection {
    fn default() -> Self {
        FactorizeSection {
            p: None,
            z_min: -1.0,
            z_max: 1.0,
            z_points: 11,
            max_degree: None,
            fermionic: false,
            dirac_mass: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DerivativesSection {
    pub orders: Vec<usize>,
    pub step: f64,
}

impl Default for DerivativesSection {
    fn default() -> Self {
        DerivativesSection { orders: vec![2], step: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DgffSection {
    pub sizes: Vec<usize>,
    pub continuum_cutoff: Option<u32>,
}

impl Default for DgffSection {
    fn default() -> Self {
        DgffSection { sizes: vec![16, 32, 64], continuum_cutoff: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OrderSection {
    pub p: Option<usize>,
}

impl Default for OrderSection {
    fn default() -> Self {
        OrderSection { p: None }
    }
}

pub const EXPERIMENTS: [&str; 8] =
    ["zeta", "gkdet", "factorize", "derivatives", "renormalize", "gff-mc", "dgff", "order"];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            bail!("experiment: unknown experiment `{}` (expected one of {:?})", self.experiment, EXPERIMENTS);
        }
        if self.geometry.mass <= 0.0 {
            bail!("geometry.mass: must be positive, got {}", self.geometry.mass);
        }
        if self.geometry.length <= 0.0 {
            bail!("geometry.length: must be positive, got {}", self.geometry.length);
        }
        match self.geometry.kind.as_str() {
            "circle" | "torus2" => {}
            "lattice_torus" => {
                let sites = self
                    .geometry
                    .sites
                    .ok_or_else(|| anyhow::anyhow!("geometry.sites: required for lattice_torus"))?;
                if sites < 4 {
                    bail!("geometry.sites: must be at least 4, got {sites}");
                }
            }
            other => bail!("geometry.kind: unknown kind `{other}`"),
        }
        if self.run.cutoff == 0 {
            bail!("run.cutoff: must be positive");
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let g = match self.geometry.kind.as_str() {
            "circle" => Geometry::circle(self.geometry.length, self.geometry.mass),
            "torus2" => Geometry::torus2(self.geometry.length, self.geometry.mass),
            "lattice_torus" => Geometry::lattice_torus(
                self.geometry.length,
                self.geometry.mass,
                self.geometry.sites.unwrap_or(0),
            ),
            other => bail!("geometry.kind: unknown kind `{other}`"),
        };
        g.map_err(|e| anyhow::anyhow!("geometry: {e}"))
    }

    pub fn perturbation(&self) -> Result<PerturbationField> {
        let mut terms: Vec<(Complex64, PerturbationField)> = Vec::new();
        let one = Complex64::new(1.0, 0.0);
        if self.perturbation.constant != 0.0 {
            terms.push((one, PerturbationField::constant(self.perturbation.constant)));
        }
        for t in &self.perturbation.cosines {
            terms.push((one, PerturbationField::cosine(t.mode, t.amplitude)));
        }
        for t in &self.perturbation.sines {
            terms.push((one, PerturbationField::sine(t.mode, t.amplitude)));
        }
        for b in &self.perturbation.bumps {
            terms.push((
                one,
                PerturbationField::bump_1d(
                    b.center,
                    b.radius,
                    b.amplitude,
                    b.band,
                    self.geometry.length,
                ),
            ));
        }
        if terms.is_empty() {
            return Ok(PerturbationField::zero());
        }
        let refs: Vec<(Complex64, &PerturbationField)> =
            terms.iter().map(|(c, f)| (*c, f)).collect();
        PerturbationField::linear_combination(&refs).map_err(|e| anyhow::anyhow!("perturbation: {e}"))
    }

    /// Canonical serialization used for hashing.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

/// FNV-1a 64-bit hash, hex-encoded; used for config hashes and cache keys.
pub fn fnv64_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
