//! Content-addressed eigenvalue cache.
//!
//! Entries are JSON files keyed by the hash of (operator tag, geometry,
//! perturbation coefficients, cutoff, mode-ordering version, builder
//! version). Payloads carry a checksum; corrupt or version-mismatched
//! entries read as misses and are recomputed. Writes go through a temp file
//! and an atomic rename, so concurrent readers always see a consistent
//! entry (single writer per key, last writer wins).

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use specdet::geometry::{Geometry, ModeBasis, PerturbationField};

use crate::config::fnv64_hex;

/// Format version: bump to invalidate all entries.
pub const CACHE_FORMAT_VERSION: u32 = 1;
/// Builder version: bump when operator assembly changes.
pub const BUILDER_VERSION: u32 = 1;

pub struct EigenCache {
    root: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    version: u32,
    key: String,
    checksum: String,
    eigenvalues: Vec<(f64, f64)>,
}

fn payload_checksum(eigs: &[(f64, f64)]) -> String {
    let mut bytes = Vec::with_capacity(eigs.len() * 16);
    for (re, im) in eigs {
        bytes.extend_from_slice(&re.to_bits().to_le_bytes());
        bytes.extend_from_slice(&im.to_bits().to_le_bytes());
    }
    fnv64_hex(&bytes)
}

/// Cache key for an operator spectrum: bit-exact over the inputs.
pub fn spectrum_key(
    tag: &str,
    geometry: &Geometry,
    v: &PerturbationField,
    cutoff: u32,
) -> String {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(tag.as_bytes());
    bytes.push(0);
    let (kind, l, m, sites) = match geometry {
        Geometry::Circle { circumference, mass } => (1u8, *circumference, *mass, 0usize),
        Geometry::Torus2 { side, mass } => (2, *side, *mass, 0),
        Geometry::LatticeTorus { side, mass, sites } => (3, *side, *mass, *sites),
    };
    bytes.push(kind);
    bytes.extend_from_slice(&l.to_bits().to_le_bytes());
    bytes.extend_from_slice(&m.to_bits().to_le_bytes());
    bytes.extend_from_slice(&(sites as u64).to_le_bytes());
    if let Ok(coeffs) = v.fourier() {
        for (k, c) in coeffs {
            bytes.extend_from_slice(&k[0].to_le_bytes());
            bytes.extend_from_slice(&k[1].to_le_bytes());
            bytes.extend_from_slice(&c.re.to_bits().to_le_bytes());
            bytes.extend_from_slice(&c.im.to_bits().to_le_bytes());
        }
    }
    bytes.extend_from_slice(&cutoff.to_le_bytes());
    bytes.extend_from_slice(&specdet::geometry::MODE_ORDERING_VERSION.to_le_bytes());
    bytes.extend_from_slice(&BUILDER_VERSION.to_le_bytes());
    fnv64_hex(&bytes)
}

impl EigenCache {
    /// A cache rooted at `dir`, or disabled when `None`.
    pub fn new(dir: Option<PathBuf>) -> Self {
        if let Some(d) = &dir {
            let _ = fs::create_dir_all(d);
        }
        EigenCache { root: dir }
    }

    /// Resolves the cache directory from the CLI flag, the SPECDET_CACHE_DIR
    /// environment variable, or the output directory default.
    pub fn resolve(no_cache: bool, out_dir: &Path) -> Self {
        if no_cache {
            return EigenCache::new(None);
        }
        let dir = std::env::var_os("SPECDET_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| out_dir.join(".eigen-cache"));
        EigenCache::new(Some(dir))
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<Vec<Complex64>> {
        let path = self.path_for(key)?;
        let text = fs::read_to_string(&path).ok()?;
        let entry: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(_) => {
                eprintln!("warning: cache entry {key} is corrupt; recomputing");
                return None;
            }
        };
        if entry.version != CACHE_FORMAT_VERSION || entry.key != key {
            return None;
        }
        if payload_checksum(&entry.eigenvalues) != entry.checksum {
            eprintln!("warning: cache entry {key} failed its checksum; recomputing");
            return None;
        }
        Some(entry.eigenvalues.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
    }

    pub fn put(&self, key: &str, eigs: &[Complex64]) {
        let Some(path) = self.path_for(key) else { return };
        let payload: Vec<(f64, f64)> = eigs.iter().map(|z| (z.re, z.im)).collect();
        let entry = Entry {
            version: CACHE_FORMAT_VERSION,
            key: key.to_string(),
            checksum: payload_checksum(&payload),
            eigenvalues: payload,
        };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        if let Ok(text) = serde_json::to_string(&entry) {
            if fs::write(&tmp, text).is_ok() {
                let _ = fs::rename(&tmp, &path);
            }
        }
    }

    /// Cached spectrum of the bosonic operator Delta + V.
    pub fn laplace_spectrum(
        &self,
        geometry: &Geometry,
        v: &PerturbationField,
        basis: &ModeBasis,
    ) -> anyhow::Result<Vec<Complex64>> {
        let key = spectrum_key("laplace", geometry, v, basis.cutoff as u32);
        if let Some(eigs) = self.get(&key) {
            if eigs.len() == basis.len() {
                return Ok(eigs);
            }
        }
        let op = specdet::operators::build_laplace(geometry, v, basis)?;
        let eigs = specdet::operators::eigenvalues(&op)?;
        self.put(&key, &eigs);
        Ok(eigs)
    }
}
