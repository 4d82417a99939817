//! File formats: density matrices as JSON, result tables and signals as CSV,
//! metadata as JSON sidecars.
//!
//! All floating-point table output uses 17 significant digits so values
//! round-trip exactly; nothing here emits timestamps, keeping reruns
//! byte-identical.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockDensityMatrix;
use crate::probe::{ProbeSignal, ProbeSpec};
use crate::reconstruct::{PhotonDistribution, ReconstructionResult};

/// 17 significant digits; parses back to the identical double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    dim: usize,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
    tail_mass_bound: f64,
}

/// Write a density matrix as a JSON document.
pub fn write_state(path: &Path, rho: &FockDensityMatrix) -> Result<()> {
    let dim = rho.dim();
    let entries = rho
        .entries()
        .iter()
        .map(|z| [z.re, z.im])
        .collect::<Vec<_>>();
    let doc = StateFile {
        dim,
        entries,
        tail_mass_bound: rho.tail_mass_bound(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Read a density matrix back, revalidating its invariants.
pub fn read_state(path: &Path) -> Result<FockDensityMatrix> {
    let text = fs::read_to_string(path)?;
    let doc: StateFile =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    if doc.entries.len() != doc.dim * doc.dim {
        return Err(Error::Serialization(format!(
            "expected {} entries for dim {}, found {}",
            doc.dim * doc.dim,
            doc.dim,
            doc.entries.len()
        )));
    }
    let data: Vec<Complex64> = doc
        .entries
        .iter()
        .map(|[re, im]| Complex64::new(*re, *im))
        .collect();
    let entries = Array2::from_shape_vec((doc.dim, doc.dim), data)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    FockDensityMatrix::new(entries, doc.tail_mass_bound)
}

/// Result table: one row per grid point.
pub fn write_scan_csv(path: &Path, scan: &ReconstructionResult) -> Result<()> {
    let mut out = String::from("beta_re,beta_im,s,W,F,tail_estimate,converged\n");
    for pt in &scan.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(pt.beta.0),
            fmt_f64(pt.beta.1),
            fmt_f64(scan.meta.s),
            fmt_f64(pt.w_value),
            fmt_f64(pt.f_value),
            fmt_f64(pt.tail_estimate),
            pt.converged
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parallel oracle table of directly evaluated quasiprobability values.
pub fn write_oracle_csv(path: &Path, betas: &[(f64, f64)], s: f64, values: &[f64]) -> Result<()> {
    let mut out = String::from("beta_re,beta_im,s,W_direct\n");
    for ((re, im), v) in betas.iter().zip(values.iter()) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(*re),
            fmt_f64(*im),
            fmt_f64(s),
            fmt_f64(*v)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Inversion signal as `tau,value` rows.
pub fn write_signal_csv(path: &Path, sig: &ProbeSignal) -> Result<()> {
    let mut out = String::from("tau,value\n");
    for (tau, v) in sig.taus.iter().zip(sig.values.iter()) {
        out.push_str(&format!("{},{}\n", fmt_f64(*tau), fmt_f64(*v)));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Photon distribution as `m,p` rows.
pub fn write_distribution_csv(path: &Path, probs: &[f64]) -> Result<()> {
    let mut out = String::from("m,p\n");
    for (m, p) in probs.iter().enumerate() {
        out.push_str(&format!("{m},{}\n", fmt_f64(*p)));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sidecar for a reconstruction table.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScanSidecar {
    pub version: String,
    pub meta: crate::reconstruct::ScanMeta,
    pub tolerances: crate::Tolerances,
    /// Largest |W - W_direct| over converged points, when the oracle ran.
    pub max_oracle_deviation: Option<f64>,
}

/// Sidecar for a probe signal.
#[derive(Debug, Serialize, Deserialize)]
pub struct SignalSidecar {
    pub version: String,
    pub probe: ProbeSpec,
    pub noise_amplitude: f64,
    pub seed: Option<u64>,
    /// Worst recovered-vs-input deviation over the head of the distribution,
    /// when the input was known.
    pub roundtrip_error: Option<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Distribution with its tail bound, for exact round-trips of probe inputs.
pub fn write_distribution_json(path: &Path, dist: &PhotonDistribution) -> Result<()> {
    write_json(path, dist)
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
