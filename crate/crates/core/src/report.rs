//! Shared key-rate report emitted by the finite-size calculators.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Result of a finite-size key/randomness-length calculation.
///
/// `e_hat` is the pessimistic error parameter driving the entropy bound
/// (ê_z for BB84, the phase error for the device-independent variant, Q̂ for
/// randomness generation). `hmin_smooth` is the certified smooth min-entropy
/// in bits, `ell` the extractable length (never negative, never above the
/// raw string length), and `delta_sec` the secrecy parameter achieved at
/// `ell`. `terms` is an ordered name → value breakdown of every intermediate
/// quantity, so reports serialize deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub hmin_smooth: f64,
    pub e_hat: f64,
    pub ell: u64,
    pub delta_sec: f64,
    pub terms: BTreeMap<String, f64>,
}

impl KeyRateReport {
    /// Look up a term by name.
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }
}
