//! Finite-key BB84 (entanglement-based) calculator, Bell-spectrum
//! min-entropy tools, and a depolarizing-channel Monte Carlo simulator.
//!
//! The key-length bound is
//!
//! ```text
//! ℓ ≤ n[1 − h(ê_z)] − leak_EC − log₂(2/(ε_sec² ε_cor))
//! ```
//!
//! with ê_z = e_z + Serfling penalty. For n EPR pairs diagonal in the
//! generalized Bell basis with weights λ_{i,j} (i = bit-flip string,
//! j = phase-flip string), measuring X on each pair gives exactly
//!
//! ```text
//! H_min(X|E) = n − log₂ Σ_j (Σ_i √λ_{i,j})²
//! ```
//!
//! and the marginalized bound n − log₂ (Σ_i √λ_i)² with λ_i = Σ_j λ_{i,j}
//! never exceeds it (Minkowski's inequality).

use crate::bounds::{self, BoundsError, FailureBudget};
use crate::minentropy::{min_entropy_lb, EigProfile, MinEntropyError};
use crate::report::KeyRateReport;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Conventional error-correction inefficiency for `with_standard_leak`:
/// leak_EC = 1.16 · n · h(e_x).
pub const EC_EFFICIENCY: f64 = 1.16;

/// Largest pair count for which the exact Bell-spectrum formulas are
/// evaluated (the weight table has 4^n entries).
pub const MAX_EXACT_PAIRS: usize = 6;

#[derive(Debug, Error)]
pub enum Bb84Error {
    #[error("invalid parameter {what} = {value}")]
    InvalidParam { what: &'static str, value: f64 },
    #[error("spectrum on {n_pairs} pairs exceeds the exact-evaluation limit of {max}")]
    TooLarge { n_pairs: usize, max: usize },
    #[error("invalid Bell spectrum: {reason}")]
    InvalidSpectrum { reason: String },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    MinEntropy(#[from] MinEntropyError),
}

pub type Result<T> = std::result::Result<T, Bb84Error>;

// ----- Parameters and the finite-key calculator -----

/// Inputs of the finite-key calculation.
#[derive(Debug, Clone)]
pub struct Bb84Params {
    /// Key-generation bits (X basis).
    pub n: u64,
    /// Test bits per basis.
    pub k: u64,
    /// Observed X-basis error frequency.
    pub e_x: f64,
    /// Observed Z-basis error frequency.
    pub e_z: f64,
    /// Error-correction leakage in bits.
    pub leak_ec: f64,
    pub budget: FailureBudget,
}

impl Bb84Params {
    pub fn new(
        n: u64,
        k: u64,
        e_x: f64,
        e_z: f64,
        leak_ec: f64,
        budget: FailureBudget,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Bb84Error::InvalidParam { what: "n", value: n as f64 });
        }
        if k < 1 {
            return Err(Bb84Error::InvalidParam { what: "k", value: k as f64 });
        }
        for (what, v) in [("e_x", e_x), ("e_z", e_z)] {
            if !v.is_finite() || !(0.0..=0.5).contains(&v) {
                return Err(Bb84Error::InvalidParam { what, value: v });
            }
        }
        if !leak_ec.is_finite() || leak_ec < 0.0 {
            return Err(Bb84Error::InvalidParam { what: "leak_ec", value: leak_ec });
        }
        Ok(Bb84Params { n, k, e_x, e_z, leak_ec, budget })
    }

    /// Same, with the conventional leakage model leak_EC = 1.16 · n · h(e_x).
    pub fn with_standard_leak(
        n: u64,
        k: u64,
        e_x: f64,
        e_z: f64,
        budget: FailureBudget,
    ) -> Result<Self> {
        if !e_x.is_finite() || !(0.0..=0.5).contains(&e_x) {
            return Err(Bb84Error::InvalidParam { what: "e_x", value: e_x });
        }
        let leak = EC_EFFICIENCY * n as f64 * bounds::binary_entropy(e_x)?;
        Self::new(n, k, e_x, e_z, leak, budget)
    }
}

/// Pessimistic Z-basis error estimate ê_z = e_z + Serfling penalty, clamped
/// to [0, 1/2] (the entropy bound's domain; beyond it the key is 0 anyway).
pub fn bb84_e_hat(p: &Bb84Params) -> Result<f64> {
    let delta = bounds::serfling_delta(p.n, p.k, p.budget.eps_smooth)?;
    Ok((p.e_z + delta).clamp(0.0, 0.5))
}

/// Finite-key length ℓ = max(0, ⌊n[1−h(ê_z)] − leak_EC − log₂(2/(ε_sec²ε_cor))⌋)
/// with the full term breakdown and the achieved secrecy parameter.
pub fn bb84_key_length(p: &Bb84Params) -> Result<KeyRateReport> {
    let delta = bounds::serfling_delta(p.n, p.k, p.budget.eps_smooth)?;
    let e_hat = (p.e_z + delta).clamp(0.0, 0.5);
    let h = bounds::binary_entropy(e_hat)?;
    let hmin_smooth = p.n as f64 * (1.0 - h);
    let log_term = 1.0 - 2.0 * p.budget.eps_sec.log2() - p.budget.eps_cor.log2();
    let rhs = hmin_smooth - p.leak_ec - log_term;
    let ell = if rhs > 0.0 { rhs.floor() as u64 } else { 0 };
    let delta_sec = bounds::secrecy_delta(ell, hmin_smooth, p.budget.eps_smooth);

    let mut terms = BTreeMap::new();
    terms.insert("n".into(), p.n as f64);
    terms.insert("k".into(), p.k as f64);
    terms.insert("e_x".into(), p.e_x);
    terms.insert("e_z".into(), p.e_z);
    terms.insert("serfling_delta".into(), delta);
    terms.insert("e_hat".into(), e_hat);
    terms.insert("binary_entropy".into(), h);
    terms.insert("hmin_smooth".into(), hmin_smooth);
    terms.insert("leak_ec".into(), p.leak_ec);
    terms.insert("log_term".into(), log_term);
    terms.insert("ell".into(), ell as f64);
    terms.insert("rate_per_round".into(), ell as f64 / p.n as f64);
    terms.insert("delta_sec".into(), delta_sec);

    Ok(KeyRateReport { hmin_smooth, e_hat, ell, delta_sec, terms })
}

/// Asymptotic secret fraction 1 − h(e_z) − efficiency·h(e_x) (finite-size
/// corrections dropped); may be negative when the error rates are too high.
pub fn bb84_asymptotic_rate(e_x: f64, e_z: f64, efficiency: f64) -> Result<f64> {
    if !efficiency.is_finite() || efficiency < 0.0 {
        return Err(Bb84Error::InvalidParam { what: "efficiency", value: efficiency });
    }
    for (what, v) in [("e_x", e_x), ("e_z", e_z)] {
        if !v.is_finite() || !(0.0..=0.5).contains(&v) {
            return Err(Bb84Error::InvalidParam { what, value: v });
        }
    }
    Ok(1.0 - bounds::binary_entropy(e_z)? - efficiency * bounds::binary_entropy(e_x)?)
}

/// Largest symmetric error rate e (= e_x = e_z) with a positive key length,
/// found by bisection with leak_EC = efficiency · n · h(e).
pub fn zero_rate_threshold(
    n: u64,
    k: u64,
    budget: &FailureBudget,
    efficiency: f64,
) -> Result<f64> {
    let rhs = |e: f64| -> Result<f64> {
        let leak = efficiency * n as f64 * bounds::binary_entropy(e)?;
        let p = Bb84Params::new(n, k, e, e, leak, budget.clone())?;
        let report = bb84_key_length(&p)?;
        Ok(report.term("hmin_smooth").unwrap()
            - report.term("leak_ec").unwrap()
            - report.term("log_term").unwrap())
    };
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    if rhs(lo)? <= 0.0 {
        return Ok(0.0);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if rhs(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ----- Bell spectra (exact small-n verification) -----

/// Spectrum of an n-pair state diagonal in the generalized Bell basis:
/// weights λ_{i,j} keyed by the bit-flip string i and phase-flip string j
/// (n-bit masks).
#[derive(Debug, Clone)]
pub struct BellSpectrum {
    n_pairs: usize,
    weights: BTreeMap<(u16, u16), f64>,
}

impl BellSpectrum {
    pub fn new(n_pairs: usize, weights: BTreeMap<(u16, u16), f64>) -> Result<Self> {
        if n_pairs < 1 || n_pairs > 16 {
            return Err(Bb84Error::InvalidSpectrum {
                reason: format!("n_pairs = {n_pairs} out of range"),
            });
        }
        if weights.is_empty() {
            return Err(Bb84Error::InvalidSpectrum { reason: "empty weight table".into() });
        }
        let limit = 1u32 << n_pairs;
        let mut total = 0.0;
        for (&(i, j), &w) in &weights {
            if u32::from(i) >= limit || u32::from(j) >= limit {
                return Err(Bb84Error::InvalidSpectrum {
                    reason: format!("index ({i},{j}) does not fit in {n_pairs} bits"),
                });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Bb84Error::InvalidSpectrum {
                    reason: format!("weight at ({i},{j}) is {w}"),
                });
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Bb84Error::InvalidSpectrum {
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        Ok(BellSpectrum { n_pairs, weights })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn weights(&self) -> &BTreeMap<(u16, u16), f64> {
        &self.weights
    }

    fn check_exact_limit(&self) -> Result<()> {
        if self.n_pairs > MAX_EXACT_PAIRS {
            return Err(Bb84Error::TooLarge { n_pairs: self.n_pairs, max: MAX_EXACT_PAIRS });
        }
        Ok(())
    }
}

/// Exact min-entropy of the X-basis measurement on a Bell-diagonal n-pair
/// state: n − log₂ Σ_j (Σ_i √λ_{i,j})², in bits.
pub fn bell_measure_x_hmin(s: &BellSpectrum) -> Result<f64> {
    s.check_exact_limit()?;
    let n = s.n_pairs as f64;
    let mut branch_roots = vec![0.0f64; 1usize << s.n_pairs];
    for (&(_, j), &w) in &s.weights {
        branch_roots[j as usize] += w.sqrt();
    }
    let total: f64 = branch_roots.iter().map(|r| r * r).sum();
    Ok((n - total.log2()).clamp(0.0, n))
}

/// Marginalized lower bound n − log₂ (Σ_i √λ_i)² with λ_i = Σ_j λ_{i,j};
/// never exceeds [`bell_measure_x_hmin`].
pub fn marginalize_spectrum(s: &BellSpectrum) -> Result<f64> {
    s.check_exact_limit()?;
    let mut marginals = vec![0.0f64; 1usize << s.n_pairs];
    for (&(i, _), &w) in &s.weights {
        marginals[i as usize] += w;
    }
    // The marginal distribution is a d = 2^n weight profile; the bound is
    // exactly the canonical min-entropy of that profile.
    Ok(min_entropy_lb(&EigProfile::new(marginals)?))
}

// ----- Monte Carlo simulator (depolarizing channel) -----

/// Observed statistics of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Bb84Observation {
    pub pairs: u64,
    pub sifted_x: u64,
    pub sifted_z: u64,
    pub errors_x: u64,
    pub errors_z: u64,
    /// errors_x / sifted_x (0 if nothing sifted).
    pub e_x: f64,
    /// errors_z / sifted_z (0 if nothing sifted).
    pub e_z: f64,
}

/// Per-pair error class under depolarizing noise of strength q: identity
/// with weight 1 − 3q/4, bit flip, phase flip, and both with weight q/4
/// each. A bit flip shows up in the Z basis, a phase flip in the X basis.
fn sample_error_class(rng: &mut ChaCha8Rng, depol: f64) -> (bool, bool) {
    let r: f64 = rng.gen();
    let q4 = depol / 4.0;
    if r < 1.0 - 3.0 * q4 {
        (false, false) // no error
    } else if r < 1.0 - 2.0 * q4 {
        (true, false) // bit flip
    } else if r < 1.0 - q4 {
        (false, true) // phase flip
    } else {
        (true, true) // both
    }
}

/// Simulate `n_pairs` depolarized EPR pairs with uniformly random basis
/// choices on both sides, sift, and count disagreements per basis.
/// Deterministic for a fixed seed.
pub fn simulate_bb84(n_pairs: u64, depol: f64, seed: u64) -> Result<Bb84Observation> {
    if n_pairs < 1 {
        return Err(Bb84Error::InvalidParam { what: "n_pairs", value: n_pairs as f64 });
    }
    if !depol.is_finite() || !(0.0..=1.0).contains(&depol) {
        return Err(Bb84Error::InvalidParam { what: "depol", value: depol });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Bb84Observation {
        pairs: n_pairs,
        sifted_x: 0,
        sifted_z: 0,
        errors_x: 0,
        errors_z: 0,
        e_x: 0.0,
        e_z: 0.0,
    };
    for _ in 0..n_pairs {
        let (bit_flip, phase_flip) = sample_error_class(&mut rng, depol);
        let alice_x = rng.gen_bool(0.5);
        let bob_x = rng.gen_bool(0.5);
        if alice_x != bob_x {
            continue;
        }
        if alice_x {
            obs.sifted_x += 1;
            if phase_flip {
                obs.errors_x += 1;
            }
        } else {
            obs.sifted_z += 1;
            if bit_flip {
                obs.errors_z += 1;
            }
        }
    }
    if obs.sifted_x > 0 {
        obs.e_x = obs.errors_x as f64 / obs.sifted_x as f64;
    }
    if obs.sifted_z > 0 {
        obs.e_z = obs.errors_z as f64 / obs.sifted_z as f64;
    }
    Ok(obs)
}

/// Z-basis error frequencies on a test/key split: simulates k + n pairs
/// measured in Z by both parties (the error class is independent of the
/// basis choice, so this is the sifted-Z subsequence) and returns
/// (test-sample frequency over the first k, key frequency over the rest).
/// This is the population/sample pair the Serfling envelope speaks about.
pub fn simulate_bb84_split(
    n_key: u64,
    k_test: u64,
    depol: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_key < 1 {
        return Err(Bb84Error::InvalidParam { what: "n_key", value: n_key as f64 });
    }
    if k_test < 1 {
        return Err(Bb84Error::InvalidParam { what: "k_test", value: k_test as f64 });
    }
    if !depol.is_finite() || !(0.0..=1.0).contains(&depol) {
        return Err(Bb84Error::InvalidParam { what: "depol", value: depol });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_errors = 0u64;
    let mut key_errors = 0u64;
    for idx in 0..(k_test + n_key) {
        let (bit_flip, _) = sample_error_class(&mut rng, depol);
        if bit_flip {
            if idx < k_test {
                test_errors += 1;
            } else {
                key_errors += 1;
            }
        }
    }
    Ok((test_errors as f64 / k_test as f64, key_errors as f64 / n_key as f64))
}
