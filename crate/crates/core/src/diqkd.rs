//! Device-independent QKD: CHSH operator decomposition, the winning-frequency
//! to phase-error conversion, finite-size statistical corrections, and the
//! four-combination key-length bound, plus a CHSH-game Monte Carlo simulator.
//!
//! The round operator S = ¼(A₀⊗B₀ + A₀⊗B₁ + A₁⊗B₀ − A₁⊗B₁) built from
//!
//! ```text
//! A₀ = cos α σz + sin α σx     B₀ = cos β σz + sin β σx
//! A₁ = cos α σx + sin α σz     B₁ = cos β σz − sin β σx
//! ```
//!
//! decomposes as S = ½(√Λ₊ σ̃z⊗σ̃z + √Λ₋ σ̃x⊗σ̃x) in a locally rotated frame,
//! with Λ± = ½(1 ± √(1 − cos²2α sin²2β)). The game is won when
//! x ⊕ y = κ_a·κ_b, so ω = ½ + Tr[ρS]/2, and a Bell-diagonal ρ with weights
//! f_{ij} in the rotated frame wins with frequency
//!
//! ```text
//! ω_S = ¼[2 + √Λ₊(f₀₀−f₁₁+f₁₀−f₀₁) + √Λ₋(f₀₀−f₁₁−f₁₀+f₀₁)].
//! ```
//!
//! Inverting pessimistically, a winning frequency ω̂ certifies phase error at
//! most (1 − √(16ω̂(ω̂−1)+3))/2, and the key length over the 4n key rounds is
//!
//! ```text
//! ℓ ≤ 4n[1 − h(ê_p)] − leak_EC − log₂(2/(ε_sec² ε_cor)).
//! ```

use crate::bounds::{self, BoundsError, FailureBudget};
use crate::minentropy::{min_entropy_lb, EigProfile, MinEntropyError};
use crate::qmath::{ComplexMatrix, MatrixError};
use crate::report::KeyRateReport;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Quantum-optimal (Tsirelson) CHSH winning frequency (2+√2)/4.
pub const TSIRELSON: f64 = 0.853_553_390_593_273_7;

#[derive(Debug, Error)]
pub enum DiqkdError {
    #[error("invalid parameter {what} = {value}")]
    InvalidParam { what: &'static str, value: f64 },
    #[error("invalid spectrum: {reason}")]
    InvalidSpectrum { reason: String },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    MinEntropy(#[from] MinEntropyError),
}

pub type Result<T> = std::result::Result<T, DiqkdError>;

// ----- Domain types -----

/// Measurement angles α (Alice) and β (Bob) defining A₀, A₁, B₀, B₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementAngles {
    pub alpha: f64,
    pub beta: f64,
}

impl MeasurementAngles {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(DiqkdError::InvalidParam { what: "alpha", value: alpha });
        }
        if !beta.is_finite() {
            return Err(DiqkdError::InvalidParam { what: "beta", value: beta });
        }
        Ok(MeasurementAngles { alpha, beta })
    }

    /// Standard CHSH angles α = 0, β = π/4.
    pub fn standard() -> Self {
        MeasurementAngles { alpha: 0.0, beta: std::f64::consts::FRAC_PI_4 }
    }
}

/// Weights Λ± of the rotated-frame decomposition of S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshDecomposition {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl ChshDecomposition {
    pub fn new(lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        for (what, v) in [("lambda_plus", lambda_plus), ("lambda_minus", lambda_minus)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(DiqkdError::InvalidParam { what, value: v });
            }
        }
        if (lambda_plus + lambda_minus - 1.0).abs() > 1e-12 {
            return Err(DiqkdError::InvalidParam {
                what: "lambda sum",
                value: lambda_plus + lambda_minus,
            });
        }
        Ok(ChshDecomposition { lambda_plus, lambda_minus })
    }
}

/// Single-round Bell-diagonal weights in the rotated frame. The first index
/// flips the x̃x̃ correlation, the second the z̃z̃ correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleRoundSpectrum {
    pub l00: f64,
    pub l10: f64,
    pub l01: f64,
    pub l11: f64,
}

impl SingleRoundSpectrum {
    pub fn new(l00: f64, l10: f64, l01: f64, l11: f64) -> Result<Self> {
        for (what, v) in [("l00", l00), ("l10", l10), ("l01", l01), ("l11", l11)] {
            if !v.is_finite() || v < 0.0 {
                return Err(DiqkdError::InvalidSpectrum {
                    reason: format!("{what} = {v} is not a weight"),
                });
            }
        }
        let total = l00 + l10 + l01 + l11;
        if (total - 1.0).abs() > 1e-9 {
            return Err(DiqkdError::InvalidSpectrum {
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        Ok(SingleRoundSpectrum { l00, l10, l01, l11 })
    }

    /// Werner-like mixture: weight 1 − 3q/4 on the maximally entangled state
    /// and q/4 on each of the other three Bell states.
    pub fn werner(q: f64) -> Result<Self> {
        if !q.is_finite() || !(0.0..=1.0).contains(&q) {
            return Err(DiqkdError::InvalidParam { what: "q", value: q });
        }
        Self::new(1.0 - 0.75 * q, 0.25 * q, 0.25 * q, 0.25 * q)
    }

    fn as_array(&self) -> [f64; 4] {
        [self.l00, self.l10, self.l01, self.l11]
    }
}

/// Inputs of the finite-size device-independent key calculation: n key
/// rounds and k test rounds per (κ_a, κ_b) combination, N = 4n + 4k total.
#[derive(Debug, Clone)]
pub struct DiqkdParams {
    pub n: u64,
    pub k: u64,
    /// Observed CHSH winning frequency over the test rounds.
    pub omega: f64,
    pub leak_ec: f64,
    pub budget: FailureBudget,
}

impl DiqkdParams {
    pub fn new(n: u64, k: u64, omega: f64, leak_ec: f64, budget: FailureBudget) -> Result<Self> {
        if n < 1 {
            return Err(DiqkdError::InvalidParam { what: "n", value: n as f64 });
        }
        if k < 1 {
            return Err(DiqkdError::InvalidParam { what: "k", value: k as f64 });
        }
        if !omega.is_finite() || !(0.0..=1.0).contains(&omega) {
            return Err(DiqkdError::InvalidParam { what: "omega", value: omega });
        }
        if !leak_ec.is_finite() || leak_ec < 0.0 {
            return Err(DiqkdError::InvalidParam { what: "leak_ec", value: leak_ec });
        }
        Ok(DiqkdParams { n, k, omega, leak_ec, budget })
    }
}

// ----- CHSH decomposition and the rotated frame -----

/// Λ± = ½(1 ± √(1 − cos²2α sin²2β)).
pub fn chsh_decompose(a: &MeasurementAngles) -> ChshDecomposition {
    let c = (2.0 * a.alpha).cos() * (2.0 * a.beta).sin();
    let root = (1.0 - c * c).max(0.0).sqrt();
    let lp = (0.5 * (1.0 + root)).clamp(0.0, 1.0);
    ChshDecomposition { lambda_plus: lp, lambda_minus: 1.0 - lp }
}

/// Pauli-plane coefficient matrix of S: row = Alice Pauli (z then x),
/// column = Bob Pauli, so S = ½ Σ m[u][v] σ_u ⊗ σ_v.
fn pauli_plane_matrix(a: &MeasurementAngles) -> [[f64; 2]; 2] {
    let (ca, sa) = (a.alpha.cos(), a.alpha.sin());
    let (cb, sb) = (a.beta.cos(), a.beta.sin());
    [[ca * cb, sa * sb], [sa * cb, ca * sb]]
}

/// 2×2 real SVD m = r_a · diag(s₀, s₁) · r_bᵀ with s₀ ≥ s₁ ≥ 0 and
/// orthogonal (possibly improper) factors.
fn svd_2x2(m: [[f64; 2]; 2]) -> ([[f64; 2]; 2], [f64; 2], [[f64; 2]; 2]) {
    // Diagonalize mᵀm by a proper rotation.
    let p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let q = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let r = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let phi = 0.5 * (2.0 * r).atan2(p - q);
    let (c, s) = (phi.cos(), phi.sin());
    let r_b = [[c, -s], [s, c]];
    // Columns of m·r_b are orthogonal with norms = singular values.
    let col = |j: usize| {
        [
            m[0][0] * r_b[0][j] + m[0][1] * r_b[1][j],
            m[1][0] * r_b[0][j] + m[1][1] * r_b[1][j],
        ]
    };
    let (c0, c1) = (col(0), col(1));
    let s0 = (c0[0] * c0[0] + c0[1] * c0[1]).sqrt();
    let s1 = (c1[0] * c1[0] + c1[1] * c1[1]).sqrt();
    let u0 = if s0 > 1e-12 { [c0[0] / s0, c0[1] / s0] } else { [c1[1] / s1, -c1[0] / s1] };
    let u1 = if s1 > 1e-12 {
        [c1[0] / s1, c1[1] / s1]
    } else {
        // Deficient direction: take the orthogonal complement of u0 signed
        // so that m = r_a·diag·r_bᵀ still holds (the zero value hides the
        // sign anyway).
        [-u0[1], u0[0]]
    };
    let r_a = [[u0[0], u1[0]], [u0[1], u1[1]]];
    (r_a, [s0, s1], r_b)
}

/// Single-qubit unitary realizing a 2×2 orthogonal map on the (σz, σx)
/// coefficient plane: a proper rotation by θ is conjugation by
/// exp(−iθσy/2), and an improper factor is conjugation by σz first.
fn frame_unitary(r: [[f64; 2]; 2]) -> ComplexMatrix {
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    let theta = r[1][0].atan2(r[0][0]);
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let mut u = ComplexMatrix::zeros(2);
    u.set(0, 0, Complex64::new(c, 0.0));
    u.set(0, 1, Complex64::new(-s, 0.0));
    u.set(1, 0, Complex64::new(s, 0.0));
    u.set(1, 1, Complex64::new(c, 0.0));
    if det < 0.0 {
        // Right-multiply by σz: negate the second column.
        u.set(0, 1, -u.get(0, 1));
        u.set(1, 1, -u.get(1, 1));
    }
    u
}

/// Local unitaries (U_A, U_B) rotating the computational frame into the one
/// where S = ½(√Λ₊ σ̃z⊗σ̃z + √Λ₋ σ̃x⊗σ̃x), with σ̃ = U σ U†.
pub fn rotated_frame_unitaries(a: &MeasurementAngles) -> (ComplexMatrix, ComplexMatrix) {
    let (r_a, _, r_b) = svd_2x2(pauli_plane_matrix(a));
    (frame_unitary(r_a), frame_unitary(r_b))
}

// ----- Winning frequency and phase-error conversion -----

/// ω_S = ¼[2 + √Λ₊(f₀₀−f₁₁+f₁₀−f₀₁) + √Λ₋(f₀₀−f₁₁−f₁₀+f₀₁)].
pub fn winning_freq(spec: &SingleRoundSpectrum, dec: &ChshDecomposition) -> f64 {
    let zz = spec.l00 - spec.l11 + spec.l10 - spec.l01;
    let xx = spec.l00 - spec.l11 - spec.l10 + spec.l01;
    let w = 0.25 * (2.0 + dec.lambda_plus.sqrt() * zz + dec.lambda_minus.sqrt() * xx);
    w.clamp(0.0, 1.0)
}

/// Pessimistic phase error certified by a winning frequency:
/// (1 − √(16ω̂(ω̂−1)+3))/2 = (1 − √((4ω̂−1)(4ω̂−3)))/2, clamped to [0, ½].
///
/// ω̂ in (¼, ¾) makes the under-root negative (no violation) → ½. An
/// under-root at or above 1 − 1e-12 (ω̂ at or beyond the Tsirelson point up
/// to rounding) maps to exactly 0. Inputs are clamped to [0, 1] so the
/// function is total over raw frequencies.
pub fn phase_error_from_omega(omega_hat: f64) -> f64 {
    let w = if omega_hat.is_finite() { omega_hat.clamp(0.0, 1.0) } else { 0.5 };
    let arg = (4.0 * w - 1.0) * (4.0 * w - 3.0);
    if arg < 0.0 {
        return 0.5;
    }
    if arg >= 1.0 - 1e-12 {
        return 0.0;
    }
    (0.5 * (1.0 - arg.sqrt())).clamp(0.0, 0.5)
}

/// Pessimistic winning frequency ω̂ = ω − CHSH penalty(k, ε_t) − Serfling
/// penalty(n, k, ε_g), clamped to [0, 1].
pub fn omega_hat(p: &DiqkdParams) -> Result<f64> {
    let mu = bounds::chsh_statistical_penalty(p.k, p.budget.eps_t)?;
    let delta = bounds::serfling_delta_diqkd(p.n, p.k, p.budget.eps_g)?;
    Ok((p.omega - mu - delta).clamp(0.0, 1.0))
}

/// Finite-size key length over the 4n key rounds:
/// ℓ = max(0, ⌊4n[1−h(ê_p)] − leak_EC − log₂(2/(ε_sec²ε_cor))⌋).
pub fn diqkd_key_length(p: &DiqkdParams) -> Result<KeyRateReport> {
    let mu = bounds::chsh_statistical_penalty(p.k, p.budget.eps_t)?;
    let delta = bounds::serfling_delta_diqkd(p.n, p.k, p.budget.eps_g)?;
    let om_hat = (p.omega - mu - delta).clamp(0.0, 1.0);
    let e_p = phase_error_from_omega(om_hat);
    let h = bounds::binary_entropy(e_p)?;
    let raw_bits = 4.0 * p.n as f64;
    let hmin_smooth = raw_bits * (1.0 - h);
    let log_term = 1.0 - 2.0 * p.budget.eps_sec.log2() - p.budget.eps_cor.log2();
    let rhs = hmin_smooth - p.leak_ec - log_term;
    let ell = if rhs > 0.0 { rhs.floor() as u64 } else { 0 };
    let delta_sec = bounds::secrecy_delta(ell, hmin_smooth, p.budget.eps_smooth);

    let mut terms = BTreeMap::new();
    terms.insert("n".into(), p.n as f64);
    terms.insert("k".into(), p.k as f64);
    terms.insert("total_rounds".into(), 4.0 * (p.n + p.k) as f64);
    terms.insert("omega".into(), p.omega);
    terms.insert("chsh_penalty".into(), mu);
    terms.insert("serfling_delta".into(), delta);
    terms.insert("omega_hat".into(), om_hat);
    terms.insert("phase_error".into(), e_p);
    terms.insert("binary_entropy".into(), h);
    terms.insert("hmin_smooth".into(), hmin_smooth);
    terms.insert("leak_ec".into(), p.leak_ec);
    terms.insert("log_term".into(), log_term);
    terms.insert("ell".into(), ell as f64);
    terms.insert("rate_per_key_round".into(), ell as f64 / raw_bits);
    terms.insert("delta_sec".into(), delta_sec);

    Ok(KeyRateReport { hmin_smooth, e_hat: e_p, ell, delta_sec, terms })
}

/// Single-round min-entropy of the key measurement on a Bell-diagonal pair:
/// 1 − log₂(√(λ₀₀+λ₁₁) + √(λ₁₀+λ₀₁))², independent of the measurement
/// angle within the z̃-x̃ plane.
pub fn single_round_hmin(spec: &SingleRoundSpectrum) -> f64 {
    let a = spec.l00 + spec.l11;
    let b = spec.l10 + spec.l01;
    // This is the canonical d = 2 bound on the grouped profile.
    match EigProfile::new(vec![a, b]) {
        Ok(profile) => min_entropy_lb(&profile),
        Err(_) => 0.0,
    }
}

// ----- Monte Carlo simulator -----

/// Tallies of a simulated CHSH test sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ChshObservation {
    pub rounds: u64,
    pub wins: u64,
    pub omega: f64,
    /// Rounds played per (κ_a, κ_b).
    pub combo_rounds: [[u64; 2]; 2],
    /// Wins per (κ_a, κ_b).
    pub combo_wins: [[u64; 2]; 2],
}

/// Eigenvector of cos γ σz + sin γ σx for the outcome bit (bit 1 ↔
/// eigenvalue +1).
fn outcome_vector(gamma: f64, bit: u8) -> [Complex64; 2] {
    let (c, s) = ((0.5 * gamma).cos(), (0.5 * gamma).sin());
    if bit == 1 {
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)]
    } else {
        [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)]
    }
}

/// Measurement-plane angles of A₀, A₁ and B₀, B₁.
fn measurement_angles(a: &MeasurementAngles) -> ([f64; 2], [f64; 2]) {
    (
        [a.alpha, std::f64::consts::FRAC_PI_2 - a.alpha],
        [a.beta, -a.beta],
    )
}

/// Outcome distributions p(a, b | κ_a, κ_b, Bell index), built from the
/// explicit projectors of A_{κa} ⊗ B_{κb} acting on the rotated Bell states.
fn outcome_tables(a: &MeasurementAngles) -> Result<[[[[f64; 4]; 4]; 2]; 2]> {
    let (u_a, u_b) = rotated_frame_unitaries(a);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    // Bell vectors in the computational frame, component order |ab⟩.
    // Index order matches SingleRoundSpectrum::as_array: the first label
    // flips x̃x̃, the second flips z̃z̃.
    let bell: [[Complex64; 4]; 4] = {
        let z = Complex64::new(0.0, 0.0);
        let p = Complex64::new(inv_sqrt2, 0.0);
        let m = Complex64::new(-inv_sqrt2, 0.0);
        [
            [p, z, z, p], // Φ⁺: z̃z̃ = +1, x̃x̃ = +1
            [p, z, z, m], // Φ⁻: z̃z̃ = +1, x̃x̃ = −1
            [z, p, p, z], // Ψ⁺: z̃z̃ = −1, x̃x̃ = +1
            [z, p, m, z], // Ψ⁻: z̃z̃ = −1, x̃x̃ = −1
        ]
    };
    let (alice_angles, bob_angles) = measurement_angles(a);
    let mut table = [[[[0.0f64; 4]; 4]; 2]; 2];
    for ka in 0..2usize {
        for kb in 0..2usize {
            for (idx, vec) in bell.iter().enumerate() {
                // Rotated Bell state (U_A ⊗ U_B)|Φ⟩.
                let mut rotated = [Complex64::new(0.0, 0.0); 4];
                for (ap, row) in rotated.chunks_mut(2).enumerate() {
                    for (bp, out) in row.iter_mut().enumerate() {
                        for aq in 0..2 {
                            for bq in 0..2 {
                                *out += u_a.get(ap, aq) * u_b.get(bp, bq) * vec[2 * aq + bq];
                            }
                        }
                    }
                }
                for bit_a in 0..2u8 {
                    for bit_b in 0..2u8 {
                        let va = outcome_vector(alice_angles[ka], bit_a);
                        let vb = outcome_vector(bob_angles[kb], bit_b);
                        let mut amp = Complex64::new(0.0, 0.0);
                        for (c, amp_row) in rotated.chunks(2).enumerate() {
                            for (d, r) in amp_row.iter().enumerate() {
                                amp += va[c].conj() * vb[d].conj() * r;
                            }
                        }
                        table[ka][kb][idx][(2 * bit_a + bit_b) as usize] = amp.norm_sqr();
                    }
                }
            }
        }
    }
    Ok(table)
}

/// Exact expected winning frequency computed from the explicit projectors
/// (independent witness to [`winning_freq`] and [`chsh_decompose`]).
pub fn expected_win_prob(spec: &SingleRoundSpectrum, a: &MeasurementAngles) -> Result<f64> {
    let table = outcome_tables(a)?;
    let weights = spec.as_array();
    let mut total = 0.0;
    for ka in 0..2usize {
        for kb in 0..2usize {
            for (idx, &w) in weights.iter().enumerate() {
                for outcome in 0..4usize {
                    let (bit_a, bit_b) = ((outcome >> 1) as u8, (outcome & 1) as u8);
                    if (bit_a ^ bit_b) == (ka & kb) as u8 {
                        total += 0.25 * w * table[ka][kb][idx][outcome];
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Sample `n_rounds` CHSH test rounds: i.i.d. Bell-diagonal pairs from the
/// spectrum, uniform (κ_a, κ_b), Born-rule outcomes from the explicit
/// projectors, and a win tally. Deterministic for a fixed seed.
pub fn simulate_chsh(
    n_rounds: u64,
    spec: &SingleRoundSpectrum,
    a: &MeasurementAngles,
    seed: u64,
) -> Result<ChshObservation> {
    if n_rounds < 4 {
        return Err(DiqkdError::InvalidParam { what: "n_rounds", value: n_rounds as f64 });
    }
    let table = outcome_tables(a)?;
    let weights = spec.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = ChshObservation {
        rounds: n_rounds,
        wins: 0,
        omega: 0.0,
        combo_rounds: [[0; 2]; 2],
        combo_wins: [[0; 2]; 2],
    };
    let sample = |r: f64, dist: &[f64]| -> usize {
        let mut acc = 0.0;
        for (i, &w) in dist.iter().enumerate() {
            acc += w;
            if r < acc {
                return i;
            }
        }
        dist.len() - 1
    };
    for _ in 0..n_rounds {
        let idx = sample(rng.gen(), &weights);
        let ka = usize::from(rng.gen_bool(0.5));
        let kb = usize::from(rng.gen_bool(0.5));
        let outcome = sample(rng.gen(), &table[ka][kb][idx]);
        let (bit_a, bit_b) = ((outcome >> 1) as u8, (outcome & 1) as u8);
        obs.combo_rounds[ka][kb] += 1;
        if (bit_a ^ bit_b) == (ka & kb) as u8 {
            obs.wins += 1;
            obs.combo_wins[ka][kb] += 1;
        }
    }
    obs.omega = obs.wins as f64 / n_rounds as f64;
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::eig_hermitian;
    use rand::rngs::StdRng;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI};

    fn pauli_z() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m.set(0, 0, Complex64::new(1.0, 0.0));
        m.set(1, 1, Complex64::new(-1.0, 0.0));
        m
    }

    fn pauli_x() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m.set(0, 1, Complex64::new(1.0, 0.0));
        m.set(1, 0, Complex64::new(1.0, 0.0));
        m
    }

    /// S assembled literally from A₀, A₁, B₀, B₁.
    fn assemble_s(a: &MeasurementAngles) -> ComplexMatrix {
        let obs = |gamma: f64| {
            pauli_z()
                .scale_re(gamma.cos())
                .add(&pauli_x().scale_re(gamma.sin()))
                .unwrap()
        };
        let (aa, bb) = measurement_angles(a);
        let (a0, a1) = (obs(aa[0]), obs(aa[1]));
        let (b0, b1) = (obs(bb[0]), obs(bb[1]));
        a0.kron(&b0)
            .add(&a0.kron(&b1))
            .unwrap()
            .add(&a1.kron(&b0))
            .unwrap()
            .sub(&a1.kron(&b1))
            .unwrap()
            .scale_re(0.25)
    }

    fn random_spectrum(rng: &mut StdRng) -> SingleRoundSpectrum {
        let mut w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= t);
        SingleRoundSpectrum::new(w[0], w[1], w[2], w[3]).unwrap()
    }

    #[test]
    fn decompose_anchors() {
        let d = chsh_decompose(&MeasurementAngles::standard());
        assert!((d.lambda_plus - 0.5).abs() < 1e-15);
        assert!((d.lambda_minus - 0.5).abs() < 1e-15);
        let d = chsh_decompose(&MeasurementAngles::new(0.3, 0.0).unwrap());
        assert!((d.lambda_plus - 1.0).abs() < 1e-15);
        assert!(d.lambda_minus.abs() < 1e-15);
    }

    #[test]
    fn decompose_matches_assembled_operator_spectrum() {
        // Eigenvalues of S are ½(±√Λ₊ ± √Λ₋).
        for (alpha, beta) in [
            (FRAC_PI_8, FRAC_PI_6),
            (0.0, FRAC_PI_4),
            (0.7, -0.3),
            (2.5, 1.9),
            (-1.2, 0.4),
        ] {
            let angles = MeasurementAngles::new(alpha, beta).unwrap();
            let d = chsh_decompose(&angles);
            let (sp, sm) = (d.lambda_plus.sqrt(), d.lambda_minus.sqrt());
            let mut expected = [
                -0.5 * (sp + sm),
                -0.5 * (sp - sm),
                0.5 * (sp - sm),
                0.5 * (sp + sm),
            ];
            expected.sort_by(f64::total_cmp);
            let eig = eig_hermitian(&assemble_s(&angles)).unwrap();
            for (got, want) in eig.values.iter().zip(expected) {
                assert!((got - want).abs() < 1e-10, "({alpha},{beta}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn rotated_frame_reconstructs_s() {
        // S = ½(√Λ₊ σ̃z⊗σ̃z + √Λ₋ σ̃x⊗σ̃x) entrywise.
        for (alpha, beta) in [
            (FRAC_PI_8, FRAC_PI_6),
            (0.0, FRAC_PI_4),
            (1.1, 2.3),
            (-0.4, -1.7),
            (3.0, 0.2),
            (0.5 * PI, 0.25 * PI),
            (0.3, 0.0),
        ] {
            let angles = MeasurementAngles::new(alpha, beta).unwrap();
            let d = chsh_decompose(&angles);
            let (u_a, u_b) = rotated_frame_unitaries(&angles);
            let rot = |u: &ComplexMatrix, p: &ComplexMatrix| u.mul(p).unwrap().mul(&u.adjoint()).unwrap();
            let zz = rot(&u_a, &pauli_z()).kron(&rot(&u_b, &pauli_z()));
            let xx = rot(&u_a, &pauli_x()).kron(&rot(&u_b, &pauli_x()));
            let rebuilt = zz
                .scale_re(0.5 * d.lambda_plus.sqrt())
                .add(&xx.scale_re(0.5 * d.lambda_minus.sqrt()))
                .unwrap();
            let dev = rebuilt.sub(&assemble_s(&angles)).unwrap().max_abs_entry();
            assert!(dev < 1e-10, "({alpha},{beta}): deviation {dev}");
        }
    }

    #[test]
    fn winning_freq_anchors() {
        let tsirelson = winning_freq(
            &SingleRoundSpectrum::new(1.0, 0.0, 0.0, 0.0).unwrap(),
            &ChshDecomposition::new(0.5, 0.5).unwrap(),
        );
        assert!((tsirelson - TSIRELSON).abs() < 1e-15);
        let uniform = winning_freq(
            &SingleRoundSpectrum::new(0.25, 0.25, 0.25, 0.25).unwrap(),
            &ChshDecomposition::new(0.7, 0.3).unwrap(),
        );
        assert!((uniform - 0.5).abs() < 1e-15);
    }

    #[test]
    fn winning_freq_matches_projector_accounting() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let spec = random_spectrum(&mut rng);
            let angles =
                MeasurementAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)).unwrap();
            let formula = winning_freq(&spec, &chsh_decompose(&angles));
            let accounting = expected_win_prob(&spec, &angles).unwrap();
            assert!(
                (formula - accounting).abs() < 1e-10,
                "{formula} vs {accounting}"
            );
        }
    }

    #[test]
    fn phase_error_anchors() {
        assert_eq!(phase_error_from_omega((2.0 + 2.0f64.sqrt()) / 4.0), 0.0);
        assert_eq!(phase_error_from_omega(0.75), 0.5);
        assert_eq!(phase_error_from_omega(0.25), 0.5);
        assert_eq!(phase_error_from_omega(0.5), 0.5);
        let e = phase_error_from_omega(0.84);
        assert!((e - 0.5 * (1.0 - 0.849_6f64.sqrt())).abs() < 1e-12, "{e}");
        assert!((e - 0.039_131_255_127_883_57).abs() < 1e-12, "{e}");
        // Always-lose boxes certify just as well as always-win ones.
        assert_eq!(phase_error_from_omega(0.0), 0.0);
    }

    #[test]
    fn phase_error_monotone_on_violation_range() {
        let mut prev = phase_error_from_omega(0.75);
        for step in 1..=500 {
            let w = 0.75 + (TSIRELSON - 0.75) * step as f64 / 500.0;
            let cur = phase_error_from_omega(w);
            assert!(cur <= prev + 1e-15, "not monotone at {w}");
            prev = cur;
        }
    }

    #[test]
    fn omega_hat_anchor() {
        let budget = FailureBudget::diqkd(1e-10, 1e-10, 1e-15).unwrap();
        let p = DiqkdParams::new(1_000_000, 1_000_000, 0.85, 0.0, budget).unwrap();
        let om = omega_hat(&p).unwrap();
        // Frozen chain: 0.85 − 0.006916896799078975 − 0.003393070636341306.
        assert!((om - 0.839_690_032_564_579_6).abs() < 1e-12, "{om}");
        // Penalties exceeding ω clamp to 0.
        let p = DiqkdParams::new(10, 10, 0.05, 0.0, budget).unwrap();
        assert_eq!(omega_hat(&p).unwrap(), 0.0);
    }

    #[test]
    fn key_length_chain() {
        let budget = FailureBudget::diqkd(1e-10, 1e-10, 1e-15).unwrap();
        let n = 1_000_000u64;
        let leak = 4.0 * n as f64 * bounds::binary_entropy(0.05).unwrap();
        let p = DiqkdParams::new(n, n, 0.85, leak, budget).unwrap();
        let r = diqkd_key_length(&p).unwrap();
        // Frozen from the chained evaluation.
        assert_eq!(r.ell, 1_884_280);
        assert!((r.e_hat - 0.040_046_444_850_242_835).abs() < 1e-12);
        // Per-key-round fraction ≈ 1 − h(ê_p) − h(0.05).
        let target = 1.0
            - bounds::binary_entropy(r.e_hat).unwrap()
            - bounds::binary_entropy(0.05).unwrap();
        assert!((r.term("rate_per_key_round").unwrap() - target).abs() < 1e-3);
        assert!(r.delta_sec <= p.budget.eps_sec + 1e-15);
    }

    #[test]
    fn key_length_boundary_cases() {
        let budget = FailureBudget::diqkd(1e-10, 1e-10, 1e-15).unwrap();
        // No Bell violation after penalties → no key.
        let p = DiqkdParams::new(1000, 1000, 0.74, 0.0, budget).unwrap();
        let r = diqkd_key_length(&p).unwrap();
        assert_eq!(r.ell, 0);
        assert_eq!(r.e_hat, 0.5);
        // Saturated violation with huge n and no leak → ~1 bit per key round.
        let p = DiqkdParams::new(1_000_000_000, 1_000_000_000, 0.87, 0.0, budget).unwrap();
        let r = diqkd_key_length(&p).unwrap();
        assert_eq!(r.e_hat, 0.0);
        assert!(r.term("rate_per_key_round").unwrap() > 0.999_999);
    }

    #[test]
    fn key_length_monotone_in_omega() {
        let budget = FailureBudget::diqkd(1e-10, 1e-10, 1e-15).unwrap();
        let mut prev = 0u64;
        for step in 0..=20 {
            let omega = 0.75 + (0.86 - 0.75) * step as f64 / 20.0;
            let p = DiqkdParams::new(1_000_000, 1_000_000, omega, 1000.0, budget).unwrap();
            let r = diqkd_key_length(&p).unwrap();
            assert!(r.ell >= prev, "ℓ decreased at ω = {omega}");
            prev = r.ell;
        }
    }

    #[test]
    fn single_round_hmin_anchors() {
        let h = |a, b, c, d| single_round_hmin(&SingleRoundSpectrum::new(a, b, c, d).unwrap());
        assert!((h(1.0, 0.0, 0.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((h(0.5, 0.0, 0.0, 0.5) - 1.0).abs() < 1e-12);
        assert!(h(0.5, 0.5, 0.0, 0.0).abs() < 1e-12);
        let v = h(0.6, 0.1, 0.2, 0.1);
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn single_round_hmin_matches_marginalized_pair_spectrum() {
        // The n = 1 Bell-spectrum marginal bound in a relabeled frame
        // (i ↦ i⊕j) groups {00,11} against {10,01}.
        use crate::bb84::{marginalize_spectrum, BellSpectrum};
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..50 {
            let spec = random_spectrum(&mut rng);
            let mut w = BTreeMap::new();
            for (idx, val) in spec.as_array().into_iter().enumerate() {
                let (i, j) = ((idx as u16) & 1, (idx as u16) >> 1);
                w.insert((i ^ j, j), val);
            }
            let bell = BellSpectrum::new(1, w).unwrap();
            let a = marginalize_spectrum(&bell).unwrap();
            let b = single_round_hmin(&spec);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn phase_error_soundness_conditioned_and_two_sided() {
        let mut rng = StdRng::seed_from_u64(31);
        let mut tested = 0;
        while tested < 300 {
            let spec = random_spectrum(&mut rng);
            let b = spec.l10 + spec.l01;
            let angles =
                MeasurementAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)).unwrap();
            let omega = winning_freq(&spec, &chsh_decompose(&angles));
            // Unconditional two-sided bound: |1 − 2b| ≥ √(under-root).
            let arg = ((4.0 * omega - 1.0) * (4.0 * omega - 3.0)).max(0.0);
            assert!(
                (1.0 - 2.0 * b).abs() >= arg.sqrt() - 1e-9,
                "two-sided bound failed: b = {b}, ω = {omega}"
            );
            // Conversion never underestimates the phase-error mass when it
            // is a minority (b ≤ ½).
            if b <= 0.5 {
                let bound = phase_error_from_omega(omega);
                assert!(b <= bound + 1e-9, "b = {b} > bound {bound} at ω = {omega}");
                tested += 1;
            }
        }
    }

    #[test]
    fn tsirelson_extremality_over_angles_and_spectra() {
        // Vertex spectra suffice: ω is linear in the weights.
        let vertices = [
            SingleRoundSpectrum::new(1.0, 0.0, 0.0, 0.0).unwrap(),
            SingleRoundSpectrum::new(0.0, 1.0, 0.0, 0.0).unwrap(),
            SingleRoundSpectrum::new(0.0, 0.0, 1.0, 0.0).unwrap(),
            SingleRoundSpectrum::new(0.0, 0.0, 0.0, 1.0).unwrap(),
        ];
        let best_at = |alpha: f64, beta: f64| {
            let dec = chsh_decompose(&MeasurementAngles { alpha, beta });
            vertices
                .iter()
                .map(|s| winning_freq(s, &dec))
                .fold(0.0f64, f64::max)
        };
        let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (0.0, PI / 2.0, 0.0, PI / 2.0);
        let mut best = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..4 {
            best = (f64::NEG_INFINITY, 0.0, 0.0);
            for i in 0..=40 {
                for j in 0..=40 {
                    let alpha = lo_a + (hi_a - lo_a) * i as f64 / 40.0;
                    let beta = lo_b + (hi_b - lo_b) * j as f64 / 40.0;
                    let v = best_at(alpha, beta);
                    if v > best.0 {
                        best = (v, alpha, beta);
                    }
                }
            }
            let (da, db) = ((hi_a - lo_a) / 40.0, (hi_b - lo_b) / 40.0);
            lo_a = (best.1 - da).max(0.0);
            hi_a = best.1 + da;
            lo_b = (best.2 - db).max(0.0);
            hi_b = best.2 + db;
        }
        assert!((best.0 - TSIRELSON).abs() < 1e-6, "max ω = {}", best.0);
    }

    #[test]
    fn simulator_concentrates_at_tsirelson() {
        let spec = SingleRoundSpectrum::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let obs = simulate_chsh(200_000, &spec, &MeasurementAngles::standard(), 17).unwrap();
        let sigma = (TSIRELSON * (1.0 - TSIRELSON) / 200_000.0).sqrt();
        assert!(
            (obs.omega - TSIRELSON).abs() < 5.0 * sigma,
            "ω = {}, σ = {sigma}",
            obs.omega
        );
        assert_eq!(
            obs.combo_rounds.iter().flatten().sum::<u64>(),
            obs.rounds
        );
    }

    #[test]
    fn simulator_matches_predicted_frequency() {
        let mut rng = StdRng::seed_from_u64(41);
        for trial in 0..5 {
            let spec = if trial % 2 == 0 {
                SingleRoundSpectrum::werner(rng.gen_range(0.0..1.0)).unwrap()
            } else {
                random_spectrum(&mut rng)
            };
            let angles =
                MeasurementAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)).unwrap();
            let predicted = winning_freq(&spec, &chsh_decompose(&angles));
            let rounds = 100_000u64;
            let obs = simulate_chsh(rounds, &spec, &angles, 100 + trial).unwrap();
            let sigma = (predicted.max(1e-6) * (1.0 - predicted).max(1e-6) / rounds as f64)
                .sqrt();
            assert!(
                (obs.omega - predicted).abs() < 5.0 * sigma,
                "trial {trial}: ω = {}, predicted {predicted}",
                obs.omega
            );
        }
    }

    #[test]
    fn simulator_uniform_spectrum_near_half() {
        let spec = SingleRoundSpectrum::new(0.25, 0.25, 0.25, 0.25).unwrap();
        let obs = simulate_chsh(100_000, &spec, &MeasurementAngles::standard(), 3).unwrap();
        assert!((obs.omega - 0.5).abs() < 0.01, "{}", obs.omega);
    }

    #[test]
    fn simulator_deterministic() {
        let spec = SingleRoundSpectrum::werner(0.1).unwrap();
        let a = simulate_chsh(10_000, &spec, &MeasurementAngles::standard(), 9).unwrap();
        let b = simulate_chsh(10_000, &spec, &MeasurementAngles::standard(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_errors() {
        assert!(MeasurementAngles::new(f64::NAN, 0.0).is_err());
        assert!(ChshDecomposition::new(0.7, 0.4).is_err());
        assert!(SingleRoundSpectrum::new(0.5, 0.5, 0.5, -0.5).is_err());
        let budget = FailureBudget::diqkd(1e-10, 1e-10, 1e-15).unwrap();
        assert!(DiqkdParams::new(0, 1, 0.8, 0.0, budget).is_err());
        assert!(DiqkdParams::new(1, 1, 1.2, 0.0, budget).is_err());
        assert!(matches!(
            simulate_chsh(
                2,
                &SingleRoundSpectrum::werner(0.0).unwrap(),
                &MeasurementAngles::standard(),
                0
            ),
            Err(DiqkdError::InvalidParam { .. })
        ));
    }
}
