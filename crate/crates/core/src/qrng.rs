//! Source-independent continuous-variable QRNG: a truncated Fock-space
//! source model, the discretized heterodyne measurement, the residue-class
//! entropy accounting, finite-size click statistics, the output-length
//! bound, a sampling simulator, and a Toeplitz extractor.
//!
//! A phase-randomized source is diagonal in the Fock basis, ρ_A = Σ_m p_m
//! |m⟩⟨m|. Heterodyne detection measures the coherent-state POVM
//! {|α⟩⟨α|/π} and the outcome phase θ is binned into four quadrants,
//! x = ⌊2θ/π⌋. Grouping photon numbers by residue class y = m mod 4 with
//! weights q_y = Σ_m p_{4m+y}, the adversary's uncertainty per round obeys
//!
//! ```text
//! H_min(X|E) ≥ 2 − log₂ (Σ_y √q_y)²,
//! ```
//!
//! with equality on an explicitly constructible reduced state (see
//! [`reduced_state_hmin_oracle`]). A threshold detector estimates the
//! non-vacuum fraction Q over k test rounds; the pessimistic estimate
//! Q̂ = Q + δ_Serfling bounds the n generation rounds through the quaternary
//! entropy H(Q̂), and the extractable length is
//!
//! ```text
//! ℓ = max(0, ⌊n[2 − H(Q̂)] − 2 log₂(1/ε_sec)⌋),
//! ```
//!
//! where H is evaluated on min(Q̂, ¼) so the bound stays monotone in Q̂
//! (H peaks at the uniform residue point ¼ and would otherwise spuriously
//! improve for larger click rates).

use crate::bounds::{self, BoundsError, FailureBudget};
use crate::minentropy::{
    dual_certificate, guess_prob, min_entropy_lb, CQState, EigProfile, MinEntropyError, Povm,
};
use crate::qmath::{ComplexMatrix, DensityMatrix, MatrixError};
use crate::report::KeyRateReport;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Maximum truncation-tail mass tolerated when adopting a source profile.
pub const TAIL_TOL: f64 = 1e-12;
/// Largest Fock cutoff accepted by the explicit reduced-state construction.
pub const MAX_ORACLE_TRUNC: usize = 16;
/// Numerically integrated heterodyne bins must match ¼ this tightly.
const BIN_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QrngError {
    #[error("invalid source state: {reason}")]
    InvalidState { reason: String },
    #[error("invalid parameter {what} = {value}")]
    InvalidParam { what: &'static str, value: f64 },
    #[error("truncation {trunc} exceeds the supported maximum {max}")]
    TooLarge { trunc: usize, max: usize },
    #[error("Toeplitz seed has {got} bits, input/output lengths require {expected}")]
    SeedLengthMismatch { expected: usize, got: usize },
    #[error("numerical check failed: {what}")]
    Numerics { what: String },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    MinEntropy(#[from] MinEntropyError),
}

pub type Result<T> = std::result::Result<T, QrngError>;

// ----- Domain types -----

/// Phase-randomized bosonic source truncated at `probs.len() − 1` photons:
/// ρ_A = Σ_m p_m |m⟩⟨m| with declared mean-energy bound Σ_m m·p_m ≤ L.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDiagonalState {
    probs: Vec<f64>,
    energy_bound: f64,
}

impl FockDiagonalState {
    pub fn new(probs: Vec<f64>, energy_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(QrngError::InvalidState {
                reason: "empty photon-number distribution".into(),
            });
        }
        for (m, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(QrngError::InvalidState {
                    reason: format!("p_{m} = {p} is not a probability"),
                });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TAIL_TOL {
            return Err(QrngError::InvalidState {
                reason: format!("probabilities sum to {total}, truncation tail exceeds {TAIL_TOL}"),
            });
        }
        if !energy_bound.is_finite() || energy_bound < 0.0 {
            return Err(QrngError::InvalidParam {
                what: "energy_bound",
                value: energy_bound,
            });
        }
        let mean: f64 = probs.iter().enumerate().map(|(m, &p)| m as f64 * p).sum();
        if mean > energy_bound + 1e-9 {
            return Err(QrngError::InvalidState {
                reason: format!("mean energy {mean} exceeds the declared bound {energy_bound}"),
            });
        }
        Ok(FockDiagonalState { probs, energy_bound })
    }

    /// Vacuum |0⟩⟨0|.
    pub fn vacuum() -> Self {
        FockDiagonalState { probs: vec![1.0], energy_bound: 0.0 }
    }

    /// Fock state |m⟩⟨m|.
    pub fn fock(m: usize) -> Self {
        let mut probs = vec![0.0; m + 1];
        probs[m] = 1.0;
        FockDiagonalState { probs, energy_bound: m as f64 }
    }

    /// Poissonian profile p_m = e^{−μ}μ^m/m! truncated at `m_max`; the
    /// cutoff must leave less than [`TAIL_TOL`] tail mass.
    pub fn poisson(mu: f64, m_max: usize) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(QrngError::InvalidParam { what: "mu", value: mu });
        }
        let mut probs = Vec::with_capacity(m_max + 1);
        let mut term = (-mu).exp();
        for m in 0..=m_max {
            probs.push(term);
            term *= mu / (m + 1) as f64;
        }
        Self::new(probs, mu)
    }

    /// Thermal profile p_m = (1−r)r^m with r = n̄/(1+n̄), truncated at
    /// `m_max`; the cutoff must leave less than [`TAIL_TOL`] tail mass.
    pub fn thermal(mean: f64, m_max: usize) -> Result<Self> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(QrngError::InvalidParam { what: "mean", value: mean });
        }
        let r = mean / (1.0 + mean);
        let mut probs = Vec::with_capacity(m_max + 1);
        let mut term = 1.0 - r;
        for _ in 0..=m_max {
            probs.push(term);
            term *= r;
        }
        Self::new(probs, mean)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn m_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn energy_bound(&self) -> f64 {
        self.energy_bound
    }
}

/// Residue-class weights q_y = Σ_m p_{4m+y}, y ∈ {0,1,2,3}.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueProfile {
    q: [f64; 4],
}

impl ResidueProfile {
    pub fn new(q: [f64; 4]) -> Result<Self> {
        for (y, &v) in q.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(QrngError::InvalidState {
                    reason: format!("q_{y} = {v} is not a weight"),
                });
            }
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(QrngError::InvalidState {
                reason: format!("residue weights sum to {total}, expected 1"),
            });
        }
        Ok(ResidueProfile { q })
    }

    pub fn q(&self) -> &[f64; 4] {
        &self.q
    }
}

/// Inputs of the finite-size randomness accounting: n generation rounds,
/// k test rounds, observed click frequency Q, and the failure budget.
#[derive(Debug, Clone)]
pub struct QrngParams {
    pub n: u64,
    pub k: u64,
    pub q_obs: f64,
    pub budget: FailureBudget,
}

impl QrngParams {
    pub fn new(n: u64, k: u64, q_obs: f64, budget: FailureBudget) -> Result<Self> {
        if n < 1 {
            return Err(QrngError::InvalidParam { what: "n", value: n as f64 });
        }
        if k < 1 {
            return Err(QrngError::InvalidParam { what: "k", value: k as f64 });
        }
        if !q_obs.is_finite() || !(0.0..=1.0).contains(&q_obs) {
            return Err(QrngError::InvalidParam { what: "q_obs", value: q_obs });
        }
        Ok(QrngParams { n, k, q_obs, budget })
    }
}

/// Seed bits of a Toeplitz two-universal hash; extracting `out` bits from
/// `in` raw bits consumes exactly `in + out − 1` seed bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSeed {
    bits: Vec<u8>,
}

impl ToeplitzSeed {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(QrngError::InvalidParam { what: "seed bit", value: b as f64 });
        }
        Ok(ToeplitzSeed { bits })
    }

    /// Uniformly random seed of the given length, deterministic in `seed`.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ToeplitzSeed {
            bits: (0..len).map(|_| u8::from(rng.gen_bool(0.5))).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

// ----- Residue accounting -----

/// q_y = Σ_m p_{4m+y}, renormalized over the truncated support.
pub fn residue_profile(s: &FockDiagonalState) -> ResidueProfile {
    let mut q = [0.0f64; 4];
    for (m, &p) in s.probs.iter().enumerate() {
        q[m % 4] += p;
    }
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    ResidueProfile { q }
}

/// Per-round bound 2 − log₂ (Σ_y √q_y)², clamped to [0, 2].
pub fn qrng_hmin_per_round(r: &ResidueProfile) -> f64 {
    match EigProfile::new(r.q.to_vec()) {
        Ok(profile) => min_entropy_lb(&profile).clamp(0.0, 2.0),
        Err(_) => 0.0,
    }
}

// ----- Heterodyne quadrant integral -----

/// Standard 16-point Gauss–Legendre rule on [−1, 1] (positive abscissas;
/// the rule is symmetric).
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_45,
    0.281_603_550_779_258_92,
    0.458_016_777_657_227_37,
    0.617_876_244_402_643_77,
    0.755_404_408_355_003_0,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_6,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_6,
    0.149_595_988_816_576_76,
    0.124_628_971_255_534_03,
    0.095_158_511_682_492_6,
    0.062_253_523_938_647_71,
    0.027_152_459_411_754_037,
];

/// ∫₀^T e^{−t} Σ_m p_m t^m/m! dt by composite 16-node Gauss–Legendre on
/// segments of length 5, with T = 3·m_max + 60 (the integrand's Poissonian
/// tail beyond T is far below the bin tolerance).
fn radial_integral(probs: &[f64]) -> f64 {
    let t_end = 3.0 * (probs.len() - 1) as f64 + 60.0;
    let kernel = |t: f64| -> f64 {
        // term_m = e^{−t} t^m / m!, built up incrementally; every term is a
        // Poisson probability, so the recursion never overflows.
        let mut term = (-t).exp();
        let mut acc = 0.0;
        for (m, &p) in probs.iter().enumerate() {
            acc += p * term;
            term *= t / (m + 1) as f64;
        }
        acc
    };
    let mut total = 0.0;
    let mut a = 0.0;
    while a < t_end {
        let b = (a + 5.0).min(t_end);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (&x, &w) in GL16_X.iter().zip(&GL16_W) {
            total += half * w * (kernel(mid + half * x) + kernel(mid - half * x));
        }
        a = b;
    }
    total
}

/// Quadrant probabilities of the heterodyne outcome phase. A Fock-diagonal
/// state has a phase-independent Husimi function,
/// ⟨√t e^{iθ}|ρ|√t e^{iθ}⟩ = e^{−t} Σ_m p_m t^m/m!, so each quadrant gets
/// (1/2π)·(π/2)·∫₀^∞ e^{−t} Σ_m p_m t^m/m! dt = ¼. The radial factor is
/// integrated numerically as a cross-check and each bin is required to land
/// within 1e-10 of ¼.
pub fn heterodyne_bin_probs(s: &FockDiagonalState) -> Result<[f64; 4]> {
    let radial = radial_integral(&s.probs);
    let bin = radial / 4.0;
    if (bin - 0.25).abs() > BIN_TOL {
        return Err(QrngError::Numerics {
            what: format!("heterodyne bin probability {bin} deviates from 1/4"),
        });
    }
    Ok([bin; 4])
}

// ----- Finite-size output length -----

/// Pessimistic click frequency Q̂ = Q + √[(n+k)(k+1)/(nk²) ln(1/ε)],
/// clamped to [0, ¾] (the quaternary entropy's argument domain).
pub fn q_hat(p: &QrngParams) -> Result<f64> {
    let delta = bounds::serfling_delta(p.n, p.k, p.budget.eps_smooth)?;
    Ok((p.q_obs + delta).clamp(0.0, 0.75))
}

/// Quaternary entropy evaluated on the monotone envelope min(Q̂, ¼): the
/// raw H decreases again past the uniform point ¼, where a larger click
/// rate would spuriously improve the bound.
fn entropy_envelope(q_hat: f64) -> Result<f64> {
    bounds::quaternary_entropy(q_hat.min(0.25)).map_err(QrngError::from)
}

/// Finite-size output length ℓ = max(0, ⌊n[2−H(Q̂)] − 2 log₂(1/ε_sec)⌋).
pub fn qrng_output_length(p: &QrngParams) -> Result<KeyRateReport> {
    let delta = bounds::serfling_delta(p.n, p.k, p.budget.eps_smooth)?;
    let qh = (p.q_obs + delta).clamp(0.0, 0.75);
    let h = entropy_envelope(qh)?;
    let hmin_smooth = p.n as f64 * (2.0 - h);
    let log_term = -2.0 * p.budget.eps_sec.log2();
    let rhs = hmin_smooth - log_term;
    let ell = if rhs > 0.0 { rhs.floor() as u64 } else { 0 };
    let delta_sec = bounds::secrecy_delta(ell, hmin_smooth, p.budget.eps_smooth);

    let mut terms = BTreeMap::new();
    terms.insert("n".into(), p.n as f64);
    terms.insert("k".into(), p.k as f64);
    terms.insert("q_obs".into(), p.q_obs);
    terms.insert("serfling_delta".into(), delta);
    terms.insert("q_hat".into(), qh);
    terms.insert("quaternary_entropy".into(), h);
    terms.insert("hmin_smooth".into(), hmin_smooth);
    terms.insert("log_term".into(), log_term);
    terms.insert("ell".into(), ell as f64);
    terms.insert("rate_per_round".into(), ell as f64 / p.n as f64);
    terms.insert("delta_sec".into(), delta_sec);

    Ok(KeyRateReport { hmin_smooth, e_hat: qh, ell, delta_sec, terms })
}

/// Asymptotic rate 2 − H(min(Q, ¼)) in bits per round (no statistical
/// penalties, no hashing cost).
pub fn qrng_asymptotic_rate(q_obs: f64) -> Result<f64> {
    if !q_obs.is_finite() || !(0.0..=1.0).contains(&q_obs) {
        return Err(QrngError::InvalidParam { what: "q_obs", value: q_obs });
    }
    Ok((2.0 - entropy_envelope(q_obs)?).max(0.0))
}

// ----- Sampling simulator -----

/// Tallies of a simulated run: the quadrant symbols and the threshold
/// detector's click record.
#[derive(Debug, Clone, PartialEq)]
pub struct QrngObservation {
    pub symbols: Vec<u8>,
    pub clicks: u64,
    pub click_freq: f64,
}

/// Sample `n_rounds` heterodyne rounds from a Fock-diagonal source: the
/// photon number m follows `probs`, the outcome phase is exactly uniform
/// (phase-randomized source), the symbol is the quadrant x = ⌊2θ/π⌋, and
/// the ideal threshold detector clicks iff m ≥ 1. Deterministic per seed.
pub fn simulate_qrng(n_rounds: u64, source: &FockDiagonalState, seed: u64) -> Result<QrngObservation> {
    if n_rounds < 1 {
        return Err(QrngError::InvalidParam { what: "n_rounds", value: n_rounds as f64 });
    }
    let total: f64 = source.probs.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols = Vec::with_capacity(n_rounds as usize);
    let mut clicks = 0u64;
    for _ in 0..n_rounds {
        let r: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut m = source.probs.len() - 1;
        for (idx, &p) in source.probs.iter().enumerate() {
            acc += p;
            if r < acc {
                m = idx;
                break;
            }
        }
        if m >= 1 {
            clicks += 1;
        }
        let theta: f64 = rng.gen::<f64>() * 2.0 * PI;
        symbols.push(((theta / FRAC_PI_2) as usize).min(3) as u8);
    }
    Ok(QrngObservation {
        symbols,
        clicks,
        click_freq: clicks as f64 / n_rounds as f64,
    })
}

// ----- Toeplitz extraction -----

/// Two-universal hash y_i = ⊕_j T_{i,j} x_j over GF(2), with the Toeplitz
/// matrix T_{i,j} = s_{i−j+in−1} built from the seed's `in + out − 1` bits.
pub fn toeplitz_extract(raw: &[u8], seed: &ToeplitzSeed, out_len: usize) -> Result<Vec<u8>> {
    if let Some(&b) = raw.iter().find(|&&b| b > 1) {
        return Err(QrngError::InvalidParam { what: "raw bit", value: b as f64 });
    }
    let expected = raw.len() + out_len;
    if expected == 0 || seed.bits.len() + 1 != expected {
        return Err(QrngError::SeedLengthMismatch {
            expected: expected.saturating_sub(1),
            got: seed.bits.len(),
        });
    }
    let in_len = raw.len();
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let mut y = 0u8;
        for (j, &x) in raw.iter().enumerate() {
            y ^= seed.bits[i + in_len - 1 - j] & x;
        }
        out.push(y);
    }
    Ok(out)
}

// ----- Explicit reduced-state oracle -----

/// Exact min-entropy of the explicitly constructed reduced state
///
/// ```text
/// ϱ̄_XE = ¼ Σ_{x=0}^3 |x⟩⟨x| ⊗ P{ Σ_m √p_m e^{−imxπ/2} |e_m⟩ }
/// ```
///
/// on the Fock support truncated at `trunc` (renormalized). Grouping
/// m = 4k+y shows the conditional states are uniform-profile states over
/// the residue classes, so the optimal measurement is the Fourier family
/// f_x = ½ Σ_y e^{−iπxy/2} g_y over the normalized class vectors g_y,
/// completed by ¼(I − P_span) off the classical support. The measurement's
/// optimality is verified through the dual certificate before returning
/// −log₂ p_guess; the result must match [`qrng_hmin_per_round`] of the
/// residue profile.
pub fn reduced_state_hmin_oracle(s: &FockDiagonalState, trunc: usize) -> Result<f64> {
    if trunc > MAX_ORACLE_TRUNC {
        return Err(QrngError::TooLarge { trunc, max: MAX_ORACLE_TRUNC });
    }
    let cut = trunc.min(s.m_max());
    let mut p: Vec<f64> = s.probs[..=cut].to_vec();
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(QrngError::InvalidState {
            reason: "truncated support carries no probability".into(),
        });
    }
    p.iter_mut().for_each(|v| *v /= total);
    let dim = (cut + 1).max(4);

    // Conditional pure states ψ_x[m] = √p_m e^{−imxπ/2}.
    let mut cond_states = Vec::with_capacity(4);
    for x in 0..4usize {
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        for (m, &pm) in p.iter().enumerate() {
            let phase = -(m as f64) * x as f64 * FRAC_PI_2;
            psi[m] = Complex64::from_polar(pm.sqrt(), phase);
        }
        cond_states.push(DensityMatrix::pure(&psi)?);
    }
    let state = CQState::new(vec![0.25; 4], cond_states)?;

    // Residue-class vectors g_y; a class with no weight contributes its
    // lowest Fock basis vector so the family stays orthonormal.
    let mut q = [0.0f64; 4];
    for (m, &pm) in p.iter().enumerate() {
        q[m % 4] += pm;
    }
    let mut g = vec![vec![Complex64::new(0.0, 0.0); dim]; 4];
    for y in 0..4usize {
        if q[y] > 0.0 {
            for m in (y..=cut).step_by(4) {
                g[y][m] = Complex64::new((p[m] / q[y]).sqrt(), 0.0);
            }
        } else {
            g[y][y] = Complex64::new(1.0, 0.0);
        }
    }
    let mut span = ComplexMatrix::zeros(dim);
    for gy in &g {
        span = span.add(&ComplexMatrix::outer(gy))?;
    }
    let mut elements = Vec::with_capacity(4);
    for x in 0..4usize {
        let mut f = vec![Complex64::new(0.0, 0.0); dim];
        for (y, gy) in g.iter().enumerate() {
            let phase = Complex64::from_polar(0.5, -FRAC_PI_2 * (x * y) as f64);
            for (out, &c) in f.iter_mut().zip(gy) {
                *out += phase * c;
            }
        }
        let completion = ComplexMatrix::identity(dim).sub(&span)?.scale_re(0.25);
        elements.push(ComplexMatrix::outer(&f).add(&completion)?);
    }
    let povm = Povm::new(elements)?;

    let pg = guess_prob(&state, &povm)?;
    if !dual_certificate(&state, &povm, 1e-8)? {
        return Err(QrngError::Numerics {
            what: "reduced-state measurement failed the dual optimality certificate".into(),
        });
    }
    Ok(-pg.log2())
}

/// Full pre-reduction state ϱ⁰_XE on the truncated support: the conditional
/// states carry the Gram damping Ω_{mm'} = Γ((m+m')/2+1)/√(m!m'!) between
/// Fock coherences,
///
/// ```text
/// τ_x[m,m'] = e^{−i(m−m')xπ/2} √(p_m p_{m'}) Ω_{mm'},
/// ```
///
/// which data processing places above the reduced-state bound. Used by the
/// tests as the harder side of the inequality.
#[cfg(test)]
fn damped_full_state(s: &FockDiagonalState, trunc: usize) -> Result<CQState> {
    let cut = trunc.min(s.m_max());
    let mut p: Vec<f64> = s.probs[..=cut].to_vec();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    let dim = cut + 1;

    // Γ(s/2 + 1) in closed form: (s/2)! for even s, and for odd s
    // Γ(j + ½) = √π (2j)!/(4^j j!) with j = (s+1)/2.
    let factorial = |n: usize| -> f64 { (1..=n).map(|i| i as f64).product() };
    let gamma_half_arg = |s: usize| -> f64 {
        if s % 2 == 0 {
            factorial(s / 2)
        } else {
            let j = (s + 1) / 2;
            PI.sqrt() * factorial(2 * j) / (4.0f64.powi(j as i32) * factorial(j))
        }
    };

    let mut cond_states = Vec::with_capacity(4);
    for x in 0..4usize {
        let mut tau = ComplexMatrix::zeros(dim);
        for m in 0..dim {
            for mp in 0..dim {
                let omega = gamma_half_arg(m + mp) / (factorial(m) * factorial(mp)).sqrt();
                let mag = (p[m] * p[mp]).sqrt() * omega;
                let phase = -((m as f64) - (mp as f64)) * x as f64 * FRAC_PI_2;
                tau.set(m, mp, Complex64::from_polar(mag, phase));
            }
        }
        cond_states.push(DensityMatrix::new(tau)?);
    }
    Ok(CQState::new(vec![0.25; 4], cond_states)?)
}
