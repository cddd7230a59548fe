//! Classical-quantum states and the one-shot min-entropy machinery.
//!
//! A CQ state τ_XE = Σ_x p_x |x⟩⟨x| ⊗ τ_x is reduced by [`uniformize`] to a
//! canonical profile of weights λ_y; the min-entropy of the canonical state
//! ρ_XE = (1/d) Σ_x |x⟩⟨x| ⊗ |Ψ_x⟩⟨Ψ_x|, with |Ψ_x⟩ = Σ_y ω^{xy} √λ_y |e_y⟩
//! and ω = e^{2πi/d}, is exactly
//!
//! ```text
//! H_min(X|E) = log₂ d − log₂ (Σ_y √λ_y)²
//! ```
//!
//! and lower-bounds the min-entropy of the original state. The optimum is
//! attained by the discrete-Fourier POVM ([`optimal_povm`]); independence
//! oracles (exact binary Helstrom, a dual optimality certificate, and a
//! seeded heuristic POVM search) let every claim be cross-checked
//! numerically.

use crate::qmath::{
    self, eig_hermitian, is_psd, trace_norm, ComplexMatrix, DensityMatrix, MatrixError,
};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

/// Tolerance on Σp_x − 1 and Σλ_y − 1.
pub const DIST_TOL: f64 = 1e-9;
/// PSD tolerance for POVM elements.
pub const POVM_PSD_TOL: f64 = 1e-9;
/// Max-entry tolerance for POVM completeness ΣM_x = I.
pub const POVM_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MinEntropyError {
    #[error("invalid probability distribution: {reason}")]
    InvalidDistribution { reason: String },
    #[error("invalid eigenvalue profile: {reason}")]
    InvalidProfile { reason: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("operation requires a binary alphabet, got d = {d}")]
    NotBinary { d: usize },
    #[error("search space too large: alphabet {d} (max 8), adversary dimension {dim} (max 16)")]
    DimTooLarge { d: usize, dim: usize },
    #[error("invalid POVM: {reason}")]
    InvalidPovm { reason: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, MinEntropyError>;

// ----- Types -----

/// Classical-quantum state: distribution p_x over a d-letter alphabet paired
/// with adversary states τ_x of a common dimension.
#[derive(Debug, Clone)]
pub struct CQState {
    probs: Vec<f64>,
    cond_states: Vec<DensityMatrix>,
}

impl CQState {
    pub fn new(probs: Vec<f64>, cond_states: Vec<DensityMatrix>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MinEntropyError::InvalidDistribution {
                reason: "empty distribution".into(),
            });
        }
        if probs.len() != cond_states.len() {
            return Err(MinEntropyError::DimMismatch {
                left: probs.len(),
                right: cond_states.len(),
            });
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(MinEntropyError::InvalidDistribution {
                reason: "probabilities must be finite and nonnegative".into(),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DIST_TOL {
            return Err(MinEntropyError::InvalidDistribution {
                reason: format!("probabilities sum to {total}, expected 1"),
            });
        }
        let dim = cond_states[0].dim();
        for s in &cond_states {
            if s.dim() != dim {
                return Err(MinEntropyError::DimMismatch {
                    left: dim,
                    right: s.dim(),
                });
            }
        }
        Ok(CQState { probs, cond_states })
    }

    /// Alphabet size d.
    pub fn d(&self) -> usize {
        self.probs.len()
    }

    /// Adversary (conditional-state) dimension.
    pub fn adversary_dim(&self) -> usize {
        self.cond_states[0].dim()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cond_states(&self) -> &[DensityMatrix] {
        &self.cond_states
    }
}

/// Canonical weight profile λ_y produced by the uniformization.
#[derive(Debug, Clone, PartialEq)]
pub struct EigProfile {
    lambdas: Vec<f64>,
}

impl EigProfile {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(MinEntropyError::InvalidProfile {
                reason: "empty profile".into(),
            });
        }
        if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(MinEntropyError::InvalidProfile {
                reason: "entries must be finite and nonnegative".into(),
            });
        }
        let total: f64 = lambdas.iter().sum();
        if (total - 1.0).abs() > DIST_TOL {
            return Err(MinEntropyError::InvalidProfile {
                reason: format!("entries sum to {total}, expected 1"),
            });
        }
        Ok(EigProfile { lambdas })
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

/// Positive operator-valued measure: elements PSD within 1e-9, summing to the
/// identity within 1e-8 max-entry error.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(MinEntropyError::InvalidPovm {
                reason: "no elements".into(),
            });
        }
        let dim = elements[0].dim();
        let mut sum = ComplexMatrix::zeros(dim);
        for (idx, m) in elements.iter().enumerate() {
            if m.dim() != dim {
                return Err(MinEntropyError::DimMismatch {
                    left: dim,
                    right: m.dim(),
                });
            }
            if !is_psd(m, POVM_PSD_TOL)? {
                return Err(MinEntropyError::InvalidPovm {
                    reason: format!("element {idx} is not PSD within {POVM_PSD_TOL:e}"),
                });
            }
            sum = sum.add(m)?;
        }
        let dev = sum.sub(&ComplexMatrix::identity(dim))?.max_abs_entry();
        if dev > POVM_SUM_TOL {
            return Err(MinEntropyError::InvalidPovm {
                reason: format!("elements sum to identity only within {dev:e}"),
            });
        }
        Ok(Povm { elements })
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
}

// ----- Uniformization and the closed-form bound -----

/// Reduce an arbitrary CQ state to its canonical profile.
///
/// Each τ_x = Σ_j μ_j |v_j⟩⟨v_j| is purified to |ψ_x⟩ = Σ_j √μ_j |v_j⟩⊗|j⟩
/// (reference system of the same dimension, eigenvalues in this crate's
/// deterministic ascending order), and
///
/// ```text
/// λ_y = ‖ (1/√d) Σ_z ω^{−yz} √p_z |ψ_z⟩ ‖²,   ω = e^{2πi/d}.
/// ```
///
/// The profile depends on the purification convention, but the resulting
/// min-entropy bound is valid for every choice; tests check the one-sided
/// bound against exact discrimination oracles.
pub fn uniformize(state: &CQState) -> Result<EigProfile> {
    let d = state.d();
    let dim = state.adversary_dim();
    let pur_dim = dim * dim;

    let mut purifications: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    for tau in state.cond_states() {
        let eig = eig_hermitian(tau.mat())?;
        let mut psi = vec![Complex64::new(0.0, 0.0); pur_dim];
        for j in 0..dim {
            let w = eig.values[j].max(0.0).sqrt();
            if w == 0.0 {
                continue;
            }
            for a in 0..dim {
                psi[a * dim + j] += eig.vectors.get(a, j) * w;
            }
        }
        purifications.push(psi);
    }

    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut lambdas = Vec::with_capacity(d);
    for y in 0..d {
        let mut acc = vec![Complex64::new(0.0, 0.0); pur_dim];
        for (z, psi) in purifications.iter().enumerate() {
            let phase = -2.0 * PI * (y as f64) * (z as f64) / d as f64;
            let w = Complex64::from_polar(state.probs[z].sqrt() * inv_sqrt_d, phase);
            for (a, p) in acc.iter_mut().zip(psi) {
                *a += w * p;
            }
        }
        lambdas.push(acc.iter().map(|z| z.norm_sqr()).sum::<f64>());
    }

    // Parseval guarantees Σλ = Σ p_z up to rounding; renormalize the dust.
    let total: f64 = lambdas.iter().sum();
    for l in &mut lambdas {
        *l /= total;
    }
    EigProfile::new(lambdas)
}

/// Canonical CQ state of a profile: uniform p_x = 1/d with pure conditionals
/// |Ψ_x⟩ = Σ_y ω^{xy} √λ_y |e_y⟩.
pub fn build_uniform_cq(profile: &EigProfile) -> Result<CQState> {
    let d = profile.d();
    let probs = vec![1.0 / d as f64; d];
    let mut cond = Vec::with_capacity(d);
    for x in 0..d {
        let psi: Vec<Complex64> = (0..d)
            .map(|y| {
                let phase = 2.0 * PI * (x as f64) * (y as f64) / d as f64;
                Complex64::from_polar(profile.lambdas[y].sqrt(), phase)
            })
            .collect();
        cond.push(DensityMatrix::pure(&psi)?);
    }
    CQState::new(probs, cond)
}

/// Σ_y √λ_y, summed in ascending order so the result is independent of the
/// entry permutation (and rounds as well as possible).
fn root_sum(lambdas: &[f64]) -> f64 {
    let mut roots: Vec<f64> = lambdas.iter().map(|&l| l.sqrt()).collect();
    roots.sort_by(f64::total_cmp);
    roots.iter().sum()
}

/// The one-shot bound H_min = log₂ d − log₂ (Σ_y √λ_y)², in bits.
///
/// Exact for canonical states; a lower bound on H_min(X|E) for the state the
/// profile was uniformized from.
pub fn min_entropy_lb(profile: &EigProfile) -> f64 {
    let d = profile.d() as f64;
    let rs = root_sum(&profile.lambdas);
    (d.log2() - (rs * rs).log2()).clamp(0.0, d.log2())
}

/// Guessing probability of the canonical state: (Σ_y √λ_y)²/d = 2^{−H_min}.
pub fn profile_guess_prob(profile: &EigProfile) -> f64 {
    let rs = root_sum(&profile.lambdas);
    (rs * rs / profile.d() as f64).clamp(0.0, 1.0)
}

/// The discrete-Fourier POVM M_x = P{(1/√d) Σ_y ω^{xy} |e_y⟩} attaining the
/// canonical state's guessing probability.
pub fn optimal_povm(profile: &EigProfile) -> Result<Povm> {
    let d = profile.d();
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let elements = (0..d)
        .map(|x| {
            let v: Vec<Complex64> = (0..d)
                .map(|y| {
                    let phase = 2.0 * PI * (x as f64) * (y as f64) / d as f64;
                    Complex64::from_polar(inv_sqrt_d, phase)
                })
                .collect();
            ComplexMatrix::outer(&v)
        })
        .collect();
    Povm::new(elements)
}

// ----- Discrimination oracles -----

/// Σ_x p_x Tr[M_x τ_x]: success probability of guessing X with the given
/// POVM, one element per alphabet letter.
pub fn guess_prob(state: &CQState, povm: &Povm) -> Result<f64> {
    if povm.elements.len() != state.d() {
        return Err(MinEntropyError::DimMismatch {
            left: state.d(),
            right: povm.elements.len(),
        });
    }
    if povm.dim() != state.adversary_dim() {
        return Err(MinEntropyError::DimMismatch {
            left: state.adversary_dim(),
            right: povm.dim(),
        });
    }
    let dim = povm.dim();
    let mut p = 0.0;
    for ((px, tau), m) in state.probs.iter().zip(&state.cond_states).zip(&povm.elements) {
        let mut tr = Complex64::new(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                tr += m.get(r, c) * tau.mat().get(c, r);
            }
        }
        p += px * tr.re;
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Weighted difference operator p₀τ₀ − p₁τ₁ of a binary CQ state.
fn binary_difference(state: &CQState) -> Result<ComplexMatrix> {
    if state.d() != 2 {
        return Err(MinEntropyError::NotBinary { d: state.d() });
    }
    Ok(state.cond_states[0]
        .mat()
        .scale_re(state.probs[0])
        .sub(&state.cond_states[1].mat().scale_re(state.probs[1]))?)
}

/// Exact binary discrimination optimum (Helstrom):
/// p_guess = ½(1 + ‖p₀τ₀ − p₁τ₁‖₁).
pub fn helstrom(state: &CQState) -> Result<f64> {
    let delta = binary_difference(state)?;
    Ok(0.5 * (1.0 + trace_norm(&delta)?))
}

/// The projective measurement achieving [`helstrom`]: M₀ projects onto the
/// nonnegative eigenspace of p₀τ₀ − p₁τ₁ and M₁ = I − M₀.
pub fn helstrom_povm(state: &CQState) -> Result<Povm> {
    let delta = binary_difference(state)?;
    let eig = eig_hermitian(&delta)?;
    let dim = delta.dim();
    let mut m0 = ComplexMatrix::zeros(dim);
    for k in 0..dim {
        if eig.values[k] >= 0.0 {
            let v = eig.vector(k);
            m0 = m0.add(&ComplexMatrix::outer(&v))?;
        }
    }
    let m1 = ComplexMatrix::identity(dim).sub(&m0)?;
    Povm::new(vec![m0, m1])
}

/// Optimality certificate for a discrimination POVM: with
/// Y = Σ_x p_x τ_x M_x, the POVM is optimal iff Y is Hermitian and
/// Y − p_x τ_x is PSD for every x. Returns the check at tolerance `tol`.
pub fn dual_certificate(state: &CQState, povm: &Povm, tol: f64) -> Result<bool> {
    if povm.elements.len() != state.d() {
        return Err(MinEntropyError::DimMismatch {
            left: state.d(),
            right: povm.elements.len(),
        });
    }
    if povm.dim() != state.adversary_dim() {
        return Err(MinEntropyError::DimMismatch {
            left: state.adversary_dim(),
            right: povm.dim(),
        });
    }
    let dim = povm.dim();
    let mut y = ComplexMatrix::zeros(dim);
    for ((px, tau), m) in state.probs.iter().zip(&state.cond_states).zip(&povm.elements) {
        y = y.add(&tau.mat().mul(m)?.scale_re(*px))?;
    }
    if y.hermitian_deviation() > tol {
        return Ok(false);
    }
    // Work with the Hermitian part so the PSD checks are well-posed.
    let y_h = y.add(&y.adjoint())?.scale_re(0.5);
    for (px, tau) in state.probs.iter().zip(&state.cond_states) {
        let gap = y_h.sub(&tau.mat().scale_re(*px))?;
        if !is_psd(&gap, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Heuristic maximization of the guessing probability over projective
/// measurements, lower-bounding the true optimum.
///
/// Each restart draws a Haar-random orthonormal basis of the adversary space
/// (seeded, so runs are reproducible), greedily assigns every basis vector to
/// its best letter, and then performs blocked coordinate ascent: for every
/// basis pair, the contribution of its 2-plane is maximized exactly over all
/// ordered label pairs (x, y) — relabeling alone when x = y, otherwise
/// rotating the pair onto the top/bottom eigenvectors of the weighted
/// discrimination operator p_xτ_x − p_yτ_y restricted to the plane. Sweeps
/// stop when a full pass improves the score by less than 1e-10 or `iters` is
/// exhausted; the best score across restarts is returned.
pub fn povm_search(state: &CQState, restarts: u32, iters: u32, seed: u64) -> Result<f64> {
    let d = state.d();
    let dim = state.adversary_dim();
    if d > 8 || dim > 16 {
        return Err(MinEntropyError::DimTooLarge { d, dim });
    }
    let weighted: Vec<ComplexMatrix> = state
        .probs
        .iter()
        .zip(&state.cond_states)
        .map(|(p, tau)| tau.mat().scale_re(*p))
        .collect();

    let quad = |m: &ComplexMatrix, u: &[Complex64], v: &[Complex64]| -> Complex64 {
        // ⟨u|M|v⟩
        let mv = m.apply(v);
        qmath::inner(u, &mv)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = state.probs.iter().cloned().fold(0.0f64, f64::max);

    for _ in 0..restarts {
        let mut basis = random_orthonormal_basis(dim, &mut rng);
        let mut assignment = vec![0usize; dim];
        let mut score = assign_best(&weighted, &basis, &mut assignment, &quad);

        for _ in 0..iters {
            let before = score;
            for k in 0..dim {
                for l in (k + 1)..dim {
                    // Restriction data for every letter on span{u_k, u_l}.
                    let diag_k: Vec<f64> =
                        weighted.iter().map(|w| quad(w, &basis[k], &basis[k]).re).collect();
                    let diag_l: Vec<f64> =
                        weighted.iter().map(|w| quad(w, &basis[l], &basis[l]).re).collect();
                    let off: Vec<Complex64> =
                        weighted.iter().map(|w| quad(w, &basis[k], &basis[l])).collect();

                    let current = diag_k[assignment[k]] + diag_l[assignment[l]];
                    // Best contribution of this plane over all label pairs.
                    let mut best_val = current;
                    let mut best_pair = (assignment[k], assignment[l]);
                    let mut best_rot: Option<(Complex64, Complex64)> = None;
                    for x in 0..d {
                        // Same label: rotation cannot change Tr[P W_x].
                        let same = diag_k[x] + diag_l[x];
                        if same > best_val + 1e-12 {
                            best_val = same;
                            best_pair = (x, x);
                            best_rot = None;
                        }
                        for y in 0..d {
                            if y == x {
                                continue;
                            }
                            // max ⟨u|W_x−W_y|u⟩ over the plane + Tr[P W_y].
                            let a = diag_k[x] - diag_k[y];
                            let dd = diag_l[x] - diag_l[y];
                            let b = off[x] - off[y];
                            let mid = 0.5 * (a + dd);
                            let rad = (0.25 * (a - dd) * (a - dd) + b.norm_sqr()).sqrt();
                            let cand = mid + rad + diag_k[y] + diag_l[y];
                            if cand > best_val + 1e-12 {
                                best_val = cand;
                                best_pair = (x, y);
                                // Top eigenvector (v0, v1) of [[a, b], [b*, dd]].
                                let rot = if b.norm() < 1e-15 {
                                    if a >= dd {
                                        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
                                    } else {
                                        (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
                                    }
                                } else {
                                    let lam_top = mid + rad;
                                    let v = (b, Complex64::new(lam_top - a, 0.0));
                                    let n = (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
                                    (v.0 / n, v.1 / n)
                                };
                                best_rot = Some(rot);
                            }
                        }
                    }
                    if best_val <= current + 1e-12 {
                        continue;
                    }
                    if let Some((v0, v1)) = best_rot {
                        let uk: Vec<Complex64> = basis[k]
                            .iter()
                            .zip(&basis[l])
                            .map(|(p, q)| v0 * p + v1 * q)
                            .collect();
                        let ul: Vec<Complex64> = basis[k]
                            .iter()
                            .zip(&basis[l])
                            .map(|(p, q)| -v1.conj() * p + v0.conj() * q)
                            .collect();
                        basis[k] = uk;
                        basis[l] = ul;
                    }
                    assignment[k] = best_pair.0;
                    assignment[l] = best_pair.1;
                }
            }
            score = assign_best(&weighted, &basis, &mut assignment, &quad);
            if score - before < 1e-10 {
                break;
            }
        }
        best = best.max(score);
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Relabel every basis vector to its best letter and return the score.
fn assign_best(
    weighted: &[ComplexMatrix],
    basis: &[Vec<Complex64>],
    assignment: &mut [usize],
    quad: &impl Fn(&ComplexMatrix, &[Complex64], &[Complex64]) -> Complex64,
) -> f64 {
    let mut score = 0.0;
    for (k, u) in basis.iter().enumerate() {
        let mut best_x = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (x, w) in weighted.iter().enumerate() {
            let v = quad(w, u, u).re;
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
        assignment[k] = best_x;
        score += best_v;
    }
    score
}

/// Haar-random orthonormal basis via Gram-Schmidt on complex Gaussian
/// vectors (Box-Muller from the seeded stream).
fn random_orthonormal_basis(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    let mut gauss = || {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(gauss(), gauss())).collect();
        for b in &basis {
            let overlap = qmath::inner(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= overlap * bi;
            }
        }
        let n = qmath::vec_norm(&v);
        if n < 1e-8 {
            continue; // essentially dependent draw; resample
        }
        for vi in &mut v {
            *vi /= n;
        }
        basis.push(v);
    }
    basis
}
