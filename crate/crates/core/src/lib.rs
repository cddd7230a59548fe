//! One-shot min-entropy bounds for classical-quantum states, plus the
//! finite-size secret-key and randomness calculators built on top of them.
//!
//! The crate is organized bottom-up:
//!
//! * [`qmath`] — dense complex linear algebra at small dimension (Hermitian
//!   eigendecomposition via cyclic Jacobi, fidelity, trace norm, PSD checks).
//! * [`bounds`] — classical entropy functions, concentration inequalities
//!   (Serfling-type), counting bounds, and leftover-hash secrecy accounting.
//! * [`minentropy`] — classical-quantum states, the uniformization that maps
//!   an arbitrary CQ state to a canonical profile `λ_y`, the closed-form
//!   min-entropy lower bound `H_min = log d − log(Σ_y √λ_y)²`, the optimal
//!   discrete-Fourier POVM attaining it, and brute-force discrimination
//!   oracles (Helstrom, dual certificates, heuristic POVM search).
//! * [`bb84`] — entanglement-based BB84 finite-key length, Bell-spectrum
//!   min-entropy, and a depolarizing-channel Monte Carlo simulator.
//! * [`diqkd`] — CHSH-based device-independent key lengths: the singular-value
//!   decomposition of the CHSH operator, winning frequency accounting, the
//!   phase-error conversion, and a Born-rule game simulator.
//! * [`qrng`] — source-independent quantum randomness from heterodyne
//!   quadrant binning of phase-randomized Fock-diagonal sources, plus a
//!   Toeplitz two-universal extractor.
//! * [`report`] — the common key-rate report structure shared by the three
//!   protocol calculators.

#![forbid(unsafe_code)]

pub mod bb84;
pub mod bounds;
pub mod diqkd;
pub mod minentropy;
pub mod qmath;
pub mod qrng;
pub mod report;
