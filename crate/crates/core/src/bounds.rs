//! Classical entropic and statistical machinery shared by the protocol
//! calculators: binary/quaternary entropy, the log-domain binomial tail,
//! Serfling-type finite-sampling corrections, the Chernoff–Hoeffding
//! composition for repeated CHSH tests, and leftover-hash secrecy accounting.
//!
//! All entropies and logarithms are base 2 unless a formula explicitly uses
//! the natural log, and `0·log 0 = 0` throughout.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("{what} = {value} is outside its domain {domain}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, BoundsError>;

fn check_range(what: &'static str, value: f64, lo: f64, hi: f64, domain: &'static str) -> Result<()> {
    if !(value >= lo && value <= hi) {
        return Err(BoundsError::OutOfRange { what, value, domain });
    }
    Ok(())
}

fn check_open_unit(what: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(BoundsError::OutOfRange {
            what,
            value,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

// ----- Entropies -----

/// Binary entropy h(x) = −x log₂ x − (1−x) log₂(1−x).
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("binary_entropy argument", x, 0.0, 1.0, "[0, 1]")?;
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * x.log2();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).log2();
    }
    Ok(h)
}

/// Quaternary entropy H(q) = −q log₂ q − (1−q) log₂[(1−q)/3]: the Shannon
/// entropy of the four-state distribution {q, (1−q)/3, (1−q)/3, (1−q)/3}.
/// H(0) = log₂ 3 and the maximum H = 2 sits at q = 1/4, where the
/// distribution is uniform.
pub fn quaternary_entropy(q: f64) -> Result<f64> {
    check_range("quaternary_entropy argument", q, 0.0, 1.0, "[0, 1]")?;
    let mut h = 0.0;
    if q > 0.0 {
        h -= q * q.log2();
    }
    if q < 1.0 {
        h -= (1.0 - q) * ((1.0 - q) / 3.0).log2();
    }
    Ok(h)
}

// ----- Binomial tail -----

/// log₂ Σ_{w=0}^{⌊n·frac⌋} C(n, w), the counting exponent of a Hamming ball.
///
/// Exact integer accumulation (u128, which is lossless since the full sum is
/// at most 2⁶⁴) for n ≤ 64; log-domain summation above. For frac ≤ 1/2 the
/// result is bounded by n·h(frac).
pub fn binomial_tail_log(n: u64, frac: f64) -> Result<f64> {
    if n < 1 {
        return Err(BoundsError::OutOfRange {
            what: "binomial_tail_log n",
            value: n as f64,
            domain: "n ≥ 1",
        });
    }
    check_range("binomial_tail_log frac", frac, 0.0, 1.0, "[0, 1]")?;
    let w_max = ((n as f64) * frac).floor().min(n as f64) as u64;
    if n <= 64 {
        let mut term: u128 = 1;
        let mut sum: u128 = 1;
        for w in 1..=w_max {
            term = term * (n - w + 1) as u128 / w as u128;
            sum += term;
        }
        Ok((sum as f64).log2())
    } else {
        // ln C(n, w) built incrementally; running log-sum-exp accumulator.
        let mut ln_term = 0.0f64;
        let mut ln_sum = 0.0f64;
        for w in 1..=w_max {
            ln_term += ((n - w + 1) as f64).ln() - (w as f64).ln();
            let hi = ln_sum.max(ln_term);
            ln_sum = hi + ((ln_sum - hi).exp() + (ln_term - hi).exp()).ln();
        }
        Ok(ln_sum / std::f64::consts::LN_2)
    }
}

// ----- Concentration inequalities -----

/// Finite-sampling correction strategy for without-replacement estimation.
/// The choice of inequality is free in this kind of analysis; Serfling is the
/// default and the only strategy shipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Concentration {
    #[default]
    Serfling,
}

impl Concentration {
    /// Correction added to an error rate observed on k test samples so that
    /// it upper-bounds the rate on the n untested samples except with
    /// probability eps.
    pub fn key_delta(self, n: u64, k: u64, eps: f64) -> Result<f64> {
        match self {
            Concentration::Serfling => serfling_delta(n, k, eps),
        }
    }

    /// The variant for CHSH winning-frequency estimation, where each of the
    /// N = 4(n+k) rounds contributes a quarter-weight sample.
    pub fn chsh_delta(self, n: u64, k: u64, eps_g: f64) -> Result<f64> {
        match self {
            Concentration::Serfling => serfling_delta_diqkd(n, k, eps_g),
        }
    }
}

fn check_counts(n: u64, k: u64) -> Result<()> {
    if n < 1 {
        return Err(BoundsError::OutOfRange {
            what: "sample count n",
            value: n as f64,
            domain: "n ≥ 1",
        });
    }
    if k < 1 {
        return Err(BoundsError::OutOfRange {
            what: "test count k",
            value: k as f64,
            domain: "k ≥ 1",
        });
    }
    Ok(())
}

/// Serfling correction δ = √[(n+k)(k+1)/(n k²) · ln(1/ε)].
pub fn serfling_delta(n: u64, k: u64, eps: f64) -> Result<f64> {
    check_counts(n, k)?;
    check_open_unit("serfling_delta eps", eps)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(((nf + kf) * (kf + 1.0) / (nf * kf * kf) * (1.0 / eps).ln()).sqrt())
}

/// Serfling correction for the device-independent CHSH estimate:
/// √[(n+k)(4k+1)/(16 n k²) · ln(1/ε_g)].
pub fn serfling_delta_diqkd(n: u64, k: u64, eps_g: f64) -> Result<f64> {
    check_counts(n, k)?;
    check_open_unit("serfling_delta_diqkd eps_g", eps_g)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(((nf + kf) * (4.0 * kf + 1.0) / (16.0 * nf * kf * kf) * (1.0 / eps_g).ln()).sqrt())
}

/// Statistical penalty μ = √[(2/k) ln(√6/ε_t)] subtracted from the observed
/// CHSH winning frequency (from setting ε_t² = 6e^{−μ²k}).
pub fn chsh_statistical_penalty(k: u64, eps_t: f64) -> Result<f64> {
    if k < 1 {
        return Err(BoundsError::OutOfRange {
            what: "test count k",
            value: k as f64,
            domain: "k ≥ 1",
        });
    }
    check_open_unit("chsh_statistical_penalty eps_t", eps_t)?;
    Ok((2.0 / k as f64 * (6.0f64.sqrt() / eps_t).ln()).sqrt())
}

/// Chernoff–Hoeffding composition failure probability for the repeated CHSH
/// test: 2e^{−2μ²N} + 4e^{−ν²N}.
pub fn ch_composition_failure(mu: f64, nu: f64, n_rounds: u64) -> Result<f64> {
    if mu < 0.0 {
        return Err(BoundsError::OutOfRange {
            what: "ch_composition_failure mu",
            value: mu,
            domain: "mu ≥ 0",
        });
    }
    if nu < 0.0 {
        return Err(BoundsError::OutOfRange {
            what: "ch_composition_failure nu",
            value: nu,
            domain: "nu ≥ 0",
        });
    }
    if n_rounds < 1 {
        return Err(BoundsError::OutOfRange {
            what: "ch_composition_failure n_rounds",
            value: n_rounds as f64,
            domain: "n_rounds ≥ 1",
        });
    }
    let nf = n_rounds as f64;
    Ok(2.0 * (-2.0 * mu * mu * nf).exp() + 4.0 * (-nu * nu * nf).exp())
}

// ----- Leftover-hash secrecy -----

/// Composable secrecy parameter Δ = 2ε + ½√(2^{ℓ − H_min^ε}) of an
/// ℓ-bit key hashed out of a source with smooth min-entropy `hmin_eps`.
pub fn secrecy_delta(ell: u64, hmin_eps: f64, eps_smooth: f64) -> f64 {
    2.0 * eps_smooth + 0.5 * ((ell as f64 - hmin_eps) / 2.0).exp2()
}

// ----- Failure budget -----

/// The ε-budget a protocol run is charged against. `eps_sec = 4 eps_smooth`
/// is enforced at construction; `eps_t`/`eps_g` are only consumed by the
/// device-independent calculator (where `eps_smooth = eps_t + eps_g`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureBudget {
    pub eps_smooth: f64,
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub eps_t: f64,
    pub eps_g: f64,
}

impl FailureBudget {
    /// Budget from an explicit split. `eps_sec` is derived as 4·eps_smooth.
    pub fn new(eps_smooth: f64, eps_cor: f64, eps_t: f64, eps_g: f64) -> Result<Self> {
        check_open_unit("eps_smooth", eps_smooth)?;
        check_open_unit("eps_cor", eps_cor)?;
        check_open_unit("eps_t", eps_t)?;
        check_open_unit("eps_g", eps_g)?;
        let eps_sec = 4.0 * eps_smooth;
        check_open_unit("eps_sec = 4·eps_smooth", eps_sec)?;
        Ok(FailureBudget {
            eps_smooth,
            eps_sec,
            eps_cor,
            eps_t,
            eps_g,
        })
    }

    /// Budget for BB84-style runs, where no CHSH test is involved: the
    /// testing/generation entries are filled with `eps_smooth` and unused.
    pub fn qkd(eps_smooth: f64, eps_cor: f64) -> Result<Self> {
        Self::new(eps_smooth, eps_cor, eps_smooth, eps_smooth)
    }

    /// Budget for device-independent runs: ε = ε_t + ε_g.
    pub fn diqkd(eps_t: f64, eps_g: f64, eps_cor: f64) -> Result<Self> {
        Self::new(eps_t + eps_g, eps_cor, eps_t, eps_g)
    }

    /// Budget for QRNG runs: the caller fixes the target ε_sec and the
    /// smoothing parameter is ε = ε_sec/4. No correctness parameter is
    /// consumed (there is no error correction), but the field must stay in
    /// (0,1); it is pinned to eps_smooth.
    pub fn qrng(eps_sec: f64) -> Result<Self> {
        check_open_unit("eps_sec", eps_sec)?;
        let eps = eps_sec / 4.0;
        Self::new(eps, eps, eps, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG2_3: f64 = 1.584_962_500_721_156_3;

    #[test]
    fn binary_entropy_anchors() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        // Frozen from a high-precision independent evaluation.
        assert!((binary_entropy(0.05).unwrap() - 0.286_396_957_115_956_25).abs() < 1e-12);
        // Symmetry about 1/2.
        for i in 0..=50 {
            let x = i as f64 / 100.0;
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert!(a <= 1.0 + 1e-15);
        }
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn quaternary_entropy_anchors() {
        assert!((quaternary_entropy(0.0).unwrap() - LOG2_3).abs() < 1e-12);
        // The four-state distribution {q, (1−q)/3 ×3} is uniform at q = 1/4.
        assert!((quaternary_entropy(0.25).unwrap() - 2.0).abs() < 1e-12);
        // Frozen independent evaluations.
        assert!((quaternary_entropy(0.01).unwrap() - 1.649_906_011_609_855_6).abs() < 1e-12);
        assert!((quaternary_entropy(0.75).unwrap() - 1.207_518_749_639_422).abs() < 1e-12);
        assert_eq!(quaternary_entropy(1.0).unwrap(), 0.0);
        assert!(quaternary_entropy(-0.01).is_err());
    }

    #[test]
    fn quaternary_dominates_binary_on_operating_range() {
        // The 3-way split of the residual mass adds entropy.
        for i in 0..100 {
            let q = 0.75 * i as f64 / 99.0;
            let hq = quaternary_entropy(q).unwrap();
            let hb = binary_entropy(q).unwrap();
            assert!(hq >= hb - 1e-12, "q={q}: {hq} < {hb}");
        }
    }

    #[test]
    fn binomial_tail_examples() {
        // Exact integer oracle: 1+20+190+1140+4845+15504 = 21700.
        let expected = (21700f64).log2();
        assert!((binomial_tail_log(20, 0.25).unwrap() - expected).abs() < 1e-12);
        assert_eq!(binomial_tail_log(13, 0.0).unwrap(), 0.0);
        assert!((binomial_tail_log(13, 1.0).unwrap() - 13.0).abs() < 1e-12);
        assert!(binomial_tail_log(0, 0.5).is_err());
        assert!(binomial_tail_log(10, 1.5).is_err());
    }

    #[test]
    fn binomial_tail_h_bound() {
        for n in 1..=30u64 {
            for j in 1..=10 {
                let f = 0.05 * j as f64;
                let lhs = binomial_tail_log(n, f).unwrap();
                let rhs = n as f64 * binary_entropy(f).unwrap();
                assert!(lhs <= rhs + 1e-9, "n={n} f={f}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn binomial_tail_crossover_consistent_at_64() {
        // The exact-integer and log-domain routes must agree where they meet.
        for j in 0..=10 {
            let f = 0.1 * j as f64;
            let w_max = (64.0 * f).floor() as u64;
            let mut term: u128 = 1;
            let mut sum: u128 = 1;
            for w in 1..=w_max {
                term = term * (64 - w + 1) as u128 / w as u128;
                sum += term;
            }
            let exact = (sum as f64).log2();
            let mut ln_term = 0.0f64;
            let mut ln_sum = 0.0f64;
            for w in 1..=w_max {
                ln_term += ((64 - w + 1) as f64).ln() - (w as f64).ln();
                let hi = ln_sum.max(ln_term);
                ln_sum = hi + ((ln_sum - hi).exp() + (ln_term - hi).exp()).ln();
            }
            let logdomain = ln_sum / std::f64::consts::LN_2;
            assert!(
                (exact - logdomain).abs() < 1e-9,
                "f={f}: {exact} vs {logdomain}"
            );
            // And the public route (which uses the exact path at n=64).
            assert!((binomial_tail_log(64, f).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn serfling_frozen_value() {
        // √(2.0002e-4 · ln(1e10)); frozen from the independent evaluation.
        let d = serfling_delta(10_000, 10_000, 1e-10).unwrap();
        assert!((d - 0.067_864_797_229_540_81).abs() < 1e-12, "{d}");
    }

    #[test]
    fn serfling_limits_and_monotonicity() {
        // ε → 1 drives the correction to 0.
        assert!(serfling_delta(100, 100, 1.0 - 1e-12).unwrap() < 1e-5);
        // Decreasing in k at fixed n; k → ∞ approaches the √(ln(1/ε)/n) scale.
        let n = 10_000u64;
        let eps = 1e-6;
        let mut prev = f64::INFINITY;
        for k in [10u64, 100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000] {
            let d = serfling_delta(n, k, eps).unwrap();
            assert!(d < prev, "not decreasing at k={k}");
            prev = d;
        }
        let limit = ((1.0f64 / eps).ln() / n as f64).sqrt();
        let far = serfling_delta(n, 100_000_000, eps).unwrap();
        assert!((far - limit).abs() / limit < 0.01, "{far} vs {limit}");
        // Increasing as eps shrinks.
        assert!(
            serfling_delta(n, n, 1e-12).unwrap() > serfling_delta(n, n, 1e-6).unwrap()
        );
        assert!(serfling_delta(0, 1, 0.5).is_err());
        assert!(serfling_delta(1, 1, 0.0).is_err());
    }

    #[test]
    fn serfling_diqkd_frozen_value_and_monotonicity() {
        let d = serfling_delta_diqkd(1_000_000, 1_000_000, 1e-10).unwrap();
        assert!((d - 3.393_070_636_341_306e-3).abs() < 1e-14, "{d}");
        assert!(serfling_delta_diqkd(100, 100, 1.0 - 1e-12).unwrap() < 1e-5);
        // Doubling k at fixed n strictly decreases the value.
        let n = 50_000u64;
        let mut k = 16u64;
        let mut prev = serfling_delta_diqkd(n, k, 1e-8).unwrap();
        for _ in 0..12 {
            k *= 2;
            let d = serfling_delta_diqkd(n, k, 1e-8).unwrap();
            assert!(d < prev, "not strictly decreasing at k={k}");
            prev = d;
        }
    }

    #[test]
    fn chsh_penalty_frozen_value_and_monotonicity() {
        let mu = chsh_statistical_penalty(1_000_000, 1e-10).unwrap();
        assert!((mu - 6.916_896_799_078_975e-3).abs() < 1e-14, "{mu}");
        // Larger k strictly decreases the penalty.
        let mut prev = f64::INFINITY;
        for k in [100u64, 1_000, 10_000, 100_000] {
            let m = chsh_statistical_penalty(k, 1e-8).unwrap();
            assert!(m < prev);
            prev = m;
        }
        // The formula's zero sits at ln-argument 1 (ε_t = √6), outside the
        // (0,1) domain, so the penalty is strictly positive everywhere here.
        assert!(chsh_statistical_penalty(10, 0.999_999).unwrap() > 0.0);
        assert!(chsh_statistical_penalty(10, 1.0).is_err());
    }

    #[test]
    fn ch_composition_examples() {
        assert!((ch_composition_failure(0.0, 0.0, 1).unwrap() - 6.0).abs() < 1e-15);
        let p = ch_composition_failure(0.01, 0.01, 100_000).unwrap();
        let expected = 2.0 * (-20.0f64).exp() + 4.0 * (-10.0f64).exp();
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 1.816e-4).abs() < 1e-7, "{p}");
        // Large exponents drive the failure to ~0.
        assert!(ch_composition_failure(0.05, 0.05, 100_000_000).unwrap() < 1e-100);
        assert!(ch_composition_failure(-0.1, 0.0, 1).is_err());
    }

    #[test]
    fn secrecy_delta_algebraic_anchors() {
        let eps: f64 = 1e-9;
        let hmin: f64 = 1000.0;
        // ℓ = H − 2log₂(1/(2ε)): hash term = ε, so Δ = 3ε exactly.
        let ell = (hmin - 2.0 * (1.0 / (2.0 * eps)).log2()).floor() as u64;
        let exact_h = ell as f64 + 2.0 * (1.0 / (2.0 * eps)).log2();
        let d = secrecy_delta(ell, exact_h, eps);
        assert!((d - 3.0 * eps).abs() < 1e-18, "{d}");
        // ℓ = H − 2log₂(1/(4ε)): hash term = 2ε, so Δ = 4ε = ε_sec.
        let exact_h2 = ell as f64 + 2.0 * (1.0 / (4.0 * eps)).log2();
        let d2 = secrecy_delta(ell, exact_h2, eps);
        assert!((d2 - 4.0 * eps).abs() < 1e-18, "{d2}");
        // ℓ = 0 with huge H_min: hash term vanishes.
        assert!((secrecy_delta(0, 10_000.0, eps) - 2.0 * eps).abs() < 1e-18);
        // Monotone growth in ℓ past H_min.
        let mut prev = 0.0;
        for ell in [1000u64, 1010, 1020, 1040] {
            let d = secrecy_delta(ell, 1000.0, eps);
            assert!(d > prev);
            prev = d;
        }
        assert!(secrecy_delta(1040, 1000.0, eps) > 0.5);
    }

    #[test]
    fn failure_budget_construction() {
        let b = FailureBudget::qkd(2.5e-10, 1e-15).unwrap();
        assert_eq!(b.eps_sec, 4.0 * b.eps_smooth);
        assert!((b.eps_sec - 1e-9).abs() < 1e-18);
        let d = FailureBudget::diqkd(1e-10, 1e-10, 1e-15).unwrap();
        assert!((d.eps_smooth - 2e-10).abs() < 1e-18);
        assert!((d.eps_sec - 8e-10).abs() < 1e-18);
        let q = FailureBudget::qrng(1e-10).unwrap();
        assert!((q.eps_smooth - 2.5e-11).abs() < 1e-18);
        // eps_sec = 4ε must stay below 1.
        assert!(FailureBudget::qkd(0.3, 1e-15).is_err());
        assert!(FailureBudget::qkd(0.0, 1e-15).is_err());
    }

    #[test]
    fn concentration_strategy_delegates() {
        let c = Concentration::default();
        assert_eq!(
            c.key_delta(100, 50, 1e-6).unwrap(),
            serfling_delta(100, 50, 1e-6).unwrap()
        );
        assert_eq!(
            c.chsh_delta(100, 50, 1e-6).unwrap(),
            serfling_delta_diqkd(100, 50, 1e-6).unwrap()
        );
    }
}
