//! Dense complex linear algebra at small dimension.
//!
//! Matrices are stored row-major in a flat `Vec<Complex64>` with entry
//! `(r, c)` at index `r * dim + c`. Dimensions in this crate stay small
//! (≤ ~256), so the Hermitian eigensolver is a cyclic Jacobi iteration:
//! slow asymptotically but simple, robust, and deterministic, which is what
//! the certification code built on top of it needs.

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for accepting a matrix as Hermitian (max |A − A†| entry).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most-negative eigenvalue a density matrix may carry before rejection.
pub const EIG_NEG_TOL: f64 = 1e-9;
/// Tolerance on |Tr ρ − 1| for density matrices.
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("data length {len} does not form a square matrix of dimension {dim}")]
    NotSquare { dim: usize, len: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is not Hermitian: max |A − A†| entry = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("Jacobi eigensolver exhausted its budget of {budget} rotations at dimension {dim}")]
    NoConvergence { dim: usize, budget: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("matrix is not positive semidefinite: min eigenvalue = {min_eig:.3e}")]
    NotPsd { min_eig: f64 },
    #[error("trace must be 1 within {TRACE_TOL:e}, got {trace:.12}")]
    InvalidTrace { trace: f64 },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, MatrixError>;

// ----- Vector helpers -----

/// Inner product ⟨a|b⟩ (conjugate-linear in the first argument).
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm ‖v‖.
pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

// ----- ComplexMatrix -----

/// Dense square complex matrix in row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        ComplexMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from row-major data; validates shape and finiteness.
    pub fn from_data(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(MatrixError::NotSquare {
                dim,
                len: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MatrixError::NonFinite);
        }
        Ok(ComplexMatrix { dim, data })
    }

    /// Rank-one projector |v⟩⟨v| (not normalized; use a unit vector for a projector).
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.set(r, c, v[r] * v[c].conj());
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    /// Conjugate transpose A†.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// Matrix product A·B.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(MatrixError::DimMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let cur = out.get(r, c);
                    out.set(r, c, cur + a * rhs.get(k, c));
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(MatrixError::DimMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexMatrix {
            dim: self.dim,
            data,
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(MatrixError::DimMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ComplexMatrix {
            dim: self.dim,
            data,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Kronecker product A ⊗ B.
    pub fn kron(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let m = rhs.dim;
        let mut out = Self::zeros(n * m);
        for ar in 0..n {
            for ac in 0..n {
                let a = self.get(ar, ac);
                for br in 0..m {
                    for bc in 0..m {
                        out.set(ar * m + br, ac * m + bc, a * rhs.get(br, bc));
                    }
                }
            }
        }
        out
    }

    /// Matrix-vector product A|v⟩.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// Max |A − A†| entry: 0 for exactly Hermitian matrices.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..self.dim {
            dev = dev.max(self.get(r, r).im.abs());
            for c in (r + 1)..self.dim {
                dev = dev.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        dev
    }

    /// Largest entry magnitude.
    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

// ----- Eigendecomposition -----

/// Result of [`eig_hermitian`]: `values` ascending, `vectors` holding the
/// matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigDecomposition {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.dim()).map(|r| self.vectors.get(r, k)).collect()
    }

    /// Rebuild VΛV† — used by tests to bound the reconstruction error.
    pub fn reassemble(&self) -> ComplexMatrix {
        let dim = self.vectors.dim();
        let mut out = ComplexMatrix::zeros(dim);
        for k in 0..dim {
            let lam = self.values[k];
            if lam == 0.0 {
                continue;
            }
            for r in 0..dim {
                for c in 0..dim {
                    let cur = out.get(r, c);
                    out.set(
                        r,
                        c,
                        cur + self.vectors.get(r, k) * self.vectors.get(c, k).conj() * lam,
                    );
                }
            }
        }
        out
    }

    /// Apply a real function to the spectrum and reassemble Σ f(λ_k)|v_k⟩⟨v_k|.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mapped = EigDecomposition {
            values: self.values.iter().map(|&x| f(x)).collect(),
            vectors: self.vectors.clone(),
        };
        mapped.reassemble()
    }
}

/// Hermitian eigendecomposition by cyclic Jacobi with complex Givens
/// rotations. Eigenvalues are returned ascending; exact eigenvalue ties are
/// broken by the first differing eigenvector component, compared
/// lexicographically on (real, imaginary), so identical inputs always produce
/// identical outputs.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<EigDecomposition> {
    let deviation = m.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(MatrixError::NotHermitian { deviation });
    }
    let dim = m.dim();

    // Work on an exactly Hermitian copy so rounding in the input cannot leak
    // imaginary parts into the eigenvalues.
    let mut a = ComplexMatrix::zeros(dim);
    for r in 0..dim {
        a.set(r, r, Complex64::new(m.get(r, r).re, 0.0));
        for c in (r + 1)..dim {
            let avg = (m.get(r, c) + m.get(c, r).conj()) * 0.5;
            a.set(r, c, avg);
            a.set(c, r, avg.conj());
        }
    }
    let mut v = ComplexMatrix::identity(dim);

    let budget = dim * dim * 100;
    let mut rotations = 0usize;
    let stop = (a.frobenius_norm() * 1e-14).max(f64::MIN_POSITIVE);
    let skip = stop / ((dim * dim) as f64);

    loop {
        let mut off = 0.0f64;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag <= skip {
                    continue;
                }
                rotations += 1;
                if rotations > budget {
                    return Err(MatrixError::NoConvergence { dim, budget });
                }
                // Phase that makes the (p,q) entry real, then a standard
                // symmetric Schur rotation on the resulting 2×2 block.
                let phi = apq / mag;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Combined rotation J = diag(1, conj(phi)) · [[c, s], [−s, c]]
                // restricted to the (p,q) plane.
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = -s * phi.conj();
                let jqq = c * phi.conj();
                // A ← J† A J: columns first, then rows.
                for k in 0..dim {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * jpp + akq * jqp);
                    a.set(k, q, akp * jpq + akq * jqq);
                }
                for k in 0..dim {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, jpp.conj() * apk + jqp.conj() * aqk);
                    a.set(q, k, jpq.conj() * apk + jqq.conj() * aqk);
                }
                // Clean the block: the rotation annihilates (p,q) exactly.
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
                a.set(p, p, Complex64::new(a.get(p, p).re, 0.0));
                a.set(q, q, Complex64::new(a.get(q, q).re, 0.0));
                // V ← V J.
                for k in 0..dim {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * jpp + vkq * jqp);
                    v.set(k, q, vkp * jpq + vkq * jqq);
                }
            }
        }
    }

    // Ascending eigenvalue order with a deterministic tie-break.
    let mut order: Vec<usize> = (0..dim).collect();
    let column = |k: usize| -> Vec<Complex64> { (0..dim).map(|r| v.get(r, k)).collect() };
    order.sort_by(|&i, &j| {
        let li = a.get(i, i).re;
        let lj = a.get(j, j).re;
        li.total_cmp(&lj).then_with(|| {
            let ci = column(i);
            let cj = column(j);
            for (zi, zj) in ci.iter().zip(&cj) {
                let ord = zi.re.total_cmp(&zj.re).then(zi.im.total_cmp(&zj.im));
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    let values: Vec<f64> = order.iter().map(|&k| a.get(k, k).re).collect();
    let mut vectors = ComplexMatrix::zeros(dim);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..dim {
            vectors.set(r, new_col, v.get(r, old_col));
        }
    }
    Ok(EigDecomposition { values, vectors })
}

/// Trace norm ‖A‖₁ = Σ|λ_k| of a Hermitian matrix.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    let eig = eig_hermitian(m)?;
    Ok(eig.values.iter().map(|x| x.abs()).sum())
}

/// True iff the Hermitian matrix has min eigenvalue ≥ −tol.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    let eig = eig_hermitian(m)?;
    Ok(eig.values[0] >= -tol)
}

// ----- DensityMatrix -----

/// Validated quantum state: Hermitian within 1e-10, eigenvalues ≥ −1e-9
/// (tiny negatives from noisy arithmetic are clamped to zero and the spectrum
/// renormalized), trace within 1e-9 of 1.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validate and adopt a matrix as a quantum state.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let deviation = mat.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(MatrixError::NotHermitian { deviation });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL {
            return Err(MatrixError::InvalidTrace { trace: tr.re });
        }
        let eig = eig_hermitian(&mat)?;
        let min_eig = eig.values[0];
        if min_eig < -EIG_NEG_TOL {
            return Err(MatrixError::NotPsd { min_eig });
        }
        if min_eig < 0.0 {
            // Clamp the harmless negatives and renormalize the spectrum.
            let clamped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = clamped.iter().sum();
            let fixed = EigDecomposition {
                values: clamped.iter().map(|&x| x / total).collect(),
                vectors: eig.vectors,
            };
            return Ok(DensityMatrix {
                mat: fixed.reassemble(),
            });
        }
        Ok(DensityMatrix { mat })
    }

    /// Pure state |v⟩⟨v| from a (not necessarily normalized) vector.
    pub fn pure(v: &[Complex64]) -> Result<Self> {
        let norm = vec_norm(v);
        if norm == 0.0 {
            return Err(MatrixError::ZeroVector);
        }
        let unit: Vec<Complex64> = v.iter().map(|z| z / norm).collect();
        Ok(DensityMatrix {
            mat: ComplexMatrix::outer(&unit),
        })
    }

    /// Maximally mixed state I/dim.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            mat: ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }
}

/// Uhlmann fidelity F(a,b) = Tr √(√a · b · √a), clamped into [0, 1].
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(MatrixError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let sqrt_a = eig_hermitian(a.mat())?.map_spectrum(|x| x.max(0.0).sqrt());
    let inner = sqrt_a.mul(b.mat())?.mul(&sqrt_a)?;
    let eig = eig_hermitian(&inner)?;
    // √(√a b √a) amplifies rounding noise near zero (d√λ/dλ → ∞), so drop
    // eigenvalues that are zero up to a relative cutoff before the sum.
    let lam_max = eig.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cutoff = lam_max * 1e-12;
    let f: f64 = eig
        .values
        .iter()
        .filter(|&&x| x > cutoff)
        .map(|&x| x.sqrt())
        .sum();
    Ok(f.clamp(0.0, 1.0))
}
