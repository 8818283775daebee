//! Dense complex matrices and the thin QR decomposition used to turn the
//! detection metric `‖y − H s‖²` into the triangular form `‖y′ − R s‖²`.
//!
//! The factorization is computed with Householder reflections and then
//! re-phased so that every diagonal entry of `R` is real and strictly positive,
//! which makes the thin QR unique.

use num_complex::Complex64;

use crate::{Error, Result};

/// Absolute tolerance on `|r_kk|` below which the input is treated as singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(
            rows,
            cols,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Thin QR factors `H = Q R` plus the rotated receive vector `y′ = Qᴴ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    /// `M_R × M_T`, orthonormal columns.
    pub q: ComplexMatrix,
    /// `M_T × M_T`, upper triangular with real positive diagonal.
    pub r: ComplexMatrix,
    /// Empty until [`QrFactors::with_rotated`] is called.
    pub y_rot: Vec<Complex64>,
}

impl QrFactors {
    /// Number of transmit streams (tree depth).
    pub fn streams(&self) -> usize {
        self.r.rows()
    }

    /// Attaches `Qᴴ y` to the factors.
    pub fn with_rotated(mut self, y: &[Complex64]) -> Result<Self> {
        self.y_rot = rotate_receive(&self, y)?;
        Ok(self)
    }
}

/// Thin QR decomposition with a real, strictly positive diagonal in `R`.
pub fn qr_decompose(h: &ComplexMatrix) -> Result<QrFactors> {
    let (m, n) = (h.rows(), h.cols());
    if m < n {
        return Err(Error::InvalidInput(format!(
            "QR needs rows >= cols, got {m}x{n}"
        )));
    }

    let mut a = h.clone();
    let mut reflectors: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(n);

    for k in 0..n {
        let norm_x = (k..m).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0 = a[(k, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm_x;

        // v = x − alpha·e1, normalized to unit length
        let mut v: Vec<Complex64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if v_norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        for z in v.iter_mut() {
            *z /= v_norm;
        }

        // A[k.., k..] ← (I − 2 v vᴴ) A[k.., k..]
        for j in k..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(idx, vi)| vi.conj() * a[(k + idx, j)])
                .sum();
            for (idx, vi) in v.iter().enumerate() {
                a[(k + idx, j)] -= 2.0 * vi * dot;
            }
        }
        reflectors.push(Some(v));
    }

    // Q = H_0 H_1 … H_{n−1} applied to the first n columns of the identity.
    let mut q = ComplexMatrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = Complex64::new(1.0, 0.0);
    }
    for (k, refl) in reflectors.iter().enumerate().rev() {
        let Some(v) = refl else { continue };
        for j in 0..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(idx, vi)| vi.conj() * q[(k + idx, j)])
                .sum();
            for (idx, vi) in v.iter().enumerate() {
                q[(k + idx, j)] -= 2.0 * vi * dot;
            }
        }
    }

    let mut r = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = a[(i, j)];
        }
    }

    // Phase correction: R ← D* R, Q ← Q D with D = diag(r_kk / |r_kk|).
    for k in 0..n {
        let rkk = r[(k, k)];
        let mag = rkk.norm();
        if mag < RANK_TOLERANCE {
            return Err(Error::SingularMatrix {
                index: k,
                magnitude: mag,
            });
        }
        let d = rkk / mag;
        for j in k..n {
            r[(k, j)] *= d.conj();
        }
        r[(k, k)] = Complex64::new(mag, 0.0);
        for i in 0..m {
            q[(i, k)] *= d;
        }
    }

    Ok(QrFactors {
        q,
        r,
        y_rot: Vec::new(),
    })
}

/// Returns `Qᴴ y`.
pub fn rotate_receive(factors: &QrFactors, y: &[Complex64]) -> Result<Vec<Complex64>> {
    let q = &factors.q;
    if y.len() != q.rows() {
        return Err(Error::DimensionMismatch {
            expected: q.rows(),
            actual: y.len(),
        });
    }
    Ok((0..q.cols())
        .map(|j| (0..q.rows()).map(|i| q[(i, j)].conj() * y[i]).sum())
        .collect())
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
