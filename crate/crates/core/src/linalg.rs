//! Dense complex matrices, density matrices, and the local kernels used to
//! evolve multi-qubit density matrices gate by gate.
//!
//! Basis indices are big-endian: qubit `q` of an `n`-qubit register is the
//! bit `1 << (n - 1 - q)`.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numerical tolerances used when validating states and operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum entrywise deviation `|A - A^dagger|`.
    pub hermitian: f64,
    /// Maximum deviation of the trace from one.
    pub trace: f64,
    /// Most negative eigenvalue accepted as positive semidefinite.
    pub psd: f64,
    /// Maximum entrywise deviation `|U U^dagger - I|`.
    pub unitary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { hermitian: 1e-10, trace: 1e-10, psd: 1e-10, unitary: 1e-10 }
    }
}

/// Bit mask of qubit `q` in an `n`-qubit big-endian register.
#[inline]
pub fn qubit_mask(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::dims(format!("{rows}x{cols} matrix needs {} entries, got {}", rows * cols, data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Number of qubits if the matrix is square with a power-of-two side.
    pub fn qubit_count(&self) -> Option<usize> {
        (self.is_square() && self.rows.is_power_of_two()).then(|| self.rows.trailing_zeros() as usize)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

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
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::dims(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    /// Adds `s * rhs` into `self` in place. Shapes must match.
    pub fn add_scaled_assign(&mut self, rhs: &Self, s: Complex64) {
        debug_assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - rhs`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - self^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise modulus of `U U^dagger - I`.
    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        match self.matmul(&self.adjoint()) {
            Ok(p) => p.max_abs_diff(&Self::identity(self.rows)),
            Err(_) => f64::INFINITY,
        }
    }

    /// Distance to `rhs` after removing the best global phase, measured as
    /// the largest entrywise modulus.
    pub fn phase_insensitive_diff(&self, rhs: &Self) -> f64 {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return f64::INFINITY;
        }
        let overlap: Complex64 = self.data.iter().zip(&rhs.data).map(|(a, b)| a.conj() * b).sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a * phase - b).norm()).fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Standard single-qubit matrices.
pub mod gates {
    use super::*;

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
    }

    pub fn y() -> ComplexMatrix {
        let i = Complex64::new(0.0, 1.0);
        ComplexMatrix::from_vec(2, 2, vec![ZERO, -i, i, ZERO]).expect("2x2")
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_diag(&[1.0, -1.0])
    }

    pub fn h() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real(2, 2, &[s, s, s, -s]).expect("2x2")
    }

    /// Square root of X with the convention `SX = ((1+i) I + (1-i) X) / 2`.
    pub fn sx() -> ComplexMatrix {
        let a = Complex64::new(0.5, 0.5);
        let b = Complex64::new(0.5, -0.5);
        ComplexMatrix::from_vec(2, 2, vec![a, b, b, a]).expect("2x2")
    }

    /// `RZ(theta) = diag(e^{-i theta/2}, e^{i theta/2})`.
    pub fn rz(theta: f64) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::from_polar(1.0, -theta / 2.0);
        m[(1, 1)] = Complex64::from_polar(1.0, theta / 2.0);
        m
    }

    /// Two-qubit CNOT with the first tensor factor as control.
    pub fn cx() -> ComplexMatrix {
        ComplexMatrix::from_real(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
        .expect("4x4")
    }
}

/// A validated density matrix on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates `matrix` with the default tolerances.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let n_qubits = matrix
            .qubit_count()
            .ok_or_else(|| Error::dims(format!("{}x{} is not a qubit-space matrix", matrix.rows, matrix.cols)))?;
        let rho = Self { n_qubits, matrix };
        rho.validate(tol)?;
        Ok(rho)
    }

    /// Wraps a matrix that is known to be a state by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        let n_qubits = matrix.qubit_count().expect("qubit-space matrix");
        Self { n_qubits, matrix }
    }

    /// Diagonal state with the given basis probabilities.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diag(probs))
    }

    /// `|index><index|` on `n` qubits.
    pub fn basis_state(n: usize, index: usize) -> Self {
        let mut m = ComplexMatrix::zeros(1 << n, 1 << n);
        m[(index, index)] = ONE;
        Self { n_qubits: n, matrix: m }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        Self { n_qubits: n, matrix: ComplexMatrix::identity(d).scale(Complex64::new(1.0 / d as f64, 0.0)) }
    }

    /// Product of `n` identical diagonal qubits with ground population `p0`.
    pub fn product_diagonal(n: usize, p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::param(format!("ground population {p0} outside [0, 1]")));
        }
        let d = 1usize << n;
        let probs: Vec<f64> = (0..d)
            .map(|i| {
                let ones = i.count_ones() as i32;
                p0.powi(n as i32 - ones) * (1.0 - p0).powi(ones)
            })
            .collect();
        Self::from_probabilities(&probs)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Real parts of the diagonal, i.e. computational-basis probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// Probability that qubit `q` is found in `|0>`.
    pub fn ground_population(&self, q: usize) -> f64 {
        let mask = qubit_mask(self.n_qubits, q);
        self.probabilities().iter().enumerate().filter(|(i, _)| i & mask == 0).map(|(_, p)| p).sum()
    }

    /// Checks hermiticity, unit trace, and positivity.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let herm = self.matrix.hermiticity_error();
        if herm > tol.hermitian {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.matrix.trace();
        if (tr - ONE).norm() > tol.trace {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let (evals, _) = eig_unchecked(&self.matrix);
        if let Some(&min) = evals.first() {
            if min < -tol.psd {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(())
    }
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ai in 0..a.rows {
        for aj in 0..a.cols {
            let s = a[(ai, aj)];
            if s == ZERO {
                continue;
            }
            for bi in 0..b.rows {
                for bj in 0..b.cols {
                    out[(ai * b.rows + bi, aj * b.cols + bj)] = s * b[(bi, bj)];
                }
            }
        }
    }
    out
}

/// Reduces `rho` to the subsystems listed in `keep`, in ascending order.
///
/// `dims` gives the dimension of each subsystem, most significant first.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::dims(format!("subsystem dims multiply to {total}, state has dimension {}", rho.dim())));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::dims(format!("subsystem {bad} does not exist (have {})", dims.len())));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !kept.contains(s)).collect();

    // Stride of each subsystem in the full index.
    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let expand = |subs: &[usize], mut idx: usize| -> usize {
        let mut full = 0;
        for &s in subs.iter().rev() {
            full += (idx % dims[s]) * strides[s];
            idx /= dims[s];
        }
        full
    };

    let d_keep: usize = kept.iter().map(|&s| dims[s]).product();
    let d_trace: usize = traced.iter().map(|&s| dims[s]).product();
    let keep_offsets: Vec<usize> = (0..d_keep).map(|i| expand(&kept, i)).collect();
    let trace_offsets: Vec<usize> = (0..d_trace).map(|i| expand(&traced, i)).collect();

    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(d_keep, d_keep);
    for (i, &ki) in keep_offsets.iter().enumerate() {
        for (j, &kj) in keep_offsets.iter().enumerate() {
            out[(i, j)] = trace_offsets.iter().map(|&t| m[(ki + t, kj + t)]).sum();
        }
    }
    Ok(DensityMatrix::from_trusted(out))
}

fn eig_unchecked(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(a.to_nalgebra());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, ComplexMatrix::from_nalgebra(&vectors))
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order; column `k` of the returned
/// matrix is the eigenvector of eigenvalue `k`.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let herm = a.hermiticity_error();
    if herm > Tolerances::default().hermitian {
        return Err(Error::InvalidInput(format!("matrix is not Hermitian (deviation {herm:.3e})")));
    }
    Ok(eig_unchecked(a))
}

/// Applies `f` to the spectrum of a Hermitian matrix.
fn spectral_map(vectors: &ComplexMatrix, values: &[f64], f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let d = values.len();
    let mut scaled = vectors.clone();
    for j in 0..d {
        let s = f(values[j]);
        for i in 0..d {
            scaled[(i, j)] *= s;
        }
    }
    scaled.matmul(&vectors.adjoint()).expect("square")
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::dims(format!("fidelity between dimensions {} and {}", rho.dim(), sigma.dim())));
    }
    let tol = Tolerances::default();
    let (vals, vecs) = eig_unchecked(rho.matrix());
    let (sigma_vals, _) = eig_unchecked(sigma.matrix());
    for &min in [vals.first(), sigma_vals.first()].iter().flatten() {
        if *min < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
    }
    let sqrt_rho = spectral_map(&vecs, &vals, |x| x.max(0.0).sqrt());
    let inner = sqrt_rho.matmul(sigma.matrix())?.matmul(&sqrt_rho)?;
    // Symmetrize to remove rounding asymmetry before the Hermitian solver.
    let inner = inner.add(&inner.adjoint())?.scale(Complex64::new(0.5, 0.0));
    let (mu, _) = eig_unchecked(&inner);
    let root_sum: f64 = mu.iter().map(|&m| m.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// Trace distance `||rho - sigma||_1 / 2` between two equal-size matrices.
pub fn trace_distance(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let diff = rho.sub(sigma)?;
    let diff = diff.add(&diff.adjoint())?.scale(Complex64::new(0.5, 0.0));
    let (vals, _) = eig_unchecked(&diff);
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// `U rho U^dagger` for a unitary `u`.
pub fn apply_unitary(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix> {
    if u.rows() != rho.dim() || u.cols() != rho.dim() {
        return Err(Error::dims(format!("{}x{} operator on dimension {}", u.rows(), u.cols(), rho.dim())));
    }
    let err = u.unitarity_error();
    if err > Tolerances::default().unitary {
        return Err(Error::InvalidUnitary(err));
    }
    let out = u.matmul(rho.matrix())?.matmul(&u.adjoint())?;
    Ok(DensityMatrix::from_trusted(out))
}

/// In-place kernels acting on a subset of qubits of a `2^n x 2^n` matrix.
///
/// These avoid building full-space operators: a single-qubit gate costs
/// `O(d^2)` instead of `O(d^3)`.
pub mod local {
    use super::*;

    /// `M <- G M G^dagger` for a 2x2 `g` acting on qubit `q`.
    pub fn conjugate_1q(m: &mut ComplexMatrix, n: usize, q: usize, g: &ComplexMatrix) {
        let d = m.rows;
        let mask = qubit_mask(n, q);
        let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        let data = &mut m.data;
        for i in (0..d).filter(|i| i & mask == 0) {
            let (lo, hi) = (i * d, (i | mask) * d);
            for j in 0..d {
                let a = data[lo + j];
                let b = data[hi + j];
                data[lo + j] = g00 * a + g01 * b;
                data[hi + j] = g10 * a + g11 * b;
            }
        }
        let (c00, c01, c10, c11) = (g00.conj(), g01.conj(), g10.conj(), g11.conj());
        for row in data.chunks_exact_mut(d) {
            for j in (0..d).filter(|j| j & mask == 0) {
                let a = row[j];
                let b = row[j | mask];
                row[j] = a * c00 + b * c01;
                row[j | mask] = a * c10 + b * c11;
            }
        }
    }

    /// `M <- RZ(theta) M RZ(theta)^dagger` on qubit `q`.
    pub fn conjugate_rz(m: &mut ComplexMatrix, n: usize, q: usize, theta: f64) {
        let d = m.rows;
        let mask = qubit_mask(n, q);
        let up = Complex64::from_polar(1.0, theta);
        let down = up.conj();
        for (i, row) in m.data.chunks_exact_mut(d).enumerate() {
            let row_set = i & mask != 0;
            for (j, x) in row.iter_mut().enumerate() {
                match (row_set, j & mask != 0) {
                    (true, false) => *x *= up,
                    (false, true) => *x *= down,
                    _ => {}
                }
            }
        }
    }

    /// `M <- CX M CX` with the given control and target.
    pub fn conjugate_cx(m: &mut ComplexMatrix, n: usize, control: usize, target: usize) {
        let d = m.rows;
        let cm = qubit_mask(n, control);
        let tm = qubit_mask(n, target);
        let flipped = |i: usize| i & cm != 0 && i & tm == 0;
        for i in (0..d).filter(|&i| flipped(i)) {
            let (a, b) = (i * d, (i | tm) * d);
            for j in 0..d {
                m.data.swap(a + j, b + j);
            }
        }
        for row in m.data.chunks_exact_mut(d) {
            for j in (0..d).filter(|&j| flipped(j)) {
                row.swap(j, j | tm);
            }
        }
    }

    /// Full-space index with the bits of qubits `a` and `b` replaced by the
    /// two-bit local index `l` (bit of `a` is the high bit).
    #[inline]
    fn with_local(base: usize, ma: usize, mb: usize, l: usize) -> usize {
        let mut i = base & !(ma | mb);
        if l & 2 != 0 {
            i |= ma;
        }
        if l & 1 != 0 {
            i |= mb;
        }
        i
    }

    #[inline]
    fn local_of(i: usize, ma: usize, mb: usize) -> usize {
        (usize::from(i & ma != 0) << 1) | usize::from(i & mb != 0)
    }

    /// A 4x4 operator with exactly one nonzero entry per row.
    #[derive(Debug, Clone, Copy)]
    pub struct Monomial {
        /// Source column of each row.
        pub source: [usize; 4],
        /// Value of the nonzero entry of each row.
        pub coeff: [Complex64; 4],
    }

    impl Monomial {
        pub fn from_matrix(k: &ComplexMatrix) -> Option<Self> {
            let mut source = [0; 4];
            let mut coeff = [ZERO; 4];
            for r in 0..4 {
                let nz: Vec<usize> = (0..4).filter(|&c| k[(r, c)] != ZERO).collect();
                match nz.as_slice() {
                    [c] => {
                        source[r] = *c;
                        coeff[r] = k[(r, *c)];
                    }
                    [] => coeff[r] = ZERO,
                    _ => return None,
                }
            }
            Some(Self { source, coeff })
        }
    }

    /// `out += K M K^dagger` for a monomial two-qubit `K` on qubits `(a, b)`.
    pub fn accumulate_monomial(out: &mut ComplexMatrix, m: &ComplexMatrix, n: usize, a: usize, b: usize, k: &Monomial) {
        let d = m.rows;
        let (ma, mb) = (qubit_mask(n, a), qubit_mask(n, b));
        let col_map: Vec<(usize, Complex64)> = (0..d)
            .map(|j| {
                let l = local_of(j, ma, mb);
                (with_local(j, ma, mb, k.source[l]), k.coeff[l].conj())
            })
            .collect();
        for i in 0..d {
            let l = local_of(i, ma, mb);
            let ci = k.coeff[l];
            if ci == ZERO {
                continue;
            }
            let src_row = with_local(i, ma, mb, k.source[l]) * d;
            let out_row = &mut out.data[i * d..(i + 1) * d];
            for (o, &(sj, cj)) in out_row.iter_mut().zip(&col_map) {
                *o += ci * m.data[src_row + sj] * cj;
            }
        }
    }

    /// `out += K M K^dagger` for a general 4x4 `K` on qubits `(a, b)`.
    pub fn accumulate_general(
        out: &mut ComplexMatrix,
        m: &ComplexMatrix,
        n: usize,
        a: usize,
        b: usize,
        k: &ComplexMatrix,
    ) {
        let d = m.rows;
        let (ma, mb) = (qubit_mask(n, a), qubit_mask(n, b));
        let mut left = m.clone();
        for base in (0..d).filter(|i| i & (ma | mb) == 0) {
            let idx: [usize; 4] = std::array::from_fn(|l| with_local(base, ma, mb, l));
            for j in 0..d {
                let v: [Complex64; 4] = std::array::from_fn(|l| m.data[idx[l] * d + j]);
                for r in 0..4 {
                    left.data[idx[r] * d + j] = (0..4).map(|c| k[(r, c)] * v[c]).sum();
                }
            }
        }
        for i in 0..d {
            let row = &left.data[i * d..(i + 1) * d];
            let out_row = &mut out.data[i * d..(i + 1) * d];
            for base in (0..d).filter(|j| j & (ma | mb) == 0) {
                let idx: [usize; 4] = std::array::from_fn(|l| with_local(base, ma, mb, l));
                let v: [Complex64; 4] = std::array::from_fn(|l| row[idx[l]]);
                for r in 0..4 {
                    out_row[idx[r]] += (0..4).map(|c| v[c] * k[(r, c)].conj()).sum::<Complex64>();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_x_identity_swaps_blocks() {
        let k = kron(&gates::x(), &ComplexMatrix::identity(2));
        for i in 0..4 {
            assert_eq!(k[(i, i ^ 2)], c(1.0));
        }
        assert_abs_diff_eq!(k.frobenius_norm(), 2.0);
    }

    #[test]
    fn kron_of_diagonals() {
        let k = kron(&ComplexMatrix::from_diag(&[2.0, 3.0]), &ComplexMatrix::from_diag(&[5.0, 7.0]));
        assert_eq!(k, ComplexMatrix::from_diag(&[10.0, 14.0, 15.0, 21.0]));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = ComplexMatrix::from_diag(&[0.7, 0.3]);
        let mut b = ComplexMatrix::from_diag(&[0.4, 0.6]);
        b[(0, 1)] = Complex64::new(0.1, 0.2);
        b[(1, 0)] = Complex64::new(0.1, -0.2);
        let rho = DensityMatrix::new(kron(&a, &b)).unwrap();
        let ra = partial_trace(&rho, &[0], &[2, 2]).unwrap();
        let rb = partial_trace(&rho, &[1], &[2, 2]).unwrap();
        assert!(ra.matrix().max_abs_diff(&a) < 1e-14);
        assert!(rb.matrix().max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn partial_trace_of_maximally_mixed() {
        let r = partial_trace(&DensityMatrix::maximally_mixed(2), &[0], &[2, 2]).unwrap();
        assert!(r.matrix().max_abs_diff(&ComplexMatrix::from_diag(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let mut m = ComplexMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = c(0.5);
        }
        let bell = DensityMatrix::new(m).unwrap();
        let r = partial_trace(&bell, &[0], &[2, 2]).unwrap();
        // Direct sum over the second index: rho_A[a][a'] = sum_b rho[2a+b][2a'+b].
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.matrix()[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(partial_trace(&rho, &[0], &[2, 3]), Err(Error::InvalidDims(_))));
        assert!(matches!(partial_trace(&rho, &[2], &[2, 2]), Err(Error::InvalidDims(_))));
    }

    #[test]
    fn partial_trace_keeps_middle_qubit() {
        let a = ComplexMatrix::from_diag(&[0.9, 0.1]);
        let b = ComplexMatrix::from_diag(&[0.6, 0.4]);
        let cc = ComplexMatrix::from_diag(&[0.2, 0.8]);
        let rho = DensityMatrix::new(kron(&kron(&a, &b), &cc)).unwrap();
        let r = partial_trace(&rho, &[1], &[2, 2, 2]).unwrap();
        assert!(r.matrix().max_abs_diff(&b) < 1e-15);
        let r02 = partial_trace(&rho, &[0, 2], &[2, 2, 2]).unwrap();
        assert!(r02.matrix().max_abs_diff(&kron(&a, &cc)) < 1e-15);
    }

    #[test]
    fn fidelity_of_identical_states_is_one() {
        let rho = DensityMatrix::product_diagonal(2, 0.8).unwrap();
        assert_abs_diff_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_of_orthogonal_states_is_zero() {
        let f = fidelity(&DensityMatrix::basis_state(1, 0), &DensityMatrix::basis_state(1, 1)).unwrap();
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_of_commuting_states() {
        let rho = DensityMatrix::from_probabilities(&[0.8, 0.2]).unwrap();
        let sigma = DensityMatrix::from_probabilities(&[0.5, 0.5]).unwrap();
        let expected = (0.4f64.sqrt() + 0.1f64.sqrt()).powi(2);
        assert_abs_diff_eq!(fidelity(&rho, &sigma).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_rejects_non_psd_input() {
        let bad = DensityMatrix::from_trusted(ComplexMatrix::from_diag(&[1.5, -0.5]));
        let good = DensityMatrix::maximally_mixed(1);
        assert!(matches!(fidelity(&bad, &good), Err(Error::InvalidState(_))));
    }

    #[test]
    fn apply_unitary_basics() {
        let rho = DensityMatrix::product_diagonal(1, 0.85).unwrap();
        let same = apply_unitary(&rho, &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(same, rho);
        let flipped = apply_unitary(&DensityMatrix::basis_state(1, 0), &gates::x()).unwrap();
        assert_eq!(flipped, DensityMatrix::basis_state(1, 1));
        let swapped = apply_unitary(&rho, &gates::x()).unwrap();
        assert_abs_diff_eq!(swapped.probabilities()[0], 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(swapped.probabilities()[1], 0.85, epsilon = 1e-15);
    }

    #[test]
    fn apply_unitary_rejects_non_unitary() {
        let rho = DensityMatrix::maximally_mixed(1);
        let m = ComplexMatrix::from_diag(&[1.0, 2.0]);
        assert!(matches!(apply_unitary(&rho, &m), Err(Error::InvalidUnitary(_))));
    }

    #[test]
    fn eig_of_identity_and_pauli_x() {
        let (vals, _) = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0]);
        let (vals, vecs) = hermitian_eig(&gates::x()).unwrap();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(vecs[(0, 1)].norm(), s, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs[(1, 1)].norm(), s, epsilon = 1e-14);
        assert_abs_diff_eq!((vecs[(0, 0)] + vecs[(1, 0)]).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_sorts_diagonal_spectrum() {
        let (vals, vecs) = hermitian_eig(&ComplexMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(vecs[(1, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs[(2, 1)].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs[(0, 2)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::from_probabilities(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::from_probabilities(&[1.2, -0.2]).is_err());
        let mut m = ComplexMatrix::from_diag(&[0.5, 0.5]);
        m[(0, 1)] = c(0.1);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn phase_insensitive_comparison() {
        let u = gates::h();
        let v = u.scale(Complex64::from_polar(1.0, 0.7));
        assert!(u.max_abs_diff(&v) > 0.1);
        assert!(u.phase_insensitive_diff(&v) < 1e-15);
    }

    fn random_state(n: usize, seed: u64) -> DensityMatrix {
        let d = 1 << n;
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = ComplexMatrix::from_vec(d, d, (0..d * d).map(|_| Complex64::new(next(), next())).collect()).unwrap();
        let p = a.matmul(&a.adjoint()).unwrap();
        let tr = p.trace();
        DensityMatrix::new(p.scale(tr.inv())).unwrap()
    }

    fn embed_1q(n: usize, q: usize, g: &ComplexMatrix) -> ComplexMatrix {
        let id = ComplexMatrix::identity(2);
        let mut u = ComplexMatrix::identity(1);
        for k in 0..n {
            u = kron(&u, if k == q { g } else { &id });
        }
        u
    }

    #[test]
    fn local_single_qubit_kernels_match_dense() {
        let n = 3;
        let rho = random_state(n, 7);
        for q in 0..n {
            for g in [gates::sx(), gates::h(), gates::y(), gates::rz(0.37)] {
                let dense = apply_unitary(&rho, &embed_1q(n, q, &g)).unwrap();
                let mut m = rho.matrix().clone();
                local::conjugate_1q(&mut m, n, q, &g);
                assert!(m.max_abs_diff(dense.matrix()) < 1e-14);
            }
            let dense = apply_unitary(&rho, &embed_1q(n, q, &gates::rz(-1.1))).unwrap();
            let mut m = rho.matrix().clone();
            local::conjugate_rz(&mut m, n, q, -1.1);
            assert!(m.max_abs_diff(dense.matrix()) < 1e-14);
        }
    }

    #[test]
    fn local_cx_and_two_qubit_kernels_match_dense() {
        let n = 3;
        let rho = random_state(n, 11);
        for (a, b) in [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
            // Dense CX built from projectors on the control.
            let p0 = ComplexMatrix::from_diag(&[1.0, 0.0]);
            let p1 = ComplexMatrix::from_diag(&[0.0, 1.0]);
            let term = |ctrl: &ComplexMatrix, tgt: &ComplexMatrix| {
                let mut u = ComplexMatrix::identity(1);
                for k in 0..n {
                    let f = if k == a {
                        ctrl.clone()
                    } else if k == b {
                        tgt.clone()
                    } else {
                        ComplexMatrix::identity(2)
                    };
                    u = kron(&u, &f);
                }
                u
            };
            let cx = term(&p0, &ComplexMatrix::identity(2)).add(&term(&p1, &gates::x())).unwrap();
            let dense = apply_unitary(&rho, &cx).unwrap();
            let mut m = rho.matrix().clone();
            local::conjugate_cx(&mut m, n, a, b);
            assert!(m.max_abs_diff(dense.matrix()) < 1e-15);

            let mono = local::Monomial::from_matrix(&gates::cx()).unwrap();
            let mut out = ComplexMatrix::zeros(8, 8);
            local::accumulate_monomial(&mut out, rho.matrix(), n, a, b, &mono);
            assert!(out.max_abs_diff(dense.matrix()) < 1e-15);

            let mut out = ComplexMatrix::zeros(8, 8);
            local::accumulate_general(&mut out, rho.matrix(), n, a, b, &gates::cx());
            assert!(out.max_abs_diff(dense.matrix()) < 1e-14);
        }
    }

    #[test]
    fn monomial_detection() {
        assert!(local::Monomial::from_matrix(&gates::cx()).is_some());
        assert!(local::Monomial::from_matrix(&kron(&gates::h(), &gates::x())).is_none());
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let a = DensityMatrix::basis_state(1, 0);
        let b = DensityMatrix::basis_state(1, 1);
        assert_abs_diff_eq!(trace_distance(a.matrix(), b.matrix()).unwrap(), 1.0, epsilon = 1e-14);
    }
}
