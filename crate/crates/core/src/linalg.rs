//! Dense complex linear algebra for small bipartite Hilbert spaces.
//!
//! Joint indices of a product space `S ⊗ M` are laid out S-major:
//! the pair `(i, λ)` maps to `i·d_M + λ`. Every routine in the crate that
//! builds or splits a product operator uses this layout.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = Complex64;

/// Row/column-indexed dense complex matrix.
///
/// Equality between matrices is always tolerance based; see
/// [`ComplexMatrix::approx_eq`].
#[derive(Clone)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[C64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { context: "row-major matrix data", expected: rows * cols, found: data.len() });
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, data)))
    }

    /// Builds a matrix from a list of rows, which must be non-empty and
    /// rectangular.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::invalid("matrix must have at least one entry"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { context: "matrix row length", expected: cols, found: bad.len() });
        }
        Ok(Self::from_fn(rows.len(), cols, |r, c| rows[r][c]))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| if r == c { diag[r] } else { C64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| if r == c { C64::new(diag[r], 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        self.0.column(c).iter().copied().collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &ComplexMatrix) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// Frobenius distance; infinite when the shapes differ.
    pub fn frobenius_distance(&self, other: &ComplexMatrix) -> f64 {
        if self.0.shape() != other.0.shape() {
            return f64::INFINITY;
        }
        (&self.0 - &other.0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A − B‖_F ≤ tol · max(1, ‖A‖_F)`.
    pub fn approx_eq(&self, other: &ComplexMatrix, tol: f64) -> bool {
        self.frobenius_distance(other) <= tol * self.frobenius_norm().max(1.0)
    }

    /// `‖M − M†‖_F / max(1, ‖M‖_F)`; infinite for non-square input.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let d = (&self.0 - self.0.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        d / self.frobenius_norm().max(1.0)
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.0[(r, c)]);
            }
        }
        out
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            write!(f, "  ")?;
            for c in 0..self.cols() {
                let z = self.0[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

/// A square matrix equal to its adjoint within [`tol::HERMITICITY`].
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "Hermitian operator (columns)",
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        let defect = matrix.hermiticity_defect();
        if !(defect <= tol::HERMITICITY) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix that is Hermitian by construction (sums, real
    /// multiples and Kronecker products of Hermitian operators).
    pub(crate) fn from_hermitian_parts(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.hermiticity_defect() <= tol::HERMITICITY);
        Self { matrix }
    }

    pub fn zero(n: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(n) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self { matrix: ComplexMatrix::from_real_diagonal(diag) }
    }

    pub fn pauli_x() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self { matrix: ComplexMatrix::from_fn(2, 2, |r, c| if r != c { l } else { o }) }
    }

    pub fn pauli_y() -> Self {
        let i = C64::new(0.0, 1.0);
        Self {
            matrix: ComplexMatrix::from_fn(2, 2, |r, c| match (r, c) {
                (0, 1) => -i,
                (1, 0) => i,
                _ => C64::new(0.0, 0.0),
            }),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale_real(s) }
    }

    /// Sum of two operators of equal dimension.
    pub fn plus(&self, other: &HermitianOperator) -> Result<Self> {
        check_dims("operator sum", self.dim(), other.dim())?;
        Ok(Self { matrix: &self.matrix + &other.matrix })
    }

    /// `self ⊗ other`.
    pub fn kron(&self, other: &HermitianOperator) -> Self {
        Self { matrix: tensor(&self.matrix, &other.matrix) }
    }
}

/// Tolerances a [`DensityOperator`] is validated against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
}

impl Default for DensityTolerances {
    fn default() -> Self {
        Self { hermiticity: tol::HERMITICITY, trace: tol::TRACE, positivity: tol::POSITIVITY }
    }
}

impl DensityTolerances {
    /// Tolerances for states produced by the stepped integrator.
    pub fn stepped() -> Self {
        Self { hermiticity: tol::HERMITICITY, trace: tol::STEPPED_TRACE, positivity: tol::STEPPED_POSITIVITY }
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator.
///
/// Eigenvalues in `[-positivity, 0)` are kept as they are; anything more
/// negative is rejected at construction.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    tolerances: DensityTolerances,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, DensityTolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tolerances: DensityTolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { context: "density operator (columns)", expected: matrix.rows(), found: matrix.cols() });
        }
        let defect = matrix.hermiticity_defect();
        if !(defect <= tolerances.hermiticity) {
            return Err(Error::NotHermitian { defect });
        }
        let trace = matrix.trace();
        if !((trace.re - 1.0).abs() <= tolerances.trace && trace.im.abs() <= tolerances.trace) {
            return Err(Error::TraceNotUnit { trace: trace.re });
        }
        let min_eigenvalue = min_eigenvalue(&matrix);
        if !(min_eigenvalue >= -tolerances.positivity) {
            return Err(Error::NegativeEigenvalue { min_eigenvalue });
        }
        Ok(Self { matrix, tolerances })
    }

    /// `|ψ⟩⟨ψ|` for a non-zero amplitude vector, normalized first.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || !(norm > 0.0) {
            return Err(Error::invalid("pure state needs a non-zero amplitude vector"));
        }
        let psi: Vec<C64> = amplitudes.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&psi, &psi))
    }

    /// `|k⟩⟨k|` in the standard basis of dimension `n`.
    pub fn basis_state(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::IndexOutOfRange { what: "basis", index: k, bound: n });
        }
        let mut psi = vec![C64::new(0.0, 0.0); n];
        psi[k] = C64::new(1.0, 0.0);
        Self::pure(&psi)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(n).scale_real(1.0 / n as f64), tolerances: DensityTolerances::default() }
    }

    /// `self ⊗ other`, the product state of two subsystems.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        Self::with_tolerances(tensor(&self.matrix, &other.matrix), self.tolerances)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn tolerances(&self) -> DensityTolerances {
        self.tolerances
    }

    /// `tr(ω²)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.hermitian_part().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Re-validates a derived matrix with this state's tolerances.
    pub(crate) fn derive(&self, matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, self.tolerances)
    }
}

fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    m.hermitian_part().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Ascending eigenvalues with an orthonormal eigenvector per column.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eigenvectors
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    /// Rank-one projector onto eigenvector `k`.
    pub fn projector(&self, k: usize) -> ComplexMatrix {
        let v = self.vector(k);
        ComplexMatrix::outer(&v, &v)
    }

    /// `V · diag(λ) · V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_function(|x| C64::new(x, 0.0))
    }

    /// `V · diag(f(λ)) · V†`.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let v = self.eigenvectors.as_nalgebra();
        let mut scaled = v.clone();
        for (c, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            for r in 0..n {
                scaled[(r, c)] *= w;
            }
        }
        ComplexMatrix(scaled * v.adjoint())
    }
}

/// Eigendecomposition of a Hermitian operator.
///
/// Eigenvalues within [`tol::DEGENERACY`] of their neighbour form one
/// block. Within each block the basis is fixed by Gram–Schmidt of the
/// block projector applied to the standard basis vectors in index order,
/// so the result does not depend on the solver's internal choices. This
/// also fixes the phase of non-degenerate eigenvectors.
pub fn spectral(h: &HermitianOperator) -> SpectralDecomposition {
    let n = h.dim();
    let eig = h.matrix.hermitian_part().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] <= tol::DEGENERACY {
            end += 1;
        }
        let block: Vec<Vec<C64>> = order[start..end].iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
        columns.extend(canonical_block_basis(&block, n));
        start = end;
    }
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| columns[c][r]);
    SpectralDecomposition { eigenvalues, eigenvectors }
}

/// Validates hermiticity before decomposing.
pub fn spectral_of(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    Ok(spectral(&HermitianOperator::new(m.clone())?))
}

fn canonical_block_basis(block: &[Vec<C64>], n: usize) -> Vec<Vec<C64>> {
    let k = block.len();
    // P e_j is column j of the block projector.
    let projected = |j: usize| -> Vec<C64> { (0..n).map(|r| block.iter().map(|v| v[r] * v[j].conj()).sum()).collect() };
    let orthogonalize = |mut x: Vec<C64>, basis: &[Vec<C64>]| -> Vec<C64> {
        for _ in 0..2 {
            for b in basis {
                let overlap: C64 = b.iter().zip(&x).map(|(bi, xi)| bi.conj() * xi).sum();
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= overlap * bi;
                }
            }
        }
        x
    };
    let norm = |x: &[C64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let residuals: Vec<Vec<C64>> = (0..n).map(|j| orthogonalize(projected(j), &basis)).collect();
        let norms: Vec<f64> = residuals.iter().map(|r| norm(r)).collect();
        let best = norms.iter().copied().fold(0.0, f64::max);
        let j = norms.iter().position(|&x| x >= 0.5 * best).unwrap_or(0);
        let x = &residuals[j];
        let s = norms[j];
        basis.push(x.iter().map(|z| z / s).collect());
    }
    basis
}

/// Kronecker product; the joint index `(i, λ)` maps to `i·rows(b) + λ`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

fn check_dims(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { context, expected, found });
    }
    Ok(())
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<ComplexMatrix> {
    check_dims("commutator", a.dim(), b.dim())?;
    Ok(a.matrix.commutator(&b.matrix))
}

/// `‖[A, B]‖_F / max(1, ‖A‖_F·‖B‖_F)`.
pub fn commutator_defect(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    let c = commutator(a, b)?;
    Ok(c.frobenius_norm() / (a.frobenius_norm() * b.frobenius_norm()).max(1.0))
}

/// `exp(−i·H·t)` through the spectral decomposition of `H`.
pub fn propagator(h: &HermitianOperator, t: f64) -> ComplexMatrix {
    UnitaryPropagator::new(h).at(t)
}

/// Caches the decomposition of a Hamiltonian so that propagators for
/// many times cost one matrix product each.
#[derive(Clone, Debug)]
pub struct UnitaryPropagator {
    decomposition: SpectralDecomposition,
}

impl UnitaryPropagator {
    pub fn new(h: &HermitianOperator) -> Self {
        Self { decomposition: spectral(h) }
    }

    pub fn dim(&self) -> usize {
        self.decomposition.dim()
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        self.decomposition.apply_function(|lambda| C64::from_polar(1.0, -lambda * t))
    }
}

fn check_bipartite(w: &DensityOperator, d_s: usize, d_m: usize) -> Result<()> {
    if d_s == 0 || d_m == 0 {
        return Err(Error::invalid("subsystem dimensions must be positive"));
    }
    check_dims("bipartite factorization d_S·d_M", d_s * d_m, w.dim())
}

/// Reduced state of the system: `(ρ_S)_{ij} = Σ_λ ω_{(i,λ),(j,λ)}`.
pub fn partial_trace_m(w: &DensityOperator, d_s: usize, d_m: usize) -> Result<DensityOperator> {
    check_bipartite(w, d_s, d_m)?;
    let m = w.matrix();
    let rho = ComplexMatrix::from_fn(d_s, d_s, |i, j| (0..d_m).map(|l| m[(i * d_m + l, j * d_m + l)]).sum());
    w.derive(rho)
}

/// Reduced state of the apparatus: `(μ_M)_{λν} = Σ_i ω_{(i,λ),(i,ν)}`.
pub fn partial_trace_s(w: &DensityOperator, d_s: usize, d_m: usize) -> Result<DensityOperator> {
    check_bipartite(w, d_s, d_m)?;
    let m = w.matrix();
    let mu = ComplexMatrix::from_fn(d_m, d_m, |l, v| (0..d_s).map(|i| m[(i * d_m + l, i * d_m + v)]).sum());
    w.derive(mu)
}

/// `tr(O·ρ)`.
pub fn expectation(o: &HermitianOperator, rho: &DensityOperator) -> Result<f64> {
    check_dims("expectation", o.dim(), rho.dim())?;
    Ok((o.matrix() * rho.matrix()).trace().re)
}
