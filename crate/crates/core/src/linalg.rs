//! Tolerance-aware dense linear algebra over R and C.
//!
//! Everything else in this crate is built on [`Matrix`], a dense rectangular
//! array carried internally as complex `f64` entries together with a field tag.
//! Real matrices keep exactly-zero imaginary parts through arithmetic, so the
//! tag is honest: it records what the data is, not just how it was built.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Scalar field of a matrix. Mixed-field operations promote `Real` to `Complex`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "real")]
    Real,
    #[serde(rename = "complex")]
    Complex,
}

impl Field {
    pub fn promote(self, other: Field) -> Field {
        if self == Field::Complex || other == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        }
    }
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    ShapeMismatch {
        context: String,
        expected: String,
        found: String,
    },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("linear system is inconsistent: residual {residual:e} exceeds bound {bound:e}")]
    Inconsistent { residual: f64, bound: f64 },
    #[error("linear system has a {kernel_dim}-dimensional solution kernel")]
    NonUnique { kernel_dim: usize },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("tolerances must be strictly positive")]
    BadTolerance,
}

/// Classification and solve tolerances, threaded explicitly through every
/// predicate so CLI runs classify reproducibly.
///
/// The stored values are base factors:
/// - rank cutoff for an `r x c` matrix is `rank_rtol * max(r, c) * sigma_max`,
/// - PSD slack for a Hermitian form is `psd_atol * (1 + max |eigenvalue|)`,
/// - a solve is accepted when its residual is below
///   `residual_rtol * (|A| |x| + |b|)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_rtol: f64,
    pub psd_atol: f64,
    pub residual_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rtol: 1e-10,
            psd_atol: 1e-10,
            residual_rtol: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn new(rank_rtol: f64, psd_atol: f64, residual_rtol: f64) -> Result<Self, LinalgError> {
        if rank_rtol > 0.0 && psd_atol > 0.0 && residual_rtol > 0.0 {
            Ok(Tolerances {
                rank_rtol,
                psd_atol,
                residual_rtol,
            })
        } else {
            Err(LinalgError::BadTolerance)
        }
    }

    /// Uniform override: every base factor set to `tol`.
    pub fn uniform(tol: f64) -> Result<Self, LinalgError> {
        Tolerances::new(tol, tol, tol)
    }

    pub fn rank_cutoff(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        self.rank_rtol * rows.max(cols).max(1) as f64 * sigma_max
    }

    pub fn psd_slack(&self, eig_scale: f64) -> f64 {
        self.psd_atol * (1.0 + eig_scale)
    }
}

/// Dense rectangular matrix over R or C.
///
/// Entries are stored as `Complex64`; the [`Field`] tag drives serialization
/// and promotion. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: DMatrix<Complex64>,
    field: Field,
}

impl Matrix {
    pub fn from_dmatrix(data: DMatrix<Complex64>, field: Field) -> Matrix {
        Matrix { data, field }
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            data: DMatrix::zeros(rows, cols),
            field: Field::Real,
        }
    }

    pub fn identity(n: usize) -> Matrix {
        Matrix {
            data: DMatrix::identity(n, n),
            field: Field::Real,
        }
    }

    pub fn from_fn_real(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        Matrix {
            data: DMatrix::from_fn(rows, cols, |i, j| Complex64::new(f(i, j), 0.0)),
            field: Field::Real,
        }
    }

    pub fn from_fn_complex(
        rows: usize,
        cols: usize,
        f: impl FnMut(usize, usize) -> Complex64,
    ) -> Matrix {
        Matrix {
            data: DMatrix::from_fn(rows, cols, f),
            field: Field::Complex,
        }
    }

    /// Row-major construction from real data.
    pub fn from_rows_real(rows: &[Vec<f64>]) -> Result<Matrix, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::ShapeMismatch {
                    context: "from_rows_real".into(),
                    expected: format!("{c} columns"),
                    found: format!("{} columns", row.len()),
                });
            }
        }
        let m = Matrix::from_fn_real(r, c, |i, j| rows[i][j]);
        m.check_finite()?;
        Ok(m)
    }

    pub fn scalar_real(x: f64) -> Matrix {
        Matrix::from_fn_real(1, 1, |_, _| x)
    }

    pub fn col_from_real(v: &[f64]) -> Matrix {
        Matrix::from_fn_real(v.len(), 1, |i, _| v[i])
    }

    pub fn col_from_complex(v: &[Complex64]) -> Matrix {
        Matrix::from_fn_complex(v.len(), 1, |i, _| v[i])
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0 || self.cols() == 0
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn dmatrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                let z = self.data[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix {
            data: self.data.adjoint(),
            field: self.field,
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix {
            data: self.data.transpose(),
            field: self.field,
        }
    }

    pub fn neg(&self) -> Matrix {
        Matrix {
            data: -&self.data,
            field: self.field,
        }
    }

    pub fn scale(&self, s: Complex64) -> Matrix {
        Matrix {
            data: &self.data * s,
            field: if s.im == 0.0 { self.field } else { Field::Complex },
        }
    }

    pub fn scale_real(&self, s: f64) -> Matrix {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        Matrix {
            data: &self.data + &other.data,
            field: self.field.promote(other.field),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            data: &self.data - &other.data,
            field: self.field.promote(other.field),
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        Matrix {
            data: &self.data * &other.data,
            field: self.field.promote(other.field),
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn hermitian_part(&self) -> Matrix {
        Matrix {
            data: (&self.data + self.data.adjoint()).scale(0.5),
            field: self.field,
        }
    }

    /// Relative deviation from Hermitian symmetry, `|A - A^H| / max(1, |A|)`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        (&self.data - self.data.adjoint()).norm() / self.data.norm().max(1.0)
    }

    /// Copy of the block with rows `r0..r1` and columns `c0..c1`.
    pub fn slice(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        Matrix {
            data: self.data.view((r0, c0), (r1 - r0, c1 - c0)).into_owned(),
            field: self.field,
        }
    }

    pub fn rows_slice(&self, r0: usize, r1: usize) -> Matrix {
        self.slice(r0, r1, 0, self.cols())
    }

    pub fn cols_slice(&self, c0: usize, c1: usize) -> Matrix {
        self.slice(0, self.rows(), c0, c1)
    }

    pub fn hstack(parts: &[&Matrix]) -> Result<Matrix, LinalgError> {
        if parts.is_empty() {
            return Ok(Matrix::zeros(0, 0));
        }
        let rows = parts[0].rows();
        let mut field = Field::Real;
        let mut cols = 0;
        for p in parts {
            if p.rows() != rows {
                return Err(LinalgError::ShapeMismatch {
                    context: "hstack".into(),
                    expected: format!("{rows} rows"),
                    found: format!("{} rows", p.rows()),
                });
            }
            field = field.promote(p.field);
            cols += p.cols();
        }
        let mut data = DMatrix::zeros(rows, cols);
        let mut c = 0;
        for p in parts {
            data.view_mut((0, c), (rows, p.cols())).copy_from(&p.data);
            c += p.cols();
        }
        Ok(Matrix { data, field })
    }

    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix, LinalgError> {
        let adjointed: Vec<Matrix> = parts.iter().map(|p| p.transpose()).collect();
        let refs: Vec<&Matrix> = adjointed.iter().collect();
        Ok(Matrix::hstack(&refs)?.transpose())
    }

    /// Assemble from a grid of blocks; rows of blocks must tile exactly.
    pub fn from_blocks(grid: &[Vec<&Matrix>]) -> Result<Matrix, LinalgError> {
        let mut rows: Vec<Matrix> = Vec::new();
        for row in grid {
            rows.push(Matrix::hstack(row)?);
        }
        let refs: Vec<&Matrix> = rows.iter().collect();
        Matrix::vstack(&refs)
    }

    pub fn block_diag(parts: &[&Matrix]) -> Matrix {
        let rows: usize = parts.iter().map(|p| p.rows()).sum();
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = DMatrix::zeros(rows, cols);
        let mut field = Field::Real;
        let (mut r, mut c) = (0, 0);
        for p in parts {
            data.view_mut((r, c), (p.rows(), p.cols())).copy_from(&p.data);
            field = field.promote(p.field);
            r += p.rows();
            c += p.cols();
        }
        Matrix { data, field }
    }

    /// Column vector collecting all entries of `self` column by column.
    pub fn vectorize(&self) -> Matrix {
        let n = self.rows() * self.cols();
        let mut data = DMatrix::zeros(n, 1);
        let mut k = 0;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                data[(k, 0)] = self.data[(i, j)];
                k += 1;
            }
        }
        Matrix {
            data,
            field: self.field,
        }
    }
}

/// Report of a PSD test on the Hermitian part of a square matrix.
#[derive(Debug, Clone, Serialize)]
pub struct PsdReport {
    pub psd: bool,
    /// Smallest eigenvalue of the Hermitian part; `None` for 0x0 input.
    pub min_eigenvalue: Option<f64>,
    pub slack: f64,
}

/// True iff the Hermitian part `(H + H^H)/2` has all eigenvalues above
/// `-psd_atol * (1 + max |eigenvalue|)`.
pub fn is_psd(h: &Matrix, tol: &Tolerances) -> Result<PsdReport, LinalgError> {
    if !h.is_square() {
        return Err(LinalgError::NonSquare {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    if h.rows() == 0 {
        return Ok(PsdReport {
            psd: true,
            min_eigenvalue: None,
            slack: tol.psd_slack(0.0),
        });
    }
    let herm = h.hermitian_part();
    let eig = herm.data.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = eig
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .fold(0.0f64, f64::max);
    let slack = tol.psd_slack(scale);
    Ok(PsdReport {
        psd: min >= -slack,
        min_eigenvalue: Some(min),
        slack,
    })
}

/// Rank plus orthonormal bases of the column space and the (right) kernel.
#[derive(Debug, Clone)]
pub struct RankBases {
    pub rank: usize,
    /// Orthonormal columns spanning the image, `rows x rank`.
    pub image: Matrix,
    /// Orthonormal columns spanning the kernel, `cols x (cols - rank)`.
    pub kernel: Matrix,
}

/// Sorted singular values of `a` (descending).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.data
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect()
}

/// Rank against the relative cutoff from `tol`.
pub fn rank(a: &Matrix, tol: &Tolerances) -> usize {
    let sv = singular_values(a);
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = tol.rank_cutoff(a.rows(), a.cols(), sigma_max);
    sv.iter().filter(|s| **s > cutoff).count()
}

/// Rank decision via singular values; bases extracted with Householder QR.
///
/// The iterative SVD can return polluted singular *vectors* on matrices with
/// highly degenerate spectra (orthonormal stacks, projectors), which is
/// exactly the kind of input this crate produces everywhere. Column-pivoted
/// QR is immune to that, so singular values decide the rank and QR supplies
/// the bases.
pub fn rank_and_bases(a: &Matrix, tol: &Tolerances) -> RankBases {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return RankBases {
            rank: 0,
            image: Matrix::from_dmatrix(DMatrix::zeros(m, 0), a.field),
            kernel: Matrix::from_dmatrix(DMatrix::identity(n, n), a.field),
        };
    }
    let r = rank(a, tol);
    let image = if r == 0 {
        Matrix::from_dmatrix(DMatrix::zeros(m, 0), a.field)
    } else {
        let q = a.data.clone().col_piv_qr().q();
        Matrix {
            data: q.columns(0, r).into_owned(),
            field: a.field,
        }
    };
    let kernel = if r == 0 {
        Matrix::from_dmatrix(DMatrix::identity(n, n), a.field)
    } else {
        let row_space = a.data.adjoint().col_piv_qr().q().columns(0, r).into_owned();
        orthonormal_complement(&row_space, n, a.field)
    };
    RankBases {
        rank: r,
        image,
        kernel,
    }
}

/// Orthonormal basis of the orthogonal complement of the full-column-rank
/// `basis` inside `K^dim`, via Householder QR of `[basis, I]`.
fn orthonormal_complement(basis: &DMatrix<Complex64>, dim: usize, field: Field) -> Matrix {
    let r = basis.ncols();
    if r == 0 {
        return Matrix {
            data: DMatrix::identity(dim, dim),
            field,
        };
    }
    if r >= dim {
        return Matrix {
            data: DMatrix::zeros(dim, 0),
            field,
        };
    }
    let mut stacked = DMatrix::zeros(dim, r + dim);
    stacked.view_mut((0, 0), (dim, r)).copy_from(basis);
    stacked
        .view_mut((0, r), (dim, dim))
        .copy_from(&DMatrix::identity(dim, dim));
    let q = stacked.qr().q();
    Matrix {
        data: q.columns(r, dim - r).into_owned(),
        field,
    }
}

/// Largest singular value; 0 for empty matrices.
pub fn op_norm2(a: &Matrix) -> f64 {
    singular_values(a).into_iter().fold(0.0f64, f64::max)
}

fn hermitian_eigen(
    x: &Matrix,
    tol: &Tolerances,
) -> Result<(DMatrix<Complex64>, Vec<f64>), LinalgError> {
    if !x.is_square() {
        return Err(LinalgError::NonSquare {
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    let asym = x.hermitian_asymmetry();
    if asym > tol.residual_rtol.max(1e-12) * 100.0 {
        return Err(LinalgError::NotHermitian { asymmetry: asym });
    }
    let herm = x.hermitian_part();
    let eig = herm.data.symmetric_eigen();
    Ok((eig.eigenvectors, eig.eigenvalues.iter().cloned().collect()))
}

/// Hermitian positive definite square root.
pub fn hpd_sqrt(x: &Matrix, tol: &Tolerances) -> Result<Matrix, LinalgError> {
    let (vecs, vals) = hermitian_eigen(x, tol)?;
    let scale = vals.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if x.rows() > 0 && min <= tol.psd_slack(scale) {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(rebuild_hermitian(&vecs, &vals, x.field, f64::sqrt))
}

/// Both `X^{1/2}` and `X^{-1/2}` from one eigendecomposition.
pub fn hpd_sqrt_pair(x: &Matrix, tol: &Tolerances) -> Result<(Matrix, Matrix), LinalgError> {
    let (vecs, vals) = hermitian_eigen(x, tol)?;
    let scale = vals.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if x.rows() > 0 && min <= tol.psd_slack(scale) {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let s = rebuild_hermitian(&vecs, &vals, x.field, f64::sqrt);
    let si = rebuild_hermitian(&vecs, &vals, x.field, |v| 1.0 / v.sqrt());
    Ok((s, si))
}

/// Hermitian positive *semi*definite square root.
///
/// Eigenvalues inside the noise band `[-slack, slack]` are clamped to zero
/// before the square root — `sqrt` turns roundoff of size 1e-16 into 1e-8,
/// which would dominate every downstream residual. Anything below `-slack`
/// is rejected.
pub fn psd_sqrt(x: &Matrix, tol: &Tolerances) -> Result<Matrix, LinalgError> {
    let (vecs, vals) = hermitian_eigen(x, tol)?;
    let scale = vals.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack = tol.psd_slack(scale);
    if x.rows() > 0 && min < -slack {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(rebuild_hermitian(&vecs, &vals, x.field, |v| {
        if v > slack {
            v.sqrt()
        } else {
            0.0
        }
    }))
}

fn rebuild_hermitian(
    vecs: &DMatrix<Complex64>,
    vals: &[f64],
    field: Field,
    f: impl Fn(f64) -> f64,
) -> Matrix {
    let n = vecs.nrows();
    let mut diag = DMatrix::zeros(n, n);
    for (i, v) in vals.iter().enumerate() {
        diag[(i, i)] = Complex64::new(f(*v), 0.0);
    }
    let data = vecs * diag * vecs.adjoint();
    // Exact Hermitian symmetry survives the re-symmetrization below even when
    // the product introduces roundoff.
    let sym = (&data + data.adjoint()).scale(0.5);
    Matrix { data: sym, field }
}

/// Outcome of a successful linear solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Matrix,
    pub residual: f64,
    /// Always true on the `Ok` path: a nontrivial kernel is reported as
    /// [`LinalgError::NonUnique`] instead.
    pub unique: bool,
}

/// Minimal-residual solve of `A x = b` with consistency and uniqueness checks.
///
/// Accepts rectangular `A`; `b` may have several columns. The solution is the
/// SVD least-squares solution. Errors: [`LinalgError::NonUnique`] when the
/// kernel of `A` is nontrivial, [`LinalgError::Inconsistent`] when the
/// residual exceeds `residual_rtol * (|A| |x| + |b|)`.
pub fn solve_square(a: &Matrix, b: &Matrix, tol: &Tolerances) -> Result<SolveOutcome, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::ShapeMismatch {
            context: "solve_square".into(),
            expected: format!("{} rows in rhs", a.rows()),
            found: format!("{}", b.rows()),
        });
    }
    let (m, n) = (a.rows(), a.cols());
    let field = a.field.promote(b.field);
    if n == 0 {
        // Only the empty solution exists; consistency requires b ~ 0.
        let x = Matrix::from_dmatrix(DMatrix::zeros(0, b.cols()), field);
        let residual = b.norm();
        let bound = tol.residual_rtol * b.norm().max(1.0);
        if residual > bound && b.norm() > 0.0 {
            return Err(LinalgError::Inconsistent { residual, bound });
        }
        return Ok(SolveOutcome {
            x,
            residual,
            unique: true,
        });
    }
    if m == 0 {
        return Err(LinalgError::NonUnique { kernel_dim: n });
    }
    let sv = singular_values(a);
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = tol.rank_cutoff(m, n, sigma_max);
    let rank = sv.iter().filter(|s| **s > cutoff).count();
    if rank < n {
        return Err(LinalgError::NonUnique {
            kernel_dim: n - rank,
        });
    }
    // Full column rank (m >= n): Householder least squares,
    // x = R^{-1} Q^H b.
    let qr = a.data.clone().qr();
    let qtb = qr.q().adjoint() * &b.data;
    let x_data = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(LinalgError::NonUnique { kernel_dim: 1 })?;
    let x = Matrix {
        data: x_data,
        field,
    };
    let residual = (&a.data * &x.data - &b.data).norm();
    let bound = tol.residual_rtol * (sigma_max * x.norm() + b.norm()).max(f64::MIN_POSITIVE);
    if residual > bound {
        return Err(LinalgError::Inconsistent { residual, bound });
    }
    Ok(SolveOutcome {
        x,
        residual,
        unique: true,
    })
}

// ---------------------------------------------------------------------------
// JSON encoding: {"rows": p, "cols": q, "field": "real"|"complex",
//                 "data": [[...row...], ...]} with complex entries [re, im].
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    field: Field,
    data: Vec<Vec<EntryRepr>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntryRepr {
    Real(f64),
    Complex([f64; 2]),
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let data = (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| {
                        let z = self.at(i, j);
                        match self.field {
                            Field::Real => EntryRepr::Real(z.re),
                            Field::Complex => EntryRepr::Complex([z.re, z.im]),
                        }
                    })
                    .collect()
            })
            .collect();
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            field: self.field,
            data,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.data.len() != repr.rows {
            return Err(D::Error::custom(format!(
                "field 'data': expected {} rows, got {}",
                repr.rows,
                repr.data.len()
            )));
        }
        let mut data = DMatrix::zeros(repr.rows, repr.cols);
        for (i, row) in repr.data.iter().enumerate() {
            if row.len() != repr.cols {
                return Err(D::Error::custom(format!(
                    "field 'data': row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    repr.cols
                )));
            }
            for (j, e) in row.iter().enumerate() {
                let z = match e {
                    EntryRepr::Real(x) => Complex64::new(*x, 0.0),
                    EntryRepr::Complex([re, im]) => Complex64::new(*re, *im),
                };
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(D::Error::custom(format!(
                        "field 'data': non-finite entry at ({i},{j})"
                    )));
                }
                if repr.field == Field::Real && z.im != 0.0 {
                    return Err(D::Error::custom(format!(
                        "field 'data': complex entry at ({i},{j}) in a real matrix"
                    )));
                }
                data[(i, j)] = z;
            }
        }
        Ok(Matrix {
            data,
            field: repr.field,
        })
    }
}
