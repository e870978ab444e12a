//! Linear relations (subspaces of `K^p x K^q`): image and kernel
//! representations, structural classification, Cayley transforms and
//! relation composition.
//!
//! A subspace is stored through canonical generators: the stacked matrix
//! `[P; Q]` always has orthonormal columns, so set-level comparisons and
//! membership tests are conditioning-independent.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{
    self, is_psd, op_norm2, rank_and_bases, Field, LinalgError, Matrix, Tolerances,
};

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("generator matrices must have equal column counts: P has {p_cols}, Q has {q_cols}")]
    ColumnMismatch { p_cols: usize, q_cols: usize },
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },
    #[error("operation requires p = q, got p = {p}, q = {q}")]
    NotSquareRelation { p: usize, q: usize },
    #[error("Cayley parameters must be nonzero")]
    ZeroCayleyParameter,
    #[error("relation is not a graph: {reason}")]
    NotAGraph { reason: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A linear relation in `K^p x K^q` with canonical (orthonormal) generators.
///
/// Membership: `(v, w)` belongs to the subspace iff `v = P z`, `w = Q z`
/// for some coefficient vector `z` in `K^d`.
#[derive(Debug, Clone)]
pub struct Subspace {
    p: usize,
    q: usize,
    gen_p: Matrix,
    gen_q: Matrix,
}

/// Kernel form `{(v, w) : K1 v + K2 w = 0}` with `[K1, K2]` of full row rank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRep {
    #[serde(rename = "K1")]
    pub k1: Matrix,
    #[serde(rename = "K2")]
    pub k2: Matrix,
}

impl Subspace {
    /// Canonicalizing constructor from generator stacks `P` (p x d), `Q` (q x d).
    pub fn from_image(p: &Matrix, q: &Matrix) -> Result<Subspace, SubspaceError> {
        if p.cols() != q.cols() {
            return Err(SubspaceError::ColumnMismatch {
                p_cols: p.cols(),
                q_cols: q.cols(),
            });
        }
        let stacked = Matrix::vstack(&[p, q])?;
        let tol = Tolerances::default();
        let basis = rank_and_bases(&stacked, &tol).image;
        Ok(Subspace {
            p: p.rows(),
            q: q.rows(),
            gen_p: basis.rows_slice(0, p.rows()),
            gen_q: basis.rows_slice(p.rows(), p.rows() + q.rows()),
        })
    }

    /// The relation `{(v, w) : K1 v + K2 w = 0}`.
    pub fn from_kernel(k1: &Matrix, k2: &Matrix) -> Result<Subspace, SubspaceError> {
        if k1.rows() != k2.rows() {
            return Err(SubspaceError::DimensionMismatch {
                context: "from_kernel".into(),
                expected: format!("{} rows in K2", k1.rows()),
                found: format!("{}", k2.rows()),
            });
        }
        let stacked = Matrix::hstack(&[k1, k2])?;
        let tol = Tolerances::default();
        let kernel = rank_and_bases(&stacked, &tol).kernel;
        Ok(Subspace {
            p: k1.cols(),
            q: k2.cols(),
            gen_p: kernel.rows_slice(0, k1.cols()),
            gen_q: kernel.rows_slice(k1.cols(), k1.cols() + k2.cols()),
        })
    }

    /// Graph of the map `v -> T v`, i.e. `{(v, T v)}`.
    pub fn graph_of(t: &Matrix) -> Subspace {
        Subspace::from_image(&Matrix::identity(t.cols()), t).expect("graph generators")
    }

    /// `{(v, v)}` in `K^n x K^n`.
    pub fn identity_graph(n: usize) -> Subspace {
        Subspace::graph_of(&Matrix::identity(n))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Dimension of the relation (number of canonical generators).
    pub fn dim(&self) -> usize {
        self.gen_p.cols()
    }

    /// First-component generator stack `P` (p x d).
    pub fn gen_p(&self) -> &Matrix {
        &self.gen_p
    }

    /// Second-component generator stack `Q` (q x d).
    pub fn gen_q(&self) -> &Matrix {
        &self.gen_q
    }

    pub fn field(&self) -> Field {
        self.gen_p.field().promote(self.gen_q.field())
    }

    /// The flipped relation `{(w, v) : (v, w) in self}`.
    pub fn flip(&self) -> Subspace {
        Subspace {
            p: self.q,
            q: self.p,
            gen_p: self.gen_q.clone(),
            gen_q: self.gen_p.clone(),
        }
    }

    /// Kernel representation with `p + q - d` orthonormal rows.
    pub fn to_kernel(&self) -> KernelRep {
        let stacked = Matrix::vstack(&[&self.gen_p, &self.gen_q]).expect("canonical stack");
        let tol = Tolerances::default();
        // Rows of the kernel rep span the orthogonal complement of the
        // generator columns.
        let complement = rank_and_bases(&stacked.adjoint(), &tol).kernel;
        let k = complement.adjoint();
        KernelRep {
            k1: k.cols_slice(0, self.p),
            k2: k.cols_slice(self.p, self.p + self.q),
        }
    }

    /// Distance-based membership test for the pair `(v, w)`.
    pub fn contains(&self, v: &Matrix, w: &Matrix, tol: &Tolerances) -> Result<bool, SubspaceError> {
        if v.rows() != self.p || v.cols() != 1 || w.rows() != self.q || w.cols() != 1 {
            return Err(SubspaceError::DimensionMismatch {
                context: "contains".into(),
                expected: format!("vectors of size {} and {}", self.p, self.q),
                found: format!("{}x{} and {}x{}", v.rows(), v.cols(), w.rows(), w.cols()),
            });
        }
        let s = Matrix::vstack(&[v, w])?;
        let nrm = s.norm();
        if nrm == 0.0 {
            return Ok(true);
        }
        let basis = Matrix::vstack(&[&self.gen_p, &self.gen_q])?;
        let coeff = basis.adjoint().mul(&s);
        let dist = s.sub(&basis.mul(&coeff)).norm();
        Ok(dist <= tol.residual_rtol * nrm)
    }

    /// Set equality through the orthogonal projectors of both relations.
    pub fn set_eq(&self, other: &Subspace, tol: &Tolerances) -> bool {
        if self.p != other.p || self.q != other.q || self.dim() != other.dim() {
            return false;
        }
        let b1 = Matrix::vstack(&[&self.gen_p, &self.gen_q]).expect("stack");
        let b2 = Matrix::vstack(&[&other.gen_p, &other.gen_q]).expect("stack");
        let pi1 = b1.mul(&b1.adjoint());
        let pi2 = b2.mul(&b2.adjoint());
        pi1.sub(&pi2).norm() <= tol.residual_rtol * (1.0 + (self.dim() as f64).sqrt())
    }
}

/// Structural flags per the five subspace classes, with maximality and
/// violation witnesses (generator-coefficient vectors) for failed flags.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub dim: usize,
    pub contractive: bool,
    pub monotone: bool,
    pub norm_preserving: bool,
    pub dirac: bool,
    pub lagrangian: bool,
    pub maximal_contractive: bool,
    pub maximal_monotone: bool,
    pub maximal_norm_preserving: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_contractive: Option<Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_monotone: Option<Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_norm_preserving: Option<Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_dirac: Option<Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_lagrangian: Option<Matrix>,
}

type EigenPair = Option<(f64, Matrix)>;

fn hermitian_extremes(h: &Matrix) -> (EigenPair, EigenPair) {
    if h.rows() == 0 {
        return (None, None);
    }
    let eig = h.dmatrix().clone().symmetric_eigen();
    let mut imin = 0;
    let mut imax = 0;
    for (i, v) in eig.eigenvalues.iter().enumerate() {
        if *v < eig.eigenvalues[imin] {
            imin = i;
        }
        if *v > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let field = h.field();
    let vec_of = |i: usize| {
        Matrix::from_dmatrix(
            nalgebra::DMatrix::from_iterator(h.rows(), 1, eig.eigenvectors.column(i).iter().cloned()),
            field,
        )
    };
    (
        Some((eig.eigenvalues[imin], vec_of(imin))),
        Some((eig.eigenvalues[imax], vec_of(imax))),
    )
}

/// Classify a relation in `K^n x K^n` against the structural classes.
///
/// In the stored coordinates the Gram conditions are d x d forms:
/// contractive iff `Q^H Q - P^H P <= 0`, monotone iff `Q^H P + P^H Q >= 0`,
/// norm preserving iff `Q^H Q = P^H P`, Dirac iff `Q^H P + P^H Q = 0`,
/// Lagrangian iff `Q^H P = P^H Q`. Maximality of each flag holds exactly
/// when the dimension equals `n`.
pub fn classify(m: &Subspace, tol: &Tolerances) -> Result<ClassificationReport, SubspaceError> {
    if m.p != m.q {
        return Err(SubspaceError::NotSquareRelation { p: m.p, q: m.q });
    }
    let n = m.p;
    let d = m.dim();
    let p = &m.gen_p;
    let q = &m.gen_q;

    // Hermitian defect of the contractivity inequality.
    let defect_norm = q.adjoint().mul(q).sub(&p.adjoint().mul(p)).hermitian_part();
    // Hermitian form of the monotonicity inequality.
    let form_mono = q.adjoint().mul(p).add(&p.adjoint().mul(q)).hermitian_part();
    // Skew-Hermitian defect of the Lagrangian symmetry condition.
    let defect_lagr = q.adjoint().mul(p).sub(&p.adjoint().mul(q));

    let (norm_min, norm_max) = hermitian_extremes(&defect_norm);
    let (mono_min, mono_max) = hermitian_extremes(&form_mono);

    // Canonical generators keep every Gram block at unit scale, so one
    // absolute slack serves all five predicates.
    let slack = tol.psd_slack(1.0);

    let contractive = norm_max.as_ref().is_none_or(|(v, _)| *v <= slack);
    let norm_preserving = contractive && norm_min.as_ref().is_none_or(|(v, _)| *v >= -slack);
    let monotone = mono_min.as_ref().is_none_or(|(v, _)| *v >= -slack);
    let dirac = monotone && mono_max.as_ref().is_none_or(|(v, _)| *v <= slack);
    let lagr_defect_norm = op_norm2(&defect_lagr);
    let lagrangian = lagr_defect_norm <= slack;

    let witness_contractive = if contractive {
        None
    } else {
        norm_max.as_ref().map(|(_, z)| z.clone())
    };
    let witness_norm_preserving = if norm_preserving {
        None
    } else if norm_max.as_ref().is_some_and(|(v, _)| *v > slack) {
        norm_max.as_ref().map(|(_, z)| z.clone())
    } else {
        norm_min.as_ref().map(|(_, z)| z.clone())
    };
    let witness_monotone = if monotone {
        None
    } else {
        mono_min.as_ref().map(|(_, z)| z.clone())
    };
    let witness_dirac = if dirac {
        None
    } else if mono_min.as_ref().is_some_and(|(v, _)| *v < -slack) {
        mono_min.as_ref().map(|(_, z)| z.clone())
    } else {
        mono_max.as_ref().map(|(_, z)| z.clone())
    };
    let witness_lagrangian = if lagrangian || d == 0 {
        None
    } else {
        let svd = defect_lagr.dmatrix().clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        Some(Matrix::from_dmatrix(
            v_t.rows(0, 1).adjoint().into_owned(),
            defect_lagr.field(),
        ))
    };

    Ok(ClassificationReport {
        dim: d,
        contractive,
        monotone,
        norm_preserving,
        dirac,
        lagrangian,
        maximal_contractive: contractive && d == n,
        maximal_monotone: monotone && d == n,
        maximal_norm_preserving: norm_preserving && d == n,
        witness_contractive,
        witness_monotone,
        witness_norm_preserving,
        witness_dirac,
        witness_lagrangian,
    })
}

fn check_cayley_params(alpha: Complex64, beta: Complex64) -> Result<(), SubspaceError> {
    if alpha.norm() == 0.0 || beta.norm() == 0.0 {
        return Err(SubspaceError::ZeroCayleyParameter);
    }
    Ok(())
}

/// Cayley transform of a relation in `K^n x K^n`:
/// `im [beta P + alpha Q; beta P - alpha Q]`.
///
/// Members `(v, w)` are exactly the pairs with
/// `(alpha (v + w), beta (v - w))` in the input relation, and the map takes
/// monotone relations to contractive ones when `alpha conj(beta) > 0`.
pub fn cayley(m: &Subspace, alpha: Complex64, beta: Complex64) -> Result<Subspace, SubspaceError> {
    if m.p != m.q {
        return Err(SubspaceError::NotSquareRelation { p: m.p, q: m.q });
    }
    check_cayley_params(alpha, beta)?;
    let bp = m.gen_p.scale(beta);
    let aq = m.gen_q.scale(alpha);
    Subspace::from_image(&bp.add(&aq), &bp.sub(&aq))
}

/// Inverse of [`cayley`]: applies `(v, w) -> (alpha (v + w), beta (v - w))`
/// to the generators, so `cayley(cayley_inverse(M)) = M` as a set.
pub fn cayley_inverse(
    m: &Subspace,
    alpha: Complex64,
    beta: Complex64,
) -> Result<Subspace, SubspaceError> {
    if m.p != m.q {
        return Err(SubspaceError::NotSquareRelation { p: m.p, q: m.q });
    }
    check_cayley_params(alpha, beta)?;
    let sum = m.gen_p.add(&m.gen_q).scale(alpha);
    let diff = m.gen_p.sub(&m.gen_q).scale(beta);
    Subspace::from_image(&sum, &diff)
}

/// Relation composition `M^{-1} L = {(z, w) : exists v, (w, v) in M, (z, v) in L}`.
///
/// Computed over the joint nullspace of `[Q_M, -Q_L]`: solutions of
/// `Q_M zeta = Q_L eta` are mapped through `(P_L eta, P_M zeta)`.
pub fn compose(m: &Subspace, l: &Subspace) -> Result<Subspace, SubspaceError> {
    if m.q != l.q {
        return Err(SubspaceError::DimensionMismatch {
            context: "compose".into(),
            expected: format!("matching middle dimension {}", m.q),
            found: format!("{}", l.q),
        });
    }
    let tol = Tolerances::default();
    let joint = Matrix::hstack(&[&m.gen_q, &l.gen_q.neg()])?;
    let null = rank_and_bases(&joint, &tol).kernel;
    let zeta = null.rows_slice(0, m.dim());
    let eta = null.rows_slice(m.dim(), m.dim() + l.dim());
    Subspace::from_image(&l.gen_p.mul(&eta), &m.gen_p.mul(&zeta))
}

/// Extract `T` with `M = {(v, T v)}`, or report that `M` is not a graph.
pub fn as_graph(m: &Subspace, tol: &Tolerances) -> Result<Matrix, SubspaceError> {
    if m.p != m.q {
        return Err(SubspaceError::NotSquareRelation { p: m.p, q: m.q });
    }
    let n = m.p;
    if m.dim() != n {
        return Err(SubspaceError::NotAGraph {
            reason: format!("dimension {} differs from state size {}", m.dim(), n),
        });
    }
    // The canonical stack [P; Q] has unit scale, so P's invertibility is an
    // absolute decision; a relative cutoff would promote roundoff noise in a
    // numerically zero P block to full rank.
    let sv = linalg::singular_values(&m.gen_p);
    let cutoff = tol.rank_cutoff(n, n, 1.0);
    if n > 0 && sv.iter().filter(|s| **s > cutoff).count() < n {
        return Err(SubspaceError::NotAGraph {
            reason: format!(
                "relation contains (0, w) with w != 0 (smallest generator singular value {:e})",
                sv.last().copied().unwrap_or(0.0)
            ),
        });
    }
    // T P = Q, so T^H solves P^H T^H = Q^H.
    match linalg::solve_square(&m.gen_p.adjoint(), &m.gen_q.adjoint(), tol) {
        Ok(out) => Ok(out.x.adjoint()),
        Err(LinalgError::NonUnique { kernel_dim }) => Err(SubspaceError::NotAGraph {
            reason: format!(
                "first-component generators are rank deficient (kernel dimension {kernel_dim})"
            ),
        }),
        Err(LinalgError::Inconsistent { residual, .. }) => Err(SubspaceError::NotAGraph {
            reason: format!("graph equations are inconsistent (residual {residual:e})"),
        }),
        Err(e) => Err(e.into()),
    }
}

/// PSD test helper reused by classification consumers.
pub fn gram_psd(h: &Matrix, tol: &Tolerances) -> Result<bool, SubspaceError> {
    Ok(is_psd(h, tol)?.psd)
}

// ---------------------------------------------------------------------------
// JSON: {"p": n, "q": n, "P": <Matrix>, "Q": <Matrix>}; a {"kernel": {...}}
// member is accepted as an alternative input form.
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SubspaceOut<'a> {
    p: usize,
    q: usize,
    #[serde(rename = "P")]
    gen_p: &'a Matrix,
    #[serde(rename = "Q")]
    gen_q: &'a Matrix,
}

#[derive(Deserialize)]
struct SubspaceIn {
    p: usize,
    q: usize,
    #[serde(rename = "P")]
    gen_p: Option<Matrix>,
    #[serde(rename = "Q")]
    gen_q: Option<Matrix>,
    kernel: Option<KernelRep>,
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SubspaceOut {
            p: self.p,
            q: self.q,
            gen_p: &self.gen_p,
            gen_q: &self.gen_q,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SubspaceIn::deserialize(deserializer)?;
        let sub = match (raw.gen_p, raw.gen_q, raw.kernel) {
            (Some(p), Some(q), _) => {
                if p.rows() != raw.p {
                    return Err(D::Error::custom(format!(
                        "field 'P': {} rows, header says p = {}",
                        p.rows(),
                        raw.p
                    )));
                }
                if q.rows() != raw.q {
                    return Err(D::Error::custom(format!(
                        "field 'Q': {} rows, header says q = {}",
                        q.rows(),
                        raw.q
                    )));
                }
                Subspace::from_image(&p, &q).map_err(D::Error::custom)?
            }
            (None, None, Some(kernel)) => {
                if kernel.k1.cols() != raw.p {
                    return Err(D::Error::custom(format!(
                        "field 'kernel.K1': {} columns, header says p = {}",
                        kernel.k1.cols(),
                        raw.p
                    )));
                }
                if kernel.k2.cols() != raw.q {
                    return Err(D::Error::custom(format!(
                        "field 'kernel.K2': {} columns, header says q = {}",
                        kernel.k2.cols(),
                        raw.q
                    )));
                }
                Subspace::from_kernel(&kernel.k1, &kernel.k2).map_err(D::Error::custom)?
            }
            _ => {
                return Err(D::Error::custom(
                    "subspace needs either 'P' and 'Q' or a 'kernel' member",
                ))
            }
        };
        Ok(sub)
    }
}
