//! Structure-preserving interconnection of two scattering passive systems:
//! contractive port coupling, the composed descriptor form, Redheffer
//! reduction by block elimination, and the full-feedback closed loop.
//!
//! All reductions are cross-checked against [`elimination_oracle`], a
//! per-step numerical solve of the coupled equations with no closed-form
//! reduction at all.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, op_norm2, LinalgError, Matrix, Tolerances};
use crate::subspace::{classify, ClassificationReport, Subspace, SubspaceError};
use crate::systems::{
    index_le_one, DescriptorSystem, PortPartition, StandardSystem, StorageWeight, SystemError,
};

#[derive(Debug, Error)]
pub enum InterconnectError {
    #[error("port mismatch: {0}")]
    PortMismatch(String),
    #[error("coupling relation is not contractive (max expansion eigenvalue {max_expansion:e})")]
    NonContractiveCoupling { max_expansion: f64 },
    #[error("coupling relation is not maximal: dimension {dim}, expected {expected}")]
    CouplingNotMaximal { dim: usize, expected: usize },
    #[error("coupling is singular: I - D1_11 D2_11 is not invertible (min singular value {min_sv:e})")]
    CouplingSingular { min_sv: f64 },
    #[error("feedback loop is singular: I - D1 D2 is not invertible (min singular value {min_sv:e})")]
    FeedbackSingular { min_sv: f64 },
    #[error("interconnection requires identity E blocks")]
    NotIdentityE,
    #[error("composed descriptor is not causal (Kronecker index > 1)")]
    NotCausal,
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: String,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Coupled-port blocks of a partitioned system.
struct PortBlocks {
    a: Matrix,
    b1: Matrix,
    b2: Matrix,
    c1: Matrix,
    c2: Matrix,
    d11: Matrix,
    d12: Matrix,
    d21: Matrix,
    d22: Matrix,
    m1: usize,
}

fn split_ports(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    partition: Option<PortPartition>,
    which: &str,
) -> Result<PortBlocks, InterconnectError> {
    let p = partition.ok_or_else(|| {
        InterconnectError::PortMismatch(format!("system {which} carries no port partition"))
    })?;
    let m1 = p.m1;
    let (m, m_out) = (b.cols(), c.rows());
    Ok(PortBlocks {
        a: a.clone(),
        b1: b.cols_slice(0, m1),
        b2: b.cols_slice(m1, m),
        c1: c.rows_slice(0, m1),
        c2: c.rows_slice(m1, m_out),
        d11: d.slice(0, m1, 0, m1),
        d12: d.slice(0, m1, m1, m),
        d21: d.slice(m1, m_out, 0, m1),
        d22: d.slice(m1, m_out, m1, m),
        m1,
    })
}

/// Coupling relation on the port variables `(u_1^1, u_2^1, y_1^1, y_2^1)`,
/// stored through its canonical kernel `M_u1 u_1^1 + M_u2 u_2^1 + M_y1 y_1^1
/// + M_y2 y_2^1 = 0`.
///
/// Passivity of the interconnection requires the relation to be contractive
/// as a map from the system outputs into the system inputs,
/// `|(u_1^1, u_2^1)| <= |(y_1^1, y_2^1)|`: the coupling may only dissipate
/// the power it routes back. (Summing the two dissipation inequalities
/// cancels the port terms exactly under this direction; the reverse one lets
/// the loop generate energy.)
#[derive(Debug, Clone)]
pub struct CouplingRelation {
    m1_first: usize,
    m1_second: usize,
    /// Relation with first component `(y_1^1, y_2^1)` and second component
    /// `(u_1^1, u_2^1)`.
    relation: Subspace,
    mu1: Matrix,
    mu2: Matrix,
    my1: Matrix,
    my2: Matrix,
}

impl CouplingRelation {
    pub fn from_kernel_blocks(
        mu1: &Matrix,
        mu2: &Matrix,
        my1: &Matrix,
        my2: &Matrix,
    ) -> Result<Self, InterconnectError> {
        let k = mu1.rows();
        for (name, m) in [("M12", mu2), ("M21", my1), ("M22", my2)] {
            if m.rows() != k {
                return Err(InterconnectError::Dimension {
                    context: format!("coupling kernel block {name}"),
                    expected: format!("{k} rows"),
                    found: format!("{}", m.rows()),
                });
            }
        }
        // First component of the relation is the output side.
        let k1 = Matrix::hstack(&[my1, my2])?;
        let k2 = Matrix::hstack(&[mu1, mu2])?;
        let relation = Subspace::from_kernel(&k1, &k2)?;
        // Re-extract a canonical kernel so redundant user rows collapse.
        let canon = relation.to_kernel();
        let (ma, mb) = (mu1.cols(), mu2.cols());
        Ok(CouplingRelation {
            m1_first: ma,
            m1_second: mb,
            my1: canon.k1.cols_slice(0, ma),
            my2: canon.k1.cols_slice(ma, ma + mb),
            mu1: canon.k2.cols_slice(0, ma),
            mu2: canon.k2.cols_slice(ma, ma + mb),
            relation,
        })
    }

    /// `y_1^1 = u_2^1`, `u_1^1 = y_2^1` (the Redheffer cross-connection).
    pub fn redheffer(m1: usize) -> CouplingRelation {
        let id = Matrix::identity(m1);
        let z = Matrix::zeros(m1, m1);
        CouplingRelation::from_kernel_blocks(
            &Matrix::vstack(&[&z, &id]).expect("stack"),
            &Matrix::vstack(&[&id.neg(), &z]).expect("stack"),
            &Matrix::vstack(&[&id, &z]).expect("stack"),
            &Matrix::vstack(&[&z, &id.neg()]).expect("stack"),
        )
        .expect("redheffer kernel is well formed")
    }

    /// Graph coupling `(u_1^1, u_2^1) = G (y_1^1, y_2^1)`: the routed
    /// outputs re-enter as inputs through `G`, contractive iff `|G|_2 <= 1`.
    pub fn from_graph(
        g: &Matrix,
        m1_first: usize,
        m1_second: usize,
    ) -> Result<Self, InterconnectError> {
        let mc = m1_first + m1_second;
        if g.rows() != mc || g.cols() != mc {
            return Err(InterconnectError::Dimension {
                context: "coupling graph".into(),
                expected: format!("{mc}x{mc}"),
                found: format!("{}x{}", g.rows(), g.cols()),
            });
        }
        let neg_id = Matrix::identity(mc).neg();
        CouplingRelation::from_kernel_blocks(
            &neg_id.cols_slice(0, m1_first),
            &neg_id.cols_slice(m1_first, mc),
            &g.cols_slice(0, m1_first),
            &g.cols_slice(m1_first, mc),
        )
    }

    pub fn widths(&self) -> (usize, usize) {
        (self.m1_first, self.m1_second)
    }

    pub fn relation(&self) -> &Subspace {
        &self.relation
    }

    pub fn kernel_rows(&self) -> usize {
        self.mu1.rows()
    }

    pub fn classify(&self, tol: &Tolerances) -> Result<ClassificationReport, InterconnectError> {
        Ok(classify(&self.relation, tol)?)
    }

    /// Contractive (outputs-to-inputs) and maximal (the composition is
    /// square exactly then).
    pub fn check_contractive(&self, tol: &Tolerances) -> Result<(), InterconnectError> {
        let report = self.classify(tol)?;
        if !report.contractive {
            let max_expansion = report
                .witness_contractive
                .as_ref()
                .map(|z| {
                    let w = self.relation.gen_q().mul(z).norm();
                    let v = self.relation.gen_p().mul(z).norm();
                    w * w - v * v
                })
                .unwrap_or(f64::NAN);
            return Err(InterconnectError::NonContractiveCoupling { max_expansion });
        }
        let mc = self.m1_first + self.m1_second;
        if report.dim != mc {
            return Err(InterconnectError::CouplingNotMaximal {
                dim: report.dim,
                expected: mc,
            });
        }
        Ok(())
    }
}

/// Placement of the subsystem variables inside the composed state
/// `(x_1, x_2, u_1^1, u_2^1, y_1^1, y_2^1)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlockManifest {
    pub x1: (usize, usize),
    pub x2: (usize, usize),
    pub u1_coupled: (usize, usize),
    pub u2_coupled: (usize, usize),
    pub y1_coupled: (usize, usize),
    pub y2_coupled: (usize, usize),
}

/// The interconnected system in descriptor form, with block bookkeeping.
#[derive(Debug, Clone)]
pub struct ComposedDescriptor {
    pub system: DescriptorSystem,
    pub blocks: BlockManifest,
}

impl ComposedDescriptor {
    /// Consistent composite initial state from subsystem states and the
    /// first external input, through the reduction maps.
    pub fn initial_state(
        &self,
        x10: &Matrix,
        x20: &Matrix,
        u0: &Matrix,
        tol: &Tolerances,
    ) -> Result<Matrix, InterconnectError> {
        let n = self.system.state_dim();
        let mut guess = Matrix::zeros(n, 1);
        let embed = |target: &mut Matrix, src: &Matrix, range: (usize, usize)| {
            let mut data = target.dmatrix().clone();
            data.view_mut((range.0, 0), (range.1, 1))
                .copy_from(src.dmatrix());
            *target = Matrix::from_dmatrix(data, target.field().promote(src.field()));
        };
        embed(&mut guess, x10, self.blocks.x1);
        embed(&mut guess, x20, self.blocks.x2);
        let red = crate::systems::reduce_to_standard(&self.system, tol)?;
        let xt = red.proj.mul(&guess);
        Ok(red.phi.mul(&xt).add(&red.psi.mul(u0)))
    }

    pub fn extract(&self, state: &Matrix, range: (usize, usize)) -> Matrix {
        state.rows_slice(range.0, range.0 + range.1)
    }
}

/// Assemble the interconnection of two partitioned descriptor systems under
/// a contractive coupling: extended state `(x_1, x_2, u_1^1, u_2^1, y_1^1,
/// y_2^1)`, singular E on the port rows, coupling kernel as the final block
/// row. Causality of the result is checked and non-causal compositions are
/// rejected.
pub fn general_interconnect(
    sys1: &DescriptorSystem,
    sys2: &DescriptorSystem,
    coupling: &CouplingRelation,
    tol: &Tolerances,
) -> Result<ComposedDescriptor, InterconnectError> {
    let p1 = split_ports(&sys1.a, &sys1.b, &sys1.c, &sys1.d, sys1.partition, "1")?;
    let p2 = split_ports(&sys2.a, &sys2.b, &sys2.c, &sys2.d, sys2.partition, "2")?;
    let (ca, cb) = coupling.widths();
    if p1.m1 != ca || p2.m1 != cb {
        return Err(InterconnectError::PortMismatch(format!(
            "coupling expects port widths ({ca}, {cb}), systems provide ({}, {})",
            p1.m1, p2.m1
        )));
    }
    coupling.check_contractive(tol)?;

    let (n1, n2) = (sys1.state_dim(), sys2.state_dim());
    let (ma, mb) = (p1.m1, p2.m1);
    let zn = |r: usize, c: usize| Matrix::zeros(r, c);

    let id_a = Matrix::identity(ma);
    let id_b = Matrix::identity(mb);
    let a = Matrix::from_blocks(&[
        vec![&p1.a, &zn(n1, n2), &p1.b1, &zn(n1, mb), &zn(n1, ma), &zn(n1, mb)],
        vec![&zn(n2, n1), &p2.a, &zn(n2, ma), &p2.b1, &zn(n2, ma), &zn(n2, mb)],
        vec![&p1.c1, &zn(ma, n2), &p1.d11, &zn(ma, mb), &id_a.neg(), &zn(ma, mb)],
        vec![&zn(mb, n1), &p2.c1, &zn(mb, ma), &p2.d11, &zn(mb, ma), &id_b.neg()],
        vec![
            &zn(coupling.kernel_rows(), n1),
            &zn(coupling.kernel_rows(), n2),
            &coupling.mu1,
            &coupling.mu2,
            &coupling.my1,
            &coupling.my2,
        ],
    ])?;
    let m2a = p1.b2.cols();
    let m2b = p2.b2.cols();
    let b = Matrix::from_blocks(&[
        vec![&p1.b2, &zn(n1, m2b)],
        vec![&zn(n2, m2a), &p2.b2],
        vec![&p1.d12, &zn(ma, m2b)],
        vec![&zn(mb, m2a), &p2.d12],
        vec![&zn(coupling.kernel_rows(), m2a), &zn(coupling.kernel_rows(), m2b)],
    ])?;
    let ports = 2 * (ma + mb);
    let e = Matrix::block_diag(&[&sys1.e, &sys2.e, &Matrix::zeros(ports, ports)]);
    let c = Matrix::from_blocks(&[
        vec![
            &p1.c2,
            &zn(p1.c2.rows(), n2),
            &p1.d21,
            &zn(p1.c2.rows(), mb),
            &zn(p1.c2.rows(), ma),
            &zn(p1.c2.rows(), mb),
        ],
        vec![
            &zn(p2.c2.rows(), n1),
            &p2.c2,
            &zn(p2.c2.rows(), ma),
            &p2.d21,
            &zn(p2.c2.rows(), ma),
            &zn(p2.c2.rows(), mb),
        ],
    ])?;
    let d = Matrix::block_diag(&[&p1.d22, &p2.d22]);

    let system = DescriptorSystem::new(e, a, b, c, d, None)?;
    let index = index_le_one(&system.e, &system.a, tol)?;
    if !index.index_le_one {
        return Err(InterconnectError::NotCausal);
    }
    let blocks = BlockManifest {
        x1: (0, n1),
        x2: (n1, n2),
        u1_coupled: (n1 + n2, ma),
        u2_coupled: (n1 + n2 + ma, mb),
        y1_coupled: (n1 + n2 + ma + mb, ma),
        y2_coupled: (n1 + n2 + ma + mb + ma, mb),
    };
    Ok(ComposedDescriptor { system, blocks })
}

/// The three equivalent invertibility tests for the Redheffer coupling.
#[derive(Debug, Clone, Serialize)]
pub struct InvertibilityReport {
    pub min_sv_i_d1_d2: f64,
    pub min_sv_i_d2_d1: f64,
    /// Kernel dimension of `[[D1_11, -I], [-I, D2_11]]`.
    pub stacked_kernel_dim: usize,
    pub invertible: bool,
    /// All three tests agree.
    pub tests_agree: bool,
}

/// Evaluate invertibility of `I - D1_11 D2_11` through all three equivalent
/// characterizations.
pub fn redheffer_invertibility(
    d1_11: &Matrix,
    d2_11: &Matrix,
    tol: &Tolerances,
) -> Result<InvertibilityReport, InterconnectError> {
    let m1 = d1_11.rows();
    if d1_11.cols() != m1 || d2_11.rows() != m1 || d2_11.cols() != m1 {
        return Err(InterconnectError::Dimension {
            context: "redheffer_invertibility".into(),
            expected: format!("square {m1}x{m1} blocks"),
            found: format!(
                "{}x{} and {}x{}",
                d1_11.rows(),
                d1_11.cols(),
                d2_11.rows(),
                d2_11.cols()
            ),
        });
    }
    let id = Matrix::identity(m1);
    let t1 = id.sub(&d1_11.mul(d2_11));
    let t2 = id.sub(&d2_11.mul(d1_11));
    let stacked = Matrix::from_blocks(&[
        vec![d1_11, &Matrix::identity(m1).neg()],
        vec![&Matrix::identity(m1).neg(), d2_11],
    ])?;
    // The differences I - D1 D2 live at unit scale; a cutoff relative to
    // their own sigma_max would promote a numerically-zero difference to
    // full rank, so the scale is floored at 1.
    let rank_unit = |a: &Matrix| {
        let sv = linalg::singular_values(a);
        let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max).max(1.0);
        let cutoff = tol.rank_cutoff(a.rows(), a.cols(), sigma_max);
        sv.iter().filter(|s| **s > cutoff).count()
    };
    let sv1 = linalg::singular_values(&t1);
    let sv2 = linalg::singular_values(&t2);
    let min_sv_i_d1_d2 = sv1.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_sv_i_d2_d1 = sv2.iter().cloned().fold(f64::INFINITY, f64::min);
    let inv1 = rank_unit(&t1) == m1;
    let inv2 = rank_unit(&t2) == m1;
    let kernel_dim = 2 * m1 - rank_unit(&stacked);
    let inv3 = kernel_dim == 0;
    Ok(InvertibilityReport {
        min_sv_i_d1_d2,
        min_sv_i_d2_d1,
        stacked_kernel_dim: kernel_dim,
        invertible: inv1,
        tests_agree: inv1 == inv2 && inv2 == inv3,
    })
}

/// Redheffer reduction outcome.
#[derive(Debug, Clone)]
pub struct RedhefferReduction {
    pub system: StandardSystem,
    pub invertibility: InvertibilityReport,
}

/// Eliminate the cross-connected ports `y_1^1 = u_2^1`, `u_1^1 = y_2^1` by
/// exact block elimination, leaving a standard system on `(x_1, x_2)` with
/// external ports `(u_1^2, u_2^2) -> (y_1^2, y_2^2)`.
pub fn redheffer_reduce(
    sys1: &StandardSystem,
    sys2: &StandardSystem,
    tol: &Tolerances,
) -> Result<RedhefferReduction, InterconnectError> {
    let p1 = split_ports(&sys1.a, &sys1.b, &sys1.c, &sys1.d, sys1.partition, "1")?;
    let p2 = split_ports(&sys2.a, &sys2.b, &sys2.c, &sys2.d, sys2.partition, "2")?;
    if p1.m1 != p2.m1 {
        return Err(InterconnectError::PortMismatch(format!(
            "Redheffer coupling needs equal port widths, got {} and {}",
            p1.m1, p2.m1
        )));
    }
    let m1 = p1.m1;
    let invertibility = redheffer_invertibility(&p1.d11, &p2.d11, tol)?;
    if !invertibility.invertible {
        return Err(InterconnectError::CouplingSingular {
            min_sv: invertibility.min_sv_i_d1_d2,
        });
    }

    let (n1, n2) = (p1.a.rows(), p2.a.rows());
    let zn = |r: usize, c: usize| Matrix::zeros(r, c);
    let id = Matrix::identity(m1);
    // (u_1^1, u_2^1) solve  [[I, -D2_11], [-D1_11, I]] u = Gx x + Gu u_ext.
    let s = Matrix::from_blocks(&[vec![&id, &p2.d11.neg()], vec![&p1.d11.neg(), &id]])?;
    let gx = Matrix::from_blocks(&[
        vec![&zn(m1, n1), &p2.c1],
        vec![&p1.c1, &zn(m1, n2)],
    ])?;
    let gu = Matrix::from_blocks(&[
        vec![&zn(m1, p1.d12.cols()), &p2.d12],
        vec![&p1.d12, &zn(m1, p2.d12.cols())],
    ])?;
    let rhs = Matrix::hstack(&[&gx, &gu])?;
    let sol = linalg::solve_square(&s, &rhs, tol)?.x;
    let sol_x = sol.cols_slice(0, gx.cols());
    let sol_u = sol.cols_slice(gx.cols(), sol.cols());

    let bb1 = Matrix::block_diag(&[&p1.b1, &p2.b1]);
    let dd21 = Matrix::block_diag(&[&p1.d21, &p2.d21]);
    let a_hat = Matrix::block_diag(&[&p1.a, &p2.a]).add(&bb1.mul(&sol_x));
    let b_hat = Matrix::block_diag(&[&p1.b2, &p2.b2]).add(&bb1.mul(&sol_u));
    let c_hat = Matrix::block_diag(&[&p1.c2, &p2.c2]).add(&dd21.mul(&sol_x));
    let d_hat = Matrix::block_diag(&[&p1.d22, &p2.d22]).add(&dd21.mul(&sol_u));

    Ok(RedhefferReduction {
        system: StandardSystem::new(a_hat, b_hat, c_hat, d_hat, None)?,
        invertibility,
    })
}

/// Closed-loop contraction report for the full-feedback interconnection.
#[derive(Debug, Clone)]
pub struct ClosedLoopReport {
    pub a_hat: Matrix,
    /// `|X^{1/2} A X^{-1/2}|_2` with `X = diag(X1, X2)` (quadratic-form
    /// convention).
    pub weighted_norm: f64,
    /// `lambda_max(A^H X A - X)`.
    pub lmi_lambda_max: f64,
    pub contractive: bool,
    /// Worst ratio `|diag(X1,X2) A z| / |diag(X1,X2) z|` over the sample
    /// vectors: the alternative convention weighting by `X` instead of
    /// `X^{1/2}`, reported for comparison.
    pub literal_norm_max_ratio: f64,
}

/// Full-port feedback `u_1 = y_2`, `u_2 = y_1`: eliminate both inputs and
/// report the weighted contraction of the autonomous closed loop.
pub fn closed_loop(
    sys1: &StandardSystem,
    sys2: &StandardSystem,
    x1: &StorageWeight,
    x2: &StorageWeight,
    tol: &Tolerances,
) -> Result<ClosedLoopReport, InterconnectError> {
    if sys1.input_dim() != sys2.output_dim() || sys2.input_dim() != sys1.output_dim() {
        return Err(InterconnectError::PortMismatch(format!(
            "full feedback needs matching cross dimensions, got u1 = {}, y2 = {}, u2 = {}, y1 = {}",
            sys1.input_dim(),
            sys2.output_dim(),
            sys2.input_dim(),
            sys1.output_dim()
        )));
    }
    if x1.dim() != sys1.state_dim() || x2.dim() != sys2.state_dim() {
        return Err(InterconnectError::Dimension {
            context: "closed_loop weights".into(),
            expected: format!("{} and {}", sys1.state_dim(), sys2.state_dim()),
            found: format!("{} and {}", x1.dim(), x2.dim()),
        });
    }
    let (m1, m2) = (sys1.input_dim(), sys2.input_dim());
    let s = Matrix::from_blocks(&[
        vec![&Matrix::identity(m1), &sys2.d.neg()],
        vec![&sys1.d.neg(), &Matrix::identity(m2)],
    ])?;
    let sv_min = linalg::singular_values(&s)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if linalg::rank(&s, tol) < m1 + m2 {
        return Err(InterconnectError::FeedbackSingular { min_sv: sv_min });
    }
    let (n1, n2) = (sys1.state_dim(), sys2.state_dim());
    let gx = Matrix::from_blocks(&[
        vec![&Matrix::zeros(m1, n1), &sys2.c],
        vec![&sys1.c, &Matrix::zeros(m2, n2)],
    ])?;
    let sol = linalg::solve_square(&s, &gx, tol)?.x;
    let bb = Matrix::block_diag(&[&sys1.b, &sys2.b]);
    let a_hat = Matrix::block_diag(&[&sys1.a, &sys2.a]).add(&bb.mul(&sol));

    let x_hat = compose_storage(x1, x2);
    let (sq, sq_inv) = x_hat.sqrt_pair(tol)?;
    let weighted_norm = op_norm2(&sq.mul(&a_hat).mul(&sq_inv));
    let gram = a_hat
        .adjoint()
        .mul(&x_hat.matrix().mul(&a_hat))
        .sub(x_hat.matrix());
    let psd = linalg::is_psd(&gram.neg(), tol)?;
    let lmi_lambda_max = psd.min_eigenvalue.map_or(0.0, |v| -v);

    // Alternative convention |z|_X = |diag(X1, X2) z| (weight applied
    // inside the norm), evaluated on deterministic sample vectors.
    let n = n1 + n2;
    let x_lit = x_hat.matrix();
    let mut literal_norm_max_ratio: f64 = 0.0;
    let mut samples: Vec<Matrix> = (0..n)
        .map(|i| Matrix::from_fn_real(n, 1, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    samples.push(Matrix::from_fn_real(n, 1, |r, _| {
        (1.0 + r as f64).sin()
    }));
    samples.push(Matrix::from_fn_real(n, 1, |r, _| {
        if r % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }));
    for z in &samples {
        let denom = x_lit.mul(z).norm();
        if denom > 0.0 {
            let num = x_lit.mul(&a_hat.mul(z)).norm();
            literal_norm_max_ratio = literal_norm_max_ratio.max(num / denom);
        }
    }

    Ok(ClosedLoopReport {
        a_hat,
        weighted_norm,
        lmi_lambda_max,
        contractive: psd.psd,
        literal_norm_max_ratio,
    })
}

/// Block-diagonal composite storage `diag(X1, X2)`.
pub fn compose_storage(x1: &StorageWeight, x2: &StorageWeight) -> StorageWeight {
    let x = Matrix::block_diag(&[x1.matrix(), x2.matrix()]);
    StorageWeight::new(x, &Tolerances::default())
        .expect("block diagonal of positive definite weights is positive definite")
}

/// Reference trajectory of the coupled equations, solved step by step with
/// no closed-form reduction.
#[derive(Debug, Clone)]
pub struct OracleTrajectory {
    pub states1: Vec<Matrix>,
    pub states2: Vec<Matrix>,
    /// Stacked external outputs `(y_1^2, y_2^2)`.
    pub outputs: Vec<Matrix>,
    /// Stacked coupled inputs `(u_1^1, u_2^1)`.
    pub port_inputs: Vec<Matrix>,
    /// Stacked coupled outputs `(y_1^1, y_2^1)`.
    pub port_outputs: Vec<Matrix>,
    /// Stacked external inputs `(u_1^2, u_2^2)`.
    pub inputs: Vec<Matrix>,
}

/// Ground truth for the reductions: at each step solve the stacked linear
/// system in `(x_1^+, x_2^+, u_1^1, u_2^1, y_1^1, y_2^1)` given the states
/// and external inputs.
pub fn elimination_oracle(
    sys1: &StandardSystem,
    sys2: &StandardSystem,
    coupling: &CouplingRelation,
    x10: &Matrix,
    x20: &Matrix,
    inputs: &[Matrix],
    tol: &Tolerances,
) -> Result<OracleTrajectory, InterconnectError> {
    let p1 = split_ports(&sys1.a, &sys1.b, &sys1.c, &sys1.d, sys1.partition, "1")?;
    let p2 = split_ports(&sys2.a, &sys2.b, &sys2.c, &sys2.d, sys2.partition, "2")?;
    let (ca, cb) = coupling.widths();
    if p1.m1 != ca || p2.m1 != cb {
        return Err(InterconnectError::PortMismatch(format!(
            "coupling expects port widths ({ca}, {cb}), systems provide ({}, {})",
            p1.m1, p2.m1
        )));
    }
    let (n1, n2) = (p1.a.rows(), p2.a.rows());
    let (ma, mb) = (ca, cb);
    let (m2a, m2b) = (p1.b2.cols(), p2.b2.cols());
    let k = coupling.kernel_rows();
    let zn = |r: usize, c: usize| Matrix::zeros(r, c);
    let id1 = Matrix::identity(n1);
    let id2 = Matrix::identity(n2);
    let ida = Matrix::identity(ma);
    let idb = Matrix::identity(mb);

    // Unknowns: (x1+, x2+, u1^1, u2^1, y1^1, y2^1).
    let lhs = Matrix::from_blocks(&[
        vec![&id1, &zn(n1, n2), &p1.b1.neg(), &zn(n1, mb), &zn(n1, ma), &zn(n1, mb)],
        vec![&zn(n2, n1), &id2, &zn(n2, ma), &p2.b1.neg(), &zn(n2, ma), &zn(n2, mb)],
        vec![&zn(ma, n1), &zn(ma, n2), &p1.d11.neg(), &zn(ma, mb), &ida, &zn(ma, mb)],
        vec![&zn(mb, n1), &zn(mb, n2), &zn(mb, ma), &p2.d11.neg(), &zn(mb, ma), &idb],
        vec![
            &zn(k, n1),
            &zn(k, n2),
            &coupling.mu1,
            &coupling.mu2,
            &coupling.my1,
            &coupling.my2,
        ],
    ])?;

    let mut x1 = x10.clone();
    let mut x2 = x20.clone();
    let mut traj = OracleTrajectory {
        states1: vec![x1.clone()],
        states2: vec![x2.clone()],
        outputs: Vec::new(),
        port_inputs: Vec::new(),
        port_outputs: Vec::new(),
        inputs: inputs.to_vec(),
    };
    for (step, u_ext) in inputs.iter().enumerate() {
        if u_ext.rows() != m2a + m2b || u_ext.cols() != 1 {
            return Err(InterconnectError::Dimension {
                context: format!("external input at step {step}"),
                expected: format!("{}x1", m2a + m2b),
                found: format!("{}x{}", u_ext.rows(), u_ext.cols()),
            });
        }
        let u1e = u_ext.rows_slice(0, m2a);
        let u2e = u_ext.rows_slice(m2a, m2a + m2b);
        let rhs = Matrix::vstack(&[
            &p1.a.mul(&x1).add(&p1.b2.mul(&u1e)),
            &p2.a.mul(&x2).add(&p2.b2.mul(&u2e)),
            &p1.c1.mul(&x1).add(&p1.d12.mul(&u1e)),
            &p2.c1.mul(&x2).add(&p2.d12.mul(&u2e)),
            &Matrix::zeros(k, 1),
        ])?;
        let sol = match linalg::solve_square(&lhs, &rhs, tol) {
            Ok(out) => out.x,
            Err(LinalgError::NonUnique { kernel_dim }) => {
                return Err(InterconnectError::System(SystemError::NonUniqueStep {
                    step,
                    kernel_dim,
                }))
            }
            Err(LinalgError::Inconsistent { residual, .. }) => {
                return Err(InterconnectError::System(SystemError::InconsistentStep {
                    step,
                    residual,
                }))
            }
            Err(e) => return Err(e.into()),
        };
        let mut at = 0;
        let mut take = |len: usize| {
            let part = sol.rows_slice(at, at + len);
            at += len;
            part
        };
        let x1n = take(n1);
        let x2n = take(n2);
        let u1c = take(ma);
        let u2c = take(mb);
        let y1c = take(ma);
        let y2c = take(mb);
        let y1e = p1.c2.mul(&x1).add(&p1.d21.mul(&u1c)).add(&p1.d22.mul(&u1e));
        let y2e = p2.c2.mul(&x2).add(&p2.d21.mul(&u2c)).add(&p2.d22.mul(&u2e));
        traj.outputs.push(Matrix::vstack(&[&y1e, &y2e])?);
        traj.port_inputs.push(Matrix::vstack(&[&u1c, &u2c])?);
        traj.port_outputs.push(Matrix::vstack(&[&y1c, &y2c])?);
        x1 = x1n;
        x2 = x2n;
        traj.states1.push(x1.clone());
        traj.states2.push(x2.clone());
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Coupling JSON: {"mode": "general"|"redheffer"|"feedback",
//                 "kernel": {"M11":...,"M12":...,"M21":...,"M22":...}|null}
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingKernelFile {
    #[serde(rename = "M11")]
    pub m11: Matrix,
    #[serde(rename = "M12")]
    pub m12: Matrix,
    #[serde(rename = "M21")]
    pub m21: Matrix,
    #[serde(rename = "M22")]
    pub m22: Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingFile {
    pub mode: String,
    #[serde(default)]
    pub kernel: Option<CouplingKernelFile>,
}

impl CouplingFile {
    pub fn into_relation(
        self,
        m1_first: usize,
        m1_second: usize,
    ) -> Result<CouplingRelation, InterconnectError> {
        match self.mode.as_str() {
            "redheffer" | "feedback" => {
                if m1_first != m1_second {
                    return Err(InterconnectError::PortMismatch(format!(
                        "Redheffer coupling needs equal port widths, got {m1_first} and {m1_second}"
                    )));
                }
                Ok(CouplingRelation::redheffer(m1_first))
            }
            "general" => {
                let kernel = self.kernel.ok_or_else(|| {
                    InterconnectError::PortMismatch(
                        "field 'kernel': required for mode \"general\"".into(),
                    )
                })?;
                CouplingRelation::from_kernel_blocks(
                    &kernel.m11,
                    &kernel.m12,
                    &kernel.m21,
                    &kernel.m22,
                )
            }
            other => Err(InterconnectError::PortMismatch(format!(
                "field 'mode': unknown mode {other:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Field;
    use crate::systems::{simulate_descriptor, simulate_standard, is_scattering_ph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_real(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn_real(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_unitary(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let a = rand_real(rng, n, n);
        Matrix::from_dmatrix(a.dmatrix().clone().qr().q(), Field::Real)
    }

    /// Random scattering-pH system with n states, m1 coupled and m2 external
    /// ports, built from a known witness.
    fn random_ph_partitioned(
        rng: &mut ChaCha8Rng,
        n: usize,
        m1: usize,
        m2: usize,
    ) -> (StandardSystem, StorageWeight) {
        let tol = Tolerances::default();
        let m = m1 + m2;
        let t = rand_unitary(rng, n + m).scale_real(0.85);
        let g = rand_real(rng, n, n).scale_real(0.4);
        let x = g.adjoint().mul(&g).add(&Matrix::identity(n));
        let w = StorageWeight::new(x, &tol).unwrap();
        let (s, si) = w.sqrt_pair(&tol).unwrap();
        let left = Matrix::block_diag(&[&si, &Matrix::identity(m)]);
        let right = Matrix::block_diag(&[&s, &Matrix::identity(m)]);
        let big = left.mul(&t).mul(&right);
        let sys = StandardSystem::new(
            big.slice(0, n, 0, n),
            big.slice(0, n, n, n + m),
            big.slice(n, n + m, 0, n),
            big.slice(n, n + m, n, n + m),
            Some(PortPartition { m1 }),
        )
        .unwrap();
        (sys, w)
    }

    #[test]
    fn redheffer_coupling_is_norm_preserving() {
        let tol = Tolerances::default();
        let c = CouplingRelation::redheffer(2);
        let report = c.classify(&tol).unwrap();
        assert!(report.norm_preserving && report.contractive);
        assert_eq!(report.dim, 4);
        c.check_contractive(&tol).unwrap();
    }

    #[test]
    fn gain_two_coupling_rejected() {
        let tol = Tolerances::default();
        let g = Matrix::identity(2).scale_real(2.0);
        let c = CouplingRelation::from_graph(&g, 1, 1).unwrap();
        assert!(matches!(
            c.check_contractive(&tol),
            Err(InterconnectError::NonContractiveCoupling { .. })
        ));
    }

    #[test]
    fn invertibility_tests_agree() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let d1 = rand_real(&mut rng, 2, 2).scale_real(0.7);
            let d2 = rand_real(&mut rng, 2, 2).scale_real(0.7);
            let r = redheffer_invertibility(&d1, &d2, &tol).unwrap();
            assert!(r.tests_agree);
        }
        // engineered singular pair
        let id = Matrix::identity(2);
        let r = redheffer_invertibility(&id, &id, &tol).unwrap();
        assert!(r.tests_agree);
        assert!(!r.invertible);
        assert_eq!(r.stacked_kernel_dim, 2);
    }

    #[test]
    fn redheffer_reduce_d_free_gives_cross_coupling() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 2;
        let m1 = 1;
        let mk = |rng: &mut ChaCha8Rng| {
            let a = rand_real(rng, n, n).scale_real(0.3);
            let b = rand_real(rng, n, 2 * m1);
            let c = rand_real(rng, 2 * m1, n);
            let d = Matrix::zeros(2 * m1, 2 * m1);
            StandardSystem::new(a, b, c, d, Some(PortPartition { m1 })).unwrap()
        };
        let s1 = mk(&mut rng);
        let s2 = mk(&mut rng);
        let red = redheffer_reduce(&s1, &s2, &tol).unwrap();
        // A_hat = [[A1, B1^1 C2^1], [B2^1 C1^1, A2]] when all D blocks vanish
        let b11 = s1.b.cols_slice(0, m1);
        let b21 = s2.b.cols_slice(0, m1);
        let c11 = s1.c.rows_slice(0, m1);
        let c21 = s2.c.rows_slice(0, m1);
        let expect = Matrix::from_blocks(&[
            vec![&s1.a, &b11.mul(&c21)],
            vec![&b21.mul(&c11), &s2.a],
        ])
        .unwrap();
        assert!(red.system.a.sub(&expect).norm() < 1e-12);
    }

    #[test]
    fn redheffer_reduce_decoupled_second_system() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (s1, _) = random_ph_partitioned(&mut rng, 2, 1, 1);
        // system 2 with all coupling blocks zero
        let a2 = rand_real(&mut rng, 2, 2).scale_real(0.3);
        let b2_data = Matrix::hstack(&[&Matrix::zeros(2, 1), &rand_real(&mut rng, 2, 1)]).unwrap();
        let c2 = Matrix::vstack(&[&Matrix::zeros(1, 2), &rand_real(&mut rng, 1, 2)]).unwrap();
        let d2 = Matrix::zeros(2, 2);
        let s2 = StandardSystem::new(a2.clone(), b2_data, c2, d2, Some(PortPartition { m1: 1 }))
            .unwrap();
        let red = redheffer_reduce(&s1, &s2, &tol).unwrap();
        // no interaction: A_hat block-diagonal
        assert!(red.system.a.slice(0, 2, 2, 4).norm() < 1e-12);
        assert!(red.system.a.slice(2, 4, 0, 2).norm() < 1e-12);
    }

    #[test]
    fn redheffer_reduce_matches_oracle_and_stays_ph() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let (s1, x1) = random_ph_partitioned(&mut rng, 2, 1, 1);
            let (s2, x2) = random_ph_partitioned(&mut rng, 3, 1, 2);
            let red = match redheffer_reduce(&s1, &s2, &tol) {
                Ok(r) => r,
                Err(InterconnectError::CouplingSingular { .. }) => continue,
            e @ Err(_) => {
                    e.unwrap();
                    unreachable!()
                }
            };
            let x10 = rand_real(&mut rng, 2, 1);
            let x20 = rand_real(&mut rng, 3, 1);
            let inputs: Vec<Matrix> = (0..25).map(|_| rand_real(&mut rng, 3, 1)).collect();
            let coupling = CouplingRelation::redheffer(1);
            let oracle =
                elimination_oracle(&s1, &s2, &coupling, &x10, &x20, &inputs, &tol).unwrap();
            let x0 = Matrix::vstack(&[&x10, &x20]).unwrap();
            let reduced = simulate_standard(&red.system, &x0, &inputs).unwrap();
            for k in 0..inputs.len() {
                assert!(
                    reduced.outputs[k].sub(&oracle.outputs[k]).norm() < 1e-8,
                    "output mismatch at step {k}"
                );
                let state = Matrix::vstack(&[&oracle.states1[k], &oracle.states2[k]]).unwrap();
                assert!(reduced.states[k].sub(&state).norm() < 1e-8);
            }
            // the reduction stays scattering pH for diag(X1, X2)
            let x_hat = compose_storage(&x1, &x2);
            let report = is_scattering_ph(&red.system, &x_hat, &tol).unwrap();
            assert!(
                report.passes,
                "LMI residual {:e}",
                report.lmi_lambda_max
            );
        }
    }

    #[test]
    fn closed_loop_d_free_form() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let n = 2;
        let m = 1;
        let mk = |rng: &mut ChaCha8Rng| {
            let a = rand_real(rng, n, n).scale_real(0.3);
            let b = rand_real(rng, n, m);
            let c = rand_real(rng, m, n);
            StandardSystem::new(a, b, c, Matrix::zeros(m, m), None).unwrap()
        };
        let s1 = mk(&mut rng);
        let s2 = mk(&mut rng);
        let r = closed_loop(
            &s1,
            &s2,
            &StorageWeight::identity(n),
            &StorageWeight::identity(n),
            &tol,
        )
        .unwrap();
        let expect = Matrix::from_blocks(&[
            vec![&s1.a, &s1.b.mul(&s2.c)],
            vec![&s2.b.mul(&s1.c), &s2.a],
        ])
        .unwrap();
        assert!(r.a_hat.sub(&expect).norm() < 1e-12);
    }

    #[test]
    fn closed_loop_of_ph_pair_is_contraction() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let (s1, x1) = random_ph_partitioned(&mut rng, 2, 1, 0);
            let (s2, x2) = random_ph_partitioned(&mut rng, 3, 1, 0);
            let r = match closed_loop(&s1, &s2, &x1, &x2, &tol) {
                Ok(r) => r,
                Err(InterconnectError::FeedbackSingular { .. }) => continue,
                e @ Err(_) => {
                    e.unwrap();
                    unreachable!()
                }
            };
            assert!(r.contractive, "lmi residual {:e}", r.lmi_lambda_max);
            assert!(r.weighted_norm <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn closed_loop_with_zero_second_system_decouples() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let a1 = rand_real(&mut rng, 2, 2).scale_real(0.4);
        let s1 = StandardSystem::new(
            a1.clone(),
            rand_real(&mut rng, 2, 1),
            rand_real(&mut rng, 1, 2),
            Matrix::zeros(1, 1),
            None,
        )
        .unwrap();
        let zero = StandardSystem::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
            None,
        )
        .unwrap();
        let r = closed_loop(
            &s1,
            &zero,
            &StorageWeight::identity(2),
            &StorageWeight::identity(2),
            &tol,
        )
        .unwrap();
        let expect = Matrix::block_diag(&[&a1, &Matrix::zeros(2, 2)]);
        assert!(r.a_hat.sub(&expect).norm() < 1e-12);
    }

    #[test]
    fn general_interconnect_redheffer_kernel_constrains_ports() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (s1, _) = random_ph_partitioned(&mut rng, 2, 1, 1);
        let (s2, _) = random_ph_partitioned(&mut rng, 2, 1, 1);
        let coupling = CouplingRelation::redheffer(1);
        let composed =
            general_interconnect(&s1.to_descriptor(), &s2.to_descriptor(), &coupling, &tol)
                .unwrap();
        let x10 = rand_real(&mut rng, 2, 1);
        let x20 = rand_real(&mut rng, 2, 1);
        let inputs: Vec<Matrix> = (0..15).map(|_| rand_real(&mut rng, 2, 1)).collect();
        let x0 = composed
            .initial_state(&x10, &x20, &inputs[0], &tol)
            .unwrap();
        let traj = simulate_descriptor(&composed.system, &x0, &inputs, &tol).unwrap();
        // trajectories satisfy y_1^1 = u_2^1 and u_1^1 = y_2^1 at every step
        for k in 0..inputs.len() {
            let st = &traj.states[k];
            let u1c = composed.extract(st, composed.blocks.u1_coupled);
            let u2c = composed.extract(st, composed.blocks.u2_coupled);
            let y1c = composed.extract(st, composed.blocks.y1_coupled);
            let y2c = composed.extract(st, composed.blocks.y2_coupled);
            assert!(y1c.sub(&u2c).norm() < 1e-9, "step {k}");
            assert!(u1c.sub(&y2c).norm() < 1e-9, "step {k}");
        }
    }

    #[test]
    fn general_interconnect_two_zero_systems() {
        let tol = Tolerances::default();
        let zero = StandardSystem::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(2, 2),
            Some(PortPartition { m1: 1 }),
        )
        .unwrap()
        .to_descriptor();
        let coupling = CouplingRelation::redheffer(1);
        let composed = general_interconnect(&zero, &zero, &coupling, &tol).unwrap();
        let x0 = Matrix::zeros(composed.system.state_dim(), 1);
        let inputs = vec![Matrix::zeros(2, 1); 5];
        let traj = simulate_descriptor(&composed.system, &x0, &inputs, &tol).unwrap();
        for y in &traj.outputs {
            assert!(y.norm() == 0.0);
        }
    }

    #[test]
    fn composed_system_dissipates_joint_storage() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..3 {
            let (s1, x1) = random_ph_partitioned(&mut rng, 2, 1, 1);
            let (s2, x2) = random_ph_partitioned(&mut rng, 2, 1, 1);
            // contractive graph coupling scaled inside the unit ball
            let g = rand_unitary(&mut rng, 2).scale_real(0.8);
            let coupling = CouplingRelation::from_graph(&g, 1, 1).unwrap();
            let composed = match general_interconnect(
                &s1.to_descriptor(),
                &s2.to_descriptor(),
                &coupling,
                &tol,
            ) {
                Ok(c) => c,
                Err(InterconnectError::NotCausal) => continue,
                e @ Err(_) => {
                    e.unwrap();
                    unreachable!()
                }
            };
            let x10 = rand_real(&mut rng, 2, 1);
            let x20 = rand_real(&mut rng, 2, 1);
            let inputs: Vec<Matrix> = (0..40).map(|_| rand_real(&mut rng, 2, 1)).collect();
            let x0 = composed
                .initial_state(&x10, &x20, &inputs[0], &tol)
                .unwrap();
            let traj = simulate_descriptor(&composed.system, &x0, &inputs, &tol).unwrap();
            let n_tot = composed.system.state_dim();
            let mut w = Matrix::zeros(n_tot, n_tot);
            {
                let mut data = w.dmatrix().clone();
                data.view_mut((0, 0), (2, 2)).copy_from(x1.matrix().dmatrix());
                data.view_mut((2, 2), (2, 2)).copy_from(x2.matrix().dmatrix());
                w = Matrix::from_dmatrix(data, Field::Real);
            }
            let margins = crate::systems::dissipation_margins(&traj, &w, &composed.system.e, &tol);
            assert!(
                margins.min_margin >= -1e-8,
                "min margin {}",
                margins.min_margin
            );
        }
    }

    #[test]
    fn oracle_matches_general_interconnect() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (s1, _) = random_ph_partitioned(&mut rng, 2, 1, 1);
        let (s2, _) = random_ph_partitioned(&mut rng, 2, 1, 1);
        let g = rand_unitary(&mut rng, 2).scale_real(0.7);
        let coupling = CouplingRelation::from_graph(&g, 1, 1).unwrap();
        let composed = general_interconnect(
            &s1.to_descriptor(),
            &s2.to_descriptor(),
            &coupling,
            &tol,
        )
        .unwrap();
        let x10 = rand_real(&mut rng, 2, 1);
        let x20 = rand_real(&mut rng, 2, 1);
        let inputs: Vec<Matrix> = (0..20).map(|_| rand_real(&mut rng, 2, 1)).collect();
        let oracle = elimination_oracle(&s1, &s2, &coupling, &x10, &x20, &inputs, &tol).unwrap();
        let x0 = composed
            .initial_state(&x10, &x20, &inputs[0], &tol)
            .unwrap();
        let traj = simulate_descriptor(&composed.system, &x0, &inputs, &tol).unwrap();
        for k in 0..inputs.len() {
            assert!(traj.outputs[k].sub(&oracle.outputs[k]).norm() < 1e-8);
            let x1k = composed.extract(&traj.states[k], composed.blocks.x1);
            let x2k = composed.extract(&traj.states[k], composed.blocks.x2);
            assert!(x1k.sub(&oracle.states1[k]).norm() < 1e-8);
            assert!(x2k.sub(&oracle.states2[k]).norm() < 1e-8);
        }
    }

    #[test]
    fn compose_storage_block_diag() {
        let x1 = StorageWeight::identity(2);
        let x2 = StorageWeight::new(
            Matrix::from_rows_real(&[vec![3.0]]).unwrap(),
            &Tolerances::default(),
        )
        .unwrap();
        let x = compose_storage(&x1, &x2);
        assert_eq!(x.dim(), 3);
        assert_eq!(x.matrix().at(2, 2).re, 3.0);
    }

    #[test]
    fn coupling_file_modes() {
        let file: CouplingFile =
            serde_json::from_str(r#"{"mode": "redheffer", "kernel": null}"#).unwrap();
        let rel = file.into_relation(2, 2).unwrap();
        assert_eq!(rel.kernel_rows(), 4);
        let bad: CouplingFile = serde_json::from_str(r#"{"mode": "general"}"#).unwrap();
        assert!(bad.into_relation(1, 1).is_err());
    }
}
