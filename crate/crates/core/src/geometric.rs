//! Coordinate-free discrete-time pH systems: a maximal norm-preserving
//! relation routes `(x_{k+1}, f_R, y_k)` against `(x_k, e_R, u_k)` and a
//! maximal contractive relation closes the resistive port `(f_R, e_R)`.
//!
//! Every solution satisfies the power balance
//! `|x_{k+1}|^2 + |f_R|^2 + |y_k|^2 = |x_k|^2 + |e_R|^2 + |u_k|^2`,
//! and contractivity of the resistive closure turns it into the scattering
//! dissipation inequality.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, psd_sqrt, LinalgError, Matrix, Tolerances};
use crate::subspace::{
    as_graph, cayley, classify, compose, ClassificationReport, Subspace, SubspaceError,
};
use crate::systems::{is_scattering_ph, StandardSystem, StorageWeight, SystemError};

#[derive(Debug, Error)]
pub enum GeometricError {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: String,
        expected: String,
        found: String,
    },
    #[error("step {step}: geometric step has no unique solution ({kernel_dim}-dimensional kernel)")]
    NonUniqueStep { step: usize, kernel_dim: usize },
    #[error("step {step}: geometric step equations are inconsistent (residual {residual:e})")]
    InconsistentStep { step: usize, residual: f64 },
    #[error("system is not scattering pH for the given weight (LMI residual {lmi_lambda_max:e})")]
    NotScatteringPh { lmi_lambda_max: f64 },
    #[error("relation is not monotone (witness violation {violation:e})")]
    NotMonotone { violation: f64 },
    #[error("relation is not Lagrangian")]
    NotLagrangian,
    #[error("discretization step must be positive, got {h}")]
    NonPositiveStep { h: f64 },
    #[error("discretized relation failed the contractivity assertion")]
    DiscretizationNotContractive,
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Geometric pH system per the triple `(n, r, m)` with routing relation `N`
/// in `K^{n+r+m} x K^{n+r+m}` and resistive closure `C` in `K^r x K^r`.
#[derive(Debug, Clone)]
pub struct GeometricPh {
    n: usize,
    r: usize,
    m: usize,
    routing: Subspace,
    resistive: Subspace,
}

impl GeometricPh {
    pub fn new(
        n: usize,
        r: usize,
        m: usize,
        routing: Subspace,
        resistive: Subspace,
    ) -> Result<Self, GeometricError> {
        let total = n + r + m;
        if routing.p() != total || routing.q() != total {
            return Err(GeometricError::Dimension {
                context: "N".into(),
                expected: format!("relation in K^{total} x K^{total}"),
                found: format!("K^{} x K^{}", routing.p(), routing.q()),
            });
        }
        if resistive.p() != r || resistive.q() != r {
            return Err(GeometricError::Dimension {
                context: "C".into(),
                expected: format!("relation in K^{r} x K^{r}"),
                found: format!("K^{} x K^{}", resistive.p(), resistive.q()),
            });
        }
        Ok(GeometricPh {
            n,
            r,
            m,
            routing,
            resistive,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn resistive_dim(&self) -> usize {
        self.r
    }

    pub fn external_dim(&self) -> usize {
        self.m
    }

    pub fn routing(&self) -> &Subspace {
        &self.routing
    }

    pub fn resistive(&self) -> &Subspace {
        &self.resistive
    }
}

/// Structural validation outcome; violations are reported, not thrown.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub routing_norm_preserving: bool,
    pub routing_maximal: bool,
    pub resistive_contractive: bool,
    pub resistive_maximal: bool,
    pub routing_report: ClassificationReport,
    pub resistive_report: ClassificationReport,
}

pub fn validate(g: &GeometricPh, tol: &Tolerances) -> Result<ValidationReport, GeometricError> {
    let routing_report = classify(&g.routing, tol)?;
    let resistive_report = classify(&g.resistive, tol)?;
    let routing_norm_preserving = routing_report.norm_preserving;
    let routing_maximal = routing_report.dim == g.n + g.r + g.m;
    let resistive_contractive = resistive_report.contractive;
    let resistive_maximal = resistive_report.dim == g.r;
    Ok(ValidationReport {
        valid: routing_norm_preserving
            && routing_maximal
            && resistive_contractive
            && resistive_maximal,
        routing_norm_preserving,
        routing_maximal,
        resistive_contractive,
        resistive_maximal,
        routing_report,
        resistive_report,
    })
}

/// One resolved step of the geometric inclusion.
#[derive(Debug, Clone)]
pub struct GeoStepResult {
    pub x_next: Matrix,
    pub y: Matrix,
    pub f_res: Matrix,
    pub e_res: Matrix,
    /// `| |x+|^2 + |f|^2 + |y|^2 - |x|^2 - |e|^2 - |u|^2 |`
    pub power_residual: f64,
}

/// Precomputed square system for repeated stepping: the kernel constraints
/// of `N` and `C` assembled over the unknowns `(x_next, f, y, e)`.
struct StepOperator {
    n: usize,
    r: usize,
    m: usize,
    lhs: Matrix,
    k2x: Matrix,
    k2u: Matrix,
    rows_c: usize,
}

impl StepOperator {
    fn new(g: &GeometricPh) -> Result<StepOperator, GeometricError> {
        let (n, r, m) = (g.n, g.r, g.m);
        let kn = g.routing.to_kernel();
        let kc = g.resistive.to_kernel();
        // K1 (x+, f, y) + K2 (x, e, u) = 0 from N; K1_C f + K2_C e = 0 from C.
        let k2x = kn.k2.cols_slice(0, n);
        let k2e = kn.k2.cols_slice(n, n + r);
        let k2u = kn.k2.cols_slice(n + r, n + r + m);
        let rows_c = kc.k1.rows();
        let top = Matrix::hstack(&[&kn.k1, &k2e])?;
        let bottom = Matrix::hstack(&[
            &Matrix::zeros(rows_c, n),
            &kc.k1,
            &Matrix::zeros(rows_c, m),
            &kc.k2,
        ])?;
        Ok(StepOperator {
            n,
            r,
            m,
            lhs: Matrix::vstack(&[&top, &bottom])?,
            k2x,
            k2u,
            rows_c,
        })
    }

    fn solve(
        &self,
        x: &Matrix,
        u: &Matrix,
        tol: &Tolerances,
        step_no: usize,
    ) -> Result<GeoStepResult, GeometricError> {
        let (n, r, m) = (self.n, self.r, self.m);
        if x.rows() != n || x.cols() != 1 {
            return Err(GeometricError::Dimension {
                context: "x".into(),
                expected: format!("{n}x1"),
                found: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        if u.rows() != m || u.cols() != 1 {
            return Err(GeometricError::Dimension {
                context: "u".into(),
                expected: format!("{m}x1"),
                found: format!("{}x{}", u.rows(), u.cols()),
            });
        }
        let rhs_top = self.k2x.mul(x).add(&self.k2u.mul(u)).neg();
        let rhs = Matrix::vstack(&[&rhs_top, &Matrix::zeros(self.rows_c, 1)])?;
        let sol = match linalg::solve_square(&self.lhs, &rhs, tol) {
            Ok(out) => out.x,
            Err(LinalgError::NonUnique { kernel_dim }) => {
                return Err(GeometricError::NonUniqueStep {
                    step: step_no,
                    kernel_dim,
                })
            }
            Err(LinalgError::Inconsistent { residual, .. }) => {
                return Err(GeometricError::InconsistentStep {
                    step: step_no,
                    residual,
                })
            }
            Err(e) => return Err(e.into()),
        };
        let x_next = sol.rows_slice(0, n);
        let f_res = sol.rows_slice(n, n + r);
        let y = sol.rows_slice(n + r, n + r + m);
        let e_res = sol.rows_slice(n + r + m, n + 2 * r + m);
        let power_residual = (x_next.norm().powi(2) + f_res.norm().powi(2) + y.norm().powi(2)
            - x.norm().powi(2)
            - e_res.norm().powi(2)
            - u.norm().powi(2))
        .abs();
        Ok(GeoStepResult {
            x_next,
            y,
            f_res,
            e_res,
            power_residual,
        })
    }
}

/// Solve the stacked kernel system of `N` and `C` for
/// `(x_next, f, y, e)` given `(x, u)`.
pub fn step(
    g: &GeometricPh,
    x: &Matrix,
    u: &Matrix,
    tol: &Tolerances,
) -> Result<GeoStepResult, GeometricError> {
    StepOperator::new(g)?.solve(x, u, tol, 0)
}

/// Geometric trajectory with power residuals and passivity margins.
#[derive(Debug, Clone)]
pub struct GeoTrajectory {
    pub states: Vec<Matrix>,
    pub inputs: Vec<Matrix>,
    pub outputs: Vec<Matrix>,
    pub resistive_flows: Vec<Matrix>,
    pub resistive_efforts: Vec<Matrix>,
    pub power_residuals: Vec<f64>,
    /// `|u_k|^2 - |y_k|^2 - (|x_{k+1}|^2 - |x_k|^2)`, nonnegative for valid
    /// systems up to roundoff.
    pub margins: Vec<f64>,
}

impl GeoTrajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_power_residual(&self) -> f64 {
        self.power_residuals.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn simulate(
    g: &GeometricPh,
    x0: &Matrix,
    inputs: &[Matrix],
    tol: &Tolerances,
) -> Result<GeoTrajectory, GeometricError> {
    let op = StepOperator::new(g)?;
    let mut states = vec![x0.clone()];
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut flows = Vec::with_capacity(inputs.len());
    let mut efforts = Vec::with_capacity(inputs.len());
    let mut power_residuals = Vec::with_capacity(inputs.len());
    let mut margins = Vec::with_capacity(inputs.len());
    for (k, u) in inputs.iter().enumerate() {
        let x = states.last().expect("nonempty").clone();
        let out = op.solve(&x, u, tol, k)?;
        margins.push(
            u.norm().powi(2) - out.y.norm().powi(2)
                - (out.x_next.norm().powi(2) - x.norm().powi(2)),
        );
        power_residuals.push(out.power_residual);
        outputs.push(out.y);
        flows.push(out.f_res);
        efforts.push(out.e_res);
        states.push(out.x_next);
    }
    Ok(GeoTrajectory {
        states,
        inputs: inputs.to_vec(),
        outputs,
        resistive_flows: flows,
        resistive_efforts: efforts,
        power_residuals,
        margins,
    })
}

fn permutation(rows: &[usize]) -> Matrix {
    Matrix::from_fn_real(rows.len(), rows.len(), |i, j| {
        if rows[i] == j {
            1.0
        } else {
            0.0
        }
    })
}

/// Halmos dilation of a scattering-pH system into a geometric one.
///
/// `T = diag(X^{1/2}, I) [A B; C D] diag(X^{-1/2}, I)` is a contraction; its
/// unitary dilation `U = [[T, (I-TT^H)^{1/2}], [(I-T^H T)^{1/2}, -T^H]]` acts
/// on `(xi, u, e)` and the coordinates are reordered into the geometric pair
/// convention. The resistive port has size `r = n + m` and is closed by the
/// zero graph `e_R = 0`, which makes the dilation exact: simulating from
/// `xi_0 = X^{1/2} x_0` reproduces the standard simulation through `y` and
/// `xi_k = X^{1/2} x_k`.
pub fn dilate(
    sys: &StandardSystem,
    weight: &StorageWeight,
    tol: &Tolerances,
) -> Result<GeometricPh, GeometricError> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    if sys.output_dim() != m {
        return Err(GeometricError::Dimension {
            context: "dilate".into(),
            expected: format!("square port dimensions ({m} outputs)"),
            found: format!("{}", sys.output_dim()),
        });
    }
    let report = is_scattering_ph(sys, weight, tol)?;
    if !report.passes {
        return Err(GeometricError::NotScatteringPh {
            lmi_lambda_max: report.lmi_lambda_max,
        });
    }
    let (s, si) = weight.sqrt_pair(tol)?;
    let left = Matrix::block_diag(&[&s, &Matrix::identity(m)]);
    let right = Matrix::block_diag(&[&si, &Matrix::identity(m)]);
    let t = left.mul(&sys.block_matrix()).mul(&right);
    let nt = n + m;
    let id = Matrix::identity(nt);
    let defect_in = psd_sqrt(&id.sub(&t.adjoint().mul(&t)), tol)?;
    let defect_out = psd_sqrt(&id.sub(&t.mul(&t.adjoint())), tol)?;
    let u_dil = Matrix::from_blocks(&[
        vec![&t, &defect_out],
        vec![&defect_in, &t.adjoint().neg()],
    ])?;

    let r = nt;
    // U input order (xi, u, e) from geometric order (x, e, u):
    let mut in_rows = Vec::with_capacity(n + r + m);
    in_rows.extend(0..n); // xi
    in_rows.extend(n + r..n + r + m); // u
    in_rows.extend(n..n + r); // e
    let p_in = permutation(&in_rows);
    // geometric order (x+, f, y) from U output order (xi+, y, f):
    let mut out_rows = Vec::with_capacity(n + r + m);
    out_rows.extend(0..n); // xi+
    out_rows.extend(n + m..n + m + r); // f
    out_rows.extend(n..n + m); // y
    let p_out = permutation(&out_rows);

    let u_geo = p_out.mul(&u_dil).mul(&p_in);
    let routing = Subspace::from_image(&u_geo, &Matrix::identity(n + r + m))?;
    let resistive = Subspace::from_image(&Matrix::identity(r), &Matrix::zeros(r, r))?;
    GeometricPh::new(n, r, m, routing, resistive)
}

/// Result of a trapezoidal discretization.
#[derive(Debug, Clone)]
pub struct DiscretizeOutcome {
    pub relation: Subspace,
    pub report: ClassificationReport,
}

/// Trapezoidal (Tustin) discretization of the continuous dH inclusion
/// `(z, -z') in M^{-1} L`: returns the Cayley transform
/// `C_{h/2,1}(M^{-1} L)` relating `(z_k, z_{k+1})`.
///
/// `M` must be monotone; `L` defaults to the identity graph (the relation is
/// then asserted contractive). For a general Lagrangian `L`, the
/// classification is reported, not asserted.
pub fn discretize_dh(
    m: &Subspace,
    l: Option<&Subspace>,
    h: f64,
    tol: &Tolerances,
) -> Result<DiscretizeOutcome, GeometricError> {
    if h <= 0.0 || !h.is_finite() {
        return Err(GeometricError::NonPositiveStep { h });
    }
    let m_report = classify(m, tol)?;
    if !m_report.monotone {
        let violation = m_report
            .witness_monotone
            .as_ref()
            .map(|z| {
                let v = m.gen_p().mul(z);
                let w = m.gen_q().mul(z);
                -(w.adjoint().mul(&v).at(0, 0).re * 2.0)
            })
            .unwrap_or(f64::NAN);
        return Err(GeometricError::NotMonotone { violation });
    }
    let identity_l;
    let (l_rel, l_is_identity) = match l {
        Some(l) => {
            if !classify(l, tol)?.lagrangian {
                return Err(GeometricError::NotLagrangian);
            }
            (l, false)
        }
        None => {
            identity_l = Subspace::identity_graph(m.q());
            (&identity_l, true)
        }
    };
    let composed = compose(m, l_rel)?;
    let relation = cayley(&composed, Complex64::new(h / 2.0, 0.0), Complex64::new(1.0, 0.0))?;
    let report = classify(&relation, tol)?;
    if l_is_identity && !report.contractive {
        return Err(GeometricError::DiscretizationNotContractive);
    }
    Ok(DiscretizeOutcome { relation, report })
}

/// Advance `z` through a contractive graph relation.
pub fn step_relation(s: &Subspace, z: &Matrix, tol: &Tolerances) -> Result<Matrix, GeometricError> {
    let t = as_graph(s, tol)?;
    Ok(t.mul(z))
}

// ---------------------------------------------------------------------------
// JSON: {"n": ., "r": ., "m": ., "N": <Subspace>, "C": <Subspace>}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GeometricRepr {
    n: usize,
    r: usize,
    m: usize,
    #[serde(rename = "N")]
    routing: Subspace,
    #[serde(rename = "C")]
    resistive: Subspace,
}

impl Serialize for GeometricPh {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GeometricRepr {
            n: self.n,
            r: self.r,
            m: self.m,
            routing: self.routing.clone(),
            resistive: self.resistive.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GeometricPh {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = GeometricRepr::deserialize(deserializer)?;
        GeometricPh::new(repr.n, repr.r, repr.m, repr.routing, repr.resistive)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Field;
    use crate::systems::simulate_standard;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_real(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn_real(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_unitary(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let a = rand_real(rng, n, n);
        Matrix::from_dmatrix(a.dmatrix().clone().qr().q(), Field::Real)
    }

    fn zero_resistive(r: usize) -> Subspace {
        Subspace::from_image(&Matrix::identity(r), &Matrix::zeros(r, r)).unwrap()
    }

    #[test]
    fn validate_unitary_routing() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = rand_unitary(&mut rng, 4);
        let g = GeometricPh::new(2, 1, 1, Subspace::graph_of(&u), zero_resistive(1)).unwrap();
        let report = validate(&g, &tol).unwrap();
        assert!(report.valid);
    }

    #[test]
    fn validate_rejects_contraction_routing() {
        let tol = Tolerances::default();
        let half = Matrix::identity(3).scale_real(0.5);
        let g = GeometricPh::new(1, 1, 1, Subspace::graph_of(&half), zero_resistive(1)).unwrap();
        let report = validate(&g, &tol).unwrap();
        assert!(!report.valid);
        assert!(!report.routing_norm_preserving);
    }

    #[test]
    fn validate_rejects_expansive_resistor() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = rand_unitary(&mut rng, 3);
        let two = Matrix::identity(1).scale_real(2.0);
        let g = GeometricPh::new(1, 1, 1, Subspace::graph_of(&u), Subspace::graph_of(&two))
            .unwrap();
        let report = validate(&g, &tol).unwrap();
        assert!(!report.valid);
        assert!(!report.resistive_contractive);
    }

    #[test]
    fn step_swap_routing() {
        // N = graph of the swap on (x, u): from x = 1, u = 2 the step gives
        // x+ = 2, y = 1 and the power balance 4 + 1 = 1 + 4.
        let tol = Tolerances::default();
        let swap = Matrix::from_rows_real(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = GeometricPh::new(1, 0, 1, Subspace::graph_of(&swap), zero_resistive(0)).unwrap();
        let out = step(&g, &Matrix::scalar_real(1.0), &Matrix::scalar_real(2.0), &tol).unwrap();
        assert!((out.x_next.at(0, 0).re - 2.0).abs() < 1e-12);
        assert!((out.y.at(0, 0).re - 1.0).abs() < 1e-12);
        assert!(out.power_residual < 1e-12);
    }

    #[test]
    fn step_identity_routing() {
        let tol = Tolerances::default();
        let g = GeometricPh::new(
            1,
            0,
            1,
            Subspace::identity_graph(2),
            zero_resistive(0),
        )
        .unwrap();
        let out = step(&g, &Matrix::scalar_real(0.7), &Matrix::scalar_real(-0.2), &tol).unwrap();
        assert!((out.x_next.at(0, 0).re - 0.7).abs() < 1e-12);
        assert!((out.y.at(0, 0).re - -0.2).abs() < 1e-12);
    }

    #[test]
    fn norm_constant_under_zero_input() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // block-diagonal unitary acting trivially across ports
        let u_state = rand_unitary(&mut rng, 2);
        let u_port = rand_unitary(&mut rng, 1);
        let u = Matrix::block_diag(&[&u_state, &u_port]);
        let g = GeometricPh::new(2, 0, 1, Subspace::graph_of(&u), zero_resistive(0)).unwrap();
        let x0 = Matrix::col_from_real(&[0.6, -0.8]);
        let inputs = vec![Matrix::zeros(1, 1); 10];
        let traj = simulate(&g, &x0, &inputs, &tol).unwrap();
        for x in &traj.states {
            assert!((x.norm() - 1.0).abs() < 1e-10);
        }
        for m in &traj.margins {
            assert!(m.abs() < 1e-10);
        }
    }

    fn random_scattering_ph(
        rng: &mut ChaCha8Rng,
        n: usize,
        m: usize,
    ) -> (StandardSystem, StorageWeight) {
        let tol = Tolerances::default();
        let t = rand_unitary(rng, n + m).scale_real(0.9);
        let g = rand_real(rng, n, n).scale_real(0.5);
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
            None,
        )
        .unwrap();
        (sys, w)
    }

    #[test]
    fn dilation_of_unitary_has_zero_flows() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = rand_unitary(&mut rng, 3);
        let sys = StandardSystem::new(
            u.slice(0, 2, 0, 2),
            u.slice(0, 2, 2, 3),
            u.slice(2, 3, 0, 2),
            u.slice(2, 3, 2, 3),
            None,
        )
        .unwrap();
        let g = dilate(&sys, &StorageWeight::identity(2), &tol).unwrap();
        assert!(validate(&g, &tol).unwrap().valid);
        let x0 = Matrix::col_from_real(&[1.0, 0.0]);
        let inputs: Vec<Matrix> = (0..6).map(|_| rand_real(&mut rng, 1, 1)).collect();
        let traj = simulate(&g, &x0, &inputs, &tol).unwrap();
        for f in &traj.resistive_flows {
            assert!(f.norm() < 1e-10);
        }
    }

    #[test]
    fn dilation_reproduces_standard_simulation() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let (sys, w) = random_scattering_ph(&mut rng, 3, 2);
            let g = dilate(&sys, &w, &tol).unwrap();
            assert!(validate(&g, &tol).unwrap().valid);
            let x0 = rand_real(&mut rng, 3, 1);
            let inputs: Vec<Matrix> = (0..30).map(|_| rand_real(&mut rng, 2, 1)).collect();
            let std_traj = simulate_standard(&sys, &x0, &inputs).unwrap();
            let (s, _) = w.sqrt_pair(&tol).unwrap();
            let geo_traj = simulate(&g, &s.mul(&x0), &inputs, &tol).unwrap();
            for k in 0..inputs.len() {
                assert!(
                    geo_traj.outputs[k].sub(&std_traj.outputs[k]).norm() < 1e-9,
                    "output mismatch at step {k}"
                );
                assert!(
                    geo_traj.states[k].sub(&s.mul(&std_traj.states[k])).norm() < 1e-9,
                    "state mismatch at step {k}"
                );
                assert!(geo_traj.power_residuals[k] < 1e-9);
                assert!(geo_traj.margins[k] >= -1e-9);
            }
        }
    }

    #[test]
    fn dilation_of_zero_system_swaps_ports() {
        // T = 0: the dilation routes all incoming power to the resistive
        // port, x+ = 0, y = 0, |f|^2 = |x|^2 + |u|^2.
        let tol = Tolerances::default();
        let sys = StandardSystem::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
            None,
        )
        .unwrap();
        let g = dilate(&sys, &StorageWeight::identity(2), &tol).unwrap();
        assert!(validate(&g, &tol).unwrap().valid);
        let x = Matrix::col_from_real(&[0.6, -0.8]);
        let u = Matrix::scalar_real(2.0);
        let out = step(&g, &x, &u, &tol).unwrap();
        assert!(out.x_next.norm() < 1e-12);
        assert!(out.y.norm() < 1e-12);
        assert!((out.f_res.norm().powi(2) - (x.norm().powi(2) + u.norm().powi(2))).abs() < 1e-12);
    }

    #[test]
    fn dilation_rejects_non_ph_input() {
        let tol = Tolerances::default();
        let sys = StandardSystem::new(
            Matrix::scalar_real(0.0),
            Matrix::scalar_real(0.0),
            Matrix::scalar_real(0.0),
            Matrix::scalar_real(2.0),
            None,
        )
        .unwrap();
        assert!(matches!(
            dilate(&sys, &StorageWeight::identity(1), &tol),
            Err(GeometricError::NotScatteringPh { .. })
        ));
    }

    #[test]
    fn discretize_skew_matches_matrix_cayley() {
        let tol = Tolerances::default();
        let w = Matrix::from_rows_real(&[vec![0.0, 1.3], vec![-1.3, 0.0]]).unwrap();
        let m = Subspace::graph_of(&w);
        let out = discretize_dh(&m, None, 2.0, &tol).unwrap();
        assert!(out.report.norm_preserving);
        // matrix oracle: z+ = (W - I)(W + I)^{-1} z for h = 2
        let id = Matrix::identity(2);
        let inv = linalg::solve_square(&w.add(&id), &id, &tol).unwrap().x;
        let t = w.sub(&id).mul(&inv);
        assert!(out.relation.set_eq(&Subspace::graph_of(&t), &tol));
    }

    #[test]
    fn discretize_fully_dissipative() {
        let tol = Tolerances::default();
        let m = Subspace::identity_graph(2);
        let out = discretize_dh(&m, None, 2.0, &tol).unwrap();
        assert!(out.report.contractive);
        // graph of the zero map
        let t = as_graph(&out.relation, &tol).unwrap();
        assert!(t.norm() < 1e-12);
    }

    #[test]
    fn discretize_monotone_random() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &h in &[0.01, 0.1, 1.0, 10.0] {
            for _ in 0..5 {
                let g = rand_real(&mut rng, 3, 3);
                let skew = rand_real(&mut rng, 3, 3);
                let w = g.adjoint().mul(&g).add(&skew.sub(&skew.adjoint()));
                let m = Subspace::graph_of(&w);
                let out = discretize_dh(&m, None, h, &tol).unwrap();
                assert!(out.report.contractive, "h = {h}");
                // matrix bilinear oracle
                let a = h / 2.0;
                let id = Matrix::identity(3);
                let inv = linalg::solve_square(&w.add(&id.scale_real(a)), &id, &tol)
                    .unwrap()
                    .x;
                let t = w.sub(&id.scale_real(a)).mul(&inv);
                assert!(out.relation.set_eq(&Subspace::graph_of(&t), &tol));
            }
        }
    }

    #[test]
    fn discretize_rejects_non_monotone() {
        let tol = Tolerances::default();
        let m = Subspace::graph_of(&Matrix::identity(2).scale_real(-1.0));
        assert!(matches!(
            discretize_dh(&m, None, 1.0, &tol),
            Err(GeometricError::NotMonotone { .. })
        ));
    }

    #[test]
    fn discretize_rejects_non_lagrangian_l() {
        let tol = Tolerances::default();
        let m = Subspace::identity_graph(2);
        let skew = Matrix::from_rows_real(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let l = Subspace::graph_of(&skew);
        assert!(matches!(
            discretize_dh(&m, Some(&l), 1.0, &tol),
            Err(GeometricError::NotLagrangian)
        ));
    }

    #[test]
    fn discretize_with_lagrangian_l_reports_only() {
        // symmetric graph is Lagrangian; the outcome is classified but not
        // asserted contractive
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let g = rand_real(&mut rng, 2, 2);
        let w = g.adjoint().mul(&g).add(&Matrix::identity(2));
        let m = Subspace::graph_of(&w);
        let sym = rand_real(&mut rng, 2, 2);
        let l = Subspace::graph_of(&sym.add(&sym.adjoint()));
        let out = discretize_dh(&m, Some(&l), 0.5, &tol).unwrap();
        assert_eq!(out.relation.p(), 2);
        // report present regardless of which flags hold
        let _ = out.report.contractive;
    }

    #[test]
    fn step_relation_cases() {
        let tol = Tolerances::default();
        let zero = Subspace::graph_of(&Matrix::zeros(2, 2));
        let z = Matrix::col_from_real(&[1.0, 2.0]);
        assert!(step_relation(&zero, &z, &tol).unwrap().norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = rand_unitary(&mut rng, 2);
        let s = Subspace::graph_of(&u);
        let z_next = step_relation(&s, &z, &tol).unwrap();
        assert!((z_next.norm() - z.norm()).abs() < 1e-12);
    }

    #[test]
    fn iterated_relation_norms_non_increasing() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let g = rand_real(&mut rng, 3, 3);
        let skew = rand_real(&mut rng, 3, 3);
        let w = g.adjoint().mul(&g).add(&skew.sub(&skew.adjoint()));
        let out = discretize_dh(&Subspace::graph_of(&w), None, 0.5, &tol).unwrap();
        let mut z = Matrix::col_from_real(&[1.0, -1.0, 0.5]);
        let mut last = z.norm();
        for _ in 0..100 {
            z = step_relation(&out.relation, &z, &tol).unwrap();
            assert!(z.norm() <= last * (1.0 + 1e-12));
            last = z.norm();
        }
    }

    #[test]
    fn geometric_json_round_trip() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let u = rand_unitary(&mut rng, 4);
        let g = GeometricPh::new(2, 1, 1, Subspace::graph_of(&u), zero_resistive(1)).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: GeometricPh = serde_json::from_str(&s).unwrap();
        assert!(back.routing().set_eq(g.routing(), &tol));
        assert_eq!(back.state_dim(), 2);
    }
}
