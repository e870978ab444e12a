//! Shared deterministic generators for the integration suites.

#![allow(dead_code)]

use dtph::linalg::{op_norm2, Field, Matrix, Tolerances};
use dtph::subspace::Subspace;
use dtph::systems::{
    reduce_to_standard, DescriptorSystem, PortPartition, StandardSystem, StorageWeight,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, complex: bool) -> Matrix {
    if complex {
        Matrix::from_fn_complex(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    } else {
        Matrix::from_fn_real(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }
}

pub fn rand_vector(rng: &mut ChaCha8Rng, n: usize, complex: bool) -> Matrix {
    rand_matrix(rng, n, 1, complex)
}

pub fn rand_unitary(rng: &mut ChaCha8Rng, n: usize, complex: bool) -> Matrix {
    let a = rand_matrix(rng, n, n, complex);
    let field = if complex { Field::Complex } else { Field::Real };
    Matrix::from_dmatrix(a.dmatrix().clone().qr().q(), field)
}

/// Random matrix rescaled to the exact operator norm `target`.
pub fn rand_with_norm(rng: &mut ChaCha8Rng, n: usize, complex: bool, target: f64) -> Matrix {
    let a = rand_matrix(rng, n, n, complex);
    let nrm = op_norm2(&a).max(1e-8);
    a.scale_real(target / nrm)
}

pub fn rand_hpd(rng: &mut ChaCha8Rng, n: usize, complex: bool) -> Matrix {
    let g = rand_matrix(rng, n, n, complex).scale_real(0.6);
    g.adjoint().mul(&g).add(&Matrix::identity(n))
}

/// Graph of `W` with `W + W^H >= 0` (Gram part plus a skew part).
pub fn rand_monotone_graph(rng: &mut ChaCha8Rng, n: usize, complex: bool) -> Subspace {
    let g = rand_matrix(rng, n, n, complex);
    let s = rand_matrix(rng, n, n, complex);
    let w = g.adjoint().mul(&g).add(&s.sub(&s.adjoint()));
    Subspace::graph_of(&w)
}

/// Scattering-pH system with a known witness: the block matrix is a
/// similarity `diag(X^{-1/2}, I) T diag(X^{1/2}, I)` of a strict contraction.
pub fn rand_scattering_ph(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    complex: bool,
    m1: Option<usize>,
) -> (StandardSystem, StorageWeight) {
    let tol = Tolerances::default();
    let t = rand_unitary(rng, n + m, complex).scale_real(rng.random_range(0.6..0.92));
    let x = rand_hpd(rng, n, complex);
    let w = StorageWeight::new(x, &tol).expect("generated weight is HPD");
    let (s, si) = w.sqrt_pair(&tol).expect("HPD sqrt");
    let left = Matrix::block_diag(&[&si, &Matrix::identity(m)]);
    let right = Matrix::block_diag(&[&s, &Matrix::identity(m)]);
    let big = left.mul(&t).mul(&right);
    let sys = StandardSystem::new(
        big.slice(0, n, 0, n),
        big.slice(0, n, n, n + m),
        big.slice(n, n + m, 0, n),
        big.slice(n, n + m, n, n + m),
        m1.map(|m1| PortPartition { m1 }),
    )
    .expect("generated dimensions are consistent");
    (sys, w)
}

/// Index-1 descriptor system built from a block staircase form and disguised
/// by unitary transformations on both sides.
pub fn rand_index1_descriptor(
    rng: &mut ChaCha8Rng,
    dynamic: usize,
    algebraic: usize,
    m: usize,
    p_out: usize,
    complex: bool,
) -> DescriptorSystem {
    let n = dynamic + algebraic;
    // invertible leading block of E
    let diag: Vec<f64> = (0..dynamic).map(|_| rng.random_range(0.5..2.0)).collect();
    let sigma = Matrix::from_fn_real(dynamic, dynamic, |i, j| if i == j { diag[i] } else { 0.0 });
    let e0 = Matrix::block_diag(&[&sigma, &Matrix::zeros(algebraic, algebraic)]);
    // A with invertible (2,2) block
    let a11 = rand_matrix(rng, dynamic, dynamic, complex).scale_real(0.5);
    let a12 = rand_matrix(rng, dynamic, algebraic, complex).scale_real(0.5);
    let a21 = rand_matrix(rng, algebraic, dynamic, complex).scale_real(0.5);
    let a22 = rand_matrix(rng, algebraic, algebraic, complex)
        .scale_real(0.3)
        .add(&Matrix::identity(algebraic));
    let a0 = Matrix::from_blocks(&[vec![&a11, &a12], vec![&a21, &a22]]).expect("blocks");
    let b0 = rand_matrix(rng, n, m, complex);
    let c0 = rand_matrix(rng, p_out, n, complex);
    let d0 = rand_matrix(rng, p_out, m, complex);
    let u = rand_unitary(rng, n, complex);
    let v = rand_unitary(rng, n, complex);
    DescriptorSystem::new(
        u.mul(&e0).mul(&v.adjoint()),
        u.mul(&a0).mul(&v.adjoint()),
        u.mul(&b0),
        c0.mul(&v.adjoint()),
        d0,
        None,
    )
    .expect("generated dimensions are consistent")
}

/// Pencil with a nilpotent part of Kronecker index 2, unitarily disguised.
pub fn index2_pencil(rng: &mut ChaCha8Rng, extra: usize) -> (Matrix, Matrix) {
    let nil = Matrix::from_rows_real(&[vec![0.0, 1.0], vec![0.0, 0.0]]).expect("2x2");
    let lead = Matrix::identity(extra);
    let e0 = Matrix::block_diag(&[&lead, &nil]);
    let a_dyn = rand_matrix(rng, extra, extra, false).scale_real(0.5);
    let a0 = Matrix::block_diag(&[&a_dyn, &Matrix::identity(2)]);
    let n = extra + 2;
    let u = rand_unitary(rng, n, false);
    let v = rand_unitary(rng, n, false);
    (
        u.mul(&e0).mul(&v.adjoint()),
        u.mul(&a0).mul(&v.adjoint()),
    )
}

/// Consistent initial state for a descriptor system given the first input.
pub fn consistent_x0(
    sys: &DescriptorSystem,
    rng: &mut ChaCha8Rng,
    u0: &Matrix,
    complex: bool,
    tol: &Tolerances,
) -> Matrix {
    let red = reduce_to_standard(sys, tol).expect("index <= 1 by construction");
    let xt0 = rand_vector(rng, red.standard.state_dim(), complex);
    red.phi.mul(&xt0).add(&red.psi.mul(u0))
}

pub fn relative_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).norm() / (1.0 + b.norm())
}
