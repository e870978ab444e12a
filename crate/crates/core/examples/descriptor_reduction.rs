//! Causality of a descriptor system (Kronecker index at most one), staircase
//! reduction to standard form, and cross-checked simulation.
//!
//! Run with: cargo run --example descriptor_reduction

use dtph::linalg::{Matrix, Tolerances};
use dtph::systems::{
    index_le_one, reduce_to_standard, simulate_descriptor, simulate_standard, DescriptorSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // block system: one dynamic state, one purely algebraic state
    //   x1+ = 0.6 x1 + u,   0 = x2 - 2 u   (so x2 = 2 u at every step)
    let e = Matrix::from_rows_real(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let a = Matrix::from_rows_real(&[vec![0.6, 0.0], vec![0.0, 1.0]]).unwrap();
    let b = Matrix::from_rows_real(&[vec![1.0], vec![-2.0]]).unwrap();
    let c = Matrix::from_rows_real(&[vec![1.0, 1.0]]).unwrap();
    let d = Matrix::zeros(1, 1);

    // disguise the block structure with random orthogonal transformations
    let q1 = Matrix::from_dmatrix(
        Matrix::from_fn_real(2, 2, |_, _| rng.random_range(-1.0..1.0))
            .dmatrix()
            .clone()
            .qr()
            .q(),
        dtph::linalg::Field::Real,
    );
    let q2 = Matrix::from_dmatrix(
        Matrix::from_fn_real(2, 2, |_, _| rng.random_range(-1.0..1.0))
            .dmatrix()
            .clone()
            .qr()
            .q(),
        dtph::linalg::Field::Real,
    );
    let sys = DescriptorSystem::new(
        q1.mul(&e).mul(&q2.adjoint()),
        q1.mul(&a).mul(&q2.adjoint()),
        q1.mul(&b),
        c.mul(&q2.adjoint()),
        d,
        None,
    )
    .unwrap();

    let index = index_le_one(&sys.e, &sys.a, &tol).unwrap();
    println!(
        "index <= 1: {} (rank E = {}, rank test = {}/{})",
        index.index_le_one, index.rank_e, index.rank_test, index.n
    );

    let red = reduce_to_standard(&sys, &tol).unwrap();
    println!(
        "reduced standard system: {} dynamic state(s) out of {}",
        red.standard.state_dim(),
        sys.state_dim()
    );

    // consistent initial state from a random dynamic coordinate
    let inputs: Vec<Matrix> = (0..20)
        .map(|_| Matrix::scalar_real(rng.random_range(-1.0..1.0)))
        .collect();
    let xt0 = Matrix::scalar_real(0.8);
    let x0 = red.phi.mul(&xt0).add(&red.psi.mul(&inputs[0]));

    let desc = simulate_descriptor(&sys, &x0, &inputs, &tol).unwrap();
    let std_traj = simulate_standard(&red.standard, &xt0, &inputs).unwrap();
    let mut worst = 0.0f64;
    for k in 0..inputs.len() {
        worst = worst.max(desc.outputs[k].sub(&std_traj.outputs[k]).norm());
    }
    println!("max output difference descriptor vs reduced: {worst:.3e}");
    println!(
        "max per-step consistency residual: {:.3e}",
        desc.residuals.iter().cloned().fold(0.0, f64::max)
    );

    // an index-2 pencil is rejected
    let e2 = Matrix::from_rows_real(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let idx2 = index_le_one(&e2, &Matrix::identity(2), &tol).unwrap();
    println!("nilpotent index-2 pencil accepted: {}", idx2.index_le_one);
}
