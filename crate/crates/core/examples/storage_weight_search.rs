//! Scattering passivity: verify the weighted-norm inequality for a given
//! Hamiltonian weight, or search one with the bounded-real Riccati
//! iteration.
//!
//! Run with: cargo run --example storage_weight_search

use dtph::linalg::{op_norm2, Field, Matrix, Tolerances};
use dtph::systems::{
    check_dissipation, find_storage_weight, is_scattering_ph, simulate_standard, StandardSystem,
    StorageWeight,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // a contraction in disguise: conjugate a scaled orthogonal matrix by
    // diag(X^{1/2}, I) for a hidden weight X
    let n = 3;
    let m = 2;
    let raw = Matrix::from_fn_real(n + m, n + m, |_, _| rng.random_range(-1.0..1.0));
    let t = Matrix::from_dmatrix(raw.dmatrix().clone().qr().q(), Field::Real).scale_real(0.9);
    let g = Matrix::from_fn_real(n, n, |_, _| rng.random_range(-0.5..0.5));
    let hidden = g.adjoint().mul(&g).add(&Matrix::identity(n));
    let w_hidden = StorageWeight::new(hidden, &tol).unwrap();
    let (s, si) = w_hidden.sqrt_pair(&tol).unwrap();
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
    println!(
        "raw block-matrix norm: {:.4} (> 1, the system is not a plain contraction)",
        op_norm2(&sys.block_matrix())
    );

    // the identity weight fails, the hidden weight passes
    let id_report = is_scattering_ph(&sys, &StorageWeight::identity(n), &tol).unwrap();
    println!(
        "X = I:      passes = {}, LMI residual = {:+.3e}",
        id_report.passes, id_report.lmi_lambda_max
    );
    let hid_report = is_scattering_ph(&sys, &w_hidden, &tol).unwrap();
    println!(
        "hidden X:   passes = {}, LMI residual = {:+.3e}",
        hid_report.passes, hid_report.lmi_lambda_max
    );

    // the Riccati search recovers a (possibly different) valid weight
    let found = find_storage_weight(&sys, &tol, 5000).unwrap();
    let report = is_scattering_ph(&sys, &found, &tol).unwrap();
    println!(
        "searched X: passes = {}, weighted norm = {:.6}",
        report.passes, report.weighted_norm
    );

    // the weight certifies per-step dissipation along any trajectory
    let x0 = Matrix::from_fn_real(n, 1, |_, _| rng.random_range(-1.0..1.0));
    let inputs: Vec<Matrix> = (0..100)
        .map(|_| Matrix::from_fn_real(m, 1, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let traj = simulate_standard(&sys, &x0, &inputs).unwrap();
    let margins = check_dissipation(&traj, &found, &Matrix::identity(n), &tol);
    println!(
        "trajectory dissipation: holds = {}, min margin = {:+.3e}",
        margins.holds, margins.min_margin
    );

    // an unstable autonomous system has no storage weight at all
    let unstable = StandardSystem::new(
        Matrix::scalar_real(1.5),
        Matrix::zeros(1, 0),
        Matrix::zeros(0, 1),
        Matrix::zeros(0, 0),
        None,
    )
    .unwrap();
    match find_storage_weight(&unstable, &tol, 2000) {
        Ok(_) => println!("unexpected: weight found for an unstable system"),
        Err(e) => println!("unstable system rejected: {e}"),
    }
}
