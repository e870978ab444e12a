//! Redheffer cross-connection of two scattering-pH systems: the closed-form
//! block elimination agrees with a per-step elimination oracle, and the
//! reduced system is scattering pH for the block-diagonal composite weight.
//!
//! Run with: cargo run --example redheffer_interconnection

use dtph::interconnect::{
    compose_storage, elimination_oracle, redheffer_reduce, CouplingRelation,
};
use dtph::linalg::{Field, Matrix, Tolerances};
use dtph::systems::{
    is_scattering_ph, simulate_standard, PortPartition, StandardSystem, StorageWeight,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_ph(
    rng: &mut ChaCha8Rng,
    n: usize,
    m1: usize,
    m2: usize,
) -> (StandardSystem, StorageWeight) {
    let tol = Tolerances::default();
    let m = m1 + m2;
    let raw = Matrix::from_fn_real(n + m, n + m, |_, _| rng.random_range(-1.0..1.0));
    let t = Matrix::from_dmatrix(raw.dmatrix().clone().qr().q(), Field::Real).scale_real(0.88);
    let g = Matrix::from_fn_real(n, n, |_, _| rng.random_range(-0.5..0.5));
    let x = g.adjoint().mul(&g).add(&Matrix::identity(n));
    let w = StorageWeight::new(x, &tol).unwrap();
    let (s, si) = w.sqrt_pair(&tol).unwrap();
    let left = Matrix::block_diag(&[&si, &Matrix::identity(m)]);
    let right = Matrix::block_diag(&[&s, &Matrix::identity(m)]);
    let big = left.mul(&t).mul(&right);
    (
        StandardSystem::new(
            big.slice(0, n, 0, n),
            big.slice(0, n, n, n + m),
            big.slice(n, n + m, 0, n),
            big.slice(n, n + m, n, n + m),
            Some(PortPartition { m1 }),
        )
        .unwrap(),
        w,
    )
}

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    // two systems, each with one coupled and one external port
    let (s1, x1) = random_ph(&mut rng, 2, 1, 1);
    let (s2, x2) = random_ph(&mut rng, 3, 1, 1);

    let red = redheffer_reduce(&s1, &s2, &tol).unwrap();
    println!(
        "coupling invertibility: min sv(I - D1_11 D2_11) = {:.4}, tests agree = {}",
        red.invertibility.min_sv_i_d1_d2, red.invertibility.tests_agree
    );
    println!(
        "reduced system: {} states, {} external inputs",
        red.system.state_dim(),
        red.system.input_dim()
    );

    // the reduction reproduces the per-step elimination oracle
    let coupling = CouplingRelation::redheffer(1);
    let x10 = Matrix::col_from_real(&[0.5, -0.2]);
    let x20 = Matrix::col_from_real(&[0.1, 0.4, -0.3]);
    let inputs: Vec<Matrix> = (0..50)
        .map(|_| Matrix::from_fn_real(2, 1, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let oracle = elimination_oracle(&s1, &s2, &coupling, &x10, &x20, &inputs, &tol).unwrap();
    let reduced = simulate_standard(
        &red.system,
        &Matrix::vstack(&[&x10, &x20]).unwrap(),
        &inputs,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for k in 0..inputs.len() {
        worst = worst.max(reduced.outputs[k].sub(&oracle.outputs[k]).norm());
    }
    println!("max output difference reduction vs oracle: {worst:.3e}");

    // the cross-connection constraints hold along the oracle trajectory
    let k = 7;
    let u = &oracle.port_inputs[k];
    let y = &oracle.port_outputs[k];
    println!(
        "step {k}: |y1_c - u2_c| = {:.3e}, |u1_c - y2_c| = {:.3e}",
        y.rows_slice(0, 1).sub(&u.rows_slice(1, 2)).norm(),
        u.rows_slice(0, 1).sub(&y.rows_slice(1, 2)).norm()
    );

    // composite weight diag(X1, X2) certifies the reduced system
    let x_hat = compose_storage(&x1, &x2);
    let report = is_scattering_ph(&red.system, &x_hat, &tol).unwrap();
    println!(
        "reduced system scattering pH with diag(X1, X2): {} (LMI residual {:+.3e})",
        report.passes, report.lmi_lambda_max
    );
}
