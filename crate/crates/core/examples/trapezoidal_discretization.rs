//! Trapezoidal (Tustin) discretization of a continuous dissipative flow
//! relation: the result is the subspace Cayley transform with parameters
//! (h/2, 1), contractive for every step size.
//!
//! Run with: cargo run --example trapezoidal_discretization

use dtph::geometric::{discretize_dh, step_relation};
use dtph::linalg::{Matrix, Tolerances};
use dtph::subspace::Subspace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);

    // monotone flow relation: graph of W with W + W^T >= 0
    let g = Matrix::from_fn_real(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let s = Matrix::from_fn_real(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let w = g.adjoint().mul(&g).add(&s.sub(&s.adjoint()));
    let m = Subspace::graph_of(&w);

    println!("step size    contractive    norm preserving");
    for &h in &[0.01, 0.1, 1.0, 10.0] {
        let out = discretize_dh(&m, None, h, &tol).unwrap();
        println!(
            "{h:<12} {:<14} {}",
            out.report.contractive, out.report.norm_preserving
        );
    }

    // iterating the discrete relation never increases the norm
    let out = discretize_dh(&m, None, 0.5, &tol).unwrap();
    let mut z = Matrix::col_from_real(&[1.0, -1.0, 0.5]);
    print!("norms along the discrete flow: {:.4}", z.norm());
    for _ in 0..8 {
        z = step_relation(&out.relation, &z, &tol).unwrap();
        print!(" -> {:.4}", z.norm());
    }
    println!();

    // a lossless (skew, Dirac) flow discretizes to a norm-preserving map
    let skew = s.sub(&s.adjoint());
    let dirac = Subspace::graph_of(&skew);
    let lossless = discretize_dh(&dirac, None, 0.5, &tol).unwrap();
    println!(
        "skew flow: discrete relation norm preserving = {}",
        lossless.report.norm_preserving
    );
    let mut z = Matrix::col_from_real(&[1.0, 0.0, 0.0]);
    let before = z.norm();
    for _ in 0..100 {
        z = step_relation(&lossless.relation, &z, &tol).unwrap();
    }
    println!(
        "norm after 100 lossless steps: {:.12} (started at {:.12})",
        z.norm(),
        before
    );
}
