//! The subspace Cayley transform maps monotone relations to contractive
//! ones, the discrete counterpart of continuous-time dissipativity.
//!
//! Run with: cargo run --example cayley_transform

use dtph::linalg::{Matrix, Tolerances};
use dtph::subspace::{cayley, cayley_inverse, classify, Subspace};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // monotone graph: W + W^T >= 0 by construction
    let g = Matrix::from_fn_real(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let s = Matrix::from_fn_real(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let w = g.adjoint().mul(&g).add(&s.sub(&s.adjoint()));
    let m = Subspace::graph_of(&w);
    let before = classify(&m, &tol).unwrap();
    println!(
        "source relation:    monotone {}, contractive {}",
        before.monotone, before.contractive
    );

    let transformed = cayley(&m, c(1.0), c(1.0)).unwrap();
    let after = classify(&transformed, &tol).unwrap();
    println!(
        "Cayley(1,1) image:  monotone {}, contractive {}, dim {} -> {}",
        after.monotone,
        after.contractive,
        before.dim,
        after.dim
    );

    // members of the image satisfy (v + w, v - w) in the source relation
    let z = Matrix::col_from_real(&[0.4, -0.7, 0.1]);
    let v = transformed.gen_p().mul(&z);
    let wv = transformed.gen_q().mul(&z);
    let first = v.add(&wv);
    let second = v.sub(&wv);
    println!(
        "membership check:   (v+w, v-w) in source = {}",
        m.contains(&first, &second, &tol).unwrap()
    );

    // the inverse transform recovers the source exactly
    let back = cayley_inverse(&transformed, c(1.0), c(1.0)).unwrap();
    println!("round trip equals source: {}", back.set_eq(&m, &tol));

    // Dirac structures map to norm-preserving relations
    let skew = s.sub(&s.adjoint());
    let dirac = Subspace::graph_of(&skew);
    let image = cayley(&dirac, c(1.0), c(1.0)).unwrap();
    let r = classify(&image, &tol).unwrap();
    println!(
        "Dirac image:        norm preserving {}, maximal {}",
        r.norm_preserving, r.maximal_norm_preserving
    );
}
