//! Classify linear relations against the structural classes: contractive,
//! monotone, norm preserving, Dirac, Lagrangian.
//!
//! Run with: cargo run --example classify_relations

use dtph::linalg::{Matrix, Tolerances};
use dtph::subspace::{classify, Subspace};

fn show(name: &str, sub: &Subspace, tol: &Tolerances) {
    let r = classify(sub, tol).unwrap();
    println!(
        "{name:<28} dim {}  contractive {}  monotone {}  norm-pres. {}  dirac {}  lagrangian {}",
        r.dim,
        yn(r.contractive),
        yn(r.monotone),
        yn(r.norm_preserving),
        yn(r.dirac),
        yn(r.lagrangian)
    );
}

fn yn(b: bool) -> &'static str {
    if b {
        "y"
    } else {
        "-"
    }
}

fn main() {
    let tol = Tolerances::default();

    // graph of the identity: every class except Dirac
    show("identity graph", &Subspace::identity_graph(3), &tol);

    // graph of a skew-symmetric matrix: the prototypical Dirac structure
    let skew = Matrix::from_rows_real(&[
        vec![0.0, 1.0, -0.5],
        vec![-1.0, 0.0, 2.0],
        vec![0.5, -2.0, 0.0],
    ])
    .unwrap();
    show("skew graph (Dirac)", &Subspace::graph_of(&skew), &tol);

    // graph of a symmetric matrix: Lagrangian
    let sym = Matrix::from_rows_real(&[vec![2.0, 1.0], vec![1.0, -3.0]]).unwrap();
    show("symmetric graph", &Subspace::graph_of(&sym), &tol);

    // graph of a strict contraction
    let contraction = Matrix::from_rows_real(&[vec![0.3, 0.2], vec![-0.1, 0.4]]).unwrap();
    show("contraction graph", &Subspace::graph_of(&contraction), &tol);

    // an expansive relation, with the violating coefficient vector
    let gain = Matrix::identity(2).scale_real(2.0);
    let sub = Subspace::graph_of(&gain);
    show("gain-2 graph", &sub, &tol);
    let report = classify(&sub, &tol).unwrap();
    if let Some(z) = report.witness_contractive {
        let v = sub.gen_p().mul(&z);
        let w = sub.gen_q().mul(&z);
        println!(
            "    witness: |v| = {:.3}, |w| = {:.3} (second component longer)",
            v.norm(),
            w.norm()
        );
    }

    // a vertical relation {(0, w)} is not a graph
    let vertical = Subspace::from_image(&Matrix::zeros(2, 2), &Matrix::identity(2)).unwrap();
    show("vertical relation", &vertical, &tol);
}
