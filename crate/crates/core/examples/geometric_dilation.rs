//! Halmos dilation of a scattering-pH system into the coordinate-free
//! geometric form: a norm-preserving routing relation with a resistive port
//! absorbing the dissipated energy. The power balance holds exactly at every
//! step.
//!
//! Run with: cargo run --example geometric_dilation

use dtph::geometric::{dilate, simulate, validate};
use dtph::linalg::{Field, Matrix, Tolerances};
use dtph::systems::{find_storage_weight, simulate_standard, StandardSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);

    // strictly contractive block matrix => scattering pH with X = I
    let n = 2;
    let m = 1;
    let raw = Matrix::from_fn_real(n + m, n + m, |_, _| rng.random_range(-1.0..1.0));
    let big = Matrix::from_dmatrix(raw.dmatrix().clone().qr().q(), Field::Real).scale_real(0.85);
    let sys = StandardSystem::new(
        big.slice(0, n, 0, n),
        big.slice(0, n, n, n + m),
        big.slice(n, n + m, 0, n),
        big.slice(n, n + m, n, n + m),
        None,
    )
    .unwrap();
    let weight = find_storage_weight(&sys, &tol, 5000).unwrap();

    let geo = dilate(&sys, &weight, &tol).unwrap();
    let report = validate(&geo, &tol).unwrap();
    println!(
        "geometric system: n = {}, r = {}, m = {}, valid = {}",
        geo.state_dim(),
        geo.resistive_dim(),
        geo.external_dim(),
        report.valid
    );
    println!(
        "routing relation: norm preserving = {}, dim = {}",
        report.routing_norm_preserving, report.routing_report.dim
    );

    // simulate both forms; the geometric one tracks X^{1/2} x_k exactly
    let x0 = Matrix::col_from_real(&[1.0, -0.5]);
    let inputs: Vec<Matrix> = (0..50)
        .map(|_| Matrix::from_fn_real(m, 1, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let std_traj = simulate_standard(&sys, &x0, &inputs).unwrap();
    let (s, _) = weight.sqrt_pair(&tol).unwrap();
    let geo_traj = simulate(&geo, &s.mul(&x0), &inputs, &tol).unwrap();

    let mut worst_out = 0.0f64;
    let mut worst_state = 0.0f64;
    for k in 0..inputs.len() {
        worst_out = worst_out.max(geo_traj.outputs[k].sub(&std_traj.outputs[k]).norm());
        worst_state =
            worst_state.max(geo_traj.states[k].sub(&s.mul(&std_traj.states[k])).norm());
    }
    println!("max output difference vs standard simulation: {worst_out:.3e}");
    println!("max state difference through X^(1/2):         {worst_state:.3e}");
    println!(
        "max power-balance residual: {:.3e}",
        geo_traj.max_power_residual()
    );
    println!("min passivity margin:       {:+.3e}", geo_traj.min_margin());

    // the resistive flow carries exactly the dissipated power
    let k = 10;
    let dissipated = geo_traj.resistive_flows[k].norm().powi(2)
        - geo_traj.resistive_efforts[k].norm().powi(2);
    let supplied = geo_traj.inputs[k].norm().powi(2) - geo_traj.outputs[k].norm().powi(2);
    let stored = geo_traj.states[k + 1].norm().powi(2) - geo_traj.states[k].norm().powi(2);
    println!(
        "step {k}: supplied {supplied:+.4} = stored {stored:+.4} + dissipated {dissipated:+.4}"
    );
}
