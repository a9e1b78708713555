use quditkit::pulse::*;
use quditkit::transmon::{diagonalize, TransmonSpec};
use quditkit::linalg::unitarity_residual;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::time::Instant;

fn main() {
    let system = diagonalize(&TransmonSpec::reference_device(), 4).unwrap();
    let c01 = system.charge_matrix[(0, 1)].re;
    let envelope = PulseEnvelope::new(100.0);
    for eps in [0.002f64, 0.004] {
        let drive = MultiToneDrive {
            d: 2,
            tones: vec![ToneSpec {
                frequency: system.transition(0),
                base_phase: -FRAC_PI_2,
                detuning: 0.0,
                drag_weight: 0.0,
                amplitude: eps,
            }],
            drag_scale: 0.0,
        };
        let t0 = Instant::now();
        let u = propagate(&system, &drive, &envelope, 1e-10).unwrap();
        let angle = TAU * eps * c01 * envelope.area();
        let expected = (angle / 2.0).sin().powi(2);
        println!(
            "eps={eps}: p1={:.8} expected={:.8} diff={:.2e}  unit_res={:.2e}  ({:?})",
            u[(1, 0)].norm_sqr(), expected, (u[(1,0)].norm_sqr() - expected).abs(),
            unitarity_residual(&u), t0.elapsed()
        );
    }

    // d=3 48ns displacement at various tolerances
    let system6 = diagonalize(&TransmonSpec::reference_device(), 6).unwrap();
    let env48 = PulseEnvelope::new(48.0);
    let drive = calibrated_drive(&system6, 3, FRAC_PI_2, &env48).unwrap();
    for tol in [1e-8f64, 1e-10, 5e-11, 1e-12] {
        let t0 = Instant::now();
        let u = propagate(&system6, &drive, &env48, tol).unwrap();
        let framed = frame_transform(&u, &system6, env48.duration);
        let f = displacement_fidelity(&computational_block(&framed, 3), FRAC_PI_2);
        println!("tol={tol:.0e}: F={f:.12} unit_res={:.2e} ({:?})", unitarity_residual(&framed), t0.elapsed());
    }
}
