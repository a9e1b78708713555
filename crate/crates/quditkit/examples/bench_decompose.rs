use quditkit::decompose::{decompose, haar_random_unitary, DecompositionMode, DecomposeOptions};
use std::time::Instant;

fn main() {
    // N = d-2 arm with the acceptance protocol (20 restarts, best-of).
    for d in [2usize, 3, 4, 5, 6, 7, 8] {
        if d < 2 { continue; }
        let start = Instant::now();
        let n_targets = 20;
        let mut infids: Vec<f64> = (0..n_targets)
            .map(|t| {
                let target = haar_random_unitary(d, 5000 + t).unwrap();
                let depth = d.saturating_sub(2);
                decompose(&target, depth, DecompositionMode::General, 31 + t, &DecomposeOptions::default())
                    .unwrap()
                    .infidelity
            })
            .collect();
        infids.sort_by(f64::total_cmp);
        let median = infids[n_targets as usize / 2];
        println!(
            "d={d} N=d-2: median {median:.3e}, min {:.2e}, max {:.2e} in {:.1?}",
            infids[0], infids[n_targets as usize - 1], start.elapsed()
        );
    }
}
