// Scratch tuning harness (not part of the deliverable).
use bellbound::bell::{chsh, i3322};
use bellbound::npa::{assemble_primal, build_basis, build_moment_matrix};
use bellbound::sdp::{dualize, DualSdp};
use bellbound::solver::{solve, SolverConfig};
use std::time::Instant;

fn dual_level(level: u32) -> DualSdp {
    let basis = build_basis(i3322().scenario(), level).unwrap();
    dualize(assemble_primal(&i3322(), &build_moment_matrix(&basis)).unwrap())
}

fn main() {
    let d1 = dual_level(1);
    let d2 = dual_level(2);
    let d3 = dual_level(3);

    let run = |d: &DualSdp, steps: usize, label: &str, reference: f64| {
        let cfg = SolverConfig {
            refine_iters: steps,
            ..Default::default()
        };
        let t = Instant::now();
        let r = solve(d, &cfg).unwrap();
        println!(
            "{label} steps={steps} (derived c={:.4}): bound {:.7} err {:+.3e} rel {:+.4}% wall {:?}",
            cfg.effective_alpha_decay(steps),
            r.certificate.certified_bound,
            r.certificate.certified_bound - reference,
            1e2 * (r.certificate.certified_bound - reference) / reference,
            t.elapsed()
        );
    };

    // CHSH sanity with the derived schedule.
    let dc = {
        let basis = build_basis(chsh().scenario(), 1).unwrap();
        dualize(assemble_primal(&chsh(), &build_moment_matrix(&basis)).unwrap())
    };
    run(&dc, 30, "CHSH L1", 2.0 * std::f64::consts::SQRT_2);

    run(&d1, 50, "I3322 L1", 5.5);
    run(&d3, 200, "I3322 L3", 5.0035);
    for steps in [400usize, 800, 1200, 1600, 2400] {
        run(&d2, steps, "I3322 L2", 5.00376);
    }
    // Level monotonicity check: deep-refined L1 vs L2 vs L3.
    run(&d1, 400, "I3322 L1 deep", 5.5);
    run(&d3, 400, "I3322 L3 deep", 5.0035);
}
