//! Scratch probe for the orthogonality-band continuation dynamics on the
//! small two-mode lattice used by the driver tests.

use nalgebra::DMatrix;
use selcomp::driver::{iterate, SynthesisConfig};
use selcomp::model::{build_grid, GroundStructure, SectionProperties};
use selcomp::modes::DesiredModeSet;
use selcomp::reduction::DofPartition;
use std::collections::BTreeSet;

fn main() {
    let section = SectionProperties::new(20.0, 3000.0, 500.0 / 3.0).unwrap();
    let (grid, elements) = build_grid(20.0, 10.0, 5.0, 1).unwrap();
    let supports: BTreeSet<usize> = (0..5).flat_map(|n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
    let gs = GroundStructure::new(grid, elements, section, supports).unwrap();
    let (left, right) = (10usize, 14usize);
    let active: Vec<usize> = [left, right]
        .into_iter()
        .flat_map(|n| [gs.free_dof(3 * n).unwrap(), gs.free_dof(3 * n + 1).unwrap()])
        .collect();
    let partition = DofPartition::new(active, gs.n_free()).unwrap();
    let raw = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0]);
    let modes = DesiredModeSet::from_raw(raw).unwrap();

    let x0: Vec<f64> = (0..gs.n_elements())
        .map(|e| 0.1 + 0.8 * ((e as f64 * 0.618_034) % 1.0))
        .collect();

    // Recompute μ the same way as the test.
    use selcomp::reduction::{condense_banded, Assembler};
    let sys = condense_banded(
        Assembler::new(&gs, &partition)
            .unwrap()
            .assemble(&gs, &x0)
            .unwrap(),
    )
    .unwrap();
    let phi = &modes.columns;
    let f0 = (phi.column(0).transpose() * &sys.kbar * phi.column(0))[(0, 0)];
    let f1 = (phi.column(1).transpose() * &sys.kbar * phi.column(1))[(0, 0)];
    let mu_factor: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1.5);
    let mu = mu_factor * f0.max(f1);
    println!("cap forms at x0: {f0:.4e} {f1:.4e}, mu = {mu:.4e}");
    let cross0 = (phi.column(0).transpose() * &sys.kbar * phi.column(1))[(0, 0)];
    println!("cross at x0: {cross0:.4e}, strict band = {:.4e}", 1e-6 * mu);

    let mut config = SynthesisConfig::new(mu, 0.6 * gs.n_elements() as f64);
    config.nu = 0.2;
    config.max_iters = 400;
    let result = iterate(&gs, &partition, &modes, &config, &x0).unwrap();
    println!(
        "status {:?} after {} iterations, final_feasible {}",
        result.status, result.iterations, result.final_feasible
    );
    for rec in &result.history {
        println!(
            "it {:3}  feas {:5}  esc {}  viol {:10.4e}  step {:9.3e}  λ {:?}  S {:.4e}",
            rec.iteration,
            rec.feasible,
            rec.escalations,
            rec.violation,
            rec.step_norm,
            rec.eigenvalues
                .iter()
                .map(|v| format!("{v:.4e}"))
                .collect::<Vec<_>>(),
            rec.selectivity
        );
    }
}
