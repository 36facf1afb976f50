//! Diagnostic: rebuild the update LP at the best design stored in a bundle
//! and report what the solver sees there.

use selcomp::base::{expand_base, solve_constrained_base};
use selcomp::bundle::ResultBundle;
use selcomp::lp::{build_lp, solve_lp, LpOutcome, MoveLimits};
use selcomp::reduction::{condense_banded, Assembler};
use selcomp::spectra::eigen;

fn main() {
    let path = std::env::args().nth(1).expect("usage: probe_lp <bundle.json>");
    let bundle = ResultBundle::load(std::path::Path::new(&path)).expect("load bundle");
    let built = bundle.problem.build().expect("build problem");
    let run = bundle.best_run();
    let x = run.x.clone();
    let gs = &built.ground;
    let cfg = &built.config;

    let assembler = Assembler::new(gs, &built.partition).unwrap();
    let sys = condense_banded(assembler.assemble(gs, &x).unwrap()).unwrap();
    let m = built.modes.m();
    let modal = eigen(&sys.kbar, m).unwrap();
    println!("eigenvalues at stored x: {:?}", &modal.eigenvalues);

    let cbase = solve_constrained_base(&sys.kbar, &built.modes).unwrap();
    println!("constrained-base quotients: {:?}", &cbase.quotients);

    let obase = expand_base(&built.modes, &cbase, &sys).unwrap();
    let n_guard = cfg.guards(sys.kbar.nrows(), m);
    let band = cfg.eq_band_factor * run.mu;
    let limits = MoveLimits::around(&x, cfg.nu, cfg.x_lower, cfg.x_upper);
    let lp = build_lp(gs, &obase, run.mu, cfg.volume, n_guard, band, &limits).unwrap();

    println!("\nrow activities at x_old (should all be satisfied):");
    let viol = lp.violations(&x);
    for (row, v) in lp.rows.iter().zip(&viol) {
        let act: f64 = row.coeffs.iter().zip(&x).map(|(a, x)| a * x).sum();
        println!(
            "  {:14} {:?} act = {:+.6e}  rhs = {:+.6e}  viol = {:.3e}",
            row.label, row.kind, act, row.rhs, v
        );
    }
    let mut in_box = true;
    for e in 0..x.len() {
        if x[e] < lp.lower[e] - 1e-15 || x[e] > lp.upper[e] + 1e-15 {
            in_box = false;
            println!("  x[{e}] = {} outside box [{}, {}]", x[e], lp.lower[e], lp.upper[e]);
        }
    }
    println!("x_old inside move-limit box: {in_box}");

    match solve_lp(&lp).unwrap() {
        LpOutcome::Optimal { x: xn, objective } => {
            println!("\nsolver: OPTIMAL, objective = {objective:.6e}");
            let step = x
                .iter()
                .zip(&xn)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            println!("step inf-norm = {step:.3e}");
        }
        LpOutcome::Infeasible {
            x: xn,
            total_violation,
            violations,
            ..
        } => {
            println!("\nsolver: INFEASIBLE, total violation = {total_violation:.6e}");
            for (row, v) in lp.rows.iter().zip(&violations) {
                if *v > 0.0 {
                    println!("  violated: {:14} by {:.6e}", row.label, v);
                }
            }
            let step = x
                .iter()
                .zip(&xn)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            println!("phase-1 point step inf-norm = {step:.3e}");
            let recheck = lp.violations(&xn);
            let total: f64 = recheck.iter().sum();
            println!("violations recomputed at returned point: {total:.6e}");
        }
        LpOutcome::Unbounded => println!("\nsolver: UNBOUNDED"),
    }
}
