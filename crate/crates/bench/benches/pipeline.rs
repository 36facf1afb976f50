//! Benchmarks of the synthesis pipeline stages on the 796-element
//! reference problem: assembly + condensation, the constrained-base
//! eigenproblem, one LP update, and one full outer iteration.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use selcomp::base::{expand_base, solve_constrained_base};
use selcomp::driver::iterate;
use selcomp::lp::{build_lp, solve_lp, MoveLimits};
use selcomp::reduction::{condense_banded, Assembler};
use selcomp::spectra::eigen;
use selcomp_bench::reference_problem;

fn mid_design(r: usize) -> Vec<f64> {
    (0..r).map(|i| 0.2 + 0.6 * (i % 7) as f64 / 7.0).collect()
}

fn bench_condensation(c: &mut Criterion) {
    let built = reference_problem();
    let assembler = Assembler::new(&built.ground, &built.partition).unwrap();
    let x = mid_design(built.ground.n_elements());
    c.bench_function("assemble_and_condense_796", |b| {
        b.iter(|| {
            let sys = assembler.assemble(&built.ground, black_box(&x)).unwrap();
            black_box(condense_banded(sys).unwrap());
        })
    });
}

fn bench_constrained_base(c: &mut Criterion) {
    let built = reference_problem();
    let assembler = Assembler::new(&built.ground, &built.partition).unwrap();
    let x = mid_design(built.ground.n_elements());
    let sys = condense_banded(assembler.assemble(&built.ground, &x).unwrap()).unwrap();
    c.bench_function("constrained_base_q4_m2", |b| {
        b.iter(|| {
            let base = solve_constrained_base(black_box(&sys.kbar), &built.modes).unwrap();
            black_box(expand_base(&built.modes, &base, &sys).unwrap());
        })
    });
}

fn bench_lp_update(c: &mut Criterion) {
    let built = reference_problem();
    let assembler = Assembler::new(&built.ground, &built.partition).unwrap();
    let x = mid_design(built.ground.n_elements());
    let sys = condense_banded(assembler.assemble(&built.ground, &x).unwrap()).unwrap();
    let cbase = solve_constrained_base(&sys.kbar, &built.modes).unwrap();
    let obase = expand_base(&built.modes, &cbase, &sys).unwrap();
    let cfg = &built.config;
    let limits = MoveLimits::around(&x, cfg.nu, cfg.x_lower, cfg.x_upper);
    c.bench_function("lp_update_796_vars", |b| {
        b.iter(|| {
            let lp = build_lp(
                &built.ground,
                black_box(&obase),
                cfg.mu,
                cfg.volume,
                2,
                1e-6 * cfg.mu,
                &limits,
            )
            .unwrap();
            black_box(solve_lp(&lp).unwrap());
        })
    });
}

fn bench_eigen(c: &mut Criterion) {
    let built = reference_problem();
    let assembler = Assembler::new(&built.ground, &built.partition).unwrap();
    let x = mid_design(built.ground.n_elements());
    let sys = condense_banded(assembler.assemble(&built.ground, &x).unwrap()).unwrap();
    c.bench_function("condensed_eigen_q4", |b| {
        b.iter(|| black_box(eigen(black_box(&sys.kbar), 2).unwrap()))
    });
}

fn bench_full_iteration(c: &mut Criterion) {
    let built = reference_problem();
    let x0 = mid_design(built.ground.n_elements());
    let mut cfg = built.config.clone();
    cfg.max_iters = 1;
    c.bench_function("outer_iteration_796", |b| {
        b.iter(|| {
            black_box(
                iterate(
                    &built.ground,
                    &built.partition,
                    &built.modes,
                    &cfg,
                    black_box(&x0),
                )
                .unwrap(),
            )
        })
    });
}

criterion_group!(
    benches,
    bench_condensation,
    bench_constrained_base,
    bench_lp_update,
    bench_eigen,
    bench_full_iteration
);
criterion_main!(benches);
