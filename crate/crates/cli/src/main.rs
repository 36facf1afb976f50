//! `selcomp` — synthesis of planar compliant mechanisms with selective
//! compliance.
//!
//! Subcommands: `synth` (multi-start synthesis of a problem file into a
//! result bundle), `analyze` (recompute a bundle's metrics and compare),
//! `simulate` (apply force sets to the best design), `render` (SVG export).
//!
//! Exit codes: 0 success, 1 usage/schema/I/O error, 2 numerical failure.
//! Flags marked with an env var can also be set through the environment
//! (prefix `SELCOMP_`); explicit flags win.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use log::info;
use nalgebra::DVector;

use selcomp::bundle::{
    analyze_bundle, assemble_bundle, eigenvalues_csv, evaluate_design, history_csv,
    similarity_csv, ResultBundle,
};
use selcomp::driver::multi_start;
use selcomp::problem::{parse_problem, LoadCaseSpec, MuSweep};
use selcomp::render::{render_topology, Overlay, RenderOptions};
use selcomp::{assess, Error};

#[derive(Parser)]
#[command(
    name = "selcomp",
    version,
    about = "Synthesis of planar compliant mechanisms with selective compliance"
)]
struct Cli {
    /// Increase log verbosity (-v: per-iteration, -vv: trace).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the multi-start synthesis on a problem file.
    Synth {
        /// Problem file (JSON).
        problem: PathBuf,
        /// Output bundle path.
        #[arg(short, long)]
        output: PathBuf,
        /// Master random seed (overrides the problem file).
        #[arg(long, env = "SELCOMP_SEED")]
        seed: Option<u64>,
        /// Random starts per cap value (overrides the problem file).
        #[arg(long, env = "SELCOMP_STARTS")]
        starts: Option<usize>,
        /// Single stiffness cap μ (overrides the problem file).
        #[arg(long, env = "SELCOMP_MU", conflicts_with = "mu_sweep")]
        mu: Option<f64>,
        /// Cap sweep lo:hi:n (overrides the problem file).
        #[arg(long, env = "SELCOMP_MU_SWEEP", value_name = "LO:HI:N")]
        mu_sweep: Option<String>,
        /// Number of order-guard modes (overrides the problem file).
        #[arg(long, env = "SELCOMP_GUARDS")]
        guards: Option<usize>,
        /// Iteration budget per run (overrides the problem file).
        #[arg(long, env = "SELCOMP_MAX_ITERS")]
        max_iters: Option<usize>,
        /// Worker threads for the start sweep (default: all cores).
        #[arg(long, env = "SELCOMP_THREADS")]
        threads: Option<usize>,
    },
    /// Recompute the best design's metrics and compare with the stored ones.
    Analyze {
        bundle: PathBuf,
        /// Also write CSV tables (eigenvalues, history, similarity) here.
        #[arg(long, value_name = "DIR")]
        csv: Option<PathBuf>,
    },
    /// Apply force sets to the best design and report the decomposition.
    Simulate {
        bundle: PathBuf,
        /// JSON file with an array of load cases
        /// (same schema as the problem's `load_cases`).
        #[arg(long)]
        forces: PathBuf,
    },
    /// Render the best design (optionally with a deformation overlay).
    Render {
        bundle: PathBuf,
        /// Output SVG path.
        #[arg(short, long)]
        output: PathBuf,
        /// Overlay eigenmode k (1-based).
        #[arg(long, conflicts_with = "loadcase")]
        mode: Option<usize>,
        /// Overlay stored load case j (1-based).
        #[arg(long)]
        loadcase: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful outputs, not usage errors.
            use clap::error::ErrorKind;
            let code: u8 = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let default = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp(None)
        .init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> selcomp::Result<()> {
    match command {
        Command::Synth {
            problem,
            output,
            seed,
            starts,
            mu,
            mu_sweep,
            guards,
            max_iters,
            threads,
        } => synth(
            &problem, &output, seed, starts, mu, mu_sweep, guards, max_iters, threads,
        ),
        Command::Analyze { bundle, csv } => analyze(&bundle, csv.as_deref()),
        Command::Simulate { bundle, forces } => simulate(&bundle, &forces),
        Command::Render {
            bundle,
            output,
            mode,
            loadcase,
        } => render(&bundle, &output, mode, loadcase),
    }
}

fn parse_sweep(text: &str) -> selcomp::Result<MuSweep> {
    let parts: Vec<&str> = text.split(':').collect();
    let err = || Error::InvalidConfig(format!("--mu-sweep expects LO:HI:N, got '{text}'"));
    if parts.len() != 3 {
        return Err(err());
    }
    let lo: f64 = parts[0].parse().map_err(|_| err())?;
    let hi: f64 = parts[1].parse().map_err(|_| err())?;
    let count: usize = parts[2].parse().map_err(|_| err())?;
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(err());
    }
    Ok(MuSweep { lo, hi, count })
}

#[allow(clippy::too_many_arguments)]
fn synth(
    problem: &Path,
    output: &Path,
    seed: Option<u64>,
    starts: Option<usize>,
    mu: Option<f64>,
    mu_sweep: Option<String>,
    guards: Option<usize>,
    max_iters: Option<usize>,
    threads: Option<usize>,
) -> selcomp::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }

    // Fold CLI overrides into the spec itself so the bundle embeds the
    // problem that was actually solved.
    let mut spec = parse_problem(problem)?;
    if let Some(s) = seed {
        spec.synthesis.seed = Some(s);
    }
    if let Some(n) = starts {
        spec.synthesis.starts = Some(n);
    }
    if let Some(v) = mu {
        spec.synthesis.mu = Some(v);
        spec.synthesis.mu_sweep = None;
    }
    if let Some(text) = &mu_sweep {
        spec.synthesis.mu_sweep = Some(parse_sweep(text)?);
        spec.synthesis.mu = None;
    }
    if let Some(g) = guards {
        spec.synthesis.n_guard = Some(g);
    }
    if let Some(n) = max_iters {
        spec.synthesis.max_iters = Some(n);
    }

    let origin = problem.display().to_string();
    let built = spec.build_from(&origin)?;
    info!(
        "problem '{}': {} elements, {} active DoFs, m = {}, {} cap value(s) × {} start(s)",
        spec.name,
        built.ground.n_elements(),
        built.partition.n_active(),
        built.modes.m(),
        built.mu_values.len(),
        built.config.n_starts
    );

    let results = multi_start(
        &built.ground,
        &built.partition,
        &built.modes,
        &built.config,
        &built.mu_values,
    )?;
    let bundle = assemble_bundle(&spec, &built, &results)?;
    bundle.save(output)?;

    println!("runs (best first):");
    println!("  #  mu          start  status              iters  selectivity   similarity");
    for (i, run) in bundle.runs.iter().enumerate() {
        println!(
            "{:>3}  {:<10.4e}  {:<5}  {:<18}  {:<5}  {:<12.5e}  {:.8}",
            i,
            run.mu,
            run.start_index,
            format!("{:?}", run.status),
            run.iterations,
            run.selectivity,
            run.similarity
        );
    }
    let best = bundle.best_run();
    println!(
        "best: mu = {:.4e}, S = {:.5e}, similarity = {:.8}, primary = {:?}",
        best.mu, best.selectivity, best.similarity, best.primary
    );
    println!("bundle written to {}", output.display());
    Ok(())
}

fn analyze(path: &Path, csv: Option<&Path>) -> selcomp::Result<()> {
    let bundle = ResultBundle::load(path)?;
    let analysis = analyze_bundle(&bundle)?;
    let best = bundle.best_run();

    println!("bundle: {} runs, best = #{}", bundle.runs.len(), bundle.best);
    println!("metric         stored            recomputed        rel. deviation");
    println!(
        "selectivity    {:<16.9e}  {:<16.9e}  {:.3e}",
        best.selectivity, analysis.selectivity, analysis.selectivity_dev
    );
    println!(
        "similarity     {:<16.9e}  {:<16.9e}  {:.3e}",
        best.similarity, analysis.similarity, analysis.similarity_dev
    );
    for (k, (s, r)) in best
        .eigenvalues
        .iter()
        .zip(&analysis.eigenvalues)
        .enumerate()
    {
        println!("lambda_{:<6} {:<16.9e}  {:<16.9e}", k + 1, s, r);
    }
    println!(
        "max deviations: eigenvalues {:.3e}, load cases {:.3e}",
        analysis.eigenvalue_dev, analysis.load_case_dev
    );

    if let Some(dir) = csv {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("eigenvalues.csv"), eigenvalues_csv(&bundle))?;
        std::fs::write(dir.join("history.csv"), history_csv(best))?;
        std::fs::write(dir.join("similarity.csv"), similarity_csv(&bundle))?;
        println!("CSV tables written to {}", dir.display());
    }

    if analysis.within(1e-9) {
        println!("stored metrics reproduced within 1e-9");
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "stored metrics deviate beyond 1e-9: eigenvalues {:.3e}, selectivity {:.3e}, \
             similarity {:.3e}, load cases {:.3e}",
            analysis.eigenvalue_dev,
            analysis.selectivity_dev,
            analysis.similarity_dev,
            analysis.load_case_dev
        )))
    }
}

fn simulate(path: &Path, forces: &Path) -> selcomp::Result<()> {
    let bundle = ResultBundle::load(path)?;
    let built = bundle.problem.build()?;
    let text = std::fs::read_to_string(forces)?;
    let cases: Vec<LoadCaseSpec> = serde_json::from_str(&text).map_err(|e| Error::Schema {
        file: forces.display().to_string(),
        message: e.to_string(),
    })?;
    if cases.is_empty() {
        return Err(Error::Schema {
            file: forces.display().to_string(),
            message: "force file contains no load cases".into(),
        });
    }

    let evaluation = evaluate_design(&built, &bundle.best_run().x)?;
    println!("case                  kinematic  parasitic   max |u|");
    for case in &cases {
        let f = built.force_vector(case)?;
        let sim = assess::simulate(
            &evaluation.system.kbar,
            &evaluation.system,
            &evaluation.modal,
            &f,
        )?;
        let peak = sim
            .displacement
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        println!(
            "{:<20}  {:<9.6}  {:<9.3e}  {:.6e}",
            case.name, sim.kinematic_fraction, sim.parasitic_residual, peak
        );
        let coords: Vec<String> = sim
            .coordinates
            .iter()
            .take(6)
            .map(|c| format!("{c:.4e}"))
            .collect();
        println!("    modal coordinates: [{}{}]",
            coords.join(", "),
            if sim.coordinates.len() > 6 { ", …" } else { "" }
        );
    }
    Ok(())
}

fn render(
    path: &Path,
    output: &Path,
    mode: Option<usize>,
    loadcase: Option<usize>,
) -> selcomp::Result<()> {
    let bundle = ResultBundle::load(path)?;
    let built = bundle.problem.build()?;
    let best = bundle.best_run();

    let overlay = match (mode, loadcase) {
        (None, None) => None,
        (Some(k), None) => {
            let evaluation = evaluate_design(&built, &best.x)?;
            let q = evaluation.modal.q();
            if k == 0 || k > q {
                return Err(Error::InvalidConfig(format!(
                    "--mode {k} out of range 1..={q}"
                )));
            }
            let condensed = evaluation.modal.modes.column(k - 1).into_owned();
            let displacement = evaluation.system.expand(&condensed)?;
            Some(Overlay {
                displacement,
                label: format!(
                    "mode {k}, lambda = {:.6e}",
                    evaluation.modal.eigenvalues[k - 1]
                ),
            })
        }
        (None, Some(j)) => {
            if j == 0 || j > bundle.load_cases.len() {
                return Err(Error::InvalidConfig(format!(
                    "--loadcase {j} out of range 1..={}",
                    bundle.load_cases.len()
                )));
            }
            let record = &bundle.load_cases[j - 1];
            let evaluation = evaluate_design(&built, &best.x)?;
            let f = DVector::from_column_slice(&record.forces);
            let sim = assess::simulate(
                &evaluation.system.kbar,
                &evaluation.system,
                &evaluation.modal,
                &f,
            )?;
            Some(Overlay {
                displacement: DVector::from_vec(sim.expanded),
                label: format!("load case '{}'", record.name),
            })
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let nodes: Vec<usize> = built.layout.iter().map(|&(n, _)| n).collect();
    let options = RenderOptions {
        x_upper: built.config.x_upper,
        ..RenderOptions::default()
    };
    let svg = render_topology(&built.ground, &best.x, &nodes, overlay.as_ref(), &options)?;
    std::fs::write(output, svg)?;
    println!("SVG written to {}", output.display());
    Ok(())
}
