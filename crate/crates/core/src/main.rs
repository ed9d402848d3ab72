use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emitter_chain::analysis::{darkness_checks, predict_g1_extrema, verify_extrema, PeakSet};
use emitter_chain::correlations::{expectations, g1_angular, pair_coherence};
use emitter_chain::io::{
    load_run_file, run_scan, run_sweep, solve, write_document, write_scan_csv, ConfigOverrides,
    ExpectedPeaks, ResultDocument, SweepSpec, DEFAULT_GRID_POINTS, SUMMARY_FILE,
};
use emitter_chain::{ChainConfig, Error, Result};

#[derive(Parser)]
#[command(
    name = "emitter-chain",
    version,
    about = "Photon correlations of a driven chain of two-level atoms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print its coupling matrices.
    Validate(ChainArgs),
    /// Solve for the steady state and print populations and coherences.
    Steady {
        #[command(flatten)]
        chain: ChainArgs,
        /// Write the density matrix as text to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Angular scan of the correlation functions as CSV.
    Scan {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// CSV output path; a JSON result document is written next to it. Stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect and classify g2 peaks.
    Peaks {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// TOML file of expected peaks; exit status 1 when violated.
        #[arg(long)]
        expect: Option<PathBuf>,
        /// Write the JSON result document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep described by a TOML file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, replacing the one in the sweep file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct ChainArgs {
    /// TOML run configuration; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    atoms: Option<usize>,
    /// Spacing in wavelengths.
    #[arg(long)]
    spacing: Option<f64>,
    /// 1-based index of the driven atom.
    #[arg(long)]
    drive_index: Option<usize>,
    /// Rabi frequency in units of gamma.
    #[arg(long)]
    rabi: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// Number of scan angles over the full circle (at least 360).
    #[arg(long)]
    points: Option<usize>,
}

impl ChainArgs {
    fn resolve(&self) -> Result<(ChainConfig, Option<usize>)> {
        let file = self.config.as_deref().map(load_run_file).transpose()?;
        let overrides = ConfigOverrides {
            atoms: self.atoms,
            spacing: self.spacing,
            drive_index: self.drive_index,
            rabi: self.rabi,
        };
        let cfg = overrides.resolve(file.as_ref().map(|f| f.chain))?;
        Ok((cfg, file.and_then(|f| f.grid_points)))
    }

    fn scan(&self, grid: &GridArgs) -> Result<ResultDocument> {
        let (cfg, file_points) = self.resolve()?;
        run_scan(
            &cfg,
            grid.points.or(file_points).unwrap_or(DEFAULT_GRID_POINTS),
        )
    }
}

fn print_matrix(name: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{name}:");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn validate(chain: &ChainArgs) -> Result<()> {
    let (cfg, _) = chain.resolve()?;
    let couplings = emitter_chain::couplings::build_couplings(&cfg)?;
    println!(
        "valid: N={} d={} lambda, drive atom {}, Omega={} gamma, coherent weight {:?}",
        cfg.n_atoms,
        cfg.spacing_over_lambda,
        cfg.driven_atom,
        cfg.rabi_over_gamma,
        cfg.coherent_weight
    );
    print_matrix("gamma_ij", &couplings.gamma);
    print_matrix("Omega_ij", &couplings.omega);
    println!(
        "min eigenvalue of gamma_ij: {:e}",
        couplings.min_gamma_eigenvalue()
    );
    if !couplings.gamma_is_psd() {
        return Err(Error::InvariantViolated(
            "damping matrix is not positive semidefinite".into(),
        ));
    }
    Ok(())
}

fn steady(chain: &ChainArgs, out: Option<&Path>) -> Result<()> {
    let (cfg, _) = chain.resolve()?;
    let (_, rho, diag) = solve(&cfg)?;
    let corr = expectations(&rho);
    println!(
        "residual {:e}, kernel dimension {}",
        diag.residual, diag.kernel_dimension
    );
    println!(
        "hermiticity {:e}, trace error {:e}, min eigenvalue {:e}",
        diag.hermiticity_error, diag.trace_error, diag.min_eigenvalue
    );
    for i in 1..=cfg.n_atoms {
        println!("<S{i}+ S{i}-> = {:e}", corr.population(i));
    }
    for i in 1..=cfg.n_atoms {
        for j in (i + 1)..=cfg.n_atoms {
            let c = corr.first(i, j);
            let pc = pair_coherence(&corr, i, j)?;
            println!(
                "<S{i}+ S{j}-> = {:e} {:+e}i  v = {:.6}  psi = {:.6} pi",
                c.re,
                c.im,
                pc.v,
                pc.psi / std::f64::consts::PI
            );
        }
    }
    if let Some(path) = out {
        fs::write(path, rho.to_text())?;
        println!("density matrix written to {}", path.display());
    }
    Ok(())
}

fn scan(chain: &ChainArgs, grid: &GridArgs, out: Option<&Path>) -> Result<()> {
    let doc = chain.scan(grid)?;
    match out {
        Some(path) => {
            write_scan_csv(&doc.scan, fs::File::create(path)?)?;
            write_document(&doc, &path.with_extension("json"))?;
        }
        None => write_scan_csv(&doc.scan, std::io::stdout().lock())?,
    }
    Ok(())
}

fn print_peaks(set: &PeakSet) {
    println!("{:>12} {:>14} {:>12}  class", "theta_deg", "g2", "fwhm_deg");
    for p in &set.peaks {
        let width = p
            .width_fwhm
            .map(|w| format!("{:.4}", w.to_degrees()))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>12.4} {:>14.6e} {:>12}  {:?}",
            p.theta.to_degrees(),
            p.value,
            width,
            p.class
        );
    }
    for c in &set.divergent {
        println!(
            "divergent candidate at {:.4} deg ({} points), C2 = {:e}",
            c.theta.to_degrees(),
            c.points,
            c.c2
        );
    }
}

/// Returns whether every expected-peak assertion held.
fn peaks(
    chain: &ChainArgs,
    grid: &GridArgs,
    expect: Option<&Path>,
    out: Option<&Path>,
) -> Result<bool> {
    let doc = chain.scan(grid)?;
    let cfg = doc.config;
    print_peaks(&doc.peaks);

    for d in darkness_checks(&doc.scan, &doc.peaks) {
        println!(
            "peak {:.4} deg: nearest G1 minimum at {:.4} deg, depth {:e} of maximum",
            d.peak_theta.to_degrees(),
            d.minimum_theta.to_degrees(),
            d.relative_depth
        );
    }

    if cfg.n_atoms == 2 {
        let (_, rho, _) = solve(&cfg)?;
        let corr = expectations(&rho);
        let pc = pair_coherence(&corr, 1, 2)?;
        let predictions = predict_g1_extrema(&cfg, &pc)?;
        let g1 = |t: f64| g1_angular(&corr, &cfg, t).unwrap_or(f64::NAN);
        let report = verify_extrema(g1, &doc.scan, &predictions);
        println!(
            "G1 extrema (max |dG1/dtheta| = {:e}):",
            report.max_derivative
        );
        for c in &report.checks {
            println!(
                "  {:>10.4} deg {:?} n={:?} dG1/dtheta = {:+e} {}",
                c.prediction.theta.to_degrees(),
                c.prediction.branch,
                c.prediction.order_n,
                c.derivative,
                if c.passed { "pass" } else { "FAIL" }
            );
        }
    }

    if let Some(path) = out {
        write_document(&doc, path)?;
    }

    let Some(path) = expect else { return Ok(true) };
    let violations = ExpectedPeaks::load(path)?.violations(&doc.peaks);
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Ok(violations.is_empty())
}

fn sweep(config: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut spec = SweepSpec::load(config)?;
    if let Some(dir) = out {
        spec.output_dir = dir;
    }
    if workers.is_some() {
        spec.workers = workers;
    }
    spec.validate()?;
    let points = run_sweep(&spec)?;
    let failed = points.iter().filter(|p| p.outcome.is_err()).count();
    println!(
        "{} points, {} failed; summary in {}",
        points.len(),
        failed,
        spec.output_dir.join(SUMMARY_FILE).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate(chain) => validate(chain).map(|_| true),
        Command::Steady { chain, out } => steady(chain, out.as_deref()).map(|_| true),
        Command::Scan { chain, grid, out } => scan(chain, grid, out.as_deref()).map(|_| true),
        Command::Peaks {
            chain,
            grid,
            expect,
            out,
        } => peaks(chain, grid, expect.as_deref(), out.as_deref()),
        Command::Sweep {
            config,
            out,
            workers,
        } => sweep(config, out.clone(), *workers).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
