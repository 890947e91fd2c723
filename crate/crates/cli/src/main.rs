use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use snn_core::bounds::{mc_width_estimate, tropp_error_bound, width_sq_bound, BoundVariant};
use snn_core::experiment::{metadata_path, phase_transition, write_csv, ExperimentSpec, PhaseMetadata};
use snn_core::odec::sample_random_odec;
use snn_core::recovery::{admm_recover, observe, GaussianMeasurement, NoiseMode, SolverConfig};
use snn_core::{io, seed, Shape};

#[derive(Parser)]
#[command(name = "snn", version, about = "Sum-of-nuclear-norms tensor recovery toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random orthogonally decomposable tensor.
    GenOdec {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        rank: usize,
        /// Comma-separated weights, defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write the dense tensor (TNSR-JSON) instead of the factors.
        #[arg(long)]
        dense: bool,
    },
    /// Measure a tensor with a seeded Gaussian map and recover it by SNN minimization.
    Recover {
        #[arg(long)]
        phi_seed: u64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Ground truth, TNSR-JSON or ODEC-JSON.
        #[arg(long = "in")]
        input: PathBuf,
        /// Recovered tensor, TNSR-JSON.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to phi-seed + 1.
        #[arg(long)]
        noise_seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Noise::Exact)]
        noise: Noise,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate the closed-form width bound and the recovery error certificate.
    Bound {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value = "sqrt")]
        variant: BoundVariant,
    },
    /// Monte Carlo estimate of the expected squared distance to the scaled subdifferential.
    WidthMc {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a phase-transition sweep described by a JSON experiment spec.
    Phase {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the output path in the experiment file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Noise {
    Exact,
    Clipped,
}

fn three_dims(dims: &[usize]) -> Result<[usize; 3]> {
    match dims {
        &[a, b, c] => Ok([a, b, c]),
        _ => bail!("expected three dimensions, got {}", dims.len()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

/// Writes one line to stdout; a closed pipe is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(err) if err.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenOdec {
            dims,
            rank,
            alpha,
            seed,
            out,
            dense,
        } => {
            let shape = Shape::new(dims)?;
            let alpha = alpha.unwrap_or_else(|| vec![1.0; rank]);
            let x = sample_random_odec(&shape, rank, &alpha, seed)?;
            if dense {
                io::write_tensor(&out, &x.to_dense())?;
            } else {
                io::write_odec(&out, &x)?;
            }
            let norms = x.norms();
            print_json(&json!({
                "dims": shape.dims(),
                "rank": rank,
                "seed": seed,
                "opnorm": norms.opnorm,
                "snn": norms.snn,
                "frobenius": norms.frobenius,
                "out": out,
            }))
        }
        Command::Recover {
            phi_seed,
            m,
            eta,
            input,
            out,
            noise_seed,
            noise,
            rho,
            max_iters,
            tol,
            verbose,
        } => {
            let truth = io::read_any_tensor(&input)?;
            let phi = GaussianMeasurement::new(truth.shape().clone(), m, phi_seed)?;
            let mode = match noise {
                Noise::Exact => NoiseMode::ExactEta,
                Noise::Clipped => NoiseMode::GaussianClipped,
            };
            let obs = observe(&phi, &truth, eta, mode, noise_seed.unwrap_or(phi_seed.wrapping_add(1)))?;
            let config = SolverConfig {
                rho,
                max_iters,
                tol_primal: tol,
                tol_dual: tol,
                verbose,
                ..SolverConfig::default()
            };
            let result = admm_recover(&phi, &obs, &config)?;
            let estimate = result.estimate();
            io::write_tensor(&out, estimate)?;
            let abs_error = estimate.sub(&truth)?.frobenius_norm();
            print_json(&json!({
                "m": m,
                "eta": eta,
                "xi_norm": obs.xi_norm,
                "abs_error": abs_error,
                "rel_error": abs_error / truth.frobenius_norm(),
                "solver": result,
                "out": out,
            }))
        }
        Command::Bound {
            dims,
            rank,
            m,
            t,
            eta,
            variant,
        } => {
            let w2 = width_sq_bound(three_dims(&dims)?, rank)?;
            let report = tropp_error_bound(m, t, eta, w2, variant)?;
            if let Some(warning) = &report.warning {
                eprintln!("warning: {warning}");
            }
            print_json(&report)
        }
        Command::WidthMc {
            dims,
            rank,
            samples,
            seed: base,
        } => {
            let n = three_dims(&dims)?;
            let bound = width_sq_bound(n, rank)?;
            let x = sample_random_odec(&Shape::new(dims)?, rank, &vec![1.0; rank], seed::derive(base, &[0]))?;
            let estimate = mc_width_estimate(&x, samples, seed::derive(base, &[1]))?;
            print_json(&json!({
                "dims": n,
                "rank": rank,
                "seed": base,
                "width_sq_bound": bound,
                "estimate": estimate,
                "within_3_sem": estimate.upper_mean <= bound + 3.0 * estimate.upper_sem,
            }))
        }
        Command::Phase { spec, out } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: ExperimentSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let Some(out) = out.or_else(|| spec.output.clone()) else {
                bail!("no output path: pass --out or set \"output\" in the experiment file");
            };
            let outcome = phase_transition(&spec)?;
            write_csv(&outcome.records, &out)?;
            io::write_json(&metadata_path(&out), &PhaseMetadata::new(&spec, &outcome))?;
            emit("n1,n2,n3,r,m,success_rate,median_iterations")?;
            for cell in &outcome.summary {
                let [a, b, c] = cell.dims;
                emit(&format!(
                    "{a},{b},{c},{},{},{},{}",
                    cell.r, cell.m, cell.success_rate, cell.median_iterations
                ))?;
            }
            Ok(())
        }
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
