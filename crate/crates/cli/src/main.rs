use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ergm_core::blockmodel::{block_approximation_triangle, ProjectionConfig};
use ergm_core::counting::{gradcheck_exhaustive, gradient, GRADCHECK_MAX_VERTICES};
use ergm_core::fixedpoint::{
    banach_iterate, membership_threshold, sandwich_bounds, FixedPointReport,
};
use ergm_core::io::{curves_csv, matrix_to_csv, parse_matrix_csv, parse_model, sweep_csv};
use ergm_core::model::SimpleGraph;
use ergm_core::oracle::{empirical_marginals, enumerate_exact};
use ergm_core::twoblock::{self, TwoBlockSolution};
use ergm_core::{Hamiltonian, SymmetricMatrix};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(
    name = "ergm",
    version,
    about = "Mean-field analysis of exponential random graph models"
)]
struct Cli {
    /// Worker threads for parallel kernels.
    #[arg(long, global = true, env = "ERGM_THREADS")]
    threads: Option<usize>,
    /// Write the report here instead of stdout (atomic replace).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Model JSON: {"n": N, "alpha": a, "terms": [{"edges": [[0,1],...], "beta": b}]}
    #[arg(long)]
    model: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Constants, scalar roots, the derivative certificate and the regime.
    Analyze {
        #[command(flatten)]
        model: ModelArg,
        /// Target width for the sandwich iteration.
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
    },
    /// Iterate the fixed-point map from a matrix (default: constant 1/2).
    Solve {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Also write the final iterate as CSV.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// Exact partition function and marginals by enumeration (N <= 7).
    Enumerate {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Glauber dynamics edge marginals.
    Sample {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 0)]
        burnin: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// Compress a matrix into a block model (edge-triangle models).
    Project {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        delta: f64,
        /// Projection dimension; defaults to the Johnson-Lindenstrauss size for delta.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Two-block solutions at one transformed beta.
    Twoblock {
        #[arg(long)]
        beta: f64,
        #[arg(long, short = 'n', default_value_t = 1000)]
        n_vertices: usize,
        #[arg(long, default_value_t = twoblock::DEFAULT_GRID)]
        grid: usize,
        /// Residual tolerance per edge slot.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Exhaustive gradient versus discrete-derivative check.
    Gradcheck {
        #[command(flatten)]
        model: ModelArg,
        /// Vertex count for the exhaustive check (at most 6).
        #[arg(long, short = 'n', default_value_t = 5)]
        n_vertices: usize,
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Two-block sweep over beta as CSV, optionally with per-beta curve samples.
    Sweep {
        #[arg(long, default_value_t = 5.0)]
        beta_min: f64,
        #[arg(long, default_value_t = 40.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, short = 'n', default_value_t = 1000)]
        n_vertices: usize,
        #[arg(long, default_value_t = twoblock::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        curves_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        curve_points: usize,
    },
}

/// Result of a command: the text to emit and whether its checks passed.
struct Output {
    text: String,
    passed: bool,
}

struct LoadedModel {
    model: Hamiltonian,
    sha256: String,
}

fn load_model(arg: &ModelArg) -> anyhow::Result<LoadedModel> {
    let text = fs::read_to_string(&arg.model)
        .with_context(|| format!("reading model {}", arg.model.display()))?;
    let model = parse_model(&text).with_context(|| format!("in {}", arg.model.display()))?;
    Ok(LoadedModel {
        model,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
    })
}

fn load_matrix(path: &Path, n: usize) -> anyhow::Result<SymmetricMatrix> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading matrix {}", path.display()))?;
    let x = parse_matrix_csv(&text).with_context(|| format!("in {}", path.display()))?;
    if x.n_vertices() != n {
        bail!(
            "{}: matrix has {} rows, model has N = {n}",
            path.display(),
            x.n_vertices()
        );
    }
    if !x.is_in_unit_cube() {
        bail!("{}: entries must lie in [0, 1]", path.display());
    }
    Ok(x)
}

fn report(command: &str, model_sha256: Option<&str>, seed: Option<u64>, result: Value) -> String {
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "model_sha256": model_sha256,
        "seed": seed,
        "result": result,
    });
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn fixed_point_json(r: &FixedPointReport) -> Value {
    serde_json::to_value(r).expect("report serializes")
}

fn analyze(m: &LoadedModel, lambda: f64) -> Output {
    let model = &m.model;
    let scalar = FixedPointReport::scalar(model);
    let sandwich = sandwich_bounds(model, lambda).ok();
    let result = json!({
        "n_vertices": model.n_vertices(),
        "C_beta": model.c_beta(),
        "S_beta": model.s_beta(),
        "lip_bound": model.lip_bound(),
        "gradient_lipschitz": model.gradient_lipschitz(),
        "x0_roots": scalar.x0_roots,
        "D_beta": {
            "estimate": scalar.d_beta,
            "certificate": scalar.d_beta_upper,
        },
        "regime": scalar.regime,
        "membership_threshold": membership_threshold(model),
        "oversized_terms": model.oversized_terms(),
        "sandwich": sandwich,
    });
    Output {
        text: report("analyze", Some(&m.sha256), None, result),
        passed: true,
    }
}

fn solve(
    m: &LoadedModel,
    matrix: Option<&Path>,
    tol: f64,
    max_iter: usize,
    matrix_out: Option<&Path>,
) -> anyhow::Result<Output> {
    let n = m.model.n_vertices();
    let start = match matrix {
        Some(p) => load_matrix(p, n)?,
        None => SymmetricMatrix::constant(n, 0.5),
    };
    let (result, last, passed) = match banach_iterate(&m.model, &start, tol, max_iter) {
        Ok(mut r) => {
            let last = r.final_matrix.take();
            (fixed_point_json(&r), last, true)
        }
        Err(ergm_core::Error::NotConverged {
            iterations,
            residual,
            last,
        }) => {
            let mut r = FixedPointReport::scalar(&m.model);
            r.iterations = iterations;
            r.residual = ergm_core::fixedpoint::residual(&m.model, &last);
            let mut v = fixed_point_json(&r);
            v["last_step"] = json!(residual);
            (v, Some(*last), false)
        }
        Err(e) => return Err(e.into()),
    };
    if let (Some(path), Some(x)) = (matrix_out, last.as_ref()) {
        write_atomic(path, &matrix_to_csv(x))?;
    }
    if !passed {
        eprintln!("fixed-point iteration did not converge within {max_iter} iterations");
    }
    Ok(Output {
        text: report("solve", Some(&m.sha256), None, result),
        passed,
    })
}

fn enumerate(m: &LoadedModel) -> anyhow::Result<Output> {
    let r = enumerate_exact(&m.model)?;
    let mut result = serde_json::to_value(&r)?;
    result["edge_marginals"] = json!(r.edge_marginals.rows());
    Ok(Output {
        text: report("enumerate", Some(&m.sha256), None, result),
        passed: true,
    })
}

fn sample(
    m: &LoadedModel,
    steps: usize,
    chains: usize,
    burnin: usize,
    seed: u64,
    matrix_out: Option<&Path>,
) -> anyhow::Result<Output> {
    let est = empirical_marginals(&m.model, chains, steps, burnin, seed)?;
    if let Some(path) = matrix_out {
        write_atomic(path, &matrix_to_csv(&est.mean))?;
    }
    let mean: Vec<f64> = est.mean.off_diagonal().collect();
    let result = json!({
        "chains": est.chains,
        "steps": est.steps,
        "burnin": est.burnin,
        "mean_edge_density": mean.iter().sum::<f64>() / mean.len().max(1) as f64,
        "edge_marginals": est.mean.rows(),
        "std_err": est.std_err.map(|s| s.rows()),
    });
    Ok(Output {
        text: report("sample", Some(&m.sha256), Some(seed), result),
        passed: true,
    })
}

fn project(
    m: &LoadedModel,
    matrix: &Path,
    delta: f64,
    dim: Option<usize>,
    seed: u64,
) -> anyhow::Result<Output> {
    if !(delta > 0.0 && delta < 1.0) {
        bail!("--delta must lie in (0, 1)");
    }
    let x = load_matrix(matrix, m.model.n_vertices())?;
    let cfg = match dim {
        Some(target_dim) => ProjectionConfig {
            target_dim,
            delta,
            seed,
        },
        None => ProjectionConfig::with_default_dim(delta, seed),
    };
    let c = block_approximation_triangle(&m.model, &x, &cfg)?;
    let n = x.n_vertices() as f64;
    let error = x.one_norm_distance(&c.block.expand())? / (n * (n - 1.0));
    let mut result = serde_json::to_value(&c)?;
    result["normalized_one_norm_error"] = json!(error);
    result["n_communities"] = json!(c.block.n_communities());
    Ok(Output {
        text: report("project", Some(&m.sha256), Some(seed), result),
        passed: true,
    })
}

fn two_block(beta: f64, n: usize, grid: usize, tol: f64) -> anyhow::Result<Output> {
    let points = twoblock::find_intersections(beta, n, grid)?;
    let limit = tol * (n * (n - 1) / 2) as f64;
    let mut passed = true;
    let mut solutions = Vec::new();
    for p in &points {
        let sol = TwoBlockSolution::from_intersection(beta, n, p);
        let residual = twoblock::verify_two_block(&sol)?;
        if residual > limit {
            eprintln!(
                "residual {residual:e} at (x, y) = ({}, {}) exceeds {limit:e}",
                p.x, p.y
            );
            passed = false;
        }
        solutions.push(json!({"solution": sol, "residual": residual}));
    }
    let result = json!({
        "beta": beta,
        "n_vertices": n,
        "grid": grid,
        "residual_limit": limit,
        "non_trivial": points.iter().any(|p| !p.trivial),
        "solutions": solutions,
    });
    Ok(Output {
        text: report("twoblock", None, None, result),
        passed,
    })
}

fn grad_check(m: &LoadedModel, n: usize, corrupt: bool) -> anyhow::Result<Output> {
    if !(2..=GRADCHECK_MAX_VERTICES).contains(&n) {
        bail!("exhaustive gradcheck needs 2 <= N <= {GRADCHECK_MAX_VERTICES}, got {n}");
    }
    let r = if corrupt {
        gradcheck_exhaustive(&m.model, n, |h, x| {
            let mut g = gradient(h, x);
            g.set(0, 1, g.get(0, 1) + 1e-3);
            g
        })
    } else {
        gradcheck_exhaustive(&m.model, n, gradient)
    };
    let mismatch = r.first_mismatch.as_ref().map(|f| {
        let g = SimpleGraph::from_mask(n, f.mask);
        eprintln!(
            "gradient mismatch on graph {:?} at edge {:?}: formula {} vs discrete {}",
            g.edges(),
            f.edge,
            f.formula,
            f.discrete
        );
        json!({
            "graph_mask": f.mask,
            "graph_edges": g.edges(),
            "edge": f.edge,
            "formula": f.formula,
            "discrete": f.discrete,
        })
    });
    let result = json!({
        "n_vertices": r.n_vertices,
        "graphs_checked": r.graphs_checked,
        "coordinates_checked": r.coordinates_checked,
        "max_abs_diff": r.max_abs_diff,
        "tolerance": r.tolerance,
        "passed": r.passed(),
        "first_mismatch": mismatch,
    });
    Ok(Output {
        text: report("gradcheck", Some(&m.sha256), None, result),
        passed: r.passed(),
    })
}

fn run_sweep(
    beta_min: f64,
    beta_max: f64,
    step: f64,
    n: usize,
    grid: usize,
    curves_dir: Option<&Path>,
    curve_points: usize,
) -> anyhow::Result<Output> {
    if !(beta_min > 0.0 && beta_max >= beta_min) {
        bail!("beta range must be positive with --beta-min <= --beta-max");
    }
    let rows = twoblock::sweep(beta_min, beta_max, step, n, grid)?;
    if let Some(dir) = curves_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for beta in twoblock::beta_grid(beta_min, beta_max, step)? {
            let points = twoblock::sample_curves(beta, n, curve_points)?;
            write_atomic(
                &dir.join(format!("curves_beta_{beta}.csv")),
                &curves_csv(&points),
            )?;
        }
    }
    Ok(Output {
        text: sweep_csv(&rows),
        passed: true,
    })
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = match cli.command {
        Command::Analyze { model, lambda } => analyze(&load_model(&model)?, lambda),
        Command::Solve {
            model,
            matrix,
            tol,
            max_iter,
            matrix_out,
        } => solve(
            &load_model(&model)?,
            matrix.as_deref(),
            tol,
            max_iter,
            matrix_out.as_deref(),
        )?,
        Command::Enumerate { model } => enumerate(&load_model(&model)?)?,
        Command::Sample {
            model,
            steps,
            chains,
            burnin,
            seed,
            matrix_out,
        } => sample(
            &load_model(&model)?,
            steps,
            chains,
            burnin,
            seed,
            matrix_out.as_deref(),
        )?,
        Command::Project {
            model,
            matrix,
            delta,
            dim,
            seed,
        } => project(&load_model(&model)?, &matrix, delta, dim, seed)?,
        Command::Twoblock {
            beta,
            n_vertices,
            grid,
            tol,
        } => two_block(beta, n_vertices, grid, tol)?,
        Command::Gradcheck {
            model,
            n_vertices,
            corrupt,
        } => grad_check(&load_model(&model)?, n_vertices, corrupt)?,
        Command::Sweep {
            beta_min,
            beta_max,
            step,
            n_vertices,
            grid,
            curves_dir,
            curve_points,
        } => run_sweep(
            beta_min,
            beta_max,
            step,
            n_vertices,
            grid,
            curves_dir.as_deref(),
            curve_points,
        )?,
    };
    match &cli.out {
        Some(path) => write_atomic(path, &out.text)?,
        None => print!("{}", out.text),
    }
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
