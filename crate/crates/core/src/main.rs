//! Command-line front end. Machine-readable JSON goes to stdout, human
//! diagnostics to stderr.
//!
//! Exit codes: 0 success; 1 check failed (violated monotonicity, failed
//! oracle); 2 bad input (unreadable or malformed file or config, invalid
//! arguments); 3 unbalanced masses without `--reservoir`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Number, Value};

use zerocoupling::io::{self, fmt_f64};
use zerocoupling::measures::Point;
use zerocoupling::monotone::{
    is_cyclically_monotone, rockafellar_potential, ClosedFormGradient, DEFAULT_TOL,
};
use zerocoupling::oracle;
use zerocoupling::proper::{
    check_cone_condition, check_proper, half_space_probe, residual_decomposition, DEFAULT_EPS_GRID,
};
use zerocoupling::regvar::{
    check_gradient_homogeneity, graph_deviation, graph_support, scaled_subdifferential,
    tail_coupling_experiment, ExperimentConfig, ExperimentReport, Window,
};
use zerocoupling::transport::solve_zero_coupling;
use zerocoupling::Error;

#[derive(Parser)]
#[command(
    name = "zerocoupling",
    version,
    about = "Cyclically monotone zero-couplings of measures on punctured space"
)]
struct Cli {
    /// Master seed for all randomness (decimal or 0x-prefixed hex).
    #[arg(long, global = true, value_parser = parse_seed, default_value = "0xC0FFEE")]
    master_seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal zero-coupling between two measure CSV files.
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Let the origin absorb and supply mass.
        #[arg(long)]
        reservoir: bool,
        /// Coupling CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cyclical monotonicity of a support CSV.
    CheckCm {
        #[arg(long)]
        support: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Rockafellar potential of a cyclically monotone support CSV.
    Potential {
        #[arg(long)]
        support: PathBuf,
        #[arg(long, default_value_t = 0)]
        base: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical couplings of regularly varying samples against the limit coupling.
    TailExperiment {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        n: usize,
        /// Comma-separated t values in [1, n].
        #[arg(long, value_delimiter = ',', required = true)]
        t_grid: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Window `r_lo,r_hi,y_max`.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, 3.0, 6.0])]
        window: Vec<f64>,
        #[arg(long, default_value_t = 128)]
        reference_resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form checks of the planar potential y⁴/x².
    OracleVerify {
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Multiply the gradient by this factor (negative control).
        #[arg(long, default_value_t = 1.0)]
        perturb: f64,
    },
    /// Cone condition for two homogeneous measure configs.
    ConeCondition {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Experimental: half-space masses of two homogeneous measure configs.
    HalfSpaceProbe {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unbalanced { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<ExitCode, Failure>;

/// JSON number with 17 significant digits; non-finite values become strings.
fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(
            fmt_f64(x)
                .parse::<Number>()
                .expect("finite float is a JSON number"),
        )
    } else {
        Value::String(format!("{x}"))
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn point(p: &Point) -> Value {
    nums(p.coords())
}

fn emit(master_seed: u64, mut v: Map<String, Value>) {
    v.insert("master_seed".into(), json!(master_seed));
    println!("{}", Value::Object(v));
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn read_config(path: &Path) -> Result<io::ModelConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })?;
    io::parse_config(&text).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn solve(seed: u64, mu: &Path, nu: &Path, reservoir: bool, out: Option<&Path>) -> CliResult {
    let mu = io::read_measure(open(mu)?)?;
    let nu = io::read_measure(open(nu)?)?;
    let g = solve_zero_coupling(&mu, &nu, reservoir)?;
    if let Some(path) = out {
        io::write_coupling(&g, create(path)?)?;
    }
    let res = residual_decomposition(&g);
    let support = if reservoir {
        g.support().with_origin()
    } else {
        g.support()
    };
    let cm = is_cyclically_monotone(&support, DEFAULT_TOL);
    emit(
        seed,
        object(json!({
            "cost": num(g.cost()),
            "left_residual": num(res.left_residual),
            "right_residual": num(res.right_residual),
            "proper": check_proper(&g, DEFAULT_TOL),
            "cm_check": cm.ok,
        })),
    );
    Ok(ExitCode::SUCCESS)
}

fn check_cm(seed: u64, support: &Path, tol: f64) -> CliResult {
    let s = io::read_support(open(support)?)?;
    let r = is_cyclically_monotone(&s, tol);
    if let Some(c) = &r.witness_cycle {
        eprintln!("violating cycle through pairs {c:?}");
    }
    emit(
        seed,
        object(json!({ "ok": r.ok, "witness_cycle": r.witness_cycle })),
    );
    Ok(if r.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn potential(seed: u64, support: &Path, base: usize, tol: f64, out: &Path) -> CliResult {
    let s = io::read_support(open(support)?)?;
    let p = match rockafellar_potential(&s, base, tol) {
        Err(Error::NotCyclicallyMonotone) => {
            eprintln!("support is not cyclically monotone");
            emit(seed, object(json!({ "ok": false })));
            return Ok(ExitCode::from(1));
        }
        other => other?,
    };
    io::write_potential(&p, create(out)?)?;
    emit(
        seed,
        object(
            json!({ "ok": true, "nodes": p.nodes().len(), "max_violation": num(p.max_violation()) }),
        ),
    );
    Ok(ExitCode::SUCCESS)
}

fn write_report(report: &ExperimentReport, path: &Path) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io_fail = |e: csv::Error| Failure {
        code: 2,
        message: e.to_string(),
    };
    w.write_record([
        "t",
        "seed",
        "n",
        "fell_dist",
        "m0_dist",
        "left_residual",
        "cost",
    ])
    .map_err(io_fail)?;
    for r in &report.rows {
        w.write_record([
            fmt_f64(r.t),
            r.seed.to_string(),
            r.n.to_string(),
            fmt_f64(r.fell_dist),
            fmt_f64(r.m0_dist),
            fmt_f64(r.left_residual),
            fmt_f64(r.cost),
        ])
        .map_err(io_fail)?;
    }
    w.flush().map_err(|e| Failure {
        code: 2,
        message: e.to_string(),
    })
}

#[allow(clippy::too_many_arguments)]
fn tail_experiment(
    seed: u64,
    p: &Path,
    q: &Path,
    n: usize,
    t_grid: Vec<f64>,
    seeds: usize,
    window: &[f64],
    reference_resolution: usize,
    out: &Path,
) -> CliResult {
    let p = read_config(p)?.model()?;
    let q = read_config(q)?.model()?;
    let mut cfg = ExperimentConfig::new(n, t_grid);
    cfg.seeds = seeds;
    cfg.master_seed = seed;
    cfg.window = Window {
        r_lo: window[0],
        r_hi: window[1],
        y_max: window[2],
    };
    cfg.reference_resolution = reference_resolution;
    let report = tail_coupling_experiment(&p, &q, &cfg)?;
    for r in report.rows.iter().filter(|r| r.surviving == 0) {
        eprintln!(
            "t = {}, seed = {:#x}: no pairs inside the window",
            r.t, r.seed
        );
    }
    fs::create_dir_all(out).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", out.display()),
    })?;
    write_report(&report, &out.join("tail_report.csv"))?;
    let surviving: Vec<f64> = cfg
        .t_grid
        .iter()
        .map(|&t| {
            let c: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.t == t)
                .map(|r| r.surviving as f64)
                .collect();
            zerocoupling::regvar::median(&c)
        })
        .collect();
    let summary = object(json!({
        "n": n,
        "seeds": seeds,
        "t_grid": nums(&cfg.t_grid),
        "window": nums(window),
        "reference_pairs": report.reference_pairs,
        "median_fell_dist": nums(&report.median_fell),
        "median_m0_dist": nums(&report.median_m0),
        "median_surviving": nums(&surviving),
        "fell_non_increasing": report.fell_non_increasing(),
    }));
    let mut with_seed = summary.clone();
    with_seed.insert("master_seed".into(), json!(seed));
    fs::write(
        out.join("tail_summary.json"),
        format!("{}\n", Value::Object(with_seed)),
    )
    .map_err(|e| Failure {
        code: 2,
        message: e.to_string(),
    })?;
    emit(seed, summary);
    Ok(ExitCode::SUCCESS)
}

fn oracle_verify(seed: u64, resolution: usize, tol: f64, perturb: f64) -> CliResult {
    let grad = |p: &[f64]| {
        oracle::psi55_grad(p)
            .iter()
            .map(|c| perturb * c)
            .collect::<Vec<f64>>()
    };
    let push = oracle::verify_pushforward_55_with(&grad, resolution, tol)?;
    let map = ClosedFormGradient {
        dim: 2,
        grad: &grad,
        in_domain: &oracle::in_domain55,
    };
    let points: Vec<Point> = oracle::check_grid()
        .iter()
        .map(|p| Point::new(p.to_vec()))
        .collect::<Result<_, _>>()?;
    let psi = |x: &Point| oracle::psi55(x.coords()).value;
    let homog = check_gradient_homogeneity(
        &map,
        Some(&psi as &dyn Fn(&Point) -> f64),
        (1.0, 1.0),
        &points,
        &[0.5, 2.0, 10.0],
        1e-12,
    )?;
    let graph = graph_support(&map, &points)?;
    let mut scaling_dev: f64 = 0.0;
    for lambda in [0.5, 2.0] {
        scaling_dev = scaling_dev.max(graph_deviation(
            &scaled_subdifferential(&graph, lambda, lambda)?,
            &map,
        )?);
    }
    let coupling = oracle::coupling_homogeneity_55(resolution)?;
    let pass = push.pass && homog.holds && scaling_dev <= 1e-12 && coupling.report.holds;
    for s in push.sets.iter().filter(|s| s.rel_error > tol) {
        eprintln!(
            "{}: pushed {} vs closed form {}",
            s.label, s.pushed_mass, s.closed_form
        );
    }
    emit(
        seed,
        object(json!({
            "resolution": resolution,
            "tol": num(tol),
            "pushforward": {
                "max_rel_error": num(push.max_rel_error),
                "right_half_mass": num(push.right_half_mass),
                "max_fd_error": num(push.max_fd_error),
                "max_value_homogeneity_error": num(push.max_value_homogeneity_error),
                "pass": push.pass,
            },
            "gradient_homogeneity": {
                "max_grad_deviation": num(homog.max_grad_deviation),
                "max_potential_deviation": homog.max_potential_deviation.map(num),
                "pass": homog.holds,
            },
            "scaling_lemma": { "max_deviation": num(scaling_dev), "pass": scaling_dev <= 1e-12 },
            "coupling_homogeneity": {
                "quadrature_error": num(coupling.quadrature_error),
                "tol": num(coupling.tol),
                "max_rel_error": num(coupling.report.max_rel_error),
                "support_ok": coupling.report.support_ok,
                "pass": coupling.report.holds,
            },
            "pass": pass,
        })),
    );
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cone_condition(seed: u64, mu: &Path, nu: &Path, resolution: usize) -> CliResult {
    let mu = read_config(mu)?.measure;
    let nu = read_config(nu)?.measure;
    let r = check_cone_condition(&mu, &nu, &DEFAULT_EPS_GRID, resolution)?;
    let details: Vec<Value> = r
        .directions
        .iter()
        .map(|d| {
            json!({
                "direction": point(&d.direction),
                "eps": d.eps.map(num),
                "cap_mass": num(d.cap_mass),
                "status": d.status.to_string(),
            })
        })
        .collect();
    emit(
        seed,
        object(
            json!({ "criterion": "cone_condition", "holds": r.holds, "status": r.status.to_string(), "details": details }),
        ),
    );
    Ok(ExitCode::SUCCESS)
}

fn half_space(seed: u64, mu: &Path, nu: &Path, resolution: usize) -> CliResult {
    let mu = read_config(mu)?.measure;
    let nu = read_config(nu)?.measure;
    let rows = half_space_probe(&mu, &nu, resolution)?;
    let holds = rows.iter().all(|r| r.holds);
    let details: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "direction": point(&r.direction),
                "mu_mass": r.mu_mass.to_string(),
                "nu_mass": r.nu_mass.to_string(),
                "holds": r.holds,
            })
        })
        .collect();
    emit(
        seed,
        object(json!({ "criterion": "half_space_probe", "holds": holds, "details": details })),
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CliResult {
    let seed = cli.master_seed;
    match cli.command {
        Command::Solve {
            mu,
            nu,
            reservoir,
            out,
        } => solve(seed, &mu, &nu, reservoir, out.as_deref()),
        Command::CheckCm { support, tol } => check_cm(seed, &support, tol),
        Command::Potential {
            support,
            base,
            tol,
            out,
        } => potential(seed, &support, base, tol, &out),
        Command::TailExperiment {
            p,
            q,
            n,
            t_grid,
            seeds,
            window,
            reference_resolution,
            out,
        } => tail_experiment(
            seed,
            &p,
            &q,
            n,
            t_grid,
            seeds,
            &window,
            reference_resolution,
            &out,
        ),
        Command::OracleVerify {
            resolution,
            tol,
            perturb,
        } => oracle_verify(seed, resolution, tol, perturb),
        Command::ConeCondition { mu, nu, resolution } => cone_condition(seed, &mu, &nu, resolution),
        Command::HalfSpaceProbe { mu, nu, resolution } => half_space(seed, &mu, &nu, resolution),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
