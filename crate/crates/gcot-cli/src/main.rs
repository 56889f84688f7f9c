//! `gcot`: solve grand-canonical transport instances, run the half-filling
//! and multiscale experiments, check bounds and monotonicity, and emit
//! plot-ready CSV/JSON for every desk-scale experiment.
//!
//! Exit codes: 0 ok, 1 usage/input error, 2 infeasible, 3 size cap
//! exceeded, 4 non-convergence.

use clap::{Parser, Subcommand};
use gcot_core::cost::{parse_cost_spec, pairwise_family};
use gcot_core::density::{DensityJson, DiscreteDensity};
use gcot_core::entropic;
use gcot_core::halffill;
use gcot_core::lp;
use gcot_core::monge1d::{self, GridDensity1D, GridDensityJson, Kernel1D};
use gcot_core::plan::{validate_plan, GCPlan, PlanJson};
use gcot_core::support;
use gcot_core::{Error, SCHEMA};
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// CLI-level error: core errors carry the exit-code contract, CSV errors
/// are I/O for our purposes.
enum CliError {
    Core(Error),
    Csv(csv::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Csv(e) => write!(f, "csv: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const DEFAULT_SEED: u64 = 0x6C07;

#[derive(Parser)]
#[command(name = "gcot", version, about = "grand-canonical optimal transport toolkit")]
struct Cli {
    /// Worker threads for the parallel maps (1 keeps runs deterministic
    /// byte for byte; results are identical at any count).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed for every sampled check.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the truncated problem for a density file.
    Solve {
        #[arg(long)]
        density: PathBuf,
        /// Cost spec, e.g. `riesz:s=1`, `const:c=1`, `lj:A=1,B=1,a=12,b=6`.
        #[arg(long)]
        cost: String,
        #[arg(long)]
        nmax: u32,
        /// Exact rational arithmetic backend.
        #[arg(long)]
        exact: bool,
        /// Solve the fixed-particle-number problem instead.
        #[arg(long)]
        canonical: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncation sweep of the same instance.
    Truncation {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        cost: String,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
        #[arg(long, default_value_t = 1e-10)]
        stab_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The six-point diamond at half filling.
    Diamond {
        #[arg(long, default_value_t = 0.7)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Costs of all diamond extreme points along a grid of t.
    Tcurve {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multiscale diamond construction.
    Multiscale {
        #[arg(long)]
        k: u32,
        /// Comma-separated scales ℓ_2,...,ℓ_k (defaults 5,25 when omitted).
        #[arg(long, value_delimiter = ',')]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 0.7)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the point cloud as CSV.
        #[arg(long)]
        points_out: Option<PathBuf>,
    },
    /// 1D Monge plan of a piecewise-constant density.
    Monge1d {
        #[arg(long)]
        density: PathBuf,
        /// 1D kernel: `inv:r`, `riesz:s=2`, `exp`.
        #[arg(long, default_value = "inv:r")]
        kernel: String,
        /// Cross-check against the LP at this many cells.
        #[arg(long)]
        crosscheck: Option<usize>,
        #[arg(long)]
        nmax: Option<u32>,
        #[arg(long, default_value_t = 1e-6)]
        quad_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form support bounds.
    Bounds {
        #[arg(long)]
        theorem: String,
        #[arg(long)]
        mass: f64,
        /// Triangle constant Z.
        #[arg(long)]
        z: Option<f64>,
        /// Kernel envelope m for the bounded theorem.
        #[arg(long)]
        m_lo: Option<f64>,
        /// Kernel envelope M for the bounded theorem.
        #[arg(long)]
        m_hi: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// c-monotonicity check of a plan file.
    CheckMonotone {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        cost: String,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        split_cap: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gibbs-state solve at one temperature.
    Entropic {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        cost: String,
        #[arg(long)]
        nmax: u32,
        #[arg(long)]
        temp: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temperature sweep; `--temps lo:hi:log:n` or `lo:hi:lin:n`.
    Tsweep {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        cost: String,
        #[arg(long)]
        nmax: u32,
        #[arg(long)]
        temps: String,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the data behind one of the four figures.
    Reproduce {
        /// fig1-geometry | fig2-tcurve | fig3-region | fig4-multiscale
        #[arg(long)]
        figure: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // --help/--version are not usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Core(Error::Infeasible(_)) => 2,
        CliError::Core(Error::SizeCap(_, _)) => 3,
        CliError::Core(Error::NonConvergence { .. }) => 4,
        _ => 1,
    }
}

fn load_density(path: &Path) -> gcot_core::Result<DiscreteDensity> {
    let text = std::fs::read_to_string(path)?;
    let json: DensityJson = serde_json::from_str(&text)?;
    DiscreteDensity::from_json(json)
}

fn load_grid_density(path: &Path) -> gcot_core::Result<GridDensity1D> {
    let text = std::fs::read_to_string(path)?;
    let json: GridDensityJson = serde_json::from_str(&text)?;
    GridDensity1D::from_json(json)
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveResult {
    schema: &'static str,
    value: f64,
    plan: PlanJson,
    certificate: lp::DualCertificate,
    residuals: Residuals,
    num_variables: usize,
    iterations: usize,
    exact: bool,
}

#[derive(Serialize)]
struct Residuals {
    normalization: f64,
    density_sup: f64,
    support: (u32, u32),
}

fn run(cli: Cli) -> CliResult<()> {
    let opts = lp::SolveOptions::default();
    match cli.command {
        Command::Solve {
            density,
            cost,
            nmax,
            exact,
            canonical,
            out,
        } => {
            let rho = load_density(&density)?;
            let fam = pairwise_family(parse_cost_spec(&cost)?);
            let opts = lp::SolveOptions { exact, ..opts };
            let sol = match canonical {
                Some(n) => lp::solve_canonical(&rho, n, &fam, &opts)?,
                None => lp::solve_primal(&rho, nmax, &fam, &opts)?,
            };
            let report = validate_plan(&sol.plan, &rho, 1e-9)?;
            let result = SolveResult {
                schema: SCHEMA,
                value: sol.value,
                plan: sol.plan.to_json(),
                certificate: sol.certificate.clone(),
                residuals: Residuals {
                    normalization: report.normalization_residual,
                    density_sup: report.density_residual,
                    support: report.support,
                },
                num_variables: sol.num_variables,
                iterations: sol.iterations,
                exact: sol.exact,
            };
            println!(
                "value {:.12}  gap {:.2e}  support {:?}  vars {}  pivots {}",
                sol.value,
                sol.certificate.gap,
                sol.plan.particle_support(opts.support_tol),
                sol.num_variables,
                sol.iterations
            );
            write_json(&out, &result)
        }
        Command::Truncation {
            density,
            cost,
            from,
            to,
            stab_tol,
            out,
        } => {
            let rho = load_density(&density)?;
            let fam = pairwise_family(parse_cost_spec(&cost)?);
            let sweep = lp::truncation_sweep(&rho, &fam, from, to, stab_tol, &opts)?;
            for row in &sweep.rows {
                println!("nmax {:>3}  value {:.12}", row.nmax, row.value);
            }
            if let Some(n) = sweep.stabilized_at {
                println!("stabilized at nmax {n}");
            }
            write_json(&out, &sweep)
        }
        Command::Diamond { t, out } => {
            let inst = halffill::diamond_instance(t)?;
            let sol = halffill::solve_half_filling(&inst)?;
            let rho = inst.density();
            let fam = pairwise_family(gcot_core::cost::riesz(1.0)?);
            let lp_sol = lp::solve_primal(&rho, 6, &fam, &opts)?;
            let canonical = lp::solve_canonical(&rho, 3, &fam, &opts)?;
            #[derive(Serialize)]
            struct DiamondResult {
                schema: &'static str,
                t: f64,
                points: Vec<Vec<f64>>,
                value: f64,
                argmin: Vec<halffill::ExtremePoint>,
                unique: bool,
                margin: f64,
                lp_value: f64,
                duality_gap: f64,
                canonical_value: f64,
                grand_canonical_strictly_better: bool,
            }
            let result = DiamondResult {
                schema: SCHEMA,
                t,
                points: inst.points().to_vec(),
                value: sol.value,
                argmin: sol.minimizers.clone(),
                unique: sol.unique,
                margin: sol.margin,
                lp_value: lp_sol.value,
                duality_gap: lp_sol.certificate.gap,
                canonical_value: canonical.value,
                grand_canonical_strictly_better: sol.value < canonical.value - 1e-9,
            };
            println!(
                "value {:.12}  argmin {:?}  unique {}  C3 - C = {:.6e}",
                sol.value,
                sol.minimizers.first().map(|m| m.indices.clone()).unwrap_or_default(),
                sol.unique,
                canonical.value - sol.value
            );
            write_json(&out, &result)
        }
        Command::Tcurve { from, to, steps, out } => {
            if !(steps >= 2 && from < to) {
                return Err(Error::InvalidDensity("need from < to and steps >= 2".into()).into());
            }
            let grid: Vec<f64> = (0..steps)
                .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                .collect();
            let curve = halffill::tcurve(&grid)?;
            let mut w = csv::Writer::from_path(&out)?;
            let mut header = vec!["t".to_string()];
            for col in &curve.columns {
                let tag = if col.canonical { "can" } else { "gc" };
                let idx: Vec<String> = col.indices.iter().map(|i| i.to_string()).collect();
                header.push(format!("{tag}:{}", idx.join("-")));
            }
            w.write_record(&header)?;
            for (i, t) in curve.ts.iter().enumerate() {
                let mut row = vec![format!("{t}")];
                for col in &curve.columns {
                    row.push(format!("{}", col.values[i]));
                }
                w.write_record(&row)?;
            }
            w.flush()?;
            println!("wrote {} rows x {} columns to {}", curve.ts.len(), header.len(), out.display());
            Ok(())
        }
        Command::Multiscale { k, scales, t, out, points_out } => {
            let scales = if scales.is_empty() {
                default_scales(k)?
            } else {
                scales
            };
            let sup = halffill::multiscale_support(k, &scales, t)?;
            let pts = halffill::multiscale_points(k, &scales, t)?;
            if let Some(path) = points_out {
                write_points_csv(&path, &pts)?;
            }
            #[derive(Serialize)]
            struct MultiscaleResult {
                schema: &'static str,
                k: u32,
                scales: Vec<f64>,
                t: f64,
                n_minus: u64,
                n_plus: u64,
                cluster_assignment: Vec<usize>,
                levels: Vec<halffill::LevelValidity>,
                scales_valid: bool,
                num_points: usize,
            }
            println!(
                "support {{{}, {}}}  clusters {:?}  scales valid: {}",
                sup.n_minus, sup.n_plus, sup.cluster_assignment, sup.scales_valid
            );
            if !sup.scales_valid {
                eprintln!("warning: a scale is too small for the first-order gap to dominate; see `levels`");
            }
            let result = MultiscaleResult {
                schema: SCHEMA,
                k,
                scales,
                t,
                n_minus: sup.n_minus,
                n_plus: sup.n_plus,
                cluster_assignment: sup.cluster_assignment,
                levels: sup.levels,
                scales_valid: sup.scales_valid,
                num_points: pts.len(),
            };
            write_json(&out, &result)
        }
        Command::Monge1d {
            density,
            kernel,
            crosscheck,
            nmax,
            quad_tol,
            out,
        } => {
            let rho = load_grid_density(&density)?;
            let kernel = Kernel1D::parse(&kernel)?;
            let plan = monge1d::build_monge_plan(&rho)?;
            let cost = monge1d::monge_cost(&rho, &plan, kernel, quad_tol)?;
            let check = match crosscheck {
                Some(cells) => {
                    let nmax = nmax.unwrap_or(plan.n + 2);
                    Some(monge1d::crosscheck_vs_lp(&rho, kernel, cells, nmax, &opts)?)
                }
                None => None,
            };
            #[derive(Serialize)]
            struct MongeResult {
                schema: &'static str,
                n: u32,
                eta: f64,
                cuts: Vec<f64>,
                value: f64,
                quadrature_error: f64,
                blocks: Vec<monge1d::MongeBlock>,
                crosscheck: Option<monge1d::CrosscheckReport>,
            }
            println!(
                "mass split n = {} eta = {:.6}; cost {:.9} (quad err {:.1e})",
                plan.n, plan.eta, cost.value, cost.quadrature_error
            );
            if let Some(c) = &check {
                println!(
                    "LP at {} cells: value {:.9}, |gap| {:.3e}, support {:?} ({})",
                    c.cells,
                    c.lp_value,
                    c.gap,
                    c.lp_support,
                    if c.support_ok { "ok" } else { "UNEXPECTED" }
                );
            }
            let result = MongeResult {
                schema: SCHEMA,
                n: plan.n,
                eta: plan.eta,
                cuts: plan.cuts.clone(),
                value: cost.value,
                quadrature_error: cost.quadrature_error,
                blocks: plan.blocks.clone(),
                crosscheck: check,
            };
            write_json(&out, &result)
        }
        Command::Bounds {
            theorem,
            mass,
            z,
            m_lo,
            m_hi,
            out,
        } => {
            #[derive(Serialize)]
            struct BoundResult {
                schema: &'static str,
                theorem: String,
                mass: f64,
                lo: f64,
                hi: f64,
                integer_support: Vec<u32>,
            }
            let (bound, integer_support) = match theorem.as_str() {
                "coulomb" => {
                    let b = support::bound_coulomb(mass)?;
                    (b.bound, b.integer_support)
                }
                "triangle" => {
                    let b = support::bound_triangle(mass, z.unwrap_or(1.0))?;
                    let ints = b.integer_support();
                    (b, ints)
                }
                "bounded" => {
                    let (lo, hi) = match (m_lo, m_hi) {
                        (Some(a), Some(b)) => (a, b),
                        _ => {
                            return Err(Error::InvalidCost(
                                "bounded theorem needs --m-lo and --m-hi".into(),
                            )
                            .into())
                        }
                    };
                    let b = support::bound_bounded(mass, lo, hi)?;
                    let ints = b.integer_support();
                    (b, ints)
                }
                other => {
                    return Err(Error::InvalidCost(format!(
                        "unknown theorem `{other}` (coulomb | triangle | bounded)"
                    ))
                    .into())
                }
            };
            println!(
                "[{:.6}, {:.6}]  integers {:?}",
                bound.lo, bound.hi, integer_support
            );
            let result = BoundResult {
                schema: SCHEMA,
                theorem,
                mass,
                lo: bound.lo,
                hi: bound.hi,
                integer_support,
            };
            write_json(&out, &result)
        }
        Command::CheckMonotone {
            plan,
            density,
            cost,
            samples,
            split_cap,
            out,
        } => {
            let rho = load_density(&density)?;
            let text = std::fs::read_to_string(&plan)?;
            let plan_json: PlanJson = serde_json::from_str(&text)?;
            let plan = GCPlan::from_json(&plan_json, rho.len())?;
            let fam = pairwise_family(parse_cost_spec(&cost)?);
            let report =
                support::check_c_monotonicity(&plan, &fam, &rho, samples, cli.seed, split_cap)?;
            println!(
                "{}: {} pairs, {} splits, {} violations",
                if report.ok { "ok" } else { "VIOLATED" },
                report.pairs_checked,
                report.splits_checked,
                report.violations.len()
            );
            write_json(&out, &report)
        }
        Command::Entropic {
            density,
            cost,
            nmax,
            temp,
            tol,
            max_iter,
            out,
        } => {
            let rho = load_density(&density)?;
            let fam = pairwise_family(parse_cost_spec(&cost)?);
            let sol = entropic::solve_entropic(&rho, nmax, &fam, temp, tol, max_iter, &opts)?;
            #[derive(Serialize)]
            struct EntropicResult {
                schema: &'static str,
                temperature: f64,
                psi: Vec<f64>,
                log_z: f64,
                free_energy: f64,
                primal_value: f64,
                density_residual: f64,
                iterations: usize,
                plan: PlanJson,
            }
            println!(
                "T {:.3e}: free energy {:.9}, residual {:.2e}, {} iterations",
                temp, sol.free_energy, sol.density_residual, sol.iterations
            );
            let result = EntropicResult {
                schema: SCHEMA,
                temperature: sol.temperature,
                psi: sol.psi.clone(),
                log_z: sol.log_z,
                free_energy: sol.free_energy,
                primal_value: sol.primal_value,
                density_residual: sol.density_residual,
                iterations: sol.iterations,
                plan: sol.plan.to_json(),
            };
            write_json(&out, &result)
        }
        Command::Tsweep {
            density,
            cost,
            nmax,
            temps,
            tol,
            max_iter,
            out,
        } => {
            let rho = load_density(&density)?;
            let fam = pairwise_family(parse_cost_spec(&cost)?);
            let ts = parse_temps(&temps)?;
            let rows = entropic::temperature_sweep(&rho, nmax, &fam, &ts, tol, max_iter, &opts)?;
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record([
                "temperature",
                "free_energy",
                "rel_entropy_vs_poisson",
                "l1_to_poisson",
                "density_residual",
            ])?;
            for r in &rows {
                w.write_record(&[
                    format!("{}", r.temperature),
                    format!("{}", r.free_energy),
                    format!("{}", r.rel_entropy_vs_poisson),
                    format!("{}", r.l1_to_poisson),
                    format!("{}", r.density_residual),
                ])?;
            }
            w.flush()?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Reproduce { figure, out_dir } => reproduce(&figure, &out_dir),
    }
}

fn default_scales(k: u32) -> gcot_core::Result<Vec<f64>> {
    match k {
        1 => Ok(vec![]),
        2 => Ok(vec![5.0]),
        3 => Ok(vec![5.0, 25.0]),
        _ => Err(Error::InvalidDensity(
            "no default scales beyond k = 3; pass --scales".into(),
        )),
    }
}

fn parse_temps(spec: &str) -> gcot_core::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(Error::InvalidCost(format!(
            "temperature spec `{spec}` is not lo:hi:log|lin:count"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidCost("bad lower temperature".into()))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidCost("bad upper temperature".into()))?;
    let count: usize = parts[3]
        .parse()
        .map_err(|_| Error::InvalidCost("bad count".into()))?;
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::InvalidCost("need 0 < lo < hi and count >= 2".into()));
    }
    let ts = match parts[2] {
        "log" => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
        "lin" => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
        other => {
            return Err(Error::InvalidCost(format!(
                "unknown spacing `{other}` (log | lin)"
            )))
        }
    };
    Ok(ts)
}

fn write_points_csv(path: &Path, pts: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "x", "y"])?;
    for (i, p) in pts.iter().enumerate() {
        w.write_record(&[format!("{i}"), format!("{}", p[0]), format!("{}", p[1])])?;
    }
    w.flush()?;
    Ok(())
}

fn reproduce(figure: &str, out_dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)?;
    match figure {
        "fig1-geometry" => {
            let pts = halffill::diamond_geometry(0.7)?;
            let path = out_dir.join("fig1_geometry.csv");
            write_points_csv(&path, &pts)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        "fig2-tcurve" => {
            let grid: Vec<f64> = (0..200).map(|i| 0.05 + 0.9 * i as f64 / 199.0).collect();
            let curve = halffill::tcurve(&grid)?;
            let path = out_dir.join("fig2_tcurve.csv");
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["t".to_string()];
            for col in &curve.columns {
                let tag = if col.canonical { "can" } else { "gc" };
                let idx: Vec<String> = col.indices.iter().map(|i| i.to_string()).collect();
                header.push(format!("{tag}:{}", idx.join("-")));
            }
            w.write_record(&header)?;
            for (i, t) in curve.ts.iter().enumerate() {
                let mut row = vec![format!("{t}")];
                for col in &curve.columns {
                    row.push(format!("{}", col.values[i]));
                }
                w.write_record(&row)?;
            }
            w.flush()?;
            println!("wrote {}", path.display());
            Ok(())
        }
        "fig3-region" => {
            // move the rightmost outer point over a grid around its home
            let xs: Vec<f64> = (0..61).map(|i| 0.8 + 2.4 * i as f64 / 60.0).collect();
            let ys: Vec<f64> = (0..41).map(|i| -1.2 + 2.4 * i as f64 / 40.0).collect();
            let scan = halffill::region_scan(0.7, 4, &xs, &ys)?;
            let path = out_dir.join("fig3_region.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["x", "y", "grand_canonical"])?;
            for (iy, y) in scan.ys.iter().enumerate() {
                for (ix, x) in scan.xs.iter().enumerate() {
                    let gc = scan.mask[iy * scan.xs.len() + ix];
                    w.write_record(&[format!("{x}"), format!("{y}"), format!("{}", gc as u8)])?;
                }
            }
            w.flush()?;
            println!("wrote {}", path.display());
            Ok(())
        }
        "fig4-multiscale" => {
            for (k, scales) in [(2u32, vec![5.0]), (3u32, vec![5.0, 25.0])] {
                let pts = halffill::multiscale_points(k, &scales, 0.7)?;
                let path = out_dir.join(format!("fig4_multiscale_k{k}.csv"));
                write_points_csv(&path, &pts)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        other => Err(CliError::Core(Error::InvalidCost(format!(
            "unknown figure tag `{other}` (fig1-geometry | fig2-tcurve | fig3-region | fig4-multiscale)"
        )))),
    }
}
