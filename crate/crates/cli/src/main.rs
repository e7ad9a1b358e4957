//! Command-line driver: operator verification, glue construction, simulation
//! runs, convergence studies, spectrum analysis, and energy traces.
//!
//! Outputs are CSV files with a single timestamp header line followed by a
//! deterministic body; numeric values carry 17 significant digits.

use clap::{Args, Parser, Subcommand};
use gluewave::harness::{
    assemble_global_operator, build_scenario, convergence_study, operator_spectrum,
    run_simulation, RunConfig, Scenario,
};
use gluewave::{sbp, Error};
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gluewave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operator-level utilities
    #[command(subcommand)]
    Ops(OpsCommand),
    /// Glue-grid projection utilities
    #[command(subcommand)]
    Glue(GlueCommand),
    /// Run one simulation and write errors.csv + energy.csv
    Run(RunArgs),
    /// Convergence study over doubling resolutions; writes errors.csv
    Converge(ConvergeArgs),
    /// Assemble the global operator and write its spectrum.csv
    Eig(EigArgs),
    /// Run and write the energy trace energy.csv
    Energy(RunArgs),
}

#[derive(Subcommand)]
enum OpsCommand {
    /// Print the derivative-accuracy report as CSV (q, N, degree, region, max_error)
    Verify(OpsVerifyArgs),
    /// Regenerate the embedded coefficient table from the defining conditions
    Generate(OpsGenerateArgs),
}

#[derive(Args)]
struct OpsVerifyArgs {
    /// boundary order (default: all of 1..=5)
    #[arg(long)]
    q: Option<usize>,
    /// comma-separated cell counts
    #[arg(long, default_value = "16,32,64")]
    n: String,
}

#[derive(Args)]
struct OpsGenerateArgs {
    /// output file (defaults to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GlueCommand {
    /// Solve the projection coefficients for one order; write the
    /// coefficient file and a certificate CSV
    Build(GlueBuildArgs),
}

#[derive(Args)]
struct GlueBuildArgs {
    #[arg(long)]
    q: usize,
    /// spend null-space freedom on clustering round-trip eigenvalues
    #[arg(long)]
    refine: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config file (flags override file values)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// explicit time step (otherwise a CFL-based choice)
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// number of doubling levels
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

#[derive(Args)]
struct EigArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<String>,
    q: Option<usize>,
    n: Option<usize>,
    alpha: Option<f64>,
    t_final: Option<f64>,
    dt: Option<f64>,
    out: Option<PathBuf>,
}

fn resolve_config(args: &RunArgs) -> Result<(RunConfig, PathBuf), Error> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))?
        }
        None => FileConfig::default(),
    };
    let scenario_name = args
        .scenario
        .clone()
        .or(file.scenario)
        .ok_or_else(|| Error::ConfigParse("missing scenario".into()))?;
    let scenario: Scenario = scenario_name.parse()?;
    let cfg = RunConfig {
        scenario,
        q: args.q.or(file.q).unwrap_or(2),
        n: args.n.or(file.n).unwrap_or(64),
        alpha: args.alpha.or(file.alpha).unwrap_or(1.0),
        t_final: args.t_final.or(file.t_final).unwrap_or(1.0),
        dt: args.dt.or(file.dt),
    };
    let out = std::env::var_os("GLUEWAVE_OUTDIR")
        .map(PathBuf::from)
        .or_else(|| {
            if args.out != Path::new(".") {
                Some(args.out.clone())
            } else {
                file.out.clone().or(Some(args.out.clone()))
            }
        })
        .unwrap();
    Ok((cfg, out))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_header() -> String {
    format!("# generated {}\n", chrono::Utc::now().to_rfc3339())
}

fn write_csv(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(csv_header().as_bytes())?;
    f.write_all(body.as_bytes())?;
    Ok(path)
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            let payload = serde_json::json!({
                "error": e.to_string(),
                "code": e.exit_code(),
            });
            eprintln!("{payload}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ops(OpsCommand::Verify(a)) => ops_verify(a),
        Command::Ops(OpsCommand::Generate(a)) => ops_generate(a),
        Command::Glue(GlueCommand::Build(a)) => glue_build(a),
        Command::Run(a) => run(a),
        Command::Converge(a) => converge(a),
        Command::Eig(a) => eig(a),
        Command::Energy(a) => energy(a),
    }
}

fn ops_verify(args: OpsVerifyArgs) -> Result<(), Error> {
    let qs: Vec<usize> = match args.q {
        Some(q) => vec![q],
        None => (1..=5).collect(),
    };
    let ns: Vec<usize> = args
        .n
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::ConfigParse(format!("bad N '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    let mut out = String::from("q,N,degree,region,max_error\n");
    let mut any_flagged = false;
    for &q in &qs {
        for &n in &ns {
            let op = match sbp::build_sbp(q, n) {
                Ok(op) => op,
                Err(Error::GridTooSmall { .. }) => continue,
                Err(e) => return Err(e),
            };
            for e in sbp::verify_sbp_accuracy(&op) {
                any_flagged |= e.flagged;
                out.push_str(&format!(
                    "{q},{n},{},{},{}\n",
                    e.degree,
                    e.region,
                    num(e.max_error)
                ));
            }
        }
    }
    print!("{}{}", csv_header(), out);
    if any_flagged {
        return Err(Error::BadCoefficientData(
            "operator accuracy report contains flagged degrees".into(),
        ));
    }
    Ok(())
}

fn ops_generate(args: OpsGenerateArgs) -> Result<(), Error> {
    let tables = sbp::derive::derive_all()?;
    let text = sbp::format_data(&tables);
    match args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn glue_build(args: GlueBuildArgs) -> Result<(), Error> {
    use gluewave::glue;
    let q = args.q;
    let system = glue::assemble_projection_constraints(q)?;
    let coeffs = glue::solve_projection_coefficients(&system, args.refine)?;
    let op = sbp::build_sbp(q, 64)?;
    let pair = glue::realize_pair(&coeffs, &op, -1.0, 1.0);

    // coefficient file in the same plain-text style as the operator table
    let mut text = String::new();
    text.push_str(&format!(
        "projection q={} interior_order={} l={} s_plus_1={} r={} n={}\n",
        q,
        2 * q,
        coeffs.params.l,
        coeffs.params.s_plus_1,
        coeffs.params.r,
        coeffs.params.n
    ));
    for j in 1..=coeffs.params.l {
        let row: Vec<String> = (0..=coeffs.params.n)
            .map(|i| num(coeffs.c_right[[j - 1, i]]))
            .collect();
        text.push_str(&format!("interior {j} {}\n", row.join(" ")));
    }
    for k in 0..coeffs.params.s_plus_1 {
        for j in 0..coeffs.params.r {
            let row: Vec<String> = (0..=coeffs.params.n)
                .map(|i| num(coeffs.alpha[[k, j, i]]))
                .collect();
            text.push_str(&format!("boundary {k} {j} {}\n", row.join(" ")));
        }
    }
    text.push_str("end\n");
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join(format!("glue_q{q}.txt")), text)?;

    // certificate
    let expected = [(1usize, 11usize, 6usize), (2, 76, 96), (3, 222, 324), (4, 524, 928), (5, 1020, 2020)];
    let (nc_exp, nd_exp) = expected
        .iter()
        .find(|(eq, _, _)| *eq == q)
        .map(|(_, a, b)| (*a, *b))
        .unwrap();
    let mut cert = String::from("check,residual,threshold,status\n");
    let mut push = |name: &str, value: f64, thresh: f64, cert: &mut String| {
        let status = if value <= thresh { "pass" } else { "fail" };
        cert.push_str(&format!("{name},{},{},{status}\n", num(value), num(thresh)));
        value <= thresh
    };
    let mut all = true;
    all &= push(
        "constraint_count",
        (system.constraint_count() as f64 - nc_exp as f64).abs(),
        0.0,
        &mut cert,
    );
    all &= push(
        "unknown_count",
        (system.unknown_count() as f64 - nd_exp as f64).abs(),
        0.0,
        &mut cert,
    );
    all &= push("solve_residual", coeffs.residual, 1e-8, &mut cert);
    all &= push(
        "compatibility",
        pair.compatibility_residual(),
        1e-12,
        &mut cert,
    );
    // polynomial exactness in both directions
    let (gi, gb, fi, fb) = pair_accuracy(&pair, &op, q);
    all &= push("g2f_interior_exactness", gi, 1e-10, &mut cert);
    all &= push("g2f_boundary_exactness", gb, 1e-10, &mut cert);
    all &= push("f2g_interior_exactness", fi, 1e-10, &mut cert);
    all &= push("f2g_boundary_exactness", fb, 1e-10, &mut cert);
    write_csv(&args.out, &format!("certificate_q{q}.csv"), &cert)?;
    if !all {
        return Err(Error::InconsistentConstraints {
            residual: coeffs.residual,
        });
    }
    Ok(())
}

/// Worst-case projection errors on global Legendre polynomials, split
/// interior/closure, both directions.
fn pair_accuracy(
    pair: &gluewave::glue::ProjectionPair,
    op: &gluewave::SbpOperator1D,
    q: usize,
) -> (f64, f64, f64, f64) {
    use gluewave::glue::GlueParams;
    use gluewave::poly::legendre;
    let params = GlueParams::for_order(q).unwrap();
    let (s1, r, n_modes) = (params.s_plus_1, params.r, params.n);
    let x = op.grid();
    let n_pts = op.n_points;
    let n_int = pair.target_space.n_intervals();
    let (mut gi, mut gb, mut fi, mut fb) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for d in 0..(2 * q) {
        let f = |v: f64| legendre(d, v);
        let fx = x.mapv(f);
        let modal = pair.target_space.project_function(f);
        let back = pair.p_g2f.dot(&modal);
        let fwd = pair.p_f2g.dot(&fx);
        for k in 0..n_pts {
            let e = (back[k] - fx[k]).abs();
            let closure = k < s1 || k >= n_pts - s1;
            if closure {
                if d < q {
                    gb = gb.max(e);
                }
            } else {
                gi = gi.max(e);
            }
        }
        for a in 0..pair.target_space.n_dofs() {
            let e = (fwd[a] - modal[a]).abs();
            let interval = a / (n_modes + 1);
            let closure = interval < r || interval >= n_int - r;
            if closure {
                if d < q {
                    fb = fb.max(e);
                }
            } else {
                fi = fi.max(e);
            }
        }
    }
    (gi, gb, fi, fb)
}

fn run(args: RunArgs) -> Result<(), Error> {
    let (cfg, out) = resolve_config(&args)?;
    let res = run_simulation(&cfg)?;
    let mut body = String::from("q,N,scenario,epsilon,rate\n");
    body.push_str(&format!(
        "{},{},{},{},\n",
        cfg.q,
        cfg.n,
        cfg.scenario.name(),
        num(res.error)
    ));
    write_csv(&out, "errors.csv", &body)?;
    write_energy_csv(&out, &res.energy)?;
    println!(
        "scenario={} q={} N={} dofs={} steps={} dt={} epsilon={}",
        cfg.scenario.name(),
        cfg.q,
        cfg.n,
        res.dofs,
        res.steps,
        num(res.dt),
        num(res.error)
    );
    Ok(())
}

fn write_energy_csv(dir: &Path, samples: &[(f64, f64)]) -> Result<(), Error> {
    let mut body = String::from("t,E\n");
    for (t, e) in samples {
        body.push_str(&format!("{},{}\n", num(*t), num(*e)));
    }
    write_csv(dir, "energy.csv", &body)?;
    Ok(())
}

fn converge(args: ConvergeArgs) -> Result<(), Error> {
    let (cfg, out) = resolve_config(&args.run)?;
    let rows = convergence_study(&cfg, args.levels)?;
    let mut body = String::from("q,N,scenario,epsilon,rate\n");
    for (n, eps, rate) in &rows {
        let rate_s = rate.map(|r| format!("{r:.3}")).unwrap_or_default();
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            cfg.q,
            n,
            cfg.scenario.name(),
            num(*eps),
            rate_s
        ));
        println!(
            "N={n:6} epsilon={} rate={}",
            num(*eps),
            if rate_s.is_empty() { "-" } else { &rate_s }
        );
    }
    write_csv(&out, "errors.csv", &body)?;
    Ok(())
}

fn eig(args: EigArgs) -> Result<(), Error> {
    let (cfg, out) = resolve_config(&args.run)?;
    let sys = build_scenario(&cfg)?;
    let a = assemble_global_operator(&sys)?;
    let eigs = operator_spectrum(&a);
    let mut body = String::from("re,im\n");
    for e in &eigs {
        body.push_str(&format!("{},{}\n", num(e.re), num(e.im)));
    }
    write_csv(&out, "spectrum.csv", &body)?;
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let max_abs_re = eigs.iter().map(|e| e.re.abs()).fold(0.0f64, f64::max);
    println!(
        "dofs={} max_re={} max_abs_re={}",
        sys.dof_count(),
        num(max_re),
        num(max_abs_re)
    );
    Ok(())
}

fn energy(args: RunArgs) -> Result<(), Error> {
    let (cfg, out) = resolve_config(&args)?;
    let res = run_simulation(&cfg)?;
    write_energy_csv(&out, &res.energy)?;
    let e0 = res.energy.first().map(|s| s.1).unwrap_or(0.0);
    let e1 = res.energy.last().map(|s| s.1).unwrap_or(0.0);
    println!(
        "E(0)={} E(t_final)={} drift={}",
        num(e0),
        num(e1),
        num((e1 - e0) / e0)
    );
    Ok(())
}
