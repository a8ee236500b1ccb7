//! Command-line front end: simulate, approximate, solve, check, study and
//! the worked example. Every run writes `manifest.json` into `--out`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sweep_core::approximation::{approximate_feasible, Mesh, ReferenceMode};
use sweep_core::dynamics::{catching_up_integrate, wellposedness_bounds};
use sweep_core::example81::{example81_solve, given_reference_mode, Example81Mode};
use sweep_core::io::{self, CertificateFile, LoadedProblem, RunManifest, TripleFile};
use sweep_core::optimality::{recover_multipliers, residual_el, residual_explicit};
use sweep_core::optimizer::{convergence_study, solve_pk, OptimizerConfig};
use sweep_core::path::ContinuousPath;
use sweep_core::{Error, Vector};

#[derive(Parser)]
#[command(name = "sweep", version, about = "Discrete approximations of controlled polyhedral sweeping processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the band half-width `tau` of the problem file.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Seed for randomized diagnostics.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    #[value(name = "fixed_point")]
    FixedPoint,
    Reference,
}

impl Mode {
    fn label(self) -> &'static str {
        match self {
            Mode::FixedPoint => "fixed_point",
            Mode::Reference => "reference",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Form {
    Explicit,
    El,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the sweeping process with the catching-up scheme.
    Simulate {
        problem: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
    },
    /// Build the feasible discrete triple around the problem's reference.
    Approximate {
        problem: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Solve the discrete optimal control problem.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Mode::FixedPoint)]
        mode: Mode,
    },
    /// Verify a dual certificate for a discrete triple.
    Check {
        problem: PathBuf,
        #[arg(long)]
        triple: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::FixedPoint)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Form::Explicit)]
        form: Form,
    },
    /// Convergence study over several mesh sizes in reference mode.
    Study {
        problem: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10usize, 20, 40, 80])]
        ks: Vec<usize>,
    },
    /// Closed-form solution of the one-dimensional worked example.
    Example81 {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Mode::FixedPoint)]
        mode: Mode,
    },
}

enum Outcome {
    Success,
    CheckFailed,
}

fn load(path: &Path, common: &Common) -> Result<LoadedProblem, Error> {
    let mut loaded = io::load_problem(path)?;
    if let Some(tau) = common.tau {
        loaded.spec.tau = tau;
        loaded.spec.validate()?;
    }
    Ok(loaded)
}

fn reference_for(loaded: &LoadedProblem, mode: Mode) -> Result<Option<&ContinuousPath>, Error> {
    match mode {
        Mode::FixedPoint => Ok(None),
        Mode::Reference => loaded
            .reference
            .as_ref()
            .map(Some)
            .ok_or_else(|| Error::Precondition("reference mode needs a `reference` block in the problem file".into())),
    }
}

fn as_mode(reference: Option<&ContinuousPath>) -> ReferenceMode<'_> {
    match reference {
        Some(r) => ReferenceMode::Path(r),
        None => ReferenceMode::FixedPoint,
    }
}

fn output(manifest: &mut RunManifest, dir: &Path, name: &str) -> PathBuf {
    manifest.outputs.push(name.into());
    dir.join(name)
}

fn run(cli: &Cli, manifest: &mut RunManifest) -> Result<Outcome, Error> {
    let common = &cli.common;
    let dir = &common.out;
    std::fs::create_dir_all(dir)?;
    manifest.param("tol", common.tol);
    manifest.param("seed", common.seed);
    if let Some(tau) = common.tau {
        manifest.param("tau", tau);
    }
    match &cli.command {
        Command::Simulate { problem, k } => {
            manifest.param("k", *k);
            let loaded = load(problem, common)?;
            let spec = &loaded.spec;
            let controls = match &loaded.reference {
                Some(r) => r.clone(),
                None => ContinuousPath::constant(spec.horizon, spec.x0.clone(), spec.u0.clone(), Vector::zeros(spec.control_dim)),
            };
            let path = catching_up_integrate(spec, &controls, *k)?;
            let bounds = wellposedness_bounds(spec, &controls);
            io::write_path_csv(&output(manifest, dir, "trajectory.csv"), &path)?;
            let summary = serde_json::json!({
                "k": k,
                "state_bound": bounds.state_bound,
                "final_state": path.nodes(sweep_core::path::Component::State).last().map(|v| v.as_slice().to_vec()),
            });
            io::write_json(&output(manifest, dir, "simulation.json"), &summary)?;
            println!("integrated {k} steps; state bound {:.6e}", bounds.state_bound);
        }
        Command::Approximate { problem, k } => {
            manifest.param("k", *k);
            let loaded = load(problem, common)?;
            let reference = reference_for(&loaded, Mode::Reference)?.expect("reference mode");
            let mesh = Mesh::for_spec(&loaded.spec, *k)?;
            let (z, report) = approximate_feasible(reference, &loaded.spec, &mesh)?;
            io::write_json(&output(manifest, dir, "triple.json"), &TripleFile::from(&z))?;
            io::write_json(&output(manifest, dir, "feasibility.json"), &report)?;
            io::write_triple_csv(&output(manifest, dir, "triple.csv"), &z)?;
            println!(
                "mu {:.6e}  eps_k {:.6e}  max state gap {:.6e}  (bound holds: {})",
                report.mu,
                report.eps_k,
                report.max_state_gap,
                report.max_state_gap <= report.eps_k * (1.0 + 1e-12)
            );
        }
        Command::Solve { problem, k, mode } => {
            manifest.param("k", *k);
            manifest.param("mode", mode.label());
            let loaded = load(problem, common)?;
            let reference = reference_for(&loaded, *mode)?;
            let mesh = Mesh::for_spec(&loaded.spec, *k)?;
            let sol = solve_pk(&loaded.spec, as_mode(reference), &mesh, &OptimizerConfig::default())?;
            let cert = recover_multipliers(&sol.z_opt, as_mode(reference), &loaded.spec, 1.0)?;
            io::write_json(&output(manifest, dir, "triple.json"), &TripleFile::from(&sol.z_opt))?;
            io::write_json(&output(manifest, dir, "certificate.json"), &CertificateFile::from(&cert))?;
            let summary = serde_json::json!({
                "J": sol.j_value,
                "breakdown": sol.breakdown,
                "residuals": sol.residuals,
                "converged": sol.converged,
                "outer_iterations": sol.outer_iterations,
                "inner_iterations": sol.inner_iterations,
            });
            io::write_json(&output(manifest, dir, "solution.json"), &summary)?;
            io::write_triple_csv(&output(manifest, dir, "solution.csv"), &sol.z_opt)?;
            println!("J_{k} = {}  converged: {}", io::format_float(sol.j_value), sol.converged);
            if !sol.converged {
                return Err(Error::NonConvergence { iterations: sol.outer_iterations, residual: sol.residuals.worst_hard() });
            }
        }
        Command::Check { problem, triple, certificate, mode, form } => {
            manifest.param("mode", mode.label());
            let loaded = load(problem, common)?;
            let reference = reference_for(&loaded, *mode)?;
            let z = io::load_json::<TripleFile>(triple)?.to_triple()?;
            let cert = (&io::load_json::<CertificateFile>(certificate)?).into();
            let report = match form {
                Form::Explicit => residual_explicit(&z, &cert, as_mode(reference), &loaded.spec, common.tol)?,
                Form::El => residual_el(&z, &cert, as_mode(reference), &loaded.spec, common.tol)?,
            };
            io::write_json(&output(manifest, dir, "residuals.json"), &report)?;
            print!("{}", report.pretty());
            if !report.pass {
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::Study { problem, ks } => {
            manifest.param("ks", ks.clone());
            let loaded = load(problem, common)?;
            let reference = reference_for(&loaded, Mode::Reference)?.expect("reference mode");
            let study = convergence_study(&loaded.spec, reference, ks, &OptimizerConfig::default())?;
            io::write_convergence_csv(&output(manifest, dir, "convergence.csv"), &study.rows)?;
            io::write_json(&output(manifest, dir, "study.json"), &study)?;
            println!("{:>6} {:>24} {:>24}", "k", "J_k", "convergence sum");
            for r in &study.rows {
                println!("{:>6} {:>24} {:>24}", r.k, io::format_float(r.j_value), io::format_float(r.convergence_sum));
            }
            println!("nonincreasing within noise: {}", study.nonincreasing_within_noise);
            println!("last below half of first: {}", study.halves_from_first_to_last);
        }
        Command::Example81 { k, mode } => {
            manifest.param("k", *k);
            manifest.param("mode", mode.label());
            let m = match mode {
                Mode::FixedPoint => Example81Mode::FixedPoint,
                Mode::Reference => given_reference_mode(*k)?,
            };
            let sol = example81_solve(*k, &m)?;
            let spec = sweep_core::example81::problem();
            let report = residual_explicit(&sol.triple, &sol.certificate, sol.mode(), &spec, common.tol)?;
            io::write_json(&output(manifest, dir, "triple.json"), &TripleFile::from(&sol.triple))?;
            io::write_json(&output(manifest, dir, "certificate.json"), &CertificateFile::from(&sol.certificate))?;
            io::write_json(&output(manifest, dir, "residuals.json"), &report)?;
            io::write_triple_csv(&output(manifest, dir, "trajectory.csv"), &sol.triple)?;
            println!("a_0 = {}", io::format_float(sol.triple.a[0][0]));
            println!("x_{k} = {}", io::format_float(sol.triple.x[*k][0]));
            println!("J_{k} = {}", io::format_float(sol.j_value));
            print!("{}", report.pretty());
            if !report.pass {
                return Ok(Outcome::CheckFailed);
            }
        }
    }
    Ok(Outcome::Success)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate { .. } => "simulate",
        Command::Approximate { .. } => "approximate",
        Command::Solve { .. } => "solve",
        Command::Check { .. } => "check",
        Command::Study { .. } => "study",
        Command::Example81 { .. } => "example81",
    }
}

fn problem_path(c: &Command) -> Option<&Path> {
    match c {
        Command::Simulate { problem, .. }
        | Command::Approximate { problem, .. }
        | Command::Solve { problem, .. }
        | Command::Check { problem, .. }
        | Command::Study { problem, .. } => Some(problem),
        Command::Example81 { .. } => None,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWEEP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut manifest = RunManifest::new(command_name(&cli.command), problem_path(&cli.command));
    let code = match run(&cli, &mut manifest) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::CheckFailed) => {
            manifest.status = "check_failed".into();
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.status = format!("error: {e}");
            1
        }
    };
    manifest.exit_code = code;
    if std::fs::create_dir_all(&cli.common.out).is_ok() {
        if let Err(e) = manifest.write(&cli.common.out) {
            eprintln!("error: could not write manifest: {e}");
        }
    }
    ExitCode::from(code as u8)
}
