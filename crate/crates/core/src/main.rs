use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use chemotaxis_core::config::{BuiltModel, RunConfig};
use chemotaxis_core::diagnostics::{ito_ledger, mass_balance_check};
use chemotaxis_core::ensemble::{ensemble_stats, run_ensemble};
use chemotaxis_core::error::Error;
use chemotaxis_core::integrator::{run_trajectory, CutoffSpec, TrajectoryOptions};
use chemotaxis_core::noise::SeedCtx;
use chemotaxis_core::operators::{certify_semigroup_estimates, log_grid};
use chemotaxis_core::output::{write_json, write_record, Manifest};
use chemotaxis_core::picard::picard_solve;
use chemotaxis_core::stats::ls_fit;
use chemotaxis_core::verify::{run_acceptance, run_criterion, VerifySummary};

#[derive(Parser)]
#[command(name = "chemotaxis", version, about = "Stochastic Keller-Segel simulator on a Neumann rectangle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed, overrides `ensemble.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time step, overrides `integrator.dt`.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Path count, overrides `ensemble.paths`.
    #[arg(long, global = true)]
    paths: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one path.
    Simulate { config: PathBuf },
    /// Run an ensemble and its estimators.
    Ensemble { config: PathBuf },
    /// Fixed-point iteration of the cutoff equation on one noise path.
    Picard { config: PathBuf },
    /// Itô ledger and mass balance along stored paths.
    ItoCheck { config: PathBuf },
    /// Random-field certification of the semigroup estimates.
    CertifyOperators { config: PathBuf },
    /// Run the acceptance suite.
    Verify {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

enum Failure {
    Usage(String),
    Violation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) | Error::InvalidArgument(msg) | Error::InvalidGrid(msg) => Failure::Usage(msg),
            Error::Violation(v) => Failure::Violation(v.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<bool, Failure>;

struct Loaded {
    cfg: RunConfig,
    source: String,
    model: BuiltModel,
    out: PathBuf,
}

impl Cli {
    fn load(&self, path: &Path) -> std::result::Result<Loaded, Failure> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg =
            RunConfig::from_toml(&source).map_err(|e| Failure::Usage(format!("{}: {}", path.display(), e)))?;
        if let Some(seed) = self.seed {
            cfg.ensemble.seed = seed;
        }
        if let Some(dt) = self.dt {
            cfg.integrator.dt = dt;
        }
        if let Some(paths) = self.paths {
            cfg.ensemble.paths = paths;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.display().to_string();
        }
        let model = cfg.build_model()?;
        let out = PathBuf::from(&cfg.output.dir);
        std::fs::create_dir_all(&out)?;
        Ok(Loaded { cfg, source, model, out })
    }
}

impl Loaded {
    fn manifest(&self, command: &str, extra: serde_json::Value) -> std::result::Result<(), Failure> {
        let grid = self.model.params.u0().grid();
        let mut m = Manifest::new(command, self.cfg.ensemble.seed, grid, self.cfg.to_toml());
        m.config_source = Some(self.source.clone());
        let i = &self.cfg.integrator;
        let mut thresholds = json!({
            "ceiling": i.ceiling,
            "m_thresholds": i.m_thresholds,
            "stop_at": i.stop_at,
            "cutoff_m": i.cutoff_m,
            "noise_k": self.model.noise_k,
            "h2": self.model.h2.map(|c| json!({ "c1": c.c1, "mu_tilde": c.mu_tilde })),
        });
        if let (Some(t), serde_json::Value::Object(e)) = (thresholds.as_object_mut(), extra) {
            t.extend(e);
        }
        m.thresholds = thresholds;
        m.write(&self.out)?;
        Ok(())
    }

    fn options(&self) -> std::result::Result<TrajectoryOptions, Failure> {
        Ok(self.cfg.trajectory_options()?)
    }
}

fn create(path: PathBuf) -> std::result::Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(cli: &Cli, config: &Path) -> Outcome {
    let run = cli.load(config)?;
    let i = &run.cfg.integrator;
    let ctx = SeedCtx::new(run.cfg.ensemble.seed, 0);
    let rec = run_trajectory(&run.model.params, i.t_end, i.dt, &ctx, &run.options()?)?;
    write_record(&run.out, "path0", &rec)?;
    run.manifest("simulate", json!({}))?;
    println!(
        "{} at t = {} after {} steps, sup {:.6e}, mass {:.6e}",
        rec.status,
        rec.final_time(),
        rec.steps(),
        rec.sup_norms.last().copied().unwrap_or(f64::NAN),
        rec.masses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(true)
}

fn ensemble(cli: &Cli, config: &Path) -> Outcome {
    let run = cli.load(config)?;
    let params = &run.model.params;
    let ens = run_ensemble(params, &run.cfg.ensemble_spec(), &run.options()?)?;
    let stats = ensemble_stats(&ens, params, &run.cfg.estimator_request())?;
    for (i, o) in ens.outcomes.iter().enumerate() {
        if let Some(rec) = o.record() {
            write_record(&run.out, &format!("path{i:04}"), rec)?;
        }
    }
    write_json(&run.out.join("stats.json"), &stats)?;
    run.manifest("ensemble", json!({}))?;
    println!(
        "{} paths: {} completed, {} stopped, {} diverged, {} failed",
        stats.paths, stats.completed, stats.stopped, stats.diverged, stats.failed
    );
    if let Some((p0, m)) = &stats.moment {
        println!("E sup |u|_{p0}^{p0} = {:.6e} [{:.6e}, {:.6e}]", m.mean, m.ci.0, m.ci.1);
    }
    if let Some(t) = &stats.tail {
        println!("tail slope (q = {}): {:?}", t.q, t.slope);
    }
    if let Some(g) = &stats.gamma {
        println!(
            "E sup |u|_inf^{} = {:.6e} [{:.6e}, {:.6e}]{}",
            g.gamma,
            g.estimate.mean,
            g.estimate.ci.0,
            g.estimate.ci.1,
            if g.in_window { "" } else { " (outside the admissible window)" }
        );
    }
    Ok(true)
}

fn picard(cli: &Cli, config: &Path) -> Outcome {
    let run = cli.load(config)?;
    let params = &run.model.params;
    let m = run.cfg.integrator.cutoff_m.unwrap_or(2.0 * params.u0().sup_norm());
    let cutoff = CutoffSpec::new(m)?;
    let pc = &run.cfg.picard;
    let t_end = pc.t_end.unwrap_or(run.cfg.integrator.t_end);
    let ctx = SeedCtx::new(run.cfg.ensemble.seed, 0);
    let rep = picard_solve(
        params,
        &cutoff,
        t_end,
        run.cfg.integrator.dt,
        &ctx,
        pc.tol,
        pc.max_iter,
        run.cfg.integrator.brownian_base_dt,
    )?;
    let mut w = create(run.out.join("picard.csv"))?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    run.manifest("picard", json!({ "picard_m": m, "picard_t_end": t_end }))?;
    println!(
        "converged: {} after {} iterations, last difference {:.3e}, max ratio {:.4}",
        rep.converged,
        rep.iterations(),
        rep.diffs.last().copied().unwrap_or(f64::NAN),
        rep.max_ratio()
    );
    Ok(true)
}

fn ito_check(cli: &Cli, config: &Path) -> Outcome {
    let run = cli.load(config)?;
    let params = &run.model.params;
    let ito = &run.cfg.ito;
    let t_end = run.cfg.integrator.t_end;
    let seed = run.cfg.ensemble.seed;
    let opts = TrajectoryOptions { store_fields: true, ..run.options()? };
    if ito.dt_sweep.is_empty() {
        let rec = run_trajectory(params, t_end, run.cfg.integrator.dt, &SeedCtx::new(seed, 0), &opts)?;
        let led = ito_ledger(&rec, params, ito.p)?;
        let mass = mass_balance_check(&rec, params)?;
        let mut w = create(run.out.join("ledger.csv"))?;
        led.write_csv(&mut w)?;
        w.flush()?;
        run.manifest("ito-check", json!({ "ito_p": ito.p }))?;
        println!("max |ledger residual| = {:.3e}, max mass residual = {:.3e}", led.max_abs_residual(), mass);
        return Ok(true);
    }
    let mut means = Vec::new();
    for &dt in &ito.dt_sweep {
        let mut total = 0.0;
        for i in 0..ito.sweep_paths {
            let rec = run_trajectory(params, t_end, dt, &SeedCtx::new(seed, i as u64), &opts)?;
            total += ito_ledger(&rec, params, ito.p)?.max_abs_residual();
        }
        means.push(total / ito.sweep_paths.max(1) as f64);
        println!("dt = {dt:e}: mean max |residual| = {:.3e}", means.last().unwrap());
    }
    let xs: Vec<f64> = ito.dt_sweep.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let order = ls_fit(&xs, &ys).map(|(b, _)| b);
    write_json(
        &run.out.join("ito_sweep.json"),
        &json!({ "p": ito.p, "dt": ito.dt_sweep, "mean_max_residual": means, "order": order }),
    )?;
    run.manifest("ito-check", json!({ "ito_p": ito.p }))?;
    match order {
        Some(o) => println!("fitted order {o:.3}"),
        None => println!("fitted order unavailable (need two distinct step sizes)"),
    }
    Ok(true)
}

fn certify(cli: &Cli, config: &Path) -> Outcome {
    let run = cli.load(config)?;
    let c = &run.cfg.certify;
    let grid = run.model.params.u0().grid();
    let t = log_grid(c.t_range[0], c.t_range[1], c.t_points);
    let rep = certify_semigroup_estimates(grid, c.trials, &t, &c.p, &c.beta, c.epsilon, c.seed)?;
    let mut w = create(run.out.join("certification.csv"))?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    run.manifest("certify-operators", json!({}))?;
    for (e, p, b) in rep.cells() {
        println!("{e} p={p} beta={b}: max ratio {:.4e}", rep.max_over_t(e, p, b).unwrap_or(f64::NAN));
    }
    Ok(rep.all_finite())
}

fn verify(cli: &Cli, only: &[u32]) -> Outcome {
    let summary = if only.is_empty() {
        run_acceptance(|r| println!("{r}"))
    } else {
        let mut criteria = Vec::new();
        for &id in only {
            let r = run_criterion(id).ok_or_else(|| Failure::Usage(format!("no criterion {id}")))?;
            println!("{r}");
            criteria.push(r);
        }
        VerifySummary { passed: criteria.iter().all(|c| c.passed), criteria }
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    write_json(&out.join("verify.json"), &summary)?;
    let passed = summary.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", summary.criteria.len());
    Ok(summary.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Simulate { config } => simulate(&cli, config),
        Command::Ensemble { config } => ensemble(&cli, config),
        Command::Picard { config } => picard(&cli, config),
        Command::ItoCheck { config } => ito_check(&cli, config),
        Command::CertifyOperators { config } => certify(&cli, config),
        Command::Verify { only } => verify(&cli, only),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("assumption violated: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
