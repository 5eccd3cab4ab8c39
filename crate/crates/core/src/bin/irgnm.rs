use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irgnm::experiments::{self, RunConfig};

#[derive(Parser)]
#[command(name = "irgnm", version, about = "Classical, dynamic and hybrid IRGNM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write its trajectory and field snapshots.
    Run(Options),
    /// Dynamic runs over several β on one shared observation stream.
    SweepBeta {
        #[command(flatten)]
        options: Options,
        /// Comma-separated β values.
        #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.8, 1.2, 3.0])]
        betas: Vec<f64>,
    },
    /// Classical method on exact, single and averaged data plus the hybrid method.
    Compare(Options),
}

#[derive(Args, Default)]
struct Options {
    /// key = value file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// potential | darcy
    #[arg(long)]
    problem: Option<String>,
    /// smooth | discontinuous (channel for darcy)
    #[arg(long)]
    truth: Option<String>,
    /// cirgnm | dirgnm | hirgnm
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    cdec: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Smoothing index; switches the dynamic phase to the Hölder-rate schedule.
    #[arg(long)]
    theta: Option<f64>,
    /// Source index used with --theta.
    #[arg(long)]
    nu_src: Option<f64>,
    #[arg(long)]
    n_obs: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Interior nodes per side of the inversion grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Interior nodes per side of the Darcy data grid.
    #[arg(long)]
    data_grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Matérn smoothness.
    #[arg(long)]
    nu: Option<f64>,
    /// Matérn length scale.
    #[arg(long)]
    ell: Option<f64>,
    /// Matérn variance scale.
    #[arg(long)]
    c0: Option<f64>,
    /// maxiter | discrepancy
    #[arg(long)]
    stop: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
}

impl Options {
    fn resolve(&self) -> irgnm::Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        let text = |v: &Option<String>| v.clone();
        let num = |v: Option<f64>| v.map(|x| x.to_string());
        let int = |v: Option<usize>| v.map(|x| x.to_string());
        let flags: [(&str, Option<String>); 20] = [
            ("problem", text(&self.problem)),
            ("truth", text(&self.truth)),
            ("method", text(&self.method)),
            ("sigma", num(self.sigma)),
            ("alpha0", num(self.alpha0)),
            ("cdec", num(self.cdec)),
            ("beta", num(self.beta)),
            ("theta", num(self.theta)),
            ("nu-src", num(self.nu_src)),
            ("n-obs", int(self.n_obs)),
            ("max-iter", int(self.max_iter)),
            ("grid", int(self.grid)),
            ("data-grid", int(self.data_grid)),
            ("seed", self.seed.map(|s| s.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("nu", num(self.nu)),
            ("ell", num(self.ell)),
            ("c0", num(self.c0)),
            ("stop", text(&self.stop)),
            ("tau", num(self.tau)),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        Ok(c)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(opts) => opts.resolve().and_then(|c| experiments::run(&c)).map(|r| {
            println!("trajectory: {}", r.trajectory_csv.display());
            println!("steps: {}", r.steps);
            println!("start rel_error: {}", fmt_opt(r.start_rel_error));
            println!(
                "min rel_error: {} at iteration {} ({})",
                fmt_opt(r.min_rel_error),
                r.argmin_iter.map_or_else(|| "n/a".into(), |i| i.to_string()),
                r.argmin_phase.map_or_else(|| "n/a".into(), |p| p.to_string())
            );
            println!("final rel_error: {}", fmt_opt(r.final_rel_error));
            println!("wall time: {:.2} s", r.wall_seconds);
            true
        }),
        Command::SweepBeta { options, betas } => {
            options.resolve().and_then(|c| experiments::sweep_beta(&c, &betas)).map(|rep| {
                let mut ok = true;
                for m in &rep.members {
                    match &m.result {
                        Ok(r) => println!(
                            "beta {}: min {} at {}, final {}",
                            m.beta,
                            fmt_opt(r.min_rel_error),
                            r.argmin_iter.unwrap_or(0),
                            fmt_opt(r.final_rel_error)
                        ),
                        Err(e) => {
                            ok = false;
                            eprintln!("beta {}: failed: {e}", m.beta);
                        }
                    }
                }
                println!("summary: {}", rep.summary_csv.display());
                ok
            })
        }
        Command::Compare(opts) => opts.resolve().and_then(|c| experiments::compare(&c)).map(|rep| {
            for r in &rep.rows {
                println!("{:<18} min {:.6e} at {:>3}, final {:.6e}", r.variant, r.min_error, r.argmin_iter, r.final_error);
            }
            println!("summary: {}", rep.summary_csv.display());
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
