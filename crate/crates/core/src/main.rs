use anisodiff::fields::{field_by_name, poincare_section, write_poincare_csv, IslandFieldParams};
use anisodiff::harness::{
    run_island_self_convergence_with, run_mms_experiment, run_stability_audit, write_audit_csv,
    write_convergence_csv, ExperimentConfig,
};
use anisodiff::mesh::build_circle_five_block;
use anisodiff::parallel::{trace_field_lines, write_map_csv, ParallelConfig};
use anisodiff::solver::write_snapshot_csv;
use anisodiff::Result;
use clap::{Args, Parser, Subcommand};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Anisotropic diffusion verification harness.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Manufactured-solution convergence on the five-block circle.
    Mms(Common),
    /// Island self-convergence against a fine reference.
    Island {
        #[command(flatten)]
        common: Common,
        /// Reference resolution per block.
        #[arg(long)]
        n_ref: Option<usize>,
        #[arg(long)]
        t_final: Option<f64>,
        /// Write a solution snapshot for every run.
        #[arg(long)]
        snapshots: bool,
    },
    /// Energy-stability and penalty-matrix audits.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Scale all computed penalties (values below 1 are negative controls).
        #[arg(long)]
        tau_scale: Option<f64>,
    },
    /// Field-line map and Poincare section dumps.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        field: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa_par: Option<f64>,
    /// Comma-separated resolutions per block, e.g. 21,31,41.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// TOML file with [mms], [island], [stability] and [trace] sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        fs::create_dir_all(&self.out_dir)?;
        match &self.config {
            Some(p) => ExperimentConfig::from_toml(&fs::read_to_string(p)?),
            None => Ok(ExperimentConfig::default()),
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    log::info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs the selected experiment; `Ok(false)` signals a failed audit.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Mms(c) => {
            let mut cfg = c.load()?.mms;
            if let Some(o) = c.order {
                cfg.order = o;
            }
            if let Some(g) = c.gamma {
                cfg.gamma = vec![g];
            }
            if let Some(n) = c.n_list.clone() {
                cfg.n_list = n;
            }
            let rows = run_mms_experiment(&cfg)?;
            write_convergence_csv(create(&c.out_dir, &format!("mms_order{}.csv", cfg.order))?, &rows)?;
            for r in &rows {
                println!("order {} gamma {} n {:>3}  error {:.4e}  rate {}", r.order, r.gamma, r.n, r.error, r.rate.map_or("-".into(), |v| format!("{v:.3}")));
            }
            Ok(true)
        }
        Command::Island { common: c, n_ref, t_final, snapshots } => {
            let mut cfg = c.load()?.island;
            if let Some(o) = c.order {
                cfg.orders = vec![o];
            }
            if let Some(g) = c.gamma {
                cfg.gamma = g;
            }
            if let Some(k) = c.kappa_par {
                cfg.kappa_par = vec![k];
            }
            if let Some(n) = c.n_list.clone() {
                cfg.n_list = n;
            }
            if let Some(n) = n_ref {
                cfg.n_ref = n;
            }
            if let Some(t) = t_final {
                cfg.t_final = t;
            }
            let dir = c.out_dir.clone();
            let rows = run_island_self_convergence_with(&cfg, &mut |run| {
                if snapshots {
                    let name = format!("island_snapshot_order{}_kpar{:e}_n{}.csv", run.order, run.kappa_par, run.n);
                    write_snapshot_csv(create(&dir, &name)?, run.domain, &run.state.u, run.state.t)?;
                }
                Ok(())
            })?;
            write_convergence_csv(create(&c.out_dir, "island_convergence.csv")?, &rows)?;
            for r in &rows {
                println!("order {} kappa_par {:e} n {:>3}  error {:.4e}  rate {}", r.order, r.kappa_par, r.n, r.error, r.rate.map_or("-".into(), |v| format!("{v:.3}")));
            }
            Ok(true)
        }
        Command::Stability { common: c, tau_scale } => {
            let mut cfg = c.load()?.stability;
            if let Some(o) = c.order {
                cfg.orders = vec![o];
            }
            if let Some(g) = c.gamma {
                cfg.gamma = vec![g];
            }
            if let Some(n) = c.n_list.as_ref().and_then(|v| v.first()) {
                cfg.n = *n;
            }
            if let Some(t) = tau_scale {
                cfg.tau_scale = t;
            }
            let rows = run_stability_audit(&cfg)?;
            write_audit_csv(create(&c.out_dir, "stability.csv")?, &rows)?;
            for r in &rows {
                println!(
                    "{:<40} eigmax {:+.3e}  lemma {}  {}",
                    r.stability.config,
                    r.stability.eigmax,
                    if r.lemma_passed { "psd" } else { "INDEFINITE" },
                    if r.passed() { "pass" } else { "FAIL" }
                );
            }
            Ok(rows.iter().all(|r| r.passed()))
        }
        Command::Trace { common: c, field } => {
            let mut cfg = c.load()?.trace;
            if let Some(f) = field {
                cfg.field = f;
            }
            if let Some(o) = c.order {
                cfg.order = o;
            }
            if let Some(g) = c.gamma {
                cfg.gamma = g;
            }
            if let Some(n) = c.n_list.as_ref().and_then(|v| v.first()) {
                cfg.n = *n;
            }
            let field = field_by_name(&cfg.field, IslandFieldParams { delta: cfg.delta, r1: cfg.r1 })?;
            let pc = ParallelConfig { substeps: cfg.substeps, kappa_par: c.kappa_par.unwrap_or(1.0), ..Default::default() };
            let domain = build_circle_five_block(cfg.n, cfg.gamma, None, cfg.order)?;
            let map = trace_field_lines(&domain, field.as_ref(), &pc)?;
            write_map_csv(create(&c.out_dir, &format!("map_n{}.csv", cfg.n))?, &map, &domain)?;
            let seeds: Vec<[f64; 2]> = (0..cfg.seeds)
                .map(|k| {
                    let r = 0.3 + 0.65 * (k / 2) as f64 / ((cfg.seeds / 2).max(2) - 1) as f64;
                    if k % 2 == 0 {
                        [-r, 0.0]
                    } else {
                        [r, 0.0]
                    }
                })
                .collect();
            let orbits = poincare_section(field.as_ref(), &seeds, cfg.n_transits, &pc)?;
            write_poincare_csv(create(&c.out_dir, "poincare.csv")?, &orbits)?;
            let exits = map.forward.iter().chain(&map.backward).filter(|t| t.is_exit()).count();
            println!("traced {} nodes ({} exits), {} Poincare orbits", domain.total_len(), exits, orbits.len());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
