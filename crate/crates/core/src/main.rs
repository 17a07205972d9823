use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zkpot_core::consensus::ByzantineKind;
use zkpot_core::sim::{
    emit_plots, run_simulation, scaling_experiment, timing_breakdown, write_csv, ConfigError, DatasetKind, SimConfig,
    SimError,
};
use zkpot_core::zkproof::BackendKind;

#[derive(Parser)]
#[command(name = "zkpot", version, about = "Proof-of-training consensus simulator for federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv, chain.log and summary.json.
    Run(SimArgs),
    /// Mean block generation time per node count.
    Scale {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
        counts: Vec<usize>,
    },
    /// Per-phase timing table per node count.
    Bench {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_delimiter = ',', default_value = "100,200")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        setup_repeats: usize,
    },
    /// Render SVG curves and data tables from a metrics or scaling CSV.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SimArgs {
    /// JSON file with SimConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    byzantine_frac: Option<f64>,
    #[arg(long)]
    byzantine_kind: Option<ByzantineKind>,
    #[arg(long)]
    dataset: Option<DatasetKind>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    prove_samples: Option<usize>,
    #[arg(long)]
    deadline_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    deterministic: bool,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => SimConfig::from_json_file(p)?,
            None => SimConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })* };
        }
        set!(nodes, rounds, byzantine_frac, byzantine_kind, dataset, backend, seed, prove_samples, deadline_s, out);
        if self.data_dir.is_some() {
            c.data_dir = self.data_dir.clone();
        }
        c.deterministic |= self.deterministic;
        c.validate()?;
        Ok(c)
    }
}

fn write_rows<T: serde::Serialize>(out: &Path, name: &str, rows: &[T]) -> Result<(), SimError> {
    std::fs::create_dir_all(out).map_err(|e| SimError::Io(e.to_string()))?;
    let path = out.join(name);
    write_csv(&path, rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cmd: Command) -> Result<(), SimError> {
    match cmd {
        Command::Run(a) => {
            let cfg = a.config()?;
            let report = run_simulation(&cfg)?;
            println!(
                "{} rounds, {} blocks, final accuracy {:.4}, tip {}",
                report.metrics.len(),
                report.chain.len(),
                report.final_accuracy,
                hex::encode(report.chain_hash())
            );
            if !report.aborted_rounds.is_empty() {
                log::warn!("aborted rounds: {:?}", report.aborted_rounds);
            }
            println!("outputs in {}", cfg.out.display());
        }
        Command::Scale { sim, counts } => {
            let cfg = sim.config()?;
            let rows = scaling_experiment(&counts, &cfg)?;
            for r in &rows {
                println!("{:>6} nodes  {:.4} ± {:.4} s", r.nodes, r.mean_block_generation_s, r.std_block_generation_s);
            }
            write_rows(&cfg.out, "scale.csv", &rows)?;
        }
        Command::Bench { sim, counts, setup_repeats } => {
            let cfg = sim.config()?;
            let rows = timing_breakdown(&counts, &cfg, setup_repeats)?;
            println!("{:>6} {:>10} {:>12} {:>10} {:>10} {:>10}", "nodes", "setup", "commitment", "prove", "verify", "block");
            for r in &rows {
                println!(
                    "{:>6} {:>10.4} {:>12.4} {:>10.4} {:>10.4} {:>10.4}",
                    r.nodes, r.setup_s, r.commitment_s, r.prove_s, r.verify_s, r.block_generation_s
                );
            }
            write_rows(&cfg.out, "breakdown.csv", &rows)?;
        }
        Command::Plot { metrics, out } => {
            for f in emit_plots(&metrics, &out)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
