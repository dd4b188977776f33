use anyhow::Result;
use clap::{Parser, Subcommand};
use foliage_echo::cli::{self, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Synthetic sonar echoes from procedurally generated foliage.
#[derive(Debug, Parser)]
#[command(name = "foliage-echo", version)]
struct Args {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per CPU.
    #[arg(long, global = true, env = cli::THREADS_ENV, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one randomized tree and write tree.json.
    GenTree,
    /// Place trees and write scene.json.
    GenScene,
    /// Simulate every pose of the trajectory.
    Run,
    /// Time the simulation across point and tree counts.
    Timing,
    /// Write plot files (time, amplitude, envelope) for a finished run.
    PlotData { run_dir: PathBuf },
}

fn execute(args: Args) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir());
    match args.command {
        Command::GenTree => {
            let s = cli::cmd_gen_tree(&cfg, &out)?;
            println!(
                "branches {}  leaves {}  bounding radius {:.3} m  -> {}",
                s.branches,
                s.leaves,
                s.bounding_radius,
                out.join(cli::TREE_FILE).display()
            );
        }
        Command::GenScene => {
            let scene = cli::cmd_gen_scene(&cfg, &out)?;
            println!(
                "trees {}  leaves {}  -> {}",
                scene.placements().len(),
                scene.leaves().len(),
                out.join(cli::SCENE_FILE).display()
            );
        }
        Command::Run => {
            let report = cli::cmd_run(&cfg, &out, args.threads)?;
            let facets: usize = report.points.iter().map(|p| p.facet_count).sum();
            println!(
                "poses {}  trees {}  facets {}  wall {:.3} s  -> {}",
                report.points.len(),
                report.tree_count,
                facets,
                report.total_wall_time_s,
                out.display()
            );
        }
        Command::Timing => {
            let table = cli::cmd_timing(&cfg, &out, args.threads)?;
            println!("median seconds:");
            print!("{}", table.to_csv());
            println!("facets:");
            print!("{}", table.facets_csv());
            println!(
                "monotone in points: {}  monotone in trees: {}",
                table.monotone_in_points(),
                table.monotone_in_trees()
            );
        }
        Command::PlotData { run_dir } => {
            let dest = args.out.unwrap_or_else(|| run_dir.clone());
            let files = cli::cmd_plot_data(&run_dir, &dest)?;
            println!("wrote {} plot file(s) to {}", files.len(), dest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
