//! Thin command-line front end over the library's command drivers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bmaclust::commands::{
    cmd_bench, cmd_consensus, cmd_density, cmd_simulate, cmd_sweep, BenchOpts, ConsensusOpts,
    DensityOpts, OrderMode, SimulateOpts, SweepOpts,
};

#[derive(Parser)]
#[command(
    name = "bmaclust",
    version,
    about = "Gaussian mixture sweeps with BIC-weighted model averaging: consensus clustering and density estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model grid to a CSV and write the weighted ensemble.
    Sweep {
        /// Input CSV (headered; `#` lines are comments).
        data: PathBuf,
        /// Output directory for ensemble.json, ranking.csv, z/ and manifest.json.
        #[arg(long, short)]
        out: PathBuf,
        /// Columns to exclude (header names or 0-based indices); repeatable.
        #[arg(long = "drop-col")]
        drop_col: Vec<String>,
        /// Largest component count in the grid.
        #[arg(long, default_value_t = 9)]
        max_clusters: usize,
        /// Worker pool size (env BMACLUST_THREADS overrides).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Consensus matrix, dendrogram, heatmap and optional partition from a
    /// saved ensemble.
    Consensus {
        /// ensemble.json from `sweep` (the z/ store must sit beside it).
        ensemble: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Row/column ordering of the heatmap.
        #[arg(long, default_value = "given", value_parser = parse_order)]
        order: OrderMode,
        /// Cut the dendrogram at this probability level and write the
        /// partition.
        #[arg(long)]
        cut: Option<f64>,
        /// Use the single model at this rank (0 = best) instead of the
        /// average.
        #[arg(long)]
        model: Option<usize>,
    },
    /// Contour grids or MISE/KL evaluation of density estimates.
    Density {
        /// ensemble.json from `sweep` (for the averaged and single-model
        /// estimates).
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Data CSV (for the kernel estimate, or to fit when no ensemble is
        /// given).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long = "drop-col")]
        drop_col: Vec<String>,
        #[arg(long, short)]
        out: PathBuf,
        /// Emit x,y,density grids (2D only).
        #[arg(long)]
        grid_out: bool,
        /// Evaluate MISE and KL against this catalog truth id.
        #[arg(long)]
        eval: Option<String>,
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo draws per metric.
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 9)]
        max_clusters: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Replicated KS/SM/BMA ratio benchmark over catalog densities.
    Bench {
        #[arg(long, short)]
        out: PathBuf,
        /// Comma-separated catalog density names (default: all ten).
        #[arg(long, value_delimiter = ',')]
        densities: Vec<String>,
        /// Target dimension: 2 = as tabulated, higher pads with standard
        /// normals (bimodal + --sep selects the tabulated 3D/6D family).
        #[arg(long, default_value_t = 2)]
        dims: usize,
        /// Mode separation for the 3D/6D bimodal family (1.5, 3 or 5).
        #[arg(long)]
        sep: Option<f64>,
        #[arg(long, short, default_value_t = 25)]
        replicates: usize,
        #[arg(long, short, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 20250101)]
        seed: u64,
        #[arg(long, default_value_t = 9)]
        max_clusters: usize,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Draw a seeded sample from a catalog density and write it as CSV.
    Simulate {
        /// Catalog density name (gaussian, claw, bimodal, ...).
        density: String,
        #[arg(long, short, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long)]
        sep: Option<f64>,
    },
}

fn parse_order(s: &str) -> Result<OrderMode, String> {
    match s {
        "given" => Ok(OrderMode::Given),
        "seriate" => Ok(OrderMode::Seriate),
        other => Err(format!("unknown order '{other}' (use given or seriate)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep { data, out, drop_col, max_clusters, threads } => cmd_sweep(&SweepOpts {
            drop: drop_col,
            max_clusters,
            threads,
            ..SweepOpts::new(data, out)
        })
        .map(|_| ()),
        Command::Consensus { ensemble, out, order, cut, model } => cmd_consensus(&ConsensusOpts {
            ensemble,
            out_dir: out,
            order,
            cut,
            model_rank: model,
        }),
        Command::Density {
            ensemble,
            data,
            drop_col,
            out,
            grid_out,
            eval,
            nodes,
            seed,
            mc_samples,
            max_clusters,
            threads,
        } => cmd_density(&DensityOpts {
            ensemble,
            data,
            drop: drop_col,
            grid_out,
            eval_truth: eval,
            grid_nodes: nodes,
            seed,
            n_mc: mc_samples,
            max_clusters,
            threads,
            ..DensityOpts::new(out)
        }),
        Command::Bench {
            out,
            densities,
            dims,
            sep,
            replicates,
            n,
            seed,
            max_clusters,
            mc_samples,
            threads,
        } => {
            let mut opts = BenchOpts::new(out);
            if !densities.is_empty() {
                opts.densities = densities;
            }
            opts.dims = dims;
            opts.sep = sep;
            opts.replicates = replicates;
            opts.n_obs = n;
            opts.seed = seed;
            opts.max_clusters = max_clusters;
            opts.n_mc = mc_samples;
            opts.threads = threads;
            cmd_bench(&opts).map(|_| ())
        }
        Command::Simulate { density, n, seed, out, dims, sep } => {
            cmd_simulate(&SimulateOpts { density, dims, sep, n, seed, out })
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
