use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fusedpnt::commands::{cmd_check, cmd_cost, cmd_par, cmd_schedule, Options};
use fusedpnt::scenario::Sweep;
use fusedpnt_core::scheduler::CellOrder;

/// Schedules and costs GNSS ranging bursts on a LEO broadband downlink.
///
/// Exit status: 0 success, 2 parse or invalid input, 3 geometry or
/// visibility failure, 4 infeasible schedule, 5 I/O error.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form reservations and costs.
    Cost(Common),
    /// Build a schedule, check it and write it out.
    Schedule(Common),
    /// Check an existing schedule (JSON or binary).
    Check {
        #[command(flatten)]
        common: Common,
        /// Schedule file to check.
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Peak-to-average ratio from a population raster.
    Par(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scheduler and sampling seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep a dotted scenario key over values, e.g. `timing.n=4,5,6`. Repeatable.
    #[arg(long)]
    sweep: Vec<Sweep>,
    /// Output directory; defaults to the scenario's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cell iteration order.
    #[arg(long, value_enum)]
    order: Option<Order>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Id,
    Random,
    Geo,
}

impl From<Common> for Options {
    fn from(c: Common) -> Self {
        Options {
            scenario: c.scenario,
            seed: c.seed,
            sweeps: c.sweep,
            out: c.out,
            order: c.order.map(|o| match o {
                Order::Id => CellOrder::Id,
                Order::Random => CellOrder::Random,
                Order::Geo => CellOrder::Geo,
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cost(c) => cmd_cost(&c.into()),
        Command::Schedule(c) => cmd_schedule(&c.into()),
        Command::Check { common, schedule } => cmd_check(&common.into(), &schedule),
        Command::Par(c) => cmd_par(&c.into()),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
