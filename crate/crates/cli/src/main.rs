//! Batch pipelines over voter and site files: disparity measurement,
//! fair re-planning, capacity sweeps, synthetic-state generation, and the
//! adversarial-instance regression suite.
//!
//! Exit codes: 0 ok, 2 input error, 3 solver non-convergence, 4 theorem
//! regression failure.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fairsite", version, about = "Facility-access disparity measurement and fair re-planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Haversine,
    Euclidean,
    SqEuclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    Filter,
    Dependent,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    SitesOnly,
    SchoolsLibrariesPolling,
    AllPoints,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    AbsError,
    RelError,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic state (voters + sites) to CSV.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        voters: usize,
        /// reference (3 groups, 4 regions) or two-region preset
        #[arg(long, default_value = "reference")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw, normalized, and worst-decile disparity reports.
    Measure {
        #[arg(long)]
        voters: PathBuf,
        #[arg(long)]
        sites: PathBuf,
        /// Optional voter_id,site_id CSV overriding the voter file's column.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::Haversine)]
        metric: MetricArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-plan facility locations and report before/after disparities.
    Plan {
        #[arg(long)]
        voters: PathBuf,
        #[arg(long)]
        sites: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = MetricArg::Haversine)]
        metric: MetricArg,
        /// Filtering parameter (opens up to k/(1-epsilon) centers).
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = RoundingArg::Filter)]
        rounding: RoundingArg,
        /// Trials for dependent rounding.
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::AbsError)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = 0.2)]
        coreset_eps: f64,
        #[arg(long, default_value_t = 0.1)]
        coreset_delta: f64,
        #[arg(long, default_value_t = 10.0)]
        coreset_c: f64,
        /// Per-group cap on coreset size (keeps the LP desk-scale).
        #[arg(long, default_value_t = 150)]
        coreset_max_size: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::SchoolsLibrariesPolling)]
        facility_policy: PolicyArg,
        /// Capacity stage: limit = (1 + eps-cap) * average load.
        #[arg(long)]
        eps_cap: Option<f64>,
        /// Also export the solved LP in the sparse text format.
        #[arg(long, default_value_t = false)]
        dump_lp: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Capacity sweep tables for the balanced variants.
    Sweep {
        #[arg(long)]
        voters: PathBuf,
        #[arg(long)]
        sites: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = MetricArg::Haversine)]
        metric: MetricArg,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Comma-separated capacity factors.
        #[arg(long, default_value = "0.1,0.5,0.9", value_delimiter = ',')]
        eps_cap: Vec<f64>,
        #[arg(long, default_value_t = 0.2)]
        coreset_eps: f64,
        #[arg(long, default_value_t = 0.1)]
        coreset_delta: f64,
        #[arg(long, default_value_t = 10.0)]
        coreset_c: f64,
        #[arg(long, default_value_t = 150)]
        coreset_max_size: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::SchoolsLibrariesPolling)]
        facility_policy: PolicyArg,
        #[arg(long, default_value_t = 10)]
        kcenter_chunks: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two measure reports (JSON) group by group.
    Compare {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the adversarial-instance regression checks.
    Theorems,
}

impl MetricArg {
    fn to_metric(self) -> fairsite_core::geo::MetricKind {
        use fairsite_core::geo::MetricKind;
        match self {
            MetricArg::Haversine => MetricKind::haversine_miles(),
            MetricArg::Euclidean => MetricKind::Euclidean { dim: 2 },
            MetricArg::SqEuclidean => MetricKind::SquaredEuclidean { dim: 2 },
        }
    }
}

fn policy_arg(p: PolicyArg) -> fairsite_core::pipeline::FacilityPolicy {
    use fairsite_core::pipeline::FacilityPolicy;
    match p {
        PolicyArg::SitesOnly => FacilityPolicy::SitesOnly,
        PolicyArg::SchoolsLibrariesPolling => FacilityPolicy::SchoolsLibrariesPolling,
        PolicyArg::AllPoints => FacilityPolicy::AllPoints,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth {
            seed,
            voters,
            preset,
            out,
        } => commands::cmd_synth(seed, voters, &preset, &out),
        Command::Measure {
            voters,
            sites,
            assignment,
            metric,
            seed,
            out,
        } => commands::cmd_measure(
            &voters,
            &sites,
            assignment.as_deref(),
            metric.to_metric(),
            seed,
            &out,
        ),
        Command::Plan {
            voters,
            sites,
            k,
            metric,
            epsilon,
            rounding,
            trials,
            objective,
            coreset_eps,
            coreset_delta,
            coreset_c,
            coreset_max_size,
            facility_policy,
            eps_cap,
            dump_lp,
            seed,
            out,
        } => {
            let cfg = commands::plan_config(
                k,
                metric.to_metric(),
                epsilon,
                matches!(rounding, RoundingArg::Dependent),
                trials,
                matches!(objective, ObjectiveArg::RelError),
                coreset_eps,
                coreset_delta,
                coreset_c,
                coreset_max_size,
                policy_arg(facility_policy),
                eps_cap,
                dump_lp,
                seed,
            );
            commands::cmd_plan(&voters, &sites, &cfg, &out)
        }
        Command::Sweep {
            voters,
            sites,
            k,
            metric,
            epsilon,
            eps_cap,
            coreset_eps,
            coreset_delta,
            coreset_c,
            coreset_max_size,
            facility_policy,
            kcenter_chunks,
            seed,
            out,
        } => {
            let cfg = commands::plan_config(
                k,
                metric.to_metric(),
                epsilon,
                false,
                64,
                false,
                coreset_eps,
                coreset_delta,
                coreset_c,
                coreset_max_size,
                policy_arg(facility_policy),
                None,
                false,
                seed,
            );
            commands::cmd_sweep(&voters, &sites, &cfg, &eps_cap, kcenter_chunks, &out)
        }
        Command::Compare { before, after, out } => {
            commands::cmd_compare(&before, &after, out.as_deref())
        }
        Command::Theorems => commands::cmd_theorems(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
