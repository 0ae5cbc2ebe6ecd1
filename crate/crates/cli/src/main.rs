use std::path::PathBuf;
use std::process::ExitCode;

use bmdp_cli::commands::{self, PlotKind, TRACES_DIR};
use bmdp_cli::config::RunConfig;
use bmdp_cli::output::sibling;
use bmdp_cli::CliError;
use bmdp_core::markov::{PowerVar, StateMode};
use clap::{Parser, Subcommand, ValueEnum};

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Building ensemble flexibility: simulate, reduce to a Markov process,
/// control it against prices.
#[derive(Parser)]
#[command(name = "bmdp", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides BMDP_OUTPUT_DIR and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PowerVarArg {
    HeatPump,
    Auxiliary,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Product,
    Marginal,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the occupancy ensemble and write one trace per profile.
    Simulate {
        #[arg(long)]
        n_profiles: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        horizon_steps: Option<usize>,
    },
    /// Build the transition matrix from a trace directory.
    BuildMp {
        /// Defaults to `<out>/traces`.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long, value_enum)]
        power_var: Option<PowerVarArg>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        n_temp_bins: Option<usize>,
        #[arg(long)]
        n_power_bins: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the price-driven control problem on a matrix file.
    SolveMdp {
        #[arg(long)]
        matrix: PathBuf,
        /// Price CSV; the config's, else the synthetic tariff.
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        utility_weight: Option<f64>,
        /// Store every optimal transition matrix in the solution.
        #[arg(long)]
        include_p_star: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a matrix heatmap or a power trajectory as SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input path with an `.svg` extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a matrix file; nonzero exit when it is not column-stochastic.
    Validate {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Print the effective configuration with all defaults.
    PrintConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let out_dir = cfg.output_dir(cli.out.as_deref());
    match cli.cmd {
        Command::Simulate {
            n_profiles,
            master_seed,
            horizon_steps,
        } => {
            let s = &mut cfg.scenario;
            s.n_profiles = n_profiles.unwrap_or(s.n_profiles);
            s.master_seed = master_seed.unwrap_or(s.master_seed);
            s.horizon_steps = horizon_steps.unwrap_or(s.horizon_steps);
            cfg.validate()?;
            let result = commands::simulate(&cfg, &out_dir);
            if let Ok(summary) = &result {
                out!(
                    "{} profiles, {} steps: {:.3} kWh total, {} relaxed windows, max comfort violation {:.3e} °C",
                    summary.n_profiles, summary.horizon_steps, summary.total_energy_kwh, summary.relaxed_windows, summary.max_comfort_violation
                );
                out!("wrote {}", out_dir.join(commands::SUMMARY_FILE).display());
            }
            result.map(|_| ())
        }
        Command::BuildMp {
            traces,
            power_var,
            mode,
            n_temp_bins,
            n_power_bins,
            output,
        } => {
            let b = &mut cfg.binning;
            if let Some(v) = power_var {
                b.power_var = match v {
                    PowerVarArg::HeatPump => PowerVar::HeatPump,
                    PowerVarArg::Auxiliary => PowerVar::Auxiliary,
                };
            }
            if let Some(m) = mode {
                b.mode = match m {
                    ModeArg::Product => StateMode::Product,
                    ModeArg::Marginal => StateMode::Marginal,
                };
            }
            b.n_temp_bins = n_temp_bins.unwrap_or(b.n_temp_bins);
            b.n_power_bins = n_power_bins.unwrap_or(b.n_power_bins);
            cfg.validate()?;
            let traces = traces.unwrap_or_else(|| out_dir.join(TRACES_DIR));
            let output = output.unwrap_or_else(|| out_dir.join(commands::default_matrix_name(&cfg)));
            let (tm, r) = commands::build_mp(&cfg, &traces, &output)?;
            out!(
                "{} states from {} traces ({} transitions): density {:.4}, diagonal mass {:.4}, {} classes, residual {:.1e}",
                tm.n_states(),
                tm.n_traces,
                tm.n_transitions,
                r.density,
                r.diagonal_mass,
                r.classes.len(),
                r.column_residual
            );
            out!("wrote {}", output.display());
            Ok(())
        }
        Command::SolveMdp {
            matrix,
            prices,
            horizon,
            utility_weight,
            include_p_star,
            output,
        } => {
            cfg.mdp.horizon = horizon.unwrap_or(cfg.mdp.horizon);
            cfg.mdp.utility_weight = utility_weight.unwrap_or(cfg.mdp.utility_weight);
            cfg.validate()?;
            let output = output.unwrap_or_else(|| out_dir.join("solution.json"));
            let sol = commands::solve_mdp(&cfg, &matrix, prices.as_deref(), include_p_star, &output)?;
            out!(
                "{} steps over {} states: objective {:.6}, expected power {:.4} -> {:.4} kW",
                sol.horizon,
                sol.n_states,
                sol.objective,
                sol.p_t[0],
                sol.p_t[sol.horizon]
            );
            out!("wrote {}", output.display());
            Ok(())
        }
        Command::Plot { kind, input, output } => {
            let output = output.unwrap_or_else(|| sibling(&input, "svg"));
            commands::plot(kind, &input, &output)?;
            out!("wrote {}", output.display());
            Ok(())
        }
        Command::Validate { matrix, tol } => {
            let (text, verdict) = commands::validate(&matrix, tol)?;
            out!("{text}");
            verdict
        }
        Command::PrintConfig => {
            {
                use std::io::Write;
                let _ = std::io::stdout().write_all(cfg.to_toml().as_bytes());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bmdp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
