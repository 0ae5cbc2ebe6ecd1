use std::path::{Path, PathBuf};

use bmdp_core::inputs::read_prices_csv;
use bmdp_core::markov::{build_transition_matrix, validate_matrix, MarkovError, StateMode, TransitionMatrix, ValidationReport};
use bmdp_core::mdp::{price_problem, solve, synthetic_prices, MdpError, MdpSolution};
use bmdp_core::occupancy::derive_profile_seed;
use bmdp_core::schedule::{read_trace_csv, run_ensemble, write_trace_csv, SimulationTrace, TraceMeta, TRACE_SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{io_err, read_text, sibling, write_bytes, write_json, write_sidecar};
use crate::plot;
use crate::CliError;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TRACES_DIR: &str = "traces";
pub const SUMMARY_FILE: &str = "simulate_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub index: usize,
    pub seed: u64,
    pub trace_file: Option<String>,
    pub energy_kwh: f64,
    pub lp_iterations: usize,
    pub relaxed_windows: usize,
    pub max_comfort_violation: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub schema_version: u32,
    pub building_id: String,
    pub n_profiles: usize,
    pub master_seed: u64,
    pub dt_hours: f64,
    pub horizon_steps: usize,
    pub total_energy_kwh: f64,
    pub relaxed_windows: usize,
    pub max_comfort_violation: f64,
    pub failed_profiles: usize,
    pub profiles: Vec<ProfileSummary>,
}

pub fn trace_file_name(index: usize) -> String {
    format!("trace_{index:03}.csv")
}

pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateSummary, CliError> {
    let tpl = cfg.template()?;
    let s = &cfg.scenario;
    let members = run_ensemble(&tpl, s.n_profiles, s.master_seed)?;
    let traces_dir = out_dir.join(TRACES_DIR);
    let mut profiles = Vec::with_capacity(members.len());
    let mut written = Vec::new();
    let mut first_err = None;
    for (index, m) in members.into_iter().enumerate() {
        let seed = derive_profile_seed(s.master_seed, index);
        match m {
            Ok((trace, scen)) => {
                let name = trace_file_name(index);
                let path = traces_dir.join(&name);
                let mut buf = Vec::new();
                write_trace_csv(&trace, &mut buf)?;
                write_bytes(&path, &buf)?;
                write_json(&sibling(&path, "json"), &trace.meta)?;
                written.push(path);
                profiles.push(ProfileSummary {
                    index,
                    seed,
                    trace_file: Some(format!("{TRACES_DIR}/{name}")),
                    energy_kwh: trace.meta.energy_kwh,
                    lp_iterations: trace.meta.lp_iterations,
                    relaxed_windows: trace.meta.relaxations.len(),
                    max_comfort_violation: trace.max_comfort_violation(&scen.building, &scen.comfort),
                    error: None,
                });
            }
            Err(e) => {
                profiles.push(ProfileSummary {
                    index,
                    seed,
                    trace_file: None,
                    energy_kwh: 0.0,
                    lp_iterations: 0,
                    relaxed_windows: 0,
                    max_comfort_violation: 0.0,
                    error: Some(e.to_string()),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    let ok = profiles.iter().filter(|p| p.error.is_none());
    let summary = SimulateSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        building_id: tpl.building.id.clone(),
        n_profiles: s.n_profiles,
        master_seed: s.master_seed,
        dt_hours: s.dt_hours,
        horizon_steps: s.horizon_steps,
        total_energy_kwh: ok.clone().map(|p| p.energy_kwh).sum(),
        relaxed_windows: ok.clone().map(|p| p.relaxed_windows).sum(),
        max_comfort_violation: ok.map(|p| p.max_comfort_violation).fold(0.0, f64::max),
        failed_profiles: profiles.iter().filter(|p| p.error.is_some()).count(),
        profiles,
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    written.push(summary_path.clone());
    write_sidecar(&summary_path, "simulate", &cfg.hash(), &written)?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(summary),
    }
}

/// Reads every `trace_*.csv` in `dir` in name order, with its metadata
/// sidecar when present.
pub fn read_traces(dir: &Path, dt_hours: f64) -> Result<Vec<SimulationTrace>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.starts_with("trace_") && name.ends_with(".csv")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no trace_*.csv files", dir.display())));
    }
    files
        .iter()
        .map(|path| {
            let meta_path = sibling(path, "json");
            let meta: TraceMeta = if meta_path.is_file() {
                serde_json::from_str(&read_text(&meta_path)?).map_err(|e| CliError::Data(format!("{}: {e}", meta_path.display())))?
            } else {
                TraceMeta {
                    schema_version: TRACE_SCHEMA_VERSION,
                    building_id: "unknown".into(),
                    profile_seed: None,
                    dt_hours,
                    n_states: 0,
                    n_zones: 0,
                    relaxations: vec![],
                    lp_iterations: 0,
                    energy_kwh: 0.0,
                }
            };
            let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
            read_trace_csv(file, meta).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn markov_err(path: &Path, e: MarkovError) -> CliError {
    match e {
        MarkovError::Io(e) => io_err(path, e),
        MarkovError::Schema(e) => CliError::Data(format!("{}: schema error: {e}", path.display())),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

pub fn default_matrix_name(cfg: &RunConfig) -> String {
    let b = &cfg.binning;
    let var = serde_json::to_value(b.power_var).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let mode = match b.mode {
        StateMode::Product => "product",
        StateMode::Marginal => "marginal",
    };
    format!("mp_{var}_{mode}_{}.json", cfg.binning_spec().n_states())
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

pub fn build_mp(cfg: &RunConfig, traces_dir: &Path, output: &Path) -> Result<(TransitionMatrix, ValidationReport), CliError> {
    let traces = read_traces(traces_dir, cfg.scenario.dt_hours)?;
    let tm = build_transition_matrix(&traces, &cfg.binning_spec(), cfg.binning.fallback).map_err(|e| markov_err(traces_dir, e))?;
    let report = validate_matrix(&tm);
    let mut json = tm.to_json_string();
    json.push('\n');
    write_bytes(output, json.as_bytes())?;
    let csv_path = sibling(output, "csv");
    let mut csv = Vec::new();
    tm.write_probs_csv(&mut csv).map_err(|e| markov_err(&csv_path, e))?;
    write_bytes(&csv_path, &csv)?;
    let report_path = sibling(output, "report.json");
    write_json(
        &report_path,
        &ReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            report: &report,
        },
    )?;
    write_sidecar(output, "build-mp", &cfg.hash(), &[output.to_path_buf(), csv_path, report_path])?;
    Ok((tm, report))
}

pub fn read_matrix(path: &Path) -> Result<TransitionMatrix, CliError> {
    TransitionMatrix::from_json_str(&read_text(path)?).map_err(|e| markov_err(path, e))
}

fn mdp_err(e: MdpError) -> CliError {
    match e {
        MdpError::NotStochastic { .. } | MdpError::BadEntry { .. } => CliError::Validation(e.to_string()),
        MdpError::Gamma(_) | MdpError::PowerFactor(_) | MdpError::Horizon => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

pub fn solve_mdp(
    cfg: &RunConfig,
    matrix: &Path,
    prices: Option<&Path>,
    include_p_star: bool,
    output: &Path,
) -> Result<MdpSolution, CliError> {
    let tm = read_matrix(matrix)?;
    let horizon = cfg.mdp.horizon;
    let prices = match prices.or(cfg.paths.prices.as_deref()) {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
            read_prices_csv(file).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => synthetic_prices(horizon, tm.dt_hours),
    };
    let prob = price_problem(&tm, &prices, &cfg.control_params()).map_err(mdp_err)?;
    let mut sol = solve(&prob).map_err(mdp_err)?;
    if !include_p_star {
        sol = sol.without_p_star();
    }
    let mut json = sol.to_json_string();
    json.push('\n');
    write_bytes(output, json.as_bytes())?;
    write_sidecar(output, "solve-mdp", &cfg.hash(), &[output.to_path_buf()])?;
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    MatrixHeatmap,
    PowerTrajectory,
}

pub fn plot(kind: PlotKind, input: &Path, output: &Path) -> Result<(), CliError> {
    let svg = match kind {
        PlotKind::MatrixHeatmap => plot::matrix_heatmap(&read_matrix(input)?),
        PlotKind::PowerTrajectory => {
            let sol: MdpSolution = serde_json::from_str(&read_text(input)?)
                .map_err(|e| CliError::Data(format!("{}: schema error: {e}", input.display())))?;
            if sol.p_alpha.len() != sol.n_states || sol.rho.iter().any(|r| r.len() != sol.n_states) {
                return Err(CliError::Data(format!("{}: inconsistent state dimensions", input.display())));
            }
            plot::power_trajectory(&sol)
        }
    };
    write_bytes(output, svg.as_bytes())
}

/// Structural report; fails with a validation error when the matrix is not
/// column-stochastic within `tol`.
pub fn validate(matrix: &Path, tol: f64) -> Result<(String, Result<(), CliError>), CliError> {
    let tm = read_matrix(matrix)?;
    let report = validate_matrix(&tm);
    let text = serde_json::to_string_pretty(&ReportFile {
        schema_version: REPORT_SCHEMA_VERSION,
        report: &report,
    })
    .expect("report serializes");
    let verdict = if report.is_stochastic(tol) {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "column residual {:e} exceeds {tol:e} ({} negative, {} non-finite entries)",
            report.column_residual, report.negative_entries, report.non_finite_entries
        )))
    };
    Ok((text, verdict))
}
