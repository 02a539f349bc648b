//! The five subcommands. Each returns the path it wrote.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use seqir_core::analysis::{summarize_ensemble, EnsembleSummary, SummaryOptions};
use seqir_core::integrator::{simulate, simulate_deterministic, Trajectory};
use seqir_core::regime_chain::{occupancy, sample_path_exact};
use seqir_core::seeds::{derive_seed, stream, CHAIN_STREAM};
use seqir_core::{
    stationary_distribution, threshold_report, transition_matrix, Generator, PolicyFunction,
    RegimeParameterTable, ThresholdReport,
};

use crate::config::{RunConfig, Setup};
use crate::error::CliError;
use crate::output::{format_decimal, to_toml, trajectory_csv, write_file};

/// Horizon of the exact-sampler occupancy check in `chain`.
pub const CHAIN_OCCUPANCY_HORIZON: f64 = 1e4;

pub fn thresholds_report(setup: &Setup) -> Result<ThresholdReport, CliError> {
    Ok(threshold_report(&setup.table, &setup.generator, &setup.policy)?)
}

pub fn cmd_thresholds(config: &RunConfig, out: &Path) -> Result<ThresholdReport, CliError> {
    let setup = config.setup()?;
    let report = thresholds_report(&setup)?;
    write_file(out, &to_toml(&report))?;
    log::info!("verdict {}", report.verdict.as_str());
    Ok(report)
}

pub fn run_single(setup: &Setup, seed: u64) -> Result<Trajectory, CliError> {
    let cfg = setup.simulation.clone().with_seed(seed);
    Ok(simulate(&cfg, &setup.generator, &setup.table, &setup.policy)?)
}

pub fn cmd_simulate(config: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Trajectory, CliError> {
    let setup = config.setup()?;
    let traj = run_single(&setup, seed.unwrap_or(setup.simulation.seed))?;
    if traj.meta.clamp_events > 0 {
        log::warn!("{} clamp events", traj.meta.clamp_events);
    }
    write_file(out, &trajectory_csv(&traj))?;
    Ok(traj)
}

pub fn trajectory_file_name(index: usize, seed: u64) -> String {
    format!("trajectory_{index:04}_seed_{seed:016x}.csv")
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleDocument {
    pub verdict: String,
    /// Hexadecimal, since TOML integers are signed 64-bit.
    pub base_seed: String,
    pub seeds: Vec<String>,
    pub files: Vec<String>,
    pub summary: EnsembleSummary,
}

pub fn cmd_ensemble(
    config: &RunConfig,
    out_dir: &Path,
    base_seed: Option<u64>,
) -> Result<EnsembleDocument, CliError> {
    let setup = config.setup()?;
    let base = base_seed.unwrap_or(setup.ensemble.base_seed);
    let report = thresholds_report(&setup)?;
    let n = setup.ensemble.n;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let runs: Vec<(String, u64, Trajectory)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base, i as u64);
            let traj = run_single(&setup, seed)?;
            let name = trajectory_file_name(i, seed);
            write_file(&out_dir.join(&name), &trajectory_csv(&traj))?;
            Ok((name, seed, traj))
        })
        .collect::<Result<_, CliError>>()?;
    let trajectories: Vec<Trajectory> = runs.iter().map(|r| r.2.clone()).collect();
    let summary = summarize_ensemble(
        &trajectories,
        &report.stationary,
        &report,
        &SummaryOptions::default(),
    )?;
    let doc = EnsembleDocument {
        verdict: report.verdict.as_str().into(),
        base_seed: format!("{base:016x}"),
        seeds: runs.iter().map(|r| format!("{:016x}", r.1)).collect(),
        files: runs.iter().map(|r| r.0.clone()).collect(),
        summary,
    };
    write_file(&out_dir.join("summary.toml"), &to_toml(&doc))?;
    Ok(doc)
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupancyCheck {
    pub sampler: String,
    pub horizon: f64,
    pub seed: String,
    pub jumps: usize,
    pub occupancy: Vec<f64>,
    pub l1_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub dt: f64,
    pub stationary: Vec<f64>,
    pub stationary_residual: f64,
    pub transition: Vec<Vec<f64>>,
    pub row_sums: Vec<f64>,
    pub occupancy: OccupancyCheck,
}

pub fn chain_report(g: &Generator, dt: f64, seed: u64) -> Result<ChainReport, CliError> {
    let pi = stationary_distribution(g).map_err(|e| CliError::Math(e.to_string()))?;
    let p = transition_matrix(g, dt).map_err(|e| CliError::Math(e.to_string()))?;
    let n = g.n_states();
    let transition: Vec<Vec<f64>> = (0..n).map(|i| p.row(i).iter().copied().collect()).collect();
    let row_sums = transition.iter().map(|r| r.iter().sum()).collect();
    let mut rng = stream(seed, CHAIN_STREAM);
    let path = sample_path_exact(g, 0, CHAIN_OCCUPANCY_HORIZON, &mut rng)
        .map_err(|e| CliError::Math(e.to_string()))?;
    let occ = occupancy(&path);
    Ok(ChainReport {
        dt,
        stationary: pi.probabilities().to_vec(),
        stationary_residual: pi.residual(g),
        transition,
        row_sums,
        occupancy: OccupancyCheck {
            sampler: "exact".into(),
            horizon: CHAIN_OCCUPANCY_HORIZON,
            seed: format!("{seed:016x}"),
            jumps: path.n_jumps(),
            l1_distance: pi.l1_distance(&occ),
            occupancy: occ,
        },
    })
}

pub fn cmd_chain(config: &RunConfig, out: &Path, seed: Option<u64>) -> Result<ChainReport, CliError> {
    let setup = config.setup()?;
    let report = chain_report(
        &setup.generator,
        setup.simulation.dt,
        seed.unwrap_or(setup.simulation.seed),
    )?;
    write_file(out, &to_toml(&report))?;
    Ok(report)
}

/// Ensemble mean of the single-regime stochastic model next to its RK4
/// deterministic counterpart, sample by sample.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub stochastic_mean: Vec<[f64; 5]>,
    pub deterministic: Vec<[f64; 5]>,
    pub sup_gap: f64,
}

pub fn compare_det(config: &RunConfig, base_seed: Option<u64>) -> Result<Comparison, CliError> {
    let setup = config.setup()?;
    let cmp = config
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Config("compare: section required for compare-det".into()))?;
    if !matches!(setup.policy, PolicyFunction::Linear) {
        return Err(CliError::Config(
            "policy.kind: compare-det requires a linear policy".into(),
        ));
    }
    let mut params = *setup.table.get(cmp.regime - 1);
    if let Some(s0) = cmp.sigma0 {
        params.sigma0 = s0;
    }
    let table = RegimeParameterTable::single(params)
        .map_err(|e| CliError::Config(format!("compare: {e}")))?;
    let mut sim = setup.simulation.clone();
    sim.initial_regime = 0;
    let base = base_seed.unwrap_or(setup.ensemble.base_seed);
    let n = setup.ensemble.n;
    let g = Generator::single();
    let runs: Vec<Trajectory> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = sim.clone().with_seed(derive_seed(base, i));
            simulate(&cfg, &g, &table, &PolicyFunction::Linear).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;
    let det = simulate_deterministic(
        sim.initial_state,
        &params,
        params.m,
        sim.dt,
        sim.horizon,
        sim.output_stride,
    )?;
    let times: Vec<f64> = det.times().collect();
    let stochastic_mean: Vec<[f64; 5]> = (0..times.len())
        .map(|j| {
            std::array::from_fn(|k| {
                runs.iter().map(|r| r.samples[j].state.to_array()[k]).sum::<f64>() / n as f64
            })
        })
        .collect();
    let deterministic: Vec<[f64; 5]> = det.samples.iter().map(|s| s.state.to_array()).collect();
    let sup_gap = stochastic_mean
        .iter()
        .zip(&deterministic)
        .flat_map(|(a, b)| (0..5).map(move |k| (a[k] - b[k]).abs()))
        .fold(0.0, f64::max);
    Ok(Comparison {
        times,
        stochastic_mean,
        deterministic,
        sup_gap,
    })
}

pub const COMPARE_HEADER: &str = "t,S_stochastic,S_deterministic,E_stochastic,E_deterministic,\
Q_stochastic,Q_deterministic,I_stochastic,I_deterministic,R_stochastic,R_deterministic";

pub fn comparison_csv(c: &Comparison) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for (j, t) in c.times.iter().enumerate() {
        out.push_str(&format_decimal(*t));
        for k in 0..5 {
            out.push(',');
            out.push_str(&format_decimal(c.stochastic_mean[j][k]));
            out.push(',');
            out.push_str(&format_decimal(c.deterministic[j][k]));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_compare_det(
    config: &RunConfig,
    out: &Path,
    base_seed: Option<u64>,
) -> Result<Comparison, CliError> {
    let cmp = compare_det(config, base_seed)?;
    log::info!("sup-norm gap {}", cmp.sup_gap);
    write_file(out, &comparison_csv(&cmp))?;
    Ok(cmp)
}

/// Default output location of each command inside `dir`.
pub fn default_output(dir: &Path, command: &str) -> PathBuf {
    dir.join(match command {
        "thresholds" => "thresholds.toml",
        "simulate" => "trajectory.csv",
        "ensemble" => "ensemble",
        "chain" => "chain.toml",
        _ => "compare.csv",
    })
}
