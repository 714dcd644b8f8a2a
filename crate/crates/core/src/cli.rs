//! Command-line interface: argument parsing, CSV emission, manifests.
//!
//! Exit codes: 0 success, 1 usage errors (bad flags, handled in main), 2
//! config errors, 3 runtime failures. Floats are written with Rust's
//! default `Display`, which is locale-independent and round-trips.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{load_config, write_manifest, FileConfig, RunManifest};
use crate::engine::{Scenario, ScenarioConfig, ScenarioOutcome};
use crate::sweep::{
    density_sweep, evaluate_point, joint_density_sweep, select_optimal_bias, BiasObjective,
    DensityPoint,
};
use crate::validate;
use crate::{Result, SimError};

#[derive(Debug, Parser)]
#[command(
    name = "hetsim",
    version,
    about = "Monte Carlo downlink/uplink simulator for two-tier cellular networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML config file; defaults apply for anything not set.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Drop count override (per sweep point for the sweep commands).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub drops: Option<u32>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..=4096))]
    pub workers: Option<u64>,

    /// Directory for CSV and manifest output.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured scenario once; writes drops.csv and summary.csv.
    Run,
    /// Evaluate the bias grid on common drops; writes bias_sweep.csv.
    SweepBias,
    /// Sweep small-cell density for every sweep model; writes
    /// density_sweep.csv.
    SweepDensity,
    /// Sweep macro density at a fixed small-cell ratio; writes
    /// joint_density_sweep.csv.
    SweepJointDensity,
    /// Same grid as sweep-density, reported for the decoupling columns;
    /// writes decoupling_sweep.csv.
    SweepDecoupling,
    /// Run the built-in self checks.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::SweepBias => "sweep_bias",
            Self::SweepDensity => "sweep_density",
            Self::SweepJointDensity => "sweep_joint_density",
            Self::SweepDecoupling => "sweep_decoupling",
            Self::Validate => "validate",
        }
    }
}

pub const DROPS_CSV_HEADER: &str = "drop_index,resamples,dl_tier,dl_cell,ul_tier,ul_cell,\
mismatch,dl_load,ul_load,dl_sinr,ul_sinr,dl_rate_bps_hz,ul_rate_bps_hz,\
ul_coupled_rate_bps_hz,ul_decoupled_rate_bps_hz";

pub const SUMMARY_CSV_HEADER: &str = "metric,value";

pub const BIAS_CSV_HEADER: &str = "bias_db,dl_p10,dl_p50,dl_p90,ul_coupled_p50,\
ul_decoupled_p50,mismatch_frac,femto_assoc_frac,n_drops,seed";

pub const DENSITY_CSV_HEADER: &str = "femto_density_per_km2,macro_density_per_km2,pl_model,\
alpha0,alpha1,optimal_bias_dB,dl_p10_gain,dl_p50_gain,dl_p90_gain,ul_coupled_p50,\
ul_decoupled_p50,ul_bias_gain,ul_decoupling_gain,mismatch_frac_nobias,\
mismatch_frac_optbias,femto_assoc_frac,n_drops,seed";

pub fn drops_csv(outcome: &ScenarioOutcome) -> String {
    let mut out = String::from(DROPS_CSV_HEADER);
    out.push('\n');
    for d in &outcome.drops {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.drop_index,
            d.resamples,
            d.dl_serving.tier,
            d.dl_serving.index,
            d.ul_serving.tier,
            d.ul_serving.index,
            u8::from(d.mismatch),
            d.dl_load,
            d.ul_load,
            d.dl_sinr,
            d.ul_sinr,
            d.dl_rate,
            d.ul_rate,
            d.ul_rate_coupled,
            d.ul_rate_decoupled,
        )
        .expect("string write");
    }
    out
}

pub fn summary_csv(outcome: &ScenarioOutcome) -> String {
    let s = &outcome.stats;
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    let rows = [
        ("dl_rate_p10", s.dl.p10),
        ("dl_rate_p50", s.dl.p50),
        ("dl_rate_p90", s.dl.p90),
        ("ul_rate_p10", s.ul.p10),
        ("ul_rate_p50", s.ul.p50),
        ("ul_rate_p90", s.ul.p90),
        ("ul_coupled_rate_p50", s.ul_coupled.p50),
        ("ul_decoupled_rate_p50", s.ul_decoupled.p50),
        ("mismatch_fraction", s.mismatch_fraction),
        ("femto_assoc_frac", s.small_cell_fraction),
        ("mean_resamples", s.mean_resamples),
        ("n_drops", s.n_drops as f64),
    ];
    for (name, value) in rows {
        writeln!(out, "{name},{value}").expect("string write");
    }
    out
}

pub fn bias_csv(values_db: &[f64], outcomes: &[ScenarioOutcome], seed: u64) -> String {
    let mut out = String::from(BIAS_CSV_HEADER);
    out.push('\n');
    for (v, o) in values_db.iter().zip(outcomes) {
        let s = &o.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            v,
            s.dl.p10,
            s.dl.p50,
            s.dl.p90,
            s.ul_coupled.p50,
            s.ul_decoupled.p50,
            s.mismatch_fraction,
            s.small_cell_fraction,
            s.n_drops,
            seed,
        )
        .expect("string write");
    }
    out
}

pub fn density_csv(points: &[DensityPoint]) -> String {
    let mut out = String::from(DENSITY_CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.small_cell_density_per_km2,
            p.macro_density_per_km2,
            p.model_label,
            p.alpha0,
            p.alpha1,
            p.optimal_bias_db,
            p.dl_p10_gain,
            p.dl_p50_gain,
            p.dl_p90_gain,
            p.ul_coupled_p50,
            p.ul_decoupled_p50,
            p.ul_bias_gain,
            p.ul_decoupling_gain,
            p.mismatch_frac_nobias,
            p.mismatch_frac_optbias,
            p.small_cell_assoc_frac,
            p.n_drops,
            p.seed,
        )
        .expect("string write");
    }
    out
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn with_pool<T: Send>(
    workers: Option<u64>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| SimError::Config(format!("worker pool: {e}")))?;
            pool.install(f)
        }
    }
}

struct Prepared {
    file: FileConfig,
    scenario: ScenarioConfig,
}

fn prepare(cli: &Cli) -> Result<Prepared> {
    let mut file = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        file.seed = seed;
    }
    if let Some(drops) = cli.drops {
        file.drops = drops;
    }
    let scenario = file.to_scenario()?;
    Ok(Prepared { file, scenario })
}

struct Emitted {
    files: Vec<String>,
    total_resamples: u64,
}

fn write_outputs(cli: &Cli, files: &[(&str, String)]) -> Result<Vec<String>> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut names = Vec::new();
    for (name, content) in files {
        std::fs::write(cli.out_dir.join(name), content)?;
        names.push((*name).to_string());
    }
    Ok(names)
}

fn finish(
    cli: &Cli,
    prepared: &Prepared,
    started_at: String,
    emitted: Emitted,
) -> Result<()> {
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        command: command_name(cli).into(),
        started_at,
        finished_at: now_rfc3339(),
        master_seed: prepared.file.seed,
        drops_per_point: prepared.file.drops,
        workers: cli
            .workers
            .map(|w| w as usize)
            .unwrap_or_else(rayon::current_num_threads),
        total_resamples: emitted.total_resamples,
        output_files: emitted.files,
        config: prepared.file.clone(),
    };
    let path = write_manifest(&cli.out_dir, &manifest)?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn command_name(cli: &Cli) -> &'static str {
    cli.command.name()
}

fn resamples(outcomes: &[&ScenarioOutcome]) -> u64 {
    outcomes
        .iter()
        .flat_map(|o| o.drops.iter())
        .map(|d| u64::from(d.resamples))
        .sum()
}

/// Runs one subcommand to completion. `Ok` carries the process exit code
/// (nonzero only for failed self checks); hard errors map to exit codes
/// through `SimError::exit_code`.
pub fn execute(cli: &Cli) -> Result<i32> {
    match cli.command {
        Command::Validate => {
            let outcomes = validate::run_all();
            for o in &outcomes {
                let status = if o.passed { "ok  " } else { "FAIL" };
                println!("{status} {}: {}", o.name, o.detail);
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", outcomes.len());
                return Ok(3);
            }
            println!("all {} checks passed", outcomes.len());
            Ok(0)
        }
        Command::Run => {
            let prepared = prepare(cli)?;
            let started_at = now_rfc3339();
            let t = Instant::now();
            let scenario = prepared.scenario.clone();
            let outcome = with_pool(cli.workers, move || Scenario::prepare(scenario)?.run())?;
            eprintln!(
                "{} drops in {:.1}s",
                outcome.drops.len(),
                t.elapsed().as_secs_f64()
            );
            let s = &outcome.stats;
            println!(
                "dl rate p10/p50/p90: {:.4}/{:.4}/{:.4} bps/Hz",
                s.dl.p10, s.dl.p50, s.dl.p90
            );
            println!(
                "ul rate p50 coupled/decoupled: {:.4}/{:.4} bps/Hz, mismatch {:.3}",
                s.ul_coupled.p50, s.ul_decoupled.p50, s.mismatch_fraction
            );
            let files = write_outputs(
                cli,
                &[("drops.csv", drops_csv(&outcome)), ("summary.csv", summary_csv(&outcome))],
            )?;
            finish(
                cli,
                &prepared,
                started_at,
                Emitted { files, total_resamples: resamples(&[&outcome]) },
            )?;
            Ok(0)
        }
        Command::SweepBias => {
            let prepared = prepare(cli)?;
            let started_at = now_rfc3339();
            let grid = prepared.file.sweep.bias_grid()?;
            let objective = prepared.file.sweep.objective;
            let scenario = prepared.scenario.clone();
            let eval =
                with_pool(cli.workers, move || evaluate_point(&scenario, &grid, objective))?;
            let median_best = select_optimal_bias(
                &eval.grid_values_db,
                &eval.outcomes,
                BiasObjective::MedianRate,
            )?;
            let edge_best = select_optimal_bias(
                &eval.grid_values_db,
                &eval.outcomes,
                BiasObjective::EdgeRate,
            )?;
            println!(
                "optimal bias: {} dB by median rate, {} dB by edge rate",
                median_best.bias_db, edge_best.bias_db
            );
            // Every grid point shares the same drops; count them once.
            let total = eval.total_resamples();
            let files = write_outputs(
                cli,
                &[(
                    "bias_sweep.csv",
                    bias_csv(&eval.grid_values_db, &eval.outcomes, prepared.file.seed),
                )],
            )?;
            finish(cli, &prepared, started_at, Emitted { files, total_resamples: total })?;
            Ok(0)
        }
        Command::SweepDensity | Command::SweepDecoupling => {
            let prepared = prepare(cli)?;
            let started_at = now_rfc3339();
            let rows = with_pool(cli.workers, || density_rows(&prepared))?;
            for r in &rows {
                println!(
                    "{} femto {}/km2: optimal bias {} dB, dl p50 gain {:.3}, \
                     decoupling gain {:.3}",
                    r.model_label,
                    r.small_cell_density_per_km2,
                    r.optimal_bias_db,
                    r.dl_p50_gain,
                    r.ul_decoupling_gain
                );
            }
            let name = match cli.command {
                Command::SweepDecoupling => "decoupling_sweep.csv",
                _ => "density_sweep.csv",
            };
            let total = rows.iter().map(|r| r.total_resamples).sum();
            let files = write_outputs(cli, &[(name, density_csv(&rows))])?;
            finish(cli, &prepared, started_at, Emitted { files, total_resamples: total })?;
            Ok(0)
        }
        Command::SweepJointDensity => {
            let prepared = prepare(cli)?;
            let started_at = now_rfc3339();
            let rows = with_pool(cli.workers, || joint_rows(&prepared))?;
            for r in &rows {
                println!(
                    "{} macro {}/km2, femto {}/km2: optimal bias {} dB, dl p50 gain {:.3}",
                    r.model_label,
                    r.macro_density_per_km2,
                    r.small_cell_density_per_km2,
                    r.optimal_bias_db,
                    r.dl_p50_gain
                );
            }
            let total = rows.iter().map(|r| r.total_resamples).sum();
            let files = write_outputs(cli, &[("joint_density_sweep.csv", density_csv(&rows))])?;
            finish(cli, &prepared, started_at, Emitted { files, total_resamples: total })?;
            Ok(0)
        }
    }
}

fn density_rows(prepared: &Prepared) -> Result<Vec<DensityPoint>> {
    let sweep = &prepared.file.sweep;
    let grid = sweep.bias_grid()?;
    let mut rows = Vec::new();
    for model in &sweep.models {
        let mut base = prepared.scenario.clone();
        base.path_loss = *model;
        rows.extend(density_sweep(
            &base,
            &sweep.femto_densities_per_km2,
            &grid,
            sweep.objective,
        )?);
    }
    Ok(rows)
}

fn joint_rows(prepared: &Prepared) -> Result<Vec<DensityPoint>> {
    let sweep = &prepared.file.sweep;
    let grid = sweep.bias_grid()?;
    let mut rows = Vec::new();
    for model in &sweep.models {
        let mut base = prepared.scenario.clone();
        base.path_loss = *model;
        rows.extend(joint_density_sweep(
            &base,
            &sweep.macro_densities_per_km2,
            sweep.femto_per_macro_ratio,
            &grid,
            sweep.objective,
        )?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DropResult;
    use crate::network::BsId;

    fn outcome() -> ScenarioOutcome {
        let drops = vec![
            DropResult {
                drop_index: 0,
                resamples: 0,
                dl_serving: BsId::new(0, 3),
                ul_serving: BsId::new(1, 2),
                mismatch: true,
                dl_load: 4,
                ul_load: 2,
                dl_sinr: 1.5,
                ul_sinr: 0.5,
                dl_rate: 0.5,
                ul_rate: 0.25,
                ul_rate_coupled: 0.25,
                ul_rate_decoupled: 0.3,
            },
            DropResult {
                drop_index: 1,
                resamples: 2,
                dl_serving: BsId::new(1, 0),
                ul_serving: BsId::new(1, 0),
                mismatch: false,
                dl_load: 1,
                ul_load: 1,
                dl_sinr: 3.0,
                ul_sinr: 1.0,
                dl_rate: 2.0,
                ul_rate: 1.0,
                ul_rate_coupled: 1.0,
                ul_rate_decoupled: 1.0,
            },
        ];
        ScenarioOutcome::from_drops(drops).unwrap()
    }

    #[test]
    fn drops_csv_layout() {
        let text = drops_csv(&outcome());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], DROPS_CSV_HEADER);
        assert_eq!(lines[1], "0,0,0,3,1,2,1,4,2,1.5,0.5,0.5,0.25,0.25,0.3");
        assert_eq!(lines[2], "1,2,1,0,1,0,0,1,1,3,1,2,1,1,1");
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }

    #[test]
    fn summary_csv_layout() {
        let text = summary_csv(&outcome());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_CSV_HEADER);
        assert!(lines.contains(&"mismatch_fraction,0.5"));
        assert!(lines.contains(&"n_drops,2"));
        assert!(lines.iter().any(|l| l.starts_with("dl_rate_p50,")));
    }

    #[test]
    fn bias_csv_layout() {
        let o = outcome();
        let text = bias_csv(&[0.0, 7.0], &[o.clone(), o], 42);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BIAS_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("7,"));
        assert!(lines[1].ends_with(",2,42"));
    }

    #[test]
    fn density_csv_layout() {
        let point = DensityPoint {
            small_cell_density_per_km2: 10.0,
            macro_density_per_km2: 1.0,
            model_label: "dual_a3_a4".into(),
            alpha0: 3.0,
            alpha1: 4.0,
            optimal_bias_db: 5.0,
            dl_p10_gain: 1.25,
            dl_p50_gain: 1.1,
            dl_p90_gain: 0.95,
            ul_coupled_p50: 0.8,
            ul_decoupled_p50: 0.9,
            ul_bias_gain: 1.05,
            ul_decoupling_gain: 1.125,
            mismatch_frac_nobias: 0.22,
            mismatch_frac_optbias: 0.11,
            small_cell_assoc_frac: 0.7,
            n_drops: 100,
            seed: 0,
            total_resamples: 0,
        };
        let text = density_csv(&[point]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "femto_density_per_km2,macro_density_per_km2,pl_model,alpha0,alpha1,\
             optimal_bias_dB,dl_p10_gain,dl_p50_gain,dl_p90_gain,ul_coupled_p50,\
             ul_decoupled_p50,ul_bias_gain,ul_decoupling_gain,mismatch_frac_nobias,\
             mismatch_frac_optbias,femto_assoc_frac,n_drops,seed"
        );
        assert_eq!(
            lines[1],
            "10,1,dual_a3_a4,3,4,5,1.25,1.1,0.95,0.8,0.9,1.05,1.125,0.22,0.11,0.7,100,0"
        );
    }

    #[test]
    fn cli_parses_flags() {
        let cli = Cli::try_parse_from([
            "hetsim", "run", "--seed", "7", "--drops", "10", "--workers", "2", "--out-dir",
            "/tmp/x",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Run));
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.drops, Some(10));
        assert_eq!(cli.workers, Some(2));
        assert_eq!(cli.out_dir, PathBuf::from("/tmp/x"));

        assert!(Cli::try_parse_from(["hetsim", "launch"]).is_err());
        assert!(Cli::try_parse_from(["hetsim", "run", "--drops", "0"]).is_err());
        assert!(Cli::try_parse_from(["hetsim", "run", "--workers", "0"]).is_err());
        assert!(Cli::try_parse_from(["hetsim"]).is_err());
    }

    #[test]
    fn command_names_follow_subcommands() {
        let cli = Cli::try_parse_from(["hetsim", "sweep-joint-density"]).unwrap();
        assert_eq!(cli.command.name(), "sweep_joint_density");
        let cli = Cli::try_parse_from(["hetsim", "sweep-decoupling"]).unwrap();
        assert_eq!(cli.command.name(), "sweep_decoupling");
    }
}
