//! Command-line front end: scenario generation, campaign simulation,
//! estimation, rank analysis, (m, p) sweeps, and configuration counting.
//!
//! Exit codes: 0 on success, 1 on numerical failure, 2 on invalid arguments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use deembed::campaign::{simulate_campaign, Scenario};
use deembed::diagnostics::{jacobian_rank_at, mse, sweep, SweepSettings};
use deembed::estimator::{estimate, DutParameterization, EstimatorSettings};
use deembed::io::{load_campaign, load_scenario, save_campaign, save_report, save_scenario};
use deembed::network::random_passive_reciprocal;
use deembed::tln::{count_step1_configs, count_step2_configs, enumerate_configs, step2_series, Stage};
use deembed::{Error, Tolerances};

#[derive(Parser)]
#[command(name = "deembed", version, about = "Multiplexed de-embedding toolkit: simulate and recover a hidden multi-port device probed through a programmable fixture")]
struct Cli {
    /// JSON file overriding estimator settings and tolerances
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic scenario (random passive reciprocal fixture and device)
    Generate {
        /// Device port count
        #[arg(long, default_value_t = 4)]
        n_s: usize,
        /// Accessible antenna port count
        #[arg(long, default_value_t = 8)]
        n_a: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Measurement SNR in dB (omit for noise-free)
        #[arg(long)]
        snr_db: Option<f64>,
        /// Fixture-knowledge error level in dB below mean entry power
        #[arg(long)]
        ota_error_db: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a measurement campaign from a scenario file
    Simulate {
        scenario: PathBuf,
        /// Number of fixture realizations
        #[arg(long, default_value_t = 30)]
        p: usize,
        /// Comma-separated TX port indices, e.g. 0,1
        #[arg(long, default_value = "0")]
        tx: String,
        /// Comma-separated RX port indices
        #[arg(long, default_value = "1")]
        rx: String,
        /// Override the scenario's configuration-series seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the device from a campaign file
    Estimate {
        campaign: PathBuf,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        initial_step: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report file (JSON)
        #[arg(long)]
        out: PathBuf,
        /// Loss-trace CSV of the winning restart
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Singular-value spectrum and effective rank of the Jacobian
    Rank {
        campaign: PathBuf,
        /// Linearization point: "truth" (requires an embedded scenario) or "random"
        #[arg(long, default_value = "truth")]
        theta0: String,
        #[arg(long, default_value_t = 0)]
        random_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Effective-rank / MSE sweep over realization counts and TX-RX splits
    Sweep {
        scenario: PathBuf,
        /// Comma-separated realization counts, e.g. 1,5,30
        #[arg(long, default_value = "1,5,30")]
        p_list: String,
        /// Comma-separated splits n_t x n_r, e.g. 1x1,2x2
        #[arg(long, default_value = "1x1")]
        splits: String,
        /// Comma-separated seeds
        #[arg(long, default_value = "0")]
        seeds: String,
        /// Worker thread count (0 = all cores); output is identical for any value
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also run the estimator per cell
        #[arg(long)]
        with_estimate: bool,
        #[arg(long)]
        max_choices: Option<usize>,
        /// Grid preset: n_s=4, 8 ports split 4/4, p=1..30, splits 1x1..4x4, 5 seeds
        #[arg(long)]
        preset: Option<String>,
        /// Per-cell rows CSV
        #[arg(long)]
        out: PathBuf,
        /// Mean/min/max aggregate CSV
        #[arg(long)]
        aggregate_out: Option<PathBuf>,
    },
    /// Print admissible configuration counts for a port count
    Count {
        n_s: usize,
    },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EstimatorOverrides {
    initial_step: Option<f64>,
    decay: Option<f64>,
    adam_beta1: Option<f64>,
    adam_beta2: Option<f64>,
    adam_epsilon: Option<f64>,
    max_iters: Option<usize>,
    loss_tolerance: Option<f64>,
    n_restarts: Option<usize>,
    init_scale: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ToleranceOverrides {
    reciprocity: Option<f64>,
    passivity: Option<f64>,
    condition_cap: Option<f64>,
    enumeration_cap: Option<u128>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    estimator: EstimatorOverrides,
    #[serde(default)]
    tolerances: ToleranceOverrides,
}

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    fn estimator_settings(&self) -> EstimatorSettings {
        let d = EstimatorSettings::default();
        let o = &self.estimator;
        EstimatorSettings {
            initial_step: o.initial_step.unwrap_or(d.initial_step),
            decay: o.decay.unwrap_or(d.decay),
            adam_beta1: o.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: o.adam_beta2.unwrap_or(d.adam_beta2),
            adam_epsilon: o.adam_epsilon.unwrap_or(d.adam_epsilon),
            max_iters: o.max_iters.unwrap_or(d.max_iters),
            loss_tolerance: o.loss_tolerance.unwrap_or(d.loss_tolerance),
            n_restarts: o.n_restarts.unwrap_or(d.n_restarts),
            init_scale: o.init_scale.unwrap_or(d.init_scale),
            seed: o.seed.unwrap_or(d.seed),
        }
    }

    fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        let o = &self.tolerances;
        Tolerances {
            reciprocity: o.reciprocity.unwrap_or(d.reciprocity),
            passivity: o.passivity.unwrap_or(d.passivity),
            condition_cap: o.condition_cap.unwrap_or(d.condition_cap),
            enumeration_cap: o.enumeration_cap.unwrap_or(d.enumeration_cap),
        }
    }
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            message: e.to_string(),
            code: 1,
        }
    }
}

fn parse_index_list(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("invalid {what} entry `{s}`")))
        })
        .collect()
}

fn parse_seed_list(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| CliError::usage(format!("invalid seed `{s}`")))
        })
        .collect()
}

fn parse_splits(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (a, b) = s
                .trim()
                .split_once('x')
                .ok_or_else(|| CliError::usage(format!("invalid split `{s}`, expected NxM")))?;
            let n_t = a
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("invalid split `{s}`")))?;
            let n_r = b
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("invalid split `{s}`")))?;
            Ok((n_t, n_r))
        })
        .collect()
}

fn write_file(path: &PathBuf, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| {
        CliError::from(Error::Io(e))
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = FileConfig::load(cli.config.as_ref())?;
    let tol = config.tolerances();
    match cli.command {
        Command::Generate {
            n_s,
            n_a,
            seed,
            snr_db,
            ota_error_db,
            out,
        } => {
            if n_s == 0 || n_a < 2 {
                return Err(CliError::usage("need n_s >= 1 and n_a >= 2"));
            }
            let mut scenario = Scenario::synthetic(n_a, n_s, seed)?;
            scenario.snr_db = snr_db;
            scenario.ota_knowledge_error_db = ota_error_db;
            scenario.validate(&tol)?;
            save_scenario(&out, &scenario)?;
            println!(
                "generated scenario: n_s={n_s} n_a={n_a} seed={seed} -> {}",
                out.display()
            );
            Ok(())
        }
        Command::Simulate {
            scenario,
            p,
            tx,
            rx,
            seed,
            out,
        } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let tx = parse_index_list(&tx, "tx")?;
            let rx = parse_index_list(&rx, "rx")?;
            let configs = step2_series(sc.n_s(), p, sc.seed, &tol)?;
            let campaign = simulate_campaign(&sc, &configs, &tx, &rx, &tol)?;
            save_campaign(&out, &campaign, Some(&sc))?;
            println!(
                "simulated campaign: p={p} m={} -> {}",
                campaign.m(),
                out.display()
            );
            Ok(())
        }
        Command::Estimate {
            campaign,
            restarts,
            max_iters,
            initial_step,
            seed,
            out,
            trace_out,
        } => {
            let (c, scenario) = load_campaign(&campaign)?;
            let mut settings = config.estimator_settings();
            if let Some(v) = restarts {
                settings.n_restarts = v;
            }
            if let Some(v) = max_iters {
                settings.max_iters = v;
            }
            if let Some(v) = initial_step {
                settings.initial_step = v;
            }
            if let Some(v) = seed {
                settings.seed = v;
            }
            let report = estimate(&c, &settings)?;
            save_report(&out, &report)?;
            if let Some(trace_path) = trace_out {
                let mut csv = String::from("iteration,loss\n");
                for (i, l) in report.loss_trace.iter().enumerate() {
                    csv.push_str(&format!("{i},{l}\n"));
                }
                write_file(&trace_path, &csv)?;
            }
            println!("final loss: {}", report.final_loss);
            if let Some(sc) = scenario {
                let e = mse(&report.s_dut_hat, &sc.s_dut_true)?;
                println!("mse vs truth: {} (normalized {})", e.raw, e.normalized);
            }
            if report.passivity_warning {
                println!("warning: estimate is not passive");
            }
            Ok(())
        }
        Command::Rank {
            campaign,
            theta0,
            random_seed,
            out,
        } => {
            let (c, scenario) = load_campaign(&campaign)?;
            let n_s = c
                .pf_known
                .first()
                .map(|pf| pf.n_s())
                .ok_or_else(|| CliError::usage("campaign is empty"))?;
            let theta = match theta0.as_str() {
                "truth" => {
                    let sc = scenario.ok_or_else(|| {
                        CliError::usage("theta0=truth needs a scenario embedded in the campaign")
                    })?;
                    DutParameterization::from_matrix(&sc.s_dut_true).theta
                }
                "random" => {
                    let m = random_passive_reciprocal(n_s, random_seed, 0.9)?;
                    DutParameterization::from_matrix(&m).theta
                }
                other => {
                    return Err(CliError::usage(format!(
                        "theta0 must be `truth` or `random`, got `{other}`"
                    )));
                }
            };
            let report = jacobian_rank_at(&theta, &c)?;
            let mut csv = String::from("m,p,d,tx_rx,effective_rank,k,singular_value\n");
            for (k, sv) in report.singular_values.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    report.m, report.p, report.d, report.tx_rx_label, report.effective_rank, k, sv
                ));
            }
            write_file(&out, &csv)?;
            println!("effective rank: {}", report.effective_rank);
            Ok(())
        }
        Command::Sweep {
            scenario,
            p_list,
            splits,
            seeds,
            jobs,
            with_estimate,
            max_choices,
            preset,
            out,
            aggregate_out,
        } => {
            let sc = load_scenario(&scenario)?;
            let (p_values, split_values, seed_values) = match preset.as_deref() {
                Some("paper-desk") => {
                    if sc.n_s() != 4 || sc.n_a() != 8 {
                        return Err(CliError::usage(
                            "preset paper-desk needs a scenario with n_s=4 and n_a=8",
                        ));
                    }
                    (
                        (1..=30).collect::<Vec<_>>(),
                        vec![(1, 1), (2, 2), (3, 3), (4, 4)],
                        (0..5u64).collect::<Vec<_>>(),
                    )
                }
                Some(other) => {
                    return Err(CliError::usage(format!("unknown preset `{other}`")));
                }
                None => (
                    parse_index_list(&p_list, "p_list")?,
                    parse_splits(&splits)?,
                    parse_seed_list(&seeds)?,
                ),
            };
            let mut settings = SweepSettings {
                with_estimate,
                estimator: config.estimator_settings(),
                ..Default::default()
            };
            if let Some(v) = max_choices {
                settings.max_choices = v;
            }
            let mut builder = rayon::ThreadPoolBuilder::new();
            if jobs > 0 {
                builder = builder.num_threads(jobs);
            }
            let pool = builder
                .build()
                .map_err(|e| CliError::usage(format!("cannot build thread pool: {e}")))?;
            let result = pool.install(|| {
                sweep(&sc, &p_values, &split_values, &seed_values, &settings, &tol)
            })?;
            write_file(&out, &result.rows_csv())?;
            if let Some(agg_path) = aggregate_out {
                write_file(&agg_path, &result.aggregate_csv())?;
            }
            for f in &result.failures {
                eprintln!("sweep cell failed: {f}");
            }
            println!(
                "sweep complete: {} rows, {} failures -> {}",
                result.rows.len(),
                result.failures.len(),
                out.display()
            );
            Ok(())
        }
        Command::Count { n_s } => {
            if n_s == 0 {
                return Err(CliError::usage("n_s must be positive"));
            }
            let step1 = count_step1_configs(n_s)?;
            let step2 = count_step2_configs(n_s)?;
            let verified = if n_s <= 6 {
                let e1 = enumerate_configs(n_s, Stage::Step1, &tol)?.len() as u128;
                let e2 = enumerate_configs(n_s, Stage::Step2, &tol)?.len() as u128;
                if e1 == step1 && e2 == step2 {
                    "yes"
                } else {
                    return Err(CliError::from(Error::InvalidArgument(format!(
                        "count mismatch: closed form {step1}/{step2}, enumeration {e1}/{e2}"
                    ))));
                }
            } else {
                "skipped"
            };
            println!("step1={step1} step2={step2} verified={verified}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.code == 2 {
                eprintln!("run `deembed --help` for usage");
            }
            ExitCode::from(e.code)
        }
    }
}
