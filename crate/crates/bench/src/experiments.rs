//! Cell expansion and execution.

use std::path::{Path, PathBuf};

use entropic_core::envs::{
    bachelier_call_price, gridworld_shifted, gridworld_tabularize, probe_states, rmse_vs_analytic, AnalyticValue,
    MarketState, TabularGrid, TradingEnv, TradingRewardSpec,
};
use entropic_core::mdp::{entropic_policy_evaluation, FiniteMdp, TabularPolicy};
use entropic_core::nn::{train_actor_critic, Mlp};
use entropic_core::tabular::{entropic_q_learning, TabularConfig};
use entropic_core::{Error as CoreError, LossKind, RiskAversion};
use rayon::prelude::*;

use crate::checks;
use crate::config::{Experiment, ExperimentConfig};
use crate::records::{self, Row};
use crate::summary::{self, SummaryRow};
use crate::BenchError;

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub fail_fast: bool,
    /// Worker threads; 0 lets rayon decide.
    pub parallel: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { fail_fast: false, parallel: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
    /// Check rows (`pass`, `<part>_pass`) that did not pass.
    pub failed_checks: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Job {
    Learn { kind: LossKind, alpha: f64, seed: u64 },
    Axioms { seed: u64 },
    TdSuite { mdp_seed: u64, alpha: f64 },
    SpBias { seed: u64 },
    LossGrad { kind: LossKind, seed: u64 },
    NetGrad { seed: u64 },
}

impl Job {
    fn label(&self) -> String {
        match *self {
            Job::Learn { kind, alpha, seed } => format!("{kind}_a{alpha}_s{seed}"),
            Job::Axioms { seed } => format!("ce_axioms_s{seed}"),
            Job::TdSuite { mdp_seed, alpha } => format!("td_suite_a{alpha}_m{mdp_seed}"),
            Job::SpBias { seed } => format!("sp_bias_s{seed}"),
            Job::LossGrad { kind, seed } => format!("grad_{kind}_s{seed}"),
            Job::NetGrad { seed } => format!("grad_network_s{seed}"),
        }
    }
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let first = cfg.seeds[0];
    match cfg.experiment {
        Experiment::OracleSuite => {
            let mut out = vec![Job::Axioms { seed: first }];
            for &alpha in &cfg.alphas {
                out.extend(cfg.seeds.iter().map(|&mdp_seed| Job::TdSuite { mdp_seed, alpha }));
            }
            out.push(Job::SpBias { seed: first });
            out
        }
        Experiment::GradCheck => {
            let mut out: Vec<Job> = cfg.losses.iter().map(|&kind| Job::LossGrad { kind, seed: first }).collect();
            out.push(Job::NetGrad { seed: first });
            out
        }
        _ => {
            let mut out = Vec::new();
            for &kind in &cfg.losses {
                for &alpha in &cfg.alphas {
                    out.extend(cfg.seeds.iter().map(|&seed| Job::Learn { kind, alpha, seed }));
                }
            }
            out
        }
    }
}

/// Tabular grids shared by every grid cell: training and shifted spawn rates.
struct GridPair {
    train: TabularGrid,
    shifted: TabularGrid,
}

fn prepare_grid(cfg: &ExperimentConfig) -> Result<GridPair, BenchError> {
    let train = gridworld_tabularize(&cfg.grid)?;
    let shifted = gridworld_tabularize(&gridworld_shifted(&cfg.grid, cfg.grid_shift)?)?;
    if train.keys != shifted.keys {
        return Err(BenchError::Other("shifted grid does not share the training grid's state indexing".into()));
    }
    Ok(GridPair { train, shifted })
}

/// Runs every cell of `cfg`, writes `<output>/cells/<name>/*.csv`, the merged
/// `<output>/<name>.records.csv` and `<output>/<name>.summary.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunReport, BenchError> {
    cfg.validate()?;
    let grid = match cfg.experiment {
        Experiment::GridTabular => Some(prepare_grid(cfg)?),
        _ => None,
    };
    let cell_dir = cfg.output.join("cells").join(&cfg.name);
    if cell_dir.exists() {
        std::fs::remove_dir_all(&cell_dir).map_err(|e| BenchError::io(&cell_dir, e))?;
    }
    std::fs::create_dir_all(&cell_dir).map_err(|e| BenchError::io(&cell_dir, e))?;

    let jobs = jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel)
        .build()
        .map_err(|e| BenchError::Other(format!("thread pool: {e}")))?;
    let run_one = |job: &Job| -> Result<Vec<Row>, BenchError> {
        let rows = run_job(cfg, *job, grid.as_ref(), opts.fail_fast)?;
        records::write_rows_to(&cell_dir.join(format!("{}.csv", job.label())), &rows)?;
        eprintln!("{}: {} done", cfg.name, job.label());
        Ok(rows)
    };
    let results: Vec<Result<Vec<Row>, BenchError>> = pool.install(|| {
        if opts.fail_fast {
            // stop scheduling new cells once one has failed
            let failed = std::sync::atomic::AtomicBool::new(false);
            jobs.par_iter()
                .map(|j| {
                    if failed.load(std::sync::atomic::Ordering::Relaxed) {
                        return Ok(Vec::new());
                    }
                    let r = run_one(j);
                    if r.is_err() {
                        failed.store(true, std::sync::atomic::Ordering::Relaxed);
                    }
                    r
                })
                .collect()
        } else {
            jobs.par_iter().map(run_one).collect()
        }
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }

    let records_path = cfg.output.join(format!("{}.records.csv", cfg.name));
    records::write_rows_to(&records_path, &rows)?;
    let summary = summary::summarize(&cfg.name, &rows);
    let summary_path = cfg.output.join(format!("{}.summary.csv", cfg.name));
    let f = std::fs::File::create(&summary_path).map_err(|e| BenchError::io(&summary_path, e))?;
    summary::write_summary(std::io::BufWriter::new(f), &summary)?;
    let failed_checks = rows.iter().filter(|r| is_check(&r.metric_name) && r.metric_value != 1.0).count();
    Ok(RunReport { records_path, summary_path, rows, summary, failed_checks })
}

fn is_check(metric: &str) -> bool {
    metric == "pass" || metric.ends_with("_pass")
}

fn run_job(cfg: &ExperimentConfig, job: Job, grid: Option<&GridPair>, fail_fast: bool) -> Result<Vec<Row>, BenchError> {
    match job {
        Job::Learn { kind, alpha, seed } => {
            let res = match cfg.experiment {
                Experiment::GridTabular => grid_cell(cfg, grid.expect("grid prepared"), kind, alpha, seed, fail_fast),
                _ => trading_cell(cfg, kind, alpha, seed, fail_fast),
            };
            res.map_err(|e| match e {
                BenchError::Core(source @ CoreError::Diverged { .. }) => BenchError::Diverged { cell: job.label(), source },
                other => other,
            })
        }
        Job::Axioms { seed } => checks::ce_axioms(seed, 200),
        Job::TdSuite { mdp_seed, alpha } => checks::td_convergence(mdp_seed, alpha, cfg.tabular_episodes, cfg.schedule),
        Job::SpBias { seed } => checks::softplus_bias(seed, cfg.tabular_episodes, cfg.schedule),
        Job::LossGrad { kind, seed } => checks::loss_gradients(kind, &cfg.alphas, seed),
        Job::NetGrad { seed } => checks::network_gradients(&cfg.alphas, seed),
    }
}

const TRADING_METRICS: [&str; 5] = ["rmse", "action_rmse", "action_mean", "v_initial", "action_initial"];
const HEDGING_METRICS: [&str; 3] = ["v_initial", "price", "price_rel_error"];

fn trading_cell(cfg: &ExperimentConfig, kind: LossKind, alpha: f64, seed: u64, fail_fast: bool) -> Result<Vec<Row>, BenchError> {
    let params = cfg.market;
    let (spec, analytic) = match cfg.experiment {
        Experiment::GaussianTrading => (TradingRewardSpec::PureTrading, Some(AnalyticValue::Gaussian)),
        Experiment::QuadraticTrading => (TradingRewardSpec::QuadraticTerminal, Some(AnalyticValue::Quadratic)),
        _ => (TradingRewardSpec::CallHedging { strike: cfg.strike }, None),
    };
    let env = TradingEnv::new(params, spec);
    let ra = RiskAversion::new(alpha)?;
    let mut tc = cfg.train_config(alpha, kind);
    tc.fail_fast = fail_fast;
    let probes = probe_states(&params);
    let x0 = env.feature_vec(&MarketState::initial(&params));
    let reference = if analytic.is_none() { bachelier_call_price(&params)? } else { f64::NAN };
    let eval = |net: &Mlp, s: &MarketState| net.forward(&env.feature_vec(s)).unwrap_or(f64::NAN);

    let mut probe = |value: &Mlp, policy: Option<&Mlp>| -> Vec<(String, f64)> {
        let v0 = value.forward(&x0).unwrap_or(f64::NAN);
        let Some(analytic) = analytic else {
            let price = -v0;
            return vec![
                ("v_initial".into(), v0),
                ("price".into(), price),
                ("price_rel_error".into(), (price - reference).abs() / reference),
            ];
        };
        let rmse = rmse_vs_analytic(|s| eval(value, s), analytic, &params, ra, &probes).unwrap_or(f64::NAN);
        let policy = policy.expect("actor-critic has a policy");
        let (mut sq, mut sum) = (0.0, 0.0);
        for s in &probes {
            let a = eval(policy, s);
            let target = analytic.action(s, &params, ra).unwrap_or(f64::NAN);
            sq += (a - target).powi(2);
            sum += a;
        }
        let n = probes.len() as f64;
        vec![
            ("rmse".into(), rmse),
            ("action_rmse".into(), (sq / n).sqrt()),
            ("action_mean".into(), sum / n),
            ("v_initial".into(), v0),
            ("action_initial".into(), policy.forward(&x0).unwrap_or(f64::NAN)),
        ]
    };
    let out = train_actor_critic(&env, &tc, seed, Some(&mut probe))?;

    let end = tc.total_iters as u64;
    let mut rows: Vec<Row> = out.history.into_iter().map(Row::from).collect();
    if out.stopped_at.is_some() {
        let names: &[&str] = if analytic.is_some() { &TRADING_METRICS } else { &HEDGING_METRICS };
        rows.extend(names.iter().map(|m| Row::new(seed, end, kind.as_str(), alpha, *m, f64::NAN)));
    }
    let nonfinite = if out.first_nonfinite.is_some() { 1.0 } else { 0.0 };
    rows.push(Row::new(seed, end, kind.as_str(), alpha, "nonfinite_loss", nonfinite));
    Ok(rows)
}

/// Expected undiscounted return of `actions` from the initial state.
fn mean_return(mdp: &FiniteMdp, actions: &[usize]) -> Result<f64, BenchError> {
    let pi = TabularPolicy::deterministic(mdp, actions)?;
    Ok(entropic_policy_evaluation(mdp, &pi, RiskAversion::neutral())?[mdp.initial_state()])
}

fn grid_cell(cfg: &ExperimentConfig, grid: &GridPair, kind: LossKind, alpha: f64, seed: u64, fail_fast: bool) -> Result<Vec<Row>, BenchError> {
    let len = cfg.grid.episode_length as u64;
    let episodes = cfg.grid_steps.div_ceil(len) as usize;
    let mut tcfg = TabularConfig::new(RiskAversion::new(alpha)?, kind, episodes, seed);
    tcfg.schedule = cfg.schedule;
    tcfg.record_every = (episodes / 20).max(1);
    let k = kind.as_str();
    let run = match entropic_q_learning(&grid.train.mdp, &tcfg, cfg.grid_epsilon) {
        Ok(run) => run,
        Err(e @ CoreError::Diverged { .. }) if !fail_fast => {
            let end = episodes as u64 * len;
            eprintln!("{k} alpha={alpha} seed={seed}: {e}");
            return Ok(["return_train", "return_shift", "degradation", "q_finite"]
                .iter()
                .map(|m| Row::new(seed, end, k, alpha, *m, if *m == "q_finite" { 0.0 } else { f64::NAN }))
                .collect());
        }
        Err(e) => return Err(e.into()),
    };
    let mdp = &grid.train.mdp;
    let finite = (0..mdp.num_states()).all(|s| {
        if mdp.is_terminal(s) {
            run.q[s].iter().all(|q| q.is_finite())
        } else {
            mdp.available_actions(s).all(|a| run.q[s][a].is_finite())
        }
    });
    let train = mean_return(mdp, &run.greedy_actions)?;
    let shift = mean_return(&grid.shifted.mdp, &run.greedy_actions)?;
    let end = run.steps;
    let mut rows: Vec<Row> = run.history.into_iter().map(Row::from).collect();
    rows.extend([
        Row::new(seed, end, k, alpha, "return_train", train),
        Row::new(seed, end, k, alpha, "return_shift", shift),
        Row::new(seed, end, k, alpha, "degradation", (train - shift) / train.abs()),
        Row::new(seed, end, k, alpha, "q_finite", if finite { 1.0 } else { 0.0 }),
        Row::new(seed, end, k, alpha, "steps", run.steps as f64),
    ]);
    Ok(rows)
}

/// Reads a records file and returns its summary, named after the file.
pub fn summarize_file(path: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    let rows = records::read_rows_from(path)?;
    Ok(summary::summarize(&summary::experiment_name(path), &rows))
}
