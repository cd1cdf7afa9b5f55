//! The six experiment kinds. Each returns its output files as bytes plus a
//! JSON summary, so that callers decide where things are written.

use std::time::Instant;

use deepfact_core::flow::{conserved_quantity, eigen_state_of_alpha_m, eigen_state_of_factor};
use deepfact_core::graph::{CouplingVerdict, StructuralRule};
use deepfact_core::metrics::{reconstruction_error, summarize, ErrorScope};
use deepfact_core::{
    build_init, check_connectivity, detect_decoupling, integrate_gradient_flow, integrate_reduced_eigen, predict_limit,
    run_gradient_descent, BlockSpec, DMatrix, FactorChain, GdConfig, InitScheme, IntegratorConfig, Method,
    ObservationSet, Sharpness, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, Kind, MethodKind, ObsMode, SchemeKind, TruthKind};
use crate::data::{block_spec, derive_seed, generate_ground_truth, sample_observations, shuffled_positions};
use crate::error::{CliError, CliResult};

/// Product scales at or below this are simulated with the reduced
/// eigenvalue system instead of the full flow.
pub const REDUCED_ROUTE_THRESHOLD: f64 = 1e-10;

/// `(file name, contents)` pairs.
type Files = Vec<(String, Vec<u8>)>;

pub struct ExperimentOutput {
    pub files: Files,
    pub summary: Value,
}

pub fn run(exp: &Experiment) -> CliResult<ExperimentOutput> {
    let start = Instant::now();
    let (files, mut summary) = match exp.kind {
        Kind::Simulate => simulate(exp)?,
        Kind::Theory => theory(exp)?,
        Kind::Coupling => coupling(exp)?,
        Kind::Plasticity => plasticity(exp)?,
        Kind::Sweep => sweep(exp)?,
        Kind::Metrics => metrics(exp)?,
    };
    if let Value::Object(map) = &mut summary {
        map.insert("config".into(), serde_json::to_value(exp)?);
        map.insert("wall_clock_seconds".into(), json!(start.elapsed().as_secs_f64()));
    }
    Ok(ExperimentOutput { files, summary })
}

/// Shortest round-trip text, in exponent form for very small or large values.
fn fmt(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

fn m_sort_key(m: Sharpness) -> f64 {
    match m {
        Sharpness::Finite(v) => v,
        Sharpness::Infinite => f64::INFINITY,
    }
}

/// `(depth, m, alpha)` grid sorted for output.
fn grid(exp: &Experiment) -> Vec<(usize, Sharpness, f64)> {
    let mut g = Vec::new();
    for &depth in &exp.depths {
        for &m in &exp.init.ms {
            for &alpha in &exp.init.alphas {
                g.push((depth, m, alpha));
            }
        }
    }
    g.sort_by(|a, b| a.0.cmp(&b.0).then(m_sort_key(a.1).total_cmp(&m_sort_key(b.1))).then(a.2.total_cmp(&b.2)));
    g.dedup();
    g
}

fn scheme_for(exp: &Experiment, depth: usize, m: Sharpness, alpha: f64, seed: u64) -> CliResult<InitScheme> {
    let a = exp.init.factor_alpha(alpha, depth);
    Ok(match exp.init.scheme {
        SchemeKind::AlphaM => InitScheme::AlphaM { alpha: a, m },
        SchemeKind::Identity => InitScheme::Identity { alpha: a },
        SchemeKind::AllOnes => InitScheme::AllOnes { alpha: a },
        SchemeKind::Gaussian => InitScheme::Gaussian {
            std: exp.init.std_for(depth).ok_or_else(|| CliError::Validation("init.std is required".into()))?,
            seed,
        },
    })
}

fn truth_and_obs(exp: &Experiment, trial: u64) -> CliResult<(DMatrix<f64>, ObservationSet)> {
    let truth = generate_ground_truth(exp.truth.kind, exp.dim, derive_seed(exp.truth.seed, trial));
    let obs =
        sample_observations(&truth, exp.obs.mode, exp.obs.count, exp.obs.block_size, derive_seed(exp.obs.seed, trial))?;
    Ok((truth, obs))
}

/// Trains `chain` on `obs` with the configured method.
pub fn train(exp: &Experiment, chain: &FactorChain, obs: &ObservationSet, keep_states: bool) -> CliResult<Trajectory> {
    let spec = &exp.integrator;
    let traj = match spec.method {
        MethodKind::Gd => {
            let eta = spec.step.ok_or_else(|| CliError::Validation("gd needs integrator.step".into()))?;
            let cfg = GdConfig {
                step_size: eta,
                max_iters: (spec.t_max / eta).ceil() as usize,
                stop_loss: spec.stop_loss,
                record_every: spec.record_every,
                keep_states,
            };
            run_gradient_descent(chain, obs, &cfg)?
        }
        MethodKind::Rk4 | MethodKind::Euler => {
            let cfg = IntegratorConfig {
                method: if spec.method == MethodKind::Rk4 { Method::Rk4 } else { Method::Euler },
                step: spec.step,
                t_max: spec.t_max,
                stop_loss: spec.stop_loss,
                record_every: spec.record_every,
                keep_states,
                ..Default::default()
            };
            integrate_gradient_flow(chain, obs, &cfg)?
        }
    };
    Ok(traj)
}

/// Block layout when the run stays in the block-structured family.
fn family_spec(exp: &Experiment) -> Option<BlockSpec> {
    let structured = matches!(exp.init.scheme, SchemeKind::AlphaM | SchemeKind::Identity);
    match (structured, exp.obs.mode, exp.truth.kind) {
        (true, ObsMode::Block, TruthKind::BlockConstant { target }) => {
            block_spec(exp.dim, exp.obs.block_size.unwrap_or(1), target).ok()
        }
        _ => None,
    }
}

#[derive(Serialize)]
struct TrialSummary {
    trial: usize,
    final_loss: f64,
    t_final: f64,
    steps: usize,
    converged: bool,
    singular_values: Vec<f64>,
    stable_rank: f64,
    effective_rank: f64,
    reconstruction_error: Option<f64>,
}

fn simulate(exp: &Experiment) -> CliResult<(Files, Value)> {
    let (depth, m, alpha) = grid(exp)[0];
    let family = family_spec(exp).filter(|_| depth >= 2);
    let runs: Vec<CliResult<(Vec<Vec<String>>, TrialSummary)>> = (0..exp.trials)
        .into_par_iter()
        .map(|k| {
            let trial = k + 1;
            let (truth, obs) = truth_and_obs(exp, k as u64)?;
            let chain =
                build_init(&scheme_for(exp, depth, m, alpha, derive_seed(exp.seed, k as u64))?, depth, exp.dim)?;
            let mut traj = train(exp, &chain, &obs, family.is_some())?;
            let q0 = match &family {
                Some(spec) => Some(conserved_quantity(&eigen_state_of_factor(&chain.factors()[0], spec)?, depth)),
                None => None,
            };
            let mut rows = Vec::with_capacity(traj.samples.len());
            for s in &mut traj.samples {
                let drift = match (&family, q0, s.state.take()) {
                    (Some(spec), Some(q0), Some(state)) => {
                        let q = conserved_quantity(&eigen_state_of_factor(&state.factors()[0], spec)?, depth);
                        let dq = (q - q0).abs();
                        if q0 != 0.0 {
                            dq / q0.abs()
                        } else {
                            dq
                        }
                    }
                    _ => f64::NAN,
                };
                let mut row = vec![trial.to_string(), fmt(s.t), fmt(s.loss)];
                row.extend(s.singular_values.iter().map(|&v| fmt(v)));
                row.extend([fmt(s.stable_rank), fmt(s.effective_rank), fmt(s.balance_drift), fmt(drift)]);
                rows.push(row);
            }
            let last = traj.final_sample();
            let summary = TrialSummary {
                trial,
                final_loss: last.loss,
                t_final: last.t,
                steps: traj.steps,
                converged: traj.converged(),
                singular_values: last.singular_values.clone(),
                stable_rank: last.stable_rank,
                effective_rank: last.effective_rank,
                reconstruction_error: reconstruction_error(&traj.final_chain.product(), &truth, ErrorScope::All).ok(),
            };
            Ok((rows, summary))
        })
        .collect();
    let mut header: Vec<String> = ["trial", "t", "loss"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=exp.dim).map(|i| format!("sigma_{i}")));
    header.extend(["stable_rank", "effective_rank", "balance_drift", "conserved_drift"].iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for r in runs {
        let (r, s) = r?;
        rows.extend(r);
        trials.push(s);
    }
    let all_converged = trials.iter().all(|t| t.converged);
    Ok((
        vec![("trajectory.csv".into(), csv_bytes(&header, &rows)?)],
        json!({ "kind": "simulate", "trials": trials, "all_converged": all_converged }),
    ))
}

fn theory(exp: &Experiment) -> CliResult<(Files, Value)> {
    let TruthKind::BlockConstant { target } = exp.truth.kind else {
        return Err(CliError::Validation("theory needs a block_constant ground truth".into()));
    };
    let spec = block_spec(exp.dim, exp.obs.block_size.unwrap_or(1), target)?;
    let header: Vec<String> = ["depth", "m", "alpha", "branch", "sigma1", "sigma_secondary", "srank_limit"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (depth, m, alpha) in grid(exp) {
        let lim = predict_limit(&spec, exp.init.factor_alpha(alpha, depth), m, depth)?;
        rows.push(vec![
            depth.to_string(),
            m.to_string(),
            fmt(alpha),
            lim.branch.as_str().to_string(),
            fmt(lim.sigma1),
            fmt(lim.sigma_secondary),
            fmt(lim.stable_rank()),
        ]);
        entries.push(json!({
            "depth": depth, "m": m.to_string(), "alpha": alpha,
            "branch": lim.branch.as_str(), "singular_values": lim.singular_values(),
            "srank_limit": lim.stable_rank(),
        }));
    }
    Ok((vec![("theory.csv".into(), csv_bytes(&header, &rows)?)], json!({ "kind": "theory", "limits": entries })))
}

fn verdict_name(v: CouplingVerdict) -> &'static str {
    match v {
        CouplingVerdict::Decoupled => "decoupled",
        CouplingVerdict::Coupled => "coupled",
        CouplingVerdict::NumericallyDecoupledAtSampledTimes => "numerically_decoupled_at_sampled_times",
    }
}

fn rule_name(r: Option<StructuralRule>) -> &'static str {
    match r {
        Some(StructuralRule::DepthOne) => "depth_one",
        Some(StructuralRule::ZeroState) => "zero_state",
        Some(StructuralRule::BipartiteComponents) => "bipartite_components",
        Some(StructuralRule::BlockDiagonalSupport) => "block_diagonal_support",
        Some(StructuralRule::PositiveFactors) => "positive_factors",
        None => "numeric",
    }
}

fn coupling(exp: &Experiment) -> CliResult<(Files, Value)> {
    let (_, obs) = truth_and_obs(exp, 0)?;
    let header: Vec<String> =
        ["depth", "m", "alpha", "verdict", "rule", "parts"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (depth, m, alpha) in grid(exp) {
        let chain = build_init(&scheme_for(exp, depth, m, alpha, derive_seed(exp.seed, 0))?, depth, exp.dim)?;
        let rep = detect_decoupling(&chain, &obs, &[])?;
        rows.push(vec![
            depth.to_string(),
            m.to_string(),
            fmt(alpha),
            verdict_name(rep.verdict).into(),
            rule_name(rep.rule).into(),
            rep.partition.len().to_string(),
        ]);
        let parts: Vec<Vec<[usize; 2]>> = rep
            .partition
            .iter()
            .map(|p| p.iter().map(|&k| [obs.entries()[k].row + 1, obs.entries()[k].col + 1]).collect())
            .collect();
        entries.push(json!({
            "depth": depth, "m": m.to_string(), "alpha": alpha,
            "verdict": verdict_name(rep.verdict), "rule": rule_name(rep.rule), "partition": parts,
        }));
    }
    let conn = check_connectivity(&obs)?;
    Ok((
        vec![("coupling.csv".into(), csv_bytes(&header, &rows)?)],
        json!({ "kind": "coupling", "observation_graph_connected": conn.connected,
                "observation_components": conn.components.len(), "verdicts": entries }),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResult {
    pub trial: usize,
    pub depth: usize,
    pub phase: &'static str,
    pub loss: f64,
    pub effective_rank: f64,
    pub stable_rank: f64,
    pub reconstruction_error: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Pre-training on the first `pre_count` entries, then warm-started and
/// freshly initialized training on the first `count` entries.
pub fn plasticity_trial(exp: &Experiment, k: usize, depth: usize) -> CliResult<Vec<PhaseResult>> {
    let truth = generate_ground_truth(exp.truth.kind, exp.dim, derive_seed(exp.truth.seed, k as u64));
    let order = shuffled_positions(exp.dim, derive_seed(exp.obs.seed, k as u64));
    let count = exp.obs.count.unwrap_or(order.len());
    let pre_count = exp.obs.pre_count.unwrap_or(count);
    let pre = ObservationSet::from_positions(&truth, &order[..pre_count])?;
    let post = ObservationSet::from_positions(&truth, &order[..count])?;
    let (m, alpha) = (exp.init.ms[0], exp.init.alphas[0]);
    let tag = (k as u64) << 8 | depth as u64;
    let pre_init = build_init(&scheme_for(exp, depth, m, alpha, derive_seed(exp.seed, 2 * tag))?, depth, exp.dim)?;
    let cold_init = build_init(&scheme_for(exp, depth, m, alpha, derive_seed(exp.seed, 2 * tag + 1))?, depth, exp.dim)?;

    let summarize_phase = |phase: &'static str, traj: &Trajectory| {
        let product = traj.final_chain.product();
        let s = summarize(&product);
        PhaseResult {
            trial: k + 1,
            depth,
            phase,
            loss: traj.final_sample().loss,
            effective_rank: s.effective_rank,
            stable_rank: s.stable_rank,
            reconstruction_error: reconstruction_error(&product, &truth, ErrorScope::All).unwrap_or(f64::NAN),
            converged: traj.converged(),
            steps: traj.steps,
        }
    };
    let pre_traj = train(exp, &pre_init, &pre, false)?;
    let warm = train(exp, &pre_traj.final_chain, &post, false)?;
    let cold = train(exp, &cold_init, &post, false)?;
    Ok(vec![summarize_phase("pre", &pre_traj), summarize_phase("warm", &warm), summarize_phase("cold", &cold)])
}

fn plasticity(exp: &Experiment) -> CliResult<(Files, Value)> {
    let jobs: Vec<(usize, usize)> = (0..exp.trials).flat_map(|k| exp.depths.iter().map(move |&l| (k, l))).collect();
    let results: Vec<CliResult<Vec<PhaseResult>>> =
        jobs.par_iter().map(|&(k, depth)| plasticity_trial(exp, k, depth)).collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    all.sort_by_key(|r| (r.depth, r.trial));
    let header: Vec<String> = [
        "trial",
        "depth",
        "phase",
        "loss",
        "effective_rank",
        "stable_rank",
        "reconstruction_error",
        "converged",
        "steps",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = all
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.depth.to_string(),
                r.phase.into(),
                fmt(r.loss),
                fmt(r.effective_rank),
                fmt(r.stable_rank),
                fmt(r.reconstruction_error),
                r.converged.to_string(),
                r.steps.to_string(),
            ]
        })
        .collect();
    let mut depths = exp.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let per_depth: Vec<Value> = depths
        .iter()
        .map(|&l| {
            let mean = |phase: &str| {
                let v: Vec<f64> =
                    all.iter().filter(|r| r.depth == l && r.phase == phase).map(|r| r.effective_rank).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (pre, warm, cold) = (mean("pre"), mean("warm"), mean("cold"));
            json!({ "depth": l, "mean_effective_rank": { "pre": pre, "warm": warm, "cold": cold },
                    "warm_minus_cold": warm - cold })
        })
        .collect();
    let all_converged = all.iter().all(|r| r.converged);
    Ok((
        vec![("plasticity.csv".into(), csv_bytes(&header, &rows)?)],
        json!({ "kind": "plasticity", "depths": per_depth, "all_converged": all_converged }),
    ))
}

/// Simulated limit for one grid point of a sweep: `(sigma1, sigma_secondary,
/// converged, route)`.
pub fn simulate_block_limit(
    exp: &Experiment,
    spec: &BlockSpec,
    depth: usize,
    m: Sharpness,
    alpha: f64,
) -> CliResult<(f64, f64, bool, &'static str)> {
    let a = exp.init.factor_alpha(alpha, depth);
    let l = depth as i32;
    if a.powi(l) <= REDUCED_ROUTE_THRESHOLD && exp.integrator.method != MethodKind::Gd {
        let cfg = IntegratorConfig {
            t_max: exp.integrator.t_max,
            stop_loss: exp.integrator.stop_loss,
            record_every: 0,
            ..Default::default()
        };
        let traj = integrate_reduced_eigen(spec, depth, eigen_state_of_alpha_m(a, m, spec), &cfg)?;
        let st = traj.final_state();
        return Ok((st.l1.powi(l), st.l2.powi(l), traj.outcome == deepfact_core::Outcome::Converged, "reduced"));
    }
    let obs = deepfact_core::build_observation_block(spec)?;
    let chain = build_init(&InitScheme::AlphaM { alpha: a, m }, depth, spec.dim())?;
    let traj = train(exp, &chain, &obs, false)?;
    let st = eigen_state_of_factor(&traj.final_chain.factors()[0], spec)?;
    Ok((st.l1.powi(l), st.l2.powi(l), traj.converged(), "full"))
}

fn sweep(exp: &Experiment) -> CliResult<(Files, Value)> {
    let TruthKind::BlockConstant { target } = exp.truth.kind else {
        return Err(CliError::Validation("sweep needs a block_constant ground truth".into()));
    };
    if exp.init.scheme != SchemeKind::AlphaM {
        return Err(CliError::Validation("sweep uses the alpha_m initialization".into()));
    }
    let spec = block_spec(exp.dim, exp.obs.block_size.unwrap_or(1), target)?;
    let points = grid(exp);
    let results: Vec<CliResult<Vec<String>>> = points
        .par_iter()
        .map(|&(depth, m, alpha)| {
            let lim = predict_limit(&spec, exp.init.factor_alpha(alpha, depth), m, depth)?;
            let (s1, si, converged, route) = simulate_block_limit(exp, &spec, depth, m, alpha)?;
            let err =
                ((s1 - lim.sigma1).abs() / lim.sigma1).max((si - lim.sigma_secondary).abs() / lim.sigma_secondary);
            let srank = {
                let top = s1.max(si);
                (s1 / top).powi(2) + (spec.blocks as f64 - 1.0) * (si / top).powi(2)
            };
            Ok(vec![
                depth.to_string(),
                m.to_string(),
                fmt(alpha),
                route.into(),
                fmt(s1),
                fmt(si),
                fmt(lim.sigma1),
                fmt(lim.sigma_secondary),
                fmt(err),
                fmt(srank),
                converged.to_string(),
            ])
        })
        .collect();
    let rows: Vec<Vec<String>> = results.into_iter().collect::<CliResult<_>>()?;
    let header: Vec<String> = [
        "depth",
        "m",
        "alpha",
        "route",
        "sigma1",
        "sigma_secondary",
        "predicted_sigma1",
        "predicted_sigma_secondary",
        "relative_error",
        "stable_rank",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let worst = rows.iter().map(|r| r[8].parse::<f64>().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    let all_converged = rows.iter().all(|r| r[10] == "true");
    Ok((
        vec![("sweep.csv".into(), csv_bytes(&header, &rows)?)],
        json!({ "kind": "sweep", "points": rows.len(), "worst_relative_error": worst, "all_converged": all_converged }),
    ))
}

fn metrics(exp: &Experiment) -> CliResult<(Files, Value)> {
    let (truth, obs) = truth_and_obs(exp, 0)?;
    let s = summarize(&truth);
    let conn = check_connectivity(&obs)?;
    let components: Vec<Value> = conn
        .components
        .iter()
        .map(|c| {
            json!({
                "rows": c.rows.iter().map(|r| r + 1).collect::<Vec<_>>(),
                "cols": c.cols.iter().map(|c| c + 1).collect::<Vec<_>>(),
                "observations": c.observations.len(),
            })
        })
        .collect();
    Ok((
        Vec::new(),
        json!({
            "kind": "metrics",
            "ground_truth": { "singular_values": s.singular_values, "stable_rank": s.stable_rank,
                              "effective_rank": s.effective_rank },
            "observations": obs.len(),
            "connected": conn.connected,
            "components": components,
        }),
    ))
}
