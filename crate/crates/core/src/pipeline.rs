//! The `plan`, `simulate` and `report` stages and their artifacts.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, HighlightedPath, PathTrials, PlanSummary, Selection};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::euler::{self, Candidate};
use crate::map::EnvironmentMap;
use crate::montecarlo::{self, Trial};
use crate::planner::{self, PathScore, Ranking};
use crate::roadmap::{self, ForwardBias, RoadmapGraph};
use crate::seed::derive_seed;
use crate::svg;
use crate::trajectory::FlightPlan;

const SAMPLING_STREAM: u64 = 0x5A3;

/// Everything the planning stage computes.
#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub knn_graph: RoadmapGraph,
    pub graph: RoadmapGraph,
    pub candidates: Vec<Candidate>,
    pub scores: Vec<PathScore>,
    pub ranking: Ranking,
    pub summary: PlanSummary,
}

impl PlanOutput {
    pub fn score_of(&self, circuit_index: usize) -> Option<&PathScore> {
        self.scores.iter().find(|s| s.circuit_index == circuit_index)
    }
}

fn highlighted(ranking: &Ranking) -> Vec<(Selection, usize)> {
    Selection::HIGHLIGHTED
        .iter()
        .filter_map(|sel| sel.resolve(ranking, ranking.order.len()).ok().map(|i| (*sel, i)))
        .collect()
}

/// Roadmap, candidates, scores and ranking for `cfg` on `map`.
pub fn plan(cfg: &RunConfig, map: &EnvironmentMap) -> Result<PlanOutput> {
    let model = cfg.belief_model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[SAMPLING_STREAM]));
    let nodes = roadmap::sample_nodes(map, cfg.nodes, ForwardBias(cfg.forward_bias), &mut rng)?;
    let knn_graph = roadmap::connect_knn(&nodes, cfg.knn, map)?;
    let graph = roadmap::eulerize(&knn_graph, map)?;
    let all = euler::generate_candidates(&graph, cfg.candidates, cfg.seed)?;
    let candidates = euler::filter_by_flight_time(&all, cfg.rho_s, cfg.kin.cruise);
    if candidates.is_empty() {
        return Err(Error::NoFeasibleCircuit { rho_s: cfg.rho_s });
    }
    let mut scores = planner::score_candidates(&candidates, &graph, map, &model)?;
    if let Some(delta) = cfg.delta_m2 {
        for s in &mut scores {
            planner::check_uncertainty_threshold(s, delta);
        }
    }
    let ranking = planner::score_and_select(&scores)?;
    let length = candidates[0].circuit.length;
    let summary = PlanSummary {
        seed: cfg.seed,
        node_count: graph.node_count(),
        edges_before_eulerization: knn_graph.distinct_edge_count(),
        edge_instances_after_eulerization: graph.edge_instance_count(),
        circuit_length_m: length,
        flight_time_s: length / cfg.kin.cruise,
        rho_s: cfg.rho_s,
        delta_m2: cfg.delta_m2,
        candidate_count: candidates.len(),
        distinct_circuits: candidates.iter().filter(|c| !c.is_duplicate()).count(),
        highlighted: highlighted(&ranking)
            .into_iter()
            .map(|(sel, i)| HighlightedPath::from_score(&sel.label(), &scores[i]))
            .collect(),
        ranking: ranking.clone(),
    };
    Ok(PlanOutput {
        knn_graph,
        graph,
        candidates,
        scores,
        ranking,
        summary,
    })
}

/// Run the planning stage and write its artifacts under `<out>/plan`.
pub fn cmd_plan(cfg: &RunConfig) -> Result<PlanOutput> {
    let map = cfg.load_map()?;
    let out = plan(cfg, &map)?;
    let dir = artifacts::plan_dir(&cfg.out);
    artifacts::write_file(&dir.join("graph.json"), &(out.graph.to_json_string() + "\n"))?;
    artifacts::write_file(
        &dir.join("candidates.json"),
        &(euler::candidates_to_json(&out.candidates, cfg.kin.cruise) + "\n"),
    )?;
    let lengths: Vec<f64> = out.candidates.iter().map(|c| c.circuit.length).collect();
    let dups: Vec<Option<usize>> = out.candidates.iter().map(|c| c.duplicate_of).collect();
    artifacts::write_file(
        &dir.join("scores.csv"),
        &artifacts::scores_csv(&out.scores, &lengths, cfg.kin.cruise, &dups),
    )?;
    artifacts::write_file(&dir.join("ranking.json"), &out.summary.to_json_string())?;
    for (sel, i) in highlighted(&out.ranking) {
        artifacts::write_file(
            &dir.join(format!("pec_{}.csv", sel.label())),
            &artifacts::pec_series_csv(&out.scores[i].pec_series),
        )?;
    }
    let totals: Vec<f64> = out.scores.iter().map(|s| s.total).collect();
    let marks = svg::Highlights {
        best: out.ranking.best,
        worst: out.ranking.worst,
        second_best: out.ranking.second_best,
        second_worst: out.ranking.second_worst,
    };
    artifacts::write_file(
        &dir.join("totals.svg"),
        &svg::candidate_totals_chart(&totals, &marks),
    )?;
    log::info!(
        "planned {} candidates over {} m; best {} ({:.3} m^2), worst {} ({:.3} m^2)",
        out.candidates.len(),
        out.summary.circuit_length_m,
        out.ranking.best,
        out.scores[out.ranking.best].total,
        out.ranking.worst,
        out.scores[out.ranking.worst].total
    );
    Ok(out)
}

/// Plan artifacts read back from disk.
pub struct LoadedPlan {
    pub graph: RoadmapGraph,
    pub candidates: Vec<Candidate>,
    pub summary: PlanSummary,
}

pub fn load_plan(out: &Path) -> Result<LoadedPlan> {
    let dir = artifacts::plan_dir(out);
    let corrupt = |path: &Path, e: Error| Error::MissingArtifact {
        path: path.to_path_buf(),
        message: format!("corrupted: {e}"),
    };
    let graph_path = dir.join("graph.json");
    let graph = RoadmapGraph::from_json_str(&artifacts::read_artifact(&graph_path)?)
        .map_err(|e| corrupt(&graph_path, e))?;
    let cand_path = dir.join("candidates.json");
    let candidates = euler::candidates_from_json(&artifacts::read_artifact(&cand_path)?, Some(&graph))
        .map_err(|e| corrupt(&cand_path, e))?;
    let summary = PlanSummary::load(&dir.join("ranking.json"))?;
    if summary.candidate_count != candidates.len() {
        return Err(corrupt(
            &dir.join("ranking.json"),
            Error::parse("ranking JSON", "candidate count does not match candidates.json"),
        ));
    }
    Ok(LoadedPlan {
        graph,
        candidates,
        summary,
    })
}

/// Largest |replay PEC - planner PEC| over the timestamps both series share.
fn pec_deviation(trial: &Trial, score: &PathScore) -> f64 {
    trial
        .online
        .track
        .iter()
        .zip(&score.pec_series)
        .filter(|(a, b)| (a.t - b.t).abs() < 1e-9)
        .map(|(a, b)| (a.pec - b.pec).abs())
        .fold(0.0, f64::max)
}

/// Result of one `simulate` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub trials: PathTrials,
    pub planner_total_pec_m2: f64,
}

/// Monte Carlo replays of one candidate, written to `<out>/sim/<label>`.
pub fn cmd_simulate(cfg: &RunConfig, selection: Selection) -> Result<SimulationOutput> {
    let plan = load_plan(&cfg.out)?;
    let map = cfg.load_map()?;
    let model = cfg.belief_model()?;
    let index = selection.resolve(&plan.summary.ranking, plan.candidates.len())?;
    let candidate = plan
        .candidates
        .iter()
        .find(|c| c.run == index)
        .ok_or_else(|| Error::UnknownSelection(selection.label()))?;
    let settings = cfg.trial_settings();
    let trials = montecarlo::run_trials(index, &candidate.circuit, &plan.graph, &map, &model, &settings)?;
    let score = planner::propagate_path(index, &candidate.circuit, &plan.graph, &map, &model)?;

    let label = format!("{}_{}", selection.label(), artifacts::mode_label(cfg.mode));
    let dir = artifacts::sim_dir(&cfg.out).join(&label);
    for (i, t) in trials.iter().enumerate() {
        artifacts::write_file(&dir.join(format!("run_{:02}.csv", i + 1)), &artifacts::run_csv(t))?;
    }
    let stats: Vec<_> = trials.iter().map(|t| t.stats).collect();
    artifacts::write_file(&dir.join("summary.csv"), &artifacts::summary_csv(&stats))?;
    let path_trials = PathTrials {
        label: label.clone(),
        selection: selection.label(),
        mode: cfg.mode,
        circuit_index: index,
        seed: cfg.seed,
        aggregate: montecarlo::aggregate_trials(&stats)?,
        planner_pec_max_abs_diff: trials.iter().map(|t| pec_deviation(t, &score)).collect(),
        runs: stats,
    };
    artifacts::write_file(&dir.join("stats.json"), &path_trials.to_json_string())?;

    let plan_path = FlightPlan::from_circuit(&candidate.circuit, &plan.graph, cfg.kin.cruise);
    let first = &trials[0];
    let overlay = svg::xy_overlay(
        &format!("{label}: estimate vs truth, run 1"),
        &[
            svg::Series {
                label: "truth".into(),
                color: "black",
                dashed: false,
                points: first.truth.samples.iter().map(|s| s.position).collect(),
            },
            svg::Series {
                label: "EKF estimate".into(),
                color: "red",
                dashed: true,
                points: first.online.track.iter().map(|s| s.position).collect(),
            },
        ],
    );
    artifacts::write_file(&dir.join("overlay.svg"), &overlay)?;
    let mut series = vec![svg::Series {
        label: "waypoints".into(),
        color: "black",
        dashed: true,
        points: plan_path.waypoints().to_vec(),
    }];
    for (i, t) in trials.iter().enumerate() {
        series.push(svg::Series {
            label: format!("run {}", i + 1),
            color: svg::PALETTE[i % svg::PALETTE.len()],
            dashed: false,
            points: t.truth.samples.iter().map(|s| s.position).collect(),
        });
    }
    artifacts::write_file(
        &dir.join("truth_runs.svg"),
        &svg::xy_overlay(&format!("{label}: truth over {} runs", trials.len()), &series),
    )?;

    write_aggregate(&cfg.out)?;
    log::info!(
        "{label}: {} runs, mean 3D RMS {:.3} m",
        trials.len(),
        path_trials.aggregate.mean.rms_3d
    );
    Ok(SimulationOutput {
        trials: path_trials,
        planner_total_pec_m2: score.total,
    })
}

fn write_aggregate(out: &Path) -> Result<()> {
    let entries = artifacts::aggregate_entries(&artifacts::load_all_trials(out)?);
    let dir = artifacts::sim_dir(out);
    artifacts::write_file(&dir.join("aggregate.csv"), &artifacts::aggregate_csv(&entries))?;
    artifacts::write_file(&dir.join("aggregate.json"), &artifacts::aggregate_json(&entries))
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub plan: PlanSummary,
    /// `None` when no simulation has been run.
    pub simulation: Option<Vec<artifacts::AggregateEntry>>,
}

fn report_text(r: &Report) -> String {
    let p = &r.plan;
    let mut s = String::new();
    let _ = writeln!(s, "covsearch report (seed {})", p.seed);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "Roadmap: {} nodes, {} edges, {} edge instances after Eulerization",
        p.node_count, p.edges_before_eulerization, p.edge_instances_after_eulerization
    );
    let _ = writeln!(
        s,
        "Circuit length {:.3} m, flight time {:.2} s (budget {:.1} s)",
        p.circuit_length_m, p.flight_time_s, p.rho_s
    );
    let _ = writeln!(
        s,
        "Candidates: {} ({} distinct)",
        p.candidate_count, p.distinct_circuits
    );
    if p.ranking.degenerate {
        let _ = writeln!(s, "Ranking is degenerate: every candidate has the same total.");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Planning statistics (PEC, m^2)");
    let _ = writeln!(
        s,
        "{:<13} {:>6} {:>12} {:>10} {:>10} {:>10} {:>10} {:>10} {:>5} {:>6} {:>9}",
        "path", "index", "total", "rms", "max", "sigma", "mean", "median", "cam", "lidar", "threshold"
    );
    for h in &p.highlighted {
        let thr = match (h.threshold_ok, p.delta_m2) {
            (Some(ok), Some(d)) => format!("{}<{d}", if ok { "yes" } else { "no" }),
            _ => "-".into(),
        };
        let st = &h.stats;
        let _ = writeln!(
            s,
            "{:<13} {:>6} {:>12.3} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>5} {:>6} {:>9}",
            h.label,
            h.circuit_index,
            h.total_pec_m2,
            st.rms,
            st.max,
            st.sigma,
            st.mean,
            st.median,
            h.cam_updates,
            h.lidar_updates,
            thr
        );
    }
    let _ = writeln!(s);
    match &r.simulation {
        None => {
            let _ = writeln!(s, "Simulation: absent (run `covsearch simulate`)");
        }
        Some(entries) => {
            let _ = writeln!(s, "Simulation statistics (position error, m)");
            let _ = writeln!(
                s,
                "{:<22} {:>6} {:>5} {:>7} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}",
                "path",
                "index",
                "runs",
                "stat",
                "flight_s",
                "x_rms",
                "y_rms",
                "z_rms",
                "rms_3d",
                "sigma",
                "mean",
                "max",
                "lidar",
                "cam"
            );
            for e in entries {
                for (name, row) in [("mean", &e.mean), ("median", &e.median)] {
                    let _ = writeln!(
                        s,
                        "{:<22} {:>6} {:>5} {:>7} {:>10.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>7.1} {:>7.1}",
                        e.label, e.circuit_index, e.runs, name, row.flight_time, row.x_rms, row.y_rms, row.z_rms, row.rms_3d, row.sigma, row.mean, row.max_pos_err, row.lidar_updates, row.cam_updates
                    );
                }
            }
        }
    }
    s
}

/// Combine the plan and any simulation artifacts into `report.{json,txt}`.
pub fn cmd_report(out: &Path) -> Result<Report> {
    let plan = PlanSummary::load(&artifacts::plan_dir(out).join("ranking.json"))?;
    let trials = artifacts::load_all_trials(out)?;
    let report = Report {
        plan,
        simulation: if trials.is_empty() {
            None
        } else {
            Some(artifacts::aggregate_entries(&trials))
        },
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    artifacts::write_file(&out.join("report.json"), &json)?;
    artifacts::write_file(&out.join("report.txt"), &report_text(&report))?;
    Ok(report)
}

/// Plan, simulate the four highlighted paths, report.
pub fn cmd_all(cfg: &RunConfig) -> Result<Report> {
    let planned = cmd_plan(cfg)?;
    for (sel, _) in highlighted(&planned.ranking) {
        cmd_simulate(cfg, sel)?;
    }
    cmd_report(&cfg.out)
}
