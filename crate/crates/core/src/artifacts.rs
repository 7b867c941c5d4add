//! On-disk artifacts and their readers.
//!
//! ```text
//! <out>/plan/graph.json          Eulerized roadmap
//! <out>/plan/candidates.json     every candidate circuit
//! <out>/plan/scores.csv          one row per candidate
//! <out>/plan/ranking.json        ranking plus planning statistics
//! <out>/plan/pec_<label>.csv     PEC series of the highlighted paths
//! <out>/plan/totals.svg          bar chart of the candidate totals
//! <out>/sim/<label>/run_XX.csv   truth, estimate and error per step
//! <out>/sim/<label>/summary.csv  one row per run
//! <out>/sim/<label>/stats.json   full per-run statistics and aggregate
//! <out>/sim/aggregate.{csv,json} mean and median for every simulated path
//! <out>/report.{json,txt}        consolidated report
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{MeasurementMode, RunStats, StatsRow, Trial, TrialAggregate};
use crate::planner::{PathScore, PecSample, Ranking, SeriesStats};

/// Which candidate to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Best,
    Worst,
    SecondBest,
    SecondWorst,
    Index(usize),
}

impl Selection {
    pub const HIGHLIGHTED: [Selection; 4] = [
        Selection::Best,
        Selection::Worst,
        Selection::SecondBest,
        Selection::SecondWorst,
    ];

    pub fn label(&self) -> String {
        match self {
            Selection::Best => "best".into(),
            Selection::Worst => "worst".into(),
            Selection::SecondBest => "second_best".into(),
            Selection::SecondWorst => "second_worst".into(),
            Selection::Index(i) => format!("candidate_{i}"),
        }
    }

    /// Candidate index this selection refers to, if the ranking has one.
    pub fn resolve(&self, ranking: &Ranking, candidate_count: usize) -> Result<usize> {
        let idx = match self {
            Selection::Best => Some(ranking.best),
            Selection::Worst => Some(ranking.worst),
            Selection::SecondBest => ranking.second_best,
            Selection::SecondWorst => ranking.second_worst,
            Selection::Index(i) => Some(*i).filter(|&i| i < candidate_count),
        };
        idx.ok_or_else(|| {
            Error::UnknownSelection(format!("{} (of {candidate_count} candidates)", self.label()))
        })
    }
}

impl std::str::FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(Selection::Best),
            "worst" => Ok(Selection::Worst),
            "second_best" => Ok(Selection::SecondBest),
            "second_worst" => Ok(Selection::SecondWorst),
            other => other
                .parse::<usize>()
                .map(Selection::Index)
                .map_err(|_| Error::UnknownSelection(other.to_string())),
        }
    }
}

pub fn mode_label(mode: MeasurementMode) -> &'static str {
    match mode {
        MeasurementMode::Noisy => "noisy",
        MeasurementMode::Perfect => "perfect",
    }
}

pub fn plan_dir(out: &Path) -> PathBuf {
    out.join("plan")
}

pub fn sim_dir(out: &Path) -> PathBuf {
    out.join("sim")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Read an artifact that a previous stage must have produced.
pub fn read_artifact(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::MissingArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn corrupt(path: &Path, e: impl ToString) -> Error {
    Error::MissingArtifact {
        path: path.to_path_buf(),
        message: format!("corrupted: {}", e.to_string()),
    }
}

/// Planning statistics of one highlighted path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightedPath {
    pub label: String,
    pub circuit_index: usize,
    pub total_pec_m2: f64,
    pub stats: SeriesStats,
    pub cam_updates: usize,
    pub lidar_updates: usize,
    pub threshold_ok: Option<bool>,
}

impl HighlightedPath {
    pub fn from_score(label: &str, s: &PathScore) -> Self {
        HighlightedPath {
            label: label.to_string(),
            circuit_index: s.circuit_index,
            total_pec_m2: s.total,
            stats: s.stats,
            cam_updates: s.cam_update_count,
            lidar_updates: s.lidar_update_count,
            threshold_ok: s.threshold_ok,
        }
    }
}

/// Contents of `plan/ranking.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSummary {
    pub seed: u64,
    pub node_count: usize,
    pub edges_before_eulerization: usize,
    pub edge_instances_after_eulerization: usize,
    pub circuit_length_m: f64,
    pub flight_time_s: f64,
    pub rho_s: f64,
    pub delta_m2: Option<f64>,
    pub candidate_count: usize,
    pub distinct_circuits: usize,
    pub ranking: Ranking,
    pub highlighted: Vec<HighlightedPath>,
}

impl PlanSummary {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan summary serializes") + "\n"
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: PlanSummary = serde_json::from_str(text).map_err(|e| Error::parse("ranking JSON", e))?;
        let n = s.candidate_count;
        let r = &s.ranking;
        let in_range = |i: usize| i < n;
        if r.order.len() != n
            || !in_range(r.best)
            || !in_range(r.worst)
            || r.second_best.is_some_and(|i| !in_range(i))
            || r.second_worst.is_some_and(|i| !in_range(i))
            || r.order.iter().any(|&i| !in_range(i))
        {
            return Err(Error::parse(
                "ranking JSON",
                "ranking indices do not match the candidate count",
            ));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_artifact(path)?;
        Self::from_json_str(&text).map_err(|e| corrupt(path, e))
    }
}

pub fn scores_csv(
    scores: &[PathScore],
    lengths: &[f64],
    cruise: f64,
    duplicates: &[Option<usize>],
) -> String {
    let mut s = String::from(
        "circuit,duplicate_of,length_m,flight_time_s,total_pec_m2,max_pec_m2,mean_pec_m2,median_pec_m2,sigma_pec_m2,rms_pec_m2,cam_updates,lidar_updates,skipped_updates,threshold_ok\n",
    );
    for (i, sc) in scores.iter().enumerate() {
        let dup = duplicates[i].map_or(String::new(), |d| d.to_string());
        let thr = sc.threshold_ok.map_or(String::new(), |b| b.to_string());
        let _ = writeln!(
            s,
            "{},{dup},{:.9},{:.6},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{},{},{thr}",
            sc.circuit_index,
            lengths[i],
            lengths[i] / cruise,
            sc.total,
            sc.max_pec,
            sc.stats.mean,
            sc.stats.median,
            sc.stats.sigma,
            sc.stats.rms,
            sc.cam_update_count,
            sc.lidar_update_count,
            sc.skipped_updates,
        );
    }
    s
}

pub fn pec_series_csv(series: &[PecSample]) -> String {
    let mut s = String::from("t_s,pec_m2,cam_fired,lidar_fired\n");
    for p in series {
        let _ = writeln!(
            s,
            "{:.2},{:.12},{},{}",
            p.t,
            p.pec,
            u8::from(p.cam_fired),
            u8::from(p.lidar_fired)
        );
    }
    s
}

pub fn parse_pec_series_csv(text: &str) -> Result<Vec<PecSample>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse("PEC CSV", e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "pec_m2", "cam_fired", "lidar_fired"] {
        return Err(Error::parse("PEC CSV", "unexpected header"));
    }
    let flag = |v: &str| match v {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::parse("PEC CSV", format!("bad flag `{v}`"))),
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| Error::parse("PEC CSV", e));
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| Error::parse("PEC CSV", e))?;
            if r.len() != 4 {
                return Err(Error::parse("PEC CSV", "expected 4 columns"));
            }
            Ok(PecSample {
                t: num(&r[0])?,
                pec: num(&r[1])?,
                cam_fired: flag(&r[2])?,
                lidar_fired: flag(&r[3])?,
            })
        })
        .collect()
}

pub fn run_csv(trial: &Trial) -> String {
    let mut s = String::from("t_s,truth_n,truth_e,truth_d,est_n,est_e,est_d,err_3d_m,pec_m2\n");
    for e in &trial.online.track {
        let t = trial.truth.position_at(e.t);
        let p = e.position;
        let _ = writeln!(
            s,
            "{:.2},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.12}",
            e.t,
            t.n,
            t.e,
            t.d,
            p.n,
            p.e,
            p.d,
            p.distance(t),
            e.pec
        );
    }
    s
}

/// Per-path summary: one row per run.
pub fn summary_csv(stats: &[RunStats]) -> String {
    let mut s = String::from("run,median,mean,rms,mpe\n");
    for (i, r) in stats.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6}",
            i + 1,
            r.median,
            r.mean,
            r.rms_3d,
            r.max_pos_err
        );
    }
    s
}

/// Contents of `sim/<label>/stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathTrials {
    pub label: String,
    pub selection: String,
    pub mode: MeasurementMode,
    pub circuit_index: usize,
    pub seed: u64,
    pub runs: Vec<RunStats>,
    pub aggregate: TrialAggregate,
    /// Per run, the largest gap between the replay PEC and the planner PEC
    /// at shared timestamps. Zero jitter and perfect measurements give ~0.
    pub planner_pec_max_abs_diff: Vec<f64>,
}

impl PathTrials {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("trial stats serialize") + "\n"
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let t: PathTrials = serde_json::from_str(text).map_err(|e| Error::parse("trial stats JSON", e))?;
        if t.runs.len() != t.aggregate.runs {
            return Err(Error::parse(
                "trial stats JSON",
                "run count does not match the aggregate",
            ));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_artifact(path)?;
        Self::from_json_str(&text).map_err(|e| corrupt(path, e))
    }
}

/// Every `sim/<label>/stats.json` under `out`, sorted by label.
pub fn load_all_trials(out: &Path) -> Result<Vec<PathTrials>> {
    let dir = sim_dir(out);
    let Ok(entries) = std::fs::read_dir(&dir) else {
        return Ok(Vec::new());
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("stats.json"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths.iter().map(|p| PathTrials::load(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateEntry {
    pub label: String,
    pub circuit_index: usize,
    pub mode: MeasurementMode,
    pub runs: usize,
    pub mean: StatsRow,
    pub median: StatsRow,
}

pub fn aggregate_entries(trials: &[PathTrials]) -> Vec<AggregateEntry> {
    trials
        .iter()
        .map(|t| AggregateEntry {
            label: t.label.clone(),
            circuit_index: t.circuit_index,
            mode: t.mode,
            runs: t.aggregate.runs,
            mean: t.aggregate.mean,
            median: t.aggregate.median,
        })
        .collect()
}

pub fn aggregate_json(entries: &[AggregateEntry]) -> String {
    serde_json::to_string_pretty(entries).expect("aggregate serializes") + "\n"
}

pub fn parse_aggregate_json(text: &str) -> Result<Vec<AggregateEntry>> {
    serde_json::from_str(text).map_err(|e| Error::parse("aggregate JSON", e))
}

/// Mean and median rows for every simulated path.
pub fn aggregate_csv(entries: &[AggregateEntry]) -> String {
    let mut s = String::from("path,circuit,mode,runs,statistic");
    for f in StatsRow::FIELDS {
        s.push(',');
        s.push_str(f);
    }
    s.push('\n');
    for e in entries {
        for (name, row) in [("mean", &e.mean), ("median", &e.median)] {
            let _ = write!(
                s,
                "{},{},{},{},{name}",
                e.label,
                e.circuit_index,
                mode_label(e.mode),
                e.runs
            );
            for v in row.values() {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
    }
    s
}
