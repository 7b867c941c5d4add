//! Belief propagation along candidate circuits and path ranking.
//!
//! The UAV is assumed to fly each straight segment at cruise speed with zero
//! pitch and roll. Along the way the covariance is predicted at the filter
//! rate and updated with zero-innovation measurements whenever a sensor
//! ticks: altimeter and UWB always, camera and LIDAR only when the nominal
//! position lies in their field of view. A circuit's score is the sum over
//! all steps of the position-covariance norm (PEC).

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ekf::{self, Attitude, BeliefState, Covariance, EkfError, NoiseConfig};
use crate::error::{Error, Result};
use crate::euler::{Candidate, Circuit};
use crate::geometry::Vec3;
use crate::map::EnvironmentMap;
use crate::roadmap::RoadmapGraph;
use crate::trajectory::{FlightPlan, RateSchedule, Sensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicProfile {
    pub cruise: f64,
    pub attitude: Attitude,
}

impl Default for KinematicProfile {
    fn default() -> Self {
        KinematicProfile {
            cruise: 0.5,
            attitude: Attitude::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PecNorm {
    /// Largest eigenvalue of the position block.
    #[default]
    Spectral,
    Frobenius,
}

/// Everything needed to propagate a belief along a flight.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefModel {
    pub kin: KinematicProfile,
    pub rates: RateSchedule,
    pub noise: NoiseConfig,
    pub norm: PecNorm,
    pub p0: Covariance,
}

impl Default for BeliefModel {
    fn default() -> Self {
        BeliefModel {
            kin: KinematicProfile::default(),
            rates: RateSchedule::default(),
            noise: NoiseConfig::default(),
            norm: PecNorm::default(),
            p0: Covariance::identity(),
        }
    }
}

impl BeliefModel {
    /// Validate and tie the filter step to the prediction rate.
    pub fn new(
        kin: KinematicProfile,
        rates: RateSchedule,
        mut noise: NoiseConfig,
        norm: PecNorm,
    ) -> Result<Self> {
        rates.validate().map_err(Error::Config)?;
        noise.ts = rates.ts();
        noise.validate().map_err(Error::Config)?;
        if !(kin.cruise.is_finite() && kin.cruise > 0.0) {
            return Err(Error::Config(format!(
                "cruise speed must be positive, got {}",
                kin.cruise
            )));
        }
        Ok(BeliefModel {
            kin,
            rates,
            noise,
            norm,
            p0: Covariance::identity(),
        })
    }

    pub fn ts(&self) -> f64 {
        self.noise.ts
    }

    pub fn initial_belief(&self, position: Vec3) -> BeliefState {
        let mut b = BeliefState::at_rest(position.to_vector());
        b.p = self.p0;
        b
    }

    /// Set the commanded velocity, then run one prediction step.
    pub fn advance(&self, b: &BeliefState, velocity: Vec3) -> BeliefState {
        let mut commanded = b.clone();
        commanded.set_velocity(velocity.to_vector());
        ekf::predict(&commanded, &self.noise)
    }

    pub fn pec(&self, p: &Covariance) -> f64 {
        pec(p, self.norm)
    }
}

pub fn pec(p: &Covariance, norm: PecNorm) -> f64 {
    let block: Matrix3<f64> = p.fixed_view::<3, 3>(3, 3).into_owned();
    match norm {
        PecNorm::Spectral => {
            let sym = (block + block.transpose()) * 0.5;
            SymmetricEigen::new(sym).eigenvalues.abs().max()
        }
        PecNorm::Frobenius => block.norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PecSample {
    pub t: f64,
    pub pec: f64,
    pub cam_fired: bool,
    pub lidar_fired: bool,
}

/// Mean / median / population standard deviation / RMS / max of a series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub median: f64,
    pub sigma: f64,
    pub rms: f64,
    pub max: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

impl SeriesStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return SeriesStats::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        SeriesStats {
            mean,
            median: median(values),
            sigma: var.sqrt(),
            rms: (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathScore {
    pub circuit_index: usize,
    pub pec_series: Vec<PecSample>,
    pub total: f64,
    pub max_pec: f64,
    pub stats: SeriesStats,
    pub cam_update_count: usize,
    pub lidar_update_count: usize,
    pub skipped_updates: usize,
    pub threshold_ok: Option<bool>,
}

impl PathScore {
    fn from_series(circuit_index: usize, pec_series: Vec<PecSample>, skipped: usize) -> Self {
        let values: Vec<f64> = pec_series.iter().map(|s| s.pec).collect();
        let stats = SeriesStats::of(&values);
        PathScore {
            circuit_index,
            total: values.iter().sum(),
            max_pec: if values.is_empty() { 0.0 } else { stats.max },
            stats,
            cam_update_count: pec_series.iter().filter(|s| s.cam_fired).count(),
            lidar_update_count: pec_series.iter().filter(|s| s.lidar_fired).count(),
            skipped_updates: skipped,
            threshold_ok: None,
            pec_series,
        }
    }
}

fn apply_or_skip(
    b: &mut BeliefState,
    skipped: &mut usize,
    sensor: Sensor,
    update: std::result::Result<BeliefState, EkfError>,
) -> bool {
    match update {
        Ok(post) => {
            *b = post;
            true
        }
        Err(e) => {
            log::debug!("t={:.2}s: skipping {sensor:?} update: {e}", b.t);
            *skipped += 1;
            false
        }
    }
}

/// Propagate the belief along `circuit` and score it.
pub fn propagate_path(
    circuit_index: usize,
    circuit: &Circuit,
    graph: &RoadmapGraph,
    map: &EnvironmentMap,
    model: &BeliefModel,
) -> Result<PathScore> {
    if circuit.edge_refs.is_empty() {
        if circuit.nodes.len() != 1 || circuit.nodes[0].0 >= graph.nodes.len() {
            return Err(Error::InvalidCircuit(
                "empty circuit must be the source alone".into(),
            ));
        }
        return Ok(PathScore::from_series(circuit_index, Vec::new(), 0));
    }
    circuit.validate(graph)?;
    let plan = FlightPlan::from_circuit(circuit, graph, model.kin.cruise);
    let ts = model.ts();
    let att = model.kin.attitude;
    let noise = &model.noise;
    let lidar_origin = map.rig.lidar_position();

    let mut b = model.initial_belief(plan.position_at(0.0));
    let mut series = Vec::with_capacity(plan.step_count(ts));
    let mut skipped = 0;
    for k in 1..=plan.step_count(ts) {
        b = model.advance(&b, plan.step_velocity(k, ts));
        let nominal = plan.position_at(FlightPlan::step_time(k, ts));
        let (mut cam_fired, mut lidar_fired) = (false, false);
        for sensor in Sensor::ALL {
            if !model.rates.fires(sensor, k) {
                continue;
            }
            match sensor {
                Sensor::Alt => {
                    let update = ekf::altimeter_predict(&b.x, att)
                        .and_then(|z| ekf::altimeter_update(&b, z, att, noise));
                    apply_or_skip(&mut b, &mut skipped, sensor, update);
                }
                Sensor::Uwb => {
                    let update = ekf::uwb_predict(&b.x).and_then(|z| ekf::uwb_update(&b, z, noise));
                    apply_or_skip(&mut b, &mut skipped, sensor, update);
                }
                Sensor::Cam if map.camera_sees(nominal) => {
                    let update = ekf::camera_predict(&b.x).and_then(|z| ekf::camera_update(&b, &z, noise));
                    cam_fired = apply_or_skip(&mut b, &mut skipped, sensor, update);
                }
                Sensor::Lidar if map.lidar_sees(nominal) => {
                    let gamma = noise.gamma_model.gamma(nominal.distance(lidar_origin));
                    let z: Vector3<f64> = ekf::lidar_predict(&b.x);
                    let update = ekf::lidar_update(&b, &z, gamma, noise);
                    lidar_fired = apply_or_skip(&mut b, &mut skipped, sensor, update);
                }
                Sensor::Cam | Sensor::Lidar => {}
            }
        }
        series.push(PecSample {
            t: FlightPlan::step_time(k, ts),
            pec: model.pec(&b.p),
            cam_fired,
            lidar_fired,
        });
    }
    Ok(PathScore::from_series(circuit_index, series, skipped))
}

/// Score every candidate in parallel; output order follows the input.
pub fn score_candidates(
    candidates: &[Candidate],
    graph: &RoadmapGraph,
    map: &EnvironmentMap,
    model: &BeliefModel,
) -> Result<Vec<PathScore>> {
    candidates
        .par_iter()
        .map(|c| propagate_path(c.run, &c.circuit, graph, map, model))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub best: usize,
    pub worst: usize,
    pub second_best: Option<usize>,
    pub second_worst: Option<usize>,
    /// Circuit indices from lowest to highest total; ties by index.
    pub order: Vec<usize>,
    /// Every total is identical, so best and worst carry no information.
    pub degenerate: bool,
}

fn argmax_lowest_index<'a>(it: impl Iterator<Item = &'a PathScore>) -> Option<&'a PathScore> {
    it.fold(None, |acc: Option<&PathScore>, s| match acc {
        Some(a) if a.total > s.total || (a.total == s.total && a.circuit_index < s.circuit_index) => Some(a),
        _ => Some(s),
    })
}

pub fn score_and_select(scores: &[PathScore]) -> Result<Ranking> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("path scores"));
    }
    let mut sorted: Vec<&PathScore> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        a.total
            .total_cmp(&b.total)
            .then(a.circuit_index.cmp(&b.circuit_index))
    });
    let best = sorted[0];
    let worst = argmax_lowest_index(scores.iter()).expect("non-empty");
    let second_worst = argmax_lowest_index(scores.iter().filter(|s| s.circuit_index != worst.circuit_index));
    Ok(Ranking {
        best: best.circuit_index,
        worst: worst.circuit_index,
        second_best: sorted.get(1).map(|s| s.circuit_index),
        second_worst: second_worst.map(|s| s.circuit_index),
        order: sorted.iter().map(|s| s.circuit_index).collect(),
        degenerate: best.total == worst.total,
    })
}

/// True iff every PEC sample is below `delta`; the result is also stored on
/// the score.
pub fn check_uncertainty_threshold(score: &mut PathScore, delta: f64) -> bool {
    let ok = score.pec_series.iter().all(|s| s.pec < delta);
    score.threshold_ok = Some(ok);
    ok
}
