//! Monte Carlo replay: simulated truth with execution jitter, synthetic
//! measurements, an online filter and error statistics.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ekf::{self, EkfError, StateVector};
use crate::error::{Error, Result};
use crate::euler::Circuit;
use crate::geometry::Vec3;
use crate::map::EnvironmentMap;
use crate::planner::{median, BeliefModel};
use crate::roadmap::RoadmapGraph;
use crate::seed::derive_seed;
use crate::trajectory::{FlightPlan, Sensor};

/// Execution variability: first-order Gauss-Markov cross-track offset and
/// speed error, both with correlation time `tau_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    pub cross_track_sigma_m: f64,
    pub speed_sigma_mps: f64,
    pub tau_s: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            cross_track_sigma_m: 0.3,
            speed_sigma_mps: 0.05,
            tau_s: 2.0,
        }
    }
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        cross_track_sigma_m: 0.0,
        speed_sigma_mps: 0.0,
        tau_s: 2.0,
    };

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.cross_track_sigma_m >= 0.0 && self.cross_track_sigma_m.is_finite()) {
            return Err("cross-track sigma must be non-negative".into());
        }
        if !(self.speed_sigma_mps >= 0.0 && self.speed_sigma_mps.is_finite()) {
            return Err("speed sigma must be non-negative".into());
        }
        if !(self.tau_s > 0.0 && self.tau_s.is_finite()) {
            return Err("jitter time constant must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTrajectory {
    pub samples: Vec<TruthSample>,
    pub circuit_index: usize,
    pub run: usize,
    pub seed: u64,
}

impl TruthTrajectory {
    pub fn flight_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Linear interpolation of the position at time `t` (clamped).
    pub fn position_at(&self, t: f64) -> Vec3 {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0].position;
        }
        let i = s.partition_point(|x| x.t <= t);
        if i >= s.len() {
            return s[s.len() - 1].position;
        }
        let (a, b) = (&s[i - 1], &s[i]);
        a.position.lerp(b.position, (t - a.t) / (b.t - a.t))
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Fly `plan` at cruise speed, sampled at the filter rate, with jitter.
/// With zero jitter the positions are exactly the plan's step positions.
pub fn simulate_truth(
    plan: &FlightPlan,
    ts: f64,
    jitter: &Jitter,
    circuit_index: usize,
    run: usize,
    seed: u64,
) -> TruthTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cruise = plan.cruise();
    let length = plan.length();
    let a = (-ts / jitter.tau_s).exp();
    let drive = (1.0 - a * a).sqrt();

    let start = plan.position_at_arclength(0.0);
    let mut samples = vec![TruthSample {
        t: 0.0,
        position: start,
        velocity: plan.direction_at_arclength(0.0) * cruise,
    }];
    if length <= 0.0 {
        return TruthTrajectory {
            samples,
            circuit_index,
            run,
            seed,
        };
    }

    let mut offset = Vec3::ZERO;
    let mut speed_err = 0.0;
    let mut lag = 0.0;
    let max_steps = 10 * plan.step_count(ts) + 10;
    for k in 1..=max_steps {
        let w = Vec3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng));
        let ws = gauss(&mut rng);
        offset = offset * a + w * (drive * jitter.cross_track_sigma_m);
        speed_err = a * speed_err + drive * jitter.speed_sigma_mps * ws;
        // never stall or reverse
        lag += speed_err.max(-0.9 * cruise) * ts;

        let t = FlightPlan::step_time(k, ts);
        let s = cruise * t + lag;
        let dir = plan.direction_at_arclength(s);
        let cross = offset - dir * offset.dot(dir);
        let position = plan.position_at_arclength(s) + cross;
        let prev = samples[k - 1].position;
        samples.push(TruthSample {
            t,
            position,
            velocity: (position - prev) * (1.0 / ts),
        });
        if s >= length - 1e-9 * cruise * ts {
            break;
        }
    }
    TruthTrajectory {
        samples,
        circuit_index,
        run,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    Noisy,
    Perfect,
}

impl std::str::FromStr for MeasurementMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noisy" => Ok(MeasurementMode::Noisy),
            "perfect" => Ok(MeasurementMode::Perfect),
            other => Err(Error::Config(format!("unknown measurement mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasValue {
    Scalar(f64),
    Vector([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub t: f64,
    /// prediction step the event belongs to
    pub step: usize,
    pub sensor: Sensor,
    pub value: MeasValue,
    pub gamma: Option<f64>,
    pub dropped: bool,
}

/// Noisy-mode corruption knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementOptions {
    /// Probability that an in-view camera or LIDAR detection is lost.
    pub dropout: f64,
    /// Probability that a UWB or LIDAR measurement is an outlier.
    pub outlier_prob: f64,
    /// Standard deviation of the extra error added to outliers.
    pub outlier_sigma_m: f64,
}

impl Default for MeasurementOptions {
    fn default() -> Self {
        MeasurementOptions {
            dropout: 0.1,
            outlier_prob: 0.0,
            outlier_sigma_m: 3.0,
        }
    }
}

impl MeasurementOptions {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(format!("dropout must lie in [0, 1], got {}", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(format!(
                "outlier_prob must lie in [0, 1], got {}",
                self.outlier_prob
            ));
        }
        if !(self.outlier_sigma_m >= 0.0 && self.outlier_sigma_m.is_finite()) {
            return Err("outlier sigma must be non-negative".into());
        }
        Ok(())
    }
}

/// Draw from N(0, cov) for a symmetric PSD 3x3 covariance.
fn sample_gaussian3<R: Rng + ?Sized>(cov: &Matrix3<f64>, rng: &mut R) -> Vector3<f64> {
    let eig = SymmetricEigen::new((cov + cov.transpose()) * 0.5);
    let n = Vector3::new(gauss(rng), gauss(rng), gauss(rng));
    let scaled = Vector3::from_iterator(
        eig.eigenvalues
            .iter()
            .zip(n.iter())
            .map(|(l, z)| l.max(0.0).sqrt() * z),
    );
    eig.eigenvectors * scaled
}

fn state_at(p: Vec3) -> StateVector {
    let mut x = StateVector::zeros();
    x.fixed_rows_mut::<3>(3).copy_from(&p.to_vector());
    x
}

/// Build the measurement stream for one truth trajectory. Camera and LIDAR
/// events are generated only while the true position is in view.
pub fn synthesize_measurements<R: Rng + ?Sized>(
    truth: &TruthTrajectory,
    map: &EnvironmentMap,
    model: &BeliefModel,
    mode: MeasurementMode,
    opts: &MeasurementOptions,
    rng: &mut R,
) -> Vec<MeasurementEvent> {
    let noise = &model.noise;
    let noisy = mode == MeasurementMode::Noisy;
    let lidar_origin = map.rig.lidar_position();
    let mut events = Vec::new();
    for (k, sample) in truth.samples.iter().enumerate().skip(1) {
        let pos = sample.position;
        let x = state_at(pos);
        for sensor in Sensor::ALL {
            if !model.rates.fires(sensor, k) {
                continue;
            }
            let mut event = MeasurementEvent {
                t: sample.t,
                step: k,
                sensor,
                value: MeasValue::Scalar(0.0),
                gamma: None,
                dropped: false,
            };
            match sensor {
                Sensor::Alt => {
                    let Ok(mut z) = ekf::altimeter_predict(&x, model.kin.attitude) else {
                        continue;
                    };
                    if noisy {
                        z += noise.r_alt.sqrt() * gauss(rng);
                    }
                    event.value = MeasValue::Scalar(z);
                }
                Sensor::Uwb => {
                    let mut z = pos.norm();
                    if noisy {
                        z += noise.r_uwb.sqrt() * gauss(rng);
                        if rng.random::<f64>() < opts.outlier_prob {
                            z += opts.outlier_sigma_m * gauss(rng);
                        }
                    }
                    event.value = MeasValue::Scalar(z);
                }
                Sensor::Cam => {
                    if !map.camera_sees(pos) {
                        continue;
                    }
                    let Ok(mut z) = ekf::camera_predict(&x) else {
                        continue;
                    };
                    if noisy {
                        let scale = ekf::camera_noise_scale(&x).unwrap_or(1.0);
                        z += sample_gaussian3(&(noise.r_cam * scale), rng);
                        event.dropped = rng.random::<f64>() < opts.dropout;
                    }
                    event.value = MeasValue::Vector([z[0], z[1], z[2]]);
                }
                Sensor::Lidar => {
                    if !map.lidar_sees(pos) {
                        continue;
                    }
                    let gamma = noise.gamma_model.gamma(pos.distance(lidar_origin));
                    let mut z = pos.to_vector();
                    if noisy {
                        z += sample_gaussian3(&(noise.r_lidar * gamma), rng);
                        if rng.random::<f64>() < opts.outlier_prob {
                            z += Vector3::new(gauss(rng), gauss(rng), gauss(rng)) * opts.outlier_sigma_m;
                        }
                        event.dropped = rng.random::<f64>() < opts.dropout;
                    }
                    event.gamma = Some(gamma);
                    event.value = MeasValue::Vector([z[0], z[1], z[2]]);
                }
            }
            events.push(event);
        }
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    pub t: f64,
    pub position: Vec3,
    pub pec: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OnlineRun {
    pub track: Vec<EstimateSample>,
    pub cam_updates: usize,
    pub lidar_updates: usize,
    pub skipped_updates: usize,
}

fn apply_event(
    b: &ekf::BeliefState,
    ev: &MeasurementEvent,
    model: &BeliefModel,
) -> std::result::Result<ekf::BeliefState, EkfError> {
    let noise = &model.noise;
    match (ev.sensor, ev.value) {
        (Sensor::Alt, MeasValue::Scalar(z)) => ekf::altimeter_update(b, z, model.kin.attitude, noise),
        (Sensor::Uwb, MeasValue::Scalar(z)) => ekf::uwb_update(b, z, noise),
        (Sensor::Cam, MeasValue::Vector(z)) => ekf::camera_update(b, &Vector3::from(z), noise),
        (Sensor::Lidar, MeasValue::Vector(z)) => {
            ekf::lidar_update(b, &Vector3::from(z), ev.gamma.unwrap_or(1.0), noise)
        }
        // mismatched payloads are ignored, not fatal
        _ => Ok(b.clone()),
    }
}

/// Replay `events` through the filter. Prediction runs once per truth sample
/// using the plan's commanded velocity; events are applied after the
/// prediction of the step they belong to, in timestamp order.
pub fn run_online_ekf(
    events: &[MeasurementEvent],
    truth: &TruthTrajectory,
    plan: &FlightPlan,
    model: &BeliefModel,
) -> OnlineRun {
    let ts = model.ts();
    let mut b = model.initial_belief(truth.samples[0].position);
    let mut run = OnlineRun::default();
    let mut next = 0;
    for (k, sample) in truth.samples.iter().enumerate().skip(1) {
        b = model.advance(&b, plan.step_velocity(k, ts));
        while next < events.len() && events[next].step < k {
            next += 1;
        }
        while next < events.len() && events[next].step == k {
            let ev = &events[next];
            next += 1;
            if ev.dropped {
                continue;
            }
            match apply_event(&b, ev, model) {
                Ok(post) => {
                    b = post;
                    match ev.sensor {
                        Sensor::Cam => run.cam_updates += 1,
                        Sensor::Lidar => run.lidar_updates += 1,
                        _ => {}
                    }
                }
                Err(e) => {
                    log::debug!("t={:.2}s: skipping {:?} update: {e}", sample.t, ev.sensor);
                    run.skipped_updates += 1;
                }
            }
        }
        run.track.push(EstimateSample {
            t: sample.t,
            position: Vec3::from_vector(&b.position()),
            pec: model.pec(&b.p),
        });
    }
    run
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub flight_time: f64,
    pub x_rms: f64,
    pub y_rms: f64,
    pub z_rms: f64,
    pub rms_3d: f64,
    pub sigma: f64,
    pub mean: f64,
    pub median: f64,
    pub max_pos_err: f64,
    pub lidar_updates: usize,
    pub cam_updates: usize,
}

/// Error statistics of an estimate track against the (interpolated) truth.
pub fn compute_stats(
    track: &[EstimateSample],
    truth: &TruthTrajectory,
    cam_updates: usize,
    lidar_updates: usize,
) -> Result<RunStats> {
    if track.is_empty() || truth.samples.is_empty() {
        return Err(Error::EmptyInput("estimate track"));
    }
    let n = track.len() as f64;
    let errors: Vec<Vec3> = track
        .iter()
        .map(|s| s.position - truth.position_at(s.t))
        .collect();
    let axis_rms = |f: fn(&Vec3) -> f64| (errors.iter().map(|e| f(e).powi(2)).sum::<f64>() / n).sqrt();
    let norms: Vec<f64> = errors.iter().map(|e| e.norm()).collect();
    let mean = norms.iter().sum::<f64>() / n;
    let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(RunStats {
        flight_time: truth.flight_time(),
        x_rms: axis_rms(|e| e.n),
        y_rms: axis_rms(|e| e.e),
        z_rms: axis_rms(|e| e.d),
        rms_3d: (norms.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        sigma: var.sqrt(),
        mean,
        median: median(&norms),
        max_pos_err: norms.iter().copied().fold(0.0, f64::max),
        lidar_updates,
        cam_updates,
    })
}

/// Fieldwise summary over runs; counts become averages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatsRow {
    pub flight_time: f64,
    pub x_rms: f64,
    pub y_rms: f64,
    pub z_rms: f64,
    pub rms_3d: f64,
    pub sigma: f64,
    pub mean: f64,
    pub median: f64,
    pub max_pos_err: f64,
    pub lidar_updates: f64,
    pub cam_updates: f64,
}

impl StatsRow {
    pub const FIELDS: [&'static str; 11] = [
        "flight_time_s",
        "x_rms_m",
        "y_rms_m",
        "z_rms_m",
        "rms_3d_m",
        "sigma_m",
        "mean_m",
        "median_m",
        "max_pos_err_m",
        "lidar_updates",
        "cam_updates",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.flight_time,
            self.x_rms,
            self.y_rms,
            self.z_rms,
            self.rms_3d,
            self.sigma,
            self.mean,
            self.median,
            self.max_pos_err,
            self.lidar_updates,
            self.cam_updates,
        ]
    }

    fn from_values(v: [f64; 11]) -> Self {
        StatsRow {
            flight_time: v[0],
            x_rms: v[1],
            y_rms: v[2],
            z_rms: v[3],
            rms_3d: v[4],
            sigma: v[5],
            mean: v[6],
            median: v[7],
            max_pos_err: v[8],
            lidar_updates: v[9],
            cam_updates: v[10],
        }
    }
}

impl From<&RunStats> for StatsRow {
    fn from(s: &RunStats) -> Self {
        StatsRow::from_values([
            s.flight_time,
            s.x_rms,
            s.y_rms,
            s.z_rms,
            s.rms_3d,
            s.sigma,
            s.mean,
            s.median,
            s.max_pos_err,
            s.lidar_updates as f64,
            s.cam_updates as f64,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub runs: usize,
    pub mean: StatsRow,
    pub median: StatsRow,
}

pub fn aggregate_trials(runs: &[RunStats]) -> Result<TrialAggregate> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("trial runs"));
    }
    let rows: Vec<[f64; 11]> = runs.iter().map(|r| StatsRow::from(r).values()).collect();
    let mut mean = [0.0; 11];
    let mut med = [0.0; 11];
    for f in 0..11 {
        let column: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        mean[f] = column.iter().sum::<f64>() / column.len() as f64;
        med[f] = median(&column);
    }
    Ok(TrialAggregate {
        runs: runs.len(),
        mean: StatsRow::from_values(mean),
        median: StatsRow::from_values(med),
    })
}

/// One Monte Carlo replay of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub truth: TruthTrajectory,
    pub online: OnlineRun,
    pub stats: RunStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub jitter: Jitter,
    pub mode: MeasurementMode,
    pub measurement: MeasurementOptions,
    pub runs: usize,
    pub master_seed: u64,
}

/// Run `settings.runs` independent replays of one circuit. Each run's random
/// streams depend only on the master seed, the circuit index and the run
/// index.
pub fn run_trials(
    circuit_index: usize,
    circuit: &Circuit,
    graph: &RoadmapGraph,
    map: &EnvironmentMap,
    model: &BeliefModel,
    settings: &TrialSettings,
) -> Result<Vec<Trial>> {
    circuit.validate(graph)?;
    settings.jitter.validate().map_err(Error::Config)?;
    settings.measurement.validate().map_err(Error::Config)?;
    let plan = FlightPlan::from_circuit(circuit, graph, model.kin.cruise);
    (0..settings.runs)
        .into_par_iter()
        .map(|run| {
            let truth_seed = derive_seed(settings.master_seed, &[0x7E57, circuit_index as u64, run as u64]);
            let meas_seed = derive_seed(settings.master_seed, &[0x5E45, circuit_index as u64, run as u64]);
            let truth = simulate_truth(
                &plan,
                model.ts(),
                &settings.jitter,
                circuit_index,
                run,
                truth_seed,
            );
            let mut rng = ChaCha8Rng::seed_from_u64(meas_seed);
            let events =
                synthesize_measurements(&truth, map, model, settings.mode, &settings.measurement, &mut rng);
            let online = run_online_ekf(&events, &truth, &plan, model);
            let stats = compute_stats(&online.track, &truth, online.cam_updates, online.lidar_updates)?;
            Ok(Trial { truth, online, stats })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_plan() -> FlightPlan {
        FlightPlan::new(
            vec![
                Vec3::new(1.0, 0.0, -1.0),
                Vec3::new(6.0, 0.0, -3.0),
                Vec3::new(1.0, 0.0, -1.0),
            ],
            0.5,
        )
    }

    fn truth_from(points: &[(f64, Vec3)]) -> TruthTrajectory {
        TruthTrajectory {
            samples: points
                .iter()
                .map(|&(t, position)| TruthSample {
                    t,
                    position,
                    velocity: Vec3::ZERO,
                })
                .collect(),
            circuit_index: 0,
            run: 0,
            seed: 0,
        }
    }

    #[test]
    fn zero_jitter_reproduces_plan() {
        let plan = straight_plan();
        let truth = simulate_truth(&plan, 0.02, &Jitter::NONE, 0, 0, 11);
        assert_eq!(truth.samples.len(), plan.step_count(0.02) + 1);
        for (k, s) in truth.samples.iter().enumerate() {
            assert_eq!(s.position, plan.position_at(FlightPlan::step_time(k, 0.02)));
        }
        assert!((truth.flight_time() - plan.duration()).abs() <= 0.02);
    }

    #[test]
    fn different_seeds_give_different_truth() {
        let plan = straight_plan();
        let a = simulate_truth(&plan, 0.02, &Jitter::default(), 0, 0, 1);
        let b = simulate_truth(&plan, 0.02, &Jitter::default(), 0, 1, 2);
        let sep = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| x.position.distance(y.position))
            .fold(0.0, f64::max);
        assert!(sep > 0.0);
        assert!(a.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn constant_offset_stats() {
        let truth = truth_from(&[
            (0.0, Vec3::ZERO),
            (1.0, Vec3::new(1.0, 0.0, 0.0)),
            (2.0, Vec3::new(2.0, 0.0, 0.0)),
        ]);
        let track: Vec<EstimateSample> = [0.5, 1.0, 1.5]
            .iter()
            .map(|&t| EstimateSample {
                t,
                position: truth.position_at(t) + Vec3::new(3.0, 0.0, 0.0),
                pec: 0.0,
            })
            .collect();
        let s = compute_stats(&track, &truth, 0, 0).unwrap();
        for v in [s.x_rms, s.rms_3d, s.mean, s.median, s.max_pos_err] {
            assert!((v - 3.0).abs() < 1e-12);
        }
        assert_eq!((s.y_rms, s.z_rms), (0.0, 0.0));
        assert!(s.sigma.abs() < 1e-12);
    }

    #[test]
    fn exact_track_has_zero_error() {
        let truth = truth_from(&[(0.0, Vec3::ZERO), (1.0, Vec3::new(1.0, 2.0, 0.0))]);
        let track = vec![EstimateSample {
            t: 1.0,
            position: Vec3::new(1.0, 2.0, 0.0),
            pec: 0.0,
        }];
        let s = compute_stats(&track, &truth, 0, 0).unwrap();
        assert_eq!(s.rms_3d, 0.0);
        assert_eq!(s.max_pos_err, 0.0);
        assert!(compute_stats(&[], &truth, 0, 0).is_err());
    }

    #[test]
    fn aggregate_mean_and_median() {
        let runs: Vec<RunStats> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&r| RunStats {
                rms_3d: r,
                ..Default::default()
            })
            .collect();
        let agg = aggregate_trials(&runs).unwrap();
        assert_eq!(agg.mean.rms_3d, 2.0);
        assert_eq!(agg.median.rms_3d, 2.0);
        let single = aggregate_trials(&runs[..1]).unwrap();
        assert_eq!(single.mean, single.median);
        assert!(aggregate_trials(&[]).is_err());
    }

    #[test]
    fn no_events_means_growing_covariance() {
        let plan = straight_plan();
        let model = BeliefModel::default();
        let truth = simulate_truth(&plan, model.ts(), &Jitter::NONE, 0, 0, 0);
        let run = run_online_ekf(&[], &truth, &plan, &model);
        assert!(run.track.windows(2).all(|w| w[1].pec > w[0].pec));
    }

    #[test]
    fn dropout_one_removes_camera_and_lidar() {
        let map = EnvironmentMap::tunnel_default();
        let plan = straight_plan();
        let model = BeliefModel::default();
        let truth = simulate_truth(&plan, model.ts(), &Jitter::NONE, 0, 0, 0);
        let opts = MeasurementOptions {
            dropout: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let events = synthesize_measurements(&truth, &map, &model, MeasurementMode::Noisy, &opts, &mut rng);
        assert!(events
            .iter()
            .any(|e| matches!(e.sensor, Sensor::Cam | Sensor::Lidar)));
        assert!(events
            .iter()
            .filter(|e| matches!(e.sensor, Sensor::Cam | Sensor::Lidar))
            .all(|e| e.dropped));
        let run = run_online_ekf(&events, &truth, &plan, &model);
        assert_eq!(run.cam_updates + run.lidar_updates, 0);
    }

    #[test]
    fn perfect_mode_is_exact_and_complete() {
        let map = EnvironmentMap::tunnel_default();
        let plan = straight_plan();
        let model = BeliefModel::default();
        let truth = simulate_truth(&plan, model.ts(), &Jitter::default(), 0, 0, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let events = synthesize_measurements(
            &truth,
            &map,
            &model,
            MeasurementMode::Perfect,
            &MeasurementOptions::default(),
            &mut rng,
        );
        for e in &events {
            assert!(!e.dropped);
            let p = truth.samples[e.step].position;
            match (e.sensor, e.value) {
                (Sensor::Uwb, MeasValue::Scalar(z)) => assert_eq!(z, p.norm()),
                (Sensor::Alt, MeasValue::Scalar(z)) => assert_eq!(z, -p.d),
                (Sensor::Lidar, MeasValue::Vector(z)) => assert_eq!(z, p.to_array()),
                (Sensor::Cam, MeasValue::Vector(z)) => {
                    assert!((Vec3::from(z) - p * (1.0 / p.norm())).norm() < 1e-15)
                }
                _ => panic!("payload mismatch"),
            }
        }
        let cam_ticks = (1..truth.samples.len())
            .filter(|&k| model.rates.fires(Sensor::Cam, k) && map.camera_sees(truth.samples[k].position))
            .count();
        assert_eq!(
            events.iter().filter(|e| e.sensor == Sensor::Cam).count(),
            cam_ticks
        );
    }

    #[test]
    fn gaussian3_matches_covariance() {
        let cov = Matrix3::new(2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40_000;
        let mut acc = Matrix3::zeros();
        for _ in 0..n {
            let v = sample_gaussian3(&cov, &mut rng);
            acc += v * v.transpose();
        }
        let emp = acc / n as f64;
        assert!((emp - cov).abs().max() < 0.06, "{emp}");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "noisy".parse::<MeasurementMode>().unwrap(),
            MeasurementMode::Noisy
        );
        assert!("loud".parse::<MeasurementMode>().is_err());
    }
}
