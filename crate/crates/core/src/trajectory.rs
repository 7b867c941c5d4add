//! Nominal flight along a circuit and the sensor clock.
//!
//! Both the planner and the Monte Carlo replay walk the same timeline:
//! step `k` ends at `t_k = k * ts`, and each sensor fires on the steps where
//! its own fixed-rate clock (phase zero at takeoff) ticks.

use serde::{Deserialize, Serialize};

use crate::euler::Circuit;
use crate::geometry::Vec3;
use crate::roadmap::RoadmapGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    Alt,
    Uwb,
    Cam,
    Lidar,
}

impl Sensor {
    /// Order in which updates are applied within one step.
    pub const ALL: [Sensor; 4] = [Sensor::Alt, Sensor::Uwb, Sensor::Cam, Sensor::Lidar];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSchedule {
    pub predict_hz: f64,
    pub alt_hz: f64,
    pub uwb_hz: f64,
    pub cam_hz: f64,
    pub lidar_hz: f64,
}

impl Default for RateSchedule {
    fn default() -> Self {
        RateSchedule {
            predict_hz: 50.0,
            alt_hz: 5.0,
            uwb_hz: 10.0,
            cam_hz: 10.0,
            lidar_hz: 10.0,
        }
    }
}

impl RateSchedule {
    pub fn validate(&self) -> Result<(), String> {
        let rates = [
            ("predict_hz", self.predict_hz),
            ("alt_hz", self.alt_hz),
            ("uwb_hz", self.uwb_hz),
            ("cam_hz", self.cam_hz),
            ("lidar_hz", self.lidar_hz),
        ];
        for (name, r) in rates {
            if !(r.is_finite() && r > 0.0) {
                return Err(format!("{name} must be positive, got {r}"));
            }
            if r > self.predict_hz {
                return Err(format!("{name} ({r} Hz) exceeds the prediction rate"));
            }
        }
        Ok(())
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.predict_hz
    }

    pub fn rate(&self, sensor: Sensor) -> f64 {
        match sensor {
            Sensor::Alt => self.alt_hz,
            Sensor::Uwb => self.uwb_hz,
            Sensor::Cam => self.cam_hz,
            Sensor::Lidar => self.lidar_hz,
        }
    }

    /// Whether `sensor` ticks during prediction step `k` (1-based).
    pub fn fires(&self, sensor: Sensor, k: usize) -> bool {
        if k == 0 {
            return false;
        }
        let per_step = self.rate(sensor) / self.predict_hz;
        let ticks = |k: usize| (k as f64 * per_step + 1e-9).floor();
        ticks(k) > ticks(k - 1)
    }
}

/// Straight-line waypoint following at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlan {
    waypoints: Vec<Vec3>,
    /// cumulative arc length at each waypoint
    arc: Vec<f64>,
    cruise: f64,
}

impl FlightPlan {
    pub fn new(waypoints: Vec<Vec3>, cruise: f64) -> Self {
        assert!(!waypoints.is_empty(), "flight plan needs at least one waypoint");
        assert!(cruise > 0.0, "cruise speed must be positive");
        let mut arc = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        arc.push(0.0);
        for w in waypoints.windows(2) {
            acc += w[0].distance(w[1]);
            arc.push(acc);
        }
        FlightPlan {
            waypoints,
            arc,
            cruise,
        }
    }

    pub fn from_circuit(circuit: &Circuit, graph: &RoadmapGraph, cruise: f64) -> Self {
        let waypoints = circuit.nodes.iter().map(|&n| graph.position(n)).collect();
        FlightPlan::new(waypoints, cruise)
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn cruise(&self) -> f64 {
        self.cruise
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("non-empty")
    }

    pub fn duration(&self) -> f64 {
        self.length() / self.cruise
    }

    /// Number of prediction steps needed to cover the whole plan.
    pub fn step_count(&self, ts: f64) -> usize {
        let steps = self.duration() / ts;
        if steps <= 0.0 {
            0
        } else {
            (steps - 1e-9).ceil() as usize
        }
    }

    fn segment_at(&self, s: f64) -> usize {
        // last segment whose start is <= s
        let idx = self.arc.partition_point(|&a| a <= s);
        idx.saturating_sub(1).min(self.waypoints.len().saturating_sub(2))
    }

    pub fn position_at_arclength(&self, s: f64) -> Vec3 {
        if self.waypoints.len() == 1 || s <= 0.0 {
            return self.waypoints[0];
        }
        if s >= self.length() {
            return *self.waypoints.last().expect("non-empty");
        }
        let i = self.segment_at(s);
        let span = self.arc[i + 1] - self.arc[i];
        self.waypoints[i].lerp(self.waypoints[i + 1], (s - self.arc[i]) / span)
    }

    /// Unit travel direction at arc length `s` (zero when stationary).
    pub fn direction_at_arclength(&self, s: f64) -> Vec3 {
        if self.waypoints.len() == 1 {
            return Vec3::ZERO;
        }
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        (self.waypoints[i + 1] - self.waypoints[i])
            .normalized()
            .unwrap_or(Vec3::ZERO)
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        self.position_at_arclength(self.cruise * t)
    }

    pub fn step_time(k: usize, ts: f64) -> f64 {
        k as f64 * ts
    }

    /// Velocity that carries the vehicle from the plan position at step
    /// `k - 1` to the plan position at step `k`. Equal to direction times
    /// cruise except on steps that round a waypoint.
    pub fn step_velocity(&self, k: usize, ts: f64) -> Vec3 {
        let a = self.position_at(Self::step_time(k.saturating_sub(1), ts));
        let b = self.position_at(Self::step_time(k, ts));
        (b - a) * (1.0 / ts)
    }
}
