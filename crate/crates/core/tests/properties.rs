use std::collections::BTreeSet;

use covsearch::ekf::{self, Attitude, BeliefState, Covariance, NoiseConfig, StateVector};
use covsearch::euler::{self, Circuit};
use covsearch::map::{EnvironmentMap, TUNNEL_DEFAULT_TOML};
use covsearch::montecarlo::{self, EstimateSample, Jitter, TruthSample, TruthTrajectory};
use covsearch::planner::{self, BeliefModel, PathScore, SeriesStats};
use covsearch::roadmap::{self, ForwardBias, RoadmapGraph};
use covsearch::trajectory::FlightPlan;
use covsearch::Vec3;
use nalgebra::{SMatrix, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tunnel() -> EnvironmentMap {
    EnvironmentMap::tunnel_default()
}

fn open_map() -> EnvironmentMap {
    EnvironmentMap::from_toml_str("bounds_min = [-10.0, -10.0, -10.0]\nbounds_max = [10.0, 10.0, 0.0]\n")
        .unwrap()
}

fn point_near_tunnel() -> impl Strategy<Value = Vec3> {
    (-6.0..38.0f64, -7.0..7.0f64, -10.0..2.0f64).prop_map(|(n, e, d)| Vec3::new(n, e, d))
}

fn point_in_tunnel() -> impl Strategy<Value = Vec3> {
    (-3.5..35.5f64, -4.5..4.5f64, -7.5..-0.5f64).prop_map(|(n, e, d)| Vec3::new(n, e, d))
}

/// Random connected roadmap in an open box, Eulerized.
fn random_eulerian(seed: u64, n: usize, k: usize) -> Option<RoadmapGraph> {
    let map = open_map();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = roadmap::sample_nodes(&map, n, ForwardBias(1.0), &mut rng).ok()?;
    let g = roadmap::connect_knn(&nodes, k, &map).ok()?;
    roadmap::eulerize(&g, &map).ok()
}

fn edge_set(g: &RoadmapGraph) -> BTreeSet<([u64; 3], [u64; 3], u32)> {
    let key = |p: Vec3| p.to_array().map(f64::to_bits);
    g.edges
        .iter()
        .map(|e| {
            let (a, b) = (key(g.nodes[e.a.0]), key(g.nodes[e.b.0]));
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            (a, b, e.multiplicity)
        })
        .collect()
}

fn score_with_total(index: usize, total: f64) -> PathScore {
    PathScore {
        circuit_index: index,
        pec_series: Vec::new(),
        total,
        max_pec: 0.0,
        stats: SeriesStats::default(),
        cam_update_count: 0,
        lidar_update_count: 0,
        skipped_updates: 0,
        threshold_ok: None,
    }
}

/// Random SPD covariance: `A A^T + 0.01 I`.
fn spd(entries: &[f64]) -> Covariance {
    let a = Covariance::from_row_slice(entries);
    a * a.transpose() + Covariance::identity() * 0.01
}

fn state(v: [f64; 3], r: [f64; 3]) -> StateVector {
    StateVector::new(v[0], v[1], v[2], r[0], r[1], r[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // ---- map ----

    #[test]
    fn empty_map_free_iff_in_bounds(p in point_near_tunnel()) {
        let map = EnvironmentMap::from_toml_str(
            "bounds_min = [-4.0, -5.0, -8.0]\nbounds_max = [36.0, 5.0, 0.0]\n").unwrap();
        prop_assert_eq!(map.is_free(p), map.in_bounds(p));
    }

    #[test]
    fn segment_check_is_symmetric(a in point_near_tunnel(), b in point_near_tunnel()) {
        let map = tunnel();
        prop_assert_eq!(map.segment_is_free(a, b), map.segment_is_free(b, a));
        prop_assert_eq!(map.line_of_sight(a, b), map.line_of_sight(b, a));
    }

    #[test]
    fn free_segment_has_free_endpoints(a in point_in_tunnel(), b in point_in_tunnel()) {
        let map = tunnel();
        if map.segment_is_free(a, b) {
            prop_assert!(map.is_free(a) && map.is_free(b));
        }
    }

    #[test]
    fn smaller_margin_never_blocks(a in point_in_tunnel(), b in point_in_tunnel(), m in 0.0..1.0f64, shrink in 0.0..1.0f64) {
        let wide = tunnel().with_margin(m);
        let narrow = tunnel().with_margin(m * shrink);
        if wide.segment_is_free(a, b) {
            prop_assert!(narrow.segment_is_free(a, b));
        }
        if wide.is_free(a) {
            prop_assert!(narrow.is_free(a));
        }
    }

    #[test]
    fn visibility_is_pure(p in point_in_tunnel()) {
        let map = tunnel();
        prop_assert_eq!(map.camera_sees(p), map.camera_sees(p));
        prop_assert_eq!(map.lidar_sees(p), map.lidar_sees(p));
        prop_assert_eq!(map.camera_sees(p), map.clone().camera_sees(p));
    }

    // ---- roadmap ----

    #[test]
    fn eulerized_graph_is_even_connected_and_free(seed in any::<u64>(), n in 4usize..13, k in 1usize..5) {
        let map = tunnel();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = roadmap::sample_nodes(&map, n, ForwardBias(3.0), &mut rng).unwrap();
        let Ok(g) = roadmap::connect_knn(&nodes, k, &map) else { return Ok(()) };
        prop_assert!(g.is_connected());
        let e = roadmap::eulerize(&g, &map).unwrap();
        prop_assert!(e.is_connected());
        prop_assert!(e.degrees().iter().all(|d| d % 2 == 0));
        for edge in &e.edges {
            let (a, b) = (e.nodes[edge.a.0], e.nodes[edge.b.0]);
            prop_assert!(edge.a != edge.b);
            prop_assert!(map.segment_is_free(a, b));
            prop_assert!((edge.length - a.distance(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_ignores_node_order(seed in any::<u64>(), n in 3usize..10, k in 1usize..5, rot in 0usize..10) {
        let map = open_map();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = roadmap::sample_nodes(&map, n, ForwardBias(1.0), &mut rng).unwrap();
        let mut shuffled = nodes.clone();
        shuffled.rotate_left(rot % n);
        shuffled.reverse();
        let a = roadmap::connect_knn(&nodes, k, &map).unwrap();
        let b = roadmap::connect_knn(&shuffled, k, &map).unwrap();
        prop_assert_eq!(edge_set(&a), edge_set(&b));
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), n in 2usize..15) {
        let map = tunnel();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            roadmap::sample_nodes(&map, n, ForwardBias(3.0), &mut rng).unwrap()
        };
        let (a, b) = (draw(), draw());
        prop_assert_eq!(a.len(), n);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_array().map(f64::to_bits) == y.to_array().map(f64::to_bits)));
        prop_assert!(a.iter().all(|&p| map.is_free(p)));
    }

    // ---- Euler circuits ----

    #[test]
    fn circuits_cover_every_instance_once(seed in any::<u64>(), n in 4usize..13, k in 1usize..5) {
        let Some(g) = random_eulerian(seed, n, k) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let c = euler::random_euler_circuit(&g, &mut rng).unwrap();
        let instances: usize = g.edges.iter().map(|e| e.multiplicity as usize).sum();
        prop_assert_eq!(c.edge_refs.len(), instances);
        let distinct: BTreeSet<_> = c.edge_refs.iter().collect();
        prop_assert_eq!(distinct.len(), instances);
        prop_assert_eq!(c.nodes.first(), Some(&g.source));
        prop_assert_eq!(c.nodes.last(), Some(&g.source));
        for (i, r) in c.edge_refs.iter().enumerate() {
            let e = g.edges[r.edge];
            let (u, v) = (c.nodes[i], c.nodes[i + 1]);
            prop_assert!((e.a == u && e.b == v) || (e.a == v && e.b == u));
        }
    }

    #[test]
    fn candidates_have_equal_cost_and_repeat(seed in any::<u64>(), n in 4usize..10) {
        let Some(g) = random_eulerian(seed, n, 3) else { return Ok(()) };
        let a = euler::generate_candidates(&g, 12, seed).unwrap();
        let b = euler::generate_candidates(&g, 12, seed).unwrap();
        prop_assert_eq!(euler::candidates_to_json(&a, 0.5), euler::candidates_to_json(&b, 0.5));
        let len0 = a[0].circuit.length;
        prop_assert!(a.iter().all(|c| (c.circuit.length - len0).abs() <= 1e-9));
    }

    // ---- filter ----

    #[test]
    fn jacobians_match_finite_differences(
        v in prop::array::uniform3(-2.0..2.0f64),
        n in 0.5..30.0f64, e in -5.0..5.0f64, d in -8.0..-0.5f64,
        pitch in -0.6..0.6f64, roll in -0.6..0.6f64,
    ) {
        let x = state(v, [n, e, d]);
        let att = Attitude { pitch, roll };
        fn fd<const M: usize>(x: &StateVector, f: impl Fn(&StateVector) -> SMatrix<f64, M, 1>) -> SMatrix<f64, M, 6> {
            let mut j = SMatrix::<f64, M, 6>::zeros();
            for i in 0..6 {
                let h = 1e-6 * x[i].abs().max(1.0);
                let (mut a, mut b) = (*x, *x);
                a[i] += h;
                b[i] -= h;
                j.set_column(i, &((f(&a) - f(&b)) / (2.0 * h)));
            }
            j
        }
        fn rel<const M: usize>(a: SMatrix<f64, M, 6>, b: SMatrix<f64, M, 6>) -> f64 {
            (a - b).abs().max() / a.abs().max().max(1e-12)
        }
        let alt = fd(&x, |s| SMatrix::<f64, 1, 1>::new(ekf::altimeter_predict(s, att).unwrap()));
        let uwb = fd(&x, |s| SMatrix::<f64, 1, 1>::new(ekf::uwb_predict(s).unwrap()));
        let cam = fd(&x, |s| ekf::camera_predict(s).unwrap());
        prop_assert!(rel(ekf::altimeter_jacobian(att).unwrap(), alt) < 1e-5);
        prop_assert!(rel(ekf::uwb_jacobian(&x).unwrap(), uwb) < 1e-5);
        prop_assert!(rel(ekf::camera_jacobian(&x).unwrap(), cam) < 1e-5);
        prop_assert!(rel(ekf::lidar_jacobian(), fd(&x, ekf::lidar_predict)) < 1e-5);
    }

    #[test]
    fn updates_shrink_trace_and_larger_noise_shrinks_less(
        a in prop::collection::vec(-1.0..1.0f64, 36),
        r in prop::array::uniform3(-8.0..8.0f64),
        dz in prop::array::uniform3(-0.5..0.5f64),
        scale in 1.0..50.0f64,
    ) {
        let mut b = BeliefState::at_rest(Vector3::new(r[0] + 10.0, r[1], r[2].min(-1.0)));
        b.p = spd(&a);
        let cfg = NoiseConfig::default();
        let mut loose = cfg.clone();
        loose.r_alt *= scale;
        loose.r_uwb *= scale;
        loose.r_cam *= scale;
        loose.r_lidar *= scale;
        let z3 = b.position() + Vector3::from(dz);
        let att = Attitude::default();
        let z_alt = -b.x[5] + dz[0];
        let z_uwb = b.position().norm() + dz[1];
        let z_cam = (b.position() / b.position().norm() + Vector3::from(dz) * 0.01).normalize();
        let pairs = [
            (ekf::altimeter_update(&b, z_alt, att, &cfg), ekf::altimeter_update(&b, z_alt, att, &loose)),
            (ekf::uwb_update(&b, z_uwb, &cfg), ekf::uwb_update(&b, z_uwb, &loose)),
            (ekf::camera_update(&b, &z_cam, &cfg), ekf::camera_update(&b, &z_cam, &loose)),
            (ekf::lidar_update(&b, &z3, 2.0, &cfg), ekf::lidar_update(&b, &z3, 2.0, &loose)),
        ];
        let tol = 1e-9 * b.p.trace();
        for (tight, wide) in pairs {
            let (tight, wide) = (tight.unwrap(), wide.unwrap());
            prop_assert!(tight.p.trace() <= b.p.trace() + tol);
            prop_assert!(wide.p.trace() <= b.p.trace() + tol);
            prop_assert!(tight.p.trace() <= wide.p.trace() + tol);
        }
    }

    #[test]
    fn covariance_stays_healthy(
        ops in prop::collection::vec((0usize..5, prop::array::uniform3(-1.0..1.0f64)), 1..400),
    ) {
        let cfg = NoiseConfig::default();
        let att = Attitude { pitch: 0.1, roll: 0.05 };
        let mut b = BeliefState::at_rest(Vector3::new(6.0, 1.0, -3.0));
        for (op, w) in ops {
            let w = Vector3::from(w);
            let next = match op {
                0 => {
                    b.set_velocity(w * 0.5);
                    Ok(ekf::predict(&b, &cfg))
                }
                1 => ekf::altimeter_update(&b, -b.x[5] + 0.1 * w[0], att, &cfg),
                2 => ekf::uwb_update(&b, b.position().norm() + 0.1 * w[1], &cfg),
                3 => ekf::camera_update(&b, &(b.position().normalize() + w * 0.01), &cfg),
                _ => ekf::lidar_update(&b, &(b.position() + w * 0.15), 1.0 + w[2].abs() * 10.0, &cfg),
            };
            if let Ok(post) = next {
                b = post;
            }
            prop_assert!(b.asymmetry() <= 1e-9);
            prop_assert!(b.min_eigenvalue() >= -1e-9);
        }
    }

    // ---- planner ----

    #[test]
    fn ranking_brackets_every_score(totals in prop::collection::vec(0u32..50, 1..40)) {
        let scores: Vec<PathScore> = totals.iter().enumerate().map(|(i, &t)| score_with_total(i, t as f64)).collect();
        let r = planner::score_and_select(&scores).unwrap();
        let (best, worst) = (scores[r.best].total, scores[r.worst].total);
        prop_assert!(scores.iter().all(|s| best <= s.total && s.total <= worst));
        // ties go to the lower index
        prop_assert_eq!(r.best, scores.iter().position(|s| s.total == best).unwrap());
        prop_assert_eq!(r.worst, scores.iter().position(|s| s.total == worst).unwrap());
        prop_assert_eq!(r.order.len(), scores.len());
        if let Some(sb) = r.second_best {
            prop_assert!(sb != r.best && scores[sb].total >= best);
        }
    }

    #[test]
    fn series_stats_are_consistent(values in prop::collection::vec(-1e3..1e3f64, 1..200)) {
        let s = SeriesStats::of(&values);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(lo <= s.median && s.median <= s.max);
        prop_assert!(s.mean <= s.max + 1e-9);
        prop_assert!(s.sigma >= 0.0 && s.rms + 1e-9 >= s.mean.abs());
    }

    // ---- Monte Carlo ----

    #[test]
    fn run_stats_add_up(errs in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 1..300)) {
        let truth = TruthTrajectory {
            samples: (0..=errs.len())
                .map(|k| TruthSample { t: k as f64 * 0.02, position: Vec3::new(k as f64 * 0.01, 0.0, -2.0), velocity: Vec3::ZERO })
                .collect(),
            circuit_index: 0,
            run: 0,
            seed: 0,
        };
        let track: Vec<EstimateSample> = errs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let k = i + 1;
                EstimateSample { t: k as f64 * 0.02, position: truth.samples[k].position + Vec3::from(*e), pec: 1.0 }
            })
            .collect();
        let s = montecarlo::compute_stats(&track, &truth, 0, 0).unwrap();
        let sum = s.x_rms.powi(2) + s.y_rms.powi(2) + s.z_rms.powi(2);
        prop_assert!((s.rms_3d.powi(2) - sum).abs() <= 1e-9 * sum.max(1e-300));
        prop_assert!(s.max_pos_err >= s.mean && s.mean >= 0.0);
    }

    #[test]
    fn truth_time_increases_and_ends_home(seed in any::<u64>(), sigma in 0.0..0.6f64, speed_sigma in 0.0..0.2f64) {
        let plan = FlightPlan::new(
            vec![Vec3::new(1.0, 0.0, -1.0), Vec3::new(6.0, 2.0, -3.0), Vec3::new(9.0, -1.0, -2.0), Vec3::new(1.0, 0.0, -1.0)],
            0.5,
        );
        let jitter = Jitter { cross_track_sigma_m: sigma, speed_sigma_mps: speed_sigma, tau_s: 2.0 };
        let truth = montecarlo::simulate_truth(&plan, 0.02, &jitter, 0, 0, seed);
        prop_assert!(truth.samples.windows(2).all(|w| w[1].t > w[0].t));
        let end = truth.samples.last().unwrap().position;
        prop_assert!(end.distance(Vec3::new(1.0, 0.0, -1.0)) <= 6.0 * sigma + 1e-9);
        // never stalls: at least 10% of cruise on average
        prop_assert!(truth.flight_time() <= plan.duration() / 0.1 + 0.02);
    }
}

// Slower planner properties with fewer cases.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extra_sensor_never_raises_pec(seed in any::<u64>()) {
        let full = tunnel();
        let no_cam = EnvironmentMap::from_toml_str(
            &TUNNEL_DEFAULT_TOML.replace("camera_max_range_m = 6.0", "camera_max_range_m = 0.001")).unwrap();
        let no_lidar = EnvironmentMap::from_toml_str(
            &TUNNEL_DEFAULT_TOML.replace("lidar_max_range_m = 50.0", "lidar_max_range_m = 0.001")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = roadmap::sample_nodes(&full, 5, ForwardBias(3.0), &mut rng).unwrap();
        let Ok(g) = roadmap::connect_knn(&nodes, 3, &full) else { return Ok(()) };
        let g = roadmap::eulerize(&g, &full).unwrap();
        let c: Circuit = euler::random_euler_circuit(&g, &mut rng).unwrap();
        let model = BeliefModel::default();
        let with = planner::propagate_path(0, &c, &g, &full, &model).unwrap();
        for reduced in [&no_cam, &no_lidar] {
            let without = planner::propagate_path(0, &c, &g, reduced, &model).unwrap();
            prop_assert_eq!(with.pec_series.len(), without.pec_series.len());
            for (a, b) in with.pec_series.iter().zip(&without.pec_series) {
                prop_assert!(a.pec <= b.pec * (1.0 + 1e-9) + 1e-12);
            }
            prop_assert!(with.total <= without.total * (1.0 + 1e-9));
        }
    }

    #[test]
    fn scoring_is_deterministic_and_sized(seed in any::<u64>()) {
        let map = tunnel();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = roadmap::sample_nodes(&map, 4, ForwardBias(3.0), &mut rng).unwrap();
        let Ok(g) = roadmap::connect_knn(&nodes, 2, &map) else { return Ok(()) };
        let g = roadmap::eulerize(&g, &map).unwrap();
        let c = euler::random_euler_circuit(&g, &mut rng).unwrap();
        let model = BeliefModel::default();
        let a = planner::propagate_path(3, &c, &g, &map, &model).unwrap();
        let b = planner::propagate_path(3, &c, &g, &map, &model).unwrap();
        prop_assert_eq!(&a, &b);
        let expected = (c.length / model.kin.cruise * model.rates.predict_hz).floor() as i64;
        prop_assert!((a.pec_series.len() as i64 - expected).abs() <= 1);
        let sum: f64 = a.pec_series.iter().map(|s| s.pec).sum();
        prop_assert_eq!(a.total, sum);
    }
}

#[test]
fn camera_noise_grows_toward_the_horizon() {
    let high = state([0.0; 3], [3.0, 0.0, -3.0]);
    let low = state([0.0; 3], [3.0, 0.0, -0.5]);
    assert!(ekf::camera_noise_scale(&low).unwrap() > ekf::camera_noise_scale(&high).unwrap());
    let flat = state([0.0; 3], [3.0, 0.0, -0.01]);
    assert!(ekf::camera_noise_scale(&flat).is_err());
}
