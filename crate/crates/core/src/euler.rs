//! Randomized Eulerian circuits (Chinese Postman solutions on an Eulerized
//! roadmap).
//!
//! A circuit is built the way Hierholzer's construction does by hand: walk
//! from the source choosing uniformly among unused incident edge copies
//! until stuck (which can only happen back at the start vertex), then pick
//! the first vertex on the trail that still has unused edges, walk a
//! sub-circuit from it and splice that in at its first occurrence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roadmap::{NodeId, RoadmapGraph};
use crate::seed::derive_seed;

/// One copy of a (possibly multiplied) roadmap edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub edge: usize,
    pub copy: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub nodes: Vec<NodeId>,
    pub edge_refs: Vec<EdgeRef>,
    pub length: f64,
}

impl Circuit {
    pub fn flight_time(&self, cruise: f64) -> f64 {
        self.length / cruise
    }

    /// The trivial circuit that never leaves the source.
    pub fn stationary(source: NodeId) -> Self {
        Circuit {
            nodes: vec![source],
            edge_refs: Vec::new(),
            length: 0.0,
        }
    }

    /// Check the circuit against `graph`: adjacency, exact edge coverage and
    /// closure at the source.
    pub fn validate(&self, graph: &RoadmapGraph) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCircuit(m));
        if self.nodes.first() != Some(&graph.source) || self.nodes.last() != Some(&graph.source) {
            return bad("circuit must start and end at the source".into());
        }
        if self.nodes.len() != self.edge_refs.len() + 1 {
            return bad("node and edge sequences disagree in length".into());
        }
        if let Some(n) = self.nodes.iter().find(|n| n.0 >= graph.nodes.len()) {
            return bad(format!("node {} out of range", n.0));
        }
        let mut used: Vec<Vec<bool>> = graph
            .edges
            .iter()
            .map(|e| vec![false; e.multiplicity as usize])
            .collect();
        for (step, r) in self.edge_refs.iter().enumerate() {
            let Some(edge) = graph.edges.get(r.edge) else {
                return bad(format!("step {step} references missing edge {}", r.edge));
            };
            let (u, v) = (self.nodes[step], self.nodes[step + 1]);
            if !((edge.a == u && edge.b == v) || (edge.a == v && edge.b == u)) {
                return bad(format!("step {step} does not follow edge {}", r.edge));
            }
            let Some(slot) = used[r.edge].get_mut(r.copy as usize) else {
                return bad(format!("step {step} uses a missing copy of edge {}", r.edge));
            };
            if *slot {
                return bad(format!("edge {} copy {} used twice", r.edge, r.copy));
            }
            *slot = true;
        }
        if self.edge_refs.len() != graph.edge_instance_count() {
            return bad(format!(
                "circuit uses {} of {} edge instances",
                self.edge_refs.len(),
                graph.edge_instance_count()
            ));
        }
        Ok(())
    }
}

fn check_eulerian(graph: &RoadmapGraph) -> Result<()> {
    if let Some((i, d)) = graph.degrees().iter().enumerate().find(|(_, d)| *d % 2 == 1) {
        return Err(Error::NotEulerian(format!("node {i} has odd degree {d}")));
    }
    if !graph.is_connected() {
        return Err(Error::NotEulerian("graph is disconnected".into()));
    }
    Ok(())
}

struct Walker {
    /// incident edge instances per node: (instance index, other endpoint)
    incident: Vec<Vec<(usize, usize)>>,
    instances: Vec<EdgeRef>,
    used: Vec<bool>,
    remaining: Vec<usize>,
}

impl Walker {
    fn new(graph: &RoadmapGraph) -> Self {
        let mut incident = vec![Vec::new(); graph.nodes.len()];
        let mut instances = Vec::new();
        for (idx, e) in graph.edges.iter().enumerate() {
            for copy in 0..e.multiplicity {
                let id = instances.len();
                instances.push(EdgeRef { edge: idx, copy });
                incident[e.a.0].push((id, e.b.0));
                incident[e.b.0].push((id, e.a.0));
            }
        }
        let remaining = incident.iter().map(Vec::len).collect();
        Walker {
            used: vec![false; instances.len()],
            incident,
            instances,
            remaining,
        }
    }

    /// Random closed walk from `start`; returns (nodes, instance ids).
    fn walk<R: Rng + ?Sized>(&mut self, start: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let mut nodes = vec![start];
        let mut steps = Vec::new();
        let mut at = start;
        while self.remaining[at] > 0 {
            let pick = rng.random_range(0..self.remaining[at]);
            let (inst, next) = self.incident[at]
                .iter()
                .copied()
                .filter(|(i, _)| !self.used[*i])
                .nth(pick)
                .expect("remaining count matches unused incidences");
            self.used[inst] = true;
            self.remaining[at] -= 1;
            self.remaining[next] -= 1;
            steps.push(inst);
            nodes.push(next);
            at = next;
        }
        (nodes, steps)
    }
}

pub fn random_euler_circuit<R: Rng + ?Sized>(graph: &RoadmapGraph, rng: &mut R) -> Result<Circuit> {
    check_eulerian(graph)?;
    let source = graph.source.0;
    let mut walker = Walker::new(graph);
    let (mut nodes, mut steps) = walker.walk(source, rng);
    while let Some(pos) = nodes.iter().position(|&n| walker.remaining[n] > 0) {
        let (sub_nodes, sub_steps) = walker.walk(nodes[pos], rng);
        // sub_nodes starts and ends at nodes[pos]; replace that occurrence.
        nodes.splice(pos..=pos, sub_nodes);
        steps.splice(pos..pos, sub_steps);
    }
    let length = steps
        .iter()
        .map(|&i| graph.edges[walker.instances[i].edge].length)
        .sum();
    Ok(Circuit {
        nodes: nodes.into_iter().map(NodeId).collect(),
        edge_refs: steps.into_iter().map(|i| walker.instances[i]).collect(),
        length,
    })
}

/// One candidate coverage flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub run: usize,
    pub circuit: Circuit,
    /// Earlier run that produced the identical circuit, if any.
    pub duplicate_of: Option<usize>,
}

impl Candidate {
    pub fn is_duplicate(&self) -> bool {
        self.duplicate_of.is_some()
    }
}

/// Run the randomized solver `count` times. Run `i` draws from its own
/// stream derived from `seed` and `i`, so the list does not depend on how
/// the runs are scheduled.
pub fn generate_candidates(graph: &RoadmapGraph, count: usize, seed: u64) -> Result<Vec<Candidate>> {
    check_eulerian(graph)?;
    let circuits: Vec<Circuit> = (0..count)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xC1C, run as u64]));
            random_euler_circuit(graph, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Candidate> = Vec::with_capacity(count);
    for (run, circuit) in circuits.into_iter().enumerate() {
        let duplicate_of = out
            .iter()
            .find(|c| c.duplicate_of.is_none() && c.circuit.edge_refs == circuit.edge_refs)
            .map(|c| c.run);
        out.push(Candidate {
            run,
            circuit,
            duplicate_of,
        });
    }
    Ok(out)
}

/// Keep circuits whose flight time `length / cruise` is strictly below `rho`.
pub fn filter_by_flight_time(candidates: &[Candidate], rho: f64, cruise: f64) -> Vec<Candidate> {
    candidates
        .iter()
        .filter(|c| c.circuit.flight_time(cruise) < rho)
        .cloned()
        .collect()
}

/// Serialized form of a candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub run: usize,
    pub nodes: Vec<NodeId>,
    pub edge_refs: Vec<EdgeRef>,
    pub length_m: f64,
    pub flight_time_s: f64,
    pub duplicate: bool,
    pub duplicate_of: Option<usize>,
}

pub fn candidates_to_json(candidates: &[Candidate], cruise: f64) -> String {
    let records: Vec<CandidateRecord> = candidates
        .iter()
        .map(|c| CandidateRecord {
            run: c.run,
            nodes: c.circuit.nodes.clone(),
            edge_refs: c.circuit.edge_refs.clone(),
            length_m: c.circuit.length,
            flight_time_s: c.circuit.flight_time(cruise),
            duplicate: c.is_duplicate(),
            duplicate_of: c.duplicate_of,
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("candidates serialize")
}

/// Parse an exported candidate list. Circuits are checked against `graph`
/// when one is given.
pub fn candidates_from_json(text: &str, graph: Option<&RoadmapGraph>) -> Result<Vec<Candidate>> {
    let records: Vec<CandidateRecord> =
        serde_json::from_str(text).map_err(|e| Error::parse("candidate list", e))?;
    records
        .into_iter()
        .map(|r| {
            if !r.length_m.is_finite() || r.length_m < 0.0 {
                return Err(Error::InvalidCircuit(format!("run {} has bad length", r.run)));
            }
            let circuit = Circuit {
                nodes: r.nodes,
                edge_refs: r.edge_refs,
                length: r.length_m,
            };
            if let Some(g) = graph {
                circuit.validate(g)?;
            }
            Ok(Candidate {
                run: r.run,
                circuit,
                duplicate_of: r.duplicate_of,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::roadmap::Edge;

    fn graph(positions: &[Vec3], edges: &[(usize, usize, u32)]) -> RoadmapGraph {
        RoadmapGraph {
            nodes: positions.to_vec(),
            edges: edges
                .iter()
                .map(|&(a, b, m)| Edge {
                    a: NodeId(a),
                    b: NodeId(b),
                    length: positions[a].distance(positions[b]),
                    multiplicity: m,
                })
                .collect(),
            source: NodeId(0),
        }
    }

    fn triangle() -> RoadmapGraph {
        graph(
            &[
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(3.0, 0.0, 0.0),
                Vec3::new(0.0, 4.0, 0.0),
            ],
            &[(0, 1, 1), (0, 2, 1), (1, 2, 1)],
        )
    }

    #[test]
    fn triangle_circuit_has_perimeter_length() {
        let g = triangle();
        let c = random_euler_circuit(&g, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(c.edge_refs.len(), 3);
        assert_eq!(c.nodes.len(), 4);
        assert!((c.length - 12.0).abs() < 1e-12);
        c.validate(&g).unwrap();
    }

    #[test]
    fn doubled_edge_goes_out_and_back() {
        let g = graph(
            &[Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            &[(0, 1, 2)],
        );
        let c = random_euler_circuit(&g, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(c.nodes, vec![NodeId(0), NodeId(1), NodeId(0)]);
        c.validate(&g).unwrap();
    }

    #[test]
    fn odd_degree_is_rejected() {
        let g = graph(
            &[Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            &[(0, 1, 1)],
        );
        assert!(matches!(
            random_euler_circuit(&g, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::NotEulerian(_))
        ));
    }

    #[test]
    fn disconnected_is_rejected() {
        let p = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(6.0, 0.0, 0.0),
        ];
        let g = graph(&p, &[(0, 1, 2), (2, 3, 2)]);
        assert!(matches!(
            generate_candidates(&g, 3, 1),
            Err(Error::NotEulerian(_))
        ));
    }

    #[test]
    fn bowtie_requires_splicing() {
        // two triangles sharing node 0, plus a third through node 2
        let p = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, -1.0, 0.0),
            Vec3::new(-1.0, 1.0, 0.0),
            Vec3::new(-1.0, -1.0, 0.0),
            Vec3::new(2.0, -2.0, 0.0),
            Vec3::new(0.0, -2.0, 0.0),
        ];
        let g = graph(
            &p,
            &[
                (0, 1, 1),
                (1, 2, 1),
                (0, 2, 1),
                (0, 3, 1),
                (3, 4, 1),
                (0, 4, 1),
                (2, 5, 1),
                (5, 6, 1),
                (2, 6, 1),
            ],
        );
        for seed in 0..50 {
            let c = random_euler_circuit(&g, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            c.validate(&g).unwrap();
        }
    }

    #[test]
    fn candidate_counts_and_equal_lengths() {
        let g = triangle();
        assert!(generate_candidates(&g, 0, 1).unwrap().is_empty());
        assert_eq!(generate_candidates(&g, 1, 1).unwrap().len(), 1);
        let many = generate_candidates(&g, 20, 1).unwrap();
        assert_eq!(many.len(), 20);
        // A triangle has two orientations, so duplicates must appear.
        assert!(many.iter().any(Candidate::is_duplicate));
        for c in &many {
            assert!((c.circuit.length - many[0].circuit.length).abs() < 1e-12);
        }
    }

    #[test]
    fn candidate_generation_is_seed_deterministic() {
        let g = triangle();
        let a = generate_candidates(&g, 10, 42).unwrap();
        let b = generate_candidates(&g, 10, 42).unwrap();
        assert_eq!(candidates_to_json(&a, 0.5), candidates_to_json(&b, 0.5));
    }

    #[test]
    fn flight_time_filter() {
        let g = graph(
            &[Vec3::new(0.0, 0.0, 0.0), Vec3::new(39.675, 0.0, 0.0)],
            &[(0, 1, 2)],
        );
        let cands = generate_candidates(&g, 1, 0).unwrap();
        assert!((cands[0].circuit.length - 79.35).abs() < 1e-12);
        assert!((cands[0].circuit.flight_time(0.5) - 158.7).abs() < 1e-9);
        assert_eq!(filter_by_flight_time(&cands, 158.8, 0.5).len(), 1);
        assert!(filter_by_flight_time(&cands, 158.6, 0.5).is_empty());
        assert!(filter_by_flight_time(&cands, 0.001, 0.5).is_empty());
    }

    #[test]
    fn json_round_trip_validates_against_graph() {
        let g = triangle();
        let cands = generate_candidates(&g, 4, 9).unwrap();
        let text = candidates_to_json(&cands, 0.5);
        assert_eq!(candidates_from_json(&text, Some(&g)).unwrap(), cands);
        let mut other = g.clone();
        other.edges[0].multiplicity = 3;
        assert!(candidates_from_json(&text, Some(&other)).is_err());
    }
}
