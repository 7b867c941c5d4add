//! Probabilistic roadmap over the tunnel free space, plus Eulerization.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::map::EnvironmentMap;

/// Rejection-sampling attempt budget for [`sample_nodes`].
pub const SAMPLING_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

/// An undirected edge, stored with `a < b`. `multiplicity` counts parallel
/// copies produced by Eulerization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(rename = "i")]
    pub a: NodeId,
    #[serde(rename = "j")]
    pub b: NodeId,
    pub length: f64,
    pub multiplicity: u32,
}

impl Edge {
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadmapGraph {
    pub nodes: Vec<Vec3>,
    pub edges: Vec<Edge>,
    pub source: NodeId,
}

/// Relative acceptance weight of points ahead of the UGV versus behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardBias(pub f64);

impl Default for ForwardBias {
    fn default() -> Self {
        ForwardBias(3.0)
    }
}

/// Draw `n` collision-free waypoints. The first one is the UAV deployment
/// point next to the UGV; the rest are uniform in the (margin-inset) tunnel,
/// with points behind the UGV accepted only with probability `1 / bias`.
pub fn sample_nodes<R: Rng + ?Sized>(
    map: &EnvironmentMap,
    n: usize,
    bias: ForwardBias,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    if n < 2 {
        return Err(Error::Config(format!("node count must be at least 2, got {n}")));
    }
    if !(bias.0.is_finite() && bias.0 >= 1.0) {
        return Err(Error::Config(format!(
            "forward bias must be >= 1, got {}",
            bias.0
        )));
    }
    let source = map.rig.deploy_point();
    if !map.is_free(source) {
        return Err(Error::SamplingExhausted {
            attempts: 0,
            found: 0,
            requested: n,
        });
    }
    let inset = map.collision_margin;
    let lo = map.bounds_min + Vec3::new(inset, inset, inset);
    let hi = map.bounds_max - Vec3::new(inset, inset, inset);
    if !lo.le(hi) {
        return Err(Error::SamplingExhausted {
            attempts: 0,
            found: 1,
            requested: n,
        });
    }
    let draw = |rng: &mut R, a: f64, b: f64| if a < b { rng.random_range(a..b) } else { a };
    let rear_accept = 1.0 / bias.0;
    let mut nodes = vec![source];
    let mut attempts = 0;
    while nodes.len() < n {
        if attempts == SAMPLING_ATTEMPTS {
            return Err(Error::SamplingExhausted {
                attempts,
                found: nodes.len(),
                requested: n,
            });
        }
        attempts += 1;
        let p = Vec3::new(
            draw(rng, lo.n, hi.n),
            draw(rng, lo.e, hi.e),
            draw(rng, lo.d, hi.d),
        );
        // Always consume the acceptance draw so the stream layout does not
        // depend on which branch is taken.
        let u: f64 = rng.random();
        if !map.is_free(p) {
            continue;
        }
        if p.n <= map.rig.position.n && u >= rear_accept {
            continue;
        }
        nodes.push(p);
    }
    Ok(nodes)
}

fn canonical(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connect each node to those of its `k` nearest neighbours reachable by a
/// collision-free segment, then bridge any remaining components with the
/// shortest free cross-component edge. Node 0 becomes the source.
pub fn connect_knn(nodes: &[Vec3], k: usize, map: &EnvironmentMap) -> Result<RoadmapGraph> {
    if k == 0 {
        return Err(Error::Config("knn k must be at least 1".into()));
    }
    if nodes.is_empty() {
        return Err(Error::EmptyInput("roadmap nodes"));
    }
    let count = nodes.len();
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..count {
        let mut others: Vec<(f64, usize)> = (0..count)
            .filter(|&j| j != i)
            .map(|j| (nodes[i].distance(nodes[j]), j))
            .collect();
        others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(dist, j) in others.iter().take(k) {
            let key = canonical(i, j);
            if pairs.contains_key(&key) {
                continue;
            }
            if map.segment_is_free(nodes[i], nodes[j]) {
                pairs.insert(key, dist);
            }
        }
    }

    let mut dsu = DisjointSet::new(count);
    for &(a, b) in pairs.keys() {
        dsu.union(a, b);
    }
    loop {
        let roots: std::collections::BTreeSet<usize> = (0..count).map(|i| dsu.find(i)).collect();
        if roots.len() <= 1 {
            break;
        }
        let mut bridge: Option<(f64, usize, usize)> = None;
        for i in 0..count {
            for j in (i + 1)..count {
                if dsu.find(i) == dsu.find(j) {
                    continue;
                }
                let dist = nodes[i].distance(nodes[j]);
                if bridge.is_some_and(|(best, _, _)| dist >= best) {
                    continue;
                }
                if map.segment_is_free(nodes[i], nodes[j]) {
                    bridge = Some((dist, i, j));
                }
            }
        }
        match bridge {
            Some((dist, i, j)) => {
                pairs.insert((i, j), dist);
                dsu.union(i, j);
            }
            None => {
                return Err(Error::Disconnected {
                    components: roots.len(),
                })
            }
        }
    }

    let edges = pairs
        .into_iter()
        .map(|((a, b), length)| Edge {
            a: NodeId(a),
            b: NodeId(b),
            length,
            multiplicity: 1,
        })
        .collect();
    Ok(RoadmapGraph {
        nodes: nodes.to_vec(),
        edges,
        source: NodeId(0),
    })
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadmapGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct undirected node pairs.
    pub fn distinct_edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of edge instances, counting multiplicity.
    pub fn edge_instance_count(&self) -> usize {
        self.edges.iter().map(|e| e.multiplicity as usize).sum()
    }

    /// Sum of edge lengths weighted by multiplicity.
    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length * e.multiplicity as f64).sum()
    }

    pub fn position(&self, n: NodeId) -> Vec3 {
        self.nodes[n.0]
    }

    pub fn edge_index(&self, a: NodeId, b: NodeId) -> Option<usize> {
        let (x, y) = canonical(a.0, b.0);
        self.edges.iter().position(|e| e.a.0 == x && e.b.0 == y)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.a.0] += e.multiplicity as usize;
            deg[e.b.0] += e.multiplicity as usize;
        }
        deg
    }

    /// Connectivity over nodes that have at least one edge, which must
    /// include the source. Isolated nodes are ignored.
    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return false;
        }
        let mut dsu = DisjointSet::new(n);
        for e in &self.edges {
            dsu.union(e.a.0, e.b.0);
        }
        let deg = self.degrees();
        let root = dsu.find(self.source.0);
        (0..n).all(|i| deg[i] == 0 || dsu.find(i) == root)
            && (deg[self.source.0] > 0 || self.edges.is_empty())
    }

    /// Dijkstra from `from`; returns distances and predecessor edge indices.
    fn shortest_paths(&self, from: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (idx, e) in self.edges.iter().enumerate() {
            adj[e.a.0].push(idx);
            adj[e.b.0].push(idx);
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            node: from,
        });
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &idx in &adj[node] {
                let e = &self.edges[idx];
                let next = e.other(NodeId(node)).0;
                let c = cost + e.length;
                if c < dist[next] {
                    dist[next] = c;
                    pred[next] = Some(idx);
                    heap.push(HeapEntry { cost: c, node: next });
                }
            }
        }
        (dist, pred)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// Parse and structurally validate an exported graph.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let g: RoadmapGraph = serde_json::from_str(text).map_err(|e| Error::parse("graph export", e))?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGraph(m));
        let n = self.nodes.len();
        if n == 0 {
            return bad("graph has no nodes".into());
        }
        if self.source.0 >= n {
            return bad(format!("source {} out of range", self.source.0));
        }
        if let Some(i) = self.nodes.iter().position(|p| !p.is_finite()) {
            return bad(format!("node {i} has a non-finite position"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (idx, e) in self.edges.iter().enumerate() {
            if e.a.0 >= n || e.b.0 >= n {
                return bad(format!("edge {idx} references a missing node"));
            }
            if e.a == e.b {
                return bad(format!("edge {idx} is a self-loop"));
            }
            if e.a.0 > e.b.0 {
                return bad(format!("edge {idx} is not stored with i < j"));
            }
            if !seen.insert((e.a.0, e.b.0)) {
                return bad(format!("edge {idx} duplicates an earlier node pair"));
            }
            if e.multiplicity == 0 {
                return bad(format!("edge {idx} has zero multiplicity"));
            }
            let d = self.nodes[e.a.0].distance(self.nodes[e.b.0]);
            if !e.length.is_finite() || (e.length - d).abs() > 1e-6 * d.max(1.0) {
                return bad(format!(
                    "edge {idx} length {} does not match endpoint distance {d}",
                    e.length
                ));
            }
        }
        Ok(())
    }
}

pub fn degree_profile(graph: &RoadmapGraph) -> Vec<(NodeId, usize)> {
    graph
        .degrees()
        .into_iter()
        .enumerate()
        .map(|(i, d)| (NodeId(i), d))
        .collect()
}

/// Make every degree even. Odd nodes are paired greedily by cheapest added
/// length; a pair gets a new direct edge when the two are not adjacent and
/// the segment is free, otherwise every edge on a shortest path between them
/// gains one copy.
pub fn eulerize(graph: &RoadmapGraph, map: &EnvironmentMap) -> Result<RoadmapGraph> {
    if !graph.is_connected() {
        return Err(Error::InvalidGraph("cannot Eulerize a disconnected graph".into()));
    }
    let odd: Vec<usize> = graph
        .degrees()
        .iter()
        .enumerate()
        .filter(|(_, d)| *d % 2 == 1)
        .map(|(i, _)| i)
        .collect();
    if odd.is_empty() {
        return Ok(graph.clone());
    }

    enum Fix {
        Direct(f64),
        Path(Vec<usize>),
    }
    let mut candidates: Vec<(f64, usize, usize, Fix)> = Vec::new();
    for (x, &u) in odd.iter().enumerate() {
        let (dist, pred) = graph.shortest_paths(u);
        for &v in &odd[x + 1..] {
            let (pu, pv) = (graph.nodes[u], graph.nodes[v]);
            let adjacent = graph.edge_index(NodeId(u), NodeId(v)).is_some();
            if !adjacent && map.segment_is_free(pu, pv) {
                candidates.push((pu.distance(pv), u, v, Fix::Direct(pu.distance(pv))));
            } else if dist[v].is_finite() {
                let mut path = Vec::new();
                let mut at = v;
                while at != u {
                    let idx = pred[at].expect("reachable node has a predecessor");
                    path.push(idx);
                    at = graph.edges[idx].other(NodeId(at)).0;
                }
                candidates.push((dist[v], u, v, Fix::Path(path)));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut out = graph.clone();
    let mut matched = vec![false; graph.nodes.len()];
    for (_, u, v, fix) in candidates {
        if matched[u] || matched[v] {
            continue;
        }
        matched[u] = true;
        matched[v] = true;
        match fix {
            Fix::Direct(length) => out.edges.push(Edge {
                a: NodeId(u),
                b: NodeId(v),
                length,
                multiplicity: 1,
            }),
            Fix::Path(path) => {
                for idx in path {
                    out.edges[idx].multiplicity += 1;
                }
            }
        }
    }
    out.edges.sort_by_key(|e| (e.a, e.b));
    debug_assert!(out.degrees().iter().all(|d| d % 2 == 0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::map::BoxObstacle;

    fn open_map() -> EnvironmentMap {
        EnvironmentMap::from_toml_str("bounds_min = [-20.0, -5.0, -8.0]\nbounds_max = [20.0, 5.0, 0.0]\n")
            .unwrap()
    }

    fn path_graph(map: &EnvironmentMap) -> RoadmapGraph {
        let nodes = vec![
            Vec3::new(0.0, 0.0, -2.0),
            Vec3::new(2.0, 2.0, -2.0),
            Vec3::new(4.0, 0.0, -2.0),
        ];
        let edge = |a: usize, b: usize| Edge {
            a: NodeId(a),
            b: NodeId(b),
            length: nodes[a].distance(nodes[b]),
            multiplicity: 1,
        };
        let g = RoadmapGraph {
            edges: vec![edge(0, 1), edge(1, 2)],
            nodes: nodes.clone(),
            source: NodeId(0),
        };
        assert!(map.segment_is_free(nodes[0], nodes[1]));
        g
    }

    #[test]
    fn default_tunnel_sampling_favours_the_front() {
        let map = EnvironmentMap::tunnel_default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nodes = sample_nodes(&map, 12, ForwardBias::default(), &mut rng).unwrap();
        assert_eq!(nodes.len(), 12);
        assert!(nodes.iter().all(|&p| map.is_free(p)));
        assert_eq!(nodes[0], map.rig.deploy_point());
        let forward = nodes.iter().filter(|p| p.n > map.rig.position.n).count();
        assert!(forward >= 8, "only {forward} forward nodes");
    }

    #[test]
    fn forward_fraction_tracks_bias_ratio() {
        let map = open_map();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let nodes = sample_nodes(&map, 4001, ForwardBias(3.0), &mut rng).unwrap();
        let forward = nodes[1..].iter().filter(|p| p.n > 0.0).count() as f64 / 4000.0;
        assert!((forward - 0.75).abs() < 0.03, "forward fraction {forward}");
    }

    #[test]
    fn two_nodes_in_empty_map() {
        let map = open_map();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nodes = sample_nodes(&map, 2, ForwardBias::default(), &mut rng).unwrap();
        assert_eq!(nodes.len(), 2);
        assert!(nodes.iter().all(|&p| map.in_bounds(p)));
    }

    #[test]
    fn fully_occupied_map_exhausts_sampling() {
        let mut map = open_map();
        map.obstacles
            .push(BoxObstacle::new(map.bounds_min, map.bounds_max));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = sample_nodes(&map, 5, ForwardBias::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::SamplingExhausted { .. }));

        // Only a 2 cm pocket around the deployment point stays free.
        let mut map = open_map();
        let (lo, hi) = (map.bounds_min, map.bounds_max);
        let (a, b) = (Vec3::new(0.69, -0.31, -1.31), Vec3::new(1.31, 0.31, -0.69));
        map.obstacles = vec![
            BoxObstacle::new(lo, Vec3::new(a.n, hi.e, hi.d)),
            BoxObstacle::new(Vec3::new(b.n, lo.e, lo.d), hi),
            BoxObstacle::new(Vec3::new(a.n, lo.e, lo.d), Vec3::new(b.n, a.e, hi.d)),
            BoxObstacle::new(Vec3::new(a.n, b.e, lo.d), Vec3::new(b.n, hi.e, hi.d)),
            BoxObstacle::new(Vec3::new(a.n, a.e, lo.d), Vec3::new(b.n, b.e, a.d)),
            BoxObstacle::new(Vec3::new(a.n, a.e, b.d), Vec3::new(b.n, b.e, hi.d)),
        ];
        assert!(map.is_free(map.rig.deploy_point()));
        let err = sample_nodes(&map, 3, ForwardBias::default(), &mut rng).unwrap_err();
        assert!(matches!(
            err,
            Error::SamplingExhausted {
                attempts: SAMPLING_ATTEMPTS,
                ..
            }
        ));
    }

    #[test]
    fn same_seed_same_nodes() {
        let map = EnvironmentMap::tunnel_default();
        let a = sample_nodes(
            &map,
            12,
            ForwardBias::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let b = sample_nodes(
            &map,
            12,
            ForwardBias::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_nodes_one_neighbour() {
        let map = open_map();
        let nodes = [Vec3::new(0.0, 0.0, -1.0), Vec3::new(3.0, 4.0, -1.0)];
        let g = connect_knn(&nodes, 1, &map).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].length, 5.0);
    }

    #[test]
    fn collinear_triple_becomes_triangle() {
        let map = open_map();
        let nodes = [
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, -1.0),
            Vec3::new(3.0, 0.0, -1.0),
        ];
        let g = connect_knn(&nodes, 2, &map).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert!(g.degrees().iter().all(|&d| d == 2));
    }

    #[test]
    fn blocked_neighbours_are_bridged() {
        let mut map = open_map();
        // wall between two clusters with a gap near the ceiling
        map.obstacles.push(BoxObstacle::new(
            Vec3::new(4.0, -5.0, -6.0),
            Vec3::new(5.0, 5.0, 0.0),
        ));
        let nodes = [
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, -1.0),
            Vec3::new(8.0, 0.0, -1.0),
            Vec3::new(9.0, 0.0, -1.0),
            Vec3::new(2.0, 0.0, -7.5),
            Vec3::new(7.0, 0.0, -7.5),
        ];
        let g = connect_knn(&nodes, 1, &map).unwrap();
        assert!(g.is_connected());
        for e in &g.edges {
            assert!(map.segment_is_free(g.nodes[e.a.0], g.nodes[e.b.0]));
        }
    }

    #[test]
    fn impossible_bridge_is_an_error() {
        let mut map = open_map();
        map.obstacles.push(BoxObstacle::new(
            Vec3::new(4.0, -5.0, -8.0),
            Vec3::new(5.0, 5.0, 0.0),
        ));
        let nodes = [Vec3::new(0.0, 0.0, -1.0), Vec3::new(9.0, 0.0, -1.0)];
        assert!(matches!(
            connect_knn(&nodes, 1, &map),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn eulerian_graph_is_unchanged() {
        let map = open_map();
        let nodes = [
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, -1.0),
            Vec3::new(0.0, 1.0, -1.0),
        ];
        let g = connect_knn(&nodes, 2, &map).unwrap();
        assert_eq!(eulerize(&g, &map).unwrap(), g);
    }

    #[test]
    fn path_graph_gets_direct_closing_edge() {
        let map = open_map();
        let g = path_graph(&map);
        let e = eulerize(&g, &map).unwrap();
        assert_eq!(e.edges.len(), 3);
        assert!(e.edge_index(NodeId(0), NodeId(2)).is_some());
        assert!(e.degrees().iter().all(|d| d % 2 == 0));
    }

    #[test]
    fn path_graph_with_blocked_chord_doubles_edges() {
        let mut map = open_map();
        map.obstacles.push(BoxObstacle::new(
            Vec3::new(1.8, -0.5, -3.0),
            Vec3::new(2.2, 0.5, -1.0),
        ));
        let g = path_graph(&map);
        assert!(!map.segment_is_free(g.nodes[0], g.nodes[2]));
        let e = eulerize(&g, &map).unwrap();
        assert_eq!(e.edges.len(), 2);
        assert!(e.edges.iter().all(|x| x.multiplicity == 2));
        assert_eq!(e.degrees(), vec![2, 4, 2]);
    }

    #[test]
    fn degree_profile_counts_multiplicity() {
        let nodes = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let g = RoadmapGraph {
            nodes,
            edges: vec![Edge {
                a: NodeId(0),
                b: NodeId(1),
                length: 1.0,
                multiplicity: 2,
            }],
            source: NodeId(0),
        };
        assert_eq!(degree_profile(&g), vec![(NodeId(0), 2), (NodeId(1), 2)]);
    }

    #[test]
    fn json_export_round_trips_and_validates() {
        let map = EnvironmentMap::tunnel_default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let nodes = sample_nodes(&map, 12, ForwardBias::default(), &mut rng).unwrap();
        let g = eulerize(&connect_knn(&nodes, 5, &map).unwrap(), &map).unwrap();
        let back = RoadmapGraph::from_json_str(&g.to_json_string()).unwrap();
        assert_eq!(back, g);

        let broken = g
            .to_json_string()
            .replacen("\"multiplicity\": 1", "\"multiplicity\": 0", 1);
        assert!(matches!(
            RoadmapGraph::from_json_str(&broken),
            Err(Error::InvalidGraph(_))
        ));
        assert!(RoadmapGraph::from_json_str("{\"nodes\": [").is_err());
    }
}
