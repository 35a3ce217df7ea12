//! Travel-distance ingestion and symmetric all-pairs shortest distances.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed travel distances (meters) between sensors.
///
/// `sensor_ids` fixes the row/column order of every matrix derived from the
/// table. Edges may mention extra nodes (junctions, unused sensors); those
/// still act as intermediate hops for shortest paths.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    pub sensor_ids: Vec<String>,
    pub edges: Vec<DirectedEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub from: String,
    pub to: String,
    pub distance: f64,
}

impl DistanceTable {
    pub fn new(sensor_ids: Vec<String>, edges: Vec<DirectedEdge>) -> Result<Self> {
        let mut seen = HashSet::new();
        let dups: Vec<String> = sensor_ids
            .iter()
            .filter(|id| !seen.insert(id.as_str()))
            .cloned()
            .collect();
        if !dups.is_empty() {
            return Err(Error::Config(format!("duplicate sensor ids: {}", dups.join(", "))));
        }
        for e in &edges {
            if !(e.distance >= 0.0) || !e.distance.is_finite() {
                return Err(Error::Validation(format!(
                    "edge {} -> {} has invalid distance {}",
                    e.from, e.to, e.distance
                )));
            }
        }
        Ok(Self { sensor_ids, edges })
    }

    /// Reads a `from,to,distance` CSV and keeps the given sensor order.
    pub fn from_csv_path(path: impl AsRef<Path>, sensor_ids: Vec<String>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file, sensor_ids)
    }

    pub fn from_csv_reader<R: Read>(reader: R, sensor_ids: Vec<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["from", "to", "distance"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                line: Some(1),
                msg: format!(
                    "expected header `from,to,distance`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut edges = Vec::new();
        for (i, rec) in rdr.deserialize::<DirectedEdge>().enumerate() {
            let edge = rec.map_err(|e| Error::Parse {
                line: Some(i + 2),
                msg: e.to_string(),
            })?;
            edges.push(edge);
        }
        Self::new(sensor_ids, edges)
    }

    /// Every id that appears as an edge endpoint.
    pub fn known_nodes(&self) -> HashSet<&str> {
        self.edges
            .iter()
            .flat_map(|e| [e.from.as_str(), e.to.as_str()])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.edges {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        cost: 0.0,
        node: source,
    });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let cand = cost + w;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(Frontier { cost: cand, node: next });
            }
        }
    }
    dist
}

/// Symmetric shortest travel distance between every pair of listed sensors:
/// `min(shortest(i -> j), shortest(j -> i))`, `+inf` when neither direction
/// is reachable, and zero on the diagonal.
pub fn all_pairs_shortest(table: &DistanceTable) -> Result<DMatrix<f64>> {
    let n = table.sensor_ids.len();
    let known = table.known_nodes();
    if n > 1 {
        let missing: Vec<String> = table
            .sensor_ids
            .iter()
            .filter(|id| !known.contains(id.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::SensorMismatch(missing));
        }
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for id in &table.sensor_ids {
        let next = index.len();
        index.insert(id.as_str(), next);
    }
    for e in &table.edges {
        for id in [e.from.as_str(), e.to.as_str()] {
            let next = index.len();
            index.entry(id).or_insert(next);
        }
    }
    let mut adj = vec![Vec::new(); index.len()];
    for e in &table.edges {
        if e.from != e.to {
            adj[index[e.from.as_str()]].push((index[e.to.as_str()], e.distance));
        }
    }

    let directed: Vec<Vec<f64>> = (0..n).map(|s| dijkstra(&adj, s)).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            directed[i][j].min(directed[j][i])
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(a: &str, b: &str, d: f64) -> DirectedEdge {
        DirectedEdge {
            from: a.into(),
            to: b.into(),
            distance: d,
        }
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_way_edge_is_symmetrized() {
        let t = DistanceTable::new(ids(&["A", "B"]), vec![edge("A", "B", 100.0)]).unwrap();
        let d = all_pairs_shortest(&t).unwrap();
        assert_eq!(d[(0, 1)], 100.0);
        assert_eq!(d[(1, 0)], 100.0);
        assert_eq!(d[(0, 0)], 0.0);
    }

    #[test]
    fn chain_composes() {
        let t = DistanceTable::new(ids(&["A", "B", "C"]), vec![edge("A", "B", 1.0), edge("B", "C", 1.0)]).unwrap();
        let d = all_pairs_shortest(&t).unwrap();
        assert_eq!(d[(0, 2)], 2.0);
    }

    /// Enumerates every simple directed path on a tiny graph.
    fn brute_force_shortest(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
        fn go(cur: usize, t: usize, edges: &[(usize, usize, f64)], visited: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if cur == t {
                *best = best.min(acc);
                return;
            }
            for &(a, b, w) in edges {
                if a == cur && !visited[b] {
                    visited[b] = true;
                    go(b, t, edges, visited, acc + w, best);
                    visited[b] = false;
                }
            }
        }
        let mut visited = vec![false; n];
        visited[s] = true;
        let mut best = f64::INFINITY;
        go(s, t, edges, &mut visited, 0.0, &mut best);
        best
    }

    #[test]
    fn directed_cycle_matches_enumeration() {
        let raw = [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)];
        let t = DistanceTable::new(
            ids(&["A", "B", "C"]),
            vec![edge("A", "B", 1.0), edge("B", "C", 1.0), edge("C", "A", 1.0)],
        )
        .unwrap();
        let d = all_pairs_shortest(&t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let oracle = brute_force_shortest(3, &raw, i, j).min(brute_force_shortest(3, &raw, j, i));
                assert_eq!(d[(i, j)], oracle);
            }
        }
        assert_eq!(d[(0, 2)], 1.0);
    }

    #[test]
    fn unreachable_pair_is_infinite() {
        let t = DistanceTable::new(
            ids(&["A", "B", "C", "D"]),
            vec![edge("A", "B", 3.0), edge("C", "D", 4.0)],
        )
        .unwrap();
        let d = all_pairs_shortest(&t).unwrap();
        assert!(d[(0, 2)].is_infinite());
        assert_eq!(d[(2, 3)], 4.0);
    }

    #[test]
    fn paths_may_route_through_unlisted_nodes() {
        let t = DistanceTable::new(ids(&["A", "C"]), vec![edge("A", "X", 2.0), edge("X", "C", 5.0)]).unwrap();
        assert_eq!(all_pairs_shortest(&t).unwrap()[(0, 1)], 7.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = DistanceTable::new(ids(&["A", "A"]), vec![]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn negative_distance_rejected() {
        assert!(DistanceTable::new(ids(&["A", "B"]), vec![edge("A", "B", -1.0)]).is_err());
    }

    #[test]
    fn sensor_without_edges_reported() {
        let t = DistanceTable::new(ids(&["A", "B", "Z"]), vec![edge("A", "B", 1.0)]).unwrap();
        match all_pairs_shortest(&t).unwrap_err() {
            Error::SensorMismatch(v) => assert_eq!(v, vec!["Z".to_string()]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn csv_parsing() {
        let data = "from,to,distance\nA,B,10.5\nB,A,12\n";
        let t = DistanceTable::from_csv_reader(data.as_bytes(), ids(&["A", "B"])).unwrap();
        assert_eq!(t.edges.len(), 2);
        assert_eq!(all_pairs_shortest(&t).unwrap()[(0, 1)], 10.5);

        let bad = "src,dst,d\nA,B,1\n";
        assert!(DistanceTable::from_csv_reader(bad.as_bytes(), ids(&["A", "B"])).is_err());
        let bad_row = "from,to,distance\nA,B,x\n";
        match DistanceTable::from_csv_reader(bad_row.as_bytes(), ids(&["A", "B"])).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, Some(2)),
            e => panic!("unexpected {e}"),
        }
    }
}
