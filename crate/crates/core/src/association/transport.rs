//! Capacitated user-to-station assignment.
//!
//! Maximizes the total value of assigning each user to at most one station,
//! with at most `capacity[s]` users per station. Users are inserted one at a
//! time along the best augmenting path of the residual graph; user nodes are
//! folded into station-to-station edges, so each insertion costs
//! `O(users * stations + stations^3)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    users: usize,
    stations: usize,
    /// `[user][station]`; `None` marks an ineligible pair.
    values: Vec<Option<f64>>,
    capacity: Vec<usize>,
}

impl TransportProblem {
    pub fn new(users: usize, capacity: Vec<usize>) -> Self {
        let stations = capacity.len();
        Self {
            users,
            stations,
            values: vec![None; users * stations],
            capacity,
        }
    }

    pub fn set(&mut self, user: usize, station: usize, value: f64) {
        self.values[user * self.stations + station] = Some(value);
    }

    #[inline]
    pub fn get(&self, user: usize, station: usize) -> Option<f64> {
        self.values[user * self.stations + station]
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn stations(&self) -> usize {
        self.stations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub station_of: Vec<Option<usize>>,
    pub value: f64,
}

pub fn assign_capacitated(problem: &TransportProblem) -> Result<TransportSolution> {
    for (i, v) in problem.values.iter().enumerate() {
        if let Some(v) = v {
            if !v.is_finite() {
                return Err(Error::NanValue {
                    row: i / problem.stations.max(1),
                    col: i % problem.stations.max(1),
                });
            }
        }
    }
    let s = problem.stations;
    let null = s;
    let nodes = s + 1;
    let mut station_of: Vec<Option<usize>> = vec![None; problem.users];
    let mut load = vec![0usize; s];
    // Node of a processed user: its station, or `null` when unassigned.
    let node_of = |st: Option<usize>| st.unwrap_or(null);

    let mut edge = vec![f64::NEG_INFINITY; nodes * nodes];
    let mut via = vec![usize::MAX; nodes * nodes];
    for u in 0..problem.users {
        // Folded residual edges between nodes through already inserted users.
        edge.iter_mut().for_each(|e| *e = f64::NEG_INFINITY);
        for x in 0..u {
            let from = node_of(station_of[x]);
            let base = station_of[x].and_then(|b| problem.get(x, b)).unwrap_or(0.0);
            for to in 0..nodes {
                if to == from {
                    continue;
                }
                let target = if to == null { Some(0.0) } else { problem.get(x, to) };
                if let Some(t) = target {
                    let w = t - base;
                    let k = from * nodes + to;
                    if w > edge[k] {
                        edge[k] = w;
                        via[k] = x;
                    }
                }
            }
        }

        // Longest paths from the new user (Bellman-Ford; no positive cycles
        // exist while the current assignment is optimal).
        let mut dist = vec![f64::NEG_INFINITY; nodes];
        let mut pred = vec![usize::MAX; nodes];
        dist[null] = 0.0;
        for b in 0..s {
            if let Some(v) = problem.get(u, b) {
                if v > dist[b] {
                    dist[b] = v;
                }
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for a in 0..nodes {
                if dist[a] == f64::NEG_INFINITY {
                    continue;
                }
                for b in 0..nodes {
                    let w = edge[a * nodes + b];
                    if w == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = dist[a] + w;
                    if cand > dist[b] + 1e-12 * cand.abs().max(1.0) {
                        dist[b] = cand;
                        pred[b] = a;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut best = null;
        for b in 0..s {
            if load[b] < problem.capacity[b] && dist[b] > dist[best] {
                best = b;
            }
        }
        if best == null && pred[null] == usize::MAX {
            continue;
        }

        // Walk back along predecessors, moving one user per edge.
        let mut moves = Vec::new();
        let mut node = best;
        let mut steps = 0;
        while pred[node] != usize::MAX {
            let from = pred[node];
            moves.push((via[from * nodes + node], node));
            node = from;
            steps += 1;
            if steps > nodes {
                return Err(Error::InvalidArgument("cycle in augmenting path".into()));
            }
        }
        if node != null {
            moves.push((u, node));
        }
        for &(x, to) in moves.iter().rev() {
            if let Some(b) = station_of[x] {
                load[b] -= 1;
            }
            if to == null {
                station_of[x] = None;
            } else {
                station_of[x] = Some(to);
                load[to] += 1;
            }
        }
    }
    let value = station_of
        .iter()
        .enumerate()
        .filter_map(|(u, s)| s.and_then(|s| problem.get(u, s)))
        .sum();
    Ok(TransportSolution { station_of, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::hungarian::{hungarian, ValueMatrix};
    use rand::{Rng, SeedableRng};

    /// Oracle: expand each station into `capacity` identical columns.
    fn by_expansion(p: &TransportProblem) -> f64 {
        let cols: Vec<usize> = (0..p.stations())
            .flat_map(|s| std::iter::repeat(s).take(p.capacity[s]))
            .collect();
        let mut m = ValueMatrix::zeros(p.users(), cols.len());
        for u in 0..p.users() {
            for (c, &s) in cols.iter().enumerate() {
                m.set(u, c, p.get(u, s).unwrap_or(0.0).max(0.0));
            }
        }
        hungarian(&m).unwrap().value
    }

    #[test]
    fn matches_slot_expansion_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let users = rng.random_range(0..12);
            let stations = rng.random_range(1..5);
            let capacity: Vec<usize> = (0..stations).map(|_| rng.random_range(0..4)).collect();
            let mut p = TransportProblem::new(users, capacity);
            for u in 0..users {
                for s in 0..stations {
                    if rng.random_bool(0.7) {
                        p.set(u, s, rng.random_range(0.0..10.0));
                    }
                }
            }
            let sol = assign_capacitated(&p).unwrap();
            let oracle = by_expansion(&p);
            assert!((sol.value - oracle).abs() < 1e-9, "trial {trial}: {} vs {oracle}", sol.value);
            let mut load = vec![0; stations];
            for (u, s) in sol.station_of.iter().enumerate() {
                if let Some(s) = *s {
                    assert!(p.get(u, s).is_some());
                    load[s] += 1;
                }
            }
            for s in 0..stations {
                assert!(load[s] <= p.capacity[s]);
            }
        }
    }

    #[test]
    fn spill_to_next_best() {
        let mut p = TransportProblem::new(2, vec![1, 2]);
        p.set(0, 0, 10.0);
        p.set(0, 1, 1.0);
        p.set(1, 0, 9.0);
        p.set(1, 1, 5.0);
        let sol = assign_capacitated(&p).unwrap();
        // 10 + 5 beats 9 + 1.
        assert_eq!(sol.station_of, vec![Some(0), Some(1)]);
        assert_eq!(sol.value, 15.0);
    }
}
