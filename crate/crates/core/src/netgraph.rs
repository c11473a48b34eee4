//! Weekly unweighted port graphs from origin-destination legs, with degree,
//! closeness and betweenness, and storm-week differences against nearby weeks.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, Datelike, NaiveDate, TimeDelta, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::ais::OdRecord;
use crate::{Error, Result};

pub const DEFAULT_M: usize = 4;

/// ISO week, identified by its Monday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeekId(NaiveDate);

impl WeekId {
    pub fn of(d: NaiveDate) -> Self {
        WeekId(d - TimeDelta::days(d.weekday().num_days_from_monday() as i64))
    }

    pub fn of_instant(t: DateTime<Utc>) -> Self {
        Self::of(t.date_naive())
    }

    pub fn monday(self) -> NaiveDate {
        self.0
    }

    pub fn sunday(self) -> NaiveDate {
        self.0 + TimeDelta::days(6)
    }

    pub fn offset(self, weeks: i64) -> Self {
        WeekId(self.0 + TimeDelta::weeks(weeks))
    }

    pub fn weeks_until(self, other: WeekId) -> i64 {
        (other.0 - self.0).num_days() / 7
    }

    pub fn iso(self) -> (i32, u32) {
        let w = self.0.iso_week();
        (w.year(), w.week())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (y, w) = s.split_once("-W")?;
        let d = NaiveDate::from_isoywd_opt(y.parse().ok()?, w.parse().ok()?, Weekday::Mon)?;
        Some(WeekId(d))
    }
}

impl fmt::Display for WeekId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, w) = self.iso();
        write!(f, "{y}-W{w:02}")
    }
}

impl Serialize for WeekId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WeekId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        WeekId::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("bad ISO week {s:?}")))
    }
}

/// Simple undirected graph over a fixed, sorted node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: Vec<u32>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(mut nodes: Vec<u32>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        let n = nodes.len();
        Self {
            nodes,
            adj: vec![Vec::new(); n],
        }
    }

    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index(&self, port: u32) -> Option<usize> {
        self.nodes.binary_search(&port).ok()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Adds `{a, b}` by index. Self-loops and repeats are ignored.
    pub fn add_edge_idx(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
            let pos = self.adj[b].binary_search(&a).unwrap_err();
            self.adj[b].insert(pos, a);
        }
    }

    pub fn add_edge(&mut self, a: u32, b: u32) -> Result<()> {
        let (Some(i), Some(j)) = (self.index(a), self.index(b)) else {
            return Err(Error::Invalid(alloc::format!(
                "edge {a}-{b} references an unknown port"
            )));
        };
        self.add_edge_idx(i, j);
        Ok(())
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => self.adj[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// Edges as port-id pairs with the smaller id first, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (i, nb) in self.adj.iter().enumerate() {
            for &j in nb.iter().filter(|&&j| j > i) {
                out.push((self.nodes[i], self.nodes[j]));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    fn bfs(&self, s: usize, dist: &mut [i64]) {
        dist.fill(-1);
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
    }

    /// Component-corrected closeness: `(r−1)/Σd · (r−1)/(N−1)` over the node's
    /// component of size `r`; 0 for isolated nodes.
    pub fn closeness(&self, i: usize) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let mut dist = vec![-1; n];
        self.bfs(i, &mut dist);
        let reach = dist.iter().filter(|&&d| d > 0).count();
        let total: i64 = dist.iter().filter(|&&d| d > 0).sum();
        if reach == 0 {
            return 0.0;
        }
        (reach as f64 / total as f64) * (reach as f64 / (n - 1) as f64)
    }

    /// Betweenness of every node over ordered pairs, normalized by `(N−1)(N−2)`.
    pub fn betweenness(&self) -> Vec<f64> {
        let n = self.len();
        let mut cb = vec![0.0; n];
        if n < 3 {
            return cb;
        }
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        let mut delta = vec![0.0f64; n];
        for s in 0..n {
            stack.clear();
            for p in preds.iter_mut() {
                p.clear();
            }
            sigma.fill(0.0);
            dist.fill(-1);
            sigma[s] = 1.0;
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                stack.push(v);
                for &w in &self.adj[v] {
                    if dist[w] < 0 {
                        dist[w] = dist[v] + 1;
                        q.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                        preds[w].push(v);
                    }
                }
            }
            delta.fill(0.0);
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    cb[w] += delta[w];
                }
            }
        }
        let norm = ((n - 1) * (n - 2)) as f64;
        cb.iter_mut().for_each(|x| *x /= norm);
        cb
    }

    pub fn centralities(&self) -> Centralities {
        Centralities {
            degree: (0..self.len()).map(|i| self.degree(i)).collect(),
            closeness: (0..self.len()).map(|i| self.closeness(i)).collect(),
            betweenness: self.betweenness(),
        }
    }
}

/// Per-node values, indexed like [`Graph::nodes`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Centralities {
    pub degree: Vec<usize>,
    pub closeness: Vec<f64>,
    pub betweenness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyGraph {
    pub week: WeekId,
    pub graph: Graph,
}

fn weeks_touched(from: DateTime<Utc>, to: DateTime<Utc>) -> impl Iterator<Item = WeekId> {
    let (a, b) = if from <= to { (from, to) } else { (to, from) };
    let first = WeekId::of_instant(a);
    let n = first.weeks_until(WeekId::of_instant(b));
    (0..=n).map(move |k| first.offset(k))
}

/// One graph per week from `first` to `last` inclusive, over `ports`.
///
/// A vessel's presence at a port is reconstructed from consecutive legs: it is
/// at the destination from the leg's arrival until the next leg departs. Ports
/// a vessel is present at within the same week are pairwise connected, and
/// each non-self-loop leg also links its endpoints in every week it spans.
pub fn build_weekly_graphs(
    od: &[OdRecord],
    ports: &[u32],
    first: WeekId,
    last: WeekId,
) -> Vec<WeeklyGraph> {
    let n_weeks = first.weeks_until(last).max(-1) + 1;
    let template = Graph::new(ports.to_vec());
    let mut graphs: Vec<WeeklyGraph> = (0..n_weeks)
        .map(|k| WeeklyGraph {
            week: first.offset(k),
            graph: template.clone(),
        })
        .collect();
    let slot = |w: WeekId| {
        let k = first.weeks_until(w);
        (0..n_weeks).contains(&k).then_some(k as usize)
    };

    let mut by_vessel: BTreeMap<&str, Vec<&OdRecord>> = BTreeMap::new();
    for r in od {
        by_vessel.entry(r.vessel_id.as_str()).or_default().push(r);
    }
    let mut present: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for legs in by_vessel.values_mut() {
        legs.sort_by_key(|r| (r.depart, r.arrive));
        present.clear();
        let mut visit = |port: u32, from: DateTime<Utc>, to: DateTime<Utc>| {
            if let Some(p) = template.index(port) {
                for w in weeks_touched(from, to).filter_map(slot) {
                    present.entry(w).or_default().insert(p);
                }
            }
        };
        for (k, leg) in legs.iter().enumerate() {
            if k == 0 {
                visit(leg.origin_port, leg.depart, leg.depart);
            }
            let until = legs
                .get(k + 1)
                .map_or(leg.arrive, |next| next.depart.max(leg.arrive));
            visit(leg.dest_port, leg.arrive, until);
        }
        for (&w, ps) in &present {
            let ps: Vec<usize> = ps.iter().copied().collect();
            for (a, &i) in ps.iter().enumerate() {
                for &j in &ps[a + 1..] {
                    graphs[w].graph.add_edge_idx(i, j);
                }
            }
        }
        for leg in legs.iter().filter(|l| !l.is_self_loop()) {
            let (Some(i), Some(j)) = (
                template.index(leg.origin_port),
                template.index(leg.dest_port),
            ) else {
                continue;
            };
            for w in weeks_touched(leg.depart, leg.arrive).filter_map(slot) {
                graphs[w].graph.add_edge_idx(i, j);
            }
        }
    }
    graphs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Normal weeks taken on each side of the storm week.
    pub m: usize,
    /// Reproduce the printed betweenness prefactor `1/(M(N−1)(N−2))`, which is
    /// twice the mean over the `2M` weeks.
    pub literal_eq6: bool,
    /// Leave out surrounding weeks that are themselves storm weeks for the port.
    pub skip_affected_weeks: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            literal_eq6: false,
            skip_affected_weeks: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeBaseline {
    pub degree: f64,
    pub closeness: f64,
    pub betweenness: f64,
    pub weeks_used: usize,
    /// Fewer than `2M` surrounding weeks were available.
    pub incomplete: bool,
}

/// Mean centralities of node `node` over weeks `w̄±1 … w̄±M`.
///
/// `weekly` holds one centrality set per week starting at `first`. Weeks in
/// `affected` are skipped when `cfg.skip_affected_weeks` is set.
pub fn baseline_centralities(
    weekly: &[Centralities],
    first: WeekId,
    storm_week: WeekId,
    node: usize,
    affected: &BTreeSet<WeekId>,
    cfg: &NetworkConfig,
) -> NodeBaseline {
    let center = first.weeks_until(storm_week);
    let mut used = 0usize;
    let (mut d, mut c, mut b) = (0.0, 0.0, 0.0);
    for m in 1..=cfg.m as i64 {
        for k in [center - m, center + m] {
            if k < 0 || k as usize >= weekly.len() {
                continue;
            }
            if cfg.skip_affected_weeks && affected.contains(&first.offset(k)) {
                continue;
            }
            let w = &weekly[k as usize];
            d += w.degree[node] as f64;
            c += w.closeness[node];
            b += w.betweenness[node];
            used += 1;
        }
    }
    let mean = |x: f64| if used == 0 { 0.0 } else { x / used as f64 };
    let betweenness = if cfg.literal_eq6 {
        if cfg.m == 0 {
            0.0
        } else {
            b / cfg.m as f64
        }
    } else {
        mean(b)
    };
    NodeBaseline {
        degree: mean(d),
        closeness: mean(c),
        betweenness,
        weeks_used: used,
        incomplete: used < 2 * cfg.m,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDiff {
    pub port_id: u32,
    pub storm_week: WeekId,
    pub baseline: NodeBaseline,
    pub storm_degree: usize,
    pub storm_closeness: f64,
    pub storm_betweenness: f64,
    pub degree_difference: f64,
    pub cc_difference: f64,
    pub bc_difference: f64,
}

pub fn network_diff(
    port_id: u32,
    storm_week: WeekId,
    baseline: NodeBaseline,
    storm: &Centralities,
    node: usize,
) -> NetworkDiff {
    let sd = storm.degree[node];
    let sc = storm.closeness[node];
    let sb = storm.betweenness[node];
    NetworkDiff {
        port_id,
        storm_week,
        baseline,
        storm_degree: sd,
        storm_closeness: sc,
        storm_betweenness: sb,
        degree_difference: (baseline.degree - sd as f64).abs(),
        cc_difference: (baseline.closeness - sc).abs(),
        bc_difference: (baseline.betweenness - sb).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use approx::assert_abs_diff_eq;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at(day: u32, h: u32) -> DateTime<Utc> {
        // 2020-03-02 is a Monday
        Utc.with_ymd_and_hms(2020, 3, 2, h, 0, 0).unwrap() + TimeDelta::days(day as i64)
    }

    fn leg(v: &str, o: u32, d: u32, dep: DateTime<Utc>, arr: DateTime<Utc>) -> OdRecord {
        OdRecord {
            vessel_id: v.into(),
            origin_port: o,
            dest_port: d,
            depart: dep,
            arrive: arr,
        }
    }

    fn wk() -> WeekId {
        WeekId::of(at(0, 0).date_naive())
    }

    fn graph(n: usize, edges: &[(u32, u32)]) -> Graph {
        let mut g = Graph::new((0..n as u32).collect());
        for &(a, b) in edges {
            g.add_edge(a, b).unwrap();
        }
        g
    }

    #[test]
    fn week_ids() {
        let w = WeekId::of(NaiveDate::from_ymd_opt(2020, 3, 5).unwrap());
        assert_eq!(w.monday(), NaiveDate::from_ymd_opt(2020, 3, 2).unwrap());
        assert_eq!(w.to_string(), "2020-W10");
        assert_eq!(WeekId::parse("2020-W10"), Some(w));
        assert_eq!(w.offset(2).weeks_until(w), -2);
        let jan1 = WeekId::of(NaiveDate::from_ymd_opt(2021, 1, 1).unwrap());
        assert_eq!(jan1.to_string(), "2020-W53");
    }

    #[test]
    fn weekly_graph_examples() {
        let ports = [1, 2, 3, 4];
        let g = build_weekly_graphs(&[leg("V", 1, 2, at(0, 6), at(2, 6))], &ports, wk(), wk());
        assert_eq!(g[0].graph.edges(), vec![(1, 2)]);

        let g = build_weekly_graphs(&[leg("V", 1, 1, at(0, 6), at(2, 6))], &ports, wk(), wk());
        assert_eq!(g[0].graph.edge_count(), 0);

        let od = [
            leg("V", 1, 2, at(0, 6), at(1, 6)),
            leg("W", 2, 3, at(3, 6), at(4, 6)),
        ];
        let g = &build_weekly_graphs(&od, &ports, wk(), wk())[0].graph;
        assert_eq!(g.edges(), vec![(1, 2), (2, 3)]);
        assert_eq!(g.degree(g.index(2).unwrap()), 2);
    }

    #[test]
    fn leg_spanning_weeks_adds_edge_to_both() {
        let od = [leg("V", 1, 2, at(5, 6), at(9, 6))];
        let g = build_weekly_graphs(&od, &[1, 2], wk(), wk().offset(2));
        assert!(g[0].graph.has_edge(1, 2));
        assert!(g[1].graph.has_edge(1, 2));
        assert!(!g[2].graph.has_edge(1, 2));
    }

    #[test]
    fn same_week_visits_form_clique() {
        // A -> B -> C, all in one week: A and C are linked through the vessel too.
        let od = [
            leg("V", 1, 2, at(0, 6), at(1, 6)),
            leg("V", 2, 3, at(2, 6), at(3, 6)),
        ];
        let g = &build_weekly_graphs(&od, &[1, 2, 3], wk(), wk())[0].graph;
        assert_eq!(g.edge_count(), 3);
        // next week: nothing
        let g = build_weekly_graphs(&od, &[1, 2, 3], wk(), wk().offset(1));
        assert_eq!(g[1].graph.edge_count(), 0);
    }

    #[test]
    fn degree_examples() {
        assert_eq!(graph(3, &[]).degree(0), 0);
        let star = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(star.degree(0), 3);
        let k5: Vec<(u32, u32)> = (0..5)
            .flat_map(|a| (a + 1..5).map(move |b| (a, b)))
            .collect();
        assert_eq!(graph(5, &k5).degree(2), 4);
    }

    #[test]
    fn closeness_examples() {
        let p3 = graph(3, &[(0, 1), (1, 2)]);
        assert_abs_diff_eq!(p3.closeness(1), 1.0);
        assert_abs_diff_eq!(p3.closeness(0), 2.0 / 3.0);
        assert_eq!(graph(3, &[(0, 1)]).closeness(2), 0.0);
        // two components: {0,1} in N=4 -> 1/1 * 1/3
        assert_abs_diff_eq!(graph(4, &[(0, 1), (2, 3)]).closeness(0), 1.0 / 3.0);
    }

    #[test]
    fn betweenness_examples() {
        let star = graph(4, &[(0, 1), (0, 2), (0, 3)]).betweenness();
        assert_abs_diff_eq!(star[0], 1.0);
        assert_eq!(star[1], 0.0);
        let p3 = graph(3, &[(0, 1), (1, 2)]).betweenness();
        assert_abs_diff_eq!(p3[1], 1.0);
    }

    fn all_dist(g: &Graph) -> Vec<Vec<i64>> {
        let n = g.len();
        (0..n)
            .map(|s| {
                let mut d = vec![-1; n];
                g.bfs(s, &mut d);
                d
            })
            .collect()
    }

    /// Enumerates every shortest path by depth-first search.
    fn brute_betweenness(g: &Graph) -> Vec<f64> {
        let n = g.len();
        let dist = all_dist(g);
        let mut out = vec![0.0; n];
        if n < 3 {
            return out;
        }
        fn walk(g: &Graph, path: &mut Vec<usize>, t: usize, len: i64, paths: &mut Vec<Vec<usize>>) {
            let v = *path.last().unwrap();
            if v == t {
                paths.push(path.clone());
                return;
            }
            if path.len() as i64 > len {
                return;
            }
            for &w in g.neighbors(v) {
                if !path.contains(&w) {
                    path.push(w);
                    walk(g, path, t, len, paths);
                    path.pop();
                }
            }
        }
        for s in 0..n {
            for t in 0..n {
                if s == t || dist[s][t] < 0 {
                    continue;
                }
                let mut paths = Vec::new();
                walk(g, &mut vec![s], t, dist[s][t], &mut paths);
                paths.retain(|p| p.len() as i64 == dist[s][t] + 1);
                for v in 0..n {
                    if v != s && v != t {
                        let through = paths.iter().filter(|p| p.contains(&v)).count();
                        out[v] += through as f64 / paths.len() as f64;
                    }
                }
            }
        }
        out.iter().map(|x| x / ((n - 1) * (n - 2)) as f64).collect()
    }

    #[test]
    fn brandes_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let p: f64 = rng.random_range(0.1..0.7);
            let mut g = Graph::new((0..n as u32).collect());
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(p) {
                        g.add_edge_idx(a, b);
                    }
                }
            }
            let fast = g.betweenness();
            let slow = brute_betweenness(&g);
            for i in 0..n {
                assert_abs_diff_eq!(fast[i], slow[i], epsilon = 1e-9);
                if g.degree(i) == 0 {
                    assert_eq!(fast[i], 0.0);
                    assert_eq!(g.closeness(i), 0.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn graph_symmetry_and_degree_sum(edges in prop::collection::vec((0u32..8, 0u32..8), 0..30), extra in (0u32..8, 0u32..8)) {
            let mut g = graph(8, &edges);
            for (a, b) in g.edges() {
                prop_assert!(g.has_edge(a, b) && g.has_edge(b, a));
                prop_assert!(a != b);
            }
            let sum: usize = (0..8).map(|i| g.degree(i)).sum();
            prop_assert_eq!(sum, 2 * g.edge_count());
            let before: Vec<usize> = (0..8).map(|i| g.degree(i)).collect();
            g.add_edge(extra.0, extra.1).unwrap();
            for i in 0..8 {
                prop_assert!(g.degree(i) >= before[i]);
                prop_assert!(g.degree(i) <= 7);
            }
        }
    }

    fn cent(deg: usize, clo: f64, btw: f64) -> Centralities {
        Centralities {
            degree: vec![deg],
            closeness: vec![clo],
            betweenness: vec![btw],
        }
    }

    #[test]
    fn baseline_examples() {
        let cfg = NetworkConfig::default();
        let none = BTreeSet::new();
        let same: Vec<_> = (0..9).map(|_| cent(3, 0.5, 0.2)).collect();
        let b = baseline_centralities(&same, wk(), wk().offset(4), 0, &none, &cfg);
        assert_eq!(b.degree, 3.0);
        assert_abs_diff_eq!(b.closeness, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.betweenness, 0.2, epsilon = 1e-15);
        assert!(!b.incomplete);

        let mut split: Vec<_> = (0..4).map(|_| cent(4, 0.0, 0.0)).collect();
        split.push(cent(100, 0.0, 0.0));
        split.extend((0..4).map(|_| cent(6, 0.0, 0.0)));
        let b = baseline_centralities(&split, wk(), wk().offset(4), 0, &none, &cfg);
        assert_eq!(b.degree, 5.0);

        let m1 = NetworkConfig { m: 1, ..cfg };
        let two = vec![cent(0, 1.0, 0.0), cent(0, 0.0, 0.0), cent(0, 0.5, 0.0)];
        assert_abs_diff_eq!(
            baseline_centralities(&two, wk(), wk().offset(1), 0, &none, &m1).closeness,
            0.75
        );
    }

    #[test]
    fn baseline_ignores_storm_week_and_flags_edges() {
        let cfg = NetworkConfig::default();
        let none = BTreeSet::new();
        let mut w: Vec<_> = (0..9).map(|k| cent(k, 0.1 * k as f64, 0.01)).collect();
        let a = baseline_centralities(&w, wk(), wk().offset(4), 0, &none, &cfg);
        w[4] = cent(999, 9.0, 9.0);
        let b = baseline_centralities(&w, wk(), wk().offset(4), 0, &none, &cfg);
        assert_eq!(a, b);

        let edge = baseline_centralities(&w, wk(), wk().offset(1), 0, &none, &cfg);
        assert!(edge.incomplete);
        assert_eq!(edge.weeks_used, 1 + 4);

        let lit = baseline_centralities(
            &w,
            wk(),
            wk().offset(4),
            0,
            &none,
            &NetworkConfig {
                literal_eq6: true,
                ..cfg
            },
        );
        assert_abs_diff_eq!(lit.betweenness, 2.0 * a.betweenness, epsilon = 1e-15);

        let affected = BTreeSet::from([wk().offset(3)]);
        let skip = NetworkConfig {
            skip_affected_weeks: true,
            ..cfg
        };
        let s = baseline_centralities(&w, wk(), wk().offset(4), 0, &affected, &skip);
        assert_eq!(s.weeks_used, 7);
        assert_eq!(s.degree, (0 + 1 + 2 + 5 + 6 + 7 + 8) as f64 / 7.0);
    }

    #[test]
    fn diff_examples() {
        let base = |d: f64| NodeBaseline {
            degree: d,
            closeness: 0.2,
            betweenness: 0.1,
            weeks_used: 8,
            incomplete: false,
        };
        let diff = |d: f64, storm: usize| network_diff(1, wk(), base(d), &cent(storm, 0.2, 0.1), 0);
        assert_eq!(diff(3.0, 3).degree_difference, 0.0);
        assert_eq!(diff(5.0, 1).degree_difference, 4.0);
        assert_eq!(diff(3.0, 5).degree_difference, 2.0);
        let d = network_diff(1, wk(), base(2.0), &cent(2, 0.5, 0.0), 0);
        assert_abs_diff_eq!(d.cc_difference, 0.3);
        assert_abs_diff_eq!(d.bc_difference, 0.1);
    }
}
