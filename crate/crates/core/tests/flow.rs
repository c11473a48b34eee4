use chrono::{DateTime, NaiveDate, TimeDelta, Utc};
use portres_core::ais::{
    build_daily_series, extract_od, segment_port_calls, AisPoint, Coast, PortBoundary, PortIndex,
    SegmentConfig,
};
use portres_core::countmodel::{
    fit, mae_rmse, predict_mean, simulate_rpnbl, split_80_20, McmcConfig, Mixing, ModelSpec,
    TrueParams, Variant,
};
use portres_core::geo::{LatLon, MultiPolygon, Ring};
use portres_core::netgraph::{build_weekly_graphs, Graph, WeekId};
use proptest::prelude::*;

fn square(lat: f64, lon: f64) -> MultiPolygon {
    let h = 0.05;
    MultiPolygon::single(
        Ring::closing(vec![
            LatLon::new(lat - h, lon - h),
            LatLon::new(lat - h, lon + h),
            LatLon::new(lat + h, lon + h),
            LatLon::new(lat + h, lon - h),
        ])
        .unwrap(),
    )
}

fn ports() -> PortIndex {
    let p = |id, lat, lon| PortBoundary {
        port_id: id,
        name: format!("P{id}"),
        coast: Coast::Gulf,
        geometry: square(lat, lon),
    };
    PortIndex::new(vec![
        p(1, 29.0, -90.0),
        p(2, 30.0, -88.0),
        p(3, 27.8, -97.4),
    ])
    .unwrap()
}

fn t0() -> DateTime<Utc> {
    "2022-05-02T00:00:00Z".parse().unwrap()
}

/// Hourly positions: `stay` hours at each listed port, `sail` hours at sea between.
fn voyage(vessel: &str, stops: &[(f64, f64)], stay: i64, sail: i64) -> Vec<AisPoint> {
    let mut pts = Vec::new();
    let mut h = 0;
    for &(lat, lon) in stops {
        for _ in 0..stay {
            pts.push(AisPoint::new(vessel, t0() + TimeDelta::hours(h), lat, lon, 70).unwrap());
            h += 1;
        }
        for _ in 0..sail {
            pts.push(AisPoint::new(vessel, t0() + TimeDelta::hours(h), 25.0, -85.0, 70).unwrap());
            h += 1;
        }
    }
    pts
}

#[test]
fn calls_counts_and_weekly_graph() {
    let idx = ports();
    let a = voyage("A", &[(29.0, -90.0), (30.0, -88.0), (29.0, -90.0)], 12, 20);
    let b = voyage("B", &[(27.8, -97.4), (29.0, -90.0)], 6, 30);
    // three hours in port 2 is too short to count as a call
    let c = voyage("C", &[(30.0, -88.0), (27.8, -97.4)], 3, 10);

    let mut calls = Vec::new();
    let mut od = Vec::new();
    let mut dropped = 0;
    for track in [&a, &b, &c] {
        let seg = segment_port_calls(track, &idx, &SegmentConfig::default()).unwrap();
        dropped += seg.short_visits_dropped;
        od.extend(extract_od(&seg.calls));
        calls.extend(seg.calls);
    }
    assert_eq!(calls.len(), 5);
    assert_eq!(dropped, 2);
    assert_eq!(od.len(), 3);

    let day = t0().date_naive();
    let s1 = build_daily_series(&calls, 1, day, day + TimeDelta::days(6)).unwrap();
    assert_eq!(s1.len(), 7);
    assert!(s1.counts.iter().all(|&c| c <= 2));
    assert_eq!(s1.counts[0], 1);

    let w = WeekId::of(day);
    let graphs = build_weekly_graphs(&od, &[1, 2, 3], w, w);
    assert_eq!(graphs.len(), 1);
    let g = &graphs[0].graph;
    assert!(g.has_edge(1, 2));
    assert!(g.has_edge(1, 3));
    assert!(!g.has_edge(2, 3));
    let c = g.centralities();
    assert_eq!(c.degree, vec![2, 1, 1]);
    assert_eq!(c.betweenness, vec![1.0, 0.0, 0.0]);
}

#[test]
fn weeks_are_monday_based() {
    let d = NaiveDate::from_ymd_opt(2022, 5, 8).unwrap();
    let w = WeekId::of(d);
    assert_eq!(w.monday(), NaiveDate::from_ymd_opt(2022, 5, 2).unwrap());
    assert_eq!(w.offset(1).weeks_until(w), -1);
}

#[test]
fn nb_fit_predicts_held_out_counts() {
    let truth = TrueParams {
        beta: vec![0.8, 0.5],
        sigma: vec![0.0],
        phi: 3.0,
        psi: None,
        mixing: Mixing::Exact,
    };
    let data = simulate_rpnbl(&truth, 400, 3).unwrap();
    let (train, test) = split_80_20(data.len(), 3).unwrap();
    let spec = ModelSpec::new(Variant::Nb, vec!["x1".into()], vec![]);
    let cfg = McmcConfig {
        iterations: 1500,
        burn_in: 750,
        max_iterations: 3000,
        seed: 5,
        ..Default::default()
    };
    let f = fit(&spec, &data.subset(&train), &cfg).unwrap();
    assert!(f.converged);
    assert!(f.summary_of("x1").unwrap().covers(0.5));
    let held = data.subset(&test);
    let yhat = predict_mean(&f, &held).unwrap();
    let y: Vec<f64> = held.y.iter().map(|&v| v as f64).collect();
    let (mae, rmse) = mae_rmse(&y, &yhat);
    assert!(mae > 0.0 && rmse >= mae);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let (mae_const, _) = mae_rmse(&y, &vec![mean; y.len()]);
    assert!(mae < mae_const);
}

fn graph_from(n: usize, bits: &[bool]) -> Graph {
    let mut g = Graph::new((0..n as u32).collect());
    let mut k = 0;
    for a in 0..n {
        for b in a + 1..n {
            if bits[k] {
                g.add_edge_idx(a, b);
            }
            k += 1;
        }
    }
    g
}

proptest! {
    #[test]
    fn centralities_are_bounded(n in 1usize..10, bits in proptest::collection::vec(any::<bool>(), 45)) {
        let g = graph_from(n, &bits);
        let c = g.centralities();
        prop_assert_eq!(c.degree.iter().sum::<usize>(), 2 * g.edge_count());
        for i in 0..n {
            prop_assert!((0.0..=1.0).contains(&c.closeness[i]));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c.betweenness[i]));
            if c.degree[i] <= 1 {
                prop_assert_eq!(c.betweenness[i], 0.0);
            }
        }
    }

    #[test]
    fn relabeling_permutes_centralities(n in 2usize..9, bits in proptest::collection::vec(any::<bool>(), 36), shift in 1usize..8) {
        let g = graph_from(n, &bits);
        let perm = |i: usize| (i + shift) % n;
        let mut h = Graph::new((0..n as u32).collect());
        for (a, b) in g.edges() {
            h.add_edge_idx(perm(a as usize), perm(b as usize));
        }
        let (cg, ch) = (g.centralities(), h.centralities());
        for i in 0..n {
            prop_assert_eq!(cg.degree[i], ch.degree[perm(i)]);
            prop_assert!((cg.closeness[i] - ch.closeness[perm(i)]).abs() < 1e-12);
            prop_assert!((cg.betweenness[i] - ch.betweenness[perm(i)]).abs() < 1e-12);
        }
    }
}
