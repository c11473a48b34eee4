//! Weekly freight graphs, centrality differences and the assembled
//! interaction table.

use std::collections::{BTreeMap, BTreeSet};

use portres_core::ais::{Coast, OdRecord};
use portres_core::netgraph::{
    baseline_centralities, build_weekly_graphs, network_diff, Centralities, NetworkDiff, WeekId,
};
use serde::Serialize;

use super::common::{
    bad, cell_u32, read_exposure, read_ports, EXPOSURE, IMPACTS, INTERACTIONS, OD, PORTS,
};
use super::{Context, Record};
use crate::error::Result;
use crate::io::{self, fmt_bool, fmt_f64, parse_time, Table};

/// Port-cyclone interaction record columns, in reference-table order.
pub const INTERACTION_COLUMNS: [&str; 47] = [
    "ID",
    "SID",
    "PID",
    "port",
    "start_date",
    "end_date",
    "start_recovery_date",
    "end_recovery_date",
    "total_impact",
    "total_impact_value",
    "max_impact",
    "day_of_recover",
    "Degree_difference",
    "CC_difference",
    "BC_difference",
    "SSHS",
    "WIND",
    "PRESSURE",
    "DISTANCE",
    "IF_LANDFALL",
    "IF_LANDFALL_CLOSE2PORT",
    "Wind_speed",
    "Surge_height",
    "Rainfall",
    "Port_ranking",
    "Coast_Gulf_of_Mexico",
    "Coast_Atlantic",
    "Coast_Pacific",
    "Seaport",
    "D_normal",
    "D_cyclone",
    "C_normal",
    "C_cyclone",
    "B_normal",
    "B_cyclone",
    "Pop_C",
    "Pop_Tract",
    "PCT_Pov",
    "WF",
    "PCT_TA",
    "PCT_ACEW",
    "PCT_TI",
    "PCT_SV",
    "SL",
    "Railway_Length",
    "Highway_Length",
    "Dock_Count",
];

/// Columns copied from the port attribute table.
const CENSUS_COLUMNS: [&str; 14] = [
    "Port_ranking",
    "Seaport",
    "Pop_C",
    "Pop_Tract",
    "PCT_Pov",
    "WF",
    "PCT_TA",
    "PCT_ACEW",
    "PCT_TI",
    "PCT_SV",
    "SL",
    "Railway_Length",
    "Highway_Length",
    "Dock_Count",
];

#[derive(Serialize)]
struct WeekEdges {
    week: WeekId,
    edges: Vec<(u32, u32)>,
}

fn read_od(path: &std::path::Path) -> Result<Vec<OdRecord>> {
    let t = Table::read(path)?;
    let c = |n| t.require(n, path);
    let (iv, io_, id, ide, ia) = (
        c("vessel_id")?,
        c("origin_port")?,
        c("dest_port")?,
        c("depart")?,
        c("arrive")?,
    );
    t.rows
        .iter()
        .map(|r| {
            let time = |s: &str| parse_time(s).ok_or_else(|| bad(path, format!("bad time {s:?}")));
            Ok(OdRecord {
                vessel_id: r[iv].clone(),
                origin_port: cell_u32(path, &r[io_])?,
                dest_port: cell_u32(path, &r[id])?,
                depart: time(&r[ide])?,
                arrive: time(&r[ia])?,
            })
        })
        .collect()
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let od_path = rec.input(&ctx.artifact(OD))?;
    let od = read_od(&od_path)?;
    let ports = read_ports(&rec.input(&ctx.artifact(PORTS))?)?;
    let exposure = read_exposure(&rec.input(&ctx.artifact(EXPOSURE))?)?;
    let ipath = rec.input(&ctx.artifact(IMPACTS))?;
    let impacts = Table::read(&ipath)?;
    let census = io::parse_census(&rec.input(&ctx.cfg.paths.census)?)?;

    let nodes: Vec<u32> = ports.iter().map(|p| p.port_id).collect();
    let times = od.iter().flat_map(|o| [o.depart, o.arrive]);
    let (Some(t0), Some(t1)) = (times.clone().min(), times.max()) else {
        return Err(bad(&od_path, "no origin-destination legs"));
    };
    let (first, last) = (WeekId::of_instant(t0), WeekId::of_instant(t1));
    let graphs = build_weekly_graphs(&od, &nodes, first, last);
    let cents: Vec<Centralities> = graphs.iter().map(|g| g.graph.centralities()).collect();

    let weekly: Vec<WeekEdges> = graphs
        .iter()
        .map(|g| WeekEdges {
            week: g.week,
            edges: g.graph.edges(),
        })
        .collect();
    let p = rec.output(ctx.artifact("weekly_graphs.json"));
    io::write_atomic(
        &p,
        (serde_json::to_string_pretty(&weekly)? + "\n").as_bytes(),
    )?;
    let mut nt = Table::new(&["week", "port_id", "degree", "closeness", "betweenness"]);
    let mut et = Table::new(&["week", "source", "target"]);
    for (g, c) in graphs.iter().zip(&cents) {
        for (i, port) in g.graph.nodes().iter().enumerate() {
            nt.push(vec![
                g.week.to_string(),
                port.to_string(),
                c.degree[i].to_string(),
                fmt_f64(c.closeness[i]),
                fmt_f64(c.betweenness[i]),
            ]);
        }
        for (a, b) in g.graph.edges() {
            et.push(vec![g.week.to_string(), a.to_string(), b.to_string()]);
        }
    }
    nt.write(&rec.output(ctx.artifact("network_nodes.csv")))?;
    et.write(&rec.output(ctx.artifact("network_edges.csv")))?;

    // storm week of each exposure: the week of closest approach
    let mut storm_week: BTreeMap<(u32, &str), WeekId> = BTreeMap::new();
    let mut port_weeks: BTreeMap<u32, BTreeSet<WeekId>> = BTreeMap::new();
    for w in &exposure {
        let t = parse_time(&w.closest_approach)
            .ok_or_else(|| bad(&ctx.artifact(EXPOSURE), "bad closest_approach"))?;
        let wk = WeekId::of_instant(t);
        storm_week.insert((w.port_id, w.storm_id.as_str()), wk);
        port_weeks.entry(w.port_id).or_default().insert(wk);
    }
    let exp_by: BTreeMap<(u32, &str), _> = exposure
        .iter()
        .map(|w| ((w.port_id, w.storm_id.as_str()), w))
        .collect();
    let port_by: BTreeMap<u32, _> = ports.iter().map(|p| (p.port_id, p)).collect();

    let col = |n| impacts.require(n, &ipath);
    let (iid, isid, ipid) = (col("ID")?, col("SID")?, col("PID")?);
    let mut dt = Table::new(&[
        "ID",
        "PID",
        "SID",
        "storm_week",
        "D_normal",
        "D_cyclone",
        "C_normal",
        "C_cyclone",
        "B_normal",
        "B_cyclone",
        "Degree_difference",
        "CC_difference",
        "BC_difference",
        "weeks_used",
        "incomplete",
    ]);
    let mut out = Table::new(&INTERACTION_COLUMNS);
    let none = BTreeSet::new();
    for r in &impacts.rows {
        let pid = cell_u32(&ipath, &r[ipid])?;
        let sid = r[isid].as_str();
        let w = exp_by.get(&(pid, sid)).ok_or_else(|| {
            bad(
                &ipath,
                format!("interaction {pid}/{sid} has no exposure row"),
            )
        })?;
        let sw = storm_week[&(pid, sid)];
        let k = first.weeks_until(sw);
        let diff: Option<NetworkDiff> = match nodes.iter().position(|&n| n == pid) {
            Some(node) if k >= 0 && (k as usize) < cents.len() => {
                let mut affected = port_weeks.get(&pid).unwrap_or(&none).clone();
                affected.remove(&sw);
                let base =
                    baseline_centralities(&cents, first, sw, node, &affected, &ctx.cfg.network);
                Some(network_diff(pid, sw, base, &cents[k as usize], node))
            }
            _ => None,
        };
        let nd =
            |f: fn(&NetworkDiff) -> f64| diff.as_ref().map_or_else(String::new, |d| fmt_f64(f(d)));
        let row_diff = [
            nd(|d| d.baseline.degree),
            nd(|d| d.storm_degree as f64),
            nd(|d| d.baseline.closeness),
            nd(|d| d.storm_closeness),
            nd(|d| d.baseline.betweenness),
            nd(|d| d.storm_betweenness),
            nd(|d| d.degree_difference),
            nd(|d| d.cc_difference),
            nd(|d| d.bc_difference),
        ];
        let mut drow = vec![
            r[iid].clone(),
            pid.to_string(),
            sid.to_string(),
            sw.to_string(),
        ];
        drow.extend(row_diff.iter().cloned());
        drow.push(
            diff.as_ref()
                .map_or_else(String::new, |d| d.baseline.weeks_used.to_string()),
        );
        drow.push(
            diff.as_ref()
                .map_or_else(|| fmt_bool(true), |d| fmt_bool(d.baseline.incomplete)),
        );
        dt.push(drow);

        let get = |n: &str| -> String {
            if let Some(j) = impacts.column(n) {
                return r[j].clone();
            }
            w.values.get(n).cloned().unwrap_or_default()
        };
        let coast = port_by.get(&pid).map(|p| p.coast);
        let ind = |c: Coast| fmt_bool(coast == Some(c));
        let mut row = Vec::with_capacity(INTERACTION_COLUMNS.len());
        for name in INTERACTION_COLUMNS {
            let v = match name {
                "Degree_difference" => row_diff[6].clone(),
                "CC_difference" => row_diff[7].clone(),
                "BC_difference" => row_diff[8].clone(),
                "D_normal" => row_diff[0].clone(),
                "D_cyclone" => row_diff[1].clone(),
                "C_normal" => row_diff[2].clone(),
                "C_cyclone" => row_diff[3].clone(),
                "B_normal" => row_diff[4].clone(),
                "B_cyclone" => row_diff[5].clone(),
                "Coast_Gulf_of_Mexico" => ind(Coast::Gulf),
                "Coast_Atlantic" => ind(Coast::East),
                "Coast_Pacific" => ind(Coast::Pacific),
                n if CENSUS_COLUMNS.contains(&n) => {
                    census.get(pid, n).unwrap_or_default().to_string()
                }
                n => get(n),
            };
            row.push(v);
        }
        out.push(row);
    }
    dt.write(&rec.output(ctx.artifact("network_diff.csv")))?;
    out.write(&rec.output(ctx.artifact(INTERACTIONS)))?;
    log::info!(
        "network: {} weekly graphs, {} interaction records",
        graphs.len(),
        out.rows.len()
    );
    Ok(())
}
