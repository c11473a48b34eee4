//! Average marginal effects of every fitted model on the held-out records.

use std::collections::BTreeMap;

use portres_core::effects::{ame_for_models, AmeConfig, AmeModel, CovariateKind};

use super::common::bad;
use super::fit::{draws_name, fit_name, FitRecord, ModelTable, MODEL_TABLE, SPLIT};
use super::{Context, Record};
use crate::error::Result;
use crate::io::{self, fmt_f64, parse_f64, Table};

pub fn ame_name(response: &str, label: &str) -> String {
    format!("ame_{response}_{label}.csv")
}

fn model_from(fit: &FitRecord, values: &[f64]) -> AmeModel {
    let names: Vec<String> = fit.spec.covariates().cloned().collect();
    let nb = 1 + names.len();
    let nr = fit.spec.random.len();
    AmeModel {
        beta: values[..nb].to_vec(),
        sigma: values[nb..nb + nr].to_vec(),
        names,
    }
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let m = &ctx.cfg.model;
    let e = &ctx.cfg.effects;
    let tpath = rec.input(&ctx.artifact(MODEL_TABLE))?;
    let table = ModelTable::from_table(&Table::read(&tpath)?, &m.responses, &tpath)?;
    let spath = rec.input(&ctx.artifact(SPLIT))?;
    let split = Table::read(&spath)?;
    let (iid, iset) = (split.require("ID", &spath)?, split.require("set", &spath)?);
    let test_ids: Vec<&str> = split
        .rows
        .iter()
        .filter(|r| r[iset] == "test")
        .map(|r| r[iid].as_str())
        .collect();
    let test: Vec<usize> = table
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| test_ids.contains(&id.as_str()))
        .map(|(k, _)| k)
        .collect();
    if test.is_empty() {
        return Err(bad(&spath, "no test records"));
    }
    let all: Vec<usize> = (0..table.ids.len()).collect();
    let kinds: BTreeMap<String, CovariateKind> = table
        .covariates
        .iter()
        .enumerate()
        .map(|(j, n)| (n.clone(), CovariateKind::infer(&table.column(j, &all))))
        .collect();
    let cfg = AmeConfig {
        draws: e.halton_draws,
        skip: e.halton_skip,
        full_posterior: e.full_posterior,
        posterior_draws: e.posterior_draws,
    };

    for (ri, response) in m.responses.iter().enumerate() {
        let data = table.dataset(ri, &test)?;
        for v in &m.variants {
            let fpath = rec.input(&ctx.artifact(&fit_name(response, *v)))?;
            let fit: FitRecord = serde_json::from_slice(&io::read_bytes(&fpath)?)?;
            let models = if e.full_posterior {
                let dpath = rec.input(&ctx.artifact(&draws_name(response, *v)))?;
                let dt = Table::read(&dpath)?;
                let cols: Vec<usize> = fit
                    .param_names
                    .iter()
                    .map(|n| dt.require(n, &dpath))
                    .collect::<Result<_>>()?;
                let stride = dt.rows.len().div_ceil(e.posterior_draws.max(1)).max(1);
                dt.rows
                    .iter()
                    .step_by(stride)
                    .map(|r| {
                        let vals: Vec<f64> = cols
                            .iter()
                            .map(|&j| parse_f64(&r[j]).unwrap_or(f64::NAN))
                            .collect();
                        model_from(&fit, &vals)
                    })
                    .collect()
            } else {
                let means: Vec<f64> = fit.summary.iter().map(|s| s.mean).collect();
                vec![model_from(&fit, &means)]
            };
            let mut rep = ame_for_models(&models, &data, &kinds, &cfg)?;
            rep.full_posterior = e.full_posterior;

            let mut t = Table::new(&["variable", "AME", "type"]);
            for r in &rep.rows {
                t.push(vec![
                    r.variable.clone(),
                    fmt_f64(r.ame),
                    r.kind.as_str().into(),
                ]);
            }
            t.write(&rec.output(ctx.artifact(&ame_name(response, v.as_str()))))?;

            let mut header = vec!["ID".to_string()];
            header.extend(rep.rows.iter().map(|r| r.variable.clone()));
            let mut ot = Table::new(&header);
            for (i, &k) in test.iter().enumerate() {
                let mut row = vec![table.ids[k].clone()];
                row.extend(rep.per_observation.iter().map(|c| fmt_f64(c[i])));
                ot.push(row);
            }
            ot.write(&rec.output(ctx.artifact(&format!("ame_obs_{response}_{}.csv", v.as_str()))))?;
        }
    }
    log::info!(
        "effects: {} responses on {} test records",
        m.responses.len(),
        test.len()
    );
    Ok(())
}
