//! Count-model fitting: model table, split, VIF screen, stepwise DIC and
//! the final fit of every variant.

use std::collections::BTreeMap;
use std::path::Path;

use portres_core::countmodel::diag::ParamSummary;
use portres_core::countmodel::{
    dic, fit_prepared_with, mae_rmse, marginal_dic, predict_mean, prepare, split_train_test,
    ChainRunner, Dataset, McmcConfig, ModelSpec, PosteriorFit, Variant,
};
use portres_core::effects::{stepwise_dic, vif_screen, StepwiseConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::common::{bad, INTERACTIONS};
use super::{Context, Record};
use crate::config::{DicKind, ModelSection};
use crate::error::{PipelineError, Result};
use crate::io::{self, fmt_bool, fmt_f64, parse_f64, Table};

pub const MODEL_TABLE: &str = "model_table.csv";
pub const SPLIT: &str = "split.csv";
pub const COMPARISON: &str = "comparison.csv";

/// Complete-case rows of the interaction table with derived covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTable {
    pub ids: Vec<String>,
    pub responses: Vec<String>,
    /// Per response, the rounded non-negative counts.
    pub y: Vec<Vec<u64>>,
    pub covariates: Vec<String>,
    /// Row-major covariate values.
    pub rows: Vec<Vec<f64>>,
    pub dropped_incomplete: usize,
    /// Per response, negative values clamped to zero.
    pub clamped: Vec<usize>,
}

impl ModelTable {
    pub fn dataset(&self, response: usize, idx: &[usize]) -> Result<Dataset> {
        Ok(Dataset::new(
            self.covariates.clone(),
            idx.iter().map(|&k| self.y[response][k]).collect(),
            idx.iter().map(|&k| self.rows[k].clone()).collect(),
        )?)
    }

    pub fn column(&self, j: usize, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&k| self.rows[k][j]).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["ID".to_string()];
        header.extend(self.responses.iter().cloned());
        header.extend(self.covariates.iter().cloned());
        let mut t = Table::new(&header);
        for (k, id) in self.ids.iter().enumerate() {
            let mut r = vec![id.clone()];
            r.extend(self.y.iter().map(|y| y[k].to_string()));
            r.extend(self.rows[k].iter().map(|&v| fmt_f64(v)));
            t.push(r);
        }
        t
    }

    /// Reads a table written by [`ModelTable::to_table`].
    pub fn from_table(t: &Table, responses: &[String], path: &Path) -> Result<Self> {
        let ii = t.require("ID", path)?;
        let ir: Vec<usize> = responses
            .iter()
            .map(|r| t.require(r, path))
            .collect::<Result<_>>()?;
        let ic: Vec<usize> = (0..t.header.len())
            .filter(|j| *j != ii && !ir.contains(j))
            .collect();
        let mut y = vec![Vec::with_capacity(t.rows.len()); responses.len()];
        let mut rows = Vec::with_capacity(t.rows.len());
        for r in &t.rows {
            for (yy, &j) in y.iter_mut().zip(&ir) {
                yy.push(
                    r[j].parse::<u64>()
                        .map_err(|_| bad(path, format!("bad count {:?}", r[j])))?,
                );
            }
            rows.push(
                ic.iter()
                    .map(|&j| {
                        parse_f64(&r[j]).ok_or_else(|| bad(path, format!("bad value {:?}", r[j])))
                    })
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        Ok(Self {
            ids: t.rows.iter().map(|r| r[ii].clone()).collect(),
            responses: responses.to_vec(),
            y,
            covariates: ic.iter().map(|&j| t.header[j].clone()).collect(),
            rows,
            dropped_incomplete: 0,
            clamped: vec![0; responses.len()],
        })
    }
}

/// Value of a model covariate, including the derived ones.
fn covariate(get: &dyn Fn(&str) -> Option<f64>, name: &str) -> Option<f64> {
    let sshs = || get("SSHS");
    let dummy = |k: f64| sshs().map(|s| f64::from(u8::from(s == k)));
    match name {
        "Ln_Pop_C" => get("Pop_C").filter(|p| *p > 0.0).map(f64::ln),
        "SSHS_TD" => dummy(-1.0),
        "SSHS_1" => dummy(1.0),
        "SSHS_2" => dummy(2.0),
        "SSHS_3" => dummy(3.0),
        "SSHS_4" => dummy(4.0),
        "SSHS_5" => dummy(5.0),
        n => get(n),
    }
}

/// Round half to even, as count responses are modeled on integers.
fn to_count(v: f64) -> (u64, bool) {
    let r = v.round_ties_even();
    if r < 0.0 {
        (0, true)
    } else {
        (r as u64, false)
    }
}

pub fn build_model_table(t: &Table, path: &Path, m: &ModelSection) -> Result<ModelTable> {
    let ii = t.require("ID", path)?;
    for r in &m.responses {
        t.require(r, path)?;
    }
    let mut out = ModelTable {
        ids: Vec::new(),
        responses: m.responses.clone(),
        y: vec![Vec::new(); m.responses.len()],
        covariates: m.covariates.clone(),
        rows: Vec::new(),
        dropped_incomplete: 0,
        clamped: vec![0; m.responses.len()],
    };
    for r in &t.rows {
        let get = |n: &str| t.column(n).and_then(|j| parse_f64(&r[j]));
        let ys: Option<Vec<f64>> = m.responses.iter().map(|n| get(n)).collect();
        let xs: Option<Vec<f64>> = m.covariates.iter().map(|n| covariate(&get, n)).collect();
        let (Some(ys), Some(xs)) = (ys, xs) else {
            out.dropped_incomplete += 1;
            continue;
        };
        for (k, v) in ys.into_iter().enumerate() {
            let (c, clamped) = to_count(v);
            out.y[k].push(c);
            out.clamped[k] += usize::from(clamped);
        }
        out.ids.push(r[ii].clone());
        out.rows.push(xs);
    }
    if out.ids.is_empty() {
        return Err(bad(path, "no complete interaction records to model"));
    }
    Ok(out)
}

/// Posterior summary and fit statistics written per response and variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub response: String,
    /// Variant label in the comparison table.
    pub label: Variant,
    pub spec: ModelSpec,
    pub param_names: Vec<String>,
    pub summary: Vec<ParamSummary>,
    pub converged: bool,
    pub max_rhat: f64,
    pub iterations: usize,
    pub seed: u64,
    pub dic: f64,
    pub p_d: f64,
    pub dic_kind: DicKind,
    pub mae: f64,
    pub rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub note: String,
}

pub fn fit_name(response: &str, v: Variant) -> String {
    format!("fit_{response}_{}.json", v.as_str())
}

pub fn draws_name(response: &str, v: Variant) -> String {
    format!("draws_{response}_{}.csv", v.as_str())
}

/// Fits `spec` with chains advanced in parallel.
pub fn run_fit(spec: &ModelSpec, data: &Dataset, cfg: &McmcConfig) -> Result<PosteriorFit> {
    let p = prepare(spec, data)?;
    Ok(fit_prepared_with(
        &p,
        cfg,
        |runners: &mut [ChainRunner<'_>], n| {
            runners.par_iter_mut().for_each(|r| r.run(n));
        },
    )?)
}

fn criterion(fit: &PosteriorFit, data: &Dataset, kind: DicKind) -> Result<(f64, f64)> {
    let d = match kind {
        DicKind::Conditional => dic(fit),
        DicKind::Marginal => marginal_dic(fit, data, &Default::default())?,
    };
    Ok((d.dic, d.p_d))
}

fn derive_seed(base: u64, response: usize, variant: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((response as u64) << 8 | variant as u64)
}

/// The selected covariates refit under `v`; variants without random
/// parameters take the random covariates as fixed.
fn spec_for(selected: &ModelSpec, v: Variant, m: &ModelSection) -> (ModelSpec, String) {
    let mut s = selected.clone();
    s.priors = m.priors;
    s.literal_eq11 = m.literal_eq11;
    let mut note = String::new();
    match v {
        Variant::Rpnbl if s.random.is_empty() => {
            s.variant = Variant::Nbl;
            note = "no random parameter selected; fitted as NBL".into();
        }
        Variant::Rpnbl => s.variant = v,
        _ => {
            let r = std::mem::take(&mut s.random);
            s.fixed.extend(r);
            s.variant = v;
        }
    }
    (s, note)
}

fn write_summary(path: &Path, summary: &[ParamSummary]) -> Result<()> {
    let mut t = Table::new(&["parameter", "mean", "sd", "q025", "q975", "rhat", "ess"]);
    for s in summary {
        t.push(vec![
            s.parameter.clone(),
            fmt_f64(s.mean),
            fmt_f64(s.sd),
            fmt_f64(s.q025),
            fmt_f64(s.q975),
            fmt_f64(s.rhat),
            fmt_f64(s.ess),
        ]);
    }
    t.write(path)
}

fn write_draws(path: &Path, fit: &PosteriorFit) -> Result<()> {
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(fit.param_names.iter().cloned());
    let mut t = Table::new(&header);
    for c in &fit.chains {
        for d in 0..c.n_draws() {
            let mut r = vec![c.chain.to_string(), d.to_string()];
            r.extend(c.draw(d).iter().map(|&v| fmt_f64(v)));
            t.push(r);
        }
    }
    t.write(path)
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let m = &ctx.cfg.model;
    let e = &ctx.cfg.effects;
    let ipath = rec.input(&ctx.artifact(INTERACTIONS))?;
    let table = build_model_table(&Table::read(&ipath)?, &ipath, m)?;
    table
        .to_table()
        .write(&rec.output(ctx.artifact(MODEL_TABLE)))?;
    let n = table.ids.len();
    let (train, test) = split_train_test(n, m.train_fraction, m.split_seed).map_err(|err| {
        PipelineError::invalid(format!("{n} complete records cannot be split: {err}"))
    })?;
    let mut st = Table::new(&["ID", "set"]);
    for (k, id) in table.ids.iter().enumerate() {
        st.push(vec![
            id.clone(),
            if test.binary_search(&k).is_ok() {
                "test"
            } else {
                "train"
            }
            .into(),
        ]);
    }
    st.write(&rec.output(ctx.artifact(SPLIT)))?;

    let mut cmp = Table::new(&[
        "response",
        "variant",
        "fitted_as",
        "DIC",
        "p_D",
        "MAE",
        "RMSE",
        "converged",
        "max_rhat",
        "iterations",
        "note",
    ]);
    let mut selection_log = Vec::new();
    for (ri, response) in m.responses.iter().enumerate() {
        let train_d = table.dataset(ri, &train)?;
        let test_d = table.dataset(ri, &test)?;
        let mut mcmc = m.mcmc;

        // screening
        let mut candidates = Vec::new();
        let mut vt = Table::new(&["variable", "VIF", "status"]);
        for (j, name) in table.covariates.iter().enumerate() {
            let col = table.column(j, &train);
            if col.iter().all(|v| *v == col[0]) {
                vt.push(vec![name.clone(), String::new(), "constant".into()]);
            } else {
                candidates.push(j);
            }
        }
        let mut names: Vec<String> = candidates
            .iter()
            .map(|&j| table.covariates[j].clone())
            .collect();
        if m.select {
            let cols: Vec<Vec<f64>> = candidates
                .iter()
                .map(|&j| table.column(j, &train))
                .collect();
            let rep = vif_screen(&names, &cols, e.vif_threshold)?;
            for (name, v) in &rep.table {
                vt.push(vec![name.clone(), fmt_f64(*v), "retained".into()]);
            }
            for (name, v) in &rep.dropped {
                vt.push(vec![
                    name.clone(),
                    if v.is_finite() {
                        fmt_f64(*v)
                    } else {
                        "inf".into()
                    },
                    "dropped".into(),
                ]);
            }
            selection_log.extend(rep.log.iter().map(|l| format!("{response}: {l}")));
            names = rep.retained;
        }
        vt.write(&rec.output(ctx.artifact(&format!("vif_{response}.csv"))))?;

        // selection
        let selected = if m.select {
            mcmc.seed = derive_seed(ctx.cfg.seed, ri, 99);
            let base = ModelSpec {
                priors: m.priors,
                literal_eq11: m.literal_eq11,
                ..ModelSpec::intercept_only(m.selection_variant)
            };
            let scfg = StepwiseConfig {
                threshold: e.stepwise_threshold,
                allow_random: e.allow_random,
                max_steps: e.max_steps,
            };
            let evaluate = |specs: &[ModelSpec]| -> Vec<std::result::Result<f64, String>> {
                specs
                    .par_iter()
                    .map(|s| {
                        let f = run_fit(s, &train_d, &mcmc).map_err(|e| e.to_string())?;
                        if m.require_convergence && !f.converged {
                            return Err(format!("not converged (max R-hat {:.3})", f.max_rhat()));
                        }
                        criterion(&f, &train_d, m.dic)
                            .map(|c| c.0)
                            .map_err(|e| e.to_string())
                    })
                    .collect()
            };
            let res = stepwise_dic(&base, &names, &scfg, evaluate)?;
            let mut tt = Table::new(&["step", "action", "candidate", "DIC", "accepted", "note"]);
            for s in &res.trace {
                tt.push(vec![
                    s.step.to_string(),
                    serde_json::to_value(s.action)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                    s.candidate.clone(),
                    s.dic.map_or_else(String::new, fmt_f64),
                    fmt_bool(s.accepted),
                    s.note.clone(),
                ]);
            }
            tt.write(&rec.output(ctx.artifact(&format!("stepwise_{response}.csv"))))?;
            res.spec
        } else {
            ModelSpec::new(m.selection_variant, names, Vec::new())
        };

        // final fits
        let jobs: Vec<(usize, Variant, ModelSpec, String)> = m
            .variants
            .iter()
            .map(|&v| {
                let vi = Variant::ALL.iter().position(|&a| a == v).unwrap_or(0);
                let (s, note) = spec_for(&selected, v, m);
                (vi, v, s, note)
            })
            .collect();
        let fits: Vec<Result<(PosteriorFit, u64)>> = jobs
            .par_iter()
            .map(|(vi, _, s, _)| {
                let mut c = m.mcmc;
                c.seed = derive_seed(ctx.cfg.seed, ri, *vi);
                Ok((run_fit(s, &train_d, &c)?, c.seed))
            })
            .collect();
        for ((_, label, _, note), fit) in jobs.into_iter().zip(fits) {
            let (fit, seed) = fit?;
            let (dic_v, p_d) = criterion(&fit, &train_d, m.dic)?;
            let pred = predict_mean(&fit, &test_d)?;
            let obs: Vec<f64> = test_d.y.iter().map(|&y| y as f64).collect();
            let (mae, rmse) = mae_rmse(&obs, &pred);
            if !fit.converged {
                rec.non_converged.push(format!("{response}/{label}"));
            }
            let r = FitRecord {
                response: response.clone(),
                label,
                spec: fit.spec.clone(),
                param_names: fit.param_names.clone(),
                summary: fit.summary.clone(),
                converged: fit.converged,
                max_rhat: fit.max_rhat(),
                iterations: fit.iterations,
                seed,
                dic: dic_v,
                p_d,
                dic_kind: m.dic,
                mae,
                rmse,
                n_train: train.len(),
                n_test: test.len(),
                note,
            };
            let p = rec.output(ctx.artifact(&fit_name(response, label)));
            io::write_atomic(&p, (serde_json::to_string_pretty(&r)? + "\n").as_bytes())?;
            write_summary(
                &rec.output(ctx.artifact(&format!("summary_{response}_{}.csv", label.as_str()))),
                &r.summary,
            )?;
            write_draws(
                &rec.output(ctx.artifact(&draws_name(response, label))),
                &fit,
            )?;
            cmp.push(vec![
                response.clone(),
                label.as_str().into(),
                r.spec.variant.as_str().into(),
                fmt_f64(r.dic),
                fmt_f64(r.p_d),
                fmt_f64(r.mae),
                fmt_f64(r.rmse),
                fmt_bool(r.converged),
                fmt_f64(r.max_rhat),
                r.iterations.to_string(),
                r.note.clone(),
            ]);
        }
    }
    cmp.write(&rec.output(ctx.artifact(COMPARISON)))?;

    #[derive(Serialize)]
    struct FitLog<'a> {
        records: usize,
        dropped_incomplete: usize,
        negative_responses_clamped: BTreeMap<&'a str, usize>,
        n_train: usize,
        n_test: usize,
        selection: Vec<String>,
        non_converged: &'a [String],
    }
    let log = FitLog {
        records: n,
        dropped_incomplete: table.dropped_incomplete,
        negative_responses_clamped: m
            .responses
            .iter()
            .map(String::as_str)
            .zip(table.clamped.iter().copied())
            .collect(),
        n_train: train.len(),
        n_test: test.len(),
        selection: selection_log,
        non_converged: &rec.non_converged,
    };
    let p = ctx.artifact("fit_log.json");
    io::write_atomic(&p, (serde_json::to_string_pretty(&log)? + "\n").as_bytes())?;
    rec.output(p);
    log::info!(
        "fit: {} records, {} train / {} test",
        n,
        train.len(),
        test.len()
    );
    Ok(())
}
