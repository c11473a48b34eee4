//! Bidirectional stepwise selection on DIC.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::countmodel::{ModelSpec, Variant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Start,
    AddFixed,
    AddRandom,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub action: StepAction,
    pub candidate: String,
    /// `None` when the fit was skipped.
    pub dic: Option<f64>,
    pub accepted: bool,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepwiseConfig {
    /// A move must lower DIC by more than this.
    pub threshold: f64,
    /// Let random-parameter variants add a covariate as random.
    pub allow_random: bool,
    pub max_steps: usize,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            threshold: 2.0,
            allow_random: true,
            max_steps: 200,
        }
    }
}

/// A proposed model and the move that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: ModelSpec,
    pub action: StepAction,
    pub covariate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub spec: ModelSpec,
    pub dic: f64,
    pub trace: Vec<StepRecord>,
}

/// A random-parameter spec without random covariates is its NB–Lindley parent.
fn normalize(mut spec: ModelSpec, requested: Variant) -> ModelSpec {
    spec.variant = if requested == Variant::Rpnbl && spec.random.is_empty() {
        Variant::Nbl
    } else {
        requested
    };
    spec
}

/// Greedy forward selection with a backward pass after every addition.
///
/// `evaluate` receives a batch of candidate specs and returns, in order,
/// either the DIC or the reason the fit is unusable (for example
/// non-convergence); unusable candidates are skipped. Candidates within a
/// batch may be fit concurrently; decisions are taken in batch order.
pub fn stepwise_dic(
    base: &ModelSpec,
    candidates: &[String],
    cfg: &StepwiseConfig,
    mut evaluate: impl FnMut(&[ModelSpec]) -> Vec<core::result::Result<f64, String>>,
) -> Result<StepwiseResult> {
    let variant = base.variant;
    let mut blank = base.clone();
    blank.fixed.clear();
    blank.random.clear();
    let mut current = normalize(blank, variant);
    let mut trace = Vec::new();
    let mut step = 0;
    let mut dic = match evaluate(core::slice::from_ref(&current)).pop() {
        Some(Ok(d)) => d,
        Some(Err(e)) => {
            return Err(Error::ModelSpec(format!(
                "intercept-only model unusable: {e}"
            )))
        }
        None => return Err(Error::Invalid("evaluator returned no result".into())),
    };
    trace.push(StepRecord {
        step,
        action: StepAction::Start,
        candidate: "(Intercept)".into(),
        dic: Some(dic),
        accepted: true,
        note: format!("{}", current.variant),
    });
    let random_ok = cfg.allow_random && variant == Variant::Rpnbl;

    let mut try_moves = |current: &mut ModelSpec,
                         dic: &mut f64,
                         step: &mut usize,
                         trace: &mut Vec<StepRecord>,
                         moves: Vec<Candidate>|
     -> bool {
        if moves.is_empty() {
            return false;
        }
        *step += 1;
        let specs: Vec<ModelSpec> = moves.iter().map(|m| m.spec.clone()).collect();
        let results = evaluate(&specs);
        let mut best: Option<(usize, f64)> = None;
        for (i, (m, r)) in moves.iter().zip(&results).enumerate() {
            let (d, note) = match r {
                Ok(d) => (Some(*d), String::new()),
                Err(e) => (None, format!("skipped: {e}")),
            };
            if let Some(d) = d {
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((i, d));
                }
            }
            trace.push(StepRecord {
                step: *step,
                action: m.action,
                candidate: m.covariate.clone(),
                dic: d,
                accepted: false,
                note,
            });
        }
        match best {
            Some((i, d)) if *dic - d > cfg.threshold => {
                let n = trace.len();
                trace[n - moves.len() + i].accepted = true;
                *current = moves[i].spec.clone();
                *dic = d;
                true
            }
            _ => false,
        }
    };

    loop {
        if step >= cfg.max_steps {
            break;
        }
        let mut adds = Vec::new();
        for c in candidates {
            if current.covariates().any(|x| x == c) {
                continue;
            }
            let mut s = current.clone();
            s.fixed.push(c.clone());
            adds.push(Candidate {
                spec: normalize(s, variant),
                action: StepAction::AddFixed,
                covariate: c.clone(),
            });
            if random_ok {
                let mut s = current.clone();
                s.random.push(c.clone());
                adds.push(Candidate {
                    spec: normalize(s, variant),
                    action: StepAction::AddRandom,
                    covariate: c.clone(),
                });
            }
        }
        if !try_moves(&mut current, &mut dic, &mut step, &mut trace, adds) {
            break;
        }
        while step < cfg.max_steps {
            let mut removes = Vec::new();
            for c in current.covariates() {
                let mut s = current.clone();
                s.fixed.retain(|x| x != c);
                s.random.retain(|x| x != c);
                removes.push(Candidate {
                    spec: normalize(s, variant),
                    action: StepAction::Remove,
                    covariate: c.clone(),
                });
            }
            if !try_moves(&mut current, &mut dic, &mut step, &mut trace, removes) {
                break;
            }
        }
    }
    Ok(StepwiseResult {
        spec: current,
        dic,
        trace,
    })
}
