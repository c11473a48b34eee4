//! Markdown report with comparison, coefficient and marginal-effect tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::effects::ame_name;
use super::fit::{fit_name, FitRecord};
use super::{Context, Record};
use crate::error::Result;
use crate::io::{self, fmt_f64, Table};

fn num(x: f64) -> String {
    if x.is_finite() && x.abs() >= 1e6 {
        format!("{x:.3e}")
    } else if x.is_finite() {
        format!("{x:.3}")
    } else {
        "n/a".into()
    }
}

pub(super) fn run(ctx: &Context, rec: &mut Record) -> Result<()> {
    let m = &ctx.cfg.model;
    let mut md = String::from("# Port resilience model report\n");
    let mut coef = Table::new(&[
        "response",
        "variant",
        "parameter",
        "mean",
        "q025",
        "q975",
        "rhat",
    ]);
    let mut any = false;

    for response in &m.responses {
        let mut fits: Vec<FitRecord> = Vec::new();
        let mut missing = Vec::new();
        for v in &m.variants {
            let p = ctx.artifact(&fit_name(response, *v));
            if p.exists() {
                fits.push(serde_json::from_slice(&io::read_bytes(&rec.input(&p)?)?)?);
            } else {
                missing.push(v.as_str());
            }
        }
        any |= !fits.is_empty();
        let stamp = if fits.iter().any(|f| !f.converged) {
            " (NON-CONVERGED)"
        } else {
            ""
        };
        let _ = writeln!(md, "\n## {response}{stamp}\n");
        if !missing.is_empty() {
            let _ = writeln!(md, "Missing fits: {}.\n", missing.join(", "));
        }
        if fits.is_empty() {
            continue;
        }

        let _ = writeln!(
            md,
            "| Model | DIC | MAE | RMSE | max R-hat | status |\n|---|---|---|---|---|---|"
        );
        for f in &fits {
            let status = if f.converged {
                "converged"
            } else {
                "NON-CONVERGED"
            };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {status} |",
                f.label,
                num(f.dic),
                num(f.mae),
                num(f.rmse),
                num(f.max_rhat)
            );
        }
        let mut order: Vec<&FitRecord> = fits.iter().collect();
        order.sort_by(|a, b| a.dic.total_cmp(&b.dic));
        let row: Vec<String> = order
            .iter()
            .map(|f| format!("{} ({})", f.label, num(f.dic)))
            .collect();
        let _ = writeln!(md, "\nDIC ordering: {}\n", row.join(" ≤ "));
        for f in &fits {
            if !f.note.is_empty() {
                let _ = writeln!(md, "Note ({}): {}\n", f.label, f.note);
            }
        }

        // coefficient table over the union of parameters
        let mut params: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        for f in &fits {
            for p in &f.param_names {
                if seen.insert(p.clone()) {
                    params.push(p.clone());
                }
            }
        }
        let _ = write!(md, "| Parameter |");
        for f in &fits {
            let _ = write!(md, " {} |", f.label);
        }
        let _ = write!(md, "\n|---|");
        for _ in &fits {
            let _ = write!(md, "---|");
        }
        md.push('\n');
        for p in &params {
            let _ = write!(md, "| {p} |");
            for f in &fits {
                match f.summary.iter().find(|s| &s.parameter == p) {
                    Some(s) => {
                        let _ = write!(md, " {} [{}, {}] |", num(s.mean), num(s.q025), num(s.q975));
                    }
                    None => md.push_str(" − |"),
                }
            }
            md.push('\n');
        }
        for f in &fits {
            for s in &f.summary {
                coef.push(vec![
                    response.clone(),
                    f.label.as_str().into(),
                    s.parameter.clone(),
                    fmt_f64(s.mean),
                    fmt_f64(s.q025),
                    fmt_f64(s.q975),
                    fmt_f64(s.rhat),
                ]);
            }
        }

        for f in &fits {
            let p = ctx.artifact(&ame_name(response, f.label.as_str()));
            if !p.exists() {
                let _ = writeln!(
                    md,
                    "\nAverage marginal effects ({}): not computed.",
                    f.label
                );
                continue;
            }
            let t = Table::read(&rec.input(&p)?)?;
            let _ = writeln!(
                md,
                "\nAverage marginal effects ({}):\n\n| Variable | AME | Type |\n|---|---|---|",
                f.label
            );
            for r in &t.rows {
                let v = r[1].parse::<f64>().map_or_else(|_| r[1].clone(), num);
                let _ = writeln!(md, "| {} | {v} | {} |", r[0], r[2]);
            }
        }
    }
    if !any {
        md.push_str("\nNo fitted models were found.\n");
    }
    coef.write(&rec.output(ctx.artifact("coefficients.csv")))?;
    let p = rec.output(ctx.artifact("report.md"));
    io::write_atomic(&p, md.as_bytes())?;
    Ok(())
}
