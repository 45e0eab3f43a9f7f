//! LP-format export and the `name value` solution format.

use std::fmt::Write;

use thiserror::Error;

use super::model::{Cmp, MilpModel, Sense};
use super::{Solution, SolveStatus};

const WRAP: usize = 78;
const TOL: f64 = 1e-6;

fn num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Appends `terms` to `out`, continuing on indented lines past the wrap width.
fn push_terms(out: &mut String, head: &str, terms: &[(f64, &str)], tail: &str) {
    let mut line = String::from(head);
    let mut first = true;
    let mut emit = |piece: String, line: &mut String| {
        if line.len() + piece.len() > WRAP && line.trim().len() > head.trim().len() {
            out.push_str(line.trim_end());
            out.push('\n');
            line.clear();
            line.push_str("   ");
        }
        line.push_str(&piece);
    };
    for &(c, name) in terms {
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        let coef = if mag == 1.0 {
            String::new()
        } else {
            format!("{} ", num(mag))
        };
        let piece = if first && c >= 0.0 {
            format!("{coef}{name} ")
        } else {
            format!("{sign} {coef}{name} ")
        };
        first = false;
        emit(piece, &mut line);
    }
    emit(tail.to_string(), &mut line);
    out.push_str(line.trim_end());
    out.push('\n');
}

/// Renders the model in LP format. Output depends only on the model, so
/// re-exporting yields identical text.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ kfood flow model");
    let _ = writeln!(
        out,
        "\\ objective {:?}, k = {}, penalty = {}, alpha = {}, start {:?}",
        model.objective,
        model.k,
        num(model.penalty),
        model.alpha.map_or("none".into(), num),
        model.initial_mode
    );
    out.push_str(match model.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    let mut obj: Vec<(f64, &str)> = model
        .vars
        .iter()
        .filter(|v| v.obj != 0.0)
        .map(|v| (v.obj, v.name.as_str()))
        .collect();
    if obj.is_empty() {
        obj.push((0.0, model.vars[0].name.as_str()));
    }
    push_terms(&mut out, " obj: ", &obj, "");

    out.push_str("Subject To\n");
    for row in &model.rows {
        let mut terms: Vec<(f64, &str)> = row
            .coeffs
            .iter()
            .map(|&(v, c)| (c, model.vars[v].name.as_str()))
            .collect();
        if terms.is_empty() {
            terms.push((0.0, model.vars[0].name.as_str()));
        }
        let cmp = match row.cmp {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        };
        push_terms(
            &mut out,
            &format!(" {}: ", row.name),
            &terms,
            &format!("{cmp} {}", num(row.rhs)),
        );
    }

    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.binary {
            continue;
        }
        match (v.lower, v.upper) {
            (l, u) if l == u => {
                let _ = writeln!(out, " {} = {}", v.name, num(l));
            }
            (l, u) if l == 0.0 && u == f64::INFINITY => {}
            (l, u) if u == f64::INFINITY => {
                let _ = writeln!(out, " {} >= {}", v.name, bound(l));
            }
            (l, u) => {
                let _ = writeln!(out, " {} <= {} <= {}", bound(l), v.name, num(u));
            }
        }
    }
    let binaries: Vec<(f64, &str)> = model
        .vars
        .iter()
        .filter(|v| v.binary)
        .map(|v| (1.0, v.name.as_str()))
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        let mut line = String::from(" ");
        for (_, name) in binaries {
            if line.len() + name.len() + 1 > WRAP {
                out.push_str(line.trim_end());
                out.push('\n');
                line = String::from(" ");
            }
            line.push_str(name);
            line.push(' ');
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn bound(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        num(x)
    }
}

/// Serialises every variable value with shortest round-trip formatting.
pub fn write_solution(model: &MilpModel, sol: &Solution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Status {}", sol.status.as_str());
    let _ = writeln!(out, "# Objective {}", sol.objective_value);
    for (v, value) in model.vars.iter().zip(&sol.values) {
        let _ = writeln!(out, "{} {}", v.name, value);
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseSolutionError {
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("solution inconsistent with the model: {what} off by {residual}")]
    ResidualTooLarge { what: String, residual: f64 },
}

/// Reads `name value` lines (`#` starts a comment). Variables not listed are
/// zero. The optional `# Status` and `# Objective` headers are honoured; the
/// objective is recomputed when absent.
pub fn parse_external_solution(
    model: &MilpModel,
    text: &str,
) -> Result<Solution, ParseSolutionError> {
    let index = model.var_index();
    let mut values = vec![0.0; model.var_count()];
    let mut status = SolveStatus::Optimal;
    let mut objective: Option<f64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            match words.as_slice() {
                ["Status", s, ..] => {
                    status = match *s {
                        "Optimal" => SolveStatus::Optimal,
                        "Infeasible" => SolveStatus::Infeasible,
                        "LimitReached" => SolveStatus::LimitReached,
                        other => {
                            return Err(ParseSolutionError::Malformed {
                                line,
                                reason: format!("unknown status `{other}`"),
                            })
                        }
                    }
                }
                ["Objective", rest @ ..] => {
                    let value = rest.iter().rev().find_map(|w| w.parse::<f64>().ok());
                    objective = Some(value.ok_or_else(|| ParseSolutionError::Malformed {
                        line,
                        reason: "objective header without a value".into(),
                    })?);
                }
                _ => {}
            }
            continue;
        }
        let content = trimmed.split('#').next().unwrap_or("").trim();
        let mut words = content.split_whitespace();
        let (Some(name), Some(value), None) = (words.next(), words.next(), words.next()) else {
            return Err(ParseSolutionError::Malformed {
                line,
                reason: "expected `name value`".into(),
            });
        };
        let &var = index
            .get(name)
            .ok_or_else(|| ParseSolutionError::UnknownVariable {
                line,
                name: name.to_string(),
            })?;
        values[var] = value.parse().map_err(|_| ParseSolutionError::Malformed {
            line,
            reason: format!("`{value}` is not a number"),
        })?;
    }
    if status == SolveStatus::Infeasible {
        return Ok(Solution::infeasible(model));
    }
    for (v, &x) in model.vars.iter().zip(&values) {
        let off = (v.lower - x).max(x - v.upper);
        if off > TOL {
            return Err(ParseSolutionError::ResidualTooLarge {
                what: format!("bounds of {}", v.name),
                residual: off,
            });
        }
    }
    for row in &model.rows {
        let off = row.violation(&values);
        if off > TOL {
            return Err(ParseSolutionError::ResidualTooLarge {
                what: format!("row {}", row.name),
                residual: off,
            });
        }
    }
    let objective = objective.unwrap_or_else(|| model.objective_value(&values));
    Ok(Solution::from_values(model, status, values, objective))
}
