//! Fixed-field MPS output for [`MipModel`] and a reader for the subset we emit.
//!
//! Fields start at the classic columns 2, 5, 15, 25, 40 and 50; names longer
//! than eight characters push later fields right, so the reader splits on
//! whitespace. Numbers use Rust's shortest round-trip formatting, which
//! makes export → parse reproduce every coefficient bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Constraint, Family, MipModel, Sense, VarKind, Variable};
use crate::error::{Error, Result};

const OBJ: &str = "OBJ";

fn num(v: f64) -> String {
    if v == 0.0 {
        // collapse -0
        "0".into()
    } else {
        format!("{v:?}")
    }
}

fn field_line(out: &mut String, code: &str, name: &str, rest: &[(&str, String)]) {
    let mut line = format!(" {code:<2} {name:<8}");
    for (i, (row, val)) in rest.iter().enumerate() {
        if i > 0 {
            line.push_str("   ");
        }
        let _ = write!(line, "  {row:<8}  {val:>12}");
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

pub fn write_mps(model: &MipModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", model.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ}");
    for c in &model.constraints {
        let code = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {code}  {}", c.name);
    }

    // column-major entries
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, coef) in &c.terms {
            by_col[v].push((r, coef));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (v, var) in model.variables.iter().enumerate() {
        let int = var.kind != VarKind::Continuous;
        if int != in_int {
            let tag = if int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker:<4}          'MARKER'                 {tag}");
            marker += 1;
            in_int = int;
        }
        let obj = model.objective[v];
        let mut wrote = false;
        if obj != 0.0 || var.kind == VarKind::Binary {
            field_line(&mut out, "", &var.name, &[(OBJ, num(obj))]);
            wrote = true;
        }
        for &(r, coef) in &by_col[v] {
            field_line(&mut out, "", &var.name, &[(&model.constraints[r].name, num(coef))]);
            wrote = true;
        }
        if !wrote {
            field_line(&mut out, "", &var.name, &[(OBJ, num(0.0))]);
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker:<4}          'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in &model.constraints {
        if c.rhs != 0.0 {
            field_line(&mut out, "", "RHS", &[(&c.name, num(c.rhs))]);
        }
    }

    out.push_str("BOUNDS\n");
    for var in &model.variables {
        match var.kind {
            VarKind::Binary => field_line(&mut out, "UP", "BND", &[(&var.name, num(1.0))]),
            _ => {
                if var.lower != 0.0 {
                    field_line(&mut out, "LO", "BND", &[(&var.name, num(var.lower))]);
                }
                if var.upper.is_finite() {
                    field_line(&mut out, "UP", "BND", &[(&var.name, num(var.upper))]);
                } else if var.kind == VarKind::Integer {
                    let _ = writeln!(out, " PL BND       {}", var.name);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn export_mps(model: &MipModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mps(model))?;
    Ok(())
}

fn family_of(row: &str) -> Family {
    let head = row.split('_').next().unwrap_or("");
    match head {
        "in" | "out" | "depot" => Family::Routing,
        "cap" | "load" => Family::Capacity,
        h if h.starts_with('t') => Family::Time,
        _ => Family::Distance,
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| Error::Mps {
        line,
        msg: format!("bad number {tok:?}"),
    })
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

/// Reads an MPS file written by [`write_mps`].
pub fn parse_mps(text: &str) -> Result<MipModel> {
    let mut name = String::new();
    let mut section = Section::None;
    let mut rows: Vec<(String, Option<Sense>)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut vars: Vec<Variable> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut objective: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut integer = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match toks[0] {
                "NAME" => {
                    name = toks.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => {
                    return Err(Error::Mps {
                        line,
                        msg: format!("unsupported section {other}"),
                    })
                }
            };
            continue;
        }
        let bad = |msg: &str| Error::Mps {
            line,
            msg: msg.to_string(),
        };
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(bad("row line needs a type and a name"));
                }
                let sense = match toks[0] {
                    "N" => None,
                    "L" => Some(Sense::Le),
                    "G" => Some(Sense::Ge),
                    "E" => Some(Sense::Eq),
                    _ => return Err(bad("unknown row type")),
                };
                if sense.is_some() {
                    row_index.insert(toks[1].to_string(), entries.len());
                    rhs.push(0.0);
                    entries.push(Vec::new());
                }
                rows.push((toks[1].to_string(), sense));
            }
            Section::Columns => {
                if toks.len() == 3 && toks[1] == "'MARKER'" {
                    integer = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        _ => return Err(bad("unknown marker")),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("column line needs one or two row/value pairs"));
                }
                let v = match var_index.get(toks[0]) {
                    Some(&v) => v,
                    None => {
                        var_index.insert(toks[0].to_string(), vars.len());
                        vars.push(Variable {
                            name: toks[0].to_string(),
                            kind: if integer {
                                VarKind::Integer
                            } else {
                                VarKind::Continuous
                            },
                            lower: 0.0,
                            upper: f64::INFINITY,
                        });
                        objective.push(0.0);
                        vars.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let val = parse_num(pair[1], line)?;
                    if pair[0] == OBJ {
                        objective[v] = val;
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| bad("unknown row"))?;
                        entries[r].push((v, val));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("rhs line needs one or two row/value pairs"));
                }
                for pair in toks[1..].chunks(2) {
                    let r = *row_index.get(pair[0]).ok_or_else(|| bad("unknown row"))?;
                    rhs[r] = parse_num(pair[1], line)?;
                }
            }
            Section::Bounds => {
                let v = *toks
                    .get(2)
                    .and_then(|n| var_index.get(*n))
                    .ok_or_else(|| bad("bound on unknown column"))?;
                let val = || -> Result<f64> {
                    parse_num(toks.get(3).ok_or_else(|| bad("missing bound value"))?, line)
                };
                match toks[0] {
                    "UP" => vars[v].upper = val()?,
                    "LO" => vars[v].lower = val()?,
                    "FX" => {
                        let x = val()?;
                        vars[v].lower = x;
                        vars[v].upper = x;
                    }
                    "PL" => vars[v].upper = f64::INFINITY,
                    "BV" => {
                        vars[v].kind = VarKind::Integer;
                        vars[v].lower = 0.0;
                        vars[v].upper = 1.0;
                    }
                    _ => return Err(bad("unsupported bound type")),
                }
            }
            Section::None => return Err(bad("data outside a section")),
        }
    }

    for v in &mut vars {
        if v.kind == VarKind::Integer && v.lower == 0.0 && v.upper == 1.0 {
            v.kind = VarKind::Binary;
        }
    }
    let constraints = rows
        .into_iter()
        .filter_map(|(name, sense)| sense.map(|s| (name, s)))
        .zip(entries.into_iter().zip(rhs))
        .map(|((name, sense), (mut terms, rhs))| {
            terms.sort_by_key(|t| t.0);
            Constraint {
                family: family_of(&name),
                name,
                terms,
                sense,
                rhs,
            }
        })
        .collect();
    Ok(MipModel {
        name,
        variables: vars,
        constraints,
        objective,
    })
}
