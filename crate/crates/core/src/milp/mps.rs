//! Fixed-format MPS writer.
//!
//! Row and column names are replaced by 8-character positional labels
//! (`R0000001`, `C0000001`) so every field fits its fixed column; the
//! original names are listed in `*` comment lines at the top of the file.
//! The objective row is `COST`. Its RHS entry holds the negated objective
//! constant, which is the convention HiGHS, CPLEX and Gurobi read.

use std::fmt::Write;

use super::{MilpModel, Sense, VarKind};

const OBJ_ROW: &str = "COST";

fn row_label(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_label(j: usize) -> String {
    format!("C{:07}", j + 1)
}

/// Formats `v` into at most 12 characters.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    (0..=10)
        .rev()
        .map(|p| format!("{v:.p$e}"))
        .find(|s| s.len() <= 12)
        .unwrap_or_else(|| format!("{v:e}"))
}

/// One data line laid out on columns 2-3, 5-12, 15-22, 25-36 (and 40-47, 50-61).
fn data_line(out: &mut String, code: &str, name: &str, row: &str, value: Option<f64>) {
    let mut line = format!(" {code:<2} {name:<8}");
    if !row.is_empty() || value.is_some() {
        let _ = write!(line, "  {row:<8}");
        if let Some(v) = value {
            let _ = write!(line, "  {:>12}", num(v));
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

pub fn export_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    let name = if model.name.is_empty() {
        "MODEL"
    } else {
        model.name.as_str()
    };
    let _ = writeln!(
        out,
        "* rows {} columns {}",
        model.num_constraints(),
        model.num_variables()
    );
    for (i, c) in model.constraints().iter().enumerate() {
        let _ = writeln!(out, "* {} {}", row_label(i), c.name);
    }
    for (j, v) in model.variables().iter().enumerate() {
        let _ = writeln!(out, "* {} {}", col_label(j), v.name);
    }
    let _ = writeln!(out, "NAME          {name}");

    out.push_str("ROWS\n");
    data_line(&mut out, "N", OBJ_ROW, "", None);
    for (i, c) in model.constraints().iter().enumerate() {
        let code = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        data_line(&mut out, code, &row_label(i), "", None);
    }

    // column-major view
    let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.num_variables()];
    for (v, a) in model.objective() {
        if *a != 0.0 {
            columns[v.index()].push((OBJ_ROW.to_string(), *a));
        }
    }
    for (i, c) in model.constraints().iter().enumerate() {
        for (v, a) in &c.terms {
            if *a != 0.0 {
                columns[v.index()].push((row_label(i), *a));
            }
        }
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in columns.iter().enumerate() {
        let label = col_label(j);
        if entries.is_empty() {
            data_line(&mut out, "", &label, OBJ_ROW, Some(0.0));
        }
        for (row, a) in entries {
            data_line(&mut out, "", &label, row, Some(*a));
        }
    }

    out.push_str("RHS\n");
    if model.objective_constant() != 0.0 {
        data_line(&mut out, "", "RHS", OBJ_ROW, Some(-model.objective_constant()));
    }
    for (i, c) in model.constraints().iter().enumerate() {
        if c.rhs != 0.0 {
            data_line(&mut out, "", "RHS", &row_label(i), Some(c.rhs));
        }
    }

    out.push_str("RANGES\n");

    out.push_str("BOUNDS\n");
    for (j, v) in model.variables().iter().enumerate() {
        let label = col_label(j);
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            data_line(&mut out, "BV", "BND", &label, None);
            continue;
        }
        let (lo, up) = (v.lower, v.upper);
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            data_line(&mut out, "FR", "BND", &label, None);
        } else if lo == up {
            data_line(&mut out, "FX", "BND", &label, Some(lo));
        } else {
            if lo == f64::NEG_INFINITY {
                data_line(&mut out, "MI", "BND", &label, None);
            } else if lo != 0.0 {
                data_line(&mut out, "LO", "BND", &label, Some(lo));
            }
            if up != f64::INFINITY {
                data_line(&mut out, "UP", "BND", &label, Some(up));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
