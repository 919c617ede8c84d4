//! Fixed-format MPS export, plus an importer used for round-trip checks.
//!
//! Row and column names are truncated to eight characters with deterministic
//! collision suffixes. One coefficient is written per line, so numeric values
//! keep full shortest-round-trip precision regardless of the historical
//! twelve-character value field. Integral columns are wrapped in
//! INTORG/INTEND markers and always receive explicit bound lines, which keeps
//! the file unambiguous across readers that disagree on integer defaults.

use std::collections::HashMap;

use thiserror::Error;

use super::{MilpModel, Relation, VarKind};

const OBJ_ROW: &str = "OBJ";

/// Deterministically shortens names to at most eight characters, suffixing
/// with a counter on collision.
fn shorten_all<'a>(names: impl Iterator<Item = &'a str>, reserved: &[&str]) -> Vec<String> {
    let mut used: std::collections::HashSet<String> =
        reserved.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for name in names {
        let base: String = name
            .chars()
            .map(|c| if c.is_ascii_graphic() { c } else { '_' })
            .take(8)
            .collect();
        let base = if base.is_empty() { "X".to_string() } else { base };
        let mut candidate = base.clone();
        let mut counter = 1usize;
        while used.contains(&candidate) {
            let suffix = counter.to_string();
            let keep = 8usize.saturating_sub(suffix.len());
            candidate = base.chars().take(keep).collect::<String>() + &suffix;
            counter += 1;
        }
        used.insert(candidate.clone());
        out.push(candidate);
    }
    out
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// Serializes the model as a fixed-format MPS document.
pub fn export_mps(model: &MilpModel) -> String {
    let row_names = shorten_all(
        model.constraints().iter().map(|c| c.name.as_str()),
        &[OBJ_ROW],
    );
    let col_names = shorten_all(
        model.variables().iter().map(|v| v.name.as_str()),
        &["MARKER"],
    );

    let mut out = String::new();
    out.push_str(&format!("NAME          {}\n", model.name));
    out.push_str("ROWS\n");
    out.push_str(&format!(" N  {OBJ_ROW}\n"));
    for (c, short) in model.constraints().iter().zip(&row_names) {
        let rel = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        out.push_str(&format!(" {rel}  {short}\n"));
    }

    // Column-major entries, aggregated per (column, row).
    let n = model.num_vars();
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n]; // row index; OBJ = usize::MAX
    for (v, coeff) in model.objective() {
        push_entry(&mut col_entries[v.0], usize::MAX, *coeff);
    }
    for (ri, c) in model.constraints().iter().enumerate() {
        for &(v, coeff) in &c.terms {
            push_entry(&mut col_entries[v.0], ri, coeff);
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_integer_block = false;
    let mut marker_seq = 0usize;
    for (j, var) in model.variables().iter().enumerate() {
        let integral = var.kind.is_integral();
        if integral != in_integer_block {
            let kind = if integral { "'INTORG'" } else { "'INTEND'" };
            out.push_str(&format!(
                "    MARKER{marker_seq:02}                'MARKER'                 {kind}\n"
            ));
            marker_seq += 1;
            in_integer_block = integral;
        }
        let mut entries = std::mem::take(&mut col_entries[j]);
        entries.sort_by_key(|&(ri, _)| ri); // objective (usize::MAX) last
        if entries.is_empty() {
            // A column must appear in COLUMNS to exist for most readers.
            entries.push((usize::MAX, 0.0));
        }
        for (ri, coeff) in entries {
            let row = if ri == usize::MAX {
                OBJ_ROW
            } else {
                row_names[ri].as_str()
            };
            out.push_str(&format!(
                "    {:<10}{:<10}{}\n",
                col_names[j],
                row,
                fmt_value(coeff)
            ));
        }
    }
    if in_integer_block {
        out.push_str(&format!(
            "    MARKER{marker_seq:02}                'MARKER'                 'INTEND'\n"
        ));
    }

    out.push_str("RHS\n");
    if model.objective_constant() != 0.0 {
        out.push_str(&format!(
            "    RHS       {:<10}{}\n",
            OBJ_ROW,
            fmt_value(-model.objective_constant())
        ));
    }
    for (c, short) in model.constraints().iter().zip(&row_names) {
        if c.rhs != 0.0 {
            out.push_str(&format!("    RHS       {:<10}{}\n", short, fmt_value(c.rhs)));
        }
    }

    out.push_str("BOUNDS\n");
    for (j, var) in model.variables().iter().enumerate() {
        let name = &col_names[j];
        let (lo, hi) = (var.lower, var.upper);
        if var.kind == VarKind::Binary && lo == 0.0 && hi == 1.0 {
            out.push_str(&format!(" BV BND       {name}\n"));
            continue;
        }
        if lo == hi {
            out.push_str(&format!(" FX BND       {:<10}{}\n", name, fmt_value(lo)));
            continue;
        }
        let (lo_tag, up_tag) = if var.kind.is_integral() {
            ("LI", "UI")
        } else {
            ("LO", "UP")
        };
        if lo.is_finite() {
            out.push_str(&format!(" {lo_tag} BND       {:<10}{}\n", name, fmt_value(lo)));
        } else {
            out.push_str(&format!(" MI BND       {name}\n"));
        }
        if hi.is_finite() {
            out.push_str(&format!(" {up_tag} BND       {:<10}{}\n", name, fmt_value(hi)));
        } else {
            out.push_str(&format!(" PL BND       {name}\n"));
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn push_entry(entries: &mut Vec<(usize, f64)>, row: usize, coeff: f64) {
    match entries.iter_mut().find(|(r, _)| *r == row) {
        Some((_, v)) => *v += coeff,
        None => entries.push((row, coeff)),
    }
}

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported section {0}")]
    UnsupportedSection(String),
    #[error("missing ENDATA terminator")]
    MissingEndata,
}

fn syntax(line: usize, message: impl Into<String>) -> MpsError {
    MpsError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses an MPS document produced by [`export_mps`] (and common fixed-format
/// files generally; RANGES sections are rejected).
pub fn import_mps(source: &str) -> Result<MilpModel, MpsError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }

    struct ColData {
        name: String,
        integral: bool,
        entries: Vec<(String, f64)>,
        lower: Option<f64>,
        upper: Option<f64>,
        binary: bool,
    }

    let mut name = String::new();
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<(String, Relation)> = Vec::new();
    let mut cols: Vec<ColData> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut rhs: HashMap<String, f64> = HashMap::new();
    let mut objective_constant = 0.0;
    let mut integer_block = false;

    for (lineno, raw) in source.lines().enumerate() {
        let lineno = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if header {
            let mut parts = raw.split_whitespace();
            let keyword = parts.next().unwrap_or("");
            match keyword {
                "NAME" => name = parts.next().unwrap_or("").to_string(),
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "RANGES" => return Err(MpsError::UnsupportedSection("RANGES".into())),
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(MpsError::UnsupportedSection(other.into())),
            }
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(syntax(lineno, "expected <type> <name> in ROWS"));
                }
                match fields[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(fields[1].to_string());
                        }
                    }
                    "L" => rows.push((fields[1].to_string(), Relation::Le)),
                    "G" => rows.push((fields[1].to_string(), Relation::Ge)),
                    "E" => rows.push((fields[1].to_string(), Relation::Eq)),
                    other => return Err(syntax(lineno, format!("unknown row type {other}"))),
                }
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    match fields[2] {
                        "'INTORG'" => integer_block = true,
                        "'INTEND'" => integer_block = false,
                        other => return Err(syntax(lineno, format!("unknown marker {other}"))),
                    }
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(syntax(lineno, "expected column entries"));
                }
                let col = fields[0];
                let idx = *col_index.entry(col.to_string()).or_insert_with(|| {
                    cols.push(ColData {
                        name: col.to_string(),
                        integral: integer_block,
                        entries: Vec::new(),
                        lower: None,
                        upper: None,
                        binary: false,
                    });
                    cols.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| syntax(lineno, format!("bad number {}", pair[1])))?;
                    cols[idx].entries.push((pair[0].to_string(), value));
                }
            }
            Section::Rhs => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(syntax(lineno, "expected rhs entries"));
                }
                for pair in fields[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| syntax(lineno, format!("bad number {}", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        objective_constant = -value;
                    } else {
                        *rhs.entry(pair[0].to_string()).or_insert(0.0) += value;
                    }
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(syntax(lineno, "expected bound entry"));
                }
                let (tag, col) = (fields[0], fields[2]);
                let idx = *col_index
                    .get(col)
                    .ok_or_else(|| syntax(lineno, format!("bound on unknown column {col}")))?;
                let value = || -> Result<f64, MpsError> {
                    fields
                        .get(3)
                        .ok_or_else(|| syntax(lineno, "missing bound value"))?
                        .parse()
                        .map_err(|_| syntax(lineno, "bad bound value"))
                };
                match tag {
                    "UP" | "UI" => cols[idx].upper = Some(value()?),
                    "LO" | "LI" => cols[idx].lower = Some(value()?),
                    "FX" => {
                        let v = value()?;
                        cols[idx].lower = Some(v);
                        cols[idx].upper = Some(v);
                    }
                    "FR" => {
                        cols[idx].lower = Some(f64::NEG_INFINITY);
                        cols[idx].upper = Some(f64::INFINITY);
                    }
                    "MI" => cols[idx].lower = Some(f64::NEG_INFINITY),
                    "PL" => cols[idx].upper = Some(f64::INFINITY),
                    "BV" => cols[idx].binary = true,
                    other => return Err(syntax(lineno, format!("unknown bound type {other}"))),
                }
            }
            Section::None | Section::Done => {
                return Err(syntax(lineno, "data outside of a section"));
            }
        }
    }
    if section != Section::Done {
        return Err(MpsError::MissingEndata);
    }

    let obj_row = obj_row.unwrap_or_else(|| OBJ_ROW.to_string());
    let mut model = MilpModel::new(name);
    let mut var_ids = HashMap::new();
    for col in &cols {
        let kind = if col.binary {
            VarKind::Binary
        } else if col.integral {
            VarKind::Integer
        } else {
            VarKind::Continuous
        };
        let lower = col.lower.unwrap_or(0.0);
        let upper = col.upper.unwrap_or(if col.binary { 1.0 } else { f64::INFINITY });
        let id = model.add_var(col.name.clone(), kind, lower, upper);
        var_ids.insert(col.name.clone(), id);
    }
    let mut objective = Vec::new();
    let mut row_terms: HashMap<&str, Vec<(super::VarId, f64)>> = HashMap::new();
    for col in &cols {
        let id = var_ids[&col.name];
        for (row, value) in &col.entries {
            if *row == obj_row {
                objective.push((id, *value));
            } else {
                row_terms.entry(row.as_str()).or_default().push((id, *value));
            }
        }
    }
    model.set_objective(objective, objective_constant);
    for (row_name, relation) in &rows {
        let terms = row_terms.remove(row_name.as_str()).unwrap_or_default();
        let rhs = rhs.get(row_name).copied().unwrap_or(0.0);
        model.add_constraint(row_name.clone(), terms, *relation, rhs);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::super::{solve, MilpModel, Relation, SolveParams, VarKind};
    use super::*;

    fn small_model() -> MilpModel {
        let mut m = MilpModel::new("small");
        let x = m.add_var("x", VarKind::Integer, 0.0, 7.0);
        let y = m.add_var("y", VarKind::Continuous, -1.5, 2.5);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0);
        m.add_constraint("cap", vec![(x, 2.0), (y, 1.0)], Relation::Le, 8.0);
        m.add_constraint("mix", vec![(x, 1.0), (b, -3.0)], Relation::Ge, -1.0);
        m.add_constraint("tie", vec![(y, 1.0), (b, 1.0)], Relation::Eq, 1.0);
        m.set_objective(vec![(x, -1.0), (y, -2.0), (b, 0.5)], 4.0);
        m
    }

    #[test]
    fn sections_present() {
        let mut m = MilpModel::new("one");
        let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0);
        m.add_constraint("c", vec![(x, 1.0)], Relation::Le, 1.0);
        m.set_objective(vec![(x, 1.0)], 0.0);
        let text = export_mps(&m);
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.contains(section), "missing {section} in:\n{text}");
        }
    }

    #[test]
    fn binary_emitted_as_bv() {
        let mut m = MilpModel::new("bin");
        m.add_var("flag", VarKind::Binary, 0.0, 1.0);
        let text = export_mps(&m);
        assert!(text.contains(" BV BND"), "{text}");
        assert!(text.contains("'INTORG'") && text.contains("'INTEND'"), "{text}");
    }

    #[test]
    fn name_truncation_is_deterministic_and_unique() {
        let mut m = MilpModel::new("long");
        m.add_var("substation_height[s1]", VarKind::Continuous, 0.0, 1.0);
        m.add_var("substation_height[s2]", VarKind::Continuous, 0.0, 1.0);
        m.add_var("substation_height[s3]", VarKind::Continuous, 0.0, 1.0);
        let text = export_mps(&m);
        assert!(text.contains("substati"));
        assert!(text.contains("substat1"));
        assert!(text.contains("substat2"));
    }

    #[test]
    fn round_trip_solve_matches() {
        let m = small_model();
        let text = export_mps(&m);
        let back = import_mps(&text).unwrap();
        let a = solve(&m, &SolveParams::exact()).unwrap();
        let b = solve(&back, &SolveParams::exact()).unwrap();
        assert_eq!(a.status, b.status);
        assert!(
            (a.objective_value - b.objective_value).abs() < 1e-9,
            "{} vs {}",
            a.objective_value,
            b.objective_value
        );
    }

    #[test]
    fn objective_constant_round_trips() {
        let m = small_model();
        let back = import_mps(&export_mps(&m)).unwrap();
        assert!((back.objective_constant() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn ranges_rejected() {
        let text = "NAME t\nROWS\n N  OBJ\nRANGES\nENDATA\n";
        assert!(matches!(
            import_mps(text),
            Err(MpsError::UnsupportedSection(_))
        ));
    }

    #[test]
    fn missing_endata_rejected() {
        let text = "NAME t\nROWS\n N  OBJ\n";
        assert!(matches!(import_mps(text), Err(MpsError::MissingEndata)));
    }
}
