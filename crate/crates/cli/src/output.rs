//! Table output: RFC-4180-style CSV with a `#` header block, JSON with a
//! single top-level `{"meta", "columns", "rows"}` object, and the matching
//! readers every output must round-trip through.
//!
//! Floats are serialized with 17 significant digits so double precision
//! survives the trip bit for bit.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

/// One table cell.
#[derive(Debug, Clone)]
pub enum Field {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Int(v) => format!("{v}"),
            Field::Num(v) => format!("{v:.16e}"),
            Field::Text(s) => csv_quote(s),
        }
    }

    fn json(&self) -> String {
        match self {
            Field::Int(v) => format!("{v}"),
            Field::Num(v) => format!("{v:.16e}"),
            Field::Text(s) => json_quote(s),
        }
    }

    fn order_key(&self) -> (u8, f64, &str) {
        match self {
            Field::Int(v) => (0, *v as f64, ""),
            Field::Num(v) => (0, *v, ""),
            Field::Text(s) => (1, 0.0, s.as_str()),
        }
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Field::Int(a), Field::Int(b)) => a == b,
            (Field::Num(a), Field::Num(b)) => a.to_bits() == b.to_bits(),
            (Field::Text(a), Field::Text(b)) => a == b,
            _ => false,
        }
    }
}

/// Result table: named columns plus uniform-width rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Deterministic row order: lexicographic over the fields, numbers by
    /// total order before text.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            for (x, y) in a.iter().zip(b) {
                let (tx, nx, sx) = x.order_key();
                let (ty, ny, sy) = y.order_key();
                let ord = tx.cmp(&ty).then(nx.total_cmp(&ny)).then(sx.cmp(sy));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        });
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.starts_with(' ') || s.ends_with(' ') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn json_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// CSV: a `# key = value` header block (the meta map in sorted order), the
/// mandatory header row, then the data rows.
pub fn write_csv(
    w: &mut impl Write,
    meta: &BTreeMap<String, String>,
    table: &Table,
) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "{}", table.columns.iter().map(|c| csv_quote(c)).collect::<Vec<_>>().join(","))?;
    for row in &table.rows {
        writeln!(w, "{}", row.iter().map(Field::csv).collect::<Vec<_>>().join(","))?;
    }
    Ok(())
}

/// JSON: one top-level object with `meta`, `columns`, and `rows`.
pub fn write_json(
    w: &mut impl Write,
    meta: &BTreeMap<String, String>,
    table: &Table,
) -> io::Result<()> {
    writeln!(w, "{{")?;
    writeln!(w, "  \"meta\": {{")?;
    let last = meta.len().saturating_sub(1);
    for (i, (k, v)) in meta.iter().enumerate() {
        let sep = if i == last { "" } else { "," };
        writeln!(w, "    {}: {}{sep}", json_quote(k), json_quote(v))?;
    }
    writeln!(w, "  }},")?;
    writeln!(
        w,
        "  \"columns\": [{}],",
        table.columns.iter().map(|c| json_quote(c)).collect::<Vec<_>>().join(", ")
    )?;
    writeln!(w, "  \"rows\": [")?;
    let last = table.rows.len().saturating_sub(1);
    for (i, row) in table.rows.iter().enumerate() {
        let sep = if i == last { "" } else { "," };
        writeln!(
            w,
            "    [{}]{sep}",
            row.iter().map(Field::json).collect::<Vec<_>>().join(", ")
        )?;
    }
    writeln!(w, "  ]")?;
    writeln!(w, "}}")?;
    Ok(())
}

/// A table read back from disk; fields are re-typed as int, then float,
/// then text.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

fn retype(s: &str) -> Field {
    if let Ok(v) = s.parse::<i64>() {
        return Field::Int(v);
    }
    if let Ok(v) = s.parse::<f64>() {
        return Field::Num(v);
    }
    Field::Text(s.to_string())
}

fn split_csv_line(line: &str, lineno: usize) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        cur.push('"');
                    } else {
                        quoted = false;
                    }
                }
                c => cur.push(c),
            }
        } else {
            match c {
                '"' if cur.is_empty() => quoted = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                '"' => return Err(format!("line {lineno}: stray quote")),
                c => cur.push(c),
            }
        }
    }
    if quoted {
        return Err(format!("line {lineno}: unterminated quoted field"));
    }
    fields.push(cur);
    Ok(fields)
}

/// Parse CSV produced by [`write_csv`]: `#` meta lines, header row, data.
pub fn read_csv(r: impl BufRead) -> Result<Parsed, String> {
    let mut meta = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| format!("line {lineno}: {e}"))?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| format!("line {lineno}: header comment must be `# key = value`"))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        let fields = split_csv_line(&line, lineno)?;
        match &columns {
            None => columns = Some(fields),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(format!(
                        "line {lineno}: {} fields, header has {}",
                        fields.len(),
                        cols.len()
                    ));
                }
                rows.push(fields.iter().map(|f| retype(f)).collect());
            }
        }
    }
    let columns = columns.ok_or("missing header row")?;
    Ok(Parsed { meta, columns, rows })
}

/// Parse JSON produced by [`write_json`].
pub fn read_json(r: impl io::Read) -> Result<Parsed, String> {
    let value: serde_json::Value =
        serde_json::from_reader(r).map_err(|e| format!("invalid json: {e}"))?;
    let obj = value.as_object().ok_or("top level must be an object")?;
    let mut meta = BTreeMap::new();
    for (k, v) in obj.get("meta").and_then(|m| m.as_object()).ok_or("missing meta object")? {
        meta.insert(
            k.clone(),
            v.as_str().ok_or_else(|| format!("meta.{k} must be a string"))?.to_string(),
        );
    }
    let columns = obj
        .get("columns")
        .and_then(|c| c.as_array())
        .ok_or("missing columns array")?
        .iter()
        .map(|c| c.as_str().map(|s| s.to_string()).ok_or("columns must be strings".to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (i, row) in
        obj.get("rows").and_then(|r| r.as_array()).ok_or("missing rows array")?.iter().enumerate()
    {
        let row = row.as_array().ok_or_else(|| format!("row {i} must be an array"))?;
        if row.len() != columns.len() {
            return Err(format!("row {i}: {} fields, {} columns", row.len(), columns.len()));
        }
        let mut fields = Vec::with_capacity(row.len());
        for v in row {
            fields.push(match v {
                serde_json::Value::Number(n) => {
                    if let Some(x) = n.as_i64() {
                        Field::Int(x)
                    } else {
                        Field::Num(n.as_f64().ok_or_else(|| format!("row {i}: bad number"))?)
                    }
                }
                serde_json::Value::String(s) => Field::Text(s.clone()),
                other => return Err(format!("row {i}: unsupported value {other}")),
            });
        }
        rows.push(fields);
    }
    Ok(Parsed { meta, columns, rows })
}
