//! CSV emission: RFC-4180-style quoting, '.' decimal separator, 17
//! significant digits for reals so that every value round-trips bitwise.

use std::io::Write;
use std::path::Path;

/// A rectangular numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }
}

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Render the table as CSV text (header always present).
pub fn render_csv(table: &Table) -> String {
    let mut out = String::new();
    out.push_str(
        &table
            .header
            .iter()
            .map(|h| quote(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in &table.rows {
        out.push_str(
            &row.iter()
                .map(|&v| format_real(v))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

/// Write the table to a file, surfacing I/O failures with path context.
pub fn emit_csv(table: &Table, path: &Path) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    file.write_all(render_csv(table).as_bytes())
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Parse CSV text produced by [`render_csv`] back into a table
/// (round-trip checks).
#[cfg(test)]
pub fn parse_csv(text: &str) -> Result<Table, String> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or("empty input")?
        .split(',')
        .map(|s| s.trim_matches('"').to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| format!("row {}: bad number {f:?}: {e}", idx + 1))
            })
            .collect::<Result<Vec<f64>, String>>()?;
        if row.len() != header.len() {
            return Err(format!("row {}: width {} != header", idx + 1, row.len()));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}
