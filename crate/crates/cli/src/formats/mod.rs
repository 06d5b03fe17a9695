//! Plain-text file formats. Every CSV may start with `#` comment lines,
//! which readers skip and writers use for provenance.

pub mod dataset;
pub mod knots;
pub mod prediction;
pub mod report;

use std::fmt::Write as _;

/// `# <tool> <version> config=<hash>` plus any extra notes.
pub fn header_comment(config_hash: &str, notes: &[&str]) -> String {
    let mut s = format!("# {} {} config={config_hash}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    for n in notes {
        let _ = writeln!(s, "# {n}");
    }
    s
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

pub(crate) fn record_line(r: &csv::StringRecord) -> u64 {
    r.position().map_or(0, |p| p.line())
}

pub(crate) fn parse_f64(text: &str, line: u64, column: &str) -> crate::Result<f64> {
    text.parse::<f64>().map_err(|_| crate::Error::TypeViolation {
        line,
        column: column.to_string(),
        value: text.to_string(),
        expected: "a number",
    })
}

/// Joins already-formatted fields, quoting where the CSV grammar needs it.
pub(crate) fn csv_line<I: IntoIterator<Item = S>, S: AsRef<str>>(fields: I) -> String {
    let mut out = String::new();
    for (k, f) in fields.into_iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let f = f.as_ref();
        if f.contains([',', '"', '\n', '\r']) || f.starts_with('#') {
            out.push('"');
            out.push_str(&f.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(f);
        }
    }
    out.push('\n');
    out
}
