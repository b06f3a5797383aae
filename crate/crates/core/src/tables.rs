//! Comma-separated text tables shared by every exported statistic.
//!
//! Reals are written with 17 significant digits so they round-trip exactly.
//! Metadata travels in leading `# key=value` comment lines, followed by a
//! header row naming the columns.

use std::io::{self, Write};

/// Formats a real with 17 significant digits in scientific notation.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `# key=value` metadata lines.
pub fn write_meta<W: Write>(out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
    for (key, value) in meta {
        writeln!(out, "# {key}={value}")?;
    }
    Ok(())
}

/// Reads back the `# key=value` lines at the top of a table.
pub fn read_meta(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map_while(|line| line.strip_prefix("# "))
        .filter_map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect()
}
