//! Plain-text serialization shared by the sweep, trace and noise outputs.
//!
//! Numbers are written with 17 significant digits so that values round-trip
//! exactly; lines end in `\n`.

use std::fmt::Write;

use crate::model::HamiltonianKind;
use crate::propagator::TraceSample;

pub fn number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Builds a CSV table from a header and numeric rows.
pub fn table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&x| number(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Trace columns: `t`, real and imaginary part of each amplitude, each
/// population, and the unwrapped phase of the tracked amplitude.
pub fn trace_csv(kind: HamiltonianKind, trace: &[TraceSample]) -> String {
    let labels = kind.basis_labels();
    let mut header = vec!["t".to_string()];
    for l in labels {
        header.push(format!("re_{l}"));
        header.push(format!("im_{l}"));
    }
    for l in labels {
        header.push(format!("pop_{l}"));
    }
    header.push("unwrapped_phase".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        &header,
        trace.iter().map(|s| {
            let mut row = vec![s.t];
            for a in &s.amplitudes {
                row.push(a.re);
                row.push(a.im);
            }
            row.extend(s.amplitudes.iter().map(|a| a.norm_sqr()));
            row.push(s.phase);
            row
        }),
    )
}

/// `# key=value ...` comment line.
pub fn comment(pairs: &[(&str, &str)]) -> String {
    let mut out = String::from("#");
    for (k, v) in pairs {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    out
}
