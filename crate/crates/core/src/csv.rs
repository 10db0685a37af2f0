//! Minimal CSV emission shared by the exporters.
//!
//! Output is UTF-8 with LF line endings. Floats use the shortest text that
//! parses back to the same `f64`, in positional notation for moderate
//! magnitudes and scientific notation otherwise, so files are bit-for-bit
//! reproducible.

use std::fmt::Write as _;

pub(crate) fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub(crate) fn push_row(out: &mut String, fields: &[String]) {
    let _ = writeln!(out, "{}", fields.join(","));
}
