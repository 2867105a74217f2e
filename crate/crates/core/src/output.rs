//! Shared formatting for exported datasets.

/// Version tag carried by every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// A float with 12 significant digits, as used in CSV files.
pub fn csv_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.11e}");
    // round-trip through the parser strips trailing zeros of the mantissa
    let v: f64 = s.parse().unwrap_or(x);
    let plain = format!("{v}");
    if plain.len() <= s.len() {
        plain
    } else {
        s
    }
}
