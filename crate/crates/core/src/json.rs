//! JSON helpers with a fixed float format (17 significant digits).

use serde_json::{Number, Value};

/// `x` formatted with 17 significant digits; non-finite values become `null`.
pub fn number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str::<Number>(&format_float(x)).map(Value::Number).unwrap_or(Value::Null)
}

/// `{:.16e}` rendering with an explicit exponent sign, used in JSON and CSV
/// output so both files print a value the same way.
pub fn format_float(x: f64) -> String {
    let text = format!("{x:.16e}");
    match text.split_once('e') {
        Some((mantissa, exp)) if !exp.starts_with('-') => format!("{mantissa}e+{exp}"),
        _ => text,
    }
}

pub fn numbers(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(number).collect())
}

/// Reads a number that may have been written by [`number`].
pub fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64().or_else(|| n.to_string().parse().ok()),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}
