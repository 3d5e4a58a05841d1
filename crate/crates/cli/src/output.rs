//! Number formatting and report rendering shared by the subcommands:
//! human tables carry 6 significant digits, JSON carries full doubles,
//! and infinities render as the `inf` / `-inf` literals in both.

use serde_json::{Map, Number, Value};

fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - mag);
    (x * scale).round() / scale
}

/// 6-significant-digit rendering for tables.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded = round_sig(x, 6);
    let mag = rounded.abs().log10().floor() as i32;
    if !(-7..15).contains(&mag) {
        return format!("{rounded:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Full-precision JSON value; sentinels become the strings "inf"/"-inf".
pub fn json_number(x: f64) -> Value {
    match Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => Value::String(if x > 0.0 { "inf" } else { "-inf" }.to_string()),
    }
}

pub fn json_object(entries: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in entries {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}

/// Assembles a csv table with one header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(2.5), "2.50000");
        assert_eq!(format_sig(-3.5), "-3.50000");
        assert_eq!(format_sig(0.123456789), "0.123457");
        assert_eq!(format_sig(1234567.0), "1234570");
        assert_eq!(format_sig(0.9999999), "1.00000");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn sentinels() {
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(json_number(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(
            json_number(f64::NEG_INFINITY),
            Value::String("-inf".into())
        );
    }

    #[test]
    fn json_keeps_full_precision() {
        let v = json_number(0.1234567890123456);
        assert_eq!(v.as_f64().unwrap(), 0.1234567890123456);
    }
}
