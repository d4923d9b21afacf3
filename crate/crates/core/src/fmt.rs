//! Reproducible float rendering for reports.
//!
//! All report writers go through these helpers so that identical inputs give
//! byte-identical output.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

/// Significant digits used by every report.
pub const SIG_DIGITS: usize = 12;

/// Formats `x` like C's `%.{digits}g`.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `%.12g` shorthand.
pub fn g12(x: f64) -> String {
    format_g(x, SIG_DIGITS)
}

/// Pretty printer that renders every float with `SIG_DIGITS` significant
/// digits.
struct ReportFormatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for ReportFormatter {
    delegate! {
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(g12(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Serializes `value` as pretty JSON with every float printed like `%.12g`.
/// Keys follow struct field order; non-finite floats become `null`.
pub fn to_report_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, ReportFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serializer writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(9.5), "9.5");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(1e-7), "1e-07");
        assert_eq!(g12(-2.5e-5), "-2.5e-05");
        assert_eq!(g12(100.0), "100");
        assert_eq!(format_g(0.000123456, 3), "0.000123");
    }

    #[test]
    fn report_json_rounds_floats() {
        #[derive(Serialize)]
        struct R {
            a: f64,
            b: Vec<f64>,
            n: usize,
        }
        let s = to_report_json(&R {
            a: 0.1 + 0.2,
            b: vec![1.0 / 3.0],
            n: 3,
        })
        .unwrap();
        let whole = to_report_json(&vec![8.0, f64::NAN]).unwrap();
        assert_eq!(whole, "[\n  8,\n  null\n]\n");
        assert!(s.contains("\"a\": 0.3,"), "{s}");
        assert!(s.find("\"a\"") < s.find("\"b\""));
        assert!(s.contains("0.333333333333"), "{s}");
        assert!(s.contains("\"n\": 3"), "{s}");
    }
}
