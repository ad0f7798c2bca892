//! Number formatting and parsing shared by every command.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// C's `%.17g`: seventeen significant digits, trailing zeros removed.
pub fn g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mant), exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (16 - exp) as usize, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A real given as a decimal or as a ratio `a/b`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if b == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            a / b
        }
        None => s.parse().map_err(|_| format!("{s:?} is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

pub fn parse_real_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_real).collect()
}

pub fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v = parse_real_list(s)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected three coordinates, got {}", v.len()))
}

/// Pretty printer that writes every float with [`g17`].
struct G17Formatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident $(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
            self.0.$name(w $(, $arg)?)
        })*
    };
}

impl Formatter for G17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        w.write_all(g17(value as f64).as_bytes())
    }

    delegate!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        begin_object_value,
        end_object_value,
    );
}

pub fn to_json(value: &impl Serialize) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, G17Formatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialisation cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

pub fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    std::fs::write(path, to_json(value))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        // reference strings from printf("%.17g")
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (2.5e-4, "0.00025000000000000001"),
            (std::f64::consts::PI, "3.1415926535897931"),
            (1.0 / 3.0, "0.33333333333333331"),
            (0.0, "0"),
        ];
        for (v, want) in cases {
            assert_eq!(g17(v), want);
        }
    }

    #[test]
    fn round_trips() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX, -1.2345678901234567e-300] {
            assert_eq!(g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_real("1/2").unwrap(), 0.5);
        assert_eq!(parse_real(" -1/2 ").unwrap(), -0.5);
        assert_eq!(parse_real_list("1/8,1/16").unwrap(), vec![0.125, 0.0625]);
        assert!(parse_real("1/0").is_err());
        assert!(parse_real("x").is_err());
        assert_eq!(parse_point("0,1/2,-1").unwrap(), [0.0, 0.5, -1.0]);
        assert!(parse_point("0,1").is_err());
    }

    #[test]
    fn json_floats_use_g17() {
        let s = to_json(&serde_json::json!({ "a": 0.1, "b": [1.0, 2] }));
        assert!(s.contains("0.10000000000000001"));
        assert!(s.contains("\"b\": [\n    1,\n    2\n  ]"));
    }
}
