//! Serialization helpers: JSON with 17 significant digits, JSONL streams
//! and CSV point exports.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

use crate::embedding::CenterSet;

/// Compact JSON formatter printing every float as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PreciseFormatter;

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        CompactFormatter.write_f32(writer, value)
    }
}

pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// One JSON document per line, each terminated by `\n`.
pub fn write_jsonl<T: Serialize>(mut out: impl Write, items: impl IntoIterator<Item = T>) -> io::Result<()> {
    for item in items {
        writeln!(out, "{}", to_json(&item)?)?;
    }
    Ok(())
}

/// `index,x1,…,xq` rows, `index` 1-based.
pub fn points_csv(centers: &CenterSet) -> String {
    let mut s = String::from("index");
    for k in 1..=centers.q {
        s.push_str(&format!(",x{k}"));
    }
    s.push('\n');
    for (i, p) in centers.points.iter().enumerate() {
        s.push_str(&(i + 1).to_string());
        for v in p {
            s.push(',');
            s.push_str(&format_f64(*v));
        }
        s.push('\n');
    }
    s
}
