//! On-disk formats. Every JSON document carries `"format": 1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use gasket::address::{vertex_count, DyadicPoint};
use gasket::scalar::{entry_mode, Rational, Scalar, ScalarMode};
use gasket::{GraphFunction, LineFunction, VertexId};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT: u32 = 1;

/// Sample entries are strings (`"4/25"`, `"0.16"`); bare JSON numbers are
/// accepted on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Text(String),
    Number(serde_json::Number),
}

impl Entry {
    fn text(&self) -> String {
        match self {
            Entry::Text(s) => s.trim().to_string(),
            Entry::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDoc {
    pub format: u32,
    pub level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ScalarMode>,
    pub values: Vec<Entry>,
}

/// A bottom-edge function in whichever mode its file asked for.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyLine {
    Exact(LineFunction<Rational>),
    Float(LineFunction<f64>),
}

fn check_format(format: u32) -> Result<(), CliError> {
    if format != FORMAT {
        return Err(CliError::Parse(format!("unsupported format {format} (expected {FORMAT})")));
    }
    Ok(())
}

fn parse_all<S: Scalar>(texts: &[String]) -> Result<Vec<S>, CliError> {
    texts.iter().map(|t| S::parse(t).map_err(|e| CliError::Parse(e.to_string()))).collect()
}

impl LineDoc {
    pub fn encode<S: Scalar>(f: &LineFunction<S>) -> Self {
        LineDoc {
            format: FORMAT,
            level: f.level(),
            mode: Some(S::MODE),
            values: f.samples().iter().map(|v| Entry::Text(v.encode())).collect(),
        }
    }

    /// Without a `mode` field the file is exact unless some entry is a
    /// decimal; rational entries in a float file are rounded.
    pub fn decode(&self) -> Result<AnyLine, CliError> {
        check_format(self.format)?;
        let texts: Vec<String> = self.values.iter().map(Entry::text).collect();
        let inferred = texts.iter().filter_map(|t| entry_mode(t)).fold(None, |acc, m| match (acc, m) {
            (Some(ScalarMode::Float), _) | (_, ScalarMode::Float) => Some(ScalarMode::Float),
            _ => Some(m),
        });
        let mode = self.mode.or(inferred).unwrap_or(ScalarMode::Exact);
        let wrap = |e: gasket::Error| CliError::from(e);
        match mode {
            ScalarMode::Exact => Ok(AnyLine::Exact(LineFunction::new(self.level, parse_all(&texts)?).map_err(wrap)?)),
            ScalarMode::Float => Ok(AnyLine::Float(LineFunction::new(self.level, parse_all(&texts)?).map_err(wrap)?)),
        }
    }
}

/// Restriction check recorded under an extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub map: String,
    pub source_level: usize,
    pub output_level: usize,
    /// `max |(Ef)|_I − f|` on the source grid, in the file's scalar mode.
    pub max_restriction_error: String,
    pub restriction_matches: bool,
    /// Cells `(level, index)` that receive a corrector layer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corrector_cells: Vec<(usize, usize)>,
    /// How many of those cells the correction actually changes.
    #[serde(default)]
    pub corrected_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub format: u32,
    pub level: usize,
    pub mode: ScalarMode,
    /// Canonical vertex string (`word:corner`) to value.
    pub values: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyGraph {
    Exact(GraphFunction<Rational>),
    Float(GraphFunction<f64>),
}

impl GraphDoc {
    pub fn encode<S: Scalar>(u: &GraphFunction<S>) -> Self {
        GraphDoc {
            format: FORMAT,
            level: u.level(),
            mode: S::MODE,
            values: u.iter().map(|(v, x)| (v.to_string(), x.encode())).collect(),
            verification: None,
        }
    }

    pub fn decode(&self) -> Result<AnyGraph, CliError> {
        check_format(self.format)?;
        match self.mode {
            ScalarMode::Exact => Ok(AnyGraph::Exact(self.decode_as()?)),
            ScalarMode::Float => Ok(AnyGraph::Float(self.decode_as()?)),
        }
    }

    fn decode_as<S: Scalar>(&self) -> Result<GraphFunction<S>, CliError> {
        let n = vertex_count(self.level);
        let mut slots: Vec<Option<S>> = (0..n).map(|_| None).collect();
        for (key, text) in &self.values {
            let v: VertexId = key.parse().map_err(CliError::from)?;
            let i = v.index();
            if i >= n {
                return Err(CliError::Contract(format!("vertex {key} is not in V_{}", self.level)));
            }
            slots[i] = Some(S::parse(text).map_err(|e| CliError::Parse(e.to_string()))?);
        }
        let values = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| CliError::Contract(format!("missing value at {}", VertexId::from_index(i)))))
            .collect::<Result<Vec<S>, _>>()?;
        GraphFunction::new(self.level, values).map_err(CliError::from)
    }
}

/// `x,value` rows of a bottom trace; coordinates as fractions in exact mode.
pub fn trace_csv<S: Scalar>(f: &LineFunction<S>) -> String {
    let m = f.level();
    let mut out = String::from("x,value\n");
    for (j, v) in f.samples().iter().enumerate() {
        let p = DyadicPoint::new(m, j).expect("grid point");
        let x = match S::MODE {
            ScalarMode::Exact => p.to_string(),
            ScalarMode::Float => format!("{:?}", p.value()),
        };
        let _ = writeln!(out, "{x},{}", v.encode());
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, &s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Line plot of `log10(values)` against level. Non-positive values are
/// skipped.
pub fn log_plot_svg(title: &str, levels: &[usize], values: &[f64]) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(l, v)| (*l as f64, v.log10()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{pad}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        xml_escape(title)
    );
    if let (Some(x0), Some(x1)) = (pts.iter().map(|p| p.0).reduce(f64::min), pts.iter().map(|p| p.0).reduce(f64::max)) {
        let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(svg, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"steelblue\"/>", sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            "<text x=\"{pad}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">level {x0}..{x1}, log10 range [{y0:.3}, {y1:.3}]</text>",
            h - 12.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip_is_bit_exact() {
        let f = LineFunction::new(1, vec![Rational::ratio(1, 3), Rational::ratio(-4, 25), Rational::int(7)]).unwrap();
        let doc = LineDoc::encode(&f);
        let back: LineDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back.decode().unwrap(), AnyLine::Exact(f));
        let g = LineFunction::new(1, vec![0.1, 1.0 / 3.0, -2.5e-300]).unwrap();
        let back: LineDoc = serde_json::from_str(&serde_json::to_string(&LineDoc::encode(&g)).unwrap()).unwrap();
        assert_eq!(back.decode().unwrap(), AnyLine::Float(g));
    }

    #[test]
    fn mode_inference() {
        let doc = |vals: &str| serde_json::from_str::<LineDoc>(&format!("{{\"format\":1,\"level\":1,\"values\":{vals}}}")).unwrap();
        assert!(matches!(doc("[\"0\",\"1/5\",\"0\"]").decode().unwrap(), AnyLine::Exact(_)));
        assert!(matches!(doc("[\"0\",\"0.2\",\"1/3\"]").decode().unwrap(), AnyLine::Float(_)));
        assert!(matches!(doc("[0, 1, 2]").decode().unwrap(), AnyLine::Exact(_)));
        let mut strict = doc("[\"0\",\"0.2\",\"0\"]");
        strict.mode = Some(ScalarMode::Exact);
        assert_eq!(strict.decode().unwrap_err().code(), 2);
        assert_eq!(doc("[\"0\",\"1\"]").decode().unwrap_err().code(), 4);
    }

    #[test]
    fn graph_round_trip() {
        let u = GraphFunction::from_fn(2, |i| Rational::ratio(i as i64 - 4, 3)).unwrap();
        let doc = GraphDoc::encode(&u);
        assert_eq!(doc.values.len(), vertex_count(2));
        let back: GraphDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.decode().unwrap(), AnyGraph::Exact(u));
    }

    #[test]
    fn harmonic_trace_rows() {
        let tr = gasket::HarmonicFunction::new(Rational::int(1), Rational::int(0), Rational::int(0)).trace(2).unwrap();
        assert_eq!(trace_csv(&tr), "x,value\n0,0\n1/4,4/25\n1/2,1/5\n3/4,4/25\n1,0\n");
    }
}
