//! Result envelope and table output.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub elapsed_ms: f64,
}

/// Everything a subcommand writes in JSON mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub diagnostics: Vec<String>,
    pub versions: BTreeMap<String, String>,
    pub timing: Timing,
}

/// Flat view of a result for CSV output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

pub struct Report {
    pub inputs: Value,
    pub outputs: Value,
    pub diagnostics: Vec<String>,
    pub table: Table,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("singspec".to_string(), singspec::VERSION.to_string()),
        ("singspec-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

pub fn write_json(out: &mut impl Write, env: &Envelope) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, env).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Output(e.to_string()))
}

pub fn write_csv(out: &mut impl Write, table: &Table) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(&table.headers).map_err(|e| CliError::Output(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

/// Serialize into a JSON value; our output types never fail here.
pub fn json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable output")
}

pub fn cell<T: ToString>(v: T) -> String {
    v.to_string()
}

/// Shortest round-trip form, with an exponent for very small or large values.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_round_trips() {
        let env = Envelope {
            command: "sweep".into(),
            inputs: serde_json::json!({"m_max": 2}),
            outputs: serde_json::json!({"cases": 8, "rows": [[1, 2], [3, 4]]}),
            diagnostics: vec!["note".into()],
            versions: versions(),
            timing: Timing { elapsed_ms: 1.25 },
        };
        let mut buf = Vec::new();
        write_json(&mut buf, &env).unwrap();
        let back: Envelope = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn envelope_rejects_extra_keys() {
        let text = r#"{"command":"x","inputs":{},"outputs":{},"diagnostics":[],"versions":{},"timing":{"elapsed_ms":0},"extra":1}"#;
        assert!(serde_json::from_str::<Envelope>(text).is_err());
    }

    #[test]
    fn csv_quotes_and_uses_crlf() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "say \"hi\"".into()]);
        t.push(vec!["1e-5".into(), String::new()]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n1e-5,\r\n");
    }

    #[test]
    fn floats_print_shortest_round_trip() {
        for v in [0.1, 1.0, 3.903919482492639e-12, 1.4457964907276293, -2.5e300] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1e-5), "1e-5");
    }
}
