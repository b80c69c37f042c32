use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::TraceRecord;
use crate::belief::PosteriorEntry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    #[default]
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}` (csv|jsonl)"))),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Header row plus one record per row.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, rows: &[T]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Blank lines are skipped; parse errors report the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::SpecParse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Flat trace row; the posterior summary becomes `name=weight;...`.
#[derive(Debug, Serialize, Deserialize)]
struct TraceCsvRow {
    t: usize,
    action: String,
    action_index: usize,
    observation: String,
    observation_index: usize,
    reward: f64,
    queried: bool,
    x: Option<f64>,
    y: Option<f64>,
    z: Option<f64>,
    zero_condition: bool,
    model_set_size: usize,
    posterior_top: String,
    event: Option<bool>,
    mentor_prob: f64,
}

fn encode_top(top: &[PosteriorEntry]) -> String {
    top.iter()
        .map(|e| format!("{}={}", e.name, e.weight))
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_top(s: &str) -> Result<Vec<PosteriorEntry>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|item| {
            let (name, w) = item
                .rsplit_once('=')
                .ok_or_else(|| Error::Io(format!("bad posterior entry `{item}`")))?;
            Ok(PosteriorEntry {
                name: name.to_string(),
                weight: w.parse().map_err(|_| Error::Io(format!("bad weight `{w}`")))?,
            })
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let rows: Vec<TraceCsvRow> = trace
        .iter()
        .map(|r| TraceCsvRow {
            t: r.t,
            action: r.action.clone(),
            action_index: r.action_index,
            observation: r.observation.clone(),
            observation_index: r.observation_index,
            reward: r.reward,
            queried: r.queried,
            x: r.x,
            y: r.y,
            z: r.z,
            zero_condition: r.zero_condition,
            model_set_size: r.model_set_size,
            posterior_top: encode_top(&r.posterior_top),
            event: r.event,
            mentor_prob: r.mentor_prob,
        })
        .collect();
    write_csv(out, &rows)
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    read_csv::<TraceCsvRow, R>(input)?
        .into_iter()
        .map(|r| {
            Ok(TraceRecord {
                posterior_top: decode_top(&r.posterior_top)?,
                t: r.t,
                action: r.action,
                action_index: r.action_index,
                observation: r.observation,
                observation_index: r.observation_index,
                reward: r.reward,
                queried: r.queried,
                x: r.x,
                y: r.y,
                z: r.z,
                zero_condition: r.zero_condition,
                model_set_size: r.model_set_size,
                event: r.event,
                mentor_prob: r.mentor_prob,
            })
        })
        .collect()
}
