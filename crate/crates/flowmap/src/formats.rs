//! On-disk formats: CSV streams and event logs, JSON snapshots, descriptor
//! dumps and report tables.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flowmap_core::evaluation::{AggregateRow, Stat};
use flowmap_core::{
    AggregateReport, DataType, FlowDescriptor, GridIndex, Mode, NodeId, Orientation, Position, SceneReport,
    SparseHashMap, TopologyChange, TopologyEvent,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::Observation;

#[derive(Serialize, Deserialize)]
struct StreamRow {
    t: f64,
    agent: u32,
    x: f64,
    y: f64,
    z: f64,
    theta: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.into(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Reads `t,agent,x,y,z,theta` records: seconds, meters, radians. Timestamps
/// must not decrease.
pub fn read_stream(path: &Path, input: impl Read) -> Result<Vec<Observation>> {
    let mut out: Vec<Observation> = Vec::new();
    for (line, row) in records::<StreamRow>(path, input)? {
        let bad = |message: &str| Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        };
        let position = Position::new(row.x, row.y, row.z);
        if !position.is_finite() || !row.t.is_finite() {
            return Err(bad("non-finite value"));
        }
        let theta = Orientation::new(row.theta).map_err(|_| bad("non-finite heading"))?;
        if out.last().is_some_and(|o| o.t > row.t) {
            return Err(bad("timestamps must not decrease"));
        }
        out.push(Observation {
            t: row.t,
            agent: row.agent,
            position,
            theta,
        });
    }
    Ok(out)
}

/// Deserializes every record, pairing it with its 1-based line number.
fn records<T: DeserializeOwned>(path: &Path, input: impl Read) -> Result<Vec<(u64, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: path.into(),
            line,
            message: e.to_string(),
        })?;
        out.push((line, row));
    }
    Ok(out)
}

pub fn write_stream(out: impl Write, stream: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in stream {
        w.serialize(StreamRow {
            t: o.t,
            agent: o.agent,
            x: o.position.x,
            y: o.position.y,
            z: o.position.z,
            theta: o.theta.radians(),
        })
        .map_err(|e| Error::format("<stream>", e))?;
    }
    w.flush().map_err(|e| Error::io("<stream>", e))
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    t: f64,
    kind: String,
    id: u64,
    x: Option<f64>,
    y: Option<f64>,
    z: Option<f64>,
}

/// Reads `t,kind,id,x,y,z` records where kind is `insert`, `reposition` or
/// `remove`; removals leave the coordinates empty.
pub fn read_events(path: &Path, input: impl Read) -> Result<Vec<TopologyEvent>> {
    let mut out: Vec<TopologyEvent> = Vec::new();
    for (line, row) in records::<EventRow>(path, input)? {
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let position = || match (row.x, row.y, row.z) {
            (Some(x), Some(y), z) => {
                let p = Position::new(x, y, z.unwrap_or(0.0));
                if p.is_finite() {
                    Ok(p)
                } else {
                    Err(bad("non-finite position".into()))
                }
            }
            _ => Err(bad(format!("{} needs x and y", row.kind))),
        };
        let change = match row.kind.as_str() {
            "insert" => TopologyChange::Insert(position()?),
            "reposition" => TopologyChange::Reposition(position()?),
            "remove" => TopologyChange::Remove,
            other => return Err(bad(format!("unknown event kind `{other}`"))),
        };
        if !row.t.is_finite() || out.last().is_some_and(|e| e.t > row.t) {
            return Err(bad("event times must be finite and non-decreasing".into()));
        }
        out.push(TopologyEvent {
            t: row.t,
            node: NodeId(row.id),
            change,
        });
    }
    Ok(out)
}

pub fn write_events(out: impl Write, events: &[TopologyEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        let (kind, p) = match e.change {
            TopologyChange::Insert(p) => ("insert", Some(p)),
            TopologyChange::Reposition(p) => ("reposition", Some(p)),
            TopologyChange::Remove => ("remove", None),
        };
        w.serialize(EventRow {
            t: e.t,
            kind: kind.into(),
            id: e.node.0,
            x: p.map(|p| p.x),
            y: p.map(|p| p.y),
            z: p.map(|p| p.z),
        })
        .map_err(|e| Error::format("<events>", e))?;
    }
    w.flush().map_err(|e| Error::io("<events>", e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Compact JSON with a trailing newline. Output is a pure function of the
/// value, so equal values give identical bytes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, value).map_err(|e| Error::format(path, e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// One JSON object per hash cell, in key order.
pub fn write_cells_jsonl(mut out: impl Write, map: &SparseHashMap) -> Result<()> {
    for cell in map.cells_ordered() {
        serde_json::to_writer(&mut out, cell).map_err(|e| Error::format("<cells>", e))?;
        out.write_all(b"\n").map_err(|e| Error::io("<cells>", e))?;
    }
    Ok(())
}

fn direction_deg(d: &FlowDescriptor) -> Option<f64> {
    d.dominant_direction.map(Orientation::degrees)
}

/// `ix,iy,magnitude,direction_deg,entropy` for every populated cell; the
/// direction is empty when undefined.
pub fn write_descriptor_dump(out: impl Write, cells: &[(GridIndex, FlowDescriptor)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ix", "iy", "magnitude", "direction_deg", "entropy"])
        .map_err(|e| Error::format("<dump>", e))?;
    for (idx, d) in cells {
        w.serialize((idx.ix, idx.iy, d.magnitude, direction_deg(d), d.entropy))
            .map_err(|e| Error::format("<dump>", e))?;
    }
    w.flush().map_err(|e| Error::io("<dump>", e))
}

/// Node overlay for plotting: descriptors plus the position of each node in
/// the plan, empty for nodes off the path.
pub fn write_overlay(
    out: impl Write,
    nodes: &[(NodeId, Position, Option<FlowDescriptor>)],
    path: &[NodeId],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "x", "y", "magnitude", "direction_deg", "entropy", "path_index"])
        .map_err(|e| Error::format("<overlay>", e))?;
    for (id, p, d) in nodes {
        let step = path.iter().position(|n| n == id);
        w.serialize((
            id.0,
            p.x,
            p.y,
            d.map(|d| d.magnitude),
            d.as_ref().and_then(direction_deg),
            d.map(|d| d.entropy),
            step,
        ))
        .map_err(|e| Error::format("<overlay>", e))?;
    }
    w.flush().map_err(|e| Error::io("<overlay>", e))
}

fn cell(stat: Option<&Stat>, digits: usize) -> String {
    match stat {
        None => "-".into(),
        Some(s) if s.n == 0 => "n/a".into(),
        Some(s) => {
            let mut text = format!("{:.*} ± {:.*}", digits, s.mean, digits, s.std);
            if s.excluded > 0 {
                text.push_str(&format!(" ({} excl.)", s.excluded));
            }
            text
        }
    }
}

/// Plain-text table of the aggregate: one row per data type and source.
pub fn render_report(report: &AggregateReport) -> String {
    let mut rows = vec![[
        "Data type".to_string(),
        "Source".into(),
        "JS".into(),
        "Bhattacharyya".into(),
        "Wasserstein".into(),
        "Circ. corr.".into(),
    ]];
    for AggregateRow {
        data_type,
        mode,
        js,
        bhattacharyya,
        wasserstein,
        circular_correlation,
    } in &report.rows
    {
        rows.push([
            data_type_name(*data_type).into(),
            mode_name(*mode).into(),
            cell(js.as_ref(), 2),
            cell(bhattacharyya.as_ref(), 2),
            cell(wasserstein.as_ref(), 2),
            cell(circular_correlation.as_ref(), 2),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = format!("Scenes: {}\n", report.scenes);
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(text, w)| format!("{text:<w$}", w = *w))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}

pub fn data_type_name(d: DataType) -> &'static str {
    match d {
        DataType::Entropy => "entropy",
        DataType::Flow => "flow",
        DataType::Direction => "direction",
    }
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Historical => "historical",
        Mode::Predicted => "predicted",
    }
}

/// One JSON line per scene report.
pub fn write_scene_reports(mut out: impl Write, reports: &[SceneReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::format("<reports>", e))?;
        out.write_all(b"\n").map_err(|e| Error::io("<reports>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_round_trip_is_exact() {
        let stream = vec![
            Observation {
                t: 0.5,
                agent: 2,
                position: Position::new(-1.25, 1e-7, 0.1 + 0.2),
                theta: Orientation::new(2.0).unwrap(),
            },
            Observation {
                t: 0.5,
                agent: 0,
                position: Position::new(3.0, 4.0, 0.0),
                theta: Orientation::new(-std::f64::consts::PI).unwrap(),
            },
        ];
        let mut buf = Vec::new();
        write_stream(&mut buf, &stream).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,agent,x,y,z,theta\n"));
        assert_eq!(read_stream(Path::new("s.csv"), buf.as_slice()).unwrap(), stream);
    }

    #[test]
    fn stream_errors_carry_line_numbers() {
        let text = "t,agent,x,y,z,theta\n0,0,0,0,0,0\n1,0,zz,0,0,0\n";
        match read_stream(Path::new("s.csv"), text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "t,agent,x,y,z,theta\n5,0,0,0,0,0\n1,0,0,0,0,0\n";
        match read_stream(Path::new("s.csv"), text.as_bytes()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("decrease"));
            }
            other => panic!("{other:?}"),
        }
        assert!(read_stream(Path::new("s.csv"), "t,agent,x,y,z,theta\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn events_round_trip() {
        let events = vec![
            TopologyEvent {
                t: 1.0,
                node: NodeId(3),
                change: TopologyChange::Reposition(Position::new(1.0, 2.0, 0.0)),
            },
            TopologyEvent {
                t: 2.0,
                node: NodeId(4),
                change: TopologyChange::Remove,
            },
            TopologyEvent {
                t: 2.5,
                node: NodeId(9),
                change: TopologyChange::Insert(Position::new(0.5, 0.5, 0.0)),
            },
        ];
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        assert_eq!(read_events(Path::new("e.csv"), buf.as_slice()).unwrap(), events);
        let bad = "t,kind,id,x,y,z\n1,teleport,3,,,\n";
        match read_events(Path::new("e.csv"), bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
