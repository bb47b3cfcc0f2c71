//! Newline-delimited JSON query service over a read-only model snapshot.
//!
//! Requests:
//!
//! ```text
//! {"query":"predict","node":12,"t":600.0}
//! {"query":"predict","position":[3.2,4.0,0.0],"t":600.0}
//! {"query":"descriptors","node":12}
//! {"query":"descriptors","position":[3.2,4.0],"mode":"predicted","t":600.0}
//! ```
//!
//! Positions are meters (z defaults to 0), times are seconds. An optional
//! `id` field is echoed back. Every request gets exactly one response line:
//! `{"ok":true,...}` with `vector` (per-bin activity), `magnitude`
//! (events/s), `direction_deg` (null when undefined) and `entropy`, or
//! `{"ok":false,"error":"bad_request"|"not_found","message":...}`.

use std::io::{BufRead, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use flowmap_core::{hash_key, CellKey, DirectionalHistogram, Mode, NodeId, Position};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pipeline::ModelSnapshot;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Request {
    query: String,
    #[serde(default)]
    id: Option<Value>,
    #[serde(default)]
    node: Option<u64>,
    #[serde(default)]
    position: Option<Vec<f64>>,
    #[serde(default)]
    t: Option<f64>,
    #[serde(default)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Node(NodeId),
    Cell(CellKey),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub target: Target,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub vector: Vec<f64>,
    pub magnitude: f64,
    pub direction_deg: Option<f64>,
    pub entropy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    BadRequest,
    NotFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub error: ErrorKind,
    pub message: String,
}

type Outcome = std::result::Result<Answer, (ErrorKind, String)>;

fn bad(msg: impl Into<String>) -> (ErrorKind, String) {
    (ErrorKind::BadRequest, msg.into())
}

fn not_found(msg: impl Into<String>) -> (ErrorKind, String) {
    (ErrorKind::NotFound, msg.into())
}

fn model_error(e: flowmap_core::Error) -> (ErrorKind, String) {
    match e {
        flowmap_core::Error::NotFound(m) => not_found(m),
        other => bad(other.to_string()),
    }
}

/// Answers queries against one snapshot. Cheap to clone and share.
#[derive(Clone)]
pub struct Service {
    snapshot: Arc<ModelSnapshot>,
}

impl Service {
    pub fn new(snapshot: Arc<ModelSnapshot>) -> Self {
        Self { snapshot }
    }

    pub fn snapshot(&self) -> &ModelSnapshot {
        &self.snapshot
    }

    /// One request line in, one response line out (without the newline).
    pub fn handle_line(&self, line: &str) -> String {
        let parsed: std::result::Result<Request, _> = serde_json::from_str(line);
        let (id, outcome) = match parsed {
            Ok(req) => (req.id.clone(), self.answer(req)),
            Err(e) => (None, Err(bad(format!("malformed request: {e}")))),
        };
        let text = match outcome {
            Ok(answer) => serde_json::to_string(&Answer { id, ..answer }),
            Err((error, message)) => serde_json::to_string(&Failure {
                ok: false,
                id,
                error,
                message,
            }),
        };
        text.unwrap_or_else(|e| format!(r#"{{"ok":false,"error":"bad_request","message":"{e}"}}"#))
    }

    fn target(&self, req: &Request) -> std::result::Result<Target, (ErrorKind, String)> {
        match (&req.node, &req.position) {
            (Some(id), None) => Ok(Target::Node(NodeId(*id))),
            (None, Some(p)) => {
                let p = match p.as_slice() {
                    [x, y] => Position::new(*x, *y, 0.0),
                    [x, y, z] => Position::new(*x, *y, *z),
                    _ => return Err(bad("position must have two or three coordinates")),
                };
                let delta = self.snapshot.graph_model.params().delta;
                hash_key(&p, delta).map(Target::Cell).map_err(model_error)
            }
            _ => Err(bad("give exactly one of `node` and `position`")),
        }
    }

    fn answer(&self, req: Request) -> Outcome {
        let target = self.target(&req)?;
        let model = &self.snapshot.graph_model;
        let bins = model.params().bins;
        let (mode, t) = match req.query.as_str() {
            "predict" => (Mode::Predicted, req.t),
            "descriptors" => (req.mode.unwrap_or(Mode::Historical), req.t),
            other => return Err(bad(format!("unknown query `{other}`"))),
        };
        if mode == Mode::Predicted && !t.is_some_and(f64::is_finite) {
            return Err(bad("predictions need a finite `t`"));
        }
        let (vector, histogram) = match mode {
            Mode::Predicted => {
                let t = t.unwrap_or_default();
                let v = match target {
                    Target::Node(id) => model.node_prediction(id, t),
                    Target::Cell(key) => model.location_prediction(&key, t),
                }
                .map_err(model_error)?;
                let h = DirectionalHistogram::from_activity(&v, t).map_err(model_error)?;
                (v, h)
            }
            Mode::Historical => {
                let h = match target {
                    Target::Node(id) => model
                        .node_histogram(id, Mode::Historical, 0.0)
                        .map_err(model_error)?
                        .ok_or_else(|| not_found(format!("node {id} owns no history")))?,
                    Target::Cell(key) => match model.ownership().owner_of(&key) {
                        Some(owner) => model
                            .node_histogram(owner, Mode::Historical, 0.0)
                            .map_err(model_error)?
                            .ok_or_else(|| not_found(format!("node {owner} owns no history")))?,
                        None => model
                            .map()
                            .lookup(&key)
                            .map(|c| c.histogram.clone())
                            .ok_or_else(|| not_found("no history at this position"))?,
                    },
                };
                debug_assert_eq!(h.bins(), bins);
                (h.counts().to_vec(), h)
            }
        };
        let d = histogram.descriptor(&model.params().descriptor);
        Ok(Answer {
            ok: true,
            id: None,
            target,
            mode,
            t: if mode == Mode::Predicted { t } else { None },
            vector,
            magnitude: d.magnitude,
            direction_deg: d.dominant_direction.map(|o| o.degrees()),
            entropy: d.entropy,
        })
    }

    /// Serves one connection until the peer closes it. Blank lines are
    /// ignored; every other line gets a response.
    pub fn serve_lines(&self, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut reply = self.handle_line(&line);
            reply.push('\n');
            output.write_all(reply.as_bytes())?;
            output.flush()?;
        }
        Ok(())
    }

    /// Accepts connections forever, one thread per client.
    pub fn serve_tcp(&self, listener: TcpListener) -> std::io::Result<()> {
        for stream in listener.incoming() {
            let stream = stream?;
            let service = self.clone();
            thread::spawn(move || {
                let _ = service.serve_stream(stream);
            });
        }
        Ok(())
    }

    fn serve_stream(&self, stream: TcpStream) -> std::io::Result<()> {
        stream.set_nodelay(true)?;
        let reader = std::io::BufReader::new(stream.try_clone()?);
        self.serve_lines(reader, stream)
    }
}
