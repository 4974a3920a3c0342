use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DepthConvention, DepthPayload, Detection, Request, Response, Stage};
use crate::graph::SegMask;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("{stage:?} stage timed out")]
    Timeout { stage: Stage },
    #[error("{stage:?} stage returned a malformed response: {detail}")]
    Malformed { stage: Stage, detail: String },
    #[error("backend transport: {0}")]
    Transport(String),
}

/// Something that answers stage requests.
pub trait Backend {
    fn call(&mut self, req: &Request) -> Result<Response, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockDepth {
    pub convention: DepthConvention,
    /// Value on the top row; rows interpolate linearly to `bottom`.
    pub top: f32,
    pub bottom: f32,
}

/// Canned answers for one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub objects: Vec<Detection>,
    /// Attributes by object label.
    pub attributes: BTreeMap<String, Vec<String>>,
    /// Relation text by `"subject->object"` ids.
    pub relations: BTreeMap<String, String>,
    pub default_relation: Option<String>,
    pub depth: Option<MockDepth>,
    /// Stages that time out for this image.
    pub fail: Vec<Stage>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ScriptFile {
    default: MockScript,
    images: BTreeMap<String, MockScript>,
}

/// Replays scripted answers and records every call it receives. Segment
/// answers are rectangles over the requested boxes.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    default: MockScript,
    images: BTreeMap<String, MockScript>,
    calls: Vec<(String, Stage)>,
}

impl MockBackend {
    pub fn new(default: MockScript) -> Self {
        MockBackend {
            default,
            ..Default::default()
        }
    }

    /// A cup on a table, lit so that the lower part of the frame is nearer.
    pub fn two_boxes() -> Self {
        MockBackend::new(MockScript {
            objects: vec![
                Detection {
                    bbox: [100.0, 300.0, 200.0, 400.0],
                    label: "Cup".into(),
                },
                Detection {
                    bbox: [50.0, 100.0, 600.0, 450.0],
                    label: "table".into(),
                },
            ],
            attributes: BTreeMap::from([
                ("cup".into(), vec!["white".into(), "ceramic".into()]),
                ("table".into(), vec!["wooden".into()]),
            ]),
            relations: BTreeMap::from([
                ("o0->o1".into(), "on".into()),
                ("o1->o0".into(), "under".into()),
            ]),
            default_relation: None,
            depth: Some(MockDepth {
                convention: DepthConvention::Inverse,
                top: 1.0,
                bottom: 5.0,
            }),
            fail: Vec::new(),
        })
    }

    /// `{"default": script, "images": {image_ref: script}}`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let f: ScriptFile = serde_json::from_str(text)?;
        Ok(MockBackend {
            default: f.default,
            images: f.images,
            calls: Vec::new(),
        })
    }

    pub fn insert(&mut self, image_ref: impl Into<String>, script: MockScript) {
        self.images.insert(image_ref.into(), script);
    }

    pub fn script(&self) -> &MockScript {
        &self.default
    }

    /// `(image_ref, stage)` for every call so far.
    pub fn calls(&self) -> &[(String, Stage)] {
        &self.calls
    }
}

fn dims(req: &Request) -> Result<(u32, u32), BackendError> {
    let get = |k: &str| req.params.get(k).and_then(Value::as_u64).map(|v| v as u32);
    match (get("width"), get("height")) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(BackendError::Malformed {
            stage: req.stage,
            detail: "request lacks image width/height".into(),
        }),
    }
}

impl Backend for MockBackend {
    fn call(&mut self, req: &Request) -> Result<Response, BackendError> {
        self.calls.push((req.image_ref.clone(), req.stage));
        let s = self.images.get(&req.image_ref).unwrap_or(&self.default);
        if s.fail.contains(&req.stage) {
            return Err(BackendError::Timeout { stage: req.stage });
        }
        let payload = match req.stage {
            Stage::Detect => json!({ "objects": s.objects }),
            Stage::Segment => {
                let (w, h) = dims(req)?;
                let boxes: Vec<[f64; 4]> = serde_json::from_value(req.params["bboxes"].clone()).map_err(|e| {
                    BackendError::Malformed {
                        stage: req.stage,
                        detail: e.to_string(),
                    }
                })?;
                let masks: Vec<_> = boxes
                    .iter()
                    .map(|b| {
                        let m = SegMask::rectangle(w, h, b[0].ceil() as u32, b[1].ceil() as u32, b[2] as u32, b[3] as u32);
                        m.encoding().clone()
                    })
                    .collect();
                json!({ "masks": masks })
            }
            Stage::Attributes => {
                let label = req.params.get("label").and_then(Value::as_str).unwrap_or_default();
                json!({ "attributes": s.attributes.get(label).cloned().unwrap_or_default() })
            }
            Stage::Relation => {
                let id = |k: &str| req.params.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
                let key = format!("{}->{}", id("subject"), id("object"));
                let text = s.relations.get(&key).or(s.default_relation.as_ref()).cloned().unwrap_or_default();
                json!({ "relation": text })
            }
            Stage::Depth => {
                let Some(d) = &s.depth else {
                    return Err(BackendError::Malformed {
                        stage: req.stage,
                        detail: "no depth scripted".into(),
                    });
                };
                let (w, h) = dims(req)?;
                let values: Vec<f32> = (0..h)
                    .flat_map(|y| {
                        let t = if h > 1 { y as f32 / (h - 1) as f32 } else { 0.0 };
                        std::iter::repeat_n(d.top + (d.bottom - d.top) * t, w as usize)
                    })
                    .collect();
                serde_json::to_value(DepthPayload {
                    width: w,
                    height: h,
                    values,
                    convention: d.convention,
                })
                .expect("payload serializes")
            }
        };
        Ok(Response {
            id: req.id,
            stage: req.stage,
            payload,
        })
    }
}

/// A child process speaking line-delimited JSON on stdin/stdout. Each
/// request carries a fresh `id`; responses with other ids are discarded.
pub struct SubprocessBackend {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    next_id: u64,
    timeout: Duration,
    retries: u32,
}

impl SubprocessBackend {
    /// Runs `command` (whitespace-separated program and arguments).
    pub fn spawn(command: &str, timeout: Duration, retries: u32) -> Result<Self, BackendError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| BackendError::Transport("empty backend command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Transport(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(SubprocessBackend {
            child,
            stdin,
            lines: rx,
            next_id: 1,
            timeout,
            retries,
        })
    }

    fn once(&mut self, req: &Request) -> Result<Response, BackendError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Request { id, ..req.clone() }).expect("request serializes");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let deadline = std::time::Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(l) => {
                    let resp: Response = serde_json::from_str(&l).map_err(|e| BackendError::Malformed {
                        stage: req.stage,
                        detail: format!("{e}: {l}"),
                    })?;
                    if resp.id == id {
                        return Ok(resp);
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(BackendError::Timeout { stage: req.stage }),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(BackendError::Transport("backend closed its output".into()))
                }
            }
        }
    }
}

impl Backend for SubprocessBackend {
    fn call(&mut self, req: &Request) -> Result<Response, BackendError> {
        let mut attempt = 0;
        loop {
            match self.once(req) {
                Err(BackendError::Timeout { .. }) if attempt < self.retries => attempt += 1,
                r => return r,
            }
        }
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// `mock`, `mock:<script.json>` or `external:<command>`.
pub fn parse_backend(spec: &str, timeout: Duration, retries: u32) -> Result<Box<dyn Backend>, BackendError> {
    if spec == "mock" {
        return Ok(Box::new(MockBackend::two_boxes()));
    }
    if let Some(path) = spec.strip_prefix("mock:") {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Transport(format!("{path}: {e}")))?;
        let m = MockBackend::from_json(&text).map_err(|e| BackendError::Transport(format!("{path}: {e}")))?;
        return Ok(Box::new(m));
    }
    if let Some(cmd) = spec.strip_prefix("external:") {
        return Ok(Box::new(SubprocessBackend::spawn(cmd, timeout, retries)?));
    }
    Err(BackendError::Transport(format!(
        "unknown backend {spec:?}; expected mock, mock:<file> or external:<command>"
    )))
}
