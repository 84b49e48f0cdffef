//! Line protocol between master and workers.
//!
//! Every message is one line, `TYPE \t task_id \t attempt \t payload_path`.
//! Unused fields are `-`. Payload paths are relative to the shared work
//! directory, so master and workers may mount it at different places.
//!
//! | type      | direction | payload                                  |
//! |-----------|-----------|------------------------------------------|
//! | REGISTER  | w → m     | worker name in `task_id`                 |
//! | ASSIGN    | m → w     | task descriptor file                     |
//! | RESULT    | w → m     | committed output (directory or file)     |
//! | FAILED    | w → m     | file holding the error text              |
//! | HEARTBEAT | w → m     | none                                     |
//! | SHUTDOWN  | m → w     | none                                     |

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::IoContext;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Register,
    Assign,
    Result,
    Failed,
    Heartbeat,
    Shutdown,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Register => "REGISTER",
            MessageKind::Assign => "ASSIGN",
            MessageKind::Result => "RESULT",
            MessageKind::Failed => "FAILED",
            MessageKind::Heartbeat => "HEARTBEAT",
            MessageKind::Shutdown => "SHUTDOWN",
        }
    }
}

impl FromStr for MessageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "REGISTER" => MessageKind::Register,
            "ASSIGN" => MessageKind::Assign,
            "RESULT" => MessageKind::Result,
            "FAILED" => MessageKind::Failed,
            "HEARTBEAT" => MessageKind::Heartbeat,
            "SHUTDOWN" => MessageKind::Shutdown,
            _ => return Err(Error::Protocol(format!("unknown message type `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub task_id: String,
    pub attempt: u32,
    pub payload_path: String,
}

impl Message {
    pub fn new(kind: MessageKind, task_id: &str, attempt: u32, payload_path: &str) -> Self {
        Message { kind, task_id: task_id.to_string(), attempt, payload_path: payload_path.to_string() }
    }

    pub fn bare(kind: MessageKind) -> Self {
        Message::new(kind, "-", 0, "-")
    }

    pub fn parse(line: &str) -> Result<Message> {
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        let [kind, task_id, attempt, payload] = fields.as_slice() else {
            return Err(Error::Protocol(format!("expected 4 tab-separated fields in `{line}`")));
        };
        let attempt = attempt
            .parse()
            .map_err(|_| Error::Protocol(format!("bad attempt number `{attempt}`")))?;
        Ok(Message::new(kind.parse()?, task_id, attempt, payload))
    }

    pub fn send(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(self.to_string().as_bytes())
            .and_then(|_| out.flush())
            .ctx(|| format!("sending {}", self.kind.as_str()))
    }

    /// `Ok(None)` at end of stream.
    pub fn receive(input: &mut impl BufRead) -> Result<Option<Message>> {
        let mut line = String::new();
        let n = input.read_line(&mut line).ctx(|| "reading message".to_string())?;
        if n == 0 {
            return Ok(None);
        }
        Message::parse(&line).map(Some)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}\t{}\t{}\t{}", self.kind.as_str(), self.task_id, self.attempt, self.payload_path)
    }
}

/// What a worker needs to run one task attempt; stored as `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDescriptor {
    pub job_id: String,
    pub task_id: String,
    pub attempt: u32,
    pub kind: TaskKind,
    pub map_fn: String,
    pub reduce_fn: String,
    pub partitions: usize,
    /// Where the worker commits its output, relative to the work dir.
    pub output: PathBuf,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    /// Map split number `index`.
    Map { index: usize, split: PathBuf },
    /// Reduce partition over committed map outputs, in map-task order.
    Reduce { partition: usize, inputs: Vec<PathBuf> },
}

impl TaskDescriptor {
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("job={}", self.job_id),
            format!("task={}", self.task_id),
            format!("attempt={}", self.attempt),
            format!("map_fn={}", self.map_fn),
            format!("reduce_fn={}", self.reduce_fn),
            format!("partitions={}", self.partitions),
            format!("output={}", self.output.display()),
        ];
        match &self.kind {
            TaskKind::Map { index, split } => {
                lines.push("kind=map".into());
                lines.push(format!("index={index}"));
                lines.push(format!("split={}", split.display()));
            }
            TaskKind::Reduce { partition, inputs } => {
                lines.push("kind=reduce".into());
                lines.push(format!("partition={partition}"));
                lines.extend(inputs.iter().map(|p| format!("input={}", p.display())));
            }
        }
        lines.extend(self.params.iter().map(|(k, v)| format!("param.{k}={v}")));
        lines.join("\n") + "\n"
    }

    pub fn parse(text: &str) -> Result<TaskDescriptor> {
        let mut fields = BTreeMap::new();
        let mut inputs = Vec::new();
        let mut params = BTreeMap::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Protocol(format!("descriptor line `{line}` is not key=value")))?;
            if let Some(name) = k.strip_prefix("param.") {
                params.insert(name.to_string(), v.to_string());
            } else if k == "input" {
                inputs.push(PathBuf::from(v));
            } else {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Protocol(format!("descriptor missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Protocol(format!("descriptor field `{k}` is not a number")))
        };
        let kind = match get("kind")? {
            "map" => TaskKind::Map { index: num("index")?, split: PathBuf::from(get("split")?) },
            "reduce" => TaskKind::Reduce { partition: num("partition")?, inputs },
            other => return Err(Error::Protocol(format!("unknown task kind `{other}`"))),
        };
        Ok(TaskDescriptor {
            job_id: get("job")?.to_string(),
            task_id: get("task")?.to_string(),
            attempt: num("attempt")? as u32,
            kind,
            map_fn: get("map_fn")?.to_string(),
            reduce_fn: get("reduce_fn")?.to_string(),
            partitions: num("partitions")?,
            output: PathBuf::from(get("output")?),
            params,
        })
    }
}

/// Write `bytes` to `path` through a temporary sibling and a rename, so
/// readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes).ctx(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).ctx(|| format!("renaming to {}", path.display()))
}
