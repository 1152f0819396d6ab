//! Oracles served by a child process over newline-delimited JSON.
//!
//! ```text
//! child -> host  {"type":"hello","d":4,"task":"classification","labels":[0,1],"concurrent":false}
//! host -> child  {"type":"predict","id":0,"X":[[...],...]}
//! child -> host  {"type":"result","id":0,"y":[...]}
//! child -> host  {"type":"error","id":0,"message":"..."}
//! ```
//!
//! One batch per request. Inputs are written with 17 significant digits so
//! every f64 survives the round trip.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use ndarray::ArrayView2;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::label::{Label, Labels};
use crate::oracle::Oracle;
use crate::space::{check_dim, Task};

#[derive(Clone, Debug)]
pub struct WireConfig {
    pub handshake_timeout: Duration,
    pub batch_timeout: Duration,
    /// Re-send the first row ever queried with every later batch and fail the
    /// session if its label changes.
    pub probe_determinism: bool,
}

impl Default for WireConfig {
    fn default() -> Self {
        WireConfig {
            handshake_timeout: Duration::from_secs(30),
            batch_timeout: Duration::from_secs(60),
            probe_determinism: false,
        }
    }
}

/// What the host expects the child to declare.
#[derive(Clone, Copy, Debug, Default)]
pub struct Expected {
    pub dim: Option<usize>,
    pub task: Option<Task>,
}

/// Metadata from the child's hello record.
#[derive(Clone, Debug, PartialEq)]
pub struct Hello {
    pub dim: usize,
    pub task: Task,
    pub labels: Option<Vec<usize>>,
    pub concurrent: bool,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ChildRecord {
    Hello {
        d: usize,
        task: Task,
        labels: Option<Vec<Value>>,
        concurrent: bool,
    },
    Result {
        id: u64,
        y: Vec<Value>,
    },
    Error {
        id: Option<u64>,
        message: String,
    },
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    stderr_thread: Option<JoinHandle<()>>,
    next_id: u64,
    failed: Option<String>,
}

impl Session {
    fn start(mut cmd: Command) -> Result<Self> {
        cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
        let mut child = cmd.spawn().map_err(|e| Error::Session {
            message: format!("could not spawn oracle command: {e}"),
            stderr: String::new(),
        })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let mut stderr_pipe = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let stderr_thread = std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = stderr_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
            stderr,
            stderr_thread: Some(stderr_thread),
            next_id: 0,
            failed: None,
        })
    }

    /// Marks the session failed, reaps the child and returns diagnostics.
    fn fail(&mut self, message: String) -> Error {
        self.stdin.take();
        let _ = self.child.kill();
        let status = self.child.wait().ok();
        if let Some(h) = self.stderr_thread.take() {
            let _ = h.join();
        }
        let message = match status.and_then(|s| s.code()) {
            Some(code) => format!("{message} (child exit status {code})"),
            None => message,
        };
        self.failed = Some(message.clone());
        Error::Session {
            message,
            stderr: self.stderr_text(),
        }
    }

    fn stderr_text(&self) -> String {
        self.stderr.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn read_record(&mut self, timeout: Duration, waiting_for: &str) -> Result<ChildRecord> {
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return serde_json::from_str(&line).map_err(|e| {
                        let err = self.fail(format!("malformed record while waiting for {waiting_for}: {e}"));
                        match err {
                            Error::Session { message, .. } => Error::Protocol(message),
                            other => other,
                        }
                    });
                }
                Ok(Err(e)) => return Err(self.fail(format!("reading oracle output failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    self.fail(format!("no {waiting_for} within {timeout:?}"));
                    return Err(Error::Timeout(timeout));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.fail(format!("oracle exited while waiting for {waiting_for}")))
                }
            }
        }
    }

    fn send(&mut self, line: &str) -> Result<()> {
        let res = match self.stdin.as_mut() {
            Some(stdin) => stdin
                .write_all(line.as_bytes())
                .and_then(|_| stdin.write_all(b"\n"))
                .and_then(|_| stdin.flush()),
            None => Err(std::io::Error::other("stdin closed")),
        };
        res.map_err(|e| self.fail(format!("writing to oracle failed: {e}")))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.stdin.take();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A child process speaking the oracle protocol.
pub struct WireOracle {
    hello: Hello,
    config: WireConfig,
    session: Mutex<Session>,
    probe: Mutex<Option<(Vec<f64>, Label)>>,
}

impl WireOracle {
    /// Spawns `program args...` and completes the handshake.
    pub fn spawn<S: AsRef<str>>(program: &str, args: &[S], expected: Expected, config: WireConfig) -> Result<Self> {
        let mut cmd = Command::new(program);
        cmd.args(args.iter().map(|a| a.as_ref()));
        Self::handshake(cmd, expected, config)
    }

    /// Runs `cmdline` through `sh -c`.
    pub fn spawn_shell(cmdline: &str, expected: Expected, config: WireConfig) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(cmdline);
        Self::handshake(cmd, expected, config)
    }

    pub fn handshake(cmd: Command, expected: Expected, config: WireConfig) -> Result<Self> {
        let mut session = Session::start(cmd)?;
        let record = session.read_record(config.handshake_timeout, "hello")?;
        let hello = match record {
            ChildRecord::Hello {
                d,
                task,
                labels,
                concurrent,
            } => {
                let labels = match labels {
                    None => None,
                    Some(vals) => Some(
                        vals.iter()
                            .map(class_label)
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| {
                                Error::Protocol(session.fail("hello labels must be non-negative integers".into()).to_string())
                            })?,
                    ),
                };
                Hello {
                    dim: d,
                    task,
                    labels,
                    concurrent,
                }
            }
            ChildRecord::Error { message, .. } => {
                return Err(session.fail(format!("oracle reported an error during handshake: {message}")))
            }
            ChildRecord::Result { .. } => {
                session.fail("expected hello, got result".into());
                return Err(Error::Protocol("expected hello, got result".into()));
            }
        };
        if hello.dim == 0 {
            session.fail("hello declares d = 0".into());
            return Err(Error::Protocol("hello declares d = 0".into()));
        }
        if hello.task == Task::Classification && hello.labels.as_ref().is_none_or(|l| l.is_empty()) {
            session.fail("classification hello must list labels".into());
            return Err(Error::Protocol("classification hello must list labels".into()));
        }
        if let Some(d) = expected.dim {
            if d != hello.dim {
                session.fail("dimension mismatch".into());
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: hello.dim,
                });
            }
        }
        if let Some(t) = expected.task {
            if t != hello.task {
                session.fail("task mismatch".into());
                return Err(Error::Domain(format!("oracle serves {} but {t} was expected", hello.task)));
            }
        }
        Ok(WireOracle {
            hello,
            config,
            session: Mutex::new(session),
            probe: Mutex::new(None),
        })
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    /// Number of predict requests sent so far.
    pub fn requests(&self) -> u64 {
        self.session.lock().unwrap_or_else(|e| e.into_inner()).next_id
    }

    fn decode(&self, y: &[Value]) -> Option<Labels> {
        match self.hello.task {
            Task::Classification => {
                let allowed = self.hello.labels.as_deref().unwrap_or(&[]);
                y.iter()
                    .map(|v| class_label(v).filter(|c| allowed.contains(c)))
                    .collect::<Option<Vec<_>>>()
                    .map(Labels::Classes)
            }
            Task::Regression => y
                .iter()
                .map(|v| v.as_f64().filter(|f| f.is_finite()))
                .collect::<Option<Vec<_>>>()
                .map(Labels::Values),
        }
    }
}

fn class_label(v: &Value) -> Option<usize> {
    v.as_u64().and_then(|c| usize::try_from(c).ok())
}

/// Formats one predict record.
pub fn encode_predict(id: u64, rows: &[Vec<f64>]) -> String {
    let mut s = String::with_capacity(32 + rows.len() * rows.first().map_or(0, |r| r.len()) * 24);
    let _ = write!(s, "{{\"type\":\"predict\",\"id\":{id},\"X\":[");
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.16e}");
        }
        s.push(']');
    }
    s.push_str("]}");
    s
}

impl Oracle for WireOracle {
    fn dimension(&self) -> usize {
        self.hello.dim
    }

    fn task(&self) -> Task {
        self.hello.task
    }

    fn concurrent(&self) -> bool {
        self.hello.concurrent
    }

    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        check_dim(self.hello.dim, x.ncols())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("oracle queries must be finite"));
        }
        let mut rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let probe = if self.config.probe_determinism {
            self.probe.lock().unwrap_or_else(|e| e.into_inner()).clone()
        } else {
            None
        };
        if let Some((row, _)) = &probe {
            rows.push(row.clone());
        }

        let mut session = self.session.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(msg) = &session.failed {
            return Err(Error::Session {
                message: format!("session already failed: {msg}"),
                stderr: session.stderr_text(),
            });
        }
        let id = session.next_id;
        session.next_id += 1;
        session.send(&encode_predict(id, &rows))?;
        let timeout = self.config.batch_timeout;
        let mut labels = match session.read_record(timeout, "result")? {
            ChildRecord::Result { id: rid, y } => {
                if rid != id {
                    session.fail(format!("result id {rid} does not match request {id}"));
                    return Err(Error::Protocol(format!("result id {rid} does not match request {id}")));
                }
                if y.len() != rows.len() {
                    let msg = format!("result has {} labels for {} rows", y.len(), rows.len());
                    session.fail(msg.clone());
                    return Err(Error::Protocol(msg));
                }
                match self.decode(&y) {
                    Some(l) => l,
                    None => {
                        let msg = "result contains a label outside the declared set".to_string();
                        session.fail(msg.clone());
                        return Err(Error::Protocol(msg));
                    }
                }
            }
            ChildRecord::Error { id: rid, message } => {
                let message = match rid {
                    Some(r) if r != id => format!("{message} (reported for request {r} while {id} was pending)"),
                    _ => message,
                };
                session.fail(format!("oracle error: {message}"));
                return Err(Error::Oracle(message));
            }
            ChildRecord::Hello { .. } => {
                session.fail("unexpected hello".into());
                return Err(Error::Protocol("unexpected hello record".into()));
            }
        };

        if self.config.probe_determinism {
            match probe {
                Some((_, expected)) => {
                    let got = labels.get(labels.len() - 1);
                    if got != expected {
                        let msg = format!("probe row changed label from {expected} to {got}");
                        session.fail(msg.clone());
                        return Err(Error::Nondeterministic(msg));
                    }
                    match &mut labels {
                        Labels::Classes(c) => {
                            c.pop();
                        }
                        Labels::Values(v) => {
                            v.pop();
                        }
                    }
                }
                None if !rows.is_empty() => {
                    *self.probe.lock().unwrap_or_else(|e| e.into_inner()) = Some((rows[0].clone(), labels.get(0)));
                }
                None => {}
            }
        }
        Ok(labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_records_use_17_significant_digits() {
        let line = encode_predict(3, &[vec![0.1, -2.5], vec![1e-300, 3.0]]);
        assert_eq!(
            line,
            "{\"type\":\"predict\",\"id\":3,\"X\":[[1.0000000000000001e-1,-2.5000000000000000e0],[1.0000000000000000e-300,3.0000000000000000e0]]}"
        );
        let parsed: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed["X"][0][0].as_f64().unwrap(), 0.1);
    }
}
