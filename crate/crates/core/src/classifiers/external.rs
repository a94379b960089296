//! Line protocol for classifiers running in a child process.
//!
//! For every image the engine writes two lines to the child's stdin:
//!
//! ```text
//! W H C N\n
//! p_0 p_1 ... p_{W*H*C-1}\n
//! ```
//!
//! Intensities are in channel-planar, row-major order. The child answers with
//! one line of `N` whitespace-separated nonnegative propensities whose sum is
//! within 1e-3 of one; the engine renormalizes them.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{ClassificationResult, Classifier, PropensityVector};
use crate::error::{Error, Result};
use crate::imaging::Image;

const SUM_DRIFT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalClassifierSpec {
    pub command: String,
    pub args: Vec<String>,
    pub num_classes: usize,
    /// Per-case reply deadline.
    pub timeout: Duration,
}

impl ExternalClassifierSpec {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalClassifierSpec {
            command: command.into(),
            args: Vec::new(),
            num_classes: 10,
            timeout: Duration::from_secs(30),
        }
    }

    pub fn args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn num_classes(mut self, n: usize) -> Self {
        self.num_classes = n;
        self
    }
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    replies: Receiver<std::io::Result<String>>,
}

impl Session {
    fn spawn(spec: &ExternalClassifierSpec) -> Result<Session> {
        let mut child = Command::new(&spec.command)
            .args(&spec.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("failed to spawn `{}`: {e}", spec.command)))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            replies: rx,
        })
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A long-lived child process answering classification requests.
///
/// Requests are serialized through a lock; the process is (re)started
/// lazily and discarded after any protocol failure.
pub struct ExternalClassifier {
    spec: ExternalClassifierSpec,
    session: Mutex<Option<Session>>,
}

impl ExternalClassifier {
    pub fn new(spec: ExternalClassifierSpec) -> Result<Self> {
        if spec.num_classes == 0 {
            return Err(Error::Config(
                "external classifier needs at least one class".into(),
            ));
        }
        Ok(ExternalClassifier {
            spec,
            session: Mutex::new(None),
        })
    }

    pub fn spec(&self) -> &ExternalClassifierSpec {
        &self.spec
    }

    fn request(&self, session: &mut Session, img: &Image) -> Result<String> {
        let mut msg = format!(
            "{} {} {} {}\n",
            img.width(),
            img.height(),
            img.channels(),
            self.spec.num_classes
        );
        let mut first = true;
        for p in img.pixels() {
            if !first {
                msg.push(' ');
            }
            first = false;
            msg.push_str(&p.to_string());
        }
        msg.push('\n');
        let stdin = session
            .stdin
            .as_mut()
            .expect("stdin open while session lives");
        stdin
            .write_all(msg.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Protocol(format!("failed to send request: {e}")))?;
        match session.replies.recv_timeout(self.spec.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Protocol(format!("failed to read reply: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Protocol(format!(
                "no reply within {:?}",
                self.spec.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Protocol("process exited without replying".into()))
            }
        }
    }

    fn parse_reply(&self, line: &str) -> Result<PropensityVector> {
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Protocol(format!("malformed reply: `{tok}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != self.spec.num_classes {
            return Err(Error::Protocol(format!(
                "malformed reply: expected {} propensities, got {}",
                self.spec.num_classes,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Protocol(format!(
                "malformed reply: propensity {bad}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_DRIFT {
            return Err(Error::Protocol(format!("propensities sum to {sum}")));
        }
        PropensityVector::normalize(&values)
    }
}

impl Classifier for ExternalClassifier {
    fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn classify(&self, img: &Image) -> Result<ClassificationResult> {
        let mut guard = self.session.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(Session::spawn(&self.spec)?);
        }
        let session = guard.as_mut().expect("session just ensured");
        let outcome = self
            .request(session, img)
            .and_then(|line| self.parse_reply(&line));
        if outcome.is_err() {
            *guard = None;
        }
        outcome.map(ClassificationResult::from_propensities)
    }
}

/// One-shot classification through a freshly spawned process.
pub fn external_classify(
    spec: &ExternalClassifierSpec,
    img: &Image,
) -> Result<ClassificationResult> {
    ExternalClassifier::new(spec.clone())?.classify(img)
}
