//! Host side of the external generator protocol.
//!
//! The generator is a child process speaking newline-delimited JSON on its
//! standard input and output, one request in flight at a time:
//!
//! ```text
//! host -> {"cmd":"hello","d":8,"n":16,"h":8,"w":8,"c":1}
//! gen  <- {"ok":true}
//! host -> {"cmd":"decode","id":0,"index":[3,0,15,...]}
//! gen  <- {"id":0,"pixels":"<base64 of h*w*c f32 little-endian, row-major, channel-last>"}
//! host -> {"cmd":"bye"}
//! ```
//!
//! Request ids count up from 0 and each response must echo the id of the
//! request it answers. Pixels more than `1e-6` outside `[0, 1]`, a wrong
//! length, a wrong id, malformed JSON, a timeout or the process exiting are
//! all errors. After any error the endpoint refuses further requests, since
//! the stream can no longer be trusted to line up.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Canvas, Generator, LatentGrid, Stimulus};
use crate::error::{Error, Result};
use crate::tt::LatentIndex;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Out-of-range slack that is clamped with a warning instead of rejected.
const RANGE_SLACK: f32 = 1e-6;

struct Endpoint {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    broken: Option<String>,
}

impl Endpoint {
    fn send(&mut self, msg: &serde_json::Value) -> Result<()> {
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::GeneratorExited("input closed".into()))?;
        let mut line = serde_json::to_vec(msg)?;
        line.push(b'\n');
        stdin
            .write_all(&line)
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::GeneratorExited(format!("write failed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::GeneratorExited(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                // Give the process a moment to be reaped so the status is known.
                let deadline = Instant::now() + Duration::from_millis(200);
                loop {
                    match self.child.try_wait() {
                        Ok(Some(status)) => return Err(Error::GeneratorExited(status.to_string())),
                        Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                        _ => return Err(Error::GeneratorExited("output closed".into())),
                    }
                }
            }
        }
    }

    /// Sends `bye` and waits briefly for a clean exit; kills the child
    /// otherwise. Returns whether it exited cleanly on its own.
    fn close(&mut self) -> bool {
        if self.stdin.is_some() {
            let _ = self.send(&json!({"cmd": "bye"}));
        }
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return status.success(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return false;
                }
            }
        }
    }
}

#[derive(Deserialize)]
struct HelloReply {
    ok: bool,
}

#[derive(Deserialize)]
struct DecodeReply {
    id: u64,
    pixels: String,
}

/// A generator running in a child process. Requests from several threads
/// are queued; only one is ever in flight.
pub struct ExternalGenerator {
    id: String,
    grid: LatentGrid,
    canvas: Canvas,
    timeout: Duration,
    endpoint: Mutex<Endpoint>,
    clamped: AtomicUsize,
}

impl ExternalGenerator {
    /// Starts `command` (program followed by arguments) and performs the
    /// handshake.
    pub fn spawn(command: &[String], grid: LatentGrid, canvas: Canvas, timeout: Duration) -> Result<Self> {
        grid.validate()?;
        canvas.validate()?;
        let (program, args) =
            command.split_first().ok_or_else(|| Error::input("external generator command is empty"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    Error::input(format!("cannot start generator {program:?}: {e}"))
                }
                _ => Error::Io(e),
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut endpoint = Endpoint { child, stdin, lines: rx, next_id: 0, broken: None };
        let hello = json!({
            "cmd": "hello",
            "d": grid.dim,
            "n": grid.points,
            "h": canvas.height,
            "w": canvas.width,
            "c": canvas.channels,
        });
        let handshake = endpoint.send(&hello).and_then(|_| endpoint.recv(timeout)).and_then(|line| {
            let reply: HelloReply = serde_json::from_str(&line)
                .map_err(|e| Error::Protocol(format!("bad handshake reply {line:?}: {e}")))?;
            if reply.ok {
                Ok(())
            } else {
                Err(Error::Protocol("generator refused the handshake".into()))
            }
        });
        if let Err(e) = handshake {
            endpoint.close();
            return Err(e);
        }
        let id = format!("external:{}", program);
        Ok(ExternalGenerator { id, grid, canvas, timeout, endpoint: Mutex::new(endpoint), clamped: AtomicUsize::new(0) })
    }

    /// Number of responses that needed clamping so far.
    pub fn clamped(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Says goodbye and reports whether the process exited cleanly.
    pub fn shutdown(self) -> bool {
        let clean = self.endpoint.lock().unwrap_or_else(|p| p.into_inner()).close();
        clean
    }

    fn request(&self, ep: &mut Endpoint, index: &LatentIndex) -> Result<Vec<f32>> {
        let id = ep.next_id;
        ep.next_id += 1;
        ep.send(&json!({"cmd": "decode", "id": id, "index": index.digits()}))?;
        let line = ep.recv(self.timeout)?;
        let reply: DecodeReply =
            serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("bad decode reply: {e}")))?;
        if reply.id != id {
            return Err(Error::Protocol(format!("expected response {id}, got {}", reply.id)));
        }
        let bytes = STANDARD.decode(reply.pixels.as_bytes()).map_err(|e| Error::Protocol(format!("pixels: {e}")))?;
        if bytes.len() != self.canvas.len() * 4 {
            return Err(Error::Protocol(format!(
                "response {id} carries {} bytes, expected {}",
                bytes.len(),
                self.canvas.len() * 4
            )));
        }
        let mut pixels: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        let mut clamped = false;
        for p in pixels.iter_mut() {
            if (0.0..=1.0).contains(p) {
                continue;
            }
            if *p >= -RANGE_SLACK && *p <= 1.0 + RANGE_SLACK {
                *p = p.clamp(0.0, 1.0);
                clamped = true;
            } else {
                return Err(Error::Protocol(format!("response {id} has pixel value {p} outside [0, 1]")));
            }
        }
        if clamped {
            log::warn!("generator response {id} exceeded [0, 1] by at most {RANGE_SLACK}; clamped");
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        Ok(pixels)
    }
}

impl Generator for ExternalGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn grid(&self) -> LatentGrid {
        self.grid
    }

    fn canvas(&self) -> Canvas {
        self.canvas
    }

    fn decode(&self, index: &LatentIndex) -> Result<Stimulus> {
        index.validate(&self.grid.shape())?;
        let mut ep = self.endpoint.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(why) = &ep.broken {
            return Err(Error::Protocol(format!("generator unusable after an earlier failure: {why}")));
        }
        match self.request(&mut ep, index) {
            Ok(pixels) => Ok(Stimulus { canvas: self.canvas, pixels, index: index.clone(), generator: self.id.clone() }),
            Err(e) => {
                ep.broken = Some(e.to_string());
                Err(e)
            }
        }
    }
}

impl Drop for ExternalGenerator {
    fn drop(&mut self) {
        let ep = self.endpoint.get_mut().unwrap_or_else(|p| p.into_inner());
        ep.close();
    }
}

/// Outcome of [`conformance_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub requests: usize,
    pub answered: usize,
    /// Repeated indices whose pixels differed from the first answer.
    pub nondeterministic: usize,
    pub clamped: usize,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
    pub clean_shutdown: bool,
    pub failure: Option<String>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.nondeterministic == 0 && self.clean_shutdown && self.answered == self.requests
    }
}

/// Exercises a generator: handshake, `requests` decodes (grid corners, the
/// centre, then seeded random indices, every fifth one a repeat), and
/// shutdown. Protocol failures land in the report; only a failure to start
/// the process is returned as an error.
pub fn conformance_check(
    command: &[String],
    grid: LatentGrid,
    canvas: Canvas,
    requests: usize,
    seed: u64,
    timeout: Duration,
) -> Result<ConformanceReport> {
    let mut report = ConformanceReport {
        requests,
        answered: 0,
        nondeterministic: 0,
        clamped: 0,
        mean_latency_ms: 0.0,
        max_latency_ms: 0.0,
        clean_shutdown: false,
        failure: None,
    };
    let generator = match ExternalGenerator::spawn(command, grid, canvas, timeout) {
        Ok(g) => g,
        Err(e) if e.is_input() => return Err(e),
        Err(e) => {
            report.failure = Some(format!("handshake: {e}"));
            return Ok(report);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: Vec<(LatentIndex, Vec<f32>)> = Vec::new();
    let mut total = 0.0;
    for i in 0..requests {
        let index = match i {
            0 => LatentIndex(vec![0; grid.dim]),
            1 => LatentIndex(vec![grid.points - 1; grid.dim]),
            2 => grid.centre(),
            _ if i % 5 == 4 && !seen.is_empty() => seen[rng.random_range(0..seen.len())].0.clone(),
            _ => LatentIndex((0..grid.dim).map(|_| rng.random_range(0..grid.points)).collect()),
        };
        let start = Instant::now();
        match generator.decode(&index) {
            Ok(s) => {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                total += ms;
                report.max_latency_ms = report.max_latency_ms.max(ms);
                report.answered += 1;
                match seen.iter().find(|(idx, _)| *idx == index) {
                    Some((_, first)) if *first != s.pixels => report.nondeterministic += 1,
                    Some(_) => {}
                    None => seen.push((index, s.pixels)),
                }
            }
            Err(e) => {
                report.failure = Some(format!("request {i}: {e}"));
                break;
            }
        }
    }
    if report.answered > 0 {
        report.mean_latency_ms = total / report.answered as f64;
    }
    report.clamped = generator.clamped();
    report.clean_shutdown = generator.shutdown();
    Ok(report)
}
