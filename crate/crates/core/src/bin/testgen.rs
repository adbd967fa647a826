//! Test double for the external generator protocol.
//!
//! Usage: `spikemei-testgen <mode>` where mode is one of
//!
//! - `procedural`: decodes with the built-in procedural generator
//! - `echo`: a fixed image (every pixel 0.25) whatever the index
//! - `bad-range`: like echo, but the first pixel is 1.5
//! - `nudge`: like echo, but the first pixel is 1 + 5e-7
//! - `wrong-id`: answers with an id off by one
//! - `silent`: completes the handshake, then never answers
//! - `crash`: completes the handshake, then exits on the first request
//! - `short`: sends one pixel too few

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;
use serde_json::json;
use spikemei::stimulus::{Canvas, Generator, LatentGrid, Procedural};
use spikemei::LatentIndex;

#[derive(Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
enum Request {
    Hello { d: usize, n: usize, h: usize, w: usize, c: usize },
    Decode { id: u64, index: Vec<usize> },
    Bye,
}

fn encode(pixels: &[f32]) -> String {
    let bytes: Vec<u8> = pixels.iter().flat_map(|p| p.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "procedural".into());
    let known = ["procedural", "echo", "bad-range", "nudge", "wrong-id", "silent", "crash", "short"];
    if !known.contains(&mode.as_str()) {
        eprintln!("unknown mode {mode:?}; expected one of {known:?}");
        std::process::exit(1);
    }
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut generator: Option<Procedural> = None;
    let mut len = 0;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("bad request {line:?}: {e}");
                std::process::exit(2);
            }
        };
        let reply = match request {
            Request::Hello { d, n, h, w, c } => {
                let built = LatentGrid::new(d, n)
                    .and_then(|g| Canvas::new(h, w, c).map(|cv| (g, cv)))
                    .and_then(|(g, cv)| Procedural::new(g, cv));
                match built {
                    Ok(p) => {
                        len = h * w * c;
                        generator = Some(p);
                        json!({"ok": true})
                    }
                    Err(_) => json!({"ok": false}),
                }
            }
            Request::Decode { id, index } => {
                let Some(g) = &generator else {
                    eprintln!("decode before hello");
                    std::process::exit(2);
                };
                let mut pixels = vec![0.25f32; len];
                match mode.as_str() {
                    "procedural" => match g.decode(&LatentIndex(index)) {
                        Ok(s) => pixels = s.pixels,
                        Err(e) => {
                            eprintln!("{e}");
                            std::process::exit(2);
                        }
                    },
                    "bad-range" => pixels[0] = 1.5,
                    "nudge" => pixels[0] = 1.0 + 5e-7,
                    "short" => {
                        pixels.pop();
                    }
                    "silent" => continue,
                    "crash" => std::process::exit(3),
                    _ => {}
                }
                let id = if mode == "wrong-id" { id + 1 } else { id };
                json!({"id": id, "pixels": encode(&pixels)})
            }
            Request::Bye => break,
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
}
