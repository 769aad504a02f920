//! Line-oriented simulation scripts.
//!
//! One command per line; blank lines and `#` comments are skipped.
//!
//! ```text
//! pose <x_mm> <y_mm> <facing_deg>   move the hand; reads whatever tag the reader sees
//! read <uid> [latency_ms]           inject a tag read directly (default latency 100)
//! button                            press the record button
//! record <label...>                 deliver the recorded message (rest of line)
//! tick <ms>                         let time pass
//! ```
//!
//! A `pose` that keeps the same tag in view does not re-read it; the tag has
//! to leave the field first, as with the real reader.

use std::path::Path;

use rfglove_core::device::{Device, DeviceConfig, DeviceEvent, StepError, TranscriptEntry};
use rfglove_core::rfmodel::{self, HandPose, RfParams};
use rfglove_core::scene::Scene;
use rfglove_core::tagdb::{TagDatabase, TagDbError, TagUid};
use thiserror::Error;

const DEFAULT_READ_LATENCY_MS: u32 = 100;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Device {
        line: usize,
        #[source]
        source: StepError,
    },
    #[error(transparent)]
    Storage(#[from] TagDbError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Pose(HandPose),
    Read { uid: TagUid, latency_ms: u32 },
    Button,
    Record(String),
    Tick(u32),
}

/// A parsed command with its 1-based source line.
#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub line: usize,
    pub command: Command,
}

pub fn parse(text: &str) -> Result<Vec<Line>, ScriptError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| ScriptError::Parse { line, message };
        let (word, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let args: Vec<&str> = rest.split_whitespace().collect();
        let num = |s: &str, what: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(format!("bad {what} {s:?}")));
        let command = match word {
            "pose" => {
                let [x, y, f] = args[..] else {
                    return Err(err("pose takes x_mm y_mm facing_deg".into()));
                };
                Command::Pose(HandPose::new(num(x, "x")?, num(y, "y")?, num(f, "facing")?))
            }
            "read" => {
                let (uid, latency_ms) = match args[..] {
                    [u] => (u, DEFAULT_READ_LATENCY_MS),
                    [u, l] => (u, l.parse().map_err(|_| err(format!("bad latency {l:?}")))?),
                    _ => return Err(err("read takes a uid and an optional latency".into())),
                };
                let uid = uid.parse().map_err(|e| err(format!("{e}")))?;
                Command::Read { uid, latency_ms }
            }
            "button" if args.is_empty() => Command::Button,
            "record" => {
                let label = rest.trim();
                if label.is_empty() {
                    return Err(err("record needs a label".into()));
                }
                Command::Record(label.to_owned())
            }
            "tick" => match args[..] {
                [ms] => match ms.parse::<u32>() {
                    Ok(v) if v > 0 => Command::Tick(v),
                    _ => return Err(err(format!("bad tick length {ms:?}"))),
                },
                _ => return Err(err("tick takes a length in ms".into())),
            },
            other => return Err(err(format!("unknown command {other:?}"))),
        };
        out.push(Line { line, command });
    }
    Ok(out)
}

/// Runs a parsed script against `scene`, returning the device transcript.
pub fn run(
    scene: &Scene,
    lines: &[Line],
    cfg: &DeviceConfig,
    db: &mut TagDatabase,
) -> Result<Vec<TranscriptEntry>, ScriptError> {
    let tags = scene.tag_placements();
    let rf = RfParams::default();
    let mut device = Device::new(cfg.clone()).map_err(|source| ScriptError::Device { line: 0, source })?;
    let mut in_field: Option<TagUid> = None;
    let mut transcript = Vec::new();

    for Line { line, command } in lines {
        let event = match command {
            Command::Pose(pose) => {
                let read = rfmodel::scan(pose, &tags, &rf);
                let seen = read.map(|r| r.uid);
                let fresh = seen.is_some() && seen != in_field;
                in_field = seen;
                match read {
                    Some(r) if fresh => DeviceEvent::TagRead {
                        uid: r.uid,
                        latency_ms: r.latency_ms.round() as u32,
                    },
                    _ => continue,
                }
            }
            Command::Read { uid, latency_ms } => DeviceEvent::TagRead {
                uid: *uid,
                latency_ms: *latency_ms,
            },
            Command::Button => DeviceEvent::ButtonDown,
            Command::Record(label) => DeviceEvent::label(label.clone()),
            Command::Tick(ms) => DeviceEvent::tick(*ms),
        };
        let entry = device
            .handle(event, db)
            .map_err(|source| ScriptError::Device { line: *line, source })?;
        transcript.push(entry);
    }
    Ok(transcript)
}

/// Renders a transcript as JSON lines.
pub fn to_jsonl(transcript: &[TranscriptEntry]) -> String {
    let mut out = String::new();
    for e in transcript {
        out.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
        out.push('\n');
    }
    out
}

/// The `sim` subcommand: scene file + script file → JSONL transcript file.
pub fn simulate_files(
    scene_path: &Path,
    script_path: &Path,
    out_path: &Path,
    db_dir: Option<&Path>,
    cfg: &DeviceConfig,
) -> anyhow::Result<usize> {
    use anyhow::Context;

    let scene = rfglove_core::scene::load_scene(scene_path)?;
    let text = std::fs::read_to_string(script_path)
        .with_context(|| format!("reading {}", script_path.display()))?;
    let lines = parse(&text).with_context(|| script_path.display().to_string())?;
    let mut db = match db_dir {
        Some(dir) => TagDatabase::open(dir)?,
        None => TagDatabase::new(),
    };
    let transcript = run(&scene, &lines, cfg, &mut db).with_context(|| script_path.display().to_string())?;
    std::fs::write(out_path, to_jsonl(&transcript)).with_context(|| format!("writing {}", out_path.display()))?;
    Ok(transcript.len())
}
