//! The glove's control loop as a deterministic state machine.
//!
//! [`step`] maps `(state, event, db, config)` to a new state and an ordered
//! list of actions. Actions that touch storage (`DeleteBinding`,
//! `StoreBinding`) are applied to the database inside the step, so the
//! returned database always reflects the emitted actions.
//!
//! Transitions, in brief:
//!
//! | state                       | event            | result                                   |
//! |-----------------------------|------------------|------------------------------------------|
//! | Detect                      | read known `u`   | Playback(u), `PlayClip`, last_read = u    |
//! | Detect                      | read unknown `u` | PromptNew(u), `NotifyNewTag`              |
//! | PromptNew(u)                | read `u`         | age reset                                |
//! | PromptNew(u)                | read `v`         | as Detect for `v`                         |
//! | PromptNew(u)                | button           | Recording(u), `StartRecording`            |
//! | Playback(u)                 | read `v != u`    | as Detect for `v` if preemptible          |
//! | Playback(u), Detect + ctx   | button           | `DeleteBinding`, `StartRecording`         |
//! | Recording(u)                | read / button    | ignored                                  |
//! | Recording(u)                | recording input  | input held                               |
//! | Recording(u)                | tick to duration | `StoreBinding`, Detect                    |
//!
//! Ticks age the prompt, the playback and the last-read context; each
//! expires back to Detect (or to no context) once its window is used up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tagdb::{AudioClip, TagDatabase, TagDbError, TagUid};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    pub record_duration_ms: u32,
    pub context_timeout_ms: u32,
    pub playback_preemptible: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            record_duration_ms: 3000,
            context_timeout_ms: 10_000,
            playback_preemptible: true,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if self.record_duration_ms == 0 {
            return Err(StepError::InvalidConfig("record_duration_ms must be positive"));
        }
        Ok(())
    }
}

/// What the user recorded, delivered while the device is recording.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordingInput {
    pub label: String,
    #[serde(with = "hex_bytes", default)]
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Detect,
    PromptNew {
        uid: TagUid,
        age_ms: u32,
    },
    Recording {
        uid: TagUid,
        elapsed_ms: u32,
        input: Option<RecordingInput>,
    },
    Playback {
        uid: TagUid,
        clip: AudioClip,
        elapsed_ms: u32,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Detect => "detect",
            Mode::PromptNew { .. } => "prompt_new",
            Mode::Recording { .. } => "recording",
            Mode::Playback { .. } => "playback",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastRead {
    pub uid: TagUid,
    pub age_ms: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceState {
    #[serde(flatten)]
    pub mode: Mode,
    /// The most recently played tag; the button's replace target while fresh.
    pub last_read: Option<LastRead>,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self {
            mode: Mode::Detect,
            last_read: None,
        }
    }
}

impl DeviceState {
    pub fn is_detect(&self) -> bool {
        self.mode == Mode::Detect
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviceEvent {
    TagRead { uid: TagUid, latency_ms: u32 },
    ButtonDown,
    RecordingInput {
        label: String,
        #[serde(with = "hex_bytes", default)]
        payload: Vec<u8>,
    },
    Tick { dt_ms: u32 },
}

impl DeviceEvent {
    pub fn read(uid: TagUid) -> Self {
        DeviceEvent::TagRead { uid, latency_ms: 0 }
    }

    pub fn tick(dt_ms: u32) -> Self {
        DeviceEvent::Tick { dt_ms }
    }

    pub fn label(label: impl Into<String>) -> Self {
        DeviceEvent::RecordingInput {
            label: label.into(),
            payload: Vec::new(),
        }
    }

    /// Logical time the event consumes: tick length or read latency.
    pub fn duration_ms(&self) -> u32 {
        match self {
            DeviceEvent::TagRead { latency_ms, .. } => *latency_ms,
            DeviceEvent::Tick { dt_ms } => *dt_ms,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviceAction {
    NotifyNewTag { uid: TagUid },
    StartRecording { uid: TagUid },
    StoreBinding { uid: TagUid, clip: AudioClip },
    PlayClip { uid: TagUid, clip: AudioClip },
    DeleteBinding { uid: TagUid },
}

impl DeviceAction {
    pub fn uid(&self) -> TagUid {
        match self {
            DeviceAction::NotifyNewTag { uid }
            | DeviceAction::StartRecording { uid }
            | DeviceAction::StoreBinding { uid, .. }
            | DeviceAction::PlayClip { uid, .. }
            | DeviceAction::DeleteBinding { uid } => *uid,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DeviceAction::NotifyNewTag { .. } => "notify_new_tag",
            DeviceAction::StartRecording { .. } => "start_recording",
            DeviceAction::StoreBinding { .. } => "store_binding",
            DeviceAction::PlayClip { .. } => "play_clip",
            DeviceAction::DeleteBinding { .. } => "delete_binding",
        }
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("invalid device config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid event: {0}")]
    InvalidEvent(&'static str),
    /// A storage action failed. The device falls back to `state`; `actions`
    /// lists what was emitted (and applied) before the failure.
    #[error("storage failure for tag {uid}: {source}")]
    Storage {
        uid: TagUid,
        #[source]
        source: TagDbError,
        state: Box<DeviceState>,
        actions: Vec<DeviceAction>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub state: DeviceState,
    pub actions: Vec<DeviceAction>,
}

pub fn step(
    state: &DeviceState,
    event: &DeviceEvent,
    db: &mut TagDatabase,
    cfg: &DeviceConfig,
) -> Result<Transition, StepError> {
    cfg.validate()?;
    let mut next = state.clone();
    let mut actions = Vec::new();

    match event {
        DeviceEvent::TagRead { uid, .. } => match &state.mode {
            Mode::Recording { .. } => {}
            Mode::Playback { uid: current, .. } if current == uid => {
                next.last_read = Some(LastRead { uid: *uid, age_ms: 0 });
            }
            Mode::Playback { .. } if !cfg.playback_preemptible => {}
            Mode::PromptNew { uid: current, .. } if current == uid => {
                next.mode = Mode::PromptNew { uid: *uid, age_ms: 0 };
            }
            _ => detect_read(&mut next, *uid, db, &mut actions),
        },

        DeviceEvent::ButtonDown => {
            let target = match &state.mode {
                Mode::PromptNew { uid, .. } => Some((*uid, false)),
                Mode::Playback { uid, .. } => Some((*uid, true)),
                Mode::Detect => state.last_read.map(|lr| (lr.uid, true)),
                Mode::Recording { .. } => None,
            };
            if let Some((uid, replace)) = target {
                if replace && db.contains(&uid) {
                    actions.push(DeviceAction::DeleteBinding { uid });
                    if let Err(source) = db.remove(&uid) {
                        return Err(storage_failure(uid, source, actions));
                    }
                }
                actions.push(DeviceAction::StartRecording { uid });
                next.mode = Mode::Recording {
                    uid,
                    elapsed_ms: 0,
                    input: None,
                };
                next.last_read = None;
            }
        }

        DeviceEvent::RecordingInput { label, payload } => match &mut next.mode {
            Mode::Recording { input, .. } => {
                *input = Some(RecordingInput {
                    label: label.clone(),
                    payload: payload.clone(),
                });
            }
            other => {
                tracing::debug!(mode = other.name(), "recording input outside recording ignored");
            }
        },

        DeviceEvent::Tick { dt_ms } => {
            if *dt_ms == 0 {
                return Err(StepError::InvalidEvent("tick length must be positive"));
            }
            let dt = *dt_ms;
            next.last_read = next.last_read.and_then(|lr| {
                let age_ms = lr.age_ms.saturating_add(dt);
                (age_ms < cfg.context_timeout_ms).then_some(LastRead { age_ms, ..lr })
            });
            let expired = match &mut next.mode {
                Mode::Detect => false,
                Mode::PromptNew { age_ms, .. } => {
                    *age_ms = age_ms.saturating_add(dt);
                    *age_ms >= cfg.context_timeout_ms
                }
                Mode::Playback {
                    clip, elapsed_ms, ..
                } => {
                    *elapsed_ms = elapsed_ms.saturating_add(dt);
                    *elapsed_ms >= clip.duration_ms
                }
                Mode::Recording { elapsed_ms, .. } => {
                    *elapsed_ms = elapsed_ms.saturating_add(dt).min(cfg.record_duration_ms);
                    *elapsed_ms >= cfg.record_duration_ms
                }
            };
            if expired {
                let finished = std::mem::replace(&mut next.mode, Mode::Detect);
                if let Mode::Recording { uid, input, .. } = finished {
                    let RecordingInput { label, payload } = input.unwrap_or_default();
                    let stored = AudioClip::record(uid, label, payload, cfg.record_duration_ms)
                        .and_then(|clip| db.bind(uid, clip.clone()).map(|_| clip));
                    match stored {
                        Ok(clip) => actions.push(DeviceAction::StoreBinding { uid, clip }),
                        Err(source) => return Err(storage_failure(uid, source, actions)),
                    }
                }
            }
        }
    }

    Ok(Transition {
        state: next,
        actions,
    })
}

fn detect_read(next: &mut DeviceState, uid: TagUid, db: &TagDatabase, actions: &mut Vec<DeviceAction>) {
    match db.lookup(&uid) {
        Some(clip) => {
            actions.push(DeviceAction::PlayClip {
                uid,
                clip: clip.clone(),
            });
            next.mode = Mode::Playback {
                uid,
                clip: clip.clone(),
                elapsed_ms: 0,
            };
            next.last_read = Some(LastRead { uid, age_ms: 0 });
        }
        None => {
            actions.push(DeviceAction::NotifyNewTag { uid });
            next.mode = Mode::PromptNew { uid, age_ms: 0 };
        }
    }
}

fn storage_failure(uid: TagUid, source: TagDbError, actions: Vec<DeviceAction>) -> StepError {
    StepError::Storage {
        uid,
        source,
        state: Box::new(DeviceState::default()),
        actions,
    }
}

/// One processed event with the logical time it completed at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t_ms: u64,
    pub event: DeviceEvent,
    pub actions: Vec<DeviceAction>,
}

/// A device instance with its own logical clock.
///
/// The clock advances by each tick's length and each read's latency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Device {
    pub state: DeviceState,
    pub cfg: DeviceConfig,
    pub clock_ms: u64,
}

impl Device {
    pub fn new(cfg: DeviceConfig) -> Result<Self, StepError> {
        cfg.validate()?;
        Ok(Self {
            state: DeviceState::default(),
            cfg,
            clock_ms: 0,
        })
    }

    pub fn handle(&mut self, event: DeviceEvent, db: &mut TagDatabase) -> Result<TranscriptEntry, StepError> {
        match step(&self.state, &event, db, &self.cfg) {
            Ok(t) => {
                self.clock_ms += u64::from(event.duration_ms());
                self.state = t.state;
                Ok(TranscriptEntry {
                    t_ms: self.clock_ms,
                    event,
                    actions: t.actions,
                })
            }
            Err(e) => {
                if let StepError::Storage { state, .. } = &e {
                    self.clock_ms += u64::from(event.duration_ms());
                    self.state = (**state).clone();
                }
                Err(e)
            }
        }
    }
}

/// Replays `events` from a fresh device. Identical inputs give identical
/// transcripts.
pub fn run_script(
    events: &[DeviceEvent],
    cfg: &DeviceConfig,
    mut db: TagDatabase,
) -> Result<(Vec<TranscriptEntry>, TagDatabase), StepError> {
    let mut device = Device::new(cfg.clone())?;
    let mut transcript = Vec::with_capacity(events.len());
    for event in events {
        transcript.push(device.handle(event.clone(), &mut db)?);
    }
    Ok((transcript, db))
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
