//! Independent transition table for the device state machine, written in
//! terms of plain tuples, and an exhaustive sequence checker.

use std::collections::BTreeMap;

use rfglove_core::device::{step, DeviceAction, DeviceConfig, DeviceEvent, DeviceState, Mode};
use rfglove_core::tagdb::{AudioClip, TagDatabase, TagUid};

const KNOWN: &str = "04aa0001";
const UNKNOWN: &str = "04bb0002";
const KNOWN_CLIP_MS: u32 = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sym {
    ReadKnown,
    ReadUnknown,
    Button,
    Tick(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RMode {
    Detect,
    Prompt(&'static str, u32),
    Rec(&'static str, u32),
    Play(&'static str, u32),
}

#[derive(Clone, Debug)]
struct Ref {
    mode: RMode,
    ctx: Option<(&'static str, u32)>,
    /// Bound tags and their clip durations.
    bound: BTreeMap<&'static str, u32>,
}

impl Ref {
    fn new() -> Self {
        Self {
            mode: RMode::Detect,
            ctx: None,
            bound: BTreeMap::from([(KNOWN, KNOWN_CLIP_MS)]),
        }
    }

    fn read(&mut self, u: &'static str, cfg: &DeviceConfig, out: &mut Vec<String>) {
        match self.mode {
            RMode::Rec(..) => {}
            RMode::Play(cur, _) if cur == u => self.ctx = Some((u, 0)),
            RMode::Play(..) if !cfg.playback_preemptible => {}
            RMode::Prompt(cur, _) if cur == u => self.mode = RMode::Prompt(u, 0),
            _ => {
                if self.bound.contains_key(u) {
                    out.push(format!("play {u}"));
                    self.mode = RMode::Play(u, 0);
                    self.ctx = Some((u, 0));
                } else {
                    out.push(format!("notify {u}"));
                    self.mode = RMode::Prompt(u, 0);
                }
            }
        }
    }

    fn button(&mut self, out: &mut Vec<String>) {
        let target = match self.mode {
            RMode::Prompt(u, _) => Some(u),
            RMode::Play(u, _) => Some(u),
            RMode::Detect => self.ctx.map(|(u, _)| u),
            RMode::Rec(..) => None,
        };
        if let Some(u) = target {
            if self.bound.remove(u).is_some() {
                out.push(format!("delete {u}"));
            }
            out.push(format!("start {u}"));
            self.mode = RMode::Rec(u, 0);
            self.ctx = None;
        }
    }

    fn tick(&mut self, dt: u32, cfg: &DeviceConfig, out: &mut Vec<String>) {
        self.ctx = self
            .ctx
            .map(|(u, a)| (u, a + dt))
            .filter(|&(_, a)| a < cfg.context_timeout_ms);
        self.mode = match self.mode {
            RMode::Detect => RMode::Detect,
            RMode::Prompt(_, a) if a + dt >= cfg.context_timeout_ms => RMode::Detect,
            RMode::Prompt(u, a) => RMode::Prompt(u, a + dt),
            RMode::Play(u, e) if e + dt >= self.bound.get(u).copied().unwrap_or(0) => RMode::Detect,
            RMode::Play(u, e) => RMode::Play(u, e + dt),
            RMode::Rec(u, e) if e + dt >= cfg.record_duration_ms => {
                out.push(format!("store {u}"));
                self.bound.insert(u, cfg.record_duration_ms);
                RMode::Detect
            }
            RMode::Rec(u, e) => RMode::Rec(u, e + dt),
        };
    }

    fn apply(&mut self, s: Sym, cfg: &DeviceConfig) -> Vec<String> {
        let mut out = Vec::new();
        match s {
            Sym::ReadKnown => self.read(KNOWN, cfg, &mut out),
            Sym::ReadUnknown => self.read(UNKNOWN, cfg, &mut out),
            Sym::Button => self.button(&mut out),
            Sym::Tick(dt) => self.tick(dt, cfg, &mut out),
        }
        out
    }
}

fn uid(s: &str) -> TagUid {
    s.parse().unwrap()
}

fn name(u: TagUid) -> &'static str {
    if u == uid(KNOWN) {
        KNOWN
    } else {
        UNKNOWN
    }
}

fn project_action(a: &DeviceAction) -> String {
    let verb = match a.kind() {
        "play_clip" => "play",
        "notify_new_tag" => "notify",
        "delete_binding" => "delete",
        "start_recording" => "start",
        "store_binding" => "store",
        other => panic!("unexpected action {other}"),
    };
    format!("{verb} {}", name(a.uid()))
}

fn project_state(s: &DeviceState) -> (RMode, Option<(&'static str, u32)>) {
    let mode = match &s.mode {
        Mode::Detect => RMode::Detect,
        Mode::PromptNew { uid, age_ms } => RMode::Prompt(name(*uid), *age_ms),
        Mode::Recording { uid, elapsed_ms, .. } => RMode::Rec(name(*uid), *elapsed_ms),
        Mode::Playback { uid, elapsed_ms, .. } => RMode::Play(name(*uid), *elapsed_ms),
    };
    (mode, s.last_read.map(|lr| (name(lr.uid), lr.age_ms)))
}

fn event(s: Sym) -> DeviceEvent {
    match s {
        Sym::ReadKnown => DeviceEvent::read(uid(KNOWN)),
        Sym::ReadUnknown => DeviceEvent::read(uid(UNKNOWN)),
        Sym::Button => DeviceEvent::ButtonDown,
        Sym::Tick(dt) => DeviceEvent::tick(dt),
    }
}

fn seed_db() -> TagDatabase {
    let mut db = TagDatabase::new();
    let clip = AudioClip::record(uid(KNOWN), "cup", b"pcm".to_vec(), KNOWN_CLIP_MS).unwrap();
    db.bind(uid(KNOWN), clip).unwrap();
    db
}

/// Runs every sequence up to `max_len`; returns (sequences checked, divergences).
pub fn divergences(alphabet: &[Sym], max_len: usize, cfg: &DeviceConfig) -> (usize, usize) {
    let mut checked = 0;
    let mut bad = 0;
    let mut frontier: Vec<Vec<Sym>> = vec![vec![]];
    for _ in 0..=max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            checked += 1;
            if !agrees(seq, cfg) {
                bad += 1;
                if bad <= 5 {
                    eprintln!("divergence on {seq:?}");
                }
            }
            for &s in alphabet {
                let mut longer = seq.clone();
                longer.push(s);
                next.push(longer);
            }
        }
        frontier = next;
    }
    (checked, bad)
}

fn agrees(seq: &[Sym], cfg: &DeviceConfig) -> bool {
    let mut reference = Ref::new();
    let mut state = DeviceState::default();
    let mut db = seed_db();
    for &s in seq {
        let want = reference.apply(s, cfg);
        let t = step(&state, &event(s), &mut db, cfg).unwrap();
        let got: Vec<String> = t.actions.iter().map(project_action).collect();
        if got != want || project_state(&t.state) != (reference.mode, reference.ctx) {
            return false;
        }
        let bound: Vec<&str> = reference.bound.keys().copied().collect();
        let stored: Vec<&str> = db.iter().map(|(u, _)| name(*u)).collect();
        if bound != stored {
            return false;
        }
        state = t.state;
    }
    true
}
