//! Seeded synthetic participant that runs the four trials through the
//! device state machine.
//!
//! This is a synthetic-data generator for exercising the scoring and
//! statistics pipeline end to end. Its timing and error model is simple:
//!
//! - identify-and-record attempts take `t_inf + (t0 − t_inf)·exp(−λ(i−1))`
//!   seconds on average, with normal noise truncated to positive values;
//! - each disk placement takes `move_time_s` on average (same noise model)
//!   and lands in a wrong hole with probability `p_error`;
//! - walking between table regions takes `walk_step_s` per region.
//!
//! Every tag interaction is a real [`device`](crate::device) step: the hand
//! is posed over the tag, the RF model produces the read, and the participant
//! reacts to what the device plays back.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Device, DeviceAction, DeviceConfig, DeviceEvent, StepError, TranscriptEntry};
use crate::rfmodel::{self, HandPose, RfParams, TagPlacement};
use crate::scene::{self, build_setup, matching_key, Scene, SceneError};
use crate::tagdb::{TagDatabase, TagUid};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("test id must be 1..=4, got {0}")]
    UnknownTest(u8),
    #[error("invalid agent parameters: {0}")]
    InvalidParams(String),
    #[error("scene does not fit test {test_id}: {reason}")]
    SceneMismatch { test_id: u8, reason: String },
    #[error("tag {0} could not be read from its own position")]
    Unreadable(TagUid),
    #[error(transparent)]
    Device(#[from] StepError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentParams {
    /// Mean time of the first identify-and-record attempt.
    pub t0_s: f64,
    /// Plateau mean time after many attempts.
    pub t_inf_s: f64,
    /// Exponential learning rate per attempt.
    pub learn_rate: f64,
    pub time_sd_s: f64,
    /// Per-placement error probability (per-attempt failure in test 1).
    pub p_error: f64,
    pub move_time_s: f64,
    pub move_time_sd_s: f64,
    pub walk_step_s: f64,
    pub walk_step_sd_s: f64,
    /// Whether the participant wears the glove (only test 3 runs without).
    pub glove: bool,
    pub seed: u64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            t0_s: 70.17,
            t_inf_s: 27.87,
            learn_rate: 0.35,
            time_sd_s: 8.0,
            p_error: 0.05,
            // 114.0 s ± 16.64 s over nine placements.
            move_time_s: 114.0 / 9.0,
            move_time_sd_s: 16.64 / 3.0,
            walk_step_s: 6.0,
            walk_step_sd_s: 2.0,
            glove: true,
            seed: 0,
        }
    }
}

impl AgentParams {
    /// Tactile-only condition of the shape-box trial: 249.0 s ± 99.45 s over
    /// nine placements and 2.4 errors on average.
    pub fn without_glove() -> Self {
        Self {
            p_error: 2.4 / 9.0,
            move_time_s: 249.0 / 9.0,
            move_time_sd_s: 99.45 / 3.0,
            glove: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidParams(m.to_owned()));
        if !(self.t_inf_s > 0.0 && self.t0_s >= self.t_inf_s) {
            return bad("need t0_s >= t_inf_s > 0");
        }
        if !(0.0..=1.0).contains(&self.p_error) {
            return bad("p_error must be within [0, 1]");
        }
        if !(self.learn_rate >= 0.0) {
            return bad("learn_rate must be non-negative");
        }
        if !(self.move_time_s > 0.0 && self.walk_step_s > 0.0) {
            return bad("move_time_s and walk_step_s must be positive");
        }
        if !(self.time_sd_s >= 0.0 && self.move_time_sd_s >= 0.0 && self.walk_step_sd_s >= 0.0) {
            return bad("standard deviations must be non-negative");
        }
        Ok(())
    }

    /// Mean time of identify-and-record attempt `attempt` (1-based).
    pub fn attempt_mean_s(&self, attempt: u32) -> f64 {
        self.t_inf_s + (self.t0_s - self.t_inf_s) * (-self.learn_rate * f64::from(attempt - 1)).exp()
    }
}

/// A disk dropped into a hole.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub object_id: String,
    pub target_id: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTranscript {
    pub test_id: u8,
    pub participant_id: u32,
    pub seed: u64,
    /// Every device step, caregiver preparation first.
    pub events: Vec<TranscriptEntry>,
    /// How many leading entries of `events` are caregiver preparation.
    pub setup_events: usize,
    pub per_attempt_times_s: Vec<f64>,
    pub errors: u32,
    pub completed: bool,
    /// Test-specific measurements (`done`/`attempted`, `c`/`e`/`t_s`,
    /// `n1`/`n2`/`t1_s`/`tT_s`).
    pub aux: BTreeMap<String, f64>,
    pub placements: Vec<Placement>,
}

/// Per-trial summary without the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub test_id: u8,
    pub participant_id: u32,
    pub seed: u64,
    pub event_count: usize,
    pub per_attempt_times_s: Vec<f64>,
    pub errors: u32,
    pub completed: bool,
    pub aux: BTreeMap<String, f64>,
}

impl TrialTranscript {
    pub fn summary(&self) -> TrialSummary {
        TrialSummary {
            test_id: self.test_id,
            participant_id: self.participant_id,
            seed: self.seed,
            event_count: self.events.len(),
            per_attempt_times_s: self.per_attempt_times_s.clone(),
            errors: self.errors,
            completed: self.completed,
            aux: self.aux.clone(),
        }
    }

    /// One JSON object per line, one line per device step.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn aux(&self, key: &str) -> Option<f64> {
        self.aux.get(key).copied()
    }
}

const HOVER_OFFSET_MM: f64 = 20.0;
const HOVER_MAX_TILT_DEG: f64 = 20.0;

struct Run {
    device: Device,
    db: TagDatabase,
    scene: Scene,
    out_of_reach: Vec<TagUid>,
    rf: RfParams,
    rng: ChaCha8Rng,
    events: Vec<TranscriptEntry>,
}

impl Run {
    fn new(scene: &Scene, cfg: &DeviceConfig, seed: u64) -> Result<Self, AgentError> {
        Ok(Self {
            device: Device::new(cfg.clone())?,
            db: TagDatabase::new(),
            scene: scene.clone(),
            out_of_reach: Vec::new(),
            rf: RfParams::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            events: Vec::new(),
        })
    }

    fn now_ms(&self) -> u64 {
        self.device.clock_ms
    }

    fn feed(&mut self, event: DeviceEvent) -> Result<Vec<DeviceAction>, AgentError> {
        let entry = self.device.handle(event, &mut self.db)?;
        let actions = entry.actions.clone();
        self.events.push(entry);
        Ok(actions)
    }

    fn idle(&mut self, mut ms: u64) -> Result<(), AgentError> {
        while ms > 0 {
            let dt = ms.min(u64::from(u32::MAX)) as u32;
            self.feed(DeviceEvent::tick(dt))?;
            ms -= u64::from(dt);
        }
        Ok(())
    }

    fn sample_time_ms(&mut self, mean_s: f64, sd_s: f64) -> u64 {
        (truncated_normal(&mut self.rng, mean_s, sd_s) * 1000.0).round().max(1.0) as u64
    }

    fn tags(&self) -> Vec<TagPlacement> {
        self.scene
            .tag_placements()
            .into_iter()
            .filter(|t| !self.out_of_reach.contains(&t.uid))
            .collect()
    }

    /// Computes the read for a hand hovering over `(x, y)` without feeding it.
    fn aim(&mut self, x: f64, y: f64, expect: TagUid) -> Result<DeviceEvent, AgentError> {
        let tilt = self.rng.random_range(-HOVER_MAX_TILT_DEG..=HOVER_MAX_TILT_DEG);
        let pose = HandPose::new(x, y - HOVER_OFFSET_MM, 90.0 + tilt);
        match rfmodel::scan(&pose, &self.tags(), &self.rf) {
            Some(r) if r.uid == expect => Ok(DeviceEvent::TagRead {
                uid: r.uid,
                latency_ms: r.latency_ms.round() as u32,
            }),
            _ => Err(AgentError::Unreadable(expect)),
        }
    }

    /// Hovers over a tag and listens to the whole playback; returns the label.
    fn scan_and_listen(&mut self, x: f64, y: f64, uid: TagUid) -> Result<Option<String>, AgentError> {
        let read = self.aim(x, y, uid)?;
        let actions = self.feed(read)?;
        let heard = actions.iter().find_map(|a| match a {
            DeviceAction::PlayClip { clip, .. } => Some(clip.clone()),
            _ => None,
        });
        if let Some(clip) = &heard {
            self.idle(u64::from(clip.duration_ms))?;
        }
        Ok(heard.map(|c| c.label))
    }

    /// Caregiver pass: scan each tag once and record its label.
    fn prepare(&mut self, labels: &[(f64, f64, TagUid, String)]) -> Result<(), AgentError> {
        let record_ms = u64::from(self.device.cfg.record_duration_ms);
        for (x, y, uid, label) in labels {
            let read = self.aim(*x, *y, *uid)?;
            self.feed(read)?;
            self.feed(DeviceEvent::ButtonDown)?;
            self.feed(DeviceEvent::label(label.clone()))?;
            self.idle(record_ms)?;
        }
        Ok(())
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, sd).expect("finite, non-negative sd");
    loop {
        let v = normal.sample(rng);
        if v > 0.0 {
            return v;
        }
    }
}

fn seconds(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// Seed for participant `participant_id` of a cohort seeded with `seed`.
pub fn participant_seed(seed: u64, participant_id: u32) -> u64 {
    // splitmix64 finalizer over the pair.
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(u64::from(participant_id) + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one participant through test `test_id` on `scene`.
pub fn run_test(
    test_id: u8,
    params: &AgentParams,
    scene: &Scene,
    cfg: &DeviceConfig,
) -> Result<TrialTranscript, AgentError> {
    params.validate()?;
    check_scene(test_id, scene)?;
    let mut run = Run::new(scene, cfg, params.seed)?;
    let mut t = TrialTranscript {
        test_id,
        participant_id: 0,
        seed: params.seed,
        events: Vec::new(),
        setup_events: 0,
        per_attempt_times_s: Vec::new(),
        errors: 0,
        completed: false,
        aux: BTreeMap::new(),
        placements: Vec::new(),
    };
    match test_id {
        1 => identify_objects(&mut run, params, &mut t)?,
        2 => place_disks(&mut run, &AgentParams { p_error: 0.0, ..params.clone() }, &mut t)?,
        3 => place_disks(&mut run, params, &mut t)?,
        4 => relocate_object(&mut run, params, &mut t)?,
        other => return Err(AgentError::UnknownTest(other)),
    }
    t.events = run.events;
    Ok(t)
}

/// Runs `n` participants, each on a freshly built setup with its own seed.
pub fn run_cohort(
    test_id: u8,
    n: u32,
    params: &AgentParams,
    cfg: &DeviceConfig,
    seed: u64,
) -> Result<Vec<TrialTranscript>, AgentError> {
    if n == 0 {
        return Err(AgentError::InvalidParams("cohort needs at least one participant".into()));
    }
    if !(1..=4).contains(&test_id) {
        return Err(AgentError::UnknownTest(test_id));
    }
    (0..n)
        .into_par_iter()
        .map(|pid| {
            let p = AgentParams {
                seed: participant_seed(seed, pid),
                ..params.clone()
            };
            let scene = build_setup(test_id, p.seed)?;
            let mut t = run_test(test_id, &p, &scene, cfg)?;
            t.participant_id = pid;
            Ok(t)
        })
        .collect()
}

fn check_scene(test_id: u8, scene: &Scene) -> Result<(), AgentError> {
    let mismatch = |reason: &str| {
        Err(AgentError::SceneMismatch {
            test_id,
            reason: reason.to_owned(),
        })
    };
    scene.validate()?;
    let holes: Vec<_> = scene.objects.iter().filter(|o| o.is_hole()).collect();
    let disks: Vec<_> = scene.objects.iter().filter(|o| o.is_disk()).collect();
    match test_id {
        1 => {
            if !scene.regions.is_empty() || !holes.is_empty() {
                return mismatch("expected loose objects, found a box or table regions");
            }
            if scene.objects.iter().all(|o| o.tag.is_none()) {
                return mismatch("no tagged objects");
            }
        }
        2 | 3 => {
            let polygon = test_id == 3;
            if !scene.regions.is_empty() || holes.len() != 3 || disks.len() != 9 {
                return mismatch("expected a 3-hole box and 9 disks");
            }
            if holes.iter().chain(&disks).any(|o| o.tag.is_none()) {
                return mismatch("every hole and disk must be tagged");
            }
            if holes.iter().any(|h| (h.shape != "box-hole") != polygon) {
                return mismatch(if polygon {
                    "expected polygon-shaped holes"
                } else {
                    "expected plain colour-coded holes"
                });
            }
            for d in &disks {
                if !holes.iter().any(|h| matching_key(h) == matching_key(d)) {
                    return mismatch("a disk has no matching hole");
                }
            }
        }
        4 => {
            if scene.regions.len() != 8 {
                return mismatch("expected 8 table regions");
            }
            for r in &scene.regions {
                let inside = scene.objects_in_region(r.region_id);
                if !inside.iter().any(|o| o.name == scene::SETUP4_LETTERS[0] && o.tag.is_some()) {
                    return mismatch("every region needs a tagged disk A");
                }
            }
        }
        other => return Err(AgentError::UnknownTest(other)),
    }
    Ok(())
}

fn identify_objects(run: &mut Run, params: &AgentParams, t: &mut TrialTranscript) -> Result<(), AgentError> {
    let mut objects: Vec<_> = run
        .scene
        .objects
        .iter()
        .filter_map(|o| o.tag.map(|uid| (o.x_mm, o.y_mm, uid, o.name.clone())))
        .collect();
    objects.shuffle(&mut run.rng);
    let record_ms = u64::from(run.device.cfg.record_duration_ms);
    let timeout_ms = u64::from(run.device.cfg.context_timeout_ms);

    let mut done = 0u32;
    for (i, (x, y, uid, name)) in objects.iter().enumerate() {
        let start = run.now_ms();
        let target_ms = run.sample_time_ms(params.attempt_mean_s(i as u32 + 1), params.time_sd_s);
        let read = run.aim(*x, *y, *uid)?;
        let overhead = u64::from(read.duration_ms()) + record_ms;
        run.idle(target_ms.saturating_sub(overhead).max(1))?;
        run.feed(read)?;
        if run.rng.random_bool(params.p_error) {
            // Missed the button: the prompt runs out and nothing is stored.
            run.idle(timeout_ms.max(1))?;
            t.errors += 1;
        } else {
            run.feed(DeviceEvent::ButtonDown)?;
            run.feed(DeviceEvent::label(name.clone()))?;
            run.idle(record_ms)?;
            if run.db.lookup(uid).is_some_and(|c| &c.label == name) {
                done += 1;
            }
        }
        t.per_attempt_times_s.push(seconds(run.now_ms() - start));
    }
    let attempted = objects.len() as u32;
    t.completed = done == attempted;
    t.aux.insert("done".into(), f64::from(done));
    t.aux.insert("attempted".into(), f64::from(attempted));
    Ok(())
}

fn hole_label(key: &str) -> String {
    format!("{key} hole")
}

fn place_disks(run: &mut Run, params: &AgentParams, t: &mut TrialTranscript) -> Result<(), AgentError> {
    let holes: Vec<_> = run.scene.objects.iter().filter(|o| o.is_hole()).cloned().collect();
    let mut disks: Vec<_> = run.scene.objects.iter().filter(|o| o.is_disk()).cloned().collect();

    if params.glove {
        let mut labels: Vec<_> = holes
            .iter()
            .map(|h| (h.x_mm, h.y_mm, h.tag.expect("checked"), hole_label(matching_key(h))))
            .collect();
        labels.extend(
            disks
                .iter()
                .map(|d| (d.x_mm, d.y_mm, d.tag.expect("checked"), matching_key(d).to_owned())),
        );
        run.prepare(&labels)?;
        t.setup_events = run.events.len();
    }

    disks.shuffle(&mut run.rng);
    let start = run.now_ms();
    let (mut correct, mut errors) = (0u32, 0u32);
    for disk in &disks {
        let placement_start = run.now_ms();
        let budget_ms = run.sample_time_ms(params.move_time_s, params.move_time_sd_s);
        let right_hole = if params.glove {
            let key = run
                .scan_and_listen(disk.x_mm, disk.y_mm, disk.tag.expect("checked"))?
                .unwrap_or_default();
            let mut order: Vec<usize> = (0..holes.len()).collect();
            order.shuffle(&mut run.rng);
            let mut found = None;
            for h in order {
                let hole = &holes[h];
                let heard = run.scan_and_listen(hole.x_mm, hole.y_mm, hole.tag.expect("checked"))?;
                if heard.as_deref() == Some(hole_label(&key).as_str()) {
                    found = Some(h);
                    break;
                }
            }
            found
        } else {
            holes.iter().position(|h| matching_key(h) == matching_key(disk))
        };
        let wrong = run.rng.random_bool(params.p_error);
        let chosen = match right_hole {
            Some(h) if !wrong => h,
            other => {
                let others: Vec<usize> = (0..holes.len()).filter(|&h| Some(h) != other).collect();
                *others.choose(&mut run.rng).expect("three holes")
            }
        };
        let ok = Some(chosen) == right_hole;
        if ok {
            correct += 1;
        } else {
            errors += 1;
        }
        let hole = &holes[chosen];
        run.scene.move_object(&disk.object_id, hole.x_mm, hole.y_mm)?;
        run.out_of_reach.push(disk.tag.expect("checked"));
        t.placements.push(Placement {
            object_id: disk.object_id.clone(),
            target_id: hole.object_id.clone(),
            correct: ok,
        });
        let spent = run.now_ms() - placement_start;
        if params.glove {
            run.idle(budget_ms.saturating_sub(spent))?;
        } else {
            // No device in the loop; the clock still records the move.
            run.device.clock_ms += budget_ms.saturating_sub(spent);
        }
        t.per_attempt_times_s.push(seconds(run.now_ms() - placement_start));
    }
    let total_s = seconds(run.now_ms() - start);
    t.errors = errors;
    t.completed = correct as usize == disks.len();
    t.aux.insert("c".into(), f64::from(correct));
    t.aux.insert("e".into(), f64::from(errors));
    t.aux.insert("t_s".into(), total_s);
    Ok(())
}

fn region_label(id: u8) -> String {
    format!("region {id}")
}

fn relocate_object(run: &mut Run, params: &AgentParams, t: &mut TrialTranscript) -> Result<(), AgentError> {
    let ring: Vec<(u8, f64, f64, TagUid)> = run
        .scene
        .regions_ccw()
        .into_iter()
        .map(|r| {
            let (x, y) = r.tag_position();
            (r.region_id, x, y, r.tag)
        })
        .collect();
    let mut labels: Vec<_> = ring.iter().map(|&(id, x, y, uid)| (x, y, uid, region_label(id))).collect();
    labels.extend(
        run.scene
            .objects
            .iter()
            .filter_map(|o| o.tag.map(|uid| (o.x_mm, o.y_mm, uid, o.name.clone()))),
    );
    run.prepare(&labels)?;
    t.setup_events = run.events.len();

    let n = ring.len();
    let origin = run.rng.random_range(0..n);
    let destination = (origin + run.rng.random_range(1..n)) % n;
    let mut pos = run.rng.random_range(0..n);
    let start = run.now_ms();

    // Walk counterclockwise until `want` is announced; returns scans made.
    let walk = |run: &mut Run, pos: &mut usize, want: usize| -> Result<u32, AgentError> {
        let mut scans = 0;
        loop {
            let step_ms = run.sample_time_ms(params.walk_step_s, params.walk_step_sd_s);
            run.idle(step_ms)?;
            let (id, x, y, uid) = ring[*pos];
            let heard = run.scan_and_listen(x, y, uid)?;
            scans += 1;
            if heard.as_deref() == Some(region_label(ring[want].0).as_str()) && id == ring[want].0 {
                return Ok(scans);
            }
            *pos = (*pos + 1) % n;
        }
    };

    let n1 = walk(run, &mut pos, origin)?;
    let mut candidates: Vec<_> = run
        .scene
        .objects_in_region(ring[origin].0)
        .into_iter()
        .filter_map(|o| o.tag.map(|uid| (o.object_id.clone(), o.x_mm, o.y_mm, uid)))
        .collect();
    candidates.shuffle(&mut run.rng);
    let mut target = None;
    for (object_id, x, y, uid) in candidates {
        let step_ms = run.sample_time_ms(params.walk_step_s / 2.0, params.walk_step_sd_s / 2.0);
        run.idle(step_ms)?;
        if run.scan_and_listen(x, y, uid)?.as_deref() == Some(scene::SETUP4_LETTERS[0]) {
            target = Some((object_id, uid));
            break;
        }
    }
    let (object_id, uid) = target.ok_or_else(|| AgentError::SceneMismatch {
        test_id: 4,
        reason: format!("object A not found in region {}", ring[origin].0),
    })?;
    let t1_ms = run.now_ms() - start;

    pos = (pos + 1) % n;
    let n2 = walk(run, &mut pos, destination)?;
    let dest = run.scene.region(ring[destination].0).expect("ring region").bounds;
    let (cx, cy) = dest.center();
    run.scene.move_object(&object_id, cx + 150.0, cy + 150.0)?;
    run.out_of_reach.push(uid);
    let total_ms = run.now_ms() - start;

    t.placements.push(Placement {
        object_id,
        target_id: format!("region-{}", ring[destination].0),
        correct: true,
    });
    t.per_attempt_times_s.push(seconds(total_ms));
    t.completed = true;
    t.aux.insert("n1".into(), f64::from(n1));
    t.aux.insert("n2".into(), f64::from(n2));
    t.aux.insert("t1_s".into(), seconds(t1_ms));
    t.aux.insert("tT_s".into(), seconds(total_ms));
    Ok(())
}
