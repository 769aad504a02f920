//! Onboard tag database: a map from ISO 14443A UIDs to recorded clips.
//!
//! An in-memory [`TagDatabase`] can be attached to a storage directory, in
//! which case every `bind`/`remove` is written through immediately. The
//! directory layout is:
//!
//! ```text
//! <dir>/index.tsv          one line per binding, sorted by uid:
//!                          <uid-hex>\t<clip_id>\t<duration_ms>\t<label>\n
//! <dir>/<clip_id>.bin      raw payload bytes, one file per bound clip
//! ```
//!
//! The index is UTF-8 with LF line endings and no header. A payload file
//! exists for a clip exactly as long as some uid is bound to it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const INDEX_FILE: &str = "index.tsv";
pub const PAYLOAD_EXT: &str = "bin";

#[derive(Debug, Error)]
pub enum TagDbError {
    #[error("invalid tag uid {0:?}: expected 4 or 7 bytes of lowercase hex")]
    InvalidUid(String),
    #[error("invalid clip id {0:?}: expected 16 lowercase hex characters")]
    InvalidClipId(String),
    #[error("clip duration must be positive")]
    ZeroDuration,
    #[error("clip label must not contain tabs or line breaks")]
    InvalidLabel,
    #[error("clip {clip_id} is already bound to tag {uid}")]
    DuplicateClip { clip_id: ClipId, uid: TagUid },
    #[error("{INDEX_FILE} line {line}: {reason}")]
    MalformedIndex { line: usize, reason: String },
    #[error("payload for clip {clip_id} is missing")]
    MissingPayload { clip_id: ClipId },
    #[error("storage error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = TagDbError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TagDbError + '_ {
    move |source| TagDbError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// ISO 14443A tag identifier (single or double size, 4 or 7 bytes).
///
/// Ordering is bytewise, which coincides with the ordering of the canonical
/// lowercase hex form.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TagUid {
    bytes: [u8; 7],
    len: u8,
}

impl TagUid {
    pub fn new(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 4 && bytes.len() != 7 {
            return Err(TagDbError::InvalidUid(hex::encode(bytes)));
        }
        let mut buf = [0u8; 7];
        buf[..bytes.len()].copy_from_slice(bytes);
        Ok(Self {
            bytes: buf,
            len: bytes.len() as u8,
        })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }
}

impl FromStr for TagUid {
    type Err = TagDbError;

    /// Accepts only the canonical form: lowercase hex, no separators.
    fn from_str(s: &str) -> Result<Self> {
        let canonical = (s.len() == 8 || s.len() == 14)
            && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !canonical {
            return Err(TagDbError::InvalidUid(s.to_owned()));
        }
        let bytes = hex::decode(s).map_err(|_| TagDbError::InvalidUid(s.to_owned()))?;
        Self::new(&bytes)
    }
}

impl Ord for TagUid {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_bytes().cmp(other.as_bytes())
    }
}

impl PartialOrd for TagUid {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TagUid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for TagUid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TagUid({self})")
    }
}

impl Serialize for TagUid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for TagUid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 16 lowercase hex characters naming a clip and its payload file.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ClipId(String);

impl ClipId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn file_name(&self) -> String {
        format!("{}.{PAYLOAD_EXT}", self.0)
    }
}

impl FromStr for ClipId {
    type Err = TagDbError;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() == 16 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            Ok(Self(s.to_owned()))
        } else {
            Err(TagDbError::InvalidClipId(s.to_owned()))
        }
    }
}

impl<'de> Deserialize<'de> for ClipId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClipId({})", self.0)
    }
}

/// A recorded message. `label` stands in for the spoken content; `payload`
/// carries whatever bytes an audio backend produced (empty in simulation).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AudioClip {
    pub clip_id: ClipId,
    pub duration_ms: u32,
    pub label: String,
    #[serde(with = "hex_payload")]
    pub payload: Vec<u8>,
}

impl AudioClip {
    /// Builds a clip recorded for `uid`, deriving its content-addressed id.
    ///
    /// The uid is hashed along with label and payload so that two tags given
    /// the same spoken label still get distinct clips and payload files.
    pub fn record(
        uid: TagUid,
        label: impl Into<String>,
        payload: Vec<u8>,
        duration_ms: u32,
    ) -> Result<Self> {
        let label = label.into();
        let clip = Self {
            clip_id: content_id(uid, &label, &payload),
            duration_ms,
            label,
            payload,
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_ms == 0 {
            return Err(TagDbError::ZeroDuration);
        }
        if !label_is_valid(&self.label) {
            return Err(TagDbError::InvalidLabel);
        }
        Ok(())
    }
}

fn label_is_valid(label: &str) -> bool {
    !label.contains(['\t', '\n', '\r'])
}

fn content_id(uid: TagUid, label: &str, payload: &[u8]) -> ClipId {
    let mut h = Sha256::new();
    h.update([uid.len]);
    h.update(uid.as_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(payload);
    let digest = h.finalize();
    ClipId(hex::encode(&digest[..8]))
}

mod hex_payload {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Binding {
    pub uid: TagUid,
    pub clip: AudioClip,
}

/// Tag → clip map, optionally written through to a storage directory.
///
/// Lookups take `&self`; mutation takes `&mut self`, so callers serialize
/// writers themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagDatabase {
    bindings: BTreeMap<TagUid, AudioClip>,
    store_path: Option<PathBuf>,
}

impl TagDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens the database stored in `dir`, creating an empty one if the
    /// directory holds no index yet.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if dir.join(INDEX_FILE).exists() {
            return Self::load(dir);
        }
        let mut db = Self::new();
        db.attach(dir)?;
        Ok(db)
    }

    /// Persists the current bindings into `dir` and writes through to it from
    /// now on.
    pub fn attach(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.persist(dir)?;
        self.store_path = Some(dir.to_path_buf());
        Ok(())
    }

    /// Drops the storage attachment; later mutations stay in memory.
    pub fn detach(&mut self) -> Option<PathBuf> {
        self.store_path.take()
    }

    pub fn store_path(&self) -> Option<&Path> {
        self.store_path.as_deref()
    }

    pub fn lookup(&self, uid: &TagUid) -> Option<&AudioClip> {
        self.bindings.get(uid)
    }

    pub fn contains(&self, uid: &TagUid) -> bool {
        self.bindings.contains_key(uid)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Bindings in ascending uid order.
    pub fn iter(&self) -> impl Iterator<Item = (&TagUid, &AudioClip)> {
        self.bindings.iter()
    }

    pub fn bindings(&self) -> Vec<Binding> {
        self.iter()
            .map(|(uid, clip)| Binding {
                uid: *uid,
                clip: clip.clone(),
            })
            .collect()
    }

    /// Binds `clip` to `uid`, replacing (and deleting) any previous clip.
    /// Returns the replaced clip. On error the database is unchanged.
    pub fn bind(&mut self, uid: TagUid, clip: AudioClip) -> Result<Option<AudioClip>> {
        clip.validate()?;
        if let Some((other, _)) = self
            .bindings
            .iter()
            .find(|(u, c)| **u != uid && c.clip_id == clip.clip_id)
        {
            return Err(TagDbError::DuplicateClip {
                clip_id: clip.clip_id,
                uid: *other,
            });
        }
        let old_id = self.bindings.get(&uid).map(|c| c.clip_id.clone());

        if let Some(dir) = &self.store_path {
            let payload_path = dir.join(clip.clip_id.file_name());
            write_atomic(&payload_path, &clip.payload)?;
            let index = render_index(
                self.bindings
                    .iter()
                    .filter(|(u, _)| **u != uid)
                    .chain(std::iter::once((&uid, &clip)))
                    .collect::<BTreeMap<_, _>>(),
            );
            if let Err(e) = write_atomic(&dir.join(INDEX_FILE), &index) {
                if old_id.as_ref() != Some(&clip.clip_id) {
                    let _ = fs::remove_file(&payload_path);
                }
                return Err(e);
            }
            if let Some(old) = old_id.as_ref().filter(|id| **id != clip.clip_id) {
                remove_payload(dir, old);
            }
        }
        Ok(self.bindings.insert(uid, clip))
    }

    /// Removes the binding for `uid` and its payload. Absent uids are a no-op.
    pub fn remove(&mut self, uid: &TagUid) -> Result<Option<AudioClip>> {
        let Some(old) = self.bindings.get(uid) else {
            return Ok(None);
        };
        if let Some(dir) = &self.store_path {
            let index = render_index(self.bindings.iter().filter(|(u, _)| *u != uid));
            write_atomic(&dir.join(INDEX_FILE), &index)?;
            remove_payload(dir, &old.clip_id);
        }
        Ok(self.bindings.remove(uid))
    }

    /// The exact bytes of `index.tsv` for the current binding set.
    pub fn index_bytes(&self) -> Vec<u8> {
        render_index(self.bindings.iter())
    }

    /// Writes the full database into `dir`: every payload, the index, and
    /// removal of any payload file no binding refers to.
    pub fn persist(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for clip in self.bindings.values() {
            write_atomic(&dir.join(clip.clip_id.file_name()), &clip.payload)?;
        }
        write_atomic(&dir.join(INDEX_FILE), &self.index_bytes())?;
        let live: BTreeSet<String> = self
            .bindings
            .values()
            .map(|c| c.clip_id.file_name())
            .collect();
        for name in payload_files(dir)? {
            if !live.contains(&name) {
                let path = dir.join(&name);
                fs::remove_file(&path).map_err(io_err(&path))?;
            }
        }
        Ok(())
    }

    /// Loads the database stored in `dir` and attaches to it.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index_path = dir.join(INDEX_FILE);
        let text = fs::read(&index_path).map_err(io_err(&index_path))?;
        let text = String::from_utf8(text).map_err(|e| {
            let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
                .iter()
                .filter(|b| **b == b'\n')
                .count();
            TagDbError::MalformedIndex {
                line,
                reason: "not valid UTF-8".into(),
            }
        })?;

        let mut bindings = BTreeMap::new();
        let mut seen_clips = BTreeSet::new();
        for (line, entry) in parse_index(&text) {
            let (uid, clip_id, duration_ms, label) = entry?;
            let malformed = |reason: String| TagDbError::MalformedIndex { line, reason };
            if !seen_clips.insert(clip_id.clone()) {
                return Err(malformed(format!("clip {clip_id} appears twice")));
            }
            let payload_path = dir.join(clip_id.file_name());
            let payload = match fs::read(&payload_path) {
                Ok(bytes) => bytes,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Err(TagDbError::MissingPayload { clip_id })
                }
                Err(e) => return Err(io_err(&payload_path)(e)),
            };
            let clip = AudioClip {
                clip_id,
                duration_ms,
                label,
                payload,
            };
            if bindings.insert(uid, clip).is_some() {
                return Err(malformed(format!("tag {uid} appears twice")));
            }
        }
        Ok(Self {
            bindings,
            store_path: Some(dir.to_path_buf()),
        })
    }
}

type IndexEntry = Result<(TagUid, ClipId, u32, String)>;

/// Yields `(1-based line number, parsed entry)` for each index line.
fn parse_index(text: &str) -> impl Iterator<Item = (usize, IndexEntry)> + '_ {
    let body = text.strip_suffix('\n');
    let missing_newline = !text.is_empty() && body.is_none();
    let lines: Vec<&str> = match body {
        Some(b) => b.split('\n').collect(),
        None if text.is_empty() => Vec::new(),
        None => text.split('\n').collect(),
    };
    let last = lines.len();
    lines.into_iter().enumerate().map(move |(i, raw)| {
        let line = i + 1;
        let malformed = |reason: &str| TagDbError::MalformedIndex {
            line,
            reason: reason.to_owned(),
        };
        if missing_newline && line == last {
            return (line, Err(malformed("missing trailing newline")));
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            return (
                line,
                Err(TagDbError::MalformedIndex {
                    line,
                    reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
                }),
            );
        }
        let entry = (|| {
            let uid: TagUid = fields[0].parse().map_err(|_| malformed("bad tag uid"))?;
            let clip_id: ClipId = fields[1].parse().map_err(|_| malformed("bad clip id"))?;
            let d = fields[2];
            let canonical = !d.is_empty() && !d.starts_with('0') && d.bytes().all(|b| b.is_ascii_digit());
            let duration_ms: u32 = canonical
                .then(|| d.parse().ok())
                .flatten()
                .ok_or_else(|| malformed("duration must be a positive integer"))?;
            if fields[3].contains('\r') {
                return Err(malformed("label contains a carriage return"));
            }
            Ok((uid, clip_id, duration_ms, fields[3].to_owned()))
        })();
        (line, entry)
    })
}

fn render_index<'a, I>(bindings: I) -> Vec<u8>
where
    I: IntoIterator<Item = (&'a TagUid, &'a AudioClip)>,
{
    let mut out = Vec::new();
    for (uid, clip) in bindings {
        // Writing into a Vec cannot fail.
        let _ = writeln!(
            out,
            "{uid}\t{}\t{}\t{}",
            clip.clip_id, clip.duration_ms, clip.label
        );
    }
    out
}

fn payload_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if Path::new(&name).extension().is_some_and(|e| e == PAYLOAD_EXT) {
            names.push(name);
        }
    }
    Ok(names)
}

/// Clip ids of every payload file currently in `dir`, sorted.
pub fn stored_clip_ids(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut ids: Vec<String> = payload_files(dir.as_ref())?
        .into_iter()
        .map(|n| n.trim_end_matches(&format!(".{PAYLOAD_EXT}")).to_owned())
        .collect();
    ids.sort();
    Ok(ids)
}

fn remove_payload(dir: &Path, id: &ClipId) {
    let path = dir.join(id.file_name());
    if let Err(e) = fs::remove_file(&path) {
        if e.kind() != io::ErrorKind::NotFound {
            tracing::warn!(path = %path.display(), error = %e, "failed to delete replaced payload");
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path)(e)
    })
}
