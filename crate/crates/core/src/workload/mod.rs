//! Tasks, operations and similarity detection.
//!
//! A [`TranscodeTask`] applies one [`Operation`] to one video segment. Two
//! tasks are mergeable when they share the segment; how much they share
//! beyond that is captured by [`SimilarityLevel`]. Arriving tasks are matched
//! against open merge groups through three hash tables, one per level, so
//! detection costs a constant number of lookups per task.

mod file;
mod operation;
mod signature;

use std::sync::Arc;

pub use file::{parse_workload, read_workload, write_workload};
pub use operation::{Codec, OpKind, Operation, BITRATES_KBPS, FRAMERATES_FPS, RESOLUTIONS};
pub use signature::{GroupId, MergeGroup, SignatureTables};

use crate::error::{Error, Result};

/// Maximum degree of merging.
pub const MAX_MERGE_DEGREE: usize = 5;

/// Longest allowed segment, in seconds.
pub const MAX_SEGMENT_SECONDS: f64 = 2.0;

/// Static description of one video segment.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    segment_id: String,
    duration_s: f64,
    size_kb: f64,
    framerate: f64,
    width: u32,
    height: u32,
}

impl VideoMeta {
    pub fn new(
        segment_id: impl Into<String>,
        duration_s: f64,
        size_kb: f64,
        framerate: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let segment_id = segment_id.into();
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidVideo(format!(
                    "segment `{segment_id}`: {name} must be positive, got {v}"
                )))
            }
        };
        positive("duration", duration_s)?;
        positive("size", size_kb)?;
        positive("framerate", framerate)?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidVideo(format!(
                "segment `{segment_id}`: dimensions must be positive, got {width}x{height}"
            )));
        }
        if duration_s > MAX_SEGMENT_SECONDS {
            return Err(Error::InvalidVideo(format!(
                "segment `{segment_id}`: duration {duration_s}s exceeds {MAX_SEGMENT_SECONDS}s"
            )));
        }
        Ok(VideoMeta {
            segment_id,
            duration_s,
            size_kb,
            framerate,
            width,
            height,
        })
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }
    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }
    pub fn size_kb(&self) -> f64 {
        self.size_kb
    }
    pub fn framerate(&self) -> f64 {
        self.framerate
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscodeTask {
    pub task_id: String,
    pub video: Arc<VideoMeta>,
    pub operation: Operation,
}

impl TranscodeTask {
    pub fn new(task_id: impl Into<String>, video: Arc<VideoMeta>, operation: Operation) -> Self {
        TranscodeTask {
            task_id: task_id.into(),
            video,
            operation,
        }
    }

    pub fn signatures(&self) -> Signatures {
        canonical_signatures(self)
    }
}

/// How much two tasks have in common. Ordered weakest to strongest, so a
/// stronger level compares greater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimilarityLevel {
    None,
    /// Same segment, different operation kinds.
    DataOnly,
    /// Same segment and operation kind, different parameter.
    DataOperation,
    /// Identical segment, kind and parameter.
    TaskLevel,
}

impl SimilarityLevel {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityLevel::None => "none",
            SimilarityLevel::DataOnly => "data-only",
            SimilarityLevel::DataOperation => "data-operation",
            SimilarityLevel::TaskLevel => "task",
        }
    }
}

impl std::fmt::Display for SimilarityLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hash keys of a task at the three similarity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signatures {
    /// hash(segment, kind, parameter)
    pub task: u64,
    /// hash(segment, kind)
    pub data_op: u64,
    /// hash(segment)
    pub data_only: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Stable signatures over the nested tuples (segment), (segment, kind) and
/// (segment, kind, parameter). Each level extends the hash state of the one
/// below it, with a length prefix on the segment id so that tuples cannot
/// alias by concatenation.
pub fn canonical_signatures(task: &TranscodeTask) -> Signatures {
    let segment = task.video.segment_id().as_bytes();
    let [kind, param] = task.operation.canonical_bytes();
    let mut h = fnv1a(FNV_OFFSET, &(segment.len() as u64).to_le_bytes());
    h = fnv1a(h, segment);
    let data_only = h;
    let data_op = fnv1a(h, &[kind]);
    let task_key = fnv1a(data_op, &[param]);
    Signatures {
        task: task_key,
        data_op,
        data_only,
    }
}

/// Similarity of two tasks. Hash keys are compared first; matches are then
/// confirmed on the full tuple so that a collision never merges unrelated
/// tasks.
pub fn classify_pair(a: &TranscodeTask, b: &TranscodeTask) -> SimilarityLevel {
    let (ka, kb) = (a.signatures(), b.signatures());
    if ka.data_only != kb.data_only || a.video.segment_id() != b.video.segment_id() {
        return SimilarityLevel::None;
    }
    if ka.data_op != kb.data_op || a.operation.kind() != b.operation.kind() {
        return SimilarityLevel::DataOnly;
    }
    if ka.task != kb.task || a.operation != b.operation {
        return SimilarityLevel::DataOperation;
    }
    SimilarityLevel::TaskLevel
}

/// Number of ways to merge between 2 and `max_degree` of `num_tasks`
/// distinct tasks: `sum_{k=2}^{max_degree} C(num_tasks, k)`.
pub fn count_merge_cases(num_tasks: u64, max_degree: u64) -> Result<u64> {
    if max_degree < 2 || max_degree > num_tasks {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= max_degree <= num_tasks, got max_degree={max_degree}, num_tasks={num_tasks}"
        )));
    }
    let mut total: u64 = 0;
    // C(n, k) built incrementally: C(n, k) = C(n, k-1) * (n-k+1) / k, exact at each step.
    let mut c: u128 = num_tasks as u128; // C(n, 1)
    for k in 2..=max_degree {
        c = c
            .checked_mul((num_tasks - k + 1) as u128)
            .ok_or(Error::Overflow("counting merge cases"))?
            / k as u128;
        let ck = u64::try_from(c).map_err(|_| Error::Overflow("counting merge cases"))?;
        total = total
            .checked_add(ck)
            .ok_or(Error::Overflow("counting merge cases"))?;
    }
    Ok(total)
}
