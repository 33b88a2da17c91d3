//! Synthetic execution-time model.
//!
//! Each task is decomposed into five phases. For a bit-rate, frame-rate or
//! resolution task (the VIC group) the first three phases (fetch, decode,
//! function load) make up a fixed fraction `s` of the task's time; the rest
//! is transform + encode. Codec tasks pay a per-codec multiple of that
//! transform + encode work.
//!
//! Merging shares phases according to how similar the members are:
//!
//! * fetch and decode are paid once per group (same segment);
//! * function load is paid once per operation kind present;
//! * transform and encode are paid once per distinct operation;
//! * an operation repeated verbatim costs nothing extra.
//!
//! With noise disabled, `k` same-kind VIC tasks therefore save exactly
//! `(k - 1) * s / k` of their summed time.
//!
//! How the shared fraction splits between load and fetch + decode depends
//! on the segment: loading a transcoding function takes roughly constant
//! time, so it dominates short, small segments and fades on large ones.

mod config;
mod dataset;

pub use config::{OracleConfig, DEFAULT_SEED};
pub use dataset::{generate_cases, generate_dataset, GeneratedCase, MergeStratum};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::workload::{OpKind, Operation, TranscodeTask, VideoMeta, MAX_MERGE_DEGREE};

/// Seconds of work per (second of video x MB of data) for a VIC task.
pub const BASE_SECONDS_PER_UNIT: f64 = 0.5;

/// Upper bound of the load share of the shared phases, reached as the task
/// time tends to zero.
const LOAD_SHARE_MAX: f64 = 0.95;
/// Task time (s) at which load takes half of `LOAD_SHARE_MAX`.
const LOAD_HALF_TIME: f64 = 0.4;
/// Fetch share of fetch + decode.
const FETCH_SHARE: f64 = 0.45;
/// Transform share of transform + encode.
const TRANSFORM_SHARE: f64 = 0.4;

/// Execution time of one task split by phase, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseProfile {
    pub fetch: f64,
    pub decode: f64,
    pub load: f64,
    pub transform: f64,
    pub encode: f64,
}

impl PhaseProfile {
    pub fn total(&self) -> f64 {
        self.fetch + self.decode + self.load + self.transform + self.encode
    }

    /// Phases a same-kind merge can share.
    pub fn shared(&self) -> f64 {
        self.fetch + self.decode + self.load
    }

    fn scaled(self, f: [f64; 5]) -> Self {
        PhaseProfile {
            fetch: self.fetch * f[0],
            decode: self.decode * f[1],
            load: self.load * f[2],
            transform: self.transform * f[3],
            encode: self.encode * f[4],
        }
    }
}

/// Execution time of a group run individually and merged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupTimes {
    pub individual_sum: f64,
    pub merged: f64,
}

impl GroupTimes {
    pub fn saving(&self) -> f64 {
        if self.individual_sum > 0.0 {
            (self.individual_sum - self.merged) / self.individual_sum
        } else {
            0.0
        }
    }
}

/// Noise-free VIC task time for a segment.
pub fn base_time(video: &VideoMeta) -> f64 {
    BASE_SECONDS_PER_UNIT * video.duration_s() * video.size_kb() / 1000.0
}

/// Deterministic phase profile of `op` applied to `video`.
pub fn phase_profile(video: &VideoMeta, op: Operation, cfg: &OracleConfig) -> PhaseProfile {
    let total = base_time(video);
    let shared = cfg.vic_shared_fraction * total;
    let h2 = LOAD_HALF_TIME * LOAD_HALF_TIME;
    let load = shared * LOAD_SHARE_MAX * h2 / (h2 + total * total);
    let fetch_decode = shared - load;
    let mut private = (1.0 - cfg.vic_shared_fraction) * total;
    if let Some(codec) = op.codec_param() {
        private *= cfg.codec_multiplier(codec);
    }
    let profile = PhaseProfile {
        fetch: fetch_decode * FETCH_SHARE,
        decode: fetch_decode * (1.0 - FETCH_SHARE),
        load,
        transform: private * TRANSFORM_SHARE,
        encode: private * (1.0 - TRANSFORM_SHARE),
    };

    let sigma = if op.kind().is_vic() {
        cfg.vic_noise_sigma
    } else {
        cfg.codec_noise_sigma
    };
    if sigma == 0.0 {
        return profile;
    }
    // Mean-one log-normal factors from a stream keyed by (seed, segment, op),
    // so a measurement does not depend on what else was generated before it.
    let dist = LogNormal::new(-0.5 * sigma * sigma, sigma).expect("sigma is finite");
    let mut rng = ChaCha8Rng::seed_from_u64(noise_stream(cfg.rng_seed, video.segment_id(), op));
    let factors = [(); 5].map(|_| dist.sample(&mut rng));
    profile.scaled(factors)
}

fn noise_stream(seed: u64, segment: &str, op: Operation) -> u64 {
    // splitmix64 finalizer over an FNV digest of the key.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in segment
        .as_bytes()
        .iter()
        .chain(&[0xff])
        .chain(&op.canonical_bytes())
    {
        h = (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn exec_time_individual(video: &VideoMeta, op: Operation, cfg: &OracleConfig) -> f64 {
    phase_profile(video, op, cfg).total()
}

/// Time of `ops` on one segment executed as a single merged task.
pub fn exec_time_merged(video: &VideoMeta, ops: &[Operation], cfg: &OracleConfig) -> Result<f64> {
    check_degree(ops.len())?;
    let mut distinct: Vec<Operation> = Vec::with_capacity(ops.len());
    for op in ops {
        if !distinct.contains(op) {
            distinct.push(*op);
        }
    }
    if let [only] = distinct.as_slice() {
        return Ok(exec_time_individual(video, *only, cfg));
    }
    let profiles: Vec<(OpKind, PhaseProfile)> = distinct
        .iter()
        .map(|op| (op.kind(), phase_profile(video, *op, cfg)))
        .collect();
    let n = profiles.len() as f64;

    // Shared phases are measured once; take the members' average.
    let fetch = profiles.iter().map(|(_, p)| p.fetch).sum::<f64>() / n;
    let decode = profiles.iter().map(|(_, p)| p.decode).sum::<f64>() / n;
    let mut loads: BTreeMap<OpKind, (f64, usize)> = BTreeMap::new();
    for (kind, p) in &profiles {
        let e = loads.entry(*kind).or_default();
        e.0 += p.load;
        e.1 += 1;
    }
    let load: f64 = loads.values().map(|(sum, c)| sum / *c as f64).sum();
    let private: f64 = profiles.iter().map(|(_, p)| p.transform + p.encode).sum();
    Ok(fetch + decode + load + private)
}

/// Fraction of summed individual time saved by merging `ops`.
pub fn merge_saving(video: &VideoMeta, ops: &[Operation], cfg: &OracleConfig) -> Result<f64> {
    Ok(group_times(video, ops, cfg)?.saving())
}

pub fn group_times(video: &VideoMeta, ops: &[Operation], cfg: &OracleConfig) -> Result<GroupTimes> {
    let merged = exec_time_merged(video, ops, cfg)?;
    let individual_sum = ops
        .iter()
        .map(|op| exec_time_individual(video, *op, cfg))
        .sum();
    Ok(GroupTimes {
        individual_sum,
        merged,
    })
}

/// Like [`group_times`] for concrete tasks; all must share one segment.
pub fn task_group_times(tasks: &[TranscodeTask], cfg: &OracleConfig) -> Result<GroupTimes> {
    let first = tasks
        .first()
        .ok_or_else(|| Error::InvalidGroup("empty group".into()))?;
    if let Some(other) = tasks
        .iter()
        .find(|t| t.video.segment_id() != first.video.segment_id())
    {
        return Err(Error::InvalidGroup(format!(
            "tasks span segments `{}` and `{}`",
            first.video.segment_id(),
            other.video.segment_id()
        )));
    }
    let ops: Vec<Operation> = tasks.iter().map(|t| t.operation).collect();
    group_times(&first.video, &ops, cfg)
}

fn check_degree(n: usize) -> Result<()> {
    if n == 0 || n > MAX_MERGE_DEGREE {
        return Err(Error::InvalidGroup(format!(
            "group of {n} operations; expected 1..={MAX_MERGE_DEGREE}"
        )));
    }
    Ok(())
}
