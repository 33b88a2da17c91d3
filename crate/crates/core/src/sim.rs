//! Batch queue simulator comparing merged against one-by-one execution.
//!
//! All tasks arrive at time 0 in list order. Jobs are dispatched first come,
//! first served onto identical workers: each job starts on whichever worker
//! frees up first. A merged group takes the queue position of its first
//! member. Execution times come from the oracle.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::features::encode;
use crate::oracle::{exec_time_individual, group_times, task_group_times, OracleConfig};
use crate::workload::{
    OpKind, Operation, SignatureTables, SimilarityLevel, TranscodeTask, VideoMeta,
};
use crate::Predictor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergePolicy {
    Never,
    Always,
    /// Merge a group only if its predicted saving is at least this value.
    Threshold(f64),
}

impl MergePolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            MergePolicy::Threshold(t) if !(0.0..1.0).contains(t) => Err(Error::Config(format!(
                "merge threshold must lie in [0, 1), got {t}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MergePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergePolicy::Never => f.write_str("never"),
            MergePolicy::Always => f.write_str("always"),
            MergePolicy::Threshold(t) => write!(f, "threshold({t})"),
        }
    }
}

/// One admitted group and what happened to it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrace {
    pub group_id: usize,
    pub degree: usize,
    pub level: SimilarityLevel,
    pub predicted_saving: Option<f64>,
    pub actual_saving: f64,
    pub merged_time: f64,
    pub sequential_time: f64,
    pub executed_merged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub policy: MergePolicy,
    pub workers: usize,
    pub tasks: usize,
    pub makespan_merged: f64,
    pub makespan_sequential: f64,
    pub saving_pct: f64,
    /// Groups formed by admission; every task is in exactly one.
    pub groups_formed: usize,
    /// Groups of two or more tasks that ran as one merged job.
    pub groups_merged: usize,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub trace: Vec<GroupTrace>,
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "policy: {}", self.policy)?;
        writeln!(f, "workers: {}", self.workers)?;
        writeln!(f, "tasks: {}", self.tasks)?;
        writeln!(f, "groups_formed: {}", self.groups_formed)?;
        writeln!(f, "groups_merged: {}", self.groups_merged)?;
        let hist: Vec<String> = self
            .degree_histogram
            .iter()
            .map(|(d, c)| format!("{d}:{c}"))
            .collect();
        writeln!(f, "degree_histogram: {}", hist.join(" "))?;
        writeln!(f, "makespan_sequential_s: {:.6}", self.makespan_sequential)?;
        writeln!(f, "makespan_merged_s: {:.6}", self.makespan_merged)?;
        write!(f, "saving_pct: {:.4}", self.saving_pct)
    }
}

impl SimReport {
    pub const TRACE_HEADER: &'static str =
        "group_id,degree,level,predicted_saving,actual_saving,merged_time,sequential_time";

    pub fn write_trace(&self, mut out: impl Write) -> Result<()> {
        let io = |e| Error::io("<trace output>", e);
        writeln!(out, "{}", Self::TRACE_HEADER).map_err(io)?;
        for g in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                g.group_id,
                g.degree,
                g.level,
                g.predicted_saving
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
                g.actual_saving,
                g.merged_time,
                g.sequential_time
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// Makespan of jobs dispatched in order onto `workers` machines.
pub fn fcfs_makespan(durations: impl IntoIterator<Item = f64>, workers: usize) -> f64 {
    assert!(workers >= 1);
    let mut free_at: BinaryHeap<Reverse<OrdF64>> =
        (0..workers).map(|_| Reverse(OrdF64(0.0))).collect();
    let mut makespan = 0.0f64;
    for d in durations {
        let Reverse(OrdF64(start)) = free_at.pop().expect("at least one worker");
        let end = start + d;
        makespan = makespan.max(end);
        free_at.push(Reverse(OrdF64(end)));
    }
    makespan
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn run_sim(
    tasks: &[TranscodeTask],
    policy: MergePolicy,
    predictor: Option<&dyn Predictor>,
    cfg: &OracleConfig,
    workers: usize,
) -> Result<SimReport> {
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("workload has no tasks".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument("need at least one worker".into()));
    }
    policy.validate()?;
    if matches!(policy, MergePolicy::Threshold(_)) && predictor.is_none() {
        return Err(Error::Config("threshold policy requires a model".into()));
    }
    cfg.validate()?;

    let individual: Vec<f64> = tasks
        .iter()
        .map(|t| exec_time_individual(&t.video, t.operation, cfg))
        .collect();
    let makespan_sequential = fcfs_makespan(individual.iter().copied(), workers);

    // Queue position -> job duration; a job sits at its first member's slot.
    let mut jobs: Vec<Option<f64>> = vec![None; tasks.len()];
    let mut trace = Vec::new();
    let mut degree_histogram = BTreeMap::new();
    let mut groups_merged = 0;

    if policy == MergePolicy::Never {
        for (i, t) in individual.iter().enumerate() {
            jobs[i] = Some(*t);
        }
        *degree_histogram.entry(1).or_insert(0) += tasks.len();
        trace.extend(individual.iter().enumerate().map(|(i, t)| GroupTrace {
            group_id: i,
            degree: 1,
            level: SimilarityLevel::None,
            predicted_saving: None,
            actual_saving: 0.0,
            merged_time: *t,
            sequential_time: *t,
            executed_merged: false,
        }));
    } else {
        let mut tables = SignatureTables::new();
        let mut position = Vec::with_capacity(tasks.len());
        for t in tasks {
            let (group, _) = tables.admit(t.clone())?;
            position.push(group.id());
        }
        // Tasks of each group in arrival order.
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); tables.groups().len()];
        for (i, g) in position.iter().enumerate() {
            members[*g].push(i);
        }
        for group in tables.groups() {
            let idx = &members[group.id()];
            *degree_histogram.entry(group.degree()).or_insert(0) += 1;
            let sequential_time: f64 = idx.iter().map(|&i| individual[i]).sum();
            if group.degree() == 1 {
                jobs[idx[0]] = Some(individual[idx[0]]);
                trace.push(GroupTrace {
                    group_id: group.id(),
                    degree: 1,
                    level: group.level(),
                    predicted_saving: None,
                    actual_saving: 0.0,
                    merged_time: sequential_time,
                    sequential_time,
                    executed_merged: false,
                });
                continue;
            }
            let times = task_group_times(group.tasks(), cfg)?;
            let predicted_saving = match predictor {
                Some(p) => {
                    let ops: Vec<Operation> = group.tasks().iter().map(|t| t.operation).collect();
                    Some(p.predict(&encode(&group.tasks()[0].video, &ops)?))
                }
                None => None,
            };
            let merge = match policy {
                MergePolicy::Always => true,
                MergePolicy::Threshold(t) => predicted_saving.is_some_and(|p| p >= t),
                MergePolicy::Never => unreachable!(),
            };
            if merge {
                groups_merged += 1;
                jobs[idx[0]] = Some(times.merged);
            } else {
                for &i in idx {
                    jobs[i] = Some(individual[i]);
                }
            }
            trace.push(GroupTrace {
                group_id: group.id(),
                degree: group.degree(),
                level: group.level(),
                predicted_saving,
                actual_saving: times.saving(),
                merged_time: times.merged,
                sequential_time,
                executed_merged: merge,
            });
        }
    }

    let makespan_merged = fcfs_makespan(jobs.into_iter().flatten(), workers);
    let saving_pct = (makespan_sequential - makespan_merged) / makespan_sequential * 100.0;
    Ok(SimReport {
        policy,
        workers,
        tasks: tasks.len(),
        makespan_merged,
        makespan_sequential,
        saving_pct,
        groups_formed: degree_histogram.values().sum(),
        groups_merged,
        degree_histogram,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MakespanRow {
    pub degree: usize,
    pub merged: f64,
    pub sequential: f64,
}

impl MakespanRow {
    pub fn saving(&self) -> f64 {
        1.0 - self.merged / self.sequential
    }
}

/// Merged versus sequential time for the first `k` parameters of a VIC
/// kind, `k = 2..=5`.
pub fn makespan_table(
    video: &VideoMeta,
    kind: OpKind,
    cfg: &OracleConfig,
) -> Result<Vec<MakespanRow>> {
    if !kind.is_vic() {
        return Err(Error::InvalidArgument(format!(
            "makespan table needs a VIC kind, got {}",
            kind.name()
        )));
    }
    let ops: Vec<Operation> = Operation::of_kind(kind).collect();
    (2..=ops.len())
        .map(|k| {
            let t = group_times(video, &ops[..k], cfg)?;
            Ok(MakespanRow {
                degree: k,
                merged: t.merged,
                sequential: t.individual_sum,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::generate_cases;
    use crate::workload::Codec;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn video(id: &str) -> Arc<VideoMeta> {
        Arc::new(VideoMeta::new(id, 2.0, 1000.0, 30.0, 1280, 720).unwrap())
    }

    fn same_kind(n: usize, v: &Arc<VideoMeta>, prefix: &str) -> Vec<TranscodeTask> {
        Operation::of_kind(OpKind::Bitrate)
            .take(n)
            .enumerate()
            .map(|(i, op)| TranscodeTask::new(format!("{prefix}{i}"), v.clone(), op))
            .collect()
    }

    struct Constant(f64);

    impl Predictor for Constant {
        fn predict(&self, _: &crate::features::FeatureVector) -> f64 {
            self.0
        }
    }

    fn mixed_workload() -> Vec<TranscodeTask> {
        let mut tasks = Vec::new();
        for (vi, c) in generate_cases(6, 3, &OracleConfig::default())
            .unwrap()
            .iter()
            .enumerate()
        {
            for (oi, op) in c.ops.iter().enumerate() {
                tasks.push(TranscodeTask::new(
                    format!("t{vi}-{oi}"),
                    c.video.clone(),
                    *op,
                ));
            }
        }
        tasks
    }

    #[test]
    fn fcfs_examples() {
        assert_eq!(fcfs_makespan([3.0, 1.0, 2.0], 1), 6.0);
        assert_eq!(fcfs_makespan([3.0, 1.0, 2.0], 2), 3.0);
        assert_eq!(fcfs_makespan([1.0, 1.0, 4.0], 2), 5.0);
        assert_eq!(fcfs_makespan([], 3), 0.0);
    }

    #[test]
    fn never_policy_saves_nothing() {
        let r = run_sim(
            &mixed_workload(),
            MergePolicy::Never,
            None,
            &OracleConfig::default(),
            3,
        )
        .unwrap();
        assert_eq!(r.saving_pct, 0.0);
        assert_eq!(r.makespan_merged, r.makespan_sequential);
    }

    #[test]
    fn degree_three_group_on_one_worker() {
        let v = video("a");
        let r = run_sim(
            &same_kind(3, &v, "t"),
            MergePolicy::Always,
            None,
            &OracleConfig::noiseless(),
            1,
        )
        .unwrap();
        assert!((r.saving_pct - 100.0 * 2.0 / 3.0 * 0.52).abs() < 1e-9);
        assert_eq!(r.groups_formed, 1);
        assert_eq!(r.degree_histogram, BTreeMap::from([(3, 1)]));
    }

    #[test]
    fn merged_job_keeps_first_member_position() {
        // a0 b0 a1 on two workers: merged {a0,a1} runs first, b0 second.
        let (a, b) = (video("a"), video("b"));
        let br = |kbps| Operation::bitrate(kbps).unwrap();
        let tasks = vec![
            TranscodeTask::new("a0", a.clone(), br(384)),
            TranscodeTask::new("b0", b.clone(), br(384)),
            TranscodeTask::new("a1", a.clone(), br(512)),
        ];
        let cfg = OracleConfig::noiseless();
        let r = run_sim(&tasks, MergePolicy::Always, None, &cfg, 1).unwrap();
        let ind = exec_time_individual(&a, br(384), &cfg);
        let merged = group_times(&a, &[br(384), br(512)], &cfg).unwrap().merged;
        assert!((r.makespan_merged - (merged + ind)).abs() < 1e-12);
        assert_eq!(r.groups_formed, 2);
        assert_eq!(r.trace[0].degree, 2);
    }

    #[test]
    fn threshold_behaviour() {
        let tasks = mixed_workload();
        let cfg = OracleConfig::default();
        assert!(matches!(
            run_sim(&tasks, MergePolicy::Threshold(0.1), None, &cfg, 2),
            Err(Error::Config(_))
        ));
        assert!(run_sim(
            &tasks,
            MergePolicy::Threshold(1.0),
            Some(&Constant(0.5)),
            &cfg,
            2
        )
        .is_err());
        let always = run_sim(&tasks, MergePolicy::Always, None, &cfg, 2).unwrap();
        let zero = run_sim(
            &tasks,
            MergePolicy::Threshold(0.0),
            Some(&Constant(0.2)),
            &cfg,
            2,
        )
        .unwrap();
        assert_eq!(always.makespan_merged, zero.makespan_merged);
        assert_eq!(always.groups_merged, zero.groups_merged);
        let high = run_sim(
            &tasks,
            MergePolicy::Threshold(0.5),
            Some(&Constant(0.2)),
            &cfg,
            2,
        )
        .unwrap();
        assert_eq!(high.groups_merged, 0);
        assert_eq!(high.makespan_merged, high.makespan_sequential);
    }

    #[test]
    fn trace_csv_has_one_row_per_group() {
        let r = run_sim(
            &mixed_workload(),
            MergePolicy::Always,
            None,
            &OracleConfig::default(),
            2,
        )
        .unwrap();
        let mut out = Vec::new();
        r.write_trace(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), r.groups_formed + 1);
        assert!(text.starts_with(SimReport::TRACE_HEADER));
    }

    #[test]
    fn bad_arguments() {
        let cfg = OracleConfig::default();
        assert!(run_sim(&[], MergePolicy::Always, None, &cfg, 1).is_err());
        assert!(run_sim(&mixed_workload(), MergePolicy::Always, None, &cfg, 0).is_err());
    }

    #[test]
    fn makespan_table_shape() {
        let v = video("m");
        let cfg = OracleConfig::noiseless();
        let rows = makespan_table(&v, OpKind::Resolution, &cfg).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.degree).collect::<Vec<_>>(),
            vec![2, 3, 4, 5]
        );
        let single = exec_time_individual(&v, Operation::nth(OpKind::Resolution, 0).unwrap(), &cfg);
        for r in &rows {
            assert!(r.merged < r.sequential);
            assert!((r.sequential - r.degree as f64 * single).abs() < 1e-9);
        }
        assert!((rows[3].saving() - 0.8 * 0.52).abs() < 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].saving() > w[0].saving());
        }
        assert!(makespan_table(&v, OpKind::Codec, &cfg).is_err());
    }

    #[test]
    fn five_variants_show_rising_saving() {
        let cfg = OracleConfig::noiseless();
        let mut last = 0.0;
        for k in 2..=5 {
            let v = video("f");
            let r = run_sim(&same_kind(k, &v, "x"), MergePolicy::Always, None, &cfg, 1).unwrap();
            assert!(r.saving_pct > last);
            last = r.saving_pct;
        }
    }

    proptest! {
        #[test]
        fn histogram_and_subadditivity(
            picks in prop::collection::vec((0usize..3, 0usize..18), 1..40),
            workers in 1usize..4,
        ) {
            let vids: Vec<_> = (0..3).map(|i| video(&format!("v{i}"))).collect();
            let ops: Vec<Operation> = Operation::all().collect();
            let tasks: Vec<_> = picks
                .iter()
                .enumerate()
                .map(|(i, (v, o))| TranscodeTask::new(format!("t{i}"), vids[*v].clone(), ops[*o]))
                .collect();
            let cfg = OracleConfig::noiseless();
            let r = run_sim(&tasks, MergePolicy::Always, None, &cfg, workers).unwrap();
            prop_assert_eq!(r.degree_histogram.values().sum::<usize>(), r.groups_formed);
            prop_assert_eq!(r.degree_histogram.iter().map(|(d, c)| d * c).sum::<usize>(), tasks.len());
            let one = run_sim(&tasks, MergePolicy::Always, None, &cfg, 1).unwrap();
            prop_assert!(one.makespan_merged <= one.makespan_sequential * (1.0 + 1e-12));
            let never = run_sim(&tasks, MergePolicy::Never, None, &cfg, workers).unwrap();
            prop_assert_eq!(never.saving_pct, 0.0);
        }
    }

    #[test]
    fn codec_groups_merge_with_vic() {
        let v = video("c");
        let tasks = vec![
            TranscodeTask::new("a", v.clone(), Operation::codec(Codec::Hevc)),
            TranscodeTask::new("b", v.clone(), Operation::bitrate(512).unwrap()),
        ];
        let r = run_sim(
            &tasks,
            MergePolicy::Always,
            None,
            &OracleConfig::noiseless(),
            1,
        )
        .unwrap();
        assert_eq!(r.groups_formed, 1);
        assert!(r.saving_pct > 0.0);
    }
}
