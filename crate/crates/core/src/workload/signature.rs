use std::collections::{HashMap, HashSet};

use super::{classify_pair, SimilarityLevel, TranscodeTask, MAX_MERGE_DEGREE};
use crate::error::{Error, Result};

/// Position of a group in admission order; lower ids are older.
pub type GroupId = usize;

#[derive(Debug, Clone)]
pub struct MergeGroup {
    id: GroupId,
    tasks: Vec<TranscodeTask>,
    level: SimilarityLevel,
}

impl MergeGroup {
    pub fn id(&self) -> GroupId {
        self.id
    }

    pub fn tasks(&self) -> &[TranscodeTask] {
        &self.tasks
    }

    pub fn degree(&self) -> usize {
        self.tasks.len()
    }

    /// Weakest pairwise similarity among members; `None` for singletons.
    pub fn level(&self) -> SimilarityLevel {
        self.level
    }
}

/// Hash tables that map each similarity key to the open groups containing
/// a task with that key. A group stays open until it reaches the degree cap.
///
/// Admission is single-writer; readers of finished groups need no locking.
#[derive(Debug)]
pub struct SignatureTables {
    groups: Vec<MergeGroup>,
    by_task: HashMap<u64, Vec<GroupId>>,
    by_data_op: HashMap<u64, Vec<GroupId>>,
    by_data_only: HashMap<u64, Vec<GroupId>>,
    task_ids: HashSet<String>,
    max_degree: usize,
}

impl Default for SignatureTables {
    fn default() -> Self {
        Self::new()
    }
}

impl SignatureTables {
    pub fn new() -> Self {
        Self::with_max_degree(MAX_MERGE_DEGREE)
    }

    pub fn with_max_degree(max_degree: usize) -> Self {
        SignatureTables {
            groups: Vec::new(),
            by_task: HashMap::new(),
            by_data_op: HashMap::new(),
            by_data_only: HashMap::new(),
            task_ids: HashSet::new(),
            max_degree: max_degree.max(1),
        }
    }

    /// Every group formed so far, open or full, in creation order.
    pub fn groups(&self) -> &[MergeGroup] {
        &self.groups
    }

    pub fn group(&self, id: GroupId) -> Option<&MergeGroup> {
        self.groups.get(id)
    }

    pub fn into_groups(self) -> Vec<MergeGroup> {
        self.groups
    }

    /// Whether `id` is still reachable for admission.
    pub fn is_open(&self, id: GroupId) -> bool {
        self.groups
            .get(id)
            .is_some_and(|g| g.tasks.len() < self.max_degree)
    }

    /// Admit a task. It joins the oldest open group at the strongest level
    /// available (task, then data-operation, then data-only); otherwise it
    /// starts a new group and the returned level is `None`.
    pub fn admit(&mut self, task: TranscodeTask) -> Result<(&MergeGroup, SimilarityLevel)> {
        if self.task_ids.contains(&task.task_id) {
            return Err(Error::DuplicateTaskId(task.task_id));
        }
        let keys = task.signatures();
        let probes = [
            (SimilarityLevel::TaskLevel, &self.by_task, keys.task),
            (
                SimilarityLevel::DataOperation,
                &self.by_data_op,
                keys.data_op,
            ),
            (
                SimilarityLevel::DataOnly,
                &self.by_data_only,
                keys.data_only,
            ),
        ];
        let mut found = None;
        for (level, table, key) in probes {
            let candidate = table.get(&key).and_then(|ids| {
                ids.iter()
                    .copied()
                    .filter(|&id| {
                        let g = &self.groups[id];
                        g.tasks.len() < self.max_degree
                            && g.tasks.iter().any(|m| classify_pair(m, &task) >= level)
                    })
                    .min()
            });
            if let Some(id) = candidate {
                found = Some((id, level));
                break;
            }
        }

        self.task_ids.insert(task.task_id.clone());
        let (id, level) = match found {
            Some((id, level)) => {
                let group = &mut self.groups[id];
                let weakest = group
                    .tasks
                    .iter()
                    .map(|m| classify_pair(m, &task))
                    .min()
                    .unwrap_or(SimilarityLevel::None);
                group.level = if group.tasks.len() == 1 {
                    weakest
                } else {
                    group.level.min(weakest)
                };
                group.tasks.push(task);
                (id, level)
            }
            None => {
                let id = self.groups.len();
                self.groups.push(MergeGroup {
                    id,
                    tasks: vec![task],
                    level: SimilarityLevel::None,
                });
                (id, SimilarityLevel::None)
            }
        };

        if self.groups[id].tasks.len() >= self.max_degree {
            self.close(id);
        } else {
            Self::register(&mut self.by_task, keys.task, id);
            Self::register(&mut self.by_data_op, keys.data_op, id);
            Self::register(&mut self.by_data_only, keys.data_only, id);
        }
        Ok((&self.groups[id], level))
    }

    fn register(table: &mut HashMap<u64, Vec<GroupId>>, key: u64, id: GroupId) {
        let ids = table.entry(key).or_default();
        if !ids.contains(&id) {
            ids.push(id);
        }
    }

    /// Drop a full group from every table it is listed in.
    fn close(&mut self, id: GroupId) {
        let keys: Vec<_> = self.groups[id]
            .tasks
            .iter()
            .map(|t| t.signatures())
            .collect();
        for k in keys {
            for (table, key) in [
                (&mut self.by_task, k.task),
                (&mut self.by_data_op, k.data_op),
                (&mut self.by_data_only, k.data_only),
            ] {
                if let Some(ids) = table.get_mut(&key) {
                    ids.retain(|&g| g != id);
                    if ids.is_empty() {
                        table.remove(&key);
                    }
                }
            }
        }
    }

    /// Checks that every open group is reachable under all its members'
    /// keys and that no closed group is. Used by tests.
    pub fn is_consistent(&self) -> bool {
        self.groups.iter().all(|g| {
            let open = self.is_open(g.id);
            g.tasks.iter().all(|t| {
                let k = t.signatures();
                [
                    (&self.by_task, k.task),
                    (&self.by_data_op, k.data_op),
                    (&self.by_data_only, k.data_only),
                ]
                .iter()
                .all(|(table, key)| table.get(key).is_some_and(|ids| ids.contains(&g.id)) == open)
            })
        })
    }
}
