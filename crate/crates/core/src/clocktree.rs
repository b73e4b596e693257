//! Virtual clock distribution networks.
//!
//! A tree is built by recursive halving: the root buffer drives every
//! flip-flop, each further stage splits every cone of the previous stage into
//! two contiguous halves (the larger half goes left), and splitting stops at
//! the first stage where some cone could not be halved without dropping below
//! the minimum fan-out. All leaves therefore sit on the last stage and the
//! cones of any one stage partition the flip-flop set.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum ClockTreeError {
    #[error("cannot build a clock tree over an empty flip-flop list")]
    EmptyFfList,
    #[error("minimum fan-out must be at least 1")]
    ZeroMinFanout,
    #[error("unknown clock buffer {0}")]
    UnknownBuffer(BufferId),
    #[error("malformed clock tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BufferId(pub usize);

impl fmt::Display for BufferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "buf{}", self.0)
    }
}

/// How flip-flops are ordered before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Lexicographic order of hierarchical names, so a shared prefix lands in
    /// a shared subtree.
    ByName,
    /// Seeded uniform shuffle.
    Random(u64),
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grouping::ByName => f.write_str("name"),
            Grouping::Random(seed) => write!(f, "random({seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockBuffer {
    pub id: BufferId,
    /// 1 for the root.
    pub stage: usize,
    pub parent: Option<BufferId>,
    /// Flip-flop indices (into [`ClockTree::ffs`]) in ascending order.
    pub cone: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockTree {
    ffs: Vec<String>,
    buffers: Vec<ClockBuffer>,
    stages: usize,
    min_fanout: usize,
    grouping: Grouping,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopologyStats {
    pub stages: usize,
    pub buffer_count: usize,
    pub buffers_per_stage: Vec<usize>,
    pub min_leaf_fanout: usize,
    pub max_leaf_fanout: usize,
    pub cone_size_sum: usize,
}

impl fmt::Display for TopologyStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stages={} buffers={} fanout={}..{}",
            self.stages, self.buffer_count, self.min_leaf_fanout, self.max_leaf_fanout
        )
    }
}

/// Builds a virtual clock tree over `ffs` (document order).
pub fn generate_tree(
    ffs: &[String],
    min_fanout: usize,
    grouping: Grouping,
) -> Result<ClockTree, ClockTreeError> {
    if ffs.is_empty() {
        return Err(ClockTreeError::EmptyFfList);
    }
    if min_fanout == 0 {
        return Err(ClockTreeError::ZeroMinFanout);
    }
    let mut order: Vec<usize> = (0..ffs.len()).collect();
    match grouping {
        Grouping::ByName => order.sort_by(|&a, &b| ffs[a].cmp(&ffs[b]).then(a.cmp(&b))),
        Grouping::Random(seed) => {
            let mut r = rng::stream(seed, "clocktree.shuffle");
            rng::shuffle(&mut r, &mut order);
        }
    }

    // Contiguous ranges of `order`, one per buffer, breadth first.
    let mut ranges = vec![(0usize, ffs.len())];
    let mut stage_start = 0;
    let mut stages = 1;
    loop {
        let stage = &ranges[stage_start..];
        if stage.iter().any(|&(_, len)| len / 2 < min_fanout) {
            break;
        }
        let next: Vec<(usize, usize)> = stage
            .iter()
            .flat_map(|&(start, len)| {
                let left = len.div_ceil(2);
                [(start, left), (start + left, len - left)]
            })
            .collect();
        stage_start = ranges.len();
        ranges.extend(next);
        stages += 1;
    }

    let buffers = ranges
        .iter()
        .enumerate()
        .map(|(i, &(start, len))| {
            let mut cone = order[start..start + len].to_vec();
            cone.sort_unstable();
            ClockBuffer {
                id: BufferId(i),
                stage: stage_of(i),
                parent: (i > 0).then(|| BufferId((i - 1) / 2)),
                cone,
            }
        })
        .collect();
    Ok(ClockTree {
        ffs: ffs.to_vec(),
        buffers,
        stages,
        min_fanout,
        grouping,
    })
}

/// Stage of the `i`-th buffer in breadth-first numbering.
fn stage_of(i: usize) -> usize {
    (usize::BITS - (i + 1).leading_zeros()) as usize
}

impl ClockTree {
    pub fn ffs(&self) -> &[String] {
        &self.ffs
    }

    pub fn buffers(&self) -> &[ClockBuffer] {
        &self.buffers
    }

    pub fn buffer_ids(&self) -> impl Iterator<Item = BufferId> + '_ {
        self.buffers.iter().map(|b| b.id)
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn min_fanout(&self) -> usize {
        self.min_fanout
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping
    }

    pub fn root(&self) -> BufferId {
        BufferId(0)
    }

    pub fn buffer(&self, id: BufferId) -> Result<&ClockBuffer, ClockTreeError> {
        self.buffers
            .get(id.0)
            .ok_or(ClockTreeError::UnknownBuffer(id))
    }

    pub fn children(&self, id: BufferId) -> Vec<BufferId> {
        [2 * id.0 + 1, 2 * id.0 + 2]
            .into_iter()
            .filter(|&c| c < self.buffers.len())
            .map(BufferId)
            .collect()
    }

    pub fn is_leaf(&self, id: BufferId) -> bool {
        self.children(id).is_empty()
    }

    /// Flip-flop names driven through `id`, in document order.
    pub fn cone(&self, id: BufferId) -> Result<Vec<&str>, ClockTreeError> {
        Ok(self
            .buffer(id)?
            .cone
            .iter()
            .map(|&i| self.ffs[i].as_str())
            .collect())
    }

    pub fn stats(&self) -> TopologyStats {
        let mut per_stage = vec![0; self.stages];
        for b in &self.buffers {
            per_stage[b.stage - 1] += 1;
        }
        let leaves = self.buffers.iter().filter(|b| self.is_leaf(b.id));
        let (min, max) = leaves.fold((usize::MAX, 0), |(lo, hi), b| {
            (lo.min(b.cone.len()), hi.max(b.cone.len()))
        });
        TopologyStats {
            stages: self.stages,
            buffer_count: self.buffers.len(),
            buffers_per_stage: per_stage,
            min_leaf_fanout: min,
            max_leaf_fanout: max,
            cone_size_sum: self.buffers.iter().map(|b| b.cone.len()).sum(),
        }
    }

    /// Verifies the structural invariants: breadth-first full binary
    /// numbering, children cones splitting their parent, and every stage
    /// partitioning the flip-flop set.
    pub fn check(&self) -> Result<(), ClockTreeError> {
        let bad = |m: String| Err(ClockTreeError::Malformed(m));
        let n = self.buffers.len();
        if self.ffs.is_empty() {
            return Err(ClockTreeError::EmptyFfList);
        }
        if n + 1 != 1 << self.stages {
            return bad(format!("{n} buffers for {} stages", self.stages));
        }
        let unique: BTreeSet<&String> = self.ffs.iter().collect();
        if unique.len() != self.ffs.len() {
            return bad("duplicate flip-flop names".into());
        }
        for (i, b) in self.buffers.iter().enumerate() {
            if b.id != BufferId(i) || b.stage != stage_of(i) {
                return bad(format!("buffer {i} has id {} stage {}", b.id, b.stage));
            }
            if b.parent != (i > 0).then(|| BufferId((i - 1) / 2)) {
                return bad(format!("buffer {i} has wrong parent"));
            }
            if b.cone.is_empty() {
                return bad(format!("buffer {i} has an empty cone"));
            }
            if b.cone.windows(2).any(|w| w[0] >= w[1]) || *b.cone.last().unwrap() >= self.ffs.len()
            {
                return bad(format!(
                    "buffer {i} cone is not an ordered set of flip-flops"
                ));
            }
            let kids = self.children(b.id);
            if !kids.is_empty() {
                let mut union: Vec<usize> = kids
                    .iter()
                    .flat_map(|k| self.buffers[k.0].cone.iter().copied())
                    .collect();
                union.sort_unstable();
                if union != b.cone {
                    return bad(format!("children of buffer {i} do not split its cone"));
                }
            }
        }
        if self.buffers[0].cone.len() != self.ffs.len() {
            return bad("root cone is not the full flip-flop set".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = TreeDoc {
            min_fanout: self.min_fanout,
            grouping: self.grouping,
            prng: rng::PRNG_NAME.to_string(),
            stages: self.stages,
            ffs: self.ffs.clone(),
            buffers: self
                .buffers
                .iter()
                .map(|b| BufferDoc {
                    id: b.id.0,
                    stage: b.stage,
                    parent: b.parent.map(|p| p.0),
                    cone: b.cone.iter().map(|&i| self.ffs[i].clone()).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClockTreeError> {
        let doc: TreeDoc =
            serde_json::from_str(text).map_err(|e| ClockTreeError::Malformed(e.to_string()))?;
        let index: std::collections::HashMap<&str, usize> = doc
            .ffs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let buffers = doc
            .buffers
            .iter()
            .map(|b| {
                let mut cone = b
                    .cone
                    .iter()
                    .map(|name| {
                        index.get(name.as_str()).copied().ok_or_else(|| {
                            ClockTreeError::Malformed(format!("unknown flip-flop \"{name}\""))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                cone.sort_unstable();
                Ok(ClockBuffer {
                    id: BufferId(b.id),
                    stage: b.stage,
                    parent: b.parent.map(BufferId),
                    cone,
                })
            })
            .collect::<Result<Vec<_>, ClockTreeError>>()?;
        let tree = ClockTree {
            ffs: doc.ffs,
            buffers,
            stages: doc.stages,
            min_fanout: doc.min_fanout,
            grouping: doc.grouping,
        };
        tree.check()?;
        Ok(tree)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BufferDoc {
    id: usize,
    stage: usize,
    parent: Option<usize>,
    cone: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeDoc {
    min_fanout: usize,
    grouping: Grouping,
    prng: String,
    stages: usize,
    ffs: Vec<String>,
    buffers: Vec<BufferDoc>,
}
