//! Binary space partition over Re(x₁).
//!
//! The tree is built level by level, one full stream pass per level. A node
//! with threshold `t` sends `Re(x₁) < t` left and `Re(x₁) ≥ t` right; bit 1 in
//! a node's mask means the point went right.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use bitvec::prelude::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::interval::RealInterval;
use crate::stream::{SolutionStream, StreamCounters, StreamError};

pub type Mask = BitVec<u64, Lsb0>;

#[derive(Debug, Error)]
pub enum BspError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("invalid build configuration: {0}")]
    Config(String),
    #[error("median splits need an in-memory stream")]
    MedianNeedsMemory,
    #[error("tree was built without bitmasks")]
    NoBitmask,
    #[error("tree covers {tree} candidates but the stream has {stream}")]
    SizeMismatch { tree: u64, stream: u64 },
    #[error("prescribed split for `{0}` names a candidate outside that node")]
    PrescribedOutside(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitStrategy {
    Mean,
    Median,
    Random { seed: u64 },
    /// Split point per node path (`""` is the root, `"01"` its left-right
    /// grandchild), given as a candidate index. Unlisted nodes use the mean.
    Prescribed(BTreeMap<String, u64>),
}

impl SplitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SplitStrategy::Mean => "mean",
            SplitStrategy::Median => "median",
            SplitStrategy::Random { .. } => "random",
            SplitStrategy::Prescribed(_) => "prescribed",
        }
    }
}

impl FromStr for SplitStrategy {
    type Err = String;

    /// `mean`, `median`, `random`, `random:<seed>`, or
    /// `prescribed:r=0,r0=1,r01=2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "mean" => Ok(SplitStrategy::Mean),
            "median" => Ok(SplitStrategy::Median),
            "random" if arg.is_empty() => Ok(SplitStrategy::Random { seed: 0 }),
            "random" => arg
                .parse()
                .map(|seed| SplitStrategy::Random { seed })
                .map_err(|_| format!("bad random seed `{arg}`")),
            "prescribed" => {
                let mut map = BTreeMap::new();
                for item in arg.split(',').filter(|x| !x.is_empty()) {
                    let (k, v) = item
                        .split_once('=')
                        .ok_or_else(|| format!("expected path=index, got `{item}`"))?;
                    let path = k
                        .strip_prefix(['r', 'R'])
                        .filter(|p| p.bytes().all(|b| b == b'0' || b == b'1'))
                        .ok_or_else(|| format!("bad node path `{k}`"))?;
                    let idx = v.parse().map_err(|_| format!("bad candidate index `{v}`"))?;
                    map.insert(path.to_string(), idx);
                }
                Ok(SplitStrategy::Prescribed(map))
            }
            _ => Err(format!(
                "unknown strategy `{s}` (expected mean, median, random or prescribed)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub k: u64,
    pub epsilon: f64,
    pub strategy: SplitStrategy,
    pub bitmask: bool,
    pub depth_cap: u32,
    /// A-priori Re of the root split point. Saves the survey pass.
    pub root_split: Option<f64>,
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            k: 64,
            epsilon: DEFAULT_EPSILON,
            strategy: SplitStrategy::Mean,
            bitmask: true,
            depth_cap: 64,
            root_split: None,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<(), BspError> {
        if self.k == 0 {
            return Err(BspError::Config("k must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(BspError::Config("epsilon must be positive and finite".into()));
        }
        if matches!(self.root_split, Some(z) if !z.is_finite()) {
            return Err(BspError::Config("root split must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FinalReason {
    Small,
    Unsplittable,
    DepthCap,
}

impl FinalReason {
    pub fn name(self) -> &'static str {
        match self {
            FinalReason::Small => "small",
            FinalReason::Unsplittable => "unsplittable",
            FinalReason::DepthCap => "depth_cap",
        }
    }
}

/// Position of a leaf in left-to-right (slab) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafId(pub usize);

/// `[lo, hi)` in Re(x₁); either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub lo: f64,
    pub hi: f64,
}

impl Slab {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal {
        threshold: f64,
        /// Re of the split point; the threshold sits ε below it.
        split_re: f64,
        mask: Option<Mask>,
        left: usize,
        right: usize,
    },
    Leaf {
        id: LeafId,
        slab: Slab,
        reason: FinalReason,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Directions from the root, `0` left and `1` right.
    pub path: String,
    pub count: u64,
    pub kind: NodeKind,
}

impl Node {
    pub fn depth(&self) -> usize {
        self.path.len()
    }
}

/// Counters gathered while building.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildCounters {
    pub passes: u64,
    pub next_calls: u64,
    pub bit_lookups: u64,
    pub comparisons: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BspTree {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    pub d: u64,
    pub n: usize,
    pub config: BuildConfig,
    pub build: BuildCounters,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStats {
    pub m: usize,
    pub height: usize,
    pub bitmask_bits: u64,
    pub internal_nodes: usize,
    pub oversized_leaves: usize,
    pub max_leaf_count: u64,
}

/// Largest double not above `z − ε`, so `z` itself lies on the right.
pub fn threshold_below(z: f64, eps: f64) -> f64 {
    let s = z - eps;
    // TwoSum: s + e == z − ε exactly
    let bp = s - z;
    let e = (z - (s - bp)) + (-eps - bp);
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[derive(Debug)]
struct Stats {
    count: u64,
    min: f64,
    max: f64,
    sum: f64,
    comp: f64,
    seen: u64,
    sample: Option<f64>,
    values: Vec<f64>,
    prescribed_index: Option<u64>,
    prescribed: Option<f64>,
    rng: Option<ChaCha8Rng>,
}

impl Stats {
    fn new(node: usize, cfg: &BuildConfig, path: &str) -> Self {
        let rng = match cfg.strategy {
            SplitStrategy::Random { seed } => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(node as u64);
                Some(r)
            }
            _ => None,
        };
        let prescribed_index = match &cfg.strategy {
            SplitStrategy::Prescribed(map) => map.get(path).copied(),
            _ => None,
        };
        Self {
            count: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
            seen: 0,
            sample: None,
            values: Vec::new(),
            prescribed_index,
            prescribed: None,
            rng,
        }
    }

    fn add(&mut self, x: f64, index: u64, collect: bool) {
        self.count += 1;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        // Neumaier summation
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        if let Some(rng) = &mut self.rng {
            self.seen += 1;
            if rng.gen_range(0..self.seen) == 0 {
                self.sample = Some(x);
            }
        }
        if collect {
            self.values.push(x);
        }
        if self.prescribed_index == Some(index) {
            self.prescribed = Some(x);
        }
    }

    fn mean(&self) -> f64 {
        ((self.sum + self.comp) / self.count as f64).clamp(self.min, self.max)
    }
}

enum Decision {
    Leaf(FinalReason),
    Split { threshold: f64, split_re: f64 },
}

fn decide(
    stats: &mut Stats,
    path: &str,
    cfg: &BuildConfig,
    root_split: Option<f64>,
) -> Result<Decision, BspError> {
    let eps = cfg.epsilon;
    if stats.prescribed_index.is_some() || root_split.is_some() {
        let z = match root_split {
            Some(z) => z,
            None => stats
                .prescribed
                .ok_or_else(|| BspError::PrescribedOutside(format!("R{path}")))?,
        };
        if stats.count <= 1 && root_split.is_none() {
            return Ok(Decision::Leaf(FinalReason::Small));
        }
        if path.len() as u32 >= cfg.depth_cap {
            return Ok(Decision::Leaf(FinalReason::DepthCap));
        }
        return Ok(Decision::Split {
            threshold: threshold_below(z, eps),
            split_re: z,
        });
    }
    if stats.count <= cfg.k {
        return Ok(Decision::Leaf(FinalReason::Small));
    }
    if path.len() as u32 >= cfg.depth_cap {
        return Ok(Decision::Leaf(FinalReason::DepthCap));
    }
    // a split cannot clear its own ε-collar
    if stats.max - stats.min <= 2.0 * eps {
        return Ok(Decision::Leaf(FinalReason::Unsplittable));
    }
    let z = match &cfg.strategy {
        SplitStrategy::Mean | SplitStrategy::Prescribed(_) => stats.mean(),
        SplitStrategy::Random { .. } => stats.sample.unwrap_or(stats.max),
        SplitStrategy::Median => {
            let v = &mut stats.values;
            // the split point goes right, so the upper median halves the node
            let mid = v.len() / 2;
            *v.select_nth_unstable_by(mid, f64::total_cmp).1
        }
    };
    let t = threshold_below(z, eps);
    if t <= stats.min {
        // left side would be empty; the maximum always separates
        let z = stats.max;
        return Ok(Decision::Split {
            threshold: threshold_below(z, eps),
            split_re: z,
        });
    }
    Ok(Decision::Split {
        threshold: t,
        split_re: z,
    })
}

fn placeholder_leaf() -> NodeKind {
    NodeKind::Leaf {
        id: LeafId(usize::MAX),
        slab: Slab {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        },
        reason: FinalReason::Small,
    }
}

/// Builds the tree with one stream pass per level.
///
/// Without `root_split` an extra survey pass gathers the root statistics,
/// so the build costs `d·(height + 1)` next calls instead of `d·height`.
pub fn build_tree(stream: &mut dyn SolutionStream, cfg: &BuildConfig) -> Result<BspTree, BspError> {
    cfg.validate()?;
    if matches!(cfg.strategy, SplitStrategy::Median) && !stream.is_in_memory() {
        return Err(BspError::MedianNeedsMemory);
    }
    let collect = matches!(cfg.strategy, SplitStrategy::Median);
    let d = stream.len();
    let start = stream.counters();
    let mut counters = BuildCounters::default();
    let mut nodes = vec![Node {
        path: String::new(),
        count: d,
        kind: placeholder_leaf(),
    }];
    let mut warnings = Vec::new();

    let mut root_stats = Stats::new(0, cfg, "");
    root_stats.count = d;
    let mut root_split = None;
    if d > cfg.k || root_stats.prescribed_index.is_some() {
        match cfg.root_split {
            Some(z) => root_split = Some(z),
            None => {
                let mut s = Stats::new(0, cfg, "");
                stream.reset()?;
                counters.passes += 1;
                loop {
                    let idx = stream.position();
                    let Some(p) = stream.next_point()? else { break };
                    s.add(p[0].re, idx, collect);
                }
                root_stats = s;
            }
        }
    }

    // frontier: nodes whose counts and statistics are known but undecided
    let mut frontier: Vec<(usize, Stats)> = vec![(0, root_stats)];
    let mut first = true;
    loop {
        let mut fresh: Vec<usize> = Vec::new();
        let mut children: Vec<(usize, Stats)> = Vec::new();
        for (idx, mut stats) in frontier.drain(..) {
            let path = nodes[idx].path.clone();
            let rs = if first { root_split } else { None };
            match decide(&mut stats, &path, cfg, rs)? {
                Decision::Leaf(reason) => {
                    if reason == FinalReason::DepthCap {
                        warnings.push(format!(
                            "leaf R{path} hit the depth cap with {} candidates",
                            stats.count
                        ));
                    }
                    nodes[idx].kind = NodeKind::Leaf {
                        id: LeafId(usize::MAX),
                        slab: Slab {
                            lo: f64::NEG_INFINITY,
                            hi: f64::INFINITY,
                        },
                        reason,
                    };
                }
                Decision::Split {
                    threshold,
                    split_re,
                } => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    for (c, side) in [(l, '0'), (r, '1')] {
                        let cpath = format!("{path}{side}");
                        children.push((c, Stats::new(c, cfg, &cpath)));
                        nodes.push(Node {
                            path: cpath,
                            count: 0,
                            kind: placeholder_leaf(),
                        });
                    }
                    nodes[idx].kind = NodeKind::Internal {
                        threshold,
                        split_re,
                        mask: cfg.bitmask.then(Mask::new),
                        left: l,
                        right: r,
                    };
                    fresh.push(idx);
                }
            }
        }
        first = false;
        if fresh.is_empty() {
            break;
        }

        // routing pass
        let mut is_fresh = vec![false; nodes.len()];
        for &f in &fresh {
            is_fresh[f] = true;
        }
        let mut slot = vec![usize::MAX; nodes.len()];
        for (i, (c, _)) in children.iter().enumerate() {
            slot[*c] = i;
        }
        let mut cursor = vec![0usize; nodes.len()];
        stream.reset()?;
        counters.passes += 1;
        loop {
            let idx = stream.position();
            let Some(p) = stream.next_point()? else { break };
            let x = p[0].re;
            let mut at = 0usize;
            loop {
                let NodeKind::Internal {
                    threshold,
                    mask,
                    left,
                    right,
                    ..
                } = &mut nodes[at].kind
                else {
                    break;
                };
                let go_right = if is_fresh[at] {
                    counters.comparisons += 1;
                    let b = x >= *threshold;
                    if let Some(m) = mask {
                        m.push(b);
                    }
                    b
                } else if let Some(m) = mask {
                    counters.bit_lookups += 1;
                    let b = m[cursor[at]];
                    cursor[at] += 1;
                    b
                } else {
                    counters.comparisons += 1;
                    x >= *threshold
                };
                at = if go_right { *right } else { *left };
            }
            if slot[at] != usize::MAX {
                children[slot[at]].1.add(x, idx, collect);
            }
        }
        for (c, stats) in &children {
            nodes[*c].count = stats.count;
        }
        frontier = children;
    }

    let end = stream.counters();
    counters.next_calls = end.next_calls - start.next_calls;
    stream.reset()?;

    let mut tree = BspTree {
        nodes,
        leaves: Vec::new(),
        d,
        n: stream.dim(),
        config: cfg.clone(),
        build: counters,
        warnings,
    };
    tree.assign_leaves();
    Ok(tree)
}

impl BspTree {
    /// A tree with a single leaf covering everything.
    pub fn single_leaf(d: u64, n: usize, config: BuildConfig) -> Self {
        let mut t = BspTree {
            nodes: vec![Node {
                path: String::new(),
                count: d,
                kind: placeholder_leaf(),
            }],
            leaves: Vec::new(),
            d,
            n,
            config,
            build: BuildCounters::default(),
            warnings: Vec::new(),
        };
        if d > t.config.k {
            if let NodeKind::Leaf { reason, .. } = &mut t.nodes[0].kind {
                *reason = FinalReason::DepthCap;
            }
        }
        t.assign_leaves();
        t
    }

    fn assign_leaves(&mut self) {
        let mut stack = vec![(0usize, f64::NEG_INFINITY, f64::INFINITY)];
        let mut order = Vec::new();
        // in-order via explicit stack: push right then left
        while let Some((i, lo, hi)) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Internal {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    stack.push((right, threshold, hi));
                    stack.push((left, lo, threshold));
                }
                NodeKind::Leaf { .. } => {
                    let id = LeafId(order.len());
                    if let NodeKind::Leaf { id: lid, slab, .. } = &mut self.nodes[i].kind {
                        *lid = id;
                        *slab = Slab { lo, hi };
                    }
                    order.push(i);
                }
            }
        }
        self.leaves = order;
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = LeafId> + '_ {
        (0..self.leaves.len()).map(LeafId)
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_node(&self, id: LeafId) -> &Node {
        &self.nodes[self.leaves[id.0]]
    }

    pub fn leaf_count(&self, id: LeafId) -> u64 {
        self.leaf_node(id).count
    }

    pub fn slab(&self, id: LeafId) -> Slab {
        match self.leaf_node(id).kind {
            NodeKind::Leaf { slab, .. } => slab,
            NodeKind::Internal { .. } => unreachable!("leaf table points at a leaf"),
        }
    }

    pub fn reason(&self, id: LeafId) -> FinalReason {
        match self.leaf_node(id).kind {
            NodeKind::Leaf { reason, .. } => reason,
            NodeKind::Internal { .. } => unreachable!("leaf table points at a leaf"),
        }
    }

    /// `R` followed by the path, e.g. `R010`.
    pub fn leaf_name(&self, id: LeafId) -> String {
        format!("R{}", self.leaf_node(id).path)
    }

    pub fn leaf_by_name(&self, name: &str) -> Option<LeafId> {
        let path = name.strip_prefix('R')?;
        self.leaf_ids().find(|&l| self.leaf_node(l).path == path)
    }

    pub fn has_bitmasks(&self) -> bool {
        self.config.bitmask
    }

    /// Descends by threshold comparisons; returns the leaf and the number of
    /// comparisons made.
    pub fn locate_counted(&self, p: &[Complex64]) -> (LeafId, u64) {
        let x = p[0].re;
        let mut at = 0;
        let mut cmp = 0;
        loop {
            match &self.nodes[at].kind {
                NodeKind::Internal {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    cmp += 1;
                    at = if x < *threshold { *left } else { *right };
                }
                NodeKind::Leaf { id, .. } => return (*id, cmp),
            }
        }
    }

    pub fn locate_leaf(&self, p: &[Complex64]) -> LeafId {
        self.locate_counted(p).0
    }

    /// `slab.lo ≤ r.lo` and `r.hi < slab.hi`, skipping infinite bounds;
    /// also returns the number of comparisons made.
    pub fn slab_contains_counted(&self, leaf: LeafId, r: &RealInterval) -> (bool, u64) {
        let s = self.slab(leaf);
        let mut cmp = 0;
        if s.lo.is_finite() {
            cmp += 1;
            if !(s.lo <= r.lo()) {
                return (false, cmp);
            }
        }
        if s.hi.is_finite() {
            cmp += 1;
            if !(r.hi() < s.hi) {
                return (false, cmp);
            }
        }
        (true, cmp)
    }

    pub fn slab_contains(&self, leaf: LeafId, r: &RealInterval) -> bool {
        self.slab_contains_counted(leaf, r).0
    }

    pub fn stats(&self) -> TreeStats {
        let mut s = TreeStats {
            m: self.leaves.len(),
            height: 0,
            bitmask_bits: 0,
            internal_nodes: 0,
            oversized_leaves: 0,
            max_leaf_count: 0,
        };
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Internal { mask, .. } => {
                    s.internal_nodes += 1;
                    s.bitmask_bits += mask.as_ref().map_or(0, |m| m.len() as u64);
                }
                NodeKind::Leaf { .. } => {
                    s.height = s.height.max(node.depth());
                    s.max_leaf_count = s.max_leaf_count.max(node.count);
                    if node.count > self.config.k {
                        s.oversized_leaves += 1;
                    }
                }
            }
        }
        s
    }

    /// Internal nodes on the way to `leaf`, with the direction taken.
    pub fn path_to(&self, leaf: LeafId) -> Vec<(usize, bool)> {
        let path = &self.leaf_node(leaf).path;
        let mut at = 0;
        let mut out = Vec::with_capacity(path.len());
        for c in path.bytes() {
            let go_right = c == b'1';
            out.push((at, go_right));
            if let NodeKind::Internal { left, right, .. } = self.nodes[at].kind {
                at = if go_right { right } else { left };
            }
        }
        out
    }

    /// Preorder text dump, one node per line.
    pub fn dump(&self) -> String {
        self.dump_with_members(None)
    }

    /// As [`BspTree::dump`], appending `{i,j,…}` member lists to leaves
    /// when `members[leaf]` is given.
    pub fn dump_with_members(&self, members: Option<&[Vec<u64>]>) -> String {
        let mut out = String::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            match &node.kind {
                NodeKind::Internal {
                    threshold,
                    mask,
                    left,
                    right,
                    ..
                } => {
                    let m = mask.as_ref().map_or_else(|| "-".to_string(), mask_string);
                    let _ = writeln!(out, "N {threshold} {m}");
                    stack.push(*right);
                    stack.push(*left);
                }
                NodeKind::Leaf { id, slab, reason } => {
                    let _ = write!(
                        out,
                        "L R{} {} [{},{}) {}",
                        node.path,
                        node.count,
                        slab.lo,
                        slab.hi,
                        reason.name()
                    );
                    if let Some(mem) = members.and_then(|m| m.get(id.0)) {
                        let list: Vec<String> = mem.iter().map(u64::to_string).collect();
                        let _ = write!(out, " {{{}}}", list.join(","));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Candidate indices per leaf, by one threshold-routed pass.
    pub fn members(&self, stream: &mut dyn SolutionStream) -> Result<Vec<Vec<u64>>, BspError> {
        self.check_stream(stream)?;
        let mut out = vec![Vec::new(); self.leaves.len()];
        stream.reset()?;
        loop {
            let i = stream.position();
            let Some(p) = stream.next_point()? else { break };
            out[self.locate_leaf(p).0].push(i);
        }
        stream.reset()?;
        Ok(out)
    }

    pub fn check_stream(&self, stream: &dyn SolutionStream) -> Result<(), BspError> {
        if stream.len() != self.d {
            return Err(BspError::SizeMismatch {
                tree: self.d,
                stream: stream.len(),
            });
        }
        Ok(())
    }
}

pub fn mask_string(m: &Mask) -> String {
    m.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

impl fmt::Display for BspTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Yields the candidates of one leaf by walking the cached bitmasks from
/// the root. The base stream is only asked for members; everything else is
/// skipped with `advance_by`.
pub struct MaskedLeafStream<'a> {
    base: &'a mut dyn SolutionStream,
    path: Vec<(&'a Mask, bool)>,
    cursors: Vec<usize>,
    scan: u64,
    len: u64,
    taken: u64,
    n: usize,
    pub bit_lookups: u64,
    counters: StreamCounters,
}

impl<'a> MaskedLeafStream<'a> {
    pub fn new(
        base: &'a mut dyn SolutionStream,
        tree: &'a BspTree,
        leaf: LeafId,
    ) -> Result<Self, BspError> {
        tree.check_stream(base)?;
        let mut path = Vec::new();
        for (node, dir) in tree.path_to(leaf) {
            match &tree.nodes[node].kind {
                NodeKind::Internal { mask: Some(m), .. } => path.push((m, dir)),
                _ => return Err(BspError::NoBitmask),
            }
        }
        base.reset()?;
        Ok(Self {
            n: base.dim(),
            cursors: vec![0; path.len()],
            path,
            scan: 0,
            len: tree.leaf_count(leaf),
            taken: 0,
            base,
            bit_lookups: 0,
            counters: StreamCounters::default(),
        })
    }

    // Next member at or after `scan`, by bits alone.
    fn find_member(&mut self) -> Option<u64> {
        let d = self.base.len();
        while self.scan < d {
            let p = self.scan;
            self.scan += 1;
            let mut member = true;
            for (depth, (mask, dir)) in self.path.iter().enumerate() {
                self.bit_lookups += 1;
                let b = mask[self.cursors[depth]];
                self.cursors[depth] += 1;
                if b != *dir {
                    member = false;
                    break;
                }
            }
            if member {
                return Some(p);
            }
        }
        None
    }

    pub fn base_counters(&self) -> StreamCounters {
        self.base.counters()
    }
}

impl SolutionStream for MaskedLeafStream<'_> {
    fn len(&self) -> u64 {
        self.len
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn position(&self) -> u64 {
        self.taken
    }

    fn next_point(&mut self) -> Result<Option<&[Complex64]>, StreamError> {
        if self.taken == self.len {
            return Ok(None);
        }
        let Some(p) = self.find_member() else {
            return Ok(None);
        };
        let gap = p - self.base.position();
        self.base.advance_by(gap)?;
        self.taken += 1;
        self.counters.next_calls += 1;
        self.base.next_point()
    }

    fn reset(&mut self) -> Result<(), StreamError> {
        self.base.reset()?;
        self.cursors.fill(0);
        self.scan = 0;
        self.taken = 0;
        Ok(())
    }

    fn advance_by(&mut self, n: u64) -> Result<(), StreamError> {
        if n > self.len - self.taken {
            return Err(StreamError::Overrun {
                requested: n,
                remaining: self.len - self.taken,
            });
        }
        for _ in 0..n {
            self.find_member();
        }
        self.taken += n;
        self.counters.advance_steps += n;
        Ok(())
    }

    fn counters(&self) -> StreamCounters {
        self.counters
    }

    fn fork(&self) -> Result<Box<dyn SolutionStream>, StreamError> {
        Err(StreamError::NotForkable)
    }
}

/// Index of the base candidate that `MaskedLeafStream` would yield at each
/// step, computed without reading points.
pub fn leaf_member_indices(tree: &BspTree, leaf: LeafId) -> Result<Vec<u64>, BspError> {
    let mut path = Vec::new();
    for (node, dir) in tree.path_to(leaf) {
        match &tree.nodes[node].kind {
            NodeKind::Internal { mask: Some(m), .. } => path.push((m, dir)),
            _ => return Err(BspError::NoBitmask),
        }
    }
    let mut cursors = vec![0usize; path.len()];
    let mut out = Vec::new();
    'points: for p in 0..tree.d {
        for (depth, (mask, dir)) in path.iter().enumerate() {
            let b = mask[cursors[depth]];
            cursors[depth] += 1;
            if b != *dir {
                continue 'points;
            }
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::parse_generator;
    use crate::stream::{GeneratorStream, InMemoryStream};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn stream(re: &[f64]) -> InMemoryStream {
        InMemoryStream::new(1, re.iter().map(|&x| vec![c(x, 0.0)]).collect()).unwrap()
    }

    fn fig1() -> InMemoryStream {
        let p = [
            c(1.8, 0.0),
            c(-1.2, 1.4),
            c(0.5, 0.0),
            c(-2.2, 0.0),
            c(-1.2, -1.4),
            c(3.2, 1.1),
            c(3.2, -1.1),
            c(-0.6, 0.0),
        ];
        InMemoryStream::new(1, p.iter().map(|&z| vec![z]).collect()).unwrap()
    }

    fn fig1_cfg() -> BuildConfig {
        BuildConfig {
            k: 3,
            epsilon: 0.1,
            strategy: "prescribed:r=0,r0=1,r1=5,r01=2".parse().unwrap(),
            ..BuildConfig::default()
        }
    }

    #[test]
    fn figure_one_masks_and_leaves() {
        let mut s = fig1();
        let tree = build_tree(&mut s, &fig1_cfg()).unwrap();
        let members = tree.members(&mut s).unwrap();
        let dump = tree.dump_with_members(Some(&members));
        let expected = "\
N 1.7 10000110
N -1.3 11011
L R00 1 [-inf,-1.3) small {3}
N 0.39999999999999997 0100
L R010 3 [-1.3,0.39999999999999997) small {1,4,7}
L R011 1 [0.39999999999999997,1.7) small {2}
N 3.1 011
L R10 1 [1.7,3.1) small {0}
L R11 2 [3.1,inf) small {5,6}
";
        assert_eq!(dump, expected);
        let st = tree.stats();
        assert_eq!((st.m, st.internal_nodes, st.bitmask_bits, st.height), (5, 4, 20, 3));
    }

    #[test]
    fn figure_one_masked_streams() {
        let mut s = fig1();
        let tree = build_tree(&mut s, &fig1_cfg()).unwrap();
        let leaf = tree.leaf_by_name("R010").unwrap();
        let mut m = MaskedLeafStream::new(&mut s, &tree, leaf).unwrap();
        let mut got = Vec::new();
        while let Some(p) = m.next_point().unwrap() {
            got.push(p[0]);
        }
        assert_eq!(got, vec![c(-1.2, 1.4), c(-1.2, -1.4), c(-0.6, 0.0)]);
        assert!(m.bit_lookups <= 8 * 3);
        assert_eq!(m.base_counters().next_calls - tree.build.next_calls, 3);

        let leaf = tree.leaf_by_name("R10").unwrap();
        assert_eq!(leaf_member_indices(&tree, leaf).unwrap(), vec![0]);
        assert_eq!(tree.locate_leaf(&[c(-2.2, 0.0)]), tree.leaf_by_name("R00").unwrap());
    }

    #[test]
    fn mean_split_on_four_points() {
        let mut s = stream(&[0.0, 1.0, 2.0, 3.0]);
        let cfg = BuildConfig {
            k: 3,
            epsilon: 0.1,
            ..BuildConfig::default()
        };
        let tree = build_tree(&mut s, &cfg).unwrap();
        let NodeKind::Internal {
            threshold,
            split_re,
            ..
        } = tree.root().kind
        else {
            panic!("root should split");
        };
        assert_eq!(split_re, 1.5);
        assert_eq!(threshold, 1.4);
        assert_eq!(tree.stats().height, 1);
        assert_eq!(tree.members(&mut s).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        // survey pass plus one level pass
        assert_eq!(tree.build.next_calls, 8);
    }

    #[test]
    fn a_priori_root_split_saves_the_survey() {
        let mut s = stream(&[0.0, 1.0, 2.0, 3.0]);
        let cfg = BuildConfig {
            k: 3,
            epsilon: 0.1,
            root_split: Some(1.5),
            ..BuildConfig::default()
        };
        let tree = build_tree(&mut s, &cfg).unwrap();
        assert_eq!(tree.build.next_calls, 4 * tree.stats().height as u64);
    }

    #[test]
    fn conjugate_tower_is_unsplittable() {
        let pts = (0..10).map(|i| vec![c(0.0, i as f64 - 5.0)]).collect();
        let mut s = InMemoryStream::new(1, pts).unwrap();
        let tree = build_tree(&mut s, &BuildConfig { k: 2, ..BuildConfig::default() }).unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.reason(LeafId(0)), FinalReason::Unsplittable);
        assert_eq!(tree.leaf_count(LeafId(0)), 10);
    }

    #[test]
    fn empty_left_side_retries_with_maximum() {
        // mean 0.1 sits within ε of the minimum
        let mut v = vec![0.0; 9];
        v.push(1.0);
        let mut s = stream(&v);
        let cfg = BuildConfig { k: 5, epsilon: 0.2, ..BuildConfig::default() };
        let tree = build_tree(&mut s, &cfg).unwrap();
        let NodeKind::Internal { split_re, .. } = tree.root().kind else { panic!() };
        assert_eq!(split_re, 1.0);
        assert_eq!(tree.leaf_count(LeafId(0)), 9);
        assert_eq!(tree.reason(LeafId(0)), FinalReason::Unsplittable);
    }

    #[test]
    fn locate_ties_go_right_and_slab_rules() {
        let mut s = stream(&[0.0, 1.0, 2.0, 3.0]);
        let tree = build_tree(&mut s, &BuildConfig { k: 3, epsilon: 0.1, ..Default::default() }).unwrap();
        assert_eq!(tree.locate_leaf(&[c(1.4, 0.0)]), LeafId(1));
        assert_eq!(tree.locate_leaf(&[c(1.3999, 0.0)]), LeafId(0));
        let r = |lo, hi| RealInterval::new(lo, hi).unwrap();
        assert!(tree.slab_contains(LeafId(0), &r(0.99, 1.01)));
        assert_eq!(tree.slab_contains_counted(LeafId(0), &r(0.99, 1.01)).1, 1);
        assert!(!tree.slab_contains(LeafId(1), &r(1.39, 1.5)));
        assert!(tree.slab_contains(LeafId(1), &r(1.4, 1.4)));
        assert!(!tree.slab_contains(LeafId(0), &r(1.3, 1.4)));
    }

    #[test]
    fn single_leaf_behaviour() {
        let mut s = stream(&[5.0, 6.0]);
        let tree = build_tree(&mut s, &BuildConfig { k: 8, ..Default::default() }).unwrap();
        let st = tree.stats();
        assert_eq!((st.m, st.height, st.bitmask_bits), (1, 0, 0));
        assert_eq!(tree.build.next_calls, 0);
        assert_eq!(tree.locate_leaf(&[c(-1e300, 0.0)]), LeafId(0));
        let mut m = MaskedLeafStream::new(&mut s, &tree, LeafId(0)).unwrap();
        assert_eq!(m.next_point().unwrap().unwrap()[0].re, 5.0);
        assert_eq!(m.next_point().unwrap().unwrap()[0].re, 6.0);
        assert!(m.next_point().unwrap().is_none());
    }

    #[test]
    fn perfect_tree_stats() {
        let mut s = GeneratorStream::new(parse_generator("grid:d=1024,n=1").unwrap());
        let tree = build_tree(&mut s, &BuildConfig { k: 64, ..Default::default() }).unwrap();
        let st = tree.stats();
        assert_eq!((st.m, st.height, st.bitmask_bits), (16, 4, 4096));
        assert_eq!(tree.build.next_calls, 1024 * 5);
    }

    #[test]
    fn median_needs_memory() {
        let mut s = GeneratorStream::new(parse_generator("grid:d=10,n=1").unwrap());
        let cfg = BuildConfig { k: 2, strategy: SplitStrategy::Median, ..Default::default() };
        assert!(matches!(build_tree(&mut s, &cfg), Err(BspError::MedianNeedsMemory)));
        let mut m = stream(&(0..10).map(f64::from).collect::<Vec<_>>());
        let tree = build_tree(&mut m, &cfg).unwrap();
        assert!(tree.stats().max_leaf_count <= 2);
    }

    #[test]
    fn no_bitmask_masked_stream_is_an_error() {
        let mut s = stream(&[0.0, 1.0, 2.0, 3.0]);
        let cfg = BuildConfig { k: 1, bitmask: false, ..Default::default() };
        let tree = build_tree(&mut s, &cfg).unwrap();
        assert!(matches!(
            MaskedLeafStream::new(&mut s, &tree, LeafId(0)),
            Err(BspError::NoBitmask)
        ));
        assert!(tree.dump().contains(" -\n"));
    }

    #[test]
    fn threshold_is_nearest_below() {
        assert_eq!(threshold_below(1.8, 0.1), 1.7);
        for (z, e) in [(1.0, 1e-6), (-3.3, 0.1), (1e10, 1e-6), (0.0, 1e-300)] {
            let t = threshold_below(z, e);
            let q = |x: f64| num_rational::BigRational::from_float(x).unwrap();
            assert!(q(t) <= q(z) - q(e));
            assert!(q(t.next_up()) > q(z) - q(e));
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("mean".parse::<SplitStrategy>().unwrap(), SplitStrategy::Mean);
        assert_eq!("random:9".parse::<SplitStrategy>().unwrap(), SplitStrategy::Random { seed: 9 });
        assert!("prescribed:x=1".parse::<SplitStrategy>().is_err());
        assert!("spiral".parse::<SplitStrategy>().is_err());
        assert!(BuildConfig { k: 0, ..Default::default() }.validate().is_err());
        assert!(BuildConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn depth_cap_flags_leaves() {
        let mut s = stream(&(0..64).map(f64::from).collect::<Vec<_>>());
        let cfg = BuildConfig { k: 1, depth_cap: 2, ..Default::default() };
        let tree = build_tree(&mut s, &cfg).unwrap();
        assert_eq!(tree.stats().height, 2);
        assert!(tree.leaf_ids().all(|l| tree.reason(l) == FinalReason::DepthCap));
        assert!(!tree.warnings.is_empty());
    }
}
