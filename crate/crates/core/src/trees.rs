//! Context trees over a bounded-depth tree space.
//!
//! A [`Context`] is a node label. Labels print oldest symbol first (`"011"`
//! is oldest 0, then 1, then the most recent 1), but are stored most recent
//! first: the child `k·s` of `s` is `s` with `k` appended to the stored
//! vector, and the derived ordering is a depth-first preorder of the trie.
//!
//! Nodes of the maximal tree are addressed by a heap-style index rooted at
//! 0, where the child step from node `i` along symbol `k` is `i·m + 1 + k`
//! and the first step from the root consumes the most recent symbol.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbols::Alphabet;

/// Default guard on the number of nodes of the maximal tree.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// Default guard on the number of trees produced by [`enumerate_trees`].
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 1_000_000;

/// Label used for the empty context in files and reports.
pub const ROOT_LABEL: &str = "λ";

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("tree space m={m}, L={depth} needs {nodes} nodes, budget is {budget}")]
    NodeBudget {
        m: usize,
        depth: usize,
        nodes: String,
        budget: usize,
    },

    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),

    #[error("empty leaf set")]
    EmptyLeafSet,

    #[error("duplicate leaf {0}")]
    DuplicateLeaf(String),

    #[error("leaf {leaf} is longer than the maximal depth {depth}")]
    DepthOverflow { leaf: String, depth: usize },

    #[error("leaf {leaf} uses a symbol outside 0..{m}")]
    SymbolOutOfRange { leaf: String, m: usize },

    #[error("{suffix} is a suffix of {leaf}")]
    SuffixViolation { suffix: String, leaf: String },

    #[error("inner node {node} is missing child {child}")]
    MissingChild { node: String, child: String },

    #[error("past of length {got} is shorter than the tree depth {needed}")]
    PastTooShort { needed: usize, got: usize },

    #[error("tree space holds {count} trees, enumeration limit is {limit}")]
    TooManyTrees { count: String, limit: u128 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<TreeError>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// The set `T_L` of full rooted trees of depth at most `L` over `m` symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpace {
    m: usize,
    depth: usize,
    node_count: usize,
}

impl TreeSpace {
    pub fn new(m: usize, depth: usize) -> Result<Self, TreeError> {
        Self::with_node_budget(m, depth, DEFAULT_NODE_BUDGET)
    }

    pub fn with_node_budget(m: usize, depth: usize, budget: usize) -> Result<Self, TreeError> {
        if m < 2 {
            return Err(TreeError::AlphabetTooSmall(m));
        }
        let over = |nodes: String| TreeError::NodeBudget {
            m,
            depth,
            nodes,
            budget,
        };
        // (m^(L+1) - 1) / (m - 1), accumulated level by level.
        let mut total: usize = 0;
        let mut level: usize = 1;
        for d in 0..=depth {
            total = total
                .checked_add(level)
                .ok_or_else(|| over("more than usize::MAX".into()))?;
            if total > budget {
                return Err(over(format!("at least {total}")));
            }
            if d < depth {
                level = level
                    .checked_mul(m)
                    .ok_or_else(|| over("more than usize::MAX".into()))?;
            }
        }
        Ok(Self {
            m,
            depth,
            node_count: total,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The maximal depth `L`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of nodes of the maximal tree.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Index of the first node at depth `d`.
    pub fn level_offset(&self, d: usize) -> usize {
        let mut offset = 0;
        let mut level = 1;
        for _ in 0..d {
            offset += level;
            level *= self.m;
        }
        offset
    }

    /// Indices of the nodes at depth exactly `L`.
    pub fn leaf_range(&self) -> std::ops::Range<usize> {
        self.level_offset(self.depth)..self.node_count
    }

    pub fn is_max_depth(&self, index: usize) -> bool {
        index >= self.level_offset(self.depth)
    }

    /// First child index of an inner node; children occupy `m` consecutive slots.
    pub fn first_child(&self, index: usize) -> usize {
        index * self.m + 1
    }

    pub fn index_of(&self, ctx: &Context) -> Option<usize> {
        if ctx.len() > self.depth {
            return None;
        }
        let mut i = 0usize;
        for &k in ctx.recent_first() {
            if k as usize >= self.m {
                return None;
            }
            i = i * self.m + 1 + k as usize;
        }
        Some(i)
    }

    /// Panics if `index` is outside the maximal tree.
    pub fn context_at(&self, index: usize) -> Context {
        assert!(index < self.node_count, "node index {index} out of range");
        let mut oldest_first = Vec::new();
        let mut i = index;
        while i > 0 {
            oldest_first.push(((i - 1) % self.m) as u8);
            i = (i - 1) / self.m;
        }
        Context::from_oldest_first(&oldest_first)
    }

    pub fn depth_of(&self, index: usize) -> usize {
        let mut i = index;
        let mut d = 0;
        while i > 0 {
            i = (i - 1) / self.m;
            d += 1;
        }
        d
    }
}

/// A node label. See the module docs for the storage convention.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    recent_first: Vec<u8>,
}

impl Context {
    /// The empty context λ.
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_oldest_first(symbols: &[u8]) -> Self {
        Self {
            recent_first: symbols.iter().rev().copied().collect(),
        }
    }

    pub fn from_recent_first(recent_first: Vec<u8>) -> Self {
        Self { recent_first }
    }

    /// Parses a label such as `"011"` (oldest first) or `"λ"`.
    pub fn parse(label: &str, alphabet: &Alphabet) -> Result<Self, String> {
        let label = label.trim();
        if label == ROOT_LABEL {
            return Ok(Self::root());
        }
        let mut oldest_first = Vec::with_capacity(label.len());
        for c in label.chars() {
            match alphabet.code_of(c) {
                Some(k) => oldest_first.push(k),
                None => return Err(format!("symbol {c:?} is not in alphabet {alphabet}")),
            }
        }
        Ok(Self::from_oldest_first(&oldest_first))
    }

    pub fn len(&self) -> usize {
        self.recent_first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent_first.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.recent_first.is_empty()
    }

    pub fn recent_first(&self) -> &[u8] {
        &self.recent_first
    }

    pub fn oldest_first(&self) -> Vec<u8> {
        self.recent_first.iter().rev().copied().collect()
    }

    /// The child `k·s`.
    pub fn child(&self, k: u8) -> Self {
        let mut recent_first = Vec::with_capacity(self.len() + 1);
        recent_first.extend_from_slice(&self.recent_first);
        recent_first.push(k);
        Self { recent_first }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.is_root() {
            None
        } else {
            Some(Self {
                recent_first: self.recent_first[..self.len() - 1].to_vec(),
            })
        }
    }

    /// Whether `self` equals the trailing `self.len()` symbols of `other`.
    pub fn is_suffix_of(&self, other: &Context) -> bool {
        other.recent_first.starts_with(&self.recent_first)
    }

    /// Proper suffixes, i.e. strict ancestors, from the root downwards.
    pub fn ancestors(&self) -> impl Iterator<Item = Context> + '_ {
        (0..self.len()).map(|j| Context {
            recent_first: self.recent_first[..j].to_vec(),
        })
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        if self.is_root() {
            ROOT_LABEL.to_string()
        } else {
            self.recent_first
                .iter()
                .rev()
                .map(|&k| alphabet.symbol(k))
                .collect()
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return f.write_str(ROOT_LABEL);
        }
        let wide = self.recent_first.iter().any(|&k| k >= 10);
        for (i, k) in self.recent_first.iter().rev().enumerate() {
            if wide && i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Context({self})")
    }
}

/// A proper, complete leaf set. Equality is leaf-set equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ContextTree {
    leaves: Vec<Context>,
    inner: BTreeSet<Context>,
    depth: usize,
}

impl ContextTree {
    /// The root-only tree `{λ}`.
    pub fn root() -> Self {
        Self {
            leaves: vec![Context::root()],
            inner: BTreeSet::new(),
            depth: 0,
        }
    }

    /// Builds a tree from leaves already known to be proper and complete.
    pub(crate) fn from_valid_leaves(mut leaves: Vec<Context>) -> Self {
        leaves.sort();
        let mut inner = BTreeSet::new();
        for leaf in &leaves {
            inner.extend(leaf.ancestors());
        }
        let depth = leaves.iter().map(Context::len).max().unwrap_or(0);
        Self {
            leaves,
            inner,
            depth,
        }
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> &[Context] {
        &self.leaves
    }

    /// The inner-node set `τ^c`.
    pub fn inner_nodes(&self) -> &BTreeSet<Context> {
        &self.inner
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_leaf(&self, ctx: &Context) -> bool {
        self.leaves.binary_search(ctx).is_ok()
    }

    /// The unique leaf that is a suffix of `past` (oldest symbol first).
    pub fn suffix_map(&self, past: &[u8]) -> Result<&Context, TreeError> {
        self.suffix_index(past).map(|i| &self.leaves[i])
    }

    /// Position in [`ContextTree::leaves`] of the leaf matching `past`.
    pub fn suffix_index(&self, past: &[u8]) -> Result<usize, TreeError> {
        if past.len() < self.depth {
            return Err(TreeError::PastTooShort {
                needed: self.depth,
                got: past.len(),
            });
        }
        let mut node = Context::root();
        let mut back = past.iter().rev();
        loop {
            if let Ok(i) = self.leaves.binary_search(&node) {
                return Ok(i);
            }
            // Completeness guarantees the walk reaches a leaf within `depth` steps.
            let &k = back.next().expect("complete tree reaches a leaf");
            node = node.child(k);
        }
    }

    /// One leaf per line, oldest symbol first.
    pub fn to_tree_file(&self, alphabet: &Alphabet) -> String {
        let mut out = String::new();
        for leaf in &self.leaves {
            out.push_str(&leaf.render(alphabet));
            out.push('\n');
        }
        out
    }

    pub fn render_leaves(&self, alphabet: &Alphabet) -> Vec<String> {
        self.leaves.iter().map(|l| l.render(alphabet)).collect()
    }
}

impl fmt::Debug for ContextTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, leaf) in self.leaves.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{leaf}")?;
        }
        f.write_str("}")
    }
}

/// Checks properness and completeness of a leaf set and builds the tree.
pub fn validate_tree<I>(leaves: I, space: &TreeSpace) -> Result<ContextTree, TreeError>
where
    I: IntoIterator<Item = Context>,
{
    let leaves: Vec<Context> = leaves.into_iter().collect();
    if leaves.is_empty() {
        return Err(TreeError::EmptyLeafSet);
    }
    let mut set = HashSet::with_capacity(leaves.len());
    for leaf in &leaves {
        if leaf.len() > space.depth() {
            return Err(TreeError::DepthOverflow {
                leaf: leaf.to_string(),
                depth: space.depth(),
            });
        }
        if leaf.recent_first().iter().any(|&k| k as usize >= space.m()) {
            return Err(TreeError::SymbolOutOfRange {
                leaf: leaf.to_string(),
                m: space.m(),
            });
        }
        if !set.insert(leaf) {
            return Err(TreeError::DuplicateLeaf(leaf.to_string()));
        }
    }
    for leaf in &leaves {
        if let Some(suffix) = leaf.ancestors().find(|a| set.contains(a)) {
            return Err(TreeError::SuffixViolation {
                suffix: suffix.to_string(),
                leaf: leaf.to_string(),
            });
        }
    }
    let mut inner = BTreeSet::new();
    for leaf in &leaves {
        inner.extend(leaf.ancestors());
    }
    for node in &inner {
        for k in 0..space.m() as u8 {
            let child = node.child(k);
            if !set.contains(&child) && !inner.contains(&child) {
                return Err(TreeError::MissingChild {
                    node: node.to_string(),
                    child: child.to_string(),
                });
            }
        }
    }
    Ok(ContextTree::from_valid_leaves(leaves))
}

/// Number of grow/prune operations separating two trees, `|a^c △ b^c|`.
pub fn structural_distance(a: &ContextTree, b: &ContextTree) -> usize {
    a.inner.symmetric_difference(&b.inner).count()
}

/// The perfect tree of depth `L`.
pub fn maximal_tree(space: &TreeSpace) -> ContextTree {
    let leaves = space.leaf_range().map(|i| space.context_at(i)).collect();
    ContextTree::from_valid_leaves(leaves)
}

/// `|T_L|` from `|T_0| = 1`, `|T_{k+1}| = |T_k|^m + 1`; `None` on overflow.
pub fn tree_count(m: usize, depth: usize) -> Option<u128> {
    let mut count: u128 = 1;
    for _ in 0..depth {
        let mut power: u128 = 1;
        for _ in 0..m {
            power = power.checked_mul(count)?;
        }
        count = power.checked_add(1)?;
    }
    Some(count)
}

/// Every tree of the space exactly once, via the subtree product decomposition.
pub fn enumerate_trees(
    space: &TreeSpace,
    limit: u128,
) -> Result<impl Iterator<Item = ContextTree>, TreeError> {
    match tree_count(space.m(), space.depth()) {
        Some(n) if n <= limit => {}
        count => {
            return Err(TreeError::TooManyTrees {
                count: count.map_or_else(|| "more than u128::MAX".to_string(), |n| n.to_string()),
                limit,
            })
        }
    }
    let leaf_sets = subtrees(&Context::root(), space.depth(), space.m());
    Ok(leaf_sets.into_iter().map(ContextTree::from_valid_leaves))
}

fn subtrees(node: &Context, remaining: usize, m: usize) -> Vec<Vec<Context>> {
    let mut out = vec![vec![node.clone()]];
    if remaining == 0 {
        return out;
    }
    let mut combos: Vec<Vec<Context>> = vec![Vec::new()];
    for k in 0..m as u8 {
        let child_sets = subtrees(&node.child(k), remaining - 1, m);
        let mut next = Vec::with_capacity(combos.len() * child_sets.len());
        for prefix in &combos {
            for set in &child_sets {
                let mut joined = prefix.clone();
                joined.extend(set.iter().cloned());
                next.push(joined);
            }
        }
        combos = next;
    }
    out.extend(combos);
    out
}

/// Parses a tree file body: one leaf per line, `λ` (or an empty file) for the root tree.
pub fn parse_tree_str(
    text: &str,
    alphabet: &Alphabet,
    space: &TreeSpace,
) -> Result<ContextTree, TreeError> {
    let mut leaves = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let ctx = Context::parse(line, alphabet).map_err(|message| TreeError::Parse {
            line: i + 1,
            message,
        })?;
        leaves.push(ctx);
        lines.push(i + 1);
    }
    if leaves.is_empty() {
        return Ok(ContextTree::root());
    }
    let line_of = |label: &str| {
        leaves
            .iter()
            .position(|l| l.to_string() == label)
            .map(|p| lines[p])
    };
    validate_tree(leaves.clone(), space).map_err(|err| {
        let line = match &err {
            TreeError::DuplicateLeaf(leaf) => leaves
                .iter()
                .enumerate()
                .filter(|(_, l)| &l.to_string() == leaf)
                .nth(1)
                .map(|(p, _)| lines[p]),
            TreeError::DepthOverflow { leaf, .. }
            | TreeError::SymbolOutOfRange { leaf, .. }
            | TreeError::SuffixViolation { leaf, .. } => line_of(leaf),
            _ => None,
        };
        match line {
            Some(line) => TreeError::AtLine {
                line,
                source: Box::new(err),
            },
            None => err,
        }
    })
}

pub fn parse_tree_file(
    path: &Path,
    alphabet: &Alphabet,
    space: &TreeSpace,
) -> Result<ContextTree, TreeError> {
    let text = fs::read_to_string(path).map_err(|source| TreeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tree_str(&text, alphabet, space)
}
