//! Sums and maxima of context-tree functions over all trees, evidence,
//! posterior probabilities and MAP trees.
//!
//! For a node weight `f`, define bottom-up over the maximal tree
//!
//! ```text
//! Σ(s) = f(s)                               if ℓ(s) = L
//!      = Σ_k-product Σ(k·s)  +  f(s)        otherwise
//! Υ(s) = f(s)                               if ℓ(s) = L
//!      = max(f(s), ∏_k Υ(k·s))              otherwise
//! ```
//!
//! Then `Σ(λ)` is the sum of `F(τ) = ∏_{s∈τ} f(s)` over every tree of depth
//! at most `L`, and `Υ(λ)` its maximum. The Dirichlet-marginalized
//! likelihood `Q_α(τ, z)` is a product of per-node terms, so evidence and
//! posterior follow from two passes: one over `f` and one over `f·q`.

use crate::counts::CountTable;
use crate::symbols::Sequence;
use crate::trees::{ContextTree, TreeSpace};
use crate::weights::{LogWeight, NodeWeightFunction};
use crate::{Error, Result};

/// Log of the Dirichlet-multinomial marginal of one node's counts:
/// `Γ(mα)/Γ(α)^m · ∏_k Γ(c_k+α) / Γ(Σc + mα)`, with `m = counts.len()`.
///
/// A node with no observations contributes exactly `1`.
pub fn q_alpha_node_term(counts: &[u64], alpha: f64) -> LogWeight {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return LogWeight::ONE;
    }
    let m_alpha = counts.len() as f64 * alpha;
    let lg_alpha = libm::lgamma(alpha);
    let mut ln = 0.0;
    for &c in counts.iter().filter(|&&c| c > 0) {
        ln += libm::lgamma(c as f64 + alpha) - lg_alpha;
    }
    ln -= libm::lgamma(total as f64 + m_alpha) - libm::lgamma(m_alpha);
    LogWeight::Ln(ln)
}

/// Node terms `log Q_α` for every node of the count table's space.
pub fn q_alpha_terms(counts: &CountTable, alpha: f64) -> Vec<LogWeight> {
    (0..counts.space().node_count())
        .map(|i| q_alpha_node_term(counts.at(i), alpha))
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// `Σ` and `Υ` for every node of the maximal tree, for one node weight.
#[derive(Debug, Clone)]
pub struct RecursionTable {
    space: TreeSpace,
    log_f: Vec<LogWeight>,
    sigma: Vec<LogWeight>,
    upsilon: Vec<LogWeight>,
}

/// A maximizing tree together with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MapTree {
    pub tree: ContextTree,
    pub log_weight: LogWeight,
    /// Set when some visited node compared equal against its children, i.e.
    /// another maximizer exists.
    pub tie: bool,
}

impl RecursionTable {
    /// Runs the recursion on `f`, or on `f·q` when per-node terms `q` are given.
    pub fn build(f: &NodeWeightFunction, q: Option<&[LogWeight]>) -> Result<Self> {
        let space = *f.space();
        let mut log_f = f.node_log_weights();
        if let Some(q) = q {
            if q.len() != log_f.len() {
                return Err(Error::NodeTermLength {
                    expected: log_f.len(),
                    got: q.len(),
                });
            }
            for (w, &qi) in log_f.iter_mut().zip(q) {
                *w = *w * qi;
            }
        }
        Ok(Self::from_node_weights(space, log_f))
    }

    /// Panics if `log_f` does not hold one weight per node.
    pub fn from_node_weights(space: TreeSpace, log_f: Vec<LogWeight>) -> Self {
        assert_eq!(log_f.len(), space.node_count());
        let m = space.m();
        let inner_end = space.leaf_range().start;
        let mut sigma = log_f.clone();
        let mut upsilon = log_f.clone();
        for i in (0..inner_end).rev() {
            let first = space.first_child(i);
            let mut sum_prod = LogWeight::ONE;
            let mut max_prod = LogWeight::ONE;
            for c in first..first + m {
                sum_prod = sum_prod * sigma[c];
                max_prod = max_prod * upsilon[c];
            }
            sigma[i] = sum_prod + log_f[i];
            upsilon[i] = log_f[i].max(max_prod);
        }
        Self {
            space,
            log_f,
            sigma,
            upsilon,
        }
    }

    pub fn space(&self) -> &TreeSpace {
        &self.space
    }

    /// `log Σ(λ)`: the log-sum of the function over all trees.
    pub fn sum(&self) -> LogWeight {
        self.sigma[0]
    }

    /// `log Υ(λ)`: the log-maximum over all trees.
    pub fn max(&self) -> LogWeight {
        self.upsilon[0]
    }

    pub fn sigma(&self) -> &[LogWeight] {
        &self.sigma
    }

    pub fn upsilon(&self) -> &[LogWeight] {
        &self.upsilon
    }

    pub fn node_weights(&self) -> &[LogWeight] {
        &self.log_f
    }

    /// `Σ_{s∈τ} log f(s)` using the stored node weights.
    pub fn tree_weight(&self, tree: &ContextTree) -> Result<LogWeight> {
        let mut acc = LogWeight::ONE;
        for leaf in tree.leaves() {
            let i = self
                .space
                .index_of(leaf)
                .ok_or_else(|| Error::TreeOutsideSpace(format!("{tree:?}")))?;
            acc = acc * self.log_f[i];
        }
        Ok(acc)
    }

    /// Top-down pruning: `s` stays a leaf iff `f(s) ≥ ∏_k Υ(k·s)`.
    pub fn map_tree(&self) -> Result<MapTree> {
        if self.max().is_zero() {
            return Err(Error::NoPositiveTree);
        }
        let m = self.space.m();
        let mut leaves = Vec::new();
        let mut tie = false;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if self.space.is_max_depth(i) {
                leaves.push(self.space.context_at(i));
                continue;
            }
            let first = self.space.first_child(i);
            let children = LogWeight::product((first..first + m).map(|c| self.upsilon[c]));
            if self.log_f[i] >= children {
                tie |= self.log_f[i] == children;
                leaves.push(self.space.context_at(i));
            } else {
                stack.extend((first..first + m).rev());
            }
        }
        let tree = ContextTree::from_valid_leaves(leaves);
        let log_weight = self.tree_weight(&tree)?;
        Ok(MapTree {
            tree,
            log_weight,
            tie,
        })
    }
}

pub fn build_recursion(f: &NodeWeightFunction, q: Option<&[LogWeight]>) -> Result<RecursionTable> {
    RecursionTable::build(f, q)
}

/// `log Σ_τ F(τ)`.
pub fn sum_over_trees(f: &NodeWeightFunction) -> LogWeight {
    RecursionTable::from_node_weights(*f.space(), f.node_log_weights()).sum()
}

/// `log max_τ F(τ)`.
pub fn max_over_trees(f: &NodeWeightFunction) -> LogWeight {
    RecursionTable::from_node_weights(*f.space(), f.node_log_weights()).max()
}

pub fn map_tree(table: &RecursionTable) -> Result<MapTree> {
    table.map_tree()
}

/// `log π_F(τ) = log F(τ) − log Σ_F(λ)`.
pub fn prior_prob(f: &NodeWeightFunction, tree: &ContextTree) -> Result<LogWeight> {
    let table = RecursionTable::build(f, None)?;
    normalized(table.tree_weight(tree)?, table.sum(), f)
}

fn normalized(weight: LogWeight, total: LogWeight, f: &NodeWeightFunction) -> Result<LogWeight> {
    weight
        .checked_div(total)
        .ok_or_else(|| Error::NonNormalizable(f.to_string()))
}

/// Count table and `Q_α` node terms for one sequence, shared across priors.
#[derive(Debug, Clone)]
pub struct Analysis {
    counts: CountTable,
    alpha: f64,
    q: Vec<LogWeight>,
}

impl Analysis {
    pub fn new(z: &Sequence, space: &TreeSpace, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let counts = CountTable::build(z, space)?;
        Ok(Self::from_counts(counts, alpha))
    }

    /// Panics if `alpha` is not positive; use [`Analysis::new`] for checked input.
    pub fn from_counts(counts: CountTable, alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha.is_finite());
        let q = q_alpha_terms(&counts, alpha);
        Self { counts, alpha, q }
    }

    pub fn space(&self) -> &TreeSpace {
        self.counts.space()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    pub fn q_terms(&self) -> &[LogWeight] {
        &self.q
    }

    /// Runs the prior and joint recursions for `f`.
    pub fn fit(&self, f: &NodeWeightFunction) -> Result<Fit> {
        if f.space() != self.space() {
            return Err(crate::WeightError::SpaceMismatch.into());
        }
        let prior = RecursionTable::build(f, None)?;
        if prior.sum().is_zero() {
            return Err(Error::NonNormalizable(f.to_string()));
        }
        let joint = RecursionTable::build(f, Some(&self.q))?;
        Ok(Fit {
            function: f.clone(),
            prior,
            joint,
        })
    }

    pub fn log_evidence(&self, f: &NodeWeightFunction) -> Result<f64> {
        Ok(self.fit(f)?.log_evidence())
    }
}

/// Prior and joint recursion tables for one prior and one sequence.
#[derive(Debug, Clone)]
pub struct Fit {
    function: NodeWeightFunction,
    prior: RecursionTable,
    joint: RecursionTable,
}

impl Fit {
    pub fn function(&self) -> &NodeWeightFunction {
        &self.function
    }

    pub fn prior_table(&self) -> &RecursionTable {
        &self.prior
    }

    pub fn joint_table(&self) -> &RecursionTable {
        &self.joint
    }

    /// `ln E(z; F, α) = ln Σ_{FQ}(λ) − ln Σ_F(λ)`.
    pub fn log_evidence(&self) -> f64 {
        let ratio = self
            .joint
            .sum()
            .checked_div(self.prior.sum())
            .expect("prior checked normalizable");
        ratio.ln().expect("Q_α terms are positive")
    }

    pub fn log10_evidence(&self) -> f64 {
        self.log_evidence() / std::f64::consts::LN_10
    }

    pub fn map(&self) -> Result<MapTree> {
        self.joint.map_tree()
    }

    pub fn prior_prob(&self, tree: &ContextTree) -> Result<LogWeight> {
        normalized(self.prior.tree_weight(tree)?, self.prior.sum(), &self.function)
    }

    pub fn posterior_prob(&self, tree: &ContextTree) -> Result<LogWeight> {
        normalized(self.joint.tree_weight(tree)?, self.joint.sum(), &self.function)
    }

    pub fn summary(&self, reference: Option<&ContextTree>) -> Result<PosteriorSummary> {
        let map = self.map()?;
        let map_log_posterior = map
            .log_weight
            .checked_div(self.joint.sum())
            .and_then(LogWeight::ln)
            .ok_or(Error::NoPositiveTree)?;
        let reference = match reference {
            Some(tree) => Some(ReferenceProbabilities {
                tree: tree.clone(),
                prior_log_prob: self.prior_prob(tree)?,
                posterior_log_prob: self.posterior_prob(tree)?,
            }),
            None => None,
        };
        Ok(PosteriorSummary {
            log_evidence: self.log_evidence(),
            log10_evidence: self.log10_evidence(),
            map_tree: map.tree,
            map_log_posterior,
            map_tie: map.tie,
            reference,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProbabilities {
    pub tree: ContextTree,
    pub prior_log_prob: LogWeight,
    pub posterior_log_prob: LogWeight,
}

/// Evidence, MAP tree and optional reference-tree probabilities (natural logs).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub log_evidence: f64,
    pub log10_evidence: f64,
    pub map_tree: ContextTree,
    pub map_log_posterior: f64,
    pub map_tie: bool,
    pub reference: Option<ReferenceProbabilities>,
}

pub fn evidence(
    z: &Sequence,
    f: &NodeWeightFunction,
    alpha: f64,
    reference: Option<&ContextTree>,
) -> Result<PosteriorSummary> {
    Analysis::new(z, f.space(), alpha)?.fit(f)?.summary(reference)
}

/// `log π_{F,α}(τ | z)`; [`LogWeight::Zero`] when `F(τ) = 0`.
pub fn posterior_prob(
    z: &Sequence,
    f: &NodeWeightFunction,
    alpha: f64,
    tree: &ContextTree,
) -> Result<LogWeight> {
    Analysis::new(z, f.space(), alpha)?.fit(f)?.posterior_prob(tree)
}
